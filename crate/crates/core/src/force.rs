//! Grasp force model in the synergy subspace.
//!
//! Contact forces balancing a grasped object are `f_c = G†ω + ξ·Ê·Δe`, where
//! `G` is the grasp matrix, `ω` the wrench to balance, `ξ` the internal-force
//! stiffness from joint displacement to contact force and `Δe` a synergy
//! displacement. Forces are expressed per contact in a local frame whose
//! `z` axis is the inward contact normal. Motor currents follow from
//! `f_c = J_h·K_m·I`.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::linalg::{pseudo_inverse, truncated_pseudo_inverse, CONDITION_LIMIT};
use crate::synergy::{SynergyBasis, SynergyPoint};
use crate::{Error, Result};

pub const DEFAULT_FORCE_GAIN: f64 = 0.5;

/// Point contact with friction on the object surface.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Contact {
    pub position: [f64; 3],
    /// Inward surface normal (into the object).
    pub normal: [f64; 3],
}

/// Orthonormal contact frame with columns `(t₁, t₂, n)`.
pub fn contact_frame(normal: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let n = normal
        .try_normalize(1e-12)
        .ok_or_else(|| Error::invalid("normal", "contact normal has zero length"))?;
    // helper axis least aligned with n
    let helper = if n.x.abs() <= n.y.abs() && n.x.abs() <= n.z.abs() {
        Vector3::x()
    } else if n.y.abs() <= n.z.abs() {
        Vector3::y()
    } else {
        Vector3::z()
    };
    let t1 = helper.cross(&n).normalize();
    let t2 = n.cross(&t1);
    Ok(Matrix3::from_columns(&[t1, t2, n]))
}

/// `G = [G₁ … G_nc]` with `Gᵢ = [Rᵢ; [pᵢ]ₓRᵢ]`, mapping stacked contact-frame
/// forces to the net wrench `(force, torque)` about the object origin.
pub fn grasp_matrix(contacts: &[Contact]) -> Result<DMatrix<f64>> {
    let mut g = DMatrix::zeros(6, 3 * contacts.len());
    for (i, c) in contacts.iter().enumerate() {
        let r = contact_frame(&Vector3::from(c.normal))?;
        let p = Vector3::from(c.position);
        let torque = p.cross_matrix() * r;
        g.view_mut((0, 3 * i), (3, 3)).copy_from(&r);
        g.view_mut((3, 3 * i), (3, 3)).copy_from(&torque);
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GraspModel {
    /// `G`, 6 × 3·n_c.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::matrix"))]
    pub grasp_matrix: DMatrix<f64>,
    /// `ξ`, 3·n_c × J.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::matrix"))]
    pub internal_stiffness: DMatrix<f64>,
    /// `J_h`, 3·n_c × motors.
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::matrix"))]
    pub hand_jacobian: DMatrix<f64>,
    /// Diagonal of `K_m`, one per motor.
    pub motor_constants: Vec<f64>,
}

impl GraspModel {
    pub fn contacts(&self) -> usize {
        self.grasp_matrix.ncols() / 3
    }

    pub fn validate(&self) -> Result<()> {
        let rows = self.grasp_matrix.ncols();
        Error::check_dim(6, self.grasp_matrix.nrows())?;
        if rows == 0 || rows % 3 != 0 {
            return Err(Error::invalid("grasp_matrix", "needs 3 columns per contact"));
        }
        Error::check_dim(rows, self.internal_stiffness.nrows())?;
        Error::check_dim(rows, self.hand_jacobian.nrows())?;
        Error::check_dim(self.hand_jacobian.ncols(), self.motor_constants.len())?;
        let finite = self
            .grasp_matrix
            .iter()
            .chain(self.internal_stiffness.iter())
            .chain(self.hand_jacobian.iter())
            .chain(self.motor_constants.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::NonFinite("grasp model"));
        }
        Ok(())
    }

    /// `J_h·K_m`.
    pub fn actuation(&self) -> DMatrix<f64> {
        let mut a = self.hand_jacobian.clone();
        for (mut col, k) in a.column_iter_mut().zip(&self.motor_constants) {
            col *= *k;
        }
        a
    }

    /// `ξ·Ê`, contact-force change per unit synergy displacement.
    pub fn synergy_stiffness(&self, basis: &SynergyBasis) -> Result<DMatrix<f64>> {
        Error::check_dim(basis.joint_dim(), self.internal_stiffness.ncols())?;
        Ok(&self.internal_stiffness * basis.e_hat())
    }
}

/// Per-contact forces `(F_x, F_y, F_z)` in contact frames, `z` normal.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ContactForces(pub Vec<[f64; 3]>);

impl ContactForces {
    pub fn from_stacked(v: &DVector<f64>) -> Result<Self> {
        if v.len() % 3 != 0 {
            return Err(Error::invalid("forces", "length must be a multiple of 3"));
        }
        Ok(Self(v.as_slice().chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()))
    }

    pub fn stacked(&self) -> DVector<f64> {
        DVector::from_iterator(self.0.len() * 3, self.0.iter().flatten().copied())
    }

    /// Grip magnitude: mean normal force over contacts.
    pub fn grip(&self) -> f64 {
        if self.0.is_empty() {
            return 0.0;
        }
        self.0.iter().map(|f| f[2]).sum::<f64>() / self.0.len() as f64
    }

    /// Friction-cone flag per contact.
    pub fn stability(&self, mu: f64) -> Vec<bool> {
        self.0.iter().map(|f| friction_cone_check(f, mu)).collect()
    }
}

/// `f_c = G†ω + ξ·Ê·Δe`.
pub fn contact_forces(
    model: &GraspModel,
    omega: &[f64; 6],
    basis: &SynergyBasis,
    delta_e: &SynergyPoint,
) -> Result<ContactForces> {
    model.validate()?;
    Error::check_dim(basis.synergy_dim(), delta_e.len())?;
    let g_pinv = pseudo_inverse(&model.grasp_matrix, CONDITION_LIMIT)?;
    let balance = g_pinv * DVector::from_column_slice(omega);
    let internal = model.synergy_stiffness(basis)? * &**delta_e;
    ContactForces::from_stacked(&(balance + internal))
}

/// Stability test `F_z / √(F_x² + F_y²) > μ`. Zero tangential force with a
/// positive normal counts as stable; a non-positive normal never does.
pub fn friction_cone_check(force: &[f64; 3], mu: f64) -> bool {
    let [fx, fy, fz] = *force;
    if !(fz > 0.0) {
        return false;
    }
    let tangential = libm::sqrt(fx * fx + fy * fy);
    if tangential == 0.0 {
        return true;
    }
    fz / tangential > mu
}

/// Least-squares currents `I = (J_h·K_m)†·f_c`.
pub fn motor_currents(model: &GraspModel, forces: &ContactForces) -> Result<DVector<f64>> {
    model.validate()?;
    let f = forces.stacked();
    Error::check_dim(model.hand_jacobian.nrows(), f.len())?;
    Ok(pseudo_inverse(&model.actuation(), CONDITION_LIMIT)? * f)
}

/// Maps requested contact forces to motor currents. The linear relation
/// `f_c = J_h·K_m·I` is the stock mapping; learned mappings plug in here.
pub trait CurrentMap {
    fn currents(&self, forces: &ContactForces) -> Result<DVector<f64>>;

    /// Contact forces produced by currents.
    fn forces(&self, currents: &DVector<f64>) -> Result<ContactForces>;
}

impl CurrentMap for GraspModel {
    fn currents(&self, forces: &ContactForces) -> Result<DVector<f64>> {
        motor_currents(self, forces)
    }

    fn forces(&self, currents: &DVector<f64>) -> Result<ContactForces> {
        Error::check_dim(self.motor_constants.len(), currents.len())?;
        ContactForces::from_stacked(&(self.actuation() * currents))
    }
}

/// Timestamped grip-force magnitudes (newtons, seconds).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ForceProfile {
    pub times: Vec<f64>,
    pub forces: Vec<f64>,
    /// Nominal ramp rate in N/s.
    pub ramp_rate: f64,
}

impl ForceProfile {
    pub fn new(times: Vec<f64>, forces: Vec<f64>, ramp_rate: f64) -> Result<Self> {
        if times.len() != forces.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: forces.len(),
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::NonMonotonicTime(0));
        }
        if times.iter().chain(&forces).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("force profile"));
        }
        Ok(Self {
            times,
            forces,
            ramp_rate,
        })
    }

    /// Linear ramp from `start` toward `hold` at `rate` N/s, then constant,
    /// sampled every `dt` seconds over `duration`.
    pub fn ramp(start: f64, hold: f64, rate: f64, dt: f64, duration: f64) -> Result<Self> {
        if !(dt > 0.0 && duration >= 0.0 && rate > 0.0) {
            return Err(Error::invalid("ramp", "dt and rate must be positive"));
        }
        let steps = libm::floor(duration / dt + 1e-9) as usize;
        let (times, forces) = (0..=steps)
            .map(|i| {
                let t = i as f64 * dt;
                let f = if hold >= start {
                    (start + rate * t).min(hold)
                } else {
                    (start - rate * t).max(hold)
                };
                (t, f)
            })
            .unzip();
        Self::new(times, forces, rate)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<(f64, f64)> {
        Some((*self.times.last()?, *self.forces.last()?))
    }
}

/// Synergy correction `Δe = gain·(ξÊ)†·Δf`, where `Δf` places the latest
/// grip error (target minus measured) on every contact normal.
pub fn adapt_force(
    target: &ForceProfile,
    measured: &ForceProfile,
    model: &GraspModel,
    basis: &SynergyBasis,
    gain: f64,
) -> Result<SynergyPoint> {
    if !(gain > 0.0 && gain.is_finite()) {
        return Err(Error::invalid("gain", "must be positive"));
    }
    if target.len() != measured.len() {
        return Err(Error::DimensionMismatch {
            expected: target.len(),
            found: measured.len(),
        });
    }
    if target.times != measured.times {
        return Err(Error::invalid("profiles", "profiles are not time-aligned"));
    }
    let (Some((_, want)), Some((_, got))) = (target.last(), measured.last()) else {
        return Err(Error::invalid("profiles", "empty force profile"));
    };
    model.validate()?;
    let stiffness = model.synergy_stiffness(basis)?;
    let nc = model.contacts();
    let error = want - got;
    let mut delta_f = DVector::zeros(3 * nc);
    for c in 0..nc {
        delta_f[3 * c + 2] = error;
    }
    // ξ may couple fewer directions than the basis holds; uncoupled
    // synergies get no correction
    let correction = truncated_pseudo_inverse(&stiffness, CONDITION_LIMIT) * delta_f * gain;
    Ok(SynergyPoint::new(correction))
}
