//! Simulated grip: a three-finger grasp model for the task object and a
//! force loop that ramps the grip force to its hold value through synergy
//! corrections. The tactile signal is a first-order lag of the grip force
//! produced by the motor currents.

use kernsyn_core::force::{adapt_force, contact_forces, grasp_matrix, Contact, CurrentMap, ForceProfile, GraspModel};
use kernsyn_core::linalg::{pseudo_inverse, CONDITION_LIMIT};
use kernsyn_core::synergy::{SynergyBasis, SynergyPoint};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::ForceConfig;
use crate::error::{Error, Result};
use crate::scenario::{HandModel, TaskScenario};

pub const GRAVITY: f64 = 9.81;
const CONTACTS: usize = 3;

/// Object-frame contacts spaced 120° apart on a horizontal circle through
/// the centroid, normals pointing at the axis.
pub fn tripod_contacts(radius: f64) -> Vec<Contact> {
    (0..CONTACTS)
        .map(|i| {
            let phi = std::f64::consts::FRAC_PI_2 + i as f64 * 2.0 * std::f64::consts::PI / CONTACTS as f64;
            let (c, s) = (phi.cos(), phi.sin());
            Contact {
                position: [radius * c, radius * s, 0.0],
                normal: [-c, -s, 0.0],
            }
        })
        .collect()
}

/// Wrench the contacts must supply to carry `mass` against gravity.
pub fn support_wrench(mass: f64) -> [f64; 6] {
    [0.0, 0.0, mass * GRAVITY, 0.0, 0.0, 0.0]
}

fn orthonormalize(vectors: &[DVector<f64>]) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for q in &out {
            w -= q * q.dot(&w);
        }
        if w.norm() > 1e-9 {
            out.push(w.normalize());
        }
    }
    out
}

/// Grasp model of the scenario's tripod grasp.
///
/// The internal stiffness couples the first generative synergy to the
/// squeeze force (equal normal push at every contact) and the second to an
/// internal shear pattern. The hand Jacobian spans both patterns and the
/// weight-support forces, so the motor-current round trip reproduces every
/// force the loop commands.
pub fn grasp_model(scenario: &TaskScenario, hand: &HandModel, cfg: &ForceConfig) -> Result<GraspModel> {
    let contacts = tripod_contacts(scenario.contact_radius);
    let g = grasp_matrix(&contacts)?;
    let n = 3 * CONTACTS;
    let squeeze = DVector::from_fn(n, |i, _| if i % 3 == 2 { 1.0 } else { 0.0 }).normalize();
    let null_proj = DMatrix::identity(n, n) - pseudo_inverse(&g, CONDITION_LIMIT)? * &g;
    let seed = DVector::from_column_slice(&[1.0, 0.3, 0.0, -0.2, 0.5, 0.0, 0.4, -0.6, 0.0]);
    let shear = orthonormalize(&[squeeze.clone(), &null_proj * seed])
        .pop()
        .filter(|v| v.dot(&squeeze).abs() < 1e-9)
        .ok_or_else(|| Error::ConfigInvalid("no internal shear pattern for this contact layout".into()))?;
    let d1 = hand.directions.column(0).transpose();
    let d2 = hand.directions.column(1).transpose();
    let stiffness = &squeeze * d1 * cfg.grip_stiffness + &shear * d2 * cfg.shear_stiffness;

    let support = pseudo_inverse(&g, CONDITION_LIMIT)? * DVector::from_column_slice(&support_wrench(1.0));
    let mut spanning = vec![squeeze, shear, support];
    spanning.extend((0..n).map(|i| DVector::from_fn(n, |r, _| ((r * 7 + i * 3) % 5) as f64 - 2.0 + if r == i { 3.0 } else { 0.0 })));
    let q = orthonormalize(&spanning);
    let motors = hand.theta0.len();
    if q.len() < motors {
        return Err(Error::ConfigInvalid("hand Jacobian would be rank deficient".into()));
    }
    let q = DMatrix::from_columns(&q[..motors]);
    // fixed upper-triangular mixing keeps the column space of q
    let mix = DMatrix::from_fn(motors, motors, |r, c| match r.cmp(&c) {
        std::cmp::Ordering::Equal => 0.8 + 0.05 * r as f64,
        std::cmp::Ordering::Less => 0.1,
        std::cmp::Ordering::Greater => 0.0,
    });
    let model = GraspModel {
        grasp_matrix: g,
        internal_stiffness: stiffness,
        hand_jacobian: q * mix,
        motor_constants: (0..motors).map(|i| if i < 4 { 0.9 } else { 1.1 }).collect(),
    };
    model.validate()?;
    Ok(model)
}

/// Resolved force targets for one task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceTargets {
    pub mu: f64,
    pub band: [f64; 2],
    pub hold: f64,
}

impl ForceTargets {
    pub fn resolve(scenario: &TaskScenario, cfg: &ForceConfig) -> Result<Self> {
        let t = Self {
            mu: cfg.mu.unwrap_or(scenario.mu),
            band: cfg.band.unwrap_or(scenario.band),
            hold: cfg.hold.unwrap_or(scenario.hold),
        };
        if !(t.hold >= t.band[0] && t.hold <= t.band[1]) {
            return Err(Error::ConfigInvalid(format!(
                "force hold {} lies outside the band [{}, {}]",
                t.hold, t.band[0], t.band[1]
            )));
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceRecord {
    pub t: f64,
    pub target: f64,
    /// Grip force produced by the motor currents.
    pub applied: f64,
    /// Lagged tactile reading.
    pub measured: f64,
    pub contact_forces: Vec<[f64; 3]>,
    pub currents: Vec<f64>,
    /// Friction-cone test per contact.
    pub stable: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceRun {
    pub targets: ForceTargets,
    pub records: Vec<ForceRecord>,
    pub settled: bool,
    pub settle_time: Option<f64>,
    pub final_grip: f64,
    pub all_stable: bool,
    /// Accumulated synergy correction at the end of the loop.
    pub correction: Vec<f64>,
}

impl ForceRun {
    pub fn within_band(&self) -> bool {
        self.final_grip >= self.targets.band[0] && self.final_grip <= self.targets.band[1]
    }
}

/// Runs the grip loop until the measured force has tracked the hold value
/// within `settle_tol` for `settle_steps` consecutive steps, or until
/// `max_duration`.
pub fn simulate_grip(
    model: &GraspModel,
    omega: &[f64; 6],
    basis: &SynergyBasis,
    targets: &ForceTargets,
    cfg: &ForceConfig,
) -> Result<ForceRun> {
    let s = basis.synergy_dim();
    let profile = ForceProfile::ramp(targets.band[0], targets.hold, cfg.ramp_rate, cfg.dt, cfg.max_duration)?;
    let zero = SynergyPoint::zeros(s);
    let unloaded = contact_forces(model, omega, basis, &zero)?.grip();
    // preload to the lower band edge
    let start = ForceProfile::new(vec![0.0], vec![targets.band[0]], cfg.ramp_rate)?;
    let at_rest = ForceProfile::new(vec![0.0], vec![unloaded], cfg.ramp_rate)?;
    let mut correction: DVector<f64> = adapt_force(&start, &at_rest, model, basis, 1.0)?.into_inner();

    let alpha = 1.0 - (-cfg.dt / cfg.lag).exp();
    let applied_now = |c: &DVector<f64>| -> Result<_> {
        let commanded = contact_forces(model, omega, basis, &SynergyPoint::new(c.clone()))?;
        let currents = model.currents(&commanded)?;
        let applied = model.forces(&currents)?;
        Ok((applied, currents))
    };
    let mut measured = applied_now(&correction)?.0.grip();
    let mut records = Vec::with_capacity(profile.len());
    let mut measured_log = Vec::with_capacity(profile.len());
    let (mut streak, mut settle_time) = (0usize, None);
    for k in 0..profile.len() {
        let (t, target) = (profile.times[k], profile.forces[k]);
        let (applied, currents) = applied_now(&correction)?;
        let grip = applied.grip();
        records.push(ForceRecord {
            t,
            target,
            applied: grip,
            measured,
            stable: applied.stability(targets.mu),
            contact_forces: applied.0,
            currents: currents.iter().copied().collect(),
        });
        measured_log.push(measured);

        if target == targets.hold && (target - measured).abs() < cfg.settle_tol {
            streak += 1;
            if streak >= cfg.settle_steps {
                settle_time = Some(t);
                break;
            }
        } else {
            streak = 0;
        }

        let wanted = ForceProfile::new(profile.times[..=k].to_vec(), profile.forces[..=k].to_vec(), cfg.ramp_rate)?;
        let sensed = ForceProfile::new(profile.times[..=k].to_vec(), measured_log.clone(), cfg.ramp_rate)?;
        correction += adapt_force(&wanted, &sensed, model, basis, cfg.gain)?.into_inner();
        measured += alpha * (grip - measured);
    }
    let all_stable = records.iter().all(|r| r.stable.iter().all(|&b| b));
    Ok(ForceRun {
        targets: *targets,
        settled: settle_time.is_some(),
        settle_time,
        final_grip: records.last().map_or(measured, |r| r.measured),
        all_stable,
        correction: correction.iter().copied().collect(),
        records,
    })
}
