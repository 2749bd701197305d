//! Kernelized movement primitives over a probabilistic reference trajectory.
//!
//! With `k*` the row block `[k(t*, tᵢ)·I_S]ᵢ`, `K` the block kernel matrix of
//! the reference times, `μ` the stacked reference means and `Σ` the
//! block-diagonal of reference covariances:
//!
//! ```text
//! E[e(t*)] = k* (K + λR)⁻¹ μ
//! D[e(t*)] = (N/λ) (k(t*, t*)·I − k* (K + λΣ)⁻¹ k*ᵀ)
//! ```
//!
//! `R` is the identity by default ([`MeanRegularizer::Identity`]). Choosing
//! [`MeanRegularizer::ReferenceCovariance`] uses `R = Σ`, which lets
//! low-variance via-points pin the mean; adaptation needs that mode. Both
//! systems are solved through Cholesky factors, never explicit inversion of
//! the mean system.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::kernel::{build_kernel_matrix, KernelSpec};
use crate::linalg::{cholesky, nearest_psd, spd_condition, CONDITION_LIMIT};
use crate::synergy::SynergyPoint;
use crate::trajectory::ReferenceTrajectory;
use crate::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Regularizer paired with `λ` in the mean system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "snake_case"))]
pub enum MeanRegularizer {
    /// `(K + λI)⁻¹μ`
    #[default]
    Identity,
    /// `(K + λΣ)⁻¹μ`
    ReferenceCovariance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct KmpSettings {
    pub kernel: KernelSpec,
    pub lambda: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub mean_regularizer: MeanRegularizer,
}

impl KmpSettings {
    pub fn new(kernel: KernelSpec, lambda: f64) -> Self {
        Self {
            kernel,
            lambda,
            mean_regularizer: MeanRegularizer::Identity,
        }
    }

    pub fn with_regularizer(mut self, r: MeanRegularizer) -> Self {
        self.mean_regularizer = r;
        self
    }
}

/// Desired synergy value at a time, with its confidence as a covariance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ViaPoint {
    pub t_star: f64,
    pub desired_e: SynergyPoint,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::matrix"))]
    pub desired_cov: DMatrix<f64>,
}

impl ViaPoint {
    pub fn new(t_star: f64, desired_e: SynergyPoint, desired_cov: DMatrix<f64>) -> Result<Self> {
        let v = Self {
            t_star,
            desired_e,
            desired_cov,
        };
        v.validate()?;
        Ok(v)
    }

    /// Via-point with isotropic covariance `variance·I`.
    pub fn isotropic(t_star: f64, desired_e: SynergyPoint, variance: f64) -> Result<Self> {
        let s = desired_e.len();
        Self::new(t_star, desired_e, DMatrix::identity(s, s) * variance)
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.desired_e.len();
        Error::check_dim(s, self.desired_cov.nrows())?;
        Error::check_dim(s, self.desired_cov.ncols())?;
        if !self.t_star.is_finite() || !self.desired_e.is_finite() {
            return Err(Error::NonFinite("via-point"));
        }
        let asym = (&self.desired_cov - self.desired_cov.transpose()).amax();
        if asym > 1e-12 * self.desired_cov.amax().max(1.0) || cholesky(&self.desired_cov).is_none() {
            return Err(Error::invalid("desired_cov", "must be symmetric positive definite"));
        }
        Ok(())
    }
}

/// Fitted primitive; immutable and safe to query from several threads.
#[derive(Debug, Clone, PartialEq)]
pub struct KmpModel {
    settings: KmpSettings,
    reference: ReferenceTrajectory,
    mean_factor: DVector<f64>,
    cov_factor: DMatrix<f64>,
    cov_jitter: f64,
}

fn stacked_means(reference: &ReferenceTrajectory) -> DVector<f64> {
    let s = reference.dim();
    let mut mu = DVector::zeros(reference.len() * s);
    for (i, m) in reference.means().iter().enumerate() {
        mu.rows_mut(i * s, s).copy_from(m);
    }
    mu
}

fn block_diagonal(reference: &ReferenceTrajectory) -> DMatrix<f64> {
    let s = reference.dim();
    let n = reference.len();
    let mut out = DMatrix::zeros(n * s, n * s);
    for (i, c) in reference.covariances().iter().enumerate() {
        out.view_mut((i * s, i * s), (s, s)).copy_from(c);
    }
    out
}

/// Precomputes the mean and covariance factors for a reference trajectory.
pub fn kmp_fit(reference: &ReferenceTrajectory, settings: &KmpSettings) -> Result<KmpModel> {
    settings.kernel.validate()?;
    let lambda = settings.lambda;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", "must be positive and finite"));
    }
    let n = reference.len();
    let s = reference.dim();
    let k = build_kernel_matrix(&settings.kernel, reference.times(), s);
    let sigma = block_diagonal(reference);

    let mean_system = match settings.mean_regularizer {
        MeanRegularizer::Identity => &k + DMatrix::identity(n * s, n * s) * lambda,
        MeanRegularizer::ReferenceCovariance => &k + &sigma * lambda,
    };
    let cond = spd_condition(&mean_system);
    if !(cond <= CONDITION_LIMIT) {
        return Err(Error::SingularSystem(cond));
    }
    let mean_chol = cholesky(&mean_system).ok_or(Error::SingularSystem(cond))?;
    let mean_factor = mean_chol.solve(&stacked_means(reference));

    let cov_system = &k + &sigma * lambda;
    let scale = cov_system.trace() / (n * s) as f64;
    let mut jitter = 0.0;
    let cov_factor = loop {
        let sys = &cov_system + DMatrix::identity(n * s, n * s) * jitter;
        if let Some(chol) = cholesky(&sys) {
            break chol.inverse();
        }
        jitter = if jitter == 0.0 { 1e-12 * scale } else { jitter * 10.0 };
        if jitter > 1e-4 * scale {
            return Err(Error::SingularSystem(f64::INFINITY));
        }
    };

    Ok(KmpModel {
        settings: *settings,
        reference: reference.clone(),
        mean_factor,
        cov_factor: (&cov_factor + cov_factor.transpose()) * 0.5,
        cov_jitter: jitter,
    })
}

impl KmpModel {
    pub fn settings(&self) -> &KmpSettings {
        &self.settings
    }

    pub fn reference(&self) -> &ReferenceTrajectory {
        &self.reference
    }

    /// Stacked `(K + λR)⁻¹μ`.
    pub fn mean_factor(&self) -> &DVector<f64> {
        &self.mean_factor
    }

    /// `(K + λΣ)⁻¹`.
    pub fn cov_factor(&self) -> &DMatrix<f64> {
        &self.cov_factor
    }

    /// Diagonal jitter added to `K + λΣ` to make it factorizable (usually 0).
    pub fn cov_jitter(&self) -> f64 {
        self.cov_jitter
    }

    fn kernel_row(&self, t: f64) -> Vec<f64> {
        self.reference
            .times()
            .iter()
            .map(|&ti| self.settings.kernel.eval(t, ti))
            .collect()
    }

    pub fn predict_mean(&self, t_star: f64) -> SynergyPoint {
        let s = self.reference.dim();
        let mut out = DVector::zeros(s);
        for (i, kv) in self.kernel_row(t_star).iter().enumerate() {
            out.axpy(*kv, &self.mean_factor.rows(i * s, s), 1.0);
        }
        SynergyPoint::new(out)
    }

    pub fn predict_cov(&self, t_star: f64) -> DMatrix<f64> {
        let s = self.reference.dim();
        let n = self.reference.len();
        let row = self.kernel_row(t_star);
        // k* C k*ᵀ = Σᵢⱼ kᵢ kⱼ C[i, j] blockwise
        let mut weighted = DMatrix::zeros(s, n * s);
        for j in 0..n {
            let mut acc = DMatrix::zeros(s, s);
            for (i, ki) in row.iter().enumerate() {
                acc += self.cov_factor.view((i * s, j * s), (s, s)) * *ki;
            }
            weighted.view_mut((0, j * s), (s, s)).copy_from(&acc);
        }
        let mut quad = DMatrix::zeros(s, s);
        for (j, kj) in row.iter().enumerate() {
            quad += weighted.view((0, j * s), (s, s)) * *kj;
        }
        let prior = DMatrix::identity(s, s) * self.settings.kernel.eval(t_star, t_star);
        let cov = (prior - quad) * (n as f64 / self.settings.lambda);
        nearest_psd(&cov)
    }

    pub fn predict(&self, t_star: f64) -> (SynergyPoint, DMatrix<f64>) {
        (self.predict_mean(t_star), self.predict_cov(t_star))
    }

    /// Predictions on every grid time.
    pub fn predict_trajectory(&self, grid: &[f64]) -> Result<ReferenceTrajectory> {
        let (means, covs) = grid.iter().map(|&t| self.predict(t)).unzip();
        ReferenceTrajectory::new(grid.to_vec(), means, covs)
    }
}

/// `kmp_predict_mean`.
pub fn kmp_predict_mean(model: &KmpModel, t_star: f64) -> SynergyPoint {
    model.predict_mean(t_star)
}

/// `kmp_predict_cov`.
pub fn kmp_predict_cov(model: &KmpModel, t_star: f64) -> DMatrix<f64> {
    model.predict_cov(t_star)
}

/// Half the smallest reference spacing.
pub fn default_via_radius(reference: &ReferenceTrajectory) -> f64 {
    let gap = reference.min_spacing();
    if gap.is_finite() {
        0.5 * gap
    } else {
        0.0
    }
}

/// Replaces the nearest reference point within `radius` of the via time, or
/// inserts the via-point in time order when none is that close.
pub fn insert_via_point(reference: &ReferenceTrajectory, via: &ViaPoint, radius: f64) -> Result<ReferenceTrajectory> {
    via.validate()?;
    Error::check_dim(reference.dim(), via.desired_e.len())?;
    if !(radius >= 0.0) {
        return Err(Error::invalid("radius", "must be non-negative"));
    }
    let (mut times, mut means, mut covs) = reference.clone().into_parts();
    let nearest = times
        .iter()
        .enumerate()
        .map(|(i, t)| (i, (t - via.t_star).abs()))
        .fold(None, |best: Option<(usize, f64)>, cur| match best {
            Some(b) if b.1 <= cur.1 => Some(b),
            _ => Some(cur),
        });
    match nearest {
        Some((i, d)) if d <= radius => {
            times[i] = via.t_star;
            means[i] = via.desired_e.clone();
            covs[i] = via.desired_cov.clone();
        }
        _ => {
            let at = times.partition_point(|&t| t < via.t_star);
            times.insert(at, via.t_star);
            means.insert(at, via.desired_e.clone());
            covs.insert(at, via.desired_cov.clone());
        }
    }
    ReferenceTrajectory::new(times, means, covs)
}

/// Inserts several via-points in order.
pub fn insert_via_points(reference: &ReferenceTrajectory, vias: &[ViaPoint], radius: f64) -> Result<ReferenceTrajectory> {
    vias.iter()
        .try_fold(reference.clone(), |acc, v| insert_via_point(&acc, v, radius))
}

/// Per-time product of Gaussians `∏_d N(μ_d, Σ_d/Υ_d)`.
///
/// `priorities[d][n]` weights trajectory `d` at grid point `n`.
pub fn fuse_priorities(trajectories: &[ReferenceTrajectory], priorities: &[Vec<f64>]) -> Result<ReferenceTrajectory> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::invalid("trajectories", "need at least one trajectory"))?;
    if priorities.len() != trajectories.len() {
        return Err(Error::LengthMismatch {
            left: trajectories.len(),
            right: priorities.len(),
        });
    }
    let n = first.len();
    let s = first.dim();
    for (tr, w) in trajectories.iter().zip(priorities) {
        Error::check_dim(s, tr.dim())?;
        if tr.times() != first.times() {
            return Err(Error::invalid("trajectories", "trajectories must share one time grid"));
        }
        if w.len() != n {
            return Err(Error::LengthMismatch { left: n, right: w.len() });
        }
        if w.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("priorities", "weights must be positive"));
        }
    }

    let mut means = Vec::with_capacity(n);
    let mut covs = Vec::with_capacity(n);
    for p in 0..n {
        let mut precision = DMatrix::zeros(s, s);
        let mut info = DVector::zeros(s);
        for (tr, w) in trajectories.iter().zip(priorities) {
            let (_, mu, cov) = tr.point(p);
            let inv = cholesky(cov).ok_or(Error::SingularCovariance(p))?.inverse() * w[p];
            info += &inv * &**mu;
            precision += inv;
        }
        let chol = cholesky(&precision).ok_or(Error::SingularCovariance(p))?;
        let fused_cov = chol.inverse();
        means.push(SynergyPoint::new(chol.solve(&info)));
        covs.push((&fused_cov + fused_cov.transpose()) * 0.5);
    }
    ReferenceTrajectory::new(first.times().to_vec(), means, covs)
}
