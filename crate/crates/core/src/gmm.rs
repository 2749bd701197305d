//! Gaussian mixture over joint `(t, e)` samples, fitted by expectation
//! maximization, and Gaussian mixture regression conditioning it on time.
//!
//! Initialization is k-means++ seeding followed by a few Lloyd passes, all
//! driven by the caller's seed. Each M-step regularizes the covariances as
//! `Σₖ = (Sₖ + c·I) / Nₖ`, where `Sₖ` is the responsibility-weighted scatter
//! and `c = 1e-6 · tr(data covariance) / D · n / K`. This is the exact
//! maximizer of the log-likelihood plus the penalty `−½·c·Σₖ tr(Σₖ⁻¹)`, so the
//! penalized log-likelihood recorded in [`GmmFit::objective`] never
//! decreases across iterations.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky, gaussian_log_density, log_sum_exp, nearest_psd};
use crate::synergy::SynergyPoint;
use crate::trajectory::{ReferenceTrajectory, SynergyTrajectory};
use crate::{Error, Result};

/// Relative covariance floor.
pub const COVARIANCE_FLOOR: f64 = 1e-6;

const LLOYD_PASSES: usize = 10;
/// Fraction of the data below which a component's total responsibility counts as starved.
const STARVED_WEIGHT: f64 = 1e-10;

/// One weighted Gaussian over the joint `(t, e)` space.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GaussianComponent {
    pub prior: f64,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::vector"))]
    pub mean: DVector<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::matrix"))]
    pub covariance: DMatrix<f64>,
}

/// Mixture over `(t, e)`; the first coordinate is time.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(try_from = "RawGmm", into = "RawGmm"))]
pub struct GmmModel {
    components: Vec<GaussianComponent>,
}

#[cfg(feature = "serde")]
#[derive(Serialize, Deserialize)]
struct RawGmm {
    input_dim: usize,
    output_dim: usize,
    components: Vec<GaussianComponent>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawGmm> for GmmModel {
    type Error = Error;

    fn try_from(raw: RawGmm) -> Result<Self> {
        Error::check_dim(1, raw.input_dim)?;
        let model = GmmModel::new(raw.components)?;
        Error::check_dim(raw.output_dim, model.output_dim())?;
        Ok(model)
    }
}

#[cfg(feature = "serde")]
impl From<GmmModel> for RawGmm {
    fn from(m: GmmModel) -> Self {
        RawGmm {
            input_dim: 1,
            output_dim: m.output_dim(),
            components: m.components,
        }
    }
}

impl GmmModel {
    /// Checks priors (positive, summing to one within 1e-9), dimensions and
    /// positive-definite covariances.
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("components", "mixture needs at least one component"));
        }
        let d = components[0].mean.len();
        if d < 2 {
            return Err(Error::invalid("components", "joint space needs time plus at least one output"));
        }
        let mut total = 0.0;
        for (k, c) in components.iter().enumerate() {
            Error::check_dim(d, c.mean.len())?;
            Error::check_dim(d, c.covariance.nrows())?;
            Error::check_dim(d, c.covariance.ncols())?;
            if !(c.prior > 0.0) || !c.prior.is_finite() {
                return Err(Error::DegenerateComponent(k));
            }
            if cholesky(&c.covariance).is_none() {
                return Err(Error::DegenerateComponent(k));
            }
            total += c.prior;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("priors", "priors must sum to one"));
        }
        Ok(Self { components })
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn output_dim(&self) -> usize {
        self.components[0].mean.len() - 1
    }

    /// Posterior weight `hₙ(t)` of each component given time alone.
    pub fn responsibilities(&self, t: f64) -> Vec<f64> {
        let logs: Vec<f64> = self
            .components
            .iter()
            .map(|c| {
                let var = c.covariance[(0, 0)];
                let z = t - c.mean[0];
                libm::log(c.prior) - 0.5 * (libm::log(2.0 * core::f64::consts::PI * var) + z * z / var)
            })
            .collect();
        let norm = log_sum_exp(&logs);
        logs.iter().map(|l| libm::exp(l - norm)).collect()
    }

    /// Gaussian conditional of component `k` at time `t`.
    pub fn component_conditional(&self, k: usize, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let c = &self.components[k];
        let s = self.output_dim();
        let var_t = c.covariance[(0, 0)];
        let cross = c.covariance.view((1, 0), (s, 1)).into_owned();
        let mean = c.mean.rows(1, s) + &cross * ((t - c.mean[0]) / var_t);
        let cov = c.covariance.view((1, 1), (s, s)) - &cross * cross.transpose() / var_t;
        (mean, cov)
    }

    /// Mixture regression: mean and covariance of `e` given `t`.
    pub fn condition(&self, t: f64) -> (SynergyPoint, DMatrix<f64>) {
        let s = self.output_dim();
        let h = self.responsibilities(t);
        let parts: Vec<_> = (0..self.components.len())
            .map(|k| self.component_conditional(k, t))
            .collect();
        let mut mean = DVector::zeros(s);
        for (w, (m, _)) in h.iter().zip(&parts) {
            mean.axpy(*w, m, 1.0);
        }
        let mut cov = DMatrix::zeros(s, s);
        for (w, (m, c)) in h.iter().zip(&parts) {
            let dev = m - &mean;
            cov += (c + &dev * dev.transpose()) * *w;
        }
        (SynergyPoint::new(mean), nearest_psd(&cov))
    }

    /// Total log-likelihood of joint samples.
    pub fn log_likelihood(&self, samples: &[DVector<f64>]) -> Result<f64> {
        let chols = self.factorize()?;
        Ok(samples
            .iter()
            .map(|x| {
                let logs: Vec<f64> = self
                    .components
                    .iter()
                    .zip(&chols)
                    .map(|(c, l)| libm::log(c.prior) + gaussian_log_density(x, &c.mean, l))
                    .collect();
                log_sum_exp(&logs)
            })
            .sum())
    }

    fn factorize(&self) -> Result<Vec<nalgebra::Cholesky<f64, nalgebra::Dyn>>> {
        self.components
            .iter()
            .enumerate()
            .map(|(k, c)| cholesky(&c.covariance).ok_or(Error::DegenerateComponent(k)))
            .collect()
    }
}

/// `gmr_condition`: conditional mean and covariance at `t`.
pub fn gmr_condition(model: &GmmModel, t: f64) -> (SynergyPoint, DMatrix<f64>) {
    model.condition(t)
}

/// Evaluates the mixture regression on every grid time.
pub fn generate_reference(model: &GmmModel, grid: &[f64]) -> Result<ReferenceTrajectory> {
    let (means, covs) = grid.iter().map(|&t| model.condition(t)).unzip();
    ReferenceTrajectory::new(grid.to_vec(), means, covs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct EmSettings {
    pub components: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for EmSettings {
    fn default() -> Self {
        Self {
            components: 5,
            seed: 0,
            max_iter: 200,
            tol: 1e-6,
        }
    }
}

/// Fitted mixture plus the per-iteration history of the EM run.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmFit {
    pub model: GmmModel,
    /// Plain log-likelihood of the data after each iteration.
    pub log_likelihood: Vec<f64>,
    /// Penalized log-likelihood; non-decreasing.
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Stacks `(t, e)` samples from every trajectory.
pub fn joint_samples(trajectories: &[SynergyTrajectory]) -> Result<Vec<DVector<f64>>> {
    let s = trajectories.first().map_or(0, SynergyTrajectory::dim);
    let mut out = Vec::new();
    for tr in trajectories {
        Error::check_dim(s, tr.dim())?;
        for (t, e) in tr.times.iter().zip(&tr.points) {
            let mut x = DVector::zeros(s + 1);
            x[0] = *t;
            x.rows_mut(1, s).copy_from(e);
            out.push(x);
        }
    }
    Ok(out)
}

/// EM fit of an `N`-component mixture to the `(t, e)` samples of all trajectories.
pub fn fit_gmm(trajectories: &[SynergyTrajectory], settings: &EmSettings) -> Result<GmmFit> {
    let data = joint_samples(trajectories)?;
    fit_joint(&data, settings)
}

/// EM on raw joint samples (first coordinate is the regression input).
pub fn fit_joint(data: &[DVector<f64>], settings: &EmSettings) -> Result<GmmFit> {
    let k = settings.components;
    if k == 0 {
        return Err(Error::invalid("components", "need at least one component"));
    }
    if !(settings.tol >= 0.0) {
        return Err(Error::invalid("tol", "tolerance must be non-negative"));
    }
    let d = data.first().map_or(0, |x| x.len());
    if d < 2 {
        return Err(Error::invalid("samples", "joint samples need time plus outputs"));
    }
    let needed = k * (d + 1);
    if data.len() < needed {
        return Err(Error::InsufficientSamples {
            needed,
            got: data.len(),
        });
    }
    for x in data {
        Error::check_dim(d, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("samples"));
        }
    }

    let n = data.len();
    let ridge = ridge_constant(data, k);
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let labels = kmeans_labels(data, k, &mut rng);
    let mut resp = DMatrix::zeros(n, k);
    for (i, &l) in labels.iter().enumerate() {
        resp[(i, l)] = 1.0;
    }
    let mut model = m_step(data, &resp, ridge)?;

    let mut log_likelihood = Vec::new();
    let mut objective = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    loop {
        let ll = e_step(data, &model, &mut resp)?;
        let obj = ll - 0.5 * ridge * penalty_trace(&model)?;
        let gain = objective.last().map(|prev| obj - prev);
        log_likelihood.push(ll);
        objective.push(obj);
        if gain.is_some_and(|g: f64| g < settings.tol) {
            converged = true;
            break;
        }
        if iterations == settings.max_iter {
            break;
        }
        model = m_step(data, &resp, ridge)?;
        iterations += 1;
    }
    Ok(GmmFit {
        model,
        log_likelihood,
        objective,
        iterations,
        converged,
    })
}

fn ridge_constant(data: &[DVector<f64>], k: usize) -> f64 {
    let n = data.len() as f64;
    let d = data[0].len();
    let mean = data.iter().fold(DVector::zeros(d), |acc, x| acc + x) / n;
    let trace: f64 = data.iter().map(|x| (x - &mean).norm_squared()).sum::<f64>() / (n - 1.0).max(1.0);
    let scale = if trace > 0.0 { trace / d as f64 } else { 1.0 };
    COVARIANCE_FLOOR * scale * n / k as f64
}

fn penalty_trace(model: &GmmModel) -> Result<f64> {
    let mut total = 0.0;
    for (k, c) in model.components.iter().enumerate() {
        let inv = cholesky(&c.covariance)
            .ok_or(Error::DegenerateComponent(k))?
            .inverse();
        total += inv.trace();
    }
    Ok(total)
}

/// k-means++ seeding followed by Lloyd refinement; returns hard labels.
fn kmeans_labels(data: &[DVector<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = data.len();
    let mut centers: Vec<DVector<f64>> = vec![data[rng.random_range(0..n)].clone()];
    let mut dist: Vec<f64> = data.iter().map(|x| (x - &centers[0]).norm_squared()).collect();
    while centers.len() < k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = n - 1;
            for (i, w) in dist.iter().enumerate() {
                acc += w;
                if acc > target && *w > 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centers.push(data[pick].clone());
        for (i, x) in data.iter().enumerate() {
            dist[i] = dist[i].min((x - &centers[centers.len() - 1]).norm_squared());
        }
    }

    let mut labels = nearest(data, &centers);
    for _ in 0..LLOYD_PASSES {
        let mut sums = vec![DVector::zeros(data[0].len()); k];
        let mut counts = vec![0usize; k];
        for (x, &l) in data.iter().zip(&labels) {
            sums[l] += x;
            counts[l] += 1;
        }
        for j in 0..k {
            if counts[j] > 0 {
                centers[j] = &sums[j] / counts[j] as f64;
            }
        }
        let next = nearest(data, &centers);
        if next == labels {
            break;
        }
        labels = next;
    }
    labels
}

fn nearest(data: &[DVector<f64>], centers: &[DVector<f64>]) -> Vec<usize> {
    data.iter()
        .map(|x| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (j, c) in centers.iter().enumerate() {
                let d = (x - c).norm_squared();
                if d < best_d {
                    best = j;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Fills `resp` with posterior responsibilities and returns the log-likelihood.
fn e_step(data: &[DVector<f64>], model: &GmmModel, resp: &mut DMatrix<f64>) -> Result<f64> {
    let chols = model.factorize()?;
    if resp.ncols() != model.components.len() {
        *resp = DMatrix::zeros(data.len(), model.components.len());
    }
    let mut total = 0.0;
    let mut logs = vec![0.0; model.components.len()];
    for (i, x) in data.iter().enumerate() {
        for (j, (c, l)) in model.components.iter().zip(&chols).enumerate() {
            logs[j] = libm::log(c.prior) + gaussian_log_density(x, &c.mean, l);
        }
        let norm = log_sum_exp(&logs);
        for (j, lj) in logs.iter().enumerate() {
            resp[(i, j)] = libm::exp(lj - norm);
        }
        total += norm;
    }
    Ok(total)
}

fn m_step(data: &[DVector<f64>], resp: &DMatrix<f64>, ridge: f64) -> Result<GmmModel> {
    let n = data.len();
    let d = data[0].len();
    let k = resp.ncols();
    let mut components = Vec::with_capacity(k);
    for j in 0..k {
        let weight: f64 = resp.column(j).sum();
        if !weight.is_finite() {
            return Err(Error::DegenerateComponent(j));
        }
        // starved components are dropped rather than refit
        if weight <= STARVED_WEIGHT * n as f64 {
            continue;
        }
        let mut mean = DVector::zeros(d);
        for (i, x) in data.iter().enumerate() {
            mean.axpy(resp[(i, j)], x, 1.0);
        }
        mean /= weight;
        let mut scatter = DMatrix::identity(d, d) * ridge;
        for (i, x) in data.iter().enumerate() {
            let dev = x - &mean;
            scatter.ger(resp[(i, j)], &dev, &dev, 1.0);
        }
        let covariance = (&scatter + scatter.transpose()) * (0.5 / weight);
        if cholesky(&covariance).is_none() {
            return Err(Error::DegenerateComponent(j));
        }
        components.push(GaussianComponent {
            prior: weight / n as f64,
            mean,
            covariance,
        });
    }
    if components.is_empty() {
        return Err(Error::DegenerateComponent(0));
    }
    // renormalize against round-off and pruned components
    let total: f64 = components.iter().map(|c| c.prior).sum();
    components.iter_mut().for_each(|c| c.prior /= total);
    GmmModel::new(components)
}
