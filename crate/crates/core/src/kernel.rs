//! Stationary kernels over time and the block kernel matrix used by KMP.

use nalgebra::DMatrix;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "lowercase"))]
pub enum KernelKind {
    /// `σ²·exp(−|Δ|/l)`
    Exponential,
    /// `σ²·exp(−Δ²/(2l²))`
    Gaussian,
    /// `σ²·(1 + Δ²/(2αl²))^(−α)`
    Cauchy,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [KernelKind::Exponential, KernelKind::Gaussian, KernelKind::Cauchy];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Exponential => "exponential",
            KernelKind::Gaussian => "gaussian",
            KernelKind::Cauchy => "cauchy",
        }
    }
}

impl core::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Kernel family and hyper-parameters. `alpha` is set exactly for Cauchy.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub length_scale: f64,
    pub sigma2: f64,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub alpha: Option<f64>,
}

pub const DEFAULT_LENGTH_SCALE: f64 = 0.05;
pub const DEFAULT_SIGMA2: f64 = 1.0;
pub const DEFAULT_ALPHA: f64 = 1.0;

impl KernelSpec {
    pub fn exponential(length_scale: f64, sigma2: f64) -> Self {
        Self {
            kind: KernelKind::Exponential,
            length_scale,
            sigma2,
            alpha: None,
        }
    }

    pub fn gaussian(length_scale: f64, sigma2: f64) -> Self {
        Self {
            kind: KernelKind::Gaussian,
            length_scale,
            sigma2,
            alpha: None,
        }
    }

    pub fn cauchy(length_scale: f64, sigma2: f64, alpha: f64) -> Self {
        Self {
            kind: KernelKind::Cauchy,
            length_scale,
            sigma2,
            alpha: Some(alpha),
        }
    }

    /// Default hyper-parameters for a kernel family.
    pub fn default_for(kind: KernelKind) -> Self {
        match kind {
            KernelKind::Exponential => Self::exponential(DEFAULT_LENGTH_SCALE, DEFAULT_SIGMA2),
            KernelKind::Gaussian => Self::gaussian(DEFAULT_LENGTH_SCALE, DEFAULT_SIGMA2),
            KernelKind::Cauchy => Self::cauchy(DEFAULT_LENGTH_SCALE, DEFAULT_SIGMA2, DEFAULT_ALPHA),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(Error::invalid("length_scale", "must be positive and finite"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(Error::invalid("sigma2", "must be positive and finite"));
        }
        match (self.kind, self.alpha) {
            (KernelKind::Cauchy, Some(a)) if a > 0.0 && a.is_finite() => Ok(()),
            (KernelKind::Cauchy, _) => Err(Error::invalid("alpha", "Cauchy kernel needs a positive mixing coefficient")),
            (_, None) => Ok(()),
            (_, Some(_)) => Err(Error::invalid("alpha", "only the Cauchy kernel takes a mixing coefficient")),
        }
    }

    /// `k(t1, t2)`; depends on `|t1 − t2|` only, so it is exactly symmetric.
    pub fn eval(&self, t1: f64, t2: f64) -> f64 {
        let d = (t1 - t2).abs();
        let l = self.length_scale;
        match self.kind {
            KernelKind::Exponential => self.sigma2 * libm::exp(-d / l),
            KernelKind::Gaussian => self.sigma2 * libm::exp(-d * d / (2.0 * l * l)),
            KernelKind::Cauchy => {
                let alpha = self.alpha.unwrap_or(DEFAULT_ALPHA);
                self.sigma2 * libm::pow(1.0 + d * d / (2.0 * alpha * l * l), -alpha)
            }
        }
    }
}

/// `kernel_eval`.
pub fn kernel_eval(spec: &KernelSpec, t1: f64, t2: f64) -> f64 {
    spec.eval(t1, t2)
}

/// Gram matrix of scalar kernel values over `times`.
pub fn gram_matrix(spec: &KernelSpec, times: &[f64]) -> DMatrix<f64> {
    let n = times.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.eval(times[i], times[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `(N·S)×(N·S)` matrix whose `(i, j)` block is `k(tᵢ, tⱼ)·I_S`.
pub fn build_kernel_matrix(spec: &KernelSpec, times: &[f64], dim: usize) -> DMatrix<f64> {
    let gram = gram_matrix(spec, times);
    block_identity(&gram, dim)
}

/// Kronecker product `gram ⊗ I_dim`.
pub fn block_identity(gram: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let (r, c) = gram.shape();
    let mut out = DMatrix::zeros(r * dim, c * dim);
    for i in 0..r {
        for j in 0..c {
            for a in 0..dim {
                out[(i * dim + a, j * dim + a)] = gram[(i, j)];
            }
        }
    }
    out
}
