//! Postural synergy subspace.
//!
//! Demonstrated hand postures are centred on a nominal posture `θ₀` and
//! decomposed by principal components. The retained directions form the
//! synergy matrix `Ê` (one orthonormal column per synergy); a posture `ϑ`
//! maps to synergy coefficients `e = Êᵀ(ϑ − θ₀)` and back through
//! `ϑ = Êe + θ₀`.

use alloc::vec::Vec;
use core::ops::{Add, Deref, Sub};

use nalgebra::{DMatrix, DVector};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::linalg::symmetric_eigen_desc;
use crate::{Error, Result};

/// Default cumulative explained-variance threshold for retaining synergies.
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.85;

/// Orthonormality tolerance for synergy columns.
const ORTHONORMAL_TOL: f64 = 1e-9;

macro_rules! vector_newtype {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq)]
        #[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(transparent))]
        pub struct $name(#[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::vector"))] DVector<f64>);

        impl $name {
            pub fn new(v: DVector<f64>) -> Self {
                Self(v)
            }

            pub fn zeros(dim: usize) -> Self {
                Self(DVector::zeros(dim))
            }

            pub fn from_slice(v: &[f64]) -> Self {
                Self(DVector::from_column_slice(v))
            }

            pub fn into_inner(self) -> DVector<f64> {
                self.0
            }

            pub fn is_finite(&self) -> bool {
                self.0.iter().all(|x| x.is_finite())
            }
        }

        impl Deref for $name {
            type Target = DVector<f64>;

            fn deref(&self) -> &DVector<f64> {
                &self.0
            }
        }

        impl From<Vec<f64>> for $name {
            fn from(v: Vec<f64>) -> Self {
                Self(DVector::from_vec(v))
            }
        }

        impl From<DVector<f64>> for $name {
            fn from(v: DVector<f64>) -> Self {
                Self(v)
            }
        }

        impl Add for &$name {
            type Output = $name;

            fn add(self, rhs: Self) -> $name {
                $name(&self.0 + &rhs.0)
            }
        }

        impl Sub for &$name {
            type Output = $name;

            fn sub(self, rhs: Self) -> $name {
                $name(&self.0 - &rhs.0)
            }
        }
    };
}

vector_newtype!(
    /// Hand joint angles in radians.
    JointConfiguration
);

vector_newtype!(
    /// Coordinates in synergy space. Grasp and manipulation contributions are
    /// separate addends summed with `+` before reconstruction.
    SynergyPoint
);

/// Demonstrated postures centred on the nominal posture, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationMatrix {
    rows: DMatrix<f64>,
    theta0: JointConfiguration,
}

impl ConfigurationMatrix {
    /// Centres raw postures on `theta0`, or on their sample mean when no
    /// nominal posture is given.
    pub fn from_postures(postures: &[Vec<f64>], theta0: Option<&[f64]>) -> Result<Self> {
        let (k, j) = validate_rows(postures)?;
        let raw = DMatrix::from_fn(k, j, |r, c| postures[r][c]);
        let theta0 = match theta0 {
            Some(t) => {
                Error::check_dim(j, t.len())?;
                DVector::from_column_slice(t)
            }
            None => raw.row_mean().transpose(),
        };
        let rows = DMatrix::from_fn(k, j, |r, c| raw[(r, c)] - theta0[c]);
        Ok(Self {
            rows,
            theta0: JointConfiguration(theta0),
        })
    }

    /// Wraps rows that are already centred (`ϑ̂ₖ = ϑₖ − θ₀`).
    pub fn from_centered(rows: &[Vec<f64>], theta0: &[f64]) -> Result<Self> {
        let (k, j) = validate_rows(rows)?;
        Error::check_dim(j, theta0.len())?;
        Ok(Self {
            rows: DMatrix::from_fn(k, j, |r, c| rows[r][c]),
            theta0: JointConfiguration::from_slice(theta0),
        })
    }

    pub fn samples(&self) -> usize {
        self.rows.nrows()
    }

    pub fn joint_dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn rows(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn theta0(&self) -> &JointConfiguration {
        &self.theta0
    }

    /// Sample covariance of the rows (divisor `K − 1`).
    pub fn covariance(&self) -> DMatrix<f64> {
        let k = self.samples();
        let mean = self.rows.row_mean();
        let mut centred = self.rows.clone();
        for mut row in centred.row_iter_mut() {
            row -= &mean;
        }
        centred.transpose() * centred / (k as f64 - 1.0)
    }
}

fn validate_rows(rows: &[Vec<f64>]) -> Result<(usize, usize)> {
    let k = rows.len();
    if k < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: k });
    }
    let j = rows[0].len();
    if j == 0 {
        return Err(Error::invalid("postures", "empty joint vector"));
    }
    for row in rows {
        Error::check_dim(j, row.len())?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("postures"));
        }
    }
    Ok((k, j))
}

/// Full principal spectrum of a configuration matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaSpectrum {
    /// Covariance eigenvalues, descending, negatives from round-off clipped.
    pub eigenvalues: DVector<f64>,
    /// Eigenvectors matching `eigenvalues`, sign-normalized.
    pub directions: DMatrix<f64>,
    /// `eigenvalue / Σ eigenvalues`; sums to one.
    pub fractions: DVector<f64>,
}

impl PcaSpectrum {
    pub fn of(configs: &ConfigurationMatrix) -> Result<Self> {
        let cov = configs.covariance();
        if cov.trace() <= 0.0 || !cov.trace().is_finite() {
            return Err(Error::ZeroVariance);
        }
        let (values, mut directions) = symmetric_eigen_desc(&cov);
        let eigenvalues = values.map(|v| v.max(0.0));
        let total: f64 = eigenvalues.sum();
        if total <= 0.0 {
            return Err(Error::ZeroVariance);
        }
        for mut col in directions.column_iter_mut() {
            normalize_sign(col.as_mut_slice());
        }
        let fractions = eigenvalues.map(|v| v / total);
        Ok(Self {
            eigenvalues,
            directions,
            fractions,
        })
    }

    /// Smallest number of leading components whose cumulative fraction
    /// reaches `threshold`.
    pub fn components_for(&self, threshold: f64) -> usize {
        let mut cumulative = 0.0;
        for (i, f) in self.fractions.iter().enumerate() {
            cumulative += f;
            if cumulative >= threshold - 1e-12 {
                return i + 1;
            }
        }
        self.fractions.len()
    }
}

/// Flips `v` so its largest-magnitude entry is positive (first index wins ties).
fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|x| *x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Synergy matrix `Ê` (J×S, orthonormal columns), nominal posture and the
/// explained-variance fraction of each retained column.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(try_from = "RawBasis", into = "RawBasis"))]
pub struct SynergyBasis {
    e_hat: DMatrix<f64>,
    theta0: JointConfiguration,
    variance_fractions: Vec<f64>,
}

#[cfg(feature = "serde")]
#[derive(Serialize, Deserialize)]
struct RawBasis {
    theta0: Vec<f64>,
    #[serde(with = "crate::serde_mat::matrix")]
    e_hat: DMatrix<f64>,
    variance_fractions: Vec<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawBasis> for SynergyBasis {
    type Error = Error;

    fn try_from(raw: RawBasis) -> Result<Self> {
        SynergyBasis::new(raw.e_hat, JointConfiguration::from(raw.theta0), raw.variance_fractions)
    }
}

#[cfg(feature = "serde")]
impl From<SynergyBasis> for RawBasis {
    fn from(b: SynergyBasis) -> Self {
        RawBasis {
            theta0: b.theta0.iter().copied().collect(),
            e_hat: b.e_hat,
            variance_fractions: b.variance_fractions,
        }
    }
}

impl SynergyBasis {
    /// Validates dimensions and orthonormality of `e_hat`.
    pub fn new(e_hat: DMatrix<f64>, theta0: JointConfiguration, variance_fractions: Vec<f64>) -> Result<Self> {
        Error::check_dim(e_hat.nrows(), theta0.len())?;
        Error::check_dim(e_hat.ncols(), variance_fractions.len())?;
        if e_hat.ncols() == 0 {
            return Err(Error::invalid("e_hat", "no synergy columns"));
        }
        if !e_hat.iter().all(|v| v.is_finite()) || !theta0.is_finite() {
            return Err(Error::NonFinite("synergy basis"));
        }
        let gram = e_hat.transpose() * &e_hat;
        let deviation = (gram - DMatrix::identity(e_hat.ncols(), e_hat.ncols())).amax();
        if deviation > ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal(deviation));
        }
        if variance_fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::invalid("variance_fractions", "fractions must lie in (0, 1]"));
        }
        Ok(Self {
            e_hat,
            theta0,
            variance_fractions,
        })
    }

    pub fn e_hat(&self) -> &DMatrix<f64> {
        &self.e_hat
    }

    pub fn theta0(&self) -> &JointConfiguration {
        &self.theta0
    }

    pub fn variance_fractions(&self) -> &[f64] {
        &self.variance_fractions
    }

    pub fn joint_dim(&self) -> usize {
        self.e_hat.nrows()
    }

    pub fn synergy_dim(&self) -> usize {
        self.e_hat.ncols()
    }

    /// `Ê†`, which equals `Êᵀ` for orthonormal columns.
    pub fn pseudo_inverse(&self) -> DMatrix<f64> {
        self.e_hat.transpose()
    }

    /// `e = Ê†(ϑ − θ₀)`.
    pub fn project(&self, posture: &JointConfiguration) -> Result<SynergyPoint> {
        Error::check_dim(self.joint_dim(), posture.len())?;
        let centred = &posture.0 - &self.theta0.0;
        Ok(SynergyPoint(self.e_hat.tr_mul(&centred)))
    }

    /// `ϑ = Êe + θ₀`.
    pub fn reconstruct(&self, e: &SynergyPoint) -> Result<JointConfiguration> {
        Error::check_dim(self.synergy_dim(), e.len())?;
        Ok(JointConfiguration(&self.e_hat * &e.0 + &self.theta0.0))
    }

    /// Reconstructs the posture for a grasp addend plus a manipulation addend.
    pub fn reconstruct_parts(&self, grasp: &SynergyPoint, manipulation: &SynergyPoint) -> Result<JointConfiguration> {
        Error::check_dim(grasp.len(), manipulation.len())?;
        self.reconstruct(&(grasp + manipulation))
    }
}

/// Fits the synergy basis retaining the fewest components whose cumulative
/// explained variance reaches `variance_threshold`.
pub fn fit_synergy_basis(configs: &ConfigurationMatrix, variance_threshold: f64) -> Result<SynergyBasis> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::invalid("variance_threshold", "must lie in (0, 1]"));
    }
    let spectrum = PcaSpectrum::of(configs)?;
    let s = spectrum.components_for(variance_threshold);
    let e_hat = spectrum.directions.columns(0, s).into_owned();
    let fractions: Vec<f64> = spectrum.fractions.iter().take(s).copied().collect();
    SynergyBasis::new(e_hat, configs.theta0().clone(), fractions)
}
