//! Synergy trajectories over normalized demonstration time and the
//! probabilistic reference trajectory produced by mixture regression.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::synergy::{JointConfiguration, SynergyBasis, SynergyPoint};
use crate::{Error, Result};

/// One demonstration: timestamped postures in arbitrary time units.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Demonstration {
    pub samples: Vec<(f64, JointConfiguration)>,
}

impl Demonstration {
    pub fn new(samples: Vec<(f64, JointConfiguration)>) -> Self {
        Self { samples }
    }

    /// Sample times rescaled to `[0, 1]`.
    fn normalized_times(&self, index: usize) -> Result<Vec<f64>> {
        if self.samples.len() < 2 {
            return Err(Error::EmptyDemo(index));
        }
        check_increasing(self.samples.iter().map(|s| s.0), index)?;
        let t0 = self.samples[0].0;
        let span = self.samples[self.samples.len() - 1].0 - t0;
        Ok(self.samples.iter().map(|s| (s.0 - t0) / span).collect())
    }
}

fn check_increasing(times: impl Iterator<Item = f64>, index: usize) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for t in times {
        if !t.is_finite() || t <= prev {
            return Err(Error::NonMonotonicTime(index));
        }
        prev = t;
    }
    Ok(())
}

/// `n` evenly spaced times covering `[0, 1]` (a single point sits at 0).
pub fn uniform_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// Synergy coefficients sampled on a time grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SynergyTrajectory {
    pub times: Vec<f64>,
    pub points: Vec<SynergyPoint>,
}

impl SynergyTrajectory {
    pub fn new(times: Vec<f64>, points: Vec<SynergyPoint>) -> Result<Self> {
        if times.len() != points.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: points.len(),
            });
        }
        check_increasing(times.iter().copied(), 0)?;
        if let Some(first) = points.first() {
            for p in &points {
                Error::check_dim(first.len(), p.len())?;
            }
        }
        Ok(Self { times, points })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, |p| p.len())
    }
}

/// Piecewise-linear value of `values` (sampled at increasing `times`) at `t`.
/// `t` must lie within the sampled span.
fn lerp_at(times: &[f64], values: &[SynergyPoint], t: f64) -> SynergyPoint {
    let last = times.len() - 1;
    if t <= times[0] {
        return values[0].clone();
    }
    if t >= times[last] {
        return values[last].clone();
    }
    let hi = times.partition_point(|&x| x <= t);
    let lo = hi - 1;
    let w = (t - times[lo]) / (times[hi] - times[lo]);
    SynergyPoint::new(&*values[lo] * (1.0 - w) + &*values[hi] * w)
}

/// Projects each demonstration into synergy space and resamples it onto a
/// common grid in normalized time by linear interpolation.
pub fn interpolate_coefficients(
    demos: &[Demonstration],
    basis: &SynergyBasis,
    grid: &[f64],
) -> Result<Vec<SynergyTrajectory>> {
    if grid.is_empty() {
        return Err(Error::invalid("grid", "empty time grid"));
    }
    check_increasing(grid.iter().copied(), 0)?;
    if grid[0] < 0.0 || grid[grid.len() - 1] > 1.0 {
        return Err(Error::invalid("grid", "grid must lie within normalized time [0, 1]"));
    }
    demos
        .iter()
        .enumerate()
        .map(|(i, demo)| {
            let times = demo.normalized_times(i)?;
            let coeffs = demo
                .samples
                .iter()
                .map(|(_, q)| basis.project(q))
                .collect::<Result<Vec<_>>>()?;
            let points = grid.iter().map(|&t| lerp_at(&times, &coeffs, t)).collect();
            Ok(SynergyTrajectory {
                times: grid.to_vec(),
                points,
            })
        })
        .collect()
}

/// Time-indexed Gaussian beliefs `(tₙ, μₙ, Σₙ)` over synergy coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(try_from = "RawReference", into = "RawReference"))]
pub struct ReferenceTrajectory {
    times: Vec<f64>,
    means: Vec<SynergyPoint>,
    covariances: Vec<DMatrix<f64>>,
}

#[cfg(feature = "serde")]
#[derive(Serialize, Deserialize)]
struct RawReference {
    times: Vec<f64>,
    means: Vec<SynergyPoint>,
    #[serde(with = "crate::serde_mat::matrix_list")]
    covariances: Vec<DMatrix<f64>>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawReference> for ReferenceTrajectory {
    type Error = Error;

    fn try_from(raw: RawReference) -> Result<Self> {
        ReferenceTrajectory::new(raw.times, raw.means, raw.covariances)
    }
}

#[cfg(feature = "serde")]
impl From<ReferenceTrajectory> for RawReference {
    fn from(r: ReferenceTrajectory) -> Self {
        RawReference {
            times: r.times,
            means: r.means,
            covariances: r.covariances,
        }
    }
}

impl ReferenceTrajectory {
    /// Validates strictly increasing times, consistent dimensions and
    /// symmetric covariances.
    pub fn new(times: Vec<f64>, means: Vec<SynergyPoint>, covariances: Vec<DMatrix<f64>>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::invalid("reference", "empty trajectory"));
        }
        if times.len() != means.len() || times.len() != covariances.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: means.len().min(covariances.len()),
            });
        }
        check_increasing(times.iter().copied(), 0)?;
        let s = means[0].len();
        for (m, c) in means.iter().zip(&covariances) {
            Error::check_dim(s, m.len())?;
            Error::check_dim(s, c.nrows())?;
            Error::check_dim(s, c.ncols())?;
            if !m.is_finite() || !c.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("reference trajectory"));
            }
            let asym = (c - c.transpose()).amax();
            if asym > 1e-9 * c.amax().max(1.0) {
                return Err(Error::invalid("covariances", "covariance is not symmetric"));
            }
        }
        Ok(Self {
            times,
            means,
            covariances,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn means(&self) -> &[SynergyPoint] {
        &self.means
    }

    pub fn covariances(&self) -> &[DMatrix<f64>] {
        &self.covariances
    }

    pub fn point(&self, i: usize) -> (f64, &SynergyPoint, &DMatrix<f64>) {
        (self.times[i], &self.means[i], &self.covariances[i])
    }

    /// Smallest gap between consecutive times (infinite for one point).
    pub fn min_spacing(&self) -> f64 {
        self.times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Mean interpolated linearly in time, clamped at the ends.
    pub fn mean_at(&self, t: f64) -> SynergyPoint {
        lerp_at(&self.times, &self.means, t)
    }

    pub(crate) fn into_parts(self) -> (Vec<f64>, Vec<SynergyPoint>, Vec<DMatrix<f64>>) {
        (self.times, self.means, self.covariances)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn identity_basis(j: usize) -> SynergyBasis {
        SynergyBasis::new(
            DMatrix::identity(j, j),
            JointConfiguration::zeros(j),
            vec![1.0 / j as f64; j],
        )
        .unwrap()
    }

    #[test]
    fn constant_demo_maps_to_zero() {
        let basis = SynergyBasis::new(
            DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
            JointConfiguration::from_slice(&[0.4, -0.2]),
            vec![1.0],
        )
        .unwrap();
        let demo = Demonstration::new(
            (0..5)
                .map(|i| (i as f64 * 0.3, basis.theta0().clone()))
                .collect(),
        );
        let out = interpolate_coefficients(&[demo], &basis, &uniform_grid(7)).unwrap();
        assert!(out[0].points.iter().all(|p| p[0] == 0.0));
    }

    #[test]
    fn linear_demo_hits_midpoint_exactly() {
        let basis = identity_basis(1);
        let demo = Demonstration::new(vec![
            (2.0, JointConfiguration::from_slice(&[1.0])),
            (4.0, JointConfiguration::from_slice(&[3.0])),
        ]);
        let out = interpolate_coefficients(&[demo], &basis, &[0.5]).unwrap();
        assert_eq!(out[0].points[0][0], 2.0);
    }

    #[test]
    fn short_demo_is_empty() {
        let demo = Demonstration::new(vec![(0.0, JointConfiguration::zeros(1))]);
        assert_eq!(
            interpolate_coefficients(&[demo], &identity_basis(1), &[0.0]),
            Err(Error::EmptyDemo(0))
        );
    }

    #[test]
    fn repeated_timestamp_rejected() {
        let q = JointConfiguration::zeros(1);
        let demo = Demonstration::new(vec![(0.0, q.clone()), (1.0, q.clone()), (1.0, q)]);
        assert_eq!(
            interpolate_coefficients(&[demo], &identity_basis(1), &[0.0]),
            Err(Error::NonMonotonicTime(0))
        );
    }

    #[test]
    fn grid_outside_unit_interval_rejected() {
        let q = JointConfiguration::zeros(1);
        let demo = Demonstration::new(vec![(0.0, q.clone()), (1.0, q)]);
        assert!(interpolate_coefficients(&[demo], &identity_basis(1), &[0.0, 1.5]).is_err());
    }

    #[test]
    fn uniform_grid_endpoints() {
        assert_eq!(uniform_grid(3), vec![0.0, 0.5, 1.0]);
        assert_eq!(uniform_grid(1), vec![0.0]);
    }

    #[test]
    fn reference_rejects_unsorted_times() {
        let m = SynergyPoint::zeros(1);
        let c = DMatrix::identity(1, 1);
        assert!(ReferenceTrajectory::new(vec![0.5, 0.2], vec![m.clone(), m], vec![c.clone(), c]).is_err());
    }
}
