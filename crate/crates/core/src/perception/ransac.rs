use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{PlaneModel, PointCloud};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(default))]
pub struct RansacSettings {
    pub iterations: usize,
    /// Maximum point-to-plane distance of an inlier, meters.
    pub inlier_threshold: f64,
    pub seed: u64,
}

impl Default for RansacSettings {
    fn default() -> Self {
        Self {
            iterations: 200,
            inlier_threshold: 0.005,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneFit {
    pub plane: PlaneModel,
    /// Ascending indices within the threshold.
    pub inliers: Vec<usize>,
    /// Ascending indices of every other point.
    pub outliers: Vec<usize>,
    /// Inlier count of every candidate plane evaluated, in sampling order.
    pub candidate_counts: Vec<usize>,
}

fn count_inliers(cloud: &PointCloud, plane: &PlaneModel, threshold: f64) -> usize {
    cloud
        .points()
        .iter()
        .filter(|p| plane.distance(p) <= threshold)
        .count()
}

/// First non-collinear triple in index order, if any.
fn any_plane(cloud: &PointCloud) -> Option<PlaneModel> {
    let pts = cloud.points();
    let a = pts.first()?;
    let b = pts.iter().find(|p| *p != a)?;
    pts.iter().find_map(|c| PlaneModel::through(a, b, c))
}

/// Random-sample consensus plane: the candidate through a sampled point
/// triple with the most points within `inlier_threshold`. The first
/// candidate wins ties. Deterministic for a fixed seed.
pub fn ransac_plane(cloud: &PointCloud, settings: &RansacSettings) -> Result<PlaneFit> {
    if !(settings.inlier_threshold >= 0.0) {
        return Err(Error::invalid("inlier_threshold", "must be non-negative"));
    }
    let n = cloud.len();
    if n < 3 {
        return Err(Error::DegenerateCloud);
    }
    let pts = cloud.points();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut candidate_counts = Vec::new();
    let mut best: Option<(PlaneModel, usize)> = None;
    let mut consider = |plane: PlaneModel, counts: &mut Vec<usize>| {
        let c = count_inliers(cloud, &plane, settings.inlier_threshold);
        counts.push(c);
        if best.is_none_or(|(_, b)| c > b) {
            best = Some((plane, c));
        }
    };
    for _ in 0..settings.iterations {
        let idx = rand::seq::index::sample(&mut rng, n, 3);
        if let Some(plane) = PlaneModel::through(&pts[idx.index(0)], &pts[idx.index(1)], &pts[idx.index(2)]) {
            consider(plane, &mut candidate_counts);
        }
    }
    if candidate_counts.is_empty() {
        let plane = any_plane(cloud).ok_or(Error::DegenerateCloud)?;
        consider(plane, &mut candidate_counts);
    }
    let (plane, _) = best.ok_or(Error::DegenerateCloud)?;
    let (inliers, outliers): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| plane.distance(&pts[i]) <= settings.inlier_threshold);
    Ok(PlaneFit {
        plane,
        inliers,
        outliers,
        candidate_counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn coplanar_cloud_has_no_outliers() {
        let pts: Vec<[f64; 3]> = (0..40)
            .map(|i| [(i % 7) as f64 * 0.1, (i / 7) as f64 * 0.1, 0.2])
            .collect();
        let cloud = PointCloud::from_xyz(&pts).unwrap();
        let fit = ransac_plane(&cloud, &RansacSettings::default()).unwrap();
        assert!(fit.outliers.is_empty());
        assert!((fit.plane.normal[2] - 1.0).abs() < 1e-12);
        assert!((fit.plane.offset + 0.2).abs() < 1e-12);
    }

    #[test]
    fn collinear_cloud_is_degenerate() {
        let pts: Vec<[f64; 3]> = (0..10).map(|i| [i as f64, 2.0 * i as f64, 0.0]).collect();
        let cloud = PointCloud::from_xyz(&pts).unwrap();
        assert_eq!(ransac_plane(&cloud, &RansacSettings::default()), Err(Error::DegenerateCloud));
        let two = PointCloud::from_xyz(&[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(ransac_plane(&two, &RansacSettings::default()), Err(Error::DegenerateCloud));
    }

    #[test]
    fn zero_iterations_fall_back_to_scan() {
        let cloud = PointCloud::from_xyz(&[[0.0; 3], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]).unwrap();
        let fit = ransac_plane(
            &cloud,
            &RansacSettings {
                iterations: 0,
                ..RansacSettings::default()
            },
        )
        .unwrap();
        assert_eq!(fit.inliers, vec![0, 1, 2]);
        assert_eq!(fit.outliers, vec![3]);
    }
}
