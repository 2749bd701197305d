//! Desk-scale object perception: table-plane removal, Euclidean clustering,
//! linear SVM labelling, centroid poses and their synergy-space mapping.

mod cluster;
mod pose;
mod ransac;
mod svm;

use alloc::vec::Vec;

use nalgebra::{Point3, Vector3};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use cluster::{euclidean_cluster, Cluster, BRUTE_FORCE_LIMIT};
pub use pose::{estimate_pose, extract_features, pose_to_synergy, ObjectPose, SynergyMappingParams, FEATURE_DIM};
pub use ransac::{ransac_plane, PlaneFit, RansacSettings};
pub use svm::{svm_classify, svm_train, OneVsRest, SvmModel, SvmSettings, SvmTraining, REST_LABEL};

/// 3-D points in meters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    /// Rejects non-finite coordinates.
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite("point cloud"));
        }
        Ok(Self { points })
    }

    pub fn from_xyz(points: &[[f64; 3]]) -> Result<Self> {
        Self::new(points.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect())
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Sub-cloud of the given indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }
}

/// Plane `n·p + d = 0` with unit normal `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PlaneModel {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl PlaneModel {
    /// Plane through three points; `None` when they are (nearly) collinear.
    pub fn through(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Option<Self> {
        let ab = b - a;
        let ac = c - a;
        let n = ab.cross(&ac);
        let scale = ab.norm() * ac.norm();
        if !(n.norm() > 1e-9 * scale) || scale == 0.0 {
            return None;
        }
        let mut n = n.normalize();
        // orient so the largest normal component is positive
        let imax = n.iamax();
        if n[imax] < 0.0 {
            n = -n;
        }
        Some(Self {
            normal: [n.x, n.y, n.z],
            offset: -n.dot(&a.coords),
        })
    }

    pub fn normal_vector(&self) -> Vector3<f64> {
        Vector3::new(self.normal[0], self.normal[1], self.normal[2])
    }

    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        (self.normal_vector().dot(&p.coords) + self.offset).abs()
    }
}
