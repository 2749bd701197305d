use alloc::string::String;

use nalgebra::{DMatrix, DVector, Matrix3, Point3, Vector3};
#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use super::{Cluster, PointCloud};
use crate::kmp::ViaPoint;
use crate::linalg::{pseudo_inverse, CONDITION_LIMIT};
use crate::synergy::{SynergyBasis, SynergyPoint};
use crate::{Error, Result};

/// Bounding-box extents (3), covariance eigenvalues descending (3), point count.
pub const FEATURE_DIM: usize = 7;

/// Centroid pose with axis-aligned extents and the assigned label.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ObjectPose {
    pub centroid: [f64; 3],
    pub extents: [f64; 3],
    pub label: String,
    pub score: f64,
}

impl ObjectPose {
    /// `(centroid, extents)` as the 6-vector mapped into synergy space.
    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_iterator(6, self.centroid.iter().chain(&self.extents).copied())
    }
}

fn members<'a>(cloud: &'a PointCloud, cluster: &'a Cluster) -> impl Iterator<Item = &'a Point3<f64>> + 'a {
    cluster.indices.iter().map(move |&i| &cloud.points()[i])
}

fn bounds(cloud: &PointCloud, cluster: &Cluster) -> (Vector3<f64>, Vector3<f64>) {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for p in members(cloud, cluster) {
        lo = lo.inf(&p.coords);
        hi = hi.sup(&p.coords);
    }
    (lo, hi)
}

fn centroid(cloud: &PointCloud, cluster: &Cluster) -> Vector3<f64> {
    let sum = members(cloud, cluster).fold(Vector3::zeros(), |acc, p| acc + p.coords);
    sum / cluster.len() as f64
}

/// Shape descriptor of a cluster used by the classifier.
pub fn extract_features(cloud: &PointCloud, cluster: &Cluster) -> Result<[f64; FEATURE_DIM]> {
    if cluster.is_empty() {
        return Err(Error::invalid("cluster", "empty cluster"));
    }
    let (lo, hi) = bounds(cloud, cluster);
    let c = centroid(cloud, cluster);
    let mut cov = Matrix3::zeros();
    for p in members(cloud, cluster) {
        let d = p.coords - c;
        cov += d * d.transpose();
    }
    cov /= cluster.len() as f64;
    let mut eig: [f64; 3] = cov.symmetric_eigenvalues().into();
    eig.sort_by(|a, b| b.total_cmp(a));
    let ext = hi - lo;
    Ok([ext.x, ext.y, ext.z, eig[0].max(0.0), eig[1].max(0.0), eig[2].max(0.0), cluster.len() as f64])
}

/// Centroid (mean of members) and axis-aligned bounding-box extents.
pub fn estimate_pose(cloud: &PointCloud, cluster: &Cluster, label: &str, score: f64) -> Result<ObjectPose> {
    if cluster.is_empty() {
        return Err(Error::invalid("cluster", "empty cluster"));
    }
    let (lo, hi) = bounds(cloud, cluster);
    let c = centroid(cloud, cluster);
    let ext = hi - lo;
    Ok(ObjectPose {
        centroid: [c.x, c.y, c.z],
        extents: [ext.x, ext.y, ext.z],
        label: label.into(),
        score,
    })
}

/// Hand compliance `C_h` (J×J) and motion transfer `A_m` (6×J) used to carry
/// an object pose into synergy coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SynergyMappingParams {
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::matrix"))]
    pub compliance: DMatrix<f64>,
    #[cfg_attr(feature = "serde", serde(with = "crate::serde_mat::matrix"))]
    pub motion_transfer: DMatrix<f64>,
}

impl SynergyMappingParams {
    pub fn identity(joints: usize) -> Self {
        Self {
            compliance: DMatrix::identity(joints, joints),
            motion_transfer: DMatrix::identity(6, joints),
        }
    }

    /// `Ê†·C_h·A_m†`, the linear map from a pose 6-vector to synergy space.
    pub fn pose_map(&self, basis: &SynergyBasis) -> Result<DMatrix<f64>> {
        let j = basis.joint_dim();
        Error::check_dim(j, self.compliance.nrows())?;
        Error::check_dim(j, self.compliance.ncols())?;
        Error::check_dim(6, self.motion_transfer.nrows())?;
        Error::check_dim(j, self.motion_transfer.ncols())?;
        if !self.compliance.iter().chain(self.motion_transfer.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("synergy mapping"));
        }
        let transfer_pinv = pseudo_inverse(&self.motion_transfer, CONDITION_LIMIT)?;
        Ok(basis.pseudo_inverse() * &self.compliance * transfer_pinv)
    }
}

/// Maps a pose into synergy coordinates `e_O` and packages it as a via-point
/// at `t_star` with isotropic covariance `variance·I`.
pub fn pose_to_synergy(
    pose: &ObjectPose,
    params: &SynergyMappingParams,
    basis: &SynergyBasis,
    t_star: f64,
    variance: f64,
) -> Result<ViaPoint> {
    let e = params.pose_map(basis)? * pose.as_vector();
    ViaPoint::isotropic(t_star, SynergyPoint::new(e), variance)
}
