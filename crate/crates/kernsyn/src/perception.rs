//! Scene segmentation and labelling on top of the core perception stages.

use kernsyn_core::perception::{
    estimate_pose, euclidean_cluster, extract_features, ransac_plane, Cluster, ObjectPose, OneVsRest, PlaneModel, PointCloud,
    RansacSettings,
};
use serde::{Deserialize, Serialize};

use crate::config::{ClusteringConfig, SvmConfig};
use crate::error::Result;
use crate::generate::svm_training_set;

/// Table plane plus object clusters, indices into `objects`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub plane: PlaneModel,
    /// Indices of table inliers in the input cloud.
    pub inliers: Vec<usize>,
    /// Off-plane points.
    pub objects: PointCloud,
    /// Index in the input cloud of each point of `objects`.
    pub object_indices: Vec<usize>,
    pub clusters: Vec<Cluster>,
}

pub fn segment_scene(cloud: &PointCloud, ransac: &RansacSettings, clustering: &ClusteringConfig) -> Result<Segmentation> {
    let fit = ransac_plane(cloud, ransac)?;
    let objects = cloud.select(&fit.outliers);
    let clusters = euclidean_cluster(&objects, clustering.epsilon, clustering.min_points)?;
    Ok(Segmentation {
        plane: fit.plane,
        inliers: fit.inliers,
        objects,
        object_indices: fit.outliers,
        clusters,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub score: Option<f64>,
    pub centroid: [f64; 3],
    pub extents: [f64; 3],
    pub size: usize,
}

/// JSON layout written by `segment` and `classify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationReport {
    pub plane: PlaneModel,
    pub points: usize,
    pub table_inliers: usize,
    pub clusters: Vec<ClusterReport>,
}

impl Segmentation {
    /// Poses of all clusters, labelled by `classifier` when given.
    pub fn poses(&self, classifier: Option<&OneVsRest>) -> Result<Vec<ObjectPose>> {
        self.clusters
            .iter()
            .map(|c| {
                let (label, score) = match classifier {
                    Some(ovr) => {
                        let f = extract_features(&self.objects, c)?;
                        let (l, s) = ovr.classify(&f)?;
                        (l.to_string(), s)
                    }
                    None => (String::new(), 0.0),
                };
                Ok(estimate_pose(&self.objects, c, &label, score)?)
            })
            .collect()
    }

    pub fn report(&self, points: usize, classifier: Option<&OneVsRest>) -> Result<SegmentationReport> {
        let poses = self.poses(classifier)?;
        Ok(SegmentationReport {
            plane: self.plane,
            points,
            table_inliers: self.inliers.len(),
            clusters: poses
                .into_iter()
                .zip(&self.clusters)
                .map(|(p, c)| ClusterReport {
                    label: classifier.map(|_| p.label.clone()),
                    score: classifier.map(|_| p.score),
                    centroid: p.centroid,
                    extents: p.extents,
                    size: c.len(),
                })
                .collect(),
        })
    }
}

/// One-vs-rest classifier over every catalog object class, trained on
/// generated instances.
pub fn train_classifier(cfg: &SvmConfig, noise: f64, seed: u64) -> Result<OneVsRest> {
    let (features, labels) = svm_training_set(cfg.instances_per_class, noise, seed)?;
    let labels: Vec<&str> = labels.iter().map(String::as_str).collect();
    Ok(OneVsRest::train(&features, &labels, &cfg.settings())?)
}
