//! Seeded synthetic data: demonstrations through the task waypoints, desk
//! scenes with the task objects, and labelled object instances for the SVM.

use std::f64::consts::PI;

use kernsyn_core::perception::{extract_features, Cluster, PointCloud};
use kernsyn_core::synergy::JointConfiguration;
use kernsyn_core::trajectory::Demonstration;
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{synergy_profile, HandModel, SceneObject, Shape, Task, TaskScenario};

pub const DEFAULT_DEMO_SAMPLES: usize = 101;
/// Demonstration length in seconds.
pub const DEMO_DURATION: f64 = 4.0;
pub const DEFAULT_SCENE_NOISE: f64 = 0.001;
pub const TABLE_POINTS: usize = 2000;
/// Half extents of the sampled table patch, meters.
pub const TABLE_HALF: [f64; 2] = [0.3, 0.25];
/// Object surface points below this height are not generated, so every
/// object point stays well clear of the table inlier band.
pub const MIN_OBJECT_HEIGHT: f64 = 0.012;
/// Range of the seeded object displacement on the table, meters.
pub const PLACEMENT_JITTER: f64 = 0.02;

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Noise clipped to three standard deviations.
fn clipped(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    (gauss(rng) * sigma).clamp(-3.0 * sigma, 3.0 * sigma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoTruth {
    pub theta0: Vec<f64>,
    /// Generative directions as rows of length J.
    pub directions: Vec<Vec<f64>>,
    /// Noise-free samples: normalized time, synergy coordinates, posture.
    pub times: Vec<f64>,
    pub synergy: Vec<[f64; 2]>,
    pub postures: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSet {
    pub demos: Vec<Demonstration>,
    pub truth: DemoTruth,
}

/// Demonstrations along a waypoint profile. Each demo perturbs the waypoint
/// values (σ = `noise`) and interior knot times (σ = `noise`/2), then adds
/// joint noise with σ = `noise`. `noise = 0` reproduces the ground truth.
pub fn demos_from_waypoints(
    hand: &HandModel,
    waypoints: &[(f64, [f64; 2])],
    count: usize,
    samples: usize,
    noise: f64,
    seed: u64,
) -> Result<DemoSet> {
    if count < 2 {
        return Err(Error::ConfigInvalid(format!("need at least 2 demonstrations, got {count}")));
    }
    if samples < 2 {
        return Err(Error::ConfigInvalid("need at least 2 samples per demonstration".into()));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::ConfigInvalid("demo noise must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times: Vec<f64> = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
    let synergy: Vec<[f64; 2]> = times.iter().map(|&t| synergy_profile(waypoints, t)).collect();
    let postures: Vec<Vec<f64>> = synergy.iter().map(|&w| hand.posture(w).iter().copied().collect()).collect();

    let mut demos = Vec::with_capacity(count);
    for _ in 0..count {
        let mut knots = waypoints.to_vec();
        let last = knots.len() - 1;
        for i in 0..knots.len() {
            if i > 0 && i < last {
                let lo = knots[i - 1].0 + 0.02;
                let hi = knots[i + 1].0 - 0.02;
                knots[i].0 = (knots[i].0 + 0.5 * noise * gauss(&mut rng)).clamp(lo, hi);
            }
            for v in knots[i].1.iter_mut() {
                *v += noise * gauss(&mut rng);
            }
        }
        let samples = times
            .iter()
            .map(|&t| {
                let q = hand.posture(synergy_profile(&knots, t)).map(|v| v + noise * gauss(&mut rng));
                (t * DEMO_DURATION, JointConfiguration::from(q.as_slice().to_vec()))
            })
            .collect();
        demos.push(Demonstration::new(samples));
    }
    Ok(DemoSet {
        demos,
        truth: DemoTruth {
            theta0: hand.theta0.iter().copied().collect(),
            directions: hand.directions.column_iter().map(|c| c.iter().copied().collect()).collect(),
            times,
            synergy,
            postures,
        },
    })
}

pub fn generate_synthetic_demos(task: Task, count: usize, noise: f64, seed: u64) -> Result<DemoSet> {
    let scenario = TaskScenario::for_task(task);
    demos_from_waypoints(&HandModel::standard(), &scenario.waypoints(), count, DEFAULT_DEMO_SAMPLES, noise, seed)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectAnnotation {
    pub label: String,
    /// Mean of the noise-free generated points.
    pub centroid: [f64; 3],
    pub extents: [f64; 3],
    /// Index of the first point of this object in the cloud.
    pub start: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneAnnotations {
    pub task: Task,
    pub seed: u64,
    pub noise: f64,
    /// The first `table_points` points of the cloud lie on the plane z = 0.
    pub table_points: usize,
    pub objects: Vec<ObjectAnnotation>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub cloud: PointCloud,
    pub annotations: SceneAnnotations,
}

/// Points on the visible surface of `shape` standing at the origin.
fn sample_surface(shape: &Shape, n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = match *shape {
            Shape::Ellipsoid { semi_axes: a } => {
                let mut u = [gauss(rng), gauss(rng), gauss(rng)];
                let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
                if norm < 1e-12 {
                    continue;
                }
                u.iter_mut().for_each(|v| *v /= norm);
                [a[0] * u[0], a[1] * u[1], a[2] + a[2] * u[2]]
            }
            Shape::Box { size: s } => {
                let (top, side_x, side_y) = (s[0] * s[1], s[1] * s[2], s[0] * s[2]);
                let pick = rng.random::<f64>() * (top + 2.0 * side_x + 2.0 * side_y);
                let (x, y, z) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>());
                if pick < top {
                    [x * s[0], y * s[1], s[2]]
                } else if pick < top + 2.0 * side_x {
                    let sign = if pick < top + side_x { -0.5 } else { 0.5 };
                    [sign * s[0], y * s[1], z * s[2]]
                } else {
                    let sign = if pick < top + 2.0 * side_x + side_y { -0.5 } else { 0.5 };
                    [x * s[0], sign * s[1], z * s[2]]
                }
            }
            Shape::Cylinder { radius, height } => {
                let (cap, side) = (PI * radius * radius, 2.0 * PI * radius * height);
                let phi = 2.0 * PI * rng.random::<f64>();
                if rng.random::<f64>() * (cap + side) < cap {
                    let r = radius * rng.random::<f64>().sqrt();
                    [r * phi.cos(), r * phi.sin(), height]
                } else {
                    [radius * phi.cos(), radius * phi.sin(), height * rng.random::<f64>()]
                }
            }
            Shape::Disc { radius, thickness } => {
                let (face, rim) = (PI * radius * radius, 2.0 * PI * radius * thickness);
                let phi = 2.0 * PI * rng.random::<f64>();
                if rng.random::<f64>() * (face + rim) < face {
                    let r = radius * rng.random::<f64>().sqrt();
                    [r * phi.cos(), r * phi.sin(), thickness]
                } else {
                    [radius * phi.cos(), radius * phi.sin(), thickness * rng.random::<f64>()]
                }
            }
        };
        if p[2] >= MIN_OBJECT_HEIGHT {
            out.push(p);
        }
    }
    out
}

fn add_noise(p: [f64; 3], sigma: f64, rng: &mut ChaCha8Rng) -> [f64; 3] {
    if sigma == 0.0 {
        return p;
    }
    [p[0] + clipped(rng, sigma), p[1] + clipped(rng, sigma), p[2] + clipped(rng, sigma)]
}

fn mean_of(points: &[[f64; 3]]) -> [f64; 3] {
    let n = points.len() as f64;
    let mut c = [0.0; 3];
    for p in points {
        for k in 0..3 {
            c[k] += p[k] / n;
        }
    }
    c
}

/// Table patch at z = 0 followed by the objects, each displaced by up to
/// [`PLACEMENT_JITTER`] and sampled with clipped Gaussian noise σ = `noise`.
pub fn scene_from_objects(
    task: Task,
    objects: &[SceneObject],
    seed: u64,
    noise: f64,
) -> Result<Scene> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::ConfigInvalid("scene noise must be finite and non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(TABLE_POINTS + objects.iter().map(|o| o.points).sum::<usize>());
    for _ in 0..TABLE_POINTS {
        let x = (2.0 * rng.random::<f64>() - 1.0) * TABLE_HALF[0];
        let y = (2.0 * rng.random::<f64>() - 1.0) * TABLE_HALF[1];
        points.push(add_noise([x, y, 0.0], noise, &mut rng));
    }
    let mut annotations = Vec::with_capacity(objects.len());
    for obj in objects {
        let dx = (2.0 * rng.random::<f64>() - 1.0) * PLACEMENT_JITTER;
        let dy = (2.0 * rng.random::<f64>() - 1.0) * PLACEMENT_JITTER;
        let (cx, cy) = (obj.position[0] + dx, obj.position[1] + dy);
        let clean: Vec<[f64; 3]> = sample_surface(&obj.shape, obj.points, &mut rng)
            .into_iter()
            .map(|p| [p[0] + cx, p[1] + cy, p[2]])
            .collect();
        annotations.push(ObjectAnnotation {
            label: obj.label.clone(),
            centroid: mean_of(&clean),
            extents: obj.shape.extents(),
            start: points.len(),
            count: clean.len(),
        });
        for p in clean {
            points.push(add_noise(p, noise, &mut rng));
        }
    }
    Ok(Scene {
        cloud: PointCloud::from_xyz(&points)?,
        annotations: SceneAnnotations {
            task,
            seed,
            noise,
            table_points: TABLE_POINTS,
            objects: annotations,
        },
    })
}

pub fn generate_synthetic_scene(task: Task, seed: u64) -> Result<Scene> {
    generate_scene_with_noise(task, seed, DEFAULT_SCENE_NOISE)
}

pub fn generate_scene_with_noise(task: Task, seed: u64, noise: f64) -> Result<Scene> {
    scene_from_objects(task, &TaskScenario::for_task(task).objects, seed, noise)
}

/// Every object class of both tasks.
pub fn object_catalog() -> Vec<SceneObject> {
    Task::ALL.iter().flat_map(|&t| TaskScenario::for_task(t).objects).collect()
}

/// Labelled feature vectors of isolated objects whose size varies by ±15%
/// and point count by ±20% around the catalog entry.
pub fn svm_training_set(per_class: usize, noise: f64, seed: u64) -> Result<(Vec<Vec<f64>>, Vec<String>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for obj in object_catalog() {
        for _ in 0..per_class {
            let mut scale = || 0.85 + 0.3 * rng.random::<f64>();
            let shape = match obj.shape {
                Shape::Ellipsoid { semi_axes: a } => Shape::Ellipsoid {
                    semi_axes: [a[0] * scale(), a[1] * scale(), a[2] * scale()],
                },
                Shape::Box { size: s } => Shape::Box {
                    size: [s[0] * scale(), s[1] * scale(), s[2] * scale()],
                },
                Shape::Cylinder { radius, height } => Shape::Cylinder {
                    radius: radius * scale(),
                    height: height * scale(),
                },
                Shape::Disc { radius, thickness } => Shape::Disc {
                    radius: radius * scale(),
                    thickness: thickness * scale(),
                },
            };
            let n = (obj.points as f64 * (0.8 + 0.4 * rng.random::<f64>())).round() as usize;
            let pts: Vec<Point3<f64>> = sample_surface(&shape, n, &mut rng)
                .into_iter()
                .map(|p| {
                    let q = add_noise(p, noise, &mut rng);
                    Point3::new(q[0], q[1], q[2])
                })
                .collect();
            let cloud = PointCloud::new(pts)?;
            let cluster = Cluster {
                indices: (0..cloud.len()).collect(),
            };
            features.push(extract_features(&cloud, &cluster)?.to_vec());
            labels.push(obj.label.clone());
        }
    }
    Ok((features, labels))
}
