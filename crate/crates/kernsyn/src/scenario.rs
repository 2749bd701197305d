//! The two desk tasks: hand model, synergy waypoints, scene layout and force
//! targets. Synergy coordinates are expressed along the generative directions
//! of [`HandModel`]; the pipeline maps them into the learned basis.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Egg,
    Ketchup,
}

impl Task {
    pub const ALL: [Task; 2] = [Task::Egg, Task::Ketchup];

    pub fn name(self) -> &'static str {
        match self {
            Task::Egg => "egg",
            Task::Ketchup => "ketchup",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "egg" => Ok(Task::Egg),
            "ketchup" => Ok(Task::Ketchup),
            _ => Err(Error::UnknownTask(s.to_string())),
        }
    }
}

pub const JOINTS: usize = 6;

/// Six-actuator hand (little, ring, middle, index, thumb flexion, thumb
/// rotation) with two generative synergy directions.
#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    pub theta0: DVector<f64>,
    /// J×2, orthonormal columns, largest-magnitude entry of each positive.
    pub directions: DMatrix<f64>,
}

impl HandModel {
    pub fn standard() -> Self {
        let theta0 = DVector::from_column_slice(&[0.25, 0.25, 0.25, 0.25, 0.35, 0.6]);
        // power closure of all digits, and thumb-index opposition
        let power = DVector::from_column_slice(&[1.0, 1.0, 1.0, 0.9, 0.7, 0.3]).normalize();
        let raw = DVector::from_column_slice(&[-0.4, -0.3, 0.1, 0.6, 0.5, -0.5]);
        let opposition = (&raw - &power * power.dot(&raw)).normalize();
        Self {
            theta0,
            directions: DMatrix::from_columns(&[power, opposition]),
        }
    }

    /// Joint posture for generative synergy coordinates `w`.
    pub fn posture(&self, w: [f64; 2]) -> DVector<f64> {
        &self.theta0 + &self.directions * DVector::from_column_slice(&w)
    }
}

/// Shapes used by the scene generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Shape {
    /// Semi-axes; the body rests on the table.
    Ellipsoid { semi_axes: [f64; 3] },
    /// Full side lengths.
    Box { size: [f64; 3] },
    Cylinder { radius: f64, height: f64 },
    Disc { radius: f64, thickness: f64 },
}

impl Shape {
    /// Axis-aligned extents of the body.
    pub fn extents(&self) -> [f64; 3] {
        match *self {
            Shape::Ellipsoid { semi_axes: a } => [2.0 * a[0], 2.0 * a[1], 2.0 * a[2]],
            Shape::Box { size } => size,
            Shape::Cylinder { radius, height } => [2.0 * radius, 2.0 * radius, height],
            Shape::Disc { radius, thickness } => [2.0 * radius, 2.0 * radius, thickness],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub label: String,
    pub shape: Shape,
    /// Table-plane position of the body's vertical axis.
    pub position: [f64; 2],
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskScenario {
    pub task: Task,
    /// Pre-shape the reach starts from.
    pub preshape: [f64; 2],
    pub grasp: [f64; 2],
    pub manipulation_start: [f64; 2],
    pub manipulation_end: [f64; 2],
    /// Normalized times of the waypoint knots:
    /// preshape, grasp reached, grasp released to manipulation, manipulation start, end.
    pub knots: [f64; 5],
    pub objects: Vec<SceneObject>,
    /// Object the hand grasps.
    pub target: &'static str,
    /// Object the manipulation ends at.
    pub placement: &'static str,
    pub mass: f64,
    /// Radius of the grasped body at contact height.
    pub contact_radius: f64,
    pub mu: f64,
    pub band: [f64; 2],
    pub hold: f64,
}

impl TaskScenario {
    pub fn for_task(task: Task) -> Self {
        match task {
            // pick an egg, orient it and place it in a tray
            Task::Egg => Self {
                task,
                preshape: [-0.45, 0.02],
                grasp: [-0.163, 0.231],
                manipulation_start: [-0.154, 0.242],
                manipulation_end: [-0.09, 0.273],
                knots: [0.0, 0.35, 0.5, 0.6, 0.95],
                objects: vec![
                    SceneObject {
                        label: "egg".into(),
                        shape: Shape::Ellipsoid {
                            semi_axes: [0.028, 0.021, 0.021],
                        },
                        position: [0.10, -0.06],
                        points: 450,
                    },
                    SceneObject {
                        label: "tray".into(),
                        shape: Shape::Box {
                            size: [0.12, 0.08, 0.03],
                        },
                        position: [-0.10, 0.08],
                        points: 550,
                    },
                ],
                target: "egg",
                placement: "tray",
                mass: 0.068,
                contact_radius: 0.021,
                mu: 0.64,
                band: [2.38, 3.16],
                hold: 3.06,
            },
            // grasp a ketchup bottle and press it over a plate
            Task::Ketchup => Self {
                task,
                preshape: [-0.30, 0.0],
                grasp: [0.144, 0.283],
                manipulation_start: [0.152, 0.293],
                manipulation_end: [0.311, 0.486],
                knots: [0.0, 0.35, 0.5, 0.6, 0.95],
                objects: vec![
                    SceneObject {
                        label: "bottle".into(),
                        shape: Shape::Cylinder {
                            radius: 0.03,
                            height: 0.19,
                        },
                        position: [0.08, 0.06],
                        points: 1400,
                    },
                    SceneObject {
                        label: "plate".into(),
                        shape: Shape::Disc {
                            radius: 0.09,
                            thickness: 0.016,
                        },
                        position: [-0.11, -0.07],
                        points: 900,
                    },
                ],
                target: "bottle",
                placement: "plate",
                mass: 0.117,
                contact_radius: 0.03,
                mu: 0.71,
                band: [2.38, 4.26],
                hold: 4.16,
            },
        }
    }

    /// Generative synergy coordinates at normalized time `tau`; smoothstep
    /// blends between consecutive waypoints.
    pub fn synergy_at(&self, tau: f64) -> [f64; 2] {
        synergy_profile(&self.waypoints(), tau)
    }

    pub fn waypoints(&self) -> [(f64, [f64; 2]); 6] {
        let k = self.knots;
        [
            (k[0], self.preshape),
            (k[1], self.grasp),
            (k[2], self.grasp),
            (k[3], self.manipulation_start),
            (k[4], self.manipulation_end),
            (1.0, self.manipulation_end),
        ]
    }

    /// Time of the grasp via-point (middle of the grasp hold).
    pub fn grasp_time(&self) -> f64 {
        0.5 * (self.knots[1] + self.knots[2])
    }

    pub fn manipulation_window(&self) -> (f64, f64) {
        (self.knots[3], self.knots[4])
    }

    pub fn object(&self, label: &str) -> Option<&SceneObject> {
        self.objects.iter().find(|o| o.label == label)
    }
}

pub(crate) fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Piecewise smoothstep interpolation through `(time, value)` knots.
pub fn synergy_profile(knots: &[(f64, [f64; 2])], tau: f64) -> [f64; 2] {
    let (first, last) = (knots[0], knots[knots.len() - 1]);
    if tau <= first.0 {
        return first.1;
    }
    if tau >= last.0 {
        return last.1;
    }
    let hi = knots.partition_point(|k| k.0 <= tau).min(knots.len() - 1);
    let (a, b) = (knots[hi - 1], knots[hi]);
    let s = smoothstep((tau - a.0) / (b.0 - a.0));
    [a.1[0] + s * (b.1[0] - a.1[0]), a.1[1] + s * (b.1[1] - a.1[1])]
}
