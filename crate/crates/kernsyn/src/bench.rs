//! Synthetic three-object grasping benchmark for the kernel comparison.
//!
//! A generic reach-to-grasp is demonstrated and encoded into the reference
//! trajectory. Each object (cubical, spherical, cylindrical) has its own
//! demonstrations whose mixture regression is the object's actual
//! trajectory; the primitive is adapted to it through a pre-grasp via-point
//! and the end-point taken from that actual trajectory.

use std::path::{Path, PathBuf};

use kernsyn_core::benchmark::{benchmark_kernels, BenchmarkCase, BenchmarkOutcome, MetricReport, ObjectInstance};
use kernsyn_core::gmm::{generate_reference, EmSettings};
use kernsyn_core::kmp::ViaPoint;
use kernsyn_core::synergy::SynergyBasis;
use kernsyn_core::trajectory::{uniform_grid, Demonstration};

use crate::config::BenchmarkConfig;
use crate::error::Result;
use crate::generate::{demos_from_waypoints, DEFAULT_DEMO_SAMPLES};
use crate::io;
use crate::pipeline::{encode_reference, fit_basis};
use crate::scenario::HandModel;

pub const DATASET_ID: &str = "desk-grasp-3obj";
pub const REFERENCE_POINTS: usize = 51;
pub const EVALUATION_POINTS: usize = 201;
pub const GMM_COMPONENTS: usize = 6;
pub const VIA_VARIANCE: f64 = 1e-6;
/// Normalized times of the adaptation via-point and end-point.
pub const VIA_TIMES: [f64; 2] = [0.5, 1.0];

/// Grasp aperture profile: preshape, pre-grasp aperture, grasp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspProfile {
    pub name: &'static str,
    pub preshape: [f64; 2],
    pub aperture: [f64; 2],
    pub grasp: [f64; 2],
}

impl GraspProfile {
    pub fn waypoints(&self) -> [(f64, [f64; 2]); 4] {
        [(0.0, self.preshape), (0.5, self.aperture), (0.85, self.grasp), (1.0, self.grasp)]
    }
}

pub const GENERIC: GraspProfile = GraspProfile {
    name: "generic",
    preshape: [-0.40, 0.00],
    aperture: [-0.30, 0.12],
    grasp: [-0.05, 0.24],
};

pub const OBJECTS: [GraspProfile; 3] = [
    GraspProfile {
        name: "cubical",
        preshape: [-0.40, 0.00],
        aperture: [-0.26, 0.08],
        grasp: [0.02, 0.20],
    },
    GraspProfile {
        name: "spherical",
        preshape: [-0.40, 0.00],
        aperture: [-0.34, 0.16],
        grasp: [-0.12, 0.30],
    },
    GraspProfile {
        name: "cylindrical",
        preshape: [-0.40, 0.00],
        aperture: [-0.28, 0.14],
        grasp: [0.06, 0.26],
    },
];

/// Everything the benchmark was built from, kept for inspection.
#[derive(Debug, Clone)]
pub struct BenchmarkData {
    pub case: BenchmarkCase,
    pub basis: SynergyBasis,
}

fn object_demos(profile: &GraspProfile, cfg: &BenchmarkConfig, stream: u64) -> Result<Vec<Demonstration>> {
    let hand = HandModel::standard();
    Ok(demos_from_waypoints(
        &hand,
        &profile.waypoints(),
        cfg.demos_per_object,
        DEFAULT_DEMO_SAMPLES,
        cfg.noise,
        cfg.seed.wrapping_add(stream),
    )?
    .demos)
}

pub fn build_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkData> {
    let hand = HandModel::standard();
    let generic = object_demos(&GENERIC, cfg, 0)?;
    let per_object = OBJECTS
        .iter()
        .enumerate()
        .map(|(i, p)| object_demos(p, cfg, 1 + i as u64))
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<Demonstration> = generic.iter().chain(per_object.iter().flatten()).cloned().collect();
    let basis = fit_basis(&all, Some(hand.theta0.as_slice()), kernsyn_core::synergy::DEFAULT_VARIANCE_THRESHOLD)?;

    let em = EmSettings {
        components: GMM_COMPONENTS,
        seed: cfg.seed,
        ..EmSettings::default()
    };
    let (generic_fit, reference) = encode_reference(&generic, &basis, &em, REFERENCE_POINTS)?;
    let grid = uniform_grid(EVALUATION_POINTS);
    let actual = generate_reference(&generic_fit.model, &grid)?.means().to_vec();

    let mut instances = Vec::with_capacity(OBJECTS.len());
    for (profile, demos) in OBJECTS.iter().zip(&per_object) {
        let (fit, _) = encode_reference(demos, &basis, &em, REFERENCE_POINTS)?;
        let dense = generate_reference(&fit.model, &grid)?;
        let via_points = VIA_TIMES
            .iter()
            .map(|&t| Ok(ViaPoint::isotropic(t, dense.mean_at(t), VIA_VARIANCE)?))
            .collect::<Result<Vec<_>>>()?;
        instances.push(ObjectInstance {
            name: profile.name.into(),
            via_points,
            actual: dense.means().to_vec(),
        });
    }
    Ok(BenchmarkData {
        case: BenchmarkCase {
            id: DATASET_ID.into(),
            seed: cfg.seed,
            reference,
            grid,
            actual,
            instances,
        },
        basis,
    })
}

pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<(BenchmarkData, BenchmarkOutcome)> {
    let data = build_benchmark(cfg)?;
    let outcome = benchmark_kernels(&data.case, &cfg.kernels, cfg.lambda, cfg.mean_regularizer)?;
    Ok((data, outcome))
}

/// Fixed-width table of the report.
pub fn format_report(report: &MetricReport) -> String {
    let mut s = format!(
        "dataset {}  seed {}  lambda {:e}  mean regularizer {:?}\n",
        report.dataset, report.seed, report.lambda, report.mean_regularizer
    );
    s.push_str(&format!("{:<12} {:>10} {:>10} {:>10} {:>10}\n", "kernel", "l", "alpha", "R", "rMSE"));
    for row in &report.rows {
        let alpha = row.kernel.alpha.map_or("-".to_string(), |a| format!("{a}"));
        s.push_str(&format!(
            "{:<12} {:>10} {:>10} {:>10.4} {:>10.4}\n",
            row.kernel.kind.name(),
            row.kernel.length_scale,
            alpha,
            row.r,
            row.rmse
        ));
        for inst in &row.instances {
            s.push_str(&format!("  {:<21} {:>10} {:>10.4} {:>10.4}\n", inst.name, "", inst.r, inst.rmse));
        }
    }
    s
}

/// Writes `report.txt`, `report.json` and one CSV per kernel and instance.
pub fn write_outcome(dir: &Path, data: &BenchmarkData, outcome: &BenchmarkOutcome) -> Result<Vec<PathBuf>> {
    let mut files = vec![dir.join("report.txt"), dir.join("report.json")];
    io::write_text(&files[0], &format_report(&outcome.report))?;
    io::write_json(&files[1], &outcome.report)?;
    for dump in &outcome.dumps {
        let inst = dump.instance.as_deref().unwrap_or("reference");
        let path = dir.join("trajectories").join(format!("{}_{}.csv", dump.kernel.kind.name(), inst));
        io::write_points_csv(&path, &data.case.grid, &dump.predicted)?;
        files.push(path);
    }
    for inst in &data.case.instances {
        let path = dir.join("trajectories").join(format!("actual_{}.csv", inst.name));
        io::write_points_csv(&path, &data.case.grid, &inst.actual)?;
        files.push(path);
    }
    Ok(files)
}
