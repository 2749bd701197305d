//! Kernel comparison harness: fit KMP per kernel, adapt it to object
//! instances through via-points and score the predicted means against each
//! instance's actual trajectory.

use alloc::string::String;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::kernel::KernelSpec;
use crate::kmp::{default_via_radius, insert_via_points, kmp_fit, KmpSettings, MeanRegularizer, ViaPoint};
use crate::metrics::component_scores;
use crate::synergy::SynergyPoint;
use crate::trajectory::ReferenceTrajectory;
use crate::{Error, Result};

/// Object instance: adaptation via-points plus the trajectory the adapted
/// primitive should reproduce on the evaluation grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ObjectInstance {
    pub name: String,
    pub via_points: Vec<ViaPoint>,
    pub actual: Vec<SynergyPoint>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BenchmarkCase {
    pub id: String,
    pub seed: u64,
    pub reference: ReferenceTrajectory,
    /// Dense evaluation grid.
    pub grid: Vec<f64>,
    /// Unadapted actual trajectory on `grid`, used when there are no instances.
    pub actual: Vec<SynergyPoint>,
    pub instances: Vec<ObjectInstance>,
}

impl BenchmarkCase {
    pub fn validate(&self) -> Result<()> {
        if self.reference.is_empty() || self.grid.is_empty() {
            return Err(Error::invalid("benchmark", "reference and grid must be nonempty"));
        }
        let dim = self.reference.dim();
        let targets = core::iter::once(&self.actual).chain(self.instances.iter().map(|i| &i.actual));
        for actual in targets {
            if actual.len() != self.grid.len() {
                return Err(Error::LengthMismatch {
                    left: self.grid.len(),
                    right: actual.len(),
                });
            }
            for p in actual {
                Error::check_dim(dim, p.len())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct InstanceScore {
    pub name: String,
    pub r: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct KernelRow {
    pub kernel: KernelSpec,
    pub r: f64,
    pub rmse: f64,
    pub instances: Vec<InstanceScore>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MetricReport {
    pub dataset: String,
    pub seed: u64,
    pub lambda: f64,
    pub mean_regularizer: MeanRegularizer,
    pub rows: Vec<KernelRow>,
}

impl MetricReport {
    pub fn row(&self, kind: crate::kernel::KernelKind) -> Option<&KernelRow> {
        self.rows.iter().find(|r| r.kernel.kind == kind)
    }
}

/// Predicted means for one kernel and instance, for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDump {
    pub kernel: KernelSpec,
    /// `None` for the unadapted run.
    pub instance: Option<String>,
    pub predicted: Vec<SynergyPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutcome {
    pub report: MetricReport,
    pub dumps: Vec<TrajectoryDump>,
}

fn predict_means(reference: &ReferenceTrajectory, settings: &KmpSettings, grid: &[f64]) -> Result<Vec<SynergyPoint>> {
    let model = kmp_fit(reference, settings)?;
    Ok(grid.iter().map(|&t| model.predict_mean(t)).collect())
}

/// Scores every kernel on the case. Rows are ordered by kernel name.
pub fn benchmark_kernels(
    case: &BenchmarkCase,
    kernels: &[KernelSpec],
    lambda: f64,
    regularizer: MeanRegularizer,
) -> Result<BenchmarkOutcome> {
    case.validate()?;
    if kernels.is_empty() {
        return Err(Error::invalid("kernels", "need at least one kernel"));
    }
    let mut order: Vec<usize> = (0..kernels.len()).collect();
    order.sort_by(|&a, &b| kernels[a].kind.name().cmp(kernels[b].kind.name()));
    let radius = default_via_radius(&case.reference);

    let mut rows = Vec::with_capacity(kernels.len());
    let mut dumps = Vec::new();
    for idx in order {
        let kernel = kernels[idx];
        let settings = KmpSettings::new(kernel, lambda).with_regularizer(regularizer);
        let mut scores = Vec::new();
        if case.instances.is_empty() {
            let predicted = predict_means(&case.reference, &settings, &case.grid)?;
            let s = component_scores(&case.actual, &predicted)?;
            scores.push(InstanceScore {
                name: case.id.clone(),
                r: s.r,
                rmse: s.rmse,
            });
            dumps.push(TrajectoryDump {
                kernel,
                instance: None,
                predicted,
            });
        }
        for inst in &case.instances {
            let adapted = insert_via_points(&case.reference, &inst.via_points, radius)?;
            let predicted = predict_means(&adapted, &settings, &case.grid)?;
            let s = component_scores(&inst.actual, &predicted)?;
            scores.push(InstanceScore {
                name: inst.name.clone(),
                r: s.r,
                rmse: s.rmse,
            });
            dumps.push(TrajectoryDump {
                kernel,
                instance: Some(inst.name.clone()),
                predicted,
            });
        }
        let n = scores.len() as f64;
        rows.push(KernelRow {
            kernel,
            r: scores.iter().map(|s| s.r).sum::<f64>() / n,
            rmse: scores.iter().map(|s| s.rmse).sum::<f64>() / n,
            instances: scores,
        });
    }
    Ok(BenchmarkOutcome {
        report: MetricReport {
            dataset: case.id.clone(),
            seed: case.seed,
            lambda,
            mean_regularizer: regularizer,
            rows,
        },
        dumps,
    })
}
