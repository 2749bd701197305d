//! End-to-end task run: synergies, reference encoding, perception,
//! via-points, KMP adaptation, joint reconstruction, the force loop and
//! summary metrics, logged in that order.

use std::path::{Path, PathBuf};

use kernsyn_core::gmm::{fit_gmm, generate_reference, EmSettings, GmmModel};
use kernsyn_core::kernel::KernelSpec;
use kernsyn_core::kmp::{default_via_radius, insert_via_points, kmp_fit, KmpSettings, MeanRegularizer, ViaPoint};
use kernsyn_core::metrics::component_scores;
use kernsyn_core::perception::{ObjectPose, PointCloud, SynergyMappingParams};
use kernsyn_core::synergy::{fit_synergy_basis, ConfigurationMatrix, JointConfiguration, SynergyBasis, SynergyPoint};
use kernsyn_core::trajectory::{interpolate_coefficients, uniform_grid, Demonstration, ReferenceTrajectory};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{Error, Result, StageContext};
use crate::generate::{demos_from_waypoints, scene_from_objects, DemoTruth, SceneAnnotations};
use crate::io;
use crate::perception::{segment_scene, train_classifier, SegmentationReport};
use crate::scenario::{HandModel, Task, TaskScenario};
use crate::sim::{grasp_model, simulate_grip, support_wrench, ForceRun, ForceTargets};

/// Keeps the classifier training instances independent of the scene draw.
const SVM_STREAM: u64 = 0x5a3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskLog {
    pub task: Task,
    pub seed: u64,
    pub stages: Vec<StageRecord>,
}

impl TaskLog {
    pub fn stage_names(&self) -> Vec<&'static str> {
        self.stages.iter().map(StageRecord::name).collect()
    }
}

/// Stage names in execution order.
pub const STAGE_ORDER: [&str; 8] = [
    "synergy",
    "encoding",
    "perception",
    "via_points",
    "kmp",
    "reconstruction",
    "force",
    "metrics",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum StageRecord {
    Synergy(SynergyStage),
    Encoding(EncodingStage),
    Perception(PerceptionStage),
    ViaPoints(ViaPointStage),
    Kmp(KmpStage),
    Reconstruction(ReconstructionStage),
    Force(ForceStage),
    Metrics(MetricsStage),
}

impl StageRecord {
    pub fn name(&self) -> &'static str {
        match self {
            StageRecord::Synergy(_) => STAGE_ORDER[0],
            StageRecord::Encoding(_) => STAGE_ORDER[1],
            StageRecord::Perception(_) => STAGE_ORDER[2],
            StageRecord::ViaPoints(_) => STAGE_ORDER[3],
            StageRecord::Kmp(_) => STAGE_ORDER[4],
            StageRecord::Reconstruction(_) => STAGE_ORDER[5],
            StageRecord::Force(_) => STAGE_ORDER[6],
            StageRecord::Metrics(_) => STAGE_ORDER[7],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergyStage {
    /// `generated`, `file` or `model`.
    pub source: String,
    pub demos: usize,
    pub synergies: usize,
    pub variance_fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingStage {
    pub components: usize,
    pub iterations: usize,
    pub converged: bool,
    pub log_likelihood: Option<f64>,
    pub reference_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerceptionStage {
    pub segmentation: SegmentationReport,
    pub target: ObjectPose,
    pub placement: ObjectPose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointRecord {
    pub name: String,
    /// Coordinates along the generative directions.
    pub configured: [f64; 2],
    /// Same posture in the learned basis.
    pub learned: Vec<f64>,
    /// `‖project(reconstruct(e)) − e‖∞`
    pub roundtrip_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViaPointRecord {
    pub name: String,
    pub t: f64,
    pub value: Vec<f64>,
    pub variance: f64,
    /// Object addend `e_O` included in `value`.
    pub object_term: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViaPointStage {
    pub waypoints: Vec<WaypointRecord>,
    pub via_points: Vec<ViaPointRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynergySample {
    pub t: f64,
    pub e: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmpStage {
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub mean_regularizer: MeanRegularizer,
    pub trajectory: Vec<SynergySample>,
    /// Distance of the prediction from each via value at its time.
    pub via_errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSample {
    pub t: f64,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionStage {
    pub joints: Vec<JointSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceStage {
    pub run: ForceRun,
    /// Posture at the grasp via-point with the force correction applied.
    pub grasp_posture: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsStage {
    /// Prediction vs the generator's noise-free trajectory, when known.
    pub truth_r: Option<f64>,
    pub truth_rmse: Option<f64>,
    pub max_via_error: f64,
    /// Progress along the manipulation segment never decreases.
    pub manipulation_monotone: bool,
    pub final_grip: f64,
    pub grip_within_band: bool,
    pub all_contacts_stable: bool,
    pub settled: bool,
}

/// Everything a run produced; `write` stores it under the output directory.
#[derive(Debug, Clone)]
pub struct TaskRun {
    pub log: TaskLog,
    pub basis: SynergyBasis,
    pub gmm: GmmModel,
    pub reference: ReferenceTrajectory,
    pub prediction: ReferenceTrajectory,
    pub force_profile: kernsyn_core::force::ForceProfile,
}

impl TaskRun {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let files = [
            "task_log.json",
            "basis.json",
            "gmm.json",
            "reference.json",
            "reference.csv",
            "prediction.csv",
            "force.csv",
            "segmentation.json",
        ]
        .map(|f| dir.join(f));
        io::write_json(&files[0], &self.log)?;
        io::write_json(&files[1], &self.basis)?;
        io::write_json(&files[2], &self.gmm)?;
        io::write_json(&files[3], &self.reference)?;
        io::write_reference_csv(&files[4], &self.reference)?;
        io::write_prediction_csv(&files[5], &self.prediction)?;
        io::write_force_profile(&files[6], &self.force_profile)?;
        if let Some(StageRecord::Perception(p)) = self.log.stages.iter().find(|s| s.name() == "perception") {
            io::write_json(&files[7], &p.segmentation)?;
        }
        Ok(files.to_vec())
    }
}

struct DemoInput {
    demos: Vec<Demonstration>,
    truth: Option<DemoTruth>,
    source: &'static str,
}

fn load_demos(cfg: &PipelineConfig, scenario: &TaskScenario, hand: &HandModel) -> Result<DemoInput> {
    match &cfg.paths.demos {
        Some(path) => Ok(DemoInput {
            demos: io::read_demos(path)?,
            truth: None,
            source: "file",
        }),
        None => {
            let set = demos_from_waypoints(
                hand,
                &scenario.waypoints(),
                cfg.demos.count,
                cfg.demos.samples,
                cfg.demos.noise,
                cfg.seed,
            )?;
            Ok(DemoInput {
                demos: set.demos,
                truth: Some(set.truth),
                source: "generated",
            })
        }
    }
}

fn model_file(cfg: &PipelineConfig, name: &str) -> Option<PathBuf> {
    cfg.paths.models.as_ref().map(|d| d.join(name)).filter(|p| p.exists())
}

/// Fits the synergy basis on every posture of `demos`, centred on `theta0`
/// when given.
pub fn fit_basis(demos: &[Demonstration], theta0: Option<&[f64]>, threshold: f64) -> Result<SynergyBasis> {
    let rows: Vec<Vec<f64>> = demos.iter().flat_map(|d| d.samples.iter().map(|(_, q)| q.iter().copied().collect())).collect();
    let configs = ConfigurationMatrix::from_postures(&rows, theta0)?;
    Ok(fit_synergy_basis(&configs, threshold)?)
}

/// GMM over the projected demos and the GMR reference on `grid` points.
pub fn encode_reference(
    demos: &[Demonstration],
    basis: &SynergyBasis,
    settings: &EmSettings,
    grid: usize,
) -> Result<(kernsyn_core::gmm::GmmFit, ReferenceTrajectory)> {
    let times = uniform_grid(grid);
    let trajectories = interpolate_coefficients(demos, basis, &times)?;
    let fit = fit_gmm(&trajectories, settings)?;
    let reference = generate_reference(&fit.model, &times)?;
    Ok((fit, reference))
}

fn learned_coordinates(basis: &SynergyBasis, hand: &HandModel, w: [f64; 2]) -> Result<(Vec<f64>, f64)> {
    let posture = JointConfiguration::from(hand.posture(w).as_slice().to_vec());
    let e = basis.project(&posture)?;
    let back = basis.project(&basis.reconstruct(&e)?)?;
    let err = (&*back - &*e).amax();
    Ok((e.iter().copied().collect(), err))
}

/// Table-plane displacement of the detected centroid from the nominal
/// position, as a pose 6-vector.
fn pose_offset(pose: &ObjectPose, nominal: [f64; 2]) -> DVector<f64> {
    DVector::from_column_slice(&[pose.centroid[0] - nominal[0], pose.centroid[1] - nominal[1], 0.0, 0.0, 0.0, 0.0])
}

fn pick<'a>(poses: &'a [ObjectPose], label: &str) -> Result<&'a ObjectPose> {
    poses
        .iter()
        .filter(|p| p.label == label)
        .max_by(|a, b| a.score.total_cmp(&b.score))
        .ok_or_else(|| Error::MissingObject(label.to_string()))
}

fn point_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Progress along `start → end` never decreases over `points`.
pub fn monotone_progress(points: &[Vec<f64>], start: &[f64], end: &[f64]) -> bool {
    let dir: Vec<f64> = end.iter().zip(start).map(|(e, s)| e - s).collect();
    let len2: f64 = dir.iter().map(|d| d * d).sum();
    if len2 == 0.0 {
        return true;
    }
    let progress: Vec<f64> = points
        .iter()
        .map(|p| p.iter().zip(start).zip(&dir).map(|((x, s), d)| (x - s) * d).sum::<f64>() / len2)
        .collect();
    progress.windows(2).all(|w| w[1] >= w[0])
}

pub fn load_scene(cfg: &PipelineConfig, scenario: &TaskScenario) -> Result<(PointCloud, Option<SceneAnnotations>)> {
    match &cfg.paths.scene {
        Some(path) => Ok((io::read_cloud(path)?, None)),
        None => {
            let scene = scene_from_objects(scenario.task, &scenario.objects, scene_seed(cfg), cfg.scene.noise)?;
            Ok((scene.cloud, Some(scene.annotations)))
        }
    }
}

/// Seed of the generated scene; `generate scene` uses the same one.
pub fn scene_seed(cfg: &PipelineConfig) -> u64 {
    cfg.seed
}

pub fn classifier_seed(cfg: &PipelineConfig) -> u64 {
    cfg.seed ^ SVM_STREAM
}

/// Runs the configured task. Nothing is written; see [`TaskRun::write`].
pub fn run_task(cfg: &PipelineConfig) -> Result<TaskRun> {
    cfg.validate()?;
    let scenario = TaskScenario::for_task(cfg.task);
    let hand = HandModel::standard();
    let mut stages = Vec::with_capacity(STAGE_ORDER.len());

    // synergy basis
    let input = load_demos(cfg, &scenario, &hand).stage("synergy")?;
    let (basis, source) = match model_file(cfg, "basis.json") {
        Some(path) => (io::read_json::<SynergyBasis>(&path).stage("synergy")?, "model"),
        None => (
            fit_basis(&input.demos, Some(hand.theta0.as_slice()), cfg.synergy.variance_threshold).stage("synergy")?,
            input.source,
        ),
    };
    stages.push(StageRecord::Synergy(SynergyStage {
        source: source.into(),
        demos: input.demos.len(),
        synergies: basis.synergy_dim(),
        variance_fractions: basis.variance_fractions().to_vec(),
    }));

    // reference encoding
    let times = uniform_grid(cfg.gmm.grid);
    let (gmm, reference, encoding) = match model_file(cfg, "gmm.json") {
        Some(path) => {
            let model: GmmModel = io::read_json(&path).stage("encoding")?;
            let reference = generate_reference(&model, &times).stage("encoding")?;
            let record = EncodingStage {
                components: model.components().len(),
                iterations: 0,
                converged: true,
                log_likelihood: None,
                reference_points: reference.len(),
            };
            (model, reference, record)
        }
        None => {
            let settings = EmSettings {
                components: cfg.gmm.components,
                seed: cfg.gmm.seed,
                max_iter: cfg.gmm.max_iter,
                tol: cfg.gmm.tol,
            };
            let (fit, reference) = encode_reference(&input.demos, &basis, &settings, cfg.gmm.grid).stage("encoding")?;
            let record = EncodingStage {
                components: fit.model.components().len(),
                iterations: fit.iterations,
                converged: fit.converged,
                log_likelihood: fit.log_likelihood.last().copied(),
                reference_points: reference.len(),
            };
            (fit.model, reference, record)
        }
    };
    stages.push(StageRecord::Encoding(encoding));

    // perception
    let (cloud, _) = load_scene(cfg, &scenario).stage("perception")?;
    let classifier = train_classifier(&cfg.svm, cfg.scene.noise, classifier_seed(cfg)).stage("perception")?;
    let segmentation = segment_scene(&cloud, &cfg.ransac, &cfg.clustering).stage("perception")?;
    let poses = segmentation.poses(Some(&classifier)).stage("perception")?;
    let target = pick(&poses, scenario.target).stage("perception")?.clone();
    let placement = pick(&poses, scenario.placement).stage("perception")?.clone();
    stages.push(StageRecord::Perception(PerceptionStage {
        segmentation: segmentation.report(cloud.len(), Some(&classifier)).stage("perception")?,
        target: target.clone(),
        placement: placement.clone(),
    }));

    // via-points: configured waypoint plus the object addend
    let mut waypoints = Vec::new();
    for (name, w) in [
        ("preshape", scenario.preshape),
        ("grasp", scenario.grasp),
        ("manipulation_start", scenario.manipulation_start),
        ("manipulation_end", scenario.manipulation_end),
    ] {
        let (learned, roundtrip_error) = learned_coordinates(&basis, &hand, w).stage("via_points")?;
        waypoints.push(WaypointRecord {
            name: name.into(),
            configured: w,
            learned,
            roundtrip_error,
        });
    }
    let mapping = SynergyMappingParams::identity(basis.joint_dim());
    let pose_map = mapping.pose_map(&basis).stage("via_points")?;
    let nominal = |label: &str| scenario.object(label).map(|o| o.position).unwrap_or_default();
    let (_, manip_end) = scenario.manipulation_window();
    let mut vias = Vec::new();
    let mut via_records = Vec::new();
    for (name, t, base, pose) in [
        ("grasp", scenario.grasp_time(), &waypoints[1].learned, &target),
        ("manipulation_end", manip_end, &waypoints[3].learned, &placement),
    ] {
        let object_term = &pose_map * pose_offset(pose, nominal(&pose.label));
        let value = DVector::from_column_slice(base) + &object_term;
        vias.push(ViaPoint::isotropic(t, SynergyPoint::new(value.clone()), cfg.kmp.via_variance).stage("via_points")?);
        via_records.push(ViaPointRecord {
            name: name.into(),
            t,
            value: value.iter().copied().collect(),
            variance: cfg.kmp.via_variance,
            object_term: object_term.iter().copied().collect(),
        });
    }
    stages.push(StageRecord::ViaPoints(ViaPointStage {
        waypoints: waypoints.clone(),
        via_points: via_records.clone(),
    }));

    // KMP adaptation
    let adapted = insert_via_points(&reference, &vias, default_via_radius(&reference)).stage("kmp")?;
    let settings = KmpSettings::new(cfg.kmp.kernel, cfg.kmp.lambda).with_regularizer(cfg.kmp.mean_regularizer);
    let model = kmp_fit(&adapted, &settings).stage("kmp")?;
    let grid = uniform_grid(cfg.kmp.grid);
    let prediction = model.predict_trajectory(&grid).stage("kmp")?;
    let via_errors: Vec<f64> = vias
        .iter()
        .map(|v| point_distance(model.predict_mean(v.t_star).as_slice(), v.desired_e.as_slice()))
        .collect();
    stages.push(StageRecord::Kmp(KmpStage {
        kernel: cfg.kmp.kernel,
        lambda: cfg.kmp.lambda,
        mean_regularizer: cfg.kmp.mean_regularizer,
        trajectory: grid
            .iter()
            .zip(prediction.means())
            .map(|(&t, e)| SynergySample {
                t,
                e: e.iter().copied().collect(),
            })
            .collect(),
        via_errors: via_errors.clone(),
    }));

    // joint reconstruction
    let joints = grid
        .iter()
        .zip(prediction.means())
        .map(|(&t, e)| {
            Ok(JointSample {
                t,
                q: basis.reconstruct(e)?.iter().copied().collect(),
            })
        })
        .collect::<Result<Vec<_>>>()
        .stage("reconstruction")?;
    stages.push(StageRecord::Reconstruction(ReconstructionStage { joints }));

    // force loop
    let targets = ForceTargets::resolve(&scenario, &cfg.force).stage("force")?;
    let grasp = grasp_model(&scenario, &hand, &cfg.force).stage("force")?;
    let run = simulate_grip(&grasp, &support_wrench(scenario.mass), &basis, &targets, &cfg.force).stage("force")?;
    let grasp_e = model.predict_mean(scenario.grasp_time());
    let corrected = SynergyPoint::new(&*grasp_e + DVector::from_column_slice(&run.correction));
    let grasp_posture = basis.reconstruct(&corrected).stage("force")?.iter().copied().collect();
    let force_profile = kernsyn_core::force::ForceProfile::new(
        run.records.iter().map(|r| r.t).collect(),
        run.records.iter().map(|r| r.measured).collect(),
        cfg.force.ramp_rate,
    )
    .stage("force")?;
    stages.push(StageRecord::Force(ForceStage {
        run: run.clone(),
        grasp_posture,
    }));

    // metrics
    let (truth_r, truth_rmse) = match &input.truth {
        Some(truth) => {
            let truth_points = truth
                .postures
                .iter()
                .map(|q| basis.project(&JointConfiguration::from(q.clone())))
                .collect::<kernsyn_core::Result<Vec<_>>>()
                .stage("metrics")?;
            let truth_ref = ReferenceTrajectory::new(
                truth.times.clone(),
                truth_points,
                vec![nalgebra::DMatrix::identity(basis.synergy_dim(), basis.synergy_dim()); truth.times.len()],
            )
            .stage("metrics")?;
            let expected: Vec<SynergyPoint> = grid.iter().map(|&t| truth_ref.mean_at(t)).collect();
            let s = component_scores(&expected, prediction.means()).stage("metrics")?;
            (Some(s.r), Some(s.rmse))
        }
        None => (None, None),
    };
    let (m0, m1) = scenario.manipulation_window();
    let manipulation: Vec<Vec<f64>> = grid
        .iter()
        .zip(prediction.means())
        .filter(|(&t, _)| t >= m0 && t <= m1)
        .map(|(_, e)| e.iter().copied().collect())
        .collect();
    stages.push(StageRecord::Metrics(MetricsStage {
        truth_r,
        truth_rmse,
        max_via_error: via_errors.iter().copied().fold(0.0, f64::max),
        manipulation_monotone: monotone_progress(&manipulation, &waypoints[2].learned, &via_records[1].value),
        final_grip: run.final_grip,
        grip_within_band: run.within_band(),
        all_contacts_stable: run.all_stable,
        settled: run.settled,
    }));

    Ok(TaskRun {
        log: TaskLog {
            task: cfg.task,
            seed: cfg.seed,
            stages,
        },
        basis,
        gmm,
        reference,
        prediction,
        force_profile,
    })
}
