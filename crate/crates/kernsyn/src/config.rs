//! JSON run configuration. Every field has a default, so `{}` is a valid
//! config; `kernsyn --print-config` emits the full template.

use std::path::{Path, PathBuf};

use kernsyn_core::kernel::{KernelKind, KernelSpec};
use kernsyn_core::kmp::MeanRegularizer;
use kernsyn_core::perception::{RansacSettings, SvmSettings};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Task;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub task: Task,
    /// Seed of the synthetic demonstrations, scene and SVM training set.
    pub seed: u64,
    pub paths: PathsConfig,
    pub demos: DemoConfig,
    pub synergy: SynergyConfig,
    pub gmm: GmmConfig,
    pub kmp: KmpConfig,
    pub scene: SceneConfig,
    pub ransac: RansacSettings,
    pub clustering: ClusteringConfig,
    pub svm: SvmConfig,
    pub force: ForceConfig,
    pub benchmark: BenchmarkConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            task: Task::Egg,
            seed: 7,
            paths: PathsConfig::default(),
            demos: DemoConfig::default(),
            synergy: SynergyConfig::default(),
            gmm: GmmConfig::default(),
            kmp: KmpConfig::default(),
            scene: SceneConfig::default(),
            ransac: RansacSettings::default(),
            clustering: ClusteringConfig::default(),
            svm: SvmConfig::default(),
            force: ForceConfig::default(),
            benchmark: BenchmarkConfig::default(),
        }
    }
}

/// Optional inputs; missing ones are generated from the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Demonstration CSV.
    pub demos: Option<PathBuf>,
    /// ASCII point cloud.
    pub scene: Option<PathBuf>,
    /// Directory holding `basis.json` and `gmm.json` to reuse.
    pub models: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            demos: None,
            scene: None,
            models: None,
            output: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub count: usize,
    pub samples: usize,
    /// Joint noise σ in radians; also scales waypoint and timing jitter.
    pub noise: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            count: 8,
            samples: 101,
            noise: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynergyConfig {
    pub variance_threshold: f64,
}

impl Default for SynergyConfig {
    fn default() -> Self {
        Self {
            variance_threshold: kernsyn_core::synergy::DEFAULT_VARIANCE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GmmConfig {
    pub components: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
    /// Points of the normalized-time grid demos are resampled on.
    pub grid: usize,
}

impl Default for GmmConfig {
    fn default() -> Self {
        Self {
            components: 8,
            seed: 0,
            max_iter: 200,
            tol: 1e-6,
            grid: 51,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KmpConfig {
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub mean_regularizer: MeanRegularizer,
    /// Points of the prediction grid.
    pub grid: usize,
    /// Isotropic variance of perception via-points.
    pub via_variance: f64,
}

impl Default for KmpConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::default_for(KernelKind::Cauchy),
            lambda: kernsyn_core::kmp::DEFAULT_LAMBDA,
            mean_regularizer: MeanRegularizer::ReferenceCovariance,
            grid: 101,
            via_variance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    /// Sensor noise σ of generated scenes, meters.
    pub noise: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            noise: crate::generate::DEFAULT_SCENE_NOISE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusteringConfig {
    pub epsilon: f64,
    pub min_points: usize,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.01,
            min_points: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    pub c: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Generated training instances per object class.
    pub instances_per_class: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        let s = SvmSettings::default();
        Self {
            c: s.c,
            epochs: s.epochs,
            seed: s.seed,
            instances_per_class: 12,
        }
    }
}

impl SvmConfig {
    pub fn settings(&self) -> SvmSettings {
        SvmSettings {
            c: self.c,
            epochs: self.epochs,
            seed: self.seed,
        }
    }
}

/// Force loop. `mu`, `band` and `hold` default to the task's values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForceConfig {
    pub mu: Option<f64>,
    /// Allowed grip force range [start, max], newtons; the ramp starts at the lower bound.
    pub band: Option<[f64; 2]>,
    /// Grip force held after the ramp.
    pub hold: Option<f64>,
    pub gain: f64,
    /// N/s
    pub ramp_rate: f64,
    /// Control period, seconds.
    pub dt: f64,
    /// Time constant of the simulated grip force response, seconds.
    pub lag: f64,
    /// Settled once |target − measured| stays below this for `settle_steps`.
    pub settle_tol: f64,
    pub settle_steps: usize,
    pub max_duration: f64,
    /// Synergy stiffness along the grip and secondary directions, N/rad.
    pub grip_stiffness: f64,
    pub shear_stiffness: f64,
}

impl Default for ForceConfig {
    fn default() -> Self {
        Self {
            mu: None,
            band: None,
            hold: None,
            gain: kernsyn_core::force::DEFAULT_FORCE_GAIN,
            ramp_rate: 1.0,
            dt: 0.01,
            lag: 0.03,
            settle_tol: 0.01,
            settle_steps: 20,
            max_duration: 5.0,
            grip_stiffness: 20.0,
            shear_stiffness: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub seed: u64,
    pub lambda: f64,
    pub mean_regularizer: MeanRegularizer,
    pub kernels: Vec<KernelSpec>,
    pub demos_per_object: usize,
    pub noise: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            lambda: kernsyn_core::kmp::DEFAULT_LAMBDA,
            mean_regularizer: MeanRegularizer::Identity,
            kernels: KernelKind::ALL.map(KernelSpec::default_for).to_vec(),
            demos_per_object: 6,
            noise: 0.01,
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!("{name} must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::ConfigInvalid(format!("{name} must be non-negative and finite, got {v}")))
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::ConfigInvalid(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.synergy.variance_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::ConfigInvalid(format!("synergy.variance_threshold must lie in (0, 1], got {t}")));
        }
        if self.demos.count < 2 || self.demos.samples < 2 {
            return Err(Error::ConfigInvalid("demos.count and demos.samples must be at least 2".into()));
        }
        non_negative("demos.noise", self.demos.noise)?;
        if self.gmm.components == 0 || self.gmm.max_iter == 0 || self.gmm.grid < 2 {
            return Err(Error::ConfigInvalid("gmm.components, gmm.max_iter must be positive and gmm.grid ≥ 2".into()));
        }
        positive("gmm.tol", self.gmm.tol)?;
        self.kmp.kernel.validate().map_err(|e| Error::ConfigInvalid(format!("kmp.kernel: {e}")))?;
        positive("kmp.lambda", self.kmp.lambda)?;
        positive("kmp.via_variance", self.kmp.via_variance)?;
        if self.kmp.grid < 2 {
            return Err(Error::ConfigInvalid("kmp.grid must be at least 2".into()));
        }
        non_negative("scene.noise", self.scene.noise)?;
        if self.ransac.iterations == 0 {
            return Err(Error::ConfigInvalid("ransac.iterations must be positive".into()));
        }
        positive("ransac.inlier_threshold", self.ransac.inlier_threshold)?;
        positive("clustering.epsilon", self.clustering.epsilon)?;
        if self.clustering.min_points == 0 {
            return Err(Error::ConfigInvalid("clustering.min_points must be positive".into()));
        }
        positive("svm.c", self.svm.c)?;
        if self.svm.epochs == 0 || self.svm.instances_per_class == 0 {
            return Err(Error::ConfigInvalid("svm.epochs and svm.instances_per_class must be positive".into()));
        }
        let f = &self.force;
        if let Some(mu) = f.mu {
            positive("force.mu", mu)?;
        }
        if let Some([lo, hi]) = f.band {
            positive("force.band lower bound", lo)?;
            if !(hi > lo && hi.is_finite()) {
                return Err(Error::ConfigInvalid(format!("force.band must be increasing, got [{lo}, {hi}]")));
            }
        }
        if let Some(h) = f.hold {
            positive("force.hold", h)?;
        }
        if !(f.gain > 0.0 && f.gain <= 1.0) {
            return Err(Error::ConfigInvalid(format!("force.gain must lie in (0, 1], got {}", f.gain)));
        }
        for (name, v) in [
            ("force.ramp_rate", f.ramp_rate),
            ("force.dt", f.dt),
            ("force.lag", f.lag),
            ("force.settle_tol", f.settle_tol),
            ("force.max_duration", f.max_duration),
            ("force.grip_stiffness", f.grip_stiffness),
            ("force.shear_stiffness", f.shear_stiffness),
        ] {
            positive(name, v)?;
        }
        if f.settle_steps == 0 {
            return Err(Error::ConfigInvalid("force.settle_steps must be positive".into()));
        }
        let b = &self.benchmark;
        positive("benchmark.lambda", b.lambda)?;
        non_negative("benchmark.noise", b.noise)?;
        if b.kernels.is_empty() || b.demos_per_object < 2 {
            return Err(Error::ConfigInvalid("benchmark needs kernels and at least 2 demos per object".into()));
        }
        for k in &b.kernels {
            k.validate().map_err(|e| Error::ConfigInvalid(format!("benchmark.kernels: {e}")))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_is_default() {
        let cfg: PipelineConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, PipelineConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn template_roundtrip() {
        let text = serde_json::to_string_pretty(&PipelineConfig::default()).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, PipelineConfig::default());
    }

    #[test]
    fn rejects_unknown_and_out_of_range() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"tsak":"egg"}"#).is_err());
        let mut cfg = PipelineConfig::default();
        cfg.force.gain = 1.5;
        assert!(matches!(cfg.validate(), Err(Error::ConfigInvalid(_))));
        let mut cfg = PipelineConfig::default();
        cfg.synergy.variance_threshold = 0.0;
        assert!(cfg.validate().is_err());
    }
}
