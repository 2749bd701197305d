//! Command line front end. Exit codes: 0 success, 1 usage or configuration
//! error, 2 a processing stage failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand};
use kernsyn_core::gmm::EmSettings;
use kernsyn_core::kernel::{KernelKind, KernelSpec};
use kernsyn_core::kmp::{default_via_radius, insert_via_points, kmp_fit, KmpSettings, ViaPoint};
use kernsyn_core::perception::OneVsRest;
use kernsyn_core::synergy::{fit_synergy_basis, ConfigurationMatrix, SynergyBasis, SynergyPoint};
use kernsyn_core::trajectory::{uniform_grid, ReferenceTrajectory};

use crate::bench::{format_report, run_benchmark, write_outcome};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::generate::{demos_from_waypoints, generate_scene_with_noise};
use crate::perception::{segment_scene, train_classifier};
use crate::pipeline::{classifier_seed, encode_reference, fit_basis, run_task, StageRecord};
use crate::scenario::{HandModel, Task, TaskScenario};
use crate::{io, pipeline};

// stdout writes ignore errors so a closed pipe ends output quietly
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout().lock(), $($arg)*);
    }};
}

macro_rules! say_raw {
    ($($arg:tt)*) => {{
        let _ = write!(std::io::stdout().lock(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "kernsyn", version, about = "Kernelized postural synergies: fit, encode, adapt, perceive and simulate")]
pub struct Cli {
    /// JSON configuration; defaults apply to missing fields.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (default: the configured one).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long, global = true)]
    pub print_config: bool,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the synergy basis to demonstrations or a posture matrix.
    FitSynergies {
        /// Demonstration CSV (demo,t,q1..qJ).
        #[arg(long, value_name = "CSV", conflicts_with = "postures", required_unless_present = "postures")]
        demos: Option<PathBuf>,
        /// Posture matrix CSV, one configuration per row.
        #[arg(long, value_name = "CSV")]
        postures: Option<PathBuf>,
        /// Nominal posture, comma separated (default: posture mean).
        #[arg(long, value_name = "Q1,..,QJ", value_delimiter = ',')]
        theta0: Option<Vec<f64>>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Encode demonstrations into a GMM and its GMR reference trajectory.
    Encode {
        #[arg(long, value_name = "CSV")]
        demos: PathBuf,
        #[arg(long, value_name = "JSON")]
        basis: PathBuf,
        #[arg(long)]
        components: Option<usize>,
        /// Points of the reference grid.
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Fit KMP on a reference, insert via-points and predict on a grid.
    KmpPredict {
        /// Reference trajectory, JSON or CSV (by extension).
        #[arg(long, value_name = "PATH")]
        reference: PathBuf,
        /// Via-point `t:e1,e2,..[:variance]`; repeatable.
        #[arg(long = "via", value_name = "SPEC")]
        vias: Vec<String>,
        #[arg(long, value_parser = ["exponential", "gaussian", "cauchy"])]
        kernel: Option<String>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        grid: Option<usize>,
    },
    /// Remove the table plane and cluster the remaining points.
    Segment {
        #[arg(long, value_name = "XYZ")]
        cloud: PathBuf,
    },
    /// Segment and label clusters with a one-vs-rest SVM.
    Classify {
        #[arg(long, value_name = "XYZ")]
        cloud: PathBuf,
        /// Trained classifier JSON; trained on generated instances when absent.
        #[arg(long, value_name = "JSON")]
        model: Option<PathBuf>,
    },
    /// Compare the kernels on the synthetic three-object benchmark.
    BenchmarkKernels,
    /// Run a full task and write its log and artifacts.
    Simulate {
        #[arg(long, value_parser = ["egg", "ketchup"])]
        task: Option<String>,
    },
    /// Write synthetic inputs.
    Generate {
        #[command(subcommand)]
        what: GenerateCommand,
    },
}

#[derive(Debug, Subcommand)]
pub enum GenerateCommand {
    /// Demonstration CSV plus the generator ground truth.
    Demos {
        #[arg(long, value_parser = ["egg", "ketchup"])]
        task: Option<String>,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Point cloud plus object annotations.
    Scene {
        #[arg(long, value_parser = ["egg", "ketchup"])]
        task: Option<String>,
        #[arg(long)]
        noise: Option<f64>,
    },
}

/// Parses `t:e1,e2,..[:variance]`.
pub fn parse_via(spec: &str, default_variance: f64) -> Result<ViaPoint> {
    let bad = || Error::ConfigInvalid(format!("via-point `{spec}` is not of the form t:e1,e2[:variance]"));
    let parts: Vec<&str> = spec.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return Err(bad());
    }
    let t: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let e = parts[1]
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    let var = match parts.get(2) {
        Some(v) => v.trim().parse().map_err(|_| bad())?,
        None => default_variance,
    };
    Ok(ViaPoint::isotropic(t, SynergyPoint::from_slice(&e), var).map_err(|e| Error::ConfigInvalid(e.to_string()))?)
}

fn task_of(arg: &Option<String>, cfg: &PipelineConfig) -> Result<Task> {
    arg.as_deref().map_or(Ok(cfg.task), str::parse)
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.paths.output = out.clone();
    }
    if let Some(Command::Simulate { task }) = &cli.command {
        cfg.task = task_of(task, &cfg)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_reference(path: &Path) -> Result<ReferenceTrajectory> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        io::read_reference_csv(path)
    } else {
        io::read_json(path)
    }
}

fn report_files(files: &[PathBuf]) {
    for f in files {
        say!("wrote {}", f.display());
    }
}

fn execute(command: &Command, cfg: &PipelineConfig) -> Result<()> {
    let out = &cfg.paths.output;
    match command {
        Command::FitSynergies {
            demos,
            postures,
            theta0,
            threshold,
        } => {
            let threshold = threshold.unwrap_or(cfg.synergy.variance_threshold);
            let basis: SynergyBasis = match (demos, postures) {
                (Some(path), _) => fit_basis(&io::read_demos(path)?, theta0.as_deref(), threshold)?,
                (None, Some(path)) => {
                    let rows = io::read_config_matrix(path)?;
                    let configs = ConfigurationMatrix::from_postures(&rows, theta0.as_deref())?;
                    fit_synergy_basis(&configs, threshold)?
                }
                (None, None) => unreachable!("clap requires one input"),
            };
            let path = out.join("basis.json");
            io::write_json(&path, &basis)?;
            say!("{} synergies, variance fractions {:?}", basis.synergy_dim(), basis.variance_fractions());
            report_files(&[path]);
        }
        Command::Encode {
            demos,
            basis,
            components,
            grid,
        } => {
            let basis: SynergyBasis = io::read_json(basis)?;
            let settings = EmSettings {
                components: components.unwrap_or(cfg.gmm.components),
                seed: cfg.gmm.seed,
                max_iter: cfg.gmm.max_iter,
                tol: cfg.gmm.tol,
            };
            let (fit, reference) = encode_reference(&io::read_demos(demos)?, &basis, &settings, grid.unwrap_or(cfg.gmm.grid))?;
            let files = [out.join("gmm.json"), out.join("reference.json"), out.join("reference.csv")];
            io::write_json(&files[0], &fit.model)?;
            io::write_json(&files[1], &reference)?;
            io::write_reference_csv(&files[2], &reference)?;
            say!(
                "{} components, {} EM iterations, converged {}",
                fit.model.components().len(),
                fit.iterations,
                fit.converged
            );
            report_files(&files);
        }
        Command::KmpPredict {
            reference,
            vias,
            kernel,
            lambda,
            grid,
        } => {
            let reference = read_reference(reference)?;
            let vias = vias.iter().map(|v| parse_via(v, cfg.kmp.via_variance)).collect::<Result<Vec<_>>>()?;
            let adapted = insert_via_points(&reference, &vias, default_via_radius(&reference))?;
            let spec = match kernel.as_deref() {
                Some("exponential") => KernelSpec::default_for(KernelKind::Exponential),
                Some("gaussian") => KernelSpec::default_for(KernelKind::Gaussian),
                Some(_) => KernelSpec::default_for(KernelKind::Cauchy),
                None => cfg.kmp.kernel,
            };
            let settings = KmpSettings::new(spec, lambda.unwrap_or(cfg.kmp.lambda)).with_regularizer(cfg.kmp.mean_regularizer);
            let model = kmp_fit(&adapted, &settings)?;
            let prediction = model.predict_trajectory(&uniform_grid(grid.unwrap_or(cfg.kmp.grid)))?;
            let files = [out.join("prediction.csv"), out.join("prediction.json")];
            io::write_prediction_csv(&files[0], &prediction)?;
            io::write_json(&files[1], &prediction)?;
            report_files(&files);
        }
        Command::Segment { cloud } => {
            let cloud = io::read_cloud(cloud)?;
            let seg = segment_scene(&cloud, &cfg.ransac, &cfg.clustering)?;
            let path = out.join("segmentation.json");
            io::write_json(&path, &seg.report(cloud.len(), None)?)?;
            say!("{} table inliers, {} clusters", seg.inliers.len(), seg.clusters.len());
            report_files(&[path]);
        }
        Command::Classify { cloud, model } => {
            let cloud = io::read_cloud(cloud)?;
            let mut files = Vec::new();
            let classifier: OneVsRest = match model {
                Some(path) => io::read_json(path)?,
                None => {
                    let c = train_classifier(&cfg.svm, cfg.scene.noise, classifier_seed(cfg))?;
                    let path = out.join("svm.json");
                    io::write_json(&path, &c)?;
                    files.push(path);
                    c
                }
            };
            let seg = segment_scene(&cloud, &cfg.ransac, &cfg.clustering)?;
            let report = seg.report(cloud.len(), Some(&classifier))?;
            let path = out.join("classification.json");
            io::write_json(&path, &report)?;
            files.push(path);
            for c in &report.clusters {
                say!(
                    "{:<8} score {:>8.3}  centroid [{:.4}, {:.4}, {:.4}]  {} points",
                    c.label.as_deref().unwrap_or(""),
                    c.score.unwrap_or(0.0),
                    c.centroid[0],
                    c.centroid[1],
                    c.centroid[2],
                    c.size
                );
            }
            report_files(&files);
        }
        Command::BenchmarkKernels => {
            let (data, outcome) = run_benchmark(&cfg.benchmark)?;
            say_raw!("{}", format_report(&outcome.report));
            report_files(&write_outcome(out, &data, &outcome)?);
        }
        Command::Simulate { .. } => {
            let run = run_task(cfg)?;
            if let Some(StageRecord::Metrics(m)) = run.log.stages.last() {
                say!(
                    "task {}: final grip {:.3} N (in band: {}), contacts stable: {}, settled: {}, max via error {:.2e}",
                    cfg.task, m.final_grip, m.grip_within_band, m.all_contacts_stable, m.settled, m.max_via_error
                );
            }
            report_files(&run.write(out)?);
        }
        Command::Generate { what } => match what {
            GenerateCommand::Demos { task, count, noise } => {
                let task = task_of(task, cfg)?;
                let set = demos_from_waypoints(
                    &HandModel::standard(),
                    &TaskScenario::for_task(task).waypoints(),
                    count.unwrap_or(cfg.demos.count),
                    cfg.demos.samples,
                    noise.unwrap_or(cfg.demos.noise),
                    cfg.seed,
                )?;
                let files = [out.join("demos.csv"), out.join("demos_truth.json")];
                io::write_demos(&files[0], &set.demos)?;
                io::write_json(&files[1], &set.truth)?;
                report_files(&files);
            }
            GenerateCommand::Scene { task, noise } => {
                let task = task_of(task, cfg)?;
                let scene = generate_scene_with_noise(task, pipeline::scene_seed(cfg), noise.unwrap_or(cfg.scene.noise))?;
                let files = [out.join("scene.xyz"), out.join("scene_annotations.json")];
                io::write_cloud(&files[0], &scene.cloud)?;
                io::write_json(&files[1], &scene.annotations)?;
                report_files(&files);
            }
        },
    }
    Ok(())
}

fn is_usage(e: &Error) -> bool {
    matches!(e, Error::ConfigInvalid(_) | Error::UnknownTask(_))
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let cfg = match load_config(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if cli.print_config {
        match io::to_json(&cfg) {
            Ok(text) => {
                say_raw!("{text}");
                return EXIT_OK;
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_FAILURE;
            }
        }
    }
    let Some(command) = &cli.command else {
        eprintln!("{}", Cli::command().render_usage());
        eprintln!("error: a subcommand is required (try --help)");
        return EXIT_USAGE;
    };
    match execute(command, &cfg) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if is_usage(&e) {
                EXIT_USAGE
            } else {
                EXIT_FAILURE
            }
        }
    }
}
