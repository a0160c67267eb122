//! The `blindcorner` command-line interface.
//!
//! Settings resolve in three layers: built-in defaults, then an optional JSON
//! file given by `--config`, then individual flags. The resolved settings are
//! hashed and written into every artifact. Exit codes are 2 for bad
//! arguments, 3 for I/O failures and 4 for violated invariants.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beamform::argmax_doa;
use crate::classifier::{load_model, save_model, train, DEFAULT_ALPHA_TH, DEFAULT_LAMBDA};
use crate::dataset::{
    clip_window, extract_samples, extract_windows, RecordingManifest, SampleWindow,
};
use crate::error::{Error, Result};
use crate::eval::{
    baseline_eval, cross_validate, generalization_eval, mic_subset_study, sliding_predictions,
    subset_study_csv, time_series_csv, EvalOptions, MetricsReport, WindowPoint,
    DEFAULT_SLIDING_HOP,
};
use crate::features::{
    augment_training_set, doa_response, extract_feature, features_to_csv, read_features_csv, Class,
    Environment, LabeledSample, PipelineConfig,
};
use crate::seed::{derive_seed, sha256_hex};
use crate::signal::{load_wav, ArrayGeometry};
use crate::synth::{make_benchmark, render, BenchmarkConfig, Scenario};

pub const EXIT_BAD_ARGS: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Parser)]
#[command(
    name = "blindcorner",
    version,
    about = "Detect vehicles approaching behind blind corners from microphone-array recordings"
)]
pub struct Cli {
    #[command(flatten)]
    pub options: Options,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    #[default]
    Svm,
    Doa,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Options {
    /// JSON file with any of the settings below; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Regularization weight of the linear SVM.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Window length δt in seconds.
    #[arg(long, global = true)]
    pub window: Option<f64>,
    /// Number of temporal segments L.
    #[arg(long, global = true)]
    pub segments: Option<usize>,
    /// Number of azimuth bins B.
    #[arg(long, global = true)]
    pub bins: Option<usize>,
    #[arg(long, global = true)]
    pub fmin: Option<f64>,
    #[arg(long, global = true)]
    pub fmax: Option<f64>,
    /// STFT frame length in samples.
    #[arg(long, global = true)]
    pub frame: Option<usize>,
    /// STFT hop in samples.
    #[arg(long, global = true)]
    pub hop: Option<usize>,
    /// Mirror augmentation of training data.
    #[arg(long, global = true, action = ArgAction::Set)]
    pub augment: Option<bool>,
    #[arg(long, global = true)]
    pub folds: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub baseline: Option<Baseline>,
    /// Threshold of the direction-only baseline in degrees.
    #[arg(long = "alpha-th", global = true)]
    pub alpha_th: Option<f64>,
}

/// Contents accepted in a `--config` file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub lambda: Option<f64>,
    pub window: Option<f64>,
    pub segments: Option<usize>,
    pub bins: Option<usize>,
    pub fmin: Option<f64>,
    pub fmax: Option<f64>,
    pub frame: Option<usize>,
    pub hop: Option<usize>,
    pub augment: Option<bool>,
    pub folds: Option<usize>,
    pub baseline: Option<Baseline>,
    pub alpha_th: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// SRP-PHAT response of the trailing window as `azimuth_deg,energy` rows.
    Doa {
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        geometry: PathBuf,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Feature CSV for every sample annotated in a manifest.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Trains the classifier on a feature CSV.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sliding-window predictions over one recording.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        geometry: PathBuf,
        /// Recording situation; fills the accepted-label column.
        #[arg(long)]
        label: Option<Class>,
        /// First line-of-sight time in seconds, needed for left and right.
        #[arg(long)]
        t0: Option<f64>,
        /// Step between window ends in seconds.
        #[arg(long = "step", default_value_t = DEFAULT_SLIDING_HOP)]
        step: f64,
        /// Classify only the window ending at this time in seconds.
        #[arg(long)]
        at: Option<f64>,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validation, train/test evaluation or the direction-only baseline.
    Eval {
        /// Feature CSV (classifier only).
        #[arg(long)]
        features: Option<PathBuf>,
        /// Recording manifest; features are extracted on the fly.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Held-out feature CSV; switches from cross-validation to one
        /// train/test pass.
        #[arg(long)]
        test_features: Option<PathBuf>,
        /// Held-out manifest, as `--test-features`.
        #[arg(long)]
        test_manifest: Option<PathBuf>,
        #[arg(long)]
        out_json: Option<PathBuf>,
        #[arg(long)]
        out_csv: Option<PathBuf>,
    },
    /// Renders a synthetic T-junction benchmark or a single scenario file.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        #[arg(long, default_value = "A")]
        env: Environment,
        #[arg(long, default_value_t = 56)]
        mics: usize,
        /// Render this scenario JSON instead of a benchmark.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
    /// Cross-validated accuracy of random microphone subsets.
    Micstudy {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated subset sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Doa { .. } => "doa",
            Command::Extract { .. } => "extract",
            Command::Train { .. } => "train",
            Command::Predict { .. } => "predict",
            Command::Eval { .. } => "eval",
            Command::Simulate { .. } => "simulate",
            Command::Micstudy { .. } => "micstudy",
        }
    }
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub pipeline: PipelineConfig,
    pub lambda: f64,
    pub seed: u64,
    pub augment: bool,
    pub folds: usize,
    pub baseline: Baseline,
    pub alpha_th: f64,
    /// Input paths and subcommand parameters. Output paths are left out so
    /// that identical inputs hash identically wherever results are written.
    pub params: BTreeMap<String, serde_json::Value>,
}

impl RunConfig {
    pub fn resolve(options: &Options, command: &str) -> Result<Self> {
        let file = match &options.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Unreadable {
                    path: path.clone(),
                    source,
                })?;
                serde_json::from_str::<ConfigFile>(&text).map_err(|e| Error::Corrupt {
                    path: path.clone(),
                    reason: e.to_string(),
                })?
            }
            None => ConfigFile::default(),
        };
        let defaults = PipelineConfig::default();
        let pipeline = PipelineConfig {
            sample_len: options
                .window
                .or(file.window)
                .unwrap_or(defaults.sample_len),
            segments: options
                .segments
                .or(file.segments)
                .unwrap_or(defaults.segments),
            bins: options.bins.or(file.bins).unwrap_or(defaults.bins),
            f_min: options.fmin.or(file.fmin).unwrap_or(defaults.f_min),
            f_max: options.fmax.or(file.fmax).unwrap_or(defaults.f_max),
            frame_len: options.frame.or(file.frame).unwrap_or(defaults.frame_len),
            hop: options.hop.or(file.hop).unwrap_or(defaults.hop),
        };
        let run = RunConfig {
            command: command.to_string(),
            pipeline,
            lambda: options.lambda.or(file.lambda).unwrap_or(DEFAULT_LAMBDA),
            seed: options.seed.or(file.seed).unwrap_or(0),
            augment: options.augment.or(file.augment).unwrap_or(true),
            folds: options.folds.or(file.folds).unwrap_or(DEFAULT_FOLDS),
            baseline: options.baseline.or(file.baseline).unwrap_or_default(),
            alpha_th: options
                .alpha_th
                .or(file.alpha_th)
                .unwrap_or(DEFAULT_ALPHA_TH),
            params: BTreeMap::new(),
        };
        run.validate()?;
        Ok(run)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::config("--lambda must be positive"));
        }
        if self.folds < 2 {
            return Err(Error::config("--folds must be at least 2"));
        }
        if !(0.0..=90.0).contains(&self.alpha_th) {
            return Err(Error::config("--alpha-th must lie in [0, 90] degrees"));
        }
        let p = &self.pipeline;
        if !(p.sample_len.is_finite() && p.sample_len > 0.0) {
            return Err(Error::config("--window must be positive"));
        }
        if p.segments == 0 || p.bins < 2 {
            return Err(Error::config("--segments must be >= 1 and --bins >= 2"));
        }
        if !(p.f_min >= 0.0 && p.f_min < p.f_max) {
            return Err(Error::config("--fmin must be below --fmax"));
        }
        if p.frame_len == 0 || !p.frame_len.is_multiple_of(2) || p.hop == 0 {
            return Err(Error::config("--frame must be even and --hop positive"));
        }
        Ok(())
    }

    fn param(&mut self, key: &str, value: impl Serialize) {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.params.insert(key.to_string(), value);
    }

    fn path_param(&mut self, key: &str, path: &Path) {
        self.param(key, path.to_string_lossy());
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("run config serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.to_json_value().to_string().as_bytes())
    }

    /// Comment lines heading every CSV artifact.
    pub fn preamble(&self) -> Vec<String> {
        vec![
            format!("config_hash={}", self.hash()),
            format!("config={}", self.to_json_value()),
        ]
    }

    fn envelope(&self, payload: impl Serialize) -> Result<String> {
        let doc = serde_json::json!({
            "config_hash": self.hash(),
            "config": self.to_json_value(),
            "result": serde_json::to_value(payload)?,
        });
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }
}

/// Exit code for an error.
pub fn exit_code(error: &Error) -> i32 {
    if error.is_io() {
        EXIT_IO
    } else if matches!(error, Error::InvalidConfig(_)) {
        EXIT_BAD_ARGS
    } else {
        EXIT_INVARIANT
    }
}

/// Files produced by a command; removed again if the command fails.
#[derive(Default)]
struct Outputs {
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, path: &Path, contents: &str) -> Result<()> {
        self.files.push(path.to_path_buf());
        std::fs::write(path, contents).map_err(|source| Error::Unwritable {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Creates `dir` and tracks it for removal if it did not exist before.
    fn create_dir(&mut self, dir: &Path) -> Result<()> {
        if !dir.exists() {
            self.dirs.push(dir.to_path_buf());
        }
        std::fs::create_dir_all(dir).map_err(|source| Error::Unwritable {
            path: dir.to_path_buf(),
            source,
        })
    }

    fn rollback(&self) {
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        for d in &self.dirs {
            let _ = std::fs::remove_dir_all(d);
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_BAD_ARGS } else { 0 };
        }
    };
    let mut outputs = Outputs::default();
    match execute(&cli, &mut outputs) {
        Ok(()) => 0,
        Err(e) => {
            outputs.rollback();
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli, outputs: &mut Outputs) -> Result<()> {
    let mut run = RunConfig::resolve(&cli.options, cli.command.name())?;
    match &cli.command {
        Command::Doa { wav, geometry, out } => {
            run.path_param("wav", wav);
            run.path_param("geometry", geometry);
            let clip = load_wav(wav)?;
            let geometry = ArrayGeometry::load(geometry)?;
            let response = doa_response(&clip, &geometry, &run.pipeline)?;
            let text = with_preamble(&run, &response.to_csv());
            emit(outputs, out.as_deref(), &text)
        }
        Command::Extract { manifest, out } => {
            run.path_param("manifest", manifest);
            let samples = extract_manifest(&RecordingManifest::load(manifest)?, &run.pipeline)?;
            outputs.write(out, &features_to_csv(&samples, &run.preamble())?)?;
            println!("{} samples written to {}", samples.len(), out.display());
            Ok(())
        }
        Command::Train { features, out } => {
            run.path_param("features", features);
            let samples = read_features_csv(features, run.pipeline.segments)?;
            check_dim(&samples, &run.pipeline)?;
            let training = if run.augment {
                augment_training_set(&samples)
            } else {
                samples
            };
            let model = train(&training, run.lambda, derive_seed(run.seed, "train"))?
                .with_config(run.pipeline.clone())
                .with_provenance(run.hash(), run.to_json_value());
            outputs.files.push(out.clone());
            save_model(&model, out)?;
            println!(
                "model trained on {} samples written to {}",
                training.len(),
                out.display()
            );
            Ok(())
        }
        Command::Predict {
            model,
            wav,
            geometry,
            label,
            t0,
            step,
            at,
            out,
        } => {
            run.path_param("model", model);
            run.path_param("wav", wav);
            run.path_param("geometry", geometry);
            run.param("label", label);
            run.param("t0", t0);
            run.param("step", step);
            run.param("at", at);
            let model = load_model(model)?;
            if let Some(config) = &model.config {
                run.pipeline = config.clone();
            }
            let clip = load_wav(wav)?;
            let geometry = ArrayGeometry::load(geometry)?;
            let predictions = match at {
                Some(t_e) => {
                    let window = clip_window(&clip, *t_e, run.pipeline.sample_len)?;
                    vec![(
                        *t_e,
                        model.predict(&extract_feature(&window, &geometry, &run.pipeline)?)?,
                    )]
                }
                None => sliding_predictions(&clip, &model, &geometry, &run.pipeline, *step)?,
            };
            let points = predictions
                .into_iter()
                .map(|(t_e, prediction)| {
                    let accepted = match label {
                        Some(l) => crate::eval::accepted_labels(*l, *t0, t_e)?,
                        None => Vec::new(),
                    };
                    Ok(WindowPoint {
                        t_e,
                        prediction,
                        accepted,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            emit(
                outputs,
                out.as_deref(),
                &time_series_csv(&points, &run.preamble())?,
            )
        }
        Command::Eval {
            features,
            manifest,
            test_features,
            test_manifest,
            out_json,
            out_csv,
        } => {
            let report = match run.baseline {
                Baseline::Svm => {
                    let train_set =
                        load_samples(&mut run, "features", features, "manifest", manifest)?
                            .ok_or_else(|| Error::config("eval needs --features or --manifest"))?;
                    let test_set = load_samples(
                        &mut run,
                        "test_features",
                        test_features,
                        "test_manifest",
                        test_manifest,
                    )?;
                    match test_set {
                        Some(test) => generalization_eval(
                            &train_set,
                            &test,
                            run.lambda,
                            run.seed,
                            run.augment,
                        )?,
                        None => cross_validate(
                            &train_set,
                            run.folds,
                            run.lambda,
                            run.seed,
                            run.augment,
                        )?,
                    }
                }
                Baseline::Doa => {
                    let manifest = manifest
                        .as_ref()
                        .ok_or_else(|| Error::config("the doa baseline needs --manifest"))?;
                    run.path_param("manifest", manifest);
                    let pairs = baseline_pairs(&RecordingManifest::load(manifest)?, &run.pipeline)?;
                    baseline_eval(&pairs, run.alpha_th)?
                }
            };
            write_report(
                &run,
                &report,
                outputs,
                out_json.as_deref(),
                out_csv.as_deref(),
            )
        }
        Command::Simulate {
            out,
            per_class,
            env,
            mics,
            scenario,
        } => {
            run.param("per_class", per_class);
            run.param("env", env);
            run.param("mics", mics);
            if let Some(s) = scenario {
                run.path_param("scenario", s);
            }
            outputs.create_dir(out)?;
            let manifest = match scenario {
                Some(path) => simulate_scenario(&Scenario::load(path)?, path, out, &run)?,
                None => {
                    if *per_class == 0 {
                        return Err(Error::config("--per-class must be at least 1"));
                    }
                    let config = BenchmarkConfig {
                        environment: *env,
                        per_class: *per_class,
                        microphones: *mics,
                        seed: run.seed,
                        ..BenchmarkConfig::default()
                    };
                    run.param("benchmark", &config);
                    make_benchmark(&config, out, &run.preamble())?
                }
            };
            outputs.write(
                &out.join("run_config.json"),
                &run.envelope(serde_json::Value::Null)?,
            )?;
            println!(
                "{} recordings written to {}",
                manifest.entries.len(),
                out.display()
            );
            Ok(())
        }
        Command::Micstudy {
            manifest,
            sizes,
            trials,
            out,
        } => {
            run.path_param("manifest", manifest);
            run.param("sizes", sizes);
            run.param("trials", trials);
            let (geometry, windows) =
                manifest_windows(&RecordingManifest::load(manifest)?, &run.pipeline)?;
            let options = EvalOptions::new(run.folds, run.lambda, run.seed, run.augment);
            let rows =
                mic_subset_study(&windows, &geometry, &run.pipeline, sizes, *trials, &options)?;
            emit(
                outputs,
                out.as_deref(),
                &subset_study_csv(&rows, &run.preamble())?,
            )
        }
    }
}

fn with_preamble(run: &RunConfig, body: &str) -> String {
    let mut text: String = run.preamble().iter().map(|l| format!("# {l}\n")).collect();
    text.push_str(body);
    text
}

/// Writes to `out`, or to stdout when no path is given.
fn emit(outputs: &mut Outputs, out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => outputs.write(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn check_dim(samples: &[LabeledSample], config: &PipelineConfig) -> Result<()> {
    match samples
        .iter()
        .find(|s| s.feature.dim() != config.feature_dim())
    {
        Some(s) => Err(Error::DimensionMismatch {
            expected: config.feature_dim(),
            found: s.feature.dim(),
        }),
        None => Ok(()),
    }
}

fn extract_manifest(
    manifest: &RecordingManifest,
    config: &PipelineConfig,
) -> Result<Vec<LabeledSample>> {
    let per_entry = manifest
        .entries
        .par_iter()
        .map(|e| extract_samples(e, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_entry.into_iter().flatten().collect())
}

/// Samples from a feature CSV or, failing that, from a manifest.
fn load_samples(
    run: &mut RunConfig,
    features_key: &str,
    features: &Option<PathBuf>,
    manifest_key: &str,
    manifest: &Option<PathBuf>,
) -> Result<Option<Vec<LabeledSample>>> {
    let samples = match (features, manifest) {
        (Some(_), Some(_)) => {
            return Err(Error::config(format!(
                "give either --{} or --{}",
                features_key.replace('_', "-"),
                manifest_key.replace('_', "-")
            )))
        }
        (Some(path), None) => {
            run.path_param(features_key, path);
            read_features_csv(path, run.pipeline.segments)?
        }
        (None, Some(path)) => {
            run.path_param(manifest_key, path);
            extract_manifest(&RecordingManifest::load(path)?, &run.pipeline)?
        }
        (None, None) => return Ok(None),
    };
    check_dim(&samples, &run.pipeline)?;
    Ok(Some(samples))
}

/// `(label, α_max)` of every annotated sample.
fn baseline_pairs(
    manifest: &RecordingManifest,
    config: &PipelineConfig,
) -> Result<Vec<(Class, f64)>> {
    let per_entry = manifest
        .entries
        .par_iter()
        .map(|entry| {
            let clip = load_wav(&entry.wav)?;
            let geometry = ArrayGeometry::load(&entry.geometry)?;
            extract_windows(entry, &clip, config)?
                .into_iter()
                .map(|w| {
                    Ok((
                        w.label,
                        argmax_doa(&doa_response(&w.audio, &geometry, config)?),
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_entry.into_iter().flatten().collect())
}

/// Sample windows of a manifest whose recordings share one geometry.
fn manifest_windows(
    manifest: &RecordingManifest,
    config: &PipelineConfig,
) -> Result<(ArrayGeometry, Vec<SampleWindow>)> {
    let first = manifest
        .entries
        .first()
        .ok_or_else(|| Error::invariant("manifest has no recordings"))?;
    let geometry = ArrayGeometry::load(&first.geometry)?;
    let mut windows = Vec::new();
    for entry in &manifest.entries {
        if ArrayGeometry::load(&entry.geometry)? != geometry {
            return Err(Error::invariant(format!(
                "{} uses a different array geometry",
                entry.recording_id()
            )));
        }
        let clip = load_wav(&entry.wav)?;
        windows.extend(extract_windows(entry, &clip, config)?);
    }
    Ok((geometry, windows))
}

fn write_report(
    run: &RunConfig,
    report: &MetricsReport,
    outputs: &mut Outputs,
    out_json: Option<&Path>,
    out_csv: Option<&Path>,
) -> Result<()> {
    if let Some(path) = out_json {
        outputs.write(path, &run.envelope(report)?)?;
    }
    if let Some(path) = out_csv {
        outputs.write(path, &report.to_csv(&run.preamble())?)?;
    }
    if out_json.is_none() && out_csv.is_none() {
        print!("{}", run.envelope(report)?);
    } else {
        let scores: Vec<String> = report
            .pooled
            .per_class
            .iter()
            .map(|s| format!("J_{}={:.3}", s.class, s.jaccard))
            .collect();
        println!(
            "n={} accuracy={:.4} {}",
            report.n(),
            report.accuracy(),
            scores.join(" ")
        );
    }
    Ok(())
}

/// Renders one scenario file into `out` with a single-entry manifest.
fn simulate_scenario(
    scenario: &Scenario,
    source: &Path,
    out: &Path,
    run: &RunConfig,
) -> Result<RecordingManifest> {
    let rec = render(scenario)?;
    let stem = source
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    let wav = out.join(format!("{stem}.wav"));
    let geometry = out.join("geometry.json");
    crate::signal::write_wav(&rec.clip, &wav, crate::signal::WavEncoding::Pcm24)?;
    scenario.array.geometry.save(&geometry)?;
    let manifest = RecordingManifest {
        entries: vec![crate::dataset::ManifestEntry {
            wav,
            geometry,
            situation: scenario.label,
            environment: scenario.environment.unwrap_or(Environment::A),
            motion: crate::features::Motion::Static,
            t0: rec.t0,
            tau0: None,
        }],
    };
    let path = out.join("manifest.csv");
    std::fs::write(&path, manifest.to_csv(out, &run.preamble())?).map_err(|source| {
        Error::Unwritable {
            path: path.clone(),
            source,
        }
    })?;
    Ok(manifest)
}
