//! Experiment harness: configuration files, seeded training and evaluation
//! runs, the encoding benchmark, the quality-robustness scenario, and report
//! aggregation. Every output is a pure function of the configuration.
//!
//! Files written into the output directory:
//!
//! | command      | file                                  | format |
//! |--------------|---------------------------------------|--------|
//! | train        | `metrics_<scheme>.jsonl`              | one [`MetricsRecord`] per line |
//! | train        | `snapshot_<scheme>_seed<seed>.json`   | [`Snapshot`] |
//! | eval         | `eval_<scheme>.jsonl`                 | one [`MetricsRecord`] per line |
//! | encode-bench | `encoding_curves.csv`, `encoding_summary.csv` | CSV |
//! | robustness   | `robustness_<scheme>.csv`             | CSV |
//! | report       | `summary.csv`                         | CSV |

mod encoding;
mod report;
mod robustness;

pub use encoding::{
    all_patterns, encoding_benchmark, regression_target, train_encoding, EncodingBenchConfig, EncodingRun,
    EncodingScheme,
};
pub use report::{emit_report, read_metrics, Report, ReportRow};
pub use robustness::{robustness_series, RobustnessConfig, RobustnessPoint};

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{build_baseline, BaselineError, BaselineSpec, Models, Scheme};
use crate::factory::{EnvError, FactoryConfig, FactoryEnv, Scenario};
use crate::metrics::{MetricsRecord, RecordKind};
use crate::qmac::{evaluate, TrainConfig, TrainError, Trainer};
use crate::vqc::VqcError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error(transparent)]
    Circuit(#[from] VqcError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(io_err(path))
}

/// Top-level TOML configuration. Every table is optional; missing keys take
/// their defaults. Relative paths are resolved against the configuration
/// file's directory when loaded with [`ExperimentConfig::load`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    /// Scenario file for training and evaluation; defaults to the training
    /// scenario (catalog precision throughout).
    pub scenario: Option<PathBuf>,
    /// Snapshot used by `eval` and `robustness`. When unset, the default
    /// snapshot name in `out` is tried, then fresh initial parameters.
    pub snapshot: Option<PathBuf>,
    pub env: FactoryConfig,
    pub train: TrainConfig,
    pub encoding: EncodingBenchConfig,
    pub robustness: RobustnessConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Proposed,
            seeds: vec![0],
            out: PathBuf::from("runs"),
            scenario: None,
            snapshot: None,
            env: FactoryConfig::default(),
            train: TrainConfig::default(),
            encoding: EncodingBenchConfig::default(),
            robustness: RobustnessConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&read_file(path)?)
            .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.scenario, &mut cfg.snapshot, &mut cfg.robustness.scenario].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::Config("at least one seed is required".into()));
        }
        self.env.validate()?;
        self.train.validate()?;
        for p in [&self.scenario, &self.snapshot, &self.robustness.scenario].into_iter().flatten() {
            if !p.is_file() {
                return Err(ExperimentError::Config(format!("file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train.clone() }
    }

    fn scenario_or(&self, path: Option<&Path>, fallback: Scenario) -> Result<Scenario> {
        match path {
            Some(p) => Ok(Scenario::load(p)?),
            None => Ok(fallback),
        }
    }

    pub fn environment(&self) -> Result<FactoryEnv> {
        let scenario = self.scenario_or(self.scenario.as_deref(), Scenario::training())?;
        Ok(FactoryEnv::new(self.env.clone(), scenario)?)
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.out.join(format!("metrics_{}.jsonl", self.scheme))
    }

    pub fn eval_path(&self) -> PathBuf {
        self.out.join(format!("eval_{}.jsonl", self.scheme))
    }

    pub fn snapshot_path(&self, seed: u64) -> PathBuf {
        self.out.join(format!("snapshot_{}_seed{seed}.json", self.scheme))
    }

    pub fn robustness_path(&self) -> PathBuf {
        self.out.join(format!("robustness_{}.csv", self.scheme))
    }
}

/// Parameters of one trained network with its architecture description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSnapshot {
    pub description: String,
    /// Ordered parameters; rotation angles in radians for circuits.
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub scheme: Scheme,
    pub seed: u64,
    pub epochs: usize,
    pub actor: ParamSnapshot,
    pub critic: Option<ParamSnapshot>,
}

impl Snapshot {
    pub fn capture(scheme: Scheme, seed: u64, epochs: usize, models: &Models) -> Self {
        Self {
            scheme,
            seed,
            epochs,
            actor: ParamSnapshot { description: models.actor.describe(), params: models.actor.params().to_vec() },
            critic: models
                .critic
                .as_ref()
                .map(|c| ParamSnapshot { description: c.describe(), params: c.params().to_vec() }),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read_file(path)?).map_err(|e| ExperimentError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("snapshot serializes");
        text.push('\n');
        write_file(path, &text)
    }

    /// Copies the stored parameters into freshly built models of the same
    /// scheme.
    pub fn apply(&self, models: &mut Models) -> Result<()> {
        let mismatch = |what: &str, expected: usize, got: usize| {
            ExperimentError::Config(format!("snapshot {what} has {got} parameters, model expects {expected}"))
        };
        let actor = models.actor.params_mut();
        if actor.len() != self.actor.params.len() {
            return Err(mismatch("actor", actor.len(), self.actor.params.len()));
        }
        actor.copy_from_slice(&self.actor.params);
        match (models.critic.as_mut(), &self.critic) {
            (Some(c), Some(s)) => {
                let p = c.params_mut();
                if p.len() != s.params.len() {
                    return Err(mismatch("critic", p.len(), s.params.len()));
                }
                p.copy_from_slice(&s.params);
            }
            (None, None) => {}
            _ => return Err(ExperimentError::Config("snapshot and model disagree on having a critic".into())),
        }
        Ok(())
    }
}

fn to_jsonl(records: &[MetricsRecord]) -> String {
    records.iter().fold(String::new(), |mut out, r| {
        let _ = writeln!(out, "{}", serde_json::to_string(r).expect("record serializes"));
        out
    })
}

/// Models for `seed`: the configured snapshot, else the default snapshot in
/// the output directory, else fresh initial parameters.
pub fn load_models(cfg: &ExperimentConfig, seed: u64) -> Result<(Models, Option<PathBuf>)> {
    let mut models = build_baseline(BaselineSpec::new(cfg.scheme), &cfg.env, &cfg.train_config(seed))?;
    let path = cfg.snapshot.clone().or_else(|| Some(cfg.snapshot_path(seed)).filter(|p| p.is_file()));
    if let Some(p) = &path {
        let snap = Snapshot::load(p)?;
        if snap.scheme != cfg.scheme {
            return Err(ExperimentError::Config(format!(
                "snapshot {} holds scheme {}, configuration asks for {}",
                p.display(),
                snap.scheme,
                cfg.scheme
            )));
        }
        snap.apply(&mut models)?;
    }
    Ok((models, path))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub metrics_path: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub records: Vec<MetricsRecord>,
}

/// Trains every seed, then evaluates greedily over `train.eval_episodes`
/// episodes. Writes the metrics stream and one snapshot per seed (none for
/// untrainable schemes).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let env = cfg.environment()?;
    let scheme = cfg.scheme.name();
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    for &seed in &cfg.seeds {
        let tc = cfg.train_config(seed);
        let models = build_baseline(BaselineSpec::new(cfg.scheme), &cfg.env, &tc)?;
        let mut trainer = Trainer::new(env.clone(), models.actor, models.critic, tc)?;
        for (epoch, s) in trainer.train()?.iter().enumerate() {
            records.push(MetricsRecord::new(scheme, seed, RecordKind::Train, epoch, s));
        }
        for (i, ep) in trainer.evaluate()?.iter().enumerate() {
            records.push(MetricsRecord::new(scheme, seed, RecordKind::Eval, i, &ep.summary));
        }
        if cfg.scheme.is_trainable() {
            let epochs = trainer.epochs_done();
            let (actor, critic) = trainer.into_parts();
            let snap = Snapshot::capture(cfg.scheme, seed, epochs, &Models { actor, critic });
            let path = cfg.snapshot_path(seed);
            snap.save(&path)?;
            snapshots.push(path);
        }
    }
    let metrics_path = cfg.metrics_path();
    write_file(&metrics_path, &to_jsonl(&records))?;
    Ok(RunOutput { metrics_path, snapshots, records })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    pub path: PathBuf,
    pub records: Vec<MetricsRecord>,
    /// Snapshot used per seed; `None` means initial parameters.
    pub sources: Vec<Option<PathBuf>>,
}

/// Greedy evaluation of stored (or initial) models for every seed.
pub fn run_evaluation(cfg: &ExperimentConfig) -> Result<EvalOutput> {
    cfg.validate()?;
    let env = cfg.environment()?;
    let mut records = Vec::new();
    let mut sources = Vec::new();
    for &seed in &cfg.seeds {
        let (models, source) = load_models(cfg, seed)?;
        for (i, ep) in evaluate(&env, models.actor.as_ref(), cfg.train.eval_episodes, seed)?.iter().enumerate() {
            records.push(MetricsRecord::new(cfg.scheme.name(), seed, RecordKind::Eval, i, &ep.summary));
        }
        sources.push(source);
    }
    let path = cfg.eval_path();
    write_file(&path, &to_jsonl(&records))?;
    Ok(EvalOutput { path, records, sources })
}

/// Runs the encoding benchmark and writes per-iteration curves and final MSEs.
pub fn run_encoding_benchmark(cfg: &ExperimentConfig) -> Result<Vec<EncodingRun>> {
    let runs = encoding_benchmark(&cfg.encoding)?;
    let mut curves = String::from("scheme,seed,iteration,mse\n");
    let mut summary = String::from("scheme,seed,parameters,final_mse\n");
    for run in &runs {
        for (i, mse) in run.mse_curve.iter().enumerate() {
            let _ = writeln!(curves, "{},{},{i},{mse}", run.scheme, run.seed);
        }
        let _ = writeln!(summary, "{},{},{},{}", run.scheme, run.seed, run.parameters, run.final_mse());
    }
    write_file(&cfg.out.join("encoding_curves.csv"), &curves)?;
    write_file(&cfg.out.join("encoding_summary.csv"), &summary)?;
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustnessOutput {
    pub path: PathBuf,
    /// One series per seed, in seed order.
    pub series: Vec<(u64, Vec<RobustnessPoint>)>,
}

/// Precision series of the configured model under the robustness scenario
/// (four phases over 60 minutes unless a scenario file is given).
pub fn run_robustness(cfg: &ExperimentConfig) -> Result<RobustnessOutput> {
    cfg.validate()?;
    let scenario = cfg.scenario_or(cfg.robustness.scenario.as_deref(), Scenario::four_phase())?;
    let env = FactoryEnv::new(cfg.env.clone(), scenario)?;
    let mut csv = String::from("seed,minute,phase,mean_precision_pct\n");
    let mut series = Vec::new();
    for &seed in &cfg.seeds {
        let (models, _) = load_models(cfg, seed)?;
        let points = robustness_series(&env, models.actor.as_ref(), cfg.robustness.iterations, seed)?;
        for p in &points {
            let _ = writeln!(csv, "{seed},{},{},{}", p.minute, p.phase + 1, p.mean_precision_pct);
        }
        series.push((seed, points));
    }
    let path = cfg.robustness_path();
    write_file(&path, &csv)?;
    Ok(RobustnessOutput { path, series })
}
