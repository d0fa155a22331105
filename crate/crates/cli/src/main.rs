use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use qmarl_core::baselines::Scheme;
use qmarl_core::experiment::{
    emit_report, run_encoding_benchmark, run_evaluation, run_experiment, run_robustness, ExperimentConfig,
    EncodingScheme,
};

/// Quantum multi-agent actor-critic experiments on the simulated LCD factory.
#[derive(Debug, Parser)]
#[command(name = "qmarl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Run a single seed instead of the configured seed list.
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// proposed, comp1, comp2, comp3 or comp4.
    #[arg(long, global = true, value_name = "NAME")]
    scheme: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train and evaluate; writes metrics_<scheme>.jsonl and parameter snapshots.
    Train,
    /// Greedy evaluation of saved (or initial) parameters; writes eval_<scheme>.jsonl.
    Eval,
    /// Encoding benchmark; writes encoding_curves.csv and encoding_summary.csv.
    EncodeBench,
    /// Precision series under the four-phase scenario; writes robustness_<scheme>.csv.
    Robustness,
    /// Aggregate metrics files into summary.csv and print a table.
    Report {
        /// Metrics files; defaults to every *.jsonl file in the output directory.
        files: Vec<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
        cfg.encoding.seeds = vec![seed];
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(name) = &common.scheme {
        cfg.scheme = name.parse::<Scheme>()?;
    }
    Ok(cfg)
}

fn metrics_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        bail!("no .jsonl metrics files in {}", dir.display());
    }
    Ok(files)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Train => {
            let out = run_experiment(&cfg)?;
            println!("wrote {} ({} records)", out.metrics_path.display(), out.records.len());
            for s in &out.snapshots {
                println!("wrote {}", s.display());
            }
        }
        Command::Eval => {
            let out = run_evaluation(&cfg)?;
            for (seed, source) in cfg.seeds.iter().zip(&out.sources) {
                match source {
                    Some(p) => println!("seed {seed}: parameters from {}", p.display()),
                    None => println!("seed {seed}: initial parameters"),
                }
            }
            println!("wrote {} ({} records)", out.path.display(), out.records.len());
        }
        Command::EncodeBench => {
            let runs = run_encoding_benchmark(&cfg)?;
            println!("{:<12} {:>6} {:>12}", "encoding", "seed", "final_mse");
            for scheme in EncodingScheme::ALL {
                for r in runs.iter().filter(|r| r.scheme == scheme) {
                    println!("{:<12} {:>6} {:>12.6}", r.scheme, r.seed, r.final_mse());
                }
            }
            println!("wrote {}", cfg.out.join("encoding_summary.csv").display());
        }
        Command::Robustness => {
            let out = run_robustness(&cfg)?;
            for (seed, series) in &out.series {
                if let Some(min) = series.iter().min_by(|a, b| a.mean_precision_pct.total_cmp(&b.mean_precision_pct)) {
                    println!(
                        "seed {seed}: lowest precision {:.2}% at minute {} (phase {})",
                        min.mean_precision_pct,
                        min.minute,
                        min.phase + 1
                    );
                }
            }
            println!("wrote {}", out.path.display());
        }
        Command::Report { files } => {
            let files = if files.is_empty() { metrics_files(&cfg.out)? } else { files };
            let report = emit_report(&files)?;
            let path = cfg.out.join("summary.csv");
            fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
            fs::write(&path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            print!("{}", report.to_table());
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
