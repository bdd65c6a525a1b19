//! `infogen` command-line frontend.
//!
//! Exit codes: 0 success, 2 configuration error (including bad flags),
//! 3 numerical failure, 1 when outputs cannot be written.

mod cmd;
mod error;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use infogen_core::counterexample::{CexAlgorithm, CexConfig, CexMode};
use serde::de::DeserializeOwned;
use serde::Serialize;

use cmd::gen_data::Knobs;
use error::{CliError, Result};
use run::{load_config, Output, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "infogen", version, about = "Information-theoretic quantities of learning algorithms")]
struct Cli {
    /// Worker threads; defaults to the config value, then to all logical cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory; overrides the config's `out_dir`.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct FanoArgs {
    #[arg(long)]
    k: usize,
    /// Uniform label-noise level.
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    bits_per_example: f64,
    /// Upper end of the curve in bits (default log₂ k).
    #[arg(long)]
    max_bits: Option<f64>,
    #[arg(long, default_value_t = 101)]
    points: usize,
}

#[derive(Debug, Args)]
struct CexArgs {
    #[arg(long, conflicts_with_all = ["d", "n", "trials", "algorithm"])]
    config: Option<PathBuf>,
    /// Examples are the 2^d bit strings.
    #[arg(long, required_unless_present = "config")]
    d: Option<u32>,
    /// Training-set size (block size).
    #[arg(long, required_unless_present = "config")]
    n: Option<usize>,
    /// Monte-Carlo trials; exhaustive enumeration when absent.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_parser = ["construction", "fixed_partition"])]
    algorithm: Option<String>,
    /// Evaluate the covariance lemma at these N₀ = N₁ sizes.
    #[arg(long, value_delimiter = ',')]
    lemma: Vec<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct GenDataArgs {
    #[arg(long, conflicts_with = "kind")]
    config: Option<PathBuf>,
    #[arg(long, required_unless_present = "config",
          value_parser = ["gauss_blobs", "two_moons", "parity_bits", "subclass_mixture"])]
    kind: Option<String>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 2)]
    classes: usize,
    #[arg(long, default_value_t = 3.0)]
    sep: f64,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Input noise of two_moons.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 4)]
    bits: usize,
    #[arg(long, default_value_t = 4)]
    groups: usize,
    /// Uniform label-flip probability.
    #[arg(long)]
    flip: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fano lower bound on training error under uniform label noise.
    Fano(FanoArgs),
    /// Train a classifier from predicted label gradients.
    LimitTrain(ConfigArgs),
    /// Leave-one-out sample information scores and data summarization.
    SampleInfo(ConfigArgs),
    /// Supersample f-CMI estimates next to measured generalization gaps.
    Fcmi(ConfigArgs),
    /// Check the partition-learner counterexample.
    Cex(CexArgs),
    /// Online or offline distillation with per-epoch tracking.
    Distill(ConfigArgs),
    /// Supervision complexity, min-norm sweep and margin bound of an NTK.
    Complexity(ConfigArgs),
    /// Write a synthetic dataset CSV.
    GenData(GenDataArgs),
}

struct Globals {
    threads: Option<usize>,
    out_dir: Option<PathBuf>,
}

/// Apply command-line overrides, set up the pool and the output directory,
/// run `body`, then write the manifest.
fn execute<P, T>(
    name: &str,
    mut cfg: RunConfig<P>,
    seed: Option<u64>,
    g: &Globals,
    body: impl FnOnce(&P, u64, &mut Output) -> Result<T> + Send,
) -> Result<T>
where
    P: Serialize + Sync,
    T: Send,
{
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if g.threads.is_some() {
        cfg.threads = g.threads;
    }
    if g.out_dir.is_some() {
        cfg.out_dir = g.out_dir.clone();
    }
    if cfg.threads == Some(0) {
        return Err(CliError::config("threads must be positive"));
    }
    let dir = cfg.out_dir.clone().unwrap_or_else(|| Path::new("infogen-out").join(name));
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    let mut out = Output::create(&dir)?;
    let value = pool.install(|| body(&cfg.params, cfg.seed, &mut out))?;
    out.finish(name, &cfg)?;
    log::info!("wrote {}", dir.display());
    Ok(value)
}

fn from_file<P: DeserializeOwned + Serialize + Sync>(
    name: &str,
    a: &ConfigArgs,
    g: &Globals,
    body: impl FnOnce(&P, u64, &mut Output) -> Result<()> + Send,
) -> Result<()> {
    execute(name, load_config::<P>(&a.config)?, a.seed, g, body)
}

fn dispatch(cli: Cli) -> Result<()> {
    let g = Globals { threads: cli.threads, out_dir: cli.out_dir };
    match cli.command {
        Command::Fano(a) => {
            let params = cmd::fano::FanoParams {
                k: a.k,
                p: a.p,
                bits_per_example: a.bits_per_example,
                max_bits: a.max_bits,
                points: a.points,
            };
            let r0 = execute("fano", RunConfig::new(params), None, &g, |p, _, out| cmd::fano::run(p, out))?;
            println!("r0 = {r0:.6}");
            Ok(())
        }
        Command::LimitTrain(a) => from_file("limit-train", &a, &g, cmd::limit::run),
        Command::SampleInfo(a) => from_file("sample-info", &a, &g, cmd::sample_info::run),
        Command::Fcmi(a) => from_file("fcmi", &a, &g, |p: &cmd::fcmi::FcmiParams, seed, out| {
            for b in cmd::fcmi::run(p, seed, out)? {
                println!(
                    "n = {:>5}  epoch {:>3}  gap {:+.4} ± {:.4}  fcmi_m1 {:.4}  fcmi_mn {:.4}",
                    b.n, b.epoch, b.gap_mean, b.gap_stderr, b.fcmi_m1, b.fcmi_mn
                );
            }
            Ok(())
        }),
        Command::Distill(a) => from_file("distill", &a, &g, cmd::distill::run),
        Command::Complexity(a) => from_file("complexity", &a, &g, cmd::complexity::run),
        Command::Cex(a) => {
            let cfg = match &a.config {
                Some(path) => load_config::<cmd::cex::CexParams>(path)?,
                None => {
                    let mode = match a.trials {
                        Some(trials) => CexMode::MonteCarlo { trials },
                        None => CexMode::Exhaustive,
                    };
                    let mut instance = CexConfig::new(a.d.unwrap_or_default(), a.n.unwrap_or_default(), mode);
                    if a.algorithm.as_deref() == Some("fixed_partition") {
                        instance.algorithm = CexAlgorithm::FixedPartition;
                    }
                    RunConfig::new(cmd::cex::CexParams { instance, lemma_sizes: a.lemma.clone() })
                }
            };
            let report = execute("cex", cfg, a.seed, &g, cmd::cex::run)?;
            let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Numeric(e.to_string()))?;
            println!("{text}");
            Ok(())
        }
        Command::GenData(a) => {
            let cfg = match &a.config {
                Some(path) => load_config::<cmd::gen_data::GenDataParams>(path)?,
                None => {
                    let knobs = Knobs {
                        classes: a.classes,
                        separation: a.sep,
                        dim: a.dim,
                        noise: a.noise,
                        bits: a.bits,
                        groups: a.groups,
                        flip: a.flip,
                    };
                    let source = cmd::gen_data::source_from_flags(a.kind.as_deref().unwrap_or_default(), &knobs)?;
                    RunConfig::new(cmd::gen_data::GenDataParams { source, n: a.n })
                }
            };
            execute("gen-data", cfg, a.seed, &g, cmd::gen_data::run)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
