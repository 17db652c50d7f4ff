use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use ablacert::ablation::EnumGuard;
use ablacert::cli::commands::{
    exit_code, parse_mode, run_certify, run_radius, run_regions, run_soundness, run_tightness, ExplicitBounds,
    OracleArgs, OracleOutcome, RadiusArgs,
};
use ablacert::cli::config::parse_config;
use ablacert::cli::dataset::{parse_dataset, write_dataset, DatasetHeader};
use ablacert::cli::synth::{synthetic_dataset, write_prototypes};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Certified l0 robustness for top-k predictions under randomized ablation.
#[derive(Parser)]
#[command(name = "ablacert", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Certify every example of a dataset and write a JSON report plus a CSV curve.
    Certify {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the accuracy curve; defaults to the report path with a .csv extension.
        #[arg(long)]
        curve: Option<PathBuf>,
        /// true-label or empirical-top1; overrides the config.
        #[arg(long)]
        mode: Option<String>,
        /// Print one line per finished example to stderr.
        #[arg(long)]
        progress: bool,
    },
    /// Bounds and certified radius for one set of label counts.
    Radius {
        /// Comma-separated counts n_1..n_c.
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<u64>,
        /// Target label, 1-based.
        #[arg(long)]
        l: usize,
        #[arg(long)]
        d: u64,
        #[arg(long)]
        e: u64,
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
    },
    /// Brute-force checks on small instances.
    #[command(subcommand)]
    Oracle(OracleCommand),
    /// Write a synthetic prototype dataset, its prototypes and a matching config.
    Synth {
        #[arg(long, default_value_t = 200)]
        examples: usize,
        #[arg(long, default_value_t = 24)]
        d: usize,
        #[arg(long, default_value_t = 5)]
        c: usize,
        #[arg(long, default_value_t = 2)]
        domain: u32,
        /// Probability that each feature departs from its class prototype.
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args, Clone, Copy)]
struct Shape {
    #[arg(long, default_value_t = 6)]
    d: usize,
    #[arg(long, default_value_t = 2)]
    e: usize,
    #[arg(long, default_value_t = 4)]
    c: usize,
    /// Fixed k; by default trials cycle through small k.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 2)]
    domain: u32,
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl From<Shape> for OracleArgs {
    fn from(s: Shape) -> Self {
        OracleArgs { d: s.d, e: s.e, c: s.c, k: s.k, domain: s.domain, trials: s.trials, seed: s.seed }
    }
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Random table classifiers checked against every perturbation inside their radius.
    Soundness(Shape),
    /// Worst-case classifiers attacked just past the certified radius.
    Tightness {
        #[command(flatten)]
        shape: Shape,
        /// Explicit target label (1-based), used with --lower and --upper.
        #[arg(long, requires_all = ["lower", "upper"])]
        l: Option<usize>,
        /// Lower bound numerator over C(d, e).
        #[arg(long, requires = "l")]
        lower: Option<u64>,
        /// Upper bound numerators for the other labels, in label order.
        #[arg(long, value_delimiter = ',', requires = "l")]
        upper: Option<Vec<u64>>,
    },
    /// Closed-form region probabilities next to enumerated ones.
    Regions {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        e: usize,
        /// A single perturbation size; all of 0..=d by default.
        #[arg(long)]
        r: Option<usize>,
        #[arg(long, default_value_t = 2)]
        domain: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Prints the oracle's report; failures mean a broken guarantee.
fn finish_oracle(outcome: OracleOutcome) -> Result<ExitCode> {
    print!("{}", outcome.text);
    Ok(if outcome.failures == 0 { ExitCode::SUCCESS } else { ExitCode::from(3) })
}

fn run(cli: Cli) -> Result<ExitCode> {
    let guard = EnumGuard::from_env()?;
    match cli.command {
        Command::Certify { dataset, config, out, curve, mode, progress } => {
            let data = parse_dataset(&read(&dataset)?).with_context(|| format!("in {}", dataset.display()))?;
            let base = config.parent().unwrap_or(Path::new("."));
            let mut cfg = parse_config(&read(&config)?, base).with_context(|| format!("in {}", config.display()))?;
            if let Some(mode) = mode {
                cfg.mode = parse_mode(&mode)?;
            }
            let done = AtomicUsize::new(0);
            let total = data.examples.len();
            let report = run_certify(&data, &cfg, |rec| {
                if progress {
                    let i = done.fetch_add(1, Ordering::Relaxed) + 1;
                    eprintln!("[{i}/{total}] {}: label {} radius {}", rec.id, rec.certified_label + 1, rec.radius);
                }
            })?;
            write(&out, &report.to_json())?;
            write(&curve.unwrap_or_else(|| out.with_extension("csv")), &report.curve_csv())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Radius { counts, l, d, e, k, alpha } => {
            print!("{}", run_radius(&RadiusArgs { counts, label: l, d, e, k, alpha })?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle(OracleCommand::Soundness(shape)) => finish_oracle(run_soundness(&shape.into(), guard)?),
        Command::Oracle(OracleCommand::Tightness { shape, l, lower, upper }) => {
            let explicit = match (l, lower, upper) {
                (Some(label), Some(lower), Some(upper)) => Some(ExplicitBounds { label, lower, upper }),
                _ => None,
            };
            finish_oracle(run_tightness(&shape.into(), explicit.as_ref(), guard)?)
        }
        Command::Oracle(OracleCommand::Regions { d, e, r, domain, seed }) => {
            finish_oracle(run_regions(d, e, r, domain, seed, guard)?)
        }
        Command::Synth { examples, d, c, domain, noise, seed, out_dir } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data = synthetic_dataset(&mut rng, examples, DatasetHeader { d, c, domain }, noise)?;
            std::fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
            write(&out_dir.join("dataset.csv"), &write_dataset(&data.dataset))?;
            write(&out_dir.join("prototypes.csv"), &write_prototypes(&data.prototypes))?;
            let e = (d / 4).max(1);
            let config = format!(
                "e = {e}\nk = {}\nn = 10000\nalpha = 0.001\nseed = {seed}\nclassifier = prototype\nprototypes = prototypes.csv\n",
                3.min(c - 1)
            );
            write(&out_dir.join("config.txt"), &config)?;
            println!("wrote {} examples to {}", examples, out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.chain().find_map(|e| e.downcast_ref::<ablacert::Error>()).map_or(1, exit_code);
            ExitCode::from(code)
        }
    }
}
