use clap::{Parser, Subcommand};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

mod commands;
mod config;

use config::ConfigArgs;

#[derive(Parser)]
#[command(
    name = "qembed",
    version,
    about = "Search entanglement layouts for variational quantum classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search one entanglement level and report the best genotype.
    Search {
        #[command(flatten)]
        config: ConfigArgs,
        /// Continue an existing history in the output directory.
        #[arg(long)]
        resume: bool,
        /// Store per-trial wall time in the history (breaks byte-identical reruns).
        #[arg(long)]
        record_seconds: bool,
    },
    /// Train a genotype over several seeded runs and report test metrics.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Genotype JSON (a `baseline` output or a `best.json`).
        #[arg(long, conflicts_with = "baseline")]
        genotype: Option<PathBuf>,
        /// Evaluate a ring baseline instead.
        #[arg(long, value_parser = ["ring1", "ring2"])]
        baseline: Option<String>,
    },
    /// Print or write a ring baseline genotype.
    Baseline {
        #[arg(long, default_value_t = 4)]
        n_qubits: usize,
        #[arg(long, value_parser = ["ring1", "ring2"], default_value = "ring1")]
        variant: String,
        /// Output file (stdout when omitted).
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Search several entanglement levels in turn.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Levels to search, e.g. 2,4,6,8.
        #[arg(long, value_delimiter = ',')]
        k_values: Option<Vec<usize>>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Generate the synthetic dataset as CSV plus a schema file.
    SynthData {
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        n_features: Option<usize>,
        #[arg(long)]
        n_classes: Option<usize>,
        #[arg(long)]
        class_sep: Option<f64>,
        #[arg(long)]
        noise_std: Option<f64>,
    },
    /// Write pre- or post-ansatz features of every sample as CSV.
    ExportFeatures {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_parser = ["pre", "post"], default_value = "post")]
        stage: String,
        /// Output CSV (defaults to features_<stage>.csv in the output directory).
        #[arg(long)]
        features_out: Option<PathBuf>,
    },
    /// Compare metric files with t-tests and tables, or summarise histories.
    Analyze {
        /// Per-run metrics CSV, optionally labelled as NAME=PATH.
        #[arg(long)]
        metrics: Vec<String>,
        /// Metrics CSV of a baseline model (NAME=PATH).
        #[arg(long)]
        baseline_metrics: Vec<String>,
        /// Search history to turn into a running-minimum CSV.
        #[arg(long)]
        history: Vec<PathBuf>,
        #[arg(long, default_value = "test_acc", value_parser = ["test_acc", "test_loss", "val_acc", "val_loss"])]
        metric: String,
        #[arg(long, default_value = "pooled", value_parser = ["pooled", "welch"])]
        variant: String,
        #[arg(long, short, default_value = "analysis")]
        out: PathBuf,
    },
}

/// Invalid command-line or config input (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// Malformed input files (exit code 3).
#[derive(Debug)]
pub struct DataError(pub String);

impl std::fmt::Display for DataError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for DataError {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if cause.is::<DataError>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<qembed::Error>() {
            use qembed::Error as E;
            return match e {
                E::Config(_)
                | E::QubitCount(_)
                | E::TooFewQubits(_)
                | E::LevelTooLarge { .. }
                | E::GenotypeLength { .. }
                | E::EdgeOutOfRange { .. }
                | E::DuplicateEdge(_) => 2,
                E::Io { .. } | E::Json { .. } | E::Dimension { .. } | E::TooFewSamples { .. } => 3,
                e if e.is_data_error() => 3,
                _ => 4,
            };
        }
    }
    4
}

static LOG_FILE: Mutex<Option<File>> = Mutex::new(None);

/// Sends log records to stderr and, once a run directory exists, to a log file.
struct LogTarget;

impl Write for LogTarget {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        std::io::stderr().write_all(buf)?;
        if let Some(f) = LOG_FILE.lock().unwrap().as_mut() {
            f.write_all(buf)?;
        }
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        if let Some(f) = LOG_FILE.lock().unwrap().as_mut() {
            f.flush()?;
        }
        std::io::stderr().flush()
    }
}

/// Starts mirroring the log into `path`.
pub fn log_to_file(path: &Path) -> anyhow::Result<()> {
    let f = File::create(path).map_err(|e| DataError(format!("{}: {e}", path.display())))?;
    *LOG_FILE.lock().unwrap() = Some(f);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Pipe(Box::new(LogTarget)))
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Search {
            config,
            resume,
            record_seconds,
        } => commands::search(&config, resume, record_seconds),
        Command::Evaluate {
            config,
            genotype,
            baseline,
        } => commands::evaluate(&config, genotype.as_deref(), baseline.as_deref()),
        Command::Baseline {
            n_qubits,
            variant,
            out,
        } => commands::baseline(n_qubits, &variant, out.as_deref()),
        Command::Sweep {
            config,
            k_values,
            repeats,
        } => commands::sweep(&config, k_values, repeats),
        Command::SynthData {
            out,
            seed,
            n_samples,
            n_features,
            n_classes,
            class_sep,
            noise_std,
        } => {
            let mut c = qembed::data::SynthConfig::default();
            c.n_samples = n_samples.unwrap_or(c.n_samples);
            c.n_features = n_features.unwrap_or(c.n_features);
            c.n_classes = n_classes.unwrap_or(c.n_classes);
            c.class_sep = class_sep.unwrap_or(c.class_sep);
            c.noise_std = noise_std.unwrap_or(c.noise_std);
            commands::synth_data(&c, seed, &out)
        }
        Command::ExportFeatures {
            config,
            checkpoint,
            stage,
            features_out,
        } => commands::export_features(&config, &checkpoint, &stage, features_out.as_deref()),
        Command::Analyze {
            metrics,
            baseline_metrics,
            history,
            metric,
            variant,
            out,
        } => commands::analyze(
            &metrics,
            &baseline_metrics,
            &history,
            &metric,
            &variant,
            &out,
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
