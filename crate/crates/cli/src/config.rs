use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use qembed::data::{Builtin, SynthConfig};
use qembed::experiment::{DatasetSource, ExperimentConfig, Mode};
use qembed::layout::{EdgeSet, Genotype};
use qembed::search::{Sampler, TpeConfig};

use crate::ConfigError;

/// Contents of a run config file. Everything except `experiment` has defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// Entanglement level searched by `search`.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Genotype used by `evaluate` when no other source is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub genotype: Option<Vec<usize>>,
    #[serde(default)]
    pub search: SearchSettings,
    #[serde(default)]
    pub evaluate: EvalSettings,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SearchSettings {
    #[serde(default)]
    pub sampler: Sampler,
    #[serde(default)]
    pub tpe: TpeConfig,
    /// Evaluate the ring-seeded genotype as trial 0.
    #[serde(default)]
    pub ring_init: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSettings {
    pub n_runs: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            n_runs: 10,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub k_values: Vec<usize>,
    pub n_repeats: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            k_values: vec![2, 4, 6, 8],
            n_repeats: 3,
        }
    }
}

fn default_k() -> usize {
    4
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/latest")
}

/// Flags shared by every command that runs experiments. Flags override the
/// values of `--config`.
#[derive(Debug, Clone, Args, Default)]
pub struct ConfigArgs {
    /// Run config (JSON).
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Start from the preset of a bundled dataset (iris, wine, breast_cancer) or `synthetic`.
    #[arg(long, conflicts_with_all = ["config", "csv"])]
    pub dataset: Option<String>,
    /// Start from a CSV file (needs --schema).
    #[arg(long, requires = "schema", conflicts_with = "config")]
    pub csv: Option<PathBuf>,
    #[arg(long, requires = "csv")]
    pub schema: Option<PathBuf>,
    #[arg(long, value_parser = ["standalone", "hybrid"])]
    pub mode: Option<String>,
    /// Encoder widths, e.g. 13,8,6,4 (hybrid mode).
    #[arg(long, value_delimiter = ',')]
    pub encoder_dims: Option<Vec<usize>>,
    #[arg(long)]
    pub n_qubits: Option<usize>,
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long, short)]
    pub k: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Search seed and evaluation base seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub startup_trials: Option<usize>,
    #[arg(long)]
    pub ei_candidates: Option<usize>,
    #[arg(long, value_parser = ["tpe", "random"])]
    pub sampler: Option<String>,
    /// Seed the search with the ring-based genotype.
    #[arg(long)]
    pub ring_init: bool,
    /// Number of evaluation runs.
    #[arg(long)]
    pub runs: Option<usize>,
    /// Output directory.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub fn dataset_source(name: &str) -> Result<DatasetSource> {
    if name == "synthetic" {
        return Ok(DatasetSource::Synthetic {
            config: SynthConfig::default(),
            seed: 0,
        });
    }
    let name: Builtin = name
        .parse()
        .map_err(|e: qembed::Error| config_err(format!("--dataset: {e}")))?;
    Ok(DatasetSource::Builtin { name })
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            config_err(format!(
                "{}: field `{field}`: {}",
                path.display(),
                e.inner()
            ))
        })
    }

    pub fn preset(source: DatasetSource) -> Self {
        Self {
            experiment: ExperimentConfig::preset(source),
            k: default_k(),
            genotype: None,
            search: SearchSettings::default(),
            evaluate: EvalSettings::default(),
            sweep: SweepSettings::default(),
            output_dir: default_output_dir(),
        }
    }

    /// Builds the effective config from a file or a preset plus overrides.
    pub fn resolve(args: &ConfigArgs) -> Result<Self> {
        let mut c = match (&args.config, &args.dataset, &args.csv, &args.schema) {
            (Some(path), ..) => Self::from_file(path)?,
            (None, Some(name), ..) => Self::preset(dataset_source(name)?),
            (None, None, Some(path), Some(schema)) => Self::preset(DatasetSource::Csv {
                path: path.clone(),
                schema: schema.clone(),
            }),
            _ => {
                return Err(config_err(
                    "one of --config, --dataset or --csv/--schema is required",
                ))
            }
        };
        let e = &mut c.experiment;
        if let Some(mode) = &args.mode {
            e.mode = if mode == "hybrid" {
                Mode::Hybrid
            } else {
                Mode::Standalone
            };
            if e.mode == Mode::Standalone && args.encoder_dims.is_none() {
                e.encoder_dims = None;
            }
        }
        if let Some(d) = &args.encoder_dims {
            e.encoder_dims = Some(d.clone());
        }
        if let Some(n) = args.n_qubits {
            e.n_qubits = n;
        }
        if let Some(d) = args.depth {
            e.depth = d;
        }
        if let Some(n) = args.epochs {
            e.train.max_epochs = n;
        }
        if let Some(s) = args.split_seed {
            e.split_seed = s;
        }
        if let Some(k) = args.k {
            c.k = k;
        }
        if let Some(s) = args.seed {
            c.search.tpe.seed = s;
            c.evaluate.seed = s;
        }
        if let Some(n) = args.trials {
            c.search.tpe.n_trials = n;
        }
        if let Some(n) = args.startup_trials {
            c.search.tpe.n_startup_trials = n;
        }
        if let Some(n) = args.ei_candidates {
            c.search.tpe.n_ei_candidates = n;
        }
        if let Some(s) = &args.sampler {
            c.search.sampler = s
                .parse()
                .map_err(|e: qembed::Error| config_err(e.to_string()))?;
        }
        if args.ring_init {
            c.search.ring_init = true;
        }
        if let Some(n) = args.runs {
            c.evaluate.n_runs = n;
        }
        if let Some(o) = &args.out {
            c.output_dir = o.clone();
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let field = |name: &str, e: qembed::Error| config_err(format!("field `{name}`: {e}"));
        self.experiment
            .validate()
            .map_err(|e| field("experiment", e))?;
        let edges =
            EdgeSet::new(self.experiment.n_qubits).map_err(|e| field("experiment.n_qubits", e))?;
        if self.k > edges.len() {
            return Err(config_err(format!(
                "field `k`: entanglement level {} exceeds edge count {}",
                self.k,
                edges.len()
            )));
        }
        if let Some(g) = &self.genotype {
            Genotype::new(g.clone(), edges.len()).map_err(|e| field("genotype", e))?;
        }
        self.search
            .tpe
            .validate()
            .map_err(|e| field("search.tpe", e))?;
        if self.evaluate.n_runs == 0 {
            return Err(config_err("field `evaluate.n_runs`: must be >= 1"));
        }
        if self.sweep.n_repeats == 0 || self.sweep.k_values.is_empty() {
            return Err(config_err(
                "field `sweep`: needs k_values and n_repeats >= 1",
            ));
        }
        Ok(())
    }

    /// Writes the effective config as `config.json` in the output directory.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        let path = dir.join("config.json");
        std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}
