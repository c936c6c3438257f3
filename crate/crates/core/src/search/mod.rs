//! Sequential model-based search over genotypes.
//!
//! Each trial suggests a genotype (uniformly during start-up, then from the
//! Tree Parzen Estimator), evaluates it and appends the result to the history.
//! Suggestions and trial evaluations draw their randomness from seeds derived
//! from the search seed and the trial index, so a search resumed from its
//! history file continues exactly as an uninterrupted run would.

mod history;
mod tpe;

pub use history::{History, HistoryWriter, Trial};
pub use tpe::{
    fit_density, random_suggest, split_history, tpe_suggest, GammaRule, PositionDensity, TpeConfig,
};

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

use crate::analysis::{aggregate_runs, RunSummary};
use crate::error::{Error, Result};
use crate::layout::{EdgeSet, Genotype};
use crate::seed;

/// Qubit count and entanglement level of a search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub n_qubits: usize,
    pub k: usize,
}

impl SearchSpace {
    pub fn new(n_qubits: usize, k: usize) -> Result<Self> {
        let edges = EdgeSet::new(n_qubits)?.len();
        if k > edges {
            return Err(Error::LevelTooLarge { k, edges });
        }
        Ok(Self { n_qubits, k })
    }

    /// `E = n(n - 1)`.
    pub fn n_edges(&self) -> usize {
        self.n_qubits * (self.n_qubits - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    #[default]
    Tpe,
    Random,
}

impl Sampler {
    pub fn name(self) -> &'static str {
        match self {
            Sampler::Tpe => "tpe",
            Sampler::Random => "random",
        }
    }
}

impl std::str::FromStr for Sampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tpe" => Ok(Sampler::Tpe),
            "random" => Ok(Sampler::Random),
            other => Err(Error::Config(format!(
                "unknown sampler `{other}` (expected tpe or random)"
            ))),
        }
    }
}

/// Persistence and seeding options that do not change the sampler itself.
#[derive(Debug, Clone, Default)]
pub struct SearchOptions<'a> {
    /// JSON-lines file written after every trial.
    pub history_path: Option<&'a Path>,
    /// Continue from the trials already in `history_path`.
    pub resume: bool,
    /// Store wall time per trial (makes history files run-dependent).
    pub record_seconds: bool,
    /// Genotypes evaluated first, in order, before any sampling.
    pub initial_genotypes: Vec<Genotype>,
}

/// Seed handed to the objective for trial `index`.
pub fn trial_seed(search_seed: u64, index: usize) -> u64 {
    seed::derive(search_seed, "trial", index as u64)
}

/// Runs `config.n_trials` trials of `objective(genotype, trial_seed)`.
///
/// An objective that returns a non-finite value or fails with
/// [`Error::Diverged`] yields a pruned trial; any other error aborts the search.
pub fn smbo_search<F>(
    space: SearchSpace,
    mut objective: F,
    sampler: Sampler,
    config: &TpeConfig,
    options: &SearchOptions<'_>,
) -> Result<History>
where
    F: FnMut(&Genotype, u64) -> Result<f64>,
{
    config.validate()?;
    for g in &options.initial_genotypes {
        if g.k() != space.k {
            return Err(Error::GenotypeLength {
                expected: space.k,
                actual: g.k(),
            });
        }
        g.validate(space.n_edges())?;
    }
    let (mut writer, mut history) = match options.history_path {
        Some(path) => {
            let (w, h) = HistoryWriter::open(path, space, options.resume)?;
            (Some(w), h)
        }
        None => (None, History::new(space)),
    };

    for index in history.len()..config.n_trials {
        let genotype = suggest(&history, index, sampler, config, options)?;
        let started = Instant::now();
        let objective_value = match objective(&genotype, trial_seed(config.seed, index)) {
            Ok(v) if v.is_finite() => {
                if v < 0.0 {
                    return Err(Error::Data(format!("objective returned negative loss {v}")));
                }
                Some(v)
            }
            Ok(_) | Err(Error::Diverged { .. }) => None,
            Err(e) => return Err(e),
        };
        let trial = Trial {
            index,
            genotype: genotype.entries().to_vec(),
            k: space.k,
            n_qubits: space.n_qubits,
            objective: objective_value,
            seconds: options
                .record_seconds
                .then(|| started.elapsed().as_secs_f64()),
        };
        match objective_value {
            Some(v) => log::info!("trial {index} {genotype} loss {v:.6}"),
            None => log::warn!("trial {index} {genotype} pruned"),
        }
        if let Some(w) = &mut writer {
            w.append(&trial)?;
        }
        history.push(trial)?;
    }
    Ok(history)
}

fn suggest(
    history: &History,
    index: usize,
    sampler: Sampler,
    config: &TpeConfig,
    options: &SearchOptions<'_>,
) -> Result<Genotype> {
    if let Some(g) = options.initial_genotypes.get(index) {
        return Ok(g.clone());
    }
    let mut rng = seed::rng(config.seed, "suggest", index as u64);
    let completed = history.completed().count();
    let warm = index >= config.n_startup_trials && completed >= config.n_startup_trials.max(2);
    match sampler {
        Sampler::Tpe if warm => tpe_suggest(history, config, &mut rng),
        _ => random_suggest(history.space, &mut rng),
    }
}

/// Planted benchmark: loss is the number of target edges missing from the
/// genotype, so any ordering of the target set scores 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedObjective {
    target: Vec<bool>,
    k: usize,
}

impl PlantedObjective {
    pub fn new(target: &Genotype, n_edges: usize) -> Result<Self> {
        target.validate(n_edges)?;
        let mut mask = vec![false; n_edges];
        target.entries().iter().for_each(|&e| mask[e] = true);
        Ok(Self {
            target: mask,
            k: target.k(),
        })
    }

    pub fn loss(&self, genotype: &Genotype) -> f64 {
        let hits = genotype
            .entries()
            .iter()
            .filter(|&&e| self.target.get(e).copied().unwrap_or(false))
            .count();
        self.k.saturating_sub(hits) as f64
    }
}

/// Outcome of the search at one level `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub k: usize,
    pub best: Trial,
    /// Objective of the best genotype re-evaluated under fresh seeds.
    pub repeats: RunSummary,
}

/// Searches each level in `k_values` and re-evaluates every level's best
/// genotype `n_repeats` times. With `history_dir`, level `k` persists to
/// `history_k{k}.jsonl`.
pub fn k_sweep<F>(
    n_qubits: usize,
    k_values: &[usize],
    mut objective: F,
    sampler: Sampler,
    config: &TpeConfig,
    n_repeats: usize,
    history_dir: Option<&Path>,
) -> Result<Vec<SweepEntry>>
where
    F: FnMut(&Genotype, u64) -> Result<f64>,
{
    if k_values.is_empty() {
        return Err(Error::Config("k sweep needs at least one level".into()));
    }
    if n_repeats == 0 {
        return Err(Error::Config("k sweep needs n_repeats >= 1".into()));
    }
    let spaces = k_values
        .iter()
        .map(|&k| SearchSpace::new(n_qubits, k))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(spaces.len());
    for space in spaces {
        let path = history_dir.map(|d| d.join(format!("history_k{}.jsonl", space.k)));
        let options = SearchOptions {
            history_path: path.as_deref(),
            ..Default::default()
        };
        let history = smbo_search(space, &mut objective, sampler, config, &options)?;
        let best = history
            .best()
            .cloned()
            .ok_or(Error::Empty("every trial of the level was pruned"))?;
        let genotype = best.genotype();
        let mut values = Vec::with_capacity(n_repeats);
        for r in 0..n_repeats {
            let s = seed::derive(config.seed, "repeat", r as u64);
            match objective(&genotype, s) {
                Ok(v) if v.is_finite() => values.push(v),
                Ok(_) | Err(Error::Diverged { .. }) => {
                    log::warn!("k={} repeat {r} diverged", space.k)
                }
                Err(e) => return Err(e),
            }
        }
        let repeats = aggregate_runs(&values, "val_loss")?;
        log::info!(
            "k={} best trial {} loss {:.6}, repeats {:.6} ± {:.6}",
            space.k,
            best.index,
            best.loss(),
            repeats.mean,
            repeats.std
        );
        out.push(SweepEntry {
            k: space.k,
            best,
            repeats,
        });
    }
    Ok(out)
}
