use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

use super::{History, SearchSpace, Trial};
use crate::error::{Error, Result};
use crate::layout::Genotype;

/// Size of the "good" group for `n` completed trials:
/// `min(ceil(fraction·n), cap)`, kept within `1..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRule {
    pub fraction: f64,
    pub cap: usize,
}

impl Default for GammaRule {
    fn default() -> Self {
        Self {
            fraction: 0.1,
            cap: 25,
        }
    }
}

impl GammaRule {
    pub fn n_good(&self, n: usize) -> usize {
        let raw = ((self.fraction * n as f64).ceil() as usize).min(self.cap);
        raw.clamp(1, n.saturating_sub(1).max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TpeConfig {
    pub n_startup_trials: usize,
    pub n_trials: usize,
    pub n_ei_candidates: usize,
    pub gamma: GammaRule,
    /// Total prior pseudo-count per position, spread evenly over the `E`
    /// edges. `None` means `E`, one pseudo-count per edge.
    pub prior_weight: Option<f64>,
    /// Redraws when the winning candidate was already evaluated.
    pub max_resamples: usize,
    pub seed: u64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            n_startup_trials: 20,
            n_trials: 300,
            n_ei_candidates: 1000,
            gamma: GammaRule::default(),
            prior_weight: None,
            max_resamples: 10,
            seed: 0,
        }
    }
}

impl TpeConfig {
    pub fn prior_weight_for(&self, n_edges: usize) -> f64 {
        self.prior_weight.unwrap_or(n_edges as f64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_ei_candidates == 0 {
            return Err(Error::Config("n_ei_candidates must be >= 1".into()));
        }
        if let Some(w) = self.prior_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("prior_weight {w} must be positive")));
            }
        }
        if !(self.gamma.fraction > 0.0 && self.gamma.fraction <= 1.0) || self.gamma.cap == 0 {
            return Err(Error::Config(
                "gamma fraction must lie in (0, 1] with cap >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// Splits the completed trials into the `gamma(n)` lowest losses and the
/// rest. Ties go to the earlier trial. Pruned trials are ignored.
pub fn split_history<'h>(
    history: &'h History,
    gamma: &GammaRule,
) -> Result<(Vec<&'h Trial>, Vec<&'h Trial>)> {
    let mut done: Vec<&Trial> = history.completed().collect();
    if done.len() < 2 {
        return Err(Error::InsufficientHistory {
            have: done.len(),
            need: 2,
        });
    }
    done.sort_by(|a, b| a.loss().total_cmp(&b.loss()).then(a.index.cmp(&b.index)));
    let rest = done.split_off(gamma.n_good(done.len()));
    Ok((done, rest))
}

/// Independent smoothed categorical per genotype position.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionDensity {
    /// `probs[i][e]`: probability of edge `e` at position `i`.
    pub probs: Vec<Vec<f64>>,
}

/// `prob(i, e) ∝ prior_weight / E + count(e at i)`.
pub fn fit_density(
    trials: &[&Trial],
    n_edges: usize,
    k: usize,
    prior_weight: f64,
) -> Result<PositionDensity> {
    let mut counts = vec![vec![prior_weight / n_edges as f64; n_edges]; k];
    for t in trials {
        if t.genotype.len() != k {
            return Err(Error::GenotypeLength {
                expected: k,
                actual: t.genotype.len(),
            });
        }
        for (pos, &e) in t.genotype.iter().enumerate() {
            if e >= n_edges {
                return Err(Error::EdgeOutOfRange {
                    index: e,
                    edges: n_edges,
                });
            }
            counts[pos][e] += 1.0;
        }
    }
    let total = prior_weight + trials.len() as f64;
    for row in &mut counts {
        row.iter_mut().for_each(|c| *c /= total);
    }
    Ok(PositionDensity { probs: counts })
}

impl PositionDensity {
    /// Draws a genotype position by position, masking edges already used.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let n_edges = self.probs.first().map_or(0, Vec::len);
        let mut used = vec![false; n_edges];
        let mut out = Vec::with_capacity(self.probs.len());
        for row in &self.probs {
            let total: f64 = row
                .iter()
                .zip(&used)
                .filter(|(_, u)| !**u)
                .map(|(p, _)| p)
                .sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for (e, p) in row.iter().enumerate() {
                if used[e] {
                    continue;
                }
                pick = Some(e);
                if u < *p {
                    break;
                }
                u -= p;
            }
            // rounding can leave `u` past the end; the last free edge absorbs it
            let e = pick.expect("k <= E leaves a free edge");
            used[e] = true;
            out.push(e);
        }
        out
    }

    /// `Σ_i ln probs[i][genotype[i]]`.
    pub fn log_prob(&self, genotype: &[usize]) -> f64 {
        genotype
            .iter()
            .zip(&self.probs)
            .map(|(&e, row)| row[e].ln())
            .sum()
    }
}

/// Proposes the next genotype: draws `n_ei_candidates` from the good-group
/// density `l` and keeps the one maximising `l/g` (first on ties). A winner
/// that was already evaluated triggers a fresh batch, up to `max_resamples`
/// times, after which the duplicate is accepted.
pub fn tpe_suggest<R: Rng + ?Sized>(
    history: &History,
    config: &TpeConfig,
    rng: &mut R,
) -> Result<Genotype> {
    let space = history.space;
    let have = history.completed().count();
    let need = config.n_startup_trials.max(2);
    if have < need {
        return Err(Error::InsufficientHistory { have, need });
    }
    let (good, rest) = split_history(history, &config.gamma)?;
    let e = space.n_edges();
    let w = config.prior_weight_for(e);
    let l = fit_density(&good, e, space.k, w)?;
    let g = fit_density(&rest, e, space.k, w)?;
    let seen: HashSet<&[usize]> = history
        .trials
        .iter()
        .map(|t| t.genotype.as_slice())
        .collect();

    let mut winner = Vec::new();
    for _ in 0..=config.max_resamples {
        let mut best_score = f64::NEG_INFINITY;
        for _ in 0..config.n_ei_candidates {
            let cand = l.sample(rng);
            let score = l.log_prob(&cand) - g.log_prob(&cand);
            if score > best_score || winner.is_empty() {
                best_score = score;
                winner = cand;
            }
        }
        if !seen.contains(winner.as_slice()) {
            break;
        }
    }
    Ok(Genotype::from_raw(winner))
}

/// Uniform draw from the level-`k` space.
pub fn random_suggest<R: Rng + ?Sized>(space: SearchSpace, rng: &mut R) -> Result<Genotype> {
    crate::layout::random_genotype(space.n_qubits, space.k, rng)
}
