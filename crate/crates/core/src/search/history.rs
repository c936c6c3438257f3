use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::SearchSpace;
use crate::error::{Error, Result};
use crate::layout::Genotype;

/// One evaluated genotype. `objective = None` marks a pruned trial (its loss
/// counts as `+∞`); it is written as JSON `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub genotype: Vec<usize>,
    pub k: usize,
    pub n_qubits: usize,
    pub objective: Option<f64>,
    /// Wall time of the evaluation, only recorded on request so that history
    /// files stay byte-identical across reruns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seconds: Option<f64>,
}

impl Trial {
    /// The objective with pruned trials mapped to `+∞`.
    pub fn loss(&self) -> f64 {
        self.objective.unwrap_or(f64::INFINITY)
    }

    pub fn is_complete(&self) -> bool {
        self.objective.is_some()
    }

    pub fn genotype(&self) -> Genotype {
        Genotype::from_raw(self.genotype.clone())
    }
}

/// Ordered trials over one search space.
#[derive(Debug, Clone, PartialEq)]
pub struct History {
    pub space: SearchSpace,
    pub trials: Vec<Trial>,
}

impl History {
    pub fn new(space: SearchSpace) -> Self {
        Self {
            space,
            trials: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn completed(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| t.is_complete())
    }

    /// Lowest-loss completed trial, earliest on ties.
    pub fn best(&self) -> Option<&Trial> {
        self.completed()
            .fold(None, |best: Option<&Trial>, t| match best {
                Some(b) if b.loss() <= t.loss() => Some(b),
                _ => Some(t),
            })
    }

    /// Best loss seen up to and including each trial.
    pub fn running_minimum(&self) -> Vec<f64> {
        let mut best = f64::INFINITY;
        self.trials
            .iter()
            .map(|t| {
                best = best.min(t.loss());
                best
            })
            .collect()
    }

    /// Index of the first trial whose objective is at most `target`.
    pub fn first_reaching(&self, target: f64) -> Option<usize> {
        self.trials
            .iter()
            .find(|t| t.objective.is_some_and(|o| o <= target))
            .map(|t| t.index)
    }

    /// Adds a trial after checking index order and genotype validity.
    pub fn push(&mut self, trial: Trial) -> Result<()> {
        self.check(&trial, self.trials.len())?;
        self.trials.push(trial);
        Ok(())
    }

    fn check(&self, t: &Trial, expected_index: usize) -> Result<()> {
        if t.index != expected_index {
            return Err(Error::Data(format!(
                "trial index {} out of sequence (expected {expected_index})",
                t.index
            )));
        }
        if t.n_qubits != self.space.n_qubits || t.k != self.space.k {
            return Err(Error::Data(format!(
                "trial {} is for n_qubits={}, k={} but the search space is n_qubits={}, k={}",
                t.index, t.n_qubits, t.k, self.space.n_qubits, self.space.k
            )));
        }
        if t.genotype.len() != t.k {
            return Err(Error::GenotypeLength {
                expected: t.k,
                actual: t.genotype.len(),
            });
        }
        Genotype::new(t.genotype.clone(), self.space.n_edges())?;
        if let Some(o) = t.objective {
            if !(o.is_finite() && o >= 0.0) {
                return Err(Error::Data(format!("trial {} has objective {o}", t.index)));
            }
        }
        Ok(())
    }

    /// Parses JSON lines (blank lines ignored).
    pub fn from_jsonl(space: SearchSpace, text: &str) -> Result<Self> {
        let mut h = History::new(space);
        for (line_no, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let t: Trial = serde_json::from_str(line)
                .map_err(|e| Error::json(format!("history line {}", line_no + 1), e))?;
            h.push(t)?;
        }
        Ok(h)
    }

    /// Loads a history file, taking the space from its first line.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let first = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or(Error::Empty("history file has no trials"))?;
        let t: Trial =
            serde_json::from_str(first).map_err(|e| Error::json(path.display().to_string(), e))?;
        Self::from_jsonl(SearchSpace::new(t.n_qubits, t.k)?, &text)
    }

    pub fn to_jsonl(&self) -> String {
        self.trials.iter().map(|t| trial_line(t) + "\n").collect()
    }
}

fn trial_line(t: &Trial) -> String {
    serde_json::to_string(t).expect("trial serialises")
}

/// Appends trials to a JSON-lines file, flushing after each one.
#[derive(Debug)]
pub struct HistoryWriter {
    path: PathBuf,
    file: File,
}

impl HistoryWriter {
    /// Opens `path` for a search over `space`. With `resume`, existing trials
    /// are loaded and returned; otherwise the file is truncated.
    pub fn open(
        path: impl AsRef<Path>,
        space: SearchSpace,
        resume: bool,
    ) -> Result<(Self, History)> {
        let path = path.as_ref().to_path_buf();
        let history = if resume && path.exists() {
            let mut text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            // a line without its newline was cut off mid-write
            if !text.ends_with('\n') {
                text.truncate(text.rfind('\n').map_or(0, |i| i + 1));
            }
            History::from_jsonl(space, &text)?
        } else {
            History::new(space)
        };
        let file = if resume {
            // rewrite what was parsed so a torn last line cannot survive
            std::fs::write(&path, history.to_jsonl()).map_err(|e| Error::io(&path, e))?;
            OpenOptions::new().append(true).open(&path)
        } else {
            File::create(&path)
        }
        .map_err(|e| Error::io(&path, e))?;
        Ok((Self { path, file }, history))
    }

    pub fn append(&mut self, trial: &Trial) -> Result<()> {
        writeln!(self.file, "{}", trial_line(trial)).map_err(|e| Error::io(&self.path, e))?;
        self.file.flush().map_err(|e| Error::io(&self.path, e))
    }
}
