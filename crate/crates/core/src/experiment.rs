//! From a dataset description and a genotype to trained models, validation
//! losses, multi-run metrics, checkpoints and exported features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::data::{
    self, generate_synthetic, stratified_split, Builtin, CsvSchema, Dataset, Split, Standardizer,
    SynthConfig, DEFAULT_FRACTIONS, DEFAULT_SPLIT_SEED,
};
use crate::error::{Error, Result};
use crate::layout::{EdgeSet, Genotype};
use crate::model::{
    check_len, AnsatzSpec, Classifier, FeatureStage, HybridEncoder, LinearHead, QuantumClassifier,
};
use crate::seed;
use crate::train::{evaluate, softmax_cross_entropy_grad, train_model, TrainConfig, TrainResult};

/// Where the rows come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DatasetSource {
    Builtin {
        name: Builtin,
    },
    Synthetic {
        #[serde(default)]
        config: SynthConfig,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
        schema: PathBuf,
    },
}

impl DatasetSource {
    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Builtin { name } => data::builtin(*name),
            DatasetSource::Synthetic { config, seed } => generate_synthetic(config, *seed),
            DatasetSource::Csv { path, schema } => {
                let schema = CsvSchema::from_json_file(schema)?;
                data::load_csv(path, &schema)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Raw features are the rotation angles; needs `n_features = n_qubits`.
    #[default]
    Standalone,
    /// Standardised features pass through a classical encoder first.
    Hybrid,
}

/// Everything needed to turn a genotype into a trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub mode: Mode,
    pub n_qubits: usize,
    #[serde(default = "default_depth")]
    pub depth: usize,
    /// Encoder widths `[p, h1, h2, n_qubits]`; hybrid mode only.
    #[serde(default)]
    pub encoder_dims: Option<Vec<usize>>,
    #[serde(default = "default_fractions")]
    pub split_fractions: (f64, f64, f64),
    #[serde(default = "default_split_seed")]
    pub split_seed: u64,
    pub train: TrainConfig,
}

fn default_depth() -> usize {
    2
}

fn default_fractions() -> (f64, f64, f64) {
    DEFAULT_FRACTIONS
}

fn default_split_seed() -> u64 {
    DEFAULT_SPLIT_SEED
}

impl ExperimentConfig {
    /// Settings used for the bundled datasets: stand-alone depth-2 models with
    /// Adam for Iris (50 epochs) and synthetic data (100 epochs), hybrid models
    /// with SGD and early stopping for Wine and Breast Cancer.
    pub fn preset(dataset: DatasetSource) -> Self {
        let (mode, encoder_dims, train) = match &dataset {
            DatasetSource::Builtin {
                name: Builtin::Wine,
            } => (Mode::Hybrid, Some(vec![13, 8, 6, 4]), TrainConfig::hybrid()),
            DatasetSource::Builtin {
                name: Builtin::BreastCancer,
            } => (
                Mode::Hybrid,
                Some(vec![30, 16, 8, 4]),
                TrainConfig::hybrid(),
            ),
            DatasetSource::Synthetic { .. } => {
                (Mode::Standalone, None, TrainConfig::standalone(100))
            }
            _ => (Mode::Standalone, None, TrainConfig::standalone(50)),
        };
        Self {
            dataset,
            mode,
            n_qubits: 4,
            depth: 2,
            encoder_dims,
            split_fractions: DEFAULT_FRACTIONS,
            split_seed: DEFAULT_SPLIT_SEED,
            train,
        }
    }

    pub fn validate(&self) -> Result<()> {
        EdgeSet::new(self.n_qubits)?;
        if self.depth == 0 {
            return Err(Error::Config("depth must be >= 1".into()));
        }
        self.train.validate()?;
        match (self.mode, &self.encoder_dims) {
            (Mode::Hybrid, None) => Err(Error::Config("hybrid mode needs encoder_dims".into())),
            (Mode::Hybrid, Some(dims)) => {
                if dims.len() != 4 || dims.contains(&0) {
                    return Err(Error::Config(format!(
                        "encoder_dims {dims:?} must be four positive widths"
                    )));
                }
                if dims[3] != self.n_qubits {
                    return Err(Error::Config(format!(
                        "encoder output width {} must equal n_qubits {}",
                        dims[3], self.n_qubits
                    )));
                }
                Ok(())
            }
            (Mode::Standalone, Some(_)) => Err(Error::Config(
                "encoder_dims is only used in hybrid mode".into(),
            )),
            (Mode::Standalone, None) => Ok(()),
        }
    }
}

/// A loaded, split and (in hybrid mode) standardised dataset.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    /// Model-ready rows (standardised in hybrid mode).
    pub data: Dataset,
    pub split: Split,
    pub standardizer: Option<Standardizer>,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Metrics of one seeded training run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: usize,
    pub seed: u64,
    pub best_epoch: usize,
    pub val_loss: f64,
    pub val_acc: f64,
    pub test_loss: f64,
    pub test_acc: f64,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let raw = config.dataset.load()?;
        let expected = match config.mode {
            Mode::Standalone => config.n_qubits,
            Mode::Hybrid => config.encoder_dims.as_ref().map_or(0, |d| d[0]),
        };
        if raw.n_features() != expected {
            return Err(Error::Config(format!(
                "dataset `{}` has {} features but the {:?} model expects {expected}",
                raw.name,
                raw.n_features(),
                config.mode
            )));
        }
        let split = stratified_split(&raw, config.split_fractions, config.split_seed)?;
        let (data, standardizer) = match config.mode {
            Mode::Standalone => (raw, None),
            Mode::Hybrid => {
                let s = Standardizer::fit(&raw.x, &split.train)?;
                if s.has_zero_variance() {
                    log::warn!("constant features in the training rows are only centred");
                }
                (
                    raw.with_features(s.transform(&raw.x), raw.feature_names.clone()),
                    Some(s),
                )
            }
        };
        Ok(Self {
            train: data.subset(&split.train),
            val: data.subset(&split.validation),
            test: data.subset(&split.test),
            config,
            data,
            split,
            standardizer,
        })
    }

    pub fn n_edges(&self) -> usize {
        self.config.n_qubits * (self.config.n_qubits - 1)
    }

    /// Freshly initialised model for `genotype`, weights drawn from `seed`.
    pub fn build_model(&self, genotype: &Genotype, seed: u64) -> Result<QuantumClassifier> {
        let spec = AnsatzSpec::new(self.config.n_qubits, self.config.depth, genotype.clone())?;
        let mut rng = seed::rng(seed, "init", 0);
        QuantumClassifier::init(
            spec,
            self.data.n_classes(),
            self.config.encoder_dims.as_deref(),
            &mut rng,
        )
    }

    /// Initialises and trains one model; minibatch order also follows `seed`.
    pub fn train_genotype(
        &self,
        genotype: &Genotype,
        seed: u64,
    ) -> Result<(QuantumClassifier, TrainResult)> {
        let mut model = self.build_model(genotype, seed)?;
        let mut cfg = self.config.train.clone();
        cfg.seed = seed::derive(seed, "batch", 0);
        let result = train_model(&mut model, &self.train, &self.val, &cfg)?;
        Ok((model, result))
    }

    /// Search objective: best validation loss of one seeded training run.
    pub fn objective(&self, genotype: &Genotype, seed: u64) -> Result<f64> {
        Ok(self.train_genotype(genotype, seed)?.1.best_val_loss)
    }

    /// Seed of evaluation run `run` under `base`.
    pub fn run_seed(base: u64, run: usize) -> u64 {
        seed::derive(base, "eval", run as u64)
    }

    /// Trains `n_runs` independently seeded models (in parallel) and reports
    /// validation and test metrics of each, in run order.
    pub fn evaluate_runs(
        &self,
        genotype: &Genotype,
        n_runs: usize,
        base_seed: u64,
    ) -> Result<Vec<RunMetrics>> {
        (0..n_runs)
            .into_par_iter()
            .map(|run| {
                let seed = Self::run_seed(base_seed, run);
                let (model, result) = self.train_genotype(genotype, seed)?;
                let val = evaluate(&model, &self.val)?;
                let test = evaluate(&model, &self.test)?;
                Ok(RunMetrics {
                    run,
                    seed,
                    best_epoch: result.best_epoch,
                    val_loss: val.loss,
                    val_acc: val.accuracy,
                    test_loss: test.loss,
                    test_acc: test.accuracy,
                })
            })
            .collect()
    }

    /// Pre- or post-ansatz features of every row of `rows`.
    pub fn features(
        &self,
        model: &QuantumClassifier,
        rows: &Dataset,
        stage: FeatureStage,
    ) -> Result<Vec<Vec<f64>>> {
        rows.x.iter().map(|x| model.features(x, stage)).collect()
    }

    pub fn checkpoint(&self, model: &QuantumClassifier) -> Checkpoint {
        Checkpoint::new(model, self.standardizer.clone())
    }
}

/// Writes per-run metrics as CSV.
pub fn write_metrics_csv(path: impl AsRef<Path>, runs: &[RunMetrics]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    for r in runs {
        w.serialize(r).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads per-run metrics written by [`write_metrics_csv`].
pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<RunMetrics>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let runs = r
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Cell {
                row: i + 2,
                column: "*".into(),
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<RunMetrics>>>()?;
    if runs.is_empty() {
        return Err(Error::Empty("metrics file has no runs"));
    }
    Ok(runs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointSpec {
    pub n_qubits: usize,
    pub depth: usize,
    pub k: usize,
    pub genotype: Vec<usize>,
}

/// Trained model plus the standardisation it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub spec: CheckpointSpec,
    pub quantum_weights: Vec<f64>,
    pub head: LinearHead,
    pub encoder: Option<HybridEncoder>,
    pub standardization: Option<Standardizer>,
}

impl Checkpoint {
    pub fn new(model: &QuantumClassifier, standardization: Option<Standardizer>) -> Self {
        let spec = model.spec();
        Self {
            spec: CheckpointSpec {
                n_qubits: spec.n_qubits,
                depth: spec.depth,
                k: spec.genotype.k(),
                genotype: spec.genotype.entries().to_vec(),
            },
            quantum_weights: model.quantum_weights.clone(),
            head: model.head.clone(),
            encoder: model.encoder.clone(),
            standardization,
        }
    }

    pub fn model(&self) -> Result<QuantumClassifier> {
        if self.spec.k != self.spec.genotype.len() {
            return Err(Error::GenotypeLength {
                expected: self.spec.k,
                actual: self.spec.genotype.len(),
            });
        }
        let edges = EdgeSet::new(self.spec.n_qubits)?;
        let genotype = Genotype::new(self.spec.genotype.clone(), edges.len())?;
        let spec = AnsatzSpec::new(self.spec.n_qubits, self.spec.depth, genotype)?;
        check_len(
            "head weights",
            self.head.n_features * self.head.n_classes,
            self.head.weights.len(),
        )?;
        check_len("head bias", self.head.n_classes, self.head.bias.len())?;
        QuantumClassifier::from_parts(
            spec,
            self.quantum_weights.clone(),
            self.head.clone(),
            self.encoder.clone(),
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("checkpoint", e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

/// Multinomial logistic regression used to probe exported features.
#[derive(Debug, Clone)]
struct LinearProbe {
    head: LinearHead,
}

impl Classifier for LinearProbe {
    fn n_inputs(&self) -> usize {
        self.head.n_features
    }

    fn n_classes(&self) -> usize {
        self.head.n_classes
    }

    fn param_count(&self) -> usize {
        self.head.param_count()
    }

    fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.head.write_params(&mut out);
        out
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("probe parameters", self.param_count(), params.len())?;
        self.head.read_params(params).map(|_| ())
    }

    fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("probe input", self.head.n_features, x.len())?;
        Ok(self.head.forward(x))
    }

    fn accumulate_gradient(&self, x: &[f64], label: usize, grad: &mut [f64]) -> Result<f64> {
        let (loss, d) = softmax_cross_entropy_grad(&self.logits(x)?, label)?;
        self.head.backward(x, &d, grad);
        Ok(loss)
    }
}

/// Test accuracy of a linear classifier fitted (full-batch Adam, 300 epochs,
/// best epoch on `train` itself) to `train` and scored on `test`.
pub fn linear_probe_accuracy(train: &Dataset, test: &Dataset) -> Result<f64> {
    let mut probe = LinearProbe {
        head: LinearHead::zeros(train.n_features(), train.n_classes()),
    };
    let cfg = TrainConfig {
        optimizer: crate::train::OptimizerConfig::Adam {
            lr: 0.05,
            beta1: 0.9,
            beta2: 0.999,
        },
        lr_decay: None,
        max_epochs: 300,
        early_stop_patience: None,
        batch_size: None,
        seed: 0,
    };
    train_model(&mut probe, train, train, &cfg)?;
    Ok(evaluate(&probe, test)?.accuracy)
}

/// Share of the most frequent class in `data`.
pub fn majority_rate(data: &Dataset) -> f64 {
    let counts = data.class_counts();
    *counts.iter().max().unwrap_or(&0) as f64 / data.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{ring_genotype, Ring};

    fn iris() -> Experiment {
        Experiment::prepare(ExperimentConfig::preset(DatasetSource::Builtin {
            name: Builtin::Iris,
        }))
        .unwrap()
    }

    #[test]
    fn iris_preset_shapes() {
        let e = iris();
        assert_eq!((e.train.len(), e.val.len(), e.test.len()), (90, 30, 30));
        assert!(e.standardizer.is_none());
        assert_eq!(e.data, data::builtin(Builtin::Iris).unwrap());
        let m = e
            .build_model(&ring_genotype(4, Ring::Ring1).unwrap(), 0)
            .unwrap();
        assert_eq!(m.param_count(), 23);
    }

    #[test]
    fn wine_is_standardised_on_training_rows_only() {
        let e = Experiment::prepare(ExperimentConfig::preset(DatasetSource::Builtin {
            name: Builtin::Wine,
        }))
        .unwrap();
        let s = e.standardizer.as_ref().unwrap();
        let raw = data::builtin(Builtin::Wine).unwrap();
        let refit = Standardizer::fit(&raw.x, &e.split.train).unwrap();
        assert_eq!(s, &refit);
        for j in 0..13 {
            let m: f64 = e.train.x.iter().map(|r| r[j]).sum::<f64>() / e.train.len() as f64;
            assert!(m.abs() < 1e-9);
        }
        let m = e
            .build_model(&ring_genotype(4, Ring::Ring1).unwrap(), 0)
            .unwrap();
        assert_eq!(m.param_count(), 194 + 8 + 15);
    }

    #[test]
    fn config_mismatches_are_rejected() {
        let mut c = ExperimentConfig::preset(DatasetSource::Builtin {
            name: Builtin::Wine,
        });
        c.mode = Mode::Standalone;
        c.encoder_dims = None;
        assert!(matches!(Experiment::prepare(c), Err(Error::Config(_))));
        let mut c = ExperimentConfig::preset(DatasetSource::Builtin {
            name: Builtin::Wine,
        });
        c.encoder_dims = Some(vec![13, 8, 6, 3]);
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::preset(DatasetSource::Builtin {
            name: Builtin::Iris,
        });
        c.n_qubits = 3;
        assert!(Experiment::prepare(c).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        for name in Builtin::ALL {
            let c = ExperimentConfig::preset(DatasetSource::Builtin { name });
            let text = serde_json::to_string(&c).unwrap();
            assert_eq!(serde_json::from_str::<ExperimentConfig>(&text).unwrap(), c);
        }
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"dataset": {"source": "synthetic"}, "n_qubits": 4,
                "train": {"optimizer": {"kind": "adam", "lr": 0.5, "beta1": 0.9, "beta2": 0.999}, "max_epochs": 3}}"#,
        )
        .unwrap();
        assert_eq!(c.depth, 2);
        assert!(Experiment::prepare(c).is_ok());
    }

    #[test]
    fn evaluation_runs_are_deterministic_and_checkpoints_round_trip() {
        let mut c = ExperimentConfig::preset(DatasetSource::Builtin {
            name: Builtin::Iris,
        });
        c.train.max_epochs = 5;
        let e = Experiment::prepare(c).unwrap();
        let g = ring_genotype(4, Ring::Ring2).unwrap();
        let a = e.evaluate_runs(&g, 3, 1).unwrap();
        assert_eq!(a, e.evaluate_runs(&g, 3, 1).unwrap());
        assert_eq!(a.iter().map(|r| r.run).collect::<Vec<_>>(), vec![0, 1, 2]);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_metrics_csv(&path, &a).unwrap();
        assert_eq!(read_metrics_csv(&path).unwrap(), a);

        let (model, _) = e.train_genotype(&g, 4).unwrap();
        let ck = e.checkpoint(&model);
        let p = dir.path().join("ck.json");
        ck.save(&p).unwrap();
        let back = Checkpoint::load(&p).unwrap().model().unwrap();
        assert_eq!(back.params(), model.params());
        assert_eq!(
            back.logits(&e.test.x[0]).unwrap(),
            model.logits(&e.test.x[0]).unwrap()
        );
    }

    #[test]
    fn exported_features_respect_bounds() {
        let mut c = ExperimentConfig::preset(DatasetSource::Builtin {
            name: Builtin::Wine,
        });
        c.train.max_epochs = 2;
        let e = Experiment::prepare(c).unwrap();
        let (model, _) = e
            .train_genotype(&ring_genotype(4, Ring::Ring1).unwrap(), 0)
            .unwrap();
        let pre = e.features(&model, &e.data, FeatureStage::Pre).unwrap();
        let post = e.features(&model, &e.data, FeatureStage::Post).unwrap();
        assert_eq!((pre.len(), post.len()), (178, 178));
        assert!(pre.iter().flatten().all(|v| v.abs() < std::f64::consts::PI));
        assert!(post.iter().flatten().all(|v| v.abs() <= 1.0 + 1e-12));

        let iris = iris();
        let m = iris
            .build_model(&ring_genotype(4, Ring::Ring1).unwrap(), 0)
            .unwrap();
        assert_eq!(
            iris.features(&m, &iris.data, FeatureStage::Pre).unwrap(),
            iris.data.x
        );
    }

    #[test]
    fn probe_on_separable_and_shuffled_labels() {
        let iris = data::builtin(Builtin::Iris).unwrap();
        let s = stratified_split(&iris, DEFAULT_FRACTIONS, 0).unwrap();
        let acc = linear_probe_accuracy(&iris.subset(&s.train), &iris.subset(&s.test)).unwrap();
        assert!(acc >= 0.9, "{acc}");
        assert!((majority_rate(&iris) - 1.0 / 3.0).abs() < 1e-12);
    }
}
