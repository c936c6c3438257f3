//! Cross-entropy training with Adam or momentum SGD.

mod loss;
mod optim;

pub use loss::{softmax, softmax_cross_entropy, softmax_cross_entropy_grad};
pub use optim::{Optimizer, OptimizerConfig};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::Classifier;
use crate::seed;

/// Step decay: the learning rate is multiplied by `factor` every `period` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LrDecay {
    pub factor: f64,
    pub period: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub lr_decay: Option<LrDecay>,
    pub max_epochs: usize,
    /// Stop after this many epochs without a new best validation loss.
    #[serde(default)]
    pub early_stop_patience: Option<usize>,
    /// `None` trains full-batch.
    #[serde(default)]
    pub batch_size: Option<usize>,
    /// Seeds minibatch shuffling only; initial weights come from the model.
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    /// Adam(0.5, 0.9, 0.999), decay 0.97 every 2 epochs, full batch.
    pub fn standalone(max_epochs: usize) -> Self {
        Self {
            optimizer: OptimizerConfig::Adam {
                lr: 0.5,
                beta1: 0.9,
                beta2: 0.999,
            },
            lr_decay: Some(LrDecay {
                factor: 0.97,
                period: 2,
            }),
            max_epochs,
            early_stop_patience: None,
            batch_size: None,
            seed: 0,
        }
    }

    /// SGD(0.5, momentum 0.9), batches of 32, early stopping after 10 stale
    /// epochs, capped at 200 epochs.
    pub fn hybrid() -> Self {
        Self {
            optimizer: OptimizerConfig::Sgd {
                lr: 0.5,
                momentum: 0.9,
            },
            lr_decay: None,
            max_epochs: 200,
            early_stop_patience: Some(10),
            batch_size: Some(32),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if let Some(d) = self.lr_decay {
            if !(d.factor > 0.0 && d.factor <= 1.0) || d.period == 0 {
                return Err(Error::Config(format!(
                    "lr decay factor {} must lie in (0, 1] with a period >= 1",
                    d.factor
                )));
            }
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be >= 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.early_stop_patience == Some(0) {
            return Err(Error::Config("early_stop_patience must be >= 1".into()));
        }
        Ok(())
    }

    /// Learning rate used during `epoch` (1-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let lr = self.optimizer.lr();
        match self.lr_decay {
            Some(d) => lr * d.factor.powi(((epoch - 1) / d.period) as i32),
            None => lr,
        }
    }
}

/// Loss and accuracy on one data subset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    /// Epoch 0 is the untrained model.
    pub curve: Vec<EpochRecord>,
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Parameters at `best_epoch`; the model is left holding them too.
    pub params: Vec<f64>,
}

impl TrainResult {
    /// Writes `epoch,train_loss,val_loss,val_acc`.
    pub fn write_curve_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "epoch,train_loss,val_loss,val_acc")?;
        for r in &self.curve {
            writeln!(
                out,
                "{},{},{},{}",
                r.epoch, r.train_loss, r.val_loss, r.val_acc
            )?;
        }
        Ok(())
    }
}

/// Mean cross-entropy and argmax accuracy.
pub fn evaluate<M: Classifier + ?Sized>(model: &M, data: &Dataset) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation subset"));
    }
    let mut loss = 0.0;
    let mut hits = 0usize;
    for (x, &y) in data.x.iter().zip(&data.y) {
        let logits = model.logits(x)?;
        loss += softmax_cross_entropy(&logits, y)?;
        if argmax(&logits) == y {
            hits += 1;
        }
    }
    let n = data.len() as f64;
    Ok(Evaluation {
        loss: loss / n,
        accuracy: hits as f64 / n,
    })
}

/// Index of the largest value, first on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Trains `model` and restores the parameters of the best validation epoch.
///
/// Fails with [`Error::Diverged`] as soon as a loss or gradient turns
/// non-finite.
pub fn train_model<M: Classifier + ?Sized>(
    model: &mut M,
    train: &Dataset,
    val: &Dataset,
    config: &TrainConfig,
) -> Result<TrainResult> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("training partition"));
    }
    if val.is_empty() {
        return Err(Error::Empty("validation partition"));
    }
    let n_params = model.param_count();
    let mut params = model.params();
    let mut optimizer = Optimizer::new(&config.optimizer, n_params);
    let mut grad = vec![0.0; n_params];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let batch = config.batch_size.unwrap_or(train.len()).min(train.len());

    let record = |model: &M, epoch: usize| -> Result<EpochRecord> {
        let t = evaluate(model, train)?;
        let v = evaluate(model, val)?;
        if !(t.loss.is_finite() && v.loss.is_finite()) {
            return Err(Error::Diverged { epoch });
        }
        Ok(EpochRecord {
            epoch,
            train_loss: t.loss,
            train_acc: t.accuracy,
            val_loss: v.loss,
            val_acc: v.accuracy,
        })
    };

    let mut curve = vec![record(model, 0)?];
    let mut best_val_loss = curve[0].val_loss;
    let mut best_epoch = 0;
    let mut best_params = params.clone();

    for epoch in 1..=config.max_epochs {
        let lr = config.lr_at(epoch);
        if config.batch_size.is_some() {
            order.shuffle(&mut seed::rng(config.seed, "batch", epoch as u64));
        }
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                model.accumulate_gradient(&train.x[i], train.y[i], &mut grad)?;
            }
            let scale = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            optimizer.step(&mut params, &grad, lr);
            model.set_params(&params)?;
        }
        let r = record(model, epoch)?;
        curve.push(r);
        if r.val_loss < best_val_loss {
            best_val_loss = r.val_loss;
            best_epoch = epoch;
            best_params.copy_from_slice(&params);
        }
        if let Some(p) = config.early_stop_patience {
            if epoch - best_epoch >= p {
                break;
            }
        }
    }

    model.set_params(&best_params)?;
    Ok(TrainResult {
        epochs_run: curve.len() - 1,
        curve,
        best_val_loss,
        best_epoch,
        params: best_params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{builtin, stratified_split, Builtin, DEFAULT_FRACTIONS};
    use crate::layout::{ring_genotype, Genotype, Ring};
    use crate::model::{AnsatzSpec, HybridEncoder, LinearHead, QuantumClassifier};
    use approx::assert_abs_diff_eq;
    use rand::Rng as _;

    fn iris_parts() -> (Dataset, Dataset) {
        let d = builtin(Builtin::Iris).unwrap();
        let s = stratified_split(&d, DEFAULT_FRACTIONS, 1).unwrap();
        (d.subset(&s.train), d.subset(&s.validation))
    }

    fn ring_model(seed: u64) -> QuantumClassifier {
        let spec = AnsatzSpec::new(4, 2, ring_genotype(4, Ring::Ring1).unwrap()).unwrap();
        QuantumClassifier::init(spec, 3, None, &mut seed::rng(seed, "init", 0)).unwrap()
    }

    #[test]
    fn lr_zero_leaves_params_and_curve_flat() {
        let (train, val) = iris_parts();
        let mut model = ring_model(3);
        let before = model.params();
        let mut cfg = TrainConfig::standalone(5);
        cfg.optimizer = OptimizerConfig::Adam {
            lr: 0.0,
            beta1: 0.9,
            beta2: 0.999,
        };
        let r = train_model(&mut model, &train, &val, &cfg).unwrap();
        assert_eq!(model.params(), before);
        assert_eq!(r.curve.len(), 6);
        assert!(r.curve.iter().all(|e| e.val_loss == r.curve[0].val_loss));
        assert_eq!(r.best_epoch, 0);
    }

    #[test]
    fn seeded_runs_are_bit_identical() {
        let (train, val) = iris_parts();
        let mut cfg = TrainConfig::hybrid();
        cfg.max_epochs = 4;
        cfg.batch_size = Some(16);
        cfg.optimizer = OptimizerConfig::Sgd {
            lr: 0.1,
            momentum: 0.9,
        };
        cfg.seed = 9;
        let a = train_model(&mut ring_model(5), &train, &val, &cfg).unwrap();
        let b = train_model(&mut ring_model(5), &train, &val, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn iris_ring_validation_loss_drops() {
        let (train, val) = iris_parts();
        let mut model = ring_model(11);
        let r = train_model(&mut model, &train, &val, &TrainConfig::standalone(50)).unwrap();
        let start = r.curve[0].val_loss;
        assert!(
            r.best_val_loss <= 0.7 * start,
            "val loss {start} -> {}",
            r.best_val_loss
        );
        assert_eq!(
            r.best_val_loss,
            r.curve
                .iter()
                .map(|e| e.val_loss)
                .fold(f64::INFINITY, f64::min)
        );
        // the model holds the best-epoch parameters
        assert_abs_diff_eq!(
            evaluate(&model, &val).unwrap().loss,
            r.best_val_loss,
            epsilon = 1e-12
        );
    }

    #[test]
    fn early_stopping_never_passes_the_best_epoch() {
        let (train, val) = iris_parts();
        let mut cfg = TrainConfig::hybrid();
        cfg.max_epochs = 60;
        cfg.early_stop_patience = Some(3);
        cfg.optimizer = OptimizerConfig::Sgd {
            lr: 0.5,
            momentum: 0.9,
        };
        let mut model = ring_model(2);
        let r = train_model(&mut model, &train, &val, &cfg).unwrap();
        assert!(r.best_epoch <= r.epochs_run);
        if r.epochs_run < 60 {
            assert_eq!(r.epochs_run, r.best_epoch + 3);
        }
        assert_eq!(model.params(), r.params);
    }

    #[test]
    fn evaluate_bounds() {
        let spec = AnsatzSpec::new(4, 1, Genotype::new(vec![], 12).unwrap()).unwrap();
        // zero head: constant logits, argmax always class 0
        let model =
            QuantumClassifier::from_parts(spec, vec![0.0; 4], LinearHead::zeros(4, 3), None)
                .unwrap();
        let iris = builtin(Builtin::Iris).unwrap();
        let e = evaluate(&model, &iris).unwrap();
        assert_abs_diff_eq!(e.accuracy, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.loss, 3f64.ln(), epsilon = 1e-12);
        assert!(evaluate(&model, &iris.subset(&[])).is_err());
    }

    #[test]
    fn separable_toy_set_is_learned_perfectly() {
        // class = sign of feature 0 on a 2-qubit model
        let x: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let s = if i % 2 == 0 { 1.0 } else { -1.0 };
                vec![s * 1.2, 0.1 * i as f64 / 20.0]
            })
            .collect();
        let y = (0..20).map(|i| i % 2).collect();
        let d = Dataset::new(
            "toy",
            vec!["a".into(), "b".into()],
            vec!["p".into(), "n".into()],
            x,
            y,
        )
        .unwrap();
        let spec = AnsatzSpec::new(2, 1, Genotype::new(vec![0], 2).unwrap()).unwrap();
        let mut model =
            QuantumClassifier::init(spec, 2, None, &mut seed::rng(0, "init", 0)).unwrap();
        train_model(&mut model, &d, &d, &TrainConfig::standalone(80)).unwrap();
        assert_eq!(evaluate(&model, &d).unwrap().accuracy, 1.0);
    }

    #[test]
    fn full_gradient_matches_finite_differences() {
        let mut rng = seed::rng(4, "fd", 0);
        let spec = AnsatzSpec::new(2, 2, Genotype::new(vec![1, 0], 2).unwrap()).unwrap();
        let mut model = QuantumClassifier::init(spec, 3, Some(&[5, 4, 3, 2]), &mut rng).unwrap();
        assert!(model.encoder.as_ref().map(HybridEncoder::param_count) == Some(24 + 15 + 8));
        let x: Vec<f64> = (0..5).map(|_| rng.random_range(-1.5..1.5)).collect();
        let label = 2;
        let p0 = model.params();
        let mut grad = vec![0.0; p0.len()];
        model.accumulate_gradient(&x, label, &mut grad).unwrap();
        let h = 1e-5;
        for j in 0..p0.len() {
            let mut loss_at = |v: f64| {
                let mut p = p0.clone();
                p[j] = v;
                model.set_params(&p).unwrap();
                softmax_cross_entropy(&model.logits(&x).unwrap(), label).unwrap()
            };
            let fd = (loss_at(p0[j] + h) - loss_at(p0[j] - h)) / (2.0 * h);
            let tol = 1e-4 * fd.abs().max(1e-3);
            assert!(
                (fd - grad[j]).abs() <= tol,
                "param {j}: fd {fd} analytic {}",
                grad[j]
            );
        }
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::standalone(10);
        assert!(c.validate().is_ok());
        c.lr_decay = Some(LrDecay {
            factor: 0.0,
            period: 2,
        });
        assert!(c.validate().is_err());
        c = TrainConfig::hybrid();
        c.batch_size = Some(0);
        assert!(c.validate().is_err());
        let c = TrainConfig::standalone(10);
        assert_abs_diff_eq!(c.lr_at(1), 0.5);
        assert_abs_diff_eq!(c.lr_at(2), 0.5);
        assert_abs_diff_eq!(c.lr_at(3), 0.5 * 0.97);
        assert_abs_diff_eq!(c.lr_at(6), 0.5 * 0.97 * 0.97);
    }

    #[test]
    fn curve_csv_shape() {
        let r = TrainResult {
            curve: vec![EpochRecord {
                epoch: 0,
                train_loss: 1.0,
                train_acc: 0.5,
                val_loss: 2.0,
                val_acc: 0.25,
            }],
            best_val_loss: 2.0,
            best_epoch: 0,
            epochs_run: 0,
            params: vec![],
        };
        let mut buf = Vec::new();
        r.write_curve_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,train_loss,val_loss,val_acc\n0,1,2,0.25\n"
        );
    }
}
