use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimiser choice and hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerConfig {
    Adam { lr: f64, beta1: f64, beta2: f64 },
    Sgd { lr: f64, momentum: f64 },
}

impl OptimizerConfig {
    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerConfig::Adam { lr, .. } | OptimizerConfig::Sgd { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            OptimizerConfig::Adam { lr, beta1, beta2 } => {
                if !(lr >= 0.0 && lr.is_finite()) {
                    return Err(Error::Config(format!("learning rate {lr} must be >= 0")));
                }
                if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
                    return Err(Error::Config(format!(
                        "Adam betas ({beta1}, {beta2}) must lie in [0, 1)"
                    )));
                }
            }
            OptimizerConfig::Sgd { lr, momentum } => {
                if !(lr >= 0.0 && lr.is_finite()) {
                    return Err(Error::Config(format!("learning rate {lr} must be >= 0")));
                }
                if !(0.0..1.0).contains(&momentum) {
                    return Err(Error::Config(format!(
                        "momentum {momentum} must lie in [0, 1)"
                    )));
                }
            }
        }
        Ok(())
    }
}

const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam {
        beta1: f64,
        beta2: f64,
        step: i32,
        m: Vec<f64>,
        v: Vec<f64>,
    },
    Sgd {
        momentum: f64,
        velocity: Vec<f64>,
    },
}

impl Optimizer {
    pub fn new(config: &OptimizerConfig, n_params: usize) -> Self {
        match *config {
            OptimizerConfig::Adam { beta1, beta2, .. } => Optimizer::Adam {
                beta1,
                beta2,
                step: 0,
                m: vec![0.0; n_params],
                v: vec![0.0; n_params],
            },
            OptimizerConfig::Sgd { momentum, .. } => Optimizer::Sgd {
                momentum,
                velocity: vec![0.0; n_params],
            },
        }
    }

    /// One update of `params` against `grad` at learning rate `lr`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            Optimizer::Adam {
                beta1,
                beta2,
                step,
                m,
                v,
            } => {
                *step += 1;
                let bc1 = 1.0 - beta1.powi(*step);
                let bc2 = 1.0 - beta2.powi(*step);
                for i in 0..params.len() {
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * grad[i];
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * grad[i] * grad[i];
                    let m_hat = m[i] / bc1;
                    let v_hat = v[i] / bc2;
                    params[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
            Optimizer::Sgd { momentum, velocity } => {
                for i in 0..params.len() {
                    velocity[i] = *momentum * velocity[i] + grad[i];
                    params[i] -= lr * velocity[i];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // f(p) = a (p - c)^2, f'(p) = 2a (p - c)
    fn grad(p: f64) -> f64 {
        2.0 * 3.0 * (p - 1.5)
    }

    #[test]
    fn adam_first_steps_closed_form() {
        let cfg = OptimizerConfig::Adam {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
        };
        let mut opt = Optimizer::new(&cfg, 1);
        let mut p = [0.0];
        let g0 = grad(p[0]);
        opt.step(&mut p, &[g0], 0.1);
        // bias-corrected first step moves by lr·sign(g)
        assert_abs_diff_eq!(p[0], -0.1 * g0 / (g0.abs() + ADAM_EPS), epsilon = 1e-12);

        let p1 = p[0];
        let g1 = grad(p1);
        opt.step(&mut p, &[g1], 0.1);
        let m = 0.9 * 0.1 * g0 + 0.1 * g1;
        let v = 0.999 * 0.001 * g0 * g0 + 0.001 * g1 * g1;
        let expected =
            p1 - 0.1 * (m / (1.0 - 0.81)) / ((v / (1.0 - 0.999f64.powi(2))).sqrt() + ADAM_EPS);
        assert_abs_diff_eq!(p[0], expected, epsilon = 1e-12);
    }

    #[test]
    fn sgd_momentum_closed_form() {
        let cfg = OptimizerConfig::Sgd {
            lr: 0.05,
            momentum: 0.9,
        };
        let mut opt = Optimizer::new(&cfg, 1);
        let mut p = [0.0];
        let g0 = grad(0.0);
        opt.step(&mut p, &[g0], 0.05);
        assert_abs_diff_eq!(p[0], -0.05 * g0, epsilon = 1e-15);
        let g1 = grad(p[0]);
        opt.step(&mut p, &[g1], 0.05);
        assert_abs_diff_eq!(p[0], -0.05 * g0 - 0.05 * (0.9 * g0 + g1), epsilon = 1e-15);
    }

    #[test]
    fn validation() {
        assert!(OptimizerConfig::Sgd {
            lr: 0.1,
            momentum: 1.0
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig::Sgd {
            lr: -0.1,
            momentum: 0.0
        }
        .validate()
        .is_err());
        assert!(OptimizerConfig::Adam {
            lr: 0.5,
            beta1: 0.9,
            beta2: 0.999
        }
        .validate()
        .is_ok());
    }
}
