use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Gradient, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::Adam),
            other => Err(Error::Config(format!("unknown optimizer `{other}`"))),
        }
    }
}

/// Plain gradient descent or a sparse adaptive-moment method.
///
/// The adaptive variant only touches coordinates present in the gradient and
/// keeps a per-coordinate step count for bias correction, so untouched table
/// entries stay exactly where they are.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
        m: Vec<f64>,
        v: Vec<f64>,
        steps: Vec<u32>,
    },
}

impl Optimizer {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.95;
    pub const EPS: f64 = 1e-8;

    pub fn new(kind: OptimizerKind, lr: f64, num_params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                beta1: Self::BETA1,
                beta2: Self::BETA2,
                eps: Self::EPS,
                m: vec![0.0; num_params],
                v: vec![0.0; num_params],
                steps: vec![0; num_params],
            },
        }
    }

    pub fn set_lr(&mut self, rate: f64) {
        match self {
            Optimizer::Sgd { lr } | Optimizer::Adam { lr, .. } => *lr = rate,
        }
    }

    pub fn step(&mut self, params: &mut ModelParams, grad: &Gradient) {
        let values = params.values_mut();
        match self {
            Optimizer::Sgd { lr } => {
                for (&k, &g) in grad {
                    values[k] -= *lr * g;
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                m,
                v,
                steps,
            } => {
                for (&k, &g) in grad {
                    steps[k] += 1;
                    m[k] = *beta1 * m[k] + (1.0 - *beta1) * g;
                    v[k] = *beta2 * v[k] + (1.0 - *beta2) * g * g;
                    let mh = m[k] / (1.0 - beta1.powi(steps[k] as i32));
                    let vh = v[k] / (1.0 - beta2.powi(steps[k] as i32));
                    values[k] -= *lr * mh / (vh.sqrt() + *eps);
                }
            }
        }
    }
}
