use serde::{Deserialize, Serialize};

use super::model::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

/// Applies gradients left by `Model::loss_and_backward`. Parameters
/// without a gradient buffer (frozen embeddings) are skipped.
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
        t: i32,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd { lr },
            OptimizerKind::Adam => Optimizer::Adam {
                lr,
                beta1: 0.9,
                beta2: 0.999,
                eps: 1e-8,
                t: 0,
                m: Vec::new(),
                v: Vec::new(),
            },
        }
    }

    pub fn step(&mut self, model: &mut Model) {
        let params = model.params_mut();
        match self {
            Optimizer::Sgd { lr } => {
                for (_, p) in params {
                    let (data, grad) = p.data_and_grad();
                    if let Some(g) = grad {
                        for (x, gx) in data.iter_mut().zip(g) {
                            *x -= *lr * gx;
                        }
                    }
                }
            }
            Optimizer::Adam {
                lr,
                beta1,
                beta2,
                eps,
                t,
                m,
                v,
            } => {
                if m.is_empty() {
                    *m = params.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
                    *v = m.clone();
                }
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for (k, (_, p)) in params.into_iter().enumerate() {
                    let (data, grad) = p.data_and_grad();
                    let Some(g) = grad else { continue };
                    for i in 0..data.len() {
                        m[k][i] = *beta1 * m[k][i] + (1.0 - *beta1) * g[i];
                        v[k][i] = *beta2 * v[k][i] + (1.0 - *beta2) * g[i] * g[i];
                        let mh = m[k][i] / c1;
                        let vh = v[k][i] / c2;
                        data[i] -= *lr * mh / (vh.sqrt() + *eps);
                    }
                }
            }
        }
    }
}
