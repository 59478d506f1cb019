use super::{OptimizerKind, TrainConfig};
use crate::error::{Error, Result};
use crate::models::ParamSet;
use crate::tensor::Tensor;

/// Plain SGD or Adam over one parameter set. Updated parameters are rounded
/// to `f32`.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(cfg: &TrainConfig, params: &ParamSet) -> Self {
        let zeros = || params.iter().map(|(_, t)| vec![0.0; t.len()]).collect();
        Optimizer {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    /// Applies one update; `grads` follow the order of `params`.
    pub fn step(&mut self, params: &mut ParamSet, grads: &[Tensor]) -> Result<()> {
        if grads.len() != self.first.len() {
            return Err(Error::Contract(format!(
                "{} gradients for {} parameters",
                grads.len(),
                self.first.len()
            )));
        }
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (i, ((name, p), g)) in params.values_mut().zip(grads).enumerate() {
            if p.shape() != g.shape() {
                return Err(Error::shape(
                    "optimizer",
                    format!("`{name}` is {:?}, gradient {:?}", p.shape(), g.shape()),
                ));
            }
            let (m, v) = (&mut self.first[i], &mut self.second[i]);
            for (j, (w, &gj)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                let delta = match self.kind {
                    OptimizerKind::Sgd => self.lr * gj,
                    OptimizerKind::Adam => {
                        m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * gj;
                        v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * gj * gj;
                        self.lr * (m[j] / c1) / ((v[j] / c2).sqrt() + self.epsilon)
                    }
                };
                *w = ((*w - delta) as f32) as f64;
            }
        }
        Ok(())
    }
}
