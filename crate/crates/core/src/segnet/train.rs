use std::collections::HashSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::checkpoint::save_checkpoint;
use super::model::{AttentionInput, Grads, SegNet};
use crate::error::{Error, Result};
use crate::raster::Mask;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Adam {
        lr: f64,
        #[serde(default = "beta1")]
        beta1: f64,
        #[serde(default = "beta2")]
        beta2: f64,
        #[serde(default = "eps")]
        eps: f64,
    },
    /// SGD with momentum and a polynomial learning-rate decay over `TrainHyper::steps`.
    SgdPoly {
        lr: f64,
        momentum: f64,
        power: f64,
        weight_decay: f64,
    },
}

fn beta1() -> f64 {
    0.9
}

fn beta2() -> f64 {
    0.999
}

fn eps() -> f64 {
    1e-8
}

/// Training hyperparameters; a run's full record lives in its TOML config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub steps: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    /// Write a checkpoint every this many steps (the final step is always written).
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
    /// Square random crop side; `None` trains on whole images.
    #[serde(default)]
    pub crop: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

/// Per-parameter optimizer moments.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub first: Grads,
    pub second: Grads,
}

impl OptimizerState {
    pub fn new(model: &SegNet) -> Self {
        OptimizerState {
            first: model.zero_grads(),
            second: model.zero_grads(),
        }
    }

    fn apply(&mut self, cfg: &OptimizerConfig, model: &mut SegNet, grads: &Grads, t: usize, total: usize) {
        match *cfg {
            OptimizerConfig::Adam {
                lr,
                beta1,
                beta2,
                eps,
            } => {
                let c1 = 1.0 - beta1.powi(t as i32);
                let c2 = 1.0 - beta2.powi(t as i32);
                for (i, p) in model.params_mut().into_iter().enumerate() {
                    for j in 0..p.len() {
                        let g = grads[i][j];
                        let m = &mut self.first[i][j];
                        let v = &mut self.second[i][j];
                        *m = beta1 * *m + (1.0 - beta1) * g;
                        *v = beta2 * *v + (1.0 - beta2) * g * g;
                        p[j] -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                    }
                }
            }
            OptimizerConfig::SgdPoly {
                lr,
                momentum,
                power,
                weight_decay,
            } => {
                let frac = (t - 1) as f64 / total.max(1) as f64;
                let rate = lr * (1.0 - frac).max(0.0).powf(power);
                for (i, p) in model.params_mut().into_iter().enumerate() {
                    for j in 0..p.len() {
                        let g = grads[i][j] + weight_decay * p[j];
                        let m = &mut self.first[i][j];
                        *m = momentum * *m + g;
                        p[j] -= rate * *m;
                    }
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainState {
    pub step: usize,
    pub optimizer: OptimizerState,
    pub loss_history: Vec<f64>,
    pub checkpoint_path: Option<PathBuf>,
}

impl TrainState {
    pub fn new(model: &SegNet) -> Self {
        TrainState {
            step: 0,
            optimizer: OptimizerState::new(model),
            loss_history: Vec::new(),
            checkpoint_path: None,
        }
    }
}

/// One assembled training pair.
#[derive(Clone, Debug)]
pub struct TrainingExample {
    pub target_label: String,
    pub input: AttentionInput,
    pub mask: Mask,
}

/// Mean loss over `batch` and the summed gradient of that mean.
pub fn batch_loss_and_grad(model: &SegNet, batch: &[TrainingExample]) -> Result<(f64, Grads)> {
    let scale = 1.0 / batch.len() as f64;
    batch
        .par_iter()
        .map(|ex| {
            let x = ex.input.to_tensor(model.config())?;
            let mut g = model.zero_grads();
            let l = model.loss_and_grad(&x, ex.mask.data(), scale, Some(&mut g))?;
            Ok((l * scale, g))
        })
        .try_reduce(
            || (0.0, model.zero_grads()),
            |(la, mut ga), (lb, gb)| {
                for (a, b) in ga.iter_mut().zip(&gb) {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                }
                Ok((la + lb, ga))
            },
        )
}

pub fn batch_loss(model: &SegNet, batch: &[TrainingExample]) -> Result<f64> {
    let mut total = 0.0;
    for ex in batch {
        let x = ex.input.to_tensor(model.config())?;
        total += model.loss_and_grad(&x, ex.mask.data(), 1.0, None)?;
    }
    Ok(total / batch.len() as f64)
}

fn step_file(step: usize) -> String {
    format!("step-{step:06}.safetensors")
}

/// Runs `steps` optimizer steps starting from `state`, drawing `hyper.batch_size`
/// examples per step from `next_example`. Any example whose target is in `test_labels`
/// aborts training with a data-leak error. Checkpoints go to `checkpoint_dir` when given.
pub fn train(
    model: &mut SegNet,
    state: &mut TrainState,
    next_example: &mut dyn FnMut() -> Result<TrainingExample>,
    steps: usize,
    hyper: &TrainHyper,
    test_labels: &HashSet<String>,
    checkpoint_dir: Option<&Path>,
) -> Result<()> {
    if hyper.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    let end = state.step + steps;
    while state.step < end {
        let mut batch = Vec::with_capacity(hyper.batch_size);
        for _ in 0..hyper.batch_size {
            let ex = next_example()?;
            if test_labels.contains(&ex.target_label) {
                return Err(Error::DataLeak {
                    label: ex.target_label,
                });
            }
            batch.push(ex);
        }
        let (loss, grads) = batch_loss_and_grad(model, &batch)?;
        state.step += 1;
        state
            .optimizer
            .apply(&hyper.optimizer, model, &grads, state.step, hyper.steps.max(end));
        state.loss_history.push(loss);
        if state.step % 50 == 0 {
            log::info!("step {} loss {:.4}", state.step, loss);
        }
        let due = hyper
            .checkpoint_every
            .is_some_and(|c| c > 0 && state.step % c == 0);
        if let Some(dir) = checkpoint_dir {
            if due {
                let path = dir.join(step_file(state.step));
                save_checkpoint(&path, model, state, Some(hyper))?;
                state.checkpoint_path = Some(path);
            }
        }
    }
    let last_saved = state.checkpoint_path.as_ref().is_some_and(|p| p.ends_with(step_file(state.step)));
    if let Some(dir) = checkpoint_dir.filter(|_| !last_saved) {
        let path = dir.join(step_file(state.step));
        save_checkpoint(&path, model, state, Some(hyper))?;
        state.checkpoint_path = Some(path);
    }
    Ok(())
}
