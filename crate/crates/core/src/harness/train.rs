use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::continual::{regularized_loss, ImportanceState, PathAccumulator, RegConfig, SpectralPair};
use crate::error::{Error, Result};
use crate::grad::{ParamVector, Tape};
use crate::model::EnhancerModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

/// How later tasks are learned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Pretrain only; later models are not produced.
    None,
    Finetune,
    Seril,
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Finetune => "finetune",
            Self::Seril => "seril",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Global-norm clipping threshold.
    pub grad_clip: f64,
    pub strategy: Strategy,
    pub reg: RegConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            lr: 1e-3,
            epochs: 10,
            batch_size: 4,
            grad_clip: 5.0,
            strategy: Strategy::Seril,
            reg: RegConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.grad_clip > 0.0) {
            return Err(Error::Config(format!(
                "grad_clip must be positive, got {}",
                self.grad_clip
            )));
        }
        self.reg.validate()
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// First-order optimizer with its moment state.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd { lr: f64 },
    Adam { lr: f64, m: Vec<f64>, v: Vec<f64>, t: i32 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, num_params: usize) -> Self {
        match kind {
            OptimizerKind::Sgd => Self::Sgd { lr },
            OptimizerKind::Adam => Self::Adam {
                lr,
                m: vec![0.0; num_params],
                v: vec![0.0; num_params],
                t: 0,
            },
        }
    }

    pub fn step(&mut self, params: &mut ParamVector, grad: &ParamVector) -> Result<()> {
        params.check_aligned(grad)?;
        match self {
            Self::Sgd { lr } => {
                for (p, g) in params.values_mut().iter_mut().zip(grad.values()) {
                    *p -= *lr * g;
                }
            }
            Self::Adam { lr, m, v, t } => {
                *t += 1;
                let c1 = 1.0 - ADAM_BETA1.powi(*t);
                let c2 = 1.0 - ADAM_BETA2.powi(*t);
                let p = params.values_mut();
                for i in 0..p.len() {
                    let g = grad.values()[i];
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                    let mh = m[i] / c1;
                    let vh = v[i] / c2;
                    p[i] -= *lr * mh / (vh.sqrt() + ADAM_EPS);
                }
            }
        }
        Ok(())
    }
}

/// Scales `grad` down to global norm `max_norm` if it is longer.
pub fn clip_global_norm(grad: &mut ParamVector, max_norm: f64) -> f64 {
    let norm = grad.l2_norm();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.values_mut().iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean minibatch loss per epoch, penalty included.
    pub epoch_loss: Vec<f64>,
    pub steps: usize,
}

impl TrainLog {
    pub fn final_loss(&self) -> Option<f64> {
        self.epoch_loss.last().copied()
    }
}

/// Minibatch training on `data`.
///
/// The penalty from `state` is applied only under `Strategy::Seril`. When
/// `path` is given, every step is credited to it using the unclipped
/// gradient of the loss being minimized and the update actually applied.
pub fn train_task(
    model: &mut EnhancerModel,
    data: &[SpectralPair],
    cfg: &TrainConfig,
    state: Option<&ImportanceState>,
    mut path: Option<&mut PathAccumulator>,
) -> Result<TrainLog> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let state = if cfg.strategy == Strategy::Seril { state } else { None };
    let mut opt = Optimizer::new(cfg.optimizer, cfg.lr, model.num_params());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<SpectralPair> = chunk.iter().map(|&i| data[i].clone()).collect();
            let mut tape = Tape::new(model.params());
            let vars = model.register(&mut tape)?;
            let loss = regularized_loss(&mut tape, model, &vars, &batch, state, &cfg.reg)?;
            let value = tape.value(loss).values()[0];
            if !value.is_finite() {
                return Err(Error::NonFinite("training loss"));
            }
            let raw = tape.backward(loss)?;
            let mut grad = raw.clone();
            clip_global_norm(&mut grad, cfg.grad_clip);
            let before = model.snapshot();
            opt.step(model.params_mut(), &grad)?;
            if let Some(acc) = path.as_deref_mut() {
                acc.accumulate(&raw, &before, model.params())?;
            }
            total += value;
            batches += 1;
            log.steps += 1;
        }
        let mean = total / batches as f64;
        log::debug!("epoch {epoch}: loss {mean:.4}");
        log.epoch_loss.push(mean);
    }
    Ok(log)
}
