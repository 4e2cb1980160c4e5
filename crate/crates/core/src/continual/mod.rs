//! Regularization engine for sequential adaptation.
//!
//! Two importance measures are combined into one quadratic penalty around the
//! parameters left by the previous task:
//!
//! * a curvature estimate, the diagonal empirical Fisher of the task loss,
//!   folded across tasks by linear interpolation;
//! * a path estimate, the per-parameter share of the realized loss decrease
//!   along each task's trajectory, normalized by squared displacement.
//!
//! The loss while learning task `t ≥ 1` is
//! `L_t(θ) + λ Σᵢ ((1 − β)F̃ᵢ + βSᵢ)(θᵢ − θ*ᵢ)²`; task 0 trains on `L_0` alone.

mod fisher;
mod path;
mod state;

pub use fisher::{estimate_fisher_diag, update_fisher, FisherDiag, SampleGradient};
pub use path::{accumulate_path, PathAccumulator};
pub use state::{ImportanceState, RegConfig};

use crate::error::{Error, Result};
use crate::grad::{Tape, Tensor, Var};
use crate::loss::loss_neg_sdr;
use crate::model::{EnhancerModel, ParamVars};

/// Noisy and clean magnitude matrices of one utterance, `T × F` each.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralPair {
    pub noisy: Tensor,
    pub clean: Tensor,
}

/// Free-function form of [`ImportanceState::penalty_on_tape`].
pub fn penalty(
    tape: &mut Tape,
    vars: &ParamVars,
    state: &ImportanceState,
    cfg: &RegConfig,
) -> Result<Var> {
    state.penalty_on_tape(tape, vars.all(), cfg)
}

/// Mean `−SDR` over `batch`, plus the penalty when a consolidated state is
/// present and `λ > 0`.
pub fn regularized_loss(
    tape: &mut Tape,
    model: &EnhancerModel,
    vars: &ParamVars,
    batch: &[SpectralPair],
    state: Option<&ImportanceState>,
    cfg: &RegConfig,
) -> Result<Var> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut losses = Vec::with_capacity(batch.len());
    for pair in batch {
        losses.push(loss_neg_sdr(tape, model, vars, &pair.noisy, &pair.clean)?);
    }
    let task_loss = if losses.len() == 1 {
        losses[0]
    } else {
        let all = tape.concat(&losses)?;
        let total = tape.sum(all);
        tape.scale(total, 1.0 / batch.len() as f64)
    };
    match state {
        Some(s) if s.task_index() >= 1 && cfg.lambda > 0.0 => {
            let pen = s.penalty_on_tape(tape, vars.all(), cfg)?;
            tape.add(task_loss, pen)
        }
        _ => Ok(task_loss),
    }
}

impl SampleGradient for EnhancerModel {
    type Sample = SpectralPair;

    fn parameters(&self) -> &crate::grad::ParamVector {
        self.params()
    }

    fn sample_gradient(&self, sample: &SpectralPair) -> Result<crate::grad::ParamVector> {
        let mut tape = Tape::new(self.params());
        let vars = self.register(&mut tape)?;
        let loss = loss_neg_sdr(&mut tape, self, &vars, &sample.noisy, &sample.clean)?;
        tape.backward(loss)
    }
}
