use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fisher::{estimate_fisher_diag, update_fisher, FisherDiag, SampleGradient};
use super::path::PathAccumulator;
use crate::codec;
use crate::error::{Error, Result};
use crate::grad::{ParamVector, Tape, Tensor, Var};

const CHECKPOINT_MAGIC: &[u8; 8] = b"SERILIMP";
const CHECKPOINT_VERSION: u32 = 1;

/// Regularizer hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegConfig {
    /// Penalty strength.
    pub lambda: f64,
    /// Weight of the newest Fisher when folding it into the running one.
    pub alpha_interp: f64,
    /// Share of the path-based importance; `1 − beta` goes to the Fisher.
    pub beta: f64,
    /// Damping in the path-importance denominator.
    pub epsilon: f64,
}

impl Default for RegConfig {
    fn default() -> Self {
        Self {
            lambda: 100.0,
            alpha_interp: 0.5,
            beta: 0.5,
            epsilon: 1e-3,
        }
    }
}

impl RegConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Config(format!("{what} = {v} out of range")));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda", self.lambda);
        }
        if !(0.0..=1.0).contains(&self.alpha_interp) {
            return bad("alpha_interp", self.alpha_interp);
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return bad("beta", self.beta);
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", self.epsilon);
        }
        Ok(())
    }
}

/// Everything carried from finished tasks into the next one.
#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceState {
    anchor: ParamVector,
    fisher_tilde: FisherDiag,
    path_scores: Vec<f64>,
    task_index: usize,
}

impl ImportanceState {
    /// State before any task has been consolidated.
    pub fn initial(theta: &ParamVector) -> Self {
        Self {
            anchor: theta.clone(),
            fisher_tilde: FisherDiag::zeros(theta.len()),
            path_scores: vec![0.0; theta.len()],
            task_index: 0,
        }
    }

    pub fn from_parts(
        anchor: ParamVector,
        fisher_tilde: FisherDiag,
        path_scores: Vec<f64>,
        task_index: usize,
    ) -> Result<Self> {
        anchor.check_len(fisher_tilde.len(), "Fisher")?;
        anchor.check_len(path_scores.len(), "path scores")?;
        if path_scores.iter().any(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::Config("path scores must be finite and >= 0".into()));
        }
        Ok(Self {
            anchor,
            fisher_tilde,
            path_scores,
            task_index,
        })
    }

    pub fn anchor(&self) -> &ParamVector {
        &self.anchor
    }

    pub fn fisher_tilde(&self) -> &FisherDiag {
        &self.fisher_tilde
    }

    pub fn path_scores(&self) -> &[f64] {
        &self.path_scores
    }

    /// Index of the task the state will regularize next.
    pub fn task_index(&self) -> usize {
        self.task_index
    }

    /// Per-parameter weight `(1 − β)·F̃ + β·S`.
    pub fn importance(&self, cfg: &RegConfig) -> Vec<f64> {
        self.fisher_tilde
            .values()
            .iter()
            .zip(&self.path_scores)
            .map(|(f, s)| (1.0 - cfg.beta) * f + cfg.beta * s)
            .collect()
    }

    /// Closes a task given its freshly estimated Fisher diagonal.
    ///
    /// Each parameter's clamped path credit `max(0, w)` is divided by its
    /// squared displacement over the task plus `epsilon` and added to the
    /// path scores. The Fisher is folded in with `alpha_interp`; the first
    /// consolidated task seeds the running Fisher directly. The anchor moves
    /// to `theta_end` and `acc` restarts from there.
    pub fn finalize_with_fisher(
        &self,
        acc: &mut PathAccumulator,
        theta_end: &ParamVector,
        fisher: FisherDiag,
        cfg: &RegConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        acc.ensure_nonempty()?;
        self.anchor.check_aligned(theta_end)?;
        self.anchor.check_aligned(acc.theta_task_start())?;
        theta_end.check_len(fisher.len(), "Fisher")?;

        let path_scores = self
            .path_scores
            .iter()
            .zip(acc.w())
            .zip(theta_end.values().iter().zip(acc.theta_task_start().values()))
            .map(|((s, w), (end, start))| {
                let d = end - start;
                s + w.max(0.0) / (d * d + cfg.epsilon)
            })
            .collect();
        let fisher_tilde = if self.task_index == 0 {
            fisher
        } else {
            update_fisher(&self.fisher_tilde, &fisher, cfg.alpha_interp)?
        };
        acc.reset(theta_end.clone());
        Ok(Self {
            anchor: theta_end.clone(),
            fisher_tilde,
            path_scores,
            task_index: self.task_index + 1,
        })
    }

    /// Closes a task, estimating the Fisher from `dataset` at the model's
    /// current parameters.
    pub fn finalize_task<M: SampleGradient>(
        &self,
        acc: &mut PathAccumulator,
        model: &M,
        dataset: &[M::Sample],
        cfg: &RegConfig,
    ) -> Result<Self> {
        acc.ensure_nonempty()?;
        let fisher = estimate_fisher_diag(model, dataset)?;
        self.finalize_with_fisher(acc, model.parameters(), fisher, cfg)
    }

    /// `λ Σᵢ ((1 − β)F̃ᵢ + βSᵢ)(θᵢ − θ*ᵢ)²`.
    pub fn penalty(&self, theta: &ParamVector, cfg: &RegConfig) -> Result<f64> {
        self.anchor.check_aligned(theta)?;
        let sum: f64 = self
            .importance(cfg)
            .iter()
            .zip(theta.values().iter().zip(self.anchor.values()))
            .map(|(w, (t, a))| w * (t - a) * (t - a))
            .sum();
        Ok(cfg.lambda * sum)
    }

    /// Records the penalty on `tape` over the parameter leaves `vars`, which
    /// must be the blocks of a parameter vector with the anchor's layout.
    pub fn penalty_on_tape(&self, tape: &mut Tape, vars: &[Var], cfg: &RegConfig) -> Result<Var> {
        let layout = self.anchor.layout();
        if vars.len() != layout.len() {
            return Err(Error::Layout(format!(
                "{} parameter leaves for {} blocks",
                vars.len(),
                layout.len()
            )));
        }
        let weights = self.importance(cfg);
        let mut block_sums = Vec::with_capacity(vars.len());
        for (i, (spec, &v)) in layout.iter().zip(vars).enumerate() {
            if tape.shape(v) != spec.shape.as_slice() {
                return Err(Error::Layout(format!("leaf for {} has wrong shape", spec.name)));
            }
            let anchor = tape.constant(self.anchor.tensor(i));
            let w = tape.constant(Tensor::new(
                spec.shape.clone(),
                weights[spec.range()].to_vec(),
            )?);
            let d = tape.sub(v, anchor)?;
            let sq = tape.mul(d, d)?;
            let weighted = tape.mul(sq, w)?;
            block_sums.push(tape.sum(weighted));
        }
        let all = tape.concat(&block_sums)?;
        let total = tape.sum(all);
        Ok(tape.scale(total, cfg.lambda))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(CHECKPOINT_MAGIC)?;
        codec::put_u32(&mut w, CHECKPOINT_VERSION)?;
        codec::put_u64(&mut w, self.task_index as u64)?;
        codec::put_layout(&mut w, self.anchor.layout())?;
        codec::put_f64s(&mut w, self.anchor.values())?;
        codec::put_f64s(&mut w, self.fisher_tilde.values())?;
        codec::put_f64s(&mut w, &self.path_scores)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        codec::expect_magic(&mut r, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let task_index = codec::get_u64(&mut r)? as usize;
        let layout = codec::get_layout(&mut r)?;
        let n = layout.iter().map(|s| s.len()).sum();
        let anchor = ParamVector::from_parts(layout, codec::get_f64s(&mut r, n)?)?;
        let fisher = FisherDiag::new(codec::get_f64s(&mut r, n)?)?;
        let scores = codec::get_f64s(&mut r, n)?;
        Self::from_parts(anchor, fisher, scores, task_index)
    }
}
