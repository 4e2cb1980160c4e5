use crate::error::{Error, Result};
use crate::grad::ParamVector;

/// Per-parameter credit for the loss decrease realized along one task's
/// optimization trajectory.
///
/// After each optimizer step, `w[i] -= g[i] * (after[i] - before[i])`, so the
/// sum of `w` over a task approximates `L(start) − L(end)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathAccumulator {
    w: Vec<f64>,
    theta_task_start: ParamVector,
    steps: usize,
}

impl PathAccumulator {
    pub fn new(theta_task_start: ParamVector) -> Self {
        Self {
            w: vec![0.0; theta_task_start.len()],
            theta_task_start,
            steps: 0,
        }
    }

    /// Records one optimizer step taken with gradient `grad`.
    pub fn accumulate(
        &mut self,
        grad: &ParamVector,
        theta_before: &ParamVector,
        theta_after: &ParamVector,
    ) -> Result<()> {
        self.theta_task_start.check_aligned(grad)?;
        self.theta_task_start.check_aligned(theta_before)?;
        self.theta_task_start.check_aligned(theta_after)?;
        for (((w, g), b), a) in self
            .w
            .iter_mut()
            .zip(grad.values())
            .zip(theta_before.values())
            .zip(theta_after.values())
        {
            *w -= g * (a - b);
        }
        self.steps += 1;
        Ok(())
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn theta_task_start(&self) -> &ParamVector {
        &self.theta_task_start
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Starts a fresh task from `theta`.
    pub fn reset(&mut self, theta: ParamVector) {
        self.w = vec![0.0; theta.len()];
        self.theta_task_start = theta;
        self.steps = 0;
    }

    pub(crate) fn ensure_nonempty(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::EmptyPath);
        }
        Ok(())
    }
}

/// Free-function form of [`PathAccumulator::accumulate`].
pub fn accumulate_path(
    acc: &mut PathAccumulator,
    grad: &ParamVector,
    theta_before: &ParamVector,
    theta_after: &ParamVector,
) -> Result<()> {
    acc.accumulate(grad, theta_before, theta_after)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> ParamVector {
        ParamVector::zeros_with_layout([("theta", vec![1])])
            .with_values(vec![v])
            .unwrap()
    }

    #[test]
    fn zero_gradient_leaves_w_unchanged() {
        let mut acc = PathAccumulator::new(scalar(1.0));
        acc.accumulate(&scalar(0.0), &scalar(1.0), &scalar(0.5)).unwrap();
        assert_eq!(acc.w(), &[0.0]);
        assert_eq!(acc.steps(), 1);
    }

    #[test]
    fn one_gradient_descent_step_on_half_square() {
        // L = θ²/2 at θ = 1: gradient 1, step -0.1.
        let mut acc = PathAccumulator::new(scalar(1.0));
        let before = scalar(1.0);
        let grad = scalar(1.0);
        let after = scalar(1.0 - 0.1 * 1.0);
        acc.accumulate(&grad, &before, &after).unwrap();
        assert!((acc.w()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let mut acc = PathAccumulator::new(scalar(0.0));
        let two = ParamVector::zeros_with_layout([("theta", vec![2])]);
        assert!(acc.accumulate(&two, &scalar(0.0), &scalar(0.0)).is_err());
    }

    #[test]
    fn reset_clears_state() {
        let mut acc = PathAccumulator::new(scalar(1.0));
        acc.accumulate(&scalar(1.0), &scalar(1.0), &scalar(0.9)).unwrap();
        acc.reset(scalar(0.9));
        assert_eq!(acc.w(), &[0.0]);
        assert_eq!(acc.steps(), 0);
        assert_eq!(acc.theta_task_start(), &scalar(0.9));
        assert!(matches!(acc.ensure_nonempty(), Err(Error::EmptyPath)));
    }
}
