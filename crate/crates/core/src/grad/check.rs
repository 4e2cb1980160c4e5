use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ParamVector;
use crate::error::{Error, Result};

/// Outcome of comparing analytic and central-difference gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// Parameter indices that were perturbed.
    pub indices: Vec<usize>,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_rel_err: f64,
    pub worst_index: usize,
}

/// Settings for [`finite_diff_check`].
#[derive(Debug, Clone, Copy)]
pub struct GradCheckConfig {
    /// Number of parameters sampled; all of them if this exceeds the count.
    pub num_params: usize,
    pub step: f64,
    pub tol: f64,
    /// Magnitude below which errors are measured absolutely.
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            num_params: 20,
            step: 1e-5,
            tol: 1e-4,
            floor: 1e-6,
            seed: 0,
        }
    }
}

/// Relative error with an absolute floor on the denominator.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares the analytic gradient returned by `loss_and_grad` against
/// central differences over a random subsample of parameters.
///
/// Fails with [`Error::GradientCheck`] when the worst relative error is not
/// strictly below `cfg.tol`.
pub fn finite_diff_check<F>(
    params: &ParamVector,
    mut loss_and_grad: F,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamVector) -> Result<(f64, ParamVector)>,
{
    let (_, grad) = loss_and_grad(params)?;
    params.check_aligned(&grad)?;
    let n = params.len();
    let mut indices = if cfg.num_params >= n {
        (0..n).collect::<Vec<_>>()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        sample(&mut rng, n, cfg.num_params).into_vec()
    };
    indices.sort_unstable();

    let mut numeric = Vec::with_capacity(indices.len());
    let mut probe = params.clone();
    for &i in &indices {
        let orig = probe.values()[i];
        probe.values_mut()[i] = orig + cfg.step;
        let (up, _) = loss_and_grad(&probe)?;
        probe.values_mut()[i] = orig - cfg.step;
        let (down, _) = loss_and_grad(&probe)?;
        probe.values_mut()[i] = orig;
        numeric.push((up - down) / (2.0 * cfg.step));
    }
    let analytic: Vec<f64> = indices.iter().map(|&i| grad.values()[i]).collect();
    let (worst_index, max_rel_err) = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| relative_error(*a, *b, cfg.floor))
        .enumerate()
        .fold((0, 0.0), |best, (k, e)| if e > best.1 { (k, e) } else { best });
    if max_rel_err.is_nan() || max_rel_err >= cfg.tol {
        return Err(Error::GradientCheck {
            max_rel_err,
            tol: cfg.tol,
        });
    }
    Ok(GradCheckReport {
        worst_index: indices.get(worst_index).copied().unwrap_or(0),
        indices,
        analytic,
        numeric,
        max_rel_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::{Tape, Tensor};

    fn linear(p: &ParamVector) -> Result<(f64, ParamVector)> {
        let mut tape = Tape::new(p);
        let w = tape.param(p, 0)?;
        let x = tape.constant(Tensor::vector(vec![0.5, -1.25, 2.0, 3.5])?);
        let y = tape.dot(w, x)?;
        let out = tape.value(y).values()[0];
        Ok((out, tape.backward(y)?))
    }

    fn cubic(p: &ParamVector) -> Result<(f64, ParamVector)> {
        let mut tape = Tape::new(p);
        let w = tape.param(p, 0)?;
        let sq = tape.mul(w, w)?;
        let cu = tape.mul(sq, w)?;
        let y = tape.sum(cu);
        let out = tape.value(y).values()[0];
        Ok((out, tape.backward(y)?))
    }

    fn params() -> ParamVector {
        ParamVector::zeros_with_layout([("w", vec![4])])
            .with_values(vec![0.3, -0.8, 1.1, 0.05])
            .unwrap()
    }

    #[test]
    fn linear_model_is_exact() {
        let report = finite_diff_check(&params(), linear, &GradCheckConfig::default()).unwrap();
        assert!(report.max_rel_err < 1e-8);
        assert_eq!(report.indices, vec![0, 1, 2, 3]);
    }

    #[test]
    fn zero_tolerance_fails_on_nonlinear_model() {
        let cfg = GradCheckConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            finite_diff_check(&params(), cubic, &cfg),
            Err(Error::GradientCheck { .. })
        ));
    }

    #[test]
    fn subsample_is_seeded() {
        let cfg = GradCheckConfig {
            num_params: 2,
            ..Default::default()
        };
        let a = finite_diff_check(&params(), cubic, &cfg).unwrap();
        let b = finite_diff_check(&params(), cubic, &cfg).unwrap();
        assert_eq!(a.indices.len(), 2);
        assert_eq!(a, b);
    }
}
