//! Spectral-amplitude SDR objective and the L1/L2 baselines.
//!
//! The clean magnitudes `X` and enhanced magnitudes `X̂` are flattened over
//! every frame and bin of an utterance. The projection scale
//! `α = (X·X̂)/‖X‖²` absorbs any global gain of `X̂`, and
//!
//! ```text
//! sdr_db = 10·log10((‖αX‖² + ε‖X̂‖²) / (‖αX − X̂‖² + ε‖X̂‖²))
//! ```
//!
//! clamped to ±60 dB. The damping is relative to the estimate's energy so a
//! global gain leaves the score unchanged; a silent estimate uses plain `ε`.

use std::f64::consts::LN_10;

use crate::error::{Error, Result};
use crate::grad::{Tape, Tensor, Var};
use crate::model::{EnhancerModel, ParamVars};

/// Damping added to both energies, relative to `‖X̂‖²`.
pub const SDR_EPSILON: f64 = 1e-8;
/// Symmetric bound on the reported and trained SDR.
pub const SDR_CLAMP_DB: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrResult {
    pub alpha_scale: f64,
    pub signal_energy: f64,
    pub residual_energy: f64,
    pub sdr_db: f64,
}

fn check_pair(enhanced: &[f64], clean: &[f64]) -> Result<f64> {
    if enhanced.len() != clean.len() {
        return Err(Error::Shape(format!(
            "enhanced has {} entries, clean has {}",
            enhanced.len(),
            clean.len()
        )));
    }
    let clean_energy: f64 = clean.iter().map(|x| x * x).sum();
    if clean_energy == 0.0 {
        return Err(Error::UndefinedReference);
    }
    Ok(clean_energy)
}

fn damping(est_energy: f64) -> f64 {
    if est_energy > 0.0 {
        SDR_EPSILON * est_energy
    } else {
        SDR_EPSILON
    }
}

/// Scale-invariant SDR between two flattened magnitude matrices.
pub fn sdr_stsa(enhanced: &[f64], clean: &[f64]) -> Result<SdrResult> {
    let clean_energy = check_pair(enhanced, clean)?;
    let alpha = clean.iter().zip(enhanced).map(|(x, y)| x * y).sum::<f64>() / clean_energy;
    let signal_energy = alpha * alpha * clean_energy;
    let residual_energy: f64 = clean
        .iter()
        .zip(enhanced)
        .map(|(x, y)| {
            let d = alpha * x - y;
            d * d
        })
        .sum();
    let est_energy: f64 = enhanced.iter().map(|y| y * y).sum();
    let damping = damping(est_energy);
    let ratio = (signal_energy + damping) / (residual_energy + damping);
    Ok(SdrResult {
        alpha_scale: alpha,
        signal_energy,
        residual_energy,
        sdr_db: (10.0 * ratio.log10()).clamp(-SDR_CLAMP_DB, SDR_CLAMP_DB),
    })
}

/// Records the clamped SDR of `enhanced` against the constant `clean`.
pub fn sdr_stsa_on_tape(tape: &mut Tape, enhanced: Var, clean: &Tensor) -> Result<Var> {
    let clean_energy = check_pair(tape.value(enhanced).values(), clean.values())?;
    if tape.shape(enhanced) != clean.shape() {
        return Err(Error::Shape(format!(
            "enhanced {:?} vs clean {:?}",
            tape.shape(enhanced),
            clean.shape()
        )));
    }
    let x = tape.constant(clean.clone());
    let proj = tape.dot(x, enhanced)?;
    let alpha = tape.scale(proj, 1.0 / clean_energy);
    let target = tape.mul_scalar(x, alpha)?;
    let diff = tape.sub(target, enhanced)?;
    let sq = tape.mul(diff, diff)?;
    let residual = tape.sum(sq);
    let a2 = tape.mul(alpha, alpha)?;
    let signal = tape.scale(a2, clean_energy);
    let (num, den) = if tape.value(enhanced).values().iter().map(|y| y * y).sum::<f64>() > 0.0 {
        let e = tape.dot(enhanced, enhanced)?;
        let d = tape.scale(e, SDR_EPSILON);
        (tape.add(signal, d)?, tape.add(residual, d)?)
    } else {
        (tape.add_scalar(signal, SDR_EPSILON), tape.add_scalar(residual, SDR_EPSILON))
    };
    let ratio = tape.div(num, den)?;
    let ln = tape.ln(ratio)?;
    let db = tape.scale(ln, 10.0 / LN_10);
    Ok(tape.clamp(db, -SDR_CLAMP_DB, SDR_CLAMP_DB))
}

/// `−SDR(f_θ(Y), X)` for one utterance pair.
pub fn loss_neg_sdr(
    tape: &mut Tape,
    model: &EnhancerModel,
    vars: &ParamVars,
    noisy: &Tensor,
    clean: &Tensor,
) -> Result<Var> {
    let enhanced = model.forward(tape, vars, noisy)?;
    let sdr = sdr_stsa_on_tape(tape, enhanced, clean)?;
    Ok(tape.scale(sdr, -1.0))
}

fn same_shape(a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Mean absolute error between model output and clean magnitudes.
pub fn loss_l1(
    tape: &mut Tape,
    model: &EnhancerModel,
    vars: &ParamVars,
    noisy: &Tensor,
    clean: &Tensor,
) -> Result<Var> {
    same_shape(noisy, clean)?;
    let enhanced = model.forward(tape, vars, noisy)?;
    let x = tape.constant(clean.clone());
    let d = tape.sub(enhanced, x)?;
    let a = tape.abs(d);
    let s = tape.sum(a);
    Ok(tape.scale(s, 1.0 / clean.len() as f64))
}

/// Mean squared error between model output and clean magnitudes.
pub fn loss_l2(
    tape: &mut Tape,
    model: &EnhancerModel,
    vars: &ParamVars,
    noisy: &Tensor,
    clean: &Tensor,
) -> Result<Var> {
    same_shape(noisy, clean)?;
    let enhanced = model.forward(tape, vars, noisy)?;
    let x = tape.constant(clean.clone());
    let d = tape.sub(enhanced, x)?;
    let sq = tape.mul(d, d)?;
    let s = tape.sum(sq);
    Ok(tape.scale(s, 1.0 / clean.len() as f64))
}

/// Plain mean absolute error, no tape.
pub fn mean_abs_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!("{} vs {} entries", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// Plain mean squared error, no tape.
pub fn mean_sq_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::Shape(format!("{} vs {} entries", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grad::ParamVector;

    #[test]
    fn perfect_reconstruction_clamps() {
        let x = [1.0, 2.0, 3.0];
        let r = sdr_stsa(&x, &x).unwrap();
        assert_eq!(r.alpha_scale, 1.0);
        assert_eq!(r.residual_energy, 0.0);
        assert_eq!(r.sdr_db, 60.0);
    }

    #[test]
    fn global_gain_is_absorbed() {
        let x = [1.0, 2.0, 3.0];
        let y = [2.0, 4.0, 6.0];
        let r = sdr_stsa(&y, &x).unwrap();
        assert_eq!(r.alpha_scale, 2.0);
        assert_eq!(r.residual_energy, 0.0);
        assert_eq!(r.sdr_db, 60.0);
    }

    #[test]
    fn hand_example_is_zero_db() {
        let r = sdr_stsa(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(r.alpha_scale, 1.0);
        assert_eq!(r.signal_energy, 1.0);
        assert_eq!(r.residual_energy, 1.0);
        assert_eq!(r.sdr_db, 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            sdr_stsa(&[1.0, 2.0], &[0.0, 0.0]),
            Err(Error::UndefinedReference)
        ));
        assert!(matches!(sdr_stsa(&[1.0], &[1.0, 0.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn orthogonal_output_hits_lower_clamp() {
        let r = sdr_stsa(&[0.0, 1.0], &[1.0, 0.0]).unwrap();
        assert_eq!(r.sdr_db, -60.0);
    }

    #[test]
    fn tape_matches_plain_value() {
        let x = Tensor::vector(vec![0.5, 1.5, 2.0, 0.1]).unwrap();
        let p = ParamVector::zeros_with_layout([("y", vec![4])])
            .with_values(vec![0.7, 1.1, 2.5, 0.3])
            .unwrap();
        let mut tape = Tape::new(&p);
        let y = tape.param(&p, 0).unwrap();
        let s = sdr_stsa_on_tape(&mut tape, y, &x).unwrap();
        let plain = sdr_stsa(p.values(), x.values()).unwrap().sdr_db;
        assert!((tape.value(s).values()[0] - plain).abs() < 1e-12);
    }

    #[test]
    fn plain_l1_l2() {
        let a = [1.0, 2.0, 3.0];
        let b = [2.0, 3.0, 4.0];
        assert_eq!(mean_abs_error(&a, &a).unwrap(), 0.0);
        assert_eq!(mean_abs_error(&b, &a).unwrap(), 1.0);
        assert_eq!(mean_sq_error(&b, &a).unwrap(), 1.0);
        assert!(mean_sq_error(&a, &b[..2]).is_err());
    }
}
