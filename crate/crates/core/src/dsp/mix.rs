use rand::Rng;

use super::Waveform;
use crate::error::{Error, Result};

/// Mean-square power.
pub fn power(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// `10·log10(P_signal / P_noise)`.
pub fn snr_db(signal: &[f64], noise: &[f64]) -> f64 {
    10.0 * (power(signal) / power(noise)).log10()
}

/// Adds a randomly cropped noise segment to `clean` at the requested SNR.
///
/// The crop offset is drawn from `rng`.
pub fn mix_at_snr<R: Rng + ?Sized>(
    clean: &Waveform,
    noise: &Waveform,
    snr_db: f64,
    rng: &mut R,
) -> Result<Waveform> {
    if noise.len() < clean.len() {
        return Err(Error::InputTooShort {
            len: noise.len(),
            needed: clean.len(),
        });
    }
    let offset = rng.gen_range(0..=noise.len() - clean.len());
    mix_at_snr_with_offset(clean, noise, snr_db, offset)
}

/// Deterministic variant of [`mix_at_snr`] with an explicit crop offset.
pub fn mix_at_snr_with_offset(
    clean: &Waveform,
    noise: &Waveform,
    snr_db: f64,
    offset: usize,
) -> Result<Waveform> {
    if clean.sample_rate_hz() != noise.sample_rate_hz() {
        return Err(Error::Config(format!(
            "sample rates differ: {} vs {}",
            clean.sample_rate_hz(),
            noise.sample_rate_hz()
        )));
    }
    if !snr_db.is_finite() {
        return Err(Error::NonFinite("snr_db"));
    }
    if offset + clean.len() > noise.len() {
        return Err(Error::InputTooShort {
            len: noise.len(),
            needed: offset + clean.len(),
        });
    }
    let segment = &noise.samples()[offset..offset + clean.len()];
    let p_clean = power(clean.samples());
    let p_noise = power(segment);
    if p_clean == 0.0 {
        return Err(Error::ZeroPower("clean"));
    }
    if p_noise == 0.0 {
        return Err(Error::ZeroPower("noise"));
    }
    let gain = (p_clean / (p_noise * 10f64.powf(snr_db / 10.0))).sqrt();
    let mixed = clean
        .samples()
        .iter()
        .zip(segment)
        .map(|(c, n)| c + gain * n)
        .collect();
    Waveform::new(mixed, clean.sample_rate_hz())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn tone(len: usize) -> Waveform {
        Waveform::from_samples((0..len).map(|n| (n as f64 * 0.05).sin() * 0.3).collect()).unwrap()
    }

    fn hiss(len: usize, seed: u64) -> Waveform {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Waveform::from_samples((0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn achieved(clean: &Waveform, mixed: &Waveform) -> f64 {
        let residual: Vec<f64> = mixed
            .samples()
            .iter()
            .zip(clean.samples())
            .map(|(m, c)| m - c)
            .collect();
        snr_db(clean.samples(), &residual)
    }

    #[test]
    fn zero_db_balances_powers() {
        let clean = tone(4000);
        let mixed = mix_at_snr_with_offset(&clean, &hiss(8000, 1), 0.0, 100).unwrap();
        assert!(achieved(&clean, &mixed).abs() < 0.01);
    }

    #[test]
    fn twelve_db_scales_noise_power() {
        let clean = tone(4000);
        let mixed = mix_at_snr_with_offset(&clean, &hiss(4000, 2), 12.0, 0).unwrap();
        let residual: Vec<f64> = mixed
            .samples()
            .iter()
            .zip(clean.samples())
            .map(|(m, c)| m - c)
            .collect();
        let expected = power(clean.samples()) / 10f64.powf(1.2);
        assert!((power(&residual) - expected).abs() / expected < 1e-9);
    }

    #[test]
    fn silent_operands_are_rejected() {
        let silent = Waveform::zeros(100, 16000);
        assert!(matches!(
            mix_at_snr_with_offset(&silent, &hiss(100, 3), 0.0, 0),
            Err(Error::ZeroPower("clean"))
        ));
        assert!(matches!(
            mix_at_snr_with_offset(&tone(100), &silent, 0.0, 0),
            Err(Error::ZeroPower("noise"))
        ));
    }

    #[test]
    fn random_offset_comes_from_rng() {
        let clean = tone(1000);
        let noise = hiss(5000, 4);
        let a = mix_at_snr(&clean, &noise, 3.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = mix_at_snr(&clean, &noise, 3.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert!((achieved(&clean, &a) - 3.0).abs() < 0.01);
    }
}
