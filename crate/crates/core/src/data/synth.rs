//! Synthetic stand-ins for speech and environmental noise.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{read_wav, Waveform, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

const SR: f64 = SAMPLE_RATE_HZ as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleanKind {
    HarmonicVoice,
    ExternalWav,
}

/// Noise families. The first four are stationary or quasi-stationary; the
/// rest are impulsive or intermittent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    White,
    Pink,
    Hum,
    BabbleSurrogate,
    Clicks,
    Bursts,
    Chirps,
    Thumps,
    ExternalWav,
}

impl NoiseKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::White => "white",
            Self::Pink => "pink",
            Self::Hum => "hum",
            Self::BabbleSurrogate => "babble_surrogate",
            Self::Clicks => "clicks",
            Self::Bursts => "bursts",
            Self::Chirps => "chirps",
            Self::Thumps => "thumps",
            Self::ExternalWav => "external_wav",
        }
    }
}

/// Rate of the click train, in events per second.
pub const CLICK_RATE_HZ: f64 = 4.0;

fn check_duration(duration_s: f64) -> Result<usize> {
    if !(0.5..=10.0).contains(&duration_s) {
        return Err(Error::Config(format!(
            "duration {duration_s} s outside [0.5, 10]"
        )));
    }
    Ok((duration_s * SR).round() as usize)
}

fn peak_normalize(mut x: Vec<f64>, peak: f64) -> Vec<f64> {
    let m = x.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        let g = peak / m;
        x.iter_mut().for_each(|v| *v *= g);
    }
    x
}

/// Parameters of one synthetic talker.
struct Voice {
    base_f0: f64,
    f0_depth: f64,
    f0_rate: f64,
    f0_phase: f64,
    harmonics: Vec<f64>,
    formant_hz: f64,
    formant_drift: f64,
    syllable_rate: f64,
    syllable_phase: f64,
}

impl Voice {
    fn sample(rng: &mut impl Rng) -> Self {
        let base_f0: f64 = rng.gen_range(110.0..200.0);
        let room = (base_f0 - 95.0).min(245.0 - base_f0);
        let count = rng.gen_range(5..=12);
        let harmonics = (1..=count)
            .map(|k| rng.gen_range(0.5..1.0) / k as f64)
            .collect();
        Self {
            base_f0,
            f0_depth: rng.gen_range(0.2..0.9) * room,
            f0_rate: rng.gen_range(0.5..2.5),
            f0_phase: rng.gen_range(0.0..2.0 * PI),
            harmonics,
            formant_hz: rng.gen_range(400.0..1200.0),
            formant_drift: rng.gen_range(0.2..0.6),
            syllable_rate: rng.gen_range(3.0..5.5),
            syllable_phase: rng.gen_range(0.0..2.0 * PI),
        }
    }

    fn render(&self, len: usize) -> Vec<f64> {
        let mut phase = 0.0;
        let mut out = Vec::with_capacity(len);
        for n in 0..len {
            let t = n as f64 / SR;
            let f0 = (self.base_f0
                + self.f0_depth * (2.0 * PI * self.f0_rate * t + self.f0_phase).sin())
            .clamp(90.0, 250.0);
            phase += 2.0 * PI * f0 / SR;
            let formant =
                self.formant_hz * (1.0 + self.formant_drift * (2.0 * PI * 0.7 * t).sin());
            let mut s = 0.0;
            for (k, amp) in self.harmonics.iter().enumerate() {
                let hk = (k + 1) as f64;
                let fk = hk * f0;
                let emphasis = 1.0 + 2.0 * (-((fk - formant) / 300.0).powi(2)).exp();
                s += amp * emphasis * (hk * phase).sin();
            }
            let syl = 0.5 * (1.0 - (2.0 * PI * self.syllable_rate * t + self.syllable_phase).cos());
            out.push(s * syl.powf(1.5));
        }
        out
    }
}

/// A voiced, syllable-modulated harmonic signal peak-normalized to 0.5.
///
/// The pitch contour stays within 90–250 Hz and carries 5–12 harmonics.
pub fn gen_harmonic_voice(seed: u64, duration_s: f64) -> Result<Waveform> {
    let len = check_duration(duration_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let voice = Voice::sample(&mut rng);
    Waveform::from_samples(peak_normalize(voice.render(len), 0.5))
}

/// Picks a file from `dir` by `seed` and crops or pads it to `duration_s`.
pub fn clean_from_dir(dir: &Path, seed: u64, duration_s: f64) -> Result<Waveform> {
    let len = check_duration(duration_s)?;
    let files = wav_files(dir)?;
    let path = &files[(seed % files.len() as u64) as usize];
    let w = read_wav(path)?;
    if w.sample_rate_hz() != SAMPLE_RATE_HZ {
        return Err(Error::SampleRate(w.sample_rate_hz()));
    }
    let mut s = w.into_samples();
    s.resize(len, 0.0);
    Waveform::from_samples(peak_normalize(s, 0.5))
}

/// Sorted list of `.wav` files in `dir`.
pub fn wav_files(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .is_some_and(|x| x.eq_ignore_ascii_case("wav"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Manifest(format!(
            "no .wav files in {}",
            dir.display()
        )));
    }
    Ok(files)
}

/// Clean speech stand-in. `ExternalWav` needs a directory.
pub fn gen_clean(
    seed: u64,
    duration_s: f64,
    kind: CleanKind,
    external_dir: Option<&Path>,
) -> Result<Waveform> {
    match kind {
        CleanKind::HarmonicVoice => gen_harmonic_voice(seed, duration_s),
        CleanKind::ExternalWav => {
            let dir = external_dir
                .ok_or_else(|| Error::Config("external_wav clean source needs clean_dir".into()))?;
            clean_from_dir(dir, seed, duration_s)
        }
    }
}

fn gaussian(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..len).map(|_| normal.sample(rng)).collect()
}

/// Shapes white noise in the frequency domain by `gain(freq_hz)`.
fn shaped(rng: &mut impl Rng, len: usize, gain: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut buf: Vec<Complex64> = gaussian(rng, len)
        .into_iter()
        .map(|v| Complex64::new(v, 0.0))
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_forward(len).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let bin = k.min(len - k);
        *c *= gain(bin as f64 * SR / len as f64);
    }
    planner.plan_fft_inverse(len).process(&mut buf);
    buf.iter().map(|c| c.re / len as f64).collect()
}

fn poisson_onsets(rng: &mut impl Rng, len: usize, rate_hz: f64) -> Vec<usize> {
    if rate_hz <= 0.0 {
        return Vec::new();
    }
    let count = Poisson::new(rate_hz * len as f64 / SR)
        .map(|p| p.sample(rng) as usize)
        .unwrap_or(0);
    let mut onsets: Vec<usize> = (0..count).map(|_| rng.gen_range(0..len)).collect();
    onsets.sort_unstable();
    onsets
}

/// Poisson click train: decaying broadband impulses.
pub fn gen_clicks(seed: u64, duration_s: f64, rate_hz: f64) -> Result<Waveform> {
    let len = check_duration(duration_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![0.0; len];
    let decay = Exp::<f64>::new(1.0 / 0.004).expect("positive rate");
    for onset in poisson_onsets(&mut rng, len, rate_hz) {
        let tau: f64 = Distribution::<f64>::sample(&decay, &mut rng).max(0.001);
        let amp = rng.gen_range(0.5..1.0);
        for (i, slot) in out[onset..].iter_mut().enumerate().take((tau * SR * 6.0) as usize) {
            let env = (-(i as f64) / (tau * SR)).exp();
            *slot += amp * env * rng.gen_range(-1.0..1.0);
        }
    }
    Waveform::from_samples(peak_normalize(out, 0.9))
}

fn gen_white(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    gaussian(rng, len)
}

fn gen_pink(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    shaped(rng, len, |f| 1.0 / f.max(20.0).sqrt())
}

fn gen_hum(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let phases: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..2.0 * PI)).collect();
    (0..len)
        .map(|n| {
            let t = n as f64 / SR;
            phases
                .iter()
                .enumerate()
                .map(|(k, ph)| {
                    let h = (k + 1) as f64;
                    (2.0 * PI * 50.0 * h * t + ph).sin() / h.powf(1.2)
                })
                .sum()
        })
        .collect()
}

fn gen_babble(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for _ in 0..6 {
        let voice = Voice::sample(rng);
        let talker = peak_normalize(voice.render(len), 1.0);
        for (o, v) in out.iter_mut().zip(talker) {
            *o += v;
        }
    }
    out
}

/// Band-limited noise bursts of a few hundred milliseconds (2–6 kHz).
fn gen_bursts(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let band = shaped(rng, len, |f| if (2000.0..6000.0).contains(&f) { 1.0 } else { 0.0 });
    let mut env = vec![0.0; len];
    for onset in poisson_onsets(rng, len, 2.0) {
        let dur = (rng.gen_range(0.15..0.35) * SR) as usize;
        for (i, e) in env[onset..].iter_mut().enumerate().take(dur) {
            let x = i as f64 / dur as f64;
            *e += (PI * x).sin().powi(2) * (-(3.0 * x)).exp();
        }
    }
    band.iter().zip(env).map(|(b, e)| b * e).collect()
}

/// Frequency sweeps between 800 Hz and 3 kHz, gated on and off.
fn gen_chirps(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for onset in poisson_onsets(rng, len, 2.5) {
        let dur = (rng.gen_range(0.1..0.3) * SR) as usize;
        let f_start = rng.gen_range(800.0..3000.0);
        let f_end = rng.gen_range(800.0..3000.0);
        let mut phase = rng.gen_range(0.0..2.0 * PI);
        for (i, slot) in out[onset..].iter_mut().enumerate().take(dur) {
            let x = i as f64 / dur as f64;
            let f = f_start + (f_end - f_start) * x;
            phase += 2.0 * PI * f / SR;
            *slot += (PI * x).sin() * phase.sin();
        }
    }
    out
}

/// Low-frequency decaying thumps (60–250 Hz) with a noisy attack.
fn gen_thumps(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for onset in poisson_onsets(rng, len, 3.0) {
        let freq = rng.gen_range(60.0..250.0);
        let tau = rng.gen_range(0.03..0.08);
        let amp = rng.gen_range(0.5..1.0);
        for (i, slot) in out[onset..].iter_mut().enumerate().take((tau * SR * 6.0) as usize) {
            let t = i as f64 / SR;
            let attack = if i < 80 { rng.gen_range(-0.5..0.5) } else { 0.0 };
            *slot += amp * (-(t / tau)).exp() * ((2.0 * PI * freq * t).sin() + attack);
        }
    }
    out
}

/// Noise of the given kind, peak-normalized to 0.9.
///
/// Intermittent kinds can come out silent for very short durations; the mixer
/// rejects a silent segment.
pub fn gen_noise(
    seed: u64,
    duration_s: f64,
    kind: NoiseKind,
    external_dir: Option<&Path>,
) -> Result<Waveform> {
    if kind == NoiseKind::Clicks {
        return gen_clicks(seed, duration_s, CLICK_RATE_HZ);
    }
    let len = check_duration(duration_s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = match kind {
        NoiseKind::White => gen_white(&mut rng, len),
        NoiseKind::Pink => gen_pink(&mut rng, len),
        NoiseKind::Hum => gen_hum(&mut rng, len),
        NoiseKind::BabbleSurrogate => gen_babble(&mut rng, len),
        NoiseKind::Bursts => gen_bursts(&mut rng, len),
        NoiseKind::Chirps => gen_chirps(&mut rng, len),
        NoiseKind::Thumps => gen_thumps(&mut rng, len),
        NoiseKind::ExternalWav => {
            let dir = external_dir
                .ok_or_else(|| Error::Config("external_wav noise needs noise_dir".into()))?;
            let files = wav_files(dir)?;
            let w = read_wav(&files[(seed % files.len() as u64) as usize])?;
            if w.sample_rate_hz() != SAMPLE_RATE_HZ {
                return Err(Error::SampleRate(w.sample_rate_hz()));
            }
            // Loop the recording to the requested length.
            let s = w.into_samples();
            if s.is_empty() {
                return Err(Error::ZeroPower("noise"));
            }
            s.iter().cycle().take(len).copied().collect()
        }
        NoiseKind::Clicks => unreachable!("handled above"),
    };
    Waveform::from_samples(peak_normalize(raw, 0.9))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Magnitude spectrum by direct DFT at integer-Hz resolution for 1 s.
    fn dft_peak_hz(x: &[f64], max_hz: usize) -> usize {
        let n = x.len() as f64;
        (1..max_hz)
            .map(|f| {
                let (mut re, mut im) = (0.0, 0.0);
                for (i, v) in x.iter().enumerate() {
                    let a = 2.0 * PI * f as f64 * i as f64 / n;
                    re += v * a.cos();
                    im -= v * a.sin();
                }
                (f, re * re + im * im)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0
    }

    #[test]
    fn clean_is_deterministic_and_normalized() {
        let a = gen_harmonic_voice(7, 1.0).unwrap();
        let b = gen_harmonic_voice(7, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 16000);
        assert!((a.peak() - 0.5).abs() < 1e-12);
        assert_ne!(a, gen_harmonic_voice(8, 1.0).unwrap());
    }

    #[test]
    fn bad_durations_are_rejected() {
        assert!(gen_harmonic_voice(1, 0.0).is_err());
        assert!(gen_harmonic_voice(1, 11.0).is_err());
        assert!(gen_noise(1, 0.2, NoiseKind::White, None).is_err());
    }

    #[test]
    fn voice_peak_sits_in_a_harmonic_band() {
        for seed in 0..3 {
            let w = gen_harmonic_voice(seed, 1.0).unwrap();
            let peak = dft_peak_hz(w.samples(), 3200) as f64;
            let ok = (1..=12).any(|k| peak >= 90.0 * k as f64 && peak <= 250.0 * k as f64);
            assert!(ok, "seed {seed}: peak at {peak} Hz");
        }
    }

    #[test]
    fn white_noise_is_zero_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = gen_white(&mut rng, 16000);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        assert!(mean.abs() < 0.01 * 1.0_f64.max(1.0), "mean {mean}");
        let w = gen_noise(5, 1.0, NoiseKind::White, None).unwrap();
        let m = w.samples().iter().sum::<f64>() / w.len() as f64;
        assert!(m.abs() < 0.01);
    }

    #[test]
    fn hum_peaks_at_fifty_hertz() {
        let w = gen_noise(3, 1.0, NoiseKind::Hum, None).unwrap();
        assert_eq!(dft_peak_hz(w.samples(), 400), 50);
    }

    #[test]
    fn silent_click_train_breaks_the_mixer() {
        let silent = gen_clicks(1, 1.0, 0.0).unwrap();
        assert!(silent.samples().iter().all(|&v| v == 0.0));
        let clean = gen_harmonic_voice(1, 1.0).unwrap();
        assert!(matches!(
            crate::dsp::mix_at_snr_with_offset(&clean, &silent, 0.0, 0),
            Err(Error::ZeroPower("noise"))
        ));
    }

    #[test]
    fn every_kind_generates() {
        for kind in [
            NoiseKind::White,
            NoiseKind::Pink,
            NoiseKind::Hum,
            NoiseKind::BabbleSurrogate,
            NoiseKind::Clicks,
            NoiseKind::Bursts,
            NoiseKind::Chirps,
            NoiseKind::Thumps,
        ] {
            let w = gen_noise(11, 1.5, kind, None).unwrap();
            assert_eq!(w.len(), 24000, "{kind:?}");
            assert!(w.peak() > 0.0, "{kind:?} is silent");
        }
        assert!(gen_noise(1, 1.0, NoiseKind::ExternalWav, None).is_err());
    }
}
