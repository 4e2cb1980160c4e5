use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{Waveform, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

/// Smallest per-sample sum of squared synthesis windows accepted by `istft`.
const MIN_WINDOW_SUM: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    #[default]
    Hamming,
}

/// STFT front-end parameters. Durations are in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StftConfig {
    pub fft_size: usize,
    pub window_ms: f64,
    pub hop_ms: f64,
    pub window_kind: WindowKind,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            fft_size: 512,
            window_ms: 32.0,
            hop_ms: 16.0,
            window_kind: WindowKind::Hamming,
        }
    }
}

impl StftConfig {
    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn window_len(&self, sample_rate_hz: u32) -> usize {
        (self.window_ms * f64::from(sample_rate_hz) / 1000.0).round() as usize
    }

    pub fn hop(&self, sample_rate_hz: u32) -> usize {
        (self.hop_ms * f64::from(sample_rate_hz) / 1000.0).round() as usize
    }

    /// Checks the configuration against a sample rate.
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        if sample_rate_hz != SAMPLE_RATE_HZ {
            return Err(Error::SampleRate(sample_rate_hz));
        }
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(Error::Config(format!(
                "fft_size {} is not a power of two",
                self.fft_size
            )));
        }
        let win = self.window_len(sample_rate_hz);
        let hop = self.hop(sample_rate_hz);
        if win > self.fft_size {
            return Err(Error::Config(format!(
                "window of {win} samples exceeds fft_size {}",
                self.fft_size
            )));
        }
        if hop == 0 || hop > win {
            return Err(Error::Config(format!(
                "hop of {hop} samples must lie in 1..={win}"
            )));
        }
        Ok(())
    }

    pub fn window(&self, sample_rate_hz: u32) -> Vec<f64> {
        match self.window_kind {
            WindowKind::Hamming => hamming_periodic(self.window_len(sample_rate_hz)),
        }
    }

    /// Number of frames produced for a signal of `len` samples.
    pub fn num_frames(&self, len: usize, sample_rate_hz: u32) -> usize {
        let win = self.window_len(sample_rate_hz);
        if len < win {
            0
        } else {
            1 + (len - win) / self.hop(sample_rate_hz)
        }
    }
}

/// Periodic Hamming window of length `len`.
pub fn hamming_periodic(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.54 - 0.46 * (2.0 * PI * n as f64 / len as f64).cos())
        .collect()
}

/// One-sided STFT of a waveform. Rows are frames, columns are bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    frames: Vec<Complex64>,
    magnitude: Vec<f64>,
    phase: Vec<f64>,
    num_frames: usize,
    fft_size: usize,
    hop: usize,
    window_len: usize,
}

impl Spectrogram {
    fn from_frames(
        frames: Vec<Complex64>,
        num_frames: usize,
        fft_size: usize,
        hop: usize,
        window_len: usize,
    ) -> Self {
        let magnitude = frames.iter().map(|c| c.norm()).collect();
        let phase = frames.iter().map(|c| c.arg()).collect();
        Self {
            frames,
            magnitude,
            phase,
            num_frames,
            fft_size,
            hop,
            window_len,
        }
    }

    /// Rebuilds complex frames from a magnitude matrix and a phase matrix.
    ///
    /// Used for synthesis with the enhanced magnitude and the noisy phase.
    pub fn from_magnitude_phase(magnitude: &[f64], phase_source: &Spectrogram) -> Result<Self> {
        if magnitude.len() != phase_source.phase.len() {
            return Err(Error::Shape(format!(
                "magnitude has {} entries, phase has {}",
                magnitude.len(),
                phase_source.phase.len()
            )));
        }
        let frames = magnitude
            .iter()
            .zip(&phase_source.phase)
            .map(|(&m, &p)| Complex64::from_polar(m, p))
            .collect();
        Ok(Self::from_frames(
            frames,
            phase_source.num_frames,
            phase_source.fft_size,
            phase_source.hop,
            phase_source.window_len,
        ))
    }

    pub fn num_frames(&self) -> usize {
        self.num_frames
    }

    pub fn num_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    /// Complex coefficients, row-major `num_frames × num_bins`.
    pub fn frames(&self) -> &[Complex64] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &[Complex64] {
        let f = self.num_bins();
        &self.frames[t * f..(t + 1) * f]
    }

    /// Magnitudes, row-major `num_frames × num_bins`.
    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    /// Scales every coefficient by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self::from_frames(
            self.frames.iter().map(|c| c * gain).collect(),
            self.num_frames,
            self.fft_size,
            self.hop,
            self.window_len,
        )
    }
}

/// Short-time Fourier transform with a Hamming analysis window.
pub fn stft(w: &Waveform, cfg: &StftConfig) -> Result<Spectrogram> {
    let sr = w.sample_rate_hz();
    cfg.validate(sr)?;
    let win_len = cfg.window_len(sr);
    let hop = cfg.hop(sr);
    if w.len() < win_len {
        return Err(Error::InputTooShort {
            len: w.len(),
            needed: win_len,
        });
    }
    let window = cfg.window(sr);
    let n_frames = cfg.num_frames(w.len(), sr);
    let bins = cfg.num_bins();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.fft_size);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); cfg.fft_size];
    let mut frames = Vec::with_capacity(n_frames * bins);
    let samples = w.samples();
    for t in 0..n_frames {
        let start = t * hop;
        buf.fill(Complex64::default());
        for (slot, (s, wv)) in buf
            .iter_mut()
            .zip(samples[start..start + win_len].iter().zip(&window))
        {
            *slot = Complex64::new(s * wv, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        frames.extend_from_slice(&buf[..bins]);
    }
    Ok(Spectrogram::from_frames(
        frames,
        n_frames,
        cfg.fft_size,
        hop,
        win_len,
    ))
}

/// Per-sample sum of squared windows over every frame position.
pub(crate) fn overlap_add_normalizer(
    window: &[f64],
    hop: usize,
    num_frames: usize,
) -> Result<Vec<f64>> {
    let len = (num_frames.saturating_sub(1)) * hop + window.len();
    let mut sum = vec![0.0; len];
    for t in 0..num_frames {
        for (acc, w) in sum[t * hop..].iter_mut().zip(window) {
            *acc += w * w;
        }
    }
    if let Some((index, &s)) = sum
        .iter()
        .enumerate()
        .find(|(_, &s)| s < MIN_WINDOW_SUM)
    {
        return Err(Error::ColaViolation { index, sum: s });
    }
    Ok(sum)
}

/// Inverse STFT by weighted overlap-add.
///
/// Each inverse-transformed frame is multiplied by the synthesis window and
/// added into place; the result is divided by the summed squared windows.
/// The output covers `(T - 1) * hop + window_len` samples.
pub fn istft(s: &Spectrogram, cfg: &StftConfig) -> Result<Waveform> {
    let sr = SAMPLE_RATE_HZ;
    cfg.validate(sr)?;
    if s.fft_size != cfg.fft_size || s.hop != cfg.hop(sr) || s.window_len != cfg.window_len(sr)
    {
        return Err(Error::Shape(format!(
            "spectrogram (fft {}, hop {}, window {}) does not match config",
            s.fft_size, s.hop, s.window_len
        )));
    }
    if s.num_frames == 0 {
        return Err(Error::InputTooShort { len: 0, needed: 1 });
    }
    let window = cfg.window(sr);
    let norm = overlap_add_normalizer(&window, s.hop, s.num_frames)?;
    let n = cfg.fft_size;
    let bins = s.num_bins();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(n);
    let mut scratch = vec![Complex64::default(); ifft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); n];
    let mut out = vec![0.0; norm.len()];
    for t in 0..s.num_frames {
        let frame = s.frame(t);
        buf[..bins].copy_from_slice(frame);
        // Hermitian completion of the negative frequencies.
        for k in 1..n - bins + 1 {
            buf[n - k] = frame[k].conj();
        }
        // DC and Nyquist must be real for a real signal.
        buf[0].im = 0.0;
        buf[n / 2].im = 0.0;
        ifft.process_with_scratch(&mut buf, &mut scratch);
        let start = t * s.hop;
        for (i, w) in window.iter().enumerate() {
            out[start + i] += buf[i].re / n as f64 * w;
        }
    }
    for (o, d) in out.iter_mut().zip(&norm) {
        *o /= d;
    }
    Waveform::new(out, sr)
}
