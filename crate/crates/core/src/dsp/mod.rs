//! Time–frequency analysis and synthesis, SNR-controlled mixing and WAV I/O.
//!
//! The front-end is a 512-point STFT with a 32 ms periodic Hamming window and
//! a 16 ms hop at 16 kHz, which yields 257 one-sided bins per frame. Synthesis
//! is a weighted overlap-add normalized by the per-sample sum of squared
//! windows, so an unmodified spectrogram inverts exactly wherever frames cover
//! the signal.

mod mix;
mod stft;
mod wav;

pub use mix::{mix_at_snr, mix_at_snr_with_offset, power, snr_db};
pub use stft::{hamming_periodic, istft, stft, Spectrogram, StftConfig, WindowKind};
pub use wav::{read_wav, write_wav};

use crate::error::{Error, Result};

/// The only sample rate the front-end accepts.
pub const SAMPLE_RATE_HZ: u32 = 16_000;

/// A mono time-domain signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: u32,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("waveform"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
        })
    }

    /// Waveform at the default 16 kHz rate.
    pub fn from_samples(samples: Vec<f64>) -> Result<Self> {
        Self::new(samples, SAMPLE_RATE_HZ)
    }

    pub fn zeros(len: usize, sample_rate_hz: u32) -> Self {
        Self {
            samples: vec![0.0; len],
            sample_rate_hz,
        }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()))
    }

    /// Multiplies every sample by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|s| s * gain).collect(),
            sample_rate_hz: self.sample_rate_hz,
        }
    }
}
