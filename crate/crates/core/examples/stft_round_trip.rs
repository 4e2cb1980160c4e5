//! Analysis and resynthesis of a synthetic voice.
//!
//! ```text
//! cargo run --example stft_round_trip
//! ```

use seril::data::gen_harmonic_voice;
use seril::dsp::{istft, stft, StftConfig};

fn main() -> seril::Result<()> {
    let cfg = StftConfig::default();
    let voice = gen_harmonic_voice(7, 1.5)?;
    let spec = stft(&voice, &cfg)?;
    println!(
        "{} samples -> {} frames x {} bins (window {}, hop {})",
        voice.len(),
        spec.num_frames(),
        spec.num_bins(),
        spec.window_len(),
        spec.hop()
    );

    let back = istft(&spec, &cfg)?;
    let orig = &voice.samples()[..back.len()];
    let err = back
        .samples()
        .iter()
        .zip(orig)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("resynthesized {} samples, max abs error {err:.2e}", back.len());

    // Loudest bin of a frame in the middle.
    let t = spec.num_frames() / 2;
    let mags = &spec.magnitude()[t * spec.num_bins()..(t + 1) * spec.num_bins()];
    let (k, m) = mags
        .iter()
        .enumerate()
        .fold((0, 0.0), |b, (k, &m)| if m > b.1 { (k, m) } else { b });
    let hz = k as f64 * 16000.0 / spec.fft_size() as f64;
    println!("frame {t}: peak at bin {k} ({hz:.0} Hz), magnitude {m:.2}");
    Ok(())
}
