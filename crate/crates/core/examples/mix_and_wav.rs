//! Mix a voice with noise at a chosen SNR and write both as 16-bit WAV.
//!
//! ```text
//! cargo run --example mix_and_wav -- /tmp/mix 3.0
//! ```

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seril::data::{gen_harmonic_voice, gen_noise, NoiseKind};
use seril::dsp::{mix_at_snr, read_wav, snr_db, write_wav};

fn main() -> seril::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("seril_mix"));
    let snr: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3.0);
    std::fs::create_dir_all(&dir)?;

    let clean = gen_harmonic_voice(1, 2.0)?;
    let noise = gen_noise(2, 3.0, NoiseKind::Pink, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noisy = mix_at_snr(&clean, &noise, snr, &mut rng)?;

    write_wav(dir.join("clean.wav"), &clean)?;
    write_wav(dir.join("noisy.wav"), &noisy)?;

    // What comes back is quantized to 16 bits.
    let c = read_wav(dir.join("clean.wav"))?;
    let n = read_wav(dir.join("noisy.wav"))?;
    let residual: Vec<f64> = n.samples().iter().zip(c.samples()).map(|(a, b)| a - b).collect();
    let exact: Vec<f64> = noisy.samples().iter().zip(clean.samples()).map(|(a, b)| a - b).collect();
    println!("requested {snr:.2} dB");
    println!("in memory {:.4} dB", snr_db(clean.samples(), &exact));
    println!("from WAV  {:.4} dB", snr_db(c.samples(), &residual));
    println!("wrote {}", dir.display());
    Ok(())
}
