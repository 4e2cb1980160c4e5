//! Enhance a noisy spectrogram with an untrained model, then save and reload it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use seril::data::{gen_harmonic_voice, gen_noise, magnitude_tensor, NoiseKind};
use seril::dsp::{mix_at_snr, stft, StftConfig};
use seril::model::{Enhancer, EnhancerConfig, EnhancerModel};

fn main() -> seril::Result<()> {
    let stft_cfg = StftConfig::default();
    let clean = gen_harmonic_voice(3, 1.0)?;
    let noise = gen_noise(4, 2.0, NoiseKind::White, None)?;
    let noisy = mix_at_snr(&clean, &noise, 0.0, &mut ChaCha8Rng::seed_from_u64(5))?;
    let mag = magnitude_tensor(&stft(&noisy, &stft_cfg)?)?;

    for cfg in [EnhancerConfig::default(), EnhancerConfig::full_scale(0)] {
        let model = EnhancerModel::init(cfg)?;
        let out = model.enhance(&mag)?;
        println!(
            "{} x {} LSTM: {:>9} params, {:?} -> {:?}, mean gain {:.3}",
            cfg.num_lstm_layers,
            cfg.hidden_dim,
            model.num_params(),
            mag.shape(),
            out.shape(),
            out.values().iter().sum::<f64>() / mag.values().iter().sum::<f64>()
        );
    }

    let model = EnhancerModel::init(EnhancerConfig::default())?;
    let path = std::env::temp_dir().join("seril_example.model");
    model.save(&path)?;
    let back = EnhancerModel::load(&path)?;
    assert_eq!(back.enhance(&mag)?, model.enhance(&mag)?);
    println!("checkpoint round trip ok: {}", path.display());
    Ok(())
}
