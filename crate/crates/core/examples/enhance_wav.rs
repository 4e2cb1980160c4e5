//! Enhance a noisy WAV with a saved model, keeping the noisy phase.
//!
//! Usage: cargo run --example enhance_wav [MODEL NOISY_WAV OUT_WAV]
//!
//! Without arguments a model is trained briefly on a synthetic task and one
//! of its test utterances is enhanced into the temp directory.

use seril::data::{build_task, magnitude_tensor, NoiseKind, TaskSpec};
use seril::dsp::{istft, read_wav, stft, write_wav, Spectrogram, StftConfig, Waveform};
use seril::harness::{train_task, Strategy, TrainConfig};
use seril::loss::sdr_stsa;
use seril::model::{Enhancer, EnhancerConfig, EnhancerModel};

fn enhance(model: &EnhancerModel, noisy: &Waveform, cfg: &StftConfig) -> seril::Result<Waveform> {
    let spec = stft(noisy, cfg)?;
    let mag = model.enhance(&magnitude_tensor(&spec)?)?;
    istft(&Spectrogram::from_magnitude_phase(mag.values(), &spec)?, cfg)
}

fn main() -> seril::Result<()> {
    env_logger::init();
    let cfg = StftConfig::default();
    let args: Vec<String> = std::env::args().skip(1).collect();
    if let [model, input, output] = args.as_slice() {
        let model = EnhancerModel::load(model)?;
        let out = enhance(&model, &read_wav(input)?, &cfg)?;
        write_wav(output, &out)?;
        println!("wrote {output} ({:.2} s)", out.duration_s());
        return Ok(());
    }

    let dir = tempfile::tempdir()?;
    let train = build_task(&TaskSpec::new("T0", vec![NoiseKind::Hum], 16, 3), dir.path().join("T0"))?;
    let test = build_task(&TaskSpec::new("E0", vec![NoiseKind::Hum], 4, 3).test(), dir.path().join("E0"))?;
    let mut model = EnhancerModel::init(EnhancerConfig {
        num_lstm_layers: 1,
        hidden_dim: 32,
        ..EnhancerConfig::default()
    })?;
    let tc = TrainConfig {
        epochs: 30,
        strategy: Strategy::Finetune,
        ..TrainConfig::default()
    };
    train_task(&mut model, &train.load_pairs(&cfg)?, &tc, None, None)?;

    let (noisy, clean) = test.load_waveforms(0)?;
    let out = enhance(&model, &noisy, &cfg)?;
    let clean_mag = stft(&clean, &cfg)?;
    for (name, w) in [("noisy", &noisy), ("enhanced", &out)] {
        let s = stft(w, &cfg)?;
        let sdr = sdr_stsa(s.magnitude(), clean_mag.magnitude())?.sdr_db;
        println!("{name}: {sdr:.2} dB");
    }
    let path = std::env::temp_dir().join("seril_enhanced.wav");
    write_wav(&path, &out)?;
    println!("wrote {}", path.display());
    Ok(())
}
