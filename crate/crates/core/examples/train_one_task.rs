//! Train a small enhancer on one synthetic task and score it.

use seril::data::{build_task, NoiseKind, TaskSpec};
use seril::dsp::StftConfig;
use seril::harness::{evaluate, train_task, Strategy, TrainConfig};
use seril::model::{Bypass, EnhancerConfig, EnhancerModel};

fn main() -> seril::Result<()> {
    env_logger::init();
    let dir = tempfile::tempdir()?;
    let stft = StftConfig::default();
    let train = build_task(&TaskSpec::new("T0", vec![NoiseKind::White], 12, 1), dir.path().join("T0"))?
        .load_pairs(&stft)?;
    let test = build_task(&TaskSpec::new("E0", vec![NoiseKind::White], 16, 1).test(), dir.path().join("E0"))?
        .load_pairs(&stft)?;

    let mut model = EnhancerModel::init(EnhancerConfig::default())?;
    let cfg = TrainConfig {
        epochs: 30,
        strategy: Strategy::Finetune,
        ..TrainConfig::default()
    };
    println!("{} training pairs, {} test pairs", train.len(), test.len());
    println!("before: {:.3} dB (noisy {:.3} dB)", evaluate(&model, &test)?, evaluate(&Bypass, &test)?);
    let log = train_task(&mut model, &train, &cfg, None, None)?;
    for (e, l) in log.epoch_loss.iter().enumerate().step_by(5) {
        println!("  epoch {e}: loss {l:.4}");
    }
    println!("after {} steps: {:.3} dB", log.steps, evaluate(&model, &test)?);
    Ok(())
}
