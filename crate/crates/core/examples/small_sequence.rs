//! A three-task sequence run twice, once per strategy, on a tiny corpus.

use seril::data::{build_task, NoiseKind, TaskSpec};
use seril::dsp::StftConfig;
use seril::harness::{
    compute_forgetting, run_sequence, SequenceConfig, Strategy, TrainConfig,
};
use seril::continual::RegConfig;
use seril::model::EnhancerConfig;

fn main() -> seril::Result<()> {
    env_logger::init();
    let dir = tempfile::tempdir()?;
    let stft = StftConfig::default();
    let kinds = [
        vec![NoiseKind::White, NoiseKind::Pink],
        vec![NoiseKind::Bursts],
        vec![NoiseKind::Chirps],
    ];
    let mut tasks = Vec::new();
    let mut tests = Vec::new();
    for (i, k) in kinds.iter().enumerate() {
        let mut t = TaskSpec::new(format!("T{i}"), k.clone(), 6, 100 + i as u64);
        t.duration_s = 0.5;
        let mut e = TaskSpec::new(format!("E{i}"), k.clone(), 8, 200 + i as u64).test();
        e.duration_s = 0.5;
        tasks.push(build_task(&t, dir.path().join(&t.task_id))?.load_pairs(&stft)?);
        tests.push(build_task(&e, dir.path().join(&e.task_id))?.load_pairs(&stft)?);
    }

    let config = |strategy| SequenceConfig {
        model: EnhancerConfig {
            num_lstm_layers: 1,
            hidden_dim: 32,
            ..EnhancerConfig::default()
        },
        pretrain: TrainConfig {
            epochs: 20,
            strategy: Strategy::Finetune,
            ..TrainConfig::default()
        },
        adapt: TrainConfig {
            epochs: 6,
            strategy,
            reg: RegConfig {
                lambda: 2.0,
                ..RegConfig::default()
            },
            seed: 1,
            ..TrainConfig::default()
        },
        fisher_max_utterances: Some(18),
        workers: 1,
    };

    let ft = run_sequence(&tasks, &tests, &config(Strategy::Finetune), None)?;
    let sr = run_sequence(&tasks, &tests, &config(Strategy::Seril), None)?;
    println!("finetune\n{}", ft.matrix.to_csv());
    println!("seril\n{}", sr.matrix.to_csv());

    let report = compute_forgetting(&sr.matrix, Some(&ft.matrix))?;
    let ft_report = compute_forgetting(&ft.matrix, None)?;
    println!(
        "average forgetting: seril {:.3} dB, finetune {:.3} dB",
        report.average_forgetting, ft_report.average_forgetting
    );
    for g in &report.adaptation_gain {
        println!("seril gain on {}: {:.3} dB", g.testset_id, g.value_db);
    }
    Ok(())
}
