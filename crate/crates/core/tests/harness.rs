use std::sync::OnceLock;

use seril::continual::{ImportanceState, PathAccumulator, RegConfig, SpectralPair};
use seril::data::{build_task, NoiseKind, TaskSpec};
use seril::dsp::StftConfig;
use seril::harness::{
    adapt_sequence, evaluate, evaluate_with_workers, pretrain, run_sequence, train_task, EvalMatrix,
    OptimizerKind, SequenceConfig, Strategy, TrainConfig,
};
use seril::loss::sdr_stsa;
use seril::model::{Bypass, EnhancerConfig, EnhancerModel};

fn pairs(spec: TaskSpec) -> Vec<SpectralPair> {
    let dir = tempfile::tempdir().unwrap();
    build_task(&spec, dir.path())
        .unwrap()
        .load_pairs(&StftConfig::default())
        .unwrap()
}

fn short(mut spec: TaskSpec) -> TaskSpec {
    spec.duration_s = 0.5;
    spec
}

struct Corpus {
    tasks: Vec<Vec<SpectralPair>>,
    tests: Vec<Vec<SpectralPair>>,
}

/// White-noise pretraining, then bursts; two matching test sets.
fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| Corpus {
        tasks: vec![
            pairs(short(TaskSpec::new("T0", vec![NoiseKind::White, NoiseKind::Pink], 8, 11))),
            pairs(short(TaskSpec::new("T1", vec![NoiseKind::Bursts], 8, 12))),
        ],
        tests: vec![
            pairs(short(TaskSpec::new("E0", vec![NoiseKind::White, NoiseKind::Pink], 12, 13).test())),
            pairs(short(TaskSpec::new("E1", vec![NoiseKind::Bursts], 12, 14).test())),
        ],
    })
}

fn small_model() -> EnhancerConfig {
    EnhancerConfig {
        num_lstm_layers: 1,
        hidden_dim: 32,
        ..EnhancerConfig::default()
    }
}

fn seq_config(strategy: Strategy, lambda: f64) -> SequenceConfig {
    let reg = RegConfig {
        lambda,
        ..RegConfig::default()
    };
    SequenceConfig {
        model: small_model(),
        pretrain: TrainConfig {
            epochs: 40,
            strategy: Strategy::Finetune,
            seed: 1,
            ..TrainConfig::default()
        },
        adapt: TrainConfig {
            epochs: 8,
            strategy,
            reg,
            seed: 2,
            ..TrainConfig::default()
        },
        fisher_max_utterances: Some(24),
        workers: 1,
    }
}

/// A pretrained model and its consolidated state, shared by several tests.
fn pretrained() -> &'static (EnhancerModel, ImportanceState) {
    static P: OnceLock<(EnhancerModel, ImportanceState)> = OnceLock::new();
    P.get_or_init(|| {
        let cfg = seq_config(Strategy::Seril, 1.0);
        let mut pre = pretrain(&corpus().tasks[0], &cfg).unwrap();
        let state = pre.consolidate(&corpus().tasks[0], &cfg).unwrap();
        (pre.model, state)
    })
}

fn sgd(lambda: f64, epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        optimizer: OptimizerKind::Sgd,
        lr,
        epochs,
        strategy: Strategy::Seril,
        reg: RegConfig {
            lambda,
            ..RegConfig::default()
        },
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn one_utterance_can_be_memorized() {
    let data = vec![corpus().tasks[1][3].clone()];
    let mut model = EnhancerModel::init(EnhancerConfig::default()).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        lr: 1e-2,
        strategy: Strategy::Finetune,
        ..TrainConfig::default()
    };
    train_task(&mut model, &data, &cfg, None, None).unwrap();
    let score = evaluate(&model, &data).unwrap();
    assert!(score >= 20.0, "{score}");
}

#[test]
fn huge_lambda_pins_parameters() {
    let (m0, state) = pretrained();
    let mut model = m0.clone();
    // A clipped step moves at most lr × grad_clip, which bounds the jitter
    // around the anchor.
    train_task(&mut model, &corpus().tasks[1], &sgd(1e9, 2, 1e-4), Some(state), None).unwrap();
    let moved = model.params().max_abs_diff(state.anchor());
    assert!(moved < 1e-3, "{moved}");
}

#[test]
fn displacement_shrinks_as_lambda_grows() {
    let (m0, state) = pretrained();
    let mut last = f64::INFINITY;
    for lambda in [0.0, 1e1, 1e3, 1e6, 1e9] {
        let mut model = m0.clone();
        train_task(&mut model, &corpus().tasks[1], &sgd(lambda, 2, 1e-3), Some(state), None).unwrap();
        let d = model.params().l2_distance(state.anchor());
        assert!(d <= last, "λ = {lambda}: {d} > {last}");
        last = d;
    }
}

#[test]
fn repeated_training_is_identical() {
    let (m0, state) = pretrained();
    let cfg = TrainConfig {
        epochs: 2,
        reg: RegConfig {
            lambda: 5.0,
            ..RegConfig::default()
        },
        ..TrainConfig::default()
    };
    let run = || {
        let mut model = m0.clone();
        let mut path = PathAccumulator::new(model.snapshot());
        let log = train_task(&mut model, &corpus().tasks[1], &cfg, Some(state), Some(&mut path)).unwrap();
        (model, path, log)
    };
    assert_eq!(run(), run());
}

#[test]
fn zero_lambda_matches_finetune_bit_for_bit() {
    let (m0, state) = pretrained();
    let base = TrainConfig {
        epochs: 2,
        seed: 9,
        reg: RegConfig {
            lambda: 0.0,
            ..RegConfig::default()
        },
        ..TrainConfig::default()
    };
    let mut a = m0.clone();
    let mut b = m0.clone();
    let la = train_task(&mut a, &corpus().tasks[1], &TrainConfig { strategy: Strategy::Seril, ..base }, Some(state), None).unwrap();
    let lb = train_task(&mut b, &corpus().tasks[1], &TrainConfig { strategy: Strategy::Finetune, ..base }, None, None).unwrap();
    assert_eq!(la, lb);
    let bits = |m: &EnhancerModel| m.params().values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn strategy_none_scores_only_the_pretrained_model() {
    let (m0, _) = pretrained();
    let c = corpus();
    let r = adapt_sequence(m0.clone(), None, &c.tasks, &c.tests, &seq_config(Strategy::None, 0.0), None).unwrap();
    assert!(r.matrix.get(0, 0).is_some());
    assert!(r.matrix.get(1, 1).is_none());
    assert!(!r.matrix.is_complete());
    assert!(r.matrix.to_csv().contains("M1,E1,absent"));
    assert_eq!(r.models.len(), 1);
}

#[test]
fn seril_without_state_is_rejected() {
    let (m0, _) = pretrained();
    let c = corpus();
    assert!(adapt_sequence(m0.clone(), None, &c.tasks, &c.tests, &seq_config(Strategy::Seril, 1.0), None).is_err());
}

#[test]
fn two_task_sequence_adapts_and_seril_forgets_less() {
    let (m0, state) = pretrained();
    let c = corpus();
    let ft = adapt_sequence(m0.clone(), None, &c.tasks, &c.tests, &seq_config(Strategy::Finetune, 0.0), None).unwrap();
    let sr = adapt_sequence(m0.clone(), Some(state.clone()), &c.tasks, &c.tests, &seq_config(Strategy::Seril, 2.0), None).unwrap();
    let score = |m: &EvalMatrix, i, j| m.require(i, j).unwrap();
    assert!(score(&ft.matrix, 1, 1) > score(&ft.matrix, 0, 1));
    assert!(score(&sr.matrix, 1, 1) > score(&sr.matrix, 0, 1));
    let drop_ft = score(&ft.matrix, 0, 0) - score(&ft.matrix, 1, 0);
    let drop_sr = score(&sr.matrix, 0, 0) - score(&sr.matrix, 1, 0);
    assert!(drop_sr < drop_ft, "seril {drop_sr} vs finetune {drop_ft}");
}

#[test]
fn full_sequence_is_reproducible() {
    let c = corpus();
    let mut cfg = seq_config(Strategy::Seril, 1.0);
    cfg.pretrain.epochs = 2;
    cfg.adapt.epochs = 2;
    let a = run_sequence(&c.tasks, &c.tests, &cfg, None).unwrap();
    let b = run_sequence(&c.tasks, &c.tests, &cfg, None).unwrap();
    assert_eq!(a.matrix, b.matrix);
    assert_eq!(a.matrix.to_csv(), b.matrix.to_csv());
    assert_eq!(a.states, b.states);
}

#[test]
fn evaluation_is_exact_and_order_independent() {
    let clean: Vec<SpectralPair> = corpus().tests[0]
        .iter()
        .map(|p| SpectralPair {
            noisy: p.clean.clone(),
            clean: p.clean.clone(),
        })
        .collect();
    assert_eq!(evaluate(&Bypass, &clean).unwrap(), 60.0);

    let (m0, _) = pretrained();
    let data = &corpus().tests[0];
    let one = evaluate(m0, data).unwrap();
    assert_eq!(one, evaluate(m0, data).unwrap());
    assert_eq!(one, evaluate_with_workers(m0, data, 3).unwrap());
    let noisy: f64 = data
        .iter()
        .map(|p| sdr_stsa(p.noisy.values(), p.clean.values()).unwrap().sdr_db)
        .sum::<f64>()
        / data.len() as f64;
    assert!((evaluate(&Bypass, data).unwrap() - noisy).abs() < 1e-12);
}
