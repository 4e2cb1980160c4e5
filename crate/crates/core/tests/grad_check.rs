use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seril::continual::{regularized_loss, ImportanceState, PathAccumulator, RegConfig, SpectralPair};
use seril::grad::{finite_diff_check, GradCheckConfig, ParamVector, Tape, Tensor};
use seril::loss::loss_neg_sdr;
use seril::model::{EnhancerConfig, EnhancerModel};

fn pair(seed: u64, frames: usize) -> SpectralPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clean: Vec<f64> = (0..frames * 257).map(|_| rng.gen_range(0.0..2.0)).collect();
    let noisy = clean.iter().map(|c| c + rng.gen_range(0.0..1.0)).collect();
    SpectralPair {
        noisy: Tensor::matrix(frames, 257, noisy).unwrap(),
        clean: Tensor::matrix(frames, 257, clean).unwrap(),
    }
}

fn model_at(cfg: EnhancerConfig, p: &ParamVector) -> EnhancerModel {
    let mut m = EnhancerModel::init(cfg).unwrap();
    m.restore(p.clone()).unwrap();
    m
}

/// A 1e-4 step keeps round-off in the difference quotient well below the
/// smallest sampled gradients.
fn check() -> GradCheckConfig {
    GradCheckConfig {
        num_params: 24,
        step: 1e-4,
        seed: 3,
        ..GradCheckConfig::default()
    }
}

#[test]
fn neg_sdr_gradient_on_desk_model() {
    let cfg = EnhancerConfig::default();
    let p0 = EnhancerModel::init(cfg).unwrap().snapshot();
    let data = pair(1, 6);
    let report = finite_diff_check(
        &p0,
        |p| {
            let m = model_at(cfg, p);
            let mut tape = Tape::new(p);
            let vars = m.register(&mut tape)?;
            let l = loss_neg_sdr(&mut tape, &m, &vars, &data.noisy, &data.clean)?;
            Ok((tape.value(l).values()[0], tape.backward(l)?))
        },
        &check(),
    )
    .unwrap();
    assert!(report.indices.len() >= 20);
}

/// A state with nonzero importances and an anchor away from the parameters.
fn consolidated(p: &ParamVector, seed: u64) -> ImportanceState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchor = p.with_values(p.values().iter().map(|v| v + rng.gen_range(-0.05..0.05)).collect()).unwrap();
    let mut acc = PathAccumulator::new(p.clone());
    let g = p.with_values((0..p.len()).map(|_| rng.gen_range(-1.0..0.0)).collect()).unwrap();
    acc.accumulate(&g, p, &anchor).unwrap();
    let fisher = seril::continual::FisherDiag::new((0..p.len()).map(|_| rng.gen_range(0.0..3.0)).collect()).unwrap();
    ImportanceState::initial(p)
        .finalize_with_fisher(&mut acc, &anchor, fisher, &RegConfig::default())
        .unwrap()
}

#[test]
fn regularized_loss_gradient_on_desk_model() {
    let cfg = EnhancerConfig::default();
    let p0 = EnhancerModel::init(cfg).unwrap().snapshot();
    let state = consolidated(&p0, 9);
    let reg = RegConfig {
        lambda: 2.0,
        ..RegConfig::default()
    };
    let batch = [pair(2, 4), pair(3, 5)];
    finite_diff_check(
        &p0,
        |p| {
            let m = model_at(cfg, p);
            let mut tape = Tape::new(p);
            let vars = m.register(&mut tape)?;
            let l = regularized_loss(&mut tape, &m, &vars, &batch, Some(&state), &reg)?;
            Ok((tape.value(l).values()[0], tape.backward(l)?))
        },
        &check(),
    )
    .unwrap();
}

#[test]
fn neg_sdr_gradient_on_full_size_model() {
    let cfg = EnhancerConfig::full_scale(5);
    let p0 = EnhancerModel::init(cfg).unwrap().snapshot();
    let data = pair(4, 3);
    finite_diff_check(
        &p0,
        |p| {
            let m = model_at(cfg, p);
            let mut tape = Tape::new(p);
            let vars = m.register(&mut tape)?;
            let l = loss_neg_sdr(&mut tape, &m, &vars, &data.noisy, &data.clean)?;
            Ok((tape.value(l).values()[0], tape.backward(l)?))
        },
        // Gradients here are mostly below 1e-6, so the step grows with them.
        &GradCheckConfig {
            step: 5e-4,
            ..check()
        },
    )
    .unwrap();
}

#[test]
fn penalty_gradient_is_exact_for_a_quadratic() {
    let cfg = EnhancerConfig {
        num_lstm_layers: 1,
        hidden_dim: 4,
        ..EnhancerConfig::default()
    };
    let p0 = EnhancerModel::init(cfg).unwrap().snapshot();
    let state = consolidated(&p0, 11);
    let reg = RegConfig::default();
    finite_diff_check(
        &p0,
        |p| {
            let mut tape = Tape::new(p);
            let vars = tape.params(p)?;
            let l = state.penalty_on_tape(&mut tape, &vars, &reg)?;
            Ok((tape.value(l).values()[0], tape.backward(l)?))
        },
        &GradCheckConfig {
            num_params: 40,
            tol: 1e-6,
            ..GradCheckConfig::default()
        },
    )
    .unwrap();
}
