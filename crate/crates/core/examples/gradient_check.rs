//! Central differences against the tape on the enhancer's loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seril::grad::{finite_diff_check, GradCheckConfig, Tape, Tensor};
use seril::loss::loss_neg_sdr;
use seril::model::{EnhancerConfig, EnhancerModel};

fn main() -> seril::Result<()> {
    let cfg = EnhancerConfig::default();
    let model = EnhancerModel::init(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let frames = 6;
    let clean: Vec<f64> = (0..frames * 257).map(|_| rng.gen_range(0.0..2.0)).collect();
    let noisy: Vec<f64> = clean.iter().map(|c| c + rng.gen_range(0.0..1.0)).collect();
    let noisy = Tensor::matrix(frames, 257, noisy)?;
    let clean = Tensor::matrix(frames, 257, clean)?;

    let report = finite_diff_check(
        model.params(),
        |p| {
            let mut m = model.clone();
            m.restore(p.clone())?;
            let mut tape = Tape::new(p);
            let vars = m.register(&mut tape)?;
            let loss = loss_neg_sdr(&mut tape, &m, &vars, &noisy, &clean)?;
            Ok((tape.value(loss).values()[0], tape.backward(loss)?))
        },
        &GradCheckConfig {
            num_params: 24,
            step: 1e-4,
            seed: 3,
            ..GradCheckConfig::default()
        },
    )?;

    println!("{} parameters, {} sampled", model.num_params(), report.indices.len());
    for ((i, a), n) in report.indices.iter().zip(&report.analytic).zip(&report.numeric).take(8) {
        println!("  θ[{i:>6}]  tape {a:>+.6e}  numeric {n:>+.6e}");
    }
    println!("max relative error {:.2e} at θ[{}]", report.max_rel_err, report.worst_index);
    Ok(())
}
