//! Fisher and path importances on a two-task toy problem.
//!
//! Each task is a quadratic bowl `½ Σ kᵢ (θᵢ − cᵢ)²`. Training on the first
//! bowl records the path, the task is consolidated, and the penalty then
//! holds the parameters that mattered while the second bowl pulls elsewhere.

use seril::continual::{
    estimate_fisher_diag, ImportanceState, PathAccumulator, RegConfig, SampleGradient,
};
use seril::grad::ParamVector;

struct Bowl {
    k: [f64; 3],
    c: [f64; 3],
    theta: ParamVector,
}

impl Bowl {
    fn grad(&self, theta: &ParamVector) -> ParamVector {
        let g = theta.values().iter().enumerate().map(|(i, t)| self.k[i] * (t - self.c[i]));
        theta.with_values(g.collect()).unwrap()
    }
}

impl SampleGradient for Bowl {
    /// A per-sample shift of the bowl's center.
    type Sample = f64;

    fn parameters(&self) -> &ParamVector {
        &self.theta
    }

    fn sample_gradient(&self, shift: &f64) -> seril::Result<ParamVector> {
        let g = (0..3).map(|i| self.k[i] * (self.theta.values()[i] - self.c[i] - shift));
        self.theta.with_values(g.collect())
    }
}

fn descend(
    bowl: &Bowl,
    theta: &mut ParamVector,
    state: Option<(&ImportanceState, &RegConfig)>,
    acc: &mut PathAccumulator,
) {
    for _ in 0..400 {
        let mut g = bowl.grad(theta);
        if let Some((s, cfg)) = state {
            let w = s.importance(cfg);
            for i in 0..3 {
                g.values_mut()[i] += 2.0 * cfg.lambda * w[i] * (theta.values()[i] - s.anchor().values()[i]);
            }
        }
        let before = theta.clone();
        for (t, gi) in theta.values_mut().iter_mut().zip(g.values()) {
            *t -= 0.01 * gi;
        }
        acc.accumulate(&g, &before, theta).unwrap();
    }
}

fn main() -> seril::Result<()> {
    let cfg = RegConfig {
        lambda: 1.0,
        ..RegConfig::default()
    };
    let start = ParamVector::zeros_with_layout([("theta", vec![3])]);
    let mut theta = start.clone();
    let mut acc = PathAccumulator::new(start.clone());

    let first = Bowl { k: [4.0, 0.5, 0.0], c: [1.0, 1.0, 1.0], theta: start.clone() };
    descend(&first, &mut theta, None, &mut acc);
    println!("after task 0: θ = {:.3?}, path credit w = {:.3?}", theta.values(), acc.w());

    let at_end = Bowl { theta: theta.clone(), ..first };
    let fisher = estimate_fisher_diag(&at_end, &[-0.1, 0.0, 0.1])?;
    let state = ImportanceState::initial(&start).finalize_with_fisher(&mut acc, &theta, fisher, &cfg)?;
    println!("F̃ = {:.4?}", state.fisher_tilde().values());
    println!("S = {:.4?}", state.path_scores());

    let second = Bowl { k: [1.0, 1.0, 1.0], c: [-1.0, -1.0, -1.0], theta: theta.clone() };
    let mut free = theta.clone();
    descend(&second, &mut free, None, &mut PathAccumulator::new(theta.clone()));
    let mut held = theta.clone();
    descend(&second, &mut held, Some((&state, &cfg)), &mut acc);
    println!("task 1 without penalty: θ = {:.3?}", free.values());
    println!("task 1 with penalty:    θ = {:.3?}", held.values());
    println!("penalty there: {:.4}", state.penalty(&held, &cfg)?);

    // The two measures can be used alone.
    for beta in [0.0, 1.0] {
        let c = RegConfig { beta, ..cfg };
        println!("β = {beta}: importance {:.4?}", state.importance(&c));
    }
    Ok(())
}
