//! Forgetting statistics and charts from hand-built score matrices.
//!
//! Usage: cargo run --example forgetting_report [OUT_DIR]

use seril::harness::{compute_forgetting, emit_report, EvalMatrix, Strategy};

fn matrix(strategy: Strategy, rows: &[[f64; 3]]) -> EvalMatrix {
    let ids = vec!["E0".to_string(), "E1".to_string(), "E2".to_string()];
    let mut m = EvalMatrix::new(strategy, rows.len(), ids);
    m.scores = rows.iter().map(|r| Some(r.to_vec())).collect();
    m.noisy = vec![2.0, 1.5, 0.5];
    m
}

fn main() -> seril::Result<()> {
    let finetune = matrix(
        Strategy::Finetune,
        &[[9.0, 4.0, 3.0], [6.5, 8.0, 3.5], [5.0, 5.5, 7.5]],
    );
    let seril = matrix(
        Strategy::Seril,
        &[[9.0, 4.0, 3.0], [8.5, 7.6, 3.4], [8.0, 7.0, 7.1]],
    );

    let report = compute_forgetting(&seril, Some(&finetune))?;
    for d in &report.drops {
        println!("drop on {}: {:.2} dB", d.testset_id, d.value_db);
    }
    println!("average forgetting: {:.3} dB", report.average_forgetting);
    if let Some(r) = report.relative_forgetting_vs_finetune {
        println!("relative to finetune: {r:.3}");
    }

    let out = match std::env::args().nth(1) {
        Some(p) => std::path::PathBuf::from(p),
        None => std::env::temp_dir().join("seril_forgetting_report"),
    };
    emit_report(&seril, Some(&report), Some(&finetune), &out)?;
    println!("wrote {}", out.display());
    print!("{}", seril.to_csv());
    Ok(())
}
