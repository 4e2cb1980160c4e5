//! The projection-based SDR on magnitude spectra.

use seril::loss::{sdr_stsa, SDR_CLAMP_DB};

fn show(label: &str, est: &[f64], clean: &[f64]) -> seril::Result<()> {
    let r = sdr_stsa(est, clean)?;
    println!(
        "{label:<22} alpha {:>7.4}  target {:>8.4}  residual {:>8.4}  {:>7.3} dB",
        r.alpha_scale, r.signal_energy, r.residual_energy, r.sdr_db
    );
    Ok(())
}

fn main() -> seril::Result<()> {
    let clean = [1.0, 0.0];
    show("[1,1] vs [1,0]", &[1.0, 1.0], &clean)?;
    show("perfect", &clean, &clean)?;
    show("orthogonal", &[0.0, 1.0], &clean)?;

    let x = [3.0, 1.0, 0.5, 2.0];
    let y = [2.5, 1.5, 0.2, 2.2];
    show("estimate", &y, &x)?;
    // Rescaling the estimate leaves the score alone.
    for c in [0.1, 3.0, -2.0] {
        let scaled: Vec<f64> = y.iter().map(|v| v * c).collect();
        show(&format!("estimate x {c}"), &scaled, &x)?;
    }
    println!("scores are clamped to ±{SDR_CLAMP_DB} dB");
    Ok(())
}
