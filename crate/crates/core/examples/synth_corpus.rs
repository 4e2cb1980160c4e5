//! Generate one small task on disk and inspect its manifest.
//!
//! ```text
//! cargo run --example synth_corpus -- /tmp/corpus
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use seril::data::{build_task, load_manifest, NoiseKind, TaskSpec, MANIFEST_FILE};

fn main() -> seril::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("seril_corpus"));

    let mut spec = TaskSpec::new("T1", vec![NoiseKind::Hum, NoiseKind::Clicks], 3, 42);
    spec.snr_levels_db = vec![-3.0, 6.0];
    let built = build_task(&spec, &dir)?;
    println!("{}: {} pairs in {}", built.task_id, built.len(), dir.display());

    let loaded = load_manifest(dir.join(MANIFEST_FILE))?;
    assert_eq!(loaded, built);

    let mut by_kind: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &loaded.entries {
        *by_kind.entry(e.noise_kind.name()).or_default() += 1;
    }
    for (kind, n) in by_kind {
        println!("  {kind:<8} {n}");
    }
    for e in loaded.entries.iter().take(3) {
        println!("  {} + {} @ {} dB", e.clean_path.display(), e.noise_kind.name(), e.snr_db);
    }

    let test = build_task(&TaskSpec::new("E1", vec![NoiseKind::Hum], 4, 42).test(), dir.join("test"))?;
    let snrs: Vec<f64> = test.entries.iter().map(|e| e.snr_db).collect();
    println!("test split, one SNR per utterance: {snrs:?}");
    Ok(())
}
