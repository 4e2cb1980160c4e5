//! Synthetic corpora, task specifications and manifests.
//!
//! A task is a set of clean utterances mixed with one or more noise kinds at
//! a grid of SNRs. Training tasks use every (kind, SNR) combination per
//! utterance; test sets draw one kind and one SNR per utterance. Clean seeds
//! of the two splits come from disjoint halves of the `u64` range.

mod synth;

pub use synth::{
    clean_from_dir, gen_clean, gen_clicks, gen_harmonic_voice, gen_noise, wav_files, CleanKind,
    NoiseKind, CLICK_RATE_HZ,
};

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::continual::SpectralPair;
use crate::dsp::{mix_at_snr, read_wav, stft, write_wav, Spectrogram, StftConfig, Waveform};
use crate::error::{Error, Result};
use crate::grad::Tensor;

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

/// Largest absolute sample written to a noisy file.
const MAX_PEAK: f64 = 0.99;

const TEST_SEED_BIT: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

fn default_snrs() -> Vec<f64> {
    vec![-3.0, 0.0, 3.0, 6.0, 9.0, 12.0]
}

fn default_duration() -> f64 {
    1.0
}

fn default_clean_kind() -> CleanKind {
    CleanKind::HarmonicVoice
}

fn default_split() -> Split {
    Split::Train
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task_id: String,
    pub noise_kinds: Vec<NoiseKind>,
    #[serde(default = "default_snrs")]
    pub snr_levels_db: Vec<f64>,
    pub num_utterances: usize,
    pub seed: u64,
    #[serde(default = "default_split")]
    pub split: Split,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
    #[serde(default = "default_clean_kind")]
    pub clean_kind: CleanKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clean_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_dir: Option<PathBuf>,
}

impl TaskSpec {
    pub fn new(
        task_id: impl Into<String>,
        noise_kinds: Vec<NoiseKind>,
        num_utterances: usize,
        seed: u64,
    ) -> Self {
        Self {
            task_id: task_id.into(),
            noise_kinds,
            snr_levels_db: default_snrs(),
            num_utterances,
            seed,
            split: Split::Train,
            duration_s: default_duration(),
            clean_kind: CleanKind::HarmonicVoice,
            clean_dir: None,
            noise_dir: None,
        }
    }

    pub fn test(mut self) -> Self {
        self.split = Split::Test;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.task_id.is_empty() {
            return Err(Error::Config("task_id must not be empty".into()));
        }
        if self.noise_kinds.is_empty() {
            return Err(Error::Config(format!("{}: noise_kinds is empty", self.task_id)));
        }
        if self.snr_levels_db.is_empty() {
            return Err(Error::Config(format!("{}: snr_levels_db is empty", self.task_id)));
        }
        if self.snr_levels_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config(format!("{}: non-finite SNR", self.task_id)));
        }
        if self.num_utterances == 0 {
            return Err(Error::Config(format!(
                "{}: num_utterances must be at least 1",
                self.task_id
            )));
        }
        if !(0.5..=10.0).contains(&self.duration_s) {
            return Err(Error::Config(format!(
                "{}: duration_s {} outside [0.5, 10]",
                self.task_id, self.duration_s
            )));
        }
        if self.clean_kind == CleanKind::ExternalWav && self.clean_dir.is_none() {
            return Err(Error::Config(format!("{}: clean_dir missing", self.task_id)));
        }
        if self.noise_kinds.contains(&NoiseKind::ExternalWav) && self.noise_dir.is_none() {
            return Err(Error::Config(format!("{}: noise_dir missing", self.task_id)));
        }
        Ok(())
    }

    /// Number of pairs `build_task` produces.
    pub fn num_pairs(&self) -> usize {
        match self.split {
            Split::Train => self.num_utterances * self.noise_kinds.len() * self.snr_levels_db.len(),
            Split::Test => self.num_utterances,
        }
    }

    /// Clean-utterance seed; train and test seeds never coincide.
    pub fn utterance_seed(&self, index: usize) -> u64 {
        let s = derive_seed(self.seed, &[hash_str(&self.task_id), index as u64]);
        match self.split {
            Split::Train => s & !TEST_SEED_BIT,
            Split::Test => s | TEST_SEED_BIT,
        }
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into `base` to get an independent stream seed.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(base), |acc, p| splitmix(acc ^ splitmix(*p)))
}

fn hash_str(s: &str) -> u64 {
    // FNV-1a; stable across platforms and releases.
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub clean_path: PathBuf,
    pub noisy_path: PathBuf,
    pub noise_kind: NoiseKind,
    pub snr_db: f64,
    pub split: Split,
}

/// Index of a generated corpus. Paths are relative to `root`, the directory
/// holding the manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub task_id: String,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    pub root: PathBuf,
}

pub const MANIFEST_FILE: &str = "manifest.json";

impl Manifest {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn split(&self) -> Option<Split> {
        self.entries.first().map(|e| e.split)
    }

    /// Writes pretty JSON to `path` and points `root` at its directory.
    pub fn save(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        self.root = parent_dir(path);
        Ok(())
    }

    /// Checks version, split consistency and that every file exists.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported format_version {}",
                self.format_version
            )));
        }
        if let Some(first) = self.entries.first() {
            if self.entries.iter().any(|e| e.split != first.split) {
                return Err(Error::Manifest("mixed train and test entries".into()));
            }
        }
        for e in &self.entries {
            for p in [&e.clean_path, &e.noisy_path] {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::MissingFile(full));
                }
            }
        }
        Ok(())
    }

    pub fn load_waveforms(&self, index: usize) -> Result<(Waveform, Waveform)> {
        let e = self
            .entries
            .get(index)
            .ok_or_else(|| Error::Manifest(format!("no entry {index}")))?;
        let noisy = read_wav(self.resolve(&e.noisy_path))?;
        let clean = read_wav(self.resolve(&e.clean_path))?;
        if noisy.len() != clean.len() {
            return Err(Error::Manifest(format!(
                "entry {index}: noisy and clean lengths differ"
            )));
        }
        Ok((noisy, clean))
    }

    /// Noisy spectrogram of one entry, with phase.
    pub fn noisy_spectrogram(&self, index: usize, cfg: &StftConfig) -> Result<Spectrogram> {
        let (noisy, _) = self.load_waveforms(index)?;
        stft(&noisy, cfg)
    }

    /// Magnitude pairs of every entry, in manifest order.
    pub fn load_pairs(&self, cfg: &StftConfig) -> Result<Vec<SpectralPair>> {
        (0..self.entries.len())
            .map(|i| {
                let (noisy, clean) = self.load_waveforms(i)?;
                Ok(SpectralPair {
                    noisy: magnitude_tensor(&stft(&noisy, cfg)?)?,
                    clean: magnitude_tensor(&stft(&clean, cfg)?)?,
                })
            })
            .collect()
    }
}

/// `T × F` magnitude matrix of a spectrogram.
pub fn magnitude_tensor(s: &Spectrogram) -> Result<Tensor> {
    Tensor::new(vec![s.num_frames(), s.num_bins()], s.magnitude().to_vec())
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Parses and validates a manifest file.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let text = std::fs::read_to_string(path)?;
    let mut m: Manifest = serde_json::from_str(&text)?;
    m.root = parent_dir(path);
    m.validate()?;
    Ok(m)
}

fn snr_tag(snr: f64) -> String {
    let s = format!("{snr}");
    s.replace('-', "m").replace('.', "p")
}

/// Noise long enough to crop `len` samples from; retries with fresh seeds
/// when an intermittent kind lands on a silent stretch.
fn mix_pair(
    clean: &Waveform,
    kind: NoiseKind,
    snr: f64,
    seed: u64,
    noise_dir: Option<&Path>,
) -> Result<Waveform> {
    let noise_s = (clean.duration_s() + 1.0).min(10.0).max(0.5);
    let mut last = Error::ZeroPower("noise");
    for attempt in 0..16u64 {
        let s = derive_seed(seed, &[attempt]);
        let noise = gen_noise(s, noise_s, kind, noise_dir)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(s, &[1]));
        match mix_at_snr(clean, &noise, snr, &mut rng) {
            Err(e @ Error::ZeroPower("noise")) => last = e,
            other => return other,
        }
    }
    Err(last)
}

/// Generates clean and noisy WAVs under `out_dir` and writes its manifest.
///
/// When a mixture would exceed the peak limit, clean and noisy are scaled
/// together and the scaled clean copy is written next to the noisy file, so
/// the stored SNR stays exact.
pub fn build_task(spec: &TaskSpec, out_dir: impl AsRef<Path>) -> Result<Manifest> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    let clean_dir = out_dir.join("clean");
    let noisy_dir = out_dir.join("noisy");
    std::fs::create_dir_all(&clean_dir)?;
    std::fs::create_dir_all(&noisy_dir)?;

    let mut entries = Vec::with_capacity(spec.num_pairs());
    let mut pick_rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, &[hash_str(&spec.task_id), 7]));
    for u in 0..spec.num_utterances {
        let useed = spec.utterance_seed(u);
        let clean = gen_clean(useed, spec.duration_s, spec.clean_kind, spec.clean_dir.as_deref())?;
        let clean_rel = PathBuf::from("clean").join(format!("utt_{u:04}.wav"));
        write_wav(out_dir.join(&clean_rel), &clean)?;

        let combos: Vec<(usize, NoiseKind, f64)> = match spec.split {
            Split::Train => spec
                .noise_kinds
                .iter()
                .enumerate()
                .flat_map(|(ki, k)| spec.snr_levels_db.iter().map(move |s| (ki, *k, *s)))
                .collect(),
            Split::Test => {
                let ki = pick_rng.gen_range(0..spec.noise_kinds.len());
                let snr = spec.snr_levels_db[pick_rng.gen_range(0..spec.snr_levels_db.len())];
                vec![(ki, spec.noise_kinds[ki], snr)]
            }
        };
        for (ki, kind, snr) in combos {
            let pair_seed = derive_seed(useed, &[ki as u64, snr.to_bits()]);
            let noisy = mix_pair(&clean, kind, snr, pair_seed, spec.noise_dir.as_deref())?;
            let stem = format!("utt_{u:04}_{}_{}", kind.name(), snr_tag(snr));
            let noisy_rel = PathBuf::from("noisy").join(format!("{stem}.wav"));
            let peak = noisy.peak();
            let clean_rel = if peak > MAX_PEAK {
                let g = MAX_PEAK / peak;
                let rel = PathBuf::from("clean").join(format!("{stem}.wav"));
                write_wav(out_dir.join(&rel), &clean.scaled(g))?;
                write_wav(out_dir.join(&noisy_rel), &noisy.scaled(g))?;
                rel
            } else {
                write_wav(out_dir.join(&noisy_rel), &noisy)?;
                clean_rel.clone()
            };
            entries.push(ManifestEntry {
                clean_path: clean_rel,
                noisy_path: noisy_rel,
                noise_kind: kind,
                snr_db: snr,
                split: spec.split,
            });
        }
    }
    let mut manifest = Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        task_id: spec.task_id.clone(),
        seed: spec.seed,
        entries,
        root: out_dir.to_path_buf(),
    };
    manifest.save(out_dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::snr_db;

    fn small(kinds: Vec<NoiseKind>, n: usize) -> TaskSpec {
        let mut s = TaskSpec::new("T1", kinds, n, 3);
        s.duration_s = 0.5;
        s
    }

    #[test]
    fn counts_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_task(&small(vec![NoiseKind::White], 10), dir.path()).unwrap();
        assert_eq!(m.len(), 60);
        assert!(m.entries.iter().all(|e| e.split == Split::Train));
    }

    #[test]
    fn rebuild_is_byte_identical_and_round_trips() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let spec = small(vec![NoiseKind::Pink, NoiseKind::Clicks], 2);
        let ma = build_task(&spec, a.path()).unwrap();
        let mb = build_task(&spec, b.path()).unwrap();
        assert_eq!(ma.entries, mb.entries);
        for e in &ma.entries {
            for p in [&e.clean_path, &e.noisy_path] {
                let x = std::fs::read(a.path().join(p)).unwrap();
                let y = std::fs::read(b.path().join(p)).unwrap();
                assert_eq!(x, y, "{}", p.display());
            }
        }
        let loaded = load_manifest(a.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(loaded, ma);
    }

    #[test]
    fn stored_snr_matches_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small(vec![NoiseKind::Hum, NoiseKind::Bursts], 1);
        let m = build_task(&spec, dir.path()).unwrap();
        for i in 0..m.len() {
            let (noisy, clean) = m.load_waveforms(i).unwrap();
            let noise: Vec<f64> = noisy
                .samples()
                .iter()
                .zip(clean.samples())
                .map(|(n, c)| n - c)
                .collect();
            let measured = snr_db(clean.samples(), &noise);
            assert!(
                (measured - m.entries[i].snr_db).abs() < 0.01,
                "entry {i}: {measured} vs {}",
                m.entries[i].snr_db
            );
        }
    }

    #[test]
    fn test_split_draws_one_combination_per_utterance() {
        let dir = tempfile::tempdir().unwrap();
        let spec = small(vec![NoiseKind::White, NoiseKind::Hum], 6).test();
        let m = build_task(&spec, dir.path()).unwrap();
        assert_eq!(m.len(), 6);
        assert!(m.entries.iter().all(|e| e.split == Split::Test));
        assert!(m.entries.iter().all(|e| spec.snr_levels_db.contains(&e.snr_db)));
    }

    #[test]
    fn seed_ranges_are_disjoint() {
        let train = TaskSpec::new("E0", vec![NoiseKind::White], 50, 1);
        let test = train.clone().test();
        for i in 0..50 {
            assert_eq!(train.utterance_seed(i) & TEST_SEED_BIT, 0);
            assert_ne!(test.utterance_seed(i) & TEST_SEED_BIT, 0);
        }
    }

    #[test]
    fn missing_wav_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_task(&small(vec![NoiseKind::White], 1), dir.path()).unwrap();
        let victim = dir.path().join(&m.entries[2].noisy_path);
        std::fs::remove_file(&victim).unwrap();
        let err = load_manifest(dir.path().join(MANIFEST_FILE)).unwrap_err();
        assert!(matches!(&err, Error::MissingFile(p) if *p == victim));
        assert!(err.to_string().contains("utt_0000"));
    }

    #[test]
    fn corrupt_json_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(MANIFEST_FILE);
        std::fs::write(&p, "{ not json").unwrap();
        assert!(matches!(load_manifest(&p), Err(Error::Json(_))));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = small(vec![], 1);
        assert!(s.validate().is_err());
        s.noise_kinds = vec![NoiseKind::White];
        s.num_utterances = 0;
        assert!(s.validate().is_err());
        s.num_utterances = 1;
        s.snr_levels_db.clear();
        assert!(s.validate().is_err());
        let unknown = r#"{"task_id":"T0","noise_kinds":["white"],"num_utterances":1,"seed":0,"bogus":1}"#;
        assert!(serde_json::from_str::<TaskSpec>(unknown).is_err());
    }

    #[test]
    fn pairs_have_matching_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_task(&small(vec![NoiseKind::White], 1), dir.path()).unwrap();
        let pairs = m.load_pairs(&StftConfig::default()).unwrap();
        assert_eq!(pairs.len(), 6);
        assert_eq!(pairs[0].noisy.shape(), &[30, 257]);
        assert_eq!(pairs[0].clean.shape(), pairs[0].noisy.shape());
    }
}
