use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::continual::RegConfig;
use crate::data::{derive_seed, NoiseKind, TaskSpec};
use crate::dsp::{StftConfig, SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::harness::{SequenceConfig, Strategy, TrainConfig};
use crate::model::EnhancerConfig;

/// Everything one run needs, as read from a JSON file.
///
/// `seed` is the single source of randomness: the seeds inside `model`,
/// `pretrain`, `adapt`, `tasks` and `tests` only salt streams derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub stft: StftConfig,
    #[serde(default)]
    pub model: EnhancerConfig,
    #[serde(default = "default_pretrain")]
    pub pretrain: TrainConfig,
    #[serde(default)]
    pub adapt: TrainConfig,
    #[serde(default)]
    pub fisher_max_utterances: Option<usize>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub tasks: Vec<TaskSpec>,
    pub tests: Vec<TaskSpec>,
}

fn default_pretrain() -> TrainConfig {
    SequenceConfig::default().pretrain
}

fn default_workers() -> usize {
    1
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    /// The desk-scale protocol: four stationary kinds for pretraining and
    /// four intermittent kinds, one per adaptation task.
    pub fn desk(data_dir: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        let stationary = vec![
            NoiseKind::White,
            NoiseKind::Pink,
            NoiseKind::Hum,
            NoiseKind::BabbleSurrogate,
        ];
        let adapt = [
            NoiseKind::Bursts,
            NoiseKind::Chirps,
            NoiseKind::Thumps,
            NoiseKind::Clicks,
        ];
        let mut tasks = vec![TaskSpec::new("T0", stationary.clone(), 20, 0)];
        let mut tests = vec![TaskSpec::new("E0", stationary, 24, 0).test()];
        for (i, k) in adapt.into_iter().enumerate() {
            tasks.push(TaskSpec::new(format!("T{}", i + 1), vec![k], 10, 0));
            tests.push(TaskSpec::new(format!("E{}", i + 1), vec![k], 24, 0).test());
        }
        let reg = RegConfig {
            lambda: 2.0,
            ..RegConfig::default()
        };
        Self {
            seed: 0,
            data_dir: data_dir.into(),
            out_dir: out_dir.into(),
            stft: StftConfig::default(),
            model: EnhancerConfig::default(),
            pretrain: TrainConfig {
                epochs: 20,
                strategy: Strategy::Finetune,
                reg,
                ..TrainConfig::default()
            },
            adapt: TrainConfig {
                reg,
                ..TrainConfig::default()
            },
            fisher_max_utterances: Some(120),
            workers: 1,
            tasks,
            tests,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate(SAMPLE_RATE_HZ)?;
        self.sequence_config().validate()?;
        if self.tasks.is_empty() {
            return Err(Error::Config("at least one task is required".into()));
        }
        if self.tests.is_empty() {
            return Err(Error::Config("at least one test set is required".into()));
        }
        if self.model.feature_dim != self.stft.num_bins() {
            return Err(Error::Config(format!(
                "model.feature_dim {} does not match {} STFT bins",
                self.model.feature_dim,
                self.stft.num_bins()
            )));
        }
        let mut ids = std::collections::BTreeSet::new();
        for s in self.tasks.iter().chain(&self.tests) {
            s.validate()?;
            if !ids.insert(s.task_id.as_str()) {
                return Err(Error::Config(format!("duplicate task_id {}", s.task_id)));
            }
        }
        if let Some(t) = self.tasks.iter().find(|t| t.split != crate::data::Split::Train) {
            return Err(Error::Config(format!("{} in tasks must use the train split", t.task_id)));
        }
        if let Some(t) = self.tests.iter().find(|t| t.split != crate::data::Split::Test) {
            return Err(Error::Config(format!("{} in tests must use the test split", t.task_id)));
        }
        Ok(())
    }

    /// Training settings with every seed derived from the run seed.
    pub fn sequence_config(&self) -> SequenceConfig {
        let mut model = self.model;
        model.seed = derive_seed(self.seed, &[1, self.model.seed]);
        SequenceConfig {
            model,
            pretrain: TrainConfig {
                seed: derive_seed(self.seed, &[2, self.pretrain.seed]),
                ..self.pretrain
            },
            adapt: TrainConfig {
                seed: derive_seed(self.seed, &[3, self.adapt.seed]),
                ..self.adapt
            },
            fisher_max_utterances: self.fisher_max_utterances,
            workers: self.workers,
        }
    }

    /// Task and test specs with their effective seeds.
    pub fn task_specs(&self) -> (Vec<TaskSpec>, Vec<TaskSpec>) {
        let salt = |group: u64, list: &[TaskSpec]| -> Vec<TaskSpec> {
            list.iter()
                .enumerate()
                .map(|(i, s)| TaskSpec {
                    seed: derive_seed(self.seed, &[group, i as u64, s.seed]),
                    ..s.clone()
                })
                .collect()
        };
        (salt(4, &self.tasks), salt(5, &self.tests))
    }

    pub fn task_dir(&self, task_id: &str) -> PathBuf {
        self.data_dir.join(task_id)
    }

    pub fn pretrain_dir(&self) -> PathBuf {
        self.out_dir.join("pretrain")
    }

    pub fn strategy_dir(&self, strategy: Strategy) -> PathBuf {
        self.out_dir.join(strategy.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_config_is_valid_and_round_trips() {
        let cfg = RunConfig::desk("d", "o");
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_named() {
        let mut v = serde_json::to_value(RunConfig::desk("d", "o")).unwrap();
        v["adapt"]["reg"]["lamda"] = 3.0.into();
        let err = serde_json::from_value::<RunConfig>(v).unwrap_err();
        assert!(err.to_string().contains("lamda"), "{err}");
    }

    #[test]
    fn seeds_follow_the_run_seed() {
        let mut a = RunConfig::desk("d", "o");
        let s0 = a.sequence_config();
        let (t0, e0) = a.task_specs();
        a.seed = 9;
        let s9 = a.sequence_config();
        let (t9, e9) = a.task_specs();
        assert_ne!(s0.model.seed, s9.model.seed);
        assert_ne!(s0.pretrain.seed, s9.pretrain.seed);
        assert_ne!(t0[1].seed, t9[1].seed);
        assert_ne!(e0[0].seed, e9[0].seed);
        assert_ne!(t0[0].seed, t0[1].seed);
    }

    #[test]
    fn mismatched_feature_dim_is_rejected() {
        let mut cfg = RunConfig::desk("d", "o");
        cfg.model.feature_dim = 128;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }
}
