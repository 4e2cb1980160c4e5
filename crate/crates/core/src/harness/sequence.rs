use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::{train_task, Strategy, TrainConfig, TrainLog};
use crate::continual::{ImportanceState, PathAccumulator, SpectralPair};
use crate::error::{Error, Result};
use crate::loss::sdr_stsa;
use crate::model::{Bypass, Enhancer, EnhancerConfig, EnhancerModel};

pub const MATRIX_FORMAT_VERSION: u32 = 1;

/// Mean SDR^STSA in dB of `model` over `data`, in data order.
pub fn evaluate<E: Enhancer + Sync + ?Sized>(model: &E, data: &[SpectralPair]) -> Result<f64> {
    evaluate_with_workers(model, data, 1)
}

/// Per-utterance SDR^STSA scores. `workers > 1` splits the set into
/// contiguous chunks scored on scoped threads; the result does not depend on
/// the worker count.
pub fn score_utterances<E: Enhancer + Sync + ?Sized>(
    model: &E,
    data: &[SpectralPair],
    workers: usize,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let score = |p: &SpectralPair| -> Result<f64> {
        let enhanced = model.enhance(&p.noisy)?;
        Ok(sdr_stsa(enhanced.values(), p.clean.values())?.sdr_db)
    };
    let workers = workers.clamp(1, data.len());
    if workers == 1 {
        return data.iter().map(score).collect();
    }
    let chunk = data.len().div_ceil(workers);
    let parts: Vec<Result<Vec<f64>>> = std::thread::scope(|s| {
        let handles: Vec<_> = data
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(score).collect::<Result<Vec<f64>>>()))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect()
    });
    let mut out = Vec::with_capacity(data.len());
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

pub fn evaluate_with_workers<E: Enhancer + Sync + ?Sized>(
    model: &E,
    data: &[SpectralPair],
    workers: usize,
) -> Result<f64> {
    let scores = score_utterances(model, data, workers)?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Scores of each model on each test set; a `None` row marks a model the
/// run did not produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalMatrix {
    pub format_version: u32,
    pub strategy: Strategy,
    pub model_ids: Vec<String>,
    pub testset_ids: Vec<String>,
    pub scores: Vec<Option<Vec<f64>>>,
    /// Unprocessed noisy input scored on each test set.
    pub noisy: Vec<f64>,
}

impl EvalMatrix {
    pub fn new(strategy: Strategy, num_models: usize, testset_ids: Vec<String>) -> Self {
        Self {
            format_version: MATRIX_FORMAT_VERSION,
            strategy,
            model_ids: (0..num_models).map(|i| format!("M{i}")).collect(),
            scores: vec![None; num_models],
            noisy: vec![f64::NAN; testset_ids.len()],
            testset_ids,
        }
    }

    pub fn get(&self, model: usize, testset: usize) -> Option<f64> {
        self.scores
            .get(model)?
            .as_ref()
            .and_then(|r| r.get(testset).copied())
    }

    /// Score or an `IncompleteMatrix` error naming the cell.
    pub fn require(&self, model: usize, testset: usize) -> Result<f64> {
        match self.get(model, testset) {
            Some(v) if v.is_finite() => Ok(v),
            _ => Err(Error::IncompleteMatrix {
                model: self.model_ids.get(model).cloned().unwrap_or_else(|| format!("M{model}")),
                testset: self
                    .testset_ids
                    .get(testset)
                    .cloned()
                    .unwrap_or_else(|| format!("E{testset}")),
            }),
        }
    }

    pub fn is_complete(&self) -> bool {
        (0..self.model_ids.len())
            .all(|m| (0..self.testset_ids.len()).all(|t| self.require(m, t).is_ok()))
    }

    /// `model_id,testset_id,sdr_stsa_db`, one row per cell; absent models
    /// are written as `absent`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model_id,testset_id,sdr_stsa_db\n");
        for (m, id) in self.model_ids.iter().enumerate() {
            for (t, tid) in self.testset_ids.iter().enumerate() {
                match self.get(m, t) {
                    Some(v) => out.push_str(&format!("{id},{tid},{v:.6}\n")),
                    None => out.push_str(&format!("{id},{tid},absent\n")),
                }
            }
        }
        out
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let m: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if m.format_version != MATRIX_FORMAT_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported matrix format_version {}",
                m.format_version
            )));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SequenceConfig {
    pub model: EnhancerConfig,
    pub pretrain: TrainConfig,
    /// Settings for tasks after the first; its `strategy` selects the run.
    pub adapt: TrainConfig,
    /// Cap on the utterances used to estimate each task's Fisher; spread
    /// evenly over the task when set.
    pub fisher_max_utterances: Option<usize>,
    pub workers: usize,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            model: EnhancerConfig::default(),
            pretrain: TrainConfig {
                epochs: 30,
                ..TrainConfig::default()
            },
            adapt: TrainConfig::default(),
            fisher_max_utterances: None,
            workers: 1,
        }
    }
}

impl SequenceConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.pretrain.validate()?;
        self.adapt.validate()?;
        if self.fisher_max_utterances == Some(0) {
            return Err(Error::Config("fisher_max_utterances must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }

    pub fn strategy(&self) -> Strategy {
        self.adapt.strategy
    }

    /// Training settings for task `t`.
    pub fn task_config(&self, t: usize) -> TrainConfig {
        if t == 0 {
            self.pretrain
        } else {
            TrainConfig {
                seed: self.adapt.seed.wrapping_add(t as u64),
                ..self.adapt
            }
        }
    }
}

/// Evenly spaced subset of at most `cap` items.
pub fn spread_subset<T: Clone>(data: &[T], cap: Option<usize>) -> Vec<T> {
    match cap {
        Some(n) if n < data.len() => (0..n).map(|i| data[i * data.len() / n].clone()).collect(),
        _ => data.to_vec(),
    }
}

/// The model after the first task, with the path it took.
#[derive(Debug, Clone)]
pub struct Pretrained {
    pub model: EnhancerModel,
    pub path: PathAccumulator,
    pub log: TrainLog,
}

/// Trains `M0` from a fresh initialization on the first task, without any
/// penalty. The path is always recorded, so one pretrained model can seed
/// runs of either strategy.
pub fn pretrain(data: &[SpectralPair], cfg: &SequenceConfig) -> Result<Pretrained> {
    cfg.validate()?;
    let mut model = EnhancerModel::init(cfg.model)?;
    let mut path = PathAccumulator::new(model.snapshot());
    let tc = TrainConfig {
        strategy: Strategy::Finetune,
        ..cfg.task_config(0)
    };
    let log = train_task(&mut model, data, &tc, None, Some(&mut path))?;
    Ok(Pretrained { model, path, log })
}

#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub matrix: EvalMatrix,
    pub models: Vec<EnhancerModel>,
    /// Importance state after each consolidated task (seril only).
    pub states: Vec<ImportanceState>,
    /// One log per trained task.
    pub logs: Vec<TrainLog>,
}

fn score_row(
    model: &EnhancerModel,
    tests: &[Vec<SpectralPair>],
    workers: usize,
) -> Result<Vec<f64>> {
    tests
        .iter()
        .map(|t| evaluate_with_workers(model, t, workers))
        .collect()
}

impl Pretrained {
    /// Closes the first task: estimates its Fisher and path scores at the
    /// pretrained parameters.
    pub fn consolidate(&mut self, data: &[SpectralPair], cfg: &SequenceConfig) -> Result<ImportanceState> {
        let fisher_data = spread_subset(data, cfg.fisher_max_utterances);
        ImportanceState::initial(self.model.params()).finalize_task(
            &mut self.path,
            &self.model,
            &fisher_data,
            &cfg.adapt.reg,
        )
    }
}

fn save_checkpoint(
    dir: Option<&Path>,
    model: &EnhancerModel,
    state: Option<&ImportanceState>,
    t: usize,
) -> Result<()> {
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)?;
        model.save(dir.join(format!("M{t}.model")))?;
        if let Some(s) = state {
            s.save(dir.join(format!("M{t}.state")))?;
        }
    }
    Ok(())
}

/// Adapts `m0` through `tasks[1..]` and scores every model on every test
/// set. Under seril, `state0` is the state consolidated after the first task.
pub fn adapt_sequence(
    m0: EnhancerModel,
    state0: Option<ImportanceState>,
    tasks: &[Vec<SpectralPair>],
    tests: &[Vec<SpectralPair>],
    cfg: &SequenceConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<SequenceResult> {
    cfg.validate()?;
    if tasks.is_empty() || tests.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let strategy = cfg.strategy();
    let seril = strategy == Strategy::Seril;
    let mut state = match (seril, state0) {
        (true, Some(s)) => Some(s),
        (true, None) => return Err(Error::MissingState(1)),
        (false, _) => None,
    };
    let testset_ids = (0..tests.len()).map(|j| format!("E{j}")).collect();
    let mut matrix = EvalMatrix::new(strategy, tasks.len(), testset_ids);
    for (j, t) in tests.iter().enumerate() {
        matrix.noisy[j] = evaluate_with_workers(&Bypass, t, cfg.workers)?;
    }

    let mut model = m0;
    let mut logs = Vec::new();
    let mut states: Vec<ImportanceState> = state.iter().cloned().collect();
    let mut path = PathAccumulator::new(model.snapshot());
    save_checkpoint(checkpoint_dir, &model, state.as_ref(), 0)?;
    matrix.scores[0] = Some(score_row(&model, tests, cfg.workers)?);
    let mut models = vec![model.clone()];

    if strategy != Strategy::None {
        for t in 1..tasks.len() {
            log::info!("adapting to task {t} ({})", strategy.name());
            let tc = cfg.task_config(t);
            let acc = if seril { Some(&mut path) } else { None };
            logs.push(train_task(&mut model, &tasks[t], &tc, state.as_ref(), acc)?);
            if let Some(s) = state.as_mut() {
                let fisher_data = spread_subset(&tasks[t], cfg.fisher_max_utterances);
                *s = s.finalize_task(&mut path, &model, &fisher_data, &cfg.adapt.reg)?;
                states.push(s.clone());
            }
            save_checkpoint(checkpoint_dir, &model, state.as_ref(), t)?;
            matrix.scores[t] = Some(score_row(&model, tests, cfg.workers)?);
            models.push(model.clone());
        }
    }
    Ok(SequenceResult {
        matrix,
        models,
        states,
        logs,
    })
}

/// Pretrains on `tasks[0]`, then adapts through the rest.
pub fn run_sequence(
    tasks: &[Vec<SpectralPair>],
    tests: &[Vec<SpectralPair>],
    cfg: &SequenceConfig,
    checkpoint_dir: Option<&Path>,
) -> Result<SequenceResult> {
    let first = tasks.first().ok_or(Error::EmptyDataset)?;
    log::info!("pretraining on {} pairs", first.len());
    let mut pre = pretrain(first, cfg)?;
    let state0 = if cfg.strategy() == Strategy::Seril {
        Some(pre.consolidate(first, cfg)?)
    } else {
        None
    };
    let mut result = adapt_sequence(pre.model, state0, tasks, tests, cfg, checkpoint_dir)?;
    result.logs.insert(0, pre.log);
    Ok(result)
}
