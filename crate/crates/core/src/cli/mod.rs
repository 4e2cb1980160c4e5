//! Command-line front end.
//!
//! Every command reads one JSON [`RunConfig`]; flags override its values.
//! Progress goes to stderr through `log`, results to stdout and files.

mod config;

pub use config::RunConfig;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::continual::{ImportanceState, PathAccumulator, SpectralPair};
use crate::data::{build_task, load_manifest, Manifest, MANIFEST_FILE};
use crate::dsp::{istft, write_wav, Spectrogram};
use crate::error::{Error, Result};
use crate::harness::{
    adapt_sequence, compute_forgetting, emit_report, evaluate_with_workers, pretrain,
    spread_subset, train_task, EvalMatrix, SequenceConfig, Strategy,
};
use crate::model::{Bypass, Enhancer, EnhancerModel};

#[derive(Debug, Parser)]
#[command(
    name = "seril",
    version,
    about = "Incremental speech-enhancement training with importance-weighted regularization"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate every task and test corpus listed in the config.
    GenData(Common),
    /// Train M0 on the first task and consolidate its importance state.
    Pretrain(Common),
    /// Adapt the latest checkpoint to task N.
    Adapt(AdaptArgs),
    /// Score a model on one test set.
    Eval(EvalArgs),
    /// Run the whole pretrain and adaptation sequence and write the report.
    Sequence(SequenceArgs),
    /// Compare a seril run against a finetune run.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyArg {
    Finetune,
    Seril,
    None,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Finetune => Strategy::Finetune,
            StrategyArg::Seril => Strategy::Seril,
            StrategyArg::None => Strategy::None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    /// Base seed; overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Corpus directory; overrides `data_dir`.
    #[arg(long, value_name = "DIR")]
    pub data_dir: Option<PathBuf>,
    /// Output directory; overrides `out_dir`.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Threads used for evaluation; overrides `workers`.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Penalty strength; overrides `adapt.reg.lambda`.
    #[arg(long)]
    pub lambda: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct AdaptArgs {
    #[command(flatten)]
    pub common: Common,
    /// Adaptation strategy.
    #[arg(long, value_enum)]
    pub strategy: StrategyArg,
    /// Index of the task to learn (1 or more).
    #[arg(long, value_name = "N")]
    pub task: usize,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    /// Model checkpoint to score.
    #[arg(long, value_name = "FILE", required_unless_present = "bypass")]
    pub model: Option<PathBuf>,
    /// Score the unprocessed noisy input instead of a model.
    #[arg(long, conflicts_with = "model")]
    pub bypass: bool,
    /// Test set id, e.g. E0.
    #[arg(long, value_name = "ID")]
    pub testset: String,
    /// Write enhanced WAVs into this directory.
    #[arg(long, value_name = "DIR")]
    pub enhance_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SequenceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Adaptation strategy; overrides `adapt.strategy`.
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Start from the M0 checkpoint and state in this directory instead of
    /// pretraining.
    #[arg(long, value_name = "DIR")]
    pub pretrained: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Output directory of a seril sequence run.
    #[arg(long, value_name = "DIR")]
    pub seril: PathBuf,
    /// Output directory of a finetune sequence run.
    #[arg(long, value_name = "DIR")]
    pub finetune: PathBuf,
    /// Where to write the comparison report and charts.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
}

fn load_config(c: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(d) = &c.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(d) = &c.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(w) = c.workers {
        cfg.workers = w;
    }
    if let Some(l) = c.lambda {
        cfg.adapt.reg.lambda = l;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Loads a corpus, refusing one generated under a different seed.
fn manifest_for(cfg: &RunConfig, task_id: &str) -> Result<Manifest> {
    let m = load_manifest(cfg.task_dir(task_id).join(MANIFEST_FILE))?;
    let (tasks, tests) = cfg.task_specs();
    if let Some(spec) = tasks.iter().chain(&tests).find(|s| s.task_id == task_id) {
        if spec.seed != m.seed {
            return Err(Error::Config(format!(
                "{} in {} was generated with another seed; use a fresh data_dir",
                task_id,
                cfg.data_dir.display()
            )));
        }
    }
    Ok(m)
}

fn pairs_for(cfg: &RunConfig, task_id: &str) -> Result<Vec<SpectralPair>> {
    let m = manifest_for(cfg, task_id)?;
    if m.is_empty() {
        return Err(Error::EmptyDataset);
    }
    m.load_pairs(&cfg.stft)
}

/// Builds every corpus whose manifest is missing.
fn ensure_data(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let (tasks, tests) = cfg.task_specs();
    for spec in tasks.iter().chain(&tests) {
        let dir = cfg.task_dir(&spec.task_id);
        if dir.join(MANIFEST_FILE).is_file() {
            manifest_for(cfg, &spec.task_id)?;
            log::info!("{}: manifest present, skipping", spec.task_id);
            continue;
        }
        log::info!("{}: generating {} pairs", spec.task_id, spec.num_pairs());
        let m = build_task(spec, &dir)?;
        writeln!(out, "{}\t{}\t{}", spec.task_id, m.len(), dir.display())?;
    }
    Ok(())
}

fn cmd_gen_data(c: &Common, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(c)?;
    ensure_data(&cfg, out)
}

fn cmd_pretrain(c: &Common, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(c)?;
    let seq = cfg.sequence_config();
    let data = pairs_for(&cfg, &cfg.tasks[0].task_id)?;
    log::info!("pretraining on {} pairs", data.len());
    let mut pre = pretrain(&data, &seq)?;
    let state = pre.consolidate(&data, &seq)?;
    let dir = cfg.pretrain_dir();
    std::fs::create_dir_all(&dir)?;
    pre.model.save(dir.join("M0.model"))?;
    state.save(dir.join("M0.state"))?;
    std::fs::write(
        dir.join("train_log.json"),
        serde_json::to_string_pretty(&pre.log)? + "\n",
    )?;
    writeln!(
        out,
        "M0\tfinal_loss={:.6}\t{}",
        pre.log.final_loss().unwrap_or(f64::NAN),
        dir.join("M0.model").display()
    )?;
    Ok(())
}

fn checkpoint_paths(cfg: &RunConfig, strategy: Strategy, t: usize) -> (PathBuf, PathBuf) {
    let dir = if t == 0 {
        cfg.pretrain_dir()
    } else {
        cfg.strategy_dir(strategy)
    };
    (
        dir.join(format!("M{t}.model")),
        dir.join(format!("M{t}.state")),
    )
}

fn load_model(path: &Path, cfg: &RunConfig) -> Result<EnhancerModel> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let model = EnhancerModel::load(path)?;
    if model.config().feature_dim != cfg.stft.num_bins() {
        return Err(Error::Config(format!(
            "{} expects {} features, the STFT gives {}",
            path.display(),
            model.config().feature_dim,
            cfg.stft.num_bins()
        )));
    }
    Ok(model)
}

fn load_state(path: &Path, task: usize) -> Result<ImportanceState> {
    if !path.is_file() {
        return Err(Error::MissingState(task));
    }
    ImportanceState::load(path)
}

fn cmd_adapt(a: &AdaptArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let strategy: Strategy = a.strategy.into();
    if strategy == Strategy::None {
        return Err(Error::Config("adapt needs --strategy finetune or seril".into()));
    }
    let n = a.task;
    if n == 0 || n >= cfg.tasks.len() {
        return Err(Error::Config(format!(
            "--task must be between 1 and {}",
            cfg.tasks.len() - 1
        )));
    }
    let seq = strategy_config(&cfg, strategy);
    let (model_in, state_in) = checkpoint_paths(&cfg, strategy, n - 1);
    let mut model = load_model(&model_in, &cfg)?;
    let state = match strategy {
        Strategy::Seril => Some(load_state(&state_in, n)?),
        _ => None,
    };
    let data = pairs_for(&cfg, &cfg.tasks[n].task_id)?;
    let tc = seq.task_config(n);
    let mut path = PathAccumulator::new(model.snapshot());
    let acc = state.as_ref().map(|_| &mut path);
    log::info!("adapting to {} ({})", cfg.tasks[n].task_id, strategy.name());
    let log = train_task(&mut model, &data, &tc, state.as_ref(), acc)?;

    let (model_out, state_out) = checkpoint_paths(&cfg, strategy, n);
    std::fs::create_dir_all(cfg.strategy_dir(strategy))?;
    model.save(&model_out)?;
    if let Some(s) = state {
        let fisher_data = spread_subset(&data, seq.fisher_max_utterances);
        let next = s.finalize_task(&mut path, &model, &fisher_data, &seq.adapt.reg)?;
        next.save(&state_out)?;
    }
    writeln!(
        out,
        "M{n}\tfinal_loss={:.6}\t{}",
        log.final_loss().unwrap_or(f64::NAN),
        model_out.display()
    )?;
    Ok(())
}

/// Resolved training settings with `strategy` selected.
fn strategy_config(cfg: &RunConfig, strategy: Strategy) -> SequenceConfig {
    let mut seq = cfg.sequence_config();
    seq.adapt.strategy = strategy;
    seq
}

fn write_enhanced<E: Enhancer + ?Sized>(
    manifest: &Manifest,
    model: &E,
    cfg: &RunConfig,
    dir: &Path,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (i, e) in manifest.entries.iter().enumerate() {
        let noisy = manifest.noisy_spectrogram(i, &cfg.stft)?;
        let mag = crate::data::magnitude_tensor(&noisy)?;
        let enhanced = model.enhance(&mag)?;
        let spec = Spectrogram::from_magnitude_phase(enhanced.values(), &noisy)?;
        let wave = istft(&spec, &cfg.stft)?;
        let name = e
            .noisy_path
            .file_name()
            .map(|n| n.to_os_string())
            .unwrap_or_else(|| format!("utt_{i:04}.wav").into());
        write_wav(dir.join(name), &wave)?;
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let manifest = manifest_for(&cfg, &a.testset)?;
    let data = manifest.load_pairs(&cfg.stft)?;
    let model: Box<dyn EnhancerSync> = match &a.model {
        Some(p) if !a.bypass => Box::new(load_model(p, &cfg)?),
        _ => Box::new(Bypass),
    };
    let score = evaluate_with_workers(model.as_ref(), &data, cfg.workers)?;
    if let Some(dir) = &a.enhance_out {
        write_enhanced(&manifest, model.as_ref(), &cfg, dir)?;
    }
    writeln!(out, "{}\t{score:.6}", a.testset)?;
    Ok(())
}

/// Object-safe `Enhancer + Sync` for boxed models.
trait EnhancerSync: Enhancer + Sync {}

impl<T: Enhancer + Sync> EnhancerSync for T {}

fn cmd_sequence(a: &SequenceArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = load_config(&a.common)?;
    if let Some(s) = a.strategy {
        cfg.adapt.strategy = s.into();
    }
    let strategy = cfg.adapt.strategy;
    let seq = strategy_config(&cfg, strategy);
    ensure_data(&cfg, &mut std::io::sink())?;
    let tasks = cfg
        .tasks
        .iter()
        .map(|t| pairs_for(&cfg, &t.task_id))
        .collect::<Result<Vec<_>>>()?;
    let tests = cfg
        .tests
        .iter()
        .map(|t| pairs_for(&cfg, &t.task_id))
        .collect::<Result<Vec<_>>>()?;

    let (m0, state0, pre_log) = match &a.pretrained {
        Some(dir) => {
            let model = load_model(&dir.join("M0.model"), &cfg)?;
            let state = match strategy {
                Strategy::Seril => Some(load_state(&dir.join("M0.state"), 1)?),
                _ => None,
            };
            (model, state, None)
        }
        None => {
            log::info!("pretraining on {} pairs", tasks[0].len());
            let mut pre = pretrain(&tasks[0], &seq)?;
            let state = pre.consolidate(&tasks[0], &seq)?;
            (pre.model, Some(state), Some(pre.log))
        }
    };
    let run_dir = cfg.strategy_dir(strategy);
    let state0 = if strategy == Strategy::Seril { state0 } else { None };
    let result = adapt_sequence(m0, state0, &tasks, &tests, &seq, Some(&run_dir))?;
    let mut logs = result.logs.clone();
    if let Some(l) = pre_log {
        logs.insert(0, l);
    }
    std::fs::write(
        run_dir.join("train_log.json"),
        serde_json::to_string_pretty(&logs)? + "\n",
    )?;
    let report = if result.matrix.is_complete() && result.matrix.model_ids.len() == result.matrix.testset_ids.len() {
        Some(compute_forgetting(&result.matrix, None)?)
    } else {
        None
    };
    emit_report(&result.matrix, report.as_ref(), None, &run_dir)?;
    out.write_all(result.matrix.to_csv().as_bytes())?;
    Ok(())
}

fn cmd_report(a: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let seril = EvalMatrix::load_json(a.seril.join("matrix.json"))?;
    let finetune = EvalMatrix::load_json(a.finetune.join("matrix.json"))?;
    let report = compute_forgetting(&seril, Some(&finetune))?;
    if let Some(dir) = &a.out {
        emit_report(&seril, Some(&report), Some(&finetune), dir)?;
    }
    writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(())
}

/// Runs one parsed command, writing results to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::GenData(c) => cmd_gen_data(c, out),
        Command::Pretrain(c) => cmd_pretrain(c, out),
        Command::Adapt(a) => cmd_adapt(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Sequence(a) => cmd_sequence(a, out),
        Command::Report(a) => cmd_report(a, out),
    }
}

/// Parses `args` and runs the command. Returns the process exit code: 0 on
/// success, 1 on invalid input, 2 on a runtime failure. Errors are written
/// to `err` as a single `ERROR <code>: <message>` line.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            let _ = writeln!(err, "ERROR usage: {first}");
            return 1;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "ERROR {}: {msg}", e.code());
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
