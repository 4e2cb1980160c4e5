//! Sequential training, the evaluation matrix and forgetting analysis.
//!
//! `M0` is trained on the first task without a penalty. Each later task is
//! learned either by plain fine-tuning or under the importance penalty, and
//! every model is scored on every test set.

mod report;
mod sequence;
mod train;

pub use report::{
    compute_forgetting, emit_report, FinetuneComparison, ForgettingReport, TaskScore,
    REPORT_FORMAT_VERSION,
};
pub use sequence::{
    adapt_sequence, evaluate, evaluate_with_workers, pretrain, run_sequence, score_utterances,
    spread_subset, EvalMatrix, Pretrained, SequenceConfig, SequenceResult, MATRIX_FORMAT_VERSION,
};
pub use train::{
    clip_global_norm, train_task, Optimizer, OptimizerKind, Strategy, TrainConfig, TrainLog,
};
