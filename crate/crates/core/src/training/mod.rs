//! Optimization, cross-validation, classification metrics and
//! reconstruction statistics.

mod metrics;
mod optim;
mod selfcheck;
mod stats;
mod trainer;

pub use metrics::{MeanStd, Metrics};
pub use optim::{Adam, AdamConfig};
pub use selfcheck::{model_gradcheck, ModelGradCheck, TermCheck};
pub use stats::{average_ranks, spearman, ReconstructionStats};
pub use trainer::{
    batch_gradient, batch_loss, evaluate, evaluate_prepared, grid_search, loss_csv, predict,
    predicted_functional, prepare, reconstruction_stats, split_validation, subject_loss, train,
    train_fold, Ablation, EpochRecord, FoldOutcome, FoldReport, GridPoint, PreparedSubject,
    Summary, TrainConfig, TrainReport, GRID_GLOBAL, GRID_LOCAL, LOSS_CSV_HEADER, REPORT_FILE,
};

#[cfg(test)]
mod tests;
