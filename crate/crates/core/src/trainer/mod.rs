//! Optimisation loop, model selection and persistence.

mod checkpoint;
mod config;
mod experiment;
mod fit;
mod optim;
mod run;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CheckpointManifest,
    CorpusArtifacts, ParamEntry, TrainingMeta, FORMAT_VERSION,
};
pub use config::TrainConfig;
pub use experiment::{ExperimentConfig, EXPERIMENT_KEYS};
pub use fit::{
    evaluate, fit, note_input, predict_all, train_epoch, EarlyStopping, EpochReport, FitResult, HistoryRow,
};
pub use optim::{adam_step, clip_gradients, OptimizerState, BETA1, BETA2, EPSILON};
pub use run::{
    read_batch_losses, read_history, train_to_dir, write_history, RunFiles, RunSummary, BATCH_LOSSES,
    BEST_CHECKPOINT, HISTORY, LAST_CHECKPOINT, RUN_SUMMARY,
};
