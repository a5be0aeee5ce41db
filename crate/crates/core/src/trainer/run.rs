use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::checkpoint::{save_checkpoint, CorpusArtifacts, TrainingMeta};
use super::config::TrainConfig;
use super::fit::{fit, FitResult, HistoryRow};
use crate::corpus::{Corpus, KbPage};
use crate::error::{Error, Result};
use crate::memory::AddressingKind;
use crate::models::{ModelConfig, Variant};

pub const BEST_CHECKPOINT: &str = "best.ckpt";
pub const LAST_CHECKPOINT: &str = "last.ckpt";
pub const HISTORY: &str = "history.csv";
pub const BATCH_LOSSES: &str = "batch_losses.csv";
pub const RUN_SUMMARY: &str = "run.json";

/// Contents of `run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: Variant,
    pub hops: usize,
    pub addressing: AddressingKind,
    pub seed: u64,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_p_at_5: Option<f64>,
}

pub fn write_history(path: &Path, rows: &[HistoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    if rows.is_empty() {
        w.write_record(["epoch", "train_loss", "val_auc_macro", "val_p_at_5", "val_hamming"])
            .map_err(|e| csv_error(path, e))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_history(path: &Path) -> Result<Vec<HistoryRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_owned(),
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}

fn write_batch_losses(path: &Path, losses: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["epoch", "batch", "loss"]).map_err(|e| csv_error(path, e))?;
    for (e, epoch) in losses.iter().enumerate() {
        for (b, loss) in epoch.iter().enumerate() {
            w.write_record([(e + 1).to_string(), b.to_string(), format!("{loss:?}")])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Every per-batch loss of a run, in order.
pub fn read_batch_losses(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let loss = rec.get(2).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
            path: path.to_owned(),
            line: rec.position().map_or(0, |p| p.line() as usize),
            message: "missing loss column".into(),
        })?;
        out.push(loss);
    }
    Ok(out)
}

/// Output paths of a training run.
#[derive(Clone, Debug)]
pub struct RunFiles {
    pub best_checkpoint: PathBuf,
    pub last_checkpoint: PathBuf,
    pub history: PathBuf,
    pub batch_losses: PathBuf,
    pub summary: PathBuf,
}

impl RunFiles {
    pub fn in_dir(dir: &Path) -> Self {
        RunFiles {
            best_checkpoint: dir.join(BEST_CHECKPOINT),
            last_checkpoint: dir.join(LAST_CHECKPOINT),
            history: dir.join(HISTORY),
            batch_losses: dir.join(BATCH_LOSSES),
            summary: dir.join(RUN_SUMMARY),
        }
    }
}

/// Fits and writes checkpoints, history, batch losses and a summary to `dir`.
pub fn train_to_dir(
    dir: &Path,
    model_cfg: &ModelConfig,
    corpus: &Corpus,
    pages: &[KbPage],
    cfg: &TrainConfig,
) -> Result<(FitResult, RunFiles)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let result = fit(model_cfg, corpus, cfg)?;
    let files = RunFiles::in_dir(dir);
    let artifacts = CorpusArtifacts::new(
        corpus.config.clone(),
        corpus.vocab.clone(),
        corpus.labels.clone(),
        &corpus.stopwords,
        pages,
    );
    let best_metric = (result.best_epoch > 0).then_some(result.best_val_p_at_5);
    save_checkpoint(
        &files.best_checkpoint,
        &result.best,
        cfg.seed,
        TrainingMeta {
            epoch: result.best_epoch,
            best_val_metric: best_metric,
        },
        Some(artifacts.clone()),
        None,
    )?;
    save_checkpoint(
        &files.last_checkpoint,
        &result.last,
        cfg.seed,
        TrainingMeta {
            epoch: result.history.len(),
            best_val_metric: best_metric,
        },
        Some(artifacts),
        Some(&result.optimizer),
    )?;
    write_history(&files.history, &result.history)?;
    write_batch_losses(&files.batch_losses, &result.batch_losses)?;
    let summary = RunSummary {
        model: model_cfg.variant,
        hops: model_cfg.hops,
        addressing: model_cfg.addressing,
        seed: cfg.seed,
        epochs_run: result.history.len(),
        best_epoch: result.best_epoch,
        best_val_p_at_5: best_metric,
    };
    let json = serde_json::to_string_pretty(&summary)?;
    std::fs::write(&files.summary, json).map_err(|e| Error::io(&files.summary, e))?;
    Ok((result, files))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn history_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let rows = vec![HistoryRow {
            epoch: 1,
            train_loss: 0.1 + 0.2,
            val_auc_macro: 0.9,
            val_p_at_5: 0.2,
            val_hamming: 0.05,
        }];
        write_history(&path, &rows).unwrap();
        assert_eq!(read_history(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("epoch,train_loss,val_auc_macro,val_p_at_5,val_hamming"));
        write_history(&path, &[]).unwrap();
        assert!(read_history(&path).unwrap().is_empty());
    }
}
