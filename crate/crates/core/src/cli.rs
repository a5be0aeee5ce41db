//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data or
//! configuration, 3 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::autodiff::GradCheckConfig;
use crate::corpus::{
    encode_text, ingest_kb, ingest_notes, prepare, prepare_with, synth_generate, KnowledgeBase,
    Stopwords, SynthSpec,
};
use crate::error::{Error, Result};
use crate::kvconfig::KvConfig;
use crate::memory::AddressingKind;
use crate::models::{model_grad_check, CheckDims, Variant};
use crate::trainer::{
    evaluate, load_checkpoint, read_history, train_to_dir, Checkpoint, CorpusArtifacts, ExperimentConfig,
    RunSummary, HISTORY, RUN_SUMMARY,
};

/// `println!` that reports a closed stdout as an error instead of panicking.
macro_rules! say {
    ($($arg:tt)*) => {
        writeln!(std::io::stdout().lock(), $($arg)*).map_err(stdout_error)?
    };
}

fn stdout_error(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

fn is_closed_stdout(e: &Error) -> bool {
    matches!(e, Error::Io { path, source } if path.as_os_str() == "<stdout>" && source.kind() == std::io::ErrorKind::BrokenPipe)
}

#[derive(Debug, Parser)]
#[command(name = "memnet", version, about = "Memory networks for multi-label diagnostic inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SplitName {
    Val,
    Test,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic corpus (notes.jsonl and kb.jsonl).
    Synth {
        /// key = value generator settings; defaults when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a model and write checkpoints, history and batch losses.
    Train {
        /// key = value experiment settings; defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        notes: PathBuf,
        #[arg(long)]
        kb: PathBuf,
        /// One stopword per line; the built-in English list when omitted.
        #[arg(long)]
        stopwords: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Evaluate a checkpoint on the validation or test split of a corpus.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        notes: PathBuf,
        /// Knowledge base; the pages stored in the checkpoint when omitted.
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitName,
        /// Report JSON path; `eval_<split>.json` next to the checkpoint when
        /// omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the top five labels and the addressing trace for one note.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Plain-text note.
        #[arg(long)]
        note_file: PathBuf,
    },
    /// Finite-difference check of the full model gradient.
    Gradcheck {
        #[arg(long)]
        variant: Variant,
        #[arg(long)]
        hops: usize,
        #[arg(long)]
        addressing: AddressingKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Validation P@5 per epoch for every run under a directory, as CSV.
    Report {
        #[arg(long)]
        history_dir: PathBuf,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        // The reader went away (`memnet ... | head`); nothing left to report.
        Err(e) if is_closed_stdout(&e) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Synth { spec, out_dir } => synth(spec.as_deref(), &out_dir),
        Command::Train {
            config,
            notes,
            kb,
            stopwords,
            out_dir,
        } => train(config.as_deref(), &notes, &kb, stopwords.as_deref(), &out_dir),
        Command::Eval {
            checkpoint,
            notes,
            kb,
            split,
            out,
        } => eval(&checkpoint, &notes, kb.as_deref(), split, out.as_deref()),
        Command::Predict { checkpoint, note_file } => predict(&checkpoint, &note_file),
        Command::Gradcheck {
            variant,
            hops,
            addressing,
            seed,
        } => gradcheck(variant, hops, addressing, seed),
        Command::Report { history_dir, out } => report(&history_dir, out.as_deref()),
    }
}

fn synth(spec: Option<&Path>, out_dir: &Path) -> Result<()> {
    let spec = match spec {
        Some(p) => SynthSpec::from_kv(&KvConfig::load(p)?)?,
        None => SynthSpec::default(),
    };
    let corpus = synth_generate(&spec)?;
    corpus.write(out_dir)?;
    say!(
        "wrote {} notes and {} pages to {}",
        corpus.notes.len(),
        corpus.pages.len(),
        out_dir.display()
    );
    Ok(())
}

fn train(config: Option<&Path>, notes: &Path, kb: &Path, stopwords: Option<&Path>, out_dir: &Path) -> Result<()> {
    let exp = match config {
        Some(p) => ExperimentConfig::from_kv(&KvConfig::load(p)?)?,
        None => ExperimentConfig::default(),
    };
    let stop = match stopwords {
        Some(p) => Stopwords::load(p)?,
        None => Stopwords::english(),
    };
    let pages = ingest_kb(kb)?;
    let corpus = prepare(ingest_notes(notes)?, &pages, stop, exp.pipeline.clone())?;
    let model_cfg = exp.model_for(&corpus)?;
    let (result, files) = train_to_dir(out_dir, &model_cfg, &corpus, &pages, &exp.train)?;
    say!(
        "{} epochs, best epoch {} (val P@5 {:.4}); checkpoint {}",
        result.history.len(),
        result.best_epoch,
        result.best_val_p_at_5,
        files.best_checkpoint.display()
    );
    Ok(())
}

fn artifacts(ckpt: &Checkpoint, path: &Path) -> Result<CorpusArtifacts> {
    ckpt.manifest.corpus.clone().ok_or_else(|| {
        Error::Checkpoint(format!("{} carries no vocabulary or label space", path.display()))
    })
}

fn eval(checkpoint: &Path, notes: &Path, kb: Option<&Path>, split: SplitName, out: Option<&Path>) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let art = artifacts(&ckpt, checkpoint)?;
    let pages = match kb {
        Some(p) => ingest_kb(p)?,
        None => art.kb_pages(),
    };
    let stop = art.stopword_set();
    let corpus = prepare_with(
        ingest_notes(notes)?,
        &pages,
        stop,
        art.vocabulary.clone(),
        art.labels.clone(),
        art.pipeline.clone(),
    )?;
    let examples = match split {
        SplitName::Val => corpus.splits.val.as_slice(),
        SplitName::Test => corpus.splits.test.open(),
    };
    let report = evaluate(&ckpt.model, examples, &corpus.kb, corpus.labels.labels())?;
    write!(std::io::stdout().lock(), "{}", report.to_table()).map_err(stdout_error)?;
    let name = match split {
        SplitName::Val => "val",
        SplitName::Test => "test",
    };
    let out = out.map(Path::to_path_buf).unwrap_or_else(|| {
        checkpoint
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("eval_{name}.json"))
    });
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(&out, json).map_err(|e| Error::io(&out, e))?;
    say!("\nwrote {}", out.display());
    Ok(())
}

fn predict(checkpoint: &Path, note_file: &Path) -> Result<()> {
    let ckpt = load_checkpoint(checkpoint)?;
    let art = artifacts(&ckpt, checkpoint)?;
    let text = std::fs::read_to_string(note_file).map_err(|e| Error::io(note_file, e))?;
    let stop = art.stopword_set();
    let words = encode_text(&text, &art.vocabulary, &stop, &art.labels, art.pipeline.truncate)?;
    let kb = KnowledgeBase::new(&art.kb_pages(), &art.vocabulary, &stop, &art.labels, art.pipeline.truncate)?;
    let slots = kb.retrieve(&words, art.pipeline.retrieval_cap);
    let input = crate::models::NoteInput {
        note: &words,
        slots: slots.iter().map(|&i| kb.slot(i)).collect(),
    };
    let pred = ckpt.model.predict(&input)?;
    let k = pred.probabilities.len().min(5);
    say!("top {k} labels:");
    for &l in &pred.top_k(k)? {
        say!("  {:<32} {:.4}", art.labels.name(l), pred.probabilities[l]);
    }
    for (hop, weights) in pred.addressing_trace.iter().enumerate() {
        let mut order: Vec<usize> = (0..weights.len()).collect();
        order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
        say!("hop {}:", hop + 1);
        for &i in order.iter().take(5) {
            say!("  {:<32} {:.4}", pred.slot_ids[i], weights[i]);
        }
    }
    Ok(())
}

fn gradcheck(variant: Variant, hops: usize, addressing: AddressingKind, seed: u64) -> Result<()> {
    let check = GradCheckConfig {
        seed,
        ..GradCheckConfig::default()
    };
    let report = model_grad_check(variant, hops, addressing, &CheckDims::default(), &check)?;
    for p in &report.per_param {
        say!("{:<20} {:>6} entries  max rel err {:.3e}", p.name, p.checked, p.max_rel_error);
    }
    if report.passed {
        say!("PASS max rel err {:.3e} < {:.0e}", report.max_rel_error, report.tolerance);
        Ok(())
    } else {
        say!("FAIL max rel err {:.3e} ≥ {:.0e}", report.max_rel_error, report.tolerance);
        Err(Error::GradCheck {
            max_rel_error: report.max_rel_error,
            tolerance: report.tolerance,
        })
    }
}

/// Finds run directories (holding `run.json` and `history.csv`) at `dir`
/// and one level below, in path order.
fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let is_run = |d: &Path| d.join(RUN_SUMMARY).is_file() && d.join(HISTORY).is_file();
    let mut found = Vec::new();
    if is_run(dir) {
        found.push(dir.to_path_buf());
    }
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() && is_run(&path) {
            found.push(path);
        }
    }
    found.sort();
    Ok(found)
}

fn report(dir: &Path, out: Option<&Path>) -> Result<()> {
    let runs = run_dirs(dir)?;
    if runs.is_empty() {
        return Err(Error::Data(format!("no training runs under {}", dir.display())));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Data(e.to_string());
    w.write_record(["model", "hops", "epoch", "val_p_at_5"]).map_err(csv_err)?;
    for run in runs {
        let summary_path = run.join(RUN_SUMMARY);
        let text = std::fs::read_to_string(&summary_path).map_err(|e| Error::io(&summary_path, e))?;
        let summary: RunSummary = serde_json::from_str(&text)?;
        for row in read_history(&run.join(HISTORY))? {
            w.write_record([
                summary.model.to_string(),
                summary.hops.to_string(),
                row.epoch.to_string(),
                format!("{:?}", row.val_p_at_5),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    match out {
        Some(p) => std::fs::write(p, &bytes).map_err(|e| Error::io(p, e))?,
        None => std::io::stdout().lock().write_all(&bytes).map_err(stdout_error)?,
    }
    Ok(())
}
