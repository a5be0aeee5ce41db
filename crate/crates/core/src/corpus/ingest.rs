use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::text::{normalize_label, tokenize};
use crate::error::{Error, Result};

/// One line of a notes file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoteRecord {
    pub id: String,
    pub text: String,
    pub labels: Vec<String>,
}

/// One line of a knowledge-base file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageRecord {
    pub title: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Note {
    pub id: String,
    pub tokens: Vec<String>,
    /// Normalised label strings, deduplicated, first mention first.
    pub gold_labels: Vec<String>,
}

impl Note {
    pub fn from_record(r: &NoteRecord) -> Self {
        let mut seen = HashSet::new();
        let gold_labels = r
            .labels
            .iter()
            .map(|l| normalize_label(l))
            .filter(|l| !l.is_empty() && seen.insert(l.clone()))
            .collect();
        Note {
            id: r.id.clone(),
            tokens: tokenize(&r.text),
            gold_labels,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KbPage {
    /// Title as written in the file; doubles as the page identifier.
    pub title: String,
    pub body_tokens: Vec<String>,
}

impl KbPage {
    pub fn from_record(r: &PageRecord) -> Self {
        KbPage {
            title: r.title.clone(),
            body_tokens: tokenize(&r.text),
        }
    }

    pub fn normalized_title(&self) -> String {
        normalize_label(&self.title)
    }
}

fn read_jsonl<T, F>(path: &Path, mut check: F) -> Result<Vec<T>>
where
    T: for<'de> Deserialize<'de>,
    F: FnMut(&T, usize) -> Result<()>,
{
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: lineno,
            message: e.to_string(),
        })?;
        let rec: T = serde_json::from_value(value).map_err(|e| Error::Schema {
            path: path.to_owned(),
            line: lineno,
            message: e.to_string(),
        })?;
        check(&rec, lineno)?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads a JSONL notes file (`id`, `text`, `labels`).
pub fn ingest_notes(path: &Path) -> Result<Vec<Note>> {
    let records: Vec<NoteRecord> = read_jsonl(path, |r: &NoteRecord, line| {
        if r.labels.iter().all(|l| normalize_label(l).is_empty()) {
            return Err(Error::Schema {
                path: path.to_owned(),
                line,
                message: format!("note `{}` has no labels", r.id),
            });
        }
        Ok(())
    })?;
    Ok(records.iter().map(Note::from_record).collect())
}

/// Reads a JSONL knowledge-base file (`title`, `text`); titles must be unique.
pub fn ingest_kb(path: &Path) -> Result<Vec<KbPage>> {
    let mut titles = HashSet::new();
    let records: Vec<PageRecord> = read_jsonl(path, |r: &PageRecord, line| {
        if !titles.insert(r.title.clone()) {
            return Err(Error::Schema {
                path: path.to_owned(),
                line,
                message: format!("duplicate page title `{}`", r.title),
            });
        }
        Ok(())
    })?;
    Ok(records.iter().map(KbPage::from_record).collect())
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
