use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::ingest::{KbPage, Note};
use super::labels::{top_n_labels, LabelSpace};
use super::retrieval::KnowledgeBase;
use super::split::{split, SealedSplit, Splits, DEFAULT_FRACTIONS};
use super::text::{sanitize, tokenize, truncate, Stopwords};
use super::vocab::{Vocabulary, DEFAULT_VOCAB_CAP};
use crate::error::{Error, Result};

/// Preprocessing knobs that must be identical between training and evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Token limit for notes and page bodies.
    pub truncate: usize,
    pub vocab_cap: usize,
    /// Size of the label space (top-N most frequent training labels).
    pub label_count: usize,
    pub retrieval_cap: usize,
    pub split_seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            truncate: 600,
            vocab_cap: DEFAULT_VOCAB_CAP,
            label_count: 50,
            retrieval_cap: 64,
            split_seed: 0,
        }
    }
}

/// A note ready for the model.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub note_id: String,
    pub words: Vec<usize>,
    /// Retrieved page indices into the knowledge base, best first.
    pub slots: Vec<usize>,
    /// Gold label indices, ascending.
    pub labels: Vec<usize>,
}

#[derive(Debug)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub labels: LabelSpace,
    pub stopwords: Stopwords,
    pub kb: KnowledgeBase,
    pub splits: Splits<Example>,
    pub config: PipelineConfig,
    /// Notes dropped because no gold label is in the label space or no word survived encoding.
    pub dropped: usize,
}

/// Removes every corpus label from every note, then truncates.
pub fn clean_notes(mut notes: Vec<Note>, limit: usize) -> Result<Vec<Note>> {
    let all: BTreeSet<&str> = notes.iter().flat_map(|n| n.gold_labels.iter().map(String::as_str)).collect();
    let all: Vec<String> = all.into_iter().map(str::to_owned).collect();
    for n in &mut notes {
        n.tokens = sanitize(&n.tokens, &all);
        truncate(&mut n.tokens, limit)?;
    }
    Ok(notes)
}

/// Builds vocabulary, label space and retrieval from the training part of a
/// fresh split.
pub fn prepare(notes: Vec<Note>, pages: &[KbPage], stopwords: Stopwords, config: PipelineConfig) -> Result<Corpus> {
    let notes = clean_notes(notes, config.truncate)?;
    let (train, val, test) = split(notes, DEFAULT_FRACTIONS, config.split_seed)?;
    let labels = top_n_labels(&train, config.label_count)?;
    let page_bodies: Vec<Vec<String>> = pages
        .iter()
        .map(|p| {
            let mut t = p.body_tokens[..p.body_tokens.len().min(config.truncate)].to_vec();
            t.extend(tokenize(&p.title));
            t
        })
        .collect();
    let docs = train.iter().map(|n| n.tokens.as_slice()).chain(page_bodies.iter().map(Vec::as_slice));
    let vocab = Vocabulary::build(docs, config.vocab_cap, &stopwords)?;
    assemble(train, val, test, pages, stopwords, vocab, labels, config)
}

/// Rebuilds the splits of a corpus with a vocabulary and label space fixed
/// at training time. The label space recomputed from this corpus must match.
pub fn prepare_with(
    notes: Vec<Note>,
    pages: &[KbPage],
    stopwords: Stopwords,
    vocab: Vocabulary,
    labels: LabelSpace,
    config: PipelineConfig,
) -> Result<Corpus> {
    let notes = clean_notes(notes, config.truncate)?;
    let (train, val, test) = split(notes, DEFAULT_FRACTIONS, config.split_seed)?;
    let here = top_n_labels(&train, labels.len())?;
    if !here.same_set(&labels) {
        return Err(Error::Config(format!(
            "the model was trained on {} labels that differ from the top {} labels of this corpus",
            labels.len(),
            here.len()
        )));
    }
    assemble(train, val, test, pages, stopwords, vocab, labels, config)
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    train: Vec<Note>,
    val: Vec<Note>,
    test: Vec<Note>,
    pages: &[KbPage],
    stopwords: Stopwords,
    vocab: Vocabulary,
    labels: LabelSpace,
    config: PipelineConfig,
) -> Result<Corpus> {
    let kb = KnowledgeBase::new(pages, &vocab, &stopwords, &labels, config.truncate)?;
    let mut dropped = 0;
    let mut encode = |notes: Vec<Note>| -> Vec<Example> {
        let before = notes.len();
        let out: Vec<Example> = notes
            .into_iter()
            .filter_map(|n| encode_note(&n, &vocab, &stopwords, &labels, &kb, config.retrieval_cap))
            .collect();
        dropped += before - out.len();
        out
    };
    let (train, val, test) = (encode(train), encode(val), encode(test));
    if dropped > 0 {
        log::info!("dropped {dropped} notes with no label in the top {} or no usable words", labels.len());
    }
    Ok(Corpus {
        vocab,
        labels,
        stopwords,
        kb,
        splits: Splits {
            train,
            val,
            test: SealedSplit::new(test),
        },
        config,
        dropped,
    })
}

fn encode_note(
    n: &Note,
    vocab: &Vocabulary,
    stopwords: &Stopwords,
    labels: &LabelSpace,
    kb: &KnowledgeBase,
    cap: usize,
) -> Option<Example> {
    let gold = labels.encode(&n.gold_labels);
    let words = vocab.encode(&n.tokens, stopwords);
    if gold.is_empty() || words.is_empty() {
        return None;
    }
    Some(Example {
        note_id: n.id.clone(),
        slots: kb.retrieve(&words, cap),
        words,
        labels: gold,
    })
}

/// Encodes free text for prediction: label mentions from the label space are
/// removed, the rest truncated and mapped to ids.
pub fn encode_text(text: &str, vocab: &Vocabulary, stopwords: &Stopwords, labels: &LabelSpace, limit: usize) -> Result<Vec<usize>> {
    let mut tokens = sanitize(&tokenize(text), labels.labels());
    truncate(&mut tokens, limit)?;
    let words = vocab.encode(&tokens, stopwords);
    if words.is_empty() {
        return Err(Error::EmptyInput("note has no words left after preprocessing".into()));
    }
    Ok(words)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(id: &str, text: &str, labels: &[&str]) -> Note {
        Note {
            id: id.into(),
            tokens: tokenize(text),
            gold_labels: labels.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn page(title: &str, body: &str) -> KbPage {
        KbPage {
            title: title.into(),
            body_tokens: tokenize(body),
        }
    }

    #[test]
    fn prepare_drops_notes_outside_the_label_space() {
        let mut notes = Vec::new();
        for i in 0..20 {
            notes.push(note(&format!("a{i}"), "fever cough the flu", &["flu"]));
        }
        for i in 0..10 {
            notes.push(note(&format!("b{i}"), "toe pain", &["gout"]));
        }
        notes.push(note("rare", "itchy", &["hives"]));
        let pages = vec![page("Flu", "fever cough"), page("Gout", "toe pain")];
        let cfg = PipelineConfig {
            label_count: 2,
            ..PipelineConfig::default()
        };
        let c = prepare(notes, &pages, Stopwords::english(), cfg).unwrap();
        let total = c.splits.train.len() + c.splits.val.len() + c.splits.test.len();
        assert_eq!(total + c.dropped, 31);
        assert!(c.labels.index("hives").is_none());
        assert!(!c.vocab.contains("flu") || c.splits.train.iter().all(|e| !e.words.contains(&c.vocab.id("flu"))));
        assert!(!c.vocab.contains("the"));
        assert_eq!(c.splits.test.reads(), 0);
    }

    #[test]
    fn prepare_with_rejects_a_different_label_space() {
        let notes: Vec<Note> = (0..10).map(|i| note(&i.to_string(), "w", &["x"])).collect();
        let pages = vec![page("X", "w")];
        let vocab = Vocabulary::from_words(vec!["w".into()]);
        let labels = LabelSpace::from(vec!["y".to_owned()]);
        let cfg = PipelineConfig {
            label_count: 1,
            ..PipelineConfig::default()
        };
        let err = prepare_with(notes, &pages, Stopwords::empty(), vocab, labels, cfg).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
