use std::collections::HashSet;
use std::path::Path;

use crate::error::{Error, Result};

const ENGLISH_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

/// Lowercases and splits on runs of non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Canonical form of a label or title: its tokens joined by single spaces.
pub fn normalize_label(label: &str) -> String {
    tokenize(label).join(" ")
}

pub fn truncate(tokens: &mut Vec<String>, limit: usize) -> Result<()> {
    if limit < 1 {
        return Err(Error::Config("truncation limit must be at least 1".into()));
    }
    tokens.truncate(limit);
    Ok(())
}

/// Removes every occurrence of every label's token sequence.
///
/// Removal repeats until nothing matches, since deleting one mention can
/// join the tokens around it into another.
pub fn sanitize<S: AsRef<str>>(tokens: &[String], labels: &[S]) -> Vec<String> {
    let mut patterns: Vec<Vec<String>> = labels
        .iter()
        .map(|l| tokenize(l.as_ref()))
        .filter(|p| !p.is_empty())
        .collect();
    // Longest first, so a label that contains another is removed whole.
    patterns.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
    patterns.dedup();
    let mut out = tokens.to_vec();
    loop {
        let mut changed = false;
        let mut next = Vec::with_capacity(out.len());
        let mut i = 0;
        'scan: while i < out.len() {
            for p in &patterns {
                if out[i..].starts_with(p) {
                    i += p.len();
                    changed = true;
                    continue 'scan;
                }
            }
            next.push(out[i].clone());
            i += 1;
        }
        out = next;
        if !changed {
            return out;
        }
    }
}

/// Number of positions where some label's token sequence starts.
pub fn count_label_mentions<S: AsRef<str>>(tokens: &[String], labels: &[S]) -> usize {
    let patterns: Vec<Vec<String>> = labels.iter().map(|l| tokenize(l.as_ref())).filter(|p| !p.is_empty()).collect();
    (0..tokens.len())
        .filter(|&i| patterns.iter().any(|p| tokens[i..].starts_with(p)))
        .count()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    /// The English list shipped in `data/stopwords.txt`.
    pub fn english() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    pub fn empty() -> Self {
        Stopwords(HashSet::new())
    }

    pub fn parse(text: &str) -> Self {
        Stopwords(
            text.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Sorted, for stable serialisation.
    pub fn words(&self) -> Vec<String> {
        let mut w: Vec<String> = self.0.iter().cloned().collect();
        w.sort();
        w
    }

    pub fn from_words<I: IntoIterator<Item = String>>(words: I) -> Self {
        Stopwords(words.into_iter().collect())
    }
}
