use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::ingest::Note;
use crate::error::{Error, Result};

/// The `n` most frequent labels, most frequent first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for LabelSpace {
    fn from(labels: Vec<String>) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        LabelSpace { labels, index }
    }
}

impl From<LabelSpace> for Vec<String> {
    fn from(s: LabelSpace) -> Self {
        s.labels
    }
}

impl LabelSpace {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.labels[i]
    }

    /// Indices of the note's labels that are in the space, ascending.
    pub fn encode(&self, gold: &[String]) -> Vec<usize> {
        let mut ids: Vec<usize> = gold.iter().filter_map(|l| self.index(l)).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Same labels, ignoring order.
    pub fn same_set(&self, other: &LabelSpace) -> bool {
        self.len() == other.len() && self.labels.iter().all(|l| other.index(l).is_some())
    }
}

/// Frequency of every label over `notes`, descending, ties lexicographic.
pub fn label_frequencies(notes: &[Note]) -> Vec<(String, usize)> {
    let mut freq: HashMap<&str, usize> = HashMap::new();
    for n in notes {
        for l in &n.gold_labels {
            *freq.entry(l.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = freq.into_iter().map(|(l, c)| (l.to_owned(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked
}

pub fn top_n_labels(notes: &[Note], n: usize) -> Result<LabelSpace> {
    let ranked = label_frequencies(notes);
    if n > ranked.len() {
        return Err(Error::Config(format!(
            "asked for the top {n} labels but the training notes only have {}",
            ranked.len()
        )));
    }
    Ok(LabelSpace::from(ranked.into_iter().take(n).map(|(l, _)| l).collect::<Vec<_>>()))
}
