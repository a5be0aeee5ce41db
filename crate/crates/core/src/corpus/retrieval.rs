use std::collections::{BTreeSet, HashMap};

use super::ingest::KbPage;
use super::labels::LabelSpace;
use super::text::Stopwords;
use super::vocab::{Vocabulary, PAD, UNK};
use crate::error::{Error, Result};
use crate::memory::SlotText;

/// Encoded knowledge base with an inverted index over page words.
#[derive(Clone, Debug)]
pub struct KnowledgeBase {
    slots: Vec<SlotText>,
    postings: HashMap<usize, Vec<usize>>,
    idf: HashMap<usize, f64>,
    /// Page indices aligned with labels, in label-space order.
    fallback: Vec<usize>,
}

impl KnowledgeBase {
    /// Encodes every page (body truncated to `truncate` tokens) and indexes
    /// its distinct in-vocabulary words. A page is aligned with a label when
    /// its normalised title equals the label.
    pub fn new(
        pages: &[KbPage],
        vocab: &Vocabulary,
        stopwords: &Stopwords,
        labels: &LabelSpace,
        truncate: usize,
    ) -> Result<Self> {
        if pages.is_empty() {
            return Err(Error::Config("knowledge base is empty".into()));
        }
        let mut slots = Vec::with_capacity(pages.len());
        let mut postings: HashMap<usize, Vec<usize>> = HashMap::new();
        for (p, page) in pages.iter().enumerate() {
            let body_tokens = &page.body_tokens[..page.body_tokens.len().min(truncate)];
            let body = vocab.encode(body_tokens, stopwords);
            let title = vocab.encode(&super::text::tokenize(&page.title), stopwords);
            let distinct: BTreeSet<usize> = body.iter().chain(&title).copied().filter(|&w| w != UNK && w != PAD).collect();
            for w in distinct {
                postings.entry(w).or_default().push(p);
            }
            slots.push(SlotText {
                id: page.title.clone(),
                body,
                title,
                label: labels.index(&page.normalized_title()),
            });
        }
        let n = pages.len() as f64;
        let idf = postings.iter().map(|(&w, ps)| (w, (1.0 + n / ps.len() as f64).ln())).collect();
        let mut fallback: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].label.is_some()).collect();
        fallback.sort_by_key(|&i| slots[i].label);
        Ok(KnowledgeBase {
            slots,
            postings,
            idf,
            fallback,
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slots(&self) -> &[SlotText] {
        &self.slots
    }

    pub fn slot(&self, i: usize) -> &SlotText {
        &self.slots[i]
    }

    /// Pages sharing at least one word with the note, ranked by the summed
    /// inverse document frequency of the distinct shared words (ties by
    /// title), at most `cap` of them. A note sharing nothing gets the pages
    /// aligned with the most frequent labels, topped up by title order.
    pub fn retrieve(&self, note: &[usize], cap: usize) -> Vec<usize> {
        let distinct: BTreeSet<usize> = note.iter().copied().filter(|&w| w != UNK && w != PAD).collect();
        let mut score: HashMap<usize, f64> = HashMap::new();
        for w in &distinct {
            if let Some(ps) = self.postings.get(w) {
                let idf = self.idf[w];
                for &p in ps {
                    *score.entry(p).or_default() += idf;
                }
            }
        }
        if score.is_empty() {
            return self.fallback_set(cap);
        }
        let mut ranked: Vec<(usize, f64)> = score.into_iter().collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| self.slots[a.0].id.cmp(&self.slots[b.0].id)));
        ranked.into_iter().take(cap).map(|(p, _)| p).collect()
    }

    fn fallback_set(&self, cap: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.fallback.iter().copied().take(cap).collect();
        if out.len() < cap {
            let mut rest: Vec<usize> = (0..self.slots.len()).filter(|i| !out.contains(i)).collect();
            rest.sort_by(|&a, &b| self.slots[a].id.cmp(&self.slots[b].id));
            out.extend(rest.into_iter().take(cap - out.len()));
        }
        out
    }
}
