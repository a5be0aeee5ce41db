use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::text::Stopwords;
use crate::error::{Error, Result};

pub const UNK: usize = 0;
pub const PAD: usize = 1;
pub const RESERVED: usize = 2;
pub const DEFAULT_VOCAB_CAP: usize = 20_000;

/// Word ids: `UNK = 0`, `PAD = 1`, then kept words by descending frequency.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabWords", into = "VocabWords")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabWords {
    words: Vec<String>,
}

impl From<VocabWords> for Vocabulary {
    fn from(v: VocabWords) -> Self {
        Vocabulary::from_words(v.words)
    }
}

impl From<Vocabulary> for VocabWords {
    fn from(v: Vocabulary) -> Self {
        VocabWords { words: v.words }
    }
}

impl Vocabulary {
    /// Kept words in id order (without the reserved entries).
    pub fn from_words(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i + RESERVED)).collect();
        Vocabulary { words, index }
    }

    /// Top `cap` non-stopword words by frequency, ties lexicographic.
    pub fn build<'a, I>(docs: I, cap: usize, stopwords: &Stopwords) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        let mut freq: HashMap<&str, usize> = HashMap::new();
        let mut any = false;
        for doc in docs {
            any = true;
            for w in doc {
                if !stopwords.contains(w) {
                    *freq.entry(w.as_str()).or_default() += 1;
                }
            }
        }
        if !any {
            return Err(Error::Data("cannot build a vocabulary from an empty corpus".into()));
        }
        let mut ranked: Vec<(&str, usize)> = freq.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(cap);
        Ok(Self::from_words(ranked.into_iter().map(|(w, _)| w.to_owned()).collect()))
    }

    /// Total id count including the reserved ids.
    pub fn len(&self) -> usize {
        self.words.len() + RESERVED
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        match id {
            UNK => Some("<unk>"),
            PAD => Some("<pad>"),
            i => self.words.get(i - RESERVED).map(String::as_str),
        }
    }

    /// Word ids with stopwords dropped and unknown words mapped to `UNK`.
    pub fn encode(&self, tokens: &[String], stopwords: &Stopwords) -> Vec<usize> {
        tokens.iter().filter(|t| !stopwords.contains(t)).map(|t| self.id(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_owned).collect()
    }

    #[test]
    fn build_examples() {
        let none = Stopwords::empty();
        let d = [doc("a b c d e")];
        let v = Vocabulary::build(d.iter().map(Vec::as_slice), 20_000, &none).unwrap();
        assert_eq!(v.len(), 5 + RESERVED);

        let d = [doc("the the the cough the")];
        let v = Vocabulary::build(d.iter().map(Vec::as_slice), 10, &Stopwords::english()).unwrap();
        assert!(!v.contains("the"));
        assert!(v.contains("cough"));

        let d = [doc("a a a b b c")];
        let v = Vocabulary::build(d.iter().map(Vec::as_slice), 2, &none).unwrap();
        assert_eq!(v.words(), ["a", "b"]);
        assert_eq!(v.id("c"), UNK);
        assert_eq!(v.id("a"), 2);
    }

    #[test]
    fn ties_are_lexicographic_and_encode_skips_stopwords() {
        let d = [doc("zeta alpha mid")];
        let v = Vocabulary::build(d.iter().map(Vec::as_slice), 2, &Stopwords::empty()).unwrap();
        assert_eq!(v.words(), ["alpha", "mid"]);
        let sw = Stopwords::english();
        assert_eq!(v.encode(&doc("the alpha zeta mid"), &sw), vec![2, UNK, 3]);
        assert!(Vocabulary::build(std::iter::empty(), 5, &sw).is_err());
    }

    #[test]
    fn serde_roundtrip_rebuilds_index() {
        let v = Vocabulary::from_words(doc("x y z"));
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocabulary = serde_json::from_str(&json).unwrap();
        assert_eq!(back.id("z"), 4);
        assert_eq!(back, v);
    }
}
