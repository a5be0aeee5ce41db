//! Synthetic diagnostic corpus.
//!
//! Every disease owns a disjoint pool of made-up symptom words. A note picks
//! one or more diseases (Zipf-weighted, so label frequencies have a long
//! tail), draws a few symptoms from each pool and mixes in noise. Each disease
//! also gets a knowledge-base page listing its whole pool, so pages describe
//! symptoms that a given note may never mention.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::ingest::{write_jsonl, KbPage, Note, NoteRecord, PageRecord};
use super::text::Stopwords;
use crate::error::{Error, Result};
use crate::kvconfig::KvConfig;
use crate::rng;

const CONSONANTS: &[u8] = b"bdfgklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const SUFFIXES: &[&str] = &["syndrome", "disease", "fever", "disorder", "deficiency", "infection"];

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub diseases: usize,
    pub notes: usize,
    pub symptoms_per_disease: usize,
    /// Symptoms drawn for each disease a note carries.
    pub symptoms_per_note: usize,
    /// Fraction of note tokens that are noise.
    pub noise_rate: f64,
    /// Size of the shared noise vocabulary.
    pub noise_vocab: usize,
    /// Noise words appended to every page.
    pub page_noise: usize,
    pub max_labels: usize,
    pub zipf_s: f64,
    /// Probability that a note names one of its diseases outright.
    pub mention_rate: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            diseases: 20,
            notes: 2000,
            symptoms_per_disease: 50,
            symptoms_per_note: 3,
            noise_rate: 0.5,
            noise_vocab: 400,
            page_noise: 20,
            max_labels: 4,
            zipf_s: 1.0,
            mention_rate: 0.3,
            seed: 42,
        }
    }
}

const KEYS: &[&str] = &[
    "diseases",
    "notes",
    "symptoms_per_disease",
    "symptoms_per_note",
    "noise_rate",
    "noise_vocab",
    "page_noise",
    "max_labels",
    "zipf_s",
    "mention_rate",
    "seed",
];

impl SynthSpec {
    /// Defaults overridden by whatever keys the file sets.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        kv.reject_unknown(KEYS)?;
        let mut s = SynthSpec::default();
        kv.set("diseases", &mut s.diseases)?;
        kv.set("notes", &mut s.notes)?;
        kv.set("symptoms_per_disease", &mut s.symptoms_per_disease)?;
        kv.set("symptoms_per_note", &mut s.symptoms_per_note)?;
        kv.set("noise_rate", &mut s.noise_rate)?;
        kv.set("noise_vocab", &mut s.noise_vocab)?;
        kv.set("page_noise", &mut s.page_noise)?;
        kv.set("max_labels", &mut s.max_labels)?;
        kv.set("zipf_s", &mut s.zipf_s)?;
        kv.set("mention_rate", &mut s.mention_rate)?;
        kv.set("seed", &mut s.seed)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_owned()));
        if self.diseases < 1 || self.notes < 1 {
            return fail("need at least one disease and one note");
        }
        if self.symptoms_per_disease < 1 {
            return fail("symptoms_per_disease must be at least 1");
        }
        if self.symptoms_per_note < 1 || self.symptoms_per_note > self.symptoms_per_disease {
            return fail("symptoms_per_note must be in 1..=symptoms_per_disease");
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return fail("noise_rate must be in [0, 1)");
        }
        if self.noise_rate > 0.0 && self.noise_vocab == 0 {
            return fail("noise needs a non-empty noise vocabulary");
        }
        if self.page_noise > 0 && self.noise_vocab == 0 {
            return fail("page_noise needs a non-empty noise vocabulary");
        }
        if self.max_labels < 1 || self.max_labels > self.diseases {
            return fail("max_labels must be in 1..=diseases");
        }
        if !(self.zipf_s >= 0.0 && self.zipf_s.is_finite()) {
            return fail("zipf_s must be a finite non-negative number");
        }
        if !(0.0..=1.0).contains(&self.mention_rate) {
            return fail("mention_rate must be in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub notes: Vec<NoteRecord>,
    pub pages: Vec<PageRecord>,
    /// Disease titles, most frequent (by Zipf rank) first.
    pub diseases: Vec<String>,
    /// Symptom pool of each disease, aligned with `diseases`.
    pub symptoms: Vec<Vec<String>>,
}

impl SynthCorpus {
    /// Notes as the pipeline sees them after ingestion.
    pub fn parsed_notes(&self) -> Vec<Note> {
        self.notes.iter().map(Note::from_record).collect()
    }

    pub fn kb_pages(&self) -> Vec<KbPage> {
        self.pages.iter().map(KbPage::from_record).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_jsonl(&dir.join("notes.jsonl"), &self.notes)?;
        write_jsonl(&dir.join("kb.jsonl"), &self.pages)
    }
}

struct WordMaker {
    used: HashSet<String>,
}

impl WordMaker {
    fn next(&mut self, g: &mut ChaCha8Rng) -> String {
        loop {
            let syllables = g.random_range(2..=4);
            let mut w = String::with_capacity(2 * syllables);
            for _ in 0..syllables {
                w.push(*CONSONANTS.choose(g).expect("non-empty") as char);
                w.push(*VOWELS.choose(g).expect("non-empty") as char);
            }
            if self.used.insert(w.clone()) {
                return w;
            }
        }
    }
}

fn weighted_index(weights: &[f64], g: &mut ChaCha8Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = g.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    weights.iter().rposition(|w| *w > 0.0).expect("some weight is positive")
}

/// Generates the corpus; the same spec always yields the same corpus.
pub fn synth_generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let stop = Stopwords::english();
    let mut maker = WordMaker {
        used: SUFFIXES.iter().map(|s| s.to_string()).chain(stop.words()).collect(),
    };
    let mut g = rng::stream(spec.seed, "synth/lexicon");
    let diseases: Vec<String> = (0..spec.diseases)
        .map(|i| format!("{} {}", maker.next(&mut g), SUFFIXES[i % SUFFIXES.len()]))
        .collect();
    let symptoms: Vec<Vec<String>> = (0..spec.diseases)
        .map(|_| (0..spec.symptoms_per_disease).map(|_| maker.next(&mut g)).collect())
        .collect();
    let noise: Vec<String> = (0..spec.noise_vocab).map(|_| maker.next(&mut g)).collect();
    let noise_stop: Vec<String> = stop.words();

    let mut g = rng::stream(spec.seed, "synth/pages");
    let pages = diseases
        .iter()
        .zip(&symptoms)
        .map(|(title, pool)| {
            let mut text = format!("{title} is a condition. Signs and symptoms include {}.", pool.join(", "));
            for _ in 0..spec.page_noise {
                text.push(' ');
                text.push_str(noise.choose(&mut g).expect("noise vocabulary is non-empty"));
            }
            PageRecord {
                title: title.clone(),
                text,
            }
        })
        .collect();

    let zipf: Vec<f64> = (0..spec.diseases).map(|i| 1.0 / ((i + 1) as f64).powf(spec.zipf_s)).collect();
    let count_weights: Vec<f64> = (0..spec.max_labels).map(|k| 0.5f64.powi(k as i32)).collect();
    let mut g = rng::stream(spec.seed, "synth/notes");
    let mut notes = Vec::with_capacity(spec.notes);
    for n in 0..spec.notes {
        let k = weighted_index(&count_weights, &mut g) + 1;
        let mut w = zipf.clone();
        let mut chosen = Vec::with_capacity(k);
        for _ in 0..k {
            let d = weighted_index(&w, &mut g);
            w[d] = 0.0;
            chosen.push(d);
        }
        let mut tokens: Vec<String> = Vec::new();
        for &d in &chosen {
            tokens.extend(symptoms[d].choose_multiple(&mut g, spec.symptoms_per_note).cloned());
        }
        let n_sym = tokens.len() as f64;
        let n_noise = (n_sym * spec.noise_rate / (1.0 - spec.noise_rate)).round() as usize;
        for _ in 0..n_noise {
            let from = if g.random_bool(0.5) { &noise } else { &noise_stop };
            tokens.push(from.choose(&mut g).expect("non-empty").clone());
        }
        for &d in &chosen {
            if g.random_bool(spec.mention_rate) {
                tokens.push(diseases[d].clone());
            }
        }
        tokens.shuffle(&mut g);
        notes.push(NoteRecord {
            id: format!("note-{n:05}"),
            text: tokens.join(" "),
            labels: chosen.iter().map(|&d| diseases[d].clone()).collect(),
        });
    }
    Ok(SynthCorpus {
        notes,
        pages,
        diseases,
        symptoms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::text::tokenize;

    #[test]
    fn same_seed_same_corpus() {
        let spec = SynthSpec {
            notes: 50,
            ..SynthSpec::default()
        };
        assert_eq!(synth_generate(&spec).unwrap(), synth_generate(&spec).unwrap());
        let other = synth_generate(&SynthSpec { seed: 43, ..spec.clone() }).unwrap();
        assert_ne!(other.notes, synth_generate(&spec).unwrap().notes);
    }

    #[test]
    fn noiseless_single_label_notes_are_solved_by_overlap() {
        let spec = SynthSpec {
            notes: 300,
            noise_rate: 0.0,
            max_labels: 1,
            mention_rate: 0.0,
            page_noise: 0,
            ..SynthSpec::default()
        };
        let c = synth_generate(&spec).unwrap();
        let pools: Vec<HashSet<&str>> = c.symptoms.iter().map(|p| p.iter().map(String::as_str).collect()).collect();
        for n in &c.notes {
            let toks = tokenize(&n.text);
            let best = (0..pools.len())
                .max_by_key(|&d| (toks.iter().filter(|t| pools[d].contains(t.as_str())).count(), std::cmp::Reverse(d)))
                .unwrap();
            assert_eq!(n.labels, vec![c.diseases[best].clone()]);
            assert_eq!(toks.len(), spec.symptoms_per_note);
        }
    }

    #[test]
    fn zipf_sampling_gives_a_long_tail() {
        let c = synth_generate(&SynthSpec::default()).unwrap();
        let mut counts = vec![0usize; c.diseases.len()];
        for n in &c.notes {
            for l in &n.labels {
                counts[c.diseases.iter().position(|d| d == l).unwrap()] += 1;
            }
        }
        assert!(counts[0] > 4 * counts[19], "{counts:?}");
        assert!(counts.iter().all(|&c| c > 0), "{counts:?}");
    }

    #[test]
    fn inconsistent_specs_are_rejected() {
        for bad in [
            SynthSpec { symptoms_per_disease: 0, ..SynthSpec::default() },
            SynthSpec { symptoms_per_note: 51, ..SynthSpec::default() },
            SynthSpec { max_labels: 21, ..SynthSpec::default() },
            SynthSpec { noise_rate: 1.0, ..SynthSpec::default() },
        ] {
            assert!(matches!(synth_generate(&bad), Err(Error::Config(_))));
        }
    }
}
