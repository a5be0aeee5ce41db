//! Notes, knowledge-base pages and everything between raw text and model input.

mod dataset;
mod ingest;
mod labels;
mod retrieval;
mod split;
mod synth;
mod text;
mod vocab;

pub use dataset::{clean_notes, encode_text, prepare, prepare_with, Corpus, Example, PipelineConfig};
pub use ingest::{ingest_kb, ingest_notes, write_jsonl, KbPage, Note, NoteRecord, PageRecord};
pub use labels::{label_frequencies, top_n_labels, LabelSpace};
pub use retrieval::KnowledgeBase;
pub use split::{split, SealedSplit, Splits, DEFAULT_FRACTIONS};
pub use synth::{synth_generate, SynthCorpus, SynthSpec};
pub use text::{count_label_mentions, normalize_label, sanitize, tokenize, truncate, Stopwords};
pub use vocab::{Vocabulary, DEFAULT_VOCAB_CAP, PAD, RESERVED, UNK};
