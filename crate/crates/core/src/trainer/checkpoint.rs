//! Checkpoint files: `u64` little-endian header length, a UTF-8 JSON
//! manifest, then every parameter as little-endian `f32` in manifest order.
//! When the manifest records an optimizer step, the Adam first moments and
//! then second moments follow in the same order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::optim::OptimizerState;
use crate::autodiff::{ParamStore, Tensor};
use crate::corpus::{KbPage, LabelSpace, PageRecord, PipelineConfig, Stopwords, Vocabulary};
use crate::error::{Error, Result};
use crate::models::{param_layout, Model, ModelConfig};

pub const FORMAT_VERSION: u32 = 1;
const DTYPE: &str = "f32";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub epoch: usize,
    /// Validation P@5 of the saved epoch; `None` before any training.
    pub best_val_metric: Option<f64>,
}

/// Everything needed to encode new text the way the training corpus was.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusArtifacts {
    pub pipeline: PipelineConfig,
    pub vocabulary: Vocabulary,
    pub labels: LabelSpace,
    pub stopwords: Vec<String>,
    /// Knowledge-base pages as title plus space-joined body tokens.
    pub pages: Vec<PageRecord>,
}

impl CorpusArtifacts {
    pub fn new(pipeline: PipelineConfig, vocabulary: Vocabulary, labels: LabelSpace, stopwords: &Stopwords, pages: &[KbPage]) -> Self {
        CorpusArtifacts {
            pipeline,
            vocabulary,
            labels,
            stopwords: stopwords.words(),
            pages: pages
                .iter()
                .map(|p| PageRecord {
                    title: p.title.clone(),
                    text: p.body_tokens.join(" "),
                })
                .collect(),
        }
    }

    pub fn kb_pages(&self) -> Vec<KbPage> {
        self.pages
            .iter()
            .map(|p| KbPage {
                title: p.title.clone(),
                body_tokens: crate::corpus::tokenize(&p.text),
            })
            .collect()
    }

    pub fn stopword_set(&self) -> Stopwords {
        Stopwords::from_words(self.stopwords.iter().cloned())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub model_config: ModelConfig,
    pub params: Vec<ParamEntry>,
    pub seed: u64,
    pub training: TrainingMeta,
    pub corpus: Option<CorpusArtifacts>,
    pub optimizer_step: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub manifest: CheckpointManifest,
    pub model: Model,
    pub optimizer: Option<OptimizerState>,
}

fn push_f32(buf: &mut Vec<u8>, t: &Tensor) {
    for v in t.data() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
}

/// Serialises to bytes; see the module docs for the layout.
pub fn encode_checkpoint(
    model: &Model,
    seed: u64,
    training: TrainingMeta,
    corpus: Option<CorpusArtifacts>,
    optimizer: Option<&OptimizerState>,
) -> Result<Vec<u8>> {
    let manifest = CheckpointManifest {
        format_version: FORMAT_VERSION,
        model_config: model.config.clone(),
        params: model
            .store
            .iter()
            .map(|p| ParamEntry {
                name: p.name().to_owned(),
                shape: p.value().shape().to_vec(),
                dtype: DTYPE.to_owned(),
            })
            .collect(),
        seed,
        training,
        corpus,
        optimizer_step: optimizer.map(|o| o.t),
    };
    let header = serde_json::to_vec(&manifest)?;
    let mut buf = Vec::with_capacity(8 + header.len());
    buf.extend_from_slice(&(header.len() as u64).to_le_bytes());
    buf.extend_from_slice(&header);
    for p in model.store.iter() {
        push_f32(&mut buf, p.value());
    }
    if let Some(o) = optimizer {
        for t in o.m.iter().chain(&o.v) {
            push_f32(&mut buf, t);
        }
    }
    Ok(buf)
}

/// Writes through a temporary file and a rename, so a crash never leaves a
/// half-written checkpoint at `path`.
pub fn save_checkpoint(
    path: &Path,
    model: &Model,
    seed: u64,
    training: TrainingMeta,
    corpus: Option<CorpusArtifacts>,
    optimizer: Option<&OptimizerState>,
) -> Result<()> {
    let bytes = encode_checkpoint(model, seed, training, corpus, optimizer)?;
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn tensor(&mut self, name: &str, shape: &[usize]) -> Result<Tensor> {
        let n: usize = shape.iter().product();
        let need = n * 4;
        let left = self.bytes.len() - self.pos;
        if left < need {
            return Err(Error::CheckpointParam {
                param: name.to_owned(),
                message: format!("truncated data: needs {need} bytes, {left} remain"),
            });
        }
        let data: Vec<f64> = self.bytes[self.pos..self.pos + need]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::CheckpointParam {
                param: name.to_owned(),
                message: format!("non-finite value at element {i}"),
            });
        }
        self.pos += need;
        Tensor::new(shape.to_vec(), data)
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 8 {
        return Err(Error::Checkpoint("file too short for a header".into()));
    }
    let header_len = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
    let header_end = usize::try_from(header_len)
        .ok()
        .and_then(|h| h.checked_add(8))
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint(format!("header length {header_len} exceeds file size {}", bytes.len())))?;
    let manifest: CheckpointManifest = serde_json::from_slice(&bytes[8..header_end])
        .map_err(|e| Error::Checkpoint(format!("unreadable manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let layout = param_layout(&manifest.model_config)?;
    for (i, entry) in manifest.params.iter().enumerate() {
        if entry.dtype != DTYPE {
            return Err(Error::CheckpointParam {
                param: entry.name.clone(),
                message: format!("unsupported element type `{}`", entry.dtype),
            });
        }
        match layout.get(i) {
            Some((name, shape)) if *name == entry.name && shape.as_slice() == entry.shape.as_slice() => {}
            Some((name, shape)) if *name == entry.name => {
                return Err(Error::CheckpointParam {
                    param: entry.name.clone(),
                    message: format!("shape {:?} does not match the configuration's {:?}", entry.shape, shape),
                })
            }
            _ => {
                return Err(Error::CheckpointParam {
                    param: entry.name.clone(),
                    message: "unexpected parameter for this configuration".into(),
                })
            }
        }
    }
    if let Some((name, _)) = layout.get(manifest.params.len()) {
        return Err(Error::CheckpointParam {
            param: name.clone(),
            message: "missing from the manifest".into(),
        });
    }

    let mut reader = Reader {
        bytes,
        pos: header_end,
    };
    let mut store = ParamStore::new();
    for e in &manifest.params {
        let t = reader.tensor(&e.name, &e.shape)?;
        store.register(&e.name, t, true)?;
    }
    let optimizer = match manifest.optimizer_step {
        None => None,
        Some(t) => {
            let mut read_all = |tag: &str| -> Result<Vec<Tensor>> {
                manifest
                    .params
                    .iter()
                    .map(|e| reader.tensor(&format!("{}/{tag}", e.name), &e.shape))
                    .collect()
            };
            let m = read_all("adam_m")?;
            let v = read_all("adam_v")?;
            Some(OptimizerState { m, v, t })
        }
    };
    if reader.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after the last parameter",
            bytes.len() - reader.pos
        )));
    }
    let model = Model::from_store(manifest.model_config.clone(), store)?;
    Ok(Checkpoint {
        manifest,
        model,
        optimizer,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{AddressingKind, SlotText};
    use crate::models::{NoteInput, Variant};

    fn small() -> Model {
        Model::new(
            ModelConfig {
                variant: Variant::Condensed,
                hops: 3,
                embed_dim: 6,
                value_dim: 3,
                label_count: 4,
                vocab_size: 15,
                addressing: AddressingKind::Gated,
                gate_hidden: 3,
                ..ModelConfig::default()
            },
            11,
        )
        .unwrap()
    }

    fn meta() -> TrainingMeta {
        TrainingMeta {
            epoch: 2,
            best_val_metric: Some(0.25),
        }
    }

    #[test]
    fn roundtrip_preserves_f32_values_and_predictions() {
        let mut m = small();
        let opt = OptimizerState::new(&m.store);
        let bytes = encode_checkpoint(&m, 11, meta(), None, Some(&opt)).unwrap();
        let back = decode_checkpoint(&bytes).unwrap();
        m.store.round_to_f32();
        for (a, b) in m.store.iter().zip(back.model.store.iter()) {
            assert_eq!(a.name(), b.name());
            assert_eq!(a.value(), b.value());
        }
        assert_eq!(back.optimizer.unwrap().t, 0);
        let slots = [SlotText { id: "p".into(), body: vec![2, 3], title: vec![4], label: Some(1) }];
        let input = NoteInput { note: &[5, 6, 7], slots: slots.iter().collect() };
        assert_eq!(m.predict(&input).unwrap(), back.model.predict(&input).unwrap());
    }

    #[test]
    fn truncation_names_the_parameter() {
        let m = small();
        let bytes = encode_checkpoint(&m, 1, meta(), None, None).unwrap();
        let cut = &bytes[..bytes.len() - 3];
        match decode_checkpoint(cut) {
            Err(Error::CheckpointParam { param, .. }) => assert_eq!(param, "output"),
            other => panic!("{other:?}"),
        }
        assert!(decode_checkpoint(&bytes[..5]).is_err());
    }

    #[test]
    fn non_finite_values_name_the_parameter() {
        let m = small();
        let mut bytes = encode_checkpoint(&m, 1, meta(), None, None).unwrap();
        let n = bytes.len();
        bytes[n - 4..].copy_from_slice(&f32::NAN.to_le_bytes());
        match decode_checkpoint(&bytes) {
            Err(Error::CheckpointParam { param, message }) => {
                assert_eq!(param, "output");
                assert!(message.contains("non-finite"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_shape_and_version_are_rejected() {
        let m = small();
        let bytes = encode_checkpoint(&m, 1, meta(), None, None).unwrap();
        let hlen = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
        let mut manifest: CheckpointManifest = serde_json::from_slice(&bytes[8..8 + hlen]).unwrap();
        let rebuild = |mf: &CheckpointManifest| {
            let h = serde_json::to_vec(mf).unwrap();
            let mut out = (h.len() as u64).to_le_bytes().to_vec();
            out.extend_from_slice(&h);
            out.extend_from_slice(&bytes[8 + hlen..]);
            out
        };
        manifest.params[1].shape = vec![3, 6];
        let name = manifest.params[1].name.clone();
        match decode_checkpoint(&rebuild(&manifest)) {
            Err(Error::CheckpointParam { param, .. }) => assert_eq!(param, name),
            other => panic!("{other:?}"),
        }
        manifest.params[1].shape = vec![15, 6];
        manifest.format_version = 99;
        assert!(matches!(decode_checkpoint(&rebuild(&manifest)), Err(Error::Checkpoint(_))));
    }
}
