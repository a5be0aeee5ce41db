use serde::{Deserialize, Serialize};

use super::model::{Model, NoteInput};
use crate::autodiff::{Mode, Tape};
use crate::error::{Error, Result};

/// Eval-mode output of a model on one note.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probabilities: Vec<f64>,
    /// Every label index, most probable first.
    pub ranking: Vec<usize>,
    /// Addressing weights per hop, aligned with `slot_ids`.
    pub addressing_trace: Vec<Vec<f64>>,
    pub slot_ids: Vec<String>,
}

impl Prediction {
    pub fn from_probabilities(probabilities: Vec<f64>) -> Self {
        let ranking = rank_labels(&probabilities);
        Prediction {
            probabilities,
            ranking,
            addressing_trace: Vec::new(),
            slot_ids: Vec::new(),
        }
    }

    pub fn top_k(&self, k: usize) -> Result<Vec<usize>> {
        predict_topk(self, k)
    }
}

/// Label indices by descending score, ties by ascending index.
pub fn rank_labels(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

pub fn predict_topk(pred: &Prediction, k: usize) -> Result<Vec<usize>> {
    let r = pred.probabilities.len();
    if k < 1 || k > r {
        return Err(Error::Argument(format!("k = {k} outside 1..={r}")));
    }
    Ok(pred.ranking[..k].to_vec())
}

impl Model {
    /// Eval-mode forward pass with plain-value outputs.
    pub fn predict(&self, input: &NoteInput<'_>) -> Result<Prediction> {
        let mut tape = Tape::new(&self.store);
        let out = self.forward(&mut tape, input, &mut Mode::Eval)?;
        let probabilities = tape.value(out.probabilities).data().to_vec();
        let mut pred = Prediction::from_probabilities(probabilities);
        pred.addressing_trace = out.hop_weights.iter().map(|w| tape.value(*w).data().to_vec()).collect();
        pred.slot_ids = out.slot_ids;
        Ok(pred)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn topk_examples() {
        let p = Prediction::from_probabilities(vec![0.9, 0.1, 0.9]);
        assert_eq!(p.top_k(2).unwrap(), vec![0, 2]);
        assert_eq!(p.top_k(3).unwrap(), vec![0, 2, 1]);
        let p = Prediction::from_probabilities(vec![0.01, 0.02, 0.97, 0.0]);
        assert_eq!(p.top_k(1).unwrap(), vec![2]);
        assert!(matches!(p.top_k(0), Err(Error::Argument(_))));
        assert!(matches!(p.top_k(5), Err(Error::Argument(_))));
    }
}
