//! Multi-label evaluation: macro AUC, precision@k and Hamming loss.
//!
//! `scores[n]` holds the per-label probabilities of note `n` and `gold[n]`
//! its gold label indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::rank_labels;

/// AUC of one label by the Mann–Whitney statistic with average ranks for
/// ties. `None` when the label has no positives or no negatives.
pub fn label_auc(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|p| **p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let avg = (i + j + 2) as f64 / 2.0;
        rank_sum_pos += avg * order[i..=j].iter().filter(|&&k| positive[k]).count() as f64;
        i = j + 1;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Some((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AucSummary {
    pub macro_auc: f64,
    pub per_label: Vec<Option<f64>>,
    pub positives: Vec<usize>,
    pub skipped: usize,
}

fn check_shapes(scores: &[Vec<f64>], gold: &[Vec<usize>]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("no notes to evaluate".into()));
    }
    if scores.len() != gold.len() {
        return Err(Error::Dimension {
            op: "metrics",
            left: vec![scores.len()],
            right: vec![gold.len()],
        });
    }
    let r = scores[0].len();
    if let Some(bad) = scores.iter().find(|s| s.len() != r) {
        return Err(Error::Dimension {
            op: "metrics",
            left: vec![r],
            right: vec![bad.len()],
        });
    }
    if let Some(&l) = gold.iter().flatten().find(|&&l| l >= r) {
        return Err(Error::Data(format!("gold label {l} outside {r} labels")));
    }
    Ok(r)
}

fn indicator(gold: &[Vec<usize>], label: usize) -> Vec<bool> {
    gold.iter().map(|g| g.contains(&label)).collect()
}

/// Unweighted mean of the per-label AUCs, skipping one-class labels.
pub fn macro_auc(scores: &[Vec<f64>], gold: &[Vec<usize>]) -> Result<AucSummary> {
    let r = check_shapes(scores, gold)?;
    let mut per_label = Vec::with_capacity(r);
    let mut positives = Vec::with_capacity(r);
    for l in 0..r {
        let col: Vec<f64> = scores.iter().map(|s| s[l]).collect();
        let pos = indicator(gold, l);
        positives.push(pos.iter().filter(|p| **p).count());
        per_label.push(label_auc(&col, &pos));
    }
    let defined: Vec<f64> = per_label.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::UndefinedMetric("every label lacks positives or negatives".into()));
    }
    Ok(AucSummary {
        macro_auc: defined.iter().sum::<f64>() / defined.len() as f64,
        skipped: r - defined.len(),
        per_label,
        positives,
    })
}

/// Mean over notes of `|top-k ∩ gold| / k`; ties in score go to the lower index.
pub fn precision_at_k(scores: &[Vec<f64>], gold: &[Vec<usize>], k: usize) -> Result<f64> {
    let r = check_shapes(scores, gold)?;
    if k < 1 || k > r {
        return Err(Error::Argument(format!("k = {k} outside 1..={r}")));
    }
    let total: f64 = scores
        .iter()
        .zip(gold)
        .map(|(s, g)| rank_labels(s)[..k].iter().filter(|l| g.contains(l)).count() as f64 / k as f64)
        .sum();
    Ok(total / scores.len() as f64)
}

/// Fraction of (note, label) cells where `score ≥ threshold` disagrees with gold.
pub fn hamming_loss(scores: &[Vec<f64>], gold: &[Vec<usize>], threshold: f64) -> Result<f64> {
    let r = check_shapes(scores, gold)?;
    let wrong: usize = scores
        .iter()
        .zip(gold)
        .map(|(s, g)| (0..r).filter(|&l| (s[l] >= threshold) != g.contains(&l)).count())
        .sum();
    Ok(wrong as f64 / (scores.len() * r) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelAuc {
    pub label: String,
    /// `None` for labels skipped from the macro average.
    pub auc: Option<f64>,
    pub positives: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc_macro: f64,
    pub precision_at_5: f64,
    pub hamming_loss: f64,
    pub per_label_auc: Vec<LabelAuc>,
    pub skipped_labels: usize,
}

impl EvalReport {
    /// All three metrics; precision uses `k = min(5, R)`.
    pub fn compute(scores: &[Vec<f64>], gold: &[Vec<usize>], label_names: &[String]) -> Result<Self> {
        let auc = macro_auc(scores, gold)?;
        if label_names.len() != auc.per_label.len() {
            return Err(Error::Dimension {
                op: "eval_report",
                left: vec![label_names.len()],
                right: vec![auc.per_label.len()],
            });
        }
        let k = 5.min(label_names.len());
        Ok(EvalReport {
            auc_macro: auc.macro_auc,
            precision_at_5: precision_at_k(scores, gold, k)?,
            hamming_loss: hamming_loss(scores, gold, 0.5)?,
            per_label_auc: label_names
                .iter()
                .zip(&auc.per_label)
                .zip(&auc.positives)
                .map(|((label, auc), &positives)| LabelAuc {
                    label: label.clone(),
                    auc: *auc,
                    positives,
                })
                .collect(),
            skipped_labels: auc.skipped,
        })
    }

    /// Headline numbers followed by the per-label table, columns aligned.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<16}{:>10.4}\n", "auc_macro", self.auc_macro));
        out.push_str(&format!("{:<16}{:>10.4}\n", "precision_at_5", self.precision_at_5));
        out.push_str(&format!("{:<16}{:>10.4}\n", "hamming_loss", self.hamming_loss));
        out.push_str(&format!("{:<16}{:>10}\n\n", "skipped_labels", self.skipped_labels));
        let width = self.per_label_auc.iter().map(|l| l.label.len()).max().unwrap_or(5).max(5);
        out.push_str(&format!("{:<width$}  {:>8}  {:>9}\n", "label", "auc", "positives"));
        for l in &self.per_label_auc {
            let auc = l.auc.map_or_else(|| "-".to_owned(), |a| format!("{a:.4}"));
            out.push_str(&format!("{:<width$}  {:>8}  {:>9}\n", l.label, auc, l.positives));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auc_examples() {
        let s = [0.9, 0.8, 0.3, 0.2];
        assert_eq!(label_auc(&s, &[true, false, true, false]), Some(0.75));
        assert_eq!(label_auc(&s, &[true, true, false, false]), Some(1.0));
        assert_eq!(label_auc(&[0.4; 4], &[true, false, true, false]), Some(0.5));
        assert_eq!(label_auc(&s, &[true; 4]), None);
    }

    #[test]
    fn macro_auc_skips_and_counts() {
        let scores = vec![vec![0.9, 0.1], vec![0.2, 0.3]];
        let gold = vec![vec![0], vec![]];
        let s = macro_auc(&scores, &gold).unwrap();
        assert_eq!(s.macro_auc, 1.0);
        assert_eq!(s.skipped, 1);
        let none = macro_auc(&scores, &[vec![0, 1], vec![0, 1]]);
        assert!(matches!(none, Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn precision_examples() {
        let scores = vec![(0..10).map(|i| 1.0 - i as f64 / 10.0).collect::<Vec<_>>()];
        assert_eq!(precision_at_k(&scores, &[vec![0, 1, 2, 3, 4, 7]], 5).unwrap(), 1.0);
        assert_eq!(precision_at_k(&scores, &[vec![8, 9]], 5).unwrap(), 0.0);
        assert_eq!(precision_at_k(&scores, &[vec![1, 3, 9]], 5).unwrap(), 0.4);
    }

    #[test]
    fn hamming_examples() {
        let s = vec![vec![0.9, 0.1, 0.7]];
        assert_eq!(hamming_loss(&s, &[vec![0, 2]], 0.5).unwrap(), 0.0);
        assert_eq!(hamming_loss(&s, &[vec![1]], 0.5).unwrap(), 1.0);
        let mut fifty = vec![0.0; 50];
        fifty[3] = 0.6;
        assert!((hamming_loss(&[fifty], &[vec![]], 0.5).unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn report_roundtrips_through_json() {
        let scores = vec![vec![0.9, 0.1], vec![0.2, 0.3], vec![0.1 + 0.2, 1.0 / 3.0]];
        let gold = vec![vec![0], vec![1], vec![0, 1]];
        let r = EvalReport::compute(&scores, &gold, &["a".into(), "b".into()]).unwrap();
        let back: EvalReport = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        assert_eq!(back, r);
        assert!(r.to_table().contains("auc_macro"));
    }
}
