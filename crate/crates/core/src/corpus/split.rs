use std::cell::Cell;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.8, 0.1, 0.1);

/// Seeded shuffle, then contiguous train/val/test slices with sizes rounded
/// from the fractions (test takes the remainder).
pub fn split<T>(mut items: Vec<T>, fractions: (f64, f64, f64), seed: u64) -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
    let (a, b, c) = fractions;
    if [a, b, c].iter().any(|f| !(0.0..=1.0).contains(f)) || (a + b + c - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split fractions {fractions:?} must be in [0, 1] and sum to 1")));
    }
    let n = items.len();
    if n < 3 {
        return Err(Error::Data(format!("need at least 3 notes to split, got {n}")));
    }
    items.shuffle(&mut rng::stream(seed, "split"));
    let n_train = ((n as f64) * a).round() as usize;
    let n_val = (((n as f64) * b).round() as usize).min(n - n_train);
    let test = items.split_off(n_train + n_val);
    let val = items.split_off(n_train);
    Ok((items, val, test))
}

/// A split that counts every read of its contents.
#[derive(Debug)]
pub struct SealedSplit<T> {
    items: Vec<T>,
    reads: Cell<usize>,
}

impl<T> SealedSplit<T> {
    pub fn new(items: Vec<T>) -> Self {
        SealedSplit {
            items,
            reads: Cell::new(0),
        }
    }

    /// Hands out the contents and records the access.
    pub fn open(&self) -> &[T] {
        self.reads.set(self.reads.get() + 1);
        &self.items
    }

    pub fn reads(&self) -> usize {
        self.reads.get()
    }

    /// Size only; does not count as a read.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub val: Vec<T>,
    pub test: SealedSplit<T>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_notes_split_eight_one_one() {
        let (tr, va, te) = split((0..10).collect::<Vec<_>>(), DEFAULT_FRACTIONS, 7).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (8, 1, 1));
        let mut all: Vec<i32> = tr.iter().chain(&va).chain(&te).copied().collect();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let again = split((0..10).collect::<Vec<_>>(), DEFAULT_FRACTIONS, 7).unwrap();
        assert_eq!(again, (tr, va, te));
    }

    #[test]
    fn too_few_or_bad_fractions() {
        assert!(matches!(split(vec![1, 2], DEFAULT_FRACTIONS, 0), Err(Error::Data(_))));
        assert!(matches!(split(vec![1, 2, 3], (0.5, 0.5, 0.5), 0), Err(Error::Config(_))));
    }

    #[test]
    fn sealed_split_counts_reads() {
        let s = SealedSplit::new(vec![1, 2]);
        assert_eq!(s.len(), 2);
        assert_eq!(s.reads(), 0);
        assert_eq!(s.open(), &[1, 2]);
        assert_eq!(s.reads(), 1);
    }
}
