//! Central finite-difference verification of tape gradients.

use rand::seq::index::sample;

use super::params::{ParamId, ParamStore};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Finite-difference step `h`.
    pub step: f64,
    /// Maximum allowed relative error.
    pub tolerance: f64,
    /// Parameters with more entries than this are subsampled.
    pub full_check_limit: usize,
    /// Entries checked per subsampled parameter (at least 50).
    pub subsample: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-3,
            full_check_limit: 256,
            subsample: 128,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ParamCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    /// Analytic and numeric derivative at `worst_index`.
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub per_param: Vec<ParamCheck>,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn checked(&self) -> usize {
        self.per_param.iter().map(|p| p.checked).sum()
    }
}

/// Relative error with an absolute fallback when both sides are ~0.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs());
    let diff = (analytic - numeric).abs();
    if denom < 1e-10 {
        diff
    } else {
        diff / denom
    }
}

/// Compares the tape gradient of `build`'s scalar output against
/// `(f(θ+h) − f(θ−h)) / 2h` for every trainable parameter entry, or a seeded
/// subsample of large parameters (half drawn from entries with non-zero
/// analytic gradient, half uniformly).
pub fn grad_check<F>(store: &mut ParamStore, cfg: &GradCheckConfig, mut build: F) -> Result<GradCheckReport>
where
    F: for<'p> FnMut(&mut Tape<'p>) -> Result<Var>,
{
    let eval = |store: &ParamStore, build: &mut F| -> Result<f64> {
        let mut tape = Tape::new(store);
        let loss = build(&mut tape)?;
        Ok(tape.scalar(loss))
    };

    let analytic = {
        let mut tape = Tape::new(store);
        let loss = build(&mut tape)?;
        let first = tape.scalar(loss);
        let grads = tape.backward(loss)?;
        drop(tape);
        let second = eval(store, &mut build)?;
        if first.to_bits() != second.to_bits() {
            return Err(Error::Determinism(format!(
                "two forward passes gave {first:e} and {second:e}"
            )));
        }
        grads
    };

    let ids: Vec<ParamId> = store.ids().filter(|id| store.get(*id).trainable).collect();
    let mut per_param = Vec::with_capacity(ids.len());
    for id in ids {
        let dense = analytic
            .get(id)
            .map(|g| g.to_dense())
            .unwrap_or_else(|| super::Tensor::zeros(store.get(id).value().shape()));
        let name = store.get(id).name().to_owned();
        let indices = choose_indices(dense.data(), cfg, &name);

        let mut check = ParamCheck {
            name,
            checked: 0,
            max_rel_error: 0.0,
            worst_index: 0,
            worst_analytic: 0.0,
            worst_numeric: 0.0,
        };
        for i in indices {
            let original = store.get(id).value().data()[i];
            store.get_mut(id).value_mut()[i] = original + cfg.step;
            let plus = eval(store, &mut build);
            store.get_mut(id).value_mut()[i] = original - cfg.step;
            let minus = eval(store, &mut build);
            store.get_mut(id).value_mut()[i] = original;
            let numeric = (plus? - minus?) / (2.0 * cfg.step);
            let err = relative_error(dense.data()[i], numeric);
            check.checked += 1;
            if err > check.max_rel_error || err.is_nan() {
                check.max_rel_error = err;
                check.worst_index = i;
                check.worst_analytic = dense.data()[i];
                check.worst_numeric = numeric;
            }
        }
        per_param.push(check);
    }

    let max_rel_error = per_param.iter().map(|p| p.max_rel_error).fold(0.0, f64::max);
    Ok(GradCheckReport {
        max_rel_error,
        tolerance: cfg.tolerance,
        passed: max_rel_error < cfg.tolerance,
        per_param,
    })
}

fn choose_indices(grad: &[f64], cfg: &GradCheckConfig, name: &str) -> Vec<usize> {
    let n = grad.len();
    if n <= cfg.full_check_limit {
        return (0..n).collect();
    }
    let want = cfg.subsample.max(50).min(n);
    let mut rng = rng::stream(cfg.seed, name);
    let nonzero: Vec<usize> = (0..n).filter(|&i| grad[i] != 0.0).collect();
    let mut picked: Vec<usize> = if nonzero.is_empty() {
        Vec::new()
    } else {
        let k = (want / 2).min(nonzero.len());
        sample(&mut rng, nonzero.len(), k).into_iter().map(|j| nonzero[j]).collect()
    };
    picked.extend(sample(&mut rng, n, want - picked.len()));
    picked.sort_unstable();
    picked.dedup();
    picked
}
