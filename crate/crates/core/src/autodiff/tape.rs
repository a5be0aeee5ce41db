//! Wengert-list tape for reverse-mode differentiation.
//!
//! Every operation appends a node holding its inputs and forward value. Nodes
//! are created in topological order, so `backward` is a single reverse sweep
//! with gradient contributions added in a fixed order. Parameters are read
//! straight out of the borrowed [`ParamStore`] and never copied onto the tape.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, RngCore};

use super::params::{Gradients, ParamGrad, ParamId, ParamStore};
use super::tensor::{self, Tensor};
use crate::error::{Error, Result};

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` inside cross-entropy.
pub const BCE_CLAMP: f64 = 1e-7;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Forward mode: training draws dropout masks from the supplied generator.
pub enum Mode<'r> {
    Train(&'r mut dyn RngCore),
    Eval,
}

impl Mode<'_> {
    pub fn is_train(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

#[derive(Clone, Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    Concat(Var, Var),
    SliceRows(Var, usize),
    Sigmoid(Var),
    Tanh(Var),
    SoftmaxRow(Var),
    EmbeddingBag { table: Var, bags: Vec<Vec<usize>> },
    Mask(Var, Vec<f64>),
    Sum(Var),
    SumSquares(Var),
    BceMean { p: Var, targets: Vec<f64> },
    SigmoidBceMean { z: Var, targets: Vec<f64> },
    SoftmaxBceMean { z: Var, targets: Vec<f64> },
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    // `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
}

pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, Var>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => self.params.get(*id).value(),
            (None, _) => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.value(v).shape()
    }

    /// First element of a node's value; used for scalar losses.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).data()[0]
    }

    fn push(&mut self, op: Op, value: Tensor) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(Op::Constant, value)
    }

    /// Leaf node for a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_nodes.get(&id) {
            return *v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(Op::MatMul(a, b), out))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        self.value(x).require_rank2("transpose")?;
        let out = tensor::transpose(self.value(x));
        Ok(self.push(Op::Transpose(x), out))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::Dimension {
                op: "add",
                left: ta.shape().to_vec(),
                right: tb.shape().to_vec(),
            });
        }
        let mut out = ta.clone();
        out.add_assign(tb);
        Ok(self.push(Op::Add(a, b), out))
    }

    /// Adds a `1×n` row to every row of an `m×n` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (ta, tr) = (self.value(a), self.value(row));
        ta.require_rank2("add_row")?;
        if !tr.is_row_vector() || tr.cols() != ta.cols() {
            return Err(Error::Dimension {
                op: "add_row",
                left: ta.shape().to_vec(),
                right: tr.shape().to_vec(),
            });
        }
        let mut out = ta.clone();
        let cols = ta.cols();
        for chunk in out.data_mut().chunks_mut(cols.max(1)) {
            for (o, r) in chunk.iter_mut().zip(tr.data()) {
                *o += r;
            }
        }
        Ok(self.push(Op::AddRow(a, row), out))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let mut out = self.value(x).clone();
        out.scale_in_place(c);
        self.push(Op::Scale(x, c), out)
    }

    /// Concatenates two row vectors.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        for t in [ta, tb] {
            if !t.is_row_vector() {
                return Err(Error::Rank {
                    op: "concat",
                    expected: "row vector",
                    shape: t.shape().to_vec(),
                });
            }
        }
        let mut data = ta.data().to_vec();
        data.extend_from_slice(tb.data());
        let out = Tensor::matrix(1, data.len(), data)?;
        Ok(self.push(Op::Concat(a, b), out))
    }

    /// Rows `start..start + len` of a matrix.
    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        t.require_rank2("slice_rows")?;
        if start + len > t.rows() {
            return Err(Error::Dimension {
                op: "slice_rows",
                left: t.shape().to_vec(),
                right: vec![start, len],
            });
        }
        let cols = t.cols();
        let data = t.data()[start * cols..(start + len) * cols].to_vec();
        let out = Tensor::matrix(len, cols, data)?;
        Ok(self.push(Op::SliceRows(x, start), out))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| tensor::sigmoid_scalar(v)).collect();
        let out = Tensor::new(t.shape().to_vec(), data).expect("shape preserved");
        self.push(Op::Sigmoid(x), out)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|v| v.tanh()).collect();
        let out = Tensor::new(t.shape().to_vec(), data).expect("shape preserved");
        self.push(Op::Tanh(x), out)
    }

    /// Softmax over a non-empty row vector.
    pub fn softmax_row(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if !t.is_row_vector() || t.cols() == 0 {
            return Err(Error::Rank {
                op: "softmax_row",
                expected: "non-empty row vector",
                shape: t.shape().to_vec(),
            });
        }
        let out = tensor::softmax_rows(t);
        Ok(self.push(Op::SoftmaxRow(x), out))
    }

    /// Sum of the table rows selected by `ids`, as a `1×d` row.
    pub fn embedding_bag(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        self.embedding_bags(table, &[ids.to_vec()])
    }

    /// One summed row per bag, stacked into an `m×d` matrix.
    pub fn embedding_bags(&mut self, table: Var, bags: &[Vec<usize>]) -> Result<Var> {
        let t = self.value(table);
        t.require_rank2("embedding_bag")?;
        let (vocab, d) = (t.rows(), t.cols());
        let mut out = vec![0.0; bags.len() * d];
        for (i, bag) in bags.iter().enumerate() {
            let dst = &mut out[i * d..(i + 1) * d];
            for &id in bag {
                if id >= vocab {
                    return Err(Error::OutOfVocabulary { id, vocab });
                }
                for (o, v) in dst.iter_mut().zip(t.row_slice(id)) {
                    *o += v;
                }
            }
        }
        let out = Tensor::matrix(bags.len(), d, out)?;
        Ok(self.push(
            Op::EmbeddingBag {
                table,
                bags: bags.to_vec(),
            },
            out,
        ))
    }

    /// Inverted dropout: in training each entry is zeroed with probability `p`
    /// and survivors are scaled by `1/(1-p)`; evaluation is the identity.
    pub fn dropout(&mut self, x: Var, p: f64, mode: &mut Mode<'_>) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Config(format!("dropout probability {p} outside [0, 1)")));
        }
        let rng = match mode {
            Mode::Train(rng) if p > 0.0 => rng,
            _ => return Ok(x),
        };
        let keep = 1.0 / (1.0 - p);
        let t = self.value(x);
        let mask: Vec<f64> = (0..t.len())
            .map(|_| if rng.random::<f64>() < p { 0.0 } else { keep })
            .collect();
        let data = t.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        let out = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(Op::Mask(x, mask), out))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.push(Op::Sum(x), Tensor::scalar(s))
    }

    pub fn sum_squares(&mut self, x: Var) -> Var {
        let s = self.value(x).sum_squares();
        self.push(Op::SumSquares(x), Tensor::scalar(s))
    }

    /// Mean binary cross-entropy between probabilities and 0/1 targets.
    pub fn bce_mean(&mut self, p: Var, targets: &[f64]) -> Result<Var> {
        let t = self.value(p);
        if t.len() != targets.len() || targets.is_empty() {
            return Err(Error::Dimension {
                op: "bce_mean",
                left: t.shape().to_vec(),
                right: vec![targets.len()],
            });
        }
        let n = targets.len() as f64;
        let total: f64 = t
            .data()
            .iter()
            .zip(targets)
            .map(|(&prob, &y)| {
                let pc = prob.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
                -(y * pc.ln() + (1.0 - y) * (1.0 - pc).ln())
            })
            .sum();
        Ok(self.push(
            Op::BceMean {
                p,
                targets: targets.to_vec(),
            },
            Tensor::scalar(total / n),
        ))
    }

    /// `bce_mean(sigmoid(z), targets)` evaluated in log space, so saturated
    /// logits keep full precision. The clamp acts on `z` at `±logit(1 − c)`.
    pub fn sigmoid_bce_mean(&mut self, z: Var, targets: &[f64]) -> Result<Var> {
        let t = self.value(z);
        check_targets("sigmoid_bce_mean", t, targets)?;
        let bound = sigmoid_clamp_bound();
        let total: f64 = t
            .data()
            .iter()
            .zip(targets)
            .map(|(&x, &y)| {
                let x = x.clamp(-bound, bound);
                y * softplus(-x) + (1.0 - y) * softplus(x)
            })
            .sum();
        let out = Tensor::scalar(total / targets.len() as f64);
        Ok(self.push(
            Op::SigmoidBceMean {
                z,
                targets: targets.to_vec(),
            },
            out,
        ))
    }

    /// `bce_mean(softmax_row(z), targets)` evaluated in log space.
    pub fn softmax_bce_mean(&mut self, z: Var, targets: &[f64]) -> Result<Var> {
        let t = self.value(z);
        if !t.is_row_vector() || t.cols() == 0 {
            return Err(Error::Rank {
                op: "softmax_bce_mean",
                expected: "non-empty row vector",
                shape: t.shape().to_vec(),
            });
        }
        check_targets("softmax_bce_mean", t, targets)?;
        let total: f64 = softmax_log_terms(t.data())
            .iter()
            .zip(targets)
            .map(|(terms, &y)| {
                let (lw, l1w) = terms.clamped();
                -(y * lw + (1.0 - y) * l1w)
            })
            .sum();
        let out = Tensor::scalar(total / targets.len() as f64);
        Ok(self.push(
            Op::SoftmaxBceMean {
                z,
                targets: targets.to_vec(),
            },
            out,
        ))
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.backward_scaled(loss, 1.0)
    }

    /// Reverse sweep seeded with `seed · ∂loss/∂loss`.
    pub fn backward_scaled(&self, loss: Var, seed: f64) -> Result<Gradients> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(Error::Rank {
                op: "backward",
                expected: "scalar loss",
                shape: lt.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<ParamGrad>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(ParamGrad::Dense(Tensor::filled(lt.shape(), seed)));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if let Op::Param(_) = node.op {
                grads[idx] = Some(g);
                continue;
            }
            let g = g.to_dense();
            self.propagate(idx, &g, &mut grads);
        }

        let mut entries: Vec<(ParamId, ParamGrad)> = self
            .param_nodes
            .iter()
            .filter_map(|(id, v)| grads.get(v.0).and_then(|g| g.clone()).map(|g| (*id, g)))
            .collect();
        entries.sort_by_key(|(id, _)| *id);
        Ok(Gradients { entries })
    }

    fn propagate(&self, idx: usize, g: &Tensor, grads: &mut [Option<ParamGrad>]) {
        let y = self.nodes[idx].value.as_ref().expect("non-leaf has value");
        match &self.nodes[idx].op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let da = tensor::matmul_nt(g, self.value(*b));
                let db = tensor::matmul_tn(self.value(*a), g);
                self.add_dense(grads, *a, da);
                self.add_dense(grads, *b, db);
            }
            Op::Transpose(x) => self.add_dense(grads, *x, tensor::transpose(g)),
            Op::Add(a, b) => {
                self.add_dense(grads, *a, g.clone());
                self.add_dense(grads, *b, g.clone());
            }
            Op::AddRow(a, row) => {
                self.add_dense(grads, *a, g.clone());
                let cols = g.cols();
                let mut dr = vec![0.0; cols];
                for chunk in g.data().chunks(cols.max(1)) {
                    for (d, v) in dr.iter_mut().zip(chunk) {
                        *d += v;
                    }
                }
                self.add_dense(grads, *row, Tensor::row(&dr));
            }
            Op::Scale(x, c) => {
                let mut d = g.clone();
                d.scale_in_place(*c);
                self.add_dense(grads, *x, d);
            }
            Op::Concat(a, b) => {
                let p = self.value(*a).cols();
                let (left, right) = g.data().split_at(p);
                self.add_dense(grads, *a, Tensor::row(left));
                self.add_dense(grads, *b, Tensor::row(right));
            }
            Op::SliceRows(x, start) => {
                for r in 0..g.rows() {
                    self.add_grad_row(grads, *x, start + r, g.row_slice(r));
                }
            }
            Op::Sigmoid(x) => {
                let d = zip_map(g, y, |gv, yv| gv * yv * (1.0 - yv));
                self.add_dense(grads, *x, d);
            }
            Op::Tanh(x) => {
                let d = zip_map(g, y, |gv, yv| gv * (1.0 - yv * yv));
                self.add_dense(grads, *x, d);
            }
            Op::SoftmaxRow(x) => {
                let dot: f64 = g.data().iter().zip(y.data()).map(|(a, b)| a * b).sum();
                let d = zip_map(g, y, |gv, yv| yv * (gv - dot));
                self.add_dense(grads, *x, d);
            }
            Op::EmbeddingBag { table, bags } => {
                for (i, bag) in bags.iter().enumerate() {
                    let row = g.row_slice(i);
                    for &id in bag {
                        self.add_grad_row(grads, *table, id, row);
                    }
                }
            }
            Op::Mask(x, mask) => {
                let data = g.data().iter().zip(mask).map(|(a, m)| a * m).collect();
                let d = Tensor::new(g.shape().to_vec(), data).expect("shape preserved");
                self.add_dense(grads, *x, d);
            }
            Op::Sum(x) => {
                let s = g.data()[0];
                self.add_dense(grads, *x, Tensor::filled(self.value(*x).shape(), s));
            }
            Op::SumSquares(x) => {
                let s = g.data()[0];
                let xv = self.value(*x);
                let data = xv.data().iter().map(|v| 2.0 * v * s).collect();
                let d = Tensor::new(xv.shape().to_vec(), data).expect("shape preserved");
                self.add_dense(grads, *x, d);
            }
            Op::BceMean { p, targets } => {
                let s = g.data()[0];
                let pv = self.value(*p);
                let n = targets.len() as f64;
                let data = pv
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(&prob, &t)| {
                        if !(BCE_CLAMP..=1.0 - BCE_CLAMP).contains(&prob) {
                            0.0
                        } else {
                            s * (-t / prob + (1.0 - t) / (1.0 - prob)) / n
                        }
                    })
                    .collect();
                let d = Tensor::new(pv.shape().to_vec(), data).expect("shape preserved");
                self.add_dense(grads, *p, d);
            }
            Op::SigmoidBceMean { z, targets } => {
                let s = g.data()[0] / targets.len() as f64;
                let zv = self.value(*z);
                let bound = sigmoid_clamp_bound();
                let data = zv
                    .data()
                    .iter()
                    .zip(targets)
                    .map(|(&x, &y)| {
                        if x.abs() > bound {
                            0.0
                        } else {
                            // σ(x) − y without cancellation when y = 1.
                            s * ((1.0 - y) * tensor::sigmoid_scalar(x) - y * tensor::sigmoid_scalar(-x))
                        }
                    })
                    .collect();
                let d = Tensor::new(zv.shape().to_vec(), data).expect("shape preserved");
                self.add_dense(grads, *z, d);
            }
            Op::SoftmaxBceMean { z, targets } => {
                let s = g.data()[0] / targets.len() as f64;
                let zv = self.value(*z).data();
                let terms = softmax_log_terms(zv);
                let m = zv.len();
                let mut d = vec![0.0; m];
                for (i, (term, &y)) in terms.iter().zip(targets).enumerate() {
                    if term.is_clamped() {
                        continue;
                    }
                    // ∂/∂z_j of −(y·ln w_i + (1−y)·ln(1−w_i)) is
                    // w_j − y·[j=i] − (1−y)·[j≠i]·e^{z_j − lse_{−i}}.
                    for j in 0..m {
                        let v = if j == i {
                            (1.0 - y) * term.log_w.exp() - y * term.log_one_minus_w().exp()
                        } else {
                            (zv[j] - term.lse).exp() - (1.0 - y) * (zv[j] - term.lse_rest).exp()
                        };
                        d[j] += s * v;
                    }
                }
                self.add_dense(grads, *z, Tensor::row(&d));
            }
        }
    }

    fn add_dense(&self, grads: &mut [Option<ParamGrad>], v: Var, d: Tensor) {
        let slot = &mut grads[v.0];
        match slot {
            None => *slot = Some(ParamGrad::Dense(d)),
            Some(ParamGrad::Dense(t)) => t.add_assign(&d),
            Some(rows @ ParamGrad::Rows { .. }) => {
                let mut t = rows.to_dense();
                t.add_assign(&d);
                *slot = Some(ParamGrad::Dense(t));
            }
        }
    }

    fn add_grad_row(&self, grads: &mut [Option<ParamGrad>], v: Var, r: usize, vals: &[f64]) {
        let slot = &mut grads[v.0];
        match slot {
            None => {
                let mut rows = BTreeMap::new();
                rows.insert(r, vals.to_vec());
                *slot = Some(ParamGrad::Rows {
                    shape: self.value(v).shape().to_vec(),
                    rows,
                });
            }
            Some(ParamGrad::Rows { rows, .. }) => {
                let entry = rows.entry(r).or_insert_with(|| vec![0.0; vals.len()]);
                for (a, b) in entry.iter_mut().zip(vals) {
                    *a += b;
                }
            }
            Some(ParamGrad::Dense(t)) => {
                let cols = t.cols();
                for (a, b) in t.data_mut()[r * cols..(r + 1) * cols].iter_mut().zip(vals) {
                    *a += b;
                }
            }
        }
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(x, y)| f(*x, *y)).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shape preserved")
}

fn check_targets(op: &'static str, t: &Tensor, targets: &[f64]) -> Result<()> {
    if t.len() != targets.len() || targets.is_empty() {
        return Err(Error::Dimension {
            op,
            left: t.shape().to_vec(),
            right: vec![targets.len()],
        });
    }
    Ok(())
}

/// `logit(1 − BCE_CLAMP)`: `σ(z)` lies inside the clamp exactly when `|z|` is
/// at most this.
fn sigmoid_clamp_bound() -> f64 {
    ((1.0 - BCE_CLAMP) / BCE_CLAMP).ln()
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// `ln w_i` and `ln(1 − w_i)` of one softmax entry, from log-sum-exps.
struct SoftmaxLogTerm {
    lse: f64,
    /// Log-sum-exp over every entry but this one; `-inf` for a single entry.
    lse_rest: f64,
    log_w: f64,
}

impl SoftmaxLogTerm {
    fn log_one_minus_w(&self) -> f64 {
        self.lse_rest - self.lse
    }

    fn is_clamped(&self) -> bool {
        let floor = BCE_CLAMP.ln();
        self.log_w < floor || self.log_one_minus_w() < floor
    }

    /// The pair after clamping `w` to `[c, 1 − c]`.
    fn clamped(&self) -> (f64, f64) {
        let (lo, hi) = (BCE_CLAMP.ln(), (-BCE_CLAMP).ln_1p());
        if self.log_w < lo {
            (lo, hi)
        } else if self.log_one_minus_w() < lo {
            (hi, lo)
        } else {
            (self.log_w, self.log_one_minus_w())
        }
    }
}

fn softmax_log_terms(z: &[f64]) -> Vec<SoftmaxLogTerm> {
    let lse = log_sum_exp(z.iter().copied());
    (0..z.len())
        .map(|i| {
            let rest = z.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v);
            SoftmaxLogTerm {
                lse,
                lse_rest: log_sum_exp(rest),
                log_w: z[i] - lse,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn store_with(name: &str, t: Tensor) -> (ParamStore, ParamId) {
        let mut s = ParamStore::new();
        let id = s.register(name, t, true).unwrap();
        (s, id)
    }

    #[test]
    fn concat_layout() {
        let s = ParamStore::new();
        let mut tape = Tape::new(&s);
        let a = tape.constant(Tensor::row(&[1.0, 2.0]));
        let b = tape.constant(Tensor::row(&[3.0]));
        let c = tape.concat(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 2.0, 3.0]);

        let empty = tape.constant(Tensor::row(&[]));
        let same = tape.concat(a, empty).unwrap();
        assert_eq!(tape.value(same), tape.value(a));

        let u = tape.constant(Tensor::zeros(&[1, 300]));
        let half = tape.constant(Tensor::zeros(&[1, 150]));
        let joined = tape.concat(u, half).unwrap();
        assert_eq!(tape.shape(joined), &[1, 450]);

        let m = tape.constant(Tensor::zeros(&[2, 2]));
        assert!(matches!(tape.concat(m, a), Err(Error::Rank { .. })));
    }

    #[test]
    fn sigmoid_values() {
        let s = ParamStore::new();
        let mut tape = Tape::new(&s);
        let x = tape.constant(Tensor::row(&[0.0, 3f64.ln(), -1000.0]));
        let y = tape.sigmoid(x);
        let v = tape.value(y).data();
        assert_eq!(v[0], 0.5);
        assert!((v[1] - 0.75).abs() < 1e-15);
        assert!(v[2].is_finite() && (0.0..=1e-300).contains(&v[2]));
    }

    #[test]
    fn softmax_values() {
        let s = ParamStore::new();
        let mut tape = Tape::new(&s);
        let x = tape.constant(Tensor::row(&[0.0, 0.0, 0.0]));
        let y = tape.softmax_row(x).unwrap();
        for v in tape.value(y).data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let x = tape.constant(Tensor::row(&[1f64.ln(), 2f64.ln(), 3f64.ln()]));
        let y = tape.softmax_row(x).unwrap();
        let expected = [1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0];
        for (v, e) in tape.value(y).data().iter().zip(expected) {
            assert!((v - e).abs() < 1e-15);
        }
    }

    #[test]
    fn embedding_bag_sums_rows() {
        let table = Tensor::from_rows(&(0..10).map(|i| vec![i as f64, -(i as f64)]).collect::<Vec<_>>()).unwrap();
        let (s, id) = store_with("e", table);
        let mut tape = Tape::new(&s);
        let e = tape.param(id);
        let empty = tape.embedding_bag(e, &[]).unwrap();
        assert_eq!(tape.value(empty).data(), &[0.0, 0.0]);
        let one = tape.embedding_bag(e, &[7]).unwrap();
        assert_eq!(tape.value(one).data(), &[7.0, -7.0]);
        let two = tape.embedding_bag(e, &[7, 7]).unwrap();
        assert_eq!(tape.value(two).data(), &[14.0, -14.0]);
        assert!(matches!(
            tape.embedding_bag(e, &[10]),
            Err(Error::OutOfVocabulary { id: 10, vocab: 10 })
        ));
    }

    #[test]
    fn embedding_bag_gradient_accumulates_duplicates() {
        let (s, id) = store_with("e", Tensor::zeros(&[4, 2]));
        let mut tape = Tape::new(&s);
        let e = tape.param(id);
        let bag = tape.embedding_bag(e, &[1, 3, 1]).unwrap();
        let loss = tape.sum(bag);
        let g = tape.backward(loss).unwrap().get(id).unwrap().to_dense();
        assert_eq!(g.data(), &[0.0, 0.0, 2.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn dropout_modes() {
        let s = ParamStore::new();
        let mut tape = Tape::new(&s);
        let x = tape.constant(Tensor::row(&[1.0, 2.0, 3.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let same = tape.dropout(x, 0.0, &mut Mode::Train(&mut rng)).unwrap();
        assert_eq!(same, x);
        let same = tape.dropout(x, 0.5, &mut Mode::Eval).unwrap();
        assert_eq!(same, x);
        assert!(matches!(tape.dropout(x, 1.0, &mut Mode::Eval), Err(Error::Config(_))));
        assert!(tape.dropout(x, -0.1, &mut Mode::Eval).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        // Monte-Carlo check against E[mask] = 1 for inverted dropout.
        let s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Tensor::row(&[1.0, -2.0, 0.5, 4.0]);
        let trials = 10_000;
        let mut total = [0.0; 4];
        for _ in 0..trials {
            let mut tape = Tape::new(&s);
            let v = tape.constant(x.clone());
            let y = tape.dropout(v, 0.5, &mut Mode::Train(&mut rng)).unwrap();
            for (t, v) in total.iter_mut().zip(tape.value(y).data()) {
                *t += v;
            }
        }
        for (t, v) in total.iter().zip(x.data()) {
            let mean = t / trials as f64;
            assert!((mean - v).abs() <= 0.02 * v.abs(), "{mean} vs {v}");
        }
    }

    #[test]
    fn sigmoid_gradient_at_zero() {
        let (s, id) = store_with("w", Tensor::scalar(0.0));
        let mut tape = Tape::new(&s);
        let w = tape.param(id);
        let loss = tape.sigmoid(w);
        let g = tape.backward(loss).unwrap();
        assert_eq!(g.get(id).unwrap().to_dense().data(), &[0.25]);
    }

    #[test]
    fn linear_gradient_is_outer_product() {
        let (s, id) = store_with("w", Tensor::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap());
        let x = Tensor::from_rows(&[vec![0.5], vec![-1.0], vec![2.0]]).unwrap();
        let mut tape = Tape::new(&s);
        let w = tape.param(id);
        let xv = tape.constant(x);
        let y = tape.matmul(w, xv).unwrap();
        let loss = tape.sum(y);
        let g = tape.backward(loss).unwrap().get(id).unwrap().to_dense();
        assert_eq!(g.data(), &[0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let (s, id) = store_with("w", Tensor::zeros(&[1, 3]));
        let mut tape = Tape::new(&s);
        let w = tape.param(id);
        let y = tape.sigmoid(w);
        assert!(matches!(tape.backward(y), Err(Error::Rank { .. })));
    }

    #[test]
    fn bce_uniform_uncertainty_is_ln2() {
        let s = ParamStore::new();
        let mut tape = Tape::new(&s);
        let p = tape.constant(Tensor::filled(&[1, 6], 0.5));
        let l = tape.bce_mean(p, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((tape.scalar(l) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn param_leaf_is_shared() {
        let (s, id) = store_with("w", Tensor::zeros(&[1, 1]));
        let mut tape = Tape::new(&s);
        assert_eq!(tape.param(id), tape.param(id));
    }

    fn grad_of(build: impl Fn(&mut Tape<'_>, Var) -> Var, z: &[f64]) -> (f64, Vec<f64>) {
        let (s, id) = store_with("z", Tensor::row(z));
        let mut tape = Tape::new(&s);
        let zv = tape.param(id);
        let l = build(&mut tape, zv);
        let g = tape.backward(l).unwrap().get(id).unwrap().to_dense();
        (tape.scalar(l), g.data().to_vec())
    }

    #[test]
    fn log_space_bce_matches_probability_bce() {
        let z = [0.3, -1.7, 2.4, 0.0, -0.2];
        let y = [1.0, 0.0, 1.0, 0.0, 1.0];
        for softmax in [false, true] {
            let fused = grad_of(
                |t, v| {
                    if softmax {
                        t.softmax_bce_mean(v, &y).unwrap()
                    } else {
                        t.sigmoid_bce_mean(v, &y).unwrap()
                    }
                },
                &z,
            );
            let plain = grad_of(
                |t, v| {
                    let p = if softmax { t.softmax_row(v).unwrap() } else { t.sigmoid(v) };
                    t.bce_mean(p, &y).unwrap()
                },
                &z,
            );
            assert!((fused.0 - plain.0).abs() < 1e-14, "{softmax}");
            for (a, b) in fused.1.iter().zip(&plain.1) {
                assert!((a - b).abs() < 1e-14, "{softmax}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn log_space_bce_clamps_like_probabilities() {
        let cap = -BCE_CLAMP.ln();
        // σ(40) rounds to 1, so a zero target costs the clamped −ln(1e-7).
        let (v, g) = grad_of(|t, z| t.sigmoid_bce_mean(z, &[0.0]).unwrap(), &[40.0]);
        assert!((v - cap).abs() < 1e-9);
        assert_eq!(g, vec![0.0]);
        // Saturated but correct: no clamp, tiny loss and gradient.
        let (v, g) = grad_of(|t, z| t.sigmoid_bce_mean(z, &[1.0]).unwrap(), &[12.0]);
        assert!((v - (-12.0f64).exp().ln_1p()).abs() < 1e-18);
        assert!((g[0] + 1.0 / (1.0 + 12.0f64.exp())).abs() < 1e-18);
        // A single softmax entry has weight 1: a zero target is clamped.
        let (v, g) = grad_of(|t, z| t.softmax_bce_mean(z, &[0.0]).unwrap(), &[3.0]);
        assert!((v - cap).abs() < 1e-9);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn softmax_bce_gradient_is_shift_invariant() {
        let (_, g) = grad_of(|t, z| t.softmax_bce_mean(z, &[1.0, 1.0, 0.0, 0.0]).unwrap(), &[0.5, 1.5, -2.0, 0.1]);
        assert!(g.iter().sum::<f64>().abs() < 1e-15);
    }
}
