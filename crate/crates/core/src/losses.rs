//! Global decoding loss, first-order proximity (local) loss, supervised
//! cross-entropy and their weighted combination.

use serde::{Deserialize, Serialize};

use crate::autodiff::{self, AutodiffError, Matrix, Tensor};
use crate::error::{Error, Result};
use crate::graph::BrainGraph;

/// Per-term weights. `supervised` is 1 in the standard objective; setting it
/// to 0 trains the reconstruction branches alone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    /// μ1, weight of the global decoding loss.
    pub global: f64,
    /// μ2, weight of the local proximity loss.
    pub local: f64,
    pub supervised: f64,
    /// γ in δ(x) = [x > γ] inside the local loss.
    pub gamma: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            global: 1.0,
            local: 0.5,
            supervised: 1.0,
            gamma: 0.0,
        }
    }
}

impl LossWeights {
    pub fn check(&self) -> Result<()> {
        let all = [self.global, self.local, self.supervised];
        if all.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || !self.gamma.is_finite() {
            return Err(Error::Config(format!(
                "loss weights must be finite and nonnegative, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn needs_decoder(&self) -> bool {
        self.global > 0.0
    }
}

/// Scalar values of each term and the weighted total.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub global: f64,
    pub local: f64,
    pub supervised: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn from_terms(global: f64, local: f64, supervised: f64, weights: &LossWeights) -> Self {
        Self {
            global,
            local,
            supervised,
            total: weights.global * global
                + weights.local * local
                + weights.supervised * supervised,
        }
    }

    pub fn add_scaled(&mut self, other: &LossBreakdown, factor: f64) {
        self.global += factor * other.global;
        self.local += factor * other.local;
        self.supervised += factor * other.supervised;
        self.total += factor * other.total;
    }
}

/// Functional target with the per-pair weights `e^{|x^f_ij|}/|E|` on the
/// strict upper triangle.
#[derive(Clone, Debug)]
pub struct GlobalTarget {
    pub target: Matrix,
    pub pair_weights: Matrix,
}

impl GlobalTarget {
    pub fn new(functional: &Matrix) -> Self {
        let n = functional.rows();
        let pairs = (n * n.saturating_sub(1) / 2).max(1) as f64;
        let pair_weights = Matrix::from_fn(n, n, |i, j| {
            if i < j {
                functional[(i, j)].abs().exp() / pairs
            } else {
                0.0
            }
        });
        Self {
            target: functional.clone(),
            pair_weights,
        }
    }
}

/// Ordered neighbor pairs `(i, j)`, `j ∈ N^d_i \ {i}`, with weight
/// `e^{δ(x_ij)}/|N^d_i|`.
#[derive(Clone, Debug)]
pub struct LocalPairs {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    /// P×1 pair weights.
    pub weights: Matrix,
}

impl LocalPairs {
    pub fn new(structural: &BrainGraph, gamma: f64) -> Self {
        let n = structural.n_nodes();
        let (mut src, mut dst, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..n {
            let row = structural.weights().row(i);
            let neighbors: Vec<usize> = (0..n).filter(|&j| j != i && row[j] != 0.0).collect();
            let inv = 1.0 / neighbors.len().max(1) as f64;
            for j in neighbors {
                let delta = if row[j] > gamma { 1.0 } else { 0.0 };
                src.push(i);
                dst.push(j);
                w.push(f64::exp(delta) * inv);
            }
        }
        Self {
            src,
            dst,
            weights: Matrix::column(&w),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

/// Weighted mean squared error of `x̂⁺ − x̂⁻` against the functional target
/// over all unordered node pairs.
pub fn global_loss<'t>(
    recon_pos: Tensor<'t>,
    recon_neg: Tensor<'t>,
    target: &GlobalTarget,
) -> autodiff::Result<Tensor<'t>> {
    let shape = recon_pos.shape();
    if shape != target.target.shape() {
        return Err(AutodiffError::ShapeMismatch {
            op: "global_loss",
            lhs: shape,
            rhs: target.target.shape(),
        });
    }
    let tape = recon_pos.tape();
    let diff = recon_pos.sub(recon_neg)?;
    diff.sq_diff(tape.constant(target.target.clone())?)?
        .mul_const(&target.pair_weights)?
        .sum()
}

/// First-order proximity loss for one branch's embeddings.
pub fn local_loss<'t>(h: Tensor<'t>, pairs: &LocalPairs) -> autodiff::Result<Tensor<'t>> {
    let tape = h.tape();
    if pairs.is_empty() {
        return tape.constant(Matrix::scalar(0.0));
    }
    let f = h.shape()[1];
    let weights = Matrix::from_fn(pairs.src.len(), f, |p, _| pairs.weights[(p, 0)]);
    h.gather_rows(&pairs.src)?
        .sq_diff(h.gather_rows(&pairs.dst)?)?
        .mul_const(&weights)?
        .sum()
}

/// Mean cross-entropy of row-wise logits (R×C) against `labels`.
pub fn supervised_loss<'t>(logits: Tensor<'t>, labels: &[usize]) -> Result<Tensor<'t>> {
    let [rows, classes] = logits.shape();
    if rows == 0 || rows != labels.len() {
        return Err(Error::Config(format!(
            "supervised loss needs one label per logit row ({rows} rows, {} labels)",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Config(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let pick = Matrix::from_fn(rows, classes, |r, c| if labels[r] == c { 1.0 } else { 0.0 });
    Ok(logits
        .log_softmax()?
        .mul_const(&pick)?
        .sum()?
        .scale(-1.0 / rows as f64)?)
}

/// Term tensors for one forward pass; absent terms count as zero.
pub struct LossTerms<'t> {
    pub global: Option<Tensor<'t>>,
    pub local: Option<Tensor<'t>>,
    pub supervised: Option<Tensor<'t>>,
}

/// Weighted total on the tape plus its numeric breakdown. Returns `None`
/// for the tensor when every term is absent.
pub fn total_loss<'t>(
    terms: &LossTerms<'t>,
    weights: &LossWeights,
) -> autodiff::Result<(Option<Tensor<'t>>, LossBreakdown)> {
    let parts = [
        (terms.global, weights.global),
        (terms.local, weights.local),
        (terms.supervised, weights.supervised),
    ];
    let mut total: Option<Tensor<'t>> = None;
    for (term, w) in parts {
        if let Some(t) = term {
            let scaled = t.scale(w)?;
            total = Some(match total {
                Some(acc) => acc.add(scaled)?,
                None => scaled,
            });
        }
    }
    let value = |t: Option<Tensor<'t>>| t.map_or(0.0, |t| t.item());
    let breakdown = LossBreakdown::from_terms(
        value(terms.global),
        value(terms.local),
        value(terms.supervised),
        weights,
    );
    Ok((total, breakdown))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use proptest::prelude::*;

    fn two_node(w: f64) -> BrainGraph {
        BrainGraph::new(Matrix::from_rows(&[[0.0, w], [w, 0.0]]).unwrap()).unwrap()
    }

    #[test]
    fn global_loss_examples() {
        let tape = Tape::new();
        let target = GlobalTarget::new(&Matrix::from_rows(&[[0.0, 0.5], [0.5, 0.0]]).unwrap());
        let pos = tape
            .constant(Matrix::from_rows(&[[0.5, 0.8], [0.8, 0.5]]).unwrap())
            .unwrap();
        let neg = tape
            .constant(Matrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap())
            .unwrap();
        let l = global_loss(pos, neg, &target).unwrap().item();
        let oracle = 0.5f64.exp() * (0.3f64 - 0.5).powi(2);
        assert!((l - oracle).abs() < 1e-9);
        assert!((l - 0.065948).abs() < 1e-6);

        let zero = GlobalTarget::new(&Matrix::zeros(2, 2));
        let half = tape.constant(Matrix::filled(2, 2, 0.5)).unwrap();
        assert_eq!(global_loss(half, half, &zero).unwrap().item(), 0.0);
    }

    #[test]
    fn perfect_reconstruction_has_zero_global_loss() {
        let f = Matrix::from_rows(&[[0.0, 0.3, -0.2], [0.3, 0.0, 0.6], [-0.2, 0.6, 0.0]]).unwrap();
        let tape = Tape::new();
        let pos = tape.constant(f.map(|v| v.max(0.0))).unwrap();
        let neg = tape.constant(f.map(|v| (-v).max(0.0))).unwrap();
        assert_eq!(
            global_loss(pos, neg, &GlobalTarget::new(&f))
                .unwrap()
                .item(),
            0.0
        );
    }

    #[test]
    fn global_loss_shape_mismatch() {
        let tape = Tape::new();
        let x = tape.constant(Matrix::zeros(3, 3)).unwrap();
        assert!(global_loss(x, x, &GlobalTarget::new(&Matrix::zeros(2, 2))).is_err());
    }

    #[test]
    fn local_loss_examples() {
        let tape = Tape::new();
        let h = tape
            .constant(Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap())
            .unwrap();
        let l = local_loss(h, &LocalPairs::new(&two_node(0.5), 0.0))
            .unwrap()
            .item();
        assert!((l - 2.0 * std::f64::consts::E).abs() < 1e-9);

        let same = tape.constant(Matrix::filled(2, 3, 0.4)).unwrap();
        assert_eq!(
            local_loss(same, &LocalPairs::new(&two_node(0.5), 0.0))
                .unwrap()
                .item(),
            0.0
        );

        let empty = BrainGraph::new(Matrix::zeros(2, 2)).unwrap();
        assert_eq!(
            local_loss(h, &LocalPairs::new(&empty, 0.0)).unwrap().item(),
            0.0
        );
    }

    #[test]
    fn subthreshold_neighbors_get_unit_weight() {
        let pairs = LocalPairs::new(&two_node(0.5), 0.7);
        assert_eq!(pairs.weights.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn supervised_loss_examples() {
        let tape = Tape::new();
        let uniform = tape.constant(Matrix::zeros(1, 2)).unwrap();
        let l = supervised_loss(uniform, &[1]).unwrap().item();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);

        let sure = tape.constant(Matrix::row_vector(&[-40.0, 40.0])).unwrap();
        assert!(supervised_loss(sure, &[1]).unwrap().item() < 1e-30);

        let a = Matrix::row_vector(&[0.3, -1.2]);
        let b = Matrix::row_vector(&[2.0, 0.5]);
        let l1 = supervised_loss(tape.constant(a.clone()).unwrap(), &[0])
            .unwrap()
            .item();
        let l2 = supervised_loss(tape.constant(b.clone()).unwrap(), &[1])
            .unwrap()
            .item();
        let both = Matrix::from_rows(&[a.row(0), b.row(0)]).unwrap();
        let mean = supervised_loss(tape.constant(both).unwrap(), &[0, 1])
            .unwrap()
            .item();
        assert!((mean - (l1 + l2) / 2.0).abs() < 1e-15);

        assert!(supervised_loss(uniform, &[2]).is_err());
    }

    #[test]
    fn total_loss_examples() {
        let tape = Tape::new();
        let c = |v: f64| Some(tape.constant(Matrix::scalar(v)).unwrap());
        let w = LossWeights::default();
        let terms = LossTerms {
            global: c(0.2),
            local: c(0.4),
            supervised: c(0.6),
        };
        let (t, b) = total_loss(&terms, &w).unwrap();
        assert!((b.total - 1.0).abs() < 1e-9);
        assert_eq!(t.unwrap().item(), b.total);

        let no_recon = LossWeights {
            global: 0.0,
            local: 0.0,
            ..w
        };
        assert_eq!(total_loss(&terms, &no_recon).unwrap().1.total, 0.6);

        let zeros = LossTerms {
            global: c(0.0),
            local: c(0.0),
            supervised: c(0.0),
        };
        assert_eq!(total_loss(&zeros, &w).unwrap().1.total, 0.0);
    }

    #[test]
    fn weights_validated() {
        assert!(LossWeights::default().check().is_ok());
        assert!(LossWeights {
            global: -1.0,
            ..Default::default()
        }
        .check()
        .is_err());
        assert!(LossWeights {
            local: f64::NAN,
            ..Default::default()
        }
        .check()
        .is_err());
    }

    proptest! {
        #[test]
        fn losses_nonnegative_and_total_linear(
            vals in proptest::collection::vec(-1.0f64..1.0, 27),
            c in 0.0f64..10.0,
        ) {
            let n = 3;
            let f = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { vals[i.min(j) * n + i.max(j)] });
            let d = Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { vals[9 + i.min(j) * n + i.max(j)].abs() });
            let h = Matrix::from_vec(n, 3, vals[18..27].to_vec());
            let tape = Tape::new();
            let pos = tape.constant(f.map(|v| (v + 1.0) / 2.0)).unwrap();
            let neg = tape.constant(f.map(|v| (1.0 - v) / 3.0)).unwrap();
            let g = global_loss(pos, neg, &GlobalTarget::new(&f)).unwrap();
            let ht = tape.constant(h).unwrap();
            let l = local_loss(ht, &LocalPairs::new(&BrainGraph::new(d).unwrap(), 0.0)).unwrap();
            let s = supervised_loss(tape.constant(Matrix::row_vector(&vals[..2])).unwrap(), &[1]).unwrap();
            prop_assert!(g.item() >= 0.0 && l.item() >= 0.0 && s.item() >= 0.0);

            let terms = LossTerms { global: Some(g), local: Some(l), supervised: Some(s) };
            let base = LossWeights::default();
            let scaled = LossWeights { global: c * base.global, ..base };
            let b1 = total_loss(&terms, &base).unwrap().1;
            let b2 = total_loss(&terms, &scaled).unwrap().1;
            let contrib = b2.total - b2.local * base.local - b2.supervised;
            prop_assert!((contrib - c * b1.global).abs() <= 1e-12 * (1.0 + contrib.abs()));
        }

        #[test]
        fn global_loss_permutation_invariant(vals in proptest::collection::vec(-1.0f64..1.0, 32), seed in 0u64..1000) {
            use rand::{seq::SliceRandom, SeedableRng};
            let n = 4;
            let sym = |off: usize| Matrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { vals[off + i.min(j) * n + i.max(j)] });
            let f = sym(0);
            let x = sym(16).map(|v| v.abs());
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let tape = Tape::new();
            let zero = tape.constant(Matrix::zeros(n, n)).unwrap();
            let a = global_loss(tape.constant(x.clone()).unwrap(), zero, &GlobalTarget::new(&f)).unwrap().item();
            let b = global_loss(
                tape.constant(x.permute_symmetric(&perm)).unwrap(),
                zero,
                &GlobalTarget::new(&f.permute_symmetric(&perm)),
            )
            .unwrap()
            .item();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}
