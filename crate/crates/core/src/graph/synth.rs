//! Synthetic paired structural/functional cohorts with planted class signal.
//!
//! Structural graphs are modular random graphs. Functional graphs are a
//! smooth function of the structure (a rescaled matrix exponential, i.e.
//! communicability under diffusion), plus a class-specific boost on the edges
//! among that class's planted nodes, plus Gaussian noise.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{BrainGraph, Dataset, GraphError, SubjectRecord};
use crate::autodiff::Matrix;

/// Largest off-diagonal functional magnitude after rescaling.
const FUNCTIONAL_PEAK: f64 = 0.8;
const STRUCTURAL_WEIGHT_RANGE: (f64, f64) = (0.3, 1.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub n_subjects: usize,
    pub n_nodes: usize,
    pub n_classes: usize,
    pub n_modules: usize,
    /// Edge probability within a module.
    pub p_in: f64,
    /// Edge probability between modules.
    pub p_out: f64,
    /// Diffusion time `t` in `exp(t·A)`.
    pub diffusion_time: f64,
    /// Planted nodes per class.
    pub planted_size: usize,
    /// Functional boost on edges among the subject's class's planted nodes.
    pub delta: f64,
    /// Standard deviation of the functional edge noise.
    pub noise: f64,
    /// Structural edge probability among the subject's class's planted
    /// nodes. `None` leaves the structure class-independent.
    pub planted_edge_prob: Option<f64>,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_subjects: 100,
            n_nodes: 32,
            n_classes: 2,
            n_modules: 4,
            p_in: 0.5,
            p_out: 0.05,
            diffusion_time: 0.5,
            planted_size: 5,
            delta: 0.4,
            noise: 0.05,
            planted_edge_prob: Some(0.6),
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn check(&self) -> Result<(), GraphError> {
        let bad = |msg: String| Err(GraphError::InvalidParams(msg));
        if self.n_nodes == 0 {
            return bad("n_nodes must be positive".into());
        }
        if self.n_classes == 0 {
            return bad("n_classes must be positive".into());
        }
        if self.n_subjects < self.n_classes {
            return bad(format!(
                "{} subjects cannot cover {} classes",
                self.n_subjects, self.n_classes
            ));
        }
        if self.n_modules == 0 || self.n_modules > self.n_nodes {
            return bad(format!("n_modules must be in 1..={}", self.n_nodes));
        }
        if self.planted_size * self.n_classes > self.n_nodes {
            return bad(format!(
                "planted sets need {}·{} nodes but only {} exist",
                self.planted_size, self.n_classes, self.n_nodes
            ));
        }
        let probs = [Some(self.p_in), Some(self.p_out), self.planted_edge_prob];
        if probs.iter().flatten().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("probabilities must lie in [0, 1]".into());
        }
        if !(self.diffusion_time.is_finite() && self.diffusion_time >= 0.0) {
            return bad("diffusion_time must be finite and >= 0".into());
        }
        if !self.delta.is_finite() || !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad("delta must be finite and noise finite and >= 0".into());
        }
        Ok(())
    }

    fn module_of(&self, node: usize) -> usize {
        node * self.n_modules / self.n_nodes
    }
}

/// Rescaled communicability `exp(t·A)` with zero diagonal, peak magnitude
/// [`FUNCTIONAL_PEAK`] and entries clipped to `[-1, 1]`.
pub(crate) fn communicability(structural: &Matrix, t: f64) -> Matrix {
    let n = structural.rows();
    let a = DMatrix::from_row_slice(n, n, structural.as_slice()) * t;
    let e = a.exp();
    let mut out = Matrix::from_fn(
        n,
        n,
        |i, j| if i == j { 0.0 } else { e[(i.min(j), i.max(j))] },
    );
    let peak = out.max_abs();
    if peak > 0.0 {
        out.scale_assign(FUNCTIONAL_PEAK / peak);
    }
    out.map(|v| v.clamp(-1.0, 1.0))
}

/// Deterministic in `params` (including the seed).
pub fn generate_synthetic(params: &SynthParams) -> Result<Dataset, GraphError> {
    params.check()?;
    let n = params.n_nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let planted: Vec<Vec<usize>> = (0..params.n_classes)
        .map(|c| {
            let mut set = order[c * params.planted_size..(c + 1) * params.planted_size].to_vec();
            set.sort_unstable();
            set
        })
        .collect();
    let mut in_set = vec![vec![false; n]; params.n_classes];
    for (c, set) in planted.iter().enumerate() {
        for &v in set {
            in_set[c][v] = true;
        }
    }

    let noise =
        (params.noise > 0.0).then(|| Normal::new(0.0, params.noise).expect("noise checked"));
    let (w_lo, w_hi) = STRUCTURAL_WEIGHT_RANGE;
    let width = (params.n_subjects.max(1) - 1).to_string().len().max(4);
    let mut subjects = Vec::with_capacity(params.n_subjects);
    for s in 0..params.n_subjects {
        let label = s % params.n_classes;
        let planted_pair = |i: usize, j: usize| in_set[label][i] && in_set[label][j];

        let mut structural = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let p = match params.planted_edge_prob {
                    Some(p) if planted_pair(i, j) => p,
                    _ if params.module_of(i) == params.module_of(j) => params.p_in,
                    _ => params.p_out,
                };
                if rng.random::<f64>() < p {
                    let w = rng.random_range(w_lo..w_hi);
                    structural[(i, j)] = w;
                    structural[(j, i)] = w;
                }
            }
        }

        let mut functional = communicability(&structural, params.diffusion_time);
        for i in 0..n {
            for j in i + 1..n {
                let mut v = functional[(i, j)];
                if planted_pair(i, j) {
                    v += params.delta;
                }
                if let Some(dist) = &noise {
                    v += dist.sample(&mut rng);
                }
                let v = v.clamp(-1.0, 1.0);
                functional[(i, j)] = v;
                functional[(j, i)] = v;
            }
        }

        subjects.push(SubjectRecord {
            subject_id: format!("{s:0width$}"),
            structural: BrainGraph::new(structural)?,
            functional: BrainGraph::new(functional)?,
            label,
        });
    }
    Dataset::new(subjects, params.n_classes)?.with_planted(planted)
}
