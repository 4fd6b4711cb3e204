use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Spearman rank correlation. `None` with fewer than two pairs or when
/// either side is constant.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "spearman needs paired samples");
    if a.len() < 2 {
        return None;
    }
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Rank agreement between predicted and observed functional connectivity,
/// pooled over all unordered node pairs of all subjects.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionStats {
    pub overall: f64,
    /// Pairs with a structural edge; `None` when undefined.
    pub direct: Option<f64>,
    /// Pairs without a structural edge.
    pub indirect: Option<f64>,
    pub n_pairs: usize,
    pub n_direct: usize,
    pub n_indirect: usize,
}

impl ReconstructionStats {
    /// `predicted`, `target` and `structural` are per-subject N×N matrices.
    pub fn compute(predicted: &[Matrix], target: &[Matrix], structural: &[Matrix]) -> Result<Self> {
        if predicted.len() != target.len() || predicted.len() != structural.len() {
            return Err(Error::Config(
                "reconstruction stats need one matrix of each kind per subject".into(),
            ));
        }
        let (mut all, mut direct, mut indirect) =
            ((vec![], vec![]), (vec![], vec![]), (vec![], vec![]));
        for ((p, t), s) in predicted.iter().zip(target).zip(structural) {
            if p.shape() != t.shape() || p.shape() != s.shape() || !p.is_square() {
                return Err(Error::Config(
                    "reconstruction matrices must share one square shape".into(),
                ));
            }
            let n = p.rows();
            for i in 0..n {
                for j in i + 1..n {
                    let (pv, tv) = (p[(i, j)], t[(i, j)]);
                    all.0.push(pv);
                    all.1.push(tv);
                    let bucket = if s[(i, j)] > 0.0 {
                        &mut direct
                    } else {
                        &mut indirect
                    };
                    bucket.0.push(pv);
                    bucket.1.push(tv);
                }
            }
        }
        if all.0.len() < 2 {
            return Err(Error::Config(format!(
                "reconstruction stats need at least 2 node pairs, got {}",
                all.0.len()
            )));
        }
        let overall = spearman(&all.0, &all.1).ok_or_else(|| {
            Error::Config("rank correlation undefined: constant predictions or targets".into())
        })?;
        Ok(Self {
            overall,
            direct: spearman(&direct.0, &direct.1),
            indirect: spearman(&indirect.0, &indirect.1),
            n_pairs: all.0.len(),
            n_direct: direct.0.len(),
            n_indirect: indirect.0.len(),
        })
    }
}
