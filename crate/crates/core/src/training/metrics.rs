use serde::{Deserialize, Serialize};

/// Classification quality. Binary tasks report precision/recall/F1 for
/// class 1; multi-class tasks report macro averages. 0/0 counts as 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

impl Metrics {
    /// # Panics
    /// If lengths differ or a class index is `>= n_classes`.
    pub fn from_predictions(predicted: &[usize], labels: &[usize], n_classes: usize) -> Self {
        assert_eq!(
            predicted.len(),
            labels.len(),
            "prediction/label count mismatch"
        );
        let mut confusion = vec![vec![0usize; n_classes]; n_classes];
        for (&p, &y) in predicted.iter().zip(labels) {
            confusion[y][p] += 1;
        }
        let correct: usize = (0..n_classes).map(|c| confusion[c][c]).sum();
        let per_class = |c: usize| {
            let tp = confusion[c][c];
            let predicted_c: usize = (0..n_classes).map(|y| confusion[y][c]).sum();
            let actual_c: usize = confusion[c].iter().sum();
            (ratio(tp, predicted_c), ratio(tp, actual_c))
        };
        let (precision, recall, f1) = if n_classes == 2 {
            let (p, r) = per_class(1);
            (p, r, f1(p, r))
        } else {
            let k = n_classes.max(1) as f64;
            let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
            for c in 0..n_classes {
                let (p, r) = per_class(c);
                sp += p;
                sr += r;
                sf += f1(p, r);
            }
            (sp / k, sr / k, sf / k)
        };
        Self {
            accuracy: ratio(correct, labels.len()),
            precision,
            recall,
            f1,
            confusion,
        }
    }
}

/// Mean and population standard deviation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            mean,
            std: var.sqrt(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_example() {
        let m = Metrics::from_predictions(&[1, 1, 1, 0, 0], &[1, 1, 0, 1, 0], 2);
        assert!((m.accuracy - 0.6).abs() < 1e-9);
        assert!((m.precision - 2.0 / 3.0).abs() < 1e-9);
        assert!((m.f1 - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(m.confusion, vec![vec![1, 1], vec![1, 2]]);
    }

    #[test]
    fn perfect_predictions() {
        let m = Metrics::from_predictions(&[0, 1, 1, 0], &[0, 1, 1, 0], 2);
        assert_eq!(
            (m.accuracy, m.precision, m.recall, m.f1),
            (1.0, 1.0, 1.0, 1.0)
        );
        let m = Metrics::from_predictions(&[0, 1, 2], &[0, 1, 2], 3);
        assert_eq!((m.accuracy, m.precision, m.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn degenerate_zero_over_zero() {
        let m = Metrics::from_predictions(&[1, 1, 1], &[0, 0, 0], 2);
        assert_eq!((m.accuracy, m.precision, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn identities_hold() {
        let pred = [0, 1, 1, 0, 1, 0, 0, 1];
        let lab = [0, 1, 0, 0, 1, 1, 0, 1];
        let m = Metrics::from_predictions(&pred, &lab, 2);
        let (p, r) = (m.precision, m.recall);
        assert_eq!(m.f1, 2.0 * p * r / (p + r));
        let tp = m.confusion[1][1];
        let tn = m.confusion[0][0];
        assert_eq!(m.accuracy, (tp + tn) as f64 / 8.0);
    }

    #[test]
    fn mean_std() {
        let s = MeanStd::of(&[1.0, 3.0]);
        assert_eq!((s.mean, s.std), (2.0, 1.0));
    }
}
