use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::GraphError;

/// Splits `0..labels.len()` into `k` disjoint folds with per-class counts as
/// even as possible (each fold gets ⌊n_c/k⌋ or ⌈n_c/k⌉ members of class c).
///
/// Members of each class are shuffled with `seed` and then dealt round-robin;
/// the dealing position carries over between classes so fold sizes also stay
/// balanced. Each returned fold is sorted ascending.
pub fn stratified_kfold(
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, GraphError> {
    if k < 2 {
        return Err(GraphError::InvalidFoldCount(k));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &label) in labels.iter().enumerate() {
        by_class.entry(label).or_default().push(i);
    }
    if let Some((&class, members)) = by_class.iter().find(|(_, m)| m.len() < k) {
        return Err(GraphError::ClassTooSmall {
            class,
            count: members.len(),
            k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut position = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[position % k].push(i);
            position += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}
