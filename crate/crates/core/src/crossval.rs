//! K-fold partitions shared by the threshold search and the LAR model-size
//! search.

use rand::seq::SliceRandom;

use crate::error::{param, Result};
use crate::rng::stream;

/// Held-out row indices for each of `k` folds. Rows are shuffled with a
/// seeded permutation; fold sizes differ by at most one.
pub fn kfold_partition(m: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return param(format!("need at least 2 folds, got {k}"));
    }
    if m < k {
        return param(format!("{m} observations cannot fill {k} folds"));
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut stream(seed, 0));
    let mut folds = vec![Vec::with_capacity(m / k + 1); k];
    for (pos, row) in order.into_iter().enumerate() {
        folds[pos % k].push(row);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Rows not in `held_out`, in increasing order.
pub fn complement(m: usize, held_out: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; m];
    for &i in held_out {
        mask[i] = false;
    }
    (0..m).filter(|&i| mask[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn folds_cover_rows_once_with_balanced_sizes() {
        let folds = kfold_partition(23, 5, 9).unwrap();
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        assert_eq!(folds, kfold_partition(23, 5, 9).unwrap());
        assert_ne!(folds, kfold_partition(23, 5, 10).unwrap());
    }

    #[test]
    fn too_few_rows_is_an_error() {
        assert!(kfold_partition(3, 5, 0).is_err());
        assert!(kfold_partition(10, 1, 0).is_err());
        assert_eq!(complement(5, &[1, 3]), vec![0, 2, 4]);
    }
}
