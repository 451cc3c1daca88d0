use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::DatasetError;
use crate::config::SplitConfig;

// Guards floor() against products like 0.29 * 100 = 28.999999999999996.
const FLOOR_SLACK: f64 = 1e-9;

fn floor_count(fraction: f64, n: usize) -> usize {
    ((fraction * n as f64) + FLOOR_SLACK).floor() as usize
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order
}

/// Shuffles `0..n` with `seed` and cuts it by `fractions`: every part but
/// the last gets `floor(f * n)` samples, the last one the remainder. Each
/// part is returned in ascending order.
pub fn split_indices(n: usize, fractions: &[f64], seed: u64) -> Result<Vec<Vec<usize>>, DatasetError> {
    let sum: f64 = fractions.iter().sum();
    if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0)) || (sum - 1.0).abs() > 1e-9 {
        return Err(DatasetError::BadFractions(fractions.to_vec()));
    }
    let order = permutation(n, seed);
    let mut parts = Vec::with_capacity(fractions.len());
    let mut start = 0;
    for (i, &f) in fractions.iter().enumerate() {
        let end = if i + 1 == fractions.len() { n } else { (start + floor_count(f, n)).min(n) };
        let mut part = order[start..end].to_vec();
        part.sort_unstable();
        parts.push(part);
        start = end;
    }
    Ok(parts)
}

/// Train, validation and test indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Train/test split by `config.train_fraction`, then
/// `floor(val_fraction_of_train * |train|)` training samples moved to
/// validation.
pub fn split_dataset(n: usize, config: &SplitConfig) -> Result<Split, DatasetError> {
    let tf = config.train_fraction;
    let parts = if tf == 1.0 {
        split_indices(n, &[1.0], config.seed)?
    } else {
        split_indices(n, &[tf, 1.0 - tf], config.seed)?
    };
    let train_all = parts[0].clone();
    let test = parts.get(1).cloned().unwrap_or_default();
    let vf = config.val_fraction_of_train;
    if !(0.0..1.0).contains(&vf) {
        return Err(DatasetError::BadFractions(vec![tf, vf]));
    }
    let n_val = floor_count(vf, train_all.len());
    // A second, independent shuffle picks the validation samples.
    let order = permutation(train_all.len(), config.seed ^ 0x7661_6c69_6461_7465);
    let mut is_val = vec![false; train_all.len()];
    for &i in &order[..n_val] {
        is_val[i] = true;
    }
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (pos, &idx) in train_all.iter().enumerate() {
        if is_val[pos] {
            val.push(idx);
        } else {
            train.push(idx);
        }
    }
    Ok(Split { train, val, test })
}

/// Deterministic `percent`% subset (floor) of `train`, in ascending order.
/// Subsets drawn with the same seed are nested.
pub fn subset_training(train: &[usize], percent: f64, seed: u64) -> Result<Vec<usize>, DatasetError> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(DatasetError::BadPercent(percent));
    }
    let count = floor_count(percent / 100.0, train.len());
    let order = permutation(train.len(), seed);
    let mut subset: Vec<usize> = order[..count].iter().map(|&i| train[i]).collect();
    subset.sort_unstable();
    Ok(subset)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventy_thirty_counts() {
        let parts = split_indices(6319, &[0.7, 0.3], 1).unwrap();
        assert_eq!((parts[0].len(), parts[1].len()), (4423, 1896));
    }

    #[test]
    fn one_fraction_keeps_everything() {
        let parts = split_indices(10, &[1.0], 3).unwrap();
        assert_eq!(parts, vec![(0..10).collect::<Vec<_>>()]);
    }

    #[test]
    fn rejects_bad_fractions() {
        assert!(matches!(split_indices(10, &[0.5, 0.4], 0), Err(DatasetError::BadFractions(_))));
        assert!(split_indices(10, &[1.2, -0.2], 0).is_err());
        assert!(split_indices(10, &[], 0).is_err());
    }

    #[test]
    fn partition_with_validation() {
        let split = split_dataset(6319, &SplitConfig { seed: 5, ..Default::default() }).unwrap();
        assert_eq!(split.val.len(), 442);
        assert_eq!(split.train.len() + split.val.len(), 4423);
        assert_eq!(split.test.len(), 1896);
        let mut all: Vec<usize> = split.train.iter().chain(&split.val).chain(&split.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..6319).collect::<Vec<_>>());
    }

    #[test]
    fn subset_sizes_and_nesting() {
        let train: Vec<usize> = (0..4423).map(|i| i * 2).collect();
        assert_eq!(subset_training(&train, 10.0, 9).unwrap().len(), 442);
        assert_eq!(subset_training(&train, 100.0, 9).unwrap(), train);
        let s10 = subset_training(&train, 10.0, 9).unwrap();
        let s20 = subset_training(&train, 20.0, 9).unwrap();
        let s30 = subset_training(&train, 30.0, 9).unwrap();
        assert!(s10.iter().all(|i| s20.binary_search(i).is_ok()));
        assert!(s20.iter().all(|i| s30.binary_search(i).is_ok()));
        assert!(matches!(subset_training(&train, 0.0, 0), Err(DatasetError::BadPercent(_))));
        assert!(subset_training(&train, 100.5, 0).is_err());
    }
}
