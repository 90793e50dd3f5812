use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Indices of a month-stratified train/test partition.
///
/// Each month stratum is shuffled and `round(train_frac * n)` members go to
/// training, clamped so that strata of two or more trips contribute to both
/// sides. A lone trip goes to training. Both index lists are ascending.
pub fn stratified_indices(
    months: &[u32],
    train_frac: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train fraction {train_frac} outside (0, 1)"
        )));
    }
    let mut strata: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &m) in months.iter().enumerate() {
        strata.entry(m).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in strata.values_mut() {
        members.shuffle(&mut rng);
        let n = members.len();
        let n_train = if n < 2 {
            n
        } else {
            ((train_frac * n as f64).round() as usize).clamp(1, n - 1)
        };
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}
