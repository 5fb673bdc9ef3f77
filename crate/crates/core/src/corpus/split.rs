use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng;

/// Train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Fractions {
    pub const STANDARD: Fractions = Fractions {
        train: 0.7,
        val: 0.1,
        test: 0.2,
    };

    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = Fractions { train, val, test };
        if !(train > 0.0 && val > 0.0 && test > 0.0) {
            return Err(Error::invalid(format!("split fractions must be positive: {f:?}")));
        }
        if ((train + val + test) - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("split fractions must sum to 1: {f:?}")));
        }
        Ok(f)
    }

    /// Part sizes for `n` items: train and validation are floored, test takes the rest.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let floor = |f: f64| ((n as f64) * f + 1e-9).floor() as usize;
        let train = floor(self.train).min(n);
        let val = floor(self.val).min(n - train);
        (train, val, n - train - val)
    }
}

/// Seeded partition into train, validation and test parts.
///
/// With `stratified`, one instance of every label having at least three
/// instances is reserved for each part before the remaining quota is filled in
/// shuffled order. When the quotas are too small to hold every such label the
/// split falls back to a plain random partition.
pub fn split(
    ds: &Dataset,
    fractions: Fractions,
    seed: u64,
    stratified: bool,
) -> Result<(Dataset, Dataset, Dataset)> {
    let fractions = Fractions::new(fractions.train, fractions.val, fractions.test)?;
    let n = ds.len();
    let (n_train, n_val, _) = fractions.sizes(n);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::seeded(seed));

    let mut part = vec![usize::MAX; n];
    let mut filled = [0usize; 3];
    let quota = [n_train, n_val, n - n_train - n_val];

    if stratified {
        let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for &i in &order {
            by_label.entry(ds.instances[i].relation.as_str()).or_default().push(i);
        }
        let (eligible, sparse): (Vec<_>, Vec<_>) =
            by_label.iter().partition(|(_, members)| members.len() >= 3);
        if !sparse.is_empty() {
            let names: Vec<&str> = sparse.iter().map(|(l, _)| **l).collect();
            warn!("labels with fewer than 3 instances cannot be stratified: {names:?}");
        }
        if quota.iter().all(|&q| q >= eligible.len()) {
            for (_, members) in &eligible {
                // val and test first: they have the smallest quotas
                for (slot, &i) in [1usize, 2, 0].iter().zip(members.iter()) {
                    part[i] = *slot;
                    filled[*slot] += 1;
                }
            }
        } else {
            warn!(
                "stratified split impossible: {} labels but part quotas {quota:?}; using plain random split",
                eligible.len()
            );
        }
    }

    let mut slot = 0;
    for &i in &order {
        if part[i] != usize::MAX {
            continue;
        }
        while filled[slot] >= quota[slot] {
            slot += 1;
        }
        part[i] = slot;
        filled[slot] += 1;
    }

    let mut parts: [Vec<_>; 3] = Default::default();
    for &i in &order {
        parts[part[i]].push(ds.instances[i].clone());
    }
    let [train, val, test] = parts;
    Ok((
        Dataset::from_instances(train),
        Dataset::from_instances(val),
        Dataset::from_instances(test),
    ))
}

/// Training sizes `round(n * 2^-i)` for `i = 9, 8, ..., 0`.
pub fn doubling_schedule(n_train: usize) -> Result<Vec<usize>> {
    if n_train < 512 {
        return Err(Error::invalid(format!(
            "doubling schedule needs at least 512 training instances, got {n_train}"
        )));
    }
    let sizes: Vec<usize> = (0..=9)
        .rev()
        .map(|i| ((n_train as f64) / f64::from(1u32 << i)).round() as usize)
        .collect();
    debug_assert!(sizes.windows(2).all(|w| w[0] < w[1]));
    Ok(sizes)
}
