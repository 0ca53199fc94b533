//! Shared fixtures for the benchmarks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use spcl_core::data::{generate_cluster_splits, DatasetSplits, SplitSpec};
use spcl_core::{seeded_rng, PrototypeSet};

/// `n` gaussian representations with labels cycling through `classes`.
pub fn batch(seed: u64, n: usize, dim: usize, classes: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = seeded_rng(seed);
    let reps = (0..n)
        .map(|_| (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    let labels = (0..n).map(|i| i % classes).collect();
    (reps, labels)
}

/// One random prototype per class.
pub fn prototypes(seed: u64, dim: usize, classes: usize) -> PrototypeSet {
    let mut rng = seeded_rng(seed);
    let mut set = PrototypeSet::new();
    for c in 0..classes {
        let t: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        set.insert(c, t).expect("labels are distinct");
    }
    set
}

/// The imbalanced seven-class preset.
pub fn imbalanced(seed: u64) -> DatasetSplits {
    generate_cluster_splits(&SplitSpec::meld_imbalance(), &mut seeded_rng(seed)).expect("preset is valid")
}
