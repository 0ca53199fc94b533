//! Distance-based difficulty scoring and the sampling curriculum.
//!
//! Difficulty of a sample is its cosine distance to its own class center,
//! divided by the sum of its cosine distances to every class center. Each
//! epoch the training set is sorted easiest-first and every position `i` is
//! kept independently with probability `a_i`, where `a` runs linearly from
//! `1 - k/R` (easiest) to `k/R` (hardest) at epoch `k` of `R`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::cosine_distance;

/// Retries before the empty-draw fallback kicks in.
pub const EMPTY_DRAW_RETRIES: usize = 16;

/// Per-label mean representation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassCenters {
    centers: BTreeMap<usize, Vec<f64>>,
    counts: BTreeMap<usize, usize>,
}

impl ClassCenters {
    pub fn from_parts(centers: BTreeMap<usize, Vec<f64>>, counts: BTreeMap<usize, usize>) -> Self {
        Self { centers, counts }
    }

    pub fn get(&self, label: usize) -> Option<&[f64]> {
        self.centers.get(&label).map(Vec::as_slice)
    }

    pub fn count(&self, label: usize) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = usize> + '_ {
        self.centers.keys().copied()
    }

    /// `(label, center)` in ascending label order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.centers.iter().map(|(l, c)| (*l, c.as_slice()))
    }

    pub fn dim(&self) -> Option<usize> {
        self.centers.values().next().map(Vec::len)
    }
}

pub fn class_centers<V: AsRef<[f64]>>(reps: &[V], labels: &[usize]) -> Result<ClassCenters> {
    if reps.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: reps.len(),
            got: labels.len(),
        });
    }
    let dim = reps
        .first()
        .ok_or_else(|| Error::EmptyInput("representations for class centers".into()))?
        .as_ref()
        .len();
    let mut sums: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for (rep, &label) in reps.iter().zip(labels) {
        let rep = rep.as_ref();
        if rep.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: rep.len(),
            });
        }
        let sum = sums.entry(label).or_insert_with(|| vec![0.0; dim]);
        for (s, x) in sum.iter_mut().zip(rep) {
            *s += x;
        }
        *counts.entry(label).or_insert(0) += 1;
    }
    for (label, sum) in sums.iter_mut() {
        let n = counts[label] as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    Ok(ClassCenters {
        centers: sums,
        counts,
    })
}

/// `dis(z, C_y) / Σ_j dis(z, C_j)` with cosine distance, over all centers present.
pub fn difficulty(z: &[f64], label: usize, centers: &ClassCenters) -> Result<f64> {
    if centers.len() < 2 {
        return Err(Error::DegenerateGeometry(format!(
            "difficulty needs at least 2 class centers, have {}",
            centers.len()
        )));
    }
    let own_center = centers.get(label).ok_or(Error::MissingCenter(label))?;
    let own = cosine_distance(z, own_center)?;
    let mut total = 0.0;
    for (_, c) in centers.iter() {
        total += cosine_distance(z, c)?;
    }
    if total <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "sample coincides in direction with every class center".into(),
        ));
    }
    Ok((own / total).clamp(0.0, 1.0))
}

pub fn difficulties<V: AsRef<[f64]>>(reps: &[V], labels: &[usize], centers: &ClassCenters) -> Result<Vec<f64>> {
    if reps.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: reps.len(),
            got: labels.len(),
        });
    }
    reps.iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (z, &y))| difficulty(z.as_ref(), y, centers).map_err(|e| e.context(format!("sample {i}"))))
        .collect()
}

/// Stable ascending order of a precomputed difficulty vector.
pub fn order_by_difficulty(dif: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dif.len()).collect();
    order.sort_by(|&a, &b| dif[a].total_cmp(&dif[b]));
    order
}

/// Sample indices sorted easiest first; ties keep their original order.
pub fn rank_by_difficulty<V: AsRef<[f64]>>(
    reps: &[V],
    labels: &[usize],
    centers: &ClassCenters,
) -> Result<Vec<usize>> {
    Ok(order_by_difficulty(&difficulties(reps, labels, centers)?))
}

/// Keep probabilities for one epoch, indexed by sorted position.
#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumSchedule {
    pub epoch: usize,
    pub total_epochs: usize,
    pub keep_probabilities: Vec<f64>,
}

impl CurriculumSchedule {
    pub fn len(&self) -> usize {
        self.keep_probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keep_probabilities.is_empty()
    }

    pub fn expected_size(&self) -> f64 {
        self.keep_probabilities.iter().sum()
    }
}

/// Arithmetic progression from `1 - k/R` down (or up) to `k/R` over `size`
/// positions.
pub fn epoch_keep_probabilities(epoch: usize, total_epochs: usize, size: usize) -> Result<CurriculumSchedule> {
    if size < 2 {
        return Err(Error::Config(format!(
            "curriculum needs at least 2 samples, got {size}"
        )));
    }
    if total_epochs == 0 {
        return Err(Error::Config("total epochs must be at least 1".into()));
    }
    if epoch > total_epochs {
        return Err(Error::Config(format!(
            "epoch {epoch} beyond total epochs {total_epochs}"
        )));
    }
    let progress = epoch as f64 / total_epochs as f64;
    let first = 1.0 - progress;
    let last = progress;
    let step = (last - first) / (size - 1) as f64;
    let keep_probabilities = (0..size)
        .map(|i| (first + i as f64 * step).clamp(0.0, 1.0))
        .collect();
    Ok(CurriculumSchedule {
        epoch,
        total_epochs,
        keep_probabilities,
    })
}

/// Independent Bernoulli draw per sorted position. Returns the kept dataset
/// indices in sorted (easiest first) order.
///
/// An all-zero draw is retried [`EMPTY_DRAW_RETRIES`] times; after that the
/// single position with the highest keep probability is returned.
pub fn sample_epoch_subset<R: Rng + ?Sized>(
    sorted_indices: &[usize],
    schedule: &CurriculumSchedule,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if sorted_indices.len() != schedule.len() {
        return Err(Error::DimensionMismatch {
            expected: schedule.len(),
            got: sorted_indices.len(),
        });
    }
    for _ in 0..=EMPTY_DRAW_RETRIES {
        let subset: Vec<usize> = sorted_indices
            .iter()
            .zip(&schedule.keep_probabilities)
            .filter(|(_, &p)| rng.random::<f64>() < p)
            .map(|(&idx, _)| idx)
            .collect();
        if !subset.is_empty() {
            return Ok(subset);
        }
    }
    let best = schedule
        .keep_probabilities
        .iter()
        .enumerate()
        .fold(0, |best, (i, &p)| {
            if p > schedule.keep_probabilities[best] {
                i
            } else {
                best
            }
        });
    Ok(vec![sorted_indices[best]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_at(angle: f64) -> Vec<f64> {
        vec![angle.cos(), angle.sin()]
    }

    #[test]
    fn centers_examples() {
        let reps = vec![vec![1.0, 2.0], vec![-3.0, 0.5]];
        let c = class_centers(&reps, &[4, 1]).unwrap();
        assert_eq!(c.get(4).unwrap(), &[1.0, 2.0]);
        assert_eq!(c.get(1).unwrap(), &[-3.0, 0.5]);

        let c = class_centers(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0, 0]).unwrap();
        assert_eq!(c.get(0).unwrap(), &[0.5, 0.5]);
        assert_eq!(c.count(0), 2);
        assert!(class_centers::<Vec<f64>>(&[], &[]).is_err());
    }

    #[test]
    fn centers_match_naive_accumulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let reps: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..50).map(|_| rng.random_range(0..3)).collect();
        let centers = class_centers(&reps, &labels).unwrap();
        for label in 0..3 {
            let members: Vec<&Vec<f64>> = reps.iter().zip(&labels).filter(|(_, &l)| l == label).map(|(r, _)| r).collect();
            for k in 0..4 {
                let naive = members.iter().map(|r| r[k]).sum::<f64>() / members.len() as f64;
                assert!((centers.get(label).unwrap()[k] - naive).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn difficulty_examples() {
        let centers = class_centers(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0, 1]).unwrap();
        assert_eq!(difficulty(&[2.0, 0.0], 0, &centers).unwrap(), 0.0);
        let d = difficulty(&[1.0, 1.0], 0, &centers).unwrap();
        assert!((d - 0.5).abs() < 1e-15);

        // cos 0.8, 0.4, -0.2 against z = e_1 -> distances 0.2, 0.6, 1.2
        let z = [1.0, 0.0];
        let reps = vec![unit_at(0.8f64.acos()), unit_at(-(0.4f64.acos())), unit_at((-0.2f64).acos())];
        let centers = class_centers(&reps, &[0, 1, 2]).unwrap();
        let d = difficulty(&z, 0, &centers).unwrap();
        assert!((d - 0.1).abs() < 1e-12, "{d}");
    }

    #[test]
    fn difficulty_errors() {
        let one = class_centers(&[vec![1.0, 0.0]], &[0]).unwrap();
        assert!(matches!(difficulty(&[1.0, 0.0], 0, &one), Err(Error::DegenerateGeometry(_))));
        let two = class_centers(&[vec![1.0, 0.0], vec![2.0, 0.0]], &[0, 1]).unwrap();
        assert!(matches!(difficulty(&[1.0, 0.0], 0, &two), Err(Error::DegenerateGeometry(_))));
        assert!(matches!(difficulty(&[1.0, 0.0], 5, &two), Err(Error::MissingCenter(5))));
    }

    #[test]
    fn ranking_examples() {
        let centers = class_centers(&[vec![1.0, 0.0], vec![0.0, 1.0]], &[0, 1]).unwrap();
        let reps = vec![vec![1.0, 0.0], vec![0.0, 3.0], vec![5.0, 0.0]];
        assert_eq!(rank_by_difficulty(&reps, &[0, 1, 0], &centers).unwrap(), vec![0, 1, 2]);
        assert_eq!(order_by_difficulty(&[0.7, 0.2]), vec![1, 0]);
    }

    #[test]
    fn ranking_agrees_with_independent_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(100);
        let reps: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..100).map(|i| i % 3).collect();
        let centers = class_centers(&reps, &labels).unwrap();
        let order = rank_by_difficulty(&reps, &labels, &centers).unwrap();

        let cos = |a: &[f64], b: &[f64]| {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            d / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
        };
        let mut scored: Vec<(f64, usize)> = (0..100)
            .map(|i| {
                let dists: Vec<f64> = (0..3).map(|c| 1.0 - cos(&reps[i], centers.get(c).unwrap())).collect();
                (dists[labels[i]] / dists.iter().sum::<f64>(), i)
            })
            .collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let oracle: Vec<usize> = scored.into_iter().map(|(_, i)| i).collect();
        assert_eq!(order, oracle);
    }

    #[test]
    fn schedule_endpoints() {
        let s = epoch_keep_probabilities(0, 10, 5).unwrap();
        assert_eq!(s.keep_probabilities, vec![1.0, 0.75, 0.5, 0.25, 0.0]);
        let s = epoch_keep_probabilities(10, 10, 5).unwrap();
        assert_eq!(s.keep_probabilities, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let s = epoch_keep_probabilities(5, 10, 7).unwrap();
        assert!(s.keep_probabilities.iter().all(|&p| p == 0.5));
        assert!(epoch_keep_probabilities(0, 10, 1).is_err());
        assert!(epoch_keep_probabilities(11, 10, 4).is_err());
        assert!(epoch_keep_probabilities(0, 0, 4).is_err());
    }

    #[test]
    fn subset_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sorted = vec![3, 0, 2, 1];
        let all = CurriculumSchedule {
            epoch: 0,
            total_epochs: 1,
            keep_probabilities: vec![1.0; 4],
        };
        assert_eq!(sample_epoch_subset(&sorted, &all, &mut rng).unwrap(), sorted);
        let none = CurriculumSchedule {
            epoch: 0,
            total_epochs: 1,
            keep_probabilities: vec![0.0; 4],
        };
        assert_eq!(sample_epoch_subset(&sorted, &none, &mut rng).unwrap(), vec![3]);
        assert!(sample_epoch_subset(&sorted[..3], &none, &mut rng).is_err());
    }

    #[test]
    fn half_way_subset_size_is_binomial() {
        let size = 1000;
        let sched = epoch_keep_probabilities(5, 10, size).unwrap();
        let sorted: Vec<usize> = (0..size).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let draws = 1000;
        let mean = (0..draws)
            .map(|_| sample_epoch_subset(&sorted, &sched, &mut rng).unwrap().len() as f64)
            .sum::<f64>()
            / draws as f64;
        // expected band: 500 ± 3·sqrt(1000 · 0.25)
        assert!((mean - 500.0).abs() <= 3.0 * (1000.0f64 * 0.25).sqrt(), "{mean}");
    }

    proptest! {
        #[test]
        fn schedule_is_arithmetic_with_mean_half(k in 0usize..20, extra in 0usize..20, size in 2usize..300) {
            let r = k.max(1) + extra;
            let s = epoch_keep_probabilities(k.min(r), r, size).unwrap();
            prop_assert!((s.expected_size() - size as f64 / 2.0).abs() <= 1e-9);
            let diffs: Vec<f64> = s.keep_probabilities.windows(2).map(|w| w[1] - w[0]).collect();
            for d in &diffs {
                prop_assert!((d - diffs[0]).abs() <= 1e-12);
            }
            prop_assert!(s.keep_probabilities.iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn difficulty_in_unit_interval(z in prop::collection::vec(-1.0f64..1.0, 3), pts in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 2..6)) {
            let labels: Vec<usize> = (0..pts.len()).collect();
            prop_assume!(pts.iter().all(|p| crate::numerics::norm(p) > 1e-3));
            prop_assume!(crate::numerics::norm(&z) > 1e-3);
            let centers = class_centers(&pts, &labels).unwrap();
            if let Ok(d) = difficulty(&z, 0, &centers) {
                prop_assert!((0.0..=1.0).contains(&d));
            }
        }
    }
}
