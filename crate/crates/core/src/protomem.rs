//! Per-class representation queues and sampled prototypes.
//!
//! Every class keeps a fixed-capacity FIFO of detached, unit-normalized
//! representations. At each step a support set of `K` entries is drawn
//! without replacement from each non-empty queue and averaged into a
//! temporary prototype for that class.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{check_finite, l2_normalize};

pub const DEFAULT_QUEUE_CAPACITY: usize = 128;
pub const DEFAULT_SUPPORT_SIZE: usize = 16;

/// FIFO of unit-normalized representation snapshots for one label.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassQueue {
    label: usize,
    capacity: usize,
    dim: usize,
    entries: VecDeque<Vec<f64>>,
}

impl ClassQueue {
    pub fn new(label: usize, capacity: usize, dim: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("queue capacity must be at least 1".into()));
        }
        if dim == 0 {
            return Err(Error::Config("queue dimension must be at least 1".into()));
        }
        Ok(Self {
            label,
            capacity,
            dim,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries, oldest first.
    pub fn entries(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.entries.iter().map(Vec::as_slice)
    }

    /// Normalizes and appends a copy of `rep`, evicting the oldest entry
    /// when full.
    pub fn push(&mut self, rep: &[f64]) -> Result<()> {
        if rep.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rep.len(),
            });
        }
        check_finite(rep, "queued representation")?;
        let unit = l2_normalize(rep)?;
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(unit);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }
}

/// Draws `min(k, len)` distinct entries uniformly without replacement.
pub fn sample_support_set<'q, R: Rng + ?Sized>(
    queue: &'q ClassQueue,
    k: usize,
    rng: &mut R,
) -> Result<Vec<&'q [f64]>> {
    if k == 0 {
        return Err(Error::Config("support size must be at least 1".into()));
    }
    if queue.is_empty() {
        return Err(Error::EmptyQueue(queue.label));
    }
    let amount = k.min(queue.len());
    Ok(index::sample(rng, queue.len(), amount)
        .into_iter()
        .map(|i| queue.entries[i].as_slice())
        .collect())
}

/// Element-wise mean of the support set. The mean is not re-normalized.
pub fn compute_prototype<V: AsRef<[f64]>>(support: &[V]) -> Result<Vec<f64>> {
    let first = support
        .first()
        .ok_or_else(|| Error::EmptyInput("support set".into()))?
        .as_ref();
    let mut sum = vec![0.0; first.len()];
    for v in support {
        let v = v.as_ref();
        if v.len() != sum.len() {
            return Err(Error::DimensionMismatch {
                expected: sum.len(),
                got: v.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let k = support.len() as f64;
    sum.iter_mut().for_each(|s| *s /= k);
    Ok(sum)
}

/// One prototype per label. Labels whose queue was empty are absent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrototypeSet {
    prototypes: BTreeMap<usize, Vec<f64>>,
}

impl PrototypeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a prototype, rejecting non-finite or zero-norm vectors.
    pub fn insert(&mut self, label: usize, prototype: Vec<f64>) -> Result<()> {
        check_finite(&prototype, "prototype")?;
        l2_normalize(&prototype)?;
        if let Some(dim) = self.dim() {
            if dim != prototype.len() {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: prototype.len(),
                });
            }
        }
        self.prototypes.insert(label, prototype);
        Ok(())
    }

    pub fn get(&self, label: usize) -> Option<&[f64]> {
        self.prototypes.get(&label).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.prototypes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prototypes.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.prototypes.values().next().map(Vec::len)
    }

    /// `(label, prototype)` pairs in ascending label order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &[f64])> {
        self.prototypes.iter().map(|(l, p)| (*l, p.as_slice()))
    }
}

/// The per-class queues of one training run, keyed by label.
#[derive(Debug, Clone)]
pub struct QueueBank {
    queues: BTreeMap<usize, ClassQueue>,
    capacity: usize,
    dim: usize,
}

impl QueueBank {
    pub fn new(capacity: usize, dim: usize) -> Result<Self> {
        // validates the arguments once up front
        ClassQueue::new(0, capacity, dim)?;
        Ok(Self {
            queues: BTreeMap::new(),
            capacity,
            dim,
        })
    }

    pub fn push(&mut self, label: usize, rep: &[f64]) -> Result<()> {
        let (capacity, dim) = (self.capacity, self.dim);
        match self.queues.entry(label) {
            std::collections::btree_map::Entry::Occupied(mut e) => e.get_mut().push(rep),
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(ClassQueue::new(label, capacity, dim)?).push(rep)
            }
        }
    }

    pub fn get(&self, label: usize) -> Option<&ClassQueue> {
        self.queues.get(&label)
    }

    pub fn queues(&self) -> &BTreeMap<usize, ClassQueue> {
        &self.queues
    }

    pub fn clear(&mut self) {
        self.queues.values_mut().for_each(ClassQueue::clear);
    }

    pub fn prototypes<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<PrototypeSet> {
        prototypes_for_all(&self.queues, k, rng)
    }
}

/// Samples a support set from every non-empty queue (ascending label order,
/// so a seeded `rng` gives a reproducible result) and averages it. Empty
/// queues, and supports whose mean is exactly zero, are skipped.
pub fn prototypes_for_all<R: Rng + ?Sized>(
    queues: &BTreeMap<usize, ClassQueue>,
    k: usize,
    rng: &mut R,
) -> Result<PrototypeSet> {
    if k == 0 {
        return Err(Error::Config("support size must be at least 1".into()));
    }
    let mut set = PrototypeSet::new();
    for (&label, queue) in queues {
        if queue.is_empty() {
            continue;
        }
        let support = sample_support_set(queue, k, rng)?;
        match set.insert(label, compute_prototype(&support)?) {
            // antipodal supports can cancel exactly; such a class gets no prototype this step
            Err(Error::DegenerateInput(_)) => {}
            other => other?,
        }
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn entries(q: &ClassQueue) -> Vec<Vec<f64>> {
        q.entries().map(<[f64]>::to_vec).collect()
    }

    #[test]
    fn push_below_capacity_and_evict() {
        let (a, b, c) = (vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0]);
        let mut q = ClassQueue::new(0, 2, 2).unwrap();
        q.push(&a).unwrap();
        q.push(&b).unwrap();
        assert_eq!(entries(&q), vec![a.clone(), b.clone()]);
        q.push(&c).unwrap();
        assert_eq!(entries(&q), vec![b, c]);

        let mut q = ClassQueue::new(0, 1, 2).unwrap();
        q.push(&a).unwrap();
        q.push(&[0.0, 2.0]).unwrap();
        assert_eq!(entries(&q), vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn push_normalizes_and_validates() {
        let mut q = ClassQueue::new(3, 4, 2).unwrap();
        q.push(&[3.0, 4.0]).unwrap();
        assert_eq!(entries(&q), vec![vec![0.6, 0.8]]);
        assert!(matches!(q.push(&[1.0, 2.0, 3.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(q.push(&[0.0, 0.0]), Err(Error::DegenerateInput(_))));
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn pushed_entries_are_snapshots() {
        let mut q = ClassQueue::new(0, 4, 3).unwrap();
        let mut src = vec![1.0, 2.0, 2.0];
        q.push(&src).unwrap();
        let before: Vec<u64> = q.entries().next().unwrap().iter().map(|x| x.to_bits()).collect();
        src[0] = 100.0;
        src[2] = -7.0;
        let after: Vec<u64> = q.entries().next().unwrap().iter().map(|x| x.to_bits()).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn support_set_clamps_and_exhausts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut q = ClassQueue::new(0, 8, 2).unwrap();
        for i in 0..5 {
            q.push(&[1.0, i as f64]).unwrap();
        }
        let s = sample_support_set(&q, 5, &mut rng).unwrap();
        assert_eq!(s.len(), 5);
        let mut q3 = ClassQueue::new(0, 8, 2).unwrap();
        for i in 0..3 {
            q3.push(&[1.0, i as f64]).unwrap();
        }
        let s = sample_support_set(&q3, 8, &mut rng).unwrap();
        let got: BTreeSet<Vec<u64>> = s.iter().map(|v| v.iter().map(|x| x.to_bits()).collect()).collect();
        let want: BTreeSet<Vec<u64>> = q3.entries().map(|v| v.iter().map(|x| x.to_bits()).collect()).collect();
        assert_eq!(got, want);

        let empty = ClassQueue::new(4, 8, 2).unwrap();
        assert!(matches!(sample_support_set(&empty, 2, &mut rng), Err(Error::EmptyQueue(4))));
    }

    #[test]
    fn support_set_is_uniform() {
        // |Q| = 4, K = 2: each entry is included with probability 1/2.
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut q = ClassQueue::new(0, 4, 4).unwrap();
        for i in 0..4 {
            let mut v = vec![0.0; 4];
            v[i] = 1.0;
            q.push(&v).unwrap();
        }
        let draws = 10_000;
        let mut hits = [0usize; 4];
        for _ in 0..draws {
            let s = sample_support_set(&q, 2, &mut rng).unwrap();
            assert_eq!(s.len(), 2);
            assert_ne!(s[0], s[1]);
            for v in s {
                let i = v.iter().position(|&x| x == 1.0).unwrap();
                hits[i] += 1;
            }
        }
        let sigma = (draws as f64 * 0.25).sqrt();
        for h in hits {
            assert!((h as f64 - draws as f64 * 0.5).abs() <= 3.0 * sigma, "{hits:?}");
        }
    }

    #[test]
    fn prototype_examples() {
        let v = vec![0.3, -0.2, 0.9];
        let mean = compute_prototype(&[v.clone(), v.clone(), v.clone()]).unwrap();
        for (m, x) in mean.iter().zip(&v) {
            assert!((m - x).abs() <= 1e-15);
        }
        assert_eq!(
            compute_prototype(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
            vec![0.5, 0.5]
        );
        assert!(matches!(
            compute_prototype::<Vec<f64>>(&[]),
            Err(Error::EmptyInput(_))
        ));
        assert!(compute_prototype(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn pairs_of_four_entries_give_six_prototypes() {
        let queue = [
            vec![0.91, 0.13, -0.37],
            vec![-0.22, 0.84, 0.41],
            vec![0.35, -0.61, 0.72],
            vec![0.58, 0.47, 0.11],
        ];
        let mut seen = BTreeSet::new();
        for i in 0..4 {
            for j in (i + 1)..4 {
                let p = compute_prototype(&[&queue[i][..], &queue[j][..]]).unwrap();
                seen.insert(p.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
            }
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn prototypes_for_all_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut bank = QueueBank::new(4, 2).unwrap();
        assert!(bank.prototypes(3, &mut rng).unwrap().is_empty());

        bank.push(2, &[0.0, 5.0]).unwrap();
        let set = bank.prototypes(7, &mut rng).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.get(2).unwrap(), &[0.0, 1.0]);

        for i in 0..4 {
            bank.push(0, &[1.0, i as f64]).unwrap();
            bank.push(1, &[-(i as f64), 1.0]).unwrap();
        }
        let a = bank.prototypes(2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = bank.prototypes(2, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);

        bank.clear();
        assert!(bank.prototypes(2, &mut rng).unwrap().is_empty());
    }

    proptest! {
        #[test]
        fn queue_keeps_last_pushes(capacity in 1usize..6, pushes in prop::collection::vec((0.1f64..5.0, -5.0f64..5.0), 0..20)) {
            let mut q = ClassQueue::new(0, capacity, 2).unwrap();
            let mut expected = Vec::new();
            for (x, y) in &pushes {
                q.push(&[*x, *y]).unwrap();
                expected.push(l2_normalize(&[*x, *y]).unwrap());
                prop_assert!(q.len() <= capacity);
            }
            let keep = capacity.min(pushes.len());
            let tail = expected[expected.len() - keep..].to_vec();
            prop_assert_eq!(entries(&q), tail);
            for e in q.entries() {
                prop_assert!((crate::numerics::norm(e) - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn sampling_never_mutates_or_duplicates(len in 1usize..10, k in 1usize..12, seed in any::<u64>()) {
            let mut q = ClassQueue::new(0, 16, 2).unwrap();
            for i in 0..len {
                q.push(&[1.0, i as f64]).unwrap();
            }
            let before = q.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = sample_support_set(&q, k, &mut rng).unwrap();
            prop_assert_eq!(s.len(), k.min(len));
            let distinct: BTreeSet<Vec<u64>> = s.iter().map(|v| v.iter().map(|x| x.to_bits()).collect()).collect();
            prop_assert_eq!(distinct.len(), s.len());
            prop_assert_eq!(&q, &before);
        }

        #[test]
        fn prototype_permutation_invariant(mut support in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..8), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let a = compute_prototype(&support).unwrap();
            support.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let b = compute_prototype(&support).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }
    }
}
