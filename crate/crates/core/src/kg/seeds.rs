use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{KgError, KgPair, Result, Side};

/// One-to-one set of `(source id, target id)` pairs in insertion order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlignmentSeedSet {
    pairs: Vec<(u64, u64)>,
    by_source: HashMap<u64, u64>,
    by_target: HashMap<u64, u64>,
}

impl AlignmentSeedSet {
    /// Builds a set, rejecting any id that appears twice on the same side.
    pub fn new(pairs: Vec<(u64, u64)>) -> Result<Self> {
        let mut set = Self::default();
        for (s, t) in pairs {
            set.insert(s, t, "seed set")?;
        }
        Ok(set)
    }

    /// Like [`AlignmentSeedSet::new`] but also checks every id exists in `pair`.
    pub fn for_pair(pairs: Vec<(u64, u64)>, pair: &KgPair, context: &str) -> Result<Self> {
        for &(s, t) in &pairs {
            for (side, id) in [(Side::Source, s), (Side::Target, t)] {
                if !pair.graph(side).contains_entity(id) {
                    return Err(KgError::UnknownEntity {
                        context: context.to_string(),
                        side,
                        id,
                    });
                }
            }
        }
        let mut set = Self::default();
        for (s, t) in pairs {
            set.insert(s, t, context)?;
        }
        Ok(set)
    }

    fn insert(&mut self, s: u64, t: u64, context: &str) -> Result<()> {
        if self.by_source.contains_key(&s) {
            return Err(KgError::DuplicateSeed {
                context: context.to_string(),
                side: Side::Source,
                id: s,
            });
        }
        if self.by_target.contains_key(&t) {
            return Err(KgError::DuplicateSeed {
                context: context.to_string(),
                side: Side::Target,
                id: t,
            });
        }
        self.by_source.insert(s, t);
        self.by_target.insert(t, s);
        self.pairs.push((s, t));
        Ok(())
    }

    /// Adds a pair if neither id is already seeded. Returns whether it was added.
    pub fn try_add(&mut self, s: u64, t: u64) -> bool {
        self.insert(s, t, "").is_ok()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(u64, u64)] {
        &self.pairs
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.pairs.iter().copied()
    }

    pub fn target_of(&self, source: u64) -> Option<u64> {
        self.by_source.get(&source).copied()
    }

    pub fn source_of(&self, target: u64) -> Option<u64> {
        self.by_target.get(&target).copied()
    }

    pub fn contains(&self, side: Side, id: u64) -> bool {
        match side {
            Side::Source => self.by_source.contains_key(&id),
            Side::Target => self.by_target.contains_key(&id),
        }
    }

    /// Counterpart of `id` on the other side, if `id` is seeded.
    pub fn counterpart(&self, side: Side, id: u64) -> Option<u64> {
        match side {
            Side::Source => self.target_of(id),
            Side::Target => self.source_of(id),
        }
    }
}

/// Random train/test partition. `|train| = round(fraction * |seeds|)`;
/// both halves are returned sorted by source id.
pub fn split_seeds(
    seeds: &AlignmentSeedSet,
    train_fraction: f64,
    rng_seed: u64,
) -> Result<(AlignmentSeedSet, AlignmentSeedSet)> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(KgError::Invalid(format!(
            "train fraction must lie in (0, 1], got {train_fraction}"
        )));
    }
    let mut pairs = seeds.pairs.clone();
    pairs.sort_unstable();
    pairs.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
    let n_train = ((train_fraction * pairs.len() as f64).round() as usize).min(pairs.len());
    let mut test = pairs.split_off(n_train);
    pairs.sort_unstable();
    test.sort_unstable();
    Ok((AlignmentSeedSet::from_disjoint(pairs), AlignmentSeedSet::from_disjoint(test)))
}

impl AlignmentSeedSet {
    fn from_disjoint(pairs: Vec<(u64, u64)>) -> Self {
        Self::new(pairs).expect("subset of a one-to-one set is one-to-one")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeds(n: u64) -> AlignmentSeedSet {
        AlignmentSeedSet::new((0..n).map(|i| (i, 100_000 + i)).collect()).unwrap()
    }

    #[test]
    fn one_to_one_enforced() {
        assert!(AlignmentSeedSet::new(vec![(0, 1), (0, 2)]).is_err());
        assert!(AlignmentSeedSet::new(vec![(0, 1), (2, 1)]).is_err());
        let mut s = AlignmentSeedSet::new(vec![(0, 1)]).unwrap();
        assert!(!s.try_add(0, 5));
        assert!(s.try_add(3, 5));
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn thirty_percent_split() {
        let (train, test) = split_seeds(&seeds(15_000), 0.3, 7).unwrap();
        assert_eq!(train.len(), 4_500);
        assert_eq!(test.len(), 10_500);
        for (s, _) in test.iter() {
            assert!(!train.contains(Side::Source, s));
        }
    }

    #[test]
    fn full_fraction_keeps_everything() {
        let (train, test) = split_seeds(&seeds(20), 1.0, 1).unwrap();
        assert_eq!(train.len(), 20);
        assert!(test.is_empty());
    }

    #[test]
    fn split_is_deterministic() {
        let a = split_seeds(&seeds(100), 0.3, 42).unwrap();
        let b = split_seeds(&seeds(100), 0.3, 42).unwrap();
        assert_eq!(a, b);
        let c = split_seeds(&seeds(100), 0.3, 43).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn bad_fraction_rejected() {
        assert!(split_seeds(&seeds(3), 0.0, 0).is_err());
        assert!(split_seeds(&seeds(3), 1.5, 0).is_err());
    }
}
