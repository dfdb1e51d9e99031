use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{EmbedError, Result};
use crate::kg::{AlignmentSeedSet, KgPair, Side};
use crate::matrix::{squared_distance, Matrix};

/// Squared Euclidean distance between two rows of an embedding matrix.
pub fn pair_distance(emb: &Matrix, a: usize, b: usize) -> f64 {
    squared_distance(emb.row(a), emb.row(b))
}

/// Hardest current negative of every seed entity, keyed by global index.
///
/// A source entity's negative is a target entity and vice versa.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NegativePool {
    negatives: BTreeMap<usize, usize>,
}

impl NegativePool {
    pub fn get(&self, entity: usize) -> Option<usize> {
        self.negatives.get(&entity).copied()
    }

    pub fn insert(&mut self, entity: usize, negative: usize) {
        self.negatives.insert(entity, negative);
    }

    pub fn len(&self) -> usize {
        self.negatives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.negatives.is_empty()
    }

    /// Negative of a seeded entity, as an id of the opposite graph.
    pub fn negative_of(&self, pair: &KgPair, side: Side, id: u64) -> Option<u64> {
        let g = pair.global_index(side, id)?;
        let n = self.get(g)?;
        pair.resolve_global(n).map(|(_, id)| id)
    }

    /// Recomputes entries for the given global seed pairs only.
    pub(crate) fn refresh(&mut self, emb: &Matrix, pair: &KgPair, seeds: &[(usize, usize)]) -> Result<()> {
        check_sizes(pair)?;
        let src = pair.side_range(Side::Source);
        let tgt = pair.side_range(Side::Target);
        let mut queries = Vec::with_capacity(seeds.len() * 2);
        for &(s, t) in seeds {
            queries.push((s, t, tgt.clone()));
            queries.push((t, s, src.clone()));
        }
        let found: Vec<(usize, usize)> = queries
            .into_par_iter()
            .map(|(anchor, exclude, range)| {
                (anchor, nearest(emb, anchor, range, |c| c == exclude))
            })
            .collect();
        for (anchor, neg) in found {
            self.negatives.insert(anchor, neg);
        }
        Ok(())
    }
}

fn check_sizes(pair: &KgPair) -> Result<()> {
    for side in [Side::Source, Side::Target] {
        let n = pair.graph(side).num_entities();
        if n < 2 {
            return Err(EmbedError::TooFewNegatives { side, found: n });
        }
    }
    Ok(())
}

/// Index in `range` with minimal squared distance to `anchor`, skipping
/// `skip`; ties go to the lowest index (equivalently the lowest id).
fn nearest(
    emb: &Matrix,
    anchor: usize,
    range: std::ops::Range<usize>,
    skip: impl Fn(usize) -> bool,
) -> usize {
    let a = emb.row(anchor);
    let mut best = usize::MAX;
    let mut best_d = f64::INFINITY;
    for c in range {
        if skip(c) {
            continue;
        }
        let d = squared_distance(a, emb.row(c));
        if d < best_d || best == usize::MAX {
            best = c;
            best_d = d;
        }
    }
    best
}

pub(crate) fn seed_indices(seeds: &AlignmentSeedSet, pair: &KgPair) -> Result<Vec<(usize, usize)>> {
    seeds
        .iter()
        .map(|(s, t)| {
            match (
                pair.global_index(Side::Source, s),
                pair.global_index(Side::Target, t),
            ) {
                (Some(a), Some(b)) => Ok((a, b)),
                _ => Err(EmbedError::UnknownSeed {
                    source_id: s,
                    target_id: t,
                }),
            }
        })
        .collect()
}

pub fn update_negative_pool(
    emb: &Matrix,
    seeds: &AlignmentSeedSet,
    pair: &KgPair,
) -> Result<NegativePool> {
    let idx = seed_indices(seeds, pair)?;
    let mut pool = NegativePool::default();
    pool.refresh(emb, pair, &idx)?;
    Ok(pool)
}

/// Hinge loss over seed pairs with one pooled negative per side:
///
/// ```text
/// ½ [δ + d(s,t) − d(s, ñ_s)]₊ + ½ [δ + d(s,t) − d(ñ_t, t)]₊
/// ```
///
/// where `ñ_s` is the pooled (target-side) negative of `s` and `ñ_t` the
/// pooled (source-side) negative of `t`. Returns the loss summed over pairs
/// and its gradient with respect to `emb`.
pub fn triplet_loss_with_grad(
    emb: &Matrix,
    pairs: &[(usize, usize)],
    pool: &NegativePool,
    margin: f64,
) -> Result<(f64, Matrix)> {
    let mut grad = Matrix::zeros(emb.rows(), emb.cols());
    let loss = hinge(emb, pairs, pool, margin, Some(&mut grad))?;
    Ok((loss, grad))
}

pub(crate) fn hinge(
    emb: &Matrix,
    pairs: &[(usize, usize)],
    pool: &NegativePool,
    margin: f64,
    mut grad: Option<&mut Matrix>,
) -> Result<f64> {
    let cols = emb.cols();
    let mut total = 0.0;
    for &(s, t) in pairs {
        let (ns, nt) = match (pool.get(s), pool.get(t)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(EmbedError::Config(format!(
                    "negative pool has no entry for seed ({s}, {t})"
                )))
            }
        };
        let pos = pair_distance(emb, s, t);
        // (anchor, negative) for each side's term.
        for (anchor, neg) in [(s, ns), (t, nt)] {
            let v = margin + pos - pair_distance(emb, anchor, neg);
            if v <= 0.0 {
                continue;
            }
            total += 0.5 * v;
            if let Some(g) = grad.as_deref_mut() {
                for k in 0..cols {
                    // ½ ∂/∂ of ‖s−t‖² and −‖anchor−neg‖².
                    let dp = emb.get(s, k) - emb.get(t, k);
                    let dn = emb.get(anchor, k) - emb.get(neg, k);
                    g.as_mut_slice()[s * cols + k] += dp;
                    g.as_mut_slice()[t * cols + k] -= dp;
                    g.as_mut_slice()[anchor * cols + k] -= dn;
                    g.as_mut_slice()[neg * cols + k] += dn;
                }
            }
        }
    }
    Ok(total)
}

pub fn triplet_loss(
    emb: &Matrix,
    seeds: &AlignmentSeedSet,
    pair: &KgPair,
    pool: &NegativePool,
    margin: f64,
) -> Result<f64> {
    let idx = seed_indices(seeds, pair)?;
    hinge(emb, &idx, pool, margin, None)
}

/// Adds every mutual-nearest-neighbor pair among entities that are not yet
/// seeded on either side. Existing seeds are kept untouched.
pub fn augment_seeds(
    emb: &Matrix,
    pair: &KgPair,
    current: &AlignmentSeedSet,
) -> AlignmentSeedSet {
    let free = |side: Side| -> Vec<usize> {
        pair.graph(side)
            .entity_ids()
            .iter()
            .filter(|&&id| !current.contains(side, id))
            .map(|&id| pair.global_index(side, id).expect("own id"))
            .collect()
    };
    let free_src = free(Side::Source);
    let free_tgt = free(Side::Target);
    let mut out = current.clone();
    if free_src.is_empty() || free_tgt.is_empty() {
        return out;
    }
    let best = |from: &[usize], to: &[usize]| -> Vec<usize> {
        from.par_iter()
            .map(|&a| {
                let row = emb.row(a);
                let mut best = to[0];
                let mut best_d = squared_distance(row, emb.row(best));
                for &c in &to[1..] {
                    let d = squared_distance(row, emb.row(c));
                    if d < best_d {
                        best = c;
                        best_d = d;
                    }
                }
                best
            })
            .collect()
    };
    let src_best = best(&free_src, &free_tgt);
    let tgt_best = best(&free_tgt, &free_src);
    let tgt_slot = |g: usize| g - pair.source.num_entities();
    let tgt_offset = pair.source.num_entities();
    let pos_in_free_tgt: std::collections::HashMap<usize, usize> =
        free_tgt.iter().enumerate().map(|(i, &g)| (g, i)).collect();
    for (i, &s) in free_src.iter().enumerate() {
        let t = src_best[i];
        if tgt_best[pos_in_free_tgt[&t]] == s {
            let sid = pair.source.entity_ids()[s];
            let tid = pair.target.entity_ids()[tgt_slot(t)];
            debug_assert!(t >= tgt_offset);
            out.try_add(sid, tid);
        }
    }
    out
}
