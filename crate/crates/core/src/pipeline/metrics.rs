use std::collections::BTreeMap;

use crate::kg::AlignmentSeedSet;
use crate::similarity::{CandidateSet, SimilarityMatrix};

use super::PipelineError;

/// What a Hits@k figure is computed from.
#[derive(Debug, Clone, Copy)]
pub enum RankingSource<'a> {
    /// Rank of the true target in its source row, ties broken by ascending id.
    Matrix(&'a SimilarityMatrix),
    /// One prediction per source; only `k = 1` is meaningful.
    Predictions(&'a BTreeMap<u64, Option<u64>>),
}

fn metric_error(m: String) -> PipelineError {
    PipelineError::Metric(m)
}

/// Zero-based rank of column `j` under (score desc, id asc) ordering.
pub fn rank_at(row: &[f64], col_ids: &[u64], j: usize) -> usize {
    let (truth, id) = (row[j], col_ids[j]);
    row.iter()
        .zip(col_ids)
        .filter(|&(&x, &c)| x > truth || (x == truth && c < id))
        .count()
}

/// Fraction of test pairs whose true target is ranked within the top `k`.
pub fn hits_at_k(source: RankingSource<'_>, test: &AlignmentSeedSet, k: usize) -> Result<f64, PipelineError> {
    if k == 0 {
        return Err(metric_error("k must be at least 1".into()));
    }
    if test.is_empty() {
        return Err(metric_error("no test pairs".into()));
    }
    let mut hits = 0usize;
    match source {
        RankingSource::Matrix(m) => {
            let row_of: BTreeMap<u64, usize> = m.row_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
            let col_of: BTreeMap<u64, usize> = m.col_ids.iter().enumerate().map(|(j, &id)| (id, j)).collect();
            for (s, t) in test.iter() {
                let i = *row_of
                    .get(&s)
                    .ok_or_else(|| metric_error(format!("no ranking row for source {s}")))?;
                let Some(&j) = col_of.get(&t) else {
                    continue;
                };
                if rank_at(m.scores.row(i), &m.col_ids, j) < k {
                    hits += 1;
                }
            }
        }
        RankingSource::Predictions(p) => {
            if k != 1 {
                return Err(metric_error(format!("a prediction list only supports k = 1, got {k}")));
            }
            for (s, t) in test.iter() {
                let predicted = p
                    .get(&s)
                    .ok_or_else(|| metric_error(format!("no prediction for source {s}")))?;
                if *predicted == Some(t) {
                    hits += 1;
                }
            }
        }
    }
    Ok(hits as f64 / test.len() as f64)
}

/// Fraction of test pairs whose truth appears in the source's candidate set.
/// Sources without a set count as misses.
pub fn candidate_hit_rate(sets: &[CandidateSet], test: &AlignmentSeedSet) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let by_source: BTreeMap<u64, &CandidateSet> = sets.iter().map(|c| (c.source, c)).collect();
    let hits = test
        .iter()
        .filter(|&(s, t)| by_source.get(&s).is_some_and(|c| c.contains(t)))
        .count();
    hits as f64 / test.len() as f64
}
