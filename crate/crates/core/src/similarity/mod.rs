//! Cross-graph similarity scores and top-k candidate extraction.

mod candidates;
mod edit;

pub use candidates::{
    read_candidate_file, top_k_candidates, top_k_from_scores, write_candidate_file, CandidateSet, Channel,
};
pub use edit::{edit_candidates, edit_distance, edit_similarity, EditIndex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::{dot, norm, squared_distance, Matrix};

#[derive(Debug, thiserror::Error)]
pub enum SimilarityError {
    #[error("vector dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("{0} ids given for {1} rows")]
    IdCount(usize, usize),
    #[error("line {line}: malformed candidate record: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("candidate file i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Cosine,
    NegativeL2,
}

/// Cosine similarity; a zero vector scores 0 against everything.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot(a, b) / (na * nb)).clamp(-1.0, 1.0)
}

pub fn score(metric: Metric, a: &[f64], b: &[f64]) -> f64 {
    match metric {
        Metric::Cosine => cosine(a, b),
        Metric::NegativeL2 => -squared_distance(a, b).sqrt(),
    }
}

/// Scores of one query vector against every row of `targets`.
pub fn similarity_row(query: &[f64], targets: &Matrix, metric: Metric) -> Result<Vec<f64>, SimilarityError> {
    if query.len() != targets.cols() {
        return Err(SimilarityError::Dimension {
            left: query.len(),
            right: targets.cols(),
        });
    }
    Ok(targets.iter_rows().map(|b| score(metric, query, b)).collect())
}

/// Dense score table. Rows are source entities, columns target entities.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub metric: Metric,
    pub row_ids: Vec<u64>,
    pub col_ids: Vec<u64>,
    pub scores: Matrix,
}

impl SimilarityMatrix {
    pub fn row_of(&self, source: u64) -> Option<&[f64]> {
        self.row_ids
            .iter()
            .position(|&id| id == source)
            .map(|i| self.scores.row(i))
    }

    /// Replaces the positional ids with entity ids.
    pub fn with_ids(mut self, row_ids: Vec<u64>, col_ids: Vec<u64>) -> Result<Self, SimilarityError> {
        if row_ids.len() != self.scores.rows() {
            return Err(SimilarityError::IdCount(row_ids.len(), self.scores.rows()));
        }
        if col_ids.len() != self.scores.cols() {
            return Err(SimilarityError::IdCount(col_ids.len(), self.scores.cols()));
        }
        self.row_ids = row_ids;
        self.col_ids = col_ids;
        Ok(self)
    }
}

/// `[i, j] = score(a_i, b_j)`. Ids default to row positions.
pub fn similarity_matrix(a: &Matrix, b: &Matrix, metric: Metric) -> Result<SimilarityMatrix, SimilarityError> {
    if a.cols() != b.cols() {
        return Err(SimilarityError::Dimension {
            left: a.cols(),
            right: b.cols(),
        });
    }
    let rows: Vec<Vec<f64>> = (0..a.rows())
        .into_par_iter()
        .map(|i| b.iter_rows().map(|bj| score(metric, a.row(i), bj)).collect())
        .collect();
    let mut scores = Matrix::zeros(a.rows(), b.rows());
    for (i, r) in rows.iter().enumerate() {
        scores.row_mut(i).copy_from_slice(r);
    }
    Ok(SimilarityMatrix {
        metric,
        row_ids: (0..a.rows() as u64).collect(),
        col_ids: (0..b.rows() as u64).collect(),
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_basics() {
        assert!((cosine(&[3.0, 4.0], &[3.0, 4.0]) - 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]), 0.0);
    }

    #[test]
    fn negative_l2_of_identical_rows_is_zero() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0]]);
        let b = Matrix::from_rows(&[vec![1.0, 2.0], vec![0.0, 0.0]]);
        let m = similarity_matrix(&a, &b, Metric::NegativeL2).unwrap();
        assert_eq!(m.scores.get(0, 0), 0.0);
        assert!(m.scores.get(0, 1) < 0.0);
    }

    #[test]
    fn mismatched_dimensions() {
        let a = Matrix::zeros(1, 2);
        let b = Matrix::zeros(1, 3);
        assert!(similarity_matrix(&a, &b, Metric::Cosine).is_err());
        assert!(similarity_row(&[0.0], &b, Metric::Cosine).is_err());
    }

    proptest! {
        #[test]
        fn score_ranges(
            a in prop::collection::vec(-5.0f64..5.0, 4),
            b in prop::collection::vec(-5.0f64..5.0, 4),
        ) {
            let c = cosine(&a, &b);
            prop_assert!((-1.0..=1.0).contains(&c));
            prop_assert!(score(Metric::NegativeL2, &a, &b) <= 0.0);
        }
    }
}
