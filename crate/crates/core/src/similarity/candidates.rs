use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{SimilarityError, SimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Structural,
    Name,
    Edit,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Structural, Channel::Name, Channel::Edit];

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::Structural => "structural",
            Channel::Name => "name",
            Channel::Edit => "edit",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "structural" => Ok(Channel::Structural),
            "name" => Ok(Channel::Name),
            "edit" => Ok(Channel::Edit),
            other => Err(format!("unknown channel {other:?}")),
        }
    }
}

/// Top-ranked targets for one source entity, ordered by descending score
/// and then ascending target id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub source: u64,
    pub channel: Channel,
    pub candidates: Vec<(u64, f64)>,
}

impl CandidateSet {
    pub fn empty(source: u64, channel: Channel) -> Self {
        Self {
            source,
            channel,
            candidates: Vec::new(),
        }
    }

    pub fn targets(&self) -> impl Iterator<Item = u64> + '_ {
        self.candidates.iter().map(|&(t, _)| t)
    }

    pub fn contains(&self, target: u64) -> bool {
        self.candidates.iter().any(|&(t, _)| t == target)
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Keeps the first `k` candidates.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            source: self.source,
            channel: self.channel,
            candidates: self.candidates.iter().take(k).copied().collect(),
        }
    }

    /// `source<TAB>channel<TAB>id:score,id:score,…`
    pub fn to_line(&self) -> String {
        let list: Vec<String> = self
            .candidates
            .iter()
            .map(|(t, s)| format!("{t}:{s:?}"))
            .collect();
        format!("{}\t{}\t{}", self.source, self.channel, list.join(","))
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self, SimilarityError> {
        let bad = |reason: String| SimilarityError::Malformed {
            line: line_no,
            reason,
        };
        let mut fields = line.splitn(3, '\t');
        let source = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("bad source id".into()))?;
        let channel = fields
            .next()
            .ok_or_else(|| bad("missing channel".into()))?
            .parse()
            .map_err(bad)?;
        let list = fields.next().unwrap_or("");
        let mut candidates = Vec::new();
        for item in list.split(',').filter(|s| !s.is_empty()) {
            let (t, s) = item
                .split_once(':')
                .ok_or_else(|| bad(format!("expected id:score, found {item:?}")))?;
            let t = t.parse().map_err(|_| bad(format!("bad target id {t:?}")))?;
            let s = s.parse().map_err(|_| bad(format!("bad score {s:?}")))?;
            candidates.push((t, s));
        }
        Ok(Self {
            source,
            channel,
            candidates,
        })
    }
}

fn rank(a: &(u64, f64), b: &(u64, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// The `k` best `(id, score)` entries by descending score, ties by ascending id.
pub fn top_k_from_scores(
    source: u64,
    channel: Channel,
    ids: &[u64],
    scores: &[f64],
    k: usize,
) -> CandidateSet {
    let mut all: Vec<(u64, f64)> = ids.iter().copied().zip(scores.iter().copied()).collect();
    let k = k.min(all.len());
    if k == 0 {
        return CandidateSet::empty(source, channel);
    }
    if k < all.len() {
        all.select_nth_unstable_by(k - 1, rank);
        all.truncate(k);
    }
    all.sort_unstable_by(rank);
    CandidateSet {
        source,
        channel,
        candidates: all,
    }
}

/// Top `k` targets of one matrix row. Returns `None` if `source` has no row.
pub fn top_k_candidates(
    matrix: &SimilarityMatrix,
    source: u64,
    k: usize,
    channel: Channel,
) -> Option<CandidateSet> {
    let row = matrix.row_of(source)?;
    Some(top_k_from_scores(source, channel, &matrix.col_ids, row, k))
}

pub fn write_candidate_file<'a, W: Write>(
    mut w: W,
    sets: impl IntoIterator<Item = &'a CandidateSet>,
) -> std::io::Result<()> {
    for s in sets {
        writeln!(w, "{}", s.to_line())?;
    }
    Ok(())
}

pub fn read_candidate_file<R: BufRead>(r: R) -> Result<Vec<CandidateSet>, SimilarityError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        out.push(CandidateSet::parse_line(line, i + 1)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::similarity::Metric;
    use proptest::prelude::*;

    fn matrix(rows: &[Vec<f64>]) -> SimilarityMatrix {
        let scores = Matrix::from_rows(rows);
        SimilarityMatrix {
            metric: Metric::Cosine,
            row_ids: (0..scores.rows() as u64).collect(),
            col_ids: (0..scores.cols() as u64).collect(),
            scores,
        }
    }

    #[test]
    fn picks_highest() {
        let m = matrix(&[vec![0.9, 0.1, 0.5]]);
        let c = top_k_candidates(&m, 0, 2, Channel::Structural).unwrap();
        assert_eq!(c.targets().collect::<Vec<_>>(), vec![0, 2]);
    }

    #[test]
    fn ties_prefer_low_ids() {
        let m = matrix(&[vec![0.3, 0.3, 0.3, 0.3]]);
        let c = top_k_candidates(&m, 0, 2, Channel::Structural).unwrap();
        assert_eq!(c.targets().collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn k_is_clamped() {
        let m = matrix(&[vec![0.1, 0.2, 0.3]]);
        assert_eq!(top_k_candidates(&m, 0, 10, Channel::Name).unwrap().len(), 3);
        assert!(top_k_candidates(&m, 5, 1, Channel::Name).is_none());
    }

    #[test]
    fn line_format() {
        let c = CandidateSet {
            source: 7,
            channel: Channel::Edit,
            candidates: vec![(10, 1.0), (3, 0.25)],
        };
        assert_eq!(c.to_line(), "7\tedit\t10:1.0,3:0.25");
        assert_eq!(CandidateSet::parse_line(&c.to_line(), 1).unwrap(), c);
        let empty = CandidateSet::empty(2, Channel::Name);
        assert_eq!(CandidateSet::parse_line(&empty.to_line(), 1).unwrap(), empty);
        assert!(CandidateSet::parse_line("x\tedit\t", 4).is_err());
        assert!(CandidateSet::parse_line("1\tbogus\t", 4).is_err());
    }

    proptest! {
        #[test]
        fn agrees_with_full_sort(
            row in prop::collection::vec(prop::sample::select(vec![-1.0, -0.5, 0.0, 0.25, 0.5, 1.0]), 1..30),
            k in 1usize..35,
        ) {
            let ids: Vec<u64> = (0..row.len() as u64).collect();
            let got = top_k_from_scores(0, Channel::Structural, &ids, &row, k);
            let mut all: Vec<(u64, f64)> = ids.iter().copied().zip(row.iter().copied()).collect();
            all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            all.truncate(k);
            prop_assert_eq!(&got.candidates, &all);
            // Strict ordering, no duplicate targets.
            for w in got.candidates.windows(2) {
                prop_assert!(w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0));
            }
        }

        #[test]
        fn line_round_trip(
            source in any::<u64>(),
            cands in prop::collection::vec((any::<u64>(), -1e6f64..1e6), 0..8),
        ) {
            let c = CandidateSet { source, channel: Channel::Structural, candidates: cands };
            prop_assert_eq!(CandidateSet::parse_line(&c.to_line(), 1).unwrap(), c);
        }
    }
}
