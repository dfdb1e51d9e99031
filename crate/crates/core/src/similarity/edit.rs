use rayon::prelude::*;
use unicode_normalization::UnicodeNormalization;

use super::{top_k_from_scores, CandidateSet, Channel};

/// Levenshtein distance over Unicode code points with unit costs.
pub fn edit_distance(s1: &str, s2: &str) -> usize {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    distance_chars(&a, &b)
}

fn distance_chars(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    // row[j] holds d[i][j] for the current i.
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, &ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = diag + usize::from(ca != cb);
            diag = row[j + 1];
            row[j + 1] = sub.min(row[j] + 1).min(row[j + 1] + 1);
        }
    }
    row[b.len()]
}

fn similarity_chars(a: &[char], b: &[char]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - distance_chars(a, b) as f64 / longest as f64
}

/// `1 − d(s1, s2) / max(len(s1), len(s2))`; two empty strings score 1.
pub fn edit_similarity(s1: &str, s2: &str) -> f64 {
    let a: Vec<char> = s1.chars().collect();
    let b: Vec<char> = s2.chars().collect();
    similarity_chars(&a, &b)
}

/// Target names pre-split into code points for repeated scans.
#[derive(Debug, Clone)]
pub struct EditIndex {
    ids: Vec<u64>,
    names: Vec<Vec<char>>,
    nfc: bool,
}

impl EditIndex {
    /// With `nfc` set, names and queries are NFC-normalized before comparison.
    pub fn new<'a>(targets: impl IntoIterator<Item = (u64, &'a str)>, nfc: bool) -> Self {
        let (ids, names) = targets
            .into_iter()
            .map(|(id, n)| (id, prepare(n, nfc)))
            .unzip();
        Self { ids, names, nfc }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn candidates(&self, source: u64, virtual_name: &str, k: usize) -> CandidateSet {
        let q = prepare(virtual_name, self.nfc);
        let scores: Vec<f64> = self
            .names
            .par_iter()
            .map(|n| similarity_chars(&q, n))
            .collect();
        top_k_from_scores(source, Channel::Edit, &self.ids, &scores, k)
    }
}

fn prepare(s: &str, nfc: bool) -> Vec<char> {
    if nfc {
        s.nfc().collect()
    } else {
        s.chars().collect()
    }
}

/// The `k` targets whose names are most edit-similar to `virtual_name`.
pub fn edit_candidates<'a>(
    source: u64,
    virtual_name: &str,
    target_names: impl IntoIterator<Item = (u64, &'a str)>,
    k: usize,
) -> CandidateSet {
    EditIndex::new(target_names, false).candidates(source, virtual_name, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct transcription of the recurrence, exponential time.
    fn naive(a: &[char], b: &[char]) -> usize {
        match (a.len(), b.len()) {
            (0, n) | (n, 0) => n,
            (i, j) => {
                let c = usize::from(a[i - 1] != b[j - 1]);
                (naive(a, &b[..j - 1]) + 1)
                    .min(naive(&a[..i - 1], b) + 1)
                    .min(naive(&a[..i - 1], &b[..j - 1]) + c)
            }
        }
    }

    #[test]
    fn basic_distances() {
        assert_eq!(edit_distance("same", "same"), 0);
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("abc", ""), 3);
        let k: Vec<char> = "kitten".chars().collect();
        let s: Vec<char> = "sitting".chars().collect();
        assert_eq!(naive(&k, &s), 3);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
    }

    #[test]
    fn code_points_not_bytes() {
        assert_eq!(edit_distance("乔·拜登", "乔·拜"), 1);
        assert_eq!(edit_distance("é", "e"), 1);
    }

    #[test]
    fn similarity_values() {
        assert_eq!(edit_similarity("abc", "abc"), 1.0);
        assert_eq!(edit_similarity("ab", "cd"), 0.0);
        assert!((edit_similarity("abc", "abd") - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(edit_similarity("", ""), 1.0);
    }

    #[test]
    fn nfc_switch() {
        let composed = "\u{e9}";
        let decomposed = "e\u{301}";
        let raw = EditIndex::new([(1, decomposed)], false).candidates(0, composed, 1);
        let nfc = EditIndex::new([(1, decomposed)], true).candidates(0, composed, 1);
        assert!(raw.candidates[0].1 < 1.0);
        assert_eq!(nfc.candidates[0].1, 1.0);
    }

    #[test]
    fn exact_name_ranks_first() {
        let targets = [(5, "Joe Biden"), (2, "Jill Biden"), (9, "Joseph")];
        let c = edit_candidates(0, "Joe Biden", targets, 2);
        assert_eq!(c.candidates[0], (5, 1.0));
        assert_eq!(c.channel, Channel::Edit);
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn all_targets_when_k_large_and_ties_by_id() {
        let targets = [(8, "ab"), (3, "ba"), (1, "zz")];
        let c = edit_candidates(0, "aa", targets, 10);
        assert_eq!(c.targets().collect::<Vec<_>>(), vec![3, 8, 1]);
    }
}
