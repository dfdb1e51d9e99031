use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::embed::EpochStats;
use crate::similarity::Channel;

use super::config::ChannelToggles;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub cache_key: String,
    pub train_seeds: usize,
    pub seeds_after_augmentation: usize,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub history: Vec<EpochStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub source: u64,
    pub truth: u64,
    pub predicted: Option<u64>,
    pub correct: bool,
    /// No LLM winner; the top structural candidate was used.
    pub fallback: bool,
    pub rounds: usize,
    pub parse_failures: usize,
    /// Channels whose candidate set contains the prediction.
    pub provenance: Vec<Channel>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub total: usize,
    pub mean: f64,
    pub max: usize,
    /// Round count → number of entities.
    pub histogram: BTreeMap<usize, usize>,
}

impl RoundStats {
    pub fn from_counts(counts: impl IntoIterator<Item = usize>) -> Self {
        let mut s = RoundStats::default();
        let mut n = 0usize;
        for c in counts {
            s.total += c;
            s.max = s.max.max(c);
            *s.histogram.entry(c).or_default() += 1;
            n += 1;
        }
        if n > 0 {
            s.mean = s.total as f64 / n as f64;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub test_pairs: usize,
    pub k: usize,
    pub llm: bool,
    pub channels: ChannelToggles,
    /// Over the final predictions.
    pub hits_at_1: f64,
    /// Over the structural similarity matrix.
    pub hits_at_10: f64,
    pub structural_hits_at_1: f64,
    /// `None` for channels that produced no candidate sets.
    pub candidate_hit_rate: BTreeMap<Channel, Option<f64>>,
    pub union_hit_rate: f64,
    pub rounds: RoundStats,
    pub fallbacks: usize,
    pub parse_failures: usize,
    pub virtual_entity_failures: usize,
    /// Test sources whose name had no in-vocabulary token.
    pub name_oov_sources: usize,
    pub training: TrainSummary,
    pub predictions: Vec<PredictionRecord>,
}

fn rate(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

impl AlignmentReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn summary_table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("test pairs".into(), self.test_pairs.to_string()),
            ("k".into(), self.k.to_string()),
            ("llm".into(), if self.llm { "on" } else { "off" }.into()),
            ("Hits@1".into(), format!("{:.4}", self.hits_at_1)),
            ("Hits@10 (structural)".into(), format!("{:.4}", self.hits_at_10)),
            ("Hits@1 (structural)".into(), format!("{:.4}", self.structural_hits_at_1)),
        ];
        for ch in Channel::ALL {
            let on = if self.channels.enabled(ch) { "" } else { " (off)" };
            rows.push((
                format!("candidate hit rate: {ch}{on}"),
                rate(self.candidate_hit_rate.get(&ch).copied().flatten()),
            ));
        }
        rows.push(("union hit rate".into(), format!("{:.4}", self.union_hit_rate)));
        rows.push((
            "rounds (mean / max)".into(),
            format!("{:.2} / {}", self.rounds.mean, self.rounds.max),
        ));
        rows.push(("fallbacks".into(), self.fallbacks.to_string()));
        rows.push(("parse failures".into(), self.parse_failures.to_string()));
        rows.push(("virtual entity failures".into(), self.virtual_entity_failures.to_string()));
        rows.push((
            "training loss".into(),
            format!("{:.4} -> {:.4}", self.training.initial_loss, self.training.final_loss),
        ));
        rows.push((
            "seeds (train / augmented)".into(),
            format!("{} / {}", self.training.train_seeds, self.training.seeds_after_augmentation),
        ));
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        out
    }
}
