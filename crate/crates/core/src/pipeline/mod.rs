//! End-to-end orchestration: load, train, candidates, multi-choice
//! prediction, report.
//!
//! A run directory holds `embeddings.bin`, `checkpoint.bin`, `train.json`,
//! `candidates/<channel>.tsv`, `transcripts.jsonl`, `report.json`,
//! `summary.txt` and `timing.json`. Wall-clock figures live only in
//! `timing.json`, so `report.json` is identical across repeated runs.

mod cache;
mod config;
mod metrics;
mod report;
mod run;

use std::fmt;
use std::path::{Path, PathBuf};

pub use cache::{dataset_digest, digest, PhaseCache};
pub use config::{Ablation, BackendConfig, BackendKind, ChannelToggles, PipelineConfig};
pub use metrics::{candidate_hit_rate, hits_at_k, rank_at, RankingSource};
pub use report::{AlignmentReport, PredictionRecord, RoundStats, TrainSummary};
pub use run::{
    align_phase, backend_descriptor, candidate_phase, candidate_union, evaluate_reports, make_backend, prepare,
    read_checkpoint, run_alignment, run_alignment_with, run_candidates, run_training, structural_phase,
    Candidates, EvalRun, EvalSummary, Prepared, RunArtifacts, Structural, Timing,
};

use crate::kg::{write_dataset, Dataset};
use crate::synth::{generate_synthetic_pair, synthetic_word_vectors};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Load,
    Train,
    Names,
    Candidates,
    Align,
    Report,
    Eval,
    Synth,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Load => "load",
            Phase::Train => "train",
            Phase::Names => "names",
            Phase::Candidates => "candidates",
            Phase::Align => "align",
            Phase::Report => "report",
            Phase::Eval => "eval",
            Phase::Synth => "synth",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{phase} phase failed: {message}")]
    Phase { phase: Phase, message: String },
    #[error("metric: {0}")]
    Metric(String),
}

impl PipelineError {
    /// 1 for validation errors, 2 for failures while running a phase.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 1,
            PipelineError::Phase { .. } | PipelineError::Metric(_) => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub entities: usize,
    pub relations: usize,
    pub triples: usize,
    pub seed: u64,
    pub vector_dim: usize,
    pub vector_noise: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            entities: 200,
            relations: 10,
            triples: 600,
            seed: 0,
            vector_dim: 50,
            vector_noise: 0.1,
        }
    }
}

/// Writes a synthetic dataset, a matching `vectors.txt` and a
/// `pipeline.toml` that points at both. Returns the config path.
pub fn write_synthetic_dataset(dir: &Path, spec: &SynthSpec) -> Result<PathBuf, PipelineError> {
    let synth_err = |e: &dyn fmt::Display| PipelineError::Phase {
        phase: Phase::Synth,
        message: e.to_string(),
    };
    let (pair, reference) = generate_synthetic_pair(spec.entities, spec.relations, spec.triples, spec.seed)
        .map_err(|e| PipelineError::Config(e.to_string()))?;
    let vectors = synthetic_word_vectors(&pair, spec.vector_dim, spec.vector_noise, spec.seed);
    write_dataset(&Dataset { pair, reference }, dir).map_err(|e| synth_err(&e))?;
    let vec_path = dir.join("vectors.txt");
    std::fs::write(&vec_path, vectors).map_err(|e| synth_err(&e))?;
    let cfg = PipelineConfig {
        dataset_dir: dir.to_path_buf(),
        word_vectors: Some(vec_path),
        output_dir: dir.join("out"),
        target_language: "the accented spelling".into(),
        ..PipelineConfig::default()
    };
    let cfg_path = dir.join("pipeline.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).map_err(|e| synth_err(&e))?;
    Ok(cfg_path)
}
