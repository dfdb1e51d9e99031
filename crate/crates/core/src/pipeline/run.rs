use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{train, ModelParams};
use crate::kg::{load_dataset, split_seeds, AlignmentSeedSet, Dataset, KgPair, Side};
use crate::llm::{
    build_virtual_entity_prompt, generate_virtual_entity, iterative_predict, write_transcript, Candidate,
    HttpBackend, LlmBackend, NameOracle, Prediction, ProtocolQuery, TranscriptRecord, VirtualEntity,
};
use crate::matrix::Matrix;
use crate::names::{embed_graph_names, graph_vocabulary, load_word_vectors_for, NameError};
use crate::similarity::{
    similarity_row, top_k_from_scores, write_candidate_file, CandidateSet, Channel, EditIndex, Metric,
};

use super::cache::{dataset_digest, digest, PhaseCache};
use super::config::{BackendKind, PipelineConfig};
use super::metrics::{candidate_hit_rate, rank_at};
use super::report::{AlignmentReport, PredictionRecord, RoundStats, TrainSummary};
use super::{Phase, PipelineError};

fn fail<E: std::fmt::Display>(phase: Phase) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Phase {
        phase,
        message: e.to_string(),
    }
}

fn write_file(path: &Path, bytes: &[u8], phase: Phase) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(fail(phase))?;
    }
    fs::write(path, bytes).map_err(|e| PipelineError::Phase {
        phase,
        message: format!("{}: {e}", path.display()),
    })
}

/// splitmix64 finalizer over the pair.
fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn display(pair: &KgPair, side: Side, id: u64) -> String {
    pair.graph(side)
        .entity_display_name(id)
        .unwrap_or_default()
        .to_string()
}

/// Loaded dataset and its train/test split.
pub struct Prepared {
    pub dataset: Dataset,
    pub train: AlignmentSeedSet,
    pub test: AlignmentSeedSet,
    pub digest: String,
}

pub fn prepare(cfg: &PipelineConfig) -> Result<Prepared, PipelineError> {
    cfg.validate()?;
    let dataset = load_dataset(&cfg.dataset_dir).map_err(fail(Phase::Load))?;
    let digest = dataset_digest(&cfg.dataset_dir).map_err(fail(Phase::Load))?;
    let (train, test) =
        split_seeds(&dataset.reference, cfg.seed_fraction, cfg.split_seed).map_err(fail(Phase::Load))?;
    if train.is_empty() || test.is_empty() {
        return Err(PipelineError::Config(format!(
            "seed_fraction {} leaves {} training and {} test pairs; both must be non-empty",
            cfg.seed_fraction,
            train.len(),
            test.len()
        )));
    }
    Ok(Prepared {
        dataset,
        train,
        test,
        digest,
    })
}

pub struct Structural {
    pub embeddings: Matrix,
    pub summary: TrainSummary,
    pub cache_hit: bool,
}

fn train_key(cfg: &PipelineConfig, prep: &Prepared) -> String {
    let train = serde_json::to_vec(&cfg.train).expect("config serializes");
    digest([
        b"structural-v1".as_slice(),
        prep.digest.as_bytes(),
        &train,
        &cfg.seed_fraction.to_le_bytes(),
        &cfg.split_seed.to_le_bytes(),
    ])
}

fn load_cached_training(cache: &PhaseCache, key: &str) -> Option<(Matrix, Vec<u8>, TrainSummary)> {
    let emb = Matrix::read_from(&cache.read("structural", key, "emb")?[..]).ok()?;
    let ckpt = cache.read("structural", key, "ckpt")?;
    let summary = serde_json::from_slice(&cache.read("structural", key, "json")?).ok()?;
    Some((emb, ckpt, summary))
}

/// Trains (or loads from cache) the structural embeddings and writes
/// `embeddings.bin`, `checkpoint.bin` and `train.json`.
pub fn structural_phase(
    cfg: &PipelineConfig,
    prep: &Prepared,
    cache: &PhaseCache,
) -> Result<Structural, PipelineError> {
    let key = train_key(cfg, prep);
    let (embeddings, ckpt, summary, cache_hit) = match load_cached_training(cache, &key) {
        Some((e, c, s)) => (e, c, s, true),
        None => {
            let out = train(&prep.dataset.pair, &prep.train, &cfg.train).map_err(fail(Phase::Train))?;
            let summary = TrainSummary {
                cache_key: key.clone(),
                train_seeds: prep.train.len(),
                seeds_after_augmentation: out.seeds.len(),
                initial_loss: out.initial_loss,
                final_loss: out.final_loss,
                history: out.history.clone(),
            };
            let mut ckpt = Vec::new();
            out.params.write_checkpoint(&mut ckpt).map_err(fail(Phase::Train))?;
            let json = serde_json::to_vec_pretty(&summary).map_err(fail(Phase::Train))?;
            cache
                .write("structural", &key, "emb", &out.embeddings.to_bytes())
                .and_then(|_| cache.write("structural", &key, "ckpt", &ckpt))
                .and_then(|_| cache.write("structural", &key, "json", &json))
                .map_err(fail(Phase::Train))?;
            (out.embeddings, ckpt, summary, false)
        }
    };
    let out = &cfg.output_dir;
    write_file(&out.join("embeddings.bin"), &embeddings.to_bytes(), Phase::Train)?;
    write_file(&out.join("checkpoint.bin"), &ckpt, Phase::Train)?;
    let json = serde_json::to_vec_pretty(&summary).map_err(fail(Phase::Train))?;
    write_file(&out.join("train.json"), &json, Phase::Train)?;
    Ok(Structural {
        embeddings,
        summary,
        cache_hit,
    })
}

/// Reads a checkpoint written by [`structural_phase`].
pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<ModelParams, PipelineError> {
    let bytes = fs::read(path.as_ref()).map_err(fail(Phase::Train))?;
    ModelParams::read_checkpoint(&bytes[..]).map_err(fail(Phase::Train))
}

/// Per-channel candidate sets for every test source, in test order.
#[derive(Debug, Clone)]
pub struct Candidates {
    /// Always computed: it feeds Hits@k and the fallback answer.
    pub structural: Vec<CandidateSet>,
    /// Zero-based rank of each test pair's truth in its structural row.
    pub structural_ranks: Vec<usize>,
    pub name: Option<Vec<CandidateSet>>,
    pub edit: Option<Vec<CandidateSet>>,
    pub virtual_entities: Vec<(u64, VirtualEntity)>,
    pub name_oov_sources: usize,
}

impl Candidates {
    pub fn channel(&self, ch: Channel) -> Option<&[CandidateSet]> {
        match ch {
            Channel::Structural => Some(&self.structural),
            Channel::Name => self.name.as_deref(),
            Channel::Edit => self.edit.as_deref(),
        }
    }
}

/// Identifies a backend for cache keys; `None` disables caching of model output.
pub fn backend_descriptor(cfg: &PipelineConfig, prep: &Prepared) -> Option<String> {
    Some(match cfg.backend.kind {
        BackendKind::Mock => format!("mock-name-oracle:{}", prep.digest),
        BackendKind::Live => format!("live:{}:{}", cfg.backend.live.endpoint, cfg.backend.live.model),
    })
}

pub fn make_backend(cfg: &PipelineConfig, dataset: &Dataset) -> Result<Box<dyn LlmBackend>, PipelineError> {
    Ok(match cfg.backend.kind {
        BackendKind::Mock => {
            let truth: HashMap<String, String> = dataset
                .reference
                .iter()
                .map(|(s, t)| {
                    (
                        display(&dataset.pair, Side::Source, s),
                        display(&dataset.pair, Side::Target, t),
                    )
                })
                .collect();
            Box::new(NameOracle::new(truth))
        }
        BackendKind::Live => Box::new(HttpBackend::new(cfg.backend.live.clone()).map_err(fail(Phase::Align))?),
    })
}

fn pool(cfg: &PipelineConfig, phase: Phase) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.backend.concurrency())
        .build()
        .map_err(fail(phase))
}

fn test_targets(prep: &Prepared) -> Vec<u64> {
    let mut t: Vec<u64> = prep.test.iter().map(|(_, t)| t).collect();
    t.sort_unstable();
    t
}

fn rows_for(emb: &Matrix, pair: &KgPair, side: Side, ids: &[u64]) -> Matrix {
    let idx: Vec<usize> = ids
        .iter()
        .map(|&id| pair.global_index(side, id).expect("id belongs to the pair"))
        .collect();
    emb.select_rows(&idx)
}

fn structural_candidates(
    cfg: &PipelineConfig,
    prep: &Prepared,
    emb: &Matrix,
) -> Result<(Vec<CandidateSet>, Vec<usize>), PipelineError> {
    let pair = &prep.dataset.pair;
    let cols = test_targets(prep);
    let targets = rows_for(emb, pair, Side::Target, &cols);
    let col_of: HashMap<u64, usize> = cols.iter().enumerate().map(|(j, &t)| (t, j)).collect();
    let out: Result<Vec<(CandidateSet, usize)>, _> = prep
        .test
        .pairs()
        .par_iter()
        .map(|&(s, t)| {
            let i = pair.global_index(Side::Source, s).expect("test source in pair");
            let row = similarity_row(emb.row(i), &targets, Metric::Cosine)?;
            let set = top_k_from_scores(s, Channel::Structural, &cols, &row, cfg.k);
            Ok((set, rank_at(&row, &cols, col_of[&t])))
        })
        .collect();
    let out = out.map_err(|e: crate::similarity::SimilarityError| fail(Phase::Candidates)(e))?;
    Ok(out.into_iter().unzip())
}

fn name_candidates(cfg: &PipelineConfig, prep: &Prepared) -> Result<(Vec<CandidateSet>, usize), PipelineError> {
    let pair = &prep.dataset.pair;
    let path = cfg
        .word_vectors
        .as_ref()
        .ok_or_else(|| PipelineError::Config("word_vectors is not set".into()))?;
    let vocab = graph_vocabulary([&pair.source, &pair.target]);
    let store = load_word_vectors_for(path, &vocab).map_err(fail(Phase::Names))?;
    let (src, tgt) = match (embed_graph_names(&store, &pair.source), embed_graph_names(&store, &pair.target)) {
        (Ok(s), Ok(t)) => (s, t),
        (Err(NameError::EmptyStore), _) | (_, Err(NameError::EmptyStore)) => {
            // No name token has a vector: every source is out of vocabulary.
            let empty = prep
                .test
                .iter()
                .map(|(s, _)| CandidateSet::empty(s, Channel::Name))
                .collect();
            return Ok((empty, prep.test.len()));
        }
        (Err(e), _) | (_, Err(e)) => return Err(fail(Phase::Names)(e)),
    };
    let cols: Vec<u64> = test_targets(prep)
        .into_iter()
        .filter(|&t| !tgt.oov[pair.target.entity_position(t).expect("target")])
        .collect();
    let positions: Vec<usize> = cols
        .iter()
        .map(|&t| pair.target.entity_position(t).expect("target"))
        .collect();
    let targets = tgt.rows.select_rows(&positions);
    let mut oov_sources = 0;
    let mut sets = Vec::with_capacity(prep.test.len());
    for (s, _) in prep.test.iter() {
        let p = pair.source.entity_position(s).expect("source");
        if src.oov[p] || cols.is_empty() {
            oov_sources += usize::from(src.oov[p]);
            sets.push(CandidateSet::empty(s, Channel::Name));
            continue;
        }
        let row = similarity_row(src.rows.row(p), &targets, Metric::NegativeL2).map_err(fail(Phase::Names))?;
        sets.push(top_k_from_scores(s, Channel::Name, &cols, &row, cfg.k));
    }
    Ok((sets, oov_sources))
}

fn demos(cfg: &PipelineConfig, prep: &Prepared) -> Vec<(String, String)> {
    let pair = &prep.dataset.pair;
    prep.train
        .iter()
        .map(|(s, t)| (display(pair, Side::Source, s), display(pair, Side::Target, t)))
        .filter(|(s, t)| !s.is_empty() && !t.is_empty())
        .take(cfg.demo_count)
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CachedVirtual {
    source: u64,
    entity: VirtualEntity,
}

fn virtual_entities(
    cfg: &PipelineConfig,
    prep: &Prepared,
    backend: &dyn LlmBackend,
    backend_id: Option<&str>,
    cache: &PhaseCache,
) -> Result<Vec<(u64, VirtualEntity)>, PipelineError> {
    let pair = &prep.dataset.pair;
    let demos = demos(cfg, prep);
    let prompts: Vec<(u64, Option<crate::llm::Prompt>)> = prep
        .test
        .iter()
        .map(|(s, _)| {
            let name = display(pair, Side::Source, s);
            (s, build_virtual_entity_prompt(&name, &demos, &cfg.target_language).ok())
        })
        .collect();
    let key = backend_id.map(|id| {
        let mut parts: Vec<Vec<u8>> = vec![
            b"virtual-v1".to_vec(),
            id.as_bytes().to_vec(),
            cfg.backend.retry_budget.to_le_bytes().to_vec(),
        ];
        for (s, p) in &prompts {
            parts.push(s.to_le_bytes().to_vec());
            parts.push(p.as_ref().map(|p| p.render()).unwrap_or_default().into_bytes());
        }
        digest(parts.iter().map(Vec::as_slice))
    });
    if let Some(bytes) = key.as_ref().and_then(|k| cache.read("virtual", k, "jsonl")) {
        let parsed: Result<Vec<CachedVirtual>, _> = String::from_utf8_lossy(&bytes)
            .lines()
            .map(serde_json::from_str)
            .collect();
        if let Ok(v) = parsed {
            if v.len() == prompts.len() {
                return Ok(v.into_iter().map(|c| (c.source, c.entity)).collect());
            }
        }
    }
    let retry = cfg.backend.retry_budget;
    let out: Result<Vec<(u64, VirtualEntity)>, PipelineError> = pool(cfg, Phase::Candidates)?.install(|| {
        prompts
            .par_iter()
            .map(|(s, p)| {
                let v = match p {
                    Some(p) => generate_virtual_entity(backend, p, retry).map_err(fail(Phase::Candidates))?,
                    None => VirtualEntity {
                        name: None,
                        responses: Vec::new(),
                    },
                };
                Ok((*s, v))
            })
            .collect()
    });
    let out = out?;
    if let Some(k) = &key {
        let mut text = String::new();
        for (s, v) in &out {
            let rec = CachedVirtual {
                source: *s,
                entity: v.clone(),
            };
            text.push_str(&serde_json::to_string(&rec).map_err(fail(Phase::Candidates))?);
            text.push('\n');
        }
        cache
            .write("virtual", k, "jsonl", text.as_bytes())
            .map_err(fail(Phase::Candidates))?;
    }
    Ok(out)
}

fn edit_candidates(cfg: &PipelineConfig, prep: &Prepared, virtuals: &[(u64, VirtualEntity)]) -> Vec<CandidateSet> {
    let pair = &prep.dataset.pair;
    let cols = test_targets(prep);
    let names: Vec<String> = cols.iter().map(|&t| display(pair, Side::Target, t)).collect();
    let index = EditIndex::new(cols.iter().copied().zip(names.iter().map(String::as_str)), cfg.nfc);
    virtuals
        .iter()
        .map(|(s, v)| match &v.name {
            Some(name) => index.candidates(*s, name, cfg.k),
            None => CandidateSet::empty(*s, Channel::Edit),
        })
        .collect()
}

/// Computes every enabled channel's candidates and writes
/// `candidates/<channel>.tsv`.
pub fn candidate_phase(
    cfg: &PipelineConfig,
    prep: &Prepared,
    structural: &Structural,
    backend: &dyn LlmBackend,
    backend_id: Option<&str>,
    cache: &PhaseCache,
) -> Result<Candidates, PipelineError> {
    let (structural_sets, ranks) = structural_candidates(cfg, prep, &structural.embeddings)?;
    let (name, name_oov_sources) = if cfg.channels.name {
        let (s, n) = name_candidates(cfg, prep)?;
        (Some(s), n)
    } else {
        (None, 0)
    };
    let (edit, virtual_entities) = if cfg.channels.edit && cfg.llm {
        let v = virtual_entities(cfg, prep, backend, backend_id, cache)?;
        (Some(edit_candidates(cfg, prep, &v)), v)
    } else {
        (None, Vec::new())
    };
    let c = Candidates {
        structural: structural_sets,
        structural_ranks: ranks,
        name,
        edit,
        virtual_entities,
        name_oov_sources,
    };
    for ch in Channel::ALL {
        if !cfg.channels.enabled(ch) {
            continue;
        }
        if let Some(sets) = c.channel(ch) {
            let mut buf = Vec::new();
            write_candidate_file(&mut buf, sets).map_err(fail(Phase::Candidates))?;
            write_file(
                &cfg.output_dir.join("candidates").join(format!("{ch}.tsv")),
                &buf,
                Phase::Candidates,
            )?;
        }
    }
    Ok(c)
}

/// Deduplicated union of the enabled channels, structural → name → edit.
pub fn candidate_union(cfg: &PipelineConfig, c: &Candidates, i: usize) -> Vec<u64> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for ch in Channel::ALL {
        if !cfg.channels.enabled(ch) {
            continue;
        }
        if let Some(sets) = c.channel(ch) {
            for t in sets[i].targets() {
                if seen.insert(t) {
                    out.push(t);
                }
            }
        }
    }
    out
}

pub fn align_phase(
    cfg: &PipelineConfig,
    prep: &Prepared,
    cands: &Candidates,
    backend: &dyn LlmBackend,
) -> Result<Vec<Prediction>, PipelineError> {
    let pair = &prep.dataset.pair;
    let retry = cfg.backend.retry_budget;
    let work = |i: usize, s: u64| -> Result<Prediction, PipelineError> {
        let top = cands.structural[i].candidates.first().map(|&(t, _)| t);
        if !cfg.llm {
            return Ok(Prediction {
                source: s,
                predicted: top,
                fallback: false,
                rounds: Vec::new(),
            });
        }
        let union: Vec<Candidate> = candidate_union(cfg, cands, i)
            .into_iter()
            .map(|t| Candidate {
                id: t,
                name: display(pair, Side::Target, t),
            })
            .collect();
        let subject = display(pair, Side::Source, s);
        if union.is_empty() || subject.trim().is_empty() {
            return Ok(Prediction {
                source: s,
                predicted: top,
                fallback: true,
                rounds: Vec::new(),
            });
        }
        let q = ProtocolQuery {
            source: s,
            subject: &subject,
            union: &union,
            fallback: top,
        };
        iterative_predict(backend, &q, mix(cfg.protocol_seed, s), retry).map_err(fail(Phase::Align))
    };
    let sources: Vec<u64> = prep.test.iter().map(|(s, _)| s).collect();
    pool(cfg, Phase::Align)?.install(|| {
        sources
            .par_iter()
            .enumerate()
            .map(|(i, &s)| work(i, s))
            .collect()
    })
}

fn build_report(
    cfg: &PipelineConfig,
    prep: &Prepared,
    structural: &Structural,
    cands: &Candidates,
    predictions: &[Prediction],
) -> AlignmentReport {
    let n = prep.test.len();
    let records: Vec<PredictionRecord> = prep
        .test
        .iter()
        .zip(predictions)
        .enumerate()
        .map(|(i, ((s, t), p))| {
            let provenance = match p.predicted {
                Some(x) => Channel::ALL
                    .into_iter()
                    .filter(|&ch| cfg.channels.enabled(ch) || (ch == Channel::Structural && !cfg.llm))
                    .filter(|&ch| cands.channel(ch).is_some_and(|sets| sets[i].contains(x)))
                    .collect(),
                None => Vec::new(),
            };
            PredictionRecord {
                source: s,
                truth: t,
                predicted: p.predicted,
                correct: p.predicted == Some(t),
                fallback: p.fallback,
                rounds: p.rounds.len(),
                parse_failures: p.parse_failures(),
                provenance,
            }
        })
        .collect();
    let hits = |k: usize| cands.structural_ranks.iter().filter(|&&r| r < k).count() as f64 / n as f64;
    let candidate_hit_rate: BTreeMap<Channel, Option<f64>> = Channel::ALL
        .into_iter()
        .map(|ch| {
            let rate = if cfg.channels.enabled(ch) {
                cands.channel(ch).map(|sets| candidate_hit_rate(sets, &prep.test))
            } else {
                None
            };
            (ch, rate)
        })
        .collect();
    let union_hits = prep
        .test
        .iter()
        .enumerate()
        .filter(|&(i, (_, t))| candidate_union(cfg, cands, i).contains(&t))
        .count();
    AlignmentReport {
        test_pairs: n,
        k: cfg.k,
        llm: cfg.llm,
        channels: cfg.channels,
        hits_at_1: records.iter().filter(|r| r.correct).count() as f64 / n as f64,
        hits_at_10: hits(10),
        structural_hits_at_1: hits(1),
        candidate_hit_rate,
        union_hit_rate: union_hits as f64 / n as f64,
        rounds: RoundStats::from_counts(records.iter().map(|r| r.rounds)),
        fallbacks: records.iter().filter(|r| r.fallback).count(),
        parse_failures: records.iter().map(|r| r.parse_failures).sum(),
        virtual_entity_failures: cands.virtual_entities.iter().filter(|(_, v)| v.name.is_none()).count(),
        name_oov_sources: cands.name_oov_sources,
        training: structural.summary.clone(),
        predictions: records,
    }
}

fn write_transcripts(
    cfg: &PipelineConfig,
    cands: &Candidates,
    predictions: &[Prediction],
) -> Result<(), PipelineError> {
    let mut records: Vec<TranscriptRecord> = cands
        .virtual_entities
        .iter()
        .map(|(s, v)| TranscriptRecord::for_virtual_entity(*s, v))
        .collect();
    for p in predictions {
        records.extend(TranscriptRecord::for_prediction(p));
    }
    let path = cfg.output_dir.join("transcripts.jsonl");
    let file = fs::File::create(&path).map_err(fail(Phase::Report))?;
    write_transcript(BufWriter::new(file), &records).map_err(fail(Phase::Report))
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timing {
    pub seconds: BTreeMap<String, f64>,
    pub training_cache_hit: bool,
}

fn timed<T>(timing: &mut Timing, phase: Phase, f: impl FnOnce() -> Result<T, PipelineError>) -> Result<T, PipelineError> {
    let t0 = Instant::now();
    let r = f();
    timing.seconds.insert(phase.to_string(), t0.elapsed().as_secs_f64());
    r
}

/// Everything a run leaves behind, for callers that want more than the report.
pub struct RunArtifacts {
    pub report: AlignmentReport,
    pub candidates: Candidates,
    pub predictions: Vec<Prediction>,
    pub timing: Timing,
}

fn prepare_output(cfg: &PipelineConfig) -> Result<(), PipelineError> {
    fs::create_dir_all(&cfg.output_dir).map_err(|e| PipelineError::Phase {
        phase: Phase::Load,
        message: format!("{}: {e}", cfg.output_dir.display()),
    })
}

/// Load and train only.
pub fn run_training(cfg: &PipelineConfig) -> Result<TrainSummary, PipelineError> {
    let prep = prepare(cfg)?;
    prepare_output(cfg)?;
    let cache = PhaseCache::new(cfg.cache_dir());
    Ok(structural_phase(cfg, &prep, &cache)?.summary)
}

/// Load, train and write candidate files.
pub fn run_candidates(cfg: &PipelineConfig) -> Result<Candidates, PipelineError> {
    let prep = prepare(cfg)?;
    prepare_output(cfg)?;
    let cache = PhaseCache::new(cfg.cache_dir());
    let s = structural_phase(cfg, &prep, &cache)?;
    let backend = make_backend(cfg, &prep.dataset)?;
    let id = backend_descriptor(cfg, &prep);
    candidate_phase(cfg, &prep, &s, backend.as_ref(), id.as_deref(), &cache)
}

/// Full run with the configured backend.
pub fn run_alignment(cfg: &PipelineConfig) -> Result<AlignmentReport, PipelineError> {
    let prep = prepare(cfg)?;
    let backend = make_backend(cfg, &prep.dataset)?;
    let id = backend_descriptor(cfg, &prep);
    Ok(run_prepared(cfg, prep, backend.as_ref(), id.as_deref())?.report)
}

/// Full run with a caller-supplied backend. Model output is cached only when
/// `backend_id` is given.
pub fn run_alignment_with(
    cfg: &PipelineConfig,
    backend: &dyn LlmBackend,
    backend_id: Option<&str>,
) -> Result<RunArtifacts, PipelineError> {
    let prep = prepare(cfg)?;
    run_prepared(cfg, prep, backend, backend_id)
}

fn run_prepared(
    cfg: &PipelineConfig,
    prep: Prepared,
    backend: &dyn LlmBackend,
    backend_id: Option<&str>,
) -> Result<RunArtifacts, PipelineError> {
    prepare_output(cfg)?;
    let cache = PhaseCache::new(cfg.cache_dir());
    let mut timing = Timing::default();
    let s = timed(&mut timing, Phase::Train, || structural_phase(cfg, &prep, &cache))?;
    timing.training_cache_hit = s.cache_hit;
    let c = timed(&mut timing, Phase::Candidates, || {
        candidate_phase(cfg, &prep, &s, backend, backend_id, &cache)
    })?;
    let p = timed(&mut timing, Phase::Align, || align_phase(cfg, &prep, &c, backend))?;
    let report = timed(&mut timing, Phase::Report, || {
        let report = build_report(cfg, &prep, &s, &c, &p);
        write_transcripts(cfg, &c, &p)?;
        write_file(&cfg.output_dir.join("report.json"), report.to_json().as_bytes(), Phase::Report)?;
        write_file(
            &cfg.output_dir.join("summary.txt"),
            report.summary_table().as_bytes(),
            Phase::Report,
        )?;
        Ok(report)
    })?;
    let t = serde_json::to_vec_pretty(&timing).map_err(fail(Phase::Report))?;
    write_file(&cfg.output_dir.join("timing.json"), &t, Phase::Report)?;
    Ok(RunArtifacts {
        report,
        candidates: c,
        predictions: p,
        timing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRun {
    pub path: PathBuf,
    pub hits_at_1: f64,
    pub hits_at_10: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub runs: Vec<EvalRun>,
    pub hits_at_1_mean: f64,
    pub hits_at_1_std: f64,
    pub hits_at_10_mean: f64,
    pub hits_at_10_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Averages reports from several run directories (or report files).
pub fn evaluate_reports(paths: &[PathBuf]) -> Result<EvalSummary, PipelineError> {
    if paths.is_empty() {
        return Err(PipelineError::Config("no reports given".into()));
    }
    let mut runs = Vec::new();
    for p in paths {
        let file = if p.is_dir() { p.join("report.json") } else { p.clone() };
        let text = fs::read_to_string(&file).map_err(|e| PipelineError::Phase {
            phase: Phase::Eval,
            message: format!("{}: {e}", file.display()),
        })?;
        let r: AlignmentReport = serde_json::from_str(&text).map_err(|e| PipelineError::Phase {
            phase: Phase::Eval,
            message: format!("{}: {e}", file.display()),
        })?;
        runs.push(EvalRun {
            path: file,
            hits_at_1: r.hits_at_1,
            hits_at_10: r.hits_at_10,
        });
    }
    let h1: Vec<f64> = runs.iter().map(|r| r.hits_at_1).collect();
    let h10: Vec<f64> = runs.iter().map(|r| r.hits_at_10).collect();
    let (hits_at_1_mean, hits_at_1_std) = mean_std(&h1);
    let (hits_at_10_mean, hits_at_10_std) = mean_std(&h10);
    Ok(EvalSummary {
        runs,
        hits_at_1_mean,
        hits_at_1_std,
        hits_at_10_mean,
        hits_at_10_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mix_spreads_nearby_inputs() {
        assert_ne!(mix(0, 1), mix(0, 2));
        assert_ne!(mix(1, 0), mix(0, 1));
        assert_eq!(mix(5, 7), mix(5, 7));
    }

    #[test]
    fn mean_and_spread() {
        let (m, s) = mean_std(&[0.5, 1.0]);
        assert_eq!(m, 0.75);
        assert_eq!(s, 0.25);
    }
}
