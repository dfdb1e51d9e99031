//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Tolerances and time budgets are pinned below.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use entalign::embed::{
    forward, init_parameters, loss_and_gradients, materialize_reflection, reflect, update_negative_pool, ModelParams,
    TrainConfig,
};
use entalign::kg::{build_pair_adjacency, load_dataset, parse_kg_files, split_seeds, AlignmentSeedSet};
use entalign::llm::{iterative_predict, Candidate, FnBackend, NameOracle, ProtocolQuery, RoundOutcome};
use entalign::matrix::Matrix;
use entalign::pipeline::{
    hits_at_k, run_alignment, write_synthetic_dataset, Ablation, PipelineConfig, RankingSource, SynthSpec,
};
use entalign::similarity::{edit_distance, similarity_matrix, Metric};
use entalign::synth::generate_synthetic_pair;

const REFLECTION_VECTORS: usize = 1000;
const REFLECTION_DIM: usize = 300;
const ORTHOGONALITY_TOL: f64 = 1e-5;
const ISOMETRY_REL_TOL: f64 = 1e-9;

const FD_STEP: f64 = 1e-5;
const GRAD_REL_TOL: f64 = 1e-4;
/// Denominator floor of the relative error `|a − n| / max(|a|, |n|, floor)`.
const GRAD_REL_FLOOR: f64 = 1e-6;

/// Achieved 0.986–0.993 over the desk runs.
const STRUCTURAL_HITS10_MIN: f64 = 0.8;

const DBP15K_ENV: &str = "DBP15K_ZH_EN";
const ZH_EN_ENGLISH: (usize, usize, usize) = (19_572, 1_323, 95_142);
const ZH_EN_CHINESE: (usize, usize, usize) = (19_388, 1_701, 70_414);

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(budget: Duration, t0: Instant) -> Result<(), String> {
    let e = t0.elapsed();
    ensure(e <= budget, || format!("took {:.1}s, budget {:.0}s", e.as_secs_f64(), budget.as_secs_f64()))
}

fn unit_vector(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

fn l2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn gram(m: &Matrix) -> Vec<f64> {
    let d = m.rows();
    let mut c = vec![0.0; d * d];
    // SAFETY: `m` is a dense row-major d×d buffer and `c` holds d×d values.
    unsafe {
        matrixmultiply::dgemm(
            d,
            d,
            d,
            1.0,
            m.as_slice().as_ptr(),
            1,
            d as isize,
            m.as_slice().as_ptr(),
            d as isize,
            1,
            0.0,
            c.as_mut_ptr(),
            d as isize,
            1,
        );
    }
    c
}

fn reflection() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = REFLECTION_DIM;
    let (mut worst_orth, mut worst_norm, mut worst_dist) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..REFLECTION_VECTORS {
        let h = unit_vector(&mut rng, d);
        let m = materialize_reflection(&h);
        let g = gram(&m);
        let mut fro = 0.0;
        for i in 0..d {
            for j in 0..d {
                let e = g[i * d + j] - if i == j { 1.0 } else { 0.0 };
                fro += e * e;
            }
        }
        worst_orth = worst_orth.max(fro.sqrt());

        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (rx, ry) = (reflect(&h, &x).map_err(|e| e.to_string())?, reflect(&h, &y).map_err(|e| e.to_string())?);
        worst_norm = worst_norm.max((l2(&rx) - l2(&x)).abs() / l2(&x));
        let dxy = l2(&sub(&x, &y));
        worst_dist = worst_dist.max((l2(&sub(&rx, &ry)) - dxy).abs() / dxy);
    }
    ensure(worst_orth <= ORTHOGONALITY_TOL, || format!("‖MᵀM − I‖_F = {worst_orth:e}"))?;
    ensure(worst_norm <= ISOMETRY_REL_TOL, || format!("norm drift {worst_norm:e}"))?;
    ensure(worst_dist <= ISOMETRY_REL_TOL, || format!("distance drift {worst_dist:e}"))?;
    within(Duration::from_secs(5), t0)?;
    Ok(format!(
        "{REFLECTION_VECTORS} vectors at d={d}: max ‖MᵀM − I‖_F {worst_orth:.2e}, norm drift {worst_norm:.2e}, distance drift {worst_dist:.2e}"
    ))
}

fn block_mut(p: &mut ModelParams, b: usize) -> &mut Matrix {
    match b {
        0 => &mut p.entity_init,
        1 => &mut p.relation_emb,
        _ => &mut p.attention,
    }
}

fn gradients() -> Outcome {
    let t0 = Instant::now();
    let (pair, reference) = generate_synthetic_pair(10, 3, 20, 5).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        dim: 8,
        layers: 2,
        rng_seed: 3,
        ..TrainConfig::default()
    };
    let params = init_parameters(&pair, &cfg).map_err(|e| e.to_string())?;
    let index = build_pair_adjacency(&pair);
    let emb = forward(&params, &index).map_err(|e| e.to_string())?;
    let pool = update_negative_pool(&emb, &reference, &pair).map_err(|e| e.to_string())?;
    let pairs: Vec<(usize, usize)> = reference
        .iter()
        .map(|(s, t)| {
            (
                pair.global_index(entalign::kg::Side::Source, s).unwrap(),
                pair.global_index(entalign::kg::Side::Target, t).unwrap(),
            )
        })
        .collect();
    let loss_at = |p: &ModelParams| loss_and_gradients(p, &index, &pairs, &pool, cfg.margin).map(|r| r.0);
    let (loss, grads) = loss_and_gradients(&params, &index, &pairs, &pool, cfg.margin).map_err(|e| e.to_string())?;
    ensure(loss > 0.0, || "loss is zero; the check would be vacuous".into())?;

    let names = ["entity_init", "relation_emb", "attention"];
    let analytic = [&grads.entity_init, &grads.relation_emb, &grads.attention];
    let mut worst = (0.0f64, "");
    let mut checked = 0usize;
    for b in 0..3 {
        let n = block_mut(&mut params.clone(), b).as_slice().len();
        ensure(analytic[b].as_slice().len() == n, || format!("{} gradient has wrong shape", names[b]))?;
        for i in 0..n {
            let mut plus = params.clone();
            block_mut(&mut plus, b).as_mut_slice()[i] += FD_STEP;
            let mut minus = params.clone();
            block_mut(&mut minus, b).as_mut_slice()[i] -= FD_STEP;
            let lp = loss_at(&plus).map_err(|e| e.to_string())?;
            let lm = loss_at(&minus).map_err(|e| e.to_string())?;
            let numeric = (lp - lm) / (2.0 * FD_STEP);
            let a = analytic[b].as_slice()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_REL_FLOOR);
            if rel > worst.0 {
                worst = (rel, names[b]);
            }
            checked += 1;
        }
    }
    ensure(worst.0 <= GRAD_REL_TOL, || {
        format!("max relative error {:.3e} in {}", worst.0, worst.1)
    })?;
    within(Duration::from_secs(60), t0)?;
    Ok(format!(
        "{checked} parameters over 3 blocks, loss {loss:.4}: max relative error {:.2e} ({})",
        worst.0, worst.1
    ))
}

/// Direct transcription of the recursive definition.
fn naive_edit(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let cost = usize::from(a[a.len() - 1] != b[b.len() - 1]);
    let (ia, ib) = (&a[..a.len() - 1], &b[..b.len() - 1]);
    (naive_edit(ia, b) + 1)
        .min(naive_edit(a, ib) + 1)
        .min(naive_edit(ia, ib) + cost)
}

fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| alphabet.iter().map(move |c| format!("{s}{c}")))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn edit_oracle() -> Outcome {
    let t0 = Instant::now();
    let words = all_strings(&['a', 'b', 'c'], 4);
    let chars: Vec<Vec<char>> = words.iter().map(|w| w.chars().collect()).collect();
    let n = words.len();
    let mut table = vec![0usize; n * n];
    for i in 0..n {
        for j in 0..n {
            let dp = edit_distance(&words[i], &words[j]);
            let naive = naive_edit(&chars[i], &chars[j]);
            ensure(dp == naive, || format!("d({:?}, {:?}): dp {dp}, naive {naive}", words[i], words[j]))?;
            table[i * n + j] = dp;
        }
    }
    for i in 0..n {
        for j in 0..n {
            let d = table[i * n + j];
            ensure((d == 0) == (i == j), || format!("identity fails for {:?}, {:?}", words[i], words[j]))?;
            ensure(d == table[j * n + i], || format!("asymmetric on {:?}, {:?}", words[i], words[j]))?;
            for k in 0..n {
                ensure(d <= table[i * n + k] + table[k * n + j], || {
                    format!("triangle fails on {:?}, {:?}, {:?}", words[i], words[k], words[j])
                })?;
            }
        }
    }
    let kitten = edit_distance("kitten", "sitting");
    ensure(kitten == 3, || format!("d(kitten, sitting) = {kitten}"))?;
    within(Duration::from_secs(10), t0)?;
    Ok(format!(
        "{} pairs over {{a,b,c}}^≤4 match the recursion; metric axioms hold; d(kitten, sitting) = 3",
        n * n
    ))
}

fn candidates(n: usize) -> Vec<Candidate> {
    (0..n as u64)
        .map(|i| Candidate {
            id: 1000 + i,
            name: format!("target {i}"),
        })
        .collect()
}

fn protocol() -> Outcome {
    let t0 = Instant::now();
    let always_a = FnBackend(|_: &entalign::llm::Prompt| "A".to_string());
    let mut trials = 0usize;
    for n in 1..=50usize {
        let union = candidates(n);
        let expected_rounds = 1 + n.saturating_sub(4).div_ceil(3);
        for seed in 0..4u64 {
            let q = ProtocolQuery {
                source: 1,
                subject: "subject",
                union: &union,
                fallback: Some(union[0].id),
            };
            let p = iterative_predict(&always_a, &q, seed, 2).map_err(|e| e.to_string())?;
            ensure(p.rounds.len() == expected_rounds, || {
                format!("|O|={n}: {} rounds, expected {expected_rounds}", p.rounds.len())
            })?;
            let mut fresh: Vec<u64> = p.rounds.iter().flat_map(|r| r.fresh.iter().copied()).collect();
            fresh.sort_unstable();
            let all: Vec<u64> = union.iter().map(|c| c.id).collect();
            ensure(fresh == all, || format!("|O|={n}: fresh options are not a permutation of O"))?;

            // Oracle soundness, with the truth inside and outside the union.
            let truth_pos = (seed as usize * 7 + n) % n;
            let inside = NameOracle::new(HashMap::from([("subject".to_string(), union[truth_pos].name.clone())]));
            let p = iterative_predict(&inside, &q, seed, 2).map_err(|e| e.to_string())?;
            ensure(p.predicted == Some(union[truth_pos].id) && !p.fallback, || {
                format!("|O|={n}: oracle missed an offered truth")
            })?;
            let outside = NameOracle::new(HashMap::from([("subject".to_string(), "absent".to_string())]));
            let p = iterative_predict(&outside, &q, seed, 2).map_err(|e| e.to_string())?;
            ensure(p.fallback && p.rounds.iter().all(|r| r.outcome == RoundOutcome::None), || {
                format!("|O|={n}: oracle selected an option without the truth")
            })?;
            trials += 1;
        }
    }
    within(Duration::from_secs(5), t0)?;
    Ok(format!(
        "|O| in 1..=50 x 4 seeds ({trials} unions): round counts, single fresh presentation and oracle soundness hold"
    ))
}

fn metric_oracle() -> Outcome {
    let n = 20;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.05 * ((i + j) % 3) as f64 }).collect())
        .collect();
    let eye = Matrix::from_rows(&(0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect::<Vec<_>>());
    let m = similarity_matrix(&Matrix::from_rows(&rows), &eye, Metric::Cosine)
        .and_then(|m| m.with_ids((0..n as u64).collect(), (100..100 + n as u64).collect()))
        .map_err(|e| e.to_string())?;
    let test = AlignmentSeedSet::new((0..n as u64).map(|i| (i, 100 + i)).collect()).map_err(|e| e.to_string())?;
    for k in [1, 10] {
        let h = hits_at_k(RankingSource::Matrix(&m), &test, k).map_err(|e| e.to_string())?;
        ensure(h == 1.0, || format!("identity-like matrix gives Hits@{k} = {h}"))?;
    }
    let two = AlignmentSeedSet::new(vec![(0, 100), (1, 101)]).map_err(|e| e.to_string())?;
    let preds = BTreeMap::from([(0, Some(100)), (1, Some(105))]);
    let h = hits_at_k(RankingSource::Predictions(&preds), &two, 1).map_err(|e| e.to_string())?;
    ensure(h == 0.5, || format!("2-pair list with one error gives Hits@1 = {h}"))?;
    Ok("uniquely maximal rows give Hits@1 = Hits@10 = 1.0; one error in two gives 0.5".into())
}

struct DeskRun {
    report_json: Vec<u8>,
}

fn desk_config(root: &Path, out: &str) -> Result<PipelineConfig, String> {
    let data = root.join("data");
    let cfg_path = data.join("pipeline.toml");
    if !cfg_path.exists() {
        write_synthetic_dataset(&data, &SynthSpec::default()).map_err(|e| e.to_string())?;
    }
    let mut cfg = PipelineConfig::load(&cfg_path).map_err(|e| e.to_string())?;
    cfg.output_dir = root.join(out);
    Ok(cfg)
}

fn end_to_end(root: &Path, first: &mut Option<DeskRun>) -> Outcome {
    let t0 = Instant::now();
    let cfg = desk_config(root, "full")?;
    ensure(cfg.train.epochs == 12 && cfg.seed_fraction == 0.3, || "unexpected desk defaults".into())?;
    let full = run_alignment(&cfg).map_err(|e| e.to_string())?;
    let report_json = fs::read(cfg.output_dir.join("report.json")).map_err(|e| e.to_string())?;

    let mut ablated = desk_config(root, "structural-only")?;
    for a in [Ablation::Llm, Ablation::Name, Ablation::Edit] {
        ablated.ablate(a);
    }
    let s = run_alignment(&ablated).map_err(|e| e.to_string())?;
    *first = Some(DeskRun { report_json });

    ensure(full.test_pairs == 140, || format!("{} test pairs, expected 140", full.test_pairs))?;
    ensure(full.hits_at_1 == 1.0, || format!("full pipeline Hits@1 = {}", full.hits_at_1))?;
    ensure(s.hits_at_10 >= STRUCTURAL_HITS10_MIN, || {
        format!("structural-only Hits@10 = {:.4} < {STRUCTURAL_HITS10_MIN}", s.hits_at_10)
    })?;
    within(Duration::from_secs(300), t0)?;
    Ok(format!(
        "full Hits@1 {:.4} ({} fallbacks); structural-only Hits@1 {:.4}, Hits@10 {:.4} (threshold {STRUCTURAL_HITS10_MIN}); {:.1}s",
        full.hits_at_1,
        full.fallbacks,
        s.hits_at_1,
        s.hits_at_10,
        t0.elapsed().as_secs_f64()
    ))
}

fn determinism(root: &Path, first: &Option<DeskRun>) -> Outcome {
    let first = first.as_ref().ok_or("the end-to-end run did not produce a report")?;
    let cfg = desk_config(root, "full-again")?;
    run_alignment(&cfg).map_err(|e| e.to_string())?;
    let again = fs::read(cfg.output_dir.join("report.json")).map_err(|e| e.to_string())?;
    ensure(again == first.report_json, || "report.json differs between runs".into())?;
    Ok(format!("two runs in separate output directories: report.json identical ({} bytes)", again.len()))
}

fn write_side(dir: &Path, suffix: u8, uri: &str, ent_base: u64, rel_base: u64, counts: (usize, usize, usize), seed: u64) {
    let (ne, nr, nt) = counts;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ents = String::new();
    for i in 0..ne as u64 {
        let _ = writeln!(ents, "{}\t{uri}resource/Entity_{i}", ent_base + i);
    }
    let mut rels = String::new();
    for i in 0..nr as u64 {
        let _ = writeln!(rels, "{}\t{uri}property/rel{i}", rel_base + i);
    }
    let mut seen = HashSet::new();
    let mut tris = String::new();
    while seen.len() < nt {
        let t = (
            ent_base + rng.gen_range(0..ne as u64),
            rel_base + rng.gen_range(0..nr as u64),
            ent_base + rng.gen_range(0..ne as u64),
        );
        if seen.insert(t) {
            let _ = writeln!(tris, "{}\t{}\t{}", t.0, t.1, t.2);
        }
    }
    fs::write(dir.join(format!("ent_ids_{suffix}")), ents).unwrap();
    fs::write(dir.join(format!("rel_ids_{suffix}")), rels).unwrap();
    fs::write(dir.join(format!("triples_{suffix}")), tris).unwrap();
}

/// Same file names, id layout and URI-style names as the ZH-EN release, with
/// Table 1 counts and 15,000 reference pairs.
fn dbp15k_fixture(dir: &Path) {
    let zh_ents = ZH_EN_CHINESE.0 as u64;
    let zh_rels = ZH_EN_CHINESE.1 as u64;
    write_side(dir, 1, "http://zh.dbpedia.org/", 0, 0, ZH_EN_CHINESE, 1);
    write_side(dir, 2, "http://dbpedia.org/", zh_ents, zh_rels, ZH_EN_ENGLISH, 2);
    let mut refs = String::new();
    for i in 0..15_000u64 {
        let _ = writeln!(refs, "{i}\t{}", zh_ents + (i * 5) % ZH_EN_ENGLISH.0 as u64);
    }
    fs::write(dir.join("ref_ent_ids"), refs).unwrap();
}

fn dbp15k(root: &Path) -> Outcome {
    let (dir, variant): (PathBuf, String) = match std::env::var_os(DBP15K_ENV) {
        Some(d) => (PathBuf::from(&d), format!("{DBP15K_ENV}={}", PathBuf::from(&d).display())),
        None => {
            let d = root.join("dbp15k_zh_en");
            fs::create_dir_all(&d).map_err(|e| e.to_string())?;
            dbp15k_fixture(&d);
            (d, format!("layout fixture; set {DBP15K_ENV} to parse the release"))
        }
    };
    let en = parse_kg_files(dir.join("ent_ids_2"), dir.join("rel_ids_2"), dir.join("triples_2"))
        .map_err(|e| e.to_string())?;
    let got = (en.num_entities(), en.num_relations(), en.num_triples());
    ensure(got == ZH_EN_ENGLISH, || format!("English side counts {got:?}, expected {ZH_EN_ENGLISH:?}"))?;
    let ds = load_dataset(&dir).map_err(|e| e.to_string())?;
    ensure(ds.reference.len() == 15_000, || format!("{} reference pairs", ds.reference.len()))?;
    let (train, test) = split_seeds(&ds.reference, 0.3, 0).map_err(|e| e.to_string())?;
    ensure(train.len() == 4_500 && test.len() == 10_500, || "30/70 split sizes differ".into())?;
    Ok(format!(
        "English side {} / {} / {}; 15000 reference pairs split 4500 / 10500 ({variant})",
        got.0, got.1, got.2
    ))
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let r = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .map_or_else(|| "panicked".into(), |m| format!("panicked: {m}")))
    });
    let secs = t0.elapsed().as_secs_f64();
    let (tag, msg, ok) = match r {
        Ok(m) => ("PASS", m, true),
        Err(m) => ("FAIL", m, false),
    };
    println!("{tag} [{id}] {name}: {msg} [{secs:.2}s]");
    ok
}

fn main() {
    let root = tempfile::tempdir().expect("temp dir");
    let mut first = None;
    let results = [
        run(1, "reflection orthogonality", reflection),
        run(2, "gradient check", gradients),
        run(3, "edit distance oracle", edit_oracle),
        run(4, "multi-choice protocol", protocol),
        run(5, "metric oracle", metric_oracle),
        run(6, "end-to-end desk run", || end_to_end(root.path(), &mut first)),
        run(7, "determinism", || determinism(root.path(), &first)),
        run(8, "DBP15K layout", || dbp15k(root.path())),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
