//! Desk-scale synthetic datasets: a random graph and an isomorphic copy.
//!
//! Target names are the source names with vowels accented (`a → á`, …),
//! target ids are a permutation of a shifted id range, and target relations
//! are renumbered, so nothing aligns by id. A matching word-vector file can
//! be generated where each accented token's vector is a small perturbation
//! of its plain counterpart.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::kg::{display_name, AlignmentSeedSet, KgError, KgPair, KnowledgeGraph, Triple};

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st", "kl",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

pub const SOURCE_PREFIX: &str = "http://source.example/resource/";
pub const TARGET_PREFIX: &str = "http://target.example/resource/";

/// Accents every ASCII vowel.
pub fn transliterate(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            'a' => 'á',
            'e' => 'é',
            'i' => 'í',
            'o' => 'ó',
            'u' => 'ú',
            'A' => 'Á',
            'E' => 'É',
            'I' => 'Í',
            'O' => 'Ó',
            'U' => 'Ú',
            c => c,
        })
        .collect()
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn vocabulary(size: usize, rng: &mut ChaCha8Rng) -> Vec<String> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let syllables = rng.gen_range(2..=3);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push_str(ONSETS.choose(rng).expect("non-empty"));
            w.push_str(VOWELS.choose(rng).expect("non-empty"));
        }
        if seen.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Random source graph plus an isomorphic target graph and the full
/// ground-truth alignment.
pub fn generate_synthetic_pair(
    entity_count: usize,
    relation_count: usize,
    triple_count: usize,
    rng_seed: u64,
) -> Result<(KgPair, AlignmentSeedSet), KgError> {
    if entity_count == 0 || relation_count == 0 || triple_count == 0 {
        return Err(KgError::Invalid("synthetic counts must be positive".into()));
    }
    if triple_count < entity_count {
        return Err(KgError::Invalid(format!(
            "triple count {triple_count} must be at least the entity count {entity_count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let n = entity_count as u64;

    // Unique two-token names.
    let vocab_size = ((entity_count as f64).sqrt().ceil() as usize * 2).max(8);
    let vocab = vocabulary(vocab_size, &mut rng);
    let mut names = Vec::with_capacity(entity_count);
    let mut used = HashSet::new();
    while names.len() < entity_count {
        let a = vocab.choose(&mut rng).expect("non-empty");
        let b = vocab.choose(&mut rng).expect("non-empty");
        let name = format!("{}_{}", capitalize(a), capitalize(b));
        if used.insert(name.clone()) {
            names.push(name);
        }
    }

    // Spanning tree first so no entity is isolated, then random extra edges.
    let mut triples = Vec::with_capacity(triple_count);
    let mut seen = HashSet::new();
    let mut push = |t: Triple, triples: &mut Vec<Triple>| {
        if seen.insert(t) {
            triples.push(t);
            true
        } else {
            false
        }
    };
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let r = rng.gen_range(0..relation_count as u64);
        let (head, tail) = if rng.gen_bool(0.5) { (i, j) } else { (j, i) };
        push(Triple { head, relation: r, tail }, &mut triples);
    }
    let mut attempts = 0;
    while triples.len() < triple_count {
        let head = rng.gen_range(0..n);
        let tail = rng.gen_range(0..n);
        let relation = rng.gen_range(0..relation_count as u64);
        let t = Triple { head, relation, tail };
        attempts += 1;
        if (head == tail && n > 1) && attempts < 100 * triple_count {
            continue;
        }
        if !push(t, &mut triples) && attempts >= 100 * triple_count {
            triples.push(t);
        }
    }

    let source_entities: BTreeMap<u64, String> = names
        .iter()
        .enumerate()
        .map(|(i, nm)| (i as u64, format!("{SOURCE_PREFIX}{nm}")))
        .collect();
    let source_relations: BTreeMap<u64, String> = (0..relation_count as u64)
        .map(|r| (r, format!("http://source.example/property/p{r}")))
        .collect();

    let mut entity_perm: Vec<u64> = (0..n).collect();
    entity_perm.shuffle(&mut rng);
    let target_id = |i: u64| n + entity_perm[i as usize];
    let mut relation_perm: Vec<u64> = (0..relation_count as u64).collect();
    relation_perm.shuffle(&mut rng);
    let target_rel = |r: u64| relation_count as u64 + relation_perm[r as usize];

    let target_entities: BTreeMap<u64, String> = names
        .iter()
        .enumerate()
        .map(|(i, nm)| (target_id(i as u64), format!("{TARGET_PREFIX}{}", transliterate(nm))))
        .collect();
    let target_relations: BTreeMap<u64, String> = (0..relation_count as u64)
        .map(|r| (target_rel(r), format!("http://target.example/property/q{r}")))
        .collect();
    let mut target_triples: Vec<Triple> = triples
        .iter()
        .map(|t| Triple {
            head: target_id(t.head),
            relation: target_rel(t.relation),
            tail: target_id(t.tail),
        })
        .collect();
    target_triples.shuffle(&mut rng);

    let source = KnowledgeGraph::new(source_entities, source_relations, triples)?;
    let target = KnowledgeGraph::new(target_entities, target_relations, target_triples)?;
    let truth = AlignmentSeedSet::new((0..n).map(|i| (i, target_id(i))).collect())?;
    Ok((KgPair::new(source, target), truth))
}

/// Word-vector text for every name token of the pair. Source tokens get
/// standard normal vectors; a transliterated token gets its source vector
/// plus Gaussian noise of scale `noise`.
pub fn synthetic_word_vectors(pair: &KgPair, dim: usize, noise: f64, rng_seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut tokens = BTreeSet::new();
    for (_, name) in pair.source.entities() {
        for tok in crate::names::tokenize(display_name(name)) {
            tokens.insert(tok);
        }
    }
    let mut out = String::new();
    for tok in &tokens {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
        let accented: Vec<f64> = v
            .iter()
            .map(|x| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x + noise * e
            })
            .collect();
        for (t, vec) in [(tok.clone(), &v), (transliterate(tok), &accented)] {
            out.push_str(&t);
            for x in vec.iter() {
                let _ = write!(out, " {x:.6}");
            }
            out.push('\n');
        }
    }
    out
}
