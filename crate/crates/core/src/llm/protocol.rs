use std::collections::{HashMap, HashSet};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backend::LlmBackend;
use super::parse::{parse_choice, parse_virtual_entity, Choice};
use super::prompt::{build_multichoice_prompt, Prompt, LABELS};
use super::LlmError;

pub const DEFAULT_RETRY_BUDGET: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: u64,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "id")]
pub enum RoundOutcome {
    Selected(u64),
    None,
    /// Every attempt was unparseable; treated as a none answer.
    ParseFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceRound {
    pub round: usize,
    /// Presented order: the carried winner (if any) first, then fresh picks.
    pub options: Vec<u64>,
    pub option_names: Vec<String>,
    pub carried: Option<u64>,
    pub fresh: Vec<u64>,
    /// Raw responses, one per attempt.
    pub responses: Vec<String>,
    pub outcome: RoundOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub source: u64,
    pub predicted: Option<u64>,
    /// The protocol ended without a winner and `predicted` is the fallback.
    pub fallback: bool,
    pub rounds: Vec<ChoiceRound>,
}

impl Prediction {
    pub fn parse_failures(&self) -> usize {
        self.rounds
            .iter()
            .filter(|r| r.outcome == RoundOutcome::ParseFailure)
            .count()
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolQuery<'a> {
    pub source: u64,
    pub subject: &'a str,
    /// Deduplicated candidate union in channel order.
    pub union: &'a [Candidate],
    /// Answer used when the last round yields no winner.
    pub fallback: Option<u64>,
}

/// Upper bound on rounds for a union of `n` candidates.
pub fn max_rounds(n: usize) -> usize {
    let slots = LABELS.len();
    1 + n.saturating_sub(slots).div_ceil(slots - 1)
}

/// Names as shown to the model. A name shared by several candidates gets the
/// entity id appended so options stay distinguishable.
fn shown_names(union: &[Candidate]) -> Vec<String> {
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for c in union {
        *counts.entry(c.name.as_str()).or_default() += 1;
    }
    union
        .iter()
        .map(|c| {
            if counts[c.name.as_str()] > 1 {
                format!("{} (#{})", c.name, c.id)
            } else {
                c.name.clone()
            }
        })
        .collect()
}

fn ask(
    backend: &dyn LlmBackend,
    prompt: &Prompt,
    retry_budget: usize,
) -> Result<(Choice, Vec<String>), LlmError> {
    let mut responses = Vec::new();
    for _ in 0..=retry_budget {
        let text = backend.complete(prompt)?;
        let choice = parse_choice(&text, &prompt.options);
        responses.push(text);
        if choice != Choice::ParseFailure {
            return Ok((choice, responses));
        }
    }
    Ok((Choice::ParseFailure, responses))
}

/// Multi-round elimination over the candidate union. Each round shows up to
/// four options: the current winner plus random unasked candidates. Ends
/// when every candidate has been shown once.
pub fn iterative_predict(
    backend: &dyn LlmBackend,
    query: &ProtocolQuery<'_>,
    rng_seed: u64,
    retry_budget: usize,
) -> Result<Prediction, LlmError> {
    let union = query.union;
    if union.is_empty() {
        return Err(LlmError::Protocol("candidate union is empty".into()));
    }
    let mut ids = HashSet::new();
    if let Some(dup) = union.iter().find(|c| !ids.insert(c.id)) {
        return Err(LlmError::Protocol(format!("candidate {} appears twice", dup.id)));
    }
    let names = shown_names(union);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut unasked: Vec<usize> = (0..union.len()).collect();
    let mut winner: Option<usize> = None;
    let mut rounds = Vec::new();

    while !unasked.is_empty() {
        let slots = LABELS.len() - usize::from(winner.is_some());
        let take = slots.min(unasked.len());
        let mut picked = index::sample(&mut rng, unasked.len(), take).into_vec();
        picked.sort_unstable();
        let mut fresh: Vec<usize> = picked.iter().map(|&p| unasked[p]).collect();
        for &p in picked.iter().rev() {
            unasked.remove(p);
        }
        fresh.shuffle(&mut rng);

        let carried = winner.map(|i| union[i].id);
        let shown: Vec<usize> = winner.into_iter().chain(fresh.iter().copied()).collect();
        let option_names: Vec<String> = shown.iter().map(|&i| names[i].clone()).collect();
        let prompt = build_multichoice_prompt(query.subject, &option_names)?;
        let (choice, responses) = ask(backend, &prompt, retry_budget)?;
        let outcome = match choice {
            Choice::Option(i) => {
                winner = Some(shown[i]);
                RoundOutcome::Selected(union[shown[i]].id)
            }
            Choice::NoneAnswer => {
                winner = None;
                RoundOutcome::None
            }
            Choice::ParseFailure => {
                winner = None;
                RoundOutcome::ParseFailure
            }
        };
        rounds.push(ChoiceRound {
            round: rounds.len(),
            options: shown.iter().map(|&i| union[i].id).collect(),
            option_names,
            carried,
            fresh: fresh.iter().map(|&i| union[i].id).collect(),
            responses,
            outcome,
        });
    }

    let (predicted, fallback) = match winner {
        Some(i) => (Some(union[i].id), false),
        None => (query.fallback, true),
    };
    Ok(Prediction {
        source: query.source,
        predicted,
        fallback,
        rounds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VirtualEntity {
    /// `None` when no attempt produced an extractable name.
    pub name: Option<String>,
    pub responses: Vec<String>,
}

/// Asks for a virtual equivalent entity, re-asking on unextractable output.
pub fn generate_virtual_entity(
    backend: &dyn LlmBackend,
    prompt: &Prompt,
    retry_budget: usize,
) -> Result<VirtualEntity, LlmError> {
    let mut responses = Vec::new();
    for _ in 0..=retry_budget {
        let text = backend.complete(prompt)?;
        let parsed = parse_virtual_entity(&text).ok();
        responses.push(text);
        if parsed.is_some() {
            return Ok(VirtualEntity { name: parsed, responses });
        }
    }
    Ok(VirtualEntity { name: None, responses })
}
