use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::prompt::PromptKind;
use super::protocol::{Prediction, RoundOutcome, VirtualEntity};
use super::LlmError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Resolution {
    Selected { id: u64 },
    None,
    ParseFailure,
    Generated { name: String },
    ExtractionFailure,
}

/// One line of a transcript file: one model exchange round for one entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub source: u64,
    pub prompt: PromptKind,
    pub round: usize,
    pub options: Vec<u64>,
    pub option_names: Vec<String>,
    pub responses: Vec<String>,
    pub resolution: Resolution,
}

impl TranscriptRecord {
    pub fn for_virtual_entity(source: u64, v: &VirtualEntity) -> Self {
        Self {
            source,
            prompt: PromptKind::VirtualEntity,
            round: 0,
            options: Vec::new(),
            option_names: Vec::new(),
            responses: v.responses.clone(),
            resolution: match &v.name {
                Some(name) => Resolution::Generated { name: name.clone() },
                None => Resolution::ExtractionFailure,
            },
        }
    }

    pub fn for_prediction(p: &Prediction) -> Vec<Self> {
        p.rounds
            .iter()
            .map(|r| Self {
                source: p.source,
                prompt: PromptKind::MultiChoice,
                round: r.round,
                options: r.options.clone(),
                option_names: r.option_names.clone(),
                responses: r.responses.clone(),
                resolution: match r.outcome {
                    RoundOutcome::Selected(id) => Resolution::Selected { id },
                    RoundOutcome::None => Resolution::None,
                    RoundOutcome::ParseFailure => Resolution::ParseFailure,
                },
            })
            .collect()
    }
}

pub fn write_transcript<'a, W: Write>(
    mut w: W,
    records: impl IntoIterator<Item = &'a TranscriptRecord>,
) -> Result<(), LlmError> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_transcript<R: BufRead>(r: R) -> Result<Vec<TranscriptRecord>, LlmError> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::backend::FnBackend;
    use crate::llm::prompt::Prompt;
    use crate::llm::protocol::{iterative_predict, Candidate, ProtocolQuery};

    #[test]
    fn one_record_per_round_round_trips() {
        let union: Vec<Candidate> = (0..9)
            .map(|i| Candidate {
                id: i,
                name: format!("n{i}"),
            })
            .collect();
        let q = ProtocolQuery {
            source: 5,
            subject: "s",
            union: &union,
            fallback: None,
        };
        let p = iterative_predict(&FnBackend(|_: &Prompt| "B".to_string()), &q, 1, 2).unwrap();
        let mut records = vec![TranscriptRecord::for_virtual_entity(
            5,
            &VirtualEntity {
                name: Some("v".into()),
                responses: vec!["v".into()],
            },
        )];
        records.extend(TranscriptRecord::for_prediction(&p));
        assert_eq!(records.len(), 1 + p.rounds.len());

        let mut buf = Vec::new();
        write_transcript(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), records.len());
        assert_eq!(read_transcript(&buf[..]).unwrap(), records);
    }
}
