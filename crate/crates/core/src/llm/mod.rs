//! Prompts, chat-model backends, response parsing and the multi-round
//! multi-choice protocol.

mod backend;
mod parse;
mod prompt;
mod protocol;
mod transcript;

pub use backend::{BackendError, FnBackend, HttpBackend, LiveConfig, LlmBackend, NameOracle, ScriptedBackend};
pub use parse::{parse_choice, parse_virtual_entity, Choice};
pub use prompt::{
    build_multichoice_prompt, build_virtual_entity_prompt, Prompt, PromptKind, LABELS, MASK, SYSTEM_PREAMBLE,
};
pub use protocol::{
    generate_virtual_entity, iterative_predict, max_rounds, Candidate, ChoiceRound, Prediction, ProtocolQuery,
    RoundOutcome, VirtualEntity, DEFAULT_RETRY_BUDGET,
};
pub use transcript::{read_transcript, write_transcript, Resolution, TranscriptRecord};

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("invalid prompt: {0}")]
    Prompt(String),
    #[error("{0}")]
    Extraction(String),
    #[error("protocol: {0}")]
    Protocol(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("transcript i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript record: {0}")]
    Json(#[from] serde_json::Error),
}
