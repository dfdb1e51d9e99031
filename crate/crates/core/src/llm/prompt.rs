use serde::{Deserialize, Serialize};

use super::LlmError;

pub const MASK: &str = "<mask>";
pub const LABELS: [char; 4] = ['A', 'B', 'C', 'D'];

/// Fixed system preamble sent ahead of every prompt.
pub const SYSTEM_PREAMBLE: &str =
    "You are a careful assistant for knowledge graph entity alignment. Follow the requested output format exactly.";

const VIRTUAL_QUERY: &str = "Input: <mask>\nOutput:";
const CHOICE_QUERY: &str = "Entity: <mask>\nOptions:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptKind {
    VirtualEntity,
    MultiChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub kind: PromptKind,
    pub instruction: String,
    pub demos: Vec<(String, String)>,
    /// Query with the mask already replaced by `subject`.
    pub query: String,
    pub subject: String,
    /// Option names in label order; empty for virtual-entity prompts.
    pub options: Vec<String>,
}

impl Prompt {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.instruction);
        out.push_str("\n\n");
        for (input, output) in &self.demos {
            out.push_str(&format!("Input: {input}\nOutput: {output}\n\n"));
        }
        out.push_str(&self.query);
        for (label, name) in LABELS.iter().zip(&self.options) {
            out.push_str(&format!("\n{label}. {name}"));
        }
        if self.kind == PromptKind::MultiChoice {
            out.push_str("\nAnswer:");
        }
        out
    }
}

fn check_subject(name: &str) -> Result<&str, LlmError> {
    let name = name.trim();
    if name.is_empty() {
        return Err(LlmError::Prompt("entity name is empty".into()));
    }
    if name.contains(MASK) {
        return Err(LlmError::Prompt(format!("entity name {name:?} contains the mask placeholder")));
    }
    Ok(name)
}

/// Few-shot prompt asking for the entity's name in `target_language`.
pub fn build_virtual_entity_prompt(
    entity_name: &str,
    demos: &[(String, String)],
    target_language: &str,
) -> Result<Prompt, LlmError> {
    let subject = check_subject(entity_name)?;
    if demos.is_empty() {
        return Err(LlmError::Prompt("at least one demonstration pair is required".into()));
    }
    let instruction = format!(
        "Give the name of the given entity in {target_language}, \
         written the way it would appear as an entity name in a {target_language} knowledge graph. \
         Reply with the name only."
    );
    Ok(Prompt {
        kind: PromptKind::VirtualEntity,
        instruction,
        demos: demos.to_vec(),
        query: VIRTUAL_QUERY.replace(MASK, subject),
        subject: subject.to_string(),
        options: Vec::new(),
    })
}

/// Multi-choice question over 1 to 4 distinct option names, labelled A to D.
pub fn build_multichoice_prompt(entity_name: &str, options: &[String]) -> Result<Prompt, LlmError> {
    let subject = check_subject(entity_name)?;
    if options.is_empty() || options.len() > LABELS.len() {
        return Err(LlmError::Prompt(format!("expected 1 to 4 options, found {}", options.len())));
    }
    for (i, o) in options.iter().enumerate() {
        if o.trim().is_empty() {
            return Err(LlmError::Prompt(format!("option {i} is empty")));
        }
        if options[..i].contains(o) {
            return Err(LlmError::Prompt(format!("duplicate option {o:?}")));
        }
    }
    let last = LABELS[options.len() - 1];
    let instruction = format!(
        "Which of the options refers to the same real-world entity as the given entity? \
         Answer with a single option label (A to {last}). \
         If none of the options is equivalent, answer \"None\"."
    );
    Ok(Prompt {
        kind: PromptKind::MultiChoice,
        instruction,
        demos: Vec::new(),
        query: CHOICE_QUERY.replace(MASK, subject),
        subject: subject.to_string(),
        options: options.to_vec(),
    })
}
