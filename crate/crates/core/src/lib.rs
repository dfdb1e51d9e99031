//! Entity alignment between two knowledge graphs: structural embeddings,
//! name embeddings, candidate retrieval and LLM-assisted selection.

pub mod embed;
pub mod kg;
pub mod llm;
pub mod matrix;
pub mod names;
pub mod pipeline;
pub mod similarity;
pub mod synth;
