//! Synthetic extractive-QA corpus generation for clinical text, plus the
//! evaluation and analysis tooling used to judge the generated data.
//!
//! All answer offsets are character offsets into the paragraph context.

pub mod analysis;
pub mod corpus;
pub mod evaluation;
pub mod exec;
pub mod generation;
pub mod llm;
pub mod prompting;
pub mod squad;
pub mod text;
