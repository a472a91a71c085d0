//! SQuAD-v2 JSON layout, as read by the corpus loader and written by export.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadFile {
    #[serde(default = "default_version")]
    pub version: String,
    pub data: Vec<SquadArticle>,
}

fn default_version() -> String {
    "v2.0".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadArticle {
    #[serde(default)]
    pub title: String,
    pub paragraphs: Vec<SquadParagraph>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadParagraph {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document_id: Option<String>,
    pub context: String,
    #[serde(default)]
    pub qas: Vec<SquadQa>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadQa {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub answers: Vec<SquadAnswer>,
    #[serde(default)]
    pub is_impossible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquadAnswer {
    pub text: String,
    /// Character offset into the paragraph context.
    pub answer_start: usize,
}

impl SquadFile {
    pub fn new(data: Vec<SquadArticle>) -> Self {
        Self { version: default_version(), data }
    }

    /// Pretty JSON with a trailing newline; byte-stable for equal values.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("squad file serializes");
        out.push(b'\n');
        out
    }

    pub fn question_count(&self) -> usize {
        self.data.iter().flat_map(|a| &a.paragraphs).map(|p| p.qas.len()).sum()
    }
}
