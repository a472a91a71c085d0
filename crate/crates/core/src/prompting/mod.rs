//! Prompt templates, rendering, and parsers for the three model output
//! shapes (indexed question lists, Q/A blocks, schema'd JSON summaries).

mod parse;
mod summary;
mod templates;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{parse_indexed_list, parse_qa_block, AnswerOutcome};
pub use summary::{
    parse_summary, parse_summary_output, render_summary_as_context, Summary, SummaryRecord, SummarySchema,
};

/// Placeholders a template body may contain.
pub const PLACEHOLDERS: [&str; 4] = ["input_context", "input_summary", "input_questions", "question_num"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dataset {
    Radqa,
    Mimicqa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Summarization,
    QuestionGen,
    AnswerDistill,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    DirectInstruction,
    TempAnneal,
    QuestionPrefix,
    NoOverlap,
    SumDirect,
    SumNoOverlap,
    SumQuestionPrefix,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaVariant {
    Full,
    Incomplete,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PromptError {
    #[error("no value supplied for placeholder `{0}`")]
    MissingVar(String),
    #[error("placeholder `{0}` does not occur in the template")]
    UnknownVar(String),
    #[error("no built-in {stage} template for {dataset}{detail}")]
    NoTemplate { dataset: Dataset, stage: Stage, detail: String },
    #[error("unknown {kind} `{value}`")]
    UnknownName { kind: &'static str, value: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no indexed items found")]
    NoIndexedItems,
    #[error("expected {expected} items, found {}", items.len())]
    CountMismatch { expected: usize, items: Vec<String> },
    #[error("no Q/A pairs found")]
    EmptyBlock,
    #[error("question without an answer line: {question:?}")]
    MissingAnswer { question: String },
    #[error("no JSON object found")]
    NoJsonObject,
    #[error("value for `{key}` must be text or a list of texts, found {found}")]
    BadValue { key: String, found: String },
    #[error("free-text summaries have no JSON schema to parse against")]
    NoSchema,
    #[error("empty summary")]
    EmptySummary,
}

macro_rules! names {
    ($ty:ty, $kind:literal, { $($variant:path => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(self) -> &'static str {
                match self { $($variant => $name),+ }
            }
        }
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
        impl FromStr for $ty {
            type Err = PromptError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(PromptError::UnknownName { kind: $kind, value: other.to_string() }),
                }
            }
        }
    };
}

names!(Dataset, "dataset", { Dataset::Radqa => "radqa", Dataset::Mimicqa => "mimicqa" });
names!(Stage, "stage", {
    Stage::Summarization => "summarization",
    Stage::QuestionGen => "question_gen",
    Stage::AnswerDistill => "answer_distill",
});
names!(StrategyKind, "strategy", {
    StrategyKind::DirectInstruction => "direct_instruction",
    StrategyKind::TempAnneal => "temp_anneal",
    StrategyKind::QuestionPrefix => "question_prefix",
    StrategyKind::NoOverlap => "no_overlap",
    StrategyKind::SumDirect => "sum_direct",
    StrategyKind::SumNoOverlap => "sum_no_overlap",
    StrategyKind::SumQuestionPrefix => "sum_question_prefix",
});
names!(SchemaVariant, "schema variant", {
    SchemaVariant::Full => "full",
    SchemaVariant::Incomplete => "incomplete",
    SchemaVariant::None => "none",
});

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::DirectInstruction,
        StrategyKind::TempAnneal,
        StrategyKind::QuestionPrefix,
        StrategyKind::NoOverlap,
        StrategyKind::SumDirect,
        StrategyKind::SumNoOverlap,
        StrategyKind::SumQuestionPrefix,
    ];

    /// `sum_*` strategies summarize before generating questions.
    pub fn requires_summary(self) -> bool {
        matches!(self, Self::SumDirect | Self::SumNoOverlap | Self::SumQuestionPrefix)
    }

    /// Temperature annealing reuses the direct-instruction prompt.
    fn template_strategy(self) -> StrategyKind {
        match self {
            Self::TempAnneal => Self::DirectInstruction,
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: &'static str,
    pub dataset: Dataset,
    pub stage: Stage,
    pub strategy: Option<StrategyKind>,
    pub schema: Option<SchemaVariant>,
    /// Relative path of the golden copy under `prompts/v1/`.
    pub path: &'static str,
    /// Not shown verbatim in the source material; composed from the shown prompts.
    pub inferred: bool,
    pub body: &'static str,
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{\{([a-z_]+)\}\}").expect("valid regex"))
}

impl PromptTemplate {
    /// Placeholder names that occur in the body.
    pub fn placeholders(&self) -> BTreeSet<&'static str> {
        placeholder_re().captures_iter(self.body).map(|c| c.get(1).expect("group").as_str()).collect()
    }
}

pub fn builtin_templates() -> &'static [PromptTemplate] {
    templates::TEMPLATES
}

pub fn question_template(dataset: Dataset, strategy: StrategyKind) -> &'static PromptTemplate {
    let wanted = strategy.template_strategy();
    builtin_templates()
        .iter()
        .find(|t| t.dataset == dataset && t.stage == Stage::QuestionGen && t.strategy == Some(wanted))
        .expect("every (dataset, strategy) has a question template")
}

pub fn summarization_template(
    dataset: Dataset,
    variant: SchemaVariant,
) -> Result<&'static PromptTemplate, PromptError> {
    builtin_templates()
        .iter()
        .find(|t| t.dataset == dataset && t.stage == Stage::Summarization && t.schema == Some(variant))
        .ok_or_else(|| PromptError::NoTemplate {
            dataset,
            stage: Stage::Summarization,
            detail: format!(" with the {variant} schema"),
        })
}

pub fn distill_template(dataset: Dataset) -> &'static PromptTemplate {
    builtin_templates()
        .iter()
        .find(|t| t.dataset == dataset && t.stage == Stage::AnswerDistill)
        .expect("every dataset has a distillation template")
}

/// Substitute every `{{name}}` in one pass. Substituted values are never
/// rescanned, so a value containing `{{...}}` is inserted literally.
pub fn render(template: &PromptTemplate, vars: &BTreeMap<&str, String>) -> Result<String, PromptError> {
    let used = template.placeholders();
    if let Some(missing) = used.iter().find(|p| !vars.contains_key(*p)) {
        return Err(PromptError::MissingVar(missing.to_string()));
    }
    if let Some(extra) = vars.keys().find(|k| !used.contains(*k)) {
        return Err(PromptError::UnknownVar(extra.to_string()));
    }
    Ok(placeholder_re()
        .replace_all(template.body, |c: &regex::Captures<'_>| vars[&c[1]].clone())
        .into_owned())
}

/// Questions as they are placed into `{{input_questions}}`: one `Q: ` line each.
pub fn format_question_block(questions: &[String]) -> String {
    questions.iter().map(|q| format!("Q: {q}")).collect::<Vec<_>>().join("\n")
}
