//! The generation pipeline: optional summarization, question generation,
//! answer distillation and span alignment, composed into the dataset recipes.
//!
//! Units (documents, segments, gold contexts) are independent and run through
//! [`Execution::map`]; results are merged in input order so output files do
//! not depend on thread timing.

mod align;
mod run_dir;
mod scale;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use align::{align_answer, AlignTier, Alignment, AlignmentFailure};
pub use run_dir::{export_squad, read_run, write_run, ContextRecord, RunManifest, StoredRun};
pub use scale::{build_scale_plan, ScaleManifest, ScalePlan, DEFAULT_DOC_COUNTS, DEFAULT_PAIRS_PER_DOC};

use crate::corpus::{extract_sections, segment_document, Document, Segment, RADQA_SECTIONS};
use crate::evaluation::GoldSet;
use crate::exec::Execution;
use crate::llm::{anneal_temperatures, request_tag, CompletionRequest, Gateway, GatewayError};
use crate::prompting::{
    distill_template, format_question_block, parse_indexed_list, parse_qa_block, parse_summary_output,
    question_template, render, summarization_template, AnswerOutcome, Dataset, ParseError, PromptError,
    SchemaVariant, StrategyKind, Summary, SummarySchema,
};
use crate::text;

pub const DEFAULT_MODEL: &str = "gpt-4o";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub dataset: Dataset,
    pub strategy: StrategyKind,
    #[serde(default)]
    pub schema: Option<SchemaVariant>,
    pub model_id: String,
    pub questions_per_unit: usize,
    pub seed: u64,
    pub max_output_tokens: u32,
    /// Questions per round in the over-generate-and-filter recipe.
    pub overgen_batch: usize,
    pub max_rounds: usize,
    pub segment_words: usize,
    #[serde(skip)]
    pub execution: Execution,
}

impl PipelineConfig {
    pub fn new(dataset: Dataset, strategy: StrategyKind) -> Self {
        Self {
            dataset,
            strategy,
            schema: None,
            model_id: DEFAULT_MODEL.to_string(),
            questions_per_unit: 5,
            seed: 0,
            max_output_tokens: 1024,
            overgen_batch: 10,
            max_rounds: 3,
            segment_words: 500,
            execution: Execution::default(),
        }
    }

    pub fn with_schema(mut self, schema: SchemaVariant) -> Self {
        self.schema = Some(schema);
        self
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        let bad = |m: String| Err(GenerationError::Config(m));
        if self.questions_per_unit == 0 {
            return bad("questions per unit must be at least 1".into());
        }
        if self.overgen_batch == 0 || self.max_rounds == 0 || self.segment_words == 0 {
            return bad("overgen_batch, max_rounds and segment_words must be at least 1".into());
        }
        if self.model_id.trim().is_empty() {
            return bad("model id is empty".into());
        }
        match (self.strategy.requires_summary(), self.schema) {
            (true, None) => bad(format!("strategy {} needs a summary schema (full, incomplete or none)", self.strategy)),
            (false, Some(s)) => bad(format!("schema {s} only applies to sum_* strategies, not {}", self.strategy)),
            (true, Some(s)) => SummarySchema::for_dataset(self.dataset, s).map(|_| ()).map_err(Into::into),
            (false, None) => Ok(()),
        }
    }

    fn schema(&self) -> Result<SummarySchema, GenerationError> {
        let variant = self.schema.ok_or_else(|| GenerationError::Config("no summary schema configured".into()))?;
        Ok(SummarySchema::for_dataset(self.dataset, variant)?)
    }
}

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("[{tag}] {reason}")]
    Unit { tag: String, reason: String },
    #[error("no questions to distill")]
    NoQuestions,
    #[error("data: {0}")]
    Data(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("run directory {0} already exists and is not empty")]
    RunExists(String),
}

impl GenerationError {
    /// Errors that end the whole run rather than skipping one unit.
    pub fn is_fatal(&self) -> bool {
        match self {
            GenerationError::Gateway(e) => matches!(e, GatewayError::Auth { .. } | GatewayError::InvalidRequest(_)),
            GenerationError::Unit { .. } | GenerationError::NoQuestions => false,
            _ => true,
        }
    }

    fn unit(tag: &str, reason: impl fmt::Display) -> Self {
        GenerationError::Unit { tag: tag.to_string(), reason: reason.to_string() }
    }
}

/// Where a pair's question came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum PairSource {
    Strategy(StrategyKind),
    GoldQuestion,
}

impl fmt::Display for PairSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairSource::Strategy(s) => f.write_str(s.as_str()),
            PairSource::GoldQuestion => f.write_str("gold_question"),
        }
    }
}

impl From<PairSource> for String {
    fn from(p: PairSource) -> Self {
        p.to_string()
    }
}

impl TryFrom<String> for PairSource {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        if s == "gold_question" {
            return Ok(PairSource::GoldQuestion);
        }
        s.parse::<StrategyKind>().map(PairSource::Strategy).map_err(|e| e.to_string())
    }
}

/// One line of `pairs.jsonl`. Offsets are characters; `answer_start` is
/// relative to the context `[context_char_start, context_char_end)` of the
/// document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub id: String,
    pub question: String,
    pub doc_id: String,
    pub section: String,
    pub context_char_start: usize,
    pub context_char_end: usize,
    pub answer_text: Option<String>,
    pub answer_start: Option<usize>,
    pub unanswerable: bool,
    pub strategy: PairSource,
    pub model_id: String,
    pub seed: u64,
    #[serde(default)]
    pub prompt_ids: Vec<String>,
    #[serde(default)]
    pub temperatures: Vec<f64>,
    #[serde(default)]
    pub alignment: Option<AlignTier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitStat {
    pub unit: String,
    pub rounds: usize,
    pub kept: usize,
    pub skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRun {
    pub run_id: String,
    pub config: PipelineConfig,
    pub source: PairSource,
    pub doc_ids: Vec<String>,
    pub pairs: Vec<QAPair>,
    pub summaries: Vec<Summary>,
    pub contexts: Vec<ContextRecord>,
    pub units: Vec<UnitStat>,
    pub warnings: Vec<String>,
    pub alignment_failures: usize,
}

impl GenerationRun {
    pub fn answerable(&self) -> usize {
        self.pairs.iter().filter(|p| !p.unanswerable).count()
    }
}

/// `<dataset>-<source>-<12 hex of sha256(config, doc ids)>`.
pub fn run_id(config: &PipelineConfig, source: PairSource, doc_ids: &[String]) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config).expect("config serializes"));
    h.update(source.to_string());
    for id in doc_ids {
        h.update((id.len() as u64).to_le_bytes());
        h.update(id);
    }
    let digest = h.finalize();
    let hex: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
    format!("{}-{}-{hex}", config.dataset, source)
}

fn complete(
    gw: &Gateway,
    cfg: &PipelineConfig,
    tag: String,
    prompt: String,
    temperature: f64,
) -> Result<String, GenerationError> {
    let req = CompletionRequest {
        model_id: cfg.model_id.clone(),
        prompt,
        temperature,
        max_output_tokens: cfg.max_output_tokens,
        request_tag: tag,
    };
    Ok(gw.complete(&req)?.text)
}

fn vars(pairs: &[(&'static str, String)]) -> BTreeMap<&'static str, String> {
    pairs.iter().cloned().collect()
}

/// Summarize one unit at temperature 0. An unparseable reply is re-asked
/// once; a second failure is a (non-fatal) unit error.
pub fn summarize_document(
    gw: &Gateway,
    cfg: &PipelineConfig,
    unit: &str,
    text: &str,
) -> Result<(Summary, Vec<String>), GenerationError> {
    let schema = cfg.schema()?;
    let template = summarization_template(cfg.dataset, schema.variant)?;
    let prompt = render(template, &vars(&[("input_context", text.to_string())]))?;
    let tag = request_tag("summarization", unit);
    let mut last: Option<ParseError> = None;
    for attempt in 0..2 {
        let t = if attempt == 0 { tag.clone() } else { format!("{tag}@retry") };
        let reply = complete(gw, cfg, t, prompt.clone(), 0.0)?;
        match parse_summary_output(unit, &reply, &schema) {
            Ok((summary, warnings)) => {
                return Ok((summary, warnings.into_iter().map(|w| format!("[{tag}] {w}")).collect()));
            }
            Err(e) => last = Some(e),
        }
    }
    Err(GenerationError::unit(&tag, format!("summary unparseable after re-ask: {}", last.expect("two attempts"))))
}

/// Generate `n` questions from `input` (document text, or a rendered summary
/// for `sum_*` strategies). A count mismatch is re-asked once; after that the
/// first `min(found, n)` items are kept with a warning.
pub fn generate_questions(
    gw: &Gateway,
    cfg: &PipelineConfig,
    unit: &str,
    input: &str,
    n: usize,
    temperature: f64,
) -> Result<(Vec<String>, Vec<String>), GenerationError> {
    if n == 0 {
        return Err(GenerationError::Config("cannot generate 0 questions".into()));
    }
    let template = question_template(cfg.dataset, cfg.strategy);
    let slot = if template.placeholders().contains("input_summary") { "input_summary" } else { "input_context" };
    let prompt = render(template, &vars(&[(slot, input.to_string()), ("question_num", n.to_string())]))?;
    let tag = request_tag("question_gen", unit);

    let first = parse_indexed_list(&complete(gw, cfg, tag.clone(), prompt.clone(), temperature)?, Some(n));
    if let Ok(items) = first {
        return Ok((items, Vec::new()));
    }
    let second = parse_indexed_list(&complete(gw, cfg, format!("{tag}@retry"), prompt, temperature)?, Some(n));
    let items = match (second, first) {
        (Ok(items), _) => return Ok((items, Vec::new())),
        (Err(ParseError::CountMismatch { items, .. }), _) | (_, Err(ParseError::CountMismatch { items, .. })) => items,
        (Err(e), _) => return Err(GenerationError::unit(&tag, format!("no questions parsed after re-ask: {e}"))),
    };
    let warning = format!("[{tag}] asked for {n} questions, got {}; kept {}", items.len(), items.len().min(n));
    Ok((items.into_iter().take(n).collect(), vec![warning]))
}

fn same_question(a: &str, b: &str) -> bool {
    let norm = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    norm(a) == norm(b)
}

/// A question paired with what alignment made of its answer.
pub type DistilledAnswer = (String, AnswerOutcome);

/// Distill answers for all `questions` in one call at temperature 0. Output
/// pairs are matched to the inputs by position. A pair-count mismatch is
/// re-asked once; questions still unmatched become unanswerable.
/// Returns the outcomes in question order and any warnings.
pub fn distill_answers(
    gw: &Gateway,
    cfg: &PipelineConfig,
    unit: &str,
    questions: &[String],
    context: &str,
) -> Result<(Vec<DistilledAnswer>, Vec<String>), GenerationError> {
    if questions.is_empty() {
        return Err(GenerationError::NoQuestions);
    }
    let template = distill_template(cfg.dataset);
    let prompt = render(
        template,
        &vars(&[("input_context", context.to_string()), ("input_questions", format_question_block(questions))]),
    )?;
    let tag = request_tag("answer_distill", unit);
    let mut warnings = Vec::new();

    let first = parse_qa_block(&complete(gw, cfg, tag.clone(), prompt.clone(), 0.0)?);
    let parsed = match first {
        Ok(p) if p.len() == questions.len() => Ok(p),
        first => {
            let second = parse_qa_block(&complete(gw, cfg, format!("{tag}@retry"), prompt, 0.0)?);
            match (second, first) {
                (Ok(p), _) if p.len() == questions.len() => Ok(p),
                (Ok(p), _) | (Err(_), Ok(p)) => Err(p),
                (Err(e), Err(_)) => {
                    warnings.push(format!("[{tag}] answers unparseable after re-ask ({e}); all unanswerable"));
                    Err(Vec::new())
                }
            }
        }
    };
    let pairs = match parsed {
        Ok(p) => p,
        Err(p) => {
            if !p.is_empty() {
                warnings.push(format!(
                    "[{tag}] {} answers for {} questions after re-ask; unmatched questions unanswerable",
                    p.len(),
                    questions.len()
                ));
            }
            p
        }
    };
    let out = questions
        .iter()
        .enumerate()
        .map(|(i, q)| match pairs.get(i) {
            Some((echoed, outcome)) => {
                if !same_question(echoed, q) {
                    warnings.push(format!("[{tag}] answer {} echoes a different question: {echoed:?}", i + 1));
                }
                (q.clone(), outcome.clone())
            }
            None => (q.clone(), AnswerOutcome::Unanswerable),
        })
        .collect();
    Ok((out, warnings))
}

/// A context a unit's questions are answered against.
#[derive(Debug, Clone)]
struct UnitContext {
    doc_id: String,
    section: String,
    char_start: usize,
    char_end: usize,
    text: String,
}

impl UnitContext {
    fn record(&self) -> ContextRecord {
        ContextRecord {
            doc_id: self.doc_id.clone(),
            section: self.section.clone(),
            char_start: self.char_start,
            char_end: self.char_end,
            text: self.text.clone(),
        }
    }
}

/// Trim surrounding whitespace off a char interval of `text`.
fn trimmed_context(doc: &Document, name: &str, start: usize, end: usize) -> UnitContext {
    let slice = text::char_slice(&doc.text, start..end).unwrap_or("");
    let lead = slice.chars().take_while(|c| c.is_whitespace()).count();
    let body = slice.trim();
    let start = start + lead;
    UnitContext {
        doc_id: doc.id.clone(),
        section: name.to_string(),
        char_start: start,
        char_end: start + text::char_len(body),
        text: body.to_string(),
    }
}

#[derive(Default)]
struct UnitResult {
    pairs: Vec<QAPair>,
    summary: Option<Summary>,
    contexts: Vec<ContextRecord>,
    warnings: Vec<String>,
    stat: Option<UnitStat>,
    alignment_failures: usize,
}

/// Non-fatal errors become a warning and `None`.
fn soft<T>(r: Result<T, GenerationError>, warnings: &mut Vec<String>) -> Result<Option<T>, GenerationError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(e) if e.is_fatal() => Err(e),
        Err(e) => {
            warnings.push(format!("{e}; unit skipped"));
            Ok(None)
        }
    }
}

struct Provenance {
    source: PairSource,
    prompt_ids: Vec<String>,
    temperatures: Vec<f64>,
}

fn build_pair(
    cfg: &PipelineConfig,
    id: String,
    question: String,
    outcome: &AnswerOutcome,
    ctx: &UnitContext,
    prov: &Provenance,
    out: &mut UnitResult,
) -> QAPair {
    let aligned = match outcome {
        AnswerOutcome::Quoted(quote) => match align_answer(quote, &ctx.text) {
            Ok(a) => Some(a),
            Err(_) => {
                out.alignment_failures += 1;
                out.warnings.push(format!("[{id}] alignment failure: {quote:?} not in context; marked unanswerable"));
                None
            }
        },
        AnswerOutcome::Unanswerable => None,
    };
    QAPair {
        id,
        question,
        doc_id: ctx.doc_id.clone(),
        section: ctx.section.clone(),
        context_char_start: ctx.char_start,
        context_char_end: ctx.char_end,
        answer_start: aligned.as_ref().map(|a| a.char_start),
        answer_text: aligned.as_ref().map(|a| a.text.clone()),
        unanswerable: aligned.is_none(),
        strategy: prov.source,
        model_id: cfg.model_id.clone(),
        seed: cfg.seed,
        prompt_ids: prov.prompt_ids.clone(),
        temperatures: prov.temperatures.clone(),
        alignment: aligned.map(|a| a.tier),
    }
}

/// Question-generation input for a unit: the text itself, or its summary.
fn question_input(
    gw: &Gateway,
    cfg: &PipelineConfig,
    unit: &str,
    text: &str,
    out: &mut UnitResult,
    prompt_ids: &mut Vec<String>,
) -> Result<Option<String>, GenerationError> {
    if !cfg.strategy.requires_summary() {
        return Ok(Some(text.to_string()));
    }
    let Some((summary, warnings)) = soft(summarize_document(gw, cfg, unit, text), &mut out.warnings)? else {
        return Ok(None);
    };
    out.warnings.extend(warnings);
    prompt_ids.push(summarization_template(cfg.dataset, cfg.schema()?.variant)?.id.to_string());
    let input = summary.as_context();
    out.summary = Some(summary);
    Ok(Some(input))
}

fn temperatures(cfg: &PipelineConfig, n_units: usize) -> Result<Vec<f64>, GenerationError> {
    if cfg.strategy == StrategyKind::TempAnneal && n_units > 0 {
        Ok(anneal_temperatures(n_units)?)
    } else {
        Ok(vec![0.0; n_units])
    }
}

fn radqa_unit(gw: &Gateway, cfg: &PipelineConfig, doc: &Document, temperature: f64) -> Result<UnitResult, GenerationError> {
    let mut out = UnitResult::default();
    let unit = doc.id.as_str();
    let sections = if doc.sections.is_empty() { extract_sections(doc, &RADQA_SECTIONS) } else { doc.sections.clone() };
    let contexts: Vec<UnitContext> = sections
        .iter()
        .map(|s| trimmed_context(doc, &s.name, s.char_start, s.char_end))
        .filter(|c| !c.text.is_empty())
        .collect();
    let mut stat = UnitStat { unit: unit.to_string(), rounds: 1, kept: 0, skipped: true };
    if contexts.is_empty() {
        out.warnings.push(format!("[{unit}] no FINDINGS or IMPRESSION section; document skipped"));
        out.stat = Some(stat);
        return Ok(out);
    }
    let mut prompt_ids = Vec::new();
    let Some(input) = question_input(gw, cfg, unit, &doc.text, &mut out, &mut prompt_ids)? else {
        out.stat = Some(stat);
        return Ok(out);
    };
    let generated = generate_questions(gw, cfg, unit, &input, cfg.questions_per_unit, temperature);
    let Some((questions, warnings)) = soft(generated, &mut out.warnings)? else {
        out.stat = Some(stat);
        return Ok(out);
    };
    out.warnings.extend(warnings);
    prompt_ids.push(question_template(cfg.dataset, cfg.strategy).id.to_string());
    prompt_ids.push(distill_template(cfg.dataset).id.to_string());
    let prov = Provenance { source: PairSource::Strategy(cfg.strategy), prompt_ids, temperatures: vec![temperature] };

    for ctx in &contexts {
        let ctx_unit = format!("{unit}/{}", ctx.section);
        let Some((answers, warnings)) =
            soft(distill_answers(gw, cfg, &ctx_unit, &questions, &ctx.text), &mut out.warnings)?
        else {
            continue;
        };
        out.warnings.extend(warnings);
        out.contexts.push(ctx.record());
        for (k, (q, outcome)) in answers.into_iter().enumerate() {
            let pair = build_pair(cfg, format!("{ctx_unit}/q{k}"), q, &outcome, ctx, &prov, &mut out);
            out.pairs.push(pair);
        }
    }
    stat.skipped = out.pairs.is_empty();
    stat.kept = out.pairs.len();
    out.stat = Some(stat);
    Ok(out)
}

fn assemble(
    cfg: &PipelineConfig,
    source: PairSource,
    doc_ids: Vec<String>,
    results: Vec<Result<UnitResult, GenerationError>>,
) -> Result<GenerationRun, GenerationError> {
    let mut run = GenerationRun {
        run_id: run_id(cfg, source, &doc_ids),
        config: cfg.clone(),
        source,
        doc_ids,
        pairs: Vec::new(),
        summaries: Vec::new(),
        contexts: Vec::new(),
        units: Vec::new(),
        warnings: Vec::new(),
        alignment_failures: 0,
    };
    for r in results {
        let r = r?;
        run.pairs.extend(r.pairs);
        run.summaries.extend(r.summary);
        run.contexts.extend(r.contexts);
        run.warnings.extend(r.warnings);
        run.units.extend(r.stat);
        run.alignment_failures += r.alignment_failures;
    }
    Ok(run)
}

/// Per document: optional summary, `questions_per_unit` questions from the
/// whole report, then one distillation against each present FINDINGS /
/// IMPRESSION section.
pub fn run_radqa_pipeline(gw: &Gateway, cfg: &PipelineConfig, docs: &[Document]) -> Result<GenerationRun, GenerationError> {
    cfg.validate()?;
    if cfg.dataset != Dataset::Radqa {
        return Err(GenerationError::Config(format!("the section recipe is for radqa, not {}", cfg.dataset)));
    }
    let temps = temperatures(cfg, docs.len())?;
    let results = cfg.execution.map(docs, |i, doc| radqa_unit(gw, cfg, doc, temps[i]));
    assemble(cfg, PairSource::Strategy(cfg.strategy), docs.iter().map(|d| d.id.clone()).collect(), results)
}

/// A word-bounded segment with its text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MimicUnit {
    pub segment: Segment,
    pub text: String,
}

impl MimicUnit {
    pub fn id(&self) -> String {
        format!("{}#s{}", self.segment.doc_id, self.segment.index)
    }
}

pub fn mimic_units(docs: &[Document], max_words: usize) -> Result<Vec<MimicUnit>, GenerationError> {
    let mut units = Vec::new();
    for doc in docs {
        let segments = segment_document(doc, max_words).map_err(|e| GenerationError::Data(e.to_string()))?;
        units.extend(segments.into_iter().map(|s| MimicUnit { text: s.text(doc).to_string(), segment: s }));
    }
    Ok(units)
}

fn mimic_unit(gw: &Gateway, cfg: &PipelineConfig, unit: &MimicUnit, temperature: f64) -> Result<UnitResult, GenerationError> {
    let mut out = UnitResult::default();
    let id = unit.id();
    let ctx = UnitContext {
        doc_id: unit.segment.doc_id.clone(),
        section: format!("segment_{}", unit.segment.index),
        char_start: unit.segment.char_start,
        char_end: unit.segment.char_end,
        text: unit.text.clone(),
    };
    let mut stat = UnitStat { unit: id.clone(), rounds: 0, kept: 0, skipped: false };
    let mut prompt_ids = Vec::new();
    let Some(input) = question_input(gw, cfg, &id, &unit.text, &mut out, &mut prompt_ids)? else {
        stat.skipped = true;
        out.stat = Some(stat);
        return Ok(out);
    };
    prompt_ids.push(question_template(cfg.dataset, cfg.strategy).id.to_string());
    prompt_ids.push(distill_template(cfg.dataset).id.to_string());
    let prov = Provenance { source: PairSource::Strategy(cfg.strategy), prompt_ids, temperatures: vec![temperature] };

    let quota = cfg.questions_per_unit;
    let mut seen: HashSet<String> = HashSet::new();
    let mut kept: Vec<(String, AnswerOutcome)> = Vec::new();
    for round in 1..=cfg.max_rounds {
        stat.rounds = round;
        let round_unit = if round == 1 { id.clone() } else { format!("{id}@round{round}") };
        let generated = generate_questions(gw, cfg, &round_unit, &input, cfg.overgen_batch, temperature);
        let Some((questions, warnings)) = soft(generated, &mut out.warnings)? else { continue };
        out.warnings.extend(warnings);
        let fresh: Vec<String> = questions.into_iter().filter(|q| seen.insert(q.trim().to_lowercase())).collect();
        if fresh.is_empty() {
            continue;
        }
        let Some((answers, warnings)) =
            soft(distill_answers(gw, cfg, &round_unit, &fresh, &ctx.text), &mut out.warnings)?
        else {
            continue;
        };
        out.warnings.extend(warnings);
        for (q, outcome) in answers {
            let AnswerOutcome::Quoted(quote) = &outcome else { continue };
            match align_answer(quote, &ctx.text) {
                Ok(_) => kept.push((q, outcome)),
                Err(_) => {
                    out.alignment_failures += 1;
                    out.warnings.push(format!("[{id}] alignment failure: {quote:?} not in context; filtered out"));
                }
            }
        }
        if kept.len() >= quota {
            break;
        }
    }
    kept.truncate(quota);
    if kept.len() < quota {
        out.warnings.push(format!(
            "[{id}] shortfall: {} of {quota} answerable pairs after {} rounds",
            kept.len(),
            stat.rounds
        ));
    }
    for (k, (q, outcome)) in kept.into_iter().enumerate() {
        let pair = build_pair(cfg, format!("{id}/q{k}"), q, &outcome, &ctx, &prov, &mut out);
        out.pairs.push(pair);
    }
    stat.kept = out.pairs.len();
    if !out.pairs.is_empty() {
        out.contexts.push(ctx.record());
    }
    out.stat = Some(stat);
    Ok(out)
}

/// Per segment: generate `overgen_batch` questions, distill, keep answerable
/// pairs; repeat for up to `max_rounds` rounds until `questions_per_unit`
/// answerable pairs exist, then keep the first `questions_per_unit`.
pub fn run_mimic_pipeline(gw: &Gateway, cfg: &PipelineConfig, units: &[MimicUnit]) -> Result<GenerationRun, GenerationError> {
    cfg.validate()?;
    if cfg.dataset != Dataset::Mimicqa {
        return Err(GenerationError::Config(format!("the segment recipe is for mimicqa, not {}", cfg.dataset)));
    }
    let temps = temperatures(cfg, units.len())?;
    let results = cfg.execution.map(units, |i, u| mimic_unit(gw, cfg, u, temps[i]));
    let mut doc_ids: Vec<String> = Vec::new();
    for u in units {
        if doc_ids.last() != Some(&u.segment.doc_id) {
            doc_ids.push(u.segment.doc_id.clone());
        }
    }
    assemble(cfg, PairSource::Strategy(cfg.strategy), doc_ids, results)
}

/// Answer gold questions against their own contexts, one distillation call
/// per context. Questions keep their gold ids.
pub fn answer_gold_questions(gw: &Gateway, cfg: &PipelineConfig, gold: &GoldSet) -> Result<GenerationRun, GenerationError> {
    if cfg.model_id.trim().is_empty() {
        return Err(GenerationError::Config("model id is empty".into()));
    }
    let mut groups: IndexMap<&str, Vec<(String, String)>> = IndexMap::new();
    for e in &gold.entries {
        if gold.context_of(e).is_none() {
            return Err(GenerationError::Data(format!("gold question `{}` has no context `{}`", e.qid, e.context_id)));
        }
        groups.entry(e.context_id.as_str()).or_default().push((e.qid.clone(), e.question.clone()));
    }
    let groups: Vec<(&str, Vec<(String, String)>)> = groups.into_iter().collect();
    let prov = Provenance {
        source: PairSource::GoldQuestion,
        prompt_ids: vec![distill_template(cfg.dataset).id.to_string()],
        temperatures: vec![0.0],
    };
    let results = cfg.execution.map(&groups, |_, (context_id, qs)| {
        let mut out = UnitResult::default();
        let text = gold.contexts[*context_id].clone();
        let ctx = UnitContext {
            doc_id: context_id.to_string(),
            section: "context".into(),
            char_start: 0,
            char_end: text::char_len(&text),
            text,
        };
        let questions: Vec<String> = qs.iter().map(|(_, q)| q.clone()).collect();
        let mut stat = UnitStat { unit: context_id.to_string(), rounds: 1, kept: 0, skipped: true };
        if let Some((answers, warnings)) =
            soft(distill_answers(gw, cfg, context_id, &questions, &ctx.text), &mut out.warnings)?
        {
            out.warnings.extend(warnings);
            for ((qid, _), (q, outcome)) in qs.iter().zip(answers) {
                let pair = build_pair(cfg, qid.clone(), q, &outcome, &ctx, &prov, &mut out);
                out.pairs.push(pair);
            }
            out.contexts.push(ctx.record());
            stat.skipped = false;
            stat.kept = out.pairs.len();
        }
        out.stat = Some(stat);
        Ok(out)
    });
    let ids = groups.iter().map(|(c, _)| c.to_string()).collect();
    assemble(cfg, PairSource::GoldQuestion, ids, results)
}
