//! Extractive-QA scoring: EM, token-F1 and reference overlap (RO), with
//! per-question-type breakdowns and multi-seed aggregation.
//!
//! Unanswerable handling is uniform across the three metrics: both sides null
//! scores 1, exactly one side null scores 0.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;
use std::sync::OnceLock;

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::TypeCode;
use crate::generation::align_answer;
use crate::text;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub text: String,
    /// Character offset into the context.
    pub char_start: usize,
}

impl GoldAnswer {
    pub fn span(&self) -> Range<usize> {
        self.char_start..self.char_start + text::char_len(&self.text)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEntry {
    pub qid: String,
    pub question: String,
    pub context_id: String,
    pub answers: Vec<GoldAnswer>,
    pub unanswerable: bool,
}

/// Gold questions plus their contexts, keyed by context id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldSet {
    pub entries: Vec<GoldEntry>,
    pub contexts: HashMap<String, String>,
}

impl GoldSet {
    pub fn context_of(&self, entry: &GoldEntry) -> Option<&str> {
        self.contexts.get(&entry.context_id).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub qid: String,
    /// `None` is the unanswerable marker.
    pub text: Option<String>,
    /// Half-open character interval in the context.
    pub char_span: Option<Range<usize>>,
}

impl Prediction {
    pub fn unanswerable(qid: impl Into<String>) -> Self {
        Self { qid: qid.into(), text: None, char_span: None }
    }

    pub fn answer(qid: impl Into<String>, text: impl Into<String>, char_start: Option<usize>) -> Self {
        let text = text.into();
        let char_span = char_start.map(|s| s..s + text::char_len(&text));
        Self { qid: qid.into(), text: Some(text), char_span }
    }
}

/// One value of the predictions file (`qid → record`), the contract shared
/// with the training component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    /// `null` reads as empty.
    #[serde(default, deserialize_with = "null_as_empty")]
    pub text: String,
    #[serde(default)]
    pub char_start: Option<usize>,
    #[serde(default)]
    pub unanswerable: bool,
}

fn null_as_empty<'de, D: serde::Deserializer<'de>>(d: D) -> Result<String, D::Error> {
    Ok(Option::<String>::deserialize(d)?.unwrap_or_default())
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("{path}: {message}")]
    Malformed { path: String, message: String },
    #[error("prediction for `{pred}` scored against gold `{gold}`")]
    QidMismatch { pred: String, gold: String },
    #[error("no prediction for gold question `{0}`")]
    MissingPrediction(String),
    #[error("duplicate prediction for `{0}`")]
    DuplicatePrediction(String),
    #[error("no question-type label for `{0}`")]
    MissingLabel(String),
    #[error("cannot aggregate an empty list of reports")]
    NoReports,
    #[error("reports disagree on {0}; seeds must share one evaluation set")]
    PartitionMismatch(String),
}

fn article_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b(a|an|the)\b").expect("valid regex"))
}

/// Lowercase, delete ASCII punctuation, drop whole-word articles, collapse
/// whitespace.
pub fn normalize_answer(s: &str) -> String {
    let lower = s.to_lowercase();
    let no_punct: String = lower.chars().filter(|c| !c.is_ascii_punctuation()).collect();
    let no_articles = article_re().replace_all(&no_punct, " ");
    no_articles.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn check_qid(pred: &Prediction, gold: &GoldEntry) -> Result<(), EvalError> {
    if pred.qid != gold.qid {
        return Err(EvalError::QidMismatch { pred: pred.qid.clone(), gold: gold.qid.clone() });
    }
    Ok(())
}

/// Shared null handling. `Some(score)` when at least one side is unanswerable.
fn null_score(pred: &Prediction, gold: &GoldEntry) -> Option<f64> {
    match (pred.text.is_none(), gold.unanswerable) {
        (true, true) => Some(1.0),
        (true, false) | (false, true) => Some(0.0),
        (false, false) => None,
    }
}

pub fn exact_match(pred: &Prediction, gold: &GoldEntry) -> Result<f64, EvalError> {
    check_qid(pred, gold)?;
    if let Some(s) = null_score(pred, gold) {
        return Ok(s);
    }
    let p = normalize_answer(pred.text.as_deref().unwrap_or_default());
    Ok(if gold.answers.iter().any(|g| normalize_answer(&g.text) == p) { 1.0 } else { 0.0 })
}

fn f1_tokens(pred: &str, gold: &str) -> f64 {
    let p = normalize_answer(pred);
    let g = normalize_answer(gold);
    let p: Vec<&str> = p.split_whitespace().collect();
    let g: Vec<&str> = g.split_whitespace().collect();
    if p.is_empty() || g.is_empty() {
        return if p == g { 1.0 } else { 0.0 };
    }
    let mut counts: HashMap<&str, i64> = HashMap::new();
    for t in &g {
        *counts.entry(t).or_default() += 1;
    }
    let mut common = 0usize;
    for t in &p {
        if let Some(c) = counts.get_mut(t) {
            if *c > 0 {
                *c -= 1;
                common += 1;
            }
        }
    }
    if common == 0 {
        return 0.0;
    }
    let precision = common as f64 / p.len() as f64;
    let recall = common as f64 / g.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn token_f1(pred: &Prediction, gold: &GoldEntry) -> Result<f64, EvalError> {
    check_qid(pred, gold)?;
    if let Some(s) = null_score(pred, gold) {
        return Ok(s);
    }
    let p = pred.text.as_deref().unwrap_or_default();
    Ok(gold.answers.iter().map(|g| f1_tokens(p, &g.text)).fold(0.0, f64::max))
}

/// Empty intervals cover no character and so never intersect.
fn intersects(a: &Range<usize>, b: &Range<usize>) -> bool {
    !a.is_empty() && !b.is_empty() && a.start < b.end && b.start < a.end
}

/// 1 iff the predicted interval intersects any gold interval. A text-only
/// prediction is aligned into `context` first; when that fails it scores 0 and
/// a warning is returned.
pub fn reference_overlap(
    pred: &Prediction,
    gold: &GoldEntry,
    context: Option<&str>,
) -> Result<(f64, Option<String>), EvalError> {
    check_qid(pred, gold)?;
    if let Some(s) = null_score(pred, gold) {
        return Ok((s, None));
    }
    let span = match (&pred.char_span, context) {
        (Some(span), _) => span.clone(),
        (None, Some(ctx)) => match align_answer(pred.text.as_deref().unwrap_or_default(), ctx) {
            Ok(a) => a.char_start..a.char_end,
            Err(_) => return Ok((0.0, Some(format!("{}: prediction text not found in context; RO 0", pred.qid)))),
        },
        (None, None) => return Ok((0.0, Some(format!("{}: prediction has no span and no context; RO 0", pred.qid)))),
    };
    Ok((if gold.answers.iter().any(|g| intersects(&span, &g.span())) { 1.0 } else { 0.0 }, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub em: f64,
    pub f1: f64,
    pub ro: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub em: f64,
    pub f1: f64,
    pub ro: f64,
    pub n: usize,
    /// Empty unless labels were supplied.
    pub per_type: BTreeMap<TypeCode, MetricScores>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Default)]
struct Sums {
    em: f64,
    f1: f64,
    ro: f64,
    n: usize,
}

impl Sums {
    fn add(&mut self, em: f64, f1: f64, ro: f64) {
        self.em += em;
        self.f1 += f1;
        self.ro += ro;
        self.n += 1;
    }

    fn percentages(&self) -> MetricScores {
        let pct = |x: f64| if self.n == 0 { 0.0 } else { 100.0 * x / self.n as f64 };
        MetricScores { em: pct(self.em), f1: pct(self.f1), ro: pct(self.ro), n: self.n }
    }
}

/// Score every gold question. Each must have exactly one prediction;
/// predictions for unknown qids are ignored with a warning.
pub fn evaluate(
    preds: &[Prediction],
    gold: &GoldSet,
    labels: Option<&HashMap<String, TypeCode>>,
) -> Result<EvalReport, EvalError> {
    let mut by_qid: HashMap<&str, &Prediction> = HashMap::with_capacity(preds.len());
    for p in preds {
        if by_qid.insert(p.qid.as_str(), p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.qid.clone()));
        }
    }
    let gold_ids: HashSet<&str> = gold.entries.iter().map(|e| e.qid.as_str()).collect();
    let mut warnings: Vec<String> = preds
        .iter()
        .filter(|p| !gold_ids.contains(p.qid.as_str()))
        .map(|p| format!("{}: prediction has no gold question; ignored", p.qid))
        .collect();

    let mut overall = Sums::default();
    let mut per_type: BTreeMap<TypeCode, Sums> = BTreeMap::new();
    for entry in &gold.entries {
        let pred = by_qid.get(entry.qid.as_str()).ok_or_else(|| EvalError::MissingPrediction(entry.qid.clone()))?;
        let em = exact_match(pred, entry)?;
        let f1 = token_f1(pred, entry)?;
        let (ro, warning) = reference_overlap(pred, entry, gold.context_of(entry))?;
        warnings.extend(warning);
        overall.add(em, f1, ro);
        if let Some(labels) = labels {
            let code = labels.get(&entry.qid).ok_or_else(|| EvalError::MissingLabel(entry.qid.clone()))?;
            per_type.entry(*code).or_default().add(em, f1, ro);
        }
    }
    let o = overall.percentages();
    Ok(EvalReport {
        em: o.em,
        f1: o.f1,
        ro: o.ro,
        n: o.n,
        per_type: per_type.iter().map(|(k, s)| (*k, s.percentages())).collect(),
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub k: usize,
}

impl SeedAggregate {
    pub fn of(values: &[f64]) -> Self {
        let k = values.len();
        let mean = values.iter().sum::<f64>() / k as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64;
        Self { mean, std: var.sqrt(), k }
    }
}

impl std::fmt::Display for SeedAggregate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.1} ±{:.1}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateScores {
    pub em: SeedAggregate,
    pub f1: SeedAggregate,
    pub ro: SeedAggregate,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub overall: AggregateScores,
    pub per_type: BTreeMap<TypeCode, AggregateScores>,
}

fn aggregate_scores(scores: &[MetricScores]) -> AggregateScores {
    let pick = |f: fn(&MetricScores) -> f64| SeedAggregate::of(&scores.iter().map(f).collect::<Vec<_>>());
    AggregateScores { em: pick(|s| s.em), f1: pick(|s| s.f1), ro: pick(|s| s.ro), n: scores[0].n }
}

/// Mean and population std per metric over seed reports that share one
/// evaluation set and type partition.
pub fn aggregate_seeds(reports: &[EvalReport]) -> Result<AggregateReport, EvalError> {
    let first = reports.first().ok_or(EvalError::NoReports)?;
    for r in &reports[1..] {
        if r.n != first.n {
            return Err(EvalError::PartitionMismatch(format!("n ({} vs {})", first.n, r.n)));
        }
        let a: Vec<_> = first.per_type.iter().map(|(k, s)| (*k, s.n)).collect();
        let b: Vec<_> = r.per_type.iter().map(|(k, s)| (*k, s.n)).collect();
        if a != b {
            return Err(EvalError::PartitionMismatch("question-type partitions".into()));
        }
    }
    let overall: Vec<MetricScores> =
        reports.iter().map(|r| MetricScores { em: r.em, f1: r.f1, ro: r.ro, n: r.n }).collect();
    let per_type = first
        .per_type
        .keys()
        .map(|k| (*k, aggregate_scores(&reports.iter().map(|r| r.per_type[k]).collect::<Vec<_>>())))
        .collect();
    Ok(AggregateReport { overall: aggregate_scores(&overall), per_type })
}

/// Read a predictions file and validate it against the gold set. Problems
/// that still leave a scoreable prediction are returned as warnings.
pub fn load_predictions(path: &Path, gold: &GoldSet) -> Result<(Vec<Prediction>, Vec<String>), EvalError> {
    let display = path.display().to_string();
    let raw = std::fs::read_to_string(path).map_err(|e| EvalError::Io { path: display.clone(), message: e.to_string() })?;
    let records: IndexMap<String, PredictionRecord> =
        serde_json::from_str(&raw).map_err(|e| EvalError::Malformed { path: display, message: e.to_string() })?;
    Ok(predictions_from_records(records, gold))
}

pub fn predictions_from_records(
    records: IndexMap<String, PredictionRecord>,
    gold: &GoldSet,
) -> (Vec<Prediction>, Vec<String>) {
    let contexts: HashMap<&str, &str> = gold
        .entries
        .iter()
        .filter_map(|e| gold.context_of(e).map(|c| (e.qid.as_str(), c)))
        .collect();
    let mut warnings = Vec::new();
    let mut preds = Vec::with_capacity(records.len());
    for (qid, rec) in records {
        if rec.unanswerable {
            if !rec.text.is_empty() || rec.char_start.is_some() {
                warnings.push(format!("{qid}: unanswerable prediction carries text or span; ignored"));
            }
            preds.push(Prediction::unanswerable(qid));
            continue;
        }
        if rec.text.is_empty() {
            warnings.push(format!("{qid}: empty answer text; scored as unanswerable"));
            preds.push(Prediction::unanswerable(qid));
            continue;
        }
        let mut pred = Prediction::answer(qid.clone(), rec.text, rec.char_start);
        if let (Some(span), Some(ctx)) = (&pred.char_span, contexts.get(qid.as_str())) {
            if text::char_slice(ctx, span.clone()) != pred.text.as_deref() {
                warnings.push(format!("{qid}: char_start {} does not slice to the answer text; span dropped", span.start));
                pred.char_span = None;
            }
        }
        preds.push(pred);
    }
    (preds, warnings)
}

/// Write predictions in the file contract (`qid → record`), in input order.
pub fn predictions_to_records(preds: &[Prediction]) -> IndexMap<String, PredictionRecord> {
    preds
        .iter()
        .map(|p| {
            let rec = PredictionRecord {
                text: p.text.clone().unwrap_or_default(),
                char_start: p.char_span.as_ref().map(|s| s.start),
                unanswerable: p.text.is_none(),
            };
            (p.qid.clone(), rec)
        })
        .collect()
}

/// Gold answers as predictions (first reference, with its span).
pub fn gold_as_predictions(gold: &GoldSet) -> Vec<Prediction> {
    gold.entries
        .iter()
        .map(|e| match e.answers.first() {
            Some(a) if !e.unanswerable => Prediction::answer(e.qid.clone(), a.text.clone(), Some(a.char_start)),
            _ => Prediction::unanswerable(e.qid.clone()),
        })
        .collect()
}

fn row(out: &mut String, name: &str, cells: [String; 3], n: usize) {
    let _ = writeln!(out, "{name:<8} {:>12} {:>12} {:>12} {n:>6}", cells[0], cells[1], cells[2]);
}

fn header(out: &mut String) {
    let _ = writeln!(out, "{:<8} {:>12} {:>12} {:>12} {:>6}", "subset", "EM", "F1", "RO", "n");
}

pub fn format_report_table(report: &EvalReport) -> String {
    let mut out = String::new();
    header(&mut out);
    let cells = |s: &MetricScores| [format!("{:.1}", s.em), format!("{:.1}", s.f1), format!("{:.1}", s.ro)];
    row(&mut out, "overall", cells(&MetricScores { em: report.em, f1: report.f1, ro: report.ro, n: report.n }), report.n);
    for (code, s) in &report.per_type {
        row(&mut out, code.as_str(), cells(s), s.n);
    }
    out
}

pub fn format_aggregate_table(report: &AggregateReport) -> String {
    let mut out = String::new();
    header(&mut out);
    let cells = |s: &AggregateScores| [s.em.to_string(), s.f1.to_string(), s.ro.to_string()];
    row(&mut out, "overall", cells(&report.overall), report.overall.n);
    for (code, s) in &report.per_type {
        row(&mut out, code.as_str(), cells(s), s.n);
    }
    out
}
