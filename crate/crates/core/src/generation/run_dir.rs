//! Run directory I/O and SQuAD-v2 export.
//!
//! Layout: `manifest.json`, `pairs.jsonl`, `summaries.jsonl`, `contexts.jsonl`,
//! `ledger.jsonl`, `warnings.log`. Nothing in it depends on wall-clock time
//! unless the gateway clock does.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{GenerationError, GenerationRun, PairSource, PipelineConfig, QAPair, UnitStat};
use crate::llm::{estimate_cost, Gateway, LedgerEntry, PriceTable};
use crate::squad::{SquadAnswer, SquadArticle, SquadFile, SquadParagraph, SquadQa};
use crate::text;

/// The text a set of pairs was answered against.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub doc_id: String,
    pub section: String,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

impl ContextRecord {
    /// Paragraph id in exports: the doc id for whole-document contexts,
    /// `doc/section` otherwise.
    pub fn paragraph_id(&self) -> String {
        if self.section == "context" {
            self.doc_id.clone()
        } else {
            format!("{}/{}", self.doc_id, self.section)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub source: PairSource,
    pub config: PipelineConfig,
    pub backend_id: String,
    pub doc_ids: Vec<String>,
    pub pair_count: usize,
    pub answerable: usize,
    pub unanswerable: usize,
    pub alignment_failures: usize,
    pub warning_count: usize,
    pub input_tokens: u64,
    pub output_tokens: u64,
    /// `None` when the model has no price entry.
    pub cost_usd: Option<f64>,
    pub units: Vec<UnitStat>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredRun {
    pub manifest: RunManifest,
    pub pairs: Vec<QAPair>,
    pub contexts: Vec<ContextRecord>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> GenerationError {
    GenerationError::Io { path: path.display().to_string(), message: e.to_string() }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), GenerationError> {
    fs::File::create(path).and_then(|mut f| f.write_all(bytes)).map_err(|e| io_err(path, e))
}

fn jsonl<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for item in items {
        serde_json::to_writer(&mut out, item).expect("record serializes");
        out.push(b'\n');
    }
    out
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, GenerationError> {
    let raw = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| io_err(path, format!("line {}: {e}", i + 1))))
        .collect()
}

/// Refuse to touch a directory that already has content.
pub(crate) fn ensure_fresh(dir: &Path) -> Result<(), GenerationError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
        if entries.next().is_some() {
            return Err(GenerationError::RunExists(dir.display().to_string()));
        }
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Write a finished run into a fresh `dir`. The ledger is written sorted by
/// request tag.
pub fn write_run(
    dir: &Path,
    run: &GenerationRun,
    gw: &Gateway,
    prices: &PriceTable,
) -> Result<RunManifest, GenerationError> {
    ensure_fresh(dir)?;
    let ledger: Vec<LedgerEntry> = gw.ledger_sorted();
    let manifest = RunManifest {
        run_id: run.run_id.clone(),
        source: run.source,
        config: run.config.clone(),
        backend_id: gw.backend_id().to_string(),
        doc_ids: run.doc_ids.clone(),
        pair_count: run.pairs.len(),
        answerable: run.answerable(),
        unanswerable: run.pairs.len() - run.answerable(),
        alignment_failures: run.alignment_failures,
        warning_count: run.warnings.len(),
        input_tokens: ledger.iter().map(|e| e.input_tokens).sum(),
        output_tokens: ledger.iter().map(|e| e.output_tokens).sum(),
        cost_usd: estimate_cost(&ledger, prices).ok(),
        units: run.units.clone(),
    };
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    manifest_bytes.push(b'\n');
    write_file(&dir.join("manifest.json"), &manifest_bytes)?;
    write_file(&dir.join("pairs.jsonl"), &jsonl(&run.pairs))?;
    write_file(&dir.join("summaries.jsonl"), &jsonl(&run.summaries))?;
    write_file(&dir.join("contexts.jsonl"), &jsonl(&run.contexts))?;
    write_file(&dir.join("ledger.jsonl"), &jsonl(&ledger))?;
    let mut log = run.warnings.join("\n");
    if !log.is_empty() {
        log.push('\n');
    }
    write_file(&dir.join("warnings.log"), log.as_bytes())?;
    Ok(manifest)
}

pub fn read_run(dir: &Path) -> Result<StoredRun, GenerationError> {
    let manifest_path = dir.join("manifest.json");
    let raw = fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
    let manifest: RunManifest = serde_json::from_str(&raw).map_err(|e| io_err(&manifest_path, e))?;
    Ok(StoredRun {
        manifest,
        pairs: read_jsonl(&dir.join("pairs.jsonl"))?,
        contexts: read_jsonl(&dir.join("contexts.jsonl"))?,
    })
}

/// SQuAD-v2 view of a run: one article per document, one paragraph per
/// context, in context order. Every answerable pair is slice-checked; the
/// first failure aborts the export.
pub fn export_squad(run: &StoredRun) -> Result<SquadFile, GenerationError> {
    let mut qas: IndexMap<(String, String), Vec<SquadQa>> =
        run.contexts.iter().map(|c| ((c.doc_id.clone(), c.section.clone()), Vec::new())).collect();
    let by_key: std::collections::HashMap<(String, String), &ContextRecord> =
        run.contexts.iter().map(|c| ((c.doc_id.clone(), c.section.clone()), c)).collect();
    for pair in &run.pairs {
        let key = (pair.doc_id.clone(), pair.section.clone());
        let ctx = by_key
            .get(&key)
            .ok_or_else(|| GenerationError::Data(format!("pair `{}` has no context {}/{}", pair.id, key.0, key.1)))?;
        let answers = match (&pair.answer_text, pair.answer_start, pair.unanswerable) {
            (_, _, true) => Vec::new(),
            (Some(t), Some(start), false) => {
                let end = start + text::char_len(t);
                if text::char_slice(&ctx.text, start..end) != Some(t.as_str()) {
                    return Err(GenerationError::Data(format!(
                        "pair `{}`: context[{start}..{end}] does not equal answer {t:?}",
                        pair.id
                    )));
                }
                vec![SquadAnswer { text: t.clone(), answer_start: start }]
            }
            _ => return Err(GenerationError::Data(format!("pair `{}` is answerable but has no answer span", pair.id))),
        };
        qas[&key].push(SquadQa {
            id: pair.id.clone(),
            question: pair.question.clone(),
            is_impossible: answers.is_empty(),
            answers,
        });
    }
    let mut articles: Vec<SquadArticle> = Vec::new();
    for ((doc_id, section), qas) in qas {
        let ctx = by_key[&(doc_id.clone(), section)];
        let paragraph =
            SquadParagraph { document_id: Some(ctx.paragraph_id()), context: ctx.text.clone(), qas };
        match articles.last_mut() {
            Some(a) if a.title == doc_id => a.paragraphs.push(paragraph),
            _ => articles.push(SquadArticle { title: doc_id, paragraphs: vec![paragraph] }),
        }
    }
    Ok(SquadFile::new(articles))
}
