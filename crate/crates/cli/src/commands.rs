use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use indexmap::IndexMap;
use serde::Serialize;
use synthqa::analysis::{
    diversity_report, format_diversity_table, label_gold, label_question, type_counts, QuestionGroup, QuestionLabel,
    TypeCode,
};
use synthqa::corpus::{load_corpus, sample_documents, Document, InputFormat};
use synthqa::evaluation::{
    aggregate_seeds, evaluate, format_aggregate_table, format_report_table, load_predictions, EvalReport, GoldSet,
};
use synthqa::generation::{
    answer_gold_questions, build_scale_plan, export_squad, mimic_units, read_run, run_mimic_pipeline,
    run_radqa_pipeline, write_run, GenerationRun, DEFAULT_DOC_COUNTS, DEFAULT_PAIRS_PER_DOC,
};
use synthqa::llm::mock::{EchoBackend, ScriptedBackend, SyntheticBackend};
use synthqa::llm::openai::OpenAiBackend;
use synthqa::llm::{estimate_cost_nanos, Backend, Clock, Gateway, LedgerEntry, PriceTable, RetryPolicy};
use synthqa::prompting::Dataset;

use crate::config::{BackendSpec, QuestionSource, RunConfig};
use crate::error::CliError;

const LIVE_TIMEOUT: Duration = Duration::from_secs(120);

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

/// Create `dir`, refusing one that already has content.
fn fresh_dir(dir: &Path) -> Result<(), CliError> {
    if dir.exists() && fs::read_dir(dir).map_err(|e| io_err(dir, e))?.next().is_some() {
        return Err(CliError::Config(format!("{} already exists and is not empty", dir.display())));
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

pub fn gateway(spec: &BackendSpec, seed: u64, parallelism: usize) -> Result<Gateway, CliError> {
    let backend: Arc<dyn Backend> = match spec {
        BackendSpec::Live { base_url } => Arc::new(
            OpenAiBackend::from_env(base_url.as_deref(), LIVE_TIMEOUT).map_err(|e| CliError::Backend(e.to_string()))?,
        ),
        BackendSpec::Echo => Arc::new(EchoBackend { seed }),
        BackendSpec::Synthetic(policy) => Arc::new(SyntheticBackend::new(seed, *policy)),
        BackendSpec::Script(path) => {
            let fallback = Arc::new(SyntheticBackend::new(seed, synthqa::llm::mock::AnswerPolicy::All));
            Arc::new(ScriptedBackend::from_jsonl(path).map_err(CliError::Config)?.with_fallback(fallback))
        }
    };
    let gw = Gateway::new(backend).with_parallelism(parallelism);
    Ok(if spec.is_mock() { gw.with_retry(RetryPolicy::immediate(3)).with_clock(Clock::Fixed(0)) } else { gw })
}

fn select_documents(cfg: &RunConfig, documents: Vec<Document>) -> Result<Vec<Document>, CliError> {
    let Some(n) = cfg.docs else { return Ok(documents) };
    let sample = sample_documents(&documents, n, cfg.pipeline.seed)?;
    let mut by_id: HashMap<String, Document> = documents.into_iter().map(|d| (d.id.clone(), d)).collect();
    Ok(sample.doc_ids.iter().filter_map(|id| by_id.remove(id)).collect())
}

fn restrict_gold(gold: GoldSet, docs: &[Document]) -> GoldSet {
    let keep: HashSet<&str> = docs.iter().map(|d| d.id.as_str()).collect();
    GoldSet {
        entries: gold.entries.into_iter().filter(|e| keep.contains(e.context_id.as_str())).collect(),
        contexts: gold.contexts.into_iter().filter(|(id, _)| keep.contains(id.as_str())).collect(),
    }
}

pub fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    let gw = gateway(&cfg.backend, cfg.pipeline.seed, cfg.parallelism)?;
    let corpus = load_corpus(&cfg.input, cfg.input_format)?;
    let docs = select_documents(cfg, corpus.documents)?;
    let run: GenerationRun = match (cfg.questions, cfg.pipeline.dataset) {
        (QuestionSource::Gold, _) => answer_gold_questions(&gw, &cfg.pipeline, &restrict_gold(corpus.gold, &docs))?,
        (QuestionSource::Strategy, Dataset::Radqa) => run_radqa_pipeline(&gw, &cfg.pipeline, &docs)?,
        (QuestionSource::Strategy, Dataset::Mimicqa) => {
            let units = mimic_units(&docs, cfg.pipeline.segment_words)?;
            run_mimic_pipeline(&gw, &cfg.pipeline, &units)?
        }
    };
    for w in &run.warnings {
        log::warn!("{w}");
    }
    let dir = cfg.out.join(&run.run_id);
    let manifest = write_run(&dir, &run, &gw, &PriceTable::gpt4o())?;
    println!(
        "{} pairs ({} answerable, {} unanswerable) written to {}",
        manifest.pair_count,
        manifest.answerable,
        manifest.unanswerable,
        dir.display()
    );
    match manifest.cost_usd {
        Some(c) => println!("estimated cost: ${c:.4}"),
        None => println!("estimated cost: unknown (no price for {})", cfg.pipeline.model_id),
    }
    Ok(())
}

pub fn export(run_dir: &Path, out: &Path) -> Result<(), CliError> {
    if out.exists() {
        return Err(CliError::Config(format!("{} already exists", out.display())));
    }
    let run = read_run(run_dir)?;
    let squad = export_squad(&run)?;
    fs::write(out, squad.to_json_bytes()).map_err(|e| io_err(out, e))?;
    println!("{} qas written to {}", squad.question_count(), out.display());
    Ok(())
}

/// What `analyze` reads.
pub enum AnalyzeSource {
    Run(PathBuf),
    Gold(PathBuf),
}

#[derive(Serialize)]
struct AnalysisFile<'a> {
    source: &'a str,
    report: &'a synthqa::analysis::DiversityReport,
    type_counts: std::collections::BTreeMap<TypeCode, usize>,
}

/// Questions grouped by document, and one label per question.
///
/// A run asks each RadQA question once per section, so questions are
/// deduplicated per document; overlap is judged against the document's
/// contexts joined, and the question counts as answerable if any section
/// answered it.
fn run_questions(dir: &Path) -> Result<(String, Vec<QuestionGroup>, Vec<QuestionLabel>), CliError> {
    let run = read_run(dir)?;
    let mut doc_text: HashMap<&str, String> = HashMap::new();
    for c in &run.contexts {
        let t = doc_text.entry(c.doc_id.as_str()).or_default();
        if !t.is_empty() {
            t.push('\n');
        }
        t.push_str(&c.text);
    }
    let mut grouped: IndexMap<&str, IndexMap<&str, bool>> = IndexMap::new();
    for p in &run.pairs {
        let answered = grouped.entry(p.doc_id.as_str()).or_default().entry(p.question.as_str()).or_insert(false);
        *answered |= !p.unanswerable;
    }
    let mut groups = Vec::new();
    let mut labels = Vec::new();
    for (doc, questions) in grouped {
        let ctx = doc_text.get(doc).ok_or_else(|| CliError::Data(format!("no context for document `{doc}`")))?;
        for (q, answered) in &questions {
            labels.push(label_question(q, ctx, *answered));
        }
        groups.push(QuestionGroup { doc_id: doc.to_string(), questions: questions.keys().map(|q| q.to_string()).collect() });
    }
    Ok((run.manifest.run_id, groups, labels))
}

fn gold_questions(path: &Path) -> Result<(String, Vec<QuestionGroup>, Vec<QuestionLabel>), CliError> {
    let gold = load_corpus(path, InputFormat::SquadV2)?.gold;
    let by_qid: HashMap<String, QuestionLabel> = label_gold(&gold)?.into_iter().collect();
    let mut grouped: IndexMap<&str, Vec<&str>> = IndexMap::new();
    for e in &gold.entries {
        grouped.entry(e.context_id.as_str()).or_default().push(e.qid.as_str());
    }
    let question: HashMap<&str, &str> = gold.entries.iter().map(|e| (e.qid.as_str(), e.question.as_str())).collect();
    let mut groups = Vec::new();
    let mut labels = Vec::new();
    for (doc, qids) in grouped {
        labels.extend(qids.iter().map(|q| by_qid[*q]));
        groups.push(QuestionGroup { doc_id: doc.to_string(), questions: qids.iter().map(|q| question[q].to_string()).collect() });
    }
    let name = path.file_stem().map_or_else(|| "gold".to_string(), |s| s.to_string_lossy().into_owned());
    Ok((name, groups, labels))
}

pub fn analyze(source: &AnalyzeSource, backend: &BackendSpec, out: Option<&Path>) -> Result<(), CliError> {
    let (name, groups, labels) = match source {
        AnalyzeSource::Run(dir) => run_questions(dir)?,
        AnalyzeSource::Gold(path) => gold_questions(path)?,
    };
    let gw = gateway(backend, 0, 1)?;
    let report = diversity_report(&groups, &gw, Some(&labels))?;
    let table = format_diversity_table(&[(name.clone(), report.clone())]);
    print!("{table}");
    if let Some(dir) = out {
        fresh_dir(dir)?;
        let file = AnalysisFile { source: &name, report: &report, type_counts: type_counts(&labels) };
        write_json(&dir.join("analysis.json"), &file)?;
        fs::write(dir.join("analysis.txt"), table).map_err(|e| io_err(dir, e))?;
    }
    Ok(())
}

/// Where question-type labels for `evaluate --decompose` come from.
pub enum LabelSource {
    Gold,
    File(PathBuf),
}

impl LabelSource {
    pub fn parse(value: &str) -> Result<Self, CliError> {
        match value {
            "" => Err(CliError::Config("--decompose needs a labels source: `gold` or a labels file".into())),
            "gold" => Ok(LabelSource::Gold),
            path => Ok(LabelSource::File(PathBuf::from(path))),
        }
    }

    fn load(&self, gold: &GoldSet) -> Result<HashMap<String, TypeCode>, CliError> {
        match self {
            LabelSource::Gold => Ok(label_gold(gold)?.into_iter().map(|(q, l)| (q, l.type_code)).collect()),
            LabelSource::File(path) => {
                let raw = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
                serde_json::from_str(&raw).map_err(|e| io_err(path, e))
            }
        }
    }
}

pub struct EvaluateArgs {
    pub gold: PathBuf,
    pub predictions: Vec<PathBuf>,
    /// Aggregate across the prediction files instead of reporting one.
    pub aggregate: bool,
    pub decompose: Option<LabelSource>,
    pub out: Option<PathBuf>,
}

pub fn evaluate_cmd(args: &EvaluateArgs) -> Result<(), CliError> {
    if args.predictions.is_empty() {
        return Err(CliError::Config("no prediction files given".into()));
    }
    let gold = load_corpus(&args.gold, InputFormat::SquadV2)?.gold;
    let labels = args.decompose.as_ref().map(|s| s.load(&gold)).transpose()?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for path in &args.predictions {
        let (preds, warnings) = load_predictions(path, &gold)?;
        for w in &warnings {
            log::warn!("{}: {w}", path.display());
        }
        let mut report = evaluate(&preds, &gold, labels.as_ref())?;
        report.warnings.splice(0..0, warnings);
        reports.push(report);
    }
    if let Some(dir) = &args.out {
        fresh_dir(dir)?;
    }
    let table = if args.aggregate {
        let agg = aggregate_seeds(&reports)?;
        if let Some(dir) = &args.out {
            write_json(&dir.join("aggregate.json"), &agg)?;
            write_json(&dir.join("reports.json"), &reports)?;
        }
        format_aggregate_table(&agg)
    } else {
        if let Some(dir) = &args.out {
            write_json(&dir.join("report.json"), &reports[0])?;
        }
        format_report_table(&reports[0])
    };
    print!("{table}");
    if let Some(dir) = &args.out {
        fs::write(dir.join("report.txt"), &table).map_err(|e| io_err(dir, e))?;
    }
    Ok(())
}

/// Expand a glob into a sorted file list.
pub fn expand_glob(pattern: &str) -> Result<Vec<PathBuf>, CliError> {
    let paths = glob::glob(pattern).map_err(|e| CliError::Config(format!("bad glob `{pattern}`: {e}")))?;
    let mut files: Vec<PathBuf> = paths.filter_map(Result::ok).filter(|p| p.is_file()).collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Data(format!("no files match `{pattern}`")));
    }
    Ok(files)
}

pub struct ScaleArgs {
    pub input: PathBuf,
    pub input_format: InputFormat,
    pub doc_counts: Option<Vec<usize>>,
    pub pairs_per_doc: Option<Vec<usize>>,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
}

pub fn scale_plan(args: &ScaleArgs) -> Result<(), CliError> {
    let docs = load_corpus(&args.input, args.input_format)?.documents;
    let doc_counts = args.doc_counts.clone().unwrap_or_else(|| DEFAULT_DOC_COUNTS.to_vec());
    let pairs = args.pairs_per_doc.clone().unwrap_or_else(|| DEFAULT_PAIRS_PER_DOC.to_vec());
    let root = args.out.display().to_string();
    let (plan, manifests) = build_scale_plan(&docs, &doc_counts, &pairs, &args.seeds, &root)?;
    fresh_dir(&args.out)?;
    write_json(&args.out.join("plan.json"), &plan)?;
    for m in &manifests {
        write_json(&args.out.join(format!("{}.json", m.name)), m)?;
    }
    println!("{} manifests written to {}", manifests.len(), args.out.display());
    Ok(())
}

pub enum CostInput {
    Run(PathBuf),
    Tokens { model: String, input_tokens: u64, output_tokens: u64 },
}

pub fn cost(input: &CostInput, prices: Option<&Path>) -> Result<(), CliError> {
    let table = match prices {
        Some(p) => {
            let raw = fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            serde_json::from_str(&raw).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
        }
        None => PriceTable::gpt4o(),
    };
    let ledger: Vec<LedgerEntry> = match input {
        CostInput::Run(dir) => {
            let path = dir.join("ledger.jsonl");
            let raw = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            raw.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| serde_json::from_str(l).map_err(|e| io_err(&path, e)))
                .collect::<Result<_, _>>()?
        }
        CostInput::Tokens { model, input_tokens, output_tokens } => vec![LedgerEntry {
            ts: 0,
            request_tag: "cost/estimate".into(),
            model_id: model.clone(),
            input_tokens: *input_tokens,
            output_tokens: *output_tokens,
            temperature: None,
        }],
    };
    let nanos = estimate_cost_nanos(&ledger, &table).map_err(|e| CliError::Config(e.to_string()))?;
    let (inp, outp): (u64, u64) = ledger.iter().fold((0, 0), |(a, b), e| (a + e.input_tokens, b + e.output_tokens));
    println!("{} requests, {inp} input tokens, {outp} output tokens", ledger.len());
    println!("cost: ${}.{:09}", nanos / 1_000_000_000, nanos % 1_000_000_000);
    Ok(())
}
