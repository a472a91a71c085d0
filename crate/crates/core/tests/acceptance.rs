//! Acceptance suite. Runs every primary criterion at its stated tolerance and
//! prints one PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::collections::HashSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthqa::analysis::{
    classify_overlap, diversity_report, label_question, type_counts, type_distribution, FnEmbedder, QuestionGroup,
    QuestionLabel, TypeCode,
};
use synthqa::corpus::{load_corpus, squad_from_corpus, InputFormat};
use synthqa::evaluation::{exact_match, reference_overlap, token_f1, Prediction};
use synthqa::exec::Execution;
use synthqa::generation::{
    answer_gold_questions, export_squad, mimic_units, read_run, run_mimic_pipeline, run_radqa_pipeline,
    summarize_document, write_run, GenerationRun, PipelineConfig,
};
use synthqa::llm::mock::{hashed_unit_vector, AnswerPolicy, ScriptEntry, ScriptedBackend, SyntheticBackend};
use synthqa::llm::{
    anneal_temperatures, estimate_cost, estimate_cost_nanos, Backend, Clock, Gateway, LedgerEntry, PriceTable,
    RetryPolicy,
};
use synthqa::prompting::{builtin_templates, Dataset, SchemaVariant, StrategyKind, Summary};

use common::*;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn gateway(backend: impl Backend + 'static) -> Gateway {
    Gateway::new(Arc::new(backend)).with_retry(RetryPolicy::immediate(3)).with_clock(Clock::Fixed(0)).with_parallelism(8)
}

fn config(dataset: Dataset, strategy: StrategyKind, execution: Execution) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(dataset, strategy);
    cfg.execution = execution;
    cfg
}

fn metric_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut em_max, mut f1_max) = (0.0f64, 0.0f64);
    for i in 0..200 {
        let qid = format!("q{i}");
        let unanswerable = rng.gen_bool(0.15);
        let golds: Vec<(String, usize)> = if unanswerable {
            Vec::new()
        } else {
            (0..rng.gen_range(1..4))
                .map(|_| {
                    let mut t = random_answer(&mut rng);
                    if t.is_empty() {
                        t = "air".into();
                    }
                    (t, rng.gen_range(0..60))
                })
                .collect()
        };
        let pred_text = (!rng.gen_bool(0.15)).then(|| random_answer(&mut rng));
        let pred_start = rng.gen_range(0..60);
        let entry = gold_entry(&qid, &golds, unanswerable);
        let pred = match &pred_text {
            None => Prediction::unanswerable(&qid),
            Some(t) => Prediction::answer(&qid, t.clone(), Some(pred_start)),
        };
        let gold_texts: Vec<&str> = golds.iter().map(|(t, _)| t.as_str()).collect();
        let em = exact_match(&pred, &entry).map_err(|e| e.to_string())?;
        let f1 = token_f1(&pred, &entry).map_err(|e| e.to_string())?;
        let (ro, _) = reference_overlap(&pred, &entry, None).map_err(|e| e.to_string())?;
        em_max = em_max.max((em - oracle_em(pred_text.as_deref(), &gold_texts, unanswerable)).abs());
        f1_max = f1_max.max((f1 - oracle_f1(pred_text.as_deref(), &gold_texts, unanswerable)).abs());
        let expected_ro = match (&pred_text, unanswerable) {
            (None, true) => 1.0,
            (None, false) | (Some(_), true) => 0.0,
            (Some(t), false) => {
                let spans: Vec<(usize, usize)> = golds.iter().map(|(g, s)| (*s, s + g.chars().count())).collect();
                oracle_ro((pred_start, pred_start + t.chars().count()), &spans)
            }
        };
        ensure(ro == expected_ro, || format!("case {i}: RO {ro} != oracle {expected_ro} for {pred_text:?} vs {golds:?}"))?;
    }
    ensure(em_max <= 1e-9 && f1_max <= 1e-9, || format!("max deviation EM {em_max:e}, F1 {f1_max:e}"))?;

    let hand = gold_entry("h", &[("limited assessment for free air".into(), 0)], false);
    let f1 = token_f1(&Prediction::answer("h", "free air", None), &hand).map_err(|e| e.to_string())?;
    ensure((f1 - 4.0 / 7.0).abs() <= 1e-12, || format!("hand case F1 {f1} != 4/7"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("200 cases, max |dEM| {em_max:.0e}, max |dF1| {f1_max:.0e}, hand F1 = 4/7, {elapsed:.2?}"))
}

struct Runs {
    radqa: GenerationRun,
    radqa_gw: Gateway,
    mimic: GenerationRun,
    mimic_gw: Gateway,
}

fn count_identities(runs: &mut Option<Runs>) -> Check {
    let start = Instant::now();
    let parallel = Execution::with_threads(0);

    let radqa_gw = gateway(SyntheticBackend::new(5, AnswerPolicy::All));
    let docs = radqa_docs(64);
    let radqa = run_radqa_pipeline(&radqa_gw, &config(Dataset::Radqa, StrategyKind::NoOverlap, parallel), &docs)
        .map_err(|e| e.to_string())?;

    let units = mimic_units(&mimic_docs(), 500).map_err(|e| e.to_string())?;
    ensure(units.len() == 169, || format!("fixture has {} segments, expected 169", units.len()))?;
    let mimic_gw = gateway(SyntheticBackend::new(5, AnswerPolicy::All));
    let mimic = run_mimic_pipeline(&mimic_gw, &config(Dataset::Mimicqa, StrategyKind::DirectInstruction, parallel), &units)
        .map_err(|e| e.to_string())?;

    let gold_gw = gateway(SyntheticBackend::new(5, AnswerPolicy::All));
    let gold = answer_gold_questions(
        &gold_gw,
        &config(Dataset::Radqa, StrategyKind::DirectInstruction, parallel),
        &gold_questions(64, 3),
    )
    .map_err(|e| e.to_string())?;

    let counts = (radqa.pairs.len(), mimic.pairs.len(), gold.pairs.len());
    let elapsed = start.elapsed();
    *runs = Some(Runs { radqa, radqa_gw, mimic, mimic_gw });
    ensure(counts == (640, 845, 192), || format!("counts {counts:?}, expected (640, 845, 192)"))?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!("RadQA 640, MIMIC 845 from 169 segments, gold 192, {elapsed:.2?}"))
}

fn span_validity(runs: &Option<Runs>) -> Check {
    let runs = runs.as_ref().ok_or("count identities did not produce runs")?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut checked = 0usize;
    for (name, run, gw) in [("radqa", &runs.radqa, &runs.radqa_gw), ("mimic", &runs.mimic, &runs.mimic_gw)] {
        let dir = tmp.path().join(name);
        write_run(&dir, run, gw, &PriceTable::gpt4o()).map_err(|e| e.to_string())?;
        let squad = export_squad(&read_run(&dir).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for para in squad.data.iter().flat_map(|a| &a.paragraphs) {
            for qa in &para.qas {
                for ans in &qa.answers {
                    let slice: String = para.context.chars().skip(ans.answer_start).take(ans.text.chars().count()).collect();
                    ensure(slice == ans.text, || format!("{name} {}: {slice:?} != {:?}", qa.id, ans.text))?;
                    checked += 1;
                }
            }
        }
        let first = squad.to_json_bytes();
        let path = tmp.path().join(format!("{name}.json"));
        fs::write(&path, &first).map_err(|e| e.to_string())?;
        let loaded = load_corpus(&path, InputFormat::SquadV2).map_err(|e| e.to_string())?;
        let second = squad_from_corpus(&loaded).to_json_bytes();
        ensure(first == second, || format!("{name}: export -> load -> export changed the bytes"))?;
    }
    ensure(checked > 0, || "no answerable pairs were exported".into())?;
    Ok(format!("{checked} answerable spans slice-check, round trip byte-stable"))
}

fn filtering_loop() -> Check {
    let start = Instant::now();
    let units = mimic_units(&[common::mimic_docs().remove(0)], 500).map_err(|e| e.to_string())?;
    let units = &units[..1];
    let cfg = config(Dataset::Mimicqa, StrategyKind::DirectInstruction, Execution::Sequential);

    let run = run_mimic_pipeline(&gateway(SyntheticBackend::new(9, AnswerPolicy::FirstK(3))), &cfg, units)
        .map_err(|e| e.to_string())?;
    let (pairs, rounds) = (run.pairs.len(), run.units[0].rounds);
    ensure(pairs == 5 && rounds == 2, || format!("3-per-round mock: {pairs} pairs in {rounds} rounds"))?;

    let run = run_mimic_pipeline(&gateway(SyntheticBackend::new(9, AnswerPolicy::None)), &cfg, units)
        .map_err(|e| e.to_string())?;
    let rounds = run.units[0].rounds;
    ensure(run.pairs.is_empty(), || format!("never-answerable mock kept {} pairs", run.pairs.len()))?;
    ensure(rounds <= 3, || format!("never-answerable mock ran {rounds} rounds"))?;
    ensure(run.warnings.iter().any(|w| w.contains("shortfall")), || "no shortfall warning".into())?;
    Ok(format!("quota in 2 rounds; 0 pairs and a shortfall after {rounds} rounds, {:.2?}", start.elapsed()))
}

fn type_decomposition() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..50 {
        let n = rng.gen_range(1..300);
        let labels: Vec<QuestionLabel> = (0..n).map(|_| QuestionLabel::new(rng.gen(), rng.gen())).collect();
        let counts = type_counts(&labels);
        let total: usize = counts.values().sum();
        let pct: f64 = type_distribution(&labels).values().sum();
        ensure(total == n && counts.len() == 4, || format!("trial {trial}: counts {counts:?} for {n} labels"))?;
        ensure((pct - 100.0).abs() <= 0.05, || format!("trial {trial}: percentages sum to {pct}"))?;
        for l in &labels {
            ensure(TypeCode::from_flags(l.overlap, l.answerable) == l.type_code, || format!("bad code {l:?}"))?;
        }
    }
    let mut agree = 0;
    for i in 0..500 {
        let q = random_question(&mut rng);
        let ctx = random_context(&mut rng);
        let got = classify_overlap(&q, &ctx);
        ensure(got == oracle_overlap(&q, &ctx), || format!("case {i}: {q:?} vs {ctx:?}: got {got}"))?;
        ensure(label_question(&q, &ctx, true).overlap == got, || format!("case {i}: label disagrees"))?;
        agree += 1;
    }
    Ok(format!("50 partitions sum exactly; {agree}/500 overlap cases match the set oracle"))
}

fn diversity_metrics() -> Check {
    let hashed = FnEmbedder(|texts: &[String]| Ok(texts.iter().map(|t| hashed_unit_vector(0, t, 64)).collect()));
    let same = vec![QuestionGroup { doc_id: "d".into(), questions: vec!["Is there an effusion?".to_string(); 5] }];
    let aps = diversity_report(&same, &hashed, None).map_err(|e| e.to_string())?.aps.ok_or("no APS")?;
    ensure((aps - 1.0).abs() <= 1e-9, || format!("identical questions APS {aps}"))?;

    let basis = FnEmbedder(|texts: &[String]| {
        Ok((0..texts.len()).map(|i| (0..texts.len()).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect())
    });
    let distinct = vec![
        QuestionGroup { doc_id: "a".into(), questions: (0..4).map(|i| format!("What is finding {i}?")).collect() },
        QuestionGroup { doc_id: "b".into(), questions: (0..3).map(|i| format!("Where is tube {i}?")).collect() },
    ];
    let aps = diversity_report(&distinct, &basis, None).map_err(|e| e.to_string())?.aps.ok_or("no APS")?;
    ensure(aps.abs() <= 1e-9, || format!("orthogonal embeddings APS {aps}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for trial in 0..100 {
        let mut groups: Vec<Vec<String>> =
            (0..rng.gen_range(1..6)).map(|_| (0..rng.gen_range(0..6)).map(|_| random_question(&mut rng)).collect()).collect();
        if groups.iter().all(Vec::is_empty) {
            groups[0].push(random_question(&mut rng));
        }
        let qgroups: Vec<QuestionGroup> = groups
            .iter()
            .enumerate()
            .map(|(i, g)| QuestionGroup { doc_id: format!("d{i}"), questions: g.clone() })
            .collect();
        let report = diversity_report(&qgroups, &hashed, None).map_err(|e| e.to_string())?;
        let (aqp, vocab) = (oracle_aqp(&groups), oracle_vocab(&groups));
        ensure((report.aqp - aqp).abs() <= 1e-9, || format!("trial {trial}: AQP {} != {aqp}", report.aqp))?;
        ensure(report.vocab_size == vocab, || format!("trial {trial}: vocab {} != {vocab}", report.vocab_size))?;
    }
    Ok("APS identical = 1, orthogonal = 0; AQP and vocab match on 100 groups".into())
}

fn annealing_schedule() -> Check {
    let five = anneal_temperatures(5).map_err(|e| e.to_string())?;
    ensure(five == [0.0, 0.25, 0.5, 0.75, 1.0], || format!("n=5 gave {five:?}"))?;
    for n in 2..200 {
        let t = anneal_temperatures(n).map_err(|e| e.to_string())?;
        ensure(t.len() == n && t[0] == 0.0 && t[n - 1] == 1.0, || format!("n={n}: endpoints {:?}", (t[0], t[n - 1])))?;
        ensure(t.windows(2).all(|w| w[0] < w[1]), || format!("n={n}: not monotone"))?;
    }
    Ok("n=5 exact; monotone with exact endpoints for n in 2..200".into())
}

fn entry(model: &str, input: u64, output: u64) -> LedgerEntry {
    LedgerEntry { ts: 0, request_tag: "x/y".into(), model_id: model.into(), input_tokens: input, output_tokens: output, temperature: None }
}

fn cost_formula() -> Check {
    let prices = PriceTable::gpt4o();
    let one = [entry("gpt-4o", 1000, 1000)];
    let nanos = estimate_cost_nanos(&one, &prices).map_err(|e| e.to_string())?;
    let usd = estimate_cost(&one, &prices).map_err(|e| e.to_string())?;
    ensure(nanos == 20_000_000 && usd == 0.020, || format!("1000 + 1000 tokens cost {nanos} nano-USD ({usd})"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(53);
    for trial in 0..100 {
        let ledger: Vec<LedgerEntry> =
            (0..rng.gen_range(1..60)).map(|_| entry("gpt-4o", rng.gen_range(0..5000), rng.gen_range(0..2000))).collect();
        let cut = rng.gen_range(0..=ledger.len());
        let whole = estimate_cost_nanos(&ledger, &prices).map_err(|e| e.to_string())?;
        let parts = estimate_cost_nanos(&ledger[..cut], &prices).map_err(|e| e.to_string())?
            + estimate_cost_nanos(&ledger[cut..], &prices).map_err(|e| e.to_string())?;
        ensure(whole == parts, || format!("trial {trial}: {whole} != {parts}"))?;
    }
    Ok("$0.020 exactly; additive over 100 random splits".into())
}

fn prompt_fidelity() -> Check {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("prompts/v1");
    let mut on_disk: HashSet<String> = HashSet::new();
    for dataset in fs::read_dir(&root).map_err(|e| e.to_string())? {
        let dataset = dataset.map_err(|e| e.to_string())?.path();
        for stage in fs::read_dir(&dataset).map_err(|e| e.to_string())? {
            for file in fs::read_dir(stage.map_err(|e| e.to_string())?.path()).map_err(|e| e.to_string())? {
                let path = file.map_err(|e| e.to_string())?.path();
                on_disk.insert(path.strip_prefix(&root).expect("under root").to_string_lossy().replace('\\', "/"));
            }
        }
    }
    for t in builtin_templates() {
        let golden = fs::read(root.join(t.path)).map_err(|e| format!("{}: {e}", t.path))?;
        ensure(golden == t.body.as_bytes(), || format!("{} differs from its golden file", t.id))?;
        on_disk.remove(t.path);
    }
    ensure(on_disk.is_empty(), || format!("golden files without a template: {on_disk:?}"))?;

    let gw = gateway(ScriptedBackend::new(vec![ScriptEntry {
        stage: "summarization".into(),
        unit: "sample".into(),
        response: Some(SAMPLE_SUMMARY.into()),
        error: None,
    }]));
    let cfg = config(Dataset::Radqa, StrategyKind::SumNoOverlap, Execution::Sequential).with_schema(SchemaVariant::Full);
    let (summary, _) = summarize_document(&gw, &cfg, "sample", SAMPLE_REPORT).map_err(|e| e.to_string())?;
    let Summary::Structured(record) = summary else { return Err("expected a structured summary".into()) };
    let expected: serde_json::Map<String, serde_json::Value> =
        serde_json::from_str(SAMPLE_SUMMARY).map_err(|e| e.to_string())?;
    ensure(record.values.len() == expected.len(), || format!("{} fields, expected {}", record.values.len(), expected.len()))?;
    for (key, got) in &record.values {
        let want = expected.get(key).ok_or_else(|| format!("unexpected field {key}"))?;
        let want: Vec<String> = match want {
            serde_json::Value::Array(items) => items.iter().map(|v| v.as_str().unwrap_or_default().to_string()).collect(),
            serde_json::Value::String(s) => vec![s.clone()],
            other => return Err(format!("unexpected fixture value {other}")),
        };
        ensure(*got == want, || format!("field {key}: {got:?} != {want:?}"))?;
    }
    Ok(format!("{} templates byte-match; summary reproduced field-for-field", builtin_templates().len()))
}

fn determinism() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let docs = radqa_docs(16);
    let mut bytes = Vec::new();
    for (i, execution) in [Execution::with_threads(0), Execution::with_threads(0), Execution::Sequential].into_iter().enumerate() {
        let gw = gateway(SyntheticBackend::new(77, AnswerPolicy::Mixed));
        let cfg = config(Dataset::Radqa, StrategyKind::TempAnneal, execution);
        let run = run_radqa_pipeline(&gw, &cfg, &docs).map_err(|e| e.to_string())?;
        let dir = tmp.path().join(format!("run{i}"));
        write_run(&dir, &run, &gw, &PriceTable::gpt4o()).map_err(|e| e.to_string())?;
        bytes.push(fs::read(dir.join("pairs.jsonl")).map_err(|e| e.to_string())?);
    }
    ensure(bytes[0] == bytes[1], || "two identical runs wrote different pairs.jsonl".into())?;
    ensure(bytes[0] == bytes[2], || "sequential and parallel runs differ".into())?;
    Ok(format!("pairs.jsonl identical across runs ({} bytes)", bytes[0].len()))
}

type Criterion = Box<dyn FnOnce(&mut Option<Runs>) -> Check>;

fn main() {
    let mut runs = None;
    let criteria: Vec<(&str, Criterion)> = vec![
        ("metric oracle equivalence", Box::new(|_| metric_oracle())),
        ("count identities", Box::new(count_identities)),
        ("span validity", Box::new(|r| span_validity(r))),
        ("filtering loop", Box::new(|_| filtering_loop())),
        ("question-type decomposition", Box::new(|_| type_decomposition())),
        ("diversity metrics", Box::new(|_| diversity_metrics())),
        ("annealing schedule", Box::new(|_| annealing_schedule())),
        ("cost formula", Box::new(|_| cost_formula())),
        ("prompt fidelity", Box::new(|_| prompt_fidelity())),
        ("determinism", Box::new(|_| determinism())),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(|| check(&mut runs)))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
