//! Corpus builders and independent reference implementations shared by the
//! integration tests. The oracles deliberately avoid the crate's own helpers.

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthqa::corpus::Document;
use synthqa::evaluation::{GoldAnswer, GoldEntry, GoldSet};

pub const SAMPLE_REPORT: &str = include_str!("../fixtures/sample_report.txt");
pub const SAMPLE_SUMMARY: &str = include_str!("../fixtures/sample_summary.json");
const STOPWORDS: &str = include_str!("../../src/analysis/stopwords_en.txt");

const FINDINGS: [&str; 8] = [
    "There is mild bibasilar atelectasis without focal consolidation.",
    "The cardiomediastinal silhouette is within normal limits.",
    "A small left pleural effusion has slightly increased in size.",
    "The endotracheal tube terminates five centimeters above the carina.",
    "Degenerative changes of the thoracic spine are again noted.",
    "No pneumothorax is identified on this upright radiograph.",
    "Surgical clips project over the right upper quadrant.",
    "The nasogastric tube courses below the diaphragm into the stomach.",
];

const IMPRESSIONS: [&str; 5] = [
    "Stable appearance of the chest compared with the prior study.",
    "Interval improvement of the left basilar opacity.",
    "Small effusion without evidence of pneumonia.",
    "Lines and tubes are in satisfactory position.",
    "No acute cardiopulmonary process.",
];

/// Radiology-style reports with exactly two sections, FINDINGS and IMPRESSION.
pub fn radqa_docs(n: usize) -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    (0..n)
        .map(|i| {
            let k = rng.gen_range(2..=4);
            let findings: Vec<&str> = FINDINGS.choose_multiple(&mut rng, k).copied().collect();
            let impression = IMPRESSIONS.choose(&mut rng).expect("non-empty");
            let text = format!(
                "EXAMINATION: Chest radiograph {i}.\nFINDINGS: {}\nIMPRESSION: {impression}\n",
                findings.join(" ")
            );
            Document::new(format!("rad{i:03}"), text)
        })
        .collect()
}

fn note_text(rng: &mut ChaCha8Rng, words: usize) -> String {
    let mut out = String::new();
    let mut count = 0;
    while count < words {
        let sentence = FINDINGS.choose(rng).expect("non-empty");
        count += sentence.split_whitespace().count();
        out.push_str(sentence);
        out.push(if rng.gen_bool(0.2) { '\n' } else { ' ' });
    }
    out
}

/// Clinical notes that segment into exactly 169 units of at most 500 words:
/// 40 long notes of three segments and 49 short notes of one.
pub fn mimic_docs() -> Vec<Document> {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut docs = Vec::new();
    for i in 0..40 {
        docs.push(Document::new(format!("note{i:03}"), note_text(&mut rng, 1200)));
    }
    for i in 40..89 {
        docs.push(Document::new(format!("note{i:03}"), note_text(&mut rng, 150)));
    }
    docs
}

/// `n_docs × per_doc` unanswerable gold questions over [`radqa_docs`].
pub fn gold_questions(n_docs: usize, per_doc: usize) -> GoldSet {
    let docs = radqa_docs(n_docs);
    let mut set = GoldSet::default();
    for doc in &docs {
        for k in 0..per_doc {
            set.entries.push(GoldEntry {
                qid: format!("{}-q{k}", doc.id),
                question: format!("Question {k} about the tubes?"),
                context_id: doc.id.clone(),
                answers: vec![],
                unanswerable: true,
            });
        }
        set.contexts.insert(doc.id.clone(), doc.text.clone());
    }
    set
}

// ---- metric oracle ----

/// Token-level SQuAD normalization without regexes.
pub fn oracle_tokens(s: &str) -> Vec<String> {
    let cleaned: String = s.to_lowercase().chars().filter(|c| !c.is_ascii_punctuation()).collect();
    cleaned
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(str::to_string)
        .collect()
}

pub fn oracle_em(pred: Option<&str>, golds: &[&str], unanswerable: bool) -> f64 {
    match (pred, unanswerable) {
        (None, true) => 1.0,
        (None, false) | (Some(_), true) => 0.0,
        (Some(p), false) => {
            let p = oracle_tokens(p);
            if golds.iter().any(|g| oracle_tokens(g) == p) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Multiset overlap by explicit pairing: each gold token can be claimed once.
fn pair_f1(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() || gold.is_empty() {
        return if pred.len() == gold.len() { 1.0 } else { 0.0 };
    }
    let mut claimed = vec![false; gold.len()];
    let mut common = 0.0;
    for p in pred {
        if let Some(j) = (0..gold.len()).find(|&j| !claimed[j] && gold[j] == *p) {
            claimed[j] = true;
            common += 1.0;
        }
    }
    if common == 0.0 {
        return 0.0;
    }
    let precision = common / pred.len() as f64;
    let recall = common / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

pub fn oracle_f1(pred: Option<&str>, golds: &[&str], unanswerable: bool) -> f64 {
    match (pred, unanswerable) {
        (None, true) => 1.0,
        (None, false) | (Some(_), true) => 0.0,
        (Some(p), false) => {
            let p = oracle_tokens(p);
            golds.iter().map(|g| pair_f1(&p, &oracle_tokens(g))).fold(0.0, f64::max)
        }
    }
}

/// Intersection by enumerating every covered position.
pub fn oracle_ro(pred: (usize, usize), golds: &[(usize, usize)]) -> f64 {
    let covered: HashSet<usize> = (pred.0..pred.1).collect();
    if golds.iter().any(|&(s, e)| (s..e).any(|i| covered.contains(&i))) {
        1.0
    } else {
        0.0
    }
}

const ANSWER_WORDS: [&str; 14] = [
    "free", "air", "the", "a", "an", "limited", "assessment", "for", "effusion", "Left", "tube", "AIR", "small", "lobe",
];

/// A random answer string over a small vocabulary with punctuation noise.
pub fn random_answer(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(0..6);
    let mut words: Vec<String> = (0..n).map(|_| ANSWER_WORDS.choose(rng).expect("non-empty").to_string()).collect();
    for w in words.iter_mut() {
        if rng.gen_bool(0.2) {
            w.push(*[',', '.', '!', '-'].choose(rng).expect("non-empty"));
        }
    }
    let sep = if rng.gen_bool(0.3) { "  " } else { " " };
    words.join(sep)
}

pub fn gold_entry(qid: &str, answers: &[(String, usize)], unanswerable: bool) -> GoldEntry {
    GoldEntry {
        qid: qid.to_string(),
        question: "q?".into(),
        context_id: "c".into(),
        answers: answers.iter().map(|(t, s)| GoldAnswer { text: t.clone(), char_start: *s }).collect(),
        unanswerable,
    }
}

// ---- analysis oracles ----

pub fn stopwords() -> HashSet<&'static str> {
    STOPWORDS.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

/// Lowercase, every char that is neither alphanumeric nor whitespace becomes
/// a space, split on whitespace.
pub fn oracle_plain_tokens(s: &str) -> Vec<String> {
    let mapped: String =
        s.to_lowercase().chars().map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' }).collect();
    mapped.split_whitespace().map(str::to_string).collect()
}

pub fn oracle_overlap(question: &str, context: &str) -> bool {
    let stop = stopwords();
    let content = |s: &str| -> HashSet<String> {
        oracle_plain_tokens(s).into_iter().filter(|t| !stop.contains(t.as_str())).collect()
    };
    !content(question).is_disjoint(&content(context))
}

const QUESTION_WORDS: [&str; 20] = [
    "is", "does", "what", "Where", "the", "tube", "effusion", "left", "lung", "of", "there", "any", "Has", "changed",
    "pleural", "which", "how", "catheter", "size", "air",
];

pub fn random_question(rng: &mut ChaCha8Rng) -> String {
    let n = rng.gen_range(1..9);
    let mut q: Vec<&str> = (0..n).map(|_| *QUESTION_WORDS.choose(rng).expect("non-empty")).collect();
    if rng.gen_bool(0.5) {
        q.push("?");
    }
    q.join(" ").replace(" ?", "?")
}

pub fn random_context(rng: &mut ChaCha8Rng) -> String {
    let k = rng.gen_range(1..4);
    FINDINGS.choose_multiple(rng, k).copied().collect::<Vec<_>>().join(" ")
}

/// Distinct first tokens per document, averaged over non-empty documents.
pub fn oracle_aqp(groups: &[Vec<String>]) -> f64 {
    let sizes: Vec<usize> = groups
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| {
            g.iter()
                .filter_map(|q| q.split_whitespace().next().map(str::to_lowercase))
                .collect::<HashSet<_>>()
                .len()
        })
        .collect();
    sizes.iter().sum::<usize>() as f64 / sizes.len() as f64
}

pub fn oracle_vocab(groups: &[Vec<String>]) -> usize {
    let mut seen: HashMap<String, ()> = HashMap::new();
    for q in groups.iter().flatten() {
        for t in oracle_plain_tokens(q) {
            seen.insert(t, ());
        }
    }
    seen.len()
}
