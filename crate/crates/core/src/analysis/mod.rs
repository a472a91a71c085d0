//! Question analytics: lexical overlap with the context, the four-way
//! overlap × answerability type, and diversity (length, vocabulary, APS, AQP).

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::GoldSet;
use crate::llm::Gateway;

/// Pinned English stopword list, one word per line.
pub const STOPWORDS_EN: &str = include_str!("stopwords_en.txt");

fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_EN.lines().map(str::trim).filter(|w| !w.is_empty()).collect())
}

pub fn is_stopword(token: &str) -> bool {
    stopwords().contains(token)
}

/// Lowercase, every non-alphanumeric non-space character becomes a space,
/// split on whitespace. No stopword removal.
pub fn plain_tokens(text: &str) -> Vec<String> {
    let spaced: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c.is_whitespace() { c } else { ' ' })
        .collect();
    spaced.split_whitespace().map(str::to_string).collect()
}

/// [`plain_tokens`] minus stopwords.
pub fn content_tokens(text: &str) -> Vec<String> {
    plain_tokens(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

/// True iff the question shares at least one content token with the context.
pub fn classify_overlap(question: &str, context: &str) -> bool {
    let q: HashSet<String> = content_tokens(question).into_iter().collect();
    if q.is_empty() {
        return false;
    }
    content_tokens(context).iter().any(|t| q.contains(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TypeCode {
    OA,
    OU,
    NOA,
    NOU,
}

impl TypeCode {
    pub const ALL: [TypeCode; 4] = [TypeCode::OA, TypeCode::OU, TypeCode::NOA, TypeCode::NOU];

    pub fn from_flags(overlap: bool, answerable: bool) -> Self {
        match (overlap, answerable) {
            (true, true) => Self::OA,
            (true, false) => Self::OU,
            (false, true) => Self::NOA,
            (false, false) => Self::NOU,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::OA => "OA",
            Self::OU => "OU",
            Self::NOA => "NOA",
            Self::NOU => "NOU",
        }
    }
}

impl fmt::Display for TypeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionLabel {
    pub overlap: bool,
    pub answerable: bool,
    pub type_code: TypeCode,
}

impl QuestionLabel {
    pub fn new(overlap: bool, answerable: bool) -> Self {
        Self { overlap, answerable, type_code: TypeCode::from_flags(overlap, answerable) }
    }
}

pub fn label_question(question: &str, context: &str, answerable: bool) -> QuestionLabel {
    QuestionLabel::new(classify_overlap(question, context), answerable)
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no context for question `{0}`")]
    MissingContext(String),
    #[error("no questions to analyze")]
    Empty,
    #[error("embedding failed: {0}")]
    Embedding(String),
    #[error("embedder returned {found} vectors for {expected} questions")]
    EmbeddingCount { expected: usize, found: usize },
}

/// `(qid, label)` for every gold question, answerability from its flag.
pub fn label_gold(gold: &GoldSet) -> Result<Vec<(String, QuestionLabel)>, AnalysisError> {
    gold.entries
        .iter()
        .map(|e| {
            let ctx = gold.context_of(e).ok_or_else(|| AnalysisError::MissingContext(e.qid.clone()))?;
            Ok((e.qid.clone(), label_question(&e.question, ctx, !e.unanswerable)))
        })
        .collect()
}

/// Count per type code; all four codes are present.
pub fn type_counts(labels: &[QuestionLabel]) -> BTreeMap<TypeCode, usize> {
    let mut counts: BTreeMap<TypeCode, usize> = TypeCode::ALL.iter().map(|c| (*c, 0)).collect();
    for l in labels {
        *counts.get_mut(&l.type_code).expect("all codes present") += 1;
    }
    counts
}

/// Percentage per type code; empty input gives all zeros.
pub fn type_distribution(labels: &[QuestionLabel]) -> BTreeMap<TypeCode, f64> {
    let n = labels.len();
    type_counts(labels)
        .into_iter()
        .map(|(c, k)| (c, if n == 0 { 0.0 } else { 100.0 * k as f64 / n as f64 }))
        .collect()
}

/// Questions generated from (or asked about) one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionGroup {
    pub doc_id: String,
    pub questions: Vec<String>,
}

pub trait Embedder {
    /// One vector per text, positionally aligned.
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String>;
}

/// Adapter for closures.
pub struct FnEmbedder<F>(pub F);

impl<F: Fn(&[String]) -> Result<Vec<Vec<f64>>, String>> Embedder for FnEmbedder<F> {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        (self.0)(texts)
    }
}

/// Inputs per embedding request.
const EMBED_BATCH: usize = 256;

impl Embedder for Gateway {
    fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        let mut out = Vec::with_capacity(texts.len());
        for (i, chunk) in texts.chunks(EMBED_BATCH).enumerate() {
            let tag = crate::llm::request_tag("embed", &format!("analysis#{i:04}"));
            let vectors = Gateway::embed(self, chunk, &tag).map_err(|e| e.to_string())?;
            out.extend(vectors.into_iter().map(|v| v.values));
        }
        Ok(out)
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

/// Lowercased first whitespace token.
pub fn question_prefix(question: &str) -> Option<String> {
    question.split_whitespace().next().map(str::to_lowercase)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub n_questions: usize,
    pub avg_length: f64,
    pub vocab_size: usize,
    /// `None` when no document has two or more questions.
    pub aps: Option<f64>,
    pub aqp: f64,
    /// Empty unless labels were supplied.
    pub type_distribution: BTreeMap<TypeCode, f64>,
}

/// Length and vocabulary use [`plain_tokens`]. APS macro-averages, over
/// documents with at least two questions, the mean cosine of all unordered
/// within-document pairs. AQP averages distinct prefixes over non-empty
/// documents.
pub fn diversity_report(
    groups: &[QuestionGroup],
    embedder: &dyn Embedder,
    labels: Option<&[QuestionLabel]>,
) -> Result<DiversityReport, AnalysisError> {
    let all: Vec<String> = groups.iter().flat_map(|g| g.questions.iter().cloned()).collect();
    if all.is_empty() {
        return Err(AnalysisError::Empty);
    }
    let mut vocab: HashSet<String> = HashSet::new();
    let mut total_len = 0usize;
    for q in &all {
        let toks = plain_tokens(q);
        total_len += toks.len();
        vocab.extend(toks);
    }

    let multi: Vec<&QuestionGroup> = groups.iter().filter(|g| g.questions.len() >= 2).collect();
    let aps = if multi.is_empty() {
        None
    } else {
        let texts: Vec<String> = multi.iter().flat_map(|g| g.questions.iter().cloned()).collect();
        let vectors = embedder.embed(&texts).map_err(AnalysisError::Embedding)?;
        if vectors.len() != texts.len() {
            return Err(AnalysisError::EmbeddingCount { expected: texts.len(), found: vectors.len() });
        }
        let mut offset = 0;
        let mut per_doc = Vec::with_capacity(multi.len());
        for g in &multi {
            let v = &vectors[offset..offset + g.questions.len()];
            offset += g.questions.len();
            let mut sum = 0.0;
            let mut pairs = 0usize;
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    sum += cosine(&v[i], &v[j]);
                    pairs += 1;
                }
            }
            per_doc.push(sum / pairs as f64);
        }
        Some(per_doc.iter().sum::<f64>() / per_doc.len() as f64)
    };

    let prefix_counts: Vec<usize> = groups
        .iter()
        .filter(|g| !g.questions.is_empty())
        .map(|g| g.questions.iter().filter_map(|q| question_prefix(q)).collect::<HashSet<_>>().len())
        .collect();
    let aqp = prefix_counts.iter().sum::<usize>() as f64 / prefix_counts.len() as f64;

    Ok(DiversityReport {
        n_questions: all.len(),
        avg_length: total_len as f64 / all.len() as f64,
        vocab_size: vocab.len(),
        aps,
        aqp,
        type_distribution: labels.map(type_distribution).unwrap_or_default(),
    })
}

/// Aligned text table, one row per named report.
pub fn format_diversity_table(rows: &[(String, DiversityReport)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} {:>6} {:>7} {:>6} {:>6} {:>5} {:>6} {:>6} {:>6} {:>6}",
        "source", "n", "length", "vocab", "APS", "AQP", "OA%", "OU%", "NOA%", "NOU%"
    );
    for (name, r) in rows {
        let aps = r.aps.map_or_else(|| "-".to_string(), |a| format!("{a:.3}"));
        let pct = |c: TypeCode| r.type_distribution.get(&c).map_or_else(|| "-".to_string(), |p| format!("{p:.1}"));
        let _ = writeln!(
            out,
            "{:<24} {:>6} {:>7.2} {:>6} {:>6} {:>5.2} {:>6} {:>6} {:>6} {:>6}",
            name,
            r.n_questions,
            r.avg_length,
            r.vocab_size,
            aps,
            r.aqp,
            pct(TypeCode::OA),
            pct(TypeCode::OU),
            pct(TypeCode::NOA),
            pct(TypeCode::NOU)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const SAMPLE_REPORT: &str = "FINAL REPORT HISTORY: Stroke, abdominal pain. Evaluate for free air. \
        FINDINGS: Subcutaneous air is still present in the right upper quadrant.";

    fn group(doc: &str, qs: &[&str]) -> QuestionGroup {
        QuestionGroup { doc_id: doc.into(), questions: qs.iter().map(|q| q.to_string()).collect() }
    }

    fn one_hot(texts: &[String]) -> Result<Vec<Vec<f64>>, String> {
        Ok(texts.iter().enumerate().map(|(i, _)| (0..texts.len()).map(|j| f64::from(u8::from(i == j))).collect()).collect())
    }

    #[test]
    fn stopword_list_is_pinned() {
        assert_eq!(stopwords().len(), 179);
        assert!(is_stopword("the") && is_stopword("wouldn") && !is_stopword("tube"));
    }

    #[test]
    fn content_tokenization() {
        assert_eq!(content_tokens("Is the G-tube patent?"), ["g", "tube", "patent"]);
        assert!(content_tokens("Is there any of the?").is_empty());
        assert!(content_tokens("").is_empty());
    }

    #[test]
    fn overlap_classification() {
        assert!(classify_overlap("Is there air under the diaphragm?", SAMPLE_REPORT));
        assert!(!classify_overlap("Is there any evidence of gastrointestinal perforation?", SAMPLE_REPORT));
        assert!(!classify_overlap("Is there any of the?", SAMPLE_REPORT));
    }

    #[test]
    fn type_codes() {
        assert_eq!(QuestionLabel::new(true, true).type_code, TypeCode::OA);
        assert_eq!(QuestionLabel::new(false, false).type_code, TypeCode::NOU);
        let labels: Vec<_> = [(true, true), (true, false), (false, true), (false, false)]
            .iter()
            .map(|&(o, a)| QuestionLabel::new(o, a))
            .collect();
        assert!(type_distribution(&labels).values().all(|p| *p == 25.0));
    }

    #[test]
    fn aps_and_aqp() {
        let same = group("d", &["Is it?", "Is it?"]);
        let r = diversity_report(&[same], &FnEmbedder(|t: &[String]| Ok(vec![vec![0.3, 0.4]; t.len()])), None).unwrap();
        assert_abs_diff_eq!(r.aps.unwrap(), 1.0, epsilon = 1e-9);

        let r = diversity_report(&[group("d", &["Is a?", "What b?"])], &FnEmbedder(one_hot), None).unwrap();
        assert_abs_diff_eq!(r.aps.unwrap(), 0.0, epsilon = 1e-9);

        let r = diversity_report(&[group("d", &["Is a?", "What b?", "is c?"])], &FnEmbedder(one_hot), None).unwrap();
        assert_eq!(r.aqp, 2.0);
        assert_eq!(r.vocab_size, 5);
        assert_eq!(r.avg_length, 2.0);
    }

    #[test]
    fn aps_skips_single_question_documents() {
        let groups = [group("a", &["Only one?"])];
        let r = diversity_report(&groups, &FnEmbedder(|_: &[String]| Err("unused".to_string())), None).unwrap();
        assert_eq!(r.aps, None);
        assert!(matches!(
            diversity_report(&[group("a", &[])], &FnEmbedder(one_hot), None),
            Err(AnalysisError::Empty)
        ));
    }
}
