//! Source documents: loading, report sections, word-bounded segments and
//! reproducible sampling.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::{GoldAnswer, GoldEntry, GoldSet};
use crate::squad::{SquadAnswer, SquadArticle, SquadFile, SquadParagraph, SquadQa};
use crate::text;

/// Report subsections the RadQA recipe answers against.
pub const RADQA_SECTIONS: [&str; 2] = ["FINDINGS", "IMPRESSION"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: record {index}: field `{field}`: {message}")]
    Malformed {
        path: PathBuf,
        index: usize,
        field: String,
        message: String,
    },
    #[error("duplicate document id `{0}`")]
    DuplicateId(String),
    #[error("document `{0}` is empty")]
    EmptyDocument(String),
    #[error("cannot sample {requested} documents from a corpus of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("max_words must be at least 1")]
    ZeroMaxWords,
    #[error("unknown input format `{0}` (expected squad_v2, plain_text_dir or jsonl)")]
    UnknownFormat(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    SquadV2,
    PlainTextDir,
    Jsonl,
}

impl FromStr for InputFormat {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "squad_v2" | "squad" => Ok(Self::SquadV2),
            "plain_text_dir" | "txt" => Ok(Self::PlainTextDir),
            "jsonl" => Ok(Self::Jsonl),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

impl fmt::Display for InputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SquadV2 => "squad_v2",
            Self::PlainTextDir => "plain_text_dir",
            Self::Jsonl => "jsonl",
        })
    }
}

/// A named span of a document, in characters, half-open.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub sections: Vec<Section>,
    pub word_count: usize,
}

impl Document {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self { id: id.into(), word_count: text::word_count(&text), text, sections: Vec::new() }
    }

    /// Populate `sections` from the given headers.
    pub fn with_sections(mut self, headers: &[&str]) -> Self {
        self.sections = extract_sections(&self, headers);
        self
    }

    pub fn section_text(&self, section: &Section) -> &str {
        text::char_slice(&self.text, section.char_start..section.char_end).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub doc_id: String,
    pub index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub word_count: usize,
}

impl Segment {
    pub fn text<'a>(&self, doc: &'a Document) -> &'a str {
        text::char_slice(&doc.text, self.char_start..self.char_end).unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusSample {
    pub seed: u64,
    pub requested_n: usize,
    pub doc_ids: Vec<String>,
}

/// Everything a loader produced. `gold` is only populated for SQuAD input.
#[derive(Debug, Clone, Default)]
pub struct LoadedCorpus {
    pub documents: Vec<Document>,
    pub gold: GoldSet,
    /// SQuAD article title per document id.
    pub titles: HashMap<String, String>,
}

pub fn load_documents(path: &Path, format: InputFormat) -> Result<Vec<Document>, CorpusError> {
    load_corpus(path, format).map(|c| c.documents)
}

pub fn load_corpus(path: &Path, format: InputFormat) -> Result<LoadedCorpus, CorpusError> {
    let corpus = match format {
        InputFormat::SquadV2 => load_squad(path)?,
        InputFormat::PlainTextDir => LoadedCorpus { documents: load_text_dir(path)?, ..Default::default() },
        InputFormat::Jsonl => LoadedCorpus { documents: load_jsonl(path)?, ..Default::default() },
    };
    let mut seen = HashSet::new();
    for doc in &corpus.documents {
        if !seen.insert(doc.id.as_str()) {
            return Err(CorpusError::DuplicateId(doc.id.clone()));
        }
    }
    Ok(corpus)
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

fn load_text_dir(dir: &Path) -> Result<Vec<Document>, CorpusError> {
    let io = |source| CorpusError::Io { path: dir.to_path_buf(), source };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "txt"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok(Document::new(stem, read(p)?))
        })
        .collect()
}

#[derive(Deserialize)]
struct JsonlRecord {
    id: Option<serde_json::Value>,
    text: Option<String>,
}

fn load_jsonl(path: &Path) -> Result<Vec<Document>, CorpusError> {
    let raw = read(path)?;
    let mut docs = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |field: &str, message: String| CorpusError::Malformed {
            path: path.to_path_buf(),
            index: line_no,
            field: field.to_string(),
            message,
        };
        let rec: JsonlRecord = serde_json::from_str(line).map_err(|e| malformed("<line>", e.to_string()))?;
        let id = match rec.id {
            Some(serde_json::Value::String(s)) => s,
            Some(serde_json::Value::Number(n)) => n.to_string(),
            Some(_) => return Err(malformed("id", "expected a string or number".into())),
            None => return Err(malformed("id", "missing".into())),
        };
        let text = rec.text.ok_or_else(|| malformed("text", "missing".into()))?;
        docs.push(Document::new(id, text));
    }
    Ok(docs)
}

fn load_squad(path: &Path) -> Result<LoadedCorpus, CorpusError> {
    let raw = read(path)?;
    let file: SquadFile = serde_json::from_str(&raw).map_err(|e| CorpusError::Malformed {
        path: path.to_path_buf(),
        index: 0,
        field: "<file>".into(),
        message: e.to_string(),
    })?;
    corpus_from_squad(&file).map_err(|(index, field, message)| CorpusError::Malformed {
        path: path.to_path_buf(),
        index,
        field,
        message,
    })
}

/// Build documents and gold entries from an in-memory SQuAD file. Errors carry
/// the global paragraph index, the offending field and a message.
pub fn corpus_from_squad(file: &SquadFile) -> Result<LoadedCorpus, (usize, String, String)> {
    let mut out = LoadedCorpus::default();
    let mut index = 0usize;
    for (a_idx, article) in file.data.iter().enumerate() {
        for (p_idx, para) in article.paragraphs.iter().enumerate() {
            let id = match (&para.document_id, article.title.is_empty()) {
                (Some(id), _) => id.clone(),
                (None, false) => format!("{}#{p_idx}", article.title),
                (None, true) => format!("a{a_idx}p{p_idx}"),
            };
            for qa in &para.qas {
                if qa.is_impossible != qa.answers.is_empty() {
                    return Err((
                        index,
                        format!("qas[{}].is_impossible", qa.id),
                        "is_impossible must hold exactly when answers is empty".into(),
                    ));
                }
                let mut answers = Vec::with_capacity(qa.answers.len());
                for ans in &qa.answers {
                    let end = ans.answer_start + text::char_len(&ans.text);
                    if text::char_slice(&para.context, ans.answer_start..end) != Some(ans.text.as_str()) {
                        return Err((
                            index,
                            format!("qas[{}].answers.answer_start", qa.id),
                            format!("context slice at {} does not equal answer text", ans.answer_start),
                        ));
                    }
                    answers.push(GoldAnswer { text: ans.text.clone(), char_start: ans.answer_start });
                }
                out.gold.entries.push(GoldEntry {
                    qid: qa.id.clone(),
                    question: qa.question.clone(),
                    context_id: id.clone(),
                    answers,
                    unanswerable: qa.is_impossible,
                });
            }
            out.gold.contexts.insert(id.clone(), para.context.clone());
            out.titles.insert(id.clone(), article.title.clone());
            out.documents.push(Document::new(id, para.context.clone()));
            index += 1;
        }
    }
    Ok(out)
}

/// Rebuild a SQuAD file from a loaded one: consecutive documents sharing an
/// article title form one article; questions keep their loaded order.
pub fn squad_from_corpus(corpus: &LoadedCorpus) -> SquadFile {
    let mut qas: HashMap<&str, Vec<SquadQa>> = HashMap::new();
    for e in &corpus.gold.entries {
        qas.entry(e.context_id.as_str()).or_default().push(SquadQa {
            id: e.qid.clone(),
            question: e.question.clone(),
            answers: e.answers.iter().map(|a| SquadAnswer { text: a.text.clone(), answer_start: a.char_start }).collect(),
            is_impossible: e.unanswerable,
        });
    }
    let mut articles: Vec<SquadArticle> = Vec::new();
    for doc in &corpus.documents {
        let title = corpus.titles.get(&doc.id).cloned().unwrap_or_default();
        let paragraph = SquadParagraph {
            document_id: Some(doc.id.clone()),
            context: doc.text.clone(),
            qas: qas.remove(doc.id.as_str()).unwrap_or_default(),
        };
        match articles.last_mut() {
            Some(a) if a.title == title => a.paragraphs.push(paragraph),
            _ => articles.push(SquadArticle { title, paragraphs: vec![paragraph] }),
        }
    }
    SquadFile::new(articles)
}

/// Sections introduced by `HEADER:` (ASCII case-insensitive, not preceded by
/// an alphanumeric). Each section runs from just after the colon to the next
/// header token of any listed kind, or to the end of the text. Only the first
/// occurrence of each header opens a section; empty sections are dropped.
pub fn extract_sections(doc: &Document, headers: &[&str]) -> Vec<Section> {
    let lower = doc.text.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    // (token start, token end, header index), byte offsets
    let mut markers: Vec<(usize, usize, usize)> = Vec::new();
    for (h_idx, header) in headers.iter().enumerate() {
        let token = format!("{}:", header.to_ascii_lowercase());
        if token.len() == 1 {
            continue;
        }
        let mut from = 0;
        while let Some(pos) = lower[from..].find(&token) {
            let at = from + pos;
            let boundary = at == 0 || !(bytes[at - 1] as char).is_ascii_alphanumeric();
            if boundary {
                markers.push((at, at + token.len(), h_idx));
            }
            from = at + 1;
        }
    }
    markers.sort();

    let mut sections = Vec::new();
    let mut opened = vec![false; headers.len()];
    for (i, &(_, token_end, h_idx)) in markers.iter().enumerate() {
        if opened[h_idx] {
            continue;
        }
        opened[h_idx] = true;
        let end = markers[i + 1..]
            .iter()
            .map(|m| m.0)
            .find(|&s| s >= token_end)
            .unwrap_or(doc.text.len());
        if end <= token_end {
            continue;
        }
        sections.push(Section {
            name: headers[h_idx].to_string(),
            char_start: text::byte_to_char(&doc.text, token_end),
            char_end: text::byte_to_char(&doc.text, end),
        });
    }
    for header in headers {
        if !sections.iter().any(|s| s.name == *header) {
            log::debug!("document {}: no `{header}:` section", doc.id);
        }
    }
    sections.sort_by_key(|s| s.char_start);
    sections
}

/// Greedy left-to-right packing of whitespace-delimited words, `max_words`
/// per segment. Segment `i` runs from its first word to the first word of
/// segment `i + 1`, so segments tile the span from the first word to the
/// last word of the document.
pub fn segment_document(doc: &Document, max_words: usize) -> Result<Vec<Segment>, CorpusError> {
    if max_words == 0 {
        return Err(CorpusError::ZeroMaxWords);
    }
    let words = text::word_spans(&doc.text);
    if words.is_empty() {
        return Err(CorpusError::EmptyDocument(doc.id.clone()));
    }
    let chunks: Vec<&[std::ops::Range<usize>]> = words.chunks(max_words).collect();
    let mut segments = Vec::with_capacity(chunks.len());
    let mut char_cursor = text::byte_to_char(&doc.text, words[0].start);
    for (index, chunk) in chunks.iter().enumerate() {
        let byte_end = match chunks.get(index + 1) {
            Some(next) => next[0].start,
            None => chunk[chunk.len() - 1].end,
        };
        let byte_start = chunk[0].start;
        let char_end = char_cursor + text::char_len(&doc.text[byte_start..byte_end]);
        segments.push(Segment {
            doc_id: doc.id.clone(),
            index,
            char_start: char_cursor,
            char_end,
            word_count: chunk.len(),
        });
        char_cursor = char_end;
    }
    Ok(segments)
}

/// Seeded shuffle of the corpus order, truncated to `n`. Because the full
/// permutation depends only on the seed and the corpus size, smaller samples
/// are prefixes of larger ones for the same seed.
pub fn sample_documents(corpus: &[Document], n: usize, seed: u64) -> Result<CorpusSample, CorpusError> {
    if n > corpus.len() {
        return Err(CorpusError::SampleTooLarge { requested: n, available: corpus.len() });
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(CorpusSample {
        seed,
        requested_n: n,
        doc_ids: order[..n].iter().map(|&i| corpus[i].id.clone()).collect(),
    })
}
