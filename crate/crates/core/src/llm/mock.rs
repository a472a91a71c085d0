//! Offline backends. All are deterministic in their inputs and count
//! whitespace tokens for usage.
//!
//! * [`EchoBackend`]: replies `ECHO:<sha256 of prompt>`.
//! * [`SyntheticBackend`]: reads the rendered prompt and answers like a
//!   well-behaved model would (indexed questions, JSON summaries, quoted
//!   answers that are exact substrings of the context).
//! * [`ScriptedBackend`]: replays a JSONL transcript keyed by `(stage, unit)`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{split_tag, whitespace_tokens, Backend, BackendError, BackendReply, CompletionRequest, TransientKind, Usage};
use crate::text;

pub const MOCK_EMBEDDING_DIM: usize = 64;

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    h.finalize().into()
}

fn digest_u64(parts: &[&[u8]]) -> u64 {
    let d = digest(parts);
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Unit-norm vector seeded by `(seed, text)`.
pub fn hashed_unit_vector(seed: u64, text: &str, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::from_seed(digest(&[&seed.to_le_bytes(), text.as_bytes()]));
    let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn mock_embed(seed: u64, texts: &[String]) -> (Vec<Vec<f64>>, Usage) {
    let vectors = texts.iter().map(|t| hashed_unit_vector(seed, t, MOCK_EMBEDDING_DIM)).collect();
    let input_tokens = texts.iter().map(|t| whitespace_tokens(t)).sum();
    (vectors, Usage { input_tokens, output_tokens: 0 })
}

fn reply(prompt: &str, text: String) -> BackendReply {
    let usage = Usage { input_tokens: whitespace_tokens(prompt), output_tokens: whitespace_tokens(&text) };
    BackendReply { text, usage }
}

#[derive(Debug, Clone, Default)]
pub struct EchoBackend {
    pub seed: u64,
}

impl Backend for EchoBackend {
    fn id(&self) -> &str {
        "mock:echo"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, BackendError> {
        let text = format!("ECHO:{}", hex(&Sha256::digest(req.prompt.as_bytes())));
        Ok(reply(&req.prompt, text))
    }

    fn embed(&self, _: &str, texts: &[String]) -> Result<(Vec<Vec<f64>>, Usage), BackendError> {
        Ok(mock_embed(self.seed, texts))
    }
}

/// Which distilled questions the synthetic model answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "k")]
pub enum AnswerPolicy {
    All,
    None,
    /// The first `k` questions of every distillation call.
    FirstK(usize),
    /// Roughly two in three, chosen by hash.
    Mixed,
}

impl std::str::FromStr for AnswerPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "all" => Ok(Self::All),
            "none" => Ok(Self::None),
            "mixed" => Ok(Self::Mixed),
            other => other
                .strip_prefix("first:")
                .and_then(|k| k.parse().ok())
                .map(Self::FirstK)
                .ok_or_else(|| format!("unknown answer policy `{other}` (all, none, mixed, first:<k>)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    pub seed: u64,
    pub policy: AnswerPolicy,
}

impl SyntheticBackend {
    pub fn new(seed: u64, policy: AnswerPolicy) -> Self {
        Self { seed, policy }
    }
}

fn re(cell: &'static OnceLock<Regex>, pattern: &str) -> &'static Regex {
    cell.get_or_init(|| Regex::new(pattern).expect("valid regex"))
}

/// Body between the first `<tag>` line and its closing `</tag>` line.
fn tagged_body(prompt: &str) -> &str {
    static OPEN: OnceLock<Regex> = OnceLock::new();
    let Some(c) = re(&OPEN, r"(?m)^<([a-z_]+)>\n").captures(prompt) else { return "" };
    let start = c.get(0).expect("match").end();
    let close = format!("\n</{}>", &c[1]);
    match prompt[start..].find(&close) {
        Some(end) => &prompt[start..start + end],
        None => &prompt[start..],
    }
}

/// Words of at least four letters, as candidate question topics.
fn topic_words(context: &str) -> Vec<String> {
    context
        .split(|c: char| !c.is_alphabetic())
        .filter(|w| w.chars().count() >= 4)
        .map(str::to_lowercase)
        .collect()
}

/// Concepts the synthetic model may ask about without lexical overlap.
const UNSEEN_CONCEPTS: [&str; 10] = [
    "hemorrhage",
    "pneumothorax",
    "effusion",
    "fracture",
    "infection",
    "obstruction",
    "edema",
    "malignancy",
    "perforation",
    "aneurysm",
];

impl SyntheticBackend {
    fn pick(&self, tag: &str, salt: &str, i: usize) -> u64 {
        digest_u64(&[&self.seed.to_le_bytes(), tag.as_bytes(), salt.as_bytes(), &(i as u64).to_le_bytes()])
    }

    fn questions(&self, req: &CompletionRequest) -> String {
        static NUM: OnceLock<Regex> = OnceLock::new();
        let n: usize = re(&NUM, r"generate (\d+) questions")
            .captures(&req.prompt)
            .and_then(|c| c[1].parse().ok())
            .unwrap_or(5);
        let topics = topic_words(tagged_body(&req.prompt));
        let lines: Vec<String> = (0..n)
            .map(|i| {
                let h = self.pick(&req.request_tag, &req.prompt, i);
                let topic = if topics.is_empty() || h.is_multiple_of(4) {
                    UNSEEN_CONCEPTS[(h >> 8) as usize % UNSEEN_CONCEPTS.len()].to_string()
                } else {
                    topics[(h >> 8) as usize % topics.len()].clone()
                };
                let q = match (h >> 32) % 6 {
                    0 => format!("Is there any evidence of {topic}?"),
                    1 => format!("What does the study show regarding {topic}?"),
                    2 => format!("Has the {topic} changed since the prior examination?"),
                    3 => format!("Which findings relate to {topic}?"),
                    4 => format!("How severe is the {topic}?"),
                    _ => format!("Does the patient have signs of {topic}?"),
                };
                format!("{}. {q}", i + 1)
            })
            .collect();
        lines.join("\n")
    }

    /// A window of 2..=6 words from one line of `context`, sliced verbatim.
    fn quote<'a>(&self, context: &'a str, h: u64) -> Option<&'a str> {
        let lines: Vec<&str> = context.lines().filter(|l| !l.trim().is_empty()).collect();
        if lines.is_empty() {
            return None;
        }
        let line = lines[h as usize % lines.len()];
        let words = text::word_spans(line);
        let len = (2 + (h >> 16) as usize % 5).min(words.len());
        let start = (h >> 24) as usize % (words.len() - len + 1);
        Some(&line[words[start].start..words[start + len - 1].end])
    }

    fn answers(&self, req: &CompletionRequest) -> String {
        let context = tagged_body(&req.prompt);
        let after = req.prompt.rfind("</").map_or("", |i| &req.prompt[i..]);
        let questions: Vec<&str> = after.lines().filter_map(|l| l.strip_prefix("Q: ")).collect();
        let blocks: Vec<String> = questions
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let h = self.pick(&req.request_tag, q, i);
                let answerable = match self.policy {
                    AnswerPolicy::All => true,
                    AnswerPolicy::None => false,
                    AnswerPolicy::FirstK(k) => i < k,
                    AnswerPolicy::Mixed => !h.is_multiple_of(3),
                };
                match self.quote(context, h).filter(|_| answerable) {
                    Some(quote) => format!("Q: {q}\nA: \"{quote}\""),
                    None => format!("Q: {q}\nA: Unanswerable"),
                }
            })
            .collect();
        blocks.join("\n\n")
    }

    fn summary(&self, req: &CompletionRequest) -> String {
        static ATTR: OnceLock<Regex> = OnceLock::new();
        let context = tagged_body(&req.prompt);
        let attrs: Vec<&str> = re(&ATTR, r#""([a-z_]+)": \["#)
            .captures_iter(&req.prompt)
            .map(|c| c.get(1).expect("group").as_str())
            .collect();
        let words: Vec<&str> = context.split_whitespace().collect();
        if attrs.is_empty() {
            let head: Vec<&str> = words.iter().take(30).copied().collect();
            return format!("The record describes {}.", head.join(" "));
        }
        let topics = topic_words(context);
        let mut map = indexmap::IndexMap::new();
        for (i, attr) in attrs.iter().enumerate() {
            let h = self.pick(&req.request_tag, attr, i);
            let values: Vec<String> = if topics.is_empty() {
                Vec::new()
            } else {
                (0..1 + (h % 2) as usize).map(|j| topics[(h >> (8 * (j + 1))) as usize % topics.len()].clone()).collect()
            };
            map.insert(attr.to_string(), values);
        }
        serde_json::to_string_pretty(&map).expect("summary serializes")
    }
}

impl Backend for SyntheticBackend {
    fn id(&self) -> &str {
        "mock:synthetic"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, BackendError> {
        let text = match split_tag(&req.request_tag).0 {
            "summarization" => self.summary(req),
            "question_gen" => self.questions(req),
            "answer_distill" => self.answers(req),
            other => return Err(BackendError::Fatal(format!("synthetic mock has no behavior for stage `{other}`"))),
        };
        Ok(reply(&req.prompt, text))
    }

    fn embed(&self, _: &str, texts: &[String]) -> Result<(Vec<Vec<f64>>, Usage), BackendError> {
        Ok(mock_embed(self.seed, texts))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScriptedError {
    RateLimit,
    Server,
    Auth,
    ContentFilter,
}

/// One transcript line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptEntry {
    pub stage: String,
    /// Unit id, or `*` to match any unit of the stage.
    pub unit: String,
    #[serde(default)]
    pub response: Option<String>,
    #[serde(default)]
    pub error: Option<ScriptedError>,
}

/// Replays transcript entries. Entries sharing a key are served in file order;
/// the last one repeats once the sequence is exhausted. Lookup tries the exact
/// unit, then the unit with any `@...` suffix removed, then `*`.
pub struct ScriptedBackend {
    entries: HashMap<(String, String), Vec<ScriptEntry>>,
    cursors: Mutex<HashMap<(String, String), usize>>,
    fallback: Option<Arc<dyn Backend>>,
    seed: u64,
}

impl ScriptedBackend {
    pub fn new(entries: Vec<ScriptEntry>) -> Self {
        let mut map: HashMap<(String, String), Vec<ScriptEntry>> = HashMap::new();
        for e in entries {
            map.entry((e.stage.clone(), e.unit.clone())).or_default().push(e);
        }
        Self { entries: map, cursors: Mutex::new(HashMap::new()), fallback: None, seed: 0 }
    }

    pub fn from_jsonl(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut entries = Vec::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: ScriptEntry =
                serde_json::from_str(line).map_err(|e| format!("{}:{}: {e}", path.display(), i + 1))?;
            if entry.response.is_none() && entry.error.is_none() {
                return Err(format!("{}:{}: entry needs `response` or `error`", path.display(), i + 1));
            }
            entries.push(entry);
        }
        Ok(Self::new(entries))
    }

    /// Backend consulted when no entry matches.
    pub fn with_fallback(mut self, fallback: Arc<dyn Backend>) -> Self {
        self.fallback = Some(fallback);
        self
    }

    fn next_entry(&self, stage: &str, unit: &str) -> Option<ScriptEntry> {
        let base = unit.split('@').next().unwrap_or(unit);
        let key = [unit, base, "*"]
            .into_iter()
            .map(|u| (stage.to_string(), u.to_string()))
            .find(|k| self.entries.contains_key(k))?;
        let list = &self.entries[&key];
        let mut cursors = self.cursors.lock().expect("cursor lock");
        let cursor = cursors.entry(key).or_insert(0);
        let entry = list[(*cursor).min(list.len() - 1)].clone();
        *cursor += 1;
        Some(entry)
    }
}

impl Backend for ScriptedBackend {
    fn id(&self) -> &str {
        "mock:scripted"
    }

    fn complete(&self, req: &CompletionRequest) -> Result<BackendReply, BackendError> {
        let (stage, unit) = split_tag(&req.request_tag);
        let Some(entry) = self.next_entry(stage, unit) else {
            return match &self.fallback {
                Some(fb) => fb.complete(req),
                None => Err(BackendError::Fatal(format!("no scripted response for `{}`", req.request_tag))),
            };
        };
        match (entry.error, entry.response) {
            (Some(ScriptedError::RateLimit), _) => {
                Err(BackendError::Transient { kind: TransientKind::RateLimit, message: "scripted 429".into() })
            }
            (Some(ScriptedError::Server), _) => {
                Err(BackendError::Transient { kind: TransientKind::Server, message: "scripted 500".into() })
            }
            (Some(ScriptedError::Auth), _) => Err(BackendError::Auth("scripted auth failure".into())),
            (Some(ScriptedError::ContentFilter), _) => Err(BackendError::ContentFilter("scripted filter".into())),
            (None, Some(text)) => Ok(reply(&req.prompt, text)),
            (None, None) => Err(BackendError::Fatal("empty script entry".into())),
        }
    }

    fn embed(&self, model: &str, texts: &[String]) -> Result<(Vec<Vec<f64>>, Usage), BackendError> {
        match &self.fallback {
            Some(fb) => fb.embed(model, texts),
            None => Ok(mock_embed(self.seed, texts)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompting::{parse_indexed_list, parse_qa_block, AnswerOutcome};

    fn req(tag: &str, prompt: &str) -> CompletionRequest {
        CompletionRequest {
            model_id: "m".into(),
            prompt: prompt.into(),
            temperature: 0.0,
            max_output_tokens: 100,
            request_tag: tag.into(),
        }
    }

    #[test]
    fn echo_is_deterministic() {
        let b = EchoBackend::default();
        let a = b.complete(&req("x/y", "P")).unwrap();
        assert_eq!(a, b.complete(&req("x/y", "P")).unwrap());
        assert!(a.text.starts_with("ECHO:"));
        assert_eq!(a.text.len(), 5 + 64);
        assert_ne!(a.text, b.complete(&req("x/y", "Q")).unwrap().text);
    }

    #[test]
    fn mock_vectors_are_unit_norm() {
        let b = EchoBackend { seed: 3 };
        let (v, _) = b.embed("m", &["a".into(), "a".into(), "b".into()]).unwrap();
        assert_eq!(v[0], v[1]);
        assert_ne!(v[0], v[2]);
        for x in &v {
            let norm: f64 = x.iter().map(|e| e * e).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn synthetic_questions_parse_with_requested_count() {
        let b = SyntheticBackend::new(0, AnswerPolicy::All);
        let prompt = "<radiology_report>\nFINDINGS: Subcutaneous air is present.\n</radiology_report>\n\nPlease generate 7 questions now.";
        let out = b.complete(&req("question_gen/d1", prompt)).unwrap();
        assert_eq!(parse_indexed_list(&out.text, Some(7)).unwrap().len(), 7);
    }

    #[test]
    fn synthetic_answers_quote_the_context() {
        let context = "The G-tube placement is unchanged.\nSubcutaneous air is still present.";
        let prompt = format!("<clinical_record>\n{context}\n</clinical_record>\n\nInstructions \"Q: ...\".\n\nQ: one?\nQ: two?\nQ: three?");
        let b = SyntheticBackend::new(1, AnswerPolicy::FirstK(2));
        let pairs = parse_qa_block(&b.complete(&req("answer_distill/d1", &prompt)).unwrap().text).unwrap();
        assert_eq!(pairs.len(), 3);
        for (i, (_, outcome)) in pairs.iter().enumerate() {
            match outcome {
                AnswerOutcome::Quoted(q) => {
                    assert!(i < 2);
                    assert!(context.contains(q.as_str()), "{q}");
                }
                AnswerOutcome::Unanswerable => assert_eq!(i, 2),
            }
        }
    }

    #[test]
    fn scripted_sequences_and_fallback_order() {
        let entries = vec![
            ScriptEntry { stage: "question_gen".into(), unit: "d1".into(), response: None, error: Some(ScriptedError::RateLimit) },
            ScriptEntry { stage: "question_gen".into(), unit: "d1".into(), response: Some("1. a".into()), error: None },
            ScriptEntry { stage: "question_gen".into(), unit: "*".into(), response: Some("1. any".into()), error: None },
        ];
        let b = ScriptedBackend::new(entries);
        assert!(matches!(b.complete(&req("question_gen/d1", "p")), Err(BackendError::Transient { .. })));
        assert_eq!(b.complete(&req("question_gen/d1", "p")).unwrap().text, "1. a");
        assert_eq!(b.complete(&req("question_gen/d1@r2", "p")).unwrap().text, "1. a");
        assert_eq!(b.complete(&req("question_gen/other", "p")).unwrap().text, "1. any");
        assert!(matches!(b.complete(&req("summarization/d1", "p")), Err(BackendError::Fatal(_))));
    }

    #[test]
    fn answer_policy_names() {
        assert_eq!("first:3".parse::<AnswerPolicy>().unwrap(), AnswerPolicy::FirstK(3));
        assert_eq!("all".parse::<AnswerPolicy>().unwrap(), AnswerPolicy::All);
        assert!("some".parse::<AnswerPolicy>().is_err());
    }
}
