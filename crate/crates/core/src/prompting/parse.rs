use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::ParseError;

/// A distilled answer: a quotation from the context, or the model's refusal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnswerOutcome {
    Quoted(String),
    Unanswerable,
}

fn indexed_item_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // optional bullet, optional bold around the index, "N." or "N)"
    RE.get_or_init(|| {
        Regex::new(r"^\s*(?:[-*+]\s+)?(?:\*\*|__)?(\d{1,4})[.)](?:\*\*|__)?\s+(.*\S)\s*$").expect("valid regex")
    })
}

fn strip_emphasis(s: &str) -> &str {
    let mut s = s.trim();
    for marker in ["**", "__"] {
        if let Some(inner) = s.strip_prefix(marker).and_then(|x| x.strip_suffix(marker)) {
            s = inner.trim();
        }
    }
    s
}

/// Items of an indexed list (`1. ...` or `1) ...`), in order.
pub fn parse_indexed_list(text: &str, expected_n: Option<usize>) -> Result<Vec<String>, ParseError> {
    let items: Vec<String> = text
        .lines()
        .filter_map(|line| indexed_item_re().captures(line))
        .map(|c| strip_emphasis(c.get(2).map_or("", |m| m.as_str())).to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if items.is_empty() {
        return Err(ParseError::NoIndexedItems);
    }
    match expected_n {
        Some(n) if n != items.len() => Err(ParseError::CountMismatch { expected: n, items }),
        _ => Ok(items),
    }
}

enum Line<'a> {
    Question(&'a str),
    Answer(&'a str),
    Other(&'a str),
}

fn qa_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*(?:[-*]\s*)?(?:\*\*)?([QqAa])(?:uestion|nswer|UESTION|NSWER)?\s*\d*\s*(?:\*\*)?\s*:\s*(?:\*\*)?(.*)$")
            .expect("valid regex")
    })
}

fn classify(line: &str) -> Line<'_> {
    match qa_line_re().captures(line) {
        Some(c) => {
            let body = c.get(2).map_or("", |m| m.as_str()).trim();
            match &c[1] {
                "Q" | "q" => Line::Question(body),
                _ => Line::Answer(body),
            }
        }
        None => Line::Other(line),
    }
}

const QUOTES: [char; 3] = ['"', '\u{201c}', '\u{201d}'];

fn answer_outcome(raw: &str) -> AnswerOutcome {
    let trimmed = raw.trim();
    let bare = trimmed.trim_matches(|c: char| QUOTES.contains(&c) || c == '\'' || c.is_whitespace());
    let bare = bare.trim_end_matches('.').trim();
    if bare.eq_ignore_ascii_case("unanswerable") {
        return AnswerOutcome::Unanswerable;
    }
    let first = trimmed.find(|c: char| QUOTES.contains(&c));
    let last = trimmed.rfind(|c: char| QUOTES.contains(&c));
    let text = match (first, last) {
        (Some(f), Some(l)) if l > f => {
            let open_len = trimmed[f..].chars().next().map_or(1, char::len_utf8);
            &trimmed[f + open_len..l]
        }
        _ => trimmed.trim_matches(|c: char| QUOTES.contains(&c)),
    };
    AnswerOutcome::Quoted(text.trim().to_string())
}

/// Pairs of a `Q: ... / A: ...` block. An answer continues over following
/// lines until the next `Q:` line or the end of the text.
pub fn parse_qa_block(text: &str) -> Result<Vec<(String, AnswerOutcome)>, ParseError> {
    let mut pairs = Vec::new();
    let mut question: Option<String> = None;
    let mut answer: Option<Vec<&str>> = None;

    let mut flush = |q: Option<String>, a: Option<Vec<&str>>| -> Result<(), ParseError> {
        match (q, a) {
            (Some(q), Some(a)) => {
                pairs.push((q, answer_outcome(&a.join("\n"))));
                Ok(())
            }
            (Some(q), None) => Err(ParseError::MissingAnswer { question: q }),
            _ => Ok(()),
        }
    };

    for line in text.lines() {
        match classify(line) {
            Line::Question(q) => {
                flush(question.take(), answer.take())?;
                question = Some(q.to_string());
            }
            Line::Answer(a) => match (&question, &mut answer) {
                (Some(_), None) => answer = Some(vec![a]),
                (Some(_), Some(lines)) => lines.push(a),
                (None, _) => {}
            },
            Line::Other(l) => match (&mut question, &mut answer) {
                (_, Some(lines)) => lines.push(l),
                (Some(q), None) if !l.trim().is_empty() => {
                    q.push(' ');
                    q.push_str(l.trim());
                }
                _ => {}
            },
        }
    }
    flush(question, answer)?;
    if pairs.is_empty() {
        return Err(ParseError::EmptyBlock);
    }
    Ok(pairs)
}
