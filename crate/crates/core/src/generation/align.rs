use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignTier {
    Exact,
    CaseInsensitive,
    /// Alphanumeric runs only, lowercased, matched on token boundaries.
    Normalized,
}

/// Where a quoted answer sits in its context. `text` is always the original
/// context slice, so `context[char_start..char_end] == text` holds for every
/// tier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alignment {
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
    pub tier: AlignTier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("answer text not found in context")]
pub struct AlignmentFailure;

/// A folded view of a string: folded chars, each remembering the index of
/// the original char it came from.
struct Folded {
    chars: Vec<char>,
    origin: Vec<usize>,
}

fn fold_lower(s: &str) -> Folded {
    let mut f = Folded { chars: Vec::new(), origin: Vec::new() };
    for (i, c) in s.chars().enumerate() {
        for l in c.to_lowercase() {
            f.chars.push(l);
            f.origin.push(i);
        }
    }
    f
}

/// Lowercased alphanumerics; each maximal run of anything else becomes one
/// space. Leading and trailing separators are dropped.
fn fold_alnum(s: &str) -> Folded {
    let mut f = Folded { chars: Vec::new(), origin: Vec::new() };
    let mut pending_space: Option<usize> = None;
    for (i, c) in s.chars().enumerate() {
        if c.is_alphanumeric() {
            if let Some(at) = pending_space.take() {
                if !f.chars.is_empty() {
                    f.chars.push(' ');
                    f.origin.push(at);
                }
            }
            for l in c.to_lowercase() {
                f.chars.push(l);
                f.origin.push(i);
            }
        } else if pending_space.is_none() {
            pending_space = Some(i);
        }
    }
    f
}

fn find_from(hay: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() || needle.len() > hay.len() {
        return None;
    }
    (from..=hay.len() - needle.len()).find(|&i| hay[i..i + needle.len()] == *needle)
}

/// First match of `needle` in `hay` that starts and ends on whole original
/// characters (and, when `word_bounded`, on token boundaries). Returns the
/// original char interval.
fn search(hay: &Folded, needle: &Folded, word_bounded: bool) -> Option<(usize, usize)> {
    let n = needle.chars.len();
    let mut from = 0;
    while let Some(i) = find_from(&hay.chars, &needle.chars, from) {
        let last = i + n - 1;
        let whole_chars = (i == 0 || hay.origin[i - 1] != hay.origin[i])
            && (last + 1 == hay.chars.len() || hay.origin[last + 1] != hay.origin[last]);
        let bounded = !word_bounded
            || ((i == 0 || hay.chars[i - 1] == ' ') && (last + 1 == hay.chars.len() || hay.chars[last + 1] == ' '));
        if whole_chars && bounded {
            return Some((hay.origin[i], hay.origin[last] + 1));
        }
        from = i + 1;
    }
    None
}

/// Locate `answer` in `context`: exact substring, then case-insensitive, then
/// punctuation- and whitespace-tolerant. First occurrence wins in each tier.
pub fn align_answer(answer: &str, context: &str) -> Result<Alignment, AlignmentFailure> {
    let answer = answer.trim();
    if answer.is_empty() {
        return Err(AlignmentFailure);
    }
    let slice = |start: usize, end: usize| -> String { context.chars().skip(start).take(end - start).collect() };

    if let Some(byte) = context.find(answer) {
        let start = crate::text::byte_to_char(context, byte);
        let end = start + crate::text::char_len(answer);
        return Ok(Alignment { char_start: start, char_end: end, text: answer.to_string(), tier: AlignTier::Exact });
    }
    if let Some((start, end)) = search(&fold_lower(context), &fold_lower(answer), false) {
        return Ok(Alignment { char_start: start, char_end: end, text: slice(start, end), tier: AlignTier::CaseInsensitive });
    }
    let needle = fold_alnum(answer);
    if !needle.chars.is_empty() {
        if let Some((start, end)) = search(&fold_alnum(context), &needle, true) {
            return Ok(Alignment { char_start: start, char_end: end, text: slice(start, end), tier: AlignTier::Normalized });
        }
    }
    Err(AlignmentFailure)
}
