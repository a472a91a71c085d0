//! Character-offset helpers.
//!
//! Every offset that crosses a module boundary or lands in a file is a
//! *character* offset (Unicode scalar values), matching SQuAD's
//! `answer_start`. Rust slices by byte, so conversions live here.

use std::ops::Range;

/// Number of characters in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte index of the `char_idx`-th character. `char_idx == char_len(s)` maps
/// to `s.len()`. Returns `None` past the end.
pub fn char_to_byte(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut seen = 0;
    for (b, _) in s.char_indices() {
        if seen == char_idx {
            return Some(b);
        }
        seen += 1;
    }
    (seen == char_idx).then_some(s.len())
}

/// Character index of byte offset `byte_idx`, which must be a char boundary.
pub fn byte_to_char(s: &str, byte_idx: usize) -> usize {
    s[..byte_idx].chars().count()
}

/// Slice `s` by a half-open character range.
pub fn char_slice(s: &str, range: Range<usize>) -> Option<&str> {
    if range.start > range.end {
        return None;
    }
    let start = char_to_byte(s, range.start)?;
    let end = start + char_to_byte(&s[start..], range.end - range.start)?;
    Some(&s[start..end])
}

/// Byte ranges of maximal non-whitespace runs.
pub fn word_spans(s: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (b, c) in s.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(st)) => {
                spans.push(st..b);
                start = None;
            }
            (false, None) => start = Some(b),
            _ => {}
        }
    }
    if let Some(st) = start {
        spans.push(st..s.len());
    }
    spans
}

/// Whitespace-delimited word count.
pub fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

/// Trim `range` (bytes) of `s` to exclude leading and trailing whitespace.
pub fn trim_range(s: &str, range: Range<usize>) -> Range<usize> {
    let slice = &s[range.clone()];
    let lead = slice.len() - slice.trim_start().len();
    let trail = slice.len() - slice.trim_end().len();
    if lead == slice.len() {
        return range.start..range.start;
    }
    range.start + lead..range.end - trail
}
