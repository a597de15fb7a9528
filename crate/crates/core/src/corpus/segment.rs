use std::collections::HashSet;
use std::ops::Range;
use std::path::Path;

use crate::error::{read_to_string, Result};

const BUILTIN_ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

/// Splits text into sentences, returned as byte ranges into the input.
///
/// Ranges must be non-empty, non-overlapping, in order, and must not start or
/// end with whitespace.
pub trait SentenceSegmenter: Send + Sync {
    fn split(&self, text: &str) -> Vec<Range<usize>>;
}

/// Splits after `.`, `?` or `!` (plus any closing quotes or brackets) when the
/// terminator is followed by whitespace and an upper-case letter. A period
/// that ends a listed abbreviation never splits.
#[derive(Debug, Clone)]
pub struct RuleSegmenter {
    abbreviations: HashSet<String>,
}

impl Default for RuleSegmenter {
    fn default() -> Self {
        Self::from_list(BUILTIN_ABBREVIATIONS)
    }
}

impl RuleSegmenter {
    /// One abbreviation per line, without its final period; `#` lines are comments.
    pub fn from_list(text: &str) -> Self {
        let abbreviations = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { abbreviations }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_list(&read_to_string(path)?))
    }

    fn is_abbreviation(&self, text: &str, period_at: usize) -> bool {
        let word_start = text[..period_at]
            .char_indices()
            .rev()
            .find(|(_, c)| c.is_whitespace())
            .map(|(i, c)| i + c.len_utf8())
            .unwrap_or(0);
        let word = text[word_start..period_at].trim_start_matches(|c: char| !c.is_alphanumeric());
        !word.is_empty() && self.abbreviations.contains(&word.to_lowercase())
    }
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '}' | '\u{201d}' | '\u{2019}' | '\u{bb}')
}

impl SentenceSegmenter for RuleSegmenter {
    fn split(&self, text: &str) -> Vec<Range<usize>> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut spans = Vec::new();
        let mut start = 0;
        let mut i = 0;
        while i < chars.len() {
            let (pos, c) = chars[i];
            if !matches!(c, '.' | '?' | '!') {
                i += 1;
                continue;
            }
            let mut j = i + 1;
            while j < chars.len() && (matches!(chars[j].1, '.' | '?' | '!') || is_closer(chars[j].1)) {
                j += 1;
            }
            let end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            let mut k = j;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            let mut m = k;
            while m < chars.len() && is_opener(chars[m].1) {
                m += 1;
            }
            let breaks = k > j
                && m < chars.len()
                && chars[m].1.is_uppercase()
                && !(c == '.' && j == i + 1 && self.is_abbreviation(text, pos));
            if breaks {
                push_trimmed(&mut spans, text, start..end);
                start = chars[k].0;
            }
            i = j.max(i + 1);
        }
        push_trimmed(&mut spans, text, start..text.len());
        spans
    }
}

fn is_opener(c: char) -> bool {
    matches!(c, '"' | '\'' | '(' | '[' | '\u{201c}' | '\u{2018}' | '\u{ab}')
}

fn push_trimmed(spans: &mut Vec<Range<usize>>, text: &str, range: Range<usize>) {
    let slice = &text[range.clone()];
    let lead = slice.len() - slice.trim_start().len();
    let trimmed = slice.trim();
    if !trimmed.is_empty() {
        let s = range.start + lead;
        spans.push(s..s + trimmed.len());
    }
}
