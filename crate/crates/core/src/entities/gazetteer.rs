use std::collections::HashMap;
use std::path::Path;

use super::{EntityMention, NerBackend, OntoTag};
use crate::corpus::DocumentSet;
use crate::error::{read_to_string, Error, Result};

/// Word tokens (alphanumeric runs) with their byte ranges.
pub(crate) fn word_tokens(text: &str) -> Vec<(usize, usize, String)> {
    let mut tokens = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_alphanumeric(), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                tokens.push((s, i, text[s..i].to_lowercase()));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        tokens.push((s, text.len(), text[s..].to_lowercase()));
    }
    tokens
}

/// Typed lexicon matched leftmost-longest over word tokens, case-insensitively.
#[derive(Debug, Clone, Default)]
pub struct Gazetteer {
    entries: HashMap<Vec<String>, OntoTag>,
    max_len: usize,
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds an entry; the first tag given for a surface wins.
    pub fn insert(&mut self, surface: &str, tag: OntoTag) {
        let key: Vec<String> = word_tokens(surface).into_iter().map(|t| t.2).collect();
        if key.is_empty() {
            return;
        }
        self.max_len = self.max_len.max(key.len());
        self.entries.entry(key).or_insert(tag);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses `surface<TAB>tag` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut gazetteer = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (surface, tag) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected `surface<TAB>tag`"))?;
            let tag: OntoTag = tag.parse().map_err(|e| Error::parse(source_name, i + 1, e))?;
            gazetteer.insert(surface, tag);
        }
        Ok(gazetteer)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    /// Leftmost-longest, non-overlapping matches as
    /// `(byte_start, byte_end, tag)`.
    pub fn find(&self, text: &str) -> Vec<(usize, usize, OntoTag)> {
        let tokens = word_tokens(text);
        let words: Vec<String> = tokens.iter().map(|t| t.2.clone()).collect();
        let mut found = Vec::new();
        let mut i = 0;
        while i < words.len() {
            let longest = (1..=self.max_len.min(words.len() - i))
                .rev()
                .find_map(|len| self.entries.get(&words[i..i + len]).map(|tag| (len, *tag)));
            match longest {
                Some((len, tag)) => {
                    found.push((tokens[i].0, tokens[i + len - 1].1, tag));
                    i += len;
                }
                None => i += 1,
            }
        }
        found
    }
}

impl NerBackend for Gazetteer {
    fn extract(&self, docset: &DocumentSet) -> Result<Vec<EntityMention>> {
        let mut mentions = Vec::new();
        for doc in &docset.documents {
            for sentence in &doc.sentences {
                for (start, end, tag) in self.find(&sentence.text) {
                    let char_start = sentence.text[..start].chars().count();
                    let surface = &sentence.text[start..end];
                    mentions.push(EntityMention {
                        surface: surface.to_string(),
                        tag,
                        doc_rank: doc.original_rank,
                        sentence_index: sentence.index,
                        start: char_start,
                        end: char_start + surface.chars().count(),
                    });
                }
            }
        }
        Ok(mentions)
    }
}
