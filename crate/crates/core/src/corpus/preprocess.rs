use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use caseless::default_case_fold_str;
use regex::Regex;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{read_to_string, Error, Result};

const BUILTIN_CONTRACTIONS: &str = include_str!("../../data/contractions.tsv");

/// Contraction-to-expansion table, keyed by lowercase contraction with a plain
/// ASCII apostrophe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractionTable {
    map: HashMap<String, String>,
}

impl ContractionTable {
    /// The table shipped in `data/contractions.tsv`.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_CONTRACTIONS, "contractions.tsv").expect("shipped contraction table parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    /// Parses `contraction<TAB>expansion` lines; `#` starts a comment line.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, expansion) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected `contraction<TAB>expansion`"))?;
            let key = normalize_apostrophes(key.trim()).to_lowercase();
            let expansion = expansion.trim();
            if !key.contains('\'') {
                return Err(Error::parse(source_name, i + 1, format!("`{key}` has no apostrophe")));
            }
            if expansion.is_empty() || expansion.contains(['\'', '\u{2019}']) {
                return Err(Error::parse(
                    source_name,
                    i + 1,
                    "expansion must be non-empty and free of apostrophes",
                ));
            }
            map.insert(key, expansion.to_string());
        }
        Ok(Self { map })
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn get(&self, contraction: &str) -> Option<&str> {
        self.map
            .get(&normalize_apostrophes(contraction).to_lowercase())
            .map(String::as_str)
    }

    /// Replaces every known contraction in `text`, keeping the case pattern
    /// of the original word (lower, capitalized, or all caps).
    pub fn expand(&self, text: &str) -> String {
        static WORD: OnceLock<Regex> = OnceLock::new();
        let word = WORD.get_or_init(|| Regex::new(r"[A-Za-z]+(?:['\u{2019}][A-Za-z]+)+").unwrap());
        word.replace_all(text, |caps: &regex::Captures<'_>| {
            let token = &caps[0];
            match self.get(token) {
                Some(expansion) => match_case(token, expansion),
                None => token.to_string(),
            }
        })
        .into_owned()
    }
}

fn normalize_apostrophes(s: &str) -> String {
    s.replace('\u{2019}', "'")
}

fn match_case(original: &str, expansion: &str) -> String {
    let letters: Vec<char> = original.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.len() > 1 && letters.iter().all(|c| c.is_uppercase()) {
        return expansion.to_uppercase();
    }
    if letters.first().is_some_and(|c| c.is_uppercase()) {
        let mut chars = expansion.chars();
        return match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        };
    }
    expansion.to_string()
}

/// Canonical decomposition followed by removal of every combining mark.
pub fn fold_accents(s: &str) -> String {
    s.nfd().filter(|c| !is_combining_mark(*c)).nfc().collect()
}

/// Accent folding followed by contraction expansion.
pub fn preprocess_text(raw: &str, contractions: &ContractionTable) -> String {
    contractions.expand(&fold_accents(raw))
}

/// Normal form used to decide entity and answer identity: accent-folded,
/// lowercased, whitespace-collapsed, with leading and trailing punctuation
/// removed.
pub fn normalize_surface(s: &str) -> String {
    let folded = fold_accents(&default_case_fold_str(s));
    let collapsed = folded.split_whitespace().collect::<Vec<_>>().join(" ");
    collapsed
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

/// True if the character carries a diacritic under canonical decomposition.
pub fn is_accented(c: char) -> bool {
    let mut buf = [0u8; 4];
    c.encode_utf8(&mut buf).nfd().any(is_combining_mark)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn folds_accents_and_expands() {
        let table = ContractionTable::builtin();
        assert_eq!(preprocess_text("Beyoncé can't", &table), "Beyonce cannot");
        assert_eq!(preprocess_text("", &table), "");
    }

    #[test]
    fn keeps_case_pattern() {
        let table = ContractionTable::builtin();
        assert_eq!(table.expand("Don't stop"), "Do not stop");
        assert_eq!(table.expand("I'M HERE"), "I AM HERE");
        assert_eq!(table.expand("they\u{2019}re"), "they are");
        assert_eq!(table.expand("rock'n'roll"), "rock'n'roll");
    }

    #[test]
    fn builtin_table_covers_common_contractions() {
        let table = ContractionTable::builtin();
        assert!(table.len() >= 60);
        assert_eq!(table.get("won't"), Some("will not"));
    }

    #[test]
    fn rejects_bad_table_lines() {
        assert!(ContractionTable::parse("cant\tcannot", "t").is_err());
        assert!(ContractionTable::parse("can't", "t").is_err());
        assert!(ContractionTable::parse("can't\tcan't", "t").is_err());
    }

    #[test]
    fn surface_normalization() {
        assert_eq!(normalize_surface("  The  Sixth Sense. "), "the sixth sense");
        assert_eq!(normalize_surface("\"Zoë Saldaña\""), "zoe saldana");
        assert_eq!(normalize_surface("..."), "");
    }

    fn text_strategy() -> impl Strategy<Value = String> {
        let pieces = prop::sample::select(vec![
            "can't", "Can't", "WON'T", "it’s", "é", "Beyoncé", "naïve", "ﬁ", "한국", "e\u{301}", " ",
            "o'clock", "x'y", "don't've", "A", "z", ".", "Ångström", "\u{0308}",
        ]);
        prop::collection::vec(prop_oneof![pieces.prop_map(String::from), any::<char>().prop_map(String::from)], 0..12)
            .prop_map(|v| v.concat())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn preprocess_is_idempotent(s in text_strategy()) {
            let table = ContractionTable::builtin();
            let once = preprocess_text(&s, &table);
            prop_assert_eq!(preprocess_text(&once, &table), once.clone());
            prop_assert!(!once.chars().any(is_accented));
        }

        #[test]
        fn surface_normalization_is_idempotent(s in text_strategy()) {
            let once = normalize_surface(&s);
            prop_assert_eq!(normalize_surface(&once), once.clone());
            prop_assert_eq!(normalize_surface(&s.to_lowercase()), once);
        }
    }
}
