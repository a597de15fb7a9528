use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entities::Gazetteer;
use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedEntity {
    pub surface: String,
    pub tag: String,
}

/// Token-level linguistic annotation of a question. `tokens`, `lemmas` and
/// `pos_tags` are parallel.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionAnnotation {
    pub tokens: Vec<String>,
    pub lemmas: Vec<String>,
    #[serde(rename = "pos")]
    pub pos_tags: Vec<String>,
    #[serde(default)]
    pub entities: Vec<NamedEntity>,
}

impl QuestionAnnotation {
    pub fn validate(&self) -> Result<()> {
        if self.tokens.len() != self.lemmas.len() || self.tokens.len() != self.pos_tags.len() {
            return Err(Error::Contract(format!(
                "annotation lengths differ: {} tokens, {} lemmas, {} tags",
                self.tokens.len(),
                self.lemmas.len(),
                self.pos_tags.len()
            )));
        }
        Ok(())
    }
}

pub trait Annotator: Send + Sync {
    fn annotate(&self, text: &str) -> QuestionAnnotation;
}

/// Dictionary-and-suffix annotator: lowercase lemmas with a small irregular
/// table, Penn-style tags from closed-class lists and word shape, and
/// capitalized runs as named entities (typed by an optional gazetteer).
#[derive(Debug, Clone, Default)]
pub struct RuleAnnotator {
    gazetteer: Option<Gazetteer>,
}

const IRREGULAR: &[(&str, &str)] = &[
    ("am", "be"), ("is", "be"), ("are", "be"), ("was", "be"), ("were", "be"), ("been", "be"), ("being", "be"),
    ("did", "do"), ("does", "do"), ("done", "do"), ("has", "have"), ("had", "have"),
    ("won", "win"), ("wrote", "write"), ("written", "write"), ("made", "make"), ("used", "use"), ("went", "go"), ("gone", "go"),
    ("became", "become"), ("began", "begin"), ("begun", "begin"), ("built", "build"), ("found", "find"),
    ("led", "lead"), ("ran", "run"), ("sang", "sing"), ("sung", "sing"), ("saw", "see"), ("seen", "see"),
    ("took", "take"), ("taken", "take"), ("gave", "give"), ("given", "give"), ("got", "get"),
    ("held", "hold"), ("knew", "know"), ("known", "know"), ("left", "leave"), ("lost", "lose"),
    ("met", "meet"), ("paid", "pay"), ("said", "say"), ("sold", "sell"), ("told", "tell"),
    ("thought", "think"), ("brought", "bring"), ("bought", "buy"), ("caught", "catch"), ("taught", "teach"),
    ("fought", "fight"), ("flew", "fly"), ("flown", "fly"), ("drew", "draw"), ("drawn", "draw"),
    ("chose", "choose"), ("chosen", "choose"), ("spoke", "speak"), ("spoken", "speak"), ("stood", "stand"),
    ("children", "child"), ("men", "man"), ("women", "woman"), ("people", "person"), ("feet", "foot"),
    ("teeth", "tooth"), ("mice", "mouse"), ("countries", "country"), ("cities", "city"),
];

const PLURAL_NOUNS: &[&str] = &["children", "men", "women", "people", "feet", "teeth", "mice", "countries", "cities"];

const WH: &[(&str, &str)] = &[
    ("who", "WP"), ("whom", "WP"), ("whose", "WP$"), ("which", "WDT"), ("what", "WP"),
    ("where", "WRB"), ("when", "WRB"), ("why", "WRB"), ("how", "WRB"),
];

const CLOSED: &[(&str, &str)] = &[
    ("the", "DT"), ("a", "DT"), ("an", "DT"), ("this", "DT"), ("that", "DT"), ("these", "DT"), ("those", "DT"),
    ("each", "DT"), ("every", "DT"), ("some", "DT"), ("any", "DT"), ("all", "DT"), ("no", "DT"),
    ("in", "IN"), ("on", "IN"), ("at", "IN"), ("of", "IN"), ("for", "IN"), ("with", "IN"), ("by", "IN"),
    ("from", "IN"), ("about", "IN"), ("into", "IN"), ("during", "IN"), ("after", "IN"), ("before", "IN"),
    ("between", "IN"), ("under", "IN"), ("over", "IN"), ("as", "IN"), ("than", "IN"), ("since", "IN"),
    ("through", "IN"), ("against", "IN"), ("near", "IN"), ("without", "IN"), ("within", "IN"), ("to", "TO"),
    ("and", "CC"), ("or", "CC"), ("but", "CC"), ("nor", "CC"),
    ("is", "VBZ"), ("are", "VBP"), ("am", "VBP"), ("was", "VBD"), ("were", "VBD"), ("be", "VB"), ("been", "VBN"),
    ("being", "VBG"), ("do", "VBP"), ("does", "VBZ"), ("did", "VBD"), ("has", "VBZ"), ("have", "VBP"),
    ("had", "VBD"), ("can", "MD"), ("could", "MD"), ("will", "MD"), ("would", "MD"), ("shall", "MD"),
    ("should", "MD"), ("may", "MD"), ("might", "MD"), ("must", "MD"),
    ("i", "PRP"), ("you", "PRP"), ("he", "PRP"), ("she", "PRP"), ("it", "PRP"), ("we", "PRP"), ("they", "PRP"),
    ("him", "PRP"), ("her", "PRP$"), ("them", "PRP"), ("his", "PRP$"), ("its", "PRP$"), ("their", "PRP$"),
    ("my", "PRP$"), ("your", "PRP$"), ("our", "PRP$"), ("not", "RB"), ("also", "RB"), ("very", "RB"),
    ("most", "RBS"), ("first", "JJ"), ("last", "JJ"), ("many", "JJ"), ("much", "JJ"), ("there", "EX"),
];

fn lookup(table: &[(&str, &'static str)], word: &str) -> Option<&'static str> {
    table.iter().find(|(w, _)| *w == word).map(|(_, v)| *v)
}

fn is_vowel(c: u8) -> bool {
    matches!(c, b'a' | b'e' | b'i' | b'o' | b'u')
}

/// Suffix-stripping lemma for a lowercase word.
pub fn lemmatize(word: &str) -> String {
    if let Some(l) = lookup(IRREGULAR, word) {
        return l.to_string();
    }
    let b = word.as_bytes();
    let n = b.len();
    if !word.is_ascii() || n <= 3 {
        return word.to_string();
    }
    if word.ends_with("ies") && n > 4 {
        return format!("{}y", &word[..n - 3]);
    }
    if word.ends_with("sses") || word.ends_with("ches") || word.ends_with("shes") || word.ends_with("xes") {
        return word[..n - 2].to_string();
    }
    if word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") && !word.ends_with("is") {
        return word[..n - 1].to_string();
    }
    for suffix in ["ed", "ing"] {
        if word.ends_with(suffix) && n >= suffix.len() + 3 {
            let stem = &word[..n - suffix.len()];
            let s = stem.as_bytes();
            let m = s.len();
            if m >= 2 && s[m - 1] == s[m - 2] && !matches!(s[m - 1], b'l' | b's' | b'z') && !is_vowel(s[m - 1]) {
                return stem[..m - 1].to_string();
            }
            if suffix == "ed" && stem.ends_with('i') {
                return format!("{}y", &stem[..m - 1]);
            }
            // restore a silent e: located, produced, used, named
            let short_cvc = m == 3 && !is_vowel(s[0]) && is_vowel(s[1]) && !is_vowel(s[2]) && !matches!(s[2], b'w' | b'x' | b'y');
            if short_cvc || ["at", "bl", "iz", "us", "v", "c"].iter().any(|e| stem.ends_with(e)) {
                return format!("{stem}e");
            }
            return stem.to_string();
        }
    }
    word.to_string()
}

fn tag_word(token: &str, lower: &str, first: bool, prev: Option<&str>) -> &'static str {
    if let Some(t) = lookup(WH, lower) {
        return t;
    }
    if let Some(t) = lookup(CLOSED, lower) {
        return t;
    }
    if lookup(IRREGULAR, lower).is_some() {
        if PLURAL_NOUNS.contains(&lower) {
            return "NNS";
        }
        return if matches!(prev, Some("VBZ" | "VBP" | "VBD" | "MD")) { "VBN" } else { "VBD" };
    }
    if token.chars().all(|c| c.is_ascii_digit()) {
        return "CD";
    }
    if token.chars().next().is_some_and(char::is_uppercase) && !first {
        return "NNP";
    }
    if lower.ends_with("ing") && lower.len() > 5 {
        "VBG"
    } else if lower.ends_with("ed") && lower.len() > 4 {
        if matches!(prev, Some("VBZ" | "VBP" | "VBD" | "MD")) { "VBN" } else { "VBD" }
    } else if lower.ends_with("ly") && lower.len() > 4 {
        "RB"
    } else if lower.ends_with("est") && lower.len() > 5 {
        "JJS"
    } else if lower.ends_with('s') && !lower.ends_with("ss") && lower.len() > 3 {
        "NNS"
    } else {
        "NN"
    }
}

/// Word tokens keeping original case; punctuation is dropped.
fn tokenize(text: &str) -> Vec<String> {
    crate::entities::word_tokens(text)
        .into_iter()
        .map(|(s, e, _)| text[s..e].to_string())
        .collect()
}

impl RuleAnnotator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_gazetteer(gazetteer: Gazetteer) -> Self {
        Self {
            gazetteer: Some(gazetteer),
        }
    }
}

impl Annotator for RuleAnnotator {
    fn annotate(&self, text: &str) -> QuestionAnnotation {
        let tokens = tokenize(text);
        let lowers: Vec<String> = tokens.iter().map(|t| t.to_lowercase()).collect();
        let lemmas: Vec<String> = lowers.iter().map(|l| lemmatize(l)).collect();
        let mut pos_tags: Vec<String> = Vec::with_capacity(tokens.len());
        for (i, (t, l)) in tokens.iter().zip(&lowers).enumerate() {
            let prev = pos_tags.last().map(String::as_str);
            pos_tags.push(tag_word(t, l, i == 0, prev).to_string());
        }
        // "what" before a noun is a determiner
        for i in 0..tokens.len().saturating_sub(1) {
            if lowers[i] == "what" && pos_tags[i + 1].starts_with("NN") {
                pos_tags[i] = "WDT".into();
            }
        }

        let mut entities = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            if pos_tags[i] != "NNP" {
                i += 1;
                continue;
            }
            let start = i;
            while i < tokens.len() && pos_tags[i] == "NNP" {
                i += 1;
            }
            let surface = tokens[start..i].join(" ");
            let tag = self
                .gazetteer
                .as_ref()
                .and_then(|g| g.find(&surface).first().map(|m| m.2.as_str().to_string()))
                .unwrap_or_else(|| "NE".to_string());
            entities.push(NamedEntity { surface, tag });
        }
        QuestionAnnotation {
            tokens,
            lemmas,
            pos_tags,
            entities,
        }
    }
}

#[derive(Deserialize)]
struct ExternalRecord {
    text: String,
    #[serde(flatten)]
    annotation: QuestionAnnotation,
}

/// Annotations produced by an external tool, looked up by exact question
/// text. Unknown texts fall back to [`RuleAnnotator`].
#[derive(Debug, Clone, Default)]
pub struct ExternalAnnotations {
    by_text: HashMap<String, QuestionAnnotation>,
    fallback: RuleAnnotator,
}

impl ExternalAnnotations {
    /// Parses JSONL records `{"text", "tokens", "lemmas", "pos", "entities"}`.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut by_text = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ExternalRecord = serde_json::from_str(line).map_err(|e| Error::parse(source_name, i + 1, e))?;
            rec.annotation.validate().map_err(|e| Error::parse(source_name, i + 1, e))?;
            by_text.insert(rec.text, rec.annotation);
        }
        Ok(Self {
            by_text,
            fallback: RuleAnnotator::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }
}

impl Annotator for ExternalAnnotations {
    fn annotate(&self, text: &str) -> QuestionAnnotation {
        match self.by_text.get(text) {
            Some(a) => a.clone(),
            None => {
                log::warn!("no external annotation for question `{text}`; using rule annotator");
                self.fallback.annotate(text)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotates_short_question() {
        let a = RuleAnnotator::new().annotate("Who won?");
        assert_eq!(a.tokens, vec!["Who", "won"]);
        assert_eq!(a.lemmas, vec!["who", "win"]);
        assert_eq!(a.pos_tags, vec!["WP", "VBD"]);
        assert!(a.entities.is_empty());
        a.validate().unwrap();
    }

    #[test]
    fn capitalized_runs_are_entities() {
        let g = Gazetteer::parse("new zealand\tGPE\n", "g").unwrap();
        let a = RuleAnnotator::with_gazetteer(g).annotate("Where in New Zealand is the Tomb of the Unknown Warrior located?");
        let surfaces: Vec<(&str, &str)> = a.entities.iter().map(|e| (e.surface.as_str(), e.tag.as_str())).collect();
        assert_eq!(surfaces, vec![("New Zealand", "GPE"), ("Tomb", "NE"), ("Unknown Warrior", "NE")]);
        assert_eq!(a.pos_tags[0], "WRB");
        assert_eq!(a.lemmas.last().unwrap(), "locate");
    }

    #[test]
    fn lemmas() {
        for (w, l) in [("played", "play"), ("cities", "city"), ("stopped", "stop"), ("running", "run"),
                       ("actors", "actor"), ("is", "be"), ("located", "locate"), ("used", "use"), ("named", "name"), ("making", "make"), ("invented", "invent"), ("class", "class"), ("studied", "study"), ("watches", "watch")] {
            assert_eq!(lemmatize(w), l, "{w}");
        }
    }

    #[test]
    fn what_before_noun_is_determiner() {
        let a = RuleAnnotator::new().annotate("What country hosted the games?");
        assert_eq!(a.pos_tags[0], "WDT");
        let a = RuleAnnotator::new().annotate("What is a caldera?");
        assert_eq!(a.pos_tags[0], "WP");
    }

    #[test]
    fn external_annotations_by_text() {
        let line = r#"{"text":"Who won?","tokens":["Who","won"],"lemmas":["who","win"],"pos":["WP","VBD"],"entities":[]}"#;
        let ext = ExternalAnnotations::parse(line, "a").unwrap();
        assert_eq!(ext.annotate("Who won?").pos_tags, vec!["WP", "VBD"]);
        assert_eq!(ext.annotate("Who lost?").tokens, vec!["Who", "lost"]);
        let bad = r#"{"text":"x","tokens":["a"],"lemmas":[],"pos":[]}"#;
        assert!(ExternalAnnotations::parse(bad, "a").is_err());
    }
}
