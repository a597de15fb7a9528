use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::entities::OntoTag;
use crate::error::{read_to_string, Error, Result};

const BUILTIN_TAXONOMY: &str = include_str!("../../data/taxonomy.tsv");
const BUILTIN_TYPE_MAP: &str = include_str!("../../data/answer_types.tsv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoarseClass {
    pub code: String,
    pub name: String,
    pub fine: Vec<String>,
}

/// Two-level answer-type taxonomy. Fine labels are written `COARSE:fine`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    classes: Vec<CoarseClass>,
}

impl Taxonomy {
    /// The 6 coarse / 50 fine classes from `data/taxonomy.tsv`.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TAXONOMY, "taxonomy.tsv").expect("shipped taxonomy parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    /// Parses `code<TAB>name<TAB>fine,fine,...` lines.
    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut classes = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(source_name, i + 1, "expected `code<TAB>name<TAB>fine,...`"));
            }
            let fine: Vec<String> = cols[2].split(',').map(|f| f.trim().to_string()).filter(|f| !f.is_empty()).collect();
            if fine.is_empty() {
                return Err(Error::parse(source_name, i + 1, "coarse class without fine labels"));
            }
            classes.push(CoarseClass {
                code: cols[0].trim().to_string(),
                name: cols[1].trim().to_string(),
                fine,
            });
        }
        if classes.is_empty() {
            return Err(Error::EmptySet(format!("taxonomy {source_name}")));
        }
        Ok(Self { classes })
    }

    pub fn classes(&self) -> &[CoarseClass] {
        &self.classes
    }

    /// Resolves a coarse code or name (`LOC` or `LOCATION`) to its code.
    pub fn coarse_code(&self, label: &str) -> Option<&str> {
        self.classes
            .iter()
            .find(|c| c.code.eq_ignore_ascii_case(label) || c.name.eq_ignore_ascii_case(label))
            .map(|c| c.code.as_str())
    }

    pub fn coarse_name(&self, code: &str) -> Option<&str> {
        self.classes.iter().find(|c| c.code == code).map(|c| c.name.as_str())
    }

    /// All fine labels in `COARSE:fine` form.
    pub fn fine_labels(&self) -> Vec<String> {
        self.classes
            .iter()
            .flat_map(|c| c.fine.iter().map(move |f| format!("{}:{f}", c.code)))
            .collect()
    }

    /// Validates a `COARSE:fine` label, returning `(coarse code, full fine label)`.
    pub fn split_label(&self, label: &str) -> Result<(String, String)> {
        let (coarse, fine) = label.split_once(':').ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        let class = self
            .classes
            .iter()
            .find(|c| c.code == coarse)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
        if !class.fine.iter().any(|f| f == fine) {
            return Err(Error::UnknownLabel(label.to_string()));
        }
        Ok((class.code.clone(), label.to_string()))
    }
}

/// Answer type to accepted entity tags. Keys are coarse codes or
/// `COARSE:fine` labels; a fine row overrides its coarse row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerTypeMap {
    rows: BTreeMap<String, BTreeSet<OntoTag>>,
}

impl AnswerTypeMap {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN_TYPE_MAP, "answer_types.tsv").expect("shipped answer-type map parses")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, &path.display().to_string())
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self> {
        let mut rows = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, tags) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse(source_name, i + 1, "expected `type<TAB>TAG,TAG,...`"))?;
            let tags = tags
                .split(',')
                .map(|t| t.parse::<OntoTag>())
                .collect::<Result<BTreeSet<_>>>()
                .map_err(|e| Error::parse(source_name, i + 1, e))?;
            if tags.is_empty() {
                return Err(Error::parse(source_name, i + 1, "row has no tags"));
            }
            rows.insert(key.trim().to_string(), tags);
        }
        Ok(Self { rows })
    }

    /// Tags for a fine label (`COARSE:fine`) under its coarse code.
    pub fn lookup(&self, coarse: &str, fine: &str) -> Result<BTreeSet<OntoTag>> {
        self.rows
            .get(fine)
            .or_else(|| self.rows.get(coarse))
            .cloned()
            .ok_or_else(|| Error::UnmappedType(if fine.is_empty() { coarse.to_string() } else { fine.to_string() }))
    }
}

/// Accepted entity tags for an answer type. `coarse` may be a code or name;
/// `fine` may be a bare fine label (`money`) or `COARSE:fine`.
pub fn map_answer_types(
    taxonomy: &Taxonomy,
    map: &AnswerTypeMap,
    coarse: &str,
    fine: Option<&str>,
) -> Result<BTreeSet<OntoTag>> {
    let code = taxonomy.coarse_code(coarse).unwrap_or(coarse);
    let fine = match fine {
        Some(f) if f.contains(':') => f.to_string(),
        Some(f) => format!("{code}:{f}"),
        None => String::new(),
    };
    map.lookup(code, &fine)
}
