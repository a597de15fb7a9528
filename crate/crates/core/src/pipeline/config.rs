use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::SeedMode;
use crate::error::{read_to_string, Error, Result};
use crate::evaluation::{MatchPolicy, TmrrMode};
use crate::ranking::{CombineMode, RankingConfig};
use crate::scoring::{sha256_hex, Aggregation, AvgMaxDenominator};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    #[default]
    Svm,
    ExternalEmbedding,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NerKind {
    Annotations,
    #[default]
    Gazetteer,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProviderKind {
    #[default]
    WordAvg,
    Cache,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 2] = [ClassifierKind::Svm, ClassifierKind::ExternalEmbedding];
}

impl ProviderKind {
    pub const ALL: [ProviderKind; 2] = [ProviderKind::WordAvg, ProviderKind::Cache];
}

macro_rules! kebab_display {
    ($($t:ty),*) => {$(
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match serde_json::to_value(self) {
                    Ok(serde_json::Value::String(s)) => f.write_str(&s),
                    _ => write!(f, "{self:?}"),
                }
            }
        }

        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                serde_json::from_value(serde_json::Value::String(s.to_string()))
                    .map_err(|_| Error::Config(format!("unknown value `{s}`")))
            }
        }
    )*};
}

kebab_display!(ClassifierKind, NerKind, ProviderKind);

/// Data files. Relative paths are resolved against the directory of the
/// config file they were read from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataPaths {
    pub questions: Option<PathBuf>,
    pub documents: Option<PathBuf>,
    /// Judgments; when absent, gold answers come from the questions file.
    pub qrels: Option<PathBuf>,
    /// Labeled questions used to train the classifier at load time.
    pub qc_training: Option<PathBuf>,
    /// A trained classifier; takes precedence over `qc_training`.
    pub qc_model: Option<PathBuf>,
    /// A trained embedding classifier; takes precedence over `qc_training`.
    pub qc_embedding_model: Option<PathBuf>,
    /// Embedding cache for question texts, used by the embedding classifier.
    pub question_embeddings: Option<PathBuf>,
    /// External question annotations (tokens, lemmas, POS, entities).
    pub question_annotations: Option<PathBuf>,
    pub entity_annotations: Option<PathBuf>,
    pub gazetteer: Option<PathBuf>,
    pub vectors: Option<PathBuf>,
    pub embedding_cache: Option<PathBuf>,
    pub contractions: Option<PathBuf>,
    pub abbreviations: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub answer_types: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads for per-question processing; 0 uses every core.
    pub workers: usize,
    pub classifier: ClassifierKind,
    /// Restrict fine answer types to the predicted coarse family.
    pub constrain_fine: bool,
    pub qc_lambda: f64,
    pub qc_epochs: usize,
    pub ner_backend: NerKind,
    pub embedding_provider: ProviderKind,
    pub aggregation: Aggregation,
    pub avgmax_denominator: AvgMaxDenominator,
    pub combine: CombineMode,
    pub alpha: f64,
    pub beta: f64,
    /// Maximum pool size; 0 keeps every candidate.
    pub candidate_cap: usize,
    pub group_surface_variants: bool,
    pub df_any_tag: bool,
    pub tie_decimals: u32,
    pub match_policy: MatchPolicy,
    pub tmrr_mode: TmrrMode,
    /// Document collection drawn per question (`Top10`, `Strata-1` ...
    /// `Strata-5`); unset uses every supplied document.
    pub collection: Option<String>,
    pub seed_mode: SeedMode,
    pub paths: DataPaths,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            workers: 0,
            classifier: ClassifierKind::Svm,
            constrain_fine: false,
            qc_lambda: 1e-4,
            qc_epochs: 20,
            ner_backend: NerKind::Gazetteer,
            embedding_provider: ProviderKind::WordAvg,
            aggregation: Aggregation::Max,
            avgmax_denominator: AvgMaxDenominator::ContainingDocs,
            combine: CombineMode::Multiplicative,
            alpha: 0.5,
            beta: 0.5,
            candidate_cap: 100,
            group_surface_variants: true,
            df_any_tag: false,
            tie_decimals: 9,
            match_policy: MatchPolicy::Containment,
            tmrr_mode: TmrrMode::ExpectedReciprocal,
            collection: None,
            seed_mode: SeedMode::PerQuestion,
            paths: DataPaths::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

fn config_err(e: impl fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl PipelineConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(config_err)?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_to_string(path).map_err(|e| Error::Config(e.to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("qc_lambda", self.qc_lambda)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be a non-negative number, got {v}")));
            }
        }
        if self.qc_lambda == 0.0 || self.qc_epochs == 0 {
            return Err(Error::Config("qc_lambda and qc_epochs must be positive".into()));
        }
        if self.tie_decimals > 15 {
            return Err(Error::Config("tie_decimals must be at most 15".into()));
        }
        if let Some(name) = &self.collection {
            if crate::corpus::StrataSpec::named(name, self.seed).is_none() {
                return Err(Error::Config(format!("unknown collection `{name}`")));
            }
        }
        Ok(())
    }

    /// Overrides one key, e.g. `aggregation=avg` or `paths.vectors=v.txt`.
    /// Values are read as TOML scalars, falling back to plain strings.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got `{assignment}`")))?;
        let key = key.trim();
        let raw = raw.trim();
        let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));

        let mut table = toml::Table::try_from(&*self).map_err(config_err)?;
        let (section, leaf) = match key.split_once('.') {
            Some((s, l)) => (Some(s), l),
            None => (None, key),
        };
        let target = match section {
            None => &mut table,
            Some(s) => table
                .entry(s)
                .or_insert_with(|| toml::Value::Table(toml::Table::new()))
                .as_table_mut()
                .ok_or_else(|| Error::Config(format!("`{s}` is not a section")))?,
        };
        target.insert(leaf.to_string(), value);
        let base_dir = std::mem::take(&mut self.base_dir);
        let mut updated: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e| Error::Config(format!("{key}: {e}")))?;
        updated.base_dir = base_dir;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Canonical JSON of every setting that can change results (worker
    /// count excluded).
    pub fn canonical_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = v.as_object_mut() {
            map.remove("workers");
        }
        v.to_string()
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_json`].
    pub fn config_id(&self) -> String {
        sha256_hex(&self.canonical_json())[..16].to_string()
    }

    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    /// The resolved path for a configured file, or a config error naming it.
    pub fn require(&self, name: &str, path: &Option<PathBuf>) -> Result<PathBuf> {
        let p = path
            .as_deref()
            .ok_or_else(|| Error::Config(format!("paths.{name} is required by this configuration")))?;
        let resolved = self.resolve(p);
        if !resolved.exists() {
            return Err(Error::Config(format!("paths.{name}: {} does not exist", resolved.display())));
        }
        Ok(resolved)
    }

    /// Resolved optional path; a configured but missing file is an error.
    pub fn optional(&self, name: &str, path: &Option<PathBuf>) -> Result<Option<PathBuf>> {
        match path {
            None => Ok(None),
            Some(_) => self.require(name, path).map(Some),
        }
    }

    pub fn ranking(&self) -> RankingConfig {
        RankingConfig {
            combine: self.combine,
            alpha: self.alpha,
            beta: self.beta,
            tie_decimals: self.tie_decimals,
        }
    }

    pub fn pool(&self) -> crate::entities::PoolConfig {
        crate::entities::PoolConfig {
            cap: (self.candidate_cap > 0).then_some(self.candidate_cap),
            group_surface_variants: self.group_surface_variants,
            df_any_tag: self.df_any_tag,
        }
    }
}
