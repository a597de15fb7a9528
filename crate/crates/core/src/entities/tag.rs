use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The 18 OntoNotes 5 named-entity labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OntoTag {
    Person,
    Norp,
    Fac,
    Org,
    Gpe,
    Loc,
    Product,
    Event,
    WorkOfArt,
    Law,
    Language,
    Date,
    Time,
    Percent,
    Money,
    Quantity,
    Ordinal,
    Cardinal,
}

impl OntoTag {
    pub const ALL: [OntoTag; 18] = [
        OntoTag::Person,
        OntoTag::Norp,
        OntoTag::Fac,
        OntoTag::Org,
        OntoTag::Gpe,
        OntoTag::Loc,
        OntoTag::Product,
        OntoTag::Event,
        OntoTag::WorkOfArt,
        OntoTag::Law,
        OntoTag::Language,
        OntoTag::Date,
        OntoTag::Time,
        OntoTag::Percent,
        OntoTag::Money,
        OntoTag::Quantity,
        OntoTag::Ordinal,
        OntoTag::Cardinal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OntoTag::Person => "PERSON",
            OntoTag::Norp => "NORP",
            OntoTag::Fac => "FAC",
            OntoTag::Org => "ORG",
            OntoTag::Gpe => "GPE",
            OntoTag::Loc => "LOC",
            OntoTag::Product => "PRODUCT",
            OntoTag::Event => "EVENT",
            OntoTag::WorkOfArt => "WORK_OF_ART",
            OntoTag::Law => "LAW",
            OntoTag::Language => "LANGUAGE",
            OntoTag::Date => "DATE",
            OntoTag::Time => "TIME",
            OntoTag::Percent => "PERCENT",
            OntoTag::Money => "MONEY",
            OntoTag::Quantity => "QUANTITY",
            OntoTag::Ordinal => "ORDINAL",
            OntoTag::Cardinal => "CARDINAL",
        }
    }
}

impl fmt::Display for OntoTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for OntoTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        OntoTag::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Contract(format!("`{s}` is not an OntoNotes tag")))
    }
}
