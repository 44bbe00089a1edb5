use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Registered sensitive-entity categories.
///
/// The CoNLL-2003 tag set (person, location, organisation, miscellaneous) plus
/// the eighteen spaCy/Stanza entity types and a catch-all `PII` bucket used by
/// regex-style detectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Category {
    Person,
    Loc,
    Org,
    Misc,
    Gpe,
    Pii,
    Date,
    Norp,
    Fac,
    Product,
    Event,
    Law,
    Language,
    WorkOfArt,
    Time,
    Percent,
    Money,
    Quantity,
    Ordinal,
    Cardinal,
}

impl Category {
    pub const ALL: [Category; 20] = [
        Category::Person,
        Category::Loc,
        Category::Org,
        Category::Misc,
        Category::Gpe,
        Category::Pii,
        Category::Date,
        Category::Norp,
        Category::Fac,
        Category::Product,
        Category::Event,
        Category::Law,
        Category::Language,
        Category::WorkOfArt,
        Category::Time,
        Category::Percent,
        Category::Money,
        Category::Quantity,
        Category::Ordinal,
        Category::Cardinal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Category::Person => "Person",
            Category::Loc => "Loc",
            Category::Org => "Org",
            Category::Misc => "Misc",
            Category::Gpe => "GPE",
            Category::Pii => "PII",
            Category::Date => "Date",
            Category::Norp => "NoRP",
            Category::Fac => "Fac",
            Category::Product => "Product",
            Category::Event => "Event",
            Category::Law => "Law",
            Category::Language => "Language",
            Category::WorkOfArt => "WorkOfArt",
            Category::Time => "Time",
            Category::Percent => "Percent",
            Category::Money => "Money",
            Category::Quantity => "Quantity",
            Category::Ordinal => "Ordinal",
            Category::Cardinal => "Cardinal",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown entity category `{0}`")]
pub struct UnknownCategory(pub String);

impl FromStr for Category {
    type Err = UnknownCategory;

    /// Accepts the canonical names case-insensitively plus the CoNLL and
    /// spaCy label spellings (`PER`, `LOCATION`, `WORK_OF_ART`, ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | '-' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        let cat = match key.as_str() {
            "person" | "per" => Category::Person,
            "loc" | "location" => Category::Loc,
            "org" | "organization" | "organisation" => Category::Org,
            "misc" | "miscellaneous" => Category::Misc,
            "gpe" => Category::Gpe,
            "pii" => Category::Pii,
            "date" => Category::Date,
            "norp" => Category::Norp,
            "fac" | "facility" => Category::Fac,
            "product" => Category::Product,
            "event" => Category::Event,
            "law" => Category::Law,
            "language" => Category::Language,
            "workofart" => Category::WorkOfArt,
            "time" => Category::Time,
            "percent" => Category::Percent,
            "money" => Category::Money,
            "quantity" => Category::Quantity,
            "ordinal" => Category::Ordinal,
            "cardinal" => Category::Cardinal,
            _ => return Err(UnknownCategory(s.to_string())),
        };
        Ok(cat)
    }
}

impl TryFrom<String> for Category {
    type Error = UnknownCategory;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Category> for String {
    fn from(c: Category) -> String {
        c.name().to_string()
    }
}
