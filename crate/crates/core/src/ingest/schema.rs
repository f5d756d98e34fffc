use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sentiment {
    Pos,
    Neutral,
    Neg,
}

/// How topic coefficients are brought to a maximum of 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopicRescale {
    /// Each topic column divided by its maximum.
    #[default]
    Column,
    /// Each respondent row divided by its maximum.
    Row,
}

fn default_min_df() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    /// One indicator per listed choice.
    Categorical { choices: Vec<String> },
    /// Consolidated to positive/neutral/negative, then two indicators.
    Satisfaction {
        #[serde(default)]
        mapping: Option<BTreeMap<String, Sentiment>>,
    },
    /// Free text, turned into `topics` NMF topic features.
    Text {
        topics: usize,
        #[serde(default = "default_min_df")]
        min_df: usize,
        #[serde(default)]
        rescale: TopicRescale,
    },
    /// Ordered levels scaled onto [0, 1]; numeric min–max scaling when no
    /// levels are given.
    Ordinal {
        #[serde(default)]
        levels: Option<Vec<String>>,
    },
    /// Kept in the side table, never in the model matrix.
    Demographic,
    Drop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveySchema {
    pub columns: Vec<ColumnSpec>,
    /// Column whose values identify respondents; row numbers otherwise.
    #[serde(default)]
    pub row_id: Option<String>,
}

impl SurveySchema {
    pub fn from_json(text: &str) -> Result<Self> {
        let schema: SurveySchema =
            serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("column {:?} listed twice", c.name)));
            }
            match &c.kind {
                ColumnKind::Text { topics: 0, .. } => {
                    return Err(Error::Schema(format!("text column {:?} needs topics ≥ 1", c.name)))
                }
                ColumnKind::Categorical { choices } if choices.is_empty() => {
                    return Err(Error::Schema(format!("categorical column {:?} has no choices", c.name)))
                }
                _ => {}
            }
        }
        if let Some(id) = &self.row_id {
            if !seen.contains(id.as_str()) {
                return Err(Error::Schema(format!("row_id column {id:?} is not in the schema")));
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }
}

/// Normalizes case, surrounding space and typographic apostrophes.
pub(crate) fn normalize_choice(s: &str) -> String {
    s.trim().replace('\u{2019}', "'").to_lowercase()
}

/// Satisfaction and agreement scales; "Don't Know" is neutral.
pub fn default_satisfaction_mapping() -> BTreeMap<String, Sentiment> {
    use Sentiment::*;
    [
        ("Very Satisfied", Pos),
        ("Satisfied", Pos),
        ("Neutral", Neutral),
        ("Don't Know", Neutral),
        ("Dissatisfied", Neg),
        ("Very Dissatisfied", Neg),
        ("Strongly Agree", Pos),
        ("Agree", Pos),
        ("Disagree", Neg),
        ("Strongly Disagree", Neg),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}
