use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_CATALOG_JSON: &str = include_str!("../data/topic_catalog.json");

pub const OPEN_TOPIC_ID: &str = "AGX_51";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CatalogError {
    #[error("topic catalog does not parse: {0}")]
    Parse(String),
    #[error("topic id {0} appears more than once")]
    DuplicateTopicId(String),
    #[error("topic id {0:?} does not match AG[12X]_NN")]
    BadIdFormat(String),
    #[error("open topic {0} must be scoped to both age groups")]
    OpenTopicScope(String),
}

impl CatalogError {
    pub fn code(&self) -> &'static str {
        match self {
            CatalogError::Parse(_) => "PARSE_ERROR",
            CatalogError::DuplicateTopicId(_) => "DUPLICATE_TOPIC_ID",
            CatalogError::BadIdFormat(_) | CatalogError::OpenTopicScope(_) => "BAD_ID_FORMAT",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgeGroupScope {
    #[serde(rename = "AG1")]
    Ag1,
    #[serde(rename = "AG2")]
    Ag2,
    #[serde(rename = "both")]
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicSheet {
    pub id: String,
    pub title: String,
    pub age_group_scope: AgeGroupScope,
    pub locales: BTreeSet<String>,
    pub keywords: Vec<String>,
    pub body: String,
}

/// `AG1_NN`, `AG2_NN` or `AGX_NN`.
pub fn is_valid_topic_id(id: &str) -> bool {
    let b = id.as_bytes();
    b.len() == 6
        && &b[..2] == b"AG"
        && matches!(b[2], b'1' | b'2' | b'X')
        && b[3] == b'_'
        && b[4].is_ascii_digit()
        && b[5].is_ascii_digit()
}

/// Parses a catalog document (a JSON list of sheets) and validates ids.
pub fn load_topic_catalog(source: &str) -> Result<Vec<TopicSheet>, CatalogError> {
    let sheets: Vec<TopicSheet> =
        serde_json::from_str(source).map_err(|e| CatalogError::Parse(e.to_string()))?;
    let mut seen = BTreeSet::new();
    for sheet in &sheets {
        if !is_valid_topic_id(&sheet.id) {
            return Err(CatalogError::BadIdFormat(sheet.id.clone()));
        }
        if !seen.insert(sheet.id.as_str()) {
            return Err(CatalogError::DuplicateTopicId(sheet.id.clone()));
        }
        if sheet.id == OPEN_TOPIC_ID && sheet.age_group_scope != AgeGroupScope::Both {
            return Err(CatalogError::OpenTopicScope(sheet.id.clone()));
        }
    }
    Ok(sheets)
}

/// Validated sheets indexed by id, in catalog order.
#[derive(Debug, Clone, Default)]
pub struct TopicCatalog {
    sheets: Vec<TopicSheet>,
    index: BTreeMap<String, usize>,
}

impl TopicCatalog {
    pub fn from_json(source: &str) -> Result<Self, CatalogError> {
        Ok(Self::from_sheets(load_topic_catalog(source)?))
    }

    /// The shipped catalog.
    pub fn default_catalog() -> Self {
        Self::from_json(DEFAULT_CATALOG_JSON).expect("shipped catalog is valid")
    }

    fn from_sheets(sheets: Vec<TopicSheet>) -> Self {
        let index = sheets.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        TopicCatalog { sheets, index }
    }

    pub fn get(&self, id: &str) -> Option<&TopicSheet> {
        self.index.get(id).map(|&i| &self.sheets[i])
    }

    pub fn sheets(&self) -> &[TopicSheet] {
        &self.sheets
    }

    pub fn len(&self) -> usize {
        self.sheets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sheets.is_empty()
    }
}
