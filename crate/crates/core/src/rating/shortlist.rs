use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{score_entrants, Diagnostic, Entrant, Exact, Grouping, Scored};
use crate::config::ContestConfig;
use crate::ids::SubmissionId;
use crate::metrics::MetricsSnapshot;

pub const FEW_COUNTRIES: &str = "FEW_COUNTRIES";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "key", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    TopOfCountry(String),
    TopOfCategory(String),
}

impl Provenance {
    pub fn label(&self) -> String {
        match self {
            Provenance::TopOfCountry(c) => format!("TOP_OF_COUNTRY({c})"),
            Provenance::TopOfCategory(c) => format!("TOP_OF_CATEGORY({c})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShortlistEntry {
    pub entrant: Entrant,
    pub community_score: Exact,
    pub provenance: BTreeSet<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortlist {
    pub built_from: DateTime<Utc>,
    pub entries: BTreeMap<SubmissionId, ShortlistEntry>,
    pub participating_countries: usize,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

impl Shortlist {
    pub fn contains(&self, id: &SubmissionId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn get(&self, id: &SubmissionId) -> Option<&ShortlistEntry> {
        self.entries.get(id)
    }

    pub fn ids(&self) -> BTreeSet<SubmissionId> {
        self.entries.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn leaders<'s, 'a>(scored: &'s [Scored<'a>], group_by: Grouping) -> BTreeMap<&'a str, &'s Scored<'a>> {
    let mut best: BTreeMap<&'a str, &'s Scored<'a>> = BTreeMap::new();
    for s in scored {
        let key = group_by.key(s.entrant);
        match best.get(key) {
            Some(current) if current.precedence(s).is_le() => {}
            _ => {
                best.insert(key, s);
            }
        }
    }
    best
}

/// Union of the top entry of every participating country and the top entry
/// of every category, deduplicated with provenance tags.
pub fn build_shortlist(snapshot: &MetricsSnapshot, entrants: &[Entrant], config: &ContestConfig) -> Shortlist {
    let scored = score_entrants(snapshot, entrants, &config.score_weights);
    let mut entries: BTreeMap<SubmissionId, ShortlistEntry> = BTreeMap::new();
    let mut tag = |s: &Scored<'_>, p: Provenance| {
        entries
            .entry(s.entrant.submission_id.clone())
            .or_insert_with(|| ShortlistEntry {
                entrant: s.entrant.clone(),
                community_score: s.score.score.clone(),
                provenance: BTreeSet::new(),
            })
            .provenance
            .insert(p);
    };
    let by_country = leaders(&scored, Grouping::Country);
    for (country, s) in &by_country {
        tag(s, Provenance::TopOfCountry(country.to_string()));
    }
    for (category, s) in leaders(&scored, Grouping::Category) {
        tag(s, Provenance::TopOfCategory(category.to_string()));
    }

    let participating_countries = by_country.len();
    let mut diagnostics = Vec::new();
    if participating_countries < config.target_min_countries as usize {
        diagnostics.push(Diagnostic::warning(
            FEW_COUNTRIES,
            format!(
                "{participating_countries} participating countries, below the target of {}",
                config.target_min_countries
            ),
        ));
    }
    Shortlist { built_from: snapshot.frozen_at, entries, participating_countries, diagnostics }
}
