use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::jury::{aggregate_jury, JuryBook, ScoringMatrix};
use super::shortlist::{Shortlist, ShortlistEntry};
use super::{precedence, Diagnostic, Exact};
use crate::category::enumerate_categories;
use crate::config::ContestConfig;
use crate::ids::SubmissionId;

pub const EMPTY_CATEGORY: &str = "EMPTY_CATEGORY";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WinnerError {
    #[error("shortlisted entries without jury scores: {0:?}")]
    UnscoredEntries(Vec<SubmissionId>),
    #[error("submission {0} is not among the winners")]
    NotAWinner(SubmissionId),
}

impl WinnerError {
    pub fn code(&self) -> &'static str {
        match self {
            WinnerError::UnscoredEntries(_) => "UNSCORED_ENTRIES",
            WinnerError::NotAWinner(_) => "NOT_A_WINNER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Winner {
    pub category_id: String,
    pub submission_id: SubmissionId,
    pub country: String,
    pub jury_aggregate: Exact,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AudienceAwardRecord {
    pub submission_id: SubmissionId,
    pub recorded_at: DateTime<Utc>,
    pub replaced: Option<SubmissionId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WinnerSet {
    /// In category enumeration order, at most one per category.
    pub winners: Vec<Winner>,
    pub audience_award: Option<SubmissionId>,
    #[serde(default)]
    pub audience_award_log: Vec<AudienceAwardRecord>,
    #[serde(default)]
    pub diagnostics: Vec<Diagnostic>,
}

impl WinnerSet {
    pub fn winner_of(&self, category_id: &str) -> Option<&Winner> {
        self.winners.iter().find(|w| w.category_id == category_id)
    }

    pub fn is_winner(&self, id: &SubmissionId) -> bool {
        self.winners.iter().any(|w| &w.submission_id == id)
    }
}

/// Per category, the shortlisted entry with the highest jury aggregate;
/// ties fall back to the community ranking order (earlier submission, then
/// smaller id).
pub fn select_winners(
    shortlist: &Shortlist,
    jury: &JuryBook,
    matrix: &ScoringMatrix,
    config: &ContestConfig,
) -> Result<WinnerSet, WinnerError> {
    let unscored: Vec<SubmissionId> =
        shortlist.entries.keys().filter(|id| jury.scored_count(id) == 0).cloned().collect();
    if !unscored.is_empty() {
        return Err(WinnerError::UnscoredEntries(unscored));
    }

    let mut winners = Vec::new();
    let mut diagnostics = Vec::new();
    for category in enumerate_categories(config) {
        let category_id = category.id();
        let mut best: Option<(&ShortlistEntry, Exact)> = None;
        for entry in shortlist.entries.values().filter(|e| e.entrant.category_id == category_id) {
            let aggregate = aggregate_jury(
                &jury.scores_for(&entry.entrant.submission_id),
                matrix,
                &entry.entrant.age_group_id,
            )
            .expect("coverage checked above");
            let better = match &best {
                None => true,
                Some((current, current_agg)) => precedence(
                    (&aggregate.0, entry.entrant.submitted_at, &entry.entrant.submission_id),
                    (&current_agg.0, current.entrant.submitted_at, &current.entrant.submission_id),
                )
                .is_lt(),
            };
            if better {
                best = Some((entry, aggregate));
            }
        }
        match best {
            Some((entry, aggregate)) => winners.push(Winner {
                category_id,
                submission_id: entry.entrant.submission_id.clone(),
                country: entry.entrant.country.clone(),
                jury_aggregate: aggregate,
            }),
            None => diagnostics.push(Diagnostic::warning(
                EMPTY_CATEGORY,
                format!("category {category_id} has no shortlisted entry; no winner"),
            )),
        }
    }
    Ok(WinnerSet { winners, audience_award: None, audience_award_log: Vec::new(), diagnostics })
}

/// Records the audience's pick among the winners; a later pick replaces the
/// earlier one and both stay in the log.
pub fn record_audience_award(
    winner_set: &mut WinnerSet,
    submission_id: &SubmissionId,
    at: DateTime<Utc>,
) -> Result<WinnerSet, WinnerError> {
    if !winner_set.is_winner(submission_id) {
        return Err(WinnerError::NotAWinner(submission_id.clone()));
    }
    let replaced = winner_set.audience_award.replace(submission_id.clone());
    winner_set.audience_award_log.push(AudienceAwardRecord {
        submission_id: submission_id.clone(),
        recorded_at: at,
        replaced,
    });
    Ok(winner_set.clone())
}
