use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::shortlist::Shortlist;
use super::Exact;
use crate::config::{ContestConfig, CriterionDef};
use crate::ids::{JurorId, SubmissionId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum JuryError {
    #[error("submission {0} is not on the shortlist")]
    NotShortlisted(SubmissionId),
    #[error("criteria {given:?} do not match the {age_group} matrix {expected:?}")]
    CriteriaMismatch { age_group: String, expected: Vec<String>, given: Vec<String> },
    #[error("score {value} for {criterion} is outside 0..={max}")]
    ScoreOutOfRange { criterion: String, value: i64, max: u32 },
    #[error("no jury scores recorded")]
    NoScores,
}

impl JuryError {
    pub fn code(&self) -> &'static str {
        match self {
            JuryError::NotShortlisted(_) => "NOT_SHORTLISTED",
            JuryError::CriteriaMismatch { .. } => "CRITERIA_MISMATCH",
            JuryError::ScoreOutOfRange { .. } => "SCORE_OUT_OF_RANGE",
            JuryError::NoScores => "NO_SCORES",
        }
    }
}

/// Ordered criteria per age group on an integer scale `0..=scale_max`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoringMatrix {
    pub scale_max: u32,
    pub criteria: BTreeMap<String, Vec<CriterionDef>>,
}

impl ScoringMatrix {
    pub fn from_config(config: &ContestConfig) -> Self {
        ScoringMatrix { scale_max: config.jury_scale_max, criteria: config.criteria() }
    }

    pub fn criteria_for(&self, age_group: &str) -> &[CriterionDef] {
        self.criteria.get(age_group).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn criterion_ids(&self, age_group: &str) -> Vec<String> {
        self.criteria_for(age_group).iter().map(|c| c.id.clone()).collect()
    }
}

/// One juror's score-set for one submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuryScore {
    pub juror_id: JurorId,
    pub submission_id: SubmissionId,
    pub scores: BTreeMap<String, i64>,
    pub recorded_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplacedScore {
    pub replaced_at: DateTime<Utc>,
    pub previous: JuryScore,
}

/// Current score-sets keyed by submission then juror, plus the audit trail
/// of overwritten ones.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuryBook {
    current: BTreeMap<SubmissionId, BTreeMap<JurorId, JuryScore>>,
    audit: Vec<ReplacedScore>,
}

impl JuryBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scores_for(&self, id: &SubmissionId) -> Vec<&JuryScore> {
        self.current.get(id).map(|m| m.values().collect()).unwrap_or_default()
    }

    pub fn all(&self) -> impl Iterator<Item = &JuryScore> {
        self.current.values().flat_map(|m| m.values())
    }

    pub fn audit(&self) -> &[ReplacedScore] {
        &self.audit
    }

    pub fn scored_count(&self, id: &SubmissionId) -> usize {
        self.current.get(id).map_or(0, BTreeMap::len)
    }
}

/// Validates a score-set against the matrix of the entry's age group and
/// stores it, replacing (and auditing) the juror's previous set.
pub fn record_jury_score<'b>(
    book: &'b mut JuryBook,
    score: JuryScore,
    matrix: &ScoringMatrix,
    shortlist: &Shortlist,
) -> Result<&'b JuryScore, JuryError> {
    let entry = shortlist
        .get(&score.submission_id)
        .ok_or_else(|| JuryError::NotShortlisted(score.submission_id.clone()))?;
    let age_group = &entry.entrant.age_group_id;
    let expected: BTreeSet<String> = matrix.criterion_ids(age_group).into_iter().collect();
    let given: BTreeSet<String> = score.scores.keys().cloned().collect();
    if expected != given {
        return Err(JuryError::CriteriaMismatch {
            age_group: age_group.clone(),
            expected: matrix.criterion_ids(age_group),
            given: given.into_iter().collect(),
        });
    }
    for (criterion, &value) in &score.scores {
        if value < 0 || value > i64::from(matrix.scale_max) {
            return Err(JuryError::ScoreOutOfRange {
                criterion: criterion.clone(),
                value,
                max: matrix.scale_max,
            });
        }
    }
    let slot = book.current.entry(score.submission_id.clone()).or_default();
    let recorded_at = score.recorded_at;
    if let Some(previous) = slot.insert(score.juror_id.clone(), score.clone()) {
        book.audit.push(ReplacedScore { replaced_at: recorded_at, previous });
    }
    Ok(&book.current[&score.submission_id][&score.juror_id])
}

/// Mean over jurors of each juror's weighted mean over the age group's
/// criteria. Always within `0..=scale_max`.
pub fn aggregate_jury(
    scores: &[&JuryScore],
    matrix: &ScoringMatrix,
    age_group: &str,
) -> Result<Exact, JuryError> {
    if scores.is_empty() {
        return Err(JuryError::NoScores);
    }
    let criteria = matrix.criteria_for(age_group);
    let total_weight: u64 = criteria.iter().map(|c| u64::from(c.weight)).sum();
    if total_weight == 0 {
        return Err(JuryError::NoScores);
    }
    let mut sum_of_means = BigRational::zero();
    for s in scores {
        let weighted: i64 = criteria
            .iter()
            .map(|c| i64::from(c.weight) * s.scores.get(&c.id).copied().unwrap_or(0))
            .sum();
        sum_of_means += BigRational::new(BigInt::from(weighted), BigInt::from(total_weight));
    }
    Ok(Exact(sum_of_means / BigInt::from(scores.len())))
}
