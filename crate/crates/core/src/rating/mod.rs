//! The rating pipeline as pure functions over a frozen snapshot:
//! community scores, per-country and per-category rankings, the jury
//! shortlist, jury aggregation and winner selection.
//!
//! Every comparison uses exact rational arithmetic. Entries are ordered by
//! score (descending), then submission time (earlier first), then
//! submission id (lexicographic); see [`precedence`].

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::config::ScoreWeights;
use crate::ids::SubmissionId;
use crate::metrics::{Counts, MetricsSample, MetricsSnapshot};
use crate::submission::Submission;

pub mod export;
pub mod jury;
pub mod shortlist;
pub mod winners;

pub use jury::{aggregate_jury, record_jury_score, JuryBook, JuryError, JuryScore, ScoringMatrix};
pub use shortlist::{build_shortlist, Provenance, Shortlist, ShortlistEntry};
pub use winners::{record_audience_award, select_winners, Winner, WinnerError, WinnerSet};

/// An exact non-negative rational, rendered as `"155"` or `"31/2"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(pub BigRational);

impl Exact {
    pub fn zero() -> Self {
        Exact(BigRational::zero())
    }

    pub fn integer(v: i64) -> Self {
        Exact(BigRational::from_integer(BigInt::from(v)))
    }

    pub fn ratio(n: i64, d: i64) -> Self {
        Exact(BigRational::new(BigInt::from(n), BigInt::from(d)))
    }

    /// Rounded decimal for display only.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Exact {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse::<crate::config::Weight>().map(|w| Exact(w.value().clone()))
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        String::deserialize(deserializer)?.parse().map_err(serde::de::Error::custom)
    }
}

/// A live submission as the rating engine sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entrant {
    pub submission_id: SubmissionId,
    pub country: String,
    pub category_id: String,
    pub age_group_id: String,
    pub submitted_at: DateTime<Utc>,
}

impl Entrant {
    /// `None` unless the submission is finalized and not withdrawn.
    pub fn from_submission(s: &Submission) -> Option<Entrant> {
        if !s.is_live() {
            return None;
        }
        Some(Entrant {
            submission_id: s.submission_id.clone(),
            country: s.country.clone()?,
            category_id: s.category_id.clone()?,
            age_group_id: s.age_group_id.clone()?,
            submitted_at: s.submitted_at?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommunityScore {
    pub submission_id: SubmissionId,
    pub score: Exact,
    pub components: Counts,
}

pub fn weighted_sum(c: Counts, weights: &ScoreWeights) -> BigRational {
    let term = |n: u64, w: &crate::config::Weight| w.value() * BigInt::from(n);
    term(c.views, &weights.w_views) + term(c.likes, &weights.w_likes) + term(c.shares, &weights.w_shares)
}

pub fn community_score(sample: &MetricsSample, weights: &ScoreWeights) -> CommunityScore {
    let components = sample.counts();
    CommunityScore {
        submission_id: sample.submission_id.clone(),
        score: Exact(weighted_sum(components, weights)),
        components,
    }
}

/// The engine's total order: `Less` means `a` ranks ahead of `b`.
pub fn precedence(
    a: (&BigRational, DateTime<Utc>, &SubmissionId),
    b: (&BigRational, DateTime<Utc>, &SubmissionId),
) -> Ordering {
    b.0.cmp(a.0).then(a.1.cmp(&b.1)).then_with(|| a.2.cmp(b.2))
}

/// An entrant with its community score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scored<'a> {
    pub entrant: &'a Entrant,
    pub score: CommunityScore,
}

impl Scored<'_> {
    pub fn precedence(&self, other: &Scored<'_>) -> Ordering {
        precedence(
            (&self.score.score.0, self.entrant.submitted_at, &self.entrant.submission_id),
            (&other.score.score.0, other.entrant.submitted_at, &other.entrant.submission_id),
        )
    }
}

/// Scores every entrant from the snapshot. Entrants missing from the
/// snapshot count as zero.
pub fn score_entrants<'a>(
    snapshot: &MetricsSnapshot,
    entrants: &'a [Entrant],
    weights: &ScoreWeights,
) -> Vec<Scored<'a>> {
    entrants
        .iter()
        .map(|e| {
            let components = snapshot.counts(&e.submission_id).unwrap_or_default();
            Scored {
                entrant: e,
                score: CommunityScore {
                    submission_id: e.submission_id.clone(),
                    score: Exact(weighted_sum(components, weights)),
                    components,
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Grouping {
    Country,
    Category,
}

impl Grouping {
    pub fn key<'e>(&self, e: &'e Entrant) -> &'e str {
        match self {
            Grouping::Country => &e.country,
            Grouping::Category => &e.category_id,
        }
    }
}

/// Scored entrants grouped and sorted by the total order.
pub fn ranked_groups<'a>(
    snapshot: &MetricsSnapshot,
    entrants: &'a [Entrant],
    group_by: Grouping,
    weights: &ScoreWeights,
) -> BTreeMap<String, Vec<Scored<'a>>> {
    let mut groups: BTreeMap<String, Vec<Scored<'a>>> = BTreeMap::new();
    for s in score_entrants(snapshot, entrants, weights) {
        groups.entry(group_by.key(s.entrant).to_string()).or_default().push(s);
    }
    for list in groups.values_mut() {
        list.sort_by(|a, b| a.precedence(b));
    }
    groups
}

pub fn rank(
    snapshot: &MetricsSnapshot,
    entrants: &[Entrant],
    group_by: Grouping,
    weights: &ScoreWeights,
) -> BTreeMap<String, Vec<SubmissionId>> {
    ranked_groups(snapshot, entrants, group_by, weights)
        .into_iter()
        .map(|(k, list)| (k, list.into_iter().map(|s| s.entrant.submission_id.clone()).collect()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    pub fn warning(code: &str, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, code: code.to_string(), message: message.into() }
    }
}


#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::testkit::*;
    use super::*;

    fn sample(v: u64, l: u64, s: u64) -> MetricsSample {
        MetricsSample {
            submission_id: "s".into(),
            observed_at: at(0),
            views: v,
            likes: l,
            shares: s,
            provider_id: "t".into(),
        }
    }

    #[test]
    fn community_score_examples() {
        let w = ScoreWeights::integers(1, 3, 5);
        assert_eq!(community_score(&sample(0, 0, 0), &w).score, Exact::zero());
        assert_eq!(community_score(&sample(0, 0, 0), &ScoreWeights::integers(7, 0, 2)).score, Exact::zero());
        assert_eq!(community_score(&sample(100, 10, 5), &w).score, Exact::integer(155));
        let views_only = ScoreWeights::integers(1, 0, 0);
        assert_eq!(community_score(&sample(123, 45, 6), &views_only).score, Exact::integer(123));
    }

    #[test]
    fn rational_weights_stay_exact() {
        let w = ScoreWeights::new(
            crate::config::Weight::ratio(1, 3),
            crate::config::Weight::ratio(1, 3),
            crate::config::Weight::ratio(1, 3),
        );
        assert_eq!(community_score(&sample(1, 1, 1), &w).score, Exact::integer(1));
        assert_eq!(community_score(&sample(1, 0, 0), &w).score.to_string(), "1/3");
    }

    #[test]
    fn exact_round_trips_as_text() {
        let e = Exact::ratio(31, 2);
        let json = serde_json::to_string(&e).unwrap();
        assert_eq!(json, "\"31/2\"");
        assert_eq!(serde_json::from_str::<Exact>(&json).unwrap(), e);
    }

    #[test]
    fn singleton_groups() {
        let entrants = vec![entrant("a", "AT", "AG1-video", 0), entrant("b", "DE", "AG2-poster", 0)];
        let snap = snapshot(&[("a", Counts::new(1, 0, 0)), ("b", Counts::new(2, 0, 0))]);
        let by_country = rank(&snap, &entrants, Grouping::Country, &ScoreWeights::default());
        assert_eq!(by_country["AT"], vec![SubmissionId::from("a")]);
        assert_eq!(by_country["DE"], vec![SubmissionId::from("b")]);
    }

    #[test]
    fn ties_prefer_earlier_then_smaller_id() {
        let entrants = vec![
            entrant("c", "AT", "AG1-video", 5),
            entrant("b", "AT", "AG1-video", 9),
            entrant("a", "AT", "AG1-video", 9),
        ];
        let same = Counts::new(10, 1, 0);
        let snap = snapshot(&[("a", same), ("b", same), ("c", same)]);
        let ranked = rank(&snap, &entrants, Grouping::Country, &ScoreWeights::default());
        let ids: Vec<&str> = ranked["AT"].iter().map(|s| s.as_str()).collect();
        assert_eq!(ids, vec!["c", "a", "b"]);
    }

    #[test]
    fn missing_snapshot_entries_score_zero() {
        let entrants = vec![entrant("a", "AT", "AG1-video", 0), entrant("b", "AT", "AG1-video", 1)];
        let snap = snapshot(&[("b", Counts::new(1, 0, 0))]);
        let ranked = rank(&snap, &entrants, Grouping::Category, &ScoreWeights::default());
        assert_eq!(ranked["AG1-video"], vec![SubmissionId::from("b"), SubmissionId::from("a")]);
    }

    proptest! {
        #[test]
        fn more_views_never_lowers_position(
            views in proptest::collection::vec(0u64..50, 2..12),
            target in 0usize..12,
            bump in 1u64..100,
        ) {
            let target = target % views.len();
            let entrants: Vec<Entrant> = (0..views.len())
                .map(|i| entrant(&format!("s{i:02}"), "AT", "AG1-video", (i % 3) as i64))
                .collect();
            let rows: Vec<(String, Counts)> =
                views.iter().enumerate().map(|(i, v)| (format!("s{i:02}"), Counts::new(*v, 1, 0))).collect();
            let as_refs = |rows: &[(String, Counts)]| -> Vec<(String, Counts)> { rows.to_vec() };
            let before_rows = as_refs(&rows);
            let mut after_rows = as_refs(&rows);
            after_rows[target].1.views += bump;
            let to_snap = |rows: &[(String, Counts)]| {
                let r: Vec<(&str, Counts)> = rows.iter().map(|(id, c)| (id.as_str(), *c)).collect();
                snapshot(&r)
            };
            let w = ScoreWeights::default();
            let id = SubmissionId::new(format!("s{target:02}"));
            let pos = |snap: &MetricsSnapshot| {
                rank(snap, &entrants, Grouping::Country, &w)["AT"].iter().position(|s| *s == id).unwrap()
            };
            prop_assert!(pos(&to_snap(&after_rows)) <= pos(&to_snap(&before_rows)));
        }
    }
}
