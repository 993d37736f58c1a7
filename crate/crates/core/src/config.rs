//! Contest configuration: submission window, eligibility whitelist, age
//! groups, media-type registry, rating weights and the jury matrix.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub const DEFAULT_HASHTAG: &str = "#SciChallenge2017";
pub const DEFAULT_TARGET_MIN_COUNTRIES: u32 = 15;
pub const DEFAULT_JURY_SCALE_MAX: u32 = 10;

const DEFAULT_CONFIG_JSON: &str = include_str!("../data/default_config.json");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("config document does not parse: {0}")]
    Parse(String),
    #[error("submission_open must precede submission_close, which must not follow metrics_freeze")]
    WindowOrder,
    #[error("at least one age group is required")]
    NoAgeGroups,
    #[error("at least one media type is required")]
    NoMediaTypes,
    #[error("age group {0} has min_age greater than max_age")]
    InvertedAgeGroup(String),
    #[error("age group id {0} is declared twice")]
    DuplicateAgeGroup(String),
    #[error("age groups {0} and {1} overlap")]
    OverlappingAgeGroups(String, String),
    #[error("age groups {0} and {1} leave a gap between them")]
    AgeGap(String, String),
    #[error("media type ids must be non-empty")]
    EmptyMediaType,
    #[error("media type id {0} is declared twice")]
    DuplicateMediaType(String),
    #[error("{0:?} is not an ISO 3166-1 alpha-2 code")]
    BadCountryCode(String),
    #[error("score weight {0} is negative")]
    NegativeWeight(&'static str),
    #[error("target_min_countries and jury_scale_max must be positive")]
    NonPositiveLimit,
    #[error("required_hashtag must start with '#' and contain no whitespace")]
    BadHashtag,
    #[error("jury criteria for age group {0} are missing")]
    MissingCriteria(String),
    #[error("jury criteria reference unknown age group {0}")]
    CriteriaForUnknownGroup(String),
    #[error("criterion {1} appears twice for age group {0}")]
    DuplicateCriterion(String, String),
    #[error("criteria of age group {0} must include every criterion of age group {1}")]
    CriteriaNotNested(String, String),
    #[error("criterion {1} of age group {0} has a non-positive weight")]
    BadCriterionWeight(String, String),
}

/// A non-negative exact rational weight. Serialized as `"3"` or `"3/2"`;
/// plain JSON integers are accepted on input.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Weight(BigRational);

impl Weight {
    pub fn integer(value: u64) -> Self {
        Weight(BigRational::from_integer(BigInt::from(value)))
    }

    pub fn ratio(numer: u64, denom: u64) -> Self {
        assert!(denom > 0, "zero denominator");
        Weight(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Multiplies by a positive factor.
    pub fn scaled(&self, factor: &BigRational) -> Self {
        Weight(&self.0 * factor)
    }
}

impl From<BigRational> for Weight {
    fn from(value: BigRational) -> Self {
        Weight(value)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl FromStr for Weight {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let value = match s.split_once('/') {
            Some((n, d)) => {
                let n: BigInt = n.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
                let d: BigInt = d.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
                if d.is_zero() {
                    return Err(format!("zero denominator in {s:?}"));
                }
                BigRational::new(n, d)
            }
            None => BigRational::from_integer(s.parse().map_err(|_| format!("bad weight {s:?}"))?),
        };
        if value.is_negative() {
            return Err(format!("negative weight {s:?}"));
        }
        Ok(Weight(value))
    }
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(u64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(v) => Ok(Weight::integer(v)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreWeights {
    pub w_views: Weight,
    pub w_likes: Weight,
    pub w_shares: Weight,
}

impl ScoreWeights {
    pub fn new(views: Weight, likes: Weight, shares: Weight) -> Self {
        ScoreWeights { w_views: views, w_likes: likes, w_shares: shares }
    }

    pub fn integers(views: u64, likes: u64, shares: u64) -> Self {
        ScoreWeights::new(Weight::integer(views), Weight::integer(likes), Weight::integer(shares))
    }

    pub fn scaled(&self, factor: &BigRational) -> Self {
        ScoreWeights {
            w_views: self.w_views.scaled(factor),
            w_likes: self.w_likes.scaled(factor),
            w_shares: self.w_shares.scaled(factor),
        }
    }
}

impl Default for ScoreWeights {
    fn default() -> Self {
        ScoreWeights::integers(1, 3, 5)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeGroupDef {
    pub id: String,
    pub min_age: u32,
    pub max_age: u32,
}

impl AgeGroupDef {
    pub fn new(id: impl Into<String>, min_age: u32, max_age: u32) -> Self {
        AgeGroupDef { id: id.into(), min_age, max_age }
    }

    pub fn contains(&self, age: u32) -> bool {
        self.min_age <= age && age <= self.max_age
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MediaTypeDef {
    pub id: String,
    pub display_name: String,
}

impl MediaTypeDef {
    pub fn new(id: impl Into<String>, display_name: impl Into<String>) -> Self {
        MediaTypeDef { id: id.into(), display_name: display_name.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionDef {
    pub id: String,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub weight: u32,
}

fn one() -> u32 {
    1
}

fn is_one(v: &u32) -> bool {
    *v == 1
}

impl CriterionDef {
    pub fn new(id: impl Into<String>) -> Self {
        CriterionDef { id: id.into(), weight: 1 }
    }
}

pub const BASE_CRITERIA: [&str; 4] =
    ["problem_presentation", "creativity", "added_value", "future_thinking"];
pub const SCIENTIFIC_APPROACH: &str = "scientific_approach";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContestConfig {
    pub submission_open: DateTime<Utc>,
    pub submission_close: DateTime<Utc>,
    pub metrics_freeze: DateTime<Utc>,
    /// Date at which participant age is measured; the submission_close date
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_reference_date: Option<NaiveDate>,
    pub eligible_countries: BTreeSet<String>,
    pub age_groups: Vec<AgeGroupDef>,
    pub media_types: Vec<MediaTypeDef>,
    #[serde(default)]
    pub score_weights: ScoreWeights,
    #[serde(default = "default_target_min_countries")]
    pub target_min_countries: u32,
    #[serde(default = "default_jury_scale_max")]
    pub jury_scale_max: u32,
    #[serde(default = "default_hashtag")]
    pub required_hashtag: String,
    /// Age group id to ordered criteria. Derived from the age groups when empty.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub jury_criteria: BTreeMap<String, Vec<CriterionDef>>,
}

fn default_target_min_countries() -> u32 {
    DEFAULT_TARGET_MIN_COUNTRIES
}

fn default_jury_scale_max() -> u32 {
    DEFAULT_JURY_SCALE_MAX
}

fn default_hashtag() -> String {
    DEFAULT_HASHTAG.to_string()
}

impl Default for ContestConfig {
    fn default() -> Self {
        ContestConfig::from_json(DEFAULT_CONFIG_JSON).expect("shipped default config is valid")
    }
}

impl ContestConfig {
    /// Parses and validates a config document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ContestConfig =
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn reference_date(&self) -> NaiveDate {
        self.age_reference_date.unwrap_or_else(|| self.submission_close.date_naive())
    }

    pub fn age_group(&self, id: &str) -> Option<&AgeGroupDef> {
        self.age_groups.iter().find(|g| g.id == id)
    }

    pub fn media_type(&self, id: &str) -> Option<&MediaTypeDef> {
        self.media_types.iter().find(|m| m.id == id)
    }

    pub fn in_window(&self, now: DateTime<Utc>) -> bool {
        self.submission_open <= now && now <= self.submission_close
    }

    /// The jury criteria per age group: the configured table, or the default
    /// where the youngest group is rated on the four base criteria and every
    /// older group additionally on scientific approach.
    pub fn criteria(&self) -> BTreeMap<String, Vec<CriterionDef>> {
        if !self.jury_criteria.is_empty() {
            return self.jury_criteria.clone();
        }
        self.age_groups
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let mut list: Vec<CriterionDef> =
                    BASE_CRITERIA.iter().map(|c| CriterionDef::new(*c)).collect();
                if i > 0 {
                    list.push(CriterionDef::new(SCIENTIFIC_APPROACH));
                }
                (g.id.clone(), list)
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.submission_open < self.submission_close
            && self.submission_close <= self.metrics_freeze)
        {
            return Err(ConfigError::WindowOrder);
        }
        if self.age_groups.is_empty() {
            return Err(ConfigError::NoAgeGroups);
        }
        if self.media_types.is_empty() {
            return Err(ConfigError::NoMediaTypes);
        }
        let mut seen = BTreeSet::new();
        for g in &self.age_groups {
            if g.min_age > g.max_age {
                return Err(ConfigError::InvertedAgeGroup(g.id.clone()));
            }
            if !seen.insert(g.id.as_str()) {
                return Err(ConfigError::DuplicateAgeGroup(g.id.clone()));
            }
        }
        for (i, a) in self.age_groups.iter().enumerate() {
            for b in &self.age_groups[i + 1..] {
                if a.min_age <= b.max_age && b.min_age <= a.max_age {
                    return Err(ConfigError::OverlappingAgeGroups(a.id.clone(), b.id.clone()));
                }
            }
        }
        let mut sorted: Vec<&AgeGroupDef> = self.age_groups.iter().collect();
        sorted.sort_by_key(|g| g.min_age);
        for pair in sorted.windows(2) {
            if pair[0].max_age + 1 != pair[1].min_age {
                return Err(ConfigError::AgeGap(pair[0].id.clone(), pair[1].id.clone()));
            }
        }
        let mut seen = BTreeSet::new();
        for m in &self.media_types {
            if m.id.trim().is_empty() {
                return Err(ConfigError::EmptyMediaType);
            }
            if !seen.insert(m.id.as_str()) {
                return Err(ConfigError::DuplicateMediaType(m.id.clone()));
            }
        }
        for c in &self.eligible_countries {
            if !is_alpha2(c) {
                return Err(ConfigError::BadCountryCode(c.clone()));
            }
        }
        for (name, w) in [
            ("w_views", &self.score_weights.w_views),
            ("w_likes", &self.score_weights.w_likes),
            ("w_shares", &self.score_weights.w_shares),
        ] {
            if w.value().is_negative() {
                return Err(ConfigError::NegativeWeight(name));
            }
        }
        if self.target_min_countries == 0 || self.jury_scale_max == 0 {
            return Err(ConfigError::NonPositiveLimit);
        }
        if !self.required_hashtag.starts_with('#')
            || self.required_hashtag.len() < 2
            || self.required_hashtag.chars().any(char::is_whitespace)
        {
            return Err(ConfigError::BadHashtag);
        }
        self.validate_criteria()
    }

    fn validate_criteria(&self) -> Result<(), ConfigError> {
        let criteria = self.criteria();
        for id in criteria.keys() {
            if self.age_group(id).is_none() {
                return Err(ConfigError::CriteriaForUnknownGroup(id.clone()));
            }
        }
        let mut previous: Option<(&str, BTreeSet<&str>)> = None;
        for g in &self.age_groups {
            let list = criteria.get(&g.id).ok_or_else(|| ConfigError::MissingCriteria(g.id.clone()))?;
            if list.is_empty() {
                return Err(ConfigError::MissingCriteria(g.id.clone()));
            }
            let mut ids = BTreeSet::new();
            for c in list {
                if c.weight == 0 {
                    return Err(ConfigError::BadCriterionWeight(g.id.clone(), c.id.clone()));
                }
                if !ids.insert(c.id.as_str()) {
                    return Err(ConfigError::DuplicateCriterion(g.id.clone(), c.id.clone()));
                }
            }
            if let Some((prev_id, prev)) = &previous {
                if !prev.is_subset(&ids) {
                    return Err(ConfigError::CriteriaNotNested(g.id.clone(), prev_id.to_string()));
                }
            }
            previous = Some((g.id.as_str(), ids));
        }
        Ok(())
    }
}

/// Two ASCII uppercase letters.
pub fn is_alpha2(code: &str) -> bool {
    code.len() == 2 && code.bytes().all(|b| b.is_ascii_uppercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_shape() {
        let c = ContestConfig::default();
        assert_eq!(c.age_groups.len(), 2);
        assert_eq!(c.media_types.len(), 6);
        assert_eq!(c.eligible_countries.len(), 28);
        assert_eq!(c.required_hashtag, "#SciChallenge2017");
        assert_eq!(c.target_min_countries, 15);
        assert_eq!(c.jury_scale_max, 10);
        assert_eq!(c.score_weights, ScoreWeights::integers(1, 3, 5));
        assert_eq!(c.age_group("AG1"), Some(&AgeGroupDef::new("AG1", 10, 14)));
        assert_eq!(c.age_group("AG2"), Some(&AgeGroupDef::new("AG2", 15, 20)));
        let criteria = c.criteria();
        assert_eq!(criteria["AG1"].len(), 4);
        assert_eq!(criteria["AG2"].len(), 5);
        assert_eq!(criteria["AG2"][4].id, SCIENTIFIC_APPROACH);
    }

    #[test]
    fn overlapping_groups_name_both() {
        let mut c = ContestConfig::default();
        c.age_groups[1].min_age = 14;
        assert_eq!(
            c.validate(),
            Err(ConfigError::OverlappingAgeGroups("AG1".into(), "AG2".into()))
        );
    }

    #[test]
    fn gaps_and_inversions_rejected() {
        let mut c = ContestConfig::default();
        c.age_groups[1].min_age = 16;
        assert_eq!(c.validate(), Err(ConfigError::AgeGap("AG1".into(), "AG2".into())));
        let mut c = ContestConfig::default();
        c.age_groups[0] = AgeGroupDef::new("AG1", 14, 10);
        assert_eq!(c.validate(), Err(ConfigError::InvertedAgeGroup("AG1".into())));
    }

    #[test]
    fn window_order_enforced() {
        let mut c = ContestConfig::default();
        c.metrics_freeze = c.submission_open;
        assert_eq!(c.validate(), Err(ConfigError::WindowOrder));
        let mut c = ContestConfig::default();
        c.metrics_freeze = c.submission_close;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn media_type_ids_unique_and_non_empty() {
        let mut c = ContestConfig::default();
        c.media_types.push(MediaTypeDef::new("video", "Again"));
        assert_eq!(c.validate(), Err(ConfigError::DuplicateMediaType("video".into())));
        let mut c = ContestConfig::default();
        c.media_types[0].id = " ".into();
        assert_eq!(c.validate(), Err(ConfigError::EmptyMediaType));
    }

    #[test]
    fn weights_parse_as_rationals() {
        assert_eq!("3/2".parse::<Weight>().unwrap(), Weight::ratio(3, 2));
        assert_eq!("4".parse::<Weight>().unwrap(), Weight::integer(4));
        assert!("-1".parse::<Weight>().is_err());
        assert!("1/0".parse::<Weight>().is_err());
        let w: ScoreWeights =
            serde_json::from_str(r#"{"w_views": 1, "w_likes": "6/2", "w_shares": "0"}"#).unwrap();
        assert_eq!(w, ScoreWeights::integers(1, 3, 0));
        assert_eq!(serde_json::to_string(&Weight::ratio(1, 3)).unwrap(), "\"1/3\"");
    }

    #[test]
    fn criteria_must_nest() {
        let mut c = ContestConfig::default();
        c.jury_criteria = c.criteria();
        c.jury_criteria.get_mut("AG2").unwrap().remove(0);
        assert_eq!(
            c.validate(),
            Err(ConfigError::CriteriaNotNested("AG2".into(), "AG1".into()))
        );
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = ContestConfig::from_json("{\n  \"submission_open\": 12,\n}").unwrap_err();
        match err {
            ConfigError::Parse(msg) => assert!(msg.contains("line 2"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
