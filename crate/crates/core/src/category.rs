use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ContestConfig;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CategoryError {
    #[error("unknown age group {0}")]
    UnknownAgeGroup(String),
    #[error("unknown media type {0}")]
    UnknownMediaType(String),
}

impl CategoryError {
    pub fn code(&self) -> &'static str {
        match self {
            CategoryError::UnknownAgeGroup(_) => "UNKNOWN_AGE_GROUP",
            CategoryError::UnknownMediaType(_) => "UNKNOWN_MEDIA_TYPE",
        }
    }
}

/// One unit of competition: an (age group, media type) pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Category {
    pub age_group_id: String,
    pub media_type_id: String,
}

impl Category {
    pub fn id(&self) -> String {
        canonical_id(&self.age_group_id, &self.media_type_id)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.age_group_id, self.media_type_id)
    }
}

fn canonical_id(age_group_id: &str, media_type_id: &str) -> String {
    format!("{age_group_id}-{media_type_id}")
}

/// Age groups × media types, age-group major, both in config order.
pub fn enumerate_categories(config: &ContestConfig) -> Vec<Category> {
    config
        .age_groups
        .iter()
        .flat_map(|g| {
            config.media_types.iter().map(move |m| Category {
                age_group_id: g.id.clone(),
                media_type_id: m.id.clone(),
            })
        })
        .collect()
}

pub fn assign_category(
    age_group_id: &str,
    media_type_id: &str,
    config: &ContestConfig,
) -> Result<String, CategoryError> {
    if config.age_group(age_group_id).is_none() {
        return Err(CategoryError::UnknownAgeGroup(age_group_id.to_string()));
    }
    if config.media_type(media_type_id).is_none() {
        return Err(CategoryError::UnknownMediaType(media_type_id.to_string()));
    }
    Ok(canonical_id(age_group_id, media_type_id))
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;
    use crate::config::{AgeGroupDef, MediaTypeDef};

    #[test]
    fn default_config_has_twelve_categories() {
        let cats = enumerate_categories(&ContestConfig::default());
        assert_eq!(cats.len(), 12);
        assert_eq!(cats[0].id(), "AG1-poster");
        assert_eq!(cats[11].id(), "AG2-report");
    }

    fn config_with(groups: usize, media: usize) -> ContestConfig {
        let c = ContestConfig {
            age_groups: (0..groups)
                .map(|i| AgeGroupDef::new(format!("G{i}"), 10 + 3 * i as u32, 12 + 3 * i as u32))
                .collect(),
            media_types: (0..media).map(|i| MediaTypeDef::new(format!("m{i}"), "M")).collect(),
            ..ContestConfig::default()
        };
        c.validate().unwrap();
        c
    }

    #[test]
    fn product_cardinality() {
        assert_eq!(enumerate_categories(&config_with(2, 3)).len(), 6);
        assert_eq!(enumerate_categories(&config_with(1, 1)).len(), 1);
    }

    #[test]
    fn assign_examples() {
        let c = ContestConfig::default();
        assert_eq!(assign_category("AG1", "video", &c).unwrap(), "AG1-video");
        assert_eq!(assign_category("AG2", "poster", &c).unwrap(), "AG2-poster");
        let err = assign_category("AG3", "video", &c).unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_AGE_GROUP");
        let err = assign_category("AG1", "sculpture", &c).unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_MEDIA_TYPE");
    }

    proptest! {
        #[test]
        fn cardinality_and_uniqueness(groups in 1usize..6, media in 1usize..9) {
            let c = config_with(groups, media);
            let cats = enumerate_categories(&c);
            prop_assert_eq!(cats.len(), groups * media);
            let ids: BTreeSet<String> = cats.iter().map(Category::id).collect();
            prop_assert_eq!(ids.len(), cats.len());
            prop_assert_eq!(enumerate_categories(&c), cats.clone());
            for cat in &cats {
                prop_assert_eq!(
                    assign_category(&cat.age_group_id, &cat.media_type_id, &c).unwrap(),
                    cat.id()
                );
            }
        }
    }
}
