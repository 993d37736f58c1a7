//! Domain model and pure pipelines of a social-media-rated contest:
//! eligibility and categories, the submission lifecycle, metrics ingestion,
//! the two-stage rating engine and outbound syndication.

pub mod category;
pub mod config;
pub mod credentials;
pub mod eligibility;
pub mod ids;
pub mod media;
pub mod metrics;
pub mod rating;
pub mod submission;
pub mod syndication;
pub mod topics;

pub use category::{assign_category, enumerate_categories, Category};
pub use config::{AgeGroupDef, ContestConfig, MediaTypeDef, ScoreWeights, Weight};
pub use eligibility::{derive_age_group, validate_eligibility, EligibilityResult};
pub use ids::{AccountId, JurorId, SubmissionId};
pub use media::{validate_media_link, MediaLink, Platform};
pub use topics::{load_topic_catalog, TopicCatalog, TopicSheet};
