//! Recognition of externally hosted contributions (YouTube videos and
//! Slideshare decks).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MediaLinkError {
    #[error("link is not a usable URL: {0}")]
    Malformed(String),
    #[error("host {0} is neither YouTube nor Slideshare")]
    UnsupportedPlatform(String),
}

impl MediaLinkError {
    pub fn code(&self) -> &'static str {
        match self {
            MediaLinkError::Malformed(_) => "MALFORMED_URL",
            MediaLinkError::UnsupportedPlatform(_) => "UNSUPPORTED_PLATFORM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Platform {
    Youtube,
    Slideshare,
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Platform::Youtube => "YOUTUBE",
            Platform::Slideshare => "SLIDESHARE",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MediaLink {
    pub raw_url: String,
    pub platform: Platform,
    pub external_id: String,
    /// Normalized form; parsing it again yields the same platform and id.
    pub canonical_url: String,
}

impl MediaLink {
    /// Identity of the hosted resource, independent of how the link was typed.
    pub fn key(&self) -> (Platform, &str) {
        (self.platform, &self.external_id)
    }
}

const YOUTUBE_HOSTS: [&str; 4] = ["youtube.com", "www.youtube.com", "m.youtube.com", "music.youtube.com"];
const YOUTUBE_SHORT_HOST: &str = "youtu.be";
const SLIDESHARE_SHORT_HOST: &str = "slidesha.re";

fn is_slideshare_host(host: &str) -> bool {
    match host.strip_suffix("slideshare.net") {
        Some("") | Some("www.") | Some("m.") => true,
        // Language mirrors such as de.slideshare.net.
        Some(prefix) => {
            prefix.len() == 3 && prefix.ends_with('.') && prefix[..2].bytes().all(|b| b.is_ascii_lowercase())
        }
        None => false,
    }
}

fn is_youtube_id(id: &str) -> bool {
    !id.is_empty() && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

pub fn validate_media_link(raw_url: &str) -> Result<MediaLink, MediaLinkError> {
    let trimmed = raw_url.trim();
    if trimmed.is_empty() {
        return Err(MediaLinkError::Malformed("empty link".into()));
    }
    let with_scheme =
        if trimmed.contains("://") { trimmed.to_string() } else { format!("https://{trimmed}") };
    let url = Url::parse(&with_scheme).map_err(|e| MediaLinkError::Malformed(e.to_string()))?;
    if !matches!(url.scheme(), "http" | "https") {
        return Err(MediaLinkError::Malformed(format!("scheme {} not allowed", url.scheme())));
    }
    let host = url
        .host_str()
        .ok_or_else(|| MediaLinkError::Malformed("no host".into()))?
        .to_ascii_lowercase();
    let segments: Vec<&str> =
        url.path_segments().map(|s| s.filter(|p| !p.is_empty()).collect()).unwrap_or_default();

    let (platform, external_id, canonical_url) = if YOUTUBE_HOSTS.contains(&host.as_str()) {
        let id = match segments.as_slice() {
            ["watch"] => url.query_pairs().find(|(k, _)| k == "v").map(|(_, v)| v.into_owned()),
            ["embed" | "shorts" | "v" | "live", id] => Some(id.to_string()),
            _ => None,
        };
        let id = id
            .filter(|id| is_youtube_id(id))
            .ok_or_else(|| MediaLinkError::Malformed("no YouTube video id".into()))?;
        let canonical = format!("https://www.youtube.com/watch?v={id}");
        (Platform::Youtube, id, canonical)
    } else if host == YOUTUBE_SHORT_HOST {
        let id = match segments.as_slice() {
            [id] if is_youtube_id(id) => id.to_string(),
            _ => return Err(MediaLinkError::Malformed("no YouTube video id".into())),
        };
        let canonical = format!("https://www.youtube.com/watch?v={id}");
        (Platform::Youtube, id, canonical)
    } else if is_slideshare_host(&host) {
        // A single segment is a profile page, not a deck.
        if segments.len() < 2 {
            return Err(MediaLinkError::Malformed("no Slideshare deck in path".into()));
        }
        let slug = segments[segments.len() - 1].to_string();
        let canonical = format!("https://www.slideshare.net/{}", segments.join("/"));
        (Platform::Slideshare, slug, canonical)
    } else if host == SLIDESHARE_SHORT_HOST {
        let slug = match segments.as_slice() {
            [slug] => slug.to_string(),
            _ => return Err(MediaLinkError::Malformed("no Slideshare short code".into())),
        };
        let canonical = format!("https://{SLIDESHARE_SHORT_HOST}/{slug}");
        (Platform::Slideshare, slug, canonical)
    } else {
        return Err(MediaLinkError::UnsupportedPlatform(host));
    };

    Ok(MediaLink { raw_url: raw_url.to_string(), platform, external_id, canonical_url })
}
