//! Page capture: one [`PageLoadResult`] per seed, from either a live
//! headless-browser session ([`cdp`]) or a recorded HTTP archive ([`har`]).
//!
//! Capture never aborts a corpus run. Unreachable seeds come back as
//! `Failed` results with a diagnostic; timeouts keep the partial capture
//! and mark it. The [`pool`] submodule runs many pages concurrently while
//! keeping results in seed order.

pub mod cdp;
pub mod har;
pub mod pool;
pub mod set_cookie;

use std::time::Duration;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::seed::SeedUrl;

/// One observed network request within a page load.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestRecord {
    pub url: String,
    pub method: String,
    pub initiated_at: DateTime<Utc>,
    /// Whether a matching response event was observed.
    pub received: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub response_status: Option<u16>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub content_type: Option<String>,
}

impl RequestRecord {
    /// Holds the invariant: no status without a response event.
    pub fn unanswered(url: String, method: String, initiated_at: DateTime<Utc>) -> Self {
        RequestRecord {
            url,
            method,
            initiated_at,
            received: false,
            response_status: None,
            content_type: None,
        }
    }
}

/// One cookie present at the end of a page load. `domain` is lowercase with
/// any leading dot stripped.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CookieRecord {
    pub name: String,
    pub value: String,
    pub domain: String,
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expiry: Option<DateTime<Utc>>,
    pub secure: bool,
    pub http_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadStatus {
    Ok,
    Timeout,
    Failed,
}

/// Everything captured for one seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageLoadResult {
    pub seed: SeedUrl,
    /// Address after redirects; empty only when the load failed outright.
    pub final_url: String,
    pub title: String,
    pub meta_description: String,
    pub requests: Vec<RequestRecord>,
    pub cookies: Vec<CookieRecord>,
    pub load_status: LoadStatus,
    pub captured_at: DateTime<Utc>,
    /// Failure detail for `Failed` (and some `Timeout`) results.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
}

impl PageLoadResult {
    /// A failed load that never produced any traffic.
    pub fn failed(seed: SeedUrl, captured_at: DateTime<Utc>, diagnostic: String) -> Self {
        PageLoadResult {
            final_url: String::new(),
            title: String::new(),
            meta_description: String::new(),
            requests: Vec::new(),
            cookies: Vec::new(),
            load_status: LoadStatus::Failed,
            captured_at,
            diagnostic: Some(diagnostic),
            seed,
        }
    }
}

/// Per-load settings shared by all drivers.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Hard wall for the whole load; partial capture is kept on expiry.
    pub timeout: Duration,
    pub user_agent: String,
    /// Emit a DNT: 1 request header (live captures only).
    pub dnt: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            timeout: Duration::from_secs(30),
            user_agent: "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 (KHTML, like Gecko) \
                         Chrome/120.0.0.0 Safari/537.36"
                .to_string(),
            dnt: false,
        }
    }
}

/// Capture backends implement this one call. Implementations must not
/// panic on bad seeds and must not exceed `options.timeout` plus a fixed
/// teardown grace period.
pub trait CaptureDriver: Sync {
    fn load_page(&self, seed: &SeedUrl, options: &LoadOptions) -> PageLoadResult;
}
