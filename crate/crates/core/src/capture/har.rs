//! HTTP Archive (HAR 1.2) ingestion and directory replay.
//!
//! Only the subset the census needs is read: `log.pages[]` (id, title),
//! `log.entries[]` (pageref, startedDateTime, request.method, request.url,
//! response.status, response.headers, response.content.mimeType). Unknown
//! fields are ignored. Two custom page fields are honored when present:
//! `_load_status` ("ok" | "timeout" | "failed") and `_meta_description`,
//! letting recorded fixtures express outcomes a pure archive cannot.
//!
//! A response status of 0 marks a request whose response was never
//! observed. The page's final address is found by walking the 3xx
//! Location chain from the document request.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, TimeZone, Utc};
use serde::Deserialize;
use thiserror::Error;
use url::Url;

use super::set_cookie::parse_set_cookie;
use super::{CaptureDriver, CookieRecord, LoadOptions, LoadStatus, PageLoadResult, RequestRecord};
use crate::seed::{normalize_url, SeedUrl};

#[derive(Debug, Error)]
pub enum HarError {
    #[error("not valid HAR JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("document has no log object")]
    NoLog,
    #[error("archive has zero entries")]
    NoEntries,
    #[error("page `{page}` has no entries")]
    EmptyPage { page: String },
    #[error("entry {entry}: missing required field `{field}`")]
    MissingField { entry: usize, field: &'static str },
    #[error("entry {entry}: bad startedDateTime `{value}`")]
    BadTimestamp { entry: usize, value: String },
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Deserialize)]
struct HarDoc {
    log: Option<HarLog>,
}

#[derive(Deserialize, Default)]
struct HarLog {
    #[serde(default)]
    pages: Vec<HarPage>,
    #[serde(default)]
    entries: Vec<HarEntry>,
}

#[derive(Deserialize)]
struct HarPage {
    id: Option<String>,
    #[serde(default)]
    title: String,
    #[serde(rename = "startedDateTime")]
    started: Option<String>,
    #[serde(rename = "_meta_description", default)]
    meta_description: String,
    #[serde(rename = "_load_status")]
    load_status: Option<String>,
    #[serde(rename = "_diagnostic")]
    diagnostic: Option<String>,
}

#[derive(Deserialize)]
struct HarEntry {
    pageref: Option<String>,
    #[serde(rename = "startedDateTime")]
    started: Option<String>,
    request: Option<HarRequest>,
    response: Option<HarResponse>,
}

#[derive(Deserialize)]
struct HarRequest {
    method: Option<String>,
    url: Option<String>,
}

#[derive(Deserialize, Default)]
struct HarResponse {
    status: Option<i64>,
    #[serde(default)]
    headers: Vec<HarHeader>,
    content: Option<HarContent>,
    #[serde(rename = "redirectURL")]
    redirect_url: Option<String>,
}

#[derive(Deserialize)]
struct HarHeader {
    name: String,
    value: String,
}

#[derive(Deserialize)]
struct HarContent {
    #[serde(rename = "mimeType")]
    mime_type: Option<String>,
}

/// Parse HAR text into one [`PageLoadResult`] per page. Entries without a
/// pageref attach to the first page; an archive without a pages array is a
/// single-page capture.
pub fn ingest_har(text: &str) -> Result<Vec<PageLoadResult>, HarError> {
    let doc: HarDoc = serde_json::from_str(text)?;
    let log = doc.log.ok_or(HarError::NoLog)?;
    if log.entries.is_empty() {
        return Err(HarError::NoEntries);
    }

    let mut validated = Vec::with_capacity(log.entries.len());
    for (i, entry) in log.entries.iter().enumerate() {
        validated.push(validate_entry(i, entry)?);
    }

    // Group entry indexes by page, preserving file order within each page.
    let mut groups: Vec<(Option<&HarPage>, Vec<usize>)> = Vec::new();
    if log.pages.is_empty() {
        groups.push((None, (0..validated.len()).collect()));
    } else {
        let mut by_id: HashMap<&str, usize> = HashMap::new();
        for page in &log.pages {
            let id = page.id.as_deref().unwrap_or("");
            by_id.entry(id).or_insert(groups.len());
            groups.push((Some(page), Vec::new()));
        }
        for (i, entry) in log.entries.iter().enumerate() {
            let slot = entry
                .pageref
                .as_deref()
                .and_then(|r| by_id.get(r).copied())
                .unwrap_or(0);
            groups[slot].1.push(i);
        }
    }

    let mut results = Vec::with_capacity(groups.len());
    for (page, indexes) in groups {
        let page_id = page
            .and_then(|p| p.id.clone())
            .unwrap_or_else(|| "page_0".to_string());
        if indexes.is_empty() {
            return Err(HarError::EmptyPage { page: page_id });
        }
        results.push(build_page(page, &indexes, &validated)?);
    }
    Ok(results)
}

struct ValidEntry {
    url: String,
    method: String,
    initiated_at: DateTime<Utc>,
    status: i64,
    content_type: Option<String>,
    set_cookie: Vec<String>,
    location: Option<String>,
}

fn validate_entry(i: usize, entry: &HarEntry) -> Result<ValidEntry, HarError> {
    let request = entry
        .request
        .as_ref()
        .ok_or(HarError::MissingField {
            entry: i,
            field: "request",
        })?;
    let url = request
        .url
        .clone()
        .ok_or(HarError::MissingField {
            entry: i,
            field: "request.url",
        })?;
    let method = request
        .method
        .clone()
        .ok_or(HarError::MissingField {
            entry: i,
            field: "request.method",
        })?;
    let started = entry.started.as_deref().ok_or(HarError::MissingField {
        entry: i,
        field: "startedDateTime",
    })?;
    let initiated_at = parse_timestamp(started).ok_or_else(|| HarError::BadTimestamp {
        entry: i,
        value: started.to_string(),
    })?;

    let empty = HarResponse::default();
    let response = entry.response.as_ref().unwrap_or(&empty);
    let status = response.status.unwrap_or(0);
    let content_type = response
        .content
        .as_ref()
        .and_then(|c| c.mime_type.clone())
        .filter(|m| !m.is_empty());
    let set_cookie = response
        .headers
        .iter()
        .filter(|h| h.name.eq_ignore_ascii_case("set-cookie"))
        .map(|h| h.value.clone())
        .collect();
    let location = response
        .headers
        .iter()
        .find(|h| h.name.eq_ignore_ascii_case("location"))
        .map(|h| h.value.clone())
        .or_else(|| response.redirect_url.clone())
        .filter(|l| !l.is_empty());
    Ok(ValidEntry {
        url,
        method,
        initiated_at,
        status,
        content_type,
        set_cookie,
        location,
    })
}

fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    DateTime::parse_from_rfc3339(s)
        .ok()
        .map(|dt| dt.with_timezone(&Utc))
}

fn build_page(
    page: Option<&HarPage>,
    indexes: &[usize],
    entries: &[ValidEntry],
) -> Result<PageLoadResult, HarError> {
    let mut requests = Vec::with_capacity(indexes.len());
    // Cookie jar: later sets of the same (domain, name, path) replace
    // earlier ones, mirroring a browser's end-of-load snapshot.
    let mut jar: BTreeMap<(String, String, String), CookieRecord> = BTreeMap::new();
    for &i in indexes {
        let e = &entries[i];
        let received = e.status > 0;
        requests.push(RequestRecord {
            url: e.url.clone(),
            method: e.method.clone(),
            initiated_at: e.initiated_at,
            received,
            response_status: received.then_some(e.status as u16),
            content_type: e.content_type.clone(),
        });
        if let Some(host) = Url::parse(&e.url).ok().and_then(|u| u.host_str().map(str::to_string)) {
            for header in &e.set_cookie {
                if let Some(cookie) = parse_set_cookie(header, &host, e.initiated_at) {
                    let key = (cookie.domain.clone(), cookie.name.clone(), cookie.path.clone());
                    jar.insert(key, cookie);
                }
            }
        }
    }

    let doc = &entries[indexes[0]];
    let final_url = follow_redirects(indexes, entries);
    let captured_at = page
        .and_then(|p| p.started.as_deref())
        .and_then(parse_timestamp)
        .unwrap_or(doc.initiated_at);
    let load_status = match page.and_then(|p| p.load_status.as_deref()) {
        Some("timeout") => LoadStatus::Timeout,
        Some("failed") => LoadStatus::Failed,
        _ => LoadStatus::Ok,
    };
    Ok(PageLoadResult {
        seed: normalize_url(&doc.url),
        final_url,
        title: page.map(|p| p.title.clone()).unwrap_or_default(),
        meta_description: page.map(|p| p.meta_description.clone()).unwrap_or_default(),
        requests,
        cookies: jar.into_values().collect(),
        load_status,
        captured_at,
        diagnostic: page.and_then(|p| p.diagnostic.clone()),
    })
}

/// Walk the 3xx chain starting at the document request. The chain ends at
/// the first non-redirect hop, at a redirect target that was never
/// fetched, or when a hop repeats (defensive loop guard).
fn follow_redirects(indexes: &[usize], entries: &[ValidEntry]) -> String {
    let mut current = indexes[0];
    let mut visited = vec![current];
    loop {
        let e = &entries[current];
        if !(300..400).contains(&e.status) {
            return e.url.clone();
        }
        let target = match &e.location {
            Some(loc) => match Url::parse(&e.url).ok().and_then(|base| base.join(loc).ok()) {
                Some(u) => u.to_string(),
                None => return e.url.clone(),
            },
            None => return e.url.clone(),
        };
        let next = indexes
            .iter()
            .copied()
            .find(|&i| entries[i].url == target && !visited.contains(&i));
        match next {
            Some(i) => {
                visited.push(i);
                current = i;
            }
            None => return target,
        }
    }
}

/// Replay driver over a directory of `.har` files. Pages are indexed by
/// their document-request URL, with a by-host fallback so a seed like
/// `http://example.com/` finds a capture whose document is any path on
/// that host. Seeds without a recording fail cleanly.
pub struct HarReplayDriver {
    by_url: HashMap<String, PageLoadResult>,
    by_host: HashMap<String, String>,
}

impl HarReplayDriver {
    pub fn from_dir(dir: &Path) -> Result<Self, HarError> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|source| HarError::Io {
                path: dir.to_path_buf(),
                source,
            })?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|x| x == "har").unwrap_or(false))
            .collect();
        paths.sort();

        let mut driver = HarReplayDriver {
            by_url: HashMap::new(),
            by_host: HashMap::new(),
        };
        for path in paths {
            let text = fs::read_to_string(&path).map_err(|source| HarError::Io {
                path: path.clone(),
                source,
            })?;
            for result in ingest_har(&text)? {
                driver.insert(result);
            }
        }
        Ok(driver)
    }

    pub fn from_results(results: Vec<PageLoadResult>) -> Self {
        let mut driver = HarReplayDriver {
            by_url: HashMap::new(),
            by_host: HashMap::new(),
        };
        for result in results {
            driver.insert(result);
        }
        driver
    }

    fn insert(&mut self, result: PageLoadResult) {
        let key = result.seed.normalized.clone();
        if key.is_empty() || self.by_url.contains_key(&key) {
            return; // first capture of a URL wins; order is sorted, so deterministic
        }
        if let Some(host) = result.seed.host() {
            self.by_host.entry(host).or_insert_with(|| key.clone());
        }
        self.by_url.insert(key, result);
    }

    pub fn page_count(&self) -> usize {
        self.by_url.len()
    }

    fn lookup(&self, seed: &SeedUrl) -> Option<&PageLoadResult> {
        if let Some(r) = self.by_url.get(&seed.normalized) {
            return Some(r);
        }
        seed.host()
            .and_then(|h| self.by_host.get(&h))
            .and_then(|key| self.by_url.get(key))
    }
}

impl CaptureDriver for HarReplayDriver {
    fn load_page(&self, seed: &SeedUrl, _options: &LoadOptions) -> PageLoadResult {
        match self.lookup(seed) {
            Some(recorded) => {
                let mut result = recorded.clone();
                result.seed = seed.clone();
                result
            }
            None => PageLoadResult::failed(
                seed.clone(),
                Utc.timestamp_opt(0, 0).unwrap(),
                format!("no recording for `{}`", seed.normalized),
            ),
        }
    }
}
