//! Seed-list ingestion: validation, normalization, and deduplication of the
//! page addresses that drive a census run.
//!
//! Rejections are values, not errors: every input line yields exactly one
//! [`SeedUrl`] carrying either `Accepted` or `Rejected` with a reason, so a
//! run can always account for its full input list.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use url::Url;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedStatus {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    Malformed,
    BinaryExtension,
    Duplicate,
}

/// One seed-list entry after normalization.
///
/// `normalized` carries an explicit http/https scheme and a lowercase host
/// for accepted entries; for `Malformed` rejections it is empty (there is
/// nothing well-formed to record). `status == Rejected` iff `reject_reason`
/// is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedUrl {
    pub raw: String,
    pub normalized: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub rank: Option<u64>,
    pub status: SeedStatus,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub reject_reason: Option<RejectReason>,
}

impl SeedUrl {
    pub fn is_accepted(&self) -> bool {
        self.status == SeedStatus::Accepted
    }

    /// Host of the normalized URL; None for malformed rejections.
    pub fn host(&self) -> Option<String> {
        Url::parse(&self.normalized)
            .ok()
            .and_then(|u| u.host_str().map(str::to_string))
    }

    fn accepted(raw: &str, normalized: String, rank: Option<u64>) -> Self {
        SeedUrl {
            raw: raw.to_string(),
            normalized,
            rank,
            status: SeedStatus::Accepted,
            reject_reason: None,
        }
    }

    fn rejected(raw: &str, normalized: String, rank: Option<u64>, reason: RejectReason) -> Self {
        SeedUrl {
            raw: raw.to_string(),
            normalized,
            rank,
            status: SeedStatus::Rejected,
            reject_reason: Some(reason),
        }
    }
}

/// Normalization knobs. The binary-extension blocklist keeps seeds that
/// point at downloadable documents out of the capture queue.
#[derive(Debug, Clone)]
pub struct SeedOptions {
    pub binary_extensions: HashSet<String>,
}

impl Default for SeedOptions {
    fn default() -> Self {
        let exts = [
            "pdf", "xls", "xlsx", "doc", "docx", "ppt", "pptx", "zip", "gz", "exe", "dmg",
        ];
        SeedOptions {
            binary_extensions: exts.iter().map(|e| e.to_string()).collect(),
        }
    }
}

/// Normalize one raw seed: default the scheme to http when absent, lowercase
/// the host, drop any fragment, keep path and query. Never fails; bad input
/// comes back as a `Rejected` entry.
pub fn normalize_url(raw: &str) -> SeedUrl {
    normalize_url_with(raw, &SeedOptions::default(), None)
}

pub fn normalize_url_with(raw: &str, options: &SeedOptions, rank: Option<u64>) -> SeedUrl {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return SeedUrl::rejected(raw, String::new(), rank, RejectReason::Malformed);
    }
    // Bare "example.com" lines are the common case in ranked host lists;
    // anything without "://" gets the default scheme prepended wholesale to
    // dodge the `host:port/path` scheme misparse.
    let candidate = if trimmed.contains("://") {
        trimmed.to_string()
    } else {
        format!("http://{trimmed}")
    };
    let mut parsed = match Url::parse(&candidate) {
        Ok(u) => u,
        Err(_) => return SeedUrl::rejected(raw, String::new(), rank, RejectReason::Malformed),
    };
    if !matches!(parsed.scheme(), "http" | "https") {
        return SeedUrl::rejected(raw, String::new(), rank, RejectReason::Malformed);
    }
    match parsed.host_str() {
        Some(h) if !h.is_empty() => {}
        _ => return SeedUrl::rejected(raw, String::new(), rank, RejectReason::Malformed),
    }
    parsed.set_fragment(None);
    let normalized = parsed.to_string();

    if let Some(ext) = final_segment_extension(&parsed) {
        if options.binary_extensions.contains(&ext) {
            return SeedUrl::rejected(raw, normalized, rank, RejectReason::BinaryExtension);
        }
    }
    SeedUrl::accepted(raw, normalized, rank)
}

fn final_segment_extension(url: &Url) -> Option<String> {
    let segment = url.path_segments()?.next_back()?;
    let dot = segment.rfind('.')?;
    if dot == 0 || dot + 1 == segment.len() {
        return None;
    }
    Some(segment[dot + 1..].to_lowercase())
}

/// Normalize a whole list in order. The first occurrence of each normalized
/// URL is accepted; later occurrences are rejected as duplicates. Entries
/// rejected for other reasons keep their own reason even when repeated.
/// Ranks are 1-based list positions.
pub fn filter_seed_list(raws: &[String]) -> Vec<SeedUrl> {
    let options = SeedOptions::default();
    let entries: Vec<(Option<u64>, &str)> = raws
        .iter()
        .enumerate()
        .map(|(i, raw)| (Some(i as u64 + 1), raw.as_str()))
        .collect();
    filter_entries(&entries, &options)
}

fn filter_entries(entries: &[(Option<u64>, &str)], options: &SeedOptions) -> Vec<SeedUrl> {
    let mut seen: HashSet<String> = HashSet::new();
    let mut out = Vec::with_capacity(entries.len());
    for (rank, raw) in entries {
        let mut seed = normalize_url_with(raw, options, *rank);
        if seed.is_accepted() {
            if seen.contains(&seed.normalized) {
                seed.status = SeedStatus::Rejected;
                seed.reject_reason = Some(RejectReason::Duplicate);
            } else {
                seen.insert(seed.normalized.clone());
            }
        }
        out.push(seed);
    }
    out
}

/// Parse a seed-list file: one URL per line, blank lines and `#` comments
/// skipped. A line of the form `<digits>,<url>` is treated as the ranked
/// CSV layout and the leading integer becomes the seed's rank; all other
/// lines rank by position among seed lines.
pub fn parse_seed_file(text: &str) -> Vec<SeedUrl> {
    parse_seed_file_with(text, &SeedOptions::default())
}

pub fn parse_seed_file_with(text: &str, options: &SeedOptions) -> Vec<SeedUrl> {
    let mut entries: Vec<(Option<u64>, &str)> = Vec::new();
    let mut position = 0u64;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        position += 1;
        let entry = match line.split_once(',') {
            Some((prefix, rest)) if !prefix.is_empty() && prefix.bytes().all(|b| b.is_ascii_digit()) => {
                (prefix.parse::<u64>().ok(), rest.trim())
            }
            _ => (Some(position), line),
        };
        entries.push(entry);
    }
    filter_entries(&entries, options)
}
