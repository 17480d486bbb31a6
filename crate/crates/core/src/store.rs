//! Crawl store: pages, their third-party elements, and third-party
//! cookies, with a deterministic line-delimited export as the canonical
//! interchange form.
//!
//! Ingestion drops first-party requests, keys elements by
//! (registered_domain, element_path), and keys cookies by
//! (registered_domain, name, value). Re-ingesting a page replaces it
//! wholesale, so repeats never inflate counts, and all collections are
//! ordered maps, so ingestion order never changes an export byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{LoadStatus, PageLoadResult};
use crate::cookies::third_party_cookies;
use crate::psl::{PublicSuffixRuleSet, RegisteredDomain};
use crate::request::{is_third_party, page_domain, parse_request_url, ElementIdentity};
use crate::request::ElementType;
use crate::seed::SeedUrl;

pub const EXPORT_SCHEMA: u32 = 1;

/// One third-party element on one page, keyed externally by identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredElement {
    /// First full URL observed for this identity.
    pub full_url: String,
    pub filename: String,
    /// Arguments of the first observation; identity ignores them.
    pub args: String,
    pub extension: String,
    pub element_type: ElementType,
    /// Request instances collapsed into this identity on this page.
    pub n_requests: u64,
}

/// One third-party cookie on one page, keyed externally by
/// (registered_domain, name, value).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredCookie {
    /// Cookie domain as set (full host, dot already stripped).
    pub host: String,
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub expiry: Option<DateTime<Utc>>,
    pub secure: bool,
    pub http_only: bool,
}

pub type CookieKey = (RegisteredDomain, String, String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredPage {
    pub seed: SeedUrl,
    pub final_url: String,
    pub title: String,
    pub meta_description: String,
    pub load_status: LoadStatus,
    pub captured_at: DateTime<Utc>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostic: Option<String>,
    /// None when neither final nor seed host has a registered domain; the
    /// page is then unanalyzable and excluded from denominators.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub page_domain: Option<RegisteredDomain>,
    pub n_requests: u64,
    pub n_first_party: u64,
    /// Requests whose URL or host could not be attributed.
    pub n_unattributable: u64,
    /// Cookies excluded because their domain is a bare public suffix.
    pub n_cookie_diagnostics: u64,
    #[serde(skip)]
    pub elements: BTreeMap<ElementIdentity, StoredElement>,
    #[serde(skip)]
    pub cookies: BTreeMap<CookieKey, StoredCookie>,
}

impl StoredPage {
    /// Analyzed pages enter statistics; failed or unattributable ones
    /// only count toward the failure tally.
    pub fn is_analyzed(&self) -> bool {
        self.load_status != LoadStatus::Failed && self.page_domain.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub psl_version: String,
    pub registry_version: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestSummary {
    pub n_third_party_requests: u64,
    pub n_third_party_cookies: u64,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("truncated or inconsistent export: {detail}")]
    Truncated { detail: String },
}

/// The store proper. Pages are keyed by their seed's normalized URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CrawlStore {
    pages: BTreeMap<String, StoredPage>,
    pub meta: StoreMeta,
}

impl CrawlStore {
    pub fn new(psl_version: &str, registry_version: &str) -> Self {
        CrawlStore {
            pages: BTreeMap::new(),
            meta: StoreMeta {
                psl_version: psl_version.to_string(),
                registry_version: registry_version.to_string(),
            },
        }
    }

    /// Ingest one capture. First-party requests are dropped (tallied),
    /// third-party requests become elements, third-party cookies are
    /// keyed and stored. Replaces any prior result for the same seed.
    pub fn put_page_result(
        &mut self,
        result: &PageLoadResult,
        rules: &PublicSuffixRuleSet,
    ) -> IngestSummary {
        let key = page_key(result);
        let rd = page_domain(result, rules);
        let mut page = StoredPage {
            seed: result.seed.clone(),
            final_url: result.final_url.clone(),
            title: result.title.clone(),
            meta_description: result.meta_description.clone(),
            load_status: result.load_status,
            captured_at: result.captured_at,
            diagnostic: result.diagnostic.clone(),
            page_domain: rd.clone(),
            n_requests: result.requests.len() as u64,
            n_first_party: 0,
            n_unattributable: 0,
            n_cookie_diagnostics: 0,
            elements: BTreeMap::new(),
            cookies: BTreeMap::new(),
        };
        let mut summary = IngestSummary::default();

        if let Some(page_rd) = &rd {
            for request in &result.requests {
                match parse_request_url(&request.url, rules) {
                    Ok(parsed) => {
                        if is_third_party(page_rd, &parsed.registered_domain) {
                            summary.n_third_party_requests += 1;
                            page.elements
                                .entry(parsed.identity())
                                .or_insert_with(|| StoredElement {
                                    full_url: parsed.full_url.clone(),
                                    filename: parsed.filename.clone(),
                                    args: parsed.args.clone(),
                                    extension: parsed.extension.clone(),
                                    element_type: parsed.element_type,
                                    n_requests: 0,
                                })
                                .n_requests += 1;
                        } else {
                            page.n_first_party += 1;
                        }
                    }
                    Err(_) => page.n_unattributable += 1,
                }
            }
            let third_party = third_party_cookies(page_rd, &result.cookies, rules);
            page.n_cookie_diagnostics = third_party.n_unattributable;
            for (cookie_rd, cookie) in third_party.cookies {
                summary.n_third_party_cookies += 1;
                page.cookies
                    .entry((cookie_rd, cookie.name.clone(), cookie.value.clone()))
                    .or_insert_with(|| StoredCookie {
                        host: cookie.domain.clone(),
                        path: cookie.path.clone(),
                        expiry: cookie.expiry,
                        secure: cookie.secure,
                        http_only: cookie.http_only,
                    });
            }
        } else {
            page.n_unattributable = result.requests.len() as u64;
        }
        self.pages.insert(key, page);
        summary
    }

    pub fn pages(&self) -> impl Iterator<Item = (&String, &StoredPage)> {
        self.pages.iter()
    }

    pub fn n_pages(&self) -> u64 {
        self.pages.len() as u64
    }

    pub fn n_failed(&self) -> u64 {
        self.pages
            .values()
            .filter(|p| p.load_status == LoadStatus::Failed)
            .count() as u64
    }

    pub fn n_analyzed(&self) -> u64 {
        self.pages.values().filter(|p| p.is_analyzed()).count() as u64
    }

    pub fn n_loaded_ok(&self) -> u64 {
        self.pages
            .values()
            .filter(|p| p.is_analyzed() && p.load_status == LoadStatus::Ok)
            .count() as u64
    }

    /// Latest capture time across pages; the run's timestamp. Derived, so
    /// re-ingestion and import cannot drift it.
    pub fn run_timestamp(&self) -> Option<DateTime<Utc>> {
        self.pages.values().map(|p| p.captured_at).max()
    }

    /// Distinct element identities across the whole corpus.
    pub fn n_unique_elements_global(&self) -> u64 {
        self.pages
            .values()
            .flat_map(|p| p.elements.keys())
            .collect::<BTreeSet<_>>()
            .len() as u64
    }

    /// Sum of per-page distinct identities (the per-page uniqueness scope).
    pub fn n_unique_elements_per_page(&self) -> u64 {
        self.pages.values().map(|p| p.elements.len() as u64).sum()
    }

    /// Distinct (registered domain, name, value) cookie triples.
    pub fn n_unique_cookies(&self) -> u64 {
        self.pages
            .values()
            .flat_map(|p| p.cookies.keys())
            .collect::<BTreeSet<_>>()
            .len() as u64
    }

    pub fn export_string(&self) -> String {
        let mut out = String::new();
        let meta = Record::Meta {
            schema: EXPORT_SCHEMA,
            psl_version: self.meta.psl_version.clone(),
            registry_version: self.meta.registry_version.clone(),
            run_timestamp: self.run_timestamp(),
            n_pages: self.n_pages(),
            n_elements: self.pages.values().map(|p| p.elements.len() as u64).sum(),
            n_cookies: self.pages.values().map(|p| p.cookies.len() as u64).sum(),
        };
        push_record(&mut out, &meta);
        for (key, page) in &self.pages {
            push_record(
                &mut out,
                &Record::Page {
                    page: key.clone(),
                    body: page.clone(),
                },
            );
            for ((domain, path), element) in &page.elements {
                push_record(
                    &mut out,
                    &Record::Element {
                        page: key.clone(),
                        domain: domain.clone(),
                        path: path.clone(),
                        body: element.clone(),
                    },
                );
            }
            for ((domain, name, value), cookie) in &page.cookies {
                push_record(
                    &mut out,
                    &Record::Cookie {
                        page: key.clone(),
                        domain: domain.clone(),
                        name: name.clone(),
                        value: value.clone(),
                        body: cookie.clone(),
                    },
                );
            }
        }
        out
    }

    pub fn export_to_path(&self, path: &Path) -> Result<(), StoreError> {
        fs::write(path, self.export_string()).map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn import_str(text: &str) -> Result<CrawlStore, StoreError> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or(StoreError::Truncated {
            detail: "empty file (expected a meta record)".to_string(),
        })?;
        let meta = match parse_record(1, first)? {
            Record::Meta {
                schema,
                psl_version,
                registry_version,
                n_pages,
                n_elements,
                n_cookies,
                ..
            } => {
                if schema != EXPORT_SCHEMA {
                    return Err(StoreError::Line {
                        line: 1,
                        message: format!("unsupported schema {schema} (expected {EXPORT_SCHEMA})"),
                    });
                }
                (psl_version, registry_version, n_pages, n_elements, n_cookies)
            }
            _ => {
                return Err(StoreError::Line {
                    line: 1,
                    message: "first record must have kind `meta`".to_string(),
                })
            }
        };

        let mut store = CrawlStore::new(&meta.0, &meta.1);
        let (mut found_pages, mut found_elements, mut found_cookies) = (0u64, 0u64, 0u64);
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            match parse_record(line_no, line)? {
                Record::Meta { .. } => {
                    return Err(StoreError::Line {
                        line: line_no,
                        message: "unexpected second meta record".to_string(),
                    })
                }
                Record::Page { page, body } => {
                    if store.pages.contains_key(&page) {
                        return Err(StoreError::Line {
                            line: line_no,
                            message: format!("duplicate page record `{page}`"),
                        });
                    }
                    found_pages += 1;
                    store.pages.insert(page, body);
                }
                Record::Element {
                    page,
                    domain,
                    path,
                    body,
                } => {
                    let entry = store.pages.get_mut(&page).ok_or_else(|| StoreError::Line {
                        line: line_no,
                        message: format!("element for unknown page `{page}`"),
                    })?;
                    if entry.elements.insert((domain, path), body).is_some() {
                        return Err(StoreError::Line {
                            line: line_no,
                            message: "duplicate element identity".to_string(),
                        });
                    }
                    found_elements += 1;
                }
                Record::Cookie {
                    page,
                    domain,
                    name,
                    value,
                    body,
                } => {
                    let entry = store.pages.get_mut(&page).ok_or_else(|| StoreError::Line {
                        line: line_no,
                        message: format!("cookie for unknown page `{page}`"),
                    })?;
                    if entry.cookies.insert((domain, name, value), body).is_some() {
                        return Err(StoreError::Line {
                            line: line_no,
                            message: "duplicate cookie key".to_string(),
                        });
                    }
                    found_cookies += 1;
                }
            }
        }
        if (found_pages, found_elements, found_cookies) != (meta.2, meta.3, meta.4) {
            return Err(StoreError::Truncated {
                detail: format!(
                    "meta declares {}/{}/{} pages/elements/cookies, found {}/{}/{}",
                    meta.2, meta.3, meta.4, found_pages, found_elements, found_cookies
                ),
            });
        }
        Ok(store)
    }

    pub fn import_from_path(path: &Path) -> Result<CrawlStore, StoreError> {
        let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::import_str(&text)
    }
}

fn page_key(result: &PageLoadResult) -> String {
    if !result.seed.normalized.is_empty() {
        result.seed.normalized.clone()
    } else if !result.final_url.is_empty() {
        result.final_url.clone()
    } else {
        result.seed.raw.clone()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Meta {
        schema: u32,
        psl_version: String,
        registry_version: String,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        run_timestamp: Option<DateTime<Utc>>,
        n_pages: u64,
        n_elements: u64,
        n_cookies: u64,
    },
    Page {
        page: String,
        #[serde(flatten)]
        body: StoredPage,
    },
    Element {
        page: String,
        domain: RegisteredDomain,
        path: String,
        #[serde(flatten)]
        body: StoredElement,
    },
    Cookie {
        page: String,
        domain: RegisteredDomain,
        name: String,
        value: String,
        #[serde(flatten)]
        body: StoredCookie,
    },
}

fn push_record(out: &mut String, record: &Record) {
    out.push_str(&serde_json::to_string(record).expect("records always serialize"));
    out.push('\n');
}

fn parse_record(line_no: usize, line: &str) -> Result<Record, StoreError> {
    serde_json::from_str(line).map_err(|e| StoreError::Line {
        line: line_no,
        message: e.to_string(),
    })
}
