//! Aggregate census statistics over a filtered store view.
//!
//! The single-site filter runs first: any third-party domain observed
//! (via element or cookie) on exactly one analyzed page is excluded from
//! every downstream number, since such a domain cannot link visitors
//! across sites. All percentages use successfully analyzed pages as the
//! denominator and ship with their raw counts so every value can be
//! recomputed by a reader.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cookies::SurveillanceIndicator;
use crate::ownership::{corporate_reach, CompanyReach, OwnershipRegistry, ReachError};
use crate::psl::RegisteredDomain;
use crate::request::{ElementIdentity, ElementType};
use crate::store::CrawlStore;

pub const REPORT_SCHEMA: u32 = 1;

/// One analyzed page after filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageView {
    pub key: String,
    /// Final label of the page host; "ip" for address-literal hosts.
    pub tld: String,
    /// Retained third-party element domains.
    pub domains: BTreeSet<RegisteredDomain>,
    /// Retained element identities.
    pub elements: BTreeSet<ElementIdentity>,
    /// Retained third-party cookies.
    pub cookies: Vec<CookieView>,
    pub has_js: bool,
}

impl PageView {
    pub fn has_3pe(&self) -> bool {
        !self.domains.is_empty()
    }

    pub fn has_cookie(&self) -> bool {
        !self.cookies.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CookieView {
    pub domain: RegisteredDomain,
    pub host: String,
    pub name: String,
    pub value: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementInfo {
    pub filename: String,
    pub element_type: ElementType,
}

/// The filtered corpus all statistics are computed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredView {
    /// Analyzed pages in store (key) order.
    pub pages: Vec<PageView>,
    pub element_info: BTreeMap<ElementIdentity, ElementInfo>,
    /// Audit trail: domains dropped by the single-site rule.
    pub excluded_domains: BTreeSet<RegisteredDomain>,
    pub n_failed: u64,
    pub n_loaded_ok: u64,
}

/// Apply the single-site filter. A domain's occurrence count is the
/// number of analyzed pages where it appears as an element domain or a
/// cookie domain; count 1 excludes it everywhere.
pub fn filter_single_site_domains(store: &CrawlStore) -> FilteredView {
    let mut occurrences: BTreeMap<RegisteredDomain, u64> = BTreeMap::new();
    for (_, page) in store.pages().filter(|(_, p)| p.is_analyzed()) {
        let mut seen: BTreeSet<&RegisteredDomain> = BTreeSet::new();
        seen.extend(page.elements.keys().map(|(d, _)| d));
        seen.extend(page.cookies.keys().map(|(d, _, _)| d));
        for domain in seen {
            *occurrences.entry(domain.clone()).or_insert(0) += 1;
        }
    }
    let excluded_domains: BTreeSet<RegisteredDomain> = occurrences
        .into_iter()
        .filter(|(_, n)| *n == 1)
        .map(|(d, _)| d)
        .collect();

    let mut pages = Vec::new();
    let mut element_info: BTreeMap<ElementIdentity, ElementInfo> = BTreeMap::new();
    for (key, page) in store.pages().filter(|(_, p)| p.is_analyzed()) {
        let page_rd = page.page_domain.as_ref().expect("analyzed pages have a domain");
        let mut view = PageView {
            key: key.clone(),
            tld: page_rd.tld(),
            domains: BTreeSet::new(),
            elements: BTreeSet::new(),
            cookies: Vec::new(),
            has_js: false,
        };
        for (identity, element) in &page.elements {
            if excluded_domains.contains(&identity.0) {
                continue;
            }
            view.domains.insert(identity.0.clone());
            view.elements.insert(identity.clone());
            if element.element_type == ElementType::Javascript {
                view.has_js = true;
            }
            element_info.entry(identity.clone()).or_insert_with(|| ElementInfo {
                filename: element.filename.clone(),
                element_type: element.element_type,
            });
        }
        for ((domain, name, value), cookie) in &page.cookies {
            if excluded_domains.contains(domain) {
                continue;
            }
            view.cookies.push(CookieView {
                domain: domain.clone(),
                host: cookie.host.clone(),
                name: name.clone(),
                value: value.clone(),
            });
        }
        pages.push(view);
    }
    FilteredView {
        pages,
        element_info,
        excluded_domains,
        n_failed: store.n_failed(),
        n_loaded_ok: store.n_loaded_ok(),
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReportError {
    #[error("no successfully analyzed pages in the store")]
    EmptyCorpus,
}

impl From<ReachError> for ReportError {
    fn from(_: ReachError) -> Self {
        ReportError::EmptyCorpus
    }
}

fn pct(numerator: u64, denominator: u64) -> f64 {
    100.0 * numerator as f64 / denominator as f64
}

fn pct_or_zero(numerator: u64, denominator: u64) -> f64 {
    if denominator == 0 {
        0.0
    } else {
        pct(numerator, denominator)
    }
}

/// Corpus-level summary. Every percentage ships with its numerator; the
/// denominator is `n_pages_analyzed` throughout. The average-domains
/// figure is conditional on pages with at least one retained third-party
/// domain; the unconditional mean is also given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n_pages_analyzed: u64,
    pub n_pages_loaded_ok: u64,
    pub n_pages_timeout: u64,
    pub n_pages_failed: u64,
    pub n_pages_with_3pe: u64,
    pub pct_with_3pe: f64,
    pub sum_distinct_domains: u64,
    pub avg_domains_contacted: f64,
    pub avg_domains_all_pages: f64,
    /// True when no page had any retained third-party domain; the
    /// conditional average is then reported as 0.
    pub no_qualifying_3pe_pages: bool,
    pub n_pages_with_3p_cookie: u64,
    pub pct_with_3p_cookie: f64,
    pub n_pages_with_3p_js: u64,
    pub pct_with_3p_js: f64,
}

pub fn summary_stats(view: &FilteredView) -> Result<Summary, ReportError> {
    let n = view.pages.len() as u64;
    if n == 0 {
        return Err(ReportError::EmptyCorpus);
    }
    let n_with_3pe = view.pages.iter().filter(|p| p.has_3pe()).count() as u64;
    let sum_domains: u64 = view.pages.iter().map(|p| p.domains.len() as u64).sum();
    let n_with_cookie = view.pages.iter().filter(|p| p.has_cookie()).count() as u64;
    let n_with_js = view.pages.iter().filter(|p| p.has_js).count() as u64;
    let avg_conditional = if n_with_3pe == 0 {
        0.0
    } else {
        sum_domains as f64 / n_with_3pe as f64
    };
    Ok(Summary {
        n_pages_analyzed: n,
        n_pages_loaded_ok: view.n_loaded_ok,
        n_pages_timeout: n - view.n_loaded_ok,
        n_pages_failed: view.n_failed,
        n_pages_with_3pe: n_with_3pe,
        pct_with_3pe: pct(n_with_3pe, n),
        sum_distinct_domains: sum_domains,
        avg_domains_contacted: avg_conditional,
        avg_domains_all_pages: sum_domains as f64 / n as f64,
        no_qualifying_3pe_pages: n_with_3pe == 0,
        n_pages_with_3p_cookie: n_with_cookie,
        pct_with_3p_cookie: pct(n_with_cookie, n),
        n_pages_with_3p_js: n_with_js,
        pct_with_3p_js: pct(n_with_js, n),
    })
}

/// Per-TLD row, columns as in the summary but over the row's pages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TldRow {
    pub tld: String,
    pub n_pages: u64,
    pub n_with_3pe: u64,
    pub pct_with_3pe: f64,
    pub sum_distinct_domains: u64,
    pub avg_domains_contacted: f64,
    pub no_qualifying_3pe_pages: bool,
    pub n_with_cookie: u64,
    pub pct_with_cookie: f64,
    pub n_with_js: u64,
    pub pct_with_js: f64,
}

/// Group pages by the final label of their host. Rows sort by page count
/// descending, then name; every analyzed page lands in exactly one row.
pub fn tld_breakdown(view: &FilteredView) -> Vec<TldRow> {
    let mut groups: BTreeMap<&str, Vec<&PageView>> = BTreeMap::new();
    for page in &view.pages {
        groups.entry(page.tld.as_str()).or_default().push(page);
    }
    let mut rows: Vec<TldRow> = groups
        .into_iter()
        .map(|(tld, pages)| {
            let n = pages.len() as u64;
            let n_with_3pe = pages.iter().filter(|p| p.has_3pe()).count() as u64;
            let sum_domains: u64 = pages.iter().map(|p| p.domains.len() as u64).sum();
            let n_with_cookie = pages.iter().filter(|p| p.has_cookie()).count() as u64;
            let n_with_js = pages.iter().filter(|p| p.has_js).count() as u64;
            TldRow {
                tld: tld.to_string(),
                n_pages: n,
                n_with_3pe,
                pct_with_3pe: pct(n_with_3pe, n),
                sum_distinct_domains: sum_domains,
                avg_domains_contacted: if n_with_3pe == 0 {
                    0.0
                } else {
                    sum_domains as f64 / n_with_3pe as f64
                },
                no_qualifying_3pe_pages: n_with_3pe == 0,
                n_with_cookie,
                pct_with_cookie: pct(n_with_cookie, n),
                n_with_js,
                pct_with_js: pct(n_with_js, n),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.n_pages.cmp(&a.n_pages).then_with(|| a.tld.cmp(&b.tld)));
    rows
}

/// One ranked element (Table-2-style row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedElement {
    pub rank: u64,
    pub n_pages: u64,
    pub pct_pages: f64,
    pub filename: String,
    pub domain: RegisteredDomain,
    pub element_path: String,
    pub company: String,
    pub element_type: ElementType,
}

/// Elements ranked by the share of analyzed pages requesting them. Ties
/// break lexicographically by (domain, path); at most `k` rows.
pub fn top_elements(
    view: &FilteredView,
    registry: &OwnershipRegistry,
    k: usize,
) -> Vec<RankedElement> {
    let n_analyzed = view.pages.len() as u64;
    let mut page_counts: BTreeMap<&ElementIdentity, u64> = BTreeMap::new();
    for page in &view.pages {
        for identity in &page.elements {
            *page_counts.entry(identity).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&ElementIdentity, u64)> = page_counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (identity, n_pages))| {
            let info = &view.element_info[identity];
            RankedElement {
                rank: i as u64 + 1,
                n_pages,
                pct_pages: pct(n_pages, n_analyzed),
                filename: info.filename.clone(),
                domain: identity.0.clone(),
                element_path: identity.1.clone(),
                company: registry.company_display(&identity.0),
                element_type: info.element_type,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeShare {
    pub n: u64,
    pub pct: f64,
}

/// Share of each element type among the ranked list (not among all
/// requests). Percentages sum to 100 modulo float addition.
pub fn type_distribution(ranked: &[RankedElement]) -> BTreeMap<ElementType, TypeShare> {
    let total = ranked.len() as u64;
    let mut counts: BTreeMap<ElementType, u64> = BTreeMap::new();
    for element in ranked {
        *counts.entry(element.element_type).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|(t, n)| {
            (
                t,
                TypeShare {
                    n,
                    pct: pct_or_zero(n, total),
                },
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorStat {
    pub indicator: String,
    pub n_pages: u64,
    pub pct_pages_analyzed: f64,
    pub pct_pages_loaded_ok: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveillanceStats {
    pub indicators: Vec<IndicatorStat>,
}

/// Page-level indicator rates over retained third-party cookies. A page
/// counts once per indicator; both the analyzed-page and the loaded-ok
/// denominators are reported since full-scale studies differ on which
/// they use.
pub fn surveillance_stats(
    view: &FilteredView,
    registry: &OwnershipRegistry,
    indicators: &[SurveillanceIndicator],
) -> SurveillanceStats {
    let n_analyzed = view.pages.len() as u64;
    let stats = indicators
        .iter()
        .map(|indicator| {
            let n_pages = view
                .pages
                .iter()
                .filter(|page| {
                    page.cookies
                        .iter()
                        .any(|c| indicator.matches_cookie(&c.name, &c.domain, registry))
                })
                .count() as u64;
            IndicatorStat {
                indicator: indicator.id.clone(),
                n_pages,
                pct_pages_analyzed: pct_or_zero(n_pages, n_analyzed),
                pct_pages_loaded_ok: pct_or_zero(n_pages, view.n_loaded_ok),
            }
        })
        .collect();
    SurveillanceStats { indicators: stats }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub schema: u32,
    /// Rule snapshot the store was parsed under.
    pub psl_version: String,
    /// Registry applied at report time; attribution is not baked into the
    /// store, so this can differ from the version pinned there.
    pub registry_version: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub run_timestamp: Option<DateTime<Utc>>,
    pub top_k: u64,
    pub single_site_filter: bool,
    /// What counts as a domain occurrence for the filter.
    pub filter_occurrence_scope: String,
    pub n_excluded_single_site_domains: u64,
    /// Distinct element identities corpus-wide.
    pub n_unique_elements_global: u64,
    /// Sum of per-page distinct identities (the other uniqueness scope).
    pub n_unique_elements_per_page: u64,
    /// Distinct (registered domain, name, value) cookie triples.
    pub n_unique_cookies: u64,
    /// Registry coverage disclosure.
    pub n_registry_domains: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensusReport {
    pub metadata: ReportMeta,
    pub summary: Summary,
    pub tld_rows: Vec<TldRow>,
    pub top_elements: Vec<RankedElement>,
    pub type_distribution: BTreeMap<ElementType, TypeShare>,
    pub reach: Vec<CompanyReach>,
    pub surveillance: SurveillanceStats,
}

/// Run the whole aggregation: filter, summary, TLD table, element
/// ranking, type shares, corporate reach, surveillance rates.
pub fn build_report(
    store: &CrawlStore,
    registry: &OwnershipRegistry,
    indicators: &[SurveillanceIndicator],
    top_k: usize,
) -> Result<CensusReport, ReportError> {
    let view = filter_single_site_domains(store);
    let summary = summary_stats(&view)?;
    let tld_rows = tld_breakdown(&view);
    let top = top_elements(&view, registry, top_k);
    let types = type_distribution(&top);
    let reach = corporate_reach(view.pages.iter().map(|p| &p.domains), registry)?;
    let surveillance = surveillance_stats(&view, registry, indicators);
    Ok(CensusReport {
        metadata: ReportMeta {
            schema: REPORT_SCHEMA,
            psl_version: store.meta.psl_version.clone(),
            registry_version: registry.version().to_string(),
            run_timestamp: store.run_timestamp(),
            top_k: top_k as u64,
            single_site_filter: true,
            filter_occurrence_scope: "elements_and_cookies".to_string(),
            n_excluded_single_site_domains: view.excluded_domains.len() as u64,
            n_unique_elements_global: store.n_unique_elements_global(),
            n_unique_elements_per_page: store.n_unique_elements_per_page(),
            n_unique_cookies: store.n_unique_cookies(),
            n_registry_domains: registry.entries().len() as u64,
        },
        summary,
        tld_rows,
        top_elements: top,
        type_distribution: types,
        reach,
        surveillance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

pub fn render_report(report: &CensusReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => render_text(report),
    }
}

fn fmt2(v: f64) -> String {
    format!("{v:.2}")
}

fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let render_row = |out: &mut String, cells: &[String]| {
        let line = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
            .collect::<Vec<_>>()
            .join("  ");
        out.push_str(line.trim_end());
        out.push('\n');
    };
    render_row(
        &mut out,
        &headers.iter().map(|h| h.to_string()).collect::<Vec<_>>(),
    );
    for row in rows {
        render_row(&mut out, row);
    }
    out
}

fn render_text(report: &CensusReport) -> String {
    let mut out = String::new();
    let meta = &report.metadata;
    let s = &report.summary;

    out.push_str("web census report\n=================\n");
    let _ = writeln!(
        out,
        "pages: {} analyzed ({} ok, {} timeout), {} failed",
        s.n_pages_analyzed, s.n_pages_loaded_ok, s.n_pages_timeout, s.n_pages_failed
    );
    if let Some(ts) = meta.run_timestamp {
        let _ = writeln!(out, "run: {}", ts.to_rfc3339());
    }
    let _ = writeln!(out, "psl: {}  registry: {}", meta.psl_version, meta.registry_version);
    let _ = writeln!(
        out,
        "filter: single-site third-party domains excluded (n={}, scope: {})",
        meta.n_excluded_single_site_domains, meta.filter_occurrence_scope
    );

    out.push_str("\nsummary\n-------\n");
    let _ = writeln!(
        out,
        "% of pages with third-party elements: {} ({}/{})",
        fmt2(s.pct_with_3pe),
        s.n_pages_with_3pe,
        s.n_pages_analyzed
    );
    let avg = if s.no_qualifying_3pe_pages {
        "n/a (no qualifying pages)".to_string()
    } else {
        fmt2(s.avg_domains_contacted)
    };
    let _ = writeln!(out, "ave. domains contacted (pages with 3PE): {avg}");
    let _ = writeln!(
        out,
        "ave. domains contacted (all analyzed pages): {}",
        fmt2(s.avg_domains_all_pages)
    );
    let _ = writeln!(
        out,
        "% of pages with third-party cookie: {} ({}/{})",
        fmt2(s.pct_with_3p_cookie),
        s.n_pages_with_3p_cookie,
        s.n_pages_analyzed
    );
    let _ = writeln!(
        out,
        "% of pages with third-party javascript: {} ({}/{})",
        fmt2(s.pct_with_3p_js),
        s.n_pages_with_3p_js,
        s.n_pages_analyzed
    );

    out.push_str("\ntld breakdown\n-------------\n");
    let mut rows = vec![vec![
        "all".to_string(),
        s.n_pages_analyzed.to_string(),
        fmt2(s.pct_with_3pe),
        fmt2(s.avg_domains_contacted),
        fmt2(s.pct_with_3p_cookie),
        fmt2(s.pct_with_3p_js),
    ]];
    rows.extend(report.tld_rows.iter().map(|r| {
        vec![
            r.tld.clone(),
            r.n_pages.to_string(),
            fmt2(r.pct_with_3pe),
            fmt2(r.avg_domains_contacted),
            fmt2(r.pct_with_cookie),
            fmt2(r.pct_with_js),
        ]
    }));
    out.push_str(&table(
        &["tld", "pages", "% w/3pe", "ave. domains contacted", "% w/cookie", "% w/js"],
        &rows,
    ));

    let _ = write!(out, "\ntop elements (k={})\n-------------------\n", meta.top_k);
    let rows: Vec<Vec<String>> = report
        .top_elements
        .iter()
        .map(|e| {
            vec![
                e.rank.to_string(),
                fmt2(e.pct_pages),
                e.filename.clone(),
                e.domain.to_string(),
                e.company.clone(),
                e.element_type.to_string(),
            ]
        })
        .collect();
    out.push_str(&table(
        &["rank", "% pages", "file name", "domain", "company", "type"],
        &rows,
    ));

    out.push_str("\nelement types among top elements\n--------------------------------\n");
    let rows: Vec<Vec<String>> = report
        .type_distribution
        .iter()
        .map(|(t, share)| vec![t.to_string(), share.n.to_string(), fmt2(share.pct)])
        .collect();
    out.push_str(&table(&["type", "n", "% of top"], &rows));

    out.push_str("\ncorporate reach\n---------------\n");
    let rows: Vec<Vec<String>> = report
        .reach
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                r.company.clone(),
                r.n_pages.to_string(),
                fmt2(r.pct_pages),
            ]
        })
        .collect();
    out.push_str(&table(&["rank", "company", "pages", "% pages"], &rows));

    out.push_str("\nsurveillance indicators\n-----------------------\n");
    let rows: Vec<Vec<String>> = report
        .surveillance
        .indicators
        .iter()
        .map(|i| {
            vec![
                i.indicator.clone(),
                i.n_pages.to_string(),
                fmt2(i.pct_pages_analyzed),
                fmt2(i.pct_pages_loaded_ok),
            ]
        })
        .collect();
    out.push_str(&table(&["indicator", "pages", "% analyzed", "% loaded-ok"], &rows));

    out.push_str("\ncorpus totals\n-------------\n");
    let _ = writeln!(
        out,
        "unique third-party elements: {} corpus-wide, {} summed per page",
        meta.n_unique_elements_global, meta.n_unique_elements_per_page
    );
    let _ = writeln!(out, "unique third-party cookies: {}", meta.n_unique_cookies);
    let _ = writeln!(out, "ownership registry: {} domains", meta.n_registry_domains);
    out
}
