//! Independent reference implementations used to cross-check pipeline
//! output. Everything here favors the dumbest correct construction:
//! linear scans over all suffix rules, direct string chopping instead of
//! a URL parser, and stats recomputed straight from HAR JSON with plain
//! maps. Agreement with the fast implementations is the point.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde_json::Value;

use webcensus_core::report::CensusReport;

// ---------------------------------------------------------------- psl

struct NaiveRule {
    labels: Vec<String>,
    exception: bool,
}

/// Per-rule linear matcher for the public suffix algorithm.
pub struct NaivePsl {
    rules: Vec<NaiveRule>,
}

impl NaivePsl {
    pub fn parse(text: &str) -> NaivePsl {
        let mut rules = Vec::new();
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with("//") {
                continue;
            }
            let (body, exception) = match line.strip_prefix('!') {
                Some(rest) => (rest, true),
                None => (line, false),
            };
            rules.push(NaiveRule {
                labels: body.split('.').map(|l| l.to_lowercase()).collect(),
                exception,
            });
        }
        NaivePsl { rules }
    }

    fn rule_matches(rule: &[String], host: &[&str]) -> bool {
        rule.len() <= host.len()
            && rule
                .iter()
                .rev()
                .zip(host.iter().rev())
                .all(|(r, h)| r == "*" || r == h)
    }

    /// Registered domain of an arbitrary captured host, or None when the
    /// host is empty, has empty labels, or is itself a public suffix.
    pub fn registered_domain(&self, host: &str) -> Option<String> {
        let trimmed = host.strip_suffix('.').unwrap_or(host);
        if trimmed.is_empty() {
            return None;
        }
        let lowered = trimmed.to_lowercase();
        let unbracketed = lowered
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .unwrap_or(&lowered);
        if unbracketed.parse::<std::net::Ipv4Addr>().is_ok()
            || unbracketed.parse::<std::net::Ipv6Addr>().is_ok()
        {
            return Some(unbracketed.to_string());
        }

        let labels: Vec<&str> = lowered.split('.').collect();
        if labels.iter().any(|l| l.is_empty()) {
            return None;
        }
        // Exception rules prevail over everything; otherwise the longest
        // matching rule; otherwise the implicit "*" (one label).
        let mut exception_len: Option<usize> = None;
        let mut match_len: usize = 1;
        for rule in &self.rules {
            if !Self::rule_matches(&rule.labels, &labels) {
                continue;
            }
            if rule.exception {
                let len = rule.labels.len() - 1;
                exception_len = Some(exception_len.map_or(len, |e: usize| e.max(len)));
            } else {
                match_len = match_len.max(rule.labels.len());
            }
        }
        let suffix_len = exception_len.unwrap_or(match_len);
        if labels.len() <= suffix_len {
            return None;
        }
        Some(labels[labels.len() - suffix_len - 1..].join("."))
    }
}

// ---------------------------------------------------------- ownership

/// Line-by-line registry reader; no CSV library.
pub struct NaiveOwnership {
    rows: BTreeMap<String, (String, Option<String>)>, // domain -> (company, notes)
    parent_of: BTreeMap<String, String>,
    n_rows: u64,
}

impl NaiveOwnership {
    pub fn parse(text: &str) -> NaiveOwnership {
        let mut rows = BTreeMap::new();
        let mut parent_of = BTreeMap::new();
        let mut n_rows = 0;
        for raw in text.lines() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with("domain,") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let domain = fields.first().unwrap_or(&"").to_lowercase();
            let company = fields.get(1).copied().unwrap_or("").to_string();
            let parent = fields.get(2).copied().unwrap_or("");
            let notes = fields.get(3).copied().unwrap_or("");
            assert!(!domain.is_empty() && !company.is_empty(), "bad registry row: {line}");
            if !parent.is_empty() {
                parent_of.insert(company.clone(), parent.to_string());
            }
            rows.insert(
                domain,
                (company, (!notes.is_empty()).then(|| notes.to_string())),
            );
            n_rows += 1;
        }
        NaiveOwnership {
            rows,
            parent_of,
            n_rows,
        }
    }

    pub fn n_rows(&self) -> u64 {
        self.n_rows
    }

    fn ultimate(&self, company: &str) -> String {
        let mut current = company.to_string();
        for _ in 0..3 {
            match self.parent_of.get(&current) {
                Some(parent) => current = parent.clone(),
                None => break,
            }
        }
        current
    }

    /// Ultimate-parent company of a domain, None when unattributed.
    pub fn owner(&self, domain: &str) -> Option<String> {
        self.rows.get(domain).map(|(company, _)| self.ultimate(company))
    }

    /// Company column text: ultimate parent with hosted-for annotation, or
    /// "unattributed".
    pub fn display(&self, domain: &str) -> String {
        match self.rows.get(domain) {
            None => "unattributed".to_string(),
            Some((company, notes)) => {
                let ultimate = self.ultimate(company);
                let hosted = notes
                    .as_deref()
                    .and_then(|n| n.split("hosted-for:").nth(1))
                    .map(|rest| rest.split(';').next().unwrap_or("").trim().to_string())
                    .filter(|s| !s.is_empty());
                match hosted {
                    Some(party) => format!("{ultimate}/{party}"),
                    None => ultimate,
                }
            }
        }
    }
}

// ------------------------------------------------------------ recount

fn split_url(url: &str) -> Option<(String, String, String)> {
    let rest = url.split_once("://")?.1;
    let cut = rest
        .find(|c| c == '/' || c == '?' || c == '#')
        .unwrap_or(rest.len());
    let authority = &rest[..cut];
    let remainder = &rest[cut..];
    let host_port = authority.rsplit_once('@').map_or(authority, |(_, h)| h);
    let host = if host_port.starts_with('[') {
        match host_port.find(']') {
            Some(i) => &host_port[..=i],
            None => host_port,
        }
    } else {
        match host_port.rsplit_once(':') {
            Some((h, port)) if port.chars().all(|c| c.is_ascii_digit()) => h,
            _ => host_port,
        }
    };
    if host.is_empty() {
        return None;
    }
    let no_fragment = remainder.split('#').next().unwrap_or("");
    let (path, args) = match no_fragment.split_once('?') {
        Some((p, q)) => (p, format!("?{q}")),
        None => (no_fragment, String::new()),
    };
    let path = if path.is_empty() { "/" } else { path };
    Some((host.to_string(), path.to_string(), args))
}

fn element_type_of(filename: &str) -> &'static str {
    let extension = match filename.rfind('.') {
        Some(dot) if dot > 0 && dot + 1 < filename.len() => filename[dot + 1..].to_lowercase(),
        _ => String::new(),
    };
    match extension.as_str() {
        "png" | "gif" | "jpg" | "jpeg" | "webp" | "svg" | "ico" => "image",
        "js" => "javascript",
        "css" => "css",
        "woff" | "woff2" | "ttf" | "otf" | "eot" => "font",
        "json" => "json",
        "php" | "cgi" | "pl" | "asp" | "aspx" | "jsp" => "dynamic",
        _ => "unknown",
    }
}

struct NEntry {
    url: String,
    status: i64,
    location: Option<String>,
    set_cookie: Vec<String>,
}

struct NPage {
    failed: bool,
    loaded_ok: bool,
    analyzed: bool,
    captured_at: Option<DateTime<Utc>>,
    tld: Option<String>,
    /// identity -> (filename, type)
    elements: BTreeMap<(String, String), (String, &'static str)>,
    /// (registered_domain, name, value)
    cookie_triples: BTreeSet<(String, String, String)>,
}

fn read_page(har_text: &str, psl: &NaivePsl) -> NPage {
    let doc: Value = serde_json::from_str(har_text).expect("oracle: har parses");
    let log = &doc["log"];
    let pages = log["pages"].as_array().expect("oracle: pages array");
    assert_eq!(pages.len(), 1, "oracle expects single-page archives");
    let page = &pages[0];
    let status = page["_load_status"].as_str().unwrap_or("ok");
    let captured_at = page["startedDateTime"]
        .as_str()
        .and_then(|s| DateTime::parse_from_rfc3339(s).ok())
        .map(|dt| dt.with_timezone(&Utc));

    let entries: Vec<NEntry> = log["entries"]
        .as_array()
        .expect("oracle: entries array")
        .iter()
        .map(|e| {
            let headers = e["response"]["headers"].as_array().cloned().unwrap_or_default();
            let header = |name: &str| -> Vec<String> {
                headers
                    .iter()
                    .filter(|h| {
                        h["name"].as_str().unwrap_or("").eq_ignore_ascii_case(name)
                    })
                    .filter_map(|h| h["value"].as_str().map(str::to_string))
                    .collect()
            };
            NEntry {
                url: e["request"]["url"].as_str().expect("oracle: entry url").to_string(),
                status: e["response"]["status"].as_i64().unwrap_or(0),
                location: header("location").into_iter().next(),
                set_cookie: header("set-cookie"),
            }
        })
        .collect();
    assert!(!entries.is_empty(), "oracle: entries present");

    // Redirect walk from the document request.
    let mut final_url = entries[0].url.clone();
    let mut hops = 0;
    loop {
        let Some(current) = entries.iter().find(|e| e.url == final_url) else {
            break;
        };
        if !(300..400).contains(&current.status) {
            break;
        }
        let Some(target) = current.location.clone() else {
            break;
        };
        assert!(target.contains("://"), "oracle handles absolute redirects only");
        final_url = target;
        hops += 1;
        assert!(hops < 20, "oracle: redirect loop");
    }

    let page_rd = split_url(&final_url)
        .and_then(|(host, _, _)| psl.registered_domain(&host))
        .or_else(|| {
            split_url(&entries[0].url).and_then(|(host, _, _)| psl.registered_domain(&host))
        });
    let failed = status == "failed";
    let analyzed = !failed && page_rd.is_some();
    let tld = page_rd.as_ref().map(|rd| {
        if rd.parse::<std::net::Ipv4Addr>().is_ok() || rd.parse::<std::net::Ipv6Addr>().is_ok() {
            "ip".to_string()
        } else {
            rd.rsplit('.').next().unwrap_or(rd).to_string()
        }
    });

    let mut elements = BTreeMap::new();
    let mut jar: BTreeMap<(String, String, String), (String, String, String)> = BTreeMap::new();
    if let Some(page_rd) = &page_rd {
        for entry in &entries {
            if let Some((host, path, _)) = split_url(&entry.url) {
                if let Some(rd) = psl.registered_domain(&host) {
                    if &rd != page_rd {
                        let filename = path.rsplit('/').next().unwrap_or("").to_string();
                        let element_type = element_type_of(&filename);
                        elements
                            .entry((rd, path))
                            .or_insert((filename, element_type));
                    }
                }
                for header in &entry.set_cookie {
                    if let Some((domain, name, value, cookie_path)) =
                        naive_set_cookie(header, &host)
                    {
                        jar.insert((domain.clone(), name.clone(), cookie_path), (domain, name, value));
                    }
                }
            }
        }
    }
    let mut cookie_triples = BTreeSet::new();
    if let Some(page_rd) = &page_rd {
        for (domain, name, value) in jar.into_values() {
            if let Some(rd) = psl.registered_domain(&domain) {
                if &rd != page_rd {
                    cookie_triples.insert((rd, name, value));
                }
            }
        }
    }

    NPage {
        failed,
        loaded_ok: analyzed && status == "ok",
        analyzed,
        captured_at,
        tld,
        elements,
        cookie_triples,
    }
}

fn naive_set_cookie(header: &str, request_host: &str) -> Option<(String, String, String, String)> {
    let mut parts = header.split(';');
    let (name, value) = parts.next()?.split_once('=')?;
    let name = name.trim().to_string();
    if name.is_empty() {
        return None;
    }
    let value = value.trim().trim_matches('"').to_string();
    let mut domain = request_host.to_lowercase();
    let mut path = "/".to_string();
    for attr in parts {
        let (key, val) = match attr.split_once('=') {
            Some((k, v)) => (k.trim().to_ascii_lowercase(), v.trim()),
            None => (attr.trim().to_ascii_lowercase(), ""),
        };
        match key.as_str() {
            "domain" => {
                let d = val.trim_start_matches('.').to_lowercase();
                if !d.is_empty() {
                    domain = d;
                }
            }
            "path" => {
                if val.starts_with('/') {
                    path = val.to_string();
                }
            }
            _ => {}
        }
    }
    Some((domain, name, value, path))
}

fn pct(n: u64, d: u64) -> f64 {
    100.0 * n as f64 / d as f64
}

fn pct_or_zero(n: u64, d: u64) -> f64 {
    if d == 0 {
        0.0
    } else {
        pct(n, d)
    }
}

/// Recount every number in `report` directly from HAR text and assert
/// exact equality, floats included: both sides derive each percentage
/// from equal integers with the same one-division arithmetic, so even
/// float comparisons are exact.
pub fn assert_matches_recount(
    report: &CensusReport,
    har_texts: &[String],
    psl_text: &str,
    registry_text: &str,
    top_k: usize,
) {
    let psl = NaivePsl::parse(psl_text);
    let ownership = NaiveOwnership::parse(registry_text);
    let pages: Vec<NPage> = har_texts.iter().map(|t| read_page(t, &psl)).collect();

    let n_failed = pages.iter().filter(|p| p.failed).count() as u64;
    let analyzed: Vec<&NPage> = pages.iter().filter(|p| p.analyzed).collect();
    let n_analyzed = analyzed.len() as u64;
    let n_loaded_ok = analyzed.iter().filter(|p| p.loaded_ok).count() as u64;

    // Single-site filter: occurrence = pages where the domain appears as
    // element or cookie domain.
    let mut occurrence: BTreeMap<&String, u64> = BTreeMap::new();
    for page in &analyzed {
        let mut seen: BTreeSet<&String> = BTreeSet::new();
        seen.extend(page.elements.keys().map(|(d, _)| d));
        seen.extend(page.cookie_triples.iter().map(|(d, _, _)| d));
        for d in seen {
            *occurrence.entry(d).or_insert(0) += 1;
        }
    }
    let excluded: BTreeSet<&String> = occurrence
        .iter()
        .filter(|(_, n)| **n == 1)
        .map(|(d, _)| *d)
        .collect();

    struct View<'a> {
        tld: &'a str,
        domains: BTreeSet<&'a String>,
        elements: Vec<&'a (String, String)>,
        cookies: Vec<&'a (String, String, String)>,
        has_js: bool,
        loaded_ok: bool,
    }
    let views: Vec<View> = analyzed
        .iter()
        .map(|p| {
            let elements: Vec<_> = p
                .elements
                .keys()
                .filter(|(d, _)| !excluded.contains(d))
                .collect();
            let domains: BTreeSet<_> = elements.iter().map(|(d, _)| d).collect();
            let has_js = elements
                .iter()
                .any(|identity| p.elements[*identity].1 == "javascript");
            let cookies: Vec<_> = p
                .cookie_triples
                .iter()
                .filter(|(d, _, _)| !excluded.contains(d))
                .collect();
            View {
                tld: p.tld.as_deref().expect("analyzed pages have a tld"),
                domains,
                elements,
                cookies,
                has_js,
                loaded_ok: p.loaded_ok,
            }
        })
        .collect();

    // --- summary
    let s = &report.summary;
    let n_with_3pe = views.iter().filter(|v| !v.domains.is_empty()).count() as u64;
    let sum_domains: u64 = views.iter().map(|v| v.domains.len() as u64).sum();
    let n_with_cookie = views.iter().filter(|v| !v.cookies.is_empty()).count() as u64;
    let n_with_js = views.iter().filter(|v| v.has_js).count() as u64;
    assert_eq!(s.n_pages_analyzed, n_analyzed, "n_pages_analyzed");
    assert_eq!(s.n_pages_loaded_ok, n_loaded_ok, "n_pages_loaded_ok");
    assert_eq!(s.n_pages_timeout, n_analyzed - n_loaded_ok, "n_pages_timeout");
    assert_eq!(s.n_pages_failed, n_failed, "n_pages_failed");
    assert_eq!(s.n_pages_with_3pe, n_with_3pe, "n_pages_with_3pe");
    assert_eq!(s.pct_with_3pe, pct(n_with_3pe, n_analyzed), "pct_with_3pe");
    assert_eq!(s.sum_distinct_domains, sum_domains, "sum_distinct_domains");
    assert_eq!(s.no_qualifying_3pe_pages, n_with_3pe == 0, "no_qualifying_3pe_pages");
    let avg = if n_with_3pe == 0 {
        0.0
    } else {
        sum_domains as f64 / n_with_3pe as f64
    };
    assert_eq!(s.avg_domains_contacted, avg, "avg_domains_contacted");
    assert_eq!(
        s.avg_domains_all_pages,
        sum_domains as f64 / n_analyzed as f64,
        "avg_domains_all_pages"
    );
    assert_eq!(s.n_pages_with_3p_cookie, n_with_cookie, "n_pages_with_3p_cookie");
    assert_eq!(s.pct_with_3p_cookie, pct(n_with_cookie, n_analyzed), "pct_with_3p_cookie");
    assert_eq!(s.n_pages_with_3p_js, n_with_js, "n_pages_with_3p_js");
    assert_eq!(s.pct_with_3p_js, pct(n_with_js, n_analyzed), "pct_with_3p_js");

    // --- tld rows
    let mut groups: BTreeMap<&str, Vec<&View>> = BTreeMap::new();
    for v in &views {
        groups.entry(v.tld).or_default().push(v);
    }
    let mut expected_rows: Vec<(String, u64, u64, u64, u64, u64)> = groups
        .into_iter()
        .map(|(tld, vs)| {
            (
                tld.to_string(),
                vs.len() as u64,
                vs.iter().filter(|v| !v.domains.is_empty()).count() as u64,
                vs.iter().map(|v| v.domains.len() as u64).sum(),
                vs.iter().filter(|v| !v.cookies.is_empty()).count() as u64,
                vs.iter().filter(|v| v.has_js).count() as u64,
            )
        })
        .collect();
    expected_rows.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    assert_eq!(report.tld_rows.len(), expected_rows.len(), "tld row count");
    for (row, (tld, n, with_3pe, sum, with_cookie, with_js)) in
        report.tld_rows.iter().zip(&expected_rows)
    {
        assert_eq!(&row.tld, tld, "tld name");
        assert_eq!(row.n_pages, *n, "tld {tld} n_pages");
        assert_eq!(row.n_with_3pe, *with_3pe, "tld {tld} n_with_3pe");
        assert_eq!(row.pct_with_3pe, pct(*with_3pe, *n), "tld {tld} pct_with_3pe");
        assert_eq!(row.sum_distinct_domains, *sum, "tld {tld} sum");
        let avg = if *with_3pe == 0 {
            0.0
        } else {
            *sum as f64 / *with_3pe as f64
        };
        assert_eq!(row.avg_domains_contacted, avg, "tld {tld} avg");
        assert_eq!(row.n_with_cookie, *with_cookie, "tld {tld} n_with_cookie");
        assert_eq!(row.pct_with_cookie, pct(*with_cookie, *n), "tld {tld} pct_with_cookie");
        assert_eq!(row.n_with_js, *with_js, "tld {tld} n_with_js");
        assert_eq!(row.pct_with_js, pct(*with_js, *n), "tld {tld} pct_with_js");
    }

    // --- top elements
    let mut page_counts: BTreeMap<&(String, String), u64> = BTreeMap::new();
    let mut info: BTreeMap<&(String, String), (String, &'static str)> = BTreeMap::new();
    for (page, view) in analyzed.iter().zip(&views) {
        for identity in &view.elements {
            *page_counts.entry(identity).or_insert(0) += 1;
            info.entry(identity)
                .or_insert_with(|| page.elements[*identity].clone());
        }
    }
    let mut ranked: Vec<(&(String, String), u64)> = page_counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(top_k);
    assert_eq!(report.top_elements.len(), ranked.len(), "top element count");
    for (i, (got, (identity, n))) in report.top_elements.iter().zip(&ranked).enumerate() {
        let (domain, path) = identity;
        let (filename, element_type) = &info[identity];
        assert_eq!(got.rank, i as u64 + 1, "element {i} rank");
        assert_eq!(got.n_pages, *n, "element {domain}{path} n_pages");
        assert_eq!(got.pct_pages, pct(*n, n_analyzed), "element {domain}{path} pct");
        assert_eq!(&got.filename, filename, "element {domain}{path} filename");
        assert_eq!(got.domain.as_str(), domain, "element rank {i} domain");
        assert_eq!(&got.element_path, path, "element {domain} path");
        assert_eq!(got.company, ownership.display(domain), "element {domain} company");
        assert_eq!(
            got.element_type.to_string(),
            *element_type,
            "element {domain}{path} type"
        );
    }

    // --- type distribution over the ranked list
    let mut type_counts: BTreeMap<&'static str, u64> = BTreeMap::new();
    for (identity, _) in &ranked {
        *type_counts.entry(info[identity].1).or_insert(0) += 1;
    }
    assert_eq!(
        report.type_distribution.len(),
        type_counts.len(),
        "type distribution size"
    );
    for (element_type, share) in &report.type_distribution {
        let n = type_counts[element_type.to_string().as_str()];
        assert_eq!(share.n, n, "type {element_type} n");
        assert_eq!(share.pct, pct_or_zero(n, ranked.len() as u64), "type {element_type} pct");
    }

    // --- corporate reach
    let mut company_pages: BTreeMap<String, u64> = BTreeMap::new();
    for view in &views {
        let companies: BTreeSet<String> = view
            .domains
            .iter()
            .filter_map(|d| ownership.owner(d))
            .collect();
        for company in companies {
            *company_pages.entry(company).or_insert(0) += 1;
        }
    }
    let mut expected_reach: Vec<(String, u64)> = company_pages.into_iter().collect();
    expected_reach.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    assert_eq!(report.reach.len(), expected_reach.len(), "reach row count");
    for (got, (company, n)) in report.reach.iter().zip(&expected_reach) {
        assert_eq!(&got.company, company, "reach company");
        assert_eq!(got.n_pages, *n, "reach {company} n_pages");
        assert_eq!(got.pct_pages, pct(*n, n_analyzed), "reach {company} pct");
    }

    // --- surveillance indicators (the two shipped rules)
    let matches_google_pref = |(domain, name, _value): &&(String, String, String)| {
        name == "PREF"
            && ownership
                .owner(domain)
                .map(|o| o.eq_ignore_ascii_case("google"))
                .unwrap_or(false)
    };
    let matches_doubleclick_id = |(domain, name, _value): &&(String, String, String)| {
        name == "id" && domain == "doubleclick.net"
    };
    let count_pages = |pred: &dyn Fn(&&(String, String, String)) -> bool| -> u64 {
        views.iter().filter(|v| v.cookies.iter().any(pred)).count() as u64
    };
    let expected_indicators: Vec<(&str, u64)> = vec![
        ("google_pref", count_pages(&matches_google_pref)),
        ("doubleclick_id", count_pages(&matches_doubleclick_id)),
    ];
    assert_eq!(
        report.surveillance.indicators.len(),
        expected_indicators.len(),
        "indicator count"
    );
    for (got, (id, n)) in report.surveillance.indicators.iter().zip(&expected_indicators) {
        assert_eq!(&got.indicator, id, "indicator id");
        assert_eq!(got.n_pages, *n, "indicator {id} n_pages");
        assert_eq!(got.pct_pages_analyzed, pct_or_zero(*n, n_analyzed), "indicator {id} pct");
        assert_eq!(
            got.pct_pages_loaded_ok,
            pct_or_zero(*n, n_loaded_ok),
            "indicator {id} pct loaded-ok"
        );
    }

    // --- metadata counts
    let meta = &report.metadata;
    assert_eq!(
        meta.n_excluded_single_site_domains,
        excluded.len() as u64,
        "n_excluded_single_site_domains"
    );
    let global_elements: BTreeSet<&(String, String)> =
        pages.iter().flat_map(|p| p.elements.keys()).collect();
    assert_eq!(
        meta.n_unique_elements_global,
        global_elements.len() as u64,
        "n_unique_elements_global"
    );
    assert_eq!(
        meta.n_unique_elements_per_page,
        pages.iter().map(|p| p.elements.len() as u64).sum::<u64>(),
        "n_unique_elements_per_page"
    );
    let global_cookies: BTreeSet<&(String, String, String)> =
        pages.iter().flat_map(|p| p.cookie_triples.iter()).collect();
    assert_eq!(
        meta.n_unique_cookies,
        global_cookies.len() as u64,
        "n_unique_cookies"
    );
    assert_eq!(meta.top_k, top_k as u64, "top_k");
    assert_eq!(meta.n_registry_domains, ownership.n_rows(), "n_registry_domains");
    assert_eq!(
        meta.run_timestamp,
        pages.iter().filter_map(|p| p.captured_at).max(),
        "run_timestamp"
    );
    assert!(meta.single_site_filter, "single_site_filter");
}
