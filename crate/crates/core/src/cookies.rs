//! Third-party cookie identification and surveillance-indicator matching.
//!
//! A cookie is third-party on a page when its registered domain differs
//! from the page's. Indicators are data-driven (name, match kind, match
//! value) rules; the two defaults flag `PREF` cookies from Google-owned
//! domains and `id` cookies from doubleclick.net. Flags are only ever
//! raised from third-party cookies: the same cookie on its owner's own
//! page is first-party state, not cross-site tracking.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{CookieRecord, PageLoadResult};
use crate::ownership::OwnershipRegistry;
use crate::psl::{PublicSuffixRuleSet, RegisteredDomain};
use crate::request::{is_third_party, page_domain};

/// Third-party cookies of one page, with their resolved registered
/// domains. Cookies whose domain cannot be attributed (bare public suffix,
/// empty) are excluded and tallied.
pub struct ThirdPartyCookies<'a> {
    pub cookies: Vec<(RegisteredDomain, &'a CookieRecord)>,
    pub n_unattributable: u64,
}

pub fn third_party_cookies<'a>(
    page_domain: &RegisteredDomain,
    cookies: &'a [CookieRecord],
    rules: &PublicSuffixRuleSet,
) -> ThirdPartyCookies<'a> {
    let mut out = ThirdPartyCookies {
        cookies: Vec::new(),
        n_unattributable: 0,
    };
    for cookie in cookies {
        match rules.resolve_registered_domain(&cookie.domain) {
            Ok(rd) => {
                if is_third_party(page_domain, &rd) {
                    out.cookies.push((rd, cookie));
                }
            }
            Err(_) => out.n_unattributable += 1,
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    /// Cookie domain resolves (via the ownership registry) to this
    /// ultimate-parent company.
    Owner,
    /// Cookie registered domain equals this domain exactly.
    Domain,
}

/// One surveillance-indicator rule. Cookie names match exactly and
/// case-sensitively; owner names match case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveillanceIndicator {
    pub id: String,
    pub cookie_name: String,
    pub match_kind: MatchKind,
    pub match_value: String,
}

impl SurveillanceIndicator {
    pub fn new(cookie_name: &str, match_kind: MatchKind, match_value: &str) -> Self {
        SurveillanceIndicator {
            id: indicator_id(cookie_name, match_kind, match_value),
            cookie_name: cookie_name.to_string(),
            match_kind,
            match_value: match_value.to_string(),
        }
    }

    /// Whether a third-party cookie with this name and registered domain
    /// trips the indicator. Name comparison is exact; owner comparison is
    /// case-insensitive on the ultimate parent.
    pub fn matches_cookie(
        &self,
        cookie_name: &str,
        cookie_domain: &RegisteredDomain,
        registry: &OwnershipRegistry,
    ) -> bool {
        if cookie_name != self.cookie_name {
            return false;
        }
        match self.match_kind {
            MatchKind::Owner => registry
                .resolve_owner(cookie_domain)
                .map(|o| o.ultimate_parent.eq_ignore_ascii_case(&self.match_value))
                .unwrap_or(false),
            MatchKind::Domain => cookie_domain.as_str() == self.match_value.to_lowercase(),
        }
    }

    fn matches(
        &self,
        cookie: &CookieRecord,
        cookie_domain: &RegisteredDomain,
        registry: &OwnershipRegistry,
    ) -> bool {
        self.matches_cookie(&cookie.name, cookie_domain, registry)
    }
}

/// Stable indicator ids; the two canonical rules keep their published
/// names, anything else derives one from its value and cookie name.
fn indicator_id(name: &str, kind: MatchKind, value: &str) -> String {
    match (name, kind, value) {
        ("PREF", MatchKind::Owner, v) if v.eq_ignore_ascii_case("google") => {
            "google_pref".to_string()
        }
        ("id", MatchKind::Domain, "doubleclick.net") => "doubleclick_id".to_string(),
        _ => {
            let slug = |s: &str| -> String {
                s.to_lowercase()
                    .chars()
                    .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
                    .collect()
            };
            format!("{}_{}", slug(value), slug(name))
        }
    }
}

/// The two indicator rules the census ships with.
pub fn default_indicators() -> Vec<SurveillanceIndicator> {
    vec![
        SurveillanceIndicator::new("PREF", MatchKind::Owner, "Google"),
        SurveillanceIndicator::new("id", MatchKind::Domain, "doubleclick.net"),
    ]
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndicatorParseError {
    #[error("line {line}: expected `cookie_name, owner|domain, value`, got `{text}`")]
    BadShape { line: usize, text: String },
    #[error("line {line}: unknown match kind `{kind}` (expected owner or domain)")]
    BadKind { line: usize, kind: String },
}

/// Parse an indicator config file: one `name, kind, value` rule per line,
/// `#` comments and blanks skipped.
pub fn parse_indicators(text: &str) -> Result<Vec<SurveillanceIndicator>, IndicatorParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(IndicatorParseError::BadShape {
                line: line_no,
                text: line.to_string(),
            });
        }
        let kind = match fields[1].to_lowercase().as_str() {
            "owner" => MatchKind::Owner,
            "domain" => MatchKind::Domain,
            other => {
                return Err(IndicatorParseError::BadKind {
                    line: line_no,
                    kind: other.to_string(),
                })
            }
        };
        out.push(SurveillanceIndicator::new(fields[0], kind, fields[2]));
    }
    Ok(out)
}

/// One cookie matching one indicator on one page.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveillanceFlag {
    pub page_url: String,
    pub cookie_name: String,
    pub cookie_domain: String,
    pub indicator: String,
}

/// Scan captured results for indicator matches among third-party cookies.
/// Emits one flag per matching cookie (page-level counts dedup on
/// (page, indicator) downstream). Pages whose own domain cannot be
/// resolved are skipped: without it there is no third-party decision.
pub fn flag_surveillance_cookies(
    results: &[PageLoadResult],
    rules: &PublicSuffixRuleSet,
    registry: &OwnershipRegistry,
    indicators: &[SurveillanceIndicator],
) -> Vec<SurveillanceFlag> {
    let mut flags = Vec::new();
    for result in results {
        let Some(page_rd) = page_domain(result, rules) else {
            continue;
        };
        let page_url = if result.final_url.is_empty() {
            &result.seed.normalized
        } else {
            &result.final_url
        };
        let third_party = third_party_cookies(&page_rd, &result.cookies, rules);
        for (cookie_rd, cookie) in &third_party.cookies {
            debug_assert!(is_third_party(&page_rd, cookie_rd));
            for indicator in indicators {
                if indicator.matches(cookie, cookie_rd, registry) {
                    flags.push(SurveillanceFlag {
                        page_url: page_url.clone(),
                        cookie_name: cookie.name.clone(),
                        cookie_domain: cookie.domain.clone(),
                        indicator: indicator.id.clone(),
                    });
                }
            }
        }
    }
    flags
}
