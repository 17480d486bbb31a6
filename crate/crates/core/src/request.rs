//! Request decomposition and first/third-party classification.
//!
//! Every captured request URL is broken into registered domain, element
//! path, arguments, and extension. The extension drives type
//! classification; the registered domain drives the party decision. Element
//! identity for ranking is (registered_domain, element_path) with arguments
//! stripped, so repeated fetches of the same beacon with varying query
//! strings collapse to one element.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use url::Url;

use crate::psl::{DomainError, PublicSuffixRuleSet, RegisteredDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementType {
    Image,
    Javascript,
    Css,
    Font,
    Json,
    Dynamic,
    Unknown,
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ElementType::Image => "image",
            ElementType::Javascript => "javascript",
            ElementType::Css => "css",
            ElementType::Font => "font",
            ElementType::Json => "json",
            ElementType::Dynamic => "dynamic",
            ElementType::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// Extension-to-type table. Lookup keys are lowercase extensions without the
/// dot; anything absent maps to `Unknown`.
#[derive(Debug, Clone)]
pub struct ExtensionMap {
    map: HashMap<String, ElementType>,
}

impl Default for ExtensionMap {
    fn default() -> Self {
        let entries: &[(&str, ElementType)] = &[
            ("png", ElementType::Image),
            ("gif", ElementType::Image),
            ("jpg", ElementType::Image),
            ("jpeg", ElementType::Image),
            ("webp", ElementType::Image),
            ("svg", ElementType::Image),
            ("ico", ElementType::Image),
            ("js", ElementType::Javascript),
            ("css", ElementType::Css),
            ("woff", ElementType::Font),
            ("woff2", ElementType::Font),
            ("ttf", ElementType::Font),
            ("otf", ElementType::Font),
            ("eot", ElementType::Font),
            ("json", ElementType::Json),
            ("php", ElementType::Dynamic),
            ("cgi", ElementType::Dynamic),
            ("pl", ElementType::Dynamic),
            ("asp", ElementType::Dynamic),
            ("aspx", ElementType::Dynamic),
            ("jsp", ElementType::Dynamic),
        ];
        ExtensionMap {
            map: entries
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect(),
        }
    }
}

impl ExtensionMap {
    pub fn classify(&self, extension: &str) -> ElementType {
        self.map
            .get(extension)
            .copied()
            .unwrap_or(ElementType::Unknown)
    }

    /// Override or extend the table; later inserts win.
    pub fn insert(&mut self, extension: &str, element_type: ElementType) {
        self.map.insert(extension.to_lowercase(), element_type);
    }
}

/// Classify with the default table. Total: every string maps to exactly one
/// type, unmapped and empty extensions to `Unknown`.
pub fn classify_extension(extension: &str) -> ElementType {
    static DEFAULT: OnceLock<ExtensionMap> = OnceLock::new();
    DEFAULT.get_or_init(ExtensionMap::default).classify(extension)
}

/// A request URL decomposed for cataloging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedElement {
    pub full_url: String,
    pub registered_domain: RegisteredDomain,
    /// Path portion, always starting with "/".
    pub element_path: String,
    /// Final path segment; empty for directory-style URLs.
    pub filename: String,
    /// Query portion including the leading "?"; empty when absent.
    pub args: String,
    /// Lowercased substring after the last "." of the filename; empty when
    /// the filename has no dot past its first character.
    pub extension: String,
    pub element_type: ElementType,
}

/// Identity under which elements are counted and ranked.
pub type ElementIdentity = (RegisteredDomain, String);

impl ParsedElement {
    pub fn identity(&self) -> ElementIdentity {
        (self.registered_domain.clone(), self.element_path.clone())
    }
}

#[derive(Debug, Error)]
pub enum RequestParseError {
    #[error("malformed request URL `{url}`: {source}")]
    Malformed {
        url: String,
        #[source]
        source: url::ParseError,
    },
    #[error("request URL `{url}` has no host")]
    NoHost { url: String },
    #[error("request URL `{url}`: {source}")]
    Domain {
        url: String,
        #[source]
        source: DomainError,
    },
}

/// Decompose an absolute request URL with the default extension table.
pub fn parse_request_url(
    url: &str,
    rules: &PublicSuffixRuleSet,
) -> Result<ParsedElement, RequestParseError> {
    parse_request_url_with(url, rules, None)
}

pub fn parse_request_url_with(
    url: &str,
    rules: &PublicSuffixRuleSet,
    extensions: Option<&ExtensionMap>,
) -> Result<ParsedElement, RequestParseError> {
    let parsed = Url::parse(url).map_err(|source| RequestParseError::Malformed {
        url: url.to_string(),
        source,
    })?;
    let host = parsed
        .host_str()
        .filter(|h| !h.is_empty())
        .ok_or_else(|| RequestParseError::NoHost {
            url: url.to_string(),
        })?;
    let registered_domain =
        rules
            .resolve_registered_domain(host)
            .map_err(|source| RequestParseError::Domain {
                url: url.to_string(),
                source,
            })?;

    let element_path = parsed.path().to_string();
    let filename = element_path
        .rsplit('/')
        .next()
        .unwrap_or("")
        .to_string();
    let args = match parsed.query() {
        Some(q) => format!("?{q}"),
        None => String::new(),
    };
    let extension = filename_extension(&filename);
    let element_type = match extensions {
        Some(map) => map.classify(&extension),
        None => classify_extension(&extension),
    };
    Ok(ParsedElement {
        full_url: url.to_string(),
        registered_domain,
        element_path,
        filename,
        args,
        extension,
        element_type,
    })
}

/// Extension after the last "." of the filename, lowercased. A dot in first
/// position (dotfiles) or last position yields no extension.
fn filename_extension(filename: &str) -> String {
    match filename.rfind('.') {
        Some(dot) if dot > 0 && dot + 1 < filename.len() => {
            filename[dot + 1..].to_lowercase()
        }
        _ => String::new(),
    }
}

/// Third-party test at registered-domain granularity: true iff the two
/// registered domains differ by exact string comparison.
pub fn is_third_party(page_domain: &RegisteredDomain, request_domain: &RegisteredDomain) -> bool {
    page_domain != request_domain
}

/// The registered domain a page's own requests are judged against: the
/// final address host when resolvable, else the seed host. None when
/// neither yields a registered domain; such pages cannot be analyzed.
pub fn page_domain(
    result: &crate::capture::PageLoadResult,
    rules: &PublicSuffixRuleSet,
) -> Option<RegisteredDomain> {
    for candidate in [&result.final_url, &result.seed.normalized] {
        if candidate.is_empty() {
            continue;
        }
        let Ok(parsed) = Url::parse(candidate) else {
            continue;
        };
        let Some(host) = parsed.host_str() else {
            continue;
        };
        if let Ok(rd) = rules.resolve_registered_domain(host) {
            return Some(rd);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules() -> PublicSuffixRuleSet {
        PublicSuffixRuleSet::parse("com\nnet\norg\n").unwrap()
    }

    #[test]
    fn decomposes_tracking_pixel_url() {
        let e = parse_request_url("http://sub.example.com/tracking_pixel.png?id=8675309", &rules())
            .unwrap();
        assert_eq!(e.registered_domain.as_str(), "example.com");
        assert_eq!(e.filename, "tracking_pixel.png");
        assert_eq!(e.args, "?id=8675309");
        assert_eq!(e.extension, "png");
        assert_eq!(e.element_type, ElementType::Image);
        assert_eq!(e.element_path, "/tracking_pixel.png");
    }

    #[test]
    fn multi_dot_filename_takes_last_extension() {
        let e = parse_request_url("http://cdn.example.net/lib/app.min.js", &rules()).unwrap();
        assert_eq!(e.extension, "js");
        assert_eq!(e.element_type, ElementType::Javascript);
        assert_eq!(e.element_path, "/lib/app.min.js");
        assert_eq!(e.filename, "app.min.js");
    }

    #[test]
    fn extensionless_filename_is_unknown() {
        let e = parse_request_url("http://t.example.org/beacon", &rules()).unwrap();
        assert_eq!(e.filename, "beacon");
        assert_eq!(e.extension, "");
        assert_eq!(e.element_type, ElementType::Unknown);
    }

    #[test]
    fn dotfile_and_trailing_dot_have_no_extension() {
        assert_eq!(filename_extension(".htaccess"), "");
        assert_eq!(filename_extension("name."), "");
        assert_eq!(filename_extension(""), "");
        assert_eq!(filename_extension("a.PNG"), "png");
    }

    #[test]
    fn classification_covers_the_named_types() {
        assert_eq!(classify_extension("png"), ElementType::Image);
        assert_eq!(classify_extension("js"), ElementType::Javascript);
        assert_eq!(classify_extension("css"), ElementType::Css);
        assert_eq!(classify_extension("woff2"), ElementType::Font);
        assert_eq!(classify_extension("json"), ElementType::Json);
        assert_eq!(classify_extension("php"), ElementType::Dynamic);
        assert_eq!(classify_extension("cgi"), ElementType::Dynamic);
        assert_eq!(classify_extension("xyz"), ElementType::Unknown);
        assert_eq!(classify_extension(""), ElementType::Unknown);
    }

    #[test]
    fn no_percent_decoding_before_classification() {
        let e = parse_request_url("http://x.example.com/a%2Ejs", &rules()).unwrap();
        assert_eq!(e.extension, "");
        assert_eq!(e.element_type, ElementType::Unknown);
    }

    #[test]
    fn extension_map_is_overridable() {
        let mut map = ExtensionMap::default();
        map.insert("wasm", ElementType::Javascript);
        assert_eq!(map.classify("wasm"), ElementType::Javascript);
        assert_eq!(classify_extension("wasm"), ElementType::Unknown);
    }

    #[test]
    fn third_party_is_exact_domain_inequality() {
        let r = rules();
        let page = r.resolve_registered_domain("example.com").unwrap();
        let same = r.resolve_registered_domain("images.example.com").unwrap();
        let other = r.resolve_registered_domain("www.google-analytics.com").unwrap();
        assert!(!is_third_party(&page, &same));
        assert!(is_third_party(&page, &other));
        assert!(!is_third_party(&page, &page));
        assert_eq!(is_third_party(&page, &other), is_third_party(&other, &page));
    }

    #[test]
    fn parts_reassemble_to_path_and_query() {
        let r = rules();
        for url in [
            "http://sub.example.com/tracking_pixel.png?id=8675309",
            "http://example.net/",
            "https://a.b.example.org/x/y/z.php?a=1&b=%20c",
            "http://example.com/no_ext",
        ] {
            let e = parse_request_url(url, &r).unwrap();
            let parsed = Url::parse(url).unwrap();
            let reassembled = format!("{}{}", e.element_path, e.args);
            let expected = match parsed.query() {
                Some(q) => format!("{}?{}", parsed.path(), q),
                None => parsed.path().to_string(),
            };
            assert_eq!(reassembled, expected, "url {url}");
            assert!(url.contains(&e.element_path));
        }
    }

    #[test]
    fn malformed_and_hostless_urls_error() {
        let r = rules();
        assert!(matches!(
            parse_request_url("not a url", &r),
            Err(RequestParseError::Malformed { .. })
        ));
        assert!(matches!(
            parse_request_url("data:text/plain,hello", &r),
            Err(RequestParseError::NoHost { .. })
        ));
    }

    #[test]
    fn bare_suffix_host_propagates_domain_error() {
        let r = rules();
        assert!(matches!(
            parse_request_url("http://com/x.png", &r),
            Err(RequestParseError::Domain {
                source: DomainError::NoRegisteredDomain { .. },
                ..
            })
        ));
    }

    #[test]
    fn ip_hosts_parse_with_ip_domain() {
        let e = parse_request_url("http://192.0.2.7/px.gif", &rules()).unwrap();
        assert_eq!(e.registered_domain.as_str(), "192.0.2.7");
        assert_eq!(e.registered_domain.tld(), "ip");
    }

    #[test]
    fn page_domain_prefers_final_url_and_falls_back_to_seed() {
        use crate::capture::{LoadStatus, PageLoadResult};
        use chrono::{TimeZone, Utc};

        let r = rules();
        let seed = crate::seed::normalize_url("start.example.com");
        let mut result =
            PageLoadResult::failed(seed, Utc.timestamp_opt(0, 0).unwrap(), "x".into());
        assert_eq!(
            page_domain(&result, &r).unwrap().as_str(),
            "example.com",
            "seed fallback"
        );
        result.final_url = "https://www.moved.example.org/home".into();
        result.load_status = LoadStatus::Ok;
        assert_eq!(page_domain(&result, &r).unwrap().as_str(), "example.org");
    }
}
