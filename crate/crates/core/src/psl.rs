//! Public Suffix List parsing and registered-domain resolution.
//!
//! A hostname's *registered domain* is its public suffix plus exactly one
//! more label; it is the granularity at which requests are attributed to
//! parties (sub-domains are ignored). Rule precedence follows the published
//! PSL algorithm: a matching exception rule wins, otherwise the matching
//! rule with the most labels, otherwise the implicit default rule `*`.
//!
//! Hostnames are treated as opaque dot-separated label strings; no IDNA
//! conversion happens here. Callers that need punycode/Unicode folding do it
//! before lookup, and the pinned rule snapshot carries both forms.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// How a single rule line matches hostnames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleKind {
    Normal,
    Wildcard,
    Exception,
}

/// Which section of the rule file a rule came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleSection {
    Icann,
    Private,
}

/// One parsed rule. Labels are stored reversed (TLD first), so the rule
/// `!www.ck` has labels `["ck", "www"]` and `*.ck` has `["ck", "*"]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicSuffixRule {
    pub labels: Vec<String>,
    pub kind: RuleKind,
    pub section: RuleSection,
}

impl PublicSuffixRule {
    /// The rule in file order ("www.ck", "*.ck"), without the `!` marker.
    pub fn suffix(&self) -> String {
        let mut labels: Vec<&str> = self.labels.iter().map(String::as_str).collect();
        labels.reverse();
        labels.join(".")
    }
}

/// Parse-time options.
#[derive(Debug, Clone, Copy)]
pub struct PslOptions {
    /// Include rules from the PRIVATE section in matching (default true).
    pub include_private: bool,
}

impl Default for PslOptions {
    fn default() -> Self {
        PslOptions {
            include_private: true,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PslParseError {
    #[error("line {line}: embedded whitespace in rule `{rule}`")]
    EmbeddedWhitespace { line: usize, rule: String },
    #[error("line {line}: empty label in rule `{rule}`")]
    EmptyLabel { line: usize, rule: String },
    #[error("line {line}: wildcard must be the leaf-most label in `{rule}`")]
    MisplacedWildcard { line: usize, rule: String },
    #[error("line {line}: exception rule `{rule}` may not contain a wildcard")]
    WildcardInException { line: usize, rule: String },
}

/// Errors from hostname lookups.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DomainError {
    #[error("empty host")]
    EmptyHost,
    #[error("host `{host}` contains an empty label")]
    EmptyLabel { host: String },
    #[error("host `{host}` is a bare public suffix and has no registered domain")]
    NoRegisteredDomain { host: String },
}

/// A registered domain: public suffix plus exactly one additional label, or
/// a literal IP address for requests made directly to one.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegisteredDomain(String);

impl RegisteredDomain {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// The final label, used for top-level-domain grouping. IP-address
    /// domains group under the synthetic TLD "ip".
    pub fn tld(&self) -> String {
        if host_is_ip(&self.0) {
            return "ip".to_string();
        }
        self.0
            .rsplit('.')
            .next()
            .unwrap_or(self.0.as_str())
            .to_string()
    }
}

impl fmt::Display for RegisteredDomain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Compiled rule set with lookup indexes. Immutable after parse; lookups are
/// read-only and safe to share across threads.
#[derive(Debug, Clone)]
pub struct PublicSuffixRuleSet {
    rules: Vec<PublicSuffixRule>,
    /// Normal rules keyed by their suffix in file order ("co.uk").
    exact: HashMap<String, usize>,
    /// Wildcard rules keyed by the base under the `*` ("ck" for `*.ck`);
    /// the value is the matched suffix label count (base labels + 1).
    wildcard: HashMap<String, usize>,
    /// Exception rules keyed by suffix in file order ("www.ck").
    exception: HashMap<String, usize>,
    version: String,
}

impl PublicSuffixRuleSet {
    /// Parse rule-file text with default options.
    pub fn parse(text: &str) -> Result<Self, PslParseError> {
        Self::parse_with(text, PslOptions::default())
    }

    /// Parse rule-file text. Empty and `//` comment lines are skipped;
    /// `// ===BEGIN/END ... DOMAINS===` markers assign sections.
    pub fn parse_with(text: &str, options: PslOptions) -> Result<Self, PslParseError> {
        let mut rules = Vec::new();
        let mut section = RuleSection::Icann;

        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with("//") {
                if line.contains("===BEGIN PRIVATE DOMAINS===") {
                    section = RuleSection::Private;
                } else if line.contains("===END PRIVATE DOMAINS===") {
                    section = RuleSection::Icann;
                }
                continue;
            }
            if line.chars().any(char::is_whitespace) {
                return Err(PslParseError::EmbeddedWhitespace {
                    line: line_no,
                    rule: line.to_string(),
                });
            }

            let (kind, body) = if let Some(rest) = line.strip_prefix('!') {
                (RuleKind::Exception, rest)
            } else if line.contains('*') {
                (RuleKind::Wildcard, line)
            } else {
                (RuleKind::Normal, line)
            };

            let labels_in_order: Vec<&str> = body.split('.').collect();
            if labels_in_order.iter().any(|l| l.is_empty()) {
                return Err(PslParseError::EmptyLabel {
                    line: line_no,
                    rule: line.to_string(),
                });
            }
            match kind {
                RuleKind::Exception => {
                    if labels_in_order.iter().any(|l| l.contains('*')) {
                        return Err(PslParseError::WildcardInException {
                            line: line_no,
                            rule: line.to_string(),
                        });
                    }
                }
                RuleKind::Wildcard => {
                    // exactly one "*", and only as the leaf-most label
                    let stars = labels_in_order.iter().filter(|l| l.contains('*')).count();
                    if stars != 1 || labels_in_order[0] != "*" {
                        return Err(PslParseError::MisplacedWildcard {
                            line: line_no,
                            rule: line.to_string(),
                        });
                    }
                }
                RuleKind::Normal => {}
            }

            let mut labels: Vec<String> =
                labels_in_order.iter().map(|l| l.to_lowercase()).collect();
            labels.reverse();
            rules.push(PublicSuffixRule {
                labels,
                kind,
                section,
            });
        }

        let version = content_version(text);
        Ok(Self::compile(rules, options, version))
    }

    fn compile(rules: Vec<PublicSuffixRule>, options: PslOptions, version: String) -> Self {
        let mut exact = HashMap::new();
        let mut wildcard = HashMap::new();
        let mut exception = HashMap::new();
        for rule in &rules {
            if rule.section == RuleSection::Private && !options.include_private {
                continue;
            }
            let n = rule.labels.len();
            match rule.kind {
                RuleKind::Normal => {
                    exact.insert(rule.suffix(), n);
                }
                RuleKind::Wildcard => {
                    // key is everything under the "*"; "" for a bare "*" rule
                    let mut base: Vec<&str> =
                        rule.labels[..n - 1].iter().map(String::as_str).collect();
                    base.reverse();
                    wildcard.insert(base.join("."), n);
                }
                RuleKind::Exception => {
                    exception.insert(rule.suffix(), n);
                }
            }
        }
        PublicSuffixRuleSet {
            rules,
            exact,
            wildcard,
            exception,
            version,
        }
    }

    /// All parsed rules, including private-section rules even when they are
    /// excluded from matching.
    pub fn rules(&self) -> &[PublicSuffixRule] {
        &self.rules
    }

    /// Content hash of the source text, recorded as the snapshot identity.
    pub fn version(&self) -> &str {
        &self.version
    }

    /// The public suffix of `host` under rule precedence. `host` must be
    /// non-empty, lowercase, and dot-separated with no empty labels.
    pub fn public_suffix<'a>(&self, host: &'a str) -> Result<&'a str, DomainError> {
        let labels = split_labels(host)?;
        let n = labels.len();

        // Longest-first suffix walk; an exception at any length prevails.
        let mut best_exception: Option<usize> = None;
        let mut best_match: Option<usize> = None;
        for start in 0..n {
            let k = n - start;
            let suffix = join_from(host, &labels, start);
            if best_exception.is_none() && self.exception.contains_key(suffix) {
                best_exception = Some(k);
            }
            if best_match.is_none() {
                let base = if start + 1 <= n {
                    join_from(host, &labels, start + 1)
                } else {
                    ""
                };
                if self.exact.contains_key(suffix)
                    || (self.wildcard.contains_key(base) && self.wildcard[base] == k)
                {
                    best_match = Some(k);
                }
            }
            if best_exception.is_some() && best_match.is_some() {
                break;
            }
        }

        let suffix_len = if let Some(k) = best_exception {
            k - 1 // the exception rule minus its leaf-most label
        } else if let Some(k) = best_match {
            k
        } else {
            1 // implicit default rule "*"
        };
        Ok(join_from(host, &labels, n - suffix_len))
    }

    /// The registered domain of `host`: its public suffix plus one more
    /// label. Fails with [`DomainError::NoRegisteredDomain`] when `host` is
    /// itself a public suffix; callers treat such requests as
    /// unattributable and skip them.
    pub fn registered_domain(&self, host: &str) -> Result<RegisteredDomain, DomainError> {
        let labels = split_labels(host)?;
        let n = labels.len();
        let suffix = self.public_suffix(host)?;
        let suffix_labels = suffix.split('.').count();
        if suffix_labels >= n {
            return Err(DomainError::NoRegisteredDomain {
                host: host.to_string(),
            });
        }
        let start = n - suffix_labels - 1;
        Ok(RegisteredDomain(join_from(host, &labels, start).to_string()))
    }

    /// Registered-domain lookup for arbitrary captured hosts: lowercases,
    /// strips a single trailing dot, and passes IP-address hosts through as
    /// their own registered domain.
    pub fn resolve_registered_domain(&self, host: &str) -> Result<RegisteredDomain, DomainError> {
        let trimmed = host.strip_suffix('.').unwrap_or(host);
        if trimmed.is_empty() {
            return Err(DomainError::EmptyHost);
        }
        let lowered = if trimmed.chars().any(|c| c.is_uppercase()) {
            trimmed.to_lowercase()
        } else {
            trimmed.to_string()
        };
        let unbracketed = lowered
            .strip_prefix('[')
            .and_then(|s| s.strip_suffix(']'))
            .unwrap_or(&lowered);
        if host_is_ip(unbracketed) {
            return Ok(RegisteredDomain(unbracketed.to_string()));
        }
        self.registered_domain(&lowered)
    }
}

fn host_is_ip(host: &str) -> bool {
    host.parse::<std::net::Ipv4Addr>().is_ok() || host.parse::<std::net::Ipv6Addr>().is_ok()
}

/// Split into labels, with byte offsets implied by slice identity.
fn split_labels<'a>(host: &'a str) -> Result<Vec<&'a str>, DomainError> {
    if host.is_empty() {
        return Err(DomainError::EmptyHost);
    }
    let labels: Vec<&str> = host.split('.').collect();
    if labels.iter().any(|l| l.is_empty()) {
        return Err(DomainError::EmptyLabel {
            host: host.to_string(),
        });
    }
    Ok(labels)
}

/// The suffix of `host` starting at label index `start`, as a slice of the
/// original string ("" when `start` is past the last label).
fn join_from<'a>(host: &'a str, labels: &[&'a str], start: usize) -> &'a str {
    if start >= labels.len() {
        return "";
    }
    let offset = labels[start].as_ptr() as usize - host.as_ptr() as usize;
    &host[offset..]
}

/// Short content hash used to pin input-file identity in stores and reports.
pub fn content_version(text: &str) -> String {
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest[..6].iter().map(|b| format!("{b:02x}")).collect();
    format!("sha256:{hex}")
}
