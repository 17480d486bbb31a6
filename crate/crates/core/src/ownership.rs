//! Domain-to-company attribution and corporate reach.
//!
//! The registry is a hand-curated CSV mapping registered domains to the
//! companies operating them, with optional parent links (doubleclick.net
//! is DoubleClick, whose parent is Google). Attribution is an exact
//! registered-domain lookup; an absent domain is `unattributed`, a value
//! and never an error. Reach is the share of analyzed pages touching any
//! domain that resolves to a given ultimate parent.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::psl::{content_version, RegisteredDomain};

/// One registry row, as loaded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OwnershipEntry {
    pub domain: String,
    pub company: String,
    pub parent: Option<String>,
    pub notes: Option<String>,
    /// 1-based line in the source file, for duplicate diagnostics.
    pub line: u64,
}

/// Resolved attribution for one domain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Owner {
    pub company: String,
    pub ultimate_parent: String,
    /// Annotation parsed from a `hosted-for: X` note; content served by an
    /// infrastructure owner on behalf of another party.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub hosted_for: Option<String>,
}

impl Owner {
    /// Company column text: ultimate parent, with any hosted-for party
    /// appended ("Akamai/Facebook").
    pub fn display(&self) -> String {
        match &self.hosted_for {
            Some(party) => format!("{}/{}", self.ultimate_parent, party),
            None => self.ultimate_parent.clone(),
        }
    }
}

#[derive(Debug, Error)]
pub enum OwnershipError {
    #[error("registry parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("line {line}: registry row needs domain and company, got `{row}`")]
    BadRow { line: u64, row: String },
    #[error("duplicate registry domain `{domain}` (lines {first} and {second})")]
    DuplicateDomain { domain: String, first: u64, second: u64 },
    #[error("company `{company}` has conflicting parents `{a}` and `{b}`")]
    ConflictingParent { company: String, a: String, b: String },
    #[error("cyclic parent chain at company `{company}`")]
    CyclicParents { company: String },
    #[error("parent chain from company `{company}` exceeds 3 hops")]
    ChainTooLong { company: String },
}

/// The loaded registry: immutable after load, lookups by registered domain.
#[derive(Debug, Clone)]
pub struct OwnershipRegistry {
    entries: Vec<OwnershipEntry>,
    resolved: HashMap<String, Owner>,
    version: String,
}

const MAX_PARENT_HOPS: usize = 3;

/// Load and validate registry CSV (`domain,company,parent,notes` header,
/// `#` comments permitted). All parent chains are resolved up front so
/// later lookups are infallible.
pub fn load_ownership_db(text: &str) -> Result<OwnershipRegistry, OwnershipError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());

    let mut entries: Vec<OwnershipEntry> = Vec::new();
    let mut first_line_of: HashMap<String, u64> = HashMap::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let domain = field(0).to_lowercase();
        let company = field(1);
        if domain.is_empty() || company.is_empty() {
            return Err(OwnershipError::BadRow {
                line,
                row: record.iter().collect::<Vec<_>>().join(","),
            });
        }
        if let Some(&first) = first_line_of.get(&domain) {
            return Err(OwnershipError::DuplicateDomain {
                domain,
                first,
                second: line,
            });
        }
        first_line_of.insert(domain.clone(), line);
        entries.push(OwnershipEntry {
            domain,
            company,
            parent: Some(field(2)).filter(|s| !s.is_empty()),
            notes: Some(field(3)).filter(|s| !s.is_empty()),
            line,
        });
    }

    // Company-level parent map; rows must agree on each company's parent.
    let mut parent_of: HashMap<&str, &str> = HashMap::new();
    for entry in &entries {
        if let Some(parent) = &entry.parent {
            match parent_of.get(entry.company.as_str()) {
                Some(existing) if *existing != parent.as_str() => {
                    return Err(OwnershipError::ConflictingParent {
                        company: entry.company.clone(),
                        a: existing.to_string(),
                        b: parent.clone(),
                    });
                }
                _ => {
                    parent_of.insert(&entry.company, parent);
                }
            }
        }
    }

    let mut resolved = HashMap::new();
    for entry in &entries {
        let ultimate = ultimate_parent(&entry.company, &parent_of)?;
        resolved.insert(
            entry.domain.clone(),
            Owner {
                company: entry.company.clone(),
                ultimate_parent: ultimate,
                hosted_for: entry.notes.as_deref().and_then(parse_hosted_for),
            },
        );
    }
    Ok(OwnershipRegistry {
        entries,
        resolved,
        version: content_version(text),
    })
}

fn ultimate_parent(
    company: &str,
    parent_of: &HashMap<&str, &str>,
) -> Result<String, OwnershipError> {
    let mut current = company;
    let mut seen = vec![company];
    for _ in 0..MAX_PARENT_HOPS {
        match parent_of.get(current) {
            Some(&parent) => {
                if seen.contains(&parent) {
                    return Err(OwnershipError::CyclicParents {
                        company: company.to_string(),
                    });
                }
                seen.push(parent);
                current = parent;
            }
            None => return Ok(current.to_string()),
        }
    }
    if parent_of.contains_key(current) {
        return Err(OwnershipError::ChainTooLong {
            company: company.to_string(),
        });
    }
    Ok(current.to_string())
}

fn parse_hosted_for(notes: &str) -> Option<String> {
    let rest = notes.split("hosted-for:").nth(1)?;
    let party = rest.split(';').next().unwrap_or("").trim();
    (!party.is_empty()).then(|| party.to_string())
}

impl OwnershipRegistry {
    pub fn entries(&self) -> &[OwnershipEntry] {
        &self.entries
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    /// Exact registered-domain lookup; None is "unattributed".
    pub fn resolve_owner(&self, domain: &RegisteredDomain) -> Option<&Owner> {
        self.resolved.get(domain.as_str())
    }

    /// Company column text for reports: the attribution or "unattributed".
    pub fn company_display(&self, domain: &RegisteredDomain) -> String {
        match self.resolve_owner(domain) {
            Some(owner) => owner.display(),
            None => "unattributed".to_string(),
        }
    }
}

/// Reach of one company across the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompanyReach {
    pub company: String,
    pub n_pages: u64,
    pub pct_pages: f64,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReachError {
    #[error("reach over an empty corpus (zero analyzed pages)")]
    EmptyCorpus,
}

/// Corporate reach: for each ultimate-parent company, the percentage of
/// analyzed pages with at least one third-party request to any domain it
/// owns. `page_domains` holds one set of (post-filter) third-party
/// domains per analyzed page; a page counts once per company no matter
/// how many of its domains or requests are involved. Companies nothing
/// touches are absent; ranking is by page count descending, name
/// ascending.
pub fn corporate_reach<'a, I>(
    page_domains: I,
    registry: &OwnershipRegistry,
) -> Result<Vec<CompanyReach>, ReachError>
where
    I: IntoIterator<Item = &'a BTreeSet<RegisteredDomain>>,
{
    let mut n_pages: u64 = 0;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    for domains in page_domains {
        n_pages += 1;
        let companies: BTreeSet<&str> = domains
            .iter()
            .filter_map(|d| registry.resolve_owner(d))
            .map(|o| o.ultimate_parent.as_str())
            .collect();
        for company in companies {
            *counts.entry(company.to_string()).or_insert(0) += 1;
        }
    }
    if n_pages == 0 {
        return Err(ReachError::EmptyCorpus);
    }
    let mut reach: Vec<CompanyReach> = counts
        .into_iter()
        .map(|(company, pages)| CompanyReach {
            company,
            n_pages: pages,
            pct_pages: 100.0 * pages as f64 / n_pages as f64,
        })
        .collect();
    reach.sort_by(|a, b| b.n_pages.cmp(&a.n_pages).then_with(|| a.company.cmp(&b.company)));
    Ok(reach)
}
