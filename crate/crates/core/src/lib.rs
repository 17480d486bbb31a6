//! Census of third-party HTTP requests, cookies, and scripts across a corpus
//! of web pages.
//!
//! The pipeline runs in stages: seed addresses are normalized and
//! deduplicated ([`seed`]), each page is captured either from a live
//! headless-browser endpoint or from recorded HTTP archives ([`capture`]),
//! request URLs are decomposed and attributed to registered domains via the
//! Public Suffix List ([`psl`], [`request`]), third-party cookies and
//! surveillance indicators are flagged ([`cookies`]), domains are mapped to
//! owning companies ([`ownership`]), everything lands in a deterministic
//! single-file store ([`store`]), and aggregate statistics are computed and
//! rendered from it ([`report`]).

pub mod capture;
pub mod cookies;
pub mod ownership;
pub mod psl;
pub mod report;
pub mod request;
pub mod seed;
pub mod store;
pub mod synth;

pub use capture::{CaptureDriver, CookieRecord, LoadOptions, PageLoadResult, RequestRecord};
pub use psl::{PublicSuffixRuleSet, RegisteredDomain};
pub use report::CensusReport;
pub use seed::SeedUrl;
pub use store::CrawlStore;
