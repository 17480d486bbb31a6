//! Shared fixtures for the pipeline benchmarks: rule snapshots and
//! synthetic corpora built once per benchmark process.

use std::fs;
use std::path::{Path, PathBuf};

use webcensus_core::capture::har::ingest_har;
use webcensus_core::cookies::{parse_indicators, SurveillanceIndicator};
use webcensus_core::ownership::{load_ownership_db, OwnershipRegistry};
use webcensus_core::psl::PublicSuffixRuleSet;
use webcensus_core::store::CrawlStore;
use webcensus_core::synth::{generate_corpus, SynthConfig};

fn data_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

pub fn rules() -> PublicSuffixRuleSet {
    let text = fs::read_to_string(data_path("public_suffix_list.dat")).unwrap();
    PublicSuffixRuleSet::parse(&text).unwrap()
}

pub fn registry() -> OwnershipRegistry {
    let text = fs::read_to_string(data_path("ownership.csv")).unwrap();
    load_ownership_db(&text).unwrap()
}

pub fn indicators() -> Vec<SurveillanceIndicator> {
    let text = fs::read_to_string(data_path("indicators.conf")).unwrap();
    parse_indicators(&text).unwrap()
}

pub fn corpus_har_texts(n_pages: usize) -> Vec<String> {
    generate_corpus(&SynthConfig {
        n_pages,
        ..SynthConfig::default()
    })
    .hars
    .into_iter()
    .map(|har| har.text)
    .collect()
}

pub fn corpus_store(n_pages: usize) -> CrawlStore {
    let rules = rules();
    let mut store = CrawlStore::new(rules.version(), registry().version());
    for text in corpus_har_texts(n_pages) {
        for page in ingest_har(&text).unwrap() {
            store.put_page_result(&page, &rules);
        }
    }
    store
}
