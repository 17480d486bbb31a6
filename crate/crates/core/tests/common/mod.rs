#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use webcensus_core::ownership::{load_ownership_db, OwnershipRegistry};
use webcensus_core::psl::PublicSuffixRuleSet;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn psl_text() -> String {
    std::fs::read_to_string(data_path("public_suffix_list.dat")).expect("psl snapshot readable")
}

pub fn registry_text() -> String {
    std::fs::read_to_string(data_path("ownership.csv")).expect("ownership registry readable")
}

pub fn indicators_text() -> String {
    std::fs::read_to_string(data_path("indicators.conf")).expect("indicator config readable")
}

pub fn load_rules() -> PublicSuffixRuleSet {
    PublicSuffixRuleSet::parse(&psl_text()).expect("psl snapshot parses")
}

pub fn load_registry() -> OwnershipRegistry {
    load_ownership_db(&registry_text()).expect("ownership registry loads")
}
