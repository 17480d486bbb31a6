//! Deterministic synthetic crawl corpora.
//!
//! Pages are emitted as single-page HAR archives with a realistic mix of
//! first-party assets, shared trackers, per-page (single-site) domains,
//! tracking cookies, redirects, timeouts, and hard failures. The same
//! `(n_pages, rng_seed)` pair always yields byte-identical archives, so
//! tests and benchmarks can recount them independently.

use std::fs;
use std::io;
use std::path::Path;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub n_pages: usize,
    pub rng_seed: u64,
    pub base_time: DateTime<Utc>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_pages: 50,
            rng_seed: 2014,
            base_time: Utc.with_ymd_and_hms(2014, 5, 10, 12, 0, 0).unwrap(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthHar {
    pub file_name: String,
    pub text: String,
    pub seed_url: String,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub hars: Vec<SynthHar>,
}

impl SynthCorpus {
    pub fn seed_urls(&self) -> Vec<String> {
        self.hars.iter().map(|h| h.seed_url.clone()).collect()
    }

    /// Seed list in `rank,url` form, ready for ingestion.
    pub fn seed_list_text(&self) -> String {
        let mut out = String::from("# synthetic seed list\n");
        for (i, har) in self.hars.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, har.seed_url));
        }
        out
    }

    pub fn write_to_dir(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        for har in &self.hars {
            fs::write(dir.join(&har.file_name), &har.text)?;
        }
        Ok(())
    }
}

/// Weighted host suffixes; multi-label ones exercise PSL rules beneath a
/// grouping TLD (co.uk groups under "uk", com.br under "br").
const TLD_POOL: &[(&str, u32)] = &[
    ("com", 38),
    ("ru", 10),
    ("de", 8),
    ("org", 8),
    ("net", 7),
    ("co.uk", 6),
    ("co.jp", 5),
    ("edu", 5),
    ("com.br", 4),
    ("gov", 3),
    ("fr", 2),
];
const IP_WEIGHT: u32 = 2;

fn pick_suffix(rng: &mut ChaCha8Rng) -> Option<&'static str> {
    let total: u32 = TLD_POOL.iter().map(|(_, w)| w).sum::<u32>() + IP_WEIGHT;
    let mut roll = rng.gen_range(0..total);
    for (tld, weight) in TLD_POOL {
        if roll < *weight {
            return Some(tld);
        }
        roll -= weight;
    }
    None // IP-literal host
}

fn hex(rng: &mut ChaCha8Rng) -> String {
    format!("{:08x}", rng.gen::<u32>())
}

struct EntryBuilder {
    page_id: String,
    at: DateTime<Utc>,
    step: i64,
    entries: Vec<Value>,
}

impl EntryBuilder {
    fn new(page_id: &str, start: DateTime<Utc>) -> Self {
        EntryBuilder {
            page_id: page_id.to_string(),
            at: start,
            step: 0,
            entries: Vec::new(),
        }
    }

    fn push(&mut self, url: &str, status: i64, mime: &str, headers: Vec<(String, String)>) {
        self.step += 1;
        let at = self.at + Duration::milliseconds(self.step * 150);
        let header_values: Vec<Value> = headers
            .into_iter()
            .map(|(name, value)| json!({"name": name, "value": value}))
            .collect();
        let mut response = json!({"status": status, "headers": header_values});
        if status > 0 && !mime.is_empty() {
            response["content"] = json!({ "mimeType": mime });
        }
        self.entries.push(json!({
            "pageref": self.page_id,
            "startedDateTime": at.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            "request": {"method": "GET", "url": url},
            "response": response,
        }));
    }

    fn ok(&mut self, url: &str, mime: &str) {
        self.push(url, 200, mime, Vec::new());
    }

    fn with_cookie(&mut self, url: &str, mime: &str, set_cookie: &str) {
        self.push(url, 200, mime, vec![("Set-Cookie".to_string(), set_cookie.to_string())]);
    }
}

/// Build one corpus. Roughly: 6% of pages fail outright, 6% time out with
/// partial captures, 10% are tracker-free, ~20% carry a domain seen
/// nowhere else, and the rest share a weighted tracker inventory.
pub fn generate_corpus(config: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut hars = Vec::with_capacity(config.n_pages);
    for i in 0..config.n_pages {
        hars.push(build_page(i, config, &mut rng));
    }
    SynthCorpus { hars }
}

fn build_page(i: usize, config: &SynthConfig, rng: &mut ChaCha8Rng) -> SynthHar {
    let page_id = format!("page_{i:05}");
    let start = config.base_time + Duration::seconds(i as i64 * 2);
    let host = match pick_suffix(rng) {
        Some(tld) if rng.gen_bool(0.5) => format!("www.site{i:05}.{tld}"),
        Some(tld) => format!("site{i:05}.{tld}"),
        None => format!("203.0.113.{}", (i % 200) + 1),
    };
    let seed_url = format!("http://{host}/");

    let outcome = rng.gen_range(0..100u32);
    let (load_status, diagnostic) = match outcome {
        0..=5 => ("failed", Some("net::ERR_NAME_NOT_RESOLVED")),
        6..=11 => ("timeout", None),
        _ => ("ok", None),
    };

    let mut b = EntryBuilder::new(&page_id, start);
    if load_status == "failed" {
        // Document request observed, response never arrives.
        b.push(&seed_url, 0, "", Vec::new());
        return finish(i, &page_id, start, &host, &seed_url, load_status, diagnostic, b);
    }

    // Document, possibly behind one same-host redirect hop.
    if rng.gen_bool(0.06) {
        let target = format!("http://{host}/home");
        b.push(
            &seed_url,
            301,
            "text/html",
            vec![("Location".to_string(), target.clone())],
        );
        b.ok(&target, "text/html");
    } else {
        b.ok(&seed_url, "text/html");
    }

    // First-party assets.
    b.ok(&format!("http://{host}/css/main.css"), "text/css");
    b.ok(&format!("http://{host}/img/logo.png"), "image/png");
    if rng.gen_bool(0.6) {
        b.ok(&format!("http://{host}/js/app.js"), "application/javascript");
    }

    let clean = rng.gen_bool(0.10);
    // Timeout pages keep a shortened tracker tail: roll the same dice,
    // then truncate below.
    let tracker_mark = b.entries.len();
    if !clean {
        add_trackers(i, &host, rng, &mut b);
    }
    if load_status == "timeout" {
        let keep = tracker_mark + rng.gen_range(0..=2).min(b.entries.len() - tracker_mark);
        b.entries.truncate(keep);
    }

    finish(i, &page_id, start, &host, &seed_url, load_status, diagnostic, b)
}

fn add_trackers(i: usize, host: &str, rng: &mut ChaCha8Rng, b: &mut EntryBuilder) {
    if rng.gen_bool(0.65) {
        b.ok(
            &format!(
                "http://www.google-analytics.com/__utm.gif?utmac=UA-{}&utmn={}",
                i,
                rng.gen::<u32>()
            ),
            "image/gif",
        );
        if rng.gen_bool(0.3) {
            b.ok("http://www.google-analytics.com/ga.js", "application/javascript");
        }
    }
    if rng.gen_bool(0.35) {
        let expires = (b.at + Duration::days(730)).to_rfc2822().replace("+0000", "GMT");
        b.with_cookie(
            &format!("http://ad.doubleclick.net/adj/N{};sz=728x90", rng.gen_range(100..999)),
            "text/html",
            &format!(
                "id=2a8c9f{}|t=1399722000; Domain=.doubleclick.net; Path=/; Expires={expires}",
                hex(rng)
            ),
        );
    }
    if rng.gen_bool(0.25) {
        let url = format!("http://www.facebook.com/plugins/like.php?href=http%3A%2F%2F{host}%2F");
        if rng.gen_bool(0.4) {
            b.with_cookie(&url, "text/html", &format!("datr={}; Domain=.facebook.com; Path=/", hex(rng)));
        } else {
            b.ok(&url, "text/html");
        }
    }
    if rng.gen_bool(0.15) {
        b.ok(
            &format!("http://fbstatic-a.akamaihd.net/rsrc.php/v2/y2/r/{}.js", hex(rng)),
            "application/x-javascript",
        );
    }
    if rng.gen_bool(0.12) {
        b.ok("http://site-metrics.122.2o7.net/b/ss?AQB=1&ndh=1", "image/gif");
    }
    if rng.gen_bool(0.18) {
        b.ok("http://b.scorecardresearch.com/beacon.js", "application/javascript");
        if rng.gen_bool(0.5) {
            b.ok(
                &format!("http://b.scorecardresearch.com/b?c1=2&c2={}", rng.gen::<u32>()),
                "image/gif",
            );
        }
    }
    if rng.gen_bool(0.20) {
        b.ok(
            "http://pagead2.googlesyndication.net/pagead/show_ads.js",
            "application/javascript",
        );
    }
    if rng.gen_bool(0.10) {
        // Stats pixel whose cookie lands on a sibling registered domain:
        // wp.com then exists in cookie jars but never as an element domain.
        b.with_cookie(
            &format!("http://stats.wordpress.com/g.gif?v=ext&j={}", rng.gen::<u32>()),
            "image/gif",
            &format!("tk_ai={}; Domain=.wp.com; Path=/", hex(rng)),
        );
    }
    if rng.gen_bool(0.08) {
        b.with_cookie(
            "http://dpm.demdex.net/id?d_visid_ver=1",
            "application/json",
            &format!("demdex={}; Domain=.demdex.net; Path=/", hex(rng)),
        );
    }
    if rng.gen_bool(0.15) {
        let expires = (b.at + Duration::days(365)).to_rfc2822().replace("+0000", "GMT");
        b.with_cookie(
            "http://www.google.com/recaptcha/api.js",
            "application/javascript",
            &format!(
                "PREF=ID={}:TM=1399722000:LM=1399722000; Domain=.google.com; Path=/; Expires={expires}",
                hex(rng)
            ),
        );
    }
    if rng.gen_bool(0.20) {
        // Single-site domain: appears on exactly this page.
        b.ok(
            &format!("http://once{i:05}.info/px/{}.gif", rng.gen_range(1..99)),
            "image/gif",
        );
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    i: usize,
    page_id: &str,
    start: DateTime<Utc>,
    host: &str,
    seed_url: &str,
    load_status: &str,
    diagnostic: Option<&str>,
    b: EntryBuilder,
) -> SynthHar {
    let mut page = json!({
        "id": page_id,
        "title": format!("Site {i:05}"),
        "startedDateTime": start.to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
        "_load_status": load_status,
    });
    if load_status == "ok" && i % 3 != 0 {
        page["_meta_description"] = json!(format!("Synthetic page for {host}"));
    }
    if let Some(d) = diagnostic {
        page["_diagnostic"] = json!(d);
    }
    let doc = json!({
        "log": {
            "version": "1.2",
            "creator": {"name": "census-synth", "version": "1"},
            "pages": [page],
            "entries": b.entries,
        }
    });
    SynthHar {
        file_name: format!("{page_id}.har"),
        text: serde_json::to_string_pretty(&doc).expect("corpus serializes") + "\n",
        seed_url: seed_url.to_string(),
    }
}
