//! Command line front end for the census pipeline: seed ingestion, corpus
//! capture, archive import, reporting, and registry checks.
//!
//! Exit codes: 0 success, 1 usage error, 2 unreadable or malformed input,
//! 3 runtime failure (driver or write-side).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process;
use std::time::Duration;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use webcensus_core::capture::cdp::CdpDriver;
use webcensus_core::capture::har::{ingest_har, HarReplayDriver};
use webcensus_core::capture::pool::{capture_corpus, PoolConfig};
use webcensus_core::capture::{LoadOptions, LoadStatus, PageLoadResult};
use webcensus_core::cookies::{default_indicators, parse_indicators, SurveillanceIndicator};
use webcensus_core::ownership::{load_ownership_db, OwnershipRegistry};
use webcensus_core::psl::PublicSuffixRuleSet;
use webcensus_core::report::{build_report, render_report, ReportFormat};
use webcensus_core::seed::{parse_seed_file, RejectReason, SeedStatus, SeedUrl};
use webcensus_core::store::CrawlStore;

/// Registry version recorded in stores created by capture commands, which
/// take no registry; the report records the one actually applied.
const REGISTRY_UNPINNED: &str = "unpinned";

#[derive(Parser)]
#[command(
    name = "webcensus",
    version,
    about = "Census of third-party requests, cookies, and scripts across a page corpus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a seed list and write it beside the store.
    IngestSeeds(IngestSeedsArgs),
    /// Capture every seed through a driver and write results to the store.
    Crawl(CrawlArgs),
    /// Ingest recorded .har archives directly into the store.
    ImportHar(ImportHarArgs),
    /// Build the census report from a store and print it.
    Report(ReportArgs),
    /// Ownership registry tools.
    #[command(subcommand)]
    Ownership(OwnershipCommand),
}

#[derive(Subcommand)]
enum OwnershipCommand {
    /// Load the registry, surface structural problems, and summarize it.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct IngestSeedsArgs {
    /// Seed list: one URL per line or `rank,url` rows; `#` comments.
    #[arg(long)]
    seeds: PathBuf,
    /// Store path; the sidecar lands at `<store>.seeds`.
    #[arg(long, env = "XRAY_STORE")]
    store: PathBuf,
}

#[derive(Args)]
struct CrawlArgs {
    #[arg(long, env = "XRAY_STORE")]
    store: PathBuf,
    /// Seed list; defaults to the `<store>.seeds` sidecar.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// Public suffix snapshot file.
    #[arg(long, env = "XRAY_PSL")]
    psl: PathBuf,
    /// Capture driver: `har`, `cdp`, or `cdp:<endpoint>`.
    #[arg(long, env = "XRAY_DRIVER", default_value = "har")]
    driver: String,
    /// Directory of recorded .har files (har driver only).
    #[arg(long)]
    har_dir: Option<PathBuf>,
    /// Per-page load wall in seconds.
    #[arg(long, default_value_t = 30)]
    timeout: u64,
    /// Concurrent capture workers.
    #[arg(long, default_value_t = 1)]
    pool: usize,
    /// Send `DNT: 1` on live captures.
    #[arg(long)]
    dnt: bool,
}

#[derive(Args)]
struct ImportHarArgs {
    #[arg(long, env = "XRAY_STORE")]
    store: PathBuf,
    /// Directory of .har files to ingest.
    #[arg(long)]
    har_dir: PathBuf,
    #[arg(long, env = "XRAY_PSL")]
    psl: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, env = "XRAY_STORE")]
    store: PathBuf,
    /// Ownership registry CSV.
    #[arg(long, env = "XRAY_REGISTRY")]
    registry: PathBuf,
    /// Surveillance indicator config; defaults to the built-in pair.
    #[arg(long)]
    indicators: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Rows in the ranked element table.
    #[arg(long, default_value_t = 100)]
    top_k: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, env = "XRAY_REGISTRY")]
    registry: PathBuf,
    /// With a suffix snapshot, also flag rows no lookup can ever match.
    #[arg(long, env = "XRAY_PSL")]
    psl: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Text,
}

impl From<FormatArg> for ReportFormat {
    fn from(arg: FormatArg) -> ReportFormat {
        match arg {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Text => ReportFormat::Text,
        }
    }
}

enum Failure {
    Usage(String),
    Input(String),
    Runtime(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Input(m) | Failure::Runtime(m) => m,
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            process::exit(code);
        }
    };
    if let Err(failure) = run(cli) {
        eprintln!("webcensus: {}", failure.message());
        process::exit(failure.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::IngestSeeds(args) => cmd_ingest_seeds(args),
        Command::Crawl(args) => cmd_crawl(args),
        Command::ImportHar(args) => cmd_import_har(args),
        Command::Report(args) => cmd_report(args),
        Command::Ownership(OwnershipCommand::Validate(args)) => cmd_validate(args),
    }
}

// ------------------------------------------------------------- helpers

fn read_text(path: &Path, what: &str) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::Input(format!("cannot read {what} `{}`: {e}", path.display())))
}

fn load_rules(path: &Path) -> Result<PublicSuffixRuleSet, Failure> {
    let text = read_text(path, "public suffix list")?;
    PublicSuffixRuleSet::parse(&text)
        .map_err(|e| Failure::Input(format!("public suffix list `{}`: {e}", path.display())))
}

fn load_registry(path: &Path) -> Result<OwnershipRegistry, Failure> {
    let text = read_text(path, "ownership registry")?;
    load_ownership_db(&text)
        .map_err(|e| Failure::Input(format!("ownership registry `{}`: {e}", path.display())))
}

fn load_indicators(path: Option<&Path>) -> Result<Vec<SurveillanceIndicator>, Failure> {
    match path {
        None => Ok(default_indicators()),
        Some(path) => {
            let text = read_text(path, "indicator config")?;
            parse_indicators(&text)
                .map_err(|e| Failure::Input(format!("indicator config `{}`: {e}", path.display())))
        }
    }
}

fn sidecar_path(store: &Path) -> PathBuf {
    let mut name = store.as_os_str().to_owned();
    name.push(".seeds");
    PathBuf::from(name)
}

/// Existing stores are extended; re-captured pages replace their slot. A
/// store parsed under one rule snapshot must not be extended under another.
fn open_or_create_store(path: &Path, rules: &PublicSuffixRuleSet) -> Result<CrawlStore, Failure> {
    if !path.exists() {
        return Ok(CrawlStore::new(rules.version(), REGISTRY_UNPINNED));
    }
    let store = CrawlStore::import_from_path(path)
        .map_err(|e| Failure::Input(format!("store `{}`: {e}", path.display())))?;
    if store.meta.psl_version != rules.version() {
        return Err(Failure::Input(format!(
            "store `{}` was built under suffix snapshot {}, but --psl resolves to {}; \
             pass the matching snapshot or start a fresh store",
            path.display(),
            store.meta.psl_version,
            rules.version()
        )));
    }
    Ok(store)
}

fn write_store(store: &CrawlStore, path: &Path) -> Result<(), Failure> {
    store
        .export_to_path(path)
        .map_err(|e| Failure::Runtime(format!("cannot write store `{}`: {e}", path.display())))
}

fn accepted_seeds(seeds: Vec<SeedUrl>) -> Vec<SeedUrl> {
    seeds.into_iter().filter(|s| s.is_accepted()).collect()
}

// ------------------------------------------------------- ingest-seeds

fn cmd_ingest_seeds(args: IngestSeedsArgs) -> Result<(), Failure> {
    let text = read_text(&args.seeds, "seed list")?;
    let seeds = parse_seed_file(&text);
    let total = seeds.len();
    let mut n_malformed = 0u64;
    let mut n_binary = 0u64;
    let mut n_duplicate = 0u64;
    for seed in seeds.iter().filter(|s| s.status == SeedStatus::Rejected) {
        match seed.reject_reason {
            Some(RejectReason::Malformed) => n_malformed += 1,
            Some(RejectReason::BinaryExtension) => n_binary += 1,
            Some(RejectReason::Duplicate) => n_duplicate += 1,
            None => {}
        }
    }
    let accepted = accepted_seeds(seeds);
    if accepted.is_empty() {
        return Err(Failure::Input(format!(
            "no usable seeds in `{}` ({total} lines: {n_malformed} malformed, \
             {n_binary} binary-extension, {n_duplicate} duplicate)",
            args.seeds.display()
        )));
    }

    let mut out = String::from("# normalized seed list\n");
    for (i, seed) in accepted.iter().enumerate() {
        let rank = seed.rank.unwrap_or(i as u64 + 1);
        let _ = writeln!(out, "{rank},{}", seed.normalized);
    }
    let sidecar = sidecar_path(&args.store);
    fs::write(&sidecar, out)
        .map_err(|e| Failure::Runtime(format!("cannot write `{}`: {e}", sidecar.display())))?;
    println!(
        "{} of {total} seeds accepted ({n_duplicate} duplicate, {n_malformed} malformed, \
         {n_binary} binary-extension) -> {}",
        accepted.len(),
        sidecar.display()
    );
    Ok(())
}

// -------------------------------------------------------------- crawl

enum DriverChoice {
    Har,
    Cdp(String),
}

fn parse_driver(value: &str) -> Result<DriverChoice, Failure> {
    match value {
        "har" => Ok(DriverChoice::Har),
        "cdp" => Ok(DriverChoice::Cdp("http://127.0.0.1:9222".to_string())),
        other => match other.strip_prefix("cdp:") {
            Some(endpoint) if !endpoint.is_empty() => Ok(DriverChoice::Cdp(endpoint.to_string())),
            _ => Err(Failure::Usage(format!(
                "unknown driver `{other}`; expected `har`, `cdp`, or `cdp:<endpoint>`"
            ))),
        },
    }
}

fn crawl_seeds(args: &CrawlArgs) -> Result<Vec<SeedUrl>, Failure> {
    let path = match &args.seeds {
        Some(path) => path.clone(),
        None => {
            let sidecar = sidecar_path(&args.store);
            if !sidecar.exists() {
                return Err(Failure::Usage(format!(
                    "no seed source: pass --seeds or run ingest-seeds first \
                     (looked for `{}`)",
                    sidecar.display()
                )));
            }
            sidecar
        }
    };
    let seeds = accepted_seeds(parse_seed_file(&read_text(&path, "seed list")?));
    if seeds.is_empty() {
        return Err(Failure::Input(format!(
            "no usable seeds in `{}`",
            path.display()
        )));
    }
    Ok(seeds)
}

fn cmd_crawl(args: CrawlArgs) -> Result<(), Failure> {
    let rules = load_rules(&args.psl)?;
    let seeds = crawl_seeds(&args)?;
    let driver = parse_driver(&args.driver)?;
    let mut store = open_or_create_store(&args.store, &rules)?;

    let options = LoadOptions {
        timeout: Duration::from_secs(args.timeout),
        dnt: args.dnt,
        ..LoadOptions::default()
    };
    // Politeness keys on the registered domain; replay needs no spacing.
    let key = |seed: &SeedUrl| -> Option<String> {
        let host = seed.host()?;
        rules
            .resolve_registered_domain(&host)
            .ok()
            .map(|rd| rd.into_string())
    };
    let config = PoolConfig {
        pool_size: args.pool,
        politeness_delay: match driver {
            DriverChoice::Har => Duration::ZERO,
            DriverChoice::Cdp(_) => Duration::from_millis(500),
        },
        key_fn: Some(&key),
    };

    let results: Vec<PageLoadResult> = match &driver {
        DriverChoice::Har => {
            let dir = args.har_dir.as_ref().ok_or_else(|| {
                Failure::Usage("--driver har needs --har-dir <recordings>".to_string())
            })?;
            let replay = HarReplayDriver::from_dir(dir)
                .map_err(|e| Failure::Input(format!("har directory `{}`: {e}", dir.display())))?;
            capture_corpus(&seeds, &replay, &options, &config)
        }
        DriverChoice::Cdp(endpoint) => {
            let live = CdpDriver::connect(endpoint)
                .map_err(|e| Failure::Runtime(format!("cdp endpoint `{endpoint}`: {e}")))?;
            capture_corpus(&seeds, &live, &options, &config)
        }
    };

    let mut n_ok = 0u64;
    let mut n_timeout = 0u64;
    let mut n_failed = 0u64;
    let mut n_elements = 0u64;
    let mut n_cookies = 0u64;
    for result in &results {
        match result.load_status {
            LoadStatus::Ok => n_ok += 1,
            LoadStatus::Timeout => n_timeout += 1,
            LoadStatus::Failed => n_failed += 1,
        }
        let ingest = store.put_page_result(result, &rules);
        n_elements += ingest.n_third_party_requests;
        n_cookies += ingest.n_third_party_cookies;
    }
    write_store(&store, &args.store)?;
    println!(
        "captured {} seeds: {n_ok} ok, {n_timeout} timeout, {n_failed} failed; \
         {n_elements} third-party requests, {n_cookies} third-party cookies -> `{}` \
         ({} pages total)",
        results.len(),
        args.store.display(),
        store.n_pages()
    );
    Ok(())
}

// --------------------------------------------------------- import-har

fn cmd_import_har(args: ImportHarArgs) -> Result<(), Failure> {
    let rules = load_rules(&args.psl)?;
    let mut store = open_or_create_store(&args.store, &rules)?;

    let mut paths: Vec<PathBuf> = fs::read_dir(&args.har_dir)
        .map_err(|e| {
            Failure::Input(format!(
                "cannot read har directory `{}`: {e}",
                args.har_dir.display()
            ))
        })?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.path())
        .filter(|p| p.extension().map(|x| x == "har").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Input(format!(
            "no .har files in `{}`",
            args.har_dir.display()
        )));
    }

    let mut n_pages = 0u64;
    for path in &paths {
        let text = read_text(path, "har archive")?;
        let pages = ingest_har(&text)
            .map_err(|e| Failure::Input(format!("har archive `{}`: {e}", path.display())))?;
        for page in pages {
            store.put_page_result(&page, &rules);
            n_pages += 1;
        }
    }
    write_store(&store, &args.store)?;
    println!(
        "ingested {n_pages} pages from {} archives -> `{}` ({} pages total)",
        paths.len(),
        args.store.display(),
        store.n_pages()
    );
    Ok(())
}

// ------------------------------------------------------------- report

fn cmd_report(args: ReportArgs) -> Result<(), Failure> {
    let store = CrawlStore::import_from_path(&args.store)
        .map_err(|e| Failure::Input(format!("store `{}`: {e}", args.store.display())))?;
    let registry = load_registry(&args.registry)?;
    let indicators = load_indicators(args.indicators.as_deref())?;
    let report = build_report(&store, &registry, &indicators, args.top_k)
        .map_err(|e| Failure::Runtime(format!("report over `{}`: {e}", args.store.display())))?;
    print!("{}", render_report(&report, args.format.into()));
    Ok(())
}

// ------------------------------------------------- ownership validate

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    // Loading already rejects duplicate domains, conflicting parents,
    // cycles, and over-long chains; what remains is summary and soft
    // findings.
    let registry = load_registry(&args.registry)?;
    let entries = registry.entries();

    let companies: BTreeSet<&str> = entries.iter().map(|e| e.company.as_str()).collect();
    let parent_of: std::collections::BTreeMap<&str, &str> = entries
        .iter()
        .filter_map(|e| e.parent.as_deref().map(|p| (e.company.as_str(), p)))
        .collect();
    let mut ultimates: BTreeSet<&str> = BTreeSet::new();
    for company in &companies {
        let mut current = *company;
        while let Some(parent) = parent_of.get(current) {
            current = parent;
        }
        ultimates.insert(current);
    }
    let n_hosted = entries
        .iter()
        .filter(|e| e.notes.as_deref().is_some_and(|n| n.contains("hosted-for:")))
        .count() as u64;

    let mut n_dead_rows = 0u64;
    if let Some(psl) = &args.psl {
        let rules = load_rules(psl)?;
        for entry in entries {
            match rules.resolve_registered_domain(&entry.domain) {
                Err(_) => {
                    n_dead_rows += 1;
                    println!(
                        "warning: line {}: `{}` is not a registrable domain; \
                         no lookup will ever match it",
                        entry.line, entry.domain
                    );
                }
                Ok(rd) if rd.as_str() != entry.domain => {
                    n_dead_rows += 1;
                    println!(
                        "warning: line {}: `{}` normalizes to `{}`; the row as \
                         written never matches a lookup",
                        entry.line, entry.domain, rd
                    );
                }
                Ok(_) => {}
            }
        }
    }

    println!(
        "registry ok: {} rows, {} companies, {} ultimate parents, \
         {n_hosted} hosted-for annotations, {n_dead_rows} dead rows ({})",
        entries.len(),
        companies.len(),
        ultimates.len(),
        registry.version()
    );
    Ok(())
}
