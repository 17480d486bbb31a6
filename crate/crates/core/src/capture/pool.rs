//! Worker pool for concurrent page capture.
//!
//! Workers claim seeds from a shared index and write results into
//! seed-order slots, so the output is identical for any pool size. A
//! politeness gate spaces successive loads that share a key (the CLI keys
//! by registered domain), keeping fast corpora from hammering one host.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::{CaptureDriver, LoadOptions, PageLoadResult};
use crate::seed::SeedUrl;

/// Spacing control: successive acquisitions of the same key start at least
/// `min_delay` apart. Keys never seen wait nothing.
pub struct PolitenessGate {
    min_delay: Duration,
    next_free: Mutex<HashMap<String, Instant>>,
}

impl PolitenessGate {
    pub fn new(min_delay: Duration) -> Self {
        PolitenessGate {
            min_delay,
            next_free: Mutex::new(HashMap::new()),
        }
    }

    /// Reserve the next slot for `key` and sleep until it opens.
    pub fn acquire(&self, key: &str) {
        if self.min_delay.is_zero() {
            return;
        }
        let slot = {
            let mut map = self.next_free.lock().unwrap();
            let now = Instant::now();
            let slot = map.get(key).copied().unwrap_or(now).max(now);
            map.insert(key.to_string(), slot + self.min_delay);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

/// Pool settings. `key_fn` maps a seed to its politeness key; seeds whose
/// key is None skip the gate.
pub struct PoolConfig<'a> {
    pub pool_size: usize,
    pub politeness_delay: Duration,
    pub key_fn: Option<&'a (dyn Fn(&SeedUrl) -> Option<String> + Sync)>,
}

impl Default for PoolConfig<'_> {
    fn default() -> Self {
        PoolConfig {
            pool_size: 1,
            politeness_delay: Duration::ZERO,
            key_fn: None,
        }
    }
}

/// Capture every seed through `driver` with `config.pool_size` workers.
/// Results come back in seed order regardless of completion order; each
/// seed yields exactly one result.
pub fn capture_corpus<D: CaptureDriver>(
    seeds: &[SeedUrl],
    driver: &D,
    options: &LoadOptions,
    config: &PoolConfig,
) -> Vec<PageLoadResult> {
    if seeds.is_empty() {
        return Vec::new();
    }
    let workers = config.pool_size.max(1).min(seeds.len());
    let gate = PolitenessGate::new(config.politeness_delay);
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, PageLoadResult)>();

    thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let gate = &gate;
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let seed = &seeds[i];
                if let Some(key_fn) = config.key_fn {
                    if let Some(key) = key_fn(seed) {
                        gate.acquire(&key);
                    }
                }
                let result = driver.load_page(seed, options);
                if tx.send((i, result)).is_err() {
                    break;
                }
            });
        }
        drop(tx);

        let mut slots: Vec<Option<PageLoadResult>> = (0..seeds.len()).map(|_| None).collect();
        for (i, result) in rx {
            slots[i] = Some(result);
        }
        slots
            .into_iter()
            .map(|slot| slot.expect("every claimed seed sends exactly one result"))
            .collect()
    })
}
