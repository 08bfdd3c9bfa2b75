use std::ops::RangeInclusive;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use chrono::{DateTime, Utc};
use serde_json::Value;
use ureq::tls::{parse_pem, PemItem, RootCerts, TlsConfig};
use ureq::Agent;

use super::{BlockRecord, IngestError, Result};

const TIME_PATH: &str = "result.block.header.time";
const HEIGHT_PATH: &str = "result.block.header.height";
const BODY_LIMIT: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TlsOptions {
    /// PEM bundle replacing the built-in root certificates.
    pub ca_bundle_pem: Option<Vec<u8>>,
    /// Accept any server certificate.
    pub insecure: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FetchOptions {
    /// Retries after the first attempt for connection failures, `429` and
    /// `5xx` responses.
    pub max_retries: u32,
    pub initial_backoff: Duration,
    pub max_backoff: Duration,
    /// Per-request time limit.
    pub timeout: Duration,
    pub bearer_token: Option<String>,
    /// Requests allowed in flight at once.
    pub in_flight: usize,
    pub tls: TlsOptions,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            max_retries: 4,
            initial_backoff: Duration::from_millis(250),
            max_backoff: Duration::from_secs(8),
            timeout: Duration::from_secs(30),
            bearer_token: None,
            in_flight: 4,
            tls: TlsOptions::default(),
        }
    }
}

/// Hands out request start times at least `1/rate` apart.
struct Limiter {
    interval: Duration,
    next: Mutex<Option<Instant>>,
}

impl Limiter {
    fn acquire(&self) {
        let slot = {
            let mut next = self.next.lock().expect("limiter lock");
            let now = Instant::now();
            let slot = next.map_or(now, |n| n.max(now));
            *next = Some(slot + self.interval);
            slot
        };
        let now = Instant::now();
        if slot > now {
            thread::sleep(slot - now);
        }
    }
}

fn build_agent(opts: &FetchOptions) -> Result<Agent> {
    let mut tls = TlsConfig::builder().disable_verification(opts.tls.insecure);
    if let Some(pem) = &opts.tls.ca_bundle_pem {
        let mut certs = Vec::new();
        for item in parse_pem(pem) {
            match item {
                Ok(PemItem::Certificate(c)) => certs.push(c),
                Ok(_) => {}
                Err(e) => return Err(IngestError::Domain(format!("bad CA bundle: {e}"))),
            }
        }
        if certs.is_empty() {
            return Err(IngestError::Domain("CA bundle holds no certificates".into()));
        }
        tls = tls.root_certs(RootCerts::new_with_certs(&certs));
    }
    Ok(Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(opts.timeout))
        .tls_config(tls.build())
        .build()
        .into())
}

fn parse_block(body: &str, height: u64) -> Result<BlockRecord> {
    let v: Value = serde_json::from_str(body).map_err(|e| IngestError::Protocol {
        path: "$".into(),
        message: format!("response is not JSON: {e}"),
    })?;
    if let Some(err) = v.get("error").filter(|e| !e.is_null()) {
        return Err(IngestError::Protocol {
            path: "error".into(),
            message: err.to_string(),
        });
    }
    let time = v
        .pointer("/result/block/header/time")
        .and_then(Value::as_str)
        .ok_or_else(|| IngestError::Protocol {
            path: TIME_PATH.into(),
            message: "missing or not a string".into(),
        })?;
    let time = DateTime::parse_from_rfc3339(time)
        .map_err(|e| IngestError::Protocol {
            path: TIME_PATH.into(),
            message: format!("bad RFC 3339 time {time:?}: {e}"),
        })?
        .with_timezone(&Utc);
    let got = match v.pointer("/result/block/header/height") {
        Some(Value::String(s)) => s.parse::<u64>().ok(),
        Some(Value::Number(n)) => n.as_u64(),
        _ => None,
    }
    .ok_or_else(|| IngestError::Protocol {
        path: HEIGHT_PATH.into(),
        message: "missing or not an integer".into(),
    })?;
    if got != height {
        return Err(IngestError::Integrity(format!(
            "requested height {height}, response header has {got}"
        )));
    }
    Ok(BlockRecord { height, time })
}

struct Fetcher<'a> {
    agent: Agent,
    base: String,
    limiter: Limiter,
    opts: &'a FetchOptions,
}

impl Fetcher<'_> {
    fn transport(&self, status: Option<u16>, message: String) -> IngestError {
        IngestError::Transport {
            endpoint: self.base.clone(),
            status,
            message,
        }
    }

    fn fetch(&self, height: u64) -> Result<BlockRecord> {
        let url = format!("{}/block?height={height}", self.base);
        let mut last_status = None;
        let mut last_message = String::new();
        let mut backoff = self.opts.initial_backoff;
        for attempt in 0..=self.opts.max_retries {
            if attempt > 0 {
                thread::sleep(backoff);
                backoff = (backoff * 2).min(self.opts.max_backoff);
            }
            self.limiter.acquire();
            let mut req = self.agent.get(&url);
            if let Some(token) = &self.opts.bearer_token {
                req = req.header("Authorization", format!("Bearer {token}"));
            }
            match req.call() {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if status == 200 {
                        let body = resp
                            .body_mut()
                            .with_config()
                            .limit(BODY_LIMIT)
                            .read_to_string()
                            .map_err(|e| self.transport(Some(status), format!("reading body: {e}")))?;
                        return parse_block(&body, height);
                    }
                    last_status = Some(status);
                    last_message = format!("HTTP {status} for height {height}");
                    if status != 429 && status < 500 {
                        return Err(self.transport(last_status, last_message));
                    }
                }
                Err(e) => last_message = format!("height {height}: {e}"),
            }
        }
        Err(self.transport(
            last_status,
            format!(
                "{last_message}; gave up after {} attempts",
                self.opts.max_retries + 1
            ),
        ))
    }
}

/// Fetch one header per height from `endpoint`'s `/block?height=H`,
/// starting no more than `rate_limit` requests per second (retries
/// included). Records come back in height order.
pub fn fetch_blocks(
    endpoint: &str,
    heights: RangeInclusive<u64>,
    rate_limit: f64,
    opts: &FetchOptions,
) -> Result<Vec<BlockRecord>> {
    if heights.is_empty() || *heights.start() == 0 {
        return Err(IngestError::Domain(format!(
            "height range {}..={} must be non-empty and start at 1 or above",
            heights.start(),
            heights.end()
        )));
    }
    if !(rate_limit.is_finite() && rate_limit > 0.0) {
        return Err(IngestError::Domain(format!(
            "rate limit must be finite and > 0, got {rate_limit}"
        )));
    }
    let fetcher = Fetcher {
        agent: build_agent(opts)?,
        base: endpoint.trim_end_matches('/').to_string(),
        limiter: Limiter {
            interval: Duration::from_secs_f64(1.0 / rate_limit),
            next: Mutex::new(None),
        },
        opts,
    };
    let list: Vec<u64> = heights.collect();
    let slots: Arc<Mutex<Vec<Option<Result<BlockRecord>>>>> = Arc::new(Mutex::new(vec![None; list.len()]));
    let cursor = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let workers = opts.in_flight.clamp(1, list.len());
    thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if failed.load(Ordering::Relaxed) {
                    break;
                }
                let j = cursor.fetch_add(1, Ordering::Relaxed);
                if j >= list.len() {
                    break;
                }
                let r = fetcher.fetch(list[j]);
                if r.is_err() {
                    failed.store(true, Ordering::Relaxed);
                }
                slots.lock().expect("slot lock")[j] = Some(r);
            });
        }
    });
    let slots = std::mem::take(&mut *slots.lock().expect("slot lock"));
    let mut out = Vec::with_capacity(slots.len());
    for (slot, height) in slots.into_iter().zip(&list) {
        match slot {
            Some(r) => out.push(r?),
            None => return Err(IngestError::Integrity(format!("height {height} was not fetched"))),
        }
    }
    Ok(out)
}
