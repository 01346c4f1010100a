//! The network side of Joomla fingerprinting.
//!
//! [`Fetcher`] sends GET requests with a fixed browser user agent,
//! follows redirects by hand so the chain is recorded, retries transport
//! failures and 502/503/504 within a bounded budget, and spaces requests to
//! the same host. [`probe_host`] runs the baseline request and the probe
//! sets for one host; [`run_scan`] does that for many hosts with bounded
//! concurrency and returns results in input order.

mod fetch;
pub mod robots;

use std::time::Duration;

use futures::stream::{self, StreamExt};
use metascan::fingerprint::{
    bundled_core_probes, bundled_extension_catalog, core_probe_set_from, discover_base_path, evaluate,
    extension_probe_set, CoreProbe, Detection, Evidence, ExtensionCatalogEntry, FingerprintError, ProbeResult,
    ProbeSpec, ProbeStatus,
};
use thiserror::Error;
use url::Url;

pub use fetch::{FetchOutcome, Fetcher, TransportFailureKind};

/// Chrome 74 on Windows 10.
pub const CHROME_74_UA: &str =
    "Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/74.0.3729.169 Safari/537.36";

/// Retry count used in the original measurement; raising it logs a warning.
pub const REFERENCE_MAX_RETRIES: u32 = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchPolicy {
    pub user_agent: String,
    pub connect_timeout: Duration,
    pub read_timeout: Duration,
    /// Retries beyond the first attempt.
    pub max_retries: u32,
    pub max_redirects: u32,
    /// Minimum gap between request starts to one host.
    pub per_host_delay: Duration,
    pub max_body: usize,
    /// Skip probes disallowed by the host's robots.txt.
    pub respect_robots: bool,
    /// Request the extension probes after the core probes.
    pub probe_extensions: bool,
}

impl Default for FetchPolicy {
    fn default() -> Self {
        Self {
            user_agent: CHROME_74_UA.to_string(),
            connect_timeout: Duration::from_secs(10),
            read_timeout: Duration::from_secs(20),
            max_retries: REFERENCE_MAX_RETRIES,
            max_redirects: 10,
            per_host_delay: Duration::from_millis(500),
            max_body: 65_536,
            respect_robots: false,
            probe_extensions: true,
        }
    }
}

impl FetchPolicy {
    /// Rejects zero-valued limits. Warns when `max_retries` exceeds the
    /// reference value.
    pub fn validate(&self) -> Result<(), CrawlError> {
        let zero = [
            ("connect_timeout", self.connect_timeout.is_zero()),
            ("read_timeout", self.read_timeout.is_zero()),
            ("max_retries", self.max_retries == 0),
            ("max_redirects", self.max_redirects == 0),
            ("per_host_delay", self.per_host_delay.is_zero()),
            ("max_body", self.max_body == 0),
        ];
        if let Some((name, _)) = zero.iter().find(|(_, z)| *z) {
            return Err(CrawlError::BadPolicy(format!("{name} must be greater than zero")));
        }
        if self.max_retries > REFERENCE_MAX_RETRIES {
            log::warn!("max_retries {} is above the reference value {REFERENCE_MAX_RETRIES}", self.max_retries);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CrawlError {
    #[error("invalid URL {0:?}")]
    InvalidUrl(String),
    #[error("{url}: more than {limit} redirects")]
    TooManyRedirects { url: String, limit: u32 },
    #[error("{url}: {last} after {attempts} attempts")]
    ExhaustedRetries { url: String, last: TransportFailureKind, attempts: u32 },
    #[error("{host} unreachable: {reason}")]
    HostUnreachable { host: String, reason: String },
    #[error("bad fetch policy: {0}")]
    BadPolicy(String),
    #[error("HTTP client: {0}")]
    Client(String),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
}

/// Probe definitions used for every host.
#[derive(Debug, Clone)]
pub struct ProbeCatalog {
    pub core: Vec<CoreProbe>,
    pub extensions: Vec<ExtensionCatalogEntry>,
}

impl Default for ProbeCatalog {
    fn default() -> Self {
        Self { core: bundled_core_probes(), extensions: bundled_extension_catalog() }
    }
}

/// Everything learned about one host.
#[derive(Debug, Clone)]
pub struct HostScan {
    pub detection: Detection,
    pub results: Vec<ProbeResult>,
    /// Baseline request and its redirects.
    pub baseline_chain: Vec<String>,
}

/// Target list: one hostname or origin URL per line; `#` starts a comment.
pub fn parse_targets(text: &str) -> Vec<String> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn baseline_url(host: &str) -> Result<Url, CrawlError> {
    let text = if host.contains("://") { host.to_string() } else { format!("http://{host}/") };
    let url = Url::parse(&text).map_err(|_| CrawlError::InvalidUrl(host.to_string()))?;
    if !matches!(url.scheme(), "http" | "https") || url.host_str().is_none() {
        return Err(CrawlError::InvalidUrl(host.to_string()));
    }
    Ok(url)
}

async fn run_probe(fetcher: &Fetcher, origin: &Url, spec: &ProbeSpec) -> ProbeResult {
    let url = origin.join(&spec.path).map(String::from).unwrap_or_else(|_| format!("{origin}{}", spec.path));
    match fetcher.fetch(&url).await {
        Ok(o) => ProbeResult::new(&spec.probe_id, ProbeStatus::Http(o.status), &o.body_excerpt, o.final_url().as_str()),
        Err(CrawlError::ExhaustedRetries { last, .. }) => {
            ProbeResult::new(&spec.probe_id, ProbeStatus::TransportFailure(last.to_string()), b"", url)
        }
        Err(e) => ProbeResult::new(&spec.probe_id, ProbeStatus::TransportFailure(e.to_string()), b"", url),
    }
}

fn hits(host: &str, base: &str, result: &ProbeResult, spec: &ProbeSpec) -> bool {
    evaluate(host, base, std::slice::from_ref(result), std::slice::from_ref(spec)).is_ok_and(|d| !d.evidence.is_empty())
}

/// Baseline request, base path discovery, core probes, then extension
/// probes. A component's `manifest.xml` fallback is requested only when its
/// primary manifest missed. Requests to the host are sequential.
pub async fn probe_host(fetcher: &Fetcher, host: &str, catalog: &ProbeCatalog) -> Result<HostScan, CrawlError> {
    let start = baseline_url(host)?;
    let baseline = fetcher.fetch(start.as_str()).await.map_err(|e| match e {
        CrawlError::InvalidUrl(_) => e,
        other => CrawlError::HostUnreachable { host: host.to_string(), reason: other.to_string() },
    })?;
    let chain: Vec<String> = baseline.redirect_chain.iter().map(|u| u.to_string()).collect();
    let base_path = discover_base_path(&chain);
    let final_url = baseline.final_url();
    let origin = Url::parse(&final_url.origin().ascii_serialization())
        .map_err(|_| CrawlError::InvalidUrl(final_url.to_string()))?;
    let moved = start.origin() != final_url.origin();

    let disallowed = if fetcher.policy().respect_robots {
        match fetcher.fetch(origin.join("/robots.txt").unwrap().as_str()).await {
            Ok(o) if o.status == 200 => {
                robots::disallowed(&String::from_utf8_lossy(&o.body_excerpt), &fetcher.policy().user_agent)
            }
            _ => Vec::new(),
        }
    } else {
        Vec::new()
    };
    let allowed = |spec: &ProbeSpec| robots::is_allowed(&disallowed, &spec.path);

    let mut specs = core_probe_set_from(&catalog.core, &base_path)?;
    let mut results = Vec::new();
    for spec in specs.iter().filter(|s| allowed(s)) {
        results.push(run_probe(fetcher, &origin, spec).await);
    }
    if fetcher.policy().probe_extensions {
        let ext = extension_probe_set(&catalog.extensions, &base_path)?;
        let mut primary_hit = false;
        for spec in ext.iter().filter(|s| allowed(s)) {
            let fallback = spec.probe_id.ends_with(":fallback");
            if fallback && primary_hit {
                continue;
            }
            let r = run_probe(fetcher, &origin, spec).await;
            if !fallback {
                primary_hit = hits(host, &base_path, &r, spec);
            }
            results.push(r);
        }
        specs.extend(ext);
    }
    let mut detection = evaluate(host, &base_path, &results, &specs)?;
    if moved {
        detection.evidence.insert(
            0,
            Evidence {
                probe_id: "baseline".into(),
                reason: format!("redirected to {}; probed there", origin.as_str()),
            },
        );
    }
    Ok(HostScan { detection, results, baseline_chain: chain })
}

/// Probes every target with at most `concurrency_limit` hosts in flight.
/// Output order is input order; a failing host only affects its own entry.
pub async fn run_scan(
    fetcher: &Fetcher,
    targets: &[String],
    catalog: &ProbeCatalog,
    concurrency_limit: usize,
) -> Vec<(String, Result<HostScan, CrawlError>)> {
    stream::iter(targets)
        .map(|t| async move { (t.clone(), probe_host(fetcher, t, catalog).await) })
        .buffered(concurrency_limit.max(1))
        .collect()
        .await
}
