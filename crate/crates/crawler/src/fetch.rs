use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use reqwest::header::{HeaderValue, LOCATION, USER_AGENT};
use reqwest::redirect::Policy;
use url::Url;

use crate::{CrawlError, FetchPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransportFailureKind {
    Connect,
    Timeout,
    /// The connection broke while reading the response.
    Body,
    Other,
}

impl fmt::Display for TransportFailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransportFailureKind::Connect => "connect failed",
            TransportFailureKind::Timeout => "timed out",
            TransportFailureKind::Body => "connection broken",
            TransportFailureKind::Other => "transport error",
        })
    }
}

impl From<&reqwest::Error> for TransportFailureKind {
    fn from(e: &reqwest::Error) -> Self {
        if e.is_timeout() {
            TransportFailureKind::Timeout
        } else if e.is_connect() {
            TransportFailureKind::Connect
        } else if e.is_body() || e.is_decode() || e.is_request() {
            TransportFailureKind::Body
        } else {
            TransportFailureKind::Other
        }
    }
}

/// A completed fetch. A final status of 502/503/504 can remain here when
/// the retry budget ran out on it.
#[derive(Debug, Clone)]
pub struct FetchOutcome {
    pub status: u16,
    /// The requested URL followed by every redirect target.
    pub redirect_chain: Vec<Url>,
    pub body_excerpt: Vec<u8>,
    pub attempts: u32,
    pub elapsed: Duration,
}

impl FetchOutcome {
    pub fn final_url(&self) -> &Url {
        self.redirect_chain.last().expect("chain holds at least the requested URL")
    }
}

fn retryable_status(status: u16) -> bool {
    matches!(status, 502..=504)
}

/// Host key for politeness: host and effective port.
pub(crate) fn host_key(url: &Url) -> String {
    format!("{}:{}", url.host_str().unwrap_or(""), url.port_or_known_default().unwrap_or(0))
}

/// The HTTP client plus per-host pacing state.
pub struct Fetcher {
    client: reqwest::Client,
    policy: FetchPolicy,
    next_allowed: Mutex<HashMap<String, Instant>>,
}

impl Fetcher {
    pub fn new(policy: FetchPolicy) -> Result<Self, CrawlError> {
        let client = reqwest::Client::builder()
            .connect_timeout(policy.connect_timeout)
            .read_timeout(policy.read_timeout)
            .redirect(Policy::none())
            .build()
            .map_err(|e| CrawlError::Client(e.to_string()))?;
        Ok(Self { client, policy, next_allowed: Mutex::new(HashMap::new()) })
    }

    pub fn policy(&self) -> &FetchPolicy {
        &self.policy
    }

    /// Waits until the host's budget allows another request and books the
    /// next slot.
    async fn pace(&self, url: &Url) {
        let wait = {
            let mut budgets = self.next_allowed.lock().unwrap_or_else(|e| e.into_inner());
            let now = Instant::now();
            let slot = budgets.get(&host_key(url)).copied().unwrap_or(now).max(now);
            budgets.insert(host_key(url), slot + self.policy.per_host_delay);
            slot - now
        };
        if !wait.is_zero() {
            tokio::time::sleep(wait).await;
        }
    }

    /// One request, no redirects or retries.
    async fn request(&self, url: &Url) -> Result<(u16, Option<String>, Vec<u8>), TransportFailureKind> {
        self.pace(url).await;
        let ua = HeaderValue::from_str(&self.policy.user_agent).unwrap_or(HeaderValue::from_static("metascan"));
        let mut resp = self
            .client
            .get(url.clone())
            .header(USER_AGENT, ua)
            .send()
            .await
            .map_err(|e| TransportFailureKind::from(&e))?;
        let status = resp.status().as_u16();
        let location = resp.headers().get(LOCATION).and_then(|v| v.to_str().ok()).map(str::to_string);
        let mut body = Vec::new();
        while body.len() < self.policy.max_body {
            match resp.chunk().await {
                Ok(Some(chunk)) => body.extend_from_slice(&chunk),
                Ok(None) => break,
                Err(e) => return Err(TransportFailureKind::from(&e)),
            }
        }
        body.truncate(self.policy.max_body);
        Ok((status, location, body))
    }

    /// Fetches `url`, following up to `max_redirects` redirects. Transport
    /// failures and 502/503/504 are retried on the same hop; the retry
    /// budget is shared by the whole fetch, and `attempts` is one plus the
    /// retries spent.
    pub async fn fetch(&self, url: &str) -> Result<FetchOutcome, CrawlError> {
        let start = Instant::now();
        let first = parse_http_url(url)?;
        let mut chain = vec![first];
        let mut retries = 0u32;
        loop {
            let current = chain.last().unwrap().clone();
            let (status, location, body) = loop {
                let can_retry = retries < self.policy.max_retries;
                match self.request(&current).await {
                    Ok((status, _, _)) if retryable_status(status) && can_retry => {
                        log::debug!("{current}: status {status}, retrying");
                    }
                    Ok(reply) => break reply,
                    Err(kind) if can_retry => log::debug!("{current}: {kind}, retrying"),
                    Err(kind) => {
                        return Err(CrawlError::ExhaustedRetries {
                            url: url.to_string(),
                            last: kind,
                            attempts: retries + 1,
                        })
                    }
                }
                retries += 1;
            };
            let redirect = matches!(status, 301 | 302 | 303 | 307 | 308);
            match location.filter(|_| redirect) {
                Some(loc) => {
                    if chain.len() > self.policy.max_redirects as usize {
                        return Err(CrawlError::TooManyRedirects {
                            url: url.to_string(),
                            limit: self.policy.max_redirects,
                        });
                    }
                    let next = current.join(&loc).map_err(|_| CrawlError::InvalidUrl(loc.clone()))?;
                    if !matches!(next.scheme(), "http" | "https") {
                        return Err(CrawlError::InvalidUrl(loc));
                    }
                    chain.push(next);
                }
                None => {
                    return Ok(FetchOutcome {
                        status,
                        redirect_chain: chain,
                        body_excerpt: body,
                        attempts: retries + 1,
                        elapsed: start.elapsed(),
                    })
                }
            }
        }
    }
}

pub(crate) fn parse_http_url(url: &str) -> Result<Url, CrawlError> {
    let parsed = Url::parse(url).map_err(|_| CrawlError::InvalidUrl(url.to_string()))?;
    if !matches!(parsed.scheme(), "http" | "https") || parsed.host_str().is_none() {
        return Err(CrawlError::InvalidUrl(url.to_string()));
    }
    Ok(parsed)
}
