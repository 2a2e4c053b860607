//! Source fetching, hashing, and drift detection.

use std::io::Read;
use std::time::Duration;

use sha2::{Digest, Sha256, Sha512};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::model::{AuditOutcome, AuditResult, SourceRecord};

pub const DEFAULT_HASH_ALGORITHM: &str = "sha-256";

const MAX_BODY_BYTES: u64 = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("fetch failed: {0}")]
pub struct FetchError(pub String);

/// Retrieves source documents. Injected so tests can stub the network.
pub trait Fetcher: Send + Sync {
    fn fetch(&self, url: &str, timeout: Duration) -> std::result::Result<Vec<u8>, FetchError>;
}

/// `file://` paths from disk, `http(s)://` over the network.
#[derive(Debug, Default, Clone, Copy)]
pub struct DefaultFetcher;

impl Fetcher for DefaultFetcher {
    fn fetch(&self, url: &str, timeout: Duration) -> std::result::Result<Vec<u8>, FetchError> {
        if let Some(path) = url.strip_prefix("file://") {
            return std::fs::read(path).map_err(|e| FetchError(e.to_string()));
        }
        if !(url.starts_with("http://") || url.starts_with("https://")) {
            return Err(FetchError(format!("no fetcher for `{url}`")));
        }
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        let response = agent.get(url).call().map_err(|e| FetchError(e.to_string()))?;
        let mut body = Vec::new();
        response
            .into_reader()
            .take(MAX_BODY_BYTES)
            .read_to_end(&mut body)
            .map_err(|e| FetchError(e.to_string()))?;
        Ok(body)
    }
}

/// True for URLs the default fetcher can retrieve.
pub fn is_fetchable(url: &str) -> bool {
    ["file://", "http://", "https://"].iter().any(|p| url.starts_with(p))
}

/// Lowercase hex digest of `bytes`.
pub fn hash_bytes(algorithm: &str, bytes: &[u8]) -> Result<String> {
    match algorithm.to_ascii_lowercase().as_str() {
        "sha-256" | "sha256" => Ok(hex::encode(Sha256::digest(bytes))),
        "sha-512" | "sha512" => Ok(hex::encode(Sha512::digest(bytes))),
        other => Err(Error::Config(format!("unknown hash algorithm `{other}`"))),
    }
}

/// Compares fetched bytes against the stored digest.
pub fn verify_source(
    source: &SourceRecord,
    fetcher: &dyn Fetcher,
    timeout: Duration,
    now: Timestamp,
) -> Result<AuditResult> {
    // fail on an unknown algorithm before touching the network
    hash_bytes(&source.hash_algorithm, b"")?;
    let (outcome, new_hash) = match fetcher.fetch(&source.url, timeout) {
        Err(e) => {
            tracing::debug!(url = %source.url, error = %e, "source unreachable");
            (AuditOutcome::Unreachable, None)
        }
        Ok(body) => {
            let digest = hash_bytes(&source.hash_algorithm, &body)?;
            let outcome = if digest == source.content_hash {
                AuditOutcome::Unchanged
            } else {
                AuditOutcome::Changed
            };
            (outcome, Some(digest))
        }
    };
    Ok(AuditResult {
        source: source.id,
        outcome,
        new_hash,
        checked_at: now,
    })
}
