//! Service configuration: a TOML file, overridden by `TERMREG_*` environment
//! variables, overridden by command-line flags.
//!
//! Every leaf key has an environment name built from its path, upper-cased
//! and joined with `_`: `thresholds.reputation.per_follower` is
//! `TERMREG_THRESHOLDS_REPUTATION_PER_FOLLOWER`, `server.port` is
//! `TERMREG_SERVER_PORT`. Flags use `--set path=value` with the same paths.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use termreg_core::ark::ArkConfig;
use termreg_core::consensus::Thresholds;
use termreg_core::registry::{AuditConfig, RegistryConfig};
use termreg_core::text::{Stopwords, DEFAULT_STOPWORDS};
use termreg_core::Error;
use toml::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerSection {
    pub bind: String,
    pub port: u16,
    /// Public prefix of term IRIs; empty means `http://{bind}:{port}`.
    pub base_url: String,
}

impl Default for ServerSection {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".into(),
            port: 8080,
            base_url: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StoreSection {
    /// JSON state file; empty keeps everything in memory.
    pub path: String,
    /// Append-only notification outbox; empty keeps it in memory.
    pub outbox: String,
    /// Stopword list, one word per line; empty uses the built-in list.
    pub stopwords: String,
}

impl Default for StoreSection {
    fn default() -> Self {
        Self {
            path: "termreg-store.json".into(),
            outbox: "termreg-outbox.log".into(),
            stopwords: String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NotificationSection {
    pub digest_interval_hours: f64,
    /// Days delivered notifications stay in the feed.
    pub feed_window_days: i64,
}

impl Default for NotificationSection {
    fn default() -> Self {
        Self {
            digest_interval_hours: 24.0,
            feed_window_days: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub timeout_secs: f64,
    pub concurrency: usize,
    /// Minimum spacing between two audits of one source triggered by views.
    pub min_interval_secs: f64,
    pub sweep_interval_hours: f64,
    /// How often view-triggered audits and the rescore queue are serviced.
    pub poll_secs: f64,
}

impl Default for AuditSection {
    fn default() -> Self {
        Self {
            timeout_secs: 10.0,
            concurrency: 4,
            min_interval_secs: 3600.0,
            sweep_interval_hours: 24.0,
            poll_secs: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthSection {
    pub session_ttl_hours: f64,
}

impl Default for AuthSection {
    fn default() -> Self {
        Self {
            session_ttl_hours: 12.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub server: ServerSection,
    pub store: StoreSection,
    pub thresholds: Thresholds,
    pub ark: ArkConfig,
    pub notifications: NotificationSection,
    pub audit: AuditSection,
    pub auth: AuthSection,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn secs(x: f64, name: &str) -> Result<Duration, Error> {
    Duration::try_from_secs_f64(x).map_err(|_| config_err(format!("{name} must be a non-negative number of seconds")))
}

/// Every leaf path of `v`, in document order.
fn leaves(v: &Value, prefix: &str, out: &mut Vec<(String, Value)>) {
    match v {
        Value::Table(t) => {
            for (k, child) in t {
                let path = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                leaves(child, &path, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

pub fn env_name(path: &str) -> String {
    format!("TERMREG_{}", path.replace('.', "_").to_ascii_uppercase())
}

/// Parses `raw` as the same TOML type as `like`.
fn coerce(raw: &str, like: &Value, path: &str) -> Result<Value, Error> {
    let bad = || config_err(format!("`{raw}` is not a valid value for {path}"));
    Ok(match like {
        Value::String(_) => Value::String(raw.to_string()),
        Value::Integer(_) => Value::Integer(raw.trim().parse().map_err(|_| bad())?),
        Value::Float(_) => Value::Float(raw.trim().parse().map_err(|_| bad())?),
        Value::Boolean(_) => Value::Boolean(raw.trim().parse().map_err(|_| bad())?),
        Value::Array(_) => {
            let doc: Value = format!("v = {raw}")
                .parse::<toml::Table>()
                .map(Value::Table)
                .map_err(|_| bad())?;
            doc.get("v").cloned().ok_or_else(bad)?
        }
        _ => return Err(bad()),
    })
}

fn set_path(root: &mut Value, path: &str, value: Value) {
    let mut node = root;
    let parts: Vec<&str> = path.split('.').collect();
    for p in &parts[..parts.len() - 1] {
        let table = node.as_table_mut().expect("intermediate nodes are tables");
        node = table
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Default::default()));
    }
    if let Some(t) = node.as_table_mut() {
        t.insert(parts[parts.len() - 1].to_string(), value);
    }
}

impl ServiceConfig {
    /// Documented keys with their defaults, as `(path, default)`.
    pub fn keys() -> Vec<(String, Value)> {
        let v = Value::try_from(ServiceConfig::default()).expect("config serializes");
        let mut out = Vec::new();
        leaves(&v, "", &mut out);
        out
    }

    /// Layers file, environment and `--set` overrides. `env` is passed in so
    /// tests need not touch the process environment.
    pub fn load(
        file: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
        overrides: &[(String, String)],
    ) -> Result<Self, Error> {
        let mut doc = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
                text.parse::<toml::Table>()
                    .map(Value::Table)
                    .map_err(|e| config_err(format!("{}: {e}", path.display())))?
            }
            None => Value::Table(Default::default()),
        };
        // validate the file alone first so its errors name the file
        doc.clone()
            .try_into::<ServiceConfig>()
            .map_err(|e| config_err(format!("configuration file: {e}")))?;
        let keys = Self::keys();
        for (path, default) in &keys {
            if let Some(raw) = env(&env_name(path)) {
                set_path(&mut doc, path, coerce(&raw, default, path)?);
            }
        }
        for (path, raw) in overrides {
            let (_, default) = keys
                .iter()
                .find(|(k, _)| k == path)
                .ok_or_else(|| config_err(format!("unknown configuration key `{path}`")))?;
            set_path(&mut doc, path, coerce(raw, default, path)?);
        }
        let cfg: ServiceConfig = doc.try_into().map_err(|e| config_err(e.to_string()))?;
        cfg.registry_config()?;
        Ok(cfg)
    }

    pub fn base_url(&self) -> String {
        if self.server.base_url.is_empty() {
            format!("http://{}:{}", self.server.bind, self.server.port)
        } else {
            self.server.base_url.trim_end_matches('/').to_string()
        }
    }

    fn optional_path(s: &str) -> Option<PathBuf> {
        (!s.is_empty()).then(|| PathBuf::from(s))
    }

    pub fn digest_interval(&self) -> Result<Duration, Error> {
        secs(
            self.notifications.digest_interval_hours * 3600.0,
            "notifications.digest_interval_hours",
        )
    }

    pub fn sweep_interval(&self) -> Result<Duration, Error> {
        secs(self.audit.sweep_interval_hours * 3600.0, "audit.sweep_interval_hours")
    }

    pub fn poll_interval(&self) -> Result<Duration, Error> {
        secs(self.audit.poll_secs, "audit.poll_secs")
    }

    pub fn registry_config(&self) -> Result<RegistryConfig, Error> {
        let stopwords = match Self::optional_path(&self.store.stopwords) {
            Some(p) => {
                Stopwords::parse(&std::fs::read_to_string(&p).map_err(|e| config_err(format!("{}: {e}", p.display())))?)
            }
            None => Stopwords::parse(DEFAULT_STOPWORDS),
        };
        for (name, d) in [
            ("notifications.digest_interval_hours", self.digest_interval()?),
            ("audit.sweep_interval_hours", self.sweep_interval()?),
            ("audit.poll_secs", self.poll_interval()?),
        ] {
            if d.is_zero() {
                return Err(config_err(format!("{name} must be positive")));
            }
        }
        let ttl = secs(self.auth.session_ttl_hours * 3600.0, "auth.session_ttl_hours")?;
        let cfg = RegistryConfig {
            thresholds: self.thresholds.clone(),
            ark: self.ark.clone(),
            base_url: self.base_url(),
            session_ttl: chrono::Duration::from_std(ttl).map_err(|e| config_err(e.to_string()))?,
            stopwords,
            outbox_path: Self::optional_path(&self.store.outbox),
            store_path: Self::optional_path(&self.store.path),
            audit: AuditConfig {
                timeout: secs(self.audit.timeout_secs, "audit.timeout_secs")?,
                concurrency: self.audit.concurrency,
                min_interval: secs(self.audit.min_interval_secs, "audit.min_interval_secs")?,
            },
            feed_window_days: self.notifications.feed_window_days,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
