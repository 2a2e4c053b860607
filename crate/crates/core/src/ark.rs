//! Archival Resource Keys: minting, parsing, local resolution, and the
//! metadata served through `?` / `??` inflections.
//!
//! Blades are the base-29 encoding of a persistent counter over the
//! betanumeric alphabet (digits plus consonants, no `l`), left-padded to four
//! characters and followed by one check character computed over
//! `NAAN/shoulder+digits`. Hyphens carry no identity and are dropped before
//! any comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{SchemaId, TermId};
use crate::model::{Status, Term, TermVersion};

pub const BETANUMERIC: &[u8; 29] = b"0123456789bcdfghjkmnpqrstvwxz";
const MIN_BLADE_DIGITS: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArkConfig {
    pub naan: String,
    pub term_shoulder: String,
    pub schema_shoulder: String,
    pub collection_shoulder: String,
}

impl Default for ArkConfig {
    fn default() -> Self {
        Self {
            naan: "99999".into(),
            term_shoulder: "y2".into(),
            schema_shoulder: "y3".into(),
            collection_shoulder: "y4".into(),
        }
    }
}

impl ArkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.naan.is_empty() || !self.naan.bytes().all(|b| BETANUMERIC.contains(&b)) {
            return Err(Error::Config(format!("invalid NAAN `{}`", self.naan)));
        }
        let shoulders = [&self.term_shoulder, &self.schema_shoulder, &self.collection_shoulder];
        for s in shoulders {
            if split_shoulder(s).0 != s.as_str() {
                return Err(Error::Config(format!(
                    "shoulder `{s}` must be lowercase letters followed by one digit"
                )));
            }
        }
        if shoulders[0] == shoulders[1] || shoulders[1] == shoulders[2] || shoulders[0] == shoulders[2] {
            return Err(Error::Config("shoulders must be distinct".into()));
        }
        Ok(())
    }

    fn shoulder(&self, kind: TargetKind) -> &str {
        match kind {
            TargetKind::Term => &self.term_shoulder,
            TargetKind::Schema => &self.schema_shoulder,
            TargetKind::Collection => &self.collection_shoulder,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetKind {
    Term,
    Schema,
    Collection,
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TargetKind::Term => "term",
            TargetKind::Schema => "schema",
            TargetKind::Collection => "collection",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Target {
    Term(TermId),
    Schema(SchemaId),
    Collection(String),
}

impl Target {
    pub fn kind(&self) -> TargetKind {
        match self {
            Target::Term(_) => TargetKind::Term,
            Target::Schema(_) => TargetKind::Schema,
            Target::Collection(_) => TargetKind::Collection,
        }
    }

    fn key(&self) -> String {
        match self {
            Target::Term(t) => t.to_string(),
            Target::Schema(s) => s.to_string(),
            Target::Collection(c) => format!("collection:{c}"),
        }
    }
}

/// A parsed ARK with hyphens removed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ark {
    pub naan: String,
    pub shoulder: String,
    pub blade: String,
}

impl Ark {
    pub fn name(&self) -> String {
        format!("{}{}", self.shoulder, self.blade)
    }
}

impl fmt::Display for Ark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ark:/{}/{}{}", self.naan, self.shoulder, self.blade)
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || "=~*+@_$./".contains(c)
}

/// Splits a name into shoulder and blade by the first-digit convention:
/// the shoulder is a run of lowercase letters closed by one digit.
fn split_shoulder(name: &str) -> (&str, &str) {
    let letters = name.bytes().take_while(|b| b.is_ascii_lowercase()).count();
    if letters > 0 && name.as_bytes().get(letters).is_some_and(u8::is_ascii_digit) {
        name.split_at(letters + 1)
    } else {
        ("", name)
    }
}

impl FromStr for Ark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let syntax = |why: &str| Error::ArkSyntax(format!("`{s}`: {why}"));
        let rest = s
            .trim()
            .strip_prefix("ark:")
            .ok_or_else(|| syntax("missing `ark:` label"))?;
        let rest = rest.strip_prefix('/').unwrap_or(rest);
        let (naan, name) = rest.split_once('/').ok_or_else(|| syntax("missing `/` after NAAN"))?;
        if naan.is_empty() || !naan.bytes().all(|b| BETANUMERIC.contains(&b)) {
            return Err(syntax("NAAN must be betanumeric"));
        }
        let name: String = name.chars().filter(|&c| c != '-').collect();
        if name.is_empty() {
            return Err(syntax("empty name"));
        }
        if let Some(bad) = name.chars().find(|&c| !is_name_char(c)) {
            return Err(syntax(&format!("illegal character `{bad}`")));
        }
        let (shoulder, blade) = split_shoulder(&name);
        Ok(Ark {
            naan: naan.to_string(),
            shoulder: shoulder.to_string(),
            blade: blade.to_string(),
        })
    }
}

/// Base-29 digits of `n`, at least four wide.
pub fn encode_counter(mut n: u64) -> String {
    let mut digits = Vec::new();
    while n > 0 {
        digits.push(BETANUMERIC[(n % 29) as usize]);
        n /= 29;
    }
    while digits.len() < MIN_BLADE_DIGITS {
        digits.push(b'0');
    }
    digits.reverse();
    String::from_utf8(digits).expect("alphabet is ascii")
}

/// Position-weighted check character over `naan/name`; characters outside
/// the alphabet contribute zero.
pub fn check_char(s: &str) -> char {
    let sum: usize = s
        .bytes()
        .enumerate()
        .map(|(i, b)| (i + 1) * BETANUMERIC.iter().position(|&a| a == b).unwrap_or(0))
        .sum();
    BETANUMERIC[sum % 29] as char
}

/// True when the last blade character is the check character of the rest
/// of `naan/name`.
pub fn has_valid_check(ark: &Ark) -> bool {
    let Some((at, last)) = ark.blade.char_indices().last() else {
        return false;
    };
    check_char(&format!("{}/{}{}", ark.naan, ark.shoulder, &ark.blade[..at])) == last
}

/// Outcome of [`ArkRegistry::check`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MintCheck {
    pub minted: usize,
    pub counter: u64,
    /// ARKs produced by the dry-run mints, which are not kept.
    pub dry_run: Vec<String>,
    pub problems: Vec<String>,
}

impl MintCheck {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArkRecord {
    pub ark: String,
    pub target: Target,
    pub minted_at: Timestamp,
}

impl ArkRecord {
    pub fn target_kind(&self) -> TargetKind {
        self.target.kind()
    }
}

/// Counter-backed minter and local resolver. Persisted with the rest of the
/// registry state so the counter survives restarts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArkRegistry {
    config: ArkConfig,
    counter: u64,
    records: BTreeMap<String, ArkRecord>,
    by_target: BTreeMap<String, String>,
}

impl ArkRegistry {
    pub fn new(config: ArkConfig) -> Self {
        Self {
            config,
            counter: 0,
            records: BTreeMap::new(),
            by_target: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &ArkConfig {
        &self.config
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &ArkRecord> {
        self.records.values()
    }

    /// ARK string the next mint for `kind` would produce.
    pub fn preview(&self, kind: TargetKind) -> String {
        self.ark_for(kind, self.counter + 1)
    }

    fn ark_for(&self, kind: TargetKind, counter: u64) -> String {
        let shoulder = self.config.shoulder(kind);
        let digits = encode_counter(counter);
        let check = check_char(&format!("{}/{shoulder}{digits}", self.config.naan));
        format!("ark:/{}/{shoulder}{digits}{check}", self.config.naan)
    }

    pub fn mint(&mut self, target: Target, now: Timestamp) -> Result<ArkRecord> {
        let key = target.key();
        if let Some(existing) = self.by_target.get(&key) {
            return Err(Error::Conflict(format!("{key} already has ARK {existing}")));
        }
        self.counter += 1;
        let ark = self.ark_for(target.kind(), self.counter);
        let record = ArkRecord {
            ark: ark.clone(),
            target,
            minted_at: now,
        };
        self.by_target.insert(key, ark.clone());
        self.records.insert(ark, record.clone());
        Ok(record)
    }

    pub fn ark_of(&self, target: &Target) -> Option<&str> {
        self.by_target.get(&target.key()).map(String::as_str)
    }

    /// Audits every minted ARK (syntax, NAAN, shoulder, check character,
    /// target index), then mints `sample` more of each kind on a copy and
    /// checks that they parse back to their components and collide with
    /// nothing.
    pub fn check(&self, sample: u64, now: Timestamp) -> MintCheck {
        let mut problems = Vec::new();
        for (ark, rec) in &self.records {
            problems.extend(self.problems_of(ark, rec.target.kind()));
            if self.by_target.get(&rec.target.key()) != Some(ark) {
                problems.push(format!("{ark}: target index does not point back"));
            }
        }
        if self.counter < self.records.len() as u64 {
            problems.push(format!(
                "counter {} is below the {} minted ARKs",
                self.counter,
                self.records.len()
            ));
        }
        let mut scratch = self.clone();
        let mut dry_run = Vec::new();
        for i in 0..sample {
            for target in [
                Target::Term(TermId(u64::MAX - i)),
                Target::Schema(SchemaId(u64::MAX - i)),
                Target::Collection(format!("mint-check-{i}")),
            ] {
                let kind = target.kind();
                match scratch.mint(target, now) {
                    Ok(rec) => {
                        if self.records.contains_key(&rec.ark) {
                            problems.push(format!("{}: dry-run mint collides", rec.ark));
                        }
                        problems.extend(scratch.problems_of(&rec.ark, kind));
                        dry_run.push(rec.ark);
                    }
                    Err(e) => problems.push(format!("dry-run mint failed: {e}")),
                }
            }
        }
        MintCheck {
            minted: self.records.len(),
            counter: self.counter,
            dry_run,
            problems,
        }
    }

    fn problems_of(&self, ark: &str, kind: TargetKind) -> Vec<String> {
        let parsed: Ark = match ark.parse() {
            Ok(p) => p,
            Err(e) => return vec![format!("{ark}: {e}")],
        };
        let mut out = Vec::new();
        if parsed.to_string() != ark {
            out.push(format!("{ark}: not in canonical form"));
        }
        if parsed.naan != self.config.naan {
            out.push(format!("{ark}: NAAN is not {}", self.config.naan));
        }
        if parsed.shoulder != self.config.shoulder(kind) {
            out.push(format!("{ark}: shoulder does not match a {kind}"));
        }
        if !parsed.blade.bytes().all(|b| BETANUMERIC.contains(&b)) {
            out.push(format!("{ark}: blade leaves the betanumeric alphabet"));
        }
        if !has_valid_check(&parsed) {
            out.push(format!("{ark}: bad check character"));
        }
        out
    }

    pub fn resolve(&self, ark: &str) -> Result<&ArkRecord> {
        let parsed: Ark = ark.parse()?;
        self.records
            .get(&parsed.to_string())
            .ok_or_else(|| Error::not_found(format!("ARK {parsed}")))
    }
}

/// Presentational stability band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityBand {
    High,
    Medium,
    Low,
}

impl StabilityBand {
    pub fn from_score(score: f64) -> Self {
        if score >= 0.75 {
            StabilityBand::High
        } else if score >= 0.4 {
            StabilityBand::Medium
        } else {
            StabilityBand::Low
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StabilityBand::High => "high",
            StabilityBand::Medium => "medium",
            StabilityBand::Low => "low",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceStatement {
    pub ark: String,
    pub kind: TargetKind,
    pub created: Timestamp,
    pub modified: Timestamp,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<Status>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub current_version: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stability_band: Option<StabilityBand>,
    pub statement_text: String,
}

fn ts(t: Timestamp) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

pub fn term_statement(term: &Term) -> PersistenceStatement {
    let band = StabilityBand::from_score(term.stability_score());
    let commitment = match term.status() {
        Status::Canonical => "It is endorsed by community consensus and its definition is expected to remain stable.",
        Status::Vernacular => "It is in community use and its definition may still change.",
        Status::Deprecated => "It is deprecated and no longer recommended; the identifier remains resolvable.",
    };
    let text = format!(
        "{ark} identifies the term \"{label}\" (status {status}, version {version}). \
         Created {created}; last modified {modified}; stability {band}. {commitment}",
        ark = term.ark,
        label = term.label,
        status = term.status(),
        version = term.current_version,
        created = ts(term.created),
        modified = ts(term.modified),
        band = band.as_str(),
    );
    PersistenceStatement {
        ark: term.ark.clone(),
        kind: TargetKind::Term,
        created: term.created,
        modified: term.modified,
        status: Some(term.status()),
        current_version: Some(term.current_version),
        stability_band: Some(band),
        statement_text: text,
    }
}

/// Statement for a schema or collection ARK.
pub fn group_statement(record: &ArkRecord, label: &str, term_count: usize) -> PersistenceStatement {
    let text = format!(
        "{ark} identifies the {kind} \"{label}\" holding {term_count} terms. \
         Minted {minted}; membership changes as terms are imported.",
        ark = record.ark,
        kind = record.target_kind(),
        minted = ts(record.minted_at),
    );
    PersistenceStatement {
        ark: record.ark.clone(),
        kind: record.target_kind(),
        created: record.minted_at,
        modified: record.minted_at,
        status: None,
        current_version: None,
        stability_band: None,
        statement_text: text,
    }
}

/// Versioning vocabulary for a term. Absent keys are omitted on output; the
/// set of possible keys is closed.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VersionMetadata {
    #[serde(rename = "dcterms:created", skip_serializing_if = "Option::is_none")]
    pub created: Option<String>,
    #[serde(rename = "dcterms:modified", skip_serializing_if = "Option::is_none")]
    pub modified: Option<String>,
    #[serde(rename = "dcterms:isReplacedBy", skip_serializing_if = "Option::is_none")]
    pub is_replaced_by: Option<String>,
    #[serde(rename = "dcterms:replaces", skip_serializing_if = "Option::is_none")]
    pub replaces: Option<String>,
    #[serde(rename = "owl:deprecated", skip_serializing_if = "Option::is_none")]
    pub deprecated: Option<String>,
    #[serde(rename = "owl:priorVersion", skip_serializing_if = "Option::is_none")]
    pub prior_version: Option<String>,
    #[serde(rename = "owl:versionInfo", skip_serializing_if = "Option::is_none")]
    pub version_info: Option<String>,
    #[serde(rename = "skos:changeNote", skip_serializing_if = "Option::is_none")]
    pub change_note: Option<String>,
    #[serde(rename = "skos:historyNote", skip_serializing_if = "Option::is_none")]
    pub history_note: Option<String>,
}

impl VersionMetadata {
    pub const KEYS: [&'static str; 9] = [
        "dcterms:created",
        "dcterms:modified",
        "dcterms:isReplacedBy",
        "dcterms:replaces",
        "owl:deprecated",
        "owl:priorVersion",
        "owl:versionInfo",
        "skos:changeNote",
        "skos:historyNote",
    ];

    /// Present keys and their values, in [`Self::KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, &str)> {
        let values = [
            &self.created,
            &self.modified,
            &self.is_replaced_by,
            &self.replaces,
            &self.deprecated,
            &self.prior_version,
            &self.version_info,
            &self.change_note,
            &self.history_note,
        ];
        Self::KEYS
            .iter()
            .zip(values)
            .filter_map(|(k, v)| v.as_deref().map(|v| (*k, v)))
            .collect()
    }
}

/// `term_url?version=N`
pub fn version_url(term_url: &str, version: u32) -> String {
    format!("{term_url}?version={version}")
}

/// Version metadata as of `version` (the current version when `None`).
/// `versions` must be the full dense chain for `term`.
pub fn version_metadata(
    term: &Term,
    versions: &[TermVersion],
    term_url: &str,
    version: Option<u32>,
) -> Result<VersionMetadata> {
    let at = version.unwrap_or(term.current_version);
    let entry = versions
        .iter()
        .find(|v| v.version == at)
        .ok_or_else(|| Error::not_found(format!("version {at} of {}", term.ark)))?;
    let history: Vec<&str> = versions
        .iter()
        .filter(|v| v.version < at)
        .map(|v| v.change_note.as_str())
        .collect();
    let modified = if at == term.current_version {
        term.modified
    } else {
        entry.created_at
    };
    Ok(VersionMetadata {
        created: Some(ts(term.created)),
        modified: Some(ts(modified)),
        is_replaced_by: entry.replaced_by.map(|n| version_url(term_url, n)),
        replaces: entry.replaces.map(|n| version_url(term_url, n)),
        deprecated: (term.status() == Status::Deprecated).then(|| "true".to_string()),
        prior_version: (at > 1).then(|| version_url(term_url, at - 1)),
        version_info: Some(format!("version {at}")),
        change_note: Some(entry.change_note.clone()).filter(|n| !n.is_empty()),
        history_note: (!history.is_empty()).then(|| history.join("; ")),
    })
}
