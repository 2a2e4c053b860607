//! Acceptance suite. Runs every primary criterion and prints one PASS/FAIL
//! line per criterion; exits nonzero if any fails.

use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use chrono::{TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use termreg_core::ark::{Ark, VersionMetadata};
use termreg_core::clock::ManualClock;
use termreg_core::consensus::{
    applicability_decay, classify, raw_score, weighted_score, Comparison, Role, Thresholds, VoteSlate,
};
use termreg_core::graph::isomorphic;
use termreg_core::ids::{TermId, UserId};
use termreg_core::ingest::rdf::{self, ns};
use termreg_core::ingest::{FetchError, Fetcher, Format, RawObject, RawTriple};
use termreg_core::model::{Direction, Literal, Status};
use termreg_core::registry::{
    ExportFormat, ExportRequest, Inflection, InflectionBody, NewTerm, NewUser, RegistryConfig, Revision,
};
use termreg_core::Registry;

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($msg)+)),
        }
    };
}

// Published classification thresholds and prototype scale.
const CANONICAL_PERCENT: f64 = 75.0;
const DEPRECATE_PERCENT: f64 = 25.0;
const PROTOTYPE_TERMS: usize = 2_778;
const PROTOTYPE_USERS: usize = 158;

fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::new(Utc.with_ymd_and_hms(2026, 3, 2, 12, 0, 0).unwrap()))
}

fn registry() -> (Registry, Arc<ManualClock>) {
    let c = clock();
    (Registry::new(RegistryConfig::default(), c.clone()).unwrap(), c)
}

fn users(reg: &Registry, n: usize) -> Vec<UserId> {
    (0..n)
        .map(|i| reg.register_user(NewUser::new(format!("user{i}"))).unwrap().id)
        .collect()
}

fn random_slate(rng: &mut ChaCha8Rng, t: u64, v: u64, roles: bool) -> VoteSlate {
    let mut slate = VoteSlate::new(t);
    for i in 0..v {
        let role = if roles {
            [Role::Plain, Role::FollowedByCustodian, Role::Moderator][rng.gen_range(0..3)]
        } else {
            Role::Plain
        };
        let dir = if rng.gen_bool(0.5) {
            Direction::Up
        } else {
            Direction::Down
        };
        slate.push(UserId(i + 1), rng.gen_range(0.01..50.0), dir, role);
    }
    slate
}

fn weight_sum_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    for _ in 0..1000 {
        let t = rng.gen_range(1..=500u64);
        let v = rng.gen_range(1..=t);
        let slate = random_slate(&mut rng, t, v, false);
        let sum: f64 = slate.base_weights().map_err(|e| e.to_string())?.iter().sum();
        ensure!((sum - t as f64).abs() <= 1e-9 * t as f64, "t={t} v={v}: sum {sum}");
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(())
}

fn full_participation_reduction() -> Outcome {
    let th = Thresholds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bitwise = 0;
    for _ in 0..1000 {
        let t = rng.gen_range(1..=200u64);
        let slate = random_slate(&mut rng, t, t, false);
        let (u, d) = slate.up_down();
        let oracle = u as f64 / (u + d) as f64;
        let got = weighted_score(&slate, &th).map_err(|e| e.to_string())?;
        ensure!((got - oracle).abs() <= 1e-12, "t={t}: {got} vs {oracle}");
        ensure!(raw_score(u, d, &th) == oracle, "raw score disagrees with u/(u+d)");
        bitwise += usize::from(got == oracle);
    }
    println!("      {bitwise}/1000 bitwise equal, the rest within 1e-12");
    Ok(())
}

fn worked_example() -> Outcome {
    let th = Thresholds::default();
    ensure!(
        th.canonical_threshold * 100.0 == CANONICAL_PERCENT,
        "canonical default {}",
        th.canonical_threshold
    );
    ensure!(
        th.deprecate_threshold * 100.0 == DEPRECATE_PERCENT,
        "deprecate default {}",
        th.deprecate_threshold
    );

    let mut slate = VoteSlate::new(10);
    slate.push(UserId(1), 4.0, Direction::Up, Role::Plain);
    slate.push(UserId(2), 4.0, Direction::Up, Role::Plain);
    slate.push(UserId(3), 2.0, Direction::Down, Role::Plain);
    // weights in tenths: 10 + 4*7 = 38, 38, 10 + 2*7 = 24; score = 76/100
    let (up_tenths, all_tenths) = (38 + 38, 38 + 38 + 24);
    let oracle = up_tenths as f64 / all_tenths as f64;
    let score = weighted_score(&slate, &th).map_err(|e| e.to_string())?;
    ensure!((score - oracle).abs() <= 1e-12, "score {score}, expected {oracle}");
    println!("      score {score:?} (bitwise 0.76: {})", score == 0.76);
    ensure!(classify(score, 1.0, &th) == Status::Canonical, "not canonical");
    ensure!(
        classify(score, th.stability_threshold - 0.01, &th) == Status::Vernacular,
        "unstable term promoted"
    );

    let inclusive = Thresholds {
        canonical_comparison: Comparison::Inclusive,
        ..th.clone()
    };
    ensure!(
        classify(score, 1.0, &inclusive) == Status::Canonical,
        "inclusive comparison changed 0.76"
    );

    // four equal full-participation votes, three up: exactly 3/4
    let mut edge = VoteSlate::new(4);
    for (i, d) in [Direction::Up, Direction::Up, Direction::Up, Direction::Down]
        .into_iter()
        .enumerate()
    {
        edge.push(UserId(i as u64 + 1), 1.0, d, Role::Plain);
    }
    let s = weighted_score(&edge, &th).map_err(|e| e.to_string())?;
    ensure!(s == 0.75, "edge score {s}");
    ensure!(
        classify(s, 1.0, &th) == Status::Vernacular,
        "strict comparison promoted 0.75"
    );
    ensure!(
        classify(s, 1.0, &inclusive) == Status::Canonical,
        "inclusive comparison did not promote 0.75"
    );
    Ok(())
}

fn scale_invariance() -> Outcome {
    let th = Thresholds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..500 {
        let t = rng.gen_range(1..=300u64);
        let v = rng.gen_range(1..=t);
        let slate = random_slate(&mut rng, t, v, true);
        let stability = rng.gen_range(0.0..=1.0);
        let base = weighted_score(&slate, &th).map_err(|e| e.to_string())?;
        for c in [0.001, 1.0, 1000.0] {
            let mut scaled = slate.clone();
            for voter in &mut scaled.voters {
                voter.reputation *= c;
            }
            let s = weighted_score(&scaled, &th).map_err(|e| e.to_string())?;
            ensure!((s - base).abs() <= 1e-12, "c={c}: {s} vs {base}");
            ensure!(
                classify(s, stability, &th) == classify(base, stability, &th),
                "c={c}: class changed"
            );
        }
    }
    Ok(())
}

struct StubFetcher(HashMap<String, Result<Vec<u8>, FetchError>>);

impl Fetcher for StubFetcher {
    fn fetch(&self, url: &str, _: Duration) -> Result<Vec<u8>, FetchError> {
        self.0
            .get(url)
            .cloned()
            .unwrap_or_else(|| Err(FetchError("no route".into())))
    }
}

fn one_element(url: &str) -> String {
    format!(
        "@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n<{url}#e> rdfs:label \"Element of {url}\" ; rdfs:comment \"Defined at {url}.\" .\n"
    )
}

fn stability_audit() -> Outcome {
    let (reg, _) = registry();
    let u = users(&reg, 1)[0];
    let urls = [
        "http://example.org/same",
        "http://example.org/edited",
        "http://example.org/gone",
    ];
    let mut terms = Vec::new();
    for url in urls {
        let imp = reg
            .import_schema(u, one_element(url).as_bytes(), Format::Turtle, Some(url))
            .map_err(|e| e.to_string())?;
        terms.push(imp.created[0]);
    }
    let stub = StubFetcher(HashMap::from([
        (urls[0].to_string(), Ok(one_element(urls[0]).into_bytes())),
        (urls[1].to_string(), Ok(b"rewritten".to_vec())),
        (urls[2].to_string(), Err(FetchError("connection refused".into()))),
    ]));
    let before: Vec<f64> = terms.iter().map(|t| reg.term(*t).unwrap().stability_score()).collect();
    ensure!(before == vec![1.0; 3], "imports start at {before:?}");
    reg.audit_sources(&stub).map_err(|e| e.to_string())?;
    reg.drain_queue();
    let expected = [0.0, -0.10, -0.35];
    for (i, t) in terms.iter().enumerate() {
        let delta = reg.term(*t).unwrap().stability_score() - 1.0;
        ensure!(
            (delta - expected[i]).abs() <= 1e-12,
            "source {i}: delta {delta}, expected {}",
            expected[i]
        );
    }
    let flagged: Vec<bool> = terms.iter().map(|t| reg.term(*t).unwrap().flagged()).collect();
    ensure!(flagged == vec![false, true, false], "flags {flagged:?}");
    Ok(())
}

fn decay() -> Outcome {
    let th = Thresholds::default();
    let half = th.applicability_half_life_days;
    let got = applicability_decay(0.8, half, &th);
    ensure!((got - 0.4).abs() <= 1e-9, "0.8 after one half-life gave {got}");
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let x = rng.gen_range(0.0..=1.0);
        let total = rng.gen_range(0.0..2000.0);
        let a = rng.gen_range(0.0..=total);
        let split = applicability_decay(applicability_decay(x, a, &th), total - a, &th);
        let whole = applicability_decay(x, total, &th);
        ensure!(
            (split - whole).abs() <= 1e-12,
            "x={x} a={a} total={total}: {split} vs {whole}"
        );
    }

    // the sweep applies the same decay to an untouched term
    let (reg, clock) = registry();
    let u = users(&reg, 1)[0];
    let t = reg
        .propose_term(u, NewTerm::new("Coverage", "Spatial or temporal extent."))
        .map_err(|e| e.to_string())?;
    reg.drain_queue();
    let a0 = reg.term(t.id).unwrap().applicability_score();
    clock.advance_days(half);
    reg.run_sweep(&StubFetcher(HashMap::new())).map_err(|e| e.to_string())?;
    let a1 = reg.term(t.id).unwrap().applicability_score();
    ensure!((a1 - a0 / 2.0).abs() <= 1e-9, "sweep: {a0} -> {a1}");
    Ok(())
}

const BASE: &str = "http://example.org/elements/";

/// (local name, label, definition)
const ELEMENTS: [(&str, &str, &str); 18] = [
    ("contributor", "Contributor", "An entity that helped make the resource."),
    ("coverage", "Coverage", "Where or when the resource applies."),
    ("creator", "Creator", "The entity chiefly responsible for the resource."),
    ("date", "Date", "A point or period in the resource's life."),
    ("definition", "Definition", "A statement of what a term means."),
    ("description", "Description", "An account of the resource."),
    ("format", "Format", "The medium or file type of the resource."),
    ("identifier", "Identifier", "An unambiguous reference to the resource."),
    ("label", "Label", "A short human-readable name."),
    ("language", "Language", "The language of the resource."),
    ("name", "Name", "What something is called."),
    (
        "publisher",
        "Publisher",
        "The entity that makes the resource available.",
    ),
    ("relation", "Relation", "A related resource."),
    ("rights", "Rights", "Rights held in and over the resource."),
    ("source", "Source", "A resource this one derives from."),
    ("subject", "Subject", "The topic of the resource."),
    ("title", "Title", "The name given to the resource."),
    ("uri", "URI", "A uniform resource identifier for the resource."),
];

/// (subject, predicate, object) among elements, plus one literal and one
/// external IRI.
fn relations() -> Vec<(String, String, RawObject)> {
    let e = |n: &str| format!("{BASE}{n}");
    let sub = ns::RDFS_SUB_PROPERTY_OF.to_string();
    vec![
        (e("creator"), sub.clone(), RawObject::Iri(e("contributor"))),
        (e("title"), sub.clone(), RawObject::Iri(e("name"))),
        (e("label"), sub.clone(), RawObject::Iri(e("name"))),
        (e("uri"), sub.clone(), RawObject::Iri(e("identifier"))),
        (e("definition"), sub, RawObject::Iri(e("description"))),
        (
            e("rights"),
            e("note"),
            RawObject::Literal(Literal {
                value: "see the licence".into(),
                datatype: ns::RDF_LANG_STRING.into(),
                language: Some("en".into()),
            }),
        ),
        (
            e("subject"),
            e("page"),
            RawObject::Iri("http://example.org/subjects".into()),
        ),
    ]
}

fn fixture_turtle() -> String {
    let mut s = String::from("@prefix rdfs: <http://www.w3.org/2000/01/rdf-schema#> .\n");
    for (local, label, def) in ELEMENTS {
        s.push_str(&format!(
            "<{BASE}{local}> rdfs:label \"{label}\" ; rdfs:comment \"{def}\" .\n"
        ));
    }
    for (subject, predicate, object) in relations() {
        let o = match object {
            RawObject::Iri(i) => format!("<{i}>"),
            RawObject::Literal(l) => format!("\"{}\"@{}", l.value, l.language.unwrap()),
            RawObject::Blank(b) => format!("_:{b}"),
        };
        s.push_str(&format!("<{subject}> <{predicate}> {o} .\n"));
    }
    s
}

/// The fixture's descriptive graph with element IRIs replaced by registry
/// term IRIs; labels and definitions under `label`/`definition`.
fn expected_graph(reg: &Registry, label: &str, definition: &str) -> Vec<RawTriple> {
    let by_iri: HashMap<String, String> = reg
        .term_ids()
        .into_iter()
        .map(|id| reg.term(id).unwrap())
        .filter_map(|t| t.iri.clone().map(|i| (i, reg.ark_url(&t.ark))))
        .collect();
    let rename = |i: &str| by_iri.get(i).cloned().unwrap_or_else(|| i.to_string());
    let mut out = Vec::new();
    for (local, l, d) in ELEMENTS {
        let s = rename(&format!("{BASE}{local}"));
        for (p, v) in [(label, l), (definition, d)] {
            out.push(RawTriple {
                subject: s.clone(),
                predicate: p.into(),
                object: RawObject::Literal(Literal::string(v)),
            });
        }
    }
    for (subject, predicate, object) in relations() {
        let object = match object {
            RawObject::Iri(i) => RawObject::Iri(rename(&i)),
            o => o,
        };
        out.push(RawTriple {
            subject: rename(&subject),
            predicate: rename(&predicate),
            object,
        });
    }
    out
}

fn descriptive(triples: Vec<RawTriple>, label: &str, definition: &str) -> Vec<RawTriple> {
    triples
        .into_iter()
        .filter(|t| t.predicate == label || t.predicate == definition || !rdf::is_metadata_predicate(&t.predicate))
        .collect()
}

fn round_trip() -> Outcome {
    let (reg, _) = registry();
    let u = users(&reg, 1)[0];
    let imp = reg
        .import_schema(
            u,
            fixture_turtle().as_bytes(),
            Format::Turtle,
            Some("http://example.org/elements"),
        )
        .map_err(|e| e.to_string())?;
    ensure!(imp.created.len() == 18, "created {}", imp.created.len());
    let labels: BTreeSet<String> = imp.created.iter().map(|id| reg.term(*id).unwrap().label).collect();
    let wanted: BTreeSet<String> = ELEMENTS.iter().map(|e| e.1.to_string()).collect();
    ensure!(labels == wanted, "labels {labels:?}");

    for (export, input, label, definition) in [
        (ExportFormat::Rdf, Format::RdfXml, ns::RDFS_LABEL, ns::RDFS_COMMENT),
        (
            ExportFormat::Skos,
            Format::Skos,
            ns::SKOS_PREF_LABEL,
            ns::SKOS_DEFINITION,
        ),
    ] {
        let doc = reg.export(&ExportRequest::new(export)).map_err(|e| e.to_string())?;
        let got = rdf::parse_triples(&doc, input, None).map_err(|e| format!("{export}: {e}"))?;
        ensure!(
            isomorphic(
                &descriptive(got.clone(), label, definition),
                &expected_graph(&reg, label, definition)
            ),
            "{export}: exported graph differs from the fixture"
        );
        let (terms, triples) = (reg.term_count(), reg.triples().len());
        let again = reg
            .import_schema(u, &doc, input, None)
            .map_err(|e| format!("{export} re-import: {e}"))?;
        ensure!(
            again.created.is_empty(),
            "{export}: re-import created {} terms",
            again.created.len()
        );
        ensure!(
            again.triples_added == 0,
            "{export}: re-import added {} triples",
            again.triples_added
        );
        ensure!(
            reg.term_count() == terms && reg.triples().len() == triples,
            "{export}: store grew"
        );
        let redoc = reg.export(&ExportRequest::new(export)).map_err(|e| e.to_string())?;
        let regot = rdf::parse_triples(&redoc, input, None).map_err(|e| e.to_string())?;
        ensure!(isomorphic(&got, &regot), "{export}: export after re-import differs");
    }
    Ok(())
}

fn hyphenate(ark: &str) -> String {
    // "ark:/99999/y20001m" -> "ark:/99999/y2-0001-m"
    let (head, name) = ark.rsplit_once('/').unwrap();
    let chars: Vec<char> = name.chars().collect();
    let mut out = String::new();
    for (i, c) in chars.iter().enumerate() {
        if i == 2 || i + 1 == chars.len() {
            out.push('-');
        }
        out.push(*c);
    }
    format!("{head}/{out}")
}

fn expected_keys(reg: &Registry, id: TermId) -> BTreeSet<&'static str> {
    let t = reg.term(id).unwrap();
    let versions = reg.versions(id).unwrap();
    let current = versions.iter().find(|v| v.version == t.current_version).unwrap();
    let mut keys = BTreeSet::from(["dcterms:created", "dcterms:modified", "owl:versionInfo"]);
    if t.current_version > 1 {
        keys.extend(["owl:priorVersion", "dcterms:replaces", "skos:historyNote"]);
    }
    if !current.change_note.is_empty() {
        keys.insert("skos:changeNote");
    }
    if t.status() == Status::Deprecated {
        keys.insert("owl:deprecated");
    }
    keys
}

fn ark_suite() -> Outcome {
    let (reg, _) = registry();
    let people = users(&reg, 8);
    let start = Instant::now();
    let arks: Vec<(TermId, String)> = std::thread::scope(|s| {
        let handles: Vec<_> = people
            .iter()
            .enumerate()
            .map(|(w, u)| {
                let reg = &reg;
                s.spawn(move || {
                    (0..1250)
                        .map(|i| {
                            let t = reg
                                .propose_term(*u, NewTerm::new(format!("term {w} {i}"), format!("Meaning {w}/{i}.")))
                                .unwrap();
                            (t.id, t.ark)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().unwrap()).collect()
    });
    println!("      10,000 mints on 8 threads in {:.2?}", start.elapsed());
    ensure!(arks.len() == 10_000, "{} mints", arks.len());
    let unique: BTreeSet<&String> = arks.iter().map(|(_, a)| a).collect();
    ensure!(unique.len() == 10_000, "{} unique", unique.len());
    for (id, ark) in &arks {
        let parsed: Ark = ark.parse().map_err(|e| format!("{ark}: {e}"))?;
        ensure!(parsed.to_string() == *ark, "{ark} does not print canonically");
        ensure!(
            reg.term_id_by_ark(ark).ok() == Some(*id),
            "{ark} does not resolve to its term"
        );
        ensure!(
            reg.term_id_by_ark(&hyphenate(ark)).ok() == Some(*id),
            "{} does not resolve",
            hyphenate(ark)
        );
    }

    // deprecated, revised and fresh fixtures
    let (fresh, revised, deprecated) = (arks[0].0, arks[1].0, arks[2].0);
    let owner = reg.term(revised).unwrap().contributor;
    reg.revise_term(
        owner,
        revised,
        Revision {
            definition: Some("A clearer meaning.".into()),
            change_note: "clarify".into(),
            ..Revision::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let dep_owner = reg.term(deprecated).unwrap().contributor;
    for voter in people.iter().filter(|p| **p != dep_owner) {
        reg.record_vote(*voter, deprecated, Direction::Down)
            .map_err(|e| e.to_string())?;
    }
    reg.drain_queue();
    ensure!(
        reg.term(deprecated).unwrap().status() == Status::Deprecated,
        "fixture not deprecated"
    );

    for id in [fresh, revised, deprecated] {
        let ark = reg.term(id).unwrap().ark;
        let a = reg.inflect(&ark, Inflection::Statement).map_err(|e| e.to_string())?;
        let b = reg.inflect(&ark, Inflection::Statement).map_err(|e| e.to_string())?;
        ensure!(matches!(a, InflectionBody::Statement { .. }), "{ark}?: wrong body");
        ensure!(
            serde_json::to_string(&a).unwrap() == serde_json::to_string(&b).unwrap(),
            "{ark}?: statement not deterministic"
        );
        let InflectionBody::StatementWithVersions {
            version_metadata: Some(meta),
            ..
        } = reg
            .inflect(&ark, Inflection::StatementWithVersions)
            .map_err(|e| e.to_string())?
        else {
            return Err(format!("{ark}??: no version metadata"));
        };
        let keys: BTreeSet<&str> = meta.entries().into_iter().map(|(k, _)| k).collect();
        ensure!(keys == expected_keys(&reg, id), "{ark}??: keys {keys:?}");
        ensure!(
            keys.iter().all(|k| VersionMetadata::KEYS.contains(k)),
            "{ark}??: unknown key"
        );
        let dep = meta
            .entries()
            .into_iter()
            .find(|(k, _)| *k == "owl:deprecated")
            .map(|(_, v)| v.to_string());
        let want = (id == deprecated).then(|| "true".to_string());
        ensure!(dep == want, "{ark}??: owl:deprecated = {dep:?}");
    }
    Ok(())
}

fn desk_scale_load() -> Outcome {
    let (reg, _) = registry();
    let people = users(&reg, PROTOTYPE_USERS);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut terms = Vec::with_capacity(PROTOTYPE_TERMS);
    for i in 0..PROTOTYPE_TERMS {
        let by = people[rng.gen_range(0..people.len())];
        terms.push(
            reg.propose_term(by, NewTerm::new(format!("load term {i}"), format!("Meaning {i}.")))
                .unwrap(),
        );
    }
    let mut votes = 0;
    for t in &terms {
        for _ in 0..rng.gen_range(0..12) {
            let voter = people[rng.gen_range(0..people.len())];
            if voter == t.contributor {
                continue;
            }
            let d = if rng.gen_bool(0.6) {
                Direction::Up
            } else {
                Direction::Down
            };
            reg.record_vote(voter, t.id, d).map_err(|e| e.to_string())?;
            votes += 1;
        }
    }
    reg.drain_queue();
    let fetcher = StubFetcher(HashMap::new());
    let start = Instant::now();
    let report = reg.run_sweep(&fetcher).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    println!(
        "      {} users, {} terms, {votes} votes; sweep of {} events in {took:.2?}",
        reg.user_count(),
        reg.term_count(),
        report.events_processed
    );
    ensure!(took < Duration::from_secs(10), "sweep took {took:?}");
    let snapshot =
        || -> Vec<termreg_core::model::Term> { reg.term_ids().into_iter().map(|id| reg.term(id).unwrap()).collect() };
    let first = snapshot();
    for t in &first {
        for s in [t.consensus_score(), t.stability_score(), t.applicability_score()] {
            ensure!((0.0..=1.0).contains(&s), "{}: score {s} out of range", t.ark);
        }
    }
    reg.run_sweep(&fetcher).map_err(|e| e.to_string())?;
    ensure!(snapshot() == first, "replaying the sweep changed stored terms");
    Ok(())
}

fn suite_needs_no_ui() -> Outcome {
    let crates = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("..");
    let members: Vec<String> = std::fs::read_dir(&crates)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    ensure!(
        !members.iter().any(|m| m.contains("web") || m.contains("ui")),
        "a UI crate is present: {members:?}"
    );
    Ok(())
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("weight-sum identity", weight_sum_identity),
        ("full-participation reduction", full_participation_reduction),
        ("worked example and threshold strictness", worked_example),
        ("scale invariance", scale_invariance),
        ("stability audit", stability_audit),
        ("applicability decay", decay),
        ("18-term round-trip", round_trip),
        ("ARK suite", ark_suite),
        ("desk-scale load", desk_scale_load),
        ("suite runs without a UI build", suite_needs_no_ui),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(check)) {
            Ok(r) => r,
            Err(p) => Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into())),
        };
        match outcome {
            Ok(()) => println!("PASS  {name} ({:.2?})", start.elapsed()),
            Err(msg) => {
                failed += 1;
                println!("FAIL  {name}: {msg}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
