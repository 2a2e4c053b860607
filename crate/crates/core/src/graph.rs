//! Graph isomorphism for small RDF graphs, up to blank-node relabelling.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::ingest::{RawObject, RawTriple};

fn blanks(t: &RawTriple) -> impl Iterator<Item = &str> {
    let s = t.subject.strip_prefix("_:");
    let o = match &t.object {
        RawObject::Blank(b) => Some(b.as_str()),
        _ => None,
    };
    s.into_iter().chain(o)
}

fn is_ground(t: &RawTriple) -> bool {
    blanks(t).next().is_none()
}

fn rename(t: &RawTriple, map: &HashMap<&str, &str>) -> Option<RawTriple> {
    let subject = match t.subject.strip_prefix("_:") {
        Some(b) => format!("_:{}", map.get(b)?),
        None => t.subject.clone(),
    };
    let object = match &t.object {
        RawObject::Blank(b) => RawObject::Blank(map.get(b.as_str())?.to_string()),
        o => o.clone(),
    };
    Some(RawTriple {
        subject,
        predicate: t.predicate.clone(),
        object,
    })
}

/// Per-node signature: sorted (position, predicate, ground neighbour) list.
/// Equal signatures are necessary for two blank nodes to correspond.
fn signatures(triples: &BTreeSet<RawTriple>) -> BTreeMap<&str, Vec<String>> {
    let mut sig: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for t in triples {
        if let Some(b) = t.subject.strip_prefix("_:") {
            let o = match &t.object {
                RawObject::Blank(_) => "_".to_string(),
                o => format!("{o:?}"),
            };
            sig.entry(b).or_default().push(format!("s {} {o}", t.predicate));
        }
        if let RawObject::Blank(b) = &t.object {
            let s = if t.subject.starts_with("_:") { "_" } else { &t.subject };
            sig.entry(b.as_str())
                .or_default()
                .push(format!("o {} {s}", t.predicate));
        }
    }
    for v in sig.values_mut() {
        v.sort();
    }
    sig
}

/// True when `a` and `b` are the same set of triples after some bijective
/// renaming of blank nodes. Duplicate triples are ignored.
pub fn isomorphic(a: &[RawTriple], b: &[RawTriple]) -> bool {
    let a: BTreeSet<RawTriple> = a.iter().cloned().collect();
    let b: BTreeSet<RawTriple> = b.iter().cloned().collect();
    if a.len() != b.len() {
        return false;
    }
    let ground_a: BTreeSet<&RawTriple> = a.iter().filter(|t| is_ground(t)).collect();
    let ground_b: BTreeSet<&RawTriple> = b.iter().filter(|t| is_ground(t)).collect();
    if ground_a != ground_b {
        return false;
    }
    let sig_a = signatures(&a);
    let sig_b = signatures(&b);
    if sig_a.len() != sig_b.len() {
        return false;
    }
    let mut count_a: BTreeMap<&Vec<String>, usize> = BTreeMap::new();
    let mut count_b: BTreeMap<&Vec<String>, usize> = BTreeMap::new();
    for s in sig_a.values() {
        *count_a.entry(s).or_default() += 1;
    }
    for s in sig_b.values() {
        *count_b.entry(s).or_default() += 1;
    }
    if count_a != count_b {
        return false;
    }
    let nodes: Vec<&str> = sig_a.keys().copied().collect();
    let blank_a: Vec<&RawTriple> = a.iter().filter(|t| !is_ground(t)).collect();
    let mut map = HashMap::new();
    let mut used = BTreeSet::new();
    assign(0, &nodes, &sig_a, &sig_b, &blank_a, &b, &mut map, &mut used)
}

#[allow(clippy::too_many_arguments)]
fn assign<'a>(
    i: usize,
    nodes: &[&'a str],
    sig_a: &BTreeMap<&'a str, Vec<String>>,
    sig_b: &BTreeMap<&'a str, Vec<String>>,
    blank_a: &[&RawTriple],
    b: &BTreeSet<RawTriple>,
    map: &mut HashMap<&'a str, &'a str>,
    used: &mut BTreeSet<&'a str>,
) -> bool {
    // every triple whose blank nodes are all mapped must appear in b
    let consistent = blank_a.iter().all(|t| match rename(t, map) {
        Some(r) => b.contains(&r),
        None => true,
    });
    if !consistent {
        return false;
    }
    let Some(node) = nodes.get(i) else {
        return true;
    };
    for (cand, sig) in sig_b {
        if used.contains(cand) || *sig != sig_a[node] {
            continue;
        }
        map.insert(node, cand);
        used.insert(cand);
        if assign(i + 1, nodes, sig_a, sig_b, blank_a, b, map, used) {
            return true;
        }
        map.remove(node);
        used.remove(cand);
    }
    false
}
