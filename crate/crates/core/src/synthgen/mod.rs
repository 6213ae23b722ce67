//! Synthetic labelled data with planted concepts, drawn from schema statistics.

mod corpus;
mod matching;

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::hmil::Label;
use crate::schema::{enumerate_paths, AtomicSchema, PathStep, SchemaNode};
use crate::value::AtomicValue;

pub use corpus::device_corpus;
pub use matching::{atomic_leaf_count, contains_subtree, excess_leaves, matched_leaves};

/// Repair rounds allowed per negative sample.
pub const REPAIR_LIMIT: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConceptKind {
    #[serde(rename = "i")]
    I,
    #[serde(rename = "ii")]
    II,
    #[serde(rename = "iii")]
    III,
    #[serde(rename = "iv")]
    IV,
    #[serde(rename = "v")]
    V,
    #[serde(rename = "vi")]
    VI,
    #[serde(rename = "vii")]
    VII,
}

impl ConceptKind {
    pub const ALL: [ConceptKind; 7] = [
        ConceptKind::I,
        ConceptKind::II,
        ConceptKind::III,
        ConceptKind::IV,
        ConceptKind::V,
        ConceptKind::VI,
        ConceptKind::VII,
    ];

    /// `(fragments, leaves per fragment)`.
    pub fn arity(&self) -> (usize, usize) {
        match self {
            ConceptKind::I => (1, 1),
            ConceptKind::II => (2, 1),
            ConceptKind::III => (5, 1),
            ConceptKind::IV => (1, 2),
            ConceptKind::V => (1, 5),
            ConceptKind::VI => (2, 2),
            ConceptKind::VII => (2, 5),
        }
    }

    pub fn paths_needed(&self) -> usize {
        let (f, l) = self.arity();
        f * l
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConceptKind::I => "i",
            ConceptKind::II => "ii",
            ConceptKind::III => "iii",
            ConceptKind::IV => "iv",
            ConceptKind::V => "v",
            ConceptKind::VI => "vi",
            ConceptKind::VII => "vii",
        }
    }
}

impl fmt::Display for ConceptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConceptKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConceptKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| {
                Error::InvalidArgument(format!("unknown concept kind {s:?} (expected i..vii)"))
            })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub kind: ConceptKind,
    pub fragments: Vec<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub sample: Value,
    pub label: Label,
    /// Fragment planted into a positive sample.
    pub inserted: Option<Value>,
}

fn draw_atomic<R: Rng + ?Sized>(a: &AtomicSchema, rng: &mut R, path: &str) -> Result<AtomicValue> {
    let hist = &a.value_histogram;
    if hist.counts.is_empty() {
        return Err(Error::EmptyStats(path.to_string()));
    }
    let values: Vec<&AtomicValue> = hist.counts.keys().collect();
    if hist.is_capped() {
        return Ok((*values.choose(rng).expect("non-empty")).clone());
    }
    let dist = WeightedIndex::new(hist.counts.values().copied())
        .map_err(|_| Error::EmptyStats(path.to_string()))?;
    Ok(values[dist.sample(rng)].clone())
}

/// Draws one document: keys independently by presence rate, list lengths from
/// the length histogram, values from the value histogram (uniformly when the
/// histogram is capped).
pub fn sample_from_schema<R: Rng + ?Sized>(schema: &SchemaNode, rng: &mut R) -> Result<Value> {
    sample_node(schema, rng, "$")
}

fn sample_node<R: Rng + ?Sized>(schema: &SchemaNode, rng: &mut R, path: &str) -> Result<Value> {
    match schema {
        SchemaNode::Atomic(a) => Ok(draw_atomic(a, rng, path)?.to_json()),
        SchemaNode::Dictionary(d) => {
            if d.node_count == 0 {
                return Err(Error::EmptyStats(path.to_string()));
            }
            let mut map = Map::new();
            for (key, child) in &d.children {
                let p = d.key_presence.get(key).copied().unwrap_or(0) as f64 / d.node_count as f64;
                if rng.random_bool(p.clamp(0.0, 1.0)) {
                    map.insert(
                        key.clone(),
                        sample_node(child, rng, &format!("{path}.{key}"))?,
                    );
                }
            }
            Ok(Value::Object(map))
        }
        SchemaNode::List(l) => {
            if l.length_histogram.is_empty() {
                return Err(Error::EmptyStats(path.to_string()));
            }
            let lengths: Vec<usize> = l.length_histogram.keys().copied().collect();
            let dist = WeightedIndex::new(l.length_histogram.values().copied())
                .map_err(|_| Error::EmptyStats(path.to_string()))?;
            let len = lengths[dist.sample(rng)];
            let mut items = Vec::with_capacity(len);
            if len > 0 {
                let item = l
                    .item
                    .as_deref()
                    .ok_or_else(|| Error::EmptyStats(format!("{path}[]")))?;
                for _ in 0..len {
                    items.push(sample_node(item, rng, &format!("{path}[]"))?);
                }
            }
            Ok(Value::Array(items))
        }
    }
}

/// Nests `leaf` under `steps`; list steps become single-item lists.
fn instantiate(steps: &[PathStep], leaf: Value) -> Value {
    steps.iter().rev().fold(leaf, |inner, step| match step {
        PathStep::Key(k) => {
            let mut m = Map::new();
            m.insert(k.clone(), inner);
            Value::Object(m)
        }
        PathStep::Item => Value::Array(vec![inner]),
    })
}

/// Merges path instantiations: shared keys recurse and single-item lists
/// share their item.
fn merge_paths(into: &mut Value, other: Value) {
    match (into, other) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                match a.get_mut(&k) {
                    Some(existing) => merge_paths(existing, v),
                    None => {
                        a.insert(k, v);
                    }
                }
            }
        }
        (Value::Array(a), Value::Array(b)) if a.len() == 1 && b.len() == 1 => {
            merge_paths(&mut a[0], b.into_iter().next().expect("one item"));
        }
        (slot, other) => *slot = other,
    }
}

/// Draws distinct schema paths, instantiates each with a histogram value and
/// merges them into the kind's fragments.
pub fn make_concept<R: Rng + ?Sized>(
    schema: &SchemaNode,
    kind: ConceptKind,
    rng: &mut R,
) -> Result<Concept> {
    let paths = enumerate_paths(schema);
    let needed = kind.paths_needed();
    if paths.len() < needed {
        return Err(Error::InsufficientPaths {
            needed,
            available: paths.len(),
        });
    }
    let chosen: Vec<_> = paths.choose_multiple(rng, needed).cloned().collect();
    let (fragments, leaves) = kind.arity();
    let mut out = Vec::with_capacity(fragments);
    for group in chosen.chunks(leaves) {
        let mut fragment: Option<Value> = None;
        for path in group {
            let atomic = path
                .terminal(schema)
                .expect("enumerated path ends in an atomic node");
            let value = draw_atomic(atomic, rng, &path.to_string())?.to_json();
            let inst = instantiate(&path.steps, value);
            match &mut fragment {
                Some(f) => merge_paths(f, inst),
                None => fragment = Some(inst),
            }
        }
        out.push(fragment.expect("non-empty group"));
    }
    Ok(Concept {
        kind,
        fragments: out,
    })
}

/// Plants `fragment` into `base`: dictionaries merge recursively, fragment
/// list items are appended, atomic values overwrite. A fragment that is
/// already contained leaves `base` untouched.
pub fn insert_fragment(base: &mut Value, fragment: &Value) {
    if contains_subtree(base, fragment) {
        return;
    }
    insert_raw(base, fragment);
}

fn insert_raw(base: &mut Value, fragment: &Value) {
    match (base, fragment) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                match a.get_mut(k) {
                    Some(existing) if !existing.is_null() => insert_raw(existing, v),
                    _ => {
                        a.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (Value::Array(a), Value::Array(b)) => a.extend(b.iter().cloned()),
        (slot, other) => *slot = other.clone(),
    }
}

#[derive(Clone, Debug)]
enum Step {
    Key(String),
    Index(usize),
}

fn value_at_mut<'a>(root: &'a mut Value, loc: &[Step]) -> &'a mut Value {
    loc.iter().fold(root, |v, s| match s {
        Step::Key(k) => v.get_mut(k.as_str()).expect("located key"),
        Step::Index(i) => v.get_mut(*i).expect("located item"),
    })
}

fn schema_at<'a>(schema: &'a SchemaNode, loc: &[Step]) -> Option<&'a SchemaNode> {
    let steps: Vec<PathStep> = loc
        .iter()
        .map(|s| match s {
            Step::Key(k) => PathStep::Key(k.clone()),
            Step::Index(_) => PathStep::Item,
        })
        .collect();
    schema.resolve(&steps)
}

/// Breaks one matched leaf of an accidental match: the value changes to a
/// different observed value, or the leaf is deleted when there is none.
fn repair<R: Rng + ?Sized>(schema: &SchemaNode, sample: &mut Value, fragment: &Value, rng: &mut R) {
    let leaves = matching::witness(sample, fragment).expect("repair is only called on a match");
    let loc = leaves
        .choose(rng)
        .expect("fragments hold at least one leaf")
        .clone();
    let current =
        AtomicValue::from_json(value_at_mut(sample, &loc)).expect("matched leaf is atomic");
    let alternatives: Vec<&AtomicValue> = schema_at(schema, &loc)
        .and_then(SchemaNode::as_atomic)
        .map(|a| {
            a.value_histogram
                .counts
                .keys()
                .filter(|v| **v != current)
                .collect()
        })
        .unwrap_or_default();
    if let Some(v) = alternatives.choose(rng) {
        *value_at_mut(sample, &loc) = v.to_json();
        return;
    }
    let (last, parent) = loc.split_last().expect("leaf below the root");
    match (value_at_mut(sample, parent), last) {
        (Value::Object(m), Step::Key(k)) => {
            m.remove(k);
        }
        (Value::Array(items), Step::Index(i)) => {
            items.remove(*i);
        }
        _ => unreachable!("location steps follow the document"),
    }
}

/// Per-sample generator seeded by `(seed, index)`.
fn stream(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// `n` labelled samples, `round(n * positive_fraction)` of them positive, in a
/// seeded random order. Every label is re-verified before returning.
pub fn generate_dataset(
    schema: &SchemaNode,
    concept: &Concept,
    n: usize,
    positive_fraction: f64,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    if !(positive_fraction > 0.0 && positive_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "positive fraction must lie in (0, 1), got {positive_fraction}"
        )));
    }
    if concept.fragments.is_empty() {
        return Err(Error::InvalidArgument("concept has no fragments".into()));
    }
    let n_pos = (n as f64 * positive_fraction).round() as usize;
    let mut labels: Vec<Label> = (0..n)
        .map(|i| if i < n_pos { Label::Pos } else { Label::Neg })
        .collect();
    labels.shuffle(&mut stream(seed, 0));
    labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| {
            let mut rng = stream(seed, i + 1);
            let mut sample = sample_from_schema(schema, &mut rng)?;
            let inserted = match label {
                Label::Pos => {
                    let fragment = concept
                        .fragments
                        .choose(&mut rng)
                        .expect("non-empty")
                        .clone();
                    insert_fragment(&mut sample, &fragment);
                    Some(fragment)
                }
                Label::Neg => {
                    let mut rounds = 0;
                    while let Some(f) = concept
                        .fragments
                        .iter()
                        .find(|f| contains_subtree(&sample, f))
                    {
                        if rounds == REPAIR_LIMIT {
                            return Err(Error::GenerationStall(REPAIR_LIMIT));
                        }
                        repair(schema, &mut sample, f, &mut rng);
                        rounds += 1;
                    }
                    None
                }
            };
            let positive = concept
                .fragments
                .iter()
                .any(|f| contains_subtree(&sample, f));
            assert_eq!(
                positive,
                label == Label::Pos,
                "label verification failed for sample {i}"
            );
            Ok(LabeledSample {
                sample,
                label,
                inserted,
            })
        })
        .collect()
}
