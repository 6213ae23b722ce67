//! Schema inference over a corpus of JSON documents.
//!
//! The schema is the recursive union of all documents: dictionary keys are
//! unioned with presence counts, every list item of every document is folded
//! into a single item schema, and atomic positions accumulate value histograms.
//! Lists are assumed homogeneous; a position holding two different variants is
//! rejected with [`Error::MixedType`].

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::sample::{Edge, NodeKind, Sample};
use crate::value::{AtomicValue, ValueKind};

/// Distinct values kept per atomic histogram before further values only
/// count towards the overflow.
pub const HISTOGRAM_CAP: usize = 10_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SchemaNode {
    Dictionary(DictSchema),
    List(ListSchema),
    Atomic(AtomicSchema),
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DictSchema {
    pub children: BTreeMap<String, SchemaNode>,
    pub key_presence: BTreeMap<String, u64>,
    pub node_count: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ListSchema {
    /// `None` until a non-empty list has been observed.
    pub item: Option<Box<SchemaNode>>,
    #[serde(with = "pairs")]
    pub length_histogram: BTreeMap<usize, u64>,
    pub node_count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomicSchema {
    pub value_kind: ValueKind,
    pub value_histogram: Histogram,
    pub unique_count: u64,
    pub observation_count: u64,
}

/// Value counts truncated to the `cap` smallest distinct values.
///
/// Keeping the smallest values (rather than the first seen) makes the truncated
/// histogram independent of document order and of how the corpus is sharded.
/// Observations of evicted values are tallied in `overflow`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    #[serde(with = "pairs")]
    pub counts: BTreeMap<AtomicValue, u64>,
    pub overflow: u64,
}

mod pairs {
    use super::*;
    use serde::{Deserializer, Serializer};

    use serde::de::DeserializeOwned;

    pub fn serialize<K: Serialize, S: Serializer>(
        map: &BTreeMap<K, u64>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, K: DeserializeOwned + Ord, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<K, u64>, D::Error> {
        let v: Vec<(K, u64)> = Vec::deserialize(d)?;
        Ok(v.into_iter().collect())
    }
}

impl Histogram {
    pub fn is_capped(&self) -> bool {
        self.overflow > 0
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    fn add(&mut self, value: AtomicValue, count: u64, cap: usize) {
        *self.counts.entry(value).or_insert(0) += count;
        self.truncate(cap);
    }

    fn truncate(&mut self, cap: usize) {
        while self.counts.len() > cap {
            let (_, c) = self.counts.pop_last().expect("non-empty histogram");
            self.overflow += c;
        }
    }
}

impl AtomicSchema {
    fn empty(kind: ValueKind) -> Self {
        AtomicSchema {
            value_kind: kind,
            value_histogram: Histogram::default(),
            unique_count: 0,
            observation_count: 0,
        }
    }

    fn refresh_unique(&mut self) {
        // Exact below the cap; an upper bound once values have overflowed.
        self.unique_count =
            self.value_histogram.counts.len() as u64 + self.value_histogram.overflow;
    }
}

impl SchemaNode {
    pub fn variant_name(&self) -> String {
        match self {
            SchemaNode::Dictionary(_) => "Dictionary".into(),
            SchemaNode::List(_) => "List".into(),
            SchemaNode::Atomic(a) => format!("Atomic({})", a.value_kind),
        }
    }

    /// Number of times this position was observed.
    pub fn node_count(&self) -> u64 {
        match self {
            SchemaNode::Dictionary(d) => d.node_count,
            SchemaNode::List(l) => l.node_count,
            SchemaNode::Atomic(a) => a.observation_count,
        }
    }

    /// Total number of schema nodes, including this one.
    pub fn size(&self) -> usize {
        match self {
            SchemaNode::Dictionary(d) => {
                1 + d.children.values().map(SchemaNode::size).sum::<usize>()
            }
            SchemaNode::List(l) => 1 + l.item.as_ref().map_or(0, |i| i.size()),
            SchemaNode::Atomic(_) => 1,
        }
    }

    pub fn as_atomic(&self) -> Option<&AtomicSchema> {
        match self {
            SchemaNode::Atomic(a) => Some(a),
            _ => None,
        }
    }

    /// Walks `path` from this node; `None` if a step does not exist.
    pub fn resolve(&self, steps: &[PathStep]) -> Option<&SchemaNode> {
        let mut node = self;
        for step in steps {
            node = match (node, step) {
                (SchemaNode::Dictionary(d), PathStep::Key(k)) => d.children.get(k)?,
                (SchemaNode::List(l), PathStep::Item) => l.item.as_deref()?,
                _ => return None,
            };
        }
        Some(node)
    }
}

#[derive(Clone, Debug)]
pub struct InferOptions {
    pub histogram_cap: usize,
}

impl Default for InferOptions {
    fn default() -> Self {
        InferOptions {
            histogram_cap: HISTOGRAM_CAP,
        }
    }
}

/// Incrementally builds a schema one document at a time.
#[derive(Clone, Debug, Default)]
pub struct SchemaBuilder {
    root: Option<SchemaNode>,
    options: InferOptions,
    documents: usize,
}

impl SchemaBuilder {
    pub fn new(options: InferOptions) -> Self {
        SchemaBuilder {
            root: None,
            options,
            documents: 0,
        }
    }

    pub fn observe(&mut self, doc: &Value) -> Result<()> {
        if doc.is_null() {
            return Err(Error::MixedType {
                path: "$".into(),
                expected: "a document".into(),
                found: "null".into(),
            });
        }
        let cap = self.options.histogram_cap;
        match &mut self.root {
            Some(root) => observe(root, doc, "$", cap)?,
            None => {
                let mut root = fresh(doc, "$")?;
                observe(&mut root, doc, "$", cap)?;
                self.root = Some(root);
            }
        }
        self.documents += 1;
        Ok(())
    }

    pub fn documents(&self) -> usize {
        self.documents
    }

    pub fn finish(self) -> Result<SchemaNode> {
        self.root.ok_or(Error::EmptyCorpus)
    }
}

pub fn infer_schema<'a>(corpus: impl IntoIterator<Item = &'a Value>) -> Result<SchemaNode> {
    infer_schema_with(corpus, &InferOptions::default())
}

pub fn infer_schema_with<'a>(
    corpus: impl IntoIterator<Item = &'a Value>,
    options: &InferOptions,
) -> Result<SchemaNode> {
    let mut builder = SchemaBuilder::new(options.clone());
    for doc in corpus {
        builder.observe(doc)?;
    }
    builder.finish()
}

/// Reads a JSON-lines corpus, skipping blank lines.
pub fn read_jsonl(text: &str) -> Result<Vec<Value>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|source| Error::Parse {
                line: i + 1,
                source,
            })
        })
        .collect()
}

fn fresh(value: &Value, path: &str) -> Result<SchemaNode> {
    Ok(match value {
        Value::Object(_) => SchemaNode::Dictionary(DictSchema::default()),
        Value::Array(_) => SchemaNode::List(ListSchema::default()),
        other => {
            let kind = AtomicValue::from_json(other)
                .ok_or_else(|| Error::MixedType {
                    path: path.into(),
                    expected: "a value".into(),
                    found: "null".into(),
                })?
                .kind();
            SchemaNode::Atomic(AtomicSchema::empty(kind))
        }
    })
}

fn json_variant(value: &Value) -> String {
    match value {
        Value::Object(_) => "Dictionary".into(),
        Value::Array(_) => "List".into(),
        other => match AtomicValue::from_json(other) {
            Some(v) => format!("Atomic({})", v.kind()),
            None => "null".into(),
        },
    }
}

fn observe(node: &mut SchemaNode, value: &Value, path: &str, cap: usize) -> Result<()> {
    match (node, value) {
        (SchemaNode::Dictionary(d), Value::Object(map)) => {
            d.node_count += 1;
            for (k, v) in map {
                if v.is_null() {
                    continue;
                }
                let child_path = format!("{path}.{k}");
                if !d.children.contains_key(k) {
                    d.children.insert(k.clone(), fresh(v, &child_path)?);
                }
                let child = d.children.get_mut(k).expect("inserted above");
                observe(child, v, &child_path, cap)?;
                *d.key_presence.entry(k.clone()).or_insert(0) += 1;
            }
        }
        (SchemaNode::List(l), Value::Array(items)) => {
            l.node_count += 1;
            let item_path = format!("{path}[]");
            let mut len = 0;
            for item in items.iter().filter(|v| !v.is_null()) {
                let schema = match &mut l.item {
                    Some(s) => s,
                    None => l.item.insert(Box::new(fresh(item, &item_path)?)),
                };
                observe(schema, item, &item_path, cap)?;
                len += 1;
            }
            *l.length_histogram.entry(len).or_insert(0) += 1;
        }
        (SchemaNode::Atomic(a), v) => {
            let found = AtomicValue::from_json(v).filter(|x| x.kind() == a.value_kind);
            let Some(x) = found else {
                return Err(Error::MixedType {
                    path: path.into(),
                    expected: format!("Atomic({})", a.value_kind),
                    found: json_variant(v),
                });
            };
            a.observation_count += 1;
            a.value_histogram.add(x, 1, cap);
            a.refresh_unique();
        }
        (node, v) => {
            return Err(Error::MixedType {
                path: path.into(),
                expected: node.variant_name(),
                found: json_variant(v),
            })
        }
    }
    Ok(())
}

/// Adds the statistics of two schemas. `merge_schema(infer(X), infer(Y))`
/// equals `infer(X ++ Y)`.
pub fn merge_schema(a: &SchemaNode, b: &SchemaNode) -> Result<SchemaNode> {
    merge_schema_with(a, b, &InferOptions::default())
}

pub fn merge_schema_with(
    a: &SchemaNode,
    b: &SchemaNode,
    options: &InferOptions,
) -> Result<SchemaNode> {
    merge_at(a, b, "$", options.histogram_cap)
}

fn merge_at(a: &SchemaNode, b: &SchemaNode, path: &str, cap: usize) -> Result<SchemaNode> {
    Ok(match (a, b) {
        (SchemaNode::Dictionary(x), SchemaNode::Dictionary(y)) => {
            let mut out = x.clone();
            out.node_count += y.node_count;
            for (k, c) in &y.key_presence {
                *out.key_presence.entry(k.clone()).or_insert(0) += c;
            }
            for (k, child) in &y.children {
                let merged = match x.children.get(k) {
                    Some(existing) => merge_at(existing, child, &format!("{path}.{k}"), cap)?,
                    None => child.clone(),
                };
                out.children.insert(k.clone(), merged);
            }
            SchemaNode::Dictionary(out)
        }
        (SchemaNode::List(x), SchemaNode::List(y)) => {
            let mut out = x.clone();
            out.node_count += y.node_count;
            for (len, c) in &y.length_histogram {
                *out.length_histogram.entry(*len).or_insert(0) += c;
            }
            out.item = match (&x.item, &y.item) {
                (Some(i), Some(j)) => Some(Box::new(merge_at(i, j, &format!("{path}[]"), cap)?)),
                (i, j) => i.clone().or_else(|| j.clone()),
            };
            SchemaNode::List(out)
        }
        (SchemaNode::Atomic(x), SchemaNode::Atomic(y)) if x.value_kind == y.value_kind => {
            let mut out = x.clone();
            out.observation_count += y.observation_count;
            out.value_histogram.overflow += y.value_histogram.overflow;
            for (v, c) in &y.value_histogram.counts {
                *out.value_histogram.counts.entry(v.clone()).or_insert(0) += c;
            }
            out.value_histogram.truncate(cap);
            out.refresh_unique();
            SchemaNode::Atomic(out)
        }
        (x, y) => {
            return Err(Error::MixedType {
                path: path.into(),
                expected: x.variant_name(),
                found: y.variant_name(),
            })
        }
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    UnknownKey(String),
    /// A list item where the schema has never seen a list item.
    UnknownItem,
    VariantMismatch {
        expected: String,
        found: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub kind: ViolationKind,
}

/// Structural violations of `sample` against `schema`. Missing keys are allowed;
/// unknown keys and variant or kind mismatches are reported.
pub fn validate(sample: &Sample, schema: &SchemaNode) -> Vec<Violation> {
    let mut out = Vec::new();
    validate_node(sample, 0, schema, &mut out);
    out
}

fn sample_variant(kind: &NodeKind) -> String {
    match kind {
        NodeKind::Dict(_) => "Dictionary".into(),
        NodeKind::List(_) => "List".into(),
        NodeKind::Leaf(v) => format!("Atomic({})", v.kind()),
    }
}

fn validate_node(sample: &Sample, id: usize, schema: &SchemaNode, out: &mut Vec<Violation>) {
    let node = sample.node(id);
    match (&node.kind, schema) {
        (NodeKind::Dict(children), SchemaNode::Dictionary(d)) => {
            for &c in children {
                let Edge::Key(k) = &sample.node(c).edge else {
                    unreachable!()
                };
                match d.children.get(k) {
                    Some(child) => validate_node(sample, c, child, out),
                    None => out.push(Violation {
                        path: sample.path(c),
                        kind: ViolationKind::UnknownKey(k.clone()),
                    }),
                }
            }
        }
        (NodeKind::List(children), SchemaNode::List(l)) => {
            for &c in children {
                match &l.item {
                    Some(item) => validate_node(sample, c, item, out),
                    None => out.push(Violation {
                        path: sample.path(c),
                        kind: ViolationKind::UnknownItem,
                    }),
                }
            }
        }
        (NodeKind::Leaf(v), SchemaNode::Atomic(a)) if v.kind() == a.value_kind => {}
        (kind, schema) => out.push(Violation {
            path: sample.path(id),
            kind: ViolationKind::VariantMismatch {
                expected: schema.variant_name(),
                found: sample_variant(kind),
            },
        }),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PathStep {
    Key(String),
    Item,
}

/// A root-to-atomic-node walk through the schema.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SchemaPath {
    pub steps: Vec<PathStep>,
}

impl SchemaPath {
    pub fn terminal<'a>(&self, root: &'a SchemaNode) -> Option<&'a AtomicSchema> {
        root.resolve(&self.steps).and_then(SchemaNode::as_atomic)
    }
}

impl fmt::Display for SchemaPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self
            .steps
            .iter()
            .map(|s| match s {
                PathStep::Key(k) => k.as_str(),
                PathStep::Item => "[]",
            })
            .collect();
        f.write_str(&parts.join("/"))
    }
}

/// One path per atomic node, keys in lexicographic order, depth first.
pub fn enumerate_paths(schema: &SchemaNode) -> Vec<SchemaPath> {
    let mut out = Vec::new();
    let mut steps = Vec::new();
    collect_paths(schema, &mut steps, &mut out);
    out
}

fn collect_paths(node: &SchemaNode, steps: &mut Vec<PathStep>, out: &mut Vec<SchemaPath>) {
    match node {
        SchemaNode::Atomic(_) => out.push(SchemaPath {
            steps: steps.clone(),
        }),
        SchemaNode::Dictionary(d) => {
            for (k, child) in &d.children {
                steps.push(PathStep::Key(k.clone()));
                collect_paths(child, steps, out);
                steps.pop();
            }
        }
        SchemaNode::List(l) => {
            if let Some(item) = &l.item {
                steps.push(PathStep::Item);
                collect_paths(item, steps, out);
                steps.pop();
            }
        }
    }
}

/// Indented listing with per-node presence and uniqueness statistics.
pub fn pretty(schema: &SchemaNode) -> String {
    let mut out = String::new();
    pretty_node(schema, None, 0, &mut out);
    out
}

fn pretty_node(node: &SchemaNode, key: Option<&str>, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    let label = key.map(|k| format!("{k}: ")).unwrap_or_default();
    match node {
        SchemaNode::Dictionary(d) => {
            let _ = writeln!(out, "{pad}{label}[Dict] (present {} times)", d.node_count);
            for (k, child) in &d.children {
                pretty_node(child, Some(k), indent + 1, out);
            }
        }
        SchemaNode::List(l) => {
            let _ = writeln!(out, "{pad}{label}[List] (present {} times)", l.node_count);
            if let Some(item) = &l.item {
                pretty_node(item, None, indent + 1, out);
            }
        }
        SchemaNode::Atomic(a) => {
            let unique = if a.value_histogram.is_capped() {
                format!("{}+", a.value_histogram.counts.len())
            } else {
                a.unique_count.to_string()
            };
            let _ = writeln!(
                out,
                "{pad}{label}{} ({unique} unique out of {})",
                a.value_kind, a.observation_count
            );
        }
    }
}

/// A stable digest of the schema's structure and of everything an encoder is
/// chosen from. Counts that do not influence the model are excluded.
pub fn fingerprint(schema: &SchemaNode) -> String {
    use sha2::{Digest, Sha256};
    let mut text = String::new();
    fingerprint_text(schema, &mut text);
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn fingerprint_text(node: &SchemaNode, out: &mut String) {
    match node {
        SchemaNode::Dictionary(d) => {
            out.push_str("D{");
            for (k, child) in &d.children {
                let _ = write!(out, "{k:?}:");
                fingerprint_text(child, out);
                out.push(',');
            }
            out.push('}');
        }
        SchemaNode::List(l) => {
            out.push_str("L[");
            if let Some(item) = &l.item {
                fingerprint_text(item, out);
            }
            out.push(']');
        }
        SchemaNode::Atomic(a) => {
            let _ = write!(
                out,
                "A({},{})",
                a.value_kind,
                crate::encode::choose_encoder(a).describe()
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn dict(s: &SchemaNode) -> &DictSchema {
        match s {
            SchemaNode::Dictionary(d) => d,
            other => panic!("expected dictionary, got {other:?}"),
        }
    }

    fn atomic<'a>(s: &'a SchemaNode, key: &str) -> &'a AtomicSchema {
        dict(s).children[key].as_atomic().unwrap()
    }

    #[test]
    fn union_of_two_documents() {
        let docs = [json!({"a": 1}), json!({"a": 2, "b": "x"})];
        let s = infer_schema(&docs).unwrap();
        let d = dict(&s);
        assert_eq!(d.node_count, 2);
        assert_eq!(d.key_presence["a"], 2);
        assert_eq!(d.key_presence["b"], 1);
        let a = atomic(&s, "a");
        assert_eq!(
            (a.value_kind, a.unique_count, a.observation_count),
            (ValueKind::Number, 2, 2)
        );
        let b = atomic(&s, "b");
        assert_eq!(
            (b.value_kind, b.unique_count, b.observation_count),
            (ValueKind::String, 1, 1)
        );
    }

    #[test]
    fn list_items_fold_into_one_item_schema() {
        let docs = [json!({"s": [1, 2]}), json!({"s": [3]})];
        let s = infer_schema(&docs).unwrap();
        let SchemaNode::List(l) = &dict(&s).children["s"] else {
            panic!()
        };
        let item = l.item.as_ref().unwrap().as_atomic().unwrap();
        assert_eq!((item.unique_count, item.observation_count), (3, 3));
        assert_eq!(l.length_histogram, BTreeMap::from([(1, 1), (2, 1)]));
        assert_eq!(l.node_count, 2);
    }

    #[test]
    fn conflicting_variants_are_rejected() {
        let docs = [json!({"a": 1}), json!({"a": {"b": 2}})];
        assert!(matches!(infer_schema(&docs), Err(Error::MixedType { .. })));
        let docs = [json!({"a": 1}), json!({"a": "1"})];
        assert!(matches!(infer_schema(&docs), Err(Error::MixedType { .. })));
        let docs = [json!([1, "x"])];
        assert!(matches!(infer_schema(&docs), Err(Error::MixedType { .. })));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(infer_schema(&[]), Err(Error::EmptyCorpus)));
    }

    #[test]
    fn merge_is_a_homomorphism() {
        let x = [json!({"a": 1})];
        let y = [json!({"a": 2})];
        let merged = merge_schema(&infer_schema(&x).unwrap(), &infer_schema(&y).unwrap()).unwrap();
        assert_eq!(
            merged,
            infer_schema(&[json!({"a": 1}), json!({"a": 2})]).unwrap()
        );
    }

    #[test]
    fn merge_with_an_empty_shape_is_identity() {
        let s = infer_schema(&[json!({"a": 1, "l": [true]})]).unwrap();
        let empty = SchemaNode::Dictionary(DictSchema::default());
        assert_eq!(merge_schema(&s, &empty).unwrap(), s);
        assert_eq!(merge_schema(&empty, &s).unwrap(), s);
    }

    #[test]
    fn histogram_cap_keeps_smallest_values() {
        let opts = InferOptions { histogram_cap: 3 };
        let docs: Vec<Value> = (0..6).rev().map(|i| json!({"a": i})).collect();
        let s = infer_schema_with(&docs, &opts).unwrap();
        let a = atomic(&s, "a");
        let kept: Vec<_> = a.value_histogram.counts.keys().cloned().collect();
        assert_eq!(
            kept,
            (0..3)
                .map(|i| AtomicValue::number(i as f64))
                .collect::<Vec<_>>()
        );
        assert_eq!(a.value_histogram.overflow, 3);
        assert!(a.unique_count <= a.observation_count);
        assert!(pretty(&s).contains("3+ unique out of 6"));
    }

    #[test]
    fn validate_reports_unknown_keys_and_kind_mismatches() {
        let schema = infer_schema(&[json!({"a": 1, "s": [{"p": "x"}]})]).unwrap();
        assert!(validate(&Sample::from_json(&json!({})).unwrap(), &schema).is_empty());
        let v = validate(&Sample::from_json(&json!({"zzz": 1})).unwrap(), &schema);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::UnknownKey("zzz".into()));
        let v = validate(
            &Sample::from_json(&json!({"s": [{"p": 3}]})).unwrap(),
            &schema,
        );
        assert_eq!(v[0].path, "$.s[0].p");
        assert!(matches!(v[0].kind, ViolationKind::VariantMismatch { .. }));
    }

    #[test]
    fn paths_follow_key_order() {
        let schema = infer_schema(&[json!({"s": [{"p": 1}], "a": true})]).unwrap();
        let paths: Vec<String> = enumerate_paths(&schema)
            .iter()
            .map(|p| p.to_string())
            .collect();
        assert_eq!(paths, vec!["a", "s/[]/p"]);
        for p in enumerate_paths(&schema) {
            assert!(p.terminal(&schema).is_some());
        }
    }

    #[test]
    fn pretty_printer_layout() {
        let schema = infer_schema(&[
            json!({"ip": "1", "services": [{"port": 80, "protocol": "tcp"}]}),
            json!({"ip": "2"}),
        ])
        .unwrap();
        let text = pretty(&schema);
        let expected = "\
[Dict] (present 2 times)
  ip: String (2 unique out of 2)
  services: [List] (present 1 times)
    [Dict] (present 1 times)
      port: Number (1 unique out of 1)
      protocol: String (1 unique out of 1)
";
        assert_eq!(text, expected);
    }

    #[test]
    fn schema_json_round_trip() {
        let schema =
            infer_schema(&[json!({"a": 1.5, "b": ["x", "y"], "c": {"d": false}})]).unwrap();
        let text = serde_json::to_string(&schema).unwrap();
        let back: SchemaNode = serde_json::from_str(&text).unwrap();
        assert_eq!(back, schema);
    }
}
