//! Tree-structured samples with stable preorder node identifiers.
//!
//! A [`Sample`] is an arena of nodes in preorder, so node `0` is the root, every
//! parent has a smaller id than its children, and the subtree of node `n`
//! occupies the contiguous id range `n..end(n)`. Dictionary children are stored
//! in lexicographic key order. JSON `null` is treated as absent data.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::ops::Range;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::value::AtomicValue;

pub type NodeId = usize;

/// A subset of a sample's node ids.
pub type NodeSet = BTreeSet<NodeId>;

#[derive(Clone, Debug, PartialEq)]
pub enum Edge {
    Root,
    Key(String),
    Index(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Dict(Vec<NodeId>),
    List(Vec<NodeId>),
    Leaf(AtomicValue),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub parent: Option<NodeId>,
    pub edge: Edge,
    pub depth: usize,
    pub kind: NodeKind,
    end: NodeId,
}

impl Node {
    pub fn children(&self) -> &[NodeId] {
        match &self.kind {
            NodeKind::Dict(c) | NodeKind::List(c) => c,
            NodeKind::Leaf(_) => &[],
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf(_))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    nodes: Vec<Node>,
}

impl Sample {
    pub fn from_json(value: &Value) -> Result<Self> {
        if value.is_null() {
            return Err(Error::SchemaMismatch {
                path: "$".into(),
                reason: "a sample cannot be null".into(),
            });
        }
        let mut nodes = Vec::new();
        push_node(&mut nodes, value, None, Edge::Root, 0);
        Ok(Sample { nodes })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        Sample::from_json(&value)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        self.nodes[id].children()
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.nodes[id].parent
    }

    /// Preorder id range of the subtree rooted at `id`, including `id`.
    pub fn subtree(&self, id: NodeId) -> Range<NodeId> {
        id..self.nodes[id].end
    }

    /// Every node except the root.
    pub fn maskable(&self) -> Vec<NodeId> {
        (1..self.nodes.len()).collect()
    }

    /// Nodes without children: atomic values and empty containers.
    pub fn leaves(&self) -> Vec<NodeId> {
        (0..self.nodes.len())
            .filter(|&i| i != 0 && self.nodes[i].children().is_empty())
            .collect()
    }

    pub fn max_depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.nodes[id].parent, move |&p| self.nodes[p].parent)
    }

    pub fn full_mask(&self) -> Vec<bool> {
        vec![true; self.nodes.len()]
    }

    /// A boolean mask with the root and every node of `set` switched on.
    pub fn mask_of(&self, set: &NodeSet) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        mask[0] = true;
        for &id in set {
            mask[id] = true;
        }
        mask
    }

    /// Nodes that are switched on and whose every ancestor is switched on.
    pub fn reachable(&self, mask: &[bool]) -> Vec<bool> {
        let mut out = vec![false; self.nodes.len()];
        out[0] = true;
        for id in 1..self.nodes.len() {
            let parent = self.nodes[id].parent.expect("non-root node has a parent");
            out[id] = mask[id] && out[parent];
        }
        out
    }

    /// Number of atomic values that survive `mask` (after reachability).
    pub fn leaf_count(&self, mask: &[bool]) -> usize {
        let reach = self.reachable(mask);
        (0..self.nodes.len())
            .filter(|&i| reach[i] && self.nodes[i].is_atomic())
            .count()
    }

    pub fn to_json(&self) -> Value {
        self.to_json_masked(&self.full_mask())
    }

    /// The pruned document: only nodes reachable under `mask` are emitted and
    /// list items are re-indexed.
    pub fn to_json_masked(&self, mask: &[bool]) -> Value {
        self.emit(0, mask)
    }

    fn emit(&self, id: NodeId, mask: &[bool]) -> Value {
        let node = &self.nodes[id];
        match &node.kind {
            NodeKind::Leaf(v) => v.to_json(),
            NodeKind::Dict(children) => {
                let mut map = Map::new();
                for &c in children.iter().filter(|&&c| mask[c]) {
                    if let Edge::Key(k) = &self.nodes[c].edge {
                        map.insert(k.clone(), self.emit(c, mask));
                    }
                }
                Value::Object(map)
            }
            NodeKind::List(children) => Value::Array(
                children
                    .iter()
                    .filter(|&&c| mask[c])
                    .map(|&c| self.emit(c, mask))
                    .collect(),
            ),
        }
    }

    /// Human-readable location such as `upnp[0].model_name`.
    pub fn path(&self, id: NodeId) -> String {
        let mut chain: Vec<NodeId> = self.ancestors(id).collect();
        chain.reverse();
        chain.push(id);
        let mut out = String::from("$");
        for &n in &chain {
            match &self.nodes[n].edge {
                Edge::Root => {}
                Edge::Key(k) => {
                    let _ = write!(out, ".{k}");
                }
                Edge::Index(i) => {
                    let _ = write!(out, "[{i}]");
                }
            }
        }
        out
    }
}

fn push_node(
    nodes: &mut Vec<Node>,
    value: &Value,
    parent: Option<NodeId>,
    edge: Edge,
    depth: usize,
) -> NodeId {
    let id = nodes.len();
    nodes.push(Node {
        parent,
        edge,
        depth,
        kind: NodeKind::Dict(Vec::new()),
        end: id + 1,
    });
    let kind = match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let mut children = Vec::with_capacity(keys.len());
            for k in keys {
                let v = &map[k];
                if v.is_null() {
                    continue;
                }
                children.push(push_node(
                    nodes,
                    v,
                    Some(id),
                    Edge::Key(k.clone()),
                    depth + 1,
                ));
            }
            NodeKind::Dict(children)
        }
        Value::Array(items) => {
            let mut children = Vec::with_capacity(items.len());
            for (i, v) in items.iter().enumerate() {
                if v.is_null() {
                    continue;
                }
                children.push(push_node(nodes, v, Some(id), Edge::Index(i), depth + 1));
            }
            NodeKind::List(children)
        }
        other => NodeKind::Leaf(AtomicValue::from_json(other).expect("scalar JSON value")),
    };
    nodes[id].kind = kind;
    nodes[id].end = nodes.len();
    id
}
