//! Forward and reverse passes of the HMIL network over one bound sample.
//!
//! Nodes are visited in reverse preorder for the forward pass (children before
//! parents) and in preorder for the reverse pass, so neither pass recurses.

use crate::encode::SparseVec;
use crate::sample::NodeId;

use super::{BlockKind, BoundSample, HmilModel};

/// A dense layer whose parameters live in the model's flat parameter vector.
/// Weights are row-major `outputs x inputs`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Dense {
    pub weight: usize,
    pub bias: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    pub fn forward(&self, p: &[f64], x: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(x.len(), self.inputs);
        out.clear();
        out.extend_from_slice(&p[self.bias..self.bias + self.outputs]);
        for (o, acc) in out.iter_mut().enumerate() {
            let row = &p[self.weight + o * self.inputs..self.weight + (o + 1) * self.inputs];
            *acc += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    pub fn forward_sparse(&self, p: &[f64], x: &SparseVec, out: &mut Vec<f64>) {
        out.clear();
        out.extend_from_slice(&p[self.bias..self.bias + self.outputs]);
        for (o, acc) in out.iter_mut().enumerate() {
            let row = self.weight + o * self.inputs;
            *acc += x.entries.iter().map(|&(i, v)| p[row + i] * v).sum::<f64>();
        }
    }

    /// Accumulates parameter gradients and, if requested, writes `W^T g` into
    /// `g_in`.
    pub fn backward(
        &self,
        p: &[f64],
        x: &[f64],
        g_out: &[f64],
        grads: Option<&mut [f64]>,
        g_in: Option<&mut Vec<f64>>,
    ) {
        if let Some(grads) = grads {
            for (o, &g) in g_out.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grads[self.bias + o] += g;
                let row =
                    &mut grads[self.weight + o * self.inputs..self.weight + (o + 1) * self.inputs];
                for (r, v) in row.iter_mut().zip(x) {
                    *r += g * v;
                }
            }
        }
        if let Some(g_in) = g_in {
            g_in.clear();
            g_in.resize(self.inputs, 0.0);
            for (o, &g) in g_out.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = &p[self.weight + o * self.inputs..self.weight + (o + 1) * self.inputs];
                for (gi, w) in g_in.iter_mut().zip(row) {
                    *gi += g * w;
                }
            }
        }
    }

    pub fn backward_sparse(&self, x: &SparseVec, g_out: &[f64], grads: &mut [f64]) {
        for (o, &g) in g_out.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grads[self.bias + o] += g;
            let row = self.weight + o * self.inputs;
            for &(i, v) in &x.entries {
                grads[row + i] += g * v;
            }
        }
    }
}

fn relu_in_place(v: &mut [f64]) {
    for x in v {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
}

/// Uses slope 1/2 at exactly zero, the symmetric subgradient.
fn relu_grad(pre: &[f64], g: &[f64]) -> Vec<f64> {
    pre.iter()
        .zip(g)
        .map(|(&p, &g)| {
            if p > 0.0 {
                g
            } else if p == 0.0 {
                0.5 * g
            } else {
                0.0
            }
        })
        .collect()
}

/// What to evaluate: which nodes are present, optional per-edge weights
/// (indexed by child id), and an optional additive offset on one node's
/// subtree embedding (used for gradient checking).
#[derive(Clone, Copy, Debug)]
pub struct ForwardOptions<'a> {
    pub mask: &'a [bool],
    pub edge_weights: Option<&'a [f64]>,
    pub offset: Option<(NodeId, &'a [f64])>,
}

impl<'a> ForwardOptions<'a> {
    pub fn masked(mask: &'a [bool]) -> Self {
        ForwardOptions {
            mask,
            edge_weights: None,
            offset: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
struct NodeTrace {
    /// Dense output of an inner node (or of an atomic root).
    h: Vec<f64>,
    /// Input of the post-aggregation layer.
    z: Vec<f64>,
    /// Pre-activation of the post-aggregation layer.
    pre: Vec<f64>,
    /// Pre-activation and output of the node's own embedding layer.
    e_pre: Vec<f64>,
    e: Vec<f64>,
    /// Per-coordinate maximum and number of items attaining it.
    max: Vec<f64>,
    ties: Vec<usize>,
    items: Vec<NodeId>,
    imputed: bool,
}

pub(crate) struct Trace {
    active: Vec<bool>,
    nodes: Vec<NodeTrace>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    pub logits: [f64; 2],
}

impl Trace {
    pub fn root_embedding(&self) -> &[f64] {
        &self.nodes[0].h
    }
}

/// Gradients produced by one reverse pass.
#[derive(Clone, Debug, Default)]
pub struct Gradients {
    /// Gradient w.r.t. every parameter (empty unless requested).
    pub params: Vec<f64>,
    /// Gradient w.r.t. each active node's subtree embedding: the embedding
    /// passed to the parent for non-root nodes and the root embedding for the
    /// root. Empty for inactive nodes.
    pub nodes: Vec<Vec<f64>>,
    /// Gradient w.r.t. each edge weight, indexed by child id.
    pub edges: Vec<f64>,
}

impl HmilModel {
    pub(crate) fn run_forward(&self, bound: &BoundSample<'_>, opts: &ForwardOptions<'_>) -> Trace {
        let sample = bound.sample;
        let p = &self.params;
        let k = self.k;
        let n = sample.len();
        assert_eq!(opts.mask.len(), n, "mask length must equal the sample size");

        let mut active = vec![false; n];
        active[0] = true;
        for id in 1..n {
            let parent = sample.parent(id).expect("non-root node has a parent");
            active[id] = opts.mask[id] && active[parent];
        }

        let weight = |id: NodeId| opts.edge_weights.map_or(1.0, |w| w[id]);
        let mut nodes: Vec<NodeTrace> = vec![NodeTrace::default(); n];

        for id in (0..n).rev() {
            if !active[id] {
                continue;
            }
            let block = &self.blocks[bound.block[id]];
            let mut t = std::mem::take(&mut nodes[id]);
            match &block.kind {
                BlockKind::Atomic { .. } => {
                    let x = bound.encoding[id].as_ref().expect("leaf encoding");
                    match &block.embed {
                        Some(embed) => embed.forward_sparse(p, x, &mut t.e_pre),
                        None => t.h = x.to_dense(),
                    }
                }
                BlockKind::Dict { impute, post, .. } => {
                    t.z.clear();
                    t.z.resize(impute.len() * k, 0.0);
                    for (slot, &off) in impute.iter().enumerate() {
                        t.z[slot * k..(slot + 1) * k].copy_from_slice(&p[off..off + k]);
                    }
                    for &c in sample.children(id) {
                        if !active[c] {
                            continue;
                        }
                        let slot = bound.slot[c];
                        let w = weight(c);
                        let off = impute[slot];
                        let e = &nodes[c].e;
                        for j in 0..k {
                            t.z[slot * k + j] = w * e[j] + (1.0 - w) * p[off + j];
                        }
                    }
                    post.forward(p, &t.z, &mut t.pre);
                    t.h = t.pre.clone();
                    relu_in_place(&mut t.h);
                }
                BlockKind::List { impute, post, .. } => {
                    t.items = sample
                        .children(id)
                        .iter()
                        .copied()
                        .filter(|&c| active[c])
                        .collect();
                    if t.items.is_empty() {
                        t.imputed = true;
                        t.h = p[*impute..*impute + k].to_vec();
                    } else {
                        let mut max = vec![f64::NEG_INFINITY; k];
                        let mut mean = vec![0.0; k];
                        t.ties = vec![0; k];
                        for &c in &t.items {
                            let w = weight(c);
                            for j in 0..k {
                                let m = w * nodes[c].e[j];
                                if m > max[j] {
                                    max[j] = m;
                                    t.ties[j] = 1;
                                } else if m == max[j] {
                                    t.ties[j] += 1;
                                }
                                mean[j] += m;
                            }
                        }
                        t.max = max.clone();
                        let count = t.items.len() as f64;
                        mean.iter_mut().for_each(|m| *m /= count);
                        t.z = max;
                        t.z.extend_from_slice(&mean);
                        post.forward(p, &t.z, &mut t.pre);
                        t.h = t.pre.clone();
                        relu_in_place(&mut t.h);
                    }
                }
            }
            if let (Some(embed), false) =
                (&block.embed, matches!(block.kind, BlockKind::Atomic { .. }))
            {
                embed.forward(p, &t.h, &mut t.e_pre);
            }
            if block.embed.is_some() {
                t.e = t.e_pre.clone();
                relu_in_place(&mut t.e);
                if let Some((target, delta)) = opts.offset {
                    if target == id {
                        t.e.iter_mut().zip(delta).for_each(|(e, d)| *e += d);
                    }
                }
            } else if let Some((0, delta)) = opts.offset {
                t.h.iter_mut().zip(delta).for_each(|(h, d)| *h += d);
            }
            nodes[id] = t;
        }

        let mut hidden_pre = Vec::new();
        self.head_hidden.forward(p, &nodes[0].h, &mut hidden_pre);
        let mut hidden = hidden_pre.clone();
        relu_in_place(&mut hidden);
        let mut out = Vec::new();
        self.head_out.forward(p, &hidden, &mut out);

        Trace {
            active,
            nodes,
            hidden_pre,
            hidden,
            logits: [out[0], out[1]],
        }
    }

    /// Reverse pass from `g_logits = d objective / d (logit_pos, logit_neg)`.
    pub(crate) fn run_backward(
        &self,
        bound: &BoundSample<'_>,
        opts: &ForwardOptions<'_>,
        trace: &Trace,
        g_logits: [f64; 2],
        want_params: bool,
    ) -> Gradients {
        let sample = bound.sample;
        let p = &self.params;
        let k = self.k;
        let n = sample.len();
        let weight = |id: NodeId| opts.edge_weights.map_or(1.0, |w| w[id]);

        let mut grads = Gradients {
            params: if want_params {
                vec![0.0; p.len()]
            } else {
                Vec::new()
            },
            nodes: vec![Vec::new(); n],
            edges: vec![0.0; n],
        };
        let mut g_params = want_params.then_some(grads.params.as_mut_slice());

        // Head.
        let mut g_hidden = Vec::new();
        self.head_out.backward(
            p,
            &trace.hidden,
            &g_logits,
            g_params.as_deref_mut(),
            Some(&mut g_hidden),
        );
        let g_hidden_pre = relu_grad(&trace.hidden_pre, &g_hidden);
        let mut g_root = Vec::new();
        self.head_hidden.backward(
            p,
            &trace.nodes[0].h,
            &g_hidden_pre,
            g_params.as_deref_mut(),
            Some(&mut g_root),
        );

        // g_e[id]: gradient w.r.t. the embedding node `id` passes to its parent.
        let mut g_e: Vec<Vec<f64>> = vec![Vec::new(); n];
        for id in 0..n {
            if !trace.active[id] {
                continue;
            }
            let block = &self.blocks[bound.block[id]];
            let t = &trace.nodes[id];

            let g_h: Vec<f64> = if id == 0 {
                grads.nodes[0] = g_root.clone();
                std::mem::take(&mut g_root)
            } else {
                let ge = std::mem::take(&mut g_e[id]);
                let ge = if ge.is_empty() { vec![0.0; k] } else { ge };
                let embed = block
                    .embed
                    .as_ref()
                    .expect("non-root block has an embedding");
                let g_pre = relu_grad(&t.e_pre, &ge);
                grads.nodes[id] = ge;
                match &block.kind {
                    BlockKind::Atomic { .. } => {
                        if let Some(g) = g_params.as_deref_mut() {
                            let x = bound.encoding[id].as_ref().expect("leaf encoding");
                            embed.backward_sparse(x, &g_pre, g);
                        }
                        continue;
                    }
                    _ => {
                        let mut g_h = Vec::new();
                        embed.backward(p, &t.h, &g_pre, g_params.as_deref_mut(), Some(&mut g_h));
                        g_h
                    }
                }
            };

            match &block.kind {
                BlockKind::Atomic { .. } => {}
                BlockKind::Dict { impute, post, .. } => {
                    let g_pre = relu_grad(&t.pre, &g_h);
                    let mut g_z = Vec::new();
                    post.backward(p, &t.z, &g_pre, g_params.as_deref_mut(), Some(&mut g_z));
                    let mut filled = vec![false; impute.len()];
                    for &c in sample.children(id) {
                        if !trace.active[c] {
                            continue;
                        }
                        let slot = bound.slot[c];
                        filled[slot] = true;
                        let w = weight(c);
                        let off = impute[slot];
                        let g_msg = &g_z[slot * k..(slot + 1) * k];
                        g_e[c] = g_msg.iter().map(|g| w * g).collect();
                        let e = &trace.nodes[c].e;
                        grads.edges[c] = (0..k).map(|j| g_msg[j] * (e[j] - p[off + j])).sum();
                        if let Some(g) = g_params.as_deref_mut() {
                            for j in 0..k {
                                g[off + j] += (1.0 - w) * g_msg[j];
                            }
                        }
                    }
                    if let Some(g) = g_params.as_deref_mut() {
                        for (slot, &off) in impute.iter().enumerate() {
                            if !filled[slot] {
                                for j in 0..k {
                                    g[off + j] += g_z[slot * k + j];
                                }
                            }
                        }
                    }
                }
                BlockKind::List { impute, post, .. } => {
                    if t.imputed {
                        if let Some(g) = g_params.as_deref_mut() {
                            for j in 0..k {
                                g[impute + j] += g_h[j];
                            }
                        }
                        continue;
                    }
                    let g_pre = relu_grad(&t.pre, &g_h);
                    let mut g_z = Vec::new();
                    post.backward(p, &t.z, &g_pre, g_params.as_deref_mut(), Some(&mut g_z));
                    let count = t.items.len() as f64;
                    for &c in &t.items {
                        let w = weight(c);
                        let e = &trace.nodes[c].e;
                        let g_msg: Vec<f64> = (0..k)
                            .map(|j| {
                                // Each of several tied maxima gets the symmetric subgradient, half of it.
                                let from_max = match (w * e[j] == t.max[j], t.ties[j]) {
                                    (false, _) => 0.0,
                                    (true, 1) => g_z[j],
                                    (true, _) => 0.5 * g_z[j],
                                };
                                from_max + g_z[k + j] / count
                            })
                            .collect();
                        grads.edges[c] = (0..k).map(|j| g_msg[j] * e[j]).sum();
                        g_e[c] = g_msg.iter().map(|g| w * g).collect();
                    }
                }
            }
        }
        grads
    }
}

/// `softmax(pos) - softmax(neg)`, which equals `tanh((pos - neg) / 2)`.
pub fn confidence_from_logits(logits: [f64; 2]) -> f64 {
    ((logits[0] - logits[1]) / 2.0).tanh()
}

pub(crate) fn confidence_logit_grad(logits: [f64; 2]) -> [f64; 2] {
    let c = confidence_from_logits(logits);
    let d = 0.5 * (1.0 - c * c);
    [d, -d]
}

/// Softmax probabilities `(p_pos, p_neg)`.
pub(crate) fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let a = (logits[0] - m).exp();
    let b = (logits[1] - m).exp();
    [a / (a + b), b / (a + b)]
}
