//! Hierarchical multiple-instance learning network built from a schema.
//!
//! Every schema node owns one parameter block. A non-root block owns the
//! embedding layer `phi` that maps its output `h` to the `k`-vector passed to
//! its parent; atomic nodes output their raw encoding. Dictionary blocks hold
//! one learned imputation vector per key (used when that child is missing) and
//! a post-concatenation layer. List blocks aggregate item embeddings by
//! coordinate-wise max and mean, followed by a dense layer, and fall back to a
//! learned imputation vector when no item is present. The head is a `k`-unit
//! ReLU layer followed by a linear layer with two outputs `(positive,
//! negative)`.

#[cfg(test)]
mod gradcheck;
mod io;
mod network;
mod train;

use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encode::{choose_encoder, encode_sparse, EncoderSpec, SparseVec};
use crate::error::{Error, Result};
use crate::sample::{Edge, NodeId, NodeKind, Sample};
use crate::schema::{fingerprint, SchemaNode};

pub use io::{EncoderRecord, ModelFile, TensorRecord, MODEL_FORMAT};
pub(crate) use network::Dense;
pub use network::{confidence_from_logits, ForwardOptions, Gradients};
pub use train::{
    select_best_model, train, Adam, CandidateSummary, Label, Selection, TrainConfig, TrainHistory,
};

pub const DEFAULT_K: usize = 5;

#[derive(Clone, Debug)]
pub(crate) struct Block {
    /// Schema location, e.g. `$.services[]`.
    pub name: String,
    pub embed: Option<Dense>,
    pub kind: BlockKind,
}

#[derive(Clone, Debug)]
pub(crate) enum BlockKind {
    Atomic {
        encoder: EncoderSpec,
    },
    Dict {
        keys: Vec<String>,
        children: Vec<usize>,
        /// Parameter offset of each key's imputation vector.
        impute: Vec<usize>,
        post: Dense,
    },
    List {
        item: Option<usize>,
        impute: usize,
        post: Dense,
    },
}

/// Monotone evaluation counters.
#[derive(Debug, Default)]
pub struct EvalCounters {
    inference: AtomicU64,
    gradient: AtomicU64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub inference_count: u64,
    pub gradient_count: u64,
}

impl CounterSnapshot {
    pub fn since(&self, earlier: &CounterSnapshot) -> CounterSnapshot {
        CounterSnapshot {
            inference_count: self.inference_count - earlier.inference_count,
            gradient_count: self.gradient_count - earlier.gradient_count,
        }
    }
}

impl EvalCounters {
    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            inference_count: self.inference.load(Ordering::Relaxed),
            gradient_count: self.gradient.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn add_inference(&self) {
        self.inference.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn add_gradient(&self) {
        self.gradient.fetch_add(1, Ordering::Relaxed);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub logit_pos: f64,
    pub logit_neg: f64,
    /// `softmax(pos) - softmax(neg)`, in `[-1, 1]`.
    pub confidence: f64,
}

impl Classification {
    pub fn from_logits(logits: [f64; 2]) -> Self {
        Classification {
            logit_pos: logits[0],
            logit_neg: logits[1],
            confidence: confidence_from_logits(logits),
        }
    }

    pub fn is_positive(&self) -> bool {
        self.confidence >= 0.0
    }
}

#[derive(Debug)]
pub struct HmilModel {
    k: usize,
    schema: SchemaNode,
    fingerprint: String,
    pub(crate) blocks: Vec<Block>,
    pub(crate) head_hidden: Dense,
    pub(crate) head_out: Dense,
    pub(crate) params: Vec<f64>,
    /// `(name, offset, shape)` of every tensor in `params`.
    tensors: Vec<(String, usize, Vec<usize>)>,
    counters: EvalCounters,
}

impl Clone for HmilModel {
    fn clone(&self) -> Self {
        HmilModel {
            k: self.k,
            schema: self.schema.clone(),
            fingerprint: self.fingerprint.clone(),
            blocks: self.blocks.clone(),
            head_hidden: self.head_hidden,
            head_out: self.head_out,
            params: self.params.clone(),
            tensors: self.tensors.clone(),
            counters: EvalCounters::default(),
        }
    }
}

/// A sample matched against the model's blocks, with leaf encodings cached.
#[derive(Clone, Debug)]
pub struct BoundSample<'a> {
    pub(crate) sample: &'a Sample,
    pub(crate) block: Vec<usize>,
    /// Position of a dictionary child among its parent's keys.
    pub(crate) slot: Vec<usize>,
    pub(crate) encoding: Vec<Option<SparseVec>>,
}

impl<'a> BoundSample<'a> {
    pub fn sample(&self) -> &'a Sample {
        self.sample
    }
}

struct Builder {
    k: usize,
    params: Vec<f64>,
    tensors: Vec<(String, usize, Vec<usize>)>,
    blocks: Vec<Block>,
}

impl Builder {
    fn alloc(&mut self, name: String, shape: Vec<usize>) -> usize {
        let off = self.params.len();
        let len: usize = shape.iter().product();
        self.params.resize(off + len, 0.0);
        self.tensors.push((name, off, shape));
        off
    }

    fn dense(&mut self, name: &str, inputs: usize, outputs: usize) -> Dense {
        let weight = self.alloc(format!("{name}.weight"), vec![outputs, inputs]);
        let bias = self.alloc(format!("{name}.bias"), vec![outputs]);
        Dense {
            weight,
            bias,
            inputs,
            outputs,
        }
    }

    fn block(&mut self, schema: &SchemaNode, name: String, is_root: bool) -> (usize, usize) {
        let k = self.k;
        let id = self.blocks.len();
        self.blocks.push(Block {
            name: name.clone(),
            embed: None,
            kind: BlockKind::Atomic {
                encoder: EncoderSpec::Identity,
            },
        });
        let (kind, out_dim) = match schema {
            SchemaNode::Atomic(a) => {
                let encoder = choose_encoder(a);
                let dim = encoder.dim();
                (BlockKind::Atomic { encoder }, dim)
            }
            SchemaNode::Dictionary(d) => {
                let mut keys = Vec::new();
                let mut children = Vec::new();
                let mut impute = Vec::new();
                for (key, child) in &d.children {
                    let (child_id, _) = self.block(child, format!("{name}.{key}"), false);
                    keys.push(key.clone());
                    children.push(child_id);
                    impute.push(self.alloc(format!("{name}.{key}/impute"), vec![k]));
                }
                let post = self.dense(&format!("{name}/post"), keys.len() * k, k);
                (
                    BlockKind::Dict {
                        keys,
                        children,
                        impute,
                        post,
                    },
                    k,
                )
            }
            SchemaNode::List(l) => {
                let item = l
                    .item
                    .as_ref()
                    .map(|item| self.block(item, format!("{name}[]"), false).0);
                let impute = self.alloc(format!("{name}/impute"), vec![k]);
                let post = self.dense(&format!("{name}/post"), 2 * k, k);
                (BlockKind::List { item, impute, post }, k)
            }
        };
        let embed = (!is_root).then(|| self.dense(&format!("{name}/embed"), out_dim, k));
        self.blocks[id].kind = kind;
        self.blocks[id].embed = embed;
        (id, out_dim)
    }
}

impl HmilModel {
    /// Allocates one block per schema node. Weights are glorot-uniform,
    /// biases and imputation vectors start at zero.
    pub fn build(schema: &SchemaNode, k: usize, seed: u64) -> Self {
        assert!(k > 0, "embedding width must be positive");
        let mut b = Builder {
            k,
            params: Vec::new(),
            tensors: Vec::new(),
            blocks: Vec::new(),
        };
        let (_, root_dim) = b.block(schema, "$".into(), true);
        let head_hidden = b.dense("head/hidden", root_dim, k);
        let head_out = b.dense("head/out", k, 2);

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (name, off, shape) in &b.tensors {
            if name.ends_with(".weight") {
                let (fan_out, fan_in) = (shape[0], shape[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                for w in &mut b.params[*off..off + fan_out * fan_in] {
                    *w = rng.random_range(-limit..limit);
                }
            }
        }

        HmilModel {
            k,
            fingerprint: fingerprint(schema),
            schema: schema.clone(),
            blocks: b.blocks,
            head_hidden,
            head_out,
            params: b.params,
            tensors: b.tensors,
            counters: EvalCounters::default(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn schema(&self) -> &SchemaNode {
        &self.schema
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// `(name, shape)` of every parameter tensor in storage order.
    pub fn tensor_shapes(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.tensors
            .iter()
            .map(|(n, _, s)| (n.as_str(), s.as_slice()))
    }

    /// Encoder of every atomic block, keyed by schema location.
    pub fn encoders(&self) -> Vec<(&str, &EncoderSpec)> {
        self.blocks
            .iter()
            .filter_map(|b| match &b.kind {
                BlockKind::Atomic { encoder } => Some((b.name.as_str(), encoder)),
                _ => None,
            })
            .collect()
    }

    pub fn counters(&self) -> CounterSnapshot {
        self.counters.snapshot()
    }

    /// Matches every node of `sample` to its block and encodes the leaves.
    pub fn bind<'a>(&self, sample: &'a Sample) -> Result<BoundSample<'a>> {
        let n = sample.len();
        let mut block = vec![0; n];
        let mut slot = vec![0; n];
        let mut encoding = vec![None; n];
        for id in 0..n {
            let node = sample.node(id);
            if let Some(parent) = node.parent {
                let pb = &self.blocks[block[parent]];
                match (&pb.kind, &node.edge) {
                    (BlockKind::Dict { keys, children, .. }, Edge::Key(key)) => {
                        let s = keys.binary_search(key).map_err(|_| Error::SchemaMismatch {
                            path: sample.path(id),
                            reason: format!("unknown key {key:?}"),
                        })?;
                        block[id] = children[s];
                        slot[id] = s;
                    }
                    (
                        BlockKind::List {
                            item: Some(item), ..
                        },
                        Edge::Index(_),
                    ) => block[id] = *item,
                    _ => {
                        return Err(Error::SchemaMismatch {
                            path: sample.path(id),
                            reason: "the schema has no node at this position".into(),
                        })
                    }
                }
            }
            let b = &self.blocks[block[id]];
            match (&b.kind, &node.kind) {
                (BlockKind::Atomic { encoder }, NodeKind::Leaf(v)) => {
                    encoding[id] =
                        Some(
                            encode_sparse(v, encoder).map_err(|e| Error::SchemaMismatch {
                                path: sample.path(id),
                                reason: e.to_string(),
                            })?,
                        );
                }
                (BlockKind::Dict { .. }, NodeKind::Dict(_))
                | (BlockKind::List { .. }, NodeKind::List(_)) => {}
                _ => {
                    return Err(Error::SchemaMismatch {
                        path: sample.path(id),
                        reason: format!("schema expects a different node variant at {}", b.name),
                    })
                }
            }
        }
        Ok(BoundSample {
            sample,
            block,
            slot,
            encoding,
        })
    }

    /// Evaluation without touching the counters.
    pub(crate) fn logits_uncounted(
        &self,
        bound: &BoundSample<'_>,
        opts: &ForwardOptions<'_>,
    ) -> [f64; 2] {
        self.run_forward(bound, opts).logits
    }

    /// One counted inference.
    pub fn classify_bound(&self, bound: &BoundSample<'_>, mask: &[bool]) -> Classification {
        self.counters.add_inference();
        Classification::from_logits(self.logits_uncounted(bound, &ForwardOptions::masked(mask)))
    }

    pub fn classify(&self, sample: &Sample, mask: &[bool]) -> Result<Classification> {
        let bound = self.bind(sample)?;
        Ok(self.classify_bound(&bound, mask))
    }

    pub fn classify_full(&self, sample: &Sample) -> Result<Classification> {
        self.classify(sample, &sample.full_mask())
    }

    /// Root embedding of the masked sample. One counted inference.
    pub fn embed(&self, sample: &Sample, mask: &[bool]) -> Result<Vec<f64>> {
        let bound = self.bind(sample)?;
        self.counters.add_inference();
        Ok(self
            .run_forward(&bound, &ForwardOptions::masked(mask))
            .root_embedding()
            .to_vec())
    }

    /// Confidence with arbitrary forward options. Not counted.
    pub fn confidence_with(&self, bound: &BoundSample<'_>, opts: &ForwardOptions<'_>) -> f64 {
        confidence_from_logits(self.logits_uncounted(bound, opts))
    }

    /// Confidence and its gradients w.r.t. every subtree embedding, every edge
    /// weight and, optionally, every parameter. One counted gradient pass.
    pub fn confidence_gradients(
        &self,
        bound: &BoundSample<'_>,
        opts: &ForwardOptions<'_>,
        want_params: bool,
    ) -> (Classification, Gradients) {
        self.counters.add_gradient();
        let trace = self.run_forward(bound, opts);
        let g_logits = network::confidence_logit_grad(trace.logits);
        let grads = self.run_backward(bound, opts, &trace, g_logits, want_params);
        (Classification::from_logits(trace.logits), grads)
    }

    /// Gradient of the full-sample confidence w.r.t. the subtree embedding of
    /// `target`: the `k`-vector it passes to its parent, or the root embedding.
    pub fn grad_wrt_subtree(&self, sample: &Sample, target: NodeId) -> Result<Vec<f64>> {
        let bound = self.bind(sample)?;
        let mask = sample.full_mask();
        let (_, grads) = self.confidence_gradients(&bound, &ForwardOptions::masked(&mask), false);
        Ok(grads.nodes[target].clone())
    }

    /// Softmax cross-entropy of one labelled sample and its parameter gradient,
    /// accumulated into `grad`. Not counted.
    pub(crate) fn loss_and_grad(
        &self,
        bound: &BoundSample<'_>,
        label: Label,
        grad: &mut [f64],
    ) -> f64 {
        let mask = bound.sample.full_mask();
        let opts = ForwardOptions::masked(&mask);
        let trace = self.run_forward(bound, &opts);
        let prob = network::softmax(trace.logits);
        let target = match label {
            Label::Pos => [1.0, 0.0],
            Label::Neg => [0.0, 1.0],
        };
        let g_logits = [prob[0] - target[0], prob[1] - target[1]];
        let g = self.run_backward(bound, &opts, &trace, g_logits, true);
        for (a, b) in grad.iter_mut().zip(&g.params) {
            *a += b;
        }
        let p = match label {
            Label::Pos => prob[0],
            Label::Neg => prob[1],
        };
        -p.max(f64::MIN_POSITIVE).ln()
    }
}
