//! Importance scores for every maskable node of a sample.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::hmil::{Adam, ForwardOptions, HmilModel};
use crate::sample::{NodeId, Sample};

pub const DEFAULT_BANZHAF_SAMPLES: usize = 200;
pub const DEFAULT_GNN_STEPS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMethod {
    Grad,
    Banzhaf,
    GnnMask,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankingScores {
    pub method: RankingMethod,
    /// One finite score per maskable node.
    pub scores: BTreeMap<NodeId, f64>,
    /// Nodes whose Banzhaf include or exclude bucket stayed empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<NodeId>,
}

impl RankingScores {
    pub fn score(&self, id: NodeId) -> f64 {
        self.scores.get(&id).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// `candidates` sorted by descending score, ties broken by lower id.
    pub fn order(&self, candidates: &[NodeId]) -> Vec<NodeId> {
        let mut out = candidates.to_vec();
        out.sort_by(|&a, &b| self.score(b).total_cmp(&self.score(a)).then(a.cmp(&b)));
        out
    }

    /// Node with the highest score, lowest id on ties.
    pub fn argmax(&self) -> Option<NodeId> {
        let all: Vec<NodeId> = self.scores.keys().copied().collect();
        self.order(&all).first().copied()
    }

    /// Scores keyed by human-readable node path.
    pub fn to_path_json(&self, sample: &Sample) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .scores
            .iter()
            .map(|(&id, &s)| (sample.path(id), serde_json::json!(s)))
            .collect();
        serde_json::Value::Object(map)
    }
}

/// +1 when the full sample is classified positive, -1 otherwise. Not counted.
pub(crate) fn class_sign(model: &HmilModel, sample: &Sample) -> Result<f64> {
    let bound = model.bind(sample)?;
    let mask = sample.full_mask();
    let c = model.confidence_with(&bound, &ForwardOptions::masked(&mask));
    Ok(if c >= 0.0 { 1.0 } else { -1.0 })
}

/// `|sum_i g_i|` with `g` the gradient of the confidence w.r.t. each subtree
/// embedding. One gradient pass.
pub fn rank_gradient(model: &HmilModel, sample: &Sample) -> Result<RankingScores> {
    let bound = model.bind(sample)?;
    let mask = sample.full_mask();
    let (_, grads) = model.confidence_gradients(&bound, &ForwardOptions::masked(&mask), false);
    let scores = sample
        .maskable()
        .into_iter()
        .map(|id| (id, grads.nodes[id].iter().sum::<f64>().abs()))
        .collect();
    Ok(RankingScores {
        method: RankingMethod::Grad,
        scores,
        degenerate: Vec::new(),
    })
}

/// Sampled Banzhaf values of the confidence in the full sample's class.
/// Each of the `n_samples` coalitions includes every maskable node by an
/// independent fair coin and costs one inference.
pub fn rank_banzhaf(
    model: &HmilModel,
    sample: &Sample,
    n_samples: usize,
    seed: u64,
) -> Result<RankingScores> {
    let sign = class_sign(model, sample)?;
    let bound = model.bind(sample)?;
    let n = sample.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum_in = vec![0.0; n];
    let mut cnt_in = vec![0u64; n];
    let mut sum_out = vec![0.0; n];
    let mut cnt_out = vec![0u64; n];
    let mut mask = vec![true; n];
    for _ in 0..n_samples {
        for m in mask.iter_mut().skip(1) {
            *m = rng.random::<bool>();
        }
        let v = sign * model.classify_bound(&bound, &mask).confidence;
        for id in 1..n {
            if mask[id] {
                sum_in[id] += v;
                cnt_in[id] += 1;
            } else {
                sum_out[id] += v;
                cnt_out[id] += 1;
            }
        }
    }
    let mut degenerate = Vec::new();
    let scores = sample
        .maskable()
        .into_iter()
        .map(|id| {
            if cnt_in[id] == 0 || cnt_out[id] == 0 {
                degenerate.push(id);
            }
            let avg_in = if cnt_in[id] > 0 {
                sum_in[id] / cnt_in[id] as f64
            } else {
                0.0
            };
            let avg_out = if cnt_out[id] > 0 {
                sum_out[id] / cnt_out[id] as f64
            } else {
                0.0
            };
            (id, avg_in - avg_out)
        })
        .collect();
    Ok(RankingScores {
        method: RankingMethod::Banzhaf,
        scores,
        degenerate,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub steps: usize,
    /// Weight of the mask entropy penalty.
    pub alpha: f64,
    /// Weight of the mask sum penalty.
    pub beta: f64,
    pub lr: f64,
}

impl GnnConfig {
    /// The `gnn` setting.
    pub fn published() -> Self {
        GnnConfig {
            steps: DEFAULT_GNN_STEPS,
            alpha: 1.0,
            beta: 0.005,
            lr: 0.01,
        }
    }

    /// The `gnn2` setting, best cell of the penalty grid.
    pub fn tuned() -> Self {
        GnnConfig {
            beta: 0.1,
            ..GnnConfig::published()
        }
    }
}

impl Default for GnnConfig {
    fn default() -> Self {
        GnnConfig::published()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Optimizes one sigmoid-squashed weight per parent-to-child edge, maximizing
/// the class confidence minus entropy and size penalties, and scores each node
/// by the final weight of its incoming edge. One gradient pass per step.
pub fn rank_gnn_mask(
    model: &HmilModel,
    sample: &Sample,
    config: &GnnConfig,
) -> Result<RankingScores> {
    let sign = class_sign(model, sample)?;
    let bound = model.bind(sample)?;
    let n = sample.len();
    let mask = sample.full_mask();
    let mut logits = vec![0.0; n];
    let mut weights = vec![1.0; n];
    let mut adam = Adam::with_lr(n, config.lr);
    let mut grad = vec![0.0; n];
    for _ in 0..config.steps {
        for id in 1..n {
            weights[id] = sigmoid(logits[id]);
        }
        let opts = ForwardOptions {
            mask: &mask,
            edge_weights: Some(&weights),
            offset: None,
        };
        let (_, g) = model.confidence_gradients(&bound, &opts, false);
        for id in 1..n {
            let m = weights[id].clamp(1e-12, 1.0 - 1e-12);
            let d_entropy = ((1.0 - m) / m).ln();
            let d_objective = sign * g.edges[id] - config.alpha * d_entropy - config.beta;
            // Adam minimizes, so descend on the negated objective.
            grad[id] = -d_objective * m * (1.0 - m);
        }
        adam.step(&mut logits, &grad);
    }
    let scores = sample
        .maskable()
        .into_iter()
        .map(|id| (id, sigmoid(logits[id])))
        .collect();
    Ok(RankingScores {
        method: RankingMethod::GnnMask,
        scores,
        degenerate: Vec::new(),
    })
}

/// I.i.d. uniform scores in (0, 1).
pub fn rank_random(sample: &Sample, seed: u64) -> RankingScores {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scores = sample
        .maskable()
        .into_iter()
        .map(|id| {
            let mut u: f64 = rng.random();
            while u == 0.0 {
                u = rng.random();
            }
            (id, u)
        })
        .collect();
    RankingScores {
        method: RankingMethod::Random,
        scores,
        degenerate: Vec::new(),
    }
}

/// A configured ranking heuristic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Ranker {
    Grad,
    Banzhaf { n_samples: usize },
    Gnn(GnnConfig),
    Random,
}

impl Ranker {
    pub fn rank(&self, model: &HmilModel, sample: &Sample, seed: u64) -> Result<RankingScores> {
        match self {
            Ranker::Grad => rank_gradient(model, sample),
            Ranker::Banzhaf { n_samples } => rank_banzhaf(model, sample, *n_samples, seed),
            Ranker::Gnn(config) => rank_gnn_mask(model, sample, config),
            Ranker::Random => Ok(rank_random(sample, seed)),
        }
    }
}

impl fmt::Display for Ranker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ranker::Grad => f.write_str("grad"),
            Ranker::Banzhaf { .. } => f.write_str("banz"),
            Ranker::Gnn(c) if *c == GnnConfig::tuned() => f.write_str("gnn2"),
            Ranker::Gnn(c) if *c == GnnConfig::published() => f.write_str("gnn"),
            Ranker::Gnn(c) => write!(
                f,
                "gnn(alpha={},beta={},lr={},steps={})",
                c.alpha, c.beta, c.lr, c.steps
            ),
            Ranker::Random => f.write_str("rand"),
        }
    }
}
