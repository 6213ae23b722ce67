//! Minimal, classification-consistent explanations of one sample.

mod method;
mod select;

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmil::{BoundSample, CounterSnapshot, ForwardOptions, HmilModel};
use crate::ranking::RankingScores;
use crate::sample::{NodeId, NodeSet, Sample};

pub use method::{Addition, MethodSpec, Search, Stages};
pub use select::{fine_tune, greedy_add, heuristic_add, random_removal};

/// Default ratio between the threshold and the full-sample confidence.
pub const DEFAULT_TAU_FACTOR: f64 = 0.9;

/// `S` restricted to nodes whose every ancestor is in `S`, plus the root.
pub fn closure(sample: &Sample, s: &NodeSet) -> NodeSet {
    let reach = sample.reachable(&sample.mask_of(s));
    (0..sample.len()).filter(|&i| reach[i]).collect()
}

/// `S` together with all ancestors of its members and the root.
pub fn ancestor_closure(sample: &Sample, s: &NodeSet) -> NodeSet {
    let mut out = NodeSet::new();
    out.insert(0);
    for &id in s {
        if out.insert(id) {
            for a in sample.ancestors(id) {
                if !out.insert(a) {
                    break;
                }
            }
        }
    }
    out
}

/// Masked confidence of the explained class, counted per evaluation.
pub struct Evaluator<'a> {
    model: &'a HmilModel,
    bound: BoundSample<'a>,
    sign: f64,
    full: f64,
}

impl<'a> Evaluator<'a> {
    /// Fixes the explained class to the one predicted on the full sample.
    pub fn new(model: &'a HmilModel, sample: &'a Sample) -> Result<Self> {
        let bound = model.bind(sample)?;
        let mask = sample.full_mask();
        let c = model.confidence_with(&bound, &ForwardOptions::masked(&mask));
        let sign = if c >= 0.0 { 1.0 } else { -1.0 };
        Ok(Evaluator {
            model,
            bound,
            sign,
            full: sign * c,
        })
    }

    pub fn sample(&self) -> &'a Sample {
        self.bound.sample()
    }

    /// Confidence of the explained class on the full sample.
    pub fn full_confidence(&self) -> f64 {
        self.full
    }

    pub fn explains_positive(&self) -> bool {
        self.sign > 0.0
    }

    /// One counted inference.
    pub fn value(&self, mask: &[bool]) -> f64 {
        self.sign * self.model.classify_bound(&self.bound, mask).confidence
    }

    fn value_uncounted(&self, mask: &[bool]) -> f64 {
        self.sign
            * self
                .model
                .confidence_with(&self.bound, &ForwardOptions::masked(mask))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    pub method: String,
    /// Prefix-closed node set, root included.
    pub nodes: NodeSet,
    /// The pruned document.
    pub pruned: serde_json::Value,
    /// Confidence of the explained class on the pruned sample.
    pub confidence: f64,
    pub full_confidence: f64,
    pub tau: f64,
    pub positive: bool,
    /// Atomic values kept.
    pub leaf_count: usize,
    pub seconds: f64,
    pub counters: CounterSnapshot,
}

impl Explanation {
    /// Sidecar metadata without the pruned document.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "method": self.method,
            "tau": self.tau,
            "confidence": self.confidence,
            "full_confidence": self.full_confidence,
            "positive": self.positive,
            "leaf_count": self.leaf_count,
            "node_count": self.nodes.len(),
            "seconds": self.seconds,
            "inference_count": self.counters.inference_count,
            "gradient_count": self.counters.gradient_count,
        })
    }
}

/// Threshold for `sample`: `factor` times the full-sample confidence of the
/// predicted class. Not counted.
pub fn threshold(model: &HmilModel, sample: &Sample, factor: f64) -> Result<f64> {
    Ok(factor * Evaluator::new(model, sample)?.full_confidence())
}

/// Explains `sample` with `tau = factor * full-sample confidence`.
pub fn explain(
    model: &HmilModel,
    sample: &Sample,
    method: &MethodSpec,
    tau_factor: f64,
    seed: u64,
) -> Result<Explanation> {
    let tau = threshold(model, sample, tau_factor)?;
    explain_with_tau(model, sample, method, tau, seed)
}

/// Runs the search described by `method`. Ranking cost is included in the
/// reported counters and time.
pub fn explain_with_tau(
    model: &HmilModel,
    sample: &Sample,
    method: &MethodSpec,
    tau: f64,
    seed: u64,
) -> Result<Explanation> {
    let eval = Evaluator::new(model, sample)?;
    if eval.full_confidence() < tau {
        return Err(Error::InconsistentInput {
            confidence: eval.full_confidence(),
            tau,
        });
    }
    let start = Instant::now();
    let before = model.counters();
    let scores = match &method.addition {
        Addition::Greedy => None,
        Addition::Heuristic(ranker) => Some(ranker.rank(model, sample, seed)?),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes = match method.search {
        Search::Flat => search_flat(&eval, scores.as_ref(), method.stages, tau, &mut rng)?,
        Search::Leafs => search_leafs(&eval, scores.as_ref(), method.stages, tau, &mut rng)?,
        Search::LevelByLevel => {
            search_level_by_level(&eval, scores.as_ref(), method.stages, tau, &mut rng)?
        }
    };
    let counters = model.counters().since(&before);
    let seconds = start.elapsed().as_secs_f64();
    let mask = sample.mask_of(&nodes);
    let confidence = eval.value_uncounted(&mask);
    Ok(Explanation {
        method: method.to_string(),
        pruned: sample.to_json_masked(&mask),
        leaf_count: sample.leaf_count(&mask),
        nodes,
        confidence,
        full_confidence: eval.full_confidence(),
        tau,
        positive: eval.explains_positive(),
        seconds,
        counters,
    })
}

/// Addition followed by the optional removal and fine-tuning stages.
fn pipeline<F>(
    candidates: &[NodeId],
    scores: Option<&RankingScores>,
    stages: Stages,
    v: &mut F,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<NodeSet>
where
    F: FnMut(&NodeSet) -> f64,
{
    let mut s = match scores {
        None => greedy_add(candidates, v, tau)?,
        Some(scores) => heuristic_add(&scores.order(candidates), v, tau)?,
    };
    if stages.random_removal {
        s = random_removal(&s, v, tau, rng);
    }
    if stages.fine_tune {
        s = fine_tune(&s, candidates, v, tau);
    }
    Ok(s)
}

/// Every maskable node is a candidate; unreachable members are dropped at the
/// end.
pub fn search_flat(
    eval: &Evaluator<'_>,
    scores: Option<&RankingScores>,
    stages: Stages,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<NodeSet> {
    let sample = eval.sample();
    let mut v = |s: &NodeSet| eval.value(&sample.mask_of(s));
    let s = pipeline(&sample.maskable(), scores, stages, &mut v, tau, rng)?;
    Ok(closure(sample, &s))
}

/// Leaves are the candidates; each brings its ancestors along.
pub fn search_leafs(
    eval: &Evaluator<'_>,
    scores: Option<&RankingScores>,
    stages: Stages,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<NodeSet> {
    let sample = eval.sample();
    let mut v = |s: &NodeSet| eval.value(&sample.mask_of(&ancestor_closure(sample, s)));
    let s = pipeline(&sample.leaves(), scores, stages, &mut v, tau, rng)?;
    Ok(ancestor_closure(sample, &s))
}

/// One depth at a time: the children of kept nodes are toggled together with
/// their whole subtrees while shallower decisions stay fixed.
pub fn search_level_by_level(
    eval: &Evaluator<'_>,
    scores: Option<&RankingScores>,
    stages: Stages,
    tau: f64,
    rng: &mut ChaCha8Rng,
) -> Result<NodeSet> {
    let sample = eval.sample();
    let mut kept = vec![false; sample.len()];
    kept[0] = true;
    let mut frontier = vec![0];
    while !frontier.is_empty() {
        let candidates: Vec<NodeId> = frontier
            .iter()
            .flat_map(|&p| sample.children(p).iter().copied())
            .collect();
        if candidates.is_empty() {
            break;
        }
        let mut v = |s: &NodeSet| {
            let mut mask = kept.clone();
            for &c in s {
                mask[sample.subtree(c)].iter_mut().for_each(|m| *m = true);
            }
            eval.value(&mask)
        };
        let s = pipeline(&candidates, scores, stages, &mut v, tau, rng)?;
        for &c in &s {
            kept[c] = true;
        }
        frontier = s.into_iter().collect();
    }
    Ok((0..sample.len()).filter(|&i| kept[i]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmil::{train, Label, TrainConfig};
    use crate::ranking::Ranker;
    use crate::schema::infer_schema;
    use serde_json::json;

    fn set(ids: &[NodeId]) -> NodeSet {
        ids.iter().copied().collect()
    }

    #[test]
    fn closures() {
        let s = Sample::from_json(&json!({"a": {"b": {"c": 1}}, "d": 2})).unwrap();
        // ids: 0 root, 1 a, 2 b, 3 c, 4 d
        assert_eq!(closure(&s, &set(&[1, 2, 3, 4])), set(&[0, 1, 2, 3, 4]));
        assert_eq!(closure(&s, &set(&[2])), set(&[0]));
        assert_eq!(closure(&s, &set(&[1, 3])), set(&[0, 1]));
        assert_eq!(ancestor_closure(&s, &set(&[2])), set(&[0, 1, 2]));
        assert_eq!(ancestor_closure(&s, &set(&[3, 4])), set(&[0, 1, 2, 3, 4]));
    }

    fn trained() -> (HmilModel, Vec<Sample>) {
        let docs: Vec<serde_json::Value> = (0..60)
            .map(|i| {
                let mut d = json!({"n": i % 4, "tags": ["u", "v"], "info": {"os": if i % 3 == 0 { "linux" } else { "bsd" }}});
                if i % 2 == 0 {
                    d["info"]["flag"] = json!(true);
                }
                d
            })
            .collect();
        let schema = infer_schema(&docs).unwrap();
        let data: Vec<(Sample, Label)> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                (
                    Sample::from_json(d).unwrap(),
                    if i % 2 == 0 { Label::Pos } else { Label::Neg },
                )
            })
            .collect();
        let mut model = HmilModel::build(&schema, 5, 1);
        train(
            &mut model,
            &data,
            &TrainConfig {
                steps: 600,
                ..Default::default()
            },
        )
        .unwrap();
        let samples = data.into_iter().map(|(s, _)| s).collect();
        (model, samples)
    }

    #[test]
    fn every_method_is_consistent_and_prefix_closed() {
        let (model, samples) = trained();
        for s in samples.iter().take(6) {
            for method in MethodSpec::matrix() {
                let e = explain(&model, s, &method, DEFAULT_TAU_FACTOR, 7).unwrap();
                assert!(
                    e.confidence >= e.tau,
                    "{method}: {} < {}",
                    e.confidence,
                    e.tau
                );
                assert!(e.nodes.contains(&0));
                for &id in &e.nodes {
                    if let Some(p) = s.parent(id) {
                        assert!(e.nodes.contains(&p), "{method}");
                    }
                }
            }
        }
    }

    #[test]
    fn explanations_are_deterministic() {
        let (model, samples) = trained();
        let method: MethodSpec = "lbyl-banz-add+rr+ft".parse().unwrap();
        let a = explain(&model, &samples[0], &method, 0.9, 3).unwrap();
        let b = explain(&model, &samples[0], &method, 0.9, 3).unwrap();
        assert_eq!(a.nodes, b.nodes);
        assert_eq!(a.counters, b.counters);
    }

    #[test]
    fn single_node_sample_explains_to_the_root() {
        let (model, _) = trained();
        let s = Sample::from_json(&json!({})).unwrap();
        for method in [
            "flat-greedy-add",
            "flat-grad-add+rr+ft",
            "leafs-rand-add",
            "lbyl-gnn-add+rr",
        ] {
            let e = explain(&model, &s, &method.parse().unwrap(), 0.9, 0).unwrap();
            assert_eq!(e.nodes, set(&[0]));
        }
    }

    #[test]
    fn threshold_above_full_confidence_is_rejected() {
        let (model, samples) = trained();
        let method: MethodSpec = "flat-greedy-add".parse().unwrap();
        assert!(matches!(
            explain_with_tau(&model, &samples[0], &method, 1.5, 0),
            Err(Error::InconsistentInput { .. })
        ));
    }

    #[test]
    fn depth_one_level_search_matches_flat() {
        let docs = vec![
            json!({"a": 1, "b": 2, "c": 3}),
            json!({"b": 1}),
            json!({"a": 0, "c": 1}),
        ];
        let schema = infer_schema(&docs).unwrap();
        let data: Vec<(Sample, Label)> = docs
            .iter()
            .map(|d| {
                let l = if d.get("a").is_some() {
                    Label::Pos
                } else {
                    Label::Neg
                };
                (Sample::from_json(d).unwrap(), l)
            })
            .collect();
        let mut model = HmilModel::build(&schema, 5, 0);
        train(
            &mut model,
            &data,
            &TrainConfig {
                steps: 300,
                batch_size: 10,
                ..Default::default()
            },
        )
        .unwrap();
        for stages in ["add", "add+rr", "add+rr+ft"] {
            for ranking in ["greedy", "grad", "banz"] {
                let flat = explain(
                    &model,
                    &data[0].0,
                    &format!("flat-{ranking}-{stages}").parse().unwrap(),
                    0.9,
                    5,
                )
                .unwrap();
                let lbyl = explain(
                    &model,
                    &data[0].0,
                    &format!("lbyl-{ranking}-{stages}").parse().unwrap(),
                    0.9,
                    5,
                )
                .unwrap();
                assert_eq!(flat.nodes, lbyl.nodes);
            }
        }
    }

    #[test]
    fn removal_stages_never_add_leaves() {
        let (model, samples) = trained();
        for s in samples.iter().take(6) {
            for ranking in ["greedy", "grad", "rand"] {
                let add = explain(
                    &model,
                    s,
                    &format!("flat-{ranking}-add").parse().unwrap(),
                    0.9,
                    2,
                )
                .unwrap();
                let rr = explain(
                    &model,
                    s,
                    &format!("flat-{ranking}-add+rr").parse().unwrap(),
                    0.9,
                    2,
                )
                .unwrap();
                let ft = explain(
                    &model,
                    s,
                    &format!("flat-{ranking}-add+rr+ft").parse().unwrap(),
                    0.9,
                    2,
                )
                .unwrap();
                assert!(rr.leaf_count <= add.leaf_count);
                assert!(ft.leaf_count <= rr.leaf_count);
            }
        }
    }

    #[test]
    fn leaf_search_keeps_whole_paths() {
        let (model, samples) = trained();
        let method = MethodSpec {
            search: Search::Leafs,
            addition: Addition::Heuristic(Ranker::Grad),
            stages: Stages::default(),
        };
        let s = &samples[0];
        let e = explain(&model, s, &method, 0.9, 0).unwrap();
        let leaves: NodeSet = s.leaves().into_iter().collect();
        for &id in &e.nodes {
            if s.children(id).is_empty() && id != 0 {
                assert!(leaves.contains(&id));
            }
        }
    }
}
