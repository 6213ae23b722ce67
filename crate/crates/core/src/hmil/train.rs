use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::Sample;
use crate::schema::SchemaNode;

use super::{BoundSample, HmilModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Pos,
    Neg,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub k: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            batch_size: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            k: super::DEFAULT_K,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Mean minibatch loss before each update.
    pub losses: Vec<f64>,
}

/// Adam, minimizing.
#[derive(Clone, Debug)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            epsilon,
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }

    pub fn with_lr(len: usize, lr: f64) -> Self {
        Adam::new(len, lr, 0.9, 0.999, 1e-8)
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// Minimizes mean softmax cross-entropy over minibatches drawn uniformly with
/// replacement.
pub fn train(
    model: &mut HmilModel,
    data: &[(Sample, Label)],
    config: &TrainConfig,
) -> Result<TrainHistory> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let bound: Vec<(BoundSample<'_>, Label)> = data
        .iter()
        .map(|(s, l)| Ok((model.bind(s)?, *l)))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7261_696e);
    let mut adam = Adam::new(
        model.params.len(),
        config.learning_rate,
        config.beta1,
        config.beta2,
        config.epsilon,
    );
    let mut history = TrainHistory::default();
    let mut grad = vec![0.0; model.params.len()];
    let batch = config.batch_size.max(1);
    for _ in 0..config.steps {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        for _ in 0..batch {
            let (b, label) = &bound[rng.random_range(0..bound.len())];
            loss += model.loss_and_grad(b, *label, &mut grad);
        }
        let scale = 1.0 / batch as f64;
        grad.iter_mut().for_each(|g| *g *= scale);
        history.losses.push(loss * scale);
        adam.step(&mut model.params, &grad);
    }
    Ok(history)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub seed: u64,
    pub empty_confidence: f64,
    pub concept_confidence: f64,
    pub final_loss: f64,
}

#[derive(Debug)]
pub struct Selection {
    pub model: HmilModel,
    pub history: TrainHistory,
    pub chosen: usize,
    pub candidates: Vec<CandidateSummary>,
    /// Set when no candidate classified the empty sample as negative.
    pub warning: Option<String>,
}

/// Trains `n` candidates with seeds `config.seed + i` and keeps the one that
/// classifies `{}` as negative and has the highest mean confidence on the
/// concept fragments. Without such a candidate, the one with the most negative
/// empty-sample confidence is returned together with a warning.
pub fn select_best_model(
    schema: &SchemaNode,
    data: &[(Sample, Label)],
    concepts: &[Sample],
    n: usize,
    config: &TrainConfig,
) -> Result<Selection> {
    if n == 0 {
        return Err(Error::InvalidArgument(
            "at least one candidate model is required".into(),
        ));
    }
    let empty = Sample::from_json(&empty_like(schema)).expect("empty sample");
    let trained: Vec<Result<(HmilModel, TrainHistory, CandidateSummary)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let seed = config.seed.wrapping_add(i as u64);
            let mut model = HmilModel::build(schema, config.k, seed);
            let history = train(
                &mut model,
                data,
                &TrainConfig {
                    seed,
                    ..config.clone()
                },
            )?;
            let mask = empty.full_mask();
            let bound = model.bind(&empty)?;
            let empty_confidence =
                model.confidence_with(&bound, &super::ForwardOptions::masked(&mask));
            let mut total = 0.0;
            for c in concepts {
                let b = model.bind(c)?;
                total += model.confidence_with(&b, &super::ForwardOptions::masked(&c.full_mask()));
            }
            let concept_confidence = if concepts.is_empty() {
                0.0
            } else {
                total / concepts.len() as f64
            };
            let summary = CandidateSummary {
                seed,
                empty_confidence,
                concept_confidence,
                final_loss: history.losses.last().copied().unwrap_or(f64::NAN),
            };
            Ok((model, history, summary))
        })
        .collect();
    let mut trained: Vec<(HmilModel, TrainHistory, CandidateSummary)> =
        trained.into_iter().collect::<Result<_>>()?;
    let candidates: Vec<CandidateSummary> = trained.iter().map(|t| t.2.clone()).collect();

    let survivors: Vec<usize> = (0..n)
        .filter(|&i| candidates[i].empty_confidence < 0.0)
        .collect();
    let (chosen, warning) = if survivors.is_empty() {
        let best = (0..n)
            .min_by(|&a, &b| {
                candidates[a]
                    .empty_confidence
                    .total_cmp(&candidates[b].empty_confidence)
            })
            .expect("n > 0");
        (
            best,
            Some(format!(
                "no candidate classified the empty sample as negative; using candidate {best} (empty confidence {:.4})",
                candidates[best].empty_confidence
            )),
        )
    } else {
        // First index wins ties.
        let best = survivors
            .iter()
            .copied()
            .reduce(|a, b| {
                if candidates[b].concept_confidence > candidates[a].concept_confidence {
                    b
                } else {
                    a
                }
            })
            .expect("non-empty survivors");
        (best, None)
    };
    let (model, history, _) = trained.swap_remove(chosen);
    Ok(Selection {
        model,
        history,
        chosen,
        candidates,
        warning,
    })
}

/// The empty sample for a schema: `{}` for dictionaries, `[]` for lists.
pub(crate) fn empty_like(schema: &SchemaNode) -> serde_json::Value {
    match schema {
        SchemaNode::List(_) => serde_json::json!([]),
        _ => serde_json::json!({}),
    }
}
