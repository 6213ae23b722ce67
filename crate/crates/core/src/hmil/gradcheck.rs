//! Central finite-difference checks of every gradient the reverse pass produces.

use serde_json::json;

use super::*;
use crate::schema::infer_schema;

const EPS: f64 = 1e-4;
const RTOL: f64 = 1e-4;
const ATOL: f64 = 1e-8;

fn close(analytic: f64, numeric: f64) -> bool {
    (analytic - numeric).abs() <= ATOL + RTOL * numeric.abs()
}

fn corpus() -> Vec<serde_json::Value> {
    vec![
        json!({"id": 3, "ok": true, "svc": [{"name": "http", "port": 80}, {"name": "ssh", "port": 22}], "meta": {"os": "linux", "tags": ["a", "b"]}}),
        json!({"id": 1, "ok": false, "svc": [], "meta": {"os": "bsd"}}),
        json!({"id": 7, "svc": [{"name": "dns"}], "meta": {"tags": []}}),
        json!({"ok": true, "svc": [{"port": 53}], "meta": {"os": "linux", "tags": ["c"]}}),
    ]
}

fn trained() -> (HmilModel, Vec<Sample>) {
    let docs = corpus();
    let schema = infer_schema(&docs).unwrap();
    let samples: Vec<Sample> = docs.iter().map(|d| Sample::from_json(d).unwrap()).collect();
    let mut model = HmilModel::build(&schema, 5, 11);
    let data: Vec<(Sample, Label)> = samples
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), if i % 2 == 0 { Label::Pos } else { Label::Neg }))
        .collect();
    train(
        &mut model,
        &data,
        &TrainConfig {
            steps: 50,
            batch_size: 4,
            ..Default::default()
        },
    )
    .unwrap();
    (model, samples)
}

#[test]
fn subtree_embedding_gradients_match_finite_differences() {
    let (model, samples) = trained();
    for s in &samples {
        let bound = model.bind(s).unwrap();
        let mask = s.full_mask();
        let opts = ForwardOptions::masked(&mask);
        let (_, grads) = model.confidence_gradients(&bound, &opts, false);
        for id in 0..s.len() {
            for j in 0..model.k() {
                let mut delta = vec![0.0; model.k()];
                delta[j] = EPS;
                let plus = model.confidence_with(
                    &bound,
                    &ForwardOptions {
                        offset: Some((id, &delta)),
                        ..opts
                    },
                );
                delta[j] = -EPS;
                let minus = model.confidence_with(
                    &bound,
                    &ForwardOptions {
                        offset: Some((id, &delta)),
                        ..opts
                    },
                );
                let numeric = (plus - minus) / (2.0 * EPS);
                let analytic = grads.nodes[id][j];
                assert!(
                    close(analytic, numeric),
                    "node {id} coord {j}: {analytic} vs {numeric}"
                );
            }
        }
    }
}

#[test]
fn parameter_gradients_match_finite_differences() {
    let (model, samples) = trained();
    let mut probe = model.clone();
    for s in &samples {
        let mask = s.full_mask();
        let bound = model.bind(s).unwrap();
        let (_, grads) = model.confidence_gradients(&bound, &ForwardOptions::masked(&mask), true);
        for i in 0..model.params().len() {
            let original = probe.params()[i];
            probe.params_mut()[i] = original + EPS;
            let plus = probe.confidence_with(&bound, &ForwardOptions::masked(&mask));
            probe.params_mut()[i] = original - EPS;
            let minus = probe.confidence_with(&bound, &ForwardOptions::masked(&mask));
            probe.params_mut()[i] = original;
            let numeric = (plus - minus) / (2.0 * EPS);
            assert!(
                close(grads.params[i], numeric),
                "param {} ({i}): {} vs {numeric}",
                model.tensor_name_of(i),
                grads.params[i]
            );
        }
    }
}

#[test]
fn edge_weight_gradients_match_finite_differences() {
    let (model, samples) = trained();
    for s in &samples {
        let mask = s.full_mask();
        let bound = model.bind(s).unwrap();
        let weights: Vec<f64> = (0..s.len())
            .map(|i| 0.2 + 0.6 * ((i * 7) % 5) as f64 / 4.0)
            .collect();
        let opts = ForwardOptions {
            mask: &mask,
            edge_weights: Some(&weights),
            offset: None,
        };
        let (_, grads) = model.confidence_gradients(&bound, &opts, false);
        for id in 1..s.len() {
            let mut w = weights.clone();
            w[id] += EPS;
            let plus = model.confidence_with(
                &bound,
                &ForwardOptions {
                    edge_weights: Some(&w),
                    ..opts
                },
            );
            w[id] -= 2.0 * EPS;
            let minus = model.confidence_with(
                &bound,
                &ForwardOptions {
                    edge_weights: Some(&w),
                    ..opts
                },
            );
            let numeric = (plus - minus) / (2.0 * EPS);
            assert!(
                close(grads.edges[id], numeric),
                "edge {id}: {} vs {numeric}",
                grads.edges[id]
            );
        }
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let (model, samples) = trained();
    let mut probe = model.clone();
    let bound = model.bind(&samples[0]).unwrap();
    let mut grad = vec![0.0; model.params().len()];
    model.loss_and_grad(&bound, Label::Neg, &mut grad);
    let mut scratch = vec![0.0; grad.len()];
    for i in (0..grad.len()).step_by(3) {
        let original = probe.params()[i];
        probe.params_mut()[i] = original + EPS;
        let plus = probe.loss_and_grad(&bound, Label::Neg, &mut scratch);
        probe.params_mut()[i] = original - EPS;
        let minus = probe.loss_and_grad(&bound, Label::Neg, &mut scratch);
        probe.params_mut()[i] = original;
        let numeric = (plus - minus) / (2.0 * EPS);
        assert!(
            close(grad[i], numeric),
            "param {i}: {} vs {numeric}",
            grad[i]
        );
    }
}

#[test]
fn masking_equals_deletion() {
    let (model, samples) = trained();
    for s in &samples {
        for id in s.maskable() {
            let mut mask = s.full_mask();
            mask[id] = false;
            let pruned = Sample::from_json(&s.to_json_masked(&mask)).unwrap();
            let a = model.embed(s, &mask).unwrap();
            let b = model.embed(&pruned, &pruned.full_mask()).unwrap();
            assert_eq!(a, b, "removing {}", s.path(id));
        }
    }
}

#[test]
fn root_only_mask_equals_empty_sample() {
    let (model, samples) = trained();
    let empty = Sample::from_json(&json!({})).unwrap();
    let expected = model.classify_full(&empty).unwrap();
    for s in &samples {
        let mut mask = vec![false; s.len()];
        mask[0] = true;
        assert_eq!(model.classify(s, &mask).unwrap(), expected);
    }
}

#[test]
fn list_item_order_does_not_matter() {
    let (model, _) = trained();
    let a = Sample::from_json(
        &json!({"svc": [{"name": "http"}, {"port": 22}, {"name": "dns", "port": 53}]}),
    )
    .unwrap();
    let b = Sample::from_json(
        &json!({"svc": [{"name": "dns", "port": 53}, {"name": "http"}, {"port": 22}]}),
    )
    .unwrap();
    let ea = model.embed(&a, &a.full_mask()).unwrap();
    let eb = model.embed(&b, &b.full_mask()).unwrap();
    for (x, y) in ea.iter().zip(&eb) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn single_included_item_equals_singleton_list() {
    let (model, _) = trained();
    let s = Sample::from_json(&json!({"meta": {"tags": ["a", "b"]}})).unwrap();
    let single = Sample::from_json(&json!({"meta": {"tags": ["a"]}})).unwrap();
    let b_id = (0..s.len())
        .find(|&i| s.path(i) == "$.meta.tags[1]")
        .unwrap();
    let mut mask = s.full_mask();
    mask[b_id] = false;
    assert_eq!(
        model.embed(&s, &mask).unwrap(),
        model.embed(&single, &single.full_mask()).unwrap()
    );
}

#[test]
fn identical_items_get_identical_gradients() {
    let (model, _) = trained();
    let s = Sample::from_json(&json!({"meta": {"tags": ["a", "a"]}})).unwrap();
    let x = (0..s.len())
        .find(|&i| s.path(i) == "$.meta.tags[0]")
        .unwrap();
    let y = (0..s.len())
        .find(|&i| s.path(i) == "$.meta.tags[1]")
        .unwrap();
    let gx = model.grad_wrt_subtree(&s, x).unwrap();
    let gy = model.grad_wrt_subtree(&s, y).unwrap();
    for (a, b) in gx.iter().zip(&gy) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn tied_items_match_central_differences() {
    let (model, _) = trained();
    for n in 2..5 {
        let s = Sample::from_json(&json!({"svc": vec![json!({"name": "http", "port": 80}); n]}))
            .unwrap();
        let bound = model.bind(&s).unwrap();
        let mask = s.full_mask();
        let opts = ForwardOptions::masked(&mask);
        let (_, grads) = model.confidence_gradients(&bound, &opts, false);
        let item = (0..s.len()).find(|&i| s.path(i) == "$.svc[0]").unwrap();
        for j in 0..model.k() {
            let mut delta = vec![0.0; model.k()];
            delta[j] = EPS;
            let plus = model.confidence_with(
                &bound,
                &ForwardOptions {
                    offset: Some((item, &delta)),
                    ..opts
                },
            );
            delta[j] = -EPS;
            let minus = model.confidence_with(
                &bound,
                &ForwardOptions {
                    offset: Some((item, &delta)),
                    ..opts
                },
            );
            let numeric = (plus - minus) / (2.0 * EPS);
            assert!(
                close(grads.nodes[item][j], numeric),
                "{n} items, coord {j}: {} vs {numeric}",
                grads.nodes[item][j]
            );
        }
    }
}

#[test]
fn training_reduces_loss_on_a_separable_set() {
    let docs: Vec<serde_json::Value> = (0..40)
        .map(|i| {
            if i % 2 == 0 {
                json!({"a": "x", "b": i % 3})
            } else {
                json!({"b": i % 3})
            }
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
    let mut model = HmilModel::build(&schema, 5, 2);
    let history = train(&mut model, &data, &TrainConfig::default()).unwrap();
    assert!(history.losses.last().unwrap() <= history.losses.first().unwrap());
    let correct = data
        .iter()
        .filter(|(s, l)| model.classify_full(s).unwrap().is_positive() == (*l == Label::Pos))
        .count();
    assert_eq!(correct, data.len());
}

#[test]
fn selection_is_deterministic() {
    let docs = corpus();
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
    let concepts = vec![Sample::from_json(&json!({"ok": true})).unwrap()];
    let config = TrainConfig {
        steps: 30,
        batch_size: 4,
        seed: 5,
        ..Default::default()
    };
    let a = select_best_model(&schema, &data, &concepts, 3, &config).unwrap();
    let b = select_best_model(&schema, &data, &concepts, 3, &config).unwrap();
    assert_eq!(a.chosen, b.chosen);
    assert_eq!(a.model.params(), b.model.params());
    assert_eq!(a.candidates, b.candidates);
}

impl HmilModel {
    fn tensor_name_of(&self, index: usize) -> String {
        self.tensors
            .iter()
            .find(|(_, off, shape)| index >= *off && index < off + shape.iter().product::<usize>())
            .map(|(n, off, _)| format!("{n}+{}", index - off))
            .unwrap_or_default()
    }
}
