use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use hmil_explain::explain::{explain, MethodSpec, DEFAULT_TAU_FACTOR};
use hmil_explain::hmil::{select_best_model, HmilModel, Label, TrainConfig};
use hmil_explain::ranking::rank_banzhaf;
use hmil_explain::sample::{NodeId, Sample};
use hmil_explain::schema::infer_schema;
use hmil_explain::synthgen::{
    device_corpus, generate_dataset, make_concept, ConceptKind, LabeledSample,
};

struct Setup {
    data: Vec<LabeledSample>,
    samples: Vec<Sample>,
    model: HmilModel,
}

fn setup() -> &'static Setup {
    static SETUP: OnceLock<Setup> = OnceLock::new();
    SETUP.get_or_init(|| {
        let corpus = device_corpus(800, 5);
        let schema = infer_schema(&corpus).unwrap();
        let concept =
            make_concept(&schema, ConceptKind::I, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let data = generate_dataset(&schema, &concept, 800, 0.5, 5).unwrap();
        let samples: Vec<Sample> = data
            .iter()
            .map(|d| Sample::from_json(&d.sample).unwrap())
            .collect();
        let train: Vec<(Sample, Label)> = samples
            .iter()
            .cloned()
            .zip(data.iter().map(|d| d.label))
            .collect();
        let concepts: Vec<Sample> = concept
            .fragments
            .iter()
            .map(|f| Sample::from_json(f).unwrap())
            .collect();
        let model = select_best_model(&schema, &train, &concepts, 2, &TrainConfig::default())
            .unwrap()
            .model;
        Setup {
            data,
            samples,
            model,
        }
    })
}

impl Setup {
    fn value(&self, s: &Sample, mask: &[bool]) -> f64 {
        let sign = if self.model.classify_full(s).unwrap().is_positive() {
            1.0
        } else {
            -1.0
        };
        sign * self.model.classify(s, mask).unwrap().confidence
    }

    fn small_positives(&self, n: usize) -> Vec<usize> {
        (0..self.samples.len())
            .filter(|&i| {
                self.data[i].label == Label::Pos
                    && self.samples[i].maskable().len() <= 12
                    && self
                        .model
                        .classify_full(&self.samples[i])
                        .unwrap()
                        .is_positive()
            })
            .take(n)
            .collect()
    }
}

fn subset_mask(s: &Sample, nodes: &[NodeId], bits: usize) -> Vec<bool> {
    let mut mask = vec![false; s.len()];
    mask[0] = true;
    for (b, &id) in nodes.iter().enumerate() {
        mask[id] = bits >> b & 1 == 1;
    }
    mask
}

#[test]
fn fine_tuned_explanations_reach_the_exhaustive_minimum() {
    let st = setup();
    let picks = st.small_positives(20);
    assert!(picks.len() >= 17, "only {} small positives", picks.len());
    let methods: Vec<MethodSpec> = ["greedy", "grad", "banz", "gnn", "gnn2", "rand"]
        .iter()
        .map(|r| format!("flat-{r}-add+rr+ft").parse().unwrap())
        .collect();
    let (mut instances, mut optimal) = (0, 0);
    for &i in &picks {
        let s = &st.samples[i];
        let tau = DEFAULT_TAU_FACTOR * st.value(s, &s.full_mask());
        let nodes = s.maskable();
        let minimum = (0..1usize << nodes.len())
            .map(|bits| subset_mask(s, &nodes, bits))
            .filter(|m| st.value(s, m) >= tau)
            .map(|m| s.leaf_count(&m))
            .min()
            .unwrap();
        for method in &methods {
            let e = explain(&st.model, s, method, DEFAULT_TAU_FACTOR, i as u64).unwrap();
            assert!(e.leaf_count >= minimum);
            instances += 1;
            optimal += usize::from(e.leaf_count == minimum);
        }
    }
    assert!(instances >= 100);
    assert!(
        optimal * 10 >= instances * 9,
        "{optimal}/{instances} reached the minimum"
    );
}

#[test]
fn removal_stages_never_add_leaves() {
    let st = setup();
    for &i in &st.small_positives(15) {
        for search in ["flat", "leafs", "lbyl"] {
            for ranking in ["greedy", "banz", "grad", "rand"] {
                let leaves: Vec<usize> = ["add", "add+rr", "add+rr+ft"]
                    .iter()
                    .map(|stages| {
                        let m: MethodSpec = format!("{search}-{ranking}-{stages}").parse().unwrap();
                        explain(&st.model, &st.samples[i], &m, DEFAULT_TAU_FACTOR, 3)
                            .unwrap()
                            .leaf_count
                    })
                    .collect();
                assert!(
                    leaves[1] <= leaves[0] && leaves[2] <= leaves[1],
                    "{search}-{ranking} on {i}: {leaves:?}"
                );
            }
        }
    }
}

#[test]
fn explanations_are_reproducible_across_clones_and_reloads() {
    let st = setup();
    let reloaded = HmilModel::from_json(&st.model.to_json().unwrap()).unwrap();
    for &i in st.small_positives(5).iter() {
        for method in MethodSpec::matrix().iter().step_by(5) {
            let a = explain(&st.model, &st.samples[i], method, DEFAULT_TAU_FACTOR, 11).unwrap();
            let b = explain(&reloaded, &st.samples[i], method, DEFAULT_TAU_FACTOR, 11).unwrap();
            assert_eq!(a.nodes, b.nodes, "{method}");
            assert_eq!(a.pruned, b.pruned);
            assert_eq!(a.confidence.to_bits(), b.confidence.to_bits());
            assert_eq!(a.counters, b.counters);
        }
    }
}

#[test]
fn sampled_banzhaf_converges_to_the_exact_value() {
    let st = setup();
    for &i in st.small_positives(3).iter() {
        let s = &st.samples[i];
        let nodes = s.maskable();
        let values: Vec<f64> = (0..1usize << nodes.len())
            .map(|b| st.value(s, &subset_mask(s, &nodes, b)))
            .collect();
        let scores = rank_banzhaf(&st.model, s, 200_000, 1).unwrap();
        for (b, &id) in nodes.iter().enumerate() {
            let exact: f64 = (0..values.len())
                .filter(|x| x >> b & 1 == 0)
                .map(|x| values[x | 1 << b] - values[x])
                .sum::<f64>()
                / (values.len() / 2) as f64;
            assert!(
                (scores.score(id) - exact).abs() < 0.015,
                "{}: {} vs {exact}",
                s.path(id),
                scores.score(id)
            );
        }
    }
}

#[test]
fn pruned_documents_classify_like_their_masks() {
    let st = setup();
    let m: MethodSpec = "lbyl-banz-add+rr".parse().unwrap();
    for &i in st.small_positives(10).iter() {
        let e = explain(&st.model, &st.samples[i], &m, DEFAULT_TAU_FACTOR, 0).unwrap();
        let pruned = Sample::from_json(&e.pruned).unwrap();
        let c = st.model.classify_full(&pruned).unwrap().confidence;
        assert!((c - e.confidence).abs() < 1e-12);
        assert!(hmil_explain::synthgen::contains_subtree(
            &st.data[i].sample,
            &e.pruned
        ));
    }
}

#[test]
fn samples_outside_the_schema_are_rejected() {
    let st = setup();
    let odd = Sample::from_json(&json!({"dhcp": [1, 2]})).unwrap();
    assert!(st.model.classify_full(&odd).is_err());
    let m: MethodSpec = "flat-grad-add".parse().unwrap();
    assert!(explain(&st.model, &odd, &m, DEFAULT_TAU_FACTOR, 0).is_err());
}
