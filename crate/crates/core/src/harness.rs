//! Batch evaluation of explanation methods on labelled synthetic data.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::explain::{explain, Explanation, MethodSpec, DEFAULT_TAU_FACTOR};
use crate::hmil::{HmilModel, Label};
use crate::sample::Sample;
use crate::synthgen::{excess_leaves, LabeledSample};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub methods: Vec<String>,
    pub n_explanations: usize,
    pub tau_factor: f64,
    pub seed: u64,
    /// Worker threads across samples; 1 keeps timings comparable.
    pub threads: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            methods: Vec::new(),
            n_explanations: 100,
            tau_factor: DEFAULT_TAU_FACTOR,
            seed: 0,
            threads: 1,
        }
    }
}

/// Mean and standard error (sample standard deviation over sqrt(n)).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return MeanSe {
                mean: f64::NAN,
                se: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return MeanSe { mean, se: 0.0 };
        }
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        MeanSe {
            mean,
            se: (var / n as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleResult {
    pub index: usize,
    pub excess_leaves: usize,
    pub leaf_count: usize,
    pub node_count: usize,
    pub input_size: usize,
    pub seconds: f64,
    pub inference_count: u64,
    pub gradient_count: u64,
    pub consistent: bool,
    pub prefix_closed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub n: usize,
    pub excess_leaves: MeanSe,
    pub seconds: MeanSe,
    pub inferences: f64,
    pub gradients: f64,
    pub explanation_size: f64,
    pub input_size: f64,
    pub consistency_rate: f64,
    pub prefix_closed_rate: f64,
    pub samples: Vec<SampleResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    /// Dataset indices of the explained samples.
    pub selected: Vec<usize>,
    pub rows: Vec<MethodRow>,
    /// Set when every explanation was consistent and prefix-closed.
    pub valid: bool,
}

/// Up to `n` positives that the model also classifies positive, in seeded
/// random order.
pub fn select_positives(
    model: &HmilModel,
    data: &[LabeledSample],
    n: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let mut candidates: Vec<usize> = Vec::new();
    for (i, d) in data.iter().enumerate() {
        if d.label != Label::Pos || d.inserted.is_none() {
            continue;
        }
        let s = Sample::from_json(&d.sample)?;
        let bound = model.bind(&s)?;
        let mask = s.full_mask();
        if model.confidence_with(&bound, &crate::hmil::ForwardOptions::masked(&mask)) > 0.0 {
            candidates.push(i);
        }
    }
    candidates.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    candidates.truncate(n);
    candidates.sort_unstable();
    Ok(candidates)
}

fn prefix_closed(sample: &Sample, e: &Explanation) -> bool {
    e.nodes.contains(&0)
        && e.nodes
            .iter()
            .all(|&id| sample.parent(id).is_none_or(|p| e.nodes.contains(&p)))
}

/// Explains one sample with one method and scores the result. The model is
/// cloned so that counter deltas stay local.
pub fn evaluate_one(
    model: &HmilModel,
    data: &LabeledSample,
    index: usize,
    method: &MethodSpec,
    tau_factor: f64,
    seed: u64,
) -> Result<(Explanation, SampleResult)> {
    let model = model.clone();
    let sample = Sample::from_json(&data.sample)?;
    let e = explain(&model, &sample, method, tau_factor, seed)?;
    let excess = data
        .inserted
        .as_ref()
        .map_or(e.leaf_count, |f| excess_leaves(&e.pruned, f));
    let result = SampleResult {
        index,
        excess_leaves: excess,
        leaf_count: e.leaf_count,
        node_count: e.nodes.len(),
        input_size: sample.len(),
        seconds: e.seconds,
        inference_count: e.counters.inference_count,
        gradient_count: e.counters.gradient_count,
        consistent: e.confidence >= e.tau,
        prefix_closed: prefix_closed(&sample, &e),
    };
    Ok((e, result))
}

fn row(method: String, samples: Vec<SampleResult>) -> MethodRow {
    let n = samples.len();
    let mean =
        |f: &dyn Fn(&SampleResult) -> f64| samples.iter().map(f).sum::<f64>() / n.max(1) as f64;
    let excess: Vec<f64> = samples.iter().map(|s| s.excess_leaves as f64).collect();
    let seconds: Vec<f64> = samples.iter().map(|s| s.seconds).collect();
    MethodRow {
        excess_leaves: MeanSe::of(&excess),
        seconds: MeanSe::of(&seconds),
        inferences: mean(&|s| s.inference_count as f64),
        gradients: mean(&|s| s.gradient_count as f64),
        explanation_size: mean(&|s| s.node_count as f64),
        input_size: mean(&|s| s.input_size as f64),
        consistency_rate: mean(&|s| f64::from(u8::from(s.consistent))),
        prefix_closed_rate: mean(&|s| f64::from(u8::from(s.prefix_closed))),
        method,
        n,
        samples,
    }
}

/// Runs every configured method on the same selection of correctly
/// classified positives.
pub fn evaluate(
    model: &HmilModel,
    data: &[LabeledSample],
    config: &EvalConfig,
) -> Result<EvalReport> {
    let methods: Vec<MethodSpec> = config
        .methods
        .iter()
        .map(|m| m.parse())
        .collect::<Result<_>>()?;
    let selected = select_positives(model, data, config.n_explanations, config.seed)?;
    let run = |method: &MethodSpec| -> Result<Vec<SampleResult>> {
        let one = |&i: &usize| {
            evaluate_one(
                model,
                &data[i],
                i,
                method,
                config.tau_factor,
                config.seed.wrapping_add(i as u64),
            )
            .map(|r| r.1)
        };
        if config.threads > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.threads)
                .build()
                .expect("thread pool");
            pool.install(|| selected.par_iter().map(one).collect())
        } else {
            selected.iter().map(one).collect()
        }
    };
    let mut rows = Vec::with_capacity(methods.len());
    for method in &methods {
        rows.push(row(method.to_string(), run(method)?));
    }
    let valid = rows
        .iter()
        .all(|r| r.consistency_rate == 1.0 && r.prefix_closed_rate == 1.0);
    Ok(EvalReport {
        config: config.clone(),
        selected,
        rows,
        valid,
    })
}

impl EvalReport {
    /// Aligned text table, one line per method.
    pub fn to_table(&self) -> String {
        let header = [
            "method",
            "n",
            "excess leaves",
            "seconds",
            "#inferences",
            "#gradients",
            "expl. size",
            "input size",
            "consistent",
        ];
        let lines: Vec<[String; 9]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.method.clone(),
                    r.n.to_string(),
                    format!("{:.2}±{:.2}", r.excess_leaves.mean, r.excess_leaves.se),
                    format!("{:.4}±{:.4}", r.seconds.mean, r.seconds.se),
                    format!("{:.1}", r.inferences),
                    format!("{:.1}", r.gradients),
                    format!("{:.1}", r.explanation_size),
                    format!("{:.1}", r.input_size),
                    format!("{:.3}", r.consistency_rate),
                ]
            })
            .collect();
        let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
        for l in &lines {
            for (w, cell) in widths.iter_mut().zip(l) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let mut out = String::new();
        let fmt_line = |cells: Vec<&str>, out: &mut String| {
            let parts: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, &w))| {
                    let pad = w - c.chars().count();
                    if i == 0 {
                        format!("{c}{}", " ".repeat(pad))
                    } else {
                        format!("{}{c}", " ".repeat(pad))
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        fmt_line(header.to_vec(), &mut out);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        let _ = writeln!(out, "{}", rule.join("  "));
        for l in &lines {
            fmt_line(l.iter().map(String::as_str).collect(), &mut out);
        }
        let _ = writeln!(
            out,
            "seed {}  tau factor {}  samples {}  {}",
            self.config.seed,
            self.config.tau_factor,
            self.selected.len(),
            if self.valid {
                "valid"
            } else {
                "INVALID: inconsistent explanations"
            }
        );
        out
    }
}
