use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use hmil_explain::explain::{explain, MethodSpec, DEFAULT_TAU_FACTOR};
use hmil_explain::harness::{evaluate, EvalConfig};
use hmil_explain::hmil::{select_best_model, HmilModel, Label, TrainConfig, DEFAULT_K};
use hmil_explain::sample::Sample;
use hmil_explain::schema::{infer_schema, pretty, read_jsonl, SchemaNode};
use hmil_explain::synthgen::{
    device_corpus, generate_dataset, make_concept, Concept, ConceptKind, LabeledSample,
};

#[derive(Parser)]
#[command(
    name = "hmil-explain",
    version,
    about = "Train HMIL classifiers on JSON trees and explain their decisions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Infer a schema from a JSON-lines corpus.
    InferSchema {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic corpus of network-device documents.
    GenCorpus {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a labelled dataset with a planted concept.
    GenData {
        #[arg(long)]
        schema: PathBuf,
        /// Concept kind, i..vii.
        #[arg(long, default_value = "i")]
        kind: String,
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        positive_fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Concept file; defaults to `<out>.concept.json`.
        #[arg(long)]
        concept_out: Option<PathBuf>,
    },
    /// Train candidate models and keep the best one.
    Train {
        #[arg(long)]
        schema: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Concept file; defaults to the fragments planted in the dataset.
        #[arg(long)]
        concept: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_K)]
        k: usize,
        #[arg(long, default_value_t = 2000)]
        steps: usize,
        #[arg(long, default_value_t = 10)]
        n_models: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain the classification of one sample.
    Explain {
        #[arg(long)]
        model: PathBuf,
        /// A JSON document, or a dataset line when `--index` is given.
        #[arg(long)]
        sample: PathBuf,
        #[arg(long)]
        index: Option<usize>,
        #[command(flatten)]
        common: ExplainArgs,
        #[arg(long)]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Explain correctly classified positives with several methods and report.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Method specs, comma separated or repeated; `all` for the full matrix.
        #[arg(long, value_delimiter = ',', required = true)]
        method: Vec<String>,
        #[arg(long, default_value_t = 100)]
        n_explanations: usize,
        #[command(flatten)]
        common: ExplainArgs,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// JSON report; the text table always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExplainArgs {
    #[arg(long, default_value_t = DEFAULT_TAU_FACTOR)]
    tau_factor: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn load_schema(path: &Path) -> Result<SchemaNode> {
    serde_json::from_str(&read(path)?).with_context(|| format!("parsing schema {}", path.display()))
}

fn load_dataset(path: &Path) -> Result<Vec<LabeledSample>> {
    read(path)?
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1))
        })
        .collect()
}

fn check_tau_factor(f: f64) -> Result<()> {
    if !(f > 0.0 && f <= 1.0) {
        bail!("--tau-factor must lie in (0, 1], got {f}");
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::InferSchema { input, out } => {
            let docs = read_jsonl(&read(&input)?)?;
            let schema = infer_schema(&docs)?;
            write(&out, &(serde_json::to_string_pretty(&schema)? + "\n"))?;
            print!("{}", pretty(&schema));
        }
        Command::GenCorpus { n, seed, out } => {
            let lines: Vec<String> = device_corpus(n, seed)
                .iter()
                .map(Value::to_string)
                .collect();
            write(&out, &(lines.join("\n") + "\n"))?;
            println!("wrote {n} documents to {}", out.display());
        }
        Command::GenData {
            schema,
            kind,
            n,
            positive_fraction,
            seed,
            out,
            concept_out,
        } => {
            let schema = load_schema(&schema)?;
            let kind: ConceptKind = kind.parse()?;
            let concept = make_concept(&schema, kind, &mut ChaCha8Rng::seed_from_u64(seed))?;
            let data = generate_dataset(&schema, &concept, n, positive_fraction, seed)?;
            let lines: Vec<String> = data
                .iter()
                .map(|d| serde_json::to_string(d).map_err(Into::into))
                .collect::<Result<_>>()?;
            write(&out, &(lines.join("\n") + "\n"))?;
            let concept_path = concept_out.unwrap_or_else(|| sibling(&out, ".concept.json"));
            write(
                &concept_path,
                &(serde_json::to_string_pretty(&concept)? + "\n"),
            )?;
            let pos = data.iter().filter(|d| d.label == Label::Pos).count();
            println!(
                "kind {kind}: {pos} positive, {} negative, labels verified",
                data.len() - pos
            );
        }
        Command::Train {
            schema,
            dataset,
            concept,
            k,
            steps,
            n_models,
            seed,
            out,
        } => {
            let schema = load_schema(&schema)?;
            let data = load_dataset(&dataset)?;
            let fragments: Vec<Value> = match concept {
                Some(p) => serde_json::from_str::<Concept>(&read(&p)?)?.fragments,
                None => {
                    let mut f: Vec<Value> =
                        data.iter().filter_map(|d| d.inserted.clone()).collect();
                    f.sort_by_key(Value::to_string);
                    f.dedup();
                    f
                }
            };
            let train_set: Vec<(Sample, Label)> = data
                .iter()
                .map(|d| Ok((Sample::from_json(&d.sample)?, d.label)))
                .collect::<Result<_>>()?;
            let concepts: Vec<Sample> = fragments
                .iter()
                .map(Sample::from_json)
                .collect::<Result<_, _>>()?;
            let config = TrainConfig {
                steps,
                k,
                seed,
                ..Default::default()
            };
            let sel = select_best_model(&schema, &train_set, &concepts, n_models, &config)?;
            if let Some(w) = &sel.warning {
                eprintln!("warning: {w}");
            }
            let correct = train_set
                .iter()
                .filter(|(s, l)| {
                    sel.model
                        .classify_full(s)
                        .map(|c| c.is_positive() == (*l == Label::Pos))
                        .unwrap_or(false)
                })
                .count();
            let accuracy = correct as f64 / train_set.len().max(1) as f64;
            sel.model.save(&out)?;
            let chosen = &sel.candidates[sel.chosen];
            let history = json!({
                "config": config,
                "n_models": n_models,
                "chosen": sel.chosen,
                "candidates": sel.candidates,
                "training_accuracy": accuracy,
                "warning": sel.warning,
                "losses": sel.history.losses,
            });
            write(
                &sibling(&out, ".history.json"),
                &(serde_json::to_string_pretty(&history)? + "\n"),
            )?;
            println!(
                "candidate {} (seed {}): empty-sample confidence {:.4}, mean concept confidence {:.4}, training accuracy {:.4}",
                sel.chosen, chosen.seed, chosen.empty_confidence, chosen.concept_confidence, accuracy
            );
        }
        Command::Explain {
            model,
            sample,
            index,
            common,
            method,
            out,
        } => {
            check_tau_factor(common.tau_factor)?;
            let model = HmilModel::load(&model)?;
            let text = read(&sample)?;
            let doc: Value = match index {
                Some(i) => {
                    let line = text
                        .lines()
                        .filter(|l| !l.trim().is_empty())
                        .nth(i)
                        .with_context(|| format!("{} has no line {i}", sample.display()))?;
                    let v: Value = serde_json::from_str(line)?;
                    match v.get("sample") {
                        Some(s) if v.get("label").is_some() => s.clone(),
                        _ => v,
                    }
                }
                None => serde_json::from_str(&text)?,
            };
            let s = Sample::from_json(&doc)?;
            let method: MethodSpec = method.parse()?;
            if !model.classify_full(&s)?.is_positive() {
                bail!("sample not classified positive");
            }
            let e = explain(&model, &s, &method, common.tau_factor, common.seed)?;
            write(&out, &(serde_json::to_string_pretty(&e.pruned)? + "\n"))?;
            let mut meta = e.metadata();
            meta["seed"] = json!(common.seed);
            meta["tau_factor"] = json!(common.tau_factor);
            write(
                &sibling(&out, ".meta.json"),
                &(serde_json::to_string_pretty(&meta)? + "\n"),
            )?;
            println!("{}", serde_json::to_string_pretty(&e.pruned)?);
            eprintln!(
                "{}: confidence {:.4} (tau {:.4}), {} leaves, {} inferences, {} gradients",
                e.method,
                e.confidence,
                e.tau,
                e.leaf_count,
                e.counters.inference_count,
                e.counters.gradient_count
            );
        }
        Command::Evaluate {
            model,
            dataset,
            method,
            n_explanations,
            common,
            threads,
            out,
        } => {
            check_tau_factor(common.tau_factor)?;
            let model = HmilModel::load(&model)?;
            let data = load_dataset(&dataset)?;
            let methods: Vec<String> = if method.iter().any(|m| m == "all") {
                MethodSpec::matrix()
                    .iter()
                    .map(ToString::to_string)
                    .collect()
            } else {
                method
            };
            let config = EvalConfig {
                methods,
                n_explanations,
                tau_factor: common.tau_factor,
                seed: common.seed,
                threads,
            };
            let report = evaluate(&model, &data, &config)?;
            print!("{}", report.to_table());
            if let Some(out) = out {
                let mut v = serde_json::to_value(&report)?;
                v["model"] = json!(model.fingerprint());
                v["dataset"] = json!(dataset.display().to_string());
                write(&out, &(serde_json::to_string_pretty(&v)? + "\n"))?;
            }
            if !report.valid {
                bail!("some explanations were inconsistent");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
