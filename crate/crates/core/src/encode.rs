//! Fixed-size numeric encodings of atomic leaf values.
//!
//! Numbers pass through unchanged, booleans become `0.0`/`1.0`, low-cardinality
//! strings are one-hot encoded with an extra out-of-vocabulary slot, and all
//! other strings become trigram-count histograms folded into 2053 buckets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::AtomicSchema;
use crate::value::{AtomicValue, ValueKind};

pub const TRIGRAM_BUCKETS: usize = 2053;

/// Strings with fewer distinct values than this are treated as categorical.
pub const CATEGORICAL_LIMIT: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderSpec {
    Identity,
    Boolean,
    OneHot { vocabulary: Vec<String> },
    TrigramHash,
}

/// Which statistic of a string position is compared against the threshold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategoricalBasis {
    /// Number of distinct values observed at the position.
    #[default]
    UniqueValues,
    /// Number of times the position was observed at all.
    Observations,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoricalRule {
    pub threshold: u64,
    pub basis: CategoricalBasis,
}

impl Default for CategoricalRule {
    fn default() -> Self {
        CategoricalRule {
            threshold: CATEGORICAL_LIMIT,
            basis: CategoricalBasis::UniqueValues,
        }
    }
}

impl EncoderSpec {
    pub fn dim(&self) -> usize {
        match self {
            EncoderSpec::Identity | EncoderSpec::Boolean => 1,
            EncoderSpec::OneHot { vocabulary } => vocabulary.len() + 1,
            EncoderSpec::TrigramHash => TRIGRAM_BUCKETS,
        }
    }

    pub fn value_kind(&self) -> ValueKind {
        match self {
            EncoderSpec::Identity => ValueKind::Number,
            EncoderSpec::Boolean => ValueKind::Boolean,
            EncoderSpec::OneHot { .. } | EncoderSpec::TrigramHash => ValueKind::String,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            EncoderSpec::Identity => "identity",
            EncoderSpec::Boolean => "boolean",
            EncoderSpec::OneHot { .. } => "one-hot",
            EncoderSpec::TrigramHash => "trigram-hash",
        }
    }

    pub(crate) fn describe(&self) -> String {
        match self {
            EncoderSpec::OneHot { vocabulary } => format!("one-hot{vocabulary:?}"),
            other => other.name().to_string(),
        }
    }
}

pub fn choose_encoder(atomic: &AtomicSchema) -> EncoderSpec {
    choose_encoder_with(atomic, &CategoricalRule::default())
}

pub fn choose_encoder_with(atomic: &AtomicSchema, rule: &CategoricalRule) -> EncoderSpec {
    match atomic.value_kind {
        ValueKind::Number => EncoderSpec::Identity,
        ValueKind::Boolean => EncoderSpec::Boolean,
        ValueKind::String => {
            let statistic = match rule.basis {
                CategoricalBasis::UniqueValues => atomic.unique_count,
                CategoricalBasis::Observations => atomic.observation_count,
            };
            if statistic < rule.threshold && !atomic.value_histogram.is_capped() {
                // BTreeMap keys are already in lexicographic order.
                let vocabulary = atomic
                    .value_histogram
                    .counts
                    .keys()
                    .filter_map(|v| v.as_str().map(str::to_owned))
                    .collect();
                EncoderSpec::OneHot { vocabulary }
            } else {
                EncoderSpec::TrigramHash
            }
        }
    }
}

/// Sparse encoding: sorted, de-duplicated `(index, value)` pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseVec {
    pub dim: usize,
    pub entries: Vec<(usize, f64)>,
}

impl SparseVec {
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for &(i, x) in &self.entries {
            out[i] += x;
        }
        out
    }
}

pub fn encode(value: &AtomicValue, spec: &EncoderSpec) -> Result<Vec<f64>> {
    encode_sparse(value, spec).map(|s| s.to_dense())
}

pub fn encode_sparse(value: &AtomicValue, spec: &EncoderSpec) -> Result<SparseVec> {
    let dim = spec.dim();
    let entries = match (spec, value) {
        (EncoderSpec::Identity, AtomicValue::Num(x)) => vec![(0, *x)],
        (EncoderSpec::Boolean, AtomicValue::Bool(b)) => vec![(0, if *b { 1.0 } else { 0.0 })],
        (EncoderSpec::OneHot { vocabulary }, AtomicValue::Str(s)) => {
            let idx = vocabulary
                .binary_search_by(|v| v.as_str().cmp(s))
                .unwrap_or(vocabulary.len());
            vec![(idx, 1.0)]
        }
        (EncoderSpec::TrigramHash, AtomicValue::Str(s)) => trigram_buckets(s.as_bytes()),
        (spec, value) => {
            return Err(Error::KindMismatch {
                expected: spec.name(),
                found: value.kind(),
            })
        }
    };
    Ok(SparseVec { dim, entries })
}

/// Trigram id of bytes `(b0, b1, b2)` is `b0 * 65536 + b1 * 256 + b2`; each
/// occurrence increments bucket `id mod 2053`.
fn trigram_buckets(bytes: &[u8]) -> Vec<(usize, f64)> {
    let mut buckets: Vec<usize> = bytes
        .windows(3)
        .map(|w| trigram_id(w[0], w[1], w[2]) as usize % TRIGRAM_BUCKETS)
        .collect();
    buckets.sort_unstable();
    let mut entries: Vec<(usize, f64)> = Vec::with_capacity(buckets.len());
    for b in buckets {
        match entries.last_mut() {
            Some((i, c)) if *i == b => *c += 1.0,
            _ => entries.push((b, 1.0)),
        }
    }
    entries
}

pub fn trigram_id(b0: u8, b1: u8, b2: u8) -> u32 {
    (b0 as u32) << 16 | (b1 as u32) << 8 | b2 as u32
}
