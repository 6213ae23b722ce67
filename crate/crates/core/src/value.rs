//! Atomic leaf values and their total ordering.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueKind {
    String,
    Number,
    Boolean,
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValueKind::String => "String",
            ValueKind::Number => "Number",
            ValueKind::Boolean => "Boolean",
        };
        f.write_str(s)
    }
}

/// A JSON scalar. Integers and floats share the `Num` variant and compare by
/// numeric value; `-0.0` is normalized to `0.0` so equal numbers are equal keys.
#[derive(Clone, Debug)]
pub enum AtomicValue {
    Str(String),
    Num(f64),
    Bool(bool),
}

impl AtomicValue {
    pub fn kind(&self) -> ValueKind {
        match self {
            AtomicValue::Str(_) => ValueKind::String,
            AtomicValue::Num(_) => ValueKind::Number,
            AtomicValue::Bool(_) => ValueKind::Boolean,
        }
    }

    pub fn number(x: f64) -> Self {
        AtomicValue::Num(if x == 0.0 { 0.0 } else { x })
    }

    /// Returns `None` for containers and `null`.
    pub fn from_json(value: &Value) -> Option<Self> {
        match value {
            Value::String(s) => Some(AtomicValue::Str(s.clone())),
            Value::Number(n) => n.as_f64().map(AtomicValue::number),
            Value::Bool(b) => Some(AtomicValue::Bool(*b)),
            _ => None,
        }
    }

    /// Integral numbers are emitted as JSON integers so documents round-trip.
    pub fn to_json(&self) -> Value {
        match self {
            AtomicValue::Str(s) => Value::String(s.clone()),
            AtomicValue::Bool(b) => Value::Bool(*b),
            AtomicValue::Num(x) => {
                if x.fract() == 0.0 && x.abs() < 9.0e15 {
                    Value::from(*x as i64)
                } else {
                    serde_json::Number::from_f64(*x).map_or(Value::Null, Value::Number)
                }
            }
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AtomicValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl Ord for AtomicValue {
    fn cmp(&self, other: &Self) -> Ordering {
        use AtomicValue::*;
        match (self, other) {
            (Str(a), Str(b)) => a.cmp(b),
            (Num(a), Num(b)) => a.total_cmp(b),
            (Bool(a), Bool(b)) => a.cmp(b),
            _ => self.kind().cmp(&other.kind()),
        }
    }
}

impl PartialOrd for AtomicValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for AtomicValue {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for AtomicValue {}

impl fmt::Display for AtomicValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

impl Serialize for AtomicValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AtomicValue {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let value = Value::deserialize(deserializer)?;
        AtomicValue::from_json(&value)
            .ok_or_else(|| serde::de::Error::custom("expected a string, number or boolean"))
    }
}
