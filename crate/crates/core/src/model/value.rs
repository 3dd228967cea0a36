use std::fmt;

use serde::{Deserialize, Serialize};

/// Type of a port, channel or state variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Bool,
    Int,
    Float,
    String,
}

impl ValueType {
    pub fn keyword(self) -> &'static str {
        match self {
            ValueType::Bool => "bool",
            ValueType::Int => "int",
            ValueType::Float => "float",
            ValueType::String => "string",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Some(match s {
            "bool" => ValueType::Bool,
            "int" => ValueType::Int,
            "float" => ValueType::Float,
            "string" => ValueType::String,
            _ => return None,
        })
    }
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// A payload carried by an event. The absence of an event is modelled as
/// `Option::<Value>::None` everywhere, never as a sentinel value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Bool(bool),
    Int(i64),
    Float(f64),
    #[serde(rename = "str")]
    String(String),
}

impl Value {
    pub fn ty(&self) -> ValueType {
        match self {
            Value::Bool(_) => ValueType::Bool,
            Value::Int(_) => ValueType::Int,
            Value::Float(_) => ValueType::Float,
            Value::String(_) => ValueType::String,
        }
    }

    /// Zero-ish value of a type, used by generators and defaults.
    pub fn default_of(ty: ValueType) -> Value {
        match ty {
            ValueType::Bool => Value::Bool(false),
            ValueType::Int => Value::Int(0),
            ValueType::Float => Value::Float(0.0),
            ValueType::String => Value::String(String::new()),
        }
    }

    /// Canonical JSON form used in traces: a single-key object tagged by type.
    /// Floats are rendered with nine significant digits so traces stay byte-stable.
    pub fn to_trace_json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        match self {
            Value::Bool(b) => map.insert("bool".into(), (*b).into()),
            Value::Int(i) => map.insert("int".into(), (*i).into()),
            Value::Float(x) => map.insert("float".into(), format_float(*x).into()),
            Value::String(s) => map.insert("str".into(), s.clone().into()),
        };
        serde_json::Value::Object(map)
    }

    /// Interprets a scenario JSON literal as a value of the given type.
    pub fn from_json(json: &serde_json::Value, ty: ValueType) -> Option<Value> {
        match (ty, json) {
            (ValueType::Bool, serde_json::Value::Bool(b)) => Some(Value::Bool(*b)),
            (ValueType::Int, serde_json::Value::Number(n)) => n.as_i64().map(Value::Int),
            (ValueType::Float, serde_json::Value::Number(n)) => n.as_f64().map(Value::Float),
            (ValueType::String, serde_json::Value::String(s)) => Some(Value::String(s.clone())),
            _ => None,
        }
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.8e}")
    } else {
        format!("{x}")
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x:?}"),
            Value::String(s) => write_string_literal(f, s),
        }
    }
}

pub(crate) fn write_string_literal(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for c in s.chars() {
        match c {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            '\n' => f.write_str("\\n")?,
            '\t' => f.write_str("\\t")?,
            '\r' => f.write_str("\\r")?,
            c => f.write_char(c)?,
        }
    }
    f.write_char('"')
}

/// Result of ticking a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Success,
    Failure,
    Running,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Success => "SUCCESS",
            Status::Failure => "FAILURE",
            Status::Running => "RUNNING",
        }
    }

    /// Swaps success and failure; running is fixed.
    pub fn invert(self) -> Status {
        match self {
            Status::Success => Status::Failure,
            Status::Failure => Status::Success,
            Status::Running => Status::Running,
        }
    }

    pub const ALL: [Status; 3] = [Status::Success, Status::Failure, Status::Running];
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of the parallel threshold rule over `n` children given counts of
/// successes and failures observed at one tick.
pub fn parallel_status(successes: usize, failures: usize, threshold: usize, n: usize) -> Status {
    if successes >= threshold {
        Status::Success
    } else if failures + threshold > n {
        Status::Failure
    } else {
        Status::Running
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_trace_format_is_nine_significant_digits() {
        assert_eq!(format_float(1.5), "1.50000000e0");
        assert_eq!(format_float(-0.1), "-1.00000000e-1");
        assert_eq!(format_float(123456789.0), "1.23456789e8");
    }

    #[test]
    fn thresholds_are_mutually_exclusive() {
        for n in 1..=6usize {
            for m in 1..=n {
                for s in 0..=n {
                    for fl in 0..=(n - s) {
                        assert!(!(s >= m && fl >= n - m + 1), "n={n} m={m} s={s} f={fl}");
                    }
                }
            }
        }
    }

    #[test]
    fn json_coercion_respects_type() {
        let j = serde_json::json!(3);
        assert_eq!(Value::from_json(&j, ValueType::Int), Some(Value::Int(3)));
        assert_eq!(Value::from_json(&j, ValueType::Float), Some(Value::Float(3.0)));
        assert_eq!(Value::from_json(&j, ValueType::Bool), None);
        assert_eq!(Value::from_json(&serde_json::json!(1.5), ValueType::Int), None);
    }
}
