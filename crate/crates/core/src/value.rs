//! Typed cell values.

use alloc::string::String;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnType {
    Int64,
    Float64,
    Text,
}

impl ColumnType {
    pub fn is_numeric(self) -> bool {
        !matches!(self, ColumnType::Text)
    }

    pub fn name(self) -> &'static str {
        match self {
            ColumnType::Int64 => "int64",
            ColumnType::Float64 => "float64",
            ColumnType::Text => "text",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "int64" | "int" | "integer" | "bigint" => Some(ColumnType::Int64),
            "float64" | "float" | "double" | "real" => Some(ColumnType::Float64),
            "text" | "string" | "varchar" => Some(ColumnType::Text),
            _ => None,
        }
    }
}

/// A nullable cell value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Whether the value can be stored in a column of type `ty`.
    pub fn fits(&self, ty: ColumnType) -> bool {
        matches!(
            (self, ty),
            (Value::Null, _)
                | (Value::Int(_), ColumnType::Int64)
                | (Value::Float(_), ColumnType::Float64)
                | (Value::Text(_), ColumnType::Text)
        )
    }

    /// Total order used for sorting and tie-breaking: nulls first, then
    /// numbers (ints and floats compared by magnitude), then text.
    pub fn total_cmp(&self, other: &Value) -> Ordering {
        fn rank(v: &Value) -> u8 {
            match v {
                Value::Null => 0,
                Value::Int(_) | Value::Float(_) => 1,
                Value::Text(_) => 2,
            }
        }
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            (Value::Float(a), Value::Float(b)) => a.total_cmp(b),
            (Value::Int(a), Value::Float(b)) => (*a as f64).total_cmp(b).then(Ordering::Less),
            (Value::Float(a), Value::Int(b)) => a.total_cmp(&(*b as f64)).then(Ordering::Greater),
            _ => rank(self).cmp(&rank(other)),
        }
    }

    /// SQL comparison: `None` when either side is null or the types are
    /// incomparable.
    pub fn sql_cmp(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => None,
            (Value::Int(a), Value::Int(b)) => Some(a.cmp(b)),
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            (a, b) => a.as_f64()?.partial_cmp(&b.as_f64()?),
        }
    }

    /// Join-key equality: nulls never match.
    pub fn sql_eq(&self, other: &Value) -> bool {
        self.sql_cmp(other) == Some(Ordering::Equal)
    }
}

/// Hashable key for equi-join and distinct evaluation. Numbers are keyed by
/// their f64 bit pattern (with -0.0 folded into 0.0) so ints and floats that
/// compare equal hash equally.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Key {
    Num(u64),
    Text(String),
}

impl Key {
    pub fn of(v: &Value) -> Option<Key> {
        match v {
            Value::Null => None,
            Value::Int(_) | Value::Float(_) => {
                let f = v.as_f64()?;
                if f.is_nan() {
                    return None;
                }
                let f = if f == 0.0 { 0.0 } else { f };
                Some(Key::Num(f.to_bits()))
            }
            Value::Text(s) => Some(Key::Text(s.clone())),
        }
    }
}

impl fmt::Display for Value {
    /// Renders a SQL literal: numbers without exponent, text single-quoted
    /// with `''` escaping.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("NULL"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{}", FloatLit(*x)),
            Value::Text(s) => {
                f.write_str("'")?;
                for ch in s.chars() {
                    if ch == '\'' {
                        f.write_str("''")?;
                    } else {
                        write!(f, "{ch}")?;
                    }
                }
                f.write_str("'")
            }
        }
    }
}

/// Plain decimal rendering of a float that always carries a fractional part,
/// so it re-parses as a decimal literal.
pub struct FloatLit(pub f64);

impl fmt::Display for FloatLit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.0;
        if x.is_finite() && x.fract() == 0.0 {
            write!(f, "{x:.1}")
        } else {
            write!(f, "{x}")
        }
    }
}
