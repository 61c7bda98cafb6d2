use rust_decimal::prelude::*;
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use std::fmt;

/// Scale used when presenting computed decimals.
pub const PRESENTATION_DP: u32 = 12;

/// A cell of a result table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Null,
    Bool(bool),
    Int(i64),
    Dec(Decimal),
    Str(String),
    /// An IRI bound by the SPARQL side.
    Uri(String),
    /// A property-graph node, identified by its URI.
    Node(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_decimal(&self) -> Option<Decimal> {
        match self {
            Value::Int(i) => Some(Decimal::from(*i)),
            Value::Dec(d) => Some(*d),
            _ => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Dec(_))
    }

    /// Rounds half-even to the presentation scale and strips trailing zeros.
    pub fn presented(self) -> Value {
        match self {
            Value::Dec(d) => Value::Dec(
                d.round_dp_with_strategy(PRESENTATION_DP, RoundingStrategy::MidpointNearestEven)
                    .normalize(),
            ),
            other => other,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => f.write_str("null"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Int(i) => write!(f, "{i}"),
            Value::Dec(d) => write!(f, "{d}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Uri(u) => write!(f, "<{u}>"),
            Value::Node(u) => write!(f, "(<{u}>)"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Null => s.serialize_none(),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Int(i) => s.serialize_i64(*i),
            Value::Dec(d) => match d.to_f64() {
                Some(f) => s.serialize_f64(f),
                None => s.serialize_str(&d.to_string()),
            },
            Value::Str(v) => s.serialize_str(v),
            Value::Uri(u) | Value::Node(u) => {
                let mut m = s.serialize_map(Some(1))?;
                m.serialize_entry("uri", u)?;
                m.end()
            }
        }
    }
}

/// Rows of positional values under named columns.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl ResultTable {
    pub fn new(columns: Vec<String>) -> Self {
        ResultTable { columns, rows: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match columns");
        self.rows.push(row);
    }
}

impl Serialize for ResultTable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.rows.len()))?;
        for row in &self.rows {
            let obj: indexmap::IndexMap<&str, &Value> =
                self.columns.iter().map(String::as_str).zip(row.iter()).collect();
            seq.serialize_element(&obj)?;
        }
        seq.end()
    }
}
