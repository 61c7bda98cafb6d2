//! Result normalization and mismatch categorization.

use rust_decimal::Decimal;
use s2c_sandbox::{ResultTable, Value};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Largest absolute difference under which two numbers are equal.
pub const FLOAT_TOLERANCE: Decimal = Decimal::from_parts(1, 0, 0, false, 6);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OutcomeKind {
    #[serde(rename = "MATCH")]
    Match,
    #[serde(rename = "NUM_RES")]
    NumRes,
    #[serde(rename = "VAL")]
    Val,
    #[serde(rename = "EXEC")]
    Exec,
}

impl OutcomeKind {
    pub const MISMATCHES: [OutcomeKind; 3] = [OutcomeKind::NumRes, OutcomeKind::Val, OutcomeKind::Exec];

    pub fn name(self) -> &'static str {
        match self {
            OutcomeKind::Match => "MATCH",
            OutcomeKind::NumRes => "NUM_RES",
            OutcomeKind::Val => "VAL",
            OutcomeKind::Exec => "EXEC",
        }
    }
}

impl fmt::Display for OutcomeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchOutcome {
    pub kind: OutcomeKind,
    pub detail: String,
}

impl MatchOutcome {
    fn new(kind: OutcomeKind, detail: impl Into<String>) -> Self {
        Self {
            kind,
            detail: detail.into(),
        }
    }
}

fn canonical(v: &Value) -> Value {
    match v {
        // a missing value and zero compare equal
        Value::Null => Value::Dec(Decimal::ZERO),
        Value::Int(i) => Value::Dec(Decimal::from(*i)),
        Value::Dec(d) => Value::Dec(d.normalize()),
        Value::Node(u) => Value::Uri(u.clone()),
        other => other.clone(),
    }
}

/// Canonicalizes every cell and sorts the rows. Column names are kept for
/// display but play no part in [`compare`].
///
/// Sort order across types: booleans, numbers, strings, URIs. Nulls become
/// zero before sorting.
pub fn normalize(t: &ResultTable) -> ResultTable {
    let mut rows: Vec<Vec<Value>> = t.rows.iter().map(|r| r.iter().map(canonical).collect()).collect();
    rows.sort();
    ResultTable {
        columns: t.columns.clone(),
        rows,
    }
}

fn cells_equal(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Dec(x), Value::Dec(y)) => (x - y).abs() <= FLOAT_TOLERANCE,
        _ => a == b,
    }
}

/// Compares a SPARQL result with a Cypher result. An error on either side
/// is EXEC; then row counts are checked before values.
pub fn compare(sparql: Result<&ResultTable, &str>, cypher: Result<&ResultTable, &str>) -> MatchOutcome {
    let (s, c) = match (sparql, cypher) {
        (_, Err(e)) => return MatchOutcome::new(OutcomeKind::Exec, format!("cypher: {e}")),
        (Err(e), _) => return MatchOutcome::new(OutcomeKind::Exec, format!("sparql: {e}")),
        (Ok(s), Ok(c)) => (normalize(s), normalize(c)),
    };
    if s.rows.is_empty() && c.rows.is_empty() {
        return MatchOutcome::new(OutcomeKind::Match, "both empty");
    }
    if s.rows.len() != c.rows.len() {
        return MatchOutcome::new(
            OutcomeKind::NumRes,
            format!("{} rows vs {} rows", s.rows.len(), c.rows.len()),
        );
    }
    for (i, (rs, rc)) in s.rows.iter().zip(&c.rows).enumerate() {
        if rs.len() != rc.len() {
            return MatchOutcome::new(OutcomeKind::Val, format!("row {i}: {} columns vs {}", rs.len(), rc.len()));
        }
        if let Some(j) = (0..rs.len()).find(|&j| !cells_equal(&rs[j], &rc[j])) {
            return MatchOutcome::new(OutcomeKind::Val, format!("row {i} column {j}: {} vs {}", rs[j], rc[j]));
        }
    }
    MatchOutcome::new(OutcomeKind::Match, format!("{} rows", s.rows.len()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: Vec<Vec<Value>>) -> ResultTable {
        let width = rows.first().map_or(1, Vec::len);
        let mut t = ResultTable::new((0..width).map(|i| format!("c{i}")).collect());
        for r in rows {
            t.push(r);
        }
        t
    }

    #[test]
    fn integer_and_decimal_are_the_same_number() {
        let a = table(vec![vec![Value::Int(2)]]);
        let b = table(vec![vec![Value::Dec(Decimal::new(200, 2))]]);
        assert_eq!(compare(Ok(&a), Ok(&b)).kind, OutcomeKind::Match);
    }

    #[test]
    fn cypher_error_wins() {
        let a = table(vec![]);
        assert_eq!(compare(Ok(&a), Err("boom")).kind, OutcomeKind::Exec);
    }

    #[test]
    fn count_mismatch_takes_precedence_over_values() {
        let a = table(vec![vec![Value::Int(1)]]);
        let b = table(vec![vec![Value::Int(2)], vec![Value::Int(3)]]);
        assert_eq!(compare(Ok(&a), Ok(&b)).kind, OutcomeKind::NumRes);
    }

    #[test]
    fn duplicates_matter() {
        let a = table(vec![vec![Value::Int(1)], vec![Value::Int(1)]]);
        let b = table(vec![vec![Value::Int(1)], vec![Value::Int(2)]]);
        assert_eq!(compare(Ok(&a), Ok(&b)).kind, OutcomeKind::Val);
    }
}
