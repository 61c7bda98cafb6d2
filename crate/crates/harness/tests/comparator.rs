use proptest::prelude::*;
use rust_decimal::Decimal;
use s2c_harness::{compare, normalize, OutcomeKind};
use s2c_sandbox::{ResultTable, Value};
use std::str::FromStr;

fn table(columns: &[&str], rows: Vec<Vec<Value>>) -> ResultTable {
    let mut t = ResultTable::new(columns.iter().map(|c| c.to_string()).collect());
    for r in rows {
        t.push(r);
    }
    t
}

fn one(v: Value) -> ResultTable {
    table(&["x"], vec![vec![v]])
}

fn dec(s: &str) -> Value {
    Value::Dec(Decimal::from_str(s).unwrap())
}

fn kind(a: &ResultTable, b: &ResultTable) -> OutcomeKind {
    compare(Ok(a), Ok(b)).kind
}

#[test]
fn tolerance_boundary_is_inclusive() {
    let base = one(dec("1.0000001"));
    assert_eq!(kind(&base, &one(dec("1.0000002"))), OutcomeKind::Match);
    assert_eq!(kind(&base, &one(dec("1.0000011"))), OutcomeKind::Match);
    assert_eq!(kind(&one(dec("1.0000011")), &base), OutcomeKind::Match);
}

#[test]
fn beyond_tolerance_is_val() {
    let base = one(dec("1.0000001"));
    assert_eq!(kind(&base, &one(dec("1.00000111"))), OutcomeKind::Val);
    assert_eq!(kind(&one(dec("1.00000111")), &base), OutcomeKind::Val);
    assert_eq!(kind(&one(dec("0.9999990")), &base), OutcomeKind::Val);
}

#[test]
fn null_equals_zero() {
    assert_eq!(kind(&one(Value::Null), &one(Value::Int(0))), OutcomeKind::Match);
    assert_eq!(kind(&one(dec("0.0")), &one(Value::Null)), OutcomeKind::Match);
    assert_eq!(kind(&one(Value::Null), &one(Value::Int(1))), OutcomeKind::Val);
}

#[test]
fn row_order_is_ignored() {
    let a = table(&["x", "y"], vec![vec![Value::Int(1), Value::Str("a".into())], vec![Value::Int(2), Value::Str("b".into())]]);
    let b = table(&["x", "y"], vec![vec![Value::Int(2), Value::Str("b".into())], vec![Value::Int(1), Value::Str("a".into())]]);
    assert_eq!(kind(&a, &b), OutcomeKind::Match);
    assert_eq!(normalize(&a), normalize(&b));
}

#[test]
fn both_empty_match_one_empty_does_not() {
    let empty = table(&["x"], vec![]);
    assert_eq!(kind(&empty, &table(&["y"], vec![])), OutcomeKind::Match);
    assert_eq!(kind(&empty, &one(Value::Int(1))), OutcomeKind::NumRes);
    assert_eq!(kind(&one(Value::Int(1)), &empty), OutcomeKind::NumRes);
}

#[test]
fn nodes_compare_by_uri() {
    let uri = "http://example.org/e1";
    assert_eq!(kind(&one(Value::Uri(uri.into())), &one(Value::Node(uri.into()))), OutcomeKind::Match);
    assert_eq!(kind(&one(Value::Uri(uri.into())), &one(Value::Node("http://example.org/e2".into()))), OutcomeKind::Val);
}

#[test]
fn column_names_are_ignored() {
    let a = table(&["avgAge"], vec![vec![Value::Int(35)]]);
    let b = table(&["avg_age"], vec![vec![dec("35.0")]]);
    assert_eq!(kind(&a, &b), OutcomeKind::Match);
}

#[test]
fn errors_are_exec() {
    let t = one(Value::Int(1));
    let out = compare(Ok(&t), Err("Unknown function 'foo'"));
    assert_eq!(out.kind, OutcomeKind::Exec);
    assert!(out.detail.contains("Unknown function"));
    assert_eq!(compare(Err("bad"), Ok(&t)).kind, OutcomeKind::Exec);
}

#[test]
fn row_count_checked_before_values() {
    let a = table(&["x"], vec![vec![Value::Int(1)], vec![Value::Int(2)], vec![Value::Int(3)]]);
    let b = table(&["x"], (0..5).map(|i| vec![Value::Int(i + 10)]).collect());
    assert_eq!(kind(&a, &b), OutcomeKind::NumRes);
}

fn value() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        (-5i64..5).prop_map(Value::Int),
        (-500i64..500).prop_map(|m| Value::Dec(Decimal::new(m, 2))),
        "[ab]{0,2}".prop_map(Value::Str),
        "[ab]{1,2}".prop_map(|s| Value::Uri(format!("http://x/{s}"))),
        "[ab]{1,2}".prop_map(|s| Value::Node(format!("http://x/{s}"))),
    ]
}

fn rows(width: usize) -> impl Strategy<Value = Vec<Vec<Value>>> {
    prop::collection::vec(prop::collection::vec(value(), width), 0..6)
}

fn cols(width: usize) -> Vec<&'static str> {
    ["a", "b", "c"][..width].to_vec()
}

proptest! {
    #[test]
    fn match_is_symmetric(a in rows(2), b in rows(2)) {
        let (a, b) = (table(&cols(2), a), table(&cols(2), b));
        prop_assert_eq!(kind(&a, &b) == OutcomeKind::Match, kind(&b, &a) == OutcomeKind::Match);
    }

    #[test]
    fn normalize_is_idempotent(a in rows(3)) {
        let once = normalize(&table(&cols(3), a));
        prop_assert_eq!(normalize(&once), once);
    }

    #[test]
    fn permuting_rows_keeps_the_outcome(a in rows(2), b in rows(2), seed in any::<u64>()) {
        let (ta, tb) = (table(&cols(2), a.clone()), table(&cols(2), b));
        let mut shuffled = a;
        let len = shuffled.len().max(1);
        shuffled.rotate_left(seed as usize % len);
        shuffled.reverse();
        prop_assert_eq!(kind(&table(&cols(2), shuffled), &tb), kind(&ta, &tb));
    }

    #[test]
    fn a_table_matches_itself(a in rows(2)) {
        let t = table(&cols(2), a);
        prop_assert_eq!(kind(&t, &t), OutcomeKind::Match);
    }
}
