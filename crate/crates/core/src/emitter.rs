//! Clause builders that turn an [`Ast`] into Cypher text.

use crate::ast::{Ast, Constraint, NodeEntry, RelEntry};
use crate::error::TranspileError;
use crate::options::OptionalPlacement;
use crate::visitor::render_relational;
use serde::Serialize;
use std::collections::HashSet;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClauseKind {
    Match,
    OptionalMatch,
    Where,
    With,
    WhereWith,
    Unwind,
    Return,
    OrderBy,
    Limit,
    Skip,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CypherQuery {
    pub text: String,
    pub clauses: Vec<(ClauseKind, String)>,
}

impl fmt::Display for CypherQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits at every top-level occurrence of `sep`, ignoring text inside
/// brackets and quoted strings.
pub fn split_top_level<'a>(text: &'a str, sep: &str) -> Vec<&'a str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut quote: Option<char> = None;
    let mut start = 0;
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < text.len() {
        let c = bytes[i] as char;
        if let Some(q) = quote {
            if c == '\\' {
                i += 2;
                continue;
            }
            if c == q {
                quote = None;
            }
            i += 1;
            continue;
        }
        match c {
            '\'' | '"' => quote = Some(c),
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ if depth == 0 && text[i..].starts_with(sep) => {
                out.push(&text[start..i]);
                i += sep.len();
                start = i;
                continue;
            }
            _ => {}
        }
        i += 1;
    }
    out.push(&text[start..]);
    out
}

/// Replaces whole-identifier occurrences of `from` outside string literals.
/// Property accesses such as `x.from` are left alone.
pub fn replace_identifier(text: &str, from: &str, to: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let chars: Vec<char> = text.chars().collect();
    let needle: Vec<char> = from.chars().collect();
    let mut quote: Option<char> = None;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if let Some(q) = quote {
            out.push(c);
            if c == '\\' && i + 1 < chars.len() {
                out.push(chars[i + 1]);
                i += 2;
                continue;
            }
            if c == q {
                quote = None;
            }
            i += 1;
            continue;
        }
        if c == '\'' || c == '"' {
            quote = Some(c);
            out.push(c);
            i += 1;
            continue;
        }
        let fits = chars[i..].starts_with(&needle);
        let before_ok = i == 0 || !(is_word(chars[i - 1]) || chars[i - 1] == '.');
        let after_ok = chars.get(i + needle.len()).is_none_or(|c| !is_word(*c));
        if !needle.is_empty() && fits && before_ok && after_ok {
            out.push_str(to);
            i += needle.len();
        } else {
            out.push(c);
            i += 1;
        }
    }
    out
}

fn render_props(n: &NodeEntry) -> String {
    if n.constraints.is_empty() {
        return String::new();
    }
    let items: Vec<String> = n.constraints.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    format!(" {{{}}}", items.join(", "))
}

struct NodeWriter<'a> {
    ast: &'a Ast,
    labelled: HashSet<String>,
    mapped: HashSet<String>,
}

impl NodeWriter<'_> {
    /// Label and value map on first use. `restate` repeats the label, as
    /// OPTIONAL MATCH lines do.
    fn node(&mut self, v: &str, restate: bool) -> String {
        let entry = self.ast.nodes.get(v).cloned().unwrap_or_default();
        let mut s = format!("({v}");
        if let Some(l) = &entry.label {
            if self.labelled.insert(v.to_string()) || restate {
                s.push(':');
                s.push_str(l);
            }
        }
        if self.mapped.insert(v.to_string()) {
            s.push_str(&render_props(&entry));
        }
        s.push(')');
        s
    }

    fn rel(&mut self, r: &RelEntry, restate: bool) -> String {
        let mut s = self.node(&r.s, restate);
        let segs: Vec<&str> = r.r.split('/').collect();
        for (i, seg) in segs.iter().enumerate() {
            let back = seg.starts_with('^') != r.inverse;
            let ty = seg.trim_start_matches('^');
            if back {
                s.push_str(&format!("<-[{ty}]-"));
            } else {
                s.push_str(&format!("-[{ty}]->"));
            }
            if i + 1 < segs.len() {
                s.push_str("()");
            }
        }
        s.push_str(&self.node(&r.o, restate));
        s
    }
}

/// MATCH lines for the required pattern, then OPTIONAL MATCH lines.
pub fn match_builder(ast: &Ast) -> Result<(Vec<String>, Vec<String>), TranspileError> {
    if ast.nodes.is_empty() && ast.rels.is_empty() {
        return Err(TranspileError::EmptyPattern);
    }
    let mut w = NodeWriter {
        ast,
        labelled: HashSet::new(),
        mapped: HashSet::new(),
    };
    let mut required = Vec::new();
    let mut in_rel: HashSet<&str> = HashSet::new();
    for r in ast.rels.iter().filter(|r| !r.optional) {
        required.push(format!("MATCH {}", w.rel(r, false)));
        in_rel.insert(&r.s);
        in_rel.insert(&r.o);
    }
    for (v, n) in &ast.nodes {
        if !n.optional && !in_rel.contains(v.as_str()) {
            required.push(format!("MATCH {}", w.node(v, false)));
        }
    }
    let mut optional = Vec::new();
    for r in ast.rels.iter().filter(|r| r.optional) {
        optional.push(format!("OPTIONAL MATCH {}", w.rel(r, true)));
        in_rel.insert(&r.s);
        in_rel.insert(&r.o);
    }
    for (v, n) in &ast.nodes {
        if n.optional && !in_rel.contains(v.as_str()) {
            optional.push(format!("OPTIONAL MATCH {}", w.node(v, true)));
        }
    }
    Ok((required, optional))
}

fn constraint_term(c: &Constraint) -> String {
    match c {
        Constraint::Relational([l, op, r]) => render_relational(l, op, r),
        Constraint::Text(t) => {
            let parts = split_top_level(t, "||");
            if parts.len() == 1 && split_top_level(t, "&&").len() == 1 {
                return t.clone();
            }
            let disjuncts: Vec<String> = parts
                .into_iter()
                .map(|d| {
                    let conj: Vec<&str> = split_top_level(d, "&&").into_iter().map(str::trim).collect();
                    format!("({})", conj.join(" AND "))
                })
                .collect();
            disjuncts.join(" OR ")
        }
    }
}

fn conditions(terms: &[Constraint], ast: Option<&Ast>) -> Option<String> {
    if terms.is_empty() {
        return None;
    }
    let rendered: Vec<String> = terms
        .iter()
        .map(|c| {
            let mut t = constraint_term(c);
            if let Some(ast) = ast {
                for (alias, expr) in &ast.aggregates {
                    t = replace_identifier(&t, alias, expr);
                }
            }
            t
        })
        .collect();
    Some(rendered.join(" AND "))
}

pub fn where_builder(ast: &Ast) -> Option<String> {
    conditions(&ast.where_, Some(ast)).map(|c| format!("WHERE {c}"))
}

pub fn with_builder(ast: &Ast) -> Option<String> {
    if ast.with.is_empty() {
        return None;
    }
    let items: Vec<&str> = ast.with.values().map(String::as_str).collect();
    let distinct = if ast.aggregates.is_empty() { "DISTINCT " } else { "" };
    Some(format!("WITH {distinct}{}", items.join(", ")))
}

pub fn where_with_builder(ast: &Ast) -> Option<String> {
    conditions(&ast.where_with, None).map(|c| format!("WHERE {c}"))
}

pub fn unwind_builder(ast: &Ast) -> Vec<String> {
    ast.unwind.iter().map(|(alias, e)| format!("UNWIND {e} AS {alias}")).collect()
}

pub fn return_builder(ast: &Ast) -> Result<String, TranspileError> {
    let Some(first) = ast.return_items.first().filter(|r| !r.trim().is_empty()) else {
        return Err(TranspileError::EmptyProjection);
    };
    let mut distinct = false;
    let mut items = Vec::new();
    for raw in split_top_level(first, ", ") {
        let mut item = raw.trim();
        if let Some(rest) = item.strip_prefix("DISTINCT ") {
            distinct = true;
            item = rest.trim();
        }
        if item == "*" {
            for v in &ast.vars {
                if ast.with.is_empty() {
                    if let Some(p) = ast.props.get(v) {
                        items.push(format!("{p} AS {v}"));
                    } else if ast.nodes.contains_key(v) {
                        items.push(v.clone());
                    }
                } else if ast.with.contains_key(v) {
                    items.push(v.clone());
                }
            }
            continue;
        }
        match ast.props.get(item) {
            Some(p) if ast.with.is_empty() => items.push(format!("{p} AS {item}")),
            _ => items.push(item.to_string()),
        }
    }
    let d = if distinct { "DISTINCT " } else { "" };
    Ok(format!("RETURN {d}{}", items.join(", ")))
}

pub fn sm_builder(ast: &Ast) -> Vec<(ClauseKind, String)> {
    let mut out = Vec::new();
    if !ast.order_by.is_empty() {
        let keys: Vec<String> = ast.order_by.iter().map(|(k, d)| format!("{k} {d}")).collect();
        out.push((ClauseKind::OrderBy, format!("ORDER BY {}", keys.join(", "))));
    }
    if let Some(n) = ast.limit {
        out.push((ClauseKind::Limit, format!("LIMIT {n}")));
    }
    if let Some(n) = ast.skip {
        out.push((ClauseKind::Skip, format!("SKIP {n}")));
    }
    out
}

/// Assembles the clauses in MATCH, WHERE, WITH, WHERE, UNWIND, RETURN,
/// modifier order.
pub fn emit(ast: &Ast, placement: OptionalPlacement) -> Result<CypherQuery, TranspileError> {
    let (required, optional) = match_builder(ast)?;
    let ret = return_builder(ast)?;
    let mut clauses: Vec<(ClauseKind, String)> = required.into_iter().map(|m| (ClauseKind::Match, m)).collect();
    let optional = optional.into_iter().map(|m| (ClauseKind::OptionalMatch, m));
    let where_ = where_builder(ast).map(|w| (ClauseKind::Where, w));
    match placement {
        OptionalPlacement::BeforeWhere => {
            clauses.extend(optional);
            clauses.extend(where_);
        }
        OptionalPlacement::AfterWhere => {
            clauses.extend(where_);
            clauses.extend(optional);
        }
    }
    clauses.extend(with_builder(ast).map(|w| (ClauseKind::With, w)));
    clauses.extend(where_with_builder(ast).map(|w| (ClauseKind::WhereWith, w)));
    clauses.extend(unwind_builder(ast).into_iter().map(|u| (ClauseKind::Unwind, u)));
    clauses.push((ClauseKind::Return, ret));
    clauses.extend(sm_builder(ast));
    let text = clauses.iter().map(|(_, c)| c.as_str()).collect::<Vec<_>>().join("\n");
    Ok(CypherQuery { text, clauses })
}

/// Collapses whitespace and drops it entirely next to punctuation, so two
/// queries that differ only in layout compare equal.
pub fn normalize_whitespace(text: &str) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let mut out = String::new();
    for w in words {
        if let (Some(prev), Some(next)) = (out.chars().last(), w.chars().next()) {
            if is_word(prev) && is_word(next) {
                out.push(' ');
            }
        }
        out.push_str(w);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{init_ast, Constraint};

    #[test]
    fn split_respects_nesting_and_quotes() {
        assert_eq!(split_top_level("a || (b || c) || 'x||y'", "||"), ["a ", " (b || c) ", " 'x||y'"]);
        assert_eq!(split_top_level("f(a, b), c", ", "), ["f(a, b)", "c"]);
    }

    #[test]
    fn disjunction_layout() {
        let t = Constraint::Text("a > 1 || b > 2".into());
        assert_eq!(constraint_term(&t), "(a > 1) OR (b > 2)");
        let t = Constraint::Text("a > 1 && c < 3 || b > 2".into());
        assert_eq!(constraint_term(&t), "(a > 1 AND c < 3) OR (b > 2)");
        let t = Constraint::Text("x.n CONTAINS 'a||b'".into());
        assert_eq!(constraint_term(&t), "x.n CONTAINS 'a||b'");
    }

    #[test]
    fn relational_terms() {
        let t = Constraint::Relational(["x.v".into(), "IN".into(), "(1, 2)".into()]);
        assert_eq!(constraint_term(&t), "x.v IN [1, 2]");
        let t = Constraint::Relational(["x.v".into(), "!=".into(), "3".into()]);
        assert_eq!(constraint_term(&t), "x.v <> 3");
    }

    #[test]
    fn alias_substitution_is_word_bounded() {
        assert_eq!(replace_identifier("n > 1 AND x.n = 'n' AND nn < 2", "n", "COUNT(*)"), "COUNT(*) > 1 AND x.n = 'n' AND nn < 2");
    }

    #[test]
    fn return_expands_props() {
        let mut a = init_ast();
        a.nodes.insert("x".into(), Default::default());
        a.props.insert("l".into(), "x.label".into());
        a.return_items = vec!["DISTINCT l, x".into()];
        assert_eq!(return_builder(&a).unwrap(), "RETURN DISTINCT x.label AS l, x");
    }

    #[test]
    fn empty_pattern_and_projection() {
        let mut a = init_ast();
        assert_eq!(emit(&a, OptionalPlacement::BeforeWhere), Err(TranspileError::EmptyPattern));
        a.nodes.insert("x".into(), Default::default());
        assert_eq!(emit(&a, OptionalPlacement::BeforeWhere), Err(TranspileError::EmptyProjection));
    }

    #[test]
    fn modifiers_emit_zero() {
        let mut a = init_ast();
        a.limit = Some(0);
        a.skip = Some(0);
        let sm: Vec<_> = sm_builder(&a).into_iter().map(|(_, s)| s).collect();
        assert_eq!(sm, ["LIMIT 0", "SKIP 0"]);
    }

    #[test]
    fn whitespace_normalisation() {
        assert_eq!(normalize_whitespace("MATCH  (a:B)\n  -[:r]-> ( c )"), "MATCH(a:B)-[:r]->(c)");
        assert_eq!(normalize_whitespace("RETURN DISTINCT x"), "RETURN DISTINCT x");
    }
}
