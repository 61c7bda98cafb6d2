//! Brute-force SPARQL evaluator used as the oracle. It lowers the parse tree
//! into its own small algebra and evaluates it by direct definition: nested
//! loop joins over the triple set, left joins for OPTIONAL, then filtering,
//! grouping, projection and slicing.

use crate::rdf::{parse_decimal, Literal, Term, TripleStore, XSD};
use crate::value::{ResultTable, Value};
use rust_decimal::prelude::*;
use s2c_core::parse_tree::{Node, ParseTree, Rule};
use s2c_core::prefix::{iri_body, resolve_prefixes, PrefixMap, RDF_NS, RDF_TYPE};
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unsupported in the oracle: {0}")]
    Unsupported(String),
    #[error("undeclared prefix '{0}'")]
    UndeclaredPrefix(String),
    #[error("projected variable ?{0} is never bound")]
    UnboundProjection(String),
}

type Binding = HashMap<String, Term>;

#[derive(Debug, Clone)]
enum PTerm {
    Var(String),
    Const(Term),
}

#[derive(Debug, Clone)]
enum Path {
    Iri(String),
    Inv(Box<Path>),
    Seq(Vec<Path>),
}

#[derive(Debug, Clone)]
struct TriplePattern {
    s: PTerm,
    p: Path,
    o: PTerm,
}

#[derive(Debug, Clone)]
enum Element {
    Triples(Vec<TriplePattern>),
    Group(Group),
    Optional(Group),
}

#[derive(Debug, Clone, Default)]
struct Group {
    elements: Vec<Element>,
    filters: Vec<Expr>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum AggKind {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

#[derive(Debug, Clone)]
enum Expr {
    Var(String),
    Const(Value),
    Or(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    Cmp(String, Box<Expr>, Box<Expr>),
    In(Box<Expr>, Vec<Expr>, bool),
    Arith(String, Box<Expr>, Box<Expr>),
    Call(String, Vec<Expr>),
    Cast(String, Box<Expr>),
    Agg(AggKind, bool, Option<Box<Expr>>),
}

#[derive(Debug, Clone)]
enum SelectItem {
    Var(String),
    Bind(Expr, String),
}

#[derive(Debug, Clone)]
enum GroupKey {
    Expr(Expr),
    Bind(Expr, String),
}

#[derive(Debug, Clone)]
struct Query {
    distinct: bool,
    star: bool,
    select: Vec<SelectItem>,
    pattern: Group,
    group_by: Vec<GroupKey>,
    having: Vec<Expr>,
    order: Vec<(Expr, bool)>,
    limit: Option<usize>,
    offset: usize,
}

// ---- lowering ---------------------------------------------------------------

struct Lower {
    prefixes: PrefixMap,
    /// Declarations of the store, used for labels the query leaves undeclared.
    store_prefixes: PrefixMap,
}

fn unsupported<T>(what: impl Into<String>) -> Result<T, EvalError> {
    Err(EvalError::Unsupported(what.into()))
}

fn unescape(token: &str) -> (String, bool) {
    let (body, lang) = match token.rfind('@') {
        Some(i) if token[..i].ends_with(['\'', '"']) => (&token[..i], true),
        _ => (token, false),
    };
    let q = if body.starts_with("'''") || body.starts_with("\"\"\"") { 3 } else { 1 };
    let inner = &body[q..body.len() - q];
    let mut out = String::new();
    let mut it = inner.chars();
    while let Some(c) = it.next() {
        if c == '\\' {
            match it.next() {
                Some('n') => out.push('\n'),
                Some('t') => out.push('\t'),
                Some('r') => out.push('\r'),
                Some(o) => out.push(o),
                None => {}
            }
        } else {
            out.push(c);
        }
    }
    (out, lang)
}

impl Lower {
    fn iri(&self, t: &ParseTree) -> Result<String, EvalError> {
        let text = t.text();
        match t.rule {
            Rule::Iri => Ok(iri_body(&text).to_string()),
            Rule::PrefixedName => {
                if let Some(full) = self.prefixes.expand(&text).or_else(|| self.store_prefixes.expand(&text)) {
                    return Ok(full);
                }
                let (p, local) = text.split_once(':').unwrap_or(("", &text));
                match p {
                    "rdf" => Ok(format!("{RDF_NS}{local}")),
                    "rdfs" => Ok(format!("http://www.w3.org/2000/01/rdf-schema#{local}")),
                    "xsd" => Ok(format!("{XSD}{local}")),
                    _ => Err(EvalError::UndeclaredPrefix(p.to_string())),
                }
            }
            other => unsupported(format!("{other} as IRI")),
        }
    }

    fn literal(&self, t: &ParseTree) -> Result<Literal, EvalError> {
        match t.rule {
            Rule::NumericLiteral => {
                let text: String = t.leaves().iter().map(|l| l.text.as_str()).collect();
                let text = text.trim_start_matches('+');
                if text.contains(['.', 'e', 'E']) {
                    parse_decimal(text).map(Literal::Dec)
                } else {
                    text.parse().ok().map(Literal::Int)
                }
                .ok_or_else(|| EvalError::Unsupported(format!("number {text}")))
            }
            Rule::BooleanLiteral => Ok(Literal::Bool(t.text().eq_ignore_ascii_case("true"))),
            Rule::RdfLiteral => {
                let tok = t.tokens().next().expect("string token");
                let (s, lang) = unescape(&tok.text);
                if lang {
                    return Ok(Literal::Str(s));
                }
                let dt = match t.subtrees().next() {
                    Some(d) => Some(self.iri(d)?),
                    None => None,
                };
                Literal::typed(&s, dt.as_deref()).map_err(EvalError::Unsupported)
            }
            other => unsupported(format!("{other} as literal")),
        }
    }

    fn term(&self, t: &ParseTree) -> Result<PTerm, EvalError> {
        Ok(match t.rule {
            Rule::Var => PTerm::Var(t.text()[1..].to_string()),
            Rule::Iri | Rule::PrefixedName => PTerm::Const(Term::Iri(self.iri(t)?)),
            Rule::RdfLiteral | Rule::NumericLiteral | Rule::BooleanLiteral => PTerm::Const(Term::Lit(self.literal(t)?)),
            other => return unsupported(format!("{other} term")),
        })
    }

    fn path_node(&self, n: &Node) -> Result<Path, EvalError> {
        match n {
            Node::Token(t) if t.is_keyword("a") => Ok(Path::Iri(RDF_TYPE.to_string())),
            Node::Token(t) => unsupported(format!("path token {}", t.text)),
            Node::Tree(t) => match t.rule {
                Rule::Iri | Rule::PrefixedName => Ok(Path::Iri(self.iri(t)?)),
                Rule::PathEltOrInverse => {
                    let inner = t
                        .children
                        .iter()
                        .find(|c| c.as_token().is_none_or(|k| !k.is_op("^")))
                        .ok_or_else(|| EvalError::Unsupported("empty inverse".into()))?;
                    Ok(Path::Inv(Box::new(self.path_node(inner)?)))
                }
                Rule::PathSequence => {
                    let mut parts = Vec::new();
                    for c in &t.children {
                        if c.as_token().is_some_and(|k| k.is_op("/")) {
                            continue;
                        }
                        parts.push(self.path_node(c)?);
                    }
                    Ok(Path::Seq(parts))
                }
                other => unsupported(format!("path {other}")),
            },
        }
    }

    fn triples(&self, block: &ParseTree, out: &mut Vec<TriplePattern>) -> Result<(), EvalError> {
        for tss in block.children_of(Rule::TriplesSameSubjectPath) {
            let mut it = tss.subtrees();
            let s = self.term(it.next().expect("subject"))?;
            let plist = it.next().expect("property list");
            let mut verb = None;
            for ch in plist.subtrees() {
                match ch.rule {
                    Rule::VerbPath => verb = Some(self.path_node(&ch.children[0])?),
                    Rule::ObjectListPath => {
                        for o in ch.subtrees() {
                            out.push(TriplePattern {
                                s: s.clone(),
                                p: verb.clone().expect("verb"),
                                o: self.term(o)?,
                            });
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn group(&self, ggp: &ParseTree) -> Result<Group, EvalError> {
        let mut g = Group::default();
        let Some(sub) = ggp.child(Rule::GroupGraphPatternSub) else {
            if ggp.child(Rule::SubSelect).is_some() {
                return unsupported("sub-select");
            }
            return Ok(g);
        };
        for ch in sub.subtrees() {
            match ch.rule {
                Rule::TriplesBlock => {
                    let mut ts = Vec::new();
                    self.triples(ch, &mut ts)?;
                    g.elements.push(Element::Triples(ts));
                }
                Rule::Filter => g.filters.push(self.expr(ch.child(Rule::Constraint).expect("constraint"))?),
                Rule::OptionalGraphPattern => {
                    g.elements.push(Element::Optional(self.group(ch.child(Rule::GroupGraphPattern).expect("group"))?))
                }
                Rule::GroupOrUnionGraphPattern if ch.tokens().next().is_none() => {
                    g.elements.push(Element::Group(self.group(ch.child(Rule::GroupGraphPattern).expect("group"))?))
                }
                other => return unsupported(format!("{other}")),
            }
        }
        Ok(g)
    }

    fn expr(&self, t: &ParseTree) -> Result<Expr, EvalError> {
        let subs: Vec<&ParseTree> = t.subtrees().collect();
        let first_tok = t.tokens().next().map(|k| k.text.clone()).unwrap_or_default();
        let bin = |f: fn(Box<Expr>, Box<Expr>) -> Expr| -> Result<Expr, EvalError> {
            let mut acc = self.expr(subs[0])?;
            for s in &subs[1..] {
                acc = f(Box::new(acc), Box::new(self.expr(s)?));
            }
            Ok(acc)
        };
        Ok(match t.rule {
            Rule::Constraint | Rule::BrackettedExpression => self.expr(subs[0])?,
            Rule::ConditionalOrExpression => bin(Expr::Or)?,
            Rule::ConditionalAndExpression => bin(Expr::And)?,
            Rule::RelationalExpression => {
                let lhs = Box::new(self.expr(subs[0])?);
                if let Some(list) = t.child(Rule::ExpressionList) {
                    let items = list.subtrees().map(|m| self.expr(m)).collect::<Result<_, _>>()?;
                    let negated = t.tokens().any(|k| k.is_keyword("NOT"));
                    Expr::In(lhs, items, negated)
                } else {
                    Expr::Cmp(first_tok, lhs, Box::new(self.expr(subs[1])?))
                }
            }
            Rule::AdditiveExpression | Rule::MultiplicativeExpression => {
                let mut acc: Option<Expr> = None;
                let mut op = String::new();
                for c in &t.children {
                    match c {
                        Node::Token(k) => op = k.text.clone(),
                        Node::Tree(sub) => {
                            let e = self.expr(sub)?;
                            acc = Some(match acc {
                                None => e,
                                Some(a) => Expr::Arith(op.clone(), Box::new(a), Box::new(e)),
                            });
                        }
                    }
                }
                acc.expect("operand")
            }
            Rule::UnaryExpression => {
                let inner = Box::new(self.expr(subs[0])?);
                match first_tok.as_str() {
                    "!" => Expr::Not(inner),
                    "-" => Expr::Neg(inner),
                    _ => *inner,
                }
            }
            Rule::Var => Expr::Var(t.text()[1..].to_string()),
            Rule::RdfLiteral | Rule::NumericLiteral | Rule::BooleanLiteral => Expr::Const(self.literal(t)?.to_value()),
            Rule::Iri | Rule::PrefixedName => Expr::Const(Value::Uri(self.iri(t)?)),
            Rule::BuiltInCall => {
                let args = subs.iter().map(|s| self.expr(s)).collect::<Result<_, _>>()?;
                Expr::Call(first_tok.to_uppercase(), args)
            }
            Rule::FunctionCall => {
                let iri = self.iri(subs[0])?;
                let local = iri
                    .strip_prefix(XSD)
                    .ok_or_else(|| EvalError::Unsupported(format!("function <{iri}>")))?;
                let list: Vec<&ParseTree> = t
                    .child(Rule::ExpressionList)
                    .map(|l| l.subtrees().collect())
                    .unwrap_or_default();
                if list.len() != 1 {
                    return unsupported("cast arity");
                }
                Expr::Cast(local.to_string(), Box::new(self.expr(list[0])?))
            }
            Rule::Aggregate => {
                let kind = match first_tok.to_uppercase().as_str() {
                    "COUNT" => AggKind::Count,
                    "SUM" => AggKind::Sum,
                    "AVG" => AggKind::Avg,
                    "MIN" => AggKind::Min,
                    "MAX" => AggKind::Max,
                    other => return unsupported(format!("aggregate {other}")),
                };
                let distinct = t.tokens().any(|k| k.is_keyword("DISTINCT"));
                let arg = match subs.first() {
                    Some(a) => Some(Box::new(self.expr(a)?)),
                    None => None,
                };
                Expr::Agg(kind, distinct, arg)
            }
            other => return unsupported(format!("{other} expression")),
        })
    }

    fn query(&self, tree: &ParseTree) -> Result<Query, EvalError> {
        let q = tree
            .child(Rule::SelectQuery)
            .ok_or_else(|| EvalError::Unsupported("non-SELECT query".into()))?;
        if q.child(Rule::DatasetClause).is_some() || q.child(Rule::ValuesClause).is_some() {
            return unsupported("dataset or VALUES clause");
        }
        let mut out = Query {
            distinct: false,
            star: false,
            select: Vec::new(),
            pattern: self.group(
                q.child(Rule::WhereClause)
                    .and_then(|w| w.child(Rule::GroupGraphPattern))
                    .expect("where"),
            )?,
            group_by: Vec::new(),
            having: Vec::new(),
            order: Vec::new(),
            limit: None,
            offset: 0,
        };
        let sc = q.child(Rule::SelectClause).expect("select");
        for c in &sc.children {
            match c {
                Node::Token(k) if k.is_keyword("DISTINCT") => out.distinct = true,
                Node::Token(k) if k.is_op("*") => out.star = true,
                Node::Token(_) => {}
                Node::Tree(t) if t.rule == Rule::Var => out.select.push(SelectItem::Var(t.text()[1..].to_string())),
                Node::Tree(t) => {
                    let subs: Vec<_> = t.subtrees().collect();
                    let alias = subs[subs.len() - 1].text()[1..].to_string();
                    out.select.push(SelectItem::Bind(self.expr(subs[0])?, alias));
                }
            }
        }
        if let Some(sm) = q.child(Rule::SolutionModifier) {
            if let Some(g) = sm.child(Rule::GroupClause) {
                for c in g.children_of(Rule::GroupCondition) {
                    let subs: Vec<_> = c.subtrees().collect();
                    if c.tokens().any(|k| k.is_keyword("AS")) {
                        let alias = subs[subs.len() - 1].text()[1..].to_string();
                        out.group_by.push(GroupKey::Bind(self.expr(subs[0])?, alias));
                    } else {
                        out.group_by.push(GroupKey::Expr(self.expr(subs[0])?));
                    }
                }
            }
            if let Some(h) = sm.child(Rule::HavingClause) {
                for hc in h.children_of(Rule::HavingCondition) {
                    out.having.push(self.expr(hc.child(Rule::Constraint).expect("constraint"))?);
                }
            }
            if let Some(o) = sm.child(Rule::OrderClause) {
                for c in o.children_of(Rule::OrderCondition) {
                    let desc = c.tokens().any(|k| k.is_keyword("DESC"));
                    out.order.push((self.expr(c.subtrees().next().expect("key"))?, desc));
                }
            }
            if let Some(lo) = sm.child(Rule::LimitOffsetClauses) {
                for c in lo.subtrees() {
                    let n: usize = c
                        .tokens()
                        .nth(1)
                        .and_then(|k| k.text.parse().ok())
                        .ok_or_else(|| EvalError::Unsupported("limit value".into()))?;
                    if c.rule == Rule::LimitClause {
                        out.limit = Some(n);
                    } else {
                        out.offset = n;
                    }
                }
            }
        }
        Ok(out)
    }
}

// ---- pattern evaluation -----------------------------------------------------

fn path_pairs(store: &TripleStore, p: &Path) -> Vec<(Term, Term)> {
    match p {
        Path::Iri(i) => store
            .iter()
            .filter(|(_, pred, _)| matches!(pred, Term::Iri(x) if x == i))
            .map(|(s, _, o)| (s.clone(), o.clone()))
            .collect(),
        Path::Inv(inner) => path_pairs(store, inner).into_iter().map(|(a, b)| (b, a)).collect(),
        Path::Seq(parts) => {
            let mut acc: Option<Vec<(Term, Term)>> = None;
            for part in parts {
                let next = path_pairs(store, part);
                acc = Some(match acc {
                    None => next,
                    Some(prev) => {
                        let mut out = Vec::new();
                        for (a, b) in &prev {
                            for (c, d) in &next {
                                if b == c {
                                    out.push((a.clone(), d.clone()));
                                }
                            }
                        }
                        out
                    }
                });
            }
            acc.unwrap_or_default()
        }
    }
}

fn bind(mu: &Binding, t: &PTerm, value: &Term) -> Option<Binding> {
    match t {
        PTerm::Const(c) => (c == value).then(|| mu.clone()),
        PTerm::Var(v) => match mu.get(v) {
            Some(bound) => (bound == value).then(|| mu.clone()),
            None => {
                let mut m = mu.clone();
                m.insert(v.clone(), value.clone());
                Some(m)
            }
        },
    }
}

fn eval_triples(store: &TripleStore, triples: &[TriplePattern], seeds: Vec<Binding>) -> Vec<Binding> {
    let mut sols = seeds;
    for tp in triples {
        let pairs = path_pairs(store, &tp.p);
        let mut next = Vec::new();
        for mu in &sols {
            for (s, o) in &pairs {
                if let Some(m) = bind(mu, &tp.s, s).and_then(|m| bind(&m, &tp.o, o)) {
                    next.push(m);
                }
            }
        }
        sols = next;
    }
    sols
}

fn compatible(a: &Binding, b: &Binding) -> bool {
    a.iter().all(|(k, v)| b.get(k).is_none_or(|w| w == v))
}

fn merge(a: &Binding, b: &Binding) -> Binding {
    let mut m = a.clone();
    for (k, v) in b {
        m.insert(k.clone(), v.clone());
    }
    m
}

fn eval_group(store: &TripleStore, g: &Group) -> Vec<Binding> {
    let mut sols = vec![Binding::new()];
    for el in &g.elements {
        sols = match el {
            Element::Triples(ts) => eval_triples(store, ts, sols),
            Element::Group(sub) => {
                let right = eval_group(store, sub);
                let mut out = Vec::new();
                for a in &sols {
                    for b in &right {
                        if compatible(a, b) {
                            out.push(merge(a, b));
                        }
                    }
                }
                out
            }
            Element::Optional(sub) => {
                let inner = Group {
                    elements: sub.elements.clone(),
                    filters: Vec::new(),
                };
                let right = eval_group(store, &inner);
                let mut out = Vec::new();
                for a in &sols {
                    let mut any = false;
                    for b in &right {
                        if compatible(a, b) {
                            let m = merge(a, b);
                            if sub.filters.iter().all(|f| ebv(&eval(f, &row_env(&m))) == Some(true)) {
                                out.push(m);
                                any = true;
                            }
                        }
                    }
                    if !any {
                        out.push(a.clone());
                    }
                }
                out
            }
        };
    }
    sols.retain(|mu| g.filters.iter().all(|f| ebv(&eval(f, &row_env(mu))) == Some(true)));
    sols
}

// ---- expression evaluation --------------------------------------------------

/// Evaluation result; `None` is a SPARQL expression error (including unbound).
type Ev = Option<Value>;

struct Env<'a> {
    vars: HashMap<String, Value>,
    group: Option<&'a [Binding]>,
}

fn row_env(mu: &Binding) -> Env<'static> {
    Env {
        vars: mu.iter().map(|(k, v)| (k.clone(), v.to_value())).collect(),
        group: None,
    }
}

fn ebv(v: &Ev) -> Option<bool> {
    match v.as_ref()? {
        Value::Bool(b) => Some(*b),
        Value::Str(s) => Some(!s.is_empty()),
        Value::Int(i) => Some(*i != 0),
        Value::Dec(d) => Some(!d.is_zero()),
        _ => None,
    }
}

fn value_rank(v: &Value) -> u8 {
    match v {
        Value::Null => 0,
        Value::Uri(_) | Value::Node(_) => 1,
        Value::Bool(_) => 2,
        Value::Int(_) | Value::Dec(_) => 3,
        Value::Str(_) => 4,
    }
}

/// Total order used by ORDER BY, MIN and MAX.
fn order_cmp(a: &Value, b: &Value) -> Ordering {
    match (a.as_decimal(), b.as_decimal()) {
        (Some(x), Some(y)) => x.cmp(&y),
        _ => value_rank(a).cmp(&value_rank(b)).then_with(|| a.cmp(b)),
    }
}

fn compare(op: &str, a: &Value, b: &Value) -> Ev {
    let ord = match (a, b) {
        _ if a.is_numeric() && b.is_numeric() => a.as_decimal()?.cmp(&b.as_decimal()?),
        (Value::Str(x), Value::Str(y)) => x.cmp(y),
        (Value::Bool(x), Value::Bool(y)) => x.cmp(y),
        (Value::Uri(x), Value::Uri(y)) if op == "=" || op == "!=" => x.cmp(y),
        (Value::Uri(_), _) | (_, Value::Uri(_)) if op == "=" => return Some(Value::Bool(false)),
        (Value::Uri(_), _) | (_, Value::Uri(_)) if op == "!=" => return Some(Value::Bool(true)),
        _ => return None,
    };
    Some(Value::Bool(match op {
        "=" => ord == Ordering::Equal,
        "!=" => ord != Ordering::Equal,
        "<" => ord == Ordering::Less,
        ">" => ord == Ordering::Greater,
        "<=" => ord != Ordering::Greater,
        ">=" => ord != Ordering::Less,
        _ => return None,
    }))
}

fn numeric(v: Decimal, was_int: bool) -> Value {
    if was_int {
        v.to_i64().map(Value::Int).unwrap_or(Value::Dec(v))
    } else {
        Value::Dec(v)
    }
}

fn lexical(v: &Value) -> Option<String> {
    Some(match v {
        Value::Str(s) => s.clone(),
        Value::Uri(u) => u.clone(),
        Value::Int(i) => i.to_string(),
        Value::Dec(d) => d.normalize().to_string(),
        Value::Bool(b) => b.to_string(),
        _ => return None,
    })
}

fn date_part(v: &Value, start: usize, len: usize) -> Ev {
    let Value::Str(s) = v else { return None };
    let bytes = s.as_bytes();
    let ok = s.len() >= 10 && bytes[4] == b'-' && bytes[7] == b'-';
    if !ok {
        return None;
    }
    s.get(start..start + len)?.parse::<i64>().ok().map(Value::Int)
}

fn call(name: &str, args: &[Expr], env: &Env) -> Ev {
    let arg = |i: usize| eval(&args[i], env);
    let string = |i: usize| match arg(i)? {
        Value::Str(s) => Some(s),
        _ => None,
    };
    match name {
        "BOUND" => Some(Value::Bool(matches!(&args[0], Expr::Var(v) if env.vars.get(v).is_some_and(|x| !x.is_null())))),
        "COALESCE" => args.iter().find_map(|a| eval(a, env).filter(|v| !v.is_null())),
        "CONTAINS" => Some(Value::Bool(string(0)?.contains(&string(1)?))),
        "STRSTARTS" => Some(Value::Bool(string(0)?.starts_with(&string(1)?))),
        "STRENDS" => Some(Value::Bool(string(0)?.ends_with(&string(1)?))),
        "LCASE" => Some(Value::Str(string(0)?.to_lowercase())),
        "UCASE" => Some(Value::Str(string(0)?.to_uppercase())),
        "STRLEN" => Some(Value::Int(string(0)?.chars().count() as i64)),
        "STR" => lexical(&arg(0)?).map(Value::Str),
        "ABS" | "CEIL" | "FLOOR" | "ROUND" => {
            let v = arg(0)?;
            let was_int = matches!(v, Value::Int(_));
            let d = v.as_decimal()?;
            let r = match name {
                "ABS" => d.abs(),
                "CEIL" => d.ceil(),
                "FLOOR" => d.floor(),
                _ => (d + Decimal::new(5, 1)).floor(),
            };
            Some(numeric(r, was_int))
        }
        "YEAR" => date_part(&arg(0)?, 0, 4),
        "MONTH" => date_part(&arg(0)?, 5, 2),
        "DAY" => date_part(&arg(0)?, 8, 2),
        _ => None,
    }
}

fn cast(local: &str, v: Value) -> Ev {
    match local {
        "integer" | "int" | "long" => match v {
            Value::Int(i) => Some(Value::Int(i)),
            Value::Dec(d) => d.trunc().to_i64().map(Value::Int),
            Value::Str(s) => s.trim().parse().ok().map(Value::Int),
            Value::Bool(b) => Some(Value::Int(b as i64)),
            _ => None,
        },
        "decimal" | "double" | "float" => match v {
            Value::Int(i) => Some(Value::Dec(Decimal::from(i))),
            Value::Dec(d) => Some(Value::Dec(d)),
            Value::Str(s) => parse_decimal(&s).map(Value::Dec),
            _ => None,
        },
        "string" => lexical(&v).map(Value::Str),
        "boolean" => match v {
            Value::Bool(b) => Some(Value::Bool(b)),
            Value::Str(s) if s == "true" || s == "false" => Some(Value::Bool(s == "true")),
            _ => None,
        },
        _ => None,
    }
}

fn aggregate(kind: AggKind, distinct: bool, arg: Option<&Expr>, env: &Env) -> Ev {
    let group = env.group?;
    let mut values: Vec<Value> = Vec::new();
    for mu in group {
        match arg {
            None => values.push(Value::Bool(true)),
            Some(e) => {
                // unbound and erroring inputs are skipped, as common engines do
                if let Some(v) = eval(e, &row_env(mu)).filter(|v| !v.is_null()) {
                    values.push(v);
                }
            }
        }
    }
    if distinct {
        let mut seen = HashSet::new();
        values.retain(|v| seen.insert(v.clone()));
    }
    match kind {
        AggKind::Count => Some(Value::Int(values.len() as i64)),
        AggKind::Sum | AggKind::Avg => {
            let mut all_int = true;
            let mut total = Decimal::ZERO;
            for v in &values {
                all_int &= matches!(v, Value::Int(_));
                total = total.checked_add(v.as_decimal()?)?;
            }
            if kind == AggKind::Sum {
                Some(numeric(total, all_int))
            } else if values.is_empty() {
                Some(Value::Int(0))
            } else {
                Some(Value::Dec(total.checked_div(Decimal::from(values.len()))?))
            }
        }
        AggKind::Min => values.into_iter().min_by(order_cmp),
        AggKind::Max => values.into_iter().max_by(order_cmp),
    }
}

fn eval(e: &Expr, env: &Env) -> Ev {
    match e {
        Expr::Var(v) => env.vars.get(v).filter(|x| !x.is_null()).cloned(),
        Expr::Const(c) => Some(c.clone()),
        Expr::Or(a, b) => match (ebv(&eval(a, env)), ebv(&eval(b, env))) {
            (Some(true), _) | (_, Some(true)) => Some(Value::Bool(true)),
            (Some(false), Some(false)) => Some(Value::Bool(false)),
            _ => None,
        },
        Expr::And(a, b) => match (ebv(&eval(a, env)), ebv(&eval(b, env))) {
            (Some(false), _) | (_, Some(false)) => Some(Value::Bool(false)),
            (Some(true), Some(true)) => Some(Value::Bool(true)),
            _ => None,
        },
        Expr::Not(a) => ebv(&eval(a, env)).map(|b| Value::Bool(!b)),
        Expr::Neg(a) => match eval(a, env)? {
            Value::Int(i) => i.checked_neg().map(Value::Int),
            Value::Dec(d) => Some(Value::Dec(-d)),
            _ => None,
        },
        Expr::Cmp(op, a, b) => compare(op, &eval(a, env)?, &eval(b, env)?),
        Expr::In(a, items, negated) => {
            let v = eval(a, env)?;
            let mut errored = false;
            for it in items {
                match eval(it, env).and_then(|w| compare("=", &v, &w)) {
                    Some(Value::Bool(true)) => return Some(Value::Bool(!negated)),
                    None => errored = true,
                    _ => {}
                }
            }
            if errored {
                None
            } else {
                Some(Value::Bool(*negated))
            }
        }
        Expr::Arith(op, a, b) => {
            let (x, y) = (eval(a, env)?, eval(b, env)?);
            let ints = matches!((&x, &y), (Value::Int(_), Value::Int(_)));
            let (x, y) = (x.as_decimal()?, y.as_decimal()?);
            let r = match op.as_str() {
                "+" => x.checked_add(y)?,
                "-" => x.checked_sub(y)?,
                "*" => x.checked_mul(y)?,
                "/" => return x.checked_div(y).map(Value::Dec),
                _ => return None,
            };
            Some(numeric(r, ints))
        }
        Expr::Call(name, args) => call(name, args, env),
        Expr::Cast(local, a) => cast(local, eval(a, env)?),
        Expr::Agg(kind, distinct, arg) => aggregate(*kind, *distinct, arg.as_deref(), env),
    }
}

fn has_aggregate(e: &Expr) -> bool {
    match e {
        Expr::Agg(..) => true,
        Expr::Or(a, b) | Expr::And(a, b) | Expr::Cmp(_, a, b) | Expr::Arith(_, a, b) => has_aggregate(a) || has_aggregate(b),
        Expr::Not(a) | Expr::Neg(a) | Expr::Cast(_, a) => has_aggregate(a),
        Expr::In(a, items, _) => has_aggregate(a) || items.iter().any(has_aggregate),
        Expr::Call(_, args) => args.iter().any(has_aggregate),
        Expr::Var(_) | Expr::Const(_) => false,
    }
}

fn pattern_vars(g: &Group, out: &mut Vec<String>) {
    fn add(out: &mut Vec<String>, t: &PTerm) {
        if let PTerm::Var(v) = t {
            if !out.contains(v) {
                out.push(v.clone());
            }
        }
    }
    for el in &g.elements {
        match el {
            Element::Triples(ts) => {
                for tp in ts {
                    add(out, &tp.s);
                    add(out, &tp.o);
                }
            }
            Element::Group(sub) | Element::Optional(sub) => pattern_vars(sub, out),
        }
    }
}

struct Row {
    env: HashMap<String, Value>,
    keys: Vec<Value>,
}

/// Evaluates a parsed SELECT query against the store. Prefixes the query
/// does not declare resolve through the store's declarations, then the
/// standard rdf, rdfs and xsd namespaces.
pub fn eval_sparql(store: &TripleStore, tree: &ParseTree) -> Result<ResultTable, EvalError> {
    let lower = Lower {
        prefixes: resolve_prefixes(tree),
        store_prefixes: store.prefixes.clone(),
    };
    let q = lower.query(tree)?;
    let mut in_scope = Vec::new();
    pattern_vars(&q.pattern, &mut in_scope);

    let columns: Vec<String> = if q.star {
        in_scope.clone()
    } else {
        q.select
            .iter()
            .map(|s| match s {
                SelectItem::Var(v) => v.clone(),
                SelectItem::Bind(_, a) => a.clone(),
            })
            .collect()
    };
    let mut known: HashSet<&str> = in_scope.iter().map(String::as_str).collect();
    for s in &q.select {
        if let SelectItem::Bind(_, a) = s {
            known.insert(a);
        }
    }
    for g in &q.group_by {
        if let GroupKey::Bind(_, a) = g {
            known.insert(a);
        }
    }
    if let Some(c) = columns.iter().find(|c| !known.contains(c.as_str())) {
        return Err(EvalError::UnboundProjection(c.clone()));
    }

    let sols = eval_group(store, &q.pattern);
    let grouped = !q.group_by.is_empty()
        || q.having.iter().any(has_aggregate)
        || q.select.iter().any(|s| matches!(s, SelectItem::Bind(e, _) if has_aggregate(e)))
        || q.order.iter().any(|(e, _)| has_aggregate(e));

    let mut rows: Vec<Row> = Vec::new();
    if grouped {
        let mut groups: Vec<(Vec<Option<Value>>, Vec<Binding>)> = Vec::new();
        if q.group_by.is_empty() {
            groups.push((Vec::new(), sols));
        } else {
            for mu in sols {
                let env = row_env(&mu);
                let key: Vec<Option<Value>> = q
                    .group_by
                    .iter()
                    .map(|g| match g {
                        GroupKey::Expr(e) | GroupKey::Bind(e, _) => eval(e, &env),
                    })
                    .collect();
                match groups.iter_mut().find(|(k, _)| *k == key) {
                    Some((_, members)) => members.push(mu),
                    None => groups.push((key, vec![mu])),
                }
            }
        }
        for (key, members) in &groups {
            let mut vars = HashMap::new();
            for (g, k) in q.group_by.iter().zip(key) {
                let name = match g {
                    GroupKey::Expr(Expr::Var(v)) => v.clone(),
                    GroupKey::Bind(_, a) => a.clone(),
                    GroupKey::Expr(_) => continue,
                };
                vars.insert(name, k.clone().unwrap_or(Value::Null));
            }
            let mut env = Env {
                vars,
                group: Some(members),
            };
            if !q.having.iter().all(|h| ebv(&eval(h, &env)) == Some(true)) {
                continue;
            }
            for s in &q.select {
                if let SelectItem::Bind(e, a) = s {
                    let v = eval(e, &env).unwrap_or(Value::Null);
                    env.vars.insert(a.clone(), v);
                }
            }
            let keys = q.order.iter().map(|(e, _)| eval(e, &env).unwrap_or(Value::Null)).collect();
            rows.push(Row { env: env.vars, keys });
        }
    } else {
        for mu in &sols {
            let mut env = row_env(mu);
            for s in &q.select {
                if let SelectItem::Bind(e, a) = s {
                    let v = eval(e, &env).unwrap_or(Value::Null);
                    env.vars.insert(a.clone(), v);
                }
            }
            let keys = q.order.iter().map(|(e, _)| eval(e, &env).unwrap_or(Value::Null)).collect();
            rows.push(Row { env: env.vars, keys });
        }
    }

    rows.sort_by(|a, b| {
        for (i, (_, desc)) in q.order.iter().enumerate() {
            let o = order_cmp(&a.keys[i], &b.keys[i]);
            let o = if *desc { o.reverse() } else { o };
            if o != Ordering::Equal {
                return o;
            }
        }
        Ordering::Equal
    });

    let mut table = ResultTable::new(columns.clone());
    let mut seen = HashSet::new();
    let mut projected = Vec::new();
    for r in rows {
        let row: Vec<Value> = columns
            .iter()
            .map(|c| r.env.get(c).cloned().unwrap_or(Value::Null).presented())
            .collect();
        if q.distinct && !seen.insert(row.clone()) {
            continue;
        }
        projected.push(row);
    }
    let end = q.limit.map_or(projected.len(), |l| (q.offset + l).min(projected.len()));
    for row in projected.into_iter().take(end).skip(q.offset) {
        table.push(row);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::turtle::load_turtle;
    use s2c_core::parser::parse_query;

    fn run(ttl: &str, q: &str) -> ResultTable {
        let store = load_turtle(ttl).unwrap();
        eval_sparql(&store, &parse_query(q).unwrap()).unwrap()
    }

    const TOY: &str = "@prefix : <http://example.org/> .
        :emma a :Person ; :name 'Emma' ; :knows :y1, :y2 .
        :y1 a :Person ; :age 30 .
        :y2 a :Person ; :age 40 .";

    #[test]
    fn empty_store_gives_no_rows() {
        let t = run("", "PREFIX : <http://example.org/> SELECT ?x WHERE { ?x a :Person }");
        assert!(t.is_empty());
    }

    #[test]
    fn average_age_of_known_people() {
        let t = run(
            TOY,
            "PREFIX : <http://example.org/> SELECT (AVG(?ag) AS ?avgAge) WHERE { ?x a :Person . ?x :name 'Emma' . ?x :knows ?y . ?y :age ?ag . }",
        );
        assert_eq!(t.rows, [[Value::Dec(35.into())]]);
    }

    #[test]
    fn count_all_singers() {
        let t = run(
            "@prefix : <http://x/> . :a a :singer . :b a :singer . :c a :singer .",
            "PREFIX : <http://x/> select (count( *) as ?aggregation_all) where { ?t1 a :singer . }",
        );
        assert_eq!(t.rows, [[Value::Int(3)]]);
    }

    #[test]
    fn optional_keeps_unmatched_rows() {
        let t = run(
            TOY,
            "PREFIX : <http://example.org/> SELECT ?x ?n WHERE { ?x a :Person OPTIONAL { ?x :name ?n } } ORDER BY ?n",
        );
        assert_eq!(t.len(), 3);
        assert_eq!(t.rows[0][1], Value::Null);
    }

    #[test]
    fn filter_order_limit_offset() {
        let t = run(
            TOY,
            "PREFIX : <http://example.org/> SELECT ?a WHERE { ?y :age ?a FILTER(?a >= 30 && ?a < 100) } ORDER BY DESC(?a) LIMIT 1 OFFSET 1",
        );
        assert_eq!(t.rows, [[Value::Int(30)]]);
    }

    #[test]
    fn group_having() {
        let t = run(
            TOY,
            "PREFIX : <http://example.org/> SELECT ?x (COUNT(?y) AS ?n) WHERE { ?x :knows ?y } GROUP BY ?x HAVING (COUNT(?y) > 1)",
        );
        assert_eq!(t.rows, [[Value::Uri("http://example.org/emma".into()), Value::Int(2)]]);
    }

    #[test]
    fn aggregates_over_empty_input() {
        let t = run(
            "",
            "PREFIX : <http://x/> SELECT (COUNT(?a) AS ?c) (SUM(?a) AS ?s) (AVG(?a) AS ?m) (MAX(?a) AS ?x) WHERE { ?e :v ?a }",
        );
        assert_eq!(t.rows, [[Value::Int(0), Value::Int(0), Value::Int(0), Value::Null]]);
    }

    #[test]
    fn unbound_projection_is_an_error() {
        let store = load_turtle(TOY).unwrap();
        let q = parse_query("PREFIX : <http://example.org/> SELECT ?zz WHERE { ?x a :Person }").unwrap();
        assert_eq!(eval_sparql(&store, &q), Err(EvalError::UnboundProjection("zz".into())));
    }

    #[test]
    fn paths_and_inverse() {
        let t = run(
            TOY,
            "PREFIX : <http://example.org/> SELECT ?a WHERE { ?x :knows/:age ?a } ORDER BY ?a",
        );
        assert_eq!(t.rows, [[Value::Int(30)], [Value::Int(40)]]);
        let t = run(TOY, "PREFIX : <http://example.org/> SELECT ?x WHERE { :y1 ^:knows ?x }");
        assert_eq!(t.rows, [[Value::Uri("http://example.org/emma".into())]]);
    }
}
