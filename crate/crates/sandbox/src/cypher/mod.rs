//! Evaluator for the Cypher subset the transpiler emits, run against an
//! in-memory [`PropertyGraph`].

mod syntax;

pub use syntax::{parse, Clause, Expr};

use crate::graph::PropertyGraph;
use crate::rdf::{parse_decimal, Literal};
use crate::value::{ResultTable, Value};
use rust_decimal::prelude::*;
use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::fmt;
use syntax::{is_anonymous, Dir, PatternPart, Projection, StrOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CypherErrorKind {
    /// Rejected before execution: parse errors, unbound identifiers,
    /// unknown functions, misplaced aggregates.
    Syntax,
    /// Type errors and arithmetic failures during execution.
    Runtime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CypherEvalError {
    pub kind: CypherErrorKind,
    pub message: String,
}

impl CypherEvalError {
    pub fn syntax(message: impl Into<String>) -> Self {
        Self {
            kind: CypherErrorKind::Syntax,
            message: message.into(),
        }
    }

    pub fn runtime(message: impl Into<String>) -> Self {
        Self {
            kind: CypherErrorKind::Runtime,
            message: message.into(),
        }
    }
}

impl fmt::Display for CypherEvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = match self.kind {
            CypherErrorKind::Syntax => "syntax error",
            CypherErrorKind::Runtime => "runtime error",
        };
        write!(f, "{k}: {}", self.message)
    }
}

impl std::error::Error for CypherEvalError {}

/// Runtime value. Floats are kept as decimals so aggregates stay exact.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum CVal {
    Null,
    Bool(bool),
    Int(i64),
    Float(Decimal),
    Str(String),
    Node(usize),
    Rel(usize),
    List(Vec<CVal>),
}

impl CVal {
    fn num(&self) -> Option<Decimal> {
        match self {
            CVal::Int(i) => Some(Decimal::from(*i)),
            CVal::Float(f) => Some(*f),
            _ => None,
        }
    }

    fn type_name(&self) -> &'static str {
        match self {
            CVal::Null => "Null",
            CVal::Bool(_) => "Boolean",
            CVal::Int(_) => "Integer",
            CVal::Float(_) => "Float",
            CVal::Str(_) => "String",
            CVal::Node(_) => "Node",
            CVal::Rel(_) => "Relationship",
            CVal::List(_) => "List",
        }
    }
}

impl From<&Literal> for CVal {
    fn from(l: &Literal) -> Self {
        match l {
            Literal::Str(s) => CVal::Str(s.clone()),
            Literal::Int(i) => CVal::Int(*i),
            Literal::Dec(d) => CVal::Float(*d),
            Literal::Bool(b) => CVal::Bool(*b),
        }
    }
}

type Row = HashMap<String, CVal>;
type EResult<T> = Result<T, CypherEvalError>;

fn type_error(what: &str, v: &CVal) -> CypherEvalError {
    CypherEvalError::runtime(format!("{what} cannot be applied to {}", v.type_name()))
}

/// Ternary equality: `None` is null.
fn equals(a: &CVal, b: &CVal) -> Option<bool> {
    match (a, b) {
        (CVal::Null, _) | (_, CVal::Null) => None,
        (CVal::List(x), CVal::List(y)) => {
            if x.len() != y.len() {
                return Some(false);
            }
            let mut unknown = false;
            for (p, q) in x.iter().zip(y) {
                match equals(p, q) {
                    Some(false) => return Some(false),
                    None => unknown = true,
                    _ => {}
                }
            }
            if unknown {
                None
            } else {
                Some(true)
            }
        }
        _ => match (a.num(), b.num()) {
            (Some(x), Some(y)) => Some(x == y),
            _ => Some(a == b),
        },
    }
}

/// Ordering comparison; `None` when the values are not comparable.
fn compare(a: &CVal, b: &CVal) -> Option<Ordering> {
    match (a, b) {
        (CVal::Str(x), CVal::Str(y)) => Some(x.cmp(y)),
        (CVal::Bool(x), CVal::Bool(y)) => Some(x.cmp(y)),
        _ => Some(a.num()?.cmp(&b.num()?)),
    }
}

fn order_rank(v: &CVal) -> u8 {
    match v {
        CVal::Node(_) => 0,
        CVal::Rel(_) => 1,
        CVal::List(_) => 2,
        CVal::Str(_) => 3,
        CVal::Bool(_) => 4,
        CVal::Int(_) | CVal::Float(_) => 5,
        CVal::Null => 6,
    }
}

/// Total order used by ORDER BY, min and max; nulls sort last ascending.
fn order_cmp(a: &CVal, b: &CVal) -> Ordering {
    match (a, b) {
        (CVal::Node(x), CVal::Node(y)) | (CVal::Rel(x), CVal::Rel(y)) => x.cmp(y),
        (CVal::List(x), CVal::List(y)) => {
            for (p, q) in x.iter().zip(y) {
                let o = order_cmp(p, q);
                if o != Ordering::Equal {
                    return o;
                }
            }
            x.len().cmp(&y.len())
        }
        _ => match compare(a, b) {
            Some(o) => o,
            None => order_rank(a).cmp(&order_rank(b)),
        },
    }
}

fn truth(v: &CVal, what: &str) -> EResult<Option<bool>> {
    match v {
        CVal::Null => Ok(None),
        CVal::Bool(b) => Ok(Some(*b)),
        other => Err(type_error(what, other)),
    }
}

fn from_truth(t: Option<bool>) -> CVal {
    t.map(CVal::Bool).unwrap_or(CVal::Null)
}

fn float_text(d: Decimal) -> String {
    let n = d.normalize();
    if n.fract().is_zero() {
        format!("{n}.0")
    } else {
        n.to_string()
    }
}

fn int_result(d: Decimal) -> EResult<CVal> {
    d.to_i64()
        .map(CVal::Int)
        .ok_or_else(|| CypherEvalError::runtime("integer overflow"))
}

struct Ctx<'g> {
    graph: &'g PropertyGraph,
}

impl Ctx<'_> {
    fn eval(&self, e: &Expr, row: &Row) -> EResult<CVal> {
        self.eval_in(e, row, None)
    }

    /// `group` is set while computing an aggregating projection.
    fn eval_in(&self, e: &Expr, row: &Row, group: Option<&[Row]>) -> EResult<CVal> {
        let ev = |x: &Expr| self.eval_in(x, row, group);
        Ok(match e {
            Expr::Var(v) => row.get(v).cloned().unwrap_or(CVal::Null),
            Expr::Lit(c) => c.clone(),
            Expr::Prop(x, key) => match ev(x)? {
                CVal::Null => CVal::Null,
                CVal::Node(id) => self.graph.nodes[id].properties.get(key).map(CVal::from).unwrap_or(CVal::Null),
                CVal::Rel(_) => CVal::Null,
                other => return Err(type_error("property access", &other)),
            },
            Expr::List(items) => CVal::List(items.iter().map(ev).collect::<EResult<_>>()?),
            Expr::Not(x) => from_truth(truth(&ev(x)?, "NOT")?.map(|b| !b)),
            Expr::Neg(x) => match ev(x)? {
                CVal::Null => CVal::Null,
                CVal::Int(i) => CVal::Int(i.checked_neg().ok_or_else(|| CypherEvalError::runtime("integer overflow"))?),
                CVal::Float(f) => CVal::Float(-f),
                other => return Err(type_error("unary minus", &other)),
            },
            Expr::And(a, b) => {
                let (x, y) = (truth(&ev(a)?, "AND")?, truth(&ev(b)?, "AND")?);
                from_truth(match (x, y) {
                    (Some(false), _) | (_, Some(false)) => Some(false),
                    (Some(true), Some(true)) => Some(true),
                    _ => None,
                })
            }
            Expr::Or(a, b) => {
                let (x, y) = (truth(&ev(a)?, "OR")?, truth(&ev(b)?, "OR")?);
                from_truth(match (x, y) {
                    (Some(true), _) | (_, Some(true)) => Some(true),
                    (Some(false), Some(false)) => Some(false),
                    _ => None,
                })
            }
            Expr::Xor(a, b) => {
                let (x, y) = (truth(&ev(a)?, "XOR")?, truth(&ev(b)?, "XOR")?);
                from_truth(x.zip(y).map(|(p, q)| p != q))
            }
            Expr::Cmp(op, a, b) => {
                let (x, y) = (ev(a)?, ev(b)?);
                if x == CVal::Null || y == CVal::Null {
                    return Ok(CVal::Null);
                }
                from_truth(match *op {
                    "=" => equals(&x, &y),
                    "<>" => equals(&x, &y).map(|t| !t),
                    _ => compare(&x, &y).map(|o| match *op {
                        "<" => o == Ordering::Less,
                        ">" => o == Ordering::Greater,
                        "<=" => o != Ordering::Greater,
                        _ => o != Ordering::Less,
                    }),
                })
            }
            Expr::In(a, b) => {
                let x = ev(a)?;
                match ev(b)? {
                    CVal::Null => CVal::Null,
                    CVal::List(items) => {
                        let mut unknown = false;
                        for it in &items {
                            match equals(&x, it) {
                                Some(true) => return Ok(CVal::Bool(true)),
                                None => unknown = true,
                                _ => {}
                            }
                        }
                        if unknown {
                            CVal::Null
                        } else {
                            CVal::Bool(false)
                        }
                    }
                    other => return Err(type_error("IN", &other)),
                }
            }
            Expr::Str(op, a, b) => match (ev(a)?, ev(b)?) {
                (CVal::Str(x), CVal::Str(y)) => CVal::Bool(match op {
                    StrOp::StartsWith => x.starts_with(&y),
                    StrOp::EndsWith => x.ends_with(&y),
                    StrOp::Contains => x.contains(&y),
                }),
                _ => CVal::Null,
            },
            Expr::IsNull(x, negated) => CVal::Bool((ev(x)? == CVal::Null) != *negated),
            Expr::Arith(op, a, b) => arith(op, ev(a)?, ev(b)?)?,
            Expr::CountStar => {
                let g = group.ok_or_else(|| CypherEvalError::runtime("aggregation outside projection"))?;
                CVal::Int(g.len() as i64)
            }
            Expr::Call(name, distinct, args) if syntax::AGGREGATES.contains(&name.as_str()) => {
                let g = group.ok_or_else(|| CypherEvalError::runtime("aggregation outside projection"))?;
                let mut values = Vec::new();
                for r in g {
                    let v = self.eval(&args[0], r)?;
                    if v != CVal::Null {
                        values.push(v);
                    }
                }
                if *distinct {
                    let mut seen = HashSet::new();
                    values.retain(|v| seen.insert(v.clone()));
                }
                aggregate(name, values)?
            }
            Expr::Call(name, _, args) => {
                let vals = args.iter().map(ev).collect::<EResult<Vec<_>>>()?;
                function(name, vals)?
            }
        })
    }
}

fn arith(op: &str, x: CVal, y: CVal) -> EResult<CVal> {
    if x == CVal::Null || y == CVal::Null {
        return Ok(CVal::Null);
    }
    if op == "+" {
        match (&x, &y) {
            (CVal::Str(a), CVal::Str(b)) => return Ok(CVal::Str(format!("{a}{b}"))),
            (CVal::Str(a), n) if n.num().is_some() => return Ok(CVal::Str(format!("{a}{}", show(n)))),
            (n, CVal::Str(b)) if n.num().is_some() => return Ok(CVal::Str(format!("{}{b}", show(n)))),
            (CVal::List(a), CVal::List(b)) => return Ok(CVal::List(a.iter().chain(b).cloned().collect())),
            _ => {}
        }
    }
    let (Some(a), Some(b)) = (x.num(), y.num()) else {
        return Err(CypherEvalError::runtime(format!(
            "cannot apply {op} to {} and {}",
            x.type_name(),
            y.type_name()
        )));
    };
    let ints = matches!((&x, &y), (CVal::Int(_), CVal::Int(_)));
    let overflow = || CypherEvalError::runtime("arithmetic overflow");
    if ints {
        let (a, b) = (a.to_i64().unwrap(), b.to_i64().unwrap());
        let r = match op {
            "+" => a.checked_add(b),
            "-" => a.checked_sub(b),
            "*" => a.checked_mul(b),
            "/" | "%" if b == 0 => return Err(CypherEvalError::runtime("/ by zero")),
            "/" => a.checked_div(b),
            _ => a.checked_rem(b),
        };
        return r.map(CVal::Int).ok_or_else(overflow);
    }
    let r = match op {
        "+" => a.checked_add(b),
        "-" => a.checked_sub(b),
        "*" => a.checked_mul(b),
        "/" => a.checked_div(b),
        _ => a.checked_rem(b),
    };
    r.map(CVal::Float).ok_or_else(overflow)
}

fn show(v: &CVal) -> String {
    match v {
        CVal::Int(i) => i.to_string(),
        CVal::Float(f) => float_text(*f),
        CVal::Str(s) => s.clone(),
        CVal::Bool(b) => b.to_string(),
        other => format!("{other:?}"),
    }
}

fn aggregate(name: &str, values: Vec<CVal>) -> EResult<CVal> {
    Ok(match name {
        "count" => CVal::Int(values.len() as i64),
        "sum" | "avg" => {
            let mut all_int = true;
            let mut total = Decimal::ZERO;
            for v in &values {
                let n = v.num().ok_or_else(|| type_error(name, v))?;
                all_int &= matches!(v, CVal::Int(_));
                total = total.checked_add(n).ok_or_else(|| CypherEvalError::runtime("overflow in sum"))?;
            }
            if name == "sum" {
                if all_int {
                    int_result(total)?
                } else {
                    CVal::Float(total)
                }
            } else if values.is_empty() {
                CVal::Null
            } else {
                CVal::Float(total / Decimal::from(values.len()))
            }
        }
        "min" => values.into_iter().min_by(order_cmp).unwrap_or(CVal::Null),
        _ => values.into_iter().max_by(order_cmp).unwrap_or(CVal::Null),
    })
}

fn function(name: &str, args: Vec<CVal>) -> EResult<CVal> {
    let a = &args[0];
    if name == "coalesce" {
        return Ok(args.into_iter().find(|v| *v != CVal::Null).unwrap_or(CVal::Null));
    }
    if *a == CVal::Null {
        return Ok(CVal::Null);
    }
    Ok(match name {
        "substring" => {
            let CVal::Str(s) = a else { return Err(type_error(name, a)) };
            let start = match &args[1] {
                CVal::Int(i) if *i >= 0 => *i as usize,
                other => return Err(type_error(name, other)),
            };
            let chars: Vec<char> = s.chars().collect();
            let from = start.min(chars.len());
            let to = match args.get(2) {
                Some(CVal::Int(l)) if *l >= 0 => (from + *l as usize).min(chars.len()),
                Some(other) => return Err(type_error(name, other)),
                None => chars.len(),
            };
            CVal::Str(chars[from..to].iter().collect())
        }
        "tointeger" => match a {
            CVal::Int(i) => CVal::Int(*i),
            CVal::Float(f) => int_result(f.trunc())?,
            CVal::Bool(b) => CVal::Int(*b as i64),
            CVal::Str(s) => match s.trim().parse::<i64>() {
                Ok(i) => CVal::Int(i),
                Err(_) => match parse_decimal(s) {
                    Some(d) => int_result(d.trunc())?,
                    None => CVal::Null,
                },
            },
            other => return Err(type_error(name, other)),
        },
        "tofloat" => match a {
            CVal::Int(i) => CVal::Float(Decimal::from(*i)),
            CVal::Float(f) => CVal::Float(*f),
            CVal::Str(s) => parse_decimal(s).map(CVal::Float).unwrap_or(CVal::Null),
            other => return Err(type_error(name, other)),
        },
        "tostring" => match a {
            CVal::Int(_) | CVal::Float(_) | CVal::Str(_) | CVal::Bool(_) => CVal::Str(show(a)),
            other => return Err(type_error(name, other)),
        },
        "toboolean" => match a {
            CVal::Bool(b) => CVal::Bool(*b),
            CVal::Str(s) if s.eq_ignore_ascii_case("true") => CVal::Bool(true),
            CVal::Str(s) if s.eq_ignore_ascii_case("false") => CVal::Bool(false),
            CVal::Str(_) => CVal::Null,
            other => return Err(type_error(name, other)),
        },
        "size" => match a {
            CVal::Str(s) => CVal::Int(s.chars().count() as i64),
            CVal::List(l) => CVal::Int(l.len() as i64),
            other => return Err(type_error(name, other)),
        },
        "tolower" | "toupper" => match a {
            CVal::Str(s) if name == "tolower" => CVal::Str(s.to_lowercase()),
            CVal::Str(s) => CVal::Str(s.to_uppercase()),
            other => return Err(type_error(name, other)),
        },
        "abs" => match a {
            CVal::Int(i) => CVal::Int(i.checked_abs().ok_or_else(|| CypherEvalError::runtime("integer overflow"))?),
            CVal::Float(f) => CVal::Float(f.abs()),
            other => return Err(type_error(name, other)),
        },
        "ceil" | "floor" | "round" => {
            let d = a.num().ok_or_else(|| type_error(name, a))?;
            CVal::Float(match name {
                "ceil" => d.ceil(),
                "floor" => d.floor(),
                _ => (d + Decimal::new(5, 1)).floor(),
            })
        }
        other => return Err(CypherEvalError::syntax(format!("Unknown function '{other}'"))),
    })
}

// ---- clauses ----------------------------------------------------------------

impl Ctx<'_> {
    fn node_ok(&self, np: &syntax::NodePat, id: usize, row: &Row) -> EResult<bool> {
        let node = &self.graph.nodes[id];
        if !np.labels.iter().all(|l| node.labels.contains(l)) {
            return Ok(false);
        }
        for (k, e) in &np.props {
            let want = self.eval(e, row)?;
            let have = node.properties.get(k).map(CVal::from).unwrap_or(CVal::Null);
            if equals(&have, &want) != Some(true) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Binds `np` to node `id`, or returns `None` if it cannot.
    fn bind_node(&self, np: &syntax::NodePat, id: usize, row: &Row) -> EResult<Option<Row>> {
        match row.get(&np.var) {
            Some(CVal::Node(b)) if *b != id => return Ok(None),
            Some(CVal::Node(_)) => {}
            Some(_) => return Ok(None),
            None => {}
        }
        if !self.node_ok(np, id, row)? {
            return Ok(None);
        }
        let mut r = row.clone();
        r.insert(np.var.clone(), CVal::Node(id));
        Ok(Some(r))
    }

    fn match_parts(
        &self,
        parts: &[PatternPart],
        row: Row,
        used: &mut Vec<usize>,
        out: &mut Vec<Row>,
    ) -> EResult<()> {
        let Some((first, rest)) = parts.split_first() else {
            out.push(row);
            return Ok(());
        };
        let start = &first.nodes[0];
        let candidates: Vec<usize> = match row.get(&start.var) {
            Some(CVal::Node(id)) => vec![*id],
            Some(_) => return Ok(()),
            None => (0..self.graph.nodes.len()).collect(),
        };
        for id in candidates {
            if let Some(r) = self.bind_node(start, id, &row)? {
                self.match_chain(first, 0, id, r, used, &mut |r, used| self.match_parts(rest, r, used, out))?;
            }
        }
        Ok(())
    }

    fn match_chain(
        &self,
        part: &PatternPart,
        step: usize,
        at: usize,
        row: Row,
        used: &mut Vec<usize>,
        k: &mut dyn FnMut(Row, &mut Vec<usize>) -> EResult<()>,
    ) -> EResult<()> {
        let Some(rel) = part.rels.get(step) else {
            return k(row, used);
        };
        let next = &part.nodes[step + 1];
        for (eid, e) in self.graph.edges.iter().enumerate() {
            if used.contains(&eid) || !(rel.types.is_empty() || rel.types.contains(&e.ty)) {
                continue;
            }
            let mut ends = Vec::new();
            if matches!(rel.dir, Dir::Out | Dir::Both) && e.src == at {
                ends.push(e.dst);
            }
            if matches!(rel.dir, Dir::In | Dir::Both) && e.dst == at {
                ends.push(e.src);
            }
            for other in ends {
                let mut r = row.clone();
                if let Some(v) = &rel.var {
                    match r.get(v) {
                        Some(CVal::Rel(b)) if *b == eid => {}
                        Some(_) => continue,
                        None => {
                            r.insert(v.clone(), CVal::Rel(eid));
                        }
                    }
                }
                if let Some(r) = self.bind_node(next, other, &r)? {
                    used.push(eid);
                    let res = self.match_chain(part, step + 1, other, r, used, k);
                    used.pop();
                    res?;
                }
            }
        }
        Ok(())
    }

    fn passes(&self, filter: Option<&Expr>, row: &Row) -> EResult<bool> {
        match filter {
            None => Ok(true),
            Some(f) => Ok(truth(&self.eval(f, row)?, "WHERE")? == Some(true)),
        }
    }

    fn run_match(&self, optional: bool, parts: &[PatternPart], filter: Option<&Expr>, rows: Vec<Row>) -> EResult<Vec<Row>> {
        let mut out = Vec::new();
        for row in rows {
            let mut found = Vec::new();
            self.match_parts(parts, row.clone(), &mut Vec::new(), &mut found)?;
            let mut kept = Vec::new();
            for r in found {
                if self.passes(filter, &r)? {
                    kept.push(r);
                }
            }
            if kept.is_empty() && optional {
                let mut r = row;
                for p in parts {
                    for n in &p.nodes {
                        r.entry(n.var.clone()).or_insert(CVal::Null);
                    }
                    for v in p.rels.iter().filter_map(|x| x.var.as_ref()) {
                        r.entry(v.clone()).or_insert(CVal::Null);
                    }
                }
                kept.push(r);
            }
            out.extend(kept);
        }
        Ok(out)
    }

    fn count_arg(&self, e: &Option<Expr>, what: &str) -> EResult<Option<usize>> {
        match e {
            None => Ok(None),
            Some(e) => match self.eval(e, &Row::new())? {
                CVal::Int(i) if i >= 0 => Ok(Some(i as usize)),
                other => Err(CypherEvalError::runtime(format!("{what} expects a non-negative integer, got {other:?}"))),
            },
        }
    }

    /// Runs a WITH or RETURN body. Returns rows keyed by output name plus
    /// the column order.
    fn project(&self, p: &Projection, rows: Vec<Row>) -> EResult<(Vec<String>, Vec<Row>)> {
        let mut columns: Vec<String> = Vec::new();
        if p.star {
            let mut names: Vec<String> = rows
                .first()
                .map(|r| r.keys().filter(|k| !is_anonymous(k)).cloned().collect())
                .unwrap_or_default();
            names.sort();
            columns.extend(names);
        }
        for it in &p.items {
            if !columns.contains(&it.alias) {
                columns.push(it.alias.clone());
            }
        }

        // (projected row, row visible to ORDER BY)
        let mut out: Vec<(Row, Row)> = Vec::new();
        if p.aggregating() {
            let keys: Vec<&syntax::ProjItem> = p.items.iter().filter(|i| !i.expr.has_aggregate()).collect();
            let mut groups: Vec<(Vec<CVal>, Vec<Row>)> = Vec::new();
            let mut index: HashMap<Vec<CVal>, usize> = HashMap::new();
            for r in rows {
                let key = keys.iter().map(|k| self.eval(&k.expr, &r)).collect::<EResult<Vec<_>>>()?;
                match index.get(&key) {
                    Some(&i) => groups[i].1.push(r),
                    None => {
                        index.insert(key.clone(), groups.len());
                        groups.push((key, vec![r]));
                    }
                }
            }
            if groups.is_empty() && keys.is_empty() {
                groups.push((Vec::new(), Vec::new()));
            }
            for (key, members) in groups {
                let mut proj = Row::new();
                for (k, v) in keys.iter().zip(key) {
                    proj.insert(k.alias.clone(), v);
                }
                let base = members.first().cloned().unwrap_or_default();
                for it in p.items.iter().filter(|i| i.expr.has_aggregate()) {
                    proj.insert(it.alias.clone(), self.eval_in(&it.expr, &base, Some(&members))?);
                }
                out.push((proj.clone(), proj));
            }
        } else {
            for r in rows {
                let mut proj = Row::new();
                if p.star {
                    for (k, v) in &r {
                        if !is_anonymous(k) {
                            proj.insert(k.clone(), v.clone());
                        }
                    }
                }
                for it in &p.items {
                    proj.insert(it.alias.clone(), self.eval(&it.expr, &r)?);
                }
                let visible = if p.distinct {
                    proj.clone()
                } else {
                    let mut v = r;
                    v.extend(proj.iter().map(|(k, x)| (k.clone(), x.clone())));
                    v
                };
                out.push((proj, visible));
            }
        }

        if p.distinct {
            let mut seen = HashSet::new();
            out.retain(|(proj, _)| {
                let key: Vec<CVal> = columns.iter().map(|c| proj.get(c).cloned().unwrap_or(CVal::Null)).collect();
                seen.insert(key)
            });
        }

        if !p.order.is_empty() {
            let mut keyed = Vec::with_capacity(out.len());
            for (proj, visible) in out {
                let keys = p.order.iter().map(|(e, _)| self.eval(e, &visible)).collect::<EResult<Vec<_>>>()?;
                keyed.push((keys, proj));
            }
            keyed.sort_by(|(a, _), (b, _)| {
                for (i, (_, desc)) in p.order.iter().enumerate() {
                    let o = order_cmp(&a[i], &b[i]);
                    let o = if *desc { o.reverse() } else { o };
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                Ordering::Equal
            });
            out = keyed.into_iter().map(|(_, r)| (r, Row::new())).collect();
        }

        let skip = self.count_arg(&p.skip, "SKIP")?.unwrap_or(0);
        let limit = self.count_arg(&p.limit, "LIMIT")?;
        let rows = out
            .into_iter()
            .map(|(r, _)| r)
            .skip(skip)
            .take(limit.unwrap_or(usize::MAX))
            .collect();
        Ok((columns, rows))
    }
}

fn to_value(graph: &PropertyGraph, v: CVal) -> EResult<Value> {
    Ok(match v {
        CVal::Null => Value::Null,
        CVal::Bool(b) => Value::Bool(b),
        CVal::Int(i) => Value::Int(i),
        CVal::Float(f) => Value::Dec(f),
        CVal::Str(s) => Value::Str(s),
        CVal::Node(id) => Value::Node(graph.nodes[id].uri.clone()),
        other => return Err(CypherEvalError::runtime(format!("{} values cannot be compared", other.type_name()))),
    })
}

/// Parses, checks and runs `query` against `graph`.
pub fn eval_cypher(graph: &PropertyGraph, query: &str) -> Result<ResultTable, CypherEvalError> {
    let clauses = parse(query)?;
    let ctx = Ctx { graph };
    let mut rows = vec![Row::new()];
    for c in &clauses {
        match c {
            Clause::Match { optional, parts, filter } => {
                rows = ctx.run_match(*optional, parts, filter.as_ref(), rows)?;
            }
            Clause::With { proj, filter } => {
                let (_, projected) = ctx.project(proj, rows)?;
                rows = Vec::new();
                for r in projected {
                    if ctx.passes(filter.as_ref(), &r)? {
                        rows.push(r);
                    }
                }
            }
            Clause::Unwind { expr, alias } => {
                let mut out = Vec::new();
                for r in rows {
                    let items = match ctx.eval(expr, &r)? {
                        CVal::Null => Vec::new(),
                        CVal::List(items) => items,
                        single => vec![single],
                    };
                    for it in items {
                        let mut n = r.clone();
                        n.insert(alias.clone(), it);
                        out.push(n);
                    }
                }
                rows = out;
            }
            Clause::Return(proj) => {
                let (columns, projected) = ctx.project(proj, rows)?;
                let mut table = ResultTable::new(columns.clone());
                for r in projected {
                    let mut row = Vec::with_capacity(columns.len());
                    for c in &columns {
                        row.push(to_value(graph, r.get(c).cloned().unwrap_or(CVal::Null))?.presented());
                    }
                    table.push(row);
                }
                return Ok(table);
            }
        }
    }
    unreachable!("parse guarantees a final RETURN")
}
