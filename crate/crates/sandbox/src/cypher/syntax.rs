//! Lexer and parser for the Cypher subset the transpiler emits, plus the
//! static scope check.

use super::{CVal, CypherEvalError};
use rust_decimal::Decimal;
use std::collections::HashSet;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Float(Decimal),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    start: usize,
    end: usize,
}

const SYMBOLS: [&str; 22] = [
    "<>", "<=", ">=", "=~", "(", ")", "[", "]", "{", "}", ":", ",", ".", "-", "<", ">", "=", "+", "*", "/", "%", "|",
];

fn lex(src: &str) -> Result<Vec<Spanned>, CypherEvalError> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let c = b[i] as char;
        let start = i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if src[i..].starts_with("//") {
            while i < b.len() && b[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let tok = if c == '\'' || c == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                let Some(ch) = src[i..].chars().next() else {
                    return Err(CypherEvalError::syntax("unterminated string"));
                };
                i += ch.len_utf8();
                if ch == c {
                    break;
                }
                if ch == '\\' {
                    let Some(e) = src[i..].chars().next() else {
                        return Err(CypherEvalError::syntax("unterminated escape"));
                    };
                    i += e.len_utf8();
                    s.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        other => other,
                    });
                } else {
                    s.push(ch);
                }
            }
            Tok::Str(s)
        } else if c == '`' {
            let end = src[i + 1..]
                .find('`')
                .ok_or_else(|| CypherEvalError::syntax("unterminated backtick"))?;
            let name = src[i + 1..i + 1 + end].to_string();
            i += end + 2;
            Tok::Ident(name)
        } else if c.is_ascii_digit() {
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            let mut float = false;
            if i + 1 < b.len() && b[i] == b'.' && b[i + 1].is_ascii_digit() {
                float = true;
                i += 1;
                while i < b.len() && b[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
                let mut j = i + 1;
                if j < b.len() && (b[j] == b'+' || b[j] == b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    float = true;
                    i = j;
                    while i < b.len() && b[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            if float {
                let d = if text.contains(['e', 'E']) {
                    Decimal::from_scientific(text).ok()
                } else {
                    text.parse().ok()
                };
                Tok::Float(d.ok_or_else(|| CypherEvalError::syntax(format!("bad number {text}")))?)
            } else {
                Tok::Int(text.parse().map_err(|_| CypherEvalError::syntax(format!("integer {text} too large")))?)
            }
        } else if c.is_alphabetic() || c == '_' {
            while i < b.len() {
                let ch = src[i..].chars().next().unwrap();
                if ch.is_alphanumeric() || ch == '_' {
                    i += ch.len_utf8();
                } else {
                    break;
                }
            }
            Tok::Ident(src[start..i].to_string())
        } else if let Some(sym) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            i += sym.len();
            Tok::Sym(sym)
        } else {
            return Err(CypherEvalError::syntax(format!("unexpected character '{c}'")));
        };
        out.push(Spanned { tok, start, end: i });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrOp {
    StartsWith,
    EndsWith,
    Contains,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(String),
    Lit(CVal),
    Prop(Box<Expr>, String),
    List(Vec<Expr>),
    Not(Box<Expr>),
    Neg(Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Xor(Box<Expr>, Box<Expr>),
    Cmp(&'static str, Box<Expr>, Box<Expr>),
    In(Box<Expr>, Box<Expr>),
    Str(StrOp, Box<Expr>, Box<Expr>),
    IsNull(Box<Expr>, bool),
    Arith(&'static str, Box<Expr>, Box<Expr>),
    /// Function name lower-cased, DISTINCT flag, arguments.
    Call(String, bool, Vec<Expr>),
    CountStar,
}

pub const AGGREGATES: [&str; 5] = ["count", "sum", "avg", "min", "max"];
const FUNCTIONS: [&str; 13] = [
    "substring", "tointeger", "tofloat", "tostring", "toboolean", "coalesce", "size", "tolower", "toupper", "abs",
    "ceil", "floor", "round",
];

impl Expr {
    pub fn has_aggregate(&self) -> bool {
        match self {
            Expr::CountStar => true,
            Expr::Call(n, _, args) => AGGREGATES.contains(&n.as_str()) || args.iter().any(Expr::has_aggregate),
            Expr::Var(_) | Expr::Lit(_) => false,
            Expr::Prop(e, _) | Expr::Not(e) | Expr::Neg(e) | Expr::IsNull(e, _) => e.has_aggregate(),
            Expr::List(items) => items.iter().any(Expr::has_aggregate),
            Expr::And(a, b)
            | Expr::Or(a, b)
            | Expr::Xor(a, b)
            | Expr::Cmp(_, a, b)
            | Expr::In(a, b)
            | Expr::Str(_, a, b)
            | Expr::Arith(_, a, b) => a.has_aggregate() || b.has_aggregate(),
        }
    }

    /// Replaces every sub-expression equal to one of `items` by its alias.
    fn substitute(&self, items: &[ProjItem]) -> Expr {
        if let Some(it) = items.iter().find(|it| it.expr == *self) {
            return Expr::Var(it.alias.clone());
        }
        let s = |e: &Expr| Box::new(e.substitute(items));
        match self {
            Expr::Var(_) | Expr::Lit(_) | Expr::CountStar => self.clone(),
            Expr::Prop(e, k) => Expr::Prop(s(e), k.clone()),
            Expr::List(v) => Expr::List(v.iter().map(|e| e.substitute(items)).collect()),
            Expr::Not(e) => Expr::Not(s(e)),
            Expr::Neg(e) => Expr::Neg(s(e)),
            Expr::IsNull(e, n) => Expr::IsNull(s(e), *n),
            Expr::And(a, b) => Expr::And(s(a), s(b)),
            Expr::Or(a, b) => Expr::Or(s(a), s(b)),
            Expr::Xor(a, b) => Expr::Xor(s(a), s(b)),
            Expr::Cmp(o, a, b) => Expr::Cmp(o, s(a), s(b)),
            Expr::In(a, b) => Expr::In(s(a), s(b)),
            Expr::Str(o, a, b) => Expr::Str(*o, s(a), s(b)),
            Expr::Arith(o, a, b) => Expr::Arith(o, s(a), s(b)),
            Expr::Call(n, d, args) => Expr::Call(n.clone(), *d, args.iter().map(|e| e.substitute(items)).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dir {
    Out,
    In,
    Both,
}

#[derive(Debug, Clone)]
pub struct NodePat {
    pub var: String,
    pub labels: Vec<String>,
    pub props: Vec<(String, Expr)>,
}

#[derive(Debug, Clone)]
pub struct RelPat {
    pub var: Option<String>,
    pub types: Vec<String>,
    pub dir: Dir,
}

/// `nodes.len() == rels.len() + 1`
#[derive(Debug, Clone)]
pub struct PatternPart {
    pub nodes: Vec<NodePat>,
    pub rels: Vec<RelPat>,
}

#[derive(Debug, Clone)]
pub struct ProjItem {
    pub expr: Expr,
    pub alias: String,
}

#[derive(Debug, Clone, Default)]
pub struct Projection {
    pub distinct: bool,
    pub star: bool,
    pub items: Vec<ProjItem>,
    /// Keys already rewritten to refer to projected aliases where possible.
    pub order: Vec<(Expr, bool)>,
    pub skip: Option<Expr>,
    pub limit: Option<Expr>,
}

impl Projection {
    pub fn aggregating(&self) -> bool {
        self.items.iter().any(|i| i.expr.has_aggregate())
    }
}

#[derive(Debug, Clone)]
pub enum Clause {
    Match {
        optional: bool,
        parts: Vec<PatternPart>,
        filter: Option<Expr>,
    },
    With {
        proj: Projection,
        filter: Option<Expr>,
    },
    Unwind {
        expr: Expr,
        alias: String,
    },
    Return(Projection),
}

/// Names of anonymous pattern nodes start with a space, so they can never
/// clash with user identifiers.
pub fn is_anonymous(name: &str) -> bool {
    name.starts_with(' ')
}

struct Parser<'a> {
    src: &'a str,
    toks: Vec<Spanned>,
    pos: usize,
    anon: usize,
}

type PResult<T> = Result<T, CypherEvalError>;

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|s| &s.tok)
    }

    fn is_kw(&self, kw: &str) -> bool {
        self.kw_at(0, kw)
    }

    fn kw_at(&self, k: usize, kw: &str) -> bool {
        matches!(self.peek_at(k), Some(Tok::Ident(s)) if s.eq_ignore_ascii_case(kw))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        let hit = self.is_kw(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.is_sym(s);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&format!("expected '{s}'")))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error(&format!("expected {kw}")))
        }
    }

    fn error(&self, what: &str) -> CypherEvalError {
        match self.toks.get(self.pos) {
            Some(t) => CypherEvalError::syntax(format!("{what} at offset {}, found '{}'", t.start, &self.src[t.start..t.end])),
            None => CypherEvalError::syntax(format!("{what} at end of input")),
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error("expected identifier")),
        }
    }

    fn query(&mut self) -> PResult<Vec<Clause>> {
        let mut clauses = Vec::new();
        while self.peek().is_some() {
            let clause = if self.eat_kw("OPTIONAL") {
                self.expect_kw("MATCH")?;
                self.match_clause(true)?
            } else if self.eat_kw("MATCH") {
                self.match_clause(false)?
            } else if self.eat_kw("WITH") {
                let proj = self.projection(true)?;
                let filter = if self.eat_kw("WHERE") { Some(self.expr()?) } else { None };
                Clause::With { proj, filter }
            } else if self.eat_kw("UNWIND") {
                let expr = self.expr()?;
                self.expect_kw("AS")?;
                Clause::Unwind {
                    expr,
                    alias: self.ident()?,
                }
            } else if self.eat_kw("RETURN") {
                Clause::Return(self.projection(false)?)
            } else {
                return Err(self.error("expected a clause"));
            };
            let is_return = matches!(clause, Clause::Return(_));
            clauses.push(clause);
            if is_return {
                if self.peek().is_some() {
                    return Err(self.error("RETURN must be the last clause"));
                }
                break;
            }
        }
        if !matches!(clauses.last(), Some(Clause::Return(_))) {
            return Err(CypherEvalError::syntax("query must end with RETURN"));
        }
        Ok(clauses)
    }

    fn match_clause(&mut self, optional: bool) -> PResult<Clause> {
        let mut parts = vec![self.pattern_part()?];
        while self.eat_sym(",") {
            parts.push(self.pattern_part()?);
        }
        let filter = if self.eat_kw("WHERE") { Some(self.expr()?) } else { None };
        Ok(Clause::Match { optional, parts, filter })
    }

    fn pattern_part(&mut self) -> PResult<PatternPart> {
        let mut part = PatternPart {
            nodes: vec![self.node_pattern()?],
            rels: Vec::new(),
        };
        while self.is_sym("-") || (self.is_sym("<") && matches!(self.peek_at(1), Some(Tok::Sym("-")))) {
            part.rels.push(self.rel_pattern()?);
            part.nodes.push(self.node_pattern()?);
        }
        Ok(part)
    }

    fn node_pattern(&mut self) -> PResult<NodePat> {
        self.expect_sym("(")?;
        let var = match self.peek() {
            Some(Tok::Ident(_)) => self.ident()?,
            _ => {
                self.anon += 1;
                format!(" anon{}", self.anon)
            }
        };
        let mut labels = Vec::new();
        while self.eat_sym(":") {
            labels.push(self.ident()?);
        }
        let mut props = Vec::new();
        if self.eat_sym("{") {
            if !self.is_sym("}") {
                loop {
                    let k = self.ident()?;
                    self.expect_sym(":")?;
                    props.push((k, self.expr()?));
                    if !self.eat_sym(",") {
                        break;
                    }
                }
            }
            self.expect_sym("}")?;
        }
        self.expect_sym(")")?;
        Ok(NodePat { var, labels, props })
    }

    fn rel_pattern(&mut self) -> PResult<RelPat> {
        let left = self.eat_sym("<");
        self.expect_sym("-")?;
        let mut var = None;
        let mut types = Vec::new();
        if self.eat_sym("[") {
            if let Some(Tok::Ident(_)) = self.peek() {
                var = Some(self.ident()?);
            }
            if self.eat_sym(":") {
                types.push(self.ident()?);
                while self.eat_sym("|") {
                    self.eat_sym(":");
                    types.push(self.ident()?);
                }
            }
            if self.is_sym("{") || self.is_sym("*") {
                return Err(self.error("relationship properties and variable length are not supported"));
            }
            self.expect_sym("]")?;
        }
        self.expect_sym("-")?;
        let right = self.eat_sym(">");
        let dir = match (left, right) {
            (true, false) => Dir::In,
            (false, true) => Dir::Out,
            (false, false) => Dir::Both,
            (true, true) => return Err(self.error("relationship cannot point both ways")),
        };
        Ok(RelPat { var, types, dir })
    }

    fn projection(&mut self, is_with: bool) -> PResult<Projection> {
        let mut p = Projection {
            distinct: self.eat_kw("DISTINCT"),
            ..Default::default()
        };
        if self.eat_sym("*") {
            p.star = true;
            if !self.eat_sym(",") {
                return self.projection_tail(p);
            }
        }
        loop {
            let start = self.toks.get(self.pos).map(|t| t.start).unwrap_or(self.src.len());
            let expr = self.expr()?;
            let end = self.toks[self.pos - 1].end;
            let alias = if self.eat_kw("AS") {
                self.ident()?
            } else if let Expr::Var(v) = &expr {
                v.clone()
            } else if is_with {
                return Err(CypherEvalError::syntax("expression in WITH must be aliased (use AS)"));
            } else {
                self.src[start..end].to_string()
            };
            p.items.push(ProjItem { expr, alias });
            if !self.eat_sym(",") {
                break;
            }
        }
        self.projection_tail(p)
    }

    fn projection_tail(&mut self, mut p: Projection) -> PResult<Projection> {
        if self.is_kw("ORDER") {
            self.pos += 1;
            self.expect_kw("BY")?;
            loop {
                let e = self.expr()?;
                let desc = if self.eat_kw("DESC") || self.eat_kw("DESCENDING") {
                    true
                } else {
                    let _ = self.eat_kw("ASC") || self.eat_kw("ASCENDING");
                    false
                };
                p.order.push((e.substitute(&p.items), desc));
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        // SKIP and LIMIT are accepted in either order.
        for _ in 0..2 {
            if self.eat_kw("SKIP") {
                p.skip = Some(self.expr()?);
            } else if self.eat_kw("LIMIT") {
                p.limit = Some(self.expr()?);
            }
        }
        Ok(p)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let mut e = self.xor()?;
        while self.eat_kw("OR") {
            e = Expr::Or(Box::new(e), Box::new(self.xor()?));
        }
        Ok(e)
    }

    fn xor(&mut self) -> PResult<Expr> {
        let mut e = self.and()?;
        while self.eat_kw("XOR") {
            e = Expr::Xor(Box::new(e), Box::new(self.and()?));
        }
        Ok(e)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut e = self.not()?;
        while self.eat_kw("AND") {
            e = Expr::And(Box::new(e), Box::new(self.not()?));
        }
        Ok(e)
    }

    fn not(&mut self) -> PResult<Expr> {
        if self.eat_kw("NOT") {
            return Ok(Expr::Not(Box::new(self.not()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let mut e = self.additive()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(s @ ("=" | "<>" | "<" | ">" | "<=" | ">="))) => *s,
                _ => "",
            };
            if !op.is_empty() {
                self.pos += 1;
                e = Expr::Cmp(op, Box::new(e), Box::new(self.additive()?));
            } else if self.eat_kw("IN") {
                e = Expr::In(Box::new(e), Box::new(self.additive()?));
            } else if self.is_kw("STARTS") && self.kw_at(1, "WITH") {
                self.pos += 2;
                e = Expr::Str(StrOp::StartsWith, Box::new(e), Box::new(self.additive()?));
            } else if self.is_kw("ENDS") && self.kw_at(1, "WITH") {
                self.pos += 2;
                e = Expr::Str(StrOp::EndsWith, Box::new(e), Box::new(self.additive()?));
            } else if self.eat_kw("CONTAINS") {
                e = Expr::Str(StrOp::Contains, Box::new(e), Box::new(self.additive()?));
            } else if self.is_kw("IS") {
                self.pos += 1;
                let negated = self.eat_kw("NOT");
                self.expect_kw("NULL")?;
                e = Expr::IsNull(Box::new(e), negated);
            } else {
                return Ok(e);
            }
        }
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut e = self.multiplicative()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(s @ ("+" | "-"))) => *s,
                _ => return Ok(e),
            };
            self.pos += 1;
            e = Expr::Arith(op, Box::new(e), Box::new(self.multiplicative()?));
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut e = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(s @ ("*" | "/" | "%"))) => *s,
                _ => return Ok(e),
            };
            self.pos += 1;
            e = Expr::Arith(op, Box::new(e), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            return Ok(match self.unary()? {
                Expr::Lit(CVal::Int(i)) => Expr::Lit(CVal::Int(-i)),
                Expr::Lit(CVal::Float(f)) => Expr::Lit(CVal::Float(-f)),
                other => Expr::Neg(Box::new(other)),
            });
        }
        if self.eat_sym("+") {
            return self.unary();
        }
        let mut e = self.atom()?;
        while self.eat_sym(".") {
            e = Expr::Prop(Box::new(e), self.ident()?);
        }
        Ok(e)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.error("expected expression"));
        };
        self.pos += 1;
        Ok(match tok {
            Tok::Int(i) => Expr::Lit(CVal::Int(i)),
            Tok::Float(f) => Expr::Lit(CVal::Float(f)),
            Tok::Str(s) => Expr::Lit(CVal::Str(s)),
            Tok::Sym("(") => {
                let e = self.expr()?;
                self.expect_sym(")")?;
                e
            }
            Tok::Sym("[") => {
                let mut items = Vec::new();
                if !self.is_sym("]") {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym("]")?;
                Expr::List(items)
            }
            Tok::Ident(name) => {
                let lower = name.to_ascii_lowercase();
                match lower.as_str() {
                    "true" => return Ok(Expr::Lit(CVal::Bool(true))),
                    "false" => return Ok(Expr::Lit(CVal::Bool(false))),
                    "null" => return Ok(Expr::Lit(CVal::Null)),
                    _ => {}
                }
                if !self.eat_sym("(") {
                    return Ok(Expr::Var(name));
                }
                if lower == "count" && self.is_sym("*") {
                    self.pos += 1;
                    self.expect_sym(")")?;
                    return Ok(Expr::CountStar);
                }
                let distinct = self.eat_kw("DISTINCT");
                let mut args = Vec::new();
                if !self.is_sym(")") {
                    loop {
                        args.push(self.expr()?);
                        if !self.eat_sym(",") {
                            break;
                        }
                    }
                }
                self.expect_sym(")")?;
                Expr::Call(lower, distinct, args)
            }
            Tok::Sym(_) => {
                self.pos -= 1;
                return Err(self.error("expected expression"));
            }
        })
    }
}

// ---- static checks ----------------------------------------------------------

fn check_expr(e: &Expr, scope: &HashSet<String>, agg_allowed: bool, in_agg: bool) -> PResult<()> {
    let rec = |x: &Expr| check_expr(x, scope, agg_allowed, in_agg);
    match e {
        Expr::Var(v) if !scope.contains(v) => Err(CypherEvalError::syntax(format!("Variable `{v}` not defined"))),
        Expr::Var(_) | Expr::Lit(_) => Ok(()),
        Expr::CountStar if !agg_allowed || in_agg => Err(CypherEvalError::syntax("aggregation not allowed here")),
        Expr::CountStar => Ok(()),
        Expr::Call(n, distinct, args) => {
            let is_agg = AGGREGATES.contains(&n.as_str());
            if is_agg && (!agg_allowed || in_agg) {
                return Err(CypherEvalError::syntax(format!("aggregation {n} not allowed here")));
            }
            if !is_agg && !FUNCTIONS.contains(&n.as_str()) {
                return Err(CypherEvalError::syntax(format!("Unknown function '{n}'")));
            }
            if *distinct && !is_agg {
                return Err(CypherEvalError::syntax(format!("DISTINCT is only valid in aggregations, not {n}")));
            }
            let arity_ok = match n.as_str() {
                "substring" => (2..=3).contains(&args.len()),
                "coalesce" => !args.is_empty(),
                _ => args.len() == 1,
            };
            if !arity_ok {
                return Err(CypherEvalError::syntax(format!("wrong number of arguments to {n}")));
            }
            args.iter().try_for_each(|a| check_expr(a, scope, agg_allowed, in_agg || is_agg))
        }
        Expr::Prop(x, _) | Expr::Not(x) | Expr::Neg(x) | Expr::IsNull(x, _) => rec(x),
        Expr::List(items) => items.iter().try_for_each(rec),
        Expr::And(a, b)
        | Expr::Or(a, b)
        | Expr::Xor(a, b)
        | Expr::Cmp(_, a, b)
        | Expr::In(a, b)
        | Expr::Str(_, a, b)
        | Expr::Arith(_, a, b) => {
            rec(a)?;
            rec(b)
        }
    }
}

fn check_projection(p: &Projection, scope: &HashSet<String>) -> PResult<HashSet<String>> {
    let mut out: HashSet<String> = if p.star {
        scope.iter().filter(|v| !is_anonymous(v)).cloned().collect()
    } else {
        HashSet::new()
    };
    if !p.star && p.items.is_empty() {
        return Err(CypherEvalError::syntax("empty projection"));
    }
    for it in &p.items {
        check_expr(&it.expr, scope, true, false)?;
        if !out.insert(it.alias.clone()) && !p.star {
            return Err(CypherEvalError::syntax(format!("Multiple result columns with the same name `{}`", it.alias)));
        }
    }
    let order_scope = if p.distinct || p.aggregating() {
        out.clone()
    } else {
        scope.union(&out).cloned().collect()
    };
    for (e, _) in &p.order {
        check_expr(e, &order_scope, false, false)?;
    }
    for e in p.skip.iter().chain(&p.limit) {
        check_expr(e, &HashSet::new(), false, false)?;
    }
    Ok(out)
}

fn check(clauses: &[Clause]) -> PResult<()> {
    let mut scope: HashSet<String> = HashSet::new();
    for c in clauses {
        match c {
            Clause::Match { parts, filter, .. } => {
                for part in parts {
                    for n in &part.nodes {
                        for (_, e) in &n.props {
                            check_expr(e, &scope, false, false)?;
                        }
                    }
                }
                for part in parts {
                    for n in &part.nodes {
                        scope.insert(n.var.clone());
                    }
                    for r in &part.rels {
                        if let Some(v) = &r.var {
                            scope.insert(v.clone());
                        }
                    }
                }
                if let Some(f) = filter {
                    check_expr(f, &scope, false, false)?;
                }
            }
            Clause::With { proj, filter } => {
                scope = check_projection(proj, &scope)?;
                if let Some(f) = filter {
                    check_expr(f, &scope, false, false)?;
                }
            }
            Clause::Unwind { expr, alias } => {
                check_expr(expr, &scope, false, false)?;
                scope.insert(alias.clone());
            }
            Clause::Return(proj) => {
                check_projection(proj, &scope)?;
            }
        }
    }
    Ok(())
}

/// Parses and statically checks a query.
pub fn parse(src: &str) -> PResult<Vec<Clause>> {
    let mut p = Parser {
        src,
        toks: lex(src)?,
        pos: 0,
        anon: 0,
    };
    if p.toks.is_empty() {
        return Err(CypherEvalError::syntax("empty query"));
    }
    let clauses = p.query()?;
    check(&clauses)?;
    Ok(clauses)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_emitted_shapes() {
        let q = "MATCH (review:bsbm__Review)-[:bsbm__reviewFor]->(product:bsbm_inst__ProductType1)
OPTIONAL MATCH (product:bsbm_inst__ProductType1)-[:ele__publisher]->(producer:bsbm__Producer)
WHERE product.bsbm__productPropertyNumeric1 > 1000
RETURN DISTINCT product.rdfs__label AS label
ORDER BY product.rdfs__label ASC
LIMIT 10";
        let c = parse(q).unwrap();
        assert_eq!(c.len(), 3);
        let Clause::Return(p) = &c[2] else { panic!() };
        assert_eq!(p.order[0].0, Expr::Var("label".into()));
    }

    #[test]
    fn unbound_variable_is_rejected() {
        let e = parse("MATCH (a) RETURN b").unwrap_err();
        assert!(e.message.contains("`b`"));
    }

    #[test]
    fn with_needs_alias() {
        assert!(parse("MATCH (a) WITH a.x RETURN 1 AS one").is_err());
        assert!(parse("MATCH (a) WITH a.x AS x RETURN x").is_ok());
    }

    #[test]
    fn order_by_after_distinct_sees_only_projection() {
        assert!(parse("MATCH (a) RETURN DISTINCT a.x AS x ORDER BY a.y").is_err());
        assert!(parse("MATCH (a) RETURN a.x AS x ORDER BY a.y").is_ok());
    }

    #[test]
    fn unknown_function_is_rejected() {
        assert!(parse("MATCH (a) RETURN frobnicate(a) AS f").is_err());
        assert!(parse("MATCH (a) RETURN toUpper(a.n) AS f").is_ok());
    }

    #[test]
    fn precedence() {
        let c = parse("RETURN NOT 1 = 2 AND true OR false AS v").unwrap();
        let Clause::Return(p) = &c[0] else { panic!() };
        assert!(matches!(&p.items[0].expr, Expr::Or(a, _) if matches!(**a, Expr::And(..))));
    }
}
