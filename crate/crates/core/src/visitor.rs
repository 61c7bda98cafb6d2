//! Parse-tree walker that fills the [`Ast`] containers.

use crate::ast::{init_ast, Ast, Constraint, Direction, RelEntry};
use crate::classifier::classify;
use crate::error::TranspileError;
use crate::options::TranspileOptions;
use crate::parse_tree::{Node, ParseTree, Rule};
use crate::prefix::{iri_body, pg_name, pg_name_for_iri, resolve_prefixes, PrefixMap, RDF_TYPE};
use std::collections::HashSet;

const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema#";

type Result<T> = std::result::Result<T, TranspileError>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Predicate {
    /// `a` or `rdf:type`.
    Type,
    /// Relationship type string as stored in rels, e.g. `:ROOT__knows`.
    Path { r: String, inverse: bool },
}

impl Predicate {
    pub fn plain(name: &str) -> Self {
        Predicate::Path {
            r: format!(":{name}"),
            inverse: false,
        }
    }

    fn is_simple(&self) -> bool {
        matches!(self, Predicate::Path { r, inverse: false } if !r.contains('/'))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Object {
    Var(String),
    /// Class name of a type triple.
    Label(String),
    /// Literal rendered as Cypher text.
    Literal(String),
}

/// A WHERE triple after name resolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatternTriple {
    pub s: String,
    pub p: Predicate,
    pub o: Object,
    pub optional: bool,
}

/// Strips `?`, `$` and spaces and registers the name. Inside an aggregate a
/// property-backed variable is replaced by its namespaced property.
pub fn visit_var(ast: &mut Ast, v: &str, in_aggregate: bool) -> String {
    let name = v.trim_matches(|c| c == '?' || c == '$' || c == ' ').to_string();
    ast.add_var(&name);
    if in_aggregate {
        if let Some(p) = ast.props.get(&name) {
            return p.clone();
        }
    }
    name
}

fn is_anonymous_alias(k: &str) -> bool {
    k.strip_prefix("agg__")
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Registers an aggregate expression under `alias`, or under the next free
/// `agg__N` name. An unaliased expression already registered reuses its alias.
pub fn visit_aggregate(ast: &mut Ast, expr: &str, alias: Option<&str>) -> Result<String> {
    let alias = match alias {
        Some(a) => {
            if let Some(prev) = ast.aggregates.get(a) {
                if prev != expr {
                    return Err(TranspileError::Conflict(format!(
                        "alias {a} bound to both {prev} and {expr}"
                    )));
                }
            }
            a.to_string()
        }
        None => {
            if let Some((k, _)) = ast.aggregates.iter().find(|(_, e)| *e == expr) {
                return Ok(k.clone());
            }
            let n = ast.aggregates.keys().filter(|k| is_anonymous_alias(k)).count();
            format!("agg__{n}")
        }
    };
    ast.with.insert(alias.clone(), format!("{expr} AS {alias}"));
    ast.aggregates.insert(alias.clone(), expr.to_string());
    ast.add_var(&alias);
    Ok(alias)
}

/// First pass: type triples label their subject. Returns the other triples.
pub fn find_labelled_nodes(triples: &[PatternTriple], ast: &mut Ast) -> Result<Vec<PatternTriple>> {
    let mut remaining = Vec::new();
    for t in triples {
        if t.p != Predicate::Type {
            remaining.push(t.clone());
            continue;
        }
        let Object::Label(label) = &t.o else {
            return Err(TranspileError::unsupported("type triple without a class IRI"));
        };
        let entry = ast.nodes.entry(t.s.clone()).or_default();
        match &entry.label {
            Some(prev) if prev != label => {
                return Err(TranspileError::Conflict(format!(
                    "?{} labelled both {prev} and {label}",
                    t.s
                )))
            }
            _ => entry.label = Some(label.clone()),
        }
    }
    Ok(remaining)
}

fn is_relationship(t: &PatternTriple, ast: &Ast, explicit: &HashSet<String>) -> bool {
    let Object::Var(o) = &t.o else { return false };
    let Predicate::Path { r, .. } = &t.p else { return false };
    let both_nodes = ast.nodes.contains_key(&t.s) && ast.nodes.contains_key(o);
    both_nodes
        || r.split('/')
            .any(|seg| explicit.contains(seg.trim_start_matches('^')))
}

/// Second pass: every remaining triple becomes a relationship, a value
/// constraint on its subject, or a variable property.
pub fn categorise_triples(remaining: &[PatternTriple], ast: &mut Ast, explicit: &HashSet<String>) -> Result<()> {
    for t in remaining {
        let Predicate::Path { r, inverse } = &t.p else {
            return Err(TranspileError::unsupported("type triple in second pass"));
        };
        if is_relationship(t, ast, explicit) {
            let Object::Var(o) = &t.o else { unreachable!() };
            ast.rels.push(RelEntry {
                s: t.s.clone(),
                r: r.clone(),
                o: o.clone(),
                optional: t.optional,
                inverse: *inverse,
            });
            for seg in r.split('/') {
                let ty = seg.trim_start_matches('^').to_string();
                if !ast.rel_types.contains(&ty) {
                    ast.rel_types.push(ty);
                }
            }
            continue;
        }
        if !t.p.is_simple() {
            return Err(TranspileError::unsupported(format!(
                "property path {r} between non-node terms"
            )));
        }
        let prop = format!("{}.{}", t.s, &r[1..]);
        match &t.o {
            Object::Literal(lit) => {
                let entry = ast.nodes.entry(t.s.clone()).or_default();
                let key = r[1..].to_string();
                match entry.constraints.get(&key) {
                    Some(prev) if prev != lit => ast
                        .where_
                        .push(Constraint::Relational([prop, "=".into(), lit.clone()])),
                    _ => {
                        entry.constraints.insert(key, lit.clone());
                    }
                }
            }
            Object::Var(o) => match ast.props.get(o) {
                Some(prev) if *prev != prop => {
                    let prev = prev.clone();
                    ast.where_.push(Constraint::Relational([prop, "=".into(), prev]));
                }
                _ => {
                    ast.props.insert(o.clone(), prop);
                }
            },
            Object::Label(_) => unreachable!("labels only occur in type triples"),
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ctx {
    Filter,
    Project,
    Group,
    Having,
    Order,
}

#[derive(Debug, Clone)]
enum SelItem {
    Star,
    Var(String),
    Expr { alias: String, text: String },
}

struct Visitor<'a> {
    ast: Ast,
    prefixes: PrefixMap,
    opts: &'a TranspileOptions,
    explicit: HashSet<String>,
    select: Vec<(bool, SelItem)>,
    saw_aggregate: bool,
}

/// Builds the AST for a parsed query. Unsupported constructs are reported
/// with their taxonomy category.
pub fn build_ast(tree: &ParseTree, opts: &TranspileOptions) -> Result<Ast> {
    if let Some(cat) = classify(tree, opts.compat) {
        return Err(TranspileError::Unsupported(cat));
    }
    let prefixes = resolve_prefixes(tree);
    let mut explicit = HashSet::new();
    for p in &opts.explicit_rels.predicates {
        explicit.insert(format!(":{}", pg_name(p, &prefixes, &opts.naming)?));
    }
    let mut v = Visitor {
        ast: init_ast(),
        prefixes,
        opts,
        explicit,
        select: Vec::new(),
        saw_aggregate: false,
    };
    v.run(tree)?;
    Ok(v.ast)
}

fn unsupported<T>(detail: impl Into<String>) -> Result<T> {
    Err(TranspileError::unsupported(detail))
}

fn unwrap_brackets(mut t: &ParseTree) -> &ParseTree {
    loop {
        match t.rule {
            Rule::BrackettedExpression | Rule::Constraint => match t.subtrees().next() {
                Some(inner) => t = inner,
                None => return t,
            },
            _ => return t,
        }
    }
}

/// Cypher string literal with single quotes.
pub fn cypher_quote(s: &str) -> String {
    format!("'{}'", s.replace('\\', "\\\\").replace('\'', "\\'"))
}

/// Splits a SPARQL string token into its unescaped content and language tag.
pub fn unquote_sparql(text: &str) -> (String, Option<String>) {
    let (body, lang) = match text.rfind('@') {
        Some(i) if text[..i].ends_with(['\'', '"']) => (&text[..i], Some(text[i + 1..].to_string())),
        _ => (text, None),
    };
    let q = if body.starts_with("'''") || body.starts_with("\"\"\"") { 3 } else { 1 };
    let inner = if body.len() >= 2 * q { &body[q..body.len() - q] } else { "" };
    let mut out = String::new();
    let mut chars = inner.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('b') => out.push('\u{8}'),
            Some('f') => out.push('\u{c}'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    (out, lang)
}

impl Visitor<'_> {
    fn run(&mut self, tree: &ParseTree) -> Result<()> {
        let q = tree
            .child(Rule::SelectQuery)
            .ok_or_else(|| TranspileError::unsupported("not a SELECT query"))?;
        let where_clause = q.child(Rule::WhereClause).expect("parser guarantees WHERE");
        let ggp = where_clause.child(Rule::GroupGraphPattern).expect("parser guarantees group");

        let mut triples = Vec::new();
        let mut filters = Vec::new();
        self.group(ggp, false, &mut triples, &mut filters)?;

        let required: HashSet<String> = triples
            .iter()
            .filter(|t| !t.optional)
            .flat_map(|t| {
                let mut vs = vec![t.s.clone()];
                if let Object::Var(o) = &t.o {
                    vs.push(o.clone());
                }
                vs
            })
            .collect();

        let remaining = find_labelled_nodes(&triples, &mut self.ast)?;
        self.check_optional(&triples, &remaining, &required)?;
        categorise_triples(&remaining, &mut self.ast, &self.explicit)?;
        self.add_implicit_nodes(&required);

        for f in filters {
            let c = self.visit_constraint(f, Ctx::Filter)?;
            self.ast.where_.push(c);
        }

        let select = q.child(Rule::SelectClause).expect("parser guarantees SELECT");
        self.visit_select(select)?;

        if let Some(sm) = q.child(Rule::SolutionModifier) {
            if let Some(g) = sm.child(Rule::GroupClause) {
                for c in g.children_of(Rule::GroupCondition) {
                    self.visit_group_condition(c)?;
                }
            }
            if let Some(h) = sm.child(Rule::HavingClause) {
                for hc in h.children_of(Rule::HavingCondition) {
                    let c = hc.child(Rule::Constraint).expect("having condition holds a constraint");
                    let c = self.visit_constraint(c, Ctx::Having)?;
                    self.ast.where_with.push(c);
                }
            }
            if let Some(o) = sm.child(Rule::OrderClause) {
                for c in o.children_of(Rule::OrderCondition) {
                    self.visit_order_condition(c)?;
                }
            }
            if let Some(lo) = sm.child(Rule::LimitOffsetClauses) {
                for c in lo.subtrees() {
                    let n = c
                        .tokens()
                        .nth(1)
                        .and_then(|t| t.text.parse::<u64>().ok())
                        .ok_or_else(|| TranspileError::unsupported("LIMIT/OFFSET value out of range"))?;
                    match c.rule {
                        Rule::LimitClause => self.ast.limit = Some(n),
                        _ => self.ast.skip = Some(n),
                    }
                }
            }
        }
        self.finalize()
    }

    // ---- WHERE ---------------------------------------------------------

    fn group<'t>(
        &mut self,
        ggp: &'t ParseTree,
        optional: bool,
        triples: &mut Vec<PatternTriple>,
        filters: &mut Vec<&'t ParseTree>,
    ) -> Result<()> {
        let Some(sub) = ggp.child(Rule::GroupGraphPatternSub) else {
            return Ok(());
        };
        for ch in sub.subtrees() {
            match ch.rule {
                Rule::TriplesBlock => self.triples_block(ch, optional, triples)?,
                Rule::Filter if optional => return unsupported("FILTER inside OPTIONAL"),
                Rule::Filter => filters.push(ch.child(Rule::Constraint).expect("filter constraint")),
                Rule::OptionalGraphPattern => {
                    let inner = ch.child(Rule::GroupGraphPattern).expect("optional group");
                    self.group(inner, true, triples, filters)?;
                }
                Rule::GroupOrUnionGraphPattern => {
                    for inner in ch.children_of(Rule::GroupGraphPattern) {
                        self.group(inner, optional, triples, filters)?;
                    }
                }
                other => return unsupported(format!("{other} in WHERE")),
            }
        }
        Ok(())
    }

    fn triples_block(&mut self, block: &ParseTree, optional: bool, out: &mut Vec<PatternTriple>) -> Result<()> {
        for tss in block.children_of(Rule::TriplesSameSubjectPath) {
            let mut parts = tss.subtrees();
            let subj = parts.next().expect("subject");
            let plist = parts.next().expect("property list");
            let s = match subj.rule {
                Rule::Var => visit_var(&mut self.ast, &subj.text(), false),
                _ => return unsupported(format!("constant subject {}", subj.text())),
            };
            let mut verb = None;
            for ch in plist.subtrees() {
                match ch.rule {
                    Rule::VerbPath => verb = Some(self.predicate(ch)?),
                    Rule::ObjectListPath => {
                        let p = verb.clone().expect("verb precedes objects");
                        for obj in ch.subtrees() {
                            let o = self.object(obj, &p)?;
                            out.push(PatternTriple {
                                s: s.clone(),
                                p: p.clone(),
                                o,
                                optional,
                            });
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn is_type_iri(&self, t: &ParseTree) -> bool {
        let text = t.text();
        match t.rule {
            Rule::PrefixedName => text == "rdf:type" || self.prefixes.expand(&text).as_deref() == Some(RDF_TYPE),
            Rule::Iri => iri_body(&text) == RDF_TYPE,
            _ => false,
        }
    }

    fn iri_name(&self, t: &ParseTree) -> Result<String> {
        let text = t.text();
        let name = match t.rule {
            Rule::PrefixedName => pg_name(&text, &self.prefixes, &self.opts.naming)?,
            Rule::Iri => pg_name_for_iri(iri_body(&text), &self.prefixes, &self.opts.naming)?,
            other => return unsupported(format!("{other} where an IRI was expected")),
        };
        Ok(name.0)
    }

    fn path_segment(&self, node: &Node) -> Result<String> {
        match node {
            Node::Tree(t) if matches!(t.rule, Rule::Iri | Rule::PrefixedName) => {
                if self.is_type_iri(t) {
                    return unsupported("rdf:type inside a property path");
                }
                Ok(format!(":{}", self.iri_name(t)?))
            }
            Node::Tree(t) if t.rule == Rule::PathEltOrInverse => {
                let inner = t.children.iter().find(|n| n.as_token().is_none_or(|tok| !tok.is_op("^")));
                match inner {
                    Some(n) => Ok(format!("^{}", self.path_segment(n)?)),
                    None => unsupported("empty inverse path"),
                }
            }
            Node::Token(tok) if tok.is_keyword("a") => unsupported("rdf:type inside a property path"),
            other => unsupported(format!(
                "path element {}",
                other.as_tree().map(|t| t.text()).unwrap_or_default()
            )),
        }
    }

    fn predicate(&self, verb: &ParseTree) -> Result<Predicate> {
        let first = verb.children.first().expect("verb has a child");
        match first {
            Node::Token(t) if t.is_keyword("a") => Ok(Predicate::Type),
            Node::Tree(t) if matches!(t.rule, Rule::Iri | Rule::PrefixedName) => {
                if self.is_type_iri(t) {
                    Ok(Predicate::Type)
                } else {
                    Ok(Predicate::plain(&self.iri_name(t)?))
                }
            }
            Node::Tree(t) if t.rule == Rule::PathEltOrInverse => {
                let seg = self.path_segment(first)?;
                Ok(Predicate::Path {
                    r: seg.trim_start_matches('^').to_string(),
                    inverse: true,
                })
            }
            Node::Tree(t) if t.rule == Rule::PathSequence => {
                let mut segs = Vec::new();
                for n in &t.children {
                    if n.as_token().is_some_and(|tok| tok.is_op("/")) {
                        continue;
                    }
                    segs.push(self.path_segment(n)?);
                }
                Ok(Predicate::Path {
                    r: segs.join("/"),
                    inverse: false,
                })
            }
            Node::Tree(t) => unsupported(format!("predicate {}", t.text())),
            Node::Token(t) => unsupported(format!("predicate {}", t.text)),
        }
    }

    fn object(&mut self, obj: &ParseTree, p: &Predicate) -> Result<Object> {
        if *p == Predicate::Type {
            return match obj.rule {
                Rule::Iri | Rule::PrefixedName => Ok(Object::Label(self.iri_name(obj)?)),
                _ => unsupported(format!("class {} is not an IRI", obj.text())),
            };
        }
        match obj.rule {
            Rule::Var => Ok(Object::Var(visit_var(&mut self.ast, &obj.text(), false))),
            Rule::RdfLiteral | Rule::NumericLiteral | Rule::BooleanLiteral => Ok(Object::Literal(self.literal(obj)?)),
            _ => unsupported(format!("IRI object {}", obj.text())),
        }
    }

    fn check_optional(
        &self,
        all: &[PatternTriple],
        remaining: &[PatternTriple],
        required: &HashSet<String>,
    ) -> Result<()> {
        for t in all.iter().filter(|t| t.optional && t.p == Predicate::Type) {
            if required.contains(&t.s) {
                return unsupported(format!("OPTIONAL adds a class to required ?{}", t.s));
            }
        }
        for t in remaining.iter().filter(|t| t.optional) {
            if is_relationship(t, &self.ast, &self.explicit) {
                continue;
            }
            match &t.o {
                Object::Literal(_) if required.contains(&t.s) => {
                    return unsupported(format!("OPTIONAL value constraint on required ?{}", t.s))
                }
                Object::Var(o) if required.contains(o) => {
                    return unsupported(format!("OPTIONAL joins on required ?{o}"))
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn add_implicit_nodes(&mut self, required: &HashSet<String>) {
        let mut implicit: Vec<String> = Vec::new();
        for p in self.ast.props.values() {
            if let Some((s, _)) = p.split_once('.') {
                implicit.push(s.to_string());
            }
        }
        for r in &self.ast.rels {
            implicit.push(r.s.clone());
            implicit.push(r.o.clone());
        }
        for c in &self.ast.where_ {
            if let Constraint::Relational([l, _, _]) = c {
                if let Some((s, _)) = l.split_once('.') {
                    implicit.push(s.to_string());
                }
            }
        }
        for v in implicit {
            self.ast.nodes.entry(v).or_default();
        }
        for (v, n) in self.ast.nodes.iter_mut() {
            n.optional = !required.contains(v);
        }
    }

    fn is_pattern_var(&self, v: &str) -> bool {
        self.ast.nodes.contains_key(v) || self.ast.props.contains_key(v)
    }

    // ---- expressions ---------------------------------------------------

    fn var_in(&mut self, raw: &str, ctx: Ctx, in_agg: bool) -> Result<String> {
        let name = visit_var(&mut self.ast, raw, false);
        let needs_pattern = in_agg || matches!(ctx, Ctx::Filter | Ctx::Project | Ctx::Group);
        if needs_pattern && !self.is_pattern_var(&name) {
            return unsupported(format!("?{name} is not bound by the graph pattern"));
        }
        let prop = self.ast.props.get(&name).cloned();
        Ok(match ctx {
            _ if in_agg => prop.unwrap_or(name),
            Ctx::Filter | Ctx::Project | Ctx::Group => prop.unwrap_or(name),
            Ctx::Having => name,
            Ctx::Order => {
                if self.ast.with.is_empty() {
                    prop.unwrap_or(name)
                } else {
                    if !self.ast.with.contains_key(&name) {
                        let item = prop.map(|p| format!("{p} AS {name}")).unwrap_or_else(|| name.clone());
                        self.ast.with.insert(name.clone(), item);
                    }
                    name
                }
            }
        })
    }

    fn literal(&self, t: &ParseTree) -> Result<String> {
        match t.rule {
            Rule::NumericLiteral => {
                let text: String = t.leaves().iter().map(|l| l.text.as_str()).collect();
                let text = text.trim_start_matches('+');
                Ok(match text.strip_prefix('-') {
                    Some(rest) if rest.starts_with('.') => format!("-0{rest}"),
                    _ if text.starts_with('.') => format!("0{text}"),
                    _ => text.to_string(),
                })
            }
            Rule::BooleanLiteral => Ok(t.text().to_lowercase()),
            Rule::RdfLiteral => {
                let tok = t.tokens().next().expect("string token");
                let (content, lang) = unquote_sparql(&tok.text);
                if lang.is_some() {
                    return unsupported("language-tagged literal");
                }
                let Some(dt) = t.subtrees().next() else {
                    return Ok(cypher_quote(&content));
                };
                let dt_iri = match dt.rule {
                    Rule::Iri => iri_body(&dt.text()).to_string(),
                    _ => {
                        let text = dt.text();
                        self.prefixes.expand(&text).unwrap_or_else(|| match text.strip_prefix("xsd:") {
                            Some(local) => format!("{XSD_NS}{local}"),
                            None => text.clone(),
                        })
                    }
                };
                let local = dt_iri.strip_prefix(XSD_NS).unwrap_or("");
                let c = content.trim();
                match local {
                    "integer" | "int" | "long" | "short" | "byte" | "nonNegativeInteger" | "positiveInteger"
                    | "negativeInteger" | "nonPositiveInteger" | "unsignedInt" | "unsignedLong" => {
                        c.parse::<i64>()
                            .map(|n| n.to_string())
                            .map_err(|_| TranspileError::unsupported(format!("malformed integer '{c}'")))
                    }
                    "decimal" | "double" | "float" => match c.parse::<f64>() {
                        Ok(_) => Ok(c.to_string()),
                        Err(_) => unsupported(format!("malformed number '{c}'")),
                    },
                    "boolean" if c == "true" || c == "false" => Ok(c.to_string()),
                    _ => Ok(cypher_quote(&content)),
                }
            }
            other => unsupported(format!("{other} as literal")),
        }
    }

    fn operand(&mut self, t: &ParseTree, ctx: Ctx, in_agg: bool) -> Result<String> {
        let text = self.expr(t, ctx, in_agg, false)?;
        let predicate_like = t.rule == Rule::BuiltInCall
            && t.tokens().next().is_some_and(|tok| {
                ["CONTAINS", "STRSTARTS", "STRENDS", "BOUND"]
                    .iter()
                    .any(|n| tok.text.eq_ignore_ascii_case(n))
            });
        Ok(if predicate_like { format!("({text})") } else { text })
    }

    fn relational_parts(&mut self, t: &ParseTree, ctx: Ctx, in_agg: bool) -> Result<[String; 3]> {
        let mut subs = t.subtrees();
        let lhs_tree = subs.next().expect("lhs");
        let lhs = self.operand(lhs_tree, ctx, in_agg)?;
        if let Some(list) = t.child(Rule::ExpressionList) {
            let mut members = Vec::new();
            for m in list.subtrees() {
                members.push(self.expr(m, ctx, in_agg, false)?);
            }
            let op = if t.tokens().any(|tok| tok.is_keyword("NOT")) { "NOT IN" } else { "IN" };
            return Ok([lhs, op.to_string(), format!("({})", members.join(", "))]);
        }
        let op = t.tokens().next().expect("operator").text.clone();
        let rhs = self.operand(subs.next().expect("rhs"), ctx, in_agg)?;
        Ok([lhs, op, rhs])
    }

    fn expr(&mut self, t: &ParseTree, ctx: Ctx, in_agg: bool, top: bool) -> Result<String> {
        match t.rule {
            Rule::ConditionalOrExpression | Rule::ConditionalAndExpression => {
                let (logic, word) = if t.rule == Rule::ConditionalOrExpression {
                    ("||", "OR")
                } else {
                    ("&&", "AND")
                };
                let mut parts = Vec::new();
                for ch in t.subtrees() {
                    parts.push(self.expr(ch, ctx, in_agg, top)?);
                }
                let sep = if top { format!(" {logic} ") } else { format!(" {word} ") };
                Ok(parts.join(&sep))
            }
            Rule::RelationalExpression => {
                let [l, op, r] = self.relational_parts(t, ctx, in_agg)?;
                Ok(render_relational(&l, &op, &r))
            }
            Rule::AdditiveExpression | Rule::MultiplicativeExpression => {
                let mut out = Vec::new();
                for ch in &t.children {
                    match ch {
                        Node::Tree(sub) => out.push(self.operand(sub, ctx, in_agg)?),
                        Node::Token(tok) => out.push(tok.text.clone()),
                    }
                }
                Ok(out.join(" "))
            }
            Rule::UnaryExpression => {
                let op = t.tokens().next().expect("unary operator").text.clone();
                let inner = self.operand(t.subtrees().next().expect("operand"), ctx, in_agg)?;
                Ok(match op.as_str() {
                    "!" => format!("NOT {inner}"),
                    "+" => inner,
                    _ => format!("{op}{inner}"),
                })
            }
            Rule::BrackettedExpression => {
                let inner = self.expr(t.subtrees().next().expect("inner"), ctx, in_agg, false)?;
                Ok(format!("({inner})"))
            }
            Rule::Constraint => self.expr(t.subtrees().next().expect("inner"), ctx, in_agg, top),
            Rule::Var => self.var_in(&t.text(), ctx, in_agg),
            Rule::RdfLiteral | Rule::NumericLiteral | Rule::BooleanLiteral => self.literal(t),
            Rule::BuiltInCall => self.builtin(t, ctx, in_agg),
            Rule::FunctionCall => self.cast(t, ctx, in_agg),
            Rule::Aggregate => self.aggregate(t, ctx),
            Rule::Iri | Rule::PrefixedName => unsupported(format!("IRI constant {} in expression", t.text())),
            other => unsupported(format!("{other} in expression")),
        }
    }

    fn builtin(&mut self, t: &ParseTree, ctx: Ctx, in_agg: bool) -> Result<String> {
        let name = t.tokens().next().expect("function name").text.to_uppercase();
        let mut args = Vec::new();
        for a in t.subtrees() {
            args.push(self.operand(a, ctx, in_agg)?);
        }
        let arity = |n: usize| -> Result<()> {
            if args.len() == n {
                Ok(())
            } else {
                unsupported(format!("{name} with {} arguments", args.len()))
            }
        };
        let unary = |f: &str| format!("{f}({})", args[0]);
        Ok(match name.as_str() {
            "CONTAINS" | "STRSTARTS" | "STRENDS" => {
                arity(2)?;
                let op = match name.as_str() {
                    "CONTAINS" => "CONTAINS",
                    "STRSTARTS" => "STARTS WITH",
                    _ => "ENDS WITH",
                };
                format!("{} {op} {}", args[0], args[1])
            }
            "LCASE" | "UCASE" | "STRLEN" | "STR" | "ABS" | "CEIL" | "FLOOR" | "ROUND" => {
                arity(1)?;
                unary(match name.as_str() {
                    "LCASE" => "toLower",
                    "UCASE" => "toUpper",
                    "STRLEN" => "size",
                    "STR" => "toString",
                    "ABS" => "abs",
                    "CEIL" => "ceil",
                    "FLOOR" => "floor",
                    _ => "round",
                })
            }
            "BOUND" => {
                arity(1)?;
                format!("{} IS NOT NULL", args[0])
            }
            "COALESCE" if !args.is_empty() => format!("coalesce({})", args.join(", ")),
            "YEAR" | "MONTH" | "DAY" => {
                arity(1)?;
                let (start, len) = match name.as_str() {
                    "YEAR" => (0, 4),
                    "MONTH" => (5, 2),
                    _ => (8, 2),
                };
                format!("toInteger(substring(toString({}), {start}, {len}))", args[0])
            }
            _ => return unsupported(format!("function {name}")),
        })
    }

    fn cast(&mut self, t: &ParseTree, ctx: Ctx, in_agg: bool) -> Result<String> {
        let iri = t.subtrees().next().expect("function iri");
        let full = match iri.rule {
            Rule::Iri => iri_body(&iri.text()).to_string(),
            _ => {
                let text = iri.text();
                self.prefixes.expand(&text).unwrap_or_else(|| match text.strip_prefix("xsd:") {
                    Some(local) => format!("{XSD_NS}{local}"),
                    None => text.clone(),
                })
            }
        };
        let f = match full.strip_prefix(XSD_NS) {
            Some("integer" | "int" | "long") => "toInteger",
            Some("decimal" | "double" | "float") => "toFloat",
            Some("string") => "toString",
            Some("boolean") => "toBoolean",
            _ => return unsupported(format!("function {}", iri.text())),
        };
        let list = t.child(Rule::ExpressionList).expect("argument list");
        let args: Vec<_> = list.subtrees().collect();
        if args.len() != 1 {
            return unsupported(format!("{} with {} arguments", iri.text(), args.len()));
        }
        let arg = self.expr(args[0], ctx, in_agg, false)?;
        Ok(format!("{f}({arg})"))
    }

    fn aggregate(&mut self, t: &ParseTree, ctx: Ctx) -> Result<String> {
        let name = t.tokens().next().expect("aggregate name").text.to_uppercase();
        if !matches!(name.as_str(), "COUNT" | "SUM" | "AVG" | "MIN" | "MAX") {
            return unsupported(format!("aggregate {name}"));
        }
        let distinct = t.tokens().any(|tok| tok.is_keyword("DISTINCT"));
        let arg = if t.tokens().any(|tok| tok.is_op("*")) {
            "*".to_string()
        } else {
            let inner = t.subtrees().next().expect("aggregate argument");
            self.expr(inner, ctx, true, false)?
        };
        let text = format!("{name}({}{arg})", if distinct { "DISTINCT " } else { "" });
        match ctx {
            Ctx::Filter => unsupported("aggregate inside FILTER"),
            Ctx::Group => unsupported("aggregate inside GROUP BY"),
            Ctx::Project => {
                self.saw_aggregate = true;
                Ok(text)
            }
            Ctx::Having | Ctx::Order => visit_aggregate(&mut self.ast, &text, None),
        }
    }

    // ---- clause visitors -------------------------------------------------

    fn visit_constraint(&mut self, c: &ParseTree, ctx: Ctx) -> Result<Constraint> {
        let e = unwrap_brackets(c);
        if e.rule == Rule::RelationalExpression {
            return Ok(Constraint::Relational(self.relational_parts(e, ctx, false)?));
        }
        Ok(Constraint::Text(self.expr(e, ctx, false, true)?))
    }

    fn visit_select(&mut self, clause: &ParseTree) -> Result<()> {
        let mut distinct = false;
        for ch in &clause.children {
            match ch {
                Node::Token(t) => {
                    if t.is_keyword("DISTINCT") {
                        distinct = true;
                    } else if t.is_op("*") {
                        self.select.push((distinct, SelItem::Star));
                        distinct = false;
                    }
                }
                Node::Tree(t) if t.rule == Rule::Var => {
                    let name = visit_var(&mut self.ast, &t.text(), false);
                    self.select.push((distinct, SelItem::Var(name)));
                    distinct = false;
                }
                Node::Tree(t) => {
                    let mut subs = t.subtrees();
                    let e = subs.next().expect("binding expression");
                    let alias_tree = subs.next().expect("binding alias");
                    let alias = visit_var(&mut self.ast, &alias_tree.text(), false);
                    let inner = unwrap_brackets(e);
                    self.saw_aggregate = false;
                    let item = if inner.rule == Rule::Aggregate {
                        let text = self.aggregate(inner, Ctx::Project)?;
                        visit_aggregate(&mut self.ast, &text, Some(&alias))?;
                        SelItem::Var(alias)
                    } else {
                        let text = self.expr(e, Ctx::Project, false, false)?;
                        if self.saw_aggregate {
                            self.ast.with.insert(alias.clone(), format!("{text} AS {alias}"));
                            self.ast.aggregates.insert(alias.clone(), text);
                            SelItem::Var(alias)
                        } else {
                            SelItem::Expr { alias, text }
                        }
                    };
                    self.select.push((distinct, item));
                    distinct = false;
                }
            }
        }
        self.ast.return_items = vec![self.return_string()];
        Ok(())
    }

    fn return_string(&self) -> String {
        let grouped = !self.ast.with.is_empty();
        self.select
            .iter()
            .map(|(d, item)| {
                let body = match item {
                    SelItem::Star => "*".to_string(),
                    SelItem::Var(v) => v.clone(),
                    SelItem::Expr { alias, .. } if grouped => alias.clone(),
                    SelItem::Expr { alias, text } => format!("{text} AS {alias}"),
                };
                if *d {
                    format!("DISTINCT {body}")
                } else {
                    body
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn visit_group_condition(&mut self, c: &ParseTree) -> Result<String> {
        let has_as = c.tokens().any(|t| t.is_keyword("AS"));
        let subs: Vec<&ParseTree> = c.subtrees().collect();
        let expr_tree = unwrap_brackets(subs[0]);
        if has_as {
            let alias = visit_var(&mut self.ast, &subs[subs.len() - 1].text(), false);
            if expr_tree.rule == Rule::Var {
                let v = visit_var(&mut self.ast, &expr_tree.text(), false);
                if self.ast.with.contains_key(&v) {
                    return Ok(v);
                }
            }
            if !self.ast.with.contains_key(&alias) {
                let text = self.expr(expr_tree, Ctx::Group, false, false)?;
                self.ast.with.insert(alias.clone(), format!("{text} AS {alias}"));
            }
            return Ok(alias);
        }
        if expr_tree.rule == Rule::Var {
            let v = visit_var(&mut self.ast, &expr_tree.text(), false);
            if !self.is_pattern_var(&v) {
                return unsupported(format!("?{v} is not bound by the graph pattern"));
            }
            match self.ast.props.get(&v).cloned() {
                Some(p) => {
                    self.ast.with.insert(v.clone(), format!("{p} AS {v}"));
                }
                None => {
                    self.ast.with.entry(v.clone()).or_insert_with(|| v.clone());
                }
            }
            return Ok(v);
        }
        let text = self.expr(expr_tree, Ctx::Group, false, false)?;
        let n = self.ast.with.keys().filter(|k| k.starts_with("grp__")).count();
        let alias = format!("grp__{n}");
        self.ast.with.insert(alias.clone(), format!("{text} AS {alias}"));
        self.ast.add_var(&alias);
        Ok(alias)
    }

    fn visit_order_condition(&mut self, c: &ParseTree) -> Result<()> {
        let (dir, key_tree) = if c.children.len() == 1 {
            (Direction::Asc, c.subtrees().next().expect("order key"))
        } else {
            let desc = c.tokens().any(|t| t.is_keyword("DESC"));
            let dir = if desc { Direction::Desc } else { Direction::Asc };
            (dir, c.subtrees().next().expect("order expression"))
        };
        let key_tree = unwrap_brackets(key_tree);
        let key = if key_tree.rule == Rule::Var {
            let k = visit_var(&mut self.ast, &key_tree.text(), false);
            let known = self.is_pattern_var(&k)
                || self.ast.with.contains_key(&k)
                || self.select.iter().any(|(_, i)| matches!(i, SelItem::Expr { alias, .. } if *alias == k));
            if !known {
                return unsupported(format!("ORDER BY ?{k} which is never bound"));
            }
            if self.ast.with.is_empty() && !self.ast.return_items.contains(&k) {
                self.ast.props.get(&k).cloned().unwrap_or(k)
            } else {
                if !self.ast.with.is_empty() && !self.ast.with.contains_key(&k) {
                    let item = match self.ast.props.get(&k) {
                        Some(p) => format!("{p} AS {k}"),
                        None => k.clone(),
                    };
                    self.ast.with.insert(k.clone(), item);
                }
                k
            }
        } else {
            self.expr(key_tree, Ctx::Order, false, false)?
        };
        self.ast.order_by.insert(key, dir);
        Ok(())
    }

    fn finalize(&mut self) -> Result<()> {
        if self.ast.with.is_empty() {
            for (_, item) in &self.select {
                if let SelItem::Var(v) = item {
                    if !self.is_pattern_var(v) {
                        return unsupported(format!("?{v} is not bound by the graph pattern"));
                    }
                }
            }
        } else {
            for (_, item) in &self.select {
                match item {
                    SelItem::Star => return unsupported("SELECT * combined with grouping"),
                    SelItem::Var(v) if !self.ast.with.contains_key(v) => {
                        return unsupported(format!("?{v} is projected but neither grouped nor aggregated"))
                    }
                    SelItem::Expr { alias, text }
                        if !self.ast.with.contains_key(alias) => {
                            self.ast.with.insert(alias.clone(), format!("{text} AS {alias}"));
                        }
                    _ => {}
                }
            }
            self.ast.return_items = vec![self.return_string()];
        }
        let distinct = self.select.iter().any(|(d, _)| *d);
        if distinct && !self.ast.order_by.is_empty() {
            let grouped = !self.ast.with.is_empty();
            let mut projected: HashSet<String> = HashSet::new();
            for (_, item) in &self.select {
                match item {
                    SelItem::Star => {
                        for v in &self.ast.vars {
                            projected.insert(v.clone());
                            if let Some(p) = self.ast.props.get(v) {
                                projected.insert(p.clone());
                            }
                        }
                    }
                    SelItem::Var(v) => {
                        projected.insert(v.clone());
                        if !grouped {
                            if let Some(p) = self.ast.props.get(v) {
                                projected.insert(p.clone());
                            }
                        }
                    }
                    SelItem::Expr { alias, text } => {
                        projected.insert(alias.clone());
                        projected.insert(text.clone());
                    }
                }
            }
            if let Some(k) = self.ast.order_by.keys().find(|k| !projected.contains(*k)) {
                return unsupported(format!("ORDER BY {k} is not projected by SELECT DISTINCT"));
            }
        }
        Ok(())
    }
}

/// Infix rendering of a `[lhs, op, rhs]` constraint.
pub fn render_relational(l: &str, op: &str, r: &str) -> String {
    let list = |r: &str| {
        let inner = r.strip_prefix('(').and_then(|x| x.strip_suffix(')')).unwrap_or(r);
        format!("[{inner}]")
    };
    match op {
        "IN" => format!("{l} IN {}", list(r)),
        "NOT IN" => format!("NOT {l} IN {}", list(r)),
        "!=" => format!("{l} <> {r}"),
        _ => format!("{l} {op} {r}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_query;

    fn ast(q: &str) -> Ast {
        build_ast(&parse_query(q).unwrap(), &TranspileOptions::default()).unwrap_or_else(|e| panic!("{q}: {e}"))
    }

    fn err(q: &str) -> TranspileError {
        build_ast(&parse_query(q).unwrap(), &TranspileOptions::default()).unwrap_err()
    }

    #[test]
    fn type_triples_label_nodes() {
        let a = ast("SELECT ?x WHERE { ?x rdf:type :Person . ?pet a :Pet }");
        assert_eq!(a.nodes["x"].label.as_deref(), Some("ROOT__Person"));
        assert_eq!(a.nodes["pet"].label.as_deref(), Some("ROOT__Pet"));
    }

    #[test]
    fn label_conflict_is_an_error() {
        assert!(matches!(
            err("SELECT ?x WHERE { ?x a :A . ?x a :B }"),
            TranspileError::Conflict(_)
        ));
    }

    #[test]
    fn value_constraint_and_property() {
        let a = ast("SELECT ?a WHERE { ?x a :Person . ?x :name 'Emma' . ?x :age ?a }");
        assert_eq!(a.nodes["x"].constraints["ROOT__name"], "'Emma'");
        assert_eq!(a.props["a"], "x.ROOT__age");
    }

    #[test]
    fn explicit_rel_forces_relationship() {
        let q = "SELECT ?ag WHERE { ?x a :Person . ?x :knows ?y . ?y :age ?ag }";
        let a = ast(q);
        assert_eq!(a.props["y"], "x.ROOT__knows");
        assert!(a.rels.is_empty());
        let opts = TranspileOptions {
            explicit_rels: ":knows".parse().unwrap(),
            ..Default::default()
        };
        let a = build_ast(&parse_query(q).unwrap(), &opts).unwrap();
        assert_eq!(a.rels.len(), 1);
        assert_eq!(a.rels[0].r, ":ROOT__knows");
        assert!(a.nodes.contains_key("y"));
        assert_eq!(a.nodes["y"].label, None);
    }

    #[test]
    fn having_reuses_select_alias() {
        let a = ast("SELECT ?x (AVG(?v) AS ?m) WHERE { ?x a :A ; :v ?v } GROUP BY ?x HAVING (AVG(?v) > 3)");
        assert_eq!(a.where_with, [Constraint::Relational(["m".into(), ">".into(), "3".into()])]);
        assert_eq!(a.aggregates.len(), 1);
    }

    #[test]
    fn anonymous_having_alias() {
        let a = ast("SELECT ?x WHERE { ?x a :A ; :v ?y } GROUP BY ?x HAVING (AVG(?y) < 10)");
        assert_eq!(a.with["agg__0"], "AVG(x.ROOT__v) AS agg__0");
        assert_eq!(a.where_with, [Constraint::Relational(["agg__0".into(), "<".into(), "10".into()])]);
    }

    #[test]
    fn filter_in_list_is_a_triple() {
        let a = ast("SELECT ?x WHERE { ?x a :A ; :v ?v FILTER(?v IN (10,20,30)) }");
        assert_eq!(
            a.where_,
            [Constraint::Relational(["x.ROOT__v".into(), "IN".into(), "(10, 20, 30)".into()])]
        );
    }

    #[test]
    fn order_by_rewrites_to_property_without_with() {
        let a = ast("SELECT DISTINCT ?l WHERE { ?p a :P ; :label ?l } ORDER BY (?l) LIMIT 10");
        assert_eq!(a.order_by.get_index(0).unwrap(), (&"p.ROOT__label".to_string(), &Direction::Asc));
        assert_eq!(a.return_items, ["DISTINCT l"]);
        assert_eq!(a.limit, Some(10));
    }

    #[test]
    fn group_by_expression_alias() {
        let a = ast("SELECT ?y (COUNT(?x) AS ?n) WHERE { ?x a :A ; :d ?d } GROUP BY (YEAR(?d) AS ?y)");
        assert!(a.with["y"].ends_with(" AS y"), "{}", a.with["y"]);
        assert!(a.with["y"].contains("x.ROOT__d"));
    }

    #[test]
    fn group_by_alias_guard() {
        let a = ast("SELECT ?a (COUNT(?x) AS ?n) WHERE { ?x a :A ; :p ?a } GROUP BY ?a (?a AS ?b)");
        let keys: Vec<_> = a.with.keys().cloned().collect();
        assert_eq!(keys, ["n", "a"]);
    }

    #[test]
    fn var_strip_and_set_semantics() {
        let mut a = init_ast();
        assert_eq!(visit_var(&mut a, "$y", false), "y");
        visit_var(&mut a, "?y", false);
        assert_eq!(a.vars, ["y"]);
    }

    #[test]
    fn dense_anonymous_aliases() {
        let mut a = init_ast();
        visit_aggregate(&mut a, "AVG(x)", Some("named")).unwrap();
        assert_eq!(visit_aggregate(&mut a, "SUM(x)", None).unwrap(), "agg__0");
        assert_eq!(visit_aggregate(&mut a, "MIN(x)", None).unwrap(), "agg__1");
        assert_eq!(visit_aggregate(&mut a, "SUM(x)", None).unwrap(), "agg__0");
        assert!(visit_aggregate(&mut a, "MAX(x)", Some("named")).is_err());
    }

    #[test]
    fn optional_rel_is_tagged() {
        let a = ast("SELECT ?x WHERE { ?x a :A . OPTIONAL { ?x :p ?y . ?y a :B } }");
        assert!(a.rels[0].optional);
        assert!(a.nodes["y"].optional);
        assert!(!a.nodes["x"].optional);
    }

    #[test]
    fn inverse_and_sequence_paths() {
        let a = ast("SELECT ?x WHERE { ?x a :A . ?y a :B . ?x ^:p ?y . ?x :q/^:r ?y }");
        assert_eq!(a.rels[0].r, ":ROOT__p");
        assert!(a.rels[0].inverse);
        assert_eq!(a.rels[1].r, ":ROOT__q/^:ROOT__r");
        assert_eq!(a.rel_types, [":ROOT__p", ":ROOT__q", ":ROOT__r"]);
    }

    #[test]
    fn unsupported_semantics_are_other() {
        for q in [
            "SELECT ?x WHERE { :e :p ?x }",
            "SELECT ?x WHERE { ?x :p :e }",
            "SELECT ?x WHERE { ?x a :A FILTER(REGEX(?x, 'a')) }",
            "SELECT ?x WHERE { ?x a :A OPTIONAL { ?x :p 1 } }",
            "SELECT ?x WHERE { ?x a :A OPTIONAL { ?x :p ?y FILTER(?y > 1) } }",
            "SELECT ?z WHERE { ?x a :A }",
        ] {
            let e = err(q);
            assert_eq!(e.category().kind, crate::classifier::FailureKind::Other, "{q}: {e}");
        }
    }

    #[test]
    fn unquote_handles_escapes_and_lang() {
        assert_eq!(unquote_sparql(r"'it\'s'"), ("it's".into(), None));
        assert_eq!(unquote_sparql("\"chat\"@fr"), ("chat".into(), Some("fr".into())));
        assert_eq!(unquote_sparql("'''a'b'''"), ("a'b".into(), None));
        assert_eq!(cypher_quote("it's"), r"'it\'s'");
    }
}
