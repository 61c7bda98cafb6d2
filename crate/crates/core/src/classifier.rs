//! Detection of constructs outside the supported subset, grouped into the
//! parsing-error taxonomy used in reports.

use crate::lexer::TokenKind;
use crate::parse_tree::{Node, ParseTree, Rule};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FailureKind {
    #[serde(rename = "COUNT_ALL")]
    CountAll,
    #[serde(rename = "NS2")]
    Ns2,
    #[serde(rename = "NS1")]
    Ns1,
    #[serde(rename = "OTHER")]
    Other,
    #[serde(rename = "SYNTAX")]
    Syntax,
}

impl FailureKind {
    pub const ALL: [FailureKind; 5] = [
        FailureKind::CountAll,
        FailureKind::Ns2,
        FailureKind::Ns1,
        FailureKind::Other,
        FailureKind::Syntax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FailureKind::CountAll => "COUNT_ALL",
            FailureKind::Ns2 => "NS2",
            FailureKind::Ns1 => "NS1",
            FailureKind::Other => "OTHER",
            FailureKind::Syntax => "SYNTAX",
        }
    }

    pub fn from_name(s: &str) -> Option<FailureKind> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Lower rank wins when a query has several unsupported constructs.
    fn rank(self) -> u8 {
        match self {
            FailureKind::CountAll => 0,
            FailureKind::Ns2 => 1,
            FailureKind::Ns1 => 2,
            FailureKind::Other => 3,
            FailureKind::Syntax => 4,
        }
    }
}

impl fmt::Display for FailureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCategory {
    pub kind: FailureKind,
    pub detail: String,
}

impl FailureCategory {
    pub fn new(kind: FailureKind, detail: impl Into<String>) -> Self {
        FailureCategory {
            kind,
            detail: detail.into(),
        }
    }

    pub fn other(detail: impl Into<String>) -> Self {
        Self::new(FailureKind::Other, detail)
    }
}

impl fmt::Display for FailureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.detail)
    }
}

fn at(tree: &ParseTree) -> String {
    match tree.first_token() {
        Some(t) => format!(" at {}:{}", t.line, t.col),
        None => String::new(),
    }
}

fn is_constant(tree: &ParseTree) -> bool {
    match tree.rule {
        Rule::RdfLiteral | Rule::NumericLiteral | Rule::BooleanLiteral => true,
        Rule::UnaryExpression => tree.subtrees().all(is_constant),
        Rule::BrackettedExpression => tree.subtrees().all(is_constant),
        _ => false,
    }
}

struct Scan {
    compat: bool,
    found: Option<FailureCategory>,
}

impl Scan {
    fn flag(&mut self, kind: FailureKind, detail: String) {
        match &self.found {
            Some(f) if f.kind.rank() <= kind.rank() => {}
            _ => self.found = Some(FailureCategory::new(kind, detail)),
        }
    }

    fn visit(&mut self, tree: &ParseTree, in_select: bool, optional_depth: usize) {
        let here = at(tree);
        match tree.rule {
            Rule::SubSelect => self.flag(FailureKind::Ns2, format!("nested SELECT{here}")),
            Rule::MinusGraphPattern => self.flag(FailureKind::Ns2, format!("MINUS{here}")),
            Rule::Aggregate => {
                let star = tree.tokens().any(|t| t.is_op("*"));
                if star && !in_select {
                    self.flag(FailureKind::Ns2, format!("COUNT(*) outside of projection{here}"));
                } else if star && self.compat {
                    self.flag(FailureKind::CountAll, format!("COUNT(*) in SELECT{here}"));
                }
            }
            Rule::ExistsFunc => self.flag(FailureKind::Ns1, format!("EXISTS{here}")),
            Rule::NotExistsFunc => self.flag(FailureKind::Ns1, format!("NOT EXISTS{here}")),
            Rule::RelationalExpression => {
                if let Some(list) = tree.child(Rule::ExpressionList) {
                    if !list.subtrees().all(is_constant) {
                        let op = if tree.tokens().any(|t| t.is_keyword("NOT")) {
                            "NOT IN"
                        } else {
                            "IN"
                        };
                        self.flag(FailureKind::Ns1, format!("{op} over non-constant members{here}"));
                    }
                }
            }
            Rule::GroupOrUnionGraphPattern if tree.tokens().any(|t| t.is_keyword("UNION")) => {
                self.flag(FailureKind::Other, format!("UNION{here}"))
            }
            Rule::InlineData | Rule::ValuesClause => self.flag(FailureKind::Other, format!("VALUES{here}")),
            Rule::Bind => self.flag(FailureKind::Other, format!("BIND{here}")),
            Rule::GraphGraphPattern => self.flag(FailureKind::Other, format!("GRAPH{here}")),
            Rule::ServiceGraphPattern => self.flag(FailureKind::Other, format!("SERVICE{here}")),
            Rule::DatasetClause => self.flag(FailureKind::Other, format!("FROM{here}")),
            Rule::OtherQueryForm => {
                let form = tree.first_token().map(|t| t.text.to_uppercase()).unwrap_or_default();
                self.flag(FailureKind::Other, format!("{form} query form{here}"))
            }
            Rule::PathAlternative => self.flag(FailureKind::Other, format!("path alternative{here}")),
            Rule::PathElt => self.flag(FailureKind::Other, format!("path modifier or grouped path{here}")),
            Rule::PathNegatedPropertySet => self.flag(FailureKind::Other, format!("negated property set{here}")),
            Rule::BlankNode => self.flag(FailureKind::Other, format!("blank node{here}")),
            Rule::VerbPath if tree.child(Rule::Var).is_some() => {
                self.flag(FailureKind::Other, format!("variable predicate{here}"))
            }
            Rule::OptionalGraphPattern if optional_depth > 0 => {
                self.flag(FailureKind::Other, format!("nested OPTIONAL{here}"))
            }
            _ => {}
        }
        let in_select = match tree.rule {
            Rule::SelectClause => true,
            Rule::WhereClause | Rule::SolutionModifier => false,
            _ => in_select,
        };
        let depth = optional_depth + usize::from(tree.rule == Rule::OptionalGraphPattern);
        for ch in &tree.children {
            if let Node::Tree(t) = ch {
                self.visit(t, in_select, depth);
            }
        }
    }
}

/// Scans a parse tree for unsupported constructs. Returns the category of
/// the highest-priority construct found (NS2 before NS1 before OTHER), or
/// `None` when the structure is inside the supported subset. In `compat`
/// mode a COUNT(*) projection is reported as COUNT_ALL ahead of anything else.
pub fn classify(tree: &ParseTree, compat: bool) -> Option<FailureCategory> {
    let mut scan = Scan { compat, found: None };
    scan.visit(tree, false, 0);
    scan.found
}

/// True when the token stream contains a COUNT(*) inside the SELECT clause.
pub fn has_count_all_projection(tree: &ParseTree) -> bool {
    tree.child(Rule::SelectQuery)
        .and_then(|q| q.child(Rule::SelectClause))
        .map(|sc| {
            let mut found = false;
            sc.walk(&mut |t| {
                if t.rule == Rule::Aggregate
                    && t.tokens().any(|tok| tok.is_op("*"))
                    && t.tokens().next().is_some_and(|tok| tok.kind == TokenKind::Keyword)
                {
                    found = true;
                }
            });
            found
        })
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_query;

    fn kind(q: &str) -> Option<FailureKind> {
        classify(&parse_query(q).unwrap(), false).map(|c| c.kind)
    }

    #[test]
    fn supported_query_is_clean() {
        assert_eq!(kind("SELECT ?x WHERE { ?x a :P . FILTER(?x IN (1, 2)) }"), None);
        assert_eq!(kind("select (count( *) as ?n) where { ?t a :s . }"), None);
    }

    #[test]
    fn nested_structures_are_ns2() {
        assert_eq!(kind("SELECT ?x WHERE { { SELECT ?x WHERE { ?x a :A } } }"), Some(FailureKind::Ns2));
        assert_eq!(kind("SELECT ?x WHERE { ?x a :A MINUS { ?x :p 1 } }"), Some(FailureKind::Ns2));
        assert_eq!(
            kind("SELECT ?x WHERE { ?x a :A } GROUP BY ?x HAVING (COUNT(*) > 1)"),
            Some(FailureKind::Ns2)
        );
    }

    #[test]
    fn constraint_forms_are_ns1() {
        assert_eq!(kind("SELECT ?x WHERE { ?x a :A FILTER NOT EXISTS { ?x :p ?y } }"), Some(FailureKind::Ns1));
        assert_eq!(kind("SELECT ?x WHERE { ?x a :A ; :p ?y ; :q ?z FILTER(?y IN (?z)) }"), Some(FailureKind::Ns1));
    }

    #[test]
    fn ns2_outranks_ns1() {
        let q = "SELECT ?x WHERE { ?x a :A FILTER NOT EXISTS { ?x :p ?y } MINUS { ?x :q 1 } }";
        assert_eq!(kind(q), Some(FailureKind::Ns2));
    }

    #[test]
    fn everything_else_is_other() {
        assert_eq!(kind("SELECT ?x WHERE { { ?x a :A } UNION { ?x a :B } }"), Some(FailureKind::Other));
        assert_eq!(kind("SELECT ?x WHERE { ?x :p+ ?y }"), Some(FailureKind::Other));
        assert_eq!(kind("ASK { ?x a :A }"), Some(FailureKind::Other));
        assert_eq!(kind("SELECT ?x WHERE { ?x ?p ?y }"), Some(FailureKind::Other));
    }

    #[test]
    fn compat_mode_reports_count_all() {
        let tree = parse_query("select (count( *) as ?n) where { ?t a :s . }").unwrap();
        assert_eq!(classify(&tree, true).unwrap().kind, FailureKind::CountAll);
        assert!(has_count_all_projection(&tree));
    }

    #[test]
    fn names_round_trip() {
        for k in FailureKind::ALL {
            assert_eq!(FailureKind::from_name(k.name()), Some(k));
            assert_eq!(serde_json::to_value(k).unwrap(), serde_json::json!(k.name()));
        }
    }
}
