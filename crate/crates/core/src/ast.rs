//! The pattern AST: the containers the visitor fills and the builders read.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Set for nodes that only occur inside OPTIONAL blocks.
    #[serde(default, skip_serializing_if = "is_false")]
    pub optional: bool,
    /// Value constraints, property name to literal text.
    #[serde(flatten)]
    pub constraints: IndexMap<String, String>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelEntry {
    pub s: String,
    /// `:type` or a `/`-joined path of them; a `^` marks an inverted segment.
    pub r: String,
    pub o: String,
    pub optional: bool,
    pub inverse: bool,
}

/// A constraint term: either a `[lhs, op, rhs]` triple for a single
/// relational expression, or preformatted text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Constraint {
    Relational([String; 3]),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "ASC")]
    Asc,
    #[serde(rename = "DESC")]
    Desc,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Asc => "ASC",
            Direction::Desc => "DESC",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ast {
    #[serde(default)]
    pub vars: Vec<String>,
    #[serde(default)]
    pub iri: IndexMap<String, String>,
    #[serde(default)]
    pub nodes: IndexMap<String, NodeEntry>,
    #[serde(default)]
    pub props: IndexMap<String, String>,
    #[serde(default)]
    pub rels: Vec<RelEntry>,
    #[serde(default)]
    pub rel_types: Vec<String>,
    #[serde(default)]
    pub aggregates: IndexMap<String, String>,
    #[serde(rename = "WHERE", default)]
    pub where_: Vec<Constraint>,
    #[serde(rename = "WITH", default)]
    pub with: IndexMap<String, String>,
    #[serde(rename = "WHERE_WITH", default)]
    pub where_with: Vec<Constraint>,
    #[serde(rename = "UNWIND", default)]
    pub unwind: IndexMap<String, String>,
    #[serde(rename = "RETURN", default)]
    pub return_items: Vec<String>,
    #[serde(rename = "ORDER BY", default)]
    pub order_by: IndexMap<String, Direction>,
    #[serde(rename = "LIMIT", default)]
    pub limit: Option<u64>,
    #[serde(rename = "OFFSET", default)]
    pub skip: Option<u64>,
    #[serde(default)]
    pub subgraphs: IndexMap<String, serde_json::Value>,
}

/// All containers empty, LIMIT and OFFSET unset.
pub fn init_ast() -> Ast {
    Ast::default()
}

impl Ast {
    /// Registers a variable name once, keeping first-seen order.
    pub fn add_var(&mut self, v: &str) {
        if !self.vars.iter().any(|x| x == v) {
            self.vars.push(v.to_string());
        }
    }

    pub fn has_var(&self, v: &str) -> bool {
        self.vars.iter().any(|x| x == v)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("ast serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("ast serializes")
    }

    /// Every variable referenced by a container, in container order.
    pub fn referenced_vars(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        out.extend(self.nodes.keys().map(String::as_str));
        out.extend(self.props.keys().map(String::as_str));
        for r in &self.rels {
            out.push(&r.s);
            out.push(&r.o);
        }
        out.extend(self.aggregates.keys().map(String::as_str));
        out.extend(self.with.keys().map(String::as_str));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_ast_has_all_keys() {
        let json = init_ast().to_json();
        let obj = json.as_object().unwrap();
        let keys: Vec<_> = obj.keys().map(String::as_str).collect();
        assert_eq!(
            keys,
            [
                "vars", "iri", "nodes", "props", "rels", "rel_types", "aggregates", "WHERE", "WITH",
                "WHERE_WITH", "UNWIND", "RETURN", "ORDER BY", "LIMIT", "OFFSET", "subgraphs"
            ]
        );
        assert!(obj["LIMIT"].is_null());
        assert_eq!(init_ast(), init_ast());
    }

    #[test]
    fn node_entry_flattens_constraints() {
        let mut n = NodeEntry {
            label: Some("ROOT__Person".into()),
            ..Default::default()
        };
        n.constraints.insert("ROOT__name".into(), "'Emma'".into());
        let v = serde_json::to_value(&n).unwrap();
        assert_eq!(v, serde_json::json!({"label": "ROOT__Person", "ROOT__name": "'Emma'"}));
        let back: NodeEntry = serde_json::from_value(v).unwrap();
        assert_eq!(back, n);
    }

    #[test]
    fn constraint_shapes() {
        let c: Constraint = serde_json::from_str(r#"["a", ">", "30"]"#).unwrap();
        assert_eq!(c, Constraint::Relational(["a".into(), ">".into(), "30".into()]));
        let c: Constraint = serde_json::from_str(r#""x CONTAINS 'b'""#).unwrap();
        assert_eq!(c, Constraint::Text("x CONTAINS 'b'".into()));
    }

    #[test]
    fn missing_keys_default() {
        let ast: Ast = serde_json::from_str(r#"{"vars": ["x"], "LIMIT": 3}"#).unwrap();
        assert_eq!(ast.vars, ["x"]);
        assert_eq!(ast.limit, Some(3));
        assert!(ast.unwind.is_empty());
    }
}
