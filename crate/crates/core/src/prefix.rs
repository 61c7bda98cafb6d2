//! Prefix declarations and the mapping from RDF names to property-graph names.

use crate::lexer::TokenKind;
use crate::parse_tree::{ParseTree, Rule};
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("undeclared prefix '{0}:'")]
    UndeclaredPrefix(String),
    #[error("local name '{0}' contains '__'")]
    AmbiguousLocal(String),
    #[error("IRI <{0}> does not fall under any declared namespace")]
    UnknownNamespace(String),
    #[error("'{0}' is not a prefixed name")]
    NotPrefixed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamingOptions {
    /// Label substituted for the empty prefix `:`.
    pub default_label: String,
    /// Reject undeclared prefixes and local names containing `__`.
    pub strict: bool,
}

impl Default for NamingOptions {
    fn default() -> Self {
        NamingOptions {
            default_label: "ROOT".to_string(),
            strict: false,
        }
    }
}

/// Prefix label (without the colon) to namespace IRI. The empty label is the
/// default prefix and is always considered declared.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrefixMap {
    pub entries: IndexMap<String, String>,
}

impl PrefixMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Later declarations of the same label replace earlier ones.
    pub fn insert(&mut self, label: &str, iri: &str) {
        self.entries.shift_remove(label);
        self.entries.insert(label.to_string(), iri.to_string());
    }

    pub fn get(&self, label: &str) -> Option<&str> {
        self.entries.get(label).map(String::as_str)
    }

    pub fn is_declared(&self, label: &str) -> bool {
        label.is_empty() || self.entries.contains_key(label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Expands `p:local` to a full IRI when `p` is declared.
    pub fn expand(&self, prefixed: &str) -> Option<String> {
        let (p, local) = prefixed.split_once(':')?;
        self.get(p).map(|ns| format!("{ns}{local}"))
    }

    /// Finds the declaration with the longest namespace that prefixes `iri`.
    pub fn compact(&self, iri: &str) -> Option<(String, String)> {
        self.entries
            .iter()
            .filter(|(_, ns)| !ns.is_empty() && iri.starts_with(ns.as_str()))
            .max_by_key(|(_, ns)| ns.len())
            .map(|(p, ns)| (p.clone(), iri[ns.len()..].to_string()))
    }
}

/// Collects the PREFIX declarations of a parsed query.
pub fn resolve_prefixes(tree: &ParseTree) -> PrefixMap {
    let mut map = PrefixMap::new();
    if let Some(prologue) = tree.child(Rule::Prologue) {
        for decl in prologue.children_of(Rule::PrefixDecl) {
            let toks: Vec<_> = decl.tokens().collect();
            let label = toks
                .iter()
                .find(|t| t.kind == TokenKind::PrefixedName)
                .map(|t| t.text.trim_end_matches(':'));
            let iri = toks.iter().find(|t| t.kind == TokenKind::Iri);
            if let (Some(label), Some(iri)) = (label, iri) {
                map.insert(label, iri_body(&iri.text));
            }
        }
    }
    map
}

/// Strips the angle brackets of an IRIREF token.
pub fn iri_body(text: &str) -> &str {
    text.strip_prefix('<')
        .and_then(|t| t.strip_suffix('>'))
        .unwrap_or(text)
}

/// A property-graph name of the form `<prefix>__<local>`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PgName(pub String);

impl PgName {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Splits at the first `__`.
    pub fn parts(&self) -> (&str, &str) {
        self.0.split_once("__").unwrap_or(("", &self.0))
    }
}

impl fmt::Display for PgName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn sanitize(part: &str) -> String {
    part.chars()
        .map(|c| if c.is_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

fn join_name(label: &str, local: &str, opts: &NamingOptions) -> Result<PgName, NameError> {
    if opts.strict && local.contains("__") {
        return Err(NameError::AmbiguousLocal(local.to_string()));
    }
    let label = if label.is_empty() {
        opts.default_label.clone()
    } else {
        sanitize(label)
    };
    Ok(PgName(format!("{label}__{}", sanitize(local))))
}

/// Maps `p:local` to `p__local`; the empty prefix becomes the default label.
pub fn pg_name(prefixed: &str, prefixes: &PrefixMap, opts: &NamingOptions) -> Result<PgName, NameError> {
    let (p, local) = prefixed
        .split_once(':')
        .ok_or_else(|| NameError::NotPrefixed(prefixed.to_string()))?;
    if opts.strict && !prefixes.is_declared(p) {
        return Err(NameError::UndeclaredPrefix(p.to_string()));
    }
    join_name(p, local, opts)
}

/// Maps a full IRI through the longest matching namespace declaration.
pub fn pg_name_for_iri(iri: &str, prefixes: &PrefixMap, opts: &NamingOptions) -> Result<PgName, NameError> {
    let (p, local) = prefixes
        .compact(iri)
        .ok_or_else(|| NameError::UnknownNamespace(iri.to_string()))?;
    join_name(&p, &local, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_query;

    fn name(p: &str) -> String {
        pg_name(p, &PrefixMap::new(), &NamingOptions::default())
            .unwrap()
            .0
    }

    #[test]
    fn default_prefix_maps_to_root() {
        assert_eq!(name(":singer"), "ROOT__singer");
        assert_eq!(name(":Pet"), "ROOT__Pet");
        assert_eq!(name("person:age"), "person__age");
    }

    #[test]
    fn hyphenated_prefix_is_sanitized() {
        assert_eq!(name("bsbm-inst:ProductType1"), "bsbm_inst__ProductType1");
    }

    #[test]
    fn bsbm_prologue_has_five_entries() {
        let q = "PREFIX bsbm-inst: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/instances/>
PREFIX bsbm: <http://www4.wiwiss.fu-berlin.de/bizer/bsbm/v01/vocabulary/>
PREFIX rdfs: <http://www.w3.org/2000/01/rdf-schema#>
PREFIX rdf: <http://www.w3.org/1999/02/22-rdf-syntax-ns#>
PREFIX ele: <http://purl.org/dc/elements/1.1/>
SELECT ?x WHERE { ?x a bsbm:Review }";
        let map = resolve_prefixes(&parse_query(q).unwrap());
        let labels: Vec<_> = map.entries.keys().cloned().collect();
        assert_eq!(labels, ["bsbm-inst", "bsbm", "rdfs", "rdf", "ele"]);
        assert!(map.is_declared(""));
    }

    #[test]
    fn no_prologue_only_implicit_default() {
        let map = resolve_prefixes(&parse_query("SELECT ?x WHERE { ?x a :A }").unwrap());
        assert!(map.is_empty());
        assert!(map.is_declared(""));
        assert!(!map.is_declared("foo"));
    }

    #[test]
    fn duplicate_prefix_last_wins() {
        let q = "PREFIX a: <http://one/> PREFIX a: <http://two/> SELECT ?x WHERE { ?x a a:B }";
        let map = resolve_prefixes(&parse_query(q).unwrap());
        assert_eq!(map.get("a"), Some("http://two/"));
        assert_eq!(map.len(), 1);
    }

    #[test]
    fn strict_mode_rejects() {
        let strict = NamingOptions {
            strict: true,
            ..Default::default()
        };
        assert_eq!(
            pg_name("foo:bar", &PrefixMap::new(), &strict),
            Err(NameError::UndeclaredPrefix("foo".into()))
        );
        assert!(matches!(
            pg_name(":a__b", &PrefixMap::new(), &strict),
            Err(NameError::AmbiguousLocal(_))
        ));
        assert!(pg_name(":a", &PrefixMap::new(), &strict).is_ok());
    }

    #[test]
    fn iri_uses_longest_namespace() {
        let mut map = PrefixMap::new();
        map.insert("", "http://ex.org/");
        map.insert("v", "http://ex.org/vocab/");
        let opts = NamingOptions::default();
        assert_eq!(pg_name_for_iri("http://ex.org/vocab/age", &map, &opts).unwrap().0, "v__age");
        assert_eq!(pg_name_for_iri("http://ex.org/Person", &map, &opts).unwrap().0, "ROOT__Person");
        assert!(pg_name_for_iri("http://other/x", &map, &opts).is_err());
    }

    #[test]
    fn pg_name_parts() {
        let n = PgName("person__age".into());
        assert_eq!(n.parts(), ("person", "age"));
    }
}
