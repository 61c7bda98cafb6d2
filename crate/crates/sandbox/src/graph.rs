//! In-memory property graph and the RDF to property-graph materializer.

use crate::rdf::{Literal, Term, TripleStore};
use indexmap::IndexMap;
use s2c_core::prefix::{pg_name_for_iri, NameError, NamingOptions, PrefixMap, RDF_TYPE};
use s2c_core::ExplicitRels;
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgNode {
    pub uri: String,
    pub labels: BTreeSet<String>,
    pub properties: IndexMap<String, Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgEdge {
    pub src: usize,
    pub ty: String,
    pub dst: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PropertyGraph {
    pub nodes: Vec<PgNode>,
    pub edges: Vec<PgEdge>,
    index: HashMap<String, usize>,
}

impl PropertyGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of the node with `uri`, creating it if needed.
    pub fn node_id(&mut self, uri: &str) -> usize {
        if let Some(id) = self.index.get(uri) {
            return *id;
        }
        let id = self.nodes.len();
        self.nodes.push(PgNode {
            uri: uri.to_string(),
            labels: BTreeSet::new(),
            properties: IndexMap::new(),
        });
        self.index.insert(uri.to_string(), id);
        id
    }

    pub fn find(&self, uri: &str) -> Option<usize> {
        self.index.get(uri).copied()
    }

    pub fn add_edge(&mut self, src: usize, ty: &str, dst: usize) {
        let e = PgEdge {
            src,
            ty: ty.to_string(),
            dst,
        };
        if !self.edges.contains(&e) {
            self.edges.push(e);
        }
    }
}

/// Converts a triple store into a property graph:
/// type triples become labels, literal objects become properties and IRI
/// objects become edges. Names go through the same mapping as the
/// transpiler, using `prefixes` (normally the store's own declarations).
///
/// A property with several literal values keeps the smallest one in term
/// order, since a node property holds a single value.
pub fn materialize(
    store: &TripleStore,
    prefixes: &PrefixMap,
    naming: &NamingOptions,
    _re: &ExplicitRels,
) -> Result<PropertyGraph, NameError> {
    let mut g = PropertyGraph::new();
    let name = |iri: &str| pg_name_for_iri(iri, prefixes, naming).map(|n| n.0);
    for (s, p, o) in store.iter() {
        let (Term::Iri(s), Term::Iri(p)) = (s, p) else { continue };
        let sid = g.node_id(s);
        match o {
            Term::Iri(o) if p == RDF_TYPE => {
                let label = name(o)?;
                g.nodes[sid].labels.insert(label);
            }
            Term::Iri(o) => {
                let ty = name(p)?;
                let oid = g.node_id(o);
                g.add_edge(sid, &ty, oid);
            }
            Term::Lit(l) => {
                let key = name(p)?;
                g.nodes[sid].properties.entry(key).or_insert_with(|| l.clone());
            }
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::turtle::load_turtle;

    fn graph(ttl: &str) -> PropertyGraph {
        let store = load_turtle(ttl).unwrap();
        materialize(&store, &store.prefixes, &NamingOptions::default(), &ExplicitRels::default()).unwrap()
    }

    #[test]
    fn type_becomes_label() {
        let g = graph("@prefix : <http://example.org/> . :e1 a :Person .");
        assert_eq!(g.nodes.len(), 1);
        assert!(g.nodes[0].labels.contains("ROOT__Person"));
    }

    #[test]
    fn literal_becomes_property() {
        let g = graph("@prefix : <http://example.org/> . :e1 :name \"Emma\" .");
        assert_eq!(g.nodes[0].properties["ROOT__name"], Literal::Str("Emma".into()));
    }

    #[test]
    fn iri_object_becomes_edge() {
        let g = graph("@prefix : <http://example.org/> . :e1 :knows :e2 .");
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges, [PgEdge { src: 0, ty: "ROOT__knows".into(), dst: 1 }]);
    }

    #[test]
    fn named_prefix_is_kept() {
        let g = graph("@prefix bsbm-inst: <http://b/i/> . @prefix bsbm: <http://b/v/> . bsbm-inst:p1 a bsbm-inst:ProductType1 ; bsbm:n 3 .");
        assert!(g.nodes[0].labels.contains("bsbm_inst__ProductType1"));
        assert!(g.nodes[0].properties.contains_key("bsbm__n"));
    }
}
