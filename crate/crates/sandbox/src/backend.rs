//! Executor traits shared by the in-memory sandbox and external connectors.

use crate::cypher::{eval_cypher, CypherEvalError};
use crate::graph::{materialize, PropertyGraph};
use crate::rdf::TripleStore;
use crate::sparql::{eval_sparql, EvalError};
use crate::turtle::{load_turtle, TurtleSyntaxError};
use crate::value::ResultTable;
use s2c_core::prefix::{NameError, NamingOptions};
use s2c_core::ExplicitRels;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("SPARQL query rejected: {0}")]
    SparqlSyntax(String),
    #[error(transparent)]
    Sparql(#[from] EvalError),
    #[error(transparent)]
    Cypher(#[from] CypherEvalError),
    #[error("backend unavailable: {0}")]
    Transport(String),
}

pub trait SparqlExecutor {
    fn eval_sparql(&self, query: &str) -> Result<ResultTable, ExecError>;
}

pub trait CypherExecutor {
    fn eval_cypher(&self, query: &str) -> Result<ResultTable, ExecError>;
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error(transparent)]
    Turtle(#[from] TurtleSyntaxError),
    #[error("cannot name graph element: {0}")]
    Naming(#[from] NameError),
}

/// A triple store and the property graph materialized from it.
#[derive(Debug, Clone)]
pub struct SandboxBackend {
    pub store: TripleStore,
    pub graph: PropertyGraph,
}

impl SandboxBackend {
    pub fn new(store: TripleStore, naming: &NamingOptions, re: &ExplicitRels) -> Result<Self, NameError> {
        let graph = materialize(&store, &store.prefixes, naming, re)?;
        Ok(Self { store, graph })
    }

    pub fn from_turtle(text: &str, naming: &NamingOptions) -> Result<Self, LoadError> {
        let store = load_turtle(text)?;
        Ok(Self::new(store, naming, &ExplicitRels::default())?)
    }
}

impl SparqlExecutor for SandboxBackend {
    fn eval_sparql(&self, query: &str) -> Result<ResultTable, ExecError> {
        let tree = s2c_core::parser::parse_query(query).map_err(|e| ExecError::SparqlSyntax(e.to_string()))?;
        Ok(eval_sparql(&self.store, &tree)?)
    }
}

impl CypherExecutor for SandboxBackend {
    fn eval_cypher(&self, query: &str) -> Result<ResultTable, ExecError> {
        Ok(eval_cypher(&self.graph, query)?)
    }
}
