pub mod backend;
pub mod cypher;
pub mod graph;
pub mod rdf;
pub mod sparql;
pub mod turtle;
pub mod value;

pub use backend::{CypherExecutor, ExecError, SandboxBackend, SparqlExecutor};
pub use value::{ResultTable, Value};
