//! SPARQL to Cypher translation: parsing, AST construction, Cypher emission
//! and classification of unsupported queries.

pub mod ast;
pub mod classifier;
pub mod emitter;
pub mod error;
pub mod lexer;
pub mod options;
pub mod parse_tree;
pub mod parser;
pub mod prefix;
pub mod visitor;

pub use ast::Ast;
pub use classifier::{FailureCategory, FailureKind};
pub use emitter::{ClauseKind, CypherQuery};
pub use error::TranspileError;
pub use options::{ExplicitRels, OptionalPlacement, TranspileOptions};

use parse_tree::ParseTree;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Translation {
    pub ast: Ast,
    pub cypher: CypherQuery,
}

/// Parses `text` and translates it. Errors carry a taxonomy category via
/// [`TranspileError::category`].
pub fn transpile(text: &str, opts: &TranspileOptions) -> Result<Translation, TranspileError> {
    let tree = parser::parse_query(text)?;
    transpile_tree(&tree, opts)
}

pub fn transpile_tree(tree: &ParseTree, opts: &TranspileOptions) -> Result<Translation, TranspileError> {
    let ast = visitor::build_ast(tree, opts)?;
    let cypher = emitter::emit(&ast, opts.placement)?;
    Ok(Translation { ast, cypher })
}
