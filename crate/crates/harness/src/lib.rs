//! Result-equivalence checking between SPARQL and translated Cypher.

pub mod compare;
pub mod differential;
pub mod generator;
pub mod metrics;

pub use compare::{compare, normalize, MatchOutcome, OutcomeKind, FLOAT_TOLERANCE};
pub use metrics::{aggregate_metrics, Layout, Report};
