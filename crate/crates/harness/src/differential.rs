//! Runs generated pairs through both evaluators and the comparator.

use crate::compare::{compare, MatchOutcome, OutcomeKind};
use crate::generator::{generate, Case};
use s2c_core::prefix::NamingOptions;
use s2c_core::{transpile, OptionalPlacement, TranspileOptions};
use s2c_sandbox::{CypherExecutor, SandboxBackend, SparqlExecutor};

#[derive(Debug, Clone)]
pub struct Failure {
    pub case: Case,
    pub cypher: Option<String>,
    pub outcome: MatchOutcome,
}

#[derive(Debug, Clone, Default)]
pub struct Summary {
    pub cases: usize,
    pub transpiled: usize,
    pub matched: usize,
    pub exec: usize,
    pub failures: Vec<Failure>,
}

/// Checks one case. `None` when the query does not transpile.
pub fn check(case: &Case) -> Option<(String, MatchOutcome)> {
    let opts = TranspileOptions {
        placement: OptionalPlacement::AfterWhere,
        ..Default::default()
    };
    let cypher = transpile(&case.sparql, &opts).ok()?.cypher.text;
    let backend = match SandboxBackend::from_turtle(&case.turtle, &NamingOptions::default()) {
        Ok(b) => b,
        Err(e) => {
            let outcome = MatchOutcome {
                kind: OutcomeKind::Exec,
                detail: format!("store: {e}"),
            };
            return Some((cypher, outcome));
        }
    };
    let s = backend.eval_sparql(&case.sparql).map_err(|e| e.to_string());
    let c = backend.eval_cypher(&cypher).map_err(|e| e.to_string());
    let outcome = compare(s.as_ref().map_err(String::as_str), c.as_ref().map_err(String::as_str));
    Some((cypher, outcome))
}

/// Runs seeds `start..start + count`. Cases that do not transpile are
/// counted in `cases` only.
pub fn run(start: u64, count: usize) -> Summary {
    let mut sum = Summary::default();
    for seed in start..start + count as u64 {
        let case = generate(seed);
        sum.cases += 1;
        let Some((cypher, outcome)) = check(&case) else { continue };
        sum.transpiled += 1;
        match outcome.kind {
            OutcomeKind::Match => sum.matched += 1,
            kind => {
                if kind == OutcomeKind::Exec {
                    sum.exec += 1;
                }
                sum.failures.push(Failure {
                    case,
                    cypher: Some(cypher),
                    outcome,
                });
            }
        }
    }
    sum
}
