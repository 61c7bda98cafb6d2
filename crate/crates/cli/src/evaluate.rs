//! Differential evaluation of a dataset against a backend.

use crate::dataset::DatasetEntry;
use crate::external::HttpBackend;
use crate::{translate, RunConfig, TranslateOutcome};
use s2c_core::FailureCategory;
use s2c_harness::metrics::{aggregate_metrics, Report};
use s2c_harness::{compare, MatchOutcome};
use s2c_sandbox::{CypherExecutor, SandboxBackend, SparqlExecutor};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};

pub trait Executor: SparqlExecutor + CypherExecutor {}
impl<T: SparqlExecutor + CypherExecutor> Executor for T {}

pub enum Backend {
    /// One `{db_id}.ttl` per database under the directory.
    Sandbox(PathBuf),
    External(HttpBackend),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryResult {
    pub index: usize,
    pub db_id: String,
    /// MATCH, a mismatch kind, a failure category, or SKIPPED.
    pub status: String,
    pub detail: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cypher: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: Report,
    pub entries: Vec<EntryResult>,
}

pub const SKIPPED: &str = "SKIPPED";

struct Graphs<'a> {
    dir: &'a Path,
    config: &'a RunConfig,
    loaded: HashMap<String, Result<SandboxBackend, String>>,
}

impl Graphs<'_> {
    fn get(&mut self, db_id: &str) -> Result<&SandboxBackend, String> {
        let (dir, config) = (self.dir, self.config);
        self.loaded
            .entry(db_id.to_string())
            .or_insert_with(|| {
                let path = dir.join(format!("{db_id}.ttl"));
                let text = std::fs::read_to_string(&path).map_err(|e| format!("no graph at {}: {e}", path.display()))?;
                let store = s2c_sandbox::turtle::load_turtle(&text).map_err(|e| format!("{}: {e}", path.display()))?;
                SandboxBackend::new(store, &config.naming(), &config.explicit_rels)
                    .map_err(|e| format!("{}: {e}", path.display()))
            })
            .as_ref()
            .map_err(Clone::clone)
    }
}

enum Counted {
    Compared(MatchOutcome),
    NotTranslated(FailureCategory),
    Skipped,
}

fn run_entry(index: usize, e: &DatasetEntry, exec: &dyn Executor, config: &RunConfig) -> (EntryResult, Counted) {
    let result = |status: &str, detail: String, cypher: Option<String>| EntryResult {
        index,
        db_id: e.db_id.clone(),
        status: status.to_string(),
        detail,
        cypher,
    };
    let cypher = match translate(&e.sparql, config) {
        TranslateOutcome::Translated(t) => t.cypher.text,
        TranslateOutcome::Syntax(msg) => {
            let cat = FailureCategory::new(s2c_core::FailureKind::Syntax, msg);
            return (result(cat.kind.name(), cat.detail.clone(), None), Counted::NotTranslated(cat));
        }
        TranslateOutcome::Unsupported(cat) => {
            return (result(cat.kind.name(), cat.detail.clone(), None), Counted::NotTranslated(cat))
        }
    };
    let sparql = match exec.eval_sparql(&e.sparql) {
        Ok(t) => t,
        // queries the SPARQL side cannot run have no reference result
        Err(err) => return (result(SKIPPED, format!("SPARQL side failed: {err}"), Some(cypher)), Counted::Skipped),
    };
    let target = exec.eval_cypher(&cypher).map_err(|e| e.to_string());
    let outcome = compare(Ok(&sparql), target.as_ref().map_err(String::as_str));
    (result(outcome.kind.name(), outcome.detail.clone(), Some(cypher)), Counted::Compared(outcome))
}

/// Evaluates every entry. Entries without a graph, or whose SPARQL fails
/// on the backend, are recorded as SKIPPED and left out of the report.
pub fn evaluate(entries: &[DatasetEntry], backend: &Backend, config: &RunConfig) -> Evaluation {
    let mut graphs = match backend {
        Backend::Sandbox(dir) => Some(Graphs {
            dir,
            config,
            loaded: HashMap::new(),
        }),
        Backend::External(_) => None,
    };
    let mut results = Vec::new();
    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for (i, e) in entries.iter().enumerate() {
        let exec: &dyn Executor = match (backend, graphs.as_mut()) {
            (Backend::External(h), _) => h,
            (Backend::Sandbox(_), Some(g)) => match g.get(&e.db_id) {
                Ok(b) => b,
                Err(reason) => {
                    results.push(EntryResult {
                        index: i,
                        db_id: e.db_id.clone(),
                        status: SKIPPED.into(),
                        detail: reason,
                        cypher: None,
                    });
                    continue;
                }
            },
            (Backend::Sandbox(_), None) => unreachable!(),
        };
        let (r, o) = run_entry(i, e, exec, config);
        match o {
            Counted::Compared(outcome) => outcomes.push(outcome),
            Counted::NotTranslated(cat) => failures.push(cat),
            Counted::Skipped => {}
        }
        results.push(r);
    }
    Evaluation {
        report: aggregate_metrics(&outcomes, &failures),
        entries: results,
    }
}
