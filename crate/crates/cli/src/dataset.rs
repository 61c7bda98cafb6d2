//! Dataset entries in the Spider4SSC layout and batch translation.

use crate::{translate, RunConfig, TranslateOutcome};
use indexmap::IndexMap;
use s2c_core::emitter::normalize_whitespace;
use s2c_core::FailureCategory;
use s2c_harness::metrics::{aggregate_metrics, from_counts, Report};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub db_id: String,
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sql: Option<String>,
    pub sparql: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cypher: Option<String>,
    /// Carried through untouched.
    #[serde(default)]
    pub namespaces: Vec<String>,
    /// Fields this tool does not know about, kept in input order.
    #[serde(flatten)]
    pub extra: IndexMap<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    #[serde(flatten)]
    pub entry: DatasetEntry,
    /// `OK` or the failure category name.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status_detail: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetEntry>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| DatasetError::Json {
        path: path.display().to_string(),
        source,
    })
}

/// Translates one entry. On success the translation replaces `cypher`
/// unless the existing text differs only in whitespace. On failure the
/// entry is left as it was.
pub fn batch_entry(entry: &DatasetEntry, config: &RunConfig) -> (BatchEntry, Option<FailureCategory>) {
    let mut out = entry.clone();
    let (status, detail, failure) = match translate(&entry.sparql, config) {
        TranslateOutcome::Translated(t) => {
            let same = entry
                .cypher
                .as_deref()
                .is_some_and(|c| normalize_whitespace(c) == normalize_whitespace(&t.cypher.text));
            if !same {
                out.cypher = Some(t.cypher.text);
            }
            ("OK".to_string(), None, None)
        }
        TranslateOutcome::Syntax(msg) => {
            let cat = FailureCategory::new(s2c_core::FailureKind::Syntax, msg.clone());
            (cat.kind.name().to_string(), Some(msg), Some(cat))
        }
        TranslateOutcome::Unsupported(cat) => (cat.kind.name().to_string(), Some(cat.detail.clone()), Some(cat)),
    };
    let batch = BatchEntry {
        entry: out,
        status,
        status_detail: detail,
    };
    (batch, failure)
}

/// Translates every entry; a failing entry never affects the others.
/// The report has `parsed` set and no execution counts.
pub fn batch(entries: &[DatasetEntry], config: &RunConfig) -> (Vec<BatchEntry>, Report) {
    let mut out = Vec::with_capacity(entries.len());
    let mut failures = Vec::new();
    for e in entries {
        let (b, f) = batch_entry(e, config);
        out.push(b);
        failures.extend(f);
    }
    let errors = aggregate_metrics(&[], &failures).errors;
    let mut report = from_counts(entries.len(), entries.len() - failures.len(), 0, errors);
    // nothing was executed, so accuracies stay unset
    report.exec_acc = None;
    report.total_acc = None;
    (out, report)
}
