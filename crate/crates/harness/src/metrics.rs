//! Aggregation of per-query outcomes into accuracy metrics.

use crate::compare::{MatchOutcome, OutcomeKind};
use indexmap::IndexMap;
use s2c_core::{FailureCategory, FailureKind};
use serde::{Deserialize, Serialize};

/// N is `n`, C∀ is `parsed`, M is `matched`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub n: usize,
    pub parsed: usize,
    pub matched: usize,
    /// Parse failure categories, then mismatch categories; zero counts kept.
    pub errors: IndexMap<String, usize>,
    /// α = M / C∀
    pub exec_acc: Option<f64>,
    /// τ = M / N
    pub total_acc: Option<f64>,
    /// 𝓔 = (N − C∀) / N
    pub parse_err_rate: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl Report {
    pub fn error_count(&self, name: &str) -> usize {
        self.errors.get(name).copied().unwrap_or(0)
    }

    pub fn mismatches(&self) -> usize {
        OutcomeKind::MISMATCHES.iter().map(|k| self.error_count(k.name())).sum()
    }
}

/// Builds a report from the outcomes of parsed queries and the categories
/// of queries that failed to translate. N is the sum of both.
pub fn aggregate_metrics(outcomes: &[MatchOutcome], parse_failures: &[FailureCategory]) -> Report {
    let mut errors = IndexMap::new();
    for k in FailureKind::ALL {
        errors.insert(k.name().to_string(), 0);
    }
    for k in OutcomeKind::MISMATCHES {
        errors.insert(k.name().to_string(), 0);
    }
    for f in parse_failures {
        *errors.entry(f.kind.name().to_string()).or_default() += 1;
    }
    let mut matched = 0;
    for o in outcomes {
        match o.kind {
            OutcomeKind::Match => matched += 1,
            k => *errors.entry(k.name().to_string()).or_default() += 1,
        }
    }
    from_counts(outcomes.len() + parse_failures.len(), outcomes.len(), matched, errors)
}

/// Builds a report from bare counts, filling in the ratios.
pub fn from_counts(n: usize, parsed: usize, matched: usize, errors: IndexMap<String, usize>) -> Report {
    Report {
        n,
        parsed,
        matched,
        errors,
        exec_acc: ratio(matched, parsed),
        total_acc: ratio(matched, n),
        parse_err_rate: ratio(n - parsed, n),
    }
}

pub fn percent(r: Option<f64>) -> String {
    match r {
        Some(v) => format!("{:.1}%", v * 100.0),
        None => "-".to_string(),
    }
}

/// Which rows the text and CSV renderings carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// Translation outcome only: N, the failure categories, the error rate
    /// and the parsed count.
    Parse,
    /// Also the execution counts and the two accuracies.
    Full,
}

fn layout(report: &Report, which: Layout) -> Vec<(String, String)> {
    let mut rows = vec![("N".to_string(), report.n.to_string())];
    for k in FailureKind::ALL {
        rows.push((k.name().to_string(), report.error_count(k.name()).to_string()));
    }
    rows.push(("err rate".into(), percent(report.parse_err_rate)));
    rows.push(("parsed".into(), report.parsed.to_string()));
    if which == Layout::Parse {
        return rows;
    }
    rows.push(("exec match".into(), report.matched.to_string()));
    for k in OutcomeKind::MISMATCHES {
        rows.push((format!("err ({})", k.name()), report.error_count(k.name()).to_string()));
    }
    rows.push(("exec acc".into(), percent(report.exec_acc)));
    rows.push(("total acc".into(), percent(report.total_acc)));
    rows
}

fn row_labels(which: Layout) -> Vec<String> {
    layout(&from_counts(0, 0, 0, IndexMap::new()), which).into_iter().map(|(l, _)| l).collect()
}

/// One row per metric, one column per report.
pub fn to_csv(reports: &[(&str, &Report)], which: Layout) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["metric"];
    header.extend(reports.iter().map(|(name, _)| *name));
    w.write_record(&header)?;
    let columns: Vec<Vec<(String, String)>> = reports.iter().map(|(_, r)| layout(r, which)).collect();
    for (i, label) in row_labels(which).into_iter().enumerate() {
        let mut rec = vec![label];
        rec.extend(columns.iter().map(|c| c[i].1.clone()));
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Aligned text rendering of the same layout.
pub fn to_text(reports: &[(&str, &Report)], which: Layout) -> String {
    let columns: Vec<Vec<(String, String)>> = reports.iter().map(|(_, r)| layout(r, which)).collect();
    let labels = row_labels(which);
    let label_w = labels.iter().map(String::len).max().unwrap_or(0);
    let widths: Vec<usize> = reports
        .iter()
        .enumerate()
        .map(|(j, (name, _))| columns[j].iter().map(|(_, v)| v.len()).max().unwrap_or(0).max(name.len()))
        .collect();
    let mut out = format!("{:>label_w$}", "");
    for (j, (name, _)) in reports.iter().enumerate() {
        out.push_str(&format!(" | {:>w$}", name, w = widths[j]));
    }
    out.push('\n');
    for (i, label) in labels.iter().enumerate() {
        out.push_str(&format!("{label:>label_w$}"));
        for (j, c) in columns.iter().enumerate() {
            out.push_str(&format!(" | {:>w$}", c[i].1, w = widths[j]));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_has_unset_ratios() {
        let r = aggregate_metrics(&[], &[]);
        assert_eq!(r.n, 0);
        assert_eq!(r.exec_acc, None);
        assert_eq!(r.total_acc, None);
        assert_eq!(r.parse_err_rate, None);
    }

    #[test]
    fn csv_has_one_row_per_metric() {
        let r = from_counts(42, 42, 41, IndexMap::new());
        let csv = to_csv(&[("BSBM Lite", &r)], Layout::Full).unwrap();
        assert_eq!(csv.lines().count(), row_labels(Layout::Full).len() + 1);
        assert!(csv.contains("exec acc,97.6%"));
    }

    #[test]
    fn text_layout_aligns_columns() {
        let r = from_counts(10, 8, 6, IndexMap::new());
        let text = to_text(&[("a", &r), ("b", &r)], Layout::Full);
        assert!(text.lines().all(|l| l.matches(" | ").count() == 2));
    }

    #[test]
    fn parse_layout_stops_at_parsed() {
        let r = from_counts(10, 8, 6, IndexMap::new());
        let text = to_text(&[("a", &r)], Layout::Parse);
        let last = text.lines().last().unwrap();
        assert!(last.trim_start().starts_with("parsed") && last.ends_with(" 8"), "{text}");
        assert!(!text.contains("exec acc"));
    }
}
