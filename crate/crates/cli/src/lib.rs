//! Library half of the `s2c` binary: configuration, single-query
//! translation, dataset batches, differential evaluation and reports.

pub mod dataset;
pub mod evaluate;
pub mod external;

use s2c_core::prefix::NamingOptions;
use s2c_core::{transpile, ExplicitRels, FailureCategory, OptionalPlacement, Translation, TranspileOptions};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunConfig {
    pub explicit_rels: ExplicitRels,
    pub optional_placement: OptionalPlacement,
    pub strict_prefixes: bool,
    pub default_prefix_label: String,
    pub output_format: OutputFormat,
    /// Count COUNT(*) projections as unsupported (COUNT_ALL).
    #[serde(default)]
    pub count_all_compat: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            explicit_rels: ExplicitRels::default(),
            optional_placement: OptionalPlacement::default(),
            strict_prefixes: false,
            default_prefix_label: "ROOT".into(),
            output_format: OutputFormat::default(),
            count_all_compat: false,
        }
    }
}

pub fn valid_prefix_label(label: &str) -> bool {
    let mut chars = label.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic()) && chars.all(|c| c.is_ascii_alphanumeric())
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if valid_prefix_label(&self.default_prefix_label) {
            Ok(())
        } else {
            Err(format!("default prefix label '{}' must match [A-Za-z][A-Za-z0-9]*", self.default_prefix_label))
        }
    }

    pub fn transpile_options(&self) -> TranspileOptions {
        TranspileOptions {
            explicit_rels: self.explicit_rels.clone(),
            placement: self.optional_placement,
            naming: NamingOptions {
                default_label: self.default_prefix_label.clone(),
                strict: self.strict_prefixes,
            },
            compat: self.count_all_compat,
        }
    }

    pub fn naming(&self) -> NamingOptions {
        self.transpile_options().naming
    }
}

/// Result of translating one query. Each variant has its own exit code.
#[derive(Debug)]
pub enum TranslateOutcome {
    Translated(Box<Translation>),
    /// Empty input or a SPARQL syntax error.
    Syntax(String),
    Unsupported(FailureCategory),
}

impl TranslateOutcome {
    pub fn exit_code(&self) -> i32 {
        match self {
            TranslateOutcome::Translated(_) => 0,
            TranslateOutcome::Syntax(_) => 1,
            TranslateOutcome::Unsupported(_) => 2,
        }
    }
}

pub fn translate(query: &str, config: &RunConfig) -> TranslateOutcome {
    if query.trim().is_empty() {
        return TranslateOutcome::Syntax("empty input".into());
    }
    match transpile(query, &config.transpile_options()) {
        Ok(t) => TranslateOutcome::Translated(Box::new(t)),
        Err(e) if e.is_syntax() => TranslateOutcome::Syntax(e.to_string()),
        Err(e) => TranslateOutcome::Unsupported(e.category()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use s2c_core::FailureKind;

    #[test]
    fn prefix_labels() {
        assert!(valid_prefix_label("ROOT"));
        assert!(valid_prefix_label("r2"));
        assert!(!valid_prefix_label("2r"));
        assert!(!valid_prefix_label("a_b"));
        assert!(!valid_prefix_label(""));
    }

    #[test]
    fn exit_codes() {
        let c = RunConfig::default();
        assert_eq!(translate("SELECT ?x WHERE { ?x a :A }", &c).exit_code(), 0);
        assert_eq!(translate("  \n", &c).exit_code(), 1);
        assert_eq!(translate("SELECT ?x WHERE { ?x a ", &c).exit_code(), 1);
        let nested = "SELECT ?x WHERE { { SELECT ?x WHERE { ?x a :A } } }";
        match translate(nested, &c) {
            TranslateOutcome::Unsupported(cat) => assert_eq!(cat.kind, FailureKind::Ns2),
            other => panic!("{other:?}"),
        }
    }
}
