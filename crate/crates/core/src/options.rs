use crate::lexer::{tokenize, TokenKind};
use crate::prefix::NamingOptions;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Where OPTIONAL MATCH lines go relative to the first WHERE.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OptionalPlacement {
    #[default]
    BeforeWhere,
    AfterWhere,
}

impl fmt::Display for OptionalPlacement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptionalPlacement::BeforeWhere => "BEFORE_WHERE",
            OptionalPlacement::AfterWhere => "AFTER_WHERE",
        })
    }
}

/// Predicates that must always be translated as relationships.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplicitRels {
    pub predicates: Vec<String>,
}

impl ExplicitRels {
    pub fn new<I, S>(predicates: I) -> Result<Self, String>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut out = Vec::new();
        for p in predicates {
            let p: String = p.into();
            let p = p.trim().to_string();
            let ok = matches!(tokenize(&p).as_deref(), Ok([t, eof])
                if t.kind == TokenKind::PrefixedName && eof.kind == TokenKind::Eof && !t.text.ends_with(':'));
            if !ok {
                return Err(format!("'{p}' is not a prefixed name"));
            }
            if !out.contains(&p) {
                out.push(p);
            }
        }
        Ok(ExplicitRels { predicates: out })
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }
}

impl FromStr for ExplicitRels {
    type Err = String;

    /// Comma-separated list, e.g. `:knows,foaf:member`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s.split(',').filter(|p| !p.trim().is_empty()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranspileOptions {
    pub explicit_rels: ExplicitRels,
    pub placement: OptionalPlacement,
    pub naming: NamingOptions,
    /// Report COUNT(*) projections as COUNT_ALL, as the older transpiler did.
    pub compat: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comma_list() {
        let re: ExplicitRels = ":knows, foaf:member".parse().unwrap();
        assert_eq!(re.predicates, [":knows", "foaf:member"]);
        assert!("".parse::<ExplicitRels>().unwrap().is_empty());
    }

    #[test]
    fn rejects_non_prefixed() {
        assert!("?x".parse::<ExplicitRels>().is_err());
        assert!("<http://x>".parse::<ExplicitRels>().is_err());
        assert!("a b".parse::<ExplicitRels>().is_err());
    }
}
