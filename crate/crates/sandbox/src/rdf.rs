use crate::value::Value;
use rust_decimal::Decimal;
use s2c_core::prefix::PrefixMap;
use std::collections::BTreeSet;

pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Literal {
    Str(String),
    Int(i64),
    Dec(Decimal),
    Bool(bool),
}

impl Literal {
    /// Builds a literal from its lexical form and optional datatype IRI.
    /// Unknown datatypes keep the lexical form as a string.
    pub fn typed(lexical: &str, datatype: Option<&str>) -> Result<Literal, String> {
        let local = datatype.and_then(|d| d.strip_prefix(XSD));
        let bad = || format!("'{lexical}' is not a valid {}", datatype.unwrap_or("literal"));
        Ok(match local {
            Some("integer" | "int" | "long" | "short" | "byte" | "nonNegativeInteger" | "positiveInteger"
            | "negativeInteger" | "nonPositiveInteger" | "unsignedInt" | "unsignedLong") => {
                Literal::Int(lexical.trim().parse().map_err(|_| bad())?)
            }
            Some("decimal" | "double" | "float") => Literal::Dec(parse_decimal(lexical).ok_or_else(bad)?),
            Some("boolean") => match lexical.trim() {
                "true" | "1" => Literal::Bool(true),
                "false" | "0" => Literal::Bool(false),
                _ => return Err(bad()),
            },
            _ => Literal::Str(lexical.to_string()),
        })
    }

    pub fn to_value(&self) -> Value {
        match self {
            Literal::Str(s) => Value::Str(s.clone()),
            Literal::Int(i) => Value::Int(*i),
            Literal::Dec(d) => Value::Dec(*d),
            Literal::Bool(b) => Value::Bool(*b),
        }
    }
}

/// Parses plain and scientific decimal notation.
pub fn parse_decimal(text: &str) -> Option<Decimal> {
    let t = text.trim();
    if t.contains(['e', 'E']) {
        Decimal::from_scientific(t).ok()
    } else {
        t.parse().ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Iri(String),
    Lit(Literal),
}

impl Term {
    pub fn iri(s: &str) -> Term {
        Term::Iri(s.to_string())
    }

    pub fn to_value(&self) -> Value {
        match self {
            Term::Iri(i) => Value::Uri(i.clone()),
            Term::Lit(l) => l.to_value(),
        }
    }
}

pub type Triple = (Term, Term, Term);

/// A set of triples plus the prefixes declared by its source.
#[derive(Debug, Clone, Default)]
pub struct TripleStore {
    pub triples: BTreeSet<Triple>,
    pub prefixes: PrefixMap,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when the triple was already present.
    pub fn insert(&mut self, s: Term, p: Term, o: Term) -> bool {
        self.triples.insert((s, p, o))
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }
}
