//! Loader for a Turtle subset: `@prefix`/`PREFIX`, triples with `;` and `,`
//! abbreviations, `a`, and plain, typed or numeric literals.

use crate::rdf::{parse_decimal, Literal, Term, TripleStore};
use s2c_core::prefix::RDF_TYPE;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("turtle syntax error at {line}:{col}: {message}")]
pub struct TurtleSyntaxError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Iri(String),
    PName(String),
    A,
    Str(String),
    /// `^^` between a string and its datatype.
    Carets,
    Num(String),
    Bool(bool),
    Prefix,
    Punct(char),
}

struct Scanner {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | ':')
}

impl Scanner {
    fn err(&self, message: impl Into<String>) -> TurtleSyntaxError {
        TurtleSyntaxError {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn peek(&self, k: usize) -> Option<char> {
        self.chars.get(self.i + k).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek(0)?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek(0) {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while self.bump().is_some_and(|c| c != '\n') {}
            } else {
                break;
            }
        }
    }

    /// Reads a run of name characters; a trailing `.` is left in the input
    /// because it terminates the statement.
    fn word(&mut self) -> String {
        let start = self.i;
        let mut end = start;
        while self.chars.get(end).is_some_and(|c| is_name_char(*c)) {
            end += 1;
        }
        while end > start && self.chars[end - 1] == '.' {
            end -= 1;
        }
        let w: String = self.chars[start..end].iter().collect();
        for _ in start..end {
            self.bump();
        }
        w
    }

    fn string(&mut self, q: char) -> Result<String, TurtleSyntaxError> {
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return Err(self.err("unterminated string")),
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('r') => out.push('\r'),
                    Some(c) => out.push(c),
                    None => return Err(self.err("unterminated string")),
                },
                Some(c) if c == q => return Ok(out),
                Some(c) => out.push(c),
            }
        }
    }

    fn tokens(mut self) -> Result<Vec<(Tok, usize, usize)>, TurtleSyntaxError> {
        let mut out = Vec::new();
        loop {
            self.skip_ws();
            let (line, col) = (self.line, self.col);
            let Some(c) = self.peek(0) else { break };
            let tok = match c {
                '<' => {
                    self.bump();
                    let mut iri = String::new();
                    loop {
                        match self.bump() {
                            Some('>') => break,
                            Some(c) if !c.is_whitespace() => iri.push(c),
                            _ => return Err(self.err("unterminated IRI")),
                        }
                    }
                    Tok::Iri(iri)
                }
                '"' | '\'' => {
                    self.bump();
                    let s = self.string(c)?;
                    if self.peek(0) == Some('@') {
                        self.bump();
                        self.word();
                    }
                    Tok::Str(s)
                }
                '^' if self.peek(1) == Some('^') => {
                    self.bump();
                    self.bump();
                    Tok::Carets
                }
                '@' => {
                    self.bump();
                    let w = self.word();
                    if w != "prefix" {
                        return Err(self.err(format!("unsupported directive @{w}")));
                    }
                    Tok::Prefix
                }
                '.' if !self.peek(1).is_some_and(|d| d.is_ascii_digit()) => {
                    self.bump();
                    Tok::Punct('.')
                }
                ';' | ',' => {
                    self.bump();
                    Tok::Punct(c)
                }
                '[' | ']' | '(' | ')' | '_' if c != '_' || self.peek(1) == Some(':') => {
                    return Err(self.err("blank nodes and collections are not supported"))
                }
                c if c.is_ascii_digit() || matches!(c, '-' | '+' | '.') => {
                    let start = self.i;
                    let mut end = start + 1;
                    while self
                        .chars
                        .get(end)
                        .is_some_and(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | 'E' | '-' | '+'))
                    {
                        end += 1;
                    }
                    while end > start + 1 && self.chars[end - 1] == '.' {
                        end -= 1;
                    }
                    let n: String = self.chars[start..end].iter().collect();
                    for _ in start..end {
                        self.bump();
                    }
                    Tok::Num(n)
                }
                _ => {
                    let w = self.word();
                    match w.as_str() {
                        "" => return Err(self.err(format!("unexpected character '{c}'"))),
                        "a" => Tok::A,
                        "true" => Tok::Bool(true),
                        "false" => Tok::Bool(false),
                        w if w.eq_ignore_ascii_case("PREFIX") => Tok::Prefix,
                        w if w.contains(':') => Tok::PName(w.to_string()),
                        w => return Err(self.err(format!("unexpected word '{w}'"))),
                    }
                }
            };
            out.push((tok, line, col));
        }
        Ok(out)
    }
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
    store: TripleStore,
}

impl Parser {
    fn err(&self, message: impl Into<String>) -> TurtleSyntaxError {
        let (line, col) = self
            .toks
            .get(self.pos)
            .or(self.toks.last())
            .map(|t| (t.1, t.2))
            .unwrap_or((1, 1));
        TurtleSyntaxError {
            line,
            col,
            message: message.into(),
        }
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.0.clone());
        self.pos += 1;
        t
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn expect_punct(&mut self, p: char) -> Result<(), TurtleSyntaxError> {
        match self.next() {
            Some(Tok::Punct(c)) if c == p => Ok(()),
            _ => {
                self.pos -= 1;
                Err(self.err(format!("expected '{p}'")))
            }
        }
    }

    fn expand(&self, pname: &str) -> Result<String, TurtleSyntaxError> {
        self.store
            .prefixes
            .expand(pname)
            .ok_or_else(|| self.err(format!("undeclared prefix in {pname}")))
    }

    fn iri(&mut self) -> Result<String, TurtleSyntaxError> {
        match self.next() {
            Some(Tok::Iri(i)) => Ok(i),
            Some(Tok::PName(p)) => {
                self.pos -= 1;
                let r = self.expand(&p);
                self.pos += 1;
                r
            }
            _ => {
                self.pos -= 1;
                Err(self.err("expected an IRI"))
            }
        }
    }

    fn object(&mut self) -> Result<Term, TurtleSyntaxError> {
        match self.peek().cloned() {
            Some(Tok::Iri(_) | Tok::PName(_)) => Ok(Term::Iri(self.iri()?)),
            Some(Tok::Str(s)) => {
                self.pos += 1;
                let dt = if self.peek() == Some(&Tok::Carets) {
                    self.pos += 1;
                    Some(self.iri()?)
                } else {
                    None
                };
                Literal::typed(&s, dt.as_deref()).map(Term::Lit).map_err(|m| self.err(m))
            }
            Some(Tok::Num(n)) => {
                self.pos += 1;
                let lit = if n.contains(['.', 'e', 'E']) {
                    parse_decimal(&n).map(Literal::Dec)
                } else {
                    n.trim_start_matches('+').parse().ok().map(Literal::Int)
                };
                lit.map(Term::Lit).ok_or_else(|| self.err(format!("bad number {n}")))
            }
            Some(Tok::Bool(b)) => {
                self.pos += 1;
                Ok(Term::Lit(Literal::Bool(b)))
            }
            _ => Err(self.err("expected an object")),
        }
    }

    fn statement(&mut self) -> Result<(), TurtleSyntaxError> {
        if self.peek() == Some(&Tok::Prefix) {
            self.pos += 1;
            let label = match self.next() {
                Some(Tok::PName(p)) if p.ends_with(':') => p.trim_end_matches(':').to_string(),
                _ => {
                    self.pos -= 1;
                    return Err(self.err("expected prefix label"));
                }
            };
            let iri = match self.next() {
                Some(Tok::Iri(i)) => i,
                _ => {
                    self.pos -= 1;
                    return Err(self.err("expected namespace IRI"));
                }
            };
            self.store.prefixes.insert(&label, &iri);
            if self.peek() == Some(&Tok::Punct('.')) {
                self.pos += 1;
            }
            return Ok(());
        }
        let subject = match self.peek() {
            Some(Tok::Iri(_) | Tok::PName(_)) => self.iri()?,
            _ => return Err(self.err("expected a subject IRI")),
        };
        loop {
            let predicate = match self.peek() {
                Some(Tok::A) => {
                    self.pos += 1;
                    RDF_TYPE.to_string()
                }
                _ => self.iri()?,
            };
            loop {
                let o = self.object()?;
                self.store
                    .insert(Term::Iri(subject.clone()), Term::Iri(predicate.clone()), o);
                if self.peek() == Some(&Tok::Punct(',')) {
                    self.pos += 1;
                } else {
                    break;
                }
            }
            if self.peek() == Some(&Tok::Punct(';')) {
                self.pos += 1;
                if self.peek() == Some(&Tok::Punct('.')) {
                    break;
                }
            } else {
                break;
            }
        }
        self.expect_punct('.')
    }
}

/// Parses Turtle text into a triple store. Language tags are dropped and
/// unknown datatypes keep their lexical form as a string.
pub fn load_turtle(text: &str) -> Result<TripleStore, TurtleSyntaxError> {
    let toks = Scanner {
        chars: text.chars().collect(),
        i: 0,
        line: 1,
        col: 1,
    }
    .tokens()?;
    let mut p = Parser {
        toks,
        pos: 0,
        store: TripleStore::new(),
    };
    while p.pos < p.toks.len() {
        p.statement()?;
    }
    Ok(p.store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rust_decimal::Decimal;

    #[test]
    fn single_type_triple() {
        let s = load_turtle("@prefix : <http://example.org/> .\n:e a :Person .").unwrap();
        assert_eq!(s.len(), 1);
        let (_, p, o) = s.iter().next().unwrap();
        assert_eq!(*p, Term::iri(RDF_TYPE));
        assert_eq!(*o, Term::iri("http://example.org/Person"));
    }

    #[test]
    fn semicolon_and_comma_abbreviations() {
        let s = load_turtle(
            "PREFIX ex: <http://ex/>\nex:e1 ex:name \"Emma\" ; ex:age 30 ; ex:knows ex:e2, ex:e3 .",
        )
        .unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.prefixes.get("ex"), Some("http://ex/"));
    }

    #[test]
    fn literal_types() {
        let s = load_turtle(
            "@prefix : <http://x/> . @prefix xsd: <http://www.w3.org/2001/XMLSchema#> .\n\
             :e :i 7 ; :d 2.5 ; :b true ; :t \"3\"^^xsd:integer ; :l 'chat'@fr ; :s \"a.b\" .",
        )
        .unwrap();
        let objs: Vec<_> = s.iter().map(|t| t.2.clone()).collect();
        assert!(objs.contains(&Term::Lit(Literal::Int(7))));
        assert!(objs.contains(&Term::Lit(Literal::Int(3))));
        assert!(objs.contains(&Term::Lit(Literal::Dec(Decimal::new(25, 1)))));
        assert!(objs.contains(&Term::Lit(Literal::Bool(true))));
        assert!(objs.contains(&Term::Lit(Literal::Str("chat".into()))));
        assert!(objs.contains(&Term::Lit(Literal::Str("a.b".into()))));
    }

    #[test]
    fn statement_dot_after_number() {
        let s = load_turtle("@prefix : <http://x/> .\n:e :n 5.\n:f :n 6 .").unwrap();
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn malformed_input_is_an_error() {
        assert!(load_turtle(":e a :P .").is_err());
        assert!(load_turtle("@prefix : <http://x/> . :e :p").is_err());
        assert!(load_turtle("@prefix : <http://x/> . :e :p 'open .").is_err());
        assert!(load_turtle("@prefix : <http://x/> . _:b :p 1 .").is_err());
    }
}
