//! Tokenizer for the supported SPARQL 1.1 subset.
//!
//! Tokens keep their byte offset into the source, so the original text can be
//! rebuilt from the token stream plus the skipped whitespace and comments.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenKind {
    Keyword,
    Iri,
    PrefixedName,
    Variable,
    LiteralString,
    LiteralNumber,
    Punct,
    Operator,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TokenKind::Keyword => "keyword",
            TokenKind::Iri => "iri",
            TokenKind::PrefixedName => "prefixed-name",
            TokenKind::Variable => "variable",
            TokenKind::LiteralString => "literal-string",
            TokenKind::LiteralNumber => "literal-number",
            TokenKind::Punct => "punct",
            TokenKind::Operator => "operator",
            TokenKind::Eof => "EOF",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-based line.
    pub line: usize,
    /// 1-based column, counted in characters.
    pub col: usize,
    /// Byte offset of the first character.
    pub offset: usize,
}

impl Token {
    /// Case-insensitive keyword test.
    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text.eq_ignore_ascii_case(kw)
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punct && self.text == p
    }

    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Operator && self.text == op
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("unterminated string literal starting at {line}:{col}")]
    UnterminatedString { line: usize, col: usize },
    #[error("illegal character {ch:?} at {line}:{col}")]
    IllegalCharacter { ch: char, line: usize, col: usize },
}

impl LexError {
    pub fn position(&self) -> (usize, usize) {
        match *self {
            LexError::UnterminatedString { line, col } => (line, col),
            LexError::IllegalCharacter { line, col, .. } => (line, col),
        }
    }
}

struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let ch = self.peek()?;
        self.pos += ch.len_utf8();
        if ch == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(ch)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }
}

fn is_name_start(ch: char) -> bool {
    ch.is_alphabetic() || ch == '_'
}

fn is_name_char(ch: char) -> bool {
    ch.is_alphanumeric() || ch == '_' || ch == '-' || ch == '\u{00B7}'
}

/// Splits SPARQL text into tokens. The last token is always [`TokenKind::Eof`].
pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor {
        src: text,
        pos: 0,
        line: 1,
        col: 1,
    };
    let mut tokens = Vec::new();

    loop {
        // whitespace and comments
        while let Some(ch) = cur.peek() {
            if ch.is_whitespace() {
                cur.bump();
            } else if ch == '#' {
                while let Some(c) = cur.peek() {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
            } else {
                break;
            }
        }

        let (start, line, col) = (cur.pos, cur.line, cur.col);
        let Some(ch) = cur.peek() else {
            tokens.push(Token {
                kind: TokenKind::Eof,
                text: String::new(),
                line,
                col,
                offset: start,
            });
            return Ok(tokens);
        };

        let kind = match ch {
            '?' | '$' if cur.peek_at(1).is_some_and(|c| is_name_start(c) || c.is_ascii_digit()) => {
                cur.bump();
                while cur.peek().is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '\u{00B7}') {
                    cur.bump();
                }
                TokenKind::Variable
            }
            '<' if iri_ref_len(cur.rest()).is_some() => {
                let len = iri_ref_len(cur.rest()).unwrap_or(0);
                let end = cur.pos + len;
                while cur.pos < end {
                    cur.bump();
                }
                TokenKind::Iri
            }
            '"' | '\'' => {
                lex_string(&mut cur, ch, line, col)?;
                TokenKind::LiteralString
            }
            c if c.is_ascii_digit() || (c == '.' && cur.peek_at(1).is_some_and(|d| d.is_ascii_digit())) => {
                lex_number(&mut cur);
                TokenKind::LiteralNumber
            }
            c if is_name_start(c) || c == ':' => lex_name(&mut cur),
            '{' | '}' | '(' | ')' | '.' | ',' | ';' | '[' | ']' => {
                cur.bump();
                TokenKind::Punct
            }
            '&' | '|' | '!' | '=' | '<' | '>' | '^' | '+' | '-' | '*' | '/' | '?' => {
                let two: String = cur.rest().chars().take(2).collect();
                let len = match two.as_str() {
                    "&&" | "||" | "!=" | "<=" | ">=" | "^^" => 2,
                    _ if ch == '&' => {
                        return Err(LexError::IllegalCharacter { ch, line, col });
                    }
                    _ => 1,
                };
                for _ in 0..len {
                    cur.bump();
                }
                TokenKind::Operator
            }
            other => {
                return Err(LexError::IllegalCharacter {
                    ch: other,
                    line,
                    col,
                })
            }
        };

        tokens.push(Token {
            kind,
            text: text[start..cur.pos].to_string(),
            line,
            col,
            offset: start,
        });
    }
}

/// Length of an IRIREF at the start of `s`, if it is one.
fn iri_ref_len(s: &str) -> Option<usize> {
    let mut chars = s.char_indices();
    chars.next()?; // '<'
    for (i, c) in chars {
        match c {
            '>' => return Some(i + 1),
            '<' | '"' | '{' | '}' | '|' | '^' | '`' | '\\' => return None,
            c if (c as u32) <= 0x20 => return None,
            _ => {}
        }
    }
    None
}

fn lex_string(cur: &mut Cursor<'_>, quote: char, line: usize, col: usize) -> Result<(), LexError> {
    let long: String = std::iter::repeat_n(quote, 3).collect();
    if cur.rest().starts_with(&long) {
        for _ in 0..3 {
            cur.bump();
        }
        loop {
            if cur.rest().starts_with(&long) {
                for _ in 0..3 {
                    cur.bump();
                }
                break;
            }
            match cur.bump() {
                Some('\\') => {
                    cur.bump();
                }
                Some(_) => {}
                None => return Err(LexError::UnterminatedString { line, col }),
            }
        }
    } else {
        cur.bump();
        loop {
            match cur.bump() {
                Some('\\') => {
                    if cur.bump().is_none() {
                        return Err(LexError::UnterminatedString { line, col });
                    }
                }
                Some('\n') | None => return Err(LexError::UnterminatedString { line, col }),
                Some(c) if c == quote => break,
                Some(_) => {}
            }
        }
    }
    // language tag belongs to the literal token
    if cur.peek() == Some('@') && cur.peek_at(1).is_some_and(|c| c.is_ascii_alphabetic()) {
        cur.bump();
        while cur.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '-') {
            cur.bump();
        }
    }
    Ok(())
}

fn lex_number(cur: &mut Cursor<'_>) {
    while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
    }
    if cur.peek() == Some('.') && cur.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
        cur.bump();
        while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
            cur.bump();
        }
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let sign = matches!(cur.peek_at(1), Some('+' | '-'));
        let digit_at = if sign { 2 } else { 1 };
        if cur.peek_at(digit_at).is_some_and(|c| c.is_ascii_digit()) {
            for _ in 0..=digit_at {
                cur.bump();
            }
            while cur.peek().is_some_and(|c| c.is_ascii_digit()) {
                cur.bump();
            }
        }
    }
}

/// Bare words become keywords; words with a colon become prefixed names.
fn lex_name(cur: &mut Cursor<'_>) -> TokenKind {
    let start = cur.pos;
    while cur.peek().is_some_and(|c| is_name_char(c) || c == '.') {
        // a trailing dot terminates the triple, it is not part of the name
        if cur.peek() == Some('.') && !cur.peek_at(1).is_some_and(|c| is_name_char(c) || c == '.') {
            break;
        }
        cur.bump();
    }
    if cur.peek() != Some(':') {
        return TokenKind::Keyword;
    }
    cur.bump();
    while let Some(c) = cur.peek() {
        let continues = is_name_char(c) || c == ':' || c == '%';
        let inner_dot = c == '.' && cur.peek_at(1).is_some_and(|n| is_name_char(n) || n == ':');
        if !(continues || inner_dot) {
            break;
        }
        cur.bump();
    }
    debug_assert!(cur.pos > start);
    TokenKind::PrefixedName
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<(TokenKind, String)> {
        tokenize(text)
            .unwrap()
            .into_iter()
            .map(|t| (t.kind, t.text))
            .collect()
    }

    #[test]
    fn single_variable() {
        assert_eq!(
            kinds("?x"),
            vec![(TokenKind::Variable, "?x".into()), (TokenKind::Eof, String::new())]
        );
    }

    #[test]
    fn filter_contains_stream() {
        use TokenKind::*;
        let got = kinds("FILTER CONTAINS(?petName, 'b')");
        let want = vec![
            (Keyword, "FILTER"),
            (Keyword, "CONTAINS"),
            (Punct, "("),
            (Variable, "?petName"),
            (Punct, ","),
            (LiteralString, "'b'"),
            (Punct, ")"),
            (Eof, ""),
        ];
        let want: Vec<_> = want.into_iter().map(|(k, t)| (k, t.to_string())).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn unclosed_string_is_an_error() {
        assert!(matches!(
            tokenize("'unclosed"),
            Err(LexError::UnterminatedString { line: 1, col: 1 })
        ));
    }

    #[test]
    fn illegal_character_reports_position() {
        let err = tokenize("SELECT ?x\n  WHERE { ~ }").unwrap_err();
        assert_eq!(err, LexError::IllegalCharacter { ch: '~', line: 2, col: 11 });
    }

    #[test]
    fn iri_versus_less_than() {
        use TokenKind::*;
        let got = kinds("FILTER(?a < ?b) <http://ex.org/a#b>");
        assert_eq!(got[3], (Operator, "<".into()));
        assert_eq!(got[6], (Iri, "<http://ex.org/a#b>".into()));
    }

    #[test]
    fn prefixed_names_and_trailing_dot() {
        use TokenKind::*;
        let got = kinds("?p bsbm-inst:ProductType1. ?x :a.b :c .");
        assert_eq!(got[1], (PrefixedName, "bsbm-inst:ProductType1".into()));
        assert_eq!(got[2], (Punct, ".".into()));
        assert_eq!(got[4], (PrefixedName, ":a.b".into()));
        assert_eq!(got[5], (PrefixedName, ":c".into()));
    }

    #[test]
    fn numbers_and_comments() {
        use TokenKind::*;
        let got = kinds("LIMIT 10 # trailing\nOFFSET 1.5e3");
        assert_eq!(got[1], (LiteralNumber, "10".into()));
        assert_eq!(got[2], (Keyword, "OFFSET".into()));
        assert_eq!(got[3], (LiteralNumber, "1.5e3".into()));
    }

    #[test]
    fn count_star_lowercase() {
        use TokenKind::*;
        let got = kinds("(count( *) as ?aggregation_all)");
        assert_eq!(got[1], (Keyword, "count".into()));
        assert_eq!(got[3], (Operator, "*".into()));
        assert_eq!(got[5], (Keyword, "as".into()));
    }

    #[test]
    fn language_tag_and_datatype() {
        use TokenKind::*;
        let got = kinds("'chat'@fr \"5\"^^xsd:integer");
        assert_eq!(got[0], (LiteralString, "'chat'@fr".into()));
        assert_eq!(got[2], (Operator, "^^".into()));
        assert_eq!(got[3], (PrefixedName, "xsd:integer".into()));
    }

    #[test]
    fn offsets_point_at_token_text() {
        let src = "SELECT ?x WHERE {\n  ?x a :Person . # c\n}";
        for t in tokenize(src).unwrap() {
            assert_eq!(&src[t.offset..t.offset + t.text.len()], t.text);
        }
    }
}
