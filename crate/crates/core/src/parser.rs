//! Recursive-descent parser producing a [`ParseTree`] for the supported
//! SPARQL 1.1 subset.
//!
//! Constructs outside the subset that are still valid SPARQL (sub-selects,
//! MINUS, UNION, EXISTS, VALUES, ...) are parsed into their own productions so
//! the classifier can name them instead of reporting a syntax error.

use crate::lexer::{tokenize, LexError, Token, TokenKind};
use crate::parse_tree::{ParseTree, Rule};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{col}: expected {expected}, found {found}")]
pub struct SyntaxError {
    pub expected: String,
    pub found: String,
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
}

const AGGREGATES: &[&str] = &["COUNT", "SUM", "MIN", "MAX", "AVG", "SAMPLE", "GROUP_CONCAT"];

const BUILTINS: &[&str] = &[
    "STR", "LANG", "LANGMATCHES", "DATATYPE", "BOUND", "IRI", "URI", "BNODE", "RAND", "ABS",
    "CEIL", "FLOOR", "ROUND", "CONCAT", "STRLEN", "UCASE", "LCASE", "ENCODE_FOR_URI", "CONTAINS",
    "STRSTARTS", "STRENDS", "STRBEFORE", "STRAFTER", "YEAR", "MONTH", "DAY", "HOURS", "MINUTES",
    "SECONDS", "TIMEZONE", "TZ", "NOW", "UUID", "STRUUID", "MD5", "SHA1", "SHA256", "SHA384",
    "SHA512", "COALESCE", "IF", "STRLANG", "STRDT", "SAMETERM", "ISIRI", "ISURI", "ISBLANK",
    "ISLITERAL", "ISNUMERIC", "REGEX", "SUBSTR", "REPLACE",
];

fn is_aggregate_name(text: &str) -> bool {
    AGGREGATES.iter().any(|a| a.eq_ignore_ascii_case(text))
}

fn is_builtin_name(text: &str) -> bool {
    BUILTINS.iter().any(|a| a.eq_ignore_ascii_case(text))
}

/// Tokenizes and parses in one step.
pub fn parse_query(text: &str) -> Result<ParseTree, ParseError> {
    let tokens = tokenize(text)?;
    Ok(parse_sparql(tokens)?)
}

/// Parses a token stream produced by [`tokenize`].
pub fn parse_sparql(tokens: Vec<Token>) -> Result<ParseTree, SyntaxError> {
    let mut p = Parser { tokens, pos: 0 };
    p.query_unit()
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

impl Parser {
    fn peek(&self) -> &Token {
        self.peek_n(0)
    }

    fn peek_n(&self, n: usize) -> &Token {
        let last = self.tokens.len() - 1;
        &self.tokens[(self.pos + n).min(last)]
    }

    fn at_eof(&self) -> bool {
        self.peek().kind == TokenKind::Eof
    }

    fn bump(&mut self) -> Token {
        let t = self.peek().clone();
        if t.kind != TokenKind::Eof {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> PResult<T> {
        let t = self.peek();
        let found = if t.kind == TokenKind::Eof {
            "end of input".to_string()
        } else {
            format!("'{}'", t.text)
        };
        Err(SyntaxError {
            expected: expected.to_string(),
            found,
            line: t.line,
            col: t.col,
        })
    }

    fn expect_keyword(&mut self, kw: &str) -> PResult<Token> {
        if self.peek().is_keyword(kw) {
            Ok(self.bump())
        } else {
            self.error(kw)
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        if self.peek().is_punct(p) {
            Ok(self.bump())
        } else {
            self.error(&format!("'{p}'"))
        }
    }

    fn query_unit(&mut self) -> PResult<ParseTree> {
        let mut unit = ParseTree::new(Rule::QueryUnit);
        if let Some(prologue) = self.prologue()? {
            unit.push_tree(prologue);
        }
        let t = self.peek();
        if t.is_keyword("SELECT") {
            unit.push_tree(self.select_query()?);
        } else if t.is_keyword("CONSTRUCT") || t.is_keyword("ASK") || t.is_keyword("DESCRIBE") {
            let mut other = ParseTree::new(Rule::OtherQueryForm);
            while !self.at_eof() {
                other.push_token(self.bump());
            }
            unit.push_tree(other);
        } else {
            return self.error("SELECT");
        }
        if !self.at_eof() {
            return self.error("end of input");
        }
        unit.push_token(self.bump());
        Ok(unit)
    }

    fn prologue(&mut self) -> PResult<Option<ParseTree>> {
        let mut prologue = ParseTree::new(Rule::Prologue);
        loop {
            if self.peek().is_keyword("PREFIX") {
                let mut decl = ParseTree::new(Rule::PrefixDecl);
                decl.push_token(self.bump());
                let ns = self.peek();
                if ns.kind != TokenKind::PrefixedName || !ns.text.ends_with(':') {
                    return self.error("prefix label");
                }
                decl.push_token(self.bump());
                if self.peek().kind != TokenKind::Iri {
                    return self.error("IRI");
                }
                decl.push_token(self.bump());
                prologue.push_tree(decl);
            } else if self.peek().is_keyword("BASE") {
                let mut decl = ParseTree::new(Rule::BaseDecl);
                decl.push_token(self.bump());
                if self.peek().kind != TokenKind::Iri {
                    return self.error("IRI");
                }
                decl.push_token(self.bump());
                prologue.push_tree(decl);
            } else {
                break;
            }
        }
        Ok((!prologue.children.is_empty()).then_some(prologue))
    }

    fn select_query(&mut self) -> PResult<ParseTree> {
        let mut q = ParseTree::new(Rule::SelectQuery);
        q.push_tree(self.select_clause()?);
        while self.peek().is_keyword("FROM") {
            let mut ds = ParseTree::new(Rule::DatasetClause);
            ds.push_token(self.bump());
            if self.peek().is_keyword("NAMED") {
                ds.push_token(self.bump());
            }
            ds.push_tree(self.iri()?);
            q.push_tree(ds);
        }
        q.push_tree(self.where_clause()?);
        if let Some(sm) = self.solution_modifier()? {
            q.push_tree(sm);
        }
        if self.peek().is_keyword("VALUES") {
            q.push_tree(self.data_block(Rule::ValuesClause)?);
        }
        Ok(q)
    }

    fn sub_select(&mut self) -> PResult<ParseTree> {
        let mut q = ParseTree::new(Rule::SubSelect);
        q.push_tree(self.select_clause()?);
        q.push_tree(self.where_clause()?);
        if let Some(sm) = self.solution_modifier()? {
            q.push_tree(sm);
        }
        if self.peek().is_keyword("VALUES") {
            q.push_tree(self.data_block(Rule::ValuesClause)?);
        }
        Ok(q)
    }

    fn select_clause(&mut self) -> PResult<ParseTree> {
        let mut sc = ParseTree::new(Rule::SelectClause);
        sc.push_token(self.expect_keyword("SELECT")?);
        if self.peek().is_keyword("DISTINCT") || self.peek().is_keyword("REDUCED") {
            sc.push_token(self.bump());
        }
        if self.peek().is_op("*") {
            sc.push_token(self.bump());
            return Ok(sc);
        }
        let mut count = 0;
        loop {
            let t = self.peek();
            if t.kind == TokenKind::Variable {
                sc.push_tree(self.var()?);
            } else if t.is_punct("(") {
                let mut b = ParseTree::new(Rule::SelectBinding);
                b.push_token(self.bump());
                b.push_tree(self.expression()?);
                b.push_token(self.expect_keyword("AS")?);
                b.push_tree(self.var()?);
                b.push_token(self.expect_punct(")")?);
                sc.push_tree(b);
            } else if is_aggregate_name(&t.text) && self.peek_n(1).is_punct("(") {
                // `SELECT AVG(?x) AS ?y` without the surrounding parentheses,
                // as written in some published queries
                let mut b = ParseTree::new(Rule::SelectBinding);
                b.push_tree(self.expression()?);
                b.push_token(self.expect_keyword("AS")?);
                b.push_tree(self.var()?);
                sc.push_tree(b);
            } else {
                break;
            }
            count += 1;
        }
        if count == 0 {
            return self.error("projection variable or '*'");
        }
        Ok(sc)
    }

    fn where_clause(&mut self) -> PResult<ParseTree> {
        let mut w = ParseTree::new(Rule::WhereClause);
        if self.peek().is_keyword("WHERE") {
            w.push_token(self.bump());
        }
        w.push_tree(self.group_graph_pattern()?);
        Ok(w)
    }

    fn group_graph_pattern(&mut self) -> PResult<ParseTree> {
        let mut g = ParseTree::new(Rule::GroupGraphPattern);
        g.push_token(self.expect_punct("{")?);
        if self.peek().is_keyword("SELECT") {
            g.push_tree(self.sub_select()?);
        } else {
            let sub = self.group_graph_pattern_sub()?;
            if !sub.children.is_empty() {
                g.push_tree(sub);
            }
        }
        g.push_token(self.expect_punct("}")?);
        Ok(g)
    }

    fn starts_triples(&self) -> bool {
        let t = self.peek();
        match t.kind {
            TokenKind::Variable
            | TokenKind::Iri
            | TokenKind::PrefixedName
            | TokenKind::LiteralString
            | TokenKind::LiteralNumber => true,
            TokenKind::Keyword => t.is_keyword("true") || t.is_keyword("false"),
            TokenKind::Punct => t.text == "[",
            TokenKind::Operator => {
                (t.text == "-" || t.text == "+") && self.peek_n(1).kind == TokenKind::LiteralNumber
            }
            TokenKind::Eof => false,
        }
    }

    fn group_graph_pattern_sub(&mut self) -> PResult<ParseTree> {
        let mut sub = ParseTree::new(Rule::GroupGraphPatternSub);
        loop {
            if self.starts_triples() {
                sub.push_tree(self.triples_block()?);
            } else if let Some(gp) = self.graph_pattern_not_triples()? {
                sub.push_tree(gp);
                if self.peek().is_punct(".") {
                    sub.push_token(self.bump());
                }
            } else {
                break;
            }
        }
        Ok(sub)
    }

    fn triples_block(&mut self) -> PResult<ParseTree> {
        let mut block = ParseTree::new(Rule::TriplesBlock);
        loop {
            block.push_tree(self.triples_same_subject()?);
            if self.peek().is_punct(".") {
                block.push_token(self.bump());
                if self.starts_triples() {
                    continue;
                }
            }
            break;
        }
        Ok(block)
    }

    fn triples_same_subject(&mut self) -> PResult<ParseTree> {
        let mut t = ParseTree::new(Rule::TriplesSameSubjectPath);
        t.push_tree(self.var_or_term()?);
        t.push_tree(self.property_list()?);
        Ok(t)
    }

    fn property_list(&mut self) -> PResult<ParseTree> {
        let mut pl = ParseTree::new(Rule::PropertyListPathNotEmpty);
        pl.push_tree(self.verb()?);
        pl.push_tree(self.object_list()?);
        while self.peek().is_punct(";") {
            pl.push_token(self.bump());
            if self.starts_verb() {
                pl.push_tree(self.verb()?);
                pl.push_tree(self.object_list()?);
            }
        }
        Ok(pl)
    }

    fn starts_verb(&self) -> bool {
        let t = self.peek();
        matches!(t.kind, TokenKind::Variable | TokenKind::Iri | TokenKind::PrefixedName)
            || t.is_keyword("a")
            || t.is_op("^")
            || t.is_op("!")
            || t.is_punct("(")
    }

    fn verb(&mut self) -> PResult<ParseTree> {
        let mut v = ParseTree::new(Rule::VerbPath);
        if self.peek().kind == TokenKind::Variable {
            v.push_tree(self.var()?);
        } else if self.starts_verb() {
            let path = self.path_alternative()?;
            v.children.push(path);
        } else {
            return self.error("predicate");
        }
        Ok(v)
    }

    fn path_alternative(&mut self) -> PResult<crate::parse_tree::Node> {
        let first = self.path_sequence()?;
        if !self.peek().is_op("|") {
            return Ok(first);
        }
        let mut alt = ParseTree::new(Rule::PathAlternative);
        alt.children.push(first);
        while self.peek().is_op("|") {
            alt.push_token(self.bump());
            alt.children.push(self.path_sequence()?);
        }
        Ok(crate::parse_tree::Node::Tree(alt))
    }

    fn path_sequence(&mut self) -> PResult<crate::parse_tree::Node> {
        let first = self.path_elt_or_inverse()?;
        if !self.peek().is_op("/") {
            return Ok(first);
        }
        let mut seq = ParseTree::new(Rule::PathSequence);
        seq.children.push(first);
        while self.peek().is_op("/") {
            seq.push_token(self.bump());
            seq.children.push(self.path_elt_or_inverse()?);
        }
        Ok(crate::parse_tree::Node::Tree(seq))
    }

    fn path_elt_or_inverse(&mut self) -> PResult<crate::parse_tree::Node> {
        if self.peek().is_op("^") {
            let mut inv = ParseTree::new(Rule::PathEltOrInverse);
            inv.push_token(self.bump());
            inv.children.push(self.path_elt()?);
            return Ok(crate::parse_tree::Node::Tree(inv));
        }
        self.path_elt()
    }

    fn path_elt(&mut self) -> PResult<crate::parse_tree::Node> {
        use crate::parse_tree::Node;
        let primary: Node = if self.peek().is_keyword("a") {
            Node::Token(self.bump())
        } else if self.peek().is_op("!") {
            let mut neg = ParseTree::new(Rule::PathNegatedPropertySet);
            neg.push_token(self.bump());
            if self.peek().is_punct("(") {
                let mut depth = 0usize;
                loop {
                    let t = self.bump();
                    if t.kind == TokenKind::Eof {
                        return self.error("')'");
                    }
                    if t.is_punct("(") {
                        depth += 1;
                    } else if t.is_punct(")") {
                        depth -= 1;
                    }
                    neg.push_token(t);
                    if depth == 0 {
                        break;
                    }
                }
            } else if self.peek().is_keyword("a") {
                neg.push_token(self.bump());
            } else {
                neg.push_tree(self.iri()?);
            }
            Node::Tree(neg)
        } else if self.peek().is_punct("(") {
            let mut group = ParseTree::new(Rule::PathElt);
            group.push_token(self.bump());
            group.children.push(self.path_alternative()?);
            group.push_token(self.expect_punct(")")?);
            Node::Tree(group)
        } else {
            Node::Tree(self.iri()?)
        };
        let t = self.peek();
        if t.is_op("*") || t.is_op("+") || t.is_op("?") {
            let mut elt = ParseTree::new(Rule::PathElt);
            elt.children.push(primary);
            let mut m = ParseTree::new(Rule::PathMod);
            m.push_token(self.bump());
            elt.push_tree(m);
            return Ok(Node::Tree(elt));
        }
        Ok(primary)
    }

    fn object_list(&mut self) -> PResult<ParseTree> {
        let mut ol = ParseTree::new(Rule::ObjectListPath);
        ol.push_tree(self.var_or_term()?);
        while self.peek().is_punct(",") {
            ol.push_token(self.bump());
            ol.push_tree(self.var_or_term()?);
        }
        Ok(ol)
    }

    fn var_or_term(&mut self) -> PResult<ParseTree> {
        let t = self.peek();
        match t.kind {
            TokenKind::Variable => self.var(),
            TokenKind::Iri => self.iri(),
            TokenKind::PrefixedName if t.text.starts_with("_:") => {
                let mut b = ParseTree::new(Rule::BlankNode);
                b.push_token(self.bump());
                Ok(b)
            }
            TokenKind::PrefixedName => self.iri(),
            TokenKind::LiteralString => self.rdf_literal(),
            TokenKind::LiteralNumber => self.numeric_literal(),
            TokenKind::Operator if t.text == "-" || t.text == "+" => self.numeric_literal(),
            TokenKind::Keyword if t.is_keyword("true") || t.is_keyword("false") => {
                let mut b = ParseTree::new(Rule::BooleanLiteral);
                b.push_token(self.bump());
                Ok(b)
            }
            TokenKind::Punct if t.text == "[" => {
                let mut b = ParseTree::new(Rule::BlankNode);
                b.push_token(self.bump());
                if !self.peek().is_punct("]") {
                    b.push_tree(self.property_list()?);
                }
                b.push_token(self.expect_punct("]")?);
                Ok(b)
            }
            _ => self.error("variable or RDF term"),
        }
    }

    fn var(&mut self) -> PResult<ParseTree> {
        if self.peek().kind != TokenKind::Variable {
            return self.error("variable");
        }
        let mut v = ParseTree::new(Rule::Var);
        v.push_token(self.bump());
        Ok(v)
    }

    fn iri(&mut self) -> PResult<ParseTree> {
        let rule = match self.peek().kind {
            TokenKind::Iri => Rule::Iri,
            TokenKind::PrefixedName => Rule::PrefixedName,
            _ => return self.error("IRI or prefixed name"),
        };
        let mut t = ParseTree::new(rule);
        t.push_token(self.bump());
        Ok(t)
    }

    fn rdf_literal(&mut self) -> PResult<ParseTree> {
        let mut lit = ParseTree::new(Rule::RdfLiteral);
        lit.push_token(self.bump());
        if self.peek().is_op("^^") {
            lit.push_token(self.bump());
            lit.push_tree(self.iri()?);
        }
        Ok(lit)
    }

    fn numeric_literal(&mut self) -> PResult<ParseTree> {
        let mut lit = ParseTree::new(Rule::NumericLiteral);
        if self.peek().is_op("-") || self.peek().is_op("+") {
            lit.push_token(self.bump());
        }
        if self.peek().kind != TokenKind::LiteralNumber {
            return self.error("number");
        }
        lit.push_token(self.bump());
        Ok(lit)
    }

    fn graph_pattern_not_triples(&mut self) -> PResult<Option<ParseTree>> {
        let t = self.peek();
        let tree = if t.is_punct("{") {
            let mut g = ParseTree::new(Rule::GroupOrUnionGraphPattern);
            g.push_tree(self.group_graph_pattern()?);
            while self.peek().is_keyword("UNION") {
                g.push_token(self.bump());
                g.push_tree(self.group_graph_pattern()?);
            }
            g
        } else if t.is_keyword("OPTIONAL") {
            let mut o = ParseTree::new(Rule::OptionalGraphPattern);
            o.push_token(self.bump());
            o.push_tree(self.group_graph_pattern()?);
            o
        } else if t.is_keyword("MINUS") {
            let mut m = ParseTree::new(Rule::MinusGraphPattern);
            m.push_token(self.bump());
            m.push_tree(self.group_graph_pattern()?);
            m
        } else if t.is_keyword("GRAPH") || t.is_keyword("SERVICE") {
            let rule = if t.is_keyword("GRAPH") {
                Rule::GraphGraphPattern
            } else {
                Rule::ServiceGraphPattern
            };
            let mut g = ParseTree::new(rule);
            g.push_token(self.bump());
            if self.peek().is_keyword("SILENT") {
                g.push_token(self.bump());
            }
            if self.peek().kind == TokenKind::Variable {
                g.push_tree(self.var()?);
            } else {
                g.push_tree(self.iri()?);
            }
            g.push_tree(self.group_graph_pattern()?);
            g
        } else if t.is_keyword("FILTER") {
            let mut f = ParseTree::new(Rule::Filter);
            f.push_token(self.bump());
            f.push_tree(self.constraint()?);
            f
        } else if t.is_keyword("BIND") {
            let mut b = ParseTree::new(Rule::Bind);
            b.push_token(self.bump());
            b.push_token(self.expect_punct("(")?);
            b.push_tree(self.expression()?);
            b.push_token(self.expect_keyword("AS")?);
            b.push_tree(self.var()?);
            b.push_token(self.expect_punct(")")?);
            b
        } else if t.is_keyword("VALUES") {
            self.data_block(Rule::InlineData)?
        } else {
            return Ok(None);
        };
        Ok(Some(tree))
    }

    /// VALUES blocks are kept as flat token runs; they are never translated.
    fn data_block(&mut self, rule: Rule) -> PResult<ParseTree> {
        let mut d = ParseTree::new(rule);
        d.push_token(self.expect_keyword("VALUES")?);
        if self.peek().kind == TokenKind::Variable {
            d.push_tree(self.var()?);
        } else {
            d.push_token(self.expect_punct("(")?);
            while self.peek().kind == TokenKind::Variable {
                d.push_tree(self.var()?);
            }
            d.push_token(self.expect_punct(")")?);
        }
        d.push_token(self.expect_punct("{")?);
        while !self.peek().is_punct("}") {
            if self.at_eof() {
                return self.error("'}'");
            }
            d.push_token(self.bump());
        }
        d.push_token(self.bump());
        Ok(d)
    }

    fn constraint(&mut self) -> PResult<ParseTree> {
        let mut c = ParseTree::new(Rule::Constraint);
        let t = self.peek();
        if t.is_punct("(") {
            c.push_tree(self.bracketted_expression()?);
        } else if t.kind == TokenKind::Keyword {
            c.push_tree(self.builtin_call()?);
        } else if matches!(t.kind, TokenKind::Iri | TokenKind::PrefixedName) {
            c.push_tree(self.function_call()?);
        } else {
            return self.error("constraint");
        }
        Ok(c)
    }

    fn solution_modifier(&mut self) -> PResult<Option<ParseTree>> {
        let mut sm = ParseTree::new(Rule::SolutionModifier);
        if self.peek().is_keyword("GROUP") {
            let mut g = ParseTree::new(Rule::GroupClause);
            g.push_token(self.bump());
            g.push_token(self.expect_keyword("BY")?);
            let mut n = 0;
            while let Some(cond) = self.group_condition()? {
                g.push_tree(cond);
                n += 1;
            }
            if n == 0 {
                return self.error("group condition");
            }
            sm.push_tree(g);
        }
        if self.peek().is_keyword("HAVING") {
            let mut h = ParseTree::new(Rule::HavingClause);
            h.push_token(self.bump());
            let mut n = 0;
            while self.starts_constraint() {
                let mut hc = ParseTree::new(Rule::HavingCondition);
                hc.push_tree(self.constraint()?);
                h.push_tree(hc);
                n += 1;
            }
            if n == 0 {
                return self.error("having condition");
            }
            sm.push_tree(h);
        }
        if self.peek().is_keyword("ORDER") {
            let mut o = ParseTree::new(Rule::OrderClause);
            o.push_token(self.bump());
            o.push_token(self.expect_keyword("BY")?);
            let mut n = 0;
            while let Some(cond) = self.order_condition()? {
                o.push_tree(cond);
                n += 1;
            }
            if n == 0 {
                return self.error("order condition");
            }
            sm.push_tree(o);
        }
        if self.peek().is_keyword("LIMIT") || self.peek().is_keyword("OFFSET") {
            let mut lo = ParseTree::new(Rule::LimitOffsetClauses);
            let first_is_limit = self.peek().is_keyword("LIMIT");
            lo.push_tree(self.limit_or_offset()?);
            let second = if first_is_limit { "OFFSET" } else { "LIMIT" };
            if self.peek().is_keyword(second) {
                lo.push_tree(self.limit_or_offset()?);
            }
            sm.push_tree(lo);
        }
        Ok((!sm.children.is_empty()).then_some(sm))
    }

    fn limit_or_offset(&mut self) -> PResult<ParseTree> {
        let rule = if self.peek().is_keyword("LIMIT") {
            Rule::LimitClause
        } else {
            Rule::OffsetClause
        };
        let mut c = ParseTree::new(rule);
        c.push_token(self.bump());
        let n = self.peek();
        if n.kind != TokenKind::LiteralNumber || !n.text.bytes().all(|b| b.is_ascii_digit()) {
            return self.error("non-negative integer");
        }
        c.push_token(self.bump());
        Ok(c)
    }

    fn starts_constraint(&self) -> bool {
        let t = self.peek();
        t.is_punct("(")
            || matches!(t.kind, TokenKind::Iri | TokenKind::PrefixedName)
            || (t.kind == TokenKind::Keyword && self.is_call_keyword(t))
    }

    fn is_call_keyword(&self, t: &Token) -> bool {
        is_builtin_name(&t.text)
            || is_aggregate_name(&t.text)
            || t.is_keyword("EXISTS")
            || (t.is_keyword("NOT") && self.peek_n(1).is_keyword("EXISTS"))
    }

    fn group_condition(&mut self) -> PResult<Option<ParseTree>> {
        let mut gc = ParseTree::new(Rule::GroupCondition);
        let t = self.peek();
        if t.kind == TokenKind::Variable {
            gc.push_tree(self.var()?);
        } else if t.is_punct("(") {
            gc.push_token(self.bump());
            gc.push_tree(self.expression()?);
            if self.peek().is_keyword("AS") {
                gc.push_token(self.bump());
                gc.push_tree(self.var()?);
            }
            gc.push_token(self.expect_punct(")")?);
        } else if t.kind == TokenKind::Keyword && self.is_call_keyword(t) {
            gc.push_tree(self.builtin_call()?);
        } else if matches!(t.kind, TokenKind::Iri | TokenKind::PrefixedName) {
            gc.push_tree(self.function_call()?);
        } else {
            return Ok(None);
        }
        Ok(Some(gc))
    }

    fn order_condition(&mut self) -> PResult<Option<ParseTree>> {
        let mut oc = ParseTree::new(Rule::OrderCondition);
        let t = self.peek();
        if t.is_keyword("ASC") || t.is_keyword("DESC") {
            oc.push_token(self.bump());
            oc.push_tree(self.bracketted_expression()?);
        } else if t.kind == TokenKind::Variable {
            oc.push_tree(self.var()?);
        } else if self.starts_constraint() {
            oc.push_tree(self.constraint()?);
        } else {
            return Ok(None);
        }
        Ok(Some(oc))
    }

    // ---- expressions -------------------------------------------------------

    fn expression(&mut self) -> PResult<ParseTree> {
        self.conditional_or()
    }

    fn conditional_or(&mut self) -> PResult<ParseTree> {
        let first = self.conditional_and()?;
        if !self.peek().is_op("||") {
            return Ok(first);
        }
        let mut or = ParseTree::new(Rule::ConditionalOrExpression);
        or.push_tree(first);
        while self.peek().is_op("||") {
            or.push_token(self.bump());
            or.push_tree(self.conditional_and()?);
        }
        Ok(or)
    }

    fn conditional_and(&mut self) -> PResult<ParseTree> {
        let first = self.relational()?;
        if !self.peek().is_op("&&") {
            return Ok(first);
        }
        let mut and = ParseTree::new(Rule::ConditionalAndExpression);
        and.push_tree(first);
        while self.peek().is_op("&&") {
            and.push_token(self.bump());
            and.push_tree(self.relational()?);
        }
        Ok(and)
    }

    fn relational(&mut self) -> PResult<ParseTree> {
        let lhs = self.additive()?;
        let t = self.peek();
        let comparison = ["=", "!=", "<", ">", "<=", ">="]
            .iter()
            .any(|op| t.is_op(op));
        if comparison {
            let mut rel = ParseTree::new(Rule::RelationalExpression);
            rel.push_tree(lhs);
            rel.push_token(self.bump());
            rel.push_tree(self.additive()?);
            return Ok(rel);
        }
        if t.is_keyword("IN") || (t.is_keyword("NOT") && self.peek_n(1).is_keyword("IN")) {
            let mut rel = ParseTree::new(Rule::RelationalExpression);
            rel.push_tree(lhs);
            if self.peek().is_keyword("NOT") {
                rel.push_token(self.bump());
            }
            rel.push_token(self.bump());
            rel.push_tree(self.expression_list()?);
            return Ok(rel);
        }
        Ok(lhs)
    }

    fn expression_list(&mut self) -> PResult<ParseTree> {
        let mut list = ParseTree::new(Rule::ExpressionList);
        list.push_token(self.expect_punct("(")?);
        if !self.peek().is_punct(")") {
            list.push_tree(self.expression()?);
            while self.peek().is_punct(",") {
                list.push_token(self.bump());
                list.push_tree(self.expression()?);
            }
        }
        list.push_token(self.expect_punct(")")?);
        Ok(list)
    }

    fn additive(&mut self) -> PResult<ParseTree> {
        let first = self.multiplicative()?;
        if !(self.peek().is_op("+") || self.peek().is_op("-")) {
            return Ok(first);
        }
        let mut add = ParseTree::new(Rule::AdditiveExpression);
        add.push_tree(first);
        while self.peek().is_op("+") || self.peek().is_op("-") {
            add.push_token(self.bump());
            add.push_tree(self.multiplicative()?);
        }
        Ok(add)
    }

    fn multiplicative(&mut self) -> PResult<ParseTree> {
        let first = self.unary()?;
        if !(self.peek().is_op("*") || self.peek().is_op("/")) {
            return Ok(first);
        }
        let mut mul = ParseTree::new(Rule::MultiplicativeExpression);
        mul.push_tree(first);
        while self.peek().is_op("*") || self.peek().is_op("/") {
            mul.push_token(self.bump());
            mul.push_tree(self.unary()?);
        }
        Ok(mul)
    }

    fn unary(&mut self) -> PResult<ParseTree> {
        let t = self.peek();
        if t.is_op("!") || t.is_op("-") || t.is_op("+") {
            let mut u = ParseTree::new(Rule::UnaryExpression);
            u.push_token(self.bump());
            u.push_tree(self.primary()?);
            return Ok(u);
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<ParseTree> {
        let t = self.peek();
        match t.kind {
            TokenKind::Punct if t.text == "(" => self.bracketted_expression(),
            TokenKind::Variable => self.var(),
            TokenKind::Iri | TokenKind::PrefixedName => {
                if self.peek_n(1).is_punct("(") {
                    self.function_call()
                } else {
                    self.iri()
                }
            }
            TokenKind::LiteralString => self.rdf_literal(),
            TokenKind::LiteralNumber => self.numeric_literal(),
            TokenKind::Keyword if t.is_keyword("true") || t.is_keyword("false") => {
                let mut b = ParseTree::new(Rule::BooleanLiteral);
                b.push_token(self.bump());
                Ok(b)
            }
            TokenKind::Keyword if self.is_call_keyword(t) => self.builtin_call(),
            _ => self.error("expression"),
        }
    }

    fn bracketted_expression(&mut self) -> PResult<ParseTree> {
        let mut b = ParseTree::new(Rule::BrackettedExpression);
        b.push_token(self.expect_punct("(")?);
        b.push_tree(self.expression()?);
        b.push_token(self.expect_punct(")")?);
        Ok(b)
    }

    fn function_call(&mut self) -> PResult<ParseTree> {
        let mut f = ParseTree::new(Rule::FunctionCall);
        f.push_tree(self.iri()?);
        f.push_tree(self.expression_list()?);
        Ok(f)
    }

    fn builtin_call(&mut self) -> PResult<ParseTree> {
        let t = self.peek().clone();
        if t.is_keyword("NOT") {
            let mut n = ParseTree::new(Rule::NotExistsFunc);
            n.push_token(self.bump());
            n.push_token(self.expect_keyword("EXISTS")?);
            n.push_tree(self.group_graph_pattern()?);
            return Ok(n);
        }
        if t.is_keyword("EXISTS") {
            let mut e = ParseTree::new(Rule::ExistsFunc);
            e.push_token(self.bump());
            e.push_tree(self.group_graph_pattern()?);
            return Ok(e);
        }
        if is_aggregate_name(&t.text) {
            return self.aggregate();
        }
        if !is_builtin_name(&t.text) {
            return self.error("built-in function");
        }
        let mut call = ParseTree::new(Rule::BuiltInCall);
        call.push_token(self.bump());
        call.push_token(self.expect_punct("(")?);
        if !self.peek().is_punct(")") {
            call.push_tree(self.expression()?);
            while self.peek().is_punct(",") {
                call.push_token(self.bump());
                call.push_tree(self.expression()?);
            }
        }
        call.push_token(self.expect_punct(")")?);
        Ok(call)
    }

    fn aggregate(&mut self) -> PResult<ParseTree> {
        let mut agg = ParseTree::new(Rule::Aggregate);
        let name = self.bump();
        let is_count = name.text.eq_ignore_ascii_case("COUNT");
        let is_concat = name.text.eq_ignore_ascii_case("GROUP_CONCAT");
        agg.push_token(name);
        agg.push_token(self.expect_punct("(")?);
        if self.peek().is_keyword("DISTINCT") {
            agg.push_token(self.bump());
        }
        if is_count && self.peek().is_op("*") {
            agg.push_token(self.bump());
        } else {
            agg.push_tree(self.expression()?);
        }
        if is_concat && self.peek().is_punct(";") {
            agg.push_token(self.bump());
            agg.push_token(self.expect_keyword("SEPARATOR")?);
            if !self.peek().is_op("=") {
                return self.error("'='");
            }
            agg.push_token(self.bump());
            if self.peek().kind != TokenKind::LiteralString {
                return self.error("string");
            }
            agg.push_token(self.bump());
        }
        agg.push_token(self.expect_punct(")")?);
        Ok(agg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(q: &str) -> ParseTree {
        parse_query(q).unwrap_or_else(|e| panic!("{q}: {e}"))
    }

    pub(crate) const PET_QUERY: &str = "SELECT ?petName (AVG(?personAge)
AS ?avgPersonAge)
WHERE {
  ?x rdf:type :Person .
  ?x person:age ?personAge .
  ?x person:hasPet ?pet .
  ?pet a :Pet .
  ?pet pet:name ?petName .
  FILTER CONTAINS(?petName, 'b')
}
GROUP BY ?petName
HAVING (AVG(?personAge) > 30)
ORDER BY DESC(?avgPersonAge)
OFFSET 1
LIMIT 10";

    #[test]
    fn minimal_query_shape() {
        let tree = parse("SELECT ?x WHERE { ?x a :Person . }");
        let q = tree.child(Rule::SelectQuery).unwrap();
        assert_eq!(q.children_of(Rule::SelectClause).count(), 1);
        let block = tree.find(Rule::TriplesBlock).unwrap();
        assert_eq!(block.children_of(Rule::TriplesSameSubjectPath).count(), 1);
    }

    #[test]
    fn pet_owner_query_shape() {
        let tree = parse(PET_QUERY);
        let q = tree.child(Rule::SelectQuery).unwrap();
        assert!(q.child(Rule::SelectClause).is_some());
        let sub = tree.find(Rule::GroupGraphPatternSub).unwrap();
        let block = sub.child(Rule::TriplesBlock).unwrap();
        assert_eq!(block.children_of(Rule::TriplesSameSubjectPath).count(), 5);
        assert_eq!(sub.children_of(Rule::Filter).count(), 1);
        let sm = q.child(Rule::SolutionModifier).unwrap();
        for rule in [Rule::GroupClause, Rule::HavingClause, Rule::OrderClause] {
            assert!(sm.child(rule).is_some(), "{rule}");
        }
        let lo = sm.child(Rule::LimitOffsetClauses).unwrap();
        assert!(lo.child(Rule::OffsetClause).is_some());
        assert!(lo.child(Rule::LimitClause).is_some());
    }

    #[test]
    fn truncated_input_is_a_syntax_error() {
        let err = parse_query("SELECT WHERE {").unwrap_err();
        match err {
            ParseError::Syntax(e) => {
                assert_eq!(e.found, "'WHERE'");
                assert_eq!((e.line, e.col), (1, 8));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_query("SELECT ?x WHERE { ?x a :P ."),
            Err(ParseError::Syntax(_))
        ));
    }

    #[test]
    fn leaves_reproduce_input_modulo_whitespace() {
        let tree = parse(PET_QUERY);
        let from_tree: String = tree.leaves().iter().map(|t| t.text.as_str()).collect();
        let from_src: String = PET_QUERY.chars().filter(|c| !c.is_whitespace()).collect();
        assert_eq!(from_tree, from_src);
    }

    #[test]
    fn non_terminals_are_never_empty() {
        let tree = parse("PREFIX : <http://e/> SELECT * WHERE { }");
        tree.walk(&mut |t| assert!(!t.children.is_empty(), "{}", t.rule));
    }

    #[test]
    fn unsupported_constructs_get_their_own_rules() {
        let tree = parse("SELECT ?x WHERE { ?x a :A . { SELECT ?x WHERE { ?x a :B } } MINUS { ?x :p ?y } }");
        assert!(tree.find(Rule::SubSelect).is_some());
        assert!(tree.find(Rule::MinusGraphPattern).is_some());
        let tree = parse("SELECT ?x WHERE { ?x a :A . FILTER NOT EXISTS { ?x :p ?y } }");
        assert!(tree.find(Rule::NotExistsFunc).is_some());
        let tree = parse("SELECT ?x WHERE { { ?x a :A } UNION { ?x a :B } VALUES ?x { :a :b } }");
        assert!(tree.find(Rule::InlineData).is_some());
        let tree = parse("ASK { ?x a :A }");
        assert!(tree.find(Rule::OtherQueryForm).is_some());
    }

    #[test]
    fn paths_and_modifiers() {
        let tree = parse("SELECT ?a WHERE { ?a :p/^:q ?b . ?a :r* ?c . ?a :s|:t ?d }");
        assert!(tree.find(Rule::PathSequence).is_some());
        assert!(tree.find(Rule::PathEltOrInverse).is_some());
        assert!(tree.find(Rule::PathMod).is_some());
        assert!(tree.find(Rule::PathAlternative).is_some());
    }

    #[test]
    fn limit_requires_integer() {
        assert!(parse_query("SELECT ?x WHERE { ?x a :A } LIMIT 1.5").is_err());
        assert!(parse_query("SELECT ?x WHERE { ?x a :A } LIMIT ?x").is_err());
    }

    #[test]
    fn keywords_are_case_insensitive() {
        let tree = parse("select (count( *) as ?aggregation_all) where { ?t1 a :singer . }");
        assert!(tree.find(Rule::Aggregate).is_some());
        assert!(tree.find(Rule::SelectBinding).is_some());
    }
}
