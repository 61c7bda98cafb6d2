use crate::lexer::Token;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Grammar productions. Names follow the W3C SPARQL 1.1 grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    QueryUnit,
    Prologue,
    BaseDecl,
    PrefixDecl,
    SelectQuery,
    /// CONSTRUCT, ASK and DESCRIBE; parsed only far enough to be rejected.
    OtherQueryForm,
    SelectClause,
    SelectBinding,
    DatasetClause,
    WhereClause,
    GroupGraphPattern,
    SubSelect,
    GroupGraphPatternSub,
    TriplesBlock,
    TriplesSameSubjectPath,
    PropertyListPathNotEmpty,
    VerbPath,
    PathSequence,
    PathAlternative,
    PathEltOrInverse,
    PathElt,
    PathMod,
    PathNegatedPropertySet,
    ObjectListPath,
    OptionalGraphPattern,
    GroupOrUnionGraphPattern,
    MinusGraphPattern,
    GraphGraphPattern,
    ServiceGraphPattern,
    Bind,
    InlineData,
    Filter,
    Constraint,
    SolutionModifier,
    GroupClause,
    GroupCondition,
    HavingClause,
    HavingCondition,
    OrderClause,
    OrderCondition,
    LimitOffsetClauses,
    LimitClause,
    OffsetClause,
    ValuesClause,
    ConditionalOrExpression,
    ConditionalAndExpression,
    RelationalExpression,
    AdditiveExpression,
    MultiplicativeExpression,
    UnaryExpression,
    BrackettedExpression,
    ExpressionList,
    BuiltInCall,
    Aggregate,
    FunctionCall,
    ExistsFunc,
    NotExistsFunc,
    Var,
    Iri,
    PrefixedName,
    RdfLiteral,
    NumericLiteral,
    BooleanLiteral,
    BlankNode,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    Tree(ParseTree),
    Token(Token),
}

impl Node {
    pub fn as_tree(&self) -> Option<&ParseTree> {
        match self {
            Node::Tree(t) => Some(t),
            Node::Token(_) => None,
        }
    }

    pub fn as_token(&self) -> Option<&Token> {
        match self {
            Node::Token(t) => Some(t),
            Node::Tree(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseTree {
    pub rule: Rule,
    pub children: Vec<Node>,
}

impl ParseTree {
    pub fn new(rule: Rule) -> Self {
        ParseTree {
            rule,
            children: Vec::new(),
        }
    }

    pub fn push_token(&mut self, token: Token) {
        self.children.push(Node::Token(token));
    }

    pub fn push_tree(&mut self, tree: ParseTree) {
        self.children.push(Node::Tree(tree));
    }

    /// Direct non-terminal children.
    pub fn subtrees(&self) -> impl Iterator<Item = &ParseTree> {
        self.children.iter().filter_map(Node::as_tree)
    }

    /// Direct terminal children.
    pub fn tokens(&self) -> impl Iterator<Item = &Token> {
        self.children.iter().filter_map(Node::as_token)
    }

    pub fn child(&self, rule: Rule) -> Option<&ParseTree> {
        self.subtrees().find(|t| t.rule == rule)
    }

    pub fn children_of(&self, rule: Rule) -> impl Iterator<Item = &ParseTree> {
        self.subtrees().filter(move |t| t.rule == rule)
    }

    /// First descendant (pre-order, self included) with the given rule.
    pub fn find(&self, rule: Rule) -> Option<&ParseTree> {
        if self.rule == rule {
            return Some(self);
        }
        self.subtrees().find_map(|t| t.find(rule))
    }

    /// Pre-order walk over every subtree, self included.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a ParseTree)) {
        f(self);
        for t in self.subtrees() {
            t.walk(f);
        }
    }

    /// Leaf tokens in document order.
    pub fn leaves(&self) -> Vec<&Token> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a Token>) {
        for ch in &self.children {
            match ch {
                Node::Token(t) => out.push(t),
                Node::Tree(t) => t.collect_leaves(out),
            }
        }
    }

    /// Leaf texts joined by single spaces.
    pub fn text(&self) -> String {
        self.leaves()
            .iter()
            .map(|t| t.text.as_str())
            .filter(|t| !t.is_empty())
            .collect::<Vec<_>>()
            .join(" ")
    }

    pub fn first_token(&self) -> Option<&Token> {
        self.leaves().into_iter().next()
    }

    /// Indented outline of the tree, one production or token per line.
    pub fn outline(&self) -> String {
        let mut out = String::new();
        self.outline_into(0, &mut out);
        out
    }

    fn outline_into(&self, depth: usize, out: &mut String) {
        out.push_str(&"  ".repeat(depth));
        out.push_str(&self.rule.to_string());
        out.push('\n');
        for ch in &self.children {
            match ch {
                Node::Tree(t) => t.outline_into(depth + 1, out),
                Node::Token(t) => {
                    out.push_str(&"  ".repeat(depth + 1));
                    out.push_str(&t.text);
                    out.push('\n');
                }
            }
        }
    }
}
