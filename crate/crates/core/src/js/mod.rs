//! A small JavaScript front end: enough of the language to find functions,
//! their names, and the call sites inside them.
//!
//! Supported: function declarations and expressions, arrow functions,
//! object-literal methods, `var`/`let`/`const`, assignments, calls, member
//! calls, `new`, `return`, blocks, and the usual control-flow statements
//! (their headers and bodies are walked for calls). Classes, imports and
//! anything unparsable are skipped with a diagnostic.

mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

use crate::graph::SourcePosition;

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::parse_js_subset;

/// Fatal parse failure (unbalanced brackets or an unterminated literal).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct JsParseError {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

/// A construct that was skipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub line: u32,
    pub column: u32,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

pub type FunctionIndex = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Declaration,
    Expression,
    Arrow,
    Method,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JsFunction {
    /// Position of the `function` keyword, or of the parameter list for
    /// arrows and methods.
    pub id: SourcePosition,
    /// Declared or inferred display name.
    pub name: Option<String>,
    /// Name bound inside a named function expression's own scope.
    pub self_binding: Option<String>,
    pub kind: FunctionKind,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    pub end_line: u32,
    pub parent: Option<FunctionIndex>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declarator {
    pub names: Vec<String>,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stmt {
    FunctionDecl(FunctionIndex),
    VarDecl(Vec<Declarator>),
    Expr(Expr),
    Return(Option<Expr>),
    Block(Vec<Stmt>),
    /// Control flow: header expressions, names bound by the header (loop
    /// variables, catch parameters) and nested statements.
    Control {
        exprs: Vec<Expr>,
        bindings: Vec<String>,
        body: Vec<Stmt>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Property {
    pub key: Option<String>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Ident {
        name: String,
        line: u32,
        column: u32,
    },
    /// `object.property`, also `object["literal"]`.
    Member {
        object: Box<Expr>,
        property: String,
    },
    Index {
        object: Box<Expr>,
        index: Box<Expr>,
    },
    Call {
        callee: Box<Expr>,
        args: Vec<Expr>,
        is_new: bool,
        line: u32,
        column: u32,
    },
    Function(FunctionIndex),
    Object(Vec<Property>),
    Assign {
        target: Box<Expr>,
        value: Box<Expr>,
    },
    /// Any other composite (operators, arrays, templates, sequences).
    Compound(Vec<Expr>),
    Literal,
}

impl Expr {
    /// Dotted text of an identifier/member chain, e.g. `a.b.c`.
    pub fn path_text(&self) -> Option<String> {
        match self {
            Expr::Ident { name, .. } => Some(name.clone()),
            Expr::Member { object, property } => {
                Some(format!("{}.{}", object.path_text()?, property))
            }
            _ => None,
        }
    }

    /// Calls `f` on each direct child expression. Function bodies are not
    /// entered.
    pub fn for_each_child(&self, mut f: impl FnMut(&Expr)) {
        match self {
            Expr::Ident { .. } | Expr::Function(_) | Expr::Literal => {}
            Expr::Member { object, .. } => f(object),
            Expr::Index { object, index } => {
                f(object);
                f(index);
            }
            Expr::Call { callee, args, .. } => {
                f(callee);
                args.iter().for_each(f);
            }
            Expr::Object(props) => props.iter().for_each(|p| f(&p.value)),
            Expr::Assign { target, value } => {
                f(target);
                f(value);
            }
            Expr::Compound(items) => items.iter().for_each(f),
        }
    }
}

/// Parsed form of one file.
#[derive(Debug, Clone, PartialEq)]
pub struct JsSubsetAst {
    pub file: String,
    pub functions: Vec<JsFunction>,
    pub top_level: Vec<Stmt>,
    pub diagnostics: Vec<Diagnostic>,
}

impl JsSubsetAst {
    /// Statements of a function body, or of the file when `None`.
    pub fn body(&self, function: Option<FunctionIndex>) -> &[Stmt] {
        match function {
            Some(i) => &self.functions[i].body,
            None => &self.top_level,
        }
    }
}
