//! Error-tolerant recursive-descent parser over the token stream.
//!
//! Bracket balance is checked up front; after that every parse error is
//! local to one statement, which is skipped with a diagnostic.

use super::lexer::{tokenize, Token, TokenKind};
use super::{
    Declarator, Diagnostic, Expr, FunctionIndex, FunctionKind, JsFunction, JsParseError,
    JsSubsetAst, Property, Stmt,
};
use crate::graph::{normalize_path, SourcePosition};

type PResult<T> = Result<T, Diagnostic>;

const ASSIGN_OPS: &[&str] = &[
    "=", "+=", "-=", "*=", "/=", "%=", "**=", "<<=", ">>=", ">>>=", "&=", "|=", "^=", "&&=", "||=",
    "??=",
];

const BINARY_OPS: &[&str] = &[
    "==", "!=", "===", "!==", "<", ">", "<=", ">=", "+", "-", "*", "/", "%", "**", "<<", ">>",
    ">>>", "&", "|", "^", "&&", "||", "??",
];

const STATEMENT_KEYWORDS: &[&str] = &[
    "function", "var", "let", "const", "return", "if", "for", "while", "do", "switch", "try",
    "throw", "class", "import", "export", "break", "continue",
];

const RESERVED: &[&str] = &[
    "if", "else", "for", "while", "do", "switch", "case", "default", "try", "catch", "finally",
    "return", "var", "const", "break", "continue", "throw", "export", "debugger", "with",
];

/// Parses one file of the supported subset.
///
/// Only unbalanced brackets and unterminated literals are fatal; other
/// unsupported constructs become [`Diagnostic`]s on the returned AST.
pub fn parse_js_subset(source: &[u8], file: &str) -> Result<JsSubsetAst, JsParseError> {
    let text = String::from_utf8_lossy(source);
    let tokens = tokenize(&text)?;
    let mut ctx = Context {
        file: normalize_path(file),
        functions: Vec::new(),
        diagnostics: Vec::new(),
        current: None,
    };
    let mut parser = Parser::new(tokens, &mut ctx)?;
    let top_level = parser.statements_until(|_| false);
    Ok(JsSubsetAst {
        file: ctx.file,
        functions: ctx.functions,
        top_level,
        diagnostics: ctx.diagnostics,
    })
}

struct Context {
    file: String,
    functions: Vec<JsFunction>,
    diagnostics: Vec<Diagnostic>,
    current: Option<FunctionIndex>,
}

struct Parser<'c> {
    toks: Vec<Token>,
    /// Index of the matching bracket for every bracket token.
    matching: Vec<usize>,
    pos: usize,
    ctx: &'c mut Context,
}

fn open_close(tok: &Token) -> Option<(bool, char)> {
    match tok.kind {
        TokenKind::Punct("(") => Some((true, '(')),
        TokenKind::Punct("[") => Some((true, '[')),
        TokenKind::Punct("{") => Some((true, '{')),
        TokenKind::Punct(")") => Some((false, '(')),
        TokenKind::Punct("]") => Some((false, '[')),
        TokenKind::Punct("}") => Some((false, '{')),
        _ => None,
    }
}

fn match_brackets(toks: &[Token]) -> Result<Vec<usize>, JsParseError> {
    let mut matching = vec![usize::MAX; toks.len()];
    let mut stack: Vec<(usize, char)> = Vec::new();
    for (i, tok) in toks.iter().enumerate() {
        match open_close(tok) {
            Some((true, kind)) => stack.push((i, kind)),
            Some((false, kind)) => match stack.pop() {
                Some((j, open)) if open == kind => {
                    matching[i] = j;
                    matching[j] = i;
                }
                _ => {
                    return Err(JsParseError {
                        line: tok.line,
                        column: tok.column,
                        message: "unbalanced closing bracket".into(),
                    })
                }
            },
            None => {}
        }
    }
    if let Some((j, _)) = stack.pop() {
        return Err(JsParseError {
            line: toks[j].line,
            column: toks[j].column,
            message: "unclosed bracket".into(),
        });
    }
    Ok(matching)
}

impl<'c> Parser<'c> {
    fn new(toks: Vec<Token>, ctx: &'c mut Context) -> Result<Self, JsParseError> {
        let matching = match_brackets(&toks)?;
        Ok(Self {
            toks,
            matching,
            pos: 0,
            ctx,
        })
    }

    // ---- token helpers -------------------------------------------------

    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&Token> {
        self.toks.get(self.pos + offset)
    }

    fn at_punct(&self, p: &str) -> bool {
        self.peek().is_some_and(|t| t.is_punct(p))
    }

    fn at_ident(&self, name: &str) -> bool {
        self.peek().is_some_and(|t| t.is_ident(name))
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_ident(&mut self, name: &str) -> bool {
        if self.at_ident(name) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn here(&self) -> (u32, u32) {
        match self.peek().or(self.toks.last()) {
            Some(t) => (t.line, t.column),
            None => (1, 1),
        }
    }

    fn error(&self, message: impl Into<String>) -> Diagnostic {
        let (line, column) = self.here();
        Diagnostic {
            line,
            column,
            message: message.into(),
        }
    }

    fn unexpected(&self) -> Diagnostic {
        match self.peek() {
            Some(t) => self.error(format!("unexpected token {:?}", t.kind)),
            None => self.error("unexpected end of input"),
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{p}`")))
        }
    }

    fn diagnose(&mut self, line: u32, column: u32, message: impl Into<String>) {
        self.ctx.diagnostics.push(Diagnostic {
            line,
            column,
            message: message.into(),
        });
    }

    fn position(&self, line: u32, column: u32) -> SourcePosition {
        SourcePosition {
            file: self.ctx.file.clone(),
            line,
            column,
        }
    }

    fn last_line(&self) -> u32 {
        self.pos
            .checked_sub(1)
            .and_then(|i| self.toks.get(i))
            .map_or(1, |t| t.line)
    }

    // ---- statements ----------------------------------------------------

    /// Parses statements until `stop` matches the next token, a `}` closes
    /// the enclosing block, or input ends.
    fn statements_until(&mut self, stop: impl Fn(&Token) -> bool) -> Vec<Stmt> {
        let mut out = Vec::new();
        while let Some(tok) = self.peek() {
            if tok.is_punct("}") || stop(tok) {
                break;
            }
            let start = self.pos;
            match self.statement() {
                Ok(Some(stmt)) => out.push(stmt),
                Ok(None) => {}
                Err(diag) => {
                    self.ctx.diagnostics.push(diag);
                    self.recover(start);
                }
            }
        }
        out
    }

    /// Skips the statement that started at `start`.
    fn recover(&mut self, start: usize) {
        self.pos = start;
        while let Some(tok) = self.peek() {
            if tok.is_punct("}") || tok.is_punct(")") || tok.is_punct("]") {
                break;
            }
            if tok.is_punct(";") {
                self.pos += 1;
                break;
            }
            if self.pos > start
                && tok.newline_before
                && tok.ident().is_some_and(|n| STATEMENT_KEYWORDS.contains(&n))
            {
                break;
            }
            if open_close(tok).is_some_and(|(open, _)| open) {
                self.pos = self.matching[self.pos] + 1;
            } else {
                self.pos += 1;
            }
        }
        if self.pos == start {
            self.pos += 1;
        }
    }

    fn statement(&mut self) -> PResult<Option<Stmt>> {
        let Some(tok) = self.peek().cloned() else {
            return Ok(None);
        };
        if tok.is_punct(";") {
            self.pos += 1;
            return Ok(None);
        }
        if tok.is_punct("{") {
            return Ok(Some(Stmt::Block(self.block()?)));
        }
        let Some(word) = tok.ident().map(str::to_string) else {
            return self.expression_statement().map(Some);
        };
        let next = self.peek_at(1).cloned();
        let next_is = |p: &str| next.as_ref().is_some_and(|t| t.is_punct(p));
        match word.as_str() {
            "function" => self.function_declaration().map(Some),
            "async"
                if next
                    .as_ref()
                    .is_some_and(|t| t.is_ident("function") && !t.newline_before) =>
            {
                self.function_declaration().map(Some)
            }
            "var" | "const" => {
                self.pos += 1;
                let decls = self.declarators()?;
                self.end_statement()?;
                Ok(Some(Stmt::VarDecl(decls)))
            }
            "let" if next.as_ref().is_some_and(|t| {
                t.ident().is_some() || t.is_punct("[") || t.is_punct("{")
            }) =>
            {
                self.pos += 1;
                let decls = self.declarators()?;
                self.end_statement()?;
                Ok(Some(Stmt::VarDecl(decls)))
            }
            "return" => {
                self.pos += 1;
                let value = match self.peek() {
                    None => None,
                    Some(t) if t.is_punct(";") || t.is_punct("}") || t.newline_before => None,
                    Some(_) => Some(self.expression()?),
                };
                self.end_statement()?;
                Ok(Some(Stmt::Return(value)))
            }
            "if" => {
                self.pos += 1;
                let cond = self.parenthesized()?;
                let mut body = self.substatement()?;
                if self.eat_ident("else") {
                    body.extend(self.substatement()?);
                }
                Ok(Some(control(vec![cond], vec![], body)))
            }
            "while" | "with" => {
                self.pos += 1;
                let cond = self.parenthesized()?;
                let body = self.substatement()?;
                Ok(Some(control(vec![cond], vec![], body)))
            }
            "do" => {
                self.pos += 1;
                let body = self.substatement()?;
                if !self.eat_ident("while") {
                    return Err(self.error("expected `while`"));
                }
                let cond = self.parenthesized()?;
                self.eat_punct(";");
                Ok(Some(control(vec![cond], vec![], body)))
            }
            "for" => self.for_statement().map(Some),
            "switch" => self.switch_statement().map(Some),
            "try" => self.try_statement().map(Some),
            "throw" => {
                self.pos += 1;
                let e = self.expression()?;
                self.end_statement()?;
                Ok(Some(Stmt::Expr(e)))
            }
            "break" | "continue" => {
                self.pos += 1;
                if self
                    .peek()
                    .is_some_and(|t| t.ident().is_some() && !t.newline_before)
                {
                    self.pos += 1;
                }
                self.end_statement()?;
                Ok(None)
            }
            "debugger" => {
                self.pos += 1;
                self.end_statement()?;
                Ok(None)
            }
            "class" => {
                self.skip_class();
                Ok(None)
            }
            "import" if !next_is("(") && !next_is(".") => {
                self.diagnose(tok.line, tok.column, "import declaration ignored");
                let start = self.pos;
                self.recover(start);
                Ok(None)
            }
            "export" => {
                self.pos += 1;
                if self.at_punct("{") || self.at_punct("*") {
                    let start = self.pos;
                    self.recover(start);
                    return Ok(None);
                }
                if self.eat_ident("default") {
                    if self.at_ident("function")
                        || self.at_ident("class")
                        || self.at_ident("async")
                    {
                        return self.statement();
                    }
                    return self.expression_statement().map(Some);
                }
                self.statement()
            }
            _ if next_is(":") && !RESERVED.contains(&word.as_str()) => {
                self.pos += 2;
                self.statement()
            }
            _ => self.expression_statement().map(Some),
        }
    }

    fn expression_statement(&mut self) -> PResult<Stmt> {
        let e = self.expression()?;
        self.end_statement()?;
        Ok(Stmt::Expr(e))
    }

    /// Accepts `;`, a closing brace, end of input, or a line break (ASI).
    fn end_statement(&mut self) -> PResult<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) if t.is_punct(";") => {
                self.pos += 1;
                Ok(())
            }
            Some(t) if t.is_punct("}") || t.newline_before => Ok(()),
            Some(_) => Err(self.unexpected()),
        }
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_punct("{")?;
        let body = self.statements_until(|_| false);
        self.expect_punct("}")?;
        Ok(body)
    }

    fn substatement(&mut self) -> PResult<Vec<Stmt>> {
        if self.at_punct("{") {
            return self.block();
        }
        Ok(self.statement()?.into_iter().collect())
    }

    fn parenthesized(&mut self) -> PResult<Expr> {
        self.expect_punct("(")?;
        let e = self.expression()?;
        self.expect_punct(")")?;
        Ok(e)
    }

    fn for_statement(&mut self) -> PResult<Stmt> {
        self.pos += 1;
        self.eat_ident("await");
        self.expect_punct("(")?;
        let mut exprs = Vec::new();
        let mut bindings = Vec::new();
        while !self.at_punct(")") {
            if self.peek().is_none() {
                return Err(self.unexpected());
            }
            if self.eat_punct(";") || self.eat_ident("of") || self.eat_ident("in") {
                continue;
            }
            if self.at_ident("var") || self.at_ident("let") || self.at_ident("const") {
                self.pos += 1;
                for decl in self.declarators()? {
                    bindings.extend(decl.names);
                    exprs.extend(decl.init);
                }
                continue;
            }
            exprs.push(self.expression()?);
        }
        self.pos += 1;
        let body = self.substatement()?;
        Ok(control(exprs, bindings, body))
    }

    fn switch_statement(&mut self) -> PResult<Stmt> {
        self.pos += 1;
        let disc = self.parenthesized()?;
        self.expect_punct("{")?;
        let mut exprs = vec![disc];
        let mut body = Vec::new();
        while !self.at_punct("}") {
            if self.eat_ident("case") {
                exprs.push(self.expression()?);
                self.expect_punct(":")?;
            } else if self.eat_ident("default") {
                self.expect_punct(":")?;
            } else {
                let before = self.pos;
                body.extend(self.statements_until(|t| t.is_ident("case") || t.is_ident("default")));
                if self.pos == before {
                    return Err(self.unexpected());
                }
            }
        }
        self.pos += 1;
        Ok(control(exprs, vec![], body))
    }

    fn try_statement(&mut self) -> PResult<Stmt> {
        self.pos += 1;
        let mut body = self.block()?;
        let mut bindings = Vec::new();
        if self.eat_ident("catch") {
            if self.at_punct("(") {
                bindings = self.binding_names_in_group();
            }
            body.extend(self.block()?);
        }
        if self.eat_ident("finally") {
            body.extend(self.block()?);
        }
        Ok(control(vec![], bindings, body))
    }

    fn skip_class(&mut self) {
        let (line, column) = self.here();
        self.diagnose(line, column, "class skipped (outside the supported subset)");
        self.pos += 1;
        while let Some(tok) = self.peek() {
            if tok.is_punct("{") {
                self.pos = self.matching[self.pos] + 1;
                return;
            }
            if open_close(tok).is_some_and(|(open, _)| open) {
                self.pos = self.matching[self.pos] + 1;
            } else {
                self.pos += 1;
            }
        }
    }

    fn declarators(&mut self) -> PResult<Vec<Declarator>> {
        let mut decls = Vec::new();
        loop {
            let names = match self.peek() {
                Some(t) if t.is_punct("{") || t.is_punct("[") => self.binding_names_in_group(),
                Some(t) => match t.ident() {
                    Some(name) => {
                        let name = name.to_string();
                        self.pos += 1;
                        vec![name]
                    }
                    None => return Err(self.unexpected()),
                },
                None => return Err(self.unexpected()),
            };
            let init = if self.eat_punct("=") {
                let value = self.assignment()?;
                if let [name] = names.as_slice() {
                    self.infer_names(&value, name);
                }
                Some(value)
            } else {
                None
            };
            decls.push(Declarator { names, init });
            if !self.eat_punct(",") {
                return Ok(decls);
            }
        }
    }

    /// Collects the identifiers bound by a bracketed pattern (parameter
    /// list, destructuring, catch clause) and skips past it. Default-value
    /// expressions are not parsed.
    fn binding_names_in_group(&mut self) -> Vec<String> {
        let close = self.matching[self.pos];
        let mut names = Vec::new();
        for i in self.pos + 1..close {
            let Some(name) = self.toks[i].ident() else {
                continue;
            };
            let prev = &self.toks[i - 1];
            let next = &self.toks[i + 1];
            let after_dot = prev.is_punct(".") || prev.is_punct("?.");
            let binds = [",", ")", "]", "}", "="].iter().any(|p| next.is_punct(p));
            let after_default = {
                // names inside default values follow `=` at some point before
                // the previous separator
                let mut j = i - 1;
                let mut seen_eq = false;
                while j > self.pos {
                    let t = &self.toks[j];
                    if t.is_punct(",") || t.is_punct("(") || t.is_punct("{") || t.is_punct("[") || t.is_punct(":") {
                        break;
                    }
                    if t.is_punct("=") {
                        seen_eq = true;
                        break;
                    }
                    j -= 1;
                }
                seen_eq
            };
            if binds && !after_dot && !after_default && name != "this" {
                names.push(name.to_string());
            }
        }
        self.pos = close + 1;
        names
    }

    fn function_declaration(&mut self) -> PResult<Stmt> {
        self.eat_ident("async");
        let (line, column) = self.here();
        self.pos += 1; // `function`
        self.eat_punct("*");
        let name = match self.peek().and_then(Token::ident) {
            Some(n) => {
                let n = n.to_string();
                self.pos += 1;
                Some(n)
            }
            None => None,
        };
        let declared = name.is_some();
        let idx = self.function(line, column, name, None, FunctionKind::Declaration, None)?;
        Ok(if declared {
            Stmt::FunctionDecl(idx)
        } else {
            Stmt::Expr(Expr::Function(idx))
        })
    }

    /// Registers a function whose header starts at `(line, column)`. The
    /// cursor is at the parameter list, or past `=>` when `arrow_params` is
    /// given.
    fn function(
        &mut self,
        line: u32,
        column: u32,
        name: Option<String>,
        self_binding: Option<String>,
        kind: FunctionKind,
        arrow_params: Option<Vec<String>>,
    ) -> PResult<FunctionIndex> {
        let idx = self.ctx.functions.len();
        self.ctx.functions.push(JsFunction {
            id: self.position(line, column),
            name,
            self_binding,
            kind,
            params: Vec::new(),
            body: Vec::new(),
            end_line: line,
            parent: self.ctx.current,
        });
        let saved = self.ctx.current.replace(idx);
        let parts = self.function_parts(arrow_params);
        self.ctx.current = saved;
        let (params, body, end_line) = parts?;
        let f = &mut self.ctx.functions[idx];
        f.params = params;
        f.body = body;
        f.end_line = end_line;
        Ok(idx)
    }

    fn function_parts(
        &mut self,
        arrow_params: Option<Vec<String>>,
    ) -> PResult<(Vec<String>, Vec<Stmt>, u32)> {
        let params = match arrow_params {
            Some(p) => p,
            None => {
                if !self.at_punct("(") {
                    return Err(self.error("expected parameter list"));
                }
                self.binding_names_in_group()
            }
        };
        if self.at_punct("{") {
            let body = self.block()?;
            return Ok((params, body, self.last_line()));
        }
        // concise arrow body
        let value = self.assignment()?;
        Ok((params, vec![Stmt::Return(Some(value))], self.last_line()))
    }

    /// Gives anonymous functions the name they are bound to. Object literal
    /// members get `prefix.key`.
    fn infer_names(&mut self, value: &Expr, prefix: &str) {
        match value {
            Expr::Function(idx) => {
                let f = &mut self.ctx.functions[*idx];
                if f.self_binding.is_none() && f.kind != FunctionKind::Declaration {
                    f.name = Some(prefix.to_string());
                }
            }
            Expr::Object(props) => {
                for prop in props {
                    if let Some(key) = &prop.key {
                        self.infer_names(&prop.value, &format!("{prefix}.{key}"));
                    }
                }
            }
            _ => {}
        }
    }

    // ---- expressions ---------------------------------------------------

    fn expression(&mut self) -> PResult<Expr> {
        let first = self.assignment()?;
        if !self.at_punct(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_punct(",") {
            items.push(self.assignment()?);
        }
        Ok(Expr::Compound(items))
    }

    fn assignment(&mut self) -> PResult<Expr> {
        if let Some(arrow) = self.try_arrow()? {
            return Ok(arrow);
        }
        let target = self.conditional()?;
        let is_assign = self
            .peek()
            .is_some_and(|t| ASSIGN_OPS.iter().any(|op| t.is_punct(op)));
        if !is_assign {
            return Ok(target);
        }
        self.pos += 1;
        let value = self.assignment()?;
        if let Some(path) = target.path_text() {
            self.infer_names(&value, &path);
        }
        Ok(Expr::Assign {
            target: Box::new(target),
            value: Box::new(value),
        })
    }

    /// Recognizes `x => …`, `(a, b) => …` and their `async` forms.
    fn try_arrow(&mut self) -> PResult<Option<Expr>> {
        let mut i = self.pos;
        if self.toks.get(i).is_some_and(|t| t.is_ident("async"))
            && self
                .toks
                .get(i + 1)
                .is_some_and(|t| !t.newline_before && (t.ident().is_some() || t.is_punct("(")))
        {
            i += 1;
        }
        let Some(tok) = self.toks.get(i) else {
            return Ok(None);
        };
        let (params_end, single) = if tok.is_punct("(") {
            (self.matching[i], false)
        } else if tok.ident().is_some() {
            (i, true)
        } else {
            return Ok(None);
        };
        if !self.toks.get(params_end + 1).is_some_and(|t| t.is_punct("=>")) {
            return Ok(None);
        }
        let (line, column) = (tok.line, tok.column);
        self.pos = i;
        let params = if single {
            let name = tok.ident().unwrap_or_default().to_string();
            self.pos += 1;
            vec![name]
        } else {
            self.binding_names_in_group()
        };
        self.pos += 1; // `=>`
        let idx = self.function(line, column, None, None, FunctionKind::Arrow, Some(params))?;
        Ok(Some(Expr::Function(idx)))
    }

    fn conditional(&mut self) -> PResult<Expr> {
        let cond = self.binary()?;
        if !self.eat_punct("?") {
            return Ok(cond);
        }
        let then = self.assignment()?;
        self.expect_punct(":")?;
        let otherwise = self.assignment()?;
        Ok(Expr::Compound(vec![cond, then, otherwise]))
    }

    fn binary(&mut self) -> PResult<Expr> {
        let first = self.unary()?;
        let mut items = vec![first];
        while self.peek().is_some_and(|t| {
            BINARY_OPS.iter().any(|op| t.is_punct(op)) || t.is_ident("in") || t.is_ident("instanceof")
        }) {
            self.pos += 1;
            items.push(self.unary()?);
        }
        Ok(if items.len() == 1 {
            items.pop().expect("one item")
        } else {
            Expr::Compound(items)
        })
    }

    fn unary(&mut self) -> PResult<Expr> {
        let prefix = self.peek().is_some_and(|t| {
            ["!", "-", "+", "~", "++", "--", "..."]
                .iter()
                .any(|p| t.is_punct(p))
                || ["typeof", "void", "delete", "await"]
                    .iter()
                    .any(|k| t.is_ident(k))
        });
        if prefix {
            self.pos += 1;
            return self.unary();
        }
        if self.at_ident("yield") {
            self.pos += 1;
            self.eat_punct("*");
            let ends = match self.peek() {
                None => true,
                Some(t) => {
                    t.newline_before
                        || [")", "]", "}", ",", ";", ":"].iter().any(|p| t.is_punct(p))
                }
            };
            return if ends { Ok(Expr::Literal) } else { self.assignment() };
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let (line, column) = self.here();
        let mut e = self.primary()?;
        while let Some(tok) = self.peek().cloned() {
            if tok.is_punct(".") || tok.is_punct("?.") {
                self.pos += 1;
                if tok.is_punct("?.") && (self.at_punct("(") || self.at_punct("[")) {
                    continue;
                }
                self.eat_punct("#");
                match self.peek().and_then(Token::ident) {
                    Some(name) => {
                        let property = name.to_string();
                        self.pos += 1;
                        e = Expr::Member {
                            object: Box::new(e),
                            property,
                        };
                    }
                    None => return Err(self.error("expected property name")),
                }
            } else if tok.is_punct("[") {
                e = self.index_access(e)?;
            } else if tok.is_punct("(") {
                let args = self.arguments()?;
                e = Expr::Call {
                    callee: Box::new(e),
                    args,
                    is_new: false,
                    line,
                    column,
                };
            } else if let TokenKind::Template(subs) = &tok.kind {
                self.pos += 1;
                let mut items = vec![e];
                items.extend(self.template_parts(subs.clone())?);
                e = Expr::Compound(items);
            } else if (tok.is_punct("++") || tok.is_punct("--")) && !tok.newline_before {
                self.pos += 1;
            } else if tok.is_punct("!") && !tok.newline_before {
                // TypeScript-style non-null assertion
                self.pos += 1;
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn index_access(&mut self, object: Expr) -> PResult<Expr> {
        self.expect_punct("[")?;
        let literal_key = match (self.peek(), self.peek_at(1)) {
            (Some(Token { kind: TokenKind::Str(s), .. }), Some(close)) if close.is_punct("]") => {
                Some(s.clone())
            }
            _ => None,
        };
        if let Some(property) = literal_key {
            self.pos += 2;
            return Ok(Expr::Member {
                object: Box::new(object),
                property,
            });
        }
        let index = self.expression()?;
        self.expect_punct("]")?;
        Ok(Expr::Index {
            object: Box::new(object),
            index: Box::new(index),
        })
    }

    fn arguments(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        while !self.at_punct(")") {
            args.push(self.assignment()?);
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn template_parts(&mut self, subs: Vec<Vec<Token>>) -> PResult<Vec<Expr>> {
        let mut out = Vec::new();
        for tokens in subs {
            if tokens.is_empty() {
                continue;
            }
            let mut sub = Parser::new(tokens, self.ctx).map_err(|e| Diagnostic {
                line: e.line,
                column: e.column,
                message: e.message,
            })?;
            let e = sub.expression()?;
            if sub.peek().is_some() {
                return Err(sub.unexpected());
            }
            out.push(e);
        }
        Ok(out)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected());
        };
        match &tok.kind {
            TokenKind::Number | TokenKind::Regex | TokenKind::Str(_) => {
                self.pos += 1;
                Ok(Expr::Literal)
            }
            TokenKind::Template(subs) => {
                self.pos += 1;
                Ok(Expr::Compound(self.template_parts(subs.clone())?))
            }
            TokenKind::Punct("(") => {
                self.pos += 1;
                let e = self.expression()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            TokenKind::Punct("[") => {
                self.pos += 1;
                let mut items = Vec::new();
                while !self.at_punct("]") {
                    if self.eat_punct(",") {
                        continue;
                    }
                    items.push(self.assignment()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
                self.expect_punct("]")?;
                Ok(Expr::Compound(items))
            }
            TokenKind::Punct("{") => self.object_literal(),
            TokenKind::Ident(word) => match word.as_str() {
                "function" => self.function_expression(),
                "async"
                    if self
                        .peek_at(1)
                        .is_some_and(|t| t.is_ident("function") && !t.newline_before) =>
                {
                    self.function_expression()
                }
                "class" => {
                    self.skip_class();
                    Ok(Expr::Literal)
                }
                "new" => self.new_expression(),
                "null" | "true" | "false" => {
                    self.pos += 1;
                    Ok(Expr::Literal)
                }
                w if RESERVED.contains(&w) => Err(self.unexpected()),
                _ => {
                    self.pos += 1;
                    Ok(Expr::Ident {
                        name: word.clone(),
                        line: tok.line,
                        column: tok.column,
                    })
                }
            },
            _ => Err(self.unexpected()),
        }
    }

    fn function_expression(&mut self) -> PResult<Expr> {
        self.eat_ident("async");
        let (line, column) = self.here();
        self.pos += 1; // `function`
        self.eat_punct("*");
        let name = match self.peek().and_then(Token::ident) {
            Some(n) => {
                let n = n.to_string();
                self.pos += 1;
                Some(n)
            }
            None => None,
        };
        let idx = self.function(
            line,
            column,
            name.clone(),
            name,
            FunctionKind::Expression,
            None,
        )?;
        Ok(Expr::Function(idx))
    }

    fn new_expression(&mut self) -> PResult<Expr> {
        let (line, column) = self.here();
        self.pos += 1; // `new`
        if self.eat_punct(".") {
            // new.target
            self.pos += 1;
            return Ok(Expr::Literal);
        }
        let mut callee = if self.at_ident("new") {
            self.new_expression()?
        } else {
            self.primary()?
        };
        loop {
            if self.eat_punct(".") {
                match self.peek().and_then(Token::ident) {
                    Some(name) => {
                        let property = name.to_string();
                        self.pos += 1;
                        callee = Expr::Member {
                            object: Box::new(callee),
                            property,
                        };
                    }
                    None => return Err(self.error("expected property name")),
                }
            } else if self.at_punct("[") {
                callee = self.index_access(callee)?;
            } else {
                break;
            }
        }
        let args = if self.at_punct("(") {
            self.arguments()?
        } else {
            Vec::new()
        };
        Ok(Expr::Call {
            callee: Box::new(callee),
            args,
            is_new: true,
            line,
            column,
        })
    }

    fn object_literal(&mut self) -> PResult<Expr> {
        self.expect_punct("{")?;
        let mut props = Vec::new();
        while !self.at_punct("}") {
            if self.eat_punct("...") {
                props.push(Property {
                    key: None,
                    value: self.assignment()?,
                });
            } else {
                props.push(self.object_member()?);
            }
            if !self.eat_punct(",") {
                break;
            }
        }
        self.expect_punct("}")?;
        Ok(Expr::Object(props))
    }

    fn object_member(&mut self) -> PResult<Property> {
        let is_modifier = |t: &Token| t.is_ident("get") || t.is_ident("set") || t.is_ident("async");
        if self.peek().is_some_and(is_modifier)
            && self.peek_at(1).is_some_and(|t| {
                !["(", ":", ",", "}", "="].iter().any(|p| t.is_punct(p))
            })
        {
            self.pos += 1;
        }
        self.eat_punct("*");
        let Some(tok) = self.peek().cloned() else {
            return Err(self.unexpected());
        };
        let (key, shorthand) = match &tok.kind {
            TokenKind::Ident(name) => {
                self.pos += 1;
                (Some(name.clone()), Some(tok.clone()))
            }
            TokenKind::Str(s) => {
                self.pos += 1;
                (Some(s.clone()), None)
            }
            TokenKind::Number => {
                self.pos += 1;
                (None, None)
            }
            TokenKind::Punct("[") => {
                self.pos += 1;
                let computed = self.assignment()?;
                self.expect_punct("]")?;
                if self.eat_punct(":") {
                    let value = self.assignment()?;
                    return Ok(Property {
                        key: None,
                        value: Expr::Compound(vec![computed, value]),
                    });
                }
                (None, None)
            }
            _ => return Err(self.unexpected()),
        };
        if self.at_punct("(") {
            let (line, column) = self.here();
            let idx = self.function(line, column, key.clone(), None, FunctionKind::Method, None)?;
            return Ok(Property {
                key,
                value: Expr::Function(idx),
            });
        }
        if self.eat_punct(":") {
            let value = self.assignment()?;
            if let Some(k) = &key {
                self.infer_names(&value, k);
            }
            return Ok(Property { key, value });
        }
        if self.eat_punct("=") {
            let value = self.assignment()?;
            return Ok(Property { key: None, value });
        }
        match shorthand {
            Some(t) => Ok(Property {
                key: key.clone(),
                value: Expr::Ident {
                    name: key.unwrap_or_default(),
                    line: t.line,
                    column: t.column,
                },
            }),
            None => Err(self.unexpected()),
        }
    }
}

fn control(exprs: Vec<Expr>, bindings: Vec<String>, body: Vec<Stmt>) -> Stmt {
    Stmt::Control {
        exprs,
        bindings,
        body,
    }
}
