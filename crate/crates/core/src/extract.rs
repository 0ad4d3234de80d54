//! Static call-graph construction over parsed files of one snapshot.
//!
//! Identifier calls are resolved lexically (innermost scope first, with a
//! fallback to top-level functions of the other files). Property calls
//! `x.m()` are resolved field-based: they link to every function assigned to
//! a property named `m` anywhere in the snapshot.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{CallEdge, FunctionNode, HybridCallGraph, SourcePosition};
use crate::js::{parse_js_subset, Diagnostic, Expr, FunctionIndex, JsParseError, JsSubsetAst, Stmt};

pub const STATIC_TOOL_ID: &str = "static-ast";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UnresolvedReason {
    DynamicDispatch,
    EvalLike,
    UnknownName,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnresolvedCall {
    pub site: SourcePosition,
    pub callee: String,
    pub reason: UnresolvedReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedCall {
    pub site: SourcePosition,
    pub caller: SourcePosition,
    pub callees: Vec<SourcePosition>,
}

/// Line extent of a function, used to map patch lines to functions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FunctionSpan {
    pub pos: SourcePosition,
    pub end_line: u32,
}

#[derive(Debug, Clone, Default)]
pub struct StaticExtraction {
    pub graph: HybridCallGraph,
    pub unresolved: Vec<UnresolvedCall>,
    pub resolved: Vec<ResolvedCall>,
    pub spans: Vec<FunctionSpan>,
}

/// What a name is bound to in one scope.
#[derive(Debug, Default, Clone)]
struct Binding {
    functions: Vec<(usize, FunctionIndex)>,
}

/// Scope key: (file index, function index or `None` for the file scope).
type ScopeKey = (usize, Option<FunctionIndex>);

struct Tables<'a> {
    asts: &'a [JsSubsetAst],
    scopes: HashMap<ScopeKey, HashMap<String, Binding>>,
    /// Functions assigned to each property name.
    properties: HashMap<String, BTreeSet<(usize, FunctionIndex)>>,
}

/// Builds the call graph of one snapshot.
pub fn extract_call_graph(asts: &[JsSubsetAst]) -> StaticExtraction {
    let mut tables = Tables {
        asts,
        scopes: HashMap::new(),
        properties: HashMap::new(),
    };
    for (fi, ast) in asts.iter().enumerate() {
        tables.declare(fi, None);
        for idx in 0..ast.functions.len() {
            tables.declare(fi, Some(idx));
        }
    }
    for (fi, ast) in asts.iter().enumerate() {
        tables.collect_assignments(fi, None);
        for idx in 0..ast.functions.len() {
            tables.collect_assignments(fi, Some(idx));
        }
    }

    let mut graph = HybridCallGraph::new();
    graph.tool_ids.insert(STATIC_TOOL_ID.to_string());
    let mut spans = Vec::new();
    for ast in asts {
        for f in &ast.functions {
            let node = match &f.name {
                Some(name) => FunctionNode::named(f.id.clone(), name.clone()),
                None => FunctionNode::new(f.id.clone()),
            };
            graph.nodes.push(node);
            spans.push(FunctionSpan {
                pos: f.id.clone(),
                end_line: f.end_line,
            });
        }
    }

    let mut edges: BTreeSet<(SourcePosition, SourcePosition)> = BTreeSet::new();
    let mut unresolved = Vec::new();
    let mut resolved = Vec::new();
    for (fi, ast) in asts.iter().enumerate() {
        for (idx, f) in ast.functions.iter().enumerate() {
            let mut sites = Vec::new();
            for stmt in &f.body {
                calls_in_stmt(stmt, &mut sites);
            }
            for call in sites {
                let Expr::Call {
                    callee, line, column, ..
                } = call
                else {
                    continue;
                };
                let site = SourcePosition {
                    file: ast.file.clone(),
                    line: *line,
                    column: *column,
                };
                match tables.resolve(fi, idx, callee) {
                    Ok(targets) => {
                        let callees: Vec<SourcePosition> = targets
                            .into_iter()
                            .map(|(tf, ti)| asts[tf].functions[ti].id.clone())
                            .collect();
                        for target in &callees {
                            edges.insert((f.id.clone(), target.clone()));
                        }
                        resolved.push(ResolvedCall {
                            site,
                            caller: f.id.clone(),
                            callees,
                        });
                    }
                    Err(reason) => unresolved.push(UnresolvedCall {
                        site,
                        callee: callee.path_text().unwrap_or_else(|| "<expr>".into()),
                        reason,
                    }),
                }
            }
        }
    }
    graph.edges = edges
        .into_iter()
        .map(|(s, t)| CallEdge::new(s, t, STATIC_TOOL_ID, 1.0))
        .collect();
    graph.canonicalize();
    spans.sort();
    StaticExtraction {
        graph,
        unresolved,
        resolved,
        spans,
    }
}

impl Tables<'_> {
    fn parent(&self, fi: usize, scope: Option<FunctionIndex>) -> Option<Option<FunctionIndex>> {
        scope.map(|idx| self.asts[fi].functions[idx].parent)
    }

    /// First pass: names declared by a scope (parameters, `var`/`let`/`const`,
    /// function declarations, loop and catch bindings).
    fn declare(&mut self, fi: usize, scope: Option<FunctionIndex>) {
        let ast = &self.asts[fi];
        let mut names: HashMap<String, Binding> = HashMap::new();
        if let Some(idx) = scope {
            let f = &ast.functions[idx];
            if let Some(own) = &f.self_binding {
                names.entry(own.clone()).or_default().functions.push((fi, idx));
            }
            for p in &f.params {
                names.insert(p.clone(), Binding::default());
            }
        }
        declare_stmts(ast, fi, ast.body(scope), &mut names);
        self.scopes.insert((fi, scope), names);
    }

    /// Second pass: `x = function…` adds to the scope declaring `x` (the file
    /// scope for undeclared names); `a.m = function…` and object literal
    /// members feed the property table.
    fn collect_assignments(&mut self, fi: usize, scope: Option<FunctionIndex>) {
        let mut found: Vec<(Option<String>, Option<String>, FunctionIndex)> = Vec::new();
        let mut visit = |e: &Expr| match e {
            Expr::Assign { target, value } => {
                if let Some(idx) = function_of(value) {
                    match target.as_ref() {
                        Expr::Ident { name, .. } => found.push((Some(name.clone()), None, idx)),
                        Expr::Member { property, .. } => {
                            found.push((None, Some(property.clone()), idx))
                        }
                        _ => {}
                    }
                }
            }
            Expr::Object(props) => {
                for p in props {
                    if let (Some(key), Expr::Function(idx)) = (&p.key, &p.value) {
                        found.push((None, Some(key.clone()), *idx));
                    }
                }
            }
            _ => {}
        };
        for stmt in self.asts[fi].body(scope) {
            walk_stmt_exprs(stmt, &mut |e| walk_expr(e, &mut visit));
        }
        for (var, property, idx) in found {
            if let Some(var) = var {
                let mut s = scope;
                let target = loop {
                    if self.scopes[&(fi, s)].contains_key(&var) {
                        break s;
                    }
                    match self.parent(fi, s) {
                        Some(p) => s = p,
                        None => break None,
                    }
                };
                let binding = self
                    .scopes
                    .get_mut(&(fi, target))
                    .expect("scope declared")
                    .entry(var)
                    .or_default();
                if !binding.functions.contains(&(fi, idx)) {
                    binding.functions.push((fi, idx));
                }
            }
            if let Some(property) = property {
                self.properties.entry(property).or_default().insert((fi, idx));
            }
        }
    }

    fn lookup(&self, fi: usize, from: FunctionIndex, name: &str) -> Option<&Binding> {
        let mut s = Some(from);
        loop {
            if let Some(b) = self.scopes[&(fi, s)].get(name) {
                return Some(b);
            }
            s = self.parent(fi, s)?;
        }
    }

    fn resolve(
        &self,
        fi: usize,
        caller: FunctionIndex,
        callee: &Expr,
    ) -> Result<Vec<(usize, FunctionIndex)>, UnresolvedReason> {
        match callee {
            Expr::Ident { name, .. } => {
                if let Some(b) = self.lookup(fi, caller, name) {
                    return if b.functions.is_empty() {
                        Err(UnresolvedReason::DynamicDispatch)
                    } else {
                        Ok(b.functions.clone())
                    };
                }
                if name == "eval" || name == "Function" {
                    return Err(UnresolvedReason::EvalLike);
                }
                let mut global = Vec::new();
                for other in 0..self.asts.len() {
                    if other == fi {
                        continue;
                    }
                    if let Some(b) = self.scopes[&(other, None)].get(name) {
                        global.extend(b.functions.iter().copied());
                    }
                }
                if global.is_empty() {
                    Err(UnresolvedReason::UnknownName)
                } else {
                    Ok(global)
                }
            }
            Expr::Member { property, .. } => {
                if matches!(property.as_str(), "apply" | "call" | "bind") {
                    return Err(UnresolvedReason::EvalLike);
                }
                match self.properties.get(property) {
                    Some(targets) if !targets.is_empty() => Ok(targets.iter().copied().collect()),
                    _ => Err(UnresolvedReason::DynamicDispatch),
                }
            }
            Expr::Function(idx) => Ok(vec![(fi, *idx)]),
            _ => Err(UnresolvedReason::DynamicDispatch),
        }
    }
}

fn function_of(e: &Expr) -> Option<FunctionIndex> {
    match e {
        Expr::Function(idx) => Some(*idx),
        Expr::Assign { value, .. } => function_of(value),
        _ => None,
    }
}

fn declare_stmts(ast: &JsSubsetAst, fi: usize, stmts: &[Stmt], names: &mut HashMap<String, Binding>) {
    for stmt in stmts {
        match stmt {
            Stmt::FunctionDecl(idx) => {
                if let Some(name) = &ast.functions[*idx].name {
                    names.entry(name.clone()).or_default().functions.push((fi, *idx));
                }
            }
            Stmt::VarDecl(decls) => {
                for d in decls {
                    let func = d.init.as_ref().and_then(function_of);
                    for n in &d.names {
                        let b = names.entry(n.clone()).or_default();
                        if let (Some(idx), 1) = (func, d.names.len()) {
                            b.functions.push((fi, idx));
                        }
                    }
                }
            }
            Stmt::Block(body) => declare_stmts(ast, fi, body, names),
            Stmt::Control { bindings, body, .. } => {
                for n in bindings {
                    names.entry(n.clone()).or_default();
                }
                declare_stmts(ast, fi, body, names);
            }
            Stmt::Expr(_) | Stmt::Return(_) => {}
        }
    }
}

fn walk_stmt_exprs<'a>(stmt: &'a Stmt, f: &mut impl FnMut(&'a Expr)) {
    match stmt {
        Stmt::FunctionDecl(_) | Stmt::Return(None) => {}
        Stmt::VarDecl(decls) => decls.iter().filter_map(|d| d.init.as_ref()).for_each(&mut *f),
        Stmt::Expr(e) | Stmt::Return(Some(e)) => f(e),
        Stmt::Block(body) => body.iter().for_each(|s| walk_stmt_exprs(s, f)),
        Stmt::Control { exprs, body, .. } => {
            exprs.iter().for_each(&mut *f);
            body.iter().for_each(|s| walk_stmt_exprs(s, f));
        }
    }
}

/// Pre-order walk of an expression tree, not entering function bodies.
fn walk_expr<'a>(e: &'a Expr, f: &mut impl FnMut(&'a Expr)) {
    f(e);
    match e {
        Expr::Ident { .. } | Expr::Function(_) | Expr::Literal => {}
        Expr::Member { object, .. } => walk_expr(object, f),
        Expr::Index { object, index } => {
            walk_expr(object, f);
            walk_expr(index, f);
        }
        Expr::Call { callee, args, .. } => {
            walk_expr(callee, f);
            args.iter().for_each(|a| walk_expr(a, f));
        }
        Expr::Object(props) => props.iter().for_each(|p| walk_expr(&p.value, f)),
        Expr::Assign { target, value } => {
            walk_expr(target, f);
            walk_expr(value, f);
        }
        Expr::Compound(items) => items.iter().for_each(|i| walk_expr(i, f)),
    }
}

fn calls_in_stmt<'a>(stmt: &'a Stmt, out: &mut Vec<&'a Expr>) {
    walk_stmt_exprs(stmt, &mut |e| {
        walk_expr(e, &mut |x| {
            if matches!(x, Expr::Call { .. }) {
                out.push(x);
            }
        })
    });
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{source}")]
    Parse { path: String, source: JsParseError },
    #[error("walking {0}: {1}")]
    Walk(PathBuf, walkdir::Error),
}

/// Parses every `.js` file below `dir` (paths relative to `dir`) and builds
/// the snapshot's call graph. Returns the skip diagnostics per file.
pub fn extract_directory(
    dir: &Path,
) -> Result<(StaticExtraction, Vec<(String, Diagnostic)>), ExtractError> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| ExtractError::Walk(dir.to_path_buf(), e))?;
        let path = entry.path();
        if entry.file_type().is_file() && path.extension().is_some_and(|x| x == "js") {
            let rel = path
                .strip_prefix(dir)
                .unwrap_or(path)
                .to_string_lossy()
                .into_owned();
            files.push((path.to_path_buf(), rel));
        }
    }
    let asts: Vec<JsSubsetAst> = files
        .par_iter()
        .map(|(path, rel)| {
            let bytes = std::fs::read(path).map_err(|source| ExtractError::Io {
                path: path.clone(),
                source,
            })?;
            parse_js_subset(&bytes, rel).map_err(|source| ExtractError::Parse {
                path: rel.clone(),
                source,
            })
        })
        .collect::<Result<_, _>>()?;
    let mut diagnostics = Vec::new();
    for ast in &asts {
        for d in &ast.diagnostics {
            log::warn!("{}:{}", ast.file, d);
            diagnostics.push((ast.file.clone(), d.clone()));
        }
    }
    Ok((extract_call_graph(&asts), diagnostics))
}

/// Unresolved-call counts per reason, for reporting.
pub fn unresolved_summary(calls: &[UnresolvedCall]) -> BTreeMap<UnresolvedReason, usize> {
    let mut out = BTreeMap::new();
    for c in calls {
        *out.entry(c.reason).or_insert(0) += 1;
    }
    out
}
