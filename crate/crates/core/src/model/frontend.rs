//! Python frontend: rustpython AST to [`ProgramModel`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use rustpython_parser::ast::{self, Expr, Ranged, Stmt};
use rustpython_parser::text_size::{TextRange, TextSize};
use rustpython_parser::Parse;

use super::terms::{collect_terms, slice};
use super::walk::{arguments_defaults, children, target_names};
use super::{
    AssignmentRecord, BranchKind, BranchSite, CallSite, ClassRecord, LineSpan, MethodRecord, ModelError, Parameter,
    ProgramModel, ReturnRecord,
};
use crate::coverage::BranchOutcomeId;

pub(crate) fn parse_suite(source: &str, path: &str) -> Result<ast::Suite, ModelError> {
    ast::Suite::parse(source, path).map_err(|e| {
        let lines = LineIndex::new(source);
        let offset = usize::from(e.offset).min(source.len());
        ModelError::Syntax { line: lines.line(offset), column: lines.column(offset), message: e.error.to_string() }
    })
}

/// Names of every `def` in the suite, including methods and nested functions.
pub(crate) fn function_names(suite: &[Stmt]) -> Vec<String> {
    let mut out = Vec::new();
    fn go(stmts: &[Stmt], out: &mut Vec<String>) {
        for s in stmts {
            match s {
                Stmt::FunctionDef(f) => {
                    out.push(f.name.to_string());
                    go(&f.body, out);
                }
                Stmt::AsyncFunctionDef(f) => {
                    out.push(f.name.to_string());
                    go(&f.body, out);
                }
                Stmt::ClassDef(c) => go(&c.body, out),
                other => {
                    let mut exprs = Vec::new();
                    let mut blocks = Vec::new();
                    stmt_parts(other, &mut exprs, &mut blocks);
                    blocks.into_iter().for_each(|b| go(b, out));
                }
            }
        }
    }
    go(suite, &mut out);
    out
}

struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    fn new(source: &str) -> Self {
        let mut starts = vec![0];
        starts.extend(source.match_indices('\n').map(|(i, _)| i + 1));
        Self { starts }
    }

    fn line(&self, offset: usize) -> usize {
        self.starts.partition_point(|&s| s <= offset)
    }

    fn column(&self, offset: usize) -> usize {
        offset - self.starts[self.line(offset) - 1] + 1
    }

    fn line_start(&self, offset: usize) -> usize {
        self.starts[self.line(offset) - 1]
    }
}

fn off(size: TextSize) -> usize {
    usize::from(size)
}

/// Expressions evaluated directly by `stmt` and the statement blocks it owns.
/// Definitions are handled by callers.
fn stmt_parts<'a>(stmt: &'a Stmt, exprs: &mut Vec<&'a Expr>, blocks: &mut Vec<&'a [Stmt]>) {
    match stmt {
        Stmt::FunctionDef(_) | Stmt::AsyncFunctionDef(_) | Stmt::ClassDef(_) => {}
        Stmt::Return(s) => exprs.extend(s.value.as_deref()),
        Stmt::Delete(s) => exprs.extend(&s.targets),
        Stmt::Assign(s) => {
            exprs.extend(&s.targets);
            exprs.push(&s.value);
        }
        Stmt::TypeAlias(s) => exprs.push(&s.value),
        Stmt::AugAssign(s) => {
            exprs.push(&s.target);
            exprs.push(&s.value);
        }
        Stmt::AnnAssign(s) => {
            exprs.push(&s.target);
            exprs.extend(s.value.as_deref());
        }
        Stmt::For(s) => {
            exprs.push(&s.target);
            exprs.push(&s.iter);
            blocks.push(&s.body);
            blocks.push(&s.orelse);
        }
        Stmt::AsyncFor(s) => {
            exprs.push(&s.target);
            exprs.push(&s.iter);
            blocks.push(&s.body);
            blocks.push(&s.orelse);
        }
        Stmt::While(s) => {
            exprs.push(&s.test);
            blocks.push(&s.body);
            blocks.push(&s.orelse);
        }
        Stmt::If(s) => {
            exprs.push(&s.test);
            blocks.push(&s.body);
            blocks.push(&s.orelse);
        }
        Stmt::With(s) => {
            for item in &s.items {
                exprs.push(&item.context_expr);
                exprs.extend(item.optional_vars.as_deref());
            }
            blocks.push(&s.body);
        }
        Stmt::AsyncWith(s) => {
            for item in &s.items {
                exprs.push(&item.context_expr);
                exprs.extend(item.optional_vars.as_deref());
            }
            blocks.push(&s.body);
        }
        Stmt::Match(s) => {
            exprs.push(&s.subject);
            for case in &s.cases {
                exprs.extend(case.guard.as_deref());
                blocks.push(&case.body);
            }
        }
        Stmt::Raise(s) => {
            exprs.extend(s.exc.as_deref());
            exprs.extend(s.cause.as_deref());
        }
        Stmt::Try(s) => {
            blocks.push(&s.body);
            for ast::ExceptHandler::ExceptHandler(h) in &s.handlers {
                exprs.extend(h.type_.as_deref());
                blocks.push(&h.body);
            }
            blocks.push(&s.orelse);
            blocks.push(&s.finalbody);
        }
        Stmt::TryStar(s) => {
            blocks.push(&s.body);
            for ast::ExceptHandler::ExceptHandler(h) in &s.handlers {
                exprs.extend(h.type_.as_deref());
                blocks.push(&h.body);
            }
            blocks.push(&s.orelse);
            blocks.push(&s.finalbody);
        }
        Stmt::Assert(s) => {
            exprs.push(&s.test);
            exprs.extend(s.msg.as_deref());
        }
        Stmt::Expr(s) => exprs.push(&s.value),
        Stmt::Import(_)
        | Stmt::ImportFrom(_)
        | Stmt::Global(_)
        | Stmt::Nonlocal(_)
        | Stmt::Pass(_)
        | Stmt::Break(_)
        | Stmt::Continue(_) => {}
    }
}

#[derive(Clone, Copy)]
struct DefNode<'a> {
    name: &'a str,
    args: &'a ast::Arguments,
    body: &'a [Stmt],
    decorators: &'a [Expr],
    range: TextRange,
}

#[derive(Clone, Copy)]
enum FuncNode<'a> {
    Def(DefNode<'a>),
    Lambda(&'a ast::ExprLambda),
}

impl<'a> FuncNode<'a> {
    fn args(&self) -> &'a ast::Arguments {
        match self {
            FuncNode::Def(d) => d.args,
            FuncNode::Lambda(l) => &l.args,
        }
    }
}

struct FuncDecl<'a> {
    qualified: String,
    simple: String,
    /// Class whose body directly contains this definition.
    class: Option<String>,
    /// Enclosing function (not class) scope.
    parent_fn: Option<usize>,
    node: FuncNode<'a>,
}

struct ClassDecl<'a> {
    qualified: String,
    simple: String,
    parent_fn: Option<usize>,
    node: &'a ast::StmtClassDef,
}

#[derive(Clone)]
struct Scope {
    prefix: String,
    class: Option<String>,
    parent_fn: Option<usize>,
}

impl Scope {
    fn join(&self, name: &str) -> String {
        if self.prefix.is_empty() {
            name.to_string()
        } else {
            format!("{}.{name}", self.prefix)
        }
    }
}

#[derive(Default)]
struct Collector<'a> {
    funcs: Vec<FuncDecl<'a>>,
    classes: Vec<ClassDecl<'a>>,
    imports: HashSet<String>,
    taken: HashMap<String, usize>,
    lambda_counters: HashMap<String, usize>,
}

impl<'a> Collector<'a> {
    /// Later definitions with an already used name get a `#n` suffix.
    fn unique(&mut self, name: String) -> String {
        let n = self.taken.entry(name.clone()).or_insert(0);
        *n += 1;
        if *n == 1 {
            name
        } else {
            format!("{name}#{n}")
        }
    }

    fn stmts(&mut self, stmts: &'a [Stmt], scope: &Scope) {
        for s in stmts {
            self.stmt(s, scope);
        }
    }

    fn def(&mut self, def: DefNode<'a>, scope: &Scope) {
        for d in def.decorators {
            self.exprs(d, scope);
        }
        arguments_defaults(def.args, &mut |d| self.exprs(d, scope));
        let qualified = self.unique(scope.join(def.name));
        let idx = self.funcs.len();
        self.funcs.push(FuncDecl {
            qualified: qualified.clone(),
            simple: def.name.to_string(),
            class: scope.class.clone(),
            parent_fn: scope.parent_fn,
            node: FuncNode::Def(def),
        });
        let inner = Scope { prefix: qualified, class: None, parent_fn: Some(idx) };
        self.stmts(def.body, &inner);
    }

    fn stmt(&mut self, stmt: &'a Stmt, scope: &Scope) {
        match stmt {
            Stmt::FunctionDef(f) => self.def(
                DefNode {
                    name: f.name.as_str(),
                    args: &f.args,
                    body: &f.body,
                    decorators: &f.decorator_list,
                    range: f.range,
                },
                scope,
            ),
            Stmt::AsyncFunctionDef(f) => self.def(
                DefNode {
                    name: f.name.as_str(),
                    args: &f.args,
                    body: &f.body,
                    decorators: &f.decorator_list,
                    range: f.range,
                },
                scope,
            ),
            Stmt::ClassDef(c) => {
                for e in c.decorator_list.iter().chain(&c.bases) {
                    self.exprs(e, scope);
                }
                let qualified = self.unique(scope.join(c.name.as_str()));
                self.classes.push(ClassDecl {
                    qualified: qualified.clone(),
                    simple: c.name.to_string(),
                    parent_fn: scope.parent_fn,
                    node: c,
                });
                let inner = Scope { prefix: qualified.clone(), class: Some(qualified), parent_fn: scope.parent_fn };
                self.stmts(&c.body, &inner);
            }
            Stmt::Import(i) => {
                for alias in &i.names {
                    let bound = alias.asname.as_ref().unwrap_or(&alias.name);
                    self.imports.insert(bound.split('.').next().unwrap_or_default().to_string());
                }
            }
            Stmt::ImportFrom(i) => {
                for alias in &i.names {
                    let bound = alias.asname.as_ref().unwrap_or(&alias.name);
                    self.imports.insert(bound.to_string());
                }
            }
            other => {
                let mut exprs = Vec::new();
                let mut blocks = Vec::new();
                stmt_parts(other, &mut exprs, &mut blocks);
                for e in exprs {
                    self.exprs(e, scope);
                }
                for b in blocks {
                    self.stmts(b, scope);
                }
            }
        }
    }

    /// Finds lambdas inside an expression.
    fn exprs(&mut self, expr: &'a Expr, scope: &Scope) {
        if let Expr::Lambda(l) = expr {
            arguments_defaults(&l.args, &mut |d| self.exprs(d, scope));
            let counter = self.lambda_counters.entry(scope.prefix.clone()).or_insert(0);
            let name = format!("<lambda_{counter}>");
            *counter += 1;
            let qualified = self.unique(scope.join(&name));
            let idx = self.funcs.len();
            self.funcs.push(FuncDecl {
                qualified: qualified.clone(),
                simple: name,
                class: None,
                parent_fn: scope.parent_fn,
                node: FuncNode::Lambda(l),
            });
            let inner = Scope { prefix: qualified, class: None, parent_fn: Some(idx) };
            self.exprs(&l.body, &inner);
            return;
        }
        children(expr, &mut |c| self.exprs(c, scope));
    }
}

#[derive(Default)]
struct ClassInfo {
    methods: HashMap<String, String>,
    bases: Vec<String>,
    attr_types: HashMap<String, String>,
}

enum Binding {
    Function(String),
    Class(String),
}

/// In-file name resolution: lexical function scopes, then module level.
struct Resolver<'a, 'c> {
    collector: &'c Collector<'a>,
    classes: HashMap<String, ClassInfo>,
    /// Definitions directly inside a function body, keyed by that function.
    nested: HashMap<usize, HashMap<String, Binding>>,
    module: HashMap<String, Binding>,
    methods_by_name: HashMap<String, Vec<String>>,
}

enum ReceiverType {
    Class(String),
    External,
    Unknown,
}

/// Per-function facts used while resolving calls.
struct FnContext {
    idx: usize,
    class: Option<String>,
    receiver: Option<String>,
    local_types: HashMap<String, String>,
}

impl<'a, 'c> Resolver<'a, 'c> {
    fn new(collector: &'c Collector<'a>) -> Self {
        let mut r = Resolver {
            collector,
            classes: HashMap::new(),
            nested: HashMap::new(),
            module: HashMap::new(),
            methods_by_name: HashMap::new(),
        };
        for f in &collector.funcs {
            if matches!(f.node, FuncNode::Lambda(_)) {
                continue;
            }
            match (&f.class, f.parent_fn) {
                (Some(c), _) => {
                    r.classes.entry(c.clone()).or_default().methods.insert(f.simple.clone(), f.qualified.clone());
                    r.methods_by_name.entry(f.simple.clone()).or_default().push(f.qualified.clone());
                }
                (None, Some(p)) => {
                    r.nested.entry(p).or_default().insert(f.simple.clone(), Binding::Function(f.qualified.clone()));
                }
                (None, None) => {
                    r.module.insert(f.simple.clone(), Binding::Function(f.qualified.clone()));
                }
            }
        }
        for c in &collector.classes {
            r.classes.entry(c.qualified.clone()).or_default();
            let binding = Binding::Class(c.qualified.clone());
            match c.parent_fn {
                Some(p) => {
                    r.nested.entry(p).or_default().insert(c.simple.clone(), binding);
                }
                None if !c.qualified.contains('.') => {
                    r.module.insert(c.simple.clone(), binding);
                }
                None => {}
            }
        }
        for c in &collector.classes {
            let bases: Vec<String> = c
                .node
                .bases
                .iter()
                .filter_map(|b| match b {
                    Expr::Name(n) => match r.lookup_in(c.parent_fn, n.id.as_str()) {
                        Some(Binding::Class(q)) => Some(q.clone()),
                        _ => None,
                    },
                    _ => None,
                })
                .collect();
            r.classes.get_mut(&c.qualified).expect("class registered").bases = bases;
        }
        let mut attr_types: Vec<(String, String, String)> = Vec::new();
        for (idx, f) in collector.funcs.iter().enumerate() {
            let (Some(class), FuncNode::Def(def)) = (&f.class, f.node) else { continue };
            let ctx = r.context(idx);
            let Some(receiver) = ctx.receiver.as_deref() else { continue };
            let mut assigns = Vec::new();
            collect_simple_assigns(def.body, &mut assigns);
            for (target, value) in assigns {
                let Expr::Attribute(a) = target else { continue };
                if !matches!(a.value.as_ref(), Expr::Name(n) if n.id.as_str() == receiver) {
                    continue;
                }
                let ty = match value {
                    Expr::Name(n) => ctx.local_types.get(n.id.as_str()).cloned(),
                    other => r.constructed_class(idx, other),
                };
                if let Some(ty) = ty {
                    attr_types.push((class.clone(), a.attr.to_string(), ty));
                }
            }
        }
        for (class, attr, ty) in attr_types {
            r.classes.get_mut(&class).expect("class registered").attr_types.entry(attr).or_insert(ty);
        }
        r
    }

    fn parent_chain(&self, idx: Option<usize>) -> Vec<usize> {
        let mut out = Vec::new();
        let mut cur = idx;
        while let Some(i) = cur {
            out.push(i);
            cur = self.collector.funcs[i].parent_fn;
        }
        out
    }

    fn lookup_in(&self, scope: Option<usize>, name: &str) -> Option<&Binding> {
        for i in self.parent_chain(scope) {
            if let Some(b) = self.nested.get(&i).and_then(|m| m.get(name)) {
                return Some(b);
            }
        }
        self.module.get(name)
    }

    fn class_named(&self, scope: Option<usize>, name: &str) -> Option<String> {
        match self.lookup_in(scope, name) {
            Some(Binding::Class(q)) => Some(q.clone()),
            _ => None,
        }
    }

    /// `K(...)` where `K` names an in-file class.
    fn constructed_class(&self, idx: usize, value: &Expr) -> Option<String> {
        match value {
            Expr::Call(c) => match c.func.as_ref() {
                Expr::Name(n) => self.class_named(Some(idx), n.id.as_str()),
                _ => None,
            },
            _ => None,
        }
    }

    fn annotation_class(&self, idx: usize, annotation: &Expr) -> Option<String> {
        match annotation {
            Expr::Name(n) => self.class_named(Some(idx), n.id.as_str()),
            Expr::Constant(c) => match &c.value {
                ast::Constant::Str(s) => self.class_named(Some(idx), s.trim()),
                _ => None,
            },
            _ => None,
        }
    }

    fn context(&self, idx: usize) -> FnContext {
        let decl = &self.collector.funcs[idx];
        let receiver = receiver_name(decl);
        let mut local_types = HashMap::new();
        let args = decl.node.args();
        for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
            if let Some(ann) = &a.def.annotation {
                if let Some(k) = self.annotation_class(idx, ann) {
                    local_types.insert(a.def.arg.to_string(), k);
                }
            }
        }
        if let FuncNode::Def(def) = decl.node {
            let mut assigns = Vec::new();
            collect_simple_assigns(def.body, &mut assigns);
            for (target, value) in assigns {
                if let (Expr::Name(n), Some(k)) = (target, self.constructed_class(idx, value)) {
                    local_types.entry(n.id.to_string()).or_insert(k);
                }
            }
            collect_annotated(def.body, &mut |name, ann| {
                if let Some(k) = self.annotation_class(idx, ann) {
                    local_types.entry(name.to_string()).or_insert(k);
                }
            });
        }
        FnContext { idx, class: decl.class.clone(), receiver, local_types }
    }

    /// Looks `name` up in `class` and its in-file bases, breadth first.
    fn lookup_method(&self, class: &str, name: &str) -> Option<String> {
        let mut queue = vec![class.to_string()];
        let mut seen = HashSet::new();
        while let Some(c) = queue.first().cloned() {
            queue.remove(0);
            if !seen.insert(c.clone()) {
                continue;
            }
            let info = self.classes.get(&c)?;
            if let Some(m) = info.methods.get(name) {
                return Some(m.clone());
            }
            queue.extend(info.bases.iter().cloned());
        }
        None
    }

    fn receiver_type(&self, ctx: &FnContext, expr: &Expr) -> ReceiverType {
        match expr {
            Expr::Name(n) => {
                let id = n.id.as_str();
                if ctx.receiver.as_deref() == Some(id) {
                    return ctx.class.clone().map_or(ReceiverType::Unknown, ReceiverType::Class);
                }
                if let Some(k) = ctx.local_types.get(id) {
                    return ReceiverType::Class(k.clone());
                }
                if let Some(k) = self.class_named(Some(ctx.idx), id) {
                    return ReceiverType::Class(k);
                }
                if self.collector.imports.contains(id) {
                    return ReceiverType::External;
                }
                ReceiverType::Unknown
            }
            Expr::Attribute(a) => match (a.value.as_ref(), &ctx.class) {
                (Expr::Name(n), Some(class)) if ctx.receiver.as_deref() == Some(n.id.as_str()) => self
                    .classes
                    .get(class)
                    .and_then(|info| info.attr_types.get(a.attr.as_str()))
                    .map_or(ReceiverType::Unknown, |k| ReceiverType::Class(k.clone())),
                _ => ReceiverType::Unknown,
            },
            Expr::Call(c) => match c.func.as_ref() {
                Expr::Name(n) if n.id.as_str() == "super" => ctx
                    .class
                    .as_ref()
                    .and_then(|k| self.classes.get(k))
                    .and_then(|info| info.bases.first().cloned())
                    .map_or(ReceiverType::External, ReceiverType::Class),
                Expr::Name(n) => {
                    self.class_named(Some(ctx.idx), n.id.as_str()).map_or(ReceiverType::Unknown, ReceiverType::Class)
                }
                _ => ReceiverType::Unknown,
            },
            _ => ReceiverType::Unknown,
        }
    }

    fn resolve_call(&self, ctx: &FnContext, func: &Expr) -> Option<String> {
        match func {
            Expr::Name(n) => match self.lookup_in(Some(ctx.idx), n.id.as_str())? {
                Binding::Function(q) => Some(q.clone()),
                Binding::Class(k) => self.lookup_method(k, "__init__"),
            },
            Expr::Attribute(a) => {
                let attr = a.attr.as_str();
                let on_receiver =
                    matches!(a.value.as_ref(), Expr::Name(n) if ctx.receiver.as_deref() == Some(n.id.as_str()));
                match self.receiver_type(ctx, &a.value) {
                    ReceiverType::Class(k) => self.lookup_method(&k, attr).or_else(|| {
                        on_receiver
                            .then(|| match self.module.get(attr) {
                                Some(Binding::Function(q)) => Some(q.clone()),
                                _ => None,
                            })
                            .flatten()
                    }),
                    ReceiverType::External => None,
                    ReceiverType::Unknown => match self.methods_by_name.get(attr).map(Vec::as_slice) {
                        Some([only]) => Some(only.clone()),
                        _ => None,
                    },
                }
            }
            _ => None,
        }
    }
}

fn receiver_name(decl: &FuncDecl<'_>) -> Option<String> {
    let FuncNode::Def(def) = decl.node else { return None };
    decl.class.as_ref()?;
    let is_static = def.decorators.iter().any(|d| matches!(d, Expr::Name(n) if n.id.as_str() == "staticmethod"));
    if is_static {
        return None;
    }
    def.args.posonlyargs.first().or_else(|| def.args.args.first()).map(|a| a.def.arg.to_string())
}

/// `target = value` pairs anywhere in a body (nested definitions excluded).
fn collect_simple_assigns<'a>(body: &'a [Stmt], out: &mut Vec<(&'a Expr, &'a Expr)>) {
    for s in body {
        match s {
            Stmt::Assign(a) => {
                for t in &a.targets {
                    out.push((t, &a.value));
                }
            }
            Stmt::AnnAssign(a) => {
                if let Some(v) = &a.value {
                    out.push((&a.target, v));
                }
            }
            Stmt::FunctionDef(_) | Stmt::AsyncFunctionDef(_) | Stmt::ClassDef(_) => {}
            other => {
                let mut exprs = Vec::new();
                let mut blocks = Vec::new();
                stmt_parts(other, &mut exprs, &mut blocks);
                blocks.into_iter().for_each(|b| collect_simple_assigns(b, out));
            }
        }
    }
}

fn collect_annotated<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a str, &'a Expr)) {
    for s in body {
        match s {
            Stmt::AnnAssign(a) => {
                if let Expr::Name(n) = a.target.as_ref() {
                    f(n.id.as_str(), &a.annotation);
                }
            }
            Stmt::FunctionDef(_) | Stmt::AsyncFunctionDef(_) | Stmt::ClassDef(_) => {}
            other => {
                let mut exprs = Vec::new();
                let mut blocks = Vec::new();
                stmt_parts(other, &mut exprs, &mut blocks);
                blocks.into_iter().for_each(|b| collect_annotated(b, f));
            }
        }
    }
}

struct PendingBranch {
    offset: usize,
    kind: BranchKind,
    line: usize,
    condition_text: String,
    terms: super::ConditionTerms,
    resolved: Vec<String>,
    true_target_line: usize,
    false_target_line: Option<usize>,
}

/// Collects per-method facts without descending into nested definitions.
struct MethodWalk<'s, 'r, 'a, 'c> {
    source: &'s str,
    lines: &'s LineIndex,
    resolver: &'r Resolver<'a, 'c>,
    ctx: FnContext,
    qualified: String,
    params: Vec<String>,
    branches: Vec<PendingBranch>,
    calls: Vec<CallSite>,
    assignments: Vec<AssignmentRecord>,
    returns: Vec<ReturnRecord>,
}

impl MethodWalk<'_, '_, '_, '_> {
    fn line_of(&self, range: TextRange) -> usize {
        self.lines.line(off(range.start()))
    }

    fn receivers(&self) -> Vec<&str> {
        self.ctx.receiver.iter().map(String::as_str).collect()
    }

    fn terms(&self, expr: &Expr) -> super::ConditionTerms {
        let params: Vec<&str> =
            self.params.iter().map(String::as_str).filter(|p| Some(*p) != self.ctx.receiver.as_deref()).collect();
        collect_terms(expr, &params, &self.receivers())
    }

    /// In-module callees of the calls inside `expr` (lambda bodies excluded).
    fn resolved_calls(&self, expr: &Expr) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut stack = vec![expr];
        while let Some(e) = stack.pop() {
            if let Expr::Call(c) = e {
                if let Some(q) = self.resolver.resolve_call(&self.ctx, &c.func) {
                    if !out.contains(&q) {
                        out.push(q);
                    }
                }
            }
            if let Expr::Lambda(l) = e {
                arguments_defaults(&l.args, &mut |d| stack.push(d));
                continue;
            }
            let mut kids = Vec::new();
            children(e, &mut |c| kids.push(c));
            stack.extend(kids.into_iter().rev());
        }
        out
    }

    fn branch(&mut self, kind: BranchKind, range: TextRange, test: &Expr, true_line: usize, false_line: Option<usize>) {
        self.branches.push(PendingBranch {
            offset: off(range.start()),
            kind,
            line: self.line_of(range),
            condition_text: slice(self.source, test).to_string(),
            terms: self.terms(test),
            resolved: self.resolved_calls(test),
            true_target_line: true_line,
            false_target_line: false_line,
        });
    }

    fn assignment(&mut self, target: &Expr, value: &Expr, line: usize) {
        let mut names = Vec::new();
        target_names(target, self.ctx.receiver.as_deref(), &mut names);
        if names.is_empty() {
            return;
        }
        let terms = self.terms(value);
        let resolved = self.resolved_calls(value);
        for name in names {
            self.assignments.push(AssignmentRecord {
                target_variable: name,
                rhs_text: slice(self.source, value).to_string(),
                rhs_invoked_methods: terms.invoked_methods.clone(),
                rhs_resolved_methods: resolved.clone(),
                rhs_variables: terms.variables.clone(),
                line,
            });
        }
    }

    fn return_value(&mut self, value: &Expr) {
        let terms = self.terms(value);
        self.returns.push(ReturnRecord {
            value_text: slice(self.source, value).to_string(),
            variables: terms.variables,
            invoked_methods: terms.invoked_methods,
            resolved_methods: self.resolved_calls(value),
            line: self.line_of(value.range()),
        });
    }

    fn first_line(&self, body: &[Stmt]) -> Option<usize> {
        body.first().map(|s| self.line_of(s.range()))
    }

    fn stmts(&mut self, body: &[Stmt]) {
        for s in body {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, stmt: &Stmt) {
        let line = self.line_of(stmt.range());
        match stmt {
            Stmt::FunctionDef(f) => {
                f.decorator_list.iter().for_each(|d| self.expr(d));
                arguments_defaults(&f.args, &mut |d| self.expr(d));
                return;
            }
            Stmt::AsyncFunctionDef(f) => {
                f.decorator_list.iter().for_each(|d| self.expr(d));
                arguments_defaults(&f.args, &mut |d| self.expr(d));
                return;
            }
            Stmt::ClassDef(c) => {
                c.decorator_list.iter().chain(&c.bases).for_each(|e| self.expr(e));
                return;
            }
            Stmt::If(s) => {
                let t = self.first_line(&s.body).unwrap_or(line);
                let f = self.first_line(&s.orelse);
                self.branch(BranchKind::If, s.range, &s.test, t, f);
            }
            Stmt::While(s) => {
                let t = self.first_line(&s.body).unwrap_or(line);
                let f = self.first_line(&s.orelse);
                self.branch(BranchKind::While, s.range, &s.test, t, f);
            }
            Stmt::Assign(s) => {
                for t in &s.targets {
                    self.assignment(t, &s.value, line);
                }
            }
            Stmt::AugAssign(s) => self.assignment(&s.target, &s.value, line),
            Stmt::AnnAssign(s) => {
                if let Some(v) = &s.value {
                    self.assignment(&s.target, v, line);
                }
            }
            Stmt::For(s) => self.assignment(&s.target, &s.iter, line),
            Stmt::AsyncFor(s) => self.assignment(&s.target, &s.iter, line),
            Stmt::With(s) => {
                for item in &s.items {
                    if let Some(v) = &item.optional_vars {
                        self.assignment(v, &item.context_expr, line);
                    }
                }
            }
            Stmt::AsyncWith(s) => {
                for item in &s.items {
                    if let Some(v) = &item.optional_vars {
                        self.assignment(v, &item.context_expr, line);
                    }
                }
            }
            Stmt::Return(s) => {
                if let Some(v) = &s.value {
                    self.return_value(v);
                }
            }
            _ => {}
        }
        let mut exprs = Vec::new();
        let mut blocks = Vec::new();
        stmt_parts(stmt, &mut exprs, &mut blocks);
        for e in exprs {
            self.expr(e);
        }
        for b in blocks {
            self.stmts(b);
        }
    }

    fn expr(&mut self, expr: &Expr) {
        match expr {
            Expr::Lambda(l) => {
                arguments_defaults(&l.args, &mut |d| self.expr(d));
                return;
            }
            Expr::Call(c) => {
                self.calls.push(CallSite {
                    caller: self.qualified.clone(),
                    callee_expression: slice(self.source, &c.func).to_string(),
                    resolved_callee: self.resolver.resolve_call(&self.ctx, &c.func),
                    line: self.line_of(c.range),
                });
            }
            Expr::IfExp(e) => {
                let t = self.line_of(e.body.range());
                let f = self.line_of(e.orelse.range());
                self.branch(BranchKind::Ternary, e.range, &e.test, t, Some(f));
            }
            Expr::NamedExpr(n) => {
                let line = self.line_of(n.range);
                self.assignment(&n.target, &n.value, line);
            }
            _ => {}
        }
        children(expr, &mut |c| self.expr(c));
    }

    fn finish_branches(&mut self) -> Vec<BranchSite> {
        self.branches.sort_by_key(|b| b.offset);
        let mut per_line: BTreeMap<usize, usize> = BTreeMap::new();
        self.branches
            .drain(..)
            .map(|b| {
                let idx = per_line.entry(b.line).or_insert(0);
                let branch_id = format!("{}:{}:{}", self.qualified, b.line, idx);
                *idx += 1;
                BranchSite {
                    outcome_ids: BranchOutcomeId::pair(&branch_id),
                    branch_id,
                    kind: b.kind,
                    line: b.line,
                    condition_text: b.condition_text,
                    referenced_variables: b.terms.variables,
                    invoked_methods: b.terms.invoked_methods,
                    resolved_methods: b.resolved,
                    dereferences_parameter_attribute: b.terms.dereferences_parameter_attribute,
                    type_tested_variables: b.terms.type_tested_variables,
                    true_target_line: b.true_target_line,
                    false_target_line: b.false_target_line,
                }
            })
            .collect()
    }
}

fn parameters(args: &ast::Arguments, source: &str) -> Vec<Parameter> {
    let ann = |a: &ast::Arg| a.annotation.as_deref().map(|e| slice(source, e).to_string());
    let mut out = Vec::new();
    for a in args.posonlyargs.iter().chain(&args.args) {
        out.push(Parameter { name: a.def.arg.to_string(), annotation: ann(&a.def) });
    }
    if let Some(v) = &args.vararg {
        out.push(Parameter { name: v.arg.to_string(), annotation: ann(v) });
    }
    for a in &args.kwonlyargs {
        out.push(Parameter { name: a.def.arg.to_string(), annotation: ann(&a.def) });
    }
    if let Some(k) = &args.kwarg {
        out.push(Parameter { name: k.arg.to_string(), annotation: ann(k) });
    }
    out
}

fn is_docstring(stmt: &Stmt) -> bool {
    matches!(stmt, Stmt::Expr(e) if matches!(e.value.as_ref(), Expr::Constant(c) if matches!(c.value, ast::Constant::Str(_))))
}

pub(crate) fn build(source: &str, module_path: &Path) -> Result<ProgramModel, ModelError> {
    let suite = parse_suite(source, &module_path.to_string_lossy())?;
    let lines = LineIndex::new(source);

    let mut collector = Collector::default();
    let root = Scope { prefix: String::new(), class: None, parent_fn: None };
    collector.stmts(&suite, &root);
    if collector.funcs.is_empty() {
        return Err(ModelError::EmptyModule);
    }
    let resolver = Resolver::new(&collector);

    let mut methods = Vec::with_capacity(collector.funcs.len());
    let mut body_texts: HashMap<String, String> = HashMap::new();
    for (idx, decl) in collector.funcs.iter().enumerate() {
        let ctx = resolver.context(idx);
        let args = decl.node.args();
        let params = parameters(args, source);
        let (start, end, decorators) = match decl.node {
            FuncNode::Def(def) => {
                let first = def
                    .decorators
                    .iter()
                    .map(|d| off(d.range().start()))
                    .chain([off(def.range.start())])
                    .min()
                    .unwrap_or_default();
                let decorators = def.decorators.iter().map(|d| slice(source, d).to_string()).collect();
                (lines.line_start(first), off(def.range.end()), decorators)
            }
            FuncNode::Lambda(l) => (off(l.range.start()), off(l.range.end()), Vec::new()),
        };
        let mut walk = MethodWalk {
            source,
            lines: &lines,
            resolver: &resolver,
            ctx,
            qualified: decl.qualified.clone(),
            params: params.iter().map(|p| p.name.clone()).collect(),
            branches: Vec::new(),
            calls: Vec::new(),
            assignments: Vec::new(),
            returns: Vec::new(),
        };
        match decl.node {
            FuncNode::Def(def) => walk.stmts(def.body),
            FuncNode::Lambda(l) => {
                walk.return_value(&l.body);
                walk.expr(&l.body);
            }
        }
        let branch_sites = walk.finish_branches();
        let is_lambda = matches!(decl.node, FuncNode::Lambda(_));
        let body_text = source[start..end].to_string();
        body_texts.insert(decl.qualified.clone(), body_text.clone());
        methods.push(MethodRecord {
            qualified_name: decl.qualified.clone(),
            class_name: decl.class.clone(),
            parameters: params,
            receiver: walk.ctx.receiver.clone(),
            is_public: !is_lambda && !decl.simple.starts_with('_'),
            is_lambda,
            decorators,
            body_text,
            branch_sites,
            call_sites: walk.calls,
            assignments: walk.assignments,
            returns: walk.returns,
            line_span: LineSpan { start: lines.line(start), end: lines.line(end.saturating_sub(1).max(start)) },
        });
    }

    let classes = collector
        .classes
        .iter()
        .map(|c| {
            let node = c.node;
            let first = node
                .decorator_list
                .iter()
                .map(|d| off(d.range().start()))
                .chain([off(node.range.start())])
                .min()
                .unwrap_or_default();
            let start = lines.line_start(first);
            let header_end = match node.body.first() {
                Some(s) if is_docstring(s) => off(s.range().end()),
                Some(s) => {
                    let body_start = off(s.range().start());
                    let line_start = lines.line_start(body_start);
                    if line_start > start {
                        line_start - 1
                    } else {
                        body_start
                    }
                }
                None => off(node.range.end()),
            };
            let declaration_text = source[start..header_end].trim_end().to_string();
            let method_names: Vec<String> = collector
                .funcs
                .iter()
                .filter(|f| f.class.as_deref() == Some(c.qualified.as_str()))
                .map(|f| f.qualified.clone())
                .collect();
            let constructor_text = resolver
                .classes
                .get(&c.qualified)
                .and_then(|info| info.methods.get("__init__"))
                .and_then(|q| body_texts.get(q))
                .cloned();
            ClassRecord {
                qualified_name: c.qualified.clone(),
                bases: node.bases.iter().map(|b| slice(source, b).to_string()).collect(),
                declaration_text,
                constructor_text,
                method_names,
                line_span: LineSpan {
                    start: lines.line(start),
                    end: lines.line(off(node.range.end()).saturating_sub(1).max(start)),
                },
            }
        })
        .collect();

    Ok(ProgramModel { module_path: module_path.to_path_buf(), classes, methods, source_text: source.to_string() })
}
