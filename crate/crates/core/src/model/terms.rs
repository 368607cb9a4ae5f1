use rustpython_parser::ast::{self, Expr, Ranged};
use rustpython_parser::Parse;
use serde::{Deserialize, Serialize};

use super::walk::{children, dotted};
use super::ModelError;

/// Terms syntactically present in a branch condition.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionTerms {
    /// Free identifiers, first occurrence first. Attributes read off the
    /// receiver appear as `self.attr`.
    pub variables: Vec<String>,
    /// Callee names; calls on the receiver drop the `self.` prefix.
    pub invoked_methods: Vec<String>,
    pub dereferences_parameter_attribute: bool,
    pub type_tested_variables: Vec<String>,
}

const RECEIVER_NAMES: [&str; 2] = ["self", "cls"];
const TYPE_TESTS: [&str; 2] = ["isinstance", "issubclass"];

/// Extracts variables and callees from a condition expression.
///
/// `parameters` are the enclosing method's parameters; `self` and `cls` are
/// treated as receivers and never count as parameters.
pub fn extract_condition_terms(condition_text: &str, parameters: &[&str]) -> Result<ConditionTerms, ModelError> {
    let expr = Expr::parse(condition_text.trim(), "<condition>")
        .map_err(|e| ModelError::ExpressionParse { text: condition_text.to_string(), message: e.error.to_string() })?;
    let params: Vec<&str> = parameters.iter().copied().filter(|p| !RECEIVER_NAMES.contains(p)).collect();
    Ok(collect_terms(&expr, &params, &RECEIVER_NAMES))
}

pub(crate) fn collect_terms(expr: &Expr, parameters: &[&str], receivers: &[&str]) -> ConditionTerms {
    let mut c = TermCollector { parameters, receivers, bound: Vec::new(), terms: ConditionTerms::default() };
    c.visit(expr);
    c.terms
}

struct TermCollector<'p> {
    parameters: &'p [&'p str],
    receivers: &'p [&'p str],
    bound: Vec<String>,
    terms: ConditionTerms,
}

fn push_unique(list: &mut Vec<String>, item: String) {
    if !list.contains(&item) {
        list.push(item);
    }
}

impl TermCollector<'_> {
    fn is_receiver(&self, name: &str) -> bool {
        self.receivers.contains(&name) && !self.bound.iter().any(|b| b == name)
    }

    fn is_parameter(&self, name: &str) -> bool {
        self.parameters.contains(&name) && !self.bound.iter().any(|b| b == name)
    }

    fn variable(&mut self, name: String) {
        push_unique(&mut self.terms.variables, name);
    }

    /// Flags attribute/subscript access whose base is a parameter.
    fn note_dereference(&mut self, base: &Expr) {
        if let Expr::Name(n) = base {
            if self.is_parameter(n.id.as_str()) {
                self.terms.dereferences_parameter_attribute = true;
            }
        }
    }

    fn callee_name(&self, func: &Expr) -> Option<String> {
        let name = dotted(func)?;
        for r in self.receivers {
            if let Some(rest) = name.strip_prefix(&format!("{r}.")) {
                if self.is_receiver(r) {
                    return Some(rest.to_string());
                }
            }
        }
        Some(name)
    }

    fn visit(&mut self, expr: &Expr) {
        match expr {
            Expr::Name(n) => {
                let id = n.id.as_str();
                if !self.bound.iter().any(|b| b == id) && !self.is_receiver(id) {
                    self.variable(id.to_string());
                }
            }
            Expr::Attribute(a) => {
                self.note_dereference(&a.value);
                match a.value.as_ref() {
                    Expr::Name(base) if self.is_receiver(base.id.as_str()) => {
                        self.variable(format!("{}.{}", base.id, a.attr));
                    }
                    other => self.visit(other),
                }
            }
            Expr::Subscript(s) => {
                self.note_dereference(&s.value);
                self.visit(&s.value);
                self.visit(&s.slice);
            }
            Expr::Call(call) => self.visit_call(call),
            Expr::Lambda(l) => {
                let mark = self.bound.len();
                let a = &l.args;
                for p in a.posonlyargs.iter().chain(&a.args).chain(&a.kwonlyargs) {
                    if let Some(d) = &p.default {
                        self.visit(d);
                    }
                    self.bound.push(p.def.arg.to_string());
                }
                for p in a.vararg.iter().chain(&a.kwarg) {
                    self.bound.push(p.arg.to_string());
                }
                self.visit(&l.body);
                self.bound.truncate(mark);
            }
            Expr::ListComp(e) => self.visit_comprehension(&e.generators, &[&e.elt]),
            Expr::SetComp(e) => self.visit_comprehension(&e.generators, &[&e.elt]),
            Expr::GeneratorExp(e) => self.visit_comprehension(&e.generators, &[&e.elt]),
            Expr::DictComp(e) => self.visit_comprehension(&e.generators, &[&e.key, &e.value]),
            Expr::NamedExpr(n) => {
                self.visit(&n.value);
                if let Expr::Name(t) = n.target.as_ref() {
                    self.bound.push(t.id.to_string());
                }
            }
            Expr::Compare(cmp) => {
                // `type(x) is T`: T is a type reference
                let type_call = is_type_call(&cmp.left);
                self.visit(&cmp.left);
                for c in &cmp.comparators {
                    if !(type_call && is_type_reference(c)) {
                        self.visit(c);
                    }
                }
            }
            other => children(other, &mut |c| self.visit(c)),
        }
    }

    fn visit_call(&mut self, call: &ast::ExprCall) {
        if let Some(name) = self.callee_name(&call.func) {
            push_unique(&mut self.terms.invoked_methods, name);
        }
        match call.func.as_ref() {
            Expr::Name(_) => {}
            Expr::Attribute(a) => {
                self.note_dereference(&a.value);
                if !matches!(a.value.as_ref(), Expr::Name(n) if self.is_receiver(n.id.as_str())) {
                    self.visit(&a.value);
                }
            }
            other => self.visit(other),
        }
        let callee = match call.func.as_ref() {
            Expr::Name(n) => Some(n.id.as_str()),
            _ => None,
        };
        let type_test = callee.is_some_and(|c| TYPE_TESTS.contains(&c)) && call.args.len() >= 2;
        if type_test || (callee == Some("type") && call.args.len() == 1) {
            if let Some(base) = base_name(&call.args[0]) {
                push_unique(&mut self.terms.type_tested_variables, base);
            }
        }
        for (i, arg) in call.args.iter().enumerate() {
            if type_test && i == 1 {
                continue;
            }
            self.visit(arg);
        }
        for k in &call.keywords {
            self.visit(&k.value);
        }
    }

    fn visit_comprehension(&mut self, gens: &[ast::Comprehension], elts: &[&Expr]) {
        let mark = self.bound.len();
        for g in gens {
            self.visit(&g.iter);
            let mut names = Vec::new();
            super::walk::target_names(&g.target, None, &mut names);
            self.bound.extend(names);
            for cond in &g.ifs {
                self.visit(cond);
            }
        }
        for e in elts {
            self.visit(e);
        }
        self.bound.truncate(mark);
    }
}

fn is_type_call(e: &Expr) -> bool {
    matches!(e, Expr::Call(c) if matches!(c.func.as_ref(), Expr::Name(n) if n.id.as_str() == "type"))
}

fn is_type_reference(e: &Expr) -> bool {
    matches!(e, Expr::Name(_) | Expr::Attribute(_))
}

/// `x` for `x`, `x.a.b`, `x[0]`.
fn base_name(e: &Expr) -> Option<String> {
    match e {
        Expr::Name(n) => Some(n.id.to_string()),
        Expr::Attribute(a) => base_name(&a.value),
        Expr::Subscript(s) => base_name(&s.value),
        _ => None,
    }
}

/// Source slice of an expression.
pub(crate) fn slice<'s>(source: &'s str, expr: &Expr) -> &'s str {
    &source[expr.range()]
}
