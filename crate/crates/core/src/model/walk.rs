use rustpython_parser::ast::{self, Expr};

/// Calls `f` on every direct sub-expression of `expr`, in source order.
pub(crate) fn children<'a>(expr: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    match expr {
        Expr::BoolOp(e) => e.values.iter().for_each(f),
        Expr::NamedExpr(e) => {
            f(&e.target);
            f(&e.value);
        }
        Expr::BinOp(e) => {
            f(&e.left);
            f(&e.right);
        }
        Expr::UnaryOp(e) => f(&e.operand),
        Expr::Lambda(e) => {
            arguments_defaults(&e.args, f);
            f(&e.body);
        }
        Expr::IfExp(e) => {
            f(&e.body);
            f(&e.test);
            f(&e.orelse);
        }
        Expr::Dict(e) => {
            for (k, v) in e.keys.iter().zip(&e.values) {
                if let Some(k) = k {
                    f(k);
                }
                f(v);
            }
        }
        Expr::Set(e) => e.elts.iter().for_each(f),
        Expr::ListComp(e) => {
            f(&e.elt);
            comprehensions(&e.generators, f);
        }
        Expr::SetComp(e) => {
            f(&e.elt);
            comprehensions(&e.generators, f);
        }
        Expr::DictComp(e) => {
            f(&e.key);
            f(&e.value);
            comprehensions(&e.generators, f);
        }
        Expr::GeneratorExp(e) => {
            f(&e.elt);
            comprehensions(&e.generators, f);
        }
        Expr::Await(e) => f(&e.value),
        Expr::Yield(e) => {
            if let Some(v) = &e.value {
                f(v);
            }
        }
        Expr::YieldFrom(e) => f(&e.value),
        Expr::Compare(e) => {
            f(&e.left);
            e.comparators.iter().for_each(f);
        }
        Expr::Call(e) => {
            f(&e.func);
            e.args.iter().for_each(&mut *f);
            e.keywords.iter().for_each(|k| f(&k.value));
        }
        Expr::FormattedValue(e) => {
            f(&e.value);
            if let Some(spec) = &e.format_spec {
                f(spec);
            }
        }
        Expr::JoinedStr(e) => e.values.iter().for_each(f),
        Expr::Constant(_) | Expr::Name(_) => {}
        Expr::Attribute(e) => f(&e.value),
        Expr::Subscript(e) => {
            f(&e.value);
            f(&e.slice);
        }
        Expr::Starred(e) => f(&e.value),
        Expr::List(e) => e.elts.iter().for_each(f),
        Expr::Tuple(e) => e.elts.iter().for_each(f),
        Expr::Slice(e) => {
            for part in [&e.lower, &e.upper, &e.step].into_iter().flatten() {
                f(part);
            }
        }
    }
}

fn comprehensions<'a>(gens: &'a [ast::Comprehension], f: &mut dyn FnMut(&'a Expr)) {
    for g in gens {
        f(&g.iter);
        f(&g.target);
        g.ifs.iter().for_each(&mut *f);
    }
}

/// Default values are evaluated in the enclosing scope.
pub(crate) fn arguments_defaults<'a>(args: &'a ast::Arguments, f: &mut dyn FnMut(&'a Expr)) {
    for a in args.posonlyargs.iter().chain(&args.args).chain(&args.kwonlyargs) {
        if let Some(d) = &a.default {
            f(d);
        }
    }
}

/// Names bound by an assignment target (`a`, `a, b`, `[a, *b]`), plus
/// `recv.attr` for attribute targets on the receiver.
pub(crate) fn target_names(target: &Expr, receiver: Option<&str>, out: &mut Vec<String>) {
    match target {
        Expr::Name(n) => out.push(n.id.to_string()),
        Expr::Tuple(t) => t.elts.iter().for_each(|e| target_names(e, receiver, out)),
        Expr::List(l) => l.elts.iter().for_each(|e| target_names(e, receiver, out)),
        Expr::Starred(s) => target_names(&s.value, receiver, out),
        Expr::Attribute(a) => {
            if let Expr::Name(base) = a.value.as_ref() {
                if Some(base.id.as_str()) == receiver {
                    out.push(format!("{}.{}", base.id, a.attr));
                }
            }
        }
        _ => {}
    }
}

/// Dotted rendering of a callee (`foo`, `mod.foo`, `obj.attr.m`); for
/// receivers that are not plain names only the attribute is kept.
pub(crate) fn dotted(expr: &Expr) -> Option<String> {
    match expr {
        Expr::Name(n) => Some(n.id.to_string()),
        Expr::Attribute(a) => match dotted(&a.value) {
            Some(base) => Some(format!("{base}.{}", a.attr)),
            None => Some(a.attr.to_string()),
        },
        _ => None,
    }
}
