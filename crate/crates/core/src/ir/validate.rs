use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{Const, Expr, IrSb, IrType, Statement, Temp};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum ViolationKind {
    ReadBeforeWrite(Temp),
    UndeclaredTemp(Temp),
    DuplicateWrite(Temp),
    TypeMismatch {
        site: &'static str,
        expected: IrType,
        found: IrType,
    },
    ConstOutOfRange(Const),
}

impl ViolationKind {
    pub fn rule(&self) -> &'static str {
        match self {
            ViolationKind::ReadBeforeWrite(_) => "ReadBeforeWrite",
            ViolationKind::UndeclaredTemp(_) => "UndeclaredTemp",
            ViolationKind::DuplicateWrite(_) => "DuplicateWrite",
            ViolationKind::TypeMismatch { .. } => "TypeMismatch",
            ViolationKind::ConstOutOfRange(_) => "ConstOutOfRange",
        }
    }
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViolationKind::ReadBeforeWrite(t) => write!(f, "{t} read before it is written"),
            ViolationKind::UndeclaredTemp(t) => write!(f, "{t} is not declared"),
            ViolationKind::DuplicateWrite(t) => write!(f, "{t} written more than once"),
            ViolationKind::TypeMismatch {
                site,
                expected,
                found,
            } => write!(f, "{site}: expected {expected}, found {found}"),
            ViolationKind::ConstOutOfRange(c) => {
                write!(f, "constant {:#x} does not fit {}", c.value, c.ty)
            }
        }
    }
}

/// A broken block invariant. `stmt` is `None` for the fall-through exit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub stmt: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.stmt {
            Some(i) => write!(f, "{}@stmt{}: {}", self.kind.rule(), i, self.kind),
            None => write!(f, "{}@next: {}", self.kind.rule(), self.kind),
        }
    }
}

/// Type of `e` under `temps`. `Ok(None)` means the type is unknown because
/// the expression is (or is built on) an opaque operator.
pub fn type_of(e: &Expr, temps: &BTreeMap<Temp, IrType>) -> Result<Option<IrType>, ViolationKind> {
    let mut issues = Vec::new();
    let ty = check_expr(e, temps, &mut issues);
    match issues.into_iter().next() {
        Some(v) => Err(v),
        None => Ok(ty),
    }
}

fn expect(
    site: &'static str,
    expected: IrType,
    found: Option<IrType>,
    issues: &mut Vec<ViolationKind>,
) {
    if let Some(found) = found {
        if found != expected {
            issues.push(ViolationKind::TypeMismatch {
                site,
                expected,
                found,
            });
        }
    }
}

fn check_expr(
    e: &Expr,
    temps: &BTreeMap<Temp, IrType>,
    issues: &mut Vec<ViolationKind>,
) -> Option<IrType> {
    match e {
        Expr::Const(c) => {
            if !c.ty.fits(c.value) {
                issues.push(ViolationKind::ConstOutOfRange(*c));
            }
            Some(c.ty)
        }
        Expr::RdTmp(t) => match temps.get(t) {
            Some(ty) => Some(*ty),
            None => {
                issues.push(ViolationKind::UndeclaredTemp(*t));
                None
            }
        },
        Expr::Get { ty, .. } => Some(*ty),
        Expr::Load { ty, addr } => {
            let at = check_expr(addr, temps, issues);
            expect("load address", IrType::I64, at, issues);
            Some(*ty)
        }
        Expr::Binop { op, lhs, rhs } => {
            let (lt, rt) = op.arg_types();
            let l = check_expr(lhs, temps, issues);
            let r = check_expr(rhs, temps, issues);
            expect("binop lhs", lt, l, issues);
            expect("binop rhs", rt, r, issues);
            Some(op.result_type())
        }
        Expr::Unop { op, arg } => {
            let a = check_expr(arg, temps, issues);
            expect("unop argument", op.arg_type(), a, issues);
            Some(op.result_type())
        }
        Expr::Ite { cond, ift, iff } => {
            let c = check_expr(cond, temps, issues);
            expect("ITE condition", IrType::I1, c, issues);
            let a = check_expr(ift, temps, issues);
            let b = check_expr(iff, temps, issues);
            match (a, b) {
                (Some(a), Some(b)) => {
                    expect("ITE branches", a, Some(b), issues);
                    Some(a)
                }
                (Some(t), None) | (None, Some(t)) => Some(t),
                (None, None) => None,
            }
        }
        Expr::Opaque { args, .. } => {
            for a in args {
                check_expr(a, temps, issues);
            }
            None
        }
    }
}

fn check_statement(
    s: &Statement,
    temps: &BTreeMap<Temp, IrType>,
    issues: &mut Vec<ViolationKind>,
) {
    match s {
        Statement::IMark { .. } | Statement::NoOp => {}
        Statement::WrTmp { tmp, rhs } => {
            let ty = check_expr(rhs, temps, issues);
            match temps.get(tmp) {
                Some(declared) => expect("temp assignment", *declared, ty, issues),
                None => issues.push(ViolationKind::UndeclaredTemp(*tmp)),
            }
        }
        Statement::Put { data, .. } => {
            check_expr(data, temps, issues);
        }
        Statement::Store { addr, data } => {
            let at = check_expr(addr, temps, issues);
            expect("store address", IrType::I64, at, issues);
            check_expr(data, temps, issues);
        }
        Statement::Exit { guard, .. } => {
            let g = check_expr(guard, temps, issues);
            expect("exit guard", IrType::I1, g, issues);
        }
    }
}

/// Type-checks a single statement against a temp environment, ignoring
/// def-use order.
pub(crate) fn statement_type_issues(
    s: &Statement,
    temps: &BTreeMap<Temp, IrType>,
) -> Vec<ViolationKind> {
    let mut issues = Vec::new();
    check_statement(s, temps, &mut issues);
    issues
}

/// Checks every block invariant and returns the violations found, in
/// statement order. An empty list means the block is well formed.
pub fn validate(block: &IrSb) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut written: BTreeSet<Temp> = BTreeSet::new();

    for (i, s) in block.stmts.iter().enumerate() {
        let mut issues = Vec::new();
        for t in s.temps_read() {
            if !written.contains(&t) {
                issues.push(ViolationKind::ReadBeforeWrite(t));
            }
        }
        check_statement(s, &block.temps, &mut issues);
        if let Statement::WrTmp { tmp, .. } = s {
            if !written.insert(*tmp) {
                issues.push(ViolationKind::DuplicateWrite(*tmp));
            }
        }
        out.extend(issues.into_iter().map(|kind| Violation {
            stmt: Some(i),
            kind,
        }));
    }

    let mut issues = Vec::new();
    block.next.visit(&mut |e| {
        if let Expr::RdTmp(t) = e {
            if !written.contains(t) {
                issues.push(ViolationKind::ReadBeforeWrite(*t));
            }
        }
    });
    let nt = check_expr(&block.next, &block.temps, &mut issues);
    expect("block next", IrType::I64, nt, &mut issues);
    out.extend(issues.into_iter().map(|kind| Violation { stmt: None, kind }));
    out
}
