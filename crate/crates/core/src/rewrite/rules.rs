//! Deterministic peephole rules.
//!
//! R1-R4 simplify the statement's value expression at its root. R5-R7
//! delete a statement whose effect is overwritten or never observed.

use super::{check_contract, Provenance, ProposalStatus, RewriteCandidate, RewriteProposal, RuleId};
use crate::interp::{eval_binop, eval_unop};
use crate::ir::{type_of, BinOpKind, Const, Expr, IrSb, IrType, Statement, UnOp};

fn is_const(e: &Expr, value: u64) -> bool {
    matches!(e, Expr::Const(c) if c.value == value)
}

/// R1: `x op identity` becomes `x`.
fn identity(e: &Expr) -> Option<Expr> {
    let Expr::Binop { op, lhs, rhs } = e else {
        return None;
    };
    use BinOpKind::*;
    let ones = op.width.mask();
    let keep = match op.kind {
        Add | Or | Xor if is_const(rhs, 0) => lhs,
        Add | Or | Xor if is_const(lhs, 0) => rhs,
        Sub | Shl | Shr | Sar if is_const(rhs, 0) => lhs,
        Mul if is_const(rhs, 1) => lhs,
        Mul if is_const(lhs, 1) => rhs,
        And if is_const(rhs, ones) => lhs,
        And if is_const(lhs, ones) => rhs,
        _ => return None,
    };
    Some((**keep).clone())
}

/// R2: operators applied to constants only.
fn fold(e: &Expr) -> Option<Expr> {
    match e {
        Expr::Binop { op, lhs, rhs } => match (&**lhs, &**rhs) {
            (Expr::Const(a), Expr::Const(b)) => {
                let v = eval_binop(*op, a.value, b.value).ok()?;
                Some(Expr::Const(Const::new(v, op.result_type())))
            }
            _ => None,
        },
        Expr::Unop { op, arg } => match &**arg {
            Expr::Const(a) => Some(Expr::Const(Const::new(eval_unop(*op, a.value), op.result_type()))),
            _ => None,
        },
        _ => None,
    }
}

/// R3: `x^x`, `x-x` become 0; `x&x`, `x|x` become `x`.
fn self_cancel(e: &Expr) -> Option<Expr> {
    let Expr::Binop { op, lhs, rhs } = e else {
        return None;
    };
    if lhs != rhs || lhs.may_fault() {
        return None;
    }
    match op.kind {
        BinOpKind::Xor | BinOpKind::Sub => Some(Expr::constant(0, op.width)),
        BinOpKind::And | BinOpKind::Or => Some((**lhs).clone()),
        _ => None,
    }
}

/// R4: `Not(Not(x))` becomes `x`.
fn double_not(e: &Expr) -> Option<Expr> {
    let Expr::Unop {
        op: UnOp::Not(w1),
        arg,
    } = e
    else {
        return None;
    };
    match &**arg {
        Expr::Unop {
            op: UnOp::Not(w2),
            arg: inner,
        } if w1 == w2 => Some((**inner).clone()),
        _ => None,
    }
}

fn data_bytes(e: &Expr, b: &IrSb) -> Option<u32> {
    type_of(e, &b.temps).ok().flatten().map(IrType::bytes)
}

/// R5: this store is followed (ignoring IMark/NoOp) by a store to the
/// same address expression that covers at least the same bytes.
fn overwritten_store(b: &IrSb, i: usize) -> bool {
    let Statement::Store { addr, data } = &b.stmts[i] else {
        return false;
    };
    if addr.has_load() || addr.may_fault() || data.may_fault() {
        return false;
    }
    let Some(next) = b.stmts[i + 1..].iter().find(|s| !s.is_metadata()) else {
        return false;
    };
    let Statement::Store {
        addr: addr2,
        data: data2,
    } = next
    else {
        return false;
    };
    if addr2 != addr || data2.has_load() || data2.may_fault() {
        return false;
    }
    match (data_bytes(data, b), data_bytes(data2, b)) {
        (Some(w1), Some(w2)) => w2 >= w1,
        _ => false,
    }
}

fn overlaps(a: (u32, u32), b: (u32, u32)) -> bool {
    a.0 < b.0 + b.1 && b.0 < a.0 + a.1
}

/// R6: a later put to the same offset covers this one, with no exit,
/// possible fault or read of those guest bytes in between.
fn overwritten_put(b: &IrSb, i: usize) -> bool {
    let Statement::Put { offset, data } = &b.stmts[i] else {
        return false;
    };
    if data.may_fault() {
        return false;
    }
    let Some(width) = data_bytes(data, b) else {
        return false;
    };
    let range = (*offset, width);
    for s in &b.stmts[i + 1..] {
        if matches!(s, Statement::Exit { .. }) || s.may_fault() {
            return false;
        }
        let reads_range = s
            .exprs()
            .iter()
            .flat_map(|e| e.guest_reads())
            .any(|r| overlaps(r, range));
        if reads_range {
            return false;
        }
        if let Statement::Put {
            offset: o2,
            data: d2,
        } = s
        {
            if o2 == offset && data_bytes(d2, b).is_some_and(|w2| w2 >= width) {
                return true;
            }
        }
    }
    false
}

/// R7: the assigned temp is never read and the value cannot fault.
fn dead_temp(b: &IrSb, i: usize) -> bool {
    match &b.stmts[i] {
        Statement::WrTmp { tmp, rhs } => !rhs.may_fault() && !b.temp_is_read(*tmp),
        _ => false,
    }
}

fn with_root(s: &Statement, root: Expr) -> Statement {
    match s {
        Statement::WrTmp { tmp, .. } => Statement::WrTmp { tmp: *tmp, rhs: root },
        Statement::Put { offset, .. } => Statement::Put {
            offset: *offset,
            data: root,
        },
        Statement::Store { addr, .. } => Statement::Store {
            addr: addr.clone(),
            data: root,
        },
        Statement::Exit {
            target,
            jumpkind,
            offset,
            ..
        } => Statement::Exit {
            guard: root,
            target: *target,
            jumpkind: *jumpkind,
            offset: *offset,
        },
        other => other.clone(),
    }
}

fn root_expr(s: &Statement) -> Option<&Expr> {
    match s {
        Statement::WrTmp { rhs, .. } => Some(rhs),
        Statement::Put { data, .. } | Statement::Store { data, .. } => Some(data),
        Statement::Exit { guard, .. } => Some(guard),
        _ => None,
    }
}

fn proposal(c: &RewriteCandidate<'_>, rule: RuleId, replacement: Statement) -> RewriteProposal {
    let status = match check_contract(c, &replacement) {
        Ok(()) => ProposalStatus::Sanitized,
        Err(reason) => ProposalStatus::RejectedContract(reason),
    };
    RewriteProposal {
        replacement,
        provenance: Provenance::Rule { rule },
        status,
    }
}

/// Applies the first matching rule, R1 through R7 in order.
pub fn rule_rewrite(c: &RewriteCandidate<'_>) -> Option<RewriteProposal> {
    let s = c.original;
    if let Some(root) = root_expr(s) {
        let expr_rules: [(RuleId, fn(&Expr) -> Option<Expr>); 4] = [
            (RuleId::R1, identity),
            (RuleId::R2, fold),
            (RuleId::R3, self_cancel),
            (RuleId::R4, double_not),
        ];
        for (id, rule) in expr_rules {
            if let Some(e) = rule(root) {
                return Some(proposal(c, id, with_root(s, e)));
            }
        }
    }
    let (b, i) = (c.block, c.stmt_index);
    if overwritten_store(b, i) {
        return Some(proposal(c, RuleId::R5, Statement::NoOp));
    }
    if overwritten_put(b, i) {
        return Some(proposal(c, RuleId::R6, Statement::NoOp));
    }
    if dead_temp(b, i) {
        return Some(proposal(c, RuleId::R7, Statement::NoOp));
    }
    None
}
