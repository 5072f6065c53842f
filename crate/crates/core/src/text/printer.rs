use std::fmt::Write;

use crate::ir::{Const, Expr, IrSb, IrType, Program, Statement};

const TEMPS_PER_LINE: usize = 8;

pub fn print_const(c: &Const) -> String {
    match c.ty {
        IrType::I1 => format!("{}", c.value & 1),
        ty => {
            let digits = (ty.bits() / 4) as usize;
            format!("0x{:0width$x}", c.value, width = digits)
        }
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match e {
        Expr::Const(c) => out.push_str(&print_const(c)),
        Expr::RdTmp(t) => {
            let _ = write!(out, "{t}");
        }
        Expr::Get { offset, ty } => {
            let _ = write!(out, "GET:{ty}(offset={offset})");
        }
        Expr::Load { ty, addr } => {
            let _ = write!(out, "LDle:{ty}(");
            write_expr(out, addr);
            out.push(')');
        }
        Expr::Binop { op, lhs, rhs } => {
            let _ = write!(out, "{op}(");
            write_expr(out, lhs);
            out.push(',');
            write_expr(out, rhs);
            out.push(')');
        }
        Expr::Unop { op, arg } => {
            let _ = write!(out, "{op}(");
            write_expr(out, arg);
            out.push(')');
        }
        Expr::Ite { cond, ift, iff } => {
            out.push_str("ITE(");
            write_expr(out, cond);
            out.push(',');
            write_expr(out, ift);
            out.push(',');
            write_expr(out, iff);
            out.push(')');
        }
        Expr::Opaque { name, args } => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_expr(out, a);
            }
            out.push(')');
        }
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

/// Canonical statement body, without the index prefix.
pub fn print_statement(s: &Statement) -> String {
    match s {
        Statement::IMark { addr, len, delta } => {
            format!("------ IMark({addr:#x},{len},{delta}) ------")
        }
        Statement::WrTmp { tmp, rhs } => format!("{tmp} = {}", print_expr(rhs)),
        Statement::Put { offset, data } => format!("PUT(offset={offset}) = {}", print_expr(data)),
        Statement::Store { addr, data } => {
            format!("STOREle({}) = {}", print_expr(addr), print_expr(data))
        }
        Statement::Exit {
            guard,
            target,
            jumpkind,
            offset,
        } => format!(
            "if ({}) {{ PUT(offset={offset}) = {target:#x}; Ijk_{} }}",
            print_expr(guard),
            jumpkind.name()
        ),
        Statement::NoOp => "NoOp".to_string(),
    }
}

/// Statement line as it appears inside a block, e.g. `03 | NoOp`.
pub fn print_statement_line(index: usize, s: &Statement) -> String {
    format!("{index:02} | {}", print_statement(s))
}

pub fn print_irsb(block: &IrSb) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "IRSB @ {:#x} {{", block.addr);
    let decls: Vec<String> = block
        .temps
        .iter()
        .map(|(t, ty)| format!("{t}:{}", ty.ity_name()))
        .collect();
    for chunk in decls.chunks(TEMPS_PER_LINE) {
        let _ = writeln!(out, "  {}", chunk.join(" "));
    }
    for (i, s) in block.stmts.iter().enumerate() {
        let _ = writeln!(out, "  {}", print_statement_line(i, s));
    }
    let _ = writeln!(
        out,
        "  NEXT: PUT(offset={}) = {}; Ijk_{}",
        block.next_offset,
        print_expr(&block.next),
        block.jumpkind.name()
    );
    out.push_str("}\n");
    out
}

/// Blocks in address order, separated by blank lines.
pub fn print_program(p: &Program) -> String {
    p.blocks
        .values()
        .map(print_irsb)
        .collect::<Vec<_>>()
        .join("\n")
}
