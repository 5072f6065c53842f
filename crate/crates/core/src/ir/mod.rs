//! In-memory model of IR super-blocks.
//!
//! A block ([`IrSb`]) is a typed temp environment, an ordered list of
//! [`Statement`]s and a fall-through exit. Temps are single-assignment and
//! block-local. Guest state is addressed by byte offset only.

mod ops;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use ops::{BinOp, BinOpKind, UnOp};
pub(crate) use validate::statement_type_issues;
pub use validate::{type_of, validate, Violation, ViolationKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IrType {
    I1,
    I8,
    I16,
    I32,
    I64,
}

impl IrType {
    pub const fn bits(self) -> u32 {
        match self {
            IrType::I1 => 1,
            IrType::I8 => 8,
            IrType::I16 => 16,
            IrType::I32 => 32,
            IrType::I64 => 64,
        }
    }

    /// Storage size in bytes; `I1` occupies one byte.
    pub const fn bytes(self) -> u32 {
        match self {
            IrType::I1 | IrType::I8 => 1,
            IrType::I16 => 2,
            IrType::I32 => 4,
            IrType::I64 => 8,
        }
    }

    pub const fn mask(self) -> u64 {
        match self {
            IrType::I64 => u64::MAX,
            other => (1u64 << other.bits()) - 1,
        }
    }

    pub const fn fits(self, value: u64) -> bool {
        value & !self.mask() == 0
    }

    pub fn from_bits(bits: u32) -> Option<IrType> {
        match bits {
            1 => Some(IrType::I1),
            8 => Some(IrType::I8),
            16 => Some(IrType::I16),
            32 => Some(IrType::I32),
            64 => Some(IrType::I64),
            _ => None,
        }
    }

    /// Name used in temp declarations, e.g. `Ity_I64`.
    pub fn ity_name(self) -> &'static str {
        match self {
            IrType::I1 => "Ity_I1",
            IrType::I8 => "Ity_I8",
            IrType::I16 => "Ity_I16",
            IrType::I32 => "Ity_I32",
            IrType::I64 => "Ity_I64",
        }
    }

    /// Short name used in `GET:` and `LDle:` annotations, e.g. `I64`.
    pub fn short_name(self) -> &'static str {
        &self.ity_name()[4..]
    }

    pub fn from_short_name(name: &str) -> Option<IrType> {
        match name {
            "I1" => Some(IrType::I1),
            "I8" => Some(IrType::I8),
            "I16" => Some(IrType::I16),
            "I32" => Some(IrType::I32),
            "I64" => Some(IrType::I64),
            _ => None,
        }
    }
}

impl fmt::Display for IrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

/// A block-local temporary, printed as `t<N>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Temp(pub u32);

impl fmt::Display for Temp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Const {
    pub value: u64,
    pub ty: IrType,
}

impl Const {
    /// Builds a constant, truncating `value` to the width of `ty`.
    pub fn new(value: u64, ty: IrType) -> Const {
        Const {
            value: value & ty.mask(),
            ty,
        }
    }

    pub fn u64(value: u64) -> Const {
        Const::new(value, IrType::I64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JumpKind {
    Boring,
    Call,
    Ret,
}

impl JumpKind {
    pub fn name(self) -> &'static str {
        match self {
            JumpKind::Boring => "Boring",
            JumpKind::Call => "Call",
            JumpKind::Ret => "Ret",
        }
    }

    pub fn from_name(name: &str) -> Option<JumpKind> {
        match name {
            "Boring" => Some(JumpKind::Boring),
            "Call" => Some(JumpKind::Call),
            "Ret" => Some(JumpKind::Ret),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Const(Const),
    RdTmp(Temp),
    Get { offset: u32, ty: IrType },
    Load { ty: IrType, addr: Box<Expr> },
    Binop { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Unop { op: UnOp, arg: Box<Expr> },
    Ite { cond: Box<Expr>, ift: Box<Expr>, iff: Box<Expr> },
    /// An operator outside the normative table. Carries no typing or
    /// evaluation semantics.
    Opaque { name: String, args: Vec<Expr> },
}

impl Expr {
    pub fn constant(value: u64, ty: IrType) -> Expr {
        Expr::Const(Const::new(value, ty))
    }

    pub fn tmp(index: u32) -> Expr {
        Expr::RdTmp(Temp(index))
    }

    pub fn binop(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binop {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn unop(op: UnOp, arg: Expr) -> Expr {
        Expr::Unop {
            op,
            arg: Box::new(arg),
        }
    }

    pub fn load(ty: IrType, addr: Expr) -> Expr {
        Expr::Load {
            ty,
            addr: Box::new(addr),
        }
    }

    pub fn ite(cond: Expr, ift: Expr, iff: Expr) -> Expr {
        Expr::Ite {
            cond: Box::new(cond),
            ift: Box::new(ift),
            iff: Box::new(iff),
        }
    }

    /// Direct sub-expressions, in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Const(_) | Expr::RdTmp(_) | Expr::Get { .. } => Vec::new(),
            Expr::Load { addr, .. } => vec![addr],
            Expr::Binop { lhs, rhs, .. } => vec![lhs, rhs],
            Expr::Unop { arg, .. } => vec![arg],
            Expr::Ite { cond, ift, iff } => vec![cond, ift, iff],
            Expr::Opaque { args, .. } => args.iter().collect(),
        }
    }

    /// Pre-order walk over this node and all descendants.
    pub fn visit<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        for child in self.children() {
            child.visit(f);
        }
    }

    pub fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        let mut hit = false;
        self.visit(&mut |e| hit |= pred(e));
        hit
    }

    pub fn reads_temp(&self, t: Temp) -> bool {
        self.any(&|e| matches!(e, Expr::RdTmp(x) if *x == t))
    }

    pub fn has_opaque(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Opaque { .. }))
    }

    pub fn has_load(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Load { .. }))
    }

    /// True when evaluation may fail at run time (division or unknown ops).
    pub fn may_fault(&self) -> bool {
        self.any(&|e| match e {
            Expr::Binop { op, .. } => op.kind.is_div(),
            Expr::Opaque { .. } => true,
            _ => false,
        })
    }

    /// Guest byte ranges `(offset, len)` read through `GET`.
    pub fn guest_reads(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        self.visit(&mut |e| {
            if let Expr::Get { offset, ty } = e {
                out.push((*offset, ty.bytes()));
            }
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Statement {
    IMark { addr: u64, len: u32, delta: u32 },
    WrTmp { tmp: Temp, rhs: Expr },
    Put { offset: u32, data: Expr },
    Store { addr: Expr, data: Expr },
    /// Side exit. `offset` is the guest offset of the program counter the
    /// exit writes `target` to.
    Exit {
        guard: Expr,
        target: u64,
        jumpkind: JumpKind,
        offset: u32,
    },
    NoOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StmtKind {
    IMark,
    WrTmp,
    Put,
    Store,
    Exit,
    NoOp,
}

impl Statement {
    pub fn kind(&self) -> StmtKind {
        match self {
            Statement::IMark { .. } => StmtKind::IMark,
            Statement::WrTmp { .. } => StmtKind::WrTmp,
            Statement::Put { .. } => StmtKind::Put,
            Statement::Store { .. } => StmtKind::Store,
            Statement::Exit { .. } => StmtKind::Exit,
            Statement::NoOp => StmtKind::NoOp,
        }
    }

    /// IMark and NoOp carry no semantics.
    pub fn is_metadata(&self) -> bool {
        matches!(self, Statement::IMark { .. } | Statement::NoOp)
    }

    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Statement::IMark { .. } | Statement::NoOp => Vec::new(),
            Statement::WrTmp { rhs, .. } => vec![rhs],
            Statement::Put { data, .. } => vec![data],
            Statement::Store { addr, data } => vec![addr, data],
            Statement::Exit { guard, .. } => vec![guard],
        }
    }

    pub fn reads_temp(&self, t: Temp) -> bool {
        self.exprs().iter().any(|e| e.reads_temp(t))
    }

    pub fn temps_read(&self) -> BTreeSet<Temp> {
        let mut out = BTreeSet::new();
        for e in self.exprs() {
            e.visit(&mut |x| {
                if let Expr::RdTmp(t) = x {
                    out.insert(*t);
                }
            });
        }
        out
    }

    pub fn has_opaque(&self) -> bool {
        self.exprs().iter().any(|e| e.has_opaque())
    }

    pub fn may_fault(&self) -> bool {
        self.exprs().iter().any(|e| e.may_fault())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IrSb {
    pub addr: u64,
    pub temps: BTreeMap<Temp, IrType>,
    pub stmts: Vec<Statement>,
    pub next: Expr,
    pub jumpkind: JumpKind,
    /// Guest offset of the program counter written by the fall-through exit.
    pub next_offset: u32,
}

/// Guest offset of the program counter used by default (amd64 `rip`).
pub const DEFAULT_PC_OFFSET: u32 = 184;

impl IrSb {
    pub fn new(addr: u64) -> IrSb {
        IrSb {
            addr,
            temps: BTreeMap::new(),
            stmts: Vec::new(),
            next: Expr::constant(addr, IrType::I64),
            jumpkind: JumpKind::Boring,
            next_offset: DEFAULT_PC_OFFSET,
        }
    }

    /// Whether any expression uses an operator outside the normative table.
    pub fn is_opaque(&self) -> bool {
        self.stmts.iter().any(Statement::has_opaque) || self.next.has_opaque()
    }

    /// Temps read or written anywhere in the block, including `next`.
    pub fn referenced_temps(&self) -> BTreeSet<Temp> {
        let mut out = BTreeSet::new();
        for s in &self.stmts {
            if let Statement::WrTmp { tmp, .. } = s {
                out.insert(*tmp);
            }
            out.extend(s.temps_read());
        }
        self.next.visit(&mut |e| {
            if let Expr::RdTmp(t) = e {
                out.insert(*t);
            }
        });
        out
    }

    /// Whether `t` is read by any statement or by `next`.
    pub fn temp_is_read(&self, t: Temp) -> bool {
        self.stmts.iter().any(|s| s.reads_temp(t)) || self.next.reads_temp(t)
    }

    /// Index of the statement that writes `t`, if any.
    pub fn def_index(&self, t: Temp) -> Option<usize> {
        self.stmts
            .iter()
            .position(|s| matches!(s, Statement::WrTmp { tmp, .. } if *tmp == t))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Program {
    pub name: String,
    pub blocks: BTreeMap<u64, IrSb>,
}

impl Program {
    pub fn new(name: impl Into<String>) -> Program {
        Program {
            name: name.into(),
            blocks: BTreeMap::new(),
        }
    }

    /// Total number of statements across all blocks, metadata included.
    pub fn total_statements(&self) -> usize {
        self.blocks.values().map(|b| b.stmts.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masks_and_fits() {
        assert_eq!(IrType::I1.mask(), 1);
        assert_eq!(IrType::I8.mask(), 0xff);
        assert_eq!(IrType::I64.mask(), u64::MAX);
        assert!(IrType::I1.fits(1));
        assert!(!IrType::I1.fits(2));
        assert!(!IrType::I32.fits(1 << 32));
        assert_eq!(Const::new(0x1ff, IrType::I8).value, 0xff);
    }

    #[test]
    fn fault_and_load_detection() {
        let div = BinOp::from_name("DivU64").unwrap();
        let e = Expr::binop(div, Expr::tmp(0), Expr::constant(3, IrType::I64));
        assert!(e.may_fault());
        assert!(!e.has_load());
        let l = Expr::load(IrType::I64, Expr::tmp(1));
        assert!(l.has_load());
        assert!(l.reads_temp(Temp(1)));
        assert!(!l.reads_temp(Temp(0)));
    }
}
