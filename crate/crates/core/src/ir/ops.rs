//! The normative operator table.
//!
//! Only the operators listed here have defined typing and evaluation
//! semantics. Any other operator name in a source file becomes
//! [`Expr::Opaque`](super::Expr::Opaque).

use std::fmt;

use serde::{Deserialize, Serialize};

use super::IrType;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOpKind {
    Add,
    Sub,
    Mul,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Sar,
    DivU,
    DivS,
    CmpEQ,
    CmpNE,
    CmpLTS,
    CmpLTU,
    CmpLES,
    CmpLEU,
}

impl BinOpKind {
    pub fn is_shift(self) -> bool {
        matches!(self, BinOpKind::Shl | BinOpKind::Shr | BinOpKind::Sar)
    }

    pub fn is_compare(self) -> bool {
        matches!(
            self,
            BinOpKind::CmpEQ
                | BinOpKind::CmpNE
                | BinOpKind::CmpLTS
                | BinOpKind::CmpLTU
                | BinOpKind::CmpLES
                | BinOpKind::CmpLEU
        )
    }

    pub fn is_div(self) -> bool {
        matches!(self, BinOpKind::DivU | BinOpKind::DivS)
    }

    /// `a op b == b op a` for every pair of operands.
    pub fn is_commutative(self) -> bool {
        matches!(
            self,
            BinOpKind::Add
                | BinOpKind::Mul
                | BinOpKind::And
                | BinOpKind::Or
                | BinOpKind::Xor
                | BinOpKind::CmpEQ
                | BinOpKind::CmpNE
        )
    }
}

/// A binary operator at a fixed operand width, e.g. `Add64` or `CmpLT64S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BinOp {
    pub kind: BinOpKind,
    pub width: IrType,
}

const INT_WIDTHS: [IrType; 4] = [IrType::I8, IrType::I16, IrType::I32, IrType::I64];

impl BinOp {
    pub const fn new(kind: BinOpKind, width: IrType) -> BinOp {
        BinOp { kind, width }
    }

    /// Every operator in the table.
    pub fn all() -> Vec<BinOp> {
        use BinOpKind::*;
        let mut ops = Vec::new();
        for kind in [Add, Sub, Mul, And, Or, Xor, Shl, Shr, Sar, CmpEQ, CmpNE] {
            for width in INT_WIDTHS {
                ops.push(BinOp::new(kind, width));
            }
        }
        for kind in [DivU, DivS, CmpLTS, CmpLTU, CmpLES, CmpLEU] {
            ops.push(BinOp::new(kind, IrType::I64));
        }
        ops
    }

    pub fn from_name(name: &str) -> Option<BinOp> {
        BinOp::all().into_iter().find(|op| op.name() == name)
    }

    pub fn name(&self) -> String {
        use BinOpKind::*;
        let bits = self.width.bits();
        match self.kind {
            Add => format!("Add{bits}"),
            Sub => format!("Sub{bits}"),
            Mul => format!("Mul{bits}"),
            And => format!("And{bits}"),
            Or => format!("Or{bits}"),
            Xor => format!("Xor{bits}"),
            Shl => format!("Shl{bits}"),
            Shr => format!("Shr{bits}"),
            Sar => format!("Sar{bits}"),
            DivU => format!("DivU{bits}"),
            DivS => format!("DivS{bits}"),
            CmpEQ => format!("CmpEQ{bits}"),
            CmpNE => format!("CmpNE{bits}"),
            CmpLTS => format!("CmpLT{bits}S"),
            CmpLTU => format!("CmpLT{bits}U"),
            CmpLES => format!("CmpLE{bits}S"),
            CmpLEU => format!("CmpLE{bits}U"),
        }
    }

    /// Operand types `(lhs, rhs)`.
    pub fn arg_types(&self) -> (IrType, IrType) {
        if self.kind.is_shift() {
            (self.width, IrType::I8)
        } else {
            (self.width, self.width)
        }
    }

    pub fn result_type(&self) -> IrType {
        if self.kind.is_compare() {
            IrType::I1
        } else {
            self.width
        }
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnOp {
    Not(IrType),
    Widen1Uto64,
    Widen8Uto64,
    Widen32Uto64,
    Widen32Sto64,
    Narrow64to32,
    Narrow64to8,
    Narrow64to1,
}

impl UnOp {
    pub fn all() -> Vec<UnOp> {
        let mut ops: Vec<UnOp> = [IrType::I1, IrType::I8, IrType::I16, IrType::I32, IrType::I64]
            .into_iter()
            .map(UnOp::Not)
            .collect();
        ops.extend([
            UnOp::Widen1Uto64,
            UnOp::Widen8Uto64,
            UnOp::Widen32Uto64,
            UnOp::Widen32Sto64,
            UnOp::Narrow64to32,
            UnOp::Narrow64to8,
            UnOp::Narrow64to1,
        ]);
        ops
    }

    pub fn from_name(name: &str) -> Option<UnOp> {
        UnOp::all().into_iter().find(|op| op.name() == name)
    }

    pub fn name(&self) -> String {
        match self {
            UnOp::Not(ty) => format!("Not{}", ty.bits()),
            UnOp::Widen1Uto64 => "1Uto64".into(),
            UnOp::Widen8Uto64 => "8Uto64".into(),
            UnOp::Widen32Uto64 => "32Uto64".into(),
            UnOp::Widen32Sto64 => "32Sto64".into(),
            UnOp::Narrow64to32 => "64to32".into(),
            UnOp::Narrow64to8 => "64to8".into(),
            UnOp::Narrow64to1 => "64to1".into(),
        }
    }

    pub fn arg_type(&self) -> IrType {
        match self {
            UnOp::Not(ty) => *ty,
            UnOp::Widen1Uto64 => IrType::I1,
            UnOp::Widen8Uto64 => IrType::I8,
            UnOp::Widen32Uto64 | UnOp::Widen32Sto64 => IrType::I32,
            UnOp::Narrow64to32 | UnOp::Narrow64to8 | UnOp::Narrow64to1 => IrType::I64,
        }
    }

    pub fn result_type(&self) -> IrType {
        match self {
            UnOp::Not(ty) => *ty,
            UnOp::Widen1Uto64 | UnOp::Widen8Uto64 | UnOp::Widen32Uto64 | UnOp::Widen32Sto64 => {
                IrType::I64
            }
            UnOp::Narrow64to32 => IrType::I32,
            UnOp::Narrow64to8 => IrType::I8,
            UnOp::Narrow64to1 => IrType::I1,
        }
    }
}

impl fmt::Display for UnOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}
