//! Concrete, deterministic evaluation of a single block.
//!
//! Values are `u64` words holding a fixed-width two's-complement integer
//! masked to the width of its type. Memory is little-endian and sparse.
//! Bytes that were never written read from a seeded pseudo-random
//! environment:
//!
//! * memory byte at address `a`: `mix64(seed, a) & 0xff`
//! * guest byte at offset `o`: `mix64(seed, G + o) & 0xff`, where `G` is
//!   the guest size
//!
//! so two states built from the same seed observe the same environment
//! without materializing it.
//!
//! Shift amounts at or above the operand width produce 0 (`Shl`, `Shr`) or
//! the sign fill (`Sar`). `ITE` evaluates only the selected branch.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{statement_cost, WeightTable};
use crate::ir::{BinOp, BinOpKind, Expr, IrSb, IrType, JumpKind, Statement, Temp, UnOp};

pub const DEFAULT_GUEST_SIZE: u32 = 4096;

const PHI: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer applied to `seed ^ (x * 0x9E3779B97F4A7C15)`.
///
/// Used for the lazy memory environment and for deriving per-run and
/// per-trial seeds from a master seed.
pub fn mix64(seed: u64, x: u64) -> u64 {
    let mut z = (seed ^ x.wrapping_mul(PHI)).wrapping_add(PHI);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum InterpError {
    #[error("division by zero")]
    DivByZero,
    #[error("opaque operator {0} has no concrete semantics")]
    OpaqueOp(String),
    #[error("guest access [{offset}, {offset}+{len}) outside guest state of {size} bytes")]
    GuestOutOfRange { offset: u32, len: u32, size: u32 },
    #[error("{0} read before it was written")]
    UnwrittenTemp(Temp),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{}: {error}", match .stmt { Some(i) => format!("stmt {i}"), None => "next".to_string() })]
pub struct ExecError {
    /// `None` when the fall-through target failed to evaluate.
    pub stmt: Option<usize>,
    pub error: InterpError,
    /// Cost units accumulated up to and including the failing statement.
    pub cost: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExitKind {
    SideExit(usize),
    FallThrough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExitOutcome {
    pub kind: ExitKind,
    pub target: u64,
    pub jumpkind: JumpKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockRun {
    pub exit: ExitOutcome,
    pub cost: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MachineState {
    seed: u64,
    guest_size: u32,
    /// Guest bytes that differ from the lazy environment: initial pokes
    /// plus everything the block wrote.
    guest: BTreeMap<u32, u8>,
    mem: BTreeMap<u64, u8>,
    mem_writes: Vec<(u64, u8)>,
    temps: BTreeMap<Temp, u64>,
}

impl MachineState {
    pub fn new(seed: u64) -> MachineState {
        MachineState::with_guest_size(seed, DEFAULT_GUEST_SIZE)
    }

    pub fn with_guest_size(seed: u64, guest_size: u32) -> MachineState {
        MachineState {
            seed,
            guest_size,
            guest: BTreeMap::new(),
            mem: BTreeMap::new(),
            mem_writes: Vec::new(),
            temps: BTreeMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn guest_size(&self) -> u32 {
        self.guest_size
    }

    fn default_guest_byte(&self, offset: u32) -> u8 {
        mix64(self.seed, self.guest_size as u64 + offset as u64) as u8
    }

    fn default_mem_byte(&self, addr: u64) -> u8 {
        mix64(self.seed, addr) as u8
    }

    fn check_guest(&self, offset: u32, len: u32) -> Result<(), InterpError> {
        if offset as u64 + len as u64 > self.guest_size as u64 {
            return Err(InterpError::GuestOutOfRange {
                offset,
                len,
                size: self.guest_size,
            });
        }
        Ok(())
    }

    pub fn guest_byte(&self, offset: u32) -> u8 {
        self.guest
            .get(&offset)
            .copied()
            .unwrap_or_else(|| self.default_guest_byte(offset))
    }

    pub fn mem_byte(&self, addr: u64) -> u8 {
        self.mem
            .get(&addr)
            .copied()
            .unwrap_or_else(|| self.default_mem_byte(addr))
    }

    /// Sets initial guest bytes. Not recorded as a write.
    pub fn poke_guest(&mut self, offset: u32, bytes: &[u8]) -> Result<(), InterpError> {
        self.check_guest(offset, bytes.len() as u32)?;
        for (i, b) in bytes.iter().enumerate() {
            self.guest.insert(offset + i as u32, *b);
        }
        Ok(())
    }

    /// Sets initial memory bytes. Not recorded in the write log.
    pub fn poke_mem(&mut self, addr: u64, bytes: &[u8]) {
        for (i, b) in bytes.iter().enumerate() {
            self.mem.insert(addr.wrapping_add(i as u64), *b);
        }
    }

    pub fn read_guest(&self, offset: u32, ty: IrType) -> Result<u64, InterpError> {
        let len = ty.bytes();
        self.check_guest(offset, len)?;
        let mut v = 0u64;
        for i in (0..len).rev() {
            v = (v << 8) | self.guest_byte(offset + i) as u64;
        }
        Ok(v & ty.mask())
    }

    fn write_guest(&mut self, offset: u32, ty: IrType, value: u64) -> Result<(), InterpError> {
        let len = ty.bytes();
        self.check_guest(offset, len)?;
        for i in 0..len {
            self.guest.insert(offset + i, (value >> (8 * i)) as u8);
        }
        Ok(())
    }

    pub fn read_mem(&self, addr: u64, ty: IrType) -> u64 {
        let mut v = 0u64;
        for i in (0..ty.bytes() as u64).rev() {
            v = (v << 8) | self.mem_byte(addr.wrapping_add(i)) as u64;
        }
        v & ty.mask()
    }

    fn write_mem(&mut self, addr: u64, ty: IrType, value: u64) {
        for i in 0..ty.bytes() as u64 {
            let a = addr.wrapping_add(i);
            let b = (value >> (8 * i)) as u8;
            self.mem.insert(a, b);
            self.mem_writes.push((a, b));
        }
    }

    /// Ordered log of byte writes made by executed stores.
    pub fn mem_writes(&self) -> &[(u64, u8)] {
        &self.mem_writes
    }

    /// Final value of every memory byte ever written or poked.
    pub fn memory_image(&self) -> &BTreeMap<u64, u8> {
        &self.mem
    }

    /// Offsets whose bytes were poked or written.
    pub fn touched_guest_offsets(&self) -> impl Iterator<Item = u32> + '_ {
        self.guest.keys().copied()
    }

    /// The full guest state, materialized.
    pub fn guest_bytes(&self) -> Vec<u8> {
        (0..self.guest_size).map(|o| self.guest_byte(o)).collect()
    }

    pub fn temp(&self, t: Temp) -> Option<u64> {
        self.temps.get(&t).copied()
    }

    pub fn eval_expr(&self, e: &Expr) -> Result<u64, InterpError> {
        match e {
            Expr::Const(c) => Ok(c.value & c.ty.mask()),
            Expr::RdTmp(t) => self.temp(*t).ok_or(InterpError::UnwrittenTemp(*t)),
            Expr::Get { offset, ty } => self.read_guest(*offset, *ty),
            Expr::Load { ty, addr } => {
                let a = self.eval_expr(addr)?;
                Ok(self.read_mem(a, *ty))
            }
            Expr::Binop { op, lhs, rhs } => {
                let a = self.eval_expr(lhs)?;
                let b = self.eval_expr(rhs)?;
                eval_binop(*op, a, b)
            }
            Expr::Unop { op, arg } => Ok(eval_unop(*op, self.eval_expr(arg)?)),
            Expr::Ite { cond, ift, iff } => {
                if self.eval_expr(cond)? & 1 == 1 {
                    self.eval_expr(ift)
                } else {
                    self.eval_expr(iff)
                }
            }
            Expr::Opaque { name, .. } => Err(InterpError::OpaqueOp(name.clone())),
        }
    }

    fn exec_statement(
        &mut self,
        s: &Statement,
        temps: &BTreeMap<Temp, IrType>,
    ) -> Result<bool, InterpError> {
        match s {
            Statement::IMark { .. } | Statement::NoOp => {}
            Statement::WrTmp { tmp, rhs } => {
                let v = self.eval_expr(rhs)?;
                self.temps.insert(*tmp, v);
            }
            Statement::Put { offset, data } => {
                let v = self.eval_expr(data)?;
                let ty = value_type(data, temps);
                self.write_guest(*offset, ty, v)?;
            }
            Statement::Store { addr, data } => {
                let a = self.eval_expr(addr)?;
                let v = self.eval_expr(data)?;
                let ty = value_type(data, temps);
                self.write_mem(a, ty, v);
            }
            Statement::Exit { guard, .. } => {
                return Ok(self.eval_expr(guard)? & 1 == 1);
            }
        }
        Ok(false)
    }

    /// Runs `block` from the current state. Temps are reset first; guest
    /// and memory changes persist in `self`.
    pub fn exec_block(&mut self, block: &IrSb, weights: &WeightTable) -> Result<BlockRun, ExecError> {
        self.temps.clear();
        let mut cost = 0u64;
        for (i, s) in block.stmts.iter().enumerate() {
            cost += statement_cost(s, weights);
            let taken = self.exec_statement(s, &block.temps).map_err(|error| ExecError {
                stmt: Some(i),
                error,
                cost,
            })?;
            if taken {
                let Statement::Exit {
                    target, jumpkind, ..
                } = s
                else {
                    unreachable!("only exits report a taken branch")
                };
                return Ok(BlockRun {
                    exit: ExitOutcome {
                        kind: ExitKind::SideExit(i),
                        target: *target,
                        jumpkind: *jumpkind,
                    },
                    cost,
                });
            }
        }
        let target = self.eval_expr(&block.next).map_err(|error| ExecError {
            stmt: None,
            error,
            cost,
        })?;
        Ok(BlockRun {
            exit: ExitOutcome {
                kind: ExitKind::FallThrough,
                target,
                jumpkind: block.jumpkind,
            },
            cost,
        })
    }
}

fn value_type(e: &Expr, temps: &BTreeMap<Temp, IrType>) -> IrType {
    crate::ir::type_of(e, temps)
        .ok()
        .flatten()
        .unwrap_or(IrType::I64)
}

fn sext(v: u64, ty: IrType) -> i64 {
    let shift = 64 - ty.bits();
    ((v << shift) as i64) >> shift
}

pub(crate) fn eval_binop(op: BinOp, a: u64, b: u64) -> Result<u64, InterpError> {
    use BinOpKind::*;
    let ty = op.width;
    let bits = ty.bits() as u64;
    let m = ty.mask();
    let (a, b) = (a & m, b & op.arg_types().1.mask());
    let flag = |c: bool| c as u64;
    let v = match op.kind {
        Add => a.wrapping_add(b),
        Sub => a.wrapping_sub(b),
        Mul => a.wrapping_mul(b),
        And => a & b,
        Or => a | b,
        Xor => a ^ b,
        Shl => {
            if b >= bits {
                0
            } else {
                a << b
            }
        }
        Shr => {
            if b >= bits {
                0
            } else {
                a >> b
            }
        }
        Sar => (sext(a, ty) >> b.min(bits - 1)) as u64,
        DivU => {
            if b == 0 {
                return Err(InterpError::DivByZero);
            }
            a / b
        }
        DivS => {
            if b == 0 {
                return Err(InterpError::DivByZero);
            }
            sext(a, ty).wrapping_div(sext(b, ty)) as u64
        }
        CmpEQ => return Ok(flag(a == b)),
        CmpNE => return Ok(flag(a != b)),
        CmpLTS => return Ok(flag(sext(a, ty) < sext(b, ty))),
        CmpLTU => return Ok(flag(a < b)),
        CmpLES => return Ok(flag(sext(a, ty) <= sext(b, ty))),
        CmpLEU => return Ok(flag(a <= b)),
    };
    Ok(v & m)
}

pub(crate) fn eval_unop(op: UnOp, a: u64) -> u64 {
    let a = a & op.arg_type().mask();
    match op {
        UnOp::Not(ty) => !a & ty.mask(),
        UnOp::Widen1Uto64 | UnOp::Widen8Uto64 | UnOp::Widen32Uto64 => a,
        UnOp::Widen32Sto64 => sext(a, IrType::I32) as u64,
        UnOp::Narrow64to32 => a & IrType::I32.mask(),
        UnOp::Narrow64to8 => a & IrType::I8.mask(),
        UnOp::Narrow64to1 => a & 1,
    }
}
