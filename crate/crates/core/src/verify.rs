//! Equivalence checking of an original block against a rewritten one.
//!
//! Two checks are available. [`structural_compare`] diffs the components
//! of both blocks (temps, constants, guest offsets, statement shape).
//! [`differential_verify`] executes both blocks from identical seeded
//! states and compares everything a block can make visible: guest bytes,
//! memory writes and the exit taken. Temps are block-local and never
//! compared.

use std::collections::BTreeSet;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::WeightTable;
use crate::interp::{mix64, ExitOutcome, InterpError, MachineState};
use crate::ir::{Const, Expr, IrSb, Statement, StmtKind};

pub const DEFAULT_TRIALS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralDiff {
    /// Referenced temps in `b` minus referenced temps in `a`.
    pub temp_count_delta: i64,
    pub const_set_diff: BTreeSet<Const>,
    pub offset_set_diff: BTreeSet<u32>,
    /// Statement-kind sequences agree once NoOps are dropped.
    pub shape_equal: bool,
}

impl StructuralDiff {
    pub fn is_zero(&self) -> bool {
        self.temp_count_delta == 0
            && self.const_set_diff.is_empty()
            && self.offset_set_diff.is_empty()
            && self.shape_equal
    }
}

fn consts_of(b: &IrSb) -> BTreeSet<Const> {
    let mut out = BTreeSet::new();
    let mut add = |e: &Expr| {
        e.visit(&mut |x| {
            if let Expr::Const(c) = x {
                out.insert(*c);
            }
        })
    };
    for s in &b.stmts {
        for e in s.exprs() {
            add(e);
        }
    }
    add(&b.next);
    out
}

fn offsets_of(b: &IrSb) -> BTreeSet<u32> {
    let mut out = BTreeSet::new();
    for s in &b.stmts {
        match s {
            Statement::Put { offset, .. } | Statement::Exit { offset, .. } => {
                out.insert(*offset);
            }
            _ => {}
        }
        for e in s.exprs() {
            out.extend(e.guest_reads().into_iter().map(|(o, _)| o));
        }
    }
    out.extend(b.next.guest_reads().into_iter().map(|(o, _)| o));
    out.insert(b.next_offset);
    out
}

fn shape(b: &IrSb) -> Vec<StmtKind> {
    b.stmts
        .iter()
        .map(Statement::kind)
        .filter(|k| *k != StmtKind::NoOp)
        .collect()
}

pub fn structural_compare(a: &IrSb, b: &IrSb) -> StructuralDiff {
    let ca = consts_of(a);
    let cb = consts_of(b);
    let oa = offsets_of(a);
    let ob = offsets_of(b);
    StructuralDiff {
        temp_count_delta: b.referenced_temps().len() as i64 - a.referenced_temps().len() as i64,
        const_set_diff: ca.symmetric_difference(&cb).copied().collect(),
        offset_set_diff: oa.symmetric_difference(&ob).copied().collect(),
        shape_equal: shape(a) == shape(b),
    }
}

/// How memory effects are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MemoryCompare {
    /// The ordered list of `(address, byte)` writes must match.
    #[default]
    WriteList,
    /// Only the final value of every written byte must match. Used for
    /// store merging, which drops a write the later store overwrites.
    FinalImage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyPolicy {
    pub trials: usize,
    pub seed: u64,
    pub structural_required: bool,
    pub memory: MemoryCompare,
}

impl Default for VerifyPolicy {
    fn default() -> Self {
        VerifyPolicy {
            trials: DEFAULT_TRIALS,
            seed: 0,
            structural_required: false,
            memory: MemoryCompare::WriteList,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Verdict {
    Equivalent {
        trials: usize,
    },
    Mismatch {
        /// State seed of the failing trial; replaying it reproduces the
        /// divergence exactly.
        counterexample_seed: u64,
        trial: usize,
        first_divergence: String,
    },
    StructuralOnly {
        reason: String,
    },
    Rejected {
        reason: String,
    },
}

impl Verdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Verdict::Equivalent { .. })
    }

    /// Equivalent, or structurally identical where execution is impossible.
    pub fn is_accepted(&self) -> bool {
        matches!(self, Verdict::Equivalent { .. } | Verdict::StructuralOnly { .. })
    }

    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Equivalent { .. } => "Equivalent",
            Verdict::Mismatch { .. } => "Mismatch",
            Verdict::StructuralOnly { .. } => "StructuralOnly",
            Verdict::Rejected { .. } => "Rejected",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Equivalent { trials } => write!(f, "Equivalent({trials} trials)"),
            Verdict::Mismatch {
                counterexample_seed,
                trial,
                first_divergence,
            } => write!(
                f,
                "Mismatch(trial {trial}, seed {counterexample_seed:#x}): {first_divergence}"
            ),
            Verdict::StructuralOnly { reason } => write!(f, "StructuralOnly: {reason}"),
            Verdict::Rejected { reason } => write!(f, "Rejected: {reason}"),
        }
    }
}

/// Seed of the `trial`-th differential trial.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    mix64(seed, trial as u64)
}

struct Observation {
    outcome: Result<ExitOutcome, (Option<usize>, InterpError)>,
    state: MachineState,
}

fn observe(b: &IrSb, state_seed: u64) -> Observation {
    let mut state = MachineState::new(state_seed);
    let outcome = state
        .exec_block(b, &WeightTable::default())
        .map(|r| r.exit)
        .map_err(|e| (e.stmt, e.error));
    Observation { outcome, state }
}

fn environmental(e: &InterpError) -> bool {
    !matches!(e, InterpError::DivByZero)
}

enum TrialResult {
    Same,
    Diverged(String),
    Unusable(String),
}

fn compare_state(a: &MachineState, b: &MachineState, memory: MemoryCompare) -> Option<String> {
    let offsets: BTreeSet<u32> = a.touched_guest_offsets().chain(b.touched_guest_offsets()).collect();
    for o in offsets {
        let (x, y) = (a.guest_byte(o), b.guest_byte(o));
        if x != y {
            return Some(format!("guest byte {o}: {x:#04x} vs {y:#04x}"));
        }
    }
    match memory {
        MemoryCompare::WriteList => {
            let (wa, wb) = (a.mem_writes(), b.mem_writes());
            for (i, (x, y)) in wa.iter().zip(wb).enumerate() {
                if x != y {
                    return Some(format!(
                        "memory write #{i}: [{:#x}]={:#04x} vs [{:#x}]={:#04x}",
                        x.0, x.1, y.0, y.1
                    ));
                }
            }
            if wa.len() != wb.len() {
                return Some(format!("memory write count: {} vs {}", wa.len(), wb.len()));
            }
        }
        MemoryCompare::FinalImage => {
            let addrs: BTreeSet<u64> = a
                .memory_image()
                .keys()
                .chain(b.memory_image().keys())
                .copied()
                .collect();
            for addr in addrs {
                let (x, y) = (a.mem_byte(addr), b.mem_byte(addr));
                if x != y {
                    return Some(format!("memory byte {addr:#x}: {x:#04x} vs {y:#04x}"));
                }
            }
        }
    }
    None
}

fn run_trial(a: &IrSb, b: &IrSb, state_seed: u64, memory: MemoryCompare) -> TrialResult {
    let oa = observe(a, state_seed);
    let ob = observe(b, state_seed);
    match (&oa.outcome, &ob.outcome) {
        (Err((_, e)), _) if environmental(e) => {
            TrialResult::Unusable(format!("original cannot execute: {e}"))
        }
        (Ok(x), Ok(y)) if x != y => TrialResult::Diverged(format!("exit {x:?} vs {y:?}")),
        (Ok(_), Err((at, e))) => {
            TrialResult::Diverged(format!("rewrite faults at {at:?} ({e}); original does not"))
        }
        (Err((at, e)), Ok(_)) => {
            TrialResult::Diverged(format!("original faults at {at:?} ({e}); rewrite does not"))
        }
        (Err(x), Err(y)) if x != y => {
            TrialResult::Diverged(format!("faults differ: {x:?} vs {y:?}"))
        }
        _ => match compare_state(&oa.state, &ob.state, memory) {
            Some(d) => TrialResult::Diverged(d),
            None => TrialResult::Same,
        },
    }
}

/// Re-executes a single trial; returns the divergence, if any.
pub fn replay_trial(a: &IrSb, b: &IrSb, state_seed: u64, memory: MemoryCompare) -> Option<String> {
    match run_trial(a, b, state_seed, memory) {
        TrialResult::Same => None,
        TrialResult::Diverged(d) | TrialResult::Unusable(d) => Some(d),
    }
}

fn differential(a: &IrSb, b: &IrSb, trials: usize, seed: u64, memory: MemoryCompare) -> Verdict {
    if a.addr != b.addr {
        return Verdict::Rejected {
            reason: format!("block addresses differ: {:#x} vs {:#x}", a.addr, b.addr),
        };
    }
    if a.is_opaque() || b.is_opaque() {
        let diff = structural_compare(a, b);
        return if diff.is_zero() {
            Verdict::StructuralOnly {
                reason: "opaque operator; structurally identical".into(),
            }
        } else {
            Verdict::Rejected {
                reason: "opaque operator and structural differences".into(),
            }
        };
    }
    let first_bad = (0..trials).into_par_iter().find_map_first(|i| {
        let s = trial_seed(seed, i);
        match run_trial(a, b, s, memory) {
            TrialResult::Same => None,
            other => Some((i, s, other)),
        }
    });
    match first_bad {
        None => Verdict::Equivalent { trials },
        Some((trial, s, TrialResult::Diverged(d))) => Verdict::Mismatch {
            counterexample_seed: s,
            trial,
            first_divergence: d,
        },
        Some((_, _, TrialResult::Unusable(reason))) => Verdict::Rejected { reason },
        Some((_, _, TrialResult::Same)) => unreachable!("filtered above"),
    }
}

/// Executes both blocks from `trials` seeded states and compares guest
/// bytes, the ordered memory write list and the exit outcome.
pub fn differential_verify(a: &IrSb, b: &IrSb, trials: usize, seed: u64) -> Verdict {
    differential(a, b, trials, seed, MemoryCompare::WriteList)
}

pub fn verify_rewrite(orig: &IrSb, opt: &IrSb, policy: &VerifyPolicy) -> Verdict {
    let diff = structural_compare(orig, opt);
    if policy.structural_required && !diff.is_zero() {
        return Verdict::Rejected {
            reason: format!("structural differences: {diff:?}"),
        };
    }
    differential(orig, opt, policy.trials, policy.seed, policy.memory)
}
