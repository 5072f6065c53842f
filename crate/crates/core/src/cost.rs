//! Static statement weights, program-wide ranking and block profiling.
//!
//! A statement's cost is its base weight plus the weight of every node in
//! its expression trees. Stores and multiply/divide arithmetic are the
//! heaviest classes; instruction marks and no-ops are free.

use std::cmp::Ordering;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::interp::{mix64, MachineState};
use crate::ir::{BinOpKind, Expr, IrSb, Program, Statement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightTable {
    pub imark: u64,
    pub noop: u64,
    pub get: u64,
    pub put_base: u64,
    pub wrtmp_base: u64,
    pub store_base: u64,
    pub exit: u64,
    pub ite: u64,
    pub unop: u64,
    pub binop_simple: u64,
    pub binop_mul: u64,
    pub binop_div: u64,
    pub load: u64,
    pub opaque: u64,
}

impl Default for WeightTable {
    fn default() -> Self {
        WeightTable {
            imark: 0,
            noop: 0,
            get: 1,
            put_base: 1,
            wrtmp_base: 1,
            store_base: 6,
            exit: 3,
            ite: 3,
            unop: 1,
            binop_simple: 2,
            binop_mul: 4,
            binop_div: 8,
            load: 5,
            opaque: 4,
        }
    }
}

impl WeightTable {
    /// Every weight multiplied by `factor`.
    pub fn scaled(&self, factor: u64) -> WeightTable {
        WeightTable {
            imark: self.imark * factor,
            noop: self.noop * factor,
            get: self.get * factor,
            put_base: self.put_base * factor,
            wrtmp_base: self.wrtmp_base * factor,
            store_base: self.store_base * factor,
            exit: self.exit * factor,
            ite: self.ite * factor,
            unop: self.unop * factor,
            binop_simple: self.binop_simple * factor,
            binop_mul: self.binop_mul * factor,
            binop_div: self.binop_div * factor,
            load: self.load * factor,
            opaque: self.opaque * factor,
        }
    }
}

pub fn expr_cost(e: &Expr, w: &WeightTable) -> u64 {
    let own = match e {
        Expr::Const(_) | Expr::RdTmp(_) => 0,
        Expr::Get { .. } => w.get,
        Expr::Load { .. } => w.load,
        Expr::Binop { op, .. } => match op.kind {
            BinOpKind::Mul => w.binop_mul,
            BinOpKind::DivU | BinOpKind::DivS => w.binop_div,
            _ => w.binop_simple,
        },
        Expr::Unop { .. } => w.unop,
        Expr::Ite { .. } => w.ite,
        Expr::Opaque { .. } => w.opaque,
    };
    own + e.children().into_iter().map(|c| expr_cost(c, w)).sum::<u64>()
}

pub fn statement_cost(s: &Statement, w: &WeightTable) -> u64 {
    let base = match s {
        Statement::IMark { .. } => w.imark,
        Statement::NoOp => w.noop,
        Statement::WrTmp { .. } => w.wrtmp_base,
        Statement::Put { .. } => w.put_base,
        Statement::Store { .. } => w.store_base,
        Statement::Exit { .. } => w.exit,
    };
    base + s.exprs().into_iter().map(|e| expr_cost(e, w)).sum::<u64>()
}

/// Sum of static costs of every statement in the block.
pub fn block_static_cost(b: &IrSb, w: &WeightTable) -> u64 {
    b.stmts.iter().map(|s| statement_cost(s, w)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StmtCost {
    pub block_addr: u64,
    pub stmt_index: usize,
    pub cost: u64,
}

/// Descending by cost, then ascending by `(block_addr, stmt_index)`.
fn rank_order(a: &StmtCost, b: &StmtCost) -> Ordering {
    b.cost
        .cmp(&a.cost)
        .then(a.block_addr.cmp(&b.block_addr))
        .then(a.stmt_index.cmp(&b.stmt_index))
}

fn scored_statements(p: &Program, w: &WeightTable) -> Vec<StmtCost> {
    let mut out = Vec::new();
    for b in p.blocks.values() {
        for (i, s) in b.stmts.iter().enumerate() {
            if s.is_metadata() {
                continue;
            }
            out.push(StmtCost {
                block_addr: b.addr,
                stmt_index: i,
                cost: statement_cost(s, w),
            });
        }
    }
    out
}

/// The `k` most expensive statements across the whole program. IMark and
/// NoOp statements are never ranked.
pub fn rank_statements(p: &Program, w: &WeightTable, k: usize) -> Vec<StmtCost> {
    let mut all = scored_statements(p, w);
    all.sort_by(rank_order);
    all.truncate(k);
    all
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockProfile {
    pub block_addr: u64,
    pub static_cost: u64,
    pub mean_cost_units: f64,
    pub mean_wall_secs: f64,
    pub runs: usize,
    /// Contains an opaque operator; profiled by static cost only.
    pub opaque: bool,
    /// Runs that stopped on an interpreter error. Their cost counts the
    /// executed prefix including the failing statement.
    pub faulted_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub runs: usize,
    pub seed: u64,
    pub statements: Vec<StmtCost>,
    /// Descending by mean cost units, ties by address.
    pub blocks: Vec<BlockProfile>,
    pub ranking: Vec<StmtCost>,
}

impl CostReport {
    /// Sum over blocks of the mean dynamic cost of one execution.
    pub fn total_mean_cost_units(&self) -> f64 {
        self.blocks.iter().map(|b| b.mean_cost_units).sum()
    }

    pub fn total_mean_wall_secs(&self) -> f64 {
        self.blocks.iter().map(|b| b.mean_wall_secs).sum()
    }
}

/// Seed of the `run`-th profiling run.
pub fn run_seed(seed: u64, run: usize) -> u64 {
    mix64(seed, run as u64)
}

pub fn profile_block(b: &IrSb, runs: usize, seed: u64, w: &WeightTable) -> BlockProfile {
    let static_cost = block_static_cost(b, w);
    if b.is_opaque() || runs == 0 {
        return BlockProfile {
            block_addr: b.addr,
            static_cost,
            mean_cost_units: static_cost as f64,
            mean_wall_secs: 0.0,
            runs,
            opaque: b.is_opaque(),
            faulted_runs: 0,
        };
    }
    let mut total_cost = 0u64;
    let mut faulted = 0;
    let start = Instant::now();
    for run in 0..runs {
        let mut st = MachineState::new(run_seed(seed, run));
        match st.exec_block(b, w) {
            Ok(r) => total_cost += r.cost,
            Err(e) => {
                faulted += 1;
                total_cost += e.cost;
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    BlockProfile {
        block_addr: b.addr,
        static_cost,
        mean_cost_units: total_cost as f64 / runs as f64,
        mean_wall_secs: elapsed / runs as f64,
        runs,
        opaque: false,
        faulted_runs: faulted,
    }
}

/// Executes every block `runs` times from seeded states and reports static
/// and dynamic costs. Cost units are independent of scheduling; wall time
/// is not.
pub fn profile_program(p: &Program, runs: usize, seed: u64, w: &WeightTable) -> CostReport {
    let mut blocks: Vec<BlockProfile> = p
        .blocks
        .values()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|b| profile_block(b, runs, seed, w))
        .collect();
    blocks.sort_by(|a, b| {
        b.mean_cost_units
            .total_cmp(&a.mean_cost_units)
            .then(a.block_addr.cmp(&b.block_addr))
    });
    let statements = scored_statements(p, w);
    let mut ranking = statements.clone();
    ranking.sort_by(rank_order);
    CostReport {
        runs,
        seed,
        statements,
        blocks,
        ranking,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{parse_irsb, parse_program};

    const THREE: &str = "IRSB @ 0x1000 {
  t0:Ity_I64 t1:Ity_I64 t2:Ity_I64
  00 | ------ IMark(0x1000,4,0) ------
  01 | t0 = GET:I64(offset=16)
  02 | t1 = GET:I64(offset=24)
  03 | PUT(offset=32) = t0
  04 | t2 = Mul64(t0,t1)
  05 | STOREle(t1) = t2
  NEXT: PUT(offset=184) = 0x1004; Ijk_Boring
}
";

    fn stmt(line: &str) -> Statement {
        let b = parse_irsb(&format!(
            "IRSB @ 0x0 {{\n t0:Ity_I64 t1:Ity_I64 t2:Ity_I64\n 00 | t0 = GET:I64(offset=0)\n 01 | t1 = GET:I64(offset=8)\n 02 | {line}\n NEXT: PUT(offset=184) = 0x0; Ijk_Boring\n}}"
        ))
        .unwrap();
        b.stmts[2].clone()
    }

    #[test]
    fn default_weights() {
        let w = WeightTable::default();
        let imark = Statement::IMark {
            addr: 0x1000,
            len: 4,
            delta: 0,
        };
        assert_eq!(statement_cost(&imark, &w), 0);
        assert_eq!(statement_cost(&Statement::NoOp, &w), 0);
        assert_eq!(statement_cost(&stmt("t2 = Mul64(t0,t1)"), &w), 5);
        assert_eq!(statement_cost(&stmt("STOREle(t1) = t0"), &w), 6);
        assert_eq!(statement_cost(&stmt("PUT(offset=32) = t0"), &w), 1);
        assert_eq!(statement_cost(&stmt("t2 = LDle:I64(Add64(t0,t1))"), &w), 1 + 5 + 2);
    }

    #[test]
    fn ranking_order_and_ties() {
        let p = parse_program(THREE).unwrap();
        let w = WeightTable::default();
        let top2 = rank_statements(&p, &w, 2);
        assert_eq!(
            top2.iter().map(|s| (s.stmt_index, s.cost)).collect::<Vec<_>>(),
            [(5, 6), (4, 5)]
        );
        let all = rank_statements(&p, &w, 100);
        assert_eq!(all.len(), 5);
        // the two GETs and the PUT tie; earlier index first
        let tail: Vec<_> = all[2..].iter().map(|s| s.stmt_index).collect();
        assert_eq!(tail, [1, 2, 3]);
        assert!(rank_statements(&p, &w, 0).is_empty());
    }

    #[test]
    fn straight_line_dynamic_equals_static() {
        let p = parse_program(THREE).unwrap();
        let w = WeightTable::default();
        let r = profile_program(&p, 7, 3, &w);
        assert_eq!(r.blocks[0].mean_cost_units, r.blocks[0].static_cost as f64);
        let again = profile_program(&p, 7, 3, &w);
        assert_eq!(r.statements, again.statements);
        assert_eq!(r.blocks[0].mean_cost_units, again.blocks[0].mean_cost_units);
    }

    #[test]
    fn opaque_blocks_use_static_cost() {
        let p = parse_program(
            "IRSB @ 0x1000 {\n t0:Ity_I64\n 00 | t0 = Clz64(GET:I64(offset=0))\n NEXT: PUT(offset=184) = t0; Ijk_Boring\n}",
        )
        .unwrap();
        let r = profile_program(&p, 5, 0, &WeightTable::default());
        assert!(r.blocks[0].opaque);
        assert_eq!(r.blocks[0].static_cost, 1 + 4 + 1);
        assert_eq!(r.blocks[0].mean_cost_units, 6.0);
    }

    #[test]
    fn weights_deserialize_partially() {
        let w: WeightTable = serde_json::from_str(r#"{"store_base": 9}"#).unwrap();
        assert_eq!(w.store_base, 9);
        assert_eq!(w.load, 5);
        assert!(serde_json::from_str::<WeightTable>(r#"{"bogus": 1}"#).is_err());
    }
}
