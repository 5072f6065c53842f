//! Seeded synthetic programs with a record of the redundancies planted in
//! them.
//!
//! Base statements are generated so that no rule applies to them: every
//! temp is read, every output PUT goes to its own offset, consecutive
//! stores use different address temps and no operand is an identity
//! element. Redundant statements are then inserted right before a host
//! base statement and recorded with the rule expected to remove them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::interp::mix64;
use crate::ir::{
    BinOp, BinOpKind, Const, Expr, IrSb, IrType, JumpKind, Program, Statement, Temp, UnOp,
    DEFAULT_PC_OFFSET,
};
use crate::rewrite::RuleId;

const INPUT_OFFSETS: u32 = 16;
const OUTPUT_BASE: u32 = 192;
const SIGN_BIT: u64 = 0x8000_0000_0000_0000;
const BLOCK_BASE: u64 = 0x40_0000;
const BLOCK_STRIDE: u64 = 0x100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Counter,
    Branching,
    Matrix,
    Methcall,
    Objinst,
    Heapsort,
    Random,
    Bigtest,
    Bigprog,
    Complexprog,
}

impl Preset {
    pub const ALL: [Preset; 10] = [
        Preset::Counter,
        Preset::Branching,
        Preset::Matrix,
        Preset::Methcall,
        Preset::Objinst,
        Preset::Heapsort,
        Preset::Random,
        Preset::Bigtest,
        Preset::Bigprog,
        Preset::Complexprog,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Counter => "counter",
            Preset::Branching => "branching",
            Preset::Matrix => "matrix",
            Preset::Methcall => "methcall",
            Preset::Objinst => "objinst",
            Preset::Heapsort => "heapsort",
            Preset::Random => "random",
            Preset::Bigtest => "bigtest",
            Preset::Bigprog => "bigprog",
            Preset::Complexprog => "complexprog",
        }
    }

    /// `(blocks, stmts_per_block)`.
    pub fn shape(self) -> (usize, usize) {
        match self {
            Preset::Counter => (8, 12),
            Preset::Branching => (10, 16),
            Preset::Matrix => (12, 20),
            Preset::Methcall => (10, 14),
            Preset::Objinst => (12, 16),
            Preset::Heapsort => (16, 24),
            Preset::Random => (20, 24),
            Preset::Bigtest => (60, 42),
            Preset::Bigprog => (48, 36),
            Preset::Complexprog => (64, 40),
        }
    }

    pub fn op_mix(self) -> OpMix {
        let d = OpMix::default();
        match self {
            Preset::Counter => OpMix { arith: 6, mul: 0, div: 0, load: 1, ..d },
            Preset::Branching => OpMix { exit: 3, ..d },
            Preset::Matrix => OpMix { mul: 4, load: 3, store: 3, ..d },
            Preset::Methcall => OpMix { exit: 2, load: 2, ..d },
            Preset::Objinst => OpMix { store: 4, load: 2, ..d },
            Preset::Heapsort => OpMix { load: 4, store: 4, exit: 2, ..d },
            Preset::Random => OpMix { mul: 3, div: 2, shift: 3, ..d },
            Preset::Bigtest => OpMix { mul: 3, div: 1, load: 3, store: 4, ..d },
            Preset::Bigprog => d,
            Preset::Complexprog => OpMix { div: 2, shift: 3, unop: 3, exit: 2, ..d },
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown preset `{s}`"))
    }
}

/// Relative weights of base statement classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpMix {
    pub get: u32,
    pub arith: u32,
    pub mul: u32,
    pub div: u32,
    pub shift: u32,
    pub unop: u32,
    pub load: u32,
    pub store: u32,
    pub put: u32,
    pub exit: u32,
}

impl Default for OpMix {
    fn default() -> Self {
        OpMix {
            get: 3,
            arith: 4,
            mul: 2,
            div: 1,
            shift: 2,
            unop: 1,
            load: 2,
            store: 3,
            put: 3,
            exit: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Class {
    Get,
    Arith,
    Mul,
    Div,
    Shift,
    Unop,
    Load,
    Store,
    Put,
    Exit,
}

impl OpMix {
    fn weighted(&self) -> Vec<(Class, u32)> {
        vec![
            (Class::Get, self.get),
            (Class::Arith, self.arith),
            (Class::Mul, self.mul),
            (Class::Div, self.div),
            (Class::Shift, self.shift),
            (Class::Unop, self.unop),
            (Class::Load, self.load),
            (Class::Store, self.store),
            (Class::Put, self.put),
            (Class::Exit, self.exit),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub blocks: usize,
    /// Non-metadata statements per block, injected ones included.
    pub stmts_per_block: usize,
    pub redundancy_rate: f64,
    pub op_mix: OpMix,
    pub seed: u64,
    pub preset: Option<Preset>,
}

impl GeneratorConfig {
    pub fn new(blocks: usize, stmts_per_block: usize, redundancy_rate: f64, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            blocks,
            stmts_per_block,
            redundancy_rate,
            op_mix: OpMix::default(),
            seed,
            preset: None,
        }
    }

    pub fn preset(preset: Preset, redundancy_rate: f64, seed: u64) -> GeneratorConfig {
        let (blocks, stmts_per_block) = preset.shape();
        GeneratorConfig {
            blocks,
            stmts_per_block,
            redundancy_rate,
            op_mix: preset.op_mix(),
            seed,
            preset: Some(preset),
        }
    }

    /// Injected redundancies per block.
    pub fn injections_per_block(&self) -> usize {
        // the epsilon absorbs representation error such as 40 * 0.3
        (self.stmts_per_block as f64 * self.redundancy_rate + 1e-9).floor() as usize
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.redundancy_rate) {
            return Err(ConfigError::Rate(self.redundancy_rate));
        }
        if self.blocks > 0 && self.stmts_per_block - self.injections_per_block().min(self.stmts_per_block) < 2 {
            return Err(ConfigError::TooSmall {
                stmts: self.stmts_per_block,
                injected: self.injections_per_block(),
            });
        }
        if self.op_mix.weighted().iter().all(|(_, w)| *w == 0) {
            return Err(ConfigError::EmptyMix);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("redundancy rate {0} is outside [0, 1]")]
    Rate(f64),
    #[error("{stmts} statements per block leave fewer than 2 base statements after {injected} injections")]
    TooSmall { stmts: usize, injected: usize },
    #[error("op mix has no positive weight")]
    EmptyMix,
}

/// Planted redundancies, keyed by `(block_addr, stmt_index)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub removable: BTreeMap<(u64, usize), RuleId>,
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.removable.len()
    }

    pub fn is_empty(&self) -> bool {
        self.removable.is_empty()
    }

    /// Sidecar text: one `addr \t index \t rule` line per entry.
    pub fn render(&self) -> String {
        self.removable
            .iter()
            .map(|((addr, idx), rule)| format!("{addr:#x}\t{idx}\t{rule}\n"))
            .collect()
    }

    pub fn parse(text: &str) -> Result<GroundTruth, String> {
        let mut removable = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || format!("line {}: expected `addr\\tindex\\trule`", n + 1);
            let mut f = line.split('\t');
            let (Some(a), Some(i), Some(r), None) = (f.next(), f.next(), f.next(), f.next()) else {
                return Err(bad());
            };
            let addr = a
                .strip_prefix("0x")
                .and_then(|h| u64::from_str_radix(h, 16).ok())
                .ok_or_else(bad)?;
            let idx = i.parse().map_err(|_| bad())?;
            let rule = r.trim().parse().map_err(|_| bad())?;
            removable.insert((addr, idx), rule);
        }
        Ok(GroundTruth { removable })
    }
}

struct BlockGen {
    rng: ChaCha8Rng,
    temps: BTreeMap<Temp, IrType>,
    next_temp: u32,
    /// I64 temps defined so far, in definition order.
    defined: Vec<Temp>,
    unconsumed: Vec<Temp>,
    next_output: u32,
    last_store_addr: Option<Temp>,
}

impl BlockGen {
    fn fresh(&mut self, ty: IrType) -> Temp {
        let t = Temp(self.next_temp);
        self.next_temp += 1;
        self.temps.insert(t, ty);
        t
    }

    fn input_get(&mut self) -> Expr {
        let slot = self.rng.gen_range(0..INPUT_OFFSETS);
        Expr::Get {
            offset: slot * 8,
            ty: IrType::I64,
        }
    }

    /// A 64-bit constant that is not an identity or absorbing element.
    fn plain_const(&mut self) -> Expr {
        loop {
            let v: u64 = self.rng.gen();
            if v > 1 && v != u64::MAX {
                return Expr::constant(v, IrType::I64);
            }
        }
    }

    fn take_unconsumed(&mut self) -> Option<Temp> {
        if self.unconsumed.is_empty() {
            return None;
        }
        let i = self.rng.gen_range(0..self.unconsumed.len());
        Some(self.unconsumed.swap_remove(i))
    }

    fn any_defined_except(&mut self, not: Option<Temp>) -> Option<Temp> {
        let pool: Vec<Temp> = self.defined.iter().copied().filter(|t| Some(*t) != not).collect();
        pool.choose(&mut self.rng).copied()
    }

    /// First operand: an unconsumed temp if there is one, else any temp.
    fn operand(&mut self) -> Option<Temp> {
        self.take_unconsumed().or_else(|| self.any_defined_except(None))
    }

    fn define(&mut self, rhs: Expr) -> Statement {
        let t = self.fresh(IrType::I64);
        self.defined.push(t);
        self.unconsumed.push(t);
        Statement::WrTmp { tmp: t, rhs }
    }

    fn put(&mut self) -> Statement {
        let data = match self.operand() {
            Some(t) => Expr::RdTmp(t),
            None => self.input_get(),
        };
        let offset = OUTPUT_BASE + 8 * self.next_output;
        self.next_output += 1;
        Statement::Put { offset, data }
    }

    fn binop(&mut self, kind: BinOpKind, must_reduce: bool) -> Option<Statement> {
        let a = self.operand()?;
        let op = BinOp {
            kind,
            width: IrType::I64,
        };
        let rhs = match kind {
            BinOpKind::Shl | BinOpKind::Shr | BinOpKind::Sar => {
                Expr::constant(self.rng.gen_range(1..64), IrType::I8)
            }
            BinOpKind::DivU | BinOpKind::DivS => self.plain_const(),
            _ => {
                let second = if must_reduce || self.rng.gen_bool(0.5) {
                    self.take_unconsumed().or_else(|| self.any_defined_except(Some(a)))
                } else {
                    self.any_defined_except(Some(a))
                };
                match second {
                    Some(b) if b != a => Expr::RdTmp(b),
                    _ => self.plain_const(),
                }
            }
        };
        let (lhs, rhs) = if kind.is_commutative() && self.rng.gen_bool(0.5) && !matches!(rhs, Expr::Const(_)) {
            (rhs, Expr::RdTmp(a))
        } else {
            (Expr::RdTmp(a), rhs)
        };
        Some(self.define(Expr::binop(op, lhs, rhs)))
    }

    fn unop(&mut self) -> Option<Statement> {
        let a = Expr::RdTmp(self.operand()?);
        let rhs = match self.rng.gen_range(0..3) {
            0 => Expr::unop(UnOp::Not(IrType::I64), a),
            1 => Expr::unop(UnOp::Widen32Uto64, Expr::unop(UnOp::Narrow64to32, a)),
            _ => Expr::unop(UnOp::Widen8Uto64, Expr::unop(UnOp::Narrow64to8, a)),
        };
        Some(self.define(rhs))
    }

    fn load(&mut self) -> Option<Statement> {
        let a = self.operand()?;
        Some(self.define(Expr::load(IrType::I64, Expr::RdTmp(a))))
    }

    fn store(&mut self) -> Option<Statement> {
        let data = self.operand()?;
        let addr_pool: Vec<Temp> = self
            .defined
            .iter()
            .copied()
            .filter(|t| Some(*t) != self.last_store_addr)
            .collect();
        let &addr = addr_pool.choose(&mut self.rng)?;
        self.unconsumed.retain(|t| *t != addr);
        Some(Statement::Store {
            addr: Expr::RdTmp(addr),
            data: Expr::RdTmp(data),
        })
    }

    fn exit(&mut self, block_addr: u64) -> Option<[Statement; 2]> {
        let x = self.operand()?;
        let g = self.fresh(IrType::I1);
        let cmp = BinOp {
            kind: BinOpKind::CmpLTU,
            width: IrType::I64,
        };
        let target = block_addr + 0x10_0000 + self.rng.gen_range(0..0x100u64) * 0x10;
        Some([
            Statement::WrTmp {
                tmp: g,
                rhs: Expr::binop(cmp, Expr::RdTmp(x), Expr::constant(SIGN_BIT, IrType::I64)),
            },
            Statement::Exit {
                guard: Expr::RdTmp(g),
                target,
                jumpkind: JumpKind::Boring,
                offset: DEFAULT_PC_OFFSET,
            },
        ])
    }

    /// Emits `n` base statements whose temps are all read by the end.
    fn base(&mut self, n: usize, mix: &OpMix, block_addr: u64) -> Vec<Statement> {
        let classes = mix.weighted();
        let dist = WeightedIndex::new(classes.iter().map(|c| c.1)).expect("mix checked");
        let mut out: Vec<Statement> = Vec::with_capacity(n);
        while out.len() < n {
            let left = n - out.len();
            let u = self.unconsumed.len();
            let snapshot = (self.unconsumed.clone(), self.next_temp, self.defined.len(), self.temps.clone());
            let class = if self.defined.is_empty() && left >= 2 {
                Class::Get
            } else {
                classes[dist.sample(&mut self.rng)].0
            };
            let must_reduce = u + 1 >= left;
            let produced: Option<Vec<Statement>> = match class {
                Class::Get if u + 2 <= left => Some(vec![{
                    let g = self.input_get();
                    self.define(g)
                }]),
                Class::Arith => {
                    let kind = *[BinOpKind::Add, BinOpKind::Sub, BinOpKind::And, BinOpKind::Or, BinOpKind::Xor]
                        .choose(&mut self.rng)
                        .unwrap();
                    self.binop(kind, must_reduce).map(|s| vec![s])
                }
                Class::Mul => self.binop(BinOpKind::Mul, must_reduce).map(|s| vec![s]),
                Class::Div => {
                    let kind = if self.rng.gen_bool(0.5) { BinOpKind::DivU } else { BinOpKind::DivS };
                    self.binop(kind, must_reduce).map(|s| vec![s])
                }
                Class::Shift => {
                    let kind = *[BinOpKind::Shl, BinOpKind::Shr, BinOpKind::Sar].choose(&mut self.rng).unwrap();
                    self.binop(kind, must_reduce).map(|s| vec![s])
                }
                Class::Unop => self.unop().map(|s| vec![s]),
                Class::Load => self.load().map(|s| vec![s]),
                Class::Store => self.store().map(|s| vec![s]),
                Class::Exit if left >= 2 => self.exit(block_addr).map(Vec::from),
                _ => None,
            };
            let fits = |s: &Vec<Statement>, me: &BlockGen| me.unconsumed.len() + s.len() <= left;
            match produced {
                Some(stmts) if fits(&stmts, self) => {
                    self.last_store_addr = match &stmts[0] {
                        Statement::Store { addr: Expr::RdTmp(a), .. } => Some(*a),
                        _ => None,
                    };
                    out.extend(stmts);
                }
                _ => {
                    // roll back whatever the attempt did and emit a PUT
                    self.unconsumed = snapshot.0;
                    self.next_temp = snapshot.1;
                    self.defined.truncate(snapshot.2);
                    self.temps = snapshot.3;
                    self.last_store_addr = None;
                    let p = self.put();
                    out.push(p);
                }
            }
        }
        debug_assert!(self.unconsumed.is_empty());
        out
    }

    /// A dead assignment built only from temps defined before `host`.
    fn dead_rhs(&mut self, defined_before: &[Temp]) -> Expr {
        let pick = |rng: &mut ChaCha8Rng| defined_before.choose(rng).copied();
        match pick(&mut self.rng) {
            None => self.input_get(),
            Some(a) => {
                let kind = *[BinOpKind::Add, BinOpKind::Xor, BinOpKind::Mul, BinOpKind::Or]
                    .choose(&mut self.rng)
                    .unwrap();
                let rhs = match pick(&mut self.rng) {
                    Some(b) if b != a => Expr::RdTmp(b),
                    _ => self.plain_const(),
                };
                Expr::binop(BinOp { kind, width: IrType::I64 }, Expr::RdTmp(a), rhs)
            }
        }
    }

    /// `x op identity`, in one of the forms the identity rule recognises.
    fn identity_of(&mut self, x: Temp) -> Expr {
        let x = Expr::RdTmp(x);
        let w = IrType::I64;
        let op = |kind| BinOp { kind, width: w };
        match self.rng.gen_range(0..6) {
            0 => Expr::binop(op(BinOpKind::Add), x, Expr::constant(0, w)),
            1 => Expr::binop(op(BinOpKind::Or), Expr::constant(0, w), x),
            2 => Expr::binop(op(BinOpKind::Xor), x, Expr::constant(0, w)),
            3 => Expr::binop(op(BinOpKind::Sub), x, Expr::constant(0, w)),
            4 => Expr::binop(op(BinOpKind::Mul), x, Expr::constant(1, w)),
            _ => Expr::binop(op(BinOpKind::And), x, Expr::constant(w.mask(), w)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Injection {
    Identity,
    DupStore,
    DupPut,
    Dead,
}

impl Injection {
    fn rule(self) -> RuleId {
        match self {
            Injection::Identity => RuleId::R1,
            Injection::DupStore => RuleId::R5,
            Injection::DupPut => RuleId::R6,
            Injection::Dead => RuleId::R7,
        }
    }
}

fn temps_defined_before(base: &[Statement], host: usize) -> Vec<Temp> {
    base[..host]
        .iter()
        .filter_map(|s| match s {
            Statement::WrTmp { tmp, rhs } if !matches!(rhs, Expr::Binop { op, .. } if op.kind.is_compare()) => {
                Some(*tmp)
            }
            _ => None,
        })
        .collect()
}

fn generate_block(cfg: &GeneratorConfig, index: usize) -> (IrSb, Vec<(usize, RuleId)>) {
    let addr = BLOCK_BASE + index as u64 * BLOCK_STRIDE;
    let mut g = BlockGen {
        rng: ChaCha8Rng::seed_from_u64(mix64(cfg.seed, index as u64)),
        temps: BTreeMap::new(),
        next_temp: 0,
        defined: Vec::new(),
        unconsumed: Vec::new(),
        next_output: 0,
        last_store_addr: None,
    };
    let injected = cfg.injections_per_block();
    let n_base = cfg.stmts_per_block - injected;
    let mut base = g.base(n_base, &cfg.op_mix, addr);

    // plan: an eighth identity rewrites, the rest cycle through the
    // store, put and dead-temp kinds
    let n_identity = injected / 8;
    let mut plan = vec![Injection::Identity; n_identity];
    let cycle = [Injection::DupStore, Injection::DupPut, Injection::Dead];
    plan.extend((0..injected - n_identity).map(|i| cycle[i % 3]));

    let mut stores: Vec<usize> = Vec::new();
    let mut puts: Vec<usize> = Vec::new();
    for (i, s) in base.iter().enumerate() {
        match s {
            Statement::Store { .. } => stores.push(i),
            Statement::Put { data: Expr::RdTmp(_), .. } => puts.push(i),
            _ => {}
        }
    }
    stores.shuffle(&mut g.rng);
    puts.shuffle(&mut g.rng);

    let mut before: Vec<Vec<(Injection, Statement)>> = vec![Vec::new(); base.len()];
    let mut hosted = vec![false; base.len()];
    for kind in plan {
        let host = match kind {
            Injection::Identity => {
                let mut both: Vec<usize> = puts.iter().chain(stores.iter()).copied().filter(|h| !hosted[*h]).collect();
                both.sort_unstable();
                both.choose(&mut g.rng).copied()
            }
            Injection::DupStore => stores.iter().copied().find(|h| !hosted[*h]),
            Injection::DupPut => puts.iter().copied().find(|h| !hosted[*h]),
            Injection::Dead => None,
        };
        let (kind, host) = match host {
            Some(h) => (kind, h),
            None => (Injection::Dead, g.rng.gen_range(0..base.len())),
        };
        let stmt = match kind {
            Injection::Identity => {
                hosted[host] = true;
                let t = g.fresh(IrType::I64);
                let (Statement::Put { data, .. } | Statement::Store { data, .. }) = &mut base[host] else {
                    unreachable!("identity hosts are puts and stores")
                };
                let Expr::RdTmp(x) = *data else { unreachable!("host data is a temp") };
                *data = Expr::RdTmp(t);
                Statement::WrTmp {
                    tmp: t,
                    rhs: g.identity_of(x),
                }
            }
            Injection::DupStore => {
                hosted[host] = true;
                let Statement::Store { addr, .. } = &base[host] else { unreachable!() };
                let addr = addr.clone();
                let pool = temps_defined_before(&base, host);
                let data = pool.choose(&mut g.rng).copied().map(Expr::RdTmp).unwrap_or_else(|| g.plain_const());
                Statement::Store { addr, data }
            }
            Injection::DupPut => {
                hosted[host] = true;
                let Statement::Put { offset, .. } = base[host] else { unreachable!() };
                let pool = temps_defined_before(&base, host);
                let data = pool.choose(&mut g.rng).copied().map(Expr::RdTmp).unwrap_or_else(|| g.plain_const());
                Statement::Put { offset, data }
            }
            Injection::Dead => {
                let pool = temps_defined_before(&base, host);
                let rhs = g.dead_rhs(&pool);
                let t = g.fresh(IrType::I64);
                Statement::WrTmp { tmp: t, rhs }
            }
        };
        before[host].push((kind, stmt));
    }

    // assemble: instruction marks, then injections (dead temps first, the
    // adjacent duplicate last), then the host
    let mut b = IrSb::new(addr);
    let mut pc = addr;
    let mut truth = Vec::new();
    for (i, host_stmt) in base.into_iter().enumerate() {
        if i == 0 || g.rng.gen_bool(0.3) {
            let len = g.rng.gen_range(2..=7u32);
            b.stmts.push(Statement::IMark { addr: pc, len, delta: 0 });
            pc += len as u64;
        }
        let mut inj = std::mem::take(&mut before[i]);
        inj.sort_by_key(|(k, _)| match k {
            Injection::Dead => 0,
            Injection::Identity => 1,
            Injection::DupStore | Injection::DupPut => 2,
        });
        for (kind, s) in inj {
            truth.push((b.stmts.len(), kind.rule()));
            b.stmts.push(s);
        }
        b.stmts.push(host_stmt);
    }
    b.temps = g.temps;
    b.next = Expr::constant(pc, IrType::I64);
    b.jumpkind = JumpKind::Boring;
    (b, truth)
}

/// Generates a program and its ground truth. The same configuration always
/// yields the same program.
pub fn generate(cfg: &GeneratorConfig) -> Result<(Program, GroundTruth), ConfigError> {
    cfg.check()?;
    let name = cfg.preset.map_or("synthetic", Preset::name);
    let mut p = Program::new(name);
    let mut gt = GroundTruth::default();
    for i in 0..cfg.blocks {
        let (b, truth) = generate_block(cfg, i);
        for (idx, rule) in truth {
            gt.removable.insert((b.addr, idx), rule);
        }
        p.blocks.insert(b.addr, b);
    }
    Ok((p, gt))
}

struct RandomBlock {
    rng: ChaCha8Rng,
    temps: BTreeMap<Temp, IrType>,
    defined: Vec<Temp>,
}

const TYPES: [IrType; 5] = [IrType::I1, IrType::I8, IrType::I16, IrType::I32, IrType::I64];

impl RandomBlock {
    fn ty(&mut self) -> IrType {
        *TYPES.choose(&mut self.rng).unwrap()
    }

    fn expr(&mut self, ty: IrType, depth: u32) -> Expr {
        let temps: Vec<Temp> = self.defined.iter().copied().filter(|t| self.temps[t] == ty).collect();
        let choice = if depth == 0 {
            self.rng.gen_range(0..3)
        } else {
            self.rng.gen_range(0..8)
        };
        match choice {
            1 if !temps.is_empty() => Expr::RdTmp(*temps.choose(&mut self.rng).unwrap()),
            2 if ty != IrType::I1 => Expr::Get {
                offset: self.rng.gen_range(0..4000),
                ty,
            },
            3 if ty != IrType::I1 => Expr::load(ty, self.expr(IrType::I64, depth - 1)),
            4 | 5 => {
                let ops: Vec<BinOp> = BinOp::all().into_iter().filter(|o| o.result_type() == ty).collect();
                match ops.choose(&mut self.rng) {
                    Some(op) => {
                        let (a, b) = op.arg_types();
                        Expr::binop(*op, self.expr(a, depth - 1), self.expr(b, depth - 1))
                    }
                    None => self.constant(ty),
                }
            }
            6 => {
                let ops: Vec<UnOp> = UnOp::all().into_iter().filter(|o| o.result_type() == ty).collect();
                match ops.choose(&mut self.rng) {
                    Some(op) => Expr::unop(*op, self.expr(op.arg_type(), depth - 1)),
                    None => self.constant(ty),
                }
            }
            7 => Expr::ite(
                self.expr(IrType::I1, depth - 1),
                self.expr(ty, depth - 1),
                self.expr(ty, depth - 1),
            ),
            _ => self.constant(ty),
        }
    }

    fn constant(&mut self, ty: IrType) -> Expr {
        let v: u64 = match self.rng.gen_range(0..4) {
            0 => 0,
            1 => 1,
            _ => self.rng.gen(),
        };
        Expr::Const(Const::new(v, ty))
    }

    fn opaque(&mut self) -> Expr {
        let name = ["Clz64", "Ctz32", "CmpF64", "Perm8x8", "QAdd16Sx2"].choose(&mut self.rng).unwrap();
        let n = self.rng.gen_range(0..=3);
        let args = (0..n)
            .map(|_| {
                let ty = self.ty();
                self.expr(ty, 1)
            })
            .collect();
        Expr::Opaque {
            name: name.to_string(),
            args,
        }
    }
}

/// A block drawn from the whole statement and expression grammar, for
/// exercising the parser and printer. Contains opaque operators, NoOps and
/// unused declarations; it is not meant to be executed.
pub fn random_block(seed: u64) -> IrSb {
    let mut r = RandomBlock {
        rng: ChaCha8Rng::seed_from_u64(seed),
        temps: BTreeMap::new(),
        defined: Vec::new(),
    };
    let addr = r.rng.gen_range(0x1000..0x1_0000_0000u64);
    let mut b = IrSb::new(addr);
    let n = r.rng.gen_range(0..30);
    let mut next_temp = 0u32;
    for _ in 0..n {
        let s = match r.rng.gen_range(0..10) {
            0 => Statement::IMark {
                addr: r.rng.gen(),
                len: r.rng.gen_range(1..16),
                delta: r.rng.gen_range(0..2),
            },
            1 => Statement::NoOp,
            2..=4 => {
                let ty = r.ty();
                let rhs = if r.rng.gen_bool(0.1) { r.opaque() } else { r.expr(ty, 3) };
                let t = Temp(next_temp);
                next_temp += 1;
                r.temps.insert(t, ty);
                r.defined.push(t);
                Statement::WrTmp { tmp: t, rhs }
            }
            5 | 6 => {
                let ty = r.ty();
                Statement::Put {
                    offset: r.rng.gen_range(0..4000),
                    data: r.expr(ty, 3),
                }
            }
            7 | 8 => {
                let ty = r.ty();
                Statement::Store {
                    addr: r.expr(IrType::I64, 2),
                    data: r.expr(ty, 2),
                }
            }
            _ => Statement::Exit {
                guard: r.expr(IrType::I1, 2),
                target: r.rng.gen(),
                jumpkind: *[JumpKind::Boring, JumpKind::Call, JumpKind::Ret].choose(&mut r.rng).unwrap(),
                offset: if r.rng.gen_bool(0.8) { DEFAULT_PC_OFFSET } else { r.rng.gen_range(0..4000) },
            },
        };
        b.stmts.push(s);
    }
    for _ in 0..r.rng.gen_range(0..3) {
        let ty = r.ty();
        r.temps.insert(Temp(next_temp), ty);
        next_temp += 1;
    }
    b.next = r.expr(IrType::I64, 1);
    b.jumpkind = *[JumpKind::Boring, JumpKind::Call, JumpKind::Ret].choose(&mut r.rng).unwrap();
    b.next_offset = if r.rng.gen_bool(0.9) { DEFAULT_PC_OFFSET } else { r.rng.gen_range(0..4000) };
    b.temps = r.temps;
    b
}
