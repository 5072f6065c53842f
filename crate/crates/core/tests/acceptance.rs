//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use lift_core::bench::{
    compare_reports, format_count_change, format_percent_change, render_table, static_counts, ExecTime,
    MetricsReport,
};
use lift_core::corpus::{generate, random_block, GeneratorConfig};
use lift_core::cost::{rank_statements, statement_cost, WeightTable};
use lift_core::interp::{mix64, ExitKind, InterpError, MachineState};
use lift_core::ir::{BinOp, BinOpKind, Const, Expr, IrSb, IrType, Program, Statement, Temp, UnOp};
use lift_core::pipeline::{run_pipeline, RunConfig, LOG_FILE, OPTIMIZED_FILE};
use lift_core::rewrite::{
    rule_rewrite, write_replay_file, BackendKind, Decision, RewriteCandidate, RewriteLog, RuleId,
};
use lift_core::text::{parse_irsb, parse_program, print_irsb, print_program, print_statement};
use lift_core::verify::{differential_verify, replay_trial, verify_rewrite, MemoryCompare, Verdict, VerifyPolicy};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Report fidelity

fn metrics(time: f64, stmts: u64, puts: u64, temps: u64, max: u64) -> MetricsReport {
    MetricsReport {
        program: "bigtest".into(),
        exec_time: ExecTime {
            cost_units: time,
            wall_secs: None,
        },
        stmt_count: stmts,
        put_count: puts,
        store_count: 0,
        temp_count: temps,
        max_temp_index: max,
        runs: 100,
        seed: 0,
    }
}

fn report_fidelity() -> Outcome {
    let before = metrics(11.124952, 2532, 542, 106, 105);
    let after = metrics(5.169818, 2315, 436, 101, 103);
    let c = compare_reports(&before, &after).map_err(|e| e.to_string())?;
    let pct = format_percent_change(c.percent_time_reduction);
    ensure(pct == "53.5% ↓", || format!("percent rendered as {pct}"))?;
    // independent recomputation from the raw means
    let raw = (11.124952 - 5.169818) / 11.124952 * 100.0;
    ensure(format!("{raw:.1}") == "53.5", || format!("raw percent {raw}"))?;
    let table = render_table(&c);
    let expect = [
        ("Execution Time", "11.124952", "5.169818", "53.5% ↓"),
        ("IR Statement Count", "2532", "2315", "217 ↓"),
        ("PUT Instruction Count", "542", "436", "106 ↓"),
        ("Temporary Variable Count", "106", "101", "5 ↓"),
        ("Max Temp Variable Index", "t105", "t103", "2 ↓"),
    ];
    let rows: Vec<&str> = table.lines().skip(1).collect();
    ensure(rows.len() == 5, || format!("{} rows", rows.len()))?;
    for (row, (name, b, a, change)) in rows.iter().zip(expect) {
        ensure(row.starts_with(name), || format!("row `{row}` is not {name}"))?;
        let rest: Vec<&str> = row[name.len()..].split_whitespace().collect();
        let got_change = rest[2..].join(" ");
        ensure(rest[0] == b && rest[1] == a && got_change == change, || {
            format!("row `{row}` expected {b} {a} {change}")
        })?;
    }
    ensure(format_count_change(2532 - 2315) == "217 ↓", || "count change".into())?;
    Ok("53.5% ↓ and 217/106/5/2 reproduced".into())
}

// ---------------------------------------------------------------------------
// Rule-backend effectiveness

fn rule_backend_effectiveness() -> Outcome {
    let cfg = GeneratorConfig::new(50, 40, 0.3, 42);
    let (program, truth) = generate(&cfg).map_err(|e| e.to_string())?;
    ensure(truth.len() == 600, || format!("{} ground-truth entries", truth.len()))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("corpus.vir");
    fs::write(&input, print_program(&program)).map_err(|e| e.to_string())?;
    let run = RunConfig {
        k: program.total_statements(),
        trials: 64,
        runs: 100,
        input: Some(input),
        out: Some(dir.path().join("out")),
        ..RunConfig::default()
    };
    let out = run_pipeline(&run).map_err(|e| e.to_string())?;
    ensure(out.exit_code() == 0, || "pipeline reported an unexpected mismatch".into())?;

    let decisions: BTreeMap<(u64, usize), &Decision> =
        out.log.entries.iter().map(|e| ((e.block_addr, e.stmt_index), &e.decision)).collect();
    let hit = truth
        .removable
        .keys()
        .filter(|k| decisions.get(*k) == Some(&&Decision::Retained))
        .count();
    ensure(hit * 100 >= 95 * truth.len(), || format!("{hit}/600 ground-truth entries rewritten"))?;

    for e in out.log.entries.iter().filter(|e| e.decision == Decision::Retained) {
        ensure(matches!(e.verdict, Some(Verdict::Equivalent { trials: 64 })), || {
            format!("retained {:#x}:{} has verdict {:?}", e.block_addr, e.stmt_index, e.verdict)
        })?;
    }
    // independent re-check: every changed block against its original, with
    // a seed the optimizer never used
    let written = fs::read_to_string(dir.path().join("out").join(OPTIMIZED_FILE)).map_err(|e| e.to_string())?;
    let optimized = parse_program(&written).map_err(|e| e.to_string())?;
    for (addr, orig) in &program.blocks {
        let opt = &optimized.blocks[addr];
        if opt != orig {
            let policy = VerifyPolicy {
                trials: 64,
                seed: 0xfeed ^ addr,
                structural_required: false,
                memory: MemoryCompare::FinalImage,
            };
            let v = verify_rewrite(orig, opt, &policy);
            ensure(v.is_equivalent(), || format!("block {addr:#x}: {v}"))?;
        }
    }

    let before = static_counts(&program);
    let after = static_counts(&optimized);
    let stmt_drop = before.stmt_count as i64 - after.stmt_count as i64;
    ensure(stmt_drop >= 500, || format!("statement count dropped by {stmt_drop}"))?;
    let cost_drop = out.comparison.percent_time_reduction;
    ensure(cost_drop >= 10.0, || format!("cost units dropped by {cost_drop}%"))?;
    Ok(format!(
        "{hit}/600 rewritten, stmt_count -{stmt_drop}, cost -{cost_drop:.1}%"
    ))
}

// ---------------------------------------------------------------------------
// Verifier mutation kill

const SINK_OFFSET: u32 = 4088;

/// Places `Add64(x, c)` into a PUT that runs before any exit. Returns the
/// block and the position of the statement holding the constant.
fn plant_observable_constant(mut b: IrSb, c: u64) -> (IrSb, usize) {
    let first_exit = b
        .stmts
        .iter()
        .position(|s| matches!(s, Statement::Exit { .. }))
        .unwrap_or(b.stmts.len());
    let add = BinOp {
        kind: BinOpKind::Add,
        width: IrType::I64,
    };
    let existing = (0..first_exit).find(|i| matches!(&b.stmts[*i], Statement::Put { data: Expr::RdTmp(t), .. } if b.temps[t] == IrType::I64));
    if let Some(i) = existing {
        let Statement::Put { data, .. } = &mut b.stmts[i] else { unreachable!() };
        *data = Expr::binop(add, data.clone(), Expr::constant(c, IrType::I64));
        return (b, i);
    }
    let src = b.stmts[..first_exit]
        .iter()
        .rev()
        .find_map(|s| match s {
            Statement::WrTmp { tmp, .. } if b.temps[tmp] == IrType::I64 => Some(Expr::RdTmp(*tmp)),
            _ => None,
        })
        .unwrap_or(Expr::Get {
            offset: 0,
            ty: IrType::I64,
        });
    b.stmts.insert(
        first_exit,
        Statement::Put {
            offset: SINK_OFFSET,
            data: Expr::binop(add, src, Expr::constant(c, IrType::I64)),
        },
    );
    (b, first_exit)
}

fn set_constant(b: &IrSb, at: usize, c: u64) -> IrSb {
    let mut m = b.clone();
    let Statement::Put {
        data: Expr::Binop { rhs, .. },
        ..
    } = &mut m.stmts[at]
    else {
        unreachable!("planted statement")
    };
    **rhs = Expr::constant(c, IrType::I64);
    m
}

fn mutation_kill() -> Outcome {
    let mut killed = 0;
    for i in 0..200u64 {
        let (p, _) = generate(&GeneratorConfig::new(1, 24, 0.0, 1000 + i)).map_err(|e| e.to_string())?;
        let block = p.blocks.into_values().next().unwrap();
        let c = mix64(i, 1) | 2;
        let (orig, at) = plant_observable_constant(block, c);
        let mutated = set_constant(&orig, at, c ^ (1 << (i % 64)));
        let v = differential_verify(&orig, &mutated, 64, i);
        let Verdict::Mismatch {
            counterexample_seed,
            trial,
            ..
        } = v
        else {
            return Err(format!("block {i}: verdict {v}"));
        };
        ensure(trial == 0, || format!("block {i}: first divergence at trial {trial}"))?;
        let first = replay_trial(&orig, &mutated, counterexample_seed, MemoryCompare::WriteList);
        let second = replay_trial(&orig, &mutated, counterexample_seed, MemoryCompare::WriteList);
        ensure(first.is_some() && first == second, || format!("block {i}: replay {first:?} / {second:?}"))?;
        killed += 1;
    }
    Ok(format!("{killed}/200 mutants killed, all seeds replay"))
}

// ---------------------------------------------------------------------------
// Exhaustive 8-bit rule soundness

/// Reference 8-bit semantics written independently of the interpreter.
fn oracle8(kind: BinOpKind, a: u8, b: u8) -> Option<u64> {
    use BinOpKind::*;
    let (sa, sb) = (a as i8, b as i8);
    Some(match kind {
        Add => a.wrapping_add(b) as u64,
        Sub => a.wrapping_sub(b) as u64,
        Mul => a.wrapping_mul(b) as u64,
        And => (a & b) as u64,
        Or => (a | b) as u64,
        Xor => (a ^ b) as u64,
        Shl => if b >= 8 { 0 } else { (a << b) as u64 },
        Shr => if b >= 8 { 0 } else { (a >> b) as u64 },
        Sar => (if b >= 8 { sa >> 7 } else { sa >> b }) as u8 as u64,
        DivU => a.checked_div(b)? as u64,
        DivS => sa.checked_div(sb).unwrap_or(if sb == 0 { return None } else { sa.wrapping_div(sb) }) as u8 as u64,
        CmpEQ => (a == b) as u64,
        CmpNE => (a != b) as u64,
        CmpLTS => (sa < sb) as u64,
        CmpLTU => (a < b) as u64,
        CmpLES => (sa <= sb) as u64,
        CmpLEU => (a <= b) as u64,
    })
}

fn block_with(rhs: Expr, ty: IrType) -> IrSb {
    let mut b = IrSb::new(0x1000);
    b.temps.insert(Temp(0), IrType::I8);
    b.temps.insert(Temp(1), ty);
    b.stmts.push(Statement::WrTmp {
        tmp: Temp(0),
        rhs: Expr::Get {
            offset: 0,
            ty: IrType::I8,
        },
    });
    b.stmts.push(Statement::WrTmp { tmp: Temp(1), rhs });
    b.stmts.push(Statement::Put {
        offset: 8,
        data: Expr::RdTmp(Temp(1)),
    });
    b
}

fn rewrite_second(b: &IrSb) -> Option<(RuleId, IrSb)> {
    let c = RewriteCandidate::new(b, 1)?;
    let p = rule_rewrite(&c)?;
    if !p.is_sanitized() {
        return None;
    }
    let mut out = b.clone();
    out.stmts[1] = p.replacement;
    Some((p.provenance.rule()?, out))
}

fn put_value(b: &IrSb, x: u8, ty: IrType) -> Result<u64, InterpError> {
    let mut st = MachineState::new(7);
    st.poke_guest(0, &[x])?;
    st.exec_block(b, &WeightTable::default()).map_err(|e| e.error)?;
    st.read_guest(8, ty)
}

fn exhaustive_i8() -> Outcome {
    let w = IrType::I8;
    let op = |kind| BinOp { kind, width: w };
    let t0 = || Expr::RdTmp(Temp(0));
    let k = |v| Expr::constant(v, w);
    let mut checked = 0u64;

    // identities and self-cancellation: one rewrite, all 256 inputs
    let cases: Vec<(RuleId, Expr)> = vec![
        (RuleId::R1, Expr::binop(op(BinOpKind::Add), t0(), k(0))),
        (RuleId::R1, Expr::binop(op(BinOpKind::Add), k(0), t0())),
        (RuleId::R1, Expr::binop(op(BinOpKind::Or), t0(), k(0))),
        (RuleId::R1, Expr::binop(op(BinOpKind::Xor), k(0), t0())),
        (RuleId::R1, Expr::binop(op(BinOpKind::Sub), t0(), k(0))),
        (RuleId::R1, Expr::binop(op(BinOpKind::Shl), t0(), k(0))),
        (RuleId::R1, Expr::binop(op(BinOpKind::Shr), t0(), k(0))),
        (RuleId::R1, Expr::binop(op(BinOpKind::Sar), t0(), k(0))),
        (RuleId::R1, Expr::binop(op(BinOpKind::Mul), t0(), k(1))),
        (RuleId::R1, Expr::binop(op(BinOpKind::Mul), k(1), t0())),
        (RuleId::R1, Expr::binop(op(BinOpKind::And), t0(), k(0xff))),
        (RuleId::R1, Expr::binop(op(BinOpKind::And), k(0xff), t0())),
        (RuleId::R3, Expr::binop(op(BinOpKind::Xor), t0(), t0())),
        (RuleId::R3, Expr::binop(op(BinOpKind::Sub), t0(), t0())),
        (RuleId::R3, Expr::binop(op(BinOpKind::And), t0(), t0())),
        (RuleId::R3, Expr::binop(op(BinOpKind::Or), t0(), t0())),
        (RuleId::R4, Expr::unop(UnOp::Not(w), Expr::unop(UnOp::Not(w), t0()))),
    ];
    for (rule, e) in cases {
        let b = block_with(e.clone(), w);
        let (got, rewritten) = rewrite_second(&b).ok_or_else(|| format!("no rewrite for {e:?}"))?;
        ensure(got == rule, || format!("{e:?}: fired {got} instead of {rule}"))?;
        for x in 0..=255u8 {
            let before = put_value(&b, x, w).map_err(|e| e.to_string())?;
            let after = put_value(&rewritten, x, w).map_err(|e| e.to_string())?;
            // the laws themselves, independent of the interpreter
            let law = match rule {
                RuleId::R1 => x as u64,
                RuleId::R3 => match &e {
                    Expr::Binop { op, .. } if matches!(op.kind, BinOpKind::Xor | BinOpKind::Sub) => 0,
                    _ => x as u64,
                },
                _ => x as u64,
            };
            ensure(before == after && after == law, || {
                format!("{e:?} at x={x}: {before:#x} vs {after:#x}, law {law:#x}")
            })?;
            checked += 1;
        }
    }

    // constant folding: every 8-bit binary operator over all operand pairs
    let mut template = block_with(Expr::constant(0, w), w);
    template.stmts[2] = Statement::NoOp;
    for bop in BinOp::all().into_iter().filter(|o| o.width == w) {
        let ty = bop.result_type();
        template.temps.insert(Temp(1), ty);
        for a in 0..=255u8 {
            for bv in 0..=255u8 {
                let e = Expr::binop(bop, k(a as u64), k(bv as u64));
                template.stmts[1] = Statement::WrTmp { tmp: Temp(1), rhs: e.clone() };
                let expected = oracle8(bop.kind, a, bv);
                let c = RewriteCandidate::new(&template, 1).unwrap();
                let p = rule_rewrite(&c);
                let interp = MachineState::new(0).eval_expr(&e);
                match (expected, p) {
                    (None, None) => {
                        ensure(interp == Err(InterpError::DivByZero), || format!("{e:?} should fault"))?;
                    }
                    (Some(v), Some(p)) => {
                        let Statement::WrTmp {
                            rhs: Expr::Const(Const { value, ty: cty }),
                            ..
                        } = p.replacement
                        else {
                            return Err(format!("{e:?} folded to {}", print_statement(&p.replacement)));
                        };
                        ensure(p.provenance.rule() == Some(RuleId::R2) || v == value, || format!("{e:?} rule"))?;
                        ensure(value == v && cty == ty && interp == Ok(v), || {
                            format!("{e:?}: folded {value:#x}:{cty:?}, oracle {v:#x}, interpreter {interp:?}")
                        })?;
                    }
                    (exp, got) => return Err(format!("{e:?}: oracle {exp:?}, rule {got:?}")),
                }
                checked += 1;
            }
        }
    }
    // folding of unary operators on 8-bit constants
    for uop in UnOp::all().into_iter().filter(|o| o.arg_type() == w) {
        template.temps.insert(Temp(1), uop.result_type());
        for a in 0..=255u8 {
            let e = Expr::unop(uop, k(a as u64));
            template.stmts[1] = Statement::WrTmp { tmp: Temp(1), rhs: e.clone() };
            let c = RewriteCandidate::new(&template, 1).unwrap();
            let p = rule_rewrite(&c).ok_or_else(|| format!("{e:?} not folded"))?;
            let expected = match uop {
                UnOp::Not(_) => (!a) as u64,
                _ => a as u64,
            };
            let Statement::WrTmp { rhs: Expr::Const(cst), .. } = p.replacement else {
                return Err(format!("{e:?} not folded to a constant"));
            };
            ensure(cst.value == expected && cst.ty == uop.result_type(), || format!("{e:?} -> {cst:?}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} cases"))
}

// ---------------------------------------------------------------------------
// Parser round trip

fn parser_round_trip() -> Outcome {
    let mut ok = 0;
    for seed in 0..1000u64 {
        let b = random_block(seed);
        let text = print_irsb(&b);
        let parsed = parse_irsb(&text).map_err(|e| format!("seed {seed}: {e}\n{text}"))?;
        ensure(parsed == b, || format!("seed {seed}: parse(print(b)) != b"))?;
        let again = print_irsb(&parsed);
        ensure(again == text, || format!("seed {seed}: print not idempotent"))?;
        ok += 1;
    }
    Ok(format!("{ok}/1000 blocks"))
}

// ---------------------------------------------------------------------------
// Interpreter semantics

fn interpreter_suite() -> Outcome {
    let st = MachineState::new(0);
    let add = Expr::binop(
        BinOp::from_name("Add64").unwrap(),
        Expr::constant(u64::MAX, IrType::I64),
        Expr::constant(1, IrType::I64),
    );
    ensure(st.eval_expr(&add) == Ok(0), || "Add64 wraparound".into())?;
    let eq = Expr::binop(
        BinOp::from_name("CmpEQ64").unwrap(),
        Expr::constant(5, IrType::I64),
        Expr::constant(5, IrType::I64),
    );
    ensure(st.eval_expr(&eq) == Ok(1), || "CmpEQ64".into())?;
    let div = Expr::binop(
        BinOp::from_name("DivU64").unwrap(),
        Expr::constant(5, IrType::I64),
        Expr::constant(0, IrType::I64),
    );
    ensure(st.eval_expr(&div) == Err(InterpError::DivByZero), || "DivByZero".into())?;

    let b = parse_irsb(
        "IRSB @ 0x1000 {
  t0:Ity_I64
  00 | STOREle(0x0000000000008000) = 0x0123456789abcdef
  01 | t0 = LDle:I64(0x0000000000008000)
  02 | PUT(offset=24) = t0
  NEXT: PUT(offset=184) = 0x1004; Ijk_Boring
}",
    )
    .map_err(|e| e.to_string())?;
    let mut st = MachineState::new(3);
    st.exec_block(&b, &WeightTable::default()).map_err(|e| e.error.to_string())?;
    ensure(st.read_guest(24, IrType::I64) == Ok(0x0123456789abcdef), || "load after store".into())?;
    ensure(st.mem_byte(0x8000) == 0xef && st.mem_byte(0x8007) == 0x01, || "little-endian bytes".into())?;

    let b = parse_irsb(
        "IRSB @ 0x1000 {
  00 | if (1) { PUT(offset=184) = 0x2000; Ijk_Boring }
  01 | PUT(offset=0) = 0x0000000000000007
  NEXT: PUT(offset=184) = 0x1004; Ijk_Boring
}",
    )
    .map_err(|e| e.to_string())?;
    let mut st = MachineState::new(3);
    let before = st.read_guest(0, IrType::I64).map_err(|e| e.to_string())?;
    let run = st.exec_block(&b, &WeightTable::default()).map_err(|e| e.error.to_string())?;
    ensure(run.exit.kind == ExitKind::SideExit(0) && run.exit.target == 0x2000, || {
        format!("exit outcome {:?}", run.exit)
    })?;
    ensure(st.read_guest(0, IrType::I64) == Ok(before), || "PUT after taken exit ran".into())?;
    Ok("wraparound, CmpEQ64, DivByZero, little-endian, exit short-circuit".into())
}

// ---------------------------------------------------------------------------
// End-to-end determinism

fn replay_determinism() -> Outcome {
    let (program, truth) = generate(&GeneratorConfig::new(20, 24, 0.3, 7)).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let input = dir.path().join("prog.vir");
    fs::write(&input, print_program(&program)).map_err(|e| e.to_string())?;

    // recorded responses: correct rewrites for the planted redundancies, a
    // wrong one, commentary-wrapped ones and one that cannot parse
    let mut rec = BTreeMap::new();
    for (n, (addr, idx)) in truth.removable.keys().enumerate() {
        let b = &program.blocks[addr];
        let c = RewriteCandidate::new(b, *idx).unwrap();
        let text = print_statement(&rule_rewrite(&c).unwrap().replacement);
        let raw = match n % 4 {
            0 => format!("```\n{text}\n```"),
            1 => format!("Here is the rewrite:\n{text}"),
            _ => text,
        };
        rec.insert((*addr, *idx), raw);
    }
    let first = *program.blocks.keys().next().unwrap();
    rec.insert((first, 1), "I am not sure.".to_string());
    let replay = dir.path().join("responses.tsv");
    write_replay_file(&replay, &rec).map_err(|e| e.to_string())?;

    let run = |out: &Path| -> Result<RewriteLog, String> {
        let mut cfg = RunConfig {
            k: 200,
            seed: 7,
            input: Some(input.clone()),
            out: Some(out.to_path_buf()),
            ..RunConfig::default()
        };
        cfg.backend.kind = BackendKind::Replay;
        cfg.backend.replay_path = Some(replay.clone());
        run_pipeline(&cfg).map(|o| o.log).map_err(|e| e.to_string())
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let log = run(&a)?;
    run(&b)?;
    let mut files = 0;
    for entry in fs::read_dir(&a).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let x = fs::read(a.join(&name)).map_err(|e| e.to_string())?;
        let y = fs::read(b.join(&name)).map_err(|e| e.to_string())?;
        ensure(x == y, || format!("{name:?} differs"))?;
        files += 1;
    }
    ensure(files == fs::read_dir(&b).map_err(|e| e.to_string())?.count(), || "file sets differ".into())?;
    ensure(files >= 4, || format!("only {files} files written"))?;
    ensure(log.count(Decision::Retained) > 0, || "nothing retained".into())?;
    ensure(fs::metadata(a.join(LOG_FILE)).is_ok(), || "no log".into())?;
    Ok(format!("{files} files byte-identical, {} rewrites retained", log.count(Decision::Retained)))
}

// ---------------------------------------------------------------------------
// Cost ordering

fn cost_ordering() -> Outcome {
    let b = parse_irsb(
        "IRSB @ 0x1000 {
  t0:Ity_I64 t1:Ity_I64 t2:Ity_I64
  00 | t0 = GET:I64(offset=16)
  01 | t1 = GET:I64(offset=24)
  02 | STOREle(t1) = t0
  03 | t2 = Mul64(t0,t1)
  04 | PUT(offset=32) = t2
  NEXT: PUT(offset=184) = 0x1004; Ijk_Boring
}",
    )
    .map_err(|e| e.to_string())?;
    let w = WeightTable::default();
    let costs: Vec<u64> = [2, 3, 4].iter().map(|i| statement_cost(&b.stmts[*i], &w)).collect();
    ensure(costs == [6, 5, 1], || format!("costs {costs:?}"))?;
    let mut p = Program::new("fixture");
    p.blocks.insert(b.addr, b.clone());
    // only the three fixture statements matter; the GETs cost 2 each
    let order = |w: &WeightTable| -> Vec<usize> {
        rank_statements(&p, w, 5)
            .into_iter()
            .map(|s| s.stmt_index)
            .filter(|i| [2, 3, 4].contains(i))
            .collect()
    };
    let base = order(&w);
    ensure(base == [2, 3, 4], || format!("order {base:?}"))?;
    let doubled = order(&w.scaled(2));
    ensure(doubled == base, || format!("doubled order {doubled:?}"))?;
    let full: Vec<_> = rank_statements(&p, &w, 5).iter().map(|s| (s.stmt_index, s.cost)).collect();
    let full2: Vec<_> = rank_statements(&p, &w.scaled(2), 5).iter().map(|s| (s.stmt_index, s.cost / 2)).collect();
    ensure(full == full2, || "scaled ranking differs".into())?;
    Ok("Store(6) > Mul(5) > Put(1), invariant under doubling".into())
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 8] = [
        ("report fidelity", Duration::from_secs(1), report_fidelity),
        ("rule-backend effectiveness", Duration::from_secs(60), rule_backend_effectiveness),
        ("verifier mutation kill", Duration::from_secs(30), mutation_kill),
        ("rule soundness (exhaustive I8)", Duration::from_secs(10), exhaustive_i8),
        ("parser round trip", Duration::from_secs(10), parser_round_trip),
        ("interpreter semantics", Duration::from_secs(1), interpreter_suite),
        ("end-to-end determinism", Duration::from_secs(30), replay_determinism),
        ("cost-model ordering", Duration::from_secs(1), cost_ordering),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let line = match result {
            Ok(detail) if elapsed <= limit => format!("PASS  {name}: {detail} ({elapsed:.2?})"),
            Ok(detail) => {
                failed += 1;
                format!("FAIL  {name}: {detail}, but took {elapsed:.2?} (limit {limit:?})")
            }
            Err(why) => {
                failed += 1;
                format!("FAIL  {name}: {why} ({elapsed:.2?})")
            }
        };
        println!("{line}");
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
