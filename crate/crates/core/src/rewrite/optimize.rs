use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    reintegrate, Backend, BackendConfig, BackendError, ConfigError, ProposalStatus, Provenance,
    RewriteCandidate, RewriteProposal, RuleId,
};
use crate::cost::{rank_statements, StmtCost, WeightTable};
use crate::interp::mix64;
use crate::ir::{IrSb, Program};
use crate::text::print_statement;
use crate::verify::{verify_rewrite, MemoryCompare, Verdict, VerifyPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    /// Verified equivalent and kept.
    Retained,
    /// Verification did not return Equivalent; the original was kept.
    Discarded,
    /// The proposal failed sanitizing or a backend request failed.
    Rejected,
    /// The proposal was identical to the original statement.
    Unchanged,
    /// The backend had nothing to offer.
    NoProposal,
    /// The rewritten block failed revalidation.
    IntegrationFailed,
    /// Verified stepwise, but the whole rewritten block later failed the
    /// final check against the original, so the block was restored.
    Reverted,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub block_addr: u64,
    pub stmt_index: usize,
    pub cost: u64,
    pub original: String,
    pub replacement: Option<String>,
    pub provenance: Option<Provenance>,
    pub status: Option<ProposalStatus>,
    pub verdict: Option<Verdict>,
    pub decision: Decision,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockOutcome {
    pub block_addr: u64,
    pub candidates: usize,
    pub retained: usize,
    /// Original versus fully rewritten block; absent when nothing changed.
    pub final_verdict: Option<Verdict>,
    pub reverted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RewriteLog {
    /// One entry per ranked candidate, in rank order.
    pub entries: Vec<LogEntry>,
    pub blocks: Vec<BlockOutcome>,
    /// Blocks whose final whole-block check failed.
    pub unexpected_mismatches: usize,
}

impl RewriteLog {
    pub fn count(&self, d: Decision) -> usize {
        self.entries.iter().filter(|e| e.decision == d).count()
    }

    /// Raw backend responses keyed by candidate, in replay-file form.
    pub fn raw_responses(&self) -> BTreeMap<(u64, usize), String> {
        self.entries
            .iter()
            .filter_map(|e| {
                let prov = e.provenance.as_ref()?;
                // rule rewrites are recorded as the statement they produced
                let raw = match prov.raw_response() {
                    Some(raw) => raw,
                    None if e.status == Some(ProposalStatus::Sanitized) => e.replacement.as_deref()?,
                    None => return None,
                };
                if matches!(&e.status, Some(ProposalStatus::RejectedSyntax(r)) if r.starts_with("backend-error:")) {
                    return None;
                }
                Some(((e.block_addr, e.stmt_index), raw.to_string()))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptimizeOptions {
    pub k: usize,
    pub weights: WeightTable,
    pub policy: VerifyPolicy,
    pub max_parallel: usize,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            k: 10,
            weights: WeightTable::default(),
            policy: VerifyPolicy::default(),
            max_parallel: 4,
        }
    }
}

type Request = Result<Option<RewriteProposal>, BackendError>;

fn request_all(p: &Program, ranking: &[StmtCost], backend: &Backend, max_parallel: usize) -> Vec<Request> {
    let run = || {
        ranking
            .par_iter()
            .map(|sc| {
                let block = &p.blocks[&sc.block_addr];
                let c = RewriteCandidate::new(block, sc.stmt_index).expect("ranked statements are rewritable");
                backend.request(&c)
            })
            .collect()
    };
    match rayon::ThreadPoolBuilder::new().num_threads(max_parallel.max(1)).build() {
        Ok(pool) => pool.install(run),
        Err(_) => run(),
    }
}

fn block_policy(base: &VerifyPolicy, addr: u64, memory: MemoryCompare) -> VerifyPolicy {
    VerifyPolicy {
        seed: mix64(base.seed, addr),
        memory,
        ..*base
    }
}

/// Applies one block's proposals one at a time, each verified against the
/// block as rewritten so far, then checks the end result against the
/// original.
fn optimize_block(orig: &IrSb, items: &mut [(StmtCost, Request, LogEntry)], policy: &VerifyPolicy) -> (IrSb, BlockOutcome) {
    let mut current = orig.clone();
    let mut merged_stores = false;
    let mut retained = 0;

    for (sc, req, entry) in items.iter_mut() {
        let proposal = match req {
            Err(e) => {
                entry.decision = Decision::NoProposal;
                entry.note = Some(e.to_string());
                continue;
            }
            Ok(None) => {
                entry.decision = Decision::NoProposal;
                continue;
            }
            Ok(Some(p)) => p,
        };
        entry.replacement = Some(print_statement(&proposal.replacement));
        entry.provenance = Some(proposal.provenance.clone());
        entry.status = Some(proposal.status.clone());
        if !proposal.is_sanitized() {
            entry.decision = Decision::Rejected;
            continue;
        }
        if proposal.replacement == current.stmts[sc.stmt_index] {
            entry.decision = Decision::Unchanged;
            continue;
        }
        let tentative = match reintegrate(&current, &[(sc.stmt_index, proposal.clone())]) {
            Ok(b) => b,
            Err(e) => {
                entry.decision = Decision::IntegrationFailed;
                entry.note = Some(e.to_string());
                continue;
            }
        };
        let is_merge = proposal.provenance.rule() == Some(RuleId::R5);
        let memory = if is_merge { MemoryCompare::FinalImage } else { policy.memory };
        let verdict = verify_rewrite(&current, &tentative, &block_policy(policy, orig.addr, memory));
        entry.decision = if verdict.is_equivalent() {
            current = tentative;
            merged_stores |= is_merge;
            retained += 1;
            Decision::Retained
        } else {
            Decision::Discarded
        };
        entry.verdict = Some(verdict);
    }

    let mut outcome = BlockOutcome {
        block_addr: orig.addr,
        candidates: items.len(),
        retained,
        final_verdict: None,
        reverted: false,
    };
    if retained == 0 {
        return (orig.clone(), outcome);
    }
    let memory = if merged_stores { MemoryCompare::FinalImage } else { policy.memory };
    let verdict = verify_rewrite(orig, &current, &block_policy(policy, orig.addr, memory));
    if !verdict.is_equivalent() {
        log::error!("block {:#x}: combined rewrites failed the final check: {verdict}", orig.addr);
        for (_, _, entry) in items.iter_mut() {
            if entry.decision == Decision::Retained {
                entry.decision = Decision::Reverted;
            }
        }
        outcome.reverted = true;
        outcome.retained = 0;
        current = orig.clone();
    }
    outcome.final_verdict = Some(verdict);
    (current, outcome)
}

/// Ranks the `opts.k` most expensive statements, asks the backend for a
/// replacement of each and keeps only those that verify equivalent.
pub fn optimize_with_backend(p: &Program, backend: &Backend, opts: &OptimizeOptions) -> (Program, RewriteLog) {
    let ranking = rank_statements(p, &opts.weights, opts.k);
    let requests = request_all(p, &ranking, backend, opts.max_parallel);

    let mut per_block: BTreeMap<u64, Vec<(usize, StmtCost, Request, LogEntry)>> = BTreeMap::new();
    for (rank, (sc, req)) in ranking.iter().zip(requests).enumerate() {
        let block = &p.blocks[&sc.block_addr];
        let entry = LogEntry {
            block_addr: sc.block_addr,
            stmt_index: sc.stmt_index,
            cost: sc.cost,
            original: print_statement(&block.stmts[sc.stmt_index]),
            replacement: None,
            provenance: None,
            status: None,
            verdict: None,
            decision: Decision::NoProposal,
            note: None,
        };
        per_block.entry(sc.block_addr).or_default().push((rank, *sc, req, entry));
    }

    let results: Vec<(IrSb, BlockOutcome, Vec<(usize, LogEntry)>)> = per_block
        .into_par_iter()
        .map(|(addr, mut items)| {
            items.sort_by_key(|(_, sc, _, _)| sc.stmt_index);
            let ranks: Vec<usize> = items.iter().map(|i| i.0).collect();
            let mut work: Vec<(StmtCost, Request, LogEntry)> =
                items.into_iter().map(|(_, sc, req, e)| (sc, req, e)).collect();
            let (block, outcome) = optimize_block(&p.blocks[&addr], &mut work, &opts.policy);
            let entries = ranks.into_iter().zip(work.into_iter().map(|w| w.2)).collect();
            (block, outcome, entries)
        })
        .collect();

    let mut out = p.clone();
    let mut log = RewriteLog::default();
    let mut ranked_entries = Vec::with_capacity(ranking.len());
    for (block, outcome, entries) in results {
        if outcome.reverted {
            log.unexpected_mismatches += 1;
        }
        out.blocks.insert(block.addr, block);
        log.blocks.push(outcome);
        ranked_entries.extend(entries);
    }
    ranked_entries.sort_by_key(|(rank, _)| *rank);
    log.entries = ranked_entries.into_iter().map(|(_, e)| e).collect();
    (out, log)
}

pub fn optimize_program(
    p: &Program,
    k: usize,
    cfg: &BackendConfig,
    w: &WeightTable,
    policy: &VerifyPolicy,
) -> Result<(Program, RewriteLog), ConfigError> {
    let backend = Backend::from_config(cfg)?;
    let opts = OptimizeOptions {
        k,
        weights: w.clone(),
        policy: *policy,
        max_parallel: cfg.max_parallel,
    };
    Ok(optimize_with_backend(p, &backend, &opts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewrite::ReplayBook;
    use crate::text::{parse_program, print_program};

    const SRC: &str = "IRSB @ 0x1000 {
  t2:Ity_I64 t3:Ity_I64
  00 | ------ IMark(0x1000,4,0) ------
  01 | t2 = GET:I64(offset=16)
  02 | t3 = Add64(t2,0x0000000000000000)
  03 | PUT(offset=24) = t3
  NEXT: PUT(offset=184) = 0x1004; Ijk_Boring
}";

    #[test]
    fn k_zero_is_identity() {
        let p = parse_program(SRC).unwrap();
        let (out, log) = optimize_program(&p, 0, &BackendConfig::default(), &WeightTable::default(), &VerifyPolicy::default()).unwrap();
        assert_eq!(out, p);
        assert!(log.entries.is_empty());
    }

    #[test]
    fn rule_backend_simplifies_identity() {
        let p = parse_program(SRC).unwrap();
        let (out, log) = optimize_program(&p, 10, &BackendConfig::default(), &WeightTable::default(), &VerifyPolicy::default()).unwrap();
        assert!(print_program(&out).contains("t3 = t2"));
        let e = log.entries.iter().find(|e| e.stmt_index == 2).unwrap();
        assert_eq!(e.decision, Decision::Retained);
        assert_eq!(e.verdict, Some(Verdict::Equivalent { trials: 64 }));
        assert_eq!(log.entries.len(), 3);
        assert_eq!(log.unexpected_mismatches, 0);
    }

    #[test]
    fn wrong_replay_is_discarded() {
        let p = parse_program(SRC).unwrap();
        let mut book = ReplayBook::default();
        book.entries.insert((0x1000, 2), (1, "t3 = Add64(t2,0x1)".into()));
        let backend = Backend::Replay(book);
        let opts = OptimizeOptions::default();
        let (out, log) = optimize_with_backend(&p, &backend, &opts);
        assert_eq!(out, p);
        let e = log.entries.iter().find(|e| e.stmt_index == 2).unwrap();
        assert_eq!(e.decision, Decision::Discarded);
        assert!(matches!(e.verdict, Some(Verdict::Mismatch { .. })));
        // the other candidates have no recorded response
        assert_eq!(log.count(Decision::NoProposal), 2);
    }
}
