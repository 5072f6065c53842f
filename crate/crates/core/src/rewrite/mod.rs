//! Statement-level rewriting.
//!
//! The most expensive statements become [`RewriteCandidate`]s. A backend
//! (deterministic rules, a chat-completion endpoint, or a file of recorded
//! responses) proposes one replacement statement per candidate. Proposals
//! are checked against the replacement contract, placed back into their
//! block and kept only when the rewritten block verifies equivalent.
//!
//! Replacement contract: the replacement parses and type-checks in the
//! block's temp environment; it writes the same temp, the same guest
//! offset or a store (or is `NoOp`); exits stay exits with the same target;
//! and it reads only temps defined before the statement it replaces.

mod backend;
mod optimize;
mod prompt;
mod reintegrate;
mod rules;
mod sanitize;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ir::{IrSb, Statement};

pub use backend::{
    backend_request, load_replay_file, write_replay_file, Backend, BackendConfig, BackendError,
    BackendKind, ConfigError, ReplayBook, DEFAULT_API_KEY_ENV,
};
pub use optimize::{
    optimize_program, optimize_with_backend, BlockOutcome, Decision, LogEntry, OptimizeOptions,
    RewriteLog,
};
pub use prompt::{build_prompt, SYSTEM_MESSAGE};
pub use reintegrate::{reintegrate, IntegrationError};
pub use rules::rule_rewrite;
pub use sanitize::{check_contract, sanitize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    /// Arithmetic identity element.
    R1,
    /// Constant folding.
    R2,
    /// Self-cancelling operands.
    R3,
    /// Double negation.
    R4,
    /// Store overwritten by the next store to the same address.
    R5,
    /// Put overwritten by a later put to the same offset.
    R6,
    /// Assignment to a temp nobody reads.
    R7,
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for RuleId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "R1" => RuleId::R1,
            "R2" => RuleId::R2,
            "R3" => RuleId::R3,
            "R4" => RuleId::R4,
            "R5" => RuleId::R5,
            "R6" => RuleId::R6,
            "R7" => RuleId::R7,
            other => return Err(format!("unknown rule {other}")),
        })
    }
}

/// One statement selected for rewriting, with its block as context.
#[derive(Debug, Clone, Copy)]
pub struct RewriteCandidate<'a> {
    pub block_addr: u64,
    pub stmt_index: usize,
    pub original: &'a Statement,
    pub block: &'a IrSb,
}

impl<'a> RewriteCandidate<'a> {
    /// `None` if the index is out of range or names an IMark/NoOp.
    pub fn new(block: &'a IrSb, stmt_index: usize) -> Option<RewriteCandidate<'a>> {
        let original = block.stmts.get(stmt_index)?;
        if original.is_metadata() {
            return None;
        }
        Some(RewriteCandidate {
            block_addr: block.addr,
            stmt_index,
            original,
            block,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source")]
pub enum Provenance {
    Rule { rule: RuleId },
    Llm { raw: String },
    Replay { file: String, line: usize, raw: String },
}

impl Provenance {
    pub fn rule(&self) -> Option<RuleId> {
        match self {
            Provenance::Rule { rule } => Some(*rule),
            _ => None,
        }
    }

    pub fn raw_response(&self) -> Option<&str> {
        match self {
            Provenance::Rule { .. } => None,
            Provenance::Llm { raw } | Provenance::Replay { raw, .. } => Some(raw),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason")]
pub enum ProposalStatus {
    Sanitized,
    RejectedSyntax(String),
    RejectedContract(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RewriteProposal {
    /// The proposed statement; the original statement when rejected.
    pub replacement: Statement,
    pub provenance: Provenance,
    pub status: ProposalStatus,
}

impl RewriteProposal {
    pub fn is_sanitized(&self) -> bool {
        self.status == ProposalStatus::Sanitized
    }
}
