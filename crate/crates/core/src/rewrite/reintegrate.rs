use std::collections::BTreeSet;

use super::RewriteProposal;
use crate::ir::{validate, IrSb, Statement};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IntegrationError {
    #[error("proposal for statement {0} was not sanitized")]
    NotSanitized(usize),
    #[error("statement {0} does not exist or is metadata")]
    BadIndex(usize),
    #[error("statement {0} has more than one proposal")]
    DuplicateIndex(usize),
    #[error("replacing statement {0} would change control flow")]
    ControlFlow(usize),
    #[error("rewritten block does not validate: {0}")]
    Invalid(String),
}

fn same_exit(a: &Statement, b: &Statement) -> bool {
    match (a, b) {
        (
            Statement::Exit {
                target,
                jumpkind,
                offset,
                ..
            },
            Statement::Exit {
                target: t2,
                jumpkind: j2,
                offset: o2,
                ..
            },
        ) => (target, jumpkind, offset) == (t2, j2, o2),
        _ => false,
    }
}

/// Replaces the indexed statements in place and drops declarations of temps
/// that are no longer referenced because of the replacements. The input
/// block is left untouched on error.
pub fn reintegrate(block: &IrSb, proposals: &[(usize, RewriteProposal)]) -> Result<IrSb, IntegrationError> {
    let mut out = block.clone();
    let mut seen = BTreeSet::new();
    for (idx, p) in proposals {
        let idx = *idx;
        if !p.is_sanitized() {
            return Err(IntegrationError::NotSanitized(idx));
        }
        let Some(orig) = block.stmts.get(idx).filter(|s| !s.is_metadata()) else {
            return Err(IntegrationError::BadIndex(idx));
        };
        if !seen.insert(idx) {
            return Err(IntegrationError::DuplicateIndex(idx));
        }
        let was_exit = matches!(orig, Statement::Exit { .. });
        let is_exit = matches!(p.replacement, Statement::Exit { .. });
        if was_exit != is_exit || (was_exit && !same_exit(orig, &p.replacement)) {
            return Err(IntegrationError::ControlFlow(idx));
        }
        out.stmts[idx] = p.replacement.clone();
    }

    let before = block.referenced_temps();
    let after = out.referenced_temps();
    for t in before.difference(&after) {
        out.temps.remove(t);
    }

    let violations = validate(&out);
    if !violations.is_empty() {
        let text: Vec<String> = violations.iter().map(ToString::to_string).collect();
        return Err(IntegrationError::Invalid(text.join("; ")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::Temp;
    use crate::rewrite::{ProposalStatus, Provenance, RuleId};
    use crate::text::{parse_irsb, parse_statement};

    const SRC: &str = "IRSB @ 0x1000 {
  t0:Ity_I64 t1:Ity_I64 t2:Ity_I64 t9:Ity_I64
  00 | t0 = GET:I64(offset=16)
  01 | t1 = Add64(t0,0x0000000000000001)
  02 | t2 = Mul64(t0,t0)
  03 | PUT(offset=24) = t1
  NEXT: PUT(offset=184) = 0x1004; Ijk_Boring
}";

    fn prop(block: &IrSb, text: &str) -> RewriteProposal {
        RewriteProposal {
            replacement: parse_statement(text, &block.temps).unwrap(),
            provenance: Provenance::Rule { rule: RuleId::R7 },
            status: ProposalStatus::Sanitized,
        }
    }

    #[test]
    fn noop_replacement_prunes_temp() {
        let b = parse_irsb(SRC).unwrap();
        let out = reintegrate(&b, &[(2, prop(&b, "NoOp"))]).unwrap();
        assert_eq!(out.stmts.len(), 4);
        assert_eq!(out.stmts[2], Statement::NoOp);
        assert!(!out.temps.contains_key(&Temp(2)));
        // unused declarations that were already there stay
        assert!(out.temps.contains_key(&Temp(9)));
    }

    #[test]
    fn empty_is_identity() {
        let b = parse_irsb(SRC).unwrap();
        assert_eq!(reintegrate(&b, &[]).unwrap(), b);
    }

    #[test]
    fn read_before_write_rejected() {
        let b = parse_irsb(SRC).unwrap();
        let err = reintegrate(&b, &[(1, prop(&b, "t1 = t2"))]).unwrap_err();
        assert!(matches!(err, IntegrationError::Invalid(_)), "{err}");
    }

    #[test]
    fn index_checks() {
        let b = parse_irsb(SRC).unwrap();
        let p = prop(&b, "NoOp");
        assert_eq!(
            reintegrate(&b, &[(2, p.clone()), (2, p.clone())]),
            Err(IntegrationError::DuplicateIndex(2))
        );
        assert_eq!(reintegrate(&b, &[(7, p.clone())]), Err(IntegrationError::BadIndex(7)));
        let mut rejected = p;
        rejected.status = ProposalStatus::RejectedSyntax("x".into());
        assert_eq!(reintegrate(&b, &[(2, rejected)]), Err(IntegrationError::NotSanitized(2)));
        let exit = prop(&b, "if (1) { PUT(offset=184) = 0x2000; Ijk_Boring }");
        assert_eq!(reintegrate(&b, &[(3, exit)]), Err(IntegrationError::ControlFlow(3)));
    }
}
