use super::{Provenance, ProposalStatus, RewriteCandidate, RewriteProposal};
use crate::ir::Statement;
use crate::text::parse_statement;

/// Checks the replacement contract for `rep` standing in for the
/// candidate's original statement.
pub fn check_contract(c: &RewriteCandidate<'_>, rep: &Statement) -> Result<(), String> {
    let block = c.block;
    match (c.original, rep) {
        (Statement::WrTmp { tmp, .. }, Statement::WrTmp { tmp: t2, .. }) if tmp != t2 => {
            return Err(format!("target temp changed from {tmp} to {t2}"));
        }
        (Statement::WrTmp { tmp, .. }, Statement::NoOp) => {
            if block.temp_is_read(*tmp) {
                return Err(format!("{tmp} is read later and cannot be removed"));
            }
        }
        (Statement::WrTmp { .. }, Statement::WrTmp { .. }) => {}
        (Statement::Put { offset, .. }, Statement::Put { offset: o2, .. }) if offset != o2 => {
            return Err(format!("PUT offset changed from {offset} to {o2}"));
        }
        (Statement::Put { .. }, Statement::Put { .. } | Statement::NoOp) => {}
        (Statement::Store { .. }, Statement::Store { .. } | Statement::NoOp) => {}
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
        ) => {
            if (target, jumpkind, offset) != (t2, j2, o2) {
                return Err("exit target or kind changed".into());
            }
        }
        (orig, rep) => {
            return Err(format!(
                "{:?} statement cannot become {:?}",
                orig.kind(),
                rep.kind()
            ));
        }
    }

    for t in rep.temps_read() {
        match block.def_index(t) {
            Some(j) if j < c.stmt_index => {}
            _ => return Err(format!("reads {t}, which is not defined before the statement")),
        }
    }

    let issues = crate::ir::statement_type_issues(rep, &block.temps);
    if let Some(first) = issues.first() {
        return Err(format!("does not type-check: {first}"));
    }
    Ok(())
}

fn clean_line(line: &str) -> &str {
    let t = line.trim();
    t.strip_prefix('`')
        .and_then(|x| x.strip_suffix('`'))
        .unwrap_or(t)
        .trim()
}

/// Extracts a replacement statement from a raw model response.
///
/// Code fences and blank lines are dropped, then lines are scanned from
/// last to first; the first one that parses as a statement is taken and
/// checked against the replacement contract.
pub fn sanitize(raw: &str, c: &RewriteCandidate<'_>) -> RewriteProposal {
    let lines: Vec<&str> = raw
        .lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .map(clean_line)
        .filter(|l| !l.is_empty())
        .collect();

    let provenance = Provenance::Llm {
        raw: raw.to_string(),
    };
    let parsed = lines
        .iter()
        .rev()
        .find_map(|l| parse_statement(l, &c.block.temps).ok());

    let Some(rep) = parsed else {
        return RewriteProposal {
            replacement: c.original.clone(),
            provenance,
            status: ProposalStatus::RejectedSyntax("no line parses as a statement".into()),
        };
    };
    match check_contract(c, &rep) {
        Ok(()) => RewriteProposal {
            replacement: rep,
            provenance,
            status: ProposalStatus::Sanitized,
        },
        Err(reason) => RewriteProposal {
            replacement: c.original.clone(),
            provenance,
            status: ProposalStatus::RejectedContract(reason),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{Expr, IrSb, Temp};
    use crate::text::{parse_irsb, print_statement};

    fn block() -> IrSb {
        parse_irsb(
            "IRSB @ 0x1000 {
  t0:Ity_I64 t1:Ity_I64 t2:Ity_I64 t5:Ity_I1
  00 | t0 = GET:I64(offset=16)
  01 | t1 = Add64(t0,0x0000000000000000)
  02 | t2 = Mul64(t1,t0)
  03 | PUT(offset=24) = t2
  04 | STOREle(t0) = t1
  05 | t5 = CmpEQ64(t0,t2)
  06 | if (t5) { PUT(offset=184) = 0x1010; Ijk_Boring }
  NEXT: PUT(offset=184) = 0x1004; Ijk_Boring
}",
        )
        .unwrap()
    }

    #[test]
    fn strips_fences() {
        let b = block();
        let c = RewriteCandidate::new(&b, 1).unwrap();
        let p = sanitize("```\nt1 = t0\n```", &c);
        assert_eq!(p.status, ProposalStatus::Sanitized);
        assert_eq!(
            p.replacement,
            Statement::WrTmp {
                tmp: Temp(1),
                rhs: Expr::tmp(0)
            }
        );
    }

    #[test]
    fn skips_commentary() {
        let b = block();
        let c = RewriteCandidate::new(&b, 1).unwrap();
        let p = sanitize("Sure! The optimized statement is:\nt1 = t0", &c);
        assert_eq!(p.status, ProposalStatus::Sanitized);
        let p = sanitize("Here you go:\n\n`t1 = t0`\n", &c);
        assert_eq!(p.status, ProposalStatus::Sanitized);
        let p = sanitize("01 | t1 = t0", &c);
        assert_eq!(p.status, ProposalStatus::Sanitized);
    }

    #[test]
    fn rejects_contract_violations() {
        let b = block();
        let c = RewriteCandidate::new(&b, 1).unwrap();
        assert!(matches!(
            sanitize("t9 = t0", &c).status,
            ProposalStatus::RejectedContract(_)
        ));
        assert!(matches!(
            sanitize("t1 = t2", &c).status,
            ProposalStatus::RejectedContract(_)
        ));
        assert!(matches!(
            sanitize("NoOp", &c).status,
            ProposalStatus::RejectedContract(_)
        ));
        assert!(matches!(
            sanitize("t1 = GET:I32(offset=16)", &c).status,
            ProposalStatus::RejectedContract(_)
        ));
        let exit = RewriteCandidate::new(&b, 6).unwrap();
        assert!(matches!(
            sanitize("NoOp", &exit).status,
            ProposalStatus::RejectedContract(_)
        ));
        assert_eq!(
            sanitize("if (t5) { PUT(offset=184) = 0x1010; Ijk_Boring }", &exit).status,
            ProposalStatus::Sanitized
        );
        let put = RewriteCandidate::new(&b, 3).unwrap();
        assert!(matches!(
            sanitize("PUT(offset=32) = t2", &put).status,
            ProposalStatus::RejectedContract(_)
        ));
        let store = RewriteCandidate::new(&b, 4).unwrap();
        assert_eq!(sanitize("NoOp", &store).status, ProposalStatus::Sanitized);
    }

    #[test]
    fn rejects_garbage() {
        let b = block();
        let c = RewriteCandidate::new(&b, 2).unwrap();
        let p = sanitize("I cannot help with that.", &c);
        assert!(matches!(p.status, ProposalStatus::RejectedSyntax(_)));
        assert_eq!(&p.replacement, c.original);
    }

    #[test]
    fn idempotent_on_printed_replacement() {
        let b = block();
        let c = RewriteCandidate::new(&b, 2).unwrap();
        let first = sanitize("t2 = Mul64(t0,t0)", &c);
        assert!(first.is_sanitized());
        let again = sanitize(&print_statement(&first.replacement), &c);
        assert_eq!(again.replacement, first.replacement);
    }
}
