//! The `.vir` text format: a line-oriented rendering of IR super-blocks.
//!
//! ```text
//! IRSB @ 0x1000 {
//!   t0:Ity_I64 t1:Ity_I64
//!   00 | ------ IMark(0x1000,4,0) ------
//!   01 | t0 = GET:I64(offset=16)
//!   02 | t1 = Add64(t0,0x0000000000000008)
//!   03 | PUT(offset=24) = t1
//!   NEXT: PUT(offset=184) = 0x0000000000001004; Ijk_Boring
//! }
//! ```
//!
//! Statement indices are informative; the parser renumbers. `#` starts a
//! comment. Hex constants take their type from the surrounding operator
//! signature when there is one, otherwise from their digit count
//! (2/4/8/16 digits for I8/I16/I32/I64). Bare `0` and `1` are `I1`
//! constants outside a typed context.

mod lexer;
mod parser;
mod printer;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::ir::{validate, IrSb, IrType, Program, Statement, Temp, Violation};
use parser::Parser;

pub use printer::{print_const, print_expr, print_irsb, print_program, print_statement, print_statement_line};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}\n    {snippet}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
    pub snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TextError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("block {addr:#x} (line {line}) is not well formed: {}", display_violations(.violations))]
    Invalid {
        addr: u64,
        line: usize,
        violations: Vec<Violation>,
    },
    #[error("duplicate block address {addr:#x} at line {line}")]
    DuplicateAddress { addr: u64, line: usize },
}

fn display_violations(vs: &[Violation]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

impl TextError {
    /// Line in the input the error refers to.
    pub fn line(&self) -> usize {
        match self {
            TextError::Parse(e) => e.line,
            TextError::Invalid { line, .. } | TextError::DuplicateAddress { line, .. } => *line,
        }
    }
}

fn parse_validated_block(p: &mut Parser<'_>) -> Result<IrSb, TextError> {
    let line = p.line();
    let block = p.block()?;
    let violations = validate(&block);
    if !violations.is_empty() {
        return Err(TextError::Invalid {
            addr: block.addr,
            line,
            violations,
        });
    }
    Ok(block)
}

/// Parses exactly one block. The result always passes [`validate`].
pub fn parse_irsb(text: &str) -> Result<IrSb, TextError> {
    let mut p = Parser::new(text, BTreeMap::new())?;
    let block = parse_validated_block(&mut p)?;
    if !p.at_eof() {
        return Err(ParseError {
            line: p.line(),
            column: p.column(),
            message: "trailing input after block".into(),
            snippet: text.lines().nth(p.line() - 1).unwrap_or("").into(),
        }
        .into());
    }
    Ok(block)
}

/// Parses zero or more concatenated blocks.
pub fn parse_program(text: &str) -> Result<Program, TextError> {
    let mut p = Parser::new(text, BTreeMap::new())?;
    let mut program = Program::default();
    while !p.at_eof() {
        let line = p.line();
        let block = parse_validated_block(&mut p)?;
        if program.blocks.contains_key(&block.addr) {
            return Err(TextError::DuplicateAddress {
                addr: block.addr,
                line,
            });
        }
        program.blocks.insert(block.addr, block);
    }
    Ok(program)
}

/// Parses a single statement body (optionally prefixed with `NN |`) using
/// `temps` to type context-dependent constants. No well-formedness check
/// is performed.
pub fn parse_statement(line: &str, temps: &BTreeMap<Temp, IrType>) -> Result<Statement, ParseError> {
    let mut p = Parser::new(line, temps.clone())?;
    p.lone_statement()
}

impl fmt::Display for IrSb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_irsb(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{BinOp, Const, Expr, JumpKind};

    #[test]
    fn empty_block() {
        let b = parse_irsb("IRSB @ 0x1000 {\n  NEXT: PUT(offset=184) = 0x1004; Ijk_Boring\n}").unwrap();
        assert_eq!(b.addr, 0x1000);
        assert!(b.stmts.is_empty());
        assert_eq!(b.next, Expr::Const(Const::u64(0x1004)));
        assert_eq!(b.next_offset, 184);
        assert_eq!(b.jumpkind, JumpKind::Boring);
    }

    #[test]
    fn wrtmp_line() {
        let src = "IRSB @ 0x1000 {\n t0:Ity_I64 t1:Ity_I64\n 00 | t0 = GET:I64(offset=16)\n 01 | t1 = Add64(t0,0x0000000000000008)\n NEXT: PUT(offset=184) = t1; Ijk_Boring\n}";
        let b = parse_irsb(src).unwrap();
        let add = BinOp::from_name("Add64").unwrap();
        assert_eq!(
            b.stmts[1],
            Statement::WrTmp {
                tmp: Temp(1),
                rhs: Expr::binop(add, Expr::tmp(0), Expr::constant(8, IrType::I64)),
            }
        );
    }

    #[test]
    fn exit_line() {
        let mut temps = BTreeMap::new();
        temps.insert(Temp(5), IrType::I1);
        let s = parse_statement("02 | if (t5) { PUT(offset=184) = 0x1010; Ijk_Boring }", &temps).unwrap();
        assert_eq!(
            s,
            Statement::Exit {
                guard: Expr::tmp(5),
                target: 0x1010,
                jumpkind: JumpKind::Boring,
                offset: 184,
            }
        );
    }

    #[test]
    fn canonical_forms() {
        assert_eq!(print_statement(&Statement::NoOp), "NoOp");
        assert_eq!(print_statement_line(3, &Statement::NoOp), "03 | NoOp");
        assert_eq!(print_const(&Const::u64(8)), "0x0000000000000008");
        assert_eq!(print_const(&Const::new(1, IrType::I1)), "1");
        assert_eq!(print_const(&Const::new(0xab, IrType::I8)), "0xab");
    }

    #[test]
    fn short_literals_take_context_type() {
        let mut temps = BTreeMap::new();
        temps.insert(Temp(2), IrType::I64);
        temps.insert(Temp(3), IrType::I64);
        let s = parse_statement("t3 = Add64(t2,0x0)", &temps).unwrap();
        let Statement::WrTmp { rhs: Expr::Binop { rhs, .. }, .. } = s else {
            panic!("expected binop")
        };
        assert_eq!(*rhs, Expr::constant(0, IrType::I64));
        let s = parse_statement("t3 = Shl64(t2,0x3)", &temps).unwrap();
        let Statement::WrTmp { rhs: Expr::Binop { rhs, .. }, .. } = s else {
            panic!("expected binop")
        };
        assert_eq!(*rhs, Expr::constant(3, IrType::I8));
        assert!(parse_statement("t3 = Shl64(t2,0x100)", &temps).is_err());
    }

    #[test]
    fn width_typing_without_context() {
        let temps = BTreeMap::new();
        let s = parse_statement("PUT(offset=8) = 0x0000abcd", &temps).unwrap();
        assert_eq!(
            s,
            Statement::Put {
                offset: 8,
                data: Expr::constant(0xabcd, IrType::I32)
            }
        );
    }

    #[test]
    fn program_cases() {
        assert!(parse_program("").unwrap().blocks.is_empty());
        assert!(parse_program("  # only a comment\n").unwrap().blocks.is_empty());
        let one = "IRSB @ 0x1000 {\n NEXT: PUT(offset=184) = 0x1004; Ijk_Boring\n}\n";
        let two = format!("{one}{}", one.replace("0x1000", "0x2000"));
        assert_eq!(parse_program(&two).unwrap().blocks.len(), 2);
        let dup = format!("{one}\n{one}");
        assert!(matches!(
            parse_program(&dup),
            Err(TextError::DuplicateAddress { addr: 0x1000, .. })
        ));
    }

    #[test]
    fn rejects_invalid_blocks() {
        let src = "IRSB @ 0x1000 {\n t1:Ity_I64\n 00 | PUT(offset=0) = t1\n NEXT: PUT(offset=184) = 0x1004; Ijk_Boring\n}";
        match parse_irsb(src) {
            Err(TextError::Invalid { violations, .. }) => {
                assert_eq!(violations[0].kind.rule(), "ReadBeforeWrite")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn parse_error_positions() {
        let src = "IRSB @ 0x1000 {\n 00 | t0 = Add64(t1\n NEXT: PUT(offset=184) = 0x1004; Ijk_Boring\n}";
        let TextError::Parse(e) = parse_irsb(src).unwrap_err() else {
            panic!("expected parse error")
        };
        assert_eq!(e.line, 3);
        assert!(e.snippet.contains("NEXT"));
    }

    #[test]
    fn renumbers_indices() {
        let src = "IRSB @ 0x1000 {\n 07 | NoOp\n 07 | NoOp\n NEXT: PUT(offset=184) = 0x1004; Ijk_Boring\n}";
        let b = parse_irsb(src).unwrap();
        assert!(print_irsb(&b).contains("01 | NoOp"));
    }
}
