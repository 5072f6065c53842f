use std::collections::BTreeMap;

use super::lexer::{snippet, tokenize, Tok, Token};
use super::ParseError;
use crate::ir::{BinOp, Const, Expr, IrSb, IrType, JumpKind, Statement, Temp, UnOp};

pub(crate) struct Parser<'a> {
    src: &'a str,
    toks: Vec<Token>,
    pos: usize,
    temps: BTreeMap<Temp, IrType>,
}

fn temp_index(word: &str) -> Option<u32> {
    let digits = word.strip_prefix('t')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn hex_literal(word: &str) -> Option<(&str, usize)> {
    let digits = word.strip_prefix("0x")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_hexdigit()) {
        return None;
    }
    Some((digits, digits.len()))
}

fn type_for_width(digits: usize) -> IrType {
    match digits {
        2 => IrType::I8,
        4 => IrType::I16,
        8 => IrType::I32,
        _ => IrType::I64,
    }
}

impl<'a> Parser<'a> {
    pub fn new(src: &'a str, temps: BTreeMap<Temp, IrType>) -> Result<Parser<'a>, ParseError> {
        Ok(Parser {
            src,
            toks: tokenize(src)?,
            pos: 0,
            temps,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn error_at(&self, tok: &Token, message: impl Into<String>) -> ParseError {
        ParseError {
            line: tok.line,
            column: tok.column,
            message: message.into(),
            snippet: snippet(self.src, tok.line),
        }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        self.error_at(&self.toks[self.pos], message)
    }

    pub fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    fn expect_punct(&mut self, c: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Punct(c) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!("expected '{c}'")))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Word(x) if x == w => {
                self.bump();
                Ok(())
            }
            _ => Err(self.error(format!("expected '{w}'"))),
        }
    }

    fn word(&mut self, what: &str) -> Result<(String, Token), ParseError> {
        let tok = self.bump();
        match &tok.tok {
            Tok::Word(w) => Ok((w.clone(), tok)),
            _ => Err(self.error_at(&tok, format!("expected {what}"))),
        }
    }

    fn hex(&mut self) -> Result<u64, ParseError> {
        let (w, tok) = self.word("hex literal")?;
        let (digits, _) =
            hex_literal(&w).ok_or_else(|| self.error_at(&tok, "expected hex literal"))?;
        u64::from_str_radix(digits, 16).map_err(|_| self.error_at(&tok, "hex literal overflows 64 bits"))
    }

    fn int(&mut self) -> Result<u64, ParseError> {
        let (w, tok) = self.word("integer")?;
        w.parse::<u64>()
            .map_err(|_| self.error_at(&tok, "expected decimal integer"))
    }

    fn small_int(&mut self) -> Result<u32, ParseError> {
        let tok = self.toks[self.pos].clone();
        let v = self.int()?;
        u32::try_from(v).map_err(|_| self.error_at(&tok, "integer out of range"))
    }

    fn jumpkind(&mut self) -> Result<JumpKind, ParseError> {
        let (w, tok) = self.word("jump kind")?;
        w.strip_prefix("Ijk_")
            .and_then(JumpKind::from_name)
            .ok_or_else(|| self.error_at(&tok, "expected Ijk_Boring, Ijk_Call or Ijk_Ret"))
    }

    fn ty_short(&mut self) -> Result<IrType, ParseError> {
        let (w, tok) = self.word("type")?;
        IrType::from_short_name(&w).ok_or_else(|| self.error_at(&tok, format!("unknown type {w}")))
    }

    /// `PUT(offset=N)` as used by PUT statements, exits and NEXT.
    fn put_head(&mut self) -> Result<u32, ParseError> {
        self.expect_word("PUT")?;
        self.expect_punct('(')?;
        self.expect_word("offset")?;
        self.expect_punct('=')?;
        let off = self.small_int()?;
        self.expect_punct(')')?;
        Ok(off)
    }

    pub fn expr(&mut self, expected: Option<IrType>) -> Result<Expr, ParseError> {
        let (w, tok) = self.word("expression")?;

        if let Some(idx) = temp_index(&w) {
            return Ok(Expr::RdTmp(Temp(idx)));
        }
        if let Some((digits, width)) = hex_literal(&w) {
            let value = u64::from_str_radix(digits, 16)
                .map_err(|_| self.error_at(&tok, "hex literal overflows 64 bits"))?;
            let ty = expected.unwrap_or_else(|| type_for_width(width));
            if !ty.fits(value) {
                return Err(self.error_at(&tok, format!("constant {w} does not fit {ty}")));
            }
            return Ok(Expr::Const(Const { value, ty }));
        }
        if w == "0" || w == "1" {
            let value = if w == "1" { 1 } else { 0 };
            let ty = expected.unwrap_or(IrType::I1);
            return Ok(Expr::Const(Const { value, ty }));
        }
        if w.bytes().all(|b| b.is_ascii_digit()) && *self.peek() != Tok::Punct('(') {
            return Err(self.error_at(&tok, "decimal constants other than 0/1 need a 0x prefix"));
        }

        match w.as_str() {
            "GET" if *self.peek() == Tok::Punct(':') => {
                self.bump();
                let ty = self.ty_short()?;
                self.expect_punct('(')?;
                self.expect_word("offset")?;
                self.expect_punct('=')?;
                let offset = self.small_int()?;
                self.expect_punct(')')?;
                return Ok(Expr::Get { offset, ty });
            }
            "LDle" if *self.peek() == Tok::Punct(':') => {
                self.bump();
                let ty = self.ty_short()?;
                self.expect_punct('(')?;
                let addr = self.expr(Some(IrType::I64))?;
                self.expect_punct(')')?;
                return Ok(Expr::load(ty, addr));
            }
            "ITE" => {
                self.expect_punct('(')?;
                let cond = self.expr(Some(IrType::I1))?;
                self.expect_punct(',')?;
                let ift = self.expr(expected)?;
                self.expect_punct(',')?;
                let hint = expected.or_else(|| crate::ir::type_of(&ift, &self.temps).ok().flatten());
                let iff = self.expr(hint)?;
                self.expect_punct(')')?;
                return Ok(Expr::ite(cond, ift, iff));
            }
            _ => {}
        }

        if *self.peek() != Tok::Punct('(') {
            return Err(self.error_at(&tok, format!("unexpected '{w}' in expression")));
        }
        self.bump();

        if let Some(op) = BinOp::from_name(&w) {
            let (lt, rt) = op.arg_types();
            let lhs = self.expr(Some(lt))?;
            self.expect_punct(',')?;
            let rhs = self.expr(Some(rt))?;
            self.expect_punct(')')?;
            return Ok(Expr::binop(op, lhs, rhs));
        }
        if let Some(op) = UnOp::from_name(&w) {
            let arg = self.expr(Some(op.arg_type()))?;
            self.expect_punct(')')?;
            return Ok(Expr::unop(op, arg));
        }

        let mut args = Vec::new();
        if *self.peek() != Tok::Punct(')') {
            loop {
                args.push(self.expr(None)?);
                if *self.peek() == Tok::Punct(',') {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect_punct(')')?;
        Ok(Expr::Opaque { name: w, args })
    }

    /// A statement body, without the leading `NN |`.
    pub fn statement_body(&mut self) -> Result<Statement, ParseError> {
        if *self.peek() == Tok::Dashes {
            self.bump();
            self.expect_word("IMark")?;
            self.expect_punct('(')?;
            let addr = self.hex()?;
            self.expect_punct(',')?;
            let len = self.small_int()?;
            self.expect_punct(',')?;
            let delta = self.small_int()?;
            self.expect_punct(')')?;
            if *self.peek() != Tok::Dashes {
                return Err(self.error("expected '------' after IMark"));
            }
            self.bump();
            return Ok(Statement::IMark { addr, len, delta });
        }

        let head = match self.peek() {
            Tok::Word(w) => w.clone(),
            _ => return Err(self.error("expected statement")),
        };

        if let Some(idx) = temp_index(&head) {
            self.bump();
            self.expect_punct('=')?;
            let tmp = Temp(idx);
            let expected = self.temps.get(&tmp).copied();
            let rhs = self.expr(expected)?;
            return Ok(Statement::WrTmp { tmp, rhs });
        }

        match head.as_str() {
            "NoOp" => {
                self.bump();
                Ok(Statement::NoOp)
            }
            "PUT" => {
                let offset = self.put_head()?;
                self.expect_punct('=')?;
                let data = self.expr(None)?;
                Ok(Statement::Put { offset, data })
            }
            "STOREle" => {
                self.bump();
                self.expect_punct('(')?;
                let addr = self.expr(Some(IrType::I64))?;
                self.expect_punct(')')?;
                self.expect_punct('=')?;
                let data = self.expr(None)?;
                Ok(Statement::Store { addr, data })
            }
            "if" => {
                self.bump();
                self.expect_punct('(')?;
                let guard = self.expr(Some(IrType::I1))?;
                self.expect_punct(')')?;
                self.expect_punct('{')?;
                let offset = self.put_head()?;
                self.expect_punct('=')?;
                let target = self.hex()?;
                self.expect_punct(';')?;
                let jumpkind = self.jumpkind()?;
                self.expect_punct('}')?;
                Ok(Statement::Exit {
                    guard,
                    target,
                    jumpkind,
                    offset,
                })
            }
            _ => Err(self.error(format!("unknown statement '{head}'"))),
        }
    }

    /// Statement with an optional `NN |` index prefix, consuming all input.
    pub fn lone_statement(&mut self) -> Result<Statement, ParseError> {
        if matches!(self.peek(), Tok::Word(w) if w.bytes().all(|b| b.is_ascii_digit()))
            && *self.peek_at(1) == Tok::Punct('|')
        {
            self.bump();
            self.bump();
        }
        let s = self.statement_body()?;
        if !self.at_eof() {
            return Err(self.error("trailing input after statement"));
        }
        Ok(s)
    }

    pub fn block(&mut self) -> Result<IrSb, ParseError> {
        self.expect_word("IRSB")?;
        self.expect_punct('@')?;
        let addr = self.hex()?;
        self.expect_punct('{')?;

        self.temps.clear();
        let mut temps = BTreeMap::new();
        while let (Tok::Word(w), Tok::Punct(':')) = (self.peek().clone(), self.peek_at(1).clone()) {
            let Some(idx) = temp_index(&w) else { break };
            let tok = self.bump();
            self.bump();
            let (ity, ty_tok) = self.word("temp type")?;
            let ty = ity
                .strip_prefix("Ity_")
                .and_then(IrType::from_short_name)
                .ok_or_else(|| self.error_at(&ty_tok, format!("unknown temp type {ity}")))?;
            if temps.insert(Temp(idx), ty).is_some() {
                return Err(self.error_at(&tok, format!("t{idx} declared twice")));
            }
        }
        self.temps = temps;

        let mut stmts = Vec::new();
        loop {
            match self.peek().clone() {
                Tok::Word(w) if w == "NEXT" => break,
                Tok::Word(w) if w.bytes().all(|b| b.is_ascii_digit()) => {
                    self.bump();
                    self.expect_punct('|')?;
                    stmts.push(self.statement_body()?);
                }
                _ => return Err(self.error("expected statement line 'NN | ...' or NEXT")),
            }
        }

        self.expect_word("NEXT")?;
        self.expect_punct(':')?;
        let next_offset = self.put_head()?;
        self.expect_punct('=')?;
        let next = self.expr(Some(IrType::I64))?;
        self.expect_punct(';')?;
        let jumpkind = self.jumpkind()?;
        self.expect_punct('}')?;

        Ok(IrSb {
            addr,
            temps: std::mem::take(&mut self.temps),
            stmts,
            next,
            jumpkind,
            next_offset,
        })
    }

    /// Line of the token the parser is currently looking at.
    pub fn line(&self) -> usize {
        self.toks[self.pos].line
    }

    pub fn column(&self) -> usize {
        self.toks[self.pos].column
    }
}
