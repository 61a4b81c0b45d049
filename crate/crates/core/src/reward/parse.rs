//! Lexer and recursive-descent parser.
//!
//! ```text
//! program   := component+
//! component := "component" IDENT "=" expr
//! expr      := term (("+" | "-") term)*
//! term      := unary (("*" | "/") unary)*
//! unary     := "-" unary | power
//! power     := primary ("^" unary)?
//! primary   := NUMBER | IDENT | call | "(" expr ")"
//! call      := ("exp" | "abs" | "sqrt") "(" expr ")"
//!            | ("min" | "max") "(" expr "," expr ")"
//!            | "clip" "(" expr "," expr "," expr ")"
//!            | "indicator" "(" expr CMP expr ")"
//! ```
//!
//! A `-` directly before a number literal that is not itself raised to a
//! power folds into a negative constant.

use super::ast::{BinaryOp, CmpOp, Expr, UnaryOp};
use super::{Component, RewardError};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    Assign,
    Cmp(CmpOp),
    Eof,
}

fn syntax(pos: usize, message: impl Into<String>) -> RewardError {
    RewardError::Syntax { pos, message: message.into() }
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, RewardError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, start));
            i += 1;
            continue;
        }
        match c {
            '=' => {
                out.push((Tok::Assign, start));
                i += 1;
            }
            '<' | '>' => {
                let eq = bytes.get(i + 1) == Some(&b'=');
                let op = match (c, eq) {
                    ('<', false) => CmpOp::Lt,
                    ('<', true) => CmpOp::Le,
                    ('>', false) => CmpOp::Gt,
                    _ => CmpOp::Ge,
                };
                out.push((Tok::Cmp(op), start));
                i += if eq { 2 } else { 1 };
            }
            _ if c.is_ascii_digit() || c == '.' => {
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let s = &text[start..i];
                let v: f64 = s.parse().map_err(|_| syntax(start, format!("bad number {s:?}")))?;
                if !v.is_finite() {
                    return Err(RewardError::NonFiniteConstant { pos: start });
                }
                out.push((Tok::Num(v), start));
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => return Err(syntax(start, format!("unexpected character {c:?}"))),
        }
    }
    out.push((Tok::Eof, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    catalog: &'a [String],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.at + k).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), RewardError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(syntax(self.pos(), format!("expected {what}")))
        }
    }

    fn is_component_keyword(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == "component")
    }

    fn program(&mut self) -> Result<Vec<Component>, RewardError> {
        let mut comps: Vec<Component> = Vec::new();
        while *self.peek() != Tok::Eof {
            if !self.is_component_keyword() {
                return Err(syntax(self.pos(), "expected `component`"));
            }
            self.bump();
            let name = match self.bump() {
                Tok::Ident(s) if s != "component" => s,
                _ => return Err(syntax(self.toks[self.at.saturating_sub(1)].1, "expected component name")),
            };
            if comps.iter().any(|c| c.name == name) {
                return Err(RewardError::DuplicateComponent(name));
            }
            self.expect(Tok::Assign, "`=`")?;
            let expr = self.expr()?;
            if *self.peek() != Tok::Eof && !self.is_component_keyword() {
                return Err(syntax(self.pos(), "unexpected token after expression"));
            }
            comps.push(Component { name, expr });
        }
        if comps.is_empty() {
            return Err(RewardError::EmptyProgram);
        }
        Ok(comps)
    }

    fn expr(&mut self) -> Result<Expr, RewardError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, RewardError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, RewardError> {
        if *self.peek() != Tok::Minus {
            return self.power();
        }
        self.bump();
        if let Tok::Num(v) = *self.peek() {
            if *self.peek_at(1) != Tok::Caret {
                self.bump();
                return Ok(Expr::Const(-v));
            }
        }
        Ok(Expr::unary(UnaryOp::Neg, self.unary()?))
    }

    fn power(&mut self) -> Result<Expr, RewardError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let pos = self.pos();
        let exp = self.unary()?;
        if !matches!(exp, Expr::Const(_)) {
            return Err(RewardError::UnboundedExpression { pos });
        }
        Ok(Expr::binary(BinaryOp::Pow, base, exp))
    }

    fn args(&mut self, n: usize) -> Result<Vec<Expr>, RewardError> {
        self.expect(Tok::LParen, "`(`")?;
        let mut out = vec![self.expr()?];
        while out.len() < n {
            self.expect(Tok::Comma, "`,`")?;
            out.push(self.expr()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(out)
    }

    fn primary(&mut self) -> Result<Expr, RewardError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let call = *self.peek() == Tok::LParen;
                match (name.as_str(), call) {
                    ("exp" | "abs" | "sqrt", true) => {
                        let op = match name.as_str() {
                            "exp" => UnaryOp::Exp,
                            "abs" => UnaryOp::Abs,
                            _ => UnaryOp::Sqrt,
                        };
                        let mut a = self.args(1)?;
                        Ok(Expr::unary(op, a.remove(0)))
                    }
                    ("min" | "max", true) => {
                        let op = if name == "min" { BinaryOp::Min } else { BinaryOp::Max };
                        let mut a = self.args(2)?;
                        let b = a.remove(1);
                        Ok(Expr::binary(op, a.remove(0), b))
                    }
                    ("clip", true) => {
                        let mut a = self.args(3)?;
                        let hi = a.remove(2);
                        let lo = a.remove(1);
                        Ok(Expr::Clip(Box::new(a.remove(0)), Box::new(lo), Box::new(hi)))
                    }
                    ("indicator", true) => {
                        self.bump();
                        let a = self.expr()?;
                        let op = match self.bump() {
                            Tok::Cmp(op) => op,
                            _ => return Err(syntax(self.toks[self.at.saturating_sub(1)].1, "expected comparison")),
                        };
                        let b = self.expr()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Expr::Indicator(op, Box::new(a), Box::new(b)))
                    }
                    (_, true) => Err(syntax(pos, format!("unknown function {name:?}"))),
                    ("component", false) => Err(syntax(pos, "unexpected `component`")),
                    (_, false) => match self.catalog.iter().position(|f| *f == name) {
                        Some(index) => Ok(Expr::Feature { name, index }),
                        None => Err(RewardError::UnknownFeature(name)),
                    },
                }
            }
            Tok::Eof => Err(syntax(pos, "unexpected end of input")),
            t => Err(syntax(pos, format!("unexpected token {t:?}"))),
        }
    }
}

pub(crate) fn parse_components(text: &str, catalog: &[String]) -> Result<Vec<Component>, RewardError> {
    let toks = lex(text)?;
    Parser { toks, at: 0, catalog }.program()
}
