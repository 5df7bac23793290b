//! A small expression language for field elements.
//!
//! Grammar: integers, layer variables (`s`, `t`, `u`, extension roots,
//! `th<i>` for materialized Artin-Schreier generators), `+ - * / ^` with
//! integer exponents, and parentheses. Used by the CLI's spec files, the
//! REPL, and test fixtures.

use super::{Tower, Value};
use crate::error::{VlabError, VlabResult};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Int(i64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i64),
}

impl Expr {
    pub fn parse(text: &str) -> VlabResult<Expr> {
        let mut p = Parser {
            chars: text.char_indices().peekable(),
            text,
        };
        let e = p.expr()?;
        p.skip_ws();
        if let Some((i, c)) = p.chars.peek().copied() {
            return Err(VlabError::Domain(format!(
                "unexpected character {:?} at byte {} in element expression",
                c, i
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, f: &Tower) -> VlabResult<Value> {
        match self {
            Expr::Int(n) => Ok(f.from_i64(*n)),
            Expr::Var(name) => f.generator(name).ok_or_else(|| {
                VlabError::Domain(format!("unknown generator {:?} in field {}", name, f))
            }),
            Expr::Neg(a) => {
                let v = a.eval(f)?;
                f.neg(&v)
            }
            Expr::Add(a, b) => {
                let (x, y) = (a.eval(f)?, b.eval(f)?);
                f.add(&x, &y)
            }
            Expr::Sub(a, b) => {
                let (x, y) = (a.eval(f)?, b.eval(f)?);
                f.sub(&x, &y)
            }
            Expr::Mul(a, b) => {
                let (x, y) = (a.eval(f)?, b.eval(f)?);
                f.mul(&x, &y)
            }
            Expr::Div(a, b) => {
                let (x, y) = (a.eval(f)?, b.eval(f)?);
                f.div(&x, &y)
            }
            Expr::Pow(a, e) => {
                let x = a.eval(f)?;
                f.pow_i64(&x, *e)
            }
        }
    }
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some((_, c)) if c.is_whitespace()) {
            self.chars.next();
        }
    }

    fn expr(&mut self) -> VlabResult<Expr> {
        self.skip_ws();
        let mut acc = self.term()?;
        loop {
            self.skip_ws();
            match self.chars.peek().copied() {
                Some((_, '+')) => {
                    self.chars.next();
                    let rhs = self.term()?;
                    acc = Expr::Add(Box::new(acc), Box::new(rhs));
                }
                Some((_, '-')) => {
                    self.chars.next();
                    let rhs = self.term()?;
                    acc = Expr::Sub(Box::new(acc), Box::new(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> VlabResult<Expr> {
        self.skip_ws();
        let mut acc = self.factor()?;
        loop {
            self.skip_ws();
            match self.chars.peek().copied() {
                Some((_, '*')) => {
                    self.chars.next();
                    let rhs = self.factor()?;
                    acc = Expr::Mul(Box::new(acc), Box::new(rhs));
                }
                Some((_, '/')) => {
                    self.chars.next();
                    let rhs = self.factor()?;
                    acc = Expr::Div(Box::new(acc), Box::new(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> VlabResult<Expr> {
        self.skip_ws();
        let base = match self.chars.peek().copied() {
            Some((_, '-')) => {
                self.chars.next();
                let inner = self.factor()?;
                return Ok(Expr::Neg(Box::new(inner)));
            }
            Some((_, '(')) => {
                self.chars.next();
                let inner = self.expr()?;
                self.skip_ws();
                match self.chars.next() {
                    Some((_, ')')) => inner,
                    other => {
                        return Err(VlabError::Domain(format!(
                            "expected ')' in element expression, found {:?}",
                            other.map(|(_, c)| c)
                        )))
                    }
                }
            }
            Some((_, c)) if c.is_ascii_digit() => self.number()?,
            Some((_, c)) if c.is_ascii_alphabetic() || c == '_' => self.ident()?,
            other => {
                return Err(VlabError::Domain(format!(
                    "unexpected token {:?} in element expression",
                    other.map(|(_, c)| c)
                )))
            }
        };
        self.skip_ws();
        if matches!(self.chars.peek(), Some((_, '^'))) {
            self.chars.next();
            self.skip_ws();
            let mut sign = 1i64;
            if matches!(self.chars.peek(), Some((_, '-'))) {
                self.chars.next();
                sign = -1;
            }
            let Expr::Int(e) = self.number()? else {
                unreachable!()
            };
            return Ok(Expr::Pow(Box::new(base), sign * e));
        }
        Ok(base)
    }

    fn number(&mut self) -> VlabResult<Expr> {
        let mut digits = String::new();
        while matches!(self.chars.peek(), Some((_, c)) if c.is_ascii_digit()) {
            digits.push(self.chars.next().unwrap().1);
        }
        if digits.is_empty() {
            return Err(VlabError::Domain(format!(
                "expected a number in element expression {:?}",
                self.text
            )));
        }
        digits
            .parse::<i64>()
            .map(Expr::Int)
            .map_err(|_| VlabError::Domain(format!("integer {} out of range", digits)))
    }

    fn ident(&mut self) -> VlabResult<Expr> {
        let mut name = String::new();
        while matches!(self.chars.peek(), Some((_, c)) if c.is_ascii_alphanumeric() || *c == '_')
        {
            name.push(self.chars.next().unwrap().1);
        }
        Ok(Expr::Var(name))
    }
}

/// Parse and evaluate in one step.
pub fn eval_str(f: &Tower, text: &str) -> VlabResult<Value> {
    Expr::parse(text)?.eval(f)
}
