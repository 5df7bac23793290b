//! The field-spec text format: a line-oriented declaration of a tower, its
//! valuation stack, an optional order flag, a mandatory seed, and a list of
//! check directives.
//!
//! ```text
//! # composed place on Q_3((s))
//! field = laurent(padic(3, prec=6), s, prec=8)
//! valuation = stack(s, 3)
//! seed = 42
//! check ultrametric n=500
//! check decompose p=3
//! ```
//!
//! Parsing is total with located errors; `print` followed by `parse` is the
//! identity on the abstract document.

use std::fmt;

use thiserror::Error;

use vlab_core::tower::{expr::Expr, poly, Adjoined, LayerView, Tower, Value};
use vlab_core::valuation::{ExtProlongKind, Step, Valuation};
use vlab_core::{VlabError, VlabResult};

#[derive(Debug, Error)]
#[error("parse error at line {line}, column {col}: {msg}")]
pub struct SpecParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldExpr {
    Gf(u64, u32),
    Rationals,
    RatFunc(Box<FieldExpr>, String),
    Laurent(Box<FieldExpr>, String, u32),
    Puiseux(Box<FieldExpr>, String, u32),
    Padic(u64, u32),
    LazyAs(Box<FieldExpr>, u64),
    /// `ext(base, var, poly-in-X)`; the polynomial source is kept verbatim
    /// for round-tripping.
    Ext(Box<FieldExpr>, String, String),
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldExpr::Gf(p, k) => {
                if *k == 1 {
                    write!(f, "gf({})", p)
                } else {
                    write!(f, "gf({}, {})", p, k)
                }
            }
            FieldExpr::Rationals => write!(f, "rationals"),
            FieldExpr::RatFunc(b, v) => write!(f, "ratfunc({}, {})", b, v),
            FieldExpr::Laurent(b, v, n) => write!(f, "laurent({}, {}, prec={})", b, v, n),
            FieldExpr::Puiseux(b, v, n) => write!(f, "puiseux({}, {}, prec={})", b, v, n),
            FieldExpr::Padic(p, n) => write!(f, "padic({}, prec={})", p, n),
            FieldExpr::LazyAs(b, p) => write!(f, "lazy_as({}, {})", b, p),
            FieldExpr::Ext(b, v, m) => write!(f, "ext({}, {}, {})", b, v, m),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VExpr {
    Trivial,
    /// Step tokens, outermost first: a series variable, a prime literal, or
    /// `prolong` for extension layers.
    Stack(Vec<String>),
}

impl fmt::Display for VExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VExpr::Trivial => write!(f, "trivial"),
            VExpr::Stack(steps) => write!(f, "stack({})", steps.join(", ")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Directive {
    pub name: String,
    pub args: Vec<(String, String)>,
    pub line: usize,
}

impl Directive {
    pub fn arg(&self, key: &str) -> Option<&str> {
        self.args
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn arg_usize(&self, key: &str, default: usize) -> usize {
        self.arg(key)
            .and_then(|v| v.parse().ok())
            .unwrap_or(default)
    }

    pub fn arg_u64(&self, key: &str) -> Option<u64> {
        self.arg(key).and_then(|v| v.parse().ok())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSpecDocument {
    pub field: FieldExpr,
    pub valuation: Option<VExpr>,
    pub order_leading_coeff: bool,
    pub seed: u64,
    pub checks: Vec<Directive>,
}

impl FieldSpecDocument {
    /// Canonical printing; `parse(print(doc)) == doc`.
    pub fn print(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("field = {}\n", self.field));
        if let Some(v) = &self.valuation {
            out.push_str(&format!("valuation = {}\n", v));
        }
        if self.order_leading_coeff {
            out.push_str("order = leading-coeff\n");
        }
        out.push_str(&format!("seed = {}\n", self.seed));
        for c in &self.checks {
            out.push_str(&format!("check {}", c.name));
            for (k, v) in &c.args {
                out.push_str(&format!(" {}={}", k, v));
            }
            out.push('\n');
        }
        out
    }
}

pub fn parse_spec(text: &str) -> Result<FieldSpecDocument, SpecParseError> {
    let mut field: Option<FieldExpr> = None;
    let mut valuation: Option<VExpr> = None;
    let mut order = false;
    let mut seed: Option<u64> = None;
    let mut checks = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = match raw.find('#') {
            Some(i) => &raw[..i],
            None => raw,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("check") {
            if rest.starts_with(char::is_whitespace) {
                checks.push(parse_directive(rest.trim(), line_no)?);
                continue;
            }
        }
        let Some(eq) = trimmed.find('=') else {
            return Err(SpecParseError {
                line: line_no,
                col: 1,
                msg: format!("expected `key = value` or `check ...`, found {:?}", trimmed),
            });
        };
        let key = trimmed[..eq].trim();
        let value = trimmed[eq + 1..].trim();
        match key {
            "field" => {
                let mut cur = Cursor::new(value, line_no, raw.find(value).unwrap_or(0) + 1);
                field = Some(parse_fexpr(&mut cur)?);
                cur.expect_end()?;
            }
            "valuation" => {
                let mut cur = Cursor::new(value, line_no, raw.find(value).unwrap_or(0) + 1);
                valuation = Some(parse_vexpr(&mut cur)?);
                cur.expect_end()?;
            }
            "order" => {
                if value != "leading-coeff" {
                    return Err(SpecParseError {
                        line: line_no,
                        col: 1,
                        msg: format!("unknown order rule {:?}", value),
                    });
                }
                order = true;
            }
            "seed" => {
                seed = Some(value.parse().map_err(|_| SpecParseError {
                    line: line_no,
                    col: 1,
                    msg: format!("seed must be an unsigned integer, found {:?}", value),
                })?);
            }
            other => {
                return Err(SpecParseError {
                    line: line_no,
                    col: 1,
                    msg: format!("unknown binding {:?}", other),
                });
            }
        }
    }
    let field = field.ok_or(SpecParseError {
        line: 1,
        col: 1,
        msg: "missing `field = ...` declaration".into(),
    })?;
    let seed = seed.ok_or(SpecParseError {
        line: 1,
        col: 1,
        msg: "missing mandatory `seed = ...` declaration".into(),
    })?;
    Ok(FieldSpecDocument {
        field,
        valuation,
        order_leading_coeff: order,
        seed,
        checks,
    })
}

fn parse_directive(rest: &str, line: usize) -> Result<Directive, SpecParseError> {
    let mut parts = rest.split_whitespace();
    let name = parts
        .next()
        .ok_or(SpecParseError {
            line,
            col: 1,
            msg: "check directive needs a name".into(),
        })?
        .to_string();
    let mut args = Vec::new();
    for tok in parts {
        let Some(eq) = tok.find('=') else {
            return Err(SpecParseError {
                line,
                col: 1,
                msg: format!("directive argument {:?} is not key=value", tok),
            });
        };
        args.push((tok[..eq].to_string(), tok[eq + 1..].to_string()));
    }
    Ok(Directive { name, args, line })
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
    line: usize,
    col_base: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str, line: usize, col_base: usize) -> Self {
        Cursor {
            text,
            pos: 0,
            line,
            col_base,
        }
    }

    fn err(&self, msg: impl Into<String>) -> SpecParseError {
        SpecParseError {
            line: self.line,
            col: self.col_base + self.pos,
            msg: msg.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.text[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> Result<(), SpecParseError> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.err(format!(
                "expected {:?}, found {:?}",
                c,
                self.peek().map(String::from).unwrap_or_default()
            )))
        }
    }

    fn ident(&mut self) -> Result<String, SpecParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.text[self.pos..]
            .starts_with(|c: char| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected an identifier"));
        }
        Ok(self.text[start..self.pos].to_string())
    }

    fn number(&mut self) -> Result<u64, SpecParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.text[self.pos..].starts_with(|c: char| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected a number"));
        }
        self.text[start..self.pos]
            .parse()
            .map_err(|_| self.err("number out of range"))
    }

    /// Consume `prec=N`.
    fn prec(&mut self) -> Result<u32, SpecParseError> {
        self.skip_ws();
        let id = self.ident()?;
        if id != "prec" {
            return Err(self.err(format!("expected `prec=...`, found {:?}", id)));
        }
        self.eat('=')?;
        Ok(self.number()? as u32)
    }

    /// Raw text up to the matching close paren of the current nesting level.
    fn until_close(&mut self) -> Result<String, SpecParseError> {
        self.skip_ws();
        let start = self.pos;
        let mut depth = 0usize;
        for (i, c) in self.text[self.pos..].char_indices() {
            match c {
                '(' => depth += 1,
                ')' => {
                    if depth == 0 {
                        self.pos += i;
                        return Ok(self.text[start..start + i].trim().to_string());
                    }
                    depth -= 1;
                }
                _ => {}
            }
        }
        Err(self.err("unclosed parenthesis"))
    }

    fn expect_end(&mut self) -> Result<(), SpecParseError> {
        self.skip_ws();
        if self.pos != self.text.len() {
            return Err(self.err(format!(
                "trailing input {:?}",
                &self.text[self.pos..]
            )));
        }
        Ok(())
    }
}

fn parse_fexpr(cur: &mut Cursor) -> Result<FieldExpr, SpecParseError> {
    cur.skip_ws();
    let head = cur.ident()?;
    match head.as_str() {
        "rationals" | "q" => Ok(FieldExpr::Rationals),
        "gf" => {
            cur.eat('(')?;
            let p = cur.number()?;
            cur.skip_ws();
            let k = if cur.peek() == Some(',') {
                cur.eat(',')?;
                cur.number()? as u32
            } else {
                1
            };
            cur.eat(')')?;
            Ok(FieldExpr::Gf(p, k))
        }
        "padic" => {
            cur.eat('(')?;
            let p = cur.number()?;
            cur.eat(',')?;
            let n = cur.prec()?;
            cur.eat(')')?;
            Ok(FieldExpr::Padic(p, n))
        }
        "ratfunc" => {
            cur.eat('(')?;
            let base = parse_fexpr(cur)?;
            cur.eat(',')?;
            let var = cur.ident()?;
            cur.eat(')')?;
            Ok(FieldExpr::RatFunc(Box::new(base), var))
        }
        "laurent" | "puiseux" => {
            cur.eat('(')?;
            let base = parse_fexpr(cur)?;
            cur.eat(',')?;
            let var = cur.ident()?;
            cur.eat(',')?;
            let n = cur.prec()?;
            cur.eat(')')?;
            if head == "laurent" {
                Ok(FieldExpr::Laurent(Box::new(base), var, n))
            } else {
                Ok(FieldExpr::Puiseux(Box::new(base), var, n))
            }
        }
        "lazy_as" => {
            cur.eat('(')?;
            let base = parse_fexpr(cur)?;
            cur.eat(',')?;
            let p = cur.number()?;
            cur.eat(')')?;
            Ok(FieldExpr::LazyAs(Box::new(base), p))
        }
        "ext" => {
            cur.eat('(')?;
            let base = parse_fexpr(cur)?;
            cur.eat(',')?;
            let var = cur.ident()?;
            cur.eat(',')?;
            let m = cur.until_close()?;
            cur.eat(')')?;
            Ok(FieldExpr::Ext(Box::new(base), var, m))
        }
        other => Err(cur.err(format!("unknown field constructor {:?}", other))),
    }
}

fn parse_vexpr(cur: &mut Cursor) -> Result<VExpr, SpecParseError> {
    cur.skip_ws();
    let head = cur.ident()?;
    match head.as_str() {
        "trivial" => Ok(VExpr::Trivial),
        "stack" => {
            cur.eat('(')?;
            let mut steps = Vec::new();
            loop {
                let tok = cur.ident()?;
                steps.push(tok);
                cur.skip_ws();
                if cur.peek() == Some(',') {
                    cur.eat(',')?;
                } else {
                    break;
                }
            }
            cur.eat(')')?;
            Ok(VExpr::Stack(steps))
        }
        single => Ok(VExpr::Stack(vec![single.to_string()])),
    }
}

/// Parse a bare valuation expression (used for directive arguments).
pub fn parse_vexpr_str(text: &str) -> VlabResult<VExpr> {
    let mut cur = Cursor::new(text, 0, 1);
    let v = parse_vexpr(&mut cur).map_err(|e| VlabError::Domain(format!("{}", e)))?;
    cur.expect_end()
        .map_err(|e| VlabError::Domain(format!("{}", e)))?;
    Ok(v)
}

// ---------------------------------------------------------------------------
// Realization: document -> Tower and Valuation
// ---------------------------------------------------------------------------

pub fn realize_field(fe: &FieldExpr) -> VlabResult<Tower> {
    match fe {
        FieldExpr::Gf(p, k) => Tower::finite_field(*p, *k),
        FieldExpr::Rationals => Ok(Tower::rationals()),
        FieldExpr::RatFunc(b, v) => {
            let base = realize_field(b)?;
            Tower::rat_func(&base, v)
        }
        FieldExpr::Laurent(b, v, n) => {
            let base = realize_field(b)?;
            Tower::laurent(&base, v, *n)
        }
        FieldExpr::Puiseux(b, v, n) => {
            let base = realize_field(b)?;
            Tower::puiseux(&base, v, *n)
        }
        FieldExpr::Padic(p, n) => Tower::padic(*p, *n),
        FieldExpr::LazyAs(b, p) => {
            let base = realize_field(b)?;
            Tower::as_closure(&base, *p)
        }
        FieldExpr::Ext(b, v, mtext) => {
            let base = realize_field(b)?;
            let m = poly_from_text(&base, mtext)?;
            match base.adjoin_root(&m, v)? {
                Adjoined::Extended { field, .. } => Ok(field),
                Adjoined::Degree1 { field, .. } => Ok(field),
                Adjoined::Reducible { .. } => Err(VlabError::Domain(format!(
                    "extension modulus {:?} is reducible",
                    mtext
                ))),
            }
        }
    }
}

/// Parse a polynomial in the indeterminate `X` with coefficient expressions
/// over the base field.
pub fn poly_from_text(base: &Tower, text: &str) -> VlabResult<Vec<Value>> {
    let expr = Expr::parse(text)?;
    poly_from_expr(base, &expr)
}

fn poly_from_expr(base: &Tower, e: &Expr) -> VlabResult<Vec<Value>> {
    match e {
        Expr::Int(n) => Ok(poly::pconst(base, base.from_i64(*n))),
        Expr::Var(name) if name == "X" => Ok(vec![base.zero(), base.one()]),
        Expr::Var(name) => {
            let v = base.generator(name).ok_or_else(|| {
                VlabError::Domain(format!("unknown generator {:?} in {}", name, base))
            })?;
            Ok(poly::pconst(base, v))
        }
        Expr::Neg(a) => {
            let pa = poly_from_expr(base, a)?;
            poly::pneg(base, &pa)
        }
        Expr::Add(a, b) => {
            let (pa, pb) = (poly_from_expr(base, a)?, poly_from_expr(base, b)?);
            poly::padd(base, &pa, &pb)
        }
        Expr::Sub(a, b) => {
            let (pa, pb) = (poly_from_expr(base, a)?, poly_from_expr(base, b)?);
            poly::psub(base, &pa, &pb)
        }
        Expr::Mul(a, b) => {
            let (pa, pb) = (poly_from_expr(base, a)?, poly_from_expr(base, b)?);
            poly::pmul(base, &pa, &pb)
        }
        Expr::Div(a, b) => {
            let pa = poly_from_expr(base, a)?;
            let pb = poly_from_expr(base, b)?;
            if poly::pdeg(&pb) == Some(0) {
                let inv = base.inv(&pb[0])?;
                poly::pscale(base, &pa, &inv)
            } else {
                Err(VlabError::Domain(
                    "polynomial division by a non-constant is not allowed in moduli".into(),
                ))
            }
        }
        Expr::Pow(a, k) => {
            let pa = poly_from_expr(base, a)?;
            if *k < 0 {
                return Err(VlabError::Domain(
                    "negative powers are not allowed in moduli".into(),
                ));
            }
            let mut acc = vec![base.one()];
            for _ in 0..*k {
                acc = poly::pmul(base, &acc, &pa)?;
            }
            Ok(acc)
        }
    }
}

/// Interpret stack step tokens against the tower layers, outermost first.
pub fn realize_valuation(k: &Tower, ve: &VExpr) -> VlabResult<Valuation> {
    match ve {
        VExpr::Trivial => Ok(Valuation::trivial(k)),
        VExpr::Stack(tokens) => {
            let mut steps = Vec::new();
            let mut cur = k.clone();
            for tok in tokens {
                let (step, next) = step_for_token(&cur, tok)?;
                steps.push(step);
                cur = next;
            }
            Valuation::structural(k, steps)
        }
    }
}

fn step_for_token(layer: &Tower, tok: &str) -> VlabResult<(Step, Tower)> {
    match layer.layer_view() {
        LayerView::Series { base, var, .. } => {
            if tok == var {
                Ok((Step::SeriesAdic, base.clone()))
            } else {
                Err(VlabError::Domain(format!(
                    "step {:?} does not match the series layer in {}",
                    tok, layer
                )))
            }
        }
        LayerView::PAdic { p, .. } => {
            if tok.parse::<u64>() == Ok(p) {
                Ok((Step::PAdicStep, Tower::finite_field(p, 1)?))
            } else {
                Err(VlabError::Domain(format!(
                    "step {:?} does not match the {}-adic layer",
                    tok, p
                )))
            }
        }
        LayerView::Rationals => {
            let p: u64 = tok.parse().map_err(|_| {
                VlabError::Domain(format!("step {:?} on the rationals must be a prime", tok))
            })?;
            Ok((Step::PrimeOnQ(p), Tower::finite_field(p, 1)?))
        }
        LayerView::RatFunc { base, var } => {
            if tok == var {
                let pi = vec![base.zero(), base.one()];
                Ok((Step::PolyAdic(pi), base.clone()))
            } else {
                Err(VlabError::Domain(format!(
                    "step {:?} does not match the rational function layer in {}",
                    tok, layer
                )))
            }
        }
        LayerView::Ext {
            var,
            degree,
            pure_binomial,
            ..
        } => {
            if tok != "prolong" && tok != var {
                return Err(VlabError::Domain(format!(
                    "step {:?} does not match the extension layer in {}",
                    tok, layer
                )));
            }
            let kind = if pure_binomial {
                ExtProlongKind::Eisenstein { e: degree }
            } else {
                ExtProlongKind::Unramified
            };
            // a prolongation is terminal in our stacks; the residue field is
            // recomputed by the valuation constructor
            let probe = Valuation::structural(layer, vec![Step::ExtProlong(kind.clone())])?;
            let next = probe.residue_field().clone();
            Ok((Step::ExtProlong(kind), next))
        }
        _ => Err(VlabError::Domain(format!(
            "layer {} has no structural valuation step",
            layer
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_roundtrip() {
        let text = "\
# a comment
field = laurent(lazy_as(ratfunc(gf(2), u), 2), s, prec=8)
valuation = stack(s)
seed = 42
check ultrametric n=500
check scanlon t=u n=100
";
        let doc = parse_spec(text).unwrap();
        assert_eq!(doc.seed, 42);
        assert_eq!(doc.checks.len(), 2);
        let printed = doc.print();
        let doc2 = parse_spec(&printed).unwrap();
        assert_eq!(doc, doc2);
        let k = realize_field(&doc.field).unwrap();
        assert_eq!(k.name(), "ASclosure(F_2(u), 2)((s))");
        let v = realize_valuation(&k, doc.valuation.as_ref().unwrap()).unwrap();
        assert_eq!(v.value_group().rank(), 1);
    }

    #[test]
    fn located_errors() {
        let bad = "field = laurent(gf(2)\nseed = 1\n";
        let err = parse_spec(bad).unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.col > 8, "column should point into the expression");
        let msg = format!("{}", err);
        assert!(msg.contains("line 1"));

        assert!(parse_spec("seed = 1\n").is_err(), "field is mandatory");
        assert!(
            parse_spec("field = rationals\n").is_err(),
            "seed is mandatory"
        );
        let unknown = parse_spec("field = blorb(2)\nseed = 1\n").unwrap_err();
        assert!(format!("{}", unknown).contains("unknown field constructor"));
    }

    #[test]
    fn group_declarations_via_layers() {
        // lex(Z, Q) arises from a Laurent-over-Puiseux tower
        let doc = parse_spec(
            "field = laurent(puiseux(gf(2), r, prec=4), s, prec=4)\nvaluation = stack(s, r)\nseed = 7\n",
        )
        .unwrap();
        let k = realize_field(&doc.field).unwrap();
        let v = realize_valuation(&k, doc.valuation.as_ref().unwrap()).unwrap();
        assert_eq!(format!("{}", v.value_group()), "Z x Q");
    }

    #[test]
    fn ext_realization() {
        let doc = parse_spec("field = ext(padic(3, prec=6), r, X^2 - 3)\nvaluation = stack(prolong)\nseed = 3\n").unwrap();
        let k = realize_field(&doc.field).unwrap();
        let v = realize_valuation(&k, doc.valuation.as_ref().unwrap()).unwrap();
        assert_eq!(format!("{}", v.value_group()), "(1/2)Z");
    }
}
