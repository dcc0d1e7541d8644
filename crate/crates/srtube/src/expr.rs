//! Scalar field expressions over chart coordinates x, y, z, w.
//!
//! The grammar covers real constants, the four coordinate variables, the
//! binary operators `+ - * /`, powers `base ^ exponent` with a constant real
//! exponent, and the unary functions `sqrt`, `sin`, `cos`, `exp`, `log`
//! (natural). Parse errors carry byte spans into the source string; the
//! printer emits a fully parenthesized form that parses back to the same tree.

use crate::jet::{Scalar, DIM};
use crate::{Error, Result};

pub const VAR_NAMES: [&str; DIM] = ["x", "y", "z", "w"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Power with a constant real exponent.
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let tokens = lex(src)?;
        let mut p = Parser {
            src,
            tokens,
            pos: 0,
        };
        let e = p.expression()?;
        if p.pos < p.tokens.len() {
            let (start, end) = p.tokens[p.pos].span;
            return Err(Error::Parse {
                msg: format!("unexpected trailing input `{}`", &src[start..end]),
                span_start: start,
                span_end: end,
            });
        }
        Ok(e)
    }

    pub fn num(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn var(i: usize) -> Expr {
        assert!(i < DIM);
        Expr::Var(i)
    }

    /// Highest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (None, m) | (m, None) => m,
                    (Some(x), Some(y)) => Some(x.max(y)),
                }
            }
        }
    }

    /// Evaluate at a point, generically over plain values and jets.
    pub fn eval<S: Scalar>(&self, x: &[f64; DIM]) -> Result<S> {
        Ok(match self {
            Expr::Const(c) => S::constant(*c),
            Expr::Var(i) => S::variable(*i, x[*i]),
            Expr::Neg(a) => -a.eval::<S>(x)?,
            Expr::Add(a, b) => a.eval::<S>(x)? + b.eval::<S>(x)?,
            Expr::Sub(a, b) => a.eval::<S>(x)? - b.eval::<S>(x)?,
            Expr::Mul(a, b) => a.eval::<S>(x)? * b.eval::<S>(x)?,
            Expr::Div(a, b) => {
                let den = b.eval::<S>(x)?;
                if den.val() == 0.0 {
                    return Err(Error::domain(format!(
                        "division by zero evaluating `{b}`"
                    )));
                }
                a.eval::<S>(x)? / den
            }
            Expr::Pow(a, p) => {
                let base = a.eval::<S>(x)?;
                let pi = *p as i32;
                if f64::from(pi) == *p && p.abs() <= 512.0 {
                    if pi < 0 && base.val() == 0.0 {
                        return Err(Error::domain(format!(
                            "zero raised to negative power evaluating `{self}`"
                        )));
                    }
                    base.powi(pi)
                } else {
                    if base.val() <= 0.0 {
                        return Err(Error::domain(format!(
                            "non-integer power of non-positive base {:.6e} evaluating `{self}`",
                            base.val()
                        )));
                    }
                    base.powf(*p)
                }
            }
            Expr::Call(f, a) => {
                let arg = a.eval::<S>(x)?;
                match f {
                    Func::Sqrt => {
                        let bad = if S::ORDER == 0 {
                            arg.val() < 0.0
                        } else {
                            arg.val() <= 0.0
                        };
                        if bad {
                            return Err(Error::domain(format!(
                                "sqrt of non-positive value {:.6e} evaluating `{self}`",
                                arg.val()
                            )));
                        }
                        arg.sqrt()
                    }
                    Func::Sin => arg.sin(),
                    Func::Cos => arg.cos(),
                    Func::Exp => arg.exp(),
                    Func::Log => {
                        if arg.val() <= 0.0 {
                            return Err(Error::domain(format!(
                                "log of non-positive value {:.6e} evaluating `{self}`",
                                arg.val()
                            )));
                        }
                        arg.ln()
                    }
                }
            }
        })
    }

    /// Fold a constant subtree to its value.
    fn as_const(&self) -> Option<f64> {
        Some(match self {
            Expr::Const(c) => *c,
            Expr::Neg(a) => -a.as_const()?,
            Expr::Add(a, b) => a.as_const()? + b.as_const()?,
            Expr::Sub(a, b) => a.as_const()? - b.as_const()?,
            Expr::Mul(a, b) => a.as_const()? * b.as_const()?,
            Expr::Div(a, b) => a.as_const()? / b.as_const()?,
            Expr::Pow(a, p) => a.as_const()?.powf(*p),
            _ => return None,
        })
    }
}

impl std::fmt::Display for Expr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "{}", VAR_NAMES[*i]),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, p) => {
                if *p < 0.0 {
                    write!(f, "({a} ^ (-{}))", -p)
                } else {
                    write!(f, "({a} ^ {p})")
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Clone, Debug)]
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
}

#[derive(Clone, Debug)]
struct SpannedTok {
    tok: Tok,
    span: (usize, usize),
}

fn lex(src: &str) -> Result<Vec<SpannedTok>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
            }
            '+' | '-' | '*' | '/' | '^' | '(' | ')' => {
                let tok = match c {
                    '+' => Tok::Plus,
                    '-' => Tok::Minus,
                    '*' => Tok::Star,
                    '/' => Tok::Slash,
                    '^' => Tok::Caret,
                    '(' => Tok::LParen,
                    _ => Tok::RParen,
                };
                out.push(SpannedTok {
                    tok,
                    span: (start, start + 1),
                });
                i += 1;
            }
            '0'..='9' | '.' => {
                let mut j = i;
                while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                    let mut k = j + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        j = k;
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                }
                let text = &src[i..j];
                let v: f64 = text.parse().map_err(|_| Error::Parse {
                    msg: format!("malformed number `{text}`"),
                    span_start: i,
                    span_end: j,
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        msg: format!("number `{text}` overflows f64"),
                        span_start: i,
                        span_end: j,
                    });
                }
                out.push(SpannedTok {
                    tok: Tok::Num(v),
                    span: (i, j),
                });
                i = j;
            }
            'a'..='z' | 'A'..='Z' | '_' => {
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                out.push(SpannedTok {
                    tok: Tok::Ident(src[i..j].to_string()),
                    span: (i, j),
                });
                i = j;
            }
            _ => {
                return Err(Error::Parse {
                    msg: format!("unexpected character `{c}`"),
                    span_start: start,
                    span_end: start + c.len_utf8(),
                });
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    src: &'a str,
    tokens: Vec<SpannedTok>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn err_here(&self, msg: impl Into<String>) -> Error {
        let (s, e) = self
            .tokens
            .get(self.pos)
            .map(|t| t.span)
            .unwrap_or((self.src.len(), self.src.len()));
        Error::Parse {
            msg: msg.into(),
            span_start: s,
            span_end: e,
        }
    }

    fn expression(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            let exp_start = self
                .tokens
                .get(self.pos)
                .map(|t| t.span.0)
                .unwrap_or(self.src.len());
            let exponent = self.unary()?;
            let exp_end = self
                .tokens
                .get(self.pos.saturating_sub(1))
                .map(|t| t.span.1)
                .unwrap_or(self.src.len());
            let p = exponent.as_const().ok_or(Error::Parse {
                msg: "exponent must be a real constant".into(),
                span_start: exp_start,
                span_end: exp_end,
            })?;
            return Ok(Expr::Pow(Box::new(base), p));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Expr::Const(v))
            }
            Some(Tok::Ident(name)) => {
                let ident_err = self.err_here(format!(
                    "unknown identifier `{name}` (variables: x y z w; functions: sqrt sin cos exp log)"
                ));
                self.pos += 1;
                if let Some(i) = VAR_NAMES.iter().position(|&v| v == name) {
                    return Ok(Expr::Var(i));
                }
                if let Some(f) = Func::from_name(&name) {
                    match self.peek() {
                        Some(Tok::LParen) => {
                            self.pos += 1;
                            let arg = self.expression()?;
                            match self.peek() {
                                Some(Tok::RParen) => {
                                    self.pos += 1;
                                    return Ok(Expr::Call(f, Box::new(arg)));
                                }
                                _ => return Err(self.err_here("expected `)`")),
                            }
                        }
                        _ => {
                            return Err(self.err_here(format!(
                                "function `{name}` requires parentheses"
                            )))
                        }
                    }
                }
                Err(ident_err)
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expression()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(e)
                    }
                    _ => Err(self.err_here("expected `)`")),
                }
            }
            _ => Err(self.err_here("expected a number, variable, function, or `(`")),
        }
    }
}
