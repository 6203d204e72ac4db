//! Arithmetic expressions over chart coordinates.
//!
//! Frame-field components are written in a small language: real literals,
//! the variables `x1..xn` (with `x`, `y`, `z` as aliases for the first three),
//! unary minus, `+ - * /`, the functions `sin`, `cos`, `exp`, `sqrt` and
//! integer powers `e^k`. Unary minus binds tighter than `^`, which binds
//! tighter than `* /`, which bind tighter than `+ -`; so `-x^2` is `(-x)^2`.
//!
//! Expressions are immutable once built and can be differentiated exactly
//! with [`Expr::diff`]. The derivative is not simplified beyond dropping
//! structural zeros and ones.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Whitelisted elementary functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }
}

/// Expression tree. Variables are 0-based coordinate indices.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

/// Parses `src` into an expression tree.
pub fn parse_expr(src: &str) -> Result<Expr> {
    Parser::new(src).parse()
}

/// Evaluates `e` with `bindings[i]` bound to coordinate `x{i+1}`.
pub fn eval_expr(e: &Expr, bindings: &[f64]) -> Result<f64> {
    e.eval(bindings)
}

/// Exact symbolic derivative of `e` with respect to coordinate `var` (0-based).
pub fn diff_expr(e: &Expr, var: usize) -> Expr {
    e.diff(var)
}

fn num(v: f64) -> Expr {
    Expr::Num(v)
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(c) if *c == v)
}

// Builders that drop structural zeros and ones produced by differentiation.

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        b
    } else if is_num(&b, 0.0) {
        a
    } else {
        Expr::Add(Box::new(a), Box::new(b))
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 0.0) {
        a
    } else if is_num(&a, 0.0) {
        neg(b)
    } else {
        Expr::Sub(Box::new(a), Box::new(b))
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        num(0.0)
    } else if is_num(&a, 1.0) {
        b
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::Mul(Box::new(a), Box::new(b))
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        num(0.0)
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::Div(Box::new(a), Box::new(b))
    }
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(0.0) => num(0.0),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn pow(a: Expr, k: i32) -> Expr {
    match k {
        0 => num(1.0),
        1 => a,
        _ => Expr::Pow(Box::new(a), k),
    }
}

/// Integer literal as a tree with a non-negative literal, so printed
/// derivatives parse back to the same structure.
fn int_lit(k: i32) -> Expr {
    if k < 0 {
        neg(num(-(k as f64)))
    } else {
        num(k as f64)
    }
}

impl Expr {
    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    pub fn eval(&self, vars: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Num(c) => *c,
            Expr::Var(i) => *vars.get(*i).ok_or(Error::UnboundVariable { index: *i })?,
            Expr::Neg(a) => -a.eval(vars)?,
            Expr::Add(a, b) => a.eval(vars)? + b.eval(vars)?,
            Expr::Sub(a, b) => a.eval(vars)? - b.eval(vars)?,
            Expr::Mul(a, b) => a.eval(vars)? * b.eval(vars)?,
            Expr::Div(a, b) => {
                let num = a.eval(vars)?;
                let den = b.eval(vars)?;
                if den == 0.0 {
                    return Err(Error::Domain("division by zero".into()));
                }
                num / den
            }
            Expr::Pow(a, k) => {
                let base = a.eval(vars)?;
                if base == 0.0 && *k < 0 {
                    return Err(Error::Domain("zero raised to a negative power".into()));
                }
                base.powi(*k)
            }
            Expr::Call(f, a) => {
                let v = a.eval(vars)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(Error::Domain("square root of a negative number".into()));
                        }
                        v.sqrt()
                    }
                }
            }
        })
    }

    pub fn diff(&self, var: usize) -> Expr {
        match self {
            Expr::Num(_) => num(0.0),
            Expr::Var(i) => num(if *i == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.diff(var)),
            Expr::Add(a, b) => add(a.diff(var), b.diff(var)),
            Expr::Sub(a, b) => sub(a.diff(var), b.diff(var)),
            Expr::Mul(a, b) => add(
                mul(a.diff(var), (**b).clone()),
                mul((**a).clone(), b.diff(var)),
            ),
            Expr::Div(a, b) => {
                let da = a.diff(var);
                let db = b.diff(var);
                if is_num(&db, 0.0) {
                    div(da, (**b).clone())
                } else {
                    div(
                        sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                        pow((**b).clone(), 2),
                    )
                }
            }
            Expr::Pow(a, k) => {
                if *k == 0 {
                    return num(0.0);
                }
                mul(mul(int_lit(*k), pow((**a).clone(), k - 1)), a.diff(var))
            }
            Expr::Call(f, a) => {
                let da = a.diff(var);
                if is_num(&da, 0.0) {
                    return num(0.0);
                }
                let inner = (**a).clone();
                match f {
                    Func::Sin => mul(Expr::Call(Func::Cos, Box::new(inner)), da),
                    Func::Cos => neg(mul(Expr::Call(Func::Sin, Box::new(inner)), da)),
                    Func::Exp => mul(Expr::Call(Func::Exp, Box::new(inner)), da),
                    Func::Sqrt => div(da, mul(num(2.0), Expr::Call(Func::Sqrt, Box::new(inner)))),
                }
            }
        }
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.max_var(), b.max_var()) {
                    (Some(l), Some(r)) => Some(l.max(r)),
                    (l, r) => l.or(r),
                }
            }
        }
    }

    /// True when the tree is the literal zero.
    pub fn is_zero(&self) -> bool {
        is_num(self, 0.0)
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_expr(s)
    }
}

/// Fully parenthesized form; parsing the output yields a structurally equal
/// tree whenever all literals are non-negative (which holds for every parsed
/// or differentiated tree).
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(c) if *c < 0.0 => write!(f, "(-{:?})", -c),
            Expr::Num(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-({a}))"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => write!(f, "({a})^{k}"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    peeked: Option<(usize, Token)>,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { src, pos: 0, peeked: None }
    }

    fn parse(mut self) -> Result<Expr> {
        if self.src.trim().is_empty() {
            return Err(Error::Syntax { offset: 0, message: "empty expression".into() });
        }
        let e = self.expr()?;
        let (offset, tok) = self.next()?;
        if tok != Token::End {
            return Err(Error::Syntax { offset, message: format!("unexpected {tok:?}") });
        }
        Ok(e)
    }

    fn syntax(offset: usize, message: impl Into<String>) -> Error {
        Error::Syntax { offset, message: message.into() }
    }

    fn lex(&mut self) -> Result<(usize, Token)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(start) else {
            return Ok((start, Token::End));
        };
        let single = match c {
            b'+' => Some(Token::Plus),
            b'-' => Some(Token::Minus),
            b'*' => Some(Token::Star),
            b'/' => Some(Token::Slash),
            b'^' => Some(Token::Caret),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            self.pos += 1;
            return Ok((start, tok));
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut exp_end = end + 1;
                if exp_end < bytes.len() && (bytes[exp_end] == b'+' || bytes[exp_end] == b'-') {
                    exp_end += 1;
                }
                let digits_start = exp_end;
                while exp_end < bytes.len() && bytes[exp_end].is_ascii_digit() {
                    exp_end += 1;
                }
                if exp_end > digits_start {
                    end = exp_end;
                }
            }
            let text = &self.src[start..end];
            let value: f64 = text
                .parse()
                .map_err(|_| Self::syntax(start, format!("malformed number `{text}`")))?;
            self.pos = end;
            return Ok((start, Token::Num(value)));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((start, Token::Ident(self.src[start..end].to_string())));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(Self::syntax(start, format!("unexpected character `{ch}`")))
    }

    fn peek(&mut self) -> Result<&Token> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lex()?);
        }
        Ok(&self.peeked.as_ref().expect("peeked").1)
    }

    fn next(&mut self) -> Result<(usize, Token)> {
        match self.peeked.take() {
            Some(t) => Ok(t),
            None => self.lex(),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek()? {
                Token::Plus => {
                    self.next()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Token::Minus => {
                    self.next()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.power()?;
        loop {
            match self.peek()? {
                Token::Star => {
                    self.next()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.power()?));
                }
                Token::Slash => {
                    self.next()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.power()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let mut base = self.unary()?;
        while *self.peek()? == Token::Caret {
            self.next()?;
            let (offset, tok) = self.next()?;
            let (sign, (offset, tok)) = match tok {
                Token::Minus => (-1.0, self.next()?),
                Token::Plus => (1.0, self.next()?),
                other => (1.0, (offset, other)),
            };
            let k = match tok {
                Token::Num(v) if v.fract() == 0.0 && v <= i32::MAX as f64 => (sign * v) as i32,
                _ => return Err(Self::syntax(offset, "expected an integer exponent")),
            };
            base = Expr::Pow(Box::new(base), k);
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek()? == Token::Minus {
            self.next()?;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        let (offset, tok) = self.next()?;
        match tok {
            Token::Num(v) => Ok(Expr::Num(v)),
            Token::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Token::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    let (lp_offset, lp) = self.next()?;
                    if lp != Token::LParen {
                        return Err(Self::syntax(lp_offset, format!("expected `(` after `{name}`")));
                    }
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                variable_index(&name)
                    .map(Expr::Var)
                    .ok_or(Error::UnknownIdentifier { name, offset })
            }
            Token::End => Err(Self::syntax(offset, "unexpected end of input")),
            other => Err(Self::syntax(offset, format!("unexpected {other:?}"))),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let (offset, tok) = self.next()?;
        if tok == Token::RParen {
            Ok(())
        } else {
            Err(Self::syntax(offset, "expected `)`"))
        }
    }
}

/// Maps `x`, `y`, `z` and `x1`, `x2`, ... to 0-based indices.
fn variable_index(name: &str) -> Option<usize> {
    match name {
        "x" => Some(0),
        "y" => Some(1),
        "z" => Some(2),
        _ => {
            let digits = name.strip_prefix('x')?;
            if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) || digits.starts_with('0') {
                return None;
            }
            digits.parse::<usize>().ok().map(|i| i - 1)
        }
    }
}
