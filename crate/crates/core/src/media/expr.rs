//! Scalar-field expressions over the position variables `x1, x2, x3`.
//!
//! Grammar (whitespace is insignificant):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := '-' factor | base ('^' '-'? number)?
//! base   := number | var | func '(' expr ')' | '(' expr ')'
//! var    := 'x1' | 'x2' | 'x3'
//! func   := 'sqrt' | 'exp' | 'log' | 'sin' | 'cos'
//! number := digits ('.' digits?)? (('e' | 'E') ('+' | '-')? digits)?
//! ```
//!
//! Integer exponents are evaluated by repeated multiplication, so `x1^2` is
//! defined for negative `x1`; other exponents require a positive base.

use std::fmt;

use crate::error::{Error, Result};
use crate::jets::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    const ALL: [Func; 5] = [Func::Sqrt, Func::Exp, Func::Log, Func::Sin, Func::Cos];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    /// Position variable, 0-based.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval<S: Scalar>(&self, x: &[S; 3]) -> Result<S> {
        Ok(match self {
            Expr::Num(v) => S::from_f64(*v),
            Expr::Var(i) => x[*i].clone(),
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => a.eval(x)?.try_div(&b.eval(x)?)?,
            Expr::Pow(a, e) => {
                let base = a.eval(x)?;
                if e.fract() == 0.0 && e.abs() <= i32::MAX as f64 {
                    base.try_powi(*e as i32)?
                } else {
                    base.try_powf(*e)?
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(x)?;
                match f {
                    Func::Sqrt => v.try_sqrt()?,
                    Func::Exp => v.exp(),
                    Func::Log => v.try_ln()?,
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                }
            }
        })
    }

    /// The value if the expression does not depend on position.
    pub fn as_constant(&self) -> Option<f64> {
        if self.depends_on_position() {
            None
        } else {
            self.eval::<f64>(&[0.0; 3]).ok()
        }
    }

    pub fn depends_on_position(&self) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(_) => true,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on_position(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on_position() || b.depends_on_position()
            }
        }
    }
}

/// Fully parenthesized text that parses back to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 => write!(f, "(-{})", -v),
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, e) => write!(f, "({a}^{e})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

pub fn parse_field(text: &str) -> Result<Expr> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(&["operator", "end of input"]));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn error(&self, expected: &[&str]) -> Error {
        Error::Parse {
            offset: self.pos,
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let negative = self.eat(b'-');
            self.skip_ws();
            let e = self
                .number()
                .ok_or_else(|| self.error(&["number"]))?;
            return Ok(Expr::Pow(Box::new(base), if negative { -e } else { e }));
        }
        Ok(base)
    }

    fn base(&mut self) -> Result<Expr> {
        const EXPECTED: [&str; 4] = ["number", "variable", "function", "'('"];
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error(&["')'"]));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                self.number().map(Expr::Num).ok_or_else(|| self.error(&["number"]))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
                match word {
                    "x1" => return Ok(Expr::Var(0)),
                    "x2" => return Ok(Expr::Var(1)),
                    "x3" => return Ok(Expr::Var(2)),
                    _ => {}
                }
                let Some(func) = Func::ALL.iter().copied().find(|f| f.name() == word) else {
                    self.pos = start;
                    return Err(self.error(&EXPECTED));
                };
                if !self.eat(b'(') {
                    return Err(self.error(&["'('"]));
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(self.error(&["')'"]));
                }
                Ok(Expr::Call(func, Box::new(arg)))
            }
            _ => Err(self.error(&EXPECTED)),
        }
    }

    /// Unsigned decimal literal at the cursor.
    fn number(&mut self) -> Option<f64> {
        let s = self.src;
        let start = self.pos;
        let mut i = start;
        let digits = |i: &mut usize| {
            let b = *i;
            while *i < s.len() && s[*i].is_ascii_digit() {
                *i += 1;
            }
            *i > b
        };
        let int = digits(&mut i);
        let mut frac = false;
        if i < s.len() && s[i] == b'.' {
            i += 1;
            frac = digits(&mut i);
        }
        if !int && !frac {
            return None;
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if digits(&mut j) {
                i = j;
            }
        }
        let v = std::str::from_utf8(&s[start..i]).ok()?.parse().ok()?;
        self.pos = i;
        Some(v)
    }
}
