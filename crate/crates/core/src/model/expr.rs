//! Scalar drift expressions in the variables `x` and `y`.
//!
//! Grammar: `expr := term (('+'|'-') term)*`, `term := unary (('*'|'·') unary)*`,
//! `unary := '-' unary | atom`, `atom := number | x | y | pi | f '(' expr ')' | '(' expr ')'`
//! with `f ∈ {sin, cos, sqrt, abs}`.

use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    X,
    Y,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let tokens = tokenize(src)?;
        let mut p = Parser { tokens, pos: 0 };
        let e = p.expr()?;
        if p.pos != p.tokens.len() {
            return Err(Error::Config(format!(
                "unexpected trailing input in drift expression '{src}'"
            )));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::X => x,
            Expr::Y => y,
            Expr::Neg(a) => -a.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Call(f, a) => {
                let v = a.eval(x, y);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                    Func::Abs => v.abs(),
                }
            }
        }
    }

    /// True when the expression never reads `y`.
    pub fn ignores_y(&self) -> bool {
        !self.reads(&Expr::Y)
    }

    /// True when the expression never reads `x`.
    pub fn ignores_x(&self) -> bool {
        !self.reads(&Expr::X)
    }

    fn reads(&self, var: &Expr) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::X | Expr::Y => self == var,
            Expr::Neg(a) | Expr::Call(_, a) => a.reads(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.reads(var) || b.reads(var),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1
            }
            '*' | '·' => {
                out.push(Tok::Star);
                i += 1
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || chars[i] == 'e'
                        || chars[i] == 'E'
                        || ((chars[i] == '-' || chars[i] == '+')
                            && matches!(chars[i - 1], 'e' | 'E')))
                {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                let v = s
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number '{s}' in drift expression")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push(Tok::Ident(chars[start..i].iter().collect()));
            }
            other => {
                return Err(Error::Config(format!(
                    "unexpected character '{other}' in drift expression"
                )))
            }
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(ref got) if *got == t => Ok(()),
            got => Err(Error::Config(format!(
                "expected {t:?} in drift expression, found {got:?}"
            ))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
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
        while let Some(Tok::Star) = self.peek() {
            self.pos += 1;
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if let Some(Tok::Minus) = self.peek() {
            self.pos += 1;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::X),
                "y" => Ok(Expr::Y),
                "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                "sin" | "cos" | "sqrt" | "abs" => {
                    let f = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "sqrt" => Func::Sqrt,
                        _ => Func::Abs,
                    };
                    self.expect(Tok::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::Call(f, Box::new(arg)))
                }
                other => Err(Error::Config(format!(
                    "unknown identifier '{other}' in drift expression"
                ))),
            },
            got => Err(Error::Config(format!(
                "unexpected token {got:?} in drift expression"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_heat_drifts() {
        let b = Expr::parse("sin(sqrt(abs(x)) + sqrt(abs(y)))").unwrap();
        let f = Expr::parse("0.5 * cos(sqrt(abs(x)) + abs(y))").unwrap();
        let (x, y) = (0.7, -1.3f64);
        assert_eq!(b.eval(x, y), (x.abs().sqrt() + y.abs().sqrt()).sin());
        assert_eq!(f.eval(x, y), 0.5 * (x.abs().sqrt() + y.abs()).cos());
        assert!(!b.ignores_y());
        assert!(Expr::parse("sin(x)").unwrap().ignores_y());
        assert!(Expr::parse("cos(y) · 2").unwrap().ignores_x());
    }

    #[test]
    fn precedence_and_negation() {
        let e = Expr::parse("1 + 2 * -x - 3").unwrap();
        assert_eq!(e.eval(2.0, 0.0), 1.0 - 4.0 - 3.0);
        assert_eq!(Expr::parse("2.5e-1*pi").unwrap().eval(0.0, 0.0), 0.25 * std::f64::consts::PI);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("sin(x").is_err());
        assert!(Expr::parse("exp(x)").is_err());
        assert!(Expr::parse("x / y").is_err());
        assert!(Expr::parse("x y").is_err());
    }
}
