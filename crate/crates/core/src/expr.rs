//! Coordinate expressions for metric components: `a_ij(x)` and `b_i(x)`.
//!
//! Grammar (standard precedence, `^` binds tightest and associates right):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'x' index | func '(' expr ')' | '(' expr ')'
//! func   := sin | cos | exp | sqrt | ln
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::jets::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
    Ln,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Ln => "ln",
        }
    }

    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "sqrt" => Func::Sqrt,
            "ln" => Func::Ln,
            _ => return None,
        })
    }
}

/// Expression tree. Variables are zero-based (`Var(0)` prints as `x1`).
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, offset: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' {
                Expr::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if c == b'*' {
                Expr::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Expr::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        let start = match self.peek() {
            None => return self.err(self.pos, "unexpected end of input"),
            Some(_) => self.pos,
        };
        let c = self.src[start];
        if c == b'(' {
            self.pos += 1;
            let e = self.expr()?;
            if self.peek() != Some(b')') {
                return self.err(self.pos, "expected ')'");
            }
            self.pos += 1;
            return Ok(e);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number(start);
        }
        if c.is_ascii_alphabetic() {
            let mut end = start;
            while end < self.src.len() && self.src[end].is_ascii_alphanumeric() {
                end += 1;
            }
            let word = std::str::from_utf8(&self.src[start..end]).unwrap();
            self.pos = end;
            if let Some(f) = Func::from_name(word) {
                if self.peek() != Some(b'(') {
                    return self.err(self.pos, format!("expected '(' after {word}"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return self.err(self.pos, "expected ')'");
                }
                self.pos += 1;
                return Ok(Expr::Call(f, Box::new(arg)));
            }
            if let Some(digits) = word.strip_prefix('x') {
                if let Ok(k) = digits.parse::<usize>() {
                    if k == 0 || k > self.dim {
                        return self.err(
                            start,
                            format!("variable {word} outside x1..x{}", self.dim),
                        );
                    }
                    return Ok(Expr::Var(k - 1));
                }
            }
            return self.err(start, format!("unknown identifier '{word}'"));
        }
        self.err(start, format!("unexpected character '{}'", c as char))
    }

    fn number(&mut self, start: usize) -> Result<Expr> {
        let mut end = start;
        let s = self.src;
        while end < s.len() && (s[end].is_ascii_digit() || s[end] == b'.') {
            end += 1;
        }
        if end < s.len() && (s[end] == b'e' || s[end] == b'E') {
            let mut k = end + 1;
            if k < s.len() && (s[k] == b'+' || s[k] == b'-') {
                k += 1;
            }
            if k < s.len() && s[k].is_ascii_digit() {
                while k < s.len() && s[k].is_ascii_digit() {
                    k += 1;
                }
                end = k;
            }
        }
        let text = std::str::from_utf8(&s[start..end]).unwrap();
        match text.parse::<f64>() {
            Ok(v) => {
                self.pos = end;
                Ok(Expr::Num(v))
            }
            Err(_) => self.err(start, format!("malformed number '{text}'")),
        }
    }
}

/// Parses `text` into an expression over `x1..x{dim}`.
pub fn parse(text: &str, dim: usize) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Parse {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        dim,
    };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err(p.pos, "unexpected trailing input");
    }
    Ok(e)
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    /// Largest variable index used, if any (zero-based).
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        self.max_var().is_none()
    }

    /// Evaluates over any [`Scalar`]: plain floats or jets.
    pub fn eval_with<T: Scalar>(&self, env: &[T]) -> Result<T> {
        match self {
            Expr::Num(v) => Ok(env[0].lift(*v)),
            Expr::Var(i) => Ok(env[*i].clone()),
            Expr::Neg(a) => Ok(a.eval_with(env)?.neg()),
            Expr::Add(a, b) => Ok(a.eval_with(env)?.add(&b.eval_with(env)?)),
            Expr::Sub(a, b) => Ok(a.eval_with(env)?.sub(&b.eval_with(env)?)),
            Expr::Mul(a, b) => Ok(a.eval_with(env)?.mul(&b.eval_with(env)?)),
            Expr::Div(a, b) => a.eval_with(env)?.try_div(&b.eval_with(env)?),
            Expr::Pow(a, b) => {
                let base = a.eval_with(env)?;
                if b.is_constant() {
                    let p = b.eval_with(&[0.0])?;
                    if p.fract() == 0.0 && p.abs() <= 64.0 {
                        return base.try_powi(p as i32);
                    }
                    return base.try_powf(p);
                }
                let e = b.eval_with(env)?;
                base.try_ln()?.mul(&e).try_exp()
            }
            Expr::Call(f, a) => {
                let v = a.eval_with(env)?;
                match f {
                    Func::Sin => v.try_sin(),
                    Func::Cos => v.try_cos(),
                    Func::Exp => v.try_exp(),
                    Func::Sqrt => v.try_sqrt(),
                    Func::Ln => v.try_ln(),
                }
            }
        }
    }
}

/// Evaluates `e` at the point `env = (x1, .., xn)`.
pub fn eval_expr(e: &Expr, env: &[f64]) -> Result<f64> {
    if env.is_empty() {
        // constants only
        if let Some(i) = e.max_var() {
            return Err(Error::Argument(format!("variable x{} has no value", i + 1)));
        }
        return e.eval_with(&[0.0]);
    }
    if let Some(i) = e.max_var() {
        if i >= env.len() {
            return Err(Error::Argument(format!("variable x{} has no value", i + 1)));
        }
    }
    e.eval_with(env)
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e, Expr::Num(x) if *x == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
        _ if is_num(&a, 0.0) => b,
        _ if is_num(&b, 0.0) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x - y),
        _ if is_num(&b, 0.0) => a,
        _ if is_num(&a, 0.0) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
        _ if is_num(&a, 0.0) || is_num(&b, 0.0) => Expr::Num(0.0),
        _ if is_num(&a, 1.0) => b,
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Num(x), Expr::Num(y)) if *y != 0.0 => Expr::Num(x / y),
        _ if is_num(&a, 0.0) => Expr::Num(0.0),
        _ if is_num(&b, 1.0) => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(x) => Expr::Num(-x),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn pow(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        _ if is_num(&b, 1.0) => a,
        _ if is_num(&b, 0.0) => Expr::Num(1.0),
        _ => Expr::Pow(Box::new(a), Box::new(b)),
    }
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

/// Symbolic ∂e/∂x^{var+1} (zero-based `var`), with constant folding and
/// 0/1 identities only.
pub fn diff_expr(e: &Expr, var: usize) -> Expr {
    match e {
        Expr::Num(_) => Expr::Num(0.0),
        Expr::Var(i) => Expr::Num(if *i == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(diff_expr(a, var)),
        Expr::Add(a, b) => add(diff_expr(a, var), diff_expr(b, var)),
        Expr::Sub(a, b) => sub(diff_expr(a, var), diff_expr(b, var)),
        Expr::Mul(a, b) => add(
            mul(diff_expr(a, var), (**b).clone()),
            mul((**a).clone(), diff_expr(b, var)),
        ),
        Expr::Div(a, b) => {
            let num = sub(
                mul(diff_expr(a, var), (**b).clone()),
                mul((**a).clone(), diff_expr(b, var)),
            );
            div(num, pow((**b).clone(), Expr::Num(2.0)))
        }
        Expr::Pow(a, b) => {
            if b.is_constant() {
                // c * a^(c-1) * a'
                let c = (**b).clone();
                let c_minus_1 = sub(c.clone(), Expr::Num(1.0));
                mul(mul(c, pow((**a).clone(), c_minus_1)), diff_expr(a, var))
            } else {
                // a^b * (b' ln a + b a'/a)
                let t1 = mul(diff_expr(b, var), call(Func::Ln, (**a).clone()));
                let t2 = div(mul((**b).clone(), diff_expr(a, var)), (**a).clone());
                mul(e.clone(), add(t1, t2))
            }
        }
        Expr::Call(f, a) => {
            let da = diff_expr(a, var);
            let outer = match f {
                Func::Sin => call(Func::Cos, (**a).clone()),
                Func::Cos => neg(call(Func::Sin, (**a).clone())),
                Func::Exp => e.clone(),
                Func::Sqrt => div(Expr::Num(0.5), e.clone()),
                Func::Ln => div(Expr::Num(1.0), (**a).clone()),
            };
            mul(outer, da)
        }
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(..) => 3,
        Expr::Pow(..) => 4,
        Expr::Num(v) if *v < 0.0 => 3,
        _ => 5,
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    if prec(e) < min {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_child(f, a, 4)
            }
            Expr::Add(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " + ")?;
                write_child(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_child(f, a, 1)?;
                write!(f, " - ")?;
                write_child(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "*")?;
                write_child(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_child(f, a, 2)?;
                write!(f, "/")?;
                write_child(f, b, 3)
            }
            Expr::Pow(a, b) => {
                write_child(f, a, 5)?;
                write!(f, "^")?;
                write_child(f, b, 4)
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let e = parse("x1^2 + sin(x2)", 2).unwrap();
        assert_eq!(e.max_var(), Some(1));
        assert_eq!(eval_expr(&e, &[2.0, 0.0]).unwrap(), 4.0);
        let e = parse("exp(0)*x2", 2).unwrap();
        assert_eq!(eval_expr(&e, &[5.0, 3.0]).unwrap(), 3.0);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        let e = parse("1/(1 - x1)", 2).unwrap();
        assert!(matches!(eval_expr(&e, &[1.0, 0.0]), Err(Error::Evaluation { .. })));
        let e = parse("sqrt(x1)", 1).unwrap();
        assert!(eval_expr(&e, &[-1.0]).is_err());
    }

    #[test]
    fn parse_errors_report_offsets() {
        assert_eq!(
            parse("x1 +", 2).unwrap_err(),
            Error::Parse {
                offset: 4,
                message: "unexpected end of input".into()
            }
        );
        assert!(matches!(parse("x3", 2), Err(Error::Parse { offset: 0, .. })));
        assert!(matches!(parse("2*foo(x1)", 2), Err(Error::Parse { offset: 2, .. })));
        assert!(matches!(parse("(x1", 2), Err(Error::Parse { offset: 3, .. })));
        assert!(parse("   ", 2).is_err());
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse("2^3^2", 1).unwrap();
        assert_eq!(eval_expr(&e, &[0.0]).unwrap(), 512.0);
        let e = parse("-x1^2", 1).unwrap();
        assert_eq!(eval_expr(&e, &[3.0]).unwrap(), -9.0);
        let e = parse("1 - 2 - 3", 1).unwrap();
        assert_eq!(eval_expr(&e, &[0.0]).unwrap(), -4.0);
        let e = parse("8/4/2", 1).unwrap();
        assert_eq!(eval_expr(&e, &[0.0]).unwrap(), 1.0);
        let e = parse("2e-1*x1", 1).unwrap();
        assert!((eval_expr(&e, &[5.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_print_simply() {
        let d = diff_expr(&parse("x1^2", 2).unwrap(), 0);
        assert_eq!(d.to_string(), "2*x1");
        let d = diff_expr(&parse("sin(x2)", 2).unwrap(), 1);
        assert_eq!(d.to_string(), "cos(x2)");
        let d = diff_expr(&parse("x2", 2).unwrap(), 0);
        assert_eq!(d.to_string(), "0");
    }

    #[test]
    fn printing_round_trips() {
        for text in ["-(x1 - x2)^2", "x1/(x2*x1)", "(-2)^x1", "-x1^-2", "1 - (x1 - x2)", "2^3^x1"] {
            let e = parse(text, 2).unwrap();
            let again = parse(&e.to_string(), 2).unwrap();
            assert_eq!(e, again, "{text} printed as {e}");
        }
    }
}
