//! Exact rational functions in `s` and `t = b²` over ℚ.
//!
//! Representations are only reduced by content; equality is decided by
//! cross-multiplication, which is sound without polynomial gcds.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};

/// Polynomial in `s` and `t`, keyed by `(deg_s, deg_t)`. Zero coefficients are never stored.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly2 {
    terms: BTreeMap<(u32, u32), BigRational>,
}

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

impl Poly2 {
    pub fn zero() -> Poly2 {
        Poly2::default()
    }

    pub fn constant(c: BigRational) -> Poly2 {
        Poly2::monomial(c, 0, 0)
    }

    pub fn monomial(c: BigRational, ds: u32, dt: u32) -> Poly2 {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert((ds, dt), c);
        }
        Poly2 { terms }
    }

    pub fn s() -> Poly2 {
        Poly2::monomial(BigRational::one(), 1, 0)
    }

    pub fn t() -> Poly2 {
        Poly2::monomial(BigRational::one(), 0, 1)
    }

    /// `Σ c_k s^k`
    pub fn from_s_coefficients(c: &[i64]) -> Poly2 {
        let mut p = Poly2::zero();
        for (k, &v) in c.iter().enumerate() {
            p.add_term((k as u32, 0), rat(v));
        }
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &BigRational)> {
        self.terms.iter()
    }

    pub fn degree_s(&self) -> u32 {
        self.terms.keys().map(|k| k.0).max().unwrap_or(0)
    }

    fn add_term(&mut self, key: (u32, u32), c: BigRational) {
        let entry = self.terms.entry(key).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    pub fn add(&self, o: &Poly2) -> Poly2 {
        let mut out = self.clone();
        for (k, c) in &o.terms {
            out.add_term(*k, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly2 {
        Poly2 {
            terms: self.terms.iter().map(|(k, c)| (*k, -c)).collect(),
        }
    }

    pub fn sub(&self, o: &Poly2) -> Poly2 {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &Poly2) -> Poly2 {
        let mut out = Poly2::zero();
        for (&(a, b), c) in &self.terms {
            for (&(d, e), f) in &o.terms {
                out.add_term((a + d, b + e), c * f);
            }
        }
        out
    }

    pub fn scale(&self, k: &BigRational) -> Poly2 {
        if k.is_zero() {
            return Poly2::zero();
        }
        Poly2 {
            terms: self.terms.iter().map(|(key, c)| (*key, c * k)).collect(),
        }
    }

    pub fn d_ds(&self) -> Poly2 {
        let mut out = Poly2::zero();
        for (&(a, b), c) in &self.terms {
            if a > 0 {
                out.add_term((a - 1, b), c * rat(a as i64));
            }
        }
        out
    }

    /// gcd of numerators over lcm of denominators, positive.
    fn content(&self) -> BigRational {
        let mut num = BigInt::zero();
        let mut den = BigInt::one();
        for c in self.terms.values() {
            num = num.gcd(c.numer());
            den = den.lcm(c.denom());
        }
        BigRational::new(num, den)
    }

    pub fn eval_exact(&self, s: &BigRational, t: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for (&(a, b), c) in &self.terms {
            acc += c * num_traits::pow(s.clone(), a as usize) * num_traits::pow(t.clone(), b as usize);
        }
        acc
    }

    pub fn eval(&self, s: f64, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(a, b), c)| c.to_f64().unwrap_or(f64::NAN) * s.powi(a as i32) * t.powi(b as i32))
            .sum()
    }
}

impl fmt::Display for Poly2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(a, b), c) in self.terms.iter() {
            let sign = if c.is_negative() { "-" } else { "+" };
            if first {
                if c.is_negative() {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let mag = c.abs();
            let unit = mag.is_one() && (a > 0 || b > 0);
            if !unit {
                write!(f, "{mag}")?;
            }
            let mut parts = Vec::new();
            if a > 0 {
                parts.push(if a == 1 { "s".to_string() } else { format!("s^{a}") });
            }
            if b > 0 {
                parts.push(if b == 1 { "t".to_string() } else { format!("t^{b}") });
            }
            if !parts.is_empty() {
                if !unit {
                    write!(f, "*")?;
                }
                write!(f, "{}", parts.join("*"))?;
            }
        }
        Ok(())
    }
}

/// `num / den` with `den ≠ 0`.
#[derive(Debug, Clone)]
pub struct RatFunc {
    num: Poly2,
    den: Poly2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl RatFunc {
    pub fn new(num: Poly2, den: Poly2) -> Result<RatFunc> {
        if den.is_zero() {
            return Err(Error::Arithmetic("zero denominator".into()));
        }
        Ok(RatFunc { num, den }.reduced())
    }

    pub fn poly(p: Poly2) -> RatFunc {
        RatFunc {
            num: p,
            den: Poly2::constant(BigRational::one()),
        }
        .reduced()
    }

    pub fn constant(v: i64) -> RatFunc {
        RatFunc::poly(Poly2::constant(rat(v)))
    }

    pub fn s() -> RatFunc {
        RatFunc::poly(Poly2::s())
    }

    pub fn t() -> RatFunc {
        RatFunc::poly(Poly2::t())
    }

    pub fn numerator(&self) -> &Poly2 {
        &self.num
    }

    pub fn denominator(&self) -> &Poly2 {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    fn reduced(self) -> RatFunc {
        if self.num.is_zero() {
            return RatFunc {
                num: Poly2::zero(),
                den: Poly2::constant(BigRational::one()),
            };
        }
        let mut cd = self.den.content();
        if self.den.terms.values().next_back().is_some_and(|c| c.is_negative()) {
            cd = -cd;
        }
        let inv = cd.recip();
        RatFunc {
            num: self.num.scale(&inv),
            den: self.den.scale(&inv),
        }
    }

    pub fn add(&self, o: &RatFunc) -> RatFunc {
        if self.den == o.den {
            return RatFunc {
                num: self.num.add(&o.num),
                den: self.den.clone(),
            }
            .reduced();
        }
        RatFunc {
            num: self.num.mul(&o.den).add(&o.num.mul(&self.den)),
            den: self.den.mul(&o.den),
        }
        .reduced()
    }

    pub fn neg(&self) -> RatFunc {
        RatFunc {
            num: self.num.neg(),
            den: self.den.clone(),
        }
    }

    pub fn sub(&self, o: &RatFunc) -> RatFunc {
        self.add(&o.neg())
    }

    pub fn mul(&self, o: &RatFunc) -> RatFunc {
        RatFunc {
            num: self.num.mul(&o.num),
            den: self.den.mul(&o.den),
        }
        .reduced()
    }

    pub fn div(&self, o: &RatFunc) -> Result<RatFunc> {
        if o.is_zero() {
            return Err(Error::Arithmetic("division by the zero rational function".into()));
        }
        Ok(RatFunc {
            num: self.num.mul(&o.den),
            den: self.den.mul(&o.num),
        }
        .reduced())
    }

    pub fn scale(&self, k: i64) -> RatFunc {
        RatFunc {
            num: self.num.scale(&rat(k)),
            den: self.den.clone(),
        }
        .reduced()
    }

    /// `d/ds` at fixed `t`, by the quotient rule.
    pub fn d_ds(&self) -> RatFunc {
        let num = self.num.d_ds().mul(&self.den).sub(&self.num.mul(&self.den.d_ds()));
        if num.is_zero() {
            return RatFunc::constant(0);
        }
        RatFunc {
            num,
            den: self.den.mul(&self.den),
        }
        .reduced()
    }

    /// Exact equality by cross-multiplication.
    pub fn equals(&self, o: &RatFunc) -> bool {
        self.num.mul(&o.den) == o.num.mul(&self.den)
    }

    pub fn eval(&self, s: f64, t: f64) -> Result<f64> {
        let d = self.den.eval(s, t);
        if d == 0.0 {
            return Err(Error::Arithmetic(format!("denominator vanishes at s = {s}, t = {t}")));
        }
        Ok(self.num.eval(s, t) / d)
    }

    pub fn eval_exact(&self, s: &BigRational, t: &BigRational) -> Result<BigRational> {
        let d = self.den.eval_exact(s, t);
        if d.is_zero() {
            return Err(Error::Arithmetic("denominator vanishes".into()));
        }
        Ok(self.num.eval_exact(s, t) / d)
    }
}

impl PartialEq for RatFunc {
    fn eq(&self, o: &RatFunc) -> bool {
        self.equals(o)
    }
}

impl fmt::Display for RatFunc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}) / ({})", self.num, self.den)
    }
}

pub fn rf_arith(a: &RatFunc, b: &RatFunc, op: ArithOp) -> Result<RatFunc> {
    Ok(match op {
        ArithOp::Add => a.add(b),
        ArithOp::Sub => a.sub(b),
        ArithOp::Mul => a.mul(b),
        ArithOp::Div => a.div(b)?,
    })
}

pub fn rf_d_ds(a: &RatFunc) -> RatFunc {
    a.d_ds()
}

/// The φ-scalars as exact rational functions of `(s, t)`.
#[derive(Debug, Clone)]
pub struct ExactScalars {
    pub q: RatFunc,
    pub theta_big: RatFunc,
    pub psi: RatFunc,
    pub delta: RatFunc,
    pub phi_big: RatFunc,
}

/// Denominator used for `Q = φ′ / (…)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QDenominator {
    /// `φ − sφ′`
    Standard,
    /// `φ − sφ`, the alternative denominator.
    Literal,
}

pub fn exact_scalars(phi: &RatFunc, n: i64, qd: QDenominator) -> Result<ExactScalars> {
    let s = RatFunc::s();
    let u = RatFunc::t().sub(&s.mul(&s));
    let d1 = phi.d_ds();
    let d2 = d1.d_ds();
    let q_den = match qd {
        QDenominator::Standard => phi.sub(&s.mul(&d1)),
        QDenominator::Literal => phi.sub(&s.mul(phi)),
    };
    let q = d1.div(&q_den)?;
    let dq = q.d_ds();
    let ddq = dq.d_ds();
    let den2 = phi.sub(&s.mul(&d1)).add(&u.mul(&d2));
    let theta_big = phi
        .mul(&d1)
        .sub(&s.mul(&phi.mul(&d2).add(&d1.mul(&d1))))
        .div(&phi.mul(&den2).scale(2))?;
    let psi = d2.div(&den2.scale(2))?;
    let sq1 = RatFunc::constant(1).add(&s.mul(&q));
    let delta = sq1.add(&u.mul(&dq));
    let q_sq = q.sub(&s.mul(&dq));
    let phi_big = delta
        .scale(n)
        .add(&sq1)
        .mul(&q_sq)
        .neg()
        .sub(&u.mul(&sq1).mul(&ddq));
    Ok(ExactScalars {
        q,
        theta_big,
        psi,
        delta,
        phi_big,
    })
}

/// `φ = 1 + s + s² + s³`
pub fn second_matsumoto_phi() -> RatFunc {
    RatFunc::poly(Poly2::from_s_coefficients(&[1, 1, 1, 1]))
}

/// The reduced forms of `Q`, `Θ`, `Ψ` for `φ = 1 + s + s² + s³`.
pub fn second_matsumoto_reduced() -> (RatFunc, RatFunc, RatFunc) {
    let p = |c: &[i64]| Poly2::from_s_coefficients(c);
    let t = Poly2::t();
    // 1 − 3s² − 8s³ + 2t + 6ts
    let d = p(&[1, 0, -3, -8])
        .add(&t.scale(&rat(2)))
        .add(&t.mul(&Poly2::s()).scale(&rat(6)));
    let q = RatFunc::new(p(&[-1, -2, -3]), p(&[-1, 0, 1, 2])).unwrap();
    let theta = RatFunc::new(
        p(&[1, 0, -6, -12, -15, -12]),
        p(&[1, 1, 1, 1]).mul(&d).scale(&rat(2)),
    )
    .unwrap();
    let psi = RatFunc::new(p(&[1, 3]), d).unwrap();
    (q, theta, psi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct A5Certificate {
    pub q_ok: bool,
    pub theta_ok: bool,
    pub psi_ok: bool,
}

impl A5Certificate {
    pub fn all(&self) -> bool {
        self.q_ok && self.theta_ok && self.psi_ok
    }
}

/// Compares the generic `Q`, `Θ`, `Ψ` for the second approximate Matsumoto φ
/// with their reduced forms, exactly.
pub fn verify_identity_a5_with(qd: QDenominator) -> A5Certificate {
    let ex = exact_scalars(&second_matsumoto_phi(), 2, qd)
        .expect("generic scalars of 1 + s + s² + s³ are well defined");
    let (q, theta, psi) = second_matsumoto_reduced();
    A5Certificate {
        q_ok: ex.q.equals(&q),
        theta_ok: ex.theta_big.equals(&theta),
        psi_ok: ex.psi.equals(&psi),
    }
}

pub fn verify_identity_a5() -> A5Certificate {
    verify_identity_a5_with(QDenominator::Standard)
}

/// True when `Φ` for `phi` in dimension `n` is not identically zero.
pub fn phi_nonvanishing_for(phi: &RatFunc, n: i64) -> bool {
    match exact_scalars(phi, n, QDenominator::Standard) {
        Ok(ex) => !ex.phi_big.is_zero(),
        // φ′ ≡ 0 style degeneracies make Q's denominator vanish only for φ ≡ 0
        Err(_) => false,
    }
}

/// `Φ ≢ 0` for `φ = 1 + s + s² + s³` in dimension `n`.
pub fn phi_nonvanishing_certificate(n: usize) -> bool {
    phi_nonvanishing_for(&second_matsumoto_phi(), n as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(c: &[i64]) -> RatFunc {
        RatFunc::poly(Poly2::from_s_coefficients(c))
    }

    #[test]
    fn arithmetic_examples() {
        let sum = rf_arith(&RatFunc::s(), &RatFunc::t(), ArithOp::Add).unwrap();
        assert_eq!(sum, RatFunc::poly(Poly2::s().add(&Poly2::t())));
        let q = rf_arith(&poly(&[0, -1, 1]), &RatFunc::s(), ArithOp::Div).unwrap();
        assert_eq!(q, poly(&[-1, 1]));
        let e = rf_arith(&RatFunc::s(), &RatFunc::constant(0), ArithOp::Div);
        assert!(matches!(e, Err(Error::Arithmetic(_))));
    }

    #[test]
    fn derivatives() {
        assert_eq!(rf_d_ds(&poly(&[0, 0, 0, 1])), poly(&[0, 0, 3]));
        let inv = RatFunc::new(Poly2::from_s_coefficients(&[1]), Poly2::from_s_coefficients(&[1, -1])).unwrap();
        let expect = RatFunc::new(Poly2::from_s_coefficients(&[1]), Poly2::from_s_coefficients(&[1, -2, 1])).unwrap();
        assert_eq!(rf_d_ds(&inv), expect);
        assert!(rf_d_ds(&RatFunc::t()).is_zero());
    }

    #[test]
    fn certificates() {
        assert!(verify_identity_a5().all());
        let lit = verify_identity_a5_with(QDenominator::Literal);
        assert!(!lit.q_ok);
        let randers = exact_scalars(&poly(&[1, 1]), 2, QDenominator::Standard).unwrap();
        assert_eq!(randers.q, RatFunc::constant(1));
        assert!(phi_nonvanishing_certificate(2));
        assert!(phi_nonvanishing_certificate(3));
        assert!(!phi_nonvanishing_for(&RatFunc::constant(1), 2));
    }

    #[test]
    fn display() {
        assert_eq!(poly(&[1, -2, 0, 1]).numerator().to_string(), "1 - 2*s + s^3");
    }
}
