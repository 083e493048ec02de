//! (α,β)-metrics `F = α φ(β/α)` on a coordinate chart.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{diff_expr, parse, Expr};
use crate::jets::{jet_eval_caps, Jet, Scalar};
use crate::linalg::{cholesky, invert, Matrix};

/// The function φ of an (α,β)-metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PhiFamily {
    /// φ = 1; β is ignored.
    Riemannian,
    /// φ = 1 + s
    Randers,
    /// φ = 1 + s + ... + s^r
    ApproxMatsumoto { r: u32 },
    /// φ = 1/(1 − s)
    Matsumoto,
    /// φ = Σ c_k s^k
    CustomPolynomial { coefficients: Vec<f64> },
}

impl PhiFamily {
    /// The second approximate Matsumoto metric, φ = 1 + s + s² + s³.
    pub fn second_approx_matsumoto() -> PhiFamily {
        PhiFamily::ApproxMatsumoto { r: 3 }
    }

    /// Polynomial coefficients of φ, lowest degree first, when φ is a polynomial.
    pub fn coefficients(&self) -> Option<Vec<f64>> {
        match self {
            PhiFamily::Riemannian => Some(vec![1.0]),
            PhiFamily::Randers => Some(vec![1.0, 1.0]),
            PhiFamily::ApproxMatsumoto { r } => Some(vec![1.0; *r as usize + 1]),
            PhiFamily::Matsumoto => None,
            PhiFamily::CustomPolynomial { coefficients } => Some(coefficients.clone()),
        }
    }

    /// True when φ is constant, i.e. F is the Riemannian metric α scaled.
    pub fn is_riemannian(&self) -> bool {
        match self.coefficients() {
            Some(c) => c.iter().skip(1).all(|&v| v == 0.0),
            None => false,
        }
    }

    pub fn phi<T: Scalar>(&self, s: &T) -> Result<T> {
        match self {
            PhiFamily::Matsumoto => s.lift(1.0).try_div(&s.lift(1.0).sub(s)),
            _ => {
                let c = self.coefficients().unwrap();
                let mut acc = s.lift(*c.last().unwrap_or(&0.0));
                for &ck in c.iter().rev().skip(1) {
                    acc = acc.mul(s).add(&s.lift(ck));
                }
                Ok(acc)
            }
        }
    }

    /// φ, φ′, φ″ at `s`.
    pub fn derivatives(&self, s: f64) -> Result<[f64; 3]> {
        match self {
            PhiFamily::Matsumoto => {
                let d = 1.0 - s;
                if d == 0.0 {
                    return Err(Error::Regularity("Matsumoto metric is singular at s = 1".into()));
                }
                Ok([1.0 / d, 1.0 / (d * d), 2.0 / (d * d * d)])
            }
            _ => {
                let c = self.coefficients().unwrap();
                let mut out = [0.0; 3];
                for (k, &ck) in c.iter().enumerate() {
                    let kf = k as f64;
                    out[0] += ck * s.powi(k as i32);
                    if k >= 1 {
                        out[1] += ck * kf * s.powi(k as i32 - 1);
                    }
                    if k >= 2 {
                        out[2] += ck * kf * (kf - 1.0) * s.powi(k as i32 - 2);
                    }
                }
                Ok(out)
            }
        }
    }

    /// Positivity of φ, φ − sφ′ and φ − sφ′ + (b² − s²)φ″: the conditions for
    /// `F = αφ(β/α)` to be a positive definite Finsler metric at slope `s`.
    pub fn check_regular(&self, s: f64, b2: f64) -> Result<()> {
        let [p0, p1, p2] = self.derivatives(s)?;
        let a = p0 - s * p1;
        let c = a + (b2 - s * s) * p2;
        if !(p0 > 0.0 && a > 0.0 && c > 0.0) {
            return Err(Error::Regularity(format!(
                "φ = {p0:.6}, φ − sφ′ = {a:.6}, φ − sφ′ + (b² − s²)φ″ = {c:.6} at s = {s:.6}, b² = {b2:.6}"
            )));
        }
        Ok(())
    }
}

/// A chart description of `F = α φ(β/α)` with `α² = a_ij(x) y^i y^j` and
/// `β = b_i(x) y^i`.
#[derive(Debug, Clone)]
pub struct MetricSpec {
    dim: usize,
    a: Matrix<Expr>,
    b: Vec<Expr>,
    phi: PhiFamily,
    /// `da[k][i][j] = ∂a_ij/∂x^k`
    da: Vec<Matrix<Expr>>,
    /// `db[k][i] = ∂b_i/∂x^k`
    db: Vec<Vec<Expr>>,
}

impl MetricSpec {
    pub fn new(dim: usize, a: Matrix<Expr>, b: Vec<Expr>, phi: PhiFamily) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Argument(format!("dimension must be at least 2, got {dim}")));
        }
        if a.len() != dim || a.iter().any(|r| r.len() != dim) || b.len() != dim {
            return Err(Error::Argument(format!("metric data must be {dim}x{dim} and {dim}")));
        }
        for i in 0..dim {
            for j in 0..i {
                if a[i][j] != a[j][i] {
                    return Err(Error::Argument(format!(
                        "a_{}{} differs from a_{}{}",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        let vars = a.iter().flatten().chain(&b).filter_map(Expr::max_var).max();
        if let Some(v) = vars {
            if v >= dim {
                return Err(Error::Argument(format!("x{} is outside the chart", v + 1)));
            }
        }
        let da = (0..dim)
            .map(|k| {
                a.iter()
                    .map(|row| row.iter().map(|e| diff_expr(e, k)).collect())
                    .collect()
            })
            .collect();
        let db = (0..dim)
            .map(|k| b.iter().map(|e| diff_expr(e, k)).collect())
            .collect();
        Ok(MetricSpec {
            dim,
            a,
            b,
            phi,
            da,
            db,
        })
    }

    /// Builds a metric from expression strings.
    pub fn from_strings(a: &[&[&str]], b: &[&str], phi: PhiFamily) -> Result<Self> {
        let dim = b.len();
        let a = a
            .iter()
            .map(|row| row.iter().map(|t| parse(t, dim)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let b = b.iter().map(|t| parse(t, dim)).collect::<Result<Vec<_>>>()?;
        MetricSpec::new(dim, a, b, phi)
    }

    /// Flat `α` with a given 1-form and family.
    pub fn euclidean_with(b: &[&str], phi: PhiFamily) -> Result<Self> {
        let n = b.len();
        let rows: Vec<Vec<&str>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { "1" } else { "0" }).collect())
            .collect();
        let rows: Vec<&[&str]> = rows.iter().map(|r| r.as_slice()).collect();
        MetricSpec::from_strings(&rows, b, phi)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn phi(&self) -> &PhiFamily {
        &self.phi
    }

    pub fn a_exprs(&self) -> &Matrix<Expr> {
        &self.a
    }

    pub fn b_exprs(&self) -> &[Expr] {
        &self.b
    }

    pub fn with_phi(&self, phi: PhiFamily) -> MetricSpec {
        MetricSpec {
            phi,
            ..self.clone()
        }
    }

    fn eval_matrix(&self, m: &Matrix<Expr>, x: &[f64]) -> Result<Matrix<f64>> {
        m.iter()
            .map(|row| row.iter().map(|e| e.eval_with(x)).collect())
            .collect::<Result<_>>()
            .map_err(Error::into_regularity)
    }

    pub fn a_at(&self, x: &[f64]) -> Result<Matrix<f64>> {
        self.eval_matrix(&self.a, x)
    }

    pub fn b_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        if self.phi.is_riemannian() {
            return Ok(vec![0.0; self.dim]);
        }
        self.b
            .iter()
            .map(|e| e.eval_with(x))
            .collect::<Result<_>>()
            .map_err(Error::into_regularity)
    }

    /// `∂a_ij/∂x^k` indexed `[k][i][j]`.
    pub fn da_at(&self, x: &[f64]) -> Result<Vec<Matrix<f64>>> {
        self.da.iter().map(|m| self.eval_matrix(m, x)).collect()
    }

    /// `∂b_i/∂x^k` indexed `[k][i]`.
    pub fn db_at(&self, x: &[f64]) -> Result<Matrix<f64>> {
        if self.phi.is_riemannian() {
            return Ok(vec![vec![0.0; self.dim]; self.dim]);
        }
        self.eval_matrix(&self.db, x)
    }

    /// `a^{ij}` after checking positive definiteness.
    pub fn a_inv_at(&self, x: &[f64]) -> Result<Matrix<f64>> {
        let a = self.a_at(x)?;
        cholesky(&a)?;
        invert(&a)
    }

    /// Squared length `b² = a^{ij} b_i b_j` of the 1-form.
    pub fn b_norm2(&self, x: &[f64]) -> Result<f64> {
        let ai = self.a_inv_at(x)?;
        let b = self.b_at(x)?;
        Ok((0..self.dim)
            .map(|i| (0..self.dim).map(|j| ai[i][j] * b[i] * b[j]).sum::<f64>())
            .sum())
    }

    /// Levi-Civita symbols of α, indexed `[k][i][j]` for Γ̄^k_ij.
    pub fn christoffel(&self, x: &[f64]) -> Result<Vec<Matrix<f64>>> {
        let n = self.dim;
        let ai = self.a_inv_at(x)?;
        let da = self.da_at(x)?;
        let mut gamma = vec![vec![vec![0.0; n]; n]; n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    gamma[k][i][j] = 0.5
                        * (0..n)
                            .map(|l| ai[k][l] * (da[i][j][l] + da[j][i][l] - da[l][i][j]))
                            .sum::<f64>();
                }
            }
        }
        Ok(gamma)
    }

    fn alpha_beta<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<(T, Option<T>)> {
        let n = self.dim;
        let mut alpha2 = y[0].lift(0.0);
        for i in 0..n {
            for j in i..n {
                if matches!(self.a[i][j], Expr::Num(v) if v == 0.0) {
                    continue;
                }
                let aij = self.a[i][j].eval_with(x)?;
                let mut term = aij.mul(&y[i]).mul(&y[j]);
                if i != j {
                    term = term.scale(2.0);
                }
                alpha2 = alpha2.add(&term);
            }
        }
        if self.phi.is_riemannian() {
            return Ok((alpha2, None));
        }
        let mut beta = y[0].lift(0.0);
        for i in 0..n {
            if matches!(self.b[i], Expr::Num(v) if v == 0.0) {
                continue;
            }
            beta = beta.add(&self.b[i].eval_with(x)?.mul(&y[i]));
        }
        Ok((alpha2, Some(beta)))
    }

    /// `F²` over any scalar type.
    pub fn finsler_sq<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T> {
        let (alpha2, beta) = self.alpha_beta(x, y)?;
        let Some(beta) = beta else {
            let c = self.phi.coefficients().unwrap()[0];
            return Ok(alpha2.scale(c * c));
        };
        if alpha2.value() <= 0.0 {
            return Err(Error::Regularity("α(y) must be positive".into()));
        }
        let alpha = alpha2.try_sqrt()?;
        let s = beta.try_div(&alpha)?;
        let phi = self.phi.phi(&s)?;
        Ok(alpha2.mul(&phi).mul(&phi))
    }

    /// `F` over any scalar type.
    pub fn finsler<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T> {
        let (alpha2, beta) = self.alpha_beta(x, y)?;
        if alpha2.value() <= 0.0 {
            return Err(Error::Regularity("α(y) must be positive".into()));
        }
        let alpha = alpha2.try_sqrt()?;
        let Some(beta) = beta else {
            let c = self.phi.coefficients().unwrap()[0];
            return Ok(alpha.scale(c));
        };
        let s = beta.try_div(&alpha)?;
        Ok(alpha.mul(&self.phi.phi(&s)?))
    }

    /// Jet of `F²` at `(x, y)` over the staircase `caps`.
    pub fn f2_jet(&self, x: &[f64], y: &[f64], caps: &[usize]) -> Result<Jet> {
        jet_eval_caps(|xs, ys| self.finsler_sq(xs, ys), x, y, caps).map_err(Error::into_regularity)
    }

    /// Jet of `F` at `(x, y)` over the staircase `caps`.
    pub fn f_jet(&self, x: &[f64], y: &[f64], caps: &[usize]) -> Result<Jet> {
        jet_eval_caps(|xs, ys| self.finsler(xs, ys), x, y, caps).map_err(Error::into_regularity)
    }

    /// Plain evaluation of `F(x, y)`.
    pub fn eval_f(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.finsler(x, y).map_err(Error::into_regularity)
    }

    pub fn point(&self, x: &[f64], y: &[f64]) -> Result<PointState> {
        PointState::new(self, x, y)
    }
}

/// A point of the slit tangent bundle with its cached scalars.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub s: f64,
    pub b2: f64,
    pub f: f64,
}

impl PointState {
    /// Validates `(x, y)` against the regularity domain of `m`.
    pub fn new(m: &MetricSpec, x: &[f64], y: &[f64]) -> Result<PointState> {
        let n = m.dim();
        if x.len() != n || y.len() != n {
            return Err(Error::Argument(format!("point must have {n} coordinates")));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::Argument("point coordinates must be finite".into()));
        }
        let a = m.a_at(x)?;
        cholesky(&a)?;
        let alpha2: f64 = (0..n)
            .map(|i| (0..n).map(|j| a[i][j] * y[i] * y[j]).sum::<f64>())
            .sum();
        if !(alpha2 > 0.0) {
            return Err(Error::Regularity("fiber vector must be nonzero".into()));
        }
        let alpha = alpha2.sqrt();
        let (beta, b2) = if m.phi().is_riemannian() {
            (0.0, 0.0)
        } else {
            let b = m.b_at(x)?;
            (
                b.iter().zip(y).map(|(bi, yi)| bi * yi).sum(),
                m.b_norm2(x)?,
            )
        };
        if b2 >= 1.0 {
            return Err(Error::Regularity(format!("b² = {b2} must be below 1")));
        }
        let s = beta / alpha;
        m.phi().check_regular(s, b2)?;
        let f = m.eval_f(x, y)?;
        if !(f > 0.0) {
            return Err(Error::Regularity("F must be positive".into()));
        }
        Ok(PointState {
            x: x.to_vec(),
            y: y.to_vec(),
            alpha,
            beta,
            s,
            b2,
            f,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_families() {
        let s = 0.2;
        assert_eq!(PhiFamily::Randers.phi(&s).unwrap(), 1.2);
        let am = PhiFamily::second_approx_matsumoto().phi(&s).unwrap();
        assert!((am - (1.0 + 0.2 + 0.04 + 0.008)).abs() < 1e-15);
        assert!((PhiFamily::Matsumoto.phi(&s).unwrap() - 1.25).abs() < 1e-15);
        assert!(PhiFamily::Riemannian.is_riemannian());
        assert!(!PhiFamily::Randers.is_riemannian());
        let d = PhiFamily::second_approx_matsumoto().derivatives(0.0).unwrap();
        assert_eq!(d, [1.0, 1.0, 2.0]);
    }

    #[test]
    fn asymmetric_a_is_rejected() {
        let r = MetricSpec::from_strings(&[&["1", "x1"], &["0", "1"]], &["0", "0"], PhiFamily::Riemannian);
        assert!(matches!(r, Err(Error::Argument(_))));
    }

    #[test]
    fn point_state_caches_scalars() {
        let m = MetricSpec::euclidean_with(&["0.3", "0"], PhiFamily::Randers).unwrap();
        let p = m.point(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!((p.alpha - 1.0).abs() < 1e-15);
        assert!((p.s - 0.3).abs() < 1e-15);
        assert!((p.f - 1.3).abs() < 1e-15);
        assert!((p.b2 - 0.09).abs() < 1e-15);
    }

    #[test]
    fn regularity_guard() {
        let m = MetricSpec::euclidean_with(&["0.9", "0"], PhiFamily::second_approx_matsumoto()).unwrap();
        // φ − sφ′ = 1 − s² − 2s³ < 0 at s = 0.9
        assert!(matches!(m.point(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Regularity(_))));
        let m = MetricSpec::euclidean_with(&["1.2", "0"], PhiFamily::Randers).unwrap();
        assert!(matches!(m.point(&[0.0, 0.0], &[1.0, 1.0]), Err(Error::Regularity(_))));
        assert!(m.point(&[0.0, 0.0], &[0.0, 0.0]).is_err());
    }
}
