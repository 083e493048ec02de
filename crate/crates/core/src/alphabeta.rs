//! Closed-form (α,β) machinery: covariant derivative data of β, the
//! φ-scalars, and explicit formulas for the spray, S-curvature, mean Cartan
//! torsion and mean Landsberg curvature.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::{Jet, Layout};
use crate::linalg::Matrix;
use crate::metric::{MetricSpec, PhiFamily, PointState};
use crate::volume::volume_function;

/// Covariant derivative of β with respect to α and its contractions at a point.
#[derive(Debug, Clone, Serialize)]
pub struct BetaCovariant {
    /// `b_{i|j}`
    pub b_cov: Matrix<f64>,
    pub r: Matrix<f64>,
    pub s: Matrix<f64>,
    /// `r_j = b^i r_ij`
    pub r_j: Vec<f64>,
    /// `s_j = b^i s_ij`
    pub s_j: Vec<f64>,
    pub r00: f64,
    pub r0: f64,
    pub s0: f64,
    /// `r_i0 = r_ij y^j`
    pub r_i0: Vec<f64>,
    /// `s_i0 = s_ij y^j`
    pub s_i0: Vec<f64>,
    /// `s^i_0 = a^{im} s_m0`
    pub s_up_0: Vec<f64>,
    /// `b^i = a^{ij} b_j`
    pub b_up: Vec<f64>,
    pub b_low: Vec<f64>,
    /// `y_i = a_ij y^j`
    pub y_low: Vec<f64>,
    /// `Ḡ^i = ½ Γ̄^i_jk y^j y^k`
    pub spray_alpha: Vec<f64>,
}

pub fn covariant_beta_data(m: &MetricSpec, p: &PointState) -> Result<BetaCovariant> {
    let n = m.dim();
    let a = m.a_at(&p.x)?;
    let ai = m.a_inv_at(&p.x)?;
    let b = m.b_at(&p.x)?;
    let db = m.db_at(&p.x)?;
    let gamma = m.christoffel(&p.x)?;
    let y = &p.y;
    let mut b_cov = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            b_cov[i][j] = db[j][i] - (0..n).map(|k| b[k] * gamma[k][i][j]).sum::<f64>();
        }
    }
    let r: Matrix<f64> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (b_cov[i][j] + b_cov[j][i])).collect())
        .collect();
    let s: Matrix<f64> = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * (b_cov[i][j] - b_cov[j][i])).collect())
        .collect();
    let raise = |v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| ai[i][j] * v[j]).sum())
            .collect()
    };
    let contract = |t: &Matrix<f64>, v: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| t[i][j] * v[j]).sum())
            .collect()
    };
    let dot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).map(|(a, b)| a * b).sum() };
    let b_up = raise(&b);
    let r_i0 = contract(&r, y);
    let s_i0 = contract(&s, y);
    let r_j: Vec<f64> = (0..n).map(|j| (0..n).map(|i| b_up[i] * r[i][j]).sum()).collect();
    let s_j: Vec<f64> = (0..n).map(|j| (0..n).map(|i| b_up[i] * s[i][j]).sum()).collect();
    let spray_alpha = (0..n)
        .map(|i| {
            0.5 * (0..n)
                .map(|j| (0..n).map(|k| gamma[i][j][k] * y[j] * y[k]).sum::<f64>())
                .sum::<f64>()
        })
        .collect();
    Ok(BetaCovariant {
        r00: dot(&r_i0, y),
        r0: dot(&r_j, y),
        s0: dot(&s_j, y),
        s_up_0: raise(&s_i0),
        y_low: contract(&a, y),
        b_cov,
        r,
        s,
        r_j,
        s_j,
        r_i0,
        s_i0,
        b_up,
        b_low: b,
        spray_alpha,
    })
}

/// φ-dependent scalars at `(s, b²)` for dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiScalars {
    pub phi: f64,
    pub dphi: f64,
    pub ddphi: f64,
    pub q: f64,
    pub dq: f64,
    pub ddq: f64,
    pub theta_big: f64,
    pub psi: f64,
    pub dpsi: f64,
    pub delta: f64,
    pub phi_big: f64,
    pub psi1: f64,
    /// `(Ψ1 + sΦ/Δ)/(b² − s²)`, finite where `b² = s²`.
    pub psi1_reduced: f64,
    pub psi2: f64,
    pub theta: f64,
    /// `−f′(b)/(2b f(b))` from the volume function; absent at `b = 0`.
    pub lambda: Option<f64>,
}

const SERIES_ORDER: usize = 6;

/// Evaluates the φ-scalars. Derivatives in `s` are taken on truncated Taylor
/// series, so no derivative formula is expanded by hand.
pub fn phi_scalars(family: &PhiFamily, s: f64, b2: f64, n: usize) -> Result<PhiScalars> {
    if s * s > b2 * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::Domain(format!("s² = {} exceeds b² = {b2}", s * s)));
    }
    family.check_regular(s, b2)?;
    let layout = Layout::get(0, 1, &[SERIES_ORDER]);
    let sv = Jet::variable(&layout, 0, s);
    let phi = family.phi(&sv).map_err(Error::into_regularity)?;
    let dphi = phi.d(0);
    let ddphi = dphi.d(0);
    let u = (-&(&sv * &sv)).add_scalar(b2);
    let den1 = &phi - &(&sv * &dphi);
    let den2 = &den1 + &(&u * &ddphi);
    let div = |a: &Jet, b: &Jet| a.checked_div(b).map_err(Error::into_regularity);
    let q = div(&dphi, &den1)?;
    let dq = q.d(0);
    let ddq = dq.d(0);
    let sq1 = (&sv * &q).add_scalar(1.0);
    let delta = &sq1 + &(&u * &dq);
    if delta.value().abs() < 1e-14 {
        return Err(Error::Regularity("Δ vanishes".into()));
    }
    let q_sq = &q - &(&sv * &dq);
    let nf = n as f64;
    let phi_big = -&(&(&delta.scale(nf) + &sq1) * &q_sq) - (&u * &(&sq1 * &ddq));
    let theta_big = div(
        &(&(&phi * &dphi) - &(&sv * &(&(&phi * &ddphi) + &(&dphi * &dphi)))),
        &(&phi * &den2).scale(2.0),
    )?;
    let psi = div(&ddphi, &den2.scale(2.0))?;
    let (dl, dv) = (delta.value(), delta.d(0).value());
    let (pv, dpv) = (phi_big.value(), phi_big.d(0).value());
    let psi1_reduced = (dpv * dl - 1.5 * pv * dv) / (dl * dl);
    let uv = b2 - s * s;
    let lambda = if b2 > 0.0 && !family.is_riemannian() {
        let b = b2.sqrt();
        let (f, df) = volume_function(family, n, b)?;
        Some(-df / (2.0 * b * f))
    } else {
        None
    };
    Ok(PhiScalars {
        phi: phi.value(),
        dphi: dphi.value(),
        ddphi: ddphi.value(),
        q: q.value(),
        dq: dq.value(),
        ddq: ddq.value(),
        theta_big: theta_big.value(),
        psi: psi.value(),
        dpsi: psi.d(0).value(),
        delta: dl,
        phi_big: pv,
        psi1: -s * pv / dl + uv * psi1_reduced,
        psi1_reduced,
        psi2: 2.0 * (nf + 1.0) * q_sq.value() + 3.0 * pv / dl,
        theta: q_sq.value() / (2.0 * dl),
        lambda,
    })
}

/// `(Q, Θ, Ψ)` for φ = 1 + s + s² + s³ from their reduced rational forms.
pub fn second_matsumoto_scalars(s: f64, b2: f64) -> Result<(f64, f64, f64)> {
    let dq = -1.0 + s * s + 2.0 * s.powi(3);
    let phi = 1.0 + s + s * s + s.powi(3);
    let d = 1.0 - 3.0 * s * s - 8.0 * s.powi(3) + 2.0 * b2 + 6.0 * b2 * s;
    if dq.abs() < 1e-14 || phi.abs() < 1e-14 || d.abs() < 1e-14 {
        return Err(Error::Regularity(format!("denominator vanishes at s = {s}")));
    }
    let q = -(1.0 + 2.0 * s + 3.0 * s * s) / dq;
    let theta = 0.5 * (1.0 - 6.0 * s * s - 12.0 * s.powi(3) - 15.0 * s.powi(4) - 12.0 * s.powi(5))
        / (phi * d);
    let psi = (1.0 + 3.0 * s) / d;
    Ok((q, theta, psi))
}

fn scalars_at(m: &MetricSpec, p: &PointState) -> Result<PhiScalars> {
    phi_scalars(m.phi(), p.s, p.b2, m.dim())
}

pub fn spray_closed_form(m: &MetricSpec, p: &PointState) -> Result<Vec<f64>> {
    let bc = covariant_beta_data(m, p)?;
    if m.phi().is_riemannian() {
        return Ok(bc.spray_alpha);
    }
    let ps = scalars_at(m, p)?;
    let q_sq = ps.q - p.s * ps.dq;
    if q_sq.abs() < 1e-14 {
        return Err(Error::Regularity("Q − sQ′ vanishes".into()));
    }
    let a = p.alpha;
    let k = ps.theta * (-2.0 * a * ps.q * bc.s0 + bc.r00);
    Ok((0..m.dim())
        .map(|i| {
            bc.spray_alpha[i]
                + a * ps.q * bc.s_up_0[i]
                + k * (p.y[i] / a + ps.dq / q_sq * bc.b_up[i])
        })
        .collect())
}

/// Where λ of the S-curvature formula comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum LambdaSource {
    /// `λ = −f′(b)/(2b f(b))` from the Busemann–Hausdorff volume function.
    Volume,
    Fixed(f64),
}

pub fn s_curvature_closed(m: &MetricSpec, p: &PointState, lambda: LambdaSource) -> Result<f64> {
    if m.phi().is_riemannian() {
        return Ok(0.0);
    }
    let bc = covariant_beta_data(m, p)?;
    let ps = scalars_at(m, p)?;
    let lam = match lambda {
        LambdaSource::Fixed(v) => v,
        LambdaSource::Volume => ps.lambda.unwrap_or(0.0),
    };
    let nf = m.dim() as f64;
    let u = p.b2 - p.s * p.s;
    let d_psi_q = ps.dpsi * ps.q + ps.psi * ps.dq;
    let c_s0 = ps.dq - 2.0 * ps.psi * ps.q * p.s - 2.0 * d_psi_q * u - 2.0 * (nf + 1.0) * ps.q * ps.theta_big
        + 2.0 * lam;
    Ok(c_s0 * bc.s0
        + 2.0 * (ps.psi + lam) * bc.r0
        + (u * ps.dpsi + (nf + 1.0) * ps.theta_big) * bc.r00 / p.alpha)
}

pub fn mean_cartan_closed(m: &MetricSpec, p: &PointState) -> Result<Vec<f64>> {
    let n = m.dim();
    if m.phi().is_riemannian() {
        return Ok(vec![0.0; n]);
    }
    let bc = covariant_beta_data(m, p)?;
    let ps = scalars_at(m, p)?;
    let a = p.alpha;
    let k = -ps.phi_big * (ps.phi - p.s * ps.dphi) / (2.0 * ps.delta * ps.phi * a * a);
    Ok((0..n)
        .map(|i| k * (a * bc.b_low[i] - p.s * bc.y_low[i]))
        .collect())
}

/// `I_i b^i = −Φ(φ − sφ′)(b² − s²)/(2ΔF)`.
pub fn mean_cartan_b_contraction(m: &MetricSpec, p: &PointState) -> Result<f64> {
    if m.phi().is_riemannian() {
        return Ok(0.0);
    }
    let ps = scalars_at(m, p)?;
    Ok(-ps.phi_big * (ps.phi - p.s * ps.dphi) * (p.b2 - p.s * p.s) / (2.0 * ps.delta * p.f))
}

pub fn mean_landsberg_closed(m: &MetricSpec, p: &PointState) -> Result<Vec<f64>> {
    let n = m.dim();
    if m.phi().is_riemannian() {
        return Ok(vec![0.0; n]);
    }
    let bc = covariant_beta_data(m, p)?;
    let ps = scalars_at(m, p)?;
    let (a, s) = (p.alpha, p.s);
    let u = p.b2 - s * s;
    let h: Vec<f64> = (0..n).map(|i| a * bc.b_low[i] - s * bc.y_low[i]).collect();
    let singular = p.b2 > 0.0 && u < 1e-12 * p.b2;
    if singular {
        return Err(Error::Regularity("flagpole is parallel to b".into()));
    }
    let pd = ps.phi_big / ps.delta;
    let q_sq = ps.q - s * ps.dq;
    let w = bc.r00 - 2.0 * a * ps.q * bc.s0;
    // both h-terms vanish with b; their quotient by b² − s² is dropped there
    let (c1, c2) = if p.b2 > 0.0 {
        (
            2.0 * a * a / u * (pd + (n as f64 + 1.0) * q_sq) * (bc.r0 + bc.s0),
            a * ps.psi1_reduced * w,
        )
    } else {
        (0.0, 0.0)
    };
    let s_low = &bc.s_j;
    Ok((0..n)
        .map(|i| {
            let inner = -a * ps.dq * bc.s0 * h[i]
                + a * ps.q * (a * a * s_low[i] - bc.y_low[i] * bc.s0)
                + a * a * ps.delta * bc.s_i0[i]
                + a * a * (bc.r_i0[i] - 2.0 * a * ps.q * s_low[i])
                - w * bc.y_low[i];
            -((c1 + c2) * h[i] + a * inner * pd) / (2.0 * ps.delta * a.powi(4))
        })
        .collect())
}

/// `J̄ = J_i b^i = −[Ψ1(r_00 − 2αQs_0) + αΨ2(r_0 + s_0)]/(2Δα²)`.
pub fn jbar(m: &MetricSpec, p: &PointState) -> Result<f64> {
    if m.phi().is_riemannian() {
        return Ok(0.0);
    }
    let bc = covariant_beta_data(m, p)?;
    let ps = scalars_at(m, p)?;
    let a = p.alpha;
    Ok(-(ps.psi1 * (bc.r00 - 2.0 * a * ps.q * bc.s0) + a * ps.psi2 * (bc.r0 + bc.s0))
        / (2.0 * ps.delta * a * a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry;

    #[test]
    fn covariant_data_of_linear_form() {
        let m = MetricSpec::euclidean_with(&["0", "x1"], PhiFamily::Randers).unwrap();
        let p = m.point(&[0.1, 0.0], &[1.0, 1.0]).unwrap();
        let bc = covariant_beta_data(&m, &p).unwrap();
        assert_eq!(bc.b_cov, vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(bc.r, vec![vec![0.0, 0.5], vec![0.5, 0.0]]);
        assert_eq!(bc.s[1][0], 0.5);
        assert_eq!(bc.s[0][1], -0.5);
        assert_eq!(bc.r00, 1.0);
    }

    #[test]
    fn randers_q_is_one() {
        for (s, b2) in [(0.0, 0.1), (0.2, 0.09), (-0.25, 0.5)] {
            let ps = phi_scalars(&PhiFamily::Randers, s, b2, 2).unwrap();
            assert!((ps.q - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn second_matsumoto_at_zero() {
        let b2 = 0.07;
        let ps = phi_scalars(&PhiFamily::second_approx_matsumoto(), 0.0, b2, 3).unwrap();
        assert!((ps.q - 1.0).abs() < 1e-14);
        assert!((ps.theta_big - 0.5 / (1.0 + 2.0 * b2)).abs() < 1e-14);
        assert!((ps.psi - 1.0 / (1.0 + 2.0 * b2)).abs() < 1e-14);
        assert!((ps.delta - (1.0 + 2.0 * b2)).abs() < 1e-14);
        let (q, t, p) = second_matsumoto_scalars(0.0, b2).unwrap();
        assert_eq!(q, 1.0);
        assert!((t - 0.5 / (1.0 + 2.0 * b2)).abs() < 1e-15);
        assert!((p - 1.0 / (1.0 + 2.0 * b2)).abs() < 1e-15);
    }

    #[test]
    fn non_regular_slope_is_rejected() {
        let r = phi_scalars(&PhiFamily::second_approx_matsumoto(), 0.8, 0.81, 2);
        assert!(matches!(r, Err(Error::Regularity(_))));
        let r = phi_scalars(&PhiFamily::Randers, 0.5, 0.1, 2);
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn closed_forms_match_definitions() {
        let m = MetricSpec::euclidean_with(&["0.1", "0.2*x1"], PhiFamily::second_approx_matsumoto()).unwrap();
        let p = m.point(&[0.3, -0.2], &[0.8, 0.5]).unwrap();
        let l = geometry::Local::new(&m, &p, &[4, 3]).unwrap();
        let close = |a: &[f64], b: &[f64], tol: f64| {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{a:?} vs {b:?}");
            }
        };
        close(&spray_closed_form(&m, &p).unwrap(), &l.spray(), 1e-10);
        close(&mean_cartan_closed(&m, &p).unwrap(), &l.mean_cartan(), 1e-10);
        close(&mean_landsberg_closed(&m, &p).unwrap(), &l.mean_landsberg(), 1e-9);
        let bc = covariant_beta_data(&m, &p).unwrap();
        let j = mean_landsberg_closed(&m, &p).unwrap();
        let contracted: f64 = j.iter().zip(&bc.b_up).map(|(a, b)| a * b).sum();
        assert!((jbar(&m, &p).unwrap() - contracted).abs() < 1e-10);
        let ib: f64 = l.mean_cartan().iter().zip(&bc.b_up).map(|(a, b)| a * b).sum();
        assert!((mean_cartan_b_contraction(&m, &p).unwrap() - ib).abs() < 1e-10);
    }
}
