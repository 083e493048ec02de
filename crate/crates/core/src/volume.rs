//! Busemann–Hausdorff volume and the definitional S-curvature.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Local;
use crate::linalg::cholesky;
use crate::metric::{MetricSpec, PhiFamily, PointState};

/// Quadrature resolution used when the caller does not pick one.
pub const DEFAULT_RESOLUTION: usize = 64;

/// Finite-difference step for `∂ ln σ_F / ∂x`.
pub const GRADIENT_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolumeData {
    /// `σ_F(x) = Vol(Bⁿ) / Vol{F(x, ·) < 1}`
    pub sigma_f: f64,
    /// `√det a(x)`
    pub sigma_alpha: f64,
    pub ratio: f64,
    /// Difference to the same quadrature at half the resolution.
    pub quadrature_error_estimate: f64,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    if k == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    let kf = k as f64;
    for i in 0..(k + 1) / 2 {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (kf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=k {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            dp = kf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[k - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[k - 1 - i] = w;
    }
    (nodes, weights)
}

struct Indicatrix<'a> {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    b2: f64,
    phi: &'a PhiFamily,
}

impl Indicatrix<'_> {
    /// `F(x, θ)^{-n}` for a Euclidean unit vector θ.
    fn radius_pow(&self, t: &[f64]) -> Result<f64> {
        let n = t.len();
        let alpha2: f64 = (0..n)
            .map(|i| (0..n).map(|j| self.a[i][j] * t[i] * t[j]).sum::<f64>())
            .sum();
        let alpha = alpha2.sqrt();
        let phi = if self.phi.is_riemannian() {
            self.phi.coefficients().unwrap()[0]
        } else {
            let s = self.b.iter().zip(t).map(|(b, y)| b * y).sum::<f64>() / alpha;
            self.phi.check_regular(s, self.b2)?;
            self.phi.derivatives(s)?[0]
        };
        let f = alpha * phi;
        if !(f > 0.0) || !f.is_finite() {
            return Err(Error::Regularity("indicatrix is not star-shaped".into()));
        }
        Ok(f.powi(-(n as i32)))
    }
}

fn unit_ball_volume(n: usize) -> f64 {
    match n {
        2 => std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI / 3.0,
    }
}

/// `Vol{F(x, ·) < 1} = (1/n) ∮ F(x, θ)^{-n} dθ`.
fn indicatrix_volume(ind: &Indicatrix, n: usize, resolution: usize) -> Result<f64> {
    use std::f64::consts::PI;
    if n == 2 {
        let k = 4 * resolution;
        let h = 2.0 * PI / k as f64;
        let mut sum = 0.0;
        for i in 0..k {
            let t = i as f64 * h;
            sum += ind.radius_pow(&[t.cos(), t.sin()])?;
        }
        return Ok(sum * h / 2.0);
    }
    let (u, w) = gauss_legendre(resolution);
    let k = 2 * resolution;
    let h = 2.0 * PI / k as f64;
    let rings: Vec<f64> = (0..resolution)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let r = (1.0 - u[i] * u[i]).sqrt();
            let mut ring = 0.0;
            for j in 0..k {
                let t = j as f64 * h;
                ring += ind.radius_pow(&[r * t.cos(), r * t.sin(), u[i]])?;
            }
            Ok(w[i] * ring * h)
        })
        .collect::<Result<_>>()?;
    Ok(rings.iter().sum::<f64>() / 3.0)
}

fn indicatrix<'a>(m: &'a MetricSpec, x: &[f64]) -> Result<(Indicatrix<'a>, f64)> {
    let a = m.a_at(x)?;
    let l = cholesky(&a)?;
    let det_sqrt: f64 = (0..l.len()).map(|i| l[i][i]).product();
    let b = m.b_at(x)?;
    let b2 = m.b_norm2(x)?;
    if b2 >= 1.0 {
        return Err(Error::Regularity(format!("b² = {b2} must be below 1")));
    }
    Ok((
        Indicatrix {
            a,
            b,
            b2,
            phi: m.phi(),
        },
        det_sqrt,
    ))
}

fn check_resolution(m: &MetricSpec, resolution: usize) -> Result<()> {
    if resolution == 0 {
        return Err(Error::Argument("quadrature resolution must be positive".into()));
    }
    if m.dim() > 3 {
        return Err(Error::Argument(format!(
            "volume quadrature supports dimensions 2 and 3, got {}",
            m.dim()
        )));
    }
    Ok(())
}

fn ln_sigma(m: &MetricSpec, x: &[f64], resolution: usize) -> Result<f64> {
    let (ind, _) = indicatrix(m, x)?;
    let v = indicatrix_volume(&ind, m.dim(), resolution)?;
    Ok(unit_ball_volume(m.dim()).ln() - v.ln())
}

pub fn bh_volume_coefficient(m: &MetricSpec, x: &[f64], resolution: usize) -> Result<VolumeData> {
    check_resolution(m, resolution)?;
    let n = m.dim();
    let (ind, sigma_alpha) = indicatrix(m, x)?;
    let v = indicatrix_volume(&ind, n, resolution)?;
    let coarse = indicatrix_volume(&ind, n, resolution.div_ceil(2))?;
    let sigma_f = unit_ball_volume(n) / v;
    Ok(VolumeData {
        sigma_f,
        sigma_alpha,
        ratio: sigma_f / sigma_alpha,
        quadrature_error_estimate: (sigma_f - unit_ball_volume(n) / coarse).abs(),
    })
}

/// `∂ ln σ_F / ∂x^i` by Richardson-extrapolated central differences.
pub fn ln_sigma_gradient(m: &MetricSpec, x: &[f64], resolution: usize) -> Result<Vec<f64>> {
    check_resolution(m, resolution)?;
    let n = m.dim();
    (0..n)
        .map(|i| {
            let diff = |h: f64| -> Result<f64> {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                Ok((ln_sigma(m, &xp, resolution)? - ln_sigma(m, &xm, resolution)?) / (2.0 * h))
            };
            let coarse = diff(GRADIENT_STEP)?;
            let fine = diff(GRADIENT_STEP / 2.0)?;
            Ok((4.0 * fine - coarse) / 3.0)
        })
        .collect()
}

/// `S = ∂G^i/∂y^i − y^i ∂_i ln σ_F` given a precomputed volume gradient.
pub fn s_curvature_with_gradient(m: &MetricSpec, p: &PointState, grad: &[f64]) -> Result<f64> {
    let l = Local::new(m, p, &[3, 2])?;
    let g = l.spray_jets();
    let div: f64 = (0..m.dim()).map(|i| g[i].partial_xy(&[], &[i])).sum();
    Ok(div - p.y.iter().zip(grad).map(|(y, d)| y * d).sum::<f64>())
}

pub fn s_curvature_definitional(m: &MetricSpec, p: &PointState, resolution: usize) -> Result<f64> {
    let grad = ln_sigma_gradient(m, &p.x, resolution)?;
    s_curvature_with_gradient(m, p, &grad)
}

/// λ at a base point together with a cross-check of the one-dimensional
/// volume function against the full quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaEstimate {
    pub lambda: f64,
    pub b: f64,
    /// `f(b)` from the one-dimensional integral.
    pub f: f64,
    /// `|f(b) − σ_F/σ_α|`, available when the full quadrature is (n ≤ 3).
    pub residual: Option<f64>,
}

const VOLUME_FUNCTION_NODES: usize = 96;

/// `f(b) = ∫₀^π sin^{n−2}t dt / ∫₀^π φ(b cos t)^{−n} sin^{n−2}t dt` and `f′(b)`.
pub fn volume_function(phi: &PhiFamily, n: usize, b: f64) -> Result<(f64, f64)> {
    use std::f64::consts::PI;
    let (u, w) = gauss_legendre(VOLUME_FUNCTION_NODES);
    let (mut top, mut bot, mut dbot) = (0.0, 0.0, 0.0);
    let nf = n as f64;
    for (ui, wi) in u.iter().zip(&w) {
        let t = 0.5 * PI * (ui + 1.0);
        let wt = 0.5 * PI * wi * t.sin().powi(n as i32 - 2);
        let s = b * t.cos();
        let [p0, p1, _] = phi.derivatives(s)?;
        if !(p0 > 0.0) {
            return Err(Error::Regularity(format!("φ({s}) must be positive")));
        }
        top += wt;
        bot += wt * p0.powf(-nf);
        dbot += wt * (-nf) * p0.powf(-nf - 1.0) * p1 * t.cos();
    }
    let f = top / bot;
    Ok((f, -top * dbot / (bot * bot)))
}

/// `λ = −f′(b) / (2b f(b))`.
pub fn lambda_from_volume(m: &MetricSpec, x: &[f64]) -> Result<LambdaEstimate> {
    let b2 = m.b_norm2(x)?;
    let b = b2.sqrt();
    if m.phi().is_riemannian() || b < 1e-12 {
        return Err(Error::Domain("λ is undefined where b = 0".into()));
    }
    let (f, df) = volume_function(m.phi(), m.dim(), b)?;
    let residual = if m.dim() <= 3 {
        Some((bh_volume_coefficient(m, x, DEFAULT_RESOLUTION)?.ratio - f).abs())
    } else {
        None
    };
    Ok(LambdaEstimate {
        lambda: -df / (2.0 * b * f),
        b,
        f,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (u, w) = gauss_legendre(5);
        let int: f64 = u.iter().zip(&w).map(|(x, w)| w * x.powi(8)).sum();
        assert!((int - 2.0 / 9.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn euclidean_volume() {
        for n in [2, 3] {
            let b = vec!["0"; n];
            let m = MetricSpec::euclidean_with(&b, PhiFamily::Riemannian).unwrap();
            let v = bh_volume_coefficient(&m, &vec![0.1; n], 16).unwrap();
            assert!((v.sigma_f - 1.0).abs() < 1e-13 && (v.ratio - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn randers_ratio() {
        let m = MetricSpec::euclidean_with(&["0.5", "0"], PhiFamily::Randers).unwrap();
        let v = bh_volume_coefficient(&m, &[0.0, 0.0], 32).unwrap();
        assert!((v.ratio - 0.75f64.powf(1.5)).abs() < 1e-12);
        let (f, _) = volume_function(&PhiFamily::Randers, 2, 0.5).unwrap();
        assert!((f - 0.75f64.powf(1.5)).abs() < 1e-12);
        assert!(matches!(bh_volume_coefficient(&m, &[0.0, 0.0], 0), Err(Error::Argument(_))));
    }

    #[test]
    fn randers_lambda_closed_form() {
        // f = (1 − b²)^{(n+1)/2} for Randers, so λ = (n+1)/(2(1 − b²))
        let m = MetricSpec::euclidean_with(&["0.3", "0.4", "0"], PhiFamily::Randers).unwrap();
        let l = lambda_from_volume(&m, &[0.0; 3]).unwrap();
        assert!((l.lambda - 2.0 / 0.75).abs() < 1e-12, "{l:?}");
        assert!(l.residual.unwrap() < 1e-10);
        let r = MetricSpec::euclidean_with(&["0", "0"], PhiFamily::Randers).unwrap();
        assert!(matches!(lambda_from_volume(&r, &[0.0, 0.0]), Err(Error::Domain(_))));
    }
}
