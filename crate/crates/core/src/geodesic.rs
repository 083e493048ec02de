//! Geodesics of the spray, `ẍ^i + 2 G^i(x, ẋ) = 0`, by classical RK4.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Local;
use crate::metric::MetricSpec;

/// Relative drift of `F(x, ẋ)` tolerated before integration is abandoned.
pub const MAX_SPEED_DRIFT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicRow {
    pub t: f64,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// `F(x, v)`, constant along an exact geodesic.
    pub speed: f64,
}

fn accel(m: &MetricSpec, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let p = m.point(x, v)?;
    let g = Local::new(m, &p, &[2, 1])?.spray();
    Ok(g.into_iter().map(|gi| -2.0 * gi).collect())
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| yi + a * xi).collect()
}

/// Integrates from `(x0, v0)` for `steps` steps of size `step`, returning one
/// row per step including the initial state.
pub fn integrate(m: &MetricSpec, x0: &[f64], v0: &[f64], step: f64, steps: usize) -> Result<Vec<GeodesicRow>> {
    let n = m.dim();
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Argument(format!("step must be positive, got {step}")));
    }
    if x0.len() != n || v0.len() != n {
        return Err(Error::Argument(format!("initial data must have dimension {n}")));
    }
    let fail = |t: f64, e: &dyn std::fmt::Display| Error::Integration {
        t_last: t,
        message: e.to_string(),
    };
    let speed0 = m.eval_f(x0, v0).map_err(|e| fail(0.0, &e))?;
    let mut rows = vec![GeodesicRow {
        t: 0.0,
        x: x0.to_vec(),
        v: v0.to_vec(),
        speed: speed0,
    }];
    let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
    for k in 0..steps {
        let t = k as f64 * step;
        let next = (|| -> Result<(Vec<f64>, Vec<f64>)> {
            let a1 = accel(m, &x, &v)?;
            let (x2, v2) = (axpy(0.5 * step, &v, &x), axpy(0.5 * step, &a1, &v));
            let a2 = accel(m, &x2, &v2)?;
            let (x3, v3) = (axpy(0.5 * step, &v2, &x), axpy(0.5 * step, &a2, &v));
            let a3 = accel(m, &x3, &v3)?;
            let (x4, v4) = (axpy(step, &v3, &x), axpy(step, &a3, &v));
            let a4 = accel(m, &x4, &v4)?;
            let comb = |base: &[f64], k1: &[f64], k2: &[f64], k3: &[f64], k4: &[f64]| -> Vec<f64> {
                (0..n)
                    .map(|i| base[i] + step / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
                    .collect()
            };
            Ok((comb(&x, &v, &v2, &v3, &v4), comb(&v, &a1, &a2, &a3, &a4)))
        })();
        let (xn, vn) = next.map_err(|e| fail(t, &e))?;
        if xn.iter().chain(&vn).any(|c| !c.is_finite()) {
            return Err(fail(t, &"non-finite state"));
        }
        let speed = m.eval_f(&xn, &vn).map_err(|e| fail(t, &e))?;
        if !speed.is_finite() || (speed - speed0).abs() > MAX_SPEED_DRIFT * speed0.abs().max(1e-300) {
            return Err(fail(t, &format!("speed drifted from {speed0} to {speed}")));
        }
        x = xn;
        v = vn;
        rows.push(GeodesicRow {
            t: t + step,
            x: x.clone(),
            v: v.clone(),
            speed,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PhiFamily;

    fn sphere() -> MetricSpec {
        let c = "1/(1+(x1^2+x2^2)/4)^2";
        MetricSpec::from_strings(&[&[c, "0"], &["0", c]], &["0", "0"], PhiFamily::Riemannian).unwrap()
    }

    #[test]
    fn equator_closes_after_full_turn() {
        let m = sphere();
        let steps = 2000;
        let h = 2.0 * std::f64::consts::PI / steps as f64;
        let rows = integrate(&m, &[2.0, 0.0], &[0.0, 2.0], h, steps).unwrap();
        let last = rows.last().unwrap();
        assert!((last.x[0] - 2.0).abs() < 1e-8 && last.x[1].abs() < 1e-8, "{:?}", last.x);
        for r in &rows {
            assert!(((r.x[0].powi(2) + r.x[1].powi(2)).sqrt() - 2.0).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_bad_step() {
        assert!(matches!(
            integrate(&sphere(), &[0.0, 0.0], &[1.0, 0.0], 0.0, 10),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn escape_to_infinity_is_reported() {
        let rows = integrate(&sphere(), &[0.0, 0.0], &[1.0, 0.0], 0.01, 1000);
        match rows {
            Err(Error::Integration { t_last, .. }) => assert!(t_last > 1.0),
            other => panic!("{other:?}"),
        }
    }
}
