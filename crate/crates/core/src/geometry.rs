//! Definitional Finsler quantities.
//!
//! Everything here is derived from a single Taylor jet of `F²` at a point of
//! the slit tangent bundle. The fundamental tensor, its inverse and the spray
//! are kept as jets, so every further derivative (Berwald, Riemann, horizontal
//! derivatives of the mean Cartan torsion) is exact.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jets::{coordinate_jets, Jet, Layout};
use crate::linalg::{invert, Matrix};
use crate::metric::{MetricSpec, PointState};

pub type Tensor3 = Vec<Vec<Vec<f64>>>;
pub type Tensor4 = Vec<Vec<Vec<Vec<f64>>>>;

/// Jet caps of `F²` sufficient for every quantity in a [`CurvatureBundle`].
pub const BUNDLE_CAPS: [usize; 3] = [6, 5, 3];

/// Jets of `F²`, `g`, `g⁻¹` and the spray around one point.
pub struct Local {
    n: usize,
    y: Vec<f64>,
    ys: Vec<Jet>,
    f2: Jet,
    g: Matrix<Jet>,
    g_inv: Matrix<Jet>,
    spray: Option<Vec<Jet>>,
}

impl Local {
    /// Expands `F²` over the staircase `caps` (see [`crate::jets`]). The spray
    /// is only available when `caps` has at least two entries.
    pub fn new(m: &MetricSpec, p: &PointState, caps: &[usize]) -> Result<Local> {
        let n = m.dim();
        let layout = Layout::get(n, n, caps);
        let (_, ys) = coordinate_jets(&layout, &p.x, &p.y);
        let f2 = m.f2_jet(&p.x, &p.y, caps)?;
        let g: Matrix<Jet> = (0..n)
            .map(|i| {
                let di = f2.dy(i);
                (0..n).map(|j| di.dy(j).scale(0.5)).collect()
            })
            .collect();
        let g_inv = invert(&g).map_err(|_| {
            Error::Regularity("fundamental tensor is singular".into())
        })?;
        let spray = if layout.caps().len() >= 2 {
            let w: Vec<Jet> = (0..n)
                .map(|l| {
                    let fl = f2.dy(l);
                    (0..n).fold(-&f2.dx(l), |acc, k| &acc + &(&ys[k] * &fl.dx(k)))
                })
                .collect();
            Some(
                (0..n)
                    .map(|i| {
                        (1..n)
                            .fold(&g_inv[i][0] * &w[0], |acc, l| &acc + &(&g_inv[i][l] * &w[l]))
                            .scale(0.25)
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok(Local {
            n,
            y: p.y.clone(),
            ys,
            f2,
            g,
            g_inv,
            spray,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn f2(&self) -> &Jet {
        &self.f2
    }

    pub fn g_jets(&self) -> &Matrix<Jet> {
        &self.g
    }

    pub fn spray_jets(&self) -> &[Jet] {
        self.spray
            .as_deref()
            .expect("spray needs an x-order in the jet caps")
    }

    pub fn g(&self) -> Matrix<f64> {
        values2(&self.g)
    }

    pub fn g_inv(&self) -> Matrix<f64> {
        values2(&self.g_inv)
    }

    pub fn angular_metric(&self) -> Matrix<f64> {
        let g = self.g();
        let f2 = self.f2.value();
        let gy: Vec<f64> = (0..self.n)
            .map(|i| (0..self.n).map(|p| g[i][p] * self.y[p]).sum())
            .collect();
        (0..self.n)
            .map(|i| (0..self.n).map(|j| g[i][j] - gy[i] * gy[j] / f2).collect())
            .collect()
    }

    pub fn cartan(&self) -> Tensor3 {
        let n = self.n;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let gij = &self.g[i][j];
                        (0..n).map(|k| 0.5 * gij.dy(k).value()).collect()
                    })
                    .collect()
            })
            .collect()
    }

    /// `I_i = g^{jk} C_ijk` as jets.
    pub fn mean_cartan_jets(&self) -> Vec<Jet> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut acc: Option<Jet> = None;
                for j in 0..n {
                    for k in 0..n {
                        let t = &self.g_inv[j][k] * &self.g[j][k].dy(i);
                        acc = Some(match acc {
                            None => t,
                            Some(a) => &a + &t,
                        });
                    }
                }
                acc.unwrap().scale(0.5)
            })
            .collect()
    }

    pub fn mean_cartan(&self) -> Vec<f64> {
        self.mean_cartan_jets().iter().map(Jet::value).collect()
    }

    pub fn spray(&self) -> Vec<f64> {
        self.spray_jets().iter().map(Jet::value).collect()
    }

    pub fn nonlinear_connection(&self) -> Matrix<f64> {
        let g = self.spray_jets();
        (0..self.n)
            .map(|i| (0..self.n).map(|j| g[i].partial_xy(&[], &[j])).collect())
            .collect()
    }

    pub fn berwald(&self) -> Tensor4 {
        berwald_of(self.spray_jets())
    }

    pub fn mean_berwald(&self) -> Matrix<f64> {
        mean_berwald_of(self.spray_jets())
    }

    pub fn douglas(&self) -> Tensor4 {
        douglas_of(self.spray_jets(), &self.y)
    }

    pub fn riemann(&self) -> Matrix<f64> {
        let n = self.n;
        let g = self.spray_jets();
        let mut r = vec![vec![0.0; n]; n];
        for i in 0..n {
            for k in 0..n {
                let mut v = 2.0 * g[i].partial_xy(&[k], &[]);
                for j in 0..n {
                    v -= self.y[j] * g[i].partial_xy(&[j], &[k]);
                    v += 2.0 * g[j].value() * g[i].partial_xy(&[], &[j, k]);
                    v -= g[i].partial_xy(&[], &[j]) * g[j].partial_xy(&[], &[k]);
                }
                r[i][k] = v;
            }
        }
        r
    }

    /// Horizontal derivative `T_{i|m} y^m` of a covector field given as jets.
    fn horizontal(&self, t: &[Jet]) -> Vec<Jet> {
        let n = self.n;
        let g = self.spray_jets();
        let conn: Vec<Vec<Jet>> = (0..n)
            .map(|m| (0..n).map(|i| g[m].dy(i)).collect())
            .collect();
        (0..n)
            .map(|i| {
                let mut acc = &self.ys[0] * &t[i].dx(0);
                for m in 0..n {
                    if m > 0 {
                        acc = &acc + &(&self.ys[m] * &t[i].dx(m));
                    }
                    acc = &acc - &(&g[m] * &t[i].dy(m)).scale(2.0);
                    acc = &acc - &(&t[m] * &conn[m][i]);
                }
                acc
            })
            .collect()
    }

    /// Mean Landsberg curvature as jets.
    pub fn mean_landsberg_jets(&self) -> Vec<Jet> {
        self.horizontal(&self.mean_cartan_jets())
    }

    pub fn mean_landsberg(&self) -> Vec<f64> {
        self.mean_landsberg_jets().iter().map(Jet::value).collect()
    }

    /// `max_i |J_{i;m} y^m + K F² I_i|`.
    pub fn akbar_zadeh_residual(&self, k: f64) -> f64 {
        let j = self.mean_landsberg_jets();
        let dj = self.horizontal(&j);
        let i = self.mean_cartan();
        let f2 = self.f2.value();
        (0..self.n)
            .map(|a| (dj[a].value() + k * f2 * i[a]).abs())
            .fold(0.0, f64::max)
    }
}

fn values2(m: &Matrix<Jet>) -> Matrix<f64> {
    m.iter().map(|r| r.iter().map(Jet::value).collect()).collect()
}

/// `B^i_jkl = ∂³G^i/∂y^j∂y^k∂y^l` of an arbitrary spray given as jets.
pub fn berwald_of(spray: &[Jet]) -> Tensor4 {
    let n = spray.len();
    spray
        .iter()
        .map(|gi| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| (0..n).map(|l| gi.partial_xy(&[], &[j, k, l])).collect())
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `E_jk = ½ B^m_jkm`.
pub fn mean_berwald_of(spray: &[Jet]) -> Matrix<f64> {
    let n = spray.len();
    (0..n)
        .map(|j| {
            (0..n)
                .map(|k| 0.5 * (0..n).map(|m| spray[m].partial_xy(&[], &[j, k, m])).sum::<f64>())
                .collect()
        })
        .collect()
}

/// Douglas curvature of an arbitrary spray given as jets at fiber point `y`.
pub fn douglas_of(spray: &[Jet], y: &[f64]) -> Tensor4 {
    let n = spray.len();
    let b = berwald_of(spray);
    let e = mean_berwald_of(spray);
    let de = |j: usize, k: usize, l: usize| -> f64 {
        0.5 * (0..n)
            .map(|m| spray[m].partial_xy(&[], &[j, k, m, l]))
            .sum::<f64>()
    };
    let c = 2.0 / (n as f64 + 1.0);
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut d = b.clone();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    d[i][j][k][l] -= c
                        * (e[j][k] * delta(i, l)
                            + e[j][l] * delta(i, k)
                            + e[k][l] * delta(i, j)
                            + de(j, k, l) * y[i]);
                }
            }
        }
    }
    d
}

/// Flag curvature from `g` and `R` at flagpole `y` with transverse `u`.
/// `u` is first made `g`-orthogonal to `y`.
pub fn flag_curvature_with(g: &Matrix<f64>, r: &Matrix<f64>, y: &[f64], u: &[f64]) -> Result<f64> {
    let n = y.len();
    let gf = |a: &[f64], b: &[f64]| -> f64 {
        (0..n)
            .map(|i| (0..n).map(|j| g[i][j] * a[i] * b[j]).sum::<f64>())
            .sum()
    };
    let yy = gf(y, y);
    let uu0 = gf(u, u);
    let t = gf(y, u) / yy;
    let w: Vec<f64> = (0..n).map(|i| u[i] - t * y[i]).collect();
    let ww = gf(&w, &w);
    if !(ww > 1e-12 * uu0) {
        return Err(Error::DegenerateFlag);
    }
    let rw: Vec<f64> = (0..n)
        .map(|i| (0..n).map(|k| r[i][k] * w[k]).sum())
        .collect();
    Ok(gf(&w, &rw) / (yy * ww))
}

/// Every definitional quantity at one point.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureBundle {
    pub g: Matrix<f64>,
    pub g_inv: Matrix<f64>,
    pub h: Matrix<f64>,
    pub c: Tensor3,
    pub i: Vec<f64>,
    pub spray: Vec<f64>,
    pub n: Matrix<f64>,
    pub b: Tensor4,
    pub e: Matrix<f64>,
    pub d: Tensor4,
    pub r: Matrix<f64>,
    pub j: Vec<f64>,
    /// Definitional S-curvature; only available where the volume quadrature is (n ≤ 3).
    pub s: Option<f64>,
}

pub fn curvature_bundle(m: &MetricSpec, p: &PointState) -> Result<CurvatureBundle> {
    let l = Local::new(m, p, &BUNDLE_CAPS)?;
    let s = if m.dim() <= 3 {
        Some(crate::volume::s_curvature_definitional(
            m,
            p,
            crate::volume::DEFAULT_RESOLUTION,
        )?)
    } else {
        None
    };
    Ok(CurvatureBundle {
        g: l.g(),
        g_inv: l.g_inv(),
        h: l.angular_metric(),
        c: l.cartan(),
        i: l.mean_cartan(),
        spray: l.spray(),
        n: l.nonlinear_connection(),
        b: l.berwald(),
        e: l.mean_berwald(),
        d: l.douglas(),
        r: l.riemann(),
        j: l.mean_landsberg(),
        s,
    })
}

pub fn fundamental_tensor(m: &MetricSpec, p: &PointState) -> Result<Matrix<f64>> {
    let l = Local::new(m, p, &[2])?;
    let g = l.g();
    crate::linalg::cholesky(&g)
        .map_err(|_| Error::Regularity("fundamental tensor is not positive definite".into()))?;
    Ok(g)
}

pub fn cartan_torsion(m: &MetricSpec, p: &PointState) -> Result<Tensor3> {
    Ok(Local::new(m, p, &[3])?.cartan())
}

pub fn mean_cartan(m: &MetricSpec, p: &PointState) -> Result<Vec<f64>> {
    Ok(Local::new(m, p, &[3])?.mean_cartan())
}

pub fn spray(m: &MetricSpec, p: &PointState) -> Result<Vec<f64>> {
    Ok(Local::new(m, p, &[2, 1])?.spray())
}

pub fn nonlinear_connection(m: &MetricSpec, p: &PointState) -> Result<Matrix<f64>> {
    Ok(Local::new(m, p, &[3, 2])?.nonlinear_connection())
}

pub fn berwald_curvature(m: &MetricSpec, p: &PointState) -> Result<Tensor4> {
    Ok(Local::new(m, p, &[5, 4])?.berwald())
}

pub fn mean_berwald(m: &MetricSpec, p: &PointState) -> Result<Matrix<f64>> {
    Ok(Local::new(m, p, &[5, 4])?.mean_berwald())
}

pub fn douglas_curvature(m: &MetricSpec, p: &PointState) -> Result<Tensor4> {
    Ok(Local::new(m, p, &[6, 5])?.douglas())
}

pub fn riemann_curvature(m: &MetricSpec, p: &PointState) -> Result<Matrix<f64>> {
    Ok(Local::new(m, p, &[4, 3, 2])?.riemann())
}

pub fn flag_curvature(m: &MetricSpec, p: &PointState, u: &[f64]) -> Result<f64> {
    if u.len() != m.dim() {
        return Err(Error::Argument("transverse vector has the wrong length".into()));
    }
    let l = Local::new(m, p, &[4, 3, 2])?;
    flag_curvature_with(&l.g(), &l.riemann(), &p.y, u)
}

pub fn mean_landsberg(m: &MetricSpec, p: &PointState) -> Result<Vec<f64>> {
    Ok(Local::new(m, p, &[4, 3])?.mean_landsberg())
}

pub fn angular_metric(m: &MetricSpec, p: &PointState) -> Result<Matrix<f64>> {
    Ok(Local::new(m, p, &[2])?.angular_metric())
}

/// `max_i |J_{i;m} y^m + K F² I_i|` for a metric of constant flag curvature `k`.
pub fn akbar_zadeh_residual(m: &MetricSpec, p: &PointState, k: f64) -> Result<f64> {
    Ok(Local::new(m, p, &[5, 4, 3])?.akbar_zadeh_residual(k))
}

/// Largest absolute entry of a nested tensor.
pub trait MaxAbs {
    fn max_abs(&self) -> f64;
}

impl MaxAbs for f64 {
    fn max_abs(&self) -> f64 {
        self.abs()
    }
}

impl<T: MaxAbs> MaxAbs for [T] {
    fn max_abs(&self) -> f64 {
        self.iter().map(MaxAbs::max_abs).fold(0.0, f64::max)
    }
}

impl<T: MaxAbs> MaxAbs for Vec<T> {
    fn max_abs(&self) -> f64 {
        self.as_slice().max_abs()
    }
}
