//! Sample-based classification of a metric into the named curvature classes.
//!
//! Residuals are max-norms over the supplied states. Each compared quantity
//! is multiplied by the power of `F` that makes it 0-homogeneous in `y`, so
//! residuals do not depend on the length of the sample directions.

use rayon::prelude::*;
use serde::Serialize;

use crate::alphabeta::{covariant_beta_data, s_curvature_closed, LambdaSource};
use crate::error::{Error, Result};
use crate::geometry::{flag_curvature_with, Local, MaxAbs, Tensor4, BUNDLE_CAPS};
use crate::linalg::{least_squares, Matrix};
use crate::metric::{MetricSpec, PointState};
use crate::volume::{ln_sigma_gradient, s_curvature_with_gradient, DEFAULT_RESOLUTION};

/// Fewest directions per base point accepted by [`classify_at_points`].
pub const MIN_DIRECTIONS: usize = 20;

pub const DEFAULT_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Flag {
    pub holds: bool,
    pub residual: f64,
}

impl Flag {
    fn new(residual: f64, tol: f64) -> Flag {
        Flag {
            holds: residual <= tol,
            residual,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Flags {
    pub riemannian: Flag,
    pub berwald: Flag,
    pub weakly_berwald: Flag,
    pub douglas: Flag,
    pub weakly_landsberg: Flag,
    pub killing_beta: Flag,
    pub parallel_beta: Flag,
}

/// A fit of `c(x)`, one estimate per base point.
#[derive(Debug, Clone, Serialize)]
pub struct IsotropicFit {
    pub c: Vec<f64>,
    pub residual: f64,
    pub holds: bool,
}

/// Fit of `K = w_m y^m / F + σ` with `w = 3 dc`.
#[derive(Debug, Clone, Serialize)]
pub struct FlagCurvatureFit {
    /// `∂c/∂x^m = w_m / 3` per base point.
    pub c_gradient: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
    pub residual: f64,
    pub holds: bool,
    /// Antisymmetric part of the affine fit of `w(x)` across base points;
    /// reported only, not part of `holds`.
    pub closedness: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fits {
    pub isotropic_s: IsotropicFit,
    pub isotropic_e: IsotropicFit,
    /// Isotropic-E residual with `c(x)` taken from the isotropic-S fit.
    pub isotropic_e_with_s_c: f64,
    pub isotropic_berwald: IsotropicFit,
    pub almost_isotropic_flag: FlagCurvatureFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum LemmaBranch {
    /// `r_ij = ε(b² a_ij − b_i b_j)`, `s_j = 0`
    Cs1 { epsilon: Vec<f64>, residual: f64 },
    /// `r_ij = 0`, `s_j = 0`; then `c = 0`.
    Cs2 { residual: f64 },
    None { residual: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassificationReport {
    pub tol: f64,
    pub base_points: Vec<Vec<f64>>,
    pub samples: usize,
    pub flags: Flags,
    pub fits: Fits,
    pub lemma_branch: LemmaBranch,
}

struct SampleData {
    y: Vec<f64>,
    f: f64,
    s: f64,
    g: Matrix<f64>,
    h: Matrix<f64>,
    i: Vec<f64>,
    b: Tensor4,
    e: Matrix<f64>,
    d: Tensor4,
    r: Matrix<f64>,
    j: Vec<f64>,
    /// `F_{y^j y^k}` and `F_{y^j y^k y^l}`
    f2: Matrix<f64>,
    f3: Vec<Matrix<f64>>,
    r00: f64,
    b_cov: Matrix<f64>,
}

fn sample_data(m: &MetricSpec, p: &PointState, grad: Option<&[f64]>) -> Result<SampleData> {
    let n = m.dim();
    let l = Local::new(m, p, &BUNDLE_CAPS)?;
    let fj = m.f_jet(&p.x, &p.y, &[3])?;
    let s = match grad {
        Some(g) => s_curvature_with_gradient(m, p, g)?,
        None => s_curvature_closed(m, p, LambdaSource::Volume)?,
    };
    let bc = covariant_beta_data(m, p)?;
    Ok(SampleData {
        y: p.y.clone(),
        f: p.f,
        s,
        g: l.g(),
        h: l.angular_metric(),
        i: l.mean_cartan(),
        b: l.berwald(),
        e: l.mean_berwald(),
        d: l.douglas(),
        r: l.riemann(),
        j: l.mean_landsberg(),
        f2: (0..n)
            .map(|j| (0..n).map(|k| fj.partial_xy(&[], &[j, k])).collect())
            .collect(),
        f3: (0..n)
            .map(|j| {
                (0..n)
                    .map(|k| (0..n).map(|l| fj.partial_xy(&[], &[j, k, l])).collect())
                    .collect()
            })
            .collect(),
        r00: bc.r00,
        b_cov: bc.b_cov,
    })
}

/// Groups states by base point, keeping first-appearance order.
fn group(sample: &[PointState]) -> Vec<(Vec<f64>, Vec<usize>)> {
    let mut groups: Vec<(Vec<f64>, Vec<usize>)> = Vec::new();
    for (k, p) in sample.iter().enumerate() {
        match groups.iter_mut().find(|(x, _)| *x == p.x) {
            Some((_, idx)) => idx.push(k),
            None => groups.push((p.x.clone(), vec![k])),
        }
    }
    groups
}

/// One-parameter least squares `min |a − c·p|` over paired entries.
fn fit_scalar(pairs: impl Iterator<Item = (f64, f64)> + Clone) -> (f64, f64) {
    let (num, den) = pairs
        .clone()
        .fold((0.0, 0.0), |(n, d), (a, p)| (n + a * p, d + p * p));
    let c = if den > 0.0 { num / den } else { 0.0 };
    let res = pairs.map(|(a, p)| (a - c * p).abs()).fold(0.0, f64::max);
    (c, res)
}

fn delta(a: usize, b: usize) -> f64 {
    if a == b {
        1.0
    } else {
        0.0
    }
}

fn ibc_pattern(d: &SampleData, n: usize) -> Tensor4 {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|k| {
                            (0..n)
                                .map(|l| {
                                    d.f2[j][k] * delta(i, l)
                                        + d.f2[k][l] * delta(i, j)
                                        + d.f2[l][j] * delta(i, k)
                                        + d.f3[j][k][l] * d.y[i]
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn flatten4(t: &Tensor4) -> Vec<f64> {
    t.iter().flatten().flatten().flatten().copied().collect()
}

fn flatten2(t: &Matrix<f64>) -> Vec<f64> {
    t.iter().flatten().copied().collect()
}

/// Flag-curvature observations `(y, F, K)` at one base point.
fn flag_observations(data: &[&SampleData]) -> Vec<(Vec<f64>, f64, f64)> {
    let mut out = Vec::new();
    for d in data {
        let n = d.y.len();
        for k in 0..n {
            let u: Vec<f64> = (0..n).map(|i| delta(i, k)).collect();
            if let Ok(kv) = flag_curvature_with(&d.g, &d.r, &d.y, &u) {
                out.push((d.y.clone(), d.f, kv));
            }
        }
    }
    out
}

/// Least-squares fit of `K = w·y/F + σ`; returns `(w, σ, residual)`.
fn fit_flag_form(obs: &[(Vec<f64>, f64, f64)], n: usize) -> Result<(Vec<f64>, f64, f64)> {
    if obs.len() < 2 * n {
        return Err(Error::Argument(format!(
            "flag-curvature fit needs at least {} flags per base point, got {}",
            2 * n,
            obs.len()
        )));
    }
    let rows: Vec<Vec<f64>> = obs
        .iter()
        .map(|(y, f, _)| y.iter().map(|v| v / f).chain(std::iter::once(1.0)).collect())
        .collect();
    let rhs: Vec<f64> = obs.iter().map(|o| o.2).collect();
    let coef = least_squares(&rows, &rhs)
        .map_err(|_| Error::Argument("degenerate flag set".into()))?;
    let residual = rows
        .iter()
        .zip(&rhs)
        .map(|(r, k)| (r.iter().zip(&coef).map(|(a, c)| a * c).sum::<f64>() - k).abs())
        .fold(0.0, f64::max);
    Ok((coef[..n].to_vec(), coef[n], residual))
}

/// Antisymmetric part of `∂w_i/∂x^j` from an affine fit over base points.
fn closedness(bases: &[Vec<f64>], w: &[Vec<f64>]) -> Option<f64> {
    let n = bases.first()?.len();
    if bases.len() < n + 2 {
        return None;
    }
    let rows: Vec<Vec<f64>> = bases
        .iter()
        .map(|x| std::iter::once(1.0).chain(x.iter().copied()).collect())
        .collect();
    let mut jac = vec![vec![0.0; n]; n];
    for i in 0..n {
        let rhs: Vec<f64> = w.iter().map(|wi| wi[i]).collect();
        let coef = least_squares(&rows, &rhs).ok()?;
        jac[i].copy_from_slice(&coef[1..]);
    }
    Some(
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| 0.5 * (jac[i][j] - jac[j][i]).abs())
            .fold(0.0, f64::max),
    )
}

fn fit_flags(groups: &[(Vec<f64>, Vec<&SampleData>)], n: usize, tol: f64) -> Result<FlagCurvatureFit> {
    let mut w_all = Vec::new();
    let mut sigma = Vec::new();
    let mut residual = 0.0f64;
    for (_, data) in groups {
        let (w, s, r) = fit_flag_form(&flag_observations(data), n)?;
        w_all.push(w);
        sigma.push(s);
        residual = residual.max(r);
    }
    let bases: Vec<Vec<f64>> = groups.iter().map(|g| g.0.clone()).collect();
    Ok(FlagCurvatureFit {
        closedness: closedness(&bases, &w_all),
        c_gradient: w_all
            .iter()
            .map(|w| w.iter().map(|v| v / 3.0).collect())
            .collect(),
        sigma,
        residual,
        holds: residual <= tol,
    })
}

/// Fits `K = 3 c_{x^m} y^m / F + σ` per base point over the sample.
pub fn flag_curvature_fit(m: &MetricSpec, sample: &[PointState]) -> Result<FlagCurvatureFit> {
    let groups = group(sample);
    let mut owned = Vec::new();
    for (x, idx) in &groups {
        let data: Vec<SampleData> = idx
            .par_iter()
            .map(|&k| {
                let p = &sample[k];
                let l = Local::new(m, p, &[4, 3, 2])?;
                Ok(SampleData {
                    y: p.y.clone(),
                    f: p.f,
                    g: l.g(),
                    r: l.riemann(),
                    ..empty_sample()
                })
            })
            .collect::<Result<_>>()?;
        owned.push((x.clone(), data));
    }
    let refs: Vec<(Vec<f64>, Vec<&SampleData>)> = owned
        .iter()
        .map(|(x, d)| (x.clone(), d.iter().collect()))
        .collect();
    fit_flags(&refs, m.dim(), DEFAULT_TOL)
}

fn empty_sample() -> SampleData {
    SampleData {
        y: Vec::new(),
        f: 0.0,
        s: 0.0,
        g: Vec::new(),
        h: Vec::new(),
        i: Vec::new(),
        b: Vec::new(),
        e: Vec::new(),
        d: Vec::new(),
        r: Vec::new(),
        j: Vec::new(),
        f2: Vec::new(),
        f3: Vec::new(),
        r00: 0.0,
        b_cov: Vec::new(),
    }
}

/// Covariant data of β at one base point, as used by the lemma branches.
#[derive(Debug, Clone)]
pub struct CsData {
    pub r: Matrix<f64>,
    pub s_j: Vec<f64>,
    pub a: Matrix<f64>,
    pub b_low: Vec<f64>,
    pub b2: f64,
}

/// Decides between the two branches of the isotropic-S characterization.
pub fn lemma_cs_branch_from_data(data: &[CsData], tol: f64) -> LemmaBranch {
    let res2 = data
        .iter()
        .map(|d| d.r.max_abs().max(d.s_j.max_abs()))
        .fold(0.0, f64::max);
    if res2 <= tol {
        return LemmaBranch::Cs2 { residual: res2 };
    }
    let mut eps = Vec::with_capacity(data.len());
    let mut res1 = 0.0f64;
    for d in data {
        let n = d.b_low.len();
        let pairs: Vec<(f64, f64)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (d.r[i][j], d.b2 * d.a[i][j] - d.b_low[i] * d.b_low[j]))
            .collect();
        let (e, r) = fit_scalar(pairs.iter().copied());
        eps.push(e);
        res1 = res1.max(r).max(d.s_j.max_abs());
    }
    if res1 <= tol {
        LemmaBranch::Cs1 {
            epsilon: eps,
            residual: res1,
        }
    } else {
        LemmaBranch::None {
            residual: res1.min(res2),
        }
    }
}

pub fn lemma_cs_branch(m: &MetricSpec, bases: &[Vec<f64>], tol: f64) -> Result<LemmaBranch> {
    let data = bases
        .iter()
        .map(|x| {
            let mut y = vec![0.0; m.dim()];
            y[0] = 1.0;
            let p = m.point(x, &y)?;
            let bc = covariant_beta_data(m, &p)?;
            Ok(CsData {
                r: bc.r,
                s_j: bc.s_j,
                a: m.a_at(x)?,
                b_low: bc.b_low,
                b2: p.b2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(lemma_cs_branch_from_data(&data, tol))
}

pub fn classify_at_points(m: &MetricSpec, sample: &[PointState], tol: f64) -> Result<ClassificationReport> {
    if !(tol > 0.0) {
        return Err(Error::Argument("tolerance must be positive".into()));
    }
    let n = m.dim();
    let groups = group(sample);
    if groups.is_empty() {
        return Err(Error::Argument("empty sample".into()));
    }
    if let Some((x, idx)) = groups.iter().find(|(_, idx)| idx.len() < MIN_DIRECTIONS) {
        return Err(Error::Argument(format!(
            "base point {x:?} has {} directions, at least {MIN_DIRECTIONS} are needed",
            idx.len()
        )));
    }
    let grads: Vec<Option<Vec<f64>>> = groups
        .iter()
        .map(|(x, _)| {
            if n <= 3 {
                ln_sigma_gradient(m, x, DEFAULT_RESOLUTION).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let mut owner = vec![0usize; sample.len()];
    for (gi, (_, idx)) in groups.iter().enumerate() {
        for &k in idx {
            owner[k] = gi;
        }
    }
    let data: Vec<SampleData> = sample
        .par_iter()
        .enumerate()
        .map(|(k, p)| sample_data(m, p, grads[owner[k]].as_deref()))
        .collect::<Result<_>>()?;

    let max_over = |f: &dyn Fn(&SampleData) -> f64| data.iter().map(f).fold(0.0, f64::max);
    let flags = Flags {
        riemannian: Flag::new(max_over(&|d| d.i.max_abs() * d.f), tol),
        berwald: Flag::new(max_over(&|d| d.b.max_abs() * d.f), tol),
        weakly_berwald: Flag::new(max_over(&|d| d.e.max_abs() * d.f), tol),
        douglas: Flag::new(max_over(&|d| d.d.max_abs() * d.f), tol),
        weakly_landsberg: Flag::new(max_over(&|d| d.j.max_abs()), tol),
        killing_beta: Flag::new(max_over(&|d| d.r00.abs() / (d.f * d.f)), tol),
        parallel_beta: Flag::new(max_over(&|d| d.b_cov.max_abs()), tol),
    };

    let nf = n as f64;
    let by_group: Vec<(Vec<f64>, Vec<&SampleData>)> = groups
        .iter()
        .map(|(x, idx)| (x.clone(), idx.iter().map(|&k| &data[k]).collect()))
        .collect();
    let mut s_fit = (Vec::new(), 0.0f64);
    let mut e_fit = (Vec::new(), 0.0f64);
    let mut b_fit = (Vec::new(), 0.0f64);
    let mut e_with_s = 0.0f64;
    for (_, ds) in &by_group {
        let (c, r) = fit_scalar(ds.iter().map(|d| (d.s / d.f, nf + 1.0)));
        s_fit.0.push(c);
        s_fit.1 = s_fit.1.max(r);

        let e_pairs: Vec<(f64, f64)> = ds
            .iter()
            .flat_map(|d| {
                let k = (nf + 1.0) / 2.0;
                flatten2(&d.e)
                    .into_iter()
                    .map(move |e| e * d.f)
                    .zip(flatten2(&d.h).into_iter().map(move |h| k * h))
            })
            .collect();
        let (ce, re) = fit_scalar(e_pairs.iter().copied());
        e_fit.0.push(ce);
        e_fit.1 = e_fit.1.max(re);
        let with_s = e_pairs
            .iter()
            .map(|(a, p)| (a - c * p).abs())
            .fold(0.0, f64::max);
        e_with_s = e_with_s.max(with_s);

        let b_pairs: Vec<(f64, f64)> = ds
            .iter()
            .flat_map(|d| {
                flatten4(&d.b)
                    .into_iter()
                    .zip(flatten4(&ibc_pattern(d, n)))
                    .map(move |(b, p)| (b * d.f, p * d.f))
            })
            .collect();
        let (cb, rb) = fit_scalar(b_pairs.iter().copied());
        b_fit.0.push(cb);
        b_fit.1 = b_fit.1.max(rb);
    }
    let iso = |(c, residual): (Vec<f64>, f64)| IsotropicFit {
        c,
        residual,
        holds: residual <= tol,
    };
    let fits = Fits {
        isotropic_s: iso(s_fit),
        isotropic_e: iso(e_fit),
        isotropic_e_with_s_c: e_with_s,
        isotropic_berwald: iso(b_fit),
        almost_isotropic_flag: fit_flags(&by_group, n, tol)?,
    };
    let bases: Vec<Vec<f64>> = groups.iter().map(|g| g.0.clone()).collect();
    let lemma_branch = lemma_cs_branch(m, &bases, tol)?;
    Ok(ClassificationReport {
        tol,
        base_points: bases,
        samples: sample.len(),
        flags,
        fits,
        lemma_branch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_states;
    use crate::PhiFamily;

    #[test]
    fn too_few_directions() {
        let m = MetricSpec::euclidean_with(&["0", "0"], PhiFamily::Riemannian).unwrap();
        let s = sample_states(&m, &[vec![0.0, 0.0]], 5, 0).unwrap();
        assert!(matches!(classify_at_points(&m, &s, 1e-7), Err(Error::Argument(_))));
    }

    #[test]
    fn synthetic_cs1() {
        let a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let data: Vec<CsData> = [[0.2, 0.1], [0.1, -0.25], [0.3, 0.0], [0.0, 0.15], [-0.1, 0.2]]
            .iter()
            .map(|b| {
                let b2 = b[0] * b[0] + b[1] * b[1];
                let r = (0..2)
                    .map(|i| (0..2).map(|j| 0.1 * (b2 * a[i][j] - b[i] * b[j])).collect())
                    .collect();
                CsData {
                    r,
                    s_j: vec![0.0, 0.0],
                    a: a.clone(),
                    b_low: b.to_vec(),
                    b2,
                }
            })
            .collect();
        match lemma_cs_branch_from_data(&data, 1e-9) {
            LemmaBranch::Cs1 { epsilon, .. } => {
                assert!(epsilon.iter().all(|e| (e - 0.1).abs() < 1e-12))
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linear_form_branch_is_none() {
        let m = MetricSpec::euclidean_with(&["0", "x1"], PhiFamily::second_approx_matsumoto()).unwrap();
        let bases: Vec<Vec<f64>> = (0..5).map(|k| vec![0.05 * k as f64, 0.1]).collect();
        assert!(matches!(
            lemma_cs_branch(&m, &bases, 1e-7).unwrap(),
            LemmaBranch::None { .. }
        ));
    }

    fn grid(center: &[f64]) -> Vec<Vec<f64>> {
        (0..5)
            .map(|k| center.iter().enumerate().map(|(i, c)| c + 0.05 * ((k + i) % 3) as f64 - 0.05 * (k / 3) as f64).collect())
            .collect()
    }

    #[test]
    fn parallel_beta_is_minkowskian() {
        let m = MetricSpec::euclidean_with(&["0.12", "0.16"], PhiFamily::second_approx_matsumoto()).unwrap();
        let s = sample_states(&m, &grid(&[0.0, 0.0]), 24, 0).unwrap();
        let r = classify_at_points(&m, &s, 1e-7).unwrap();
        assert!(r.flags.berwald.holds && r.flags.douglas.holds && r.flags.killing_beta.holds);
        assert!(r.flags.parallel_beta.holds && !r.flags.riemannian.holds);
        assert!(r.fits.isotropic_s.c.iter().all(|c| c.abs() < 1e-8));
        let f = &r.fits.almost_isotropic_flag;
        assert!(f.residual < 1e-8 && f.sigma.iter().all(|s| s.abs() < 1e-8));
        assert!(matches!(r.lemma_branch, LemmaBranch::Cs2 { .. }));
    }

    #[test]
    fn sphere_flag_fit() {
        let c = "1/(1+(x1^2+x2^2)/4)^2";
        let m = MetricSpec::from_strings(&[&[c, "0"], &["0", c]], &["0", "0"], PhiFamily::Riemannian).unwrap();
        let s = sample_states(&m, &grid(&[0.2, -0.1]), 24, 0).unwrap();
        let f = flag_curvature_fit(&m, &s).unwrap();
        assert!(f.sigma.iter().all(|s| (s - 1.0).abs() < 1e-5), "{:?}", f.sigma);
        assert!(f.c_gradient.iter().flatten().all(|c| c.abs() < 1e-6));
        let r = classify_at_points(&m, &s, 1e-7).unwrap();
        assert!(r.flags.riemannian.holds && r.flags.berwald.holds);
    }

    #[test]
    fn non_killing_linear_form() {
        let m = MetricSpec::euclidean_with(&["0", "x1"], PhiFamily::Randers).unwrap();
        let s = sample_states(&m, &grid(&[0.3, 0.0]), 20, 0).unwrap();
        let r = classify_at_points(&m, &s, 1e-7).unwrap();
        assert!(!r.flags.killing_beta.holds && r.flags.killing_beta.residual > 0.45, "{:?}", r.flags.killing_beta);
        let p = m.point(&[0.3, 0.0], &[1.0, 1.0]).unwrap();
        assert!((covariant_beta_data(&m, &p).unwrap().r00 - 1.0).abs() < 1e-12);
    }
}
