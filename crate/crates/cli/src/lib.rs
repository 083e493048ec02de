//! Command implementations behind the `finsler` binary.

pub mod config;
pub mod error;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use finsler_core::alphabeta::{mean_cartan_closed, mean_landsberg_closed, s_curvature_closed, spray_closed_form};
use finsler_core::classify::{classify_at_points, ClassificationReport};
use finsler_core::geodesic::integrate;
use finsler_core::geometry::{flag_curvature_with, Local, MaxAbs, BUNDLE_CAPS};
use finsler_core::ratfunc::{phi_nonvanishing_certificate, verify_identity_a5};
use finsler_core::sampling::sample_states;
use finsler_core::volume::{ln_sigma_gradient, s_curvature_with_gradient};
use finsler_core::{MetricSpec, PointState};

pub use config::RunConfig;
pub use error::CliError;

pub const TOOL: &str = "finsler";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Relative agreement required between closed forms and definitions.
pub const CLOSED_FORM_LIMIT: f64 = 1e-7;
/// Absolute agreement required between the closed-form and quadrature S.
pub const S_CURVATURE_LIMIT: f64 = 2e-3;

pub fn config_hash(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct Report<T> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub seed: u64,
    pub tol: f64,
    pub result: T,
}

impl<T: Serialize> Report<T> {
    pub fn new(command: &'static str, cfg: &RunConfig, hash: &str, result: T) -> Report<T> {
        Report {
            tool: TOOL,
            version: VERSION,
            command,
            config_hash: hash.to_string(),
            seed: cfg.sample.seed,
            tol: cfg.tol,
            result,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports contain only finite data");
        s.push('\n');
        s
    }
}

fn states(cfg: &RunConfig) -> Result<Vec<PointState>, CliError> {
    Ok(sample_states(
        &cfg.metric,
        &cfg.sample.base_points,
        cfg.sample.directions,
        cfg.sample.seed,
    )?)
}

/// `∇ ln σ_F` per base point where the quadrature applies.
fn gradients(cfg: &RunConfig) -> Result<Vec<Option<Vec<f64>>>, CliError> {
    cfg.sample
        .base_points
        .par_iter()
        .map(|x| {
            if cfg.dim <= 3 {
                Ok(Some(ln_sigma_gradient(&cfg.metric, x, cfg.resolution)?))
            } else {
                Ok(None)
            }
        })
        .collect()
}

/// Index of each state's base point; states come grouped by base point.
fn owner(cfg: &RunConfig, k: usize) -> usize {
    k / cfg.sample.directions.max(1)
}

#[derive(Debug, Serialize)]
pub struct SampleScalars {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub f: f64,
    /// Definitional S where the volume quadrature applies (n ≤ 3).
    pub s: Option<f64>,
    pub s_closed: f64,
    /// Flag curvature for the first coordinate direction not parallel to `y`.
    pub k: Option<f64>,
    pub norm_b: f64,
    pub norm_d: f64,
    pub norm_j: f64,
    pub norm_i: f64,
}

fn first_flag(m: &MetricSpec, l: &Local, y: &[f64]) -> Option<f64> {
    let (g, r) = (l.g(), l.riemann());
    (0..m.dim()).find_map(|k| {
        let u: Vec<f64> = (0..m.dim()).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
        flag_curvature_with(&g, &r, y, &u).ok()
    })
}

pub fn cmd_curvatures(cfg: &RunConfig) -> Result<Vec<SampleScalars>, CliError> {
    let m = &cfg.metric;
    let grads = gradients(cfg)?;
    states(cfg)?
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let l = Local::new(m, p, &BUNDLE_CAPS)?;
            let s = match &grads[owner(cfg, k)] {
                Some(g) => Some(s_curvature_with_gradient(m, p, g)?),
                None => None,
            };
            Ok(SampleScalars {
                x: p.x.clone(),
                y: p.y.clone(),
                f: p.f,
                s,
                s_closed: s_curvature_closed(m, p, cfg.lambda)?,
                k: first_flag(m, &l, &p.y),
                norm_b: l.berwald().max_abs(),
                norm_d: l.douglas().max_abs(),
                norm_j: l.mean_landsberg().max_abs(),
                norm_i: l.mean_cartan().max_abs(),
            })
        })
        .collect()
}

pub fn cmd_classify(cfg: &RunConfig) -> Result<ClassificationReport, CliError> {
    Ok(classify_at_points(&cfg.metric, &states(cfg)?, cfg.tol)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Observed residual, when the check is numeric.
    pub residual: Option<f64>,
    pub limit: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct VerifyResult {
    pub passed: bool,
    pub checks: Vec<Check>,
}

fn rel(closed: &[f64], def: &[f64]) -> f64 {
    let d = closed.iter().zip(def).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    d / def.max_abs().max(1e-6)
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyResult, CliError> {
    let mut checks = Vec::new();
    let cert = verify_identity_a5();
    checks.push(Check {
        name: "identity_a5".into(),
        passed: cert.all(),
        residual: None,
        limit: None,
    });
    for n in 2..=4 {
        checks.push(Check {
            name: format!("phi_nonvanishing_n{n}"),
            passed: phi_nonvanishing_certificate(n),
            residual: None,
            limit: None,
        });
    }
    let m = &cfg.metric;
    let grads = gradients(cfg)?;
    let per_state: Vec<[f64; 4]> = states(cfg)?
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let l = Local::new(m, p, &[4, 3])?;
            let s_err = match &grads[owner(cfg, k)] {
                Some(g) => (s_curvature_with_gradient(m, p, g)? - s_curvature_closed(m, p, cfg.lambda)?).abs(),
                None => 0.0,
            };
            Ok([
                rel(&spray_closed_form(m, p)?, &l.spray()),
                rel(&mean_cartan_closed(m, p)?, &l.mean_cartan()),
                rel(&mean_landsberg_closed(m, p)?, &l.mean_landsberg()),
                s_err,
            ])
        })
        .collect::<Result<_, CliError>>()?;
    let worst = |i: usize| per_state.iter().map(|r| r[i]).fold(0.0, f64::max);
    for (i, name) in ["spray_closed_vs_definitional", "mean_cartan_closed_vs_definitional", "mean_landsberg_closed_vs_definitional"]
        .iter()
        .enumerate()
    {
        let r = worst(i);
        checks.push(Check {
            name: name.to_string(),
            passed: r <= CLOSED_FORM_LIMIT,
            residual: Some(r),
            limit: Some(CLOSED_FORM_LIMIT),
        });
    }
    if cfg.dim <= 3 {
        let r = worst(3);
        checks.push(Check {
            name: "s_curvature_closed_vs_quadrature".into(),
            passed: r <= S_CURVATURE_LIMIT,
            residual: Some(r),
            limit: Some(S_CURVATURE_LIMIT),
        });
    }
    Ok(VerifyResult {
        passed: checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Trajectory as CSV: `t, x1..xn, v1..vn, F`.
pub fn cmd_geodesic(cfg: &RunConfig) -> Result<String, CliError> {
    let g = cfg.geodesic.as_ref().ok_or_else(|| CliError::Config {
        path: "geodesic".into(),
        message: "missing field".into(),
    })?;
    let rows = integrate(&cfg.metric, &g.x0, &g.v0, g.step, g.steps)?;
    let n = cfg.dim;
    let mut out = String::from("t");
    for i in 1..=n {
        out.push_str(&format!(",x{i}"));
    }
    for i in 1..=n {
        out.push_str(&format!(",v{i}"));
    }
    out.push_str(",F\n");
    for r in rows {
        let fields: Vec<String> = std::iter::once(r.t)
            .chain(r.x)
            .chain(r.v)
            .chain(std::iter::once(r.speed))
            .map(|v| v.to_string())
            .collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}
