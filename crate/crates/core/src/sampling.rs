//! Deterministic sample generation: base points and directions on the unit
//! α-sphere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::cholesky;
use crate::metric::{MetricSpec, PointState};

/// `count` Euclidean unit vectors in `Rⁿ`: equispaced angles for n = 2, a
/// Fibonacci lattice for n = 3, seeded uniform samples otherwise.
pub fn unit_vectors(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    use std::f64::consts::PI;
    match n {
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * PI * (k as f64 + 0.25) / count as f64;
                vec![t.cos(), t.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * k as f64;
                    vec![r * t.cos(), r * t.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(count);
            while out.len() < count {
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let r2: f64 = v.iter().map(|x| x * x).sum();
                if r2 > 1e-4 && r2 <= 1.0 {
                    let r = r2.sqrt();
                    out.push(v.into_iter().map(|x| x / r).collect());
                }
            }
            out
        }
    }
}

/// Directions with `α(x, y) = 1`, obtained from Euclidean unit vectors `z`
/// as `y = L^{-T} z` where `a = L Lᵀ`.
pub fn alpha_unit_directions(m: &MetricSpec, x: &[f64], count: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let n = m.dim();
    let l = cholesky(&m.a_at(x)?)?;
    Ok(unit_vectors(n, count, seed)
        .into_iter()
        .map(|z| {
            let mut y = vec![0.0; n];
            for i in (0..n).rev() {
                let acc: f64 = (i + 1..n).map(|k| l[k][i] * y[k]).sum();
                y[i] = (z[i] - acc) / l[i][i];
            }
            y
        })
        .collect())
}

/// Seeded base points uniform in the box `center ± radius`.
pub fn base_points(center: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            center
                .iter()
                .map(|c| c + radius * rng.gen_range(-1.0..=1.0))
                .collect()
        })
        .collect()
}

/// Point states for every base point and `directions` α-unit directions each.
pub fn sample_states(m: &MetricSpec, bases: &[Vec<f64>], directions: usize, seed: u64) -> Result<Vec<PointState>> {
    let mut out = Vec::with_capacity(bases.len() * directions);
    for (k, x) in bases.iter().enumerate() {
        for y in alpha_unit_directions(m, x, directions, seed.wrapping_add(k as u64))? {
            out.push(m.point(x, &y)?);
        }
    }
    Ok(out)
}

/// Seeded random regular states: base points in `center ± radius`, random
/// fiber vectors of random length. Irregular draws are skipped.
pub fn random_states(
    m: &MetricSpec,
    center: &[f64],
    radius: f64,
    count: usize,
    seed: u64,
) -> Result<Vec<PointState>> {
    let n = m.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0usize;
    while out.len() < count {
        tries += 1;
        if tries > 100 * count + 1000 {
            return Err(Error::Regularity("too few regular states in the sampling region".into()));
        }
        let x: Vec<f64> = center
            .iter()
            .map(|c| c + radius * rng.gen_range(-1.0..=1.0))
            .collect();
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if y.iter().map(|v| v * v).sum::<f64>() < 0.05 {
            continue;
        }
        if let Ok(p) = m.point(&x, &y) {
            out.push(p);
        }
    }
    Ok(out)
}
