use finsler_core::alphabeta::{s_curvature_closed, LambdaSource};
use finsler_core::sampling::sample_states;
use finsler_core::volume::{
    bh_volume_coefficient, lambda_from_volume, ln_sigma_gradient, s_curvature_definitional,
    s_curvature_with_gradient, DEFAULT_RESOLUTION,
};
use finsler_core::{Error, MetricSpec, PhiFamily};
use proptest::prelude::*;

fn curved_randers() -> MetricSpec {
    MetricSpec::from_strings(
        &[&["1 + 0.1*x2^2", "0.05*x1"], &["0.05*x1", "1"]],
        &["0.1 + 0.15*x2", "0.15 + 0.2*x1"],
        PhiFamily::Randers,
    )
    .unwrap()
}

#[test]
fn zero_resolution_is_rejected() {
    let m = MetricSpec::euclidean_with(&["0", "0"], PhiFamily::Riemannian).unwrap();
    assert!(matches!(bh_volume_coefficient(&m, &[0.0, 0.0], 0), Err(Error::Argument(_))));
}

#[test]
fn doubling_shrinks_the_error_fourfold() {
    for (b, phi) in [("0.5", PhiFamily::Randers), ("0.3", PhiFamily::second_approx_matsumoto())] {
        let m = MetricSpec::euclidean_with(&[b, "0.1"], phi).unwrap();
        let v: Vec<f64> = [2usize, 4, 8]
            .iter()
            .map(|&r| bh_volume_coefficient(&m, &[0.0, 0.0], r).unwrap().sigma_f)
            .collect();
        let reference = bh_volume_coefficient(&m, &[0.0, 0.0], 256).unwrap().sigma_f;
        for w in v.windows(2) {
            let (e0, e1) = ((w[0] - reference).abs(), (w[1] - reference).abs());
            assert!(e1 * 4.0 <= e0 || e1 < 1e-13, "{e0} -> {e1}");
        }
    }
}

#[test]
fn rotated_chart_keeps_the_volume() {
    let (c, s) = (0.6f64, 0.8f64);
    let (b1, b2) = (0.3, -0.1);
    let rot = [c * b1 - s * b2, s * b1 + c * b2];
    let base = MetricSpec::euclidean_with(&[&b1.to_string(), &b2.to_string()], PhiFamily::Matsumoto).unwrap();
    let turned = MetricSpec::euclidean_with(&[&rot[0].to_string(), &rot[1].to_string()], PhiFamily::Matsumoto).unwrap();
    let v0 = bh_volume_coefficient(&base, &[0.0, 0.0], DEFAULT_RESOLUTION).unwrap();
    let v1 = bh_volume_coefficient(&turned, &[0.0, 0.0], DEFAULT_RESOLUTION).unwrap();
    assert!((v0.sigma_f - v1.sigma_f).abs() < 1e-10);
    let m3 = |b: [&str; 3]| MetricSpec::euclidean_with(&b, PhiFamily::Randers).unwrap();
    let a = bh_volume_coefficient(&m3(["0.3", "0", "0"]), &[0.0; 3], 32).unwrap();
    let b = bh_volume_coefficient(&m3(["0", "0.18", "0.24"]), &[0.0; 3], 32).unwrap();
    assert!((a.sigma_f - b.sigma_f).abs() < 1e-6, "{} vs {}", a.sigma_f, b.sigma_f);
}

#[test]
fn lambda_minimizes_the_closed_form_mismatch() {
    let m = MetricSpec::from_strings(
        &[&["1", "0"], &["0", "1"]],
        &["0.5 + 0.1*x2", "0.1*x1"],
        PhiFamily::Randers,
    )
    .unwrap();
    let x = [0.0, 0.0];
    let est = lambda_from_volume(&m, &x).unwrap();
    let states = sample_states(&m, &[x.to_vec()], 24, 0).unwrap();
    let grad = ln_sigma_gradient(&m, &x, DEFAULT_RESOLUTION).unwrap();
    let mismatch = |lam: f64| -> f64 {
        states
            .iter()
            .map(|p| {
                let sd = s_curvature_with_gradient(&m, p, &grad).unwrap();
                let sc = s_curvature_closed(&m, p, LambdaSource::Fixed(lam)).unwrap();
                (sd - sc).abs()
            })
            .fold(0.0, f64::max)
    };
    let (mut lo, mut hi) = (est.lambda - 2.0, est.lambda + 2.0);
    for _ in 0..100 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if mismatch(m1) < mismatch(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let best = 0.5 * (lo + hi);
    assert!((best - est.lambda).abs() <= 5e-3, "{best} vs {}", est.lambda);
}

#[test]
fn constant_form_gives_constant_lambda() {
    let m = MetricSpec::euclidean_with(&["0.2", "0.1"], PhiFamily::second_approx_matsumoto()).unwrap();
    let l0 = lambda_from_volume(&m, &[0.0, 0.0]).unwrap().lambda;
    for x in [[0.5, -0.3], [2.0, 1.0], [-1.0, 0.7]] {
        assert!((lambda_from_volume(&m, &x).unwrap().lambda - l0).abs() <= 1e-6);
    }
    let r = MetricSpec::euclidean_with(&["0", "0"], PhiFamily::Riemannian).unwrap();
    assert!(matches!(lambda_from_volume(&r, &[0.0, 0.0]), Err(Error::Domain(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn s_is_one_homogeneous(
        x in prop::array::uniform2(-0.3f64..0.3),
        y in prop::array::uniform2(-1.0f64..1.0).prop_filter("nonzero y", |y| y[0].hypot(y[1]) > 0.2),
        lam in 0.3f64..5.0,
    ) {
        let m = curved_randers();
        let p = m.point(&x, &y).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| lam * v).collect();
        let q = m.point(&x, &ys).unwrap();
        let s1 = s_curvature_definitional(&m, &p, 32).unwrap();
        let s2 = s_curvature_definitional(&m, &q, 32).unwrap();
        prop_assert!((s2 - lam * s1).abs() <= 1e-8 * (1.0 + lam), "{s2} vs {}", lam * s1);
    }
}
