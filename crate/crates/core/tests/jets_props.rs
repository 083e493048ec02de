use finsler_core::jets::{fd_cross_check, jet_eval, Jet, Scalar};
use finsler_core::Result;
use proptest::prelude::*;

/// Polynomial in (x1, y1, y2) of total degree ≤ 4 with the given coefficients
/// on the monomials `x1^a y1^b y2^c`.
#[derive(Debug, Clone)]
struct Poly(Vec<((u32, u32, u32), f64)>);

fn arb_poly() -> impl Strategy<Value = Poly> {
    prop::collection::vec(((0u32..=2, 0u32..=4, 0u32..=4), -2.0f64..2.0), 1..6).prop_map(|terms| {
        Poly(terms.into_iter().filter(|((a, b, c), _)| a + b + c <= 4).collect())
    })
}

fn pow<T: Scalar>(v: &T, k: u32) -> T {
    (0..k).fold(v.lift(1.0), |acc, _| acc.mul(v))
}

impl Poly {
    fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> T {
        self.0.iter().fold(x[0].lift(0.0), |acc, ((a, b, c), k)| {
            acc.add(&pow(&x[0], *a).mul(&pow(&y[0], *b)).mul(&pow(&y[1], *c)).scale(*k))
        })
    }

    /// Exact partial `∂x^i ∂y1^j ∂y2^k` at a point.
    fn partial(&self, p: &[f64; 3], d: (u32, u32, u32)) -> f64 {
        let falling = |e: u32, k: u32| -> f64 { (0..k).map(|t| e as f64 - t as f64).product() };
        self.0
            .iter()
            .filter(|((a, b, c), _)| *a >= d.0 && *b >= d.1 && *c >= d.2)
            .map(|((a, b, c), k)| {
                k * falling(*a, d.0)
                    * falling(*b, d.1)
                    * falling(*c, d.2)
                    * p[0].powi((a - d.0) as i32)
                    * p[1].powi((b - d.1) as i32)
                    * p[2].powi((c - d.2) as i32)
            })
            .sum()
    }
}

fn smooth(x: &[Jet], y: &[Jet]) -> Result<Jet> {
    let r2 = &(&y[0] * &y[0]) + &(&y[1] * &y[1]);
    let a = x[0].sin()?;
    let b = (&(&a * &y[0]) + &r2).add_scalar(2.0).sqrt()?;
    let c = (&x[0] * &y[1]).exp()?;
    Ok(&b * &c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn polynomial_jets_are_exact(p in arb_poly(), pt in prop::array::uniform3(-1.0f64..1.0)) {
        let fj = jet_eval(|x, y| Ok(p.eval(x, y)), &pt[..1], &pt[1..], 2, 4).unwrap();
        for a in 0..=2u32 {
            for b in 0..=4u32 {
                for c in 0..=(4 - b) {
                    let exact = p.partial(&pt, (a, b, c));
                    let got = fj.partial(&[a as usize, b as usize, c as usize]).unwrap();
                    prop_assert!((got - exact).abs() <= 1e-12 * (1.0 + exact.abs()), "{a}{b}{c}: {got} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn mixed_partials_commute(pt in prop::array::uniform3(-1.0f64..1.0)) {
        let fj = jet_eval(smooth, &pt[..1], &pt[1..], 1, 2).unwrap();
        let via = |first: usize, second: usize| fj.jet.d(first).d(second).value();
        prop_assert!((via(0, 1) - via(1, 0)).abs() <= 1e-13 * (1.0 + via(0, 1).abs()));
        prop_assert!((via(1, 2) - via(2, 1)).abs() <= 1e-13 * (1.0 + via(1, 2).abs()));
    }

    #[test]
    fn smooth_fields_agree_with_differences(
        pt in prop::array::uniform3(-1.0f64..1.0),
        counts in prop_oneof![
            Just([1usize, 0, 0]), Just([0, 1, 0]), Just([0, 0, 1]),
            Just([1, 1, 0]), Just([0, 1, 1]), Just([0, 2, 0]),
        ],
    ) {
        let f = |x: &[Jet], y: &[Jet]| smooth(x, y);
        let value = f64::abs(jet_eval(smooth, &pt[..1], &pt[1..], 0, 0).unwrap().value());
        let r = fd_cross_check(f, &pt[..1], &pt[1..], &counts, 1e-3).unwrap();
        prop_assert!(r <= 1e-6 * (1.0 + value), "{counts:?}: {r}");
    }
}
