use finsler_core::alphabeta::phi_scalars;
use finsler_core::ratfunc::{exact_scalars, second_matsumoto_phi, Poly2, QDenominator, RatFunc};
use finsler_core::PhiFamily;
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn arb_poly() -> impl Strategy<Value = Poly2> {
    prop::collection::vec(((0u32..4, 0u32..3), -5i64..=5), 0..6).prop_map(|terms| {
        terms.into_iter().fold(Poly2::zero(), |acc, ((ds, dt), c)| {
            acc.add(&Poly2::monomial(BigRational::from_integer(BigInt::from(c)), ds, dt))
        })
    })
}

fn arb_ratfunc() -> impl Strategy<Value = RatFunc> {
    (arb_poly(), arb_poly())
        .prop_filter("nonzero denominator", |(_, d)| !d.is_zero())
        .prop_map(|(n, d)| RatFunc::new(n, d).unwrap())
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn sum_and_difference_cancel(a in arb_ratfunc(), b in arb_ratfunc()) {
        prop_assert!(a.add(&b).sub(&b).equals(&a));
    }

    #[test]
    fn product_and_quotient_cancel(a in arb_ratfunc(), b in arb_ratfunc()) {
        prop_assume!(!b.is_zero());
        prop_assert!(a.mul(&b).div(&b).unwrap().equals(&a));
    }

    #[test]
    fn derivative_obeys_product_rule(a in arb_ratfunc(), b in arb_ratfunc()) {
        let lhs = a.mul(&b).d_ds();
        let rhs = a.d_ds().mul(&b).add(&a.mul(&b.d_ds()));
        prop_assert!(lhs.equals(&rhs));
    }

    #[test]
    fn float_evaluation_tracks_exact(a in arb_ratfunc(), s in -8i64..8, t in -8i64..8) {
        let (sq, tq) = (BigRational::new(s.into(), 4.into()), BigRational::new(t.into(), 4.into()));
        if let Ok(exact) = a.eval_exact(&sq, &tq) {
            let f = a.eval(s as f64 / 4.0, t as f64 / 4.0).unwrap();
            let e: f64 = num_traits::ToPrimitive::to_f64(&exact).unwrap();
            prop_assert!((f - e).abs() <= 1e-12 * (1.0 + e.abs()));
        }
    }
}

#[test]
fn exact_scalars_agree_with_floating_point() {
    let ex = exact_scalars(&second_matsumoto_phi(), 3, QDenominator::Standard).unwrap();
    let fam = PhiFamily::second_approx_matsumoto();
    let mut checked = 0;
    for k in 0..500 {
        let b = 0.3 * (k as f64 + 0.5) / 500.0;
        let s = b * ((k * 37 % 101) as f64 / 50.0 - 1.0);
        let t = b * b;
        let fl = phi_scalars(&fam, s, t, 3).unwrap();
        for (r, v) in [
            (&ex.q, fl.q),
            (&ex.theta_big, fl.theta_big),
            (&ex.psi, fl.psi),
            (&ex.delta, fl.delta),
            (&ex.phi_big, fl.phi_big),
        ] {
            let e = r.eval(s, t).unwrap();
            assert!(rel(e, v) <= 1e-12, "k = {k}: {e} vs {v}");
        }
        checked += 1;
    }
    assert_eq!(checked, 500);
}
