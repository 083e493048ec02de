use finsler_core::expr::{diff_expr, eval_expr, parse, Expr, Func};
use proptest::prelude::*;

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3i32..=3).prop_map(|k| Expr::Num(k as f64 * 0.5)),
        (0usize..2).prop_map(Expr::Var),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let b = |e: Expr| Box::new(e);
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| Expr::Add(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| Expr::Sub(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| Expr::Mul(b(l), b(r))),
            (inner.clone(), inner.clone()).prop_map(move |(l, r)| Expr::Div(b(l), b(r))),
            inner.clone().prop_map(move |e| Expr::Neg(b(e))),
            (inner.clone(), 2u8..4).prop_map(move |(e, k)| Expr::Pow(b(e), b(Expr::Num(k as f64)))),
            (inner.clone(), prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp)])
                .prop_map(move |(e, f)| Expr::Call(f, b(e))),
        ]
    })
}

fn arb_point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.5f64..1.5, 2)
}

fn tame(e: &Expr, x: &[f64]) -> Option<f64> {
    eval_expr(e, x).ok().filter(|v| v.abs() < 1e6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn printed_form_parses_back(e in arb_expr(), pts in prop::collection::vec(arb_point(), 100)) {
        let text = e.to_string();
        let back = parse(&text, 2).unwrap();
        for x in &pts {
            match (eval_expr(&e, x), eval_expr(&back, x)) {
                (Ok(a), Ok(b)) => prop_assert!(a == b || (a - b).abs() <= 1e-15 * a.abs(), "{text}: {a} vs {b}"),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{text}: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn derivative_matches_richardson_difference(e in arb_expr(), x in arb_point(), k in 0usize..2) {
        let Some(f0) = tame(&e, &x) else { return Ok(()) };
        let d = diff_expr(&e, k);
        let Some(exact) = tame(&d, &x) else { return Ok(()) };
        let at = |h: f64| -> Option<f64> {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            Some((tame(&e, &xp)? - tame(&e, &xm)?) / (2.0 * h))
        };
        let rich = |h: f64| Some((4.0 * at(h / 2.0)? - at(h)?) / 3.0);
        let (Some(estimate), Some(check)) = (rich(1e-4), rich(2e-4)) else { return Ok(()) };
        // near a pole the difference oracle itself is unresolved
        prop_assume!((estimate - check).abs() < 1e-8 * (1.0 + estimate.abs()));
        let scale = exact.abs().max(f0.abs()).max(1.0);
        prop_assert!((exact - estimate).abs() <= 1e-7 * scale, "{e}: d/dx{} = {exact}, fd {estimate}", k + 1);
    }
}
