use proptest::prelude::*;
use subfinsler::expr::{Expr, Func};
use subfinsler::{diff_expr, eval_expr, parse_expr, Error};

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0u32..40).prop_map(|k| Expr::Num(k as f64 * 0.125)),
        (0usize..3).prop_map(Expr::Var),
    ];
    leaf.prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
            (inner.clone(), -3i32..=3).prop_map(|(a, k)| Expr::Pow(Box::new(a), k)),
            (inner, prop_oneof![Just(Func::Sin), Just(Func::Cos), Just(Func::Exp), Just(Func::Sqrt)])
                .prop_map(|(a, f)| Expr::Call(f, Box::new(a))),
        ]
    })
}

fn depth(e: &Expr) -> usize {
    match e {
        Expr::Num(_) | Expr::Var(_) => 0,
        Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => 1 + depth(a),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => 1 + depth(a).max(depth(b)),
    }
}

/// Richardson-extrapolated central difference of `e` along `var`.
fn richardson(e: &Expr, x: &[f64], var: usize, h: f64) -> Option<f64> {
    let at = |dx: f64| {
        let mut y = x.to_vec();
        y[var] += dx;
        eval_expr(e, &y).ok().filter(|v| v.is_finite() && v.abs() < 1e6)
    };
    let d = |h: f64| Some((at(h)? - at(-h)?) / (2.0 * h));
    let (d1, d2) = (d(h)?, d(0.5 * h)?);
    Some((4.0 * d2 - d1) / 3.0)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, max_global_rejects: 20_000, ..ProptestConfig::default() })]

    #[test]
    fn print_parse_round_trip(e in arb_expr()) {
        let printed = e.to_string();
        let parsed = parse_expr(&printed).unwrap();
        prop_assert_eq!(parsed, e);
    }

    #[test]
    fn derivative_matches_finite_differences(
        e in arb_expr(),
        x in prop::array::uniform3(-1.0f64..1.0),
        var in 0usize..3,
    ) {
        prop_assume!(depth(&e) <= 6);
        let exact = diff_expr(&e, var);
        let value = eval_expr(&exact, &x);
        prop_assume!(matches!(value, Ok(v) if v.is_finite() && v.abs() < 1e6));
        let fd = richardson(&e, &x, var, 1e-3);
        let fd_check = richardson(&e, &x, var, 5e-4);
        // Skip points where the difference quotient itself is not resolved,
        // e.g. next to a pole or the branch point of sqrt.
        prop_assume!(matches!((fd, fd_check), (Some(a), Some(b)) if (a - b).abs() <= 1e-8 * (1.0 + a.abs())));
        let fd = fd.unwrap();
        let v = value.unwrap();
        prop_assert!((v - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "d/dx{} of {} at {:?}: {} vs {}", var + 1, e, x, v, fd);
    }
}

#[test]
fn examples() {
    assert_eq!(eval_expr(&parse_expr("-y/2").unwrap(), &[0.0, 2.0]).unwrap(), -1.0);
    assert_eq!(eval_expr(&parse_expr("x*x + 3").unwrap(), &[2.0]).unwrap(), 7.0);
    assert_eq!(eval_expr(&parse_expr("sin(x)").unwrap(), &[0.0]).unwrap(), 0.0);
    assert_eq!(eval_expr(&parse_expr("x^2").unwrap(), &[-3.0]).unwrap(), 9.0);
    assert!(matches!(parse_expr("x +"), Err(Error::Syntax { offset: 3, .. })));
    assert!(matches!(eval_expr(&parse_expr("x/ y").unwrap(), &[1.0, 0.0]), Err(Error::Domain(_))));
    assert!(matches!(parse_expr("w + 1"), Err(Error::UnknownIdentifier { .. })));
    assert!(matches!(eval_expr(&parse_expr("x3").unwrap(), &[1.0]), Err(Error::UnboundVariable { index: 2 })));
}

#[test]
fn symbolic_derivatives() {
    let e = parse_expr("x*y + sin(x)").unwrap();
    let dx = diff_expr(&e, 0);
    for (x, y) in [(0.0, 1.0), (1.2, -0.7), (-2.0, 3.0)] {
        assert!((eval_expr(&dx, &[x, y]).unwrap() - (y + f64::cos(x))).abs() < 1e-15);
    }
    let e = parse_expr("sqrt(x^2 + 1) * exp(-y)").unwrap();
    let dy = diff_expr(&e, 1);
    let (x, y) = (0.3f64, 0.4f64);
    assert!((eval_expr(&dy, &[x, y]).unwrap() + (x * x + 1.0).sqrt() * (-y).exp()).abs() < 1e-14);
}
