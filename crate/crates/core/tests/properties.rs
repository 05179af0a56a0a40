use finsler_algebroid::expr::{
    eval_expr, fd_deriv, parse_expr, wirtinger_deriv, ComplexExpr, DiffCache, EvalPoint, Var,
};
use finsler_algebroid::report::scaled_residual;
use finsler_algebroid::sample::{random_expr, random_point, rng};
use num_complex::Complex64;
use proptest::prelude::*;

const N: usize = 2;
const M: usize = 2;

fn all_vars() -> Vec<Var> {
    vec![Var::z(0), Var::zbar(0), Var::z(1), Var::zbar(1), Var::u(0), Var::ubar(0), Var::u(1), Var::ubar(1)]
}

/// A random expression with a point where it evaluates to a finite value;
/// nested powers inside `exp` can overflow f64 and are redrawn.
fn expr_and_point(seed: u64) -> (ComplexExpr, EvalPoint) {
    let mut r = rng(seed);
    loop {
        let e = random_expr(N, M, 6, &mut r);
        let p = random_point(N, M, &mut r);
        if eval_expr(&e, &p).is_ok_and(|v| v.is_finite()) {
            return (e, p);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn symbolic_derivative_matches_finite_differences(seed in any::<u64>()) {
        let (e, p) = expr_and_point(seed);
        let cache = DiffCache::new();
        for v in all_vars() {
            let exact = eval_expr(&wirtinger_deriv(&e, v, &cache), &p).unwrap();
            let approx = fd_deriv(&e, v, &p, 1e-5).unwrap();
            let coarse = fd_deriv(&e, v, &p, 2e-5).unwrap();
            let scale = 1.0 + eval_expr(&e, &p).unwrap().norm();
            // the oracle must resolve the derivative itself: its truncation
            // error grows by 4x from step 1e-5 to 2e-5
            prop_assume!(exact.is_finite() && approx.is_finite());
            prop_assume!((approx - coarse).norm() <= 1e-7 * scale.max(exact.norm()));
            prop_assert!((exact - approx).norm() <= 1e-6 * scale.max(exact.norm()), "{e} d/{v:?}: {exact} vs {approx}");
        }
    }

    #[test]
    fn conjugation_commutes_with_evaluation(seed in any::<u64>()) {
        let (e, p) = expr_and_point(seed);
        let a = eval_expr(&e.conj(), &p).unwrap();
        let b = eval_expr(&e, &p).unwrap().conj();
        prop_assert!(scaled_residual(a, b) <= 1e-12);
    }

    #[test]
    fn derivative_is_linear_and_obeys_product_rule(s1 in any::<u64>(), s2 in any::<u64>(), re in -2.0..2.0f64, im in -2.0..2.0f64) {
        let (f, p) = expr_and_point(s1);
        let (g, _) = expr_and_point(s2);
        let c = ComplexExpr::constant(Complex64::new(re, im));
        let cache = DiffCache::new();
        for v in all_vars() {
            let d = |e: &ComplexExpr| eval_expr(&wirtinger_deriv(e, v, &cache), &p).unwrap();
            let at = |e: &ComplexExpr| eval_expr(e, &p).unwrap();
            let lin = d(&(&c * &f + &g));
            prop_assert!(scaled_residual(lin, Complex64::new(re, im) * d(&f) + d(&g)) <= 1e-10);
            let prod = d(&(&f * &g));
            prop_assert!(scaled_residual(prod, d(&f) * at(&g) + at(&f) * d(&g)) <= 1e-10);
        }
    }

    #[test]
    fn printed_expressions_parse_back(seed in any::<u64>()) {
        let (e, p) = expr_and_point(seed);
        let back = parse_expr(&e.to_string(), N, M).unwrap();
        prop_assert!(scaled_residual(eval_expr(&e, &p).unwrap(), eval_expr(&back, &p).unwrap()) <= 1e-12);
    }

    #[test]
    fn derivative_of_conjugate_is_conjugate_of_barred_derivative(seed in any::<u64>()) {
        // ∂_v conj(e) = conj(∂_{v̄} e)
        let (e, p) = expr_and_point(seed);
        let cache = DiffCache::new();
        for v in all_vars() {
            let a = eval_expr(&wirtinger_deriv(&e.conj(), v, &cache), &p).unwrap();
            let b = eval_expr(&wirtinger_deriv(&e, v.conj(), &cache), &p).unwrap().conj();
            prop_assert!(scaled_residual(a, b) <= 1e-10);
        }
    }
}
