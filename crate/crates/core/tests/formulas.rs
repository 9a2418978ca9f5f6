//! Analytic values checked against oracles written independently of the
//! library: closed forms derived by partial fractions, bisection, and
//! composite Simpson quadrature.

use parisian_risk::gerber_shiu::{
    classical_ruin_prob, gs_density_two_sided, gs_density_upper, gs_exponential_penalty, laplace_ruin_before_b,
    parisian_ruin_prob, GForm, GerberShiu, GerberShiuQuery,
};
use parisian_risk::scale_functions::{asymptotic_gap, laplace_identity_residual};
use parisian_risk::validation::{consistency_chain_rate_aware, ValidationConfig};
use parisian_risk::{g_fn, g_fn_alt, h_aux, Error, LevyModel, ScaleContext, ScaleMethod};
use proptest::prelude::*;

fn bm() -> LevyModel {
    LevyModel::brownian(1.0, 1.0).unwrap()
}

fn cl() -> LevyModel {
    LevyModel::cramer_lundberg(1.5, 1.0, 1.0).unwrap()
}

fn simpson<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (hi - lo) / n as f64;
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(lo) < 0.0) == (f(mid) < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Brownian motion with drift 1 and unit variance: W^(r) has Laplace
/// transform 1/(l^2/2 + l - r), with roots -1 +- sqrt(1 + 2r).
fn bm_w(r: f64, x: f64) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let d = (1.0 + 2.0 * r).sqrt();
    if r == 0.0 {
        return 1.0 - (-2.0 * x).exp();
    }
    ((-1.0 + d) * x).exp() / d - ((-1.0 - d) * x).exp() / d
}

/// Cramer-Lundberg with premium 1.5, unit claim rate and mean claim 1.
fn cl_w0(x: f64) -> f64 {
    if x < 0.0 { 0.0 } else { 2.0 - 4.0 / 3.0 * (-x / 3.0).exp() }
}

fn cl_w1(x: f64) -> f64 {
    if x < 0.0 { 0.0 } else { 0.8 * x.exp() - 2.0 / 15.0 * (-2.0 * x / 3.0).exp() }
}

fn precondition(e: Error) -> &'static str {
    match e {
        Error::Domain { precondition, .. } => precondition,
        other => panic!("expected a domain error, got {other:?}"),
    }
}

#[test]
fn laplace_exponent_values() {
    assert_eq!(bm().laplace_exponent(2.0).unwrap(), 4.0);
    assert_eq!(cl().laplace_exponent(0.0).unwrap(), 0.0);
    assert!((cl().laplace_exponent(1.0).unwrap() - 1.0).abs() < 1e-15);
    let jd = LevyModel::jump_diffusion(1.0, 0.5, 1.0, 2.0).unwrap();
    assert_eq!(jd.laplace_exponent(0.0).unwrap(), 0.0);
}

#[test]
fn laplace_exponent_slope_matches_drift() {
    let jd = LevyModel::jump_diffusion(1.0, 0.5, 1.0, 2.0).unwrap();
    for m in [bm(), cl(), jd] {
        for h in [1e-4, 1e-6] {
            let slope = (m.psi(h) - m.psi(0.0)) / h;
            let drift = m.net_profit_drift();
            assert!((slope - drift).abs() <= 1e-3 * drift.abs(), "{m:?} h={h}: {slope} vs {drift}");
        }
    }
}

#[test]
fn right_inverse_values() {
    assert!((bm().phi(4.0).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(cl().phi(0.0).unwrap(), 0.0);
    let oracle = bisect(|l| 1.5 * l - l / (1.0 + l) - 1.0, 0.0, 10.0);
    assert!((cl().phi(1.0).unwrap() - oracle).abs() < 1e-12);
}

#[test]
fn drift_and_initial_values() {
    assert_eq!(bm().net_profit_drift(), 1.0);
    assert!((cl().net_profit_drift() - 0.5).abs() < 1e-15);
    assert_eq!(LevyModel::cramer_lundberg(1.0, 1.0, 1.0).unwrap().net_profit_drift(), 0.0);
    assert!((cl().w_at_zero(0.7) - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(bm().w_at_zero(0.7), 0.0);
    let jd = LevyModel::jump_diffusion(1.0, 1.0, 1.0, 1.0).unwrap();
    assert_eq!(jd.w_at_zero(0.7), 0.0);
}

#[test]
fn scale_function_values_every_method() {
    for method in [ScaleMethod::ClosedForm, ScaleMethod::RationalInversion, ScaleMethod::NumericInversion] {
        let tol = if method == ScaleMethod::NumericInversion { 1e-6 } else { 1e-12 };
        let b0 = ScaleContext::new(bm(), 0.0, method).unwrap();
        assert!((b0.w(1.0).unwrap() - (1.0 - (-2.0f64).exp())).abs() < tol, "{method:?}");
        assert_eq!(b0.w(-0.5).unwrap(), 0.0);
        let c0 = ScaleContext::new(cl(), 0.0, method).unwrap();
        assert!((c0.w(0.0).unwrap() - 2.0 / 3.0).abs() < tol, "{method:?}");
        let c1 = ScaleContext::new(cl(), 1.0, method).unwrap();
        for x in [0.1, 0.5, 1.0, 3.0] {
            assert!((c0.w(x).unwrap() - cl_w0(x)).abs() < tol * cl_w0(x).max(1.0), "{method:?} x={x}");
            assert!((c1.w(x).unwrap() - cl_w1(x)).abs() < tol * cl_w1(x).max(1.0), "{method:?} x={x}");
        }
    }
}

#[test]
fn z_function_values() {
    let ctx = ScaleContext::rational(bm(), 1.0).unwrap();
    assert_eq!(ctx.z(-1.0).unwrap(), 1.0);
    let oracle = 1.0 + simpson(|y| bm_w(1.0, y), 0.0, 1.0, 2000);
    assert!((ctx.z(1.0).unwrap() - oracle).abs() < 1e-10);
    let zero = ScaleContext::rational(cl(), 0.0).unwrap();
    for x in [0.0, 1.0, 4.0] {
        assert_eq!(zero.z(x).unwrap(), 1.0);
    }
}

#[test]
fn laplace_identity_examples() {
    let b0 = ScaleContext::new(bm(), 0.0, ScaleMethod::ClosedForm).unwrap();
    assert!(laplace_identity_residual(&b0, 3.0).unwrap() <= 1e-8);
    let c1 = ScaleContext::rational(cl(), 1.0).unwrap();
    assert!(laplace_identity_residual(&c1, 2.0 * c1.phi()).unwrap() <= 1e-8);
    assert!(laplace_identity_residual(&c1, c1.phi()).is_err());
}

#[test]
fn auxiliary_h_values() {
    let jd = LevyModel::jump_diffusion(1.0, 0.5, 1.0, 2.0).unwrap();
    for m in [bm(), cl(), jd] {
        assert!((h_aux(&m, 1.0, 0.5, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let phi = m.phi(0.8).unwrap();
        assert!((h_aux(&m, 0.8, 0.0, 1.3).unwrap() - (phi * 1.3).exp()).abs() < 1e-10);
    }
    // q int_0^inf e^{-y} W(1+y) dy with the closed-form W above
    let closed = 2.0 - (-1.0f64 / 3.0).exp();
    let truncated = simpson(|y| (-y).exp() * cl_w0(1.0 + y), 0.0, 45.0, 20_000);
    assert!((closed - truncated).abs() < 1e-10);
    assert!((h_aux(&cl(), 1.0, -1.0, 1.0).unwrap() - closed).abs() < 1e-10);
}

#[test]
fn g_function_values() {
    for (m, theta) in [(bm(), 0.3), (cl(), 0.1)] {
        let w = ScaleContext::rational(m, theta).unwrap();
        let high = ScaleContext::rational(m, theta + 0.7).unwrap();
        for (x, y) in [(0.5, 0.2), (1.0, 1.0)] {
            assert!((g_fn(&m, theta, 0.0, x, y).unwrap() - w.w(x + y).unwrap()).abs() < 1e-10);
            assert!((g_fn(&m, theta, 0.7, 0.0, y).unwrap() - high.w(y).unwrap()).abs() < 1e-10);
        }
    }
    // W^(th+q)(x+y) - q int_0^x W^(th)(x-z) W^(th+q)(z+y) dz
    let (theta, q, x, y) = (0.1, 0.5, 1.0, 0.5);
    let oracle = bm_w(theta + q, x + y) - q * simpson(|z| bm_w(theta, x - z) * bm_w(theta + q, z + y), 0.0, x, 4000);
    let g = g_fn(&bm(), theta, q, x, y).unwrap();
    let alt = g_fn_alt(&bm(), theta, q, x, y).unwrap();
    assert!((g - oracle).abs() < 1e-10, "{g} vs {oracle}");
    assert!((g - alt).abs() < 1e-8);
}

#[test]
fn two_sided_density_independent_of_g_form() {
    let q = GerberShiuQuery { theta: 0.05, q: 1.0, a: 1.5, b: 2.0, x: 0.0, y: -0.75 };
    let main = gs_density_two_sided(&cl(), &q).unwrap().value;
    let def = GerberShiu::with_form(cl(), 0.05, 1.0, GForm::Definition).unwrap();
    let other = def.density_two_sided(1.5, 2.0, 0.0, -0.75).unwrap().value;
    assert!(main > 0.0);
    assert!((main - other).abs() < 1e-10, "{main} vs {other}");
}

#[test]
fn laplace_ruin_is_the_integrated_upper_density() {
    let (theta, q, b, x) = (0.1, 1.0, 2.0, 0.0);
    let lr = laplace_ruin_before_b(&bm(), theta, q, b, x).unwrap();
    let integral = simpson(|y| gs_density_upper(&bm(), theta, q, b, x, y).unwrap().value, -40.0, 0.0, 40_000);
    assert!((lr - integral).abs() < 1e-8, "{lr} vs {integral}");
}

#[test]
fn exponential_penalty_limits() {
    let m = cl();
    let lr = laplace_ruin_before_b(&m, 0.2, 1.0, 3.0, 0.5).unwrap();
    let at_zero = gs_exponential_penalty(&m, 0.2, 1.0, 0.0, 3.0, 0.5).unwrap();
    assert!((lr - at_zero).abs() < 1e-8);
    let mut last = at_zero;
    for lam in [0.5, 2.0, 10.0, 100.0, 1e4] {
        let v = gs_exponential_penalty(&m, 0.2, 1.0, lam, 3.0, 0.5).unwrap();
        assert!(v <= last && v >= 0.0, "lambda={lam}: {v} after {last}");
        last = v;
    }
    assert!(last < 1e-3);
    assert_eq!(gs_exponential_penalty(&m, 0.2, 1.0, 1.0, 3.0, 3.0).unwrap(), 0.0);
}

#[test]
fn ruin_probability_limits() {
    assert!((classical_ruin_prob(&cl(), 0.0).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    assert!((parisian_ruin_prob(&cl(), 1.0, 0.0).unwrap() - 0.5).abs() < 1e-12);
    assert!(parisian_ruin_prob(&cl(), 1e-6, 0.0).unwrap() < 1e-3);
    let mut last = 0.0;
    for q in [1.0, 10.0, 100.0, 1e4, 1e6] {
        let p = parisian_ruin_prob(&cl(), q, 0.0).unwrap();
        assert!(p >= last && p <= 2.0 / 3.0, "q={q}: {p}");
        last = p;
    }
    assert!((last - 2.0 / 3.0).abs() < 0.01 * 2.0 / 3.0);
}

#[test]
fn domain_errors_name_the_precondition() {
    let e = GerberShiu::new(cl(), 0.0, 1.0).unwrap();
    assert_eq!(precondition(GerberShiu::new(cl(), 0.0, 0.0).unwrap_err()), "q > 0");
    assert_eq!(precondition(GerberShiu::new(cl(), -0.1, 1.0).unwrap_err()), "theta >= 0");
    assert_eq!(precondition(e.density_two_sided(1.0, 2.0, 2.0, -0.5).unwrap_err()), "x in [-a, b)");
    assert_eq!(precondition(e.density_two_sided(1.0, 2.0, 0.0, -1.5).unwrap_err()), "y in [-a, 0]");
    assert_eq!(precondition(e.density_upper(2.0, 0.0, 0.5).unwrap_err()), "y <= 0");
    assert_eq!(precondition(e.laplace_ruin_before_b(2.0, 2.5).unwrap_err()), "x <= b");
    assert_eq!(precondition(e.exponential_penalty(-1.0, 2.0, 0.0).unwrap_err()), "lambda >= 0");
    let flat = LevyModel::cramer_lundberg(1.0, 1.0, 1.0).unwrap();
    assert_eq!(
        precondition(parisian_ruin_prob(&flat, 1.0, 0.0).unwrap_err()),
        "net profit condition psi'(0+) > 0"
    );
}

#[test]
fn far_barrier_error_decays_at_the_spectral_gap() {
    // two-sided -> lower as b grows: the error decays like e^{-gap b}, and
    // gap(0) = 1/3 is far below Phi(5) for this model
    let e = GerberShiu::new(cl(), 0.0, 5.0).unwrap();
    let lim = e.density_lower(2.0, 0.0, -0.5).unwrap().value;
    let err = |b: f64| (e.density_two_sided(2.0, b, 0.0, -0.5).unwrap().value - lim).abs();
    let fitted = (err(15.0) / err(30.0)).ln() / 15.0;
    let gap = asymptotic_gap(&cl(), 0.0).unwrap();
    assert!((gap - 1.0 / 3.0).abs() < 1e-12);
    assert!((fitted - gap).abs() < 5e-3, "fitted rate {fitted}");
    assert!(cl().phi(5.0).unwrap() > 10.0 * gap);
}

#[test]
fn consistency_chain_holds_with_rate_aware_barrier() {
    let results = consistency_chain_rate_aware(&ValidationConfig::default());
    assert_eq!(results.len(), 36);
    for r in results {
        assert!(r.passed, "{}: {:e}", r.check, r.residual);
    }
}

fn any_model() -> impl Strategy<Value = LevyModel> {
    prop_oneof![
        (0.2f64..2.0, 0.3f64..2.0).prop_map(|(mu, s)| LevyModel::brownian(mu, s).unwrap()),
        (0.5f64..3.0, 1.0f64..3.0, 0.5f64..2.0)
            .prop_map(|(rate, inv, c)| LevyModel::cramer_lundberg(c, rate, inv).unwrap()),
        (0.2f64..2.0, 0.3f64..1.5, 0.5f64..2.0, 1.0f64..3.0)
            .prop_map(|(mu, s, rate, inv)| LevyModel::jump_diffusion(mu, s, rate, inv).unwrap()),
    ]
}

/// Models with `psi'(0+) > 0`.
fn profitable_model() -> impl Strategy<Value = LevyModel> {
    prop_oneof![
        (0.2f64..2.0, 0.3f64..2.0).prop_map(|(mu, s)| LevyModel::brownian(mu, s).unwrap()),
        (0.5f64..3.0, 1.0f64..3.0, 0.05f64..1.0)
            .prop_map(|(rate, inv, m)| LevyModel::cramer_lundberg(rate / inv + m, rate, inv).unwrap()),
        (0.05f64..1.0, 0.3f64..1.5, 0.5f64..2.0, 1.0f64..3.0)
            .prop_map(|(m, s, rate, inv)| LevyModel::jump_diffusion(rate / inv + m, s, rate, inv).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scale_functions_nondecreasing(m in any_model(), q in 0.0f64..3.0, x in 0.0f64..4.0, dx in 0.01f64..1.0) {
        let ctx = ScaleContext::rational(m, q).unwrap();
        let (w0, w1) = (ctx.w(x).unwrap(), ctx.w(x + dx).unwrap());
        prop_assert!(w0 >= 0.0 && w1 >= w0 * (1.0 - 1e-12));
        prop_assert!(ctx.z(x + dx).unwrap() >= ctx.z(x).unwrap() * (1.0 - 1e-12));
    }

    #[test]
    fn densities_nonnegative(
        m in any_model(),
        theta in 0.0f64..1.0,
        q in 0.1f64..3.0,
        a in 0.2f64..3.0,
        b in 0.2f64..3.0,
        fx in 0.0f64..1.0,
        fy in 0.0f64..1.0,
    ) {
        let e = GerberShiu::new(m, theta, q).unwrap();
        let x = -a + fx * (a + b) * 0.999;
        let y = -fy * a;
        let tol = 1e-10;
        prop_assert!(e.density_two_sided(a, b, x, y).unwrap().value >= -tol);
        prop_assert!(e.density_lower(a, x, y).unwrap().value >= -tol);
        prop_assert!(e.density_upper(b, x, y).unwrap().value >= -tol);
        prop_assert!(e.density_unrestricted(x, y).unwrap().value >= -tol);
    }

    #[test]
    fn ruin_probability_ordering(m in profitable_model(), q in 0.01f64..20.0, x in 0.0f64..3.0) {
        let p = parisian_ruin_prob(&m, q, x).unwrap();
        let p_more = parisian_ruin_prob(&m, 2.0 * q, x).unwrap();
        let classical = classical_ruin_prob(&m, x).unwrap();
        prop_assert!(p >= -1e-12);
        prop_assert!(p <= p_more + 1e-12);
        prop_assert!(p_more <= classical + 1e-12);
    }
}
