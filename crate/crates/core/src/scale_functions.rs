//! Scale functions `W^{(q)}`, `Z^{(q)}` and the auxiliary functions built
//! from them.
//!
//! For every catalog model `psi(lam) - q` is rational, so `W^{(q)}` is the
//! exponential mixture obtained by partial fractions over the roots of
//! `psi(lam) = q` ([`ScaleMethod::RationalInversion`], the default). Hand
//! derived formulas for the Brownian and Cramer-Lundberg families
//! ([`ScaleMethod::ClosedForm`]) and fixed-Talbot inversion
//! ([`ScaleMethod::NumericInversion`]) are kept as independent routes.

use std::collections::HashMap;
use std::sync::Mutex;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy_model::{Family, LevyModel};
use crate::mixture::{self, ExpMixture, ExpTerm};
use crate::poly;
use crate::quadrature::{self, Tolerance};
use crate::talbot::{fixed_talbot, TALBOT_NODES};

/// Below this argument the Talbot route returns `W^{(q)}(0)` directly.
pub const TALBOT_MIN_X: f64 = 1e-8;
const CACHE_GRANULARITY: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScaleMethod {
    ClosedForm,
    RationalInversion,
    NumericInversion,
}

/// How convolution integrals between scale functions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvMode {
    /// Analytic exponential-product integrals whenever both factors are
    /// mixtures, adaptive quadrature otherwise.
    #[default]
    Exact,
    /// Always adaptive Gauss-Legendre.
    Quadrature,
}

/// A `(model, q)` pair with its evaluation strategy.
///
/// Talbot evaluations are memoized per context; the memo only ever stores
/// deterministic values, so concurrent and serial use give identical
/// results.
#[derive(Debug)]
pub struct ScaleContext {
    model: LevyModel,
    q: f64,
    method: ScaleMethod,
    phi: f64,
    w_mix: Option<ExpMixture>,
    int_mix: Option<ExpMixture>,
    grid_cache: Mutex<HashMap<i64, f64>>,
}

impl Clone for ScaleContext {
    fn clone(&self) -> Self {
        ScaleContext {
            model: self.model,
            q: self.q,
            method: self.method,
            phi: self.phi,
            w_mix: self.w_mix.clone(),
            int_mix: self.int_mix.clone(),
            grid_cache: Mutex::new(self.grid_cache.lock().unwrap().clone()),
        }
    }
}

impl ScaleContext {
    pub fn new(model: LevyModel, q: f64, method: ScaleMethod) -> Result<Self> {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::domain("q >= 0", format!("q = {q}")));
        }
        let phi = model.phi(q)?;
        let w_mix = match method {
            ScaleMethod::RationalInversion => Some(rational_w(&model, q)?),
            ScaleMethod::ClosedForm => Some(closed_form_w(&model, q, phi)?),
            ScaleMethod::NumericInversion => None,
        };
        let int_mix = w_mix.as_ref().map(ExpMixture::antiderivative);
        Ok(ScaleContext {
            model,
            q,
            method,
            phi,
            w_mix,
            int_mix,
            grid_cache: Mutex::new(HashMap::new()),
        })
    }

    /// Partial-fraction context, the default evaluation path.
    pub fn rational(model: LevyModel, q: f64) -> Result<Self> {
        Self::new(model, q, ScaleMethod::RationalInversion)
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn method(&self) -> ScaleMethod {
        self.method
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// The exponential-mixture form of `W^{(q)}` on `[0, inf)`, if this
    /// context has one.
    pub fn mixture(&self) -> Option<&ExpMixture> {
        self.w_mix.as_ref()
    }

    /// `Z^{(q)}` on `[0, inf)` as a mixture.
    pub fn z_mixture(&self) -> Option<ExpMixture> {
        self.int_mix
            .as_ref()
            .map(|m| ExpMixture::constant(1.0).add(&m.scale(self.q)))
    }

    /// `W^{(q)}(x)`; zero for `x < 0`.
    pub fn w(&self, x: f64) -> Result<f64> {
        let v = self.w_value(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Convergence {
                what: "Talbot inversion of W",
                iterations: TALBOT_NODES,
                residual: v,
            })
        }
    }

    /// `W^{(q)}(x)` without the finiteness check.
    pub fn w_value(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        if let Some(m) = &self.w_mix {
            return m.eval(x);
        }
        if x < TALBOT_MIN_X {
            return self.model.w_at_zero(self.q);
        }
        let key = if x < 9.0e6 {
            Some((x * CACHE_GRANULARITY).round() as i64)
        } else {
            None
        };
        if let Some(k) = key {
            if let Some(v) = self.grid_cache.lock().unwrap().get(&k) {
                return *v;
            }
        }
        let model = self.model;
        let q = self.q;
        let v = fixed_talbot(|s| 1.0 / (model.psi_complex(s) - q), x, TALBOT_NODES, self.phi);
        if let Some(k) = key {
            self.grid_cache.lock().unwrap().insert(k, v);
        }
        v
    }

    /// `int_0^x W^{(q)}(y) dy`; zero for `x <= 0`.
    pub fn integral_w(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        if let Some(m) = &self.int_mix {
            return Ok(m.eval(x));
        }
        Ok(quadrature::integrate(|y| self.w_value(y), 0.0, x, &[], Tolerance::default())?.value)
    }

    /// `Z^{(q)}(x) = 1 + q int_0^x W^{(q)}`.
    pub fn z(&self, x: f64) -> Result<f64> {
        if x <= 0.0 || self.q == 0.0 {
            return Ok(1.0);
        }
        Ok(1.0 + self.q * self.integral_w(x)?)
    }

    pub fn cached_points(&self) -> usize {
        self.grid_cache.lock().unwrap().len()
    }
}

fn rational_w(model: &LevyModel, q: f64) -> Result<ExpMixture> {
    let den = model.exponent_numerator(q);
    let num = model.exponent_denominator().to_complex();
    ExpMixture::invert_rational(&num, &den)
}

fn closed_form_w(model: &LevyModel, q: f64, phi: f64) -> Result<ExpMixture> {
    let re = |r: f64, c: f64, p: u32| ExpTerm {
        rate: Complex64::new(r, 0.0),
        coeff: Complex64::new(c, 0.0),
        power: p,
    };
    match model.family {
        Family::BrownianDrift => {
            let s2 = model.sigma * model.sigma;
            let delta = (model.mu * model.mu + 2.0 * q * s2).sqrt();
            if delta == 0.0 {
                return Ok(ExpMixture::from_terms(vec![re(0.0, 2.0 / s2, 1)]));
            }
            // (e^{l+ x} - e^{l- x}) / delta with l+- = (-mu +- delta) / sigma^2
            Ok(ExpMixture::from_terms(vec![
                re((-model.mu + delta) / s2, 1.0 / delta, 0),
                re((-model.mu - delta) / s2, -1.0 / delta, 0),
            ]))
        }
        Family::CramerLundbergExp => {
            let (c, eta, alpha) = (model.mu, model.jump_rate, model.jump_mean_inv);
            // roots of c l^2 + (c alpha - q - eta) l - q alpha sum to -(c alpha - q - eta)/c
            let other = -(c * alpha - q - eta) / c - phi;
            if (phi - other).abs() <= poly::ROOT_MERGE_TOL * phi.abs().max(1.0) {
                return Ok(ExpMixture::from_terms(vec![
                    re(phi, 1.0 / c, 0),
                    re(phi, (alpha + phi) / c, 1),
                ]));
            }
            let scale = 1.0 / (c * (phi - other));
            Ok(ExpMixture::from_terms(vec![
                re(phi, (alpha + phi) * scale, 0),
                re(other, -(alpha + other) * scale, 0),
            ]))
        }
        Family::JumpDiffusionExp => Err(Error::Unsupported(
            "no hand-derived closed form for jump_diffusion_exp; use RationalInversion".into(),
        )),
    }
}

/// Distance between `Phi(r)` and the real part of the next root of
/// `psi(lam) = r`. Ratios such as `W^{(r)}(c - x) / W^{(r)}(c)` approach
/// their limit `e^{-Phi(r) x}` at this exponential rate in `c`.
pub fn asymptotic_gap(model: &LevyModel, r: f64) -> Result<f64> {
    let roots = poly::roots(&model.exponent_numerator(r))?;
    let phi = model.phi(r)?;
    let next = roots
        .iter()
        .map(|root| root.value.re)
        .filter(|re| *re < phi - 1e-9 * phi.max(1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(phi - next)
}

/// `int_lower^upper outer(anchor - z) inner(z + shift) dz` with both scale
/// functions zero on the negative half-line.
pub fn convolve_scale(
    outer: &ScaleContext,
    inner: &ScaleContext,
    anchor: f64,
    lower: f64,
    upper: f64,
    shift: f64,
) -> Result<f64> {
    convolve_with(outer, inner, anchor, lower, upper, shift, ConvMode::Exact)
}

pub fn convolve_with(
    outer: &ScaleContext,
    inner: &ScaleContext,
    anchor: f64,
    lower: f64,
    upper: f64,
    shift: f64,
    mode: ConvMode,
) -> Result<f64> {
    if lower > upper {
        return Err(Error::domain("lower <= upper", format!("lower = {lower}, upper = {upper}")));
    }
    let lo = lower.max(-shift);
    let hi = upper.min(anchor);
    if hi <= lo {
        return Ok(0.0);
    }
    if mode == ConvMode::Exact {
        if let (Some(f), Some(g)) = (outer.mixture(), inner.mixture()) {
            return Ok(mixture::convolve(f, g, anchor, lo, hi, shift));
        }
    }
    let r = quadrature::integrate(
        |z| outer.w_value(anchor - z) * inner.w_value(z + shift),
        lo,
        hi,
        &[],
        Tolerance::default(),
    )?;
    Ok(r.value)
}

/// `|int_0^L e^{-lam x} W^{(q)}(x) dx - 1/(psi(lam) - q)|`, with the
/// integral done by quadrature and `L` large enough that the neglected tail
/// is below `1e-10` of the transform value.
pub fn laplace_identity_residual(ctx: &ScaleContext, lam: f64) -> Result<f64> {
    let phi = ctx.phi();
    if !(lam > phi) {
        return Err(Error::domain("lambda > Phi(q)", format!("lambda = {lam}, Phi(q) = {phi}")));
    }
    let model = ctx.model();
    let exact = 1.0 / (model.psi(lam) - ctx.q());
    let gap = lam - phi;
    // W(x) e^{-Phi x} is bounded by roughly 1/psi'(Phi) for large x.
    let slope = model.psi_prime(phi).max(1e-3);
    let bound = (1.0 / (slope * gap * exact)).max(1.0);
    let length = (bound.ln() + (1e12f64).ln()) / gap;
    let mut cuts = Vec::new();
    let mut c = 0.0;
    let step = (1.0 / gap).min(length);
    while c + step < length {
        c += step;
        cuts.push(c);
    }
    // Talbot values carry ~1e-8 relative rounding noise
    let tol = match ctx.method() {
        ScaleMethod::NumericInversion => Tolerance { rel: 1e-7, abs: 1e-12 },
        _ => Tolerance { rel: 1e-12, abs: 1e-15 },
    };
    let r = quadrature::integrate(|x| (-lam * x).exp() * ctx.w_value(x), 0.0, length, &cuts, tol)?;
    Ok((r.value - exact).abs())
}

/// Auxiliary function `H^{(p,s)}(x) = e^{Phi(p) x} (1 + s int_0^x e^{-Phi(p) y} W^{(p+s)}(y) dy)`.
///
/// On `[0, inf)` its Laplace transform is
/// `(psi - p) / ((lam - Phi(p)) (psi - p - s))`, in which the factor
/// `lam - Phi(p)` cancels; the mixture is built from that reduced form, so
/// no `e^{Phi(p) x}` growth has to cancel numerically when `s < 0`.
#[derive(Debug, Clone)]
pub struct AuxH {
    pub p: f64,
    pub shift: f64,
    phi: f64,
    mix: ExpMixture,
}

impl AuxH {
    pub fn new(model: &LevyModel, p: f64, shift: f64) -> Result<Self> {
        if !(p >= 0.0) {
            return Err(Error::domain("p >= 0", format!("p = {p}")));
        }
        if !(p + shift >= 0.0) {
            return Err(Error::domain("p + q >= 0", format!("p = {p}, q = {shift}")));
        }
        let phi = model.phi(p)?;
        let mix = if shift == 0.0 {
            ExpMixture::exponential(1.0, phi)
        } else {
            let root = polish_real_root(&model.exponent_numerator(p), phi);
            quotient_mixture(model, p, Complex64::new(root, 0.0), p + shift)?
        };
        Ok(AuxH { p, shift, phi, mix })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn mixture(&self) -> &ExpMixture {
        &self.mix
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= 0.0 {
            (self.phi * x).exp()
        } else {
            self.mix.eval(x)
        }
    }
}

/// Inverse transform of `(N_top(lam) / (lam - root)) / N_bottom(lam)` where
/// `root` is a root of `N_top`, i.e. of `psi(lam) = top`.
pub(crate) fn quotient_mixture(model: &LevyModel, top: f64, root: Complex64, bottom: f64) -> Result<ExpMixture> {
    let num = poly::deflate(&model.exponent_numerator(top).to_complex(), root);
    ExpMixture::invert_rational(&num, &model.exponent_numerator(bottom))
}

fn polish_real_root(p: &poly::Poly, mut x: f64) -> f64 {
    let dp = p.derivative();
    for _ in 0..4 {
        let d = dp.eval(x);
        if d == 0.0 {
            break;
        }
        let next = x - p.eval(x) / d;
        if (p.eval(next)).abs() >= p.eval(x).abs() {
            break;
        }
        x = next;
    }
    x
}

/// `H^{(p,q)}(x)` for `p >= 0`, `p + q >= 0`.
pub fn h_aux(model: &LevyModel, p: f64, q_shift: f64, x: f64) -> Result<f64> {
    Ok(AuxH::new(model, p, q_shift)?.eval(x))
}

/// `H^{(p,q)}(x)` straight from its definition, with the integral done by
/// quadrature over the partial-fraction `W^{(p+q)}`.
pub fn h_aux_quadrature(model: &LevyModel, p: f64, q_shift: f64, x: f64) -> Result<f64> {
    if !(p + q_shift >= 0.0) || !(p >= 0.0) {
        return Err(Error::domain("p + q >= 0", format!("p = {p}, q = {q_shift}")));
    }
    let phi = model.phi(p)?;
    if x <= 0.0 || q_shift == 0.0 {
        return Ok((phi * x).exp());
    }
    let w = ScaleContext::rational(*model, p + q_shift)?;
    let r = quadrature::integrate(
        |y| (-phi * y).exp() * w.w_value(y),
        0.0,
        x,
        &[],
        Tolerance { rel: 1e-13, abs: 1e-16 },
    )?;
    Ok((phi * x).exp() * (1.0 + q_shift * r.value))
}

/// The pair of scale functions `W^{(theta)}`, `W^{(theta+q)}` behind `g`.
#[derive(Debug, Clone)]
pub struct ScalePair {
    pub low: ScaleContext,
    pub high: ScaleContext,
    pub q: f64,
}

impl ScalePair {
    pub fn new(model: LevyModel, theta: f64, q: f64, method: ScaleMethod) -> Result<Self> {
        if !(theta >= 0.0) {
            return Err(Error::domain("theta >= 0", format!("theta = {theta}")));
        }
        if !(q >= 0.0) {
            return Err(Error::domain("q >= 0", format!("q = {q}")));
        }
        Ok(ScalePair {
            low: ScaleContext::new(model, theta, method)?,
            high: ScaleContext::new(model, theta + q, method)?,
            q,
        })
    }

    pub fn rational(model: LevyModel, theta: f64, q: f64) -> Result<Self> {
        Self::new(model, theta, q, ScaleMethod::RationalInversion)
    }

    /// `g(theta, q, x, y) = W^{(theta+q)}(x+y) - q int_0^x W^{(theta)}(x-z) W^{(theta+q)}(z+y) dz`.
    ///
    /// For `x <= 0` the integral is over a region where `W^{(theta)}`
    /// vanishes, so `g = W^{(theta+q)}(x+y)`.
    pub fn g_definition(&self, x: f64, y: f64, mode: ConvMode) -> Result<f64> {
        let head = self.high.w(x + y)?;
        if x <= 0.0 || self.q == 0.0 {
            return Ok(head);
        }
        let conv = convolve_with(&self.low, &self.high, x, 0.0, x, y, mode)?;
        Ok(head - self.q * conv)
    }

    /// `g(theta, q, x, y) = W^{(theta)}(x+y) + q int_0^y W^{(theta)}(x+y-z) W^{(theta+q)}(z) dz`.
    pub fn g_alternate(&self, x: f64, y: f64, mode: ConvMode) -> Result<f64> {
        let head = self.low.w(x + y)?;
        if y <= 0.0 || self.q == 0.0 {
            if x <= 0.0 {
                // both representations reduce to W^{(theta+q)}(x+y) here
                return self.high.w(x + y);
            }
            return Ok(head);
        }
        let conv = convolve_with(&self.low, &self.high, x + y, 0.0, y, 0.0, mode)?;
        Ok(head + self.q * conv)
    }
}

fn check_g_domain(x: f64, y: f64) -> Result<()> {
    if !(y >= -x) {
        return Err(Error::domain("y >= -x", format!("x = {x}, y = {y}")));
    }
    Ok(())
}

/// `g(theta, q, x, y)` from its defining convolution.
pub fn g_fn(model: &LevyModel, theta: f64, q: f64, x: f64, y: f64) -> Result<f64> {
    check_g_domain(x, y)?;
    ScalePair::rational(*model, theta, q)?.g_definition(x, y, ConvMode::Exact)
}

/// `g(theta, q, x, y)` from the rewritten representation integrating over `[0, y]`.
pub fn g_fn_alt(model: &LevyModel, theta: f64, q: f64, x: f64, y: f64) -> Result<f64> {
    check_g_domain(x, y)?;
    ScalePair::rational(*model, theta, q)?.g_alternate(x, y, ConvMode::Exact)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bm() -> LevyModel {
        LevyModel::brownian(1.0, 1.0).unwrap()
    }
    fn cl() -> LevyModel {
        LevyModel::cramer_lundberg(1.5, 1.0, 1.0).unwrap()
    }
    fn jd() -> LevyModel {
        LevyModel::jump_diffusion(1.5, 0.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn brownian_w_at_one() {
        // Oracle: quadrature of int e^{-lam x} (1 - e^{-2x}) dx against 1/psi(lam)
        // confirms W(x) = 1 - e^{-2x} for mu = sigma = 1; frozen value 1 - e^{-2}.
        let expected = 0.864_664_716_763_387_3;
        for method in [ScaleMethod::RationalInversion, ScaleMethod::ClosedForm] {
            let ctx = ScaleContext::new(bm(), 0.0, method).unwrap();
            assert!((ctx.w(1.0).unwrap() - expected).abs() < 1e-14);
        }
        let talbot = ScaleContext::new(bm(), 0.0, ScaleMethod::NumericInversion).unwrap();
        assert!((talbot.w(1.0).unwrap() - expected).abs() < 1e-7);
    }

    #[test]
    fn w_is_zero_on_negatives_and_starts_at_w0() {
        for m in [bm(), cl(), jd()] {
            for method in [ScaleMethod::RationalInversion, ScaleMethod::NumericInversion] {
                let ctx = ScaleContext::new(m, 0.5, method).unwrap();
                assert_eq!(ctx.w(-0.5).unwrap(), 0.0);
                assert!((ctx.w(0.0).unwrap() - m.w_at_zero(0.5)).abs() < 1e-12);
            }
        }
        let ctx = ScaleContext::rational(cl(), 0.0).unwrap();
        assert!((ctx.w(0.0).unwrap() - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn closed_form_matches_partial_fractions() {
        for (m, q) in [(bm(), 0.0), (bm(), 2.0), (cl(), 0.0), (cl(), 1.3)] {
            let a = ScaleContext::new(m, q, ScaleMethod::ClosedForm).unwrap();
            let b = ScaleContext::rational(m, q).unwrap();
            for x in [0.0, 0.4, 1.0, 3.0, 8.0] {
                let (va, vb) = (a.w(x).unwrap(), b.w(x).unwrap());
                assert!((va - vb).abs() <= 1e-12 * va.abs().max(1.0), "{m:?} q={q} x={x}");
            }
        }
        assert!(matches!(
            ScaleContext::new(jd(), 1.0, ScaleMethod::ClosedForm),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn confluent_form_at_zero_drift_boundary() {
        // c = eta/alpha: psi'(0) = 0 gives a double root at the origin.
        let m = LevyModel::cramer_lundberg(1.0, 1.0, 1.0).unwrap();
        let ctx = ScaleContext::rational(m, 0.0).unwrap();
        assert!(!ctx.mixture().unwrap().is_simple());
        // (alpha + lam)/(c lam^2) -> (1 + x)/c
        for x in [0.0, 1.0, 5.0] {
            assert!((ctx.w(x).unwrap() - (1.0 + x)).abs() < 1e-12);
        }
        let bm0 = LevyModel::brownian(0.0, 2.0).unwrap();
        let ctx = ScaleContext::rational(bm0, 0.0).unwrap();
        assert!((ctx.w(3.0).unwrap() - 2.0 * 3.0 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn z_examples() {
        let ctx = ScaleContext::rational(bm(), 1.0).unwrap();
        assert_eq!(ctx.z(-1.0).unwrap(), 1.0);
        assert_eq!(ScaleContext::rational(cl(), 0.0).unwrap().z(4.0).unwrap(), 1.0);
        // adaptive Simpson oracle over the closed-form W^{(1)}
        let w = ScaleContext::new(bm(), 1.0, ScaleMethod::ClosedForm).unwrap();
        let oracle = 1.0 + simpson(&|y| w.w_value(y), 0.0, 1.0, 1e-13);
        assert!((ctx.z(1.0).unwrap() - oracle).abs() < 1e-11);
        let talbot = ScaleContext::new(bm(), 1.0, ScaleMethod::NumericInversion).unwrap();
        assert!((talbot.z(1.0).unwrap() - oracle).abs() < 1e-6);
    }

    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth > 40 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth + 1) + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth + 1)
        }
        let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 0)
    }

    #[test]
    fn h_aux_examples() {
        for m in [bm(), cl(), jd()] {
            assert!((h_aux(&m, 0.7, 0.4, 0.0).unwrap() - 1.0).abs() < 1e-12);
            assert!((h_aux(&m, 0.7, -0.7, 0.0).unwrap() - 1.0).abs() < 1e-12);
            let phi = m.phi(0.7).unwrap();
            assert!((h_aux(&m, 0.7, 0.0, 1.3).unwrap() - (phi * 1.3).exp()).abs() < 1e-12);
            assert!((h_aux(&m, 0.7, 0.5, -2.0).unwrap() - (-phi * 2.0).exp()).abs() < 1e-15);
            for x in [0.5, 2.0] {
                for (p, s) in [(0.7, 0.4), (1.2, -1.2), (0.0, 1.0)] {
                    let a = h_aux(&m, p, s, x).unwrap();
                    let b = h_aux_quadrature(&m, p, s, x).unwrap();
                    assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{m:?} p={p} s={s} x={x}: {a} {b}");
                }
            }
        }
        assert!(matches!(h_aux(&cl(), 1.0, -2.0, 1.0), Err(Error::Domain { .. })));
    }

    #[test]
    fn h_integral_representation_for_cl() {
        // H^{(q,-q)}(x) = q int_0^inf e^{-Phi(q) y} W(x+y) dy, checked by truncated quadrature
        let m = cl();
        let q = 1.0;
        let phi = m.phi(q).unwrap();
        let w = ScaleContext::rational(m, 0.0).unwrap();
        let x = 1.0;
        let tail = quadrature::integrate(|y| (-phi * y).exp() * w.w_value(x + y), 0.0, 60.0, &[10.0, 20.0, 40.0], Tolerance::default())
            .unwrap()
            .value;
        let h = h_aux(&m, q, -q, x).unwrap();
        assert!((h - q * tail).abs() < 1e-9);
    }

    #[test]
    fn g_reductions() {
        for m in [bm(), cl(), jd()] {
            let (theta, x, y) = (0.3, 1.2, 0.7);
            let w_theta = ScaleContext::rational(m, theta).unwrap();
            let w_sum = ScaleContext::rational(m, theta + 0.8).unwrap();
            // q = 0
            assert!((g_fn_alt(&m, theta, 0.0, x, y).unwrap() - w_theta.w(x + y).unwrap()).abs() < 1e-13);
            assert!((g_fn(&m, theta, 0.0, x, y).unwrap() - w_theta.w(x + y).unwrap()).abs() < 1e-13);
            // x -> 0 extension
            let pair = ScalePair::rational(m, theta, 0.8).unwrap();
            assert!((pair.g_definition(0.0, y, ConvMode::Exact).unwrap() - w_sum.w(y).unwrap()).abs() < 1e-13);
            assert!((pair.g_alternate(0.0, y, ConvMode::Exact).unwrap() - w_sum.w(y).unwrap()).abs() < 1e-12);
        }
        assert!(matches!(g_fn(&bm(), 0.1, 0.5, 1.0, -1.5), Err(Error::Domain { .. })));
    }

    #[test]
    fn g_forms_agree_by_independent_quadrature() {
        let pair = ScalePair::rational(bm(), 0.1, 0.5).unwrap();
        let a = pair.g_definition(1.0, 0.5, ConvMode::Quadrature).unwrap();
        let b = pair.g_alternate(1.0, 0.5, ConvMode::Quadrature).unwrap();
        assert!((a - b).abs() < 1e-8);
        let exact = pair.g_alternate(1.0, 0.5, ConvMode::Exact).unwrap();
        assert!((a - exact).abs() < 1e-9);
    }

    #[test]
    fn convolution_examples() {
        let a = ScaleContext::rational(cl(), 0.2).unwrap();
        let b = ScaleContext::rational(cl(), 1.2).unwrap();
        assert_eq!(convolve_scale(&a, &b, 1.0, 0.5, 0.5, 0.0).unwrap(), 0.0);
        assert!(convolve_scale(&a, &b, 1.0, 0.6, 0.5, 0.0).is_err());

        // symbolic antiderivative oracle for exponential products
        let (fa, fb) = (a.mixture().unwrap(), b.mixture().unwrap());
        let mut oracle = 0.0;
        for s in fa.terms() {
            for t in fb.terms() {
                let (r1, c1, r2, c2) = (s.rate.re, s.coeff.re, t.rate.re, t.coeff.re);
                // int_0^1 c1 e^{r1 (1-z)} c2 e^{r2 z} dz
                let beta = r2 - r1;
                oracle += c1 * c2 * r1.exp() * (beta.exp() - 1.0) / beta;
            }
        }
        let exact = convolve_scale(&a, &b, 1.0, 0.0, 1.0, 0.0).unwrap();
        assert!((exact - oracle).abs() < 1e-10 * oracle.abs());

        // Richardson-extrapolated midpoint rule on a short interval
        let f = |z: f64| a.w_value(0.8 - z) * b.w_value(z + 0.1);
        let mid = |n: usize| {
            let h = 0.2 / n as f64;
            (0..n).map(|i| f(0.3 + (i as f64 + 0.5) * h)).sum::<f64>() * h
        };
        let rich = (4.0 * mid(2000) - mid(1000)) / 3.0;
        let got = convolve_scale(&a, &b, 0.8, 0.3, 0.5, 0.1).unwrap();
        assert!((got - rich).abs() < 1e-11);
    }

    #[test]
    fn laplace_residual_examples() {
        let ctx = ScaleContext::rational(bm(), 0.0).unwrap();
        assert!(laplace_identity_residual(&ctx, 3.0).unwrap() <= 1e-8);
        let ctx = ScaleContext::rational(cl(), 1.0).unwrap();
        let lam = 2.0 * ctx.phi();
        assert!(laplace_identity_residual(&ctx, lam).unwrap() <= 1e-8);
        assert!(matches!(laplace_identity_residual(&ctx, ctx.phi()), Err(Error::Domain { .. })));
    }

    #[test]
    fn talbot_cache_fills_and_is_consistent() {
        let ctx = ScaleContext::new(jd(), 0.5, ScaleMethod::NumericInversion).unwrap();
        let first = ctx.w(1.25).unwrap();
        assert_eq!(ctx.cached_points(), 1);
        assert_eq!(ctx.w(1.25).unwrap(), first);
        assert_eq!(ctx.cached_points(), 1);
        let exact = ScaleContext::rational(jd(), 0.5).unwrap().w(1.25).unwrap();
        assert!((first - exact).abs() < 1e-7);
    }

    #[test]
    fn gap_for_cramer_lundberg_at_zero() {
        // roots of psi = 0: 0 and eta/c - alpha = -1/3
        let g = asymptotic_gap(&cl(), 0.0).unwrap();
        assert!((g - 1.0 / 3.0).abs() < 1e-12);
    }
}
