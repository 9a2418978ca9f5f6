//! Gerber-Shiu quantities at Parisian ruin with exponential delays.
//!
//! Throughout, `theta` is the discount rate, `q` the rate of the
//! implementation clock, `a` the depth of the lower ruin level `-a`, `b` the
//! upper exit level and `y <= 0` the deficit coordinate at the ruin time.
//! Densities are densities with respect to Lebesgue measure in `y`; the
//! point `y = 0` is evaluated like any other point and carries no atom.
//!
//! Writing `W_1 = W^{(theta+q)} = sum_j d_j e^{s_j z}` with `s_1 = Phi(theta+q)`,
//! the function `g(theta, q, x, u)` equals `sum_j d_j e^{s_j u} K_j(x)` for
//! `u >= max(0, -x)`, where `K_j` inverts
//! `(psi - theta - q) / ((lam - s_j)(psi - theta))` and
//! `K_1 = H^{(theta+q,-q)}`. In the upper and unrestricted densities the
//! `j = 1` terms cancel identically; evaluating the remaining sum directly
//! keeps those densities accurate far into the tail `y -> -inf`.

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::mixture::ExpMixture;
use crate::quadrature::{self, Tolerance};
use crate::scale_functions::{quotient_mixture, AuxH, ConvMode, ScaleContext, ScalePair};

use std::cell::RefCell;

use num_complex::Complex64;

/// Relative tolerance for the two `g` representations in [`GForm::Checked`].
pub const G_CHECK_TOL: f64 = 1e-8;
/// The y-integration stops after this many consecutive negligible panels.
pub const TRUNCATION_PANELS: usize = 3;
/// A panel is negligible when its contribution is below this fraction of
/// the running total.
pub const TRUNCATION_REL: f64 = 1e-14;
const MAX_PANELS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GerberShiuQuery {
    pub theta: f64,
    pub q: f64,
    pub a: f64,
    pub b: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityValue {
    pub value: f64,
}

/// Which representation of `g` backs the formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GForm {
    /// `W^{(theta)}(x+u) + q int_0^u W^{(theta)}(x+u-z) W^{(theta+q)}(z) dz`.
    #[default]
    Alternate,
    /// `W^{(theta+q)}(x+u) - q int_0^x W^{(theta)}(x-z) W^{(theta+q)}(z+u) dz`.
    Definition,
    /// Both, failing with [`Error::Mismatch`] if they disagree.
    Checked,
}

#[derive(Debug, Clone)]
struct SpectralTerm {
    d: f64,
    rate: f64,
    k: ExpMixture,
}

impl SpectralTerm {
    fn k_at(&self, x: f64) -> f64 {
        if x <= 0.0 {
            (self.rate * x).exp()
        } else {
            self.k.eval(x)
        }
    }
}

/// Formula engine for one `(model, theta, q)`.
#[derive(Debug, Clone)]
pub struct GerberShiu {
    model: LevyModel,
    theta: f64,
    q: f64,
    form: GForm,
    pair: ScalePair,
    h_up: AuxH,
    h_low: AuxH,
    phi_low: f64,
    phi_high: f64,
    spectral: Vec<SpectralTerm>,
}

impl GerberShiu {
    pub fn new(model: LevyModel, theta: f64, q: f64) -> Result<Self> {
        Self::with_form(model, theta, q, GForm::Alternate)
    }

    pub fn with_form(model: LevyModel, theta: f64, q: f64, form: GForm) -> Result<Self> {
        if !(theta >= 0.0) || !theta.is_finite() {
            return Err(Error::domain("theta >= 0", format!("theta = {theta}")));
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(Error::domain("q > 0", format!("q = {q}")));
        }
        let pair = ScalePair::rational(model, theta, q)?;
        let h_up = AuxH::new(&model, theta + q, -q)?;
        let h_low = AuxH::new(&model, theta, q)?;
        let phi_low = pair.low.phi();
        let phi_high = pair.high.phi();
        let w_high = pair.high.mixture().expect("rational context has a mixture");
        let mut spectral = Vec::new();
        for t in w_high.terms() {
            if t.power != 0 || t.rate.im != 0.0 || t.coeff.im != 0.0 {
                return Err(Error::Degenerate(
                    "roots of psi = theta + q are expected real and simple".into(),
                ));
            }
            if t.rate.re >= phi_high - 1e-9 * phi_high.max(1.0) {
                continue;
            }
            spectral.push(SpectralTerm {
                d: t.coeff.re,
                rate: t.rate.re,
                k: quotient_mixture(&model, theta + q, Complex64::new(t.rate.re, 0.0), theta)?,
            });
        }
        Ok(GerberShiu {
            model,
            theta,
            q,
            form,
            pair,
            h_up,
            h_low,
            phi_low,
            phi_high,
            spectral,
        })
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn scale_pair(&self) -> &ScalePair {
        &self.pair
    }

    /// `Phi(theta)` and `Phi(theta + q)`.
    pub fn phis(&self) -> (f64, f64) {
        (self.phi_low, self.phi_high)
    }

    /// `g(theta, q, x, u)` for `u >= -x`, in the configured representation.
    pub fn g(&self, x: f64, u: f64) -> Result<f64> {
        if !(u >= -x) {
            return Err(Error::domain("y >= -x", format!("x = {x}, y = {u}")));
        }
        match self.form {
            GForm::Alternate => self.pair.g_alternate(x, u, ConvMode::Exact),
            GForm::Definition => self.pair.g_definition(x, u, ConvMode::Exact),
            GForm::Checked => {
                let a = self.pair.g_alternate(x, u, ConvMode::Exact)?;
                let b = self.pair.g_definition(x, u, ConvMode::Exact)?;
                let diff = (a - b).abs();
                if diff > G_CHECK_TOL * a.abs().max(1.0) {
                    return Err(Error::Mismatch { what: "g representations", difference: diff });
                }
                Ok(a)
            }
        }
    }

    /// `H^{(theta+q,-q)}(x)`.
    pub fn h_upper(&self, x: f64) -> f64 {
        self.h_up.eval(x)
    }

    /// `H^{(theta,q)}(x)`.
    pub fn h_lower(&self, x: f64) -> f64 {
        self.h_low.eval(x)
    }

    /// Density of `E_x[e^{-theta tau_q}; X_{tau_q} in dy, tau_q < tau_b^+ ^ tau_{-a}^-]`.
    pub fn density_two_sided(&self, a: f64, b: f64, x: f64, y: f64) -> Result<DensityValue> {
        check_nonneg("a >= 0", a)?;
        check_nonneg("b >= 0", b)?;
        if !(x >= -a && x < b) {
            return Err(Error::domain("x in [-a, b)", format!("x = {x}, a = {a}, b = {b}")));
        }
        check_y_range(y, a)?;
        let u = -y;
        let norm = self.g(b, a)?;
        if !(norm > f64::MIN_POSITIVE) || !norm.is_finite() {
            return Err(Error::Degenerate(format!("g(theta, q, b, a) = {norm:e} cannot be divided by")));
        }
        let value = self.q * (self.g(x, a)? * self.g(b, u)? / norm - self.g_or_zero(x, u)?);
        Ok(DensityValue { value })
    }

    /// Limit `b -> inf` of the two-sided density.
    pub fn density_lower(&self, a: f64, x: f64, y: f64) -> Result<DensityValue> {
        check_nonneg("a >= 0", a)?;
        if !(x >= -a) {
            return Err(Error::domain("x >= -a", format!("x = {x}, a = {a}")));
        }
        check_y_range(y, a)?;
        let u = -y;
        let value = self.q * (self.g(x, a)? * self.h_lower(u) / self.h_lower(a) - self.g_or_zero(x, u)?);
        Ok(DensityValue { value })
    }

    /// Limit `a -> inf` of the two-sided density.
    pub fn density_upper(&self, b: f64, x: f64, y: f64) -> Result<DensityValue> {
        check_upper_domain(b, x, y)?;
        let u = -y;
        let hb = self.h_upper(b);
        if u < -x {
            return Ok(DensityValue { value: self.q * self.h_upper(x) * self.g(b, u)? / hb });
        }
        let ratio = self.h_upper(x) / hb;
        let value = self
            .spectral
            .iter()
            .map(|t| t.d * (t.rate * u).exp() * (ratio * t.k_at(b) - t.k_at(x)))
            .sum::<f64>()
            * self.q;
        Ok(DensityValue { value })
    }

    /// The upper density evaluated term by term from its published form
    /// `q [H(x) g(b, -y) / H(b) - g(x, -y)]`. Loses relative accuracy as
    /// `y -> -inf`, where both terms grow like `e^{-Phi(theta+q) y}`.
    pub fn density_upper_direct(&self, b: f64, x: f64, y: f64) -> Result<DensityValue> {
        check_upper_domain(b, x, y)?;
        let u = -y;
        let value = self.q * (self.h_upper(x) * self.g(b, u)? / self.h_upper(b) - self.g_or_zero(x, u)?);
        Ok(DensityValue { value })
    }

    /// Limit `a, b -> inf` of the two-sided density.
    pub fn density_unrestricted(&self, x: f64, y: f64) -> Result<DensityValue> {
        check_y_nonpositive(y)?;
        let u = -y;
        let spread = self.phi_high - self.phi_low;
        if u < -x {
            return Ok(DensityValue { value: spread * self.h_upper(x) * self.h_lower(u) });
        }
        let hx = self.h_upper(x);
        let value = self
            .spectral
            .iter()
            .map(|t| t.d * (t.rate * u).exp() * (spread * hx / (t.rate - self.phi_low) - t.k_at(x)))
            .sum::<f64>()
            * self.q;
        Ok(DensityValue { value })
    }

    /// `(Phi(theta+q) - Phi(theta)) H^{(theta+q,-q)}(x) H^{(theta,q)}(-y) - q g(x, -y)`
    /// evaluated as written.
    pub fn density_unrestricted_direct(&self, x: f64, y: f64) -> Result<DensityValue> {
        check_y_nonpositive(y)?;
        let u = -y;
        let spread = self.phi_high - self.phi_low;
        let value = spread * self.h_upper(x) * self.h_lower(u) - self.q * self.g_or_zero(x, u)?;
        Ok(DensityValue { value })
    }

    /// `E_x[e^{-theta tau_q}; tau_q < tau_b^+]`.
    pub fn laplace_ruin_before_b(&self, b: f64, x: f64) -> Result<f64> {
        check_nonneg("b >= 0", b)?;
        if !(x <= b) {
            return Err(Error::domain("x <= b", format!("x = {x}, b = {b}")));
        }
        let z = &self.pair.low;
        let bracket = z.z(x)? - self.h_upper(x) * z.z(b)? / self.h_upper(b);
        Ok(self.q / (self.theta + self.q) * bracket)
    }

    /// `E_x[e^{-theta tau_q + lam X_{tau_q}}; tau_q < tau_b^+]`, by panel-wise
    /// quadrature of the upper density over `y <= 0`.
    pub fn exponential_penalty(&self, lam: f64, b: f64, x: f64) -> Result<f64> {
        if !(lam >= 0.0) || !lam.is_finite() {
            return Err(Error::domain("lambda >= 0", format!("lambda = {lam}")));
        }
        check_upper_domain(b, x, 0.0)?;
        if x == b {
            return Ok(0.0);
        }
        let decay = lam + self.tail_rate();
        let split = if x < 0.0 { vec![-x] } else { Vec::new() };
        integrate_deficit(
            |u| Ok((-lam * u).exp() * self.density_upper(b, x, -u)?.value),
            decay,
            &split,
        )
    }

    /// Slowest exponential decay rate of the densities in `|y|`.
    pub fn tail_rate(&self) -> f64 {
        self.spectral
            .iter()
            .map(|t| -t.rate)
            .fold(f64::INFINITY, f64::min)
            .min(1e6)
    }

    fn g_or_zero(&self, x: f64, u: f64) -> Result<f64> {
        if x + u < 0.0 {
            Ok(0.0)
        } else {
            self.g(x, u)
        }
    }
}

fn check_nonneg(name: &'static str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::domain(name, format!("value = {v}")));
    }
    Ok(())
}

fn check_y_range(y: f64, a: f64) -> Result<()> {
    if !(y >= -a && y <= 0.0) {
        return Err(Error::domain("y in [-a, 0]", format!("y = {y}, a = {a}")));
    }
    Ok(())
}

fn check_y_nonpositive(y: f64) -> Result<()> {
    if !(y <= 0.0) || !y.is_finite() {
        return Err(Error::domain("y <= 0", format!("y = {y}")));
    }
    Ok(())
}

fn check_upper_domain(b: f64, x: f64, y: f64) -> Result<()> {
    check_nonneg("b >= 0", b)?;
    if !(x <= b) || !x.is_finite() {
        return Err(Error::domain("x <= b", format!("x = {x}, b = {b}")));
    }
    check_y_nonpositive(y)
}

/// `int_0^inf f(u) du` for an integrand decaying roughly like `e^{-decay u}`.
///
/// Integrates consecutive panels of width `2 / decay` (split at `breaks`)
/// and stops once [`TRUNCATION_PANELS`] panels in a row each add less than
/// [`TRUNCATION_REL`] of the running total.
pub fn integrate_deficit<F>(f: F, decay: f64, breaks: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let width = 2.0 / decay.max(1e-6);
    let mut total = 0.0;
    let mut quiet = 0;
    for k in 0..MAX_PANELS {
        let (lo, hi) = (k as f64 * width, (k + 1) as f64 * width);
        let failure = RefCell::new(None);
        let r = quadrature::integrate(
            |u| match f(u) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    f64::NAN
                }
            },
            lo,
            hi,
            breaks,
            Tolerance { rel: 1e-12, abs: 1e-300 },
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        let piece = r?.value;
        total += piece;
        if piece.abs() <= TRUNCATION_REL * total.abs() {
            quiet += 1;
            if quiet >= TRUNCATION_PANELS {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::Convergence {
        what: "y-integration truncation",
        iterations: MAX_PANELS,
        residual: total,
    })
}

pub fn gs_density_two_sided(model: &LevyModel, qy: &GerberShiuQuery) -> Result<DensityValue> {
    GerberShiu::new(*model, qy.theta, qy.q)?.density_two_sided(qy.a, qy.b, qy.x, qy.y)
}

pub fn gs_density_lower(model: &LevyModel, theta: f64, q: f64, a: f64, x: f64, y: f64) -> Result<DensityValue> {
    GerberShiu::new(*model, theta, q)?.density_lower(a, x, y)
}

pub fn gs_density_upper(model: &LevyModel, theta: f64, q: f64, b: f64, x: f64, y: f64) -> Result<DensityValue> {
    GerberShiu::new(*model, theta, q)?.density_upper(b, x, y)
}

pub fn gs_density_unrestricted(model: &LevyModel, theta: f64, q: f64, x: f64, y: f64) -> Result<DensityValue> {
    GerberShiu::new(*model, theta, q)?.density_unrestricted(x, y)
}

pub fn laplace_ruin_before_b(model: &LevyModel, theta: f64, q: f64, b: f64, x: f64) -> Result<f64> {
    GerberShiu::new(*model, theta, q)?.laplace_ruin_before_b(b, x)
}

pub fn gs_exponential_penalty(model: &LevyModel, theta: f64, q: f64, lam: f64, b: f64, x: f64) -> Result<f64> {
    GerberShiu::new(*model, theta, q)?.exponential_penalty(lam, b, x)
}

/// `P_x(tau_q < inf) = 1 - psi'(0+) Phi(q) / q * H^{(q,-q)}(x)`, requiring
/// the net profit condition `psi'(0+) > 0`.
pub fn parisian_ruin_prob(model: &LevyModel, q: f64, x: f64) -> Result<f64> {
    if !(q > 0.0) || !q.is_finite() {
        return Err(Error::domain("q > 0", format!("q = {q}")));
    }
    let drift = model.net_profit_drift();
    if !(drift > 0.0) {
        return Err(Error::domain("net profit condition psi'(0+) > 0", format!("psi'(0+) = {drift}")));
    }
    let phi = model.phi(q)?;
    let h = AuxH::new(model, q, -q)?.eval(x);
    Ok(1.0 - drift * phi / q * h)
}

/// Classical ruin probability `P_x(tau_0^- < inf) = 1 - psi'(0+) W(x)`.
pub fn classical_ruin_prob(model: &LevyModel, x: f64) -> Result<f64> {
    let drift = model.net_profit_drift();
    if !(drift > 0.0) {
        return Err(Error::domain("net profit condition psi'(0+) > 0", format!("psi'(0+) = {drift}")));
    }
    if x < 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - drift * ScaleContext::rational(*model, 0.0)?.w(x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scale_functions::asymptotic_gap;

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
    fn q_zero_is_rejected() {
        assert!(matches!(
            GerberShiu::new(cl(), 0.1, 0.0),
            Err(Error::Domain { precondition: "q > 0", .. })
        ));
    }

    #[test]
    fn domains_are_named() {
        let e = GerberShiu::new(cl(), 0.0, 1.0).unwrap();
        let err = e.density_two_sided(1.0, 2.0, 2.0, -0.5).unwrap_err();
        assert!(matches!(err, Error::Domain { precondition: "x in [-a, b)", .. }));
        let err = e.density_two_sided(1.0, 2.0, 0.0, -1.5).unwrap_err();
        assert!(matches!(err, Error::Domain { precondition: "y in [-a, 0]", .. }));
        assert!(e.laplace_ruin_before_b(1.0, 1.5).is_err());
        assert!(e.density_unrestricted(0.0, 0.5).is_err());
    }

    #[test]
    fn spectral_and_published_upper_density_agree() {
        for m in [bm(), cl(), jd()] {
            let e = GerberShiu::new(m, 0.2, 1.0).unwrap();
            for (x, y) in [(0.0, -0.5), (1.0, 0.0), (-0.3, -0.1), (-0.3, -1.0), (1.5, -2.0)] {
                let a = e.density_upper(2.0, x, y).unwrap().value;
                let b = e.density_upper_direct(2.0, x, y).unwrap().value;
                assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{m:?} x={x} y={y}: {a} vs {b}");
                let a = e.density_unrestricted(x, y).unwrap().value;
                let b = e.density_unrestricted_direct(x, y).unwrap().value;
                assert!((a - b).abs() < 1e-10 * a.abs().max(1.0), "{m:?} x={x} y={y}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn two_sided_forms_agree_for_cl() {
        let a = GerberShiu::new(cl(), 0.05, 1.0).unwrap();
        let d = GerberShiu::with_form(cl(), 0.05, 1.0, GForm::Definition).unwrap();
        let c = GerberShiu::with_form(cl(), 0.05, 1.0, GForm::Checked).unwrap();
        let va = a.density_two_sided(1.5, 2.0, 0.0, -0.75).unwrap().value;
        let vd = d.density_two_sided(1.5, 2.0, 0.0, -0.75).unwrap().value;
        let vc = c.density_two_sided(1.5, 2.0, 0.0, -0.75).unwrap().value;
        assert!(va > 0.0);
        assert!((va - vd).abs() < 1e-10);
        assert_eq!(va, vc);
    }

    #[test]
    fn a_zero_leaves_only_the_endpoint() {
        // with a = 0 the y-range collapses to {0}; g(x, 0) = W^{(theta)}(x)
        let e = GerberShiu::new(bm(), 0.3, 1.0).unwrap();
        let w = &e.scale_pair().low;
        for x in [0.2, 1.0] {
            assert!((e.g(x, 0.0).unwrap() - w.w(x).unwrap()).abs() < 1e-13);
        }
        let v = e.density_two_sided(0.0, 2.0, 0.5, 0.0).unwrap().value;
        assert!(v.is_finite() && v >= -1e-12);
    }

    #[test]
    fn y_endpoint_is_finite() {
        let e = GerberShiu::new(jd(), 0.1, 2.0).unwrap();
        let v = e.density_lower(1.5, 0.5, -1.5).unwrap().value;
        assert!(v.is_finite() && v >= 0.0);
    }

    #[test]
    fn laplace_ruin_vanishes_at_b() {
        let e = GerberShiu::new(cl(), 0.2, 1.0).unwrap();
        assert_eq!(e.laplace_ruin_before_b(2.0, 2.0).unwrap(), 0.0);
        assert_eq!(e.exponential_penalty(0.5, 2.0, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn penalty_at_zero_lambda_is_laplace_ruin() {
        for m in [bm(), cl(), jd()] {
            let e = GerberShiu::new(m, 0.1, 1.0).unwrap();
            for x in [-0.5, 0.0, 1.0] {
                let p = e.exponential_penalty(0.0, 2.0, x).unwrap();
                let l = e.laplace_ruin_before_b(2.0, x).unwrap();
                assert!((p - l).abs() < 1e-8, "{m:?} x={x}: {p} vs {l}");
            }
        }
    }

    #[test]
    fn penalty_decreases_to_zero_in_lambda() {
        let e = GerberShiu::new(cl(), 0.0, 1.0).unwrap();
        let mut last = f64::INFINITY;
        for lam in [0.0, 0.5, 1.0, 4.0, 20.0, 200.0, 5000.0] {
            let v = e.exponential_penalty(lam, 3.0, 0.0).unwrap();
            assert!(v <= last && v >= 0.0);
            last = v;
        }
        assert!(last < 1e-2);
    }

    #[test]
    fn ruin_probability_limits() {
        let m = cl();
        let small = parisian_ruin_prob(&m, 1e-6, 0.0).unwrap();
        assert!((0.0..1e-5).contains(&small));
        let classical = classical_ruin_prob(&m, 0.0).unwrap();
        assert!((classical - 2.0 / 3.0).abs() < 1e-14);
        let big = parisian_ruin_prob(&m, 1e6, 0.0).unwrap();
        assert!(big <= classical && classical - big < 1e-3);
        let no_profit = LevyModel::cramer_lundberg(1.0, 1.0, 1.0).unwrap();
        assert!(matches!(
            parisian_ruin_prob(&no_profit, 1.0, 0.0),
            Err(Error::Domain { precondition: "net profit condition psi'(0+) > 0", .. })
        ));
    }

    #[test]
    fn unrestricted_is_the_far_barrier_limit_of_upper() {
        let m = cl();
        let (theta, q) = (0.0, 5.0);
        let e = GerberShiu::new(m, theta, q).unwrap();
        let (_, phi_high) = e.phis();
        let gap = asymptotic_gap(&m, theta).unwrap();
        let b = 60.0 / phi_high.min(gap);
        for (x, y) in [(0.0, -0.5), (1.0, -2.0)] {
            let up = e.density_upper(b, x, y).unwrap().value;
            let un = e.density_unrestricted(x, y).unwrap().value;
            assert!((up - un).abs() < 1e-6);
        }
    }
}
