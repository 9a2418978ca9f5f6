//! Exponential-polynomial mixtures `sum_k c_k x^{n_k} e^{r_k x}`.
//!
//! These are the inverse Laplace transforms of proper rational functions,
//! obtained by partial fractions over the roots of the denominator. All scale
//! functions of the catalog models have this form, and so do the auxiliary
//! functions built from them, which lets convolutions be done exactly.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::{self, Poly};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpTerm {
    pub rate: Complex64,
    pub coeff: Complex64,
    pub power: u32,
}

/// A real-valued function `x -> Re sum_k coeff_k x^power_k e^{rate_k x}`.
///
/// Complex-conjugate rate pairs of a real function are stored once with a
/// doubled coefficient, so taking the real part recombines them into a
/// damped oscillation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExpMixture {
    terms: Vec<ExpTerm>,
}

impl ExpMixture {
    pub fn from_terms(terms: Vec<ExpTerm>) -> Self {
        ExpMixture { terms }
    }

    pub fn constant(c: f64) -> Self {
        Self::exponential(c, 0.0)
    }

    pub fn exponential(coeff: f64, rate: f64) -> Self {
        ExpMixture {
            terms: vec![ExpTerm {
                rate: Complex64::new(rate, 0.0),
                coeff: Complex64::new(coeff, 0.0),
                power: 0,
            }],
        }
    }

    pub fn terms(&self) -> &[ExpTerm] {
        &self.terms
    }

    /// True when every term is a plain exponential (all roots simple).
    pub fn is_simple(&self) -> bool {
        self.terms.iter().all(|t| t.power == 0)
    }

    /// Term with the largest real rate.
    pub fn dominant(&self) -> Option<&ExpTerm> {
        self.terms
            .iter()
            .max_by(|a, b| a.rate.re.partial_cmp(&b.rate.re).unwrap())
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let e = (t.rate * x).exp() * t.coeff;
                let v = if t.power == 0 { e } else { e * x.powi(t.power as i32) };
                v.re
            })
            .sum()
    }

    pub fn add(&self, other: &ExpMixture) -> ExpMixture {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        ExpMixture { terms }
    }

    pub fn scale(&self, s: f64) -> ExpMixture {
        ExpMixture {
            terms: self
                .terms
                .iter()
                .map(|t| ExpTerm {
                    coeff: t.coeff * s,
                    ..*t
                })
                .collect(),
        }
    }

    /// Inverse Laplace transform of `num / den` with `deg num < deg den`.
    ///
    /// Uses the residue at each root of `den`; roots that coincide within
    /// [`poly::ROOT_MERGE_TOL`] are handled in confluent form, which produces
    /// polynomial-times-exponential terms.
    pub fn invert_rational(num: &[Complex64], den: &Poly) -> Result<ExpMixture> {
        let num_deg = num.iter().rposition(|c| *c != ZERO).unwrap_or(0);
        if den.degree() == 0 || num_deg >= den.degree() {
            return Err(Error::Degenerate(format!(
                "rational function is not proper (numerator degree {num_deg}, denominator degree {})",
                den.degree()
            )));
        }
        let roots = poly::roots(den)?;
        let num_is_real = num.iter().all(|c| c.im == 0.0);
        let mut terms = Vec::new();
        for (i, root) in roots.iter().enumerate() {
            if num_is_real && root.value.im < 0.0 {
                // Conjugate of a root already handled with a doubled weight.
                continue;
            }
            let weight = if num_is_real && root.value.im > 0.0 { 2.0 } else { 1.0 };
            let m = root.multiplicity;
            // den(s) = lead * (s - rho)^m * R(s); build R from the other roots.
            let mut rest = vec![Complex64::new(den.leading(), 0.0)];
            for (j, other) in roots.iter().enumerate() {
                if j == i {
                    continue;
                }
                for _ in 0..other.multiplicity {
                    rest = mul_linear(&rest, other.value);
                }
            }
            let n_t = poly::taylor_shift(num, root.value);
            let r_t = poly::taylor_shift(&rest, root.value);
            let f = series_divide(&n_t, &r_t, m);
            let mut factorial = 1.0;
            for k in 0..m {
                if k > 0 {
                    factorial *= k as f64;
                }
                let coeff = f[m - 1 - k] / factorial * weight;
                terms.push(ExpTerm {
                    rate: root.value,
                    coeff,
                    power: k as u32,
                });
            }
        }
        Ok(ExpMixture { terms })
    }

    /// `x -> int_0^x self(t) dt`, again as a mixture.
    pub fn antiderivative(&self) -> ExpMixture {
        let mut terms = Vec::new();
        for t in &self.terms {
            let k = t.power;
            if t.rate == ZERO {
                terms.push(ExpTerm {
                    rate: ZERO,
                    coeff: t.coeff / (k + 1) as f64,
                    power: k + 1,
                });
                continue;
            }
            // int t^k e^{rt} = e^{rt} sum_i (-1)^i k!/(k-i)! t^{k-i} / r^{i+1}
            let mut falling = 1.0;
            for i in 0..=k {
                if i > 0 {
                    falling *= (k - i + 1) as f64;
                }
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                terms.push(ExpTerm {
                    rate: t.rate,
                    coeff: t.coeff * sign * falling / t.rate.powu(i + 1),
                    power: k - i,
                });
            }
            // value of the antiderivative at 0 is the i = k term
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            terms.push(ExpTerm {
                rate: ZERO,
                coeff: -t.coeff * sign * falling / t.rate.powu(k + 1),
                power: 0,
            });
        }
        ExpMixture { terms }
    }
}

fn mul_linear(p: &[Complex64], root: Complex64) -> Vec<Complex64> {
    let mut out = vec![ZERO; p.len() + 1];
    for (k, &c) in p.iter().enumerate() {
        out[k + 1] += c;
        out[k] -= c * root;
    }
    out
}

/// First `n` Taylor coefficients of `a / b` given those of `a` and `b`.
fn series_divide(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; n];
    for k in 0..n {
        let mut s = *a.get(k).unwrap_or(&ZERO);
        for j in 0..k {
            s -= out[j] * *b.get(k - j).unwrap_or(&ZERO);
        }
        out[k] = s / b[0];
    }
    out
}

/// Exact value of `int_lower^upper outer(anchor - z) inner(z + shift) dz`.
///
/// The caller is responsible for clipping `[lower, upper]` to the region
/// where both arguments are nonnegative; the mixtures themselves are not
/// zero-extended.
pub fn convolve(
    outer: &ExpMixture,
    inner: &ExpMixture,
    anchor: f64,
    lower: f64,
    upper: f64,
    shift: f64,
) -> f64 {
    let width = upper - lower;
    if width <= 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    for a in &outer.terms {
        for b in &inner.terms {
            total += pair_integral(a, b, anchor, lower, upper, shift).re;
        }
    }
    total
}

fn pair_integral(
    a: &ExpTerm,
    b: &ExpTerm,
    anchor: f64,
    lower: f64,
    upper: f64,
    shift: f64,
) -> Complex64 {
    let width = upper - lower;
    let beta = b.rate - a.rate;
    // Expand around the endpoint at which e^{beta z} is largest so the
    // remaining exponential factor decays across the interval.
    let (prefactor, outer_base, outer_sign, inner_base, inner_sign, t_arg) = if beta.re <= 0.0 {
        (
            (a.rate * (anchor - lower) + b.rate * (lower + shift)).exp(),
            anchor - lower,
            -1.0,
            lower + shift,
            1.0,
            beta * width,
        )
    } else {
        (
            (a.rate * (anchor - upper) + b.rate * (upper + shift)).exp(),
            anchor - upper,
            1.0,
            upper + shift,
            -1.0,
            -beta * width,
        )
    };
    // (outer_base + outer_sign t)^j (inner_base + inner_sign t)^k as a polynomial in t
    let pj = binomial_poly(outer_base, outer_sign, a.power);
    let pk = binomial_poly(inner_base, inner_sign, b.power);
    let mut poly_t = vec![0.0; pj.len() + pk.len() - 1];
    for (i, x) in pj.iter().enumerate() {
        for (j, y) in pk.iter().enumerate() {
            poly_t[i + j] += x * y;
        }
    }
    let moments = exp_moments(t_arg, poly_t.len() - 1);
    let mut acc = ZERO;
    let mut wpow = width;
    for (n, c) in poly_t.iter().enumerate() {
        acc += moments[n] * (c * wpow);
        wpow *= width;
    }
    a.coeff * b.coeff * prefactor * acc
}

fn binomial_poly(base: f64, sign: f64, power: u32) -> Vec<f64> {
    let n = power as usize;
    let mut out = vec![0.0; n + 1];
    let mut binom = 1.0;
    for i in 0..=n {
        if i > 0 {
            binom = binom * (n - i + 1) as f64 / i as f64;
        }
        out[i] = binom * base.powi((n - i) as i32) * sign.powi(i as i32);
    }
    out
}

/// `E_n(t) = int_0^1 v^n e^{t v} dv` for `n = 0..=max_n`.
fn exp_moments(t: Complex64, max_n: usize) -> Vec<Complex64> {
    let mut out = vec![ZERO; max_n + 1];
    if t.norm() < (max_n as f64 + 2.0).max(3.0) {
        for (n, slot) in out.iter_mut().enumerate() {
            let mut term = Complex64::new(1.0, 0.0);
            let mut sum = Complex64::new(1.0 / (n as f64 + 1.0), 0.0);
            for k in 1..200 {
                term = term * t / k as f64;
                let add = term / (n + k + 1) as f64;
                sum += add;
                if add.norm() <= 1e-18 * sum.norm() {
                    break;
                }
            }
            *slot = sum;
        }
    } else {
        let et = t.exp();
        out[0] = (et - 1.0) / t;
        for n in 1..=max_n {
            out[n] = (et - out[n - 1] * n as f64) / t;
        }
    }
    out
}
