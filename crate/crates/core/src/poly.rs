//! Small dense polynomials and their roots.
//!
//! Every Laplace exponent in the model catalog is a rational function of
//! degree at most three, so the root finder only has to be good for low
//! degrees: exact zeros are deflated first, odd-degree real roots are
//! bracketed, quadratics use the cancellation-free formula, and anything of
//! degree four or more goes through Durand-Kerner.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Roots closer than this (relative to `max(1, |root|)`) are merged and
/// treated as one root of higher multiplicity.
pub const ROOT_MERGE_TOL: f64 = 1e-9;

/// Real polynomial, coefficients in ascending order of power.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly::new(vec![c])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn eval_c(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.coeffs.len() == 1 {
            return Poly::constant(0.0);
        }
        Poly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| k as f64 * c)
                .collect(),
        )
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::new(out)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.coeffs.len().max(other.coeffs.len());
        let out = (0..n)
            .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
            .collect();
        Poly::new(out)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect()
    }
}

/// Divides `p` by `(x - root)` with synthetic division, discarding the
/// remainder. Coefficients are ascending.
pub fn deflate(p: &[Complex64], root: Complex64) -> Vec<Complex64> {
    let n = p.len();
    if n <= 1 {
        return vec![Complex64::new(0.0, 0.0)];
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n - 1];
    let mut carry = Complex64::new(0.0, 0.0);
    for k in (1..n).rev() {
        carry = p[k] + carry * root;
        out[k - 1] = carry;
    }
    out
}

pub fn eval_complex(p: &[Complex64], z: Complex64) -> Complex64 {
    p.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
}

/// Taylor coefficients of `p` around `at`: returns `t` with
/// `p(at + s) = sum_k t[k] s^k`.
pub fn taylor_shift(p: &[Complex64], at: Complex64) -> Vec<Complex64> {
    let mut c = p.to_vec();
    let n = c.len();
    for i in 0..n {
        for k in (i..n - 1).rev() {
            let next = c[k + 1];
            c[k] += at * next;
        }
    }
    c
}

/// A root together with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub value: Complex64,
    pub multiplicity: usize,
}

/// All roots of a real polynomial, clustered by multiplicity.
pub fn roots(p: &Poly) -> Result<Vec<Root>> {
    if p.degree() == 0 {
        return Ok(Vec::new());
    }
    let mut coeffs = p.coeffs().to_vec();
    let mut found: Vec<Complex64> = Vec::new();

    // Exact zeros first, so that roots at the origin keep their multiplicity.
    while coeffs.len() > 1 && coeffs[0] == 0.0 {
        coeffs.remove(0);
        found.push(Complex64::new(0.0, 0.0));
    }
    let rest = Poly::new(coeffs);
    let mut others = match rest.degree() {
        0 => Vec::new(),
        1 => vec![Complex64::new(-rest.coeffs[0] / rest.coeffs[1], 0.0)],
        2 => quadratic_roots(rest.coeffs[2], rest.coeffs[1], rest.coeffs[0]),
        3 => cubic_roots(&rest)?,
        _ => durand_kerner(&rest)?,
    };
    for r in others.iter_mut() {
        *r = polish(&rest, *r);
    }
    found.extend(others);
    Ok(cluster(found))
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<Complex64> {
    let disc = b * b - 4.0 * a * c;
    let scale = b * b + (4.0 * a * c).abs();
    if disc.abs() <= 64.0 * f64::EPSILON * scale {
        let r = -b / (2.0 * a);
        return vec![Complex64::new(r, 0.0), Complex64::new(r, 0.0)];
    }
    if disc > 0.0 {
        let t = -0.5 * (b + b.signum() * disc.sqrt());
        let t = if t == 0.0 { -0.5 * disc.sqrt() } else { t };
        vec![Complex64::new(t / a, 0.0), Complex64::new(c / t, 0.0)]
    } else {
        let re = -b / (2.0 * a);
        let im = (-disc).sqrt() / (2.0 * a).abs();
        vec![Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

fn cubic_roots(p: &Poly) -> Result<Vec<Complex64>> {
    // A real cubic has a real root inside the Cauchy bound.
    let lead = p.leading();
    let bound = 1.0
        + p.coeffs()[..3]
            .iter()
            .map(|c| (c / lead).abs())
            .fold(0.0, f64::max);
    let (mut lo, mut hi) = (-bound, bound);
    let mut f_lo = p.eval(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = p.eval(mid);
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * mid.abs().max(1e-300) {
            break;
        }
    }
    let real = polish(p, Complex64::new(0.5 * (lo + hi), 0.0));
    let q = deflate(&p.to_complex(), real);
    let mut out = vec![real];
    out.extend(quadratic_roots(q[2].re, q[1].re, q[0].re));
    Ok(out)
}

fn durand_kerner(p: &Poly) -> Result<Vec<Complex64>> {
    let n = p.degree();
    let lead = p.leading();
    let monic: Vec<Complex64> = p.coeffs().iter().map(|&c| Complex64::new(c / lead, 0.0)).collect();
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = eval_complex(&monic, z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm() / z[i].norm().max(1.0));
        }
        if delta < 1e-15 {
            return Ok(z);
        }
    }
    Err(Error::Convergence {
        what: "polynomial root finder",
        iterations: 500,
        residual: z.iter().map(|&r| p.eval_c(r).norm()).fold(0.0, f64::max),
    })
}

/// A few Newton steps on the full polynomial, kept only while they reduce
/// the residual.
fn polish(p: &Poly, mut z: Complex64) -> Complex64 {
    let dp = p.derivative();
    let mut best = p.eval_c(z).norm();
    for _ in 0..8 {
        let d = dp.eval_c(z);
        if d.norm() == 0.0 {
            break;
        }
        let cand = z - p.eval_c(z) / d;
        let r = p.eval_c(cand).norm();
        if r < best {
            best = r;
            z = cand;
        } else {
            break;
        }
    }
    if z.im.abs() <= 1e-14 * z.re.abs().max(1.0) {
        z.im = 0.0;
    }
    z
}

fn cluster(mut raw: Vec<Complex64>) -> Vec<Root> {
    raw.sort_by(|a, b| b.re.partial_cmp(&a.re).unwrap().then(b.im.partial_cmp(&a.im).unwrap()));
    let mut out: Vec<(Complex64, usize)> = Vec::new();
    for r in raw {
        if let Some(last) = out.last_mut() {
            let centre = last.0 / last.1 as f64;
            if (centre - r).norm() <= ROOT_MERGE_TOL * centre.norm().max(1.0) {
                last.0 += r;
                last.1 += 1;
                continue;
            }
        }
        out.push((r, 1));
    }
    out.into_iter()
        .map(|(sum, m)| {
            let mut value = sum / m as f64;
            if value.im.abs() <= 1e-14 * value.re.abs().max(1.0) {
                value.im = 0.0;
            }
            Root {
                value,
                multiplicity: m,
            }
        })
        .collect()
}
