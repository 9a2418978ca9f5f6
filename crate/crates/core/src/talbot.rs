//! Fixed-Talbot numerical inversion of Laplace transforms.

use num_complex::Complex64;

pub const TALBOT_NODES: usize = 48;

/// Inverts `transform` at time `t > 0` on the fixed Talbot contour with `m`
/// nodes and radius `2m / (5t)`. The contour is shifted right by `shift`,
/// which must exceed the real part of every singularity of `transform`.
pub fn fixed_talbot<F>(transform: F, t: f64, m: usize, shift: f64) -> f64
where
    F: Fn(Complex64) -> Complex64,
{
    let r = 2.0 * m as f64 / (5.0 * t);
    let mut sum = 0.5 * (transform(Complex64::new(r + shift, 0.0)) * (r * t).exp()).re;
    for k in 1..m {
        let theta = k as f64 * std::f64::consts::PI / m as f64;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let sigma = theta + (theta * cot - 1.0) * cot;
        let term = (s * t).exp() * transform(s + shift) * Complex64::new(1.0, sigma);
        sum += term.re;
    }
    (shift * t).exp() * r / m as f64 * sum
}
