//! Adaptive Gauss-Legendre quadrature on 15-point panels.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const PANEL_POINTS: usize = 15;
pub const MAX_DEPTH: u32 = 30;
/// Refinement stops once this many panels have been evaluated; the final
/// error check then reports the shortfall.
pub const MAX_PANELS: usize = 100_000;

/// Gauss-Legendre nodes and weights on [-1, 1], found by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn rule() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_POINTS))
}

/// One fixed 15-point panel.
pub fn panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (nodes, weights) = rule();
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    nodes
        .iter()
        .zip(weights)
        .map(|(x, w)| w * f(mid + half * x))
        .sum::<f64>()
        * half
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-10, abs: 1e-14 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

/// Integrates `f` over `[a, b]`, splitting first at every breakpoint that
/// falls strictly inside the interval.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<QuadResult> {
    if b <= a {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    let mut cuts: Vec<f64> = vec![a];
    let mut inner: Vec<f64> = breakpoints.iter().copied().filter(|&p| p > a && p < b).collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.extend(inner);
    cuts.push(b);

    let coarse: f64 = cuts.windows(2).map(|w| panel(&f, w[0], w[1]).abs()).sum();
    let target = (tol.rel * coarse).max(tol.abs);
    let total_width = b - a;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut used = 0;
    for w in cuts.windows(2) {
        let whole = panel(&f, w[0], w[1]);
        let budget = target * (w[1] - w[0]) / total_width;
        let (v, e) = refine(&f, w[0], w[1], whole, budget, 0, &mut used);
        value += v;
        error += e;
    }
    if !value.is_finite() {
        return Err(Error::Quadrature { achieved: f64::INFINITY, requested: target });
    }
    if error > target * 10.0 {
        return Err(Error::Quadrature { achieved: error, requested: target });
    }
    Ok(QuadResult { value, error })
}

fn refine<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    whole: f64,
    budget: f64,
    depth: u32,
    used: &mut usize,
) -> (f64, f64) {
    let m = 0.5 * (a + b);
    let left = panel(f, a, m);
    let right = panel(f, m, b);
    *used += 2;
    let split = left + right;
    let err = (split - whole).abs();
    if err <= budget || depth >= MAX_DEPTH || m <= a || m >= b || *used >= MAX_PANELS {
        return (split, err);
    }
    let (lv, le) = refine(f, a, m, left, 0.5 * budget, depth + 1, used);
    let (rv, re) = refine(f, m, b, right, 0.5 * budget, depth + 1, used);
    (lv + rv, le + re)
}
