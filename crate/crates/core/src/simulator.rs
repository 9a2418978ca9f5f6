//! Monte Carlo simulation of the risk process and of Parisian ruin.
//!
//! Every path `i` owns two ChaCha8 streams derived from `(seed, i)`: one
//! for the path itself (inter-jump times, claim sizes, Gaussian increments,
//! bridge uniforms) and one for implementation clocks. Path values are
//! collected in index order and summed sequentially, so estimates do not
//! depend on the number of worker threads.
//!
//! [`Scheme::EventDriven`] (bounded variation, `sigma = 0`) follows the
//! path between claims along straight lines and solves every level
//! crossing exactly. Each negative 0-excursion draws one exponential clock
//! on entry; with `epsilon > 0` its countdown starts at the first time the
//! excursion is below `-epsilon`. Since the path stream is untouched by
//! clocks and `epsilon`, runs at different `epsilon` share the same path
//! and clocks, and ruin at a larger `epsilon` implies ruin at a smaller one.
//!
//! [`Scheme::EulerGrid`] samples exact Gaussian plus compound Poisson
//! increments on a grid of step at most `dt`, refined at claim instants and
//! at the arrivals of a rate-`q` Poisson process. Barrier passages between
//! grid points are detected with Brownian-bridge crossing probabilities.
//! With `epsilon = 0` ruin is declared at the first Poisson arrival at which
//! `X < 0`; by memorylessness this has the law of the Parisian ruin time, so
//! the scheme carries no grid bias for ruin events. Upper exits are dated at
//! the end of the grid interval in which they are detected. With
//! `epsilon > 0` the condition "the current excursion has been below
//! `-epsilon`" is tracked through bridge probabilities for each level
//! separately, which is approximate inside an interval.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::levy_model::LevyModel;
use crate::poly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EventDriven,
    EulerGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub scheme: Scheme,
    /// Largest grid step for [`Scheme::EulerGrid`].
    pub dt: f64,
    pub epsilon: f64,
    pub n_paths: usize,
    pub horizon: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn event_driven(n_paths: usize, horizon: f64, seed: u64) -> Self {
        SimConfig { scheme: Scheme::EventDriven, dt: 0.0, epsilon: 0.0, n_paths, horizon, seed }
    }

    pub fn euler(dt: f64, n_paths: usize, horizon: f64, seed: u64) -> Self {
        SimConfig { scheme: Scheme::EulerGrid, dt, epsilon: 0.0, n_paths, horizon, seed }
    }

    pub fn validate(&self, model: &LevyModel) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::domain("n_paths > 0", "n_paths = 0"));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::domain("horizon > 0", format!("horizon = {}", self.horizon)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::domain("epsilon >= 0", format!("epsilon = {}", self.epsilon)));
        }
        match self.scheme {
            Scheme::EulerGrid => {
                if !(self.dt > 0.0) || !self.dt.is_finite() {
                    return Err(Error::domain("dt > 0", format!("dt = {}", self.dt)));
                }
            }
            Scheme::EventDriven => {
                if model.sigma != 0.0 {
                    return Err(Error::domain(
                        "EventDriven requires sigma = 0",
                        format!("sigma = {}", model.sigma),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    ParisianRuin,
    UpperExit,
    LowerExit,
    Survived,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RuinOutcome {
    pub kind: OutcomeKind,
    pub time: f64,
    pub position: f64,
}

impl RuinOutcome {
    fn new(kind: OutcomeKind, time: f64, position: f64) -> Self {
        RuinOutcome { kind, time, position }
    }
}

/// The two random streams of one path.
#[derive(Debug, Clone)]
pub struct PathStreams {
    pub path: ChaCha8Rng,
    pub clock: ChaCha8Rng,
}

impl PathStreams {
    pub fn new(seed: u64, index: u64) -> Self {
        let mut path = ChaCha8Rng::seed_from_u64(seed);
        path.set_stream(2 * index);
        let mut clock = ChaCha8Rng::seed_from_u64(seed);
        clock.set_stream(2 * index + 1);
        PathStreams { path, clock }
    }
}

/// One increment `mu dt + sigma sqrt(dt) N - (sum of claims in dt)`.
pub fn sample_increment<R: Rng + ?Sized>(model: &LevyModel, dt: f64, rng: &mut R) -> f64 {
    let mut inc = model.mu * dt;
    if model.sigma > 0.0 {
        let z: f64 = StandardNormal.sample(rng);
        inc += model.sigma * dt.sqrt() * z;
    }
    if model.has_jumps() {
        let gaps = Exp::new(model.jump_rate).unwrap();
        let sizes = Exp::new(model.jump_mean_inv).unwrap();
        let mut t = gaps.sample(rng);
        while t <= dt {
            inc -= sizes.sample(rng);
            t += gaps.sample(rng);
        }
    }
    inc
}

fn exp_dist(rate: f64) -> Option<Exp<f64>> {
    if rate > 0.0 {
        Exp::new(rate).ok()
    } else {
        None
    }
}

fn draw(dist: &Option<Exp<f64>>, rng: &mut ChaCha8Rng) -> f64 {
    match dist {
        Some(d) => d.sample(rng),
        None => f64::INFINITY,
    }
}

/// Runs one path from `x` with ruin level `-a` and exit level `b`
/// (either may be infinite).
pub fn simulate_parisian(
    model: &LevyModel,
    q: f64,
    x: f64,
    a: f64,
    b: f64,
    cfg: &SimConfig,
    streams: &mut PathStreams,
) -> Result<RuinOutcome> {
    check_path_args(q, x, a, b)?;
    cfg.validate(model)?;
    Ok(match cfg.scheme {
        Scheme::EventDriven => event_driven(model, q, x, a, b, cfg, streams, |_, _, _| {}),
        Scheme::EulerGrid => euler_grid(model, q, x, a, b, cfg, streams),
    })
}

fn check_path_args(q: f64, x: f64, a: f64, b: f64) -> Result<()> {
    if !(q > 0.0) {
        return Err(Error::domain("q > 0", format!("q = {q}")));
    }
    if !(a >= 0.0) || !(b >= 0.0) {
        return Err(Error::domain("a, b >= 0", format!("a = {a}, b = {b}")));
    }
    if !(x >= -a && x <= b) || !x.is_finite() {
        return Err(Error::domain("x in [-a, b]", format!("x = {x}, a = {a}, b = {b}")));
    }
    Ok(())
}

/// Exact simulation for `sigma = 0`. `segment(t0, x0, t1)` is called for
/// every linear piece `X_t = x0 + c (t - t0)` on `[t0, t1)` before the
/// path stops.
#[allow(clippy::too_many_arguments)]
fn event_driven<F: FnMut(f64, f64, f64)>(
    model: &LevyModel,
    q: f64,
    x0: f64,
    a: f64,
    b: f64,
    cfg: &SimConfig,
    streams: &mut PathStreams,
    mut segment: F,
) -> RuinOutcome {
    use OutcomeKind::*;
    let c = model.mu;
    let horizon = cfg.horizon;
    let eps = cfg.epsilon;
    let gaps = exp_dist(model.jump_rate);
    let sizes = exp_dist(model.jump_mean_inv);
    let clocks = exp_dist(q);
    let at = |t0: f64, x0: f64, t: f64| x0 + c * (t - t0);

    if x0 >= b {
        return RuinOutcome::new(UpperExit, 0.0, b);
    }
    let (mut t, mut x) = (0.0, x0);
    let mut clock: Option<f64> = None;
    let mut count_from: Option<f64> = None;
    if x < 0.0 {
        clock = Some(draw(&clocks, &mut streams.clock));
        if x < -eps {
            count_from = Some(0.0);
        }
    }
    let mut next_jump = draw(&gaps, &mut streams.path);
    loop {
        if x < 0.0 {
            let t_up = if c > 0.0 { t + (-x) / c } else { f64::INFINITY };
            let t_ring = match (count_from, clock) {
                (Some(s), Some(e)) => s + e,
                _ => f64::INFINITY,
            };
            let t_stop = next_jump.min(t_up).min(t_ring).min(horizon);
            segment(t, x, t_stop);
            if t_ring <= t_stop && t_ring < t_up && t_ring <= horizon {
                return RuinOutcome::new(ParisianRuin, t_ring, at(t, x, t_ring));
            }
            if horizon <= t_stop && horizon < next_jump && horizon < t_up {
                return RuinOutcome::new(Survived, horizon, at(t, x, horizon));
            }
            if t_up <= next_jump {
                t = t_up;
                x = 0.0;
                clock = None;
                count_from = None;
                continue;
            }
        } else {
            let t_b = if c > 0.0 && b.is_finite() { t + (b - x) / c } else { f64::INFINITY };
            let t_stop = next_jump.min(t_b).min(horizon);
            segment(t, x, t_stop);
            if t_b <= t_stop {
                return RuinOutcome::new(UpperExit, t_b, b);
            }
            if horizon <= t_stop && horizon < next_jump {
                return RuinOutcome::new(Survived, horizon, at(t, x, horizon));
            }
        }
        // claim at next_jump
        x = at(t, x, next_jump) - draw(&sizes, &mut streams.path);
        t = next_jump;
        if x < -a {
            return RuinOutcome::new(LowerExit, t, x);
        }
        if x < 0.0 {
            if clock.is_none() {
                clock = Some(draw(&clocks, &mut streams.clock));
            }
            if count_from.is_none() && x < -eps {
                count_from = Some(t);
            }
        }
        next_jump = t + draw(&gaps, &mut streams.path);
    }
}

/// Probability that a Brownian bridge between `x0` and `x1` over time `h`
/// touches `level`, both endpoints on the same side of it.
fn bridge_cross(x0: f64, x1: f64, level: f64, var: f64) -> f64 {
    if var <= 0.0 || !level.is_finite() {
        return 0.0;
    }
    (-2.0 * (x0 - level) * (x1 - level) / var).exp()
}

fn euler_grid(
    model: &LevyModel,
    q: f64,
    x0: f64,
    a: f64,
    b: f64,
    cfg: &SimConfig,
    streams: &mut PathStreams,
) -> RuinOutcome {
    use OutcomeKind::*;
    let horizon = cfg.horizon;
    let eps = cfg.epsilon;
    let s2 = model.sigma * model.sigma;
    let gaps = exp_dist(model.jump_rate);
    let sizes = exp_dist(model.jump_mean_inv);
    let arrivals = exp_dist(q);
    let lower = -a;

    if x0 >= b {
        return RuinOutcome::new(UpperExit, 0.0, b);
    }
    let (mut t, mut x) = (0.0, x0);
    // whether the excursion in progress has been below -eps
    let mut deep = x < -eps;
    let mut next_jump = draw(&gaps, &mut streams.path);
    let mut next_arrival = draw(&arrivals, &mut streams.clock);
    loop {
        let t_next = (t + cfg.dt).min(next_jump).min(next_arrival).min(horizon);
        let h = t_next - t;
        let mut x1 = x + model.mu * h;
        if model.sigma > 0.0 {
            let z: f64 = StandardNormal.sample(&mut streams.path);
            x1 += model.sigma * h.sqrt() * z;
        }
        let var = s2 * h;
        if x1 >= b || streams.path.random::<f64>() < bridge_cross(x, x1, b, var) {
            return RuinOutcome::new(UpperExit, t_next, b);
        }
        if x1 < lower || streams.path.random::<f64>() < bridge_cross(x, x1, lower, var) {
            return RuinOutcome::new(LowerExit, t_next, lower);
        }
        if eps > 0.0 {
            let u_zero: f64 = streams.path.random();
            let u_eps: f64 = streams.path.random();
            if x1 >= 0.0 {
                deep = false;
            } else {
                let restarted = x >= 0.0 || u_zero < bridge_cross(x, x1, 0.0, var);
                let touched = x1 < -eps || (x >= -eps && u_eps < bridge_cross(x, x1, -eps, var));
                deep = touched || (deep && !restarted);
            }
        }
        t = t_next;
        x = x1;
        if t == next_jump {
            x -= draw(&sizes, &mut streams.path);
            if x < lower {
                return RuinOutcome::new(LowerExit, t, x);
            }
            if x < -eps {
                deep = true;
            }
            next_jump = t + draw(&gaps, &mut streams.path);
        }
        if t == next_arrival {
            if x < 0.0 && (eps == 0.0 || deep) {
                return RuinOutcome::new(ParisianRuin, t, x);
            }
            next_arrival = t + draw(&arrivals, &mut streams.clock);
        }
        if t >= horizon {
            return RuinOutcome::new(Survived, horizon, x);
        }
    }
}

/// Test function applied to the deficit `X_{tau_q}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    Constant,
    Exponential(f64),
    /// Indicator of `[lo, hi]`.
    Bin(f64, f64),
}

impl Penalty {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            Penalty::Constant => 1.0,
            Penalty::Exponential(lam) => (lam * y).exp(),
            Penalty::Bin(lo, hi) => {
                if y >= lo && y <= hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
    pub ci95: (f64, f64),
    /// No path produced a nonzero value; `ci95` is then the exact binomial
    /// interval for zero successes.
    pub zero_events: bool,
}

impl Estimate {
    /// Mean and standard error of `values`, summed in order.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        let nf = n as f64;
        if values.iter().all(|v| *v == 0.0) {
            return Estimate {
                mean: 0.0,
                std_error: 0.0,
                n,
                ci95: (0.0, 1.0 - 0.025f64.powf(1.0 / nf)),
                zero_events: true,
            };
        }
        let mean = values.iter().sum::<f64>() / nf;
        let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
        let var = if n > 1 { ss / (nf - 1.0) } else { 0.0 };
        let se = (var / nf).sqrt();
        Estimate { mean, std_error: se, n, ci95: (mean - 1.96 * se, mean + 1.96 * se), zero_events: false }
    }

    /// `|mean - target|` in standard errors (infinite if the error is zero
    /// and the target differs).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Evaluates `f` on every path index in parallel and returns the values
/// in index order.
fn per_path<F>(n: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(u64) -> Result<f64> + Sync + Send,
{
    (0..n as u64).into_par_iter().map(f).collect()
}

/// Monte Carlo estimate of `E_x[e^{-theta tau_q} penalty(X_{tau_q}); tau_q < tau_b^+ ^ tau_{-a}^-]`
/// restricted to `tau_q <= horizon`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gs(
    model: &LevyModel,
    theta: f64,
    q: f64,
    x: f64,
    a: f64,
    b: f64,
    penalty: Penalty,
    cfg: &SimConfig,
) -> Result<Estimate> {
    check_path_args(q, x, a, b)?;
    cfg.validate(model)?;
    if !(theta >= 0.0) {
        return Err(Error::domain("theta >= 0", format!("theta = {theta}")));
    }
    let values = per_path(cfg.n_paths, |i| {
        let mut s = PathStreams::new(cfg.seed, i);
        let o = simulate_parisian(model, q, x, a, b, cfg, &mut s)?;
        Ok(if o.kind == OutcomeKind::ParisianRuin {
            (-theta * o.time).exp() * penalty.eval(o.position)
        } else {
            0.0
        })
    })?;
    Ok(Estimate::from_values(&values))
}

/// An estimate of an infinite-horizon quantity together with the horizon
/// used and a bound on the probability mass cut off by it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedEstimate {
    pub estimate: Estimate,
    pub horizon: f64,
    pub tail_bound: f64,
}

/// As [`estimate_gs`], ignoring `cfg.horizon` and choosing one so that
/// [`tail_bound`] stays below a fifth of the standard error. Requires the
/// net profit condition. The search is deterministic.
#[allow(clippy::too_many_arguments)]
pub fn estimate_gs_truncated(
    model: &LevyModel,
    theta: f64,
    q: f64,
    x: f64,
    a: f64,
    b: f64,
    penalty: Penalty,
    cfg: &SimConfig,
) -> Result<TruncatedEstimate> {
    let mut se_guess = 0.5 / (cfg.n_paths as f64).sqrt();
    let mut last = None;
    for _ in 0..4 {
        let horizon = suggest_horizon(model, x, 0.1 * se_guess)?;
        let run = SimConfig { horizon, ..*cfg };
        let estimate = estimate_gs(model, theta, q, x, a, b, penalty, &run)?;
        let bound = tail_bound(model, x, horizon)?;
        let result = TruncatedEstimate { estimate, horizon, tail_bound: bound };
        if estimate.zero_events || bound < estimate.std_error / 5.0 {
            return Ok(result);
        }
        se_guess = estimate.std_error.min(se_guess / 4.0);
        last = Some(result);
    }
    Ok(last.expect("at least one run"))
}

/// Largest negative root of `psi(lam) = 0`, negated: the Lundberg
/// coefficient `R` with `P_z(tau_0^- < inf) <= e^{-R z}`.
pub fn adjustment_coefficient(model: &LevyModel) -> Result<f64> {
    let roots = poly::roots(&model.exponent_numerator(0.0))?;
    let r = roots
        .iter()
        .map(|r| r.value.re)
        .filter(|v| *v < -1e-12)
        .fold(f64::NEG_INFINITY, f64::max);
    if !r.is_finite() {
        return Err(Error::Degenerate("psi has no negative root".into()));
    }
    Ok(-r)
}

fn chernoff_rate(model: &LevyModel, r: f64) -> f64 {
    let drift = model.net_profit_drift();
    let f = |l: f64| 0.5 * l * drift + model.psi(-l);
    // golden-section search for the minimum of a convex function on (0, r)
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, r);
    for _ in 0..200 {
        let m1 = hi - g * (hi - lo);
        let m2 = lo + g * (hi - lo);
        if f(m1) < f(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    -f(0.5 * (lo + hi))
}

/// Upper bound on `P_x(X_s < 0 for some s >= horizon)`, which bounds every
/// ruin-type event cut off by the horizon. Combines a Chernoff bound for
/// `X_T < x + psi'(0+) T / 2` with the Lundberg bound from that level.
pub fn tail_bound(model: &LevyModel, x: f64, horizon: f64) -> Result<f64> {
    let drift = model.net_profit_drift();
    if !(drift > 0.0) {
        return Err(Error::domain("net profit condition psi'(0+) > 0", format!("psi'(0+) = {drift}")));
    }
    let r = adjustment_coefficient(model)?;
    let rate = chernoff_rate(model, r);
    Ok((-rate * horizon).exp() + (-r * (x.max(0.0) + 0.5 * drift * horizon)).exp())
}

/// Smallest horizon (at least 1) for which [`tail_bound`] is at most `tol`
/// by the two halves of the bound separately.
pub fn suggest_horizon(model: &LevyModel, x: f64, tol: f64) -> Result<f64> {
    let drift = model.net_profit_drift();
    if !(drift > 0.0) {
        return Err(Error::domain("net profit condition psi'(0+) > 0", format!("psi'(0+) = {drift}")));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::domain("0 < tol < 1", format!("tol = {tol}")));
    }
    let r = adjustment_coefficient(model)?;
    let rate = chernoff_rate(model, r);
    let l = (2.0 / tol).ln();
    let t1 = l / rate;
    let t2 = 2.0 * (l / r - x.max(0.0)) / drift;
    Ok(t1.max(t2).max(1.0))
}

/// Estimates `P(tau_q^eps <= horizon)` with no barriers for each epsilon,
/// all on the same paths and clocks.
pub fn epsilon_bias_scan(model: &LevyModel, q: f64, x: f64, cfg: &SimConfig, eps_list: &[f64]) -> Result<Vec<Estimate>> {
    Ok(coupled_epsilon_runs(model, q, x, f64::INFINITY, f64::INFINITY, cfg, eps_list)?.estimates)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingReport {
    pub estimates: Vec<Estimate>,
    pub ruin_counts: Vec<usize>,
    /// Paths on which ruin was declared for a larger epsilon but not for a
    /// smaller one, or earlier for the larger one.
    pub violations: usize,
}

/// Runs every path once per epsilon and checks pathwise that ruin at a
/// larger epsilon implies ruin, no later, at each smaller one.
pub fn coupled_epsilon_runs(
    model: &LevyModel,
    q: f64,
    x: f64,
    a: f64,
    b: f64,
    cfg: &SimConfig,
    eps_list: &[f64],
) -> Result<CouplingReport> {
    if cfg.scheme != Scheme::EventDriven {
        return Err(Error::domain("epsilon scan requires EventDriven", format!("{:?}", cfg.scheme)));
    }
    if eps_list.iter().any(|e| !(*e >= 0.0)) {
        return Err(Error::domain("epsilon >= 0", format!("{eps_list:?}")));
    }
    let mut order: Vec<usize> = (0..eps_list.len()).collect();
    order.sort_by(|i, j| eps_list[*j].partial_cmp(&eps_list[*i]).unwrap());
    let rows: Vec<Vec<Option<f64>>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            eps_list
                .iter()
                .map(|eps| {
                    let run = SimConfig { epsilon: *eps, ..*cfg };
                    let mut s = PathStreams::new(cfg.seed, i);
                    let o = simulate_parisian(model, q, x, a, b, &run, &mut s)?;
                    Ok((o.kind == OutcomeKind::ParisianRuin).then_some(o.time))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let mut violations = 0;
    for row in &rows {
        let bad = order.windows(2).any(|w| match (row[w[0]], row[w[1]]) {
            (Some(big), Some(small)) => small > big,
            (Some(_), None) => true,
            _ => false,
        });
        if bad {
            violations += 1;
        }
    }
    let mut estimates = Vec::new();
    let mut ruin_counts = Vec::new();
    for k in 0..eps_list.len() {
        let values: Vec<f64> = rows.iter().map(|r| if r[k].is_some() { 1.0 } else { 0.0 }).collect();
        ruin_counts.push(values.iter().filter(|v| **v > 0.0).count());
        estimates.push(Estimate::from_values(&values));
    }
    Ok(CouplingReport { estimates, ruin_counts, violations })
}

/// Monte Carlo estimate of `E_x[e^{-q tau_level^+}; tau_0^- > tau_level^+]`.
/// The horizon is `cfg.horizon`; discounting makes the cut-off mass at most
/// `e^{-q horizon}`.
pub fn estimate_exit_identity(model: &LevyModel, q: f64, x: f64, level: f64, cfg: &SimConfig) -> Result<Estimate> {
    check_path_args(q, x, 0.0, level)?;
    cfg.validate(model)?;
    let values = per_path(cfg.n_paths, |i| {
        let mut s = PathStreams::new(cfg.seed, i);
        let o = simulate_parisian(model, q, x, 0.0, level, cfg, &mut s)?;
        Ok(if o.kind == OutcomeKind::UpperExit { (-q * o.time).exp() } else { 0.0 })
    })?;
    Ok(Estimate::from_values(&values))
}

/// Monte Carlo estimates of the discounted occupation density
/// `int_0^inf e^{-q t} P_x(X_t in dy, t < tau_level^+ ^ tau_0^-) dt / dy`
/// averaged over each bin. Exact path integrals; `EventDriven` only.
pub fn estimate_occupation(
    model: &LevyModel,
    q: f64,
    x: f64,
    level: f64,
    bins: &[(f64, f64)],
    cfg: &SimConfig,
) -> Result<Vec<Estimate>> {
    check_path_args(q, x, 0.0, level)?;
    cfg.validate(model)?;
    if cfg.scheme != Scheme::EventDriven {
        return Err(Error::Unsupported("occupation densities need the EventDriven scheme".into()));
    }
    for &(lo, hi) in bins {
        if !(lo < hi) {
            return Err(Error::domain("bin lo < hi", format!("[{lo}, {hi}]")));
        }
    }
    let c = model.mu;
    let rows: Vec<Vec<f64>> = (0..cfg.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = PathStreams::new(cfg.seed, i);
            let mut acc = vec![0.0; bins.len()];
            event_driven(model, q, x, 0.0, level, cfg, &mut s, |t0, x0, t1| {
                if t1 <= t0 {
                    return;
                }
                for (k, &(lo, hi)) in bins.iter().enumerate() {
                    // times in [t0, t1] with x0 + c (t - t0) in [lo, hi]
                    let s0 = t0 + ((lo - x0) / c).max(0.0);
                    let s1 = (t0 + (hi - x0) / c).min(t1);
                    if s1 > s0 {
                        acc[k] += ((-q * s0).exp() - (-q * s1).exp()) / q / (hi - lo);
                    }
                }
            });
            acc
        })
        .collect();
    Ok((0..bins.len())
        .map(|k| Estimate::from_values(&rows.iter().map(|r| r[k]).collect::<Vec<_>>()))
        .collect())
}

/// One JSON-lines summary record of a simulation run.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRecord {
    pub estimator: String,
    pub model: LevyModel,
    pub params: BTreeMap<String, f64>,
    pub n: usize,
    pub mean: f64,
    pub se: f64,
    pub ci95: [f64; 2],
    pub scheme: Scheme,
    pub dt: Option<f64>,
    pub epsilon: f64,
    pub seed: u64,
    pub horizon: f64,
}

impl SummaryRecord {
    pub fn new(
        estimator: &str,
        model: &LevyModel,
        params: &[(&str, f64)],
        estimate: &Estimate,
        cfg: &SimConfig,
    ) -> Self {
        SummaryRecord {
            estimator: estimator.to_string(),
            model: *model,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            n: estimate.n,
            mean: estimate.mean,
            se: estimate.std_error,
            ci95: [estimate.ci95.0, estimate.ci95.1],
            scheme: cfg.scheme,
            dt: (cfg.scheme == Scheme::EulerGrid).then_some(cfg.dt),
            epsilon: cfg.epsilon,
            seed: cfg.seed,
            horizon: cfg.horizon,
        }
    }

    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(self).expect("summary records serialize")
    }
}
