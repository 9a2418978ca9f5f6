//! Catalog of spectrally negative Levy risk models.
//!
//! Every model is `X_t = mu t + sigma B_t - S_t` where `S` is a compound
//! Poisson process with rate `jump_rate` and exponential claim sizes of rate
//! `jump_mean_inv`. The natural drift `mu` (the premium rate `c` for the
//! Cramer-Lundberg family) is exposed instead of the compensated
//! Levy-Khintchine drift; with finite jump activity the two differ by
//! `int_(0,1) x Pi(dx)` and no formula here needs the compensated one.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    BrownianDrift,
    CramerLundbergExp,
    JumpDiffusionExp,
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::BrownianDrift => "brownian_drift",
            Family::CramerLundbergExp => "cramer_lundberg_exp",
            Family::JumpDiffusionExp => "jump_diffusion_exp",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VariationClass {
    Bounded,
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevyModel {
    pub family: Family,
    pub mu: f64,
    pub sigma: f64,
    pub jump_rate: f64,
    pub jump_mean_inv: f64,
}

/// On-disk model description. Fields not used by a family may be omitted.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub mu: Option<f64>,
    pub sigma: Option<f64>,
    pub jump_rate: Option<f64>,
    pub jump_mean_inv: Option<f64>,
}

const MAX_NEWTON: usize = 200;

impl LevyModel {
    /// Builds a model and checks every family invariant, reporting all
    /// violations at once.
    pub fn new(family: Family, mu: f64, sigma: f64, jump_rate: f64, jump_mean_inv: f64) -> Result<Self> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("mu", mu),
            ("sigma", sigma),
            ("jump_rate", jump_rate),
            ("jump_mean_inv", jump_mean_inv),
        ] {
            if !v.is_finite() {
                bad.push(format!("{name} must be finite (got {v})"));
            }
        }
        if sigma < 0.0 {
            bad.push(format!("sigma must be >= 0 (got {sigma})"));
        }
        if jump_rate < 0.0 {
            bad.push(format!("jump_rate must be >= 0 (got {jump_rate})"));
        }
        match family {
            Family::BrownianDrift => {
                if sigma <= 0.0 {
                    bad.push(format!("sigma must be > 0 for brownian_drift (got {sigma})"));
                }
                if jump_rate != 0.0 {
                    bad.push(format!("jump_rate must be 0 for brownian_drift (got {jump_rate})"));
                }
            }
            Family::CramerLundbergExp => {
                if sigma != 0.0 {
                    bad.push(format!("sigma must be 0 for cramer_lundberg_exp (got {sigma})"));
                }
                if mu <= 0.0 {
                    bad.push(format!("mu (premium rate) must be > 0 for cramer_lundberg_exp (got {mu})"));
                }
                if jump_rate <= 0.0 {
                    bad.push(format!("jump_rate must be > 0 for cramer_lundberg_exp (got {jump_rate})"));
                }
            }
            Family::JumpDiffusionExp => {
                if sigma <= 0.0 {
                    bad.push(format!("sigma must be > 0 for jump_diffusion_exp (got {sigma})"));
                }
            }
        }
        if family != Family::BrownianDrift && jump_mean_inv <= 0.0 {
            bad.push(format!("jump_mean_inv must be > 0 (got {jump_mean_inv})"));
        }
        if bad.is_empty() {
            Ok(LevyModel {
                family,
                mu,
                sigma,
                jump_rate,
                jump_mean_inv,
            })
        } else {
            Err(Error::InvalidModel(bad))
        }
    }

    pub fn brownian(mu: f64, sigma: f64) -> Result<Self> {
        Self::new(Family::BrownianDrift, mu, sigma, 0.0, 1.0)
    }

    pub fn cramer_lundberg(premium: f64, jump_rate: f64, jump_mean_inv: f64) -> Result<Self> {
        Self::new(Family::CramerLundbergExp, premium, 0.0, jump_rate, jump_mean_inv)
    }

    pub fn jump_diffusion(mu: f64, sigma: f64, jump_rate: f64, jump_mean_inv: f64) -> Result<Self> {
        Self::new(Family::JumpDiffusionExp, mu, sigma, jump_rate, jump_mean_inv)
    }

    pub fn from_spec(spec: &ModelSpec) -> Result<Self> {
        let mut missing = Vec::new();
        let mut need = |name: &str, v: Option<f64>| match v {
            Some(v) => v,
            None => {
                missing.push(format!("missing field {name}"));
                f64::NAN
            }
        };
        let model = match spec.family {
            Family::BrownianDrift => {
                let mu = need("mu", spec.mu);
                let sigma = need("sigma", spec.sigma);
                (mu, sigma, spec.jump_rate.unwrap_or(0.0), spec.jump_mean_inv.unwrap_or(1.0))
            }
            Family::CramerLundbergExp => {
                let mu = need("mu", spec.mu);
                let rate = need("jump_rate", spec.jump_rate);
                let inv = need("jump_mean_inv", spec.jump_mean_inv);
                (mu, spec.sigma.unwrap_or(0.0), rate, inv)
            }
            Family::JumpDiffusionExp => {
                let mu = need("mu", spec.mu);
                let sigma = need("sigma", spec.sigma);
                let rate = need("jump_rate", spec.jump_rate);
                let inv = need("jump_mean_inv", spec.jump_mean_inv);
                (mu, sigma, rate, inv)
            }
        };
        if !missing.is_empty() {
            return Err(Error::InvalidModel(missing));
        }
        Self::new(spec.family, model.0, model.1, model.2, model.3)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("model file: {e}")))?;
        match value.get("family") {
            None => return Err(Error::InvalidModel(vec!["missing field family".into()])),
            Some(serde_json::Value::String(f))
                if !["brownian_drift", "cramer_lundberg_exp", "jump_diffusion_exp"].contains(&f.as_str()) =>
            {
                return Err(Error::InvalidModel(vec![format!(
                    "unknown family '{f}' (expected brownian_drift, cramer_lundberg_exp or jump_diffusion_exp)"
                )]));
            }
            _ => {}
        }
        let spec: ModelSpec =
            serde_json::from_value(value).map_err(|e| Error::Config(format!("model file: {e}")))?;
        Self::from_spec(&spec)
    }

    pub fn to_json(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("family".into(), serde_json::Value::String(self.family.to_string()));
        obj.insert("mu".into(), self.mu.into());
        obj.insert("sigma".into(), self.sigma.into());
        obj.insert("jump_rate".into(), self.jump_rate.into());
        if self.has_jumps() {
            obj.insert("jump_mean_inv".into(), self.jump_mean_inv.into());
        }
        serde_json::Value::Object(obj).to_string()
    }

    pub fn has_jumps(&self) -> bool {
        self.jump_rate > 0.0
    }

    pub fn variation(&self) -> VariationClass {
        if self.sigma == 0.0 {
            VariationClass::Bounded
        } else {
            VariationClass::Unbounded
        }
    }

    fn jump_part(&self, lam: f64) -> f64 {
        if self.has_jumps() {
            self.jump_rate * lam / (self.jump_mean_inv + lam)
        } else {
            0.0
        }
    }

    /// The Laplace exponent `psi(lam) = log E[e^{lam X_1}]` for `lam >= 0`.
    pub fn laplace_exponent(&self, lam: f64) -> Result<f64> {
        if !(lam >= 0.0) {
            return Err(Error::domain("lambda >= 0", format!("lambda = {lam}")));
        }
        Ok(self.psi(lam))
    }

    /// `psi` without the domain check; also valid for `lam > -jump_mean_inv`.
    pub fn psi(&self, lam: f64) -> f64 {
        self.mu * lam + 0.5 * self.sigma * self.sigma * lam * lam - self.jump_part(lam)
    }

    pub fn psi_prime(&self, lam: f64) -> f64 {
        let jump = if self.has_jumps() {
            let d = self.jump_mean_inv + lam;
            self.jump_rate * self.jump_mean_inv / (d * d)
        } else {
            0.0
        };
        self.mu + self.sigma * self.sigma * lam - jump
    }

    pub fn psi_complex(&self, lam: Complex64) -> Complex64 {
        let mut v = lam * self.mu + lam * lam * (0.5 * self.sigma * self.sigma);
        if self.has_jumps() {
            v -= lam * self.jump_rate / (lam + self.jump_mean_inv);
        }
        v
    }

    /// `E[X_1] = psi'(0+)`, in closed form.
    pub fn net_profit_drift(&self) -> f64 {
        if self.has_jumps() {
            self.mu - self.jump_rate / self.jump_mean_inv
        } else {
            self.mu
        }
    }

    /// Variance of `X_1`.
    pub fn variance_rate(&self) -> f64 {
        let jumps = if self.has_jumps() {
            2.0 * self.jump_rate / (self.jump_mean_inv * self.jump_mean_inv)
        } else {
            0.0
        };
        self.sigma * self.sigma + jumps
    }

    /// `W^{(q)}(0)`: `1/c` for bounded variation, `0` otherwise.
    pub fn w_at_zero(&self, _q: f64) -> f64 {
        match self.variation() {
            VariationClass::Bounded => 1.0 / self.mu,
            VariationClass::Unbounded => 0.0,
        }
    }

    /// Denominator `D` with `psi(lam) - r = N_r(lam) / D(lam)`.
    pub fn exponent_denominator(&self) -> Poly {
        if self.has_jumps() {
            Poly::new(vec![self.jump_mean_inv, 1.0])
        } else {
            Poly::constant(1.0)
        }
    }

    /// Numerator `N_r` with `psi(lam) - r = N_r(lam) / D(lam)`.
    pub fn exponent_numerator(&self, r: f64) -> Poly {
        let half_var = 0.5 * self.sigma * self.sigma;
        let base = Poly::new(vec![-r, self.mu, half_var]);
        if self.has_jumps() {
            base.mul(&self.exponent_denominator())
                .add(&Poly::new(vec![0.0, -self.jump_rate]))
        } else {
            base
        }
    }

    /// Right inverse `Phi(q) = sup{lam >= 0 : psi(lam) = q}`.
    pub fn phi(&self, q: f64) -> Result<f64> {
        self.phi_from(q, 1.0)
    }

    /// As [`phi`](Self::phi), starting the bracket search from `hint`
    /// (typically a previously computed `Phi`).
    pub fn phi_from(&self, q: f64, hint: f64) -> Result<f64> {
        if !(q >= 0.0) || !q.is_finite() {
            return Err(Error::domain("q >= 0", format!("q = {q}")));
        }
        let drift = self.net_profit_drift();
        if q == 0.0 && drift >= 0.0 {
            return Ok(0.0);
        }
        let tol = 1e-12 * q.max(1.0);
        // Grow until psi(hi) > q; Newton from the right of the largest root
        // of a convex function then decreases monotonically onto it.
        let mut hi = hint.max(1.0);
        let mut grow = 0;
        while self.psi(hi) <= q {
            hi *= 2.0;
            grow += 1;
            if grow > 1100 {
                return Err(Error::Convergence {
                    what: "Phi bracket growth",
                    iterations: grow,
                    residual: self.psi(hi) - q,
                });
            }
        }
        let mut lo = 0.0;
        let mut lam = hi;
        for it in 0..MAX_NEWTON {
            let f = self.psi(lam) - q;
            if f.abs() <= tol {
                return Ok(lam);
            }
            if f > 0.0 {
                hi = lam;
            } else {
                lo = lam;
            }
            let d = self.psi_prime(lam);
            let mut next = if d > 0.0 { lam - f / d } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - lam).abs() <= 4.0 * f64::EPSILON * lam.abs() {
                let r = self.psi(next) - q;
                if r.abs() <= tol * 1e3 {
                    return Ok(next);
                }
                return Err(Error::Convergence {
                    what: "Phi Newton iteration",
                    iterations: it,
                    residual: r,
                });
            }
            lam = next;
        }
        Err(Error::Convergence {
            what: "Phi Newton iteration",
            iterations: MAX_NEWTON,
            residual: self.psi(lam) - q,
        })
    }
}

impl fmt::Display for LevyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}
