//! Borel and Borel-Tanner laws: total progeny of a Galton-Watson process with
//! Poisson(λ) offspring, started from one or from `m` individuals.

use serde::Serialize;

use crate::error::{check_left_open, domain, Error, Result};
use crate::numerics::{ln_factorial, LogWeight};
use crate::pmf::{ratio_tail, ratio_truncation, LogPmf, RatioLaw};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BorelParams {
    lambda: f64,
}

impl BorelParams {
    pub fn new(lambda: f64) -> Result<Self> {
        check_left_open("lambda", lambda, 0.0, 1.0)?;
        Ok(BorelParams { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BorelTannerParams {
    lambda: f64,
    m: u32,
}

impl BorelTannerParams {
    pub fn new(lambda: f64, m: u32) -> Result<Self> {
        check_left_open("lambda", lambda, 0.0, 1.0)?;
        if m == 0 {
            return Err(domain("Borel-Tanner initial count m must be >= 1"));
        }
        Ok(BorelTannerParams { lambda, m })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn m(&self) -> u32 {
        self.m
    }
}

/// `P{Y = n} = (λn)^{n−1} e^{−λn} / n!` for `n ≥ 1`.
pub fn borel_pmf(p: &BorelParams, n: u64) -> LogWeight {
    LogWeight::from_raw(borel_log_term(p.lambda, n))
}

pub(crate) fn borel_log_term(lambda: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NEG_INFINITY;
    }
    let x = lambda * n as f64;
    (n - 1) as f64 * x.ln() - x - ln_factorial(n)
}

/// `P{Y⁽ᵐ⁾ = n} = m(λn)^{n−m} e^{−λn} / (n (n−m)!)` for `n ≥ m`.
pub fn borel_tanner_pmf(p: &BorelTannerParams, n: u64) -> LogWeight {
    LogWeight::from_raw(borel_tanner_log_term(p.lambda, p.m, n))
}

fn borel_tanner_log_term(lambda: f64, m: u32, n: u64) -> f64 {
    let m64 = m as u64;
    if n < m64 || n == 0 {
        return f64::NEG_INFINITY;
    }
    let x = lambda * n as f64;
    let power = if n == m64 { 0.0 } else { (n - m64) as f64 * x.ln() };
    (m as f64).ln() + power - x - (n as f64).ln() - ln_factorial(n - m64)
}

fn require_subcritical(lambda: f64) -> Result<()> {
    if lambda < 1.0 {
        Ok(())
    } else {
        Err(domain("the expectation does not exist at lambda = 1; need lambda < 1"))
    }
}

/// Mean `1/(1−λ)` and variance `λ/(1−λ)³`.
pub fn borel_mean_var(p: &BorelParams) -> Result<(f64, f64)> {
    require_subcritical(p.lambda)?;
    let q = 1.0 - p.lambda;
    Ok((1.0 / q, p.lambda / (q * q * q)))
}

/// Mean `m/(1−λ)` and variance `mλ/(1−λ)³`.
pub fn borel_tanner_mean_var(p: &BorelTannerParams) -> Result<(f64, f64)> {
    let (mean, var) = borel_mean_var(&BorelParams { lambda: p.lambda })?;
    let m = p.m as f64;
    Ok((m * mean, m * var))
}

const PGF_TOL: f64 = 1e-14;
const PGF_MAX_ITER: usize = 10_000;

/// The pgf at `z ∈ [0,1]`: the fixed point of `G = z·exp(λ(G−1))`, found by
/// iterating from `G = z`.
pub fn borel_pgf(p: &BorelParams, z: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&z) {
        return Err(domain(format!("pgf argument must lie in [0, 1], got {z}")));
    }
    let lambda = p.lambda;
    let mut g = z;
    for _ in 0..PGF_MAX_ITER {
        let next = z * (lambda * (g - 1.0)).exp();
        if (next - g).abs() < PGF_TOL {
            return Ok(next);
        }
        g = next;
    }
    Err(Error::Divergence {
        what: "Borel pgf fixed-point iteration",
        iterations: PGF_MAX_ITER,
    })
}

/// Radius of convergence `e^{λ−1}/λ` of the Borel pgf.
pub(crate) fn borel_pgf_radius(lambda: f64) -> f64 {
    if lambda == 0.0 {
        f64::INFINITY
    } else {
        (lambda - 1.0).exp() / lambda
    }
}

/// Borel pgf on `[0, radius)`. Above 1 the smaller root of
/// `ln G − λ(G−1) = ln s` is found by Newton's method from `G = 1`, which
/// converges monotonically because the left side is concave and increasing
/// on `[1, 1/λ)`.
pub(crate) fn borel_pgf_ext(lambda: f64, s: f64) -> Option<f64> {
    if lambda == 0.0 {
        return Some(s);
    }
    if s <= 1.0 {
        return borel_pgf(&BorelParams { lambda }, s.max(0.0)).ok();
    }
    if s >= borel_pgf_radius(lambda) {
        return None;
    }
    let ln_s = s.ln();
    let mut g = 1.0f64;
    for _ in 0..200 {
        let f = g.ln() - lambda * (g - 1.0) - ln_s;
        let df = 1.0 / g - lambda;
        let step = f / df;
        g -= step;
        if step.abs() <= 4.0 * f64::EPSILON * g {
            return Some(g);
        }
    }
    None
}

struct BorelLaw {
    lambda: f64,
}

impl RatioLaw for BorelLaw {
    fn log_term(&self, n: u64) -> f64 {
        borel_log_term(self.lambda, n)
    }

    // t(n+1)/t(n) = λe^{−λ}(1+1/n)^{n−1} ≤ λe^{1−λ}.
    fn ratio_bound(&self, n: u64) -> Option<f64> {
        (n >= 1).then(|| self.lambda * (1.0 - self.lambda).exp())
    }
}

struct BorelTannerLaw {
    lambda: f64,
    m: u32,
}

impl RatioLaw for BorelTannerLaw {
    fn log_term(&self, n: u64) -> f64 {
        borel_tanner_log_term(self.lambda, self.m, n)
    }

    // t(n+1)/t(n) = λe^{−λ}(1+1/n)^{n−m} n/(n+1−m) ≤ λe^{1−λ} n/(n+1−m),
    // which is nonincreasing in n.
    fn ratio_bound(&self, n: u64) -> Option<f64> {
        let m = self.m as u64;
        (n >= m.max(1)).then(|| {
            self.lambda * (1.0 - self.lambda).exp() * n as f64 / (n + 1 - m) as f64
        })
    }
}

fn table_with_ratio(law: &dyn RatioLaw, lambda: f64, n_max: u64) -> Result<LogPmf> {
    let weights: Vec<f64> = (0..=n_max).map(|n| law.log_term(n)).collect();
    let (mass, mean) = if lambda < 1.0 {
        ratio_tail(law, n_max)
    } else {
        (1.0, f64::INFINITY)
    };
    LogPmf::new(weights, mass, mean)
}

/// PMF on `0..=n_max` with a certified tail bound (trivial at λ = 1).
pub fn borel_table(p: &BorelParams, n_max: u64) -> Result<LogPmf> {
    table_with_ratio(&BorelLaw { lambda: p.lambda }, p.lambda, n_max)
}

pub fn borel_tanner_table(p: &BorelTannerParams, n_max: u64) -> Result<LogPmf> {
    let law = BorelTannerLaw {
        lambda: p.lambda,
        m: p.m,
    };
    table_with_ratio(&law, p.lambda, n_max)
}

pub(crate) const TRUNCATION_CAP: u64 = 10_000_000;

/// Smallest table whose certified tail is below `eps`.
pub fn borel_truncated(p: &BorelParams, eps: f64) -> Result<LogPmf> {
    require_subcritical(p.lambda)?;
    let law = BorelLaw { lambda: p.lambda };
    let n = ratio_truncation(&law, 1, eps, TRUNCATION_CAP)?;
    borel_table(p, n)
}

pub fn borel_tanner_truncated(p: &BorelTannerParams, eps: f64) -> Result<LogPmf> {
    require_subcritical(p.lambda)?;
    let law = BorelTannerLaw {
        lambda: p.lambda,
        m: p.m,
    };
    let n = ratio_truncation(&law, p.m as u64, eps, TRUNCATION_CAP)?;
    borel_tanner_table(p, n)
}
