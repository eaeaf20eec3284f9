//! Claim-number laws: Poisson, geometric, negative binomial, and the Bartlett
//! and Delaporte convolutions of a Poisson(θ) count with a geometric or
//! negative binomial count.

use serde::Serialize;

use crate::error::{check_nonnegative, check_open, domain, Result};
use crate::numerics::{ln_factorial, log_binomial, LogAccumulator, LogWeight};
use crate::pmf::{pgf_tail, pgf_truncation, LogPmf, PgfLaw};

pub fn poisson_pmf(theta: f64, n: u64) -> LogWeight {
    LogWeight::from_raw(poisson_log(theta, n))
}

pub(crate) fn poisson_log(theta: f64, n: u64) -> f64 {
    if n == 0 {
        -theta
    } else if theta == 0.0 {
        f64::NEG_INFINITY
    } else {
        n as f64 * theta.ln() - theta - ln_factorial(n)
    }
}

/// `P{G = n} = (1−λ)λⁿ`.
pub fn geometric_pmf(lambda: f64, n: u64) -> LogWeight {
    LogWeight::from_raw(negbin_log(lambda, 1, n))
}

/// `P{N = n} = C(n+m−1, n) λⁿ (1−λ)^m`.
pub fn negbin_pmf(lambda: f64, m: u32, n: u64) -> LogWeight {
    LogWeight::from_raw(negbin_log(lambda, m, n))
}

pub(crate) fn negbin_log(lambda: f64, m: u32, n: u64) -> f64 {
    if m == 0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    let lam_pow = if n == 0 { 0.0 } else { n as f64 * lambda.ln() };
    log_binomial(n + m as u64 - 1, n as i64).ln() + lam_pow + m as f64 * (1.0 - lambda).ln()
}

/// Poisson(θ) plus an independent geometric count with parameter λ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BartlettParams {
    pub(crate) theta: f64,
    pub(crate) lambda: f64,
}

impl BartlettParams {
    pub fn new(theta: f64, lambda: f64) -> Result<Self> {
        check_nonnegative("theta", theta)?;
        check_open("lambda", lambda, 0.0, 1.0)?;
        Ok(BartlettParams { theta, lambda })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Poisson(θ) plus an independent negative binomial count of shape `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelaporteParams {
    pub(crate) theta: f64,
    pub(crate) lambda: f64,
    pub(crate) m: u32,
}

impl DelaporteParams {
    pub fn new(theta: f64, lambda: f64, m: u32) -> Result<Self> {
        check_nonnegative("theta", theta)?;
        check_open("lambda", lambda, 0.0, 1.0)?;
        if m == 0 {
            return Err(domain("Delaporte shape m must be >= 1"));
        }
        Ok(DelaporteParams { theta, lambda, m })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn m(&self) -> u32 {
        self.m
    }
}

impl From<BartlettParams> for DelaporteParams {
    fn from(p: BartlettParams) -> Self {
        DelaporteParams {
            theta: p.theta,
            lambda: p.lambda,
            m: 1,
        }
    }
}

/// `(1−λ)λⁿ e^{−θ} Σ_{k≤n} (θ/λ)^k / k!`.
pub fn bartlett_pmf(p: &BartlettParams, n: u64) -> LogWeight {
    let mut acc = LogAccumulator::new();
    let ln_ratio = (p.theta / p.lambda).ln();
    for k in 0..=n {
        let pow = if k == 0 { 0.0 } else { k as f64 * ln_ratio };
        acc.add(pow - ln_factorial(k));
    }
    let lam_pow = if n == 0 { 0.0 } else { n as f64 * p.lambda.ln() };
    LogWeight::from_raw((1.0 - p.lambda).ln() + lam_pow - p.theta + acc.ln())
}

/// `Σ_k C(k+m−1, k) λ^k (1−λ)^m · θ^{n−k} e^{−θ} / (n−k)!`.
pub fn delaporte_pmf(p: &DelaporteParams, n: u64) -> LogWeight {
    LogWeight::from_raw(delaporte_log(p, n))
}

fn delaporte_log(p: &DelaporteParams, n: u64) -> f64 {
    let mut acc = LogAccumulator::new();
    for k in 0..=n {
        acc.add(negbin_log(p.lambda, p.m, k) + poisson_log(p.theta, n - k));
    }
    acc.ln()
}

/// Mean `θ + λ/(1−λ)` and variance `θ + λ/(1−λ)²`.
pub fn bartlett_mean_var(p: &BartlettParams) -> (f64, f64) {
    delaporte_mean_var(&(*p).into())
}

/// Mean `θ + mλ/(1−λ)` and variance `θ + mλ/(1−λ)²`.
pub fn delaporte_mean_var(p: &DelaporteParams) -> (f64, f64) {
    let q = 1.0 - p.lambda;
    let m = p.m as f64;
    (p.theta + m * p.lambda / q, p.theta + m * p.lambda / (q * q))
}

/// `ln G(s) = θ(s−1) + m ln((1−λ)/(1−λs))` for `0 ≤ s < 1/λ`.
pub(crate) fn delaporte_log_pgf(theta: f64, lambda: f64, m: u32, s: f64) -> Option<f64> {
    (lambda * s < 1.0 && s >= 0.0)
        .then(|| theta * (s - 1.0) + m as f64 * ((1.0 - lambda) / (1.0 - lambda * s)).ln())
}

pub fn delaporte_pgf(p: &DelaporteParams, s: f64) -> Result<f64> {
    delaporte_log_pgf(p.theta, p.lambda, p.m, s)
        .map(f64::exp)
        .ok_or_else(|| domain(format!("pgf argument must lie in [0, 1/lambda), got {s}")))
}

impl PgfLaw for DelaporteParams {
    fn log_pgf(&self, s: f64) -> Option<f64> {
        delaporte_log_pgf(self.theta, self.lambda, self.m, s)
    }

    fn s_max(&self) -> f64 {
        1.0 + (1.0 / self.lambda - 1.0) * 0.98
    }
}

pub fn delaporte_table(p: &DelaporteParams, n_max: u64) -> Result<LogPmf> {
    let weights: Vec<f64> = (0..=n_max).map(|n| delaporte_log(p, n)).collect();
    let (mass, mean) = pgf_tail(&weights, p);
    LogPmf::new(weights, mass, mean)
}

pub fn bartlett_table(p: &BartlettParams, n_max: u64) -> Result<LogPmf> {
    delaporte_table(&(*p).into(), n_max)
}

pub(crate) const TRUNCATION_CAP: u64 = 1_000_000;

pub fn delaporte_truncated(p: &DelaporteParams, eps: f64) -> Result<LogPmf> {
    let n = pgf_truncation(&|n| delaporte_log(p, n), p, eps, TRUNCATION_CAP)?;
    delaporte_table(p, n)
}

pub fn bartlett_truncated(p: &BartlettParams, eps: f64) -> Result<LogPmf> {
    delaporte_truncated(&(*p).into(), eps)
}
