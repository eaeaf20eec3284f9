//! Compound laws with Borel summands: the generalized Poisson law, compound
//! Bartlett and Delaporte laws, and the shifted-mixture family indexed by an
//! integer `k`, together with its normalizing constants `S(k,θ,λ)`.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::borel::{borel_pgf_ext, borel_pgf_radius};
use crate::claim_number::{delaporte_log_pgf, poisson_log, BartlettParams, DelaporteParams};
use crate::error::{check_closed, check_nonnegative, check_open, domain, Error, Result};
use crate::numerics::{alpha_expand_raw, ln_factorial, log_add, LogAccumulator, LogWeight};
use crate::pmf::{pgf_tail, pgf_truncation, ratio_tail, ratio_truncation, LogPmf, PgfLaw, RatioLaw};

/// `ln(b^e)` with the convention `0^0 = 1`.
fn pow_ln(ln_base: f64, exponent: f64) -> f64 {
    if exponent == 0.0 {
        0.0
    } else {
        exponent * ln_base
    }
}

/// Terms `C·(θ+λn)^{n+k−1} e^{−(θ+λn)} / n!` shared by every law of the
/// shifted-mixture family.
#[derive(Debug, Clone, Copy)]
pub(crate) struct PowerLaw {
    pub log_c: f64,
    pub theta: f64,
    pub lambda: f64,
    pub k: i64,
}

impl PowerLaw {
    fn log_unscaled(&self, n: u64) -> f64 {
        let a = self.theta + self.lambda * n as f64;
        let e = n as f64 + self.k as f64 - 1.0;
        if a == 0.0 {
            return match e {
                e if e == 0.0 => 0.0,
                e if e > 0.0 => f64::NEG_INFINITY,
                _ => f64::NAN,
            };
        }
        pow_ln(a.ln(), e) - a - ln_factorial(n)
    }
}

impl RatioLaw for PowerLaw {
    fn log_term(&self, n: u64) -> f64 {
        self.log_c + self.log_unscaled(n)
    }

    // With a = θ+λn the ratio is a(1+λ/a)^{n+k} e^{−λ}/(n+1)
    // ≤ e^{1−λ} (λ + θ/(n+1)) exp((λk−θ)/a).
    fn ratio_bound(&self, n: u64) -> Option<f64> {
        let a = self.theta + self.lambda * n as f64;
        if a <= 0.0 || (n as i64) + self.k < 0 {
            return None;
        }
        let c = self.lambda * self.k as f64 - self.theta;
        let f = if self.lambda == 0.0 {
            (c / self.theta).exp()
        } else if c >= 0.0 {
            (c / a).exp()
        } else {
            1.0
        };
        Some((1.0 - self.lambda).exp() * (self.lambda + self.theta / (n as f64 + 1.0)) * f)
    }
}

impl PowerLaw {
    /// Log of an upper bound on `Σ t(n)uⁿ` for `u` inside the radius of
    /// convergence: explicit terms plus the geometric remainder.
    pub(crate) fn log_pgf_upper(&self, u: f64) -> Option<f64> {
        if !(u > 0.0) || u >= borel_pgf_radius(self.lambda) {
            return None;
        }
        let ln_u = u.ln();
        let start = first_ratio_index(self);
        let mut acc = LogAccumulator::new();
        for n in 0..TRUNCATION_CAP {
            let t = self.log_term(n) + n as f64 * ln_u;
            acc.add(t);
            if n < start {
                continue;
            }
            let rho = self.ratio_bound(n)? * u;
            if rho < 1.0 {
                let rem = t + (rho / (1.0 - rho)).ln();
                if rem < acc.ln() + SERIES_REL_TAIL.ln() {
                    acc.add(rem);
                    return Some(acc.ln() + 1e-14);
                }
            }
        }
        None
    }
}

fn first_ratio_index(law: &PowerLaw) -> u64 {
    let by_k = if law.k < 0 { (-law.k) as u64 } else { 0 };
    let by_theta = if law.theta > 0.0 { 0 } else { 1 };
    by_k.max(by_theta)
}

pub(crate) const TRUNCATION_CAP: u64 = 10_000_000;

fn power_table(law: &PowerLaw, n_max: u64) -> Result<LogPmf> {
    let weights: Vec<f64> = (0..=n_max).map(|n| law.log_term(n)).collect();
    let (mass, mean) = if law.lambda < 1.0 {
        ratio_tail(law, n_max.max(first_ratio_index(law)))
    } else {
        (1.0, f64::INFINITY)
    };
    LogPmf::new(weights, mass, mean)
}

fn power_truncation(law: &PowerLaw, eps: f64) -> Result<u64> {
    if law.lambda >= 1.0 {
        return Err(domain("no certified truncation exists at lambda = 1"));
    }
    ratio_truncation(law, first_ratio_index(law), eps, TRUNCATION_CAP)
}

// ---------------------------------------------------------------------------
// Generalized Poisson

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GpdParams {
    theta: f64,
    lambda: f64,
}

impl GpdParams {
    /// `θ ≥ 0` (0 gives a point mass at 0), `λ ∈ [0,1]` (0 gives Poisson).
    pub fn new(theta: f64, lambda: f64) -> Result<Self> {
        check_nonnegative("theta", theta)?;
        check_closed("lambda", lambda, 0.0, 1.0)?;
        Ok(GpdParams { theta, lambda })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub(crate) fn law(&self) -> PowerLaw {
        PowerLaw {
            log_c: self.theta.ln(),
            theta: self.theta,
            lambda: self.lambda,
            k: 0,
        }
    }
}

/// `θ(θ+λn)^{n−1} e^{−(θ+λn)} / n!`.
pub fn gpd_pmf(p: &GpdParams, n: u64) -> LogWeight {
    LogWeight::from_raw(gpd_log(p, n))
}

fn gpd_log(p: &GpdParams, n: u64) -> f64 {
    if p.theta == 0.0 {
        return if n == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if p.lambda == 0.0 {
        return poisson_log(p.theta, n);
    }
    p.law().log_term(n)
}

/// Mean `θ/(1−λ)`, variance `θ/(1−λ)³`.
pub fn gpd_mean_var(p: &GpdParams) -> Result<(f64, f64)> {
    if p.lambda >= 1.0 {
        return Err(domain("the expectation does not exist at lambda = 1; need lambda < 1"));
    }
    let q = 1.0 - p.lambda;
    Ok((p.theta / q, p.theta / (q * q * q)))
}

pub fn gpd_table(p: &GpdParams, n_max: u64) -> Result<LogPmf> {
    if p.theta == 0.0 {
        let mut w = vec![f64::NEG_INFINITY; n_max as usize + 1];
        w[0] = 0.0;
        return LogPmf::new(w, 0.0, 0.0);
    }
    let mut table = power_table(&p.law(), n_max)?;
    if p.lambda == 0.0 {
        let w: Vec<f64> = (0..=n_max).map(|n| gpd_log(p, n)).collect();
        table = LogPmf::new(w, table.tail_mass(), table.tail_mean())?;
    }
    Ok(table)
}

pub fn gpd_truncated(p: &GpdParams, eps: f64) -> Result<LogPmf> {
    if p.theta == 0.0 {
        return gpd_table(p, 0);
    }
    gpd_table(p, power_truncation(&p.law(), eps)?)
}

// ---------------------------------------------------------------------------
// Compound Bartlett

pub(crate) fn bartlett_law(p: &BartlettParams) -> PowerLaw {
    PowerLaw {
        log_c: (1.0 - p.lambda()).ln(),
        theta: p.theta(),
        lambda: p.lambda(),
        k: 1,
    }
}

/// `(1−λ)(θ+λn)ⁿ e^{−(θ+λn)} / n!`: the Bartlett claim count with Borel summands.
pub fn bartlett_compound_pmf(p: &BartlettParams, n: u64) -> LogWeight {
    LogWeight::from_raw(bartlett_law(p).log_term(n))
}

/// Mean `θ/(1−λ) + λ/(1−λ)²`, variance `θ/(1−λ)³ + (λ²+λ)/(1−λ)⁴`.
pub fn bartlett_compound_mean_var(p: &BartlettParams) -> (f64, f64) {
    compound_delaporte_moments(p.theta(), p.lambda(), 1)
}

pub fn bartlett_compound_table(p: &BartlettParams, n_max: u64) -> Result<LogPmf> {
    power_table(&bartlett_law(p), n_max)
}

pub fn bartlett_compound_truncated(p: &BartlettParams, eps: f64) -> Result<LogPmf> {
    let law = bartlett_law(p);
    power_table(&law, power_truncation(&law, eps)?)
}

// ---------------------------------------------------------------------------
// Compound Delaporte

fn require_shape(p: &DelaporteParams) -> Result<()> {
    if p.m() < 2 {
        Err(domain("compound Delaporte needs m >= 2; use the compound Bartlett law for m = 1"))
    } else {
        Ok(())
    }
}

/// `(1−λ)^m (θ+λn+λα(m−1))ⁿ e^{−(θ+λn)} / n!` with the α-power expanded by
/// the binomial rule.
pub fn delaporte_compound_pmf(p: &DelaporteParams, n: u64) -> Result<LogWeight> {
    require_shape(p)?;
    Ok(LogWeight::from_raw(delaporte_compound_log(p, n)))
}

fn delaporte_compound_log(p: &DelaporteParams, n: u64) -> f64 {
    let a = p.theta() + p.lambda() * n as f64;
    p.m() as f64 * (1.0 - p.lambda()).ln() - a - ln_factorial(n)
        + alpha_expand_raw(a.ln(), p.lambda().ln(), p.m(), n as u32)
}

fn compound_delaporte_moments(theta: f64, lambda: f64, m: u32) -> (f64, f64) {
    let q = 1.0 - lambda;
    let m = m as f64;
    (
        theta / q + m * lambda / (q * q),
        theta / (q * q * q) + m * (lambda * lambda + lambda) / (q * q * q * q),
    )
}

/// Mean `θ/(1−λ) + mλ/(1−λ)²`, variance `θ/(1−λ)³ + m(λ²+λ)/(1−λ)⁴`.
pub fn delaporte_compound_mean_var(p: &DelaporteParams) -> Result<(f64, f64)> {
    require_shape(p)?;
    Ok(compound_delaporte_moments(p.theta(), p.lambda(), p.m()))
}

/// pgf of a Delaporte claim count with Borel summands.
pub(crate) struct CompoundDelaporteLaw {
    pub theta: f64,
    pub lambda: f64,
    pub m: u32,
}

impl PgfLaw for CompoundDelaporteLaw {
    fn log_pgf(&self, s: f64) -> Option<f64> {
        let g = borel_pgf_ext(self.lambda, s)?;
        delaporte_log_pgf(self.theta, self.lambda, self.m, g)
    }

    fn s_max(&self) -> f64 {
        1.0 + (borel_pgf_radius(self.lambda) - 1.0) * 0.98
    }
}

pub fn delaporte_compound_table(p: &DelaporteParams, n_max: u64) -> Result<LogPmf> {
    require_shape(p)?;
    let weights: Vec<f64> = (0..=n_max).map(|n| delaporte_compound_log(p, n)).collect();
    let law = CompoundDelaporteLaw {
        theta: p.theta(),
        lambda: p.lambda(),
        m: p.m(),
    };
    let (mass, mean) = pgf_tail(&weights, &law);
    LogPmf::new(weights, mass, mean)
}

pub fn delaporte_compound_truncated(p: &DelaporteParams, eps: f64) -> Result<LogPmf> {
    require_shape(p)?;
    let law = CompoundDelaporteLaw {
        theta: p.theta(),
        lambda: p.lambda(),
        m: p.m(),
    };
    let n = pgf_truncation(&|n| delaporte_compound_log(p, n), &law, eps, TRUNCATION_CAP)?;
    delaporte_compound_table(p, n)
}

// ---------------------------------------------------------------------------
// q-table and V_k

/// `q_k(0..k−1)` stored in log scale.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QTable {
    pub k: u32,
    pub theta: f64,
    pub lambda: f64,
    pub log_entries: Vec<f64>,
}

impl QTable {
    pub fn entries(&self) -> Vec<f64> {
        self.log_entries.iter().map(|w| w.exp()).collect()
    }

    /// `Σ_n q_k(n) / (1−λ)`, which equals `S(k,θ,λ)`.
    pub fn log_s(&self) -> f64 {
        LogAccumulator::from_iter(self.log_entries.iter().copied()).ln() - (1.0 - self.lambda).ln()
    }
}

fn check_shift_params(theta: f64, lambda: f64) -> Result<()> {
    check_nonnegative("theta", theta)?;
    check_open("lambda", lambda, 0.0, 1.0)
}

/// Build `q_k` by `k−1` sweeps of
/// `q_k(n) = (θ+λn)q_{k−1}(n)/(1−λ) + λ²(k+n−2)q_{k−1}(n−1)/(1−λ)²`.
pub fn q_table(k: u32, theta: f64, lambda: f64) -> Result<QTable> {
    if k == 0 {
        return Err(domain("q_table needs k >= 1"));
    }
    check_shift_params(theta, lambda)?;
    Ok(QTable {
        k,
        theta,
        lambda,
        log_entries: log_q(k, theta, lambda),
    })
}

fn log_q(k: u32, theta: f64, lambda: f64) -> Vec<f64> {
    let ln_q = (1.0 - lambda).ln();
    let ln_l2 = 2.0 * lambda.ln();
    let mut row = vec![0.0f64];
    for kk in 2..=k {
        let mut next = Vec::with_capacity(kk as usize);
        for n in 0..kk as usize {
            let stay = match row.get(n) {
                Some(&w) => (theta + lambda * n as f64).ln() + w - ln_q,
                None => f64::NEG_INFINITY,
            };
            let shift = if n == 0 {
                f64::NEG_INFINITY
            } else {
                ln_l2 + ((kk as usize + n - 2) as f64).ln() + row[n - 1] - 2.0 * ln_q
            };
            next.push(log_add(stay, shift));
        }
        row = next;
    }
    row
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VDistribution {
    pub k: u32,
    pub probabilities: Vec<f64>,
}

/// Law of the random shift `V_k`: `P{V_k = n} = q_k(n) / Σ_ℓ q_k(ℓ)`.
pub fn v_distribution(k: u32, theta: f64, lambda: f64) -> Result<VDistribution> {
    let q = q_table(k, theta, lambda)?;
    let total = LogAccumulator::from_iter(q.log_entries.iter().copied()).ln();
    Ok(VDistribution {
        k,
        probabilities: q.log_entries.iter().map(|w| (w - total).exp()).collect(),
    })
}

// ---------------------------------------------------------------------------
// Normalizing constants

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SMethod {
    /// Direct summation of the defining series.
    Series,
    /// Upward recursion from `S(1) = 1/(1−λ)` for `k ≥ 1`, downward from
    /// `S(0) = 1/θ` for `k ≤ −1`.
    Recursion,
    /// Finite q-table sum for `k ≥ 1`; `1/θ` at 0 and the explicit rational
    /// form at −1.
    Closed,
}

const SERIES_CAP: u64 = 100_000;
const SERIES_REL_TAIL: f64 = 1e-17;

/// `S(k,θ_j,λ)` for `θ_j = θ + jλ`, memoized on the exact key `(k, j)`.
///
/// Values are idempotent, so concurrent readers may compute the same entry
/// twice without harm.
#[derive(Debug)]
pub struct SConstants {
    theta: f64,
    lambda: f64,
    cache: RwLock<HashMap<(SMethod, i64, u64), f64>>,
}

impl SConstants {
    pub fn new(theta: f64, lambda: f64) -> Result<Self> {
        check_shift_params(theta, lambda)?;
        Ok(SConstants {
            theta,
            lambda,
            cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `θ + jλ`, computed from the base rather than accumulated.
    pub fn theta_at(&self, j: u64) -> f64 {
        self.theta + j as f64 * self.lambda
    }

    /// `ln S(k, θ+jλ, λ)` by the most accurate available method.
    pub fn log_s(&self, k: i64, j: u64) -> Result<f64> {
        match k {
            k if k >= 1 => self.log_s_with(k, j, SMethod::Closed),
            0 => self.log_s_with(0, j, SMethod::Closed),
            k => self.log_s_with(k, j, SMethod::Recursion),
        }
    }

    pub fn s(&self, k: i64, j: u64) -> Result<f64> {
        self.log_s(k, j).map(f64::exp)
    }

    pub fn log_s_with(&self, k: i64, j: u64, method: SMethod) -> Result<f64> {
        if k <= 0 && self.theta_at(j) <= 0.0 {
            return Err(domain(format!("S({k}, theta, lambda) needs theta > 0")));
        }
        let key = (method, k, j);
        if let Some(&v) = self.cache.read().expect("cache lock").get(&key) {
            return Ok(v);
        }
        let v = match method {
            SMethod::Series => self.series(k, j)?,
            SMethod::Closed => self.closed(k, j)?,
            SMethod::Recursion => self.recursion(k, j)?,
        };
        self.cache.write().expect("cache lock").insert(key, v);
        Ok(v)
    }

    fn series(&self, k: i64, j: u64) -> Result<f64> {
        let law = PowerLaw {
            log_c: 0.0,
            theta: self.theta_at(j),
            lambda: self.lambda,
            k,
        };
        let mut acc = LogAccumulator::new();
        for n in 0..SERIES_CAP {
            let t = law.log_term(n);
            acc.add(t);
            if let Some(rho) = law.ratio_bound(n) {
                if rho < 1.0 && t + (rho / (1.0 - rho)).ln() < acc.ln() + SERIES_REL_TAIL.ln() {
                    return Ok(acc.ln());
                }
            }
        }
        Err(Error::Divergence {
            what: "normalizing-constant series",
            iterations: SERIES_CAP as usize,
        })
    }

    fn closed(&self, k: i64, j: u64) -> Result<f64> {
        let theta = self.theta_at(j);
        match k {
            k if k >= 1 => {
                let q = log_q(k as u32, theta, self.lambda);
                Ok(LogAccumulator::from_iter(q).ln() - (1.0 - self.lambda).ln())
            }
            0 => Ok(-theta.ln()),
            -1 => {
                let l = self.lambda;
                Ok((theta * (1.0 - l) + l).ln() - 2.0 * theta.ln() - (theta + l).ln())
            }
            _ => Err(domain(format!("no closed form for S({k}, theta, lambda); use series or recursion"))),
        }
    }

    fn recursion(&self, k: i64, j: u64) -> Result<f64> {
        match k {
            1 => Ok(-(1.0 - self.lambda).ln()),
            0 => Ok(-self.theta_at(j).ln()),
            k if k > 1 => self.recursion_up(k, j),
            k => self.recursion_down(k, j),
        }
    }

    // S(k,θ) = Σ_n λⁿ(θ+λn) S(k−1,θ+λn).
    fn recursion_up(&self, k: i64, j: u64) -> Result<f64> {
        let ln_l = self.lambda.ln();
        let mut acc = LogAccumulator::new();
        for n in 0..SERIES_CAP {
            let th = self.theta_at(j + n);
            let t = n as f64 * ln_l + th.ln() + self.log_s_with(k - 1, j + n, SMethod::Recursion)?;
            acc.add(t);
            if th > 0.0 {
                let rho = self.lambda * (1.0 + self.lambda / th).powi(k as i32);
                if rho < 1.0 && t + (rho / (1.0 - rho)).ln() < acc.ln() + SERIES_REL_TAIL.ln() {
                    return Ok(acc.ln());
                }
            }
        }
        Err(Error::Divergence {
            what: "normalizing-constant recursion",
            iterations: SERIES_CAP as usize,
        })
    }

    // S(k,θ) = (S(k+1,θ) − λS(k+1,θ+λ))/θ. When the difference has cancelled
    // below eight significant digits the series is used instead.
    fn recursion_down(&self, k: i64, j: u64) -> Result<f64> {
        let a = self.log_s_with(k + 1, j, SMethod::Recursion)?.exp();
        let b = self.lambda * self.log_s_with(k + 1, j + 1, SMethod::Recursion)?.exp();
        let diff = a - b;
        if diff > 1e-8 * a {
            Ok(diff.ln() - self.theta_at(j).ln())
        } else {
            self.series(k, j)
        }
    }
}

/// `S(k,θ,λ) = Σ_n (θ+λn)^{n+k−1} e^{−(θ+λn)} / n!` by the requested method.
pub fn s_constant(k: i64, theta: f64, lambda: f64, method: SMethod) -> Result<f64> {
    SConstants::new(theta, lambda)?
        .log_s_with(k, 0, method)
        .map(f64::exp)
}

// ---------------------------------------------------------------------------
// Shifted mixtures

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftedMixtureParams {
    k: i64,
    theta: f64,
    lambda: f64,
}

impl ShiftedMixtureParams {
    pub fn new(k: i64, theta: f64, lambda: f64) -> Result<Self> {
        check_shift_params(theta, lambda)?;
        if k <= 0 && theta <= 0.0 {
            return Err(domain(format!("k = {k} <= 0 needs theta > 0")));
        }
        Ok(ShiftedMixtureParams { k, theta, lambda })
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// A shifted-mixture law `(θ+λn)^{n+k−1} e^{−(θ+λn)} / (S(k,θ,λ) n!)` with
/// its normalizing constants.
#[derive(Debug, Clone)]
pub struct ShiftedMixture {
    params: ShiftedMixtureParams,
    constants: Arc<SConstants>,
    log_s: f64,
}

impl ShiftedMixture {
    pub fn new(params: ShiftedMixtureParams) -> Result<Self> {
        let constants = Arc::new(SConstants::new(params.theta, params.lambda)?);
        let log_s = constants.log_s(params.k, 0)?;
        Ok(ShiftedMixture {
            params,
            constants,
            log_s,
        })
    }

    pub fn params(&self) -> &ShiftedMixtureParams {
        &self.params
    }

    pub fn constants(&self) -> &SConstants {
        &self.constants
    }

    pub fn s(&self) -> f64 {
        self.log_s.exp()
    }

    pub fn log_s(&self) -> f64 {
        self.log_s
    }

    pub(crate) fn law(&self) -> PowerLaw {
        PowerLaw {
            log_c: -self.log_s,
            theta: self.params.theta,
            lambda: self.params.lambda,
            k: self.params.k,
        }
    }

    pub fn pmf(&self, n: u64) -> LogWeight {
        LogWeight::from_raw(self.law().log_term(n))
    }

    /// Mean and variance from `E[(θ+λX)^m] = S(k+m)/S(k)`.
    pub fn mean_var(&self) -> Result<(f64, f64)> {
        let k = self.params.k;
        let r1 = (self.constants.log_s(k + 1, 0)? - self.log_s).exp();
        let r2 = (self.constants.log_s(k + 2, 0)? - self.log_s).exp();
        let l = self.params.lambda;
        Ok(((r1 - self.params.theta) / l, (r2 - r1 * r1) / (l * l)))
    }

    pub fn table(&self, n_max: u64) -> Result<LogPmf> {
        power_table(&self.law(), n_max)
    }

    pub fn truncated(&self, eps: f64) -> Result<LogPmf> {
        let law = self.law();
        power_table(&law, power_truncation(&law, eps)?)
    }
}

pub fn shifted_mixture_pmf(p: &ShiftedMixtureParams, n: u64) -> Result<LogWeight> {
    Ok(ShiftedMixture::new(*p)?.pmf(n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    Lemma,
    ShiftedPower,
}

/// `E[X_k^order]` for the shifted mixture.
pub fn mixture_moment(p: &ShiftedMixtureParams, order: u32, method: MomentMethod) -> Result<f64> {
    let constants = SConstants::new(p.theta, p.lambda)?;
    mixture_moment_with(&constants, p.k, order, method)
}

/// As [`mixture_moment`], sharing a constant cache anchored at `θ`.
pub fn mixture_moment_with(
    constants: &SConstants,
    k: i64,
    order: u32,
    method: MomentMethod,
) -> Result<f64> {
    if order == 0 {
        return Ok(1.0);
    }
    if k <= 0 && constants.theta() <= 0.0 {
        return Err(domain(format!("k = {k} <= 0 needs theta > 0")));
    }
    match method {
        MomentMethod::Lemma => {
            let mut memo = HashMap::new();
            lemma_moment(constants, k, 0, order, &mut memo)
        }
        MomentMethod::ShiftedPower => shifted_power_moment(constants, k, order),
    }
}

// E[X_k(θ_j)^m] = S(k+1,θ_{j+1})/S(k,θ_j) · Σ_{ℓ<m} C(m−1,ℓ) E[X_{k+1}(θ_{j+1})^ℓ].
fn lemma_moment(
    c: &SConstants,
    k: i64,
    j: u64,
    order: u32,
    memo: &mut HashMap<(i64, u64, u32), f64>,
) -> Result<f64> {
    if order == 0 {
        return Ok(1.0);
    }
    if let Some(&v) = memo.get(&(k, j, order)) {
        return Ok(v);
    }
    let ratio = (c.log_s(k + 1, j + 1)? - c.log_s(k, j)?).exp();
    let mut sum = 0.0;
    let mut binom = 1.0;
    for ell in 0..order {
        sum += binom * lemma_moment(c, k + 1, j + 1, ell, memo)?;
        binom = binom * (order - 1 - ell) as f64 / (ell + 1) as f64;
    }
    let v = ratio * sum;
    memo.insert((k, j, order), v);
    Ok(v)
}

// E[X^m] = λ^{−m} Σ_i C(m,i) (−θ)^{m−i} S(k+i)/S(k).
fn shifted_power_moment(c: &SConstants, k: i64, order: u32) -> Result<f64> {
    let log_sk = c.log_s(k, 0)?;
    let theta = c.theta();
    let mut sum = 0.0;
    let mut binom = 1.0;
    for i in 0..=order {
        let r = (c.log_s(k + i as i64, 0)? - log_sk).exp();
        sum += binom * (-theta).powi((order - i) as i32) * r;
        binom = binom * (order - i) as f64 / (i + 1) as f64;
    }
    Ok(sum / c.lambda().powi(order as i32))
}
