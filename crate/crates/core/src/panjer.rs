//! Total claim size `T = U_1 + … + U_Z` for a compound claim count `Z` with
//! Borel summands and integer severities `U ≥ 1`, by Panjer-type recursions
//! whose coefficients move to a shifted parameter `θ+λ` at every step.
//!
//! The recursion reads level `j+1` (parameter `θ+(j+1)λ`) at smaller mass
//! points to produce level `j`, so filling the triangle `j+n ≤ N` from the
//! `n = 0` column gives the law at `j = 0` on `0..=N` exactly.

use rayon::prelude::*;
use serde::Serialize;

use crate::borel::borel_pgf_radius;
use crate::claim_number::{BartlettParams, DelaporteParams};
use crate::compounds::{
    bartlett_compound_mean_var, bartlett_law, delaporte_compound_mean_var, gpd_mean_var,
    CompoundDelaporteLaw, GpdParams, PowerLaw, SConstants, ShiftedMixture, ShiftedMixtureParams,
};
use crate::error::{domain, Error, Result};
use crate::numerics::{LogAccumulator, LogWeight};
use crate::pmf::{pgf_tail, LogPmf, PgfLaw};

/// Claim-size law on `1..=K`; there is no mass at 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeverityPmf {
    /// `probs[k−1] = f(k)`.
    probs: Vec<f64>,
}

const SEVERITY_SUM_TOL: f64 = 1e-12;

impl SeverityPmf {
    /// From `f(1), …, f(K)`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(domain("severity needs at least one mass point"));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(domain(format!("severity f({}) = {p} is not a probability", i + 1)));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SEVERITY_SUM_TOL {
            return Err(domain(format!("severity probabilities sum to {total}, not 1")));
        }
        let mut probs = probs;
        while probs.len() > 1 && probs.last() == Some(&0.0) {
            probs.pop();
        }
        Ok(SeverityPmf { probs })
    }

    /// Every claim has size 1.
    pub fn unit() -> Self {
        SeverityPmf { probs: vec![1.0] }
    }

    /// Parse `n probability` pairs, one per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs: Vec<(usize, f64, usize)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let bad = |message: String| Error::SeverityFormat { line, message };
            let fields: Vec<&str> = content.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(bad(format!("expected `n probability`, got {content:?}")));
            }
            let n: usize = fields[0]
                .parse()
                .map_err(|_| bad(format!("claim size {:?} is not a nonnegative integer", fields[0])))?;
            if n == 0 {
                return Err(bad("claim size 0 is not allowed; severities start at 1".into()));
            }
            let p: f64 = fields[1]
                .parse()
                .map_err(|_| bad(format!("probability {:?} is not a number", fields[1])))?;
            if !(p.is_finite() && p >= 0.0) {
                return Err(bad(format!("probability {p} must be finite and >= 0")));
            }
            if let Some(&(_, _, first)) = pairs.iter().find(|(m, _, _)| *m == n) {
                return Err(bad(format!("claim size {n} already given on line {first}")));
            }
            pairs.push((n, p, line));
        }
        let k_max = pairs.iter().map(|(n, _, _)| *n).max().ok_or(Error::SeverityFormat {
            line: 0,
            message: "no mass points given".into(),
        })?;
        let mut probs = vec![0.0; k_max];
        for (n, p, _) in &pairs {
            probs[n - 1] = *p;
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SEVERITY_SUM_TOL {
            return Err(Error::SeverityFormat {
                line: pairs.last().map_or(0, |(_, _, l)| *l),
                message: format!("probabilities sum to {total}, not 1 (no renormalization is applied)"),
            });
        }
        SeverityPmf::new(probs)
    }

    pub fn max_claim(&self) -> usize {
        self.probs.len()
    }

    /// `f(k)`, zero outside `1..=K`.
    pub fn prob(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.probs.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.moment(1)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(2) - m * m
    }

    fn moment(&self, order: i32) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| ((i + 1) as f64).powi(order) * p)
            .sum()
    }

    /// `Σ f(k) sᵏ`.
    pub fn pgf(&self, s: f64) -> f64 {
        self.probs.iter().rev().fold(0.0, |acc, p| (acc + p) * s)
    }
}

/// Claim-count families handled by the two-dimensional scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PanjerFamily {
    Gpd,
    Bartlett,
    Shifted(i64),
}

/// Coefficients of the same-shape branch in the Delaporte scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelaporteCoefficients {
    /// Constant per level: `(a, b) = (λ, θ')` at shift `θ'`.
    #[default]
    PerLevel,
    /// `a = 0`, `b = θ' + λn` with `n` the aggregate mass point.
    Literal,
}

/// Default cap on stored grid entries.
pub const DEFAULT_GRID_BUDGET: u128 = 1 << 25;

/// Environment variable that overrides [`DEFAULT_GRID_BUDGET`] in
/// [`grid_budget_from_env`].
pub const GRID_BUDGET_ENV: &str = "BOREL_CLAIMS_MAX_GRID";

pub fn grid_budget_from_env() -> Result<u128> {
    match std::env::var(GRID_BUDGET_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| domain(format!("{GRID_BUDGET_ENV}={v:?} is not a nonnegative integer"))),
        Err(_) => Ok(DEFAULT_GRID_BUDGET),
    }
}

/// Log-values `q(θ+jλ; n)` for `j+n ≤ N`, and, for the Delaporte scheme,
/// shape offsets `i ≤ j`.
#[derive(Debug, Clone, Serialize)]
pub struct RecursionGrid {
    theta: f64,
    lambda: f64,
    n_max: usize,
    shaped: bool,
    /// `layers[n]` holds level `j` at `j` (or `(j,i)` at `j(j+1)/2+i`).
    layers: Vec<Vec<f64>>,
}

impl RecursionGrid {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `q(θ+jλ; n)`. Reading outside the computed triangle is an error.
    pub fn get(&self, j: usize, n: usize) -> Result<LogWeight> {
        self.get_shaped(j, 0, n)
    }

    /// `q(θ+jλ, m+i; n)` for the Delaporte scheme.
    pub fn get_shaped(&self, j: usize, i: usize, n: usize) -> Result<LogWeight> {
        let outside = Error::OutOfGrid { j, i, n };
        if n > self.n_max || j > self.n_max - n || (!self.shaped && i > 0) || (self.shaped && i > j) {
            return Err(outside);
        }
        let idx = if self.shaped { tri(j) + i } else { j };
        Ok(LogWeight::from_raw(self.layers[n][idx]))
    }

    /// The `j = 0` (and `i = 0`) column.
    pub fn base_column(&self) -> Vec<f64> {
        self.layers.iter().map(|l| l[0]).collect()
    }
}

fn tri(j: usize) -> usize {
    j * (j + 1) / 2
}

fn check_budget(requested: u128, budget: u128) -> Result<()> {
    if requested > budget {
        Err(Error::BudgetExceeded {
            what: "recursion grid",
            requested,
            budget,
        })
    } else {
        Ok(())
    }
}

/// Rows narrower than this are filled sequentially.
const PAR_THRESHOLD: usize = 256;

fn fill_row(width: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> Vec<f64> {
    if width >= PAR_THRESHOLD {
        (0..width).into_par_iter().map(f).collect()
    } else {
        (0..width).map(f).collect()
    }
}

/// Parameters of a two-dimensional Panjer scheme.
struct Scheme {
    theta: f64,
    lambda: f64,
    /// `ln p(θ_j; 0)`.
    base: Vec<f64>,
    /// `(a_j, b_j)`.
    coef: Vec<(f64, f64)>,
}

fn scheme(family: PanjerFamily, theta: f64, lambda: f64, n_max: usize) -> Result<Scheme> {
    let th = |j: usize| theta + j as f64 * lambda;
    let levels = n_max + 1;
    match family {
        PanjerFamily::Gpd => {
            GpdParams::new(theta, lambda)?;
            let base = (0..levels).map(|j| -th(j)).collect();
            let coef = (0..levels)
                .map(|j| {
                    let t = th(j);
                    if t + lambda == 0.0 {
                        (0.0, 0.0)
                    } else {
                        (t * lambda / (t + lambda), t * t / (t + lambda))
                    }
                })
                .collect();
            Ok(Scheme { theta, lambda, base, coef })
        }
        PanjerFamily::Bartlett => {
            BartlettParams::new(theta, lambda)?;
            let base = (0..levels).map(|j| (1.0 - lambda).ln() - th(j)).collect();
            let coef = (0..levels).map(|j| (lambda, th(j))).collect();
            Ok(Scheme { theta, lambda, base, coef })
        }
        PanjerFamily::Shifted(k) => {
            ShiftedMixtureParams::new(k, theta, lambda)?;
            let s = SConstants::new(theta, lambda)?;
            let mut log_s = Vec::with_capacity(levels + 1);
            for j in 0..=levels {
                log_s.push(s.log_s(k, j as u64)?);
            }
            let base = (0..levels)
                .map(|j| {
                    let t = th(j);
                    let pow = if k == 1 { 0.0 } else { (k - 1) as f64 * t.ln() };
                    pow - t - log_s[j]
                })
                .collect();
            let coef = (0..levels)
                .map(|j| {
                    let c = (log_s[j + 1] - log_s[j]).exp();
                    (c * lambda, c * th(j))
                })
                .collect();
            Ok(Scheme { theta, lambda, base, coef })
        }
    }
}

/// `(a, b)` of the recursion for `family` at parameter `θ`.
pub fn panjer_coefficients(family: PanjerFamily, theta: f64, lambda: f64) -> Result<(f64, f64)> {
    Ok(scheme(family, theta, lambda, 0)?.coef[0])
}

/// Fill the full triangle of
/// `q(θ_j; n) = Σ_{k=1}^{n} (a_j + b_j k/n) f(k) q(θ_{j+1}; n−k)`.
pub fn aggregate_grid(
    family: PanjerFamily,
    severity: &SeverityPmf,
    theta: f64,
    lambda: f64,
    n_max: usize,
    budget: u128,
) -> Result<RecursionGrid> {
    let n = n_max as u128;
    check_budget((n + 1) * (n + 2) / 2, budget)?;
    let sc = scheme(family, theta, lambda, n_max)?;
    let ln_f: Vec<f64> = (0..=severity.max_claim()).map(|k| severity.prob(k).ln()).collect();
    let mut layers: Vec<Vec<f64>> = Vec::with_capacity(n_max + 1);
    layers.push(sc.base.clone());
    for n in 1..=n_max {
        let width = n_max - n + 1;
        let k_top = n.min(severity.max_claim());
        let row = fill_row(width, |j| {
            let (a, b) = sc.coef[j];
            let mut acc = LogAccumulator::new();
            for k in 1..=k_top {
                let w = a + b * k as f64 / n as f64;
                if w > 0.0 {
                    acc.add(w.ln() + ln_f[k] + layers[n - k][j + 1]);
                }
            }
            acc.ln()
        });
        layers.push(row);
    }
    Ok(RecursionGrid {
        theta: sc.theta,
        lambda: sc.lambda,
        n_max,
        shaped: false,
        layers,
    })
}

/// Fill the pyramid of the Delaporte scheme: level `(j, i)` has shift
/// `θ+jλ` and shape `m+i`, and
/// `q(j,i;n) = Σ_k f(k) [ b₁ k/n · q(j+1,i+1;n−k) + (a₂ + b₂ k/n) q(j+1,i;n−k) ]`
/// with `b₁ = (m+i−1)λ/(1−λ)`.
pub fn aggregate_grid_delaporte(
    severity: &SeverityPmf,
    theta: f64,
    lambda: f64,
    m: u32,
    n_max: usize,
    coefficients: DelaporteCoefficients,
    budget: u128,
) -> Result<RecursionGrid> {
    let p = DelaporteParams::new(theta, lambda, m)?;
    if p.m() < 2 {
        return Err(domain("the Delaporte scheme needs m >= 2; use the Bartlett family for m = 1"));
    }
    let n = n_max as u128;
    check_budget((n + 1) * (n + 2) * (n + 3) / 6, budget)?;
    let th = |j: usize| theta + j as f64 * lambda;
    let ln_q = (1.0 - lambda).ln();
    let ln_f: Vec<f64> = (0..=severity.max_claim()).map(|k| severity.prob(k).ln()).collect();
    let mut layers: Vec<Vec<f64>> = Vec::with_capacity(n_max + 1);
    let mut base = Vec::with_capacity(tri(n_max + 1));
    for j in 0..=n_max {
        for i in 0..=j {
            base.push((m as usize + i) as f64 * ln_q - th(j));
        }
    }
    layers.push(base);
    for n in 1..=n_max {
        let levels = n_max - n + 1;
        let k_top = n.min(severity.max_claim());
        let row = fill_row(tri(levels), |idx| {
            let (j, i) = untri(idx);
            let raise = (m as usize + i - 1) as f64 * lambda / (1.0 - lambda);
            let (a2, b2) = match coefficients {
                DelaporteCoefficients::PerLevel => (lambda, th(j)),
                DelaporteCoefficients::Literal => (0.0, th(j) + lambda * n as f64),
            };
            let mut acc = LogAccumulator::new();
            for k in 1..=k_top {
                let below = &layers[n - k];
                let kn = k as f64 / n as f64;
                acc.add((raise * kn).ln() + ln_f[k] + below[tri(j + 1) + i + 1]);
                let w = a2 + b2 * kn;
                if w > 0.0 {
                    acc.add(w.ln() + ln_f[k] + below[tri(j + 1) + i]);
                }
            }
            acc.ln()
        });
        layers.push(row);
    }
    Ok(RecursionGrid {
        theta,
        lambda,
        n_max,
        shaped: true,
        layers,
    })
}

fn untri(idx: usize) -> (usize, usize) {
    let mut j = (((8 * idx + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    while tri(j + 1) <= idx {
        j += 1;
    }
    while tri(j) > idx {
        j -= 1;
    }
    (j, idx - tri(j))
}

/// Log of an upper bound on the claim-count pgf, finite below its radius.
fn count_log_pgf(family: PanjerFamily, theta: f64, lambda: f64) -> Result<Box<dyn Fn(f64) -> Option<f64> + Sync>> {
    let law: PowerLaw = match family {
        PanjerFamily::Gpd => {
            let p = GpdParams::new(theta, lambda)?;
            if theta == 0.0 {
                return Ok(Box::new(|_| Some(0.0)));
            }
            p.law()
        }
        PanjerFamily::Bartlett => bartlett_law(&BartlettParams::new(theta, lambda)?),
        PanjerFamily::Shifted(k) => ShiftedMixture::new(ShiftedMixtureParams::new(k, theta, lambda)?)?.law(),
    };
    Ok(Box::new(move |u| law.log_pgf_upper(u)))
}

/// pgf of the aggregate law, `G_T(s) = G_Z(G_U(s))`.
struct AggregateLaw {
    count: Box<dyn Fn(f64) -> Option<f64> + Sync>,
    severity: SeverityPmf,
    s_max: f64,
}

impl AggregateLaw {
    fn new(count: Box<dyn Fn(f64) -> Option<f64> + Sync>, severity: &SeverityPmf, lambda: f64) -> Self {
        let radius = borel_pgf_radius(lambda);
        let u_max = if radius.is_finite() {
            1.0 + (radius - 1.0) * 0.98
        } else {
            16.0
        };
        // G_U is increasing; bisect for G_U(s) = u_max.
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        while severity.pgf(hi) < u_max && hi < 1e6 {
            hi *= 2.0;
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if severity.pgf(mid) < u_max {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        AggregateLaw {
            count,
            severity: severity.clone(),
            s_max: lo,
        }
    }
}

impl PgfLaw for AggregateLaw {
    fn log_pgf(&self, s: f64) -> Option<f64> {
        (self.count)(self.severity.pgf(s))
    }

    fn s_max(&self) -> f64 {
        self.s_max
    }
}

fn certify(column: Vec<f64>, law: &AggregateLaw, lambda: f64) -> Result<LogPmf> {
    let (mass, mean) = if lambda < 1.0 {
        pgf_tail(&column, law)
    } else {
        (1.0, f64::INFINITY)
    };
    LogPmf::new(column, mass, mean)
}

/// Aggregate law on `0..=N` with a certified tail bound.
pub fn aggregate_pmf(
    family: PanjerFamily,
    severity: &SeverityPmf,
    theta: f64,
    lambda: f64,
    n_max: usize,
) -> Result<LogPmf> {
    aggregate_pmf_with_budget(family, severity, theta, lambda, n_max, DEFAULT_GRID_BUDGET)
}

pub fn aggregate_pmf_with_budget(
    family: PanjerFamily,
    severity: &SeverityPmf,
    theta: f64,
    lambda: f64,
    n_max: usize,
    budget: u128,
) -> Result<LogPmf> {
    let grid = aggregate_grid(family, severity, theta, lambda, n_max, budget)?;
    let law = AggregateLaw::new(count_log_pgf(family, theta, lambda)?, severity, lambda);
    certify(grid.base_column(), &law, lambda)
}

pub fn aggregate_pmf_delaporte(
    severity: &SeverityPmf,
    theta: f64,
    lambda: f64,
    m: u32,
    n_max: usize,
    coefficients: DelaporteCoefficients,
) -> Result<LogPmf> {
    aggregate_pmf_delaporte_with_budget(severity, theta, lambda, m, n_max, coefficients, DEFAULT_GRID_BUDGET)
}

pub fn aggregate_pmf_delaporte_with_budget(
    severity: &SeverityPmf,
    theta: f64,
    lambda: f64,
    m: u32,
    n_max: usize,
    coefficients: DelaporteCoefficients,
    budget: u128,
) -> Result<LogPmf> {
    let grid = aggregate_grid_delaporte(severity, theta, lambda, m, n_max, coefficients, budget)?;
    let count = CompoundDelaporteLaw { theta, lambda, m };
    let law = AggregateLaw::new(Box::new(move |u| count.log_pgf(u)), severity, lambda);
    certify(grid.base_column(), &law, lambda)
}

/// Claim-count law feeding an aggregate computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum CountLaw {
    Family(PanjerFamily),
    Delaporte(u32),
}

/// Mean and variance of the aggregate law by Wald's identities:
/// `E[T] = E[Z]E[U]`, `Var T = E[Z]Var U + Var Z·E[U]²`.
pub fn aggregate_moments(count: CountLaw, severity: &SeverityPmf, theta: f64, lambda: f64) -> Result<(f64, f64)> {
    let (mz, vz) = match count {
        CountLaw::Family(PanjerFamily::Gpd) => gpd_mean_var(&GpdParams::new(theta, lambda)?)?,
        CountLaw::Family(PanjerFamily::Bartlett) => bartlett_compound_mean_var(&BartlettParams::new(theta, lambda)?),
        CountLaw::Family(PanjerFamily::Shifted(k)) => {
            ShiftedMixture::new(ShiftedMixtureParams::new(k, theta, lambda)?)?.mean_var()?
        }
        CountLaw::Delaporte(m) => delaporte_compound_mean_var(&DelaporteParams::new(theta, lambda, m)?)?,
    };
    let mu = severity.mean();
    Ok((mz * mu, mz * severity.variance() + vz * mu * mu))
}

/// `⌈mean + 10·sd⌉` of the aggregate law.
pub fn default_support(count: CountLaw, severity: &SeverityPmf, theta: f64, lambda: f64) -> Result<usize> {
    let (mean, var) = aggregate_moments(count, severity, theta, lambda)?;
    Ok((mean + 10.0 * var.sqrt()).ceil() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StopLoss {
    pub retention: u64,
    /// `Σ_{n>d} (n−d) q(n)` over the stored support.
    pub value: f64,
    /// Upper bound on the contribution of mass beyond the stored support.
    pub tail_bound: f64,
}

/// Stop-loss premium `E[(T−d)⁺]`, failing when the tail contribution cannot
/// be bounded below `tolerance`.
pub fn stop_loss(q: &LogPmf, retention: u64, tolerance: f64) -> Result<StopLoss> {
    let d = retention as usize;
    let value = q
        .log_weights()
        .iter()
        .enumerate()
        .skip(d + 1)
        .map(|(n, w)| (n - d) as f64 * w.exp())
        .sum();
    // (n−d)⁺ ≤ n beyond the support.
    let tail_bound = q.tail_mean();
    if tail_bound > tolerance {
        return Err(Error::TailTooLarge {
            bound: tail_bound,
            tolerance,
        });
    }
    Ok(StopLoss {
        retention,
        value,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compounds::{bartlett_compound_pmf, delaporte_compound_pmf, gpd_pmf};

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    }

    fn two_point() -> SeverityPmf {
        SeverityPmf::new(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn severity_parsing() {
        let s = SeverityPmf::parse("# sizes\n1 0.25\n\n3 0.75 # tail\n").unwrap();
        assert_eq!(s.probs(), &[0.25, 0.0, 0.75]);
        let err = |t: &str| match SeverityPmf::parse(t) {
            Err(Error::SeverityFormat { line, .. }) => line,
            other => panic!("{other:?}"),
        };
        assert_eq!(err("1 0.5\n0 0.5\n"), 2);
        assert_eq!(err("1 0.5\n1 0.5\n"), 2);
        assert_eq!(err("1 0.5\n2 0.4\n"), 2);
        assert_eq!(err("1 abc\n"), 1);
        assert_eq!(err("1\n"), 1);
        assert_eq!(err("1 -0.5\n2 1.5\n"), 1);
        assert!(SeverityPmf::parse("# nothing\n").is_err());
    }

    #[test]
    fn coefficient_reductions() {
        let (a, b) = panjer_coefficients(PanjerFamily::Gpd, 1.0, 0.5).unwrap();
        assert!(rel(a, 1.0 / 3.0) < 1e-15 && rel(b, 2.0 / 3.0) < 1e-15);
        let (a0, b0) = panjer_coefficients(PanjerFamily::Shifted(0), 1.0, 0.5).unwrap();
        assert!(rel(a0, a) < 1e-14 && rel(b0, b) < 1e-14);
        let (a1, b1) = panjer_coefficients(PanjerFamily::Shifted(1), 1.3, 0.5).unwrap();
        assert!(rel(a1, 0.5) < 1e-14 && rel(b1, 1.3) < 1e-14);
    }

    #[test]
    fn unit_severity_reproduces_counts() {
        let unit = SeverityPmf::unit();
        let g = aggregate_pmf(PanjerFamily::Gpd, &unit, 1.0, 0.5, 40).unwrap();
        let b = aggregate_pmf(PanjerFamily::Bartlett, &unit, 1.0, 0.5, 40).unwrap();
        let d = aggregate_pmf_delaporte(&unit, 1.0, 0.5, 3, 30, DelaporteCoefficients::PerLevel).unwrap();
        let gp = GpdParams::new(1.0, 0.5).unwrap();
        let bp = BartlettParams::new(1.0, 0.5).unwrap();
        let dp = DelaporteParams::new(1.0, 0.5, 3).unwrap();
        for n in 0..=40usize {
            assert!(rel(g.prob(n), gpd_pmf(&gp, n as u64).exp()) < 1e-12, "n={n}");
            assert!(rel(b.prob(n), bartlett_compound_pmf(&bp, n as u64).exp()) < 1e-12, "n={n}");
        }
        for n in 0..=30usize {
            assert!(rel(d.prob(n), delaporte_compound_pmf(&dp, n as u64).unwrap().exp()) < 1e-12);
        }
    }

    #[test]
    fn two_point_first_value() {
        let q = aggregate_pmf(PanjerFamily::Gpd, &two_point(), 1.0, 0.5, 10).unwrap();
        assert!(rel(q.prob(0), (-1.0f64).exp()) < 1e-15);
        assert!(rel(q.prob(1), 0.5 * (-1.5f64).exp()) < 1e-14);
        let d = aggregate_pmf_delaporte(&two_point(), 1.0, 0.5, 2, 10, DelaporteCoefficients::PerLevel).unwrap();
        assert!(rel(d.prob(0), 0.25 * (-1.0f64).exp()) < 1e-15);
    }

    #[test]
    fn grid_access_outside_triangle_fails() {
        let g = aggregate_grid(PanjerFamily::Gpd, &two_point(), 1.0, 0.5, 5, DEFAULT_GRID_BUDGET).unwrap();
        assert!(g.get(5, 0).is_ok());
        assert!(g.get(5, 1).is_err());
        assert!(g.get(0, 6).is_err());
        assert!(g.get_shaped(0, 1, 0).is_err());
        let d = aggregate_grid_delaporte(&two_point(), 1.0, 0.5, 2, 5, DelaporteCoefficients::PerLevel, DEFAULT_GRID_BUDGET)
            .unwrap();
        assert!(d.get_shaped(3, 3, 2).is_ok());
        assert!(d.get_shaped(3, 4, 2).is_err());
        assert!(d.get_shaped(4, 0, 2).is_err());
    }

    #[test]
    fn budget_is_enforced() {
        let r = aggregate_pmf_with_budget(PanjerFamily::Gpd, &two_point(), 1.0, 0.5, 100, 1000);
        assert!(matches!(r, Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn larger_support_leaves_prefix_unchanged() {
        let s = SeverityPmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        let a = aggregate_pmf(PanjerFamily::Shifted(2), &s, 0.8, 0.4, 30).unwrap();
        let b = aggregate_pmf(PanjerFamily::Shifted(2), &s, 0.8, 0.4, 40).unwrap();
        assert_eq!(a.log_weights(), &b.log_weights()[..31]);
    }

    #[test]
    fn normalization_and_moments_at_default_support() {
        let s = two_point();
        let n = default_support(CountLaw::Family(PanjerFamily::Gpd), &s, 1.0, 0.5).unwrap();
        let q = aggregate_pmf(PanjerFamily::Gpd, &s, 1.0, 0.5, n).unwrap();
        let total = q.stored_mass() + q.tail_mass();
        assert!(total >= 1.0 - 1e-12 && total - 1.0 < 1e-8, "{} {}", q.stored_mass(), q.tail_mass());
        let (mean, _) = aggregate_moments(CountLaw::Family(PanjerFamily::Gpd), &s, 1.0, 0.5).unwrap();
        let sl = stop_loss(&q, 0, 1.0).unwrap();
        assert!(sl.value <= mean && sl.value + sl.tail_bound >= mean);
    }

    #[test]
    fn stop_loss_examples() {
        let q = aggregate_pmf(PanjerFamily::Gpd, &SeverityPmf::unit(), 1.0, 0.5, 200).unwrap();
        assert!(rel(stop_loss(&q, 0, 1e-10).unwrap().value, 2.0) < 1e-10);
        assert_eq!(stop_loss(&q, 500, 1e-10).unwrap().value, 0.0);
        let short = aggregate_pmf(PanjerFamily::Gpd, &SeverityPmf::unit(), 1.0, 0.5, 3).unwrap();
        assert!(matches!(stop_loss(&short, 0, 1e-10), Err(Error::TailTooLarge { .. })));
    }

    #[test]
    fn untri_inverts_tri() {
        for j in 0..50 {
            for i in 0..=j {
                assert_eq!(untri(tri(j) + i), (j, i));
            }
        }
    }
}
