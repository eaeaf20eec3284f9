//! Truncated probability mass functions with certified tail bounds.
//!
//! Two certificates are used:
//!
//! * **ratio**: for laws whose term ratio `t(j+1)/t(j)` admits an upper bound
//!   `ρ(n) < 1` that holds for every `j ≥ n`, the tail after `n` is at most
//!   `t(n)·ρ/(1−ρ)`. The bound is applied after summing enough explicit terms
//!   beyond the truncation point that the geometric remainder is negligible.
//! * **pgf**: for `1 < s` inside the radius of convergence,
//!   `Σ_{n>N} p(n) ≤ (G(s) − Σ_{n≤N} p(n)sⁿ)/s^{N+1}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::LogWeight;

/// Probability mass over `0..=N` stored as log-weights, with bounds on the
/// mass and on the first moment beyond `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogPmf {
    log_weights: Vec<f64>,
    tail_mass: f64,
    tail_mean: f64,
}

impl LogPmf {
    /// Build from raw log-weights. Bounds must be nonnegative (may be `inf`).
    pub fn new(log_weights: Vec<f64>, tail_mass: f64, tail_mean: f64) -> Result<Self> {
        if log_weights.is_empty() {
            return Err(Error::Domain("a LogPmf needs at least one mass point".into()));
        }
        if let Some(bad) = log_weights.iter().find(|w| w.is_nan() || **w == f64::INFINITY) {
            return Err(Error::Domain(format!("invalid log-weight {bad}")));
        }
        if !(tail_mass >= 0.0) || !(tail_mean >= 0.0) {
            return Err(Error::Domain("tail bounds must be nonnegative".into()));
        }
        Ok(LogPmf {
            log_weights,
            tail_mass,
            tail_mean,
        })
    }

    /// Largest mass point held.
    pub fn max_n(&self) -> usize {
        self.log_weights.len() - 1
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `ln P{X = n}`; zero beyond the stored support.
    pub fn log_prob(&self, n: usize) -> LogWeight {
        self.log_weights
            .get(n)
            .map_or(LogWeight::ZERO, |&w| LogWeight::from_raw(w))
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.log_weights.get(n).map_or(0.0, |w| w.exp())
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// Upper bound on `P{X > N}`.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Upper bound on `E[X·1{X > N}]`.
    pub fn tail_mean(&self) -> f64 {
        self.tail_mean
    }

    /// Running sums `P{X ≤ n}` over the stored support.
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.log_weights
            .iter()
            .map(|w| {
                acc += w.exp();
                acc
            })
            .collect()
    }

    /// `Σ_{n ≤ N} P{X = n}`.
    pub fn stored_mass(&self) -> f64 {
        self.log_weights.iter().map(|w| w.exp()).sum()
    }

    /// `Σ_{n ≤ N} n^order P{X = n}`.
    pub fn truncated_moment(&self, order: u32) -> f64 {
        self.log_weights
            .iter()
            .enumerate()
            .map(|(n, w)| (n as f64).powi(order as i32) * w.exp())
            .sum()
    }

    /// Replace the tail bounds.
    pub fn with_tail(mut self, tail_mass: f64, tail_mean: f64) -> Self {
        self.tail_mass = tail_mass;
        self.tail_mean = tail_mean;
        self
    }
}

/// Explicit terms are summed beyond the truncation point until the geometric
/// remainder drops below this fraction of what has been summed.
const REMAINDER_FRACTION: f64 = 1e-6;
const MAX_EXPLICIT_TERMS: u64 = 2_000_000;
/// Relative slack covering rounding in the summed bound.
const ROUNDING_SLACK: f64 = 1e-12;

/// A law given termwise in log scale together with a ratio bound.
pub(crate) trait RatioLaw {
    /// `ln t(n)`.
    fn log_term(&self, n: u64) -> f64;
    /// Some `ρ` with `t(j+1)/t(j) ≤ ρ` for every `j ≥ n`, if available.
    fn ratio_bound(&self, n: u64) -> Option<f64>;
}

/// Smallest `N ≥ min_n` whose geometric tail bound `t(N)ρ/(1−ρ)` is below `eps`.
pub(crate) fn ratio_truncation(law: &dyn RatioLaw, min_n: u64, eps: f64, cap: u64) -> Result<u64> {
    let mut n = min_n;
    loop {
        if let Some(rho) = law.ratio_bound(n) {
            if rho < 1.0 {
                let t = law.log_term(n).exp();
                if t * rho / (1.0 - rho) < eps {
                    return Ok(n);
                }
            }
        }
        n += 1;
        if n > cap {
            return Err(Error::Divergence {
                what: "tail truncation search",
                iterations: cap as usize,
            });
        }
    }
}

/// Bounds on `Σ_{n>N} t(n)` and `Σ_{n>N} n·t(n)`.
pub(crate) fn ratio_tail(law: &dyn RatioLaw, n_max: u64) -> (f64, f64) {
    let mut mass = 0.0;
    let mut mean = 0.0;
    let mut n = n_max;
    let mut prev_t = law.log_term(n).exp();
    for _ in 0..MAX_EXPLICIT_TERMS {
        // Remainder after n, valid from the bound at n.
        if let Some(rho) = law.ratio_bound(n) {
            if rho < 1.0 {
                let g = rho / (1.0 - rho);
                let rem_mass = prev_t * g;
                let rem_mean = prev_t * (n as f64 * g + g / (1.0 - rho));
                if rem_mass <= REMAINDER_FRACTION * mass || rem_mass < 1e-300 {
                    let slack = 1.0 + ROUNDING_SLACK;
                    return ((mass + rem_mass) * slack, (mean + rem_mean) * slack);
                }
            }
        }
        n += 1;
        let t = law.log_term(n).exp();
        mass += t;
        mean += n as f64 * t;
        prev_t = t;
    }
    (1.0, f64::INFINITY)
}

/// Log of a probability generating function, finite on `[0, s_max)`.
pub(crate) trait PgfLaw {
    fn log_pgf(&self, s: f64) -> Option<f64>;
    /// Largest argument the certificate may use.
    fn s_max(&self) -> f64;
}

const PGF_GRID: i32 = 48;

fn pgf_grid(s_max: f64, n_max: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..PGF_GRID)
        .map(|i| 1.0 + (s_max - 1.0) * 0.5f64.powi(i))
        .filter(|&s| s > 1.0)
        .collect();
    let mean_point = 1.0 + 1.0 / (n_max as f64 + 1.0);
    if mean_point < s_max {
        grid.push(mean_point);
    }
    grid
}

/// pgf certificate for a stored table.
pub(crate) fn pgf_tail(log_weights: &[f64], law: &dyn PgfLaw) -> (f64, f64) {
    let n_max = log_weights.len() - 1;
    let s_max = law.s_max();
    if !(s_max > 1.0) {
        return (1.0, f64::INFINITY);
    }
    let mean_threshold = 1.0 + 1.0 / (n_max as f64 + 1.0);
    let mut best_mass = 1.0f64;
    let mut best_mean = f64::INFINITY;
    for s in pgf_grid(s_max, n_max) {
        let Some(lg) = law.log_pgf(s) else { continue };
        let ln_s = s.ln();
        // Work relative to s^{N+1} so nothing overflows.
        let shift = (n_max as f64 + 1.0) * ln_s;
        let head: f64 = log_weights
            .iter()
            .enumerate()
            .map(|(n, w)| (w + n as f64 * ln_s - shift).exp())
            .sum();
        let g = (lg - shift).exp();
        let allowance = 4.0 * (n_max as f64 + 2.0) * f64::EPSILON * g;
        let r = (g - head).max(0.0) + allowance;
        best_mass = best_mass.min(r);
        if s >= mean_threshold {
            best_mean = best_mean.min((n_max as f64 + 1.0) * r);
        }
    }
    (best_mass, best_mean)
}

/// Smallest `N` for which the pgf certificate is below `eps`.
pub(crate) fn pgf_truncation(
    log_pmf: &dyn Fn(u64) -> f64,
    law: &dyn PgfLaw,
    eps: f64,
    cap: u64,
) -> Result<u64> {
    let s_max = law.s_max();
    if !(s_max > 1.0) {
        return Err(Error::Domain("no exponential moment available for a tail bound".into()));
    }
    let grid: Vec<(f64, f64)> = pgf_grid(s_max, 0)
        .into_iter()
        .filter_map(|s| law.log_pgf(s).map(|lg| (s.ln(), lg)))
        .collect();
    // Partial sums Σ p(n) sⁿ, kept relative to G(s).
    let mut partial = vec![0.0f64; grid.len()];
    for n in 0..=cap {
        let lp = log_pmf(n);
        let mut best = f64::INFINITY;
        for (acc, &(ln_s, lg)) in partial.iter_mut().zip(&grid) {
            *acc += (lp + n as f64 * ln_s - lg).exp();
            let shift = (n as f64 + 1.0) * ln_s;
            let g = (lg - shift).exp();
            let allowance = 4.0 * (n as f64 + 2.0) * f64::EPSILON * g;
            let r = ((1.0 - *acc) * g).max(0.0) + allowance;
            best = best.min(r);
        }
        if best < eps {
            return Ok(n);
        }
    }
    Err(Error::Divergence {
        what: "tail truncation search",
        iterations: cap as usize,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Geometric(f64);

    impl RatioLaw for Geometric {
        fn log_term(&self, n: u64) -> f64 {
            (1.0 - self.0).ln() + n as f64 * self.0.ln()
        }
        fn ratio_bound(&self, _n: u64) -> Option<f64> {
            Some(self.0)
        }
    }

    impl PgfLaw for Geometric {
        fn log_pgf(&self, s: f64) -> Option<f64> {
            (self.0 * s < 1.0).then(|| ((1.0 - self.0) / (1.0 - self.0 * s)).ln())
        }
        fn s_max(&self) -> f64 {
            0.999 / self.0
        }
    }

    fn table(law: &Geometric, n: u64) -> Vec<f64> {
        (0..=n).map(|i| law.log_term(i)).collect()
    }

    #[test]
    fn ratio_tail_is_tight_for_geometric() {
        let g = Geometric(0.5);
        let (mass, mean) = ratio_tail(&g, 10);
        let exact = 0.5f64.powi(11);
        assert!(mass >= exact && mass <= exact * (1.0 + 1e-6));
        // Σ_{n>10} n 2^{-(n+1)} = 12 · 2^{-11}
        let exact_mean = 12.0 * 0.5f64.powi(11);
        assert!(mean >= exact_mean && mean <= exact_mean * (1.0 + 1e-5));
    }

    #[test]
    fn ratio_truncation_meets_eps() {
        let g = Geometric(0.9);
        let n = ratio_truncation(&g, 0, 1e-12, 100_000).unwrap();
        let exact_tail = 0.9f64.powi(n as i32 + 1);
        assert!(exact_tail < 1e-12);
        assert!(0.9f64.powi(n as i32) > 1e-12);
    }

    #[test]
    fn pgf_tail_bounds_geometric() {
        let g = Geometric(0.7);
        let t = table(&g, 40);
        let (mass, mean) = pgf_tail(&t, &g);
        let exact = 0.7f64.powi(41);
        assert!(mass >= exact * (1.0 - 1e-9), "{mass} vs {exact}");
        assert!(mass <= exact * 1.01 + 1e-14);
        let exact_mean: f64 = (41..2000).map(|n| n as f64 * 0.3 * 0.7f64.powi(n)).sum();
        assert!(mean >= exact_mean);
    }

    #[test]
    fn pgf_truncation_meets_eps() {
        let g = Geometric(0.5);
        let n = pgf_truncation(&|n| g.log_term(n), &g, 1e-10, 10_000).unwrap();
        assert!(0.5f64.powi(n as i32 + 1) < 1e-10);
    }

    #[test]
    fn logpmf_accessors() {
        let p = LogPmf::new(vec![0.5f64.ln(), 0.25f64.ln(), 0.25f64.ln()], 0.0, 0.0).unwrap();
        assert_eq!(p.max_n(), 2);
        assert!(p.log_prob(7).is_zero());
        assert_eq!(p.cumulative().last().copied(), Some(1.0));
        assert!((p.truncated_moment(1) - 0.75).abs() < 1e-15);
        assert!(LogPmf::new(vec![], 0.0, 0.0).is_err());
        assert!(LogPmf::new(vec![f64::NAN], 0.0, 0.0).is_err());
    }
}
