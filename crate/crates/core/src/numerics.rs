//! Log-space arithmetic and the combinatorial coefficients used throughout
//! the crate.
//!
//! Every probability magnitude is carried as a natural logarithm. Factorials
//! come from an exact integer path while they fit in 62 bits and from the
//! Stirling series for `ln Γ` beyond that.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// A probability magnitude on the natural-log scale.
///
/// `-inf` encodes zero probability. NaN and `+inf` are rejected.
#[derive(Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogWeight(f64);

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ONE: LogWeight = LogWeight(0.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value == f64::INFINITY {
            return Err(domain(format!("log-weight must be finite or -inf, got {value}")));
        }
        Ok(LogWeight(value))
    }

    /// Log of a nonnegative real.
    pub fn from_real(x: f64) -> Result<Self> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(domain(format!("log-weight source must be a finite value >= 0, got {x}")));
        }
        Ok(LogWeight(x.ln()))
    }

    pub(crate) fn from_raw(value: f64) -> Self {
        debug_assert!(!value.is_nan() && value != f64::INFINITY, "invalid log-weight {value}");
        LogWeight(value)
    }

    #[inline]
    pub fn ln(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl fmt::Debug for LogWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogWeight({})", self.0)
    }
}

/// `log Σ exp(term)`. The empty sum is the zero-probability element.
pub fn log_sum_exp(terms: &[LogWeight]) -> LogWeight {
    let mut acc = LogAccumulator::new();
    for t in terms {
        acc.add(t.0);
    }
    LogWeight::from_raw(acc.ln())
}

/// Two-pass reference for the streaming accumulator.
#[cfg(test)]
fn lse(terms: &[f64]) -> f64 {
    match terms.len() {
        0 => f64::NEG_INFINITY,
        1 => terms[0],
        _ => {
            let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return max;
            }
            let s: f64 = terms.iter().map(|&t| (t - max).exp()).sum();
            max + s.ln()
        }
    }
}

/// `log(exp(a) + exp(b))`.
#[inline]
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Streaming log-sum-exp that rescales when a larger term arrives.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    max: f64,
    scaled: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self::new()
    }
}

impl FromIterator<f64> for LogAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = LogAccumulator::new();
        for t in iter {
            acc.add(t);
        }
        acc
    }
}

impl LogAccumulator {
    pub fn new() -> Self {
        LogAccumulator {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    pub fn add(&mut self, term: f64) {
        if term == f64::NEG_INFINITY {
            return;
        }
        if term <= self.max {
            self.scaled += (term - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - term).exp() + 1.0;
            self.max = term;
        }
    }

    pub fn ln(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

const EXACT_LIMIT: u128 = 1 << 62;
const LN_FACT_TABLE: usize = 4096;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| (0..LN_FACT_TABLE as u64).map(ln_factorial_uncached).collect())
}

fn ln_factorial_uncached(n: u64) -> f64 {
    if n <= 20 {
        let f: u64 = (1..=n).product();
        return (f as f64).ln();
    }
    ln_gamma_stirling((n + 1) as f64)
}

/// Stirling series for `ln Γ(x)`, accurate to double precision for x ≥ 20.
fn ln_gamma_stirling(x: f64) -> f64 {
    const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0 / 12.0
            - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series
}

/// `ln n!`.
pub fn ln_factorial(n: u64) -> f64 {
    if (n as usize) < LN_FACT_TABLE {
        ln_factorial_table()[n as usize]
    } else {
        ln_factorial_uncached(n)
    }
}

/// `C(n, k)` as an exact integer, or `None` once it exceeds 2^62.
pub fn exact_binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > EXACT_LIMIT {
            return None;
        }
    }
    Some(acc as u64)
}

/// `log C(n, k)`; zero probability when `k < 0` or `k > n`.
pub fn log_binomial(n: u64, k: i64) -> LogWeight {
    if k < 0 || k as u64 > n {
        return LogWeight::ZERO;
    }
    let k = k as u64;
    let v = match exact_binomial(n, k) {
        Some(c) => (c as f64).ln(),
        None => ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k),
    };
    LogWeight::from_raw(v)
}

/// Riordan's α-symbol `α^ℓ(m−1) = C(m+ℓ−2, ℓ)·ℓ!`, the rising factorial
/// `(m−1)(m)···(m+ℓ−2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaSymbol {
    pub m: u32,
    pub ell: u32,
    /// Exact integer value while it fits in 62 bits.
    pub exact: Option<u64>,
    pub log_value: LogWeight,
}

pub fn alpha_symbol(m: u32, ell: u32) -> Result<AlphaSymbol> {
    if m < 2 {
        return Err(domain(format!("alpha-symbol shape m must be >= 2, got {m}")));
    }
    let exact = exact_rising(m as u64 - 1, ell as u64);
    let log_value = match exact {
        Some(v) => (v as f64).ln(),
        None => log_alpha_raw(m, ell),
    };
    Ok(AlphaSymbol {
        m,
        ell,
        exact,
        log_value: LogWeight::from_raw(log_value),
    })
}

fn exact_rising(start: u64, len: u64) -> Option<u64> {
    let mut acc: u128 = 1;
    for i in 0..len {
        acc *= (start + i) as u128;
        if acc > EXACT_LIMIT {
            return None;
        }
    }
    Some(acc as u64)
}

/// `ln α^ℓ(m−1) = ln (m+ℓ−2)! − ln (m−2)!` without validation.
#[inline]
pub(crate) fn log_alpha_raw(m: u32, ell: u32) -> f64 {
    let m = m as u64;
    ln_factorial(m + ell as u64 - 2) - ln_factorial(m - 2)
}

/// `log (x + λ·α(m−1))^n`, the symbolic power expanded by the binomial rule
/// with `α^ℓ(m−1)` substituted for the ℓ-th power of `α(m−1)`.
pub fn alpha_binomial_expand(x: LogWeight, lambda: f64, m: u32, n: u32) -> Result<LogWeight> {
    if m < 2 {
        return Err(domain(format!("alpha-symbol shape m must be >= 2, got {m}")));
    }
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(domain(format!("lambda must be a finite value >= 0, got {lambda}")));
    }
    if n == 0 {
        return Ok(LogWeight::ONE);
    }
    Ok(LogWeight::from_raw(alpha_expand_raw(x.ln(), lambda.ln(), m, n)))
}

/// Core of [`alpha_binomial_expand`] on raw logs: `ln_x` may be `-inf`.
pub(crate) fn alpha_expand_raw(ln_x: f64, ln_lambda: f64, m: u32, n: u32) -> f64 {
    let mut acc = LogAccumulator::new();
    let ln_n_fact = ln_factorial(n as u64);
    for ell in 0..=n {
        let rest = n - ell;
        let x_pow = if rest == 0 { 0.0 } else { rest as f64 * ln_x };
        let lam_pow = if ell == 0 { 0.0 } else { ell as f64 * ln_lambda };
        let binom = ln_n_fact - ln_factorial(ell as u64) - ln_factorial(rest as u64);
        acc.add(binom + x_pow + lam_pow + log_alpha_raw(m, ell));
    }
    acc.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    fn pascal(n: usize) -> Vec<Vec<u64>> {
        let mut rows = vec![vec![1u64]];
        for i in 1..=n {
            let prev = &rows[i - 1];
            let mut row = vec![1u64; i + 1];
            for k in 1..i {
                row[k] = prev[k - 1] + prev[k];
            }
            rows.push(row);
        }
        rows
    }

    #[test]
    fn lse_examples() {
        let h = LogWeight::from_real(0.5).unwrap();
        assert!(log_sum_exp(&[h, h]).ln().abs() < 1e-15);
        assert!(log_sum_exp(&[]).is_zero());
        let q = LogWeight::from_real(0.25).unwrap();
        assert!(log_sum_exp(&[q, q, h]).ln().abs() < 1e-15);
        let single = LogWeight::new(-3.25).unwrap();
        assert_eq!(log_sum_exp(&[single]), single);
        assert!(log_sum_exp(&[LogWeight::ZERO, LogWeight::ZERO]).is_zero());
    }

    #[test]
    fn log_weight_rejects_nan_and_pos_inf() {
        assert!(LogWeight::new(f64::NAN).is_err());
        assert!(LogWeight::new(f64::INFINITY).is_err());
        assert!(LogWeight::new(f64::NEG_INFINITY).unwrap().is_zero());
        assert!(LogWeight::from_real(-1.0).is_err());
    }

    #[test]
    fn accumulator_matches_batch() {
        let terms = [-3.0, 10.0, -700.0, 2.5, f64::NEG_INFINITY, 9.999];
        let mut acc = LogAccumulator::new();
        for t in terms {
            acc.add(t);
        }
        assert!(close(acc.ln(), lse(&terms), 1e-15));
    }

    #[test]
    fn binomial_examples() {
        assert!(close(log_binomial(3, 1).ln(), 3f64.ln(), 1e-15));
        for n in [0, 1, 7, 300, 5000] {
            assert_eq!(log_binomial(n, 0).ln(), 0.0);
        }
        assert!(close(log_binomial(10, 5).ln(), 252f64.ln(), 1e-15));
        assert!(log_binomial(4, -1).is_zero());
        assert!(log_binomial(4, 5).is_zero());
    }

    #[test]
    fn binomial_matches_pascal_triangle() {
        let rows = pascal(30);
        for (n, row) in rows.iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                let v = log_binomial(n as u64, k as i64).exp();
                assert!(close(v, c as f64, 1e-12), "C({n},{k}) = {v} vs {c}");
            }
        }
    }

    #[test]
    fn large_binomial_uses_log_path() {
        assert!(exact_binomial(200, 100).is_none());
        // ln C(200,100) = 135.7532...
        let v = log_binomial(200, 100).ln();
        let direct = ln_factorial(200) - 2.0 * ln_factorial(100);
        assert!(close(v, direct, 1e-14));
        assert!((v - 135.753_236_081_278_49).abs() < 1e-10);
    }

    #[test]
    fn ln_factorial_is_continuous_across_paths() {
        for n in 18..25u64 {
            let step = ln_factorial(n + 1) - ln_factorial(n);
            assert!(close(step, ((n + 1) as f64).ln(), 1e-13), "n={n}");
        }
        for n in [4094u64, 4095, 4096, 4097] {
            let step = ln_factorial(n + 1) - ln_factorial(n);
            assert!(close(step, ((n + 1) as f64).ln(), 1e-10), "n={n}");
        }
        // 170! = 7.257415615307994e306
        assert!(close(ln_factorial(170), 7.257_415_615_307_994e306f64.ln(), 1e-14));
    }

    #[test]
    fn alpha_symbol_examples() {
        assert_eq!(alpha_symbol(2, 0).unwrap().exact, Some(1));
        assert_eq!(alpha_symbol(2, 2).unwrap().exact, Some(2));
        assert_eq!(alpha_symbol(3, 2).unwrap().exact, Some(6));
        assert!(alpha_symbol(1, 3).is_err());
        for m in 2..10 {
            assert_eq!(alpha_symbol(m, 0).unwrap().log_value.ln(), 0.0);
        }
    }

    #[test]
    fn alpha_symbol_matches_defining_formula() {
        let rows = pascal(40);
        for m in 2u32..=8 {
            for ell in 0u32..=12 {
                let c = rows[(m + ell - 2) as usize][ell as usize];
                let fact: u64 = (1..=ell as u64).product();
                assert_eq!(alpha_symbol(m, ell).unwrap().exact, Some(c * fact));
            }
        }
    }

    #[test]
    fn alpha_recursion_holds_in_integers() {
        for m in 2u32..=8 {
            for ell in 0u32..=20 {
                let lhs = alpha_symbol(m, ell + 1).unwrap().exact;
                let rhs = alpha_symbol(m + 1, ell).unwrap().exact;
                match (lhs, rhs) {
                    (Some(a), Some(b)) => assert_eq!(a as u128, (m as u128 - 1) * b as u128),
                    _ => {
                        let a = alpha_symbol(m, ell + 1).unwrap().log_value.ln();
                        let b = alpha_symbol(m + 1, ell).unwrap().log_value.ln();
                        assert!(close(a, ((m - 1) as f64).ln() + b, 1e-13));
                    }
                }
            }
        }
    }

    #[test]
    fn alpha_expand_examples() {
        let x = LogWeight::from_real(2.0).unwrap();
        assert_eq!(alpha_binomial_expand(x, 0.5, 2, 0).unwrap(), LogWeight::ONE);
        let v = alpha_binomial_expand(x, 0.5, 2, 1).unwrap().exp();
        assert!(close(v, 2.5, 1e-14));
        let x = LogWeight::from_real(1.5).unwrap();
        let v = alpha_binomial_expand(x, 0.5, 3, 2).unwrap().exp();
        assert!(close(v, 6.75, 1e-14));
        assert!(alpha_binomial_expand(x, 0.5, 1, 2).is_err());
    }

    #[test]
    fn alpha_expand_with_zero_base() {
        // x = 0 leaves only the ℓ = n term λ^n α^n(m−1).
        let v = alpha_binomial_expand(LogWeight::ZERO, 0.5, 3, 2).unwrap().exp();
        assert!(close(v, 0.25 * 6.0, 1e-14));
    }

    proptest! {
        #[test]
        fn alpha_expand_at_zero_lambda_is_pure_power(x in 0.01f64..50.0, m in 2u32..9, n in 0u32..60) {
            let lx = LogWeight::from_real(x).unwrap();
            let v = alpha_binomial_expand(lx, 0.0, m, n).unwrap().ln();
            let want = n as f64 * x.ln();
            prop_assert!((v - want).abs() <= 1e-12 * want.abs().max(1.0));
        }

        #[test]
        fn lse_is_order_invariant(mut v in proptest::collection::vec(-50.0f64..50.0, 1..20)) {
            let a = lse(&v);
            v.reverse();
            let b = lse(&v);
            prop_assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
            let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(a >= max && a <= max + (v.len() as f64).ln() + 1e-12);
        }
    }
}
