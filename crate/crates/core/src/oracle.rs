//! Brute-force reference computations in linear scale: convolutions, mixing
//! sums, deconvolution, progeny enumeration and the combinatorial identities
//! behind the closed forms. They share no code path with the log-space
//! kernels, which is what makes them useful as referees.

use serde::Serialize;

use crate::error::{check_open, domain, Error, Result};

/// Values on `0..=N` in linear scale. Entries are nonnegative except where an
/// operation explicitly produces signed values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensePmf {
    values: Vec<f64>,
    /// Set when mass beyond `N` is known to have been dropped.
    pub truncated: bool,
}

impl DensePmf {
    pub fn new(values: Vec<f64>) -> Self {
        DensePmf {
            values,
            truncated: true,
        }
    }

    pub fn from_fn(n_max: usize, f: impl Fn(usize) -> f64) -> Self {
        DensePmf::new((0..=n_max).map(f).collect())
    }

    pub fn point_mass(at: usize, n_max: usize) -> Self {
        DensePmf::from_fn(n_max, |n| if n == at { 1.0 } else { 0.0 })
    }

    /// Value at `n`, zero beyond the stored range.
    pub fn get(&self, n: usize) -> f64 {
        self.values.get(n).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_max(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    /// The law of `X + shift`, kept on `0..=N`.
    pub fn shifted(&self, shift: usize) -> DensePmf {
        DensePmf::from_fn(self.n_max(), |n| if n >= shift { self.get(n - shift) } else { 0.0 })
    }
}

/// `(a∗b)(n) = Σ_k a(k) b(n−k)` on `0..=N`.
pub fn convolve(a: &DensePmf, b: &DensePmf, n_max: usize) -> DensePmf {
    DensePmf::from_fn(n_max, |n| (0..=n).map(|k| a.get(k) * b.get(n - k)).sum())
}

/// `Σ_m count(m)·summand^{∗m}(n)` on `0..=N`.
pub fn compound_by_mixing(count: &DensePmf, summand: &DensePmf, n_max: usize) -> Result<DensePmf> {
    if summand.get(0) != 0.0 {
        return Err(domain("mixing needs a summand supported on the positive integers"));
    }
    let mut power = DensePmf::point_mass(0, n_max);
    let mut out = vec![0.0; n_max + 1];
    for m in 0..=n_max.min(count.n_max()) {
        if m > 0 {
            power = convolve(&power, summand, n_max);
        }
        let c = count.get(m);
        for (o, p) in out.iter_mut().zip(power.values()) {
            *o += c * p;
        }
    }
    Ok(DensePmf::new(out))
}

/// Invert the mixing map for Borel summands: the unique `c` with
/// `Σ_m c(m)·Borel^{∗m} = target` on `0..=M`.
///
/// The Borel pgf `G` inverts explicitly, `G^{-1}(w) = w·e^{−λ(w−1)}`, so
/// `C(w) = Q(G^{-1}(w))` gives
/// `c(n) = Σ_{m≤n} q(m)·e^{λm}(−λm)^{n−m}/(n−m)!`. Each coefficient is a
/// finite alternating sum of target values; a triangular solve would feed
/// rounding from earlier coefficients forward, amplified by `e^{λn}`.
pub fn borel_deconvolve(target: &DensePmf, lambda: f64, m_max: usize) -> Result<Vec<f64>> {
    check_open("lambda", lambda, 0.0, 1.0)?;
    let c = (0..=m_max)
        .map(|n| {
            if n == 0 {
                return target.get(0);
            }
            let mut sum = 0.0;
            let mut compensation = 0.0;
            for m in 1..=n {
                let q = target.get(m);
                if q == 0.0 {
                    continue;
                }
                let d = n - m;
                let magnitude = (q.ln() + lambda * m as f64 + d as f64 * (lambda * m as f64).ln()
                    - crate::numerics::ln_factorial(d as u64))
                .exp();
                let term = if d % 2 == 0 { magnitude } else { -magnitude };
                // Neumaier summation: the terms alternate and cancel.
                let t = sum + term;
                if sum.abs() >= term.abs() {
                    compensation += (sum - t) + term;
                } else {
                    compensation += (term - t) + sum;
                }
                sum = t;
            }
            sum + compensation
        })
        .collect();
    Ok(c)
}

pub fn poisson_dense(theta: f64, n_max: usize) -> DensePmf {
    let mut v = vec![(-theta).exp()];
    for n in 1..=n_max {
        let prev = v[n - 1];
        v.push(prev * theta / n as f64);
    }
    DensePmf::new(v)
}

/// Negative binomial `C(n+m−1,n) λⁿ (1−λ)^m`; `m = 1` is geometric and
/// `m = 0` a point mass at 0.
pub fn negbin_dense(lambda: f64, m: u32, n_max: usize) -> DensePmf {
    let mut v = vec![(1.0 - lambda).powi(m as i32)];
    for n in 1..=n_max {
        let prev = v[n - 1];
        v.push(prev * lambda * (n + m as usize - 1) as f64 / n as f64);
    }
    DensePmf::new(v)
}

/// Poisson(θ) convolved with a negative binomial of shape `m`.
pub fn delaporte_dense(theta: f64, lambda: f64, m: u32, n_max: usize) -> DensePmf {
    convolve(&poisson_dense(theta, n_max), &negbin_dense(lambda, m, n_max), n_max)
}

/// Borel law from `(λn)^{n−1}e^{−λn}/n! = e^{−λn}/n · Π_{i<n} λn/i`.
pub fn borel_dense(lambda: f64, n_max: usize) -> DensePmf {
    DensePmf::from_fn(n_max, |n| {
        if n == 0 {
            return 0.0;
        }
        let x = lambda * n as f64;
        let mut v = (-x).exp() / n as f64;
        for i in 1..n {
            v *= x / i as f64;
        }
        v
    })
}

/// `m`-fold convolution power, by repeated convolution.
pub fn convolution_power(base: &DensePmf, m: u32, n_max: usize) -> DensePmf {
    let mut out = DensePmf::point_mass(0, n_max);
    for _ in 0..m {
        out = convolve(&out, base, n_max);
    }
    out
}

/// Law of the random shift `V_k` from the q-recursion, in linear scale.
pub fn shift_law_dense(k: u32, theta: f64, lambda: f64) -> Vec<f64> {
    let q1 = 1.0 - lambda;
    let mut row = vec![1.0];
    for kk in 2..=k as usize {
        let mut next = vec![0.0; kk];
        for (n, slot) in next.iter_mut().enumerate() {
            let stay = row.get(n).map_or(0.0, |q| (theta + lambda * n as f64) * q / q1);
            let shift = if n == 0 {
                0.0
            } else {
                lambda * lambda * (kk + n - 2) as f64 * row[n - 1] / (q1 * q1)
            };
            *slot = stay + shift;
        }
        row = next;
    }
    let total: f64 = row.iter().sum();
    row.iter().map(|q| q / total).collect()
}

/// The representation law: claim count `V_k + Delaporte(θ, λ, k+V_k)`
/// compounded with Borel(λ) summands.
pub fn shifted_representation_dense(k: u32, theta: f64, lambda: f64, n_max: usize) -> Result<DensePmf> {
    if k == 0 {
        return Err(domain("the representation needs k >= 1"));
    }
    let v = shift_law_dense(k, theta, lambda);
    let mut count = vec![0.0; n_max + 1];
    for (shift, pv) in v.iter().enumerate() {
        let d = delaporte_dense(theta, lambda, k + shift as u32, n_max).shifted(shift);
        for (c, x) in count.iter_mut().zip(d.values()) {
            *c += pv * x;
        }
    }
    compound_by_mixing(&DensePmf::new(count), &borel_dense(lambda, n_max), n_max)
}

/// Compositions of `n` into `k` positive parts, visited in colex order.
fn for_each_composition(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k == 0 || k > n {
        return;
    }
    // Parts stored as k−1 cut points 0 < c_1 < ... < c_{k−1} < n.
    let mut cuts: Vec<usize> = (1..k).collect();
    let mut parts = vec![0usize; k];
    loop {
        let mut prev = 0;
        for (i, part) in parts.iter_mut().enumerate() {
            let c = if i + 1 < k { cuts[i] } else { n };
            *part = c - prev;
            prev = c;
        }
        visit(&parts);
        // Advance the lowest cut that can move without colliding.
        let mut i = 0;
        loop {
            if i == cuts.len() {
                return;
            }
            let limit = if i + 1 < cuts.len() { cuts[i + 1] } else { n };
            if cuts[i] + 1 < limit {
                cuts[i] += 1;
                for (r, cut) in cuts.iter_mut().enumerate().take(i) {
                    *cut = r + 1;
                }
                break;
            }
            i += 1;
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub const MULTINOMIAL_BUDGET: usize = 14;

fn check_budget(what: &'static str, n: usize, budget: usize) -> Result<()> {
    if n > budget {
        Err(Error::BudgetExceeded {
            what,
            requested: n as u128,
            budget: budget as u128,
        })
    } else {
        Ok(())
    }
}

/// Both sides of
/// `Σ n!/(n_1!···n_k!·k!) Π (n_ℓ/n)^{n_ℓ−1} = C(n−1, k−1)`, the sum running
/// over compositions of `n` into `k` positive parts.
pub fn multinomial_identity_check(n: usize, k: usize) -> Result<(f64, f64)> {
    if n == 0 || k == 0 || k > n {
        return Err(domain(format!("need 1 <= k <= n, got n={n}, k={k}")));
    }
    check_budget("composition enumeration", n, MULTINOMIAL_BUDGET)?;
    let n_fact = factorial(n);
    let k_fact = factorial(k);
    let mut lhs = 0.0;
    for_each_composition(n, k, |parts| {
        let mut term = n_fact / k_fact;
        for &p in parts {
            term *= (p as f64 / n as f64).powi(p as i32 - 1) / factorial(p);
        }
        lhs += term;
    });
    Ok((lhs, binomial(n - 1, k - 1)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "variant")]
pub enum AbelVariant {
    /// `Σ_{n_1+…+n_m=n} n!/Πn_i! Π(θ/(mλ)+n_i)^{n_i}` against
    /// `Σ_ℓ C(n,ℓ)(θ/λ+n)^{n−ℓ} α^ℓ(m−1)`.
    HurwitzMultinomial { m: usize, n: usize, theta: f64, lambda: f64 },
    /// `Σ_{j=0}^{n+1−k} C(n+1−k,j)(j+1)^{j−1}(n−j)^{n−j−k}` against
    /// `k(n+1)^{n−k}/(k−1)`.
    Binomial { n: usize, k: usize },
}

pub const ABEL_N_BUDGET: usize = 12;
pub const ABEL_M_BUDGET: usize = 4;

/// Both sides of an Abel-type identity.
pub fn abel_sum_check(variant: AbelVariant) -> Result<(f64, f64)> {
    match variant {
        AbelVariant::HurwitzMultinomial { m, n, theta, lambda } => {
            check_budget("Abel-sum enumeration (n)", n, ABEL_N_BUDGET)?;
            check_budget("Abel-sum enumeration (m)", m, ABEL_M_BUDGET)?;
            if m < 2 {
                return Err(domain("the multinomial Abel sum needs m >= 2"));
            }
            check_open("lambda", lambda, 0.0, f64::INFINITY)?;
            let x = theta / (m as f64 * lambda);
            let n_fact = factorial(n);
            let mut lhs = 0.0;
            // Nonnegative compositions of n into m parts are positive
            // compositions of n+m into m parts, less one from each.
            for_each_composition(n + m, m, |parts| {
                let mut term = n_fact;
                for &p in parts {
                    let ni = p - 1;
                    term *= (x + ni as f64).powi(ni as i32) / factorial(ni);
                }
                lhs += term;
            });
            let base = theta / lambda + n as f64;
            let rhs: f64 = (0..=n)
                .map(|ell| {
                    let rising: f64 = (0..ell).map(|i| (m - 1 + i) as f64).product();
                    binomial(n, ell) * base.powi((n - ell) as i32) * rising
                })
                .sum();
            Ok((lhs, rhs))
        }
        AbelVariant::Binomial { n, k } => {
            check_budget("Abel-sum enumeration (n)", n, ABEL_N_BUDGET)?;
            if k < 2 || k > n + 1 {
                return Err(domain(format!("need 2 <= k <= n+1, got n={n}, k={k}")));
            }
            let top = n + 1 - k;
            let lhs: f64 = (0..=top)
                .map(|j| {
                    let a = ((j + 1) as f64).powi(j as i32 - 1);
                    let b = ((n - j) as f64).powi(n as i32 - j as i32 - k as i32);
                    binomial(top, j) * a * b
                })
                .sum();
            let rhs = k as f64 * ((n + 1) as f64).powi(n as i32 - k as i32) / (k - 1) as f64;
            Ok((lhs, rhs))
        }
    }
}

pub const GW_BUDGET: usize = 60;

/// Total-progeny law of a Galton-Watson process with Poisson(λ) offspring,
/// from `P(1) = e^{−λ}` and `P(n+1) = Σ_{k=1}^{n} Pois(k;λ)·P^{∗k}(n)`.
/// The closed form is never consulted.
pub fn enumerate_gw_progeny(lambda: f64, n_max: usize) -> Result<DensePmf> {
    check_budget("progeny enumeration", n_max, GW_BUDGET)?;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(domain(format!("lambda must be > 0, got {lambda}")));
    }
    let pois = poisson_dense(lambda, n_max);
    let mut p = vec![0.0; n_max + 1];
    // power[k][n] = P^{∗k}(n), filled column by column.
    let mut power = vec![vec![0.0; n_max + 1]; n_max + 1];
    power[0][0] = 1.0;
    for n in 1..=n_max {
        p[n] = if n == 1 {
            pois.get(0)
        } else {
            (1..n).map(|k| pois.get(k) * power[k][n - 1]).sum()
        };
        for k in 1..=n {
            power[k][n] = (1..=n + 1 - k).map(|j| p[j] * power[k - 1][n - j]).sum();
        }
    }
    Ok(DensePmf::new(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        if a == b {
            0.0
        } else {
            (a - b).abs() / a.abs().max(b.abs())
        }
    }

    #[test]
    fn convolution_identity_and_borel_pair() {
        let b = borel_dense(0.5, 20);
        let same = convolve(&DensePmf::point_mass(0, 20), &b, 20);
        assert_eq!(same.values(), b.values());
        let bb = convolve(&b, &b, 20);
        assert!(rel(bb.get(2), (-1.0f64).exp()) < 1e-15);
    }

    #[test]
    fn compositions_enumerate_correct_count() {
        for n in 1..=10 {
            for k in 1..=n {
                let mut count = 0;
                for_each_composition(n, k, |parts| {
                    assert_eq!(parts.iter().sum::<usize>(), n);
                    assert!(parts.iter().all(|&p| p >= 1));
                    count += 1;
                });
                assert_eq!(count as f64, binomial(n - 1, k - 1), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn multinomial_examples() {
        assert_eq!(multinomial_identity_check(1, 1).unwrap(), (1.0, 1.0));
        let (l, r) = multinomial_identity_check(4, 2).unwrap();
        assert!(rel(l, 3.0) < 1e-15 && r == 3.0);
        let (l, r) = multinomial_identity_check(7, 7).unwrap();
        assert!(rel(l, 1.0) < 1e-14 && r == 1.0);
        assert!(multinomial_identity_check(15, 3).is_err());
    }

    #[test]
    fn abel_examples() {
        let (l, r) = abel_sum_check(AbelVariant::Binomial { n: 6, k: 3 }).unwrap();
        assert!(rel(l, 514.5) < 1e-14 && rel(r, 514.5) < 1e-15);
        let (l, r) = abel_sum_check(AbelVariant::Binomial { n: 5, k: 6 }).unwrap();
        assert!(rel(l, r) < 1e-15);
        let (l, r) = abel_sum_check(AbelVariant::HurwitzMultinomial {
            m: 2,
            n: 3,
            theta: 1.0,
            lambda: 0.5,
        })
        .unwrap();
        assert!(rel(l, r) < 1e-12);
    }

    #[test]
    fn gw_enumeration_first_terms() {
        let p = enumerate_gw_progeny(0.5, 10).unwrap();
        assert!(rel(p.get(1), (-0.5f64).exp()) < 1e-15);
        assert!(rel(p.get(2), 0.5 * (-1.0f64).exp()) < 1e-15);
        let direct = borel_dense(0.5, 10);
        for n in 1..=10 {
            assert!(rel(p.get(n), direct.get(n)) < 1e-13);
        }
        assert!(enumerate_gw_progeny(0.5, 61).is_err());
    }

    #[test]
    fn deconvolution_inverts_mixing() {
        let count = delaporte_dense(0.7, 0.3, 2, 15);
        let target = compound_by_mixing(&count, &borel_dense(0.3, 15), 15).unwrap();
        let c = borel_deconvolve(&target, 0.3, 12).unwrap();
        for n in 0..=12 {
            assert!(rel(c[n], count.get(n)) < 1e-10, "n={n}: {} {}", c[n], count.get(n));
        }
    }

    #[test]
    fn mixing_examples() {
        let b = borel_dense(0.5, 10);
        let one = compound_by_mixing(&DensePmf::point_mass(1, 10), &b, 10).unwrap();
        assert_eq!(one.values(), b.values());
        assert!(compound_by_mixing(&b, &poisson_dense(1.0, 10), 10).is_err());
    }

    #[test]
    fn shift_law_examples() {
        assert_eq!(shift_law_dense(1, 1.0, 0.5), vec![1.0]);
        let v = shift_law_dense(2, 1.0, 0.5);
        assert!(rel(v[0], 2.0 / 3.0) < 1e-15 && rel(v[1], 1.0 / 3.0) < 1e-15);
    }
}
