//! Exact samplers and a reproducible Monte Carlo harness.
//!
//! Borel draws run the branching process itself, tracking only generation
//! sizes: the offspring of a generation of size `g` is Poisson(λg).
//! Parallel batches each get their own ChaCha8 stream (`set_stream(batch)`)
//! under one 64-bit seed, so results do not depend on the thread count.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::claim_number::{BartlettParams, DelaporteParams};
use crate::compounds::{v_distribution, ShiftedMixture};
use crate::error::{domain, Error, Result};
use crate::family::Family;
use crate::panjer::SeverityPmf;
use crate::pmf::LogPmf;

/// Cap on accumulated individuals in one branching draw.
pub const GENERATION_CAP: u64 = 10_000_000;

/// Poisson draw: inversion below mean 10, `rand_distr` above.
pub fn sample_poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    if mean < 10.0 {
        let u: f64 = rng.random();
        let mut p = (-mean).exp();
        let mut cdf = p;
        let mut n = 0u64;
        while u > cdf {
            n += 1;
            p *= mean / n as f64;
            cdf += p;
            if p == 0.0 {
                break;
            }
        }
        n
    } else {
        Poisson::new(mean).expect("positive finite mean").sample(rng) as u64
    }
}

/// `P{G ≥ n} = λⁿ`, by inversion.
pub fn sample_geometric<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    // 1 − U lies in (0, 1], keeping the logarithm finite.
    let u: f64 = 1.0 - rng.random::<f64>();
    (u.ln() / lambda.ln()).floor() as u64
}

/// Sum of `m` independent geometric draws.
pub fn sample_negbin<R: Rng + ?Sized>(lambda: f64, m: u32, rng: &mut R) -> u64 {
    (0..m).map(|_| sample_geometric(lambda, rng)).sum()
}

/// Total progeny of a Poisson(λ) Galton-Watson process started from
/// `initial` individuals (a Borel-Tanner draw; Borel for `initial = 1`).
pub fn sample_progeny<R: Rng + ?Sized>(lambda: f64, initial: u64, rng: &mut R) -> Result<u64> {
    let mut generation = initial;
    let mut total = initial;
    while generation > 0 {
        generation = sample_poisson(lambda * generation as f64, rng);
        total += generation;
        if total > GENERATION_CAP {
            return Err(Error::GenerationCap { cap: GENERATION_CAP });
        }
    }
    Ok(total)
}

pub fn sample_borel<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(domain(format!("lambda must lie in (0, 1], got {lambda}")));
    }
    sample_progeny(lambda, 1, rng)
}

pub fn sample_bartlett<R: Rng + ?Sized>(p: &BartlettParams, rng: &mut R) -> u64 {
    sample_poisson(p.theta(), rng) + sample_geometric(p.lambda(), rng)
}

pub fn sample_delaporte<R: Rng + ?Sized>(p: &DelaporteParams, rng: &mut R) -> u64 {
    sample_poisson(p.theta(), rng) + sample_negbin(p.lambda(), p.m(), rng)
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Shifted-mixture draw through its representation: `V_k` from the
/// q-table, then `V_k + Poisson(θ) + NegBin(λ, k+V_k)` claims, each with
/// Borel(λ) size. Only `k ≥ 0` has such a representation.
pub fn sample_shifted<R: Rng + ?Sized>(s: &ShiftedMixture, rng: &mut R) -> Result<u64> {
    let p = s.params();
    let (theta, lambda) = (p.theta(), p.lambda());
    let claims = match p.k() {
        0 => sample_poisson(theta, rng),
        k if k > 0 => {
            let v = v_distribution(k as u32, theta, lambda)?;
            let shift = sample_index(&v.probabilities, rng) as u64;
            shift + sample_poisson(theta, rng) + sample_negbin(lambda, k as u32 + shift as u32, rng)
        }
        k => {
            return Err(domain(format!(
                "k = {k} < 0 has no compound representation; use the inverse-CDF route"
            )))
        }
    };
    sample_progeny(lambda, claims, rng)
}

/// One draw from any compound family by its branching construction.
pub fn sample_compound<R: Rng + ?Sized>(family: &Family, rng: &mut R) -> Result<u64> {
    match family {
        Family::Borel(p) => sample_borel(p.lambda(), rng),
        Family::BorelTanner(p) => sample_progeny(p.lambda(), p.m() as u64, rng),
        Family::Gpd(p) => sample_progeny(p.lambda(), sample_poisson(p.theta(), rng), rng),
        Family::Bartlett(p) => sample_progeny(p.lambda(), sample_bartlett(p, rng), rng),
        Family::Delaporte(p) => sample_progeny(p.lambda(), sample_delaporte(p, rng), rng),
        Family::Shifted(s) => sample_shifted(s, rng),
    }
}

/// Sum of `claims` severity draws.
pub fn sample_total_claims<R: Rng + ?Sized>(claims: u64, severity: &SeverityPmf, rng: &mut R) -> u64 {
    (0..claims).map(|_| sample_index(severity.probs(), rng) as u64 + 1).sum()
}

/// Inverse-CDF sampler over a certified table. A uniform falling into the
/// uncertified tail is reported as an error rather than clamped.
#[derive(Debug, Clone)]
pub struct InverseCdf {
    cumulative: Vec<f64>,
}

impl InverseCdf {
    pub fn new(table: &LogPmf) -> Self {
        InverseCdf {
            cumulative: table.cumulative(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        let u: f64 = rng.random();
        let idx = self.cumulative.partition_point(|&c| c <= u);
        if idx == self.cumulative.len() {
            return Err(domain("uniform draw fell beyond the tabulated support"));
        }
        Ok(idx as u64)
    }
}

/// Outcome counts; merging is associative and commutative.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Tally {
    pub counts: Vec<u64>,
    pub failures: u64,
}

impl Tally {
    pub fn record(&mut self, outcome: Result<u64>) {
        match outcome {
            Ok(n) => {
                let n = n as usize;
                if n >= self.counts.len() {
                    self.counts.resize(n + 1, 0);
                }
                self.counts[n] += 1;
            }
            Err(_) => self.failures += 1,
        }
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        if other.counts.len() > self.counts.len() {
            self.counts.resize(other.counts.len(), 0);
        }
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            *a += b;
        }
        self.failures += other.failures;
        self
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.failures
    }
}

pub const BATCH_SIZE: u64 = 1 << 16;

/// Generator handed to samplers by [`draw`]; pinned so that a seed means
/// the same stream in every build.
pub type StreamRng = ChaCha8Rng;

/// Generator for batch `batch` under `seed`.
pub fn batch_rng(seed: u64, batch: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

/// Draw `n_samples` values in parallel batches.
pub fn draw<F>(sampler: F, n_samples: u64, seed: u64) -> Tally
where
    F: Fn(&mut StreamRng) -> Result<u64> + Sync,
{
    let batches = n_samples.div_ceil(BATCH_SIZE);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = batch_rng(seed, b);
            let size = BATCH_SIZE.min(n_samples - b * BATCH_SIZE);
            let mut tally = Tally::default();
            for _ in 0..size {
                tally.record(sampler(&mut rng));
            }
            tally
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Tally::default(), Tally::merge)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleStats {
    pub seed: u64,
    pub n_samples: u64,
    pub frequencies: Vec<u64>,
    /// Draws that raised an error (for example the generation cap).
    pub failures: u64,
    pub target: LogPmf,
    /// `½ Σ |empirical − target|` over the joint support, plus half the
    /// target's tail bound.
    pub tv_distance: f64,
    pub max_abs_dev: f64,
    /// `(count − np)/√(np(1−p))` per outcome of the target table.
    pub z_scores: Vec<f64>,
}

impl SampleStats {
    pub fn from_tally(target: &LogPmf, tally: Tally, seed: u64) -> Self {
        let n = tally.total();
        let nf = n as f64;
        let support = target.len().max(tally.counts.len());
        let mut tv = 0.0;
        let mut max_dev = 0.0f64;
        for i in 0..support {
            let emp = tally.counts.get(i).copied().unwrap_or(0) as f64 / nf;
            let dev = (emp - target.prob(i)).abs();
            tv += dev;
            max_dev = max_dev.max(dev);
        }
        let failure_share = tally.failures as f64 / nf;
        tv = 0.5 * (tv + failure_share + target.tail_mass());
        let z_scores = (0..target.len())
            .map(|i| {
                let p = target.prob(i);
                let c = tally.counts.get(i).copied().unwrap_or(0) as f64;
                let sd = (nf * p * (1.0 - p)).sqrt();
                if sd > 0.0 {
                    (c - nf * p) / sd
                } else {
                    0.0
                }
            })
            .collect();
        SampleStats {
            seed,
            n_samples: n,
            frequencies: tally.counts,
            failures: tally.failures,
            target: target.clone(),
            tv_distance: tv,
            max_abs_dev: max_dev,
            z_scores,
        }
    }
}

/// Sample and compare against `target`.
pub fn monte_carlo_check<F>(target: &LogPmf, sampler: F, n_samples: u64, seed: u64) -> Result<SampleStats>
where
    F: Fn(&mut StreamRng) -> Result<u64> + Sync,
{
    if n_samples < 10_000 {
        return Err(domain(format!("need at least 10000 samples, got {n_samples}")));
    }
    let tally = draw(sampler, n_samples, seed);
    Ok(SampleStats::from_tally(target, tally, seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Two-sample chi-square homogeneity test. Bins with fewer than
/// `min_count` combined draws are pooled with their right neighbours.
pub fn two_sample_chi_square(a: &[u64], b: &[u64], min_count: u64) -> Result<ChiSquareTest> {
    let na: u64 = a.iter().sum();
    let nb: u64 = b.iter().sum();
    if na == 0 || nb == 0 {
        return Err(domain("both samples must be nonempty"));
    }
    let len = a.len().max(b.len());
    let get = |v: &[u64], i: usize| v.get(i).copied().unwrap_or(0);
    let mut bins: Vec<(u64, u64)> = Vec::new();
    let mut pending = (0u64, 0u64);
    for i in 0..len {
        pending.0 += get(a, i);
        pending.1 += get(b, i);
        if pending.0 + pending.1 >= min_count {
            bins.push(pending);
            pending = (0, 0);
        }
    }
    if pending.0 + pending.1 > 0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += pending.0;
                last.1 += pending.1;
            }
            None => bins.push(pending),
        }
    }
    let (fa, fb) = (na as f64, nb as f64);
    let (ka, kb) = ((fb / fa).sqrt(), (fa / fb).sqrt());
    let statistic: f64 = bins
        .iter()
        .map(|&(x, y)| {
            let d = ka * x as f64 - kb * y as f64;
            d * d / (x + y) as f64
        })
        .sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic)
    };
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom: dof,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::borel::{borel_truncated, BorelParams};

    #[test]
    fn poisson_inversion_mean() {
        let mut rng = batch_rng(1, 0);
        let n = 200_000;
        let total: u64 = (0..n).map(|_| sample_poisson(2.5, &mut rng)).sum();
        assert!((total as f64 / n as f64 - 2.5).abs() < 0.02);
        let total: u64 = (0..n).map(|_| sample_poisson(25.0, &mut rng)).sum();
        assert!((total as f64 / n as f64 - 25.0).abs() < 0.1);
    }

    #[test]
    fn borel_degenerate_limit() {
        let mut rng = batch_rng(2, 0);
        let ones = (0..100_000).filter(|_| sample_borel(1e-6, &mut rng).unwrap() == 1).count();
        assert!(ones >= 99_990);
        assert!(sample_borel(1.5, &mut rng).is_err());
    }

    #[test]
    fn draws_are_reproducible_and_thread_independent() {
        let s = |rng: &mut ChaCha8Rng| sample_borel(0.5, rng);
        let a = draw(s, 200_000, 9);
        let b = draw(s, 200_000, 9);
        assert_eq!(a, b);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| draw(s, 200_000, 9));
        assert_eq!(a, c);
        assert_ne!(a, draw(s, 200_000, 10));
    }

    #[test]
    fn tally_merge_is_commutative() {
        let mut x = Tally::default();
        x.record(Ok(3));
        x.record(Err(Error::GenerationCap { cap: 1 }));
        let mut y = Tally::default();
        y.record(Ok(0));
        y.record(Ok(5));
        assert_eq!(x.clone().merge(y.clone()), y.merge(x));
    }

    #[test]
    fn inverse_cdf_self_test() {
        let t = borel_truncated(&BorelParams::new(0.5).unwrap(), 1e-12).unwrap();
        let inv = InverseCdf::new(&t);
        let stats = monte_carlo_check(&t, |rng| inv.sample(rng), 100_000, 3).unwrap();
        assert!(stats.tv_distance < 3.0 * (t.len() as f64 / 1e5).sqrt());
        assert_eq!(stats.frequencies.iter().sum::<u64>() + stats.failures, 100_000);
    }

    #[test]
    fn chi_square_detects_difference() {
        let a = [5000u64, 3000, 2000];
        let same = two_sample_chi_square(&a, &a, 5).unwrap();
        assert!(same.p_value > 0.99);
        let b = [4000u64, 3000, 3000];
        assert!(two_sample_chi_square(&a, &b, 5).unwrap().p_value < 1e-6);
    }
}
