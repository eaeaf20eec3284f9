//! The invariant suite: closed forms against brute-force oracles, recursion
//! residuals, normalizing-constant agreement, combinatorial identities and
//! (optionally) Monte Carlo checks. Each check reports its worst metric
//! against a threshold, so the report is machine-readable and stable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::borel::{borel_pmf, borel_tanner_pmf, BorelParams, BorelTannerParams};
use crate::claim_number::{bartlett_table, delaporte_table, BartlettParams, DelaporteParams};
use crate::compounds::{
    bartlett_compound_pmf, delaporte_compound_pmf, gpd_pmf, mixture_moment_with, s_constant,
    GpdParams, MomentMethod, SConstants, SMethod, ShiftedMixture, ShiftedMixtureParams,
};
use crate::error::Result;
use crate::numerics::log_add;
use crate::family::{Family, FamilyKind, FamilySpec};
use crate::oracle::{
    abel_sum_check, borel_deconvolve, borel_dense, compound_by_mixing, convolution_power,
    delaporte_dense, enumerate_gw_progeny, multinomial_identity_check, poisson_dense,
    shifted_representation_dense, AbelVariant, DensePmf, ABEL_M_BUDGET, ABEL_N_BUDGET,
};
use crate::panjer::{
    aggregate_pmf, aggregate_pmf_delaporte, DelaporteCoefficients, PanjerFamily, SeverityPmf,
};
use crate::simulate::{
    draw, monte_carlo_check, sample_borel, sample_compound, sample_delaporte, sample_progeny,
    sample_shifted, sample_total_claims, two_sample_chi_square, InverseCdf,
};

pub const THETAS: [f64; 3] = [0.5, 1.0, 2.0];
pub const LAMBDAS: [f64; 3] = [0.2, 0.5, 0.8];

/// Identifier of the optional negative-shift deconvolution check.
pub const COUNTEREXAMPLE_ID: &str = "k=-1-counterexample";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub id: String,
    pub passed: bool,
    /// Worst observed value of the check's metric.
    pub metric: f64,
    pub threshold: f64,
    pub detail: String,
    /// Set when the check reproduces a known negative result; it passes
    /// exactly when the finding is observed.
    pub expected_finding: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyOptions {
    pub monte_carlo: bool,
    pub samples: u64,
    pub seed: u64,
    pub include_counterexample: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            monte_carlo: false,
            samples: 1_000_000,
            seed: 42,
            include_counterexample: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub all_passed: bool,
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

pub fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Tracks the worst value of a metric and where it occurred.
struct Worst {
    value: f64,
    at: String,
}

impl Worst {
    fn new() -> Self {
        Worst {
            value: 0.0,
            at: String::new(),
        }
    }

    fn update(&mut self, value: f64, at: impl FnOnce() -> String) {
        // NaN must register as a failure, so compare with `!(≤)`.
        if !(value <= self.value) {
            self.value = value;
            self.at = at();
        }
    }

    fn outcome(self, id: &str, threshold: f64) -> CheckOutcome {
        let passed = self.value <= threshold;
        let detail = if self.at.is_empty() {
            "exact agreement".to_string()
        } else {
            format!("worst at {}", self.at)
        };
        CheckOutcome {
            id: id.to_string(),
            passed,
            metric: self.value,
            threshold,
            detail,
            expected_finding: false,
        }
    }
}

fn error_outcome(id: &str, threshold: f64, e: impl std::fmt::Display) -> CheckOutcome {
    CheckOutcome {
        id: id.to_string(),
        passed: false,
        metric: f64::NAN,
        threshold,
        detail: format!("error: {e}"),
        expected_finding: false,
    }
}

fn guarded(id: &str, threshold: f64, body: impl FnOnce() -> Result<CheckOutcome>) -> CheckOutcome {
    body().unwrap_or_else(|e| error_outcome(id, threshold, e))
}

fn compare_dense(worst: &mut Worst, label: &str, n_max: usize, got: impl Fn(u64) -> f64, want: &DensePmf) {
    for n in 0..=n_max {
        let e = rel(got(n as u64), want.get(n));
        worst.update(e, || format!("{label} n={n}"));
    }
}

/// Closed-form compound PMFs against mixing the claim-count law with Borel
/// convolution powers, on `n ≤ 30` over the (θ, λ) grid.
pub fn closed_forms_vs_mixing() -> CheckOutcome {
    const ID: &str = "closed-form-vs-mixing";
    const TOL: f64 = 1e-9;
    const N: usize = 30;
    guarded(ID, TOL, || {
        let mut worst = Worst::new();
        for &theta in &THETAS {
            for &lambda in &LAMBDAS {
                let borel = borel_dense(lambda, N);
                let at = format!("theta={theta} lambda={lambda}");

                let want = compound_by_mixing(&poisson_dense(theta, N), &borel, N)?;
                let p = GpdParams::new(theta, lambda)?;
                compare_dense(&mut worst, &format!("gpd {at}"), N, |n| gpd_pmf(&p, n).exp(), &want);

                let want = compound_by_mixing(&delaporte_dense(theta, lambda, 1, N), &borel, N)?;
                let p = BartlettParams::new(theta, lambda)?;
                compare_dense(&mut worst, &format!("bartlett {at}"), N, |n| bartlett_compound_pmf(&p, n).exp(), &want);

                for m in 2..=3 {
                    let want = compound_by_mixing(&delaporte_dense(theta, lambda, m, N), &borel, N)?;
                    let p = DelaporteParams::new(theta, lambda, m)?;
                    let got: Vec<f64> = (0..=N as u64)
                        .map(|n| delaporte_compound_pmf(&p, n).map(|w| w.exp()))
                        .collect::<Result<_>>()?;
                    compare_dense(&mut worst, &format!("delaporte m={m} {at}"), N, |n| got[n as usize], &want);
                }

                for k in 1..=3u32 {
                    let want = shifted_representation_dense(k, theta, lambda, N)?;
                    let s = ShiftedMixture::new(ShiftedMixtureParams::new(k as i64, theta, lambda)?)?;
                    compare_dense(&mut worst, &format!("shifted k={k} {at}"), N, |n| s.pmf(n).exp(), &want);
                }
            }
        }
        Ok(worst.outcome(ID, TOL))
    })
}

/// The θ-shifting recursions of the closed forms, pointwise for `1 ≤ n ≤ 100`.
pub fn recursion_residuals() -> CheckOutcome {
    const ID: &str = "recursion-residuals";
    const TOL: f64 = 1e-12;
    const N: u64 = 100;
    guarded(ID, TOL, || {
        let mut worst = Worst::new();
        // Relative residual of ln lhs against ln rhs.
        let mut check = |label: &str, n: u64, lhs: f64, rhs: f64| {
            let e = (lhs - rhs).exp_m1().abs();
            worst.update(e, || format!("{label} n={n}"));
        };
        for &theta in &THETAS {
            for &lambda in &LAMBDAS {
                let up = theta + lambda;
                let at = format!("theta={theta} lambda={lambda}");
                let g0 = GpdParams::new(theta, lambda)?;
                let g1 = GpdParams::new(up, lambda)?;
                let b0 = BartlettParams::new(theta, lambda)?;
                let b1 = BartlettParams::new(up, lambda)?;
                for n in 1..=N {
                    let step = (lambda + theta / n as f64).ln();
                    let rhs = (theta / up).ln() + step + gpd_pmf(&g1, n - 1).ln();
                    check(&format!("gpd {at}"), n, gpd_pmf(&g0, n).ln(), rhs);
                    let rhs = step + bartlett_compound_pmf(&b1, n - 1).ln();
                    check(&format!("bartlett {at}"), n, bartlett_compound_pmf(&b0, n).ln(), rhs);
                }
                for m in 2..=3u32 {
                    let d0 = DelaporteParams::new(theta, lambda, m)?;
                    let d1 = DelaporteParams::new(up, lambda, m)?;
                    let d1_up = DelaporteParams::new(up, lambda, m + 1)?;
                    for n in 1..=N {
                        let nf = n as f64;
                        let a = (lambda * (m - 1) as f64 / ((1.0 - lambda) * nf)).ln()
                            + delaporte_compound_pmf(&d1_up, n - 1)?.ln();
                        let b = ((theta + lambda * nf) / nf).ln() + delaporte_compound_pmf(&d1, n - 1)?.ln();
                        let rhs = log_add(a, b);
                        check(&format!("delaporte m={m} {at}"), n, delaporte_compound_pmf(&d0, n)?.ln(), rhs);
                    }
                }
                let constants = SConstants::new(theta, lambda)?;
                for k in -2..=3i64 {
                    let s0 = ShiftedMixture::new(ShiftedMixtureParams::new(k, theta, lambda)?)?;
                    let s1 = ShiftedMixture::new(ShiftedMixtureParams::new(k, up, lambda)?)?;
                    let factor = constants.log_s(k, 1)? - constants.log_s(k, 0)?;
                    for n in 1..=N {
                        let rhs = factor + (lambda + theta / n as f64).ln() + s1.pmf(n - 1).ln();
                        check(&format!("shifted k={k} {at}"), n, s0.pmf(n).ln(), rhs);
                    }
                }
            }
        }
        Ok(worst.outcome(ID, TOL))
    })
}

/// Series, recursion and closed-form normalizing constants agree, and the
/// known constants are reproduced.
pub fn s_constant_agreement() -> Vec<CheckOutcome> {
    const TOL: f64 = 1e-9;
    const EXACT_TOL: f64 = 1e-12;
    let methods = guarded("s-constant-methods", TOL, || {
        let mut worst = Worst::new();
        for &theta in &THETAS {
            for &lambda in &LAMBDAS {
                for k in 1..=6i64 {
                    let series = s_constant(k, theta, lambda, SMethod::Series)?;
                    let recursion = s_constant(k, theta, lambda, SMethod::Recursion)?;
                    let closed = s_constant(k, theta, lambda, SMethod::Closed)?;
                    let e = rel(series, recursion).max(rel(series, closed));
                    worst.update(e, || format!("k={k} theta={theta} lambda={lambda}"));
                }
                for k in -2..=-1i64 {
                    let series = s_constant(k, theta, lambda, SMethod::Series)?;
                    let recursion = s_constant(k, theta, lambda, SMethod::Recursion)?;
                    worst.update(rel(series, recursion), || format!("k={k} theta={theta} lambda={lambda}"));
                }
            }
        }
        Ok(worst.outcome("s-constant-methods", TOL))
    });
    let known = guarded("s-constant-known-values", EXACT_TOL, || {
        let mut worst = Worst::new();
        for &theta in &THETAS {
            for &lambda in &LAMBDAS {
                let at = format!("theta={theta} lambda={lambda}");
                for method in [SMethod::Series, SMethod::Closed] {
                    let s0 = s_constant(0, theta, lambda, method)?;
                    worst.update(rel(s0, 1.0 / theta), || format!("S(0) {method:?} {at}"));
                    let s1 = s_constant(1, theta, lambda, method)?;
                    worst.update(rel(s1, 1.0 / (1.0 - lambda)), || format!("S(1) {method:?} {at}"));
                }
                let want = (theta * (1.0 - lambda) + lambda) / (theta * theta * (theta + lambda));
                for method in [SMethod::Series, SMethod::Recursion, SMethod::Closed] {
                    let got = s_constant(-1, theta, lambda, method)?;
                    worst.update(rel(got, want), || format!("S(-1) {method:?} {at}"));
                }
            }
        }
        Ok(worst.outcome("s-constant-known-values", EXACT_TOL))
    });
    vec![methods, known]
}

/// The random-shift representation, compounded through the oracles, equals
/// the shifted-mixture PMF.
pub fn shift_representation() -> CheckOutcome {
    const ID: &str = "shift-representation";
    const TOL: f64 = 1e-9;
    const N: usize = 30;
    guarded(ID, TOL, || {
        let mut worst = Worst::new();
        for &theta in &THETAS {
            for &lambda in &LAMBDAS {
                for k in 1..=3u32 {
                    let want = shifted_representation_dense(k, theta, lambda, N)?;
                    let s = ShiftedMixture::new(ShiftedMixtureParams::new(k as i64, theta, lambda)?)?;
                    let label = format!("k={k} theta={theta} lambda={lambda}");
                    compare_dense(&mut worst, &label, N, |n| s.pmf(n).exp(), &want);
                }
            }
        }
        Ok(worst.outcome(ID, TOL))
    })
}

/// Seeded random severities on `1..=4` with weights bounded away from zero.
pub fn random_severities(seed: u64, count: usize) -> Vec<SeverityPmf> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let k = rng.random_range(1..=4);
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            SeverityPmf::new(raw.iter().map(|w| w / total).collect()).expect("normalized by construction")
        })
        .collect()
}

/// Both aggregate recursions against convolution mixing with random
/// severities, and unit severity against the claim-count PMF.
pub fn panjer_engines() -> Vec<CheckOutcome> {
    const TOL: f64 = 1e-9;
    const UNIT_TOL: f64 = 1e-12;
    const N: usize = 12;
    let oracle = guarded("aggregate-vs-mixing", TOL, || {
        let mut worst = Worst::new();
        for (i, sev) in random_severities(20_240_601, 5).iter().enumerate() {
            let sev_dense = DensePmf::from_fn(N, |n| sev.prob(n));
            for &theta in &THETAS {
                for &lambda in &LAMBDAS {
                    let borel = borel_dense(lambda, N);
                    let at = format!("severity#{i} theta={theta} lambda={lambda}");
                    let mut counts: Vec<(String, DensePmf, PanjerFamily)> = vec![
                        ("gpd".into(), compound_by_mixing(&poisson_dense(theta, N), &borel, N)?, PanjerFamily::Gpd),
                        (
                            "bartlett".into(),
                            compound_by_mixing(&delaporte_dense(theta, lambda, 1, N), &borel, N)?,
                            PanjerFamily::Bartlett,
                        ),
                    ];
                    for k in 1..=3u32 {
                        counts.push((
                            format!("shifted k={k}"),
                            shifted_representation_dense(k, theta, lambda, N)?,
                            PanjerFamily::Shifted(k as i64),
                        ));
                    }
                    for (label, z, family) in counts {
                        let want = compound_by_mixing(&z, &sev_dense, N)?;
                        let q = aggregate_pmf(family, sev, theta, lambda, N)?;
                        compare_dense(&mut worst, &format!("{label} {at}"), N, |n| q.prob(n as usize), &want);
                    }
                    for m in 2..=3u32 {
                        let z = compound_by_mixing(&delaporte_dense(theta, lambda, m, N), &borel, N)?;
                        let want = compound_by_mixing(&z, &sev_dense, N)?;
                        let q = aggregate_pmf_delaporte(sev, theta, lambda, m, N, DelaporteCoefficients::PerLevel)?;
                        compare_dense(&mut worst, &format!("delaporte m={m} {at}"), N, |n| q.prob(n as usize), &want);
                    }
                }
            }
        }
        Ok(worst.outcome("aggregate-vs-mixing", TOL))
    });
    let unit = guarded("aggregate-unit-severity", UNIT_TOL, || {
        let mut worst = Worst::new();
        let sev = SeverityPmf::unit();
        let n_max = 60;
        for &theta in &THETAS {
            for &lambda in &LAMBDAS {
                let at = format!("theta={theta} lambda={lambda}");
                let cases: Vec<(FamilyKind, FamilySpec)> = vec![
                    (FamilyKind::Gpd, spec(theta, lambda, None, None)),
                    (FamilyKind::Bartlett, spec(theta, lambda, None, None)),
                    (FamilyKind::Delaporte, spec(theta, lambda, Some(2), None)),
                    (FamilyKind::Delaporte, spec(theta, lambda, Some(3), None)),
                    (FamilyKind::Shifted, spec(theta, lambda, None, Some(-1))),
                    (FamilyKind::Shifted, spec(theta, lambda, None, Some(2))),
                ];
                for (kind, sp) in cases {
                    let family = Family::new(kind, sp)?;
                    let q = match family.count_law()? {
                        crate::panjer::CountLaw::Family(f) => aggregate_pmf(f, &sev, theta, lambda, n_max)?,
                        crate::panjer::CountLaw::Delaporte(m) => {
                            aggregate_pmf_delaporte(&sev, theta, lambda, m, n_max, DelaporteCoefficients::PerLevel)?
                        }
                    };
                    for n in 0..=n_max {
                        let e = rel(q.prob(n), family.log_pmf(n as u64).exp());
                        worst.update(e, || format!("{} {sp:?} {at} n={n}", kind.name()));
                    }
                }
            }
        }
        Ok(worst.outcome("aggregate-unit-severity", UNIT_TOL))
    });
    vec![oracle, unit]
}

fn spec(theta: f64, lambda: f64, m: Option<u32>, k: Option<i64>) -> FamilySpec {
    FamilySpec {
        theta: Some(theta),
        lambda: Some(lambda),
        m,
        k,
    }
}

/// Moment recursions against each other, and closed-form means and
/// variances against numerically summed truncated moments.
pub fn moments() -> Vec<CheckOutcome> {
    const TOL: f64 = 1e-8;
    const TABLE_TOL: f64 = 1e-10;
    let methods = guarded("moment-methods", TOL, || {
        let mut worst = Worst::new();
        for &theta in &THETAS {
            for &lambda in &LAMBDAS {
                let c = SConstants::new(theta, lambda)?;
                for k in -1..=2i64 {
                    for order in 1..=4 {
                        let a = mixture_moment_with(&c, k, order, MomentMethod::Lemma)?;
                        let b = mixture_moment_with(&c, k, order, MomentMethod::ShiftedPower)?;
                        worst.update(rel(a, b), || format!("k={k} order={order} theta={theta} lambda={lambda}"));
                    }
                }
            }
        }
        Ok(worst.outcome("moment-methods", TOL))
    });
    let table = guarded("closed-form-moments", TABLE_TOL, || {
        let mut worst = Worst::new();
        for &theta in &THETAS {
            for &lambda in &LAMBDAS {
                let cases: Vec<(FamilyKind, FamilySpec)> = vec![
                    (FamilyKind::Borel, spec(theta, lambda, None, None)),
                    (FamilyKind::BorelTanner, spec(theta, lambda, Some(3), None)),
                    (FamilyKind::Gpd, spec(theta, lambda, None, None)),
                    (FamilyKind::Bartlett, spec(theta, lambda, None, None)),
                    (FamilyKind::Delaporte, spec(theta, lambda, Some(2), None)),
                    (FamilyKind::Shifted, spec(theta, lambda, None, Some(-1))),
                    (FamilyKind::Shifted, spec(theta, lambda, None, Some(2))),
                ];
                for (kind, sp) in cases {
                    let family = Family::new(kind, sp)?;
                    let (mean, var) = family.mean_var()?;
                    let t = family.truncated(1e-20)?;
                    let m1 = t.truncated_moment(1);
                    let v = t.truncated_moment(2) - m1 * m1;
                    let at = || format!("{} theta={theta} lambda={lambda}", kind.name());
                    worst.update(rel(mean, m1), || format!("mean {}", at()));
                    worst.update(rel(var, v), || format!("variance {}", at()));
                }
            }
        }
        Ok(worst.outcome("closed-form-moments", TABLE_TOL))
    });
    vec![methods, table]
}

/// Combinatorial identities behind the Borel laws, the enumerated
/// branching-process law, and Borel-Tanner as a convolution power.
pub fn appendix_identities() -> Vec<CheckOutcome> {
    const TOL: f64 = 1e-11;
    let multinomial = guarded("multinomial-identity", TOL, || {
        let mut worst = Worst::new();
        for n in 1..=12 {
            for k in 1..=n {
                let (lhs, rhs) = multinomial_identity_check(n, k)?;
                worst.update(rel(lhs, rhs), || format!("n={n} k={k}"));
            }
        }
        Ok(worst.outcome("multinomial-identity", TOL))
    });
    let abel = guarded("abel-sums", TOL, || {
        let mut worst = Worst::new();
        for n in 0..=ABEL_N_BUDGET {
            for m in 2..=ABEL_M_BUDGET {
                for &(theta, lambda) in &[(0.5, 0.2), (1.0, 0.5), (2.0, 0.8)] {
                    let v = AbelVariant::HurwitzMultinomial { m, n, theta, lambda };
                    let (lhs, rhs) = abel_sum_check(v)?;
                    worst.update(rel(lhs, rhs), || format!("{v:?}"));
                }
            }
            for k in 2..=n + 1 {
                let v = AbelVariant::Binomial { n, k };
                let (lhs, rhs) = abel_sum_check(v)?;
                worst.update(rel(lhs, rhs), || format!("{v:?}"));
            }
        }
        Ok(worst.outcome("abel-sums", TOL))
    });
    let progeny = guarded("branching-progeny", TOL, || {
        let mut worst = Worst::new();
        for &lambda in &[0.2, 0.5, 0.8, 1.0] {
            let enumerated = enumerate_gw_progeny(lambda, 40)?;
            let p = BorelParams::new(lambda)?;
            for n in 1..=40 {
                let e = rel(enumerated.get(n), borel_pmf(&p, n as u64).exp());
                worst.update(e, || format!("lambda={lambda} n={n}"));
            }
        }
        Ok(worst.outcome("branching-progeny", TOL))
    });
    let tanner = guarded("borel-tanner-convolution", TOL, || {
        let mut worst = Worst::new();
        const N: usize = 40;
        for &lambda in &LAMBDAS {
            let borel = borel_dense(lambda, N);
            for m in 1..=5u32 {
                let power = convolution_power(&borel, m, N);
                let p = BorelTannerParams::new(lambda, m)?;
                for n in 0..=N {
                    let e = rel(power.get(n), borel_tanner_pmf(&p, n as u64).exp());
                    worst.update(e, || format!("lambda={lambda} m={m} n={n}"));
                }
            }
        }
        Ok(worst.outcome("borel-tanner-convolution", TOL))
    });
    vec![multinomial, abel, progeny, tanner]
}

/// Mass points used when peeling Borel summands off a compound law. The
/// alternating inversion sum cancels by roughly `e^{λn}` against tiny
/// coefficients, so relative accuracy of 1e-9 is out of reach beyond this.
pub const DECONVOLUTION_POINTS: usize = 7;

pub const DECONVOLUTION_GRID: [(f64, f64); 5] = [(0.4, 0.5), (0.5, 0.2), (1.0, 0.5), (2.0, 0.2), (1.0, 0.8)];

/// Peeling Borel summands off the `k = 0` and `k = 1` mixtures recovers the
/// Poisson and Bartlett claim-count laws.
pub fn deconvolution_recovery() -> CheckOutcome {
    const ID: &str = "deconvolution-recovery";
    const TOL: f64 = 1e-9;
    const M: usize = DECONVOLUTION_POINTS;
    guarded(ID, TOL, || {
        let mut worst = Worst::new();
        for &(theta, lambda) in &DECONVOLUTION_GRID {
            {
                let want_poisson = poisson_dense(theta, M);
                let bart = BartlettParams::new(theta, lambda)?;
                let want_bartlett = bartlett_table(&bart, M as u64)?;
                for (k, want) in [(0i64, want_poisson.values().to_vec()), (1, want_bartlett.probs())] {
                    let s = ShiftedMixture::new(ShiftedMixtureParams::new(k, theta, lambda)?)?;
                    let target = DensePmf::from_fn(M, |n| s.pmf(n as u64).exp());
                    let c = borel_deconvolve(&target, lambda, M)?;
                    for n in 0..=M {
                        worst.update(rel(c[n], want[n]), || format!("k={k} theta={theta} lambda={lambda} n={n}"));
                    }
                }
            }
        }
        Ok(worst.outcome(ID, TOL))
    })
}

/// Peeling Borel summands off the `k = −1` mixture at θ = 0.4, λ = 0.5
/// yields a negative claim-count "probability": that mixture is not a
/// compound law with Borel summands.
pub fn negative_shift_counterexample() -> CheckOutcome {
    const THETA: f64 = 0.4;
    const LAMBDA: f64 = 0.5;
    guarded(COUNTEREXAMPLE_ID, 0.0, || {
        let s = ShiftedMixture::new(ShiftedMixtureParams::new(-1, THETA, LAMBDA)?)?;
        let target = DensePmf::from_fn(DECONVOLUTION_POINTS, |n| s.pmf(n as u64).exp());
        let c = borel_deconvolve(&target, LAMBDA, DECONVOLUTION_POINTS)?;
        let negative: Vec<String> = c
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < 0.0)
            .map(|(n, v)| format!("c({n})={v:.6e}"))
            .collect();
        Ok(CheckOutcome {
            id: COUNTEREXAMPLE_ID.to_string(),
            passed: c[2] < 0.0,
            metric: c[2],
            threshold: 0.0,
            detail: format!("negative coefficients: {}", negative.join(", ")),
            expected_finding: true,
        })
    })
}

/// Every PMF at λ = 0.9 stays finite out to n = 2000, and stored mass plus
/// certified tail brackets one.
pub fn numerical_range() -> CheckOutcome {
    const ID: &str = "numerical-range";
    const TOL: f64 = 1e-8;
    const N: u64 = 2000;
    const LAMBDA: f64 = 0.9;
    guarded(ID, TOL, || {
        let mut worst = Worst::new();
        let cases: Vec<(FamilyKind, FamilySpec)> = vec![
            (FamilyKind::Borel, spec(1.0, LAMBDA, None, None)),
            (FamilyKind::BorelTanner, spec(1.0, LAMBDA, Some(3), None)),
            (FamilyKind::Gpd, spec(1.0, LAMBDA, None, None)),
            (FamilyKind::Bartlett, spec(1.0, LAMBDA, None, None)),
            (FamilyKind::Delaporte, spec(1.0, LAMBDA, Some(2), None)),
            (FamilyKind::Shifted, spec(1.0, LAMBDA, None, Some(-2))),
            (FamilyKind::Shifted, spec(1.0, LAMBDA, None, Some(3))),
        ];
        for (kind, sp) in cases {
            let family = Family::new(kind, sp)?;
            let t = family.table(N)?;
            let label = format!("{} {sp:?}", kind.name());
            if let Some(n) = t.log_weights().iter().position(|w| w.is_nan() || *w == f64::INFINITY) {
                worst.update(f64::INFINITY, || format!("{label}: non-finite log-probability at n={n}"));
            }
            if t.prob(N as usize) == 0.0 {
                worst.update(f64::INFINITY, || format!("{label}: probability underflow at n={N}"));
            }
            let stored = t.stored_mass();
            let gap = (stored + t.tail_mass() - 1.0).max(1.0 - stored - t.tail_mass()).max(stored - 1.0).max(0.0);
            worst.update(gap, || format!("{label} (stored {stored:.3e} tail {:.3e})", t.tail_mass()));
        }
        let claim_cases = [
            bartlett_table(&BartlettParams::new(1.0, LAMBDA)?, N)?,
            delaporte_table(&DelaporteParams::new(1.0, LAMBDA, 3)?, N)?,
        ];
        for (i, t) in claim_cases.iter().enumerate() {
            let stored = t.stored_mass();
            let gap = (stored + t.tail_mass() - 1.0).abs();
            worst.update(gap, || format!("claim-number law #{i}"));
        }
        Ok(worst.outcome(ID, TOL))
    })
}

/// Monte Carlo checks: each sampler against its closed form with the
/// threshold `5·sqrt(S/n)` (S the support of the target table), the two
/// shifted-mixture routes against each other, and seed determinism.
pub fn monte_carlo(samples: u64, seed: u64) -> Vec<CheckOutcome> {
    const TABLE_EPS: f64 = 1e-10;
    let mut out = Vec::new();
    let tv_check = |id: &str, family: Result<Family>, sampler: &(dyn Fn(&mut ChaCha8Rng) -> Result<u64> + Sync)| {
        let threshold_for = |len: usize| 5.0 * (len as f64 / samples as f64).sqrt();
        let body = || -> Result<CheckOutcome> {
            let target = family?.truncated(TABLE_EPS)?;
            let threshold = threshold_for(target.len());
            let stats = monte_carlo_check(&target, sampler, samples, seed)?;
            Ok(CheckOutcome {
                id: id.to_string(),
                passed: stats.tv_distance < threshold && stats.failures == 0,
                metric: stats.tv_distance,
                threshold,
                detail: format!("support {} failures {}", target.len(), stats.failures),
                expected_finding: false,
            })
        };
        guarded(id, f64::NAN, body)
    };
    let fam = |kind, sp| Family::new(kind, sp);
    let s = |theta, lambda, m, k| spec(theta, lambda, m, k);

    out.push(tv_check("mc-borel", fam(FamilyKind::Borel, s(1.0, 0.5, None, None)), &|rng| sample_borel(0.5, rng)));
    out.push(tv_check(
        "mc-borel-tanner",
        fam(FamilyKind::BorelTanner, s(1.0, 0.5, Some(2), None)),
        &|rng| Ok(sample_borel(0.5, rng)? + sample_borel(0.5, rng)?),
    ));
    let cases: Vec<(&str, FamilyKind, FamilySpec)> = vec![
        ("mc-gpd", FamilyKind::Gpd, s(1.0, 0.5, None, None)),
        ("mc-bartlett", FamilyKind::Bartlett, s(1.0, 0.5, None, None)),
        ("mc-bartlett-theta0", FamilyKind::Bartlett, s(0.0, 0.5, None, None)),
        ("mc-delaporte", FamilyKind::Delaporte, s(1.0, 0.5, Some(2), None)),
        ("mc-shifted-k2", FamilyKind::Shifted, s(1.0, 0.5, None, Some(2))),
    ];
    for (id, kind, sp) in cases {
        let family = fam(kind, sp);
        let sampler_family = family.clone();
        out.push(match sampler_family {
            Ok(f) => tv_check(id, family, &move |rng| sample_compound(&f, rng)),
            Err(e) => error_outcome(id, f64::NAN, e),
        });
    }

    // Claim-number layers.
    out.push(guarded("mc-claim-delaporte", f64::NAN, || {
        let p = DelaporteParams::new(1.5, 0.4, 3)?;
        let target = crate::claim_number::delaporte_truncated(&p, TABLE_EPS)?;
        let threshold = 5.0 * (target.len() as f64 / samples as f64).sqrt();
        let stats = monte_carlo_check(&target, |rng| Ok(sample_delaporte(&p, rng)), samples, seed)?;
        Ok(CheckOutcome {
            id: "mc-claim-delaporte".into(),
            passed: stats.tv_distance < threshold,
            metric: stats.tv_distance,
            threshold,
            detail: format!("support {}", target.len()),
            expected_finding: false,
        })
    }));

    // Aggregate law: count draw, then severity draws.
    out.push(guarded("mc-aggregate", f64::NAN, || {
        let sev = SeverityPmf::new(vec![0.5, 0.5])?;
        let q = aggregate_pmf(PanjerFamily::Gpd, &sev, 1.0, 0.5, 120)?;
        let threshold = 5.0 * (q.len() as f64 / samples as f64).sqrt();
        let gpd = Family::new(FamilyKind::Gpd, s(1.0, 0.5, None, None))?;
        let stats = monte_carlo_check(
            &q,
            |rng| {
                let z = sample_compound(&gpd, rng)?;
                Ok(sample_total_claims(z, &sev, rng))
            },
            samples,
            seed,
        )?;
        Ok(CheckOutcome {
            id: "mc-aggregate".into(),
            passed: stats.tv_distance < threshold,
            metric: stats.tv_distance,
            threshold,
            detail: format!("support {}", q.len()),
            expected_finding: false,
        })
    }));

    out.push(guarded("mc-shifted-routes", 1e-3, || {
        let s = ShiftedMixture::new(ShiftedMixtureParams::new(2, 1.0, 0.5)?)?;
        let inverse = InverseCdf::new(&s.truncated(1e-14)?);
        let a = draw(|rng| sample_shifted(&s, rng), samples, seed);
        let b = draw(|rng| inverse.sample(rng), samples, seed.wrapping_add(1));
        let test = two_sample_chi_square(&a.counts, &b.counts, 20)?;
        Ok(CheckOutcome {
            id: "mc-shifted-routes".into(),
            passed: test.p_value > 1e-3,
            metric: test.p_value,
            threshold: 1e-3,
            detail: format!("chi-square {:.4} on {} dof", test.statistic, test.degrees_of_freedom),
            expected_finding: false,
        })
    }));

    out.push(guarded("mc-determinism", 0.0, || {
        let f = Family::new(FamilyKind::Delaporte, s(1.0, 0.5, Some(2), None))?;
        let n = samples.min(200_000);
        let a = draw(|rng| sample_compound(&f, rng), n, seed);
        let b = draw(|rng| sample_compound(&f, rng), n, seed);
        let c = draw(|rng| sample_progeny(0.5, 1, rng), n, seed);
        let d = draw(|rng| sample_progeny(0.5, 1, rng), n, seed);
        let same = a == b && c == d;
        Ok(CheckOutcome {
            id: "mc-determinism".into(),
            passed: same,
            metric: if same { 0.0 } else { 1.0 },
            threshold: 0.0,
            detail: format!("{n} draws repeated under seed {seed}"),
            expected_finding: false,
        })
    }));
    out
}

/// Run the suite.
pub fn run(options: &VerifyOptions) -> VerifyReport {
    let mut checks = vec![closed_forms_vs_mixing(), recursion_residuals()];
    checks.extend(s_constant_agreement());
    checks.push(shift_representation());
    checks.extend(panjer_engines());
    checks.extend(moments());
    checks.extend(appendix_identities());
    checks.push(deconvolution_recovery());
    if options.include_counterexample {
        checks.push(negative_shift_counterexample());
    }
    checks.push(numerical_range());
    if options.monte_carlo {
        checks.extend(monte_carlo(options.samples, options.seed));
    }
    VerifyReport {
        all_passed: checks.iter().all(|c| c.passed),
        checks,
    }
}
