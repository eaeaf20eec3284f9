use borel_claims::claim_number::BartlettParams;
use borel_claims::compounds::{ShiftedMixture, ShiftedMixtureParams};
use borel_claims::family::{Family, FamilyKind, FamilySpec};
use borel_claims::oracle::{borel_dense, compound_by_mixing, negbin_dense};
use borel_claims::panjer::{aggregate_pmf, PanjerFamily, SeverityPmf};
use borel_claims::simulate::{
    draw, monte_carlo_check, sample_borel, sample_compound, sample_shifted, sample_total_claims,
    two_sample_chi_square, InverseCdf, SampleStats,
};
use borel_claims::LogPmf;

const SAMPLES: u64 = 1_000_000;

fn family(kind: FamilyKind, theta: f64, lambda: f64, m: Option<u32>, k: Option<i64>) -> Family {
    let spec = FamilySpec {
        theta: Some(theta),
        lambda: Some(lambda),
        m,
        k,
    };
    Family::new(kind, spec).unwrap()
}

#[test]
fn borel_frequency_and_mean() {
    let tally = draw(|rng| sample_borel(0.5, rng), SAMPLES, 1);
    let n = tally.total() as f64;
    assert!((tally.counts[1] as f64 / n - (-0.5f64).exp()).abs() < 0.002);
    let mean: f64 = tally.counts.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum::<f64>() / n;
    assert!((mean - 2.0).abs() < 0.01, "mean {mean}");
}

#[test]
fn gpd_zero_frequency() {
    let f = family(FamilyKind::Gpd, 1.0, 0.5, None, None);
    let tally = draw(|rng| sample_compound(&f, rng), SAMPLES, 2);
    assert!((tally.counts[0] as f64 / SAMPLES as f64 - (-1.0f64).exp()).abs() < 0.002);
}

/// Restrict a table to `0..=n_max`, moving the rest into the tail.
fn restrict(t: &LogPmf, n_max: usize) -> LogPmf {
    let w = t.log_weights()[..=n_max].to_vec();
    let dropped: f64 = t.probs()[n_max + 1..].iter().sum();
    LogPmf::new(w, dropped + t.tail_mass(), f64::INFINITY).unwrap()
}

#[test]
fn shifted_representation_sampler() {
    let f = family(FamilyKind::Shifted, 1.0, 0.5, None, Some(2));
    let target = restrict(&f.table(200).unwrap(), 40);
    let stats = monte_carlo_check(&target, |rng| sample_compound(&f, rng), SAMPLES, 3).unwrap();
    assert!(stats.tv_distance < 0.005, "tv {}", stats.tv_distance);
}

#[test]
fn bartlett_zero_theta_against_geometric_mixing() {
    let n = 80;
    let oracle = compound_by_mixing(&negbin_dense(0.5, 1, n), &borel_dense(0.5, n), n).unwrap();
    let dropped = 1.0 - oracle.sum();
    let target = LogPmf::new(oracle.values().iter().map(|p| p.ln()).collect(), dropped, f64::INFINITY).unwrap();
    let p = BartlettParams::new(0.0, 0.5).unwrap();
    let f = Family::Bartlett(p);
    let stats = monte_carlo_check(&target, |rng| sample_compound(&f, rng), SAMPLES, 4).unwrap();
    assert!(stats.tv_distance < 0.005, "tv {}", stats.tv_distance);
}

#[test]
fn borel_tanner_as_two_borel_draws() {
    let f = family(FamilyKind::BorelTanner, 0.0, 0.5, Some(2), None);
    let target = f.truncated(1e-12).unwrap();
    let stats = monte_carlo_check(&target, |rng| Ok(sample_borel(0.5, rng)? + sample_borel(0.5, rng)?), SAMPLES, 5)
        .unwrap();
    assert!(stats.tv_distance < 0.005, "tv {}", stats.tv_distance);
}

#[test]
fn aggregate_end_to_end() {
    let sev = SeverityPmf::new(vec![0.3, 0.5, 0.2]).unwrap();
    let q = aggregate_pmf(PanjerFamily::Bartlett, &sev, 1.0, 0.5, 200).unwrap();
    let f = family(FamilyKind::Bartlett, 1.0, 0.5, None, None);
    let stats = monte_carlo_check(
        &q,
        |rng| {
            let z = sample_compound(&f, rng)?;
            Ok(sample_total_claims(z, &sev, rng))
        },
        SAMPLES,
        6,
    )
    .unwrap();
    assert!(stats.tv_distance < 0.01, "tv {}", stats.tv_distance);
}

#[test]
fn shifted_routes_are_indistinguishable() {
    let s = ShiftedMixture::new(ShiftedMixtureParams::new(3, 0.5, 0.4).unwrap()).unwrap();
    let inverse = InverseCdf::new(&s.truncated(1e-14).unwrap());
    let a = draw(|rng| sample_shifted(&s, rng), SAMPLES, 7);
    let b = draw(|rng| inverse.sample(rng), SAMPLES, 8);
    let test = two_sample_chi_square(&a.counts, &b.counts, 20).unwrap();
    assert!(test.p_value > 1e-3, "{test:?}");
}

#[test]
fn negative_shift_has_no_representation_sampler() {
    let s = ShiftedMixture::new(ShiftedMixtureParams::new(-1, 1.0, 0.5).unwrap()).unwrap();
    let mut rng = borel_claims::simulate::batch_rng(0, 0);
    assert!(sample_shifted(&s, &mut rng).is_err());
}

#[test]
fn stats_are_reproducible_and_serializable() {
    let f = family(FamilyKind::Gpd, 2.0, 0.3, None, None);
    let target = f.truncated(1e-10).unwrap();
    let run = |seed| monte_carlo_check(&target, |rng| sample_compound(&f, rng), 50_000, seed).unwrap();
    let (a, b): (SampleStats, SampleStats) = (run(11), run(11));
    assert_eq!(a, b);
    assert_ne!(a.frequencies, run(12).frequencies);
    assert_eq!(a.frequencies.iter().sum::<u64>() + a.failures, a.n_samples);
    let json = serde_json::to_value(&a).unwrap();
    assert_eq!(json["seed"], 11);
    assert_eq!(json["n_samples"], 50_000);
    assert!(monte_carlo_check(&target, |rng| sample_compound(&f, rng), 9_999, 1).is_err());
}

#[test]
fn generation_cap_is_reported_not_truncated() {
    // At λ = 1 a start of five million individuals almost surely passes the
    // ten-million cap.
    let tally = draw(|rng| borel_claims::simulate::sample_progeny(1.0, 5_000_000, rng), 20, 9);
    assert!(tally.failures > 0);
    assert_eq!(tally.total(), 20);
}
