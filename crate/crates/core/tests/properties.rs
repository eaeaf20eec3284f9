use borel_claims::borel::{borel_pgf, borel_pmf, BorelParams};
use borel_claims::compounds::{
    bartlett_compound_pmf, gpd_pmf, q_table, v_distribution, GpdParams, ShiftedMixture,
    ShiftedMixtureParams,
};
use borel_claims::claim_number::BartlettParams;
use borel_claims::family::{Family, FamilyKind, FamilySpec};
use borel_claims::numerics::{log_sum_exp, LogWeight};
use borel_claims::oracle::{borel_dense, compound_by_mixing, delaporte_dense, DensePmf};
use borel_claims::panjer::{aggregate_pmf, stop_loss, PanjerFamily, SeverityPmf};
use proptest::prelude::*;

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn family_strategy() -> impl Strategy<Value = (FamilyKind, FamilySpec)> {
    let kinds = prop_oneof![
        Just(FamilyKind::Borel),
        Just(FamilyKind::BorelTanner),
        Just(FamilyKind::Gpd),
        Just(FamilyKind::Bartlett),
        Just(FamilyKind::Delaporte),
        Just(FamilyKind::Shifted),
    ];
    (kinds, 0.05f64..4.0, 0.01f64..0.95, 2u32..5, -2i64..5).prop_map(|(kind, theta, lambda, m, k)| {
        let spec = FamilySpec {
            theta: Some(theta),
            lambda: Some(lambda),
            m: Some(m),
            k: Some(k),
        };
        (kind, spec)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truncated_tables_normalize((kind, spec) in family_strategy()) {
        let f = Family::new(kind, spec).unwrap();
        let t = f.truncated(1e-10).unwrap();
        let stored = t.stored_mass();
        prop_assert!(stored <= 1.0 + 1e-12);
        prop_assert!(stored + t.tail_mass() >= 1.0 - 1e-12);
        prop_assert!(t.tail_mass() <= 1e-10);
    }

    #[test]
    fn closed_form_mean_matches_table((kind, spec) in family_strategy()) {
        let f = Family::new(kind, spec).unwrap();
        let (mean, var) = f.mean_var().unwrap();
        let t = f.truncated(1e-16).unwrap();
        let m1 = t.truncated_moment(1);
        prop_assert!(rel(mean, m1) < 1e-8, "mean {mean} vs {m1}");
        prop_assert!(rel(var, t.truncated_moment(2) - m1 * m1) < 1e-7);
    }

    #[test]
    fn borel_functional_equation(lambda in 0.01f64..1.0, z in 0.0f64..1.0) {
        let g = borel_pgf(&BorelParams::new(lambda).unwrap(), z).unwrap();
        prop_assert!((g - z * (lambda * (g - 1.0)).exp()).abs() < 1e-13);
    }

    #[test]
    fn gpd_with_vanishing_lambda_approaches_poisson(theta in 0.1f64..5.0, n in 0u64..20) {
        let p = GpdParams::new(theta, 1e-15).unwrap();
        let poisson = (n as f64 * theta.ln() - theta - borel_claims::numerics::ln_factorial(n)).exp();
        prop_assert!(rel(gpd_pmf(&p, n).exp(), poisson) < 1e-9);
    }

    #[test]
    fn bartlett_compound_matches_mixing(theta in 0.0f64..3.0, lambda in 0.05f64..0.9) {
        let n = 25;
        let want = compound_by_mixing(&delaporte_dense(theta, lambda, 1, n), &borel_dense(lambda, n), n).unwrap();
        let p = BartlettParams::new(theta, lambda).unwrap();
        for i in 0..=n {
            prop_assert!(rel(bartlett_compound_pmf(&p, i as u64).exp(), want.get(i)) < 1e-9);
        }
    }

    #[test]
    fn shift_law_is_a_distribution(k in 1u32..8, theta in 0.0f64..3.0, lambda in 0.05f64..0.95) {
        let v = v_distribution(k, theta, lambda).unwrap();
        prop_assert_eq!(v.probabilities.len(), k as usize);
        prop_assert!(v.probabilities.iter().all(|&p| p >= 0.0));
        prop_assert!((v.probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let q = q_table(k, theta, lambda).unwrap();
        prop_assert!(q.entries().iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn shifted_recursion_in_theta(k in -2i64..4, theta in 0.1f64..3.0, lambda in 0.05f64..0.9, n in 1u64..60) {
        let s0 = ShiftedMixture::new(ShiftedMixtureParams::new(k, theta, lambda).unwrap()).unwrap();
        let s1 = ShiftedMixture::new(ShiftedMixtureParams::new(k, theta + lambda, lambda).unwrap()).unwrap();
        let lhs = s0.pmf(n).ln();
        let rhs = s1.log_s() - s0.log_s() + (lambda + theta / n as f64).ln() + s1.pmf(n - 1).ln();
        prop_assert!((lhs - rhs).exp_m1().abs() < 1e-11);
    }

    #[test]
    fn aggregate_mass_and_stop_loss(probs in proptest::collection::vec(0.05f64..1.0, 1..5), theta in 0.1f64..2.0, lambda in 0.05f64..0.6) {
        let total: f64 = probs.iter().sum();
        let sev = SeverityPmf::new(probs.iter().map(|p| p / total).collect()).unwrap();
        let q = aggregate_pmf(PanjerFamily::Gpd, &sev, theta, lambda, 150).unwrap();
        let stored = q.stored_mass();
        prop_assert!(stored <= 1.0 + 1e-10);
        prop_assert!(stored + q.tail_mass() >= 1.0 - 1e-10);
        // Stop-loss premiums decrease in the retention and start at the mean.
        let mean = q.truncated_moment(1);
        let mut last = f64::INFINITY;
        for d in 0..10 {
            let sl = stop_loss(&q, d, 1.0).unwrap();
            prop_assert!(sl.value <= last + 1e-15);
            last = sl.value;
        }
        prop_assert!(rel(stop_loss(&q, 0, 1.0).unwrap().value, mean) < 1e-12);
    }

    #[test]
    fn log_sum_exp_of_a_pmf_is_one(lambda in 0.05f64..0.9) {
        let p = BorelParams::new(lambda).unwrap();
        let terms: Vec<LogWeight> = (1..4000).map(|n| borel_pmf(&p, n)).collect();
        let total = log_sum_exp(&terms).exp();
        prop_assert!(total <= 1.0 + 1e-12 && total > 1.0 - 1e-6);
    }

    #[test]
    fn mixing_oracle_preserves_mass(theta in 0.1f64..2.0, lambda in 0.05f64..0.5) {
        let n = 60;
        let z = compound_by_mixing(&delaporte_dense(theta, lambda, 2, n), &borel_dense(lambda, n), n).unwrap();
        prop_assert!(z.sum() <= 1.0 + 1e-12);
        let unit = DensePmf::point_mass(1, n);
        let same = compound_by_mixing(&z, &unit, n).unwrap();
        for i in 0..=n {
            prop_assert!(rel(same.get(i), z.get(i)) < 1e-13);
        }
    }
}
