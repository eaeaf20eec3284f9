//! One handle over every compound law with Borel summands, so callers can
//! pick a law at run time.

use serde::{Deserialize, Serialize};

use crate::borel::{
    borel_mean_var, borel_pmf, borel_table, borel_tanner_mean_var, borel_tanner_pmf,
    borel_tanner_table, borel_tanner_truncated, borel_truncated, BorelParams, BorelTannerParams,
};
use crate::claim_number::{BartlettParams, DelaporteParams};
use crate::compounds::{
    bartlett_compound_mean_var, bartlett_compound_pmf, bartlett_compound_table,
    bartlett_compound_truncated, delaporte_compound_mean_var, delaporte_compound_pmf,
    delaporte_compound_table, delaporte_compound_truncated, gpd_mean_var, gpd_pmf, gpd_table,
    gpd_truncated, GpdParams, ShiftedMixture, ShiftedMixtureParams,
};
use crate::error::{domain, Result};
use crate::numerics::LogWeight;
use crate::panjer::{CountLaw, PanjerFamily};
use crate::pmf::LogPmf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Borel,
    BorelTanner,
    Gpd,
    Bartlett,
    Delaporte,
    Shifted,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::Borel => "borel",
            FamilyKind::BorelTanner => "borel-tanner",
            FamilyKind::Gpd => "gpd",
            FamilyKind::Bartlett => "bartlett",
            FamilyKind::Delaporte => "delaporte",
            FamilyKind::Shifted => "shifted",
        }
    }
}

/// Raw parameters; which ones are required depends on the family.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub theta: Option<f64>,
    pub lambda: Option<f64>,
    pub m: Option<u32>,
    pub k: Option<i64>,
}

/// A validated law. `Bartlett` and `Delaporte` are the compound laws (claim
/// count with Borel summands), not the claim-number laws.
#[derive(Debug, Clone)]
pub enum Family {
    Borel(BorelParams),
    BorelTanner(BorelTannerParams),
    Gpd(GpdParams),
    Bartlett(BartlettParams),
    Delaporte(DelaporteParams),
    Shifted(ShiftedMixture),
}

fn need<T>(value: Option<T>, flag: &str, kind: FamilyKind) -> Result<T> {
    value.ok_or_else(|| domain(format!("family {} requires {flag}", kind.name())))
}

impl Family {
    pub fn new(kind: FamilyKind, spec: FamilySpec) -> Result<Self> {
        let lambda = need(spec.lambda, "lambda", kind)?;
        Ok(match kind {
            FamilyKind::Borel => Family::Borel(BorelParams::new(lambda)?),
            FamilyKind::BorelTanner => {
                Family::BorelTanner(BorelTannerParams::new(lambda, need(spec.m, "m", kind)?)?)
            }
            FamilyKind::Gpd => Family::Gpd(GpdParams::new(need(spec.theta, "theta", kind)?, lambda)?),
            FamilyKind::Bartlett => {
                Family::Bartlett(BartlettParams::new(need(spec.theta, "theta", kind)?, lambda)?)
            }
            FamilyKind::Delaporte => {
                let m = need(spec.m, "m", kind)?;
                if m < 2 {
                    return Err(domain("compound Delaporte needs m >= 2; use bartlett for m = 1"));
                }
                Family::Delaporte(DelaporteParams::new(need(spec.theta, "theta", kind)?, lambda, m)?)
            }
            FamilyKind::Shifted => {
                let p = ShiftedMixtureParams::new(need(spec.k, "k", kind)?, need(spec.theta, "theta", kind)?, lambda)?;
                Family::Shifted(ShiftedMixture::new(p)?)
            }
        })
    }

    pub fn kind(&self) -> FamilyKind {
        match self {
            Family::Borel(_) => FamilyKind::Borel,
            Family::BorelTanner(_) => FamilyKind::BorelTanner,
            Family::Gpd(_) => FamilyKind::Gpd,
            Family::Bartlett(_) => FamilyKind::Bartlett,
            Family::Delaporte(_) => FamilyKind::Delaporte,
            Family::Shifted(_) => FamilyKind::Shifted,
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match self {
            Family::Borel(_) | Family::BorelTanner(_) => None,
            Family::Gpd(p) => Some(p.theta()),
            Family::Bartlett(p) => Some(p.theta()),
            Family::Delaporte(p) => Some(p.theta()),
            Family::Shifted(s) => Some(s.params().theta()),
        }
    }

    pub fn lambda(&self) -> f64 {
        match self {
            Family::Borel(p) => p.lambda(),
            Family::BorelTanner(p) => p.lambda(),
            Family::Gpd(p) => p.lambda(),
            Family::Bartlett(p) => p.lambda(),
            Family::Delaporte(p) => p.lambda(),
            Family::Shifted(s) => s.params().lambda(),
        }
    }

    pub fn log_pmf(&self, n: u64) -> LogWeight {
        match self {
            Family::Borel(p) => borel_pmf(p, n),
            Family::BorelTanner(p) => borel_tanner_pmf(p, n),
            Family::Gpd(p) => gpd_pmf(p, n),
            Family::Bartlett(p) => bartlett_compound_pmf(p, n),
            Family::Delaporte(p) => delaporte_compound_pmf(p, n).expect("shape validated at construction"),
            Family::Shifted(s) => s.pmf(n),
        }
    }

    /// PMF on `0..=n_max` with a certified tail bound.
    pub fn table(&self, n_max: u64) -> Result<LogPmf> {
        match self {
            Family::Borel(p) => borel_table(p, n_max),
            Family::BorelTanner(p) => borel_tanner_table(p, n_max),
            Family::Gpd(p) => gpd_table(p, n_max),
            Family::Bartlett(p) => bartlett_compound_table(p, n_max),
            Family::Delaporte(p) => delaporte_compound_table(p, n_max),
            Family::Shifted(s) => s.table(n_max),
        }
    }

    /// Shortest table whose certified tail is below `eps`.
    pub fn truncated(&self, eps: f64) -> Result<LogPmf> {
        match self {
            Family::Borel(p) => borel_truncated(p, eps),
            Family::BorelTanner(p) => borel_tanner_truncated(p, eps),
            Family::Gpd(p) => gpd_truncated(p, eps),
            Family::Bartlett(p) => bartlett_compound_truncated(p, eps),
            Family::Delaporte(p) => delaporte_compound_truncated(p, eps),
            Family::Shifted(s) => s.truncated(eps),
        }
    }

    /// Closed-form mean and variance.
    pub fn mean_var(&self) -> Result<(f64, f64)> {
        match self {
            Family::Borel(p) => borel_mean_var(p),
            Family::BorelTanner(p) => borel_tanner_mean_var(p),
            Family::Gpd(p) => gpd_mean_var(p),
            Family::Bartlett(p) => Ok(bartlett_compound_mean_var(p)),
            Family::Delaporte(p) => delaporte_compound_mean_var(p),
            Family::Shifted(s) => s.mean_var(),
        }
    }

    /// The claim-count law as an input to the aggregate recursions.
    pub fn count_law(&self) -> Result<CountLaw> {
        match self {
            Family::Gpd(_) => Ok(CountLaw::Family(PanjerFamily::Gpd)),
            Family::Bartlett(_) => Ok(CountLaw::Family(PanjerFamily::Bartlett)),
            Family::Delaporte(p) => Ok(CountLaw::Delaporte(p.m())),
            Family::Shifted(s) => Ok(CountLaw::Family(PanjerFamily::Shifted(s.params().k()))),
            other => Err(domain(format!(
                "aggregate recursions cover gpd, bartlett, delaporte and shifted, not {}",
                other.kind().name()
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(theta: f64, lambda: f64) -> FamilySpec {
        FamilySpec {
            theta: Some(theta),
            lambda: Some(lambda),
            ..FamilySpec::default()
        }
    }

    #[test]
    fn construction_validates() {
        assert!(Family::new(FamilyKind::Gpd, spec(1.0, 0.5)).is_ok());
        assert!(Family::new(FamilyKind::Gpd, FamilySpec::default()).is_err());
        let d = FamilySpec { m: Some(1), ..spec(1.0, 0.5) };
        assert!(Family::new(FamilyKind::Delaporte, d).is_err());
        let s = FamilySpec { k: Some(-1), ..spec(0.0, 0.5) };
        assert!(Family::new(FamilyKind::Shifted, s).is_err());
        assert!(Family::new(FamilyKind::BorelTanner, spec(1.0, 0.5)).is_err());
    }

    #[test]
    fn shifted_zero_matches_gpd() {
        let g = Family::new(FamilyKind::Gpd, spec(1.0, 0.5)).unwrap();
        let s = Family::new(FamilyKind::Shifted, FamilySpec { k: Some(0), ..spec(1.0, 0.5) }).unwrap();
        let (a, b) = (g.table(30).unwrap(), s.table(30).unwrap());
        for n in 0..=30 {
            assert!((a.prob(n) - b.prob(n)).abs() <= 1e-15 * a.prob(n));
        }
        assert_eq!(g.mean_var().unwrap().0, 2.0);
    }
}
