//! Batch front end for `borel-claims`. Every command renders its output as
//! a string from the parsed [`RunConfig`] alone, so repeated runs are
//! byte-identical; `main` only prints and maps exit codes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use borel_claims::compounds::{
    mixture_moment, s_constant, MomentMethod, SMethod, ShiftedMixtureParams,
};
use borel_claims::family::{Family, FamilyKind, FamilySpec};
use borel_claims::panjer::{
    aggregate_moments, aggregate_pmf_delaporte_with_budget, aggregate_pmf_with_budget,
    default_support, grid_budget_from_env, stop_loss, CountLaw, DelaporteCoefficients, SeverityPmf,
};
use borel_claims::simulate::{
    monte_carlo_check, sample_compound, sample_total_claims, InverseCdf, SampleStats, StreamRng,
};
use borel_claims::verify::{self, VerifyOptions, VerifyReport};
use borel_claims::LogPmf;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Library(#[from] borel_claims::Error),
    #[error("cannot read severity file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Parser)]
#[command(name = "borel-claims", version, about = "Compound claim-number laws with Borel summands")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
    /// Output format; `verify` and `simulate` default to json, the rest to csv.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Tabulate a PMF with its certified tail bound.
    Pmf(PmfArgs),
    /// Closed-form mean and variance, plus raw moments for shifted mixtures.
    Moments(MomentsArgs),
    /// Normalizing constants S(k, θ, λ) of the shifted mixtures.
    Sconst(SconstArgs),
    /// Total-claim distribution by the parameter-shifting recursions.
    Aggregate(AggregateArgs),
    /// Sample a law and compare against its PMF.
    Simulate(SimulateArgs),
    /// Run the invariant suite.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Borel,
    BorelTanner,
    Gpd,
    Bartlett,
    Delaporte,
    Shifted,
}

impl From<FamilyArg> for FamilyKind {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Borel => FamilyKind::Borel,
            FamilyArg::BorelTanner => FamilyKind::BorelTanner,
            FamilyArg::Gpd => FamilyKind::Gpd,
            FamilyArg::Bartlett => FamilyKind::Bartlett,
            FamilyArg::Delaporte => FamilyKind::Delaporte,
            FamilyArg::Shifted => FamilyKind::Shifted,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FamilyArgs {
    #[arg(long, value_enum)]
    pub family: FamilyArg,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
    /// Shape: initial individuals (borel-tanner) or negative-binomial shape (delaporte).
    #[arg(long)]
    pub m: Option<u32>,
    /// Shift of the shifted mixture.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<i64>,
}

impl FamilyArgs {
    /// Validate against the family's parameter domain. Flags the family does
    /// not use are rejected rather than ignored.
    pub fn build(&self) -> CliResult<Family> {
        let kind = FamilyKind::from(self.family);
        let (uses_theta, uses_m, uses_k) = match kind {
            FamilyKind::Borel => (false, false, false),
            FamilyKind::BorelTanner => (false, true, false),
            FamilyKind::Gpd | FamilyKind::Bartlett => (true, false, false),
            FamilyKind::Delaporte => (true, true, false),
            FamilyKind::Shifted => (true, false, true),
        };
        for (used, given, flag) in [
            (uses_theta, self.theta.is_some(), "--theta"),
            (uses_m, self.m.is_some(), "--m"),
            (uses_k, self.k.is_some(), "--k"),
        ] {
            if given && !used {
                return Err(CliError::Usage(format!("family {} does not take {flag}", kind.name())));
            }
        }
        let spec = FamilySpec {
            theta: self.theta,
            lambda: self.lambda,
            m: self.m,
            k: self.k,
        };
        Ok(Family::new(kind, spec)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct PmfArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Last tabulated point; by default the table stops once the certified tail is below --tol.
    #[arg(long = "n", visible_alias = "N")]
    pub n: Option<u64>,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MomentMethodArg {
    Lemma,
    ShiftedPower,
}

#[derive(Debug, Clone, Args)]
pub struct MomentsArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Highest raw moment reported for shifted mixtures.
    #[arg(long, default_value_t = 2)]
    pub order: u32,
    /// Raw-moment method; both are reported when omitted.
    #[arg(long, value_enum)]
    pub method: Option<MomentMethodArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SMethodArg {
    Series,
    Recursion,
    Closed,
}

impl From<SMethodArg> for SMethod {
    fn from(m: SMethodArg) -> Self {
        match m {
            SMethodArg::Series => SMethod::Series,
            SMethodArg::Recursion => SMethod::Recursion,
            SMethodArg::Closed => SMethod::Closed,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SconstArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub k: i64,
    #[arg(long, allow_hyphen_values = true)]
    pub theta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    /// Evaluation method; every applicable method is reported when omitted.
    #[arg(long, value_enum)]
    pub method: Option<SMethodArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum CoefficientsArg {
    #[default]
    PerLevel,
    Literal,
}

#[derive(Debug, Clone, Args)]
pub struct AggregateArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    /// Severity file: `n probability` per line, `#` comments.
    #[arg(long)]
    pub severity: PathBuf,
    /// Last mass point; defaults to ⌈mean + 10·sd⌉ of the aggregate law.
    #[arg(long = "n", visible_alias = "N")]
    pub n: Option<usize>,
    /// Retention for the stop-loss premium.
    #[arg(long)]
    pub retention: Option<u64>,
    /// Largest acceptable bound on the stop-loss tail contribution.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, value_enum, default_value_t)]
    pub delaporte_coefficients: CoefficientsArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Route {
    /// The branching construction of the law.
    #[default]
    Representation,
    /// Inversion of the tabulated CDF.
    InverseCdf,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub family: FamilyArgs,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t)]
    pub route: Route,
    /// Simulate total claims with this severity file instead of claim counts.
    #[arg(long)]
    pub severity: Option<PathBuf>,
    /// Certified tail of the comparison table.
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// Include the Monte Carlo checks.
    #[arg(long)]
    pub mc: bool,
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: u64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Optional checks to add.
    #[arg(long, value_parser = [verify::COUNTEREXAMPLE_ID])]
    pub include: Vec<String>,
}

/// Rendered output of one command.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Output {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
}

impl Output {
    fn ok(stdout: String) -> Self {
        Output {
            stdout,
            stderr: String::new(),
            exit_code: 0,
        }
    }
}

pub fn run(config: &RunConfig) -> CliResult<Output> {
    let format = |default| config.format.unwrap_or(default);
    match &config.command {
        Command::Pmf(a) => cmd_pmf(a, format(Format::Csv)).map(Output::ok),
        Command::Moments(a) => cmd_moments(a, format(Format::Csv)).map(Output::ok),
        Command::Sconst(a) => cmd_sconst(a, format(Format::Csv)).map(Output::ok),
        Command::Aggregate(a) => cmd_aggregate(a, format(Format::Csv)).map(Output::ok),
        Command::Simulate(a) => cmd_simulate(a, format(Format::Json)).map(Output::ok),
        Command::Verify(a) => cmd_verify(a, format(Format::Json)),
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct PmfRow {
    n: usize,
    probability: f64,
    log_probability: f64,
    cumulative: f64,
}

#[derive(Serialize)]
struct TableReport<'a> {
    family: &'static str,
    parameters: FamilySpec,
    rows: Vec<PmfRow>,
    tail_mass_bound: f64,
    tail_mean_bound: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<&'a AggregateSummary>,
}

fn spec_of(a: &FamilyArgs) -> FamilySpec {
    FamilySpec {
        theta: a.theta,
        lambda: a.lambda,
        m: a.m,
        k: a.k,
    }
}

fn rows(table: &LogPmf) -> Vec<PmfRow> {
    table
        .cumulative()
        .into_iter()
        .enumerate()
        .map(|(n, cumulative)| PmfRow {
            n,
            probability: table.prob(n),
            log_probability: table.log_prob(n).ln(),
            cumulative,
        })
        .collect()
}

fn table_csv(table: &LogPmf, out: &mut String) {
    out.push_str("n,probability,log_probability,cumulative\n");
    let rows = rows(table);
    for r in &rows {
        let _ = writeln!(out, "{},{},{},{}", r.n, num(r.probability), num(r.log_probability), num(r.cumulative));
    }
    let last = rows.last().map_or(0.0, |r| r.cumulative);
    let tail = table.tail_mass();
    let _ = writeln!(out, "tail,{},{},{}", num(tail), num(tail.ln()), num(last + tail));
}

fn render_table(kind: FamilyKind, spec: FamilySpec, table: &LogPmf, summary: Option<&AggregateSummary>, format: Format) -> String {
    match format {
        Format::Json => to_json(&TableReport {
            family: kind.name(),
            parameters: spec,
            rows: rows(table),
            tail_mass_bound: table.tail_mass(),
            tail_mean_bound: table.tail_mean(),
            summary,
        }),
        Format::Csv => {
            let mut out = String::new();
            table_csv(table, &mut out);
            if let Some(s) = summary {
                let _ = writeln!(out, "# mean,{}", num(s.mean));
                let _ = writeln!(out, "# variance,{}", num(s.variance));
                if let Some(sl) = &s.stop_loss {
                    let _ = writeln!(out, "# stop_loss,{},{},{}", sl.retention, num(sl.value), num(sl.tail_bound));
                }
            }
            out
        }
    }
}

pub fn cmd_pmf(a: &PmfArgs, format: Format) -> CliResult<String> {
    let family = a.family.build()?;
    let table = match a.n {
        Some(n) => family.table(n)?,
        None => {
            if !(a.tol > 0.0 && a.tol < 1.0) {
                return Err(CliError::Usage(format!("--tol must lie in (0, 1), got {}", a.tol)));
            }
            family.truncated(a.tol)?
        }
    };
    Ok(render_table(family.kind(), spec_of(&a.family), &table, None, format))
}

#[derive(Serialize)]
struct Quantity {
    quantity: String,
    value: f64,
}

fn render_quantities(items: &[Quantity], format: Format) -> String {
    match format {
        Format::Json => to_json(&items),
        Format::Csv => {
            let mut out = String::from("quantity,value\n");
            for q in items {
                let _ = writeln!(out, "{},{}", q.quantity, num(q.value));
            }
            out
        }
    }
}

pub fn cmd_moments(a: &MomentsArgs, format: Format) -> CliResult<String> {
    let family = a.family.build()?;
    let (mean, variance) = family.mean_var()?;
    let mut items = vec![
        Quantity { quantity: "mean".into(), value: mean },
        Quantity { quantity: "variance".into(), value: variance },
    ];
    if let Family::Shifted(s) = &family {
        let methods: Vec<(MomentMethod, &str)> = match a.method {
            Some(MomentMethodArg::Lemma) => vec![(MomentMethod::Lemma, "lemma")],
            Some(MomentMethodArg::ShiftedPower) => vec![(MomentMethod::ShiftedPower, "shifted-power")],
            None => vec![(MomentMethod::Lemma, "lemma"), (MomentMethod::ShiftedPower, "shifted-power")],
        };
        let p: &ShiftedMixtureParams = s.params();
        for order in 1..=a.order {
            for (method, name) in &methods {
                items.push(Quantity {
                    quantity: format!("raw_moment_{order}_{name}"),
                    value: mixture_moment(p, order, *method)?,
                });
            }
        }
    } else if a.method.is_some() {
        return Err(CliError::Usage("--method applies to the shifted family only".into()));
    }
    Ok(render_quantities(&items, format))
}

#[derive(Serialize)]
struct SconstRow {
    k: i64,
    theta: f64,
    lambda: f64,
    method: &'static str,
    value: f64,
}

pub fn cmd_sconst(a: &SconstArgs, format: Format) -> CliResult<String> {
    let methods: Vec<SMethodArg> = match a.method {
        Some(m) => vec![m],
        None if a.k >= -1 => vec![SMethodArg::Series, SMethodArg::Recursion, SMethodArg::Closed],
        None => vec![SMethodArg::Series, SMethodArg::Recursion],
    };
    let mut rows = Vec::new();
    for m in methods {
        let name = match m {
            SMethodArg::Series => "series",
            SMethodArg::Recursion => "recursion",
            SMethodArg::Closed => "closed",
        };
        rows.push(SconstRow {
            k: a.k,
            theta: a.theta,
            lambda: a.lambda,
            method: name,
            value: s_constant(a.k, a.theta, a.lambda, m.into())?,
        });
    }
    Ok(match format {
        Format::Json => to_json(&rows),
        Format::Csv => {
            let mut out = String::from("k,theta,lambda,method,value\n");
            for r in &rows {
                let _ = writeln!(out, "{},{},{},{},{}", r.k, num(r.theta), num(r.lambda), r.method, num(r.value));
            }
            out
        }
    })
}

pub fn read_severity(path: &Path) -> CliResult<SeverityPmf> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    SeverityPmf::parse(&text).map_err(|e| match e {
        borel_claims::Error::SeverityFormat { line, message } => {
            CliError::Usage(format!("{}:{line}: {message}", path.display()))
        }
        other => other.into(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateSummary {
    pub mean: f64,
    pub variance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_loss: Option<borel_claims::panjer::StopLoss>,
}

fn count_parameters(family: &Family) -> CliResult<(CountLaw, f64, f64)> {
    let count = family.count_law()?;
    let theta = family.theta().expect("count families carry theta");
    Ok((count, theta, family.lambda()))
}

fn aggregate_table(
    count: CountLaw,
    severity: &SeverityPmf,
    theta: f64,
    lambda: f64,
    n: usize,
    coefficients: CoefficientsArg,
) -> CliResult<LogPmf> {
    let budget = grid_budget_from_env()?;
    Ok(match count {
        CountLaw::Family(f) => {
            if coefficients != CoefficientsArg::PerLevel {
                return Err(CliError::Usage("--delaporte-coefficients applies to the delaporte family only".into()));
            }
            aggregate_pmf_with_budget(f, severity, theta, lambda, n, budget)?
        }
        CountLaw::Delaporte(m) => {
            let c = match coefficients {
                CoefficientsArg::PerLevel => DelaporteCoefficients::PerLevel,
                CoefficientsArg::Literal => DelaporteCoefficients::Literal,
            };
            aggregate_pmf_delaporte_with_budget(severity, theta, lambda, m, n, c, budget)?
        }
    })
}

/// Largest support chosen automatically for stop-loss accuracy.
pub const MAX_AUTO_SUPPORT: usize = 1 << 14;

pub fn cmd_aggregate(a: &AggregateArgs, format: Format) -> CliResult<String> {
    let family = a.family.build()?;
    let (count, theta, lambda) = count_parameters(&family)?;
    let severity = read_severity(&a.severity)?;
    let mut n = match a.n {
        Some(n) => n,
        None => default_support(count, &severity, theta, lambda)?,
    };
    let mut table = aggregate_table(count, &severity, theta, lambda, n, a.delaporte_coefficients)?;
    // Without an explicit support, widen it until the stop-loss tail meets --tol.
    if a.n.is_none() && a.retention.is_some() {
        while table.tail_mean() > a.tol && n < MAX_AUTO_SUPPORT {
            n = (2 * n).min(MAX_AUTO_SUPPORT);
            table = aggregate_table(count, &severity, theta, lambda, n, a.delaporte_coefficients)?;
        }
    }
    let (mean, variance) = aggregate_moments(count, &severity, theta, lambda)?;
    let stop_loss = a.retention.map(|d| stop_loss(&table, d, a.tol)).transpose()?;
    let summary = AggregateSummary {
        mean,
        variance,
        stop_loss,
    };
    Ok(render_table(family.kind(), spec_of(&a.family), &table, Some(&summary), format))
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    family: &'static str,
    parameters: FamilySpec,
    route: &'static str,
    aggregate: bool,
    stats: &'a SampleStats,
}

pub fn cmd_simulate(a: &SimulateArgs, format: Format) -> CliResult<String> {
    let family = a.family.build()?;
    if !(a.tol > 0.0 && a.tol < 1.0) {
        return Err(CliError::Usage(format!("--tol must lie in (0, 1), got {}", a.tol)));
    }
    if a.route == Route::Representation {
        if let Family::Shifted(s) = &family {
            if s.params().k() < 0 {
                return Err(CliError::Usage(
                    "shifted mixtures with k < 0 have no compound representation; use --route inverse-cdf".into(),
                ));
            }
        }
    }
    let counts = family.truncated(a.tol)?;
    let inverse = InverseCdf::new(&counts);
    let draw_count = |rng: &mut StreamRng| match a.route {
        Route::Representation => sample_compound(&family, rng),
        Route::InverseCdf => inverse.sample(rng),
    };
    let stats = match &a.severity {
        None => monte_carlo_check(&counts, draw_count, a.samples, a.seed)?,
        Some(path) => {
            let severity = read_severity(path)?;
            let (count, theta, lambda) = count_parameters(&family)?;
            let n = default_support(count, &severity, theta, lambda)?;
            let target = aggregate_table(count, &severity, theta, lambda, n, CoefficientsArg::PerLevel)?;
            let sampler = |rng: &mut StreamRng| Ok(sample_total_claims(draw_count(rng)?, &severity, rng));
            monte_carlo_check(&target, sampler, a.samples, a.seed)?
        }
    };
    let route = match a.route {
        Route::Representation => "representation",
        Route::InverseCdf => "inverse-cdf",
    };
    Ok(match format {
        Format::Json => to_json(&SimulationReport {
            family: family.kind().name(),
            parameters: spec_of(&a.family),
            route,
            aggregate: a.severity.is_some(),
            stats: &stats,
        }),
        Format::Csv => {
            let mut out = String::from("n,count,empirical,target,z_score\n");
            let total = stats.n_samples as f64;
            let len = stats.frequencies.len().max(stats.target.len());
            for n in 0..len {
                let c = stats.frequencies.get(n).copied().unwrap_or(0);
                let z = stats.z_scores.get(n).copied().unwrap_or(f64::NAN);
                let _ = writeln!(out, "{n},{c},{},{},{}", num(c as f64 / total), num(stats.target.prob(n)), num(z));
            }
            let _ = writeln!(out, "# seed,{}", stats.seed);
            let _ = writeln!(out, "# n_samples,{}", stats.n_samples);
            let _ = writeln!(out, "# failures,{}", stats.failures);
            let _ = writeln!(out, "# tv_distance,{}", num(stats.tv_distance));
            let _ = writeln!(out, "# max_abs_dev,{}", num(stats.max_abs_dev));
            out
        }
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render_verify(report: &VerifyReport, format: Format) -> String {
    match format {
        Format::Json => to_json(report),
        Format::Csv => {
            let mut out = String::from("id,passed,metric,threshold,expected_finding,detail\n");
            for c in &report.checks {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    c.id,
                    c.passed,
                    num(c.metric),
                    num(c.threshold),
                    c.expected_finding,
                    csv_field(&c.detail)
                );
            }
            out
        }
    }
}

pub fn cmd_verify(a: &VerifyArgs, format: Format) -> CliResult<Output> {
    if a.mc && a.samples < 10_000 {
        return Err(CliError::Usage(format!("--samples must be at least 10000, got {}", a.samples)));
    }
    let options = VerifyOptions {
        monte_carlo: a.mc,
        samples: a.samples,
        seed: a.seed,
        include_counterexample: a.include.iter().any(|i| i == verify::COUNTEREXAMPLE_ID),
    };
    let report = verify::run(&options);
    let stdout = render_verify(&report, format);
    let failed: Vec<&str> = report.failures().map(|c| c.id.as_str()).collect();
    Ok(if failed.is_empty() {
        Output::ok(stdout)
    } else {
        Output {
            stdout,
            stderr: format!("invariant failure: {}\n", failed.join(", ")),
            exit_code: 1,
        }
    })
}
