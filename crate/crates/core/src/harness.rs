//! Seeded replication studies and the reports they produce.
//!
//! Replication `i` of a study draws all of its randomness from streams keyed
//! by `(base_seed, i)`, and results are collected in index order, so a report
//! is a pure function of the study description and does not depend on the
//! number of worker threads.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::{ArrivalLaw, LeadTimeLaw, ServiceLaw};
use crate::engine::{run_replication, Discipline, SimConfig, Snapshot};
use crate::error::{invalid, Error, Result};
use crate::limit::{
    cov_j, laplace_scale, lateness_mixture, stationary_workload_tail, theta_surrogate, LimitParams,
    LimitSampler, MAX_GRID,
};
use crate::rng::{stream, StreamTag};
use crate::scaling::{default_grid, even_grid, scale};
use crate::stats::{binomial_se, ks_statistic, EmpiricalDistribution, LaplaceLaw, NormalLaw};

/// Evaluate `f(0), ..., f(count - 1)` on `workers` threads (0 = all cores)
/// and return the results in index order.
pub fn parallel_map<T, F>(count: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Numeric(format!("thread pool: {e}")))?;
    pool.install(|| (0..count).into_par_iter().map(&f).collect())
}

/// A scalar read off the last configured snapshot of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    Workload,
    LateWork,
    Frontier,
    CurrentLead,
    QueueLength,
    Idleness,
    /// `√n y* - W - F`.
    FrontierError,
    /// `n^{1/4} 𝒲̂[Ĉ, F̂]`.
    CollapseMass,
}

impl Statistic {
    pub fn extract(self, snapshot: &Snapshot, config: &SimConfig) -> Result<f64> {
        Ok(match self {
            Statistic::Workload => snapshot.workload,
            Statistic::LateWork => snapshot.late_work(),
            Statistic::Frontier => snapshot.frontier,
            Statistic::CurrentLead => snapshot.current_lead,
            Statistic::QueueLength => snapshot.queue_len as f64,
            Statistic::Idleness => snapshot.idleness,
            Statistic::FrontierError => {
                config.sqrt_n() * config.lead_time.y_star() - snapshot.workload - snapshot.frontier
            }
            Statistic::CollapseMass => scale(snapshot, config.n)?.collapse_mass(),
        })
    }
}

/// The snapshot at the last configured time of replication `i`; the horizon
/// when no time is configured.
pub fn final_snapshot(config: &SimConfig, replication: u64) -> Result<Snapshot> {
    let mut cfg = config.clone();
    if cfg.snapshot_times.is_empty() {
        cfg.snapshot_times.push(cfg.horizon);
    }
    let out = run_replication(&cfg, replication, |_| {})?;
    Ok(out
        .snapshots
        .into_iter()
        .last()
        .expect("at least one snapshot"))
}

/// `R` independent runs of `config`, replication `i` seeded from
/// `(config.base_seed, i)`, with `statistic` read at the last snapshot.
pub fn run_replications(
    config: &SimConfig,
    statistic: Statistic,
    replications: usize,
    workers: usize,
) -> Result<EmpiricalDistribution> {
    if replications == 0 {
        return Err(invalid("replication count", "must be at least 1"));
    }
    config.validate()?;
    let values = parallel_map(replications, workers, |i| {
        statistic.extract(&final_snapshot(config, i as u64)?, config)
    })?;
    EmpiricalDistribution::new(values)
}

/// Moments and quantiles of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatSummary {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    pub std_dev: f64,
    pub std_error: f64,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
}

impl StatSummary {
    pub fn new(name: impl Into<String>, emp: &EmpiricalDistribution) -> Self {
        StatSummary {
            name: name.into(),
            count: emp.len(),
            mean: emp.mean(),
            std_dev: emp.std_dev(),
            std_error: emp.std_error(),
            min: emp.quantile(0.0),
            q05: emp.quantile(0.05),
            q25: emp.quantile(0.25),
            median: emp.quantile(0.5),
            q75: emp.quantile(0.75),
            q95: emp.quantile(0.95),
            max: emp.quantile(1.0),
        }
    }
}

/// How a comparison row decides pass/fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `|empirical - theory| <= tolerance`.
    Within,
    /// `empirical <= theory + tolerance`.
    AtMost,
    /// `empirical >= theory + tolerance`.
    AtLeast,
    /// `|empirical / theory - 1| <= tolerance`.
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub theory: f64,
    pub empirical: f64,
    pub tolerance: f64,
    pub rule: Rule,
    pub passed: bool,
}

impl Comparison {
    pub fn new(
        name: impl Into<String>,
        rule: Rule,
        theory: f64,
        empirical: f64,
        tolerance: f64,
    ) -> Self {
        let passed = match rule {
            Rule::Within => (empirical - theory).abs() <= tolerance,
            Rule::AtMost => empirical <= theory + tolerance,
            Rule::AtLeast => empirical >= theory + tolerance,
            Rule::Ratio => theory != 0.0 && (empirical / theory - 1.0).abs() <= tolerance,
        };
        Comparison {
            name: name.into(),
            theory,
            empirical,
            tolerance,
            rule,
            passed,
        }
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let op = match self.rule {
            Rule::Within => "|emp - theory| <=",
            Rule::AtMost => "emp <= theory +",
            Rule::AtLeast => "emp >= theory +",
            Rule::Ratio => "|emp/theory - 1| <=",
        };
        write!(
            f,
            "{verdict} {}: theory {:.6} empirical {:.6} ({op} {})",
            self.name, self.theory, self.empirical, self.tolerance
        )
    }
}

/// Which replication streams a study consumed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub base_seed: u64,
    /// Replication indices `0..replications` were used.
    pub replications: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: serde_json::Value,
    pub seeds: Seeds,
    pub statistics: Vec<StatSummary>,
    pub comparisons: Vec<Comparison>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.comparisons.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// A named numeric table, written as headered CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, header: Vec<&'static str>) -> Self {
        Table {
            name: name.into(),
            header,
            rows: Vec::new(),
        }
    }

    /// Values are written with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to memory");
        String::from_utf8(buf).expect("ascii")
    }
}

/// A report together with its exported tables and optional Q-Q pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: ExperimentReport,
    pub tables: Vec<Table>,
    /// `(empirical, theoretical)` quantiles.
    pub qq: Option<Vec<(f64, f64)>>,
}

fn qq_table(pairs: &[(f64, f64)]) -> Table {
    let mut t = Table::new("qq", vec!["empirical", "theoretical"]);
    t.rows = pairs.iter().map(|&(a, b)| vec![a, b]).collect();
    t
}

fn sorted_table(name: &str, emp: &EmpiricalDistribution) -> Table {
    let mut t = Table::new(name, vec!["value"]);
    t.rows = emp.values().iter().map(|&v| vec![v]).collect();
    t
}

/// Pass/fail knobs for the experiment checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Binomial standard errors allowed around the theoretical proportion.
    pub proportion_sigmas: f64,
    /// KS critical value is `ks_coefficient / √m`.
    pub ks_coefficient: f64,
    /// Standard errors allowed for a mean-zero check.
    pub mean_sigmas: f64,
    /// One-sided normal quantile for the collapse decrease.
    pub collapse_z: f64,
    /// Relative tolerance on variance ratios.
    pub variance_tolerance: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            proportion_sigmas: 3.0,
            ks_coefficient: 1.63,
            mean_sigmas: 3.0,
            collapse_z: 1.645,
            variance_tolerance: 0.2,
        }
    }
}

/// The three service laws of the constant-deadline study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceKind {
    Exponential,
    Gamma,
    Uniform,
}

impl ServiceKind {
    pub const ALL: [ServiceKind; 3] = [
        ServiceKind::Exponential,
        ServiceKind::Gamma,
        ServiceKind::Uniform,
    ];

    pub fn law(self) -> ServiceLaw {
        match self {
            ServiceKind::Exponential => ServiceLaw::EXPONENTIAL_UNIT,
            ServiceKind::Gamma => ServiceLaw::GAMMA_UNIT,
            ServiceKind::Uniform => ServiceLaw::UNIFORM_UNIT,
        }
    }
}

impl FromStr for ServiceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential" => Ok(ServiceKind::Exponential),
            "gamma" => Ok(ServiceKind::Gamma),
            "uniform" => Ok(ServiceKind::Uniform),
            _ => Err(invalid(
                "service kind",
                format!("{s:?} is not exponential, gamma or uniform"),
            )),
        }
    }
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ServiceKind::Exponential => "exponential",
            ServiceKind::Gamma => "gamma",
            ServiceKind::Uniform => "uniform",
        })
    }
}

/// A single M/G/1 system with a constant initial lead time, observed at the
/// horizon after an empty start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantLeadStudy {
    pub service: ServiceLaw,
    pub arrival_rate: f64,
    /// Initial lead time `√n y*` in raw units.
    pub lead: f64,
    pub horizon: f64,
    pub replications: usize,
    pub base_seed: u64,
    #[serde(skip)]
    pub workers: usize,
    pub thresholds: Thresholds,
}

impl ConstantLeadStudy {
    /// Poisson arrivals at rate 0.96, lead time 30, horizon 4000, 4000 runs.
    pub fn standard(service: ServiceKind, base_seed: u64) -> Self {
        ConstantLeadStudy {
            service: service.law(),
            arrival_rate: 0.96,
            lead: 30.0,
            horizon: 4000.0,
            replications: 4000,
            base_seed,
            workers: 0,
            thresholds: Thresholds::default(),
        }
    }

    pub fn arrival(&self) -> ArrivalLaw {
        ArrivalLaw::Exponential {
            rate: self.arrival_rate,
        }
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        Ok(SimConfig {
            arrival: self.arrival(),
            service: self.service,
            lead_time: LeadTimeLaw::constant(self.lead)?,
            n: 1.0,
            horizon: self.horizon,
            base_seed: self.base_seed,
            snapshot_times: vec![self.horizon],
            retain_arrival_log: false,
            discipline: Discipline::Edf,
        })
    }

    pub fn params(&self) -> LimitParams {
        LimitParams::from_laws(&self.arrival(), &self.service, 1.0)
    }

    fn seeds(&self) -> Seeds {
        Seeds {
            base_seed: self.base_seed,
            replications: self.replications as u64,
        }
    }

    fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("study serializes")
    }
}

/// Workload, late work and frontier of one run at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndState {
    pub workload: f64,
    pub late_work: f64,
    pub frontier: f64,
}

/// Run every replication of the study.
pub fn run_constant_lead(study: &ConstantLeadStudy) -> Result<Vec<EndState>> {
    if study.replications == 0 {
        return Err(invalid("replication count", "must be at least 1"));
    }
    let config = study.sim_config()?;
    config.validate()?;
    parallel_map(study.replications, study.workers, |i| {
        let s = final_snapshot(&config, i as u64)?;
        Ok(EndState {
            workload: s.workload,
            late_work: s.late_work(),
            frontier: s.frontier,
        })
    })
}

fn end_state_table(states: &[EndState]) -> Table {
    let mut t = Table::new(
        "samples",
        vec!["replication", "workload", "late_work", "frontier"],
    );
    t.rows = states
        .iter()
        .enumerate()
        .map(|(i, s)| vec![i as f64, s.workload, s.late_work, s.frontier])
        .collect();
    t
}

/// Proportion of runs with `W(T) >= L` against `exp(-θ L)`, and normality of
/// the conditional lateness error `(W - L)⁺ - 𝒲(-∞, 0]` given `W >= L`.
pub fn table1_experiment(study: &ConstantLeadStudy) -> Result<Outcome> {
    let states = run_constant_lead(study)?;
    lateness_report(study, &states)
}

fn lateness_report(study: &ConstantLeadStudy, states: &[EndState]) -> Result<Outcome> {
    let params = study.params();
    let th = study.thresholds;
    let lead = study.lead;
    let m = states.len();

    let theta = theta_surrogate(&params)?;
    let p_theory = stationary_workload_tail(&params, lead)?;
    let hits: Vec<f64> = states
        .iter()
        .filter(|s| s.workload >= lead)
        .map(|s| (s.workload - lead).max(0.0) - s.late_work)
        .collect();
    let p_emp = hits.len() as f64 / m as f64;
    let se = binomial_se(p_theory, m);

    let mixture = lateness_mixture(&params, lead)?;
    let mut comparisons = vec![
        Comparison::new("theta", Rule::Within, theta, theta, 0.0),
        Comparison::new(
            "continuous_mass",
            Rule::Within,
            p_theory,
            p_emp,
            th.proportion_sigmas * se,
        ),
    ];
    let mut statistics = vec![
        StatSummary::new(
            "workload",
            &EmpiricalDistribution::new(states.iter().map(|s| s.workload).collect())?,
        ),
        StatSummary::new(
            "late_work",
            &EmpiricalDistribution::new(states.iter().map(|s| s.late_work).collect())?,
        ),
    ];
    let mut tables = vec![end_state_table(states)];
    let mut qq = None;

    if hits.is_empty() {
        comparisons.push(Comparison::new(
            "ks_conditional_lateness",
            Rule::AtMost,
            0.0,
            f64::NAN,
            0.0,
        ));
    } else {
        let cond = EmpiricalDistribution::new(hits)?;
        let normal = NormalLaw::new(0.0, mixture.variance)?;
        let d = ks_statistic(&cond, &normal);
        let crit = th.ks_coefficient / (cond.len() as f64).sqrt();
        comparisons.push(Comparison::new(
            "ks_conditional_lateness",
            Rule::AtMost,
            crit,
            d,
            0.0,
        ));
        statistics.push(StatSummary::new("conditional_lateness", &cond));
        let pairs = cond.qq_pairs(|p| normal.quantile(p));
        tables.push(sorted_table("conditional_lateness", &cond));
        tables.push(qq_table(&pairs));
        qq = Some(pairs);
    }

    let mut extra = Table::new(
        "mixture",
        vec!["theta", "continuous_mass", "variance", "binomial_se"],
    );
    extra
        .rows
        .push(vec![theta, mixture.continuous_mass, mixture.variance, se]);
    tables.push(extra);

    Ok(Outcome {
        report: ExperimentReport {
            experiment: "table1".into(),
            config: study.echo(),
            seeds: study.seeds(),
            statistics,
            comparisons,
        },
        tables,
        qq,
    })
}

/// `L - W(T) - F(T)` against the Laplace law with scale `√(1-ρ)/θ`.
pub fn frontier_laplace_experiment(study: &ConstantLeadStudy) -> Result<Outcome> {
    let states = run_constant_lead(study)?;
    let params = study.params();
    let th = study.thresholds;
    let values: Vec<f64> = states
        .iter()
        .map(|s| study.lead - s.workload - s.frontier)
        .collect();
    let emp = EmpiricalDistribution::new(values)?;
    let scale = laplace_scale(&params)?;
    let laplace = LaplaceLaw::new(scale)?;
    let d = ks_statistic(&emp, &laplace);
    let crit = th.ks_coefficient / (emp.len() as f64).sqrt();
    let pairs = emp.qq_pairs(|p| laplace.quantile(p));
    Ok(Outcome {
        report: ExperimentReport {
            experiment: "qq_frontier".into(),
            config: study.echo(),
            seeds: study.seeds(),
            statistics: vec![StatSummary::new("frontier_error", &emp)],
            comparisons: vec![
                Comparison::new("laplace_scale", Rule::Within, scale, scale, 0.0),
                Comparison::new("ks_laplace", Rule::AtMost, crit, d, 0.0),
                Comparison::new(
                    "mean_zero",
                    Rule::Within,
                    0.0,
                    emp.mean(),
                    th.mean_sigmas * emp.std_error(),
                ),
            ],
        },
        tables: vec![
            end_state_table(&states),
            sorted_table("frontier_error", &emp),
            qq_table(&pairs),
        ],
        qq: Some(pairs),
    })
}

/// A sequence of systems indexed by `n`: Poisson arrivals at rate
/// `μ(1 - γ/√n)`, lead times `√n` times draws from `law`, observed at raw
/// time `n t` after an empty start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingStudy {
    pub law: LeadTimeLaw,
    pub service: ServiceLaw,
    pub gamma: f64,
    pub scaled_time: f64,
    pub n_list: Vec<f64>,
    pub replications: usize,
    /// Lead-time grid for residual and empirical-process studies.
    #[serde(default)]
    pub y_grid: Vec<f64>,
    /// Limit draws used to estimate limit variances.
    #[serde(default = "default_limit_draws")]
    pub limit_draws: usize,
    pub base_seed: u64,
    #[serde(skip)]
    pub workers: usize,
    pub thresholds: Thresholds,
}

fn default_limit_draws() -> usize {
    20_000
}

impl ScalingStudy {
    /// Uniform `G` on `[0, 2]`, exponential service, `γ = 1`, `t = 1`.
    pub fn standard(n_list: Vec<f64>, replications: usize, base_seed: u64) -> Self {
        ScalingStudy {
            law: LeadTimeLaw::uniform(0.0, 2.0).expect("valid law"),
            service: ServiceLaw::EXPONENTIAL_UNIT,
            gamma: 1.0,
            scaled_time: 1.0,
            n_list,
            replications,
            y_grid: Vec::new(),
            limit_draws: default_limit_draws(),
            base_seed,
            workers: 0,
            thresholds: Thresholds::default(),
        }
    }

    pub fn arrival(&self, n: f64) -> Result<ArrivalLaw> {
        let rate = self.service.rate() * (1.0 - self.gamma / n.sqrt());
        if !(rate > 0.0) {
            return Err(Error::Domain(format!(
                "arrival rate {rate} at n = {n} is not positive"
            )));
        }
        Ok(ArrivalLaw::Exponential { rate })
    }

    pub fn sim_config(&self, n: f64, retain_arrival_log: bool) -> Result<SimConfig> {
        let horizon = n * self.scaled_time;
        Ok(SimConfig {
            arrival: self.arrival(n)?,
            service: self.service,
            lead_time: self.law.clone(),
            n,
            horizon,
            base_seed: self.base_seed,
            snapshot_times: vec![horizon],
            retain_arrival_log,
            discipline: Discipline::Edf,
        })
    }

    pub fn params(&self, n: f64) -> Result<LimitParams> {
        Ok(LimitParams::from_laws(&self.arrival(n)?, &self.service, n))
    }

    /// `y_grid`, or the default grid for the system at `n` when empty.
    pub fn grid(&self, n: f64) -> Result<Vec<f64>> {
        if !self.y_grid.is_empty() {
            return Ok(self.y_grid.clone());
        }
        let std = 1.0 / self.params(n)?.scaled_workload_rate()?;
        Ok(default_grid(&self.law, std))
    }

    fn validate(&self, min_len: usize) -> Result<()> {
        if self.replications == 0 {
            return Err(invalid("replication count", "must be at least 1"));
        }
        if self.n_list.len() < min_len {
            return Err(invalid(
                "n list",
                format!("needs at least {min_len} values"),
            ));
        }
        if !self.n_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(invalid("n list", "must be strictly increasing"));
        }
        if !(self.scaled_time > 0.0) || !(self.gamma > 0.0) {
            return Err(invalid(
                "scaling study",
                "scaled time and gamma must be positive",
            ));
        }
        for &n in &self.n_list {
            self.sim_config(n, false)?.validate()?;
        }
        Ok(())
    }

    fn seeds(&self) -> Seeds {
        Seeds {
            base_seed: self.base_seed,
            replications: (self.replications * self.n_list.len()) as u64,
        }
    }

    fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("study serializes")
    }

    /// Snapshots at `n t` for the `k`-th value of `n`; replication indices
    /// `k R .. (k + 1) R`.
    fn snapshots(&self, k: usize, retain_arrival_log: bool) -> Result<Vec<Snapshot>> {
        let config = self.sim_config(self.n_list[k], retain_arrival_log)?;
        let offset = (k * self.replications) as u64;
        parallel_map(self.replications, self.workers, |i| {
            final_snapshot(&config, offset + i as u64)
        })
    }
}

/// Mean of `n^{1/4} 𝒲̂[Ĉ, F̂]` for each `n`; passes when the mean at the
/// largest `n` is below the mean at the smallest at the configured one-sided
/// level.
pub fn collapse_experiment(study: &ScalingStudy) -> Result<Outcome> {
    study.validate(3)?;
    let th = study.thresholds;
    let mut table = Table::new("collapse", vec!["n", "mean", "std_error"]);
    let mut statistics = Vec::new();
    let mut comparisons = Vec::new();
    for (k, &n) in study.n_list.iter().enumerate() {
        let masses = study
            .snapshots(k, false)?
            .iter()
            .map(|s| Ok(scale(s, n)?.collapse_mass()))
            .collect::<Result<Vec<f64>>>()?;
        let emp = EmpiricalDistribution::new(masses)?;
        table.rows.push(vec![n, emp.mean(), emp.std_error()]);
        comparisons.push(Comparison::new(
            format!("nonnegative[n={n}]"),
            Rule::AtLeast,
            0.0,
            emp.mean(),
            0.0,
        ));
        statistics.push(StatSummary::new(format!("collapse_mass[n={n}]"), &emp));
    }
    let first = &table.rows[0];
    let last = &table.rows[table.rows.len() - 1];
    let z = (first[1] - last[1]) / (first[2].powi(2) + last[2].powi(2)).sqrt();
    comparisons.push(Comparison::new(
        "decrease_z",
        Rule::AtLeast,
        0.0,
        z,
        th.collapse_z,
    ));
    Ok(Outcome {
        report: ExperimentReport {
            experiment: "collapse".into(),
            config: study.echo(),
            seeds: study.seeds(),
            statistics,
            comparisons,
        },
        tables: vec![table],
        qq: None,
    })
}

fn sample_variances(rows: &[Vec<f64>], width: usize) -> Vec<f64> {
    (0..width)
        .map(|j| {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let m = col.len() as f64;
            let mean = col.iter().sum::<f64>() / m;
            if col.len() < 2 {
                0.0
            } else {
                col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0)
            }
        })
        .collect()
}

/// Sample variance of `Ĵ(y) = n^{1/4}[𝒱̂(y, ∞) - H(y)]` at the largest `n`
/// against `cov_J(y, y)`.
pub fn empirical_process_experiment(study: &ScalingStudy) -> Result<Outcome> {
    study.validate(1)?;
    let k = study.n_list.len() - 1;
    let n = study.n_list[k];
    let params = study.params(n)?;
    let grid = &study.grid(n)?;
    let rows = study
        .snapshots(k, true)?
        .iter()
        .map(|s| {
            Ok(scale(s, n)?
                .empirical_process_j(&study.law, grid)?
                .into_iter()
                .map(|p| p.1)
                .collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let variances = sample_variances(&rows, grid.len());
    let mut table = Table::new("empirical_process", vec!["y", "variance", "cov_j", "ratio"]);
    let mut comparisons = Vec::new();
    let theory = grid
        .iter()
        .map(|&y| cov_j(y, y, &params, &study.law))
        .collect::<Result<Vec<f64>>>()?;
    // J vanishes at y*; a ratio there is meaningless
    let floor = 1e-6 * theory.iter().fold(0.0f64, |m, &c| m.max(c));
    for ((&y, &v), &c) in grid.iter().zip(&variances).zip(&theory) {
        table
            .rows
            .push(vec![y, v, c, if c > 0.0 { v / c } else { f64::NAN }]);
        if c > floor {
            comparisons.push(Comparison::new(
                format!("variance[y={y}]"),
                Rule::Ratio,
                c,
                v,
                study.thresholds.variance_tolerance,
            ));
        }
    }
    Ok(Outcome {
        report: ExperimentReport {
            experiment: "empirical_process".into(),
            config: study.echo(),
            seeds: Seeds {
                base_seed: study.base_seed,
                replications: ((k + 1) * study.replications) as u64,
            },
            statistics: Vec::new(),
            comparisons,
        },
        tables: vec![table],
        qq: None,
    })
}

/// Points of `grid` merged with an even grid reaching down to the 0.999
/// quantile of `F*`, so that `J*(F*)` is interpolated between close points.
/// Returns the merged grid and the position of each original point in it.
fn refined_grid(
    grid: &[f64],
    law: &LeadTimeLaw,
    params: &LimitParams,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let w_hi = 1000f64.ln() / params.scaled_workload_rate()?;
    let lo = law.h_inverse(w_hi)?.min(grid[0]);
    let even = MAX_GRID.saturating_sub(grid.len()).min(320);
    let mut fine: Vec<f64> = grid.to_vec();
    let spacing = (law.y_star() - lo) / even.max(1) as f64;
    for y in even_grid(lo, law.y_star(), even) {
        if grid.iter().all(|&g| (g - y).abs() > 1e-3 * spacing) {
            fine.push(y);
        }
    }
    fine.sort_by(f64::total_cmp);
    let index = grid
        .iter()
        .map(|&y| fine.iter().position(|&f| f == y).expect("grid point kept"))
        .collect();
    Ok((fine, index))
}

/// Residual variances for each `n` against limit variances from the limit
/// sampler; checks the ratio for the frontier residual at the largest `n`.
pub fn residual_convergence_experiment(study: &ScalingStudy) -> Result<Outcome> {
    study.validate(1)?;
    let grid = &study.grid(study.n_list[study.n_list.len() - 1])?;
    if !grid.windows(2).all(|w| w[0] < w[1]) || grid.len() > MAX_GRID / 2 {
        return Err(invalid(
            "y grid",
            format!(
                "must be strictly increasing with at most {} points",
                MAX_GRID / 2
            ),
        ));
    }
    if study.limit_draws < 2 {
        return Err(invalid("limit draws", "need at least 2"));
    }
    let g = grid.len();
    let mut table = Table::new(
        "residuals",
        vec![
            "n",
            "y",
            "var_frontier",
            "var_workload",
            "limit_var_frontier",
            "limit_var_workload",
            "ratio",
        ],
    );
    let mut inverse = Table::new("frontier_inverse", vec!["n", "variance", "limit_variance"]);
    let mut comparisons = Vec::new();
    let last = study.n_list.len() - 1;
    let draw_offset = (study.n_list.len() * study.replications) as u64;

    for (k, &n) in study.n_list.iter().enumerate() {
        let params = study.params(n)?;
        let mut rows = Vec::with_capacity(study.replications);
        for s in study.snapshots(k, false)? {
            let sc = scale(&s, n)?;
            let mut row: Vec<f64> = sc
                .residual_vs_frontier(&study.law, grid)
                .into_iter()
                .map(|p| p.1)
                .collect();
            row.extend(
                sc.residual_vs_workload(&study.law, grid)
                    .into_iter()
                    .map(|p| p.1),
            );
            row.push(sc.residual_frontier_inverse(&study.law));
            rows.push(row);
        }
        let var = sample_variances(&rows, 2 * g + 1);

        let (fine, index) = refined_grid(grid, &study.law, &params)?;
        let sampler = LimitSampler::new(&params, &study.law, &fine)?;
        let mut rng = stream(study.base_seed, draw_offset + k as u64, StreamTag::Limit);
        let limit_rows: Vec<Vec<f64>> = (0..study.limit_draws)
            .map(|_| {
                let d = sampler.draw(&mut rng);
                let mut row: Vec<f64> = index.iter().map(|&i| d.frontier_residual[i]).collect();
                row.extend(index.iter().map(|&i| d.workload_residual[i]));
                row.push(d.frontier_inverse_residual);
                row
            })
            .collect();
        let limit_var = sample_variances(&limit_rows, 2 * g + 1);
        let floor = 1e-6 * limit_var[..g].iter().fold(0.0f64, |m, &v| m.max(v));

        for (j, &y) in grid.iter().enumerate() {
            let ratio = var[j] / limit_var[j];
            table.rows.push(vec![
                n,
                y,
                var[j],
                var[g + j],
                limit_var[j],
                limit_var[g + j],
                ratio,
            ]);
            if k == last && limit_var[j] > floor {
                comparisons.push(Comparison::new(
                    format!("frontier_residual_variance[n={n},y={y}]"),
                    Rule::Ratio,
                    limit_var[j],
                    var[j],
                    study.thresholds.variance_tolerance,
                ));
            }
        }
        inverse.rows.push(vec![n, var[2 * g], limit_var[2 * g]]);
    }
    Ok(Outcome {
        report: ExperimentReport {
            experiment: "residuals".into(),
            config: study.echo(),
            seeds: study.seeds(),
            statistics: Vec::new(),
            comparisons,
        },
        tables: vec![table, inverse],
        qq: None,
    })
}
