use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use edfq::config::{GridSpec, OutputFormat, RunConfig};
use edfq::error::{Error, Result};
use edfq::harness::{
    collapse_experiment, empirical_process_experiment, frontier_laplace_experiment,
    residual_convergence_experiment, table1_experiment, Comparison, ExperimentReport, Outcome,
    Rule, Seeds, StatSummary, Table,
};
use edfq::limit::{cov_j, cov_y, cov_z, LimitParams, LimitSampler};
use edfq::rng::{stream, StreamTag};
use edfq::scaling::{default_grid, even_grid};
use edfq::stats::EmpiricalDistribution;
use edfq::svg::emit_svg_qq;
use edfq::{run_sim, ArrivalLaw, Discipline, LeadTimeLaw, ServiceLaw};

#[derive(Parser)]
#[command(
    name = "edfq",
    version,
    about = "EDF queue simulation and heavy-traffic limit experiments"
)]
struct Cli {
    /// Run configuration (JSON). Defaults to the bundled preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Exit with status 2 when any comparison fails.
    #[arg(long, global = true)]
    check: bool,
    /// Output formats written to --out (repeatable).
    #[arg(long = "format", value_parser = parse_format, global = true)]
    formats: Vec<OutputFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One trajectory with snapshots.
    Simulate(SimulateArgs),
    /// Continuous-mass proportion and conditional lateness normality.
    Table1(ConstantLeadArgs),
    /// Normal Q-Q of the conditional lateness error.
    QqLateness(ConstantLeadArgs),
    /// Laplace Q-Q of the frontier prediction error.
    QqFrontier(ConstantLeadArgs),
    /// Collapse mass across a sequence of systems.
    Collapse(ScalingArgs),
    /// Second-order residual variances against the limit.
    Residuals(ScalingArgs),
    /// Variance of the arrival empirical process against cov_J.
    EmpiricalProcess(ScalingArgs),
    /// cov_J, cov_Y and cov_Z on a grid.
    Covariance(LimitArgs),
    /// Draws from the limit (W*, F*, J*).
    LimitSample(LimitArgs),
}

#[derive(Args)]
struct LawArgs {
    /// Lead-time law: constant[:Y], uniform:LOW:HIGH.
    #[arg(long)]
    law: Option<String>,
    /// y* for a constant law.
    #[arg(long)]
    ystar: Option<f64>,
}

#[derive(Args)]
struct SimulateArgs {
    /// none | exponential:RATE | deterministic:INTERVAL | uniform:LOW:HIGH
    #[arg(long)]
    arrivals: Option<String>,
    /// exponential[:RATE] | gamma[:SHAPE:SCALE] | uniform[:LOW:HIGH] | deterministic:VALUE
    #[arg(long)]
    service: Option<String>,
    #[command(flatten)]
    law: LawArgs,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Snapshot time (repeatable).
    #[arg(long = "snapshot")]
    snapshots: Vec<f64>,
    /// Serve first-in-first-out instead of EDF.
    #[arg(long)]
    fifo: bool,
}

#[derive(Args)]
struct ConstantLeadArgs {
    /// exponential | gamma | uniform | all, or a law with parameters.
    #[arg(long)]
    service: Option<String>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    law: LawArgs,
    #[arg(long)]
    service: Option<String>,
    /// Comma-separated increasing list of n.
    #[arg(long, value_delimiter = ',')]
    n_list: Vec<f64>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Scaled observation time t (raw time n t).
    #[arg(long)]
    time: Option<f64>,
    /// Comma-separated points or FROM:TO:POINTS.
    #[arg(long, allow_hyphen_values = true)]
    y_grid: Option<String>,
    #[arg(long)]
    limit_draws: Option<usize>,
}

#[derive(Args)]
struct LimitArgs {
    #[command(flatten)]
    law: LawArgs,
    #[arg(long)]
    arrivals: Option<String>,
    #[arg(long)]
    service: Option<String>,
    #[arg(long)]
    n: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    y_grid: Option<String>,
    #[arg(long)]
    draws: Option<usize>,
}

fn parse_format(s: &str) -> std::result::Result<OutputFormat, String> {
    match s {
        "csv" => Ok(OutputFormat::Csv),
        "json" => Ok(OutputFormat::Json),
        "svg" => Ok(OutputFormat::Svg),
        _ => Err(format!("unknown format {s:?} (csv, json or svg)")),
    }
}

fn bad(what: &'static str, reason: impl Into<String>) -> Error {
    Error::Invalid {
        what,
        reason: reason.into(),
    }
}

/// `name` or `name:p1:p2...`.
fn split_spec(s: &str) -> Result<(&str, Vec<f64>)> {
    let mut it = s.split(':');
    let name = it.next().unwrap_or_default();
    let params = it
        .map(|p| {
            p.parse::<f64>()
                .map_err(|_| bad("law flag", format!("{p:?} in {s:?} is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((name, params))
}

fn parse_arrivals(s: &str) -> Result<ArrivalLaw> {
    let law = match split_spec(s)? {
        ("none", p) if p.is_empty() => ArrivalLaw::None,
        ("exponential", p) if p.len() == 1 => ArrivalLaw::Exponential { rate: p[0] },
        ("deterministic", p) if p.len() == 1 => ArrivalLaw::Deterministic { interval: p[0] },
        ("uniform", p) if p.len() == 2 => ArrivalLaw::Uniform {
            low: p[0],
            high: p[1],
        },
        _ => return Err(bad("arrival law", format!("cannot parse {s:?}"))),
    };
    law.validate()?;
    Ok(law)
}

fn parse_service(s: &str) -> Result<ServiceLaw> {
    let law = match split_spec(s)? {
        ("exponential", p) if p.is_empty() => ServiceLaw::EXPONENTIAL_UNIT,
        ("exponential", p) if p.len() == 1 => ServiceLaw::Exponential { rate: p[0] },
        ("gamma", p) if p.is_empty() => ServiceLaw::GAMMA_UNIT,
        ("gamma", p) if p.len() == 2 => ServiceLaw::Gamma {
            shape: p[0],
            scale: p[1],
        },
        ("uniform", p) if p.is_empty() => ServiceLaw::UNIFORM_UNIT,
        ("uniform", p) if p.len() == 2 => ServiceLaw::Uniform {
            low: p[0],
            high: p[1],
        },
        ("deterministic", p) if p.len() == 1 => ServiceLaw::Deterministic { value: p[0] },
        _ => return Err(bad("service law", format!("cannot parse {s:?}"))),
    };
    law.validate()?;
    Ok(law)
}

fn parse_law(args: &LawArgs, fallback: &LeadTimeLaw) -> Result<LeadTimeLaw> {
    match (&args.law, args.ystar) {
        (None, None) => Ok(fallback.clone()),
        (None, Some(y)) => LeadTimeLaw::constant(y),
        (Some(s), ystar) => match split_spec(s)? {
            ("constant", p) if p.is_empty() => match ystar {
                Some(y) => LeadTimeLaw::constant(y),
                None => Err(bad(
                    "lead-time law",
                    "constant law needs --ystar or constant:Y",
                )),
            },
            ("constant", p) if p.len() == 1 => LeadTimeLaw::constant(p[0]),
            ("uniform", p) if p.len() == 2 => LeadTimeLaw::uniform(p[0], p[1]),
            _ => Err(bad("lead-time law", format!("cannot parse {s:?}"))),
        },
    }
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    if s.contains(':') {
        let (_, p) = split_spec(&format!("even:{s}"))?;
        if p.len() != 3 || p[2] < 1.0 || p[2].fract() != 0.0 {
            return Err(bad("y grid", format!("{s:?} is not FROM:TO:POINTS")));
        }
        return Ok(GridSpec::Even {
            from: p[0],
            to: p[1],
            points: p[2] as usize,
        }
        .values());
    }
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| bad("y grid", format!("{p:?} is not a number")))
        })
        .collect()
}

fn service_label(law: &ServiceLaw) -> String {
    match *law {
        ServiceLaw::Exponential { .. } => "exponential",
        ServiceLaw::Gamma { .. } => "gamma",
        ServiceLaw::Uniform { .. } => "uniform",
        ServiceLaw::Deterministic { .. } => "deterministic",
    }
    .to_string()
}

struct Output {
    dir: Option<PathBuf>,
    formats: Vec<OutputFormat>,
}

impl Output {
    fn wants(&self, f: OutputFormat) -> bool {
        self.dir.is_some() && self.formats.contains(&f)
    }

    fn write(&self, name: &str, contents: &str) -> Result<()> {
        if let Some(dir) = &self.dir {
            fs::create_dir_all(dir)?;
            fs::write(dir.join(name), contents)?;
        }
        Ok(())
    }

    fn outcome(&self, stem: &str, outcome: &Outcome) -> Result<()> {
        if self.wants(OutputFormat::Json) {
            self.write(&format!("{stem}.json"), &(outcome.report.to_json() + "\n"))?;
        }
        if self.wants(OutputFormat::Csv) {
            for t in &outcome.tables {
                self.write(&format!("{stem}_{}.csv", t.name), &t.to_csv())?;
            }
        }
        if self.wants(OutputFormat::Svg) {
            if let Some(pairs) = outcome.qq.as_ref().filter(|p| p.len() >= 2) {
                self.write(&format!("{stem}_qq.svg"), &emit_svg_qq(pairs, stem)?)?;
            }
        }
        Ok(())
    }
}

fn print_json<T: Serialize>(value: &T) {
    use std::io::Write;
    let text = serde_json::to_string_pretty(value).expect("serializable");
    // a closed pipe is not an error worth reporting
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn run(cli: Cli) -> Result<bool> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::preset(),
    };
    if let Some(seed) = cli.seed {
        cfg.base_seed = seed;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    let dir = cli
        .out
        .clone()
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from));
    let formats = if cli.formats.is_empty() {
        cfg.formats.clone()
    } else {
        cli.formats.clone()
    };
    let out = Output { dir, formats };

    match cli.command {
        Command::Simulate(a) => simulate(&cfg, a, &out),
        Command::Table1(a) => constant_lead(&cfg, a, &out, "table1"),
        Command::QqLateness(a) => constant_lead(&cfg, a, &out, "qq_lateness"),
        Command::QqFrontier(a) => constant_lead(&cfg, a, &out, "qq_frontier"),
        Command::Collapse(a) => scaling(&cfg, a, &out, "collapse"),
        Command::Residuals(a) => scaling(&cfg, a, &out, "residuals"),
        Command::EmpiricalProcess(a) => scaling(&cfg, a, &out, "empirical_process"),
        Command::Covariance(a) => limit(&cfg, a, &out, false),
        Command::LimitSample(a) => limit(&cfg, a, &out, true),
    }
}

#[derive(Serialize)]
struct SnapshotView {
    time: f64,
    workload: f64,
    frontier: f64,
    current_lead: f64,
    queue_len: usize,
    idleness: f64,
    late_work: f64,
    arrivals: u64,
}

#[derive(Serialize)]
struct SimulateView {
    config: edfq::SimConfig,
    summary: edfq::engine::Summary,
    snapshots: Vec<SnapshotView>,
}

fn simulate(cfg: &RunConfig, a: SimulateArgs, out: &Output) -> Result<bool> {
    let mut sim = cfg.sim_config(cfg.base_seed);
    if let Some(s) = &a.arrivals {
        sim.arrival = parse_arrivals(s)?;
    }
    if let Some(s) = &a.service {
        sim.service = parse_service(s)?;
    }
    sim.lead_time = parse_law(&a.law, &sim.lead_time)?;
    if let Some(n) = a.n {
        sim.n = n;
    }
    if let Some(h) = a.horizon {
        sim.horizon = h;
    }
    if !a.snapshots.is_empty() {
        sim.snapshot_times = a.snapshots.clone();
    } else if a.horizon.is_some() {
        sim.snapshot_times = vec![sim.horizon];
    }
    if a.fifo {
        sim.discipline = Discipline::Fifo;
    }
    let result = run_sim(&sim)?;
    let view = SimulateView {
        snapshots: result
            .snapshots
            .iter()
            .map(|s| SnapshotView {
                time: s.time,
                workload: s.workload,
                frontier: s.frontier,
                current_lead: s.current_lead,
                queue_len: s.queue_len,
                idleness: s.idleness,
                late_work: s.late_work(),
                arrivals: s.arrivals,
            })
            .collect(),
        summary: result.summary,
        config: sim,
    };
    print_json(&view);
    if out.wants(OutputFormat::Json) {
        out.write(
            "simulate.json",
            &(serde_json::to_string_pretty(&view).expect("serializable") + "\n"),
        )?;
    }
    if out.wants(OutputFormat::Csv) {
        let mut buf = Vec::new();
        for (i, s) in result.snapshots.iter().enumerate() {
            s.write_csv(&mut buf, i == 0)?;
        }
        if result.snapshots.is_empty() {
            buf.extend_from_slice(b"time,deadline,remaining,count\n");
        }
        out.write(
            "simulate_profile.csv",
            &String::from_utf8(buf).expect("ascii"),
        )?;
    }
    Ok(true)
}

fn constant_lead(cfg: &RunConfig, a: ConstantLeadArgs, out: &Output, kind: &str) -> Result<bool> {
    let services = match a.service.as_deref() {
        Some("all") => vec![
            ServiceLaw::EXPONENTIAL_UNIT,
            ServiceLaw::GAMMA_UNIT,
            ServiceLaw::UNIFORM_UNIT,
        ],
        Some(s) => vec![parse_service(s)?],
        None => vec![cfg.constant_lead.service],
    };
    let mut reports = Vec::new();
    for service in services {
        let mut study = cfg.constant_lead_study(service);
        if let Some(r) = a.replications {
            study.replications = r;
        }
        if let Some(h) = a.horizon {
            study.horizon = h;
        }
        let mut outcome = if kind == "qq_frontier" {
            frontier_laplace_experiment(&study)?
        } else {
            table1_experiment(&study)?
        };
        outcome.report.experiment = kind.to_string();
        out.outcome(&format!("{kind}_{}", service_label(&service)), &outcome)?;
        reports.push(outcome.report);
    }
    finish(reports)
}

fn finish(reports: Vec<ExperimentReport>) -> Result<bool> {
    let passed = reports.iter().all(ExperimentReport::passed);
    for r in &reports {
        for c in &r.comparisons {
            eprintln!("{} {c}", r.experiment);
        }
    }
    if reports.len() == 1 {
        print_json(&reports[0]);
    } else {
        print_json(&reports);
    }
    Ok(passed)
}

fn scaling(cfg: &RunConfig, a: ScalingArgs, out: &Output, kind: &str) -> Result<bool> {
    let mut study = cfg.scaling_study();
    study.law = parse_law(&a.law, &study.law)?;
    if let Some(s) = &a.service {
        study.service = parse_service(s)?;
    }
    if !a.n_list.is_empty() {
        study.n_list = a.n_list.clone();
    }
    if let Some(r) = a.replications {
        study.replications = r;
    }
    if let Some(g) = a.gamma {
        study.gamma = g;
    }
    if let Some(t) = a.time {
        study.scaled_time = t;
    }
    if let Some(g) = &a.y_grid {
        study.y_grid = parse_grid(g)?;
    }
    if let Some(d) = a.limit_draws {
        study.limit_draws = d;
    }
    let outcome = match kind {
        "collapse" => collapse_experiment(&study)?,
        "residuals" => residual_convergence_experiment(&study)?,
        _ => empirical_process_experiment(&study)?,
    };
    out.outcome(kind, &outcome)?;
    finish(vec![outcome.report])
}

fn limit(cfg: &RunConfig, a: LimitArgs, out: &Output, sample: bool) -> Result<bool> {
    let l = &cfg.limit;
    let law = parse_law(&a.law, &l.law)?;
    let arrival = match &a.arrivals {
        Some(s) => parse_arrivals(s)?,
        None => l.arrival,
    };
    let service = match &a.service {
        Some(s) => parse_service(s)?,
        None => l.service,
    };
    let n = a.n.unwrap_or(l.n);
    let params = LimitParams::from_laws(&arrival, &service, n);
    let grid = match (&a.y_grid, &l.y_grid) {
        (Some(g), _) => parse_grid(g)?,
        // a grid that does not fit the law given on the command line
        // falls back to the default for that law
        (None, Some(g)) if a.law.law.is_none() && a.law.ystar.is_none() => g.values(),
        _ => match params.scaled_workload_rate() {
            Ok(rate) => default_grid(&law, 1.0 / rate),
            Err(_) => even_grid(law.y_star() - 4.0, law.y_star(), 21),
        },
    };
    if let Some(y) = grid.iter().find(|&&y| y > law.y_star()) {
        return Err(bad(
            "y grid",
            format!("{y} lies above y* = {}", law.y_star()),
        ));
    }
    let echo = serde_json::json!({
        "arrival": arrival,
        "service": service,
        "law": law,
        "n": n,
        "y_grid": grid,
    });
    let seeds = Seeds {
        base_seed: cfg.base_seed,
        replications: 1,
    };
    let outcome = if sample {
        let draws = a.draws.unwrap_or(l.draws);
        if draws < 2 {
            return Err(bad("draws", "need at least 2"));
        }
        let sampler = LimitSampler::new(&params, &law, &grid)?;
        let mut rng = stream(cfg.base_seed, 0, StreamTag::Limit);
        let mut table = Table::new(
            "samples",
            vec!["w_star", "f_star", "frontier_inverse_residual"],
        );
        let mut paths = Table::new(
            "paths",
            vec!["draw", "y", "j", "frontier_residual", "workload_residual"],
        );
        for i in 0..draws {
            let d = sampler.draw(&mut rng);
            table
                .rows
                .push(vec![d.w_star, d.f_star, d.frontier_inverse_residual]);
            for (k, &y) in grid.iter().enumerate() {
                paths.rows.push(vec![
                    i as f64,
                    y,
                    d.j_path[k],
                    d.frontier_residual[k],
                    d.workload_residual[k],
                ]);
            }
        }
        let w = EmpiricalDistribution::new(table.rows.iter().map(|r| r[0]).collect())?;
        let r3 = EmpiricalDistribution::new(table.rows.iter().map(|r| r[2]).collect())?;
        let mean_w = 1.0 / params.scaled_workload_rate()?;
        Outcome {
            report: ExperimentReport {
                experiment: "limit_sample".into(),
                config: echo,
                seeds,
                statistics: vec![
                    StatSummary::new("w_star", &w),
                    StatSummary::new("frontier_inverse_residual", &r3),
                ],
                comparisons: vec![Comparison::new(
                    "w_star_mean",
                    Rule::Within,
                    mean_w,
                    w.mean(),
                    cfg.thresholds.mean_sigmas * w.std_error(),
                )],
            },
            tables: vec![table, paths],
            qq: None,
        }
    } else {
        let mut table = Table::new(
            "covariance",
            vec!["y1", "y2", "cov_j", "cov_y", "cov_z", "gap"],
        );
        let mut worst = 0.0f64;
        let ys = law.y_star();
        for &y1 in &grid {
            for &y2 in &grid {
                let j = cov_j(y1, y2, &params, &law)?;
                let y = cov_y(ys - y1, y1, ys - y2, y2, &params, &law)?;
                let z = cov_z(y1, y2, &params, &law)?;
                let gap = j - (z + y);
                worst = worst.max(gap.abs());
                table.rows.push(vec![y1, y2, j, y, z, gap]);
            }
        }
        Outcome {
            report: ExperimentReport {
                experiment: "covariance".into(),
                config: echo,
                seeds,
                statistics: Vec::new(),
                comparisons: vec![Comparison::new(
                    "decomposition_gap",
                    Rule::Within,
                    0.0,
                    worst,
                    1e-8,
                )],
            },
            tables: vec![table],
            qq: None,
        }
    };
    let stem = if sample { "limit_sample" } else { "covariance" };
    out.outcome(stem, &outcome)?;
    finish(vec![outcome.report])
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let check = cli.check;
    match run(cli) {
        Ok(passed) if passed || !check => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
