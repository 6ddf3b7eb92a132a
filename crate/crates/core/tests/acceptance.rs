//! Acceptance criteria at their pinned tolerances, seed 7 throughout.
//!
//! Runs without the libtest harness: one `PASS`/`FAIL` line per criterion,
//! the individual checks indented below it, and a non-zero exit status when
//! any criterion fails.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;

use edfq::clock::Instant;
use edfq::harness::{
    collapse_experiment, empirical_process_experiment, frontier_laplace_experiment,
    residual_convergence_experiment, table1_experiment, ConstantLeadStudy, Outcome, ScalingStudy,
    ServiceKind,
};
use edfq::limit::{
    cov_j, cov_y, cov_z, lateness_mixture, stationary_workload_tail, theta_surrogate,
};
use edfq::scaling::{even_grid, interior_points};
use edfq::{run_replication, ArrivalLaw, Discipline, LeadTimeLaw, ServiceLaw, SimConfig, SimState};

const SEED: u64 = 7;

/// Individual checks of one criterion.
#[derive(Default)]
struct Checks(Vec<(bool, String)>);

impl Checks {
    fn check(&mut self, name: &str, pass: bool, detail: String) {
        self.0.push((pass, format!("{name}: {detail}")));
    }
}

fn comparison<'a>(outcome: &'a Outcome, name: &str) -> &'a edfq::harness::Comparison {
    outcome
        .report
        .comparisons
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("no comparison {name}"))
}

fn table1_outcomes() -> &'static Vec<(ServiceKind, Outcome)> {
    static CELL: OnceLock<Vec<(ServiceKind, Outcome)>> = OnceLock::new();
    CELL.get_or_init(|| {
        ServiceKind::ALL
            .iter()
            .map(|&kind| {
                (
                    kind,
                    table1_experiment(&ConstantLeadStudy::standard(kind, SEED)).unwrap(),
                )
            })
            .collect()
    })
}

/// `θ = 2(1-ρ)/(λ(α²ρ² + β²))` for Poisson(0.96) arrivals and unit-mean
/// service with variance `beta2`.
fn hand_theta(beta2: f64) -> f64 {
    let lambda: f64 = 0.96;
    let rho = lambda;
    let alpha2 = 1.0 / (lambda * lambda);
    2.0 * (1.0 - rho) / (lambda * (alpha2 * rho * rho + beta2))
}

fn criterion_1_continuous_mass(checks: &mut Checks) {
    // service variances: exponential 1, gamma(2, 1/2) 1/2, uniform[1/2, 3/2] 1/12
    let cases = [
        (ServiceKind::Exponential, 1.0, 0.2865),
        (ServiceKind::Gamma, 0.5, 0.1889),
        (ServiceKind::Uniform, 1.0 / 12.0, 0.0995),
    ];
    for (kind, beta2, published) in cases {
        let study = ConstantLeadStudy::standard(kind, SEED);
        let params = study.params();
        let theta = theta_surrogate(&params).unwrap();
        let p = stationary_workload_tail(&params, 30.0).unwrap();
        let hand = (-30.0 * hand_theta(beta2)).exp();
        checks.check(
            &format!("theory[{kind}]"),
            (p - hand).abs() <= 1e-4 && (p - published).abs() <= 1e-4,
            format!("theta {theta:.6} p {p:.6} hand {hand:.6} published {published}"),
        );
    }
    for (kind, outcome) in table1_outcomes() {
        let c = comparison(outcome, "continuous_mass");
        checks.check(
            &format!("empirical[{kind}]"),
            c.passed,
            format!(
                "p {:.4} vs {:.4} +- {:.4}",
                c.empirical, c.theory, c.tolerance
            ),
        );
    }
}

fn criterion_2_conditional_lateness_normal(checks: &mut Checks) {
    let params = ConstantLeadStudy::standard(ServiceKind::Exponential, SEED).params();
    let var = lateness_mixture(&params, 30.0).unwrap().variance;
    // 2(1-ρ)·30/θ equals λ(α²ρ²+β²)·30 = 0.96·2·30
    checks.check(
        "variance[exponential]",
        (var - 57.6).abs() < 1e-9,
        format!("{var}"),
    );
    for (kind, outcome) in table1_outcomes() {
        let c = comparison(outcome, "ks_conditional_lateness");
        checks.check(
            &format!("ks[{kind}]"),
            c.passed,
            format!("D {:.4} vs critical {:.4}", c.empirical, c.theory),
        );
    }
}

fn criterion_3_frontier_laplace(checks: &mut Checks) {
    let expected = [
        (ServiceKind::Exponential, 4.8),
        (ServiceKind::Gamma, 3.6),
        (ServiceKind::Uniform, 2.6),
    ];
    for (kind, scale) in expected {
        let outcome =
            frontier_laplace_experiment(&ConstantLeadStudy::standard(kind, SEED)).unwrap();
        let s = comparison(&outcome, "laplace_scale").theory;
        checks.check(
            &format!("scale[{kind}]"),
            (s - scale).abs() < 1e-9,
            format!("{s:.6}"),
        );
        let c = comparison(&outcome, "ks_laplace");
        checks.check(
            &format!("ks[{kind}]"),
            c.passed,
            format!("D {:.4} vs critical {:.4}", c.empirical, c.theory),
        );
    }
}

fn criterion_4_covariance_decomposition(checks: &mut Checks) {
    let params = ConstantLeadStudy::standard(ServiceKind::Exponential, SEED).params();
    let laws = [
        ("constant", LeadTimeLaw::constant(3.0).unwrap()),
        (
            "atom_uniform",
            LeadTimeLaw::mixed(vec![(2.0, 0.4)], vec![(-1.0, 3.0, 0.15)]).unwrap(),
        ),
    ];
    for (name, law) in &laws {
        let y_star = law.y_star();
        let grid = even_grid(y_star - 5.0, y_star, 20);
        let mut worst = 0.0f64;
        let mut worst_closed = 0.0f64;
        for &y1 in &grid {
            for &y2 in &grid {
                let j = cov_j(y1, y2, &params, law).unwrap();
                let z = cov_z(y1, y2, &params, law).unwrap();
                let y = cov_y(y_star - y1, y1, y_star - y2, y2, &params, law).unwrap();
                worst = worst.max((j - (z + y)).abs());
                if law.is_constant() {
                    let closed = params.netput_variance() * (y_star - y1).min(y_star - y2);
                    worst_closed = worst_closed.max((j - closed).abs());
                }
            }
        }
        checks.check(
            &format!("decomposition[{name}]"),
            worst <= 1e-8,
            format!("max gap {worst:e}"),
        );
        if law.is_constant() {
            checks.check(
                "closed_form[constant]",
                worst_closed <= 1e-8,
                format!("max gap {worst_closed:e}"),
            );
        }
    }
}

fn criterion_5_state_space_collapse(checks: &mut Checks) {
    let study = ScalingStudy::standard(vec![64.0, 256.0, 1024.0], 500, SEED);
    let outcome = collapse_experiment(&study).unwrap();
    let c = comparison(&outcome, "decrease_z");
    let means: Vec<String> = outcome.tables[0]
        .rows
        .iter()
        .map(|r| format!("{:.4}", r[1]))
        .collect();
    checks.check(
        "collapse_decreases",
        c.passed,
        format!(
            "means {} z {:.3} >= {}",
            means.join(" / "),
            c.empirical,
            c.tolerance
        ),
    );
}

fn criterion_6_empirical_process_variance(checks: &mut Checks) {
    let mut study = ScalingStudy::standard(vec![1024.0], 2000, SEED);
    study.y_grid = interior_points(&study.grid(1024.0).unwrap(), 5);
    let outcome = empirical_process_experiment(&study).unwrap();
    let count = outcome.report.comparisons.len();
    checks.check(
        "grid_points",
        count == 5,
        format!("{count} interior points"),
    );
    for c in &outcome.report.comparisons {
        checks.check(
            &c.name,
            c.passed,
            format!(
                "var {:.5} cov_J {:.5} ratio {:.3}",
                c.empirical,
                c.theory,
                c.empirical / c.theory
            ),
        );
    }
}

fn criterion_7_engine_exactness(checks: &mut Checks) {
    // A at 0 (service 5, deadline 10), B at 1 (service 1, deadline 3)
    let mut s = SimState::new(0.0, Discipline::Edf, false);
    s.arrive(5.0, 10.0);
    s.run_until(Instant::from_f64(1.0));
    s.arrive(1.0, 3.0);
    let preempted = s.in_service().map(|c| c.id) == Some(2);
    s.run_until(Instant::from_f64(1.5));
    let snap = s.snapshot();
    let b_done = s.next_completion().as_f64();
    s.run_until(Instant::from_f64(2.0));
    let a_done = s.next_completion().as_f64();
    let trace_ok = preempted
        && (snap.workload - 4.5).abs() <= 1e-9
        && snap.queue_len == 2
        && (snap.current_lead - 1.5).abs() <= 1e-9
        && (snap.frontier - 8.5).abs() <= 1e-9
        && (b_done - 2.0).abs() <= 1e-9
        && (a_done - 6.0).abs() <= 1e-9;
    checks.check(
        "two_customer_trace",
        trace_ok,
        format!(
            "W {} Q {} C {} F {} B done {b_done} A done {a_done}",
            snap.workload, snap.queue_len, snap.current_lead, snap.frontier
        ),
    );

    // M/M/1 at ρ = 0.5: mean workload λE[S²]/(2(1-ρ)) = 1
    let horizon = 1.1e6;
    let config = SimConfig {
        arrival: ArrivalLaw::Exponential { rate: 0.5 },
        service: ServiceLaw::EXPONENTIAL_UNIT,
        lead_time: LeadTimeLaw::constant(1.0).unwrap(),
        n: 1.0,
        horizon,
        base_seed: SEED,
        snapshot_times: vec![horizon],
        retain_arrival_log: false,
        discipline: Discipline::Edf,
    };
    let mut worst = 0.0f64;
    let out = run_replication(&config, 0, |st| {
        worst = worst.max(st.conservation_gap().abs())
    })
    .unwrap();
    let events = out.summary.events;
    checks.check(
        "conservation",
        events >= 1_000_000 && worst <= 1e-9,
        format!("{events} events, max gap {worst:e}"),
    );
    let mean = out.summary.mean_workload;
    checks.check(
        "mm1_mean_workload",
        (mean - 1.0).abs() <= 0.05,
        format!("{mean:.4} vs 1"),
    );
}

fn rendered(outcome: &Outcome) -> String {
    let mut text = outcome.report.to_json();
    for t in &outcome.tables {
        text.push_str(&t.to_csv());
    }
    if let Some(pairs) = &outcome.qq {
        text.push_str(&edfq::svg::emit_svg_qq(pairs, "qq").unwrap());
    }
    text
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

fn criterion_8_determinism(checks: &mut Checks) {
    let run_all = |workers: usize| -> Vec<(&'static str, String)> {
        let mut cl = ConstantLeadStudy::standard(ServiceKind::Gamma, SEED);
        cl.replications = 200;
        cl.horizon = 1000.0;
        cl.workers = workers;
        let mut sc = ScalingStudy::standard(vec![16.0, 64.0, 256.0], 100, SEED);
        sc.workers = workers;
        let mut res = ScalingStudy::standard(vec![16.0, 64.0], 100, SEED);
        res.law = LeadTimeLaw::constant(3.0).unwrap();
        res.scaled_time = 8.0;
        res.limit_draws = 500;
        res.workers = workers;
        vec![
            ("table1", rendered(&table1_experiment(&cl).unwrap())),
            (
                "qq_frontier",
                rendered(&frontier_laplace_experiment(&cl).unwrap()),
            ),
            ("collapse", rendered(&collapse_experiment(&sc).unwrap())),
            (
                "empirical_process",
                rendered(&empirical_process_experiment(&sc).unwrap()),
            ),
            (
                "residuals",
                rendered(&residual_convergence_experiment(&res).unwrap()),
            ),
        ]
    };
    let base = run_all(1);
    for workers in [1, 4] {
        for ((name, a), (_, b)) in base.iter().zip(run_all(workers)) {
            checks.check(
                &format!("{name}[workers=1 vs {workers}]"),
                *a == b,
                format!("{} bytes", a.len()),
            );
        }
    }

    let bin = env!("CARGO_BIN_EXE_edfq");
    let dirs: Vec<tempfile::TempDir> = (0..2).map(|_| tempfile::tempdir().unwrap()).collect();
    for (dir, workers) in dirs.iter().zip(["1", "3"]) {
        let status = Command::new(bin)
            .args(["--seed", "7", "--workers", workers, "--out"])
            .arg(dir.path())
            .args(["collapse", "--n-list", "16,64,256", "--replications", "100"])
            .output()
            .unwrap();
        checks.check(
            &format!("cli_exit[workers={workers}]"),
            status.status.success(),
            format!("{}", status.status),
        );
    }
    let (a, b) = (read_dir(dirs[0].path()), read_dir(dirs[1].path()));
    checks.check(
        "cli_output_files",
        !a.is_empty() && a == b,
        format!("{} files", a.len()),
    );
}

type Criterion = (&'static str, fn(&mut Checks));

fn main() {
    let criteria: [Criterion; 8] = [
        ("continuous mass proportion", criterion_1_continuous_mass),
        (
            "conditional lateness normality",
            criterion_2_conditional_lateness_normal,
        ),
        ("frontier error Laplace law", criterion_3_frontier_laplace),
        (
            "covariance decomposition",
            criterion_4_covariance_decomposition,
        ),
        ("state-space collapse", criterion_5_state_space_collapse),
        (
            "empirical process variance",
            criterion_6_empirical_process_variance,
        ),
        ("engine exactness", criterion_7_engine_exactness),
        ("determinism", criterion_8_determinism),
    ];
    let mut failed = Vec::new();
    let mut out = std::io::stdout();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let mut checks = Checks::default();
        run(&mut checks);
        let pass = !checks.0.is_empty() && checks.0.iter().all(|c| c.0);
        let _ = writeln!(
            out,
            "criterion {} {} {name}",
            k + 1,
            if pass { "PASS" } else { "FAIL" }
        );
        for (ok, text) in &checks.0 {
            let _ = writeln!(out, "    {} {text}", if *ok { "ok  " } else { "FAIL" });
        }
        if !pass {
            failed.push(k + 1);
        }
    }
    let _ = writeln!(
        out,
        "acceptance: {} of {} criteria passed",
        criteria.len() - failed.len(),
        criteria.len()
    );
    if !failed.is_empty() {
        let _ = writeln!(out, "failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
