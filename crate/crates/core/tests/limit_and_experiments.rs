use edfq::harness::{
    collapse_experiment, frontier_laplace_experiment, residual_convergence_experiment,
    ConstantLeadStudy, ScalingStudy, ServiceKind,
};
use edfq::limit::{cov_j, cov_y, cov_z, laplace_density, LimitSampler};
use edfq::rng::{stream, StreamTag};
use edfq::scaling::even_grid;
use edfq::stats::{EmpiricalDistribution, LaplaceLaw};
use edfq::{ArrivalLaw, LeadTimeLaw, LimitParams, ServiceLaw};
use proptest::prelude::*;

fn heavy_traffic_params() -> LimitParams {
    ScalingStudy::standard(vec![1024.0], 1, 1)
        .params(1024.0)
        .unwrap()
}

#[test]
fn constant_law_frontier_inverse_residual_is_laplace() {
    // J* is a Brownian motion run backwards from y*, evaluated at the
    // independent exponential time W*; the mixture is Laplace with scale
    // σ²/(2γ).
    let params = heavy_traffic_params();
    let law = LeadTimeLaw::constant(3.0).unwrap();
    let grid = even_grid(3.0 - 16.0, 3.0, 512);
    let sampler = LimitSampler::new(&params, &law, &grid).unwrap();
    let mut rng = stream(11, 0, StreamTag::Limit);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| sampler.draw(&mut rng).frontier_inverse_residual)
        .collect();
    let emp = EmpiricalDistribution::new(draws).unwrap();
    let scale = params.netput_variance() / (2.0 * params.gamma);
    let d = emp.ks_statistic(&LaplaceLaw::new(scale).unwrap());
    assert!(d < 0.01, "KS distance {d}");
}

#[test]
fn laplace_density_normalized_and_symmetric() {
    let params = ConstantLeadStudy::standard(ServiceKind::Exponential, 1).params();
    assert!((laplace_density(&params, 0.0).unwrap() - (1.0 / 24.0) / 0.4).abs() < 1e-12);
    // composite Simpson on [0, 200], doubled by symmetry
    let steps = 200_000;
    let h = 200.0 / steps as f64;
    let f = |x: f64| laplace_density(&params, x).unwrap();
    let inner: f64 = (1..steps)
        .map(|i| f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 })
        .sum();
    let total = 2.0 * h / 3.0 * (f(0.0) + inner + f(200.0));
    assert!((total - 1.0).abs() < 1e-9, "{total}");
    for x in [0.3, 1.0, 7.5, 40.0] {
        assert_eq!(
            laplace_density(&params, x).unwrap(),
            laplace_density(&params, -x).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn covariances_symmetric_and_decompose(
        atom in 0.5f64..2.5,
        mass in 0.0f64..0.9,
        u1 in 0.0f64..1.0,
        u2 in 0.0f64..1.0,
        rate in 0.5f64..0.99,
    ) {
        let law = LeadTimeLaw::mixed(vec![(atom, mass)], vec![(-1.0, 3.0, (1.0 - mass) / 4.0)]).unwrap();
        let params = LimitParams::from_laws(&ArrivalLaw::Exponential { rate }, &ServiceLaw::GAMMA_UNIT, 100.0);
        let y_star = law.y_star();
        let (y1, y2) = (y_star - 4.5 * u1, y_star - 4.5 * u2);
        let j12 = cov_j(y1, y2, &params, &law).unwrap();
        prop_assert!((j12 - cov_j(y2, y1, &params, &law).unwrap()).abs() < 1e-12);
        let z = cov_z(y1, y2, &params, &law).unwrap();
        let y = cov_y(y_star - y1, y1, y_star - y2, y2, &params, &law).unwrap();
        prop_assert!((j12 - z - y).abs() <= 1e-8);
        // Cauchy-Schwarz
        let j11 = cov_j(y1, y1, &params, &law).unwrap();
        let j22 = cov_j(y2, y2, &params, &law).unwrap();
        prop_assert!(j12 * j12 <= j11 * j22 * (1.0 + 1e-10) + 1e-14);
        prop_assert_eq!(cov_j(y_star, y1, &params, &law).unwrap(), 0.0);
    }
}

#[test]
fn frontier_qq_export_has_one_row_per_replication() {
    let mut study = ConstantLeadStudy::standard(ServiceKind::Exponential, 7);
    let outcome = frontier_laplace_experiment(&study).unwrap();
    assert_eq!(outcome.qq.as_ref().unwrap().len(), 4000);
    let qq = outcome.tables.iter().find(|t| t.name == "qq").unwrap();
    assert_eq!(qq.rows.len(), 4000);
    assert_eq!(qq.header.len(), 2);
    let mean = outcome
        .report
        .comparisons
        .iter()
        .find(|c| c.name == "mean_zero")
        .unwrap();
    assert!(mean.passed, "{mean}");

    study.replications = 10;
    assert_eq!(
        frontier_laplace_experiment(&study)
            .unwrap()
            .qq
            .unwrap()
            .len(),
        10
    );
}

#[test]
fn collapse_means_are_nonnegative_and_repeatable() {
    let mut study = ScalingStudy::standard(vec![16.0, 64.0, 256.0], 1, 3);
    study.service = ServiceLaw::Deterministic { value: 1.0 };
    let a = collapse_experiment(&study).unwrap();
    let b = collapse_experiment(&study).unwrap();
    assert_eq!(a.report.to_json(), b.report.to_json());
    for c in a
        .report
        .comparisons
        .iter()
        .filter(|c| c.name.starts_with("nonnegative"))
    {
        assert!(c.empirical >= 0.0);
    }
}

#[test]
fn residual_variances_against_limit_sampler() {
    let mut study = ScalingStudy::standard(vec![256.0, 1024.0], 1000, 7);
    study.law = LeadTimeLaw::constant(3.0).unwrap();
    study.scaled_time = 8.0;
    study.y_grid = even_grid(-2.0, 3.0, 21);
    let outcome = residual_convergence_experiment(&study).unwrap();
    let table = outcome
        .tables
        .iter()
        .find(|t| t.name == "residuals")
        .unwrap();
    let rows: Vec<&Vec<f64>> = table.rows.iter().filter(|r| r[0] == 1024.0).collect();
    assert_eq!(rows.len(), 21);

    let at_zero = rows.iter().find(|r| r[1] == 0.0).unwrap();
    let ratio = at_zero[2] / at_zero[4];
    assert!((0.8..=1.2).contains(&ratio), "ratio {ratio} at y = 0");

    // J*(y*) = 0: the residual against the workload vanishes at y*
    let top = rows.last().unwrap();
    let interior = rows.iter().map(|r| r[3]).fold(0.0f64, f64::max);
    assert!(top[3] <= 1e-3 * interior, "{} vs {interior}", top[3]);

    // cov_J(y, y) = σ²(y* - y) decreases in y
    let params = study.params(1024.0).unwrap();
    let diag: Vec<f64> = rows
        .iter()
        .map(|r| cov_j(r[1], r[1], &params, &study.law).unwrap())
        .collect();
    assert!(diag.windows(2).all(|w| w[0] > w[1]));
    // so do the limit variances of the frontier residual over the sampled range
    let limit: Vec<f64> = rows.iter().map(|r| r[4]).collect();
    assert!(limit[0] > limit[10] && limit[10] > limit[20]);
}
