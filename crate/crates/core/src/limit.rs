//! Limit objects of the heavy-traffic second-order analysis.
//!
//! * [`cov_j`], [`cov_y`], [`cov_z`]: covariances of the Gaussian limit `J*`
//!   and of its two independent components. `cov_j` integrates the products of
//!   survival functions in one pass over `x`; `cov_z` integrates
//!   `(ℓ - y1) ∧ (k - y2)` against `dG ⊗ dG` directly (atom sums plus
//!   Gauss–Legendre on density pieces). The two routes meet in the identity
//!   `cov_j = cov_z + cov_y(y* - y1, y1, y* - y2, y2)`.
//! * [`theta_surrogate`] and the stationary, lateness-mixture and Laplace laws
//!   built on it.
//! * [`LimitSampler`]: joint draws of `(W*, F*, J*)` and the three residual
//!   limits.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dist::{ArrivalLaw, LeadTimeLaw, ServiceLaw};
use crate::error::{Error, Result};
use crate::quadrature::integrate_piecewise;
use crate::rng::Stream;

/// Largest grid a [`LimitSampler`] accepts.
pub const MAX_GRID: usize = 512;
const JITTER: f64 = 1e-10;
const PSD_TOL: f64 = 1e-8;

/// Primitive rates and standard deviations feeding every limit formula.
///
/// `lambda`, `mu`, `alpha`, `beta` are the values substituted into the limit
/// formulas; when a single prelimit system is studied they equal the
/// prelimit `*_n` values. `gamma` is the drift `√n (1 - ρ⁽ⁿ⁾)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitParams {
    pub lambda: f64,
    pub mu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda_n: f64,
    pub mu_n: f64,
    pub alpha_n: f64,
    pub beta_n: f64,
}

impl LimitParams {
    /// Parameters of a single prelimit system with scaling index `n`.
    pub fn from_laws(arrival: &ArrivalLaw, service: &ServiceLaw, n: f64) -> Self {
        Self::from_prelimit(
            arrival.rate(),
            service.rate(),
            arrival.std_dev(),
            service.std_dev(),
            n,
        )
    }

    pub fn from_prelimit(lambda_n: f64, mu_n: f64, alpha_n: f64, beta_n: f64, n: f64) -> Self {
        LimitParams {
            lambda: lambda_n,
            mu: mu_n,
            alpha: alpha_n,
            beta: beta_n,
            gamma: n.sqrt() * (1.0 - lambda_n / mu_n),
            lambda_n,
            mu_n,
            alpha_n,
            beta_n,
        }
    }

    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    pub fn rho_n(&self) -> f64 {
        self.lambda_n / self.mu_n
    }

    /// Variance per unit time of the netput Brownian motion, `λ(α²ρ² + β²)`.
    pub fn netput_variance(&self) -> f64 {
        let rho = self.rho();
        self.lambda * (self.alpha * self.alpha * rho * rho + self.beta * self.beta)
    }

    fn netput_variance_n(&self) -> f64 {
        let rho = self.rho_n();
        self.lambda_n * (self.alpha_n * self.alpha_n * rho * rho + self.beta_n * self.beta_n)
    }

    /// Decay rate of the stationary scaled workload `W*`, `2γ / (λ(α²ρ² + β²))`.
    pub fn scaled_workload_rate(&self) -> Result<f64> {
        if !(self.gamma > 0.0) {
            return Err(Error::Domain(format!(
                "stationary workload needs a positive drift, got gamma = {}",
                self.gamma
            )));
        }
        Ok(2.0 * self.gamma / self.netput_variance())
    }
}

fn check_below_y_star(law: &LeadTimeLaw, ys: &[f64]) -> Result<()> {
    match ys.iter().find(|&&y| y > law.y_star()) {
        Some(y) => Err(Error::Domain(format!(
            "y = {y} lies above y* = {}",
            law.y_star()
        ))),
        None => Ok(()),
    }
}

fn shifted_knots(law: &LeadTimeLaw, shifts: &[f64]) -> Vec<f64> {
    shifts
        .iter()
        .flat_map(|&s| law.knots().iter().map(move |&k| k - s))
        .collect()
}

/// Covariance `E[J*(y1) J*(y2)]` of the Gaussian limit process.
pub fn cov_j(y1: f64, y2: f64, params: &LimitParams, law: &LeadTimeLaw) -> Result<f64> {
    check_below_y_star(law, &[y1, y2])?;
    let (lo, hi) = if y1 <= y2 { (y1, y2) } else { (y2, y1) };
    let LimitParams {
        lambda,
        mu,
        alpha,
        beta,
        ..
    } = *params;
    let rho = params.rho();
    let arrival_coef = lambda * alpha * alpha * rho * rho;
    let integrand = |x: f64| {
        let s_lo = law.survival(lo + x);
        let s_hi = law.survival(hi + x);
        arrival_coef * s_lo * s_hi + lambda * ((1.0 - s_lo) / (mu * mu) + beta * beta) * s_hi
    };
    Ok(integrate_piecewise(
        integrand,
        0.0,
        law.y_star() - hi,
        shifted_knots(law, &[lo, hi]),
    ))
}

/// Covariance of the service/lead-time field `Y` at `(s1, y1)`, `(s2, y2)`.
pub fn cov_y(
    s1: f64,
    y1: f64,
    s2: f64,
    y2: f64,
    params: &LimitParams,
    law: &LeadTimeLaw,
) -> Result<f64> {
    if !(s1 >= 0.0 && s2 >= 0.0) {
        return Err(Error::Domain(format!(
            "cov_Y needs s >= 0, got ({s1}, {s2})"
        )));
    }
    let (lo, hi) = (y1.min(y2), y1.max(y2));
    let LimitParams {
        lambda, mu, beta, ..
    } = *params;
    let integrand =
        |x: f64| lambda * (law.cdf(lo + x) / (mu * mu) + beta * beta) * law.survival(hi + x);
    Ok(integrate_piecewise(
        integrand,
        0.0,
        s1.min(s2),
        shifted_knots(law, &[lo, hi]),
    ))
}

/// Covariance of the arrival-driven process `Z`:
/// `λα²ρ² ∬ (ℓ - y1) ∧ (k - y2) dG(ℓ) dG(k)` over `[y1, y*] × [y2, y*]`.
pub fn cov_z(y1: f64, y2: f64, params: &LimitParams, law: &LeadTimeLaw) -> Result<f64> {
    check_below_y_star(law, &[y1, y2])?;
    let rho = params.rho();
    let coef = params.lambda * params.alpha * params.alpha * rho * rho;

    // ∫_{[y2, y*]} (c ∧ (k - y2)) dG(k) for c >= 0
    let inner = |c: f64| -> f64 {
        let atoms: f64 = law
            .atoms()
            .iter()
            .filter(|a| a.0 >= y2)
            .map(|&(k, m)| m * c.min(k - y2))
            .sum();
        let pieces: f64 = law
            .pieces()
            .iter()
            .map(|p| {
                p.density * integrate_piecewise(|k| c.min(k - y2), p.from.max(y2), p.to, [y2 + c])
            })
            .sum();
        atoms + pieces
    };
    // outer breaks: where ℓ - y1 crosses a k-side breakpoint minus y2
    let outer_breaks: Vec<f64> = law.knots().iter().map(|&k| y1 + (k - y2)).collect();

    let atoms: f64 = law
        .atoms()
        .iter()
        .filter(|a| a.0 >= y1)
        .map(|&(l, m)| m * inner(l - y1))
        .sum();
    let pieces: f64 = law
        .pieces()
        .iter()
        .map(|p| {
            p.density
                * integrate_piecewise(
                    |l| inner(l - y1),
                    p.from.max(y1),
                    p.to,
                    outer_breaks.iter().copied(),
                )
        })
        .sum();
    Ok(coef * (atoms + pieces))
}

/// Covariance matrix of `J*` on a grid.
pub fn cov_j_matrix(grid: &[f64], params: &LimitParams, law: &LeadTimeLaw) -> Result<DMatrix<f64>> {
    check_below_y_star(law, grid)?;
    let m = grid.len();
    let mut out = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let v = cov_j(grid[i], grid[j], params, law)?;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Surrogate decay rate `θ⁽ⁿ⁾ = 2(1 - ρ⁽ⁿ⁾) / (λ⁽ⁿ⁾[(α⁽ⁿ⁾ρ⁽ⁿ⁾)² + (β⁽ⁿ⁾)²])`.
pub fn theta_surrogate(params: &LimitParams) -> Result<f64> {
    let rho = params.rho_n();
    if !(rho < 1.0) {
        return Err(Error::Domain(format!("theta needs rho_n < 1, got {rho}")));
    }
    Ok(2.0 * (1.0 - rho) / params.netput_variance_n())
}

/// `P[W > w]` under the exponential stationary approximation.
pub fn stationary_workload_tail(params: &LimitParams, w: f64) -> Result<f64> {
    if !(w >= 0.0) {
        return Err(Error::Domain(format!("tail needs w >= 0, got {w}")));
    }
    Ok((-theta_surrogate(params)? * w).exp())
}

/// Approximate law of predicted-minus-actual lateness: an atom at zero plus a
/// centered normal component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatenessMixture {
    pub atom_mass: f64,
    pub continuous_mass: f64,
    pub variance: f64,
}

impl LatenessMixture {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Mixture for unscaled lead time `lead = √n·y*`.
pub fn lateness_mixture(params: &LimitParams, lead: f64) -> Result<LatenessMixture> {
    if !(lead > 0.0) {
        return Err(Error::Domain(format!(
            "mixture needs a positive lead time, got {lead}"
        )));
    }
    let theta = theta_surrogate(params)?;
    let continuous_mass = (-theta * lead).exp();
    Ok(LatenessMixture {
        atom_mass: 1.0 - continuous_mass,
        continuous_mass,
        variance: 2.0 * (1.0 - params.rho_n()) * lead / theta,
    })
}

/// Scale `√(1 - ρ⁽ⁿ⁾) / θ⁽ⁿ⁾` of the frontier-prediction Laplace law.
pub fn laplace_scale(params: &LimitParams) -> Result<f64> {
    Ok((1.0 - params.rho_n()).sqrt() / theta_surrogate(params)?)
}

/// Laplace density of the frontier-prediction error.
pub fn laplace_density(params: &LimitParams, x: f64) -> Result<f64> {
    let theta = theta_surrogate(params)?;
    let root = (1.0 - params.rho_n()).sqrt();
    Ok(theta / (2.0 * root) * (-x.abs() * theta / root).exp())
}

/// One joint draw from the limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSample {
    pub w_star: f64,
    pub f_star: f64,
    /// `J*` on the sampler grid.
    pub j_path: Vec<f64>,
    /// `J*(y ∨ F*)` on the grid.
    pub frontier_residual: Vec<f64>,
    /// `J*(y) 1{F* <= y}` on the grid.
    pub workload_residual: Vec<f64>,
    /// `J*(F*) / (1 - G(F*))`.
    pub frontier_inverse_residual: f64,
}

/// Reusable sampler: factorizes `cov_J` on the grid once.
#[derive(Debug, Clone)]
pub struct LimitSampler {
    law: LeadTimeLaw,
    grid: Vec<f64>,
    factor: DMatrix<f64>,
    workload: Exp<f64>,
}

impl LimitSampler {
    pub fn new(params: &LimitParams, law: &LeadTimeLaw, grid: &[f64]) -> Result<Self> {
        if grid.is_empty() || grid.len() > MAX_GRID {
            return Err(Error::Domain(format!(
                "grid size {} not in 1..={MAX_GRID}",
                grid.len()
            )));
        }
        if !grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Domain("grid must be strictly increasing".into()));
        }
        let cov = cov_j_matrix(grid, params, law)?;
        let factor = factorize(cov)?;
        let rate = params.scaled_workload_rate()?;
        Ok(LimitSampler {
            law: law.clone(),
            grid: grid.to_vec(),
            factor,
            workload: Exp::new(rate).map_err(|e| Error::Numeric(e.to_string()))?,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// `J*` at an off-grid point by linear interpolation, clamped at the ends.
    fn interpolate(&self, path: &[f64], y: f64) -> f64 {
        let g = &self.grid;
        if y <= g[0] {
            return path[0];
        }
        if y >= g[g.len() - 1] {
            return path[g.len() - 1];
        }
        let i = g.partition_point(|&x| x <= y);
        let (x0, x1) = (g[i - 1], g[i]);
        let w = (y - x0) / (x1 - x0);
        path[i - 1] * (1.0 - w) + path[i] * w
    }

    pub fn draw(&self, stream: &mut Stream) -> LimitSample {
        let w_star = self.workload.sample(stream);
        let f_star = self.law.h_inverse(w_star).expect("w* >= 0");
        let z = DVector::from_iterator(
            self.grid.len(),
            (0..self.grid.len()).map(|_| stream.sample(StandardNormal)),
        );
        let j_path: Vec<f64> = (&self.factor * z).iter().copied().collect();
        let j_at_f = self.interpolate(&j_path, f_star);
        let frontier_residual = self
            .grid
            .iter()
            .zip(&j_path)
            .map(|(&y, &j)| if y >= f_star { j } else { j_at_f })
            .collect();
        let workload_residual = self
            .grid
            .iter()
            .zip(&j_path)
            .map(|(&y, &j)| if f_star <= y { j } else { 0.0 })
            .collect();
        let surv = self.law.survival(f_star);
        let frontier_inverse_residual = if surv > 0.0 { j_at_f / surv } else { 0.0 };
        LimitSample {
            w_star,
            f_star,
            j_path,
            frontier_residual,
            workload_residual,
            frontier_inverse_residual,
        }
    }
}

/// Draw one limit sample on `grid`.
pub fn sample_limit_residuals(
    params: &LimitParams,
    law: &LeadTimeLaw,
    grid: &[f64],
    stream: &mut Stream,
) -> Result<LimitSample> {
    Ok(LimitSampler::new(params, law, grid)?.draw(stream))
}

/// Lower-triangular `L` with `L Lᵀ ≈ cov`.
fn factorize(cov: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = cov.diagonal().iter().fold(1.0f64, |m, &d| m.max(d.abs()));
    let eig = cov.clone().symmetric_eigen();
    let min_eig = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_TOL * scale {
        return Err(Error::Numeric(format!(
            "covariance not positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(ch.l());
    }
    let n = cov.nrows();
    let jittered = cov + DMatrix::identity(n, n) * (JITTER * scale);
    if let Some(ch) = jittered.cholesky() {
        return Ok(ch.l());
    }
    // Fall back to the symmetric square root with clipped eigenvalues.
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals))
}
