//! Heavy-traffic scaling of snapshots and the second-order residuals.
//!
//! Time is divided by `n`, work and lead times by `√n`; residuals are the gaps
//! between scaled profile quantities and their collapse approximations,
//! magnified by `n^{1/4}`.

use crate::dist::LeadTimeLaw;
use crate::engine::Snapshot;
use crate::error::{Error, Result};

/// A snapshot viewed in heavy-traffic scale.
#[derive(Debug, Clone, Copy)]
pub struct ScaledSnapshot<'a> {
    snapshot: &'a Snapshot,
    n: f64,
    sqrt_n: f64,
    quarter_n: f64,
    /// Scaled time `time / n`.
    pub t: f64,
    pub w_hat: f64,
    pub f_hat: f64,
    pub c_hat: f64,
    pub i_hat: f64,
    pub q_hat: f64,
}

/// View `snapshot` (taken at raw time `n·t`) in scale `n`.
pub fn scale(snapshot: &Snapshot, n: f64) -> Result<ScaledSnapshot<'_>> {
    if !(n >= 1.0) || !n.is_finite() {
        return Err(Error::Domain(format!(
            "scaling index must be >= 1, got {n}"
        )));
    }
    let sqrt_n = n.sqrt();
    Ok(ScaledSnapshot {
        snapshot,
        n,
        sqrt_n,
        quarter_n: sqrt_n.sqrt(),
        t: snapshot.time / n,
        w_hat: snapshot.workload / sqrt_n,
        f_hat: snapshot.frontier / sqrt_n,
        c_hat: snapshot.current_lead / sqrt_n,
        i_hat: snapshot.idleness / sqrt_n,
        q_hat: snapshot.queue_len as f64 / sqrt_n,
    })
}

impl ScaledSnapshot<'_> {
    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn snapshot(&self) -> &Snapshot {
        self.snapshot
    }

    /// `n^{1/4}`.
    pub fn magnification(&self) -> f64 {
        self.quarter_n
    }

    /// Scaled work with scaled lead time strictly above `y`.
    pub fn workload_above(&self, y: f64) -> f64 {
        self.snapshot.workload_above(self.sqrt_n * y) / self.sqrt_n
    }

    /// Scaled arrived work with scaled lead time strictly above `y`.
    pub fn arrival_work_above(&self, y: f64) -> Result<f64> {
        Ok(self.snapshot.arrival_work_above(self.sqrt_n * y)? / self.sqrt_n)
    }

    /// `n^{1/4} [𝒲̂(y, ∞) - H(y ∨ F̂)]` on the grid.
    pub fn residual_vs_frontier(&self, law: &LeadTimeLaw, grid: &[f64]) -> Vec<(f64, f64)> {
        grid.iter()
            .map(|&y| {
                (
                    y,
                    self.quarter_n * (self.workload_above(y) - law.h(y.max(self.f_hat))),
                )
            })
            .collect()
    }

    /// `n^{1/4} [𝒲̂(y, ∞) - H(y ∨ H⁻¹(Ŵ))]` on the grid.
    pub fn residual_vs_workload(&self, law: &LeadTimeLaw, grid: &[f64]) -> Vec<(f64, f64)> {
        let approx_frontier = self.approximate_frontier(law);
        grid.iter()
            .map(|&y| {
                (
                    y,
                    self.quarter_n * (self.workload_above(y) - law.h(y.max(approx_frontier))),
                )
            })
            .collect()
    }

    /// `H⁻¹(Ŵ)`.
    pub fn approximate_frontier(&self, law: &LeadTimeLaw) -> f64 {
        law.h_inverse(self.w_hat.max(0.0))
            .expect("nonnegative workload")
    }

    /// `n^{1/4} [H⁻¹(Ŵ) - F̂]`.
    pub fn residual_frontier_inverse(&self, law: &LeadTimeLaw) -> f64 {
        self.quarter_n * (self.approximate_frontier(law) - self.f_hat)
    }

    /// `n^{1/4} 𝒲̂[Ĉ, F̂]`: scaled work whose lead times lie between the
    /// in-service lead time and the frontier, both ends included.
    pub fn collapse_mass(&self) -> f64 {
        let s = self.snapshot;
        let lo = s.current_deadline.unwrap_or(s.frontier_deadline);
        self.quarter_n * s.work_in_deadlines(lo, s.frontier_deadline) / self.sqrt_n
    }

    /// Empirical process `n^{1/4} [𝒱̂(y, ∞) - H(y)]` on the grid.
    pub fn empirical_process_j(&self, law: &LeadTimeLaw, grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        grid.iter()
            .map(|&y| Ok((y, self.quarter_n * (self.arrival_work_above(y)? - law.h(y)))))
            .collect()
    }
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn even_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => vec![],
        1 => vec![hi],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            let mut v: Vec<f64> = (0..points).map(|i| lo + step * i as f64).collect();
            v[points - 1] = hi;
            v
        }
    }
}

/// 101 points from `H⁻¹(4·workload_std)` up to `y*`.
pub fn default_grid(law: &LeadTimeLaw, workload_std: f64) -> Vec<f64> {
    let lo = law
        .h_inverse(4.0 * workload_std.max(0.0))
        .expect("nonnegative");
    let lo = if lo < law.y_star() {
        lo
    } else {
        law.y_star() - 1.0
    };
    even_grid(lo, law.y_star(), 101)
}

/// `k` points of `grid` at evenly spaced interior positions, excluding both
/// ends.
pub fn interior_points(grid: &[f64], k: usize) -> Vec<f64> {
    if grid.len() < 3 {
        return Vec::new();
    }
    let last = (grid.len() - 1) as f64;
    let mut idx: Vec<usize> = (1..=k)
        .map(|j| ((j as f64 * last / (k + 1) as f64).round() as usize).clamp(1, grid.len() - 2))
        .collect();
    idx.dedup();
    idx.into_iter().map(|i| grid[i]).collect()
}
