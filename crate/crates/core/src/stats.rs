//! Empirical distributions and Kolmogorov–Smirnov distances.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Laplace, Normal};

use crate::error::{Error, Result};

/// A distribution function usable as a KS reference.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;

    /// `F(x-)`; equal to `cdf` for continuous laws.
    fn cdf_left(&self, x: f64) -> f64 {
        self.cdf(x)
    }
}

/// Any closure `f64 -> f64` is a continuous reference.
pub struct FnCdf<F>(pub F);

impl<F: Fn(f64) -> f64> Cdf for FnCdf<F> {
    fn cdf(&self, x: f64) -> f64 {
        (self.0)(x)
    }
}

/// A normal law `N(mean, variance)`.
#[derive(Debug, Clone)]
pub struct NormalLaw(Normal);

impl NormalLaw {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        Normal::new(mean, variance.sqrt())
            .map(NormalLaw)
            .map_err(|e| Error::Domain(format!("normal law: {e}")))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.0.inverse_cdf(p)
    }
}

impl Cdf for NormalLaw {
    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }
}

/// A centered Laplace law with scale `b`, density `exp(-|x|/b) / (2b)`.
#[derive(Debug, Clone)]
pub struct LaplaceLaw(Laplace);

impl LaplaceLaw {
    pub fn new(scale: f64) -> Result<Self> {
        Laplace::new(0.0, scale)
            .map(LaplaceLaw)
            .map_err(|e| Error::Domain(format!("laplace law: {e}")))
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.0.inverse_cdf(p)
    }
}

impl Cdf for LaplaceLaw {
    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }
}

/// Sorted sample values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain(
                "empirical distribution needs at least one sample".into(),
            ));
        }
        if let Some(x) = values.iter().find(|x| x.is_nan()) {
            return Err(Error::Domain(format!("sample contains {x}")));
        }
        values.sort_by(f64::total_cmp);
        Ok(EmpiricalDistribution { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Unbiased sample variance; zero for a single value.
    pub fn variance(&self) -> f64 {
        let m = self.len();
        if m < 2 {
            return 0.0;
        }
        let mean = self.mean();
        self.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        self.std_dev() / (self.len() as f64).sqrt()
    }

    /// Linear-interpolation quantile (Hyndman–Fan type 7).
    pub fn quantile(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let h = (self.len() - 1) as f64 * p;
        let lo = h.floor() as usize;
        let hi = h.ceil() as usize;
        self.values[lo] + (h - lo as f64) * (self.values[hi] - self.values[lo])
    }

    /// Fraction of values `<= x`.
    pub fn ecdf(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Fraction of values `>= x`.
    pub fn fraction_at_least(&self, x: f64) -> f64 {
        1.0 - self.values.partition_point(|&v| v < x) as f64 / self.len() as f64
    }

    /// `sup_x |F_m(x) - F(x)|`.
    pub fn ks_statistic(&self, reference: &impl Cdf) -> f64 {
        ks_statistic(self, reference)
    }

    /// `(empirical, theoretical)` quantile pairs at plotting positions
    /// `(i - 1/2)/m`.
    pub fn qq_pairs(&self, quantile: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        let m = self.len() as f64;
        self.values
            .iter()
            .enumerate()
            .map(|(i, &x)| (x, quantile((i as f64 + 0.5) / m)))
            .collect()
    }
}

impl Cdf for EmpiricalDistribution {
    fn cdf(&self, x: f64) -> f64 {
        self.ecdf(x)
    }

    fn cdf_left(&self, x: f64) -> f64 {
        self.values.partition_point(|&v| v < x) as f64 / self.len() as f64
    }
}

/// Sup-norm distance between the ECDF of `emp` and `reference`.
pub fn ks_statistic(emp: &EmpiricalDistribution, reference: &impl Cdf) -> f64 {
    let m = emp.len() as f64;
    emp.values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let above = (i + 1) as f64 / m - reference.cdf(x);
            let below = reference.cdf_left(x) - i as f64 / m;
            above.max(below)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(m: usize) -> f64 {
    1.63 / (m as f64).sqrt()
}

/// Binomial standard error `√(p(1-p)/m)`.
pub fn binomial_se(p: f64, m: usize) -> f64 {
    (p * (1.0 - p) / m as f64).sqrt()
}
