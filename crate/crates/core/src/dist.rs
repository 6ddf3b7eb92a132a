//! Interarrival, service and lead-time laws, plus the profile function `H`.
//!
//! The lead-time law `G` is a finite set of atoms plus piecewise-constant
//! density pieces, so `1 - G` is piecewise linear between breakpoints and
//! `H(y) = ∫_y^{y*} (1 - G)` is piecewise quadratic. Both are evaluated in
//! closed form from tables built once at construction.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::Stream;

const MASS_TOL: f64 = 1e-12;

/// Law of the interarrival times `u_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalLaw {
    /// Poisson arrivals with the given rate.
    Exponential {
        rate: f64,
    },
    Deterministic {
        interval: f64,
    },
    /// Interarrival uniform on `[low, high]`, `low > 0`.
    Uniform {
        low: f64,
        high: f64,
    },
    /// No customer ever arrives.
    None,
}

impl ArrivalLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ArrivalLaw::Exponential { rate } => rate.is_finite() && rate > 0.0,
            ArrivalLaw::Deterministic { interval } => interval.is_finite() && interval > 0.0,
            ArrivalLaw::Uniform { low, high } => {
                low.is_finite() && high.is_finite() && 0.0 < low && low <= high
            }
            ArrivalLaw::None => true,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(
                "arrival law",
                format!("{self:?}: support must be strictly positive"),
            ))
        }
    }

    /// Mean interarrival time `1/λ`.
    pub fn mean(&self) -> f64 {
        match *self {
            ArrivalLaw::Exponential { rate } => 1.0 / rate,
            ArrivalLaw::Deterministic { interval } => interval,
            ArrivalLaw::Uniform { low, high } => 0.5 * (low + high),
            ArrivalLaw::None => f64::INFINITY,
        }
    }

    /// Arrival rate `λ`.
    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    /// Standard deviation `α` of an interarrival time.
    pub fn std_dev(&self) -> f64 {
        match *self {
            ArrivalLaw::Exponential { rate } => 1.0 / rate,
            ArrivalLaw::Deterministic { .. } => 0.0,
            ArrivalLaw::Uniform { low, high } => (high - low) / 12f64.sqrt(),
            ArrivalLaw::None => 0.0,
        }
    }

    pub fn sample(&self, stream: &mut Stream) -> f64 {
        match *self {
            ArrivalLaw::Exponential { rate } => {
                Exp::new(rate).expect("validated rate").sample(stream)
            }
            ArrivalLaw::Deterministic { interval } => interval,
            ArrivalLaw::Uniform { low, high } => sample_uniform(stream, low, high),
            ArrivalLaw::None => f64::INFINITY,
        }
    }
}

/// Law of the service requirements `v_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ServiceLaw {
    Exponential {
        rate: f64,
    },
    /// Shape/scale parameterization: mean `shape * scale`.
    Gamma {
        shape: f64,
        scale: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    Deterministic {
        value: f64,
    },
}

impl ServiceLaw {
    /// Exponential(1), the first of the three unit-mean service laws.
    pub const EXPONENTIAL_UNIT: ServiceLaw = ServiceLaw::Exponential { rate: 1.0 };
    /// Gamma(2, 0.5): mean 1, variance 0.5.
    pub const GAMMA_UNIT: ServiceLaw = ServiceLaw::Gamma {
        shape: 2.0,
        scale: 0.5,
    };
    /// Uniform[0.5, 1.5]: mean 1, variance 1/12.
    pub const UNIFORM_UNIT: ServiceLaw = ServiceLaw::Uniform {
        low: 0.5,
        high: 1.5,
    };

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ServiceLaw::Exponential { rate } => rate.is_finite() && rate > 0.0,
            ServiceLaw::Gamma { shape, scale } => {
                shape.is_finite() && scale.is_finite() && shape > 0.0 && scale > 0.0
            }
            ServiceLaw::Uniform { low, high } => {
                low.is_finite() && high.is_finite() && 0.0 <= low && low <= high
            }
            ServiceLaw::Deterministic { value } => value.is_finite() && value >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(
                "service law",
                format!("{self:?}: support must be nonnegative"),
            ))
        }
    }

    /// Mean service requirement `1/μ`.
    pub fn mean(&self) -> f64 {
        match *self {
            ServiceLaw::Exponential { rate } => 1.0 / rate,
            ServiceLaw::Gamma { shape, scale } => shape * scale,
            ServiceLaw::Uniform { low, high } => 0.5 * (low + high),
            ServiceLaw::Deterministic { value } => value,
        }
    }

    pub fn rate(&self) -> f64 {
        1.0 / self.mean()
    }

    /// Standard deviation `β`.
    pub fn std_dev(&self) -> f64 {
        match *self {
            ServiceLaw::Exponential { rate } => 1.0 / rate,
            ServiceLaw::Gamma { shape, scale } => shape.sqrt() * scale,
            ServiceLaw::Uniform { low, high } => (high - low) / 12f64.sqrt(),
            ServiceLaw::Deterministic { .. } => 0.0,
        }
    }

    pub fn variance(&self) -> f64 {
        self.std_dev().powi(2)
    }

    pub fn sample(&self, stream: &mut Stream) -> f64 {
        match *self {
            ServiceLaw::Exponential { rate } => {
                Exp::new(rate).expect("validated rate").sample(stream)
            }
            ServiceLaw::Gamma { shape, scale } => Gamma::new(shape, scale)
                .expect("validated gamma")
                .sample(stream),
            ServiceLaw::Uniform { low, high } => sample_uniform(stream, low, high),
            ServiceLaw::Deterministic { value } => value,
        }
    }
}

fn sample_uniform(stream: &mut Stream, low: f64, high: f64) -> f64 {
    if low == high {
        low
    } else {
        Uniform::new_inclusive(low, high)
            .expect("validated bounds")
            .sample(stream)
    }
}

/// Serialized description of a lead-time law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeadTimeSpec {
    /// Every customer gets the same scaled lead time `y_star`.
    Constant { y_star: f64 },
    /// Uniform density on `[low, high]`.
    Uniform { low: f64, high: f64 },
    /// Atoms `[location, mass]` plus density pieces `[from, to, density]`.
    Mixed {
        #[serde(default)]
        atoms: Vec<(f64, f64)>,
        #[serde(default)]
        pieces: Vec<(f64, f64, f64)>,
    },
}

/// A piece of constant density on `[from, to)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityPiece {
    pub from: f64,
    pub to: f64,
    pub density: f64,
}

impl DensityPiece {
    pub fn mass(&self) -> f64 {
        self.density * (self.to - self.from)
    }
}

/// The scaled lead-time distribution `G` with finite right endpoint `y*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LeadTimeSpec", into = "LeadTimeSpec")]
pub struct LeadTimeLaw {
    spec: LeadTimeSpec,
    atoms: Vec<(f64, f64)>,
    pieces: Vec<DensityPiece>,
    y_star: f64,
    // Breakpoints of 1 - G, the right-continuous survival at each one, the
    // slope of 1 - G just to the right of it, and H at each breakpoint.
    knots: Vec<f64>,
    survival: Vec<f64>,
    slope: Vec<f64>,
    h_at_knot: Vec<f64>,
    // Cumulative component masses for sampling: atoms first, then pieces.
    cumulative: Vec<f64>,
}

impl TryFrom<LeadTimeSpec> for LeadTimeLaw {
    type Error = Error;

    fn try_from(spec: LeadTimeSpec) -> Result<Self> {
        LeadTimeLaw::from_spec(spec)
    }
}

impl From<LeadTimeLaw> for LeadTimeSpec {
    fn from(law: LeadTimeLaw) -> Self {
        law.spec
    }
}

impl LeadTimeLaw {
    pub fn constant(y_star: f64) -> Result<Self> {
        Self::from_spec(LeadTimeSpec::Constant { y_star })
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        Self::from_spec(LeadTimeSpec::Uniform { low, high })
    }

    pub fn mixed(atoms: Vec<(f64, f64)>, pieces: Vec<(f64, f64, f64)>) -> Result<Self> {
        Self::from_spec(LeadTimeSpec::Mixed { atoms, pieces })
    }

    pub fn from_spec(spec: LeadTimeSpec) -> Result<Self> {
        let (atoms, pieces): (Vec<(f64, f64)>, Vec<DensityPiece>) = match &spec {
            LeadTimeSpec::Constant { y_star } => (vec![(*y_star, 1.0)], vec![]),
            LeadTimeSpec::Uniform { low, high } => {
                if !(low < high) {
                    return Err(invalid("lead-time law", "uniform law needs low < high"));
                }
                (
                    vec![],
                    vec![DensityPiece {
                        from: *low,
                        to: *high,
                        density: 1.0 / (high - low),
                    }],
                )
            }
            LeadTimeSpec::Mixed { atoms, pieces } => (
                atoms.clone(),
                pieces
                    .iter()
                    .map(|&(from, to, density)| DensityPiece { from, to, density })
                    .collect(),
            ),
        };
        Self::build(spec, atoms, pieces)
    }

    fn build(
        spec: LeadTimeSpec,
        atoms: Vec<(f64, f64)>,
        pieces: Vec<DensityPiece>,
    ) -> Result<Self> {
        for &(y, m) in &atoms {
            if !y.is_finite() || !m.is_finite() || m < 0.0 {
                return Err(invalid("lead-time law", format!("bad atom ({y}, {m})")));
            }
        }
        for p in &pieces {
            if !p.from.is_finite()
                || !p.to.is_finite()
                || !(p.from < p.to)
                || !p.density.is_finite()
                || p.density < 0.0
            {
                return Err(invalid("lead-time law", format!("bad density piece {p:?}")));
            }
        }
        let atoms: Vec<(f64, f64)> = atoms.into_iter().filter(|a| a.1 > 0.0).collect();
        let pieces: Vec<DensityPiece> = pieces.into_iter().filter(|p| p.density > 0.0).collect();
        let total: f64 = atoms.iter().map(|a| a.1).sum::<f64>()
            + pieces.iter().map(DensityPiece::mass).sum::<f64>();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(invalid(
                "lead-time law",
                format!("total mass {total} differs from 1"),
            ));
        }

        let mut knots: Vec<f64> = atoms
            .iter()
            .map(|a| a.0)
            .chain(pieces.iter().flat_map(|p| [p.from, p.to]))
            .collect();
        knots.sort_by(f64::total_cmp);
        knots.dedup();
        let y_star = *knots.last().expect("nonempty law");

        let cdf_raw = |y: f64| -> f64 {
            let a: f64 = atoms.iter().filter(|a| a.0 <= y).map(|a| a.1).sum();
            let d: f64 = pieces
                .iter()
                .map(|p| p.density * (y.min(p.to) - p.from).max(0.0))
                .sum();
            a + d
        };
        let survival: Vec<f64> = knots
            .iter()
            .map(|&k| {
                if k >= y_star {
                    0.0
                } else {
                    (1.0 - cdf_raw(k)).max(0.0)
                }
            })
            .collect();
        let slope: Vec<f64> = knots
            .iter()
            .map(|&k| {
                pieces
                    .iter()
                    .filter(|p| p.from <= k && k < p.to)
                    .map(|p| p.density)
                    .sum()
            })
            .collect();
        let mut h_at_knot = vec![0.0; knots.len()];
        for i in (0..knots.len().saturating_sub(1)).rev() {
            let width = knots[i + 1] - knots[i];
            let s_left = survival[i];
            let s_right = (s_left - slope[i] * width).max(0.0);
            h_at_knot[i] = h_at_knot[i + 1] + width * 0.5 * (s_left + s_right);
        }

        let mut cumulative = Vec::with_capacity(atoms.len() + pieces.len());
        let mut acc = 0.0;
        for m in atoms
            .iter()
            .map(|a| a.1)
            .chain(pieces.iter().map(DensityPiece::mass))
        {
            acc += m;
            cumulative.push(acc);
        }

        Ok(LeadTimeLaw {
            spec,
            atoms,
            pieces,
            y_star,
            knots,
            survival,
            slope,
            h_at_knot,
            cumulative,
        })
    }

    pub fn spec(&self) -> &LeadTimeSpec {
        &self.spec
    }

    pub fn y_star(&self) -> f64 {
        self.y_star
    }

    /// Smallest point of the support of `G`.
    pub fn y_min(&self) -> f64 {
        self.knots[0]
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[DensityPiece] {
        &self.pieces
    }

    /// Breakpoints of `G` in increasing order, ending at `y*`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn is_constant(&self) -> bool {
        self.pieces.is_empty() && self.atoms.len() == 1
    }

    /// Index of the last knot `<= y`, or `None` below the support.
    fn segment(&self, y: f64) -> Option<usize> {
        let idx = self.knots.partition_point(|&k| k <= y);
        idx.checked_sub(1)
    }

    /// `1 - G(y)`.
    pub fn survival(&self, y: f64) -> f64 {
        if y >= self.y_star {
            return 0.0;
        }
        match self.segment(y) {
            None => 1.0,
            Some(i) => (self.survival[i] - self.slope[i] * (y - self.knots[i])).clamp(0.0, 1.0),
        }
    }

    /// `1 - G(y-)`.
    pub fn survival_left(&self, y: f64) -> f64 {
        if y > self.y_star {
            return 0.0;
        }
        let idx = self.knots.partition_point(|&k| k < y);
        match idx.checked_sub(1) {
            None => 1.0,
            Some(i) => (self.survival[i] - self.slope[i] * (y - self.knots[i])).clamp(0.0, 1.0),
        }
    }

    /// The distribution function `G(y)`.
    pub fn cdf(&self, y: f64) -> f64 {
        1.0 - self.survival(y)
    }

    /// `H(y) = ∫_y^{y*} (1 - G(η)) dη`, zero for `y >= y*`.
    pub fn h(&self, y: f64) -> f64 {
        if y >= self.y_star {
            return 0.0;
        }
        match self.segment(y) {
            None => self.h_at_knot[0] + (self.knots[0] - y),
            Some(i) => {
                let right = self.knots[i + 1];
                let s_y = self.survival[i] - self.slope[i] * (y - self.knots[i]);
                let s_end = (self.survival[i] - self.slope[i] * (right - self.knots[i])).max(0.0);
                self.h_at_knot[i + 1] + (right - y) * 0.5 * (s_y + s_end)
            }
        }
    }

    /// Inverse of `H` on `[0, ∞)`, with `H^{-1}(0) = y*`.
    pub fn h_inverse(&self, w: f64) -> Result<f64> {
        if !(w >= 0.0) {
            return Err(Error::Domain(format!("H^-1 needs w >= 0, got {w}")));
        }
        if w == 0.0 {
            return Ok(self.y_star);
        }
        let h0 = self.h_at_knot[0];
        if w >= h0 {
            return Ok(self.knots[0] - (w - h0));
        }
        // h_at_knot is decreasing; find i with h[i+1] <= w < h[i].
        let i = self.h_at_knot.partition_point(|&h| h > w) - 1;
        let (mut lo, mut hi) = (self.knots[i], self.knots[i + 1]);
        while hi - lo > 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.h(mid) > w {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Draw one scaled lead time from `G`.
    pub fn sample(&self, stream: &mut Stream) -> f64 {
        if self.is_constant() {
            return self.atoms[0].0;
        }
        let total = *self.cumulative.last().expect("nonempty law");
        let u = stream.random::<f64>() * total;
        let k = self
            .cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1);
        if k < self.atoms.len() {
            self.atoms[k].0
        } else {
            let p = self.pieces[k - self.atoms.len()];
            p.from + (p.to - p.from) * stream.random::<f64>()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamTag};
    use proptest::prelude::*;

    fn midpoint_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
        let h = (b - a) / steps as f64;
        (0..steps).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
    }

    fn test_laws() -> Vec<LeadTimeLaw> {
        vec![
            LeadTimeLaw::constant(3.0).unwrap(),
            LeadTimeLaw::uniform(0.0, 1.0).unwrap(),
            LeadTimeLaw::uniform(0.0, 2.0).unwrap(),
            LeadTimeLaw::mixed(vec![(0.5, 0.3), (2.0, 0.2)], vec![(-1.0, 1.0, 0.25)]).unwrap(),
        ]
    }

    #[test]
    fn constant_law_cdf_and_h() {
        let law = LeadTimeLaw::constant(3.0).unwrap();
        assert_eq!(law.cdf(2.9), 0.0);
        assert_eq!(law.cdf(3.0), 1.0);
        for y in [-10.0, 0.0, 1.5, 2.99, 3.0, 7.0] {
            assert!((law.h(y) - (3.0f64 - y).max(0.0)).abs() < 1e-12);
        }
        for w in [0.0, 0.1, 1.0, 17.0] {
            assert!((law.h_inverse(w).unwrap() - (3.0 - w)).abs() < 1e-12);
        }
    }

    #[test]
    fn uniform_law_values() {
        let law = LeadTimeLaw::uniform(0.0, 1.0).unwrap();
        assert!((law.cdf(0.5) - 0.5).abs() < 1e-15);
        // independent quadrature of ∫_0^1 (1 - η) dη
        let oracle = midpoint_integral(|x| 1.0 - x, 0.0, 1.0, 10_000);
        assert!((law.h(0.0) - oracle).abs() < 1e-10);
        assert!((law.h(0.0) - 0.5).abs() < 1e-15);
        // bisection oracle against h
        let (mut lo, mut hi) = (-1.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if law.h(mid) > 0.5 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((law.h_inverse(0.5).unwrap() - lo).abs() < 1e-10);
        assert!(law.h_inverse(0.5).unwrap().abs() < 1e-10);
    }

    #[test]
    fn y_star_endpoint() {
        for law in test_laws() {
            let ys = law.y_star();
            assert_eq!(law.cdf(ys), 1.0);
            assert!(law.cdf(ys - 1e-9) < 1.0);
            assert_eq!(law.h(ys), 0.0);
            assert_eq!(law.h_inverse(0.0).unwrap(), ys);
        }
    }

    #[test]
    fn mixed_law_matches_quadrature() {
        let law =
            LeadTimeLaw::mixed(vec![(0.5, 0.3), (2.0, 0.2)], vec![(-1.0, 1.0, 0.25)]).unwrap();
        assert_eq!(law.y_star(), 2.0);
        for y in [-3.0, -1.0, -0.3, 0.5, 0.7, 1.0, 1.5, 2.0] {
            let cuts: Vec<f64> = [y, -1.0, 0.5, 1.0, 2.0]
                .into_iter()
                .filter(|&c| c >= y)
                .collect();
            let oracle: f64 = cuts
                .windows(2)
                .map(|w| midpoint_integral(|x| law.survival(x), w[0], w[1], 100_000))
                .sum();
            assert!(
                (law.h(y) - oracle).abs() < 1e-8,
                "y={y}: {} vs {oracle}",
                law.h(y)
            );
        }
    }

    #[test]
    fn negative_w_rejected() {
        let law = LeadTimeLaw::constant(1.0).unwrap();
        assert!(matches!(law.h_inverse(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn bad_mass_rejected() {
        assert!(LeadTimeLaw::mixed(vec![(0.0, 0.5)], vec![]).is_err());
        assert!(LeadTimeLaw::uniform(1.0, 1.0).is_err());
    }

    #[test]
    fn linear_tail_below_support() {
        for law in test_laws() {
            let ymin = law.y_min();
            for d in [0.5, 3.0, 40.0] {
                assert!((law.h(ymin - d) - (law.h(ymin) + d)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn parameters_match_laws() {
        let trio = [
            ServiceLaw::EXPONENTIAL_UNIT,
            ServiceLaw::GAMMA_UNIT,
            ServiceLaw::UNIFORM_UNIT,
        ];
        for s in trio {
            assert!((s.mean() - 1.0).abs() < 1e-12);
        }
        assert!((ServiceLaw::GAMMA_UNIT.variance() - 0.5).abs() < 1e-12);
        assert!((ServiceLaw::UNIFORM_UNIT.variance() - 1.0 / 12.0).abs() < 1e-12);
        let a = ArrivalLaw::Exponential { rate: 0.96 };
        assert!((a.mean() - 1.0 / 0.96).abs() < 1e-12);
        assert!((a.std_dev() - 1.0 / 0.96).abs() < 1e-12);
    }

    #[test]
    fn deterministic_and_constant_samples() {
        let mut s = stream(1, 0, StreamTag::Service);
        assert_eq!(ServiceLaw::Deterministic { value: 1.0 }.sample(&mut s), 1.0);
        assert_eq!(LeadTimeLaw::constant(30.0).unwrap().sample(&mut s), 30.0);
    }

    #[test]
    fn exponential_sample_mean() {
        let law = ArrivalLaw::Exponential { rate: 0.96 };
        let mut s = stream(11, 0, StreamTag::Interarrival);
        let n = 1_000_000;
        let mean = (0..n).map(|_| law.sample(&mut s)).sum::<f64>() / n as f64;
        assert!((mean - law.mean()).abs() < 0.01 * law.mean());
    }

    #[test]
    fn lead_time_ecdf_matches_cdf() {
        let law =
            LeadTimeLaw::mixed(vec![(0.5, 0.3), (2.0, 0.2)], vec![(-1.0, 1.0, 0.25)]).unwrap();
        let mut s = stream(5, 0, StreamTag::LeadTime);
        let mut xs: Vec<f64> = (0..100_000).map(|_| law.sample(&mut s)).collect();
        xs.sort_by(f64::total_cmp);
        let m = xs.len() as f64;
        let mut d: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            // compare against both one-sided limits to handle atoms
            let upper = law.cdf(x);
            let lower = 1.0 - law.survival_left(x);
            d = d.max((i + 1) as f64 / m - upper).max(lower - i as f64 / m);
        }
        assert!(d < 0.01, "KS distance {d}");
    }

    #[test]
    fn serde_tagged_records() {
        let s: ServiceLaw =
            serde_json::from_str(r#"{"kind":"gamma","shape":2,"scale":0.5}"#).unwrap();
        assert_eq!(s, ServiceLaw::GAMMA_UNIT);
        let g: LeadTimeLaw = serde_json::from_str(r#"{"kind":"constant","y_star":30}"#).unwrap();
        assert_eq!(g.y_star(), 30.0);
        assert!(
            serde_json::from_str::<LeadTimeLaw>(r#"{"kind":"uniform","low":1,"high":0}"#).is_err()
        );
        assert!(serde_json::from_str::<ServiceLaw>(
            r#"{"kind":"gamma","shape":2,"scale":0.5,"x":1}"#
        )
        .is_err());
    }

    proptest! {
        #[test]
        fn h_monotone_lipschitz(law_idx in 0usize..4, a in -60.0f64..3.0, b in -60.0f64..3.0) {
            let law = &test_laws()[law_idx];
            let (y1, y2) = if a < b { (a, b) } else { (b, a) };
            let (y1, y2) = (y1.min(law.y_star()), y2.min(law.y_star()));
            let diff = law.h(y1) - law.h(y2);
            prop_assert!(diff >= -1e-12);
            prop_assert!(diff <= (y2 - y1) + 1e-12);
        }

        #[test]
        fn h_inverse_round_trip(law_idx in 0usize..4, e in -12.0f64..0.0) {
            let law = &test_laws()[law_idx];
            let w_max = law.h(law.y_star() - 50.0);
            let w = w_max * 10f64.powf(e);
            let y = law.h_inverse(w).unwrap();
            prop_assert!((law.h(y) - w).abs() <= 1e-10);
        }
    }
}
