//! Error-free time arithmetic for the event loop.
//!
//! Event times are running sums of interarrival times and completion times are
//! `clock + remaining`. In plain `f64` each of those sums drops up to half an
//! ulp of a number near the horizon, and over 10^6 events the dropped bits add
//! up to more than the 1e-9 work-conservation budget. [`Instant`] keeps the
//! rounding error of every addition in a second word (TwoSum), and [`KahanSum`]
//! does the same for the work and idleness accumulators.

use std::cmp::Ordering;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// A point in simulated time held as an unevaluated sum `hi + lo`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Instant {
    hi: f64,
    lo: f64,
}

impl Instant {
    pub const ZERO: Instant = Instant { hi: 0.0, lo: 0.0 };
    pub const INFINITY: Instant = Instant {
        hi: f64::INFINITY,
        lo: 0.0,
    };

    pub fn from_f64(t: f64) -> Self {
        Instant { hi: t, lo: 0.0 }
    }

    pub fn as_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn is_finite(self) -> bool {
        self.hi.is_finite()
    }

    /// `self + dt`, exact up to the second word.
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, dt: f64) -> Self {
        if !self.hi.is_finite() || !dt.is_finite() {
            return Instant {
                hi: self.hi + dt,
                lo: 0.0,
            };
        }
        let (s, e) = two_sum(self.hi, dt);
        let (hi, lo) = two_sum(s, e + self.lo);
        Instant { hi, lo }
    }

    /// `self - earlier` as a plain duration.
    pub fn since(self, earlier: Instant) -> f64 {
        if !self.hi.is_finite() {
            return f64::INFINITY;
        }
        let (s, e) = two_sum(self.hi, -earlier.hi);
        s + (e + (self.lo - earlier.lo))
    }
}

impl PartialEq for Instant {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Instant {}

impl PartialOrd for Instant {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Instant {
    fn cmp(&self, other: &Self) -> Ordering {
        self.hi
            .total_cmp(&other.hi)
            .then_with(|| self.lo.total_cmp(&other.lo))
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }

    /// The pair as an [`Instant`]-style two-word value, for exact differences.
    pub fn as_instant(&self) -> Instant {
        Instant::ZERO.add(self.sum).add(self.comp)
    }
}
