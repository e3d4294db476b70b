//! Exactly mergeable accumulators and the deterministic map-reduce driver.
//!
//! Sums are kept in fixed point (`i128`, scale 2⁻³²), so merging partial
//! results is associative and commutative bit for bit and the reduction tree
//! chosen by the thread pool cannot change the outcome.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

const SCALE: f64 = 4_294_967_296.0;

/// Samples drawn per independent RNG stream in Liouville-sampling runs.
pub const UNIT_SIZE: u64 = 10_000;

pub trait Mergeable: Default + Send {
    fn merge(&mut self, other: Self);
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedSum(pub i128);

impl FixedSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        debug_assert!(x.is_finite());
        self.0 = self.0.saturating_add((x * SCALE).round() as i128);
    }

    pub fn value(&self) -> f64 {
        self.0 as f64 / SCALE
    }
}

impl Mergeable for FixedSum {
    fn merge(&mut self, other: Self) {
        self.0 = self.0.saturating_add(other.0);
    }
}

/// Count, sum and sum of squares of a scalar.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Moments {
    pub count: u64,
    pub sum: FixedSum,
    pub sum_sq: FixedSum,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        self.sum.add(x);
        self.sum_sq.add(x * x);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        self.sum.value() / self.count as f64
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        let m = self.mean();
        (self.sum_sq.value() / self.count as f64 - m * m).max(0.0)
    }

    pub fn stderr(&self) -> f64 {
        if self.count < 2 {
            return f64::NAN;
        }
        (self.variance() / (self.count - 1) as f64).sqrt()
    }
}

impl Mergeable for Moments {
    fn merge(&mut self, other: Self) {
        self.count += other.count;
        self.sum.merge(other.sum);
        self.sum_sq.merge(other.sum_sq);
    }
}

impl<T: Mergeable + Clone> Mergeable for Vec<T> {
    fn merge(&mut self, other: Self) {
        if self.is_empty() {
            *self = other;
            return;
        }
        if other.is_empty() {
            return;
        }
        assert_eq!(self.len(), other.len(), "merging accumulators of different shape");
        for (a, b) in self.iter_mut().zip(other) {
            a.merge(b);
        }
    }
}

impl Mergeable for u64 {
    fn merge(&mut self, other: Self) {
        *self += other;
    }
}

/// RNG for stream `unit` of `seed`.
pub fn unit_rng(seed: u64, unit: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(unit);
    rng
}

/// Number of units covering `n` samples, and the size of unit `k`.
pub fn units_for(n: u64, unit_size: u64) -> u64 {
    n.div_ceil(unit_size)
}

pub fn unit_len(n: u64, unit_size: u64, k: u64) -> u64 {
    unit_size.min(n - k * unit_size)
}

/// Maps every unit index in parallel and merges the results.
pub fn map_reduce<A, F>(units: u64, f: F) -> A
where
    A: Mergeable,
    F: Fn(u64) -> A + Sync + Send,
{
    (0..units).into_par_iter().map(f).reduce(A::default, |mut a, b| {
        a.merge(b);
        a
    })
}
