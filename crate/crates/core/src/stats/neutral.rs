//! Runs of consecutive long flights between the flat walls of a type II
//! corridor, started from Liouville-distributed phase points.

use serde::{Deserialize, Serialize};

use super::accum::{map_reduce, unit_len, unit_rng, units_for, Mergeable, UNIT_SIZE};
use crate::dynamics::{Billiard, FlightRecord};
use crate::error::{Error, Result};
use crate::geometry::BoundaryKind;

/// Fewer events than this at some `n` makes that ratio unreliable.
pub const MIN_EVENTS: u64 = 50;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NeutralAccum {
    /// `runs_at_least[n−1]`: draws whose first `n` flights all qualify.
    pub runs_at_least: Vec<u64>,
    pub total: u64,
    /// Largest `|ℓ_k − ℓ_0|` seen inside a run.
    pub max_spread: f64,
    /// Flights leaving a run, and how many fall outside `[ℓ_0, ℓ_0 + 1)`.
    pub exits: u64,
    pub exits_outside: u64,
    /// Largest `ℓ_exit − ℓ_0`.
    pub max_exit_excess: f64,
    pub min_exit_excess: f64,
    pub censored: u64,
}

impl Mergeable for NeutralAccum {
    fn merge(&mut self, o: Self) {
        if self.runs_at_least.is_empty() && self.total == 0 {
            *self = o;
            return;
        }
        if o.runs_at_least.is_empty() && o.total == 0 {
            return;
        }
        for (a, b) in self.runs_at_least.iter_mut().zip(&o.runs_at_least) {
            *a += b;
        }
        self.total += o.total;
        self.max_spread = self.max_spread.max(o.max_spread);
        self.exits += o.exits;
        self.exits_outside += o.exits_outside;
        self.max_exit_excess = self.max_exit_excess.max(o.max_exit_excess);
        self.min_exit_excess = self.min_exit_excess.min(o.min_exit_excess);
        self.censored += o.censored;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeutralRunStats {
    pub l: f64,
    pub n_max: usize,
    pub samples: u64,
    /// `P̂_n(L)` for `n = 1..=n_max`.
    pub probabilities: Vec<f64>,
    pub events: Vec<u64>,
    /// `P̂_n/P̂_1`; NaN where fewer than [`MIN_EVENTS`] events were seen.
    pub ratios: Vec<f64>,
    pub max_spread: f64,
    pub exits: u64,
    pub exits_outside: u64,
    pub max_exit_excess: f64,
    pub min_exit_excess: f64,
    pub censored: u64,
}

fn qualifies(f: &FlightRecord, l: f64) -> bool {
    f.length > l
        && f.corridor_class.is_oblique()
        && f.start_kind == BoundaryKind::Flat
        && f.end_kind == BoundaryKind::Flat
}

/// Estimates `P_n(L)`, the measure of phase points whose next `n` flights are
/// all longer than `L` and run between flat walls of an oblique corridor.
pub fn neutral_run_stats(b: &Billiard, samples: u64, l: f64, n_max: usize, seed: u64) -> Result<NeutralRunStats> {
    if n_max == 0 || samples == 0 {
        return Err(Error::InsufficientData("empty neutral-run budget".into()));
    }
    let max_len = 1e6;
    let acc: NeutralAccum = map_reduce(units_for(samples, UNIT_SIZE), |k| {
        let mut rng = unit_rng(seed, k);
        let mut acc = NeutralAccum {
            runs_at_least: vec![0; n_max],
            min_exit_excess: f64::INFINITY,
            ..Default::default()
        };
        for _ in 0..unit_len(samples, UNIT_SIZE, k) {
            acc.total += 1;
            let Ok(x) = b.sample_liouville(&mut rng) else { continue };
            let mut orbit = b.orbit(x, max_len);
            let mut run = 0usize;
            let mut first_len = 0.0;
            loop {
                let f = match orbit.step() {
                    Ok(v) => v,
                    Err(_) => {
                        acc.censored += 1;
                        break;
                    }
                };
                if qualifies(&f, l) {
                    if run == 0 {
                        first_len = f.length;
                    } else {
                        acc.max_spread = acc.max_spread.max((f.length - first_len).abs());
                    }
                    if run < n_max {
                        acc.runs_at_least[run] += 1;
                    }
                    run += 1;
                    continue;
                }
                if run > 0 {
                    let excess = f.length - first_len;
                    acc.exits += 1;
                    if !(0.0..1.0).contains(&excess) {
                        acc.exits_outside += 1;
                    }
                    acc.max_exit_excess = acc.max_exit_excess.max(excess);
                    acc.min_exit_excess = acc.min_exit_excess.min(excess);
                }
                break;
            }
        }
        acc
    });
    let p1 = acc.runs_at_least[0];
    let n = acc.total as f64;
    let probabilities: Vec<f64> = acc.runs_at_least.iter().map(|&c| c as f64 / n).collect();
    let ratios = acc
        .runs_at_least
        .iter()
        .map(|&c| {
            if c < MIN_EVENTS || p1 == 0 {
                f64::NAN
            } else {
                c as f64 / p1 as f64
            }
        })
        .collect();
    Ok(NeutralRunStats {
        l,
        n_max,
        samples: acc.total,
        probabilities,
        events: acc.runs_at_least,
        ratios,
        max_spread: acc.max_spread,
        exits: acc.exits,
        exits_outside: acc.exits_outside,
        max_exit_excess: acc.max_exit_excess,
        min_exit_excess: acc.min_exit_excess,
        censored: acc.censored,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ModelParams;
    use std::f64::consts::SQRT_2;

    #[test]
    fn runs_have_equal_lengths_and_thin_out() {
        let b = Billiard::new(ModelParams::wind_tree_rational(1, 1, SQRT_2 / 4.0, 0.05)).unwrap();
        let s = neutral_run_stats(&b, 2_000_000, 10.0, 4, 1).unwrap();
        assert!(s.events[0] > 100, "{:?}", s.events);
        assert!(s.events.windows(2).all(|w| w[1] <= w[0]));
        assert!(s.max_spread < 1e-10, "{}", s.max_spread);
        assert!(s.min_exit_excess >= -1e-9);
        assert!(s.ratios[0] == 1.0);
    }

    #[test]
    fn no_runs_without_type_two() {
        let b = Billiard::new(ModelParams::lorentz(0.3, 0.1)).unwrap();
        let s = neutral_run_stats(&b, 20_000, 10.0, 3, 1).unwrap();
        assert!(s.events.iter().all(|&e| e == 0));
        assert!(s.ratios.iter().all(|r| r.is_nan()));
    }
}
