//! Continuous-time displacement and the mean free path that links it to the
//! collision count.

use serde::{Deserialize, Serialize};

use super::accum::{map_reduce, unit_rng, FixedSum, Mergeable, Moments};
use crate::dynamics::Billiard;
use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Log-spaced sampling times per decade.
pub const CTIME_PER_DECADE: usize = 5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CtimeAccum {
    pub flight_len: FixedSum,
    pub flights: u64,
    /// `|x_t − x_0|²` at each sampling time.
    pub sq_t: Vec<Moments>,
    /// `|x_n − x_0|²` at the matched collision count.
    pub sq_n: Moments,
    pub trajectories: u64,
    pub censored: u64,
    pub discarded: u64,
}

impl Mergeable for CtimeAccum {
    fn merge(&mut self, o: Self) {
        self.flight_len.merge(o.flight_len);
        self.flights += o.flights;
        self.sq_t.merge(o.sq_t);
        self.sq_n.merge(o.sq_n);
        self.trajectories += o.trajectories;
        self.censored += o.censored;
        self.discarded += o.discarded;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtimeResult {
    /// Total flight length over number of flights.
    pub eta_hat: f64,
    pub t: Vec<f64>,
    /// `⟨|x_t − x_0|²⟩/(t·(ln t)²)`.
    pub ratio: Vec<f64>,
    pub ratio_stderr: Vec<f64>,
    /// Collision count matched to `t_max`: `round(t_max/η)`.
    pub n_matched: u64,
    /// `⟨|x_t − x_0|²⟩/(t (ln t)²)` at `t_max`.
    pub coeff_continuous: f64,
    /// `⟨|x_n − x_0|²⟩/(n (ln n)²)` at `n_matched`.
    pub coeff_discrete: f64,
    /// `coeff_continuous/coeff_discrete`, expected near `1/η`.
    pub coeff_ratio: f64,
    pub ensemble: u64,
    pub censored: u64,
    pub discarded: u64,
}

/// Sampling times: log-spaced from 10 to `t_max`, ending exactly at `t_max`.
pub fn ctime_grid(t_max: f64) -> Vec<f64> {
    let mut t = Vec::new();
    let mut k = CTIME_PER_DECADE as i64;
    loop {
        let v = 10f64.powf(k as f64 / CTIME_PER_DECADE as f64);
        if v >= t_max * (1.0 - 1e-12) {
            break;
        }
        t.push(v);
        k += 1;
    }
    t.push(t_max);
    t
}

/// Ensemble of `k` trajectories run to time `t_max`. The collision count
/// compared with `t_max` is `round(t_max/eta)`, with `eta` the predicted mean
/// free path.
pub fn ctime_rescale(b: &Billiard, k: u64, t_max: f64, eta: f64, max_len: f64, seed: u64) -> Result<CtimeResult> {
    if k < 2 || !(t_max > 10.0) || !(eta > 0.0) {
        return Err(Error::InsufficientData("continuous-time run needs k ≥ 2 and t_max > 10".into()));
    }
    let grid = ctime_grid(t_max);
    let n_matched = (t_max / eta).round().max(2.0) as u64;
    let acc: CtimeAccum = map_reduce(k, |i| {
        let mut acc = CtimeAccum {
            sq_t: vec![Moments::default(); grid.len()],
            trajectories: 1,
            ..Default::default()
        };
        let mut rng = unit_rng(seed, i);
        let Ok(x) = b.sample_liouville(&mut rng) else {
            acc.discarded = 1;
            return acc;
        };
        let mut orbit = b.orbit(x, max_len);
        let mut prev = Vec2::ZERO;
        let mut prev_t = 0.0;
        let mut g = 0;
        let mut sq_n = None;
        while g < grid.len() || sq_n.is_none() {
            let f = match orbit.step() {
                Ok(f) => f,
                Err(_) => {
                    acc.censored = 1;
                    return acc;
                }
            };
            let cur = orbit.displacement();
            while g < grid.len() && grid[g] <= orbit.time {
                let u = (grid[g] - prev_t) / f.length;
                let xt = prev + u * (cur - prev);
                acc.sq_t[g].push(xt.norm_sq());
                g += 1;
            }
            if orbit.n == n_matched {
                sq_n = Some(cur.norm_sq());
            }
            // Flights are only counted up to t_max so η̂ is a time average.
            if prev_t < t_max {
                acc.flight_len.add(f.length);
                acc.flights += 1;
            }
            prev = cur;
            prev_t = orbit.time;
        }
        acc.sq_n.push(sq_n.unwrap_or(0.0));
        acc
    });
    if acc.sq_n.count < 2 {
        return Err(Error::InsufficientData("no complete trajectories".into()));
    }
    let eta_hat = acc.flight_len.value() / acc.flights as f64;
    let norm = |t: f64| t * t.ln().powi(2);
    let ratio: Vec<f64> = grid.iter().zip(&acc.sq_t).map(|(&t, m)| m.mean() / norm(t)).collect();
    let ratio_stderr = grid.iter().zip(&acc.sq_t).map(|(&t, m)| m.stderr() / norm(t)).collect();
    let coeff_continuous = *ratio.last().unwrap();
    let coeff_discrete = acc.sq_n.mean() / norm(n_matched as f64);
    Ok(CtimeResult {
        eta_hat,
        t: grid,
        ratio,
        ratio_stderr,
        n_matched,
        coeff_continuous,
        coeff_discrete,
        coeff_ratio: coeff_continuous / coeff_discrete,
        ensemble: acc.trajectories,
        censored: acc.censored,
        discarded: acc.discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geometry_summary, ModelParams};
    use std::f64::consts::SQRT_2;

    #[test]
    fn grid_ends_at_t_max() {
        let g = ctime_grid(1e3);
        assert_eq!(g.first(), Some(&10.0));
        assert_eq!(g.last(), Some(&1e3));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(ctime_grid(1234.5).last(), Some(&1234.5));
    }

    #[test]
    fn short_run_is_consistent() {
        let p = ModelParams::wind_tree_rational(1, 1, SQRT_2 / 4.0, 0.05);
        let eta = geometry_summary(&p).mean_free_path;
        let b = Billiard::new(p).unwrap();
        let r = ctime_rescale(&b, 50, 2000.0, eta, 1e6, 5).unwrap();
        assert!((r.eta_hat - eta).abs() < 0.1 * eta, "{}", r.eta_hat);
        assert_eq!(r.n_matched, (2000.0 / eta).round() as u64);
        assert!(r.ratio.iter().all(|x| x.is_finite() && *x > 0.0));
        let again = ctime_rescale(&b, 50, 2000.0, eta, 1e6, 5).unwrap();
        assert_eq!(r, again);
    }
}
