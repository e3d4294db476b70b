//! Free-flight length distribution under the Liouville measure: per-class
//! log-binned histograms, CCDF power-law fits and the truncated second moment.

use serde::{Deserialize, Serialize};

use super::accum::{map_reduce, unit_len, unit_rng, units_for, FixedSum, Mergeable, UNIT_SIZE};
use super::fit::{wls_line, FitParam, FitResult};
use crate::dynamics::{Billiard, CorridorClass};
use crate::error::{Error, Result};

pub const BINS_PER_DECADE: usize = 20;
const NCLASS: usize = 5;

/// Log-spaced edges `10^(k/20)` from 1 up to the first edge ≥ `max_len`.
pub fn log_edges(max_len: f64, per_decade: usize) -> Vec<f64> {
    let mut edges = vec![1.0];
    let mut k = 1;
    while *edges.last().unwrap() < max_len {
        edges.push(10f64.powf(k as f64 / per_decade as f64));
        k += 1;
    }
    edges
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailHistogram {
    pub max_len: f64,
    pub edges: Vec<f64>,
    /// `counts[bin][class]`.
    pub counts: Vec<[u64; NCLASS]>,
    /// Flights shorter than 1.
    pub underflow: [u64; NCLASS],
    /// Flights longer than `max_len`, by direction class.
    pub censored: [u64; NCLASS],
    /// Draws lost to corner hits or grazing contacts.
    pub discarded: u64,
    pub total: u64,
    pub max_length: f64,
}

impl Default for TailHistogram {
    fn default() -> Self {
        TailHistogram {
            max_len: 0.0,
            edges: Vec::new(),
            counts: Vec::new(),
            underflow: [0; NCLASS],
            censored: [0; NCLASS],
            discarded: 0,
            total: 0,
            max_length: 0.0,
        }
    }
}

impl Mergeable for TailHistogram {
    fn merge(&mut self, o: Self) {
        if self.edges.is_empty() {
            *self = o;
            return;
        }
        if o.edges.is_empty() {
            return;
        }
        assert_eq!(self.edges.len(), o.edges.len());
        for (a, b) in self.counts.iter_mut().zip(&o.counts) {
            for c in 0..NCLASS {
                a[c] += b[c];
            }
        }
        for c in 0..NCLASS {
            self.underflow[c] += o.underflow[c];
            self.censored[c] += o.censored[c];
        }
        self.discarded += o.discarded;
        self.total += o.total;
        self.max_length = self.max_length.max(o.max_length);
    }
}

impl TailHistogram {
    pub fn new(max_len: f64) -> Self {
        let edges = log_edges(max_len, BINS_PER_DECADE);
        let nb = edges.len() - 1;
        TailHistogram {
            max_len,
            edges,
            counts: vec![[0; NCLASS]; nb],
            ..Default::default()
        }
    }

    pub fn bin_of(&self, len: f64) -> Option<usize> {
        if len < 1.0 {
            return None;
        }
        let k = (len.log10() * BINS_PER_DECADE as f64).floor() as usize;
        // Guard against log10 rounding at the edges.
        let k = k.min(self.counts.len() - 1);
        if len < self.edges[k] {
            Some(k.saturating_sub(1))
        } else if k + 1 < self.edges.len() && len >= self.edges[k + 1] {
            Some((k + 1).min(self.counts.len() - 1))
        } else {
            Some(k)
        }
    }

    pub fn record(&mut self, len: f64, class: CorridorClass) {
        self.total += 1;
        self.max_length = self.max_length.max(len);
        match self.bin_of(len) {
            None => self.underflow[class.index()] += 1,
            Some(k) => self.counts[k][class.index()] += 1,
        }
    }

    pub fn record_censored(&mut self, class: CorridorClass) {
        self.total += 1;
        self.max_length = self.max_length.max(self.max_len);
        self.censored[class.index()] += 1;
    }

    pub fn record_discarded(&mut self) {
        self.total += 1;
        self.discarded += 1;
    }

    pub fn bin_count(&self, bin: usize, classes: &[CorridorClass]) -> u64 {
        classes.iter().map(|c| self.counts[bin][c.index()]).sum()
    }

    /// Fraction of draws in `classes` with length ≥ `edges[bin]`, censored included.
    pub fn ccdf_at(&self, bin: usize, classes: &[CorridorClass]) -> f64 {
        let above: u64 = (bin..self.counts.len()).map(|k| self.bin_count(k, classes)).sum::<u64>()
            + classes.iter().map(|c| self.censored[c.index()]).sum::<u64>();
        above as f64 / self.total.max(1) as f64
    }

    /// CCDF at every bin's lower edge.
    pub fn ccdf(&self, classes: &[CorridorClass]) -> Vec<f64> {
        let mut out = vec![0.0; self.counts.len()];
        let mut acc: u64 = classes.iter().map(|c| self.censored[c.index()]).sum();
        for k in (0..self.counts.len()).rev() {
            acc += self.bin_count(k, classes);
            out[k] = acc as f64 / self.total.max(1) as f64;
        }
        out
    }

    /// Flights longer than `len` in any class (bin resolution).
    pub fn count_above(&self, len: f64) -> u64 {
        let censored: u64 = self.censored.iter().sum();
        let k0 = self.edges.partition_point(|&e| e < len);
        censored + (k0..self.counts.len()).map(|k| self.counts[k].iter().sum::<u64>()).sum::<u64>()
    }
}

/// Draws `n` Liouville samples and records one flight for each.
pub fn flight_tail(b: &Billiard, n: u64, max_len: f64, seed: u64) -> Result<TailHistogram> {
    Ok(flight_sample_run(b, n, max_len, &[], seed)?.0)
}

/// Histogram of `n` flights plus truncated second-moment sums at the
/// thresholds in `r_grid`, from the same draws.
pub fn flight_sample_run(
    b: &Billiard,
    n: u64,
    max_len: f64,
    r_grid: &[f64],
    seed: u64,
) -> Result<(TailHistogram, MomentSums)> {
    if n == 0 {
        return Err(Error::InsufficientData("no samples requested".into()));
    }
    if r_grid.windows(2).any(|w| w[1] <= w[0]) || r_grid.last().is_some_and(|&r| r > max_len) {
        return Err(Error::Unsupported("truncation grid must increase and stay within max_len".into()));
    }
    let units = units_for(n, UNIT_SIZE);
    let acc: RunAccum = map_reduce(units, |k| {
        let mut rng = unit_rng(seed, k);
        let mut h = TailHistogram::new(max_len);
        let mut m = MomentSums::new(r_grid);
        let mut failure = None;
        for _ in 0..unit_len(n, UNIT_SIZE, k) {
            let x = match b.sample_liouville(&mut rng) {
                Ok(x) => x,
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            };
            match b.next_collision(&x, max_len) {
                Ok(c) => {
                    h.record(c.flight.length, c.flight.corridor_class);
                    m.record(c.flight.length);
                }
                Err(Error::EscapedMaxLen { .. }) => {
                    let (_, _, d) = b.state_vectors(&x);
                    h.record_censored(b.classify(d * max_len, max_len));
                    m.record_censored();
                }
                Err(Error::CornerHit) | Err(Error::GrazingImpact(_)) => {
                    h.record_discarded();
                    m.record_discarded();
                }
                Err(e) => {
                    failure = Some(e);
                    break;
                }
            }
        }
        RunAccum { h, m, failure }
    });
    if let Some(e) = acc.failure {
        return Err(e);
    }
    Ok((acc.h, acc.m))
}

#[derive(Debug, Default)]
struct RunAccum {
    h: TailHistogram,
    m: MomentSums,
    failure: Option<Error>,
}

impl Mergeable for RunAccum {
    fn merge(&mut self, o: Self) {
        self.h.merge(o.h);
        self.m.merge(o.m);
        // Keep the error of the lowest-index unit; ties are impossible.
        if self.failure.is_none() {
            self.failure = o.failure;
        }
    }
}

/// Fits `log CCDF = log c − β·log L` over bin edges in `[l_min, l_max]`,
/// weighting each point by its bin count.
///
/// Standard errors add the multinomial covariance of the cumulative counts,
/// propagated through the linear estimator, to the residual variance.
pub fn fit_powerlaw_ccdf(h: &TailHistogram, classes: &[CorridorClass], l_min: f64, l_max: f64) -> Result<FitResult> {
    let ccdf = h.ccdf(classes);
    let total = h.total.max(1) as f64;
    let (mut x, mut y, mut w, mut above) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for k in 0..h.counts.len() {
        let e = h.edges[k];
        if e < l_min * (1.0 - 1e-12) || e > l_max * (1.0 + 1e-12) {
            continue;
        }
        let cnt = h.bin_count(k, classes);
        if cnt == 0 || ccdf[k] <= 0.0 {
            continue;
        }
        x.push(e.ln());
        y.push(ccdf[k].ln());
        w.push(cnt as f64);
        above.push(ccdf[k] * total);
    }
    if x.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} nonempty bins in [{l_min}, {l_max}], need 5",
            x.len()
        )));
    }
    let f = wls_line(&x, &y, &w)?;
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(x, w)| w * (x - xm).powi(2)).sum();
    let a: Vec<f64> = x.iter().zip(&w).map(|(x, w)| w * (x - xm) / sxx).collect();
    let b: Vec<f64> = a.iter().zip(&w).map(|(a, w)| w / sw - xm * a).collect();
    // Edges increase with the index, so the larger count sits at the smaller index.
    let cov = |i: usize, j: usize| 1.0 / above[i.min(j)] - 1.0 / total;
    let (mut var_a, mut var_b) = (0.0, 0.0);
    for i in 0..x.len() {
        for j in 0..x.len() {
            var_a += a[i] * a[j] * cov(i, j);
            var_b += b[i] * b[j] * cov(i, j);
        }
    }
    let beta_se = (f.slope_stderr.powi(2) + var_a.max(0.0)).sqrt();
    let icpt_se = (f.intercept_stderr.powi(2) + var_b.max(0.0)).sqrt();
    let c = f.intercept.exp();
    Ok(FitResult {
        model: "ccdf_power_law".into(),
        params: vec![
            FitParam {
                name: "beta".into(),
                value: -f.slope,
                stderr: beta_se,
            },
            FitParam {
                name: "prefactor".into(),
                value: c,
                stderr: c * icpt_se,
            },
        ],
        range: [l_min, l_max],
        n_points: f.n,
        r_squared: f.r_squared,
        aic: super::fit::aic(f.rss, f.n, 2),
    })
}

/// Prefactor `c` of `CCDF ≈ c·L^(−β)` with β held fixed, as the weighted
/// geometric mean of `CCDF·L^β` over the same points as [`fit_powerlaw_ccdf`].
pub fn fixed_exponent_prefactor(
    h: &TailHistogram,
    classes: &[CorridorClass],
    beta: f64,
    l_min: f64,
    l_max: f64,
) -> Result<FitParam> {
    let ccdf = h.ccdf(classes);
    let (mut sw, mut s, mut s2, mut npts) = (0.0, 0.0, 0.0, 0usize);
    for k in 0..h.counts.len() {
        let e = h.edges[k];
        let cnt = h.bin_count(k, classes);
        if e < l_min * (1.0 - 1e-12) || e > l_max * (1.0 + 1e-12) || cnt == 0 || ccdf[k] <= 0.0 {
            continue;
        }
        let v = ccdf[k].ln() + beta * e.ln();
        let w = cnt as f64;
        sw += w;
        s += w * v;
        s2 += w * v * v;
        npts += 1;
    }
    if npts < 5 {
        return Err(Error::InsufficientData(format!("{npts} nonempty bins, need 5")));
    }
    let m = s / sw;
    let var = (s2 / sw - m * m).max(0.0) * npts as f64 / (npts - 1) as f64;
    let c = m.exp();
    Ok(FitParam {
        name: format!("prefactor_beta{beta}"),
        value: c,
        stderr: c * (var / npts as f64).sqrt(),
    })
}

/// Sums of `|r|²` bucketed by the truncation grid: bucket `k` collects flights
/// with `R_{k−1} ≤ |r| < R_k`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentSums {
    pub r_grid: Vec<f64>,
    pub sums: Vec<FixedSum>,
    pub sums_sq: Vec<FixedSum>,
    pub total: u64,
}

impl MomentSums {
    pub fn new(r_grid: &[f64]) -> Self {
        MomentSums {
            r_grid: r_grid.to_vec(),
            sums: vec![FixedSum::default(); r_grid.len()],
            sums_sq: vec![FixedSum::default(); r_grid.len()],
            total: 0,
        }
    }

    pub fn record(&mut self, len: f64) {
        self.total += 1;
        let k = self.r_grid.partition_point(|&r| r <= len);
        if k < self.r_grid.len() {
            let q = len * len;
            self.sums[k].add(q);
            self.sums_sq[k].add(q * q);
        }
    }

    pub fn record_censored(&mut self) {
        self.total += 1;
    }

    pub fn record_discarded(&mut self) {
        self.total += 1;
    }

    /// `⟨φ_R⟩` at every grid point with its standard error.
    pub fn curve(&self) -> MomentCurve {
        let n = self.total.max(1) as f64;
        let (mut acc, mut acc2) = (0.0, 0.0);
        let mut phi = Vec::with_capacity(self.r_grid.len());
        let mut stderr = Vec::with_capacity(self.r_grid.len());
        for k in 0..self.r_grid.len() {
            acc += self.sums[k].value();
            acc2 += self.sums_sq[k].value();
            let m = acc / n;
            phi.push(m);
            stderr.push(((acc2 / n - m * m).max(0.0) / n).sqrt());
        }
        MomentCurve {
            r_grid: self.r_grid.clone(),
            phi,
            stderr,
            n: self.total,
        }
    }
}

impl Mergeable for MomentSums {
    fn merge(&mut self, o: Self) {
        if self.r_grid.is_empty() && self.total == 0 {
            *self = o;
            return;
        }
        if o.sums.is_empty() {
            self.total += o.total;
            return;
        }
        for k in 0..self.sums.len() {
            self.sums[k].merge(o.sums[k]);
            self.sums_sq[k].merge(o.sums_sq[k]);
        }
        self.total += o.total;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    pub r_grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n: u64,
}

impl MomentCurve {
    /// Ordinary least squares of `⟨φ_R⟩` on `ln R` over grid points in `[r_lo, r_hi]`.
    pub fn fit_log(&self, r_lo: f64, r_hi: f64) -> Result<FitResult> {
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (r, p) in self.r_grid.iter().zip(&self.phi) {
            if *r >= r_lo * (1.0 - 1e-12) && *r <= r_hi * (1.0 + 1e-12) {
                x.push(r.ln());
                y.push(*p);
            }
        }
        let w = vec![1.0; x.len()];
        let f = wls_line(&x, &y, &w)?;
        Ok(FitResult {
            model: "phi_R_vs_lnR".into(),
            params: vec![
                FitParam {
                    name: "slope".into(),
                    value: f.slope,
                    stderr: f.slope_stderr,
                },
                FitParam {
                    name: "intercept".into(),
                    value: f.intercept,
                    stderr: f.intercept_stderr,
                },
            ],
            range: [r_lo, r_hi],
            n_points: f.n,
            r_squared: f.r_squared,
            aic: super::fit::aic(f.rss, f.n, 2),
        })
    }
}

/// Log-spaced truncation thresholds, `per_decade` per decade, from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let k0 = (lo.log10() * per_decade as f64).round() as i64;
    let k1 = (hi.log10() * per_decade as f64).round() as i64;
    (k0..=k1).map(|k| 10f64.powf(k as f64 / per_decade as f64)).collect()
}

/// `⟨φ_R(r)⟩ = ⟨|r|²·1{|r| < R}⟩` on `r_grid` from `n` Liouville draws.
pub fn truncated_second_moment(b: &Billiard, n: u64, r_grid: &[f64], seed: u64) -> Result<MomentCurve> {
    let max_len = r_grid.last().copied().unwrap_or(1.0);
    Ok(flight_sample_run(b, n, max_len, r_grid, seed)?.1.curve())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ModelParams;
    use rand::Rng;
    use std::f64::consts::SQRT_2;

    fn pareto_hist(beta: f64, n: u64, seed: u64) -> TailHistogram {
        let mut rng = unit_rng(seed, 0);
        let mut h = TailHistogram::new(1e4);
        for _ in 0..n {
            let u: f64 = 1.0 - rng.random::<f64>();
            let x = u.powf(-1.0 / beta);
            if x >= 1e4 {
                h.record_censored(CorridorClass::Horizontal);
            } else {
                h.record(x, CorridorClass::Horizontal);
            }
        }
        h
    }

    #[test]
    fn edges_and_bins() {
        let h = TailHistogram::new(1e4);
        assert_eq!(h.edges.len(), 81);
        assert_eq!(h.bin_of(0.5), None);
        assert_eq!(h.bin_of(1.0), Some(0));
        assert_eq!(h.bin_of(10.0), Some(20));
        assert_eq!(h.bin_of(9.999_999), Some(19));
        assert_eq!(h.bin_of(9999.0), Some(79));
    }

    #[test]
    fn synthetic_inverse_square() {
        let h = pareto_hist(2.0, 1_000_000, 1);
        let f = fit_powerlaw_ccdf(&h, &[CorridorClass::Horizontal], 1.0, 30.0).unwrap();
        let beta = f.value("beta");
        assert!((beta - 2.0).abs() <= 0.02, "{beta}");
        assert!((f.value("prefactor") - 1.0).abs() < 0.05);
    }

    #[test]
    fn pareto_calibration() {
        for (beta, hi) in [(1.5, 100.0), (2.0, 30.0), (3.0, 10.0)] {
            for seed in 0..3 {
                let h = pareto_hist(beta, 1_000_000, 100 + seed);
                let f = fit_powerlaw_ccdf(&h, &[CorridorClass::Horizontal], 1.0, hi).unwrap();
                let p = f.param("beta").unwrap();
                assert!((p.value - beta).abs() <= 2.0 * p.stderr, "{beta}: {} ± {}", p.value, p.stderr);
            }
        }
    }

    #[test]
    fn ccdf_monotone_and_pooled_dominates() {
        let b = Billiard::new(ModelParams::wind_tree_rational(1, 1, SQRT_2 / 4.0, 0.05)).unwrap();
        let h = flight_tail(&b, 200_000, 1e4, 3).unwrap();
        let accounted: u64 = h.counts.iter().flat_map(|c| c.iter()).sum::<u64>()
            + h.underflow.iter().sum::<u64>()
            + h.censored.iter().sum::<u64>()
            + h.discarded;
        assert_eq!(accounted, h.total);
        assert_eq!(h.total, 200_000);
        let pooled = h.ccdf(&CorridorClass::ALL);
        for c in CorridorClass::ALL {
            let cc = h.ccdf(&[c]);
            for k in 0..cc.len() {
                assert!(cc[k] <= pooled[k]);
                if k > 0 {
                    assert!(cc[k] <= cc[k - 1]);
                }
            }
        }
    }

    #[test]
    fn insufficient_bins() {
        let h = TailHistogram::new(100.0);
        assert!(matches!(
            fit_powerlaw_ccdf(&h, &[CorridorClass::Horizontal], 10.0, 100.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn moment_small_r_is_plain_truncated_mean() {
        let b = Billiard::new(ModelParams::wind_tree_rational(1, 1, SQRT_2 / 4.0, 0.05)).unwrap();
        let curve = truncated_second_moment(&b, 50_000, &[2.0, 10.0, 100.0], 5).unwrap();
        let mut rng_sum = 0.0;
        let mut count = 0u64;
        for k in 0..units_for(50_000, UNIT_SIZE) {
            let mut rng = unit_rng(5, k);
            for _ in 0..unit_len(50_000, UNIT_SIZE, k) {
                let x = b.sample_liouville(&mut rng).unwrap();
                count += 1;
                if let Ok(c) = b.next_collision(&x, 100.0) {
                    if c.flight.length < 2.0 {
                        rng_sum += c.flight.length.powi(2);
                    }
                }
            }
        }
        assert!((curve.phi[0] - rng_sum / count as f64).abs() < 1e-9);
        assert!(curve.phi.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn finite_horizon_has_short_flights_only() {
        let b = Billiard::new_allow_overlap(ModelParams::wind_tree_rational(1, 1, 0.4, 0.25)).unwrap();
        let h = flight_tail(&b, 200_000, 1e4, 8).unwrap();
        assert_eq!(h.count_above(10.0), 0);
        assert!(h.max_length < 10.0);
        let curve = truncated_second_moment(&b, 100_000, &log_grid(10.0, 1e3, 5), 8).unwrap();
        let f = curve.fit_log(10.0, 1e3).unwrap();
        assert!(f.value("slope").abs() < 1e-12);
    }

    #[test]
    fn deterministic_given_seed() {
        let b = Billiard::new(ModelParams::wind_tree_rational(1, 1, 0.4, 0.1)).unwrap();
        let a = flight_tail(&b, 30_000, 1e3, 4).unwrap();
        let c = rayon::ThreadPoolBuilder::new()
            .num_threads(3)
            .build()
            .unwrap()
            .install(|| flight_tail(&b, 30_000, 1e3, 4).unwrap());
        assert_eq!(a, c);
    }
}
