//! Flight-vector correlations along one long orbit, computed batchwise with
//! FFT cross-correlation, and the reversal symmetry of flight-length pairs.

use std::collections::VecDeque;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::accum::unit_rng;
use super::fit::{wls_line, FitParam, FitResult};
use crate::dynamics::{Billiard, CorridorClass};
use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Orbit segment handled by one FFT pass.
pub const DEFAULT_BATCH: usize = 1_000_000;

pub const DEFAULT_TRUNCATION: f64 = 1e4;

/// Log-length differences below this are ties in the symmetry test.
pub const SYMMETRY_TIE: f64 = 1e-9;

/// Lags of the reversal-symmetry test.
pub const SYMMETRY_LAGS: [usize; 3] = [1, 2, 5];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrCurve {
    pub m: u64,
    pub j_max: usize,
    pub truncation: f64,
    /// `Ĉ(j)`, `j = 0..=j_max`.
    pub c: Vec<f64>,
    /// Standard error from the spread of per-batch estimates.
    pub stderr: Vec<f64>,
    /// `S(N) = Σ_{k=1..N} Ĉ(k)`, with `S(0) = 0`.
    pub partial_sum: Vec<f64>,
    /// Same-oblique-corridor correlation `Ĉ_o(j)`; NaN where no pairs exist.
    pub c_o: Vec<f64>,
    pub stderr_o: Vec<f64>,
    pub pairs_o: Vec<u64>,
    /// Mean of `|r|²·1{|r| < R}` over the orbit.
    pub mean_sq_truncated: f64,
    pub truncated: u64,
    pub batches: usize,
    /// Engine failures that forced a fresh Liouville start.
    pub restarts: u64,
    pub symmetry: Vec<SymmetryTest>,
}

/// Two-sample KS comparison of `ln|r_i| − ln|r_{i+n}|` with its negative,
/// drawn from disjoint, spaced-out stretches of the orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetryTest {
    pub lag: usize,
    pub n1: usize,
    pub n2: usize,
    pub ks_stat: f64,
    pub p_value: f64,
}

struct Flight {
    r: Vec2,
    class: CorridorClass,
}

/// Planned transforms plus reusable spectrum buffers.
struct Ffts {
    size: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    spectra: Vec<Vec<Complex<f64>>>,
    product: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Ffts {
    fn new(size: usize, slots: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Ffts {
            size,
            fwd,
            inv,
            spectra: vec![vec![Complex::default(); size]; slots],
            product: vec![Complex::default(); size],
            scratch: vec![Complex::default(); scratch_len],
        }
    }

    /// Transforms `data`, zero padded, into spectrum slot `slot`.
    fn forward(&mut self, slot: usize, data: impl Iterator<Item = Complex<f64>>) {
        let buf = &mut self.spectra[slot];
        let mut k = 0;
        for z in data {
            buf[k] = z;
            k += 1;
        }
        buf[k..].fill(Complex::default());
        self.fwd.process_with_scratch(buf, &mut self.scratch);
    }

    /// `Σ_i conj(a_i)·e_{i+j}` for `j = 0..=j_max`, summed over the given
    /// `(a, e)` spectrum slot pairs.
    fn lagged(&mut self, pairs: &[(usize, usize)], j_max: usize) -> Vec<f64> {
        self.product.fill(Complex::default());
        for &(a, e) in pairs {
            let (a, e) = (&self.spectra[a], &self.spectra[e]);
            for (p, (x, y)) in self.product.iter_mut().zip(a.iter().zip(e)) {
                *p += x.conj() * y;
            }
        }
        self.inv.process_with_scratch(&mut self.product, &mut self.scratch);
        let s = 1.0 / self.size as f64;
        self.product[..=j_max].iter().map(|z| z.re * s).collect()
    }
}

#[derive(Default)]
struct LagStats {
    sum: Vec<f64>,
    /// Per-batch estimate moments, for the batch-means standard error.
    bm: Vec<f64>,
    bm_sq: Vec<f64>,
    bm_n: Vec<u64>,
    pairs: Vec<u64>,
}

impl LagStats {
    fn new(j: usize) -> Self {
        LagStats {
            sum: vec![0.0; j],
            bm: vec![0.0; j],
            bm_sq: vec![0.0; j],
            bm_n: vec![0; j],
            pairs: vec![0; j],
        }
    }

    fn add_batch(&mut self, sums: &[f64], pairs: &[u64]) {
        for j in 0..sums.len() {
            self.sum[j] += sums[j];
            self.pairs[j] += pairs[j];
            if pairs[j] > 0 {
                let v = sums[j] / pairs[j] as f64;
                self.bm[j] += v;
                self.bm_sq[j] += v * v;
                self.bm_n[j] += 1;
            }
        }
    }

    fn finish(&self) -> (Vec<f64>, Vec<f64>) {
        let mean = self
            .sum
            .iter()
            .zip(&self.pairs)
            .map(|(s, &p)| if p > 0 { s / p as f64 } else { f64::NAN })
            .collect();
        let se = (0..self.sum.len())
            .map(|j| {
                let k = self.bm_n[j];
                if k < 2 {
                    return f64::NAN;
                }
                let m = self.bm[j] / k as f64;
                let var = (self.bm_sq[j] / k as f64 - m * m).max(0.0) * k as f64 / (k - 1) as f64;
                (var / k as f64).sqrt()
            })
            .collect();
        (mean, se)
    }
}

/// Correlations of the flight vectors along an orbit of `m` flights from one
/// Liouville start. Flights with `|r| ≥ truncation` are replaced by zero.
pub fn correlation(
    b: &Billiard,
    m: u64,
    j_max: usize,
    truncation: f64,
    batch: usize,
    max_len: f64,
    seed: u64,
) -> Result<CorrCurve> {
    if j_max == 0 || m < 2 * j_max as u64 || batch == 0 {
        return Err(Error::InsufficientData(format!("orbit of {m} flights is too short for lag {j_max}")));
    }
    let mut ffts = Ffts::new((batch + j_max).next_power_of_two(), 8);
    let mut rng = unit_rng(seed, 0);
    let mut restarts = 0u64;
    let mut orbit = b.orbit(b.sample_liouville(&mut rng)?, max_len);

    let mut full = LagStats::new(j_max + 1);
    let mut obl = LagStats::new(j_max + 1);
    let (mut sq_sum, mut truncated) = (0.0, 0u64);

    let max_lag = *SYMMETRY_LAGS.iter().max().unwrap();
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(max_lag + 1);
    let mut sym: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); SYMMETRY_LAGS.len()];

    let mut buf: VecDeque<Flight> = VecDeque::with_capacity(batch + j_max);
    let mut generated = 0u64;
    let mut batches = 0usize;
    loop {
        while generated < m && buf.len() < batch + j_max {
            let f = loop {
                match orbit.step() {
                    Ok(f) => break f,
                    Err(_) => {
                        restarts += 1;
                        let x = b.sample_liouville(&mut rng)?;
                        orbit = b.orbit(x, max_len);
                    }
                }
            };
            let len = f.length;
            // Reversal-symmetry samples: flight `i` pairs with `i + lag`.
            if recent.len() == max_lag + 1 {
                recent.pop_front();
            }
            recent.push_back(len);
            for (s, &lag) in SYMMETRY_LAGS.iter().enumerate() {
                if (generated as usize) < lag {
                    continue;
                }
                let i = generated - lag as u64;
                let stride = (lag + 10) as u64;
                let first = recent[recent.len() - 1 - lag];
                let mut d = first.ln() - len.ln();
                // Equal lengths inside neutral runs differ only by rounding,
                // whose sign is not symmetric; count them as ties.
                if d.abs() < SYMMETRY_TIE {
                    d = 0.0;
                }
                match i % (2 * stride) {
                    0 => sym[s].0.push(d),
                    x if x == stride => sym[s].1.push(0.0 - d),
                    _ => {}
                }
            }
            let r = if len < truncation {
                sq_sum += len * len;
                f.displacement
            } else {
                truncated += 1;
                Vec2::ZERO
            };
            buf.push_back(Flight { r, class: f.corridor_class });
            generated += 1;
        }
        let n_a = batch.min(buf.len());
        let n_e = buf.len();
        let z = |f: &Flight| Complex::new(f.r.x, f.r.y);
        let masked = |cls: CorridorClass| {
            move |f: &Flight| if f.class == cls { Complex::new(f.r.x, f.r.y) } else { Complex::default() }
        };
        let ind = |f: &Flight| match f.class {
            CorridorClass::ObliquePlus => Complex::new(1.0, 0.0),
            CorridorClass::ObliqueMinus => Complex::new(0.0, 1.0),
            _ => Complex::default(),
        };

        ffts.forward(0, buf.iter().take(n_a).map(z));
        ffts.forward(1, buf.iter().map(z));
        let c = ffts.lagged(&[(0, 1)], j_max);
        let pairs: Vec<u64> = (0..=j_max).map(|j| n_a.min(n_e.saturating_sub(j)) as u64).collect();
        full.add_batch(&c, &pairs);

        ffts.forward(2, buf.iter().take(n_a).map(masked(CorridorClass::ObliquePlus)));
        ffts.forward(3, buf.iter().map(masked(CorridorClass::ObliquePlus)));
        ffts.forward(4, buf.iter().take(n_a).map(masked(CorridorClass::ObliqueMinus)));
        ffts.forward(5, buf.iter().map(masked(CorridorClass::ObliqueMinus)));
        let co = ffts.lagged(&[(2, 3), (4, 5)], j_max);
        ffts.forward(6, buf.iter().take(n_a).map(ind));
        ffts.forward(7, buf.iter().map(ind));
        let pairs_o: Vec<u64> = ffts.lagged(&[(6, 7)], j_max).iter().map(|v| v.round().max(0.0) as u64).collect();
        obl.add_batch(&co, &pairs_o);

        batches += 1;
        buf.drain(..n_a);
        if generated >= m && buf.is_empty() {
            break;
        }
    }

    let (c, stderr) = full.finish();
    let (c_o, stderr_o) = obl.finish();
    let mut partial_sum = vec![0.0; j_max + 1];
    for j in 1..=j_max {
        partial_sum[j] = partial_sum[j - 1] + c[j];
    }
    let symmetry = SYMMETRY_LAGS
        .iter()
        .zip(sym)
        .map(|(&lag, (mut x, mut y))| {
            let (ks_stat, p_value) = ks_two_sample(&mut x, &mut y);
            SymmetryTest {
                lag,
                n1: x.len(),
                n2: y.len(),
                ks_stat,
                p_value,
            }
        })
        .collect();
    Ok(CorrCurve {
        m,
        j_max,
        truncation,
        c,
        stderr,
        partial_sum,
        c_o,
        stderr_o,
        pairs_o: obl.pairs,
        mean_sq_truncated: sq_sum / m as f64,
        truncated,
        batches,
        restarts,
        symmetry,
    })
}

/// Least squares of `S(N)` on `(ln N)²` with a free intercept, over
/// log-spaced `N` in `[n_lo, n_hi]` (20 per decade).
pub fn fit_partial_sums(curve: &CorrCurve, n_lo: usize, n_hi: usize) -> Result<FitResult> {
    if n_hi > curve.j_max || n_lo < 1 || n_lo >= n_hi {
        return Err(Error::InsufficientData(format!(
            "partial sums known to N = {}, fit asks for [{n_lo}, {n_hi}]",
            curve.j_max
        )));
    }
    let per_decade = 20.0;
    let k0 = ((n_lo as f64).log10() * per_decade).round() as i64;
    let k1 = ((n_hi as f64).log10() * per_decade).round() as i64;
    let mut ns: Vec<usize> = (k0..=k1)
        .map(|k| (10f64.powf(k as f64 / per_decade).round() as usize).clamp(n_lo, n_hi))
        .collect();
    ns.dedup();
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln().powi(2)).collect();
    let y: Vec<f64> = ns.iter().map(|&n| curve.partial_sum[n]).collect();
    let f = wls_line(&x, &y, &vec![1.0; x.len()])?;
    Ok(FitResult {
        model: "S(N) = b + c*ln(N)^2".into(),
        params: vec![
            FitParam {
                name: "c".into(),
                value: f.slope,
                stderr: f.slope_stderr,
            },
            FitParam {
                name: "b".into(),
                value: f.intercept,
                stderr: f.intercept_stderr,
            },
        ],
        range: [n_lo as f64, n_hi as f64],
        n_points: f.n,
        r_squared: f.r_squared,
        aic: super::fit::aic(f.rss, f.n, 2),
    })
}

/// Two-sample Kolmogorov–Smirnov statistic and its asymptotic p-value.
/// Sorts both inputs in place.
pub fn ks_two_sample(x: &mut [f64], y: &mut [f64]) -> (f64, f64) {
    if x.is_empty() || y.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n1, n2) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n1 - j as f64 / n2).abs());
    }
    let ne = (n1 * n2 / (n1 + n2)).sqrt();
    (d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d))
}

/// `Q(λ) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-17 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ModelParams;
    use rand::Rng;
    use std::f64::consts::SQRT_2;

    fn tail() -> Billiard {
        Billiard::new(ModelParams::wind_tree_rational(1, 1, SQRT_2 / 4.0, 0.05)).unwrap()
    }

    /// The same orbit, correlated by direct summation.
    fn direct(b: &Billiard, m: usize, j_max: usize, trunc: f64, seed: u64) -> (Vec<f64>, Vec<f64>, f64) {
        let mut rng = unit_rng(seed, 0);
        let mut orbit = b.orbit(b.sample_liouville(&mut rng).unwrap(), 1e6);
        let fl: Vec<(Vec2, CorridorClass, f64)> = (0..m)
            .map(|_| {
                let f = orbit.step().unwrap();
                let r = if f.length < trunc { f.displacement } else { Vec2::ZERO };
                (r, f.corridor_class, f.length)
            })
            .collect();
        let mut c = vec![0.0; j_max + 1];
        let mut co = vec![0.0; j_max + 1];
        for j in 0..=j_max {
            let (mut s, mut so, mut n) = (0.0, 0.0, 0u64);
            for i in 0..m - j {
                s += fl[i].0.dot(fl[i + j].0);
                if fl[i].1.is_oblique() && fl[i].1 == fl[i + j].1 {
                    so += fl[i].0.dot(fl[i + j].0);
                    n += 1;
                }
            }
            c[j] = s / (m - j) as f64;
            co[j] = if n > 0 { so / n as f64 } else { f64::NAN };
        }
        let sq = fl.iter().filter(|f| f.2 < trunc).map(|f| f.2 * f.2).sum::<f64>() / m as f64;
        (c, co, sq)
    }

    #[test]
    fn fft_matches_direct_sums() {
        let b = tail();
        let (m, j_max) = (20_000usize, 50usize);
        let (c, co, sq) = direct(&b, m, j_max, 30.0, 4);
        let curve = correlation(&b, m as u64, j_max, 30.0, 3000, 1e6, 4).unwrap();
        assert_eq!(curve.batches, m.div_ceil(3000));
        assert_eq!(curve.restarts, 0);
        for j in 0..=j_max {
            assert!((curve.c[j] - c[j]).abs() < 1e-9 * (1.0 + c[0]), "lag {j}");
            if co[j].is_nan() {
                assert!(curve.c_o[j].is_nan());
            } else {
                assert!((curve.c_o[j] - co[j]).abs() < 1e-8 * (1.0 + co[j].abs()), "lag {j}");
            }
        }
        assert!((curve.c[0] - sq).abs() < 1e-9 * sq);
        assert!((curve.mean_sq_truncated - sq).abs() < 1e-12 * sq);
        let s: f64 = c[1..=j_max].iter().sum();
        assert!((curve.partial_sum[j_max] - s).abs() < 1e-8 * (1.0 + s.abs()));
        assert!(curve.stderr[1..].iter().all(|s| s.is_finite() && *s >= 0.0));
    }

    #[test]
    fn batch_size_does_not_change_estimates() {
        let b = tail();
        let x = correlation(&b, 30_000, 40, 100.0, 7_000, 1e6, 2).unwrap();
        let y = correlation(&b, 30_000, 40, 100.0, 30_000, 1e6, 2).unwrap();
        for j in 0..=40 {
            assert!((x.c[j] - y.c[j]).abs() < 1e-9 * (1.0 + x.c[0]));
        }
        assert_eq!(x.symmetry, y.symmetry);
    }

    #[test]
    fn ks_calibration() {
        assert!((kolmogorov_q(1.36) - 0.049).abs() < 0.002);
        assert!((kolmogorov_q(1.63) - 0.0098).abs() < 0.001);
        let mut rng = unit_rng(11, 0);
        let mut small = 0;
        for _ in 0..200 {
            let mut x: Vec<f64> = (0..500).map(|_| rng.random()).collect();
            let mut y: Vec<f64> = (0..400).map(|_| rng.random()).collect();
            if ks_two_sample(&mut x, &mut y).1 < 0.05 {
                small += 1;
            }
        }
        // About 10 of 200 expected under the null.
        assert!((2..=22).contains(&small), "{small}");
        let mut x: Vec<f64> = (0..500).map(|_| rng.random()).collect();
        let mut y: Vec<f64> = (0..500).map(|_| rng.random::<f64>() + 0.2).collect();
        assert!(ks_two_sample(&mut x, &mut y).1 < 1e-6);
    }

    #[test]
    fn flight_pairs_are_reversal_symmetric() {
        let curve = correlation(&tail(), 400_000, 10, DEFAULT_TRUNCATION, 100_000, 1e6, 8).unwrap();
        for s in &curve.symmetry {
            assert!(s.n1 > 5000 && s.n2 > 5000);
            assert!(s.p_value > 0.001, "{s:?}");
        }
    }
}
