//! Mean-square displacement over an ensemble of Liouville starts, and the
//! model comparison that labels the growth regime.

use serde::{Deserialize, Serialize};

use super::accum::{map_reduce, unit_rng, Mergeable, Moments};
use super::fit::{aic, nonneg_fit, FitParam, FitResult};
use crate::dynamics::Billiard;
use crate::error::{Error, Result};

/// Grid points per decade of `n`.
pub const MSD_PER_DECADE: usize = 10;

/// Fits only use `n` at or above this.
pub const MSD_FIT_MIN_N: u64 = 10;

/// `0` followed by distinct rounded log-spaced integers up to `n_max`.
pub fn msd_grid(n_max: u64, per_decade: usize) -> Vec<u64> {
    let mut g = vec![0u64];
    if n_max == 0 {
        return g;
    }
    let steps = ((n_max as f64).log10() * per_decade as f64).ceil() as i64;
    for k in 0..=steps {
        let n = (10f64.powf(k as f64 / per_decade as f64).round() as u64).min(n_max);
        if *g.last().unwrap() != n {
            g.push(n);
        }
    }
    if *g.last().unwrap() != n_max {
        g.push(n_max);
    }
    g
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MsdAccum {
    /// `|x_n − x_0|²/n` per grid point (`n = 0` keeps the raw square).
    pub sq: Vec<Moments>,
    pub dx: Vec<Moments>,
    pub dy: Vec<Moments>,
    pub trajectories: u64,
    /// Trajectories cut short by an engine error.
    pub censored: u64,
    pub discarded: u64,
}

impl Mergeable for MsdAccum {
    fn merge(&mut self, o: Self) {
        self.sq.merge(o.sq);
        self.dx.merge(o.dx);
        self.dy.merge(o.dy);
        self.trajectories += o.trajectories;
        self.censored += o.censored;
        self.discarded += o.discarded;
    }
}

/// Runs trajectory `index` of the ensemble and records it on `grid`.
pub fn msd_trajectory(b: &Billiard, grid: &[u64], max_len: f64, seed: u64, index: u64) -> MsdAccum {
    let mut acc = MsdAccum {
        sq: vec![Moments::default(); grid.len()],
        dx: vec![Moments::default(); grid.len()],
        dy: vec![Moments::default(); grid.len()],
        trajectories: 1,
        ..Default::default()
    };
    let mut rng = unit_rng(seed, index);
    let Ok(x) = b.sample_liouville(&mut rng) else {
        acc.discarded = 1;
        return acc;
    };
    let mut orbit = b.orbit(x, max_len);
    for (g, &n) in grid.iter().enumerate() {
        while orbit.n < n {
            if orbit.step().is_err() {
                acc.censored = 1;
                return acc;
            }
        }
        let d = orbit.displacement();
        acc.sq[g].push(d.norm_sq() / n.max(1) as f64);
        acc.dx[g].push(d.x);
        acc.dy[g].push(d.y);
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdCurve {
    pub n: Vec<u64>,
    /// `⟨|x_n − x_0|²⟩`.
    pub msd: Vec<f64>,
    pub stderr: Vec<f64>,
    pub k_samples: Vec<u64>,
    pub mean_dx: Vec<f64>,
    pub mean_dy: Vec<f64>,
    pub stderr_dx: Vec<f64>,
    pub stderr_dy: Vec<f64>,
    pub ensemble: u64,
    pub censored: u64,
    pub discarded: u64,
}

impl MsdCurve {
    pub fn from_accum(grid: &[u64], acc: &MsdAccum) -> Self {
        let scale = |n: u64| n.max(1) as f64;
        let zero_nan = |n: u64, v: f64| if n == 0 { 0.0 } else { v };
        MsdCurve {
            n: grid.to_vec(),
            msd: grid.iter().zip(&acc.sq).map(|(&n, m)| zero_nan(n, m.mean() * scale(n))).collect(),
            stderr: grid.iter().zip(&acc.sq).map(|(&n, m)| zero_nan(n, m.stderr() * scale(n))).collect(),
            k_samples: acc.sq.iter().map(|m| m.count).collect(),
            mean_dx: acc.dx.iter().map(Moments::mean).collect(),
            mean_dy: acc.dy.iter().map(Moments::mean).collect(),
            stderr_dx: acc.dx.iter().map(Moments::stderr).collect(),
            stderr_dy: acc.dy.iter().map(Moments::stderr).collect(),
            ensemble: acc.trajectories,
            censored: acc.censored,
            discarded: acc.discarded,
        }
    }

    /// `MSD/n` at every grid point with `n ≥ 1`.
    pub fn per_step(&self) -> Vec<(u64, f64, f64)> {
        self.n
            .iter()
            .zip(self.msd.iter().zip(&self.stderr))
            .filter(|(&n, _)| n >= 1)
            .map(|(&n, (&m, &s))| (n, m / n as f64, s / n as f64))
            .collect()
    }

    /// Largest `|⟨x_n − x_0⟩|/stderr` over both components and all `n ≥ 1`.
    pub fn max_mean_zscore(&self) -> f64 {
        let mut z: f64 = 0.0;
        for k in 0..self.n.len() {
            if self.n[k] == 0 {
                continue;
            }
            for (m, s) in [(self.mean_dx[k], self.stderr_dx[k]), (self.mean_dy[k], self.stderr_dy[k])] {
                if s > 0.0 {
                    z = z.max(m.abs() / s);
                }
            }
        }
        z
    }
}

/// Ensemble of `k` trajectories, each to `n_max` collisions.
pub fn msd(b: &Billiard, k: u64, n_max: u64, max_len: f64, seed: u64) -> Result<MsdCurve> {
    if k < 2 || n_max == 0 {
        return Err(Error::InsufficientData("MSD needs at least two trajectories and one step".into()));
    }
    let grid = msd_grid(n_max, MSD_PER_DECADE);
    let acc: MsdAccum = map_reduce(k, |i| msd_trajectory(b, &grid, max_len, seed, i));
    Ok(MsdCurve::from_accum(&grid, &acc))
}

/// Growth laws compared for `MSD/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MsdModel {
    Constant,
    Ln,
    Ln2,
}

impl MsdModel {
    pub const ALL: [MsdModel; 3] = [MsdModel::Constant, MsdModel::Ln, MsdModel::Ln2];

    pub fn name(self) -> &'static str {
        match self {
            MsdModel::Constant => "constant",
            MsdModel::Ln => "c*ln(n)",
            MsdModel::Ln2 => "c*ln(n)^2",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsdFits {
    /// Fits sorted by AIC, best first.
    pub ranked: Vec<FitResult>,
    pub best: MsdModel,
    /// Growth coefficient `c` of the best model.
    pub c: f64,
    pub c_stderr: f64,
}

/// Weighted fits of `MSD/n` with weights `1/stderr²` over `n ≥ n_min`.
///
/// The constant model is `y = c`. The growing models carry a free offset,
/// `y = b + c·ln n` and `y = b + c·(ln n)²`, because the logarithmic laws are
/// only asymptotic; both coefficients are kept nonnegative.
pub fn fit_msd_models(curve: &MsdCurve, n_min: u64) -> Result<MsdFits> {
    let pts: Vec<(u64, f64, f64)> = curve
        .per_step()
        .into_iter()
        .filter(|&(n, y, s)| n >= n_min && y.is_finite() && s.is_finite() && s > 0.0)
        .collect();
    if pts.len() < 5 {
        return Err(Error::InsufficientData(format!("{} usable MSD points", pts.len())));
    }
    let ln: Vec<f64> = pts.iter().map(|p| (p.0 as f64).ln()).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let w: Vec<f64> = pts.iter().map(|p| 1.0 / (p.2 * p.2)).collect();
    let ones = vec![1.0; pts.len()];
    let range = [pts[0].0 as f64, pts[pts.len() - 1].0 as f64];
    let wm = y.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / w.iter().sum::<f64>();
    let tss: f64 = y.iter().zip(&w).map(|(y, w)| w * (y - wm).powi(2)).sum();

    let mut fits = Vec::new();
    for model in MsdModel::ALL {
        let (basis, names): (Vec<Vec<f64>>, Vec<&str>) = match model {
            MsdModel::Constant => (vec![ones.clone()], vec!["c"]),
            MsdModel::Ln => (vec![ones.clone(), ln.clone()], vec!["b", "c"]),
            MsdModel::Ln2 => (vec![ones.clone(), ln.iter().map(|l| l * l).collect()], vec!["b", "c"]),
        };
        let (coef, se, rss) = nonneg_fit(&basis, &y, &w)?;
        let params = names
            .iter()
            .zip(coef.iter().zip(&se))
            .map(|(n, (&value, &stderr))| FitParam {
                name: (*n).into(),
                value,
                stderr,
            })
            .collect();
        fits.push((
            model,
            FitResult {
                model: model.name().into(),
                params,
                range,
                n_points: pts.len(),
                r_squared: if tss > 0.0 { 1.0 - rss / tss } else { 1.0 },
                aic: aic(rss, pts.len(), basis.len()),
            },
        ));
    }
    // Stable sort keeps the simpler model first on exact ties.
    fits.sort_by(|a, b| a.1.aic.total_cmp(&b.1.aic));
    let (best, top) = (fits[0].0, &fits[0].1);
    let c = top.param("c").map_or(f64::NAN, |p| p.value);
    let c_stderr = top.param("c").map_or(f64::NAN, |p| p.stderr);
    Ok(MsdFits {
        best,
        c,
        c_stderr,
        ranked: fits.into_iter().map(|f| f.1).collect(),
    })
}
