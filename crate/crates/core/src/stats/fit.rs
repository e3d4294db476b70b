//! Weighted least-squares fits and model comparison.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<FitParam>,
    /// Range of the independent variable (before any transform).
    pub range: [f64; 2],
    pub n_points: usize,
    pub r_squared: f64,
    pub aic: f64,
}

impl FitResult {
    pub fn param(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.param(name).map_or(f64::NAN, |p| p.value)
    }
}

/// Straight-line fit `y = intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
    pub r_squared: f64,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub n: usize,
}

/// Akaike information criterion of a weighted fit with `k` parameters.
pub fn aic(rss: f64, n: usize, k: usize) -> f64 {
    let n = n as f64;
    n * (rss.max(f64::MIN_POSITIVE) / n).ln() + 2.0 * k as f64
}

/// Weighted least squares with weights known up to scale; standard errors
/// come from the weighted residual variance.
pub fn wls_line(x: &[f64], y: &[f64], w: &[f64]) -> Result<LineFit> {
    let pts: Vec<(f64, f64, f64)> = x
        .iter()
        .zip(y)
        .zip(w)
        .filter(|((x, y), w)| x.is_finite() && y.is_finite() && **w > 0.0)
        .map(|((&x, &y), &w)| (x, y, w))
        .collect();
    let n = pts.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("{n} usable points for a line fit")));
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let xm = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ym = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - xm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| p.2 * (p.1 - ym).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::InsufficientData("no spread in the independent variable".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let rss: f64 = pts.iter().map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2)).sum();
    // Weights are relative, so rescale them to the number of points.
    let s2 = rss / (n - 2) as f64;
    let slope_stderr = (s2 / sxx).sqrt();
    let intercept_stderr = (s2 * (1.0 / sw + xm * xm / sxx)).sqrt();
    let r_squared = if syy > 0.0 { 1.0 - rss / syy } else { 1.0 };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr,
        intercept_stderr,
        r_squared,
        rss,
        n,
    })
}

/// Fits `y = Σ_k c_k·g_k(x)` by weighted least squares with every `c_k ≥ 0`
/// (at most two basis functions). Returns coefficients, their standard errors,
/// and the weighted residual sum of squares.
pub fn nonneg_fit(basis: &[Vec<f64>], y: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = y.len();
    if n < basis.len() + 1 {
        return Err(Error::InsufficientData(format!("{n} points for {} parameters", basis.len())));
    }
    let solve = |idx: &[usize]| -> Option<Vec<f64>> {
        let k = idx.len();
        let mut a = vec![vec![0.0; k]; k];
        let mut b = vec![0.0; k];
        for i in 0..n {
            for (r, &p) in idx.iter().enumerate() {
                b[r] += w[i] * basis[p][i] * y[i];
                for (c, &q) in idx.iter().enumerate() {
                    a[r][c] += w[i] * basis[p][i] * basis[q][i];
                }
            }
        }
        match k {
            1 => (a[0][0] > 0.0).then(|| vec![b[0] / a[0][0]]),
            2 => {
                let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
                (det.abs() > 1e-300).then(|| {
                    vec![(b[0] * a[1][1] - b[1] * a[0][1]) / det, (a[0][0] * b[1] - a[1][0] * b[0]) / det]
                })
            }
            _ => None,
        }
    };
    let rss_of = |coef: &[f64]| -> f64 {
        (0..n)
            .map(|i| {
                let f: f64 = coef.iter().zip(basis).map(|(c, g)| c * g[i]).sum();
                w[i] * (y[i] - f).powi(2)
            })
            .sum()
    };
    let k = basis.len();
    let all: Vec<usize> = (0..k).collect();
    let mut best: Option<(Vec<f64>, f64)> = None;
    // Enumerate active sets; the smallest feasible residual is the NNLS optimum.
    for mask in 1u32..(1 << k) {
        let idx: Vec<usize> = all.iter().copied().filter(|i| mask & (1 << i) != 0).collect();
        if let Some(c) = solve(&idx) {
            if c.iter().all(|v| *v >= 0.0) {
                let mut coef = vec![0.0; k];
                idx.iter().zip(&c).for_each(|(&i, &v)| coef[i] = v);
                let rss = rss_of(&coef);
                if best.as_ref().is_none_or(|b| rss < b.1) {
                    best = Some((coef, rss));
                }
            }
        }
    }
    let (coef, rss) = best.unwrap_or((vec![0.0; k], rss_of(&vec![0.0; k])));
    // Standard errors from the unconstrained normal matrix.
    let dof = (n - k).max(1) as f64;
    let s2 = rss / dof;
    let mut a = vec![vec![0.0; k]; k];
    for i in 0..n {
        for p in 0..k {
            for q in 0..k {
                a[p][q] += w[i] * basis[p][i] * basis[q][i];
            }
        }
    }
    let se = match k {
        1 => vec![(s2 / a[0][0]).sqrt()],
        _ => {
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            vec![(s2 * a[1][1] / det).sqrt(), (s2 * a[0][0] / det).sqrt()]
        }
    };
    Ok((coef, se, rss))
}
