//! Corridor structure of the periodic configuration: axis corridors, oblique
//! corridors bounded by flat rhombus edges (type II) or by vertex arcs
//! (type I), and the long-flight bound inside axis corridors.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{gcd, ModelParams, ScattererKind, ANGLE_MATCH_TOL};
use crate::vec2::Vec2;

/// Default bound on direction denominators for corridor scans.
pub const DEFAULT_MAX_DENOM: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorridorType {
    /// Boundary lines tangent to dispersing arcs.
    TypeI,
    /// Boundary lines containing flat edges.
    TypeII,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CorridorLabel {
    Horizontal,
    Vertical,
    ObliquePlus,
    ObliqueMinus,
    ObliqueOther(i64, i64),
}

impl CorridorLabel {
    pub fn from_direction(dir: (i64, i64)) -> Self {
        match dir {
            (1, 0) => CorridorLabel::Horizontal,
            (0, 1) => CorridorLabel::Vertical,
            (1, 1) => CorridorLabel::ObliquePlus,
            (1, -1) => CorridorLabel::ObliqueMinus,
            (p, q) => CorridorLabel::ObliqueOther(p, q),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorridorSpec {
    /// Reduced integer direction, first nonzero component positive.
    pub direction: (i64, i64),
    pub ctype: CorridorType,
    /// Width for the point particle (scatterers not grown).
    pub width_math: f64,
    /// Width in the equivalent billiard, `width_math − 2r`.
    pub width_eff: f64,
    pub label: CorridorLabel,
}

impl CorridorSpec {
    fn new(p: &ModelParams, direction: (i64, i64), ctype: CorridorType, width_math: f64) -> Self {
        let direction = canonical_direction(direction);
        CorridorSpec {
            direction,
            ctype,
            width_math,
            width_eff: width_math - 2.0 * p.r,
            label: CorridorLabel::from_direction(direction),
        }
    }

    pub fn is_open(&self) -> bool {
        self.width_eff > 0.0
    }

    /// Unit vector along the corridor.
    pub fn axis(&self) -> Vec2 {
        Vec2::new(self.direction.0 as f64, self.direction.1 as f64).normalized()
    }

    fn sort_key(&self) -> (i64, i64, i64) {
        let (p, q) = self.direction;
        (p.abs() + q.abs(), p, q)
    }
}

fn canonical_direction((p, q): (i64, i64)) -> (i64, i64) {
    let g = gcd(p.unsigned_abs(), q.unsigned_abs()).max(1) as i64;
    let (p, q) = (p / g, q / g);
    if p < 0 || (p == 0 && q < 0) {
        (-p, -q)
    } else {
        (p, q)
    }
}

#[inline]
fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

/// Compares `m/n` against `tan θ`, exactly when θ carries a rational tangent.
fn cmp_tan(p: &ModelParams, m: u64, n: u64) -> Ordering {
    match p.theta_tan {
        Some((tm, tn)) => ((m as u128) * (tn as u128)).cmp(&((tm as u128) * (n as u128))),
        None => {
            let diff = m as f64 / n as f64 - p.theta.tan();
            if diff.abs() <= ANGLE_MATCH_TOL {
                Ordering::Equal
            } else if diff < 0.0 {
                Ordering::Less
            } else {
                Ordering::Greater
            }
        }
    }
}

/// Horizontal and vertical corridors: widths `1 − 2a·cosθ` and `1 − 2a·sinθ`
/// (`1 − 2R` for disks), both type I.
pub fn axis_corridors(p: &ModelParams) -> [CorridorSpec; 2] {
    let (dh, dv) = match p.kind {
        ScattererKind::WindTree => {
            let (s, c) = if p.is_square_rhombus() {
                (FRAC_1_SQRT_2, FRAC_1_SQRT_2)
            } else {
                p.theta.sin_cos()
            };
            (1.0 - 2.0 * p.a * c, 1.0 - 2.0 * p.a * s)
        }
        ScattererKind::LorentzDisk { radius } => (1.0 - 2.0 * radius, 1.0 - 2.0 * radius),
    };
    [
        CorridorSpec::new(p, (1, 0), CorridorType::TypeI, dh),
        CorridorSpec::new(p, (0, 1), CorridorType::TypeI, dv),
    ]
}

/// Width of the type II corridor for `tan θ = m/n`, rational closed form.
pub fn type2_width_rational(a: f64, m: u64, n: u64) -> f64 {
    let (mf, nf) = (m as f64, n as f64);
    let k = ceil_div(n, m) as f64;
    let h = (mf * mf + nf * nf).sqrt();
    (mf + nf - k * mf) / h - 2.0 * mf * nf * a / (mf * mf + nf * nf)
}

/// Same width in trigonometric form: `sinθ + cosθ − ⌈n/m⌉sinθ − a·sin2θ`.
pub fn type2_width_trig(theta: f64, a: f64, m: u64, n: u64) -> f64 {
    let (s, c) = theta.sin_cos();
    let k = ceil_div(n, m) as f64;
    s + c - k * s - a * (2.0 * theta).sin()
}

/// The pair of type II corridors parallel to the rhombus edges, when
/// `tan θ = m/n` and the width is positive.
pub fn oblique_type2(p: &ModelParams, m: u64, n: u64) -> Option<[CorridorSpec; 2]> {
    if !p.is_wind_tree() || m == 0 || m > n || gcd(m, n) != 1 {
        return None;
    }
    if cmp_tan(p, m, n) != Ordering::Equal {
        return None;
    }
    let w = type2_width_rational(p.a, m, n);
    if w <= 0.0 {
        return None;
    }
    let (mi, ni) = (m as i64, n as i64);
    Some([
        CorridorSpec::new(p, (mi, ni), CorridorType::TypeII, w),
        CorridorSpec::new(p, (mi, -ni), CorridorType::TypeII, w),
    ])
}

/// Type I oblique corridor in the direction making angle α with the +y axis,
/// `tan α = sign·m/n`. The direction vector is `(sign·m, n)`.
///
/// Rhombus widths follow the three slope cases: below `tan θ`, between
/// `tan θ` and 1, and above 1. Disks use `1/√(m²+n²) − 2R`.
pub fn oblique_type1(p: &ModelParams, m: u64, n: u64, sign: i8) -> Result<Option<CorridorSpec>> {
    let tan_alpha = sign.signum() as f64 * m as f64 / n.max(1) as f64;
    if m == 0 || n == 0 {
        return Err(Error::DegenerateDirection(tan_alpha));
    }
    let g = gcd(m, n);
    let (m, n) = (m / g, n / g);
    let (mf, nf) = (m as f64, n as f64);
    let h = (mf * mf + nf * nf).sqrt();
    let width = match p.kind {
        ScattererKind::LorentzDisk { radius } => 1.0 / h - 2.0 * radius,
        ScattererKind::WindTree => {
            let (st, ct) = p.theta.sin_cos();
            let a = p.a;
            match cmp_tan(p, m, n) {
                Ordering::Equal => return Err(Error::DegenerateDirection(tan_alpha)),
                Ordering::Less => (nf + mf - mf * ceil_div(n, m) as f64 - 2.0 * a * nf * st) / h,
                Ordering::Greater if m <= n => (nf + mf - mf * ceil_div(n, m) as f64 - 2.0 * a * mf * ct) / h,
                Ordering::Greater => (nf + mf - nf * ceil_div(m, n) as f64 - 2.0 * a * mf * ct) / h,
            }
        }
    };
    if width <= 0.0 {
        return Ok(None);
    }
    let dir = (sign.signum() as i64 * m as i64, n as i64);
    Ok(Some(CorridorSpec::new(p, dir, CorridorType::TypeI, width)))
}

/// All open corridors with direction components bounded by `max_denom`,
/// sorted by effective width (descending), ties by `(|p|+|q|, p, q)`.
pub fn enumerate_corridors(p: &ModelParams, max_denom: u64) -> Vec<CorridorSpec> {
    let mut found: BTreeMap<(i64, i64), CorridorSpec> = BTreeMap::new();
    let mut insert = |c: CorridorSpec| {
        if c.is_open() {
            found
                .entry(c.direction)
                .and_modify(|old| {
                    if c.width_eff > old.width_eff {
                        *old = c
                    }
                })
                .or_insert(c);
        }
    };
    for c in axis_corridors(p) {
        insert(c);
    }
    let max_denom = max_denom.max(1);
    for m in 1..=max_denom {
        for n in 1..=max_denom {
            if gcd(m, n) != 1 {
                continue;
            }
            if p.is_wind_tree() && cmp_tan(p, m, n) == Ordering::Equal {
                if let Some(pair) = oblique_type2(p, m, n) {
                    pair.into_iter().for_each(&mut insert);
                }
                continue;
            }
            for sign in [1i8, -1] {
                if let Ok(Some(c)) = oblique_type1(p, m, n, sign) {
                    insert(c);
                }
            }
        }
    }
    let mut out: Vec<CorridorSpec> = found.into_values().collect();
    out.sort_by(|x, y| {
        y.width_eff
            .partial_cmp(&x.width_eff)
            .unwrap_or(Ordering::Equal)
            .then_with(|| x.sort_key().cmp(&y.sort_key()))
    });
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuppressionSup {
    pub value: f64,
    pub m: u64,
    pub n: u64,
}

/// Largest type I threshold `(n+m−m⌈n/m⌉)/(√2·n)` over reduced pairs
/// `2 ≤ m < n ≤ max_denom` at θ = π/4.
///
/// The `m = 1` family is left out: it always gives `1/(√2·n)`, which equals
/// √2/4 at `n = 2`. Over `m ≥ 2` the supremum √2/4 is approached along
/// `(k, 2k−1)` and never attained.
pub fn type1_suppression_sup(max_denom: u64) -> Option<SuppressionSup> {
    let mut best: Option<SuppressionSup> = None;
    for n in 3..=max_denom {
        for m in 2..n {
            if gcd(m, n) != 1 {
                continue;
            }
            let v = (n + m - m * ceil_div(n, m)) as f64 / (SQRT_2 * n as f64);
            if best.is_none_or(|b| v > b.value) {
                best = Some(SuppressionSup { value: v, m, n });
            }
        }
    }
    best
}

/// Length beyond which every free flight in a type I corridor has both ends
/// on the arcs tangent to the corridor walls.
///
/// For a corridor at angle α from the +y axis with effective width `d`:
/// `d/((r − r·cos(α−θ))·sinα) + 2/sinα` when α > θ, and
/// `d/((r − r·cos(θ−α))·cosα) + 2/cosα` when α < θ. For the axis corridors
/// these reduce to `d_h/(r − r·sinθ) + 2` and `d_v/(r − r·cosθ) + 2`.
pub fn lemma3_l0(p: &ModelParams, c: &CorridorSpec) -> Result<f64> {
    if !p.is_wind_tree() {
        return Err(Error::Unsupported("long-flight bound is defined for rhombus scatterers".into()));
    }
    if c.ctype == CorridorType::TypeII {
        return Err(Error::Unsupported("no long-flight bound for type II corridors".into()));
    }
    if !c.is_open() {
        return Err(Error::Unsupported("corridor is closed".into()));
    }
    let d = c.width_eff;
    let r = p.r;
    let th = p.theta;
    let (dx, dy) = (c.direction.0 as f64, c.direction.1 as f64);
    // Angle from +y, folded into [0, π/2].
    let alpha = dx.abs().atan2(dy.abs());
    let l0 = if alpha > th {
        d / ((r - r * (alpha - th).cos()) * alpha.sin()) + 2.0 / alpha.sin()
    } else {
        d / ((r - r * (th - alpha).cos()) * alpha.cos()) + 2.0 / alpha.cos()
    };
    Ok(l0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HorizonRegime {
    FiniteHorizon,
    InfiniteTypeIOnly,
    InfiniteWithTypeII,
}

/// Horizon classification relative to the scan bound `max_denom`.
pub fn classify_regime(p: &ModelParams, max_denom: u64) -> HorizonRegime {
    let cs = enumerate_corridors(p, max_denom);
    if cs.is_empty() {
        HorizonRegime::FiniteHorizon
    } else if cs.iter().any(|c| c.ctype == CorridorType::TypeII) {
        HorizonRegime::InfiniteWithTypeII
    } else {
        HorizonRegime::InfiniteTypeIOnly
    }
}
