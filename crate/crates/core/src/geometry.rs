//! The equivalent point-billiard scatterer: a rhombus (or disk) grown by the
//! particle radius `r`, centered on every point of the unit integer lattice.
//!
//! The boundary is a closed C¹ curve made of flat segments (offset rhombus
//! edges) and circular arcs of radius `r` around the rhombus vertices. It is
//! parameterized by arclength `s`, starting at the rightmost point and running
//! counterclockwise.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Tolerance used when comparing θ against π/4 and `tan θ` against rationals.
pub const ANGLE_MATCH_TOL: f64 = 1e-12;
/// Points closer than this to a junction (or corner) are treated as singular.
pub const JUNCTION_TOL: f64 = 1e-12;
/// Rays whose normal incidence `|v·n|` falls below this are grazing.
pub const TANGENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScattererKind {
    WindTree,
    /// Circular scatterer of the given radius (periodic Lorentz gas baseline).
    LorentzDisk { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Half of the acute rhombus angle.
    pub theta: f64,
    /// Rhombus side length, before growth by `r`.
    pub a: f64,
    /// Radius of the moving hard disk.
    pub r: f64,
    pub kind: ScattererKind,
    /// `tan θ = m/n` in lowest terms, when θ was given as a rational tangent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_tan: Option<(u64, u64)>,
}

impl ModelParams {
    pub fn wind_tree(theta: f64, a: f64, r: f64) -> Self {
        ModelParams {
            theta,
            a,
            r,
            kind: ScattererKind::WindTree,
            theta_tan: None,
        }
    }

    /// Wind-Tree parameters with `tan θ = m/n` kept exact.
    pub fn wind_tree_rational(m: u64, n: u64, a: f64, r: f64) -> Self {
        let g = gcd(m, n).max(1);
        let (m, n) = (m / g, n / g);
        ModelParams {
            theta: (m as f64).atan2(n as f64),
            a,
            r,
            kind: ScattererKind::WindTree,
            theta_tan: Some((m, n)),
        }
    }

    pub fn lorentz(radius: f64, r: f64) -> Self {
        ModelParams {
            theta: FRAC_PI_4,
            a: 0.0,
            r,
            kind: ScattererKind::LorentzDisk { radius },
            theta_tan: None,
        }
    }

    pub fn is_wind_tree(&self) -> bool {
        matches!(self.kind, ScattererKind::WindTree)
    }

    /// Half-width of the grown scatterer along x.
    pub fn half_extent_x(&self) -> f64 {
        match self.kind {
            ScattererKind::WindTree => self.a * self.theta.sin() + self.r,
            ScattererKind::LorentzDisk { radius } => radius + self.r,
        }
    }

    /// Half-height of the grown scatterer along y.
    pub fn half_extent_y(&self) -> f64 {
        match self.kind {
            ScattererKind::WindTree => self.a * self.theta.cos() + self.r,
            ScattererKind::LorentzDisk { radius } => radius + self.r,
        }
    }

    /// Radius of the smallest origin-centered disk containing the grown scatterer.
    pub fn circumradius(&self) -> f64 {
        self.half_extent_x().max(self.half_extent_y())
    }

    /// Distance scale of the scatterer used by corridor membership tests:
    /// `a + r` for rhombi, `R + r` for disks.
    pub fn size_scale(&self) -> f64 {
        match self.kind {
            ScattererKind::WindTree => self.a + self.r,
            ScattererKind::LorentzDisk { radius } => radius + self.r,
        }
    }

    /// θ equals π/4 (exactly, when the tangent is rational).
    pub fn is_square_rhombus(&self) -> bool {
        match self.theta_tan {
            Some((m, n)) => m == n,
            None => (self.theta - FRAC_PI_4).abs() <= ANGLE_MATCH_TOL,
        }
    }
}

/// One violated parameter constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "violation", rename_all = "snake_case")]
pub enum Violation {
    NonFinite { name: String },
    NonPositiveDimension { name: String, value: f64 },
    AngleOutOfRange { theta: f64 },
    /// Grown scatterers of adjacent cells overlap along `axis`.
    TrappingConfiguration { axis: char, half_extent: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonFinite { name } => write!(f, "NonFinite: {name} is not finite"),
            Violation::NonPositiveDimension { name, value } => {
                write!(f, "NonPositiveDimension: {name} = {value}")
            }
            Violation::AngleOutOfRange { theta } => {
                write!(f, "AngleOutOfRange: theta = {theta} not in (0, pi/4]")
            }
            Violation::TrappingConfiguration { axis, half_extent } => write!(
                f,
                "TrappingConfiguration: grown scatterer half-extent along {axis} is {half_extent} > 1/2"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// θ = π/4, √2/4 ≤ a < √2/2 − 2r, 0 < r < √2/8: horizontal, vertical and
    /// the two diagonal type II corridors are the only corridors.
    pub pure_type_ii_regime: bool,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<ValidationReport> {
        if self.is_ok() {
            Ok(self)
        } else {
            Err(Error::InvalidParams(self.violations))
        }
    }
}

/// Checks every parameter constraint and collects all violations.
pub fn check_params(p: &ModelParams) -> ValidationReport {
    let mut violations = Vec::new();
    let mut finite = |name: &str, v: f64| {
        if !v.is_finite() {
            violations.push(Violation::NonFinite { name: name.into() });
            false
        } else {
            true
        }
    };
    let all_finite = match p.kind {
        ScattererKind::WindTree => finite("theta", p.theta) & finite("a", p.a) & finite("r", p.r),
        ScattererKind::LorentzDisk { radius } => finite("radius", radius) & finite("r", p.r),
    };
    if all_finite {
        match p.kind {
            ScattererKind::WindTree => {
                if p.a <= 0.0 {
                    violations.push(Violation::NonPositiveDimension { name: "a".into(), value: p.a });
                }
                if !(p.theta > 0.0 && p.theta <= FRAC_PI_4 + ANGLE_MATCH_TOL) {
                    violations.push(Violation::AngleOutOfRange { theta: p.theta });
                }
            }
            ScattererKind::LorentzDisk { radius } => {
                if radius <= 0.0 {
                    violations.push(Violation::NonPositiveDimension {
                        name: "radius".into(),
                        value: radius,
                    });
                }
            }
        }
        if p.r < 0.0 {
            violations.push(Violation::NonPositiveDimension { name: "r".into(), value: p.r });
        }
        if violations.is_empty() {
            let (ex, ey) = (p.half_extent_x(), p.half_extent_y());
            match p.kind {
                ScattererKind::WindTree => {
                    if ex > 0.5 {
                        violations.push(Violation::TrappingConfiguration { axis: 'x', half_extent: ex });
                    }
                    if ey > 0.5 {
                        violations.push(Violation::TrappingConfiguration { axis: 'y', half_extent: ey });
                    }
                }
                // Disks touching their neighbours already seal the cell.
                ScattererKind::LorentzDisk { .. } => {
                    if ex >= 0.5 {
                        violations.push(Violation::TrappingConfiguration { axis: 'x', half_extent: ex });
                    }
                }
            }
        }
    }
    let pure_type_ii_regime = violations.is_empty()
        && p.is_wind_tree()
        && p.is_square_rhombus()
        && p.r > 0.0
        && p.r < SQRT_2 / 8.0
        && p.a >= SQRT_2 / 4.0 - ANGLE_MATCH_TOL
        && p.a < SQRT_2 / 2.0 - 2.0 * p.r;
    ValidationReport {
        violations,
        pure_type_ii_regime,
    }
}

/// Validates `p`, failing with [`Error::InvalidParams`] on any violation.
pub fn validate_params(p: &ModelParams) -> Result<ValidationReport> {
    check_params(p).into_result()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Flat,
    Dispersing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryPiece {
    Segment {
        start: Vec2,
        end: Vec2,
        /// Outward unit normal.
        normal: Vec2,
        /// Unit tangent from `start` to `end`.
        dir: Vec2,
        len: f64,
    },
    /// Convex-outward circular arc; a zero radius marks a rhombus corner.
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl BoundaryPiece {
    pub fn len(&self) -> f64 {
        match *self {
            BoundaryPiece::Segment { len, .. } => len,
            BoundaryPiece::Arc { radius, sweep, .. } => radius * sweep,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0.0
    }

    pub fn kind(&self) -> BoundaryKind {
        match self {
            BoundaryPiece::Segment { .. } => BoundaryKind::Flat,
            BoundaryPiece::Arc { .. } => BoundaryKind::Dispersing,
        }
    }

    /// Point and outward normal at arclength `u` from the start of this piece.
    fn at(&self, u: f64) -> (Vec2, Vec2) {
        match *self {
            BoundaryPiece::Segment { start, normal, dir, .. } => (start + u * dir, normal),
            BoundaryPiece::Arc {
                center,
                radius,
                start_angle,
                ..
            } => {
                let beta = if radius > 0.0 { start_angle + u / radius } else { start_angle };
                let n = Vec2::from_angle(beta);
                (center + radius * n, n)
            }
        }
    }

    fn end_point(&self) -> (Vec2, Vec2) {
        match *self {
            BoundaryPiece::Segment { end, normal, .. } => (end, normal),
            BoundaryPiece::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let n = Vec2::from_angle(start_angle + sweep);
                (center + radius * n, n)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub pos: Vec2,
    pub normal: Vec2,
    pub kind: BoundaryKind,
    pub piece: usize,
}

/// First entry point of a ray into the scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub piece: usize,
    pub s: f64,
    pub pos: Vec2,
    pub normal: Vec2,
    pub kind: BoundaryKind,
    /// The hit landed within [`JUNCTION_TOL`] of a sharp corner (`r = 0` only).
    pub corner: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScattererBoundary {
    pub pieces: Vec<BoundaryPiece>,
    /// `cum_len[k]` is the arclength at the start of piece `k`; one extra
    /// trailing entry holds the total.
    pub cum_len: Vec<f64>,
    pub total_len: f64,
    params: ModelParams,
    /// Rhombus vertices (right, top, left, bottom) before growth.
    vertices: [Vec2; 4],
}

/// Builds ∂S′ for the cell at the origin. Assumes `p` passed [`validate_params`]
/// apart from possible trapping overlap, which the geometry itself tolerates.
pub fn build_scatterer(p: &ModelParams) -> ScattererBoundary {
    let mut pieces = Vec::with_capacity(9);
    let mut vertices = [Vec2::ZERO; 4];
    match p.kind {
        ScattererKind::WindTree => {
            // Exact symmetry at θ = π/4 keeps opposite walls exactly parallel.
            let (st, ct) = if p.is_square_rhombus() {
                (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)
            } else {
                p.theta.sin_cos()
            };
            let th = p.theta;
            let right = Vec2::new(p.a * st, 0.0);
            let top = Vec2::new(0.0, p.a * ct);
            let left = Vec2::new(-p.a * st, 0.0);
            let bottom = Vec2::new(0.0, -p.a * ct);
            vertices = [right, top, left, bottom];
            let arc = |center: Vec2, start_angle: f64, sweep: f64| BoundaryPiece::Arc {
                center,
                radius: p.r,
                start_angle,
                sweep,
            };
            let seg = |from: Vec2, to: Vec2, normal: Vec2| {
                let start = from + p.r * normal;
                let end = to + p.r * normal;
                let dir = (end - start).normalized();
                BoundaryPiece::Segment {
                    start,
                    end,
                    normal,
                    dir,
                    len: p.a,
                }
            };
            pieces.push(arc(right, 0.0, th));
            pieces.push(seg(right, top, Vec2::new(ct, st)));
            pieces.push(arc(top, th, PI - 2.0 * th));
            pieces.push(seg(top, left, Vec2::new(-ct, st)));
            pieces.push(arc(left, PI - th, 2.0 * th));
            pieces.push(seg(left, bottom, Vec2::new(-ct, -st)));
            pieces.push(arc(bottom, PI + th, PI - 2.0 * th));
            pieces.push(seg(bottom, right, Vec2::new(ct, -st)));
            pieces.push(arc(right, TAU - th, th));
        }
        ScattererKind::LorentzDisk { radius } => {
            pieces.push(BoundaryPiece::Arc {
                center: Vec2::ZERO,
                radius: radius + p.r,
                start_angle: 0.0,
                sweep: TAU,
            });
        }
    }
    let mut cum_len = Vec::with_capacity(pieces.len() + 1);
    let mut acc = 0.0;
    for piece in &pieces {
        cum_len.push(acc);
        acc += piece.len();
    }
    // Exact closed form rather than the float sum of pieces.
    let total_len = match p.kind {
        ScattererKind::WindTree => 4.0 * p.a + TAU * p.r,
        ScattererKind::LorentzDisk { radius } => TAU * (radius + p.r),
    };
    cum_len.push(total_len);
    ScattererBoundary {
        pieces,
        cum_len,
        total_len,
        params: *p,
        vertices,
    }
}

impl ScattererBoundary {
    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Index of the non-empty piece containing arclength `s`.
    fn piece_at(&self, s: f64) -> usize {
        // Last k with cum_len[k] <= s, skipping zero-length pieces.
        let mut k = self.cum_len[..self.pieces.len()].partition_point(|&c| c <= s);
        k = k.saturating_sub(1);
        while k + 1 < self.pieces.len() && self.pieces[k].is_empty() {
            k += 1;
        }
        while self.pieces[k].is_empty() && k > 0 {
            k -= 1;
        }
        k
    }

    /// Position, outward normal and component kind at arclength `s`.
    pub fn boundary_point(&self, s: f64) -> Result<BoundaryPoint> {
        if !(0.0..self.total_len).contains(&s) {
            return Err(Error::OutOfRange { s, total: self.total_len });
        }
        Ok(self.point_unchecked(s))
    }

    #[inline]
    pub(crate) fn point_unchecked(&self, s: f64) -> BoundaryPoint {
        let k = self.piece_at(s);
        let piece = &self.pieces[k];
        let u = (s - self.cum_len[k]).clamp(0.0, piece.len());
        let (pos, normal) = piece.at(u);
        BoundaryPoint {
            pos,
            normal,
            kind: piece.kind(),
            piece: k,
        }
    }

    /// Distance in arclength from `s` to the nearest junction between pieces.
    pub fn distance_to_junction(&self, s: f64) -> f64 {
        if self.pieces.len() == 1 {
            return f64::INFINITY;
        }
        let k = self.piece_at(s);
        let lo = s - self.cum_len[k];
        let hi = self.cum_len[k] + self.pieces[k].len() - s;
        let d = lo.min(hi);
        // s = 0 sits mid-arc for r > 0, but is the right corner when r = 0.
        if k == 0 && self.pieces[0].is_empty() {
            return d.min(s).min(self.total_len - s);
        }
        d
    }

    /// Arclength of the boundary point nearest to `pos` (inverse of [`Self::boundary_point`]).
    pub fn arclength_of(&self, pos: Vec2) -> f64 {
        let mut best = (f64::INFINITY, 0.0);
        for (k, piece) in self.pieces.iter().enumerate() {
            if piece.is_empty() {
                continue;
            }
            let (dist, u) = match *piece {
                BoundaryPiece::Segment { start, dir, len, .. } => {
                    let u = (pos - start).dot(dir).clamp(0.0, len);
                    ((start + u * dir - pos).norm(), u)
                }
                BoundaryPiece::Arc {
                    center,
                    radius,
                    start_angle,
                    sweep,
                } => {
                    let rel = pos - center;
                    let off = wrap_angle(rel.angle() - start_angle);
                    let off = if off > sweep {
                        // Outside the arc: snap to the closer end.
                        if off - sweep < TAU - off {
                            sweep
                        } else {
                            0.0
                        }
                    } else {
                        off
                    };
                    let q = center + radius * Vec2::from_angle(start_angle + off);
                    ((q - pos).norm(), radius * off)
                }
            };
            if dist < best.0 {
                best = (dist, self.cum_len[k] + u);
            }
        }
        let s = best.1;
        if s >= self.total_len {
            s - self.total_len
        } else {
            s
        }
    }

    /// Pairs of (end of piece k, start of piece k+1), cyclically; used to check C¹ closure.
    pub fn junctions(&self) -> Vec<((Vec2, Vec2), (Vec2, Vec2))> {
        let n = self.pieces.len();
        (0..n)
            .map(|k| {
                let a = self.pieces[k].end_point();
                let b = self.pieces[(k + 1) % n].at(0.0);
                (a, b)
            })
            .collect()
    }

    /// First entry of the ray `o + t·d` (`|d| = 1`, `t > 1e-12`) into the
    /// scatterer centered at the origin. Grazing contacts count as misses.
    pub fn ray_entry(&self, o: Vec2, d: Vec2) -> Option<RayHit> {
        // Bounding-circle rejection.
        let rho = self.params.circumradius() + 1e-9;
        let b = o.dot(d);
        let perp = o - b * d;
        if perp.norm_sq() > rho * rho || (b > 0.0 && o.norm_sq() > rho * rho) {
            return None;
        }
        let mut best: Option<RayHit> = None;
        for (k, piece) in self.pieces.iter().enumerate() {
            let cand = match *piece {
                BoundaryPiece::Segment {
                    start,
                    normal,
                    dir,
                    len,
                    ..
                } => {
                    let denom = d.dot(normal);
                    if denom > -TANGENCY_TOL {
                        continue;
                    }
                    let t = (start - o).dot(normal) / denom;
                    if t <= 1e-12 {
                        continue;
                    }
                    let q = o + t * d;
                    let u = (q - start).dot(dir);
                    if !(-1e-12..=len + 1e-12).contains(&u) {
                        continue;
                    }
                    let u = u.clamp(0.0, len);
                    let corner = self.params.r == 0.0 && (u < JUNCTION_TOL || len - u < JUNCTION_TOL);
                    RayHit {
                        t,
                        piece: k,
                        s: self.cum_len[k] + u,
                        pos: start + u * dir,
                        normal,
                        kind: BoundaryKind::Flat,
                        corner,
                    }
                }
                BoundaryPiece::Arc {
                    center,
                    radius,
                    start_angle,
                    sweep,
                } => {
                    if radius == 0.0 {
                        continue;
                    }
                    let oc = o - center;
                    let bb = oc.dot(d);
                    let h = oc - bb * d;
                    let disc = radius * radius - h.norm_sq();
                    if disc <= TANGENCY_TOL {
                        continue;
                    }
                    let t = -bb - disc.sqrt();
                    if t <= 1e-12 {
                        continue;
                    }
                    let rel = oc + t * d;
                    let off = if sweep >= TAU {
                        wrap_angle(rel.angle() - start_angle)
                    } else {
                        let off = wrap_angle(rel.angle() - start_angle);
                        if off > sweep + 1e-12 {
                            if off > TAU - 1e-12 {
                                0.0
                            } else {
                                continue;
                            }
                        } else {
                            off.min(sweep)
                        }
                    };
                    let normal = if sweep >= TAU || off < sweep {
                        rel * (1.0 / radius)
                    } else {
                        Vec2::from_angle(start_angle + off)
                    };
                    let mut s = self.cum_len[k] + radius * off;
                    if s >= self.total_len {
                        s -= self.total_len;
                    }
                    RayHit {
                        t,
                        piece: k,
                        s,
                        pos: center + radius * normal,
                        normal,
                        kind: BoundaryKind::Dispersing,
                        corner: false,
                    }
                }
            };
            if best.is_none_or(|b| cand.t < b.t) {
                best = Some(cand);
            }
        }
        best
    }

    /// Whether `q` (relative to the scatterer center) lies strictly inside,
    /// deeper than `tol`.
    pub fn contains(&self, q: Vec2, tol: f64) -> bool {
        let p = &self.params;
        match p.kind {
            ScattererKind::LorentzDisk { radius } => q.norm() < radius + p.r - tol,
            ScattererKind::WindTree => {
                let [right, top, ..] = self.vertices;
                let inside_rhombus = q.x.abs() / right.x + q.y.abs() / top.y <= 1.0;
                if inside_rhombus {
                    return true;
                }
                // Distance to the rhombus edge in the quadrant of q.
                let v1 = Vec2::new(right.x * q.x.signum(), 0.0);
                let v2 = Vec2::new(0.0, top.y * q.y.signum());
                let e = v2 - v1;
                let u = ((q - v1).dot(e) / e.norm_sq()).clamp(0.0, 1.0);
                (v1 + u * e - q).norm() < p.r - tol
            }
        }
    }

    /// Rhombus vertices before growth: right, top, left, bottom.
    pub fn vertices(&self) -> [Vec2; 4] {
        self.vertices
    }
}

/// Wraps an angle into [0, 2π).
#[inline]
pub(crate) fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(TAU);
    if y >= TAU {
        0.0
    } else {
        y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub perimeter: f64,
    pub area: f64,
    /// Mean free path of the billiard flow, π·|Q|/|∂Q| with |Q| = 1 − area.
    pub mean_free_path: f64,
}

pub fn geometry_summary(p: &ModelParams) -> GeometrySummary {
    let (perimeter, area) = match p.kind {
        ScattererKind::WindTree => (
            4.0 * p.a + TAU * p.r,
            p.a * p.a * (2.0 * p.theta).sin() + 4.0 * p.a * p.r + PI * p.r * p.r,
        ),
        ScattererKind::LorentzDisk { radius } => {
            let rr = radius + p.r;
            (TAU * rr, PI * rr * rr)
        }
    };
    GeometrySummary {
        perimeter,
        area,
        mean_free_path: PI * (1.0 - area) / perimeter,
    }
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn canonical() -> ModelParams {
        ModelParams::wind_tree(FRAC_PI_4, 0.4, 0.1)
    }

    #[test]
    fn validate_examples() {
        let rep = validate_params(&canonical()).unwrap();
        assert!(rep.pure_type_ii_regime);

        let rep = validate_params(&ModelParams::wind_tree(FRAC_PI_4, 0.4, 0.0)).unwrap();
        assert!(!rep.pure_type_ii_regime);

        let err = validate_params(&ModelParams::wind_tree(FRAC_PI_4, 0.8, 0.1)).unwrap_err();
        assert!(err.is_trapping());
        // a·cosθ + r ≈ 0.66569
        match err {
            Error::InvalidParams(v) => match &v[0] {
                Violation::TrappingConfiguration { half_extent, .. } => {
                    assert!((half_extent - 0.665_685_424_949_238).abs() < 1e-12)
                }
                other => panic!("{other:?}"),
            },
            _ => unreachable!(),
        }
    }

    #[test]
    fn validate_rejects_nonpositive() {
        let err = validate_params(&ModelParams::wind_tree(FRAC_PI_4, -0.1, 0.1)).unwrap_err();
        assert!(matches!(err, Error::InvalidParams(ref v) if matches!(v[0], Violation::NonPositiveDimension { .. })));
        let err = validate_params(&ModelParams::wind_tree(1.0, 0.3, 0.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidParams(ref v) if matches!(v[0], Violation::AngleOutOfRange { .. })));
        assert!(validate_params(&ModelParams::lorentz(0.3, 0.1)).is_ok());
        assert!(validate_params(&ModelParams::lorentz(0.3, 0.2)).unwrap_err().is_trapping());
    }

    #[test]
    fn perimeter_examples() {
        let b = build_scatterer(&canonical());
        assert!((b.total_len - (1.6 + 0.2 * PI)).abs() < 1e-12);
        assert!((b.total_len - 2.228_318_530_717_958_6).abs() < 1e-12);

        let b0 = build_scatterer(&ModelParams::wind_tree(FRAC_PI_4, 0.4, 0.0));
        assert!((b0.total_len - 1.6).abs() < 1e-15);
        let flats = b0.pieces.iter().filter(|p| p.kind() == BoundaryKind::Flat).count();
        assert_eq!(flats, 4);
        assert!(b0.pieces.iter().filter(|p| p.kind() == BoundaryKind::Dispersing).all(|p| p.is_empty()));

        let bd = build_scatterer(&ModelParams::lorentz(0.3, 0.1));
        assert_eq!(bd.pieces.len(), 1);
        assert!((bd.total_len - 0.8 * PI).abs() < 1e-15);
    }

    #[test]
    fn boundary_point_examples() {
        let b = build_scatterer(&canonical());
        let p0 = b.boundary_point(0.0).unwrap();
        let x = 0.4 * FRAC_PI_4.sin() + 0.1;
        assert!((p0.pos - Vec2::new(x, 0.0)).norm() < 1e-15);
        assert!((x - 0.382_842_712_474_619).abs() < 1e-12);
        assert!((p0.normal - Vec2::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(p0.kind, BoundaryKind::Dispersing);

        let ph = b.boundary_point(b.total_len / 2.0).unwrap();
        assert!((ph.pos - Vec2::new(-x, 0.0)).norm() < 1e-12);
        assert!((ph.normal - Vec2::new(-1.0, 0.0)).norm() < 1e-12);
        assert_eq!(ph.kind, BoundaryKind::Dispersing);

        // Middle of the first flat.
        let s = b.cum_len[1] + 0.2;
        let pf = b.boundary_point(s).unwrap();
        assert_eq!(pf.kind, BoundaryKind::Flat);
        match b.pieces[1] {
            BoundaryPiece::Segment { normal, .. } => assert_eq!(pf.normal, normal),
            _ => unreachable!(),
        }

        assert!(matches!(b.boundary_point(b.total_len), Err(Error::OutOfRange { .. })));
        assert!(matches!(b.boundary_point(-1e-9), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn summary_examples() {
        let g = geometry_summary(&ModelParams::wind_tree(FRAC_PI_4, SQRT_2 / 4.0, 0.05));
        assert!((g.area - 0.203_564_659_752_629).abs() < 1e-12, "{}", g.area);
        assert!((g.mean_free_path - 1.447_647_969_138_456).abs() < 1e-12, "{}", g.mean_free_path);

        let g0 = geometry_summary(&ModelParams::wind_tree(0.5, 0.3, 0.0));
        assert!((g0.area - 0.09 * 1.0f64.sin()).abs() < 1e-15);

        let gd = geometry_summary(&ModelParams::lorentz(0.3, 0.1));
        assert!((gd.area - 0.16 * PI).abs() < 1e-15);
        assert!((gd.mean_free_path - PI * (1.0 - 0.16 * PI) / (0.8 * PI)).abs() < 1e-15);
    }

    #[test]
    fn arc_turning_angles() {
        let th = 0.4;
        let b = build_scatterer(&ModelParams::wind_tree(th, 0.3, 0.05));
        let sweeps: Vec<f64> = b
            .pieces
            .iter()
            .filter_map(|p| match p {
                BoundaryPiece::Arc { sweep, .. } => Some(*sweep),
                _ => None,
            })
            .collect();
        // Right arc is split across s = 0.
        assert!((sweeps[0] + sweeps[4] - 2.0 * th).abs() < 1e-15);
        assert!((sweeps[1] - (PI - 2.0 * th)).abs() < 1e-15);
        assert!((sweeps[2] - 2.0 * th).abs() < 1e-15);
        assert!((sweeps[3] - (PI - 2.0 * th)).abs() < 1e-15);
    }

    #[test]
    fn ray_entry_head_on() {
        let b = build_scatterer(&canonical());
        let hit = b.ray_entry(Vec2::new(-2.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        assert!((hit.t - (2.0 - 0.382_842_712_474_619)).abs() < 1e-12);
        assert_eq!(hit.kind, BoundaryKind::Dispersing);
        assert!((hit.normal - Vec2::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((hit.s - b.total_len / 2.0).abs() < 1e-12);
        assert!(b.ray_entry(Vec2::new(-2.0, 0.9), Vec2::new(1.0, 0.0)).is_none());
        assert!(b.ray_entry(Vec2::new(2.0, 0.0), Vec2::new(1.0, 0.0)).is_none());
    }

    #[test]
    fn contains_matches_geometry() {
        let b = build_scatterer(&canonical());
        assert!(b.contains(Vec2::ZERO, 0.0));
        assert!(b.contains(Vec2::new(0.38, 0.0), 0.0));
        assert!(!b.contains(Vec2::new(0.39, 0.0), 0.0));
        for i in 0..200 {
            let s = b.total_len * i as f64 / 200.0 + 1e-3;
            let bp = b.boundary_point(s).unwrap();
            assert!(b.contains(bp.pos - 1e-6 * bp.normal, 0.0));
            assert!(!b.contains(bp.pos + 1e-6 * bp.normal, 0.0));
        }
    }

    fn arb_params() -> impl Strategy<Value = ModelParams> {
        (0.05f64..FRAC_PI_4, 0.05f64..0.6, 0.0f64..0.2).prop_filter_map("valid", |(th, a, r)| {
            let p = ModelParams::wind_tree(th, a, r);
            validate_params(&p).ok().map(|_| p)
        })
    }

    proptest! {
        #[test]
        fn perimeter_identity(p in arb_params()) {
            let b = build_scatterer(&p);
            let sum: f64 = b.pieces.iter().map(|x| x.len()).sum();
            prop_assert!((b.total_len - (4.0 * p.a + TAU * p.r)).abs() < 1e-12);
            prop_assert!((sum - b.total_len).abs() < 1e-12);
        }

        #[test]
        fn c1_closure(p in arb_params()) {
            let b = build_scatterer(&p);
            for ((pa, na), (pb, nb)) in b.junctions() {
                prop_assert!((pa - pb).norm() < 1e-12);
                prop_assert!((na - nb).norm() < 1e-9);
            }
        }

        #[test]
        fn central_symmetry(p in arb_params(), u in 0.0f64..1.0) {
            let b = build_scatterer(&p);
            let s = u * b.total_len;
            let s2 = (s + b.total_len / 2.0) % b.total_len;
            let x = b.boundary_point(s).unwrap();
            let y = b.boundary_point(s2).unwrap();
            prop_assert!((x.pos + y.pos).norm() < 1e-12);
            prop_assert!((x.normal + y.normal).norm() < 1e-12);
        }

        #[test]
        fn arclength_roundtrip(p in arb_params(), u in 0.0f64..1.0) {
            prop_assume!(p.r > 1e-3);
            let b = build_scatterer(&p);
            let s = u * b.total_len;
            let bp = b.boundary_point(s).unwrap();
            let back = b.arclength_of(bp.pos);
            let diff = (back - s).abs().min(b.total_len - (back - s).abs());
            prop_assert!(diff < 1e-10, "s={} back={}", s, back);
        }

        #[test]
        fn lipschitz(p in arb_params(), u in 0.0f64..1.0, du in 0.0f64..0.2) {
            let b = build_scatterer(&p);
            let s1 = u * b.total_len;
            let s2 = (s1 + du).min(b.total_len - 1e-12);
            let d = (b.boundary_point(s1).unwrap().pos - b.boundary_point(s2).unwrap().pos).norm();
            prop_assert!(d <= (s2 - s1) + 1e-12);
        }
    }

    #[test]
    fn arclength_roundtrip_bulk() {
        use rand::{Rng, SeedableRng};
        let p = canonical();
        let b = build_scatterer(&p);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let s = rng.random::<f64>() * b.total_len;
            let back = b.arclength_of(b.boundary_point(s).unwrap().pos);
            let diff = (back - s).abs().min(b.total_len - (back - s).abs());
            assert!(diff < 1e-10);
        }
    }
}
