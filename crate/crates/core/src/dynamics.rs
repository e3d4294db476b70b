//! Billiard map on the collision space of the periodic lattice: free flights
//! by grid traversal, specular reflection, Liouville sampling and orbits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corridors::{enumerate_corridors, CorridorLabel, CorridorSpec};
use crate::error::{Error, Result};
use crate::geometry::{
    build_scatterer, check_params, BoundaryKind, ModelParams, ScattererBoundary, ScattererKind, Violation,
    JUNCTION_TOL,
    TANGENCY_TOL,
};
use crate::vec2::Vec2;

/// Flights longer than this may be assigned a corridor class.
pub const L_MIN: f64 = 5.0;
/// Default cap on a single free flight.
pub const DEFAULT_MAX_LEN: f64 = 1e4;
const MAX_SAMPLE_ATTEMPTS: usize = 1000;

/// State of the billiard map: a point on ∂S′ of the scatterer at `cell` and
/// the angle of the outgoing velocity measured from the outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub cell: (i64, i64),
    pub s: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorridorClass {
    None,
    Horizontal,
    Vertical,
    ObliquePlus,
    ObliqueMinus,
}

impl CorridorClass {
    pub const ALL: [CorridorClass; 5] = [
        CorridorClass::None,
        CorridorClass::Horizontal,
        CorridorClass::Vertical,
        CorridorClass::ObliquePlus,
        CorridorClass::ObliqueMinus,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            CorridorClass::None => "none",
            CorridorClass::Horizontal => "horizontal",
            CorridorClass::Vertical => "vertical",
            CorridorClass::ObliquePlus => "oblique_plus",
            CorridorClass::ObliqueMinus => "oblique_minus",
        }
    }

    pub fn is_oblique(self) -> bool {
        matches!(self, CorridorClass::ObliquePlus | CorridorClass::ObliqueMinus)
    }

    pub fn is_axis(self) -> bool {
        matches!(self, CorridorClass::Horizontal | CorridorClass::Vertical)
    }

    fn from_label(l: CorridorLabel) -> Option<Self> {
        match l {
            CorridorLabel::Horizontal => Some(CorridorClass::Horizontal),
            CorridorLabel::Vertical => Some(CorridorClass::Vertical),
            CorridorLabel::ObliquePlus => Some(CorridorClass::ObliquePlus),
            CorridorLabel::ObliqueMinus => Some(CorridorClass::ObliqueMinus),
            CorridorLabel::ObliqueOther(..) => None,
        }
    }
}

/// One free flight `r(X)` between consecutive collisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightRecord {
    pub displacement: Vec2,
    pub length: f64,
    pub start_kind: BoundaryKind,
    pub end_kind: BoundaryKind,
    pub start_piece: usize,
    pub end_piece: usize,
    pub corridor_class: CorridorClass,
}

/// Where a free flight ends, before reflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Collision {
    pub cell: (i64, i64),
    pub s: f64,
    /// Hit point relative to the center of `cell`.
    pub pos: Vec2,
    pub normal: Vec2,
    pub kind: BoundaryKind,
    pub piece: usize,
    pub incoming: Vec2,
    pub flight: FlightRecord,
}

/// Specular reflection `v − 2(v·n)n` of an incoming unit velocity.
pub fn reflect(v: Vec2, n: Vec2) -> Result<Vec2> {
    let vn = v.dot(n);
    if vn.abs() < TANGENCY_TOL {
        return Err(Error::GrazingImpact(vn.abs()));
    }
    Ok(v - (2.0 * vn) * n)
}

/// The billiard on the lattice of grown scatterers, shareable across threads.
#[derive(Debug, Clone)]
pub struct Billiard {
    params: ModelParams,
    boundary: ScattererBoundary,
    /// Open corridors carrying one of the four named classes.
    class_corridors: Vec<(CorridorClass, CorridorSpec)>,
    /// Neighbour offsets whose scatterers reach into a cell's square.
    candidates: Vec<(i64, i64)>,
    overlapping: bool,
    exact_diagonal: bool,
}

impl Billiard {
    /// Builds the engine, rejecting every invalid parameter set.
    pub fn new(p: ModelParams) -> Result<Self> {
        Self::build(p, false)
    }

    /// Like [`Billiard::new`], but accepts configurations whose grown
    /// scatterers overlap. The particle is then confined to a pocket.
    pub fn new_allow_overlap(p: ModelParams) -> Result<Self> {
        Self::build(p, true)
    }

    fn build(p: ModelParams, allow_overlap: bool) -> Result<Self> {
        let report = check_params(&p);
        let blocking: Vec<Violation> = report
            .violations
            .iter()
            .filter(|v| !(allow_overlap && matches!(v, Violation::TrappingConfiguration { .. })))
            .cloned()
            .collect();
        if !blocking.is_empty() {
            return Err(Error::InvalidParams(blocking));
        }
        let overlapping = !report.violations.is_empty();
        let boundary = build_scatterer(&p);
        let class_corridors = enumerate_corridors(&p, 1)
            .into_iter()
            .filter_map(|c| CorridorClass::from_label(c.label).map(|k| (k, c)))
            .collect();
        let (ex, ey) = (p.half_extent_x(), p.half_extent_y());
        let kx = ((ex + 0.5).ceil() as i64 - 1).max(0);
        let ky = ((ey + 0.5).ceil() as i64 - 1).max(0);
        let mut candidates = Vec::new();
        for di in -kx..=kx {
            for dj in -ky..=ky {
                if (di as f64).abs() < ex + 0.5 && (dj as f64).abs() < ey + 0.5 {
                    candidates.push((di, dj));
                }
            }
        }
        Ok(Billiard {
            params: p,
            boundary,
            class_corridors,
            candidates,
            overlapping,
            exact_diagonal: p.kind == ScattererKind::WindTree && p.is_square_rhombus(),
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn boundary(&self) -> &ScattererBoundary {
        &self.boundary
    }

    pub fn is_overlapping(&self) -> bool {
        self.overlapping
    }

    /// Open corridors among horizontal, vertical and the two diagonals.
    pub fn class_corridors(&self) -> &[(CorridorClass, CorridorSpec)] {
        &self.class_corridors
    }

    /// Position (relative to the cell center), outward normal and outgoing velocity.
    pub fn state_vectors(&self, x: &PhasePoint) -> (Vec2, Vec2, Vec2) {
        let bp = self.boundary.point_unchecked(x.s);
        (bp.pos, bp.normal, bp.normal.rotate(x.phi))
    }

    /// Unfolded position of the collision point.
    pub fn position(&self, x: &PhasePoint) -> Vec2 {
        let bp = self.boundary.point_unchecked(x.s);
        Vec2::new(x.cell.0 as f64, x.cell.1 as f64) + bp.pos
    }

    /// Whether a boundary point of the origin scatterer lies inside a neighbour.
    fn covered_by_neighbour(&self, pos: Vec2) -> bool {
        self.overlapping
            && self.candidates.iter().any(|&(di, dj)| {
                (di, dj) != (0, 0) && self.boundary.contains(pos - Vec2::new(di as f64, dj as f64), 0.0)
            })
    }

    /// Draws a phase point from the Liouville measure `cos φ dφ ds / (2|∂S′|)`.
    pub fn sample_liouville<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PhasePoint> {
        let total = self.boundary.total_len;
        for _ in 0..MAX_SAMPLE_ATTEMPTS {
            let s = rng.random::<f64>() * total;
            let u = rng.random::<f64>();
            if s >= total || self.boundary.distance_to_junction(s) < JUNCTION_TOL {
                continue;
            }
            if self.covered_by_neighbour(self.boundary.point_unchecked(s).pos) {
                continue;
            }
            let phi = (2.0 * u - 1.0).asin();
            return Ok(PhasePoint { cell: (0, 0), s, phi });
        }
        Err(Error::SamplingExhausted(MAX_SAMPLE_ATTEMPTS))
    }

    /// Follows the outgoing ray of `from` to the next scatterer.
    pub fn next_collision(&self, from: &PhasePoint, max_len: f64) -> Result<Collision> {
        let d = self.boundary.point_unchecked(from.s).normal.rotate(from.phi);
        self.flight(from.cell, from.s, d, max_len)
    }

    fn flight(&self, cell: (i64, i64), s: f64, d: Vec2, max_len: f64) -> Result<Collision> {
        let start = self.boundary.point_unchecked(s);
        let o = start.pos;

        let mut i = (o.x + 0.5).floor() as i64;
        let mut j = (o.y + 0.5).floor() as i64;
        let (step_i, mut t_max_x, dt_x) = axis_setup(o.x, d.x, i);
        let (step_j, mut t_max_y, dt_y) = axis_setup(o.y, d.y, j);
        let mut t_enter = 0.0f64;

        loop {
            let t_exit = t_max_x.min(t_max_y);
            // Back the local origin up so the square's scatterers sit ahead of it.
            let t_base = (t_enter - 1.0).max(0.0);
            let base = o + t_base * d;
            let mut best: Option<(f64, (i64, i64), crate::geometry::RayHit)> = None;
            for &(di, dj) in &self.candidates {
                let (ci, cj) = (i + di, j + dj);
                if (ci, cj) == (0, 0) {
                    continue;
                }
                let local = base - Vec2::new(ci as f64, cj as f64);
                if let Some(hit) = self.boundary.ray_entry(local, d) {
                    let t = t_base + hit.t;
                    if self.overlapping && t > t_exit + 1e-9 {
                        continue;
                    }
                    if best.is_none_or(|b| t < b.0) {
                        best = Some((t, (ci, cj), hit));
                    }
                }
            }
            if let Some((t, (ci, cj), hit)) = best {
                if t > max_len {
                    return Err(Error::EscapedMaxLen { max_len });
                }
                if hit.corner {
                    return Err(Error::CornerHit);
                }
                let displacement = t * d;
                let corridor_class = self.classify(displacement, t);
                let flight = FlightRecord {
                    displacement,
                    length: t,
                    start_kind: start.kind,
                    end_kind: hit.kind,
                    start_piece: start.piece,
                    end_piece: hit.piece,
                    corridor_class,
                };
                return Ok(Collision {
                    cell: (cell.0 + ci, cell.1 + cj),
                    s: hit.s,
                    pos: hit.pos,
                    normal: hit.normal,
                    kind: hit.kind,
                    piece: hit.piece,
                    incoming: d,
                    flight,
                });
            }
            if t_exit > max_len {
                return Err(Error::EscapedMaxLen { max_len });
            }
            t_enter = t_exit;
            if t_max_x < t_max_y {
                i += step_i;
                t_max_x += dt_x;
            } else {
                j += step_j;
                t_max_y += dt_y;
            }
        }
    }

    /// Corridor class of a flight, by the nearest open named corridor.
    pub fn classify(&self, displacement: Vec2, length: f64) -> CorridorClass {
        if length <= L_MIN || self.class_corridors.is_empty() {
            return CorridorClass::None;
        }
        let dir = displacement * (1.0 / length);
        let mut best = (f64::INFINITY, CorridorClass::None, 0.0);
        for (class, c) in &self.class_corridors {
            let sin = dir.cross(c.axis()).abs();
            if sin < best.0 {
                best = (sin, *class, c.width_eff);
            }
        }
        let bound = (best.2 + 2.0 * self.params.size_scale()) / length;
        if best.0 <= bound {
            best.1
        } else {
            CorridorClass::None
        }
    }

    /// One application of the billiard map `T`, with the flight it took.
    pub fn billiard_map(&self, x: &PhasePoint, max_len: f64) -> Result<(PhasePoint, FlightRecord)> {
        let c = self.next_collision(x, max_len)?;
        let out = self.outgoing(&c)?;
        Ok((self.phase_after(&c, out), c.flight))
    }

    fn phase_after(&self, c: &Collision, out: Vec2) -> PhasePoint {
        let phi = c.normal.cross(out).atan2(c.normal.dot(out));
        PhasePoint { cell: c.cell, s: c.s, phi }
    }

    /// Reflected velocity. On the diagonal walls of the square rhombus the
    /// reflection is a signed swap of components, done exactly so that
    /// neutral runs keep their angle to the last bit.
    fn outgoing(&self, c: &Collision) -> Result<Vec2> {
        if self.exact_diagonal && c.kind == BoundaryKind::Flat {
            let v = c.incoming;
            let vn = v.dot(c.normal);
            if vn.abs() < TANGENCY_TOL {
                return Err(Error::GrazingImpact(vn.abs()));
            }
            let sgn = -(c.normal.x.signum() * c.normal.y.signum());
            return Ok(Vec2::new(sgn * v.y, sgn * v.x));
        }
        // Keep the carried velocity at unit speed.
        Ok(reflect(c.incoming, c.normal)?.normalized())
    }

    /// `T⁻¹ = R∘T∘R` with the time reversal `R(s, φ) = (s, −φ)`.
    pub fn inverse_map(&self, x: &PhasePoint, max_len: f64) -> Result<PhasePoint> {
        let rev = PhasePoint { phi: -x.phi, ..*x };
        let (y, _) = self.billiard_map(&rev, max_len)?;
        Ok(PhasePoint { phi: -y.phi, ..y })
    }

    /// Orbit iterator starting at `start`.
    pub fn orbit(&self, start: PhasePoint, max_len: f64) -> Orbit<'_> {
        Orbit {
            billiard: self,
            state: start,
            origin: self.position(&start),
            origin_cell: start.cell,
            origin_pos: self.boundary.point_unchecked(start.s).pos,
            time: 0.0,
            n: 0,
            max_len,
            dir: None,
        }
    }

    /// Runs `T` from `start` until `stop` and records every collision.
    pub fn trace(&self, start: PhasePoint, stop: Stop, max_len: f64) -> Trajectory {
        let mut orbit = self.orbit(start, max_len);
        let bp = self.boundary.point_unchecked(start.s);
        let mut points = vec![TrajectoryPoint {
            n: 0,
            cell: start.cell,
            pos: bp.pos,
            t: 0.0,
            s: start.s,
            phi: start.phi,
            end_kind: bp.kind,
            corridor_class: CorridorClass::None,
        }];
        let mut flights = Vec::new();
        let mut termination = None;
        loop {
            let done = match stop {
                Stop::Collisions(n) => orbit.n >= n,
                Stop::Time(t) => orbit.time >= t,
            };
            if done {
                break;
            }
            match orbit.step() {
                Ok(f) => {
                    let st = orbit.state;
                    let bp = self.boundary.point_unchecked(st.s);
                    points.push(TrajectoryPoint {
                        n: orbit.n,
                        cell: st.cell,
                        pos: bp.pos,
                        t: orbit.time,
                        s: st.s,
                        phi: st.phi,
                        end_kind: f.end_kind,
                        corridor_class: f.corridor_class,
                    });
                    flights.push(f);
                }
                Err(e) => {
                    termination = Some(e);
                    break;
                }
            }
        }
        Trajectory {
            initial: start,
            points,
            flights,
            termination,
        }
    }
}

fn axis_setup(o: f64, d: f64, i: i64) -> (i64, f64, f64) {
    if d > 0.0 {
        (1, ((i as f64 + 0.5) - o) / d, 1.0 / d)
    } else if d < 0.0 {
        (-1, ((i as f64 - 0.5) - o) / d, -1.0 / d)
    } else {
        (0, f64::INFINITY, f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    Collisions(u64),
    /// Stop at the first collision at or after this time.
    Time(f64),
}

/// Streaming orbit: state, unfolded displacement and elapsed time.
#[derive(Debug, Clone)]
pub struct Orbit<'a> {
    billiard: &'a Billiard,
    pub state: PhasePoint,
    origin: Vec2,
    origin_cell: (i64, i64),
    origin_pos: Vec2,
    pub time: f64,
    pub n: u64,
    max_len: f64,
    dir: Option<(PhasePoint, Vec2)>,
}

impl Orbit<'_> {
    pub fn step(&mut self) -> Result<FlightRecord> {
        let b = self.billiard;
        // Reuse the exact reflected velocity unless `state` was edited.
        let d = match self.dir {
            Some((x, d)) if x == self.state => d,
            _ => b.boundary.point_unchecked(self.state.s).normal.rotate(self.state.phi),
        };
        let c = b.flight(self.state.cell, self.state.s, d, self.max_len)?;
        let out = b.outgoing(&c)?;
        let next = b.phase_after(&c, out);
        let flight = c.flight;
        self.dir = Some((next, out));
        self.state = next;
        self.time += flight.length;
        self.n += 1;
        Ok(flight)
    }

    /// `x_n − x_0`, from lattice and local parts separately.
    pub fn displacement(&self) -> Vec2 {
        let pos = self.billiard.boundary.point_unchecked(self.state.s).pos;
        let dc = Vec2::new(
            (self.state.cell.0 - self.origin_cell.0) as f64,
            (self.state.cell.1 - self.origin_cell.1) as f64,
        );
        dc + (pos - self.origin_pos)
    }

    /// Unfolded start point `x_0`.
    pub fn origin(&self) -> Vec2 {
        self.origin
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub n: u64,
    pub cell: (i64, i64),
    /// Collision point relative to the center of `cell`.
    pub pos: Vec2,
    pub t: f64,
    pub s: f64,
    pub phi: f64,
    pub end_kind: BoundaryKind,
    pub corridor_class: CorridorClass,
}

impl TrajectoryPoint {
    pub fn unfolded(&self) -> Vec2 {
        Vec2::new(self.cell.0 as f64, self.cell.1 as f64) + self.pos
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: PhasePoint,
    /// Collision points `x_0, x_1, …` with times.
    pub points: Vec<TrajectoryPoint>,
    pub flights: Vec<FlightRecord>,
    /// Error that ended the orbit early (e.g. an escaped flight).
    pub termination: Option<Error>,
}

impl Trajectory {
    pub fn is_censored(&self) -> bool {
        matches!(self.termination, Some(Error::EscapedMaxLen { .. }))
    }

    /// Position at time `t` by linear interpolation between collisions.
    pub fn position_at(&self, t: f64) -> Option<Vec2> {
        let k = self.points.partition_point(|p| p.t <= t);
        if k == 0 || k >= self.points.len() {
            return (k > 0 && (t - self.points[k - 1].t).abs() < 1e-12).then(|| self.points[k - 1].unfolded());
        }
        let (a, b) = (&self.points[k - 1], &self.points[k]);
        let u = (t - a.t) / (b.t - a.t);
        Some(a.unfolded() + u * (b.unfolded() - a.unfolded()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corridors::{axis_corridors, lemma3_l0};
    use crate::geometry::geometry_summary;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    fn canonical() -> Billiard {
        Billiard::new(ModelParams::wind_tree_rational(1, 1, 0.4, 0.1)).unwrap()
    }

    fn tail() -> Billiard {
        Billiard::new(ModelParams::wind_tree_rational(1, 1, SQRT_2 / 4.0, 0.05)).unwrap()
    }

    fn circ_dist(a: f64, b: f64, total: f64) -> f64 {
        let d = (a - b).abs();
        d.min(total - d)
    }

    #[test]
    fn reflect_examples() {
        let v = reflect(Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0)).unwrap();
        assert_eq!(v, Vec2::new(1.0, 0.0));
        let h = SQRT_2 / 2.0;
        let v = reflect(Vec2::new(-h, -h), Vec2::new(0.0, 1.0)).unwrap();
        assert!((v - Vec2::new(-h, h)).norm() < 1e-15);
        assert!(matches!(
            reflect(Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)),
            Err(Error::GrazingImpact(_))
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let v = Vec2::from_angle(rng.random::<f64>() * 2.0 * PI);
            let n = Vec2::from_angle(rng.random::<f64>() * 2.0 * PI);
            let n = if v.dot(n) > 0.0 { -n } else { n };
            if let Ok(w) = reflect(v, n) {
                assert!((w.norm() - 1.0).abs() < 1e-15);
                assert!((w.dot(n) + v.dot(n)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn period_two_orbit() {
        let b = canonical();
        let x0 = PhasePoint { cell: (0, 0), s: 0.0, phi: 0.0 };
        let expected = 1.0 - 2.0 * (0.4 * FRAC_PI_4.sin() + 0.1);
        let (x1, f) = b.billiard_map(&x0, 100.0).unwrap();
        assert_eq!(x1.cell, (1, 0));
        assert!((f.length - expected).abs() < 1e-12);
        assert!((f.length - 0.234_314_575_050_762).abs() < 1e-12);
        assert!((x1.s - b.boundary().total_len / 2.0).abs() < 1e-10);
        assert!(x1.phi.abs() < 1e-10);
        let (x2, _) = b.billiard_map(&x1, 100.0).unwrap();
        assert_eq!(x2.cell, (0, 0));
        assert!(circ_dist(x2.s, 0.0, b.boundary().total_len) < 1e-10);
        assert!(x2.phi.abs() < 1e-10);

        // Vertical counterpart from the topmost point.
        let top = b.boundary().arclength_of(Vec2::new(0.0, 0.4 * FRAC_PI_4.cos() + 0.1));
        let (y1, f) = b.billiard_map(&PhasePoint { cell: (0, 0), s: top, phi: 0.0 }, 100.0).unwrap();
        assert_eq!(y1.cell, (0, 1));
        assert!((f.length - expected).abs() < 1e-12);
    }

    #[test]
    fn period_two_trace() {
        let b = canonical();
        let x0 = PhasePoint { cell: (0, 0), s: 0.0, phi: 0.0 };
        let tr = b.trace(x0, Stop::Collisions(0), 100.0);
        assert_eq!(tr.points.len(), 1);
        assert_eq!(tr.points[0].t, 0.0);
        let tr = b.trace(x0, Stop::Collisions(100), 100.0);
        assert_eq!(tr.points.len(), 101);
        let len = 0.234_314_575_050_762;
        let x_0 = tr.points[0].unfolded();
        // The orbit is hyperbolic: round-off grows about fourfold per
        // collision, so only the first few returns are exact to 1e-9.
        for p in &tr.points[..=10] {
            let d = (p.unfolded() - x_0).norm();
            assert!(d < 1e-9 || (d - len).abs() < 1e-9, "n={} d={d}", p.n);
            assert!((p.t - p.n as f64 * len).abs() < 1e-9);
        }
    }

    #[test]
    fn next_collision_matches_oracle() {
        for b in [tail(), canonical(), Billiard::new(ModelParams::lorentz(0.3, 0.1)).unwrap()] {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let max_len = 12.0;
            let total = b.boundary().total_len;
            for _ in 0..200 {
                let x = b.sample_liouville(&mut rng).unwrap();
                let got = b.next_collision(&x, max_len);
                match crate::oracle::brute_force_next(&b, &x, max_len) {
                    Some((cell, s, t)) => {
                        let c = got.expect("engine missed a hit");
                        assert_eq!(c.cell, cell);
                        assert!(circ_dist(c.s, s, total) < 1e-9, "{} vs {}", c.s, s);
                        assert!((c.flight.length - t).abs() < 1e-9);
                    }
                    None => assert!(matches!(got, Err(Error::EscapedMaxLen { .. }))),
                }
            }
        }
    }

    #[test]
    fn overlapping_config_matches_oracle() {
        let p = ModelParams::wind_tree_rational(1, 1, 0.4, 0.25);
        assert!(Billiard::new(p).is_err());
        let b = Billiard::new_allow_overlap(p).unwrap();
        assert!(b.is_overlapping());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..300 {
            let x = b.sample_liouville(&mut rng).unwrap();
            let (o, _, _) = b.state_vectors(&x);
            for (di, dj) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                assert!(!b.boundary().contains(o - Vec2::new(di as f64, dj as f64), 0.0));
            }
            let (cell, s, _) = crate::oracle::brute_force_next(&b, &x, 5.0).unwrap();
            let c = b.next_collision(&x, 5.0).unwrap();
            assert_eq!(c.cell, cell);
            assert!(circ_dist(c.s, s, b.boundary().total_len) < 1e-9);
        }
    }

    #[test]
    fn reversibility() {
        let b = tail();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let total = b.boundary().total_len;
        for _ in 0..2000 {
            let x = b.sample_liouville(&mut rng).unwrap();
            let Ok((y, _)) = b.billiard_map(&x, 1e4) else { continue };
            let z = b.inverse_map(&PhasePoint { cell: (0, 0), ..y }, 1e4).unwrap();
            assert!(circ_dist(z.s, x.s, total) < 1e-9);
            assert!((z.phi - x.phi).abs() < 1e-9);
        }
    }

    #[test]
    fn liouville_median_and_edges() {
        let b = tail();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut phis: Vec<f64> = (0..20001).map(|_| b.sample_liouville(&mut rng).unwrap().phi).collect();
        phis.sort_by(f64::total_cmp);
        assert!(phis[10000].abs() < 0.03);
        assert!(phis.iter().all(|p| p.abs() <= FRAC_PI_2));
    }

    #[test]
    fn unit_speed_and_length_identity() {
        let b = canonical();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = b.sample_liouville(&mut rng).unwrap();
        let tr = b.trace(x, Stop::Collisions(2000), 1e4);
        for (k, f) in tr.flights.iter().enumerate() {
            assert!((f.displacement.norm() - f.length).abs() <= 1e-12 * f.length.max(1.0));
            let dx = tr.points[k + 1].unfolded() - tr.points[k].unfolded();
            assert!((dx.norm() - f.length).abs() < 1e-9);
            assert!((tr.points[k + 1].t - tr.points[k].t - f.length).abs() < 1e-9);
            if f.corridor_class != CorridorClass::None {
                assert!(f.length > L_MIN);
            }
        }
    }

    #[test]
    fn trajectory_stays_outside_scatterers() {
        let b = tail();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = b.sample_liouville(&mut rng).unwrap();
        let tr = b.trace(x, Stop::Collisions(500), 1e4);
        for w in tr.points.windows(2) {
            let (p, q) = (w[0].unfolded(), w[1].unfolded());
            for k in 1..8 {
                let m = p + (k as f64 / 8.0) * (q - p);
                let c = (m.x.round(), m.y.round());
                for di in -1..=1 {
                    for dj in -1..=1 {
                        let center = Vec2::new(c.0 + di as f64, c.1 + dj as f64);
                        assert!(!b.boundary().contains(m - center, 1e-10));
                    }
                }
            }
        }
    }

    #[test]
    fn time_interpolation_bound() {
        let b = tail();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let x = b.sample_liouville(&mut rng).unwrap();
        let tr = b.trace(x, Stop::Time(200.0), 1e4);
        assert!(tr.points.last().unwrap().t >= 200.0);
        for k in 0..400 {
            let t = k as f64 * 0.5;
            let pos = tr.position_at(t).unwrap();
            let n = tr.points.partition_point(|p| p.t <= t) - 1;
            let f = tr.flights[n].length;
            assert!((pos - tr.points[n].unfolded()).norm() <= f + 1e-12);
        }
    }

    #[test]
    fn mean_free_path_ergodic() {
        let b = tail();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = b.sample_liouville(&mut rng).unwrap();
        let mut orbit = b.orbit(x, 1e6);
        let n = 300_000;
        for _ in 0..n {
            orbit.step().unwrap();
        }
        let eta = orbit.time / n as f64;
        let pred = geometry_summary(b.params()).mean_free_path;
        assert!((eta / pred - 1.0).abs() < 0.03, "{eta} vs {pred}");
    }

    #[test]
    fn nu_symmetric() {
        let b = tail();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 100_000;
        let (mut sx, mut sy, mut sxx, mut syy) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let x = b.sample_liouville(&mut rng).unwrap();
            if let Ok((_, f)) = b.billiard_map(&x, 1e3) {
                let r = f.displacement;
                sx += r.x;
                sy += r.y;
                sxx += r.x * r.x;
                syy += r.y * r.y;
            }
        }
        let nf = n as f64;
        let mean = Vec2::new(sx / nf, sy / nf);
        let std = ((sxx + syy) / nf - mean.norm_sq()).sqrt();
        assert!(mean.norm() < 4.0 * std / nf.sqrt());
    }

    #[test]
    fn long_axis_flights_end_on_arcs_near_tangency() {
        let b = canonical();
        let p = *b.params();
        let [h, v] = axis_corridors(&p);
        let l0 = lemma3_l0(&p, &h).unwrap();
        assert!((lemma3_l0(&p, &v).unwrap() - l0).abs() < 1e-9);
        let eps = p.r * (FRAC_PI_2 - p.theta);
        let total = b.boundary().total_len;
        // Tangency points: rightmost, top, leftmost, bottom.
        let tangency = [0.0, total / 4.0, total / 2.0, 3.0 * total / 4.0];
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let mut near_max = 0.0f64;
        let mut far_max = 0.0f64;
        let mut far_count = 0;
        for _ in 0..400_000 {
            let x = b.sample_liouville(&mut rng).unwrap();
            let Ok((y, f)) = b.billiard_map(&x, 1e5) else { continue };
            if !f.corridor_class.is_axis() || f.length <= l0 {
                continue;
            }
            assert_eq!(f.start_kind, BoundaryKind::Dispersing);
            assert_eq!(f.end_kind, BoundaryKind::Dispersing);
            let dist = [x.s, y.s]
                .iter()
                .map(|&s| tangency.iter().map(|&t| circ_dist(s, t, total)).fold(f64::INFINITY, f64::min))
                .fold(0.0, f64::max);
            assert!(dist < eps, "{dist} >= {eps}");
            if f.length < 2.0 * l0 {
                near_max = near_max.max(dist);
            } else if f.length > 10.0 * l0 {
                far_max = far_max.max(dist);
                far_count += 1;
            }
        }
        assert!(far_count > 0);
        assert!(far_max < near_max);
    }
}
