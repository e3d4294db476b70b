//! Brute-force reference for the ray casting in the dynamics engine. Every
//! scatterer in range is tested, and S′ is assembled from convex pieces
//! rather than from the boundary parameterization.

use crate::dynamics::{Billiard, PhasePoint};
use crate::geometry::{ModelParams, ScattererKind};
use crate::vec2::Vec2;

// S′ is the union of the rhombus, four disks at its vertices and four
// rectangles swept outward from its edges, so the entry time into S′ is the
// least entry time into these convex pieces.
fn entry_convex_polygon(o: Vec2, d: Vec2, poly: &[Vec2]) -> Option<f64> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    let n = poly.len();
    // Counterclockwise polygon: inside is left of every edge.
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let e = b - a;
        let num = e.cross(o - a);
        let den = e.cross(d);
        if den.abs() < 1e-300 {
            if num < 0.0 {
                return None;
            }
            continue;
        }
        let t = -num / den;
        if den > 0.0 {
            t0 = t0.max(t);
        } else {
            t1 = t1.min(t);
        }
    }
    (t0 < t1 - 1e-12 && t0 > 1e-12).then_some(t0)
}

fn entry_disk(o: Vec2, d: Vec2, c: Vec2, rad: f64) -> Option<f64> {
    let oc = o - c;
    let b = oc.dot(d);
    let disc = b * b - (oc.norm_sq() - rad * rad);
    if disc <= 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t > 1e-12).then_some(t)
}

fn oracle_entry(p: &ModelParams, o: Vec2, d: Vec2) -> Option<f64> {
    match p.kind {
        ScattererKind::LorentzDisk { radius } => entry_disk(o, d, Vec2::ZERO, radius + p.r),
        ScattererKind::WindTree => {
            let (s, c) = p.theta.sin_cos();
            let v = [
                Vec2::new(p.a * s, 0.0),
                Vec2::new(0.0, p.a * c),
                Vec2::new(-p.a * s, 0.0),
                Vec2::new(0.0, -p.a * c),
            ];
            let mut best: Option<f64> = entry_convex_polygon(o, d, &v);
            let mut take = |t: Option<f64>| {
                if let Some(t) = t {
                    if best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                }
            };
            for k in 0..4 {
                let (a, b) = (v[k], v[(k + 1) % 4]);
                let e = b - a;
                let out = Vec2::new(e.y, -e.x).normalized() * p.r;
                take(entry_convex_polygon(o, d, &[a, a + out, b + out, b]));
                take(entry_disk(o, d, a, p.r));
            }
            best
        }
    }
}

/// Next collision by brute force over every scatterer centered within
/// `max_len + 2`: hit cell, arclength and flight length.
pub fn brute_force_next(b: &Billiard, x: &PhasePoint, max_len: f64) -> Option<((i64, i64), f64, f64)> {
    let (o, _, d) = b.state_vectors(x);
    let reach = (max_len + 2.0).ceil() as i64;
    let mut best: Option<((i64, i64), f64)> = None;
    for i in -reach..=reach {
        for j in -reach..=reach {
            if (i, j) == (0, 0) || ((i * i + j * j) as f64).sqrt() > max_len + 2.0 {
                continue;
            }
            let c = Vec2::new(i as f64, j as f64);
            if let Some(t) = oracle_entry(b.params(), o - c, d) {
                if best.is_none_or(|bb| t < bb.1) {
                    best = Some(((i, j), t));
                }
            }
        }
    }
    let ((i, j), t) = best?;
    if t > max_len {
        return None;
    }
    let hit = o + t * d - Vec2::new(i as f64, j as f64);
    Some(((x.cell.0 + i, x.cell.1 + j), b.boundary().arclength_of(hit), t))
}

