//! Walking across faces: straight (geodesic) polylines and streamlines of a field.

use crate::field::{principal_root, PowerLinearField};
use crate::mesh::SurfaceMesh;
use crate::solve::{AlignmentCurve, CurvePoint};
use crate::C64;
use std::f64::consts::PI;
use std::fmt::Write as _;

/// A straight piece inside one face, in its local frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Piece {
    pub face: usize,
    pub from: C64,
    pub to: C64,
}

fn cross(a: C64, b: C64) -> f64 {
    a.re * b.im - a.im * b.re
}

/// First exit of the ray `p + s·d` (s > 0) from face `f`: (s, local corner of the edge's first vertex).
fn exit(mesh: &SurfaceMesh, f: usize, p: C64, d: C64) -> Option<(f64, usize)> {
    let z = mesh.local_coords(f);
    let mut best: Option<(f64, usize)> = None;
    for c in 0..3 {
        let e = z[(c + 1) % 3] - z[c];
        let den = cross(e, d);
        if den >= 0.0 {
            continue;
        }
        let s = (-cross(e, p - z[c]) / den).max(0.0);
        if best.is_none_or(|(b, _)| s < b) {
            best = Some((s, c));
        }
    }
    best
}

/// Carries a point on the edge of halfedge `h` and a direction into the neighboring face.
fn unfold(mesh: &SurfaceMesh, h: usize, p: C64, d: C64) -> Option<(usize, C64, C64)> {
    let e = mesh.edge_of(h);
    let flap = mesh.flatten_flap(e).ok()?;
    let from = h / 3;
    if from == flap.f {
        let w = flap.from_f(p);
        Some((flap.g, flap.to_g(w), d * flap.rotation_f() / flap.rotation_g()))
    } else {
        let w = flap.from_g(p);
        Some((flap.f, flap.to_f(w), d * flap.rotation_g() / flap.rotation_f()))
    }
}

/// Straight walk of the given length from a local point of `face` along `dir`.
/// Stops early at the boundary.
pub fn geodesic(mesh: &SurfaceMesh, face: usize, start: C64, dir: C64, length: f64) -> Vec<Piece> {
    let mut out = Vec::new();
    let (mut f, mut p, mut d) = (face, start, dir / dir.norm());
    let mut left = length;
    while left > 0.0 && out.len() < 100_000 {
        let Some((s, c)) = exit(mesh, f, p, d) else { break };
        if s >= left {
            out.push(Piece { face: f, from: p, to: p + d * left });
            break;
        }
        let q = p + d * s;
        out.push(Piece { face: f, from: p, to: q });
        left -= s;
        let Some((g, q2, d2)) = unfold(mesh, 3 * f + c, q, d) else { break };
        (f, p, d) = (g, q2, d2);
    }
    out
}

/// Curve with one point per face (the piece midpoints), ready for alignment.
pub fn pieces_to_curve(mesh: &SurfaceMesh, pieces: &[Piece]) -> AlignmentCurve {
    let points = pieces
        .iter()
        .map(|pc| CurvePoint { face: pc.face, bary: mesh.local_to_bary(pc.face, (pc.from + pc.to) * 0.5) })
        .collect();
    AlignmentCurve { points }
}

#[derive(Clone, Debug, Default)]
pub struct Streamline {
    pub points: Vec<[f64; 3]>,
}

#[derive(Clone, Copy, Debug)]
pub struct TraceOptions {
    /// Step length relative to the mean edge length.
    pub step: f64,
    pub max_steps: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { step: 0.2, max_steps: 2000 }
    }
}

/// Unit direction closest to `prev` at local point `z` of face `f`. Streamlines are
/// unoriented, so both signs of every branch are candidates.
fn direction(field: &PowerLinearField, f: usize, z: C64, prev: C64) -> Option<C64> {
    let u = field.power_value_local(f, z);
    if u.norm() < 1e-12 {
        return None;
    }
    let r = principal_root(u, field.n);
    let r = r / r.norm();
    (0..field.n)
        .map(|k| r * C64::from_polar(1.0, 2.0 * PI * k as f64 / field.n as f64))
        .flat_map(|d| [d, -d])
        .max_by(|a, b| (a * prev.conj()).re.total_cmp(&(b * prev.conj()).re))
}

fn trace_one_way(mesh: &SurfaceMesh, field: &PowerLinearField, face: usize, start: C64, dir: C64, h: f64, opts: &TraceOptions) -> Vec<[f64; 3]> {
    let mut pts = vec![mesh.local_to_world(face, start)];
    let (mut f, mut p, mut d) = (face, start, dir);
    for _ in 0..opts.max_steps {
        let Some(k1) = direction(field, f, p, d) else { break };
        let rk = (|| {
            let k2 = direction(field, f, p + k1 * (0.5 * h), k1)?;
            let k3 = direction(field, f, p + k2 * (0.5 * h), k1)?;
            let k4 = direction(field, f, p + k3 * h, k1)?;
            let v = k1 + k2 * 2.0 + k3 * 2.0 + k4;
            Some(v / v.norm())
        })();
        let Some(v) = rk else { break };
        let Some((s, c)) = exit(mesh, f, p, v) else { break };
        if s > h {
            p += v * h;
            d = v;
            pts.push(mesh.local_to_world(f, p));
            continue;
        }
        let q = p + v * s;
        pts.push(mesh.local_to_world(f, q));
        let Some((g, q2, d2)) = unfold(mesh, 3 * f + c, q, v) else { break };
        // nudge inside to avoid re-exiting through the same edge
        (f, p, d) = (g, q2 + d2 * (1e-9 * h), d2);
    }
    pts
}

/// Streamline of branch `branch` through a barycentric seed, traced both ways.
pub fn trace_streamline(mesh: &SurfaceMesh, field: &PowerLinearField, face: usize, bary: [f64; 3], branch: u32, opts: &TraceOptions) -> Streamline {
    let mean_edge = (0..mesh.n_edges()).map(|e| mesh.edge_length(e)).sum::<f64>() / mesh.n_edges().max(1) as f64;
    let h = opts.step * mean_edge;
    let z = mesh.bary_to_local(face, bary);
    let Ok(d) = field.evaluate(face, bary, branch) else { return Streamline::default() };
    if d.norm() < 1e-12 {
        return Streamline::default();
    }
    let d = d / d.norm();
    let mut back = trace_one_way(mesh, field, face, z, -d, h, opts);
    let fwd = trace_one_way(mesh, field, face, z, d, h, opts);
    back.reverse();
    back.extend_from_slice(&fwd[1..]);
    Streamline { points: back }
}

/// Number of distinct line families of an N-field: branch k and its opposite trace the
/// same line when N is even.
pub fn line_families(n: u32) -> u32 {
    if n % 2 == 0 {
        n / 2
    } else {
        n
    }
}

/// One streamline per seed and line family.
pub fn trace_all(mesh: &SurfaceMesh, field: &PowerLinearField, seeds: &[(usize, [f64; 3])], opts: &TraceOptions) -> Vec<Streamline> {
    let mut out = Vec::new();
    for &(f, b) in seeds {
        for k in 0..line_families(field.n) {
            out.push(trace_streamline(mesh, field, f, b, k, opts));
        }
    }
    out
}

/// Deterministic seeds spread over the faces.
pub fn seeds(mesh: &SurfaceMesh, count: usize) -> Vec<(usize, [f64; 3])> {
    let nf = mesh.n_faces();
    (0..count.min(nf)).map(|i| (i * nf / count.min(nf).max(1), [1.0 / 3.0; 3])).collect()
}

/// OBJ text with one polyline (`l`) per streamline.
pub fn streamlines_obj(lines: &[Streamline]) -> String {
    let mut s = String::new();
    let mut base = 1;
    for l in lines.iter().filter(|l| l.points.len() >= 2) {
        for p in &l.points {
            let _ = writeln!(s, "v {} {} {}", p[0], p[1], p[2]);
        }
        let ids: Vec<String> = (base..base + l.points.len()).map(|i| i.to_string()).collect();
        let _ = writeln!(s, "l {}", ids.join(" "));
        base += l.points.len();
    }
    s
}
