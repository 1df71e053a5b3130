//! Curve alignment: an exact 1-form d₀α added to the phases so that the field is
//! tangent to chords between consecutive edge crossings of each curve.

use super::scale::{edge_side_targets, RowSource, ScaleConstraints};
use crate::bevel::BeveledMesh;
use crate::field::PowerLinearField;
use crate::mesh::{wrap_angle, SurfaceMesh};
use crate::sparse::{inf_norm, solve_equality_qp, SparseMatrix};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("curve {curve}: points {from} and {to} are not in the same or adjacent faces")]
    NonAdjacent { curve: usize, from: usize, to: usize },
    #[error("curve {curve}: segment between faces {a} and {b} does not cross their shared edge")]
    MissedEdge { curve: usize, a: usize, b: usize },
    #[error("curve {curve} crosses edge {edge} twice in a row")]
    Backtrack { curve: usize, edge: usize },
    #[error("curve {curve} passes through singular element {element}")]
    ThroughSingularity { curve: usize, element: String },
    #[error("alignment rows are inconsistent (residual {residual:.3e})")]
    Inconsistent { residual: f64 },
    #[error("alignment solve failed: {0}")]
    Linalg(#[from] crate::sparse::LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub face: usize,
    pub bary: [f64; 3],
}

/// A polyline on the surface; consecutive points lie in the same or in adjacent faces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlignmentCurve {
    pub points: Vec<CurvePoint>,
}

/// Transversal crossing of an interior edge at parameter `t` (from the source of its
/// first halfedge).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Crossing {
    pub edge: usize,
    pub t: f64,
    pub from_face: usize,
    pub to_face: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurvePath {
    pub crossings: Vec<Crossing>,
}

/// Crossings closer than this (relative) to a vertex are moved inward.
const VERTEX_MARGIN: f64 = 1e-4;

/// Intersects a polyline with the mesh edges.
pub fn intersect_curve(mesh: &SurfaceMesh, curve: &AlignmentCurve, id: usize) -> Result<CurvePath, AlignError> {
    let mut crossings: Vec<Crossing> = Vec::new();
    for w in curve.points.windows(2) {
        let (p, q) = (w[0], w[1]);
        if p.face == q.face {
            continue;
        }
        let shared = (0..3).map(|c| 3 * p.face + c).find(|&h| mesh.twin(h).map(|t| t / 3) == Some(q.face));
        let h = shared.ok_or(AlignError::NonAdjacent { curve: id, from: p.face, to: q.face })?;
        let e = mesh.edge_of(h);
        let flap = mesh.flatten_flap(e).expect("interior edge");
        let to_flap = |pt: CurvePoint| {
            let z = mesh.bary_to_local(pt.face, pt.bary);
            if pt.face == flap.f {
                flap.from_f(z)
            } else {
                flap.from_g(z)
            }
        };
        let (a, b) = (to_flap(p), to_flap(q));
        if a.im * b.im >= 0.0 {
            return Err(AlignError::MissedEdge { curve: id, a: p.face, b: q.face });
        }
        let x = a + (b - a) * (a.im / (a.im - b.im));
        let t = x.re / flap.length();
        if !(-1e-9..=1.0 + 1e-9).contains(&t) {
            return Err(AlignError::MissedEdge { curve: id, a: p.face, b: q.face });
        }
        if crossings.last().is_some_and(|c| c.edge == e) {
            return Err(AlignError::Backtrack { curve: id, edge: e });
        }
        let t = t.clamp(VERTEX_MARGIN, 1.0 - VERTEX_MARGIN);
        crossings.push(Crossing { edge: e, t, from_face: p.face, to_face: q.face });
    }
    Ok(CurvePath { crossings })
}

/// Local position of a crossing in one of the two faces of its edge.
pub fn crossing_point(mesh: &SurfaceMesh, c: &Crossing, face: usize) -> C64 {
    let ed = mesh.edge(c.edge);
    let z = mesh.local_coords(face);
    let (k, i) = if face == ed.halfedge / 3 {
        (z[ed.halfedge % 3], z[(ed.halfedge % 3 + 1) % 3])
    } else {
        let tw = ed.twin.expect("interior edge");
        (z[(tw % 3 + 1) % 3], z[tw % 3])
    };
    k + (i - k) * c.t
}

/// One alignment chord: a straight piece of a curve inside a face.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chord {
    pub curve: usize,
    pub face: usize,
    pub from: C64,
    pub to: C64,
}

impl Chord {
    pub fn angle(&self) -> f64 {
        (self.to - self.from).arg()
    }

    pub fn midpoint(&self) -> C64 {
        (self.from + self.to) * 0.5
    }
}

pub fn chords(mesh: &SurfaceMesh, paths: &[CurvePath]) -> Vec<Chord> {
    let mut out = Vec::new();
    for (curve, p) in paths.iter().enumerate() {
        for w in p.crossings.windows(2) {
            let face = w[0].to_face;
            out.push(Chord { curve, face, from: crossing_point(mesh, &w[0], face), to: crossing_point(mesh, &w[1], face) });
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignRowKind {
    Face,
    Edge,
    Sync,
}

/// Linear row on the beveled 1-form: Σ coef·θ[e] = target.
#[derive(Clone, Debug, Serialize)]
pub struct AlignRow {
    pub terms: Vec<(usize, f64)>,
    pub target: f64,
    pub kind: AlignRowKind,
}

impl AlignRow {
    fn value(&self, theta: &[f64]) -> f64 {
        self.terms.iter().map(|&(e, c)| c * theta[e]).sum()
    }
}

struct Geometry<'a> {
    mesh: &'a SurfaceMesh,
    bm: &'a BeveledMesh,
}

impl Geometry<'_> {
    /// Base corner (vertex k of the edge) in `face`, and the term giving the phase at
    /// the crossing relative to it.
    fn crossing_term(&self, c: &Crossing, face: usize) -> (usize, (usize, f64)) {
        let ed = self.mesh.edge(c.edge);
        let k = self.mesh.corner(face, ed.vertices[0]).expect("edge vertex in face");
        if face == ed.halfedge / 3 {
            (k, (ed.halfedge, c.t))
        } else {
            (k, (ed.twin.expect("interior edge"), -c.t))
        }
    }

    /// Moments from corner `a` forward to corner `b` of the same face.
    fn walk(terms: &mut Vec<(usize, f64)>, a: usize, b: usize) {
        let f = a / 3;
        let mut c = a % 3;
        while c != b % 3 {
            terms.push((3 * f + c, 1.0));
            c = (c + 1) % 3;
        }
    }

    fn sign(&self, c: &Crossing) -> f64 {
        if c.from_face == self.mesh.edge(c.edge).halfedge / 3 {
            1.0
        } else {
            -1.0
        }
    }

    /// Corner path through splits and jumps; returns (edge, ±1) steps.
    fn corner_path(&self, from: usize, to: usize) -> Option<Vec<(usize, f64)>> {
        let nc = self.bm.n_corners();
        let mut adj: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); nc];
        for e in 0..self.bm.n_edges() {
            let (a, b) = self.bm.endpoints(e);
            adj[a].push((b, e, 1.0));
            adj[b].push((a, e, -1.0));
        }
        let mut prev: Vec<Option<(usize, usize, f64)>> = vec![None; nc];
        let mut seen = vec![false; nc];
        let mut queue = VecDeque::from([from]);
        seen[from] = true;
        while let Some(c) = queue.pop_front() {
            if c == to {
                let mut steps = Vec::new();
                let mut cur = to;
                while let Some((p, e, s)) = prev[cur] {
                    steps.push((e, s));
                    cur = p;
                }
                steps.reverse();
                return Some(steps);
            }
            for &(d, e, s) in &adj[c] {
                if !seen[d] {
                    seen[d] = true;
                    prev[d] = Some((c, e, s));
                    queue.push_back(d);
                }
            }
        }
        None
    }
}

/// Rows keeping the field phase equal to N times the chord angle at every crossing.
pub fn alignment_rows(mesh: &SurfaceMesh, bm: &BeveledMesh, paths: &[CurvePath], theta: &[f64], n: u32) -> Vec<AlignRow> {
    let geo = Geometry { mesh, bm };
    let nf = n as f64;
    let conn = bm.edge_connection(mesh);
    let mut rows = Vec::new();
    for p in paths {
        let cr = &p.crossings;
        // zero rotation along each chord
        for w in cr.windows(2) {
            let face = w[0].to_face;
            let (k1, t1) = geo.crossing_term(&w[0], face);
            let (k2, t2) = geo.crossing_term(&w[1], face);
            let mut terms = Vec::new();
            Geometry::walk(&mut terms, k1, k2);
            terms.push(t2);
            terms.push((t1.0, -t1.1));
            rows.push(AlignRow { terms, target: 0.0, kind: AlignRowKind::Face });
        }
        // bending of the curve across interior crossings
        for q in 1..cr.len().saturating_sub(1) {
            let c = &cr[q];
            let (a, b) = (c.from_face, c.to_face);
            let phi_a = (crossing_point(mesh, c, a) - crossing_point(mesh, &cr[q - 1], a)).arg();
            let phi_b = (crossing_point(mesh, &cr[q + 1], b) - crossing_point(mesh, c, b)).arg();
            let s = geo.sign(c);
            let ja = bm.jump(mesh, c.edge, mesh.edge(c.edge).vertices[0]);
            let (_, tb) = geo.crossing_term(c, b);
            let (_, ta) = geo.crossing_term(c, a);
            let r = mesh.connection_form()[c.edge];
            let terms = vec![(ja, s), tb, (ta.0, -ta.1)];
            rows.push(AlignRow { terms, target: nf * wrap_angle(phi_b - phi_a - s * r), kind: AlignRowKind::Edge });
        }
    }
    // synchronize every other curve with the first one
    let anchor = |p: &CurvePath| -> Option<(Crossing, f64)> {
        let w = p.crossings.get(..2)?;
        let face = w[0].to_face;
        Some((w[0], (crossing_point(mesh, &w[1], face) - crossing_point(mesh, &w[0], face)).arg()))
    };
    let Some((c0, phi0)) = paths.first().and_then(anchor) else {
        return rows;
    };
    for p in &paths[1..] {
        let Some((c1, phi1)) = anchor(p) else { continue };
        let (k0, t0) = geo.crossing_term(&c0, c0.to_face);
        let (k1, t1) = geo.crossing_term(&c1, c1.to_face);
        let Some(steps) = geo.corner_path(k0, k1) else { continue };
        let holonomy: f64 = steps.iter().map(|&(e, s)| s * conn[e]).sum();
        let mut terms = steps;
        terms.push(t1);
        terms.push((t0.0, -t0.1));
        let mut row = AlignRow { terms, target: 0.0, kind: AlignRowKind::Sync };
        let current = row.value(theta);
        row.target = current + wrap_angle(nf * (phi1 - phi0 - holonomy) - current);
        rows.push(row);
    }
    rows
}

/// Diagonal weights on beveled edges: half-cotangent of the opposite angle on splits,
/// `lambda_j` on jumps.
pub fn alignment_weights(mesh: &SurfaceMesh, bm: &BeveledMesh, lambda_j: f64) -> Vec<f64> {
    (0..bm.n_edges())
        .map(|e| {
            if bm.is_jump(e) {
                lambda_j
            } else {
                let (f, c) = (e / 3, e % 3);
                let opposite = 3 * f + (c + 2) % 3;
                0.5 / mesh.angle(opposite).tan()
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct Alignment {
    pub alpha: Vec<f64>,
    /// θ + d₀α.
    pub theta: Vec<f64>,
    pub rows: Vec<AlignRow>,
    pub residual: f64,
}

pub fn solve_alignment(
    mesh: &SurfaceMesh,
    bm: &BeveledMesh,
    d0: &SparseMatrix,
    theta: &[f64],
    paths: &[CurvePath],
    n: u32,
    lambda_j: f64,
    proximal: f64,
) -> Result<Alignment, AlignError> {
    let rows = alignment_rows(mesh, bm, paths, theta, n);
    let nc = bm.n_corners();
    if rows.is_empty() {
        return Ok(Alignment { alpha: vec![0.0; nc], theta: theta.to_vec(), rows, residual: 0.0 });
    }
    let mut t = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        t.extend(row.terms.iter().map(|&(e, c)| (r, e, c)));
    }
    let c = SparseMatrix::from_triplets(rows.len(), bm.n_edges(), &t);
    let a = c.matmul(d0);
    let rhs: Vec<f64> = rows.iter().map(|r| r.target - r.value(theta)).collect();
    let w = alignment_weights(mesh, bm, lambda_j);
    let lap = d0.gram(&w);
    let mean_diag = (0..nc).map(|i| lap.get(i, i)).sum::<f64>() / nc as f64;
    let g = lap.add(&SparseMatrix::diagonal(&vec![proximal * mean_diag; nc]));
    let (alpha, _) = solve_equality_qp(&g, &vec![0.0; nc], &a, &rhs).map_err(|_| AlignError::Inconsistent { residual: f64::NAN })?;
    let da = d0.mul_vec(&alpha);
    let theta_hat: Vec<f64> = theta.iter().zip(&da).map(|(x, y)| x + y).collect();
    let res: Vec<f64> = rows.iter().map(|r| r.value(&theta_hat) - r.target).collect();
    let residual = inf_norm(&res);
    if !(residual <= 1e-8 * (1.0 + inf_norm(&rhs))) {
        return Err(AlignError::Inconsistent { residual });
    }
    Ok(Alignment { alpha, theta: theta_hat, rows, residual })
}

/// Scale rows placing the field phase at each crossing on the sides that carry a chord.
pub fn alignment_scale_rows(out: &mut ScaleConstraints, mesh: &SurfaceMesh, paths: &[CurvePath], theta: &[f64], powers: &[u32]) {
    for (id, p) in paths.iter().enumerate() {
        let n = p.crossings.len();
        for (q, c) in p.crossings.iter().enumerate() {
            let ed = mesh.edge(c.edge);
            let tw = ed.twin.expect("interior edge");
            let mut sides = Vec::new();
            if q > 0 {
                sides.push(c.from_face);
            }
            if q + 1 < n {
                sides.push(c.to_face);
            }
            for face in sides {
                // moment k→i seen from this face
                let d = if face == ed.halfedge / 3 { theta[ed.halfedge] } else { -theta[tw] };
                let [sk, si] = edge_side_targets(c.t, -c.t * d, (1.0 - c.t) * d, powers[face]);
                if sk.max(si) == 0.0 {
                    continue;
                }
                let k = mesh.corner(face, ed.vertices[0]).expect("edge vertex");
                let i = mesh.corner(face, ed.vertices[1]).expect("edge vertex");
                out.push(k, i, sk, si, RowSource::Alignment(id));
            }
        }
    }
}

/// Direction error (radians) of the field against each chord at its midpoint.
pub fn tangent_errors(field: &PowerLinearField, chords: &[Chord]) -> Vec<f64> {
    let n = field.n as f64;
    chords
        .iter()
        .map(|ch| {
            let u = field.power_value_local(ch.face, ch.midpoint());
            wrap_angle(u.arg() - n * ch.angle()).abs() / n
        })
        .collect()
}

/// Global rotation (power-field units) aligning the first chord.
pub fn anchor_rotation(field_value: C64, chord: &Chord, n: u32) -> f64 {
    wrap_angle(n as f64 * chord.angle() - field_value.arg())
}
