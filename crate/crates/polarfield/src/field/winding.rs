//! Winding numbers of a power-linear field along small loops on the surface.
//!
//! Loops are made of straight segments inside faces and transversal edge crossings.
//! On a segment the root field is affine, so its phase change is the principal
//! argument of end/start. At a crossing the phase jump is unwrapped from the jump
//! moment at the nearer corner, following the edge to the crossing point on both sides.

use super::{FieldError, PowerLinearField};
use crate::bevel::BeveledMesh;
use crate::mesh::{wrap_angle, SurfaceMesh};
use crate::prescribe::{Location, Prescription, SingularityType};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LoopStep {
    /// Straight segment between two local points of a face.
    Segment { face: usize, from: C64, to: C64 },
    /// Crossing of an interior edge at parameter `t` (from the source of its first
    /// halfedge), unwrapped from the corner at vertex `near`.
    Crossing { edge: usize, t: f64, near: usize, from_face: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopPath {
    pub steps: Vec<LoopStep>,
    /// Angle defect enclosed by the loop.
    pub curvature: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Winding {
    /// Index numerator; the directional index is `numerator / n`.
    pub numerator: i64,
    pub n: u32,
    /// Unrounded total in units of 2π.
    pub turns: f64,
    /// Largest disagreement between a crossing's corner jump and the field values there.
    pub corner_mismatch: f64,
}

impl Winding {
    pub fn index(&self) -> f64 {
        self.numerator as f64 / self.n as f64
    }
}

/// Counter-clockwise loop around interior vertex `v`, crossing each spoke at
/// fraction `frac` of its length from `v`.
pub fn vertex_loop(mesh: &SurfaceMesh, v: usize, frac: f64) -> Option<LoopPath> {
    if mesh.is_boundary_vertex(v) {
        return None;
    }
    let start = *mesh.outgoing(v).first()?;
    let mut steps = Vec::new();
    let mut h = start;
    loop {
        let f = SurfaceMesh::face_of(h);
        let z = mesh.local_coords(f);
        let c = h % 3;
        let (zv, znext, zprev) = (z[c], z[(c + 1) % 3], z[(c + 2) % 3]);
        steps.push(LoopStep::Segment { face: f, from: zv + (znext - zv) * frac, to: zv + (zprev - zv) * frac });
        let p = SurfaceMesh::prev(h);
        let e = mesh.edge_of(p);
        let t = if mesh.edge(e).vertices[0] == v { frac } else { 1.0 - frac };
        steps.push(LoopStep::Crossing { edge: e, t, near: v, from_face: f });
        h = mesh.twin(p)?;
        if h == start {
            break;
        }
    }
    Some(LoopPath { steps, curvature: mesh.gaussian_curvature()[v] })
}

/// Counter-clockwise loop around the point at parameter `t` of interior edge `e`.
pub fn edge_loop(mesh: &SurfaceMesh, e: usize, t: f64) -> Option<LoopPath> {
    let flap = mesh.flatten_flap(e).ok()?;
    let l = flap.length();
    let s = C64::new(t * l, 0.0);
    let inside = |face: usize, z: C64| mesh.local_to_bary(face, z).iter().all(|&b| b > 1e-9);
    let mut delta = 0.25 * t.min(1.0 - t) * l;
    while !(inside(flap.f, flap.to_f(s + C64::new(0.0, delta))) && inside(flap.g, flap.to_g(s - C64::new(0.0, delta)))) {
        delta *= 0.5;
        if delta < 1e-12 * l {
            return None;
        }
    }
    let [vi, _, vk, _] = flap.vertices;
    let (dt, up, down) = (delta / l, C64::new(0.0, delta), C64::new(0.0, -delta));
    let right = s + delta;
    let left = s - delta;
    let steps = vec![
        LoopStep::Crossing { edge: e, t: t + dt, near: vi, from_face: flap.g },
        LoopStep::Segment { face: flap.f, from: flap.to_f(right), to: flap.to_f(s + up) },
        LoopStep::Segment { face: flap.f, from: flap.to_f(s + up), to: flap.to_f(left) },
        LoopStep::Crossing { edge: e, t: t - dt, near: vk, from_face: flap.f },
        LoopStep::Segment { face: flap.g, from: flap.to_g(left), to: flap.to_g(s + down) },
        LoopStep::Segment { face: flap.g, from: flap.to_g(s + down), to: flap.to_g(right) },
    ];
    Some(LoopPath { steps, curvature: 0.0 })
}

/// Regular polygon inside face `f` around a barycentric point.
pub fn face_loop(mesh: &SurfaceMesh, f: usize, bary: [f64; 3], sides: usize) -> LoopPath {
    let z = mesh.local_coords(f);
    let s = mesh.bary_to_local(f, bary);
    let dist = (0..3)
        .map(|c| {
            let (a, b) = (z[c], z[(c + 1) % 3]);
            let d = b - a;
            ((s - a) * d.conj()).im.abs() / d.norm()
        })
        .fold(f64::INFINITY, f64::min);
    let r = 0.3 * dist;
    let pts: Vec<C64> = (0..sides).map(|k| s + C64::from_polar(r, 2.0 * PI * k as f64 / sides as f64)).collect();
    let steps = (0..sides).map(|k| LoopStep::Segment { face: f, from: pts[k], to: pts[(k + 1) % sides] }).collect();
    LoopPath { steps, curvature: 0.0 }
}

/// The loop used to measure the index at a prescribed location.
pub fn location_loop(mesh: &SurfaceMesh, loc: &Location) -> Option<LoopPath> {
    match *loc {
        Location::Vertex(v) => vertex_loop(mesh, v, 0.3),
        Location::Edge { edge, t } => edge_loop(mesh, edge, t),
        Location::Face { face, bary } => Some(face_loop(mesh, face, bary, 12)),
    }
}

fn root_local(field: &PowerLinearField, f: usize, z: C64) -> C64 {
    let [a, b, c] = field.faces[f].coeffs;
    a * z + b * z.conj() + c
}

/// Phase change of the power field along a straight segment of face `f`.
fn segment_turn(field: &PowerLinearField, f: usize, from: C64, to: C64) -> Result<f64, FieldError> {
    let (a, b) = (root_local(field, f, from), root_local(field, f, to));
    let scale = field.faces[f].coeffs.iter().map(|c| c.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
    if a.norm() <= 1e-14 * scale || b.norm() <= 1e-14 * scale {
        return Err(FieldError::AtSingularity);
    }
    let turn = (b / a).arg();
    if turn.abs() > PI - 1e-9 {
        return Err(FieldError::AtSingularity);
    }
    Ok(field.faces[f].power as f64 * turn)
}

/// Phase difference (second face minus first face, without the connection) at a crossing,
/// and the corner consistency error.
fn crossing_jump(
    mesh: &SurfaceMesh,
    bm: &BeveledMesh,
    theta: &[f64],
    field: &PowerLinearField,
    edge: usize,
    t: f64,
    near: usize,
) -> Result<(f64, f64), FieldError> {
    let ed = mesh.edge(edge);
    let h = ed.halfedge;
    let tw = ed.twin.ok_or(FieldError::AtSingularity)?;
    let (f, g) = (h / 3, tw / 3);
    let (zf, zg) = (mesh.local_coords(f), mesh.local_coords(g));
    let (kf, i_f) = (zf[h % 3], zf[(h % 3 + 1) % 3]);
    let (ig, kg) = (zg[tw % 3], zg[(tw % 3 + 1) % 3]);
    let at = |k: C64, i: C64, s: f64| k + (i - k) * s;
    let corner_t = if near == ed.vertices[0] { 0.0 } else { 1.0 };
    let j = bm.jump(mesh, edge, near);
    let cf = at(kf, i_f, corner_t);
    let cg = at(kg, ig, corner_t);
    let along_f = segment_turn(field, f, cf, at(kf, i_f, t))?;
    let along_g = segment_turn(field, g, cg, at(kg, ig, t))?;
    let conn = field.n as f64 * mesh.connection_form()[edge];
    let (uf, ug) = (field.power_value_local(f, cf), field.power_value_local(g, cg));
    let mismatch = wrap_angle((ug / uf).arg() - conn - theta[j]).abs();
    Ok((theta[j] + along_g - along_f, mismatch))
}

/// Winding of the field along a loop, in units of 2π, with the enclosed curvature
/// scaled by N added back.
pub fn winding_number(
    mesh: &SurfaceMesh,
    bm: &BeveledMesh,
    theta: &[f64],
    field: &PowerLinearField,
    path: &LoopPath,
) -> Result<Winding, FieldError> {
    let mut total = field.n as f64 * path.curvature;
    let mut mismatch: f64 = 0.0;
    for step in &path.steps {
        match *step {
            LoopStep::Segment { face, from, to } => total += segment_turn(field, face, from, to)?,
            LoopStep::Crossing { edge, t, near, from_face } => {
                let (jump, err) = crossing_jump(mesh, bm, theta, field, edge, t, near)?;
                mismatch = mismatch.max(err);
                total += if from_face == mesh.edge(edge).halfedge / 3 { jump } else { -jump };
            }
        }
    }
    let turns = total / (2.0 * PI);
    let numerator = turns.round();
    if (turns - numerator).abs() > 1e-6 {
        return Err(FieldError::NonIntegralWinding { value: turns });
    }
    Ok(Winding { numerator: numerator as i64, n: field.n, turns, corner_mismatch: mismatch })
}

/// Oracle result for one prescribed singularity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexCheck {
    #[serde(rename = "type")]
    pub kind: SingularityType,
    pub element: usize,
    pub prescribed: i64,
    pub measured: Option<i64>,
    #[serde(rename = "N")]
    pub n: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl IndexCheck {
    pub fn passed(&self) -> bool {
        self.measured == Some(self.prescribed)
    }
}

/// Runs the winding oracle around every prescribed singularity.
pub fn check_indices(mesh: &SurfaceMesh, bm: &BeveledMesh, theta: &[f64], field: &PowerLinearField, p: &Prescription) -> Vec<IndexCheck> {
    p.singularities
        .iter()
        .map(|s| {
            let measured = s
                .location()
                .map_err(|e| e.to_string())
                .and_then(|loc| location_loop(mesh, &loc).ok_or_else(|| "no loop around this element".to_string()))
                .and_then(|path| winding_number(mesh, bm, theta, field, &path).map_err(|e| e.to_string()));
            let (measured, error) = match measured {
                Ok(w) => (Some(w.numerator), None),
                Err(e) => (None, Some(e)),
            };
            IndexCheck { kind: s.kind, element: s.element, prescribed: s.index, measured, n: p.n, error }
        })
        .collect()
}
