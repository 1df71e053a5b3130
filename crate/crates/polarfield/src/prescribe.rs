//! Singularity prescriptions, their validation, and isotropic phase targets.

use crate::bevel::BeveledMesh;
use crate::mesh::SurfaceMesh;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::f64::consts::PI;

/// Placements closer than this to a lower-dimensional element are rejected.
pub const PLACEMENT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SingularityType {
    Vertex,
    Edge,
    Face,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Location {
    Vertex(usize),
    /// Point `(1−t)·a + t·b` on the edge whose first halfedge runs a→b.
    Edge { edge: usize, t: f64 },
    Face { face: usize, bary: [f64; 3] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Singularity {
    #[serde(rename = "type")]
    pub kind: SingularityType,
    pub element: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bary: Option<[f64; 3]>,
    /// Index numerator; the index is `index / N`.
    pub index: i64,
}

impl Singularity {
    pub fn vertex(v: usize, index: i64) -> Self {
        Singularity { kind: SingularityType::Vertex, element: v, t: None, bary: None, index }
    }

    pub fn edge(e: usize, t: f64, index: i64) -> Self {
        Singularity { kind: SingularityType::Edge, element: e, t: Some(t), bary: None, index }
    }

    pub fn face(f: usize, bary: [f64; 3], index: i64) -> Self {
        Singularity { kind: SingularityType::Face, element: f, t: None, bary: Some(bary), index }
    }

    pub fn location(&self) -> Result<Location, PrescriptionError> {
        match self.kind {
            SingularityType::Vertex => Ok(Location::Vertex(self.element)),
            SingularityType::Edge => {
                let t = self.t.ok_or_else(|| PrescriptionError::OutOfRangeParameter("edge singularity without t".into()))?;
                Ok(Location::Edge { edge: self.element, t })
            }
            SingularityType::Face => {
                let bary =
                    self.bary.ok_or_else(|| PrescriptionError::OutOfRangeParameter("face singularity without bary".into()))?;
                Ok(Location::Face { face: self.element, bary })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prescription {
    #[serde(rename = "N", default = "one")]
    pub n: u32,
    pub singularities: Vec<Singularity>,
    #[serde(default)]
    pub homology: Vec<i64>,
    #[serde(default)]
    pub boundary: Vec<i64>,
}

#[derive(Debug, thiserror::Error)]
pub enum PrescriptionError {
    #[error("index sum {sum} does not match Euler characteristic {chi}")]
    IndexSumMismatch { sum: f64, chi: i64 },
    #[error("more than one singularity on {0}")]
    DuplicateElement(String),
    #[error("parameter out of range: {0}")]
    OutOfRangeParameter(String),
    #[error("singularity placement within {PLACEMENT_TOL} of a lower-dimensional element: {0}")]
    DegeneratePlacement(String),
    #[error("singularities on boundary elements are not supported: {0}")]
    BoundaryElement(String),
    #[error("expected {expected} homology indices, got {got}")]
    HomologyCountMismatch { expected: usize, got: usize },
    #[error("expected {expected} boundary indices, got {got}")]
    BoundaryCountMismatch { expected: usize, got: usize },
    #[error("singularities share a face: {0}")]
    ConflictingSingularities(String),
    #[error("invalid prescription JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl PrescriptionError {
    pub fn name(&self) -> &'static str {
        match self {
            PrescriptionError::IndexSumMismatch { .. } => "IndexSumMismatch",
            PrescriptionError::DuplicateElement(_) => "DuplicateElement",
            PrescriptionError::OutOfRangeParameter(_) => "OutOfRangeParameter",
            PrescriptionError::DegeneratePlacement(_) => "DegeneratePlacement",
            PrescriptionError::BoundaryElement(_) => "BoundaryElement",
            PrescriptionError::HomologyCountMismatch { .. } => "HomologyCountMismatch",
            PrescriptionError::BoundaryCountMismatch { .. } => "BoundaryCountMismatch",
            PrescriptionError::ConflictingSingularities(_) => "ConflictingSingularities",
            PrescriptionError::Json(_) => "ParseError",
        }
    }
}

fn one() -> u32 {
    1
}

impl Prescription {
    pub fn new(n: u32, singularities: Vec<Singularity>) -> Self {
        Prescription { n, singularities, homology: vec![], boundary: vec![] }
    }

    pub fn from_json(text: &str) -> Result<Self, PrescriptionError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("prescription serializes") + "\n"
    }

    pub fn is_vertex_only(&self) -> bool {
        self.singularities.iter().all(|s| s.kind == SingularityType::Vertex)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ValidateOptions {
    /// Allow face singularities with |I| > 1 on power faces.
    pub allow_power: bool,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        ValidateOptions { allow_power: true }
    }
}

/// Faces touched by a singular element.
pub fn element_faces(mesh: &SurfaceMesh, loc: &Location) -> Vec<usize> {
    match *loc {
        Location::Vertex(v) => mesh.vertex_faces(v),
        Location::Edge { edge, .. } => {
            let e = mesh.edge(edge);
            let mut f = vec![e.halfedge / 3];
            f.extend(e.twin.map(|t| t / 3));
            f
        }
        Location::Face { face, .. } => vec![face],
    }
}

pub fn validate(p: &Prescription, mesh: &SurfaceMesh, opts: ValidateOptions) -> Result<(), PrescriptionError> {
    use PrescriptionError as E;
    if p.n == 0 {
        return Err(E::OutOfRangeParameter("N must be at least 1".into()));
    }
    let mut seen = HashSet::new();
    let mut claimed: Vec<Option<(usize, bool)>> = vec![None; mesh.n_faces()];
    for (i, s) in p.singularities.iter().enumerate() {
        if s.index == 0 {
            return Err(E::OutOfRangeParameter(format!("singularity {i} has index numerator 0")));
        }
        let loc = s.location()?;
        match loc {
            Location::Vertex(v) => {
                if v >= mesh.n_vertices() {
                    return Err(E::OutOfRangeParameter(format!("vertex {v} does not exist")));
                }
                if mesh.is_boundary_vertex(v) {
                    return Err(E::BoundaryElement(format!("vertex {v}")));
                }
            }
            Location::Edge { edge, t } => {
                if edge >= mesh.n_edges() {
                    return Err(E::OutOfRangeParameter(format!("edge {edge} does not exist")));
                }
                if mesh.is_boundary_edge(edge) {
                    return Err(E::BoundaryElement(format!("edge {edge}")));
                }
                if !(t > 0.0 && t < 1.0) {
                    return Err(E::OutOfRangeParameter(format!("edge parameter t = {t} not in (0, 1)")));
                }
                if t < PLACEMENT_TOL || t > 1.0 - PLACEMENT_TOL {
                    return Err(E::DegeneratePlacement(format!("edge {edge} at t = {t}")));
                }
            }
            Location::Face { face, bary } => {
                if face >= mesh.n_faces() {
                    return Err(E::OutOfRangeParameter(format!("face {face} does not exist")));
                }
                let sum: f64 = bary.iter().sum();
                if bary.iter().any(|b| !(*b > 0.0)) || (sum - 1.0).abs() > PLACEMENT_TOL {
                    return Err(E::OutOfRangeParameter(format!("barycentric {bary:?} not strictly inside face {face}")));
                }
                if bary.iter().any(|&b| b < PLACEMENT_TOL) {
                    return Err(E::DegeneratePlacement(format!("face {face} at {bary:?}")));
                }
                if s.index.abs() != 1 && p.n == 1 && !opts.allow_power {
                    return Err(E::OutOfRangeParameter(format!(
                        "face singularity index {} requires power fields",
                        s.index
                    )));
                }
            }
        }
        if !seen.insert((s.kind as u8, s.element)) {
            return Err(E::DuplicateElement(format!("{:?} {}", s.kind, s.element)));
        }
        // Edge and face singularities need their faces to themselves.
        let exclusive = s.kind != SingularityType::Vertex;
        for f in element_faces(mesh, &loc) {
            if let Some((other, other_exclusive)) = claimed[f] {
                if exclusive || other_exclusive {
                    return Err(E::ConflictingSingularities(format!("singularities {other} and {i} both touch face {f}")));
                }
            }
            claimed[f] = Some((i, exclusive));
        }
    }

    let generators = 2 * mesh.genus();
    if p.homology.len() != generators {
        return Err(E::HomologyCountMismatch { expected: generators, got: p.homology.len() });
    }
    let loops = mesh.boundary_loops();
    if p.boundary.len() != loops.len() {
        return Err(E::BoundaryCountMismatch { expected: loops.len(), got: p.boundary.len() });
    }

    // Index theorem per connected component.
    let (comp, ncomp) = mesh.face_components();
    let mut sum = vec![0i64; ncomp];
    let mut chi = vec![0i64; ncomp];
    for f in 0..mesh.n_faces() {
        chi[comp[f]] += 1;
    }
    for e in mesh.edges() {
        chi[comp[e.halfedge / 3]] -= 1;
    }
    for v in 0..mesh.n_vertices() {
        chi[comp[mesh.outgoing(v)[0] / 3]] += 1;
    }
    for s in &p.singularities {
        let f = element_faces(mesh, &s.location()?)[0];
        sum[comp[f]] += s.index;
    }
    for (l, &i) in loops.iter().zip(&p.boundary) {
        sum[comp[l.halfedges[0] / 3]] += i;
    }
    for c in 0..ncomp {
        if sum[c] != p.n as i64 * chi[c] {
            let total: i64 = sum.iter().sum();
            return Err(E::IndexSumMismatch { sum: total as f64 / p.n as f64, chi: mesh.euler_characteristic() });
        }
    }
    Ok(())
}

/// Signed angle at `s` from the direction of `a` to the direction of `b`.
fn angle_at(s: C64, a: C64, b: C64) -> f64 {
    let (u, v) = (a - s, b - s);
    (u.re * v.im - u.im * v.re).atan2(u.re * v.re + u.im * v.im)
}

/// Winding targets of the ideal field around `s` for the three sides of a triangle
/// with corners `z` (counterclockwise): side `c` runs from corner `c` to `c+1`.
pub fn winding_targets(z: [C64; 3], s: C64, index: i64) -> [f64; 3] {
    [0, 1, 2].map(|c| index as f64 * angle_at(s, z[c], z[(c + 1) % 3]))
}

/// Targets on the split edges `3f, 3f+1, 3f+2` for a singularity inside face `f`.
pub fn face_targets(mesh: &SurfaceMesh, f: usize, bary: [f64; 3], index: i64) -> Result<[f64; 3], PrescriptionError> {
    if bary.iter().any(|&b| b < PLACEMENT_TOL) {
        return Err(PrescriptionError::DegeneratePlacement(format!("face {f} at {bary:?}")));
    }
    let z = mesh.local_coords(f);
    Ok(winding_targets(z, mesh.bary_to_local(f, bary), index))
}

#[derive(Clone, Debug, Serialize)]
pub struct TargetGroup {
    pub kind: SingularityType,
    pub element: usize,
    pub index: i64,
    /// Beveled edges carrying targets.
    pub edges: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct IsotropyTargets {
    pub groups: Vec<TargetGroup>,
}

impl IsotropyTargets {
    pub fn len(&self) -> usize {
        self.groups.iter().map(|g| g.edges.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Targets for a singularity at parameter `t` on interior edge `e`: winding targets on
/// both faces of the unfolded flap, −πI on the two split edges along `e`, zero jumps.
pub fn edge_targets(mesh: &SurfaceMesh, bm: &BeveledMesh, e: usize, t: f64, index: i64) -> Result<TargetGroup, PrescriptionError> {
    let flap = mesh.flatten_flap(e).map_err(|_| PrescriptionError::BoundaryElement(format!("edge {e}")))?;
    let s = C64::new(t * flap.length(), 0.0);
    let idx = index as f64;
    let (h, ht) = (flap.h, flap.h_twin);
    let (hn, hp) = (SurfaceMesh::next(h), SurfaceMesh::prev(h));
    let (tn, tp) = (SurfaceMesh::next(ht), SurfaceMesh::prev(ht));
    let [ja, jb] = bm.jumps(e).expect("interior edge");
    let edges = vec![h, hn, hp, ht, tn, tp, ja, jb];
    let values = vec![
        -PI * idx,
        idx * angle_at(s, flap.zi, flap.zj),
        idx * angle_at(s, flap.zj, flap.zk),
        -PI * idx,
        idx * angle_at(s, flap.zk, flap.zl),
        idx * angle_at(s, flap.zl, flap.zi),
        0.0,
        0.0,
    ];
    Ok(TargetGroup { kind: SingularityType::Edge, element: e, index, edges, values })
}

/// Targets around an interior vertex: scaled outer windings, spoke splits carrying
/// minus half the outer value, zero outer jumps, and corner jumps splitting the total
/// rotation `2πI − N·κ` by flap angle.
pub fn vertex_targets(
    mesh: &SurfaceMesh,
    bm: &BeveledMesh,
    v: usize,
    index: i64,
    n: u32,
) -> Result<TargetGroup, PrescriptionError> {
    if mesh.is_boundary_vertex(v) {
        return Err(PrescriptionError::BoundaryElement(format!("vertex {v}")));
    }
    let out = mesh.outgoing(v);
    let k = out.len();
    let kappa = 2.0 * PI - mesh.angle_sum(v);
    let total = 2.0 * PI * index as f64 - n as f64 * kappa;
    let theta_sum = mesh.angle_sum(v);
    let alpha: Vec<f64> = out.iter().map(|&h| mesh.angle(h)).collect();
    let mut edges = Vec::with_capacity(5 * k);
    let mut values = Vec::with_capacity(5 * k);
    for (i, &h) in out.iter().enumerate() {
        let o = alpha[i] * total / theta_sum;
        let (hn, hp) = (SurfaceMesh::next(h), SurfaceMesh::prev(h));
        edges.extend([h, hn, hp]);
        values.extend([-0.5 * o, o, -0.5 * o]);
    }
    for (i, &h) in out.iter().enumerate() {
        // spoke shared by face i and face i+1 (ccw)
        let e = mesh.edge_of(SurfaceMesh::prev(h));
        let far = mesh.source(SurfaceMesh::prev(h));
        let forward = mesh.edge(e).halfedge / 3 == h / 3;
        let corner = (alpha[i] + alpha[(i + 1) % k]) * total / (2.0 * theta_sum);
        edges.push(bm.jump(mesh, e, v));
        values.push(if forward { corner } else { -corner });
        edges.push(bm.jump(mesh, e, far));
        values.push(0.0);
    }
    Ok(TargetGroup { kind: SingularityType::Vertex, element: v, index, edges, values })
}

pub fn assemble_targets(p: &Prescription, mesh: &SurfaceMesh, bm: &BeveledMesh) -> Result<IsotropyTargets, PrescriptionError> {
    let mut groups = Vec::with_capacity(p.singularities.len());
    for s in &p.singularities {
        let group = match s.location()? {
            Location::Vertex(v) => vertex_targets(mesh, bm, v, s.index, p.n)?,
            Location::Edge { edge, t } => edge_targets(mesh, bm, edge, t, s.index)?,
            Location::Face { face, bary } => {
                let vals = face_targets(mesh, face, bary, s.index)?;
                TargetGroup {
                    kind: SingularityType::Face,
                    element: face,
                    index: s.index,
                    edges: vec![3 * face, 3 * face + 1, 3 * face + 2],
                    values: vals.to_vec(),
                }
            }
        };
        groups.push(group);
    }
    Ok(IsotropyTargets { groups })
}
