//! The beveled complex: corners, split and jump edges, and face/edge/vertex cycles,
//! with the cycle operators built on it.
//!
//! Numbering: corner `3f + c`; split edge `h` for halfedge `h` (same orientation);
//! jump edges after the splits, two per interior edge, oriented from the edge's first
//! face to its second. Beveled faces are the original faces, then one edge-face per
//! interior edge, then one vertex-face per interior vertex.

use crate::mesh::{BoundaryLoop, EdgeLoop, SurfaceMesh};
use crate::sparse::{SparseMatrix, TripletDump};
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BevelEdgeKind {
    /// Lies along halfedge `0` inside its face.
    Split(usize),
    /// Joins the corners of `vertex` in the two faces of original `edge`.
    Jump { edge: usize, vertex: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BevelFaceKind {
    Face(usize),
    Edge(usize),
    Vertex(usize),
}

#[derive(Clone, Debug, Serialize)]
pub struct BevelFace {
    pub kind: BevelFaceKind,
    /// Oriented cycle as `(beveled edge, ±1)`.
    pub cycle: Vec<(usize, i8)>,
}

#[derive(Debug, thiserror::Error)]
pub enum BevelError {
    #[error("homology generator {0} cannot be lifted to a closed beveled cycle")]
    InconsistentLift(usize),
}

#[derive(Clone, Debug)]
pub struct BeveledMesh {
    n_faces: usize,
    tail: Vec<usize>,
    head: Vec<usize>,
    kind: Vec<BevelEdgeKind>,
    /// Jumps per original edge at (source, target) of its first halfedge.
    jumps: Vec<Option<[usize; 2]>>,
    faces: Vec<BevelFace>,
    edge_face: Vec<Option<usize>>,
    vertex_face: Vec<Option<usize>>,
    component: Vec<usize>,
    n_components: usize,
}

pub fn bevel(mesh: &SurfaceMesh) -> BeveledMesh {
    let nf = mesh.n_faces();
    let nh = 3 * nf;
    let mut tail: Vec<usize> = (0..nh).collect();
    let mut head: Vec<usize> = (0..nh).map(SurfaceMesh::next).collect();
    let mut kind: Vec<BevelEdgeKind> = (0..nh).map(BevelEdgeKind::Split).collect();
    let mut jumps = vec![None; mesh.n_edges()];
    for e in mesh.interior_edges() {
        let edge = mesh.edge(e);
        let t = edge.twin.unwrap();
        let mut ids = [0; 2];
        for (end, &v) in edge.vertices.iter().enumerate() {
            ids[end] = tail.len();
            tail.push(mesh.corner(edge.halfedge / 3, v).unwrap());
            head.push(mesh.corner(t / 3, v).unwrap());
            kind.push(BevelEdgeKind::Jump { edge: e, vertex: v });
        }
        jumps[e] = Some(ids);
    }

    let (face_comp, n_components) = mesh.face_components();
    let mut faces = Vec::new();
    let mut component = Vec::new();
    for f in 0..nf {
        faces.push(BevelFace { kind: BevelFaceKind::Face(f), cycle: vec![(3 * f, 1), (3 * f + 1, 1), (3 * f + 2, 1)] });
        component.push(face_comp[f]);
    }
    let mut edge_face = vec![None; mesh.n_edges()];
    for e in mesh.interior_edges() {
        let edge = mesh.edge(e);
        let [ja, jb] = jumps[e].unwrap();
        let t = edge.twin.unwrap();
        edge_face[e] = Some(faces.len());
        faces.push(BevelFace { kind: BevelFaceKind::Edge(e), cycle: vec![(edge.halfedge, -1), (ja, 1), (t, -1), (jb, -1)] });
        component.push(face_comp[edge.halfedge / 3]);
    }
    let mut vertex_face = vec![None; mesh.n_vertices()];
    for v in 0..mesh.n_vertices() {
        if mesh.is_boundary_vertex(v) {
            continue;
        }
        let out = mesh.outgoing(v);
        let mut cycle = Vec::with_capacity(out.len());
        for (i, &h) in out.iter().enumerate() {
            // crossing the incoming halfedge of face(h) leads to the next face ccw
            let next_face = out[(i + 1) % out.len()] / 3;
            let e = mesh.edge_of(SurfaceMesh::prev(h));
            let j = jump_at(&jumps, mesh, e, v);
            let first = mesh.edge(e).halfedge / 3;
            debug_assert!(first == h / 3 || first == next_face);
            cycle.push((j, if first == h / 3 { 1 } else { -1 }));
        }
        vertex_face[v] = Some(faces.len());
        faces.push(BevelFace { kind: BevelFaceKind::Vertex(v), cycle });
        component.push(face_comp[out[0] / 3]);
    }

    BeveledMesh { n_faces: nf, tail, head, kind, jumps, faces, edge_face, vertex_face, component, n_components }
}

fn jump_at(jumps: &[Option<[usize; 2]>], mesh: &SurfaceMesh, e: usize, v: usize) -> usize {
    let ids = jumps[e].expect("interior edge");
    if mesh.edge(e).vertices[0] == v {
        ids[0]
    } else {
        ids[1]
    }
}

impl BeveledMesh {
    pub fn n_corners(&self) -> usize {
        3 * self.n_faces
    }

    pub fn n_edges(&self) -> usize {
        self.tail.len()
    }

    pub fn n_split(&self) -> usize {
        3 * self.n_faces
    }

    pub fn n_jump(&self) -> usize {
        self.tail.len() - 3 * self.n_faces
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_original_faces(&self) -> usize {
        self.n_faces
    }

    pub fn faces(&self) -> &[BevelFace] {
        &self.faces
    }

    pub fn face(&self, i: usize) -> &BevelFace {
        &self.faces[i]
    }

    pub fn edge_kind(&self, i: usize) -> BevelEdgeKind {
        self.kind[i]
    }

    pub fn is_jump(&self, i: usize) -> bool {
        i >= 3 * self.n_faces
    }

    pub fn endpoints(&self, i: usize) -> (usize, usize) {
        (self.tail[i], self.head[i])
    }

    /// Jump edges of original edge `e` at (source, target) of its first halfedge.
    pub fn jumps(&self, e: usize) -> Option<[usize; 2]> {
        self.jumps[e]
    }

    pub fn jump(&self, mesh: &SurfaceMesh, e: usize, v: usize) -> usize {
        jump_at(&self.jumps, mesh, e, v)
    }

    pub fn edge_face(&self, e: usize) -> Option<usize> {
        self.edge_face[e]
    }

    pub fn vertex_face(&self, v: usize) -> Option<usize> {
        self.vertex_face[v]
    }

    /// Connected component of each beveled face.
    pub fn component(&self, i: usize) -> usize {
        self.component[i]
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    /// Signed incidence from corners to beveled edges.
    pub fn d0(&self) -> SparseMatrix {
        let mut t = Vec::with_capacity(2 * self.n_edges());
        for e in 0..self.n_edges() {
            t.push((e, self.tail[e], -1.0));
            t.push((e, self.head[e], 1.0));
        }
        SparseMatrix::from_triplets(self.n_edges(), self.n_corners(), &t)
    }

    /// Signed incidence from beveled edges to beveled face cycles.
    pub fn d1(&self) -> SparseMatrix {
        let mut t = Vec::new();
        for (i, f) in self.faces.iter().enumerate() {
            t.extend(f.cycle.iter().map(|&(e, s)| (i, e, s as f64)));
        }
        SparseMatrix::from_triplets(self.n_faces(), self.n_edges(), &t)
    }

    /// Connection angle per beveled edge: the edge's connection on jumps, zero on splits.
    pub fn edge_connection(&self, mesh: &SurfaceMesh) -> Vec<f64> {
        let r = mesh.connection_form();
        self.kind
            .iter()
            .map(|k| match *k {
                BevelEdgeKind::Split(_) => 0.0,
                BevelEdgeKind::Jump { edge, .. } => r[edge],
            })
            .collect()
    }
}

/// A primal loop lifted onto beveled edges alongside one of its sides.
#[derive(Clone, Debug, Serialize)]
pub struct LiftedLoop {
    pub chain: Vec<(usize, i8)>,
    /// One-sided angle defect of the lift.
    pub curvature: f64,
    pub left: bool,
}

#[derive(Clone, Debug)]
pub struct CycleOperators {
    pub d0: SparseMatrix,
    pub d1: SparseMatrix,
    pub h: SparseMatrix,
    pub b: SparseMatrix,
    /// κ_v on vertex-faces, zero elsewhere.
    pub kappa_bar: Vec<f64>,
    pub kappa_h: Vec<f64>,
    pub kappa_b: Vec<f64>,
    pub generators: Vec<LiftedLoop>,
    pub boundaries: Vec<LiftedLoop>,
}

/// Lifts a directed halfedge path (each entry leaving the target of the previous one)
/// onto the beveled edges of its left faces. Returns `None` when a fan crosses the boundary.
fn lift_left(mesh: &SurfaceMesh, bm: &BeveledMesh, path: &[usize]) -> Option<LiftedLoop> {
    let n = path.len();
    let mut chain = Vec::new();
    let mut curvature = 0.0;
    for i in 0..n {
        let h_in = path[i];
        let h_out = path[(i + 1) % n];
        chain.push((h_in, 1));
        let w = mesh.target(h_in);
        let mut c = SurfaceMesh::next(h_in);
        let mut swept = mesh.angle(c);
        while c != h_out {
            let t = mesh.twin(c)?;
            let e = mesh.edge_of(c);
            let sign = if mesh.edge(e).halfedge / 3 == c / 3 { 1 } else { -1 };
            chain.push((bm.jump(mesh, e, w), sign));
            c = SurfaceMesh::next(t);
            swept += mesh.angle(c);
        }
        curvature += PI - swept;
    }
    Some(LiftedLoop { chain, curvature, left: true })
}

/// Same along the right faces; `path` holds the right-side halfedges, each running
/// against the loop direction.
fn lift_right(mesh: &SurfaceMesh, bm: &BeveledMesh, path: &[usize]) -> Option<LiftedLoop> {
    let n = path.len();
    let mut chain = Vec::new();
    let mut curvature = 0.0;
    for i in 0..n {
        // path[i] runs w→u for the step u→w
        let h_in = path[i];
        let h_out = path[(i + 1) % n];
        chain.push((h_in, -1));
        let w = mesh.source(h_in);
        let mut c = h_in;
        let mut swept = mesh.angle(c);
        while SurfaceMesh::prev(c) != h_out {
            let p = SurfaceMesh::prev(c);
            let t = mesh.twin(p)?;
            let e = mesh.edge_of(p);
            let sign = if mesh.edge(e).halfedge / 3 == c / 3 { 1 } else { -1 };
            chain.push((bm.jump(mesh, e, w), sign));
            c = t;
            swept += mesh.angle(c);
        }
        curvature += swept - PI;
    }
    Some(LiftedLoop { chain, curvature, left: false })
}

/// Lifts an edge loop, preferring its left side.
pub fn lift_loop(mesh: &SurfaceMesh, bm: &BeveledMesh, l: &EdgeLoop) -> Option<LiftedLoop> {
    let n = l.steps.len();
    let halfedge_from = |i: usize, from: usize| -> Option<usize> {
        let (e, _) = l.steps[i];
        let edge = mesh.edge(e);
        if edge.vertices[0] == from {
            Some(edge.halfedge)
        } else {
            edge.twin
        }
    };
    let left: Option<Vec<usize>> = (0..n).map(|i| halfedge_from(i, l.vertices[i])).collect();
    if let Some(lift) = left.and_then(|p| lift_left(mesh, bm, &p)) {
        return Some(lift);
    }
    let right: Option<Vec<usize>> = (0..n).map(|i| halfedge_from(i, l.vertices[(i + 1) % n])).collect();
    right.and_then(|p| lift_right(mesh, bm, &p))
}

fn chain_matrix(rows: &[LiftedLoop], ncols: usize) -> SparseMatrix {
    let mut t = Vec::new();
    for (r, l) in rows.iter().enumerate() {
        t.extend(l.chain.iter().map(|&(e, s)| (r, e, -(s as f64))));
    }
    SparseMatrix::from_triplets(rows.len(), ncols, &t)
}

pub fn build_operators(
    bm: &BeveledMesh,
    mesh: &SurfaceMesh,
    generators: &[EdgeLoop],
    loops: &[BoundaryLoop],
) -> Result<CycleOperators, BevelError> {
    let kappa = mesh.gaussian_curvature();
    let kappa_bar = bm
        .faces
        .iter()
        .map(|f| match f.kind {
            BevelFaceKind::Vertex(v) => kappa[v],
            _ => 0.0,
        })
        .collect();
    let lifted: Vec<LiftedLoop> = generators
        .iter()
        .enumerate()
        .map(|(i, g)| lift_loop(mesh, bm, g).ok_or(BevelError::InconsistentLift(i)))
        .collect::<Result<_, _>>()?;
    let boundaries: Vec<LiftedLoop> = loops
        .iter()
        .map(|l| lift_left(mesh, bm, &l.halfedges).expect("boundary loops always lift on the surface side"))
        .collect();
    Ok(CycleOperators {
        d0: bm.d0(),
        d1: bm.d1(),
        h: chain_matrix(&lifted, bm.n_edges()),
        b: chain_matrix(&boundaries, bm.n_edges()),
        kappa_bar,
        kappa_h: lifted.iter().map(|l| l.curvature).collect(),
        kappa_b: boundaries.iter().map(|l| l.curvature).collect(),
        generators: lifted,
        boundaries,
    })
}

#[derive(Serialize)]
pub struct BevelCounts {
    pub corners: usize,
    pub split_edges: usize,
    pub jump_edges: usize,
    pub original_faces: usize,
    pub edge_faces: usize,
    pub vertex_faces: usize,
}

#[derive(Serialize)]
pub struct BevelDump {
    pub counts: BevelCounts,
    pub faces: Vec<BevelFace>,
    pub d0: TripletDump,
    pub d1: TripletDump,
    pub h: TripletDump,
    pub b: TripletDump,
    pub kappa_bar: Vec<f64>,
    pub kappa_h: Vec<f64>,
    pub kappa_b: Vec<f64>,
}

impl BeveledMesh {
    pub fn counts(&self) -> BevelCounts {
        let count = |p: fn(&BevelFaceKind) -> bool| self.faces.iter().filter(|f| p(&f.kind)).count();
        BevelCounts {
            corners: self.n_corners(),
            split_edges: self.n_split(),
            jump_edges: self.n_jump(),
            original_faces: self.n_faces,
            edge_faces: count(|k| matches!(k, BevelFaceKind::Edge(_))),
            vertex_faces: count(|k| matches!(k, BevelFaceKind::Vertex(_))),
        }
    }

    /// JSON debug dump of the complex and its operators.
    pub fn dump(&self, ops: &CycleOperators) -> BevelDump {
        BevelDump {
            counts: self.counts(),
            faces: self.faces.clone(),
            d0: (&ops.d0).into(),
            d1: (&ops.d1).into(),
            h: (&ops.h).into(),
            b: (&ops.b).into(),
            kappa_bar: ops.kappa_bar.clone(),
            kappa_h: ops.kappa_h.clone(),
            kappa_b: ops.kappa_b.clone(),
        }
    }
}

/// Convenience: bevel a mesh and build all cycle operators.
pub fn bevel_with_operators(mesh: &SurfaceMesh) -> Result<(BeveledMesh, CycleOperators), BevelError> {
    let bm = bevel(mesh);
    let ops = build_operators(&bm, mesh, &mesh.homology_generators(), &mesh.boundary_loops())?;
    Ok((bm, ops))
}
