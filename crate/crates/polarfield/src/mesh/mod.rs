//! Triangle meshes with halfedge adjacency and intrinsic geometry.
//!
//! Halfedge `h = 3f + c` runs from corner `c` to corner `c+1` of face `f`, so halfedge
//! and corner ids coincide. Each face carries a local complex frame whose real axis is
//! its first halfedge.

mod generate;
mod io;
mod topology;

pub use generate::*;
pub use io::{load_mesh, load_mesh_file, write_obj, MeshFormat};
pub use topology::{BoundaryLoop, EdgeLoop};

use num_complex::Complex64 as C64;
use std::collections::HashMap;
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("non-manifold mesh: {0}")]
    NonManifold(String),
    #[error("face {face} has {count} vertices; only triangles are accepted")]
    NonTriangular { face: usize, count: usize },
    #[error("degenerate face {0}")]
    DegenerateFace(usize),
    #[error("edge {0} is a boundary edge")]
    BoundaryEdge(usize),
    #[error("vertex {0} is a boundary vertex")]
    BoundaryVertex(usize),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    /// First halfedge in id order; its face is the edge's "f" side.
    pub halfedge: usize,
    /// Opposite halfedge, absent on the boundary.
    pub twin: Option<usize>,
    /// Source and target of `halfedge`.
    pub vertices: [usize; 2],
}

#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    positions: Vec<[f64; 3]>,
    faces: Vec<[usize; 3]>,
    twin: Vec<Option<usize>>,
    he_edge: Vec<usize>,
    edges: Vec<Edge>,
    /// Outgoing halfedge that starts the counterclockwise fan (the boundary one if any).
    vertex_start: Vec<usize>,
    vertex_boundary: Vec<bool>,
    he_length: Vec<f64>,
    angle: Vec<f64>,
    area: Vec<f64>,
    local: Vec<[C64; 3]>,
    connection: Vec<f64>,
}

/// A flap (two faces sharing an interior edge) unfolded into one plane.
///
/// Canonical pose: `k` (source of the edge's first halfedge) at the origin and `i` on
/// the positive real axis; face `f = (i, j, k)` lies above, `g = (k, l, i)` below.
#[derive(Clone, Copy, Debug)]
pub struct FlapGeometry {
    pub edge: usize,
    pub f: usize,
    pub g: usize,
    /// Halfedge k→i in f and its twin i→k in g.
    pub h: usize,
    pub h_twin: usize,
    pub vertices: [usize; 4],
    /// Unfolded positions of i, j, k, l.
    pub zi: C64,
    pub zj: C64,
    pub zk: C64,
    pub zl: C64,
    rot_f: C64,
    rot_g: C64,
    origin_f: C64,
    origin_g: C64,
}

impl FlapGeometry {
    /// Maps a point in f's local frame into the flap.
    pub fn from_f(&self, z: C64) -> C64 {
        self.rot_f * (z - self.origin_f)
    }

    pub fn from_g(&self, z: C64) -> C64 {
        self.rot_g * (z - self.origin_g)
    }

    pub fn to_f(&self, w: C64) -> C64 {
        w / self.rot_f + self.origin_f
    }

    pub fn to_g(&self, w: C64) -> C64 {
        w / self.rot_g + self.origin_g
    }

    /// Unit rotation taking vectors in f's frame into the flap frame.
    pub fn rotation_f(&self) -> C64 {
        self.rot_f
    }

    pub fn rotation_g(&self) -> C64 {
        self.rot_g
    }

    pub fn length(&self) -> f64 {
        self.zi.re
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Interior angle opposite side `a` in a triangle with sides `a, b, c`.
fn opposite_angle(a: f64, b: f64, c: f64) -> f64 {
    ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0).acos()
}

/// Triangle area from side lengths (Kahan's stable form of Heron's formula).
fn side_area(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    0.25 * p.max(0.0).sqrt()
}

impl SurfaceMesh {
    pub fn new(positions: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let nv = positions.len();
        for (f, tri) in faces.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(MeshError::ParseError { line: 0, msg: format!("face {f} references a missing vertex") });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[2] == tri[0] {
                return Err(MeshError::DegenerateFace(f));
            }
        }
        let nh = 3 * faces.len();
        let src = |h: usize| faces[h / 3][h % 3];
        let dst = |h: usize| faces[h / 3][(h % 3 + 1) % 3];

        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(nh);
        for h in 0..nh {
            if directed.insert((src(h), dst(h)), h).is_some() {
                return Err(MeshError::NonManifold(format!(
                    "edge ({}, {}) is traversed twice in the same direction (inconsistent orientation or more than two faces)",
                    src(h),
                    dst(h)
                )));
            }
        }
        let twin: Vec<Option<usize>> = (0..nh).map(|h| directed.get(&(dst(h), src(h))).copied()).collect();

        let mut he_edge = vec![usize::MAX; nh];
        let mut edges = Vec::new();
        for h in 0..nh {
            match twin[h] {
                Some(t) if t < h => he_edge[h] = he_edge[t],
                _ => {
                    he_edge[h] = edges.len();
                    edges.push(Edge { halfedge: h, twin: twin[h], vertices: [src(h), dst(h)] });
                }
            }
        }

        // Vertex fans.
        let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for h in 0..nh {
            outgoing[src(h)].push(h);
        }
        let mut vertex_start = vec![0; nv];
        let mut vertex_boundary = vec![false; nv];
        for v in 0..nv {
            let out = &outgoing[v];
            if out.is_empty() {
                return Err(MeshError::NonManifold(format!("vertex {v} is not referenced by any face")));
            }
            let open: Vec<usize> = out.iter().copied().filter(|&h| twin[h].is_none()).collect();
            if open.len() > 1 {
                return Err(MeshError::NonManifold(format!("vertex {v} joins several face fans")));
            }
            let start = open.first().copied().unwrap_or(out[0]);
            let mut count = 1;
            let mut h = start;
            loop {
                let prev = 3 * (h / 3) + (h % 3 + 2) % 3;
                match twin[prev] {
                    Some(t) if t != start => {
                        h = t;
                        count += 1;
                        if count > out.len() {
                            break;
                        }
                    }
                    _ => break,
                }
            }
            if count != out.len() {
                return Err(MeshError::NonManifold(format!("star of vertex {v} is not a single fan")));
            }
            vertex_start[v] = start;
            vertex_boundary[v] = !open.is_empty();
        }

        let he_length: Vec<f64> = (0..nh).map(|h| dist(positions[src(h)], positions[dst(h)])).collect();
        let diag = bbox_diagonal(&positions);
        let mut angle = vec![0.0; nh];
        let mut area = vec![0.0; faces.len()];
        let mut local = vec![[C64::new(0.0, 0.0); 3]; faces.len()];
        for f in 0..faces.len() {
            // l[c] is the length of the side leaving corner c
            let l = [he_length[3 * f], he_length[3 * f + 1], he_length[3 * f + 2]];
            let a = side_area(l[0], l[1], l[2]);
            if !(a >= 1e-12 * diag * diag) {
                return Err(MeshError::DegenerateFace(f));
            }
            area[f] = a;
            for c in 0..3 {
                // angle at corner c is opposite the side leaving corner c+1
                angle[3 * f + c] = opposite_angle(l[(c + 1) % 3], l[c], l[(c + 2) % 3]);
            }
            local[f] = [C64::new(0.0, 0.0), C64::new(l[0], 0.0), C64::from_polar(l[2], angle[3 * f])];
        }

        let mut mesh = SurfaceMesh {
            positions,
            faces,
            twin,
            he_edge,
            edges,
            vertex_start,
            vertex_boundary,
            he_length,
            angle,
            area,
            local,
            connection: Vec::new(),
        };
        mesh.connection = (0..mesh.edges.len())
            .map(|e| match mesh.edges[e].twin {
                Some(t) => {
                    let h = mesh.edges[e].halfedge;
                    let df = mesh.halfedge_vector(h);
                    let dg = -mesh.halfedge_vector(t);
                    wrap_angle(dg.arg() - df.arg())
                }
                None => 0.0,
            })
            .collect();
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.positions.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_halfedges(&self) -> usize {
        3 * self.faces.len()
    }

    pub fn positions(&self) -> &[[f64; 3]] {
        &self.positions
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> [usize; 3] {
        self.faces[f]
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn next(h: usize) -> usize {
        3 * (h / 3) + (h % 3 + 1) % 3
    }

    pub fn prev(h: usize) -> usize {
        3 * (h / 3) + (h % 3 + 2) % 3
    }

    pub fn face_of(h: usize) -> usize {
        h / 3
    }

    pub fn source(&self, h: usize) -> usize {
        self.faces[h / 3][h % 3]
    }

    pub fn target(&self, h: usize) -> usize {
        self.faces[h / 3][(h % 3 + 1) % 3]
    }

    pub fn twin(&self, h: usize) -> Option<usize> {
        self.twin[h]
    }

    pub fn edge_of(&self, h: usize) -> usize {
        self.he_edge[h]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edges[e].twin.is_none()
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.vertex_boundary[v]
    }

    pub fn has_boundary(&self) -> bool {
        self.vertex_boundary.iter().any(|&b| b)
    }

    pub fn interior_edges(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.edges.len()).filter(|&e| self.edges[e].twin.is_some())
    }

    /// Interior angle at corner (= halfedge) `c`.
    pub fn angle(&self, c: usize) -> f64 {
        self.angle[c]
    }

    pub fn area(&self, f: usize) -> f64 {
        self.area[f]
    }

    pub fn halfedge_length(&self, h: usize) -> f64 {
        self.he_length[h]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.he_length[self.edges[e].halfedge]
    }

    /// Corner positions of face `f` in its local complex frame.
    pub fn local_coords(&self, f: usize) -> [C64; 3] {
        self.local[f]
    }

    /// Vector along halfedge `h` in the frame of its face.
    pub fn halfedge_vector(&self, h: usize) -> C64 {
        let z = self.local[h / 3];
        z[(h % 3 + 1) % 3] - z[h % 3]
    }

    /// Corner id of vertex `v` in face `f`.
    pub fn corner(&self, f: usize, v: usize) -> Option<usize> {
        self.faces[f].iter().position(|&w| w == v).map(|c| 3 * f + c)
    }

    /// Outgoing halfedges of `v` in counterclockwise order. For boundary vertices the
    /// first one is the boundary halfedge leaving `v`.
    pub fn outgoing(&self, v: usize) -> Vec<usize> {
        let start = self.vertex_start[v];
        let mut out = vec![start];
        let mut h = start;
        while let Some(t) = self.twin[Self::prev(h)] {
            if t == start {
                break;
            }
            out.push(t);
            h = t;
        }
        out
    }

    /// Faces around `v` in counterclockwise order.
    pub fn vertex_faces(&self, v: usize) -> Vec<usize> {
        self.outgoing(v).into_iter().map(Self::face_of).collect()
    }

    pub fn valence(&self, v: usize) -> usize {
        self.outgoing(v).len() + usize::from(self.vertex_boundary[v])
    }

    pub fn angle_sum(&self, v: usize) -> f64 {
        self.outgoing(v).into_iter().map(|h| self.angle[h]).sum()
    }

    /// Angle defect: 2π − Σα at interior vertices, π − Σα at boundary vertices.
    pub fn gaussian_curvature(&self) -> Vec<f64> {
        (0..self.n_vertices())
            .map(|v| if self.vertex_boundary[v] { PI } else { 2.0 * PI } - self.angle_sum(v))
            .collect()
    }

    /// Rotation from the frame of the edge's first face to the frame of its second face.
    pub fn connection(&self, e: usize) -> Result<f64, MeshError> {
        if self.is_boundary_edge(e) {
            return Err(MeshError::BoundaryEdge(e));
        }
        Ok(self.connection[e])
    }

    /// Connection angle per edge, zero on boundary edges.
    pub fn connection_form(&self) -> &[f64] {
        &self.connection
    }

    pub fn flatten_flap(&self, e: usize) -> Result<FlapGeometry, MeshError> {
        let Edge { halfedge: h, twin, vertices } = self.edges[e];
        let t = twin.ok_or(MeshError::BoundaryEdge(e))?;
        let (f, g) = (h / 3, t / 3);
        let zf = self.local[f];
        let zg = self.local[g];
        let origin_f = zf[h % 3];
        let dir_f = self.halfedge_vector(h);
        let rot_f = dir_f.conj() / dir_f.norm();
        let origin_g = zg[(t % 3 + 1) % 3];
        let dir_g = -self.halfedge_vector(t);
        let rot_g = dir_g.conj() / dir_g.norm();
        let j = self.target(Self::next(h));
        let l = self.target(Self::next(t));
        let flap = FlapGeometry {
            edge: e,
            f,
            g,
            h,
            h_twin: t,
            vertices: [vertices[1], j, vertices[0], l],
            zi: C64::new(self.he_length[h], 0.0),
            zj: rot_f * (zf[(h % 3 + 2) % 3] - origin_f),
            zk: C64::new(0.0, 0.0),
            zl: rot_g * (zg[(t % 3 + 2) % 3] - origin_g),
            rot_f,
            rot_g,
            origin_f,
            origin_g,
        };
        Ok(flap)
    }

    pub fn bbox_diagonal(&self) -> f64 {
        bbox_diagonal(&self.positions)
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices() as i64 - self.n_edges() as i64 + self.n_faces() as i64
    }

    /// Face-connected component label per face, plus the component count.
    pub fn face_components(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.n_faces()];
        let mut count = 0;
        for seed in 0..self.n_faces() {
            if label[seed] != usize::MAX {
                continue;
            }
            let mut stack = vec![seed];
            label[seed] = count;
            while let Some(f) = stack.pop() {
                for c in 0..3 {
                    if let Some(t) = self.twin[3 * f + c] {
                        if label[t / 3] == usize::MAX {
                            label[t / 3] = count;
                            stack.push(t / 3);
                        }
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Longest side of face `f`.
    pub fn face_diameter(&self, f: usize) -> f64 {
        (0..3).map(|c| self.he_length[3 * f + c]).fold(0.0, f64::max)
    }

    /// Maps barycentric coordinates to the face's local frame.
    pub fn bary_to_local(&self, f: usize, b: [f64; 3]) -> C64 {
        let z = self.local[f];
        z[0] * b[0] + z[1] * b[1] + z[2] * b[2]
    }

    pub fn local_to_bary(&self, f: usize, p: C64) -> [f64; 3] {
        let z = self.local[f];
        let cross = |a: C64, b: C64| a.re * b.im - a.im * b.re;
        let total = cross(z[1] - z[0], z[2] - z[0]);
        let b1 = cross(p - z[0], z[2] - z[0]) / total;
        let b2 = cross(z[1] - z[0], p - z[0]) / total;
        [1.0 - b1 - b2, b1, b2]
    }

    /// 3D position of a local-frame point of face `f`.
    pub fn local_to_world(&self, f: usize, p: C64) -> [f64; 3] {
        let b = self.local_to_bary(f, p);
        let [a, c, d] = self.faces[f].map(|v| self.positions[v]);
        [0, 1, 2].map(|k| b[0] * a[k] + b[1] * c[k] + b[2] * d[k])
    }
}

fn bbox_diagonal(positions: &[[f64; 3]]) -> f64 {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in positions {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    dist(lo, hi)
}
