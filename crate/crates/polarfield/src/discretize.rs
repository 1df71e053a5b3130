//! Finite-volume flap integrals and the quadratic forms built from them.

use crate::bevel::BeveledMesh;
use crate::mesh::{FlapGeometry, SurfaceMesh};
use crate::prescribe::{IsotropyTargets, SingularityType};
use crate::sparse::SparseMatrix;
use crate::C64;

/// Per interior edge, two rows integrating the gradient of a beveled 1-form over the
/// unfolded flap (x and y in the canonical pose).
#[derive(Clone, Debug)]
pub struct FlapOperator {
    pub d: SparseMatrix,
    /// Interior edge of each row pair.
    pub edges: Vec<usize>,
    /// Row pair of each original edge.
    pub row_of_edge: Vec<Option<usize>>,
    /// 1/(A(f)+A(g)) per row.
    pub mass: Vec<f64>,
    pub lambda_j: f64,
}

fn perp(z: C64) -> C64 {
    C64::new(-z.im, z.re)
}

/// Integrated-gradient coefficients of the three split edges of a triangle whose
/// halfedge vectors are `e` (in whatever frame the result should be expressed).
pub fn face_gradient_coefficients(e: [C64; 3]) -> [C64; 3] {
    [
        (perp(e[2]) - perp(e[1])) / 6.0,
        (perp(e[0]) - perp(e[2])) / 6.0,
        (perp(e[1]) - perp(e[0])) / 6.0,
    ]
}

/// Coefficients (as 2-vectors) of one flap's row pair.
pub fn flap_row(flap: &FlapGeometry, bm: &BeveledMesh, lambda_j: f64) -> Vec<(usize, C64)> {
    let (h, t) = (flap.h, flap.h_twin);
    // f = (k, i, j) starting at h, g = (i, k, l) starting at t
    let ef = [flap.zi - flap.zk, flap.zj - flap.zi, flap.zk - flap.zj];
    let eg = [flap.zk - flap.zi, flap.zl - flap.zk, flap.zi - flap.zl];
    let hf = [h, SurfaceMesh::next(h), SurfaceMesh::prev(h)];
    let hg = [t, SurfaceMesh::next(t), SurfaceMesh::prev(t)];
    let mut out = Vec::with_capacity(8);
    for (hs, es) in [(hf, ef), (hg, eg)] {
        let c = face_gradient_coefficients(es);
        out.extend((0..3).map(|k| (hs[k], c[k])));
    }
    // distributional gradient of the jump across the edge, normal pointing from f into g
    let normal_len = C64::new(0.0, -flap.length());
    let [ja, jb] = bm.jumps(flap.edge).expect("interior edge");
    out.push((ja, normal_len * (0.5 * lambda_j)));
    out.push((jb, normal_len * (0.5 * lambda_j)));
    out
}

pub fn build_d(bm: &BeveledMesh, mesh: &SurfaceMesh, lambda_j: f64) -> FlapOperator {
    let mut t = Vec::new();
    let mut edges = Vec::new();
    let mut row_of_edge = vec![None; mesh.n_edges()];
    let mut mass = Vec::new();
    for e in mesh.interior_edges() {
        let flap = mesh.flatten_flap(e).expect("interior edge");
        let r = 2 * edges.len();
        for (col, c) in flap_row(&flap, bm, lambda_j) {
            t.push((r, col, c.re));
            t.push((r + 1, col, c.im));
        }
        let m = 1.0 / (mesh.area(flap.f) + mesh.area(flap.g));
        mass.extend([m, m]);
        row_of_edge[e] = Some(edges.len());
        edges.push(e);
    }
    let d = SparseMatrix::from_triplets(2 * edges.len(), bm.n_edges(), &t);
    FlapOperator { d, edges, row_of_edge, mass, lambda_j }
}

impl FlapOperator {
    /// Q = Dᵀ M_E D on beveled 1-forms.
    pub fn q(&self) -> SparseMatrix {
        self.d.gram(&self.mass)
    }
}

/// L = d₀ᵀ Q d₀ on corner 0-forms.
pub fn build_l(q: &SparseMatrix, d0: &SparseMatrix) -> SparseMatrix {
    d0.transpose().matmul(&q.matmul(d0))
}

/// Stacked isotropy rows: the term is Σ_r w_r ((D_S θ)_r − rhs_r)².
#[derive(Clone, Debug)]
pub struct IsotropyOperator {
    pub ds: SparseMatrix,
    pub ms: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl IsotropyOperator {
    pub fn energy(&self, theta: &[f64]) -> f64 {
        let r = self.ds.mul_vec(theta);
        r.iter().zip(&self.rhs).zip(&self.ms).map(|((a, b), w)| w * (a - b) * (a - b)).sum()
    }

    /// Gram matrix D_Sᵀ M_S D_S and linear term D_Sᵀ M_S rhs.
    pub fn normal_parts(&self) -> (SparseMatrix, Vec<f64>) {
        let weighted: Vec<f64> = self.rhs.iter().zip(&self.ms).map(|(r, w)| r * w).collect();
        (self.ds.gram(&self.ms), self.ds.transpose_mul_vec(&weighted))
    }
}

/// Builds D_S/M_S: spoke flaps for vertex groups, the edge flap for edge groups and the
/// face's own integrated gradient for face groups, each restricted to the group support.
pub fn build_ds_ms(targets: &IsotropyTargets, flaps: &FlapOperator, bm: &BeveledMesh, mesh: &SurfaceMesh) -> IsotropyOperator {
    let mut t = Vec::new();
    let mut ms = Vec::new();
    let mut rhs = Vec::new();
    let mut row = 0;
    let mut target = vec![0.0; bm.n_edges()];
    let mut in_support = vec![false; bm.n_edges()];
    for g in &targets.groups {
        for (&e, &v) in g.edges.iter().zip(&g.values) {
            target[e] = v;
            in_support[e] = true;
        }
        let mut emit = |coeffs: Vec<(usize, C64)>, w: f64| {
            let mut r = [0.0; 2];
            for (col, c) in coeffs {
                if !in_support[col] {
                    continue;
                }
                t.push((row, col, c.re));
                t.push((row + 1, col, c.im));
                r[0] += c.re * target[col];
                r[1] += c.im * target[col];
            }
            ms.extend([w, w]);
            rhs.extend(r);
            row += 2;
        };
        match g.kind {
            SingularityType::Vertex => {
                for h in mesh.outgoing(g.element) {
                    let e = mesh.edge_of(h);
                    let r = flaps.row_of_edge[e].expect("spokes of interior vertices are interior");
                    emit(flap_coeffs(flaps, r), flaps.mass[2 * r]);
                }
            }
            SingularityType::Edge => {
                let r = flaps.row_of_edge[g.element].expect("interior edge");
                emit(flap_coeffs(flaps, r), flaps.mass[2 * r]);
            }
            SingularityType::Face => {
                let f = g.element;
                let c = face_gradient_coefficients([0, 1, 2].map(|k| mesh.halfedge_vector(3 * f + k)));
                emit((0..3).map(|k| (3 * f + k, c[k])).collect(), 1.0 / mesh.area(f));
            }
        }
        for &e in &g.edges {
            in_support[e] = false;
            target[e] = 0.0;
        }
    }
    IsotropyOperator { ds: SparseMatrix::from_triplets(row, bm.n_edges(), &t), ms, rhs }
}

fn flap_coeffs(flaps: &FlapOperator, r: usize) -> Vec<(usize, C64)> {
    let xs: Vec<(usize, f64)> = flaps.d.row(2 * r).collect();
    let ys: Vec<(usize, f64)> = flaps.d.row(2 * r + 1).collect();
    let mut out: Vec<(usize, C64)> = xs.iter().map(|&(c, x)| (c, C64::new(x, 0.0))).collect();
    for (c, y) in ys {
        match out.iter_mut().find(|(cc, _)| *cc == c) {
            Some(entry) => entry.1.im = y,
            None => out.push((c, C64::new(0.0, y))),
        }
    }
    out
}

/// M_I per interior edge: 3 l² / (A(f)+A(g)); zero on boundary edges.
pub fn index_weights(mesh: &SurfaceMesh) -> Vec<f64> {
    (0..mesh.n_edges())
        .map(|e| match mesh.edge(e).twin {
            Some(t) => {
                let l = mesh.edge_length(e);
                3.0 * l * l / (mesh.area(mesh.edge(e).halfedge / 3) + mesh.area(t / 3))
            }
            None => 0.0,
        })
        .collect()
}

/// Face–edge incidence of the original mesh (|F| × |E|).
pub fn face_edge_incidence(mesh: &SurfaceMesh) -> SparseMatrix {
    let mut t = Vec::with_capacity(mesh.n_halfedges());
    for h in 0..mesh.n_halfedges() {
        let e = mesh.edge_of(h);
        t.push((h / 3, e, if mesh.edge(e).halfedge == h { 1.0 } else { -1.0 }));
    }
    SparseMatrix::from_triplets(mesh.n_faces(), mesh.n_edges(), &t)
}

/// L₂ = d₁ M_I d₁ᵀ on original faces.
pub fn build_index_laplacian(mesh: &SurfaceMesh) -> SparseMatrix {
    face_edge_incidence(mesh).transpose().gram(&index_weights(mesh))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bevel::{bevel, bevel_with_operators};
    use crate::mesh::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    /// Integrated gradient of per-face linear functions on a planar flap plus the
    /// jump integral along the shared edge (midpoint rule), computed directly.
    fn quadrature(z: [C64; 4], vals_f: [f64; 3], vals_g: [f64; 3], lambda: f64) -> C64 {
        // z = [i, j, k, l]; f = (i, j, k), g = (k, l, i)
        let grad = |p: [C64; 3], v: [f64; 3]| -> (C64, f64) {
            let (a, b) = (p[1] - p[0], p[2] - p[0]);
            let det = a.re * b.im - a.im * b.re;
            let (da, db) = (v[1] - v[0], v[2] - v[0]);
            let gx = (da * b.im - db * a.im) / det;
            let gy = (a.re * db - b.re * da) / det;
            (C64::new(gx, gy), det.abs() / 2.0)
        };
        let (gf, af) = grad([z[0], z[1], z[2]], vals_f);
        let (gg, ag) = grad([z[2], z[3], z[0]], vals_g);
        let lin_f = |p: C64| vals_f[0] + (gf.conj() * (p - z[0])).re;
        let lin_g = |p: C64| vals_g[0] + (gg.conj() * (p - z[2])).re;
        let mid = (z[0] + z[2]) / 2.0;
        let len = (z[0] - z[2]).norm();
        let normal = C64::new(0.0, -1.0);
        gf * af + gg * ag + normal * (lambda * len * (lin_g(mid) - lin_f(mid)))
    }

    #[test]
    fn stokes_oracle_on_random_planar_flaps() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 1000 {
            let mut p: Vec<[f64; 3]> = (0..4).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0]).collect();
            // make (0,1,2) and (1,0,3) a valid planar flap: 2 above, 3 below edge 0→1
            let cross = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
            if cross(p[0], p[1], p[2]) < 0.0 {
                p.swap(0, 1);
            }
            if cross(p[0], p[1], p[2]).abs() < 0.05 || cross(p[1], p[0], p[3]) < 0.05 {
                continue;
            }
            let m = SurfaceMesh::new(p, vec![[0, 1, 2], [1, 0, 3]]).unwrap();
            let bm = bevel(&m);
            let ops = build_d(&bm, &m, 1.0);
            let e = m.interior_edges().next().unwrap();
            let flap = m.flatten_flap(e).unwrap();
            let alpha: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let beta = bm.d0().mul_vec(&alpha);
            let out = ops.d.mul_vec(&beta);
            let got = C64::new(out[0], out[1]);
            // corner values by vertex, in flap order i, j, k, l
            let [vi, vj, vk, vl] = flap.vertices;
            let at = |f: usize, v: usize| alpha[m.corner(f, v).unwrap()];
            let want = quadrature(
                [flap.zi, flap.zj, flap.zk, flap.zl],
                [at(flap.f, vi), at(flap.f, vj), at(flap.f, vk)],
                [at(flap.g, vk), at(flap.g, vl), at(flap.g, vi)],
                1.0,
            );
            assert!((got - want).norm() < 1e-10, "{got} vs {want}");
            checked += 1;
        }
    }

    #[test]
    fn pure_jump_and_constant() {
        let p = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.3, 0.7, 0.0], [0.6, -0.5, 0.0]];
        let m = SurfaceMesh::new(p, vec![[0, 1, 2], [1, 0, 3]]).unwrap();
        let bm = bevel(&m);
        let ops = build_d(&bm, &m, 50.0);
        let d0 = bm.d0();
        let out = ops.d.mul_vec(&d0.mul_vec(&vec![1.0; 6]));
        assert!(out.iter().all(|v| v.abs() < 1e-15));
        // α = 0 on f, c on g
        let c = 0.7;
        let alpha = [0.0, 0.0, 0.0, c, c, c];
        let out = ops.d.mul_vec(&d0.mul_vec(&alpha));
        assert_relative_eq!(out[0], 0.0, epsilon = 1e-14);
        assert_relative_eq!(out[1], -50.0 * c * 1.0, epsilon = 1e-12);
    }

    #[test]
    fn laplacian_properties() {
        let m = map_positions(&torus(10, 6, 2.0, 0.7), |p| [p[0], p[1] * 1.1, p[2]]);
        let (bm, ops) = bevel_with_operators(&m).unwrap();
        let d = build_d(&bm, &m, 50.0);
        let q = d.q();
        assert!(q.is_symmetric(1e-12));
        let l = build_l(&q, &ops.d0);
        assert!(l.is_symmetric(1e-10));
        let lc = l.mul_vec(&vec![1.0; bm.n_corners()]);
        assert!(lc.iter().all(|v| v.abs() < 1e-10));
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        for _ in 0..20 {
            let x: Vec<f64> = (0..bm.n_edges()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(crate::sparse::dot(&x, &q.mul_vec(&x)) >= 0.0);
        }
    }

    #[test]
    fn linear_function_dirichlet_energy() {
        let m = grid(5, 4, 2.0, 1.0);
        let (bm, ops) = bevel_with_operators(&m).unwrap();
        let d = build_d(&bm, &m, 1.0);
        let l = build_l(&d.q(), &ops.d0);
        let g = [0.3, -1.2];
        let sigma: Vec<f64> = (0..bm.n_corners())
            .map(|c| {
                let p = m.positions()[m.source(c)];
                g[0] * p[0] + g[1] * p[1]
            })
            .collect();
        let e = crate::sparse::dot(&sigma, &l.mul_vec(&sigma));
        // Σ over flaps of |(A_f+A_g)∇σ|²/(A_f+A_g) = |∇σ|² Σ (A_f+A_g)
        let flap_area: f64 = m.interior_edges().map(|e| {
            let fl = m.flatten_flap(e).unwrap();
            m.area(fl.f) + m.area(fl.g)
        }).sum();
        assert_relative_eq!(e, (g[0] * g[0] + g[1] * g[1]) * flap_area, max_relative = 1e-8);
    }

    #[test]
    fn q_is_pose_invariant() {
        let m = icosphere(1);
        let bm = bevel(&m);
        let d = build_d(&bm, &m, 50.0);
        let q = d.q();
        // rotate every flap's row pair by a different angle
        let mut t = Vec::new();
        for r in 0..d.edges.len() {
            let rot = C64::from_polar(1.0, 0.37 * r as f64);
            for (c, v) in flap_coeffs(&d, r) {
                let w = rot * v;
                t.push((2 * r, c, w.re));
                t.push((2 * r + 1, c, w.im));
            }
        }
        let rotated = SparseMatrix::from_triplets(d.d.nrows(), d.d.ncols(), &t).gram(&d.mass);
        let diff = q.add(&rotated.scale(-1.0));
        assert!(diff.triplets().iter().all(|&(_, _, v)| v.abs() < 1e-12));
    }

    #[test]
    fn row_support_and_masses() {
        let m = icosphere(1);
        let bm = bevel(&m);
        let d = build_d(&bm, &m, 50.0);
        for r in 0..d.edges.len() {
            assert_eq!(flap_coeffs(&d, r).len(), 8);
        }
        assert!(d.mass.iter().all(|&w| w > 0.0 && w.is_finite()));
    }

    #[test]
    fn index_weights_examples() {
        let s3 = 3f64.sqrt();
        let p = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.5, s3 / 2.0, 0.0], [0.5, -s3 / 2.0, 0.0]];
        let m = SurfaceMesh::new(p, vec![[0, 1, 2], [1, 0, 3]]).unwrap();
        let w = index_weights(&m);
        let e = m.interior_edges().next().unwrap();
        assert_relative_eq!(w[e], 2.0 * s3, epsilon = 1e-12);
        let l2 = build_index_laplacian(&m);
        assert_eq!(l2.nrows(), 2);
        assert_relative_eq!(l2.get(0, 0), w[e], epsilon = 1e-12);
        assert_relative_eq!(l2.get(0, 1), -w[e], epsilon = 1e-12);
        let big = build_index_laplacian(&torus(8, 5, 2.0, 0.5));
        assert!(big.mul_vec(&vec![1.0; big.ncols()]).iter().all(|v| v.abs() < 1e-12));
        assert!(big.is_symmetric(1e-14));
    }

    #[test]
    fn ds_row_counts() {
        use crate::prescribe::*;
        let m = icosphere(1);
        let bm = bevel(&m);
        let d = build_d(&bm, &m, 50.0);
        let empty = assemble_targets(&Prescription::new(1, vec![]), &m, &bm).unwrap();
        assert_eq!(build_ds_ms(&empty, &d, &bm, &m).ds.nrows(), 0);
        let face = assemble_targets(&Prescription::new(1, vec![Singularity::face(2, [0.3, 0.3, 0.4], 1)]), &m, &bm).unwrap();
        assert_eq!(build_ds_ms(&face, &d, &bm, &m).ds.nrows(), 2);
        let vert = assemble_targets(&Prescription::new(1, vec![Singularity::vertex(0, 1)]), &m, &bm).unwrap();
        assert_eq!(build_ds_ms(&vert, &d, &bm, &m).ds.nrows(), 2 * m.valence(0));
        // targets themselves carry zero isotropy energy
        let iso = build_ds_ms(&vert, &d, &bm, &m);
        let mut theta = vec![0.0; bm.n_edges()];
        for g in &vert.groups {
            for (&e, &v) in g.edges.iter().zip(&g.values) {
                theta[e] = v;
            }
        }
        assert!(iso.energy(&theta) < 1e-20);
    }

}
