//! Piecewise power-linear fields: per face, a linear root field a·z + b·z̄ + c raised to
//! an integer power; N-directional fields are the N-th roots of that value.

pub mod trivial;
pub mod winding;

use crate::mesh::SurfaceMesh;
use crate::sparse::SparseMatrix;
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

pub use trivial::{trivial_connections, upsample, TrivialConnection, TrivialError};
pub use winding::{check_indices, edge_loop, face_loop, location_loop, vertex_loop, winding_number, IndexCheck, LoopPath, LoopStep, Winding};

/// Relative tolerance below which |a| and |b| count as equal.
pub const PARABOLIC_TOL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum FieldError {
    #[error("degenerate triangle {0}")]
    DegenerateTriangle(usize),
    #[error("evaluation at a zero of a fractional-power field")]
    ZeroAtFractionalPower,
    #[error("phase gradient requested at a zero of the field")]
    AtSingularity,
    #[error("loop step {step} still turns {turn:.3} rad after refinement")]
    UnderResolvedPath { step: usize, turn: f64 },
    #[error("winding {value:.6} (in units of 2π) is not close to an integer")]
    NonIntegralWinding { value: f64 },
    #[error("index sum {sum} does not match Euler characteristic {chi}")]
    IndexSumMismatch { sum: i64, chi: i64 },
    #[error("baseline solve failed: {0}")]
    Linalg(#[from] crate::sparse::LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Elliptic,
    Hyperbolic,
    Parabolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub kind: FieldKind,
    /// |a|² − |b|², the Jacobian determinant of the linear map.
    pub det: f64,
}

pub fn classify(a: C64, b: C64) -> Classification {
    let (na, nb) = (a.norm(), b.norm());
    let det = a.norm_sqr() - b.norm_sqr();
    let kind = if (na - nb).abs() <= PARABOLIC_TOL * (na + nb) {
        FieldKind::Parabolic
    } else if na > nb {
        FieldKind::Elliptic
    } else {
        FieldKind::Hyperbolic
    };
    Classification { kind, det: if kind == FieldKind::Parabolic { 0.0 } else { det } }
}

/// Zero set of a·z + b·z̄ + c.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ZeroSet {
    Point(C64),
    None,
    /// Points `origin + s·direction`.
    Line { origin: C64, direction: C64 },
    Everywhere,
}

pub fn locate_singularity(a: C64, b: C64, c: C64) -> ZeroSet {
    // real 2×2 system in (x, y): (a+b)x + i(a−b)y = −c
    let (p, q) = (a + b, C64::i() * (a - b));
    let rhs = -c;
    let scale = a.norm_sqr() + b.norm_sqr();
    let det = p.re * q.im - q.re * p.im;
    if scale == 0.0 {
        return if c == C64::new(0.0, 0.0) { ZeroSet::Everywhere } else { ZeroSet::None };
    }
    if det.abs() > PARABOLIC_TOL * scale {
        let x = (rhs.re * q.im - q.re * rhs.im) / det;
        let y = (p.re * rhs.im - rhs.re * p.im) / det;
        return ZeroSet::Point(C64::new(x, y));
    }
    // rank one: the row space is spanned by the larger column
    let col = if p.norm() >= q.norm() { p } else { q };
    let unit = col / col.norm();
    let along = (rhs * unit.conj()).re;
    if (rhs - unit * along).norm() > 1e-9 * (rhs.norm() + col.norm()) {
        return ZeroSet::None;
    }
    // minimum-norm solution of x·p + y·q = along·unit, and the kernel direction
    let (pp, qq) = ((p * unit.conj()).re, (q * unit.conj()).re);
    let nn = pp * pp + qq * qq;
    ZeroSet::Line { origin: C64::new(pp, qq) * (along / nn), direction: C64::new(-qq, pp) / nn.sqrt() }
}

/// Coefficients (a, b, c) with a·z + b·z̄ + c equal to `u` at the corners `z`.
pub fn face_coefficients(u: [C64; 3], z: [C64; 3]) -> Option<[C64; 3]> {
    // eliminate c with differences, then Cramer on the 2×2 complex system
    let (d1, d2) = (z[1] - z[0], z[2] - z[0]);
    let (v1, v2) = (u[1] - u[0], u[2] - u[0]);
    let det = d1 * d2.conj() - d2 * d1.conj();
    if det.norm() <= 1e-14 * (d1.norm() * d2.norm()) {
        return None;
    }
    let a = (v1 * d2.conj() - v2 * d1.conj()) / det;
    let b = (d1 * v2 - d2 * v1) / det;
    Some([a, b, u[0] - a * z[0] - b * z[0].conj()])
}

/// Principal N-th root, argument in (−π/N, π/N].
pub fn principal_root(u: C64, n: u32) -> C64 {
    if n == 1 {
        return u;
    }
    C64::from_polar(u.norm().powf(1.0 / n as f64), u.arg() / n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FaceField {
    /// Root-field values at the three corners, in the face's local frame.
    pub root: [C64; 3],
    pub power: u32,
    /// Root-field coefficients (a, b, c).
    pub coeffs: [C64; 3],
}

#[derive(Clone, Debug, PartialEq)]
pub struct PowerLinearField {
    pub n: u32,
    pub faces: Vec<FaceField>,
}

impl PowerLinearField {
    pub fn new(mesh: &SurfaceMesh, n: u32, roots: Vec<[C64; 3]>, powers: &[u32]) -> Result<Self, FieldError> {
        let faces = roots
            .into_iter()
            .enumerate()
            .map(|(f, root)| {
                let coeffs = face_coefficients(root, mesh.local_coords(f)).ok_or(FieldError::DegenerateTriangle(f))?;
                Ok(FaceField { root, power: powers[f], coeffs })
            })
            .collect::<Result<_, FieldError>>()?;
        Ok(PowerLinearField { n, faces })
    }

    pub fn root_at(&self, f: usize, bary: [f64; 3]) -> C64 {
        let r = &self.faces[f].root;
        r[0] * bary[0] + r[1] * bary[1] + r[2] * bary[2]
    }

    /// The power vector (root^p) at a barycentric point.
    pub fn power_value(&self, f: usize, bary: [f64; 3]) -> C64 {
        self.root_at(f, bary).powu(self.faces[f].power)
    }

    pub fn power_value_local(&self, f: usize, z: C64) -> C64 {
        let [a, b, c] = self.faces[f].coeffs;
        (a * z + b * z.conj() + c).powu(self.faces[f].power)
    }

    /// Direction `branch` of the N-field at a barycentric point.
    pub fn evaluate(&self, f: usize, bary: [f64; 3], branch: u32) -> Result<C64, FieldError> {
        let u = self.power_value(f, bary);
        if self.n == 1 {
            return Ok(u);
        }
        if u == C64::new(0.0, 0.0) {
            return Err(FieldError::ZeroAtFractionalPower);
        }
        Ok(principal_root(u, self.n) * C64::from_polar(1.0, 2.0 * PI * branch as f64 / self.n as f64))
    }

    /// All N directions at a point.
    pub fn branches(&self, f: usize, bary: [f64; 3]) -> Result<Vec<C64>, FieldError> {
        (0..self.n).map(|k| self.evaluate(f, bary, k)).collect()
    }

    /// Gradient of the principal direction's phase at local point `z` of face `f`.
    pub fn phase_gradient(&self, f: usize, z: C64) -> Result<[f64; 2], FieldError> {
        let [a, b, c] = self.faces[f].coeffs;
        let g = phase_gradient(a, b, c, z)?;
        let k = self.faces[f].power as f64 / self.n as f64;
        Ok([k * g[0], k * g[1]])
    }

    /// Root-field zero of face `f`.
    pub fn zero(&self, f: usize) -> ZeroSet {
        let [a, b, c] = self.faces[f].coeffs;
        locate_singularity(a, b, c)
    }

    pub fn classify(&self, f: usize) -> Classification {
        let [a, b, _] = self.faces[f].coeffs;
        classify(a, b)
    }

    pub fn export(&self) -> FieldExport {
        FieldExport {
            n: self.n,
            faces: self
                .faces
                .iter()
                .map(|f| FaceExport { corners: f.root.map(|c| [c.re, c.im]), exponent: f.power, n: self.n })
                .collect(),
        }
    }

    pub fn from_export(mesh: &SurfaceMesh, e: &FieldExport) -> Result<Self, FieldError> {
        let roots = e.faces.iter().map(|f| f.corners.map(|[re, im]| C64::new(re, im))).collect();
        let powers: Vec<u32> = e.faces.iter().map(|f| f.exponent).collect();
        PowerLinearField::new(mesh, e.n, roots, &powers)
    }

    /// CSV rows `face,b0,b1,b2,re0,im0,...` with one (re, im) pair per branch.
    pub fn sample_csv(&self, samples: &[(usize, [f64; 3])]) -> String {
        let mut out = String::from("face,b0,b1,b2");
        for k in 0..self.n {
            let _ = write!(out, ",re{k},im{k}");
        }
        out.push('\n');
        for &(f, b) in samples {
            let _ = write!(out, "{f},{},{},{}", b[0], b[1], b[2]);
            for k in 0..self.n {
                let v = self.evaluate(f, b, k).unwrap_or(C64::new(0.0, 0.0));
                let _ = write!(out, ",{},{}", v.re, v.im);
            }
            out.push('\n');
        }
        out
    }
}

/// Serialized field: root corner values per face, the face's exponent and N.
/// The direction field is the N-th roots of (Σ bᵢ·cornerᵢ)^exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldExport {
    #[serde(rename = "N")]
    pub n: u32,
    pub faces: Vec<FaceExport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaceExport {
    pub corners: [[f64; 2]; 3],
    pub exponent: u32,
    #[serde(rename = "N")]
    pub n: u32,
}

/// Gradient of arg(a·z + b·z̄ + c) along the local x and y axes.
pub fn phase_gradient(a: C64, b: C64, c: C64, z: C64) -> Result<[f64; 2], FieldError> {
    let u = a * z + b * z.conj() + c;
    let m = u.norm_sqr();
    if m == 0.0 {
        return Err(FieldError::AtSingularity);
    }
    let uc = u.conj();
    Ok([((a + b) * uc).im / m, ((a - b) * uc).re / m])
}

/// Sample points: barycentric grid with `per_edge` subdivisions in every face.
pub fn sample_points(mesh: &SurfaceMesh, per_edge: usize) -> Vec<(usize, [f64; 3])> {
    let k = per_edge.max(1);
    let mut out = Vec::new();
    for f in 0..mesh.n_faces() {
        for i in 0..k {
            for j in 0..k - i {
                // interior points of the subdivided simplex, offset by a third
                let b0 = (i as f64 + 1.0 / 3.0) / k as f64;
                let b1 = (j as f64 + 1.0 / 3.0) / k as f64;
                out.push((f, [b0, b1, 1.0 - b0 - b1]));
            }
        }
    }
    out
}

/// Per-face-averaged phase Dirichlet energy θᵀQθ/|F|.
pub fn dirichlet_energy(theta: &[f64], q: &SparseMatrix, n_faces: usize) -> f64 {
    crate::sparse::dot(theta, &q.mul_vec(theta)) / n_faces as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn tri() -> [C64; 3] {
        [C64::new(0.0, 0.0), C64::new(1.3, 0.1), C64::new(0.4, 0.9)]
    }

    #[test]
    fn coefficients_examples() {
        let z = tri();
        let k = C64::new(0.5, -2.0);
        let [a, b, c] = face_coefficients([k; 3], z).unwrap();
        assert!(a.norm() < 1e-14 && b.norm() < 1e-14 && (c - k).norm() < 1e-14);
        let [a, b, c] = face_coefficients(z, z).unwrap();
        assert!((a - 1.0).norm() < 1e-14 && b.norm() < 1e-14 && c.norm() < 1e-14);
        let [a, b, c] = face_coefficients(z.map(|v| v.conj()), z).unwrap();
        assert!(a.norm() < 1e-14 && (b - 1.0).norm() < 1e-14 && c.norm() < 1e-14);
        assert!(face_coefficients([k; 3], [z[0], z[1], z[1] * 2.0]).is_none());
    }

    #[test]
    fn blend_matches_coefficients() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let z = tri();
        for _ in 0..100 {
            let u = [0; 3].map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let [a, b, c] = face_coefficients(u, z).unwrap();
            let w: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
            let s: f64 = w.iter().sum();
            let bary = w.map(|x| x / s);
            let p = z[0] * bary[0] + z[1] * bary[1] + z[2] * bary[2];
            let blend = u[0] * bary[0] + u[1] * bary[1] + u[2] * bary[2];
            assert!((a * p + b * p.conj() + c - blend).norm() < 1e-10);
        }
    }

    #[test]
    fn classification() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let e = classify(one, zero);
        assert_eq!(e.kind, FieldKind::Elliptic);
        assert_eq!(e.det, 1.0);
        let h = classify(zero, one);
        assert_eq!(h.kind, FieldKind::Hyperbolic);
        assert_eq!(h.det, -1.0);
        assert_eq!(classify(one, one).kind, FieldKind::Parabolic);
    }

    #[test]
    fn zero_sets() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        assert_eq!(locate_singularity(one, zero, -one), ZeroSet::Point(one));
        assert_eq!(locate_singularity(zero, zero, C64::new(5.0, 0.0)), ZeroSet::None);
        match locate_singularity(one, one, zero) {
            ZeroSet::Line { origin, direction } => {
                assert!(origin.norm() < 1e-15);
                assert!(direction.re.abs() < 1e-15 && (direction.im.abs() - 1.0).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(locate_singularity(one, one, C64::new(0.0, 1.0)), ZeroSet::None);
        let (a, b) = (C64::new(0.3, 1.0), C64::new(0.2, -0.4));
        let s = C64::new(-0.7, 0.25);
        let c = -(a * s + b * s.conj());
        match locate_singularity(a, b, c) {
            ZeroSet::Point(p) => assert!((p - s).norm() < 1e-14),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gradient_examples() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let g = phase_gradient(one, zero, zero, one).unwrap();
        assert_relative_eq!(g[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(g[1], 1.0, epsilon = 1e-15);
        let g = phase_gradient(one, zero, zero, C64::new(0.0, 2.0)).unwrap();
        assert_relative_eq!(g[0], -0.5, epsilon = 1e-15);
        assert_relative_eq!(g[1], 0.0, epsilon = 1e-15);
        assert!(phase_gradient(one, zero, zero, zero).is_err());
    }

    #[test]
    fn gradient_finite_differences() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2);
        for _ in 0..200 {
            let [a, b, c] = [0; 3].map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let z = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let u = |z: C64| a * z + b * z.conj() + c;
            if u(z).norm() < 0.05 {
                continue;
            }
            let h = 1e-6;
            let d = |dz: C64| ((u(z + dz) / u(z - dz)).arg()) / (2.0 * h);
            let g = phase_gradient(a, b, c, z).unwrap();
            assert!((g[0] - d(C64::new(h, 0.0))).abs() < 1e-6 * (1.0 + g[0].abs()));
            assert!((g[1] - d(C64::new(0.0, h))).abs() < 1e-6 * (1.0 + g[1].abs()));
        }
    }

    fn single(root: [C64; 3], power: u32, n: u32) -> (SurfaceMesh, PowerLinearField) {
        let m = SurfaceMesh::new(vec![[-1.0, -1.0, 0.0], [2.0, -1.0, 0.0], [-1.0, 2.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        let f = PowerLinearField::new(&m, n, vec![root], &[power]).unwrap();
        (m, f)
    }

    #[test]
    fn evaluation_examples() {
        let one = C64::new(1.0, 0.0);
        let (_, f) = single([one; 3], 1, 1);
        assert_eq!(f.evaluate(0, [0.2, 0.3, 0.5], 0).unwrap(), one);
        // root field equal to the world position (the local frame is a rotation/translation)
        let (m, f) = single([one; 3], 1, 1);
        let z = m.local_coords(0);
        let (_, g) = single(z, 2, 1);
        let b = [0.2, 0.3, 0.5];
        let p = m.bary_to_local(0, b);
        assert!((g.evaluate(0, b, 0).unwrap() - p * p).norm() < 1e-12);
        assert!((g.power_value_local(0, p) - p * p).norm() < 1e-12);
        drop(f);
        let (_, h) = single([C64::new(0.3, 0.4), C64::new(-1.0, 0.2), C64::new(0.1, -0.9)], 1, 4);
        let br = h.branches(0, b).unwrap();
        for k in 0..4 {
            assert!((br[(k + 1) % 4] - br[k] * C64::i()).norm() < 1e-14);
        }
        let a = br[0].arg();
        assert!(a > -PI / 4.0 && a <= PI / 4.0);
    }

    #[test]
    fn export_round_trip() {
        let (m, f) = single([C64::new(0.3, 0.4), C64::new(-1.0, 0.2), C64::new(0.1, -0.9)], 3, 2);
        let text = serde_json::to_string(&f.export()).unwrap();
        let back: FieldExport = serde_json::from_str(&text).unwrap();
        assert_eq!(PowerLinearField::from_export(&m, &back).unwrap(), f);
        let csv = f.sample_csv(&sample_points(&m, 2));
        assert_eq!(csv.lines().next().unwrap(), "face,b0,b1,b2,re0,im0,re1,im1");
        assert_eq!(csv.lines().count(), 1 + 3);
    }

    #[test]
    fn energy_scales_quadratically() {
        let q = SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)]);
        assert_eq!(dirichlet_energy(&[0.0, 0.0], &q, 3), 0.0);
        let e1 = dirichlet_energy(&[0.3, -0.8], &q, 3);
        assert_relative_eq!(dirichlet_energy(&[0.6, -1.6], &q, 3), 4.0 * e1, max_relative = 1e-14);
    }
}
