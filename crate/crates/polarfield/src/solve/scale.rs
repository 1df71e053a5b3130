//! Scale constraints reproducing face and edge singularities, and the scale solve.

use crate::bevel::BeveledMesh;
use crate::mesh::SurfaceMesh;
use crate::prescribe::{Location, Prescription, PrescriptionError};
use crate::qp::{BoundedQp, QpError, QpOptions, QpSolution};
use crate::sparse::SparseMatrix;
use serde::Serialize;
use std::f64::consts::PI;

#[derive(Debug, thiserror::Error)]
pub enum ScaleError {
    #[error("edge {edge}: no singular phase fits the solved moments (range [{lo:.6}, {hi:.6}])")]
    EmptyFeasibleRange { edge: usize, lo: f64, hi: f64 },
    #[error("face {face}: scale kernel {kernel:?} has mixed signs")]
    MixedSignKernel { face: usize, kernel: [f64; 3] },
    #[error(transparent)]
    Prescription(#[from] PrescriptionError),
}

/// Phases (power-field units) at the corners of a singular edge's flap and at the
/// singular point on both sides, rooted at ψ_k = 0 in face f.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PartEdge {
    pub edge: usize,
    pub t: f64,
    pub index: i64,
    pub psi_kf: f64,
    pub psi_if: f64,
    pub psi_kg: f64,
    pub psi_ig: f64,
    pub psi_sf: f64,
    pub psi_sg: f64,
    pub range: [f64; 2],
}

impl PartEdge {
    pub fn theta_sk_f(&self) -> f64 {
        self.psi_kf - self.psi_sf
    }

    pub fn theta_is_f(&self) -> f64 {
        self.psi_sf - self.psi_if
    }

    pub fn theta_ks_g(&self) -> f64 {
        self.psi_sg - self.psi_kg
    }

    pub fn theta_si_g(&self) -> f64 {
        self.psi_ig - self.psi_sg
    }

    /// The two half-cycle sums around the singular point (k side, i side); both equal πI.
    pub fn half_cycles(&self, theta_ja: f64, theta_jb: f64) -> [f64; 2] {
        [
            self.theta_sk_f() + theta_ja + self.theta_ks_g(),
            self.theta_si_g() - theta_jb + self.theta_is_f(),
        ]
    }
}

fn interval(a: f64, b: f64) -> [f64; 2] {
    [a.min(b), a.max(b)]
}

pub fn part_edge_phases(mesh: &SurfaceMesh, bm: &BeveledMesh, theta: &[f64], e: usize, t: f64, index: i64) -> Result<PartEdge, ScaleError> {
    let flap = mesh.flatten_flap(e).map_err(|_| PrescriptionError::BoundaryElement(format!("edge {e}")))?;
    let [ja, _] = bm.jumps(e).expect("interior edge");
    let psi_kf = 0.0;
    let psi_if = theta[flap.h];
    let psi_kg = theta[ja];
    let psi_ig = psi_kg - theta[flap.h_twin];
    let half = PI * index as f64;
    let f_range = interval(psi_kf, psi_if);
    let g_range = interval(psi_kg - half, psi_ig - half);
    let lo = f_range[0].max(g_range[0]);
    let hi = f_range[1].min(g_range[1]);
    if !(hi - lo > 1e-9) {
        return Err(ScaleError::EmptyFeasibleRange { edge: e, lo, hi });
    }
    let psi_sf = 0.5 * (lo + hi);
    Ok(PartEdge { edge: e, t, index, psi_kf, psi_if, psi_kg, psi_ig, psi_sf, psi_sg: psi_sf + half, range: [lo, hi] })
}

/// Corner magnitudes of the root field (max entry 1) placing its zero at `bary`, given
/// the face's split moments and power; returned as power-field scales.
pub fn face_scale_targets(theta: &[f64], f: usize, bary: [f64; 3], power: u32) -> Result<[f64; 3], ScaleError> {
    let p = power as f64;
    let psi = [0.0, theta[3 * f] / p, (theta[3 * f] + theta[3 * f + 1]) / p];
    let re = [0, 1, 2].map(|c| bary[c] * psi[c].cos());
    let im = [0, 1, 2].map(|c| bary[c] * psi[c].sin());
    let mut k = [re[1] * im[2] - re[2] * im[1], re[2] * im[0] - re[0] * im[2], re[0] * im[1] - re[1] * im[0]];
    if k.iter().all(|&v| v < 0.0) {
        k = k.map(|v| -v);
    }
    if !k.iter().all(|&v| v > 0.0) {
        return Err(ScaleError::MixedSignKernel { face: f, kernel: k });
    }
    let m = k.iter().cloned().fold(0.0, f64::max);
    Ok(k.map(|v| (v / m).powf(p)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSource {
    Face(usize),
    Edge(usize),
    Alignment(usize),
}

/// σ_a·σ^b − σ_b·σ^a = 0.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScaleRow {
    pub a: usize,
    pub b: usize,
    pub target_a: f64,
    pub target_b: f64,
    pub source: RowSource,
}

#[derive(Clone, Debug, Default)]
pub struct ScaleConstraints {
    pub rows: Vec<ScaleRow>,
}

impl ScaleConstraints {
    pub fn push(&mut self, a: usize, b: usize, ta: f64, tb: f64, source: RowSource) {
        let m = ta.max(tb);
        self.rows.push(ScaleRow { a, b, target_a: ta / m, target_b: tb / m, source });
    }

    pub fn matrix(&self, n_corners: usize) -> SparseMatrix {
        let mut t = Vec::with_capacity(2 * self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            t.push((r, row.a, row.target_b));
            t.push((r, row.b, -row.target_a));
        }
        SparseMatrix::from_triplets(self.rows.len(), n_corners, &t)
    }

    pub fn residual(&self, sigma: &[f64]) -> f64 {
        self.rows.iter().map(|r| (sigma[r.a] * r.target_b - sigma[r.b] * r.target_a).abs()).fold(0.0, f64::max)
    }
}

/// Ratio targets for the two corners of one side of a split edge: the root-field blend
/// `(1−t)·u_k + t·u_i` must have phase ψ_s, given the phase offsets s→k and s→i.
pub fn edge_side_targets(t: f64, theta_sk: f64, theta_si: f64, power: u32) -> [f64; 2] {
    let p = power as f64;
    let rk = -t * (theta_si / p).sin();
    let ri = (1.0 - t) * (theta_sk / p).sin();
    [rk.abs().powf(p), ri.abs().powf(p)]
}

/// Rows for a split point at parameter `t` (from k) on the edge of the flap, with phase
/// ψ_s on each side.
pub fn split_point_rows(
    out: &mut ScaleConstraints,
    mesh: &SurfaceMesh,
    e: usize,
    t: f64,
    pe: &PartEdge,
    powers: &[u32],
    source: RowSource,
) {
    let flap = mesh.flatten_flap(e).expect("interior edge");
    let [vi, _, vk, _] = flap.vertices;
    let corner = |f: usize, v: usize| mesh.corner(f, v).expect("vertex of face");
    let [sk, si] = edge_side_targets(t, pe.theta_sk_f(), -pe.theta_is_f(), powers[flap.f]);
    out.push(corner(flap.f, vk), corner(flap.f, vi), sk, si, source);
    let [sk, si] = edge_side_targets(t, -pe.theta_ks_g(), pe.theta_si_g(), powers[flap.g]);
    out.push(corner(flap.g, vk), corner(flap.g, vi), sk, si, source);
}

pub fn assemble_scale_constraints(
    p: &Prescription,
    mesh: &SurfaceMesh,
    bm: &BeveledMesh,
    theta: &[f64],
    powers: &[u32],
) -> Result<(ScaleConstraints, Vec<PartEdge>), ScaleError> {
    let mut out = ScaleConstraints::default();
    let mut parts = Vec::new();
    for s in &p.singularities {
        match s.location()? {
            Location::Vertex(_) => {}
            Location::Face { face, bary } => {
                let k = face_scale_targets(theta, face, bary, powers[face])?;
                out.push(3 * face, 3 * face + 1, k[0], k[1], RowSource::Face(face));
                out.push(3 * face + 1, 3 * face + 2, k[1], k[2], RowSource::Face(face));
            }
            Location::Edge { edge, t } => {
                let pe = part_edge_phases(mesh, bm, theta, edge, t, s.index)?;
                split_point_rows(&mut out, mesh, edge, t, &pe, powers, RowSource::Edge(edge));
                parts.push(pe);
            }
        }
    }
    Ok((out, parts))
}

/// One pinned corner per component: the first corner not touched by a scale row.
pub fn scale_pins(bm: &BeveledMesh, c: &ScaleConstraints) -> Vec<usize> {
    let mut touched = vec![false; bm.n_corners()];
    for r in &c.rows {
        touched[r.a] = true;
        touched[r.b] = true;
    }
    let mut pin: Vec<Option<usize>> = vec![None; bm.n_components()];
    for corner in 0..bm.n_corners() {
        let comp = bm.component(corner / 3);
        match pin[comp] {
            None => pin[comp] = Some(corner),
            Some(old) if touched[old] && !touched[corner] => pin[comp] = Some(corner),
            _ => {}
        }
    }
    pin.into_iter().flatten().collect()
}

#[derive(Clone, Debug)]
pub struct SigmaSolution {
    pub sigma: Vec<f64>,
    pub qp: QpSolution,
    /// σᵀLσ.
    pub dirichlet: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    pub pins: Vec<usize>,
}

/// Minimizes σᵀLσ (plus a small pull toward 1) subject to the scale rows, one corner
/// per component pinned to 1, and σ ≥ ε.
pub fn solve_sigma(
    l: &SparseMatrix,
    c: &ScaleConstraints,
    pins: &[usize],
    eps: f64,
    proximal: f64,
    opts: QpOptions,
) -> Result<SigmaSolution, QpError> {
    let n = l.nrows();
    let mean_diag = (0..n).map(|i| l.get(i, i)).sum::<f64>() / n.max(1) as f64;
    let delta = proximal * mean_diag.max(1e-300);
    let p = l.add(&SparseMatrix::diagonal(&vec![delta; n])).scale(2.0);
    let q = vec![-2.0 * delta; n];
    let cm = c.matrix(n);
    let mut t = cm.triplets();
    t.extend(pins.iter().enumerate().map(|(r, &i)| (c.rows.len() + r, i, 1.0)));
    let a = SparseMatrix::from_triplets(c.rows.len() + pins.len(), n, &t);
    let mut b = vec![0.0; c.rows.len()];
    b.extend(pins.iter().map(|_| 1.0));
    let lower = vec![eps; n];
    let prob = BoundedQp { p: &p, q: &q, a: &a, b: &b, lower: &lower };
    let sol = prob.solve(opts)?;
    let (stationarity, _, complementarity) = prob.kkt_residuals(&sol);
    let sigma = sol.x.clone();
    Ok(SigmaSolution {
        dirichlet: crate::sparse::dot(&sigma, &l.mul_vec(&sigma)),
        sigma,
        qp: sol,
        stationarity,
        complementarity,
        pins: pins.to_vec(),
    })
}
