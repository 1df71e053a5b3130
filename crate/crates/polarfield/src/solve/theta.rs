//! Cycle constraints on the phase 1-form and the constrained smoothness/isotropy solve.

use crate::bevel::{BeveledMesh, CycleOperators};
use crate::discretize::IsotropyOperator;
use crate::prescribe::{Location, Prescription, PrescriptionError};
use crate::sparse::{inf_norm, solve_equality_qp, LinalgError, SparseMatrix, SpdSolver};
use std::f64::consts::PI;

/// Stacked equality rows (d₁ minus one row per component, H, B) and right-hand sides.
#[derive(Clone, Debug)]
pub struct CycleSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    /// Beveled faces whose d₁ row was dropped as dependent.
    pub dropped: Vec<usize>,
    pub rhs_d1: Vec<f64>,
    pub rhs_h: Vec<f64>,
    pub rhs_b: Vec<f64>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CycleResiduals {
    pub d1: f64,
    pub h: f64,
    pub b: f64,
}

/// Prescribed index numerator per beveled face.
pub fn beveled_face_indices(p: &Prescription, bm: &BeveledMesh) -> Result<Vec<i64>, PrescriptionError> {
    let mut idx = vec![0i64; bm.n_faces()];
    for s in &p.singularities {
        let face = match s.location()? {
            Location::Vertex(v) => bm.vertex_face(v),
            Location::Edge { edge, .. } => bm.edge_face(edge),
            Location::Face { face, .. } => Some(face),
        };
        let face = face.ok_or_else(|| PrescriptionError::BoundaryElement(format!("{:?} {}", s.kind, s.element)))?;
        idx[face] += s.index;
    }
    Ok(idx)
}

pub fn cycle_system(p: &Prescription, bm: &BeveledMesh, ops: &CycleOperators) -> Result<CycleSystem, PrescriptionError> {
    let n = p.n as f64;
    let idx = beveled_face_indices(p, bm)?;
    let rhs_d1: Vec<f64> = idx.iter().zip(&ops.kappa_bar).map(|(&i, k)| 2.0 * PI * i as f64 - n * k).collect();
    let index_or_zero = |v: &[i64], i: usize| v.get(i).copied().unwrap_or(0) as f64;
    let rhs_h: Vec<f64> = (0..ops.h.nrows()).map(|i| 2.0 * PI * index_or_zero(&p.homology, i) - n * ops.kappa_h[i]).collect();
    let rhs_b: Vec<f64> = (0..ops.b.nrows()).map(|i| 2.0 * PI * index_or_zero(&p.boundary, i) - n * ops.kappa_b[i]).collect();

    let mut last = vec![None; bm.n_components()];
    for f in 0..bm.n_faces() {
        last[bm.component(f)] = Some(f);
    }
    let mut dropped: Vec<usize> = last.into_iter().flatten().collect();
    dropped.sort_unstable();
    let mut keep = vec![true; bm.n_faces()];
    for &f in &dropped {
        keep[f] = false;
    }
    let rows: Vec<usize> = (0..bm.n_faces()).filter(|&f| keep[f]).collect();
    let d1 = ops.d1.select_rows(&rows);
    let matrix = SparseMatrix::vstack(&[&d1, &ops.h, &ops.b]);
    let mut rhs: Vec<f64> = rows.iter().map(|&f| rhs_d1[f]).collect();
    rhs.extend_from_slice(&rhs_h);
    rhs.extend_from_slice(&rhs_b);
    Ok(CycleSystem { matrix, rhs, dropped, rhs_d1, rhs_h, rhs_b })
}

impl CycleSystem {
    /// Residuals over all rows, including the dropped ones.
    pub fn residuals(&self, ops: &CycleOperators, theta: &[f64]) -> CycleResiduals {
        let diff = |m: &SparseMatrix, r: &[f64]| -> f64 {
            let v = m.mul_vec(theta);
            v.iter().zip(r).fold(0.0, |acc, (a, b)| acc.max((a - b).abs()))
        };
        CycleResiduals { d1: diff(&ops.d1, &self.rhs_d1), h: diff(&ops.h, &self.rhs_h), b: diff(&ops.b, &self.rhs_b) }
    }
}

#[derive(Clone, Debug)]
pub struct ThetaSolution {
    pub theta: Vec<f64>,
    /// θᵀQθ.
    pub smoothness: f64,
    /// Weighted isotropy mismatch (without λ_S).
    pub isotropy: f64,
    /// Relative stationarity residual of the saddle system.
    pub kkt_residual: f64,
    pub proximal: f64,
}

/// Minimizes θᵀQθ + λ_S·isotropy(θ) subject to the cycle rows. A proximal term
/// `proximal · mean(diag) · |θ|²` selects one minimizer when the objective is flat
/// along feasible directions.
pub fn solve_theta(
    q: &SparseMatrix,
    iso: &IsotropyOperator,
    lambda_s: f64,
    cycles: &CycleSystem,
    proximal: f64,
) -> Result<ThetaSolution, LinalgError> {
    let n = q.nrows();
    let (gram, lin_iso) = iso.normal_parts();
    let g0 = q.add(&gram.scale(lambda_s));
    let mean_diag = (0..n).map(|i| g0.get(i, i)).sum::<f64>() / n.max(1) as f64;
    let delta = proximal * mean_diag;
    let g = g0.add(&SparseMatrix::diagonal(&vec![delta; n]));
    let lin: Vec<f64> = lin_iso.iter().map(|v| lambda_s * v).collect();
    let (mut theta, mult) = solve_equality_qp(&g, &lin, &cycles.matrix, &cycles.rhs)?;
    project_onto_cycles(cycles, &mut theta);
    let gx = g.mul_vec(&theta);
    let ctm = cycles.matrix.transpose_mul_vec(&mult);
    let stat: Vec<f64> = (0..n).map(|i| gx[i] + ctm[i] - lin[i]).collect();
    let kkt_residual = inf_norm(&stat) / (1.0 + inf_norm(&lin).max(inf_norm(&gx)));
    Ok(ThetaSolution {
        smoothness: crate::sparse::dot(&theta, &q.mul_vec(&theta)),
        isotropy: iso.energy(&theta),
        kkt_residual,
        proximal: delta,
        theta,
    })
}

/// Removes the leftover constraint violation with a least-norm correction. Kept rows
/// that are each tiny can still add up on the dropped row of a closed component.
fn project_onto_cycles(cycles: &CycleSystem, theta: &mut [f64]) {
    let c = &cycles.matrix;
    let Ok(gram) = SpdSolver::new(&c.matmul(&c.transpose())) else { return };
    for _ in 0..2 {
        let r: Vec<f64> = c.mul_vec(theta).iter().zip(&cycles.rhs).map(|(a, b)| b - a).collect();
        let Ok(y) = gram.solve(&r) else { return };
        for (t, d) in theta.iter_mut().zip(c.transpose_mul_vec(&y)) {
            *t += d;
        }
    }
}
