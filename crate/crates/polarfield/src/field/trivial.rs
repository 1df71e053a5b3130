//! Trivial-connection baseline: the smallest rotation adjustment per dual edge that
//! realizes the prescribed vertex indices and loop holonomies.

use crate::bevel::{BeveledMesh, CycleOperators};
use crate::mesh::SurfaceMesh;
use crate::prescribe::{Prescription, PrescriptionError};
use crate::field::{FieldError, PowerLinearField};
use crate::solve::{build_field, cycle_system, integrate, interpolate_exponents, ExponentError};
use crate::sparse::{dot, inf_norm, LinalgError, SparseMatrix, SpdSolver};

#[derive(Debug, thiserror::Error)]
pub enum TrivialError {
    #[error("trivial connections need vertex-only prescriptions")]
    NotVertexOnly,
    #[error(transparent)]
    Prescription(#[from] PrescriptionError),
    #[error("cycle row {0} has no dual-edge support but a nonzero right-hand side")]
    Inconsistent(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl From<ExponentError> for TrivialError {
    fn from(e: ExponentError) -> Self {
        match e {
            ExponentError::Prescription(e) => TrivialError::Prescription(e),
            ExponentError::Linalg(e) => TrivialError::Linalg(e),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrivialConnection {
    /// Adjustment angle per mesh edge (zero on boundary edges).
    pub dual: Vec<f64>,
    /// The same angles on the beveled edges: both jumps of an edge carry its value.
    pub theta: Vec<f64>,
    /// Largest violation of the cycle rows.
    pub residual: f64,
}

impl TrivialConnection {
    /// θᵀQθ / |F| for the upsampled angles.
    pub fn energy(&self, q: &SparseMatrix, n_faces: usize) -> f64 {
        dot(&self.theta, &q.mul_vec(&self.theta)) / n_faces as f64
    }

    /// Unit-magnitude field integrated from these angles, with the usual exponent rule.
    pub fn field(&self, mesh: &SurfaceMesh, bm: &BeveledMesh, p: &Prescription) -> Result<PowerLinearField, TrivialError> {
        let sigma = vec![1.0; bm.n_corners()];
        let integ = integrate(bm, &self.theta, &bm.edge_connection(mesh), &sigma, p.n)?;
        let exponents = interpolate_exponents(mesh, p, &self.theta)?;
        Ok(build_field(mesh, p.n, &integ.corners, &self.theta, &exponents.power)?)
    }
}

/// Beveled-edge matrix taking per-edge angles to both jumps of each interior edge.
pub fn upsample(mesh: &SurfaceMesh, bm: &BeveledMesh) -> SparseMatrix {
    let mut t = Vec::new();
    for e in mesh.interior_edges() {
        for j in bm.jumps(e).expect("interior edge") {
            t.push((j, e, 1.0));
        }
    }
    SparseMatrix::from_triplets(bm.n_edges(), mesh.n_edges(), &t)
}

pub fn trivial_connections(
    mesh: &SurfaceMesh,
    bm: &BeveledMesh,
    ops: &CycleOperators,
    p: &Prescription,
) -> Result<TrivialConnection, TrivialError> {
    if !p.is_vertex_only() {
        return Err(TrivialError::NotVertexOnly);
    }
    let cycles = cycle_system(p, bm, ops)?;
    let up = upsample(mesh, bm);
    let a_full = cycles.matrix.matmul(&up);
    // rows of original and edge faces vanish after upsampling
    let rows: Vec<usize> = (0..a_full.nrows()).filter(|&r| a_full.row_nnz(r) > 0).collect();
    if let Some(r) = (0..a_full.nrows()).find(|&r| a_full.row_nnz(r) == 0 && cycles.rhs[r].abs() > 1e-12) {
        return Err(TrivialError::Inconsistent(r));
    }
    let a = a_full.select_rows(&rows);
    let rhs: Vec<f64> = rows.iter().map(|&r| cycles.rhs[r]).collect();
    let gram = a.matmul(&a.transpose());
    let mult = SpdSolver::new(&gram)?.solve(&rhs)?;
    let dual = a.transpose_mul_vec(&mult);
    let theta = up.mul_vec(&dual);
    let res: Vec<f64> = cycles.matrix.mul_vec(&theta).iter().zip(&cycles.rhs).map(|(x, b)| x - b).collect();
    Ok(TrivialConnection { dual, theta, residual: inf_norm(&res) })
}
