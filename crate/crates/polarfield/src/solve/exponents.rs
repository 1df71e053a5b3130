//! Per-face power exponents: fixed where singularities or large phase moments demand
//! them, harmonically interpolated elsewhere, then rounded.

use crate::discretize::build_index_laplacian;
use crate::mesh::SurfaceMesh;
use crate::prescribe::{element_faces, Prescription, PrescriptionError, SingularityType};
use crate::sparse::{LinalgError, SparseMatrix, SpdSolver};
use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct ExponentField {
    pub power: Vec<u32>,
    pub fixed: Vec<bool>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExponentError {
    #[error(transparent)]
    Prescription(#[from] PrescriptionError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Smallest exponent keeping every split moment of the face strictly below π after division.
pub fn minimal_power(theta: &[f64], f: usize) -> u32 {
    let m = (0..3).map(|k| theta[3 * f + k].abs()).fold(0.0, f64::max);
    if m >= PI {
        (m / PI).floor() as u32 + 1
    } else {
        1
    }
}

pub fn interpolate_exponents(mesh: &SurfaceMesh, p: &Prescription, theta: &[f64]) -> Result<ExponentField, ExponentError> {
    let nf = mesh.n_faces();
    let mut value: Vec<Option<f64>> = vec![None; nf];
    fn fix(value: &mut [Option<f64>], f: usize, v: f64) {
        value[f] = Some(value[f].map_or(v, |old| old.max(v)));
    }
    for s in &p.singularities {
        let mag = s.index.unsigned_abs() as f64;
        let faces = match s.kind {
            SingularityType::Face => vec![s.element],
            _ => element_faces(mesh, &s.location()?),
        };
        for f in faces {
            fix(&mut value, f, mag);
        }
    }
    for f in 0..nf {
        let m = minimal_power(theta, f);
        if m > 1 || value[f].is_some() {
            fix(&mut value, f, m as f64);
        }
    }
    let fixed: Vec<bool> = value.iter().map(|v| v.is_some()).collect();

    // components without any fixed face default to 1
    let (labels, ncomp) = mesh.face_components();
    let mut has_fixed = vec![false; ncomp];
    for f in 0..nf {
        has_fixed[labels[f]] |= fixed[f];
    }
    let mut known: Vec<Option<f64>> = value.clone();
    for f in 0..nf {
        if !has_fixed[labels[f]] {
            known[f] = Some(1.0);
        }
    }
    let free: Vec<usize> = (0..nf).filter(|&f| known[f].is_none()).collect();
    let mut result: Vec<f64> = known.iter().map(|v| v.unwrap_or(0.0)).collect();
    if !free.is_empty() {
        let l2 = build_index_laplacian(mesh);
        let mut slot = vec![usize::MAX; nf];
        for (i, &f) in free.iter().enumerate() {
            slot[f] = i;
        }
        let mut t = Vec::new();
        let mut rhs = vec![0.0; free.len()];
        for (r, c, v) in l2.triplets() {
            if slot[r] == usize::MAX {
                continue;
            }
            match known[c] {
                Some(k) => rhs[slot[r]] -= v * k,
                None => t.push((slot[r], slot[c], v)),
            }
        }
        let a = SparseMatrix::from_triplets(free.len(), free.len(), &t);
        let x = SpdSolver::new(&a)?.solve(&rhs)?;
        for (i, &f) in free.iter().enumerate() {
            result[f] = x[i];
        }
    }
    let power = result.iter().map(|v| v.round().max(1.0) as u32).collect();
    Ok(ExponentField { power, fixed })
}
