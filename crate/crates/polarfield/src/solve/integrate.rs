//! Global integration of phases and scales into corner values, and the per-face root
//! fields of power faces.

use crate::bevel::BeveledMesh;
use crate::sparse::{LinalgError, SparseMatrix, SpdSolver};
use crate::C64;

#[derive(Clone, Debug)]
pub struct Integration {
    /// Power-field value per corner, |u| = σ.
    pub corners: Vec<C64>,
    /// Largest |σ_a u_b − σ_b w u_a| / (σ_a σ_b) over beveled edges.
    pub residual: f64,
    pub pins: Vec<usize>,
}

/// Least-squares solve of σ_a u_b = σ_b e^{i(θ + N r)} u_a over all beveled edges, with
/// one corner per component fixed to σ (zero phase). Rows are divided by σ_a σ_b.
pub fn integrate(bm: &BeveledMesh, theta: &[f64], connection: &[f64], sigma: &[f64], n: u32) -> Result<Integration, LinalgError> {
    let nc = bm.n_corners();
    let mut pin_of = vec![None; bm.n_components()];
    for c in 0..nc {
        pin_of[bm.component(c / 3)].get_or_insert(c);
    }
    let pins: Vec<usize> = pin_of.into_iter().flatten().collect();
    let mut slot = vec![usize::MAX; nc];
    let mut free = 0;
    let mut pinned = vec![false; nc];
    for &p in &pins {
        pinned[p] = true;
    }
    for c in 0..nc {
        if !pinned[c] {
            slot[c] = free;
            free += 1;
        }
    }
    let rot: Vec<C64> = (0..bm.n_edges()).map(|e| C64::from_polar(1.0, theta[e] + n as f64 * connection[e])).collect();

    // unknowns v = u/σ; row: v_b − w·v_a = 0, split into real and imaginary rows
    let mut t = Vec::with_capacity(8 * bm.n_edges());
    let mut rhs = vec![0.0; 2 * bm.n_edges()];
    for e in 0..bm.n_edges() {
        let (a, b) = bm.endpoints(e);
        let w = rot[e];
        let (re, im) = (2 * e, 2 * e + 1);
        let mut add = |c: usize, coef: C64, rhs: &mut Vec<f64>| {
            if pinned[c] {
                // pinned value 1
                rhs[re] -= coef.re;
                rhs[im] -= coef.im;
            } else {
                let s = slot[c];
                t.push((re, 2 * s, coef.re));
                t.push((re, 2 * s + 1, -coef.im));
                t.push((im, 2 * s, coef.im));
                t.push((im, 2 * s + 1, coef.re));
            }
        };
        add(b, C64::new(1.0, 0.0), &mut rhs);
        add(a, -w, &mut rhs);
    }
    let a = SparseMatrix::from_triplets(2 * bm.n_edges(), 2 * free, &t);
    let normal = a.gram(&vec![1.0; a.nrows()]);
    let x = SpdSolver::new(&normal)?.solve(&a.transpose_mul_vec(&rhs))?;
    let v: Vec<C64> = (0..nc).map(|c| if pinned[c] { C64::new(1.0, 0.0) } else { C64::new(x[2 * slot[c]], x[2 * slot[c] + 1]) }).collect();
    let residual = (0..bm.n_edges())
        .map(|e| {
            let (a, b) = bm.endpoints(e);
            (v[b] - rot[e] * v[a]).norm()
        })
        .fold(0.0, f64::max);
    let corners = v.iter().zip(sigma).map(|(v, s)| v * s).collect();
    Ok(Integration { corners, residual, pins })
}

/// Root-field corner values of face `f`: magnitudes |u|^{1/p}, phases following the
/// face's split moments divided by p from the first corner.
pub fn root_corners(corners: &[C64], theta: &[f64], f: usize, power: u32) -> [C64; 3] {
    let u = [corners[3 * f], corners[3 * f + 1], corners[3 * f + 2]];
    if power == 1 {
        return u;
    }
    let p = power as f64;
    let base = u[0].arg();
    let phase = [base, base + theta[3 * f], base + theta[3 * f] + theta[3 * f + 1]];
    [0, 1, 2].map(|c| C64::from_polar(u[c].norm().powf(1.0 / p), phase[c] / p))
}
