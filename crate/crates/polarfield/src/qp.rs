//! Convex quadratic programs with linear equalities and elementwise lower bounds:
//! minimize ½xᵀPx + qᵀx subject to Ax = b, x ≥ l.

use crate::sparse::{inf_norm, saddle_matrix, LinalgError, LuSolver, SparseMatrix};
use serde::Serialize;

pub struct BoundedQp<'a> {
    pub p: &'a SparseMatrix,
    pub q: &'a [f64],
    pub a: &'a SparseMatrix,
    pub b: &'a [f64],
    pub lower: &'a [f64],
}

#[derive(Clone, Copy, Debug)]
pub struct QpOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpOptions {
    fn default() -> Self {
        QpOptions { tol: 1e-7, max_iter: 500 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QpMethod {
    /// Bounds were inactive at the equality-constrained minimizer.
    Equality,
    InteriorPoint,
    /// Interior point followed by an exact solve on the detected active set.
    Polished,
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub x: Vec<f64>,
    /// Multipliers of Ax = b (stationarity: Px + q − Aᵀy − z = 0).
    pub y: Vec<f64>,
    /// Bound multipliers, z ≥ 0.
    pub z: Vec<f64>,
    pub iterations: usize,
    pub method: QpMethod,
    pub active: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum QpError {
    #[error("equality constraints are inconsistent (residual {0:.3e})")]
    Infeasible(f64),
    #[error("interior point did not converge in {iterations} iterations (primal {primal:.3e}, dual {dual:.3e}, gap {gap:.3e})")]
    NonConvergence { iterations: usize, primal: f64, dual: f64, gap: f64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

impl BoundedQp<'_> {
    pub fn objective(&self, x: &[f64]) -> f64 {
        let px = self.p.mul_vec(x);
        x.iter().zip(&px).zip(self.q).map(|((x, p), q)| 0.5 * x * p + q * x).sum()
    }

    fn dual_residual(&self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let px = self.p.mul_vec(x);
        let aty = self.a.transpose_mul_vec(y);
        (0..x.len()).map(|i| px[i] + self.q[i] - aty[i] - z[i]).collect()
    }

    fn primal_residual(&self, x: &[f64]) -> Vec<f64> {
        self.a.mul_vec(x).iter().zip(self.b).map(|(a, b)| a - b).collect()
    }

    /// Stationarity, feasibility and complementarity residuals of a candidate.
    pub fn kkt_residuals(&self, s: &QpSolution) -> (f64, f64, f64) {
        let gap = s.x.iter().zip(self.lower).zip(&s.z).map(|((x, l), z)| ((x - l) * z).abs()).fold(0.0, f64::max);
        (inf_norm(&self.dual_residual(&s.x, &s.y, &s.z)), inf_norm(&self.primal_residual(&s.x)), gap)
    }

    fn equality_solve(&self, extra: &[usize]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), LinalgError> {
        let n = self.p.nrows();
        let m = self.a.nrows();
        let mut t = self.a.triplets();
        t.extend(extra.iter().enumerate().map(|(r, &i)| (m + r, i, 1.0)));
        let a = SparseMatrix::from_triplets(m + extra.len(), n, &t);
        let mut rhs: Vec<f64> = self.q.iter().map(|q| -q).collect();
        rhs.extend_from_slice(self.b);
        rhs.extend(extra.iter().map(|&i| self.lower[i]));
        let sol = LuSolver::new(&saddle_matrix(self.p, &a, 0.0))?.solve(&rhs)?;
        // saddle multipliers μ satisfy Px + q + Aᵀμ = 0
        let y = sol[n..n + m].iter().map(|v| -v).collect();
        let mut z = vec![0.0; n];
        for (r, &i) in extra.iter().enumerate() {
            z[i] = -sol[n + m + r];
        }
        Ok((sol[..n].to_vec(), y, z))
    }

    pub fn solve(&self, opts: QpOptions) -> Result<QpSolution, QpError> {
        let n = self.p.nrows();
        let scale_b = 1.0 + inf_norm(self.b);
        let (x0, y0, _) = self.equality_solve(&[])?;
        let feas = inf_norm(&self.primal_residual(&x0));
        if !(feas <= 1e-6 * scale_b) {
            return Err(QpError::Infeasible(feas));
        }
        if x0.iter().zip(self.lower).all(|(x, l)| x >= l) {
            return Ok(QpSolution { x: x0, y: y0, z: vec![0.0; n], iterations: 0, method: QpMethod::Equality, active: 0 });
        }
        let ipm = self.interior_point(&x0, &y0, opts)?;
        Ok(self.polish(ipm, opts))
    }

    fn interior_point(&self, x0: &[f64], y0: &[f64], opts: QpOptions) -> Result<QpSolution, QpError> {
        let n = self.p.nrows();
        let m = self.a.nrows();
        let spread = 1.0 + inf_norm(x0);
        let mut s: Vec<f64> = (0..n).map(|i| (x0[i] - self.lower[i]).max(0.1 * spread)).collect();
        let mut z = vec![1.0; n];
        let mut y = y0.to_vec();
        let scale_q = 1.0 + inf_norm(self.q);
        let scale_b = 1.0 + inf_norm(self.b);
        let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for it in 0..opts.max_iter {
            let x: Vec<f64> = (0..n).map(|i| self.lower[i] + s[i]).collect();
            let rd = self.dual_residual(&x, &y, &z);
            let rp = self.primal_residual(&x);
            let mu = s.iter().zip(&z).map(|(s, z)| s * z).sum::<f64>() / n as f64;
            last = (inf_norm(&rp), inf_norm(&rd), mu);
            if last.0 <= 1e-3 * opts.tol * scale_b && last.1 <= opts.tol * scale_q && mu <= 1e-2 * opts.tol {
                return Ok(QpSolution { x, y, z, iterations: it, method: QpMethod::InteriorPoint, active: 0 });
            }
            let mut tr = self.p.triplets();
            tr.extend((0..n).map(|i| (i, i, z[i] / s[i])));
            let h = SparseMatrix::from_triplets(n, n, &tr);
            let lu = LuSolver::new(&saddle_matrix(&h, self.a, 0.0))?;
            let direction = |rc: &[f64]| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), LinalgError> {
                let mut rhs: Vec<f64> = (0..n).map(|i| -rd[i] + rc[i] / s[i]).collect();
                rhs.extend(rp.iter().map(|r| -r));
                let sol = lu.solve(&rhs)?;
                let dx = sol[..n].to_vec();
                let dy: Vec<f64> = sol[n..n + m].iter().map(|v| -v).collect();
                let dz = (0..n).map(|i| (rc[i] - z[i] * dx[i]) / s[i]).collect();
                Ok((dx, dy, dz))
            };
            let max_step = |v: &[f64], dv: &[f64]| -> f64 {
                v.iter().zip(dv).filter(|(_, d)| **d < 0.0).map(|(v, d)| -v / d).fold(1.0, f64::min)
            };
            let rc_aff: Vec<f64> = (0..n).map(|i| -s[i] * z[i]).collect();
            let (dxa, _, dza) = direction(&rc_aff)?;
            let (ap, ad) = (max_step(&s, &dxa), max_step(&z, &dza));
            let mu_aff = (0..n).map(|i| (s[i] + ap * dxa[i]) * (z[i] + ad * dza[i])).sum::<f64>() / n as f64;
            let centering = (mu_aff / mu).powi(3);
            let rc: Vec<f64> = (0..n).map(|i| -s[i] * z[i] - dxa[i] * dza[i] + centering * mu).collect();
            let (dx, dy, dz) = direction(&rc)?;
            let tau = (1.0 - mu).clamp(0.99, 0.9999);
            let ap = (tau * max_step(&s, &dx)).min(1.0);
            let ad = (tau * max_step(&z, &dz)).min(1.0);
            for i in 0..n {
                s[i] += ap * dx[i];
                z[i] += ad * dz[i];
            }
            for j in 0..m {
                y[j] += ad * dy[j];
            }
        }
        Err(QpError::NonConvergence { iterations: opts.max_iter, primal: last.0, dual: last.1, gap: last.2 })
    }

    /// Re-solves exactly with the bounds that the interior point found active.
    fn polish(&self, ipm: QpSolution, opts: QpOptions) -> QpSolution {
        let n = ipm.x.len();
        let active: Vec<usize> = (0..n).filter(|&i| ipm.x[i] - self.lower[i] < ipm.z[i]).collect();
        let Ok((x, y, z)) = self.equality_solve(&active) else { return ipm };
        let zscale = 1.0 + inf_norm(&ipm.z);
        let ok = x.iter().all(|v| v.is_finite())
            && (0..n).all(|i| x[i] >= self.lower[i] - 1e-12 * (1.0 + self.lower[i].abs()))
            && active.iter().all(|&i| z[i] >= -opts.tol * zscale)
            && self.objective(&x) <= self.objective(&ipm.x) + opts.tol * (1.0 + self.objective(&ipm.x).abs());
        if !ok {
            return ipm;
        }
        let x = x.iter().zip(self.lower).map(|(x, l)| x.max(*l)).collect();
        let z = z.iter().map(|z| z.max(0.0)).collect();
        QpSolution { x, y, z, iterations: ipm.iterations, method: QpMethod::Polished, active: active.len() }
    }
}
