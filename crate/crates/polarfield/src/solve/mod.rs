//! The design pipeline: phases, exponents, scale constraints, scales, integration.

pub mod exponents;
pub mod integrate;
pub mod scale;
pub mod align;
pub mod theta;

use crate::bevel::{bevel_with_operators, BevelError, BeveledMesh, CycleOperators};
use crate::discretize::{build_d, build_ds_ms, build_l, FlapOperator};
use crate::field::{FieldError, PowerLinearField};
#[cfg(test)]
use crate::field::{edge_loop, face_loop, location_loop, vertex_loop, winding_number, ZeroSet};
use crate::mesh::SurfaceMesh;
use crate::prescribe::{assemble_targets, validate, IsotropyTargets, Location, Prescription, PrescriptionError, ValidateOptions};
use crate::qp::{QpError, QpMethod, QpOptions};
use crate::sparse::{LinalgError, SparseMatrix};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;

pub use align::{
    alignment_rows, chords, intersect_curve, solve_alignment, tangent_errors, AlignError, Alignment, AlignmentCurve, Chord,
    Crossing, CurvePath, CurvePoint,
};
pub use exponents::{interpolate_exponents, ExponentError, ExponentField};
pub use integrate::{integrate, root_corners, Integration};
pub use scale::{
    assemble_scale_constraints, face_scale_targets, part_edge_phases, scale_pins, solve_sigma, PartEdge, RowSource,
    ScaleConstraints, ScaleError, SigmaSolution,
};
pub use theta::{cycle_system, solve_theta, CycleResiduals, CycleSystem, ThetaSolution};

#[derive(Clone, Copy, Debug)]
pub struct SolveParams {
    pub lambda_j: f64,
    pub lambda_s: f64,
    pub eps: f64,
    /// Relative weight of the minimum-norm tie-breaking term in the σ and alignment solves.
    pub proximal: f64,
    /// Same for the θ solve. The smoothness energy is nearly flat along large-amplitude
    /// directions, so a tiny weight lets θ wander and drives the face exponents up.
    pub theta_proximal: f64,
    pub qp: QpOptions,
    /// Thread count recorded in the report.
    pub threads: usize,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams { lambda_j: 50.0, lambda_s: 50.0, eps: 1e-6, proximal: 1e-9, theta_proximal: 1e-5, qp: QpOptions::default(), threads: 1 }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    Prescription(#[from] PrescriptionError),
    #[error(transparent)]
    Bevel(#[from] BevelError),
    #[error("{stage}: {source}")]
    Linalg { stage: &'static str, source: LinalgError },
    #[error(transparent)]
    Scale(#[from] ScaleError),
    #[error("scale solve: {0}")]
    Qp(#[from] QpError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("alignment: {0}")]
    Alignment(#[from] AlignError),
}

impl SolveError {
    /// Stable name of the error kind, for reports.
    pub fn name(&self) -> &'static str {
        match self {
            SolveError::Prescription(e) => e.name(),
            SolveError::Bevel(_) => "InconsistentLift",
            SolveError::Linalg { .. } => "SolveFailure",
            SolveError::Scale(ScaleError::EmptyFeasibleRange { .. }) => "EmptyFeasibleRange",
            SolveError::Scale(ScaleError::MixedSignKernel { .. }) => "MixedSignKernel",
            SolveError::Scale(ScaleError::Prescription(e)) => e.name(),
            SolveError::Qp(QpError::Infeasible(_)) => "Infeasible",
            SolveError::Qp(QpError::NonConvergence { .. }) => "NonConvergence",
            SolveError::Qp(QpError::Linalg(_)) => "SolveFailure",
            SolveError::Field(_) => "DegenerateTriangle",
            SolveError::Alignment(AlignError::Inconsistent { .. } | AlignError::Linalg(_)) => "InconsistentAlignment",
            SolveError::Alignment(_) => "InvalidCurve",
        }
    }

    pub fn stage(&self) -> &'static str {
        match self {
            SolveError::Prescription(_) => "validate",
            SolveError::Bevel(_) => "bevel",
            SolveError::Linalg { stage, .. } => stage,
            SolveError::Scale(_) => "scale_constraints",
            SolveError::Qp(_) => "sigma",
            SolveError::Field(_) => "field",
            SolveError::Alignment(_) => "alignment",
        }
    }

    pub fn is_validation(&self) -> bool {
        match self {
            SolveError::Prescription(_) | SolveError::Scale(ScaleError::Prescription(_)) => true,
            SolveError::Alignment(e) => !matches!(e, AlignError::Inconsistent { .. } | AlignError::Linalg(_)),
            _ => false,
        }
    }
}

fn linalg(stage: &'static str) -> impl FnOnce(LinalgError) -> SolveError {
    move |source| SolveError::Linalg { stage, source }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ReportCounts {
    pub vertices: usize,
    pub faces: usize,
    pub edges: usize,
    pub corners: usize,
    pub beveled_edges: usize,
    pub beveled_faces: usize,
    pub components: usize,
    pub genus: usize,
    pub boundary_loops: usize,
    pub singularities: usize,
    pub cycle_rows: usize,
    pub scale_rows: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ReportParams {
    pub lambda_j: f64,
    pub lambda_s: f64,
    pub eps: f64,
    #[serde(rename = "N")]
    pub n: u32,
    pub proximal: f64,
    #[serde(default)]
    pub theta_proximal: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub cycle: CycleResiduals,
    pub theta_kkt: f64,
    pub scale_constraints: f64,
    pub sigma_min: f64,
    pub sigma_stationarity: f64,
    pub sigma_complementarity: f64,
    pub part_edge: f64,
    pub integration: f64,
    /// Largest alignment row violation.
    pub alignment: Option<f64>,
    /// Largest direction error against curve chords at their midpoints (radians).
    pub tangent: Option<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Objectives {
    pub theta_smoothness: f64,
    pub theta_isotropy: f64,
    pub sigma_dirichlet: f64,
    /// θᵀQθ/|F|.
    pub dirichlet_energy: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SigmaInfo {
    pub iterations: usize,
    pub method: String,
    pub active_bounds: usize,
    pub pins: Vec<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ExponentInfo {
    pub max: u32,
    pub fixed_faces: usize,
    pub power_faces: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub counts: ReportCounts,
    pub params: ReportParams,
    pub threads: usize,
    pub residuals: Residuals,
    pub objectives: Objectives,
    pub sigma: SigmaInfo,
    pub exponents: ExponentInfo,
    /// Beveled faces whose cycle rows were dropped as dependent.
    pub dropped_rows: Vec<usize>,
    pub timings_ms: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

/// Everything the pipeline produces.
#[derive(Clone, Debug)]
pub struct Solution {
    pub bm: BeveledMesh,
    pub ops: CycleOperators,
    pub targets: IsotropyTargets,
    pub flaps: FlapOperator,
    pub q: SparseMatrix,
    pub cycles: CycleSystem,
    pub theta: Vec<f64>,
    pub exponents: ExponentField,
    pub part_edges: Vec<PartEdge>,
    pub scale: ScaleConstraints,
    pub sigma: Vec<f64>,
    pub corners: Vec<C64>,
    pub field: PowerLinearField,
    pub alignment: Option<Alignment>,
    pub chords: Vec<Chord>,
    pub report: SolveReport,
}

struct Clock {
    last: Option<Instant>,
    out: BTreeMap<String, f64>,
}

/// None where the platform has no clock (browser wasm); laps then read 0.
fn now() -> Option<Instant> {
    (!cfg!(all(target_arch = "wasm32", target_os = "unknown"))).then(Instant::now)
}

impl Clock {
    fn new() -> Self {
        Clock { last: now(), out: BTreeMap::new() }
    }

    fn lap(&mut self, name: &str) {
        let t = now();
        let ms = match (t, self.last) {
            (Some(a), Some(b)) => (a - b).as_secs_f64() * 1e3,
            _ => 0.0,
        };
        self.out.insert(name.to_string(), ms);
        self.last = t;
    }
}

/// Builds the per-face field from integrated corners, the phases and the exponents.
pub fn build_field(mesh: &SurfaceMesh, n: u32, corners: &[C64], theta: &[f64], powers: &[u32]) -> Result<PowerLinearField, FieldError> {
    let roots = (0..mesh.n_faces()).map(|f| root_corners(corners, theta, f, powers[f])).collect();
    PowerLinearField::new(mesh, n, roots, powers)
}

/// Runs the full pipeline on a validated mesh and prescription.
pub fn solve(mesh: &SurfaceMesh, p: &Prescription, params: &SolveParams) -> Result<Solution, SolveError> {
    solve_aligned(mesh, p, params, &[])
}

/// Rejects curves crossing singular edges or faces.
fn check_curves(p: &Prescription, curves: &[CurvePath]) -> Result<(), AlignError> {
    for s in &p.singularities {
        let loc = s.location().map_err(|_| AlignError::ThroughSingularity { curve: 0, element: format!("{:?}", s.kind) })?;
        for (id, c) in curves.iter().enumerate() {
            for x in &c.crossings {
                let hit = match loc {
                    Location::Edge { edge, .. } => edge == x.edge,
                    Location::Face { face, .. } => face == x.from_face || face == x.to_face,
                    Location::Vertex(_) => false,
                };
                if hit {
                    return Err(AlignError::ThroughSingularity { curve: id, element: format!("{:?} {}", s.kind, s.element) });
                }
            }
        }
    }
    Ok(())
}

/// The pipeline with alignment curves (already intersected with the mesh).
pub fn solve_aligned(mesh: &SurfaceMesh, p: &Prescription, params: &SolveParams, curves: &[CurvePath]) -> Result<Solution, SolveError> {
    let mut clock = Clock::new();
    validate(p, mesh, ValidateOptions::default())?;
    clock.lap("validate");

    let (bm, ops) = bevel_with_operators(mesh)?;
    let targets = assemble_targets(p, mesh, &bm)?;
    let cycles = cycle_system(p, &bm, &ops)?;
    clock.lap("bevel");

    let flaps = build_d(&bm, mesh, params.lambda_j);
    let q = flaps.q();
    let iso = build_ds_ms(&targets, &flaps, &bm, mesh);
    clock.lap("discretize");

    let th = solve_theta(&q, &iso, params.lambda_s, &cycles, params.theta_proximal).map_err(linalg("theta"))?;
    let mut theta = th.theta.clone();
    clock.lap("theta");

    let alignment = if curves.is_empty() {
        None
    } else {
        check_curves(p, curves)?;
        let a = solve_alignment(mesh, &bm, &ops.d0, &theta, curves, p.n, params.lambda_j, params.proximal)?;
        theta = a.theta.clone();
        clock.lap("alignment");
        Some(a)
    };

    let exponents = interpolate_exponents(mesh, p, &theta).map_err(|e| match e {
        exponents::ExponentError::Prescription(e) => SolveError::Prescription(e),
        exponents::ExponentError::Linalg(e) => SolveError::Linalg { stage: "exponents", source: e },
    })?;
    clock.lap("exponents");

    let (mut scale, part_edges) = assemble_scale_constraints(p, mesh, &bm, &theta, &exponents.power)?;
    align::alignment_scale_rows(&mut scale, mesh, curves, &theta, &exponents.power);
    clock.lap("scale_constraints");

    let l = build_l(&q, &ops.d0);
    let pins = scale_pins(&bm, &scale);
    let sig = solve_sigma(&l, &scale, &pins, params.eps, params.proximal, params.qp)?;
    clock.lap("sigma");

    let connection = bm.edge_connection(mesh);
    let mut integ = integrate(&bm, &theta, &connection, &sig.sigma, p.n).map_err(linalg("integrate"))?;
    let mut field = build_field(mesh, p.n, &integ.corners, &theta, &exponents.power)?;
    let chords = chords(mesh, curves);
    if let Some(first) = chords.first() {
        let u = field.power_value_local(first.face, first.midpoint());
        let turn = C64::from_polar(1.0, align::anchor_rotation(u, first, p.n));
        integ.corners.iter_mut().for_each(|c| *c *= turn);
        field = build_field(mesh, p.n, &integ.corners, &theta, &exponents.power)?;
    }
    clock.lap("integrate");

    let mut warnings = Vec::new();
    if integ.residual > 1e-6 {
        warnings.push(format!("integration residual {:.3e} exceeds 1e-6", integ.residual));
    }
    let part_edge = part_edges
        .iter()
        .map(|pe| {
            let [ja, jb] = bm.jumps(pe.edge).expect("interior edge");
            pe.half_cycles(theta[ja], theta[jb])
                .iter()
                .map(|s| (s - std::f64::consts::PI * pe.index as f64).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let residuals = Residuals {
        cycle: cycles.residuals(&ops, &theta),
        theta_kkt: th.kkt_residual,
        scale_constraints: scale.residual(&sig.sigma),
        sigma_min: sig.sigma.iter().cloned().fold(f64::INFINITY, f64::min),
        sigma_stationarity: sig.stationarity,
        sigma_complementarity: sig.complementarity,
        part_edge,
        integration: integ.residual,
        alignment: alignment.as_ref().map(|a| a.residual),
        tangent: (!chords.is_empty()).then(|| tangent_errors(&field, &chords).into_iter().fold(0.0, f64::max)),
    };
    let report = SolveReport {
        counts: ReportCounts {
            vertices: mesh.n_vertices(),
            faces: mesh.n_faces(),
            edges: mesh.n_edges(),
            corners: bm.n_corners(),
            beveled_edges: bm.n_edges(),
            beveled_faces: bm.n_faces(),
            components: bm.n_components(),
            genus: mesh.genus(),
            boundary_loops: ops.b.nrows(),
            singularities: p.singularities.len(),
            cycle_rows: cycles.matrix.nrows(),
            scale_rows: scale.rows.len(),
        },
        params: ReportParams { lambda_j: params.lambda_j, lambda_s: params.lambda_s, eps: params.eps, n: p.n, proximal: params.proximal, theta_proximal: params.theta_proximal },
        threads: params.threads,
        residuals,
        objectives: Objectives {
            theta_smoothness: th.smoothness,
            theta_isotropy: th.isotropy,
            sigma_dirichlet: sig.dirichlet,
            dirichlet_energy: th.smoothness / mesh.n_faces() as f64,
        },
        sigma: SigmaInfo {
            iterations: sig.qp.iterations,
            method: match sig.qp.method {
                QpMethod::Equality => "equality",
                QpMethod::InteriorPoint => "interior_point",
                QpMethod::Polished => "polished",
            }
            .into(),
            active_bounds: sig.qp.active,
            pins: sig.pins.clone(),
        },
        exponents: ExponentInfo {
            max: exponents.power.iter().cloned().max().unwrap_or(1),
            fixed_faces: exponents.fixed.iter().filter(|&&f| f).count(),
            power_faces: exponents.power.iter().filter(|&&p| p > 1).count(),
        },
        dropped_rows: cycles.dropped.clone(),
        timings_ms: BTreeMap::new(),
        warnings,
    };
    let mut sol = Solution {
        bm,
        ops,
        targets,
        flaps,
        q,
        cycles,
        theta,
        exponents,
        part_edges,
        scale,
        sigma: sig.sigma,
        corners: integ.corners,
        field,
        alignment,
        chords,
        report,
    };
    clock.lap("report");
    sol.report.timings_ms = clock.out;
    sol.report.timings_ms.insert("total".into(), sol.report.timings_ms.values().sum());
    Ok(sol)
}
