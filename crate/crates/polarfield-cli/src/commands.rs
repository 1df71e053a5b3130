use crate::error::{mesh_error, CliError, EXIT_SOLVER, EXIT_VALIDATION};
use crate::output::{ensure_dir, read_text, sample_grid, write_json, write_text};
use crate::{RunArgs, TraceArgs};
use polarfield::discretize::build_l;
use polarfield::field::{check_indices, trivial_connections, FieldExport, IndexCheck, PowerLinearField};
use polarfield::mesh::{load_mesh_file, SurfaceMesh};
use polarfield::prescribe::{validate as validate_prescription, Prescription, ValidateOptions};
use polarfield::solve::{intersect_curve, solve_aligned, AlignmentCurve, CurvePath, SolveParams, SolveReport, Solution};
use polarfield::sparse::dot;
use polarfield::trace::{seeds, streamlines_obj, trace_all, TraceOptions};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::Path;

/// Threads from POLARFIELD_THREADS, else every available core.
pub fn thread_count() -> Result<usize, CliError> {
    match std::env::var("POLARFIELD_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::new(EXIT_VALIDATION, "InvalidConfig", format!("POLARFIELD_THREADS must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn check_config(a: &RunArgs) -> Result<(), CliError> {
    let bad = |msg: &str| Err(CliError::new(EXIT_VALIDATION, "InvalidConfig", msg));
    if !(a.lambda_j >= 1.0) {
        return bad("--lambda-j must be at least 1");
    }
    if !(a.lambda_s >= 0.0) {
        return bad("--lambda-s must be non-negative");
    }
    if !(a.eps > 0.0) || !a.eps.is_finite() {
        return bad("--eps must be positive");
    }
    if a.n == Some(0) {
        return bad("--n must be at least 1");
    }
    Ok(())
}

fn load_mesh(path: &Path) -> Result<SurfaceMesh, CliError> {
    if !path.exists() {
        return Err(CliError::io(path, "no such file"));
    }
    load_mesh_file(path).map_err(|e| mesh_error(path, e))
}

fn load_inputs(a: &RunArgs) -> Result<(SurfaceMesh, Prescription), CliError> {
    check_config(a)?;
    let mesh = load_mesh(&a.mesh)?;
    let mut p = Prescription::from_json(&read_text(&a.prescription)?)?;
    if let Some(n) = a.n {
        p.n = n;
    }
    Ok((mesh, p))
}

fn load_curves(mesh: &SurfaceMesh, path: &Path) -> Result<Vec<CurvePath>, CliError> {
    let curves: Vec<AlignmentCurve> = serde_json::from_str(&read_text(path)?)
        .map_err(|e| CliError::new(EXIT_VALIDATION, "InvalidCurve", format!("{}: {e}", path.display())))?;
    for (id, c) in curves.iter().enumerate() {
        let bad = c.points.iter().find(|pt| {
            pt.face >= mesh.n_faces() || pt.bary.iter().any(|b| !b.is_finite() || *b < 0.0) || (pt.bary.iter().sum::<f64>() - 1.0).abs() > 1e-9
        });
        if let Some(pt) = bad {
            return Err(CliError::new(EXIT_VALIDATION, "InvalidCurve", format!("curve {id}: invalid point {pt:?}")));
        }
    }
    curves.iter().enumerate().map(|(id, c)| intersect_curve(mesh, c, id).map_err(CliError::from)).collect()
}

fn params(a: &RunArgs, threads: usize) -> SolveParams {
    SolveParams { lambda_j: a.lambda_j, lambda_s: a.lambda_s, eps: a.eps, threads, ..SolveParams::default() }
}

pub fn validate(a: &RunArgs) -> Result<Value, CliError> {
    let (mesh, p) = load_inputs(a)?;
    validate_prescription(&p, &mesh, ValidateOptions::default())?;
    Ok(json!({
        "valid": true,
        "vertices": mesh.n_vertices(),
        "faces": mesh.n_faces(),
        "edges": mesh.n_edges(),
        "chi": mesh.euler_characteristic(),
        "genus": mesh.genus(),
        "boundary_loops": mesh.boundary_loops().len(),
        "singularities": p.singularities.len(),
        "N": p.n,
    }))
}

#[derive(Serialize)]
struct Vectors<'a> {
    theta: &'a [f64],
    sigma: &'a [f64],
    exponents: &'a [u32],
    corners: Vec<[f64; 2]>,
}

fn write_solution(out: &Path, a: &RunArgs, mesh: &SurfaceMesh, sol: &Solution, indices: &[IndexCheck]) -> Result<Vec<String>, CliError> {
    ensure_dir(out)?;
    let mut files = vec!["field.json".to_string(), "report.json".into(), "vectors.json".into(), "indices.json".into()];
    write_json(&out.join("field.json"), &sol.field.export())?;
    write_json(&out.join("report.json"), &sol.report)?;
    let vectors = Vectors {
        theta: &sol.theta,
        sigma: &sol.sigma,
        exponents: &sol.exponents.power,
        corners: sol.corners.iter().map(|c| [c.re, c.im]).collect(),
    };
    write_json(&out.join("vectors.json"), &vectors)?;
    write_json(&out.join("indices.json"), &indices)?;
    if let Some(k) = a.samples {
        write_text(&out.join("samples.csv"), &sol.field.sample_csv(&sample_grid(mesh.n_faces(), k)))?;
        files.push("samples.csv".into());
    }
    if let Some(count) = a.trace_seeds.filter(|&c| c > 0) {
        let lines = trace_all(mesh, &sol.field, &seeds(mesh, count), &TraceOptions::default());
        write_text(&out.join("streamlines.obj"), &streamlines_obj(&lines))?;
        files.push("streamlines.obj".into());
    }
    if a.dump_matrices {
        let dir = out.join("matrices");
        ensure_dir(&dir)?;
        let l = build_l(&sol.q, &sol.ops.d0);
        for (name, m) in [("d0", &sol.ops.d0), ("d1", &sol.ops.d1), ("h", &sol.ops.h), ("b", &sol.ops.b), ("q", &sol.q), ("l", &l), ("cycles", &sol.cycles.matrix)] {
            write_text(&dir.join(format!("{name}.txt")), &m.to_triplet_text())?;
            files.push(format!("matrices/{name}.txt"));
        }
    }
    if a.dump_bevel {
        write_json(&out.join("bevel.json"), &sol.bm.dump(&sol.ops))?;
        files.push("bevel.json".into());
    }
    Ok(files)
}

fn run_solve(a: &RunArgs, threads: usize, mesh: &SurfaceMesh, p: &Prescription) -> Result<(Solution, Vec<IndexCheck>), CliError> {
    validate_prescription(p, mesh, ValidateOptions::default())?;
    let curves = match &a.align {
        Some(path) => load_curves(mesh, path)?,
        None => Vec::new(),
    };
    let sol = solve_aligned(mesh, p, &params(a, threads), &curves)?;
    let indices = check_indices(mesh, &sol.bm, &sol.theta, &sol.field, p);
    Ok((sol, indices))
}

pub fn compute(a: &RunArgs, threads: usize) -> Result<Value, CliError> {
    let (mesh, p) = load_inputs(a)?;
    let (sol, indices) = run_solve(a, threads, &mesh, &p)?;
    let files = write_solution(&a.out, a, &mesh, &sol, &indices)?;
    Ok(json!({
        "status": "ok",
        "out": a.out,
        "files": files,
        "faces": mesh.n_faces(),
        "indices_ok": indices.iter().all(IndexCheck::passed),
        "residuals": sol.report.residuals,
        "total_ms": sol.report.timings_ms.get("total"),
        "warnings": sol.report.warnings,
    }))
}

/// Energies are θᵀQθ / |F| with the smoothness matrix of the run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareReport {
    pub faces: usize,
    pub energy_ours: f64,
    pub energy_trivial: f64,
    /// energy_ours / energy_trivial; absent when the baseline energy is zero.
    pub ratio: Option<f64>,
    pub ours_not_worse: bool,
    pub trivial_residual: f64,
    pub indices_ours: Vec<IndexCheck>,
    pub indices_trivial: Vec<IndexCheck>,
    pub report: SolveReport,
}

pub fn compare(a: &RunArgs, threads: usize) -> Result<Value, CliError> {
    let (mesh, p) = load_inputs(a)?;
    if !p.is_vertex_only() {
        return Err(CliError::new(EXIT_VALIDATION, "NonVertexSingularity", "the baseline only supports vertex singularities"));
    }
    let (sol, indices_ours) = run_solve(a, threads, &mesh, &p)?;
    let tc = trivial_connections(&mesh, &sol.bm, &sol.ops, &p).map_err(|e| CliError::new(EXIT_SOLVER, "TrivialConnection", e.to_string()))?;
    let tc_field = tc.field(&mesh, &sol.bm, &p).map_err(|e| CliError::new(EXIT_SOLVER, "TrivialConnection", e.to_string()))?;
    let nf = mesh.n_faces();
    let energy_ours = dot(&sol.theta, &sol.q.mul_vec(&sol.theta)) / nf as f64;
    let energy_trivial = tc.energy(&sol.q, nf);
    let report = CompareReport {
        faces: nf,
        energy_ours,
        energy_trivial,
        ratio: (energy_trivial > 0.0).then(|| energy_ours / energy_trivial),
        ours_not_worse: energy_ours <= energy_trivial * (1.0 + 1e-9) + 1e-12,
        trivial_residual: tc.residual,
        indices_trivial: check_indices(&mesh, &sol.bm, &tc.theta, &tc_field, &p),
        indices_ours,
        report: sol.report.clone(),
    };
    let mut files = write_solution(&a.out, a, &mesh, &sol, &report.indices_ours)?;
    write_json(&a.out.join("compare.json"), &report)?;
    files.push("compare.json".into());
    Ok(json!({
        "status": "ok",
        "files": files,
        "energy_ours": report.energy_ours,
        "energy_trivial": report.energy_trivial,
        "ratio": report.ratio,
        "ours_not_worse": report.ours_not_worse,
    }))
}

pub fn trace(a: &TraceArgs) -> Result<Value, CliError> {
    let mesh = load_mesh(&a.mesh)?;
    let export: FieldExport = serde_json::from_str(&read_text(&a.field)?)
        .map_err(|e| CliError::new(EXIT_VALIDATION, "InvalidField", format!("{}: {e}", a.field.display())))?;
    if export.faces.len() != mesh.n_faces() {
        return Err(CliError::new(
            EXIT_VALIDATION,
            "InvalidField",
            format!("field has {} faces, mesh has {}", export.faces.len(), mesh.n_faces()),
        ));
    }
    let field = PowerLinearField::from_export(&mesh, &export).map_err(|e| CliError::new(EXIT_VALIDATION, "InvalidField", e.to_string()))?;
    if !(a.step > 0.0) {
        return Err(CliError::new(EXIT_VALIDATION, "InvalidConfig", "--step must be positive"));
    }
    let opts = TraceOptions { step: a.step, max_steps: a.max_steps };
    let lines = trace_all(&mesh, &field, &seeds(&mesh, a.trace_seeds), &opts);
    ensure_dir(&a.out)?;
    write_text(&a.out.join("streamlines.obj"), &streamlines_obj(&lines))?;
    Ok(json!({
        "status": "ok",
        "file": a.out.join("streamlines.obj"),
        "lines": lines.iter().filter(|l| l.points.len() >= 2).count(),
        "points": lines.iter().map(|l| l.points.len()).sum::<usize>(),
    }))
}
