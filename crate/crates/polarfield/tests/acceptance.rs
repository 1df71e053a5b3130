//! Acceptance criteria. Runs without the libtest harness so every criterion prints
//! exactly one PASS/FAIL line; the process fails if any criterion fails.

use polarfield::bevel::bevel;
use polarfield::discretize::{build_d, build_l};
use polarfield::field::{check_indices, edge_loop, face_loop, trivial_connections, vertex_loop, winding_number, ZeroSet};
use polarfield::mesh::*;
use polarfield::prescribe::*;
use polarfield::qp::{BoundedQp, QpOptions};
use polarfield::solve::*;
use polarfield::sparse::{dot, inf_norm, SparseMatrix, SpdSolver};
use polarfield::trace::{geodesic, pieces_to_curve};
use polarfield::C64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use std::collections::HashSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------------------
// Randomized prescriptions shared by criteria 1 to 4.

const INDICES: [i64; 5] = [-2, -1, 1, 2, 3];
const EDGE_T: [f64; 3] = [0.25, 0.5, 0.8];

struct Case {
    name: String,
    mesh: SurfaceMesh,
    p: Prescription,
    sol: Result<Solution, String>,
    secs: f64,
}

struct Claims {
    faces: Vec<Option<bool>>,
}

impl Claims {
    /// Vertex singularities may share faces with each other; edge and face ones may not share at all.
    fn take(&mut self, faces: &[usize], exclusive: bool) -> bool {
        if faces.iter().any(|&f| matches!(self.faces[f], Some(x) if x || exclusive)) {
            return false;
        }
        for &f in faces {
            self.faces[f] = Some(exclusive);
        }
        true
    }
}

fn interior_vertex(mesh: &SurfaceMesh, v: usize) -> bool {
    !mesh.is_boundary_vertex(v)
}

fn edge_faces(mesh: &SurfaceMesh, e: usize) -> Vec<usize> {
    let h = mesh.edge(e).halfedge;
    let mut f = vec![h / 3];
    f.extend(mesh.twin(h).map(|t| t / 3));
    f
}

fn random_prescription(mesh: &SurfaceMesh, n: u32, rng: &mut StdRng, count: usize, edge_count: &mut usize) -> Prescription {
    let boundary: Vec<i64> = (0..mesh.boundary_loops().len()).map(|_| rng.gen_range(-1i64..=1)).collect();
    let homology: Vec<i64> = (0..2 * mesh.genus()).map(|_| rng.gen_range(-1i64..=1)).collect();
    let mut claims = Claims { faces: vec![None; mesh.n_faces()] };
    let mut used_vertices = HashSet::new();
    let mut sing = Vec::new();
    let mut kind = 0;
    let mut attempts = 0;
    while sing.len() < count && attempts < 10_000 {
        attempts += 1;
        let index = INDICES[rng.gen_range(0..INDICES.len())];
        match kind % 3 {
            0 => {
                let v = rng.gen_range(0..mesh.n_vertices());
                if !interior_vertex(mesh, v) || used_vertices.contains(&v) || !claims.take(&mesh.vertex_faces(v), false) {
                    continue;
                }
                used_vertices.insert(v);
                sing.push(Singularity::vertex(v, index));
            }
            1 => {
                let e = rng.gen_range(0..mesh.n_edges());
                let ed = mesh.edge(e);
                if mesh.is_boundary_edge(e) || ed.vertices.iter().any(|&v| !interior_vertex(mesh, v)) || !claims.take(&edge_faces(mesh, e), true) {
                    continue;
                }
                sing.push(Singularity::edge(e, EDGE_T[*edge_count % 3], index));
                *edge_count += 1;
            }
            _ => {
                let f = rng.gen_range(0..mesh.n_faces());
                if !claims.take(&[f], true) {
                    continue;
                }
                let raw: [f64; 3] = [rng.gen_range(0.15..1.0), rng.gen_range(0.15..1.0), rng.gen_range(0.15..1.0)];
                let sum: f64 = raw.iter().sum();
                sing.push(Singularity::face(f, raw.map(|x| x / sum), index));
            }
        }
        kind += 1;
    }
    let total: i64 = sing.iter().map(|s| s.index).sum::<i64>() + boundary.iter().sum::<i64>();
    let mut diff = n as i64 * mesh.euler_characteristic() - total;
    while diff != 0 && attempts < 20_000 {
        attempts += 1;
        let v = rng.gen_range(0..mesh.n_vertices());
        if !interior_vertex(mesh, v) || used_vertices.contains(&v) || !claims.take(&mesh.vertex_faces(v), false) {
            continue;
        }
        used_vertices.insert(v);
        let index = diff.clamp(-2, 3);
        sing.push(Singularity::vertex(v, index));
        diff -= index;
    }
    Prescription { n, singularities: sing, homology, boundary }
}

fn build_cases() -> Vec<Case> {
    let meshes = [
        ("sphere", icosphere(3)),
        ("torus", torus(60, 36, 2.0, 0.7)),
        ("genus-2", double_torus(3)),
        ("disk", disk(12, 24, 1.0)),
        ("annulus", annulus(10, 32, 0.4, 1.0)),
    ];
    let mut rng = StdRng::seed_from_u64(2024);
    let mut cases = Vec::new();
    let mut edge_count = 0;
    for (name, mesh) in meshes {
        for n in [1u32, 3, 4, 6] {
            let p = random_prescription(&mesh, n, &mut rng, 6, &mut edge_count);
            let t = Instant::now();
            let sol = catch_unwind(AssertUnwindSafe(|| solve(&mesh, &p, &SolveParams::default())))
                .map_err(|_| "solver panicked".to_string())
                .and_then(|r| r.map_err(|e| format!("{}: {e}", e.name())));
            let secs = t.elapsed().as_secs_f64();
            cases.push(Case { name: format!("{name} N={n}"), mesh: mesh.clone(), p, sol, secs });
        }
    }
    cases
}

fn solved(case: &Case) -> Result<&Solution, String> {
    case.sol.as_ref().map_err(|e| format!("{}: {e}", case.name))
}

// ---------------------------------------------------------------------------

fn criterion_1(cases: &[Case]) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest = (0.0, 0);
    for case in cases {
        let sol = solved(case)?;
        let r = sol.cycles.residuals(&sol.ops, &sol.theta);
        let m = r.d1.max(r.h).max(r.b);
        ensure(m <= 1e-8, || format!("{}: d1 {:.2e} h {:.2e} b {:.2e}", case.name, r.d1, r.h, r.b))?;
        worst = worst.max(m);
        if case.secs > slowest.0 {
            slowest = (case.secs, case.mesh.n_faces());
        }
        ensure(case.secs < 10.0, || format!("{}: {:.1} s on {} faces", case.name, case.secs, case.mesh.n_faces()))?;
    }
    Ok(format!("{} solves, worst cycle residual {worst:.1e}, slowest {:.2} s on {} faces", cases.len(), slowest.0, slowest.1))
}

/// A loop around an unclaimed element must wind zero times.
fn empty_loops(case: &Case, sol: &Solution) -> Result<usize, String> {
    let mesh = &case.mesh;
    let mut busy = vec![false; mesh.n_faces()];
    for s in &case.p.singularities {
        for f in element_faces(mesh, &s.location().unwrap()) {
            busy[f] = true;
        }
    }
    let free = |faces: &[usize]| faces.iter().all(|&f| !busy[f]);
    let mut paths = Vec::new();
    if let Some(v) = (0..mesh.n_vertices()).find(|&v| interior_vertex(mesh, v) && free(&mesh.vertex_faces(v))) {
        paths.push(vertex_loop(mesh, v, 0.3).unwrap());
    }
    if let Some(e) = mesh.interior_edges().find(|&e| free(&edge_faces(mesh, e)) && mesh.edge(e).vertices.iter().all(|&v| interior_vertex(mesh, v))) {
        paths.push(edge_loop(mesh, e, 0.5).unwrap());
    }
    if let Some(f) = (0..mesh.n_faces()).rev().find(|&f| !busy[f]) {
        paths.push(face_loop(mesh, f, [0.3, 0.3, 0.4], 12));
    }
    for path in &paths {
        let w = winding_number(mesh, &sol.bm, &sol.theta, &sol.field, path).map_err(|e| format!("{}: empty loop: {e}", case.name))?;
        ensure(w.numerator == 0, || format!("{}: empty loop winds {}", case.name, w.numerator))?;
    }
    Ok(paths.len())
}

fn criterion_2(cases: &[Case]) -> Outcome {
    let (mut vertex, mut face, mut power, mut fractional, mut empty) = (0, 0, 0, 0, 0);
    let mut edge_t = [0usize; 3];
    for case in cases {
        let sol = solved(case)?;
        for c in check_indices(&case.mesh, &sol.bm, &sol.theta, &sol.field, &case.p) {
            ensure(c.passed(), || format!("{}: {:?} {} prescribed {}/{} measured {:?} {}", case.name, c.kind, c.element, c.prescribed, c.n, c.measured, c.error.clone().unwrap_or_default()))?;
        }
        for s in &case.p.singularities {
            match s.kind {
                SingularityType::Vertex => vertex += 1,
                SingularityType::Edge => edge_t[EDGE_T.iter().position(|&t| Some(t) == s.t).unwrap()] += 1,
                SingularityType::Face => {
                    face += 1;
                    if s.index.abs() > 1 && case.p.n == 1 {
                        power += 1;
                    }
                }
            }
            if s.index % case.p.n as i64 != 0 {
                fractional += 1;
            }
        }
        empty += empty_loops(case, sol)?;
    }
    ensure(vertex > 0 && face > 0 && power > 0 && fractional > 0 && edge_t.iter().all(|&c| c > 0) && empty > 0, || {
        format!("coverage gap: vertex {vertex} edge {edge_t:?} face {face} power {power} fractional {fractional} empty {empty}")
    })?;
    Ok(format!(
        "exact on {vertex} vertex, {} edge (t=0.25/0.5/0.8: {}/{}/{}), {face} face ({power} power) singularities, {fractional} fractional; {empty} empty loops give 0",
        edge_t.iter().sum::<usize>(),
        edge_t[0],
        edge_t[1],
        edge_t[2]
    ))
}

/// Barycentric point at parameter `t` from the edge's first vertex, in face `f`.
fn edge_bary(mesh: &SurfaceMesh, f: usize, e: usize, t: f64) -> [f64; 3] {
    let [k, i] = mesh.edge(e).vertices;
    let mut b = [0.0; 3];
    b[mesh.corner(f, k).unwrap() % 3] = 1.0 - t;
    b[mesh.corner(f, i).unwrap() % 3] = t;
    b
}

fn criterion_3(cases: &[Case]) -> Outcome {
    let (mut face_worst, mut jump_worst): (f64, f64) = (0.0, 0.0);
    let (mut faces, mut edges) = (0, 0);
    for case in cases {
        let sol = solved(case)?;
        let mesh = &case.mesh;
        for s in &case.p.singularities {
            match s.location().unwrap() {
                Location::Face { face, bary } => {
                    let target = mesh.bary_to_local(face, bary);
                    let ZeroSet::Point(z) = sol.field.zero(face) else {
                        return Err(format!("{}: face {face} has zero set {:?}", case.name, sol.field.zero(face)));
                    };
                    let err = (z - target).norm() / mesh.face_diameter(face);
                    ensure(err <= 1e-6, || format!("{}: face {face} zero off by {err:.2e} diameters", case.name))?;
                    face_worst = face_worst.max(err);
                    faces += 1;
                }
                Location::Edge { edge, t } => {
                    // the two sides at s, compared through the transport across the edge
                    let f = mesh.edge(edge).halfedge / 3;
                    let g = mesh.twin(mesh.edge(edge).halfedge).unwrap() / 3;
                    let uf = sol.field.power_value(f, edge_bary(mesh, f, edge, t));
                    let ug = sol.field.power_value(g, edge_bary(mesh, g, edge, t));
                    let transport = case.p.n as f64 * mesh.connection_form()[edge];
                    let err = wrap_angle((ug / uf).arg() - transport - PI * s.index as f64).abs();
                    ensure(err <= 1e-6, || format!("{}: edge {edge} (I = {}): side phases differ from πI by {err:.2e} rad", case.name, s.index))?;
                    jump_worst = jump_worst.max(err);
                    edges += 1;
                }
                Location::Vertex(_) => {}
            }
        }
    }
    Ok(format!("{faces} face zeros within {face_worst:.1e} diameters; {edges} edge jumps within {jump_worst:.1e} rad"))
}

fn criterion_4(cases: &[Case]) -> Outcome {
    let eps = SolveParams::default().eps;
    let (mut min_sigma, mut worst): (f64, f64) = (f64::INFINITY, 0.0);
    for case in cases {
        let sol = solved(case)?;
        let smin = sol.sigma.iter().copied().fold(f64::INFINITY, f64::min);
        let res = inf_norm(&sol.scale.matrix(sol.sigma.len()).mul_vec(&sol.sigma));
        ensure(smin >= eps && res <= 1e-8, || format!("{}: min σ {smin:.3e}, ‖Cσ‖ {res:.2e}", case.name))?;
        min_sigma = min_sigma.min(smin);
        worst = worst.max(res);
    }
    Ok(format!("min σ {min_sigma:.3e} ≥ {eps:.0e}, worst ‖Cσ‖∞ {worst:.1e}"))
}

// ---------------------------------------------------------------------------

/// Integrated gradient over a planar flap by the divergence theorem with midpoint
/// rule on every side (exact for linear data), plus the weighted jump across the
/// shared edge.
fn flap_integral(z: [C64; 4], vals_f: [f64; 3], vals_g: [f64; 3], lambda: f64) -> C64 {
    let [zi, zj, zk, zl] = z;
    let boundary = |p: [C64; 3], v: [f64; 3]| -> C64 {
        (0..3).map(|a| {
            let b = (a + 1) % 3;
            // outward normal times length for a counterclockwise triangle
            C64::new(0.0, -1.0) * (p[b] - p[a]) * (0.5 * (v[a] + v[b]))
        })
        .sum()
    };
    let f = boundary([zi, zj, zk], vals_f);
    let g = boundary([zk, zl, zi], vals_g);
    let jump_mid = 0.5 * (vals_g[0] + vals_g[2]) - 0.5 * (vals_f[2] + vals_f[0]);
    f + g + C64::new(0.0, -1.0) * (zi - zk) * (lambda * jump_mid)
}

fn criterion_5() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 1000 {
        let mut p: Vec<[f64; 3]> = (0..4).map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0]).collect();
        let cross = |a: [f64; 3], b: [f64; 3], c: [f64; 3]| (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if cross(p[0], p[1], p[2]) < 0.0 {
            p.swap(0, 1);
        }
        if cross(p[0], p[1], p[2]) < 0.05 || cross(p[1], p[0], p[3]) < 0.05 {
            continue;
        }
        let m = SurfaceMesh::new(p, vec![[0, 1, 2], [1, 0, 3]]).map_err(|e| e.to_string())?;
        let bm = bevel(&m);
        let d = build_d(&bm, &m, 1.0);
        let flap = m.flatten_flap(m.interior_edges().next().unwrap()).map_err(|e| e.to_string())?;
        let alpha: Vec<f64> = (0..6).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let out = d.d.mul_vec(&bm.d0().mul_vec(&alpha));
        let got = C64::new(out[0], out[1]);
        let [vi, vj, vk, vl] = flap.vertices;
        let at = |f: usize, v: usize| alpha[m.corner(f, v).unwrap()];
        let want = flap_integral(
            [flap.zi, flap.zj, flap.zk, flap.zl],
            [at(flap.f, vi), at(flap.f, vj), at(flap.f, vk)],
            [at(flap.g, vk), at(flap.g, vl), at(flap.g, vi)],
            1.0,
        );
        let err = (got - want).norm();
        ensure(err <= 1e-10, || format!("flap {checked}: {got} vs {want}"))?;
        worst = worst.max(err);
        checked += 1;
    }

    let mut kernel: f64 = 0.0;
    let mut min_ritz = f64::INFINITY;
    for mesh in [grid(8, 8, 1.0, 1.0), torus(16, 8, 2.0, 0.7)] {
        let (bm, ops) = polarfield::bevel::bevel_with_operators(&mesh).map_err(|e| e.to_string())?;
        for lambda in [1.0, 50.0] {
            let l = build_l(&build_d(&bm, &mesh, lambda).q(), &ops.d0);
            let n = l.nrows();
            let scale = (0..n).map(|i| l.get(i, i)).fold(0.0, f64::max);
            let k = inf_norm(&l.mul_vec(&vec![1.0; n])) / scale;
            ensure(k <= 1e-12, || format!("L·1 = {k:.2e} relative"))?;
            kernel = kernel.max(k);
            let shifted = l.add(&SparseMatrix::diagonal(&vec![1e-10 * scale; n]));
            SpdSolver::new(&shifted).map_err(|e| format!("L + 1e-10·I is not positive definite: {e}"))?;
            for _ in 0..50 {
                let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                min_ritz = min_ritz.min(dot(&x, &l.mul_vec(&x)) / (dot(&x, &x) * scale));
            }
        }
    }
    ensure(min_ritz >= -1e-10, || format!("negative Ritz value {min_ritz:.2e}"))?;
    Ok(format!("1000 flaps within {worst:.1e}; L·1 ≤ {kernel:.1e}, L + 1e-10·I factorizes, min Ritz {min_ritz:.1e}"))
}

// ---------------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let cases: Vec<(&str, SurfaceMesh, Prescription)> = vec![
        (
            "sphere",
            icosphere(3),
            Prescription::new(1, vec![Singularity::vertex(0, 2), Singularity::vertex(3, 1), Singularity::vertex(9, -1), Singularity::vertex(40, 1), Singularity::vertex(60, -1)]),
        ),
        ("sphere N=4", icosphere(3), Prescription::new(4, (0..8).map(|v| Singularity::vertex(5 * v, 1)).collect())),
        (
            "torus",
            torus(40, 20, 2.0, 0.7),
            Prescription { n: 1, singularities: vec![Singularity::vertex(10, 1), Singularity::vertex(410, -1)], homology: vec![0, 0], boundary: vec![] },
        ),
        (
            "genus-2",
            double_torus(3),
            Prescription { n: 1, singularities: vec![Singularity::vertex(5, -1), Singularity::vertex(300, -1)], homology: vec![0; 4], boundary: vec![] },
        ),
        ("disk", disk(12, 24, 1.0), Prescription { n: 1, singularities: vec![Singularity::vertex(100, 1)], homology: vec![], boundary: vec![0] }),
    ];
    let mut ratios = Vec::new();
    let mut failures = Vec::new();
    for (name, mesh, p) in cases {
        let sol = solve(&mesh, &p, &SolveParams::default()).map_err(|e| format!("{name}: {e}"))?;
        let tc = trivial_connections(&mesh, &sol.bm, &sol.ops, &p).map_err(|e| format!("{name}: {e}"))?;
        let nf = mesh.n_faces() as f64;
        let ours = dot(&sol.theta, &sol.q.mul_vec(&sol.theta)) / nf;
        let base = tc.energy(&sol.q, mesh.n_faces());
        let ratio = ours / base;
        ratios.push(format!("{name} {ratio:.3}"));
        if !(ours <= base * (1.0 + 1e-9)) {
            failures.push(format!("{name}: E_ours {ours:.4e} > E_tc {base:.4e}"));
        }
    }
    ensure(failures.is_empty(), || format!("{}; ratios {}", failures.join("; "), ratios.join(", ")))?;
    Ok(format!("E_ours/E_tc: {}", ratios.join(", ")))
}

fn criterion_7() -> Outcome {
    let mesh = torus(200, 96, 2.0, 0.7);
    let edge = mesh.interior_edges().find(|&e| mesh.edge(e).halfedge / 3 == 19_000).unwrap();
    let p = Prescription {
        n: 1,
        singularities: vec![Singularity::vertex(10, 1), Singularity::edge(edge, 0.5, 1), Singularity::face(30_000, [0.3, 0.3, 0.4], -2)],
        homology: vec![0, 0],
        boundary: vec![],
    };
    let t = Instant::now();
    let sol = solve(&mesh, &p, &SolveParams::default()).map_err(|e| e.to_string())?;
    let secs = t.elapsed().as_secs_f64();
    let r = &sol.report.residuals;
    ensure(secs <= 300.0, || format!("{secs:.1} s on {} faces", mesh.n_faces()))?;
    ensure(r.cycle.d1.max(r.cycle.h) <= 1e-8 && r.scale_constraints <= 1e-8, || format!("residuals {r:?}"))?;
    Ok(format!("{} faces in {secs:.1} s (limit 300 s), cycle residual {:.1e}", mesh.n_faces(), r.cycle.d1.max(r.cycle.h)))
}

// ---------------------------------------------------------------------------

struct ParamTorus {
    nu: usize,
    nv: usize,
    mesh: SurfaceMesh,
}

impl ParamTorus {
    fn new(nu: usize, nv: usize) -> Self {
        ParamTorus { nu, nv, mesh: torus(nu, nv, 2.0, 0.7) }
    }

    /// Face and barycentric coordinates of the surface point with angles (u, v), by
    /// linear interpolation in the parameter grid.
    fn locate(&self, u: f64, v: f64) -> (usize, [f64; 3]) {
        let s = u.rem_euclid(2.0 * PI) * self.nu as f64 / (2.0 * PI);
        let w = v.rem_euclid(2.0 * PI) * self.nv as f64 / (2.0 * PI);
        let (i, j) = ((s.floor() as usize).min(self.nu - 1), (w.floor() as usize).min(self.nv - 1));
        let (a, b) = (s - i as f64, w - j as f64);
        let id = |i: usize, j: usize| (i % self.nu) * self.nv + (j % self.nv);
        let quad = 2 * (i * self.nv + j);
        let (f, verts, weights) = if a >= b {
            (quad, [id(i, j), id(i + 1, j), id(i + 1, j + 1)], [1.0 - a, a - b, b])
        } else {
            (quad + 1, [id(i, j), id(i + 1, j + 1), id(i, j + 1)], [1.0 - b, a, b - a])
        };
        let face = self.mesh.face(f);
        let mut bary = [0.0; 3];
        for (v, wgt) in verts.iter().zip(weights) {
            let c = face.iter().position(|x| x == v).expect("torus faces follow the parameter grid");
            bary[c] = wgt;
        }
        (f, bary)
    }

    /// Direction angle of a local vector in the smooth (∂u, ∂v) frame.
    fn angle(&self, f: usize, bary: [f64; 3], d: C64, u: f64, v: f64) -> f64 {
        let z = self.mesh.bary_to_local(f, bary);
        let a = self.mesh.local_to_world(f, z);
        let b = self.mesh.local_to_world(f, z + d / d.norm() * 1e-3);
        let w = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        let eu = [-u.sin(), u.cos(), 0.0];
        let ev = [-v.sin() * u.cos(), -v.sin() * u.sin(), v.cos()];
        let dotp = |x: [f64; 3], y: [f64; 3]| x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
        dotp(w, ev).atan2(dotp(w, eu))
    }
}

fn criterion_8() -> Outcome {
    let spots = [(0.7, 0.3, 1i64), (3.5, 2.9, -1i64)];
    let tori = [ParamTorus::new(40, 20), ParamTorus::new(56, 26)];
    let mut sols = Vec::new();
    let mut measured = Vec::new();
    for t in &tori {
        let singularities = spots
            .iter()
            .map(|&(u, v, i)| {
                let (f, b) = t.locate(u, v);
                Singularity::face(f, b, i)
            })
            .collect();
        let p = Prescription { n: 1, singularities, homology: vec![0, 0], boundary: vec![] };
        let sol = solve(&t.mesh, &p, &SolveParams::default()).map_err(|e| e.to_string())?;
        let checks = check_indices(&t.mesh, &sol.bm, &sol.theta, &sol.field, &p);
        measured.push(checks.iter().map(|c| c.measured).collect::<Vec<_>>());
        sols.push(sol);
    }
    ensure(measured[0] == measured[1] && measured[0].iter().zip(&spots).all(|(m, s)| *m == Some(s.2)), || {
        format!("oracle indices differ: {:?} vs {:?}", measured[0], measured[1])
    })?;

    let mut rng = StdRng::seed_from_u64(8);
    let mut diffs = Vec::new();
    for _ in 0..1000 {
        let (u, v) = (rng.gen_range(0.0..2.0 * PI), rng.gen_range(0.0..2.0 * PI));
        let angles: Vec<f64> = tori
            .iter()
            .zip(&sols)
            .map(|(t, sol)| {
                let (f, b) = t.locate(u, v);
                let d = sol.field.evaluate(f, b, 0).unwrap_or(C64::new(1.0, 0.0));
                t.angle(f, b, d, u, v)
            })
            .collect();
        diffs.push(wrap_angle(angles[0] - angles[1]));
    }
    // the fields are defined up to one global rotation
    let offset = diffs.iter().map(|&d| C64::from_polar(1.0, d)).sum::<C64>().arg();
    let mut dev: Vec<f64> = diffs.iter().map(|&d| wrap_angle(d - offset).abs().to_degrees()).collect();
    dev.sort_by(f64::total_cmp);
    let mean = dev.iter().sum::<f64>() / dev.len() as f64;
    Ok(format!(
        "oracle indices agree {:?}; angular deviation at 1000 points (reported only): mean {mean:.2}°, median {:.2}°, max {:.2}°",
        measured[0].iter().map(|m| m.unwrap()).collect::<Vec<_>>(),
        dev[dev.len() / 2],
        dev[dev.len() - 1]
    ))
}

// ---------------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let cases: Vec<(&str, SurfaceMesh, Prescription, Vec<(usize, f64)>)> = vec![
        ("torus", torus(32, 16, 2.0, 0.7), Prescription { n: 1, singularities: vec![], homology: vec![0, 0], boundary: vec![] }, vec![(5, 0.3), (300, 1.2)]),
        ("sphere N=4", icosphere(3), Prescription::new(4, (0..8).map(|v| Singularity::vertex(v, 1)).collect()), vec![(500, 0.0), (900, 2.0)]),
    ];
    let (mut tangent, mut curl, mut drift): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut chords = 0;
    for (name, mesh, p, starts) in cases {
        let plain = solve(&mesh, &p, &SolveParams::default()).map_err(|e| format!("{name}: {e}"))?;
        let paths: Vec<CurvePath> = starts
            .iter()
            .enumerate()
            .map(|(id, &(f, angle))| {
                let z = mesh.bary_to_local(f, [1.0 / 3.0; 3]);
                let curve = pieces_to_curve(&mesh, &geodesic(&mesh, f, z, C64::from_polar(1.0, angle), 1.5));
                intersect_curve(&mesh, &curve, id).map_err(|e| format!("{name}: {e}"))
            })
            .collect::<Result<_, _>>()?;
        let sol = solve_aligned(&mesh, &p, &SolveParams::default(), &paths).map_err(|e| format!("{name}: {e}"))?;
        ensure(!sol.chords.is_empty(), || format!("{name}: no chords"))?;
        let n = p.n as f64;
        for ch in &sol.chords {
            let u = sol.field.power_value_local(ch.face, ch.midpoint());
            let err = wrap_angle(u.arg() - n * ch.angle()).abs() / n;
            ensure(err <= 1e-3, || format!("{name}: chord in face {} off by {err:.2e} rad", ch.face))?;
            tangent = tangent.max(err);
        }
        chords += sol.chords.len();
        let a = sol.alignment.as_ref().unwrap();
        let c = inf_norm(&sol.ops.d1.mul_vec(&sol.ops.d0.mul_vec(&a.alpha)));
        let d1_hat = sol.ops.d1.mul_vec(&sol.theta);
        let d1_plain = sol.ops.d1.mul_vec(&plain.theta);
        let dr = d1_hat.iter().zip(&d1_plain).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        ensure(c <= 1e-12 && dr <= 1e-10, || format!("{name}: d1·d0·α {c:.2e}, |d1θ̂ − d1θ| {dr:.2e}"))?;
        curl = curl.max(c);
        drift = drift.max(dr);
    }
    Ok(format!("{chords} chord midpoints within {tangent:.1e} rad; d1·d0·α ≤ {curl:.1e}, |d1θ̂ − d1θ| ≤ {drift:.1e}"))
}

// ---------------------------------------------------------------------------
// Dense primal active-set reference for min ½xᵀPx + qᵀx, Ax = b, x ≥ l.

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for c in col..n {
                    a[r][c] -= factor * a[col][c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn reference_qp(p: &[Vec<f64>], q: &[f64], a: &[Vec<f64>], lower: &[f64], start: Vec<f64>) -> Option<Vec<f64>> {
    let n = q.len();
    let m = a.len();
    let mut x = start;
    let mut active: Vec<bool> = vec![false; n];
    for _ in 0..10 * n + 100 {
        // step p solving the equality problem on the working set
        let w: Vec<usize> = (0..n).filter(|&i| active[i]).collect();
        let size = n + m + w.len();
        let mut k = vec![vec![0.0; size]; size];
        let mut rhs = vec![0.0; size];
        let grad: Vec<f64> = (0..n).map(|i| dot(&p[i], &x) + q[i]).collect();
        for i in 0..n {
            k[i][..n].copy_from_slice(&p[i]);
            rhs[i] = -grad[i];
        }
        for (r, row) in a.iter().enumerate() {
            for i in 0..n {
                k[n + r][i] = row[i];
                k[i][n + r] = row[i];
            }
        }
        for (r, &i) in w.iter().enumerate() {
            k[n + m + r][i] = 1.0;
            k[i][n + m + r] = 1.0;
        }
        let sol = dense_solve(k, rhs)?;
        let step = &sol[..n];
        if inf_norm(step) < 1e-12 {
            // multipliers of the active bounds are −sol (stationarity Px + q + Aᵀy + z = 0 here)
            let worst = w.iter().enumerate().map(|(r, &i)| (i, -sol[n + m + r])).min_by(|x, y| x.1.total_cmp(&y.1));
            match worst {
                Some((i, z)) if z < -1e-10 => active[i] = false,
                _ => return Some(x),
            }
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for i in 0..n {
            if !active[i] && step[i] < 0.0 {
                let s = (lower[i] - x[i]) / step[i];
                if s < alpha {
                    alpha = s;
                    blocking = Some(i);
                }
            }
        }
        for i in 0..n {
            x[i] += alpha * step[i];
        }
        if let Some(i) = blocking {
            x[i] = lower[i];
            active[i] = true;
        }
    }
    None
}

fn criterion_10() -> Outcome {
    let mut rng = StdRng::seed_from_u64(10);
    let mut worst: f64 = 0.0;
    let mut active_total = 0;
    for inst in 0..50 {
        let n = rng.gen_range(20..=200);
        let m = rng.gen_range(1..=n / 10 + 1);
        // σ-like objective: weighted graph Laplacian plus a small shift, with a random linear term
        let mut pt = Vec::new();
        let mut diag = vec![1e-3; n];
        for i in 0..n {
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j != i {
                    let w = rng.gen_range(0.1..2.0);
                    pt.push((i, j, -w));
                    pt.push((j, i, -w));
                    diag[i] += w;
                    diag[j] += w;
                }
            }
        }
        pt.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
        let pm = SparseMatrix::from_triplets(n, n, &pt);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut at = Vec::new();
        for r in 0..m {
            for _ in 0..4 {
                at.push((r, rng.gen_range(0..n), rng.gen_range(-1.0..1.0)));
            }
        }
        let am = SparseMatrix::from_triplets(m, n, &at);
        let lower = vec![1e-6; n];
        let start: Vec<f64> = (0..n).map(|_| 1e-6 + rng.gen_range(0.05..1.0)).collect();
        let b = am.mul_vec(&start);
        let prob = BoundedQp { p: &pm, q: &q, a: &am, b: &b, lower: &lower };
        let ours = prob.solve(QpOptions::default()).map_err(|e| format!("instance {inst}: {e}"))?;
        let reference = reference_qp(&pm.to_dense(), &q, &am.to_dense(), &lower, start).ok_or_else(|| format!("instance {inst}: reference failed"))?;
        let (fo, fr) = (prob.objective(&ours.x), prob.objective(&reference));
        let rel = (fo - fr).abs() / fr.abs().max(1.0);
        ensure(rel <= 1e-6, || format!("instance {inst} (n {n}): objective {fo:.10e} vs reference {fr:.10e}"))?;
        worst = worst.max(rel);
        active_total += reference.iter().zip(&lower).filter(|(x, l)| (*x - *l).abs() < 1e-12).count();
    }
    Ok(format!("50 instances (20 to 200 variables, {active_total} active bounds in total), worst relative objective gap {worst:.1e}"))
}

// ---------------------------------------------------------------------------

fn main() {
    // `cargo test -- --list` and filters come from the harness protocol; answer them quietly.
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let started = Instant::now();
    let cases = build_cases();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("cycle exactness", Box::new(|| criterion_1(&cases))),
        ("index oracle", Box::new(|| criterion_2(&cases))),
        ("singularity placement", Box::new(|| criterion_3(&cases))),
        ("scale feasibility", Box::new(|| criterion_4(&cases))),
        ("flap quadrature and L", Box::new(criterion_5)),
        ("baseline energy", Box::new(criterion_6)),
        ("runtime 38k faces", Box::new(criterion_7)),
        ("two triangulations", Box::new(criterion_8)),
        ("alignment", Box::new(criterion_9)),
        ("scale QP reference", Box::new(criterion_10)),
    ];
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name:<22} PASS  {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name:<22} FAIL  {detail}", k + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed in {:.1} s", criteria.len() - failed, started.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
