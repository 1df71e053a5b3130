//! Browser demo: click faces of a flat disk to place singularities, solve, and draw
//! the field as glyphs and streamlines. `Scene` holds the logic; `Demo` exposes it to
//! JavaScript.

use polarfield::field::{check_indices, PowerLinearField};
use polarfield::mesh::{disk, SurfaceMesh};
use polarfield::prescribe::{Prescription, Singularity};
use polarfield::solve::{solve, SolveParams};
use polarfield::trace::{seeds, trace_all, TraceOptions};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placed {
    pub face: usize,
    pub bary: [f64; 3],
    pub index: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub faces: usize,
    #[serde(rename = "N")]
    pub n: u32,
    /// Index left for the boundary loop so the total matches N·χ.
    pub boundary_index: i64,
    pub energy: f64,
    pub max_power: u32,
    pub cycle_residual: f64,
    /// Measured winding numerators, in placement order.
    pub measured: Vec<Option<i64>>,
}

pub struct Scene {
    mesh: SurfaceMesh,
    placed: Vec<Placed>,
    n: u32,
    field: Option<PowerLinearField>,
}

impl Scene {
    pub fn new(rings: usize, sectors: usize) -> Self {
        Scene { mesh: disk(rings.max(2), sectors.max(6), 1.0), placed: Vec::new(), n: 1, field: None }
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn placed(&self) -> &[Placed] {
        &self.placed
    }

    pub fn field(&self) -> Option<&PowerLinearField> {
        self.field.as_ref()
    }

    /// Face under the planar point and its barycentric coordinates.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, [f64; 3])> {
        let p = self.mesh.positions();
        self.mesh.faces().iter().enumerate().find_map(|(f, &[a, b, c])| {
            let (ax, ay, bx, by, cx, cy) = (p[a][0], p[a][1], p[b][0], p[b][1], p[c][0], p[c][1]);
            let det = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay);
            let l1 = ((x - ax) * (cy - ay) - (cx - ax) * (y - ay)) / det;
            let l2 = ((bx - ax) * (y - ay) - (x - ax) * (by - ay)) / det;
            let l0 = 1.0 - l1 - l2;
            (l0 >= 0.0 && l1 >= 0.0 && l2 >= 0.0).then_some((f, [l0, l1, l2]))
        })
    }

    /// Places a singularity at the point, or removes the one already in that face.
    /// Returns false when the point is off the mesh.
    pub fn toggle(&mut self, x: f64, y: f64, index: i64) -> bool {
        let Some((face, bary)) = self.locate(x, y) else { return false };
        match self.placed.iter().position(|s| s.face == face) {
            Some(i) => {
                self.placed.remove(i);
            }
            None if index != 0 => {
                // keep the point off the face's edges so it stays a face singularity
                let b = bary.map(|v| v.clamp(0.05, 0.9));
                let sum: f64 = b.iter().sum();
                self.placed.push(Placed { face, bary: b.map(|v| v / sum), index });
            }
            None => return false,
        }
        self.field = None;
        true
    }

    pub fn clear(&mut self) {
        self.placed.clear();
        self.field = None;
    }

    pub fn set_n(&mut self, n: u32) {
        self.n = n.max(1);
        self.field = None;
    }

    pub fn prescription(&self) -> Prescription {
        let total: i64 = self.placed.iter().map(|s| s.index).sum();
        Prescription {
            n: self.n,
            singularities: self.placed.iter().map(|s| Singularity::face(s.face, s.bary, s.index)).collect(),
            homology: vec![],
            boundary: vec![self.n as i64 * self.mesh.euler_characteristic() - total],
        }
    }

    pub fn solve(&mut self) -> Result<Summary, String> {
        let p = self.prescription();
        let sol = solve(&self.mesh, &p, &SolveParams::default()).map_err(|e| e.to_string())?;
        let checks = check_indices(&self.mesh, &sol.bm, &sol.theta, &sol.field, &p);
        let r = &sol.report.residuals.cycle;
        let summary = Summary {
            faces: self.mesh.n_faces(),
            n: self.n,
            boundary_index: p.boundary[0],
            energy: sol.report.objectives.dirichlet_energy,
            max_power: sol.exponents.power.iter().copied().max().unwrap_or(1),
            cycle_residual: r.d1.max(r.b),
            measured: checks.iter().map(|c| c.measured).collect(),
        };
        self.field = Some(sol.field);
        Ok(summary)
    }

    /// Unit direction of every branch at every face centroid, as x, y, dx, dy.
    pub fn glyphs(&self) -> Vec<f64> {
        let Some(field) = &self.field else { return Vec::new() };
        let mut out = Vec::with_capacity(4 * self.mesh.n_faces() * field.n as usize);
        for f in 0..self.mesh.n_faces() {
            let centre = [1.0 / 3.0; 3];
            let Ok(dirs) = field.branches(f, centre) else { continue };
            let z = self.mesh.bary_to_local(f, centre);
            let a = self.mesh.local_to_world(f, z);
            for d in dirs {
                if d.norm() == 0.0 {
                    continue;
                }
                // faces are affine, so differences of mapped points are mapped directions
                let b = self.mesh.local_to_world(f, z + d / d.norm());
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let len = dx.hypot(dy);
                out.extend([a[0], a[1], dx / len, dy / len]);
            }
        }
        out
    }

    /// Streamline polylines as x, y pairs, each line ended by a NaN pair.
    pub fn streamlines(&self, count: usize) -> Vec<f64> {
        let Some(field) = &self.field else { return Vec::new() };
        let lines = trace_all(&self.mesh, field, &seeds(&self.mesh, count), &TraceOptions::default());
        let mut out = Vec::new();
        for line in lines {
            for p in &line.points {
                out.extend([p[0], p[1]]);
            }
            out.extend([f64::NAN, f64::NAN]);
        }
        out
    }
}

#[wasm_bindgen]
pub struct Demo {
    scene: Scene,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(rings: usize, sectors: usize) -> Demo {
        Demo { scene: Scene::new(rings, sectors) }
    }

    /// Vertex positions as x, y pairs.
    pub fn vertices(&self) -> Vec<f64> {
        self.scene.mesh.positions().iter().flat_map(|p| [p[0], p[1]]).collect()
    }

    pub fn triangles(&self) -> Vec<u32> {
        self.scene.mesh.faces().iter().flatten().map(|&v| v as u32).collect()
    }

    /// Placed singularities as x, y, index triples.
    pub fn singularities(&self) -> Vec<f64> {
        let m = &self.scene.mesh;
        self.scene
            .placed
            .iter()
            .flat_map(|s| {
                let p = m.local_to_world(s.face, m.bary_to_local(s.face, s.bary));
                [p[0], p[1], s.index as f64]
            })
            .collect()
    }

    pub fn toggle(&mut self, x: f64, y: f64, index: i32) -> bool {
        self.scene.toggle(x, y, index as i64)
    }

    pub fn clear(&mut self) {
        self.scene.clear();
    }

    pub fn set_n(&mut self, n: u32) {
        self.scene.set_n(n);
    }

    /// Solves and returns a JSON summary.
    pub fn solve(&mut self) -> Result<String, JsError> {
        let summary = self.scene.solve().map_err(|e| JsError::new(&e))?;
        serde_json::to_string(&summary).map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn glyphs(&self) -> Vec<f64> {
        self.scene.glyphs()
    }

    pub fn streamlines(&self, count: usize) -> Vec<f64> {
        self.scene.streamlines(count)
    }
}
