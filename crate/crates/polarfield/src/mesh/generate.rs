//! Procedural test surfaces.

use super::SurfaceMesh;
use std::collections::HashMap;
use std::f64::consts::PI;

fn build(positions: Vec<[f64; 3]>, faces: Vec<[usize; 3]>) -> SurfaceMesh {
    SurfaceMesh::new(positions, faces).expect("generated mesh is valid")
}

pub fn tetrahedron() -> SurfaceMesh {
    let p = vec![[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];
    build(p, vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
}

pub fn octahedron() -> SurfaceMesh {
    let p = vec![
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let f = vec![[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4], [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]];
    build(p, f)
}

pub fn cube() -> SurfaceMesh {
    let mut p = Vec::new();
    for i in 0..8 {
        p.push([(i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64]);
    }
    let quads = [[0, 2, 3, 1], [4, 5, 7, 6], [0, 1, 5, 4], [2, 6, 7, 3], [0, 4, 6, 2], [1, 3, 7, 5]];
    let mut f = Vec::new();
    for q in quads {
        f.push([q[0], q[1], q[2]]);
        f.push([q[0], q[2], q[3]]);
    }
    build(p, f)
}

fn icosahedron_data() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let p = raw.iter().map(|&v| normalize(v)).collect();
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (p, f)
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

pub fn icosahedron() -> SurfaceMesh {
    let (p, f) = icosahedron_data();
    build(p, f)
}

/// Unit sphere from `level` midpoint subdivisions of the icosahedron (20·4^level faces).
/// Earlier vertices keep their indices at every level.
pub fn icosphere(level: usize) -> SurfaceMesh {
    let (mut p, mut f) = icosahedron_data();
    for _ in 0..level {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut nf = Vec::with_capacity(4 * f.len());
        for tri in &f {
            let mut m = [0; 3];
            for c in 0..3 {
                let (a, b) = (tri[c], tri[(c + 1) % 3]);
                let key = (a.min(b), a.max(b));
                m[c] = *mid.entry(key).or_insert_with(|| {
                    let (x, y) = (p[a], p[b]);
                    p.push(normalize([x[0] + y[0], x[1] + y[1], x[2] + y[2]]));
                    p.len() - 1
                });
            }
            nf.push([tri[0], m[0], m[2]]);
            nf.push([tri[1], m[1], m[0]]);
            nf.push([tri[2], m[2], m[1]]);
            nf.push(m);
        }
        f = nf;
    }
    build(p, f)
}

/// Torus of revolution with `nu × nv` quads, each split into two triangles.
pub fn torus(nu: usize, nv: usize, major: f64, minor: f64) -> SurfaceMesh {
    let mut p = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * PI * j as f64 / nv as f64;
            let r = major + minor * v.cos();
            p.push([r * u.cos(), r * u.sin(), minor * v.sin()]);
        }
    }
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut f = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build(p, f)
}

/// Flat `width × height` rectangle in the xy-plane with `nx × ny` split quads.
pub fn grid(nx: usize, ny: usize, width: f64, height: f64) -> SurfaceMesh {
    let mut p = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            p.push([width * i as f64 / nx as f64, height * j as f64 / ny as f64, 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut f = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    build(p, f)
}

/// Flat disk: a centre vertex and `rings` concentric rings of `sectors` vertices.
pub fn disk(rings: usize, sectors: usize, radius: f64) -> SurfaceMesh {
    let mut p = vec![[0.0, 0.0, 0.0]];
    for r in 1..=rings {
        let rad = radius * r as f64 / rings as f64;
        // stagger alternate rings to avoid long thin quads
        let shift = if r % 2 == 0 { 0.5 } else { 0.0 };
        for s in 0..sectors {
            let a = 2.0 * PI * (s as f64 + shift) / sectors as f64;
            p.push([rad * a.cos(), rad * a.sin(), 0.0]);
        }
    }
    let id = |r: usize, s: usize| 1 + (r - 1) * sectors + s % sectors;
    let mut f = Vec::new();
    for s in 0..sectors {
        f.push([0, id(1, s), id(1, s + 1)]);
    }
    for r in 1..rings {
        ring_strip(&mut f, |s| id(r, s), |s| id(r + 1, s), sectors, r % 2 == 1);
    }
    build(p, f)
}

/// Triangulates the band between an inner and an outer ring, both counterclockwise.
fn ring_strip(
    f: &mut Vec<[usize; 3]>,
    inner: impl Fn(usize) -> usize,
    outer: impl Fn(usize) -> usize,
    sectors: usize,
    outer_shifted: bool,
) {
    for s in 0..sectors {
        if outer_shifted {
            // outer vertex s sits between inner s and s+1
            f.push([inner(s), outer(s), inner(s + 1)]);
            f.push([inner(s + 1), outer(s), outer(s + 1)]);
        } else {
            // inner vertex s sits between outer s and s+1
            f.push([inner(s), outer(s + 1), inner(s + 1)]);
            f.push([inner(s), outer(s), outer(s + 1)]);
        }
    }
}

/// Flat annulus between radii `inner` and `outer` with `rings` bands.
pub fn annulus(rings: usize, sectors: usize, inner: f64, outer: f64) -> SurfaceMesh {
    let mut p = Vec::new();
    for r in 0..=rings {
        let rad = inner + (outer - inner) * r as f64 / rings as f64;
        let shift = if r % 2 == 1 { 0.5 } else { 0.0 };
        for s in 0..sectors {
            let a = 2.0 * PI * (s as f64 + shift) / sectors as f64;
            p.push([rad * a.cos(), rad * a.sin(), 0.0]);
        }
    }
    let id = |r: usize, s: usize| r * sectors + s % sectors;
    let mut f = Vec::new();
    for r in 0..rings {
        ring_strip(&mut f, |s| id(r, s), |s| id(r + 1, s), sectors, r % 2 == 0);
    }
    build(p, f)
}

/// Closed surface bounding a union of unit voxels; each voxel face is split into
/// `res × res` quads. The voxel set must not touch itself only along edges or corners.
pub fn voxel_surface(voxels: &[[i64; 3]], res: usize) -> SurfaceMesh {
    let set: std::collections::HashSet<[i64; 3]> = voxels.iter().copied().collect();
    let n = res as i64;
    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut p = Vec::new();
    let mut f = Vec::new();
    let mut vid = |q: [i64; 3], p: &mut Vec<[f64; 3]>| -> usize {
        *index.entry(q).or_insert_with(|| {
            p.push([q[0] as f64 / n as f64, q[1] as f64 / n as f64, q[2] as f64 / n as f64]);
            p.len() - 1
        })
    };
    for vox in voxels {
        for axis in 0..3 {
            for sign in [1i64, -1] {
                let mut nb = *vox;
                nb[axis] += sign;
                if set.contains(&nb) {
                    continue;
                }
                let (t1, t2) = ((axis + 1) % 3, (axis + 2) % 3);
                for a in 0..n {
                    for b in 0..n {
                        let corner = |da: i64, db: i64| {
                            let mut q = [vox[0] * n, vox[1] * n, vox[2] * n];
                            q[axis] += if sign > 0 { n } else { 0 };
                            q[t1] += a + da;
                            q[t2] += b + db;
                            q
                        };
                        let mut quad = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                        if sign < 0 {
                            quad.reverse();
                        }
                        let ids = quad.map(|q| vid(q, &mut p));
                        f.push([ids[0], ids[1], ids[2]]);
                        f.push([ids[0], ids[2], ids[3]]);
                    }
                }
            }
        }
    }
    build(p, f)
}

/// Genus-2 slab: a 5×3 block of voxels with two holes punched through.
pub fn double_torus(res: usize) -> SurfaceMesh {
    let mut v = Vec::new();
    for x in 0..5 {
        for y in 0..3 {
            if !(y == 1 && (x == 1 || x == 3)) {
                v.push([x, y, 0]);
            }
        }
    }
    voxel_surface(&v, res)
}

/// Applies `map` to every vertex position, keeping connectivity.
pub fn map_positions(mesh: &SurfaceMesh, map: impl Fn([f64; 3]) -> [f64; 3]) -> SurfaceMesh {
    build(mesh.positions().iter().map(|&p| map(p)).collect(), mesh.faces().to_vec())
}
