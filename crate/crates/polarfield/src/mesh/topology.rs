//! Boundary loops and homology generators (tree–cotree).

use super::SurfaceMesh;
use std::collections::VecDeque;
use std::f64::consts::PI;

/// A boundary cycle with the surface on its left.
#[derive(Clone, Debug)]
pub struct BoundaryLoop {
    /// Boundary halfedges in traversal order.
    pub halfedges: Vec<usize>,
    /// Σ over loop vertices of (π − Σα).
    pub curvature: f64,
}

/// Closed oriented loop of primal edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeLoop {
    /// `(edge, forward)`; forward means along the edge's first halfedge.
    pub steps: Vec<(usize, bool)>,
    /// `vertices[i]` is the source of step `i`.
    pub vertices: Vec<usize>,
}

impl SurfaceMesh {
    pub fn boundary_loops(&self) -> Vec<BoundaryLoop> {
        let mut seen = vec![false; self.n_halfedges()];
        let mut loops = Vec::new();
        for start in 0..self.n_halfedges() {
            if seen[start] || self.twin(start).is_some() {
                continue;
            }
            let mut halfedges = Vec::new();
            let mut h = start;
            loop {
                seen[h] = true;
                halfedges.push(h);
                // rotate clockwise around the target to the next boundary halfedge
                let mut c = Self::next(h);
                while let Some(t) = self.twin(c) {
                    c = Self::next(t);
                }
                h = c;
                if h == start {
                    break;
                }
            }
            let curvature = halfedges.iter().map(|&h| PI - self.angle_sum(self.source(h))).sum();
            loops.push(BoundaryLoop { halfedges, curvature });
        }
        loops
    }

    /// Genus of the (possibly bounded) surface, summed over components.
    pub fn genus(&self) -> usize {
        let (_, comps) = self.face_components();
        let b = self.boundary_loops().len() as i64;
        let g2 = 2 * comps as i64 - self.euler_characteristic() - b;
        (g2 / 2) as usize
    }

    /// 2g non-contractible loops from a primal spanning tree and a dual spanning tree
    /// in which each boundary loop is capped by a virtual face.
    pub fn homology_generators(&self) -> Vec<EdgeLoop> {
        let nv = self.n_vertices();
        let ne = self.n_edges();
        let mut vertex_edges: Vec<Vec<usize>> = vec![Vec::new(); nv];
        for (e, edge) in self.edges().iter().enumerate() {
            vertex_edges[edge.vertices[0]].push(e);
            vertex_edges[edge.vertices[1]].push(e);
        }

        // Primal tree, 0-1 BFS so that boundary edges are used only when needed.
        let mut parent_edge = vec![usize::MAX; nv];
        let mut parent = vec![usize::MAX; nv];
        let mut depth = vec![usize::MAX; nv];
        let mut in_tree = vec![false; ne];
        let mut done = vec![false; nv];
        for root in 0..nv {
            if depth[root] != usize::MAX {
                continue;
            }
            depth[root] = 0;
            let mut queue = VecDeque::from([(root, 0usize)]);
            let mut best = std::collections::HashMap::new();
            best.insert(root, 0usize);
            while let Some((v, d)) = queue.pop_front() {
                if done[v] {
                    continue;
                }
                done[v] = true;
                if v != root {
                    in_tree[parent_edge[v]] = true;
                    depth[v] = depth[parent[v]] + 1;
                }
                for &e in &vertex_edges[v] {
                    let edge = self.edge(e);
                    let w = if edge.vertices[0] == v { edge.vertices[1] } else { edge.vertices[0] };
                    if done[w] {
                        continue;
                    }
                    let step = usize::from(self.is_boundary_edge(e));
                    let nd = d + step;
                    if best.get(&w).is_none_or(|&b| nd < b) {
                        best.insert(w, nd);
                        parent[w] = v;
                        parent_edge[w] = e;
                        if step == 0 {
                            queue.push_front((w, nd));
                        } else {
                            queue.push_back((w, nd));
                        }
                    }
                }
            }
        }

        // Dual tree over faces plus one node per boundary loop.
        let nf = self.n_faces();
        let loops = self.boundary_loops();
        let mut loop_of = vec![usize::MAX; self.n_halfedges()];
        for (b, l) in loops.iter().enumerate() {
            for &h in &l.halfedges {
                loop_of[h] = b;
            }
        }
        let dual_neighbor = |e: usize, node: usize| -> usize {
            let edge = self.edge(e);
            let f = edge.halfedge / 3;
            match edge.twin {
                Some(t) => {
                    if node == f {
                        t / 3
                    } else {
                        f
                    }
                }
                None => {
                    let virt = nf + loop_of[edge.halfedge];
                    if node == f {
                        virt
                    } else {
                        f
                    }
                }
            }
        };
        let mut node_edges: Vec<Vec<usize>> = vec![Vec::new(); nf + loops.len()];
        for e in 0..ne {
            if in_tree[e] {
                continue;
            }
            let f = self.edge(e).halfedge / 3;
            node_edges[f].push(e);
            node_edges[dual_neighbor(e, f)].push(e);
        }
        let mut in_cotree = vec![false; ne];
        let mut visited = vec![false; nf + loops.len()];
        for root in 0..nf + loops.len() {
            if visited[root] {
                continue;
            }
            visited[root] = true;
            let mut queue = VecDeque::from([root]);
            while let Some(n) = queue.pop_front() {
                for &e in &node_edges[n] {
                    let m = dual_neighbor(e, n);
                    if !visited[m] {
                        visited[m] = true;
                        in_cotree[e] = true;
                        queue.push_back(m);
                    }
                }
            }
        }

        let mut gens = Vec::new();
        for e in 0..ne {
            if in_tree[e] || in_cotree[e] {
                continue;
            }
            let [a, b] = self.edge(e).vertices;
            // tree paths from b and a up to their common ancestor
            let (mut x, mut y) = (b, a);
            let mut up_from_b = Vec::new();
            let mut up_from_a = Vec::new();
            while depth[x] > depth[y] {
                up_from_b.push(x);
                x = parent[x];
            }
            while depth[y] > depth[x] {
                up_from_a.push(y);
                y = parent[y];
            }
            while x != y {
                up_from_b.push(x);
                x = parent[x];
                up_from_a.push(y);
                y = parent[y];
            }
            let mut steps = vec![(e, true)];
            let mut vertices = vec![a];
            let mut push_step = |from: usize, to: usize, edge: usize| {
                let forward = self.edge(edge).vertices == [from, to];
                steps.push((edge, forward));
                vertices.push(from);
            };
            for &v in &up_from_b {
                push_step(v, parent[v], parent_edge[v]);
            }
            for &v in up_from_a.iter().rev() {
                push_step(parent[v], v, parent_edge[v]);
            }
            gens.push(EdgeLoop { steps, vertices });
        }
        gens
    }
}
