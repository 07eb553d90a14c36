//! Approximate geodesic distance fields on intrinsic meshes.
//!
//! Dijkstra over vertices where, besides edge relaxation, a vertex can be reached through a
//! triangle whose other two vertices are already settled: the triangle is laid out in the plane
//! and the distance is taken from the virtual point source consistent with both known values
//! (the update used by fast marching). On flat regions this is exact for point sources seen
//! across a single triangle fan and first-order accurate otherwise.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::IntrinsicMesh;
use crate::geom::{layout, point_segment_dist2};

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.0.total_cmp(&self.0).then_with(|| o.1.cmp(&self.1))
    }
}

/// Distance from a set of seeded vertices, with unfolding updates.
pub fn distance_field(mesh: &IntrinsicMesh, seeds: &[(usize, f64)]) -> Vec<f64> {
    run(mesh, seeds, true)
}

/// Plain shortest-path distance along mesh edges.
pub fn graph_distance(mesh: &IntrinsicMesh, seeds: &[(usize, f64)]) -> Vec<f64> {
    run(mesh, seeds, false)
}

fn run(mesh: &IntrinsicMesh, seeds: &[(usize, f64)], unfold: bool) -> Vec<f64> {
    let n = mesh.n_vertices();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for &(v, d) in seeds {
        if d < dist[v] {
            dist[v] = d;
            heap.push(Entry(d, v));
        }
    }
    let nb = mesh.vertex_neighbors();
    let vt = if unfold { mesh.vertex_triangles() } else { Vec::new() };
    let lengths = mesh.edge_lengths();
    while let Some(Entry(d, v)) = heap.pop() {
        if done[v] || d > dist[v] {
            continue;
        }
        done[v] = true;
        for &u in &nb[v] {
            if done[u] {
                continue;
            }
            let l = lengths[mesh.edge_index(u, v).unwrap()];
            if d + l < dist[u] {
                dist[u] = d + l;
                heap.push(Entry(dist[u], u));
            }
        }
        if !unfold {
            continue;
        }
        for &t in &vt[v] {
            let tri = mesh.triangles()[t];
            let i = tri.iter().position(|&x| x == v).unwrap();
            let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            for (known, target) in [(a, b), (b, a)] {
                if !done[known] || done[target] {
                    continue;
                }
                let cand = unfold_update(mesh, v, known, target, dist[v], dist[known]);
                if cand < dist[target] {
                    dist[target] = cand;
                    heap.push(Entry(cand, target));
                }
            }
        }
    }
    dist
}

/// Distance at `c` from a virtual source at distances `da`, `db` from `a`, `b`.
fn unfold_update(mesh: &IntrinsicMesh, a: usize, b: usize, c: usize, da: f64, db: f64) -> f64 {
    let lab = mesh.edge_length(a, b).unwrap();
    let lac = mesh.edge_length(a, c).unwrap();
    let lbc = mesh.edge_length(b, c).unwrap();
    let edge_only = (da + lac).min(db + lbc);
    // a at origin, b on +x, c above
    let [_, _, pc] = layout(lab, lac, lbc);
    // source below the ab line
    let x = (da * da - db * db + lab * lab) / (2.0 * lab);
    let y2 = da * da - x * x;
    if y2 < 0.0 {
        return edge_only;
    }
    let s = [x, -y2.sqrt()];
    // the straight ray from s to c must cross the segment ab
    let t = -s[1] / (pc[1] - s[1]);
    let xc = s[0] + t * (pc[0] - s[0]);
    if !(0.0..=lab).contains(&xc) {
        return edge_only;
    }
    let d = ((pc[0] - s[0]).powi(2) + (pc[1] - s[1]).powi(2)).sqrt();
    d.min(edge_only)
}

/// Seeds for the distance to a collection of segments, each lying inside a triangle.
/// `segments[i] = (tri, p, q)` where `p`, `q` are barycentric coordinates.
pub fn segment_seeds(mesh: &IntrinsicMesh, segments: &[(usize, [f64; 3], [f64; 3])]) -> Vec<(usize, f64)> {
    let mut seeds = Vec::with_capacity(segments.len() * 3);
    for &(t, p, q) in segments {
        let tri = mesh.triangles()[t];
        let l = mesh.triangle_lengths(t);
        // l[i] is opposite local vertex i
        let pts = layout(l[2], l[1], l[0]);
        let bary = |w: [f64; 3]| {
            [
                w[0] * pts[0][0] + w[1] * pts[1][0] + w[2] * pts[2][0],
                w[0] * pts[0][1] + w[1] * pts[1][1] + w[2] * pts[2][1],
            ]
        };
        let (pp, qq) = (bary(p), bary(q));
        for i in 0..3 {
            seeds.push((tri[i], point_segment_dist2(pts[i], pp, qq)));
        }
    }
    seeds
}

/// Largest finite distance between any two vertices, computed by running the edge-graph
/// Dijkstra from every vertex in `sources` (all vertices when `None`).
pub fn graph_diameter(mesh: &IntrinsicMesh, sources: Option<&[usize]>, targets: Option<&[usize]>) -> f64 {
    let all: Vec<usize>;
    let src = match sources {
        Some(s) => s,
        None => {
            all = (0..mesh.n_vertices()).collect();
            &all
        }
    };
    let mut best: f64 = 0.0;
    for &s in src {
        let d = graph_distance(mesh, &[(s, 0.0)]);
        let m = match targets {
            Some(t) => t.iter().map(|&v| d[v]).fold(0.0, f64::max),
            None => d.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max),
        };
        best = best.max(m);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_rectangle;

    #[test]
    fn planar_point_source_is_accurate() {
        let m = build_rectangle(1.0, 1.0, 1.0 / 32.0).unwrap();
        let c = m.coords().unwrap().to_vec();
        let src = c
            .iter()
            .position(|p| (p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12)
            .unwrap();
        let d = distance_field(&m, &[(src, 0.0)]);
        let g = graph_distance(&m, &[(src, 0.0)]);
        let mut worst: f64 = 0.0;
        let mut worst_graph: f64 = 0.0;
        for (v, p) in c.iter().enumerate() {
            let exact = ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt();
            worst = worst.max(d[v] - exact);
            worst_graph = worst_graph.max(g[v] - exact);
            assert!(d[v] >= exact - 1e-12);
        }
        assert!(worst < 0.02, "unfolded error {worst}");
        assert!(worst < worst_graph);
    }

    #[test]
    fn segment_seed_distances() {
        let m = build_rectangle(1.0, 1.0, 0.25).unwrap();
        // segment across triangle 0 from vertex 0 to the midpoint of the opposite edge
        let seeds = segment_seeds(&m, &[(0, [1.0, 0.0, 0.0], [0.0, 0.5, 0.5])]);
        assert_eq!(seeds.len(), 3);
        assert!(seeds[0].1.abs() < 1e-15);
    }
}
