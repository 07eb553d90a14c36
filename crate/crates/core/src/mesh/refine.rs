//! Local refinement by longest-edge bisection (Rivara's LEPP scheme).
//!
//! A triangle is refined by bisecting its longest edge; when the neighbour across that edge has
//! a longer edge of its own, the neighbour is refined first, so the mesh stays conforming and
//! angles never drop below half of the initial minimum.

use std::collections::HashMap;

use super::{edge_key, geodesic::graph_distance, Ambient, IntrinsicMesh, Region, VertexOrigin};
use crate::error::{Error, Result};

struct Work {
    coords: Option<Vec<[f64; 3]>>,
    ambient: Ambient,
    origin: Vec<VertexOrigin>,
    tris: Vec<Option<[usize; 3]>>,
    regions: Vec<Region>,
    lengths: HashMap<[usize; 2], f64>,
    half: HashMap<(usize, usize), usize>,
    next_refined: u32,
}

impl Work {
    fn len(&self, a: usize, b: usize) -> f64 {
        self.lengths[&edge_key(a, b)]
    }

    /// Local index of the vertex opposite the longest edge (ties broken by vertex ids).
    fn longest(&self, t: usize) -> usize {
        let tri = self.tris[t].unwrap();
        let key = |i: usize| {
            let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            (self.len(a, b), edge_key(a, b))
        };
        let mut best = 0;
        for i in 1..3 {
            let (l, k) = key(i);
            let (lb, kb) = key(best);
            if l > lb || (l == lb && k < kb) {
                best = i;
            }
        }
        best
    }

    fn neighbor(&self, t: usize, i: usize) -> Option<usize> {
        let tri = self.tris[t].unwrap();
        let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
        self.half.get(&(b, a)).copied()
    }

    fn add_tri(&mut self, tri: [usize; 3], region: Region) -> usize {
        let t = self.tris.len();
        self.tris.push(Some(tri));
        self.regions.push(region);
        for i in 0..3 {
            self.half.insert((tri[i], tri[(i + 1) % 3]), t);
        }
        t
    }

    fn kill(&mut self, t: usize) {
        let tri = self.tris[t].take().unwrap();
        for i in 0..3 {
            self.half.remove(&(tri[i], tri[(i + 1) % 3]));
        }
    }

    fn new_vertex(&mut self, a: usize, b: usize) -> usize {
        let v = self.origin.len();
        self.origin.push(VertexOrigin::Refined(self.next_refined));
        self.next_refined += 1;
        if let Some(c) = &mut self.coords {
            let (p, q) = (c[a], c[b]);
            let m = match self.ambient {
                Ambient::Sphere => {
                    let s = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
                    let n = (s[0] * s[0] + s[1] * s[1] + s[2] * s[2]).sqrt();
                    [s[0] / n, s[1] / n, s[2] / n]
                }
                Ambient::FlatTorus { lx, ly } => {
                    let dx = q[0] - p[0] - lx * ((q[0] - p[0]) / lx).round();
                    let dy = q[1] - p[1] - ly * ((q[1] - p[1]) / ly).round();
                    [
                        (p[0] + 0.5 * dx).rem_euclid(lx),
                        (p[1] + 0.5 * dy).rem_euclid(ly),
                        0.0,
                    ]
                }
                Ambient::Doubled => [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), p[2].max(q[2])],
                _ => [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1]), 0.5 * (p[2] + q[2])],
            };
            c.push(m);
        }
        v
    }

    fn set_len(&mut self, a: usize, b: usize, fallback: f64) {
        let l = match (&self.coords, self.ambient.is_embedded()) {
            (Some(c), true) => self.ambient.distance(c[a], c[b]).unwrap_or(fallback),
            _ => fallback,
        };
        self.lengths.insert(edge_key(a, b), l);
    }

    /// Bisects edge (a, b), splitting the one or two triangles on it.
    fn bisect(&mut self, a: usize, b: usize) {
        let lab = self.len(a, b);
        let m = self.new_vertex(a, b);
        self.set_len(a, m, 0.5 * lab);
        self.set_len(m, b, 0.5 * lab);
        for (u, w) in [(a, b), (b, a)] {
            let Some(&t) = self.half.get(&(u, w)) else {
                continue;
            };
            let tri = self.tris[t].unwrap();
            let i = (0..3).find(|&i| tri[i] == u).unwrap();
            let c = tri[(i + 2) % 3];
            let (luc, lwc) = (self.len(u, c), self.len(w, c));
            // Stewart: median from c onto the edge uw
            let med = (0.5 * luc * luc + 0.5 * lwc * lwc - 0.25 * lab * lab).max(0.0).sqrt();
            self.set_len(m, c, med);
            let region = self.regions[t];
            self.kill(t);
            self.add_tri([u, m, c], region);
            self.add_tri([m, w, c], region);
        }
    }

    /// Longest-edge propagation path refinement of triangle `t`.
    fn refine(&mut self, t: usize) {
        let mut stack = vec![t];
        while let Some(&top) = stack.last() {
            if self.tris[top].is_none() {
                stack.pop();
                continue;
            }
            let i = self.longest(top);
            match self.neighbor(top, i) {
                Some(nb) if self.longest(nb) != self.opposite_local(nb, top) => {
                    stack.push(nb);
                }
                _ => {
                    let tri = self.tris[top].unwrap();
                    self.bisect(tri[(i + 1) % 3], tri[(i + 2) % 3]);
                    stack.pop();
                }
            }
        }
    }

    /// Local index in `t` of the vertex opposite the edge shared with `other`.
    fn opposite_local(&self, t: usize, other: usize) -> usize {
        (0..3).find(|&i| self.neighbor(t, i) == Some(other)).unwrap()
    }
}

/// Refines every triangle with a vertex within `radius` of vertex `center` until its longest
/// edge is at most `1.5 * h_local`. Distances are measured in the ambient space when the mesh
/// is embedded and along mesh edges otherwise.
pub fn refine_near(mesh: &IntrinsicMesh, center: usize, radius: f64, h_local: f64) -> Result<IntrinsicMesh> {
    if center >= mesh.n_vertices() {
        return Err(Error::InvalidArgument(format!("vertex {center} out of range")));
    }
    if !(h_local > 0.0 && radius >= 0.0) {
        return Err(Error::InvalidArgument(format!("h_local = {h_local}, radius = {radius}")));
    }
    let mut w = Work {
        coords: mesh.coords().map(|c| c.to_vec()),
        ambient: mesh.ambient(),
        origin: mesh.origin().to_vec(),
        tris: Vec::new(),
        regions: Vec::new(),
        lengths: mesh
            .edges()
            .iter()
            .zip(mesh.edge_lengths())
            .map(|(&e, &l)| (e, l))
            .collect(),
        half: HashMap::new(),
        next_refined: 0,
    };
    // continue numbering after refined vertices already present
    w.next_refined = mesh
        .origin()
        .iter()
        .filter_map(|o| match o {
            VertexOrigin::Refined(k) => Some(k + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    for (t, &tri) in mesh.triangles().iter().enumerate() {
        w.add_tri(tri, mesh.region(t));
    }
    let embedded = mesh.ambient().is_embedded() && mesh.coords().is_some();
    let graph = if embedded { Vec::new() } else { graph_distance(mesh, &[(center, 0.0)]) };
    let limit = 1.5 * h_local;
    let mut dist: Vec<f64> = (0..mesh.n_vertices())
        .map(|v| {
            if embedded {
                let c = mesh.coords().unwrap();
                mesh.ambient().distance(c[center], c[v]).unwrap()
            } else {
                graph[v]
            }
        })
        .collect();
    loop {
        // new vertices inherit the smaller distance of their parents (sound for ball tests)
        while dist.len() < w.origin.len() {
            let v = dist.len();
            let d = if embedded {
                let c = w.coords.as_ref().unwrap();
                w.ambient.distance(c[center], c[v]).unwrap()
            } else {
                // bounded by the distance of any neighbour plus edge length
                w.half
                    .keys()
                    .filter(|&&(a, _)| a == v)
                    .map(|&(_, b)| if b < v { dist[b] + w.len(v, b) } else { f64::INFINITY })
                    .fold(f64::INFINITY, f64::min)
            };
            dist.push(d);
        }
        let target = (0..w.tris.len()).find(|&t| match w.tris[t] {
            Some(tri) => {
                tri.iter().any(|&v| dist[v] <= radius) && {
                    let i = w.longest(t);
                    w.len(tri[(i + 1) % 3], tri[(i + 2) % 3]) > limit
                }
            }
            None => false,
        });
        match target {
            Some(t) => w.refine(t),
            None => break,
        }
    }
    let mut tris = Vec::new();
    let mut regions = Vec::new();
    for (t, tri) in w.tris.iter().enumerate() {
        if let Some(tri) = tri {
            tris.push(*tri);
            regions.push(w.regions[t]);
        }
    }
    IntrinsicMesh::from_lengths(
        w.origin.len(),
        tris,
        regions,
        &w.lengths,
        w.coords,
        w.ambient,
        Some(w.origin),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rectangle, build_sphere};

    #[test]
    fn unchanged_at_native_size() {
        let m = build_rectangle(1.0, 1.0, 0.1).unwrap();
        let r = refine_near(&m, 0, 0.3, 0.1).unwrap();
        assert_eq!(r.n_triangles(), m.n_triangles());
    }

    #[test]
    fn halving_near_center() {
        let h = 0.1;
        let m = build_rectangle(1.0, 1.0, h).unwrap();
        let c = m
            .coords()
            .unwrap()
            .iter()
            .position(|p| (p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12)
            .unwrap();
        let r = refine_near(&m, c, 0.2, h / 2.0).unwrap();
        assert!((r.total_area() - 1.0).abs() < 1e-12);
        let coords = r.coords().unwrap();
        for t in 0..r.n_triangles() {
            let tri = r.triangles()[t];
            let near = tri.iter().any(|&v| {
                let p = coords[v];
                ((p[0] - 0.5).powi(2) + (p[1] - 0.5).powi(2)).sqrt() <= 0.2
            });
            if near {
                let l = r.triangle_lengths(t);
                assert!(l.iter().cloned().fold(0.0, f64::max) <= 0.75 * h + 1e-12);
            }
        }
        assert!(r.quality().min_angle >= 20f64.to_radians());
    }

    #[test]
    fn sphere_refinement_stays_on_sphere() {
        let m = build_sphere(2).unwrap();
        let r = refine_near(&m, 0, 0.3, 0.05).unwrap();
        assert_eq!(r.euler_characteristic(), 2);
        for p in r.coords().unwrap() {
            assert!(((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt() - 1.0).abs() < 1e-14);
        }
    }
}
