//! Intrinsic triangle meshes: connectivity plus one length per edge.
//!
//! The edge lengths are the metric. Vertex coordinates, when present, are only used to place
//! new vertices during construction and refinement and for plotting.

mod ambient;
pub mod build;
pub mod geodesic;
pub mod io;
pub mod patch;
pub mod refine;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

pub use ambient::{great_circle, Ambient, Chart};
pub use build::{
    build_disk, build_flat_torus, build_genus_surface, build_polygon, build_polygon_with_holes,
    build_rectangle, build_socket, build_sphere, circle_polygon,
};
pub use patch::{carve_patches, remove_geodesic_ball, CarvedMesh, PatchSpec};
pub use refine::refine_near;

use crate::error::{Error, Result};
use crate::geom::{angle_opposite, heron};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Region {
    M1Bulk,
    M1Collar,
    M2,
    Neck,
    Omega1,
    Omega2,
}

impl Region {
    pub const ALL: [Region; 6] = [
        Region::M1Bulk,
        Region::M1Collar,
        Region::M2,
        Region::Neck,
        Region::Omega1,
        Region::Omega2,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Region::M1Bulk => "M1_BULK",
            Region::M1Collar => "M1_COLLAR",
            Region::M2 => "M2",
            Region::Neck => "NECK",
            Region::Omega1 => "OMEGA1",
            Region::Omega2 => "OMEGA2",
        }
    }

    pub fn parse(s: &str) -> Option<Region> {
        Region::ALL.iter().copied().find(|r| r.tag() == s)
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Provenance of a vertex. Used to match vertices between meshes that share a common
/// ancestor, e.g. a reference surface and the same surface after surgery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VertexOrigin {
    Base(u32),
    Ring {
        patch: u16,
        radius_bits: u64,
        index: u32,
    },
    Center {
        patch: u16,
    },
    Refined(u32),
    Attached(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionQuality {
    pub region: Region,
    pub min_angle: f64,
    pub max_edge: f64,
    pub triangles: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshQuality {
    /// Smallest interior angle over the whole mesh, radians.
    pub min_angle: f64,
    pub max_edge: f64,
    pub per_region: Vec<RegionQuality>,
    /// Interior edges whose cotangent weight is negative (non-Delaunay).
    pub negative_cotan_edges: usize,
}

#[derive(Debug, Clone)]
pub struct IntrinsicMesh {
    n_vertices: usize,
    coords: Option<Vec<[f64; 3]>>,
    ambient: Ambient,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
    edges: Vec<[usize; 2]>,
    lengths: Vec<f64>,
    edge_map: HashMap<[usize; 2], usize>,
    /// `tri_edges[t][i]` is the edge opposite local vertex `i`.
    tri_edges: Vec<[usize; 3]>,
    edge_tris: Vec<[Option<usize>; 2]>,
    boundary_loops: Vec<Vec<usize>>,
    origin: Vec<VertexOrigin>,
}

#[inline]
pub(crate) fn edge_key(a: usize, b: usize) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

impl IntrinsicMesh {
    /// Builds a mesh whose edge lengths are measured in the ambient space.
    pub fn from_coords(
        coords: Vec<[f64; 3]>,
        ambient: Ambient,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
    ) -> Result<Self> {
        let n = coords.len();
        let origin = (0..n as u32).map(VertexOrigin::Base).collect();
        Self::from_coords_with_origin(coords, ambient, triangles, regions, origin)
    }

    pub fn from_coords_with_origin(
        coords: Vec<[f64; 3]>,
        ambient: Ambient,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        origin: Vec<VertexOrigin>,
    ) -> Result<Self> {
        if !ambient.is_embedded() {
            return Err(Error::NotEmbedded);
        }
        let n = coords.len();
        let c = coords.clone();
        Self::assemble_parts(
            n,
            Some(coords),
            ambient,
            triangles,
            regions,
            origin,
            |a, b| ambient.distance(c[a], c[b]),
        )
    }

    /// Builds a mesh from explicit edge lengths.
    pub fn from_lengths(
        n_vertices: usize,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        lengths: &HashMap<[usize; 2], f64>,
        coords: Option<Vec<[f64; 3]>>,
        ambient: Ambient,
        origin: Option<Vec<VertexOrigin>>,
    ) -> Result<Self> {
        let origin =
            origin.unwrap_or_else(|| (0..n_vertices as u32).map(VertexOrigin::Base).collect());
        Self::assemble_parts(
            n_vertices,
            coords,
            ambient,
            triangles,
            regions,
            origin,
            |a, b| {
                lengths
                    .get(&edge_key(a, b))
                    .copied()
                    .ok_or_else(|| Error::InvalidMesh(format!("missing length for edge {a}-{b}")))
            },
        )
    }

    fn assemble_parts<F>(
        n: usize,
        coords: Option<Vec<[f64; 3]>>,
        ambient: Ambient,
        triangles: Vec<[usize; 3]>,
        regions: Vec<Region>,
        origin: Vec<VertexOrigin>,
        mut length_of: F,
    ) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Result<f64>,
    {
        if regions.len() != triangles.len() {
            return Err(Error::InvalidMesh(format!(
                "{} region tags for {} triangles",
                regions.len(),
                triangles.len()
            )));
        }
        if origin.len() != n {
            return Err(Error::InvalidMesh("origin table size mismatch".into()));
        }
        if let Some(c) = &coords {
            if c.len() != n {
                return Err(Error::InvalidMesh("coordinate count mismatch".into()));
            }
        }
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let mut used = vec![false; n];
        let mut half: HashMap<(usize, usize), usize> = HashMap::with_capacity(triangles.len() * 3);
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_map: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edge_tris: Vec<[Option<usize>; 2]> = Vec::new();
        let mut tri_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = *tri;
            if a >= n || b >= n || c >= n {
                return Err(Error::InvalidMesh(format!("triangle {t} has out-of-range vertex")));
            }
            if a == b || b == c || a == c {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            used[a] = true;
            used[b] = true;
            used[c] = true;
            let mut te = [0usize; 3];
            for i in 0..3 {
                let u = tri[(i + 1) % 3];
                let v = tri[(i + 2) % 3];
                if half.insert((u, v), t).is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "half-edge {u}->{v} used twice (inconsistent orientation or non-manifold edge)"
                    )));
                }
                let key = edge_key(u, v);
                let e = match edge_map.get(&key) {
                    Some(&e) => {
                        if edge_tris[e][1].is_some() {
                            return Err(Error::InvalidMesh(format!(
                                "edge {u}-{v} borders more than two triangles"
                            )));
                        }
                        edge_tris[e][1] = Some(t);
                        e
                    }
                    None => {
                        let e = edges.len();
                        edges.push(key);
                        edge_map.insert(key, e);
                        edge_tris.push([Some(t), None]);
                        e
                    }
                };
                te[i] = e;
            }
            tri_edges.push(te);
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("vertex {v} is not in any triangle")));
        }
        let mut lengths = Vec::with_capacity(edges.len());
        for &[a, b] in &edges {
            let l = length_of(a, b)?;
            if !(l.is_finite() && l > 0.0) {
                return Err(Error::InvalidMesh(format!("edge {a}-{b} has length {l}")));
            }
            lengths.push(l);
        }
        for (t, te) in tri_edges.iter().enumerate() {
            let [l0, l1, l2] = [lengths[te[0]], lengths[te[1]], lengths[te[2]]];
            if !(l0 < l1 + l2 && l1 < l0 + l2 && l2 < l0 + l1) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} violates the strict triangle inequality ({l0}, {l1}, {l2})"
                )));
            }
            let area = heron(l0, l1, l2);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!("triangle {t} has area {area}")));
            }
        }
        let boundary_loops = trace_boundary(&triangles, &half, n)?;
        Ok(IntrinsicMesh {
            n_vertices: n,
            coords,
            ambient,
            triangles,
            regions,
            edges,
            lengths,
            edge_map,
            tri_edges,
            edge_tris,
            boundary_loops,
            origin,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }
    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }
    pub fn regions(&self) -> &[Region] {
        &self.regions
    }
    pub fn region(&self, t: usize) -> Region {
        self.regions[t]
    }
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }
    pub fn edge_lengths(&self) -> &[f64] {
        &self.lengths
    }
    pub fn coords(&self) -> Option<&[[f64; 3]]> {
        self.coords.as_deref()
    }
    pub fn ambient(&self) -> Ambient {
        self.ambient
    }
    pub fn origin(&self) -> &[VertexOrigin] {
        &self.origin
    }
    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }
    pub fn is_closed(&self) -> bool {
        self.boundary_loops.is_empty()
    }
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_map.get(&edge_key(a, b)).copied()
    }
    pub fn edge_length(&self, a: usize, b: usize) -> Option<f64> {
        self.edge_index(a, b).map(|e| self.lengths[e])
    }
    /// Triangles on either side of edge `e`.
    pub fn edge_triangles(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_tris[e]
    }
    /// Edge indices opposite each local vertex of triangle `t`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }
    /// Side lengths of triangle `t`, opposite local vertices 0, 1, 2.
    pub fn triangle_lengths(&self, t: usize) -> [f64; 3] {
        let te = self.tri_edges[t];
        [self.lengths[te[0]], self.lengths[te[1]], self.lengths[te[2]]]
    }
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_lengths(t);
        heron(a, b, c)
    }
    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }
    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.triangles.len())
            .filter(|&t| self.regions[t] == region)
            .map(|t| self.triangle_area(t))
            .sum()
    }
    pub fn euler_characteristic(&self) -> i64 {
        self.n_vertices as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.n_vertices];
        for l in &self.boundary_loops {
            for &v in l {
                m[v] = true;
            }
        }
        m
    }

    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut nb = vec![Vec::new(); self.n_vertices];
        for &[a, b] in &self.edges {
            nb[a].push(b);
            nb[b].push(a);
        }
        nb
    }

    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut vt = vec![Vec::new(); self.n_vertices];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                vt[v].push(t);
            }
        }
        vt
    }

    /// Neighbouring triangle across each edge (opposite local vertex `i`).
    pub fn triangle_neighbors(&self, t: usize) -> [Option<usize>; 3] {
        let te = self.tri_edges[t];
        let mut out = [None; 3];
        for i in 0..3 {
            let [a, b] = self.edge_tris[te[i]];
            out[i] = if a == Some(t) { b } else { a };
        }
        out
    }

    /// Copy of the mesh with different region tags.
    pub fn with_regions(&self, regions: Vec<Region>) -> Result<Self> {
        if regions.len() != self.triangles.len() {
            return Err(Error::InvalidMesh("region count mismatch".into()));
        }
        let mut m = self.clone();
        m.regions = regions;
        Ok(m)
    }

    /// Copy of the mesh with every edge length multiplied by `factor`, i.e. the metric
    /// multiplied by `factor^2`. Coordinates are dropped unless the mesh is planar.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(Error::InvalidArgument(format!("scale factor {factor}")));
        }
        let mut m = self.clone();
        for l in &mut m.lengths {
            *l *= factor;
        }
        match self.ambient {
            Ambient::Plane => {
                if let Some(c) = &mut m.coords {
                    for p in c.iter_mut() {
                        p[0] *= factor;
                        p[1] *= factor;
                    }
                }
            }
            _ => {
                m.ambient = Ambient::Abstract;
            }
        }
        Ok(m)
    }

    /// Sub-mesh made of the selected triangles; returns it with the map from new to old
    /// vertex indices.
    pub fn submesh(&self, keep: &[bool]) -> Result<(Self, Vec<usize>)> {
        let mut new_of_old = vec![usize::MAX; self.n_vertices];
        let mut old_of_new = Vec::new();
        let mut tris = Vec::new();
        let mut regions = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if !keep[t] {
                continue;
            }
            let mut nt = [0; 3];
            for i in 0..3 {
                let v = tri[i];
                if new_of_old[v] == usize::MAX {
                    new_of_old[v] = old_of_new.len();
                    old_of_new.push(v);
                }
                nt[i] = new_of_old[v];
            }
            tris.push(nt);
            regions.push(self.regions[t]);
        }
        let mut lengths = HashMap::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if !keep[t] {
                continue;
            }
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                lengths.insert(
                    edge_key(new_of_old[a], new_of_old[b]),
                    self.edge_length(a, b).expect("edge of a kept triangle"),
                );
            }
        }
        let coords = self
            .coords
            .as_ref()
            .map(|c| old_of_new.iter().map(|&v| c[v]).collect());
        let origin = old_of_new.iter().map(|&v| self.origin[v]).collect();
        let m = IntrinsicMesh::from_lengths(
            old_of_new.len(),
            tris,
            regions,
            &lengths,
            coords,
            self.ambient,
            Some(origin),
        )?;
        Ok((m, old_of_new))
    }

    pub fn quality(&self) -> MeshQuality {
        let mut per: BTreeMap<Region, RegionQuality> = BTreeMap::new();
        let mut min_angle = f64::INFINITY;
        let mut max_edge: f64 = 0.0;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.triangle_lengths(t);
            let ang = angle_opposite(a, b, c)
                .min(angle_opposite(b, c, a))
                .min(angle_opposite(c, a, b));
            let me = a.max(b).max(c);
            min_angle = min_angle.min(ang);
            max_edge = max_edge.max(me);
            let q = per.entry(self.regions[t]).or_insert(RegionQuality {
                region: self.regions[t],
                min_angle: f64::INFINITY,
                max_edge: 0.0,
                triangles: 0,
            });
            q.min_angle = q.min_angle.min(ang);
            q.max_edge = q.max_edge.max(me);
            q.triangles += 1;
        }
        let mut negative = 0;
        for e in 0..self.edges.len() {
            let w: f64 = self.edge_tris[e]
                .iter()
                .flatten()
                .map(|&t| {
                    let te = self.tri_edges[t];
                    let i = te.iter().position(|&x| x == e).unwrap();
                    let l = self.triangle_lengths(t);
                    let area = heron(l[0], l[1], l[2]);
                    crate::geom::cot_opposite(l[i], l[(i + 1) % 3], l[(i + 2) % 3], area)
                })
                .sum();
            if w < 0.0 {
                negative += 1;
            }
        }
        MeshQuality {
            min_angle,
            max_edge,
            per_region: per.into_values().collect(),
            negative_cotan_edges: negative,
        }
    }

    /// Map from vertices of `self` to vertices of `other` with the same provenance.
    pub fn vertex_correspondence(&self, other: &IntrinsicMesh) -> Vec<Option<usize>> {
        let lookup: HashMap<VertexOrigin, usize> = other
            .origin
            .iter()
            .enumerate()
            .map(|(i, &o)| (o, i))
            .collect();
        self.origin.iter().map(|o| lookup.get(o).copied()).collect()
    }
}

fn trace_boundary(
    triangles: &[[usize; 3]],
    half: &HashMap<(usize, usize), usize>,
    n: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut next: Vec<Option<usize>> = vec![None; n];
    let mut count = 0usize;
    for tri in triangles {
        for i in 0..3 {
            let (u, v) = (tri[i], tri[(i + 1) % 3]);
            if !half.contains_key(&(v, u)) {
                if next[u].is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "vertex {u} has two outgoing boundary edges (boundary not simple)"
                    )));
                }
                next[u] = Some(v);
                count += 1;
            }
        }
    }
    let mut seen = vec![false; n];
    let mut loops = Vec::new();
    let mut visited = 0usize;
    for start in 0..n {
        if next[start].is_none() || seen[start] {
            continue;
        }
        let mut lp = Vec::new();
        let mut v = start;
        loop {
            if seen[v] {
                return Err(Error::InvalidMesh("boundary loop is not a simple cycle".into()));
            }
            seen[v] = true;
            lp.push(v);
            visited += 1;
            v = next[v].ok_or_else(|| Error::InvalidMesh("open boundary chain".into()))?;
            if v == start {
                break;
            }
        }
        loops.push(lp);
    }
    if visited != count {
        return Err(Error::InvalidMesh("boundary edges do not form cycles".into()));
    }
    Ok(loops)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> IntrinsicMesh {
        IntrinsicMesh::from_coords(
            vec![[0., 0., 0.], [1., 0., 0.], [1., 1., 0.], [0., 1., 0.]],
            Ambient::Plane,
            vec![[0, 1, 2], [0, 2, 3]],
            vec![Region::Omega1; 2],
        )
        .unwrap()
    }

    #[test]
    fn two_triangle_square() {
        let m = square();
        assert_eq!(m.n_edges(), 5);
        assert_eq!(m.euler_characteristic(), 1);
        assert_eq!(m.boundary_loops().len(), 1);
        assert_eq!(m.boundary_loops()[0].len(), 4);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        let q = m.quality();
        assert!((q.min_angle - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn rejects_inconsistent_orientation() {
        let r = IntrinsicMesh::from_coords(
            vec![[0., 0., 0.], [1., 0., 0.], [1., 1., 0.], [0., 1., 0.]],
            Ambient::Plane,
            vec![[0, 1, 2], [0, 3, 2]],
            vec![Region::Omega1; 2],
        );
        assert!(matches!(r, Err(Error::InvalidMesh(_))));
    }

    #[test]
    fn rejects_triangle_inequality_violation() {
        let mut lengths = HashMap::new();
        lengths.insert([0, 1], 1.0);
        lengths.insert([1, 2], 1.0);
        lengths.insert([0, 2], 2.5);
        let r = IntrinsicMesh::from_lengths(
            3,
            vec![[0, 1, 2]],
            vec![Region::M2],
            &lengths,
            None,
            Ambient::Abstract,
            None,
        );
        assert!(r.is_err());
    }

    #[test]
    fn scaling_multiplies_area_by_square() {
        let m = square();
        let s = m.scaled(0.25).unwrap();
        assert!((s.total_area() - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn region_tags_round_trip() {
        for r in Region::ALL {
            assert_eq!(Region::parse(r.tag()), Some(r));
        }
    }
}
