//! Nodal sets and nodal domains of piecewise-linear vertex functions.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geom::{dist3, lerp3, point_segment_dist3, polygon_signed_area, segment_segment_dist2};
use crate::mesh::{geodesic, IntrinsicMesh, Region};

/// Relative size of the perturbation applied to exact zeros.
pub const TIE_BREAK: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct NodalSegment {
    pub tri: usize,
    /// Mesh edges carrying the two endpoints.
    pub edges: [usize; 2],
    /// Endpoint positions (zero when the mesh has no coordinates).
    pub points: [[f64; 3]; 2],
    /// Endpoints in barycentric coordinates of `tri`.
    pub bary: [[f64; 3]; 2],
    pub region: Region,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalSet {
    pub level: f64,
    pub segments: Vec<NodalSegment>,
    /// Connected components as lists of segment indices.
    pub components: Vec<Vec<usize>>,
}

impl NodalSet {
    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Total length of the segments in ambient coordinates.
    pub fn length(&self) -> f64 {
        self.segments.iter().map(|s| dist3(s.points[0], s.points[1])).sum()
    }

    /// Subset of segments accepted by `keep`, with components recomputed.
    pub fn filter<F: Fn(&NodalSegment) -> bool>(&self, keep: F) -> NodalSet {
        let segments: Vec<NodalSegment> = self.segments.iter().filter(|s| keep(s)).cloned().collect();
        let components = components_of(&segments);
        NodalSet {
            level: self.level,
            segments,
            components,
        }
    }

    /// CSV with columns `tri_id,x0,y0,x1,y1,region`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("tri_id,x0,y0,x1,y1,region\n");
        for g in &self.segments {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                g.tri, g.points[0][0], g.points[0][1], g.points[1][0], g.points[1][1], g.region
            );
        }
        s
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

fn components_of(segments: &[NodalSegment]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(segments.len());
    let mut by_edge: HashMap<usize, usize> = HashMap::new();
    for (i, s) in segments.iter().enumerate() {
        for &e in &s.edges {
            if let Some(&j) = by_edge.get(&e) {
                uf.union(i, j);
            } else {
                by_edge.insert(e, i);
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for i in 0..segments.len() {
        let r = uf.find(i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by_key(|g| g[0]);
    out
}

/// `u - alpha` with exact zeros replaced by a tiny nonzero value. On vertices flagged in
/// `dirichlet` the function is taken to vanish and receives the sign of the sum of its
/// neighbours, so that a nodal domain touching the boundary is not split off by it.
pub fn tie_broken(mesh: &IntrinsicMesh, u: &[f64], alpha: f64, dirichlet: Option<&[bool]>) -> Result<Vec<f64>> {
    if u.len() != mesh.n_vertices() {
        return Err(Error::Dimension(format!(
            "function has {} values for {} vertices",
            u.len(),
            mesh.n_vertices()
        )));
    }
    let mut w: Vec<f64> = u.iter().map(|&x| x - alpha).collect();
    let max = w.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let eta = TIE_BREAK * max;
    if let Some(mask) = dirichlet {
        let nb = mesh.vertex_neighbors();
        let snapshot = w.clone();
        for v in 0..w.len() {
            if mask[v] {
                let s: f64 = nb[v].iter().filter(|&&x| !mask[x]).map(|&x| snapshot[x]).sum();
                w[v] = if s < 0.0 { -eta } else { eta };
            }
        }
    }
    for x in w.iter_mut() {
        if *x == 0.0 {
            *x = eta;
        }
    }
    Ok(w)
}

/// Crossing parameter along edge `(a, b)` with `a < b`, measured from `a`.
#[inline]
fn crossing(wa: f64, wb: f64) -> f64 {
    wa / (wa - wb)
}

/// Marching-triangles extraction of `{u = alpha}`.
pub fn extract_level_set(mesh: &IntrinsicMesh, u: &[f64], alpha: f64) -> Result<NodalSet> {
    extract_with(mesh, u, alpha, None)
}

/// Level set of a function satisfying Dirichlet conditions on the masked vertices.
pub fn extract_level_set_dirichlet(mesh: &IntrinsicMesh, u: &[f64], alpha: f64, dirichlet: &[bool]) -> Result<NodalSet> {
    extract_with(mesh, u, alpha, Some(dirichlet))
}

fn extract_with(mesh: &IntrinsicMesh, u: &[f64], alpha: f64, dirichlet: Option<&[bool]>) -> Result<NodalSet> {
    let w = tie_broken(mesh, u, alpha, dirichlet)?;
    let coords = mesh.coords();
    let mut cache: HashMap<usize, (f64, [f64; 3])> = HashMap::new();
    let mut segments = Vec::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let pos = tri.iter().filter(|&&v| w[v] > 0.0).count();
        if pos == 0 || pos == 3 {
            continue;
        }
        // the lone vertex has the minority sign
        let lone = (0..3)
            .find(|&i| (w[tri[i]] > 0.0) == (pos == 1))
            .unwrap();
        let te = mesh.triangle_edges(t);
        let mut edges = [0usize; 2];
        let mut points = [[0.0; 3]; 2];
        let mut bary = [[0.0; 3]; 2];
        for (s, other) in [(lone + 1) % 3, (lone + 2) % 3].into_iter().enumerate() {
            // edge opposite the third vertex joins lone and other
            let third = 3 - lone - other;
            let e = te[third];
            let [a, b] = mesh.edges()[e];
            let (tt, p) = *cache.entry(e).or_insert_with(|| {
                let tt = crossing(w[a], w[b]);
                let p = match coords {
                    Some(c) => lerp3(c[a], c[b], tt),
                    None => [0.0; 3],
                };
                (tt, p)
            });
            edges[s] = e;
            points[s] = p;
            let ia = tri.iter().position(|&x| x == a).unwrap();
            let ib = tri.iter().position(|&x| x == b).unwrap();
            bary[s][ia] = 1.0 - tt;
            bary[s][ib] = tt;
        }
        segments.push(NodalSegment {
            tri: t,
            edges,
            points,
            bary,
            region: mesh.region(t),
        });
    }
    let components = components_of(&segments);
    Ok(NodalSet {
        level: alpha,
        segments,
        components,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodalDomains {
    /// Sign (+1 / -1) of each vertex after tie-breaking.
    pub vertex_sign: Vec<i8>,
    /// Domain of the positive and negative part of each triangle.
    pub triangle_domains: Vec<[Option<usize>; 2]>,
    pub count: usize,
    /// Sign of each domain.
    pub signs: Vec<i8>,
    pub areas: Vec<f64>,
    pub positive_triangles: usize,
    pub negative_triangles: usize,
    pub straddling_triangles: usize,
}

impl NodalDomains {
    /// Domains containing vertex `v`.
    pub fn vertex_domain(&self, mesh: &IntrinsicMesh, v: usize, vertex_tris: &[Vec<usize>]) -> Option<usize> {
        let slot = if self.vertex_sign[v] > 0 { 0 } else { 1 };
        vertex_tris[v]
            .iter()
            .find_map(|&t| self.triangle_domains[t][slot])
            .filter(|_| v < mesh.n_vertices())
    }
}

pub fn count_domains(mesh: &IntrinsicMesh, u: &[f64]) -> Result<NodalDomains> {
    count_with(mesh, u, None)
}

pub fn count_domains_dirichlet(mesh: &IntrinsicMesh, u: &[f64], dirichlet: &[bool]) -> Result<NodalDomains> {
    count_with(mesh, u, Some(dirichlet))
}

fn count_with(mesh: &IntrinsicMesh, u: &[f64], dirichlet: Option<&[bool]>) -> Result<NodalDomains> {
    if u.iter().all(|&x| x == 0.0) {
        return Err(Error::Nodal("function vanishes identically".into()));
    }
    let w = tie_broken(mesh, u, 0.0, dirichlet)?;
    let nt = mesh.n_triangles();
    let sign: Vec<i8> = w.iter().map(|&x| if x > 0.0 { 1 } else { -1 }).collect();
    // piece index: 2 t + (0 positive, 1 negative)
    let mut present = vec![false; 2 * nt];
    let (mut np, mut nn, mut ns) = (0, 0, 0);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let pos = tri.iter().filter(|&&v| sign[v] > 0).count();
        match pos {
            3 => np += 1,
            0 => nn += 1,
            _ => ns += 1,
        }
        present[2 * t] = pos > 0;
        present[2 * t + 1] = pos < 3;
    }
    if ns == nt {
        return Err(Error::Nodal("every triangle straddles the nodal set".into()));
    }
    let mut uf = UnionFind::new(2 * nt);
    for e in 0..mesh.n_edges() {
        let [Some(t1), Some(t2)] = mesh.edge_triangles(e) else {
            continue;
        };
        let [a, b] = mesh.edges()[e];
        for s in [sign[a], sign[b]] {
            let slot = if s > 0 { 0 } else { 1 };
            uf.union(2 * t1 + slot, 2 * t2 + slot);
        }
    }
    let mut root_to_domain: HashMap<usize, usize> = HashMap::new();
    let mut triangle_domains = vec![[None, None]; nt];
    let mut signs = Vec::new();
    let mut areas = Vec::new();
    for t in 0..nt {
        let tri = mesh.triangles()[t];
        let area = mesh.triangle_area(t);
        let pos_area = positive_fraction(&tri.map(|v| w[v])) * area;
        for slot in 0..2 {
            if !present[2 * t + slot] {
                continue;
            }
            let r = uf.find(2 * t + slot);
            let next = root_to_domain.len();
            let d = *root_to_domain.entry(r).or_insert(next);
            if d == signs.len() {
                signs.push(if slot == 0 { 1 } else { -1 });
                areas.push(0.0);
            }
            triangle_domains[t][slot] = Some(d);
            areas[d] += if slot == 0 { pos_area } else { area - pos_area };
        }
    }
    Ok(NodalDomains {
        vertex_sign: sign,
        triangle_domains,
        count: signs.len(),
        signs,
        areas,
        positive_triangles: np,
        negative_triangles: nn,
        straddling_triangles: ns,
    })
}

/// Fraction of a triangle's area where the linear interpolant of `w` is positive.
fn positive_fraction(w: &[f64; 3]) -> f64 {
    let pos = w.iter().filter(|&&x| x > 0.0).count();
    match pos {
        0 => 0.0,
        3 => 1.0,
        _ => {
            let lone_positive = pos == 1;
            let i = (0..3).find(|&i| (w[i] > 0.0) == lone_positive).unwrap();
            let t1 = w[i] / (w[i] - w[(i + 1) % 3]);
            let t2 = w[i] / (w[i] - w[(i + 2) % 3]);
            let lone = t1 * t2;
            if lone_positive {
                lone
            } else {
                1.0 - lone
            }
        }
    }
}

/// Distance from every vertex to the nodal set, optionally also to the mesh boundary.
pub fn distance_to_set(mesh: &IntrinsicMesh, set: &NodalSet, include_boundary: bool) -> Vec<f64> {
    let segs: Vec<(usize, [f64; 3], [f64; 3])> =
        set.segments.iter().map(|s| (s.tri, s.bary[0], s.bary[1])).collect();
    let mut seeds = geodesic::segment_seeds(mesh, &segs);
    if include_boundary {
        for l in mesh.boundary_loops() {
            seeds.extend(l.iter().map(|&v| (v, 0.0)));
        }
    }
    geodesic::distance_field(mesh, &seeds)
}

/// Empirical wavelength-density constant `sqrt(lambda) * max_x dist(x, nodal set)`. For
/// Dirichlet problems the boundary is part of the zero set and should be included.
pub fn wavelength_density(mesh: &IntrinsicMesh, set: &NodalSet, lambda: f64, include_boundary: bool) -> Result<f64> {
    if set.is_empty() && !(include_boundary && !mesh.is_closed()) {
        return Err(Error::Nodal("wavelength density is undefined for an empty nodal set".into()));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda}")));
    }
    let d = distance_to_set(mesh, set, include_boundary);
    let max = d.iter().copied().filter(|x| x.is_finite()).fold(0.0, f64::max);
    Ok(lambda.sqrt() * max)
}

/// Largest distance from a vertex of each domain to the domain's boundary (the nodal set,
/// plus the mesh boundary when `include_boundary`).
pub fn inner_radius(mesh: &IntrinsicMesh, set: &NodalSet, domains: &NodalDomains, include_boundary: bool) -> Vec<f64> {
    let d = distance_to_set(mesh, set, include_boundary);
    let vt = mesh.vertex_triangles();
    let mut out = vec![0.0f64; domains.count];
    for v in 0..mesh.n_vertices() {
        if let Some(k) = domains.vertex_domain(mesh, v, &vt) {
            if d[v].is_finite() {
                out[k] = out[k].max(d[v]);
            }
        }
    }
    out
}

fn sample(seg: &NodalSegment, pitch: f64) -> Vec<[f64; 3]> {
    let len = dist3(seg.points[0], seg.points[1]);
    let n = ((len / pitch).ceil() as usize).max(1);
    (0..=n)
        .map(|i| lerp3(seg.points[0], seg.points[1], i as f64 / n as f64))
        .collect()
}

fn one_sided(a: &NodalSet, b: &NodalSet, pitch: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for s in &a.segments {
        for p in sample(s, pitch) {
            let d = b
                .segments
                .iter()
                .map(|t| point_segment_dist3(p, t.points[0], t.points[1]))
                .fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
    }
    worst
}

/// Symmetric Hausdorff distance, sampling segments at the given pitch.
pub fn hausdorff(a: &NodalSet, b: &NodalSet, pitch: f64) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Nodal("Hausdorff distance of an empty set".into()));
    }
    if !(pitch > 0.0) {
        return Err(Error::InvalidArgument(format!("pitch {pitch}")));
    }
    Ok(one_sided(a, b, pitch).max(one_sided(b, a, pitch)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Containment {
    ContainedInM1Eps0,
    CaseC,
    CaseD1,
    CaseD2,
    EmptyInM1,
}

impl Containment {
    pub fn tag(&self) -> &'static str {
        match self {
            Containment::ContainedInM1Eps0 => "CONTAINED_IN_M1_EPS0",
            Containment::CaseC => "CASE_C",
            Containment::CaseD1 => "CASE_D1",
            Containment::CaseD2 => "CASE_D2",
            Containment::EmptyInM1 => "EMPTY_IN_M1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContainmentVerdict {
    pub class: Containment,
    /// For case C: points where a component leaves the bulk region. For case D: one point on
    /// each component lying wholly outside the bulk.
    pub witnesses: Vec<[f64; 3]>,
}

/// Classifies a nodal set on a glued mesh by where its components lie relative to the
/// `M1_BULK` region.
pub fn classify_containment(set: &NodalSet) -> ContainmentVerdict {
    let bulk = |s: &NodalSegment| s.region == Region::M1Bulk;
    if set.segments.iter().all(bulk) {
        return ContainmentVerdict {
            class: Containment::ContainedInM1Eps0,
            witnesses: vec![],
        };
    }
    if !set.segments.iter().any(bulk) {
        return ContainmentVerdict {
            class: Containment::EmptyInM1,
            witnesses: vec![],
        };
    }
    let mut crossing_witness = Vec::new();
    let mut outside_witness = Vec::new();
    for comp in &set.components {
        let inb = comp.iter().filter(|&&i| bulk(&set.segments[i])).count();
        if inb == comp.len() {
            continue;
        }
        if inb == 0 {
            // lowest-indexed segment as the representative point
            let s = &set.segments[*comp.iter().min().unwrap()];
            outside_witness.push(s.points[0]);
            continue;
        }
        // transition points: edge crossings shared by a bulk and a non-bulk segment
        let mut by_edge: HashMap<usize, (bool, bool, [f64; 3])> = HashMap::new();
        for &i in comp {
            let s = &set.segments[i];
            for k in 0..2 {
                let e = by_edge.entry(s.edges[k]).or_insert((false, false, s.points[k]));
                if bulk(s) {
                    e.0 = true;
                } else {
                    e.1 = true;
                }
            }
        }
        let mut pts: Vec<(usize, [f64; 3])> = by_edge
            .into_iter()
            .filter(|(_, (a, b, _))| *a && *b)
            .map(|(e, (_, _, p))| (e, p))
            .collect();
        pts.sort_by_key(|x| x.0);
        crossing_witness.extend(pts.into_iter().map(|x| x.1));
    }
    let crossing = !crossing_witness.is_empty();
    let outside = !outside_witness.is_empty();
    let (class, witnesses) = match (crossing, outside) {
        (true, true) => (Containment::CaseD1, outside_witness),
        (true, false) => (Containment::CaseC, crossing_witness),
        (false, true) => (Containment::CaseD2, outside_witness),
        // only reachable if regions are mixed without a shared crossing edge
        (false, false) => (Containment::CaseC, vec![]),
    };
    ContainmentVerdict { class, witnesses }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayneResult {
    pub touches: bool,
    pub min_distance: f64,
}

/// Whether the nodal set comes within `touch_tol` of the outer boundary loop of a planar mesh.
pub fn payne_check(mesh: &IntrinsicMesh, set: &NodalSet, touch_tol: f64) -> Result<PayneResult> {
    let coords = mesh.coords().ok_or(Error::NotEmbedded)?;
    let loops = mesh.boundary_loops();
    if loops.is_empty() {
        return Err(Error::Nodal("mesh has no boundary".into()));
    }
    let outer = loops
        .iter()
        .max_by(|a, b| {
            let area = |l: &Vec<usize>| {
                let p: Vec<[f64; 2]> = l.iter().map(|&v| [coords[v][0], coords[v][1]]).collect();
                polygon_signed_area(&p).abs()
            };
            area(a).total_cmp(&area(b))
        })
        .unwrap();
    let mut best = f64::INFINITY;
    for s in &set.segments {
        let (p, q) = ([s.points[0][0], s.points[0][1]], [s.points[1][0], s.points[1][1]]);
        for i in 0..outer.len() {
            let (a, b) = (coords[outer[i]], coords[outer[(i + 1) % outer.len()]]);
            best = best.min(segment_segment_dist2(p, q, [a[0], a[1]], [b[0], b[1]]));
        }
    }
    Ok(PayneResult {
        touches: best <= touch_tol,
        min_distance: best,
    })
}

/// SVG drawing of a planar mesh's boundary with the nodal set overlaid. Closed spherical meshes
/// are drawn in stereographic projection from the south pole.
pub fn to_svg(mesh: &IntrinsicMesh, set: &NodalSet) -> Result<String> {
    let coords = mesh.coords().ok_or(Error::NotEmbedded)?;
    let spherical = matches!(mesh.ambient(), crate::mesh::Ambient::Sphere);
    let project = |p: [f64; 3]| -> Option<[f64; 2]> {
        if spherical {
            let d = 1.0 + p[2];
            if d < 0.05 {
                None
            } else {
                Some([p[0] / d, p[1] / d])
            }
        } else {
            Some([p[0], p[1]])
        }
    };
    let mut lines: Vec<([f64; 2], [f64; 2], &str)> = Vec::new();
    for l in mesh.boundary_loops() {
        for i in 0..l.len() {
            if let (Some(a), Some(b)) = (project(coords[l[i]]), project(coords[l[(i + 1) % l.len()]])) {
                lines.push((a, b, "#444"));
            }
        }
    }
    for s in &set.segments {
        if let (Some(a), Some(b)) = (project(s.points[0]), project(s.points[1])) {
            lines.push((a, b, "#c00"));
        }
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    if spherical {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    for p in coords.iter().filter_map(|&p| project(p)) {
        if spherical {
            continue;
        }
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let size = 600.0;
    let sx = |p: [f64; 2]| (20.0 + (p[0] - lo[0]) / span * size, 20.0 + (hi[1] - p[1]) / span * size);
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\">",
        size + 40.0,
        size + 40.0
    );
    if spherical {
        let (cx, cy) = sx([0.0, 0.0]);
        let _ = writeln!(
            s,
            "<circle cx=\"{cx:.3}\" cy=\"{cy:.3}\" r=\"{:.3}\" fill=\"none\" stroke=\"#444\"/>",
            size / 2.0
        );
    }
    for (a, b, color) in lines {
        let (x0, y0) = sx(a);
        let (x1, y1) = sx(b);
        let _ = writeln!(
            s,
            "<line x1=\"{x0:.3}\" y1=\"{y0:.3}\" x2=\"{x1:.3}\" y2=\"{y1:.3}\" stroke=\"{color}\" stroke-width=\"1\"/>"
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_rectangle, build_sphere};

    fn square(h: f64) -> IntrinsicMesh {
        build_rectangle(1.0, 1.0, h).unwrap()
    }

    #[test]
    fn constant_has_empty_level_set() {
        let m = square(0.1);
        let u = vec![1.0; m.n_vertices()];
        assert!(extract_level_set(&m, &u, 0.0).unwrap().is_empty());
    }

    #[test]
    fn linear_function_reproduced() {
        let h = 0.1;
        let m = build_rectangle(1.0, 1.0, h).unwrap();
        let u: Vec<f64> = m.coords().unwrap().iter().map(|p| p[0] - 0.5 - 0.03).collect();
        let set = extract_level_set(&m, &u, 0.0).unwrap();
        assert_eq!(set.components.len(), 1);
        for s in &set.segments {
            for p in s.points {
                assert!((p[0] - 0.53).abs() < 1e-12);
            }
        }
        let doms = count_domains(&m, &u).unwrap();
        assert_eq!(doms.count, 2);
        let total: f64 = doms.areas.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let neg = doms.areas[doms.signs.iter().position(|&s| s < 0).unwrap()];
        assert!((neg - 0.53).abs() < 1e-12);
    }

    #[test]
    fn shared_crossings_are_bitwise_identical() {
        let m = build_sphere(2).unwrap();
        let u: Vec<f64> = m.coords().unwrap().iter().map(|p| p[0] + 0.3 * p[1] * p[2]).collect();
        let set = extract_level_set(&m, &u, 0.1).unwrap();
        let mut seen: HashMap<usize, [f64; 3]> = HashMap::new();
        for s in &set.segments {
            for k in 0..2 {
                if let Some(p) = seen.insert(s.edges[k], s.points[k]) {
                    assert_eq!(p, s.points[k]);
                }
            }
        }
        // closed surface: every crossing is shared by exactly two segments
        let mut count: HashMap<usize, usize> = HashMap::new();
        for s in &set.segments {
            for e in s.edges {
                *count.entry(e).or_default() += 1;
            }
        }
        assert!(count.values().all(|&c| c == 2));
    }

    #[test]
    fn level_shift_consistency() {
        let m = build_sphere(2).unwrap();
        let u: Vec<f64> = m.coords().unwrap().iter().map(|p| p[2] * p[2] - p[0]).collect();
        let alpha = 0.2;
        let a = extract_level_set(&m, &u, alpha).unwrap();
        let shifted: Vec<f64> = u.iter().map(|x| x - alpha).collect();
        let b = extract_level_set(&m, &shifted, 0.0).unwrap();
        assert_eq!(a.segments, b.segments);
    }

    #[test]
    fn hausdorff_of_parallel_lines() {
        let m = square(0.05);
        let set = |x0: f64| {
            let u: Vec<f64> = m.coords().unwrap().iter().map(|p| p[0] - x0).collect();
            extract_level_set(&m, &u, 0.0).unwrap()
        };
        let (a, b) = (set(0.31), set(0.51));
        assert!(hausdorff(&a, &a, 0.0125).unwrap() < 1e-15);
        assert!((hausdorff(&a, &b, 0.0125).unwrap() - 0.2).abs() < 1e-12);
        assert!(hausdorff(&a, &set(2.0), 0.01).is_err());
    }

    #[test]
    fn containment_cases() {
        let mut m = square(0.1);
        let c = m.coords().unwrap().to_vec();
        // left half bulk, right half M2
        let regions: Vec<Region> = (0..m.n_triangles())
            .map(|t| {
                let cx: f64 = m.triangles()[t].iter().map(|&v| c[v][0]).sum::<f64>() / 3.0;
                if cx < 0.5 {
                    Region::M1Bulk
                } else {
                    Region::M2
                }
            })
            .collect();
        m = m.with_regions(regions).unwrap();
        let classify = |f: &dyn Fn([f64; 3]) -> f64| {
            let u: Vec<f64> = c.iter().map(|&p| f(p)).collect();
            classify_containment(&extract_level_set(&m, &u, 0.0).unwrap()).class
        };
        assert_eq!(classify(&|p| p[0] - 0.23), Containment::ContainedInM1Eps0);
        assert_eq!(classify(&|p| p[0] - 0.77), Containment::EmptyInM1);
        assert_eq!(classify(&|p| p[1] - 0.43), Containment::CaseC);
        // one line in the bulk, a closed curve wholly in M2
        assert_eq!(
            classify(&|p| (p[0] - 0.23) * ((p[0] - 0.8).powi(2) + (p[1] - 0.5).powi(2) - 0.01)),
            Containment::CaseD2
        );
        assert_eq!(
            classify(&|p| (p[1] - 0.43) * ((p[0] - 0.8).powi(2) + (p[1] - 0.8).powi(2) - 0.01)),
            Containment::CaseD1
        );
    }

    #[test]
    fn payne_on_rectangle_mode() {
        let m = build_rectangle(2.0, 1.0, 0.05).unwrap();
        let u: Vec<f64> = m
            .coords()
            .unwrap()
            .iter()
            .map(|p| (std::f64::consts::PI * p[0]).sin() * (std::f64::consts::PI * p[1]).sin())
            .collect();
        let mask = m.boundary_mask();
        let set = extract_level_set_dirichlet(&m, &u, 0.0, &mask).unwrap();
        let r = payne_check(&m, &set, 0.1).unwrap();
        assert!(r.touches);
        let d = count_domains_dirichlet(&m, &u, &mask).unwrap();
        assert_eq!(d.count, 2);
    }

    #[test]
    fn svg_is_emitted() {
        let m = build_sphere(1).unwrap();
        let u: Vec<f64> = m.coords().unwrap().iter().map(|p| p[0]).collect();
        let set = extract_level_set(&m, &u, 0.0).unwrap();
        let s = to_svg(&m, &set).unwrap();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
    }
}
