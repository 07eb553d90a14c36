//! Connected sums with a shrunken second summand, ball-and-socket attachment of planar
//! domains, and perforation.
//!
//! All three constructions cut neighbourhoods out with polar-graded patches on a radius grid
//! anchored at a fixed radius, so the meshes produced for a sequence of `epsilon` values on that
//! grid are nested: the mesh for a smaller `epsilon` contains every vertex and triangle of the
//! coarser one outside the removed ball.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::eigen::Spectrum;
use crate::error::{Error, Result};
use crate::geom::{point_segment_dist2, polygon_is_simple, polygon_signed_area};
use crate::mesh::geodesic::graph_diameter;
use crate::mesh::patch::{local_edge_length, ring_count};
use crate::mesh::{carve_patches, edge_key, Ambient, CarvedMesh, IntrinsicMesh, PatchSpec, Region, VertexOrigin};
use crate::nodal::{distance_to_set, extract_level_set, NodalSet};

/// Parameters of a connected sum `M1(eps) ∪ eps·M2(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GluedSpec {
    pub epsilon: f64,
    /// Collar radius; triangles of `M1` within this distance of `x1` are tagged `M1_COLLAR`.
    pub epsilon0: f64,
    /// Gluing vertex on `M1`.
    pub x1: usize,
    /// Centre of the unit ball removed from `M2`.
    pub x2: usize,
    /// Graph diameter of `M2(1)`.
    pub d: f64,
    /// Graph diameter of the circle `∂B(x2, 1)` measured in `M2(1)`.
    pub d_tilde: f64,
    /// Vertices on the neck circle.
    pub n_loop: usize,
    /// Anchor of the ring-radius grid; `epsilon` is snapped to it. Defaults to `epsilon0`.
    pub anchor: f64,
}

fn m1_outer(epsilon0: f64, h1: f64) -> f64 {
    (1.5 * epsilon0).max(epsilon0 + 2.0 * h1)
}

fn m2_outer(h2: f64) -> f64 {
    1.5f64.max(1.0 + 2.0 * h2)
}

fn m1_patch(m1: &IntrinsicMesh, spec: &GluedSpec, inner: f64, fill: bool) -> Result<PatchSpec> {
    let coords = m1.coords().ok_or(Error::NotEmbedded)?;
    let h1 = local_edge_length(m1, spec.x1);
    Ok(PatchSpec {
        center: coords[spec.x1],
        anchor: spec.anchor,
        inner,
        outer_min: m1_outer(spec.epsilon0, h1),
        n_ring: spec.n_loop,
        fill_center: fill,
        collar: Some((spec.epsilon0, Region::M1Collar)),
        h: h1,
        id: 0,
    })
}

fn m2_patch(m2: &IntrinsicMesh, x2: usize, n_loop: usize) -> Result<PatchSpec> {
    let coords = m2.coords().ok_or(Error::NotEmbedded)?;
    let h2 = local_edge_length(m2, x2);
    Ok(PatchSpec {
        center: coords[x2],
        anchor: 1.0,
        inner: 1.0,
        outer_min: m2_outer(h2),
        n_ring: n_loop,
        fill_center: false,
        collar: None,
        h: h2,
        id: 1,
    })
}

fn carve_m2(m2: &IntrinsicMesh, x2: usize, n_loop: usize) -> Result<CarvedMesh> {
    let p = m2_patch(m2, x2, n_loop)?;
    let m2 = m2.with_regions(vec![Region::M2; m2.n_triangles()])?;
    carve_patches(&m2, &[p])
}

impl GluedSpec {
    /// Validates the parameters and measures `D` and `D̃` on `M2(1)`.
    pub fn new(
        m1: &IntrinsicMesh,
        m2: &IntrinsicMesh,
        epsilon: f64,
        epsilon0: f64,
        x1: usize,
        x2: usize,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < epsilon0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < epsilon < epsilon0, got {epsilon} and {epsilon0}"
            )));
        }
        if x1 >= m1.n_vertices() || x2 >= m2.n_vertices() {
            return Err(Error::InvalidArgument("gluing vertex out of range".into()));
        }
        if !m1.is_closed() || !m2.is_closed() {
            return Err(Error::Surgery("both summands must be closed".into()));
        }
        let h1 = local_edge_length(m1, x1);
        let h2 = local_edge_length(m2, x2);
        let n_loop = ring_count(m1_outer(epsilon0, h1), h1).max(ring_count(m2_outer(h2), h2));
        let carved = carve_m2(m2, x2, n_loop)?;
        let d = graph_diameter(&carved.mesh, None, None);
        let ring = &carved.inner_rings[0];
        let d_tilde = graph_diameter(&carved.mesh, Some(ring), Some(ring));
        if !(d > d_tilde) {
            return Err(Error::Surgery(format!(
                "diameter of M2(1) ({d}) must exceed that of the gluing circle ({d_tilde})"
            )));
        }
        Ok(GluedSpec {
            epsilon,
            epsilon0,
            x1,
            x2,
            d,
            d_tilde,
            n_loop,
            anchor: epsilon0,
        })
    }

    /// Puts `epsilon` itself on the ring grid, so it is realized exactly. Meshes built this
    /// way for different `epsilon` are no longer nested.
    pub fn exact(&self) -> Self {
        GluedSpec {
            anchor: self.epsilon,
            ..self.clone()
        }
    }

    /// Same parameters at a different `epsilon`.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < self.epsilon0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < epsilon < epsilon0, got {epsilon} and {}",
                self.epsilon0
            )));
        }
        Ok(GluedSpec {
            epsilon,
            ..self.clone()
        })
    }
}

#[derive(Debug, Clone)]
pub struct GluedMesh {
    pub mesh: IntrinsicMesh,
    /// Radius actually used for the neck (the grid radius nearest the requested `epsilon`).
    pub epsilon: f64,
    /// Number of leading vertices that come from `M1`.
    pub m1_vertices: usize,
    /// Neck circle, in glued vertex indices.
    pub neck: Vec<usize>,
}

/// Connected sum of two closed embedded surfaces: the geodesic ball of radius `epsilon` around
/// `x1` is removed from `M1`, the unit ball around `x2` from `M2`, `M2` is scaled by `epsilon`,
/// and the two circles are identified by an orientation-reversing map.
///
/// The result carries no embedding; vertices of the `M2` part are placed at `x1`.
pub fn connected_sum(m1: &IntrinsicMesh, m2: &IntrinsicMesh, spec: &GluedSpec) -> Result<GluedMesh> {
    let p1 = m1_patch(m1, spec, spec.epsilon, false)?;
    let a = carve_patches(m1, &[p1])?;
    let b = carve_m2(m2, spec.x2, spec.n_loop)?;
    let eps = a.radii[0][0];
    let (ra, rb) = (&a.inner_rings[0], &b.inner_rings[0]);
    if ra.len() != rb.len() {
        return Err(Error::Surgery(format!(
            "neck circles have {} and {} vertices",
            ra.len(),
            rb.len()
        )));
    }
    let n = ra.len();
    let n1 = a.mesh.n_vertices();
    let x1_pos = m1.coords().ok_or(Error::NotEmbedded)?[spec.x1];

    let mut map = vec![usize::MAX; b.mesh.n_vertices()];
    for (i, &w) in rb.iter().enumerate() {
        map[w] = ra[(n - i) % n];
    }
    let mut coords = a.mesh.coords().unwrap().to_vec();
    let mut origin = a.mesh.origin().to_vec();
    for v in 0..b.mesh.n_vertices() {
        if map[v] == usize::MAX {
            map[v] = coords.len();
            coords.push(x1_pos);
            origin.push(VertexOrigin::Attached(v as u32));
        }
    }
    let mut tris = a.mesh.triangles().to_vec();
    let mut regions = a.mesh.regions().to_vec();
    let mut lengths: HashMap<[usize; 2], f64> = HashMap::new();
    for (e, &[u, v]) in a.mesh.edges().iter().enumerate() {
        lengths.insert(edge_key(u, v), a.mesh.edge_lengths()[e]);
    }
    // edges on the neck take the scaled M2 lengths
    for (e, &[u, v]) in b.mesh.edges().iter().enumerate() {
        lengths.insert(edge_key(map[u], map[v]), eps * b.mesh.edge_lengths()[e]);
    }
    for t in b.mesh.triangles() {
        tris.push(t.map(|v| map[v]));
        regions.push(Region::M2);
    }
    let mesh = IntrinsicMesh::from_lengths(
        coords.len(),
        tris,
        regions,
        &lengths,
        Some(coords),
        Ambient::Abstract,
        Some(origin),
    )
    .map_err(|e| Error::Surgery(format!("glued mesh is invalid: {e}")))?;
    Ok(GluedMesh {
        mesh,
        epsilon: eps,
        m1_vertices: n1,
        neck: ra.clone(),
    })
}

/// `M1` remeshed with the same patch as the connected sum but closed by a fan whose innermost
/// ring has radius `inner`. For `inner` at or below every `epsilon` of a sweep, the `M1` part of
/// each glued mesh is a sub-mesh of this one.
pub fn m1_reference(m1: &IntrinsicMesh, spec: &GluedSpec, inner: f64) -> Result<IntrinsicMesh> {
    let p = m1_patch(m1, spec, inner, true)?;
    Ok(carve_patches(m1, &[p])?.mesh)
}

/// Largest distance, over all vertices, to the nearest of the nodal sets of eigenvectors
/// `1..=m`, together with the vertex attaining it.
pub fn best_gluing_vertex(m1: &IntrinsicMesh, spectrum: &Spectrum, m: usize) -> Result<(usize, f64)> {
    let clear = clearance_field(m1, spectrum, m)?;
    let boundary = m1.boundary_mask();
    let (v, c) = clear
        .iter()
        .enumerate()
        .filter(|(v, _)| !boundary[*v])
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(v, &c)| (v, c))
        .ok_or_else(|| Error::Surgery("mesh has no interior vertex".into()))?;
    Ok((v, c))
}

fn clearance_field(m1: &IntrinsicMesh, spectrum: &Spectrum, m: usize) -> Result<Vec<f64>> {
    if m >= spectrum.len() {
        return Err(Error::InvalidArgument(format!(
            "m = {m} but only {} eigenpairs are available",
            spectrum.len()
        )));
    }
    let mut clear = vec![f64::INFINITY; m1.n_vertices()];
    for l in 1..=m {
        let set = extract_level_set(m1, &spectrum.eigenvectors[l], 0.0)?;
        if set.is_empty() {
            continue;
        }
        let d = distance_to_set(m1, &set, false);
        for (c, x) in clear.iter_mut().zip(d) {
            *c = c.min(x);
        }
    }
    Ok(clear)
}

/// Collar radius for gluing at `x1`: a third of the distance from `x1` to the nodal sets of
/// eigenvectors `1..=m`, capped by the injectivity radius of the ambient surface.
pub fn choose_epsilon0(m1: &IntrinsicMesh, spectrum: &Spectrum, m: usize, x1: usize) -> Result<f64> {
    let cap = m1.ambient().injectivity_cap();
    let clear = clearance_field(m1, spectrum, m)?[x1];
    if clear.is_infinite() {
        return Ok(cap);
    }
    let h = local_edge_length(m1, x1);
    if clear <= 1e-9 * h {
        return Err(Error::Surgery(format!(
            "vertex {x1} lies on a nodal set of one of the first {m} eigenfunctions"
        )));
    }
    Ok((clear / 3.0).min(cap))
}

/// Planar domain with a scaled socket attached at a boundary point.
#[derive(Debug, Clone)]
pub struct AttachedDomain {
    pub mesh: IntrinsicMesh,
    pub epsilon: f64,
    /// Number of leading vertices coming from `Ω`.
    pub omega1_vertices: usize,
}

fn attach_patch(omega: &IntrinsicMesh, x1: usize, anchor: f64, inner: f64, fill: bool) -> Result<PatchSpec> {
    let coords = omega.coords().ok_or(Error::NotEmbedded)?;
    if !matches!(omega.ambient(), Ambient::Plane) {
        return Err(Error::InvalidArgument("attachment needs a planar domain".into()));
    }
    if x1 >= omega.n_vertices() || !omega.boundary_mask()[x1] {
        return Err(Error::InvalidArgument(format!("vertex {x1} is not on the boundary")));
    }
    let h = local_edge_length(omega, x1);
    let outer_min = (1.5 * anchor).max(anchor + 2.0 * h);
    Ok(PatchSpec {
        center: coords[x1],
        anchor,
        inner,
        outer_min,
        n_ring: ring_count(outer_min, h),
        fill_center: fill,
        collar: None,
        h,
        id: 0,
    })
}

/// Number of arc segments the socket must have to attach at `x1` with the given grid anchor.
pub fn socket_arc_segments(omega: &IntrinsicMesh, x1: usize, anchor: f64) -> Result<usize> {
    Ok(attach_patch(omega, x1, anchor, anchor, false)?.n_ring / 2)
}

/// `Ω` remeshed like an attachment but with the half-ball filled by a fan down to `inner`.
pub fn attach_reference(omega: &IntrinsicMesh, x1: usize, anchor: f64, inner: f64) -> Result<IntrinsicMesh> {
    let p = attach_patch(omega, x1, anchor, inner, true)?;
    Ok(carve_patches(omega, &[p])?.mesh)
}

/// Removes the half-ball of radius `epsilon` at the boundary vertex `x1` and attaches the
/// socket `omega2`, scaled by `epsilon`, in its place. `omega2` lives in the canonical frame:
/// its arc is the lower unit semicircle, the rest of it lies outside the unit disk, and it is
/// rotated so that the half-plane `y > 0` maps to the exterior of `Ω`.
pub fn attach_domain(
    omega: &IntrinsicMesh,
    omega2: &IntrinsicMesh,
    x1: usize,
    epsilon: f64,
    anchor: f64,
) -> Result<AttachedDomain> {
    let p = attach_patch(omega, x1, anchor, epsilon, false)?;
    let carved = carve_patches(omega, &[p])?;
    let eps = carved.radii[0][0];
    let ring = &carved.inner_rings[0];
    let c = carved.mesh.coords().unwrap();
    let x = omega.coords().unwrap()[x1];
    // orientation of the exterior: the ring runs from one boundary side to the other through Ω
    let a0 = c[ring[0]];
    let a1 = c[*ring.last().unwrap()];
    let dir = [(a1[0] - a0[0]) / 2.0, (a1[1] - a0[1]) / 2.0];
    let len = dir[0].hypot(dir[1]);
    let (cs, sn) = (dir[0] / len, dir[1] / len);
    // canonical (1,0) -> dir, (0,1) -> outward normal (left of dir for a CCW outer loop)
    let mid = c[ring[ring.len() / 2]];
    let inward = [mid[0] - x[0], mid[1] - x[1]];
    let (ox, oy) = (-sn, cs);
    let flip = if ox * inward[0] + oy * inward[1] > 0.0 { -1.0 } else { 1.0 };
    let place = |q: [f64; 3]| -> [f64; 3] {
        let (u, v) = (q[0], flip * q[1]);
        [x[0] + eps * (u * cs - v * sn), x[1] + eps * (u * sn + v * cs), 0.0]
    };

    let sc = omega2.coords().ok_or(Error::NotEmbedded)?;
    let sb = omega2.boundary_mask();
    let arc: Vec<usize> = (0..omega2.n_vertices())
        .filter(|&v| sb[v] && (sc[v][0].hypot(sc[v][1]) - 1.0).abs() < 1e-12 && sc[v][1] <= 1e-12)
        .collect();
    if arc.len() != ring.len() {
        return Err(Error::Surgery(format!(
            "socket arc has {} vertices, the cut has {}",
            arc.len(),
            ring.len()
        )));
    }
    let n_omega = carved.mesh.n_vertices();
    let mut coords = c.to_vec();
    let mut origin = carved.mesh.origin().to_vec();
    let mut map = vec![usize::MAX; omega2.n_vertices()];
    for &v in &arc {
        let q = place(sc[v]);
        let (best, d) = ring
            .iter()
            .map(|&r| (r, (c[r][0] - q[0]).hypot(c[r][1] - q[1])))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if d > 1e-9 * eps.max(1e-300) {
            return Err(Error::Surgery("socket arc does not match the cut".into()));
        }
        map[v] = best;
    }
    for v in 0..omega2.n_vertices() {
        if map[v] == usize::MAX {
            map[v] = coords.len();
            coords.push(place(sc[v]));
            origin.push(VertexOrigin::Attached(v as u32));
        }
    }
    let mut tris = carved.mesh.triangles().to_vec();
    let mut regions = carved.mesh.regions().to_vec();
    for t in omega2.triangles() {
        let mut m = t.map(|v| map[v]);
        if flip < 0.0 {
            m.swap(1, 2);
        }
        tris.push(m);
        regions.push(Region::Omega2);
    }
    let mesh = IntrinsicMesh::from_coords_with_origin(coords, Ambient::Plane, tris, regions, origin)
        .map_err(|e| Error::Surgery(format!("attached mesh is invalid: {e}")))?;
    check_planar(&mesh, omega.boundary_loops().len())?;
    Ok(AttachedDomain {
        mesh,
        epsilon: eps,
        omega1_vertices: n_omega,
    })
}

/// Rejects meshes whose triangles overlap in the plane: the outer boundary must be a simple
/// polygon enclosing exactly the area of the holes plus the triangles.
fn check_planar(mesh: &IntrinsicMesh, expected_loops: usize) -> Result<()> {
    let c = mesh.coords().unwrap();
    let loops = mesh.boundary_loops();
    if loops.len() != expected_loops {
        return Err(Error::NotSimple(format!(
            "{} boundary curves, expected {expected_loops}",
            loops.len()
        )));
    }
    let mut polys: Vec<Vec<[f64; 2]>> = loops
        .iter()
        .map(|l| l.iter().map(|&v| [c[v][0], c[v][1]]).collect())
        .collect();
    polys.sort_by(|a, b| polygon_signed_area(b).abs().total_cmp(&polygon_signed_area(a).abs()));
    if polys.iter().any(|p| !polygon_is_simple(p)) {
        return Err(Error::NotSimple("boundary self-intersects".into()));
    }
    let enclosed = polygon_signed_area(&polys[0]).abs()
        - polys[1..].iter().map(|p| polygon_signed_area(p).abs()).sum::<f64>();
    let area = mesh.total_area();
    if (enclosed - area).abs() > 1e-9 * area {
        return Err(Error::Surgery(format!(
            "attached part overlaps the domain (enclosed area {enclosed}, mesh area {area})"
        )));
    }
    Ok(())
}

/// Holes `B(x_i, epsilon)` punched into a planar domain.
#[derive(Debug, Clone, PartialEq)]
pub struct PerforationSpec {
    pub centers: Vec<[f64; 2]>,
    pub epsilon: f64,
    /// Grid anchor shared by all meshes of a sweep; must be at least `epsilon`.
    pub anchor: f64,
    /// Smallest distance from a centre to the reference nodal set, if known.
    pub clearance: Option<f64>,
}

impl PerforationSpec {
    pub fn new(centers: Vec<[f64; 2]>, epsilon: f64, anchor: f64) -> Self {
        PerforationSpec {
            centers,
            epsilon,
            anchor,
            clearance: None,
        }
    }

    /// Records the distance from the centres to a nodal set.
    pub fn with_clearance(mut self, set: &NodalSet) -> Self {
        self.clearance = Some(nodal_clearance(&self.centers, set));
        self
    }
}

/// Smallest planar distance from any of the points to the segments of `set`.
pub fn nodal_clearance(centers: &[[f64; 2]], set: &NodalSet) -> f64 {
    let mut best = f64::INFINITY;
    for c in centers {
        for s in &set.segments {
            let a = [s.points[0][0], s.points[0][1]];
            let b = [s.points[1][0], s.points[1][1]];
            best = best.min(point_segment_dist2(*c, a, b));
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct Perforated {
    pub mesh: IntrinsicMesh,
    pub epsilon: f64,
    /// Boundary loop of each hole.
    pub holes: Vec<Vec<usize>>,
}

fn perforation_patches(omega: &IntrinsicMesh, spec: &PerforationSpec, inner: f64, fill: bool) -> Result<Vec<PatchSpec>> {
    let coords = omega.coords().ok_or(Error::NotEmbedded)?;
    if !matches!(omega.ambient(), Ambient::Plane) {
        return Err(Error::InvalidArgument("perforation needs a planar domain".into()));
    }
    if !(spec.epsilon > 0.0 && spec.epsilon <= spec.anchor * (1.0 + 1e-12)) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < epsilon <= anchor, got {} and {}",
            spec.epsilon, spec.anchor
        )));
    }
    if let Some(c) = spec.clearance {
        if !(c > 0.0) {
            return Err(Error::Surgery("a centre lies on the reference nodal set".into()));
        }
    }
    let mut patches = Vec::new();
    for (i, c) in spec.centers.iter().enumerate() {
        let nearest = (0..omega.n_vertices())
            .min_by(|&a, &b| {
                let da = (coords[a][0] - c[0]).hypot(coords[a][1] - c[1]);
                let db = (coords[b][0] - c[0]).hypot(coords[b][1] - c[1]);
                da.total_cmp(&db)
            })
            .unwrap();
        let h = local_edge_length(omega, nearest);
        let outer_min = (1.5 * spec.anchor).max(spec.anchor + 2.0 * h);
        patches.push(PatchSpec {
            center: [c[0], c[1], 0.0],
            anchor: spec.anchor,
            inner,
            outer_min,
            n_ring: ring_count(outer_min, h),
            fill_center: fill,
            collar: None,
            h,
            id: i as u16,
        });
    }
    // balls, including their remeshed neighbourhoods, must stay inside and apart
    for l in omega.boundary_loops() {
        for (p, spec_c) in patches.iter().zip(&spec.centers) {
            for k in 0..l.len() {
                let (a, b) = (coords[l[k]], coords[l[(k + 1) % l.len()]]);
                if point_segment_dist2(*spec_c, [a[0], a[1]], [b[0], b[1]]) <= p.cut_radius() {
                    return Err(Error::Surgery(format!(
                        "hole {} comes within {} of the boundary",
                        p.id,
                        p.cut_radius()
                    )));
                }
            }
        }
    }
    for i in 0..patches.len() {
        for j in i + 1..patches.len() {
            let (a, b) = (spec.centers[i], spec.centers[j]);
            if (a[0] - b[0]).hypot(a[1] - b[1]) <= patches[i].cut_radius() + patches[j].cut_radius() {
                return Err(Error::Surgery(format!("holes {i} and {j} intersect")));
            }
        }
    }
    Ok(patches)
}

/// `Ω` with the balls `B(x_i, epsilon)` removed. All boundary vertices of the result, including
/// those on the hole circles, are meant to carry Dirichlet conditions.
pub fn perforate(omega: &IntrinsicMesh, spec: &PerforationSpec) -> Result<Perforated> {
    if spec.centers.is_empty() {
        return Ok(Perforated {
            mesh: omega.clone(),
            epsilon: spec.epsilon,
            holes: vec![],
        });
    }
    let patches = perforation_patches(omega, spec, spec.epsilon, false)?;
    let carved = carve_patches(omega, &patches)?;
    Ok(Perforated {
        epsilon: carved.radii[0][0],
        holes: carved.inner_rings,
        mesh: carved.mesh,
    })
}

/// `Ω` remeshed with the perforation patches filled in down to radius `inner`.
pub fn perforation_reference(omega: &IntrinsicMesh, spec: &PerforationSpec, inner: f64) -> Result<IntrinsicMesh> {
    if spec.centers.is_empty() {
        return Ok(omega.clone());
    }
    let patches = perforation_patches(omega, spec, inner, true)?;
    Ok(carve_patches(omega, &patches)?.mesh)
}

/// Circumference of the neck circle in the glued metric.
pub fn neck_length(glued: &GluedMesh) -> f64 {
    let n = glued.neck.len();
    (0..n)
        .map(|i| glued.mesh.edge_length(glued.neck[i], glued.neck[(i + 1) % n]).unwrap())
        .sum()
}

/// Nominal neck circumference `2 pi epsilon`.
pub fn nominal_neck_length(epsilon: f64) -> f64 {
    2.0 * PI * epsilon
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigen::{dense_oracle, solve_lowest};
    use crate::fem::{assemble, assemble_with, BoundaryCondition};
    use crate::mesh::{build_flat_torus, build_rectangle, build_socket, build_sphere};

    fn sphere() -> IntrinsicMesh {
        build_sphere(3).unwrap()
    }

    fn torus() -> IntrinsicMesh {
        build_flat_torus(8.0, 8.0, 0.5).unwrap()
    }

    fn glue(m1: &IntrinsicMesh, m2: &IntrinsicMesh, eps: f64) -> GluedMesh {
        let spec = GluedSpec::new(m1, m2, eps, 0.3, 0, 0).unwrap();
        connected_sum(m1, m2, &spec).unwrap()
    }

    #[test]
    fn euler_characteristic_of_sums() {
        let s = sphere();
        let g = glue(&s, &torus(), 0.075);
        assert!(g.mesh.is_closed());
        assert_eq!(g.mesh.euler_characteristic(), 0);
        let g2 = glue(&s, &sphere(), 0.075);
        assert!(g2.mesh.is_closed());
        assert_eq!(g2.mesh.euler_characteristic(), 2);
        let t = torus();
        let spec = GluedSpec::new(&t, &t, 0.2, 0.4, 5, 0).unwrap();
        assert_eq!(connected_sum(&t, &t, &spec).unwrap().mesh.euler_characteristic(), -2);
    }

    #[test]
    fn area_scales_with_epsilon_squared() {
        let s = sphere();
        let t = torus();
        let spec = GluedSpec::new(&s, &t, 0.075, 0.3, 0, 0).unwrap();
        let g = connected_sum(&s, &t, &spec).unwrap();
        let a1 = carve_patches(&s, &[m1_patch(&s, &spec, 0.075, false).unwrap()]).unwrap().mesh;
        let a2 = carve_m2(&t, 0, spec.n_loop).unwrap().mesh;
        let m1_area = g.mesh.region_area(Region::M1Bulk) + g.mesh.region_area(Region::M1Collar);
        let expect = m1_area + g.epsilon * g.epsilon * a2.total_area();
        assert!((g.mesh.total_area() - expect).abs() < 1e-10);
        // only the triangles touching the neck see the scaled neck edges
        assert!((m1_area - a1.total_area()).abs() < 1e-5);
        assert_eq!(g.epsilon, 0.075);
        assert!(spec.d > spec.d_tilde);
        assert!((neck_length(&g) / nominal_neck_length(g.epsilon) - 1.0).abs() < 0.01);
    }

    #[test]
    fn regions_are_tagged() {
        let g = glue(&sphere(), &torus(), 0.075);
        for r in [Region::M1Bulk, Region::M1Collar, Region::M2] {
            assert!(g.mesh.region_area(r) > 0.0, "{r} missing");
        }
        // collar is the annulus eps < r <= eps0
        let collar = g.mesh.region_area(Region::M1Collar);
        let exact = 2.0 * PI * ((0.075f64).cos() - (0.3f64).cos());
        assert!((collar / exact - 1.0).abs() < 0.02);
    }

    #[test]
    fn rescaling_identity_on_m2_part() {
        let s = sphere();
        let t = torus();
        let eps = 0.0375;
        let spec = GluedSpec::new(&s, &t, eps, 0.3, 0, 0).unwrap();
        let g = connected_sum(&s, &t, &spec).unwrap();
        let keep: Vec<bool> = g.mesh.regions().iter().map(|&r| r == Region::M2).collect();
        let (sub_g, _) = g.mesh.submesh(&keep).unwrap();
        let unit = carve_m2(&t, 0, spec.n_loop).unwrap().mesh;
        let lam = |m: &IntrinsicMesh| {
            let op = assemble(m, BoundaryCondition::Dirichlet).unwrap();
            solve_lowest(&op, 1, 1e-12, 7).unwrap().eigenvalues[0]
        };
        let (lg, lu) = (lam(&sub_g), lam(&unit));
        assert!((lg * eps * eps / lu - 1.0).abs() < 1e-9, "{lg} {lu}");
    }

    #[test]
    fn m1_part_nests_in_reference() {
        let s = sphere();
        let t = torus();
        let spec = GluedSpec::new(&s, &t, 0.075, 0.3, 0, 0).unwrap();
        let r = m1_reference(&s, &spec, 0.0375 / 2.0).unwrap();
        for eps in [0.15, 0.075, 0.0375] {
            let g = connected_sum(&s, &t, &spec.with_epsilon(eps).unwrap()).unwrap();
            let corr = g.mesh.vertex_correspondence(&r);
            assert!(corr[..g.m1_vertices].iter().all(|c| c.is_some()));
        }
    }

    #[test]
    fn antipodal_gluing_points_agree() {
        let s = sphere();
        let t = torus();
        let c = s.coords().unwrap();
        let anti = (0..s.n_vertices())
            .find(|&v| crate::geom::dist3(c[v], [-c[0][0], -c[0][1], -c[0][2]]) < 1e-12)
            .unwrap();
        let lam = |x1: usize| {
            let spec = GluedSpec::new(&s, &t, 0.075, 0.3, x1, 0).unwrap();
            let g = connected_sum(&s, &t, &spec).unwrap();
            let op = assemble(&g.mesh, BoundaryCondition::Closed).unwrap();
            solve_lowest(&op, 4, 1e-10, 3).unwrap().eigenvalues
        };
        let (a, b) = (lam(0), lam(anti));
        for k in 0..a.len() {
            assert!((a[k] - b[k]).abs() <= 1e-6 * (1.0 + a[k]), "{a:?} {b:?}");
        }
    }

    #[test]
    fn epsilon0_at_pole() {
        let s = build_sphere(3).unwrap();
        let op = assemble(&s, BoundaryCondition::Closed).unwrap();
        let sp = solve_lowest(&op, 4, 1e-10, 1).unwrap();
        let c = s.coords().unwrap();
        let pole = (0..s.n_vertices()).max_by(|&a, &b| c[a][2].total_cmp(&c[b][2])).unwrap();
        let e0 = choose_epsilon0(&s, &sp, 0, pole).unwrap();
        assert_eq!(e0, s.ambient().injectivity_cap());
        let e3 = choose_epsilon0(&s, &sp, 3, pole).unwrap();
        assert!(e3 <= PI / 6.0 + 1e-9 && e3 > 0.0);
        let (v, clear) = best_gluing_vertex(&s, &sp, 3).unwrap();
        assert!(clear > 0.0 && v < s.n_vertices());
    }

    #[test]
    fn epsilon0_on_torus_matches_brute_force() {
        let t = build_flat_torus(2.0 * PI, 2.0 * PI, 2.0 * PI / 24.0).unwrap();
        let op = assemble(&t, BoundaryCondition::Closed).unwrap();
        let sp = solve_lowest(&op, 3, 1e-10, 5).unwrap();
        let x1 = 37;
        let e0 = choose_epsilon0(&t, &sp, 2, x1).unwrap();
        // brute force: planar distance to the nodal polylines, minimal image on the torus
        let c = t.coords().unwrap();
        let mut best = f64::INFINITY;
        for l in 1..=2 {
            let set = extract_level_set(&t, &sp.eigenvectors[l], 0.0).unwrap();
            for s in &set.segments {
                for dx in [-1.0, 0.0, 1.0] {
                    for dy in [-1.0, 0.0, 1.0] {
                        let p = [c[x1][0] + dx * 2.0 * PI, c[x1][1] + dy * 2.0 * PI];
                        let a = [s.points[0][0], s.points[0][1]];
                        let b = [s.points[1][0], s.points[1][1]];
                        best = best.min(point_segment_dist2(p, a, b));
                    }
                }
            }
        }
        let h = 2.0 * PI / 24.0;
        assert!((e0 - best / 3.0).abs() <= h, "{e0} vs {}", best / 3.0);
    }

    #[test]
    fn attach_builds_planar_domain() {
        let omega = build_rectangle(2.0, 1.0, 1.0 / 16.0).unwrap();
        let c = omega.coords().unwrap();
        let x1 = (0..omega.n_vertices())
            .find(|&v| (c[v][0] - 0.5).abs() < 1e-12 && (c[v][1] - 1.0).abs() < 1e-12)
            .unwrap();
        let anchor = 0.1;
        let arc = socket_arc_segments(&omega, x1, anchor).unwrap();
        let socket = build_socket(arc, 1.0, 1.0, 0.25).unwrap();
        let mut prev = None;
        for eps in [0.05, 0.025, 0.0125] {
            let a = attach_domain(&omega, &socket, x1, eps, anchor).unwrap();
            assert_eq!(a.mesh.boundary_loops().len(), 1);
            assert!(a.mesh.region_area(Region::Omega2) > 0.0);
            let deficit = (a.mesh.total_area() - 2.0).abs();
            // the half-disk is replaced by itself, the stem adds eps^2 * stem area
            assert!((deficit - eps * eps).abs() < 1e-10);
            if let Some(d) = prev {
                assert!(deficit < d);
            }
            prev = Some(deficit);
        }
    }

    #[test]
    fn overlapping_socket_rejected() {
        let omega = build_rectangle(2.0, 1.0, 1.0 / 16.0).unwrap();
        let c = omega.coords().unwrap();
        let x1 = (0..omega.n_vertices())
            .find(|&v| (c[v][0] - 0.5).abs() < 1e-12 && (c[v][1] - 1.0).abs() < 1e-12)
            .unwrap();
        let arc = socket_arc_segments(&omega, x1, 0.1).unwrap();
        // fold the stem back through the half-disk into Ω
        let socket = build_socket(arc, 1.0, 1.0, 0.25).unwrap();
        let sc: Vec<[f64; 3]> = socket
            .coords()
            .unwrap()
            .iter()
            .map(|p| if p[1] > 1e-12 { [p[0], -p[1] * 0.5 - 0.2, 0.0] } else { *p })
            .collect();
        let bent = IntrinsicMesh::from_coords(sc, Ambient::Plane, socket.triangles().to_vec(), socket.regions().to_vec());
        assert!(attach_domain(&omega, &bent.unwrap(), x1, 0.05, 0.1).is_err());
    }

    #[test]
    fn perforation_census_and_monotonicity() {
        let omega = build_rectangle(2.0, 1.0, 1.0 / 16.0).unwrap();
        let centers = vec![[0.5, 0.5], [1.5, 0.5]];
        let anchor = 0.1;
        let spec0 = PerforationSpec::new(vec![], 0.05, anchor);
        assert_eq!(perforate(&omega, &spec0).unwrap().mesh.n_triangles(), omega.n_triangles());
        let reference = perforation_reference(&omega, &PerforationSpec::new(centers.clone(), 0.05, anchor), 0.0125).unwrap();
        let lam = |m: &IntrinsicMesh| {
            let op = assemble(m, BoundaryCondition::Dirichlet).unwrap();
            solve_lowest(&op, 2, 1e-11, 1).unwrap().eigenvalues
        };
        let base = lam(&reference);
        let mut prev = f64::INFINITY;
        for eps in [0.05, 0.025, 0.0125] {
            let p = perforate(&omega, &PerforationSpec::new(centers.clone(), eps, anchor)).unwrap();
            assert_eq!(p.mesh.boundary_loops().len(), 3);
            assert_eq!(p.holes.len(), 2);
            let l = lam(&p.mesh);
            assert!(l[1] >= base[1] * (1.0 - 1e-10), "{} < {}", l[1], base[1]);
            assert!(l[1] <= prev * (1.0 + 1e-10));
            prev = l[1];
        }
        assert!(perforate(&omega, &PerforationSpec::new(vec![[0.05, 0.5]], 0.02, 0.02)).is_err());
        assert!(perforate(&omega, &PerforationSpec::new(vec![[0.5, 0.5], [0.55, 0.5]], 0.02, 0.02)).is_err());
    }

    #[test]
    fn dirichlet_on_submesh_is_exact_monotone() {
        // removing triangles from a shared triangulation never lowers the first eigenvalue
        let omega = build_rectangle(1.0, 1.0, 1.0 / 8.0).unwrap();
        let c = omega.coords().unwrap();
        let keep: Vec<bool> = omega
            .triangles()
            .iter()
            .map(|t| t.iter().map(|&v| c[v][0]).sum::<f64>() / 3.0 < 0.8)
            .collect();
        let (sub, _) = omega.submesh(&keep).unwrap();
        let l = |m: &IntrinsicMesh| {
            let op = assemble_with(m, BoundaryCondition::Dirichlet, false, None).unwrap();
            dense_oracle(&op, 1).unwrap().eigenvalues[0]
        };
        assert!(l(&sub) >= l(&omega));
    }
}
