//! Polar-graded patches: the neighbourhood of a point is cut out and replaced by concentric
//! rings of vertices on a fixed geometric radius grid, optionally closed by a central fan.
//!
//! Because ring radii come from a grid that does not depend on the innermost radius, patches
//! that differ only in how far in the rings go produce nested meshes: every vertex and
//! triangle of the coarser-holed mesh also occurs in the finer-holed one.

use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use spade::{ConstrainedDelaunayTriangulation, Point2, Triangulation};

use super::{Chart, IntrinsicMesh, Region, VertexOrigin};
use crate::error::{Error, Result};
use crate::geom::{orient2, point_in_polygon};

/// Geometry of one patch.
#[derive(Debug, Clone)]
pub struct PatchSpec {
    /// Centre point; for boundary patches it must coincide with a boundary vertex.
    pub center: [f64; 3],
    /// Grid anchor: ring radii are `anchor * 2^(j / q)` for integer `j`.
    pub anchor: f64,
    /// Radius of the innermost ring. Snapped to the nearest grid radius.
    pub inner: f64,
    /// Lower bound for the outermost ring radius (rounded up to the grid).
    pub outer_min: f64,
    /// Vertices per full ring; must be a multiple of 4.
    pub n_ring: usize,
    /// Close the innermost ring with a fan around the centre.
    pub fill_center: bool,
    /// Triangles inside this radius get `collar_region`.
    pub collar: Option<(f64, Region)>,
    /// Mesh size used for the cut radius.
    pub h: f64,
    pub id: u16,
}

/// Ring count per octave for `n` vertices per ring: chosen so that the radial step between
/// rings is close to the tangential spacing.
pub fn rings_per_octave(n_ring: usize) -> u32 {
    let q = (2f64.ln() / (1.0 + 2.0 * PI / n_ring as f64).ln()).round();
    q.max(1.0) as u32
}

/// Ring vertex count for a patch whose outermost ring has radius `r_out` on a mesh of size `h`.
pub fn ring_count(r_out: f64, h: f64) -> usize {
    let n = ((2.0 * PI * r_out / h).ceil() as usize).max(16);
    n.div_ceil(4) * 4
}

/// Grid radius `anchor * 2^(j/q)`.
pub fn grid_radius(anchor: f64, q: u32, j: i32) -> f64 {
    anchor * (j as f64 / q as f64).exp2()
}

/// Nearest grid index to radius `r`.
pub fn grid_index(anchor: f64, q: u32, r: f64) -> i32 {
    ((r / anchor).log2() * q as f64).round() as i32
}

impl PatchSpec {
    pub fn q(&self) -> u32 {
        rings_per_octave(self.n_ring)
    }
    fn inner_index(&self) -> i32 {
        grid_index(self.anchor, self.q(), self.inner)
    }
    fn outer_index(&self) -> i32 {
        let q = self.q();
        let mut j = grid_index(self.anchor, q, self.outer_min);
        while grid_radius(self.anchor, q, j) < self.outer_min * (1.0 - 1e-12) {
            j += 1;
        }
        j
    }
    /// Radii of all rings from innermost to outermost.
    pub fn ring_radii(&self) -> Vec<f64> {
        let q = self.q();
        (self.inner_index()..=self.outer_index())
            .map(|j| grid_radius(self.anchor, q, j))
            .collect()
    }
    pub fn outer_radius(&self) -> f64 {
        grid_radius(self.anchor, self.q(), self.outer_index())
    }
    pub fn cut_radius(&self) -> f64 {
        self.outer_radius() + self.h
    }
}

#[derive(Debug, Clone)]
pub struct CarvedMesh {
    pub mesh: IntrinsicMesh,
    /// Innermost ring of each patch, ordered by increasing chart angle.
    pub inner_rings: Vec<Vec<usize>>,
    /// Centre vertex of each patch that was closed with a fan.
    pub centers: Vec<Option<usize>>,
    /// Radii actually used per patch.
    pub radii: Vec<Vec<f64>>,
}

struct Prepared {
    chart: Chart,
    removed: Vec<usize>,
    /// Boundary of the retained region around the hole, in retained-boundary direction.
    cut: Vec<usize>,
    cut_closed: bool,
    /// Angular span of a boundary patch: (start angle, span).
    sector: Option<(f64, f64)>,
    region: Region,
}

/// Cuts every patch out of `mesh` and rebuilds it from rings. Requires an embedded mesh.
pub fn carve_patches(mesh: &IntrinsicMesh, patches: &[PatchSpec]) -> Result<CarvedMesh> {
    let coords = mesh.coords().ok_or(Error::NotEmbedded)?.to_vec();
    let ambient = mesh.ambient();
    if !ambient.is_embedded() {
        return Err(Error::NotEmbedded);
    }
    let boundary = mesh.boundary_mask();
    let mut removed_all = vec![false; mesh.n_triangles()];
    let mut touched_vertices: HashSet<usize> = HashSet::new();
    let mut prepared = Vec::new();
    for p in patches {
        if p.n_ring % 4 != 0 || p.n_ring < 8 {
            return Err(Error::InvalidArgument(format!(
                "ring vertex count {} must be a multiple of 4 and at least 8",
                p.n_ring
            )));
        }
        if !(p.inner > 0.0 && p.anchor > 0.0 && p.h > 0.0) {
            return Err(Error::InvalidArgument("patch radii must be positive".into()));
        }
        let prep = prepare(mesh, &coords, &boundary, p)?;
        for &t in &prep.removed {
            if removed_all[t] {
                return Err(Error::Surgery(format!("patch {} overlaps another patch", p.id)));
            }
            removed_all[t] = true;
        }
        let mut verts = HashSet::new();
        for &t in &prep.removed {
            verts.extend(mesh.triangles()[t]);
        }
        if verts.iter().any(|v| touched_vertices.contains(v)) {
            return Err(Error::Surgery(format!("patch {} touches another patch", p.id)));
        }
        touched_vertices.extend(verts);
        prepared.push(prep);
    }

    // retained vertices keep their relative order
    let tris = mesh.triangles();
    let mut used = vec![false; mesh.n_vertices()];
    for (t, tri) in tris.iter().enumerate() {
        if !removed_all[t] {
            for &v in tri {
                used[v] = true;
            }
        }
    }
    let mut new_index = vec![usize::MAX; mesh.n_vertices()];
    let mut out_coords = Vec::new();
    let mut out_origin = Vec::new();
    for v in 0..mesh.n_vertices() {
        if used[v] {
            new_index[v] = out_coords.len();
            out_coords.push(coords[v]);
            out_origin.push(mesh.origin()[v]);
        }
    }
    let mut out_tris = Vec::new();
    let mut out_regions = Vec::new();
    for (t, tri) in tris.iter().enumerate() {
        if !removed_all[t] {
            out_tris.push([new_index[tri[0]], new_index[tri[1]], new_index[tri[2]]]);
            out_regions.push(mesh.region(t));
        }
    }

    let mut inner_rings = Vec::new();
    let mut centers = Vec::new();
    let mut radii_out = Vec::new();
    for (p, prep) in patches.iter().zip(&prepared) {
        let radii = p.ring_radii();
        if radii.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "patch {}: inner radius {} exceeds outer radius {}",
                p.id,
                p.inner,
                p.outer_radius()
            )));
        }
        let q = p.q();
        let j0 = p.inner_index();
        let (start, span, per_ring, closed) = match prep.sector {
            None => (0.0, 2.0 * PI, p.n_ring, true),
            Some((s, span)) => (s, span, p.n_ring / 2 + 1, false),
        };
        let segments = if closed { per_ring } else { per_ring - 1 };
        let mut rings: Vec<Vec<usize>> = Vec::with_capacity(radii.len());
        for (ji, &r) in radii.iter().enumerate() {
            let r_exact = grid_radius(p.anchor, q, j0 + ji as i32);
            debug_assert_eq!(r, r_exact);
            let mut ring = Vec::with_capacity(per_ring);
            for k in 0..per_ring {
                let theta = start + span * k as f64 / segments as f64;
                ring.push(out_coords.len());
                out_coords.push(prep.chart.from_polar(r, theta));
                out_origin.push(VertexOrigin::Ring {
                    patch: p.id,
                    radius_bits: r.to_bits(),
                    index: k as u32,
                });
            }
            rings.push(ring);
        }
        let tag_for = |r_outer: f64| -> Region {
            match p.collar {
                Some((rc, reg)) if r_outer <= rc * (1.0 + 1e-12) => reg,
                _ => prep.region,
            }
        };
        for w in 0..radii.len() - 1 {
            let (inner, outer) = (&rings[w], &rings[w + 1]);
            let region = tag_for(radii[w + 1]);
            for k in 0..segments {
                let k1 = (k + 1) % per_ring;
                let (a, b, c, d) = (inner[k], inner[k1], outer[k1], outer[k]);
                if (k + w) % 2 == 0 {
                    out_tris.push([a, d, c]);
                    out_tris.push([a, c, b]);
                } else {
                    out_tris.push([a, d, b]);
                    out_tris.push([d, c, b]);
                }
                out_regions.push(region);
                out_regions.push(region);
            }
        }
        let center = if p.fill_center {
            let c = out_coords.len();
            out_coords.push(prep.chart.from_polar(0.0, 0.0));
            out_origin.push(VertexOrigin::Center { patch: p.id });
            let region = tag_for(radii[0]);
            for k in 0..segments {
                out_tris.push([c, rings[0][k], rings[0][(k + 1) % per_ring]]);
                out_regions.push(region);
            }
            Some(c)
        } else {
            None
        };
        // fill between the cut and the outermost ring
        let cut: Vec<usize> = prep.cut.iter().map(|&v| new_index[v]).collect();
        let ring = rings.last().unwrap();
        fill_gap(
            &prep.chart,
            &out_coords,
            &cut,
            prep.cut_closed,
            ring,
            closed,
            prep.region,
            &mut out_tris,
            &mut out_regions,
        )?;
        inner_rings.push(rings[0].clone());
        centers.push(center);
        radii_out.push(radii);
    }
    let out = IntrinsicMesh::from_coords_with_origin(
        out_coords,
        ambient,
        out_tris,
        out_regions,
        out_origin,
    )?;
    Ok(CarvedMesh {
        mesh: out,
        inner_rings,
        centers,
        radii: radii_out,
    })
}

fn prepare(
    mesh: &IntrinsicMesh,
    coords: &[[f64; 3]],
    boundary: &[bool],
    p: &PatchSpec,
) -> Result<Prepared> {
    let ambient = mesh.ambient();
    let r_cut = p.cut_radius();
    let bad = |reason: String| Error::BallNotDisk {
        center: usize::MAX,
        radius: r_cut,
        reason,
    };
    if r_cut >= ambient.injectivity_cap() {
        return Err(bad(format!(
            "cut radius exceeds the injectivity cap {}",
            ambient.injectivity_cap()
        )));
    }
    let mut chart = ambient.chart(p.center)?;
    let polar: Vec<(f64, f64)> = coords.iter().map(|&c| chart.to_polar(c)).collect();
    let inside: Vec<bool> = polar.iter().map(|&(r, _)| r < r_cut).collect();
    let tris = mesh.triangles();
    let removed: Vec<usize> = (0..tris.len())
        .filter(|&t| tris[t].iter().any(|&v| inside[v]))
        .collect();
    if removed.is_empty() {
        return Err(bad("no triangles within the cut radius".into()));
    }
    let mut is_removed = vec![false; tris.len()];
    for &t in &removed {
        is_removed[t] = true;
    }
    // the patch centre must lie in a removed triangle
    let center_vertex = (0..coords.len()).find(|&v| polar[v].0 <= 1e-12 * p.anchor.max(1e-300));

    // boundary half-edges of the retained region that face the removed region
    let mut cut_next: HashMap<usize, usize> = HashMap::new();
    let mut cut_prev: HashMap<usize, usize> = HashMap::new();
    let mut orient_votes = 0i64;
    for (t, tri) in tris.iter().enumerate() {
        if is_removed[t] {
            continue;
        }
        let nbs = mesh.triangle_neighbors(t);
        for i in 0..3 {
            if let Some(o) = nbs[i] {
                if is_removed[o] {
                    let (u, v) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                    if cut_next.insert(u, v).is_some() || cut_prev.insert(v, u).is_some() {
                        return Err(bad("cut boundary is not a simple curve".into()));
                    }
                    let pl = |x: usize| {
                        let (r, th) = chart.to_polar(coords[x]);
                        [r * th.cos(), r * th.sin()]
                    };
                    let s = orient2(pl(tri[0]), pl(tri[1]), pl(tri[2]));
                    orient_votes += if s > 0.0 { 1 } else { -1 };
                }
            }
        }
    }
    if cut_next.is_empty() {
        return Err(bad("removed region has no interior boundary".into()));
    }
    if orient_votes < 0 {
        chart.mirror();
    } else if orient_votes == 0 {
        return Err(bad("cannot orient the chart".into()));
    }

    let removed_boundary: Vec<usize> = {
        let mut s: Vec<usize> = removed
            .iter()
            .flat_map(|&t| tris[t])
            .filter(|&v| boundary[v])
            .collect();
        s.sort_unstable();
        s.dedup();
        s
    };

    let region = {
        let mut counts: HashMap<Region, usize> = HashMap::new();
        for &t in &removed {
            *counts.entry(mesh.region(t)).or_default() += 1;
        }
        let mut v: Vec<_> = counts.into_iter().collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v[0].0
    };

    if removed_boundary.is_empty() {
        // interior patch: the cut is a closed loop
        let start = *cut_next.keys().min().unwrap();
        let mut cut = vec![start];
        let mut v = cut_next[&start];
        while v != start {
            if cut.len() > cut_next.len() {
                return Err(bad("cut boundary is not a single loop".into()));
            }
            cut.push(v);
            v = *cut_next
                .get(&v)
                .ok_or_else(|| bad("cut boundary is open".into()))?;
        }
        if cut.len() != cut_next.len() {
            return Err(bad(format!(
                "removed region is not a disk ({} boundary curves)",
                1 + (cut_next.len() > cut.len()) as usize
            )));
        }
        // disk check: V - E + F = 1 for the removed set
        let chi = euler_of(mesh, &removed);
        if chi != 1 {
            return Err(bad(format!("removed region has Euler characteristic {chi}")));
        }
        return Ok(Prepared {
            chart,
            removed,
            cut,
            cut_closed: true,
            sector: None,
            region,
        });
    }

    // boundary patch: centre must be a boundary vertex on a straight stretch of boundary
    let cv = center_vertex
        .filter(|&v| boundary[v])
        .ok_or_else(|| bad("ball meets the boundary but its centre is not a boundary vertex".into()))?;
    let lp = mesh
        .boundary_loops()
        .iter()
        .find(|l| l.contains(&cv))
        .expect("boundary vertex lies on a loop");
    let i = lp.iter().position(|&v| v == cv).unwrap();
    let m = lp.len();
    let prev = lp[(i + m - 1) % m];
    let next = lp[(i + 1) % m];
    let th_prev = chart.to_polar(coords[prev]).1;
    let th_next = chart.to_polar(coords[next]).1;
    let span = (th_prev - th_next).rem_euclid(2.0 * PI);
    if (span - PI).abs() > 1e-9 {
        return Err(bad(format!(
            "boundary at the centre is not straight (interior angle {span})"
        )));
    }
    // every removed boundary vertex must lie on the line through the centre
    let dir = [th_next.cos(), th_next.sin()];
    for &v in &removed_boundary {
        let (r, th) = chart.to_polar(coords[v]);
        let off = r * (th.sin() * dir[0] - th.cos() * dir[1]);
        if off.abs() > 1e-9 * r_cut.max(1.0) || !lp.contains(&v) {
            return Err(bad("ball reaches a corner or another boundary curve".into()));
        }
    }
    // chain of the retained region's new boundary, oriented along the boundary loop
    let start = *cut_next
        .keys()
        .filter(|v| !cut_prev.contains_key(v))
        .min()
        .ok_or_else(|| bad("ball around a boundary vertex produced a closed cut".into()))?;
    let mut cut = vec![start];
    let mut v = start;
    while let Some(&w) = cut_next.get(&v) {
        cut.push(w);
        v = w;
        if cut.len() > cut_next.len() + 1 {
            return Err(bad("cut chain does not terminate".into()));
        }
    }
    if cut.len() != cut_next.len() + 1 {
        return Err(bad("cut is not a single chain".into()));
    }
    let chi = euler_of(mesh, &removed);
    if chi != 1 {
        return Err(bad(format!("removed region has Euler characteristic {chi}")));
    }
    Ok(Prepared {
        chart,
        removed,
        cut,
        cut_closed: false,
        sector: Some((th_next, span)),
        region,
    })
}

fn euler_of(mesh: &IntrinsicMesh, tris: &[usize]) -> i64 {
    let mut vs = HashSet::new();
    let mut es = HashSet::new();
    for &t in tris {
        let tri = mesh.triangles()[t];
        vs.extend(tri);
        es.extend(mesh.triangle_edges(t));
    }
    vs.len() as i64 - es.len() as i64 + tris.len() as i64
}

/// Triangulates the region between the cut (retained side) and the outermost ring.
#[allow(clippy::too_many_arguments)]
fn fill_gap(
    chart: &Chart,
    coords: &[[f64; 3]],
    cut: &[usize],
    cut_closed: bool,
    ring: &[usize],
    ring_closed: bool,
    region: Region,
    out_tris: &mut Vec<[usize; 3]>,
    out_regions: &mut Vec<Region>,
) -> Result<()> {
    let plane = |v: usize| chart.to_plane(coords[v]);
    let mut verts: Vec<usize> = Vec::new();
    let mut constraints = Vec::new();
    let mut polygon: Vec<[f64; 2]> = Vec::new();
    let mut holes: Vec<Vec<[f64; 2]>> = Vec::new();
    if cut_closed {
        // annulus: outer curve is the cut, inner curve is the ring
        verts.extend_from_slice(cut);
        let n = cut.len();
        for i in 0..n {
            constraints.push([i, (i + 1) % n]);
        }
        let off = verts.len();
        verts.extend_from_slice(ring);
        let m = ring.len();
        for i in 0..m {
            constraints.push([off + i, off + (i + 1) % m]);
        }
        polygon = cut.iter().map(|&v| plane(v)).collect();
        holes.push(ring.iter().map(|&v| plane(v)).collect());
        debug_assert!(ring_closed);
    } else {
        // closed polygon: cut chain, then the ring starting from the end nearest the chain end
        verts.extend_from_slice(cut);
        let end = plane(*cut.last().unwrap());
        let d_first = crate::geom::dist2(end, plane(ring[0]));
        let d_last = crate::geom::dist2(end, plane(*ring.last().unwrap()));
        if d_first <= d_last {
            verts.extend(ring.iter().copied());
        } else {
            verts.extend(ring.iter().rev().copied());
        }
        let n = verts.len();
        for i in 0..n {
            constraints.push([i, (i + 1) % n]);
        }
        for &v in &verts {
            polygon.push(plane(v));
        }
    }
    let pts: Vec<Point2<f64>> = verts
        .iter()
        .map(|&v| {
            let p = plane(v);
            Point2::new(p[0], p[1])
        })
        .collect();
    let cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::bulk_load_cdt(pts, constraints)
            .map_err(|e| Error::Surgery(format!("gap triangulation failed: {e:?}")))?;
    // spade keeps the input order of vertices in bulk loads only up to deduplication;
    // map back by position
    let mut by_pos: HashMap<(u64, u64), usize> = HashMap::new();
    for &v in &verts {
        let p = plane(v);
        by_pos.insert((p[0].to_bits(), p[1].to_bits()), v);
    }
    if by_pos.len() != verts.len() {
        return Err(Error::Surgery("gap vertices coincide in the chart".into()));
    }
    let mut faces = Vec::new();
    for f in cdt.inner_faces() {
        let vs = f.vertices();
        let p: Vec<[f64; 2]> = vs.iter().map(|v| [v.position().x, v.position().y]).collect();
        let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
        let inside = point_in_polygon(c, &polygon) && !holes.iter().any(|h| point_in_polygon(c, h));
        if !inside {
            continue;
        }
        let ids: Vec<usize> = p
            .iter()
            .map(|q| by_pos[&(q[0].to_bits(), q[1].to_bits())])
            .collect();
        faces.push([ids[0], ids[1], ids[2]]);
    }
    if faces.is_empty() {
        return Err(Error::Surgery("gap between cut and rings is empty".into()));
    }
    for f in faces {
        out_tris.push(f);
        out_regions.push(region);
    }
    Ok(())
}

/// Removes the geodesic ball of the given radius around vertex `center`. The new boundary
/// is a ring of vertices on the metric circle.
pub fn remove_geodesic_ball(mesh: &IntrinsicMesh, center: usize, radius: f64) -> Result<IntrinsicMesh> {
    let coords = mesh.coords().ok_or(Error::NotEmbedded)?;
    if center >= mesh.n_vertices() {
        return Err(Error::InvalidArgument(format!("vertex {center} out of range")));
    }
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius {radius}")));
    }
    let h = local_edge_length(mesh, center);
    let outer_min = (1.5 * radius).max(radius + 2.0 * h);
    let spec = PatchSpec {
        center: coords[center],
        anchor: radius,
        inner: radius,
        outer_min,
        n_ring: ring_count(outer_min, h),
        fill_center: false,
        collar: None,
        h,
        id: 0,
    };
    carve_patches(mesh, &[spec])
        .map(|c| c.mesh)
        .map_err(|e| match e {
            Error::BallNotDisk { radius, reason, .. } => Error::BallNotDisk {
                center,
                radius,
                reason,
            },
            e => e,
        })
}

/// Mean length of the edges incident to `v`.
pub fn local_edge_length(mesh: &IntrinsicMesh, v: usize) -> f64 {
    let nb = &mesh.vertex_neighbors()[v];
    nb.iter().map(|&u| mesh.edge_length(u, v).unwrap()).sum::<f64>() / nb.len() as f64
}
