//! Mesh constructors for the closed surfaces and planar domains used by the experiments.

use std::collections::{HashMap, HashSet};

use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use super::{edge_key, Ambient, IntrinsicMesh, Region};
use crate::error::{Error, Result};
use crate::geom::{point_in_polygon, polygon_is_simple, polygon_signed_area};

/// Structured mesh of `[0, width] x [0, height]`. Each grid cell is split along a diagonal
/// whose direction alternates in a checkerboard pattern, so the mesh inherits the mirror
/// symmetries of the rectangle when the cell counts are even.
pub fn build_rectangle(width: f64, height: f64, h: f64) -> Result<IntrinsicMesh> {
    if !(width > 0.0 && height > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rectangle {width} x {height} with h = {h}"
        )));
    }
    let extent = width.min(height);
    if h > extent {
        return Err(Error::UnderResolved { h, extent });
    }
    let nx = (width / h - 1e-9).ceil().max(1.0) as usize;
    let ny = (height / h - 1e-9).ceil().max(1.0) as usize;
    let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            coords.push([width * i as f64 / nx as f64, height * j as f64 / ny as f64, 0.0]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            } else {
                tris.push([a, b, d]);
                tris.push([b, c, d]);
            }
        }
    }
    let n = tris.len();
    IntrinsicMesh::from_coords(coords, Ambient::Plane, tris, vec![Region::Omega1; n])
}

/// Icosphere: the icosahedron subdivided `subdivisions` times, projected to the unit sphere.
/// Triangles are counter-clockwise seen from outside; edge lengths are chordal.
pub fn build_sphere(subdivisions: u32) -> Result<IntrinsicMesh> {
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
    let mut coords: Vec<[f64; 3]> = raw.iter().map(|&p| unit(p)).collect();
    let mut tris: Vec<[usize; 3]> = vec![
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
    for _ in 0..subdivisions {
        let mut mid: HashMap<[usize; 2], usize> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        let mut midpoint = |a: usize, b: usize, coords: &mut Vec<[f64; 3]>| -> usize {
            *mid.entry(edge_key(a, b)).or_insert_with(|| {
                let (p, q) = (coords[a], coords[b]);
                coords.push(unit([p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                coords.len() - 1
            })
        };
        for &[a, b, c] in &tris {
            let ab = midpoint(a, b, &mut coords);
            let bc = midpoint(b, c, &mut coords);
            let ca = midpoint(c, a, &mut coords);
            next.push([a, ab, ca]);
            next.push([b, bc, ab]);
            next.push([c, ca, bc]);
            next.push([ab, bc, ca]);
        }
        tris = next;
    }
    let n = tris.len();
    IntrinsicMesh::from_coords(coords, Ambient::Sphere, tris, vec![Region::M1Bulk; n])
}

fn unit(p: [f64; 3]) -> [f64; 3] {
    let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / n, p[1] / n, p[2] / n]
}

/// Flat torus `R^2 / (lx Z x ly Z)` triangulated by a periodic structured grid.
pub fn build_flat_torus(lx: f64, ly: f64, h: f64) -> Result<IntrinsicMesh> {
    if !(lx > 0.0 && ly > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument(format!("torus {lx} x {ly} with h = {h}")));
    }
    let nx = ((lx / h - 1e-9).ceil() as usize).max(3);
    let ny = ((ly / h - 1e-9).ceil() as usize).max(3);
    let mut coords = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            coords.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64, 0.0]);
        }
    }
    let id = |i: usize, j: usize| (j % ny) * nx + (i % nx);
    let mut tris = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    let n = tris.len();
    IntrinsicMesh::from_coords(
        coords,
        Ambient::FlatTorus { lx, ly },
        tris,
        vec![Region::M1Bulk; n],
    )
}

/// Closed orientable surface of genus `genus`.
///
/// Genus 1 is the flat square torus of period 2 pi. Higher genus is realized as the double of
/// a rectangle with `genus` square holes: two copies of the perforated rectangle glued along
/// all boundary curves, with the second copy's orientation reversed.
pub fn build_genus_surface(genus: u32, h: f64) -> Result<IntrinsicMesh> {
    if genus == 0 {
        return Err(Error::InvalidArgument("genus must be at least 1".into()));
    }
    if genus == 1 {
        let l = 2.0 * std::f64::consts::PI;
        return build_flat_torus(l, l, h);
    }
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h = {h}")));
    }
    // holes of unit side separated by unit gaps; at least two cells across every gap so no
    // interior edge joins two boundary vertices
    let per = ((1.0 / h - 1e-9).ceil() as usize).max(2);
    let cell = 1.0 / per as f64;
    let g = genus as usize;
    let nx = (2 * g + 1) * per;
    let ny = 3 * per;
    let is_hole = |i: usize, j: usize| -> bool {
        let (ui, uj) = (i / per, j / per);
        uj == 1 && ui % 2 == 1
    };
    // corner and centre vertices of the top sheet
    let mut corner_used = vec![false; (nx + 1) * (ny + 1)];
    for j in 0..ny {
        for i in 0..nx {
            if !is_hole(i, j) {
                for (di, dj) in [(0, 0), (1, 0), (1, 1), (0, 1)] {
                    corner_used[(j + dj) * (nx + 1) + i + di] = true;
                }
            }
        }
    }
    // a corner lies on the boundary if some incident cell is missing
    let on_boundary = |i: usize, j: usize| -> bool {
        for (di, dj) in [(0isize, 0isize), (-1, 0), (-1, -1), (0, -1)] {
            let (ci, cj) = (i as isize + di, j as isize + dj);
            if ci < 0 || cj < 0 || ci >= nx as isize || cj >= ny as isize {
                return true;
            }
            if is_hole(ci as usize, cj as usize) {
                return true;
            }
        }
        false
    };
    let mut coords = Vec::new();
    let mut top = vec![usize::MAX; (nx + 1) * (ny + 1)];
    let mut bottom = vec![usize::MAX; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            let k = j * (nx + 1) + i;
            if !corner_used[k] {
                continue;
            }
            let (x, y) = (i as f64 * cell, j as f64 * cell);
            top[k] = coords.len();
            if on_boundary(i, j) {
                coords.push([x, y, 0.0]);
                bottom[k] = top[k];
            } else {
                coords.push([x, y, 0.0]);
                bottom[k] = coords.len();
                coords.push([x, y, 1.0]);
            }
        }
    }
    let mut tris = Vec::new();
    for sheet in 0..2 {
        for j in 0..ny {
            for i in 0..nx {
                if is_hole(i, j) {
                    continue;
                }
                let map = if sheet == 0 { &top } else { &bottom };
                let c = coords.len();
                coords.push([(i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell, sheet as f64]);
                let v = [
                    map[j * (nx + 1) + i],
                    map[j * (nx + 1) + i + 1],
                    map[(j + 1) * (nx + 1) + i + 1],
                    map[(j + 1) * (nx + 1) + i],
                ];
                for q in 0..4 {
                    let (a, b) = (v[q], v[(q + 1) % 4]);
                    tris.push(if sheet == 0 { [a, b, c] } else { [b, a, c] });
                }
            }
        }
    }
    let n = tris.len();
    IntrinsicMesh::from_coords(coords, Ambient::Doubled, tris, vec![Region::M1Bulk; n])
}

/// Conforming triangulation of a simple polygon with target edge length `h`.
pub fn build_polygon(boundary: &[[f64; 2]], h: f64) -> Result<IntrinsicMesh> {
    build_polygon_with_holes(boundary, &[], h, None)
}

/// Constrained Delaunay triangulation of a polygon with holes, refined to edge length about
/// `h` with a 20 degree angle floor. Boundary edges longer than `h` are split evenly unless
/// listed in `fixed_edges` (indexed by outer-boundary edge `i -> i+1`). Orientation of the
/// input rings does not matter.
pub fn build_polygon_with_holes(
    outer: &[[f64; 2]],
    holes: &[Vec<[f64; 2]>],
    h: f64,
    fixed_edges: Option<&[bool]>,
) -> Result<IntrinsicMesh> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("h = {h}")));
    }
    if !polygon_is_simple(outer) {
        return Err(Error::NotSimple("outer boundary self-intersects".into()));
    }
    for (i, hole) in holes.iter().enumerate() {
        if !polygon_is_simple(hole) {
            return Err(Error::NotSimple(format!("hole {i} self-intersects")));
        }
        if !hole.iter().all(|&p| point_in_polygon(p, outer)) {
            return Err(Error::NotSimple(format!("hole {i} is not inside the outer boundary")));
        }
    }
    let mut points: Vec<Point2<f64>> = Vec::new();
    let mut constraints: Vec<[usize; 2]> = Vec::new();
    let mut add_ring = |ring: &[[f64; 2]], fixed: Option<&[bool]>| {
        let start = points.len();
        let n = ring.len();
        for i in 0..n {
            let (a, b) = (ring[i], ring[(i + 1) % n]);
            points.push(Point2::new(a[0], a[1]));
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            let keep = fixed.map(|f| f[i]).unwrap_or(false);
            let pieces = if keep { 1 } else { (len / h - 1e-9).ceil().max(1.0) as usize };
            for s in 1..pieces {
                let t = s as f64 / pieces as f64;
                points.push(Point2::new(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])));
            }
        }
        let m = points.len() - start;
        for i in 0..m {
            constraints.push([start + i, start + (i + 1) % m]);
        }
    };
    add_ring(outer, fixed_edges);
    for hole in holes {
        add_ring(hole, None);
    }
    let mut cdt: ConstrainedDelaunayTriangulation<Point2<f64>> =
        ConstrainedDelaunayTriangulation::bulk_load_cdt(points, constraints)
            .map_err(|e| Error::NotSimple(format!("triangulation failed: {e:?}")))?;
    let max_area = 3f64.sqrt() / 4.0 * h * h;
    let result = cdt.refine(
        RefinementParameters::<f64>::new()
            .with_max_allowed_area(max_area)
            .with_angle_limit(AngleLimit::from_deg(20.0))
            .keep_constraint_edges()
            .exclude_outer_faces(true)
            .with_max_additional_vertices(2_000_000),
    );
    let excluded: HashSet<_> = result.excluded_faces.into_iter().collect();
    let mut index = HashMap::new();
    let mut coords = Vec::new();
    let mut tris = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let vs = face.vertices();
        let mut tri = [0usize; 3];
        for (k, v) in vs.iter().enumerate() {
            let key = v.fix();
            tri[k] = *index.entry(key).or_insert_with(|| {
                let p = v.position();
                coords.push([p.x, p.y, 0.0]);
                coords.len() - 1
            });
        }
        tris.push(tri);
    }
    let n = tris.len();
    let mesh = IntrinsicMesh::from_coords(coords, Ambient::Plane, tris, vec![Region::Omega1; n])?;
    let expected = polygon_signed_area(outer).abs()
        - holes.iter().map(|h| polygon_signed_area(h).abs()).sum::<f64>();
    let got = mesh.total_area();
    if (got - expected).abs() > 1e-9 * expected.abs().max(1.0) {
        return Err(Error::InvalidMesh(format!(
            "triangulated area {got} differs from polygon area {expected}"
        )));
    }
    Ok(mesh)
}

/// Regular `n`-gon inscribed in the circle of radius `radius` about `center`, counter-clockwise
/// starting at angle `phase`.
pub fn circle_polygon(center: [f64; 2], radius: f64, n: usize, phase: f64) -> Vec<[f64; 2]> {
    (0..n)
        .map(|k| {
            let t = phase + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            [center[0] + radius * t.cos(), center[1] + radius * t.sin()]
        })
        .collect()
}

/// Disk of the given radius, boundary resolved with spacing at most `h` (at least 8 sides).
pub fn build_disk(radius: f64, h: f64) -> Result<IntrinsicMesh> {
    if !(radius > 0.0 && h > 0.0) {
        return Err(Error::InvalidArgument(format!("disk radius {radius}, h = {h}")));
    }
    let n = ((2.0 * std::f64::consts::PI * radius / h).ceil() as usize).max(8);
    build_polygon(&circle_polygon([0.0, 0.0], radius, n, 0.0), h)
}

/// Socket domain in its canonical frame: the lower half of the unit disk together with the
/// stem `[-w/2, w/2] x [0, stem]` above it. The arc carries exactly `arc_segments` segments
/// between `(-1, 0)` and `(1, 0)` with vertices at angles `pi + k pi / arc_segments`; those
/// edges are never split so the arc can be matched vertex for vertex.
pub fn build_socket(arc_segments: usize, stem_width: f64, stem: f64, h: f64) -> Result<IntrinsicMesh> {
    if arc_segments < 2 || !(stem_width > 0.0 && stem_width < 2.0 && stem > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "socket with {arc_segments} arc segments, stem {stem_width} x {stem}"
        )));
    }
    let pi = std::f64::consts::PI;
    let mut poly = Vec::new();
    let mut fixed = Vec::new();
    for k in 0..=arc_segments {
        let t = pi + pi * k as f64 / arc_segments as f64;
        let p = if k == arc_segments {
            [1.0, 0.0]
        } else if k == 0 {
            [-1.0, 0.0]
        } else {
            [t.cos(), t.sin()]
        };
        poly.push(p);
        fixed.push(k < arc_segments);
    }
    let w = stem_width / 2.0;
    for p in [[w, 0.0], [w, stem], [-w, stem], [-w, 0.0]] {
        poly.push(p);
        fixed.push(false);
    }
    let mut mesh = build_polygon_with_holes(&poly, &[], h, Some(&fixed))?;
    let n = mesh.n_triangles();
    mesh = mesh.with_regions(vec![Region::Omega2; n])?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_single_cell() {
        let m = build_rectangle(1.0, 1.0, 1.0).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_triangles(), 2);
        assert!((m.total_area() - 1.0).abs() < 1e-15);
        assert!(matches!(
            build_rectangle(1.0, 1.0, 1.5),
            Err(Error::UnderResolved { .. })
        ));
    }

    #[test]
    fn rectangle_area_and_edges() {
        let m = build_rectangle(2.0, 1.0, 0.13).unwrap();
        assert!((m.total_area() - 2.0).abs() < 1e-12);
        assert!(m.quality().max_edge <= 1.5 * 0.13);
        assert_eq!(m.boundary_loops().len(), 1);
    }

    #[test]
    fn icosphere_counts() {
        let m = build_sphere(0).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles(), m.n_edges()), (12, 20, 30));
        for s in 0..4 {
            let m = build_sphere(s).unwrap();
            assert_eq!(m.euler_characteristic(), 2);
            assert!(m.is_closed());
        }
    }

    #[test]
    fn icosphere_faces_point_outward() {
        let m = build_sphere(1).unwrap();
        let c = m.coords().unwrap();
        for t in m.triangles() {
            let (a, b, d) = (c[t[0]], c[t[1]], c[t[2]]);
            let n = super::super::ambient::cross(
                super::super::ambient::sub(b, a),
                super::super::ambient::sub(d, a),
            );
            assert!(super::super::ambient::dot(n, a) > 0.0);
        }
    }

    #[test]
    fn genus_surfaces() {
        assert_eq!(build_genus_surface(1, 0.5).unwrap().euler_characteristic(), 0);
        for g in 2..=3 {
            let m = build_genus_surface(g, 0.5).unwrap();
            assert_eq!(m.euler_characteristic(), 2 - 2 * g as i64);
            assert!(m.is_closed());
        }
    }

    #[test]
    fn polygons() {
        let quad = [[0.0, 0.0], [1.0, 0.1], [1.2, 1.0], [-0.1, 0.9]];
        let m = build_polygon(&quad, 0.2).unwrap();
        assert_eq!(m.boundary_loops().len(), 1);

        let tri = [[0.0, 0.0], [1.0, 0.0], [0.4, 0.8]];
        let m = build_polygon(&tri, 100.0).unwrap();
        assert_eq!((m.n_vertices(), m.n_triangles()), (3, 1));

        let l = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]];
        let m = build_polygon(&l, 0.1).unwrap();
        assert!((m.total_area() - 3.0).abs() < 1e-10);
        assert!(m.quality().min_angle >= 20f64.to_radians() - 1e-9);

        let bow = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(build_polygon(&bow, 0.1), Err(Error::NotSimple(_))));
    }

    #[test]
    fn polygon_with_holes_has_inner_loops() {
        let outer = [[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [0.0, 1.0]];
        let holes = vec![
            circle_polygon([0.5, 0.5], 0.2, 12, 0.0),
            circle_polygon([1.5, 0.5], 0.2, 12, 0.0),
        ];
        let m = build_polygon_with_holes(&outer, &holes, 0.1, None).unwrap();
        assert_eq!(m.boundary_loops().len(), 3);
        let expect = 2.0 - 2.0 * polygon_signed_area(&holes[0]);
        assert!((m.total_area() - expect).abs() < 1e-10);
    }

    #[test]
    fn socket_keeps_arc_vertices() {
        let m = build_socket(8, 1.0, 1.0, 0.2).unwrap();
        let c = m.coords().unwrap();
        for k in 0..=8 {
            let t = std::f64::consts::PI * (1.0 + k as f64 / 8.0);
            let p = [t.cos(), t.sin()];
            assert!(c
                .iter()
                .any(|q| (q[0] - p[0]).abs() < 1e-15 && (q[1] - p[1]).abs() < 1e-15));
        }
        let area = std::f64::consts::PI / 2.0;
        let poly_area = 0.5 * 8.0 * (std::f64::consts::PI / 8.0).sin();
        assert!(poly_area < area);
        assert!((m.total_area() - (poly_area + 1.0)).abs() < 1e-10);
    }
}
