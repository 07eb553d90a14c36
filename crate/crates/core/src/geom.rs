//! Small planar and length-only geometry helpers shared by the mesh, fem and nodal modules.

/// Triangle area from its three side lengths (Kahan's cancellation-free Heron formula).
/// Returns 0 for degenerate triples and NaN if the lengths violate the triangle inequality.
pub fn heron(a: f64, b: f64, c: f64) -> f64 {
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal));
    let [a, b, c] = s;
    let p = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if p < 0.0 {
        return f64::NAN;
    }
    0.25 * p.sqrt()
}

/// Cotangent of the angle opposite side `a` in a triangle with sides `a, b, c` and area `area`.
#[inline]
pub fn cot_opposite(a: f64, b: f64, c: f64, area: f64) -> f64 {
    (b * b + c * c - a * a) / (4.0 * area)
}

/// Interior angle opposite side `a`.
pub fn angle_opposite(a: f64, b: f64, c: f64) -> f64 {
    let cos = ((b * b + c * c - a * a) / (2.0 * b * c)).clamp(-1.0, 1.0);
    cos.acos()
}

/// Lays a triangle out in the plane from its side lengths: `p0` at the origin, `p1` on the
/// positive x axis, `p2` in the upper half plane. `l01`, `l02`, `l12` are the side lengths.
pub fn layout(l01: f64, l02: f64, l12: f64) -> [[f64; 2]; 3] {
    let x = (l01 * l01 + l02 * l02 - l12 * l12) / (2.0 * l01);
    let y = (l02 * l02 - x * x).max(0.0).sqrt();
    [[0.0, 0.0], [l01, 0.0], [x, y]]
}

#[inline]
pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[inline]
pub fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[inline]
pub fn lerp3(a: [f64; 3], b: [f64; 3], t: f64) -> [f64; 3] {
    [
        a[0] + t * (b[0] - a[0]),
        a[1] + t * (b[1] - a[1]),
        a[2] + t * (b[2] - a[2]),
    ]
}

/// Euclidean distance from `p` to the segment `[a, b]` in R^3.
pub fn point_segment_dist3(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let den = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if den > 0.0 {
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / den).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist3(p, lerp3(a, b, t))
}

/// Euclidean distance from `p` to the segment `[a, b]` in the plane.
pub fn point_segment_dist2(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    point_segment_dist3([p[0], p[1], 0.0], [a[0], a[1], 0.0], [b[0], b[1], 0.0])
}

#[inline]
pub fn orient2(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Proper or touching intersection test for closed planar segments.
pub fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient2(q1, q2, p1);
    let d2 = orient2(q1, q2, p2);
    let d3 = orient2(p1, p2, q1);
    let d4 = orient2(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: f64| {
        d == 0.0
            && c[0] >= a[0].min(b[0])
            && c[0] <= a[0].max(b[0])
            && c[1] >= a[1].min(b[1])
            && c[1] <= a[1].max(b[1])
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// Distance between two closed planar segments.
pub fn segment_segment_dist2(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_dist2(p1, q1, q2)
        .min(point_segment_dist2(p2, q1, q2))
        .min(point_segment_dist2(q1, p1, p2))
        .min(point_segment_dist2(q2, p1, p2))
}

/// Signed area of a closed planar polygon (positive when counter-clockwise).
pub fn polygon_signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

/// Even-odd point-in-polygon test.
pub fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// True when no two non-adjacent edges of the closed polygon intersect.
pub fn polygon_is_simple(poly: &[[f64; 2]]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if a == b {
            return false;
        }
        for j in (i + 1)..n {
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heron_right_triangle() {
        assert!((heron(3.0, 4.0, 5.0) - 6.0).abs() < 1e-15);
        assert!(heron(1.0, 1.0, 3.0).is_nan());
        assert_eq!(heron(1.0, 1.0, 2.0), 0.0);
    }

    #[test]
    fn cot_of_unit_right_triangle() {
        let r2 = 2f64.sqrt();
        let a = heron(1.0, 1.0, r2);
        assert!(cot_opposite(r2, 1.0, 1.0, a).abs() < 1e-15);
        assert!((cot_opposite(1.0, 1.0, r2, a) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn simple_polygons() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(polygon_is_simple(&sq));
        assert!((polygon_signed_area(&sq) - 1.0).abs() < 1e-15);
        let bow = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        assert!(!polygon_is_simple(&bow));
        assert!(point_in_polygon([0.5, 0.5], &sq));
        assert!(!point_in_polygon([1.5, 0.5], &sq));
    }

    #[test]
    fn segment_distances() {
        let d = segment_segment_dist2([0.0, 0.0], [1.0, 0.0], [0.0, 0.3], [1.0, 0.3]);
        assert!((d - 0.3).abs() < 1e-15);
        assert_eq!(
            segment_segment_dist2([0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]),
            0.0
        );
    }
}
