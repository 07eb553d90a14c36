use std::collections::HashMap;

use proptest::prelude::*;

use nodal_core::eigen::dense_oracle;
use nodal_core::fem::{assemble, rayleigh, BoundaryCondition};
use nodal_core::mesh::io::{read_imesh, to_imesh_string};
use nodal_core::mesh::{build_genus_surface, build_polygon, build_rectangle, build_sphere, IntrinsicMesh, Region};
use nodal_core::nodal::{classify_containment, count_domains, extract_level_set, NodalSet};

fn check_metric(m: &IntrinsicMesh) {
    for t in 0..m.n_triangles() {
        let [a, b, c] = m.triangle_lengths(t);
        assert!(a < b + c && b < a + c && c < a + b);
        assert!(m.triangle_area(t) > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rectangle_area_and_metric(w in 0.5f64..3.0, hgt in 0.5f64..3.0, frac in 0.05f64..0.4) {
        let h = frac * w.min(hgt);
        let m = build_rectangle(w, hgt, h).unwrap();
        check_metric(&m);
        prop_assert!((m.total_area() / (w * hgt) - 1.0).abs() < 1e-10);
        prop_assert_eq!(m.boundary_loops().len(), 1);
        prop_assert!(m.quality().max_edge <= 1.5 * h);
        let op = assemble(&m, BoundaryCondition::Closed).unwrap();
        let mass: f64 = (0..op.mass.n()).map(|i| op.mass.row(i).1.iter().sum::<f64>()).sum();
        prop_assert!((mass / m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn star_polygon_area(radii in prop::collection::vec(0.6f64..1.0, 5..9)) {
        let n = radii.len();
        let poly: Vec<[f64; 2]> = radii
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let m = build_polygon(&poly, 0.15).unwrap();
        check_metric(&m);
        let exact = nodal_core::geom::polygon_signed_area(&poly);
        prop_assert!((m.total_area() / exact - 1.0).abs() < 1e-10);
    }

    #[test]
    fn stiffness_row_sums_vanish_on_closed_meshes(level in 0u32..3) {
        let m = build_sphere(level).unwrap();
        let op = assemble(&m, BoundaryCondition::Closed).unwrap();
        prop_assert!(op.stiffness.is_symmetric(0.0));
        for i in 0..op.stiffness.n() {
            let s: f64 = op.stiffness.row(i).1.iter().sum();
            prop_assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_is_exact(eps in 0.01f64..10.0) {
        let m = build_rectangle(1.0, 1.0, 0.25).unwrap();
        let s = m.scaled(eps).unwrap();
        let a = assemble(&m, BoundaryCondition::Dirichlet).unwrap();
        let b = assemble(&s, BoundaryCondition::Dirichlet).unwrap();
        for i in 0..a.stiffness.n() {
            let (ca, va) = a.stiffness.row(i);
            let (cb, vb) = b.stiffness.row(i);
            prop_assert_eq!(ca, cb);
            for k in 0..va.len() {
                prop_assert!((va[k] - vb[k]).abs() <= 1e-13 * va[k].abs().max(1.0));
            }
            let (_, ma) = a.mass.row(i);
            let (_, mb) = b.mass.row(i);
            for k in 0..ma.len() {
                prop_assert!((mb[k] / (eps * eps * ma[k]) - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rayleigh_bounded_below(values in prop::collection::vec(-1.0f64..1.0, 9)) {
        prop_assume!(values.iter().any(|v| v.abs() > 1e-3));
        let m = build_rectangle(1.0, 1.0, 0.25).unwrap();
        let op = assemble(&m, BoundaryCondition::Dirichlet).unwrap();
        let lam0 = dense_oracle(&op, 0).unwrap().eigenvalues[0];
        prop_assert!(rayleigh(&op, &values).unwrap() >= lam0 * (1.0 - 1e-12));
    }

    #[test]
    fn level_set_shift(coeffs in prop::array::uniform4(-1.0f64..1.0), alpha in -0.5f64..0.5) {
        let m = build_sphere(2).unwrap();
        let u: Vec<f64> = m
            .coords()
            .unwrap()
            .iter()
            .map(|p| coeffs[0] * p[0] + coeffs[1] * p[1] * p[2] + coeffs[2] * p[2] * p[2] + coeffs[3])
            .collect();
        let a = extract_level_set(&m, &u, alpha).unwrap();
        let shifted: Vec<f64> = u.iter().map(|x| x - alpha).collect();
        let b = extract_level_set(&m, &shifted, 0.0).unwrap();
        prop_assert_eq!(a.segments, b.segments);
    }

    #[test]
    fn domain_census(coeffs in prop::array::uniform3(-1.0f64..1.0), zeros in prop::collection::vec(0usize..162, 0..5)) {
        prop_assume!(coeffs.iter().any(|c| c.abs() > 1e-2));
        let m = build_sphere(2).unwrap();
        let mut u: Vec<f64> = m
            .coords()
            .unwrap()
            .iter()
            .map(|p| coeffs[0] * p[0] + coeffs[1] * p[1] + coeffs[2] * p[0] * p[2])
            .collect();
        for z in zeros {
            u[z] = 0.0;
        }
        let d = count_domains(&m, &u).unwrap();
        prop_assert!(d.count >= 1);
        prop_assert_eq!(d.positive_triangles + d.negative_triangles + d.straddling_triangles, m.n_triangles());
        let total: f64 = d.areas.iter().sum();
        prop_assert!((total / m.total_area() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn containment_ignores_segment_order(seed in any::<u64>(), offset in -0.4f64..0.4) {
        let m = build_rectangle(1.0, 1.0, 0.1).unwrap();
        let c = m.coords().unwrap().to_vec();
        let regions: Vec<Region> = m
            .triangles()
            .iter()
            .map(|t| if t.iter().map(|&v| c[v][0]).sum::<f64>() < 1.5 { Region::M1Bulk } else { Region::M2 })
            .collect();
        let m = m.with_regions(regions).unwrap();
        let u: Vec<f64> = c.iter().map(|p| p[1] - 0.5 - offset * p[0]).collect();
        let set = extract_level_set(&m, &u, 0.0).unwrap();
        let mut segs = set.segments.clone();
        // deterministic shuffle
        let mut s = seed;
        for i in (1..segs.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            segs.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = NodalSet { level: 0.0, segments: segs.clone(), components: vec![(0..segs.len()).collect()] };
        let shuffled = shuffled.filter(|_| true);
        prop_assert_eq!(classify_containment(&set).class, classify_containment(&shuffled).class);
    }

    #[test]
    fn genus_euler_characteristic(g in 1u32..4) {
        let m = build_genus_surface(g, 0.3).unwrap();
        check_metric(&m);
        prop_assert!(m.is_closed());
        prop_assert_eq!(m.euler_characteristic(), 2 - 2 * g as i64);
    }

    #[test]
    fn imesh_round_trip(level in 0u32..3) {
        let m = build_sphere(level).unwrap();
        let back = read_imesh(to_imesh_string(&m).as_bytes()).unwrap();
        prop_assert_eq!(back.triangles(), m.triangles());
        prop_assert_eq!(back.edge_lengths(), m.edge_lengths());
        let regions: HashMap<usize, Region> = (0..m.n_triangles()).map(|t| (t, m.region(t))).collect();
        for t in 0..m.n_triangles() {
            prop_assert_eq!(back.region(t), regions[&t]);
        }
    }
}
