//! Payne studies on a planar Dirichlet domain: a scaled socket attached at a boundary point, and
//! small holes punched away from the nodal line of the second eigenfunction. Index `k = 1` is
//! the second eigenfunction.

use rayon::prelude::*;

use nodal_core::fem::BoundaryCondition;
use nodal_core::mesh::{build_socket, IntrinsicMesh, Region};
use nodal_core::nodal::{
    count_domains_dirichlet, extract_level_set_dirichlet, hausdorff, payne_check, to_svg, wavelength_density,
    NodalSet,
};
use nodal_core::surgery::{
    attach_domain, attach_reference, perforate, perforation_reference, socket_arc_segments, PerforationSpec,
};

use crate::common::{align_to_reference, cluster_groups, region_vertices, solve_complete, sup_error, Solved};
use crate::report::{Constant, ExperimentReport, Record};
use crate::sweep::{cluster_gap, cluster_width};
use crate::{LabError, Result, SweepConfig};

/// First zero of the Bessel function `J_0`.
pub const BESSEL_J0_ZERO: f64 = 2.404_825_557_695_773;

/// Stem of the attached socket, in units of the neck radius.
const STEM_WIDTH: f64 = 1.0;
const STEM_LENGTH: f64 = 1.0;

/// Reference data shared by the points of a planar sweep.
struct PlanarSetup {
    reference: Solved,
    groups: Vec<Vec<usize>>,
    m_solve: usize,
    nodal2: NodalSet,
    /// Mesh size of the unmodified domain: touch tolerance and Hausdorff scale.
    h: f64,
}

impl PlanarSetup {
    fn new(reference_mesh: IntrinsicMesh, cfg: &SweepConfig, h: f64) -> Result<Self> {
        let m = cfg.m.max(1);
        let (reference, m_solve) = solve_complete(reference_mesh, BoundaryCondition::Dirichlet, m, cfg.tol, cfg.seed)?;
        let groups = cluster_groups(&reference.spectrum, m_solve);
        let mask = reference.dirichlet_mask().unwrap();
        let nodal2 = extract_level_set_dirichlet(&reference.mesh, &reference.spectrum.eigenvectors[1], 0.0, mask)?;
        let payne = payne_check(&reference.mesh, &nodal2, 2.0 * h)?;
        if !payne.touches {
            return Err(LabError::Precondition(format!(
                "the reference second eigenfunction has a closed nodal line (distance {:.3e} to the boundary)",
                payne.min_distance
            )));
        }
        Ok(PlanarSetup {
            reference,
            groups,
            m_solve,
            nodal2,
            h,
        })
    }
}

/// Measurements at one radius.
struct PlanarPoint {
    records: Vec<Record>,
    /// Area of the smaller nodal domain of the second eigenfunction over the Faber-Krahn lower
    /// bound `pi j0^2 / lambda_2`.
    faber_krahn: f64,
    payne_distance: f64,
    figure: Option<String>,
}

fn evaluate(setup: &PlanarSetup, mesh: IntrinsicMesh, eps: f64, m: usize, keep: &[bool], cfg: &SweepConfig, figure: bool) -> Result<PlanarPoint> {
    let solved = Solved::new(mesh, BoundaryCondition::Dirichlet, setup.m_solve, cfg.tol, cfg.seed)?;
    let mask = solved.dirichlet_mask().unwrap().to_vec();
    let aligned = align_to_reference(&setup.reference, &solved, &setup.groups)?;
    let mut records = Vec::with_capacity(m + 1);
    let mut faber_krahn = f64::NAN;
    let mut payne_distance = f64::NAN;
    let mut svg = None;
    for k in 0..=m {
        let mut r = Record::new(eps, k);
        r.lambda = solved.spectrum.eigenvalues[k];
        r.lambda_ref = setup.reference.spectrum.eigenvalues[k];
        r.eig_error = (r.lambda - r.lambda_ref).abs();
        r.sup_error = sup_error(&setup.reference, &aligned, k, keep);
        r.angle = aligned.angles[k];
        let raw = &solved.spectrum.eigenvectors[k];
        let set = extract_level_set_dirichlet(&solved.mesh, raw, 0.0, &mask)?;
        let domains = count_domains_dirichlet(&solved.mesh, raw, &mask)?;
        r.domains = Some(domains.count);
        r.c_hat = wavelength_density(&solved.mesh, &set, r.lambda, true)?;
        if k == 1 {
            let p = payne_check(&solved.mesh, &set, 2.0 * setup.h)?;
            r.payne = Some(p.touches);
            payne_distance = p.min_distance;
            let smallest = domains.areas.iter().copied().fold(f64::INFINITY, f64::min);
            faber_krahn = smallest * r.lambda / (std::f64::consts::PI * BESSEL_J0_ZERO * BESSEL_J0_ZERO);
            if !set.is_empty() && !setup.nodal2.is_empty() {
                r.hausdorff = hausdorff(&set, &setup.nodal2, setup.h / 4.0)?;
            }
            if figure {
                svg = Some(to_svg(&solved.mesh, &set)?);
            }
        }
        records.push(r);
    }
    Ok(PlanarPoint {
        records,
        faber_krahn,
        payne_distance,
        figure: svg,
    })
}

fn collect(
    name: &str,
    setup: &PlanarSetup,
    points: Vec<(f64, Result<PlanarPoint>)>,
    m: usize,
) -> ExperimentReport {
    let mut report = ExperimentReport::new(name);
    let n = points.len();
    for (i, (eps, p)) in points.into_iter().enumerate() {
        match p {
            Ok(p) => {
                report.records.extend(p.records);
                report
                    .constants
                    .push(Constant::new("faber_krahn_ratio", p.faber_krahn).with_note(format!("eps = {eps:.6e}")));
                report
                    .constants
                    .push(Constant::new("payne_distance", p.payne_distance).with_note(format!("eps = {eps:.6e}")));
                if let Some(svg) = p.figure {
                    let tag = if i + 1 == n { "smallest" } else { "largest" };
                    report.figures.push((format!("nodal2_{tag}_eps"), svg));
                }
            }
            Err(e) => {
                report.flags.push(format!("epsilon = {eps:e}: {e}"));
                report.records.extend((0..=m).map(|k| Record::failed(eps, k)));
            }
        }
    }
    report.sort();
    let sp = &setup.reference.spectrum;
    for k in 0..=m {
        report
            .constants
            .push(Constant::new("lambda_reference", sp.eigenvalues[k]).with_note(format!("k = {k}")));
        report.constants.push(Constant::new(&format!("gap_{k}"), cluster_gap(sp, k)));
        report.constants.push(Constant::new(&format!("floor_{k}"), cluster_width(sp, k)));
    }
    report.constants.push(Constant::new("h", setup.h));
    report
}

/// Configured mesh size of the domain, or its mean edge length for a mesh read from file.
fn mesh_size(cfg: &SweepConfig, omega: &IntrinsicMesh) -> f64 {
    cfg.omega
        .h()
        .unwrap_or_else(|| omega.edge_lengths().iter().sum::<f64>() / omega.n_edges() as f64)
}

/// Boundary vertex of `omega` closest to `p`.
pub fn nearest_boundary_vertex(omega: &IntrinsicMesh, p: [f64; 2]) -> Result<usize> {
    let c = omega.coords().ok_or_else(|| LabError::Precondition("domain is not embedded".into()))?;
    let b = omega.boundary_mask();
    (0..omega.n_vertices())
        .filter(|&v| b[v])
        .min_by(|&x, &y| {
            let dx = (c[x][0] - p[0]).hypot(c[x][1] - p[1]);
            let dy = (c[y][0] - p[0]).hypot(c[y][1] - p[1]);
            dx.total_cmp(&dy)
        })
        .ok_or_else(|| LabError::Precondition("domain has no boundary".into()))
}

/// Attaches a socket of radius `eps` at the configured boundary point for each `eps` of the
/// schedule and compares with the domain itself.
pub fn run_payne_attachment(cfg: &SweepConfig) -> Result<ExperimentReport> {
    let omega = cfg.omega.build()?;
    let h = mesh_size(cfg, &omega);
    let x1 = nearest_boundary_vertex(&omega, cfg.payne_x1)?;
    let anchor = cfg.payne_anchor;
    let schedule = cfg.schedule(anchor);
    let socket = build_socket(socket_arc_segments(&omega, x1, anchor)?, STEM_WIDTH, STEM_LENGTH, cfg.socket_h)?;
    let reference = attach_reference(&omega, x1, anchor, *schedule.last().unwrap())?;
    let setup = PlanarSetup::new(reference, cfg, h)?;
    let m = cfg.m;
    let n = schedule.len();
    let points: Vec<(f64, Result<PlanarPoint>)> = schedule
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let p = attach_domain(&omega, &socket, x1, eps, anchor)
                .map_err(LabError::from)
                .and_then(|a| {
                    let keep = region_vertices(&a.mesh, Region::Omega1);
                    evaluate(&setup, a.mesh, a.epsilon, m, &keep, cfg, i == 0 || i + 1 == n)
                });
            (eps, p)
        })
        .collect();
    let mut report = collect("attachment", &setup, points, m);
    report.constants.push(Constant::new("x1", x1 as f64));
    Ok(report)
}

/// Punches holes of radius `eps` at the configured centres for each `eps` of the schedule. With
/// no centres every point is the unmodified domain.
pub fn run_payne_perforation(cfg: &SweepConfig) -> Result<ExperimentReport> {
    let omega = cfg.omega.build()?;
    let h = mesh_size(cfg, &omega);
    let anchor = cfg.perforation_anchor;
    let schedule = cfg.schedule(anchor);
    let centers = cfg.perforation_centers.clone();
    let base = PerforationSpec::new(centers.clone(), schedule[0], anchor);
    let reference = perforation_reference(&omega, &base, *schedule.last().unwrap())?;
    let setup = PlanarSetup::new(reference, cfg, h)?;
    let spec = base.with_clearance(&setup.nodal2);
    let clearance = spec.clearance.unwrap_or(f64::INFINITY);
    if !centers.is_empty() && !(clearance > 0.0) {
        return Err(LabError::Precondition("a hole centre lies on the second nodal line".into()));
    }
    // compare away from the holes and their remeshed neighbourhoods
    let away = 2.0 * anchor;
    let m = cfg.m;
    let n = schedule.len();
    let points: Vec<(f64, Result<PlanarPoint>)> = schedule
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let s = PerforationSpec {
                epsilon: eps,
                ..spec.clone()
            };
            let p = perforate(&omega, &s).map_err(LabError::from).and_then(|p| {
                let c = p.mesh.coords().unwrap();
                let keep: Vec<bool> = c
                    .iter()
                    .map(|q| centers.iter().all(|z| (q[0] - z[0]).hypot(q[1] - z[1]) > away))
                    .collect();
                evaluate(&setup, p.mesh, p.epsilon, m, &keep, cfg, i == 0 || i + 1 == n)
            });
            (eps, p)
        })
        .collect();
    let mut report = collect("perforation", &setup, points, m);
    report.constants.push(Constant::new("clearance", clearance));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Geometry;

    fn small() -> SweepConfig {
        SweepConfig {
            omega: Geometry::Rectangle {
                width: 2.0,
                height: 1.0,
                h: 1.0 / 16.0,
            },
            m: 2,
            steps: 3,
            payne_anchor: 0.1,
            perforation_anchor: 0.2,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn no_holes_reproduces_the_domain() {
        let cfg = SweepConfig {
            perforation_centers: vec![],
            ..small()
        };
        let r = run_payne_perforation(&cfg).unwrap();
        let omega = cfg.omega.build().unwrap();
        let (_, last) = solve_complete(omega.clone(), BoundaryCondition::Dirichlet, cfg.m, cfg.tol, cfg.seed).unwrap();
        let s = Solved::new(omega, BoundaryCondition::Dirichlet, last, cfg.tol, cfg.seed).unwrap();
        for k in 0..=cfg.m {
            for rec in r.series(k) {
                assert_eq!(rec.lambda.to_bits(), s.spectrum.eigenvalues[k].to_bits());
            }
        }
    }

    #[test]
    fn attachment_second_eigenfunction_has_two_domains() {
        let r = run_payne_attachment(&small()).unwrap();
        assert!(r.flags.is_empty(), "{:?}", r.flags);
        for rec in r.series(1) {
            assert_eq!(rec.domains, Some(2));
            assert_eq!(rec.payne, Some(true));
        }
    }
}
