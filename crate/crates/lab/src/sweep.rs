//! Connected-sum sweeps: eigenpair convergence as the attached handle shrinks, the containment
//! threshold and its scaling in `m`, and the blow-up of the handle's own Dirichlet spectrum.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Mutex;

use rayon::prelude::*;

use nodal_core::eigen::Spectrum;
use nodal_core::fem::BoundaryCondition;
use nodal_core::mesh::{IntrinsicMesh, Region};
use nodal_core::nodal::{
    classify_containment, count_domains, extract_level_set, hausdorff, to_svg, wavelength_density, Containment,
    NodalSet,
};
use nodal_core::surgery::{best_gluing_vertex, choose_epsilon0, connected_sum, m1_reference, GluedSpec};

use crate::common::{alignment_clusters, align_to_reference, cluster_groups, fit_line, region_vertices, solve_complete, sup_error, Solved};
use crate::report::{Constant, ExperimentReport, Record};
use crate::{LabError, Result, SweepConfig};

/// Everything an `epsilon` evaluation needs: summands, gluing data and the reference solution.
#[derive(Debug, Clone)]
pub struct GluedSetup {
    pub m1: IntrinsicMesh,
    pub m2: IntrinsicMesh,
    /// Spectrum of the unmodified `M1`, used to pick the gluing point.
    pub base: Spectrum,
    pub spec: GluedSpec,
    /// `M1` remeshed with the gluing patch filled in; eigenvectors `0..=m_solve` are rotated
    /// within clusters onto the eigenvectors of the unmodified `M1`.
    pub reference: Solved,
    /// Reference eigenpairs `0..=m_solve` form whole clusters.
    pub m_solve: usize,
    pub groups: Vec<Vec<usize>>,
    pub schedule: Vec<f64>,
    /// Reference nodal sets, one per `k <= m_solve`.
    pub nodal: Vec<NodalSet>,
    /// Sampling pitch for Hausdorff distances.
    pub pitch: f64,
    pub tol: f64,
    pub seed: u64,
}

fn mean_edge(mesh: &IntrinsicMesh) -> f64 {
    mesh.edge_lengths().iter().sum::<f64>() / mesh.n_edges() as f64
}

/// Picks the gluing point as far as possible from the nodal sets of the first `m_select`
/// eigenfunctions (rounded up to a whole cluster), sets `epsilon0` from that clearance (capped
/// by `sweep.eps0`), and solves the reference up to the cluster containing `m`.
pub fn prepare(m1: IntrinsicMesh, m2: IntrinsicMesh, cfg: &SweepConfig, m_select: usize, m: usize) -> Result<GluedSetup> {
    let m_select = m_select.max(m);
    let (base, last) = solve_complete(m1.clone(), BoundaryCondition::Closed, m_select, cfg.tol, cfg.seed)?;
    let (x1, _) = best_gluing_vertex(&m1, &base.spectrum, last)?;
    let eps0 = choose_epsilon0(&m1, &base.spectrum, last, x1)?.min(cfg.eps0);
    prepare_at(m1, m2, cfg, base, x1, eps0, m)
}

/// Like [`prepare`], with the gluing point and collar radius given. `base` is the solution on
/// the unmodified `M1` whose basis the reference is rotated onto.
pub fn prepare_at(
    m1: IntrinsicMesh,
    m2: IntrinsicMesh,
    cfg: &SweepConfig,
    base: Solved,
    x1: usize,
    eps0: f64,
    m: usize,
) -> Result<GluedSetup> {
    let schedule = cfg.schedule(eps0);
    let spec = GluedSpec::new(&m1, &m2, schedule[0], eps0, x1, 0)?;
    let inner = *schedule.last().unwrap();
    let reference_mesh = m1_reference(&m1, &spec, inner)?;
    let (mut reference, m_solve) = solve_complete(reference_mesh, BoundaryCondition::Closed, m, cfg.tol, cfg.seed)?;
    let groups = cluster_groups(&reference.spectrum, m_solve);
    // Within a degenerate cluster the basis is arbitrary; the gluing point was chosen against
    // the basis of the unmodified mesh, so the reference vectors are rotated onto that basis.
    let on_base = align_to_reference(&base, &reference, &groups)?;
    for k in 0..=m_solve {
        reference.spectrum.eigenvectors[k] = on_base.vectors[k].clone();
    }
    let nodal = (0..=m_solve)
        .map(|k| extract_level_set(&reference.mesh, &reference.spectrum.eigenvectors[k], 0.0))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let pitch = mean_edge(&m1) / 4.0;
    Ok(GluedSetup {
        m1,
        m2,
        base: base.spectrum,
        spec,
        reference,
        m_solve,
        groups,
        schedule,
        nodal,
        pitch,
        tol: cfg.tol,
        seed: cfg.seed,
    })
}

/// Result of one glued solve.
#[derive(Debug, Clone)]
pub struct GluedPoint {
    /// Realized neck radius.
    pub epsilon: f64,
    pub records: Vec<Record>,
    /// First Dirichlet eigenvalue of the `M2` part alone.
    pub handle_lambda: f64,
    pub figure: Option<String>,
}

impl GluedPoint {
    /// All of `k = 0..=m` classified as contained in `M1(eps0)`.
    pub fn contained(&self, m: usize) -> bool {
        self.records
            .iter()
            .filter(|r| r.k <= m)
            .all(|r| r.verdict == Containment::ContainedInM1Eps0.tag())
    }
}

/// Glues at `spec`, solves, aligns to the reference and records `k = 0..=m`.
pub fn evaluate(setup: &GluedSetup, spec: &GluedSpec, m: usize, figure: bool) -> Result<GluedPoint> {
    let glued = connected_sum(&setup.m1, &setup.m2, spec)?;
    let eps = glued.epsilon;
    let solved = Solved::new(glued.mesh, BoundaryCondition::Closed, setup.m_solve, setup.tol, setup.seed)?;
    let aligned = align_to_reference(&setup.reference, &solved, &setup.groups)?;
    let bulk = region_vertices(&solved.mesh, Region::M1Bulk);
    let mut records = Vec::with_capacity(m + 1);
    let mut overlay: Option<NodalSet> = None;
    for k in 0..=m {
        let mut r = Record::new(eps, k);
        r.lambda = solved.spectrum.eigenvalues[k];
        r.lambda_ref = setup.reference.spectrum.eigenvalues[k];
        r.eig_error = (r.lambda - r.lambda_ref).abs();
        r.sup_error = sup_error(&setup.reference, &aligned, k, &bulk);
        r.angle = aligned.angles[k];
        let set = extract_level_set(&solved.mesh, &aligned.vectors[k], 0.0)?;
        r.verdict = classify_containment(&set).class.tag().to_string();
        if !set.is_empty() && !setup.nodal[k].is_empty() {
            r.hausdorff = hausdorff(&set, &setup.nodal[k], setup.pitch)?;
        }
        let raw = &solved.spectrum.eigenvectors[k];
        r.domains = count_domains(&solved.mesh, raw).ok().map(|d| d.count);
        let raw_set = extract_level_set(&solved.mesh, raw, 0.0)?;
        if !raw_set.is_empty() {
            r.c_hat = wavelength_density(&solved.mesh, &raw_set, r.lambda, false)?;
        }
        if figure && k == m {
            overlay = Some(set.filter(|s| s.region != Region::M2));
        }
        records.push(r);
    }
    let handle_lambda = handle_dirichlet_lambda(&solved.mesh, setup.tol, setup.seed)?;
    let figure = match overlay {
        // segment points come from glued coordinates, which coincide with the embedding on M1
        Some(set) => Some(to_svg(&setup.reference.mesh, &set)?),
        None => None,
    };
    Ok(GluedPoint {
        epsilon: eps,
        records,
        handle_lambda,
        figure,
    })
}

/// First Dirichlet eigenvalue of the `M2` triangles of a glued mesh.
pub fn handle_dirichlet_lambda(glued: &IntrinsicMesh, tol: f64, seed: u64) -> Result<f64> {
    let keep: Vec<bool> = (0..glued.n_triangles()).map(|t| glued.region(t) == Region::M2).collect();
    let (sub, _) = glued.submesh(&keep)?;
    let s = Solved::new(sub, BoundaryCondition::Dirichlet, 0, tol, seed)?;
    Ok(s.spectrum.eigenvalues[0])
}

/// Convergence sweep of `M1 # eps M2` over the configured schedule.
pub fn run_convergence_sweep(cfg: &SweepConfig) -> Result<ExperimentReport> {
    let m1 = cfg.m1.build()?;
    let m2 = cfg.m2.build()?;
    let setup = prepare(m1, m2, cfg, cfg.m, cfg.m)?;
    sweep_setup(&setup, cfg.m, "sweep")
}

/// Runs the schedule of an existing setup.
pub fn sweep_setup(setup: &GluedSetup, m: usize, name: &str) -> Result<ExperimentReport> {
    let n = setup.schedule.len();
    let points: Vec<(f64, Result<GluedPoint>)> = setup
        .schedule
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let p = setup.spec.with_epsilon(eps).map_err(LabError::from).and_then(|s| evaluate(setup, &s, m, i + 1 == n || i == 0));
            (eps, p)
        })
        .collect();
    let mut report = ExperimentReport::new(name);
    let mut handle = Vec::new();
    for (i, (eps, p)) in points.into_iter().enumerate() {
        match p {
            Ok(p) => {
                handle.push((p.epsilon, p.handle_lambda));
                report.records.extend(p.records);
                if let Some(svg) = p.figure {
                    let tag = if i == 0 { "largest" } else { "smallest" };
                    report.figures.push((format!("nodal_{tag}_eps"), svg));
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
        report.constants.push(Constant::new(&format!("gap_{k}"), cluster_gap(sp, k)));
        report.constants.push(Constant::new(&format!("floor_{k}"), cluster_width(sp, k)));
    }
    report.constants.push(Constant::new("epsilon0", setup.spec.epsilon0));
    report.constants.push(Constant::new("x1", setup.spec.x1 as f64));
    report.constants.push(Constant::new("D", setup.spec.d));
    report.constants.push(Constant::new("D_tilde", setup.spec.d_tilde));
    if handle.len() >= 2 {
        let x: Vec<f64> = handle.iter().map(|h| h.0.ln()).collect();
        let y: Vec<f64> = handle.iter().map(|h| h.1.ln()).collect();
        let (slope, _, res) = fit_line(&x, &y);
        report.constants.push(
            Constant::new("handle_dirichlet_slope", slope)
                .with_residual(res)
                .with_note("log lambda_1 of the M2 part vs log eps"),
        );
        for (e, l) in &handle {
            report
                .constants
                .push(Constant::new("handle_dirichlet_lambda", *l).with_note(format!("eps = {e:.6e}")));
        }
    }
    Ok(report)
}

/// Distance from the alignment cluster of `k` to the neighbouring clusters of `sp`.
pub fn cluster_gap(sp: &Spectrum, k: usize) -> f64 {
    let cl = alignment_clusters(sp);
    let c = cl.iter().find(|c| c.contains(&k)).unwrap();
    let lo = c[0];
    let hi = *c.last().unwrap();
    let mut gap = f64::INFINITY;
    if lo > 0 {
        gap = gap.min(sp.eigenvalues[lo] - sp.eigenvalues[lo - 1]);
    }
    if hi + 1 < sp.len() {
        gap = gap.min(sp.eigenvalues[hi + 1] - sp.eigenvalues[hi]);
    }
    gap
}

/// Width of the alignment cluster of `k`: the resolution to which the discretization separates
/// its eigenvalues, and the floor below which eigenvalue errors are not meaningful.
pub fn cluster_width(sp: &Spectrum, k: usize) -> f64 {
    let cl = alignment_clusters(sp);
    let c = cl.iter().find(|c| c.contains(&k)).unwrap();
    let w = sp.eigenvalues[*c.last().unwrap()] - sp.eigenvalues[c[0]];
    w.max(1e-9 * sp.eigenvalues[k].abs()).max(1e-12)
}

/// Threshold per `m`, with the bracket it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold {
    pub m: usize,
    pub epsilon: f64,
    /// Smallest non-contained and largest contained radius at the end of the bisection.
    pub bracket: (f64, f64),
    pub monotone: bool,
}

/// Memoized verdicts per requested radius (each glued solve serves every `m`).
struct VerdictCache<'a> {
    setup: &'a GluedSetup,
    m_max: usize,
    points: Mutex<HashMap<u64, std::result::Result<GluedPoint, String>>>,
}

impl VerdictCache<'_> {
    fn point(&self, eps: f64) -> Result<GluedPoint> {
        if let Some(p) = self.points.lock().unwrap().get(&eps.to_bits()) {
            return p.clone().map_err(LabError::Precondition);
        }
        let p = self
            .setup
            .spec
            .with_epsilon(eps)
            .map_err(LabError::from)
            .and_then(|s| evaluate(self.setup, &s.exact(), self.m_max, false));
        let stored = p.as_ref().map(|x| x.clone()).map_err(|e| e.to_string());
        self.points.lock().unwrap().insert(eps.to_bits(), stored);
        p
    }

    fn contained(&self, eps: f64, m: usize) -> Result<bool> {
        Ok(self.point(eps)?.contained(m))
    }
}

fn bisect(cache: &VerdictCache, m: usize, schedule: &[f64], eps0: f64) -> Result<Threshold> {
    let verdicts: Vec<bool> = schedule.iter().map(|&e| cache.contained(e, m)).collect::<Result<_>>()?;
    // verdicts along decreasing epsilon should read false..false, true..true
    let mut monotone = verdicts.windows(2).all(|w| w[0] <= w[1]);
    let last_out = verdicts.iter().rposition(|&c| !c);
    let (mut hi, mut lo) = match last_out {
        Some(i) if i + 1 < schedule.len() => (schedule[i], schedule[i + 1]),
        Some(_) => {
            // nothing contained: widen once towards zero
            let e = schedule.last().unwrap() / 4.0;
            if !cache.contained(e, m)? {
                return Err(LabError::Precondition(format!(
                    "m = {m}: no contained verdict down to epsilon = {e:e}"
                )));
            }
            (schedule.last().copied().unwrap(), e)
        }
        None => {
            // everything contained: widen once towards epsilon0
            let e = 0.5 * (schedule[0] + eps0);
            if cache.contained(e, m)? {
                return Err(LabError::Precondition(format!(
                    "m = {m}: contained at every radius up to {e:e}"
                )));
            }
            (e, schedule[0])
        }
    };
    let width = (hi - lo) / 8.0;
    while hi - lo >= width {
        let mid = 0.5 * (hi + lo);
        if cache.contained(mid, m)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // a contained radius above the bracket means the classifier is not monotone there
    if schedule.iter().zip(&verdicts).any(|(&e, &c)| c && e > hi) {
        monotone = false;
    }
    Ok(Threshold {
        m,
        epsilon: 0.5 * (hi + lo),
        bracket: (hi, lo),
        monotone,
    })
}

/// Largest wavelength density over reference eigenfunctions `1..=m`.
pub fn reference_c_hat(setup: &GluedSetup, m: usize) -> Result<f64> {
    let r = &setup.reference;
    let mut c: f64 = 0.0;
    for k in 1..=m.min(setup.m_solve) {
        if !setup.nodal[k].is_empty() {
            c = c.max(wavelength_density(&r.mesh, &setup.nodal[k], r.spectrum.eigenvalues[k], false)?);
        }
    }
    Ok(c)
}

/// Bisects for the largest radius below which every eigenfunction `0..=m` has its nodal set in
/// `M1(eps0)`, for each `m` of the configured list, and fits `log eps*(m)` against `log m`.
pub fn estimate_threshold(cfg: &SweepConfig) -> Result<ExperimentReport> {
    let m_max = *cfg.threshold_m.iter().max().ok_or_else(|| LabError::Config("threshold.m is empty".into()))?;
    let m1 = cfg.m1.build()?;
    let m2 = cfg.m2.build()?;
    let setup = prepare(m1, m2, cfg, m_max, m_max)?;
    threshold_setup(&setup, &cfg.threshold_m)
}

pub fn threshold_setup(setup: &GluedSetup, ms: &[usize]) -> Result<ExperimentReport> {
    let m_max = *ms.iter().max().unwrap();
    let cache = VerdictCache {
        setup,
        m_max,
        points: Mutex::new(HashMap::new()),
    };
    // evaluate the schedule once, in parallel
    setup.schedule.par_iter().for_each(|&e| {
        let _ = cache.point(e);
    });
    let results: Vec<Result<Threshold>> = ms
        .par_iter()
        .map(|&m| bisect(&cache, m, &setup.schedule, setup.spec.epsilon0))
        .collect();
    let mut report = ExperimentReport::new("threshold");
    let mut found = Vec::new();
    for r in results {
        match r {
            Ok(t) => {
                if !t.monotone {
                    report.flags.push(format!("m = {}: containment verdict not monotone in epsilon", t.m));
                }
                report.constants.push(
                    Constant::new(&format!("eps_star_{}", t.m), t.epsilon)
                        .with_note(format!("bracket [{:.6e}; {:.6e}]", t.bracket.1, t.bracket.0)),
                );
                found.push(t);
            }
            Err(e) => report.flags.push(e.to_string()),
        }
    }
    found.sort_by_key(|t| t.m);
    if found.windows(2).any(|w| w[1].epsilon > w[0].epsilon) {
        report.flags.push("threshold increases with m".into());
    }
    if found.len() >= 2 {
        let x: Vec<f64> = found.iter().map(|t| (t.m as f64).ln()).collect();
        let y: Vec<f64> = found.iter().map(|t| t.epsilon.ln()).collect();
        let (slope, _, res) = fit_line(&x, &y);
        report
            .constants
            .push(Constant::new("threshold_slope", slope).with_residual(res).with_note("log eps*(m) vs log m"));
        // smallest m from which dropping leading points no longer moves the slope by more than 0.1
        let mut m0 = found.last().unwrap().m;
        for start in (0..found.len().saturating_sub(2)).rev() {
            let (s, _, _) = fit_line(&x[start..], &y[start..]);
            if (s - slope).abs() > 0.1 {
                break;
            }
            m0 = found[start].m;
        }
        report
            .constants
            .push(Constant::new("power_law_stable_from_m", m0 as f64));
    }
    // empirical constant against the Weyl-law formula
    let c_hat = reference_c_hat(setup, m_max)?;
    let d_gap = setup.spec.d - setup.spec.d_tilde;
    let eps0 = setup.spec.epsilon0;
    let m1_area = setup.reference.mesh.total_area();
    let m2_area = m2_unit_area(setup)?;
    report.constants.push(Constant::new("C_hat", c_hat));
    report.constants.push(Constant::new("D", setup.spec.d));
    report.constants.push(Constant::new("D_tilde", setup.spec.d_tilde));
    for (name, vol) in [
        ("c_formula_with_handle", m1_area + eps0 * eps0 * m2_area),
        ("c_formula_without_handle", m1_area),
        ("c_formula_unit_handle", m1_area + 1.0),
    ] {
        let c = c_hat / (d_gap * PI) * (PI * vol).sqrt();
        report.constants.push(Constant::new(name, c).with_note(format!("volume {vol:.6e}")));
    }
    for t in &found {
        report.constants.push(Constant::new(
            &format!("c_empirical_{}", t.m),
            t.epsilon * (t.m as f64).sqrt(),
        ));
    }
    report.constants.push(Constant::new("epsilon0", eps0));
    let cache = cache.points.into_inner().unwrap();
    let mut keys: Vec<&u64> = cache.keys().collect();
    keys.sort_by(|a, b| f64::from_bits(**b).total_cmp(&f64::from_bits(**a)));
    for key in keys {
        if let Ok(p) = &cache[key] {
            report.records.extend(p.records.iter().cloned());
        }
    }
    report.sort();
    Ok(report)
}

/// Area of `M2(1)` (the summand with its unit ball removed).
fn m2_unit_area(setup: &GluedSetup) -> Result<f64> {
    let glued = connected_sum(&setup.m1, &setup.m2, &setup.spec)?;
    let e = glued.epsilon;
    Ok(glued.mesh.region_area(Region::M2) / (e * e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_of_sphere_clusters() {
        let sp = Spectrum {
            eigenvalues: vec![0.0, 2.0, 2.00001, 2.00002, 6.0],
            eigenvectors: vec![vec![]; 5],
            residuals: vec![0.0; 5],
            clusters: vec![vec![0], vec![1], vec![2, 3], vec![4]],
            iterations: 0,
        };
        assert_eq!(cluster_gap(&sp, 0), 2.0);
        assert_eq!(cluster_gap(&sp, 2), 2.0);
        assert_eq!(cluster_gap(&sp, 4), 6.0 - 2.00002);
        assert!((cluster_width(&sp, 1) - 2e-5).abs() < 1e-12);
    }
}
