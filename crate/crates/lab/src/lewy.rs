//! Fewest nodal domains within a spherical-harmonic eigenspace, found by sampling the unit
//! sphere of coefficient vectors, and the survival of those counts when a small handle is
//! glued onto the sphere.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use nodal_core::eigen::Spectrum;
use nodal_core::fem::BoundaryCondition;
use nodal_core::mesh::{build_flat_torus, build_genus_surface, IntrinsicMesh};
use nodal_core::nodal::{classify_containment, count_domains, extract_level_set};
use nodal_core::surgery::{best_gluing_vertex, choose_epsilon0, connected_sum};

use crate::common::{align_to_reference, alignment_clusters, solve_complete, Solved};
use crate::report::{Constant, ExperimentReport, Record};
use crate::sweep::prepare_at;
use crate::{LabError, Result, SweepConfig};

/// The genus-one handle is a flat square torus of this period and mesh size, large enough to
/// hold the unit gluing disk with its remeshed neighbourhood.
const HANDLE_PERIOD: f64 = 16.0;
const HANDLE_H: f64 = 1.0;

/// Perturbation radii of the local refinement, and trials per radius.
const REFINE_STEPS: [f64; 3] = [0.1, 0.03, 0.01];
const REFINE_TRIALS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct LewyResult {
    pub degree: usize,
    /// Eigenvector indices spanning the eigenspace.
    pub indices: Vec<usize>,
    /// Unit coefficient vector of the minimizing combination.
    pub coefficients: Vec<f64>,
    pub count: usize,
    /// Fewest domains among the samples alone, before refinement.
    pub sampled_count: usize,
    pub evaluated: usize,
}

impl LewyResult {
    /// The minimizing combination as a vertex function.
    pub fn function(&self, eigenvectors: &[Vec<f64>]) -> Vec<f64> {
        combine(eigenvectors, &self.indices, &self.coefficients)
    }
}

fn combine(eigenvectors: &[Vec<f64>], indices: &[usize], c: &[f64]) -> Vec<f64> {
    let n = eigenvectors[indices[0]].len();
    let mut f = vec![0.0; n];
    for (&k, &a) in indices.iter().zip(c) {
        for (x, y) in f.iter_mut().zip(&eigenvectors[k]) {
            *x += a * y;
        }
    }
    f
}

fn unit(mut v: Vec<f64>) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v
}

fn gaussian(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Searches the eigenspace of spherical harmonics of degree `degree` (indices `degree^2` to
/// `(degree+1)^2 - 1`) for the combination with the fewest nodal domains: `samples` unit
/// coefficient vectors drawn from a seeded generator, then random perturbations of shrinking
/// size around the best one.
pub fn lewy_search(
    mesh: &IntrinsicMesh,
    spectrum: &Spectrum,
    degree: usize,
    samples: usize,
    seed: u64,
) -> Result<LewyResult> {
    let lo = degree * degree;
    let hi = (degree + 1) * (degree + 1) - 1;
    if hi >= spectrum.len() {
        return Err(LabError::Precondition(format!(
            "degree {degree} needs eigenpairs up to index {hi}"
        )));
    }
    let cluster = alignment_clusters(spectrum)
        .into_iter()
        .find(|c| c.contains(&lo))
        .unwrap();
    if cluster != (lo..=hi).collect::<Vec<_>>() {
        return Err(LabError::Precondition(format!(
            "eigenspace of degree {degree} should have dimension {}, found indices {cluster:?}",
            2 * degree + 1
        )));
    }
    if samples == 0 {
        return Err(LabError::Config("lewy.samples must be positive".into()));
    }
    let d = cluster.len();
    let vectors = &spectrum.eigenvectors;
    let count = |c: &[f64]| -> usize {
        count_domains(mesh, &combine(vectors, &cluster, c))
            .map(|r| r.count)
            .unwrap_or(usize::MAX)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ degree as u64);
    let draws: Vec<Vec<f64>> = (0..samples).map(|_| unit(gaussian(&mut rng, d))).collect();
    let counts: Vec<usize> = draws.par_iter().map(|c| count(c)).collect();
    let (best_i, &sampled) = counts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(&b.0)))
        .unwrap();
    let mut best = draws[best_i].clone();
    let mut best_count = sampled;
    let mut evaluated = samples;
    for &r in &REFINE_STEPS {
        let trials: Vec<Vec<f64>> = (0..REFINE_TRIALS)
            .map(|_| {
                let g = gaussian(&mut rng, d);
                unit(best.iter().zip(&g).map(|(b, x)| b + r * x).collect())
            })
            .collect();
        let tc: Vec<usize> = trials.par_iter().map(|c| count(c)).collect();
        evaluated += trials.len();
        if let Some((i, &c)) = tc
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(&b.0)))
        {
            if c < best_count {
                best_count = c;
                best = trials[i].clone();
            }
        }
    }
    Ok(LewyResult {
        degree,
        indices: cluster,
        coefficients: best,
        count: best_count,
        sampled_count: sampled,
        evaluated,
    })
}

/// Runs [`lewy_search`] on `M1` for each configured degree.
pub fn run_lewy_search(cfg: &SweepConfig) -> Result<(Solved, Vec<LewyResult>, ExperimentReport)> {
    let m1 = cfg.m1.build()?;
    let top = cfg.lewy_degrees.iter().map(|k| (k + 1) * (k + 1) - 1).max().unwrap_or(0);
    let (base, _) = solve_complete(m1, BoundaryCondition::Closed, top, cfg.tol, cfg.seed)?;
    let mut results = Vec::new();
    let mut report = ExperimentReport::new("lewy_search");
    for &k in &cfg.lewy_degrees {
        let r = lewy_search(&base.mesh, &base.spectrum, k, cfg.lewy_samples, cfg.seed)?;
        report.constants.push(
            Constant::new(&format!("min_domains_{k}"), r.count as f64)
                .with_note(format!("{} samples, {} evaluations", cfg.lewy_samples, r.evaluated)),
        );
        report
            .constants
            .push(Constant::new(&format!("sampled_min_domains_{k}"), r.sampled_count as f64));
        for (i, c) in r.coefficients.iter().enumerate() {
            report
                .constants
                .push(Constant::new(&format!("coefficient_{k}_{i}"), *c).with_note(format!("eigenvector {}", r.indices[i])));
        }
        results.push(r);
    }
    Ok((base, results, report))
}

/// Glues a scaled genus surface onto the sphere away from the nodal sets of the minimizing
/// combinations and follows those combinations along the schedule. Records use `k` for the
/// degree; `domains` and `verdict` refer to the transplanted combination.
pub fn run_lewy_transfer(cfg: &SweepConfig) -> Result<ExperimentReport> {
    let (base, results, search) = run_lewy_search(cfg)?;
    let m1 = base.mesh.clone();
    let m2 = match cfg.lewy_genus {
        1 => build_flat_torus(HANDLE_PERIOD, HANDLE_PERIOD, HANDLE_H)?,
        g => build_genus_surface(g, HANDLE_H / 4.0)?,
    };
    let functions: Vec<Vec<f64>> = results.iter().map(|r| r.function(&base.spectrum.eigenvectors)).collect();
    // gluing point chosen against the minimizing combinations themselves
    let mut eigenvectors = vec![base.spectrum.eigenvectors[0].clone()];
    eigenvectors.extend(functions.iter().cloned());
    let selection = Spectrum {
        eigenvalues: vec![0.0; eigenvectors.len()],
        residuals: vec![0.0; eigenvectors.len()],
        clusters: (0..eigenvectors.len()).map(|i| vec![i]).collect(),
        eigenvectors,
        iterations: 0,
    };
    let n_sel = functions.len();
    let (x1, _) = best_gluing_vertex(&m1, &selection, n_sel)?;
    let eps0 = choose_epsilon0(&m1, &selection, n_sel, x1)?.min(cfg.eps0);
    let top = results.iter().map(|r| *r.indices.last().unwrap()).max().unwrap_or(0);
    let setup = prepare_at(m1, m2, cfg, base, x1, eps0, top)?;
    let genus = cfg.lewy_genus as i64;
    let mut report = ExperimentReport::new("lewy_transfer");
    report.constants = search.constants;
    report.constants.push(Constant::new("epsilon0", eps0));
    report.constants.push(Constant::new("x1", x1 as f64));
    let points: Vec<(f64, Result<(i64, Vec<Record>)>)> = setup
        .schedule
        .par_iter()
        .map(|&eps| {
            let p = (|| -> Result<(i64, Vec<Record>)> {
                let spec = setup.spec.with_epsilon(eps)?;
                let glued = connected_sum(&setup.m1, &setup.m2, &spec)?;
                let chi = glued.mesh.euler_characteristic();
                let solved = Solved::new(glued.mesh, BoundaryCondition::Closed, setup.m_solve, setup.tol, setup.seed)?;
                let aligned = align_to_reference(&setup.reference, &solved, &setup.groups)?;
                let mut records = Vec::new();
                for r in &results {
                    let f = combine(&aligned.vectors, &r.indices, &r.coefficients);
                    let mut rec = Record::new(glued.epsilon, r.degree);
                    let lam: Vec<f64> = r.indices.iter().map(|&i| solved.spectrum.eigenvalues[i]).collect();
                    rec.lambda = lam.iter().sum::<f64>() / lam.len() as f64;
                    let lam_ref: Vec<f64> = r.indices.iter().map(|&i| setup.reference.spectrum.eigenvalues[i]).collect();
                    rec.lambda_ref = lam_ref.iter().sum::<f64>() / lam_ref.len() as f64;
                    rec.eig_error = (rec.lambda - rec.lambda_ref).abs();
                    rec.angle = aligned.angles[r.indices[0]];
                    rec.domains = Some(count_domains(&solved.mesh, &f)?.count);
                    let set = extract_level_set(&solved.mesh, &f, 0.0)?;
                    rec.verdict = classify_containment(&set).class.tag().to_string();
                    records.push(rec);
                }
                Ok((chi, records))
            })();
            (eps, p)
        })
        .collect();
    for (eps, p) in points {
        match p {
            Ok((chi, recs)) => {
                if chi != 2 - 2 * genus {
                    report
                        .flags
                        .push(format!("epsilon = {eps:e}: Euler characteristic {chi}, expected {}", 2 - 2 * genus));
                }
                report
                    .constants
                    .push(Constant::new("euler_characteristic", chi as f64).with_note(format!("eps = {eps:.6e}")));
                report.records.extend(recs);
            }
            Err(e) => {
                report.flags.push(format!("epsilon = {eps:e}: {e}"));
                report.records.extend(results.iter().map(|r| Record::failed(eps, r.degree)));
            }
        }
    }
    report.sort();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nodal_core::mesh::build_sphere;

    #[test]
    fn degree_one_always_has_two_domains() {
        let m = build_sphere(2).unwrap();
        let (s, _) = solve_complete(m, BoundaryCondition::Closed, 3, 1e-10, 3).unwrap();
        let r = lewy_search(&s.mesh, &s.spectrum, 1, 50, 9).unwrap();
        assert_eq!(r.count, 2);
        assert_eq!(r.sampled_count, 2);
        let norm: f64 = r.coefficients.iter().map(|c| c * c).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn search_is_deterministic() {
        let m = build_sphere(2).unwrap();
        let (s, _) = solve_complete(m, BoundaryCondition::Closed, 8, 1e-10, 3).unwrap();
        let a = lewy_search(&s.mesh, &s.spectrum, 2, 40, 5).unwrap();
        let b = lewy_search(&s.mesh, &s.spectrum, 2, 40, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let m = build_sphere(2).unwrap();
        let (s, _) = solve_complete(m, BoundaryCondition::Closed, 3, 1e-10, 3).unwrap();
        assert!(lewy_search(&s.mesh, &s.spectrum, 2, 10, 1).is_err());
    }
}
