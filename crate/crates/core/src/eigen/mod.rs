//! Lowest eigenpairs of `K u = lambda M u`.
//!
//! The iterative solver is shift-invert block subspace iteration: each sweep applies
//! `(K - sigma M)^{-1} M` to a block of vectors (one sparse Cholesky factorization, reused),
//! re-orthonormalizes in the `M` inner product and performs a Rayleigh–Ritz projection.
//! The shift is negative so the factored matrix is positive definite even for closed surfaces.

pub mod skyline;

use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{CsrMatrix, DiscreteOperator};
use skyline::SkylineCholesky;

/// Relative gap below which neighbouring eigenvalues are reported as one cluster.
pub const CLUSTER_TOL: f64 = 1e-6;
/// Largest problem the dense oracle accepts.
pub const DENSE_CAP: usize = 3000;
const MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Full vertex vectors (zero on eliminated vertices), `M`-orthonormal.
    pub eigenvectors: Vec<Vec<f64>>,
    /// `||K u - lambda M u|| / ||M u||` on the free vertices.
    pub residuals: Vec<f64>,
    /// Index groups of (numerically) repeated eigenvalues, in increasing order.
    pub clusters: Vec<Vec<usize>>,
    pub iterations: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Cluster index of eigenpair `k`.
    pub fn cluster_of(&self, k: usize) -> usize {
        self.clusters.iter().position(|c| c.contains(&k)).unwrap()
    }

    /// CSV with columns `k,lambda,residual,cluster_id`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("k,lambda,residual,cluster_id\n");
        for k in 0..self.len() {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{}",
                k,
                self.eigenvalues[k],
                self.residuals[k],
                self.cluster_of(k)
            );
        }
        s
    }

    /// CSV keyed by vertex index with one column per eigenvector.
    pub fn eigenvectors_csv(&self) -> String {
        let mut s = String::from("vertex");
        for k in 0..self.len() {
            let _ = write!(s, ",u{k}");
        }
        s.push('\n');
        let n = self.eigenvectors.first().map(|v| v.len()).unwrap_or(0);
        for v in 0..n {
            let _ = write!(s, "{v}");
            for u in &self.eigenvectors {
                let _ = write!(s, ",{:.16e}", u[v]);
            }
            s.push('\n');
        }
        s
    }

    /// Checks `M`-orthonormality of the stored vectors.
    pub fn orthonormality_error(&self, op: &DiscreteOperator) -> f64 {
        let free: Vec<Vec<f64>> = self.eigenvectors.iter().map(|u| op.restrict(u)).collect();
        let mut worst: f64 = 0.0;
        for i in 0..free.len() {
            let mi = op.mass.mul_vec(&free[i]);
            for (j, fj) in free.iter().enumerate() {
                let g: f64 = mi.iter().zip(fj).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// Groups consecutive eigenvalues whose relative gap is below `tol`.
pub fn clusters(eigenvalues: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let scale = eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let floor = 1e-10 * scale.max(f64::MIN_POSITIVE);
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (k, &lam) in eigenvalues.iter().enumerate() {
        if let Some(last) = out.last_mut() {
            let prev = eigenvalues[*last.last().unwrap()];
            let den = prev.abs().max(lam.abs());
            let same = (lam - prev).abs() <= tol * den || den <= floor;
            if same {
                last.push(k);
                continue;
            }
        }
        out.push(vec![k]);
    }
    out
}

/// Sign convention: the lowest-index vertex with `|u| > 0.1 max |u|` gets a positive value.
pub fn sign_anchor(u: &[f64]) -> Option<usize> {
    let max = u.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if max == 0.0 {
        return None;
    }
    u.iter().position(|&x| x.abs() > 0.1 * max)
}

fn fix_sign(u: &mut [f64]) {
    if let Some(a) = sign_anchor(u) {
        if u[a] < 0.0 {
            for x in u.iter_mut() {
                *x = -*x;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `M`-orthonormalizes `block` in place (two passes of modified Gram–Schmidt). Vectors that
/// become numerically dependent are replaced by fresh random directions.
fn m_orthonormalize(block: &mut [Vec<f64>], mass: &CsrMatrix, rng: &mut ChaCha8Rng) {
    let n = mass.n();
    let mut mb: Vec<Vec<f64>> = Vec::with_capacity(block.len());
    for i in 0..block.len() {
        for attempt in 0.. {
            let (head, tail) = block.split_at_mut(i);
            let bi = &mut tail[0];
            let before = dot(bi, &mass.mul_vec(bi)).max(0.0).sqrt();
            for _pass in 0..2 {
                for j in 0..i {
                    let c = dot(&mb[j], bi);
                    for (x, y) in bi.iter_mut().zip(&head[j]) {
                        *x -= c * y;
                    }
                }
            }
            let mv = mass.mul_vec(bi);
            let nrm = dot(bi, &mv).max(0.0).sqrt();
            if (nrm > 1e-10 * before && nrm > 0.0) || attempt >= 5 {
                for x in bi.iter_mut() {
                    *x /= nrm;
                }
                mb.push(mv.into_iter().map(|x| x / nrm).collect());
                break;
            }
            *bi = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        }
    }
}

/// Lowest `m + 1` eigenpairs. Deterministic for a given seed.
pub fn solve_lowest(op: &DiscreteOperator, m: usize, tol: f64, seed: u64) -> Result<Spectrum> {
    let n = op.n_free();
    let want = m + 1;
    if want > n {
        return Err(Error::Dimension(format!(
            "requested {want} eigenpairs from {n} free vertices"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol}")));
    }
    let p = n.min((2 * want).max(want + 8));
    if p == n || n <= 60 {
        return dense_oracle(op, m);
    }
    let k = &op.stiffness;
    let mm = &op.mass;
    let dk: f64 = k.diagonal().iter().sum::<f64>() / n as f64;
    let dm: f64 = mm.diagonal().iter().sum::<f64>() / n as f64;
    let mut sigma = -1e-4 * (dk / dm).abs().max(f64::MIN_POSITIVE);
    let factor = loop {
        let shifted = shifted_matrix(k, mm, sigma);
        match SkylineCholesky::factor(&shifted) {
            Ok(f) => break f,
            Err(Error::NotPositiveDefinite(_)) if sigma.abs() < 1e12 * dk.abs().max(1.0) => {
                sigma *= 10.0;
            }
            Err(e) => return Err(e),
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut block: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| StandardNormal.sample(&mut rng)).collect())
        .collect();
    m_orthonormalize(&mut block, mm, &mut rng);

    let mut best = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        // y = (K - sigma M)^{-1} M x
        let mut next: Vec<Vec<f64>> = block
            .par_iter()
            .map(|x| factor.solve(&mm.mul_vec(x)))
            .collect();
        m_orthonormalize(&mut next, mm, &mut rng);
        let kx: Vec<Vec<f64>> = next.par_iter().map(|x| k.mul_vec(x)).collect();
        let mx: Vec<Vec<f64>> = next.par_iter().map(|x| mm.mul_vec(x)).collect();
        let (vals, vecs) = rayleigh_ritz(&next, &kx, &mx)?;
        // rotate block and the products along with it
        let rot = |src: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..p)
                .into_par_iter()
                .map(|c| {
                    let mut out = vec![0.0; n];
                    for r in 0..p {
                        let w = vecs[(r, c)];
                        if w != 0.0 {
                            for (o, x) in out.iter_mut().zip(&src[r]) {
                                *o += w * x;
                            }
                        }
                    }
                    out
                })
                .collect()
        };
        block = rot(&next);
        let kb = rot(&kx);
        let mb = rot(&mx);
        let mut worst: f64 = 0.0;
        let mut residuals = Vec::with_capacity(want);
        for i in 0..want {
            let r: Vec<f64> = kb[i].iter().zip(&mb[i]).map(|(a, b)| a - vals[i] * b).collect();
            let res = norm(&r) / norm(&mb[i]);
            residuals.push(res);
            worst = worst.max(res / (vals[i].abs() + sigma.abs()));
        }
        best = best.min(worst);
        if worst <= tol {
            return Ok(finish(op, vals[..want].to_vec(), block[..want].to_vec(), residuals, it));
        }
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual: best,
    })
}

fn shifted_matrix(k: &CsrMatrix, m: &CsrMatrix, sigma: f64) -> CsrMatrix {
    let mut t = Vec::with_capacity(k.nnz() + m.nnz());
    for i in 0..k.n() {
        let (c, v) = k.row(i);
        for j in 0..c.len() {
            t.push((i, c[j], v[j]));
        }
        let (c, v) = m.row(i);
        for j in 0..c.len() {
            t.push((i, c[j], -sigma * v[j]));
        }
    }
    CsrMatrix::from_triplets(k.n(), t)
}

/// Ritz values (ascending) and coefficient matrix for an `M`-orthonormal block.
fn rayleigh_ritz(x: &[Vec<f64>], kx: &[Vec<f64>], mx: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let p = x.len();
    let mut a = DMatrix::zeros(p, p);
    let mut b = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let kij = 0.5 * (dot(&x[i], &kx[j]) + dot(&x[j], &kx[i]));
            let mij = 0.5 * (dot(&x[i], &mx[j]) + dot(&x[j], &mx[i]));
            a[(i, j)] = kij;
            a[(j, i)] = kij;
            b[(i, j)] = mij;
            b[(j, i)] = mij;
        }
    }
    generalized_dense(&a, &b)
}

/// Dense generalized symmetric eigenproblem `A y = lambda B y` with `B` positive definite.
/// Returns ascending eigenvalues and `B`-orthonormal eigenvectors (columns).
fn generalized_dense(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = nalgebra::Cholesky::new(b.clone()).ok_or(Error::NotPositiveDefinite(0))?;
    let l = chol.l();
    let linv_a = l
        .solve_lower_triangular(a)
        .ok_or_else(|| Error::Assembly("singular mass factor".into()))?;
    let c = l
        .solve_lower_triangular(&linv_a.transpose())
        .ok_or_else(|| Error::Assembly("singular mass factor".into()))?;
    let c = 0.5 * (&c + c.transpose());
    let eig = SymmetricEigen::new(c);
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]).then(i.cmp(&j)));
    let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut y = DMatrix::zeros(a.nrows(), idx.len());
    for (c_new, &c_old) in idx.iter().enumerate() {
        y.set_column(c_new, &eig.eigenvectors.column(c_old));
    }
    let x = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Assembly("singular mass factor".into()))?;
    Ok((vals, x))
}

fn finish(
    op: &DiscreteOperator,
    vals: Vec<f64>,
    vecs: Vec<Vec<f64>>,
    residuals: Vec<f64>,
    iterations: usize,
) -> Spectrum {
    let eigenvectors: Vec<Vec<f64>> = vecs
        .into_iter()
        .map(|v| {
            let mut full = op.expand(&v);
            fix_sign(&mut full);
            full
        })
        .collect();
    let clusters = clusters(&vals, CLUSTER_TOL);
    Spectrum {
        eigenvalues: vals,
        eigenvectors,
        residuals,
        clusters,
        iterations,
    }
}

/// Dense generalized eigen-decomposition; the reference for `solve_lowest`.
pub fn dense_oracle(op: &DiscreteOperator, m: usize) -> Result<Spectrum> {
    let n = op.n_free();
    if n > DENSE_CAP {
        return Err(Error::TooLarge {
            size: n,
            cap: DENSE_CAP,
        });
    }
    if m + 1 > n {
        return Err(Error::Dimension(format!(
            "requested {} eigenpairs from {n} free vertices",
            m + 1
        )));
    }
    let k = op.stiffness.to_dense();
    let mm = op.mass.to_dense();
    let (vals, vecs) = generalized_dense(&k, &mm)?;
    let mut out_vals = Vec::with_capacity(m + 1);
    let mut out_vecs = Vec::with_capacity(m + 1);
    let mut residuals = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let x: Vec<f64> = vecs.column(i).iter().copied().collect();
        let kx = op.stiffness.mul_vec(&x);
        let mx = op.mass.mul_vec(&x);
        let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - vals[i] * b).collect();
        residuals.push(norm(&r) / norm(&mx));
        out_vals.push(vals[i]);
        out_vecs.push(x);
    }
    Ok(finish(op, out_vals, out_vecs, residuals, 0))
}

/// Principal angles between two subspaces.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceDistance {
    /// Radians, in `[0, pi/2]`, nonincreasing.
    pub angles: Vec<f64>,
    pub max_angle: f64,
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub distance: SubspaceDistance,
    /// Orthogonal recombination of the second block that best matches the first.
    pub aligned: Vec<Vec<f64>>,
}

/// Compares two blocks of vectors in the inner product `ip`.
///
/// `a` and `b` are the vectors seen through the comparison (for instance restricted to common
/// vertices); `b_full` are the vectors the rotation is applied to, e.g. the same eigenvectors on
/// their whole mesh. The returned vectors are `b_full` times the orthogonal matrix that brings
/// `b` closest to `a` on the comparison space (orthogonal Procrustes), so they stay orthonormal
/// wherever `b_full` is; each is then sign-matched to `a` at `a`'s anchor vertex. The angles are
/// the principal angles between the spans of `a` and `b`.
pub fn align_subspaces<F>(a: &[Vec<f64>], b: &[Vec<f64>], b_full: &[Vec<f64>], ip: F) -> Result<Alignment>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let d = a.len();
    if d != b.len() || d != b_full.len() {
        return Err(Error::Dimension(format!(
            "cluster dimensions differ: {} vs {} (eigenvalue crossing?)",
            a.len(),
            b.len()
        )));
    }
    if d == 0 {
        return Ok(Alignment {
            distance: SubspaceDistance {
                angles: vec![],
                max_angle: 0.0,
            },
            aligned: vec![],
        });
    }
    let gram = |x: &[Vec<f64>], y: &[Vec<f64>]| {
        DMatrix::from_fn(d, d, |i, j| ip(&x[i], &y[j]))
    };
    let ga = gram(a, a);
    let gb = gram(b, b);
    let gab = gram(a, b);
    // G = R^T R with R upper triangular
    let ra = nalgebra::Cholesky::new(ga)
        .ok_or_else(|| Error::Dimension("first block is rank deficient".into()))?
        .l()
        .transpose();
    let rb = nalgebra::Cholesky::new(gb)
        .ok_or_else(|| Error::Dimension("second block is rank deficient".into()))?
        .l()
        .transpose();
    let ra_inv = ra.try_inverse().ok_or(Error::Dimension("singular block".into()))?;
    let rb_inv = rb.try_inverse().ok_or(Error::Dimension("singular block".into()))?;
    // orthonormal bases: A R_a^{-1}, B R_b^{-1}
    let s = ra_inv.transpose() * &gab * &rb_inv;
    let svd = s.svd(false, false);
    let mut angles: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&x| x.clamp(-1.0, 1.0).acos())
        .collect();
    angles.sort_by(|x, y| y.total_cmp(x));
    let max_angle = angles.first().copied().unwrap_or(0.0);
    // orthogonal Procrustes: aligned = B_full Q with Q = U V^T from the SVD of B^T A
    let c = gab.transpose();
    let svd_c = c.svd(true, true);
    let t = svd_c.u.unwrap() * svd_c.v_t.unwrap();
    let n = b_full[0].len();
    let mut aligned = Vec::with_capacity(d);
    for c in 0..d {
        let mut v = vec![0.0; n];
        for r in 0..d {
            let w = t[(r, c)];
            for (o, x) in v.iter_mut().zip(&b_full[r]) {
                *o += w * x;
            }
        }
        aligned.push(v);
    }
    // sign match at the anchor of the target vector
    let nb = b[0].len();
    for c in 0..d {
        if let Some(anchor) = sign_anchor(&a[c]) {
            // value of the aligned vector on the comparison space at the anchor
            let mut val = 0.0;
            for r in 0..d {
                if anchor < nb {
                    val += t[(r, c)] * b[r][anchor];
                }
            }
            if val * a[c][anchor] < 0.0 {
                for x in aligned[c].iter_mut() {
                    *x = -*x;
                }
            }
        }
    }
    Ok(Alignment {
        distance: SubspaceDistance { angles, max_angle },
        aligned,
    })
}

/// Eigenvalue count `N(lambda)` and the two-dimensional Weyl prediction `area lambda / (4 pi)`.
pub fn weyl_count(spectrum: &Spectrum, lambda: f64, area: f64) -> Result<(usize, f64)> {
    let top = spectrum.eigenvalues.last().copied().unwrap_or(f64::NEG_INFINITY);
    if !(lambda < top) {
        return Err(Error::InvalidArgument(format!(
            "lambda {lambda} is not below the largest computed eigenvalue {top}"
        )));
    }
    let count = spectrum.eigenvalues.iter().filter(|&&l| l <= lambda).count();
    Ok((count, area * lambda / (4.0 * std::f64::consts::PI)))
}

/// Mass-matrix inner product on full vertex vectors.
pub fn mass_inner_product(op: &DiscreteOperator) -> impl Fn(&[f64], &[f64]) -> f64 + '_ {
    move |x: &[f64], y: &[f64]| {
        let (xf, yf) = (op.restrict(x), op.restrict(y));
        op.mass.bilinear(&xf, &yf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, BoundaryCondition};
    use crate::mesh::{build_rectangle, build_sphere};
    use std::f64::consts::PI;

    #[test]
    fn single_interior_dof() {
        // two-triangle square has no interior vertex; a 2x2 grid has exactly one
        let mesh = build_rectangle(1.0, 1.0, 0.5).unwrap();
        let op = assemble(&mesh, BoundaryCondition::Dirichlet).unwrap();
        assert_eq!(op.n_free(), 1);
        let s = dense_oracle(&op, 0).unwrap();
        let exact = op.stiffness.get(0, 0) / op.mass.get(0, 0);
        assert!((s.eigenvalues[0] - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn icosahedron_kernel() {
        let op = assemble(&build_sphere(0).unwrap(), BoundaryCondition::Closed).unwrap();
        let s = dense_oracle(&op, 3).unwrap();
        assert!(s.eigenvalues[0].abs() < 1e-12);
        let u = &s.eigenvectors[0];
        assert!(u.iter().all(|&x| (x - u[0]).abs() < 1e-10));
    }

    #[test]
    fn iterative_matches_dense() {
        let mesh = build_rectangle(2.0, 1.0, 1.0 / 12.0).unwrap();
        let op = assemble(&mesh, BoundaryCondition::Dirichlet).unwrap();
        let a = solve_lowest(&op, 6, 1e-10, 7).unwrap();
        let b = dense_oracle(&op, 6).unwrap();
        for k in 0..7 {
            let rel = (a.eigenvalues[k] - b.eigenvalues[k]).abs() / b.eigenvalues[k];
            assert!(rel < 1e-8, "k={k} rel={rel}");
        }
        assert!(a.orthonormality_error(&op) < 1e-10);
        let pi2 = PI * PI;
        assert!((a.eigenvalues[0] / (1.25 * pi2) - 1.0).abs() < 0.05);
    }

    #[test]
    fn deterministic_for_seed() {
        let mesh = build_sphere(2).unwrap();
        let op = assemble(&mesh, BoundaryCondition::Closed).unwrap();
        let a = solve_lowest(&op, 4, 1e-9, 3).unwrap();
        let b = solve_lowest(&op, 4, 1e-9, 3).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.eigenvectors, b.eigenvectors);
        assert_eq!(a.clusters[1], vec![1, 2, 3]);
    }

    #[test]
    fn identical_blocks_have_zero_angles() {
        let mesh = build_sphere(2).unwrap();
        let op = assemble(&mesh, BoundaryCondition::Closed).unwrap();
        let s = solve_lowest(&op, 3, 1e-10, 1).unwrap();
        let blk: Vec<Vec<f64>> = s.eigenvectors[1..4].to_vec();
        let al = align_subspaces(&blk, &blk, &blk, mass_inner_product(&op)).unwrap();
        assert!(al.distance.max_angle < 1e-7);
        let neg: Vec<Vec<f64>> = vec![s.eigenvectors[1].iter().map(|x| -x).collect()];
        let al = align_subspaces(&s.eigenvectors[1..2], &neg, &neg, mass_inner_product(&op)).unwrap();
        assert!(al.distance.max_angle < 1e-7);
        for (x, y) in al.aligned[0].iter().zip(&s.eigenvectors[1]) {
            assert!((x - y).abs() < 1e-9);
        }
        assert!(align_subspaces(&blk, &blk[..2], &blk[..2], mass_inner_product(&op)).is_err());
    }

    #[test]
    fn clustering() {
        let c = clusters(&[0.0, 1e-14, 2.0, 2.0 + 1e-7, 6.0], 1e-6);
        assert_eq!(c, vec![vec![0, 1], vec![2, 3], vec![4]]);
    }

    #[test]
    fn weyl_prediction() {
        let s = Spectrum {
            eigenvalues: vec![1.0, 2.0, 200.0],
            eigenvectors: vec![],
            residuals: vec![],
            clusters: vec![],
            iterations: 0,
        };
        let (n, w) = weyl_count(&s, 100.0, 1.0).unwrap();
        assert_eq!(n, 2);
        assert!((w - 100.0 / (4.0 * PI)).abs() < 1e-12);
        assert!(weyl_count(&s, 300.0, 1.0).is_err());
    }
}
