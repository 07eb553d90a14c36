//! Solving, cluster bookkeeping and cross-mesh alignment shared by the experiments.

use nodal_core::eigen::{align_subspaces, clusters, solve_lowest, Spectrum};
use nodal_core::fem::{assemble, BoundaryCondition, DiscreteOperator};
use nodal_core::mesh::{IntrinsicMesh, Region};

use crate::{LabError, Result};

/// Relative gap below which eigenvalues are compared as one cluster across meshes. Much looser
/// than the solver's own clustering: remeshing near a point splits a degenerate eigenvalue by a
/// relative 1e-5 or so, which must not separate the pieces.
pub const ALIGN_TOL: f64 = 1e-2;

/// Clusters of `spectrum` at [`ALIGN_TOL`].
pub fn alignment_clusters(spectrum: &Spectrum) -> Vec<Vec<usize>> {
    clusters(&spectrum.eigenvalues, ALIGN_TOL)
}

/// A mesh together with its operator and lowest eigenpairs.
#[derive(Debug, Clone)]
pub struct Solved {
    pub mesh: IntrinsicMesh,
    pub op: DiscreteOperator,
    pub spectrum: Spectrum,
}

impl Solved {
    /// Eigenvectors `0..=m` of `mesh` under `bc`.
    pub fn new(mesh: IntrinsicMesh, bc: BoundaryCondition, m: usize, tol: f64, seed: u64) -> Result<Self> {
        let op = assemble(&mesh, bc)?;
        let spectrum = solve_lowest(&op, m, tol, seed)?;
        Ok(Solved { mesh, op, spectrum })
    }

    /// Lumped weight of each vertex (row sums of the mass matrix; zero on Dirichlet vertices).
    pub fn vertex_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.mesh.n_vertices()];
        for (v, row) in self.op.row_of.iter().enumerate() {
            if let Some(r) = row {
                w[v] = self.op.mass.row(*r).1.iter().sum();
            }
        }
        w
    }

    pub fn dirichlet_mask(&self) -> Option<&[bool]> {
        match self.op.bc {
            BoundaryCondition::Dirichlet => Some(&self.op.dirichlet_mask),
            _ => None,
        }
    }
}

/// Solves for eigenpairs `0..=m` and then enough further pairs to finish the cluster
/// containing `m`. Returns the solution and the index of the last pair of that cluster.
pub fn solve_complete(
    mesh: IntrinsicMesh,
    bc: BoundaryCondition,
    m: usize,
    tol: f64,
    seed: u64,
) -> Result<(Solved, usize)> {
    let mut extra = 4;
    loop {
        let s = Solved::new(mesh.clone(), bc, m + extra, tol, seed)?;
        let top = s.spectrum.len() - 1;
        let cl = alignment_clusters(&s.spectrum);
        let last = *cl.iter().find(|c| c.contains(&m)).unwrap().last().unwrap();
        if last < top {
            return Ok((s, last));
        }
        if extra > 64 {
            return Err(LabError::Precondition(format!("cluster containing index {m} does not close")));
        }
        extra *= 2;
    }
}

/// Index groups `0..=m_solve` following the alignment clusters of `spectrum`.
pub fn cluster_groups(spectrum: &Spectrum, m_solve: usize) -> Vec<Vec<usize>> {
    alignment_clusters(spectrum)
        .iter()
        .filter(|c| c[0] <= m_solve)
        .map(|c| c.iter().copied().filter(|&k| k <= m_solve).collect())
        .collect()
}

/// Eigenvectors of another mesh recombined within clusters so as to match a reference.
#[derive(Debug, Clone)]
pub struct AlignedVectors {
    /// `vectors[k]` lives on the other mesh and corresponds to reference eigenvector `k`.
    pub vectors: Vec<Vec<f64>>,
    /// Largest principal angle of the cluster containing `k`.
    pub angles: Vec<f64>,
    /// Pairs `(reference vertex, other vertex)` of shared vertices.
    pub common: Vec<(usize, usize)>,
}

/// Aligns the eigenvectors of `other` to those of `reference`, cluster by cluster (clusters of
/// the reference define the groups), comparing on the vertices the two meshes share and
/// weighting them by the reference mass.
pub fn align_to_reference(reference: &Solved, other: &Solved, groups: &[Vec<usize>]) -> Result<AlignedVectors> {
    let corr = reference.mesh.vertex_correspondence(&other.mesh);
    let common: Vec<(usize, usize)> = corr
        .iter()
        .enumerate()
        .filter_map(|(v, o)| o.map(|j| (v, j)))
        .collect();
    if common.is_empty() {
        return Err(LabError::Precondition("meshes share no vertices".into()));
    }
    let w_all = reference.vertex_weights();
    let w: Vec<f64> = common.iter().map(|&(v, _)| w_all[v]).collect();
    let ip = |x: &[f64], y: &[f64]| -> f64 { w.iter().zip(x).zip(y).map(|((w, a), b)| w * a * b).sum() };
    let top = groups.iter().flatten().copied().max().unwrap_or(0);
    if top >= other.spectrum.len() || top >= reference.spectrum.len() {
        return Err(LabError::Precondition(format!("alignment needs eigenpairs up to index {top}")));
    }
    let mut vectors = vec![Vec::new(); top + 1];
    let mut angles = vec![0.0; top + 1];
    for g in groups {
        let a: Vec<Vec<f64>> = g
            .iter()
            .map(|&k| common.iter().map(|&(v, _)| reference.spectrum.eigenvectors[k][v]).collect())
            .collect();
        let b: Vec<Vec<f64>> = g
            .iter()
            .map(|&k| common.iter().map(|&(_, j)| other.spectrum.eigenvectors[k][j]).collect())
            .collect();
        let b_full: Vec<Vec<f64>> = g.iter().map(|&k| other.spectrum.eigenvectors[k].clone()).collect();
        let al = align_subspaces(&a, &b, &b_full, ip)?;
        for (i, &k) in g.iter().enumerate() {
            vectors[k] = al.aligned[i].clone();
            angles[k] = al.distance.max_angle;
        }
    }
    Ok(AlignedVectors {
        vectors,
        angles,
        common,
    })
}

/// Vertices all of whose triangles lie in `region`.
pub fn region_vertices(mesh: &IntrinsicMesh, region: Region) -> Vec<bool> {
    let mut inside = vec![true; mesh.n_vertices()];
    let mut seen = vec![false; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let r = mesh.region(t) == region;
        for &v in tri {
            seen[v] = true;
            inside[v] &= r;
        }
    }
    inside.iter().zip(&seen).map(|(a, b)| *a && *b).collect()
}

/// Largest difference between `aligned` (on the other mesh) and the reference vector `k`, over
/// shared vertices accepted by `keep` (indexed on the other mesh).
pub fn sup_error(reference: &Solved, aligned: &AlignedVectors, k: usize, keep: &[bool]) -> f64 {
    let u = &reference.spectrum.eigenvectors[k];
    aligned
        .common
        .iter()
        .filter(|&&(_, j)| keep[j])
        .map(|&(v, j)| (aligned.vectors[k][j] - u[v]).abs())
        .fold(0.0, f64::max)
}

/// Least-squares line through `(x, y)`: `(slope, intercept, rms residual)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icpt - slope * a).powi(2)).sum();
    (slope, icpt, (rss / n).sqrt())
}

/// True if `values` strictly decrease, treating two consecutive values both below `floor` as
/// equal and acceptable.
pub fn strictly_decreasing(values: &[f64], floor: f64) -> bool {
    values
        .windows(2)
        .all(|w| w[1] < w[0] || (w[0] <= floor && w[1] <= floor))
}
