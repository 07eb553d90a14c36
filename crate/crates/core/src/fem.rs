//! P1 finite elements for the Laplace–Beltrami operator on intrinsic meshes.
//!
//! Stiffness entries come from cotangent weights computed from edge lengths, the mass matrix
//! is the consistent P1 mass (optionally lumped). Dirichlet conditions are imposed by
//! eliminating boundary vertices.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geom::{cot_opposite, heron};
use crate::mesh::IntrinsicMesh;

/// Compressed sparse row matrix with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed in input order.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        // stable sort keeps the summation order fixed
        trip.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(k) => v[k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let body = |(i, yi): (usize, &mut f64)| {
            let (c, v) = self.row(i);
            let mut s = 0.0;
            for k in 0..c.len() {
                s += v[k] * x[c[k]];
            }
            *yi = s;
        };
        if self.n > 20_000 {
            y.par_iter_mut().enumerate().for_each(body);
        } else {
            y.iter_mut().enumerate().for_each(body);
        }
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a * b).sum()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| {
            let (c, v) = self.row(i);
            c.iter()
                .zip(v)
                .all(|(&j, &a)| (a - self.get(j, i)).abs() <= tol * a.abs().max(1.0))
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = self.clone();
        for v in &mut m.vals {
            *v *= s;
        }
        m
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for k in 0..c.len() {
                d[(i, c[k])] = v[k];
            }
        }
        d
    }

    /// Coordinate-format dump, one `row col value` line per stored entry, sorted by (row, col).
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for k in 0..c.len() {
                let _ = writeln!(s, "{} {} {:.16e}", i, c[k], v[k]);
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// No boundary conditions (closed surface, or natural Neumann on a boundary).
    Closed,
    /// Zero values on every boundary loop.
    Dirichlet,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    /// Vertices carrying the Dirichlet condition.
    pub dirichlet_mask: Vec<bool>,
    /// Free vertex of each matrix row.
    pub free: Vec<usize>,
    /// Matrix row of each vertex, `None` when eliminated.
    pub row_of: Vec<Option<usize>>,
    pub lumped: bool,
    pub bc: BoundaryCondition,
}

impl DiscreteOperator {
    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.row_of.len()
    }

    /// Extends a free-vertex vector by zeros on eliminated vertices.
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_vertices()];
        for (r, &v) in self.free.iter().enumerate() {
            full[v] = u[r];
        }
        full
    }

    /// Restricts a vertex vector to the free vertices.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&v| full[v]).collect()
    }

    /// Accepts either a free-vertex or a full vertex vector.
    fn as_free<'a>(&self, u: &'a [f64]) -> Result<std::borrow::Cow<'a, [f64]>> {
        if u.len() == self.n_free() {
            Ok(std::borrow::Cow::Borrowed(u))
        } else if u.len() == self.n_vertices() {
            Ok(std::borrow::Cow::Owned(self.restrict(u)))
        } else {
            Err(Error::Dimension(format!(
                "vector of length {} for {} free / {} total vertices",
                u.len(),
                self.n_free(),
                self.n_vertices()
            )))
        }
    }
}

/// Per-element stiffness and mass for a triangle with side lengths `l` (opposite vertices
/// 0, 1, 2).
pub fn element_matrices(l: [f64; 3], lumped: bool) -> Result<([[f64; 3]; 3], [[f64; 3]; 3])> {
    let area = heron(l[0], l[1], l[2]);
    if !(area > 0.0) {
        return Err(Error::Assembly(format!("triangle with sides {l:?} has area {area}")));
    }
    let mut k = [[0.0; 3]; 3];
    for c in 0..3 {
        let (i, j) = ((c + 1) % 3, (c + 2) % 3);
        let w = 0.5 * cot_opposite(l[c], l[i], l[j], area);
        k[i][j] -= w;
        k[j][i] -= w;
        k[i][i] += w;
        k[j][j] += w;
    }
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = if lumped {
                if i == j {
                    area / 3.0
                } else {
                    0.0
                }
            } else if i == j {
                area / 6.0
            } else {
                area / 12.0
            };
        }
    }
    Ok((k, m))
}

pub fn assemble(mesh: &IntrinsicMesh, bc: BoundaryCondition) -> Result<DiscreteOperator> {
    assemble_with(mesh, bc, false, None)
}

/// Assembly with optional lumped mass and an explicit Dirichlet vertex set (overriding the
/// boundary loops when given).
pub fn assemble_with(
    mesh: &IntrinsicMesh,
    bc: BoundaryCondition,
    lumped: bool,
    dirichlet: Option<&[bool]>,
) -> Result<DiscreteOperator> {
    let n = mesh.n_vertices();
    let mask: Vec<bool> = match (bc, dirichlet) {
        (BoundaryCondition::Closed, _) => vec![false; n],
        (BoundaryCondition::Dirichlet, Some(d)) => {
            if d.len() != n {
                return Err(Error::Dimension("Dirichlet mask length".into()));
            }
            d.to_vec()
        }
        (BoundaryCondition::Dirichlet, None) => {
            if mesh.is_closed() {
                return Err(Error::Assembly(
                    "Dirichlet conditions need a mesh with boundary".into(),
                ));
            }
            mesh.boundary_mask()
        }
    };
    let mut row_of = vec![None; n];
    let mut free = Vec::new();
    for v in 0..n {
        if !mask[v] {
            row_of[v] = Some(free.len());
            free.push(v);
        }
    }
    if free.is_empty() {
        return Err(Error::Assembly("no free vertices".into()));
    }
    let elements: Vec<Result<([[f64; 3]; 3], [[f64; 3]; 3])>> = (0..mesh.n_triangles())
        .into_par_iter()
        .map(|t| element_matrices(mesh.triangle_lengths(t), lumped))
        .collect();
    let mut kt = Vec::with_capacity(mesh.n_triangles() * 9);
    let mut mt = Vec::with_capacity(mesh.n_triangles() * 9);
    for (t, el) in elements.into_iter().enumerate() {
        let (k, m) = el?;
        let tri = mesh.triangles()[t];
        for i in 0..3 {
            let Some(ri) = row_of[tri[i]] else { continue };
            for j in 0..3 {
                let Some(rj) = row_of[tri[j]] else { continue };
                kt.push((ri, rj, k[i][j]));
                if m[i][j] != 0.0 {
                    mt.push((ri, rj, m[i][j]));
                }
            }
        }
    }
    let nf = free.len();
    Ok(DiscreteOperator {
        stiffness: CsrMatrix::from_triplets(nf, kt),
        mass: CsrMatrix::from_triplets(nf, mt),
        dirichlet_mask: mask,
        free,
        row_of,
        lumped,
        bc,
    })
}

/// Rayleigh quotient `u^T K u / u^T M u`.
pub fn rayleigh(op: &DiscreteOperator, u: &[f64]) -> Result<f64> {
    let u = op.as_free(u)?;
    let den = op.mass.bilinear(&u, &u);
    if !(den > 0.0) {
        return Err(Error::InvalidArgument("vector has zero mass norm".into()));
    }
    Ok(op.stiffness.bilinear(&u, &u) / den)
}
