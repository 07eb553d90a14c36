//! Intrinsic triangle meshes with surgery, P1 finite elements for the Laplace–Beltrami
//! operator, a sparse generalized eigensolver and nodal-set analysis.

pub mod eigen;
pub mod error;
pub mod fem;
pub mod geom;
pub mod mesh;
pub mod nodal;
pub mod surgery;

pub use error::{Error, Result};
