//! Control volume discretization of two-sided space-fractional diffusion on
//! unstructured triangular meshes.

pub mod assembly;
pub mod cvgeom;
pub mod fracbasis;
pub mod mesh;
pub mod solver;
pub mod special;
pub mod harness;
