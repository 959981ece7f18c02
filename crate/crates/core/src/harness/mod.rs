//! Problem presets, error studies and file output.

mod output;
mod presets;
mod study;

use thiserror::Error;

use crate::assembly::AssemblyError;
use crate::mesh::MeshError;
use crate::solver::SolverError;

pub use output::{emit_vtk, sci5, write_convergence_csv, write_density_csv, write_vtk};
pub use presets::{
    build_preset, p_helper, preset_mesh, rl_monomial, ExactSolution, Preset, PresetName, PresetOptions,
};
pub use study::{
    convergence_order, error_norms, run_convergence, run_density, solve_preset, ConvergenceRow, DensityRow,
    SolveOutcome,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("{0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// True when the failure came from the linear solver rather than the input.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            HarnessError::Assembly(AssemblyError::NotConverged { .. })
                | HarnessError::Assembly(AssemblyError::Solver(SolverError::Breakdown { .. }))
        )
    }
}
