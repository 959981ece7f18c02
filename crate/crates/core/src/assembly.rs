//! System assembly and backward-Euler time stepping.
//!
//! Integrating the equation over node `i`'s control volume and applying
//! Green's theorem turns the flux divergence into line integrals over the
//! control faces, each approximated at the face midpoint:
//!
//! ```text
//! M[i][k] = Σ_faces (K1·Dx⁺ l_k − K2·Dx⁻ l_k)·Δy − (K3·Dy⁺ l_k − K4·Dy⁻ l_k)·Δx
//! ```
//!
//! where `Dx⁺`/`Dx⁻` are the left/right Riemann–Liouville derivatives along
//! the horizontal line through the midpoint (likewise `Dy±` vertically).
//! With lumped mass `A = diag(ΔV_i)` each step solves
//! `(A − τM) Uⁿ = A Uⁿ⁻¹ + τ A Fⁿ`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::cvgeom::{build_control_volumes, ControlFace, CvGeometry, GeometryError};
use crate::fracbasis::{
    frac_deriv_at, line_restriction, support_domains, Axis, FracError, FracOrder, Side,
    SupportDomain,
};
use crate::mesh::{DomainDescriptor, Mesh, MeshError, Point};
use crate::solver::{bicgstab, BicgstabParams, CsrMatrix, DenseLu, SolveReport, SolverError};

pub type SpaceTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Frac(#[from] FracError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("control volume of node {node} has non-positive area {area:e}")]
    NonPositiveVolume { node: usize, area: f64 },
    #[error("forcing is not finite at node {node} ({x}, {y}), t = {t}")]
    NonFiniteForcing { node: usize, x: f64, y: f64, t: f64 },
    #[error("coefficient K{which} = {value} at ({x}, {y}), t = {t} is negative or not finite")]
    BadCoefficient {
        which: usize,
        value: f64,
        x: f64,
        y: f64,
        t: f64,
    },
    #[error(
        "linear solver did not converge at step {step} (t = {t}): {iterations} iterations, relative residual {residual:e}"
    )]
    NotConverged {
        step: usize,
        t: f64,
        iterations: usize,
        residual: f64,
    },
}

/// Problem data for the two-sided space-fractional diffusion equation.
#[derive(Clone)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub beta: f64,
    pub k1: SpaceTimeFn,
    pub k2: SpaceTimeFn,
    pub k3: SpaceTimeFn,
    pub k4: SpaceTimeFn,
    pub forcing: SpaceTimeFn,
    pub initial: SpaceFn,
    pub domain: DomainDescriptor,
    pub t_final: f64,
    pub tau: f64,
    /// Reassemble the stiffness matrix at every step.
    pub coefficients_time_dependent: bool,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("domain", &self.domain)
            .field("t_final", &self.t_final)
            .field("tau", &self.tau)
            .field("coefficients_time_dependent", &self.coefficients_time_dependent)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<(), AssemblyError> {
        FracOrder::new(self.alpha)?;
        FracOrder::new(self.beta)?;
        if !(self.t_final > 0.0) || !(self.tau > 0.0) {
            return Err(AssemblyError::InvalidProblem(format!(
                "need T > 0 and tau > 0, got T = {}, tau = {}",
                self.t_final, self.tau
            )));
        }
        self.domain.validate()?;
        Ok(())
    }

    pub fn coefficients(&self, x: f64, y: f64, t: f64) -> [f64; 4] {
        [
            (self.k1)(x, y, t),
            (self.k2)(x, y, t),
            (self.k3)(x, y, t),
            (self.k4)(x, y, t),
        ]
    }
}

/// Nodal unknowns over interior nodes at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub u: Vec<f64>,
    pub t: f64,
}

/// Interior nodes numbered by ascending `(y, x)`.
#[derive(Debug, Clone)]
pub struct DofMap {
    dof_to_node: Vec<usize>,
    node_to_dof: Vec<Option<usize>>,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        let mut interior: Vec<usize> = (0..mesh.n_vertices())
            .filter(|&i| !mesh.is_boundary(i))
            .collect();
        interior.sort_by(|&a, &b| {
            let (pa, pb) = (mesh.vertex(a), mesh.vertex(b));
            pa[1].total_cmp(&pb[1]).then(pa[0].total_cmp(&pb[0]))
        });
        let mut node_to_dof = vec![None; mesh.n_vertices()];
        for (d, &n) in interior.iter().enumerate() {
            node_to_dof[n] = Some(d);
        }
        DofMap {
            dof_to_node: interior,
            node_to_dof,
        }
    }

    pub fn len(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dof_to_node.is_empty()
    }

    pub fn node(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.node_to_dof[node]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.dof_to_node
    }
}

/// Sorted-interval index answering "which support boxes does this line cross".
#[derive(Debug, Clone)]
struct IntervalIndex {
    /// `(lo, hi, dof)` sorted by `lo`.
    intervals: Vec<(f64, f64, usize)>,
    max_width: f64,
}

impl IntervalIndex {
    fn new(mut intervals: Vec<(f64, f64, usize)>) -> Self {
        intervals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        let max_width = intervals.iter().fold(0.0f64, |m, iv| m.max(iv.1 - iv.0));
        IntervalIndex {
            intervals,
            max_width,
        }
    }

    fn stab(&self, level: f64, out: &mut Vec<usize>) {
        let start = self
            .intervals
            .partition_point(|iv| iv.0 < level - self.max_width);
        for iv in &self.intervals[start..] {
            if iv.0 > level {
                break;
            }
            if iv.1 >= level {
                out.push(iv.2);
            }
        }
    }
}

/// Mesh, control volumes, supports and the line-stabbing index, built once.
#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Mesh,
    cv: CvGeometry,
    supports: Vec<SupportDomain>,
    dofs: DofMap,
    /// Support y-ranges, queried by horizontal lines.
    by_y: IntervalIndex,
    /// Support x-ranges, queried by vertical lines.
    by_x: IntervalIndex,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Result<Self, AssemblyError> {
        let cv = build_control_volumes(&mesh)?;
        let supports = support_domains(&mesh);
        let dofs = DofMap::new(&mesh);
        let by_y = IntervalIndex::new(
            (0..dofs.len())
                .map(|d| {
                    let b = supports[dofs.node(d)].bbox;
                    (b.min[1], b.max[1], d)
                })
                .collect(),
        );
        let by_x = IntervalIndex::new(
            (0..dofs.len())
                .map(|d| {
                    let b = supports[dofs.node(d)].bbox;
                    (b.min[0], b.max[0], d)
                })
                .collect(),
        );
        Ok(Discretization {
            mesh,
            cv,
            supports,
            dofs,
            by_y,
            by_x,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn cv(&self) -> &CvGeometry {
        &self.cv
    }

    pub fn supports(&self) -> &[SupportDomain] {
        &self.supports
    }

    pub fn dofs(&self) -> &DofMap {
        &self.dofs
    }

    pub fn n_dofs(&self) -> usize {
        self.dofs.len()
    }

    /// Coordinates of interior node `dof`.
    pub fn dof_point(&self, dof: usize) -> Point {
        self.mesh.vertex(self.dofs.node(dof))
    }

    /// Interior unknowns whose support is crossed by the horizontal or the
    /// vertical line through `point`, sorted.
    pub fn candidate_columns(&self, point: Point) -> Vec<usize> {
        let mut all = self.stabbed(point);
        all.retain(|&dof| {
            let support = &self.supports[self.dofs.node(dof)];
            !line_restriction(&self.mesh, support, Axis::Horizontal, point[1]).is_empty()
                || !line_restriction(&self.mesh, support, Axis::Vertical, point[0]).is_empty()
        });
        all
    }

    /// Unknowns whose support box meets either line through `point`.
    fn stabbed(&self, point: Point) -> Vec<usize> {
        let mut out = Vec::new();
        self.by_y.stab(point[1], &mut out);
        self.by_x.stab(point[0], &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Expands interior values to every mesh vertex (boundary entries 0).
    pub fn full_field(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mesh.n_vertices()];
        for (d, &v) in u.iter().enumerate() {
            out[self.dofs.node(d)] = v;
        }
        out
    }

    /// `[Dx⁺, Dx⁻, Dy⁺, Dy⁻]` of basis function `l_node` at `point`.
    pub fn basis_derivatives(
        &self,
        node: usize,
        point: Point,
        alpha: FracOrder,
        beta: FracOrder,
    ) -> [f64; 4] {
        let support = &self.supports[node];
        let mut d = [0.0; 4];
        let h = line_restriction(&self.mesh, support, Axis::Horizontal, point[1]);
        if !h.is_empty() {
            d[0] = frac_deriv_at(&h, alpha, point[0], Side::Left);
            d[1] = frac_deriv_at(&h, alpha, point[0], Side::Right);
        }
        let v = line_restriction(&self.mesh, support, Axis::Vertical, point[0]);
        if !v.is_empty() {
            d[2] = frac_deriv_at(&v, beta, point[1], Side::Left);
            d[3] = frac_deriv_at(&v, beta, point[1], Side::Right);
        }
        d
    }
}

pub fn assemble_mass(cv: &CvGeometry, dofs: &DofMap) -> Result<Vec<f64>, AssemblyError> {
    dofs.nodes()
        .iter()
        .map(|&node| {
            let area = cv.cv_area()[node];
            if area > 0.0 {
                Ok(area)
            } else {
                Err(AssemblyError::NonPositiveVolume { node, area })
            }
        })
        .collect()
}

/// Per-face flux law: how the four basis derivatives combine into `M[i][k]`.
enum FluxLaw<'a> {
    TwoSided { problem: &'a ProblemSpec, t: f64 },
    Riesz { cx: f64, cy: f64 },
}

#[derive(Clone, Copy)]
enum FaceFlux {
    TwoSided { k: [f64; 4], dx: f64, dy: f64 },
    Riesz { cx: f64, cy: f64, dx: f64, dy: f64 },
}

impl FaceFlux {
    #[inline]
    fn combine(&self, d: [f64; 4]) -> f64 {
        match *self {
            FaceFlux::TwoSided { k, dx, dy } => {
                (k[0] * d[0] - k[1] * d[1]) * dy - (k[2] * d[2] - k[3] * d[3]) * dx
            }
            FaceFlux::Riesz { cx, cy, dx, dy } => cx * (d[0] - d[1]) * dy - cy * (d[2] - d[3]) * dx,
        }
    }
}

impl FluxLaw<'_> {
    fn face_flux(&self, face: &ControlFace) -> Result<FaceFlux, AssemblyError> {
        Ok(match *self {
            FluxLaw::TwoSided { problem, t } => {
                let [x, y] = face.midpoint;
                let k = problem.coefficients(x, y, t);
                for (which, &value) in k.iter().enumerate() {
                    if !(value >= 0.0 && value.is_finite()) {
                        return Err(AssemblyError::BadCoefficient {
                            which: which + 1,
                            value,
                            x,
                            y,
                            t,
                        });
                    }
                }
                FaceFlux::TwoSided {
                    k,
                    dx: face.dx,
                    dy: face.dy,
                }
            }
            FluxLaw::Riesz { cx, cy } => FaceFlux::Riesz {
                cx,
                cy,
                dx: face.dx,
                dy: face.dy,
            },
        })
    }
}

fn assemble_rows(
    disc: &Discretization,
    alpha: FracOrder,
    beta: FracOrder,
    law: &FluxLaw<'_>,
) -> Result<CsrMatrix, AssemblyError> {
    let n = disc.n_dofs();
    let rows: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|row| -> Result<Vec<(usize, f64)>, AssemblyError> {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for face in disc.cv.faces_of(disc.dofs.node(row)) {
                let flux = law.face_flux(face)?;
                for col in disc.stabbed(face.midpoint) {
                    let d = disc.basis_derivatives(disc.dofs.node(col), face.midpoint, alpha, beta);
                    if d == [0.0; 4] {
                        continue;
                    }
                    *acc.entry(col).or_insert(0.0) += flux.combine(d);
                }
            }
            Ok(acc.into_iter().collect())
        })
        .collect::<Result<_, _>>()?;

    let max = rows
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |m, &(_, v)| m.max(v.abs()));
    let drop_below = 1e-15 * max;
    let rows = rows
        .into_iter()
        .map(|r| r.into_iter().filter(|&(_, v)| v.abs() >= drop_below && v != 0.0).collect())
        .collect();
    Ok(CsrMatrix::from_sorted_rows(n, rows))
}

/// Sparse stiffness matrix `M` over interior unknowns at time `t`.
pub fn assemble_stiffness(
    disc: &Discretization,
    problem: &ProblemSpec,
    t: f64,
) -> Result<CsrMatrix, AssemblyError> {
    let alpha = FracOrder::new(problem.alpha)?;
    let beta = FracOrder::new(problem.beta)?;
    assemble_rows(disc, alpha, beta, &FluxLaw::TwoSided { problem, t })
}

/// Two-sided constants `(K1, K2, K3, K4)` equivalent to the Riesz operator
/// `Kx ∂^{1+α}/∂|x|^{1+α} + Ky ∂^{1+β}/∂|y|^{1+β}`.
pub fn riesz_to_two_sided(kx: f64, ky: f64, alpha: f64, beta: f64) -> Result<[f64; 4], AssemblyError> {
    FracOrder::new(alpha)?;
    FracOrder::new(beta)?;
    if !(kx > 0.0 && ky > 0.0) {
        return Err(AssemblyError::InvalidProblem(format!(
            "Riesz coefficients must be positive, got Kx = {kx}, Ky = {ky}"
        )));
    }
    let cx = -kx / (2.0 * (PI * (1.0 + alpha) / 2.0).cos());
    let cy = -ky / (2.0 * (PI * (1.0 + beta) / 2.0).cos());
    Ok([cx, cx, cy, cy])
}

/// Stiffness matrix of the Riesz operator, assembled directly from
/// `Kx`, `Ky` rather than through four two-sided coefficient functions.
pub fn assemble_riesz_stiffness(
    disc: &Discretization,
    kx: f64,
    ky: f64,
    alpha: f64,
    beta: f64,
) -> Result<CsrMatrix, AssemblyError> {
    let a = FracOrder::new(alpha)?;
    let b = FracOrder::new(beta)?;
    let cx = kx / (-2.0 * (0.5 * PI * (1.0 + alpha)).cos());
    let cy = ky / (-2.0 * (0.5 * PI * (1.0 + beta)).cos());
    assemble_rows(disc, a, b, &FluxLaw::Riesz { cx, cy })
}

/// Un-weighted nodal forcing `Fⁿ_i = f(x_i, y_i, t)` over interior nodes.
pub fn assemble_rhs(disc: &Discretization, problem: &ProblemSpec, t: f64) -> Result<Vec<f64>, AssemblyError> {
    (0..disc.n_dofs())
        .map(|d| {
            let [x, y] = disc.dof_point(d);
            let v = (problem.forcing)(x, y, t);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(AssemblyError::NonFiniteForcing {
                    node: disc.dofs.node(d),
                    x,
                    y,
                    t,
                })
            }
        })
        .collect()
}

/// Initial nodal values `φ(x_i, y_i)`.
pub fn initial_state(disc: &Discretization, problem: &ProblemSpec) -> DiscreteState {
    DiscreteState {
        u: (0..disc.n_dofs())
            .map(|d| {
                let [x, y] = disc.dof_point(d);
                (problem.initial)(x, y)
            })
            .collect(),
        t: 0.0,
    }
}

/// `A − τM`.
pub fn system_matrix(mass: &[f64], stiffness: &CsrMatrix, tau: f64) -> CsrMatrix {
    stiffness.scaled_plus_diagonal(-tau, mass)
}

#[derive(Debug, Clone)]
pub enum LinearSolver {
    BiCgStab(BicgstabParams),
    Dense(DenseLu),
}

impl LinearSolver {
    pub fn bicgstab() -> Self {
        LinearSolver::BiCgStab(BicgstabParams::default())
    }

    pub fn dense(a0: &CsrMatrix) -> Result<Self, AssemblyError> {
        Ok(LinearSolver::Dense(DenseLu::factor(&a0.to_dense())?))
    }

    pub fn solve(&self, a0: &CsrMatrix, b: &[f64], x0: &[f64]) -> Result<(Vec<f64>, SolveReport), AssemblyError> {
        match self {
            LinearSolver::BiCgStab(params) => Ok(bicgstab(a0, b, x0, *params)?),
            LinearSolver::Dense(lu) => {
                let x = lu.solve(b)?;
                let mut r = crate::solver::spmv(a0, &x)?;
                let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri = bi - *ri;
                }
                let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                Ok((
                    x,
                    SolveReport {
                        iterations: 0,
                        final_residual: if b_norm > 0.0 { r_norm / b_norm } else { r_norm },
                        converged: true,
                    },
                ))
            }
        }
    }
}

/// One backward-Euler step: solves `(A − τM) Uⁿ = A Uⁿ⁻¹ + τ A Fⁿ`
/// starting the iteration from `Uⁿ⁻¹`.
pub fn step(
    state: &DiscreteState,
    mass: &[f64],
    a0: &CsrMatrix,
    forcing: &[f64],
    tau: f64,
    solver: &LinearSolver,
) -> Result<(DiscreteState, SolveReport), AssemblyError> {
    let b: Vec<f64> = mass
        .iter()
        .zip(&state.u)
        .zip(forcing)
        .map(|((&a, &u), &f)| a * u + tau * a * f)
        .collect();
    let (u, report) = solver.solve(a0, &b, &state.u)?;
    Ok((DiscreteState { u, t: state.t + tau }, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    BiCgStab,
    Dense,
}

/// Drives the time loop for one problem on one discretization.
pub struct TimeStepper<'a> {
    disc: &'a Discretization,
    problem: &'a ProblemSpec,
    mass: Vec<f64>,
    stiffness: CsrMatrix,
    system: CsrMatrix,
    solver: LinearSolver,
    choice: SolverChoice,
    state: DiscreteState,
    steps_taken: usize,
    total_iterations: usize,
}

impl<'a> TimeStepper<'a> {
    pub fn new(
        disc: &'a Discretization,
        problem: &'a ProblemSpec,
        choice: SolverChoice,
    ) -> Result<Self, AssemblyError> {
        problem.validate()?;
        let mass = assemble_mass(&disc.cv, &disc.dofs)?;
        let stiffness = assemble_stiffness(disc, problem, 0.0)?;
        let system = system_matrix(&mass, &stiffness, problem.tau);
        let solver = match choice {
            SolverChoice::BiCgStab => LinearSolver::bicgstab(),
            SolverChoice::Dense => LinearSolver::dense(&system)?,
        };
        Ok(TimeStepper {
            disc,
            problem,
            mass,
            stiffness,
            system,
            solver,
            choice,
            state: initial_state(disc, problem),
            steps_taken: 0,
            total_iterations: 0,
        })
    }

    pub fn state(&self) -> &DiscreteState {
        &self.state
    }

    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    pub fn average_iterations(&self) -> f64 {
        if self.steps_taken == 0 {
            0.0
        } else {
            self.total_iterations as f64 / self.steps_taken as f64
        }
    }

    pub fn advance(&mut self) -> Result<SolveReport, AssemblyError> {
        let n = self.steps_taken + 1;
        let t_n = n as f64 * self.problem.tau;
        if self.problem.coefficients_time_dependent {
            self.stiffness = assemble_stiffness(self.disc, self.problem, t_n)?;
            self.system = system_matrix(&self.mass, &self.stiffness, self.problem.tau);
            if self.choice == SolverChoice::Dense {
                self.solver = LinearSolver::dense(&self.system)?;
            }
        }
        let forcing = assemble_rhs(self.disc, self.problem, t_n)?;
        let (mut next, report) = step(
            &self.state,
            &self.mass,
            &self.system,
            &forcing,
            self.problem.tau,
            &self.solver,
        )?;
        if !report.converged {
            return Err(AssemblyError::NotConverged {
                step: n,
                t: t_n,
                iterations: report.iterations,
                residual: report.final_residual,
            });
        }
        next.t = t_n;
        self.state = next;
        self.steps_taken = n;
        self.total_iterations += report.iterations;
        Ok(report)
    }

    /// Advances to `t_final`, taking `round(T/τ)` steps.
    pub fn run(&mut self) -> Result<&DiscreteState, AssemblyError> {
        let n_steps = (self.problem.t_final / self.problem.tau).round() as usize;
        while self.steps_taken < n_steps {
            self.advance()?;
        }
        Ok(&self.state)
    }
}
