use std::time::Instant;

use crate::assembly::{assemble_stiffness, Discretization, SolverChoice, TimeStepper};
use crate::solver::density;

use super::presets::{build_preset, preset_mesh, ExactSolution, PresetName, PresetOptions};
use super::HarnessError;

/// Control-volume weighted L2 error and nodal max error over interior nodes.
pub fn error_norms(u: &[f64], exact: &ExactSolution, disc: &Discretization, t: f64) -> (f64, f64) {
    let areas = disc.cv().cv_area();
    let (mut sum, mut linf) = (0.0, 0.0f64);
    for (d, &ui) in u.iter().enumerate() {
        let [x, y] = disc.dof_point(d);
        let e = ui - exact.eval(x, y, t);
        sum += areas[disc.dofs().node(d)] * e * e;
        linf = linf.max(e.abs());
    }
    (sum.sqrt(), linf)
}

/// `log(e1/e2) / log(h1/h2)`.
pub fn convergence_order(e1: f64, h1: f64, e2: f64, h2: f64) -> Result<f64, HarnessError> {
    if !(e1 > 0.0 && e2 > 0.0 && h1 > 0.0 && h2 > 0.0) || h1 == h2 {
        return Err(HarnessError::InvalidInput(format!(
            "order needs positive errors and distinct positive h (e1 = {e1}, h1 = {h1}, e2 = {e2}, h2 = {h2})"
        )));
    }
    Ok((e1 / e2).ln() / (h1 / h2).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub h: f64,
    pub n_dofs: usize,
    pub steps: usize,
    pub l2_error: f64,
    pub linf_error: f64,
    pub iters_avg: f64,
    pub wall_seconds: f64,
    /// Solution on every mesh vertex, boundary entries 0.
    pub field: Vec<f64>,
}

/// Builds, assembles and time-marches one preset at one mesh size.
pub fn solve_preset(
    name: PresetName,
    h_target: f64,
    tau: f64,
    opts: PresetOptions,
    solver: SolverChoice,
) -> Result<SolveOutcome, HarnessError> {
    let start = Instant::now();
    let preset = build_preset(name, h_target, tau, opts)?;
    let disc = Discretization::new(preset.mesh)?;
    let mut stepper = TimeStepper::new(&disc, &preset.spec, solver)?;
    let state = stepper.run()?.clone();
    let (l2_error, linf_error) = error_norms(&state.u, &preset.exact, &disc, state.t);
    Ok(SolveOutcome {
        h: disc.mesh().h(),
        n_dofs: disc.n_dofs(),
        steps: stepper.steps_taken(),
        l2_error,
        linf_error,
        iters_avg: stepper.average_iterations(),
        wall_seconds: start.elapsed().as_secs_f64(),
        field: disc.full_field(&state.u),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub n_dofs: usize,
    pub l2_error: f64,
    pub order_l2: Option<f64>,
    pub linf_error: f64,
    pub order_linf: Option<f64>,
    pub iters_avg: f64,
    pub wall_seconds: f64,
}

fn check_levels(h_list: &[f64], min_len: usize) -> Result<(), HarnessError> {
    if h_list.len() < min_len {
        return Err(HarnessError::InvalidInput(format!("need at least {min_len} h levels")));
    }
    if h_list.windows(2).any(|w| w[1] >= w[0]) || h_list.iter().any(|&h| !(h > 0.0)) {
        return Err(HarnessError::InvalidInput("h levels must be positive and strictly decreasing".into()));
    }
    Ok(())
}

pub fn run_convergence(
    name: PresetName,
    h_list: &[f64],
    tau: f64,
    opts: PresetOptions,
    solver: SolverChoice,
) -> Result<Vec<ConvergenceRow>, HarnessError> {
    check_levels(h_list, 2)?;
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let out = solve_preset(name, h, tau, opts, solver)?;
        let (order_l2, order_linf) = match rows.last() {
            Some(prev) => (
                convergence_order(prev.l2_error, prev.h, out.l2_error, out.h).ok(),
                convergence_order(prev.linf_error, prev.h, out.linf_error, out.h).ok(),
            ),
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            h: out.h,
            n_dofs: out.n_dofs,
            l2_error: out.l2_error,
            order_l2,
            linf_error: out.linf_error,
            order_linf,
            iters_avg: out.iters_avg,
            wall_seconds: out.wall_seconds,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityRow {
    pub h: f64,
    pub n_dofs: usize,
    pub nnz: usize,
    pub density_percent: f64,
}

/// Size and fill of the stiffness matrix across mesh levels.
pub fn run_density(name: PresetName, h_list: &[f64], opts: PresetOptions) -> Result<Vec<DensityRow>, HarnessError> {
    check_levels(h_list, 1)?;
    h_list
        .iter()
        .map(|&h| {
            let mesh = preset_mesh(name, h)?;
            let spec = build_preset(name, h, 1e-3, opts)?.spec;
            let disc = Discretization::new(mesh)?;
            let m = assemble_stiffness(&disc, &spec, 0.0)?;
            Ok(DensityRow {
                h: disc.mesh().h(),
                n_dofs: disc.n_dofs(),
                nnz: m.nnz(),
                density_percent: density(&m),
            })
        })
        .collect()
}
