use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use frac_cvm::assembly::SolverChoice;
use frac_cvm::cvgeom::build_control_volumes;
use frac_cvm::harness::{
    emit_vtk, preset_mesh, run_convergence, run_density, sci5, solve_preset, write_convergence_csv,
    write_density_csv, ConvergenceRow, HarnessError, PresetName, PresetOptions,
};
use frac_cvm::mesh::{load_mesh, Mesh};

#[derive(Parser)]
#[command(name = "frac-cvm", version, about = "Control volume solver for 2D space-fractional diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one preset on one mesh and report errors against the exact solution.
    Solve {
        #[arg(long)]
        preset: PresetName,
        #[arg(long)]
        h: f64,
        #[command(flatten)]
        time: TimeArgs,
        #[command(flatten)]
        orders: OrderArgs,
        #[arg(long)]
        vtk: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SolverArg::Bicgstab)]
        solver: SolverArg,
    },
    /// Error and order table over a sequence of mesh sizes.
    Convergence {
        #[arg(long)]
        preset: PresetName,
        #[arg(long, value_delimiter = ',', required = true)]
        h_levels: Vec<f64>,
        #[command(flatten)]
        time: TimeArgs,
        #[command(flatten)]
        orders: OrderArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SolverArg::Bicgstab)]
        solver: SolverArg,
    },
    /// Size and density of the stiffness matrix over a sequence of mesh sizes.
    Density {
        #[arg(long)]
        preset: PresetName,
        #[arg(long, value_delimiter = ',', required = true)]
        h_levels: Vec<f64>,
        #[command(flatten)]
        orders: OrderArgs,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Mesh statistics for a mesh file or `<preset>[@h]`.
    MeshInfo { target: String },
}

#[derive(Args)]
struct TimeArgs {
    /// Time step.
    #[arg(long, default_value_t = 1e-3)]
    tau: f64,
    /// Final time.
    #[arg(long, default_value_t = 1.0)]
    t_final: f64,
    /// Use tau = 1e-2 regardless of --tau.
    #[arg(long)]
    fast: bool,
}

impl TimeArgs {
    fn tau(&self) -> f64 {
        if self.fast {
            1e-2
        } else {
            self.tau
        }
    }
}

#[derive(Args)]
struct OrderArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Bicgstab,
    Dense,
}

impl From<SolverArg> for SolverChoice {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Bicgstab => SolverChoice::BiCgStab,
            SolverArg::Dense => SolverChoice::Dense,
        }
    }
}

fn options(orders: &OrderArgs, t_final: Option<f64>) -> PresetOptions {
    PresetOptions {
        alpha: orders.alpha,
        beta: orders.beta,
        t_final,
    }
}

fn write_table<F>(path: Option<&Path>, write: F) -> Result<(), HarnessError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), HarnessError>,
{
    match path {
        Some(p) => {
            let mut out = BufWriter::new(File::create(p)?);
            write(&mut out)?;
            out.flush()?;
        }
        None => write(&mut io::stdout().lock())?,
    }
    Ok(())
}

fn mesh_for(target: &str) -> Result<Mesh, HarnessError> {
    if Path::new(target).is_file() {
        return Ok(load_mesh(target)?);
    }
    let (name, h) = match target.split_once('@') {
        Some((name, h)) => (
            name,
            h.parse::<f64>()
                .map_err(|_| HarnessError::InvalidInput(format!("bad mesh size `{h}`")))?,
        ),
        None => (target, 0.3),
    };
    let name: PresetName = name.parse()?;
    preset_mesh(name, h)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Solve {
            preset,
            h,
            time,
            orders,
            vtk,
            csv,
            solver,
        } => {
            let out = solve_preset(preset, h, time.tau(), options(&orders, Some(time.t_final)), solver.into())?;
            println!("preset      {preset}");
            println!("h           {}", sci5(out.h));
            println!("unknowns    {}", out.n_dofs);
            println!("steps       {}", out.steps);
            println!("iters_avg   {:.2}", out.iters_avg);
            println!("l2_error    {}", sci5(out.l2_error));
            println!("linf_error  {}", sci5(out.linf_error));
            println!("wall        {:.3} s", out.wall_seconds);
            if let Some(path) = vtk {
                let mesh = preset_mesh(preset, h)?;
                emit_vtk(&mesh, &out.field, path)?;
            }
            if let Some(path) = csv {
                let row = ConvergenceRow {
                    h: out.h,
                    n_dofs: out.n_dofs,
                    l2_error: out.l2_error,
                    order_l2: None,
                    linf_error: out.linf_error,
                    order_linf: None,
                    iters_avg: out.iters_avg,
                    wall_seconds: out.wall_seconds,
                };
                write_table(Some(&path), |w| write_convergence_csv(&[row], w))?;
            }
        }
        Command::Convergence {
            preset,
            h_levels,
            time,
            orders,
            csv,
            solver,
        } => {
            let rows = run_convergence(
                preset,
                &h_levels,
                time.tau(),
                options(&orders, Some(time.t_final)),
                solver.into(),
            )?;
            write_table(csv.as_deref(), |w| write_convergence_csv(&rows, w))?;
        }
        Command::Density {
            preset,
            h_levels,
            orders,
            csv,
        } => {
            let rows = run_density(preset, &h_levels, options(&orders, None))?;
            write_table(csv.as_deref(), |w| write_density_csv(&rows, w))?;
        }
        Command::MeshInfo { target } => {
            let mesh = mesh_for(&target)?;
            let cv = build_control_volumes(&mesh).map_err(frac_cvm::assembly::AssemblyError::from)?;
            let interior: Vec<f64> = (0..mesh.n_vertices())
                .filter(|&i| !mesh.is_boundary(i))
                .map(|i| cv.cv_area()[i])
                .collect();
            let (lo, hi) = interior
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &a| (lo.min(a), hi.max(a)));
            println!("interior    {}", mesh.n_interior());
            println!("vertices    {}", mesh.n_vertices());
            println!("triangles   {}", mesh.n_triangles());
            println!("h           {}", sci5(mesh.h()));
            if !interior.is_empty() {
                println!("cv_area     min {} max {}", sci5(lo), sci5(hi));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
