//! CSV tables and legacy VTK files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::mesh::Mesh;

use super::study::{ConvergenceRow, DensityRow};
use super::HarnessError;

/// Scientific notation with five significant digits.
pub fn sci5(v: f64) -> String {
    format!("{v:.4e}")
}

fn opt_order(v: Option<f64>) -> String {
    v.map(|o| format!("{o:.4}")).unwrap_or_default()
}

pub fn write_convergence_csv<W: Write>(rows: &[ConvergenceRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "l2_error", "order_l2", "linf_error", "order_linf", "iters_avg", "wall_seconds"])?;
    for r in rows {
        w.write_record([
            sci5(r.h),
            sci5(r.l2_error),
            opt_order(r.order_l2),
            sci5(r.linf_error),
            opt_order(r.order_linf),
            format!("{:.2}", r.iters_avg),
            format!("{:.3}", r.wall_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_density_csv<W: Write>(rows: &[DensityRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["h", "size", "nnz", "density_percent"])?;
    for r in rows {
        w.write_record([
            sci5(r.h),
            format!("{0}x{0}", r.n_dofs),
            r.nnz.to_string(),
            format!("{:.3}", r.density_percent),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Legacy ASCII unstructured grid with one point scalar named `name`.
pub fn write_vtk<W: Write>(mesh: &Mesh, field: &[f64], name: &str, mut out: W) -> Result<(), HarnessError> {
    if field.len() != mesh.n_vertices() {
        return Err(HarnessError::InvalidInput(format!(
            "field has {} values but the mesh has {} vertices",
            field.len(),
            mesh.n_vertices()
        )));
    }
    let n_cells = mesh.n_triangles();
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{name}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {} double", mesh.n_vertices())?;
    for [x, y] in mesh.vertices() {
        writeln!(out, "{x:e} {y:e} 0")?;
    }
    writeln!(out, "CELLS {} {}", n_cells, 4 * n_cells)?;
    for [a, b, c] in mesh.triangles() {
        writeln!(out, "3 {a} {b} {c}")?;
    }
    writeln!(out, "CELL_TYPES {n_cells}")?;
    for _ in 0..n_cells {
        writeln!(out, "5")?;
    }
    writeln!(out, "POINT_DATA {}", mesh.n_vertices())?;
    writeln!(out, "SCALARS {name} double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for v in field {
        writeln!(out, "{v:e}")?;
    }
    Ok(())
}

pub fn emit_vtk(mesh: &Mesh, field: &[f64], path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let mut out = BufWriter::new(File::create(path)?);
    write_vtk(mesh, field, "u", &mut out)?;
    out.flush()?;
    Ok(())
}
