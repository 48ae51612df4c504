//! Output writers: CSV field snapshots, legacy-VTK structured points for
//! 2D fields, and the machine-readable JSON run summary.
//!
//! All numbers are printed with 17 significant digits after the leading
//! one, which round-trips f64 exactly; identical states produce
//! byte-identical files.

use crate::diagnostics::RecirculationReport;
use crate::mesh::StructuredGrid;
use crate::state::{ConsFields, PrimFields};
use crate::error::{Result, SolverError};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::Path;

fn num(v: f64) -> String {
    format!("{v:.17e}")
}

/// Write the interior state as CSV. 1D columns: x, rho, u, p, h.
/// 2D columns: x, y, rho, ux, uy, p, h. Solid cells are included with
/// their (frozen) stored values so the row count matches the grid.
pub fn write_csv_snapshot(
    grid: &StructuredGrid,
    prim: &PrimFields,
    cons: &ConsFields,
    path: &Path,
) -> Result<()> {
    let mut s = String::new();
    if grid.dim == 1 {
        s.push_str("x,rho,u,p,h\n");
        for i in 0..grid.nx {
            let id = grid.id(i as isize, 0);
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                num(grid.xc(i)),
                num(cons.rho[id]),
                num(prim.ux[id]),
                num(prim.p[id]),
                num(prim.h[id])
            );
        }
    } else {
        s.push_str("x,y,rho,ux,uy,p,h\n");
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let id = grid.id(i as isize, j as isize);
                let _ = writeln!(
                    s,
                    "{},{},{},{},{},{},{}",
                    num(grid.xc(i)),
                    num(grid.yc(j)),
                    num(cons.rho[id]),
                    num(prim.ux[id]),
                    num(prim.uy[id]),
                    num(prim.p[id]),
                    num(prim.h[id])
                );
            }
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// A CSV snapshot read back into columns.
pub struct CsvSnapshot {
    pub columns: Vec<String>,
    /// One vector per column, row-major order preserved.
    pub data: Vec<Vec<f64>>,
}

impl CsvSnapshot {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().position(|c| c == name).map(|k| self.data[k].as_slice())
    }
}

pub fn read_csv_snapshot(path: &Path) -> Result<CsvSnapshot> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| SolverError::Io(std::io::Error::other("empty CSV file")))?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    let mut data = vec![Vec::new(); columns.len()];
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns.len() {
            return Err(SolverError::Io(std::io::Error::other(format!(
                "CSV row {} has {} fields, expected {}",
                ln + 2,
                fields.len(),
                columns.len()
            ))));
        }
        for (k, f) in fields.iter().enumerate() {
            let v: f64 = f.trim().parse().map_err(|e| {
                SolverError::Io(std::io::Error::other(format!("CSV parse error: {e}")))
            })?;
            data[k].push(v);
        }
    }
    Ok(CsvSnapshot { columns, data })
}

/// Write a 2D interior state as a legacy ASCII VTK structured-points
/// dataset (one point per cell center): scalars rho, p, h and the
/// velocity vector field.
pub fn write_vtk_snapshot(
    grid: &StructuredGrid,
    prim: &PrimFields,
    cons: &ConsFields,
    path: &Path,
) -> Result<()> {
    if grid.dim != 2 {
        return Err(SolverError::Config("VTK output requires a 2D grid".into()));
    }
    let n = grid.n_interior();
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 2.0\n");
    s.push_str("apflow snapshot\n");
    s.push_str("ASCII\n");
    s.push_str("DATASET STRUCTURED_POINTS\n");
    let _ = writeln!(s, "DIMENSIONS {} {} 1", grid.nx, grid.ny);
    let _ = writeln!(s, "ORIGIN {} {} 0.0", num(grid.xc(0)), num(grid.yc(0)));
    let _ = writeln!(s, "SPACING {} {} 1.0", num(grid.dx), num(grid.dy));
    let _ = writeln!(s, "POINT_DATA {n}");

    for (name, field) in [("rho", &cons.rho), ("p", &prim.p), ("h", &prim.h)] {
        let _ = writeln!(s, "SCALARS {name} double 1");
        s.push_str("LOOKUP_TABLE default\n");
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let _ = writeln!(s, "{}", num(field[grid.id(i as isize, j as isize)]));
            }
        }
    }
    s.push_str("VECTORS velocity double\n");
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let id = grid.id(i as isize, j as isize);
            let _ = writeln!(s, "{} {} 0.0", num(prim.ux[id]), num(prim.uy[id]));
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

/// Machine-readable record of a completed run.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub case: String,
    pub eps: f64,
    pub alpha: f64,
    pub order: usize,
    pub cells: [usize; 2],
    pub steps: usize,
    pub end_time: f64,
    pub wall_clock_seconds: f64,
    /// Time step of every step, in order.
    pub dt_history: Vec<f64>,
    /// Newton iterations of every step, in order.
    pub newton_iters: Vec<usize>,
    pub mass_drift: f64,
    pub energy_drift: f64,
    pub max_divergence: f64,
    pub max_local_mach: f64,
    /// (min, max) over interior fluid cells at the final time.
    pub range_rho: (f64, f64),
    pub range_p: (f64, f64),
    pub range_h: (f64, f64),
    pub range_speed: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recirculation: Option<RecirculationReport>,
}

impl RunSummary {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| SolverError::Io(std::io::Error::other(e)))?;
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// (min, max) over the active cells of a storage-layout field.
pub fn field_range(grid: &StructuredGrid, field: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for j in 0..grid.ny as isize {
        for i in 0..grid.nx as isize {
            if grid.is_active(i, j) {
                let v = field[grid.id(i, j)];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    (lo, hi)
}
