//! Error norms, convergence-order estimation, divergence and Mach
//! monitors, recirculation detection and the conserved-quantity ledger.

use crate::error::{Result, SolverError};
use crate::mesh::StructuredGrid;
use crate::state::{total_energy, total_mass, ConsFields, PrimFields};
use serde::Serialize;

/// Relative L1 error between a coarse solution and a finer reference:
/// sum_j |v(x_j) - v_ref(x_j)| / sum_j |v_ref(x_j)| over the reference
/// points, with the coarse solution linearly interpolated to x_j
/// (clamped to its end values outside the sampled range).
pub fn l1_error(
    coarse_x: &[f64],
    coarse_v: &[f64],
    ref_x: &[f64],
    ref_v: &[f64],
) -> Result<f64> {
    if coarse_x.len() != coarse_v.len() || ref_x.len() != ref_v.len() || coarse_x.is_empty() {
        return Err(SolverError::Config("mismatched or empty sample arrays".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &vr) in ref_x.iter().zip(ref_v) {
        let v = interp_clamped(coarse_x, coarse_v, x);
        num += (v - vr).abs();
        den += vr.abs();
    }
    if den == 0.0 {
        return Err(SolverError::Config("reference norm is zero".into()));
    }
    Ok(num / den)
}

/// Piecewise-linear interpolation on sorted abscissae, clamped outside.
fn interp_clamped(xs: &[f64], vs: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return vs[0];
    }
    if x >= xs[n - 1] {
        return vs[n - 1];
    }
    // partition_point returns the first index with xs[k] > x.
    let k = xs.partition_point(|&xi| xi <= x);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let t = (x - x0) / (x1 - x0);
    vs[k - 1] + t * (vs[k] - vs[k - 1])
}

/// Estimated orders log(E_k / E_{k+1}) / log(dx_k / dx_{k+1}) for a
/// refinement sequence; one entry per consecutive pair.
pub fn convergence_orders(dxs: &[f64], errors: &[f64]) -> Vec<f64> {
    dxs.windows(2)
        .zip(errors.windows(2))
        .map(|(dx, e)| (e[0] / e[1]).ln() / (dx[0] / dx[1]).ln())
        .collect()
}

/// Face-averaged discrete divergence of the velocity, the same operator
/// the mass flux uses: div_i = sum_faces (n/delta) (u_i + u_v)/2, with
/// solid faces contributing zero (u.n vanishes there). Ghosts must be
/// filled. Output is over interior cells in row-major order; solid
/// cells report zero.
pub fn divergence_field(grid: &StructuredGrid, prim: &PrimFields) -> Vec<f64> {
    let mut out = vec![0.0; grid.n_interior()];
    for j in 0..grid.ny as isize {
        for i in 0..grid.nx as isize {
            if !grid.is_active(i, j) {
                continue;
            }
            let un = |vi: isize, vj: isize, axis: usize| -> f64 {
                if grid.is_solid(vi, vj) {
                    return 0.0; // face value (u_i + mirror)/2 . n = 0
                }
                let id = grid.id(vi, vj);
                if axis == 0 {
                    prim.ux[id]
                } else {
                    prim.uy[id]
                }
            };
            let c = grid.id(i, j);
            let mut d = 0.0;
            for (di, dj, axis) in [(1isize, 0isize, 0usize), (-1, 0, 0), (0, 1, 1), (0, -1, 1)] {
                if axis == 1 && grid.dim == 1 {
                    continue;
                }
                let (vi, vj) = (i + di, j + dj);
                let sgn = (di + dj) as f64;
                let delta = if axis == 0 { grid.dx } else { grid.dy };
                let center = if axis == 0 { prim.ux[c] } else { prim.uy[c] };
                let face = if grid.is_solid(vi, vj) {
                    0.0
                } else {
                    0.5 * (center + un(vi, vj, axis))
                };
                d += sgn / delta * face;
            }
            out[grid.interior_idx(i as usize, j as usize)] = d;
        }
    }
    out
}

/// Local Mach number field M = eps |u| / a_m over interior cells
/// (row-major; zero on solid cells). `a2` is the squared mixture sound
/// speed in storage layout.
pub fn local_mach(grid: &StructuredGrid, prim: &PrimFields, a2: &[f64], eps: f64) -> Vec<f64> {
    let mut out = vec![0.0; grid.n_interior()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if grid.is_solid(i as isize, j as isize) {
                continue;
            }
            let id = grid.id(i as isize, j as isize);
            let speed = (prim.ux[id] * prim.ux[id] + prim.uy[id] * prim.uy[id]).sqrt();
            out[grid.interior_idx(i, j)] = eps * speed / a2[id].sqrt();
        }
    }
    out
}

/// Outcome of a recirculation scan.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RecirculationReport {
    pub found: bool,
    /// Estimated vortex center (velocity minimum among swirling cells).
    pub center: Option<(f64, f64)>,
    /// Largest per-cell circulation magnitude encountered.
    pub max_circulation: f64,
}

/// Search window in domain coordinates.
#[derive(Debug, Clone, Copy)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn whole(grid: &StructuredGrid) -> Self {
        Self {
            x_min: grid.x0,
            x_max: grid.x0 + grid.nx as f64 * grid.dx,
            y_min: grid.y0,
            y_max: grid.y0 + grid.ny as f64 * grid.dy,
        }
    }
}

/// Detect a recirculation inside `region`: some closed cell loop must
/// carry a circulation larger than `threshold` in magnitude. The
/// per-cell loop integral of u equals the centered vorticity times the
/// cell area. The vortex center is estimated as the velocity-magnitude
/// minimum among cells whose circulation clears half the threshold.
pub fn detect_recirculation(
    grid: &StructuredGrid,
    prim: &PrimFields,
    region: Region,
    threshold: f64,
) -> RecirculationReport {
    let area = grid.dx * grid.dy;
    let mut max_circ: f64 = 0.0;
    let mut center = None;
    let mut min_speed = f64::INFINITY;
    for j in 0..grid.ny as isize {
        for i in 0..grid.nx as isize {
            if !grid.is_active(i, j) {
                continue;
            }
            let (x, y) = (grid.xc(i as usize), grid.yc(j as usize));
            if x < region.x_min || x > region.x_max || y < region.y_min || y > region.y_max {
                continue;
            }
            let pick = |vi: isize, vj: isize, c: usize, f: &dyn Fn(usize) -> f64| -> f64 {
                if grid.is_solid(vi, vj) {
                    f(c) // zero-gradient fold at interior solids
                } else {
                    f(grid.id(vi, vj))
                }
            };
            let c = grid.id(i, j);
            let dvdx = (pick(i + 1, j, c, &|id| prim.uy[id]) - pick(i - 1, j, c, &|id| prim.uy[id]))
                / (2.0 * grid.dx);
            let dudy = (pick(i, j + 1, c, &|id| prim.ux[id]) - pick(i, j - 1, c, &|id| prim.ux[id]))
                / (2.0 * grid.dy);
            let circ = (dvdx - dudy) * area;
            if circ.abs() > max_circ {
                max_circ = circ.abs();
            }
            if circ.abs() > 0.5 * threshold {
                let speed = (prim.ux[c] * prim.ux[c] + prim.uy[c] * prim.uy[c]).sqrt();
                if speed < min_speed {
                    min_speed = speed;
                    center = Some((x, y));
                }
            }
        }
    }
    let found = max_circ > threshold;
    RecirculationReport { found, center: if found { center } else { None }, max_circulation: max_circ }
}

/// Default circulation threshold in scaled units.
pub const RECIRCULATION_THRESHOLD: f64 = 1e-3;

/// Conserved-quantity ledger: totals at a reference time and relative
/// drifts against them.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConservationLedger {
    pub mass0: f64,
    pub energy0: f64,
}

impl ConservationLedger {
    pub fn new(grid: &StructuredGrid, cons: &ConsFields) -> Self {
        Self { mass0: total_mass(grid, cons), energy0: total_energy(grid, cons) }
    }

    /// (relative mass drift, relative energy drift) versus the reference.
    pub fn drift(&self, grid: &StructuredGrid, cons: &ConsFields) -> (f64, f64) {
        let m = total_mass(grid, cons);
        let e = total_energy(grid, cons);
        (
            (m - self.mass0).abs() / self.mass0.abs().max(f64::MIN_POSITIVE),
            (e - self.energy0).abs() / self.energy0.abs().max(f64::MIN_POSITIVE),
        )
    }
}

/// One row of a convergence study.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ErrorRow {
    pub cells: usize,
    pub dx: f64,
    pub dt: f64,
    pub error: f64,
    /// Order estimated against the previous (coarser) row.
    pub order: Option<f64>,
}

/// Convergence study report; serializes as CSV.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub case: String,
    pub field: String,
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub fn new(case: &str, field: &str) -> Self {
        Self { case: case.into(), field: field.into(), rows: Vec::new() }
    }

    /// Append a row, estimating the order from the previous one.
    pub fn push(&mut self, cells: usize, dx: f64, dt: f64, error: f64) {
        let order = self.rows.last().and_then(|prev| {
            if prev.error > 0.0 && error > 0.0 && prev.dx != dx {
                Some((prev.error / error).ln() / (prev.dx / dx).ln())
            } else {
                None
            }
        });
        self.rows.push(ErrorRow { cells, dx, dt, error, order });
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("cells,dx,dt,l1_error,order\n");
        for r in &self.rows {
            let order = r.order.map_or(String::new(), |o| format!("{o:.17e}"));
            s.push_str(&format!(
                "{},{:.17e},{:.17e},{:.17e},{}\n",
                r.cells, r.dx, r.dt, r.error, order
            ));
        }
        s
    }
}
