//! Implicit pressure stage of the semi-implicit step.
//!
//! Inserting the momentum closure q = q* - dt * c * grad(p), with
//! c = (1 - alpha eps^2) / eps^2, into the face-averaged energy divergence
//! yields one elliptic equation per cell:
//!
//!   (rho h(p) - p)_i - dt^2 c * Dv(H grad p)_i = phi_i
//!
//! where Dv and grad are the centered face-averaged operators (so the
//! composed stencil is the wide one reaching neighbors-of-neighbors) and
//! H is the total enthalpy frozen at time n. The whole system is
//! assembled multiplied by eps^2, so no coefficient degenerates as
//! eps -> 0:
//!
//!   eps^2 (rho h - p)_i + dt^2 (1 - alpha eps^2) L_H p = eps^2 phi_i
//!
//! A perfect gas makes the left side linear in p (rho h - p = p/(gamma-1));
//! any other equation of state goes through a Newton iteration in (p, h)
//! with the enthalpy increment eliminated cell by cell.

use crate::eos::{EquationOfState, PerfectGas};
use crate::error::{Result, SolverError};
use crate::flux::FluxField;
use crate::linalg::{bicgstab, dense_solve, SparseMatrix};
use crate::mesh::{BoundaryTag, StructuredGrid};
use crate::state::ConsFields;

/// Map between active (interior, fluid) cells and linear unknown indices.
pub struct UnknownMap {
    /// (i, j) of each unknown, row-major order.
    pub cells: Vec<(usize, usize)>,
    /// Interior row-major cell -> unknown index (None for solid cells).
    pub index: Vec<Option<usize>>,
}

impl UnknownMap {
    pub fn build(grid: &StructuredGrid) -> Self {
        let mut cells = Vec::new();
        let mut index = vec![None; grid.n_interior()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if !grid.is_solid(i as isize, j as isize) {
                    index[grid.interior_idx(i, j)] = Some(cells.len());
                    cells.push((i, j));
                }
            }
        }
        Self { cells, index }
    }

    pub fn n(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    fn col(&self, grid: &StructuredGrid, i: isize, j: isize) -> Option<usize> {
        if grid.is_ghost(i, j) {
            None
        } else {
            self.index[grid.interior_idx(i as usize, j as usize)]
        }
    }
}

/// Tolerances and scheme constants for one pressure solve.
#[derive(Debug, Clone, Copy)]
pub struct PressureConfig {
    pub eps: f64,
    pub alpha: f64,
    pub dt: f64,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Route the linear solves through the dense LU factorization
    /// (available up to 64^2 unknowns); used as cross-check oracle.
    pub direct: bool,
}

impl PressureConfig {
    pub fn new(eps: f64, alpha: f64, dt: f64) -> Self {
        Self {
            eps,
            alpha,
            dt,
            linear_tol: 1e-13,
            linear_max_iter: 5000,
            newton_tol: 1e-10,
            newton_max_iter: 50,
            direct: false,
        }
    }

    /// dt^2 (1 - alpha eps^2), the eps-scaled elliptic coefficient.
    pub fn elliptic_coeff(&self) -> f64 {
        self.dt * self.dt * (1.0 - self.alpha * self.eps * self.eps)
    }
}

/// Iteration counters reported per pressure solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct PressureStats {
    pub newton_iters: usize,
    pub linear_iters: usize,
    pub residual: f64,
}

const DENSE_LIMIT: usize = 64 * 64;

/// Which boundary side a ghost position belongs to.
fn ghost_side(grid: &StructuredGrid, i: isize, j: isize) -> usize {
    if i < 0 {
        0
    } else if i >= grid.nx as isize {
        1
    } else if j < 0 {
        2
    } else {
        3
    }
}

/// Pressure value reached by the gradient expansion.
enum PRef {
    /// Interior unknown.
    Col(usize),
    /// Fixed boundary value (outlet); moves to the right-hand side.
    Dirichlet(f64),
    /// Reflected back onto the cell the gradient is evaluated at
    /// (zero-gradient ghost fill or solid mirror).
    Reflect,
}

fn p_ref(grid: &StructuredGrid, umap: &UnknownMap, ti: isize, tj: isize) -> PRef {
    if !grid.is_ghost(ti, tj) {
        return match umap.col(grid, ti, tj) {
            Some(c) => PRef::Col(c),
            None => PRef::Reflect, // solid neighbor: mirror across the face
        };
    }
    match grid.bc[ghost_side(grid, ti, tj)] {
        BoundaryTag::Periodic => {
            let w = |k: isize, n: isize| ((k % n) + n) % n;
            let (wi, wj) = (w(ti, grid.nx as isize), w(tj, grid.ny as isize));
            match umap.col(grid, wi, wj) {
                Some(c) => PRef::Col(c),
                None => PRef::Reflect,
            }
        }
        BoundaryTag::Outlet { p } => PRef::Dirichlet(p),
        _ => PRef::Reflect,
    }
}

/// How a face enters the implicit energy divergence.
enum FaceMode {
    /// No implicit flux: solid neighbor, wall, or zero-gradient boundary
    /// (the mirrored ghost contribution cancels the interior one exactly).
    Closed,
    /// Regular face; carries (cell coords for the neighbor gradient,
    /// storage id for the neighbor enthalpy).
    Open(isize, isize, usize),
    /// Imposed-momentum boundary: only the interior half of the face
    /// average responds to the pressure.
    Inlet,
    /// Imposed-pressure boundary: the ghost momentum follows the interior
    /// correction; carries the ghost enthalpy storage id.
    Outlet(usize),
}

fn face_mode(grid: &StructuredGrid, vi: isize, vj: isize) -> FaceMode {
    if !grid.is_ghost(vi, vj) {
        return if grid.is_solid(vi, vj) {
            FaceMode::Closed
        } else {
            FaceMode::Open(vi, vj, grid.id(vi, vj))
        };
    }
    match grid.bc[ghost_side(grid, vi, vj)] {
        BoundaryTag::Periodic => {
            let w = |k: isize, n: isize| ((k % n) + n) % n;
            let (wi, wj) = (w(vi, grid.nx as isize), w(vj, grid.ny as isize));
            if grid.is_solid(wi, wj) {
                FaceMode::Closed
            } else {
                // Ghost storage already holds the wrapped enthalpy.
                FaceMode::Open(wi, wj, grid.id(vi, vj))
            }
        }
        BoundaryTag::Inlet { .. } => FaceMode::Inlet,
        BoundaryTag::Outlet { .. } => FaceMode::Outlet(grid.id(vi, vj)),
        BoundaryTag::Neumann
        | BoundaryTag::SlipWall
        | BoundaryTag::IsothermalWall { .. }
        | BoundaryTag::AdiabaticWall => FaceMode::Closed,
    }
}

/// Expand `weight * G_axis(p)` at cell `at` into matrix triplets / RHS.
#[allow(clippy::too_many_arguments)]
fn add_gradient(
    trip: &mut Vec<(usize, usize, f64)>,
    rhs_bc: &mut [f64],
    row: usize,
    grid: &StructuredGrid,
    umap: &UnknownMap,
    at: (isize, isize),
    axis: usize,
    delta: f64,
    weight: f64,
) {
    let (di, dj) = if axis == 0 { (1isize, 0isize) } else { (0, 1) };
    let at_col = umap
        .col(grid, at.0, at.1)
        .expect("gradient expanded at a non-active cell");
    for (sgn, ni, nj) in [(1.0, at.0 + di, at.1 + dj), (-1.0, at.0 - di, at.1 - dj)] {
        let w = weight * sgn / (2.0 * delta);
        match p_ref(grid, umap, ni, nj) {
            PRef::Col(c) => trip.push((row, c, w)),
            PRef::Dirichlet(v) => rhs_bc[row] -= w * v,
            PRef::Reflect => trip.push((row, at_col, w)),
        }
    }
}

/// Assemble `diag_i p_i - coeff * Dv(H grad p)_i` over the active cells.
///
/// Returns the matrix and the right-hand-side contribution collected from
/// Dirichlet (outlet) pressure values, to be added to the solve RHS.
pub fn assemble_operator(
    grid: &StructuredGrid,
    umap: &UnknownMap,
    h_tot: &[f64],
    coeff: f64,
    diag: &[f64],
) -> (SparseMatrix, Vec<f64>) {
    let n = umap.n();
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(n * 9);
    let mut rhs_bc = vec![0.0; n];
    let axes = if grid.dim == 2 { 2 } else { 1 };

    for (r, &(iu, ju)) in umap.cells.iter().enumerate() {
        trip.push((r, r, diag[r]));
        let (i, j) = (iu as isize, ju as isize);
        let h_i = h_tot[grid.id(i, j)];
        for axis in 0..axes {
            let delta = if axis == 0 { grid.dx } else { grid.dy };
            let (di, dj) = if axis == 0 { (1isize, 0isize) } else { (0, 1) };
            for dir in [1isize, -1] {
                let (vi, vj) = (i + dir * di, j + dir * dj);
                // -(coeff) * (s/V) * n_out * (1/2), the face prefactor.
                let base = -coeff * dir as f64 / delta * 0.5;
                match face_mode(grid, vi, vj) {
                    FaceMode::Closed => {}
                    FaceMode::Open(wi, wj, hid_v) => {
                        add_gradient(&mut trip, &mut rhs_bc, r, grid, umap, (i, j), axis, delta, base * h_i);
                        add_gradient(
                            &mut trip,
                            &mut rhs_bc,
                            r,
                            grid,
                            umap,
                            (wi, wj),
                            axis,
                            delta,
                            base * h_tot[hid_v],
                        );
                    }
                    FaceMode::Inlet => {
                        add_gradient(&mut trip, &mut rhs_bc, r, grid, umap, (i, j), axis, delta, base * h_i);
                    }
                    FaceMode::Outlet(hid_g) => {
                        add_gradient(
                            &mut trip,
                            &mut rhs_bc,
                            r,
                            grid,
                            umap,
                            (i, j),
                            axis,
                            delta,
                            base * (h_i + h_tot[hid_g]),
                        );
                    }
                }
            }
        }
    }
    (SparseMatrix::from_triplets(n, &trip), rhs_bc)
}

/// Centered pressure gradient per active cell over the full storage layout
/// (ghosts must be filled); solid neighbors fold back onto the cell itself,
/// matching the implicit operator. Inactive entries stay zero.
pub fn pressure_gradient(
    grid: &StructuredGrid,
    p: &[f64],
    gx: &mut [f64],
    gy: &mut [f64],
) {
    gx.iter_mut().for_each(|v| *v = 0.0);
    gy.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..grid.ny as isize {
        for i in 0..grid.nx as isize {
            if grid.is_solid(i, j) {
                continue;
            }
            let id = grid.id(i, j);
            let pick = |ni: isize, nj: isize| -> f64 {
                if grid.is_solid(ni, nj) {
                    p[id]
                } else {
                    p[grid.id(ni, nj)]
                }
            };
            gx[id] = (pick(i + 1, j) - pick(i - 1, j)) / (2.0 * grid.dx);
            if grid.dim == 2 {
                gy[id] = (pick(i, j + 1) - pick(i, j - 1)) / (2.0 * grid.dy);
            }
        }
    }
}

/// Fill ghost layer 1 of the predicted momentum with the velocity-type
/// boundary transforms. Inlet ghosts impose rho_ghost^n * u_in.
pub fn fill_qstar_ghosts(
    grid: &StructuredGrid,
    cons_n: &ConsFields,
    qsx: &mut [f64],
    qsy: &mut [f64],
) {
    let nx = grid.nx as isize;
    let ny = grid.ny as isize;
    let mut fill = |gi: isize, gj: isize, si: isize, sj: isize, side: usize, horizontal: bool| {
        let g = grid.id(gi, gj);
        match grid.bc[side] {
            BoundaryTag::Periodic => {
                let w = |k: isize, n: isize| ((k % n) + n) % n;
                let s = grid.id(w(gi, nx), w(gj, ny));
                qsx[g] = qsx[s];
                qsy[g] = qsy[s];
            }
            BoundaryTag::Neumann | BoundaryTag::Outlet { .. } => {
                let s = grid.id(si, sj);
                qsx[g] = qsx[s];
                qsy[g] = qsy[s];
            }
            BoundaryTag::SlipWall
            | BoundaryTag::IsothermalWall { .. }
            | BoundaryTag::AdiabaticWall => {
                let s = grid.id(si, sj);
                if horizontal {
                    qsx[g] = -qsx[s];
                    qsy[g] = qsy[s];
                } else {
                    qsx[g] = qsx[s];
                    qsy[g] = -qsy[s];
                }
            }
            BoundaryTag::Inlet { u, v, .. } => {
                qsx[g] = cons_n.rho[g] * u;
                qsy[g] = cons_n.rho[g] * v;
            }
        }
    };
    for j in 0..ny {
        fill(-1, j, 0, j, 0, true);
        fill(nx, j, nx - 1, j, 1, true);
    }
    if grid.dim == 2 {
        for i in 0..nx {
            fill(i, -1, i, 0, 2, false);
            fill(i, ny, i, ny - 1, 3, false);
        }
    }
}

/// Right-hand side of the elliptic equation (before the eps^2 scaling):
///
///   phi_i = W^n_i - (1/2) eps^2 rho^n |u^n|^2_i + dt S_W,i
///           - dt * Dv[ (H q*)-average + energy dissipation ]_i
///
/// `qsx`/`qsy` carry the predicted momentum with ghost layer 1 filled;
/// the dissipation faces come from the explicit flux sweep.
#[allow(clippy::too_many_arguments)]
pub fn assemble_rhs_phi(
    grid: &StructuredGrid,
    umap: &UnknownMap,
    cons_n: &ConsFields,
    h_tot: &[f64],
    qsx: &[f64],
    qsy: &[f64],
    wdx: &FluxField,
    wdy: Option<&FluxField>,
    s_w: &[f64],
    dt: f64,
    eps: f64,
) -> Vec<f64> {
    let e2 = eps * eps;
    let axes = if grid.dim == 2 { 2 } else { 1 };
    let mut phi = vec![0.0; umap.n()];
    for (r, &(iu, ju)) in umap.cells.iter().enumerate() {
        let (i, j) = (iu as isize, ju as isize);
        let id = grid.id(i, j);
        let ke = 0.5 * e2 * (cons_n.qx[id] * cons_n.qx[id] + cons_n.qy[id] * cons_n.qy[id])
            / cons_n.rho[id];

        let mut div = 0.0;
        for axis in 0..axes {
            let delta = if axis == 0 { grid.dx } else { grid.dy };
            let (di, dj) = if axis == 0 { (1isize, 0isize) } else { (0, 1) };
            for dir in [1isize, -1] {
                let (vi, vj) = (i + dir * di, j + dir * dj);
                let diss = if axis == 0 {
                    // face index = lower adjacent cell + 1 on the + side
                    let fi = if dir > 0 { iu + 1 } else { iu };
                    wdx.at(fi, ju).w_diss
                } else {
                    let fj = if dir > 0 { ju + 1 } else { ju };
                    wdy.expect("y fluxes required in 2D").at(iu, fj).w_diss
                };
                let centered = if grid.is_solid(vi, vj) {
                    0.0 // mirrored state: the average of H q . n vanishes
                } else {
                    let vid = grid.id(vi, vj);
                    let (qn_i, qn_v) = if axis == 0 {
                        (qsx[id], qsx[vid])
                    } else {
                        (qsy[id], qsy[vid])
                    };
                    0.5 * (h_tot[id] * qn_i + h_tot[vid] * qn_v)
                };
                div += dir as f64 / delta * (centered + diss);
            }
        }
        phi[r] = cons_n.w[id] - ke + dt * s_w[id] - dt * div;
    }
    phi
}

fn linear_solve(
    a: &SparseMatrix,
    b: &[f64],
    x: &mut [f64],
    cfg: &PressureConfig,
) -> Result<usize> {
    if cfg.direct {
        if a.n > DENSE_LIMIT {
            return Err(SolverError::LinearSolve(format!(
                "direct solve limited to {DENSE_LIMIT} unknowns, got {}",
                a.n
            )));
        }
        let sol = dense_solve(&a.to_dense(), b)?;
        x.copy_from_slice(&sol);
        return Ok(1);
    }
    match bicgstab(a, b, x, cfg.linear_tol, cfg.linear_max_iter) {
        Ok(it) => Ok(it),
        Err(e) if a.n <= DENSE_LIMIT => {
            // Krylov breakdown on a small system: fall back to the dense
            // factorization rather than aborting the run.
            let _ = e;
            let sol = dense_solve(&a.to_dense(), b)?;
            x.copy_from_slice(&sol);
            Ok(cfg.linear_max_iter)
        }
        Err(e) => Err(e),
    }
}

/// Perfect-gas pressure solve: the elliptic equation is linear,
///
///   [eps^2/(gamma-1) I + dt^2 (1 - alpha eps^2) L_H] p = eps^2 phi + bc.
///
/// Returns the new pressure per unknown.
pub fn solve_linear_perfect_gas(
    grid: &StructuredGrid,
    umap: &UnknownMap,
    gas: &PerfectGas,
    h_tot: &[f64],
    phi: &[f64],
    p_init: &[f64],
    cfg: &PressureConfig,
) -> Result<(Vec<f64>, PressureStats)> {
    let n = umap.n();
    let e2 = cfg.eps * cfg.eps;
    let diag = vec![e2 / gas.gm1(); n];
    let (a, rhs_bc) = assemble_operator(grid, umap, h_tot, cfg.elliptic_coeff(), &diag);
    let b: Vec<f64> = (0..n).map(|r| e2 * phi[r] + rhs_bc[r]).collect();
    let mut p = p_init.to_vec();
    let linear_iters = linear_solve(&a, &b, &mut p, cfg)?;
    for (r, &v) in p.iter().enumerate() {
        if !(v > 0.0) {
            return Err(SolverError::Positivity {
                cell: r,
                what: format!("pressure {v} from implicit solve"),
            });
        }
    }
    Ok((p, PressureStats { newton_iters: 0, linear_iters, residual: 0.0 }))
}

/// General-EOS pressure solve: Newton iteration on
///
///   f1_i = eps^2 (rho_i h_i - p_i - phi_i) - dt^2 (1 - alpha eps^2) Dv(H grad p)_i
///   f2_i = rho_i - rho(p_i, h_i)
///
/// with the enthalpy increment eliminated per cell, leaving one sparse
/// system in dp per iteration. H stays frozen at time n throughout.
#[allow(clippy::too_many_arguments)]
pub fn solve_newton<E: EquationOfState>(
    grid: &StructuredGrid,
    umap: &UnknownMap,
    eos: &E,
    rho_new: &[f64],
    h_tot: &[f64],
    phi: &[f64],
    p_init: &[f64],
    h_init: &[f64],
    cfg: &PressureConfig,
) -> Result<(Vec<f64>, Vec<f64>, PressureStats)> {
    let n = umap.n();
    let e2 = cfg.eps * cfg.eps;
    let coeff = cfg.elliptic_coeff();
    let zeros = vec![0.0; n];
    let (e0, rhs_bc) = assemble_operator(grid, umap, h_tot, coeff, &zeros);

    let mut p = p_init.to_vec();
    let mut h = h_init.to_vec();
    let mut stats = PressureStats::default();
    let mut ep = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];

    for it in 0..=cfg.newton_max_iter {
        e0.mul_vec(&p, &mut ep);
        let mut norm: f64 = 0.0;
        for r in 0..n {
            f1[r] = e2 * (rho_new[r] * h[r] - p[r] - phi[r]) + ep[r] - rhs_bc[r];
            f2[r] = rho_new[r] - eos.density(p[r], h[r]);
            norm = norm.max(f1[r].abs()).max(f2[r].abs());
        }
        stats.residual = norm;
        stats.newton_iters = it;
        if norm <= cfg.newton_tol {
            return Ok((p, h, stats));
        }
        if it == cfg.newton_max_iter {
            break;
        }

        // Eliminate dh = (f2 - rho_p dp) / rho_h cell by cell; the sparse
        // system in dp is E0 plus a modified diagonal.
        let mut diag = vec![0.0; n];
        let mut b = vec![0.0; n];
        let mut rho_p = vec![0.0; n];
        let mut rho_h = vec![0.0; n];
        for r in 0..n {
            rho_p[r] = eos.drho_dp(p[r], h[r]);
            rho_h[r] = eos.drho_dh(p[r], h[r]);
            if rho_h[r] == 0.0 || !rho_h[r].is_finite() {
                return Err(SolverError::Newton(format!(
                    "drho/dh vanished at unknown {r} (p={}, h={})",
                    p[r], h[r]
                )));
            }
            diag[r] = -e2 * (1.0 + rho_new[r] * rho_p[r] / rho_h[r]);
            b[r] = -f1[r] - e2 * rho_new[r] * f2[r] / rho_h[r];
        }
        let (a, _) = assemble_operator(grid, umap, h_tot, coeff, &diag);
        let mut dp = vec![0.0; n];
        stats.linear_iters += linear_solve(&a, &b, &mut dp, cfg)?;

        // Damped update keeping (p, h) in the admissible quadrant.
        let mut scale = 1.0;
        'damp: for _ in 0..60 {
            for r in 0..n {
                let pn = p[r] + scale * dp[r];
                let hn = h[r] + scale * (f2[r] - rho_p[r] * dp[r]) / rho_h[r];
                if !(pn > 0.0 && hn > 0.0) {
                    scale *= 0.5;
                    continue 'damp;
                }
            }
            break;
        }
        for r in 0..n {
            p[r] += scale * dp[r];
            h[r] += scale * (f2[r] - rho_p[r] * dp[r]) / rho_h[r];
        }
    }
    Err(SolverError::Newton(format!(
        "no convergence in {} iterations (residual {:.3e})",
        cfg.newton_max_iter, stats.residual
    )))
}
