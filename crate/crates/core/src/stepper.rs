//! Time integration: the semi-implicit (asymptotic-preserving) step and a
//! fully explicit reference step.
//!
//! One semi-implicit step:
//!   1. explicit mass update with the full Rusanov mass flux,
//!   2. explicit momentum predictor q* (convection, alpha-weighted
//!      pressure, dissipation, sources),
//!   3. implicit pressure solve (the elliptic system from the energy
//!      equation), giving p and h at the new time,
//!   4. momentum closure q = q* - dt (1 - alpha eps^2)/eps^2 grad p,
//!   5. W = rho h - p + explicit kinetic energy of the old state.
//!
//! The time step only obeys a CFL condition on the material speed
//! |u| + sqrt(alpha) a_m, so it stays bounded away from zero as eps -> 0.
//! The explicit reference step instead upwinds on |u| + a_m / eps (it is
//! the same sweep with the pressure weight 1/eps^2) and serves as the
//! acoustic-CFL baseline for comparisons.

use crate::eos::EquationOfState;
use crate::error::{Result, SolverError};
use crate::flux::{self, SweepInputs};
use crate::mesh::{self, fill_ghosts, BoundaryData, StructuredGrid, NG};
use crate::par;
use crate::pressure::{self, PressureConfig, UnknownMap};
use crate::state::{
    cons_from_prim_fields, prim_from_cons_fields, CellPrim, ConsFields, PrimFields,
};

/// Scheme parameters for a run.
#[derive(Debug, Clone, Copy)]
pub struct StepConfig {
    /// Global Mach number of the scaling.
    pub eps: f64,
    /// Explicit pressure weight in [0, 1/eps^2]; the remaining
    /// (1 - alpha eps^2)/eps^2 part is implicit.
    pub alpha: f64,
    /// Spatial order: 1 (piecewise constant) or 2 (MUSCL minmod).
    pub order: usize,
    /// Material CFL number in (0, 1].
    pub cfl: f64,
    /// Upper bound on the time step (also returned when nothing moves).
    pub dt_max: f64,
    /// Reynolds number; None disables the viscous terms.
    pub reynolds: Option<f64>,
    /// Prandtl number; with `reynolds`, enables heat conduction.
    pub prandtl: Option<f64>,
    /// Constant body force (scaled).
    pub body_force: [f64; 2],
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_tol: f64,
    pub linear_max_iter: usize,
    /// Route pressure solves through the dense factorization (small grids).
    pub direct: bool,
}

impl StepConfig {
    pub fn new(eps: f64, alpha: f64) -> Self {
        Self {
            eps,
            alpha,
            order: 2,
            cfl: 0.9,
            dt_max: f64::INFINITY,
            reynolds: None,
            prandtl: None,
            body_force: [0.0; 2],
            newton_tol: 1e-10,
            newton_max_iter: 50,
            linear_tol: 1e-13,
            linear_max_iter: 5000,
            direct: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(SolverError::Config(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.alpha >= 0.0) || self.alpha * self.eps * self.eps > 1.0 {
            return Err(SolverError::Config(format!(
                "alpha must satisfy 0 <= alpha <= 1/eps^2, got alpha = {}",
                self.alpha
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(SolverError::Config(format!("CFL must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.order == 1 || self.order == 2) {
            return Err(SolverError::Config(format!("order must be 1 or 2, got {}", self.order)));
        }
        if let Some(re) = self.reynolds {
            if !(re > 0.0) {
                return Err(SolverError::Config(format!("Reynolds number must be positive, got {re}")));
            }
        }
        if let Some(pr) = self.prandtl {
            if self.reynolds.is_none() {
                return Err(SolverError::Config("Prandtl number given without a Reynolds number".into()));
            }
            if !(pr > 0.0) {
                return Err(SolverError::Config(format!("Prandtl number must be positive, got {pr}")));
            }
        }
        Ok(())
    }

    fn pressure_cfg(&self, dt: f64) -> PressureConfig {
        let mut c = PressureConfig::new(self.eps, self.alpha, dt);
        c.linear_tol = self.linear_tol;
        c.linear_max_iter = self.linear_max_iter;
        c.newton_tol = self.newton_tol;
        c.newton_max_iter = self.newton_max_iter;
        c.direct = self.direct;
        c
    }
}

/// Per-step report.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepStats {
    pub dt: f64,
    pub max_wave_speed: f64,
    pub newton_iters: usize,
    pub linear_iters: usize,
}

/// Explicit source terms at one time level (full storage layout).
pub struct Sources {
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
    pub w: Vec<f64>,
}

/// Solver state: grid, thermodynamics, and the evolving fields.
pub struct ApSolver<E: EquationOfState> {
    pub grid: StructuredGrid,
    pub umap: UnknownMap,
    pub eos: E,
    pub cfg: StepConfig,
    pub cons: ConsFields,
    pub prim: PrimFields,
    /// Squared mixture sound speed per cell.
    pub a2: Vec<f64>,
    /// Total enthalpy H = h + (1/2) eps^2 |u|^2 per cell.
    pub h_tot: Vec<f64>,
    pub time: f64,
    /// Time-dependent wall data (e.g. lid speed); update before stepping.
    pub bdata: BoundaryData,
    /// Storage ids of the active cells, aligned with `umap` rows.
    active_ids: Vec<usize>,
    ghost_ids: Vec<usize>,
    interior_ids: Vec<usize>,
}

impl<E: EquationOfState> ApSolver<E> {
    /// Build a solver from an initial primitive state given per cell
    /// center; masked (solid) cells receive the same data and keep it.
    pub fn new(
        grid: StructuredGrid,
        eos: E,
        cfg: StepConfig,
        init: impl Fn(f64, f64) -> CellPrim,
    ) -> Result<Self> {
        cfg.validate()?;
        grid.validate()?;
        let umap = UnknownMap::build(&grid);
        let n_tot = grid.n_tot();
        let mut prim = PrimFields::zeros(n_tot);
        let mut interior_ids = Vec::with_capacity(grid.n_interior());
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let id = grid.id(i as isize, j as isize);
                let c = init(grid.xc(i), grid.yc(j));
                prim.p[id] = c.p;
                prim.h[id] = c.h;
                prim.ux[id] = c.ux;
                prim.uy[id] = c.uy;
                interior_ids.push(id);
            }
        }
        let active_ids: Vec<usize> =
            umap.cells.iter().map(|&(i, j)| grid.id(i as isize, j as isize)).collect();
        let mut ghost_ids = Vec::new();
        let gy = grid.gy();
        for j in -gy..grid.ny as isize + gy {
            for i in -NG..grid.nx as isize + NG {
                if grid.is_ghost(i, j) {
                    ghost_ids.push(grid.id(i, j));
                }
            }
        }
        let mut cons = ConsFields::zeros(n_tot);
        cons_from_prim_fields(&interior_ids, &prim, &eos, cfg.eps, &mut cons);
        let mut s = Self {
            grid,
            umap,
            eos,
            cfg,
            cons,
            prim,
            a2: vec![0.0; n_tot],
            h_tot: vec![0.0; n_tot],
            time: 0.0,
            bdata: BoundaryData::default(),
            active_ids,
            ghost_ids,
            interior_ids,
        };
        s.refresh();
        Ok(s)
    }

    /// Re-establish the derived state: ghost fills, ghost conservative
    /// values, sound speeds and total enthalpies.
    pub fn refresh(&mut self) {
        fill_ghosts(&self.grid, &mut self.prim, &self.bdata);
        cons_from_prim_fields(&self.ghost_ids, &self.prim, &self.eos, self.cfg.eps, &mut self.cons);
        // The stored total energy keeps the kinetic part of the previous
        // state, so it differs from the prim-derived value by a per-cell
        // offset. Ghost cells must carry their source cell's offset:
        // otherwise the duplicated faces of copy/mirror boundaries see a
        // spurious energy jump and the dissipation there breaks discrete
        // conservation.
        let e2w = self.cfg.eps * self.cfg.eps;
        let mut dw = vec![0.0; self.grid.n_tot()];
        for &id in &self.active_ids {
            let ke = 0.5 * e2w
                * (self.cons.qx[id] * self.cons.qx[id] + self.cons.qy[id] * self.cons.qy[id])
                / self.cons.rho[id];
            dw[id] = self.cons.w[id]
                - (ke + self.cons.rho[id] * self.prim.h[id] - self.prim.p[id]);
        }
        mesh::fill_ghost_scalar(&self.grid, &mut dw);
        for &id in &self.ghost_ids {
            self.cons.w[id] += dw[id];
        }
        flux::sound_speed_field(&self.prim, &self.cons.rho, &self.eos, &mut self.a2);
        let e2 = self.cfg.eps * self.cfg.eps;
        let prim = &self.prim;
        par::par_map_indexed(&mut self.h_tot, |id| {
            prim.h[id] + 0.5 * e2 * (prim.ux[id] * prim.ux[id] + prim.uy[id] * prim.uy[id])
        });
    }

    fn dt_from_lambda(&self, lambda: f64) -> f64 {
        let dmin = if self.grid.dim == 2 { self.grid.dx.min(self.grid.dy) } else { self.grid.dx };
        if lambda > 0.0 {
            (self.cfg.cfl * dmin / lambda).min(self.cfg.dt_max)
        } else {
            self.cfg.dt_max
        }
    }

    /// Material CFL time step of the semi-implicit scheme,
    /// dt = CFL * dx / max(|u_n| + sqrt(alpha) a_m). Independent of eps.
    pub fn compute_dt(&self) -> f64 {
        let l = flux::max_wave_speed_over_faces(&self.grid, &self.prim, &self.a2, self.cfg.alpha);
        self.dt_from_lambda(l)
    }

    /// Acoustic CFL time step of the explicit reference scheme,
    /// dt = CFL * dx / max(|u_n| + a_m / eps).
    pub fn compute_dt_explicit(&self) -> f64 {
        let ae = 1.0 / (self.cfg.eps * self.cfg.eps);
        let l = flux::max_wave_speed_over_faces(&self.grid, &self.prim, &self.a2, ae);
        self.dt_from_lambda(l)
    }

    /// Explicit sources at the current state: viscous stress divergence,
    /// heat conduction and body force.
    pub fn evaluate_sources(&self) -> Sources {
        let n_tot = self.grid.n_tot();
        let mut src =
            Sources { qx: vec![0.0; n_tot], qy: vec![0.0; n_tot], w: vec![0.0; n_tot] };
        let g = &self.grid;
        let e2 = self.cfg.eps * self.cfg.eps;

        if self.cfg.body_force != [0.0, 0.0] {
            let [fx, fy] = self.cfg.body_force;
            for &id in &self.active_ids {
                let rho = self.cons.rho[id];
                src.qx[id] += rho * fx;
                src.qy[id] += rho * fy;
                src.w[id] += e2 * rho * (fx * self.prim.ux[id] + fy * self.prim.uy[id]);
            }
        }

        if let Some(re) = self.cfg.reynolds {
            // Deviatoric stress tau = rho (grad u + grad u^T - 2/3 div u I)
            // at cell centers (interior plus one ghost layer), then its
            // centered divergence. Solid neighbors fold by the slip mirror
            // for velocities and zero-gradient for tau itself.
            let ux = &self.prim.ux;
            let uy = &self.prim.uy;
            let vel = |i: isize, j: isize, from: (isize, isize), normal_axis: usize| -> (f64, f64) {
                if g.is_solid(i, j) {
                    let fid = g.id(from.0, from.1);
                    if normal_axis == 0 {
                        (-ux[fid], uy[fid])
                    } else {
                        (ux[fid], -uy[fid])
                    }
                } else {
                    let id = g.id(i, j);
                    (ux[id], uy[id])
                }
            };
            let two_d = g.dim == 2;
            let (nx, ny) = (g.nx as isize, g.ny as isize);
            let gy = g.gy();
            let n_tau = g.n_tot();
            let mut txx = vec![0.0; n_tau];
            let mut txy = vec![0.0; n_tau];
            let mut tyy = vec![0.0; n_tau];
            for j in -gy.min(1)..ny + gy.min(1) {
                for i in -1..nx + 1 {
                    if g.is_solid(i, j) {
                        continue;
                    }
                    let id = g.id(i, j);
                    let (uxe, uye) = vel(i + 1, j, (i, j), 0);
                    let (uxw, uyw) = vel(i - 1, j, (i, j), 0);
                    let dudx = (uxe - uxw) / (2.0 * g.dx);
                    let dvdx = (uye - uyw) / (2.0 * g.dx);
                    let (dudy, dvdy) = if two_d {
                        let (uxn, uyn) = vel(i, j + 1, (i, j), 1);
                        let (uxs, uys) = vel(i, j - 1, (i, j), 1);
                        ((uxn - uxs) / (2.0 * g.dy), (uyn - uys) / (2.0 * g.dy))
                    } else {
                        (0.0, 0.0)
                    };
                    let divu = dudx + dvdy;
                    let rho = self.cons.rho[id];
                    txx[id] = rho * (2.0 * dudx - 2.0 / 3.0 * divu);
                    tyy[id] = rho * (2.0 * dvdy - 2.0 / 3.0 * divu);
                    txy[id] = rho * (dudy + dvdx);
                }
            }
            let tau_at = |t: &[f64], i: isize, j: isize, from_id: usize| -> f64 {
                if g.is_solid(i, j) {
                    t[from_id]
                } else {
                    t[g.id(i, j)]
                }
            };
            for &(iu, ju) in &self.umap.cells {
                let (i, j) = (iu as isize, ju as isize);
                let id = g.id(i, j);
                let mut sx = (tau_at(&txx, i + 1, j, id) - tau_at(&txx, i - 1, j, id))
                    / (2.0 * g.dx);
                let mut sy = (tau_at(&txy, i + 1, j, id) - tau_at(&txy, i - 1, j, id))
                    / (2.0 * g.dx);
                if two_d {
                    sx += (tau_at(&txy, i, j + 1, id) - tau_at(&txy, i, j - 1, id))
                        / (2.0 * g.dy);
                    sy += (tau_at(&tyy, i, j + 1, id) - tau_at(&tyy, i, j - 1, id))
                        / (2.0 * g.dy);
                }
                src.qx[id] += sx / re;
                src.qy[id] += sy / re;
            }

            if let Some(pr) = self.cfg.prandtl {
                // Heat conduction (1 / (Re Pr)) Laplacian(h), 5-point.
                let k = 1.0 / (re * pr);
                let h = &self.prim.h;
                let h_at = |i: isize, j: isize, from_id: usize| -> f64 {
                    if g.is_solid(i, j) {
                        h[from_id] // adiabatic fold at interior solids
                    } else {
                        h[g.id(i, j)]
                    }
                };
                for &(iu, ju) in &self.umap.cells {
                    let (i, j) = (iu as isize, ju as isize);
                    let id = g.id(i, j);
                    let mut lap = (h_at(i + 1, j, id) - 2.0 * h[id] + h_at(i - 1, j, id))
                        / (g.dx * g.dx);
                    if two_d {
                        lap += (h_at(i, j + 1, id) - 2.0 * h[id] + h_at(i, j - 1, id))
                            / (g.dy * g.dy);
                    }
                    src.w[id] += k * lap;
                }
            }
        }
        src
    }

    /// One semi-implicit step at the material CFL time step.
    pub fn step(&mut self) -> Result<StepStats> {
        let dt = self.compute_dt();
        self.step_with_dt(dt)
    }

    /// One semi-implicit step with a prescribed time step.
    pub fn step_with_dt(&mut self, dt: f64) -> Result<StepStats> {
        let eps = self.cfg.eps;
        let e2 = eps * eps;
        let g = &self.grid;
        let n_int = g.n_interior();
        let n_tot = g.n_tot();
        let n_unk = self.umap.n();

        let lambda =
            flux::max_wave_speed_over_faces(g, &self.prim, &self.a2, self.cfg.alpha);

        // Explicit sweeps and sources at time n.
        let inp = SweepInputs {
            grid: g,
            cons: &self.cons,
            prim: &self.prim,
            a2: &self.a2,
            alpha: self.cfg.alpha,
            eps,
            order: self.cfg.order,
        };
        let fx = flux::compute_face_fluxes(&inp, &self.eos, 0);
        let fy = if g.dim == 2 { Some(flux::compute_face_fluxes(&inp, &self.eos, 1)) } else { None };
        let src = self.evaluate_sources();

        // 1. Mass.
        let mut div = vec![0.0; n_int];
        flux::flux_divergence(g, &fx, fy.as_ref(), |f| f.mass, &mut div);
        let mut rho_new = vec![0.0; n_unk];
        for (r, &(i, j)) in self.umap.cells.iter().enumerate() {
            let id = self.active_ids[r];
            rho_new[r] = self.cons.rho[id] - dt * div[g.interior_idx(i, j)];
            if !(rho_new[r] > 0.0) {
                return Err(SolverError::Positivity {
                    cell: g.interior_idx(i, j),
                    what: format!("rho = {} after mass update", rho_new[r]),
                });
            }
        }

        // 2. Momentum predictor q*.
        let mut qsx = self.cons.qx.clone();
        let mut qsy = self.cons.qy.clone();
        flux::flux_divergence(g, &fx, fy.as_ref(), |f| f.mom_x, &mut div);
        for (r, &(i, j)) in self.umap.cells.iter().enumerate() {
            let id = self.active_ids[r];
            qsx[id] = self.cons.qx[id] - dt * div[g.interior_idx(i, j)] + dt * src.qx[id];
        }
        if g.dim == 2 {
            flux::flux_divergence(g, &fx, fy.as_ref(), |f| f.mom_y, &mut div);
            for (r, &(i, j)) in self.umap.cells.iter().enumerate() {
                let id = self.active_ids[r];
                qsy[id] = self.cons.qy[id] - dt * div[g.interior_idx(i, j)] + dt * src.qy[id];
            }
        }
        pressure::fill_qstar_ghosts(g, &self.cons, &mut qsx, &mut qsy);

        // 3. Implicit pressure.
        let phi = pressure::assemble_rhs_phi(
            g,
            &self.umap,
            &self.cons,
            &self.h_tot,
            &qsx,
            &qsy,
            &fx,
            fy.as_ref(),
            &src.w,
            dt,
            eps,
        );
        let p_init: Vec<f64> = self.active_ids.iter().map(|&id| self.prim.p[id]).collect();
        let pcfg = self.cfg.pressure_cfg(dt);
        let (p_new, h_new, pstats) = if let Some(gas) = self.eos.perfect_gas() {
            let (p, st) = pressure::solve_linear_perfect_gas(
                g, &self.umap, &gas, &self.h_tot, &phi, &p_init, &pcfg,
            )?;
            let h: Vec<f64> =
                (0..n_unk).map(|r| gas.enthalpy(p[r], rho_new[r])).collect();
            (p, h, st)
        } else {
            let h_init: Vec<f64> = self.active_ids.iter().map(|&id| self.prim.h[id]).collect();
            let (p, h, st) = pressure::solve_newton(
                g, &self.umap, &self.eos, &rho_new, &self.h_tot, &phi, &p_init, &h_init, &pcfg,
            )?;
            (p, h, st)
        };
        for r in 0..n_unk {
            if !(h_new[r] > 0.0) {
                let (i, j) = self.umap.cells[r];
                return Err(SolverError::Positivity {
                    cell: g.interior_idx(i, j),
                    what: format!("h = {} after pressure solve", h_new[r]),
                });
            }
        }

        // 4. Momentum closure with the implicit pressure gradient.
        let mut prim_new = self.prim.clone();
        for r in 0..n_unk {
            let id = self.active_ids[r];
            prim_new.p[id] = p_new[r];
            prim_new.h[id] = h_new[r];
        }
        fill_ghosts(g, &mut prim_new, &self.bdata);
        let mut gx = vec![0.0; n_tot];
        let mut gy = vec![0.0; n_tot];
        pressure::pressure_gradient(g, &prim_new.p, &mut gx, &mut gy);
        let c_imp = (1.0 - self.cfg.alpha * e2) / e2;

        // 5. Write back; W keeps the explicit kinetic energy of state n.
        for r in 0..n_unk {
            let id = self.active_ids[r];
            let ke_old = 0.5 * e2
                * (self.cons.qx[id] * self.cons.qx[id] + self.cons.qy[id] * self.cons.qy[id])
                / self.cons.rho[id];
            let qx1 = qsx[id] - dt * c_imp * gx[id];
            let qy1 = if g.dim == 2 { qsy[id] - dt * c_imp * gy[id] } else { 0.0 };
            self.cons.rho[id] = rho_new[r];
            self.cons.qx[id] = qx1;
            self.cons.qy[id] = qy1;
            self.cons.w[id] = rho_new[r] * h_new[r] - p_new[r] + ke_old;
            prim_new.ux[id] = qx1 / rho_new[r];
            prim_new.uy[id] = qy1 / rho_new[r];
        }
        self.prim = prim_new;
        self.refresh();
        self.time += dt;

        Ok(StepStats {
            dt,
            max_wave_speed: lambda,
            newton_iters: pstats.newton_iters,
            linear_iters: pstats.linear_iters,
        })
    }

    /// One fully explicit step at the acoustic CFL time step.
    pub fn explicit_step(&mut self) -> Result<StepStats> {
        let dt = self.compute_dt_explicit();
        self.explicit_step_with_dt(dt)
    }

    /// One fully explicit step: the same sweep with the whole pressure
    /// (weight 1/eps^2) in the flux and the acoustic wave speed.
    pub fn explicit_step_with_dt(&mut self, dt: f64) -> Result<StepStats> {
        let eps = self.cfg.eps;
        let alpha_eff = 1.0 / (eps * eps);
        let g = &self.grid;
        let n_int = g.n_interior();

        let lambda = flux::max_wave_speed_over_faces(g, &self.prim, &self.a2, alpha_eff);
        let inp = SweepInputs {
            grid: g,
            cons: &self.cons,
            prim: &self.prim,
            a2: &self.a2,
            alpha: alpha_eff,
            eps,
            order: self.cfg.order,
        };
        let fx = flux::compute_face_fluxes(&inp, &self.eos, 0);
        let fy = if g.dim == 2 { Some(flux::compute_face_fluxes(&inp, &self.eos, 1)) } else { None };
        let src = self.evaluate_sources();

        let mut div = vec![0.0; n_int];
        let apply = |field: &mut Vec<f64>,
                         pick: &(dyn Fn(&flux::FaceFlux) -> f64 + Sync),
                         s: Option<&Vec<f64>>,
                         div: &mut Vec<f64>| {
            flux::flux_divergence(g, &fx, fy.as_ref(), |f| pick(f), div);
            for &(i, j) in &self.umap.cells {
                let id = g.id(i as isize, j as isize);
                let sv = s.map_or(0.0, |s| s[id]);
                field[id] += dt * (sv - div[g.interior_idx(i, j)]);
            }
        };
        let mut rho = std::mem::take(&mut self.cons.rho);
        let mut qx = std::mem::take(&mut self.cons.qx);
        let mut qy = std::mem::take(&mut self.cons.qy);
        let mut w = std::mem::take(&mut self.cons.w);
        apply(&mut rho, &|f| f.mass, None, &mut div);
        apply(&mut qx, &|f| f.mom_x, Some(&src.qx), &mut div);
        if g.dim == 2 {
            apply(&mut qy, &|f| f.mom_y, Some(&src.qy), &mut div);
        }
        apply(&mut w, &|f| f.energy, Some(&src.w), &mut div);
        self.cons.rho = rho;
        self.cons.qx = qx;
        self.cons.qy = qy;
        self.cons.w = w;

        prim_from_cons_fields(&self.active_ids, &self.cons, &self.eos, eps, &mut self.prim)?;
        self.refresh();
        self.time += dt;
        Ok(StepStats { dt, max_wave_speed: lambda, newton_iters: 0, linear_iters: 0 })
    }

    /// Advance with fixed dt until `t_end` (last step shortened to land
    /// exactly on it). Returns the number of steps taken.
    pub fn run_until(&mut self, dt: f64, t_end: f64) -> Result<usize> {
        let mut steps = 0;
        while self.time < t_end - 1e-12 * t_end.max(1.0) {
            let d = dt.min(t_end - self.time);
            self.step_with_dt(d)?;
            steps += 1;
        }
        Ok(steps)
    }

    /// Interior ids in row-major order (convenience for output/diagnostics).
    pub fn interior_ids(&self) -> &[usize] {
        &self.interior_ids
    }

    pub fn active_ids(&self) -> &[usize] {
        &self.active_ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::{GeneralizedEos, PerfectGas};
    use crate::mesh::BoundaryTag;
    use crate::state::{total_energy, total_mass};
    use approx::assert_relative_eq;

    fn air() -> PerfectGas {
        PerfectGas::new(1.4).unwrap()
    }

    fn rest(p: f64, h: f64) -> impl Fn(f64, f64) -> CellPrim {
        move |_x, _y| CellPrim { p, h, ux: 0.0, uy: 0.0 }
    }

    #[test]
    fn constant_state_preserved_all_eps() {
        for eps in [1.0, 1e-2, 1e-4] {
            for bc in [[BoundaryTag::Periodic; 4], [BoundaryTag::SlipWall; 4]] {
                let grid = StructuredGrid::new_2d(6, 6, 0.0, 0.0, 1.0 / 6.0, 1.0 / 6.0, bc).unwrap();
                let cfg = StepConfig::new(eps, 0.0);
                let mut s = ApSolver::new(grid, air(), cfg, rest(1.2, 3.1)).unwrap();
                for _ in 0..5 {
                    s.step_with_dt(1e-3).unwrap();
                }
                for &id in s.active_ids() {
                    assert_relative_eq!(s.prim.p[id], 1.2, max_relative = 1e-10);
                    assert_relative_eq!(s.prim.h[id], 3.1, max_relative = 1e-10);
                    assert!(s.prim.ux[id].abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn constant_state_preserved_with_mask() {
        let mut grid =
            StructuredGrid::new_2d(8, 6, 0.0, 0.0, 0.125, 0.125, [BoundaryTag::SlipWall; 4])
                .unwrap();
        let mut mask = vec![false; 48];
        for j in 0..3 {
            for i in 0..2 {
                mask[j * 8 + i] = true;
            }
        }
        grid.mask = Some(mask);
        let cfg = StepConfig::new(1e-2, 0.0);
        let mut s = ApSolver::new(grid, air(), cfg, rest(1.0, 3.5)).unwrap();
        for _ in 0..5 {
            s.step_with_dt(5e-4).unwrap();
        }
        for &id in s.active_ids() {
            assert_relative_eq!(s.prim.p[id], 1.0, max_relative = 1e-10);
            assert!(s.prim.ux[id].abs() < 1e-10 && s.prim.uy[id].abs() < 1e-10);
        }
    }

    fn sod_periodic(nx: usize) -> ApSolver<PerfectGas> {
        let grid =
            StructuredGrid::new_1d(nx, 0.0, 1.0, BoundaryTag::Periodic, BoundaryTag::Periodic)
                .unwrap();
        let cfg = StepConfig::new(1.0, 0.0);
        ApSolver::new(grid, air(), cfg, |x, _| {
            if (0.25..0.75).contains(&x) {
                CellPrim { p: 1.0, h: 3.5, ux: 0.0, uy: 0.0 }
            } else {
                CellPrim { p: 0.1, h: 2.8, ux: 0.0, uy: 0.0 }
            }
        })
        .unwrap()
    }

    #[test]
    fn mass_and_energy_conserved_periodic() {
        let mut s = sod_periodic(100);
        let m0 = total_mass(&s.grid, &s.cons);
        let e0 = total_energy(&s.grid, &s.cons);
        let q0: f64 = s.active_ids().iter().map(|&id| s.cons.qx[id]).sum::<f64>() * s.grid.dx;
        for _ in 0..50 {
            s.step_with_dt(1e-3).unwrap();
        }
        let m1 = total_mass(&s.grid, &s.cons);
        let e1 = total_energy(&s.grid, &s.cons);
        let q1: f64 = s.active_ids().iter().map(|&id| s.cons.qx[id]).sum::<f64>() * s.grid.dx;
        assert!((m1 - m0).abs() / m0.abs() < 1e-12, "mass drift {}", (m1 - m0) / m0);
        assert!((e1 - e0).abs() / e0.abs() < 1e-12, "energy drift {}", (e1 - e0) / e0);
        assert!((q1 - q0).abs() < 1e-12, "momentum drift {}", q1 - q0);
    }

    #[test]
    fn material_dt_is_eps_independent() {
        // Same scaled velocity field at three Mach numbers: the material
        // time step matches bit for bit; the acoustic one scales ~ 1/eps.
        let mk = |eps: f64| {
            let grid =
                StructuredGrid::new_1d(32, 0.0, 1.0, BoundaryTag::Periodic, BoundaryTag::Periodic)
                    .unwrap();
            let mut cfg = StepConfig::new(eps, 1.0);
            cfg.cfl = 0.5;
            ApSolver::new(grid, air(), cfg, |x, _| CellPrim {
                p: 1.0,
                h: 3.5,
                ux: 0.3 * (2.0 * std::f64::consts::PI * x).sin(),
                uy: 0.0,
            })
            .unwrap()
        };
        let dts: Vec<f64> = [1.0, 1e-2, 1e-4].iter().map(|&e| mk(e).compute_dt()).collect();
        assert_eq!(dts[0], dts[1]);
        assert_eq!(dts[1], dts[2]);

        let dte: Vec<f64> = [1e-2, 1e-4].iter().map(|&e| mk(e).compute_dt_explicit()).collect();
        let ratio = dte[0] / dte[1];
        assert!((ratio / 100.0 - 1.0).abs() < 0.05, "acoustic ratio {ratio}");
    }

    #[test]
    fn newton_step_matches_linear_step() {
        let mut lin = sod_periodic(50);
        let grid =
            StructuredGrid::new_1d(50, 0.0, 1.0, BoundaryTag::Periodic, BoundaryTag::Periodic)
                .unwrap();
        let cfg = StepConfig::new(1.0, 0.0);
        let mut gen = ApSolver::new(grid, GeneralizedEos(air()), cfg, |x, _| {
            if (0.25..0.75).contains(&x) {
                CellPrim { p: 1.0, h: 3.5, ux: 0.0, uy: 0.0 }
            } else {
                CellPrim { p: 0.1, h: 2.8, ux: 0.0, uy: 0.0 }
            }
        })
        .unwrap();
        let mut max_newton = 0;
        for _ in 0..10 {
            lin.step_with_dt(1e-3).unwrap();
            let st = gen.step_with_dt(1e-3).unwrap();
            max_newton = max_newton.max(st.newton_iters);
        }
        assert!(max_newton <= 5, "Newton took {max_newton} iterations");
        for &id in lin.active_ids() {
            assert_relative_eq!(gen.prim.p[id], lin.prim.p[id], epsilon = 1e-8);
            assert_relative_eq!(gen.prim.h[id], lin.prim.h[id], epsilon = 1e-8);
            assert_relative_eq!(gen.prim.ux[id], lin.prim.ux[id], epsilon = 1e-8);
        }
    }

    #[test]
    fn gravity_source_exact() {
        let grid =
            StructuredGrid::new_2d(4, 4, 0.0, 0.0, 0.25, 0.25, [BoundaryTag::Periodic; 4]).unwrap();
        let mut cfg = StepConfig::new(0.5, 0.0);
        cfg.body_force = [0.3, -0.5];
        let s = ApSolver::new(grid, air(), cfg, |_x, _y| CellPrim {
            p: 1.0,
            h: 3.5,
            ux: 0.2,
            uy: 0.1,
        })
        .unwrap();
        let src = s.evaluate_sources();
        let id = s.active_ids()[5];
        let rho = s.cons.rho[id];
        assert_relative_eq!(src.qx[id], rho * 0.3, max_relative = 1e-14);
        assert_relative_eq!(src.qy[id], rho * -0.5, max_relative = 1e-14);
        assert_relative_eq!(
            src.w[id],
            0.25 * rho * (0.3 * 0.2 - 0.5 * 0.1),
            max_relative = 1e-13
        );
    }

    fn viscous_error(n: usize) -> f64 {
        // u = (sin 2 pi y, sin 2 pi x), rho = 1: div tau / Re has
        // x-component -(4 pi^2 / Re) sin 2 pi y and the mirrored y one.
        let grid =
            StructuredGrid::new_2d(n, n, 0.0, 0.0, 1.0 / n as f64, 1.0 / n as f64, [BoundaryTag::Periodic; 4])
                .unwrap();
        let mut cfg = StepConfig::new(1e-2, 0.0);
        cfg.reynolds = Some(2.0);
        let tau = std::f64::consts::TAU;
        let s = ApSolver::new(grid, air(), cfg, move |x, y| CellPrim {
            p: 1.0,
            h: 3.5,
            ux: (tau * y).sin(),
            uy: (tau * x).sin(),
        })
        .unwrap();
        let src = s.evaluate_sources();
        let mut err: f64 = 0.0;
        for (r, &(i, j)) in s.umap.cells.iter().enumerate() {
            let id = s.active_ids()[r];
            let y = s.grid.yc(j);
            let x = s.grid.xc(i);
            let want_x = -(tau * tau) * (tau * y).sin() / 2.0;
            let want_y = -(tau * tau) * (tau * x).sin() / 2.0;
            err = err.max((src.qx[id] - want_x).abs()).max((src.qy[id] - want_y).abs());
        }
        err
    }

    #[test]
    fn viscous_source_second_order() {
        let e32 = viscous_error(32);
        let e64 = viscous_error(64);
        // Twice-centered stencil: leading error k^4 dx^2 / (3 Re) ~ 0.063.
        assert!(e64 < 0.08, "error at n=64: {e64}");
        let ratio = e32 / e64;
        assert!((3.0..5.0).contains(&ratio), "convergence ratio {ratio}");
    }

    fn conduction_error(n: usize) -> f64 {
        let grid =
            StructuredGrid::new_1d(n, 0.0, 1.0, BoundaryTag::Periodic, BoundaryTag::Periodic)
                .unwrap();
        let mut cfg = StepConfig::new(1e-2, 0.0);
        cfg.reynolds = Some(10.0);
        cfg.prandtl = Some(0.7);
        let tau = std::f64::consts::TAU;
        let s = ApSolver::new(grid, air(), cfg, move |x, _| CellPrim {
            p: 1.0,
            h: 3.5 + 0.1 * (tau * x).sin(),
            ux: 0.0,
            uy: 0.0,
        })
        .unwrap();
        let src = s.evaluate_sources();
        let k = 1.0 / (10.0 * 0.7);
        let mut err: f64 = 0.0;
        for (r, &(i, _)) in s.umap.cells.iter().enumerate() {
            let id = s.active_ids()[r];
            let x = s.grid.xc(i);
            let want = -k * 0.1 * tau * tau * (tau * x).sin();
            err = err.max((src.w[id] - want).abs());
        }
        err
    }

    #[test]
    fn conduction_source_second_order() {
        let e32 = conduction_error(32);
        let e64 = conduction_error(64);
        let ratio = e32 / e64;
        assert!((3.0..5.0).contains(&ratio), "convergence ratio {ratio}");
    }

    #[test]
    fn explicit_step_conserves_and_runs() {
        let grid =
            StructuredGrid::new_1d(100, 0.0, 1.0, BoundaryTag::Periodic, BoundaryTag::Periodic)
                .unwrap();
        let cfg = StepConfig::new(1.0, 0.0);
        let mut s = ApSolver::new(grid, air(), cfg, |x, _| {
            if (0.25..0.75).contains(&x) {
                CellPrim { p: 1.0, h: 3.5, ux: 0.0, uy: 0.0 }
            } else {
                CellPrim { p: 0.1, h: 2.8, ux: 0.0, uy: 0.0 }
            }
        })
        .unwrap();
        let m0 = total_mass(&s.grid, &s.cons);
        let e0 = total_energy(&s.grid, &s.cons);
        for _ in 0..20 {
            s.explicit_step().unwrap();
        }
        assert!(s.time > 0.0);
        let m1 = total_mass(&s.grid, &s.cons);
        let e1 = total_energy(&s.grid, &s.cons);
        assert_relative_eq!(m1, m0, max_relative = 1e-12);
        assert_relative_eq!(e1, e0, max_relative = 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(StepConfig::new(0.0, 0.0).validate().is_err());
        assert!(StepConfig::new(1.0, 2.0).validate().is_err()); // alpha eps^2 > 1
        let mut c = StepConfig::new(0.1, 10.0);
        assert!(c.validate().is_ok());
        c.cfl = 1.5;
        assert!(c.validate().is_err());
        c.cfl = 0.9;
        c.order = 3;
        assert!(c.validate().is_err());
        c.order = 2;
        c.prandtl = Some(0.7);
        assert!(c.validate().is_err()); // Prandtl without Reynolds
    }
}
