//! Benchmark case registry: six built-in flows plus TOML case files.
//!
//! Case definitions are declarative (grid, boundaries, initial condition,
//! scheme parameters) and fully serializable, so every built-in can be
//! exported, edited and re-run. The 2D cases are quoted in SI units in the
//! sources; the constructors here nondimensionalize them once through
//! [`ScalingParameters`] and the definition stores scaled values only.

use crate::eos::{enthalpy_from_density, PerfectGas};
use crate::error::{Result, SolverError};
use crate::mesh::{BoundaryData, BoundaryTag, Side, StructuredGrid};
use crate::state::{CellPrim, ScalingParameters};
use crate::stepper::{ApSolver, StepConfig};
use serde::{Deserialize, Serialize};

pub const BUILTIN_NAMES: [&str; 6] = [
    "colliding_pulses",
    "sod",
    "lax",
    "backward_step",
    "lid_cavity",
    "heat_cavity",
];

/// Initial condition, evaluated at cell centers in scaled coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    /// Constant state everywhere.
    Uniform { p: f64, h: f64, ux: f64, uy: f64 },
    /// Two constant states split at x = `split` (shock tubes).
    TwoState {
        split: f64,
        left: RiemannSide,
        right: RiemannSide,
    },
    /// Two counter-running acoustic pulses on a periodic domain of
    /// half-width l: f(x) = (1/2)(1 - cos(2 pi x / l)) modulates density,
    /// pressure and velocity; enthalpy follows from the EOS at (rho, p).
    AcousticPulses {
        rho_base: f64,
        rho_amp: f64,
        p_base: f64,
        p_amp: f64,
        u_amp: f64,
    },
}

/// One side of a shock-tube initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiemannSide {
    pub p: f64,
    pub h: f64,
    pub u: f64,
}

/// A rectangular solid obstacle, in scaled coordinates; cells whose
/// centers fall inside are masked out of the computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolidRegion {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

/// A wall whose tangential speed ramps linearly from rest to `speed`
/// over `ramp_time`, then stays constant (the cavity lid).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WallMotion {
    /// 0 = left, 1 = right, 2 = bottom, 3 = top.
    pub side: usize,
    pub speed: f64,
    pub ramp_time: f64,
}

/// Declarative description of a complete run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDefinition {
    pub name: String,
    pub dim: usize,
    pub nx: usize,
    #[serde(default = "one")]
    pub ny: usize,
    pub x0: f64,
    pub x1: f64,
    #[serde(default)]
    pub y0: f64,
    #[serde(default)]
    pub y1: f64,
    pub gamma: f64,
    pub eps: f64,
    pub alpha: f64,
    #[serde(default = "two")]
    pub order: usize,
    /// Fixed time step; mutually exclusive with `cfl`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    /// Material CFL number; used when `dt` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    /// Cap on CFL-derived time steps; also the step taken from rest,
    /// where the material wave speed vanishes. Keep it below the
    /// explicit diffusive stability limit when sources are on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_max: Option<f64>,
    pub end_time: f64,
    /// Boundary tags in [left, right, bottom, top] order.
    pub bc: [BoundaryTag; 4],
    pub init: InitialCondition,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solid: Option<SolidRegion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_motion: Option<WallMotion>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reynolds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prandtl: Option<f64>,
    #[serde(default = "zero2")]
    pub body_force: [f64; 2],
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn zero2() -> [f64; 2] {
    [0.0; 2]
}

impl CaseDefinition {
    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || (self.dim == 2 && self.ny == 0) {
            return Err(SolverError::Config("cell counts must be positive".into()));
        }
        if !(self.dim == 1 || self.dim == 2) {
            return Err(SolverError::Config(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        if !(self.x1 > self.x0) || (self.dim == 2 && !(self.y1 > self.y0)) {
            return Err(SolverError::Config("domain extents must be positive".into()));
        }
        if self.dt.is_none() && self.cfl.is_none() {
            return Err(SolverError::Config("either dt or cfl must be given".into()));
        }
        if !(self.end_time > 0.0) {
            return Err(SolverError::Config("end_time must be positive".into()));
        }
        if let Some(w) = &self.wall_motion {
            if w.side > 3 || !(w.ramp_time > 0.0) {
                return Err(SolverError::Config("invalid wall_motion".into()));
            }
        }
        self.step_config().validate()?;
        self.build_grid()?;
        Ok(())
    }

    pub fn eos(&self) -> Result<PerfectGas> {
        PerfectGas::new(self.gamma)
    }

    pub fn build_grid(&self) -> Result<StructuredGrid> {
        let mut grid = if self.dim == 1 {
            StructuredGrid::new_1d(self.nx, self.x0, self.x1, self.bc[0], self.bc[1])?
        } else {
            StructuredGrid::new_2d(
                self.nx,
                self.ny,
                self.x0,
                self.y0,
                (self.x1 - self.x0) / self.nx as f64,
                (self.y1 - self.y0) / self.ny as f64,
                self.bc,
            )?
        };
        if let Some(s) = &self.solid {
            let mut mask = vec![false; self.nx * self.ny];
            for j in 0..self.ny {
                for i in 0..self.nx {
                    let (x, y) = (grid.xc(i), grid.yc(j));
                    if x > s.x_min && x < s.x_max && y > s.y_min && y < s.y_max {
                        mask[j * self.nx + i] = true;
                    }
                }
            }
            grid.mask = Some(mask);
        }
        grid.validate()?;
        Ok(grid)
    }

    pub fn step_config(&self) -> StepConfig {
        let mut cfg = StepConfig::new(self.eps, self.alpha);
        cfg.order = self.order;
        if let Some(c) = self.cfl {
            cfg.cfl = c;
        }
        if let Some(m) = self.dt_max {
            cfg.dt_max = m;
        }
        cfg.reynolds = self.reynolds;
        cfg.prandtl = self.prandtl;
        cfg.body_force = self.body_force;
        cfg
    }

    /// Initial primitive state at a cell center.
    pub fn initial_prim(&self, x: f64, _y: f64) -> Result<CellPrim> {
        let eos = self.eos()?;
        Ok(match &self.init {
            InitialCondition::Uniform { p, h, ux, uy } => CellPrim { p: *p, h: *h, ux: *ux, uy: *uy },
            InitialCondition::TwoState { split, left, right } => {
                let s = if x <= *split { left } else { right };
                CellPrim { p: s.p, h: s.h, ux: s.u, uy: 0.0 }
            }
            InitialCondition::AcousticPulses { rho_base, rho_amp, p_base, p_amp, u_amp } => {
                let l = 0.5 * (self.x1 - self.x0); // periodic half-width
                let f = 0.5 * (1.0 - (std::f64::consts::TAU * x / l).cos());
                let rho = rho_base + self.eps * rho_amp * f;
                let p = p_base + self.eps * p_amp * f;
                let u = x.signum() * u_amp * f;
                let h = enthalpy_from_density(&eos, p, rho)?;
                CellPrim { p, h, ux: u, uy: 0.0 }
            }
        })
    }

    /// Tangential wall speeds at scaled time t.
    pub fn boundary_data(&self, t: f64) -> BoundaryData {
        let mut b = BoundaryData::default();
        if let Some(w) = &self.wall_motion {
            b.wall_speed[w.side] = w.speed * (t / w.ramp_time).min(1.0);
        }
        b
    }

    /// Assemble a ready-to-step solver for this case.
    pub fn build_solver(&self) -> Result<ApSolver<PerfectGas>> {
        self.validate()?;
        let grid = self.build_grid()?;
        let eos = self.eos()?;
        // Evaluate the initializer up front so admissibility errors
        // surface as errors instead of panicking inside the closure.
        let nx = grid.nx;
        let mut cells = Vec::with_capacity(grid.n_interior());
        for j in 0..grid.ny {
            for i in 0..nx {
                cells.push(self.initial_prim(grid.xc(i), grid.yc(j))?);
            }
        }
        let dy_inv = 1.0 / grid.dy;
        let (gx0, gy0, dx) = (grid.x0, grid.y0, grid.dx);
        let mut solver = ApSolver::new(grid, eos, self.step_config(), move |x, y| {
            let i = (((x - gx0) / dx - 0.5).round() as usize).min(nx - 1);
            let j = ((y - gy0) * dy_inv - 0.5).round().max(0.0) as usize;
            cells[j * nx + i]
        })?;
        solver.bdata = self.boundary_data(0.0);
        solver.refresh();
        Ok(solver)
    }

    /// The same case at a different resolution (2D scales both axes).
    pub fn with_resolution(&self, nx: usize) -> Self {
        let mut c = self.clone();
        if self.dim == 2 && self.nx > 0 {
            c.ny = (self.ny * nx + self.nx / 2) / self.nx;
        }
        c.nx = nx;
        c
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self)
            .map_err(|e| SolverError::CaseFile(format!("serialization failed: {e}")))
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self =
            toml::from_str(s).map_err(|e| SolverError::CaseFile(format!("parse error: {e}")))?;
        c.validate()?;
        Ok(c)
    }
}

/// Load a case by built-in name or by path to a TOML case file.
pub fn load_case(name_or_path: &str) -> Result<CaseDefinition> {
    if let Some(c) = builtin(name_or_path) {
        return Ok(c);
    }
    let path = std::path::Path::new(name_or_path);
    if path.exists() {
        let text = std::fs::read_to_string(path)?;
        return CaseDefinition::from_toml_str(&text);
    }
    Err(SolverError::UnknownCase(format!(
        "unknown case '{name_or_path}' (built-ins: {})",
        BUILTIN_NAMES.join(", ")
    )))
}

/// Built-in case by name.
pub fn builtin(name: &str) -> Option<CaseDefinition> {
    match name {
        "colliding_pulses" => Some(colliding_pulses()),
        "sod" => Some(sod()),
        "lax" => Some(lax()),
        "backward_step" => Some(backward_step()),
        "lid_cavity" => Some(lid_cavity()),
        "heat_cavity" => Some(heat_cavity()),
        _ => None,
    }
}

const GAMMA_AIR: f64 = 1.4;

/// Two colliding acoustic pulses on a periodic domain [-l, l], l = 2/eps.
/// They superpose at t = 0.815 and return to the initial configuration
/// at t = 1.63, up to weak nonlinear steepening near x = +-18.5.
pub fn colliding_pulses() -> CaseDefinition {
    let eps = 1.0 / 11.0;
    let l = 2.0 / eps;
    CaseDefinition {
        name: "colliding_pulses".into(),
        dim: 1,
        nx: 220,
        ny: 1,
        x0: -l,
        x1: l,
        y0: 0.0,
        y1: 0.0,
        gamma: GAMMA_AIR,
        eps,
        alpha: 0.0,
        order: 2,
        dt: Some(1e-3),
        cfl: None,
        dt_max: None,
        end_time: 1.63,
        bc: [BoundaryTag::Periodic, BoundaryTag::Periodic, BoundaryTag::Neumann, BoundaryTag::Neumann],
        init: InitialCondition::AcousticPulses {
            rho_base: 0.995,
            rho_amp: 2.0,
            p_base: 1.0,
            p_amp: 2.0 * GAMMA_AIR,
            u_amp: 2.0 * GAMMA_AIR.sqrt(),
        },
        solid: None,
        wall_motion: None,
        reynolds: None,
        prandtl: None,
        body_force: [0.0; 2],
    }
}

pub fn sod() -> CaseDefinition {
    CaseDefinition {
        name: "sod".into(),
        dim: 1,
        nx: 100,
        ny: 1,
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 0.0,
        gamma: GAMMA_AIR,
        eps: 1.0,
        alpha: 0.0,
        order: 2,
        dt: Some(1e-3),
        cfl: None,
        dt_max: None,
        end_time: 0.2,
        bc: [BoundaryTag::Neumann; 4],
        init: InitialCondition::TwoState {
            split: 0.5,
            left: RiemannSide { p: 1.0, h: 3.5, u: 0.0 },
            right: RiemannSide { p: 0.1, h: 2.8, u: 0.0 },
        },
        solid: None,
        wall_motion: None,
        reynolds: None,
        prandtl: None,
        body_force: [0.0; 2],
    }
}

pub fn lax() -> CaseDefinition {
    CaseDefinition {
        name: "lax".into(),
        dim: 1,
        nx: 100,
        ny: 1,
        x0: -1.0,
        x1: 1.0,
        y0: 0.0,
        y1: 0.0,
        gamma: GAMMA_AIR,
        eps: 1.0,
        alpha: 0.0,
        order: 2,
        dt: Some(1e-3),
        cfl: None,
        dt_max: None,
        end_time: 0.25,
        bc: [BoundaryTag::Neumann; 4],
        init: InitialCondition::TwoState {
            split: 0.0,
            left: RiemannSide { p: 3.528, h: 27.748, u: 0.698 },
            right: RiemannSide { p: 0.571, h: 3.3997, u: 0.0 },
        },
        solid: None,
        wall_motion: None,
        reynolds: None,
        prandtl: None,
        body_force: [0.0; 2],
    }
}

/// Specific heat of the working gas, C_p = gamma/(gamma-1) R/M.
fn cp_air() -> f64 {
    GAMMA_AIR / (GAMMA_AIR - 1.0) * 8.315 / 0.02897
}

/// Backward-facing step: a 22 m x 4 m channel with a 4 m x 2 m solid step
/// in the lower-left corner. SI data: p = 1e5 Pa, h = 3.5e4 J/kg
/// (so rho = 10 kg/m^3), inlet u = 1 m/s, nu = 1.56e-2 m^2/s,
/// lambda = 2.7e-2 W/m/K. Scaled with x_ref = 1 m, so coordinates keep
/// their SI values and eps = 0.01.
pub fn backward_step() -> CaseDefinition {
    let sc = ScalingParameters { rho0: 10.0, p0: 1e5, u0: 1.0, x0: 1.0 };
    let nu = 1.56e-2;
    let lambda = 2.7e-2;
    CaseDefinition {
        name: "backward_step".into(),
        dim: 2,
        nx: 110,
        ny: 20,
        x0: 0.0,
        x1: 22.0,
        y0: 0.0,
        y1: 4.0,
        gamma: GAMMA_AIR,
        eps: sc.epsilon(),
        alpha: 0.0,
        order: 2,
        dt: Some(sc.scale_time(5e-4)),
        cfl: None,
        dt_max: None,
        end_time: sc.scale_time(20.0),
        bc: [
            BoundaryTag::Inlet { u: 1.0, v: 0.0, h: 3.5 },
            BoundaryTag::Outlet { p: 1.0 },
            BoundaryTag::SlipWall,
            BoundaryTag::SlipWall,
        ],
        init: InitialCondition::Uniform { p: 1.0, h: 3.5, ux: 1.0, uy: 0.0 },
        solid: Some(SolidRegion { x_min: 0.0, x_max: 4.0, y_min: 0.0, y_max: 2.0 }),
        wall_motion: None,
        reynolds: Some(sc.reynolds(nu)),
        prandtl: Some(sc.prandtl(nu, cp_air(), lambda)),
        body_force: [0.0; 2],
    }
}

/// Lid-driven cavity on [0,1]^2 at 50^2 cells; the top wall accelerates
/// linearly from rest to u = 1 over the first second, then stays at 1.
pub fn lid_cavity() -> CaseDefinition {
    let sc = ScalingParameters { rho0: 10.0, p0: 1e5, u0: 1.0, x0: 1.0 };
    let nu = 2.5e-2;
    let lambda = 2.7e-2;
    CaseDefinition {
        name: "lid_cavity".into(),
        dim: 2,
        nx: 50,
        ny: 50,
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
        gamma: GAMMA_AIR,
        eps: sc.epsilon(),
        alpha: 0.0,
        order: 2,
        dt: Some(sc.scale_time(2.5e-4)),
        cfl: None,
        dt_max: None,
        end_time: sc.scale_time(20.0),
        bc: [BoundaryTag::SlipWall; 4],
        init: InitialCondition::Uniform { p: 1.0, h: 3.5, ux: 0.0, uy: 0.0 },
        solid: None,
        wall_motion: Some(WallMotion { side: Side::Top as usize, speed: 1.0, ramp_time: 1.0 }),
        reynolds: Some(sc.reynolds(nu)),
        prandtl: Some(sc.prandtl(nu, cp_air(), lambda)),
        body_force: [0.0; 2],
    }
}

/// Heat-driven cavity: natural convection in a box of side
/// L = 1.528e-3 m between an isothermal left wall at 283.15 K and right
/// wall at 263.15 K, adiabatic top/bottom, gravity as body force,
/// eps = 1e-4. SI data: p = 1e5 Pa, h = 2.9167e5 J/kg, nu = 1.619e-6,
/// lambda = 2.29e-3.
pub fn heat_cavity() -> CaseDefinition {
    let p0 = 1e5;
    let h0 = 2.9167e5;
    let rho0 = GAMMA_AIR / (GAMMA_AIR - 1.0) * p0 / h0;
    let eps = 1e-4;
    let u0 = (eps * eps * p0 / rho0).sqrt();
    let sc = ScalingParameters { rho0, p0, u0, x0: 1.528e-3 };
    let nu = 1.619e-6;
    let lambda = 2.29e-3;
    let cp = cp_air();
    CaseDefinition {
        name: "heat_cavity".into(),
        dim: 2,
        nx: 40,
        ny: 40,
        x0: 0.0,
        x1: 1.0,
        y0: 0.0,
        y1: 1.0,
        gamma: GAMMA_AIR,
        eps,
        alpha: 0.0,
        order: 2,
        dt: None,
        cfl: Some(0.002),
        // Diffusive stability at 40^2: dt < dx^2 / (4 / (Re Pr)) ~ 3.6e-3.
        dt_max: Some(3e-3),
        end_time: sc.scale_time(3.0),
        bc: [
            BoundaryTag::IsothermalWall { h_wall: sc.scale_enthalpy(cp * 283.15) },
            BoundaryTag::IsothermalWall { h_wall: sc.scale_enthalpy(cp * 263.15) },
            BoundaryTag::AdiabaticWall,
            BoundaryTag::AdiabaticWall,
        ],
        init: InitialCondition::Uniform {
            p: 1.0,
            h: sc.scale_enthalpy(h0),
            ux: 0.0,
            uy: 0.0,
        },
        solid: None,
        wall_motion: None,
        reynolds: Some(sc.reynolds(nu)),
        prandtl: Some(sc.prandtl(nu, cp, lambda)),
        body_force: [0.0, sc.scale_body_force(-9.81)],
    }
}
