//! Conservative/primitive field containers, conversions through the scaled
//! energy relation W = (1/2) eps^2 rho |u|^2 + rho h - p, and
//! nondimensionalization of SI case data.

use crate::eos::EquationOfState;
use crate::error::{Result, SolverError};
use crate::par;
use serde::{Deserialize, Serialize};

/// Conservative fields (rho, q, W) over the full storage layout (ghosts
/// included). qy stays zero in 1D.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsFields {
    pub rho: Vec<f64>,
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
    pub w: Vec<f64>,
}

impl ConsFields {
    pub fn zeros(n: usize) -> Self {
        Self { rho: vec![0.0; n], qx: vec![0.0; n], qy: vec![0.0; n], w: vec![0.0; n] }
    }
    pub fn len(&self) -> usize {
        self.rho.len()
    }
    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// Primitive fields (p, h, u) over the full storage layout.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimFields {
    pub p: Vec<f64>,
    pub h: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
}

impl PrimFields {
    pub fn zeros(n: usize) -> Self {
        Self { p: vec![0.0; n], h: vec![0.0; n], ux: vec![0.0; n], uy: vec![0.0; n] }
    }
}

/// Single-cell conservative state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellCons {
    pub rho: f64,
    pub qx: f64,
    pub qy: f64,
    pub w: f64,
}

/// Single-cell primitive state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellPrim {
    pub p: f64,
    pub h: f64,
    pub ux: f64,
    pub uy: f64,
}

impl CellPrim {
    /// Total enthalpy H = h + (1/2) eps^2 |u|^2 = E + p / rho.
    #[inline]
    pub fn total_enthalpy(&self, eps: f64) -> f64 {
        self.h + 0.5 * eps * eps * (self.ux * self.ux + self.uy * self.uy)
    }
}

/// Recover (p, h, u) from (rho, q, W): u = q / rho and (p, h) solve
/// { rho h - p = W - (1/2) eps^2 |q|^2 / rho ; rho(p, h) = rho }.
///
/// EOS with a closed form (perfect gas) short-circuit the 2x2 root-find.
pub fn primitive_from_conservative<E: EquationOfState + ?Sized>(
    c: CellCons,
    eos: &E,
    eps: f64,
) -> Result<CellPrim> {
    if !(c.rho > 0.0) {
        return Err(SolverError::EosDomain(format!("non-positive density {}", c.rho)));
    }
    let ux = c.qx / c.rho;
    let uy = c.qy / c.rho;
    let rho_e = c.w - 0.5 * eps * eps * (c.qx * c.qx + c.qy * c.qy) / c.rho;
    if !(rho_e > 0.0) {
        return Err(SolverError::EosDomain(format!(
            "non-positive internal energy rho*e = {rho_e}"
        )));
    }
    if let Some((p, h)) = eos.primitive_closed_form(c.rho, rho_e) {
        return Ok(CellPrim { p, h, ux, uy });
    }
    // Generic path: p = rho h - rho_e is exact, reduce to a scalar
    // root-find in h on rho(rho h - rho_e, h) = rho.
    let mut h = (rho_e / c.rho) * 2.0; // crude but positive initial guess
    for _ in 0..100 {
        let p = c.rho * h - rho_e;
        let f = if p > 0.0 { eos.density(p, h) - c.rho } else { f64::NAN };
        if f.is_finite() && f.abs() <= 1e-13 * c.rho {
            let p = c.rho * h - rho_e;
            return Ok(CellPrim { p, h, ux, uy });
        }
        let (df, fval) = if p > 0.0 && f.is_finite() {
            (eos.drho_dp(p, h) * c.rho + eos.drho_dh(p, h), f)
        } else {
            // Outside the admissible region: push h upward.
            (1.0, -c.rho)
        };
        if df == 0.0 || !df.is_finite() {
            return Err(SolverError::RootFind("singular dh in primitive recovery".into()));
        }
        let mut step = fval / df;
        while h - step <= 0.0 || c.rho * (h - step) - rho_e <= 0.0 {
            step *= 0.5;
            if step.abs() < 1e-300 {
                break;
            }
        }
        h -= step;
    }
    Err(SolverError::RootFind("primitive recovery did not converge".into()))
}

/// Exact evaluation of W = (1/2) eps^2 rho |u|^2 + rho h - p.
pub fn conservative_from_primitive<E: EquationOfState + ?Sized>(
    pr: CellPrim,
    eos: &E,
    eps: f64,
) -> Result<CellCons> {
    let rho = eos.density_checked(pr.p, pr.h)?;
    let u2 = pr.ux * pr.ux + pr.uy * pr.uy;
    Ok(CellCons {
        rho,
        qx: rho * pr.ux,
        qy: rho * pr.uy,
        w: 0.5 * eps * eps * rho * u2 + rho * pr.h - pr.p,
    })
}

/// Field-wide conservative -> primitive conversion over `ids`.
///
/// The perfect-gas closed form runs as a parallel sweep followed by a
/// sequential validation pass that reports the first offending cell.
pub fn prim_from_cons_fields<E: EquationOfState>(
    ids: &[usize],
    cons: &ConsFields,
    eos: &E,
    eps: f64,
    prim: &mut PrimFields,
) -> Result<()> {
    let closed = eos.primitive_closed_form(1.0, 1.0).is_some();
    if closed {
        let e2 = eps * eps;
        // Full-array sweeps; stale ghost entries are overwritten by the
        // ghost fill that always follows a conversion.
        let rho_e_of = |id: usize| {
            cons.w[id]
                - 0.5 * e2 * (cons.qx[id] * cons.qx[id] + cons.qy[id] * cons.qy[id]) / cons.rho[id]
        };
        par::par_map_indexed(&mut prim.p, |id| {
            eos.primitive_closed_form(cons.rho[id], rho_e_of(id)).unwrap().0
        });
        par::par_map_indexed(&mut prim.h, |id| {
            eos.primitive_closed_form(cons.rho[id], rho_e_of(id)).unwrap().1
        });
        par::par_map_indexed(&mut prim.ux, |id| cons.qx[id] / cons.rho[id]);
        par::par_map_indexed(&mut prim.uy, |id| cons.qy[id] / cons.rho[id]);
        for (k, &id) in ids.iter().enumerate() {
            if !(cons.rho[id] > 0.0) {
                return Err(SolverError::Positivity { cell: k, what: format!("rho = {}", cons.rho[id]) });
            }
            if !(prim.p[id] > 0.0 && prim.h[id] > 0.0) {
                return Err(SolverError::Positivity {
                    cell: k,
                    what: format!("p = {}, h = {}", prim.p[id], prim.h[id]),
                });
            }
        }
        Ok(())
    } else {
        for (k, &id) in ids.iter().enumerate() {
            let c = CellCons { rho: cons.rho[id], qx: cons.qx[id], qy: cons.qy[id], w: cons.w[id] };
            let pr = primitive_from_conservative(c, eos, eps).map_err(|e| match e {
                SolverError::EosDomain(msg) => SolverError::Positivity { cell: k, what: msg },
                other => other,
            })?;
            prim.p[id] = pr.p;
            prim.h[id] = pr.h;
            prim.ux[id] = pr.ux;
            prim.uy[id] = pr.uy;
        }
        Ok(())
    }
}

/// Field-wide primitive -> conservative over `ids` (used for ghost cells).
pub fn cons_from_prim_fields<E: EquationOfState>(
    ids: &[usize],
    prim: &PrimFields,
    eos: &E,
    eps: f64,
    cons: &mut ConsFields,
) {
    let e2 = eps * eps;
    for &id in ids {
        let rho = eos.density(prim.p[id], prim.h[id]);
        let u2 = prim.ux[id] * prim.ux[id] + prim.uy[id] * prim.uy[id];
        cons.rho[id] = rho;
        cons.qx[id] = rho * prim.ux[id];
        cons.qy[id] = rho * prim.uy[id];
        cons.w[id] = 0.5 * e2 * rho * u2 + rho * prim.h[id] - prim.p[id];
    }
}

/// Reference SI values and the derived scaling numbers.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ScalingParameters {
    pub rho0: f64,
    pub p0: f64,
    pub u0: f64,
    pub x0: f64,
}

impl ScalingParameters {
    pub fn identity() -> Self {
        Self { rho0: 1.0, p0: 1.0, u0: 1.0, x0: 1.0 }
    }

    /// Global Mach number eps, eps^2 = rho0 u0^2 / p0.
    pub fn epsilon(&self) -> f64 {
        (self.rho0 * self.u0 * self.u0 / self.p0).sqrt()
    }
    pub fn reynolds(&self, nu: f64) -> f64 {
        self.u0 * self.x0 / nu
    }
    pub fn prandtl(&self, nu: f64, cp: f64, lambda: f64) -> f64 {
        self.rho0 * nu * cp / lambda
    }
    /// Time scale x0 / u0 converting SI seconds to scaled time.
    pub fn t0(&self) -> f64 {
        self.x0 / self.u0
    }

    pub fn scale_pressure(&self, p_si: f64) -> f64 {
        p_si / self.p0
    }
    pub fn scale_enthalpy(&self, h_si: f64) -> f64 {
        self.rho0 * h_si / self.p0
    }
    pub fn scale_velocity(&self, u_si: f64) -> f64 {
        u_si / self.u0
    }
    pub fn scale_density(&self, rho_si: f64) -> f64 {
        rho_si / self.rho0
    }
    pub fn scale_length(&self, x_si: f64) -> f64 {
        x_si / self.x0
    }
    pub fn scale_time(&self, t_si: f64) -> f64 {
        t_si / self.t0()
    }
    /// Body force: f appears as rho * f in the scaled momentum equation,
    /// so f_tilde = f * x0 / u0^2.
    pub fn scale_body_force(&self, f_si: f64) -> f64 {
        f_si * self.x0 / (self.u0 * self.u0)
    }
}

/// Deterministic conserved-quantity sums (fixed cell order).
pub fn total_mass(grid: &crate::mesh::StructuredGrid, cons: &ConsFields) -> f64 {
    let v = grid.cell_volume();
    let mut acc = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if !grid.is_solid(i as isize, j as isize) {
                acc += v * cons.rho[grid.id(i as isize, j as isize)];
            }
        }
    }
    acc
}

pub fn total_energy(grid: &crate::mesh::StructuredGrid, cons: &ConsFields) -> f64 {
    let v = grid.cell_volume();
    let mut acc = 0.0;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if !grid.is_solid(i as isize, j as isize) {
                acc += v * cons.w[grid.id(i as isize, j as isize)];
            }
        }
    }
    acc
}
