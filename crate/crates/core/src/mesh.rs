//! Uniform Cartesian structured grids (1D/2D) with two ghost layers,
//! boundary tagging and ghost-cell filling.

use crate::error::{Result, SolverError};
use crate::state::PrimFields;
use serde::{Deserialize, Serialize};

/// Ghost-layer width. Two layers support the 4-cell MUSCL stencil and the
/// wide (neighbor-of-neighbor) stencil of the implicit pressure operator.
pub const NG: isize = 2;

/// Boundary condition tag for one side of the domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryTag {
    Periodic,
    /// Zero-gradient extrapolation for every field.
    Neumann,
    /// u.n mirrored; scalars and tangential velocity copied. A moving wall
    /// imposes the tangential velocity through `BoundaryData::wall_speed`.
    SlipWall,
    /// Velocity and enthalpy imposed, zero-gradient pressure.
    Inlet { u: f64, v: f64, h: f64 },
    /// Pressure imposed, zero-gradient velocity and enthalpy.
    Outlet { p: f64 },
    /// Wall enthalpy imposed (Dirichlet at the face), slip velocity.
    IsothermalWall { h_wall: f64 },
    /// Zero enthalpy gradient, slip velocity.
    AdiabaticWall,
}

/// Sides in storage order: [left, right, bottom, top].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left = 0,
    Right = 1,
    Bottom = 2,
    Top = 3,
}

pub const SIDES: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

/// Time-dependent boundary data: tangential wall speed per side
/// (e.g. the lid ramp). Zero means a wall at rest / free slip.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoundaryData {
    pub wall_speed: [f64; 4],
}

/// Uniform Cartesian grid, immutable after construction.
#[derive(Debug, Clone)]
pub struct StructuredGrid {
    pub dim: usize,
    /// Interior cell counts; ny = 1 in 1D.
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    /// Coordinates of the lower-left corner of the domain.
    pub x0: f64,
    pub y0: f64,
    pub bc: [BoundaryTag; 4],
    /// Solid-cell mask over interior cells (row-major), for stepped
    /// geometries. `None` means all-fluid.
    pub mask: Option<Vec<bool>>,
}

impl StructuredGrid {
    pub fn new_1d(nx: usize, x0: f64, x1: f64, bc_left: BoundaryTag, bc_right: BoundaryTag) -> Result<Self> {
        let g = Self {
            dim: 1,
            nx,
            ny: 1,
            dx: (x1 - x0) / nx as f64,
            dy: 1.0,
            x0,
            y0: 0.0,
            bc: [bc_left, bc_right, BoundaryTag::Neumann, BoundaryTag::Neumann],
            mask: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn new_2d(
        nx: usize,
        ny: usize,
        x0: f64,
        y0: f64,
        dx: f64,
        dy: f64,
        bc: [BoundaryTag; 4],
    ) -> Result<Self> {
        let g = Self { dim: 2, nx, ny, dx, dy, x0, y0, bc, mask: None };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx == 0 || (self.dim == 2 && self.ny == 0) {
            return Err(SolverError::Config("cell counts must be positive".into()));
        }
        if !(self.dx > 0.0) || (self.dim == 2 && !(self.dy > 0.0)) {
            return Err(SolverError::Config("cell spacing must be positive".into()));
        }
        let per = |t: BoundaryTag| matches!(t, BoundaryTag::Periodic);
        if per(self.bc[0]) != per(self.bc[1]) || per(self.bc[2]) != per(self.bc[3]) {
            return Err(SolverError::Config(
                "periodic tags must come in matched opposite-side pairs".into(),
            ));
        }
        if let Some(m) = &self.mask {
            if m.len() != self.nx * self.ny {
                return Err(SolverError::Config("mask size does not match grid".into()));
            }
        }
        Ok(())
    }

    /// Ghost width along y (zero in 1D).
    #[inline]
    pub fn gy(&self) -> isize {
        if self.dim == 2 {
            NG
        } else {
            0
        }
    }

    /// Total storage width/height including ghosts.
    #[inline]
    pub fn nxt(&self) -> usize {
        self.nx + 2 * NG as usize
    }
    #[inline]
    pub fn nyt(&self) -> usize {
        self.ny + 2 * self.gy() as usize
    }

    #[inline]
    pub fn n_tot(&self) -> usize {
        self.nxt() * self.nyt()
    }

    #[inline]
    pub fn n_interior(&self) -> usize {
        self.nx * self.ny
    }

    /// Flat storage index for signed cell coordinates (ghosts allowed).
    #[inline]
    pub fn id(&self, i: isize, j: isize) -> usize {
        debug_assert!(i >= -NG && i < self.nx as isize + NG);
        debug_assert!(j >= -self.gy() && j < self.ny as isize + self.gy());
        ((j + self.gy()) as usize) * self.nxt() + (i + NG) as usize
    }

    /// Interior-unknown index in lexicographic (row-major) cell order.
    #[inline]
    pub fn interior_idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell-center coordinates.
    #[inline]
    pub fn xc(&self, i: usize) -> f64 {
        self.x0 + (i as f64 + 0.5) * self.dx
    }
    #[inline]
    pub fn yc(&self, j: usize) -> f64 {
        self.y0 + (j as f64 + 0.5) * self.dy
    }

    /// True when the (interior) cell is solid; ghosts report false.
    #[inline]
    pub fn is_solid(&self, i: isize, j: isize) -> bool {
        if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
            return false;
        }
        match &self.mask {
            Some(m) => m[j as usize * self.nx + i as usize],
            None => false,
        }
    }

    /// True when (i, j) indexes a ghost cell.
    #[inline]
    pub fn is_ghost(&self, i: isize, j: isize) -> bool {
        i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize
    }

    /// True for a cell taking part in the update (interior and fluid).
    #[inline]
    pub fn is_active(&self, i: isize, j: isize) -> bool {
        !self.is_ghost(i, j) && !self.is_solid(i, j)
    }

    /// s_f / V_i for a face with normal along the given axis (0 = x, 1 = y).
    #[inline]
    pub fn face_over_vol(&self, axis: usize) -> f64 {
        if axis == 0 {
            1.0 / self.dx
        } else {
            1.0 / self.dy
        }
    }

    pub fn cell_volume(&self) -> f64 {
        if self.dim == 2 {
            self.dx * self.dy
        } else {
            self.dx
        }
    }
}

fn dirichlet(face_value: f64, interior: f64) -> f64 {
    2.0 * face_value - interior
}

/// Populate the two ghost layers of the primitive fields per boundary tag.
///
/// The x-sides are filled first over interior rows; the y-sides are then
/// filled over the full width (including x-ghost columns) so that corner
/// ghosts are defined for the cross-derivative stencils of the viscous
/// source terms. Idempotent for fixed interior values.
pub fn fill_ghosts(grid: &StructuredGrid, prim: &mut PrimFields, bc: &BoundaryData) {
    let nx = grid.nx as isize;
    let ny = grid.ny as isize;

    // x sides (left = side 0, right = side 1), interior rows only.
    for j in 0..ny {
        for g in 1..=NG {
            fill_one(grid, prim, bc, Side::Left, -g, j, g - 1, j);
            fill_one(grid, prim, bc, Side::Right, nx - 1 + g, j, nx - g, j);
        }
    }
    if grid.dim == 2 {
        // y sides over the full width including x-ghost columns.
        for i in -NG..nx + NG {
            for g in 1..=NG {
                fill_one(grid, prim, bc, Side::Bottom, i, -g, i, g - 1);
                fill_one(grid, prim, bc, Side::Top, i, ny - 1 + g, i, ny - g);
            }
        }
    }
}

/// Copy a cell-centered scalar into the ghost layer along the same
/// source paths as `fill_ghosts`: periodic sides wrap to the opposite
/// interior cell, every other side takes the reflected interior value
/// unchanged.
pub fn fill_ghost_scalar(grid: &StructuredGrid, f: &mut [f64]) {
    let nx = grid.nx as isize;
    let ny = grid.ny as isize;
    let mut one = |side: Side, gi: isize, gj: isize, si: isize, sj: isize| {
        let horizontal = matches!(side, Side::Left | Side::Right);
        let (pi, pj) = if let BoundaryTag::Periodic = grid.bc[side as usize] {
            let w = |k: isize, n: isize| ((k % n) + n) % n;
            (
                if horizontal { w(gi, nx) } else { gi },
                if horizontal { gj } else { w(gj, ny) },
            )
        } else {
            (si, sj)
        };
        f[grid.id(gi, gj)] = f[grid.id(pi, pj)];
    };
    for j in 0..ny {
        for g in 1..=NG {
            one(Side::Left, -g, j, g - 1, j);
            one(Side::Right, nx - 1 + g, j, nx - g, j);
        }
    }
    if grid.dim == 2 {
        for i in -NG..nx + NG {
            for g in 1..=NG {
                one(Side::Bottom, i, -g, i, g - 1);
                one(Side::Top, i, ny - 1 + g, i, ny - g);
            }
        }
    }
}

/// Fill one ghost cell (gi, gj) from its reflected interior source (si, sj).
fn fill_one(
    grid: &StructuredGrid,
    prim: &mut PrimFields,
    bc: &BoundaryData,
    side: Side,
    gi: isize,
    gj: isize,
    si: isize,
    sj: isize,
) {
    let tag = grid.bc[side as usize];
    let nx = grid.nx as isize;
    let ny = grid.ny as isize;
    let horizontal = matches!(side, Side::Left | Side::Right);

    let g = grid.id(gi, gj);
    let (pi, pj) = if let BoundaryTag::Periodic = tag {
        // Wrap around the opposite side.
        let w = |k: isize, n: isize| ((k % n) + n) % n;
        (
            if horizontal { w(gi, nx) } else { gi },
            if horizontal { gj } else { w(gj, ny) },
        )
    } else {
        (si, sj)
    };
    let s = grid.id(pi, pj);

    match tag {
        BoundaryTag::Periodic | BoundaryTag::Neumann => {
            prim.p[g] = prim.p[s];
            prim.h[g] = prim.h[s];
            prim.ux[g] = prim.ux[s];
            prim.uy[g] = prim.uy[s];
        }
        BoundaryTag::SlipWall => {
            prim.p[g] = prim.p[s];
            prim.h[g] = prim.h[s];
            let wall = bc.wall_speed[side as usize];
            if horizontal {
                prim.ux[g] = -prim.ux[s];
                prim.uy[g] = if wall != 0.0 { dirichlet(wall, prim.uy[s]) } else { prim.uy[s] };
            } else {
                prim.uy[g] = -prim.uy[s];
                prim.ux[g] = if wall != 0.0 { dirichlet(wall, prim.ux[s]) } else { prim.ux[s] };
            }
        }
        BoundaryTag::Inlet { u, v, h } => {
            prim.p[g] = prim.p[s];
            prim.h[g] = h;
            prim.ux[g] = u;
            prim.uy[g] = v;
        }
        BoundaryTag::Outlet { p } => {
            prim.p[g] = p;
            prim.h[g] = prim.h[s];
            prim.ux[g] = prim.ux[s];
            prim.uy[g] = prim.uy[s];
        }
        BoundaryTag::IsothermalWall { h_wall } => {
            prim.p[g] = prim.p[s];
            prim.h[g] = dirichlet(h_wall, prim.h[s]);
            if horizontal {
                prim.ux[g] = -prim.ux[s];
                prim.uy[g] = prim.uy[s];
            } else {
                prim.uy[g] = -prim.uy[s];
                prim.ux[g] = prim.ux[s];
            }
        }
        BoundaryTag::AdiabaticWall => {
            prim.p[g] = prim.p[s];
            prim.h[g] = prim.h[s];
            if horizontal {
                prim.ux[g] = -prim.ux[s];
                prim.uy[g] = prim.uy[s];
            } else {
                prim.uy[g] = -prim.uy[s];
                prim.ux[g] = prim.ux[s];
            }
        }
    }
}
