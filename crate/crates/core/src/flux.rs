//! Explicit numerical fluxes: centered convective / alpha-pressure part,
//! Rusanov (local Lax-Friedrichs) dissipation, MUSCL minmod reconstruction
//! and the material wave speed used by the CFL condition.
//!
//! Face fluxes are computed once per face into face arrays and then
//! gathered per cell, so the per-cell residual is independent of sweep
//! order and the conservative telescoping is exact.

use crate::eos::{sound_speed_squared, EquationOfState};
use crate::mesh::StructuredGrid;
use crate::par;
use crate::state::{CellCons, CellPrim, ConsFields, PrimFields};

/// minmod(x, y) = (1/2)[sign(x) + sign(y)] min(|x|, |y|).
#[inline]
pub fn minmod(x: f64, y: f64) -> f64 {
    if x > 0.0 && y > 0.0 {
        x.min(y)
    } else if x < 0.0 && y < 0.0 {
        x.max(y)
    } else {
        0.0
    }
}

/// Flux through one face, seen with the normal pointing from the owner
/// (lower-index) cell to its neighbor. The flux seen from the neighbor is
/// the negative of this one.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FaceFlux {
    pub mass: f64,
    pub mom_x: f64,
    pub mom_y: f64,
    pub energy: f64,
    /// Dissipation part of the energy flux alone. The semi-implicit step
    /// keeps this explicit but replaces the centered part with one built
    /// around the predicted momentum.
    pub w_diss: f64,
}

/// Reconstructed left/right conservative states at a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructedPair {
    pub left: CellCons,
    pub right: CellCons,
}

#[inline]
fn comp(c: &CellCons, k: usize) -> f64 {
    match k {
        0 => c.rho,
        1 => c.qx,
        2 => c.qy,
        _ => c.w,
    }
}

#[inline]
fn set_comp(c: &mut CellCons, k: usize, v: f64) {
    match k {
        0 => c.rho = v,
        1 => c.qx = v,
        2 => c.qy = v,
        _ => c.w = v,
    }
}

/// MUSCL reconstruction of the conservative variables at the face between
/// `c0` and `c1`, using the upstream cells `cm` (behind c0) and `cp`
/// (behind c1). `limit_left`/`limit_right` force a zero slope where the
/// stencil is unavailable (solid neighbors).
pub fn reconstruct_pair(
    cm: &CellCons,
    c0: &CellCons,
    c1: &CellCons,
    cp: &CellCons,
    limit_left: bool,
    limit_right: bool,
) -> ReconstructedPair {
    let mut left = *c0;
    let mut right = *c1;
    for k in 0..4 {
        if !limit_left {
            let slope = minmod(comp(c0, k) - comp(cm, k), comp(c1, k) - comp(c0, k));
            set_comp(&mut left, k, comp(c0, k) + 0.5 * slope);
        }
        if !limit_right {
            let slope = minmod(comp(cp, k) - comp(c1, k), comp(c1, k) - comp(c0, k));
            set_comp(&mut right, k, comp(c1, k) - 0.5 * slope);
        }
    }
    ReconstructedPair { left, right }
}

/// Material wave speed of eq-of-state upwinding: the maximum over the two
/// adjacent cells of |u_n| + sqrt(alpha * a_m^2). With alpha = 0 this is
/// the fluid speed alone.
#[inline]
pub fn max_wave_speed(un_i: f64, a2_i: f64, un_v: f64, a2_v: f64, alpha: f64) -> f64 {
    let si = un_i.abs() + (alpha * a2_i).sqrt();
    let sv = un_v.abs() + (alpha * a2_v).sqrt();
    si.max(sv)
}

/// Explicit part of the face flux: centered convective terms, the
/// alpha-weighted pressure, and the Rusanov dissipation
/// -(1/2) lambda (V_R - V_L). The implicit pressure contribution
/// (1 - alpha eps^2)/eps^2 * (p_i + p_v)/2 is NOT included here; it
/// belongs to the implicit system.
pub fn explicit_face_flux(
    pair: &ReconstructedPair,
    prim_l: &CellPrim,
    prim_r: &CellPrim,
    axis: usize,
    alpha: f64,
    lambda: f64,
    eps: f64,
) -> FaceFlux {
    let l = &pair.left;
    let r = &pair.right;
    let (qn_l, qn_r) = if axis == 0 { (l.qx, r.qx) } else { (l.qy, r.qy) };

    let mass = 0.5 * (qn_l + qn_r) - 0.5 * lambda * (r.rho - l.rho);

    // Column of q (x) q / rho along the normal, plus alpha * p * n.
    let p_face = 0.5 * alpha * (prim_l.p + prim_r.p);
    let mut mom_x = 0.5 * (qn_l * prim_l.ux + qn_r * prim_r.ux) - 0.5 * lambda * (r.qx - l.qx);
    let mut mom_y = 0.5 * (qn_l * prim_l.uy + qn_r * prim_r.uy) - 0.5 * lambda * (r.qy - l.qy);
    if axis == 0 {
        mom_x += p_face;
    } else {
        mom_y += p_face;
    }

    let h_l = prim_l.total_enthalpy(eps);
    let h_r = prim_r.total_enthalpy(eps);
    let w_diss = -0.5 * lambda * (r.w - l.w);
    let energy = 0.5 * (h_l * qn_l + h_r * qn_r) + w_diss;

    FaceFlux { mass, mom_x, mom_y, energy, w_diss }
}

/// Face-flux arrays for one sweep direction.
#[derive(Debug, Clone)]
pub struct FluxField {
    pub flux: Vec<FaceFlux>,
    /// Faces per row (x-sweep: nx + 1, y-sweep: nx).
    pub stride: usize,
}

impl FluxField {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> &FaceFlux {
        &self.flux[j * self.stride + i]
    }
}

/// Per-cell thermodynamic inputs to the sweeps, including ghost cells.
pub struct SweepInputs<'a> {
    pub grid: &'a StructuredGrid,
    pub cons: &'a ConsFields,
    pub prim: &'a PrimFields,
    /// Squared mixture sound speed per cell.
    pub a2: &'a [f64],
    pub alpha: f64,
    pub eps: f64,
    pub order: usize,
}

#[inline]
fn cell_cons(cons: &ConsFields, id: usize) -> CellCons {
    CellCons { rho: cons.rho[id], qx: cons.qx[id], qy: cons.qy[id], w: cons.w[id] }
}

#[inline]
fn mirror_cons(c: &CellCons, axis: usize) -> CellCons {
    let mut m = *c;
    if axis == 0 {
        m.qx = -m.qx;
    } else {
        m.qy = -m.qy;
    }
    m
}

/// Primitive state of a reconstructed conservative state.
fn prim_of<E: EquationOfState>(c: &CellCons, eos: &E, eps: f64) -> CellPrim {
    match crate::state::primitive_from_conservative(*c, eos, eps) {
        Ok(p) => p,
        // Propagate as NaN; the positivity check after the update reports
        // the offending cell.
        Err(_) => CellPrim { p: f64::NAN, h: f64::NAN, ux: f64::NAN, uy: f64::NAN },
    }
}

/// Compute all face fluxes along one axis.
///
/// Faces are indexed by the lower adjacent cell: face `i` along x sits
/// between cells `i-1` and `i`, for `i in 0..=nx`. Wall faces against
/// solid cells use the mirrored fluid state (slip).
pub fn compute_face_fluxes<E: EquationOfState>(
    inp: &SweepInputs<'_>,
    eos: &E,
    axis: usize,
) -> FluxField {
    let g = inp.grid;
    let (nfx, nfy) = if axis == 0 { (g.nx + 1, g.ny) } else { (g.nx, g.ny + 1) };
    let stride = nfx;
    let mut flux = vec![FaceFlux::default(); nfx * nfy];
    let (di, dj) = if axis == 0 { (1isize, 0isize) } else { (0, 1) };

    par::par_map_into(&mut flux, |f| {
        let (fi, fj) = ((f % stride) as isize, (f / stride) as isize);
        // Cells adjacent to this face.
        let (i1, j1) = (fi, fj); // upper cell
        let (i0, j0) = (fi - di, fj - dj); // lower cell

        let solid0 = g.is_solid(i0, j0);
        let solid1 = g.is_solid(i1, j1);
        if solid0 && solid1 {
            return FaceFlux::default();
        }

        let c0raw = cell_cons(inp.cons, g.id(i0, j0));
        let c1raw = cell_cons(inp.cons, g.id(i1, j1));
        let c0 = if solid0 { mirror_cons(&c1raw, axis) } else { c0raw };
        let c1 = if solid1 { mirror_cons(&c0raw, axis) } else { c1raw };

        // Wave speed from the adjacent cell states (not reconstructed).
        let id0 = if solid0 { g.id(i1, j1) } else { g.id(i0, j0) };
        let id1 = if solid1 { g.id(i0, j0) } else { g.id(i1, j1) };
        let un0 = if axis == 0 { inp.prim.ux[id0] } else { inp.prim.uy[id0] };
        let un1 = if axis == 0 { inp.prim.ux[id1] } else { inp.prim.uy[id1] };
        let lambda = max_wave_speed(un0, inp.a2[id0], un1, inp.a2[id1], inp.alpha);

        let pair = if inp.order >= 2 {
            let (im, jm) = (i0 - di, j0 - dj);
            let (ip, jp) = (i1 + di, j1 + dj);
            // Degrade to first order where the 4-cell stencil is
            // unavailable (solid cells in the stencil).
            let limit_left = solid0 || g.is_solid(im, jm);
            let limit_right = solid1 || g.is_solid(ip, jp);
            let cm = if limit_left { c0 } else { cell_cons(inp.cons, g.id(im, jm)) };
            let cp = if limit_right { c1 } else { cell_cons(inp.cons, g.id(ip, jp)) };
            reconstruct_pair(&cm, &c0, &c1, &cp, limit_left, limit_right)
        } else {
            ReconstructedPair { left: c0, right: c1 }
        };

        let prim_l = prim_of(&pair.left, eos, inp.eps);
        let prim_r = prim_of(&pair.right, eos, inp.eps);
        explicit_face_flux(&pair, &prim_l, &prim_r, axis, inp.alpha, lambda, inp.eps)
    });

    FluxField { flux, stride }
}

/// Largest material wave speed over all faces (for the CFL time step).
pub fn max_wave_speed_over_faces(
    grid: &StructuredGrid,
    prim: &PrimFields,
    a2: &[f64],
    alpha: f64,
) -> f64 {
    let mut lmax: f64 = 0.0;
    let axes = if grid.dim == 2 { 2 } else { 1 };
    for axis in 0..axes {
        let (di, dj) = if axis == 0 { (1isize, 0isize) } else { (0, 1) };
        let (nfx, nfy) = if axis == 0 { (grid.nx + 1, grid.ny) } else { (grid.nx, grid.ny + 1) };
        for fj in 0..nfy as isize {
            for fi in 0..nfx as isize {
                let (i1, j1) = (fi, fj);
                let (i0, j0) = (fi - di, fj - dj);
                if grid.is_solid(i0, j0) && grid.is_solid(i1, j1) {
                    continue;
                }
                let id0 = if grid.is_solid(i0, j0) { grid.id(i1, j1) } else { grid.id(i0, j0) };
                let id1 = if grid.is_solid(i1, j1) { grid.id(i0, j0) } else { grid.id(i1, j1) };
                let un0 = if axis == 0 { prim.ux[id0] } else { prim.uy[id0] };
                let un1 = if axis == 0 { prim.ux[id1] } else { prim.uy[id1] };
                lmax = lmax.max(max_wave_speed(un0, a2[id0], un1, a2[id1], alpha));
            }
        }
    }
    lmax
}

/// Per-cell divergence of a face-flux field: (1/V) sum over the faces of
/// s * F . n_out, assembled from the shared face arrays.
pub fn flux_divergence(
    grid: &StructuredGrid,
    fx: &FluxField,
    fy: Option<&FluxField>,
    pick: impl Fn(&FaceFlux) -> f64 + Sync + Send,
    out: &mut [f64],
) {
    let nx = grid.nx;
    let inv_dx = 1.0 / grid.dx;
    let inv_dy = 1.0 / grid.dy;
    par::par_map_indexed(out, |c| {
        let (i, j) = (c % nx, c / nx);
        if grid.is_solid(i as isize, j as isize) {
            return 0.0;
        }
        let mut div = (pick(fx.at(i + 1, j)) - pick(fx.at(i, j))) * inv_dx;
        if let Some(fy) = fy {
            div += (pick(fy.at(i, j + 1)) - pick(fy.at(i, j))) * inv_dy;
        }
        div
    });
}

/// Squared sound speed per cell from the primitive fields; inadmissible
/// states yield NaN, reported by the step's validation pass.
pub fn sound_speed_field<E: EquationOfState>(
    prim: &PrimFields,
    rho: &[f64],
    eos: &E,
    a2: &mut [f64],
) {
    par::par_map_indexed(a2, |id| {
        sound_speed_squared(eos, prim.p[id], prim.h[id], rho[id]).unwrap_or(f64::NAN)
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::PerfectGas;
    use approx::assert_relative_eq;

    fn air() -> PerfectGas {
        PerfectGas::new(1.4).unwrap()
    }

    #[test]
    fn minmod_cases() {
        assert_eq!(minmod(1.0, 2.0), 1.0);
        assert_eq!(minmod(-1.0, 2.0), 0.0);
        assert_eq!(minmod(-3.0, -2.0), -2.0);
        assert_eq!(minmod(0.0, 5.0), 0.0);
    }

    fn cons(rho: f64, qx: f64, w: f64) -> CellCons {
        CellCons { rho, qx, qy: 0.0, w }
    }

    #[test]
    fn reconstruct_linear_data() {
        // V_j = j: left state at face i+1/2 is V_i + 1/2.
        let pair = reconstruct_pair(
            &cons(0.0, 0.0, 0.0),
            &cons(1.0, 1.0, 1.0),
            &cons(2.0, 2.0, 2.0),
            &cons(3.0, 3.0, 3.0),
            false,
            false,
        );
        assert_eq!(pair.left.rho, 1.5);
        assert_eq!(pair.right.rho, 1.5);
    }

    #[test]
    fn reconstruct_extremum_clips() {
        // V = (0, 1, 0): opposite one-sided slopes, so no reconstruction.
        let pair = reconstruct_pair(
            &cons(0.0, 0.0, 0.0),
            &cons(1.0, 0.0, 0.0),
            &cons(0.0, 0.0, 0.0),
            &cons(1.0, 0.0, 0.0),
            false,
            false,
        );
        assert_eq!(pair.left.rho, 1.0);
        assert_eq!(pair.right.rho, 0.0);
    }

    #[test]
    fn reconstruct_constant_data() {
        let c = cons(2.0, 0.4, 5.0);
        let pair = reconstruct_pair(&c, &c, &c, &c, false, false);
        assert_eq!(pair.left, c);
        assert_eq!(pair.right, c);
    }

    #[test]
    fn minmod_boundedness_of_reconstruction() {
        // Each reconstructed component lies between the two adjacent
        // cell averages.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..2000 {
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let pair = reconstruct_pair(
                &cons(v[0], 0.0, 0.0),
                &cons(v[1], 0.0, 0.0),
                &cons(v[2], 0.0, 0.0),
                &cons(v[3], 0.0, 0.0),
                false,
                false,
            );
            let lo = v[1].min(v[2]);
            let hi = v[1].max(v[2]);
            assert!(pair.left.rho >= lo - 1e-14 && pair.left.rho <= hi + 1e-14);
            assert!(pair.right.rho >= lo - 1e-14 && pair.right.rho <= hi + 1e-14);
        }
    }

    #[test]
    fn wave_speed_examples() {
        assert_relative_eq!(max_wave_speed(0.5, 1.44, 0.5, 1.44, 1.0), 1.7, max_relative = 1e-14);
        assert_eq!(max_wave_speed(0.3, 1.44, -0.3, 1.0, 0.0), 0.3);
        // Sod left/right at rest, alpha = 1.
        let l = max_wave_speed(0.0, 1.4, 0.0, 1.12, 1.0);
        assert_relative_eq!(l, 1.4f64.sqrt(), max_relative = 1e-14);
        assert!((l - 1.18321).abs() < 1e-5);
    }

    #[test]
    fn flux_consistency_identical_states() {
        // Single state on both sides: zero dissipation, pointwise flux.
        let g = air();
        let pr = CellPrim { p: 1.0, h: 3.5, ux: 0.4, uy: -0.2 };
        let c = crate::state::conservative_from_primitive(pr, &g, 1.0).unwrap();
        let pair = ReconstructedPair { left: c, right: c };
        let f = explicit_face_flux(&pair, &pr, &pr, 0, 1.0, 2.0, 1.0);
        assert_relative_eq!(f.mass, c.qx, max_relative = 1e-14);
        assert_relative_eq!(f.mom_x, c.qx * pr.ux + pr.p, max_relative = 1e-14);
        assert_relative_eq!(f.mom_y, c.qx * pr.uy, max_relative = 1e-14);
        let h_tot = pr.total_enthalpy(1.0);
        assert_relative_eq!(f.energy, h_tot * c.qx, max_relative = 1e-14);
    }

    #[test]
    fn dissipation_changes_sign_when_states_swapped() {
        let g = air();
        let pl = CellPrim { p: 1.0, h: 3.5, ux: 0.0, uy: 0.0 };
        let pr = CellPrim { p: 0.1, h: 2.8, ux: 0.0, uy: 0.0 };
        let cl = crate::state::conservative_from_primitive(pl, &g, 1.0).unwrap();
        let cr = crate::state::conservative_from_primitive(pr, &g, 1.0).unwrap();
        let lambda = 1.3;
        let f_lr = explicit_face_flux(
            &ReconstructedPair { left: cl, right: cr },
            &pl,
            &pr,
            0,
            0.0,
            lambda,
            1.0,
        );
        let f_rl = explicit_face_flux(
            &ReconstructedPair { left: cr, right: cl },
            &pr,
            &pl,
            0,
            0.0,
            lambda,
            1.0,
        );
        // centered parts are symmetric; dissipation flips sign
        let d_lr = f_lr.mass - 0.5 * (cl.qx + cr.qx);
        let d_rl = f_rl.mass - 0.5 * (cl.qx + cr.qx);
        assert_relative_eq!(d_lr, -d_rl, max_relative = 1e-14);
        // Sod initial face with alpha = 0: D_rho = -0.5 lambda (0.125 - 1)
        assert_relative_eq!(d_lr, -0.5 * lambda * (0.125 - 1.0), max_relative = 1e-13);
    }
}
