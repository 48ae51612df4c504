//! Acceptance suite: end-to-end checks of the solver's headline claims,
//! one test per criterion. Each test prints a single PASS line with the
//! measured numbers (visible with `--nocapture`); a failure panics with
//! the offending values.

use apflow::cases::{self, CaseDefinition, InitialCondition};
use apflow::diagnostics::{
    convergence_orders, detect_recirculation, divergence_field, l1_error, local_mach,
    ConservationLedger, Region, RECIRCULATION_THRESHOLD,
};
use apflow::eos::{EquationOfState, GeneralizedEos, PerfectGas};
use apflow::mesh::{BoundaryTag, StructuredGrid};
use apflow::riemann::{self, RiemannState};
use apflow::state::CellPrim;
use apflow::stepper::{ApSolver, StepConfig};

fn air() -> PerfectGas {
    PerfectGas::new(1.4).unwrap()
}

/// Run a 1D case at `cells` with dt = dt_factor * dx^2 to `end_time` and
/// return (cell centers, pressure profile).
fn run_profile(
    base: &CaseDefinition,
    cells: usize,
    dt_factor: f64,
    end_time: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut c = base.with_resolution(cells);
    let dx = (c.x1 - c.x0) / cells as f64;
    c.dt = Some(dt_factor * dx * dx);
    c.cfl = None;
    c.end_time = end_time;
    let mut s = c.build_solver().unwrap();
    s.run_until(c.dt.unwrap(), end_time).unwrap();
    let xs: Vec<f64> = (0..cells).map(|i| s.grid.xc(i)).collect();
    let ps: Vec<f64> = (0..cells).map(|i| s.prim.p[s.grid.id(i as isize, 0)]).collect();
    (xs, ps)
}

/// Exact shock-tube pressure sampled at `xs` at time t.
fn exact_pressure(case: &CaseDefinition, xs: &[f64], t: f64) -> Vec<f64> {
    let InitialCondition::TwoState { split, left, right } = &case.init else {
        panic!("exact reference needs a two-state case");
    };
    let eos = air();
    let sol = riemann::solve(
        case.gamma,
        RiemannState { rho: eos.density(left.p, left.h), u: left.u, p: left.p },
        RiemannState { rho: eos.density(right.p, right.h), u: right.u, p: right.p },
    )
    .unwrap();
    xs.iter().map(|&x| sol.sample((x - split) / t).p).collect()
}

fn assert_within(errors: &[f64], targets: &[f64], factor: f64, label: &str) {
    for (e, t) in errors.iter().zip(targets) {
        let ratio = e / t;
        assert!(
            (1.0 / factor..=factor).contains(&ratio),
            "{label}: error {e:.4e} vs target {t:.4e} (ratio {ratio:.2}) outside {factor}x"
        );
    }
}

#[test]
fn criterion_01_colliding_pulses_convergence() {
    // Second-order scheme, alpha = 10 against oscillations, dt = 0.05 dx^2,
    // measured at the pulse-collision time t = 0.815 against a 3200-cell
    // reference of the same scheme.
    let mut base = cases::builtin("colliding_pulses").unwrap();
    base.alpha = 10.0;
    let end = 0.815;
    let (xr, pr) = run_profile(&base, 3200, 0.05, end);
    let mut errors = Vec::new();
    let mut dxs = Vec::new();
    for cells in [100usize, 200, 400] {
        let (xs, ps) = run_profile(&base, cells, 0.05, end);
        errors.push(l1_error(&xs, &ps, &xr, &pr).unwrap());
        dxs.push((base.x1 - base.x0) / cells as f64);
    }
    assert_within(&errors, &[2.61e-3, 7.94e-4, 2.55e-4], 2.0, "colliding pulses");
    let orders = convergence_orders(&dxs, &errors);
    for &o in &orders {
        assert!((1.6..=2.1).contains(&o), "order {o:.3} outside [1.6, 2.1]");
    }
    println!(
        "[PASS] criterion 1: colliding pulses L1 errors {:.3e}/{:.3e}/{:.3e}, orders {:.2}/{:.2}",
        errors[0], errors[1], errors[2], orders[0], orders[1]
    );
}

#[test]
fn criterion_02_sod_convergence_vs_exact() {
    let base = cases::builtin("sod").unwrap();
    let mut errors = Vec::new();
    let mut dxs = Vec::new();
    for cells in [100usize, 200, 400] {
        let (xs, ps) = run_profile(&base, cells, 1.0, 0.2);
        let pe = exact_pressure(&base, &xs, 0.2);
        errors.push(l1_error(&xs, &ps, &xs, &pe).unwrap());
        dxs.push(1.0 / cells as f64);
    }
    assert_within(&errors, &[1.3e-2, 6.8e-3, 3.4e-3], 1.5, "sod");
    let orders = convergence_orders(&dxs, &errors);
    for &o in &orders {
        assert!((0.8..=1.2).contains(&o), "order {o:.3} outside [0.8, 1.2]");
    }
    println!(
        "[PASS] criterion 2: Sod L1 errors {:.3e}/{:.3e}/{:.3e}, orders {:.2}/{:.2}",
        errors[0], errors[1], errors[2], orders[0], orders[1]
    );
}

#[test]
fn criterion_03_lax_convergence_and_shock_position() {
    let base = cases::builtin("lax").unwrap();
    let mut errors = Vec::new();
    let mut dxs = Vec::new();
    for cells in [100usize, 200, 400] {
        let (xs, ps) = run_profile(&base, cells, 1.0, 0.25);
        let pe = exact_pressure(&base, &xs, 0.25);
        errors.push(l1_error(&xs, &ps, &xs, &pe).unwrap());
        dxs.push(2.0 / cells as f64);
    }
    assert_within(&errors, &[1.2e-2, 6.1e-3, 3.4e-3], 1.5, "lax");
    let orders = convergence_orders(&dxs, &errors);
    for &o in &orders {
        assert!((0.8..=1.2).contains(&o), "order {o:.3} outside [0.8, 1.2]");
    }

    // Conservativity: the right shock must sit within 2 cells of the
    // exact shock position at t = 0.25 on the 100-cell grid.
    let InitialCondition::TwoState { left, right, .. } = &base.init else { unreachable!() };
    let eos = air();
    let sol = riemann::solve(
        base.gamma,
        RiemannState { rho: eos.density(left.p, left.h), u: left.u, p: left.p },
        RiemannState { rho: eos.density(right.p, right.h), u: right.u, p: right.p },
    )
    .unwrap();
    let x_exact = sol.right_shock_speed().expect("Lax has a right shock") * 0.25;
    let (xs, _) = run_profile(&base, 100, 1.0, 0.25);
    let mut c = base.with_resolution(100);
    c.dt = Some(4e-4);
    c.cfl = None;
    let mut s = c.build_solver().unwrap();
    s.run_until(4e-4, 0.25).unwrap();
    let rho: Vec<f64> = (0..100).map(|i| s.cons.rho[s.grid.id(i as isize, 0)]).collect();
    // Steepest density drop in the right half of the domain.
    let mut best = (0usize, 0.0f64);
    for i in 50..99 {
        let jump = (rho[i] - rho[i + 1]).abs();
        if jump > best.1 {
            best = (i, jump);
        }
    }
    let x_shock = 0.5 * (xs[best.0] + xs[best.0 + 1]);
    let dx = 2.0 / 100.0;
    assert!(
        (x_shock - x_exact).abs() <= 2.0 * dx,
        "shock at {x_shock:.4}, exact {x_exact:.4}, off by more than 2 cells"
    );
    println!(
        "[PASS] criterion 3: Lax L1 errors {:.3e}/{:.3e}/{:.3e}, shock at {:.3} (exact {:.3})",
        errors[0], errors[1], errors[2], x_shock, x_exact
    );
}

/// Well-prepared low-Mach state: uniform pressure and density with a
/// discretely divergence-free velocity from a stream function.
fn well_prepared(n: usize, eps: f64, alpha: f64) -> ApSolver<PerfectGas> {
    let grid = StructuredGrid::new_2d(
        n,
        n,
        0.0,
        0.0,
        1.0 / n as f64,
        1.0 / n as f64,
        [BoundaryTag::Periodic; 4],
    )
    .unwrap();
    let tau = std::f64::consts::TAU;
    let (dx, dy) = (grid.dx, grid.dy);
    let psi = move |x: f64, y: f64| (tau * x).sin() * (tau * y).sin() / tau;
    let cfg = StepConfig::new(eps, alpha);
    ApSolver::new(grid, air(), cfg, move |x, y| CellPrim {
        p: 1.0,
        h: 3.5, // rho(1, 3.5) = 1
        ux: (psi(x, y + dy) - psi(x, y - dy)) / (2.0 * dy),
        uy: -(psi(x + dx, y) - psi(x - dx, y)) / (2.0 * dx),
    })
    .unwrap()
}

#[test]
fn criterion_04_mach_independent_time_step() {
    let dts: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&e| well_prepared(32, e, 1.0).compute_dt())
        .collect();
    assert!(
        dts[0] == dts[1] && dts[1] == dts[2],
        "material dt varies with eps: {dts:?}"
    );
    let dte: Vec<f64> = [1e-2, 1e-3, 1e-4]
        .iter()
        .map(|&e| well_prepared(32, e, 1.0).compute_dt_explicit())
        .collect();
    for k in 0..2 {
        let ratio = dte[k] / dte[k + 1];
        assert!(
            (ratio / 10.0 - 1.0).abs() <= 0.05,
            "acoustic dt ratio {ratio:.3} deviates from 10 by more than 5%"
        );
    }
    println!(
        "[PASS] criterion 4: material dt = {:.4e} for all eps; acoustic dt scales with eps \
         (ratios {:.3}, {:.3})",
        dts[0],
        dte[0] / dte[1],
        dte[1] / dte[2]
    );
}

#[test]
fn criterion_05_ap_divergence_decay() {
    let max_div_after_step = |eps: f64, dt: f64| -> f64 {
        let mut s = well_prepared(32, eps, 0.0);
        s.step_with_dt(dt).unwrap();
        divergence_field(&s.grid, &s.prim)
            .iter()
            .fold(0.0f64, |m, &d| m.max(d.abs()))
    };
    // Large enough that the acoustic terms in the elliptic diagonal are
    // negligible even at eps = 1e-2, yet still well under the material
    // CFL limit (~0.028 here).
    let dt = 1e-2;
    let d1 = max_div_after_step(1e-4, dt);
    let d2 = max_div_after_step(1e-4, dt / 2.0);
    let ratio = d1 / d2;
    assert!(
        (1.6..=2.4).contains(&ratio),
        "divergence dt-ratio {ratio:.3} outside [1.6, 2.4] (d1 = {d1:.3e}, d2 = {d2:.3e})"
    );
    // Uniform bound across eps: spread at fixed dt stays within 10%.
    let divs: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|&e| max_div_after_step(e, dt)).collect();
    let lo = divs.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = divs.iter().cloned().fold(0.0f64, f64::max);
    assert!(
        (hi - lo) / lo <= 0.10,
        "divergence spread across eps exceeds 10%: {divs:?}"
    );
    println!(
        "[PASS] criterion 5: div u after one step is O(dt) (ratio {ratio:.2}), \
         eps-spread {:.1}%",
        100.0 * (hi - lo) / lo
    );
}

#[test]
fn criterion_06_conservation_1000_steps() {
    // Periodic Sod variant: the two states occupy complementary halves of
    // a periodic domain, so both discontinuities evolve and wrap.
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
    let ledger = ConservationLedger::new(&s.grid, &s.cons);
    for _ in 0..1000 {
        s.step_with_dt(1e-3).unwrap();
    }
    let (dm, de) = ledger.drift(&s.grid, &s.cons);
    assert!(dm <= 1e-10, "mass drift {dm:.3e} exceeds 1e-10");
    assert!(de <= 1e-10, "energy drift {de:.3e} exceeds 1e-10");
    println!(
        "[PASS] criterion 6: 1000-step periodic Sod, mass drift {dm:.2e}, energy drift {de:.2e}"
    );
}

#[test]
fn criterion_07_newton_linear_equivalence() {
    let init = |x: f64, _y: f64| {
        if x <= 0.5 {
            CellPrim { p: 1.0, h: 3.5, ux: 0.0, uy: 0.0 }
        } else {
            CellPrim { p: 0.1, h: 2.8, ux: 0.0, uy: 0.0 }
        }
    };
    let grid = |_| {
        StructuredGrid::new_1d(100, 0.0, 1.0, BoundaryTag::Neumann, BoundaryTag::Neumann).unwrap()
    };
    let cfg = StepConfig::new(1.0, 0.0);
    let mut lin = ApSolver::new(grid(()), air(), cfg, init).unwrap();
    let mut gen = ApSolver::new(grid(()), GeneralizedEos(air()), cfg, init).unwrap();
    let s1 = lin.step_with_dt(1e-3).unwrap();
    let s2 = gen.step_with_dt(1e-3).unwrap();
    assert!(s1.newton_iters <= 5 && s2.newton_iters <= 5, "Newton took too many iterations");
    // Field-wise relative difference: max |a - b| / max |a|.
    let mut max_rel = 0.0f64;
    for (fa, fb) in [
        (&lin.prim.p, &gen.prim.p),
        (&lin.prim.h, &gen.prim.h),
        (&lin.prim.ux, &gen.prim.ux),
    ] {
        let mut diff = 0.0f64;
        let mut scale = 0.0f64;
        for &id in lin.active_ids() {
            diff = diff.max((fa[id] - fb[id]).abs());
            scale = scale.max(fa[id].abs());
        }
        max_rel = max_rel.max(diff / scale.max(1e-300));
    }
    assert!(max_rel <= 1e-8, "Newton path deviates from linear path by {max_rel:.3e}");
    println!(
        "[PASS] criterion 7: Newton path matches linear path to {max_rel:.2e} \
         in {} iteration(s)",
        s2.newton_iters
    );
}

#[test]
fn criterion_08_lid_cavity_reduced() {
    let mut c = cases::builtin("lid_cavity").unwrap().with_resolution(32);
    c.end_time = 5.0;
    let dt = c.dt.unwrap();
    let mut s = c.build_solver().unwrap();
    while s.time < c.end_time - 1e-12 {
        s.bdata = c.boundary_data(s.time);
        s.step_with_dt(dt.min(c.end_time - s.time)).unwrap();
    }
    let mach = local_mach(&s.grid, &s.prim, &s.a2, c.eps);
    let max_mach = mach.iter().fold(0.0f64, |m, &v| m.max(v));
    assert!(max_mach < 0.1, "max local Mach {max_mach:.3e} not below 0.1");
    let rec = detect_recirculation(&s.grid, &s.prim, Region::whole(&s.grid), RECIRCULATION_THRESHOLD);
    assert!(rec.found, "no recirculation detected (max circulation {:.3e})", rec.max_circulation);
    let (cx, cy) = rec.center.unwrap();
    println!(
        "[PASS] criterion 8: lid cavity stable to t = 5, primary vortex near ({cx:.2}, {cy:.2}), \
         max local Mach {max_mach:.2e}"
    );
}

#[test]
fn criterion_09_heat_cavity_reduced() {
    let mut c = cases::builtin("heat_cavity").unwrap().with_resolution(16);
    c.cfl = Some(0.3);
    // Explicit diffusion limits the step at this resolution: the
    // conduction stability bound is dx^2 Re Pr / 4 ~ 0.023, stay well
    // below it.
    c.dt_max = Some(0.01);
    // A few thermal diffusion times (Re Pr L^2 ~ 23 scaled units) so the
    // convection cell settles.
    c.end_time = 50.0;
    let mut s = c.build_solver().unwrap();
    let mut residuals = Vec::new();
    let mut prev_p: Vec<f64> = s.prim.p.clone();
    let mut prev_u: Vec<f64> = s.prim.ux.clone();
    while s.time < c.end_time - 1e-9 {
        let dt = s.compute_dt().min(c.end_time - s.time);
        s.step_with_dt(dt).unwrap();
        let mut res = 0.0;
        for &id in s.active_ids() {
            res += (s.prim.p[id] - prev_p[id]).abs() + (s.prim.ux[id] - prev_u[id]).abs();
            prev_p[id] = s.prim.p[id];
            prev_u[id] = s.prim.ux[id];
        }
        residuals.push(res / s.active_ids().len() as f64);
    }
    let mach = local_mach(&s.grid, &s.prim, &s.a2, c.eps);
    let max_mach = mach.iter().fold(0.0f64, |m, &v| m.max(v));
    assert!(max_mach <= 1e-3, "max local Mach {max_mach:.3e} exceeds 1e-3");
    // Steady approach: the mean step-to-step change over the final tenth
    // of the run is below the mean over the preceding tenth.
    let n = residuals.len();
    let mean = |r: &[f64]| r.iter().sum::<f64>() / r.len() as f64;
    let last = mean(&residuals[n - n / 10..]);
    let before = mean(&residuals[n - 2 * (n / 10)..n - n / 10]);
    assert!(
        last < before,
        "residual not decreasing: {last:.3e} (final tenth) vs {before:.3e} (previous)"
    );
    println!(
        "[PASS] criterion 9: heat cavity stable over {n} steps, max local Mach {max_mach:.2e}, \
         residual {before:.2e} -> {last:.2e}"
    );
}

#[test]
fn criterion_10_property_spot_checks() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
    let gas = air();

    // Sound speed oracle gamma p / rho on random admissible states.
    for _ in 0..200 {
        let p: f64 = rng.gen_range(1e-2..10.0);
        let h: f64 = rng.gen_range(0.1..40.0);
        let rho = gas.density(p, h);
        let a2 = apflow::eos::sound_speed_squared(&gas, p, h, rho).unwrap();
        assert!((a2 - 1.4 * p / rho).abs() <= 1e-12 * a2);
    }

    // Minmod boundedness: |minmod(a, b)| <= min(|a|, |b|), sign-safe.
    for _ in 0..200 {
        let a: f64 = rng.gen_range(-2.0..2.0);
        let b: f64 = rng.gen_range(-2.0..2.0);
        let m = apflow::flux::minmod(a, b);
        assert!(m.abs() <= a.abs().min(b.abs()) + 1e-15);
        if a * b <= 0.0 {
            assert_eq!(m, 0.0);
        }
    }

    // Primitive/conservative round trip.
    for _ in 0..100 {
        let p: f64 = rng.gen_range(1e-2..10.0);
        let h: f64 = rng.gen_range(0.5..40.0);
        let prim = CellPrim { p, h, ux: rng.gen_range(-2.0..2.0), uy: rng.gen_range(-2.0..2.0) };
        let cons = apflow::state::conservative_from_primitive(prim, &gas, 0.3).unwrap();
        let back = apflow::state::primitive_from_conservative(cons, &gas, 0.3).unwrap();
        assert!((back.p - p).abs() <= 1e-10 * p && (back.h - h).abs() <= 1e-10 * h);
    }

    // Constant-state invariance under ghost filling and one full step.
    let grid =
        StructuredGrid::new_2d(8, 8, 0.0, 0.0, 0.125, 0.125, [BoundaryTag::SlipWall; 4]).unwrap();
    let mut s = ApSolver::new(grid, gas, StepConfig::new(1e-2, 0.0), |_, _| CellPrim {
        p: 2.0,
        h: 3.1,
        ux: 0.0,
        uy: 0.0,
    })
    .unwrap();
    s.step_with_dt(1e-3).unwrap();
    for &id in s.active_ids() {
        assert!((s.prim.p[id] - 2.0).abs() < 1e-10 && s.prim.ux[id].abs() < 1e-10);
    }
    println!("[PASS] criterion 10: EOS/flux/state/ghost property spot checks hold");
}

#[test]
fn backward_step_smoke() {
    // Half-resolution stability + recirculation check behind the step.
    let mut c = cases::builtin("backward_step").unwrap().with_resolution(55);
    c.end_time = 10.0;
    c.dt = Some(1e-3);
    let dt = c.dt.unwrap();
    let mut s = c.build_solver().unwrap();
    while s.time < c.end_time - 1e-12 {
        s.step_with_dt(dt.min(c.end_time - s.time)).unwrap();
    }
    let region = Region { x_min: 4.0, x_max: 12.0, y_min: 0.0, y_max: 2.0 };
    let rec = detect_recirculation(&s.grid, &s.prim, region, RECIRCULATION_THRESHOLD);
    assert!(
        rec.found,
        "no recirculation behind the step (max circulation {:.3e})",
        rec.max_circulation
    );
    println!(
        "[PASS] backward step: stable to t = 10, recirculation behind the step at {:?}",
        rec.center
    );
}
