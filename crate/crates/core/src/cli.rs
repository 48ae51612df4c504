//! Command-line driver: run a case, run a convergence study, compare the
//! semi-implicit scheme against the explicit baseline, export case files.
//!
//! Configuration comes from an optional TOML manifest plus flag
//! overrides; flags win. Progress goes to standard error, data to files.
//! Exit codes: 0 success, 2 configuration error, 3 solver failure.

use crate::cases::{self, CaseDefinition, InitialCondition};
use crate::diagnostics::{
    self, ConservationLedger, ErrorReport, Region, RECIRCULATION_THRESHOLD,
};
use crate::eos::EquationOfState;
use crate::error::{Result, SolverError};
use crate::output::{self, RunSummary};
use crate::riemann::{self, RiemannState};
use crate::state::PrimFields;
use crate::stepper::ApSolver;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::time::Instant;

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "APFLOW_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "apflow",
    about = "All-speed compressible flow solver (semi-implicit pressure formulation)",
    version
)]
struct Cli {
    /// Worker threads for field sweeps; 1 is the sequential reference.
    /// Results are bitwise identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one case to its end time and write snapshots + a summary.
    Run(RunArgs),
    /// Grid-convergence study against a fine or exact reference.
    Converge(ConvergeArgs),
    /// Run the same case with the semi-implicit scheme and the explicit
    /// baseline and report time steps and field differences.
    CompareExplicit(CompareArgs),
    /// Write a built-in case definition as an editable TOML file.
    ExportCase(ExportArgs),
}

/// Flag overrides shared by the verbs; every field beats the manifest.
#[derive(Args, Debug, Default, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Overrides {
    /// Cells along x (2D cases scale y proportionally).
    #[arg(long)]
    cells: Option<usize>,
    /// Fixed time step (disables the case's CFL rule).
    #[arg(long)]
    dt: Option<f64>,
    /// Material CFL number (disables the case's fixed step).
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    end_time: Option<f64>,
    /// Explicit pressure weight alpha.
    #[arg(long)]
    alpha: Option<f64>,
    /// Global Mach number.
    #[arg(long)]
    eps: Option<f64>,
    /// Spatial order (1 or 2).
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    newton_tol: Option<f64>,
}

impl Overrides {
    /// Later (flag) values shadow earlier (manifest) ones.
    fn merged_over(self, base: Overrides) -> Overrides {
        Overrides {
            cells: self.cells.or(base.cells),
            dt: self.dt.or(base.dt),
            cfl: self.cfl.or(base.cfl),
            end_time: self.end_time.or(base.end_time),
            alpha: self.alpha.or(base.alpha),
            eps: self.eps.or(base.eps),
            order: self.order.or(base.order),
            newton_tol: self.newton_tol.or(base.newton_tol),
        }
    }

    fn apply(&self, case: &CaseDefinition) -> CaseDefinition {
        let mut c = match self.cells {
            Some(n) => case.with_resolution(n),
            None => case.clone(),
        };
        if let Some(dt) = self.dt {
            c.dt = Some(dt);
            c.cfl = None;
        } else if let Some(cfl) = self.cfl {
            c.cfl = Some(cfl);
            c.dt = None;
        }
        if let Some(t) = self.end_time {
            c.end_time = t;
        }
        if let Some(a) = self.alpha {
            c.alpha = a;
        }
        if let Some(e) = self.eps {
            c.eps = e;
        }
        if let Some(o) = self.order {
            c.order = o;
        }
        c
    }
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Built-in case name or path to a case TOML file.
    #[arg(long)]
    case: Option<String>,
    /// Run manifest (TOML); flags override its entries.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Output formats: csv and/or vtk (vtk is 2D-only).
    #[arg(long, value_delimiter = ',')]
    formats: Option<Vec<String>>,
    /// Write a numbered snapshot every N steps (0 = final state only).
    #[arg(long)]
    snapshot_every: Option<usize>,
}

/// On-disk manifest mirroring the `run` flags.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RunManifest {
    case: Option<String>,
    output_dir: Option<PathBuf>,
    formats: Option<Vec<String>>,
    snapshot_every: Option<usize>,
    overrides: Overrides,
}

#[derive(Args, Debug)]
struct ConvergeArgs {
    #[arg(long)]
    case: String,
    /// Increasing resolutions to run, e.g. 100,200,400.
    #[arg(long, value_delimiter = ',', required = true)]
    resolutions: Vec<usize>,
    /// Reference: a finer cell count, or "exact" for shock tubes.
    #[arg(long, default_value = "exact")]
    reference: String,
    /// Time-step rule dt = factor * dx^2 (checks spatial order alone).
    #[arg(long, default_value_t = 1.0)]
    dt_factor: f64,
    /// Field to measure: p, rho, u or h.
    #[arg(long, default_value = "p")]
    field: String,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    case: String,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Built-in case name, or "all".
    #[arg(long)]
    case: String,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

/// Entry point for the `apflow` binary; returns the process exit code.
pub fn run_cli() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap renders help/version on stdout with success status.
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = configure_threads(n) {
            eprintln!("error: {e}");
            return 2;
        }
    }
    let outcome = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Converge(a) => cmd_converge(a),
        Command::CompareExplicit(a) => cmd_compare(a),
        Command::ExportCase(a) => cmd_export(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn exit_code_for(e: &SolverError) -> i32 {
    match e {
        SolverError::Config(_) | SolverError::UnknownCase(_) | SolverError::CaseFile(_) => 2,
        _ => 3,
    }
}

#[cfg(feature = "parallel")]
fn configure_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(SolverError::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| SolverError::Config(format!("thread pool setup failed: {e}")))
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(SolverError::Config("--threads must be at least 1".into()));
    }
    if n > 1 {
        eprintln!("note: built without the `parallel` feature; running sequentially");
    }
    Ok(())
}

fn resolve_output_dir(flag: Option<PathBuf>, manifest: Option<PathBuf>) -> Result<PathBuf> {
    let dir = flag
        .or(manifest)
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

/// Advance a case-configured solver to `end_time`, updating moving-wall
/// data each step and reporting progress on stderr. Returns the per-step
/// dt and Newton iteration histories.
fn time_loop(
    solver: &mut ApSolver<crate::eos::PerfectGas>,
    case: &CaseDefinition,
    end_time: f64,
    mut on_step: impl FnMut(&ApSolver<crate::eos::PerfectGas>, usize) -> Result<()>,
) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut dts = Vec::new();
    let mut newtons = Vec::new();
    let mut step = 0usize;
    let t_tol = 1e-12 * end_time.max(1.0);
    let started = Instant::now();
    let mut last_log = Instant::now();
    while solver.time < end_time - t_tol {
        solver.bdata = case.boundary_data(solver.time);
        let dt_nominal = match case.dt {
            Some(dt) => dt,
            None => solver.compute_dt(),
        };
        let dt = dt_nominal.min(end_time - solver.time);
        let stats = solver.step_with_dt(dt)?;
        dts.push(stats.dt);
        newtons.push(stats.newton_iters);
        step += 1;
        on_step(solver, step)?;
        if last_log.elapsed().as_secs_f64() > 5.0 {
            eprintln!(
                "  step {step}: t = {:.6} / {:.6} ({:.1}s elapsed)",
                solver.time,
                end_time,
                started.elapsed().as_secs_f64()
            );
            last_log = Instant::now();
        }
    }
    Ok((dts, newtons))
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let manifest = match &args.manifest {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str::<RunManifest>(&text)
                .map_err(|e| SolverError::Config(format!("bad manifest: {e}")))?
        }
        None => RunManifest::default(),
    };
    let case_ref = args
        .case
        .or(manifest.case)
        .ok_or_else(|| SolverError::Config("no case given (use --case or a manifest)".into()))?;
    let overrides = args.overrides.merged_over(manifest.overrides);
    let case = overrides.apply(&cases::load_case(&case_ref)?);
    case.validate()?;
    let out_dir = resolve_output_dir(args.output_dir, manifest.output_dir)?;
    let formats = args
        .formats
        .or(manifest.formats)
        .unwrap_or_else(|| vec!["csv".to_string()]);
    for f in &formats {
        if f != "csv" && f != "vtk" {
            return Err(SolverError::Config(format!("unknown output format '{f}'")));
        }
        if f == "vtk" && case.dim != 2 {
            return Err(SolverError::Config("vtk output requires a 2D case".into()));
        }
    }
    let snapshot_every = args.snapshot_every.or(manifest.snapshot_every).unwrap_or(0);

    eprintln!(
        "running case '{}': {}x{} cells, eps = {}, alpha = {}, order {}, end time {}",
        case.name, case.nx, case.ny, case.eps, case.alpha, case.order, case.end_time
    );
    let mut solver = case.build_solver()?;
    if let Some(tol) = overrides.newton_tol {
        solver.cfg.newton_tol = tol;
    }
    let ledger = ConservationLedger::new(&solver.grid, &solver.cons);
    let started = Instant::now();

    let write_fields = |solver: &ApSolver<crate::eos::PerfectGas>, stem: &str| -> Result<()> {
        for f in &formats {
            let path = out_dir.join(format!("{stem}.{f}"));
            if f == "csv" {
                output::write_csv_snapshot(&solver.grid, &solver.prim, &solver.cons, &path)?;
            } else {
                output::write_vtk_snapshot(&solver.grid, &solver.prim, &solver.cons, &path)?;
            }
        }
        Ok(())
    };

    let (dts, newtons) = time_loop(&mut solver, &case, case.end_time, |s, step| {
        if snapshot_every > 0 && step % snapshot_every == 0 {
            write_fields(s, &format!("snapshot_{step:06}"))?;
        }
        Ok(())
    })?;
    write_fields(&solver, "final")?;

    // Final diagnostics.
    let (mass_drift, energy_drift) = ledger.drift(&solver.grid, &solver.cons);
    let div = diagnostics::divergence_field(&solver.grid, &solver.prim);
    let max_divergence = div.iter().fold(0.0f64, |m, &d| m.max(d.abs()));
    let mach = diagnostics::local_mach(&solver.grid, &solver.prim, &solver.a2, solver.cfg.eps);
    let max_local_mach = mach.iter().fold(0.0f64, |m, &v| m.max(v));
    let recirculation = (case.dim == 2).then(|| {
        diagnostics::detect_recirculation(
            &solver.grid,
            &solver.prim,
            Region::whole(&solver.grid),
            RECIRCULATION_THRESHOLD,
        )
    });
    let speed: Vec<f64> = (0..solver.grid.n_tot())
        .map(|id| (solver.prim.ux[id].powi(2) + solver.prim.uy[id].powi(2)).sqrt())
        .collect();
    let steps = dts.len();
    let summary = RunSummary {
        case: case.name.clone(),
        eps: case.eps,
        alpha: case.alpha,
        order: case.order,
        cells: [case.nx, case.ny],
        steps,
        end_time: solver.time,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        dt_history: dts,
        newton_iters: newtons,
        mass_drift,
        energy_drift,
        max_divergence,
        max_local_mach,
        range_rho: output::field_range(&solver.grid, &solver.cons.rho),
        range_p: output::field_range(&solver.grid, &solver.prim.p),
        range_h: output::field_range(&solver.grid, &solver.prim.h),
        range_speed: output::field_range(&solver.grid, &speed),
        recirculation,
    };
    summary.write_json(&out_dir.join("summary.json"))?;
    eprintln!(
        "done: {} steps, max |div u| = {:.3e}, max local Mach = {:.3e}, \
         mass drift = {:.3e}, energy drift = {:.3e}",
        steps, max_divergence, max_local_mach, mass_drift, energy_drift
    );
    if let Some(r) = &summary.recirculation {
        eprintln!(
            "recirculation: {} (max circulation {:.3e})",
            if r.found { "detected" } else { "not detected" },
            r.max_circulation
        );
    }
    eprintln!("outputs in {}", out_dir.display());
    Ok(())
}

/// Interior profile of one named field along x (1D cases).
fn profile_1d(solver: &ApSolver<crate::eos::PerfectGas>, field: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let g = &solver.grid;
    let mut xs = Vec::with_capacity(g.nx);
    let mut vs = Vec::with_capacity(g.nx);
    for i in 0..g.nx {
        let id = g.id(i as isize, 0);
        xs.push(g.xc(i));
        vs.push(pick_field(&solver.prim, &solver.cons.rho, field, id)?);
    }
    Ok((xs, vs))
}

fn pick_field(prim: &PrimFields, rho: &[f64], field: &str, id: usize) -> Result<f64> {
    Ok(match field {
        "p" => prim.p[id],
        "h" => prim.h[id],
        "u" => prim.ux[id],
        "rho" => rho[id],
        _ => return Err(SolverError::Config(format!("unknown field '{field}'"))),
    })
}

/// Exact Riemann reference for a two-state case, sampled at `xs`, t.
fn exact_reference(
    case: &CaseDefinition,
    field: &str,
    xs: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    let InitialCondition::TwoState { split, left, right } = &case.init else {
        return Err(SolverError::Config(
            "exact reference is only available for two-state (shock tube) cases".into(),
        ));
    };
    let eos = case.eos()?;
    let l = RiemannState { rho: eos.density(left.p, left.h), u: left.u, p: left.p };
    let r = RiemannState { rho: eos.density(right.p, right.h), u: right.u, p: right.p };
    let sol = riemann::solve(case.gamma, l, r)?;
    xs.iter()
        .map(|&x| {
            let s = sol.sample((x - split) / t);
            Ok(match field {
                "p" => s.p,
                "u" => s.u,
                "rho" => s.rho,
                "h" => case.gamma / (case.gamma - 1.0) * s.p / s.rho,
                _ => return Err(SolverError::Config(format!("unknown field '{field}'"))),
            })
        })
        .collect()
}

fn cmd_converge(args: ConvergeArgs) -> Result<()> {
    let base = args.overrides.apply(&cases::load_case(&args.case)?);
    if base.dim != 1 {
        return Err(SolverError::Config("convergence studies support 1D cases".into()));
    }
    if args.resolutions.windows(2).any(|w| w[1] <= w[0]) || args.resolutions.is_empty() {
        return Err(SolverError::Config("resolutions must be strictly increasing".into()));
    }
    if !(args.dt_factor > 0.0) {
        return Err(SolverError::Config("dt factor must be positive".into()));
    }
    let out_dir = resolve_output_dir(args.output_dir, None)?;

    let run_at = |cells: usize| -> Result<(ApSolver<crate::eos::PerfectGas>, f64)> {
        let mut c = base.with_resolution(cells);
        let dx = (c.x1 - c.x0) / cells as f64;
        let dt = args.dt_factor * dx * dx;
        c.dt = Some(dt);
        c.cfl = None;
        eprintln!("  {cells} cells: dx = {dx:.6}, dt = {dt:.3e}");
        let mut solver = c.build_solver()?;
        time_loop(&mut solver, &c, c.end_time, |_, _| Ok(()))?;
        Ok((solver, dt))
    };

    // Reference profile.
    let exact = args.reference == "exact";
    let reference = if exact {
        None
    } else {
        let n: usize = args
            .reference
            .parse()
            .map_err(|_| SolverError::Config(format!("bad reference '{}'", args.reference)))?;
        if n <= *args.resolutions.last().unwrap() {
            return Err(SolverError::Config(
                "reference resolution must exceed every study resolution".into(),
            ));
        }
        eprintln!("computing reference at {n} cells");
        let (solver, _) = run_at(n)?;
        Some(profile_1d(&solver, &args.field)?)
    };

    let mut report = ErrorReport::new(&base.name, &args.field);
    for &cells in &args.resolutions {
        let (solver, dt) = run_at(cells)?;
        let (xs, vs) = profile_1d(&solver, &args.field)?;
        let err = match &reference {
            Some((xr, vr)) => diagnostics::l1_error(&xs, &vs, xr, vr)?,
            None => {
                let vr = exact_reference(&base, &args.field, &xs, base.end_time)?;
                diagnostics::l1_error(&xs, &vs, &xs, &vr)?
            }
        };
        let dx = (base.x1 - base.x0) / cells as f64;
        report.push(cells, dx, dt, err);
        let order = report.rows.last().unwrap().order;
        eprintln!(
            "  {cells} cells: L1 error = {err:.6e}{}",
            order.map_or(String::new(), |o| format!(", order = {o:.3}"))
        );
    }
    let path = out_dir.join("convergence.csv");
    std::fs::write(&path, report.to_csv())?;
    eprintln!("report written to {}", path.display());
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let case = args.overrides.apply(&cases::load_case(&args.case)?);
    case.validate()?;
    let out_dir = resolve_output_dir(args.output_dir, None)?;

    eprintln!("semi-implicit run of '{}'", case.name);
    let mut ap = case.build_solver()?;
    let started = Instant::now();
    let (dts, _) = time_loop(&mut ap, &case, case.end_time, |_, _| Ok(()))?;
    let dt_ap = dts.first().copied().unwrap_or(0.0);
    let ap_steps = dts.len();
    let ap_seconds = started.elapsed().as_secs_f64();

    eprintln!("explicit baseline run (acoustic CFL)");
    let mut ex = case.build_solver()?;
    let dt_explicit = ex.compute_dt_explicit();
    let started = Instant::now();
    let mut ex_steps = 0usize;
    let t_tol = 1e-12 * case.end_time.max(1.0);
    while ex.time < case.end_time - t_tol {
        ex.bdata = case.boundary_data(ex.time);
        let dt = ex.compute_dt_explicit().min(case.end_time - ex.time);
        ex.explicit_step_with_dt(dt)?;
        ex_steps += 1;
    }
    let ex_seconds = started.elapsed().as_secs_f64();

    // L1 distance between the two final pressure fields.
    let mut num = 0.0;
    let mut den = 0.0;
    for &id in ap.active_ids() {
        num += (ap.prim.p[id] - ex.prim.p[id]).abs();
        den += ex.prim.p[id].abs();
    }
    #[derive(serde::Serialize)]
    struct Comparison {
        case: String,
        eps: f64,
        dt_semi_implicit: f64,
        dt_explicit: f64,
        dt_ratio: f64,
        steps_semi_implicit: usize,
        steps_explicit: usize,
        seconds_semi_implicit: f64,
        seconds_explicit: f64,
        pressure_l1_difference: f64,
    }
    let cmp = Comparison {
        case: case.name.clone(),
        eps: case.eps,
        dt_semi_implicit: dt_ap,
        dt_explicit,
        dt_ratio: dt_ap / dt_explicit,
        steps_semi_implicit: ap_steps,
        steps_explicit: ex_steps,
        seconds_semi_implicit: ap_seconds,
        seconds_explicit: ex_seconds,
        pressure_l1_difference: num / den,
    };
    let path = out_dir.join("comparison.json");
    std::fs::write(
        &path,
        serde_json::to_string_pretty(&cmp).map_err(|e| SolverError::Io(std::io::Error::other(e)))?,
    )?;
    eprintln!(
        "dt (semi-implicit) = {dt_ap:.3e}, dt (explicit) = {dt_explicit:.3e}, \
         ratio = {:.1}; pressure L1 difference = {:.3e}",
        cmp.dt_ratio, cmp.pressure_l1_difference
    );
    eprintln!("comparison written to {}", path.display());
    Ok(())
}

fn cmd_export(args: ExportArgs) -> Result<()> {
    let out_dir = resolve_output_dir(args.output_dir, None)?;
    let names: Vec<&str> = if args.case == "all" {
        cases::BUILTIN_NAMES.to_vec()
    } else {
        vec![args.case.as_str()]
    };
    for name in names {
        let case = cases::load_case(name)?;
        let path = out_dir.join(format!("{name}.toml"));
        std::fs::write(&path, case.to_toml_string()?)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

/// Run the CLI with explicit arguments (for tests).
#[cfg(test)]
fn run_with_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| SolverError::Config(e.to_string()))?;
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Converge(a) => cmd_converge(a),
        Command::CompareExplicit(a) => cmd_compare(a),
        Command::ExportCase(a) => cmd_export(a),
    }
}
