//! `kgmp` — vortex ground states of the Klein-Gordon-Maxwell-Proca system.
//!
//! Subcommands:
//!   check-model  hypothesis battery, admissibility certificates, route
//!   solve        ground-state solve (multi-seed capable), field dumps
//!   sweep-mu     Proca-mass continuation toward the Maxwell limit
//!   verify       invariant suite + 3D oracle cross-check
//!   fiber-scan   tabulate the fiber maps j(t), j̄(t), g(t)
//!
//! Exit codes: 0 success, 1 configuration/validation error,
//! 2 non-convergence, 3 invariant-suite failure.

mod config;
mod output;

use clap::{Parser, Subcommand};
use config::RunConfig;
use kgmp::continuation::sweep_mu;
use kgmp::functional::{nehari_fiber_value, EnergyBreakdown, NehariDiagnostics};
use kgmp::grid::{CylGrid, ScalarField};
use kgmp::model::{
    check_assumptions, energy_coefficient_certificates, Nonlinearity, PhysParams, Route,
};
use kgmp::optimizer::{
    minimize_ground_state, mountain_pass_search, seed_field, GroundState, IterRecord, SeedProfile,
    SolveOptions, WorkCounters,
};
use kgmp::oracle::{compare_energies, CartGrid3D};
use kgmp::reduction::{bound_slacks, BoundSlacks};
use kgmp::verify::{
    converged_state_checks, failures, gauge_chain_rows, mountain_pass_geometry_checks,
    projection_rows, random_probes, run_suite, InvariantResult,
};
use serde::Serialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "kgmp", version, about = "Cylindrically symmetric vortex ground states of Klein-Gordon-Maxwell-Proca systems")]
struct Cli {
    /// Flat key-value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key (repeatable), e.g. --set phys.mu=0.5
    #[arg(long = "set", global = true)]
    overrides: Vec<String>,
    /// Output directory (overrides out.dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the hypothesis report and admissibility certificates.
    CheckModel,
    /// Compute a ground state and write fields + summary.
    Solve,
    /// Continuation sweep over the Proca mass toward zero.
    SweepMu,
    /// Run the invariant suite and the 3D oracle cross-check.
    Verify,
    /// Tabulate j(t), j̄(t), g(t) along the seed fiber.
    FiberScan {
        #[arg(long, default_value_t = 0.25)]
        t_min: f64,
        #[arg(long, default_value_t = 3.0)]
        t_max: f64,
        #[arg(long, default_value_t = 24)]
        points: usize,
    },
}

#[derive(Serialize)]
struct ParamsEcho {
    m: f64,
    omega: f64,
    q: f64,
    ell: i32,
    mu: f64,
    powers: Vec<f64>,
    coeffs: Vec<f64>,
    sigma: f64,
    certificate_natural_constraint: f64,
    certificate_energy_lower_bound: f64,
}

#[derive(Serialize)]
struct GridEcho {
    nr: usize,
    nz: usize,
    r: f64,
    l: f64,
    dr: f64,
    dz: f64,
}

#[derive(Serialize)]
struct ResidualsEcho {
    u_dual_norm: f64,
    u_dual_relative: f64,
    phi_linear: f64,
    gauge_linear: f64,
    nehari_relative: f64,
    max_principle: BoundSlacks,
}

#[derive(Serialize)]
struct SeedResult {
    seed_index: usize,
    width: f64,
    z_offset: f64,
    energy: f64,
    converged: bool,
}

#[derive(Serialize)]
struct Summary {
    params: ParamsEcho,
    grid: GridEcho,
    route: String,
    energy_breakdown: EnergyBreakdown,
    nehari: NehariDiagnostics,
    residuals: ResidualsEcho,
    history: Vec<IterRecord>,
    timings: WorkCounters,
    converged: bool,
    stalled: bool,
    seeds: Vec<SeedResult>,
    config: BTreeMap<String, String>,
}

fn params_echo(cfg: &RunConfig, n: &Nonlinearity, p: &PhysParams) -> ParamsEcho {
    let (c1, c2) = energy_coefficient_certificates(p, n.sigma());
    ParamsEcho {
        m: p.m,
        omega: p.omega,
        q: p.q,
        ell: p.ell,
        mu: p.mu,
        powers: cfg.powers.clone(),
        coeffs: cfg.coeffs.clone(),
        sigma: n.sigma(),
        certificate_natural_constraint: c1,
        certificate_energy_lower_bound: c2,
    }
}

fn grid_echo(g: &CylGrid) -> GridEcho {
    GridEcho { nr: g.nr(), nz: g.nz(), r: g.r_max(), l: g.z_half(), dr: g.dr(), dz: g.dz() }
}

fn route_name(r: Route) -> &'static str {
    match r {
        Route::NaturalConstraint => "natural-constraint",
        Route::MountainPass => "mountain-pass",
    }
}

fn build_summary(
    cfg: &RunConfig,
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    gs: &GroundState,
    seeds: Vec<SeedResult>,
) -> Summary {
    let slacks = bound_slacks(p, &gs.reduced);
    let norm2 = kgmp::grid::h1_norm_sq(g, p, &gs.reduced.u).unwrap_or(f64::NAN);
    Summary {
        params: params_echo(cfg, n, p),
        grid: grid_echo(g),
        route: route_name(gs.route).to_string(),
        energy_breakdown: gs.energy,
        nehari: gs.nehari,
        residuals: ResidualsEcho {
            u_dual_norm: gs.residuals.u_dual_norm,
            u_dual_relative: gs.residuals.u_dual_relative,
            phi_linear: gs.residuals.phi_linear,
            gauge_linear: gs.residuals.gauge_linear,
            nehari_relative: gs.nehari.n_value / norm2.max(1e-300),
            max_principle: slacks,
        },
        history: gs.history.clone(),
        timings: gs.work,
        converged: gs.converged,
        stalled: gs.stalled,
        seeds,
        config: cfg.raw.clone(),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    std::fs::write(path, text + "\n").map_err(|e| e.to_string())
}

fn solve_one(
    g: &CylGrid,
    p: &PhysParams,
    n: &Nonlinearity,
    opts: &SolveOptions,
) -> Result<GroundState, String> {
    let rep = check_assumptions(n, p);
    let use_nehari = match opts.route {
        kgmp::optimizer::RouteChoice::NaturalConstraint => true,
        kgmp::optimizer::RouteChoice::MountainPass => false,
        kgmp::optimizer::RouteChoice::Auto => rep.natural_constraint,
    };
    if use_nehari {
        minimize_ground_state(g, p, n, opts).map_err(|e| e.to_string())
    } else {
        mountain_pass_search(g, p, n, opts).map_err(|e| e.to_string())
    }
}

fn cmd_check_model(cfg: &RunConfig) -> Result<u8, String> {
    let p = cfg.phys_params()?;
    let n = cfg.nonlinearity()?;
    let rep = check_assumptions(&n, &p);
    let (c1, c2) = energy_coefficient_certificates(&p, n.sigma());
    println!("model: f(s) = sum of powers {:?} with coefficients {:?}", cfg.powers, cfg.coeffs);
    println!("sigma = {}", n.sigma());
    for (name, check) in [("F1", rep.f1), ("F2", rep.f2), ("F3", rep.f3), ("F4", rep.f4), ("F5", rep.f5)] {
        println!(
            "  {name}: {} (worst violation {:.3e})",
            if check.holds { "ok" } else { "FAIL" },
            check.worst_violation
        );
    }
    println!("admissibility value: {:.6} ({})", rep.admissibility_value, if rep.admissible { "ok" } else { "FAIL" });
    println!("certificates: natural-constraint {c1:.6}, energy-lower-bound {c2:.6}");
    println!(
        "routes: natural-constraint {}, mountain-pass {}",
        if rep.natural_constraint { "admissible" } else { "inadmissible" },
        if rep.mountain_pass { "admissible" } else { "inadmissible" }
    );
    match rep.route {
        Some(Route::NaturalConstraint) => println!("selected route: natural constraint (Nehari minimization)"),
        Some(Route::MountainPass) => println!("selected route: mountain pass"),
        None => println!("selected route: none (model rejected)"),
    }
    Ok(0)
}

fn cmd_solve(cfg: &RunConfig) -> Result<u8, String> {
    cfg.validate()?;
    let g = cfg.grid()?;
    let p = cfg.phys_params()?;
    let n = cfg.nonlinearity()?;
    let base_opts = cfg.solve_options();

    let seed_profiles: Vec<SeedProfile> = (0..cfg.seeds.max(1))
        .map(|k| {
            if k == 0 {
                SeedProfile { width: cfg.seed_width, z_offset: cfg.seed_z0 }
            } else {
                SeedProfile::randomized(k as u64)
            }
        })
        .collect();

    let run_seed = |profile: &SeedProfile| -> Result<GroundState, String> {
        let opts = SolveOptions { seed: *profile, ..base_opts.clone() };
        solve_one(&g, &p, &n, &opts)
    };

    let results: Vec<Result<GroundState, String>> = if cfg.parallel_seeds && seed_profiles.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> =
                seed_profiles.iter().map(|prof| scope.spawn(move || run_seed(prof))).collect();
            handles.into_iter().map(|h| h.join().expect("seed thread panicked")).collect()
        })
    } else {
        seed_profiles.iter().map(run_seed).collect()
    };

    let mut seeds = Vec::new();
    let mut best: Option<(usize, GroundState)> = None;
    for (k, res) in results.into_iter().enumerate() {
        let gs = res?;
        seeds.push(SeedResult {
            seed_index: k,
            width: seed_profiles[k].width,
            z_offset: seed_profiles[k].z_offset,
            energy: gs.energy.total,
            converged: gs.converged,
        });
        let better = match &best {
            None => true,
            Some((_, b)) => {
                (gs.converged && !b.converged) || (gs.converged == b.converged && gs.energy.total < b.energy.total)
            }
        };
        if better {
            best = Some((k, gs));
        }
    }
    let (best_idx, gs) = best.expect("at least one seed");

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| e.to_string())?;
    let summary = build_summary(cfg, &g, &p, &n, &gs, seeds);
    write_json(&cfg.out_dir.join("summary.json"), &summary)?;
    output::write_field(&cfg.out_dir.join("u.field"), &g, &gs.reduced.u).map_err(|e| e.to_string())?;
    output::write_field(&cfg.out_dir.join("phi.field"), &g, &gs.reduced.phi).map_err(|e| e.to_string())?;
    output::write_field(&cfg.out_dir.join("a.field"), &g, &gs.reduced.gauge).map_err(|e| e.to_string())?;
    if cfg.svg {
        output::write_svg(&cfg.out_dir.join("u.svg"), &g, &gs.reduced.u, "matter profile u").map_err(|e| e.to_string())?;
        output::write_svg(&cfg.out_dir.join("phi.svg"), &g, &gs.reduced.phi, "electrostatic potential phi").map_err(|e| e.to_string())?;
        output::write_svg(&cfg.out_dir.join("a.svg"), &g, &gs.reduced.gauge, "gauge amplitude a").map_err(|e| e.to_string())?;
    }

    println!(
        "route {}: energy {:.10}, dual residual {:.3e}, |N|/‖u‖² {:.3e} (best of {} seed(s), index {best_idx})",
        summary.route,
        gs.energy.total,
        gs.residuals.u_dual_relative,
        summary.residuals.nehari_relative.abs(),
        summary.seeds.len(),
    );
    println!("outputs in {}", cfg.out_dir.display());
    Ok(if gs.converged { 0 } else { 2 })
}

fn cmd_sweep(cfg: &RunConfig) -> Result<u8, String> {
    cfg.validate()?;
    let g = cfg.grid()?;
    let p = cfg.phys_params()?;
    let n = cfg.nonlinearity()?;
    let opts = cfg.solve_options();
    let report = sweep_mu(&g, &p, &n, &cfg.mu_schedule, &opts).map_err(|e| e.to_string())?;

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| e.to_string())?;
    #[derive(Serialize)]
    struct SweepDoc<'a> {
        params: ParamsEcho,
        grid: GridEcho,
        report: &'a kgmp::continuation::ContinuationReport,
        config: &'a BTreeMap<String, String>,
    }
    let doc = SweepDoc {
        params: params_echo(cfg, &n, &p),
        grid: grid_echo(&g),
        report: &report,
        config: &cfg.raw,
    };
    write_json(&cfg.out_dir.join("continuation.json"), &doc)?;

    println!("mu sweep over {:?}", report.schedule);
    for s in &report.steps {
        println!(
            "  mu={:<8} E={:>14.8} |u|_2={:.6} converged={}{}",
            s.mu,
            s.energy,
            s.u_l2_norm,
            s.converged,
            if s.cold_restarted { " (cold restart)" } else { "" }
        );
    }
    for d in &report.diffs {
        println!("  diff {} -> {}: |du|_H1 = {:.3e}", d.mu_from, d.mu_to, d.u_h1);
    }
    println!(
        "energy cap sup_t Jtilde = {:.8}: {}",
        report.jtilde_cap,
        if report.energy_bounded { "bounded" } else { "VIOLATED" }
    );
    let all_converged = report.steps.iter().all(|s| s.converged);
    Ok(if all_converged { 0 } else { 2 })
}

fn print_rows(rows: &[InvariantResult]) {
    for r in rows {
        let status = if r.pass { "pass" } else { "FAIL" };
        if r.threshold.is_finite() {
            println!("  [{status}] {:<42} {:>12.3e} (tol {:.1e})  {}", r.name, r.measured, r.threshold, r.identity);
        } else {
            println!("  [info] {:<42} {:>12.3e}  {}", r.name, r.measured, r.identity);
        }
    }
}

fn cmd_verify(cfg: &RunConfig) -> Result<u8, String> {
    cfg.validate()?;
    let g = cfg.grid()?;
    let p = cfg.phys_params()?;
    let n = cfg.nonlinearity()?;

    let mut rows: Vec<InvariantResult> = Vec::new();
    let probes = random_probes(&g, &p, cfg.verify_probes, cfg.verify_seed);
    rows.extend(run_suite(&g, &p, &n, &probes).map_err(|e| e.to_string())?);
    if let Some(u) = probes.first() {
        rows.extend(projection_rows(&g, &p, &n, u, cfg.nehari_tol).map_err(|e| e.to_string())?);
        rows.extend(gauge_chain_rows(&g, &p, u, &[0.0, 0.5, 1.0], 1e-8).map_err(|e| e.to_string())?);
    }

    // 3D oracle cross-check on the dedicated comparison profile.
    {
        let p_oracle = PhysParams { q: 1.0, mu: 1.5, ..p };
        let g_oracle = kgmp::grid::build_grid(128, 256, 3.5, 3.5).map_err(|e| e.to_string())?;
        let w2 = 1.15f64 * 1.15;
        let la = p.ell.abs();
        let u = ScalarField::from_fn(&g_oracle, |r, z| r.powi(la) * (-(r * r + z * z) / w2).exp());
        let g3 = CartGrid3D::new(cfg.oracle_n, 2.5).map_err(|e| e.to_string())?;
        let cmp = compare_energies(&g3, &g_oracle, &p_oracle, &n, &u).map_err(|e| e.to_string())?;
        // 2% at the N = 33 reference, relaxed by the O(h²) factor for
        // coarser oracle grids.
        let tol = 0.02 * (33.0 / cfg.oracle_n as f64).powi(2).max(1.0);
        for t in &cmp.terms {
            rows.push(InvariantResult {
                name: format!("oracle/{}", t.name.split_whitespace().next().unwrap_or("term")),
                identity: format!("{} matches 3D Cartesian solve", t.name),
                measured: t.rel_diff,
                threshold: tol,
                pass: t.rel_diff <= tol,
            });
        }
        rows.push(InvariantResult {
            name: "oracle/div_a".into(),
            identity: "lifted gauge field is discretely divergence-free".into(),
            measured: cmp.div_a_rel,
            threshold: 0.1,
            pass: cmp.div_a_rel <= 0.1,
        });
    }

    // A converged state on a coarse grid exercises the stationarity checks.
    {
        let g_small = kgmp::grid::build_grid(32, 64, 8.0, 8.0).map_err(|e| e.to_string())?;
        let opts = SolveOptions { max_outer: 200, ..cfg.solve_options() };
        let gs = solve_one(&g_small, &p, &n, &opts)?;
        rows.extend(
            converged_state_checks(&g_small, &p, &n, &gs, 1e-5, 1e-7).map_err(|e| e.to_string())?,
        );
        rows.extend(mountain_pass_geometry_checks(&g_small, &p, &n, &gs).map_err(|e| e.to_string())?);
    }

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| e.to_string())?;
    #[derive(Serialize)]
    struct VerifyDoc<'a> {
        params: ParamsEcho,
        grid: GridEcho,
        results: &'a [InvariantResult],
        failures: usize,
        config: &'a BTreeMap<String, String>,
    }
    let n_fail = failures(&rows);
    let doc = VerifyDoc {
        params: params_echo(cfg, &n, &cfg.phys_params()?),
        grid: grid_echo(&g),
        results: &rows,
        failures: n_fail,
        config: &cfg.raw,
    };
    write_json(&cfg.out_dir.join("verify.json"), &doc)?;

    println!("invariant suite ({} checks):", rows.len());
    print_rows(&rows);
    println!("{n_fail} failure(s)");
    Ok(if n_fail == 0 { 0 } else { 3 })
}

fn cmd_fiber_scan(cfg: &RunConfig, t_min: f64, t_max: f64, points: usize) -> Result<u8, String> {
    cfg.validate()?;
    if !(t_min > 0.0 && t_max > t_min && points >= 2) {
        return Err("fiber scan needs 0 < t_min < t_max and at least two points".into());
    }
    let g = cfg.grid()?;
    let p = cfg.phys_params()?;
    let n = cfg.nonlinearity()?;
    let u = seed_field(&g, &p, &SeedProfile { width: cfg.seed_width, z_offset: cfg.seed_z0 })
        .map_err(|e| e.to_string())?;
    let a_fixed = kgmp::reduction::solve_gauge(&g, &p, &u).map_err(|e| e.to_string())?;

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| e.to_string())?;
    let mut table = String::from("t\tj\tjbar\tg\n");
    println!("{:>10} {:>16} {:>16} {:>16}", "t", "j(t)", "jbar(t)", "g(t)");
    for k in 0..points {
        let t = t_min * (t_max / t_min).powf(k as f64 / (points - 1) as f64);
        let (j, jbar) = kgmp::functional::mountain_pass_fiber(&g, &p, &n, &u, &a_fixed, t)
            .map_err(|e| e.to_string())?;
        let g_t = nehari_fiber_value(&g, &p, &n, &u, t).map_err(|e| e.to_string())?;
        table += &format!("{t}\t{j}\t{jbar}\t{g_t}\n");
        println!("{t:>10.5} {j:>16.8} {jbar:>16.8} {g_t:>16.8}");
    }
    std::fs::write(cfg.out_dir.join("fiber.tsv"), table).map_err(|e| e.to_string())?;
    println!("table written to {}", cfg.out_dir.join("fiber.tsv").display());
    Ok(0)
}

fn run() -> Result<u8, (u8, String)> {
    let cli = Cli::parse();
    let cfg = RunConfig::from_sources(cli.config.as_deref(), &cli.overrides, cli.out.as_deref())
        .map_err(|e| (1u8, e))?;
    let result = match cli.command {
        Command::CheckModel => cmd_check_model(&cfg),
        Command::Solve => cmd_solve(&cfg),
        Command::SweepMu => cmd_sweep(&cfg),
        Command::Verify => cmd_verify(&cfg),
        Command::FiberScan { t_min, t_max, points } => cmd_fiber_scan(&cfg, t_min, t_max, points),
    };
    result.map_err(|e| (1u8, e))
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
