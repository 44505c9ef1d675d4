//! Config-driven command-line runner: every pipeline is a subcommand that
//! reads one TOML config, writes columnar result files plus a summary
//! record into the output directory, and echoes the resolved config for
//! reproducibility. Exit status is nonzero only for hard errors;
//! report-only "fail" verdicts exit zero with the verdict in the files.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use homog::cell::{
    effective_operator_table, effective_potential, verify_hat_a_properties, EffectiveTable,
};
use homog::config::ExperimentConfig;
use homog::dirichlet::{convergence_study, solve_eps_problem, solve_homogenized};
use homog::error::{HomogError, Result};
use homog::nfunction::{
    check_delta2, check_m3_cube_condition, check_m4_log_holder, delta0, radial_reduction_check,
    SampleSpec,
};
use homog::pgrid::{BoxGrid, PeriodicGrid};
use homog::tabio::{Summary, Table};
use homog::tabulated::{biconjugate, conjugate, ConjugateSource, GridSpec, TabulatedConvexFunction};
use homog::twoscale::corrector_diagnostic;

#[derive(Parser)]
#[command(
    name = "homog",
    about = "Periodic homogenization toolkit: N-function conjugation, cell problems, \
             effective operators, and eps-convergence studies"
)]
struct Cli {
    /// Experiment configuration (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel node/eps solves (0 = automatic).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Reserved; all solves are deterministic, the seed is recorded only.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Solver tolerance override.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the conjugate of the configured N-function and check the
    /// biconjugation fixed point.
    Conjugate,
    /// Run the Delta2 / M3 / M4 condition checkers and the radial
    /// reduction battery.
    CheckConditions,
    /// Solve cell problems over the xi-lattice and tabulate hat A.
    Cell,
    /// Effective potential f, conjugate f* (both routes), and the
    /// effective-operator property battery.
    Effective,
    /// Solve the oscillatory problems and the homogenized problem once.
    Homogenize,
    /// Full eps-convergence study with corrector diagnostics.
    Converge,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.workers > 0 {
        // A global pool can only be installed once; a second install in the
        // same process is harmless here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("homog: error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(tol) = cli.tol {
        if !(tol > 0.0) {
            return Err(HomogError::InvalidConfig("tol must be positive".into()));
        }
        cfg.numerics.tol = tol;
    }
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("config.resolved.toml"), cfg.echo())?;
    match cli.command {
        Command::Conjugate => cmd_conjugate(&cfg, &out_dir),
        Command::CheckConditions => cmd_check_conditions(&cfg, &out_dir),
        Command::Cell => cmd_cell(&cfg, &out_dir),
        Command::Effective => cmd_effective(&cfg, &out_dir),
        Command::Homogenize => cmd_homogenize(&cfg, &out_dir),
        Command::Converge => cmd_converge(&cfg, &out_dir),
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn cmd_conjugate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let gauge = cfg.build_gauge()?;
    let profile = gauge.profile(&[0.0, 0.0]);
    let spec = GridSpec::new(cfg.numerics.conj_radius, cfg.numerics.conj_n);
    // The dual axis must stay inside the attained slope range.
    let dual_radius = 0.9 * profile.deriv(cfg.numerics.conj_radius);
    let dual_axis = GridSpec::new(dual_radius, cfg.numerics.conj_n).uniform_symmetric();
    let conj = conjugate(&ConjugateSource::Scalar(&profile, spec), vec![dual_axis])?;
    let mut table = Table::new(&["s", "conjugate"])
        .with_meta("gauge", gauge.structure_tag())
        .with_meta("primal_radius", cfg.numerics.conj_radius);
    for (s, v) in conj.axes()[0].iter().zip(conj.values()) {
        table.push_row(vec![*s, *v]);
    }
    table.write(&out.join("conjugate.txt"))?;

    // Biconjugation fixed point of the (convex) primal tabulation.
    let primal_axis = spec.nonnegative();
    let primal_vals: Vec<f64> = primal_axis.iter().map(|&t| profile.eval(t)).collect();
    let primal = TabulatedConvexFunction::new(vec![primal_axis], primal_vals);
    let bi = biconjugate(&primal)?;
    let mut gap = 0.0_f64;
    for (&t, &v) in primal.axes()[0].iter().zip(primal.values()) {
        gap = gap.max((bi.eval(&[t])? - v).abs());
    }
    let mut summary = Summary::new();
    summary.put("gauge", gauge.structure_tag());
    summary.put("dual_radius", dual_radius);
    summary.put("biconjugate_gap", gap);
    summary.put("biconjugate_fixed_point", verdict(gap <= 1e-6));
    summary.write(&out.join("summary.txt"))
}

fn cmd_check_conditions(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let gauge = cfg.build_gauge()?;
    let d = cfg.problem.d;
    let spec = SampleSpec::new(d);
    let d0 = delta0(d);
    let deltas: Vec<f64> = if cfg.numerics.deltas.is_empty() {
        vec![d0, d0 / 2.0, d0 / 4.0]
    } else {
        cfg.numerics.deltas.clone()
    };
    let delta2 = check_delta2(&gauge, &spec);
    let m4 = check_m4_log_holder(&gauge, &spec);
    let m3 = check_m3_cube_condition(&gauge, d, &deltas, &spec)?;
    let radial = radial_reduction_check(&gauge, d, &deltas, &spec)?;

    let mut table = Table::new(&["delta", "fitted_d", "fitted_c", "max_ratio"])
        .with_meta("gauge", gauge.structure_tag())
        .with_meta("d", d);
    for fit in &m3.per_delta {
        table.push_row(vec![fit.delta, fit.fitted_d, fit.fitted_c, fit.max_ratio]);
    }
    table.write(&out.join("m3_fits.txt"))?;

    let mut summary = Summary::new();
    summary.put("gauge", gauge.structure_tag());
    summary.put("delta2", verdict(delta2.passes));
    summary.put("delta2_worst_ratio", delta2.worst_ratio);
    summary.put("m4", verdict(m4.passes));
    summary.put("m4_fitted_a", m4.fitted_a);
    summary.put("m4_coarse_a", m4.coarse_a);
    summary.put("m4_max_ratio", m4.max_ratio);
    if let Some(w) = &m4.witness {
        summary.put(
            "m4_witness",
            format!("y1={:?} y2={:?} t={} ratio={}", w.y1, w.y2, w.t, w.ratio),
        );
    }
    summary.put("m3", verdict(m3.passes));
    summary.put("m3_trend_ok", m3.trend_ok);
    summary.put("m3_refine_ok", m3.refine_ok);
    summary.put("radial_reduction", verdict(radial.passes));
    summary.put("radial_lemma_consistent", radial.lemma_consistent);
    summary.write(&out.join("summary.txt"))
}

fn xi_axes(cfg: &ExperimentConfig) -> Vec<Vec<f64>> {
    let axis = cfg.numerics.xi_axis();
    if cfg.problem.d == 1 {
        vec![axis]
    } else {
        vec![axis.clone(), axis]
    }
}

fn dual_axes(cfg: &ExperimentConfig) -> Vec<Vec<f64>> {
    let axis = cfg.numerics.dual_axis();
    if cfg.problem.d == 1 {
        vec![axis]
    } else {
        vec![axis.clone(), axis]
    }
}

fn write_effective_table(table: &EffectiveTable, d: usize, path: &Path) -> Result<()> {
    let mut out = if d == 1 {
        Table::new(&["xi", "hat_a", "f", "residual", "iterations"])
    } else {
        Table::new(&["xi1", "xi2", "hat_a1", "hat_a2", "f", "residual", "iterations"])
    }
    .with_meta("d", d)
    .with_meta("nodes", table.node_count());
    for idx in 0..table.node_count() {
        let xi = table.node_xi(idx);
        let a = table.hat_a[idx];
        let row = if d == 1 {
            vec![xi[0], a[0], table.f_vals[idx], table.residuals[idx], table.iterations[idx] as f64]
        } else {
            vec![
                xi[0],
                xi[1],
                a[0],
                a[1],
                table.f_vals[idx],
                table.residuals[idx],
                table.iterations[idx] as f64,
            ]
        };
        out.push_row(row);
    }
    out.write(path)
}

fn build_table(cfg: &ExperimentConfig, axes: Vec<Vec<f64>>) -> Result<EffectiveTable> {
    let op = cfg.build_operator()?;
    let grid = PeriodicGrid::new(cfg.problem.d, cfg.numerics.cell_k);
    let table = effective_operator_table(&op, axes, &grid, cfg.numerics.tol);
    if let Some((idx, msg)) = table.failures.first() {
        return Err(HomogError::InvalidConfig(format!(
            "cell solve failed at lattice node {idx}: {msg}"
        )));
    }
    Ok(table)
}

fn cmd_cell(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let table = build_table(cfg, xi_axes(cfg))?;
    write_effective_table(&table, cfg.problem.d, &out.join("cell.txt"))?;
    let worst_residual = table.residuals.iter().cloned().fold(0.0_f64, f64::max);
    let mut summary = Summary::new();
    summary.put("nodes", table.node_count());
    summary.put("worst_residual", worst_residual);
    summary.put("converged", verdict(worst_residual <= cfg.numerics.tol.max(1e-8)));
    summary.write(&out.join("summary.txt"))
}

fn cmd_effective(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let d = cfg.problem.d;
    let gauge = cfg.build_gauge()?;
    let grid = PeriodicGrid::new(d, cfg.numerics.cell_k);
    let coarse = build_table(cfg, xi_axes(cfg))?;
    let fine_axis = GridSpec::new(cfg.numerics.xi_radius, 2 * cfg.numerics.xi_n).uniform_symmetric();
    let fine_axes =
        if d == 1 { vec![fine_axis] } else { vec![fine_axis.clone(), fine_axis] };
    let fine = build_table(cfg, fine_axes)?;
    let potential = effective_potential(
        &gauge,
        xi_axes(cfg),
        dual_axes(cfg),
        &grid,
        cfg.numerics.tol,
        cfg.numerics.cross_check_tol,
    )?;
    write_effective_table(&coarse, d, &out.join("hat_a.txt"))?;

    let mut fstar = if d == 1 {
        Table::new(&["eta", "f_star"])
    } else {
        Table::new(&["eta1", "eta2", "f_star"])
    };
    let star = &potential.f_star;
    for idx in 0..star.values().len() {
        let row = if d == 1 {
            vec![star.axes()[0][idx], star.values()[idx]]
        } else {
            let ny = star.axes()[1].len();
            vec![star.axes()[0][idx / ny], star.axes()[1][idx % ny], star.values()[idx]]
        };
        fstar.push_row(row);
    }
    fstar.write(&out.join("f_star.txt"))?;

    let mut cross = Table::new(&["eta1", "eta2", "route_i", "route_ii"]);
    for (eta, a, b) in &potential.cross_checks {
        cross.push_row(vec![eta[0], eta[1], *a, *b]);
    }
    cross.write(&out.join("f_star_cross_check.txt"))?;

    let report = verify_hat_a_properties(&coarse, &fine, &potential)?;
    let mut summary = Summary::new();
    summary.put("fitted_c", report.fitted_c);
    summary.put("coercive", verdict(report.coercive));
    summary.put("monotonicity_min", report.monotonicity_min);
    summary.put("monotone", verdict(report.monotone));
    summary.put("jump_ratio", report.jump_ratio);
    summary.put("continuous", verdict(report.continuous));
    summary.put("battery", verdict(report.passes));
    summary.put("cross_check_flagged", potential.flagged.len());
    summary.put("cross_check", verdict(potential.flagged.is_empty()));
    summary.write(&out.join("summary.txt"))
}

fn box_grid(cfg: &ExperimentConfig) -> BoxGrid {
    BoxGrid::new(cfg.problem.d, cfg.numerics.k, 1.0)
}

fn cmd_homogenize(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let op = cfg.build_operator()?;
    let table = build_table(cfg, xi_axes(cfg))?;
    let grid = box_grid(cfg);
    let load = cfg.load_fn();
    let homog = solve_homogenized(&table, &load, &grid, cfg.numerics.tol)?;
    let mut summary = Summary::new();
    summary.put("homog_energy", homog.energy);
    summary.put("homog_residual", homog.residual);
    write_solution_table(&homog.u.values, &grid, 0.0, &out.join("u_homog.txt"))?;
    for (i, &eps) in cfg.numerics.eps_list.iter().enumerate() {
        let sol = solve_eps_problem(
            &op,
            eps,
            &load,
            &grid,
            cfg.numerics.tol,
            cfg.numerics.min_nodes_per_cell,
        )?;
        write_solution_table(&sol.u.values, &grid, eps, &out.join(format!("u_eps_{i}.txt")))?;
        summary.put(&format!("eps_{i}"), eps);
        summary.put(&format!("eps_{i}_energy"), sol.energy);
        summary.put(&format!("eps_{i}_residual"), sol.residual);
        let gap = (sol.energy - sol.load_work).abs();
        summary.put(
            &format!("eps_{i}_energy_identity"),
            verdict(gap <= 1e-8 * (1.0 + sol.load_work.abs())),
        );
    }
    summary.write(&out.join("summary.txt"))
}

fn write_solution_table(values: &[f64], grid: &BoxGrid, eps: f64, path: &Path) -> Result<()> {
    let mut t = if grid.d() == 1 {
        Table::new(&["x", "u"])
    } else {
        Table::new(&["x1", "x2", "u"])
    }
    .with_meta("eps", eps)
    .with_meta("k", grid.intervals_per_axis());
    for (idx, &v) in values.iter().enumerate() {
        let p = grid.node_pos(idx);
        let row =
            if grid.d() == 1 { vec![p[0], v] } else { vec![p[0], p[1], v] };
        t.push_row(row);
    }
    t.write(path)
}

fn cmd_converge(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let op = cfg.build_operator()?;
    let table = build_table(cfg, xi_axes(cfg))?;
    let grid = box_grid(cfg);
    let load = cfg.load_fn();
    let report = convergence_study(
        &op,
        &table,
        &load,
        &cfg.numerics.eps_list,
        &grid,
        cfg.numerics.tol,
        cfg.numerics.min_nodes_per_cell,
    )?;
    let mut rows = Table::new(&[
        "eps",
        "l1_error",
        "grad_l1_distance",
        "energy",
        "homog_energy",
        "grad_modular",
        "flux_modular",
        "residual",
        "corrector_l1",
        "orthogonality_gap",
    ])
    .with_meta("k", cfg.numerics.k)
    .with_meta("d", cfg.problem.d);
    for (entry, sol) in report.entries.iter().zip(&report.eps_solutions) {
        let diag = corrector_diagnostic(&op, sol, &report.homog, cfg.numerics.tol)?;
        rows.push_row(vec![
            entry.eps,
            entry.l1_error,
            entry.grad_l1_distance,
            entry.energy,
            report.homog_energy,
            entry.grad_modular,
            entry.flux_modular,
            entry.residual,
            diag.l1_distance,
            diag.orthogonality_gap,
        ]);
    }
    rows.write(&out.join("converge.txt"))?;
    let errs: Vec<f64> = report.entries.iter().map(|e| e.l1_error).collect();
    let decreasing = errs.windows(2).all(|w| w[1] < w[0]);
    let mut summary = Summary::new();
    summary.put("eps_count", errs.len());
    summary.put("homog_energy", report.homog_energy);
    if errs.len() > 1 {
        summary.put("l1_monotone_decrease", verdict(decreasing));
        summary.put("error_ratio_first_to_last", errs[0] / errs[errs.len() - 1]);
    }
    summary.write(&out.join("summary.txt"))
}
