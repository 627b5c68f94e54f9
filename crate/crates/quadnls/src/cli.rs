//! Command line around the config format: ground-state, simulate,
//! ensemble, verify. Every artifact embeds the resolved config and seed
//! that produced it, so a run can be regenerated from any of its outputs.
//! Exit status is zero exactly when the requested work succeeded and every
//! selected check passed.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::dynamics::{run_ensemble, run_trajectory, StopReason, TrajectoryResult};
use crate::error::{Error, Result};
use crate::ground_state::{solve_ground_state, GroundStateMethod, DEFAULT_FLOW_TOL};
use crate::io;
use crate::observables::{check_bounds, fit_envelope_constant, BoundsReport};
use crate::radial::{solve_radial_ground_state, DEFAULT_SHOOT_TOL};
use crate::verify::run_suites;

/// Relative slack for the trajectory audits: the bounds are exact up to
/// quadrature of the kinetic integral and roundoff in the fit.
const AUDIT_SLACK: f64 = 1e-9;

const SUMMARY_COLUMNS: &str =
    "index,seed,stop_reason,stop_time,steps,mass_drift,max_kinetic,fit_c,bounds_pass";

#[derive(Parser)]
#[command(
    name = "quadnls",
    version,
    about = "Coupled quadratic Schrodinger pair with conservative noise: \
             ground states, trajectories, ensembles, verification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the standing-wave pair and write its profile plus metadata
    GroundState(CommonArgs),
    /// Integrate one trajectory; write observables, checkpoint, metadata
    Simulate(CommonArgs),
    /// Integrate seeded trajectories in parallel; write per-run series and a summary
    Ensemble(CommonArgs),
    /// Run verification suites and print measured errors against their bounds
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Experiment config file; omitted runs the stock configuration
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Directory for output artifacts
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Override the config's base seed
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Override the config's worker thread count (0 = all cores)
    #[arg(long, value_name = "N")]
    jobs: Option<usize>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Suite to run, repeatable; omitted runs all suites
    #[arg(long = "suite", value_name = "NAME")]
    suites: Vec<String>,
}

pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::GroundState(args) => cmd_ground_state(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Ensemble(args) => cmd_ensemble(&args),
        Command::Verify(args) => cmd_verify(&args),
    }
}

fn load_config(args: &CommonArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::usage(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    Ok(config)
}

fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| {
        Error::usage(format!(
            "cannot create output directory {}: {e}",
            dir.display()
        ))
    })
}

fn push(entries: &mut Vec<(String, String)>, key: &str, value: String) {
    entries.push((key.to_string(), value));
}

fn cmd_ground_state(args: &CommonArgs) -> Result<()> {
    let config = load_config(args)?;
    let method = config.ground_state_method;
    let tol = config.ground_state_tol.unwrap_or(match method {
        GroundStateMethod::Shooting => DEFAULT_SHOOT_TOL,
        GroundStateMethod::Flow => DEFAULT_FLOW_TOL,
    });
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::usage(format!(
            "ground-state tolerance must be positive, got {tol}"
        )));
    }
    if method == GroundStateMethod::Shooting && config.grid.d() != 4 {
        return Err(Error::usage(format!(
            "the shooting method solves the d = 4 radial profile; the grid has d = {}",
            config.grid.d()
        )));
    }
    ensure_out_dir(&args.out)?;

    let mut entries = Vec::new();
    push(&mut entries, "artifact", "ground-state".to_string());
    push(&mut entries, "method", method.to_string());
    push(&mut entries, "tol", io::fmt_f64(tol));

    let (profile_name, mass, energy) = match method {
        GroundStateMethod::Shooting => {
            let radial = solve_radial_ground_state(tol)?;
            let profile_name = "ground-state-profile.csv";
            io::write_radial_profile(&args.out.join(profile_name), &radial)?;
            push(&mut entries, "profile", profile_name.to_string());
            push(&mut entries, "mass", io::fmt_f64(radial.mass));
            push(&mut entries, "kinetic", io::fmt_f64(radial.kinetic));
            push(&mut entries, "potential", io::fmt_f64(radial.potential));
            push(&mut entries, "energy", io::fmt_f64(radial.energy));
            push(
                &mut entries,
                "gn_coefficient",
                io::fmt_f64(0.5 / radial.mass.sqrt()),
            );
            push(
                &mut entries,
                "shoot_residual",
                io::fmt_f64(radial.shoot_residual),
            );
            push(
                &mut entries,
                "tail_residual",
                io::fmt_f64(radial.tail_residual),
            );
            push(
                &mut entries,
                "derivative_mismatch",
                io::fmt_f64(radial.derivative_mismatch),
            );
            push(
                &mut entries,
                "nehari_defect",
                io::fmt_f64(radial.nehari_defect),
            );
            push(
                &mut entries,
                "pohozaev_defect",
                io::fmt_f64(radial.pohozaev_defect),
            );
            (profile_name, radial.mass, radial.energy)
        }
        GroundStateMethod::Flow => {
            let gs = solve_ground_state(config.grid, method, tol)?;
            let profile_name = "ground-state-field.ckpt";
            io::write_checkpoint(&args.out.join(profile_name), &gs.phi, &gs.psi, 0.0)?;
            push(&mut entries, "profile", profile_name.to_string());
            push(&mut entries, "mass", io::fmt_f64(gs.mass));
            push(&mut entries, "kinetic", io::fmt_f64(gs.kinetic));
            push(&mut entries, "potential", io::fmt_f64(gs.potential));
            push(&mut entries, "energy", io::fmt_f64(gs.energy));
            push(
                &mut entries,
                "gn_coefficient",
                io::fmt_f64(gs.gn_coefficient),
            );
            push(&mut entries, "residual_u", io::fmt_f64(gs.residual.0));
            push(&mut entries, "residual_v", io::fmt_f64(gs.residual.1));
            push(&mut entries, "iterations", gs.iterations.to_string());
            (profile_name, gs.mass, gs.energy)
        }
    };
    entries.extend(config.emit_pairs());
    io::write_metadata(&args.out.join("ground-state.meta"), &entries)?;
    println!(
        "ground state ({method}): mass {mass:.10} energy {energy:.3e}; wrote {} and {}",
        args.out.join(profile_name).display(),
        args.out.join("ground-state.meta").display()
    );
    Ok(())
}

/// Reference mass for the trajectory audits, from the artifact the config
/// names. None when the config names no artifact; the audits are skipped.
fn load_gs_mass(config: &ExperimentConfig) -> Result<Option<f64>> {
    let Some(path) = &config.gs_artifact else {
        return Ok(None);
    };
    if !path.exists() {
        return Err(Error::MissingArtifact(path.clone()));
    }
    let entries = io::read_metadata(path)?;
    let raw = io::lookup(&entries, "mass")
        .ok_or_else(|| Error::parse("ground-state metadata", "missing key 'mass'"))?;
    Ok(Some(io::parse_f64(raw, "ground-state mass")?))
}

/// Envelope fit plus the two bound audits; flags land on the records.
fn audit_run(run: &mut TrajectoryResult, gs_mass: Option<f64>) -> Result<(f64, Option<BoundsReport>)> {
    let fit_c = fit_envelope_constant(&run.series);
    let Some(gs_mass) = gs_mass else {
        return Ok((fit_c, None));
    };
    let first = &run.series.records[0];
    let tol = AUDIT_SLACK * (1.0 + first.energy.abs() + first.kinetic);
    let report = check_bounds(&mut run.series, gs_mass, fit_c, tol)?;
    Ok((fit_c, Some(report)))
}

fn audit_entries(entries: &mut Vec<(String, String)>, report: Option<&BoundsReport>) {
    match report {
        None => push(entries, "bounds_audited", "off".to_string()),
        Some(r) => {
            push(entries, "bounds_audited", "on".to_string());
            push(entries, "bounds_pass", flag(r.pass).to_string());
            push(
                entries,
                "coercivity_applicable",
                flag(r.coercivity_applicable).to_string(),
            );
            push(
                entries,
                "coercivity_margin",
                io::fmt_f64(r.coercivity_margin),
            );
            let violation = |v: Option<usize>| match v {
                None => "none".to_string(),
                Some(i) => i.to_string(),
            };
            push(
                entries,
                "coercivity_first_violation",
                violation(r.coercivity_first_violation),
            );
            push(
                entries,
                "envelope_first_violation",
                violation(r.envelope_first_violation),
            );
        }
    }
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

fn stop_entries(entries: &mut Vec<(String, String)>, run: &TrajectoryResult, fit_c: f64) {
    push(entries, "stop_reason", run.stop_reason.to_string());
    if let StopReason::NumericFailure(msg) = &run.stop_reason {
        push(entries, "stop_detail", msg.clone());
    }
    push(entries, "stop_time", io::fmt_f64(run.stop_time));
    push(entries, "steps", run.steps_taken.to_string());
    push(entries, "fit_c", io::fmt_f64(fit_c));
    push(entries, "mass_drift", io::fmt_f64(run.series.mass_drift()));
    push(entries, "max_kinetic", io::fmt_f64(run.series.max_kinetic()));
}

fn cmd_simulate(args: &CommonArgs) -> Result<()> {
    let config = load_config(args)?;
    let gs_mass = load_gs_mass(&config)?;
    let sim = config.to_simulation()?;
    ensure_out_dir(&args.out)?;

    let mut run = run_trajectory(&sim)?;
    let (fit_c, report) = audit_run(&mut run, gs_mass)?;

    let observables_path = args.out.join("observables.csv");
    io::write_observables_csv(&observables_path, &run.series, &config.emit_pairs())?;
    let checkpoint_path = args.out.join("final.ckpt");
    io::write_checkpoint(&checkpoint_path, &run.u, &run.v, run.stop_time)?;

    let mut entries = Vec::new();
    push(&mut entries, "artifact", "trajectory".to_string());
    stop_entries(&mut entries, &run, fit_c);
    audit_entries(&mut entries, report.as_ref());
    push(&mut entries, "observables", "observables.csv".to_string());
    push(&mut entries, "checkpoint", "final.ckpt".to_string());
    if config.dump_paths {
        match &run.paths {
            Some(paths) => {
                io::write_paths_csv(&args.out.join("paths.csv"), paths)?;
                push(&mut entries, "paths", "paths.csv".to_string());
            }
            None => push(&mut entries, "paths", "none".to_string()),
        }
    }
    entries.extend(config.emit_pairs());
    io::write_metadata(&args.out.join("trajectory.meta"), &entries)?;

    println!(
        "trajectory: {} at t = {} after {} steps; mass drift {:.3e}, fit C {:.3e}; artifacts in {}",
        run.stop_reason,
        io::fmt_f64(run.stop_time),
        run.steps_taken,
        run.series.mass_drift(),
        fit_c,
        args.out.display()
    );
    if let Some(r) = &report {
        if !r.pass {
            return Err(Error::numeric(
                "a trajectory bound audit failed; see trajectory.meta".to_string(),
            ));
        }
    }
    if let StopReason::NumericFailure(msg) = &run.stop_reason {
        return Err(Error::numeric(format!(
            "run stopped early: {msg} (last good state is in final.ckpt)"
        )));
    }
    Ok(())
}

fn cmd_ensemble(args: &CommonArgs) -> Result<()> {
    let config = load_config(args)?;
    let gs_mass = load_gs_mass(&config)?;
    let sim = config.to_simulation()?;
    ensure_out_dir(&args.out)?;

    let mut ensemble = if config.jobs > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.jobs)
            .build()
            .map_err(|e| Error::usage(format!("cannot build a {}-thread pool: {e}", config.jobs)))?;
        pool.install(|| run_ensemble(&sim, config.trajectories))?
    } else {
        run_ensemble(&sim, config.trajectories)?
    };

    let mut rows = String::new();
    let mut failures = 0usize;
    let mut audits_failed = 0usize;
    let mut horizon = 0usize;
    let mut max_mass_drift = 0.0f64;
    let mut max_kinetic = 0.0f64;
    let mut fit_cs = Vec::with_capacity(ensemble.runs.len());
    for (i, run) in ensemble.runs.iter_mut().enumerate() {
        let seed = config.seed.wrapping_add(i as u64);
        let (fit_c, report) = audit_run(run, gs_mass)?;
        fit_cs.push(fit_c);

        let mut member = config.clone();
        member.seed = seed;
        member.trajectories = 1;
        let name = format!("traj-{i:03}.csv");
        io::write_observables_csv(&args.out.join(&name), &run.series, &member.emit_pairs())?;
        if config.dump_paths {
            if let Some(paths) = &run.paths {
                io::write_paths_csv(&args.out.join(format!("traj-{i:03}-paths.csv")), paths)?;
            }
        }

        match run.stop_reason {
            StopReason::Horizon => horizon += 1,
            StopReason::NumericFailure(_) => failures += 1,
            StopReason::BlowupThreshold => {}
        }
        let bounds_cell = match &report {
            None => String::new(),
            Some(r) => {
                if !r.pass {
                    audits_failed += 1;
                }
                flag(r.pass).to_string()
            }
        };
        max_mass_drift = max_mass_drift.max(run.series.mass_drift());
        max_kinetic = max_kinetic.max(run.series.max_kinetic());
        writeln!(
            rows,
            "{i},{seed},{},{},{},{},{},{},{bounds_cell}",
            run.stop_reason,
            io::fmt_f64(run.stop_time),
            run.steps_taken,
            io::fmt_f64(run.series.mass_drift()),
            io::fmt_f64(run.series.max_kinetic()),
            io::fmt_f64(fit_c),
        )
        .expect("string write");
    }

    let mut summary = String::new();
    writeln!(summary, "# {}", io::SUMMARY_SCHEMA).expect("string write");
    for (k, v) in config.emit_pairs() {
        writeln!(summary, "# {k} = {v}").expect("string write");
    }
    writeln!(summary, "{SUMMARY_COLUMNS}").expect("string write");
    summary.push_str(&rows);
    let summary_path = args.out.join("summary.csv");
    let mut file = fs::File::create(&summary_path)?;
    file.write_all(summary.as_bytes())?;

    let n = ensemble.runs.len();
    let mut sorted = fit_cs.clone();
    sorted.sort_by(f64::total_cmp);
    let mut entries = Vec::new();
    push(&mut entries, "artifact", "ensemble".to_string());
    push(&mut entries, "trajectories", n.to_string());
    push(&mut entries, "reached_horizon", horizon.to_string());
    push(
        &mut entries,
        "horizon_fraction",
        io::fmt_f64(horizon as f64 / n as f64),
    );
    push(&mut entries, "numeric_failures", failures.to_string());
    push(&mut entries, "max_mass_drift", io::fmt_f64(max_mass_drift));
    push(&mut entries, "max_kinetic", io::fmt_f64(max_kinetic));
    push(&mut entries, "fit_c_min", io::fmt_f64(sorted[0]));
    push(
        &mut entries,
        "fit_c_median",
        io::fmt_f64(sorted[(n - 1) / 2]),
    );
    push(&mut entries, "fit_c_max", io::fmt_f64(sorted[n - 1]));
    push(
        &mut entries,
        "bounds_audited",
        if gs_mass.is_some() { "on" } else { "off" }.to_string(),
    );
    if gs_mass.is_some() {
        push(&mut entries, "audits_failed", audits_failed.to_string());
    }
    push(&mut entries, "summary", "summary.csv".to_string());
    entries.extend(config.emit_pairs());
    io::write_metadata(&args.out.join("ensemble.meta"), &entries)?;

    println!(
        "ensemble: {horizon}/{n} reached the horizon, {failures} numeric failures; \
         max mass drift {max_mass_drift:.3e}; artifacts in {}",
        args.out.display()
    );
    if failures > 0 {
        return Err(Error::numeric(format!(
            "{failures} of {n} trajectories failed numerically; see summary.csv"
        )));
    }
    if audits_failed > 0 {
        return Err(Error::numeric(format!(
            "{audits_failed} of {n} trajectories failed a bound audit; see summary.csv"
        )));
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<()> {
    let config = load_config(&args.common)?;
    let reports = run_suites(&args.suites, &config)?;
    let mut failed = 0usize;
    for report in &reports {
        print!("{}", report.render());
        if !report.pass() {
            failed += 1;
        }
    }
    if failed > 0 {
        return Err(Error::usage(format!(
            "{failed} of {} suites failed",
            reports.len()
        )));
    }
    Ok(())
}
