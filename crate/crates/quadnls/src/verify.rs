//! Named verification suites. Each suite rebuilds a small fixed experiment
//! and measures identities the solver relies on, reporting measured values
//! against pinned bounds. The command line and the tests share these, so a
//! pass means the same thing everywhere. Suites choose their own grids and
//! models; the caller's config contributes the seed and, for the
//! Gagliardo-Nirenberg audit, an optional ground-state artifact.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::config::ExperimentConfig;
use crate::dynamics::{
    run_trajectory, InitialData, SimulationConfig, Stepper, StopReason, SystemForm,
    TrajectoryResult,
};
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::ground_state::gn_ratio;
use crate::io;
use crate::noise::{BumpSpec, NoiseModel};
use crate::observables::{self, energy_rate_rhs, ObservableSeries};
use crate::radial::{solve_radial_ground_state, DEFAULT_SHOOT_TOL};
use crate::spectral::{inner_product, l2_norm_sq, KahanSum, SpectralEngine};

pub const SUITE_NAMES: &[&str] = &[
    "spectral",
    "cancellation",
    "gn",
    "equivalence",
    "conservation",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    AtMost,
    AtLeast,
}

#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub direction: Direction,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckOutcome>,
}

impl SuiteReport {
    fn new(suite: &str) -> SuiteReport {
        SuiteReport {
            suite: suite.to_string(),
            checks: Vec::new(),
        }
    }

    fn at_most(&mut self, name: &str, measured: f64, bound: f64) {
        self.checks.push(CheckOutcome {
            name: name.to_string(),
            measured,
            bound,
            direction: Direction::AtMost,
            pass: measured.is_finite() && measured <= bound,
        });
    }

    fn at_least(&mut self, name: &str, measured: f64, bound: f64) {
        self.checks.push(CheckOutcome {
            name: name.to_string(),
            measured,
            bound,
            direction: Direction::AtLeast,
            pass: !measured.is_nan() && measured >= bound,
        });
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        writeln!(out, "suite {}: {verdict}", self.suite).expect("string write");
        for c in &self.checks {
            let op = match c.direction {
                Direction::AtMost => "<=",
                Direction::AtLeast => ">=",
            };
            let mark = if c.pass { "pass" } else { "FAIL" };
            writeln!(
                out,
                "  {}: measured {:.3e} {op} {:.3e} {mark}",
                c.name, c.measured, c.bound
            )
            .expect("string write");
        }
        out
    }
}

pub fn run_suite(name: &str, config: &ExperimentConfig) -> Result<SuiteReport> {
    match name {
        "spectral" => spectral_suite(config),
        "cancellation" => cancellation_suite(config),
        "gn" => gn_suite(config),
        "equivalence" => equivalence_suite(config),
        "conservation" => conservation_suite(config),
        other => Err(Error::usage(format!(
            "unknown suite '{other}', available: {}",
            SUITE_NAMES.join(", ")
        ))),
    }
}

/// Run the named suites, or all of them when the list is empty.
pub fn run_suites(names: &[String], config: &ExperimentConfig) -> Result<Vec<SuiteReport>> {
    if names.is_empty() {
        return SUITE_NAMES.iter().map(|n| run_suite(n, config)).collect();
    }
    names.iter().map(|n| run_suite(n, config)).collect()
}

fn rng_for(seed: u64, salt: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed ^ salt)
}

fn normal(rng: &mut ChaCha12Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// White spectral noise restricted to |m| <= max_index on every axis,
/// normalized to unit L2. Keeping the support this far inside the dealias
/// band makes the truncated quadratic products exact, so identity checks
/// on these fields measure the identity and not the truncation.
fn random_subband_field(
    engine: &SpectralEngine,
    grid: Grid,
    max_index: usize,
    rng: &mut ChaCha12Rng,
) -> Result<ComplexField> {
    let n = grid.n();
    let mut hat = vec![Complex64::ZERO; grid.len()];
    grid.for_each_index(|flat, ix| {
        let inside = ix.iter().all(|&i| i.min(n - i) <= max_index);
        if inside {
            hat[flat] = Complex64::new(normal(rng), normal(rng));
        }
    });
    engine.inverse_inplace(&mut hat);
    let f = ComplexField::from_values(grid, hat)?;
    let norm_sq = l2_norm_sq(&f);
    if !(norm_sq.is_finite() && norm_sq > 0.0) {
        return Err(Error::numeric("degenerate random field draw".to_string()));
    }
    Ok(f.scale(Complex64::new(1.0 / norm_sq.sqrt(), 0.0)))
}

/// Smooth localized pair used as initial data by the dynamic suites.
fn smooth_pair(grid: Grid) -> (ComplexField, ComplexField) {
    let u = ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        Complex64::new(0.6, 0.15) * (-r2 / 2.25).exp()
    });
    let v = ComplexField::from_real_fn(grid, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        0.35 * (-r2 / 4.0).exp()
    });
    (u, v)
}

fn relative_gap(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Gateaux derivative of the energy at (y, z) in direction (fy, fz),
/// evaluated with spectral Laplacians and plain quadrature.
fn energy_pairing(
    engine: &SpectralEngine,
    y: &ComplexField,
    z: &ComplexField,
    fy: &ComplexField,
    fz: &ComplexField,
) -> Result<f64> {
    let ly = engine.laplacian(y, -1.0)?;
    let lz = engine.laplacian(z, -1.0)?;
    let mut acc = KahanSum::new();
    for i in 0..y.values().len() {
        let yv = y.values()[i];
        let zv = z.values()[i];
        let fyv = fy.values()[i];
        let fzv = fz.values()[i];
        let kinetic = 2.0 * (ly.values()[i] * fyv.conj()).re + (lz.values()[i] * fzv.conj()).re;
        let potential = (fzv * yv.conj() * yv.conj()).re + 2.0 * (zv * yv.conj() * fyv.conj()).re;
        acc.add(kinetic - 2.0 * potential);
    }
    Ok(acc.value() * y.grid().weight())
}

fn spectral_suite(config: &ExperimentConfig) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("spectral");
    let grid = config.grid;
    let engine = SpectralEngine::new(grid);
    let mut rng = rng_for(config.seed, 0x5bec_7a11);
    let white = |rng: &mut ChaCha12Rng| -> Result<ComplexField> {
        let values = (0..grid.len())
            .map(|_| Complex64::new(normal(rng), normal(rng)))
            .collect();
        ComplexField::from_values(grid, values)
    };

    let u = white(&mut rng)?;

    // transform pair is the identity
    let mut v = u.values().to_vec();
    engine.forward_inplace(&mut v);
    engine.inverse_inplace(&mut v);
    let roundtrip = u
        .values()
        .iter()
        .zip(&v)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0f64, f64::max)
        / u.max_abs();
    report.at_most("transform_roundtrip", roundtrip, 1e-12);

    // quadrature norm equals the spectral norm (the transform is unitary)
    let mut hat = u.values().to_vec();
    engine.forward_inplace(&mut hat);
    let spectral_norm: f64 = hat.iter().map(|c| c.norm_sqr()).sum::<f64>() * grid.weight();
    report.at_most(
        "quadrature_vs_spectral_norm",
        relative_gap(l2_norm_sq(&u), spectral_norm),
        1e-12,
    );

    // a lattice plane wave is a Laplacian eigenfunction
    let k = 2.0 * std::f64::consts::PI * 3.0 / grid.length();
    let wave = ComplexField::from_fn(grid, |x| Complex64::cis(k * x[0]));
    let lap = engine.laplacian(&wave, 1.0)?;
    let eig_err = lap
        .values()
        .iter()
        .zip(wave.values())
        .map(|(l, w)| (l + k * k * w).norm())
        .fold(0.0f64, f64::max)
        / (k * k);
    report.at_most("plane_wave_eigenvalue", eig_err, 1e-10);

    // differentiation is skew-adjoint
    let a = white(&mut rng)?;
    let b = white(&mut rng)?;
    let ga = &engine.gradient(&a)?[0];
    let gb = &engine.gradient(&b)?[0];
    let skew = (inner_product(ga, &b)? + inner_product(&a, gb)?).norm()
        / (l2_norm_sq(ga).sqrt() * l2_norm_sq(&b).sqrt()).max(1e-8);
    report.at_most("derivative_skew_adjoint", skew, 1e-10);

    // gradient route and Laplacian route agree on the kinetic sum for
    // Nyquist-free fields
    let ud = engine.band_limit(&u, 2.0 / 3.0)?;
    let grad_route: f64 = engine
        .gradient(&ud)?
        .iter()
        .map(l2_norm_sq)
        .sum();
    let lap_route = inner_product(&engine.laplacian(&ud, -1.0)?, &ud)?.re;
    report.at_most(
        "kinetic_route_agreement",
        relative_gap(grad_route, lap_route),
        1e-10,
    );

    Ok(report)
}

fn cancellation_bumps(d: usize) -> Vec<BumpSpec> {
    let center = |x0: f64| {
        let mut c = vec![0.0; d];
        c[0] = x0;
        c
    };
    vec![
        BumpSpec {
            amplitude: 0.7,
            center: center(1.0),
            sigma: 1.05,
        },
        BumpSpec {
            amplitude: 0.45,
            center: center(-1.0),
            sigma: 0.95,
        },
    ]
}

/// The energy-rate identity: the Gateaux pairing of the energy with the
/// assembled right-hand side must match the closed form in which the
/// unbounded transport terms have already cancelled.
fn cancellation_suite(config: &ExperimentConfig) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("cancellation");
    let mut rng = rng_for(config.seed, 0xca9c_e11a);
    let mut worst = 0.0f64;
    let mut pairs = 0usize;
    for d in [1usize, 2] {
        let grid = Grid::new(d, 64, 16.0)?;
        let engine = SpectralEngine::new(grid);
        let model = NoiseModel::gaussian(grid, &cancellation_bumps(d))?;
        let stepper = Stepper::new(grid, true);
        for _ in 0..26 {
            let y = random_subband_field(&engine, grid, 8, &mut rng)?;
            let z = random_subband_field(&engine, grid, 8, &mut rng)?;
            let b: Vec<f64> = (0..model.len()).map(|_| normal(&mut rng)).collect();
            let coef = stepper.stage_coefficients(&model, &b)?;
            let mut fy = Vec::new();
            let mut fz = Vec::new();
            stepper.rescaled_rhs(y.values(), z.values(), &coef, &mut fy, &mut fz);
            let fy = ComplexField::from_values(grid, fy)?;
            let fz = ComplexField::from_values(grid, fz)?;
            let lhs = energy_pairing(&engine, &y, &z, &fy, &fz)?;
            let rhs = energy_rate_rhs(&y, &z, &model, &b)?;
            worst = worst.max(relative_gap(lhs, rhs));
            pairs += 1;
        }
    }
    report.at_least("field_pairs", pairs as f64, 50.0);
    report.at_most("max_identity_error", worst, 1e-8);
    Ok(report)
}

/// Reference fields for the sharp-constant audit: either loaded from the
/// artifact the config names, or solved fresh and lifted.
fn reference_ground_state(
    artifact: Option<&Path>,
    audit_grid: Grid,
) -> Result<(ComplexField, ComplexField)> {
    let Some(path) = artifact else {
        let radial = solve_radial_ground_state(DEFAULT_SHOOT_TOL)?;
        return Ok(radial.profile.lift_to_grid(audit_grid));
    };
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_path_buf()));
    }
    let entries = io::read_metadata(path)?;
    let context = "ground-state metadata";
    let method = io::lookup(&entries, "method")
        .ok_or_else(|| Error::parse(context, "missing key 'method'"))?
        .to_string();
    let profile_name = io::lookup(&entries, "profile")
        .ok_or_else(|| Error::parse(context, "missing key 'profile'"))?
        .to_string();
    let profile_path = path.parent().unwrap_or(Path::new(".")).join(profile_name);
    if !profile_path.exists() {
        return Err(Error::MissingArtifact(profile_path));
    }
    match method.as_str() {
        "shooting" => {
            let (profile, _meta) = io::read_radial_profile(&profile_path)?;
            Ok(profile.lift_to_grid(audit_grid))
        }
        "flow" => {
            let (u, v, _t) = io::read_checkpoint(&profile_path)?;
            if u.grid().d() != 4 {
                return Err(Error::usage(format!(
                    "the sharp-constant audit needs a d = 4 reference, artifact has d = {}",
                    u.grid().d()
                )));
            }
            Ok((u, v))
        }
        other => Err(Error::parse(
            context,
            format!("unknown method '{other}', expected 'flow' or 'shooting'"),
        )),
    }
}

/// Sharp-constant audit: the reference state sits at ratio one, random
/// fields stay below the bound.
fn gn_suite(config: &ExperimentConfig) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("gn");
    let audit_grid = Grid::new(4, 32, 10.5)?;
    let (gs_u, gs_v) = reference_ground_state(config.gs_artifact.as_deref(), audit_grid)?;
    let gs_mass = observables::mass(&gs_u, &gs_v)?;
    let gs_ratio = gn_ratio(&gs_u, &gs_v, gs_mass)?;
    report.at_most("reference_ratio_gap", (gs_ratio - 1.0).abs(), 1e-3);

    let sample_grid = Grid::new(4, 16, 10.5)?;
    let engine = SpectralEngine::new(sample_grid);
    let mut rng = rng_for(config.seed, 0x69ba_11ad);
    let mut max_ratio = f64::NEG_INFINITY;
    for _ in 0..100 {
        let f = random_subband_field(&engine, sample_grid, 2, &mut rng)?;
        let g = random_subband_field(&engine, sample_grid, 2, &mut rng)?;
        max_ratio = max_ratio.max(gn_ratio(&f, &g, gs_mass)?);
    }
    report.at_most("random_field_ratio_max", max_ratio, 1.0 + 1e-6);
    Ok(report)
}

fn require_horizon(run: &TrajectoryResult, what: &str) -> Result<()> {
    if run.stop_reason != StopReason::Horizon {
        return Err(Error::numeric(format!(
            "{what} stopped early ({}) at t = {:.4}",
            run.stop_reason, run.stop_time
        )));
    }
    Ok(())
}

/// The two stochastic forms describe the same field: the direct solution
/// must match the rescaled one composed with the path-dependent phase, and
/// the gap must shrink when the step is halved.
fn equivalence_suite(config: &ExperimentConfig) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("equivalence");
    let grid = Grid::new(1, 256, 16.0)?;
    let model = NoiseModel::gaussian(
        grid,
        &[BumpSpec {
            amplitude: 0.5,
            center: vec![0.0],
            sigma: 1.0,
        }],
    )?;
    let (u0, v0) = smooth_pair(grid);
    let horizon = 0.5;
    let path_dt = 1e-3;

    let mut errors = Vec::new();
    for dt in [1e-3, 5e-4] {
        let base = SimulationConfig {
            system: SystemForm::Direct,
            grid,
            noise: model.clone(),
            horizon,
            dt,
            initial: InitialData::Fields {
                u: u0.clone(),
                v: v0.clone(),
            },
            seed: config.seed,
            blowup_threshold: None,
            cadence: 100,
            nonlinearity_on: true,
            path_dt: Some(path_dt),
        };
        let direct = run_trajectory(&base)?;
        let rescaled = run_trajectory(&SimulationConfig {
            system: SystemForm::Rescaled,
            ..base
        })?;
        require_horizon(&direct, "direct run")?;
        require_horizon(&rescaled, "rescaled run")?;

        let paths = rescaled
            .paths
            .as_ref()
            .expect("stochastic runs keep their paths");
        let b = paths.values_at_time(horizon)?;
        let mut num = KahanSum::new();
        let mut den = KahanSum::new();
        for i in 0..grid.len() {
            let theta: f64 = (0..model.len()).map(|k| model.phi(k)[i] * b[k]).sum();
            let gauged_u = Complex64::cis(theta) * rescaled.u.values()[i];
            let gauged_v = Complex64::cis(2.0 * theta) * rescaled.v.values()[i];
            num.add((direct.u.values()[i] - gauged_u).norm_sqr());
            num.add((direct.v.values()[i] - gauged_v).norm_sqr());
            den.add(direct.u.values()[i].norm_sqr());
            den.add(direct.v.values()[i].norm_sqr());
        }
        errors.push((num.value() / den.value()).sqrt());
    }
    report.at_most("gauge_gap", errors[0], 5e-3);
    report.at_most("gauge_gap_halved_step_ratio", errors[1] / errors[0], 0.75);
    Ok(report)
}

fn series_drift(series: &ObservableSeries, pick: impl Fn(usize) -> f64) -> f64 {
    let first = pick(0);
    let scale = first.abs().max(1e-8);
    (0..series.len())
        .map(|i| (pick(i) - first).abs() / scale)
        .fold(0.0, f64::max)
}

fn state_distance(a: &TrajectoryResult, b: &TrajectoryResult) -> Result<f64> {
    let du = a.u.sub(&b.u)?;
    let dv = a.v.sub(&b.v)?;
    Ok((l2_norm_sq(&du) + l2_norm_sq(&dv)).sqrt())
}

/// Conservation audits with convergence orders: splitting preserves mass
/// to roundoff and energy at second order; the explicit stochastic stepper
/// converges at fourth order and keeps mass flat.
fn conservation_suite(config: &ExperimentConfig) -> Result<SuiteReport> {
    let mut report = SuiteReport::new("conservation");
    let grid = Grid::new(2, 64, 16.0)?;
    let (u0, v0) = smooth_pair(grid);
    let horizon = 0.24;

    let deterministic = |dt: f64| -> Result<TrajectoryResult> {
        let run = run_trajectory(&SimulationConfig {
            system: SystemForm::Deterministic,
            grid,
            noise: NoiseModel::empty(grid),
            horizon,
            dt,
            initial: InitialData::Fields {
                u: u0.clone(),
                v: v0.clone(),
            },
            seed: config.seed,
            blowup_threshold: None,
            cadence: 10,
            nonlinearity_on: true,
            path_dt: None,
        })?;
        require_horizon(&run, "splitting run")?;
        Ok(run)
    };
    let coarse = deterministic(1e-3)?;
    let fine = deterministic(5e-4)?;
    let mass_drift = series_drift(&coarse.series, |i| coarse.series.records[i].mass);
    let energy_coarse = series_drift(&coarse.series, |i| coarse.series.records[i].energy);
    let energy_fine = series_drift(&fine.series, |i| fine.series.records[i].energy);
    report.at_most("splitting_mass_drift", mass_drift, 1e-8);
    report.at_most("splitting_energy_drift", energy_coarse, 1e-5);
    let energy_order = if energy_fine < 1e-12 {
        f64::INFINITY
    } else {
        energy_coarse / energy_fine
    };
    report.at_least("splitting_energy_halving_gain", energy_order, 3.0);

    let model = NoiseModel::gaussian(
        grid,
        &[BumpSpec {
            amplitude: 0.5,
            center: vec![-1.0, 0.0],
            sigma: 1.05,
        }],
    )?;
    let explicit = |dt: f64| -> Result<TrajectoryResult> {
        let run = run_trajectory(&SimulationConfig {
            system: SystemForm::Rescaled,
            grid,
            noise: model.clone(),
            horizon,
            dt,
            initial: InitialData::Fields {
                u: u0.clone(),
                v: v0.clone(),
            },
            seed: config.seed,
            blowup_threshold: None,
            cadence: 10,
            nonlinearity_on: true,
            path_dt: Some(8e-3),
        })?;
        require_horizon(&run, "explicit run")?;
        Ok(run)
    };
    let r8 = explicit(8e-3)?;
    let r4 = explicit(4e-3)?;
    let r2 = explicit(2e-3)?;
    let mass_drift_explicit = series_drift(&r2.series, |i| r2.series.records[i].mass);
    report.at_most("explicit_mass_drift", mass_drift_explicit, 1e-6);
    let d_coarse = state_distance(&r8, &r4)?;
    let d_fine = state_distance(&r4, &r2)?;
    let step_order = if d_fine < 1e-12 {
        f64::INFINITY
    } else {
        d_coarse / d_fine
    };
    report.at_least("explicit_step_halving_gain", step_order, 8.0);
    Ok(report)
}
