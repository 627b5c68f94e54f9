//! Time integration of the coupled pair in its three forms: deterministic,
//! rescaled with transport coefficients driven by a Brownian lattice, and
//! direct with a multiplicative pointwise noise factor. One trajectory is
//! sequential in time; ensembles fan out over seeds and merge by index.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::ground_state::{solve_ground_state, GroundStateMethod};
use crate::noise::{sample_paths, BrownianPaths, NoiseModel};
use crate::observables::{self, ObservableSeries};
use crate::radial::solve_radial_ground_state;
use crate::spectral::SpectralEngine;

/// band fraction kept by the dealiasing projection
pub const DEALIAS_FRACTION: f64 = 2.0 / 3.0;
/// dt cap coefficient for the explicit spectral integrator: dt <= c h^2 / d,
/// about half the classical stability limit of the dealiased Laplacian
pub const RK4_CAP_COEFFICIENT: f64 = 0.35;
/// per-step amplitude guard; beyond this the state is treated as lost
pub const OVERFLOW_GUARD: f64 = 1e8;
/// default blow-up threshold as a multiple of the initial H1 sum
pub const DEFAULT_BLOWUP_FACTOR: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SystemForm {
    Deterministic,
    Rescaled,
    Direct,
}

impl std::fmt::Display for SystemForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SystemForm::Deterministic => "deterministic",
            SystemForm::Rescaled => "rescaled",
            SystemForm::Direct => "direct",
        })
    }
}

impl std::str::FromStr for SystemForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<SystemForm> {
        match s {
            "deterministic" => Ok(SystemForm::Deterministic),
            "rescaled" => Ok(SystemForm::Rescaled),
            "direct" => Ok(SystemForm::Direct),
            other => Err(Error::parse(
                "system form",
                format!("unknown value '{other}', expected deterministic, rescaled, or direct"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldSlot {
    U,
    V,
}

/// One Gaussian pulse added to a component: amplitude * exp(-|x-c|^2 / w^2)
/// with an optional plane-wave factor exp(i k.x).
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPulse {
    pub slot: FieldSlot,
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub width: f64,
    pub wave: Vec<f64>,
}

#[derive(Clone, Debug)]
pub enum InitialData {
    Zero,
    /// s.(phi, psi) with s fixed so the projected pair carries
    /// fraction * reference ground-state mass
    GroundStateFraction { fraction: f64 },
    /// superposed pulses, optionally normalized to a target mass after
    /// projection
    Pulses {
        pulses: Vec<GaussianPulse>,
        target_mass: Option<f64>,
    },
    /// explicit fields, e.g. loaded from a checkpoint
    Fields { u: ComplexField, v: ComplexField },
}

#[derive(Clone, Debug)]
pub struct SimulationConfig {
    pub system: SystemForm,
    pub grid: Grid,
    pub noise: NoiseModel,
    pub horizon: f64,
    pub dt: f64,
    pub initial: InitialData,
    pub seed: u64,
    /// None selects DEFAULT_BLOWUP_FACTOR times the initial H1 sum
    pub blowup_threshold: Option<f64>,
    /// record observables every this many steps
    pub cadence: usize,
    /// test switch: false drops the quadratic terms from every stepper
    pub nonlinearity_on: bool,
    /// Brownian lattice spacing; None uses dt
    pub path_dt: Option<f64>,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::usage(format!(
                "time step must be positive, got {}",
                self.dt
            )));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(Error::usage(format!(
                "horizon {} must cover at least one step of {}",
                self.horizon, self.dt
            )));
        }
        if self.cadence == 0 {
            return Err(Error::usage("observable cadence must be at least 1"));
        }
        self.grid.assert_same(self.noise.grid(), "simulation noise model")?;
        if let Some(th) = self.blowup_threshold {
            if !(th.is_finite() && th > 0.0) {
                return Err(Error::usage(format!(
                    "blow-up threshold must be positive, got {th}"
                )));
            }
        }
        if let Some(pdt) = self.path_dt {
            if !(pdt.is_finite() && pdt > 0.0) {
                return Err(Error::usage(format!(
                    "Brownian lattice spacing must be positive, got {pdt}"
                )));
            }
        }
        if self.system == SystemForm::Rescaled {
            let cap = rk4_dt_cap(self.grid);
            if self.dt > cap {
                return Err(Error::usage(format!(
                    "dt {} exceeds the explicit stability cap {cap:.3e} for this grid; reduce dt",
                    self.dt
                )));
            }
        }
        Ok(())
    }
}

/// Largest stable dt for the explicit spectral integrator on this grid.
pub fn rk4_dt_cap(grid: Grid) -> f64 {
    RK4_CAP_COEFFICIENT * grid.h() * grid.h() / grid.d() as f64
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StopReason {
    Horizon,
    BlowupThreshold,
    NumericFailure(String),
}

impl std::fmt::Display for StopReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StopReason::Horizon => f.write_str("horizon"),
            StopReason::BlowupThreshold => f.write_str("blowup_threshold"),
            StopReason::NumericFailure(_) => f.write_str("numeric_failure"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryResult {
    pub u: ComplexField,
    pub v: ComplexField,
    pub series: ObservableSeries,
    pub stop_time: f64,
    pub stop_reason: StopReason,
    pub steps_taken: usize,
    /// Brownian lattice actually used; None for deterministic runs
    pub paths: Option<BrownianPaths>,
}

#[derive(Debug)]
pub struct EnsembleResult {
    pub runs: Vec<TrajectoryResult>,
}

impl EnsembleResult {
    pub fn count(&self, pred: impl Fn(&StopReason) -> bool) -> usize {
        self.runs.iter().filter(|r| pred(&r.stop_reason)).count()
    }

    pub fn horizon_count(&self) -> usize {
        self.count(|r| matches!(r, StopReason::Horizon))
    }
}

/// Plan-caching stepper for all three system forms. The state it advances is
/// kept band-limited: initial data is projected once and every nonlinear
/// product is projected before it feeds back.
pub struct Stepper {
    engine: SpectralEngine,
    grid: Grid,
    k2: Vec<f64>,
    nonlinearity_on: bool,
    strang_dt: f64,
    mul_u: Vec<Complex64>,
    mul_v: Vec<Complex64>,
}

impl Stepper {
    pub fn new(grid: Grid, nonlinearity_on: bool) -> Stepper {
        let engine = SpectralEngine::new(grid);
        let k2 = engine.k_squared();
        Stepper {
            engine,
            grid,
            k2,
            nonlinearity_on,
            strang_dt: f64::NAN,
            mul_u: Vec::new(),
            mul_v: Vec::new(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Project a field onto the dealiased band.
    pub fn project(&self, f: &ComplexField) -> Result<ComplexField> {
        self.grid.assert_same(f.grid(), "projection input")?;
        self.engine.band_limit(f, DEALIAS_FRACTION)
    }

    fn ensure_strang(&mut self, dt: f64) {
        if self.strang_dt == dt {
            return;
        }
        // half-step propagators: u carries the full Laplacian, v half of it
        self.mul_u = self
            .k2
            .iter()
            .map(|&k2| Complex64::from_polar(1.0, -k2 * dt / 2.0))
            .collect();
        self.mul_v = self
            .k2
            .iter()
            .map(|&k2| Complex64::from_polar(1.0, -k2 * dt / 4.0))
            .collect();
        self.strang_dt = dt;
    }

    fn half_linear(&self, u: &mut [Complex64], v: &mut [Complex64]) {
        self.engine.forward_inplace(u);
        self.engine.forward_inplace(v);
        for i in 0..u.len() {
            u[i] *= self.mul_u[i];
            v[i] *= self.mul_v[i];
        }
        self.engine.inverse_inplace(u);
        self.engine.inverse_inplace(v);
    }

    fn nonlinear_inplace(&self, u: &mut [Complex64], v: &mut [Complex64], h: f64) -> Result<()> {
        let rhs = |a: Complex64, b: Complex64| {
            (
                Complex64::new(0.0, 2.0) * b * a.conj(),
                Complex64::new(0.0, 1.0) * a * a,
            )
        };
        for i in 0..u.len() {
            let (a0, b0) = (u[i], v[i]);
            let (k1a, k1b) = rhs(a0, b0);
            let (k2a, k2b) = rhs(a0 + 0.5 * h * k1a, b0 + 0.5 * h * k1b);
            let (k3a, k3b) = rhs(a0 + 0.5 * h * k2a, b0 + 0.5 * h * k2b);
            let (k4a, k4b) = rhs(a0 + h * k3a, b0 + h * k3b);
            let a = a0 + h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            let b = b0 + h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
            let worst = a.norm_sqr().max(b.norm_sqr());
            if !worst.is_finite() || worst > OVERFLOW_GUARD * OVERFLOW_GUARD {
                return Err(Error::numeric(format!(
                    "nonlinear substep overflowed at grid index {i}"
                )));
            }
            u[i] = a;
            v[i] = b;
        }
        Ok(())
    }

    fn strang_inplace(
        &mut self,
        u: &mut Vec<Complex64>,
        v: &mut Vec<Complex64>,
        dt: f64,
    ) -> Result<()> {
        self.ensure_strang(dt);
        self.half_linear(u, v);
        if self.nonlinearity_on {
            self.nonlinear_inplace(u, v, dt)?;
            // the pointwise ODE populates modes beyond the band; drop them
            // before they feed the next product
            self.engine.forward_inplace(u);
            self.engine.forward_inplace(v);
            self.engine.project_band_spectral(u, DEALIAS_FRACTION);
            self.engine.project_band_spectral(v, DEALIAS_FRACTION);
            for i in 0..u.len() {
                u[i] *= self.mul_u[i];
                v[i] *= self.mul_v[i];
            }
            self.engine.inverse_inplace(u);
            self.engine.inverse_inplace(v);
        } else {
            self.half_linear(u, v);
        }
        Ok(())
    }

    fn direct_inplace(
        &mut self,
        u: &mut Vec<Complex64>,
        v: &mut Vec<Complex64>,
        model: &NoiseModel,
        db: &[f64],
        dt: f64,
    ) -> Result<()> {
        if db.len() != model.len() {
            return Err(Error::usage(format!(
                "got {} Brownian increments for {} bumps",
                db.len(),
                model.len()
            )));
        }
        self.strang_inplace(u, v, dt)?;
        if model.is_empty() {
            return Ok(());
        }
        // exact solution of the linear noise SDE over the step: the damping
        // term is the Ito correction of this exponential, so the factor is
        // unimodular and pathwise mass-preserving
        let mut theta = vec![0.0f64; u.len()];
        for (k, &dbk) in db.iter().enumerate() {
            let phi = model.phi(k);
            for i in 0..theta.len() {
                theta[i] += phi[i] * dbk;
            }
        }
        for i in 0..u.len() {
            u[i] *= Complex64::from_polar(1.0, theta[i]);
            v[i] *= Complex64::from_polar(1.0, 2.0 * theta[i]);
        }
        Ok(())
    }

    pub(crate) fn stage_coefficients(
        &self,
        model: &NoiseModel,
        b: &[f64],
    ) -> Result<StageCoefficients> {
        if model.is_empty() {
            return Ok(StageCoefficients {
                beta: Vec::new(),
                cy: Vec::new(),
                cz: Vec::new(),
            });
        }
        let q = model.eval_q(b)?;
        let r = model.eval_r(b)?;
        let len = self.grid.len();
        let d = self.grid.d();
        let mut beta = vec![vec![0.0f64; len]; d];
        for j in 0..d {
            for i in 0..len {
                beta[j][i] = 2.0 * q[j][i];
            }
        }
        let mut cy = Vec::with_capacity(len);
        let mut cz = Vec::with_capacity(len);
        for i in 0..len {
            let qq: f64 = (0..d).map(|j| q[j][i] * q[j][i]).sum();
            cy.push(Complex64::new(r[i], qq));
            cz.push(Complex64::new(r[i], 2.0 * qq));
        }
        Ok(StageCoefficients { beta, cy, cz })
    }

    /// dy/dt = i lap y - beta.grad y - (R + iQ) y + 2 i z conj(y)
    /// dz/dt = i lap z / 2 - beta.grad z - (R + 2iQ) z + i y^2
    /// followed by projection onto the band (Galerkin right-hand side).
    pub(crate) fn rescaled_rhs(
        &self,
        y: &[Complex64],
        z: &[Complex64],
        coef: &StageCoefficients,
        out_y: &mut Vec<Complex64>,
        out_z: &mut Vec<Complex64>,
    ) {
        let len = y.len();
        let d = self.grid.d();
        let mut yh = y.to_vec();
        let mut zh = z.to_vec();
        self.engine.forward_inplace(&mut yh);
        self.engine.forward_inplace(&mut zh);

        let mut lap_y = vec![Complex64::ZERO; len];
        self.engine.apply_laplacian_spectral(&yh, &mut lap_y, 1.0);
        self.engine.inverse_inplace(&mut lap_y);
        let mut lap_z = vec![Complex64::ZERO; len];
        self.engine.apply_laplacian_spectral(&zh, &mut lap_z, 0.5);
        self.engine.inverse_inplace(&mut lap_z);

        let transported = !coef.beta.is_empty();
        let mut grad_y = Vec::new();
        let mut grad_z = Vec::new();
        if transported {
            for axis in 0..d {
                let mut gy = vec![Complex64::ZERO; len];
                self.engine.apply_gradient_spectral(&yh, &mut gy, axis);
                self.engine.inverse_inplace(&mut gy);
                grad_y.push(gy);
                let mut gz = vec![Complex64::ZERO; len];
                self.engine.apply_gradient_spectral(&zh, &mut gz, axis);
                self.engine.inverse_inplace(&mut gz);
                grad_z.push(gz);
            }
        }

        out_y.clear();
        out_z.clear();
        let i_unit = Complex64::new(0.0, 1.0);
        for idx in 0..len {
            let mut fy = i_unit * lap_y[idx];
            let mut fz = i_unit * lap_z[idx];
            if transported {
                for axis in 0..d {
                    fy -= coef.beta[axis][idx] * grad_y[axis][idx];
                    fz -= coef.beta[axis][idx] * grad_z[axis][idx];
                }
                fy -= coef.cy[idx] * y[idx];
                fz -= coef.cz[idx] * z[idx];
            }
            if self.nonlinearity_on {
                fy += Complex64::new(0.0, 2.0) * z[idx] * y[idx].conj();
                fz += i_unit * y[idx] * y[idx];
            }
            out_y.push(fy);
            out_z.push(fz);
        }
        self.engine.forward_inplace(out_y);
        self.engine.forward_inplace(out_z);
        self.engine.project_band_spectral(out_y, DEALIAS_FRACTION);
        self.engine.project_band_spectral(out_z, DEALIAS_FRACTION);
        self.engine.inverse_inplace(out_y);
        self.engine.inverse_inplace(out_z);
    }

    fn rescaled_inplace(
        &mut self,
        y: &mut Vec<Complex64>,
        z: &mut Vec<Complex64>,
        model: &NoiseModel,
        paths: &BrownianPaths,
        t: f64,
        dt: f64,
    ) -> Result<()> {
        let cap = rk4_dt_cap(self.grid);
        if dt > cap * (1.0 + 1e-12) {
            return Err(Error::usage(format!(
                "dt {dt} exceeds the explicit stability cap {cap:.3e}; reduce dt"
            )));
        }
        let coef_0 = self.stage_coefficients(model, &paths.values_at_time(t)?)?;
        let coef_m = self.stage_coefficients(model, &paths.values_at_time(t + 0.5 * dt)?)?;
        let coef_1 = self.stage_coefficients(model, &paths.values_at_time(t + dt)?)?;

        let len = y.len();
        let mut k1y = Vec::with_capacity(len);
        let mut k1z = Vec::with_capacity(len);
        self.rescaled_rhs(y, z, &coef_0, &mut k1y, &mut k1z);

        let mut sy: Vec<Complex64> = (0..len).map(|i| y[i] + 0.5 * dt * k1y[i]).collect();
        let mut sz: Vec<Complex64> = (0..len).map(|i| z[i] + 0.5 * dt * k1z[i]).collect();
        let mut k2y = Vec::with_capacity(len);
        let mut k2z = Vec::with_capacity(len);
        self.rescaled_rhs(&sy, &sz, &coef_m, &mut k2y, &mut k2z);

        for i in 0..len {
            sy[i] = y[i] + 0.5 * dt * k2y[i];
            sz[i] = z[i] + 0.5 * dt * k2z[i];
        }
        let mut k3y = Vec::with_capacity(len);
        let mut k3z = Vec::with_capacity(len);
        self.rescaled_rhs(&sy, &sz, &coef_m, &mut k3y, &mut k3z);

        for i in 0..len {
            sy[i] = y[i] + dt * k3y[i];
            sz[i] = z[i] + dt * k3z[i];
        }
        let mut k4y = Vec::with_capacity(len);
        let mut k4z = Vec::with_capacity(len);
        self.rescaled_rhs(&sy, &sz, &coef_1, &mut k4y, &mut k4z);

        let sixth = dt / 6.0;
        let mut worst = 0.0f64;
        for i in 0..len {
            y[i] += sixth * (k1y[i] + 2.0 * k2y[i] + 2.0 * k3y[i] + k4y[i]);
            z[i] += sixth * (k1z[i] + 2.0 * k2z[i] + 2.0 * k3z[i] + k4z[i]);
            worst = worst.max(y[i].norm_sqr()).max(z[i].norm_sqr());
        }
        if !worst.is_finite() || worst > OVERFLOW_GUARD * OVERFLOW_GUARD {
            return Err(Error::numeric(format!(
                "explicit step overflowed (amplitude {:.3e}); reduce dt",
                worst.sqrt()
            )));
        }
        Ok(())
    }
}

pub(crate) struct StageCoefficients {
    pub(crate) beta: Vec<Vec<f64>>,
    pub(crate) cy: Vec<Complex64>,
    pub(crate) cz: Vec<Complex64>,
}

/// One classical RK4 step of the pointwise ODE pair u' = 2i v conj(u),
/// v' = i u^2 at every grid point.
pub fn nonlinear_substep(
    u: &ComplexField,
    v: &ComplexField,
    h: f64,
) -> Result<(ComplexField, ComplexField)> {
    u.grid().assert_same(v.grid(), "nonlinear substep")?;
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::usage(format!("substep size must be positive, got {h}")));
    }
    let grid = *u.grid();
    let stepper = Stepper::new(grid, true);
    let mut uv = u.values().to_vec();
    let mut vv = v.values().to_vec();
    stepper.nonlinear_inplace(&mut uv, &mut vv, h)?;
    Ok((
        ComplexField::from_values(grid, uv)?,
        ComplexField::from_values(grid, vv)?,
    ))
}

/// Strang step of the deterministic system: exact linear half steps around
/// the pointwise nonlinear substep, dealiased.
pub fn step_deterministic(
    u: &ComplexField,
    v: &ComplexField,
    dt: f64,
) -> Result<(ComplexField, ComplexField)> {
    let mut stepper = Stepper::new(*u.grid(), true);
    stepper.deterministic_step(u, v, dt)
}

/// RK4 method-of-lines step of the rescaled system with coefficients
/// interpolated from the Brownian lattice at the internal stage times.
pub fn step_rescaled(
    y: &ComplexField,
    z: &ComplexField,
    model: &NoiseModel,
    paths: &BrownianPaths,
    t: f64,
    dt: f64,
) -> Result<(ComplexField, ComplexField)> {
    let mut stepper = Stepper::new(*y.grid(), true);
    stepper.rescaled_step(y, z, model, paths, t, dt)
}

/// Deterministic Strang step followed by the exact pointwise noise factor.
pub fn step_direct(
    u: &ComplexField,
    v: &ComplexField,
    model: &NoiseModel,
    db: &[f64],
    dt: f64,
) -> Result<(ComplexField, ComplexField)> {
    let mut stepper = Stepper::new(*u.grid(), true);
    stepper.direct_step(u, v, model, db, dt)
}

impl Stepper {
    pub fn deterministic_step(
        &mut self,
        u: &ComplexField,
        v: &ComplexField,
        dt: f64,
    ) -> Result<(ComplexField, ComplexField)> {
        self.check_step_inputs(u, v, dt)?;
        let mut uv = u.values().to_vec();
        let mut vv = v.values().to_vec();
        self.strang_inplace(&mut uv, &mut vv, dt)?;
        self.wrap(uv, vv)
    }

    pub fn rescaled_step(
        &mut self,
        y: &ComplexField,
        z: &ComplexField,
        model: &NoiseModel,
        paths: &BrownianPaths,
        t: f64,
        dt: f64,
    ) -> Result<(ComplexField, ComplexField)> {
        self.check_step_inputs(y, z, dt)?;
        self.grid.assert_same(model.grid(), "rescaled step model")?;
        let mut yv = y.values().to_vec();
        let mut zv = z.values().to_vec();
        self.rescaled_inplace(&mut yv, &mut zv, model, paths, t, dt)?;
        self.wrap(yv, zv)
    }

    pub fn direct_step(
        &mut self,
        u: &ComplexField,
        v: &ComplexField,
        model: &NoiseModel,
        db: &[f64],
        dt: f64,
    ) -> Result<(ComplexField, ComplexField)> {
        self.check_step_inputs(u, v, dt)?;
        self.grid.assert_same(model.grid(), "direct step model")?;
        let mut uv = u.values().to_vec();
        let mut vv = v.values().to_vec();
        self.direct_inplace(&mut uv, &mut vv, model, db, dt)?;
        self.wrap(uv, vv)
    }

    fn check_step_inputs(&self, u: &ComplexField, v: &ComplexField, dt: f64) -> Result<()> {
        self.grid.assert_same(u.grid(), "step input")?;
        u.grid().assert_same(v.grid(), "step input pair")?;
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::usage(format!("step size must be positive, got {dt}")));
        }
        Ok(())
    }

    fn wrap(&self, u: Vec<Complex64>, v: Vec<Complex64>) -> Result<(ComplexField, ComplexField)> {
        Ok((
            ComplexField::from_values(self.grid, u)?,
            ComplexField::from_values(self.grid, v)?,
        ))
    }
}

/// Construct and band-project the configured initial pair.
pub fn initial_fields(config: &SimulationConfig) -> Result<(ComplexField, ComplexField)> {
    let grid = config.grid;
    let stepper = Stepper::new(grid, true);
    match &config.initial {
        InitialData::Zero => Ok((ComplexField::zeros(grid), ComplexField::zeros(grid))),
        InitialData::Fields { u, v } => {
            grid.assert_same(u.grid(), "initial data")?;
            grid.assert_same(v.grid(), "initial data")?;
            u.check_finite("initial u")?;
            v.check_finite("initial v")?;
            Ok((stepper.project(u)?, stepper.project(v)?))
        }
        InitialData::GroundStateFraction { fraction } => {
            if !(fraction.is_finite() && *fraction > 0.0) {
                return Err(Error::usage(format!(
                    "ground-state mass fraction must be positive, got {fraction}"
                )));
            }
            let (phi, psi, reference_mass) = if grid.d() == 4 {
                let radial = solve_radial_ground_state(crate::radial::DEFAULT_SHOOT_TOL)?;
                let (phi, psi) = radial.profile.lift_to_grid(grid);
                (phi, psi, radial.mass)
            } else {
                let gs = solve_ground_state(grid, GroundStateMethod::Flow, 1e-8)?;
                let mass = gs.mass;
                (gs.phi, gs.psi, mass)
            };
            let phi = stepper.project(&phi)?;
            let psi = stepper.project(&psi)?;
            // normalize after projection: on coarse grids the projection
            // sheds mass, and the experiment is defined by the mass actually
            // carried into the run
            let m = observables::mass(&phi, &psi)?;
            if !(m > 0.0) {
                return Err(Error::Degenerate(
                    "projected ground-state lift has no mass".into(),
                ));
            }
            let s = (fraction * reference_mass / m).sqrt();
            Ok((phi.scale(s.into()), psi.scale(s.into())))
        }
        InitialData::Pulses { pulses, target_mass } => {
            let d = grid.d();
            let mut u = vec![Complex64::ZERO; grid.len()];
            let mut v = vec![Complex64::ZERO; grid.len()];
            for (pi, pulse) in pulses.iter().enumerate() {
                if pulse.center.len() != d || pulse.wave.len() != d {
                    return Err(Error::usage(format!(
                        "pulse {pi}: center and wave vectors must have dimension {d}"
                    )));
                }
                if !(pulse.width.is_finite() && pulse.width > 0.0) {
                    return Err(Error::usage(format!(
                        "pulse {pi}: width must be positive, got {}",
                        pulse.width
                    )));
                }
                let coords = grid.axis_coords();
                let target = match pulse.slot {
                    FieldSlot::U => &mut u,
                    FieldSlot::V => &mut v,
                };
                grid.for_each_index(|flat, ix| {
                    let mut r2 = 0.0;
                    let mut kx = 0.0;
                    for a in 0..d {
                        let dx = coords[ix[a]] - pulse.center[a];
                        r2 += dx * dx;
                        kx += pulse.wave[a] * coords[ix[a]];
                    }
                    let env = pulse.amplitude * (-r2 / (pulse.width * pulse.width)).exp();
                    target[flat] += Complex64::from_polar(env, kx);
                });
            }
            let u = stepper.project(&ComplexField::from_values(grid, u)?)?;
            let v = stepper.project(&ComplexField::from_values(grid, v)?)?;
            match target_mass {
                None => Ok((u, v)),
                Some(target) => {
                    if !(target.is_finite() && *target > 0.0) {
                        return Err(Error::usage(format!(
                            "target mass must be positive, got {target}"
                        )));
                    }
                    let m = observables::mass(&u, &v)?;
                    if !(m > 0.0) {
                        return Err(Error::Degenerate(
                            "cannot normalize zero pulse data to a positive mass".into(),
                        ));
                    }
                    let s = (target / m).sqrt();
                    Ok((u.scale(s.into()), v.scale(s.into())))
                }
            }
        }
    }
}

/// Integrate one trajectory from the config's own seed.
pub fn run_trajectory(config: &SimulationConfig) -> Result<TrajectoryResult> {
    config.validate()?;
    let (u0, v0) = initial_fields(config)?;
    run_resolved(config, &u0, &v0, config.seed)
}

/// Integrate an ensemble: trajectory i runs from seed + i with the shared
/// initial data, fully independent state, merged in index order.
pub fn run_ensemble(config: &SimulationConfig, trajectories: usize) -> Result<EnsembleResult> {
    if trajectories == 0 {
        return Err(Error::usage("ensemble needs at least one trajectory"));
    }
    config.validate()?;
    let (u0, v0) = initial_fields(config)?;
    let runs: Vec<Result<TrajectoryResult>> = (0..trajectories)
        .into_par_iter()
        .map(|i| run_resolved(config, &u0, &v0, config.seed.wrapping_add(i as u64)))
        .collect();
    let mut out = Vec::with_capacity(trajectories);
    for run in runs {
        out.push(run?);
    }
    Ok(EnsembleResult { runs: out })
}

fn run_resolved(
    config: &SimulationConfig,
    u0: &ComplexField,
    v0: &ComplexField,
    seed: u64,
) -> Result<TrajectoryResult> {
    let grid = config.grid;
    let h1_0 = observables::h1_sum(u0, v0)?;
    let threshold = match config.blowup_threshold {
        Some(th) => {
            if th <= h1_0 {
                return Err(Error::usage(format!(
                    "blow-up threshold {th} does not exceed the initial H1 sum {h1_0}"
                )));
            }
            th
        }
        None => {
            if h1_0 > 0.0 {
                DEFAULT_BLOWUP_FACTOR * h1_0
            } else {
                1.0
            }
        }
    };

    let stochastic = config.system != SystemForm::Deterministic;
    let paths = if stochastic {
        let path_dt = config.path_dt.unwrap_or(config.dt);
        // two nodes of slack so stage times at the horizon stay in range
        let steps = (config.horizon / path_dt).ceil() as usize + 2;
        Some(sample_paths(config.noise.len(), path_dt, steps, seed)?)
    } else {
        None
    };

    let mut stepper = Stepper::new(grid, config.nonlinearity_on);
    let mut u = u0.values().to_vec();
    let mut v = v0.values().to_vec();

    let n_full = (config.horizon / config.dt + 1e-9).floor() as usize;
    let rem = config.horizon - n_full as f64 * config.dt;
    let final_partial = rem > 1e-9 * config.dt;
    let total_steps = n_full + usize::from(final_partial);

    let mut series = ObservableSeries::default();
    let record = |series: &mut ObservableSeries,
                  u: &[Complex64],
                  v: &[Complex64],
                  t: f64|
     -> Result<f64> {
        let uf = ComplexField::from_values(grid, u.to_vec())?;
        let vf = ComplexField::from_values(grid, v.to_vec())?;
        let de_rhs = match (&config.system, &paths) {
            (SystemForm::Rescaled, Some(p)) => Some(observables::energy_rate_rhs(
                &uf,
                &vf,
                &config.noise,
                &p.values_at_time(t)?,
            )?),
            _ => None,
        };
        let rec = observables::ObservableRecord::measure(t, &uf, &vf, de_rhs)?;
        let h1 = rec.h1_sum;
        series.push(rec);
        Ok(h1)
    };

    record(&mut series, &u, &v, 0.0)?;
    let mut stop_reason = StopReason::Horizon;
    let mut stop_time = 0.0f64;
    let mut steps_taken = 0usize;

    for step in 0..total_steps {
        // the final step lands on the horizon exactly, so the
        // stop_reason = horizon iff stop_time = T invariant is clean
        let (dt, t_next) = if step + 1 == total_steps {
            (if final_partial { rem } else { config.dt }, config.horizon)
        } else {
            (config.dt, ((step + 1) as f64) * config.dt)
        };
        let t_now = step as f64 * config.dt;
        // step on scratch copies so a mid-step overflow leaves the last
        // good state in place
        let mut su = u.clone();
        let mut sv = v.clone();
        let result = match config.system {
            SystemForm::Deterministic => stepper.strang_inplace(&mut su, &mut sv, dt),
            SystemForm::Rescaled => {
                let p = paths.as_ref().expect("paths exist for stochastic runs");
                stepper.rescaled_inplace(&mut su, &mut sv, &config.noise, p, t_now, dt)
            }
            SystemForm::Direct => {
                let p = paths.as_ref().expect("paths exist for stochastic runs");
                let b_now = p.values_at_time(t_now)?;
                let b_next = p.values_at_time(t_next)?;
                let db: Vec<f64> = b_now
                    .iter()
                    .zip(&b_next)
                    .map(|(a, b)| b - a)
                    .collect();
                stepper.direct_inplace(&mut su, &mut sv, &config.noise, &db, dt)
            }
        };
        match result {
            Ok(()) => {
                u = su;
                v = sv;
            }
            Err(Error::Numeric(msg)) => {
                stop_reason = StopReason::NumericFailure(msg);
                break;
            }
            Err(other) => return Err(other),
        }
        steps_taken = step + 1;
        stop_time = t_next;

        let at_end = step + 1 == total_steps;
        if (step + 1) % config.cadence == 0 || at_end {
            let h1 = record(&mut series, &u, &v, t_next)?;
            if !h1.is_finite() {
                stop_reason = StopReason::NumericFailure(format!(
                    "H1 sum became non-finite at t = {t_next}"
                ));
                break;
            }
            if h1 > threshold {
                stop_reason = StopReason::BlowupThreshold;
                break;
            }
        }
    }
    if stop_reason == StopReason::Horizon && stop_time < config.horizon {
        // loop exhausted without reaching the horizon: unreachable by
        // construction, keep the invariant honest anyway
        stop_reason = StopReason::NumericFailure("integration ended early".into());
    }
    if matches!(stop_reason, StopReason::NumericFailure(_)) {
        let stale = series
            .records
            .last()
            .map_or(true, |r| r.t + 1e-12 < stop_time);
        if stale {
            record(&mut series, &u, &v, stop_time)?;
        }
    }

    Ok(TrajectoryResult {
        u: ComplexField::from_values(grid, u)?,
        v: ComplexField::from_values(grid, v)?,
        series,
        stop_time,
        stop_reason,
        steps_taken,
        paths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_data_is_a_fixed_point_of_every_stepper() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let zero = ComplexField::zeros(grid);
        let (u, v) = step_deterministic(&zero, &zero, 1e-3).unwrap();
        assert_eq!(u.max_abs(), 0.0);
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn nonlinear_substep_fixes_u_zero() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let u = ComplexField::zeros(grid);
        let v = ComplexField::from_real_fn(grid, |x| (-x[0] * x[0]).exp());
        let (u1, v1) = nonlinear_substep(&u, &v, 0.01).unwrap();
        assert_eq!(u1.max_abs(), 0.0);
        let drift = v1.sub(&v).unwrap().max_abs();
        assert_eq!(drift, 0.0, "v must be exactly unchanged when u = 0");
    }

    #[test]
    fn horizon_shorter_than_a_step_is_rejected() {
        let grid = Grid::new(1, 32, 8.0).unwrap();
        let config = SimulationConfig {
            system: SystemForm::Deterministic,
            grid,
            noise: NoiseModel::empty(grid),
            horizon: 1e-4,
            dt: 1e-3,
            initial: InitialData::Zero,
            seed: 1,
            blowup_threshold: None,
            cadence: 1,
            nonlinearity_on: true,
            path_dt: None,
        };
        let err = run_trajectory(&config).unwrap_err();
        assert!(matches!(err, Error::Usage(_)), "got {err:?}");
    }
}
