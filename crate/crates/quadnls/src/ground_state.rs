//! Ground states of the stationary pair
//!
//!   -laplacian(phi) +   phi = 2 psi phi
//!   -laplacian(psi)/2 + 2 psi = phi^2
//!
//! by two routes that share no discretization: a preconditioned spectral
//! descent on the periodic grid and the certified radial shoot lifted onto
//! the grid. The flow is the grid-native solver; the shoot is the oracle it
//! is checked against.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use crate::observables;
use crate::radial::{solve_radial_ground_state, RadialGroundState, RadialProfile, DEFAULT_SHOOT_TOL};
use crate::spectral::{inner_product, l2_norm_sq, SpectralEngine};

pub const DEFAULT_FLOW_TOL: f64 = 1e-8;
pub const MAX_FLOW_ITERS: usize = 20_000;
/// descent step applied to the preconditioned gradient; the preconditioners
/// make the linear part contract with factor |1 - step|
const FLOW_STEP: f64 = 0.9;
/// squared-norm floor under which the iterate counts as collapsed
const COLLAPSE_FLOOR: f64 = 1e-14;
/// central-difference offset for the radial dilation derivative; large enough
/// to clear quadrature noise, small enough that the cubic term of the
/// rescaled functionals stays below the acceptance margin
pub const DILATION_DELTA: f64 = 2e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroundStateMethod {
    Flow,
    Shooting,
}

impl std::fmt::Display for GroundStateMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GroundStateMethod::Flow => "flow",
            GroundStateMethod::Shooting => "shooting",
        })
    }
}

impl std::str::FromStr for GroundStateMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<GroundStateMethod> {
        match s {
            "flow" => Ok(GroundStateMethod::Flow),
            "shooting" => Ok(GroundStateMethod::Shooting),
            other => Err(Error::parse(
                "ground-state method",
                format!("unknown value '{other}', expected 'flow' or 'shooting'"),
            )),
        }
    }
}

/// A converged ground-state pair on a grid together with its functionals and
/// the diagnostics that certify it. `residual` is always the grid elliptic
/// residual of the stored fields; for the shooting method that number carries
/// the lift discretization error and the radial defects inside `radial` are
/// the sharper certificate.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub phi: ComplexField,
    pub psi: ComplexField,
    pub mass: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub energy: f64,
    pub residual: (f64, f64),
    /// 1 / (2 sqrt(mass)): the sharp constant in P <= C sqrt(M) K
    pub gn_coefficient: f64,
    /// descent iterations; zero for a pure lift
    pub iterations: usize,
    pub method: GroundStateMethod,
    /// radial artifact backing the warm start or the lift
    pub radial: Option<RadialGroundState>,
}

impl GroundState {
    fn from_fields(
        phi: ComplexField,
        psi: ComplexField,
        method: GroundStateMethod,
        iterations: usize,
        radial: Option<RadialGroundState>,
    ) -> Result<GroundState> {
        let mass = observables::mass(&phi, &psi)?;
        if !(mass > COLLAPSE_FLOOR) {
            return Err(Error::Degenerate(
                "candidate ground state has vanishing mass".into(),
            ));
        }
        let kinetic = observables::kinetic(&phi, &psi)?;
        let potential = observables::potential(&phi, &psi)?;
        let residual = elliptic_residual(&phi, &psi)?;
        Ok(GroundState {
            gn_coefficient: 1.0 / (2.0 * mass.sqrt()),
            energy: kinetic - 2.0 * potential,
            phi,
            psi,
            mass,
            kinetic,
            potential,
            residual,
            iterations,
            method,
            radial,
        })
    }

    pub fn grid(&self) -> Grid {
        *self.phi.grid()
    }

    /// Most negative real value across both components. The exact solution is
    /// strictly positive; the discrete one may undershoot by roundoff.
    pub fn min_value(&self) -> f64 {
        let worst = |f: &ComplexField| {
            f.values().iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
        };
        worst(&self.phi).min(worst(&self.psi))
    }
}

/// L^2 norms of the two equation residuals
///   r1 = -laplacian(phi) + phi - 2 psi phi
///   r2 = -laplacian(psi)/2 + 2 psi - phi^2
/// with the Laplacian evaluated spectrally on the fields' grid.
pub fn elliptic_residual(phi: &ComplexField, psi: &ComplexField) -> Result<(f64, f64)> {
    let (r1, r2) = elliptic_residual_fields(phi, psi)?;
    Ok((l2_norm_sq(&r1).sqrt(), l2_norm_sq(&r2).sqrt()))
}

/// The residual fields themselves; these are also the L^2 gradients of the
/// action (M + K)/2 - P, which the dilation pairing relies on.
pub fn elliptic_residual_fields(
    phi: &ComplexField,
    psi: &ComplexField,
) -> Result<(ComplexField, ComplexField)> {
    phi.grid().assert_same(psi.grid(), "elliptic_residual")?;
    let grid = *phi.grid();
    let engine = SpectralEngine::new(grid);
    let lap_phi = engine.laplacian(phi, 1.0)?;
    let lap_psi_half = engine.laplacian(psi, 0.5)?;
    let mut r1 = Vec::with_capacity(grid.len());
    let mut r2 = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let p = phi.values()[i];
        let s = psi.values()[i];
        r1.push(-lap_phi.values()[i] + p - 2.0 * s * p);
        r2.push(-lap_psi_half.values()[i] + 2.0 * s - p * p);
    }
    Ok((
        ComplexField::from_values(grid, r1)?,
        ComplexField::from_values(grid, r2)?,
    ))
}

/// Solve for the ground state on `grid` to absolute residual `tol`.
///
/// Flow: preconditioned spectral descent with a per-step rescale onto the
/// constraint manifold M + K = 3P. On four-dimensional grids it warm-starts
/// from the lifted radial solution, elsewhere from a Gaussian seed.
///
/// Shooting: the radial two-point shoot (four dimensions only), lifted onto
/// the grid by cubic interpolation over lattice images. `tol` bounds the
/// radial matching residual, not the grid residual of the lift.
pub fn solve_ground_state(grid: Grid, method: GroundStateMethod, tol: f64) -> Result<GroundState> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::usage(format!(
            "ground-state tolerance must be positive, got {tol}"
        )));
    }
    match method {
        GroundStateMethod::Shooting => {
            if grid.d() != 4 {
                return Err(Error::usage(
                    "shooting method solves the radial four-dimensional problem; use the flow on lower-dimensional grids",
                ));
            }
            let radial = solve_radial_ground_state(tol)?;
            let (phi, psi) = radial.profile.lift_to_grid(grid);
            GroundState::from_fields(phi, psi, method, 0, Some(radial))
        }
        GroundStateMethod::Flow => {
            let (phi0, psi0, radial) = if grid.d() == 4 {
                let radial = solve_radial_ground_state(DEFAULT_SHOOT_TOL)?;
                let (p, s) = radial.profile.lift_to_grid(grid);
                (p, s, Some(radial))
            } else {
                // any positive localized seed in the basin works here; the
                // rescale keeps the iterate away from zero
                let p = ComplexField::from_real_fn(grid, |x| {
                    let r2: f64 = x.iter().map(|&c| c * c).sum();
                    3.0 * (-r2).exp()
                });
                let s = ComplexField::from_real_fn(grid, |x| {
                    let r2: f64 = x.iter().map(|&c| c * c).sum();
                    2.0 * (-r2).exp()
                });
                (p, s, None)
            };
            let (phi, psi, iterations) =
                flow_from_initial(&phi0, &psi0, tol, MAX_FLOW_ITERS)?;
            GroundState::from_fields(phi, psi, method, iterations, radial)
        }
    }
}

/// Preconditioned descent from an explicit starting pair. Each step moves
/// against the spectral residuals
///   g_phi = (|k|^2 + 1) phi_hat - fft(2 psi phi)
///   g_psi = (|k|^2 / 2 + 2) psi_hat - fft(phi^2)
/// divided by their own linear symbols, then rescales both fields by
/// s = (M + K) / (3 P) so the constraint M + K = 3P holds exactly. A zero or
/// sign-indefinite iterate makes the rescale meaningless and reports the
/// collapse instead of iterating further.
pub fn flow_from_initial(
    phi0: &ComplexField,
    psi0: &ComplexField,
    tol: f64,
    max_iters: usize,
) -> Result<(ComplexField, ComplexField, usize)> {
    phi0.grid().assert_same(psi0.grid(), "flow initial pair")?;
    phi0.check_finite("flow initial phi")?;
    psi0.check_finite("flow initial psi")?;
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::usage(format!(
            "flow tolerance must be positive, got {tol}"
        )));
    }
    let grid = *phi0.grid();
    let engine = SpectralEngine::new(grid);
    let k2 = engine.k_squared();
    let w = grid.weight();
    let len = grid.len();

    // the flow acts on real fields; imaginary seed content is discarded
    let realify = |f: &ComplexField| -> Vec<Complex64> {
        f.values().iter().map(|v| Complex64::new(v.re, 0.0)).collect()
    };
    let mut ph = realify(phi0);
    engine.forward_inplace(&mut ph);
    let mut ps = realify(psi0);
    engine.forward_inplace(&mut ps);

    let mut phi = vec![0.0f64; len];
    let mut psi = vec![0.0f64; len];
    let mut f1 = vec![Complex64::ZERO; len];
    let mut f2 = vec![Complex64::ZERO; len];
    let mut residual = f64::INFINITY;

    for iter in 0..max_iters {
        f1.copy_from_slice(&ph);
        engine.inverse_inplace(&mut f1);
        for (p, v) in phi.iter_mut().zip(&f1) {
            *p = v.re;
        }
        f2.copy_from_slice(&ps);
        engine.inverse_inplace(&mut f2);
        for (s, v) in psi.iter_mut().zip(&f2) {
            *s = v.re;
        }

        let mut m = 0.0;
        let mut p_int = 0.0;
        for i in 0..len {
            m += phi[i] * phi[i] + 2.0 * psi[i] * psi[i];
            p_int += psi[i] * phi[i] * phi[i];
        }
        m *= w;
        p_int *= w;
        let mut k = 0.0;
        for i in 0..len {
            k += k2[i] * (ph[i].norm_sqr() + 0.5 * ps[i].norm_sqr());
        }
        k *= w;
        if !(m > COLLAPSE_FLOOR) || !(p_int > COLLAPSE_FLOOR) {
            return Err(Error::Degenerate(format!(
                "flow collapsed toward the zero solution at iteration {iter} \
                 (mass {m:.3e}, cubic term {p_int:.3e}); start from a positive seed"
            )));
        }
        let s = (m + k) / (3.0 * p_int);
        if !s.is_finite() || s <= 0.0 {
            return Err(Error::Degenerate(format!(
                "constraint rescale degenerated at iteration {iter} (factor {s})"
            )));
        }
        for i in 0..len {
            phi[i] *= s;
            psi[i] *= s;
            ph[i] *= s;
            ps[i] *= s;
        }

        for i in 0..len {
            f1[i] = Complex64::new(2.0 * psi[i] * phi[i], 0.0);
            f2[i] = Complex64::new(phi[i] * phi[i], 0.0);
        }
        engine.forward_inplace(&mut f1);
        engine.forward_inplace(&mut f2);

        let mut r1_sq = 0.0;
        let mut r2_sq = 0.0;
        for i in 0..len {
            let gph = (k2[i] + 1.0) * ph[i] - f1[i];
            let gps = (0.5 * k2[i] + 2.0) * ps[i] - f2[i];
            r1_sq += gph.norm_sqr();
            r2_sq += gps.norm_sqr();
            f1[i] = gph;
            f2[i] = gps;
        }
        residual = (r1_sq * w).sqrt().max((r2_sq * w).sqrt());
        if residual < tol {
            let to_field = |vals: &[f64]| {
                let v = vals.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                ComplexField::from_values(grid, v).expect("length matches grid")
            };
            return Ok((to_field(&phi), to_field(&psi), iter + 1));
        }
        for i in 0..len {
            ph[i] -= FLOW_STEP * f1[i] / (k2[i] + 1.0);
            ps[i] -= FLOW_STEP * f2[i] / (0.5 * k2[i] + 2.0);
        }
    }
    Err(Error::Convergence {
        iterations: max_iters,
        residual,
    })
}

/// P / ((1/2) sqrt(M / gs_mass) K) for an arbitrary pair. Equal to one on the
/// ground-state family, strictly below one elsewhere; sign follows P. Takes
/// the reference mass scalar so grid and radial artifacts are interchangeable.
pub fn gn_ratio(f: &ComplexField, g: &ComplexField, gs_mass: f64) -> Result<f64> {
    if !(gs_mass.is_finite() && gs_mass > 0.0) {
        return Err(Error::usage(format!(
            "reference ground-state mass must be positive, got {gs_mass}"
        )));
    }
    let m = observables::mass(f, g)?;
    let k = observables::kinetic(f, g)?;
    let p = observables::potential(f, g)?;
    let denom = 0.5 * (m / gs_mass).sqrt() * k;
    if !(denom > 0.0) {
        return Err(Error::Degenerate(format!(
            "interaction ratio undefined: mass {m:.3e}, kinetic {k:.3e}"
        )));
    }
    Ok(p / denom)
}

/// d/d lambda of I(lambda) = (M + K - 2P)/2 under phi_lambda(x) = phi(x/lambda)
/// at lambda = 1, via the chain rule: the functional gradients are exactly the
/// elliptic residual fields, so the derivative is their pairing with the
/// dilation generator -x . grad. Vanishes at a critical point.
pub fn dilation_derivative_grid(phi: &ComplexField, psi: &ComplexField) -> Result<f64> {
    let grid = *phi.grid();
    let engine = SpectralEngine::new(grid);
    let (r1, r2) = elliptic_residual_fields(phi, psi)?;
    let grad_phi = engine.gradient(phi)?;
    let grad_psi = engine.gradient(psi)?;
    let coords = grid.axis_coords();
    let d = grid.d();
    let gen = |parts: &[ComplexField]| {
        let mut out = vec![Complex64::ZERO; grid.len()];
        grid.for_each_index(|flat, ix| {
            let mut acc = Complex64::ZERO;
            for a in 0..d {
                acc += coords[ix[a]] * parts[a].values()[flat];
            }
            out[flat] = -acc;
        });
        ComplexField::from_values(grid, out).expect("length matches grid")
    };
    let dphi = gen(&grad_phi);
    let dpsi = gen(&grad_psi);
    Ok(inner_product(&r1, &dphi)?.re + inner_product(&r2, &dpsi)?.re)
}

/// The same derivative for the radial artifact, by honest re-quadrature:
/// the profile is re-sampled at r / lambda for lambda = 1 +- delta and the
/// functionals re-integrated, so no rescaling identity enters.
pub fn dilation_derivative_radial(radial: &RadialGroundState, delta: f64) -> Result<f64> {
    if !(delta.is_finite() && delta > 0.0 && delta < 0.5) {
        return Err(Error::usage(format!(
            "dilation offset must lie in (0, 0.5), got {delta}"
        )));
    }
    let action = |lambda: f64| -> Result<f64> {
        let prof = rescaled_profile(&radial.profile, lambda)?;
        Ok(0.5 * (prof.mass() + prof.kinetic()) - prof.potential())
    };
    Ok((action(1.0 + delta)? - action(1.0 - delta)?) / (2.0 * delta))
}

fn rescaled_profile(profile: &RadialProfile, lambda: f64) -> Result<RadialProfile> {
    let n = profile.len();
    let mut phi = Vec::with_capacity(n);
    let mut dphi = Vec::with_capacity(n);
    let mut psi = Vec::with_capacity(n);
    let mut dpsi = Vec::with_capacity(n);
    for j in 0..n {
        let r = profile.r(j) / lambda;
        phi.push(profile.eval_phi(r));
        dphi.push(profile.eval_dphi(r) / lambda);
        psi.push(profile.eval_psi(r));
        dpsi.push(profile.eval_dpsi(r) / lambda);
    }
    RadialProfile::from_columns(profile.mesh_step(), phi, dphi, psi, dpsi)
}
