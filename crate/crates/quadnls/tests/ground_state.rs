//! Ground-state solvers checked against each other and against scaling laws
//! that an incorrect discrete solution cannot satisfy.

use quadnls::ground_state::{
    dilation_derivative_grid, dilation_derivative_radial, elliptic_residual, flow_from_initial,
    gn_ratio, solve_ground_state, GroundStateMethod, DILATION_DELTA,
};
use quadnls::radial::{solve_radial_ground_state, RadialProfile, DEFAULT_SHOOT_TOL};
use quadnls::{ComplexField, Error, Grid};

const CERTIFIED_MASS: f64 = 271.6589276705;

fn d4_grid() -> Grid {
    Grid::new(4, 16, 10.5).unwrap()
}

#[test]
fn shooting_lift_carries_the_certified_functionals() {
    let gs = solve_ground_state(d4_grid(), GroundStateMethod::Shooting, 1e-8).unwrap();
    let radial = gs.radial.as_ref().expect("shooting stores its radial artifact");
    assert!(
        (radial.mass - CERTIFIED_MASS).abs() < 1e-6,
        "radial mass {}",
        radial.mass
    );
    // the grid mass is a coarse quadrature of the same profile, so it agrees
    // only to the resolution of the n = 16 box
    assert!(
        (gs.mass - radial.mass).abs() < 0.01 * radial.mass,
        "grid mass {} vs radial {}",
        gs.mass,
        radial.mass
    );
    assert!(gs.iterations == 0);
    assert!(gs.min_value() > -1e-12 * gs.phi.max_abs());
    // energy of the exact pair is zero; the lift sees quadrature error only
    assert!(
        gs.energy.abs() < 0.05 * gs.kinetic,
        "lift energy {} vs kinetic {}",
        gs.energy,
        gs.kinetic
    );
}

#[test]
fn flow_converges_on_the_coarse_four_dimensional_grid() {
    let grid = d4_grid();
    let gs = solve_ground_state(grid, GroundStateMethod::Flow, 1e-8).unwrap();
    let (r1, r2) = gs.residual;
    assert!(r1 < 1e-8 && r2 < 1e-8, "residuals {r1:.3e} {r2:.3e}");
    assert!(gs.iterations > 0);
    // discrete minimizer at this resolution differs from the continuum one
    // and its tail undershoots zero at the truncation scale; strict
    // positivity returns at n = 32 and is asserted in the acceptance suite
    assert!(gs.mass > 100.0 && gs.mass < 400.0, "mass {}", gs.mass);
    assert!(gs.min_value() > -0.01 * gs.phi.max_abs());
    // the constraint the rescale enforces pairs the full Laplacian symbol
    // with the fields, so measure it in that convention: at a critical point
    // M - <lap phi, phi> - <lap psi, psi>/2 - 3P vanishes
    let engine = quadnls::SpectralEngine::new(grid);
    let lap_phi = engine.laplacian(&gs.phi, 1.0).unwrap();
    let lap_psi = engine.laplacian(&gs.psi, 1.0).unwrap();
    let k_full = -quadnls::spectral::inner_product(&lap_phi, &gs.phi).unwrap().re
        - 0.5 * quadnls::spectral::inner_product(&lap_psi, &gs.psi).unwrap().re;
    let nehari = (gs.mass + k_full - 3.0 * gs.potential).abs();
    assert!(nehari < 1e-6 * gs.mass, "constraint defect {nehari:.3e}");

    // once the residual is below tol, Cauchy-Schwarz bounds the pairing of
    // the residual fields with the dilation generator
    let action = 0.5 * (gs.mass + gs.kinetic) - gs.potential;
    let pairing = dilation_derivative_grid(&gs.phi, &gs.psi).unwrap();
    assert!(
        pairing.abs() < 1e-5 * action,
        "dilation pairing {pairing:.3e} vs action {action:.3e}"
    );
}

#[test]
fn radial_dilation_derivative_vanishes_at_the_solution() {
    let radial = solve_radial_ground_state(DEFAULT_SHOOT_TOL).unwrap();
    let action = 0.5 * (radial.mass + radial.kinetic) - radial.potential;
    let ds = dilation_derivative_radial(&radial, DILATION_DELTA).unwrap();
    assert!(
        ds.abs() < 1e-6 * action,
        "dilation derivative {ds:.3e} vs action {action:.3e}"
    );
    // a deliberately rescaled profile is not critical: stretching the profile
    // shifts the kinetic against the mass term and the derivative shows it
    let stretched = {
        let prof = &radial.profile;
        let lam = 1.05;
        let n = prof.len();
        let mut cols = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for j in 0..n {
            let r = prof.r(j) / lam;
            cols.0.push(prof.eval_phi(r));
            cols.1.push(prof.eval_dphi(r) / lam);
            cols.2.push(prof.eval_psi(r));
            cols.3.push(prof.eval_dpsi(r) / lam);
        }
        RadialProfile::from_columns(prof.mesh_step(), cols.0, cols.1, cols.2, cols.3).unwrap()
    };
    let mut shifted = radial.clone();
    shifted.profile = stretched;
    let ds_off = dilation_derivative_radial(&shifted, DILATION_DELTA).unwrap();
    assert!(
        ds_off.abs() > 1e-3 * action,
        "rescaled profile should not be critical, got {ds_off:.3e}"
    );
}

#[test]
fn quadrature_is_converged_in_the_radial_mesh_step() {
    // coefficient from the full mesh vs the same profile decimated to twice
    // the step; Simpson error scales like h^4 so the gap must be tiny
    let radial = solve_radial_ground_state(DEFAULT_SHOOT_TOL).unwrap();
    let prof = &radial.profile;
    let stride = |col: &[f64]| col.iter().step_by(2).copied().collect::<Vec<_>>();
    let coarse = RadialProfile::from_columns(
        2.0 * prof.mesh_step(),
        stride(prof.phi()),
        stride(prof.dphi()),
        stride(prof.psi()),
        stride(prof.dpsi()),
    )
    .unwrap();
    let coeff = |m: f64| 1.0 / (2.0 * m.sqrt());
    let fine_c = coeff(prof.mass());
    let coarse_c = coeff(coarse.mass());
    let rel = ((fine_c - coarse_c) / fine_c).abs();
    assert!(rel < 1e-6, "coefficient moved by {rel:.3e} under refinement");
}

#[test]
fn interaction_ratio_is_one_on_the_ground_state() {
    let gs = solve_ground_state(d4_grid(), GroundStateMethod::Flow, 1e-8).unwrap();
    // self-referenced: M = M_gs, so the ratio reduces to 2P/K, which equals
    // one up to the defect of the discrete dilation identity; that defect is
    // still coarse at n = 16 (the n = 32 run holds it near 1e-4)
    let ratio = gn_ratio(&gs.phi, &gs.psi, gs.mass).unwrap();
    assert!((ratio - 1.0).abs() < 0.15, "ratio {ratio}");

    // odd in the second component
    let flipped = gs.psi.scale((-1.0).into());
    let neg = gn_ratio(&gs.phi, &flipped, gs.mass).unwrap();
    assert!((neg + ratio).abs() < 1e-12 * ratio.abs());

    // numerator and denominator both scale cubically in the amplitude, so
    // the ratio is exactly scale-invariant
    let half = gn_ratio(
        &gs.phi.scale(0.5.into()),
        &gs.psi.scale(0.5.into()),
        gs.mass,
    )
    .unwrap();
    assert!(
        (half - ratio).abs() < 1e-12 * ratio.abs(),
        "half-amplitude ratio {half} vs {ratio}"
    );

    // a non-optimal pair sits strictly inside the sharp inequality
    let grid = gs.grid();
    let wide_phi = ComplexField::from_real_fn(grid, |x| {
        let r2: f64 = x.iter().map(|&c| c * c).sum();
        (-r2 / 4.0).exp()
    });
    let wide_psi = ComplexField::from_real_fn(grid, |x| {
        let r2: f64 = x.iter().map(|&c| c * c).sum();
        0.5 * (-r2 / 4.0).exp()
    });
    let off = gn_ratio(&wide_phi, &wide_psi, gs.mass).unwrap();
    assert!(off > 0.0 && off < 0.99, "non-optimal ratio {off}");
}

#[test]
fn interaction_ratio_rejects_degenerate_inputs() {
    let grid = Grid::new(2, 16, 8.0).unwrap();
    let constant = ComplexField::constant(grid, 1.0.into());
    let err = gn_ratio(&constant, &constant, 1.0).unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)), "got {err:?}");

    let bump = ComplexField::from_real_fn(grid, |x| (-x[0] * x[0] - x[1] * x[1]).exp());
    let err = gn_ratio(&bump, &bump, -3.0).unwrap_err();
    assert!(matches!(err, Error::Usage(_)), "got {err:?}");
}

#[test]
fn elliptic_residual_is_linear_in_small_perturbations() {
    let grid = Grid::new(1, 64, 16.0).unwrap();
    let gs = solve_ground_state(grid, GroundStateMethod::Flow, 1e-10).unwrap();
    let bump = ComplexField::from_real_fn(grid, |x| (-(x[0] - 1.0) * (x[0] - 1.0)).exp());
    let residual_at = |eps: f64| {
        let phi = gs.phi.add(&bump.scale(eps.into())).unwrap();
        let (r1, r2) = elliptic_residual(&phi, &gs.psi).unwrap();
        r1.max(r2)
    };
    let r_small = residual_at(1e-6);
    let r_large = residual_at(2e-6);
    assert!(r_small > 1e-8, "perturbation must register, got {r_small:.3e}");
    let ratio = r_large / r_small;
    assert!(
        (ratio - 2.0).abs() < 0.05,
        "residual should scale linearly, ratio {ratio}"
    );
}

#[test]
fn solver_validates_its_arguments() {
    let err = solve_ground_state(d4_grid(), GroundStateMethod::Flow, 0.0).unwrap_err();
    assert!(matches!(err, Error::Usage(_)));
    let err = solve_ground_state(d4_grid(), GroundStateMethod::Flow, -1e-8).unwrap_err();
    assert!(matches!(err, Error::Usage(_)));
    let grid2 = Grid::new(2, 16, 8.0).unwrap();
    let err = solve_ground_state(grid2, GroundStateMethod::Shooting, 1e-8).unwrap_err();
    assert!(matches!(err, Error::Usage(_)));
    // below the conditioning floor of the shoot the solver reports failure
    // rather than a fake converged state
    let err = solve_ground_state(d4_grid(), GroundStateMethod::Shooting, 1e-13).unwrap_err();
    assert!(matches!(err, Error::Convergence { .. }), "got {err:?}");
}

#[test]
fn flow_matches_the_lift_within_quadrature_error() {
    // both routes approximate the same continuum profile; on a coarse grid
    // they may differ at the percent level, and the gap must shrink with n
    // (the sharp n = 32 comparison runs in the acceptance suite)
    let grid = d4_grid();
    let flow = solve_ground_state(grid, GroundStateMethod::Flow, 1e-8).unwrap();
    let shoot = solve_ground_state(grid, GroundStateMethod::Shooting, 1e-8).unwrap();
    let diff = flow.phi.sub(&shoot.phi).unwrap();
    let num = quadnls::spectral::l2_norm_sq(&diff).sqrt();
    let den = flow.mass.sqrt();
    assert!(num / den < 0.5, "relative gap {}", num / den);
}

#[test]
#[ignore = "minutes-long refinement sweep over n = 32 and n = 64"]
fn flow_refinement_between_successive_grids() {
    // full grid refinement check: coefficient gap between n = 32 and n = 64
    // below 1e-3
    let coeff = |n: usize| {
        let grid = Grid::new(4, n, 10.5).unwrap();
        solve_ground_state(grid, GroundStateMethod::Flow, 1e-8)
            .unwrap()
            .gn_coefficient
    };
    let c32 = coeff(32);
    let c64 = coeff(64);
    assert!(
        ((c32 - c64) / c64).abs() < 1e-3,
        "coefficient gap {} vs {}",
        c32,
        c64
    );
}

#[test]
fn zero_start_is_rejected_not_iterated() {
    let grid = Grid::new(2, 16, 8.0).unwrap();
    let zero = ComplexField::zeros(grid);
    let err = flow_from_initial(&zero, &zero, 1e-8, 100).unwrap_err();
    assert!(matches!(err, Error::Degenerate(_)), "got {err:?}");
}
