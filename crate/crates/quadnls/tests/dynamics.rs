//! Integrator contracts: the pointwise substep against an adaptive oracle,
//! exact linear phases, the reductions tying the three system forms to each
//! other, and the run driver's stopping behavior.

use num_complex::Complex64;
use quadnls::dynamics::{
    initial_fields, nonlinear_substep, run_ensemble, run_trajectory, rk4_dt_cap, step_rescaled,
    FieldSlot, GaussianPulse, InitialData, SimulationConfig, Stepper, StopReason, SystemForm,
};
use quadnls::noise::BrownianPaths;
use quadnls::observables;
use quadnls::{BumpSpec, ComplexField, Error, Grid, NoiseModel};

fn line_grid(n: usize, length: f64) -> Grid {
    Grid::new(1, n, length).unwrap()
}

fn gaussian_pair(grid: Grid) -> (ComplexField, ComplexField) {
    let u = ComplexField::from_fn(grid, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        Complex64::new(0.8 * (-r2 / 2.25).exp(), 0.2 * (-r2 / 2.25).exp())
    });
    let v = ComplexField::from_real_fn(grid, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        0.5 * (-r2 / 1.44).exp()
    });
    (u, v)
}

fn one_bump_model(grid: Grid) -> NoiseModel {
    NoiseModel::gaussian(
        grid,
        &[BumpSpec {
            amplitude: 0.8,
            center: vec![0.5; grid.d()],
            sigma: 1.0,
        }],
    )
    .unwrap()
}

fn deterministic_config(grid: Grid, initial: InitialData) -> SimulationConfig {
    SimulationConfig {
        system: SystemForm::Deterministic,
        grid,
        noise: NoiseModel::empty(grid),
        horizon: 0.05,
        dt: 1e-3,
        initial,
        seed: 7,
        blowup_threshold: None,
        cadence: 5,
        nonlinearity_on: true,
        path_dt: None,
    }
}

fn pointwise_rhs(u: Complex64, v: Complex64) -> (Complex64, Complex64) {
    (
        Complex64::new(0.0, 2.0) * v * u.conj(),
        Complex64::new(0.0, 1.0) * u * u,
    )
}

/// Cash-Karp 4(5) with step control, an integrator family the substep does
/// not use.
fn adaptive_reference(mut u: Complex64, mut v: Complex64, horizon: f64) -> (Complex64, Complex64) {
    let a = [
        vec![],
        vec![1.0 / 5.0],
        vec![3.0 / 40.0, 9.0 / 40.0],
        vec![3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0],
        vec![-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0],
        vec![
            1631.0 / 55296.0,
            175.0 / 512.0,
            575.0 / 13824.0,
            44275.0 / 110592.0,
            253.0 / 4096.0,
        ],
    ];
    let b5 = [
        37.0 / 378.0,
        0.0,
        250.0 / 621.0,
        125.0 / 594.0,
        0.0,
        512.0 / 1771.0,
    ];
    let b4 = [
        2825.0 / 27648.0,
        0.0,
        18575.0 / 48384.0,
        13525.0 / 55296.0,
        277.0 / 14336.0,
        1.0 / 4.0,
    ];
    let tol = 1e-14;
    let mut t = 0.0f64;
    let mut h = 1e-3f64;
    while t < horizon {
        h = h.min(horizon - t);
        let mut ku = [Complex64::ZERO; 6];
        let mut kv = [Complex64::ZERO; 6];
        for s in 0..6 {
            let mut us = u;
            let mut vs = v;
            for (j, &c) in a[s].iter().enumerate() {
                us += h * c * ku[j];
                vs += h * c * kv[j];
            }
            let (du, dv) = pointwise_rhs(us, vs);
            ku[s] = du;
            kv[s] = dv;
        }
        let mut u5 = u;
        let mut v5 = v;
        let mut u4 = u;
        let mut v4 = v;
        for s in 0..6 {
            u5 += h * b5[s] * ku[s];
            v5 += h * b5[s] * kv[s];
            u4 += h * b4[s] * ku[s];
            v4 += h * b4[s] * kv[s];
        }
        let err = (u5 - u4).norm().max((v5 - v4).norm());
        if err <= tol || h <= 1e-12 {
            t += h;
            u = u5;
            v = v5;
        }
        let shrink = if err > 0.0 {
            0.9 * (tol / err).powf(0.2)
        } else {
            2.0
        };
        h *= shrink.clamp(0.2, 2.0);
    }
    (u, v)
}

#[test]
fn substep_matches_an_adaptive_integrator() {
    let u0 = Complex64::new(1.0, 0.0);
    let v0 = Complex64::new(1.0, 0.0);
    let h = 0.01;
    let (ur, vr) = adaptive_reference(u0, v0, h);

    // the pointwise pair conserves |u|^2 + 2|v|^2 and Re(v conj(u)^2);
    // they gate the reference itself before it judges the substep
    let m0 = u0.norm_sqr() + 2.0 * v0.norm_sqr();
    let mr = ur.norm_sqr() + 2.0 * vr.norm_sqr();
    assert!((mr - m0).abs() < 1e-12, "reference drifts mass: {}", mr - m0);
    let p0 = (v0 * u0.conj() * u0.conj()).re;
    let pr = (vr * ur.conj() * ur.conj()).re;
    assert!((pr - p0).abs() < 1e-12, "reference drifts coupling: {}", pr - p0);

    let grid = line_grid(8, 4.0);
    let u = ComplexField::constant(grid, u0);
    let v = ComplexField::constant(grid, v0);
    let (u1, v1) = nonlinear_substep(&u, &v, h).unwrap();
    let du = (u1.values()[0] - ur).norm();
    let dv = (v1.values()[0] - vr).norm();
    assert!(du < 1e-10, "u off by {du:.3e}");
    assert!(dv < 1e-10, "v off by {dv:.3e}");
}

#[test]
fn substep_freezes_u_at_second_order_when_v_starts_zero() {
    let grid = line_grid(8, 4.0);
    let u0 = Complex64::new(2.0, 0.0);
    let u = ComplexField::constant(grid, u0);
    let v = ComplexField::zeros(grid);
    let h = 1e-3;
    let (u1, v1) = nonlinear_substep(&u, &v, h).unwrap();

    // v ~ i t u0^2 feeds back as u' = -2 t |u0|^2 u0, so the leading
    // drift of u is exactly -h^2 |u0|^2 u0
    let predicted = u0 - h * h * u0.norm_sqr() * u0;
    let du = (u1.values()[0] - predicted).norm();
    assert!(du < 1e-7, "u drift misses the h^2 law by {du:.3e}");
    let drift = (u1.values()[0] - u0).norm();
    assert!(drift > 1e-7, "u should drift at order h^2, got {drift:.3e}");

    let dv = (v1.values()[0] - Complex64::new(0.0, 1.0) * h * u0 * u0).norm();
    assert!(dv < 1e-6, "v misses its linear growth by {dv:.3e}");
}

#[test]
fn linear_steps_advance_plane_waves_by_the_exact_phase() {
    let grid = line_grid(64, 8.0);
    let k = 2.0 * std::f64::consts::PI * 3.0 / grid.length();
    let u = ComplexField::from_fn(grid, |x| Complex64::from_polar(1.0, k * x[0]));
    let v = u.clone();
    let dt = 0.37;
    let mut stepper = Stepper::new(grid, false);
    let (u1, v1) = stepper.deterministic_step(&u, &v, dt).unwrap();

    let full = Complex64::from_polar(1.0, -k * k * dt);
    let half = Complex64::from_polar(1.0, -k * k * dt / 2.0);
    let du = u1.sub(&u.scale(full)).unwrap().max_abs();
    let dv = v1.sub(&v.scale(half)).unwrap().max_abs();
    assert!(du < 1e-12, "u phase off by {du:.3e}");
    assert!(dv < 1e-12, "v phase off by {dv:.3e}");
}

#[test]
fn rescaled_reduces_to_deterministic_on_the_zero_path() {
    let grid = line_grid(64, 16.0);
    let model = one_bump_model(grid);
    let dt = 1e-4;
    let steps = 100;
    let paths = BrownianPaths::zeros(model.len(), dt, steps + 2).unwrap();

    let mut stepper = Stepper::new(grid, true);
    let (u0, v0) = gaussian_pair(grid);
    let mut ud = stepper.project(&u0).unwrap();
    let mut vd = stepper.project(&v0).unwrap();
    let mut ur = ud.clone();
    let mut vr = vd.clone();
    for i in 0..steps {
        let (a, b) = stepper.deterministic_step(&ud, &vd, dt).unwrap();
        ud = a;
        vd = b;
        let (a, b) = stepper
            .rescaled_step(&ur, &vr, &model, &paths, i as f64 * dt, dt)
            .unwrap();
        ur = a;
        vr = b;
    }
    let du = ur.sub(&ud).unwrap().max_abs();
    let dv = vr.sub(&vd).unwrap().max_abs();
    assert!(du < 1e-8, "u gap {du:.3e} between integrators on the zero path");
    assert!(dv < 1e-8, "v gap {dv:.3e} between integrators on the zero path");
}

#[test]
fn constant_bump_acts_as_a_pure_phase() {
    let grid = line_grid(64, 16.0);
    let amp = 0.7;
    let (u0, v0) = gaussian_pair(grid);
    let base = deterministic_config(grid, InitialData::Fields { u: u0, v: v0 });

    let direct = SimulationConfig {
        system: SystemForm::Direct,
        noise: NoiseModel::constant_test_model(grid, amp),
        ..base.clone()
    };
    let run_d = run_trajectory(&direct).unwrap();
    let run_0 = run_trajectory(&base).unwrap();
    assert_eq!(run_d.stop_reason, StopReason::Horizon);

    // a spatially constant bump commutes with everything, so the noise is
    // exactly a time-dependent phase and every observable matches the
    // deterministic run
    for (rd, r0) in run_d.series.records.iter().zip(&run_0.series.records) {
        assert!((rd.mass - r0.mass).abs() < 1e-10 * r0.mass);
        assert!((rd.kinetic - r0.kinetic).abs() < 1e-9 * r0.kinetic.max(1.0));
    }
    let b = run_d
        .paths
        .as_ref()
        .unwrap()
        .values_at_time(run_d.stop_time)
        .unwrap()[0];
    let phase_u = Complex64::from_polar(1.0, amp * b);
    let phase_v = Complex64::from_polar(1.0, 2.0 * amp * b);
    let du = run_d.u.sub(&run_0.u.scale(phase_u)).unwrap().max_abs();
    let dv = run_d.v.sub(&run_0.v.scale(phase_v)).unwrap().max_abs();
    assert!(du < 1e-10, "u misses the phase factor by {du:.3e}");
    assert!(dv < 1e-10, "v misses the phase factor by {dv:.3e}");
}

#[test]
fn constant_bump_leaves_the_rescaled_form_on_the_free_flow() {
    // a spatially constant bump has zero gradient and Laplacian, so every
    // transport coefficient vanishes and y sees only the free flow no
    // matter what the path does
    let grid = line_grid(64, 16.0);
    let model = NoiseModel::constant_test_model(grid, 0.7);
    let paths = quadnls::sample_paths(model.len(), 1e-3, 60, 99).unwrap();
    let k = 2.0 * std::f64::consts::PI * 3.0 / grid.length();
    let y0 = ComplexField::from_fn(grid, |x| Complex64::from_polar(1.0, k * x[0]));
    let z0 = ComplexField::zeros(grid);

    let mut stepper = Stepper::new(grid, false);
    let mut y = y0.clone();
    let mut z = z0.clone();
    let dt = 1e-3;
    let steps = 50;
    let m0 = observables::mass(&y, &z).unwrap();
    for i in 0..steps {
        let (a, b) = stepper
            .rescaled_step(&y, &z, &model, &paths, i as f64 * dt, dt)
            .unwrap();
        y = a;
        z = b;
    }
    let m1 = observables::mass(&y, &z).unwrap();
    assert!((m1 - m0).abs() < 1e-10 * m0, "mass drift {}", (m1 - m0) / m0);

    let phase = Complex64::from_polar(1.0, -k * k * steps as f64 * dt);
    let dy = y.sub(&y0.scale(phase)).unwrap().max_abs();
    assert!(dy < 1e-10, "free-flow gap {dy:.3e}");
    assert_eq!(z.max_abs(), 0.0);
}

#[test]
fn direct_with_no_bumps_is_bitwise_deterministic() {
    let grid = line_grid(64, 16.0);
    let model = NoiseModel::empty(grid);
    let mut stepper = Stepper::new(grid, true);
    let (u0, v0) = gaussian_pair(grid);
    let mut ud = stepper.project(&u0).unwrap();
    let mut vd = stepper.project(&v0).unwrap();
    let mut ux = ud.clone();
    let mut vx = vd.clone();
    for _ in 0..10 {
        let (a, b) = stepper.deterministic_step(&ud, &vd, 1e-3).unwrap();
        ud = a;
        vd = b;
        let (a, b) = stepper.direct_step(&ux, &vx, &model, &[], 1e-3).unwrap();
        ux = a;
        vx = b;
    }
    assert_eq!(ux.values(), ud.values());
    assert_eq!(vx.values(), vd.values());
}

#[test]
fn one_direct_step_applies_the_exponential_factor() {
    let grid = line_grid(32, 16.0);
    let model = one_bump_model(grid);
    let mut stepper = Stepper::new(grid, false);
    let u = ComplexField::constant(grid, Complex64::new(1.0, 0.0));
    let v = u.clone();
    let db = 0.3;
    let (u1, v1) = stepper.direct_step(&u, &v, &model, &[db], 1e-2).unwrap();

    // constant data is a linear fixed point, so the whole step is the
    // multiplicative factor driven by the increment
    let phi = model.phi(0);
    for i in 0..grid.len() {
        let eu = Complex64::from_polar(1.0, phi[i] * db);
        let ev = Complex64::from_polar(1.0, 2.0 * phi[i] * db);
        assert!((u1.values()[i] - eu).norm() < 1e-13);
        assert!((v1.values()[i] - ev).norm() < 1e-13);
    }
}

#[test]
fn mismatched_increment_count_is_rejected() {
    let grid = line_grid(32, 16.0);
    let model = one_bump_model(grid);
    let mut stepper = Stepper::new(grid, true);
    let u = ComplexField::zeros(grid);
    let err = stepper
        .direct_step(&u, &u, &model, &[0.1, 0.2], 1e-2)
        .unwrap_err();
    assert!(matches!(err, Error::Usage(_)), "got {err:?}");
}

#[test]
fn zero_data_runs_to_the_horizon_with_zero_observables() {
    let grid = line_grid(32, 8.0);
    let config = deterministic_config(grid, InitialData::Zero);
    let run = run_trajectory(&config).unwrap();
    assert_eq!(run.stop_reason, StopReason::Horizon);
    assert!((run.stop_time - config.horizon).abs() < 1e-12);
    assert!(!run.series.records.is_empty());
    for rec in &run.series.records {
        assert_eq!(rec.mass, 0.0);
        assert_eq!(rec.kinetic, 0.0);
        assert_eq!(rec.h1_sum, 0.0);
    }
    assert_eq!(run.u.max_abs(), 0.0);
}

#[test]
fn h1_threshold_stops_the_run_early() {
    let grid = line_grid(64, 16.0);
    let u = ComplexField::from_real_fn(grid, |x| 3.0 * (-x[0] * x[0]).exp());
    let v = ComplexField::zeros(grid);
    let h1_0 = observables::h1_sum(&u, &v).unwrap();

    let mut config = deterministic_config(grid, InitialData::Fields { u, v });
    config.horizon = 1.0;
    config.cadence = 1;
    config.blowup_threshold = Some(h1_0 * 1.01);
    let run = run_trajectory(&config).unwrap();

    // v grows from the quadratic source immediately, so a 1 percent margin
    // must trip well before the horizon
    assert_eq!(run.stop_reason, StopReason::BlowupThreshold);
    assert!(run.stop_time < config.horizon);
    let last = run.series.records.last().unwrap();
    assert!(last.h1_sum > h1_0 * 1.01);

    let err = run_trajectory(&SimulationConfig {
        blowup_threshold: Some(h1_0 * 0.5),
        ..config
    })
    .unwrap_err();
    assert!(matches!(err, Error::Usage(_)), "threshold below start: {err:?}");
}

#[test]
fn overflowing_data_stops_with_a_numeric_failure() {
    let grid = line_grid(32, 8.0);
    let u = ComplexField::from_real_fn(grid, |x| 1e9 * (-x[0] * x[0]).exp());
    let v = ComplexField::zeros(grid);
    let config = deterministic_config(grid, InitialData::Fields { u: u.clone(), v });
    let run = run_trajectory(&config).unwrap();
    assert!(
        matches!(run.stop_reason, StopReason::NumericFailure(_)),
        "got {:?}",
        run.stop_reason
    );
    assert_eq!(run.steps_taken, 0);
    assert_eq!(run.stop_time, 0.0);
    // the returned state is the last good one, not the overflowed scratch
    assert!(run.u.all_finite());
}

#[test]
fn identical_configs_reproduce_the_series_bitwise() {
    let grid = line_grid(64, 16.0);
    let model = one_bump_model(grid);
    let (u0, v0) = gaussian_pair(grid);
    let config = SimulationConfig {
        system: SystemForm::Direct,
        noise: model,
        horizon: 0.02,
        ..deterministic_config(grid, InitialData::Fields { u: u0, v: v0 })
    };
    let run_a = run_trajectory(&config).unwrap();
    let run_b = run_trajectory(&config).unwrap();
    assert_eq!(run_a.u.values(), run_b.u.values());
    assert_eq!(run_a.v.values(), run_b.v.values());
    assert_eq!(run_a.series, run_b.series);

    let run_c = run_trajectory(&SimulationConfig {
        seed: config.seed + 1,
        ..config
    })
    .unwrap();
    let gap = run_a.u.sub(&run_c.u).unwrap().max_abs();
    assert!(gap > 1e-12, "different seeds must steer different paths");
}

#[test]
fn ensembles_fan_out_by_seed_and_merge_in_order() {
    let grid = line_grid(32, 16.0);
    let model = one_bump_model(grid);
    let (u0, v0) = gaussian_pair(grid);
    let config = SimulationConfig {
        system: SystemForm::Direct,
        noise: model,
        horizon: 0.01,
        ..deterministic_config(grid, InitialData::Fields { u: u0, v: v0 })
    };
    let ensemble = run_ensemble(&config, 4).unwrap();
    assert_eq!(ensemble.runs.len(), 4);
    assert_eq!(ensemble.horizon_count(), 4);
    for (i, run) in ensemble.runs.iter().enumerate() {
        assert_eq!(run.paths.as_ref().unwrap().seed(), config.seed + i as u64);
    }
    let single = run_trajectory(&SimulationConfig {
        seed: config.seed + 2,
        ..config
    })
    .unwrap();
    assert_eq!(
        ensemble.runs[2].u.values(),
        single.u.values(),
        "trajectory 2 must match a standalone run at its seed"
    );
}

#[test]
fn noise_transform_links_the_two_stochastic_forms() {
    let grid = line_grid(64, 16.0);
    let model = NoiseModel::gaussian(
        grid,
        &[BumpSpec {
            amplitude: 0.5,
            center: vec![0.0],
            sigma: 1.2,
        }],
    )
    .unwrap();
    let (u0, v0) = gaussian_pair(grid);
    let base = SimulationConfig {
        system: SystemForm::Rescaled,
        noise: model.clone(),
        horizon: 0.05,
        dt: 1e-4,
        cadence: 100,
        ..deterministic_config(grid, InitialData::Fields { u: u0, v: v0 })
    };
    let rescaled = run_trajectory(&base).unwrap();
    let direct = run_trajectory(&SimulationConfig {
        system: SystemForm::Direct,
        ..base
    })
    .unwrap();
    assert_eq!(rescaled.stop_reason, StopReason::Horizon);
    assert_eq!(direct.stop_reason, StopReason::Horizon);

    // u = exp(i phi B) y and v = exp(2 i phi B) z map one form onto the
    // other; both runs draw the same path from the shared seed
    let b = rescaled
        .paths
        .as_ref()
        .unwrap()
        .values_at_time(rescaled.stop_time)
        .unwrap()[0];
    let phi = model.phi(0);
    let mut du = 0.0f64;
    let mut dv = 0.0f64;
    for i in 0..grid.len() {
        let eu = Complex64::from_polar(1.0, phi[i] * b);
        let ev = Complex64::from_polar(1.0, 2.0 * phi[i] * b);
        du = du.max((direct.u.values()[i] - eu * rescaled.u.values()[i]).norm());
        dv = dv.max((direct.v.values()[i] - ev * rescaled.v.values()[i]).norm());
    }
    assert!(du < 1e-4, "u transform gap {du:.3e}");
    assert!(dv < 1e-4, "v transform gap {dv:.3e}");
}

#[test]
fn explicit_stepper_rejects_steps_beyond_the_cap() {
    let grid = line_grid(64, 16.0);
    let model = one_bump_model(grid);
    let cap = rk4_dt_cap(grid);
    let config = SimulationConfig {
        system: SystemForm::Rescaled,
        noise: model.clone(),
        dt: cap * 1.5,
        horizon: 1.0,
        ..deterministic_config(grid, InitialData::Zero)
    };
    let err = config.validate().unwrap_err();
    assert!(matches!(err, Error::Usage(_)), "got {err:?}");

    let paths = BrownianPaths::zeros(1, cap, 10).unwrap();
    let z = ComplexField::zeros(grid);
    let err = step_rescaled(&z, &z, &model, &paths, 0.0, cap * 1.5).unwrap_err();
    assert!(matches!(err, Error::Usage(_)), "got {err:?}");
}

#[test]
fn pulses_normalize_to_the_requested_mass() {
    let grid = line_grid(64, 16.0);
    let wave = 2.0 * std::f64::consts::PI * 2.0 / grid.length();
    let pulses = vec![
        GaussianPulse {
            slot: FieldSlot::U,
            amplitude: 1.0,
            center: vec![1.5],
            width: 1.0,
            wave: vec![0.0],
        },
        GaussianPulse {
            slot: FieldSlot::V,
            amplitude: 0.6,
            center: vec![-2.0],
            width: 1.3,
            wave: vec![wave],
        },
    ];
    let config = deterministic_config(
        grid,
        InitialData::Pulses {
            pulses: pulses.clone(),
            target_mass: Some(2.5),
        },
    );
    let (u, v) = initial_fields(&config).unwrap();
    let m = observables::mass(&u, &v).unwrap();
    assert!((m - 2.5).abs() < 1e-12, "mass {m} after normalization");
    assert!(u.max_abs() > 0.0 && v.max_abs() > 0.0);

    let bad = deterministic_config(
        grid,
        InitialData::Pulses {
            pulses: vec![GaussianPulse {
                center: vec![0.0, 0.0],
                ..pulses[0].clone()
            }],
            target_mass: None,
        },
    );
    let err = initial_fields(&bad).unwrap_err();
    assert!(matches!(err, Error::Usage(_)), "wrong center dimension: {err:?}");
}

#[test]
fn subthreshold_mass_run_keeps_kinetic_bounded() {
    let grid = Grid::new(4, 16, 10.5).unwrap();
    let config = SimulationConfig {
        system: SystemForm::Deterministic,
        grid,
        noise: NoiseModel::empty(grid),
        horizon: 5.0,
        dt: 1e-2,
        initial: InitialData::GroundStateFraction { fraction: 0.81 },
        seed: 1,
        blowup_threshold: None,
        cadence: 25,
        nonlinearity_on: true,
        path_dt: None,
    };
    let run = run_trajectory(&config).unwrap();
    assert_eq!(run.stop_reason, StopReason::Horizon, "stopped at {}", run.stop_time);

    let first = &run.series.records[0];
    let mass_0 = first.mass;
    let kinetic_0 = first.kinetic;
    let mut sup_ratio = 0.0f64;
    let mut mass_drift = 0.0f64;
    for rec in &run.series.records {
        sup_ratio = sup_ratio.max(rec.kinetic / kinetic_0);
        mass_drift = mass_drift.max((rec.mass - mass_0).abs() / mass_0);
    }
    assert!(
        sup_ratio < 10.0,
        "kinetic grew by {sup_ratio:.2}x on a subthreshold run"
    );
    // 16 points per axis barely resolve this profile, so the dealiasing
    // projection sheds a little band-edge content every step; the tight
    // conservation gate lives on a resolved grid in the conservation suite
    assert!(mass_drift < 1e-2, "mass drifted by {mass_drift:.3e}");
}
