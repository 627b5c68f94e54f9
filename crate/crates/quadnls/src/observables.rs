use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::noise::{hess_pair_index, NoiseModel};
use crate::spectral::{inner_product, KahanSum, SpectralEngine};
use num_complex::Complex64;

/// M = ||u||^2 + 2 ||v||^2.
pub fn mass(u: &ComplexField, v: &ComplexField) -> Result<f64> {
    u.grid().assert_same(v.grid(), "mass operands")?;
    let w = u.grid().weight();
    let mut acc = KahanSum::new();
    for (a, b) in u.values().iter().zip(v.values()) {
        acc.add(a.norm_sqr() + 2.0 * b.norm_sqr());
    }
    Ok(acc.value() * w)
}

/// K = ||grad u||^2 + (1/2) ||grad v||^2.
pub fn kinetic(u: &ComplexField, v: &ComplexField) -> Result<f64> {
    u.grid().assert_same(v.grid(), "kinetic operands")?;
    let engine = SpectralEngine::new(*u.grid());
    let gu = engine.gradient(u)?;
    let gv = engine.gradient(v)?;
    let w = u.grid().weight();
    let mut acc = KahanSum::new();
    for a in 0..u.grid().d() {
        for (x, y) in gu[a].values().iter().zip(gv[a].values()) {
            acc.add(x.norm_sqr() + 0.5 * y.norm_sqr());
        }
    }
    Ok(acc.value() * w)
}

/// P = Re <v, u^2> = Re of the integral of v * conj(u)^2.
pub fn potential(u: &ComplexField, v: &ComplexField) -> Result<f64> {
    u.grid().assert_same(v.grid(), "potential operands")?;
    let w = u.grid().weight();
    let mut re = KahanSum::new();
    for (a, b) in u.values().iter().zip(v.values()) {
        let ubar2 = a.conj() * a.conj();
        re.add((b * ubar2).re);
    }
    Ok(re.value() * w)
}

/// E = K - 2P.
pub fn energy(u: &ComplexField, v: &ComplexField) -> Result<f64> {
    Ok(kinetic(u, v)? - 2.0 * potential(u, v)?)
}

/// ||u||_{H^1} + ||v||_{H^1} with the plain H^1 norm on each component.
pub fn h1_sum(u: &ComplexField, v: &ComplexField) -> Result<f64> {
    u.grid().assert_same(v.grid(), "h1_sum operands")?;
    let engine = SpectralEngine::new(*u.grid());
    let gu = engine.gradient(u)?;
    let gv = engine.gradient(v)?;
    let w = u.grid().weight();
    let mut nu = KahanSum::new();
    let mut nv = KahanSum::new();
    for (a, b) in u.values().iter().zip(v.values()) {
        nu.add(a.norm_sqr());
        nv.add(b.norm_sqr());
    }
    for axis in 0..u.grid().d() {
        for (a, b) in gu[axis].values().iter().zip(gv[axis].values()) {
            nu.add(a.norm_sqr());
            nv.add(b.norm_sqr());
        }
    }
    Ok((nu.value() * w).sqrt() + (nv.value() * w).sqrt())
}

fn check_model_inputs(
    y: &ComplexField,
    z: &ComplexField,
    model: &NoiseModel,
    b: &[f64],
) -> Result<()> {
    y.grid().assert_same(z.grid(), "energy-rate fields")?;
    y.grid().assert_same(model.grid(), "energy-rate model grid")?;
    if b.len() != model.len() {
        return Err(Error::usage(format!(
            "Brownian value count {} does not match bump count {}",
            b.len(),
            model.len()
        )));
    }
    Ok(())
}

/// The energy-rate right-hand side split into its seven groups, in the
/// order: bilaplacian |y|^2, bilaplacian |z|^2, Hessian grad-y, Hessian
/// grad-z, transport-squared y, transport-squared z, Laplacian coupling.
/// Groups 1-4 and 7 are linear in B; groups 5 and 6 are quadratic.
pub fn energy_rate_groups(
    y: &ComplexField,
    z: &ComplexField,
    model: &NoiseModel,
    b: &[f64],
) -> Result<[f64; 7]> {
    check_model_inputs(y, z, model, b)?;
    let grid = *y.grid();
    let d = grid.d();
    let len = grid.len();
    let w = grid.weight();
    let engine = SpectralEngine::new(grid);
    let gy = engine.gradient(y)?;
    let gz = engine.gradient(z)?;

    // B-weighted Hessian sum_k B_k d_i d_j phi_k, upper triangle
    let npairs = d * (d + 1) / 2;
    let mut hess_b = vec![vec![0.0f64; len]; npairs];
    for (k, &bk) in b.iter().enumerate() {
        if bk == 0.0 {
            continue;
        }
        for i in 0..d {
            for j in i..d {
                let src = model.hess_phi(k, i, j);
                let dst = &mut hess_b[hess_pair_index(d, i, j)];
                for (h, &s) in dst.iter_mut().zip(src) {
                    *h += bk * s;
                }
            }
        }
    }
    let q = model.eval_q(b)?;

    let mut g1 = KahanSum::new();
    let mut g2 = KahanSum::new();
    for (k, &bk) in b.iter().enumerate() {
        if bk == 0.0 {
            continue;
        }
        let bilap = model.bilap_phi(k);
        let mut s1 = KahanSum::new();
        let mut s2 = KahanSum::new();
        for p in 0..len {
            s1.add(bilap[p] * y.values()[p].norm_sqr());
            s2.add(bilap[p] * z.values()[p].norm_sqr());
        }
        g1.add(bk * s1.value());
        g2.add(bk * s2.value());
    }

    // Hessian contractions; symmetric pairs contribute twice via the real part
    let mut g3 = KahanSum::new();
    let mut g4 = KahanSum::new();
    for i in 0..d {
        for j in i..d {
            let h = &hess_b[hess_pair_index(d, i, j)];
            let pair_weight = if i == j { 1.0 } else { 2.0 };
            let mut s3 = KahanSum::new();
            let mut s4 = KahanSum::new();
            for p in 0..len {
                s3.add(h[p] * (gy[i].values()[p] * gy[j].values()[p].conj()).re);
                s4.add(h[p] * (gz[i].values()[p] * gz[j].values()[p].conj()).re);
            }
            g3.add(pair_weight * s3.value());
            g4.add(pair_weight * s4.value());
        }
    }

    // grad(q_j^2)_i = 2 q_j sum_k B_k d_i d_j phi_k, contracted with grad y
    let mut g5 = KahanSum::new();
    for j in 0..d {
        let mut s = KahanSum::new();
        for p in 0..len {
            let mut dot = Complex64::ZERO;
            for i in 0..d {
                let gq = 2.0 * q[j][p] * hess_b[hess_pair_index(d, i, j)][p];
                dot += gq * gy[i].values()[p];
            }
            s.add((dot * y.values()[p].conj()).im);
        }
        g5.add(s.value());
    }

    // same structure through the doubled fields of the z-equation noise:
    // q~_j = sum_k d_j(2 phi_k) B_k and grad(q~_j^2)_i = 2 q~_j * 2 hess_b
    let mut g6 = KahanSum::new();
    for j in 0..d {
        let mut s = KahanSum::new();
        for p in 0..len {
            let tq = 2.0 * q[j][p];
            let mut dot = Complex64::ZERO;
            for i in 0..d {
                let gq = 2.0 * tq * (2.0 * hess_b[hess_pair_index(d, i, j)][p]);
                dot += gq * gz[i].values()[p];
            }
            s.add((dot * z.values()[p].conj()).im);
        }
        g6.add(s.value());
    }

    let mut g7 = KahanSum::new();
    for (k, &bk) in b.iter().enumerate() {
        if bk == 0.0 {
            continue;
        }
        let lap = model.lap_phi(k);
        let mut s = KahanSum::new();
        for p in 0..len {
            let ybar2 = y.values()[p].conj() * y.values()[p].conj();
            s.add(lap[p] * (z.values()[p] * ybar2).re);
        }
        g7.add(bk * s.value());
    }

    Ok([
        g1.value() * w,
        0.5 * g2.value() * w,
        -4.0 * g3.value() * w,
        -2.0 * g4.value() * w,
        -2.0 * g5.value() * w,
        -0.5 * g6.value() * w,
        2.0 * g7.value() * w,
    ])
}

/// dE/dt along rescaled trajectories, the cancelled seven-group form.
pub fn energy_rate_rhs(
    y: &ComplexField,
    z: &ComplexField,
    model: &NoiseModel,
    b: &[f64],
) -> Result<f64> {
    let groups = energy_rate_groups(y, z, model, b)?;
    let mut acc = KahanSum::new();
    for g in groups {
        acc.add(g);
    }
    Ok(acc.value())
}

/// The eight pre-cancellation terms, each -2 Im <target, coefficient part>
/// with <f, g> the L^2 pairing integral of f * conj(g). Their sum equals
/// energy_rate_rhs; individually they carry large mutually cancelling
/// pieces, which is exactly what the identity test exercises.
pub fn raw_energy_rate_terms(
    y: &ComplexField,
    z: &ComplexField,
    model: &NoiseModel,
    b: &[f64],
) -> Result<[f64; 8]> {
    check_model_inputs(y, z, model, b)?;
    let grid = *y.grid();
    let d = grid.d();
    let engine = SpectralEngine::new(grid);
    let coeffs = model.eval_coeffs(b)?;

    let lap_y = engine.laplacian(y, 1.0)?;
    let lap_z_half = engine.laplacian(z, 0.5)?;
    let gy = engine.gradient(y)?;
    let gz = engine.gradient(z)?;

    let mut b1_dot_gy = ComplexField::zeros(grid);
    let mut b2_dot_gz = ComplexField::zeros(grid);
    for a in 0..d {
        for p in 0..grid.len() {
            b1_dot_gy.values_mut()[p] += coeffs.b1[a].values()[p] * gy[a].values()[p];
            b2_dot_gz.values_mut()[p] += coeffs.b2[a].values()[p] * gz[a].values()[p];
        }
    }
    let c1_y = y.zip_map(&coeffs.c1, |yv, cv| cv * yv)?;
    let c2_z = z.zip_map(&coeffs.c2, |zv, cv| cv * zv)?;
    let two_z_ybar = y.zip_map(z, |yv, zv| 2.0 * zv * yv.conj())?;
    let y_sq = y.map(|v| v * v);

    let term = |target: &ComplexField, part: &ComplexField| -> Result<f64> {
        Ok(-2.0 * inner_product(target, part)?.im)
    };
    Ok([
        term(&lap_y, &b1_dot_gy)?,
        term(&lap_y, &c1_y)?,
        term(&two_z_ybar, &b1_dot_gy)?,
        term(&two_z_ybar, &c1_y)?,
        term(&lap_z_half, &b2_dot_gz)?,
        term(&lap_z_half, &c2_z)?,
        term(&y_sq, &b2_dot_gz)?,
        term(&y_sq, &c2_z)?,
    ])
}

/// One sampled time on a trajectory. de_rhs is present only when the run
/// integrates the rescaled system; the flags are filled by check_bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRecord {
    pub t: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub potential: f64,
    pub energy: f64,
    pub de_rhs: Option<f64>,
    pub h1_sum: f64,
    pub flag_e2: bool,
    pub flag_gronwall: bool,
}

impl ObservableRecord {
    pub fn measure(t: f64, u: &ComplexField, v: &ComplexField, de_rhs: Option<f64>) -> Result<Self> {
        let m = mass(u, v)?;
        let k = kinetic(u, v)?;
        let p = potential(u, v)?;
        Ok(ObservableRecord {
            t,
            mass: m,
            kinetic: k,
            potential: p,
            energy: k - 2.0 * p,
            de_rhs,
            h1_sum: h1_sum(u, v)?,
            flag_e2: false,
            flag_gronwall: false,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservableSeries {
    pub records: Vec<ObservableRecord>,
}

impl ObservableSeries {
    pub fn new() -> Self {
        ObservableSeries { records: Vec::new() }
    }

    pub fn push(&mut self, r: ObservableRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Trapezoid integral of K from the first record up to record i.
    pub fn kinetic_integral_to(&self, i: usize) -> f64 {
        let mut acc = KahanSum::new();
        for j in 1..=i.min(self.records.len().saturating_sub(1)) {
            let a = &self.records[j - 1];
            let b = &self.records[j];
            acc.add(0.5 * (b.t - a.t) * (a.kinetic + b.kinetic));
        }
        acc.value()
    }

    /// Largest relative departure of the mass from its initial value.
    pub fn mass_drift(&self) -> f64 {
        let Some(first) = self.records.first() else {
            return 0.0;
        };
        let scale = first.mass.abs().max(1e-8);
        self.records
            .iter()
            .map(|r| (r.mass - first.mass).abs() / scale)
            .fold(0.0, f64::max)
    }

    pub fn max_kinetic(&self) -> f64 {
        self.records.iter().map(|r| r.kinetic).fold(0.0, f64::max)
    }
}

/// Outcome of the coercivity and envelope audits over one series.
#[derive(Debug, Clone)]
pub struct BoundsReport {
    /// false when the initial mass is at or above the ground-state mass,
    /// which puts the run outside the regime the coercivity bound covers
    pub coercivity_applicable: bool,
    pub coercivity_first_violation: Option<usize>,
    pub envelope_first_violation: Option<usize>,
    pub coercivity_margin: f64,
    pub pass: bool,
}

/// Per-record audit of the two a-priori bounds.
///
/// Coercivity: E(t) >= (1 - sqrt(M0 / M_gs)) K(t) - tol whenever the initial
/// mass sits strictly below the ground-state mass. Envelope:
/// E(t) <= E(0) + fit_c + fit_c * int_0^t K ds (trapezoid). Flags are written
/// back into the series records so serialized output carries them.
pub fn check_bounds(
    series: &mut ObservableSeries,
    gs_mass: f64,
    fit_c: f64,
    tol: f64,
) -> Result<BoundsReport> {
    if series.is_empty() {
        return Err(Error::usage("cannot check bounds of an empty series"));
    }
    if !(gs_mass.is_finite() && gs_mass > 0.0) {
        return Err(Error::usage(format!(
            "ground-state mass must be positive, got {gs_mass}"
        )));
    }
    let m0 = series.records[0].mass;
    let e0 = series.records[0].energy;
    let applicable = m0 < gs_mass;
    let margin = if applicable {
        1.0 - (m0 / gs_mass).sqrt()
    } else {
        0.0
    };

    let mut first_coercivity = None;
    let mut first_envelope = None;
    let n = series.len();
    for i in 0..n {
        let k_int = series.kinetic_integral_to(i);
        let r = &mut series.records[i];
        r.flag_e2 = false;
        if applicable {
            let lower = margin * r.kinetic - tol;
            if r.energy < lower {
                r.flag_e2 = true;
                if first_coercivity.is_none() {
                    first_coercivity = Some(i);
                }
            }
        }
        let upper = e0 + fit_c + fit_c * k_int;
        if r.energy > upper + tol {
            r.flag_gronwall = true;
            if first_envelope.is_none() {
                first_envelope = Some(i);
            }
        } else {
            r.flag_gronwall = false;
        }
    }
    Ok(BoundsReport {
        coercivity_applicable: applicable,
        coercivity_first_violation: first_coercivity,
        envelope_first_violation: first_envelope,
        coercivity_margin: margin,
        pass: first_coercivity.is_none() && first_envelope.is_none(),
    })
}

/// Smallest nonnegative C with E(t) <= E(0) + C + C int K for every record.
pub fn fit_envelope_constant(series: &ObservableSeries) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    let e0 = series.records[0].energy;
    let mut c = 0.0f64;
    for i in 0..series.len() {
        let excess = series.records[i].energy - e0;
        if excess > 0.0 {
            c = c.max(excess / (1.0 + series.kinetic_integral_to(i)));
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    #[test]
    fn constants_give_known_functionals() {
        let grid = Grid::new(2, 16, 4.0).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let u = ComplexField::constant(grid, one);
        let v = ComplexField::constant(grid, one);
        let vol = grid.length().powi(grid.d() as i32);
        assert!((mass(&u, &v).unwrap() - 3.0 * vol).abs() < 1e-10 * vol);
        assert!(kinetic(&u, &v).unwrap().abs() < 1e-10);
        assert!((potential(&u, &v).unwrap() - vol).abs() < 1e-10 * vol);
        assert!((energy(&u, &v).unwrap() + 2.0 * vol).abs() < 1e-10 * vol);
    }

    #[test]
    fn envelope_constant_covers_every_record() {
        let mut series = ObservableSeries::new();
        for i in 0..20 {
            let t = i as f64 * 0.1;
            series.push(ObservableRecord {
                t,
                mass: 1.0,
                kinetic: 1.0 + 0.1 * (3.0 * t).sin(),
                potential: 0.0,
                energy: 0.5 + 0.2 * t,
                de_rhs: None,
                h1_sum: 1.0,
                flag_e2: false,
                flag_gronwall: false,
            });
        }
        let c = fit_envelope_constant(&series);
        assert!(c > 0.0);
        let report = check_bounds(&mut series, 10.0, c, 1e-12).unwrap();
        assert!(report.envelope_first_violation.is_none());
        // any smaller constant must be flagged somewhere
        let report = check_bounds(&mut series, 10.0, c * 0.9, 1e-12).unwrap();
        assert!(report.envelope_first_violation.is_some());
    }
}
