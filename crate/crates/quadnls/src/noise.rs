use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::grid::Grid;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::OnceLock;

/// Isotropic Gaussian bump a * exp(-|x - c|^2 / sigma^2).
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSpec {
    pub amplitude: f64,
    pub center: Vec<f64>,
    pub sigma: f64,
}

#[derive(Debug, Clone)]
enum BumpKind {
    Gaussian(BumpSpec),
    /// Test-only: spatially constant bump. Fails flatness by design.
    Constant(f64),
}

/// Static per-bump fields. All are periodizations of the closed-form
/// expressions: the bump and its derivatives are summed over lattice images
/// within an 8 sigma cutoff, so torus integration by parts is exact to
/// roundoff. Sampling the bare closed forms instead breaks the energy-rate
/// identity at the image-tail level, far above test tolerances.
#[derive(Debug, Clone)]
struct BumpFields {
    kind: BumpKind,
    phi: Vec<f64>,
    grad: Vec<Vec<f64>>,
    lap: Vec<f64>,
    bilap: Vec<f64>,
    /// Upper-triangle Hessian (i <= j), built on first use.
    hess: OnceLock<Vec<Vec<f64>>>,
}

/// The bump set plus every derived static field the equations need.
#[derive(Debug, Clone)]
pub struct NoiseModel {
    grid: Grid,
    bumps: Vec<BumpFields>,
    mu: Vec<f64>,
    mu_tilde: Vec<f64>,
    test_only: bool,
}

/// Default admissibility gate for bump construction.
pub const FLATNESS_THRESHOLD: f64 = 1e-8;
pub const FLATNESS_ORDER: usize = 2;

const IMAGE_CUTOFF_SIGMAS: f64 = 8.0;

/// Lattice image offsets whose shifted center lies within rcut of the box.
fn image_offsets(grid: &Grid, center: &[f64], rcut: f64) -> Vec<[f64; 4]> {
    let l = grid.length();
    let d = grid.d();
    let half = l / 2.0;
    let mut ranges = Vec::with_capacity(d);
    for a in 0..d {
        let lo = ((-half - rcut - center[a]) / l).ceil() as i64;
        let hi = ((half + rcut - center[a]) / l).floor() as i64;
        ranges.push((lo, hi.max(lo)));
    }
    let mut out = Vec::new();
    let mut m = [0i64; 4];
    fn rec(
        axis: usize,
        d: usize,
        ranges: &[(i64, i64)],
        m: &mut [i64; 4],
        center: &[f64],
        l: f64,
        half: f64,
        rcut: f64,
        out: &mut Vec<[f64; 4]>,
    ) {
        if axis == d {
            let mut gap2 = 0.0;
            for a in 0..d {
                let c = center[a] + l * m[a] as f64;
                let g = (c.abs() - half).max(0.0);
                gap2 += g * g;
            }
            if gap2.sqrt() <= rcut {
                let mut shifted = [0.0f64; 4];
                for a in 0..d {
                    shifted[a] = center[a] + l * m[a] as f64;
                }
                out.push(shifted);
            }
            return;
        }
        for v in ranges[axis].0..=ranges[axis].1 {
            m[axis] = v;
            rec(axis + 1, d, ranges, m, center, l, half, rcut, out);
        }
    }
    rec(0, d, &ranges, &mut m, center, l, half, rcut, &mut out);
    out
}

impl BumpFields {
    fn gaussian(grid: &Grid, spec: &BumpSpec) -> BumpFields {
        let d = grid.d();
        let len = grid.len();
        let coords = grid.axis_coords();
        let sigma = spec.sigma;
        let images = image_offsets(grid, &spec.center, IMAGE_CUTOFF_SIGMAS * sigma);

        let mut phi = vec![0.0; len];
        let mut grad = vec![vec![0.0; len]; d];
        let mut lap = vec![0.0; len];
        let mut bilap = vec![0.0; len];

        let df = d as f64;
        let s1 = sigma.recip();
        let s2 = s1 * s1;
        let s4 = s2 * s2;
        for c in &images {
            grid.for_each_index(|flat, ix| {
                let mut r2 = 0.0;
                let mut v = [0.0f64; 4];
                for a in 0..d {
                    v[a] = (coords[ix[a]] - c[a]) * s1;
                    r2 += v[a] * v[a];
                }
                let g = spec.amplitude * (-r2).exp();
                phi[flat] += g;
                for a in 0..d {
                    grad[a][flat] += -2.0 * v[a] * g * s1;
                }
                lap[flat] += (4.0 * r2 - 2.0 * df) * g * s2;
                bilap[flat] +=
                    (16.0 * r2 * r2 - (16.0 * df + 32.0) * r2 + 4.0 * df * df + 8.0 * df) * g * s4;
            });
        }
        BumpFields {
            kind: BumpKind::Gaussian(spec.clone()),
            phi,
            grad,
            lap,
            bilap,
            hess: OnceLock::new(),
        }
    }

    fn constant(grid: &Grid, value: f64) -> BumpFields {
        let len = grid.len();
        BumpFields {
            kind: BumpKind::Constant(value),
            phi: vec![value; len],
            grad: vec![vec![0.0; len]; grid.d()],
            lap: vec![0.0; len],
            bilap: vec![0.0; len],
            hess: OnceLock::new(),
        }
    }

    /// Upper-triangle second derivatives, pair order (0,0),(0,1),...,(d-1,d-1).
    fn hessian(&self, grid: &Grid) -> &Vec<Vec<f64>> {
        self.hess.get_or_init(|| {
            let d = grid.d();
            let len = grid.len();
            let npairs = d * (d + 1) / 2;
            let mut hess = vec![vec![0.0; len]; npairs];
            if let BumpKind::Gaussian(spec) = &self.kind {
                let coords = grid.axis_coords();
                let images = image_offsets(grid, &spec.center, IMAGE_CUTOFF_SIGMAS * spec.sigma);
                let s1 = spec.sigma.recip();
                let s2 = s1 * s1;
                for c in &images {
                    grid.for_each_index(|flat, ix| {
                        let mut r2 = 0.0;
                        let mut v = [0.0f64; 4];
                        for a in 0..d {
                            v[a] = (coords[ix[a]] - c[a]) * s1;
                            r2 += v[a] * v[a];
                        }
                        let g = spec.amplitude * (-r2).exp();
                        let mut p = 0;
                        for i in 0..d {
                            for j in i..d {
                                let delta = if i == j { 2.0 } else { 0.0 };
                                hess[p][flat] += (4.0 * v[i] * v[j] - delta) * g * s2;
                                p += 1;
                            }
                        }
                    });
                }
            }
            hess
        })
    }
}

/// Flat pair index into the upper-triangle Hessian storage.
pub fn hess_pair_index(d: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // row i starts after d + (d-1) + ... + (d-i+1) entries
    i * d - i * (i + 1) / 2 + j
}

/// Per-bump flatness scores: max over the outer shell of <x>^2 |d^nu phi|.
#[derive(Debug, Clone)]
pub struct FlatnessReport {
    pub threshold: f64,
    pub max_order: usize,
    /// (bump index, worst score, multi-index attaining it)
    pub scores: Vec<(usize, f64, Vec<usize>)>,
    pub pass: bool,
}

impl NoiseModel {
    /// Gaussian bump model, gated on the flatness criterion.
    pub fn gaussian(grid: Grid, specs: &[BumpSpec]) -> Result<NoiseModel> {
        Self::gaussian_with_gate(grid, specs, FLATNESS_ORDER, FLATNESS_THRESHOLD)
    }

    pub fn gaussian_with_gate(
        grid: Grid,
        specs: &[BumpSpec],
        flatness_order: usize,
        flatness_threshold: f64,
    ) -> Result<NoiseModel> {
        for (k, s) in specs.iter().enumerate() {
            if !(s.sigma.is_finite() && s.sigma > 0.0) {
                return Err(Error::usage(format!("bump {}: sigma must be positive", k + 1)));
            }
            if s.center.len() != grid.d() {
                return Err(Error::usage(format!(
                    "bump {}: center has {} components, grid dimension is {}",
                    k + 1,
                    s.center.len(),
                    grid.d()
                )));
            }
            if !s.amplitude.is_finite() {
                return Err(Error::usage(format!("bump {}: amplitude must be finite", k + 1)));
            }
        }
        let model = Self::assemble(
            grid,
            specs.iter().map(|s| BumpFields::gaussian(&grid, s)).collect(),
            false,
        );
        let report = model.check_flatness(flatness_order, flatness_threshold);
        if !report.pass {
            let worst = report
                .scores
                .iter()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .expect("nonempty on failure");
            return Err(Error::usage(format!(
                "bump {} fails flatness: score {:.3e} above threshold {:.3e} (order {:?}); \
                 shrink sigma or move the center inward",
                worst.0 + 1,
                worst.1,
                flatness_threshold,
                worst.2
            )));
        }
        Ok(model)
    }

    /// Deterministic system: no bumps.
    pub fn empty(grid: Grid) -> NoiseModel {
        Self::assemble(grid, Vec::new(), false)
    }

    /// Test-only model with one spatially constant bump. Exempt from the
    /// flatness gate; used to exercise the zero-derivative code paths.
    pub fn constant_test_model(grid: Grid, value: f64) -> NoiseModel {
        Self::assemble(grid, vec![BumpFields::constant(&grid, value)], true)
    }

    fn assemble(grid: Grid, bumps: Vec<BumpFields>, test_only: bool) -> NoiseModel {
        let len = grid.len();
        let mut mu = vec![0.0; len];
        for b in &bumps {
            for (m, &p) in mu.iter_mut().zip(&b.phi) {
                *m += 0.5 * p * p;
            }
        }
        let mu_tilde = mu.iter().map(|&m| 4.0 * m).collect();
        NoiseModel {
            grid,
            bumps,
            mu,
            mu_tilde,
            test_only,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.bumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }

    pub fn is_test_only(&self) -> bool {
        self.test_only
    }

    pub fn bump_spec(&self, k: usize) -> Option<&BumpSpec> {
        match &self.bumps[k].kind {
            BumpKind::Gaussian(s) => Some(s),
            BumpKind::Constant(_) => None,
        }
    }

    pub fn phi(&self, k: usize) -> &[f64] {
        &self.bumps[k].phi
    }

    pub fn grad_phi(&self, k: usize, axis: usize) -> &[f64] {
        &self.bumps[k].grad[axis]
    }

    pub fn lap_phi(&self, k: usize) -> &[f64] {
        &self.bumps[k].lap
    }

    pub fn bilap_phi(&self, k: usize) -> &[f64] {
        &self.bumps[k].bilap
    }

    /// Hessian component (i, j) of bump k.
    pub fn hess_phi(&self, k: usize, i: usize, j: usize) -> &[f64] {
        let pair = hess_pair_index(self.grid.d(), i, j);
        &self.bumps[k].hessian(&self.grid)[pair]
    }

    /// Damping mu = (1/2) sum phi_k^2, nonnegative pointwise.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// mu_tilde = 4 mu exactly.
    pub fn mu_tilde(&self) -> &[f64] {
        &self.mu_tilde
    }

    /// W(t_m) = i sum_k phi_k B_k(t_m); purely imaginary by construction.
    pub fn eval_w(&self, paths: &BrownianPaths, m: usize) -> Result<ComplexField> {
        if paths.n_paths() != self.len() {
            return Err(Error::usage(format!(
                "path count {} does not match bump count {}",
                paths.n_paths(),
                self.len()
            )));
        }
        let mut imag = vec![0.0; self.grid.len()];
        for k in 0..self.len() {
            let b = paths.value(k, m)?;
            for (w, &p) in imag.iter_mut().zip(&self.bumps[k].phi) {
                *w += p * b;
            }
        }
        ComplexField::from_values(
            self.grid,
            imag.into_iter().map(|w| Complex64::new(0.0, w)).collect(),
        )
    }

    /// W~ = 2W.
    pub fn eval_w_tilde(&self, paths: &BrownianPaths, m: usize) -> Result<ComplexField> {
        Ok(self.eval_w(paths, m)?.scale(Complex64::new(2.0, 0.0)))
    }

    /// Transport fields q_j = sum_k d_j(phi_k) B_k.
    pub fn eval_q(&self, b: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_b(b)?;
        let d = self.grid.d();
        let mut q = vec![vec![0.0; self.grid.len()]; d];
        for (k, &bk) in b.iter().enumerate() {
            for a in 0..d {
                for (qv, &g) in q[a].iter_mut().zip(&self.bumps[k].grad[a]) {
                    *qv += g * bk;
                }
            }
        }
        Ok(q)
    }

    /// R = sum_k lap(phi_k) B_k.
    pub fn eval_r(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.check_b(b)?;
        let mut r = vec![0.0; self.grid.len()];
        for (k, &bk) in b.iter().enumerate() {
            for (rv, &l) in r.iter_mut().zip(&self.bumps[k].lap) {
                *rv += l * bk;
            }
        }
        Ok(r)
    }

    /// Rescaled-equation coefficients at the given Brownian values.
    ///
    /// b1 = 2 grad W, b2 = grad W~; c1 = sum_j (d_j W)^2 + lap W and
    /// c2 = (1/2) sum_j (d_j W~)^2 + (1/2) lap W~, both expanded with
    /// W = i sum phi_k B_k. The two c's are built through their own routes
    /// (W for c1, W~ for c2) so agreement of the expected Re/Im ratios is a
    /// genuine cross-check, not a restatement.
    pub fn eval_coeffs(&self, b: &[f64]) -> Result<Coefficients> {
        self.check_b(b)?;
        let d = self.grid.d();
        let len = self.grid.len();
        let q = self.eval_q(b)?;
        let r = self.eval_r(b)?;

        let mut b1 = Vec::with_capacity(d);
        let mut b2 = Vec::with_capacity(d);
        for a in 0..d {
            let mut v1 = vec![Complex64::ZERO; len];
            let mut v2 = vec![Complex64::ZERO; len];
            for i in 0..len {
                // b1 via 2 * grad(phi_k), b2 via grad(2 phi_k)
                v1[i] = Complex64::new(0.0, 2.0 * q[a][i]);
                let mut tilde = 0.0;
                for (k, &bk) in b.iter().enumerate() {
                    tilde += 2.0 * self.bumps[k].grad[a][i] * bk;
                }
                v2[i] = Complex64::new(0.0, tilde);
            }
            b1.push(ComplexField::from_values(self.grid, v1)?);
            b2.push(ComplexField::from_values(self.grid, v2)?);
        }

        let mut c1 = vec![Complex64::ZERO; len];
        let mut c2 = vec![Complex64::ZERO; len];
        for i in 0..len {
            let mut qq = 0.0;
            for qa in q.iter() {
                qq += qa[i] * qa[i];
            }
            c1[i] = Complex64::new(-qq, r[i]);
            // W~ route: (1/2)(2 i q)^2 summed over axes, plus (1/2)(2 i R)
            c2[i] = Complex64::new(-2.0 * qq, r[i]);
        }
        Ok(Coefficients {
            b1,
            b2,
            c1: ComplexField::from_values(self.grid, c1)?,
            c2: ComplexField::from_values(self.grid, c2)?,
        })
    }

    fn check_b(&self, b: &[f64]) -> Result<()> {
        if b.len() != self.len() {
            return Err(Error::usage(format!(
                "Brownian value count {} does not match bump count {}",
                b.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Assumption check: the weighted sup <x>^2 |d^nu phi_k| over the outer
    /// 10% shell of the box must be small for every |nu| <= max_order.
    /// The shell is where the periodic embedding of a decaying bump would
    /// show its tails; a score above threshold means the box is too small
    /// for the bump, or the bump is not a decaying function at all.
    pub fn check_flatness(&self, max_order: usize, threshold: f64) -> FlatnessReport {
        let d = self.grid.d();
        let coords = self.grid.axis_coords();
        let shell = 0.45 * self.grid.length();
        let multi_indices = enumerate_multi_indices(d, max_order);

        let mut scores = Vec::with_capacity(self.bumps.len());
        let mut pass = true;
        for (kb, bump) in self.bumps.iter().enumerate() {
            let mut worst = 0.0f64;
            let mut worst_nu = vec![0; d];
            match &bump.kind {
                BumpKind::Constant(v) => {
                    // derivatives vanish identically; only nu = 0 scores,
                    // and it is worst at the box corner
                    let max_coord = coords.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
                    worst = (1.0 + d as f64 * max_coord * max_coord) * v.abs();
                    worst_nu = vec![0; d];
                }
                BumpKind::Gaussian(spec) => {
                    let images =
                        image_offsets(&self.grid, &spec.center, IMAGE_CUTOFF_SIGMAS * spec.sigma);
                    self.grid.for_each_index(|_, ix| {
                        let mut on_shell = false;
                        let mut x = [0.0f64; 4];
                        let mut x2 = 0.0;
                        for a in 0..d {
                            x[a] = coords[ix[a]];
                            x2 += x[a] * x[a];
                            if x[a].abs() >= shell {
                                on_shell = true;
                            }
                        }
                        if !on_shell {
                            return;
                        }
                        let weight = 1.0 + x2;
                        for nu in &multi_indices {
                            let mut val = 0.0;
                            for c in &images {
                                val += gaussian_derivative(spec, c, &x[..d], nu);
                            }
                            let score = weight * val.abs();
                            if score > worst {
                                worst = score;
                                worst_nu = nu.clone();
                            }
                        }
                    });
                }
            }
            if worst > threshold {
                pass = false;
            }
            scores.push((kb, worst, worst_nu));
        }
        FlatnessReport {
            threshold,
            max_order,
            scores,
            pass,
        }
    }
}

/// d^nu of a single Gaussian image at point x, via the Hermite recurrence
/// H_{m+1}(t) = 2 t H_m(t) - 2 m H_{m-1}(t) applied per axis:
/// d^m/dx^m exp(-((x-c)/s)^2) = (-1/s)^m H_m((x-c)/s) exp(-((x-c)/s)^2).
fn gaussian_derivative(spec: &BumpSpec, center: &[f64; 4], x: &[f64], nu: &[usize]) -> f64 {
    let s = spec.sigma;
    let mut out = spec.amplitude;
    for (a, &order) in nu.iter().enumerate() {
        let t = (x[a] - center[a]) / s;
        let mut h_prev = 0.0;
        let mut h = 1.0;
        for m in 0..order {
            let next = 2.0 * t * h - 2.0 * m as f64 * h_prev;
            h_prev = h;
            h = next;
        }
        out *= (-1.0 / s).powi(order as i32) * h * (-t * t).exp();
    }
    out
}

fn enumerate_multi_indices(d: usize, max_order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut nu = vec![0usize; d];
    fn rec(axis: usize, budget: usize, nu: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if axis == nu.len() {
            out.push(nu.clone());
            return;
        }
        for v in 0..=budget {
            nu[axis] = v;
            rec(axis + 1, budget - v, nu, out);
        }
        nu[axis] = 0;
    }
    rec(0, max_order, &mut nu, &mut out);
    out
}

/// Rescaled-equation coefficient fields at one time.
pub struct Coefficients {
    pub b1: Vec<ComplexField>,
    pub b2: Vec<ComplexField>,
    pub c1: ComplexField,
    pub c2: ComplexField,
}

/// N independent Brownian paths on a uniform lattice, cumulative values.
#[derive(Debug, Clone)]
pub struct BrownianPaths {
    dt: f64,
    /// values[k][m], m in 0..=steps; values[k][0] = 0
    values: Vec<Vec<f64>>,
    seed: u64,
}

impl BrownianPaths {
    pub fn n_paths(&self) -> usize {
        self.values.len()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.values.first().map_or(0, |v| v.len() - 1)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn horizon(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn value(&self, k: usize, m: usize) -> Result<f64> {
        if k >= self.n_paths() {
            return Err(Error::usage(format!("path index {k} out of range")));
        }
        self.values[k]
            .get(m)
            .copied()
            .ok_or_else(|| Error::usage(format!("step index {m} out of range (steps = {})", self.steps())))
    }

    /// All path values at lattice node m.
    pub fn values_at_node(&self, m: usize) -> Result<Vec<f64>> {
        (0..self.n_paths()).map(|k| self.value(k, m)).collect()
    }

    /// Linear interpolation of the lattice at an arbitrary time in
    /// [0, steps * dt]. The integrators evaluate stage times through this.
    pub fn values_at_time(&self, t: f64) -> Result<Vec<f64>> {
        if self.values.is_empty() {
            return Ok(Vec::new());
        }
        let horizon = self.horizon();
        if !(t >= -1e-12 && t <= horizon * (1.0 + 1e-12) + 1e-12) {
            return Err(Error::usage(format!(
                "time {t} outside the Brownian lattice [0, {horizon}]"
            )));
        }
        if self.steps() == 0 {
            return Ok(vec![0.0; self.n_paths()]);
        }
        let s = (t / self.dt).clamp(0.0, self.steps() as f64);
        let m = (s.floor() as usize).min(self.steps() - 1);
        let frac = s - m as f64;
        Ok(self
            .values
            .iter()
            .map(|path| path[m] + frac * (path[m + 1] - path[m]))
            .collect())
    }
}

impl BrownianPaths {
    /// The identically-zero path bundle. Driving the rescaled system with it
    /// must reproduce the deterministic system: every transport coefficient
    /// is linear in the path values.
    pub fn zeros(n: usize, dt: f64, steps: usize) -> Result<BrownianPaths> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::usage(format!("path dt must be positive, got {dt}")));
        }
        Ok(BrownianPaths {
            dt,
            values: vec![vec![0.0; steps + 1]; n],
            seed: 0,
        })
    }
}

/// Sample N Brownian paths with Gaussian increments of variance dt.
/// steps = 0 yields the single record B_k(0) = 0. Identical seeds give
/// bit-identical paths; increments are drawn path-major so the layout is
/// independent of any parallelism in the caller.
pub fn sample_paths(n: usize, dt: f64, steps: usize, seed: u64) -> Result<BrownianPaths> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::usage(format!("path dt must be positive, got {dt}")));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let scale = dt.sqrt();
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let mut path = Vec::with_capacity(steps + 1);
        let mut acc = 0.0f64;
        path.push(acc);
        for _ in 0..steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            acc += scale * z;
            path.push(acc);
        }
        values.push(path);
    }
    Ok(BrownianPaths { dt, values, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_pair_indexing_is_dense() {
        let d = 4;
        let mut seen = vec![false; d * (d + 1) / 2];
        for i in 0..d {
            for j in i..d {
                seen[hess_pair_index(d, i, j)] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
        assert_eq!(hess_pair_index(d, 2, 1), hess_pair_index(d, 1, 2));
    }

    #[test]
    fn image_sum_makes_fields_periodic() {
        let grid = Grid::new(1, 64, 8.0).unwrap();
        let spec = BumpSpec {
            amplitude: 1.0,
            center: vec![3.5], // close to the box edge
            sigma: 0.8,
        };
        let bump = BumpFields::gaussian(&grid, &spec);
        // x = -4 sits one period left of x = +4; the image at m = 1 puts
        // the wrapped tail exp(-((x + 8 - 3.5)/sigma)^2) there
        let left = bump.phi[0];
        let wrapped = {
            let v = (-4.0 + 8.0 - 3.5) / spec.sigma;
            (-v * v).exp()
        };
        let bare = {
            let v = (-4.0 - 3.5) / spec.sigma;
            (-v * v).exp()
        };
        assert!((left - (wrapped + bare)).abs() < 1e-15, "left = {left}");
        assert!(wrapped > 1e-3, "wrapped tail should dominate the edge value");
    }
}
