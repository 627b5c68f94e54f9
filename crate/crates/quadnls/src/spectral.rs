use crate::error::Result;
use crate::field::ComplexField;
use crate::grid::Grid;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Plan cache shared across engines. Plan creation is serialized; the plans
/// themselves are immutable and shared read-only between threads.
fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap();
    cache
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Spectral differentiation and transform services on one grid.
///
/// Transforms are unitary (n^{-d/2} both directions), so Parseval holds
/// verbatim and physical-space quadrature equals spectral-space quadrature.
pub struct SpectralEngine {
    grid: Grid,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    k: Vec<f64>,
}

impl SpectralEngine {
    pub fn new(grid: Grid) -> SpectralEngine {
        SpectralEngine {
            grid,
            fwd: plan(grid.n(), false),
            inv: plan(grid.n(), true),
            k: grid.wavenumbers(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Largest wavenumber magnitude per axis.
    pub fn k_max(&self) -> f64 {
        self.k.iter().fold(0.0, |m, &k| m.max(k.abs()))
    }

    pub fn transform(&self, f: &ComplexField, direction: Direction) -> Result<ComplexField> {
        self.grid.assert_same(f.grid(), "transform")?;
        f.check_finite("transform input")?;
        let mut v = f.values().to_vec();
        match direction {
            Direction::Forward => self.forward_inplace(&mut v),
            Direction::Inverse => self.inverse_inplace(&mut v),
        }
        ComplexField::from_values(self.grid, v)
    }

    pub fn forward(&self, f: &ComplexField) -> Result<ComplexField> {
        self.transform(f, Direction::Forward)
    }

    pub fn inverse(&self, f: &ComplexField) -> Result<ComplexField> {
        self.transform(f, Direction::Inverse)
    }

    pub fn forward_inplace(&self, values: &mut [Complex64]) {
        self.transform_inplace(values, false);
    }

    pub fn inverse_inplace(&self, values: &mut [Complex64]) {
        self.transform_inplace(values, true);
    }

    fn transform_inplace(&self, values: &mut [Complex64], inverse: bool) {
        let n = self.grid.n();
        let d = self.grid.d();
        debug_assert_eq!(values.len(), self.grid.len());
        let fft = if inverse { &self.inv } else { &self.fwd };
        let mut line = vec![Complex64::ZERO; n];
        let mut scratch = vec![Complex64::ZERO; fft.get_inplace_scratch_len()];
        for axis in 0..d {
            let stride = self.grid.stride(axis);
            if stride == 1 {
                for chunk in values.chunks_exact_mut(n) {
                    fft.process_with_scratch(chunk, &mut scratch);
                }
            } else {
                let block = n * stride;
                let blocks = values.len() / block;
                for b in 0..blocks {
                    let base_block = b * block;
                    for inner in 0..stride {
                        let base = base_block + inner;
                        for t in 0..n {
                            line[t] = values[base + t * stride];
                        }
                        fft.process_with_scratch(&mut line, &mut scratch);
                        for t in 0..n {
                            values[base + t * stride] = line[t];
                        }
                    }
                }
            }
        }
        let norm = (n as f64).powi(d as i32).sqrt().recip();
        for v in values.iter_mut() {
            *v *= norm;
        }
    }

    /// out[k] = -factor * |k|^2 * src[k], spectral side.
    pub fn apply_laplacian_spectral(&self, src: &[Complex64], out: &mut [Complex64], factor: f64) {
        let k = &self.k;
        self.grid.for_each_index(|flat, ix| {
            let k2: f64 = ix.iter().map(|&i| k[i] * k[i]).sum();
            out[flat] = src[flat] * (-factor * k2);
        });
    }

    /// out[k] = i * k_axis * src[k] with the Nyquist mode zeroed on that axis.
    pub fn apply_gradient_spectral(&self, src: &[Complex64], out: &mut [Complex64], axis: usize) {
        let k = &self.k;
        let nyq = self.grid.nyquist_index();
        self.grid.for_each_index(|flat, ix| {
            let i = ix[axis];
            out[flat] = if i == nyq {
                Complex64::ZERO
            } else {
                src[flat] * Complex64::new(0.0, k[i])
            };
        });
    }

    /// Zero every mode whose index on any axis exceeds fraction * k_max.
    pub fn project_band_spectral(&self, values: &mut [Complex64], fraction: f64) {
        let keep = self.band_mask(fraction);
        self.grid.for_each_index(|flat, ix| {
            if ix.iter().any(|&i| !keep[i]) {
                values[flat] = Complex64::ZERO;
            }
        });
    }

    /// |k|^2 at every spectral node, flattened in grid order.
    pub fn k_squared(&self) -> Vec<f64> {
        let k = &self.k;
        let mut out = vec![0.0; self.grid.len()];
        self.grid.for_each_index(|flat, ix| {
            out[flat] = ix.iter().map(|&i| k[i] * k[i]).sum();
        });
        out
    }

    /// Per-axis keep mask for band projection.
    pub fn band_mask(&self, fraction: f64) -> Vec<bool> {
        let cutoff = fraction * self.k_max() * (1.0 + 1e-12);
        self.k.iter().map(|&k| k.abs() <= cutoff).collect()
    }

    /// factor * Laplacian of f, spectral multiplier -|k|^2.
    pub fn laplacian(&self, f: &ComplexField, factor: f64) -> Result<ComplexField> {
        self.grid.assert_same(f.grid(), "laplacian")?;
        f.check_finite("laplacian input")?;
        let mut v = f.values().to_vec();
        self.forward_inplace(&mut v);
        let mut out = vec![Complex64::ZERO; v.len()];
        self.apply_laplacian_spectral(&v, &mut out, factor);
        self.inverse_inplace(&mut out);
        ComplexField::from_values(self.grid, out)
    }

    /// All d partial derivatives of f.
    pub fn gradient(&self, f: &ComplexField) -> Result<Vec<ComplexField>> {
        self.grid.assert_same(f.grid(), "gradient")?;
        f.check_finite("gradient input")?;
        let mut hat = f.values().to_vec();
        self.forward_inplace(&mut hat);
        let mut parts = Vec::with_capacity(self.grid.d());
        for axis in 0..self.grid.d() {
            let mut out = vec![Complex64::ZERO; hat.len()];
            self.apply_gradient_spectral(&hat, &mut out, axis);
            self.inverse_inplace(&mut out);
            parts.push(ComplexField::from_values(self.grid, out)?);
        }
        Ok(parts)
    }

    /// Band-limit f to fraction * k_max per axis (physical in, physical out).
    pub fn band_limit(&self, f: &ComplexField, fraction: f64) -> Result<ComplexField> {
        self.grid.assert_same(f.grid(), "band_limit")?;
        let mut v = f.values().to_vec();
        self.forward_inplace(&mut v);
        self.project_band_spectral(&mut v, fraction);
        self.inverse_inplace(&mut v);
        ComplexField::from_values(self.grid, v)
    }
}

/// <f, g> = sum f * conj(g) * h^d with compensated (Neumaier) summation.
pub fn inner_product(f: &ComplexField, g: &ComplexField) -> Result<Complex64> {
    f.grid().assert_same(g.grid(), "inner_product")?;
    let mut sum_re = KahanSum::new();
    let mut sum_im = KahanSum::new();
    for (a, b) in f.values().iter().zip(g.values()) {
        let p = a * b.conj();
        sum_re.add(p.re);
        sum_im.add(p.im);
    }
    let w = f.grid().weight();
    Ok(Complex64::new(sum_re.value() * w, sum_im.value() * w))
}

/// ||f||_{L^2}^2 by quadrature.
pub fn l2_norm_sq(f: &ComplexField) -> f64 {
    let mut sum = KahanSum::new();
    for v in f.values() {
        sum.add(v.norm_sqr());
    }
    sum.value() * f.grid().weight()
}

/// Compensated scalar accumulator, Neumaier variant.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> KahanSum {
        KahanSum::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unitary_roundtrip_and_parseval() {
        let grid = Grid::new(2, 8, 3.0).unwrap();
        let eng = SpectralEngine::new(grid);
        let f = ComplexField::from_fn(grid, |x| {
            Complex64::new((x[0] * 1.3).sin(), (x[1] * 0.7).cos())
        });
        let hat = eng.forward(&f).unwrap();
        let back = eng.inverse(&hat).unwrap();
        let num: f64 = f
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        assert!(num.sqrt() < 1e-13);
        let pf = l2_norm_sq(&f);
        let ph = l2_norm_sq(&hat);
        assert!((pf - ph).abs() <= 1e-12 * pf);
    }

    #[test]
    fn kahan_handles_cancellation() {
        let mut s = KahanSum::new();
        s.add(1e16);
        s.add(1.0);
        s.add(-1e16);
        assert_eq!(s.value(), 1.0);
    }
}
