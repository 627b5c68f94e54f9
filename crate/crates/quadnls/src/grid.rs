use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Uniform periodic box [-L/2, L/2)^d sampled with n points per axis.
///
/// Layout of bound fields is row major: axis 0 is slowest, axis d-1 is
/// contiguous. Quadrature weight is h^d at every point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    d: usize,
    n: usize,
    length: f64,
}

impl Grid {
    pub fn new(d: usize, n: usize, length: f64) -> Result<Grid> {
        if !(1..=4).contains(&d) {
            return Err(Error::usage(format!("dimension must be 1..=4, got {d}")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::usage(format!(
                "points per axis must be a power of two >= 4, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::usage(format!("box length must be positive, got {length}")));
        }
        Ok(Grid { d, n, length })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn h(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Total point count n^d.
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight h^d.
    pub fn weight(&self) -> f64 {
        self.h().powi(self.d as i32)
    }

    /// Physical coordinates along one axis: x_j = j*h - L/2.
    pub fn axis_coords(&self) -> Vec<f64> {
        let h = self.h();
        (0..self.n).map(|j| j as f64 * h - self.length / 2.0).collect()
    }

    /// Wavenumbers along one axis in DFT index order:
    /// (2 pi / L) * [0, 1, ..., n/2 - 1, -n/2, ..., -1].
    pub fn wavenumbers(&self) -> Vec<f64> {
        let scale = 2.0 * PI / self.length;
        (0..self.n)
            .map(|j| {
                let m = if j <= self.n / 2 - 1 { j as isize } else { j as isize - self.n as isize };
                scale * m as f64
            })
            .collect()
    }

    /// Index of the Nyquist mode along any axis.
    pub fn nyquist_index(&self) -> usize {
        self.n / 2
    }

    /// Stride of the given axis in the row-major layout.
    pub fn stride(&self, axis: usize) -> usize {
        debug_assert!(axis < self.d);
        self.n.pow((self.d - 1 - axis) as u32)
    }

    /// Decode a flat index into per-axis indices (only the first d entries used).
    pub fn decode(&self, mut idx: usize) -> [usize; 4] {
        let mut out = [0usize; 4];
        for axis in (0..self.d).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    /// Visit every point with its per-axis indices, in flat order.
    /// The closure receives (flat index, &[axis indices; d]).
    pub fn for_each_index(&self, mut f: impl FnMut(usize, &[usize])) {
        let d = self.d;
        let n = self.n;
        let mut ix = [0usize; 4];
        for flat in 0..self.len() {
            f(flat, &ix[..d]);
            for axis in (0..d).rev() {
                ix[axis] += 1;
                if ix[axis] < n {
                    break;
                }
                ix[axis] = 0;
            }
        }
    }

    pub fn assert_same(&self, other: &Grid, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!(
                "{what}: {}d n={} L={} vs {}d n={} L={}",
                self.d, self.n, self.length, other.d, other.n, other.length
            )));
        }
        Ok(())
    }
}
