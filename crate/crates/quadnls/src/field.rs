use crate::error::{Error, Result};
use crate::grid::Grid;
use num_complex::Complex64;

/// Complex scalar field bound to a grid. Binary operations require both
/// operands to share the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(grid: Grid) -> ComplexField {
        ComplexField {
            grid,
            values: vec![Complex64::ZERO; grid.len()],
        }
    }

    pub fn constant(grid: Grid, value: Complex64) -> ComplexField {
        ComplexField {
            grid,
            values: vec![value; grid.len()],
        }
    }

    pub fn from_values(grid: Grid, values: Vec<Complex64>) -> Result<ComplexField> {
        if values.len() != grid.len() {
            return Err(Error::usage(format!(
                "value count {} does not match grid point count {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(ComplexField { grid, values })
    }

    /// Build from physical coordinates. The closure receives the coordinate
    /// vector of each point (length d).
    pub fn from_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> ComplexField {
        let coords = grid.axis_coords();
        let d = grid.d();
        let mut values = Vec::with_capacity(grid.len());
        let mut x = [0.0f64; 4];
        grid.for_each_index(|_, ix| {
            for (a, &i) in ix.iter().enumerate() {
                x[a] = coords[i];
            }
            values.push(f(&x[..d]));
        });
        ComplexField { grid, values }
    }

    /// Real-valued variant of from_fn.
    pub fn from_real_fn(grid: Grid, mut f: impl FnMut(&[f64]) -> f64) -> ComplexField {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn check_finite(&self, what: &str) -> Result<()> {
        if !self.all_finite() {
            return Err(Error::numeric(format!("{what}: non-finite field values")));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> ComplexField {
        ComplexField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ComplexField, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<ComplexField> {
        self.grid.assert_same(&other.grid, "zip_map")?;
        Ok(ComplexField {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, s: Complex64) -> ComplexField {
        self.map(|v| v * s)
    }

    pub fn add(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip_map(other, |a, b| a - b)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &ComplexField) -> Result<ComplexField> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn conj(&self) -> ComplexField {
        self.map(|v| v.conj())
    }

    /// Max pointwise modulus.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_fn_sees_centered_coordinates() {
        let g = Grid::new(2, 4, 4.0).unwrap();
        let f = ComplexField::from_real_fn(g, |x| x[0] + 10.0 * x[1]);
        // first point is the box corner (-2, -2)
        assert_eq!(f.values()[0].re, -22.0);
        // last point is (1, 1) with h = 1
        assert_eq!(f.values()[g.len() - 1].re, 11.0);
    }

    #[test]
    fn binary_ops_reject_mismatched_grids() {
        let a = ComplexField::zeros(Grid::new(1, 8, 1.0).unwrap());
        let b = ComplexField::zeros(Grid::new(1, 16, 1.0).unwrap());
        assert!(a.add(&b).is_err());
    }
}
