//! Complex fields over interior grid nodes and their coefficient-space
//! mirrors.

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::C64;

/// Complex wave amplitude sampled on the interior nodes of a [`Grid`],
/// stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Vec<C64>,
}

impl ComplexField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Sample a function of the node coordinates.
    pub fn from_fn(grid: &Grid, mut f: impl FnMut(crate::domain::Point) -> C64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.node(i))).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Discrete L² norm: (Σ|u_i|² Πh_j)^{1/2}. Trapezoid quadrature with the
    /// zero boundary extension.
    pub fn l2_norm(&self) -> f64 {
        (self.l2_norm_sq()).sqrt()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        let w = self.grid.cell_volume();
        w * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()
    }

    pub fn inner(&self, other: &Self) -> C64 {
        let w = self.grid.cell_volume();
        let mut s = C64::new(0.0, 0.0);
        for (a, b) in self.values.iter().zip(&other.values) {
            s += a.conj() * b;
        }
        w * s
    }

    pub fn scale(&mut self, c: C64) {
        for v in &mut self.values {
            *v *= c;
        }
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    /// self += c·other
    pub fn axpy(&mut self, c: C64, other: &Self) {
        debug_assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(C64::new(-1.0, 0.0), other);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(C64::new(1.0, 0.0), other);
        out
    }
}

/// Coefficients of the Dirichlet sine expansion
/// u(x) = Σ_k c_k Π_j sin(k_j π x_j / l_j), k_j = 1..n_j,
/// stored row-major with k_j−1 as the array index.
///
/// Under this normalization a pure mode with unit coefficient has some
/// physical L² norm Π(l_j/2)^{1/2}; the discrete Parseval identity reads
/// Σ_i |u_i|² Π h_j = Π (l_j/2) · Σ_k |c_k|².
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs {
    grid: Grid,
    coeffs: Vec<C64>,
}

impl SpectralCoeffs {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![C64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_coeffs(grid: &Grid, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} coefficients for a grid of {} modes",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            coeffs,
        })
    }

    /// Single mode with 1-based multi-index `k` and amplitude `amp`.
    pub fn mode(grid: &Grid, k: [usize; 2], amp: C64) -> Result<Self> {
        let dim = grid.dim();
        for j in 0..dim {
            if k[j] < 1 || k[j] > grid.shape()[j] {
                return Err(Error::InvalidArgument(format!(
                    "mode index {k:?} out of range for shape {:?}",
                    grid.shape()
                )));
            }
        }
        let flat = if dim == 1 {
            k[0] - 1
        } else {
            (k[0] - 1) * grid.shape()[1] + (k[1] - 1)
        };
        let mut s = Self::zeros(grid);
        s.coeffs[flat] = amp;
        Ok(s)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    /// Weighted coefficient sum Σ (1+μ_k)^s |c_k|².
    pub fn weighted_norm_sq(&self, s: i32) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| (1.0 + self.grid.eigenvalue(i)).powi(s) * c.norm_sqr())
            .sum()
    }

    /// Physical L² norm of the represented field (exact Parseval).
    pub fn l2_norm(&self) -> f64 {
        let w: f64 = (0..self.grid.dim())
            .map(|j| 0.5 * self.grid.domain().length(j))
            .product();
        (w * self.weighted_norm_sq(0)).sqrt()
    }
}
