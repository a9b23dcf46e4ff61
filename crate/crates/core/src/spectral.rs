//! Fast Dirichlet sine transforms and the diagonal spectral calculus built
//! on them.
//!
//! DST-I of a line u_1..u_n is computed through a complex FFT of length
//! 2(n+1) on the odd extension, so any interior count n is supported. The
//! forward direction returns function coefficients (unit coefficient ⇔ unit
//! mode amplitude); the inverse is plain evaluation of the sine expansion at
//! the nodes.

use std::collections::HashMap;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::field::{ComplexField, SpectralCoeffs};
use crate::C64;

/// Cached FFT plans and scratch space for one grid shape.
pub struct DstPlan {
    grid: Grid,
    ffts: HashMap<usize, Arc<dyn Fft<f64>>>,
}

impl DstPlan {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let mut ffts: HashMap<usize, Arc<dyn Fft<f64>>> = HashMap::new();
        for &n in grid.shape() {
            ffts.entry(2 * (n + 1))
                .or_insert_with(|| planner.plan_fft_forward(2 * (n + 1)));
        }
        Self {
            grid: grid.clone(),
            ffts,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if *grid != self.grid {
            return Err(Error::ShapeMismatch(
                "field grid does not match the transform plan".into(),
            ));
        }
        Ok(())
    }

    /// Raw DST-I along one line: out_k = Σ_i in_i sin(π i k/(n+1)), both
    /// 1-based, via the odd extension v of length 2(n+1) and X_k = (i/2)·F[k].
    fn line_dst(&self, line: &mut [C64], scratch: &mut Vec<C64>) {
        let n = line.len();
        let m = 2 * (n + 1);
        scratch.clear();
        scratch.resize(m, C64::new(0.0, 0.0));
        for (i, &v) in line.iter().enumerate() {
            scratch[i + 1] = v;
            scratch[m - 1 - i] = -v;
        }
        self.ffts[&m].process(scratch);
        let half_i = C64::new(0.0, 0.5);
        for (k, v) in line.iter_mut().enumerate() {
            *v = half_i * scratch[k + 1];
        }
    }

    /// Cosine evaluation along one line: out_i = Σ_k in_k cos(π i k/(n+1)),
    /// via the even extension and X_i = F[i]/2.
    fn line_cos_eval(&self, line: &mut [C64], scratch: &mut Vec<C64>) {
        let n = line.len();
        let m = 2 * (n + 1);
        scratch.clear();
        scratch.resize(m, C64::new(0.0, 0.0));
        for (k, &v) in line.iter().enumerate() {
            scratch[k + 1] = v;
            scratch[m - 1 - k] = v;
        }
        self.ffts[&m].process(scratch);
        for (i, v) in line.iter_mut().enumerate() {
            *v = 0.5 * scratch[i + 1];
        }
    }

    /// Apply a line transform along `axis` of a row-major array.
    fn apply_axis(
        &self,
        data: &mut [C64],
        axis: usize,
        scale: f64,
        cos_eval: bool,
    ) {
        let shape = self.grid.shape();
        let mut scratch = Vec::new();
        let mut line = Vec::new();
        match (self.grid.dim(), axis) {
            (1, _) => {
                if cos_eval {
                    self.line_cos_eval(data, &mut scratch);
                } else {
                    self.line_dst(data, &mut scratch);
                }
                if scale != 1.0 {
                    for v in data.iter_mut() {
                        *v *= scale;
                    }
                }
            }
            (2, 0) => {
                let (n0, n1) = (shape[0], shape[1]);
                line.resize(n0, C64::new(0.0, 0.0));
                for j in 0..n1 {
                    for i in 0..n0 {
                        line[i] = data[i * n1 + j];
                    }
                    if cos_eval {
                        self.line_cos_eval(&mut line, &mut scratch);
                    } else {
                        self.line_dst(&mut line, &mut scratch);
                    }
                    for i in 0..n0 {
                        data[i * n1 + j] = line[i] * scale;
                    }
                }
            }
            (2, 1) => {
                let (n0, n1) = (shape[0], shape[1]);
                for i in 0..n0 {
                    let row = &mut data[i * n1..(i + 1) * n1];
                    if cos_eval {
                        self.line_cos_eval(row, &mut scratch);
                    } else {
                        self.line_dst(row, &mut scratch);
                    }
                    if scale != 1.0 {
                        for v in row.iter_mut() {
                            *v *= scale;
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }

    /// Field samples → function coefficients.
    pub fn forward(&self, field: &ComplexField) -> SpectralCoeffs {
        debug_assert!(self.check(field.grid()).is_ok());
        let mut data = field.values().to_vec();
        for axis in 0..self.grid.dim() {
            let n = self.grid.shape()[axis];
            self.apply_axis(&mut data, axis, 2.0 / (n + 1) as f64, false);
        }
        SpectralCoeffs::from_coeffs(&self.grid, data).expect("shape preserved")
    }

    /// Function coefficients → field samples (exact inverse of `forward`).
    pub fn inverse(&self, coeffs: &SpectralCoeffs) -> ComplexField {
        debug_assert!(self.check(coeffs.grid()).is_ok());
        let mut data = coeffs.coeffs().to_vec();
        for axis in 0..self.grid.dim() {
            self.apply_axis(&mut data, axis, 1.0, false);
        }
        ComplexField::from_values(&self.grid, data).expect("shape preserved")
    }

    /// In-place forward/inverse on a bare coefficient buffer; used by the
    /// stepping loop to avoid reallocation.
    pub fn forward_values(&self, data: &mut [C64]) {
        for axis in 0..self.grid.dim() {
            let n = self.grid.shape()[axis];
            self.apply_axis(data, axis, 2.0 / (n + 1) as f64, false);
        }
    }

    pub fn inverse_values(&self, data: &mut [C64]) {
        for axis in 0..self.grid.dim() {
            self.apply_axis(data, axis, 1.0, false);
        }
    }

    /// Nodal values of ∂u/∂x_axis computed from coefficients: the sine series
    /// differentiates into a cosine series along `axis`.
    pub fn gradient_axis(&self, coeffs: &SpectralCoeffs, axis: usize) -> ComplexField {
        debug_assert!(self.check(coeffs.grid()).is_ok());
        let mut data = coeffs.coeffs().to_vec();
        let l = self.grid.domain().length(axis);
        let shape = self.grid.shape();
        // multiply coefficient k by k·π/l along the differentiated axis
        match (self.grid.dim(), axis) {
            (1, _) => {
                for (k, v) in data.iter_mut().enumerate() {
                    *v *= (k + 1) as f64 * std::f64::consts::PI / l;
                }
            }
            (2, 0) => {
                for k0 in 0..shape[0] {
                    let w = (k0 + 1) as f64 * std::f64::consts::PI / l;
                    for k1 in 0..shape[1] {
                        data[k0 * shape[1] + k1] *= w;
                    }
                }
            }
            (2, 1) => {
                for k0 in 0..shape[0] {
                    for k1 in 0..shape[1] {
                        data[k0 * shape[1] + k1] *= (k1 + 1) as f64 * std::f64::consts::PI / l;
                    }
                }
            }
            _ => unreachable!(),
        }
        for ax in 0..self.grid.dim() {
            self.apply_axis(&mut data, ax, 1.0, ax == axis);
        }
        ComplexField::from_values(&self.grid, data).expect("shape preserved")
    }

    /// Spectral H^s norm under the coefficient convention,
    /// (Σ_k (1+μ_k)^s |c_k|²)^{1/2}, s ∈ {0,1,2}.
    pub fn sobolev_norm(&self, field: &ComplexField, s: u32) -> Result<f64> {
        if s > 2 {
            return Err(Error::InvalidArgument(format!(
                "sobolev_norm supports s ∈ {{0,1,2}}, got {s}"
            )));
        }
        self.check(field.grid())?;
        let c = self.forward(field);
        Ok(c.weighted_norm_sq(s as i32).sqrt())
    }

    /// Physical norm of the gradient, ‖∇u‖_{L²} = (Π(l_j/2)·Σ μ_k|c_k|²)^{1/2}.
    pub fn grad_norm(&self, field: &ComplexField) -> f64 {
        let c = self.forward(field);
        self.grad_norm_from_coeffs(&c)
    }

    pub fn grad_norm_from_coeffs(&self, coeffs: &SpectralCoeffs) -> f64 {
        let w: f64 = (0..self.grid.dim())
            .map(|j| 0.5 * self.grid.domain().length(j))
            .product();
        let s: f64 = coeffs
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, c)| self.grid.eigenvalue(i) * c.norm_sqr())
            .sum();
        (w * s).sqrt()
    }

    /// Nodal values of Δu.
    pub fn laplacian_field(&self, field: &ComplexField) -> ComplexField {
        let mut c = self.forward(field);
        apply_laplacian(&mut c);
        self.inverse(&c)
    }
}

/// Multiply coefficient k by −μ_k (the Dirichlet Laplacian symbol).
pub fn apply_laplacian(coeffs: &mut SpectralCoeffs) {
    let grid = coeffs.grid().clone();
    for (i, c) in coeffs.coeffs_mut().iter_mut().enumerate() {
        *c *= -grid.eigenvalue(i);
    }
}

/// Exact free propagator: coefficient k multiplied by e^{−iμ_k t}. The
/// discrete L² norm is preserved exactly.
pub fn linear_propagator(coeffs: &mut SpectralCoeffs, t: f64) {
    assert!(t.is_finite(), "propagation time must be finite");
    let grid = coeffs.grid().clone();
    for (i, c) in coeffs.coeffs_mut().iter_mut().enumerate() {
        let phase = -grid.eigenvalue(i) * t;
        *c *= C64::from_polar(1.0, phase);
    }
}

/// Propagator applied on a bare buffer with a precomputed eigenvalue table.
pub fn propagate_values(values: &mut [C64], eigenvalues: &[f64], t: f64) {
    for (c, &mu) in values.iter_mut().zip(eigenvalues) {
        *c *= C64::from_polar(1.0, -mu * t);
    }
}

/// Flat eigenvalue table for a grid.
pub fn eigenvalue_table(grid: &Grid) -> Vec<f64> {
    (0..grid.len()).map(|i| grid.eigenvalue(i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RectDomain;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_field(grid: &Grid, seed: u64) -> ComplexField {
        let mut rng = StdRng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        ComplexField::from_values(grid, values).unwrap()
    }

    #[test]
    fn eigenfunction_single_coefficient() {
        let grid = Grid::new(RectDomain::interval(2.5).unwrap(), &[64]).unwrap();
        let plan = DstPlan::new(&grid);
        let f = ComplexField::from_fn(&grid, |p| {
            C64::new((std::f64::consts::PI * p[0] / 2.5).sin(), 0.0)
        });
        let c = plan.forward(&f);
        assert!((c.coeffs()[0] - C64::new(1.0, 0.0)).norm() < 1e-13);
        let tail: f64 = c.coeffs()[1..].iter().map(|v| v.norm()).sum();
        assert!(tail < 1e-12, "tail {tail}");
    }

    #[test]
    fn round_trip_and_parseval_1d_2d() {
        for (grid, seed) in [
            (
                Grid::new(RectDomain::interval(1.7).unwrap(), &[37]).unwrap(),
                7,
            ),
            (
                Grid::new(RectDomain::rectangle(1.0, 2.0).unwrap(), &[12, 9]).unwrap(),
                8,
            ),
            (
                Grid::new(RectDomain::rectangle(3.0, 0.5).unwrap(), &[16, 31]).unwrap(),
                9,
            ),
        ] {
            let plan = DstPlan::new(&grid);
            let f = random_field(&grid, seed);
            let c = plan.forward(&f);
            let back = plan.inverse(&c);
            let err = f
                .values()
                .iter()
                .zip(back.values())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12, "round trip err {err}");

            // Parseval against direct summation
            let direct = f.l2_norm_sq();
            let spectral = c.l2_norm().powi(2);
            assert!(
                (direct - spectral).abs() / direct < 1e-12,
                "parseval {direct} vs {spectral}"
            );
        }
    }

    #[test]
    fn laplacian_symbol_values() {
        let pi = std::f64::consts::PI;
        // mode k=1 on (0,π) → multiplier −1
        let grid = Grid::new(RectDomain::interval(pi).unwrap(), &[16]).unwrap();
        let mut c = SpectralCoeffs::mode(&grid, [1, 0], C64::new(1.0, 0.0)).unwrap();
        apply_laplacian(&mut c);
        assert!((c.coeffs()[0] - C64::new(-1.0, 0.0)).norm() < 1e-14);

        // mode (1,1) on the unit square → multiplier −2π²
        let grid = Grid::new(RectDomain::rectangle(1.0, 1.0).unwrap(), &[8, 8]).unwrap();
        let mut c = SpectralCoeffs::mode(&grid, [1, 1], C64::new(1.0, 0.0)).unwrap();
        apply_laplacian(&mut c);
        assert!((c.coeffs()[0] - C64::new(-2.0 * pi * pi, 0.0)).norm() < 1e-12);

        // zero stays zero
        let mut z = SpectralCoeffs::zeros(&grid);
        apply_laplacian(&mut z);
        assert!(z.coeffs().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        // second-order convergence of FD toward the spectral Laplacian on a
        // smooth field
        let l = 1.0;
        let mut errs = Vec::new();
        for n in [64usize, 128, 256] {
            let grid = Grid::new(RectDomain::interval(l).unwrap(), &[n]).unwrap();
            let plan = DstPlan::new(&grid);
            let f = ComplexField::from_fn(&grid, |p| {
                let x = p[0];
                C64::new(
                    (std::f64::consts::PI * x).sin() * (2.0 * std::f64::consts::PI * x).cos(),
                    0.0,
                )
            });
            let lap = plan.laplacian_field(&f);
            let h = grid.spacing(0);
            let v = f.values();
            let mut max_err: f64 = 0.0;
            for i in 1..n - 1 {
                let fd = (v[i - 1] - 2.0 * v[i] + v[i + 1]) / (h * h);
                max_err = max_err.max((fd - lap.values()[i]).norm());
            }
            errs.push(max_err);
        }
        let order01 = (errs[0] / errs[1]).log2();
        let order12 = (errs[1] / errs[2]).log2();
        assert!(
            (1.7..2.3).contains(&order01) && (1.7..2.3).contains(&order12),
            "observed FD orders {order01:.2}, {order12:.2}"
        );
    }

    #[test]
    fn propagator_unitary_periodic_composes() {
        let pi = std::f64::consts::PI;
        let grid = Grid::new(RectDomain::interval(pi).unwrap(), &[24]).unwrap();
        // t=0 identity; k=1 returns to itself after 2π
        let mut c = SpectralCoeffs::mode(&grid, [1, 0], C64::new(0.3, -0.4)).unwrap();
        let orig = c.clone();
        linear_propagator(&mut c, 0.0);
        assert_eq!(c.coeffs(), orig.coeffs());
        linear_propagator(&mut c, 2.0 * pi);
        assert!((c.coeffs()[0] - orig.coeffs()[0]).norm() < 1e-12);

        // unitarity and composition on a random field
        let grid = Grid::new(RectDomain::interval(1.3).unwrap(), &[41]).unwrap();
        let plan = DstPlan::new(&grid);
        let f = random_field(&grid, 17);
        let c0 = plan.forward(&f);
        let n0 = c0.l2_norm();
        let mut c1 = c0.clone();
        linear_propagator(&mut c1, 0.37);
        assert!((c1.l2_norm() - n0).abs() / n0 < 1e-13);
        let mut c2 = c1.clone();
        linear_propagator(&mut c2, 0.21);
        let mut c3 = c0.clone();
        linear_propagator(&mut c3, 0.58);
        let err: f64 = c2
            .coeffs()
            .iter()
            .zip(c3.coeffs())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 5e-13, "composition err {err}");
    }

    #[test]
    fn sobolev_norm_convention() {
        let pi = std::f64::consts::PI;
        let grid = Grid::new(RectDomain::interval(pi).unwrap(), &[32]).unwrap();
        let plan = DstPlan::new(&grid);
        // unit-coefficient mode k=1 on (0,π): s=0 → 1, s=2 → 2,
        // amplitude a at s=1 → a√2
        let f = ComplexField::from_fn(&grid, |p| C64::new(p[0].sin(), 0.0));
        assert!((plan.sobolev_norm(&f, 0).unwrap() - 1.0).abs() < 1e-12);
        assert!((plan.sobolev_norm(&f, 2).unwrap() - 2.0).abs() < 1e-12);
        let a = 0.77;
        let fa = f.scaled(C64::new(a, 0.0));
        assert!((plan.sobolev_norm(&fa, 1).unwrap() - a * 2.0f64.sqrt()).abs() < 1e-12);
        assert!(plan.sobolev_norm(&f, 3).is_err());
    }

    #[test]
    fn gradient_matches_closed_form() {
        let grid = Grid::new(RectDomain::rectangle(1.0, 2.0).unwrap(), &[48, 48]).unwrap();
        let plan = DstPlan::new(&grid);
        let pi = std::f64::consts::PI;
        let f = ComplexField::from_fn(&grid, |p| {
            C64::new((2.0 * pi * p[0]).sin() * (pi * p[1] / 2.0).sin(), 0.0)
        });
        let c = plan.forward(&f);
        let gx = plan.gradient_axis(&c, 0);
        let gy = plan.gradient_axis(&c, 1);
        let mut err: f64 = 0.0;
        for i in 0..grid.len() {
            let p = grid.node(i);
            let ex = 2.0 * pi * (2.0 * pi * p[0]).cos() * (pi * p[1] / 2.0).sin();
            let ey = pi / 2.0 * (2.0 * pi * p[0]).sin() * (pi * p[1] / 2.0).cos();
            err = err
                .max((gx.values()[i] - C64::new(ex, 0.0)).norm())
                .max((gy.values()[i] - C64::new(ey, 0.0)).norm());
        }
        assert!(err < 1e-10, "gradient err {err}");
    }
}
