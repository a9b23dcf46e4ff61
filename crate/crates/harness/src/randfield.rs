//! Deterministic random smooth fields for perturbations and property
//! sweeps.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nls_core::spectral::DstPlan;
use nls_core::{C64, ComplexField, Grid, SpectralCoeffs};

/// Random band-limited field with coefficient decay (1+μ_k)^{−2}, built
/// from a seeded ChaCha stream so runs are reproducible.
pub fn random_smooth_field(grid: &Grid, plan: &DstPlan, seed: u64, max_mode: usize) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = SpectralCoeffs::zeros(grid);
    let shape = grid.shape().to_vec();
    let dim = grid.dim();
    let n_total = grid.len();
    for flat in 0..n_total {
        let mi = grid.multi_index(flat);
        let in_band = (0..dim).all(|j| mi[j] + 1 <= max_mode.min(shape[j]));
        if !in_band {
            continue;
        }
        let mu = grid.eigenvalue(flat);
        let w = (1.0 + mu).powi(-2);
        let re: f64 = rng.gen_range(-1.0..1.0);
        let im: f64 = rng.gen_range(-1.0..1.0);
        coeffs.coeffs_mut()[flat] = C64::new(w * re, w * im);
    }
    plan.inverse(&coeffs)
}

/// Rescale so the spectral H² norm equals `target`.
pub fn normalize_h2(plan: &DstPlan, field: &ComplexField, target: f64) -> ComplexField {
    let norm = plan.sobolev_norm(field, 2).expect("s=2 supported");
    field.scaled(C64::new(target / norm, 0.0))
}

/// Rescale so the physical L² norm equals `target`.
pub fn normalize_l2(field: &ComplexField, target: f64) -> ComplexField {
    field.scaled(C64::new(target / field.l2_norm(), 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nls_core::domain::RectDomain;

    #[test]
    fn deterministic_and_band_limited() {
        let grid = Grid::new(RectDomain::interval(1.0).unwrap(), &[64]).unwrap();
        let plan = DstPlan::new(&grid);
        let a = random_smooth_field(&grid, &plan, 7, 8);
        let b = random_smooth_field(&grid, &plan, 7, 8);
        assert_eq!(a.values(), b.values());
        let c = random_smooth_field(&grid, &plan, 8, 8);
        assert_ne!(a.values(), c.values());
        let coeffs = plan.forward(&a);
        for flat in 8..64 {
            assert!(coeffs.coeffs()[flat].norm() < 1e-13);
        }
        let scaled = normalize_h2(&plan, &a, 0.25);
        assert!((plan.sobolev_norm(&scaled, 2).unwrap() - 0.25).abs() < 1e-12);
    }
}
