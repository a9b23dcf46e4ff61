//! Rectangular domains (0,l₁)×…×(0,l_d) and their interior-node grids.

use crate::error::{Error, Result};

/// Spatial point. Axes beyond the domain dimension are zero.
pub type Point = [f64; 2];

/// Euclidean distance restricted to the first `dim` axes.
pub fn dist(a: Point, b: Point, dim: usize) -> f64 {
    let mut s = 0.0;
    for j in 0..dim {
        s += (a[j] - b[j]) * (a[j] - b[j]);
    }
    s.sqrt()
}

/// Open rectangle (0,l₁)×…×(0,l_d), d ∈ {1,2}, with homogeneous Dirichlet
/// boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct RectDomain {
    lengths: Vec<f64>,
}

impl RectDomain {
    pub fn new(lengths: &[f64]) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > 2 {
            return Err(Error::InvalidDomain(format!(
                "dimension must be 1 or 2, got {}",
                lengths.len()
            )));
        }
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::InvalidDomain(format!(
                "side lengths must be positive and finite, got {lengths:?}"
            )));
        }
        Ok(Self {
            lengths: lengths.to_vec(),
        })
    }

    pub fn interval(l: f64) -> Result<Self> {
        Self::new(&[l])
    }

    pub fn rectangle(l1: f64, l2: f64) -> Result<Self> {
        Self::new(&[l1, l2])
    }

    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Nonlinearity exponent p = 1 + 4/d of the mass-critical equation.
    pub fn critical_exponent(&self) -> f64 {
        1.0 + 4.0 / self.dim() as f64
    }

    /// Domain midpoint.
    pub fn center(&self) -> Point {
        let mut c = [0.0; 2];
        for j in 0..self.dim() {
            c[j] = 0.5 * self.lengths[j];
        }
        c
    }

    /// True if `p` lies strictly inside the rectangle.
    pub fn contains(&self, p: Point) -> bool {
        (0..self.dim()).all(|j| p[j] > 0.0 && p[j] < self.lengths[j])
    }

    /// Distance from `p` to the boundary (negative if outside).
    pub fn boundary_distance(&self, p: Point) -> f64 {
        let mut d = f64::INFINITY;
        for j in 0..self.dim() {
            d = d.min(p[j]).min(self.lengths[j] - p[j]);
        }
        d
    }
}

/// Interior tensor grid of a [`RectDomain`]: nodes x_j(i) = (i+1)·h_j,
/// i = 0..n_j, with h_j = l_j/(n_j+1). Boundary nodes are excluded
/// (Dirichlet).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    domain: RectDomain,
    n: Vec<usize>,
}

impl Grid {
    pub fn new(domain: RectDomain, n: &[usize]) -> Result<Self> {
        if n.len() != domain.dim() {
            return Err(Error::InvalidGrid(format!(
                "count list has {} entries for a {}-d domain",
                n.len(),
                domain.dim()
            )));
        }
        if n.iter().any(|&nj| nj < 4) {
            return Err(Error::InvalidGrid(format!(
                "need at least 4 interior nodes per axis, got {n:?}"
            )));
        }
        Ok(Self {
            domain,
            n: n.to_vec(),
        })
    }

    pub fn domain(&self) -> &RectDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn shape(&self) -> &[usize] {
        &self.n
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.domain.length(axis) / (self.n[axis] + 1) as f64
    }

    /// Volume (length/area) of one quadrature cell, Π h_j.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|j| self.spacing(j)).product()
    }

    /// Coordinate of the i-th interior node along `axis` (i is 0-based).
    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        (i + 1) as f64 * self.spacing(axis)
    }

    /// Multi-index of a flat (row-major) node index.
    pub fn multi_index(&self, flat: usize) -> [usize; 2] {
        match self.dim() {
            1 => [flat, 0],
            _ => [flat / self.n[1], flat % self.n[1]],
        }
    }

    /// Physical coordinates of a flat node index.
    pub fn node(&self, flat: usize) -> Point {
        let mi = self.multi_index(flat);
        let mut p = [0.0; 2];
        for j in 0..self.dim() {
            p[j] = self.coord(j, mi[j]);
        }
        p
    }

    /// Dirichlet eigenvalue μ_k = Σ_j (k_j π / l_j)² for the (1-based)
    /// multi-index attached to a flat coefficient index.
    pub fn eigenvalue(&self, flat: usize) -> f64 {
        let mi = self.multi_index(flat);
        let mut mu = 0.0;
        for j in 0..self.dim() {
            let k = (mi[j] + 1) as f64;
            let w = k * std::f64::consts::PI / self.domain.length(j);
            mu += w * w;
        }
        mu
    }

    /// Per-axis eigenvalue table (k_j π / l_j)², k_j = 1..n_j.
    pub fn axis_eigenvalues(&self, axis: usize) -> Vec<f64> {
        let l = self.domain.length(axis);
        (1..=self.n[axis])
            .map(|k| {
                let w = k as f64 * std::f64::consts::PI / l;
                w * w
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_nodes_uniform_spacing() {
        // (0,π) with n=3 → nodes {π/4, π/2, 3π/4}
        let g = Grid::new(RectDomain::interval(std::f64::consts::PI).unwrap(), &[3]);
        // n=3 < 4 is rejected; the documented node layout is checked at n=7
        assert!(g.is_err());
        let g = Grid::new(RectDomain::interval(std::f64::consts::PI).unwrap(), &[7]).unwrap();
        assert!((g.coord(0, 0) - std::f64::consts::PI / 8.0).abs() < 1e-15);
        assert!((g.coord(0, 3) - std::f64::consts::PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn grid_spacing_2d() {
        // (0,1)×(0,2), n=(4,8) → h=(0.2, 2/9)
        let g = Grid::new(RectDomain::rectangle(1.0, 2.0).unwrap(), &[4, 8]).unwrap();
        assert!((g.spacing(0) - 0.2).abs() < 1e-15);
        assert!((g.spacing(1) - 2.0 / 9.0).abs() < 1e-15);
        assert_eq!(g.len(), 32);
    }

    #[test]
    fn grid_rejects_small_counts_and_bad_lengths() {
        assert!(Grid::new(RectDomain::interval(1.0).unwrap(), &[2]).is_err());
        assert!(RectDomain::interval(0.0).is_err());
        assert!(RectDomain::interval(-1.0).is_err());
        assert!(RectDomain::new(&[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn eigenvalue_multi_index_roundtrip() {
        let g = Grid::new(RectDomain::rectangle(1.0, 1.0).unwrap(), &[5, 7]).unwrap();
        let pi = std::f64::consts::PI;
        // flat 0 → k=(1,1) → 2π²
        assert!((g.eigenvalue(0) - 2.0 * pi * pi).abs() < 1e-12);
        for flat in 0..g.len() {
            let mi = g.multi_index(flat);
            assert_eq!(mi[0] * 7 + mi[1], flat);
        }
    }
}
