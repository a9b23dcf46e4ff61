//! Numerical laboratory for the mass-critical focusing nonlinear Schrödinger
//! equation on rectangles with Dirichlet boundary conditions,
//!
//! ```text
//! i ∂_t ψ + Δψ = -|ψ|^(p-1) ψ + v·1_ω,   p = 1 + 4/d,   d ∈ {1, 2},
//! ```
//!
//! covering ground states, explicit blow-up profiles, free blow-up dynamics,
//! piecewise nonlinear feedback stabilization, an explicit open-loop null
//! control, and HUM-based local null controllability of the linearized and
//! nonlinear equations.
//!
//! The discretization is a tensor-product Dirichlet sine basis: the Laplacian
//! is diagonal, the free propagator is exact, and split-step integration
//! conserves mass to roundoff.

pub mod domain;
pub mod dynamics;
pub mod error;
pub mod feedback;
pub mod field;
pub mod fitting;
pub mod ground_state;
pub mod hum;
pub mod profile;
pub mod spectral;

pub use domain::{Grid, Point, RectDomain};
pub use error::{Error, Result};
pub use field::{ComplexField, SpectralCoeffs};
pub use spectral::DstPlan;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
