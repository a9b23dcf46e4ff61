//! Blow-up profiles R_λ: modulated, rescaled, phase-twisted copies of the
//! ground state concentrating at interior points as t → T_λ, together with
//! the smooth cutoffs carried by the construction and its diagnostics
//! (exterior smallness, equation residual, H² growth).

use once_cell::sync::Lazy;

use crate::domain::{dist, Grid, Point, RectDomain};
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::fitting::exponential_fit;
use crate::ground_state::GroundState;
use crate::spectral::DstPlan;
use crate::C64;

/// Mollifier g(u) = exp(1 − 1/(1−u²)) on (−1,1), zero outside.
fn mollifier(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - u * u)).exp()
    }
}

fn mollifier_deriv(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - u * u;
        mollifier(u) * (-2.0 * u / (s * s))
    }
}

/// Cumulative integral table of the mollifier on [−1,1] (composite Simpson,
/// 2^15 panels), normalized so the last entry is 1.
struct StepTable {
    /// S values at u_j = −1 + j·h, j = 0..=N
    values: Vec<f64>,
    h: f64,
}

static STEP_TABLE: Lazy<StepTable> = Lazy::new(|| {
    let n_panels = 1usize << 15;
    let h = 2.0 / n_panels as f64;
    let mut values = vec![0.0; n_panels + 1];
    for j in 0..n_panels {
        let a = -1.0 + j as f64 * h;
        let fa = mollifier(a);
        let fm = mollifier(a + 0.5 * h);
        let fb = mollifier(a + h);
        values[j + 1] = values[j] + h / 6.0 * (fa + 4.0 * fm + fb);
    }
    let total = values[n_panels];
    for v in &mut values {
        *v /= total;
    }
    StepTable { values, h }
});

/// Normalized mollifier for the Hermite interpolation of the table.
fn mollifier_normalized(u: f64) -> f64 {
    static NORM: Lazy<f64> = Lazy::new(|| {
        // recompute the total with the same panelization as the table
        let n_panels = 1usize << 15;
        let h = 2.0 / n_panels as f64;
        let mut total = 0.0;
        for j in 0..n_panels {
            let a = -1.0 + j as f64 * h;
            total += h / 6.0 * (mollifier(a) + 4.0 * mollifier(a + 0.5 * h) + mollifier(a + h));
        }
        total
    });
    mollifier(u) / *NORM
}

/// Smooth step: 0 for τ≤0, 1 for τ≥1, C^∞ monotone, symmetric about τ=1/2
/// (the normalized integral of the mollifier).
pub fn smooth_step(tau: f64) -> f64 {
    if tau <= 0.0 {
        return 0.0;
    }
    if tau >= 1.0 {
        return 1.0;
    }
    let u = 2.0 * tau - 1.0;
    let t = &*STEP_TABLE;
    let pos = (u + 1.0) / t.h;
    let j = (pos.floor() as usize).min(t.values.len() - 2);
    let s = pos - j as f64;
    let u0 = -1.0 + j as f64 * t.h;
    // cubic Hermite with exact slopes dS/du = normalized mollifier
    let p0 = t.values[j];
    let p1 = t.values[j + 1];
    let m0 = mollifier_normalized(u0) * t.h;
    let m1 = mollifier_normalized(u0 + t.h) * t.h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * p0
        + (s3 - 2.0 * s2 + s) * m0
        + (-2.0 * s3 + 3.0 * s2) * p1
        + (s3 - s2) * m1
}

/// dS/dτ, closed form.
pub fn smooth_step_deriv(tau: f64) -> f64 {
    if tau <= 0.0 || tau >= 1.0 {
        return 0.0;
    }
    2.0 * mollifier_normalized(2.0 * tau - 1.0)
}

/// d²S/dτ², closed form.
pub fn smooth_step_deriv2(tau: f64) -> f64 {
    if tau <= 0.0 || tau >= 1.0 {
        return 0.0;
    }
    static NORM: Lazy<f64> = Lazy::new(|| mollifier(0.0) / mollifier_normalized(0.0));
    4.0 * mollifier_deriv(2.0 * tau - 1.0) / *NORM
}

/// Radial C^∞ cutoff: 1 on the closed ball of radius `r_inner` around
/// `center`, 0 outside radius `r_outer`, monotone in between.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffSpec {
    pub center: Point,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl CutoffSpec {
    pub fn new(domain: &RectDomain, center: Point, r_inner: f64, r_outer: f64) -> Result<Self> {
        if !(0.0 < r_inner && r_inner < r_outer) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < r_inner < r_outer, got {r_inner}, {r_outer}"
            )));
        }
        if !domain.contains(center) || domain.boundary_distance(center) <= r_outer {
            return Err(Error::InvalidArgument(format!(
                "ball of radius {r_outer} around {center:?} is not inside the domain"
            )));
        }
        Ok(Self {
            center,
            r_inner,
            r_outer,
        })
    }

    pub(crate) fn tau(&self, r: f64) -> f64 {
        (r - self.r_inner) / (self.r_outer - self.r_inner)
    }

    /// χ(x) ∈ [0,1].
    pub fn eval(&self, x: Point, dim: usize) -> f64 {
        let r = dist(x, self.center, dim);
        1.0 - smooth_step(self.tau(r))
    }

    /// dχ/dr at radius r.
    pub fn radial_deriv(&self, r: f64) -> f64 {
        -smooth_step_deriv(self.tau(r)) / (self.r_outer - self.r_inner)
    }

    /// d²χ/dr² at radius r.
    pub fn radial_deriv2(&self, r: f64) -> f64 {
        let w = self.r_outer - self.r_inner;
        -smooth_step_deriv2(self.tau(r)) / (w * w)
    }

    /// ∇χ(x), from the closed-form radial derivative.
    pub fn grad(&self, x: Point, dim: usize) -> [f64; 2] {
        let r = dist(x, self.center, dim);
        let mut g = [0.0; 2];
        if r <= self.r_inner || r >= self.r_outer || r == 0.0 {
            return g;
        }
        let dr = self.radial_deriv(r);
        for j in 0..dim {
            g[j] = dr * (x[j] - self.center[j]) / r;
        }
        g
    }

    /// Δχ(x) = χ''(r) + (d−1)/r · χ'(r).
    pub fn laplacian(&self, x: Point, dim: usize) -> f64 {
        let r = dist(x, self.center, dim);
        if r <= self.r_inner || r >= self.r_outer {
            return 0.0;
        }
        self.radial_deriv2(r) + (dim - 1) as f64 / r * self.radial_deriv(r)
    }

    fn disjoint_from(&self, other: &Self, dim: usize) -> bool {
        dist(self.center, other.center, dim) > self.r_outer + other.r_outer
    }
}

/// Largest admitted coefficient c in T_λ < c·λ^{−2}.
pub const MAX_HORIZON_COEFF: f64 = 1.0;
/// Default coefficient a in T_λ = a·λ^{−2}.
pub const DEFAULT_HORIZON_COEFF: f64 = 0.5;

/// Everything needed to synthesize R_λ: blow-up points x_k, scaling λ,
/// blow-up time T_λ and one cutoff per point with pairwise disjoint
/// supports.
#[derive(Debug, Clone)]
pub struct BlowupSpec {
    pub points: Vec<Point>,
    pub lambda: f64,
    pub t_lambda: f64,
    pub cutoffs: Vec<CutoffSpec>,
}

impl BlowupSpec {
    pub fn new(
        domain: &RectDomain,
        points: Vec<Point>,
        lambda: f64,
        t_lambda: f64,
        cutoffs: Vec<CutoffSpec>,
    ) -> Result<Self> {
        let dim = domain.dim();
        if points.is_empty() || points.len() != cutoffs.len() {
            return Err(Error::InvalidArgument(
                "need one cutoff per blow-up point".into(),
            ));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("λ must be positive, got {lambda}")));
        }
        if !(t_lambda > 0.0 && t_lambda < MAX_HORIZON_COEFF / (lambda * lambda)) {
            return Err(Error::InvalidArgument(format!(
                "T_λ = {t_lambda} outside (0, {MAX_HORIZON_COEFF}·λ⁻²)"
            )));
        }
        for p in &points {
            if !domain.contains(*p) {
                return Err(Error::InvalidArgument(format!(
                    "blow-up point {p:?} is not interior"
                )));
            }
        }
        for i in 0..points.len() {
            for j in i + 1..points.len() {
                if dist(points[i], points[j], dim) == 0.0 {
                    return Err(Error::InvalidArgument("blow-up points must be distinct".into()));
                }
                if !cutoffs[i].disjoint_from(&cutoffs[j], dim) {
                    return Err(Error::InvalidArgument(format!(
                        "cutoff supports {i} and {j} overlap"
                    )));
                }
            }
        }
        for (p, c) in points.iter().zip(&cutoffs) {
            if dist(*p, c.center, dim) >= c.r_inner {
                return Err(Error::InvalidArgument(
                    "each cutoff must equal 1 near its blow-up point".into(),
                ));
            }
        }
        Ok(Self {
            points,
            lambda,
            t_lambda,
            cutoffs,
        })
    }

    /// Single blow-up point with cutoff centered on it and T_λ = a·λ^{−2}.
    pub fn single(
        domain: &RectDomain,
        point: Point,
        lambda: f64,
        horizon_coeff: f64,
        r_inner: f64,
        r_outer: f64,
    ) -> Result<Self> {
        if !(horizon_coeff > 0.0 && horizon_coeff < MAX_HORIZON_COEFF) {
            return Err(Error::InvalidArgument(format!(
                "horizon coefficient {horizon_coeff} outside (0, {MAX_HORIZON_COEFF})"
            )));
        }
        let cutoff = CutoffSpec::new(domain, point, r_inner, r_outer)?;
        Self::new(
            domain,
            vec![point],
            lambda,
            horizon_coeff / (lambda * lambda),
            vec![cutoff],
        )
    }

    /// Core width λ(T_λ − t).
    pub fn scale(&self, t: f64) -> f64 {
        self.lambda * (self.t_lambda - t)
    }
}

/// Evaluate R_λ(t) nodewise:
/// R_λ = (λ(T_λ−t))^{−d/2} Σ_k e^{i(4−λ²|x−x_k|²)/(4λ²(T_λ−t))} χ_k(x)
///        Q(|x−x_k|/(λ(T_λ−t))).
///
/// In d=2 the prefactor exponent is 1 and this is the profile of the cubic
/// equation; the d/2 power makes the same formula an exact solution of the
/// mass-critical equation in any dimension wherever χ_k ≡ 1.
pub fn synth_profile(
    spec: &BlowupSpec,
    gs: &GroundState,
    t: f64,
    grid: &Grid,
) -> Result<ComplexField> {
    if !(t >= 0.0 && t < spec.t_lambda) {
        return Err(Error::Precondition(format!(
            "t = {t} outside [0, T_λ = {})",
            spec.t_lambda
        )));
    }
    let dim = grid.dim();
    if gs.profile.dim != dim {
        return Err(Error::ShapeMismatch(format!(
            "ground state dimension {} vs grid dimension {dim}",
            gs.profile.dim
        )));
    }
    let rho = spec.scale(t);
    let amp = rho.powf(-(dim as f64) / 2.0);
    let lam = spec.lambda;
    let tau = spec.t_lambda - t;
    let mut field = ComplexField::zeros(grid);
    for (point, cutoff) in spec.points.iter().zip(&spec.cutoffs) {
        for i in 0..grid.len() {
            let x = grid.node(i);
            let r = dist(x, *point, dim);
            if r >= cutoff.r_outer {
                continue;
            }
            let chi = 1.0 - smooth_step(cutoff.tau(r));
            if chi == 0.0 {
                continue;
            }
            let phase = (4.0 - lam * lam * r * r) / (4.0 * lam * lam * tau);
            let modulus = amp * chi * gs.eval(r / rho);
            field.values_mut()[i] += C64::from_polar(modulus, phase);
        }
    }
    Ok(field)
}

/// Which H^s content to measure outside the inner balls.
fn exterior_mask(spec: &BlowupSpec, grid: &Grid) -> Vec<bool> {
    let dim = grid.dim();
    (0..grid.len())
        .map(|i| {
            let x = grid.node(i);
            spec.points
                .iter()
                .zip(&spec.cutoffs)
                .all(|(p, c)| dist(x, *p, dim) > c.r_inner)
        })
        .collect()
}

/// Discrete H^s-type norm of `field` restricted to nodes outside all inner
/// balls ω₁ = ∪ B(x_k, r_inner). s ≥ 1 adds the spectral gradient (and for
/// s = 2 the spectral Laplacian) before the restricted summation.
pub fn exterior_norm(
    plan: &DstPlan,
    field: &ComplexField,
    spec: &BlowupSpec,
    s: u32,
) -> Result<f64> {
    if s > 2 {
        return Err(Error::InvalidArgument(format!(
            "exterior_norm supports s ∈ {{0,1,2}}, got {s}"
        )));
    }
    let grid = field.grid();
    let mask = exterior_mask(spec, grid);
    let w = grid.cell_volume();
    let mut acc: f64 = 0.0;
    for (i, v) in field.values().iter().enumerate() {
        if mask[i] {
            acc += v.norm_sqr();
        }
    }
    if s >= 1 {
        let coeffs = plan.forward(field);
        for axis in 0..grid.dim() {
            let g = plan.gradient_axis(&coeffs, axis);
            for (i, v) in g.values().iter().enumerate() {
                if mask[i] {
                    acc += v.norm_sqr();
                }
            }
        }
        if s == 2 {
            let lap = plan.laplacian_field(field);
            for (i, v) in lap.values().iter().enumerate() {
                if mask[i] {
                    acc += v.norm_sqr();
                }
            }
        }
    }
    Ok((w * acc).sqrt())
}

/// L² residual ‖i ∂_t R_λ + ΔR_λ + |R_λ|^{p−1} R_λ‖ with a centered time
/// difference of the synthesized profile and the spectral Laplacian.
pub fn nls_residual(
    spec: &BlowupSpec,
    gs: &GroundState,
    t: f64,
    dt: f64,
    grid: &Grid,
    plan: &DstPlan,
) -> Result<f64> {
    Ok(nls_residual_field(spec, gs, t, dt, grid, plan)?.l2_norm())
}

/// Nodewise residual field behind [`nls_residual`].
pub fn nls_residual_field(
    spec: &BlowupSpec,
    gs: &GroundState,
    t: f64,
    dt: f64,
    grid: &Grid,
    plan: &DstPlan,
) -> Result<ComplexField> {
    if !(dt > 0.0 && t - dt > 0.0 && t + dt < spec.t_lambda) {
        return Err(Error::Precondition(format!(
            "need 0 < t−dt and t+dt < T_λ, got t = {t}, dt = {dt}"
        )));
    }
    let p = grid.domain().critical_exponent();
    let ahead = synth_profile(spec, gs, t + dt, grid)?;
    let behind = synth_profile(spec, gs, t - dt, grid)?;
    let now = synth_profile(spec, gs, t, grid)?;
    let mut res = plan.laplacian_field(&now);
    let inv2dt = 1.0 / (2.0 * dt);
    for i in 0..grid.len() {
        let dt_term = (ahead.values()[i] - behind.values()[i]) * inv2dt;
        let u = now.values()[i];
        let nl = u * u.norm().powf(p - 1.0);
        res.values_mut()[i] += C64::new(0.0, 1.0) * dt_term + nl;
    }
    Ok(res)
}

/// Spectral H² norm of the profile at time t (coefficient convention); a
/// t-sweep of this quantity feeds the growth-exponent fit.
pub fn profile_h2_growth(
    spec: &BlowupSpec,
    gs: &GroundState,
    t: f64,
    grid: &Grid,
    plan: &DstPlan,
) -> Result<f64> {
    let field = synth_profile(spec, gs, t, grid)?;
    plan.sobolev_norm(&field, 2)
}

/// Fit (Ĉ, κ̂) in residual ≈ Ĉ·e^{−κ̂/(λ(T_λ−t))} from a sweep of
/// [`nls_residual`] over `ts`.
pub fn fit_residual_decay(
    spec: &BlowupSpec,
    gs: &GroundState,
    ts: &[f64],
    dt: f64,
    grid: &Grid,
    plan: &DstPlan,
) -> Result<(f64, f64)> {
    let mut xs = Vec::with_capacity(ts.len());
    let mut ys = Vec::with_capacity(ts.len());
    for &t in ts {
        xs.push(1.0 / spec.scale(t));
        ys.push(nls_residual(spec, gs, t, dt, grid, plan)?);
    }
    exponential_fit(&xs, &ys)
}

/// First-order Duhamel budget for trajectories steered along R_λ:
/// ∫₀^{T_λ} Ĉ e^{−κ̂/(λ(T_λ−s))} ds evaluated by midpoint quadrature from
/// fitted (Ĉ, κ̂).
pub fn residual_budget(spec: &BlowupSpec, c_hat: f64, kappa_hat: f64) -> f64 {
    let n = 2000;
    let h = spec.t_lambda / n as f64;
    let mut acc = 0.0;
    for i in 0..n {
        let s = (i as f64 + 0.5) * h;
        acc += (-kappa_hat / spec.scale(s)).exp();
    }
    c_hat * acc * h
}
