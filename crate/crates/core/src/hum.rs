//! Null control of the linear Schrödinger equation through the duality
//! operator S, and local null control of the nonlinear equation through the
//! fixed point B.
//!
//! S maps a dual datum ψ₀ to ψ(0,·), where ψ solves
//! i∂_tψ + Δψ = a²(x)φ²(t)e^{itΔ}ψ₀ backward from ψ(T) = 0. On the
//! Dirichlet eigenbasis truncation this is the dense matrix
//! S = i·(A ∘ I), A_{lk} = ⟨e_l, a² e_k⟩, I_{lk} = ∫φ²(s)e^{i(μ_l−μ_k)s}ds;
//! the oscillatory pair integrals are evaluated by panel-exact Filon
//! quadrature on a cubic Hermite model of φ², so the assembly is accurate
//! to roundoff for any mode separation. Inversion is conjugate gradient on
//! the normal equations with the exact adjoint S* = −i·(A ∘ I)*.
//!
//! If S χ = ψ(0) then the trajectory of the backward problem runs from
//! ψ(0) to 0; by uniqueness, simulating forward from ψ(0) with
//! v = a²φ²e^{itΔ}χ as the right-hand side reaches zero at T. No sign flip
//! is needed when the solver convention is i∂_tψ + Δψ = −|ψ|^{p−1}ψ + v·1_ω
//! with the nonlinear term disabled; the concatenation test pins this.

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::profile::{smooth_step, smooth_step_deriv, CutoffSpec};
use crate::spectral::{eigenvalue_table, DstPlan};
use crate::C64;

/// Spatial profile a(x) supported in ω and temporal bump φ ∈ C_c^∞(0,T)
/// supported on [0.1T, 0.9T] with plateau [0.3T, 0.7T].
pub struct ControlShape {
    grid: Grid,
    /// a(x) at the grid nodes
    a: Vec<f64>,
    pub t_horizon: f64,
}

impl ControlShape {
    /// a(x) from the closed-form bump of `cutoff`.
    pub fn new(grid: &Grid, cutoff: &CutoffSpec, t_horizon: f64) -> Result<Self> {
        if !(t_horizon > 0.0) {
            return Err(Error::Precondition(format!(
                "time horizon must be positive, got {t_horizon}"
            )));
        }
        let dim = grid.dim();
        let a: Vec<f64> = (0..grid.len())
            .map(|i| cutoff.eval(grid.node(i), dim))
            .collect();
        if a.iter().all(|&v| v == 0.0) {
            return Err(Error::Precondition("spatial profile a ≡ 0".into()));
        }
        Ok(Self {
            grid: grid.clone(),
            a,
            t_horizon,
        })
    }

    /// a ≡ 1 (no spatial localization); used by the diagonal closed-form
    /// checks.
    pub fn uniform(grid: &Grid, t_horizon: f64) -> Self {
        Self {
            grid: grid.clone(),
            a: vec![1.0; grid.len()],
            t_horizon,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn a_values(&self) -> &[f64] {
        &self.a
    }

    /// φ(t): plateau on [0.3T, 0.7T], zero outside (0.1T, 0.9T).
    pub fn phi(&self, t: f64) -> f64 {
        let t0 = t / self.t_horizon;
        smooth_step((t0 - 0.1) / 0.2) * smooth_step((0.9 - t0) / 0.2)
    }

    fn phi_deriv(&self, t: f64) -> f64 {
        let t0 = t / self.t_horizon;
        let up = smooth_step((t0 - 0.1) / 0.2);
        let dn = smooth_step((0.9 - t0) / 0.2);
        (smooth_step_deriv((t0 - 0.1) / 0.2) / 0.2 * dn
            - up * smooth_step_deriv((0.9 - t0) / 0.2) / 0.2)
            / self.t_horizon
    }

    fn phi_sq(&self, t: f64) -> f64 {
        let p = self.phi(t);
        p * p
    }

    fn phi_sq_deriv(&self, t: f64) -> f64 {
        2.0 * self.phi(t) * self.phi_deriv(t)
    }
}

/// Dual datum ψ₀ on the mode truncation (row-major over the truncated
/// multi-indices).
#[derive(Debug, Clone)]
pub struct DualDatum {
    pub coeffs: Vec<C64>,
}

impl DualDatum {
    pub fn zeros(len: usize) -> Self {
        Self {
            coeffs: vec![C64::new(0.0, 0.0); len],
        }
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// One row of a convergence log: iteration, relative residual, ratio to the
/// previous residual.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRow {
    pub iter: usize,
    pub residual: f64,
    pub contraction_estimate: f64,
}

/// ∫₀^1 t^q e^{iθt} dt for q = 0..3, stable for all θ.
fn oscillatory_moments(theta: f64) -> [C64; 4] {
    let mut m = [C64::new(0.0, 0.0); 4];
    if theta.abs() < 0.5 {
        // series Σ_m (iθ)^m / (m!(q+m+1))
        for (q, slot) in m.iter_mut().enumerate() {
            let mut term = C64::new(1.0, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..30 {
                acc += term / (q as f64 + k as f64 + 1.0);
                term *= C64::new(0.0, theta) / (k as f64 + 1.0);
                if term.norm() < 1e-20 {
                    break;
                }
            }
            *slot = acc;
        }
    } else {
        let itheta = C64::new(0.0, theta);
        let e = C64::from_polar(1.0, theta);
        m[0] = (e - 1.0) / itheta;
        for q in 1..4 {
            m[q] = (e - q as f64 * m[q - 1]) / itheta;
        }
    }
    m
}

/// All pair integrals I(ω) = ∫₀^T w(s) e^{iωs} ds for a smooth window w,
/// via Filon quadrature exact on the per-panel cubic Hermite model of w.
fn filon_integrals(
    w: &dyn Fn(f64) -> f64,
    w_deriv: &dyn Fn(f64) -> f64,
    t_horizon: f64,
    n_panels: usize,
    omegas: &[f64],
) -> Vec<C64> {
    let h = t_horizon / n_panels as f64;
    // per-panel power-basis coefficients of the Hermite cubic in t = σ/h
    let mut coeffs = Vec::with_capacity(n_panels);
    let mut p0 = w(0.0);
    let mut d0 = w_deriv(0.0) * h;
    for j in 0..n_panels {
        let s1 = (j + 1) as f64 * h;
        let p1 = w(s1);
        let d1 = w_deriv(s1) * h;
        let a0 = p0;
        let a1 = d0;
        let a2 = -3.0 * p0 - 2.0 * d0 + 3.0 * p1 - d1;
        let a3 = 2.0 * p0 + d0 - 2.0 * p1 + d1;
        coeffs.push([a0, a1, a2, a3]);
        p0 = p1;
        d0 = d1;
    }
    omegas
        .iter()
        .map(|&om| {
            let theta = om * h;
            let m = oscillatory_moments(theta);
            let rot = C64::from_polar(1.0, theta);
            let mut phase = C64::new(1.0, 0.0);
            let mut acc = C64::new(0.0, 0.0);
            for c in &coeffs {
                let panel = c[0] * m[0] + c[1] * m[1] + c[2] * m[2] + c[3] * m[3];
                acc += phase * panel;
                phase *= rot;
            }
            acc * h
        })
        .collect()
}

/// Dense duality operator on the mode truncation.
pub struct HumOperator {
    grid: Grid,
    modes: Vec<usize>,
    /// truncated眼 eigenvalues μ_k, row-major over the truncation
    mu: Vec<f64>,
    /// flat M×M matrix of i·(A ∘ I)
    matrix: Vec<C64>,
    /// full-grid eigenvalues for the simulation helpers
    mu_grid: Vec<f64>,
    a_sq: Vec<f64>,
    plan: DstPlan,
    pub shape_t: f64,
}

impl HumOperator {
    /// Assemble S on the truncation with `modes` modes per axis.
    pub fn new(shape: &ControlShape, modes: &[usize]) -> Result<Self> {
        let grid = shape.grid.clone();
        let dim = grid.dim();
        if modes.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "{} mode counts for a {dim}-d grid",
                modes.len()
            )));
        }
        for (j, (&m, &n)) in modes.iter().zip(grid.shape()).enumerate() {
            if m < 1 || m > n {
                return Err(Error::Precondition(format!(
                    "axis {j}: {m} modes exceeds grid capacity {n}"
                )));
            }
        }
        let plan = DstPlan::new(&grid);
        let trunc = TruncationMap::new(&grid, modes);
        let m_total = trunc.len();
        let mu: Vec<f64> = (0..m_total).map(|i| grid.eigenvalue(trunc.to_grid(i))).collect();
        let a_sq: Vec<f64> = shape.a.iter().map(|&v| v * v).collect();

        // A_{lk} = truncated coefficients of a²·e_k (real symmetric)
        let mut a_mat = vec![0.0f64; m_total * m_total];
        for k in 0..m_total {
            let mut unit = vec![C64::new(0.0, 0.0); grid.len()];
            unit[trunc.to_grid(k)] = C64::new(1.0, 0.0);
            plan.inverse_values(&mut unit);
            for (v, &aa) in unit.iter_mut().zip(&a_sq) {
                *v *= aa;
            }
            plan.forward_values(&mut unit);
            for l in 0..m_total {
                a_mat[l * m_total + k] = unit[trunc.to_grid(l)].re;
            }
        }

        // pair integrals I_{lk} = ∫ φ²(s) e^{i(μ_l−μ_k)s} ds
        let mut omegas = Vec::with_capacity(m_total * m_total);
        for l in 0..m_total {
            for k in 0..m_total {
                omegas.push(mu[l] - mu[k]);
            }
        }
        let phi_sq = |s: f64| shape.phi_sq(s);
        let phi_sq_d = |s: f64| shape.phi_sq_deriv(s);
        let pair = filon_integrals(&phi_sq, &phi_sq_d, shape.t_horizon, 4096, &omegas);

        let mut matrix = vec![C64::new(0.0, 0.0); m_total * m_total];
        for l in 0..m_total {
            for k in 0..m_total {
                let idx = l * m_total + k;
                matrix[idx] = C64::new(0.0, 1.0) * a_mat[idx] * pair[idx];
            }
        }
        Ok(Self {
            grid: grid.clone(),
            modes: modes.to_vec(),
            mu,
            matrix,
            mu_grid: eigenvalue_table(&grid),
            a_sq,
            plan,
            shape_t: shape.t_horizon,
        })
    }

    pub fn truncation_len(&self) -> usize {
        self.mu.len()
    }

    pub fn modes(&self) -> &[usize] {
        &self.modes
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn plan(&self) -> &DstPlan {
        &self.plan
    }

    fn trunc(&self) -> TruncationMap {
        TruncationMap::new(&self.grid, &self.modes)
    }

    /// S χ (dense matvec).
    pub fn apply(&self, chi: &[C64]) -> Vec<C64> {
        let m = self.truncation_len();
        debug_assert_eq!(chi.len(), m);
        let mut out = vec![C64::new(0.0, 0.0); m];
        for l in 0..m {
            let row = &self.matrix[l * m..(l + 1) * m];
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(chi) {
                acc += a * b;
            }
            out[l] = acc;
        }
        out
    }

    /// S* w (conjugate-transpose matvec, the adjoint in the truncated L²
    /// inner product).
    pub fn apply_adjoint(&self, w: &[C64]) -> Vec<C64> {
        let m = self.truncation_len();
        debug_assert_eq!(w.len(), m);
        let mut out = vec![C64::new(0.0, 0.0); m];
        for l in 0..m {
            for k in 0..m {
                out[k] += self.matrix[l * m + k].conj() * w[l];
            }
        }
        out
    }

    /// Independent route for validation: integrate the defining backward
    /// problem by interaction-picture RK4 in time on the truncation,
    /// ψ(0) = i∫₀^T φ²(s) e^{−isΔ}[a² e^{isΔ}χ] ds, reverse accumulation.
    pub fn apply_via_time_stepping(&self, chi: &[C64], n_steps: usize) -> Vec<C64> {
        let m = self.truncation_len();
        let trunc = self.trunc();
        let h = self.shape_t / n_steps as f64;
        let shape_phi_sq = |s: f64| {
            let t0 = s / self.shape_t;
            let p = smooth_step((t0 - 0.1) / 0.2) * smooth_step((0.9 - t0) / 0.2);
            p * p
        };
        let integrand = |s: f64| -> Vec<C64> {
            let w = shape_phi_sq(s);
            if w == 0.0 {
                return vec![C64::new(0.0, 0.0); m];
            }
            let mut buf = vec![C64::new(0.0, 0.0); self.grid.len()];
            for i in 0..m {
                buf[trunc.to_grid(i)] = chi[i] * C64::from_polar(1.0, -self.mu[i] * s);
            }
            self.plan.inverse_values(&mut buf);
            for (v, &aa) in buf.iter_mut().zip(&self.a_sq) {
                *v *= aa;
            }
            self.plan.forward_values(&mut buf);
            (0..m)
                .map(|i| w * buf[trunc.to_grid(i)] * C64::from_polar(1.0, self.mu[i] * s))
                .collect()
        };
        // RK4 on K' = f(s) running from s = T down to 0 equals Simpson-type
        // accumulation; reverse order keeps it an independent path
        let mut acc = vec![C64::new(0.0, 0.0); m];
        for j in (0..n_steps).rev() {
            let s0 = j as f64 * h;
            let k1 = integrand(s0);
            let k2 = integrand(s0 + 0.5 * h);
            let k4 = integrand(s0 + h);
            for i in 0..m {
                acc[i] += h / 6.0 * (k1[i] + 4.0 * k2[i] + k4[i]);
            }
        }
        for v in &mut acc {
            *v *= C64::new(0.0, 1.0);
        }
        acc
    }

    /// Solve S χ = target by conjugate gradient on the normal equations
    /// S*S χ = S*target, with the convergence test on the true residual
    /// ‖Sχ − target‖ ≤ tol·‖target‖.
    pub fn solve(
        &self,
        target: &[C64],
        tol: f64,
        max_iter: usize,
    ) -> Result<(DualDatum, Vec<ConvergenceRow>)> {
        if !(tol > 0.0) {
            return Err(Error::Precondition(format!("tol must be positive, got {tol}")));
        }
        let m = self.truncation_len();
        if target.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "target has {} entries, truncation has {m}",
                target.len()
            )));
        }
        let bnorm = target.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if bnorm == 0.0 {
            return Ok((DualDatum::zeros(m), Vec::new()));
        }
        let mut x = vec![C64::new(0.0, 0.0); m];
        let mut r = self.apply_adjoint(target); // S*b − S*S·0
        let mut p = r.clone();
        let mut rs_old: f64 = r.iter().map(|c| c.norm_sqr()).sum();
        let mut log = Vec::new();
        let mut prev_res = 1.0f64;
        for iter in 0..max_iter {
            let sp = self.apply(&p);
            let nsp = self.apply_adjoint(&sp);
            let denom: f64 = p
                .iter()
                .zip(&nsp)
                .map(|(a, b)| (a.conj() * b).re)
                .sum();
            if denom.abs() < 1e-300 {
                break;
            }
            let alpha = rs_old / denom;
            for i in 0..m {
                x[i] += alpha * p[i];
                r[i] -= alpha * nsp[i];
            }
            let rs_new: f64 = r.iter().map(|c| c.norm_sqr()).sum();
            // true residual
            let sx = self.apply(&x);
            let res = sx
                .iter()
                .zip(target)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
                / bnorm;
            log.push(ConvergenceRow {
                iter: iter + 1,
                residual: res,
                contraction_estimate: res / prev_res,
            });
            prev_res = res;
            if res <= tol {
                return Ok((DualDatum { coeffs: x }, log));
            }
            let beta = rs_new / rs_old;
            for i in 0..m {
                p[i] = r[i] + beta * p[i];
            }
            rs_old = rs_new;
        }
        let last = log.last().map(|r| r.residual).unwrap_or(1.0);
        Err(Error::NonConvergence {
            iterations: max_iter,
            residual: last,
        })
    }

    /// Extreme singular-value estimates of S by power iteration on S*S and
    /// inverse power iteration (through `solve`); reported as a conditioning
    /// diagnostic of the truncation.
    pub fn condition_estimate(&self) -> Result<(f64, f64)> {
        let m = self.truncation_len();
        let mut v: Vec<C64> = (0..m)
            .map(|i| C64::new(1.0 + (i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()))
            .collect();
        let norm = |u: &[C64]| u.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let mut sigma_max = 0.0;
        for _ in 0..60 {
            let w = self.apply_adjoint(&self.apply(&v));
            let n = norm(&w);
            sigma_max = n.sqrt();
            let scale = 1.0 / n;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi * scale;
            }
        }
        let mut u: Vec<C64> = (0..m)
            .map(|i| C64::new((i as f64 * 0.43).cos(), 1.0 - (i as f64 * 0.9).sin()))
            .collect();
        let mut sigma_min = f64::INFINITY;
        for _ in 0..25 {
            let nu = norm(&u);
            for ui in u.iter_mut() {
                *ui /= nu;
            }
            let (z, _) = self.solve(&u, 1e-12, 20 * m)?;
            let zn = norm(&z.coeffs);
            sigma_min = 1.0 / zn;
            u = z.coeffs;
        }
        Ok((sigma_max, sigma_min))
    }

    /// The control field v(t) = a²(x)·φ²(t)·(e^{itΔ}χ)(x) on the full grid.
    pub fn control_field(&self, dual: &DualDatum, t: f64) -> ComplexField {
        let trunc = self.trunc();
        let w = {
            let t0 = t / self.shape_t;
            let p = smooth_step((t0 - 0.1) / 0.2) * smooth_step((0.9 - t0) / 0.2);
            p * p
        };
        let mut buf = vec![C64::new(0.0, 0.0); self.grid.len()];
        if w != 0.0 {
            for i in 0..self.truncation_len() {
                buf[trunc.to_grid(i)] =
                    dual.coeffs[i] * C64::from_polar(1.0, -self.mu[i] * t);
            }
            self.plan.inverse_values(&mut buf);
            for (v, &aa) in buf.iter_mut().zip(&self.a_sq) {
                *v *= w * aa;
            }
        }
        ComplexField::from_values(&self.grid, buf).expect("grid shape")
    }

    /// Embed a truncated coefficient vector as a full-grid field.
    pub fn embed(&self, coeffs: &[C64]) -> ComplexField {
        let trunc = self.trunc();
        let mut buf = vec![C64::new(0.0, 0.0); self.grid.len()];
        for i in 0..coeffs.len() {
            buf[trunc.to_grid(i)] = coeffs[i];
        }
        self.plan.inverse_values(&mut buf);
        ComplexField::from_values(&self.grid, buf).expect("grid shape")
    }

    /// Restrict a field to the truncated coefficient vector.
    pub fn restrict(&self, field: &ComplexField) -> Vec<C64> {
        let trunc = self.trunc();
        let c = self.plan.forward(field);
        (0..self.truncation_len())
            .map(|i| c.coeffs()[trunc.to_grid(i)])
            .collect()
    }

    /// Integrate i∂_tψ + Δψ = (nonlinear? −|ψ|^{p−1}ψ : 0) + v(t) forward
    /// from `psi0` on the full grid with interaction-picture RK4, where
    /// v(t) = a²φ²(t)e^{itΔ}χ. Also accumulates the truncation of
    /// K = −i∫ e^{−isΔ}(|ψ|^{p−1}ψ) ds when `nonlinear`.
    pub fn simulate_controlled(
        &self,
        psi0: &ComplexField,
        dual: &DualDatum,
        nonlinear: bool,
        n_steps: usize,
    ) -> Result<(ComplexField, Vec<C64>)> {
        let grid = &self.grid;
        if psi0.grid() != grid {
            return Err(Error::ShapeMismatch("initial state grid mismatch".into()));
        }
        let p = grid.domain().critical_exponent();
        let n = grid.len();
        let m = self.truncation_len();
        let trunc = self.trunc();
        let h = self.shape_t / n_steps as f64;
        let mut u = psi0.values().to_vec();
        self.plan.forward_values(&mut u);

        // interaction picture: u' = −i e^{+iμs} ⊙ F[−|ψ|^{p−1}ψ + v](s);
        // the K-functional integrand is −i e^{+iμs} ⊙ F[|ψ|^{p−1}ψ]
        let deriv = |s: f64, u: &[C64], k_out: &mut Vec<C64>| -> Vec<C64> {
            let w = {
                let t0 = s / self.shape_t;
                let ph = smooth_step((t0 - 0.1) / 0.2) * smooth_step((0.9 - t0) / 0.2);
                ph * ph
            };
            let mut rhs = vec![C64::new(0.0, 0.0); n];
            if w != 0.0 {
                for i in 0..m {
                    rhs[trunc.to_grid(i)] =
                        dual.coeffs[i] * C64::from_polar(1.0, -self.mu[i] * s);
                }
                self.plan.inverse_values(&mut rhs);
                for (v, &aa) in rhs.iter_mut().zip(&self.a_sq) {
                    *v *= w * aa;
                }
            }
            if nonlinear {
                let mut psi = u.to_vec();
                for (c, &mu) in psi.iter_mut().zip(&self.mu_grid) {
                    *c *= C64::from_polar(1.0, -mu * s);
                }
                self.plan.inverse_values(&mut psi);
                let mut nlv = vec![C64::new(0.0, 0.0); n];
                for (o, v) in nlv.iter_mut().zip(&psi) {
                    *o = v * v.norm().powf(p - 1.0);
                }
                self.plan.forward_values(&mut nlv);
                for ((r, nlc), &mu) in rhs.iter_mut().zip(&nlv).zip(&self.mu_grid) {
                    let rotated = nlc * C64::from_polar(1.0, mu * s);
                    *r = C64::from_polar(1.0, mu * s) * *r;
                    // RHS total = −|ψ|^{p−1}ψ + v in the rotated frame
                    *r -= rotated;
                    // du = −i·rhs
                    *r *= C64::new(0.0, -1.0);
                }
                for i in 0..m {
                    // K' = −i e^{+iμs}(|ψ|^{p−1}ψ)^
                    k_out[i] = C64::new(0.0, -1.0)
                        * nlv[trunc.to_grid(i)]
                        * C64::from_polar(1.0, self.mu[i] * s);
                }
            } else {
                for (r, &mu) in rhs.iter_mut().zip(&self.mu_grid) {
                    *r = C64::new(0.0, -1.0) * C64::from_polar(1.0, mu * s) * *r;
                }
            }
            rhs
        };

        let mut k_acc = vec![C64::new(0.0, 0.0); m];
        let mut kbuf1 = vec![C64::new(0.0, 0.0); m];
        let mut kbuf2 = vec![C64::new(0.0, 0.0); m];
        let mut kbuf3 = vec![C64::new(0.0, 0.0); m];
        let mut kbuf4 = vec![C64::new(0.0, 0.0); m];
        for j in 0..n_steps {
            let s0 = j as f64 * h;
            let k1 = deriv(s0, &u, &mut kbuf1);
            let u2: Vec<C64> = u.iter().zip(&k1).map(|(a, b)| a + 0.5 * h * b).collect();
            let k2 = deriv(s0 + 0.5 * h, &u2, &mut kbuf2);
            let u3: Vec<C64> = u.iter().zip(&k2).map(|(a, b)| a + 0.5 * h * b).collect();
            let k3 = deriv(s0 + 0.5 * h, &u3, &mut kbuf3);
            let u4: Vec<C64> = u.iter().zip(&k3).map(|(a, b)| a + h * b).collect();
            let k4 = deriv(s0 + h, &u4, &mut kbuf4);
            for i in 0..n {
                u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if nonlinear {
                for i in 0..m {
                    k_acc[i] += h / 6.0 * (kbuf1[i] + 2.0 * kbuf2[i] + 2.0 * kbuf3[i] + kbuf4[i]);
                }
            }
        }
        // back to the lab frame at t = T
        for (c, &mu) in u.iter_mut().zip(&self.mu_grid) {
            *c *= C64::from_polar(1.0, -mu * self.shape_t);
        }
        self.plan.inverse_values(&mut u);
        Ok((ComplexField::from_values(grid, u)?, k_acc))
    }
}

/// Map between truncated and full-grid coefficient indices.
struct TruncationMap {
    modes: Vec<usize>,
    grid_shape: Vec<usize>,
}

impl TruncationMap {
    fn new(grid: &Grid, modes: &[usize]) -> Self {
        Self {
            modes: modes.to_vec(),
            grid_shape: grid.shape().to_vec(),
        }
    }

    fn len(&self) -> usize {
        self.modes.iter().product()
    }

    fn to_grid(&self, flat: usize) -> usize {
        match self.modes.len() {
            1 => flat,
            _ => {
                let k0 = flat / self.modes[1];
                let k1 = flat % self.modes[1];
                k0 * self.grid_shape[1] + k1
            }
        }
    }
}

/// Result of a linear null-control construction.
pub struct LinearNullReport {
    pub dual: DualDatum,
    pub cg_log: Vec<ConvergenceRow>,
    pub terminal_l2: f64,
    pub initial_l2: f64,
    /// ∫‖v‖² dt by Simpson sampling.
    pub control_energy: f64,
}

/// Build and verify a null control for the linear equation: solve
/// S χ = ψ₀ (truncated), then simulate forward with v = a²φ²e^{itΔ}χ.
pub fn linear_null_control(
    op: &HumOperator,
    psi0: &ComplexField,
    tol: f64,
    max_iter: usize,
    n_time_steps: usize,
) -> Result<LinearNullReport> {
    let target = op.restrict(psi0);
    let (dual, cg_log) = op.solve(&target, tol, max_iter)?;
    let (terminal, _) = op.simulate_controlled(psi0, &dual, false, n_time_steps)?;
    let mut control_energy = 0.0;
    let ns = 256;
    let hq = op.shape_t / ns as f64;
    for j in 0..=ns {
        let t = j as f64 * hq;
        let v = op.control_field(&dual, t);
        let w = if j == 0 || j == ns {
            0.5
        } else {
            1.0
        };
        control_energy += w * hq * v.l2_norm_sq();
    }
    Ok(LinearNullReport {
        dual,
        cg_log,
        terminal_l2: terminal.l2_norm(),
        initial_l2: psi0.l2_norm(),
        control_energy,
    })
}

/// Result of the nonlinear fixed-point construction.
pub struct NonlinearNullReport {
    pub dual: DualDatum,
    pub picard_log: Vec<ConvergenceRow>,
    /// max over recorded iterations of ‖Δψ₀^{k+1}‖/‖Δψ₀^k‖
    pub contraction_factor: f64,
    pub terminal_l2: f64,
    pub initial_l2: f64,
}

/// Local null control of the nonlinear equation by Picard iteration of
/// B(ψ₀) = S⁻¹u₀ − S⁻¹K(ψ₀), where K(ψ₀) is the initial value of the
/// backward linear problem driven by −|ψ|^{p−1}ψ along the controlled
/// nonlinear trajectory.
pub fn nonlinear_null_control(
    op: &HumOperator,
    u0: &ComplexField,
    tol: f64,
    max_fp_iter: usize,
    cg_tol: f64,
    cg_max_iter: usize,
    n_time_steps: usize,
) -> Result<NonlinearNullReport> {
    let initial_l2 = u0.l2_norm();
    if initial_l2 == 0.0 {
        return Ok(NonlinearNullReport {
            dual: DualDatum::zeros(op.truncation_len()),
            picard_log: Vec::new(),
            contraction_factor: 0.0,
            terminal_l2: 0.0,
            initial_l2,
        });
    }
    let target = op.restrict(u0);
    let (s_inv_u0, _) = op.solve(&target, cg_tol, cg_max_iter)?;
    let mut dual = s_inv_u0.clone();
    let mut log = Vec::new();
    let mut prev_diff = f64::NAN;
    let mut factor: f64 = 0.0;
    let mut converged = false;
    for iter in 0..max_fp_iter {
        let (_, k_trunc) = op.simulate_controlled(u0, &dual, true, n_time_steps)?;
        let (s_inv_k, _) = op.solve(&k_trunc, cg_tol, cg_max_iter)?;
        let next: Vec<C64> = s_inv_u0
            .coeffs
            .iter()
            .zip(&s_inv_k.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        let diff = next
            .iter()
            .zip(&dual.coeffs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        let contraction = if prev_diff.is_nan() {
            f64::NAN
        } else {
            diff / prev_diff
        };
        if contraction.is_finite() {
            factor = factor.max(contraction);
        }
        log.push(ConvergenceRow {
            iter: iter + 1,
            residual: diff,
            contraction_estimate: contraction,
        });
        dual = DualDatum { coeffs: next };
        if contraction.is_finite() && contraction >= 1.0 && diff > tol {
            return Err(Error::Divergence { factor: contraction });
        }
        if diff < tol {
            converged = true;
            break;
        }
        prev_diff = diff;
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: max_fp_iter,
            residual: log.last().map(|r| r.residual).unwrap_or(f64::NAN),
        });
    }
    let (terminal, _) = op.simulate_controlled(u0, &dual, true, n_time_steps)?;
    Ok(NonlinearNullReport {
        dual,
        picard_log: log,
        contraction_factor: factor,
        terminal_l2: terminal.l2_norm(),
        initial_l2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::RectDomain;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn grid_1d(n: usize, l: f64) -> Grid {
        Grid::new(RectDomain::interval(l).unwrap(), &[n]).unwrap()
    }

    fn bump_shape(grid: &Grid, t: f64) -> ControlShape {
        let dom = grid.domain().clone();
        let cutoff = CutoffSpec::new(&dom, [0.5, 0.0], 0.05, 0.1).unwrap();
        ControlShape::new(grid, &cutoff, t).unwrap()
    }

    #[test]
    fn uniform_profile_gives_diagonal_scaled_identity() {
        let grid = grid_1d(64, 1.0);
        let shape = ControlShape::uniform(&grid, 1.0);
        let op = HumOperator::new(&shape, &[8]).unwrap();
        // independent Simpson quadrature of ∫φ²
        let ns = 20000;
        let h = 1.0 / ns as f64;
        let mut phi_int = 0.0;
        for j in 0..=ns {
            let w = if j == 0 || j == ns { 0.5 } else { 1.0 };
            phi_int += w * h * shape.phi_sq(j as f64 * h);
        }
        let mut chi = vec![C64::new(0.0, 0.0); 8];
        chi[2] = C64::new(1.0, 0.0);
        let out = op.apply(&chi);
        let expect = C64::new(0.0, phi_int);
        assert!((out[2] - expect).norm() < 1e-10, "{:?} vs {:?}", out[2], expect);
        for (i, v) in out.iter().enumerate() {
            if i != 2 {
                assert!(v.norm() < 1e-12, "off-diagonal leak {i}: {v:?}");
            }
        }
    }

    #[test]
    fn apply_is_linear_and_matches_time_stepping() {
        let grid = grid_1d(128, std::f64::consts::PI);
        let shape = bump_shape(&grid, 1.0);
        let op = HumOperator::new(&shape, &[8]).unwrap();
        let mut rng = StdRng::seed_from_u64(11);
        let randvec = |rng: &mut StdRng| -> Vec<C64> {
            (0..8)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect()
        };
        let u = randvec(&mut rng);
        let w = randvec(&mut rng);
        let alpha = C64::new(0.3, -0.7);
        let both: Vec<C64> = u.iter().zip(&w).map(|(a, b)| alpha * a + b).collect();
        let lhs = op.apply(&both);
        let (su, sw) = (op.apply(&u), op.apply(&w));
        for i in 0..8 {
            assert!((lhs[i] - (alpha * su[i] + sw[i])).norm() < 1e-12);
        }

        // reverse-time integration oracle
        let stepped = op.apply_via_time_stepping(&u, 20000);
        let err: f64 = stepped
            .iter()
            .zip(&su)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale: f64 = su.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err < 1e-8 * scale.max(1.0), "time-stepped mismatch {err:.3e}");
    }

    #[test]
    fn adjoint_consistency() {
        let grid = grid_1d(128, 1.0);
        let shape = bump_shape(&grid, 1.0);
        let op = HumOperator::new(&shape, &[8]).unwrap();
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..5 {
            let u: Vec<C64> = (0..8)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let w: Vec<C64> = (0..8)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let su = op.apply(&u);
            let sw = op.apply_adjoint(&w);
            let lhs: C64 = su.iter().zip(&w).map(|(a, b)| b.conj() * a).sum();
            let rhs: C64 = sw.iter().zip(&u).map(|(a, b)| a.conj() * b).sum();
            assert!((lhs - rhs).norm() < 1e-10 * (lhs.norm() + 1.0));
        }
    }

    #[test]
    fn solve_recovers_random_preimage() {
        let grid = grid_1d(256, 1.0);
        let shape = bump_shape(&grid, 1.0);
        let op = HumOperator::new(&shape, &[12]).unwrap();
        let mut rng = StdRng::seed_from_u64(23);
        let u: Vec<C64> = (0..op.truncation_len())
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let b = op.apply(&u);
        let (x, log) = op.solve(&b, 1e-11, 2000).unwrap();
        let err: f64 = x
            .coeffs
            .iter()
            .zip(&u)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-7, "recovery err {err:.3e} after {} iters", log.len());

        // zero target → zero dual, no iterations
        let (z, zlog) = op.solve(&vec![C64::new(0.0, 0.0); op.truncation_len()], 1e-10, 10).unwrap();
        assert!(z.norm() == 0.0 && zlog.is_empty());
    }

    #[test]
    fn control_field_support_and_time_support() {
        let grid = grid_1d(256, 1.0);
        let shape = bump_shape(&grid, 1.0);
        let op = HumOperator::new(&shape, &[8]).unwrap();
        let mut dual = DualDatum::zeros(8);
        dual.coeffs[1] = C64::new(1.0, 0.5);
        // outside the temporal support the control vanishes
        assert_eq!(op.control_field(&dual, 0.05).l2_norm(), 0.0);
        assert_eq!(op.control_field(&dual, 0.95).l2_norm(), 0.0);
        // spatial support inside supp a ⊆ [0.4, 0.6]
        let v = op.control_field(&dual, 0.5);
        for i in 0..grid.len() {
            let x = grid.node(i)[0];
            if (x - 0.5).abs() >= 0.1 {
                assert_eq!(v.values()[i], C64::new(0.0, 0.0), "leak at x={x}");
            }
        }
    }

    #[test]
    fn mode_count_validation() {
        let grid = grid_1d(64, 1.0);
        let shape = bump_shape(&grid, 1.0);
        assert!(HumOperator::new(&shape, &[65]).is_err());
        assert!(HumOperator::new(&shape, &[8, 8]).is_err());
        assert!(op_err_tol(&shape));
    }

    fn op_err_tol(shape: &ControlShape) -> bool {
        let op = HumOperator::new(shape, &[8]).unwrap();
        op.solve(&vec![C64::new(1.0, 0.0); 8], -1.0, 10).is_err()
    }
}
