//! Piecewise nonlinear feedback stabilization of blow-up profiles and the
//! explicit open-loop null control.
//!
//! Stage structure on [0, t₂]:
//! - [0, t₁]: law K¹, v = χ(x)(|ψ|^{p−1}ψ − |φ|^{p−1}φ), which vanishes on
//!   the reference and replaces the nonlinearity by the reference's inside
//!   the control region;
//! - [t₁, t₂]: law K², v = χ(x)(|ψ|^{p−1}ψ − e^{−μ(t−t₁)}(|φ|^{p−1}φ + iμφ)),
//!   which damps the in-region content like e^{−μ(t−t₁)}.
//!
//! The schedule t₁ = T_λ(1−2T_λ), t₂ = T_λ(1−T_λ), μ(t₂−t₁) = 1/(λT_λ²)
//! requires T_λ < 1/4. The laws are applied with the mass-critical power of
//! the dimension in play (cubic in 2D, quintic in 1D), which preserves the
//! cancellation structure.

use std::cell::RefCell;

use crate::domain::{dist, Grid};
use crate::dynamics::{
    adaptive_dt, EvolveOptions, Monitors, Outcome, SimState, Stepper, Trajectory,
};
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::ground_state::GroundState;
use crate::profile::{smooth_step, smooth_step_deriv, synth_profile, BlowupSpec, CutoffSpec};
use crate::C64;

/// Rapid-stabilization schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub t1: f64,
    pub t2: f64,
    pub mu: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub lambda: f64,
    pub t_lambda: f64,
}

/// t₁ = T_λ(1−2T_λ), t₂ = T_λ(1−T_λ), μ = 1/(λT_λ²·(t₂−t₁)) = 1/(λT_λ⁴),
/// δ = ε/16. Requires T_λ < 1/4.
pub fn make_schedule(lambda: f64, t_lambda: f64, epsilon: f64) -> Result<ControlSchedule> {
    if !(lambda > 0.0) || !(epsilon > 0.0) {
        return Err(Error::Precondition(format!(
            "need λ > 0 and ε > 0, got λ = {lambda}, ε = {epsilon}"
        )));
    }
    if !(t_lambda > 0.0 && t_lambda < 0.25) {
        return Err(Error::Precondition(format!(
            "schedule requires 0 < T_λ < 1/4, got T_λ = {t_lambda}"
        )));
    }
    let t1 = t_lambda * (1.0 - 2.0 * t_lambda);
    let t2 = t_lambda * (1.0 - t_lambda);
    let mu = 1.0 / (lambda * t_lambda * t_lambda * (t2 - t1));
    Ok(ControlSchedule {
        t1,
        t2,
        mu,
        epsilon,
        delta: epsilon / 16.0,
        lambda,
        t_lambda,
    })
}

/// Reference trajectory φ̂(t) the feedback laws are built around: either the
/// analytic profile R_λ or a replayed free run.
pub enum ReferenceTrajectory {
    AnalyticRlambda { spec: BlowupSpec, gs: GroundState },
    StoredFreeRun {
        times: Vec<f64>,
        snapshots: Vec<ComplexField>,
    },
}

impl ReferenceTrajectory {
    pub fn eval(&self, t: f64, grid: &Grid) -> Result<ComplexField> {
        match self {
            Self::AnalyticRlambda { spec, gs } => synth_profile(spec, gs, t, grid),
            Self::StoredFreeRun { times, snapshots } => {
                if times.len() < 2 || times.len() != snapshots.len() {
                    return Err(Error::Precondition(
                        "stored reference needs ≥2 snapshots".into(),
                    ));
                }
                if t < times[0] - 1e-12 || t > *times.last().unwrap() + 1e-12 {
                    return Err(Error::Precondition(format!(
                        "t = {t} outside stored range [{}, {}]",
                        times[0],
                        times.last().unwrap()
                    )));
                }
                let j = match times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
                    Ok(j) => return Ok(snapshots[j].clone()),
                    Err(j) => j.clamp(1, times.len() - 1),
                };
                let (ta, tb) = (times[j - 1], times[j]);
                let w = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
                let mut out = snapshots[j - 1].scaled(C64::new(1.0 - w, 0.0));
                out.axpy(C64::new(w, 0.0), &snapshots[j]);
                Ok(out)
            }
        }
    }
}

fn cubiclike(u: C64, p: f64) -> C64 {
    u * u.norm().powf(p - 1.0)
}

/// K¹: v = χ(x)(|ψ|^{p−1}ψ − |φ|^{p−1}φ). Vanishes identically on ψ = φ and
/// outside the support of χ.
pub fn k1_feedback(psi: &ComplexField, reference: &ComplexField, chi: &CutoffSpec) -> ComplexField {
    let grid = psi.grid();
    let dim = grid.dim();
    let p = grid.domain().critical_exponent();
    let mut out = ComplexField::zeros(grid);
    for i in 0..grid.len() {
        let c = chi.eval(grid.node(i), dim);
        if c == 0.0 {
            continue;
        }
        let u = psi.values()[i];
        let r = reference.values()[i];
        out.values_mut()[i] = c * (cubiclike(u, p) - cubiclike(r, p));
    }
    out
}

/// K²: v = χ(x)(|ψ|^{p−1}ψ − e^{−μ(t−t₁)}(|φ|^{p−1}φ + iμφ)), t ∈ [t₁, t₂].
pub fn k2_feedback(
    psi: &ComplexField,
    reference: &ComplexField,
    chi: &CutoffSpec,
    mu: f64,
    t1: f64,
    t2: f64,
    t: f64,
) -> Result<ComplexField> {
    let tol = 1e-12 * t2.abs().max(1.0);
    if !(t >= t1 - tol && t <= t2 + tol) {
        return Err(Error::Precondition(format!(
            "t = {t} outside the K² window [{t1}, {t2}]"
        )));
    }
    let grid = psi.grid();
    let dim = grid.dim();
    let p = grid.domain().critical_exponent();
    let damp = (-mu * (t - t1).max(0.0)).exp();
    let imu = C64::new(0.0, mu);
    let mut out = ComplexField::zeros(grid);
    for i in 0..grid.len() {
        let c = chi.eval(grid.node(i), dim);
        if c == 0.0 {
            continue;
        }
        let u = psi.values()[i];
        let r = reference.values()[i];
        out.values_mut()[i] = c * (cubiclike(u, p) - damp * (cubiclike(r, p) + imu * r));
    }
    Ok(out)
}

/// One-slot cache so repeated controller evaluations at the same stage time
/// reuse the synthesized reference field.
pub struct RefCache<'a> {
    reference: &'a ReferenceTrajectory,
    grid: Grid,
    slot: RefCell<Option<(f64, ComplexField)>>,
}

impl<'a> RefCache<'a> {
    pub fn new(reference: &'a ReferenceTrajectory, grid: Grid) -> Self {
        Self {
            reference,
            grid,
            slot: RefCell::new(None),
        }
    }

    pub fn eval(&self, t: f64) -> ComplexField {
        if let Some((tc, f)) = self.slot.borrow().as_ref() {
            if *tc == t {
                return f.clone();
            }
        }
        let f = self
            .reference
            .eval(t, &self.grid)
            .expect("reference evaluation failed inside controller");
        *self.slot.borrow_mut() = Some((t, f.clone()));
        f
    }
}

/// Report of a stabilization run.
pub struct StabilizeReport {
    pub trajectory: Trajectory,
    /// (t, ‖v(t)‖_{L²}) sampled once per step.
    pub control_log: Vec<(f64, f64)>,
    /// ∫‖v‖² dt by step-wise rectangle quadrature.
    pub control_energy: f64,
    pub terminal_l2: f64,
    pub terminal_h2_spec: f64,
}

/// Drive ψ from `psi0` with K¹ on [0,t₁] and K² on [t₁,t₂], cutoff by
/// cutoff (disjoint supports make the summed law equal the per-point laws).
///
/// Precondition: ‖psi0 − φ̂(0)‖_{H²,spec} < schedule.delta.
pub fn stabilize_run(
    stepper: &Stepper,
    psi0: ComplexField,
    spec: &BlowupSpec,
    schedule: &ControlSchedule,
    reference: &ReferenceTrajectory,
    opts: &EvolveOptions,
) -> Result<StabilizeReport> {
    let grid = psi0.grid().clone();
    let plan = stepper.plan();
    let ref0 = reference.eval(0.0, &grid)?;
    let dev = plan.sobolev_norm(&psi0.sub(&ref0), 2)?;
    if dev >= schedule.delta {
        return Err(Error::Precondition(format!(
            "initial deviation {dev:.3e} exceeds δ = {:.3e}",
            schedule.delta
        )));
    }
    let p = stepper.exponent();
    let center = grid.domain().center();
    let mut monitors = Monitors::default();
    monitors.push(0.0, &psi0, plan, p, center);
    let h1_initial = *monitors.h1.last().unwrap();
    let mut control_log = Vec::new();
    let mut control_energy = 0.0;
    let mut snapshots = vec![(0.0, psi0.clone())];
    let mut state = SimState::new(0.0, psi0);
    let mut steps = 0usize;
    let cache = RefCache::new(reference, grid.clone());

    // stage boundaries are hit exactly; inside stage 2 the exponential layer
    // e^{−μ(t−t₁)} is resolved with dt ≤ 1/(2μ) until it has died out
    let mut outcome = Outcome::Completed;
    'outer: for stage in 0..2usize {
        let t_end = if stage == 0 { schedule.t1 } else { schedule.t2 };
        while state.t < t_end - 1e-15 * t_end {
            let mut dt = adaptive_dt(&state.field, p, opts);
            if stage == 1 {
                let elapsed = state.t - schedule.t1;
                if schedule.mu * elapsed < 45.0 {
                    dt = dt.min(0.5 / schedule.mu);
                }
            }
            if state.t + dt > t_end {
                dt = t_end - state.t;
            }
            if dt < opts.dt_min {
                outcome = Outcome::DtUnderflow;
                break 'outer;
            }
            let controller = |t: f64, psi: &ComplexField| -> ComplexField {
                let reference_field = cache.eval(t);
                let mut v = ComplexField::zeros(&grid);
                for chi in &spec.cutoffs {
                    let part = if stage == 0 {
                        k1_feedback(psi, &reference_field, chi)
                    } else {
                        k2_feedback(
                            psi,
                            &reference_field,
                            chi,
                            schedule.mu,
                            schedule.t1,
                            schedule.t2,
                            t,
                        )
                        .expect("stage window enforced by the loop")
                    };
                    v.axpy(C64::new(1.0, 0.0), &part);
                }
                v
            };
            let v_now = controller(state.t, &state.field);
            let vnorm = v_now.l2_norm();
            control_log.push((state.t, vnorm));
            control_energy += vnorm * vnorm * dt;

            state = stepper.strang_step(&state, dt, &controller)?;
            steps += 1;
            if steps % opts.monitor_every.max(1) == 0 {
                monitors.push(state.t, &state.field, plan, p, center);
            }
            if opts.snapshot_every > 0 && steps % opts.snapshot_every == 0 {
                snapshots.push((state.t, state.field.clone()));
            }
            let h1_now = plan.grad_norm(&state.field);
            if h1_now > opts.blowup_ratio * h1_initial {
                outcome = Outcome::BlowupDetected;
                break 'outer;
            }
        }
    }
    if *monitors.t.last().unwrap() < state.t {
        monitors.push(state.t, &state.field, plan, p, center);
    }
    snapshots.push((state.t, state.field.clone()));
    let terminal_l2 = state.field.l2_norm();
    let terminal_h2_spec = plan.sobolev_norm(&state.field, 2)?;
    Ok(StabilizeReport {
        trajectory: Trajectory {
            snapshots,
            monitors,
            outcome,
            final_state: state,
            steps,
        },
        control_log,
        control_energy,
        terminal_l2,
        terminal_h2_spec,
    })
}

/// Temporal profile θ ∈ C^∞([0,T_λ];[0,1]) with θ ≡ 0 on [0, T_λ/4] and
/// θ ≡ 1 on [T_λ/2, T_λ].
#[derive(Debug, Clone, Copy)]
pub struct ThetaProfile {
    pub t_lambda: f64,
}

impl ThetaProfile {
    pub fn eval(&self, t: f64) -> f64 {
        let lo = 0.25 * self.t_lambda;
        let hi = 0.5 * self.t_lambda;
        smooth_step((t - lo) / (hi - lo))
    }

    pub fn deriv(&self, t: f64) -> f64 {
        let lo = 0.25 * self.t_lambda;
        let hi = 0.5 * self.t_lambda;
        smooth_step_deriv((t - lo) / (hi - lo)) / (hi - lo)
    }
}

/// Open-loop reference ψ(t) = (1 − θ(t)χ(x))·φ̂(t), evaluated nodewise.
pub fn open_loop_reference(
    theta: &ThetaProfile,
    chi: &CutoffSpec,
    reference_field: &ComplexField,
    t: f64,
) -> ComplexField {
    let grid = reference_field.grid();
    let dim = grid.dim();
    let th = theta.eval(t);
    let mut out = reference_field.clone();
    for i in 0..grid.len() {
        let c = chi.eval(grid.node(i), dim);
        out.values_mut()[i] *= 1.0 - th * c;
    }
    out
}

/// Open-loop control
/// v = −iθ'χφ − 2θ∇χ·∇φ − θ(Δχ)φ + ((1−θχ)^p − (1−θχ))|φ|^{p−1}φ,
/// with ∇χ, Δχ from the closed-form bump. For the cubic equation the
/// polynomial factor reduces to −2θχ + 3θ²χ² − θ³χ³.
///
/// Support is contained in supp χ: every term carries χ, a derivative of χ,
/// or the polynomial factor, which vanishes where χ = 0.
pub fn open_loop_control(
    plan: &crate::spectral::DstPlan,
    theta: &ThetaProfile,
    chi: &CutoffSpec,
    reference_field: &ComplexField,
    t: f64,
) -> ComplexField {
    let grid = reference_field.grid();
    let dim = grid.dim();
    let p = grid.domain().critical_exponent();
    let th = theta.eval(t);
    let thd = theta.deriv(t);
    let coeffs = plan.forward(reference_field);
    let grads: Vec<ComplexField> = (0..dim).map(|ax| plan.gradient_axis(&coeffs, ax)).collect();
    let mut out = ComplexField::zeros(grid);
    for i in 0..grid.len() {
        let x = grid.node(i);
        let c = chi.eval(x, dim);
        let gchi = chi.grad(x, dim);
        let lchi = chi.laplacian(x, dim);
        let has_grad = gchi[0] != 0.0 || gchi[1] != 0.0;
        if c == 0.0 && !has_grad && lchi == 0.0 {
            continue;
        }
        let phi = reference_field.values()[i];
        let mut v = C64::new(0.0, -1.0) * (thd * c) * phi;
        if has_grad {
            let mut dot = C64::new(0.0, 0.0);
            for (ax, g) in grads.iter().enumerate() {
                dot += gchi[ax] * g.values()[i];
            }
            v -= 2.0 * th * dot;
        }
        v -= th * lchi * phi;
        let s = th * c;
        let poly = (1.0 - s).powf(p) - (1.0 - s);
        v += poly * cubiclike(phi, p);
        out.values_mut()[i] = v;
    }
    out
}

/// Open-loop control with the reference and its gradient evaluated in
/// closed form from the profile ingredients (radial derivative of Q, bump
/// derivative, phase derivative). Unlike the field-based variant, this stays
/// exact arbitrarily close to T_λ, where the core has left the grid's
/// resolution and a spectral gradient would pollute the annulus.
pub fn open_loop_control_analytic(
    theta: &ThetaProfile,
    chi: &CutoffSpec,
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
    let p = grid.domain().critical_exponent();
    let rho = spec.scale(t);
    let tau = spec.t_lambda - t;
    let amp = rho.powf(-(dim as f64) / 2.0);
    let lam = spec.lambda;
    let th = theta.eval(t);
    let thd = theta.deriv(t);
    let mut out = ComplexField::zeros(grid);
    for i in 0..grid.len() {
        let x = grid.node(i);
        let c = chi.eval(x, dim);
        let gchi = chi.grad(x, dim);
        let lchi = chi.laplacian(x, dim);
        let has_grad = gchi[0] != 0.0 || gchi[1] != 0.0;
        if c == 0.0 && !has_grad && lchi == 0.0 {
            continue;
        }
        // reference value and gradient, summed over profile bumps (disjoint)
        let mut r_val = C64::new(0.0, 0.0);
        let mut r_grad = [C64::new(0.0, 0.0); 2];
        for (point, pk) in spec.points.iter().zip(&spec.cutoffs) {
            let r = crate::domain::dist(x, *point, dim);
            if r >= pk.r_outer {
                continue;
            }
            let phik = 1.0 - smooth_step(pk.tau(r));
            let q = gs.eval(r / rho);
            if phik == 0.0 && q == 0.0 {
                continue;
            }
            let phase = (4.0 - lam * lam * r * r) / (4.0 * lam * lam * tau);
            let e = C64::from_polar(1.0, phase);
            r_val += amp * phik * q * e;
            if r > 0.0 {
                let dphik = pk.radial_deriv(r);
                let dq = gs.eval_deriv(r / rho) / rho;
                let dphase = -r / (2.0 * tau);
                let radial =
                    amp * e * (C64::new(dphik * q + phik * dq, 0.0) + C64::new(0.0, dphase) * phik * q);
                for j in 0..dim {
                    r_grad[j] += radial * ((x[j] - point[j]) / r);
                }
            }
        }
        let mut v = C64::new(0.0, -1.0) * (thd * c) * r_val;
        if has_grad {
            let mut dot = C64::new(0.0, 0.0);
            for (j, g) in r_grad.iter().enumerate().take(dim) {
                dot += gchi[j] * g;
            }
            v -= 2.0 * th * dot;
        }
        v -= th * lchi * r_val;
        let s = th * c;
        let poly = (1.0 - s).powf(p) - (1.0 - s);
        v += poly * cubiclike(r_val, p);
        out.values_mut()[i] = v;
    }
    Ok(out)
}

/// Report of an open-loop null-control run.
pub struct OpenLoopReport {
    pub trajectory: Trajectory,
    pub terminal_l2: f64,
    pub initial_l2: f64,
    pub control_energy: f64,
    /// Largest |v| observed outside the cutoff support over the run.
    pub max_control_outside_support: f64,
}

/// Simulate the controlled equation from ψ(0) = R_λ(0) with the open-loop
/// control built on the analytic profile, up to T_λ.
pub fn open_loop_run(
    stepper: &Stepper,
    spec: &BlowupSpec,
    gs: &GroundState,
    theta: &ThetaProfile,
    grid: &Grid,
    opts: &EvolveOptions,
) -> Result<OpenLoopReport> {
    if spec.cutoffs.len() != 1 {
        return Err(Error::Precondition(
            "open-loop run is defined for a single blow-up point".into(),
        ));
    }
    let chi = &spec.cutoffs[0];
    let plan = stepper.plan();
    let p = stepper.exponent();
    let center = grid.domain().center();
    let psi0 = synth_profile(spec, gs, 0.0, grid)?;
    let initial_l2 = psi0.l2_norm();
    let dim = grid.dim();
    let controller = |t: f64, _psi: &ComplexField| -> ComplexField {
        let tt = t.min(spec.t_lambda * (1.0 - 1e-9));
        open_loop_control_analytic(theta, chi, spec, gs, tt, grid)
            .expect("time clamped below T_λ")
    };
    let mut monitors = Monitors::default();
    monitors.push(0.0, &psi0, plan, p, center);
    let mut state = SimState::new(0.0, psi0);
    let mut steps = 0usize;
    let mut control_energy = 0.0;
    let mut max_outside: f64 = 0.0;
    let mut outcome = Outcome::Completed;
    let t_end = spec.t_lambda;
    loop {
        if state.t >= t_end - 1e-15 {
            break;
        }
        let mut dt = adaptive_dt(&state.field, p, opts);
        if state.t + dt > t_end {
            dt = t_end - state.t;
        }
        if dt < opts.dt_min {
            outcome = Outcome::DtUnderflow;
            break;
        }
        let v_now = controller(state.t, &state.field);
        let vnorm = v_now.l2_norm();
        control_energy += vnorm * vnorm * dt;
        for i in 0..grid.len() {
            let x = grid.node(i);
            if dist(x, chi.center, dim) >= chi.r_outer {
                max_outside = max_outside.max(v_now.values()[i].norm());
            }
        }
        state = stepper.strang_step(&state, dt, &controller)?;
        steps += 1;
        if steps % opts.monitor_every.max(1) == 0 {
            monitors.push(state.t, &state.field, plan, p, center);
        }
    }
    if *monitors.t.last().unwrap() < state.t {
        monitors.push(state.t, &state.field, plan, p, center);
    }
    let terminal_l2 = state.field.l2_norm();
    Ok(OpenLoopReport {
        trajectory: Trajectory {
            snapshots: vec![(state.t, state.field.clone())],
            monitors,
            outcome,
            final_state: state,
            steps,
        },
        terminal_l2,
        initial_l2,
        control_energy,
        max_control_outside_support: max_outside,
    })
}
