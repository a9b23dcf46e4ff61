//! Run configuration: one TOML file fully determines a run; the resolved
//! config is embedded in the run record for provenance.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use nls_core::domain::{Grid, Point, RectDomain};
use nls_core::dynamics::{EvolveOptions, Scheme};
use nls_core::profile::BlowupSpec;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    GroundState,
    FreeBlowup,
    SubcriticalGlobal,
    StabilizeGlobal,
    StabilizeThenNull,
    OpenLoopNull,
    HumLinear,
    HumNonlinear,
    Sweep,
    ProfileDiagnostics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub kind: Kind,
    #[serde(default)]
    pub domain: DomainConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub evolve: EvolveConfig,
    #[serde(default)]
    pub feedback: FeedbackConfig,
    #[serde(default)]
    pub hum: HumConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub lengths: Vec<f64>,
    pub n: Vec<usize>,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self {
            lengths: vec![1.0],
            n: vec![1024],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    /// blow-up points, one entry of d coordinates per point
    pub points: Vec<Vec<f64>>,
    pub lambda: f64,
    /// T_λ = horizon_coeff · λ^{−2}
    pub horizon_coeff: f64,
    pub r_inner: f64,
    pub r_outer: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            points: vec![vec![0.5]],
            lambda: 15.0,
            horizon_coeff: 0.3,
            r_inner: 0.25,
            r_outer: 0.4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    pub cfl: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    pub blowup_ratio: f64,
    pub monitor_every: usize,
    pub scheme: SchemeConfig,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SchemeConfig {
    Strang,
    RelaxCn,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            cfl: 0.02,
            dt_max: 1e-4,
            dt_min: 1e-12,
            blowup_ratio: 16.0,
            monitor_every: 5,
            scheme: SchemeConfig::Strang,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    pub t_end: f64,
    pub initial: InitialData,
    /// ‖ψ₀‖_{L²}/‖Q‖_{L²} for the scaled-soliton data
    pub mass_fraction: f64,
    /// h1 growth-window bounds (in multiples of h1(0)) for the blow-up fits
    pub fit_lo: f64,
    pub fit_hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum InitialData {
    /// R_λ(0) from the profile section
    BlowupProfile,
    /// c·Q((x−center)/1) with c set by `mass_fraction`
    ScaledGroundState,
    /// zero field
    Zero,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            initial: InitialData::BlowupProfile,
            mass_fraction: 0.9,
            fit_lo: 2.0,
            fit_hi: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackConfig {
    /// ε; when absent, ‖Q‖_{L²(ℝ^d)}/2 (the global-existence choice)
    pub epsilon: Option<f64>,
    /// number of random perturbed reruns
    pub perturbations: usize,
    /// perturbation size as a fraction of δ = ε/16
    pub perturbation_scale: f64,
    /// horizon of the free run after t₂ (stabilize_global)
    pub free_horizon: f64,
    /// reference provenance
    pub reference: ReferenceConfig,
    /// total horizon T for stabilize_then_null (needs t₂ < T/2)
    pub null_horizon: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceConfig {
    AnalyticRlambda,
    StoredFreeRun,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            perturbations: 8,
            perturbation_scale: 1.0,
            free_horizon: 1.0,
            reference: ReferenceConfig::AnalyticRlambda,
            null_horizon: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumConfig {
    /// modes per axis
    pub modes: Vec<usize>,
    /// control region center/radii for the spatial profile a(x)
    pub omega_center: Vec<f64>,
    pub omega_r_inner: f64,
    pub omega_r_outer: f64,
    pub t_horizon: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// ‖u₀‖_{H²,spec} for the nonlinear scenario
    pub u0_h2_norm: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// RK4 steps of the verification simulation
    pub time_steps: usize,
    /// target mode (1-based) for the linear scenario
    pub target_mode: usize,
}

impl Default for HumConfig {
    fn default() -> Self {
        Self {
            modes: vec![32],
            omega_center: vec![0.5],
            omega_r_inner: 0.05,
            omega_r_outer: 0.1,
            t_horizon: 1.0,
            cg_tol: 1e-10,
            cg_max_iter: 200,
            u0_h2_norm: 1e-2,
            picard_tol: 1e-7,
            picard_max_iter: 25,
            time_steps: 32768,
            target_mode: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<SweepAxis>,
    /// the scenario each grid point runs
    pub inner: Option<Kind>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// dotted path into the config, e.g. "profile.lambda"
    pub path: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub snapshots: bool,
    pub plots: bool,
    pub monitors_csv: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            snapshots: false,
            plots: false,
            monitors_csv: true,
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.domain.lengths.len();
        if d == 0 || d > 2 {
            bail!("domain dimension must be 1 or 2, got {d}");
        }
        if self.domain.n.len() != d {
            bail!("grid counts must match the domain dimension");
        }
        if self.domain.lengths.iter().any(|&l| l <= 0.0) {
            bail!("domain lengths must be positive");
        }
        if self.domain.n.iter().any(|&n| n < 4) {
            bail!("need at least 4 interior nodes per axis");
        }
        for p in &self.profile.points {
            if p.len() != d {
                bail!("profile point has {} coordinates in a {d}-d domain", p.len());
            }
        }
        if self.kind == Kind::StabilizeThenNull {
            let t_lambda = self.profile.horizon_coeff / (self.profile.lambda * self.profile.lambda);
            let t2 = t_lambda * (1.0 - t_lambda);
            if t2 >= 0.5 * self.feedback.null_horizon {
                bail!(
                    "stabilize_then_null requires t₂ = {t2} < T/2 = {}; raise λ or T",
                    0.5 * self.feedback.null_horizon
                );
            }
        }
        if self.kind == Kind::Sweep && self.sweep.inner.is_none() {
            bail!("sweep requires sweep.inner");
        }
        if matches!(self.sweep.inner, Some(Kind::Sweep)) {
            bail!("sweep cannot nest sweeps");
        }
        Ok(())
    }

    pub fn rect_domain(&self) -> Result<RectDomain> {
        Ok(RectDomain::new(&self.domain.lengths)?)
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.rect_domain()?, &self.domain.n)?)
    }

    pub fn points(&self) -> Vec<Point> {
        self.profile
            .points
            .iter()
            .map(|p| {
                let mut q = [0.0; 2];
                for (j, &v) in p.iter().enumerate() {
                    q[j] = v;
                }
                q
            })
            .collect()
    }

    pub fn blowup_spec(&self) -> Result<BlowupSpec> {
        let dom = self.rect_domain()?;
        let lambda = self.profile.lambda;
        let t_lambda = self.profile.horizon_coeff / (lambda * lambda);
        let points = self.points();
        let cutoffs = points
            .iter()
            .map(|&p| {
                nls_core::profile::CutoffSpec::new(
                    &dom,
                    p,
                    self.profile.r_inner,
                    self.profile.r_outer,
                )
            })
            .collect::<nls_core::Result<Vec<_>>>()?;
        Ok(BlowupSpec::new(&dom, points, lambda, t_lambda, cutoffs)?)
    }

    pub fn evolve_options(&self) -> EvolveOptions {
        EvolveOptions {
            dt_max: self.dynamics.dt_max,
            dt_min: self.dynamics.dt_min,
            cfl: self.dynamics.cfl,
            blowup_ratio: self.dynamics.blowup_ratio,
            monitor_every: self.dynamics.monitor_every,
            snapshot_every: 0,
            scheme: match self.dynamics.scheme {
                SchemeConfig::Strang => Scheme::Strang,
                SchemeConfig::RelaxCn => Scheme::RelaxCn,
            },
        }
    }

    /// Patch a dotted numeric path (used by sweeps).
    pub fn set_path(&mut self, path: &str, value: f64) -> Result<()> {
        let mut doc: toml::Value = toml::Value::try_from(&*self).context("serialize config")?;
        let mut cursor = &mut doc;
        let parts: Vec<&str> = path.split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            if i + 1 == parts.len() {
                let slot = cursor
                    .get_mut(part)
                    .with_context(|| format!("unknown config path `{path}`"))?;
                *slot = match slot {
                    toml::Value::Integer(_) => toml::Value::Integer(value as i64),
                    _ => toml::Value::Float(value),
                };
            } else {
                cursor = cursor
                    .get_mut(part)
                    .with_context(|| format!("unknown config path `{path}`"))?;
            }
        }
        *self = doc.try_into().context("re-deserialize patched config")?;
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = Config::from_toml("kind = \"free_blowup\"").unwrap();
        assert_eq!(cfg.kind, Kind::FreeBlowup);
        assert_eq!(cfg.domain.n, vec![1024]);
        let round = Config::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(round.domain.n, cfg.domain.n);
    }

    #[test]
    fn validation_catches_bad_inputs() {
        assert!(Config::from_toml("kind = \"free_blowup\"\n[domain]\nlengths=[1.0]\nn=[2]").is_err());
        assert!(Config::from_toml("kind = \"sweep\"").is_err());
        // t2 ≥ T/2 rejected for the null-control concatenation
        let text = r#"
kind = "stabilize_then_null"
[profile]
points = [[0.5]]
lambda = 1.2
horizon_coeff = 0.2
r_inner = 0.25
r_outer = 0.4
[feedback]
null_horizon = 0.25
"#;
        assert!(Config::from_toml(text).is_err());
    }

    #[test]
    fn path_patching() {
        let mut cfg = Config::from_toml("kind = \"free_blowup\"").unwrap();
        cfg.set_path("profile.lambda", 40.0).unwrap();
        assert_eq!(cfg.profile.lambda, 40.0);
        cfg.set_path("domain.n.0", 512.0).unwrap_err(); // arrays unsupported
        assert!(cfg.set_path("no.such.path", 1.0).is_err());
    }
}
