//! TOML experiment configuration.
//!
//! Loading checks, in order: that required keys are present, that no unknown
//! key appears anywhere, that values have the right types, and finally every
//! cross-module precondition. Each stage reports all offending keys at once.

use std::path::PathBuf;

use dynwave::geometry::{ConvexBody, DomainSpec, RadialProfile};
use serde::{Deserialize, Serialize};

use crate::defaults as def;
use crate::error::{CliError, Issue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "seed")]
    pub seed: u64,
    #[serde(default = "output")]
    pub output: PathBuf,
    pub domain: DomainConfig,
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub weights: WeightSection,
    #[serde(default)]
    pub counterexample: CounterexampleSection,
    #[serde(default)]
    pub carleman: CarlemanSection,
    #[serde(default)]
    pub inverse: InverseSection,
    #[serde(default)]
    pub observability: ObservabilitySection,
}

fn seed() -> u64 {
    def::SEED
}

fn output() -> PathBuf {
    def::OUTPUT.into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BodyKind {
    Ball,
    Ellipsoid,
    Profile,
}

/// Inner obstacle. `radius` goes with `ball`, `semi_axes` with `ellipsoid`,
/// `radii` (equispaced boundary radii of a planar body) with `profile`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyConfig {
    pub kind: BodyKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub semi_axes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainConfig {
    pub dim: usize,
    pub outer_radius: f64,
    pub body: BodyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientConfig {
    pub d: f64,
    pub delta: f64,
    #[serde(default)]
    pub q: f64,
    #[serde(default)]
    pub q_gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSection {
    pub nr: usize,
    pub ntheta: usize,
    pub cfl_safety: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            nr: def::NR,
            ntheta: def::NTHETA,
            cfl_safety: def::CFL_SAFETY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifySection {
    pub bulk_samples: usize,
    pub boundary_samples: usize,
    pub t_factor: f64,
}

impl Default for CertifySection {
    fn default() -> Self {
        Self {
            bulk_samples: def::BULK_SAMPLES,
            boundary_samples: def::BOUNDARY_SAMPLES,
            t_factor: def::CERTIFY_T_FACTOR,
        }
    }
}

/// `beta` and `c1` are chosen automatically when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeightSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
    pub c1_margin: f64,
    pub lambda: f64,
    pub s: f64,
}

impl Default for WeightSection {
    fn default() -> Self {
        Self {
            beta: None,
            c1: None,
            c1_margin: def::C1_MARGIN,
            lambda: def::LAMBDA,
            s: def::S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CounterexampleSection {
    pub theta: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub points: usize,
}

impl Default for CounterexampleSection {
    fn default() -> Self {
        Self {
            theta: def::CE_THETA,
            phi_min: def::CE_PHI_MIN,
            phi_max: def::CE_PHI_MAX,
            points: def::CE_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CarlemanSection {
    pub t_factor: f64,
    pub s_values: Vec<f64>,
    pub lambda_values: Vec<f64>,
    pub off_center: [f64; 2],
}

impl Default for CarlemanSection {
    fn default() -> Self {
        Self {
            t_factor: def::CARLEMAN_T_FACTOR,
            s_values: def::S_VALUES.to_vec(),
            lambda_values: def::LAMBDA_VALUES.to_vec(),
            off_center: def::OFF_CENTER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InverseSection {
    pub t_factor: f64,
    pub alpha: f64,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Relative noise level added to the synthetic measurement.
    pub noise: f64,
    pub c0: f64,
    pub lipschitz_samples: usize,
}

impl Default for InverseSection {
    fn default() -> Self {
        Self {
            t_factor: def::INVERSE_T_FACTOR,
            alpha: def::ALPHA,
            cg_tol: def::CG_TOL,
            cg_max_iters: def::CG_MAX_ITERS,
            noise: def::NOISE,
            c0: def::C0,
            lipschitz_samples: def::LIPSCHITZ_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ObservabilitySection {
    /// Window lengths as multiples of `2T*`.
    pub factors: Vec<f64>,
    pub power_tol: f64,
    pub max_power_iters: usize,
    pub inner_tol: f64,
    pub max_inner_iters: usize,
    pub filter_modes: usize,
    pub hum: bool,
    pub hum_factor: f64,
    pub hum_tol: f64,
    pub hum_max_iters: usize,
}

impl Default for ObservabilitySection {
    fn default() -> Self {
        Self {
            factors: def::OBS_FACTORS.to_vec(),
            power_tol: def::POWER_TOL,
            max_power_iters: def::MAX_POWER_ITERS,
            inner_tol: def::INNER_TOL,
            max_inner_iters: def::MAX_INNER_ITERS,
            filter_modes: def::FILTER_MODES,
            hum: def::HUM,
            hum_factor: def::HUM_FACTOR,
            hum_tol: def::HUM_TOL,
            hum_max_iters: def::HUM_MAX_ITERS,
        }
    }
}

const REQUIRED: [&str; 8] = [
    "domain",
    "domain.dim",
    "domain.outer_radius",
    "domain.body",
    "domain.body.kind",
    "coefficients",
    "coefficients.d",
    "coefficients.delta",
];

/// Experiments that discretize the annulus need a centered ball in 1D or 2D.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Needs {
    Geometry,
    Solver,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            CliError::Validation(vec![Issue::new("<document>", e.message())])
        })?;

        let missing: Vec<Issue> = REQUIRED
            .iter()
            .filter(|path| lookup(&table, path).is_none())
            .map(|path| Issue::new(*path, "required key is missing"))
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Validation(missing));
        }

        let mut unknown = Vec::new();
        let parsed: Result<Self, _> =
            serde_ignored::deserialize(toml::Value::Table(table), |path| unknown.push(path.to_string()));
        if !unknown.is_empty() {
            return Err(CliError::Validation(
                unknown.into_iter().map(|k| Issue::new(k, "unknown key")).collect(),
            ));
        }
        let config = parsed.map_err(|e| CliError::Validation(vec![Issue::new("<document>", e.to_string())]))?;
        let issues = config.issues();
        if issues.is_empty() {
            Ok(config)
        } else {
            Err(CliError::Validation(issues))
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Value-level checks shared by every subcommand.
    pub fn issues(&self) -> Vec<Issue> {
        let mut out = Vec::new();
        let mut check = |ok: bool, key: &str, msg: String| {
            if !ok {
                out.push(Issue::new(key, msg));
            }
        };
        let pos = |v: f64| v.is_finite() && v > 0.0;
        let dom = &self.domain;
        check((1..=3).contains(&dom.dim), "domain.dim", format!("must be 1, 2 or 3, got {}", dom.dim));
        check(pos(dom.outer_radius), "domain.outer_radius", "must be positive".into());
        let body = &dom.body;
        let (wanted, stray): (&str, Vec<(&str, bool)>) = match body.kind {
            BodyKind::Ball => ("radius", vec![("semi_axes", body.semi_axes.is_some()), ("radii", body.radii.is_some())]),
            BodyKind::Ellipsoid => ("semi_axes", vec![("radius", body.radius.is_some()), ("radii", body.radii.is_some())]),
            BodyKind::Profile => ("radii", vec![("radius", body.radius.is_some()), ("semi_axes", body.semi_axes.is_some())]),
        };
        let present = match body.kind {
            BodyKind::Ball => body.radius.is_some(),
            BodyKind::Ellipsoid => body.semi_axes.is_some(),
            BodyKind::Profile => body.radii.is_some(),
        };
        check(present, &format!("domain.body.{wanted}"), format!("required for kind = {:?}", body.kind).to_lowercase());
        for (key, is_set) in stray {
            check(!is_set, &format!("domain.body.{key}"), format!("not used by kind = {:?}", body.kind).to_lowercase());
        }
        if let Some(axes) = &body.semi_axes {
            check(axes.len() == dom.dim, "domain.body.semi_axes", format!("needs {} entries", dom.dim));
        }
        if body.kind == BodyKind::Profile {
            check(dom.dim == 2, "domain.dim", "a profile body is planar".into());
        }
        if present && out.is_empty() {
            if let Err(e) = self.domain_spec() {
                out.push(Issue::new("domain", e.to_string()));
            }
        }

        let mut check = |ok: bool, key: &str, msg: &str| {
            if !ok {
                out.push(Issue::new(key, msg));
            }
        };
        let c = &self.coefficients;
        check(pos(c.d), "coefficients.d", "must be positive");
        check(pos(c.delta), "coefficients.delta", "must be positive");
        check(c.q.is_finite(), "coefficients.q", "must be finite");
        check(c.q_gamma.is_finite(), "coefficients.q_gamma", "must be finite");
        if dom.dim >= 2 {
            check(c.delta > c.d, "coefficients.delta", "must exceed coefficients.d");
        }

        let g = &self.grid;
        check(g.nr >= 4, "grid.nr", "must be at least 4");
        check(dom.dim != 2 || g.ntheta >= 8, "grid.ntheta", "must be at least 8 in 2D");
        check(g.cfl_safety > 0.0 && g.cfl_safety <= 1.0, "grid.cfl_safety", "must lie in (0, 1]");

        let cs = &self.certify;
        check(cs.bulk_samples >= 4, "certify.bulk_samples", "must be at least 4");
        check(cs.boundary_samples >= 4, "certify.boundary_samples", "must be at least 4");
        check(pos(cs.t_factor), "certify.t_factor", "must be positive");

        let w = &self.weights;
        check(w.beta.is_none_or(pos), "weights.beta", "must be positive");
        check(w.c1.is_none_or(|v| v.is_finite()), "weights.c1", "must be finite");
        check(w.c1_margin.is_finite() && w.c1_margin > 0.0, "weights.c1_margin", "must be positive");
        check(w.lambda >= 1.0, "weights.lambda", "must be at least 1");
        check(w.s >= 1.0, "weights.s", "must be at least 1");

        let ce = &self.counterexample;
        check(ce.theta.is_finite(), "counterexample.theta", "must be finite");
        check(
            ce.phi_min > 0.0 && ce.phi_min < ce.phi_max && ce.phi_max < std::f64::consts::PI,
            "counterexample.phi_min",
            "need 0 < phi_min < phi_max < pi",
        );
        check(ce.points >= 2, "counterexample.points", "must be at least 2");

        let cm = &self.carleman;
        check(cm.t_factor > 1.0, "carleman.t_factor", "must exceed 1 so that the beta window is non-empty");
        check(!cm.s_values.is_empty() && cm.s_values.iter().all(|&s| s >= 1.0), "carleman.s_values", "need a non-empty list of values >= 1");
        check(
            !cm.lambda_values.is_empty() && cm.lambda_values.iter().all(|&l| l >= 1.0),
            "carleman.lambda_values",
            "need a non-empty list of values >= 1",
        );

        let inv = &self.inverse;
        check(pos(inv.t_factor), "inverse.t_factor", "must be positive");
        check(inv.alpha >= 0.0, "inverse.alpha", "must be nonnegative");
        check(pos(inv.cg_tol), "inverse.cg_tol", "must be positive");
        check(inv.cg_max_iters > 0, "inverse.cg_max_iters", "must be positive");
        check(inv.noise >= 0.0 && inv.noise.is_finite(), "inverse.noise", "must be nonnegative");
        check(pos(inv.c0), "inverse.c0", "must be positive");
        check(inv.lipschitz_samples > 0, "inverse.lipschitz_samples", "must be positive");

        let ob = &self.observability;
        check(!ob.factors.is_empty() && ob.factors.iter().all(|&f| pos(f)), "observability.factors", "need a non-empty list of positive values");
        check(pos(ob.power_tol), "observability.power_tol", "must be positive");
        check(ob.max_power_iters > 0, "observability.max_power_iters", "must be positive");
        check(pos(ob.inner_tol), "observability.inner_tol", "must be positive");
        check(ob.max_inner_iters > 0, "observability.max_inner_iters", "must be positive");
        check(pos(ob.hum_factor), "observability.hum_factor", "must be positive");
        check(pos(ob.hum_tol), "observability.hum_tol", "must be positive");
        check(ob.hum_max_iters > 0, "observability.hum_max_iters", "must be positive");
        out
    }

    /// Preconditions specific to a family of subcommands.
    pub fn require(&self, needs: Needs) -> Result<(), CliError> {
        if needs == Needs::Solver {
            let mut issues = Vec::new();
            if self.domain.dim > 2 {
                issues.push(Issue::new("domain.dim", "the solver supports 1D and 2D only"));
            }
            if self.domain.body.kind != BodyKind::Ball {
                issues.push(Issue::new("domain.body.kind", "the solver discretizes a centered ball as the hole"));
            }
            if !issues.is_empty() {
                return Err(CliError::Validation(issues));
            }
        }
        Ok(())
    }

    pub fn body(&self) -> dynwave::Result<ConvexBody> {
        let b = &self.domain.body;
        match b.kind {
            BodyKind::Ball => ConvexBody::ball(self.domain.dim, b.radius.unwrap_or(f64::NAN)),
            BodyKind::Ellipsoid => ConvexBody::ellipsoid(b.semi_axes.clone().unwrap_or_default()),
            BodyKind::Profile => Ok(ConvexBody::RadialProfile(RadialProfile::new(b.radii.clone().unwrap_or_default())?)),
        }
    }

    pub fn domain_spec(&self) -> dynwave::Result<DomainSpec> {
        DomainSpec::new(self.body()?, self.domain.outer_radius)
    }

    /// Inner radius of the solver annulus.
    pub fn r1(&self) -> f64 {
        self.domain.body.radius.unwrap_or(f64::NAN)
    }
}

fn lookup<'a>(table: &'a toml::Table, path: &str) -> Option<&'a toml::Value> {
    let mut parts = path.split('.');
    let mut cur = table.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}
