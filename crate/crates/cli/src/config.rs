//! Declarative experiment configs: one JSON document per run, tagged by
//! `mode`, so a config file is a complete, diff-able record of an
//! experiment. Command-line flags (`--seed`, `--threads`) override the
//! corresponding keys; everything else lives in the file.

use commlim::bounds::RateQuery;
use commlim::geometry::{ScoreBase, StepIndicator, SubsetSpec};
use commlim::models::ModelSpec;
use commlim::risk::{ExperimentConfig, Regressor, SweepAxis};
use commlim::{Error, Result};
use serde::{Deserialize, Serialize};

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.to_string(),
        message: message.into(),
    }
}

/// A closed interval a measured quantity must land in for the run to count
/// as passing. Failing an expectation is an exit-code-1 condition, not a
/// config error.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    fn validate(&self, path: &str) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() || self.lo > self.hi {
            return Err(config_err(path, "band needs finite lo ≤ hi"));
        }
        Ok(())
    }
}

/// Which scalar of a risk report an expectation band applies to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RiskMetric {
    SupRisk,
    /// `n · sup_risk / d²`.
    NormND2,
    /// `n · 2^k · sup_risk / d`.
    NormN2kD,
    /// `n · k · sup_risk / d²`.
    NormNkD2,
}

impl RiskMetric {
    pub fn as_str(self) -> &'static str {
        match self {
            RiskMetric::SupRisk => "sup_risk",
            RiskMetric::NormND2 => "norm_n_d2",
            RiskMetric::NormN2kD => "norm_n2k_d",
            RiskMetric::NormNkD2 => "norm_nk_d2",
        }
    }

    pub fn read(self, report: &commlim::risk::RiskReport) -> f64 {
        match self {
            RiskMetric::SupRisk => report.sup_risk,
            RiskMetric::NormND2 => report.norm_n_d2,
            RiskMetric::NormN2kD => report.norm_n2k_d,
            RiskMetric::NormNkD2 => report.norm_nk_d2,
        }
    }
}

/// Single Monte Carlo experiment; writes one row per grid point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiskConfig {
    #[serde(default)]
    pub experiment_id: Option<String>,
    #[serde(default)]
    pub threads: Option<usize>,
    /// Optional pass band checked against the finished report.
    #[serde(default)]
    pub expect: Option<RiskExpectation>,
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RiskExpectation {
    pub metric: RiskMetric,
    #[serde(flatten)]
    pub band: Band,
}

/// Sweep one axis of a base experiment and optionally fit log-risk
/// exponents.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScalingConfig {
    #[serde(default)]
    pub experiment_id: Option<String>,
    #[serde(default)]
    pub threads: Option<usize>,
    pub axis: SweepAxis,
    pub values: Vec<u64>,
    /// Regressors for the least-squares fit of `ln risk`; empty means no
    /// fit.
    #[serde(default)]
    pub regressors: Vec<Regressor>,
    /// Fit `n · sup_risk` instead of `sup_risk`. Useful when `n` is scaled
    /// along the axis, which makes the raw risk flat and moves the exponent
    /// of interest into the effective-sample-size product.
    #[serde(default)]
    pub scale_risk_by_n: bool,
    /// Pass bands on fitted coefficients, keyed by regressor.
    #[serde(default)]
    pub expect_coefficients: Vec<CoefficientExpectation>,
    #[serde(flatten)]
    pub base: ExperimentConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoefficientExpectation {
    pub regressor: Regressor,
    #[serde(flatten)]
    pub band: Band,
}

/// Check the transcript factorization identities on randomly generated
/// budget-valid trees, at every joint input of the finite sample space.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IdentitiesConfig {
    #[serde(default)]
    pub experiment_id: Option<String>,
    pub trees: usize,
    pub seed: u64,
    /// Finite-space models the sweep cycles through.
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_max_sensors")]
    pub max_sensors: usize,
    #[serde(default = "default_max_budget")]
    pub max_budget: usize,
    /// Largest tolerated identity slack.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_max_sensors() -> usize {
    3
}

fn default_max_budget() -> usize {
    2
}

fn default_tolerance() -> f64 {
    1e-9
}

fn default_chain_tolerance() -> f64 {
    1e-10
}

/// Geometric-bound verification: a list of named checks, each producing
/// slack-table rows and/or summary records.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeometryConfig {
    #[serde(default)]
    pub experiment_id: Option<String>,
    /// Negative slack beyond this tolerance counts as a violation.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub checks: Vec<GeometryCheck>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GeometryCheck {
    /// Every nonempty subset of `{±1}^d`, `d ≤ 4`.
    ExhaustiveCube {
        d: usize,
        /// Expected maximum norm² over half-cube subsets, when pinned.
        #[serde(default)]
        expect_half_norm: Option<Band>,
    },
    /// Explicit conditioning sets against every applicable bound.
    Sets {
        base: ScoreBase,
        sets: Vec<SubsetSpec>,
        #[serde(default)]
        psi2_sigma: Option<f64>,
    },
    /// Gaussian half-lines `{x₁ ≥ t}` on an even grid of thresholds.
    HalflineGrid { from: f64, to: f64, points: usize },
    /// Hamming-ball radius sweep; reports the best ratio against the
    /// `2·ln(1/P)` bound and fails below `min_ratio`.
    CapSweep {
        d: usize,
        #[serde(default)]
        min_ratio: Option<f64>,
    },
    /// Central-limit lift of a step indicator at the given orders; fails if
    /// a relative gap exceeds `max_rel_gap` or the gaps fail to shrink.
    TensorLift {
        indicator: StepIndicator,
        lift_orders: Vec<usize>,
        #[serde(default)]
        max_rel_gap: Option<f64>,
        #[serde(default)]
        require_decreasing: bool,
    },
}

/// Exact information-chain checks (`0 ≤ I ≤ D̄ ≤ UB`) on random
/// (tree, hypothesis-cube) instances.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleConfig {
    #[serde(default)]
    pub experiment_id: Option<String>,
    pub instances: usize,
    pub seed: u64,
    pub models: Vec<ModelSpec>,
    /// Cube half-widths the instances cycle through.
    pub deltas: Vec<f64>,
    #[serde(default = "default_max_sensors")]
    pub max_sensors: usize,
    #[serde(default = "default_max_budget")]
    pub max_budget: usize,
    #[serde(default = "default_chain_tolerance")]
    pub tolerance: f64,
}

/// Closed-form lower-rate evaluation plus optional numeric-utility
/// self-checks.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundsConfig {
    #[serde(default)]
    pub experiment_id: Option<String>,
    #[serde(default)]
    pub queries: Vec<RateQuery>,
    /// Also run the frozen utility checks (entropy inverse round-trip,
    /// envelope, Chernoff domination, ball-volume decay, ψ₂ constants).
    #[serde(default)]
    pub utility_checks: bool,
}

/// The one-document experiment description every subcommand consumes.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Config {
    Risk(RiskConfig),
    Scaling(ScalingConfig),
    VerifyProtocolIdentities(IdentitiesConfig),
    VerifyGeometry(GeometryConfig),
    Oracle(OracleConfig),
    Bounds(BoundsConfig),
}

impl Config {
    pub fn mode(&self) -> &'static str {
        match self {
            Config::Risk(_) => "risk",
            Config::Scaling(_) => "scaling",
            Config::VerifyProtocolIdentities(_) => "verify-protocol-identities",
            Config::VerifyGeometry(_) => "verify-geometry",
            Config::Oracle(_) => "oracle",
            Config::Bounds(_) => "bounds",
        }
    }

    pub fn experiment_id(&self) -> Option<&str> {
        match self {
            Config::Risk(c) => c.experiment_id.as_deref(),
            Config::Scaling(c) => c.experiment_id.as_deref(),
            Config::VerifyProtocolIdentities(c) => c.experiment_id.as_deref(),
            Config::VerifyGeometry(c) => c.experiment_id.as_deref(),
            Config::Oracle(c) => c.experiment_id.as_deref(),
            Config::Bounds(c) => c.experiment_id.as_deref(),
        }
    }

    pub fn threads(&self) -> Option<usize> {
        match self {
            Config::Risk(c) => c.threads,
            Config::Scaling(c) => c.threads,
            _ => None,
        }
    }

    /// The seed recorded in the manifest, when the mode consumes one.
    pub fn seed(&self) -> Option<u64> {
        match self {
            Config::Risk(c) => Some(c.experiment.seed),
            Config::Scaling(c) => Some(c.base.seed),
            Config::VerifyProtocolIdentities(c) => Some(c.seed),
            Config::Oracle(c) => Some(c.seed),
            Config::VerifyGeometry(_) | Config::Bounds(_) => None,
        }
    }

    /// Applies a `--seed` override; errors on seedless modes so a run never
    /// silently ignores a reproducibility knob.
    pub fn override_seed(&mut self, seed: u64) -> Result<()> {
        match self {
            Config::Risk(c) => c.experiment.seed = seed,
            Config::Scaling(c) => c.base.seed = seed,
            Config::VerifyProtocolIdentities(c) => c.seed = seed,
            Config::Oracle(c) => c.seed = seed,
            Config::VerifyGeometry(_) | Config::Bounds(_) => {
                return Err(config_err(
                    "--seed",
                    format!("mode `{}` is deterministic and takes no seed", self.mode()),
                ));
            }
        }
        Ok(())
    }

    /// Full schema validation with the failing key path in the error.
    pub fn validate(&self) -> Result<()> {
        if let Some(id) = self.experiment_id() {
            if id.is_empty() || id.contains(['/', '\\']) {
                return Err(config_err(
                    "experiment_id",
                    "must be a nonempty name without path separators",
                ));
            }
        }
        match self {
            Config::Risk(c) => {
                validate_experiment(&c.experiment)?;
                if let Some(e) = &c.expect {
                    e.band.validate("expect")?;
                }
                Ok(())
            }
            Config::Scaling(c) => {
                validate_experiment(&c.base)?;
                if c.values.is_empty() {
                    return Err(config_err("values", "sweep needs at least one axis value"));
                }
                if c.values.iter().any(|&v| v == 0) {
                    return Err(config_err("values", "axis values must be positive"));
                }
                if !c.regressors.is_empty() {
                    let needed = c.regressors.len() + 1;
                    if c.values.len() < 3.max(needed) {
                        return Err(config_err(
                            "values",
                            format!(
                                "fitting {} regressors needs at least {} sweep points, got {}",
                                c.regressors.len(),
                                3.max(needed),
                                c.values.len()
                            ),
                        ));
                    }
                }
                for (i, e) in c.expect_coefficients.iter().enumerate() {
                    if !c.regressors.contains(&e.regressor) {
                        return Err(config_err(
                            &format!("expect_coefficients[{i}].regressor"),
                            "expectation names a regressor that is not being fitted",
                        ));
                    }
                    e.band.validate(&format!("expect_coefficients[{i}]"))?;
                }
                Ok(())
            }
            Config::VerifyProtocolIdentities(c) => {
                if c.trees == 0 {
                    return Err(config_err("trees", "need at least one tree"));
                }
                validate_instance_shape(c.max_sensors, c.max_budget, c.tolerance, &c.models)
            }
            Config::VerifyGeometry(c) => {
                if !(c.tolerance > 0.0) {
                    return Err(config_err("tolerance", "tolerance must be positive"));
                }
                if c.checks.is_empty() {
                    return Err(config_err("checks", "need at least one check"));
                }
                for (i, check) in c.checks.iter().enumerate() {
                    validate_geometry_check(check, i)?;
                }
                Ok(())
            }
            Config::Oracle(c) => {
                if c.instances == 0 {
                    return Err(config_err("instances", "need at least one instance"));
                }
                if c.deltas.is_empty() {
                    return Err(config_err("deltas", "need at least one cube half-width"));
                }
                for (i, &delta) in c.deltas.iter().enumerate() {
                    if !(delta > 0.0 && delta.is_finite()) {
                        return Err(config_err(
                            &format!("deltas[{i}]"),
                            format!("half-width must be positive and finite, got {delta}"),
                        ));
                    }
                }
                validate_instance_shape(c.max_sensors, c.max_budget, c.tolerance, &c.models)
            }
            Config::Bounds(c) => {
                if c.queries.is_empty() && !c.utility_checks {
                    return Err(config_err(
                        "queries",
                        "bounds config needs rate queries or utility_checks: true",
                    ));
                }
                for (i, q) in c.queries.iter().enumerate() {
                    if q.n == 0 {
                        return Err(config_err(&format!("queries[{i}].n"), "n must be ≥ 1"));
                    }
                    if q.d == 0 {
                        return Err(config_err(&format!("queries[{i}].d"), "d must be ≥ 1"));
                    }
                    if q.k == 0 {
                        return Err(config_err(&format!("queries[{i}].k"), "k must be ≥ 1"));
                    }
                    validate_rate_params(q, i)?;
                }
                Ok(())
            }
        }
    }
}

/// Parameters each rate statement consumes beyond (n, d, k).
fn validate_rate_params(q: &RateQuery, i: usize) -> Result<()> {
    use commlim::bounds::RateStatement as S;
    let need = |field: &str, present: bool| -> Result<()> {
        if present {
            Ok(())
        } else {
            Err(config_err(
                &format!("queries[{i}].{field}"),
                format!("statement `{}` needs `{field}`", q.statement.name()),
            ))
        }
    };
    let pos = |field: &str, value: Option<f64>| -> Result<()> {
        need(field, value.is_some())?;
        if value.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err(config_err(
                &format!("queries[{i}].{field}"),
                "must be positive and finite",
            ));
        }
        Ok(())
    };
    match q.statement {
        S::General => pos("i0", q.i0),
        S::SubGaussian | S::GaussianLocation => pos("sigma2", q.sigma2),
        S::SparseGaussian => {
            pos("sigma2", q.sigma2)?;
            need("s", q.s.is_some())?;
            if q.s == Some(0) {
                return Err(config_err(&format!("queries[{i}].s"), "s must be ≥ 1"));
            }
            Ok(())
        }
        S::Multinomial | S::BernoulliCube | S::BernoulliSimplex => Ok(()),
    }
}

/// Names the scalar keys (`k`, `n`, `replications`) before delegating the
/// joint checks (protocol preconditions, grid admissibility) to the core
/// validator.
fn validate_experiment(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.k == 0 {
        return Err(config_err("k", "k must be ≥ 1 (bits per sensor)"));
    }
    if cfg.n == 0 {
        return Err(config_err("n", "n must be ≥ 1 (number of sensors)"));
    }
    if cfg.replications < 2 {
        return Err(config_err(
            "replications",
            format!(
                "replications must be ≥ 2 to form a standard error, got {}",
                cfg.replications
            ),
        ));
    }
    cfg.validate().map_err(|e| Error::Config {
        path: "model/protocol/grid".to_string(),
        message: e.to_string(),
    })
}

fn validate_instance_shape(
    max_sensors: usize,
    max_budget: usize,
    tolerance: f64,
    models: &[ModelSpec],
) -> Result<()> {
    if !(1..=4).contains(&max_sensors) {
        return Err(config_err(
            "max_sensors",
            "random instances support 1..=4 sensors (joint enumeration blows up beyond)",
        ));
    }
    if !(1..=3).contains(&max_budget) {
        return Err(config_err(
            "max_budget",
            "random instances support per-sensor budgets 1..=3",
        ));
    }
    if !(tolerance > 0.0) {
        return Err(config_err("tolerance", "tolerance must be positive"));
    }
    if models.is_empty() {
        return Err(config_err("models", "need at least one model"));
    }
    for (i, m) in models.iter().enumerate() {
        let path = format!("models[{i}]");
        m.check_admissible(&m.theta0)
            .map_err(|e| config_err(&path, e.to_string()))?;
        if m.space_size().is_none() {
            return Err(config_err(
                &path,
                "exact enumeration needs a finite per-sensor sample space",
            ));
        }
    }
    Ok(())
}

fn validate_geometry_check(check: &GeometryCheck, i: usize) -> Result<()> {
    let path = |key: &str| format!("checks[{i}].{key}");
    match check {
        GeometryCheck::ExhaustiveCube {
            d,
            expect_half_norm,
        } => {
            if !(1..=4).contains(d) {
                return Err(config_err(
                    &path("d"),
                    "exhaustive subset scan supports d in 1..=4",
                ));
            }
            if let Some(band) = expect_half_norm {
                band.validate(&path("expect_half_norm"))?;
            }
        }
        GeometryCheck::Sets { base, sets, .. } => {
            if sets.is_empty() {
                return Err(config_err(&path("sets"), "need at least one set"));
            }
            if base.dim() == 0 {
                return Err(config_err(&path("base"), "dimension must be positive"));
            }
            if let ScoreBase::Model(m) = base {
                m.check_admissible(&m.theta0)
                    .map_err(|e| config_err(&path("base"), e.to_string()))?;
            }
        }
        GeometryCheck::HalflineGrid { from, to, points } => {
            if !(from.is_finite() && to.is_finite() && from <= to) {
                return Err(config_err(
                    &path("from"),
                    "grid needs finite from ≤ to",
                ));
            }
            if *points < 2 {
                return Err(config_err(&path("points"), "grid needs at least 2 points"));
            }
        }
        GeometryCheck::CapSweep { d, min_ratio } => {
            if *d < 3 {
                return Err(config_err(
                    &path("d"),
                    "radius sweep needs d ≥ 3 so some radius t ≥ 1 satisfies 2t < d",
                ));
            }
            if let Some(r) = min_ratio {
                if !(*r > 0.0 && *r <= 1.0) {
                    return Err(config_err(&path("min_ratio"), "min_ratio must be in (0, 1]"));
                }
            }
        }
        GeometryCheck::TensorLift {
            lift_orders,
            max_rel_gap,
            ..
        } => {
            if lift_orders.is_empty() {
                return Err(config_err(&path("lift_orders"), "need at least one order"));
            }
            if lift_orders.iter().any(|&b| b == 0 || b > 20) {
                return Err(config_err(
                    &path("lift_orders"),
                    "lift orders must be in 1..=20",
                ));
            }
            if let Some(g) = max_rel_gap {
                if !(*g > 0.0) {
                    return Err(config_err(&path("max_rel_gap"), "gap bound must be positive"));
                }
            }
        }
    }
    Ok(())
}
