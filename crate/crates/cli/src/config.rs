//! JSON problem configuration: schema types and conversion into a built
//! problem quadruple.

use pepcert::builder::{InitKind, InitialCondition, PerformanceMetric};
use pepcert::classes::FunctionClassSpec;
use pepcert::methods::{self, CoefficientTable, MethodSpec};
use pepcert::rat::{parse_decimal, Rat};
use pepcert::sdp::SolverOptions;
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("invalid number {0:?}")]
    BadNumber(String),
    #[error("unknown method {0:?}")]
    UnknownMethod(String),
    #[error("method {0:?} requires field {1:?}")]
    MissingField(&'static str, &'static str),
    #[error("method {0:?} requires a finite L")]
    NeedsFiniteL(&'static str),
    #[error("unknown metric kind {0:?}")]
    UnknownMetric(String),
    #[error("unknown init kind {0:?}")]
    UnknownInit(String),
    #[error("iterate index {0} exceeds the horizon T = {1}")]
    IterateOutOfRange(usize, usize),
    #[error(transparent)]
    Method(#[from] pepcert::methods::MethodError),
    #[error(transparent)]
    Class(#[from] pepcert::classes::ClassError),
    #[error(transparent)]
    Build(#[from] pepcert::builder::BuildError),
}

/// A rational given either as a JSON number or as a string
/// (decimal, scientific, or `"p/q"`); `"inf"` is accepted where noted.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Number(serde_json::Number),
    Text(String),
}

impl Num {
    fn as_rat(&self) -> Result<Rat, ConfigError> {
        let s = match self {
            Num::Number(n) => n.to_string(),
            Num::Text(s) => s.clone(),
        };
        parse_decimal(&s).ok_or(ConfigError::BadNumber(s))
    }

    fn as_l(&self) -> Result<Option<Rat>, ConfigError> {
        if let Num::Text(s) = self {
            if s == "inf" {
                return Ok(None);
            }
        }
        self.as_rat().map(Some)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub class: ClassCfg,
    pub method: MethodCfg,
    #[serde(rename = "T")]
    pub t: usize,
    pub metric: MetricCfg,
    pub init: InitCfg,
    #[serde(default)]
    pub solver: SolverCfg,
    #[serde(default)]
    pub analyses: AnalysesCfg,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassCfg {
    pub mu: Num,
    #[serde(rename = "L")]
    pub l: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodCfg {
    pub name: String,
    /// Step size for `gd`.
    pub step: Option<Num>,
    /// Coefficient table for `explicit` (row `t` holds
    /// `gamma_0^{(t)} .. gamma_{t-1}^{(t)}`).
    pub table: Option<Vec<Vec<Num>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricCfg {
    /// One of `fval-gap`, `dist-sq`, `grad-norm-sq`, `min-grad-norm-sq`.
    pub kind: String,
    /// Iterate number the metric is taken at (default: `T`).
    pub at: Option<usize>,
    /// Iterate numbers for `min-grad-norm-sq` (default: `0..=T`).
    pub over: Option<Vec<usize>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitCfg {
    /// One of `dist-sq`, `fval-gap`.
    pub kind: String,
    #[serde(rename = "R")]
    pub r: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverCfg {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_tol() -> f64 {
    1e-8
}

fn default_max_iter() -> usize {
    100
}

impl Default for SolverCfg {
    fn default() -> Self {
        SolverCfg {
            tol: default_tol(),
            max_iter: default_max_iter(),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysesCfg {
    pub certificate: bool,
    pub proof: bool,
    pub lyapunov: bool,
    pub quadratic: bool,
    #[serde(rename = "worst-case-instance")]
    pub worst_case_instance: bool,
    #[serde(rename = "backtracking-report")]
    pub backtracking_report: bool,
}

impl Default for AnalysesCfg {
    fn default() -> Self {
        AnalysesCfg {
            certificate: true,
            proof: true,
            lyapunov: false,
            quadratic: false,
            worst_case_instance: false,
            backtracking_report: false,
        }
    }
}

/// The built problem quadruple plus solver options.
pub struct ResolvedConfig {
    pub problem: pepcert::builder::PepProblem,
    pub options: SolverOptions,
}

pub fn resolve(cfg: &ProblemConfig) -> Result<ResolvedConfig, ConfigError> {
    let mu = cfg.class.mu.as_rat()?;
    let l = cfg.class.l.as_l()?;
    let class = FunctionClassSpec::new(mu, l.clone())?;

    let need_l = |name: &'static str| l.clone().ok_or(ConfigError::NeedsFiniteL(name));
    let method: MethodSpec = match cfg.method.name.as_str() {
        "gd" => {
            let step = cfg
                .method
                .step
                .as_ref()
                .ok_or(ConfigError::MissingField("gd", "step"))?
                .as_rat()?;
            methods::gd(step, cfg.t)
        }
        "nag" => methods::nag(&need_l("nag")?, cfg.t),
        "hb-qg" => methods::heavy_ball_qg(&need_l("hb-qg")?, cfg.t),
        "gdls" => methods::gdls(cfg.t),
        "gfom" => methods::gfom(cfg.t),
        "identity" => methods::identity(cfg.t),
        "explicit" => {
            let rows = cfg
                .method
                .table
                .as_ref()
                .ok_or(ConfigError::MissingField("explicit", "table"))?;
            let mut gamma = Vec::with_capacity(rows.len());
            for row in rows {
                gamma.push(row.iter().map(Num::as_rat).collect::<Result<Vec<_>, _>>()?);
            }
            methods::explicit_method(CoefficientTable::new(gamma)?)?
        }
        other => return Err(ConfigError::UnknownMethod(other.into())),
    };

    // Metric indices in the config count iterates x_0 .. x_T; translate to
    // method point indices.
    let iterate = |t: usize| -> Result<usize, ConfigError> {
        method
            .iterates
            .get(t)
            .copied()
            .ok_or(ConfigError::IterateOutOfRange(t, method.t))
    };
    let at = iterate(cfg.metric.at.unwrap_or(cfg.t))?;
    let metric = match cfg.metric.kind.as_str() {
        "fval-gap" => PerformanceMetric::FunctionValueGap { at },
        "dist-sq" => PerformanceMetric::DistanceSquared { at },
        "grad-norm-sq" => PerformanceMetric::GradientNormSquared { at },
        "min-grad-norm-sq" => {
            let over = match &cfg.metric.over {
                Some(ts) => ts.iter().map(|&t| iterate(t)).collect::<Result<_, _>>()?,
                None => method.iterates.clone(),
            };
            PerformanceMetric::MinGradientNormSquared { over }
        }
        other => return Err(ConfigError::UnknownMetric(other.into())),
    };

    let kind = match cfg.init.kind.as_str() {
        "dist-sq" => InitKind::DistanceSquared,
        "fval-gap" => InitKind::FunctionValueGap,
        other => return Err(ConfigError::UnknownInit(other.into())),
    };
    let init = InitialCondition::new(kind, cfg.init.r.as_rat()?)?;

    let problem = pepcert::builder::build(&class, &method, &metric, &init)?;
    Ok(ResolvedConfig {
        problem,
        options: SolverOptions {
            tol: cfg.solver.tol,
            max_iter: cfg.solver.max_iter,
        },
    })
}
