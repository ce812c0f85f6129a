//! The audit configuration document and its resolution into outcome space,
//! properties, losses and metric quantities. Resolution needs no data, so
//! every naming mistake surfaces before the input file is opened.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use calib_atlas::losses::{make_simple_loss, pinball_loss, squared_loss, zero_one_loss, LossFn};
use calib_atlas::outcomes::OutcomeSpace;
use calib_atlas::properties::{make_standard_property, Property, PropertyValue, StandardKind};
use calib_atlas::verify::{Quantity, Reduction};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub input: InputSpec,
    pub outcome_space: SpaceSpec,
    pub predictions: Vec<PredictionDecl>,
    #[serde(default)]
    pub properties: Vec<PropertySpec>,
    #[serde(default)]
    pub losses: Vec<LossSpec>,
    pub metrics: Vec<MetricSpec>,
    #[serde(default)]
    pub groups: Vec<String>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    #[serde(default = "default_aggregation")]
    pub aggregation: String,
    #[serde(default)]
    pub seed: u64,
}

fn default_aggregation() -> String {
    "sup".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    /// Relative paths are resolved against the configuration file's directory.
    pub path: String,
    pub format: Format,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub labels: Vec<String>,
    #[serde(default)]
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictionKind {
    Dist,
    Real,
    Token,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionDecl {
    pub name: String,
    pub kind: PredictionKind,
    /// Defaults to `p_<label>` per outcome for `dist`, else the prediction name.
    #[serde(default)]
    pub columns: Option<Vec<String>>,
}

impl PredictionDecl {
    pub fn column_names(&self, space: &OutcomeSpace) -> Vec<String> {
        match (&self.columns, self.kind) {
            (Some(c), _) => c.clone(),
            (None, PredictionKind::Dist) => space.labels().iter().map(|l| format!("p_{l}")).collect(),
            (None, _) => vec![self.name.clone()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PropertySpec {
    pub name: String,
    /// `mean`, `quantile`, `mode`, `ranking`, `variance`, `cvar`, `ratio`,
    /// `simple_binary` or `full_distribution`.
    pub kind: String,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
    #[serde(default)]
    pub g: Option<Vec<f64>>,
    #[serde(default)]
    pub h: Option<Vec<f64>>,
    #[serde(default)]
    pub h_bounds: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, try_from = "serde_json::Value")]
pub enum GridValue {
    Real(f64),
    Token(String),
}

// Untagged derives cannot see numbers under serde_json's arbitrary precision
// mode, so the scalar unions go through `Value`.
fn number_or_string(v: &serde_json::Value, what: &str) -> Result<Result<f64, String>, String> {
    match v {
        serde_json::Value::Number(n) => n.as_f64().map(Ok).ok_or_else(|| format!("{what} {n} is not a finite number")),
        serde_json::Value::String(s) => Ok(Err(s.clone())),
        other => Err(format!("{what} must be a number or a string, found {other}")),
    }
}

impl TryFrom<serde_json::Value> for GridValue {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, String> {
        Ok(number_or_string(&v, "grid value")?.map_or_else(GridValue::Token, GridValue::Real))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Uniform { from: f64, to: f64, points: usize },
    Values(Vec<GridValue>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSpec {
    pub name: String,
    /// `squared`, `pinball`, `zero_one` or `simple`.
    pub kind: String,
    #[serde(default)]
    pub scale: Option<f64>,
    #[serde(default)]
    pub tau: Option<f64>,
    #[serde(default)]
    pub q: Option<f64>,
    /// Decision grid. Real-valued losses default to 101 evenly spaced points
    /// across the embedding's range together with the embedding values.
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Vanilla,
    Distribution,
    Gamma,
    Swap,
    Decision,
    Bre,
    BayesRisk,
    RealizedLoss,
    CostGap,
    RobustSwap,
}

impl MetricKind {
    pub fn token(&self) -> &'static str {
        match self {
            MetricKind::Vanilla => "vanilla",
            MetricKind::Distribution => "distribution",
            MetricKind::Gamma => "gamma",
            MetricKind::Swap => "swap",
            MetricKind::Decision => "decision",
            MetricKind::Bre => "bre",
            MetricKind::BayesRisk => "bayes_risk",
            MetricKind::RealizedLoss => "realized_loss",
            MetricKind::CostGap => "cost_gap",
            MetricKind::RobustSwap => "robust_swap",
        }
    }

    fn has_levels(&self) -> bool {
        matches!(
            self,
            MetricKind::Vanilla | MetricKind::Distribution | MetricKind::Gamma | MetricKind::Swap
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, try_from = "serde_json::Value")]
pub enum ToleranceRef {
    Value(f64),
    Named(String),
}

impl TryFrom<serde_json::Value> for ToleranceRef {
    type Error = String;

    fn try_from(v: serde_json::Value) -> Result<Self, String> {
        Ok(number_or_string(&v, "tolerance")?.map_or_else(ToleranceRef::Named, ToleranceRef::Value))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub name: String,
    pub kind: MetricKind,
    #[serde(default)]
    pub prediction: Option<String>,
    #[serde(default)]
    pub property: Option<String>,
    #[serde(default)]
    pub loss: Option<String>,
    /// Second loss of `cost_gap`.
    #[serde(default)]
    pub loss_b: Option<String>,
    /// Decision and risk predictions of `bre`.
    #[serde(default)]
    pub decision: Option<String>,
    #[serde(default)]
    pub risk: Option<String>,
    /// Groups of `robust_swap`.
    #[serde(default)]
    pub groups: Option<Vec<String>>,
    /// Evaluates the metric inside the group and on its complement.
    #[serde(default)]
    pub group: Option<String>,
    /// Overrides the document-wide aggregation for level-map metrics.
    #[serde(default)]
    pub aggregation: Option<String>,
    /// Reports the residual at one real level instead of an aggregate.
    #[serde(default)]
    pub level: Option<f64>,
    pub tolerance: ToleranceRef,
    /// When set, the verdict compares the value with `expect` instead of 0.
    #[serde(default)]
    pub expect: Option<f64>,
}

/// A metric with its quantity and numeric tolerance.
#[derive(Debug, Clone)]
pub struct ResolvedMetric {
    pub name: String,
    pub kind: MetricKind,
    pub quantity: Quantity,
    pub tolerance: f64,
    pub expect: Option<f64>,
}

/// Everything an audit needs besides the records.
#[derive(Debug, Clone)]
pub struct ResolvedAudit {
    pub config: AuditConfig,
    pub space: Arc<OutcomeSpace>,
    pub properties: BTreeMap<String, Property>,
    pub losses: BTreeMap<String, LossFn>,
    pub metrics: Vec<ResolvedMetric>,
}

fn cfg(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn load_config(path: &Path) -> CliResult<AuditConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> CliResult<AuditConfig> {
    serde_json::from_str(text).map_err(|e| cfg(e.to_string()))
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || "_-.".contains(c))
}

fn require<'a>(field: &'a Option<String>, what: &str, metric: &str) -> CliResult<&'a str> {
    field
        .as_deref()
        .ok_or_else(|| cfg(format!("metric `{metric}` needs `{what}`")))
}

fn reduction(token: &str) -> CliResult<Reduction> {
    match token {
        "sup" => Ok(Reduction::Sup),
        "expected" => Ok(Reduction::Expected),
        "expected_square" => Ok(Reduction::ExpectedSquare),
        other => Err(cfg(format!("unknown aggregation `{other}`"))),
    }
}

fn build_property(space: &Arc<OutcomeSpace>, spec: &PropertySpec) -> CliResult<Property> {
    let need = |v: Option<f64>, what: &str| v.ok_or_else(|| cfg(format!("property `{}` needs `{what}`", spec.name)));
    let kind = match spec.kind.as_str() {
        "mean" => StandardKind::Mean,
        "quantile" => StandardKind::Quantile { tau: need(spec.tau, "tau")? },
        "mode" => StandardKind::Mode,
        "ranking" => StandardKind::Ranking,
        "variance" => StandardKind::Variance,
        "cvar" => StandardKind::Cvar { tau: need(spec.tau, "tau")? },
        "ratio" => StandardKind::RatioOfExpectations {
            g: spec.g.clone().ok_or_else(|| cfg(format!("property `{}` needs `g`", spec.name)))?,
            h: spec.h.clone().ok_or_else(|| cfg(format!("property `{}` needs `h`", spec.name)))?,
            h_bounds: spec.h_bounds.map(|[a, b]| (a, b)),
        },
        "simple_binary" => StandardKind::SimpleBinary { q: need(spec.q, "q")? },
        "full_distribution" => StandardKind::FullDistribution,
        other => return Err(cfg(format!("property `{}` has unknown kind `{other}`", spec.name))),
    };
    make_standard_property(space, &kind).map_err(|e| cfg(format!("property `{}`: {e}", spec.name)))
}

fn default_real_grid(space: &OutcomeSpace, loss: &str) -> CliResult<Vec<PropertyValue>> {
    let e = space
        .embedding()
        .ok_or_else(|| cfg(format!("loss `{loss}` needs an outcome embedding or an explicit grid")))?;
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut values: Vec<f64> = (0..=100).map(|i| lo + (hi - lo) * i as f64 / 100.0).collect();
    values.extend_from_slice(e);
    values.sort_by(f64::total_cmp);
    values.dedup();
    Ok(values.into_iter().map(PropertyValue::Real).collect())
}

fn build_loss(space: &Arc<OutcomeSpace>, spec: &LossSpec) -> CliResult<LossFn> {
    let name = &spec.name;
    let ctx = |e: calib_atlas::error::Error| cfg(format!("loss `{name}`: {e}"));
    let loss = match spec.kind.as_str() {
        "squared" => squared_loss(space, spec.scale.unwrap_or(1.0)).map_err(ctx)?,
        "pinball" => pinball_loss(space, spec.tau.ok_or_else(|| cfg(format!("loss `{name}` needs `tau`")))?)
            .map_err(ctx)?,
        "zero_one" => zero_one_loss(space),
        "simple" => {
            make_simple_loss(space, spec.q.ok_or_else(|| cfg(format!("loss `{name}` needs `q`")))?)
                .map_err(ctx)?
                .0
        }
        other => return Err(cfg(format!("loss `{name}` has unknown kind `{other}`"))),
    };
    let real = matches!(spec.kind.as_str(), "squared" | "pinball");
    let grid = match &spec.grid {
        Some(GridSpec::Uniform { from, to, points }) => {
            if *points < 2 || !(from < to) {
                return Err(cfg(format!("loss `{name}`: uniform grid needs from < to and at least 2 points")));
            }
            (0..*points)
                .map(|i| PropertyValue::Real(from + (to - from) * i as f64 / (*points - 1) as f64))
                .collect()
        }
        Some(GridSpec::Values(values)) => values
            .iter()
            .map(|v| match (v, real) {
                (GridValue::Real(x), true) => Ok(PropertyValue::Real(*x)),
                (GridValue::Token(t), false) => Ok(PropertyValue::Token(t.clone())),
                _ => Err(cfg(format!("loss `{name}`: grid value {v:?} has the wrong kind"))),
            })
            .collect::<CliResult<Vec<_>>>()?,
        None if real => default_real_grid(space, name)?,
        None => loss
            .default_grid()
            .map(<[PropertyValue]>::to_vec)
            .ok_or_else(|| cfg(format!("loss `{name}` needs a grid")))?,
    };
    if grid.is_empty() {
        return Err(cfg(format!("loss `{name}` has an empty grid")));
    }
    Ok(loss.with_default_grid(grid))
}

/// Checks every reference and builds the ingredients.
pub fn resolve(config: &AuditConfig) -> CliResult<ResolvedAudit> {
    let space = match &config.outcome_space.embedding {
        Some(e) => OutcomeSpace::with_embedding(config.outcome_space.labels.clone(), e.clone()),
        None => OutcomeSpace::new(config.outcome_space.labels.clone()),
    }
    .map_err(|e| cfg(format!("outcome space: {e}")))?;

    let mut predictions = BTreeMap::new();
    let mut columns = BTreeSet::new();
    for p in &config.predictions {
        if !valid_name(&p.name) || predictions.insert(p.name.clone(), p.kind).is_some() {
            return Err(cfg(format!("prediction name `{}` is invalid or repeated", p.name)));
        }
        let cols = p.column_names(&space);
        if p.kind == PredictionKind::Dist && cols.len() != space.len() {
            return Err(cfg(format!("prediction `{}` needs one column per outcome", p.name)));
        }
        if p.kind != PredictionKind::Dist && cols.len() != 1 {
            return Err(cfg(format!("prediction `{}` needs exactly one column", p.name)));
        }
        for c in cols {
            if ["x_id", "y", "weight"].contains(&c.as_str()) || !columns.insert(c.clone()) {
                return Err(cfg(format!("column `{c}` is reserved or declared twice")));
            }
        }
    }
    let groups: BTreeSet<&str> = config.groups.iter().map(String::as_str).collect();
    if groups.len() != config.groups.len() || !config.groups.iter().all(|g| valid_name(g)) {
        return Err(cfg("group names must be valid and distinct"));
    }

    let mut properties = BTreeMap::new();
    for p in &config.properties {
        if properties.insert(p.name.clone(), build_property(&space, p)?).is_some() {
            return Err(cfg(format!("property `{}` declared twice", p.name)));
        }
    }
    let mut losses = BTreeMap::new();
    for l in &config.losses {
        if losses.insert(l.name.clone(), build_loss(&space, l)?).is_some() {
            return Err(cfg(format!("loss `{}` declared twice", l.name)));
        }
    }
    let default_reduce = reduction(&config.aggregation)?;

    let mut metrics = Vec::new();
    let mut names = BTreeSet::new();
    for m in &config.metrics {
        let name = m.name.as_str();
        if !valid_name(name) || !names.insert(name) {
            return Err(cfg(format!("metric name `{name}` is invalid or repeated")));
        }
        let prediction = |kinds: &[PredictionKind]| -> CliResult<String> {
            let p = require(&m.prediction, "prediction", name)?;
            match predictions.get(p) {
                Some(k) if kinds.contains(k) => Ok(p.to_string()),
                Some(k) => Err(cfg(format!("metric `{name}`: prediction `{p}` has kind {k:?}"))),
                None => Err(cfg(format!("metric `{name}` references undeclared prediction `{p}`"))),
            }
        };
        let property = || -> CliResult<String> {
            let p = require(&m.property, "property", name)?;
            if properties.contains_key(p) {
                Ok(p.to_string())
            } else {
                Err(cfg(format!("metric `{name}` references undeclared property `{p}`")))
            }
        };
        let loss = |field: &Option<String>, what: &str| -> CliResult<String> {
            let l = require(field, what, name)?;
            if losses.contains_key(l) {
                Ok(l.to_string())
            } else {
                Err(cfg(format!("metric `{name}` references undeclared loss `{l}`")))
            }
        };
        let group = |g: &str| -> CliResult<String> {
            if groups.contains(g) {
                Ok(g.to_string())
            } else {
                Err(cfg(format!("metric `{name}` references undeclared group `{g}`")))
            }
        };
        use PredictionKind::{Dist, Real, Token};
        let reduce = match (m.level, &m.aggregation) {
            (Some(_), Some(_)) => return Err(cfg(format!("metric `{name}` sets both `level` and `aggregation`"))),
            (Some(x), None) => Reduction::Level(x),
            (None, Some(a)) => reduction(a)?,
            (None, None) => default_reduce,
        };
        if !m.kind.has_levels() && (m.level.is_some() || m.aggregation.is_some()) {
            return Err(cfg(format!("metric `{name}` is a scalar and takes no aggregation or level")));
        }
        let quantity = match m.kind {
            MetricKind::Vanilla => Quantity::Vanilla { prediction: prediction(&[Real])?, reduce },
            MetricKind::Distribution => Quantity::Distribution {
                prediction: prediction(&[Dist])?,
                property: property()?,
                reduce,
            },
            MetricKind::Gamma => Quantity::Gamma {
                prediction: prediction(&[Dist, Real, Token])?,
                property: property()?,
                reduce,
            },
            MetricKind::Swap => Quantity::Swap {
                prediction: prediction(&[Real, Token])?,
                loss: loss(&m.loss, "loss")?,
                reduce,
            },
            MetricKind::Decision => Quantity::Decision {
                prediction: prediction(&[Dist])?,
                loss: loss(&m.loss, "loss")?,
            },
            MetricKind::Bre => {
                let decision = require(&m.decision, "decision", name)?;
                let risk = require(&m.risk, "risk", name)?;
                for (p, kinds) in [(decision, &[Real, Token][..]), (risk, &[Real][..])] {
                    match predictions.get(p) {
                        Some(k) if kinds.contains(k) => {}
                        _ => return Err(cfg(format!("metric `{name}`: `{p}` is not a suitable declared prediction"))),
                    }
                }
                Quantity::BayesRiskEstimation {
                    decision: decision.into(),
                    risk: risk.into(),
                    loss: loss(&m.loss, "loss")?,
                }
            }
            MetricKind::BayesRisk => Quantity::BayesRisk { loss: loss(&m.loss, "loss")? },
            MetricKind::RealizedLoss => Quantity::RealizedLoss {
                prediction: prediction(&[Dist])?,
                loss: loss(&m.loss, "loss")?,
            },
            MetricKind::CostGap => Quantity::CostGap {
                prediction: prediction(&[Dist])?,
                loss_a: loss(&m.loss, "loss")?,
                loss_b: loss(&m.loss_b, "loss_b")?,
            },
            MetricKind::RobustSwap => {
                let gs = m
                    .groups
                    .as_ref()
                    .filter(|g| !g.is_empty())
                    .ok_or_else(|| cfg(format!("metric `{name}` needs `groups`")))?;
                Quantity::RobustSwap {
                    prediction: prediction(&[Real])?,
                    loss: loss(&m.loss, "loss")?,
                    groups: gs.iter().map(|g| group(g)).collect::<CliResult<_>>()?,
                }
            }
        };
        let quantity = match &m.group {
            Some(g) => Quantity::Group { group: group(g)?, inner: Box::new(quantity) },
            None => quantity,
        };
        let tolerance = match &m.tolerance {
            ToleranceRef::Value(t) => *t,
            ToleranceRef::Named(key) => *config
                .tolerances
                .get(key)
                .ok_or_else(|| cfg(format!("metric `{name}` references undeclared tolerance `{key}`")))?,
        };
        if !(tolerance >= 0.0) {
            return Err(cfg(format!("metric `{name}` has a negative tolerance")));
        }
        metrics.push(ResolvedMetric {
            name: name.to_string(),
            kind: m.kind,
            quantity,
            tolerance,
            expect: m.expect,
        });
    }
    Ok(ResolvedAudit {
        config: config.clone(),
        space,
        properties,
        losses,
        metrics,
    })
}
