//! Calibration diagnostics on a [`PredictionDataset`].
//!
//! Every metric partitions the records into the level sets of a prediction
//! (or of a property applied to it), pools the outcome distribution within
//! each level, and reports one residual per level. Residuals are exact
//! functions of the record weights.

use std::collections::BTreeMap;

use crate::error::{Error, Result, ValueKind};
use crate::losses::{
    best_response, best_response_index, expected_loss, loss_from_identification,
    IdentificationFn, LossFn,
};
use crate::outcomes::{Level, MatchPolicy, PredictionDataset, Record};
use crate::properties::{value_distance, Property, PropertyValue};

/// Residual of one level set.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelEntry {
    pub level: PropertyValue,
    /// Share of the dataset's total weight falling in the level.
    pub weight: f64,
    pub residual: f64,
    /// Unclipped or signed residual, where the metric has one.
    pub signed: Option<f64>,
    /// Observed and predicted scalar summaries for reliability diagrams.
    pub observed: Option<f64>,
    pub predicted: Option<f64>,
    /// Pooled outcome distribution and average predicted distribution.
    pub observed_dist: Option<Vec<f64>>,
    pub predicted_dist: Option<Vec<f64>>,
}

impl LevelEntry {
    fn new(level: &Level, residual: f64) -> Self {
        Self {
            level: level.value.clone(),
            weight: level.share,
            residual,
            signed: None,
            observed: None,
            predicted: None,
            observed_dist: None,
            predicted_dist: None,
        }
    }
}

/// Per-level residuals of one metric.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelResidualMap {
    pub metric_name: String,
    pub entries: Vec<LevelEntry>,
    /// Levels dropped because their weight was zero.
    pub skipped: Vec<PropertyValue>,
}

impl LevelResidualMap {
    fn new(metric_name: impl Into<String>) -> Self {
        Self {
            metric_name: metric_name.into(),
            entries: Vec::new(),
            skipped: Vec::new(),
        }
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    pub fn residual_at(&self, level: &PropertyValue) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.level.same_level(level))
            .map(|e| e.residual)
    }
}

/// How per-level residuals are folded into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Aggregation {
    Expected,
    ExpectedSquare,
    Sup,
}

impl Aggregation {
    pub fn name(&self) -> &'static str {
        match self {
            Aggregation::Expected => "expected",
            Aggregation::ExpectedSquare => "expected_square",
            Aggregation::Sup => "sup",
        }
    }

    pub fn parse(token: &str) -> Option<Self> {
        match token {
            "expected" => Some(Aggregation::Expected),
            "expected_square" => Some(Aggregation::ExpectedSquare),
            "sup" => Some(Aggregation::Sup),
            _ => None,
        }
    }
}

/// Weight-averaged residual, weight-averaged squared residual, or the maximum.
pub fn aggregate(map: &LevelResidualMap, mode: Aggregation) -> Result<f64> {
    if map.entries.is_empty() {
        return Err(Error::EmptyMap);
    }
    let total: f64 = map.entries.iter().map(|e| e.weight).sum();
    Ok(match mode {
        Aggregation::Expected => {
            map.entries.iter().map(|e| e.weight * e.residual).sum::<f64>() / total
        }
        Aggregation::ExpectedSquare => {
            map.entries
                .iter()
                .map(|e| e.weight * e.residual * e.residual)
                .sum::<f64>()
                / total
        }
        Aggregation::Sup => map.max_residual(),
    })
}

fn real_prediction(r: &Record, name: &str) -> Result<f64> {
    r.prediction(name)?.as_real()
}

/// `|E[Y | f(X) = γ] − γ|` per predicted value on `{0, 1}` outcomes.
pub fn vanilla_calibration(dataset: &PredictionDataset, prediction_name: &str) -> Result<LevelResidualMap> {
    if !dataset.space().is_binary() {
        return Err(Error::NotBinary);
    }
    for r in dataset.records() {
        let p = real_prediction(r, prediction_name)?;
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::BadParam(format!(
                "prediction `{prediction_name}` = {p} lies outside [0, 1]"
            )));
        }
    }
    let mut map = LevelResidualMap::new("vanilla");
    for level in dataset.partition(prediction_name, MatchPolicy::Exact)? {
        let gamma = level.value.as_real()?;
        let (pooled, _) = dataset.conditional_of(&level.members)?;
        let rate = pooled.prob(1);
        let mut entry = LevelEntry::new(&level, (rate - gamma).abs());
        entry.signed = Some(rate - gamma);
        entry.observed = Some(rate);
        entry.predicted = Some(gamma);
        map.entries.push(entry);
    }
    Ok(map)
}

/// Per level of `Γ ∘ f`: `max_y |P(Y = y | level) − E[f_y(X) | level]|`.
pub fn distribution_calibration(
    dataset: &PredictionDataset,
    dist_prediction_name: &str,
    prop: &Property,
) -> Result<LevelResidualMap> {
    let levels = dataset.partition_by(|r| prop.evaluate(r.pmf_prediction(dist_prediction_name)?))?;
    let n = dataset.space().len();
    let mut map = LevelResidualMap::new(format!("distribution[{}]", prop.name()));
    for level in levels {
        let (pooled, weight) = dataset.conditional_of(&level.members)?;
        let mut avg = vec![0.0; n];
        for &i in &level.members {
            let r = &dataset.records()[i];
            for (a, p) in avg.iter_mut().zip(r.pmf_prediction(dist_prediction_name)?.weights()) {
                *a += r.weight * p;
            }
        }
        for a in &mut avg {
            *a /= weight;
        }
        let components: Vec<f64> = pooled
            .weights()
            .iter()
            .zip(&avg)
            .map(|(o, p)| (o - p).abs())
            .collect();
        let residual = components.iter().copied().fold(0.0, f64::max);
        let mut entry = LevelEntry::new(&level, residual);
        entry.observed_dist = Some(pooled.weights().to_vec());
        entry.predicted_dist = Some(avg);
        map.entries.push(entry);
    }
    Ok(map)
}

/// Per predicted value `γ`: `m(Γ(D_{Y | f(X) = γ}), γ)`.
pub fn gamma_calibration(
    dataset: &PredictionDataset,
    prediction_name: &str,
    prop: &Property,
) -> Result<LevelResidualMap> {
    let mut map = LevelResidualMap::new(format!("gamma[{}]", prop.name()));
    for level in dataset.partition(prediction_name, MatchPolicy::Exact)? {
        let (pooled, _) = dataset.conditional_of(&level.members)?;
        let realized = prop.evaluate(&pooled)?;
        let residual = value_distance(prop.metric(), &realized, &level.value)?;
        let mut entry = LevelEntry::new(&level, residual);
        if let (PropertyValue::Real(o), PropertyValue::Real(p)) = (&realized, &level.value) {
            entry.signed = Some(o - p);
            entry.observed = Some(*o);
            entry.predicted = Some(*p);
        }
        map.entries.push(entry);
    }
    Ok(map)
}

/// Per level: `E[ℓ(Y, γ) | f = γ] − min_{g ∈ grid} E[ℓ(Y, g) | f = γ]`,
/// clipped at 0. The unclipped gap is kept in `signed`.
pub fn swap_regret(
    dataset: &PredictionDataset,
    prediction_name: &str,
    loss: &LossFn,
    grid: &[PropertyValue],
) -> Result<LevelResidualMap> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut map = LevelResidualMap::new(format!("swap[{}]", loss.name()));
    for level in dataset.partition(prediction_name, MatchPolicy::Exact)? {
        let (pooled, _) = dataset.conditional_of(&level.members)?;
        let incurred = expected_loss(loss, &pooled, &level.value)?;
        let (_, best) = best_response(loss, &pooled, grid)?;
        let gap = incurred - best;
        let mut entry = LevelEntry::new(&level, gap.max(0.0));
        entry.signed = Some(gap);
        entry.observed = Some(best);
        entry.predicted = Some(incurred);
        map.entries.push(entry);
    }
    Ok(map)
}

/// A signed average residual and its magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedResidual {
    pub signed: f64,
    pub abs: f64,
}

impl SignedResidual {
    fn new(signed: f64) -> Self {
        Self {
            signed,
            abs: signed.abs(),
        }
    }
}

/// Decision-calibration result for one loss.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionCalibration {
    pub loss_name: String,
    /// `E[ℓ(Y, d(X)) − E_{Ŷ∼f(X)} ℓ(Ŷ, d(X))]` with `d = Φ_ℓ ∘ f`.
    pub beta: SignedResidual,
    /// The same gap conditioned on each decision value.
    pub per_decision: LevelResidualMap,
}

/// Per record best response to the predicted pmf, its predicted risk and its
/// realized loss.
fn decisions(
    dataset: &PredictionDataset,
    dist_prediction_name: &str,
    loss: &LossFn,
    grid: &[PropertyValue],
) -> Result<Vec<(usize, f64, f64)>> {
    dataset
        .records()
        .iter()
        .map(|r| {
            let p = r.pmf_prediction(dist_prediction_name)?;
            let (i, risk) = best_response_index(loss, p, grid)?;
            let realized = loss.eval(r.y, &grid[i])?;
            Ok((i, risk, realized))
        })
        .collect()
}

/// Realized minus self-estimated loss of the best-response decisions, per loss.
pub fn decision_calibration(
    dataset: &PredictionDataset,
    dist_prediction_name: &str,
    losses: &[(LossFn, Vec<PropertyValue>)],
) -> Result<BTreeMap<String, DecisionCalibration>> {
    let mut out = BTreeMap::new();
    for (loss, grid) in losses {
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        let per_record = decisions(dataset, dist_prediction_name, loss, grid)?;
        let mut total = 0.0;
        for (r, (_, risk, realized)) in dataset.records().iter().zip(&per_record) {
            total += r.weight * (realized - risk);
        }
        let beta = SignedResidual::new(total / dataset.total_weight());

        let keys = per_record.iter().map(|(i, _, _)| grid[*i].clone()).collect();
        let mut per_decision = LevelResidualMap::new(format!("decision[{}]", loss.name()));
        for level in dataset.partition_by_keys(keys)? {
            let (mut realized, mut predicted) = (0.0, 0.0);
            for &i in &level.members {
                let w = dataset.records()[i].weight;
                realized += w * per_record[i].2;
                predicted += w * per_record[i].1;
            }
            realized /= level.weight;
            predicted /= level.weight;
            let mut entry = LevelEntry::new(&level, (realized - predicted).abs());
            entry.signed = Some(realized - predicted);
            entry.observed = Some(realized);
            entry.predicted = Some(predicted);
            per_decision.entries.push(entry);
        }
        out.insert(
            loss.name().to_string(),
            DecisionCalibration {
                loss_name: loss.name().to_string(),
                beta,
                per_decision,
            },
        );
    }
    Ok(out)
}

/// `E[ℓ(Y, g(X)) − h(X)]` for a decision prediction `g` and a risk prediction
/// `h`.
pub fn bayes_risk_estimation_residual(
    dataset: &PredictionDataset,
    decision_prediction_name: &str,
    risk_prediction_name: &str,
    loss: &LossFn,
) -> Result<SignedResidual> {
    let mut total = 0.0;
    for r in dataset.records() {
        let g = r.prediction(decision_prediction_name)?;
        let h = r.prediction(risk_prediction_name)?.as_real()?;
        total += r.weight * (loss.eval(r.y, g)? - h);
    }
    Ok(SignedResidual::new(total / dataset.total_weight()))
}

/// A metric evaluated inside a group and on its complement.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub group: String,
    /// Share of the total weight carried by the group.
    pub mass: f64,
    pub inside: LevelResidualMap,
    /// `None` when the group covers every record.
    pub complement: Option<LevelResidualMap>,
    /// Largest residual over both maps.
    pub sup: f64,
}

/// Applies `metric` to the records flagged by `group_name` and to the rest.
pub fn group_metric(
    dataset: &PredictionDataset,
    group_name: &str,
    metric: impl Fn(&PredictionDataset) -> Result<LevelResidualMap>,
) -> Result<GroupReport> {
    let flag = |r: &Record| -> Result<bool> {
        r.groups
            .get(group_name)
            .copied()
            .ok_or_else(|| Error::InvalidDataset(format!("records carry no group named `{group_name}`")))
    };
    let mut inside_idx = Vec::new();
    for r in dataset.records() {
        inside_idx.push(flag(r)?);
    }
    if !inside_idx.iter().any(|f| *f) {
        return Err(Error::EmptyGroup(group_name.to_string()));
    }
    let sub = dataset.subset(|r| r.groups[group_name])?;
    let inside = metric(&sub)?;
    let complement = if inside_idx.iter().all(|f| *f) {
        None
    } else {
        Some(metric(&dataset.subset(|r| !r.groups[group_name])?)?)
    };
    let sup = complement
        .as_ref()
        .map_or(0.0, LevelResidualMap::max_residual)
        .max(inside.max_residual());
    Ok(GroupReport {
        group: group_name.to_string(),
        mass: sub.total_weight() / dataset.total_weight(),
        inside,
        complement,
        sup,
    })
}

/// Swap gap of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRegret {
    pub group: String,
    /// `E[c(X)]`.
    pub mass: f64,
    /// `E[ℓ(Y, f(X)) | c = 1] − min_h E[ℓ(Y, h(X)) | c = 1]`.
    pub gap: f64,
    /// `mass · gap`, the `β` the group certifies.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobustSwapRegret {
    /// `max_c E[c]·gap_c`.
    pub beta: f64,
    /// `max_c gap_c`.
    pub sup_gap: f64,
    pub per_group: Vec<GroupRegret>,
}

/// Robust swap regret of a real-valued predictor under the loss induced by
/// `v` (anchored at 0; the anchor only shifts losses by a per-outcome
/// constant, which cancels in every gap).
pub fn robust_swap_regret(
    dataset: &PredictionDataset,
    prediction_name: &str,
    v: &IdentificationFn,
    groups: &[String],
    grid: &[f64],
) -> Result<RobustSwapRegret> {
    let loss = loss_from_identification(v, 0.0, None, 64)?;
    robust_swap_regret_with_loss(dataset, prediction_name, &loss, groups, grid)
}

/// [`robust_swap_regret`] for an arbitrary real-valued loss. Within each group
/// every level of `f` is reassigned to its best response over `grid` or kept.
pub fn robust_swap_regret_with_loss(
    dataset: &PredictionDataset,
    prediction_name: &str,
    loss: &LossFn,
    groups: &[String],
    grid: &[f64],
) -> Result<RobustSwapRegret> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if groups.is_empty() {
        return Err(Error::BadParam("robust swap regret needs at least one group".into()));
    }
    if loss.value_kind() != ValueKind::Real {
        return Err(Error::KindMismatch {
            expected: ValueKind::Real,
            got: loss.value_kind(),
        });
    }
    let grid: Vec<PropertyValue> = grid.iter().map(|g| PropertyValue::Real(*g)).collect();
    let mut out = RobustSwapRegret {
        beta: 0.0,
        sup_gap: 0.0,
        per_group: Vec::new(),
    };
    for name in groups {
        for r in dataset.records() {
            if !r.groups.contains_key(name) {
                return Err(Error::InvalidDataset(format!("records carry no group named `{name}`")));
            }
        }
        let sub = dataset
            .subset(|r| r.groups[name])
            .map_err(|_| Error::EmptyGroup(name.clone()))?;
        let mut gap = 0.0;
        for level in sub.partition(prediction_name, MatchPolicy::Exact)? {
            let (pooled, _) = sub.conditional_of(&level.members)?;
            let incurred = expected_loss(loss, &pooled, &level.value)?;
            let (_, best) = best_response(loss, &pooled, &grid)?;
            gap += level.share * (incurred - best.min(incurred));
        }
        let mass = sub.total_weight() / dataset.total_weight();
        out.beta = out.beta.max(mass * gap);
        out.sup_gap = out.sup_gap.max(gap);
        out.per_group.push(GroupRegret {
            group: name.clone(),
            mass,
            gap,
            beta: mass * gap,
        });
    }
    Ok(out)
}
