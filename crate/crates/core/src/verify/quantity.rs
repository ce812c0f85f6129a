//! Named scalar quantities computed from a scenario, with a compact token
//! syntax such as `gamma(g,variance)@level=1.25` or `decision(f,squared)`.

use std::fmt;
use std::str::FromStr;

use crate::calib_metrics::{
    aggregate, bayes_risk_estimation_residual, decision_calibration, distribution_calibration,
    gamma_calibration, group_metric, robust_swap_regret_with_loss, swap_regret,
    vanilla_calibration, Aggregation, LevelResidualMap,
};
use crate::error::{Error, Result};
use crate::losses::best_response;
use crate::outcomes::PredictionDataset;
use crate::properties::PropertyValue;

use super::Scenario;

/// How a per-level residual map becomes one number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reduction {
    Sup,
    Expected,
    ExpectedSquare,
    /// The residual at one real-valued level.
    Level(f64),
}

/// A scalar computed from a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Quantity {
    Vanilla { prediction: String, reduce: Reduction },
    Distribution { prediction: String, property: String, reduce: Reduction },
    Gamma { prediction: String, property: String, reduce: Reduction },
    Swap { prediction: String, loss: String, reduce: Reduction },
    /// `|β|` of decision calibration.
    Decision { prediction: String, loss: String },
    /// `|E[ℓ(Y, g) − h]|`.
    BayesRiskEstimation { decision: String, risk: String, loss: String },
    /// Largest value of `inner` inside the group and on its complement.
    Group { group: String, inner: Box<Quantity> },
    RobustSwap { prediction: String, loss: String, groups: Vec<String> },
    /// Bayes risk of the outcome marginal.
    BayesRisk { loss: String },
    /// `E[ℓ(Y, Φ_ℓ(f(X)))]`.
    RealizedLoss { prediction: String, loss: String },
    /// Absolute difference of two realized losses.
    CostGap { prediction: String, loss_a: String, loss_b: String },
}

impl Quantity {
    pub fn vanilla(prediction: &str) -> Self {
        Quantity::Vanilla {
            prediction: prediction.into(),
            reduce: Reduction::Sup,
        }
    }

    pub fn gamma(prediction: &str, property: &str, reduce: Reduction) -> Self {
        Quantity::Gamma {
            prediction: prediction.into(),
            property: property.into(),
            reduce,
        }
    }

    pub fn decision(prediction: &str, loss: &str) -> Self {
        Quantity::Decision {
            prediction: prediction.into(),
            loss: loss.into(),
        }
    }

    /// Replaces the reduction of a level-map quantity.
    pub fn reduced(self, r: Reduction) -> Self {
        match self {
            Quantity::Vanilla { prediction, .. } => Quantity::Vanilla { prediction, reduce: r },
            Quantity::Distribution { prediction, property, .. } => Quantity::Distribution {
                prediction,
                property,
                reduce: r,
            },
            Quantity::Gamma { prediction, property, .. } => Quantity::Gamma {
                prediction,
                property,
                reduce: r,
            },
            Quantity::Swap { prediction, loss, .. } => Quantity::Swap {
                prediction,
                loss,
                reduce: r,
            },
            other => other,
        }
    }

    /// The reduction, for quantities backed by a level map.
    pub fn reduction(&self) -> Option<Reduction> {
        match self {
            Quantity::Vanilla { reduce, .. }
            | Quantity::Distribution { reduce, .. }
            | Quantity::Gamma { reduce, .. }
            | Quantity::Swap { reduce, .. } => Some(*reduce),
            _ => None,
        }
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reduction::Sup => f.write_str("sup"),
            Reduction::Expected => f.write_str("expected"),
            Reduction::ExpectedSquare => f.write_str("expected_square"),
            Reduction::Level(x) => write!(f, "level={x}"),
        }
    }
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Vanilla { prediction, .. } => write!(f, "vanilla({prediction})")?,
            Quantity::Distribution { prediction, property, .. } => {
                write!(f, "distribution({prediction},{property})")?
            }
            Quantity::Gamma { prediction, property, .. } => write!(f, "gamma({prediction},{property})")?,
            Quantity::Swap { prediction, loss, .. } => write!(f, "swap({prediction},{loss})")?,
            Quantity::Decision { prediction, loss } => write!(f, "decision({prediction},{loss})")?,
            Quantity::BayesRiskEstimation { decision, risk, loss } => {
                write!(f, "bre({decision},{risk},{loss})")?
            }
            Quantity::Group { group, inner } => write!(f, "group({group},{inner})")?,
            Quantity::RobustSwap { prediction, loss, groups } => {
                write!(f, "robust_swap({prediction},{loss},{})", groups.join("|"))?
            }
            Quantity::BayesRisk { loss } => write!(f, "bayes_risk({loss})")?,
            Quantity::RealizedLoss { prediction, loss } => write!(f, "realized_loss({prediction},{loss})")?,
            Quantity::CostGap { prediction, loss_a, loss_b } => {
                write!(f, "cost_gap({prediction},{loss_a},{loss_b})")?
            }
        }
        match self.reduction() {
            Some(Reduction::Sup) | None => Ok(()),
            Some(r) => write!(f, "@{r}"),
        }
    }
}

fn bad(token: &str, why: &str) -> Error {
    Error::BadParam(format!("quantity `{token}`: {why}"))
}

/// Splits at commas outside parentheses.
fn split_args(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0usize, 0usize);
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth = depth.saturating_sub(1),
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out
}

impl FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sup" => Ok(Reduction::Sup),
            "expected" => Ok(Reduction::Expected),
            "expected_square" => Ok(Reduction::ExpectedSquare),
            _ => s
                .strip_prefix("level=")
                .and_then(|x| x.parse().ok())
                .map(Reduction::Level)
                .ok_or_else(|| bad(s, "unknown reduction")),
        }
    }
}

impl FromStr for Quantity {
    type Err = Error;

    fn from_str(token: &str) -> Result<Self> {
        let token = token.trim();
        let open = token.find('(').ok_or_else(|| bad(token, "missing `(`"))?;
        let close = token.rfind(')').ok_or_else(|| bad(token, "missing `)`"))?;
        let head = &token[..open];
        let tail = token[close + 1..].trim();
        let reduce = match tail.strip_prefix('@') {
            Some(r) => Some(r.parse::<Reduction>()?),
            None if tail.is_empty() => None,
            None => return Err(bad(token, "trailing text")),
        };
        let args = split_args(&token[open + 1..close]);
        let arity = |n: usize| -> Result<()> {
            if args.len() == n && args.iter().all(|a| !a.is_empty()) {
                Ok(())
            } else {
                Err(bad(token, &format!("expected {n} arguments")))
            }
        };
        let s = |i: usize| args[i].to_string();
        let map_reduce = reduce.unwrap_or(Reduction::Sup);
        let q = match head {
            "vanilla" => {
                arity(1)?;
                Quantity::Vanilla { prediction: s(0), reduce: map_reduce }
            }
            "distribution" => {
                arity(2)?;
                Quantity::Distribution { prediction: s(0), property: s(1), reduce: map_reduce }
            }
            "gamma" => {
                arity(2)?;
                Quantity::Gamma { prediction: s(0), property: s(1), reduce: map_reduce }
            }
            "swap" => {
                arity(2)?;
                Quantity::Swap { prediction: s(0), loss: s(1), reduce: map_reduce }
            }
            other => {
                if reduce.is_some() {
                    return Err(bad(token, "only level-map quantities take a reduction"));
                }
                match other {
                    "decision" => {
                        arity(2)?;
                        Quantity::Decision { prediction: s(0), loss: s(1) }
                    }
                    "bre" => {
                        arity(3)?;
                        Quantity::BayesRiskEstimation { decision: s(0), risk: s(1), loss: s(2) }
                    }
                    "group" => {
                        arity(2)?;
                        Quantity::Group { group: s(0), inner: Box::new(args[1].parse()?) }
                    }
                    "robust_swap" => {
                        arity(3)?;
                        Quantity::RobustSwap {
                            prediction: s(0),
                            loss: s(1),
                            groups: args[2].split('|').map(str::to_string).collect(),
                        }
                    }
                    "bayes_risk" => {
                        arity(1)?;
                        Quantity::BayesRisk { loss: s(0) }
                    }
                    "realized_loss" => {
                        arity(2)?;
                        Quantity::RealizedLoss { prediction: s(0), loss: s(1) }
                    }
                    "cost_gap" => {
                        arity(3)?;
                        Quantity::CostGap { prediction: s(0), loss_a: s(1), loss_b: s(2) }
                    }
                    _ => return Err(bad(token, "unknown quantity")),
                }
            }
        };
        Ok(q)
    }
}

pub(crate) fn level_map(scn: &Scenario, ds: &PredictionDataset, q: &Quantity) -> Result<Option<LevelResidualMap>> {
    Ok(Some(match q {
        Quantity::Vanilla { prediction, .. } => vanilla_calibration(ds, prediction)?,
        Quantity::Distribution { prediction, property, .. } => {
            distribution_calibration(ds, prediction, scn.property(property)?)?
        }
        Quantity::Gamma { prediction, property, .. } => {
            gamma_calibration(ds, prediction, scn.property(property)?)?
        }
        Quantity::Swap { prediction, loss, .. } => {
            swap_regret(ds, prediction, scn.loss(loss)?, scn.grid(loss)?)?
        }
        _ => return Ok(None),
    }))
}

pub(crate) fn reduce_map(map: &LevelResidualMap, r: Reduction) -> Result<f64> {
    match r {
        Reduction::Sup => aggregate(map, Aggregation::Sup),
        Reduction::Expected => aggregate(map, Aggregation::Expected),
        Reduction::ExpectedSquare => aggregate(map, Aggregation::ExpectedSquare),
        Reduction::Level(x) => map
            .residual_at(&PropertyValue::Real(x))
            .ok_or_else(|| Error::EmptyEvent(format!("{} at level {x}", map.metric_name))),
    }
}

fn realized_loss(scn: &Scenario, ds: &PredictionDataset, prediction: &str, loss: &str) -> Result<f64> {
    let l = scn.loss(loss)?;
    let dc = decision_calibration(ds, prediction, &[(l.clone(), scn.grid(loss)?.to_vec())])?;
    let per = &dc[l.name()].per_decision;
    Ok(per
        .entries
        .iter()
        .map(|e| e.weight * e.observed.unwrap_or(0.0))
        .sum())
}

pub(crate) fn evaluate(scn: &Scenario, ds: &PredictionDataset, q: &Quantity) -> Result<f64> {
    if let Some(map) = level_map(scn, ds, q)? {
        return reduce_map(&map, q.reduction().unwrap_or(Reduction::Sup));
    }
    match q {
        Quantity::Decision { prediction, loss } => {
            let l = scn.loss(loss)?;
            let dc = decision_calibration(ds, prediction, &[(l.clone(), scn.grid(loss)?.to_vec())])?;
            Ok(dc[l.name()].beta.abs)
        }
        Quantity::BayesRiskEstimation { decision, risk, loss } => {
            Ok(bayes_risk_estimation_residual(ds, decision, risk, scn.loss(loss)?)?.abs)
        }
        Quantity::Group { group, inner } => {
            if inner.reduction().is_some() {
                let report = group_metric(ds, group, |sub| {
                    level_map(scn, sub, inner)?.ok_or(Error::EmptyMap)
                })?;
                let r = inner.reduction().unwrap_or(Reduction::Sup);
                let mut value = reduce_map(&report.inside, r)?;
                if let Some(c) = &report.complement {
                    value = value.max(reduce_map(c, r)?);
                }
                Ok(value)
            } else {
                let flag = |r: &crate::outcomes::Record| r.groups.get(group).copied();
                if ds.records().iter().any(|r| flag(r).is_none()) {
                    return Err(Error::InvalidDataset(format!("records carry no group named `{group}`")));
                }
                let inside = ds
                    .subset(|r| flag(r) == Some(true))
                    .map_err(|_| Error::EmptyGroup(group.clone()))?;
                let mut value = evaluate(scn, &inside, inner)?;
                if let Ok(rest) = ds.subset(|r| flag(r) == Some(false)) {
                    value = value.max(evaluate(scn, &rest, inner)?);
                }
                Ok(value)
            }
        }
        Quantity::RobustSwap { prediction, loss, groups } => {
            let grid = scn
                .grid(loss)?
                .iter()
                .map(PropertyValue::as_real)
                .collect::<Result<Vec<_>>>()?;
            Ok(robust_swap_regret_with_loss(ds, prediction, scn.loss(loss)?, groups, &grid)?.beta)
        }
        Quantity::BayesRisk { loss } => {
            Ok(best_response(scn.loss(loss)?, &ds.outcome_marginal(), scn.grid(loss)?)?.1)
        }
        Quantity::RealizedLoss { prediction, loss } => realized_loss(scn, ds, prediction, loss),
        Quantity::CostGap { prediction, loss_a, loss_b } => Ok((realized_loss(scn, ds, prediction, loss_a)?
            - realized_loss(scn, ds, prediction, loss_b)?)
            .abs()),
        _ => unreachable!("level-map quantities are handled above"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_round_trip() {
        for t in [
            "vanilla(p)",
            "vanilla(p)@expected",
            "gamma(g,variance)@level=1.25",
            "swap(gamma,induced)@expected_square",
            "decision(f,squared)",
            "bre(g,h,squared)",
            "group(g1,distribution(f,mode)@expected)",
            "robust_swap(p,squared,g1|g2)",
            "bayes_risk(simple_c)",
            "realized_loss(f,simple_c)",
            "cost_gap(f,simple_c,simple_d)",
        ] {
            let q: Quantity = t.parse().unwrap();
            assert_eq!(q.to_string(), t);
        }
        assert_eq!("vanilla(p)@sup".parse::<Quantity>().unwrap().to_string(), "vanilla(p)");
    }

    #[test]
    fn malformed_tokens() {
        for t in ["vanilla", "vanilla(p,q)", "decision(f,l)@sup", "nope(x)", "gamma(a,b)@level=x", "vanilla(p)x"] {
            assert!(t.parse::<Quantity>().is_err(), "{t}");
        }
    }
}
