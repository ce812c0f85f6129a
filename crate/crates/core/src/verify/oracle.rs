//! Brute-force recomputation of every [`Quantity`] straight from the records:
//! quadratic level grouping, explicit sums and exhaustive grid scans.

use crate::error::{Error, Result};
use crate::losses::LossFn;
use crate::outcomes::{Pmf, Record};
use crate::properties::{value_distance, PropertyValue};

use super::quantity::{Quantity, Reduction};
use super::Scenario;

pub const MAX_ORACLE_RECORDS: usize = 10_000;
pub const MAX_ORACLE_GRID: usize = 1_000;

/// One level: its value, share of the (sub)population weight and residual.
struct Row {
    level: PropertyValue,
    share: f64,
    residual: f64,
}

struct View<'a> {
    scn: &'a Scenario,
    records: Vec<&'a Record>,
}

impl<'a> View<'a> {
    fn total(&self) -> f64 {
        self.records.iter().map(|r| r.weight).sum()
    }

    /// Record indices grouped by equal key, in first-appearance order.
    fn group(&self, key: impl Fn(&Record) -> Result<PropertyValue>) -> Result<Vec<(PropertyValue, Vec<usize>)>> {
        let mut out: Vec<(PropertyValue, Vec<usize>)> = Vec::new();
        for (i, r) in self.records.iter().enumerate() {
            if r.weight == 0.0 {
                continue;
            }
            let k = key(r)?;
            match out.iter_mut().find(|(v, _)| v.same_level(&k)) {
                Some(slot) => slot.1.push(i),
                None => out.push((k, vec![i])),
            }
        }
        Ok(out)
    }

    fn weight_of(&self, members: &[usize]) -> f64 {
        members.iter().map(|&i| self.records[i].weight).sum()
    }

    fn outcome_masses(&self, members: &[usize]) -> Vec<f64> {
        let mut m = vec![0.0; self.scn.dataset.space().len()];
        for &i in members {
            m[self.records[i].y] += self.records[i].weight;
        }
        let w = self.weight_of(members);
        m.iter().map(|x| x / w).collect()
    }

    fn pooled(&self, members: &[usize]) -> Result<Pmf> {
        Pmf::new(self.scn.dataset.space(), self.outcome_masses(members))
    }

    fn rows(
        &self,
        key: impl Fn(&Record) -> Result<PropertyValue>,
        residual: impl Fn(&PropertyValue, &[usize]) -> Result<f64>,
    ) -> Result<Vec<Row>> {
        let total = self.total();
        self.group(key)?
            .into_iter()
            .map(|(level, members)| {
                let residual = residual(&level, &members)?;
                Ok(Row {
                    share: self.weight_of(&members) / total,
                    level,
                    residual,
                })
            })
            .collect()
    }

    fn level_rows(&self, q: &Quantity) -> Result<Option<Vec<Row>>> {
        let scn = self.scn;
        Ok(Some(match q {
            Quantity::Vanilla { prediction, .. } => {
                if !scn.dataset.space().is_binary() {
                    return Err(Error::NotBinary);
                }
                self.rows(
                    |r| Ok(r.prediction(prediction)?.clone()),
                    |level, members| {
                        let rate = self.outcome_masses(members)[1];
                        Ok((rate - level.as_real()?).abs())
                    },
                )?
            }
            Quantity::Distribution { prediction, property, .. } => {
                let prop = scn.property(property)?;
                self.rows(
                    |r| prop.evaluate(r.pmf_prediction(prediction)?),
                    |_, members| {
                        let observed = self.outcome_masses(members);
                        let w = self.weight_of(members);
                        let mut worst: f64 = 0.0;
                        for (y, o) in observed.iter().enumerate() {
                            let mut predicted = 0.0;
                            for &i in members {
                                let r = self.records[i];
                                predicted += r.weight * r.pmf_prediction(prediction)?.prob(y);
                            }
                            worst = worst.max((o - predicted / w).abs());
                        }
                        Ok(worst)
                    },
                )?
            }
            Quantity::Gamma { prediction, property, .. } => {
                let prop = scn.property(property)?;
                self.rows(
                    |r| Ok(r.prediction(prediction)?.clone()),
                    |level, members| {
                        let realized = prop.evaluate(&self.pooled(members)?)?;
                        value_distance(prop.metric(), &realized, level)
                    },
                )?
            }
            Quantity::Swap { prediction, loss, .. } => {
                let l = scn.loss(loss)?;
                let grid = scn.grid(loss)?;
                self.rows(
                    |r| Ok(r.prediction(prediction)?.clone()),
                    |level, members| {
                        let incurred = self.mean_loss(l, members, level)?;
                        let mut best = f64::INFINITY;
                        for g in grid {
                            best = best.min(self.mean_loss(l, members, g)?);
                        }
                        Ok((incurred - best).max(0.0))
                    },
                )?
            }
            _ => return Ok(None),
        }))
    }

    /// Weighted average of `ℓ(y_i, v)` over the members.
    fn mean_loss(&self, l: &LossFn, members: &[usize], v: &PropertyValue) -> Result<f64> {
        let mut s = 0.0;
        for &i in members {
            s += self.records[i].weight * l.eval(self.records[i].y, v)?;
        }
        Ok(s / self.weight_of(members))
    }

    /// First grid index minimizing `Σ_y p(y) ℓ(y, g)`, and the minimum.
    fn argmin(l: &LossFn, p: &Pmf, grid: &[PropertyValue]) -> Result<(usize, f64)> {
        let mut best = (0, f64::INFINITY);
        for (j, g) in grid.iter().enumerate() {
            let mut risk = 0.0;
            for y in 0..p.weights().len() {
                risk += p.prob(y) * l.eval(y, g)?;
            }
            if risk < best.1 {
                best = (j, risk);
            }
        }
        Ok(best)
    }

    /// Weighted averages of realized loss and self-estimated risk of the
    /// best response to each record's predicted distribution.
    fn decision_sums(&self, prediction: &str, loss: &str) -> Result<(f64, f64)> {
        let l = self.scn.loss(loss)?;
        let grid = self.scn.grid(loss)?;
        let (mut realized, mut risk) = (0.0, 0.0);
        for r in &self.records {
            let (j, est) = Self::argmin(l, r.pmf_prediction(prediction)?, grid)?;
            realized += r.weight * l.eval(r.y, &grid[j])?;
            risk += r.weight * est;
        }
        let total = self.total();
        Ok((realized / total, risk / total))
    }

    fn subset(&self, group: &str, inside: bool) -> Result<Option<View<'a>>> {
        let mut records = Vec::new();
        for r in &self.records {
            let flag = *r
                .groups
                .get(group)
                .ok_or_else(|| Error::InvalidDataset(format!("records carry no group named `{group}`")))?;
            if flag == inside {
                records.push(*r);
            }
        }
        Ok((!records.is_empty()).then_some(View { scn: self.scn, records }))
    }

    fn evaluate(&self, q: &Quantity) -> Result<f64> {
        if let Some(rows) = self.level_rows(q)? {
            return reduce(&rows, q.reduction().unwrap_or(Reduction::Sup));
        }
        let scn = self.scn;
        match q {
            Quantity::Decision { prediction, loss } => {
                let (realized, risk) = self.decision_sums(prediction, loss)?;
                Ok((realized - risk).abs())
            }
            Quantity::RealizedLoss { prediction, loss } => Ok(self.decision_sums(prediction, loss)?.0),
            Quantity::CostGap { prediction, loss_a, loss_b } => {
                Ok((self.decision_sums(prediction, loss_a)?.0 - self.decision_sums(prediction, loss_b)?.0).abs())
            }
            Quantity::BayesRiskEstimation { decision, risk, loss } => {
                let l = scn.loss(loss)?;
                let mut s = 0.0;
                for r in &self.records {
                    s += r.weight * (l.eval(r.y, r.prediction(decision)?)? - r.prediction(risk)?.as_real()?);
                }
                Ok((s / self.total()).abs())
            }
            Quantity::BayesRisk { loss } => {
                let all: Vec<usize> = (0..self.records.len()).collect();
                let p = self.pooled(&all)?;
                Ok(Self::argmin(scn.loss(loss)?, &p, scn.grid(loss)?)?.1)
            }
            Quantity::Group { group, inner } => {
                let inside = self.subset(group, true)?.ok_or_else(|| Error::EmptyGroup(group.clone()))?;
                let mut value = inside.evaluate(inner)?;
                if let Some(rest) = self.subset(group, false)? {
                    value = value.max(rest.evaluate(inner)?);
                }
                Ok(value)
            }
            Quantity::RobustSwap { prediction, loss, groups } => {
                let l = scn.loss(loss)?;
                let grid = scn.grid(loss)?;
                let total = self.total();
                let mut beta: f64 = 0.0;
                for g in groups {
                    let sub = self.subset(g, true)?.ok_or_else(|| Error::EmptyGroup(g.clone()))?;
                    let sub_total = sub.total();
                    let mut gap = 0.0;
                    for (level, members) in sub.group(|r| Ok(r.prediction(prediction)?.clone()))? {
                        let incurred = sub.mean_loss(l, &members, &level)?;
                        let mut best = incurred;
                        for v in grid {
                            best = best.min(sub.mean_loss(l, &members, v)?);
                        }
                        gap += sub.weight_of(&members) / sub_total * (incurred - best);
                    }
                    beta = beta.max(sub_total / total * gap);
                }
                Ok(beta)
            }
            _ => unreachable!("level-map quantities are handled above"),
        }
    }
}

fn reduce(rows: &[Row], r: Reduction) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::EmptyMap);
    }
    let total: f64 = rows.iter().map(|x| x.share).sum();
    match r {
        Reduction::Sup => Ok(rows.iter().map(|x| x.residual).fold(0.0, f64::max)),
        Reduction::Expected => Ok(rows.iter().map(|x| x.share * x.residual).sum::<f64>() / total),
        Reduction::ExpectedSquare => {
            Ok(rows.iter().map(|x| x.share * x.residual * x.residual).sum::<f64>() / total)
        }
        Reduction::Level(v) => rows
            .iter()
            .find(|x| x.level.same_level(&PropertyValue::Real(v)))
            .map(|x| x.residual)
            .ok_or_else(|| Error::EmptyEvent(format!("no level at {v}"))),
    }
}

fn grids_used<'q>(q: &'q Quantity, out: &mut Vec<&'q str>) {
    match q {
        Quantity::Swap { loss, .. }
        | Quantity::Decision { loss, .. }
        | Quantity::RealizedLoss { loss, .. }
        | Quantity::BayesRisk { loss }
        | Quantity::RobustSwap { loss, .. } => out.push(loss),
        Quantity::CostGap { loss_a, loss_b, .. } => {
            out.push(loss_a);
            out.push(loss_b);
        }
        Quantity::Group { inner, .. } => grids_used(inner, out),
        _ => {}
    }
}

/// Recomputes `quantity` without the calibration metric code. Refuses
/// datasets above [`MAX_ORACLE_RECORDS`] records or decision grids above
/// [`MAX_ORACLE_GRID`] points.
pub fn brute_force_oracle(scenario: &Scenario, quantity: &Quantity) -> Result<f64> {
    let n = scenario.dataset.len();
    if n > MAX_ORACLE_RECORDS {
        return Err(Error::TooLarge(format!("{n} records exceed the oracle limit of {MAX_ORACLE_RECORDS}")));
    }
    let mut losses = Vec::new();
    grids_used(quantity, &mut losses);
    for l in losses {
        let size = scenario.grid(l)?.len();
        if size > MAX_ORACLE_GRID {
            return Err(Error::TooLarge(format!(
                "grid of `{l}` has {size} points, above the oracle limit of {MAX_ORACLE_GRID}"
            )));
        }
    }
    View {
        scn: scenario,
        records: scenario.dataset.records().iter().collect(),
    }
    .evaluate(quantity)
}
