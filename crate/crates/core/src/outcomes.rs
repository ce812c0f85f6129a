//! Finite outcome spaces, probability mass functions and weighted prediction
//! datasets.
//!
//! A [`PredictionDataset`] is an exact, weighted description of a joint
//! distribution over inputs, outcomes and predictions. Every conditional used
//! by the calibration metrics is computed from it by summing record weights,
//! so no sampling noise enters a metric.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::properties::PropertyValue;

/// Per-weight slack allowed below 0 before a weight counts as negative.
pub const WEIGHT_TOL: f64 = 1e-12;
/// Allowed drift of a weight vector's sum from 1 before it is rejected.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// An ordered set of outcome labels with an optional numeric embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeSpace {
    labels: Vec<String>,
    embedding: Option<Vec<f64>>,
}

impl OutcomeSpace {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Arc<Self>> {
        Self::build(labels.into_iter().map(Into::into).collect(), None)
    }

    pub fn with_embedding<S: Into<String>>(
        labels: impl IntoIterator<Item = S>,
        embedding: Vec<f64>,
    ) -> Result<Arc<Self>> {
        Self::build(labels.into_iter().map(Into::into).collect(), Some(embedding))
    }

    /// Labels `"v0", "v1", ...` rendered from the values themselves, embedded at
    /// those values. Handy for real-valued outcome grids.
    pub fn numeric(values: &[f64]) -> Result<Arc<Self>> {
        let labels: Vec<String> = values.iter().map(|v| format!("{v}")).collect();
        Self::build(labels, Some(values.to_vec()))
    }

    /// `{0, 1}` embedded at 0 and 1.
    pub fn binary() -> Arc<Self> {
        Self::numeric(&[0.0, 1.0]).expect("binary space is valid")
    }

    fn build(labels: Vec<String>, embedding: Option<Vec<f64>>) -> Result<Arc<Self>> {
        if labels.len() < 2 {
            return Err(Error::InvalidSpace(format!("{} label(s)", labels.len())));
        }
        let mut seen = BTreeSet::new();
        for label in &labels {
            if label.is_empty() {
                return Err(Error::InvalidSpace("empty label".into()));
            }
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidSpace(format!("duplicate label `{label}`")));
            }
        }
        if let Some(e) = &embedding {
            if e.len() != labels.len() {
                return Err(Error::LengthMismatch {
                    expected: labels.len(),
                    got: e.len(),
                });
            }
            if e.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpace("non-finite embedding value".into()));
            }
        }
        Ok(Arc::new(Self { labels, embedding }))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn embedding(&self) -> Option<&[f64]> {
        self.embedding.as_deref()
    }

    /// True when the space is `{0, 1}` embedded at 0 and 1 in that order.
    pub fn is_binary(&self) -> bool {
        self.labels.len() == 2 && self.embedding.as_deref() == Some(&[0.0, 1.0][..])
    }
}

/// A probability mass function on a finite [`OutcomeSpace`], stored in label
/// order.
#[derive(Debug, Clone)]
pub struct Pmf {
    space: Arc<OutcomeSpace>,
    weights: Vec<f64>,
}

impl PartialEq for Pmf {
    fn eq(&self, other: &Self) -> bool {
        same_space(&self.space, &other.space) && self.weights == other.weights
    }
}

pub(crate) fn same_space(a: &Arc<OutcomeSpace>, b: &Arc<OutcomeSpace>) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

impl Pmf {
    /// Validates and wraps `weights`. Sums within [`NORMALIZATION_TOL`] of one
    /// are renormalized silently.
    pub fn new(space: &Arc<OutcomeSpace>, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: weights.len(),
            });
        }
        let mut weights = weights;
        for (index, w) in weights.iter_mut().enumerate() {
            if !w.is_finite() || *w < -WEIGHT_TOL || *w > 1.0 + WEIGHT_TOL {
                if *w < 0.0 || !w.is_finite() {
                    return Err(Error::NegativeWeight { index, value: *w });
                }
                return Err(Error::NotNormalized { sum: *w });
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() >= NORMALIZATION_TOL {
            return Err(Error::NotNormalized { sum });
        }
        if sum != 1.0 {
            for w in &mut weights {
                *w /= sum;
            }
        }
        Ok(Self {
            space: Arc::clone(space),
            weights,
        })
    }

    /// Normalizes nonnegative masses with a positive total.
    pub fn from_masses(space: &Arc<OutcomeSpace>, masses: &[f64]) -> Result<Self> {
        if masses.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: masses.len(),
            });
        }
        if let Some((index, &value)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| **m < 0.0 || !m.is_finite())
        {
            return Err(Error::NegativeWeight { index, value });
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(Error::NotNormalized { sum: total });
        }
        Ok(Self {
            space: Arc::clone(space),
            weights: masses.iter().map(|m| m / total).collect(),
        })
    }

    pub fn point_mass(space: &Arc<OutcomeSpace>, index: usize) -> Self {
        let mut weights = vec![0.0; space.len()];
        weights[index] = 1.0;
        Self {
            space: Arc::clone(space),
            weights,
        }
    }

    pub fn uniform(space: &Arc<OutcomeSpace>) -> Self {
        let n = space.len();
        Self {
            space: Arc::clone(space),
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Bernoulli pmf on a binary space: `P(label 1) = p`.
    pub fn bernoulli(space: &Arc<OutcomeSpace>, p: f64) -> Result<Self> {
        if space.len() != 2 {
            return Err(Error::NotBinary);
        }
        Self::new(space, vec![1.0 - p, p])
    }

    /// Draws uniformly from the simplex by normalizing i.i.d. exponentials.
    pub fn sample_uniform<R: Rng + ?Sized>(space: &Arc<OutcomeSpace>, rng: &mut R) -> Self {
        let draws: Vec<f64> = (0..space.len())
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let total: f64 = draws.iter().sum();
        Self {
            space: Arc::clone(space),
            weights: draws.iter().map(|d| d / total).collect(),
        }
    }

    pub(crate) fn from_raw(space: &Arc<OutcomeSpace>, weights: Vec<f64>) -> Self {
        debug_assert_eq!(weights.len(), space.len());
        Self {
            space: Arc::clone(space),
            weights,
        }
    }

    pub fn space(&self) -> &Arc<OutcomeSpace> {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.weights[index]
    }

    /// Probability of the label, or 0 if the label is unknown.
    pub fn prob_of(&self, label: &str) -> f64 {
        self.space.index_of(label).map_or(0.0, |i| self.weights[i])
    }

    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * f(i))
            .sum()
    }

    /// Mean of the embedding under this pmf.
    pub fn mean(&self) -> Option<f64> {
        let e = self.space.embedding()?;
        Some(self.expect(|i| e[i]))
    }

    pub fn ensure_space(&self, space: &Arc<OutcomeSpace>) -> Result<()> {
        if same_space(&self.space, space) {
            Ok(())
        } else {
            Err(Error::SpaceMismatch)
        }
    }
}

impl fmt::Display for Pmf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, (label, w)) in self.space.labels().iter().zip(&self.weights).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{label}: {w}")?;
        }
        f.write_str(")")
    }
}

/// Componentwise convex combination of pmfs on a shared space.
pub fn mixture(pmfs: &[Pmf], weights: &[f64]) -> Result<Pmf> {
    if pmfs.is_empty() {
        return Err(Error::LengthMismatch {
            expected: 1,
            got: 0,
        });
    }
    if pmfs.len() != weights.len() {
        return Err(Error::LengthMismatch {
            expected: pmfs.len(),
            got: weights.len(),
        });
    }
    let space = pmfs[0].space();
    for p in &pmfs[1..] {
        p.ensure_space(space)?;
    }
    if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| **w < 0.0) {
        return Err(Error::NegativeWeight { index, value });
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() >= NORMALIZATION_TOL {
        return Err(Error::NotNormalized { sum });
    }
    let mut out = vec![0.0; space.len()];
    for (p, w) in pmfs.iter().zip(weights) {
        for (o, pw) in out.iter_mut().zip(p.weights()) {
            *o += w * pw;
        }
    }
    Ok(Pmf::from_raw(space, out))
}

/// `sup_A |p(A) - q(A)| = ½ Σ |p_y - q_y|`.
pub fn total_variation(p: &Pmf, q: &Pmf) -> Result<f64> {
    p.ensure_space(q.space())?;
    Ok(0.5
        * p.weights()
            .iter()
            .zip(q.weights())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// One weighted observation of the empirical joint distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub x_id: String,
    /// Index of the outcome label in the dataset's space.
    pub y: usize,
    pub predictions: BTreeMap<String, PropertyValue>,
    pub groups: BTreeMap<String, bool>,
    pub weight: f64,
}

impl Record {
    pub fn new(x_id: impl Into<String>, y: usize, weight: f64) -> Self {
        Self {
            x_id: x_id.into(),
            y,
            predictions: BTreeMap::new(),
            groups: BTreeMap::new(),
            weight,
        }
    }

    pub fn with_prediction(mut self, name: impl Into<String>, value: PropertyValue) -> Self {
        self.predictions.insert(name.into(), value);
        self
    }

    pub fn with_real(self, name: impl Into<String>, value: f64) -> Self {
        self.with_prediction(name, PropertyValue::Real(value))
    }

    pub fn with_pmf(self, name: impl Into<String>, value: Pmf) -> Self {
        self.with_prediction(name, PropertyValue::Distribution(value))
    }

    pub fn with_group(mut self, name: impl Into<String>, flag: bool) -> Self {
        self.groups.insert(name.into(), flag);
        self
    }

    pub fn prediction(&self, name: &str) -> Result<&PropertyValue> {
        self.predictions
            .get(name)
            .ok_or_else(|| Error::MissingPrediction(name.to_string()))
    }

    pub fn pmf_prediction(&self, name: &str) -> Result<&Pmf> {
        match self.predictions.get(name) {
            Some(PropertyValue::Distribution(p)) => Ok(p),
            _ => Err(Error::MissingDistPrediction(name.to_string())),
        }
    }
}

/// Weighted records over a shared outcome space.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDataset {
    space: Arc<OutcomeSpace>,
    records: Vec<Record>,
    total_weight: f64,
}

impl PredictionDataset {
    pub fn new(space: &Arc<OutcomeSpace>, records: Vec<Record>) -> Result<Self> {
        let first = records.first().ok_or(Error::EmptyDataset)?;
        let pred_names: Vec<&String> = first.predictions.keys().collect();
        let group_names: Vec<&String> = first.groups.keys().collect();
        for (i, r) in records.iter().enumerate() {
            if r.y >= space.len() {
                return Err(Error::InvalidDataset(format!(
                    "record {i}: outcome index {} outside the space",
                    r.y
                )));
            }
            if !(r.weight > 0.0 && r.weight.is_finite()) {
                return Err(Error::InvalidDataset(format!(
                    "record {i}: weight {} is not strictly positive",
                    r.weight
                )));
            }
            if r.predictions.keys().collect::<Vec<_>>() != pred_names {
                return Err(Error::InvalidDataset(format!(
                    "record {i}: prediction names differ from the first record"
                )));
            }
            if r.groups.keys().collect::<Vec<_>>() != group_names {
                return Err(Error::InvalidDataset(format!(
                    "record {i}: group names differ from the first record"
                )));
            }
            for (name, value) in &r.predictions {
                match value {
                    PropertyValue::Real(v) if !v.is_finite() => {
                        return Err(Error::InvalidDataset(format!(
                            "record {i}: prediction `{name}` is not finite"
                        )))
                    }
                    PropertyValue::Distribution(p) => {
                        p.ensure_space(space)?;
                    }
                    _ => {}
                }
            }
        }
        let total_weight = records.iter().map(|r| r.weight).sum();
        Ok(Self {
            space: Arc::clone(space),
            records,
            total_weight,
        })
    }

    pub fn space(&self) -> &Arc<OutcomeSpace> {
        &self.space
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.total_weight
    }

    pub fn prediction_names(&self) -> Vec<String> {
        self.records[0].predictions.keys().cloned().collect()
    }

    pub fn group_names(&self) -> Vec<String> {
        self.records[0].groups.keys().cloned().collect()
    }

    pub fn has_prediction(&self, name: &str) -> bool {
        self.records[0].predictions.contains_key(name)
    }

    /// Records for which `keep` holds; errors when none remain.
    pub fn subset(&self, keep: impl Fn(&Record) -> bool) -> Result<Self> {
        let records: Vec<Record> = self.records.iter().filter(|r| keep(r)).cloned().collect();
        if records.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let total_weight = records.iter().map(|r| r.weight).sum();
        Ok(Self {
            space: Arc::clone(&self.space),
            records,
            total_weight,
        })
    }

    /// Adds (or replaces) a prediction column computed from each record.
    pub fn with_derived(
        &self,
        name: &str,
        derive: impl Fn(&Record) -> Result<PropertyValue>,
    ) -> Result<Self> {
        let mut records = self.records.clone();
        for r in &mut records {
            let v = derive(r)?;
            r.predictions.insert(name.to_string(), v);
        }
        Self::new(&self.space, records)
    }

    /// The outcome marginal of the dataset.
    pub fn outcome_marginal(&self) -> Pmf {
        let mut masses = vec![0.0; self.space.len()];
        for r in &self.records {
            masses[r.y] += r.weight;
        }
        Pmf::from_raw(
            &self.space,
            masses.iter().map(|m| m / self.total_weight).collect(),
        )
    }

    /// Normalized outcome distribution of the given records.
    pub fn conditional_of(&self, members: &[usize]) -> Result<(Pmf, f64)> {
        let mut masses = vec![0.0; self.space.len()];
        let mut weight = 0.0;
        for &i in members {
            let r = &self.records[i];
            masses[r.y] += r.weight;
            weight += r.weight;
        }
        if weight <= 0.0 {
            return Err(Error::EmptyEvent(String::new()));
        }
        Ok((
            Pmf::from_raw(&self.space, masses.iter().map(|m| m / weight).collect()),
            weight,
        ))
    }

    /// Splits the records into the level sets of the named prediction, ordered
    /// by level value.
    pub fn partition(&self, name: &str, policy: MatchPolicy) -> Result<Vec<Level>> {
        let keyed: Vec<(usize, PropertyValue)> = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let v = r.prediction(name)?;
                Ok((i, policy.level_value(v)?))
            })
            .collect::<Result<_>>()?;
        Ok(self.group_levels(keyed))
    }

    /// Like [`partition`](Self::partition) but keyed by an arbitrary value per
    /// record, e.g. a property applied to a distributional prediction.
    pub fn partition_by(
        &self,
        key: impl Fn(&Record) -> Result<PropertyValue>,
    ) -> Result<Vec<Level>> {
        let keyed: Vec<(usize, PropertyValue)> = self
            .records
            .iter()
            .enumerate()
            .map(|(i, r)| Ok((i, key(r)?)))
            .collect::<Result<_>>()?;
        Ok(self.group_levels(keyed))
    }

    /// Level sets of precomputed per-record keys, given in record order.
    pub fn partition_by_keys(&self, keys: Vec<PropertyValue>) -> Result<Vec<Level>> {
        if keys.len() != self.records.len() {
            return Err(Error::LengthMismatch {
                expected: self.records.len(),
                got: keys.len(),
            });
        }
        Ok(self.group_levels(keys.into_iter().enumerate().collect()))
    }

    fn group_levels(&self, mut keyed: Vec<(usize, PropertyValue)>) -> Vec<Level> {
        keyed.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let mut levels: Vec<Level> = Vec::new();
        for (i, value) in keyed {
            let w = self.records[i].weight;
            match levels.last_mut() {
                Some(level) if level.value.same_level(&value) => {
                    level.members.push(i);
                    level.weight += w;
                }
                _ => levels.push(Level {
                    value,
                    members: vec![i],
                    weight: w,
                    share: 0.0,
                }),
            }
        }
        for level in &mut levels {
            level.members.sort_unstable();
            level.share = level.weight / self.total_weight;
        }
        levels
    }
}

/// Records sharing one prediction value.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub value: PropertyValue,
    pub members: Vec<usize>,
    /// Total record weight of the level.
    pub weight: f64,
    /// `weight / total dataset weight`.
    pub share: f64,
}

/// How a prediction value is matched when conditioning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MatchPolicy {
    Exact,
    /// Half-open bins `[k·w, (k+1)·w)` on real predictions.
    Bin(f64),
}

impl MatchPolicy {
    fn level_value(&self, v: &PropertyValue) -> Result<PropertyValue> {
        match (self, v) {
            (MatchPolicy::Exact, _) => Ok(v.clone()),
            (MatchPolicy::Bin(w), PropertyValue::Real(x)) => {
                Ok(PropertyValue::Real(bin_index(*x, *w)? as f64 * w))
            }
            (MatchPolicy::Bin(_), other) => Err(Error::KindMismatch {
                expected: crate::error::ValueKind::Real,
                got: other.kind(),
            }),
        }
    }
}

fn bin_index(x: f64, width: f64) -> Result<i64> {
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::BadParam(format!("bin width {width} must be positive")));
    }
    Ok((x / width).floor() as i64)
}

/// The conditioning event `prediction == value` (or same bin).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionSpec {
    pub prediction_name: String,
    pub policy: MatchPolicy,
    pub value: PropertyValue,
}

impl ConditionSpec {
    pub fn exact(name: impl Into<String>, value: PropertyValue) -> Self {
        Self {
            prediction_name: name.into(),
            policy: MatchPolicy::Exact,
            value,
        }
    }

    pub fn binned(name: impl Into<String>, width: f64, value: f64) -> Self {
        Self {
            prediction_name: name.into(),
            policy: MatchPolicy::Bin(width),
            value: PropertyValue::Real(value),
        }
    }

    fn matches(&self, v: &PropertyValue) -> Result<bool> {
        match self.policy {
            MatchPolicy::Exact => Ok(v.same_level(&self.value)),
            MatchPolicy::Bin(w) => match (v, &self.value) {
                (PropertyValue::Real(a), PropertyValue::Real(b)) => {
                    Ok(bin_index(*a, w)? == bin_index(*b, w)?)
                }
                (other, PropertyValue::Real(_)) | (_, other) => Err(Error::KindMismatch {
                    expected: crate::error::ValueKind::Real,
                    got: other.kind(),
                }),
            },
        }
    }
}

/// Empirical `D_{Y | f(X) = γ}` and the event's weight share.
pub fn condition(dataset: &PredictionDataset, spec: &ConditionSpec) -> Result<(Pmf, f64)> {
    let mut members = Vec::new();
    for (i, r) in dataset.records().iter().enumerate() {
        if spec.matches(r.prediction(&spec.prediction_name)?)? {
            members.push(i);
        }
    }
    if members.is_empty() {
        return Err(Error::EmptyEvent(spec.prediction_name.clone()));
    }
    let (pmf, weight) = dataset.conditional_of(&members)?;
    Ok((pmf, weight / dataset.total_weight()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_records() -> PredictionDataset {
        let space = OutcomeSpace::binary();
        PredictionDataset::new(
            &space,
            vec![
                Record::new("a", 1, 1.0).with_real("pred", 0.7),
                Record::new("b", 0, 1.0).with_real("pred", 0.7),
                Record::new("c", 1, 1.0).with_real("pred", 0.2),
            ],
        )
        .unwrap()
    }

    #[test]
    fn pmf_construction() {
        let binary = OutcomeSpace::binary();
        let p = Pmf::new(&binary, vec![0.3, 0.7]).unwrap();
        assert_eq!(p.prob(1), 0.7);

        let three = OutcomeSpace::numeric(&[0.0, 1.0, 2.0]).unwrap();
        let point = Pmf::new(&three, vec![1.0, 0.0, 0.0]).unwrap();
        assert_eq!(point, Pmf::point_mass(&three, 0));

        assert!(matches!(
            Pmf::new(&binary, vec![0.5, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            Pmf::new(&binary, vec![1.2, -0.2]),
            Err(Error::NegativeWeight { index: 1, .. }) | Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            Pmf::new(&binary, vec![1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn small_drift_is_renormalized() {
        let binary = OutcomeSpace::binary();
        let p = Pmf::new(&binary, vec![0.3, 0.7 + 5e-10]).unwrap();
        let sum: f64 = p.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-15);
    }

    #[test]
    fn space_validation() {
        assert!(OutcomeSpace::new(["a"]).is_err());
        assert!(OutcomeSpace::new(["a", "a"]).is_err());
        assert!(OutcomeSpace::new(["a", ""]).is_err());
        assert!(OutcomeSpace::with_embedding(["a", "b"], vec![1.0]).is_err());
        assert!(OutcomeSpace::binary().is_binary());
    }

    #[test]
    fn conditioning_counts_matching_records() {
        let ds = three_records();
        let (pmf, w) = condition(&ds, &ConditionSpec::exact("pred", PropertyValue::Real(0.7))).unwrap();
        assert_eq!(pmf.weights(), &[0.5, 0.5]);
        assert!((w - 2.0 / 3.0).abs() < 1e-15);

        let missing = condition(&ds, &ConditionSpec::exact("pred", PropertyValue::Real(0.4)));
        assert!(matches!(missing, Err(Error::EmptyEvent(_))));
    }

    #[test]
    fn conditioning_on_sure_event_gives_marginal() {
        let space = OutcomeSpace::binary();
        let ds = PredictionDataset::new(
            &space,
            vec![
                Record::new("a", 1, 2.0).with_real("pred", 0.5),
                Record::new("b", 0, 1.0).with_real("pred", 0.5),
            ],
        )
        .unwrap();
        let (pmf, w) = condition(&ds, &ConditionSpec::exact("pred", PropertyValue::Real(0.5))).unwrap();
        assert_eq!(pmf, ds.outcome_marginal());
        assert_eq!(w, 1.0);
    }

    #[test]
    fn binned_conditioning() {
        let ds = three_records();
        let (pmf, w) = condition(&ds, &ConditionSpec::binned("pred", 0.5, 0.9)).unwrap();
        assert_eq!(pmf.weights(), &[0.5, 0.5]);
        assert!((w - 2.0 / 3.0).abs() < 1e-15);
        let (pmf, _) = condition(&ds, &ConditionSpec::binned("pred", 0.5, 0.0)).unwrap();
        assert_eq!(pmf.weights(), &[0.0, 1.0]);

        let levels = ds.partition("pred", MatchPolicy::Bin(0.5)).unwrap();
        assert_eq!(levels.len(), 2);
        assert_eq!(levels[1].value, PropertyValue::Real(0.5));
    }

    #[test]
    fn mixture_examples() {
        let space = OutcomeSpace::binary();
        let m = mixture(
            &[Pmf::point_mass(&space, 0), Pmf::point_mass(&space, 1)],
            &[0.5, 0.5],
        )
        .unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);

        let p = Pmf::new(&space, vec![0.3, 0.7]).unwrap();
        assert_eq!(mixture(std::slice::from_ref(&p), &[1.0]).unwrap(), p);

        let q = Pmf::new(&space, vec![0.9, 0.1]).unwrap();
        let m = mixture(&[p, q], &[0.5, 0.5]).unwrap();
        assert!((m.prob(0) - 0.6).abs() < 1e-15 && (m.prob(1) - 0.4).abs() < 1e-15);

        let other = OutcomeSpace::numeric(&[0.0, 2.0]).unwrap();
        assert_eq!(
            mixture(&[Pmf::uniform(&space), Pmf::uniform(&other)], &[0.5, 0.5]),
            Err(Error::SpaceMismatch)
        );
        assert!(matches!(
            mixture(&[Pmf::uniform(&space)], &[0.7]),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn total_variation_examples() {
        let space = OutcomeSpace::binary();
        let p = Pmf::new(&space, vec![0.3, 0.7]).unwrap();
        assert_eq!(total_variation(&p, &p).unwrap(), 0.0);
        assert_eq!(
            total_variation(&Pmf::point_mass(&space, 0), &Pmf::point_mass(&space, 1)).unwrap(),
            1.0
        );
        let tv = total_variation(&p, &Pmf::uniform(&space)).unwrap();
        assert!((tv - 0.2).abs() < 1e-15);
    }

    #[test]
    fn dataset_invariants() {
        let space = OutcomeSpace::binary();
        assert_eq!(PredictionDataset::new(&space, vec![]), Err(Error::EmptyDataset));
        let bad_weight = PredictionDataset::new(&space, vec![Record::new("a", 0, 0.0)]);
        assert!(matches!(bad_weight, Err(Error::InvalidDataset(_))));
        let bad_label = PredictionDataset::new(&space, vec![Record::new("a", 2, 1.0)]);
        assert!(matches!(bad_label, Err(Error::InvalidDataset(_))));
        let ragged = PredictionDataset::new(
            &space,
            vec![
                Record::new("a", 0, 1.0).with_real("p", 0.1),
                Record::new("b", 0, 1.0),
            ],
        );
        assert!(matches!(ragged, Err(Error::InvalidDataset(_))));
    }
}
