//! Checkable scenarios: worked examples and counterexamples with their
//! expected metric values, seeded families for each implication between
//! calibration notions, the binary-hyperplane recovery of distribution
//! calibration, and a brute-force oracle that recomputes every metric.

mod counterexamples;
mod edges;
mod generate;
mod oracle;
mod quantity;
mod recovery;

use std::collections::BTreeMap;
use std::fmt;

pub use counterexamples::{
    cost_parity_construction, counterexample_half_predictor, counterexample_mean_variance,
    counterexample_mean_variance_weighted, cost_parity_q,
};
pub use edges::{
    check_edge, check_edge_with, EdgeOptions, EdgeOutcome, ImplicationEdge, CONCLUSION_TOL,
    HYPOTHESIS_TOL,
};
pub use generate::{
    binary_oracle_scenario, generate_scenario, mean_sandwich_scenario, oracle_quantities, oracle_scenario, recovery_scenario,
};
pub use oracle::{brute_force_oracle, MAX_ORACLE_GRID, MAX_ORACLE_RECORDS};
pub use quantity::{Quantity, Reduction};
pub use recovery::{
    recover_distribution_calibration, HyperplaneCheck, PointRecovery, RecoveryOutcome,
};

use crate::calib_metrics::{decision_calibration, LevelResidualMap};
use crate::error::{Error, Result};
use crate::losses::{IdentificationFn, LossFn};
use crate::outcomes::{PredictionDataset, Record};
use crate::properties::{refine, Property, PropertyValue, ValueMap, ValueMetric};

/// A value map `φ: R → R'` with the metadata the inheritance checks need.
#[derive(Clone)]
pub struct Refinement {
    pub name: String,
    pub phi: ValueMap,
    pub metric: ValueMetric,
    /// Lipschitz constant of `φ`, when it has one.
    pub lipschitz: Option<f64>,
    /// Whether `φ ∘ Γ` has convex level sets.
    pub convex_level_sets: bool,
}

impl fmt::Debug for Refinement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Refinement")
            .field("name", &self.name)
            .field("metric", &self.metric)
            .field("lipschitz", &self.lipschitz)
            .field("convex_level_sets", &self.convex_level_sets)
            .finish()
    }
}

impl Refinement {
    pub fn apply(&self, v: &PropertyValue) -> Result<PropertyValue> {
        (self.phi)(v)
    }

    /// `φ ∘ Γ`.
    pub fn refine(&self, gamma: &Property) -> Result<Property> {
        let phi = self.phi.clone();
        refine(gamma, move |v| phi(v), self.metric, format!("{}∘{}", self.name, gamma.name()))
    }
}

/// A quantity with its expected value.
#[derive(Debug, Clone, PartialEq)]
pub struct Expectation {
    pub quantity: Quantity,
    pub value: f64,
    pub tolerance: f64,
    /// Where the value comes from, e.g. `closed form` or `construction`.
    pub source: String,
}

/// Result of comparing one [`Expectation`] with the computed value.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationCheck {
    pub expectation: Expectation,
    pub computed: f64,
    pub pass: bool,
}

/// A dataset together with the named ingredients its checks refer to.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub dataset: PredictionDataset,
    pub properties: BTreeMap<String, Property>,
    /// Losses; each carries its decision grid as its default grid.
    pub losses: BTreeMap<String, LossFn>,
    pub identifications: BTreeMap<String, IdentificationFn>,
    pub refinements: BTreeMap<String, Refinement>,
    pub expected: Vec<Expectation>,
}

impl Scenario {
    pub fn new(name: impl Into<String>, dataset: PredictionDataset) -> Self {
        Self {
            name: name.into(),
            dataset,
            properties: BTreeMap::new(),
            losses: BTreeMap::new(),
            identifications: BTreeMap::new(),
            refinements: BTreeMap::new(),
            expected: Vec::new(),
        }
    }

    pub fn with_property(mut self, name: impl Into<String>, prop: Property) -> Self {
        self.properties.insert(name.into(), prop);
        self
    }

    pub fn with_loss(mut self, name: impl Into<String>, loss: LossFn) -> Self {
        self.losses.insert(name.into(), loss);
        self
    }

    pub fn with_identification(mut self, name: impl Into<String>, v: IdentificationFn) -> Self {
        self.identifications.insert(name.into(), v);
        self
    }

    pub fn with_refinement(mut self, name: impl Into<String>, r: Refinement) -> Self {
        self.refinements.insert(name.into(), r);
        self
    }

    pub fn expect(mut self, quantity: Quantity, value: f64, tolerance: f64, source: &str) -> Self {
        self.expected.push(Expectation {
            quantity,
            value,
            tolerance,
            source: source.to_string(),
        });
        self
    }

    pub fn property(&self, name: &str) -> Result<&Property> {
        self.properties
            .get(name)
            .ok_or_else(|| Error::MissingIngredient(format!("property `{name}`")))
    }

    pub fn loss(&self, name: &str) -> Result<&LossFn> {
        self.losses
            .get(name)
            .ok_or_else(|| Error::MissingIngredient(format!("loss `{name}`")))
    }

    /// The decision grid of a loss.
    pub fn grid(&self, loss_name: &str) -> Result<&[PropertyValue]> {
        self.loss(loss_name)?
            .default_grid()
            .ok_or_else(|| Error::MissingIngredient(format!("decision grid of loss `{loss_name}`")))
    }

    pub fn identification(&self, name: &str) -> Result<&IdentificationFn> {
        self.identifications
            .get(name)
            .ok_or_else(|| Error::MissingIngredient(format!("identification function `{name}`")))
    }

    pub fn refinement(&self, name: &str) -> Result<&Refinement> {
        self.refinements
            .get(name)
            .ok_or_else(|| Error::MissingIngredient(format!("refinement `{name}`")))
    }

    pub(crate) fn require_prediction(&self, name: &str) -> Result<()> {
        if self.dataset.has_prediction(name) {
            Ok(())
        } else {
            Err(Error::MissingIngredient(format!("prediction `{name}`")))
        }
    }

    /// The per-level residuals behind a quantity: the level map of map
    /// quantities, the per-decision gaps of decision calibration, and `None`
    /// for scalars.
    pub fn level_map(&self, quantity: &Quantity) -> Result<Option<LevelResidualMap>> {
        if let Quantity::Decision { prediction, loss } = quantity {
            let l = self.loss(loss)?;
            let dc = decision_calibration(&self.dataset, prediction, &[(l.clone(), self.grid(loss)?.to_vec())])?;
            return Ok(dc.into_values().next().map(|d| d.per_decision));
        }
        quantity::level_map(self, &self.dataset, quantity)
    }

    /// The same ingredients on a subset of the records.
    pub fn restricted(&self, keep: impl Fn(&Record) -> bool) -> Result<Scenario> {
        let mut out = self.clone();
        out.dataset = self.dataset.subset(keep)?;
        out.expected.clear();
        Ok(out)
    }

    /// Computes a quantity through the calibration metrics.
    pub fn evaluate(&self, quantity: &Quantity) -> Result<f64> {
        quantity::evaluate(self, &self.dataset, quantity)
    }

    /// Evaluates every expectation.
    pub fn check_expectations(&self) -> Result<Vec<ExpectationCheck>> {
        self.expected
            .iter()
            .map(|e| {
                let computed = self.evaluate(&e.quantity)?;
                Ok(ExpectationCheck {
                    expectation: e.clone(),
                    computed,
                    pass: (computed - e.value).abs() <= e.tolerance,
                })
            })
            .collect()
    }
}
