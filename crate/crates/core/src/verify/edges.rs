//! The implications between calibration notions, each checked on a scenario
//! with the constants of its bound.

use std::fmt;
use std::str::FromStr;

use crate::calib_metrics::{
    aggregate, bayes_risk_estimation_residual, decision_calibration, distribution_calibration,
    gamma_calibration, swap_regret, vanilla_calibration, Aggregation, LevelResidualMap,
};
use crate::error::{Error, Result};
use crate::losses::{
    best_response, expected_loss, loss_from_identification, make_bayes_pair, make_simple_loss,
};
use crate::outcomes::PredictionDataset;
use crate::properties::{make_standard_property, PropertyValue, StandardKind};

use super::Scenario;

/// Hypothesis residuals at or below this count as met.
pub const HYPOTHESIS_TOL: f64 = 1e-9;
/// Allowance added to every bound before comparing it with a residual.
pub const CONCLUSION_TOL: f64 = 1e-9;
/// Residual below which the binary equivalence treats a metric as zero.
const EQUIVALENCE_TOL: f64 = 1e-12;
/// Name of the prediction column derived during a check.
const DERIVED: &str = "__derived";
const DERIVED_RISK: &str = "__derived_risk";

/// One arrow of the map of calibration notions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ImplicationEdge {
    /// Distribution calibration w.r.t. `Γ` gives `Γ`-calibration of `Γ ∘ f`.
    DistImpliesGamma,
    /// `α`-distribution calibration gives `|Y|·K·α`-approximate `Γ`-calibration.
    DistImpliesGammaApprox,
    /// Distribution calibration w.r.t. `Φ_ℓ` gives decision calibration for `ℓ`.
    DistImpliesDecision,
    /// `α`-distribution calibration gives `C·E[α]`-decision calibration.
    DistImpliesDecisionApprox,
    /// `N/2·α² ≤ swap regret ≤ M/2·α²` per level.
    GammaIffSwap,
    /// `Γ`-calibration carries over to `φ ∘ Γ`; with Lipschitz `φ` the error
    /// grows by at most `K`.
    GammaInherited,
    /// Distribution calibration carries over to refined properties.
    DistInherited,
    /// Swap regret of `φ ∘ f` is at most `2B·E[α | φ ∘ f = v]`.
    SwapForRefined,
    /// Decision calibration `β` makes `(Φ_ℓ ∘ f, Θ_ℓ ∘ f)` `β`-precise.
    DecisionImpliesBayes,
    /// Bayes-risk calibration of `(g, h)` bounds the risk-estimation error.
    SelfrealImpliesPrecise,
    /// On `{0, 1}`, vanilla calibration holds iff decision calibration holds
    /// for every simple loss.
    DecisionEquivVanillaBinary,
}

impl ImplicationEdge {
    pub const ALL: [ImplicationEdge; 11] = [
        ImplicationEdge::DistImpliesGamma,
        ImplicationEdge::DistImpliesGammaApprox,
        ImplicationEdge::DistImpliesDecision,
        ImplicationEdge::DistImpliesDecisionApprox,
        ImplicationEdge::GammaIffSwap,
        ImplicationEdge::GammaInherited,
        ImplicationEdge::DistInherited,
        ImplicationEdge::SwapForRefined,
        ImplicationEdge::DecisionImpliesBayes,
        ImplicationEdge::SelfrealImpliesPrecise,
        ImplicationEdge::DecisionEquivVanillaBinary,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ImplicationEdge::DistImpliesGamma => "dist_implies_gamma",
            ImplicationEdge::DistImpliesGammaApprox => "dist_implies_gamma_approx",
            ImplicationEdge::DistImpliesDecision => "dist_implies_decision",
            ImplicationEdge::DistImpliesDecisionApprox => "dist_implies_decision_approx",
            ImplicationEdge::GammaIffSwap => "gamma_iff_swap",
            ImplicationEdge::GammaInherited => "gamma_inherited",
            ImplicationEdge::DistInherited => "dist_inherited",
            ImplicationEdge::SwapForRefined => "swap_for_refined",
            ImplicationEdge::DecisionImpliesBayes => "decision_implies_bayes",
            ImplicationEdge::SelfrealImpliesPrecise => "selfreal_implies_precise",
            ImplicationEdge::DecisionEquivVanillaBinary => "decision_equiv_vanilla_binary",
        }
    }

    /// Scenario ingredients the check reads.
    pub fn requirements(&self) -> &'static str {
        match self {
            ImplicationEdge::DistImpliesGamma | ImplicationEdge::DistImpliesGammaApprox => {
                "distributional prediction `f`, property `gamma`"
            }
            ImplicationEdge::DistImpliesDecision
            | ImplicationEdge::DistImpliesDecisionApprox
            | ImplicationEdge::SwapForRefined
            | ImplicationEdge::DecisionImpliesBayes => "distributional prediction `f`, loss `loss` with grid",
            ImplicationEdge::GammaIffSwap => "prediction `gamma`, property `gamma`, identification `v`",
            ImplicationEdge::GammaInherited => "prediction `gamma`, property `gamma`, refinement `phi`",
            ImplicationEdge::DistInherited => "distributional prediction `f`, property `gamma`, refinement `phi`",
            ImplicationEdge::SelfrealImpliesPrecise => "predictions `g` and `h`, loss `loss` with grid",
            ImplicationEdge::DecisionEquivVanillaBinary => {
                "binary space, real prediction `p`, distributional prediction `f`"
            }
        }
    }
}

impl fmt::Display for ImplicationEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ImplicationEdge {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::BadParam(format!("unknown implication edge `{s}`")))
    }
}

/// Knobs for fault injection.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeOptions {
    /// Added to every bound (and subtracted from two-sided lower bounds).
    pub bound_offset: f64,
}

/// Result of one edge check.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeOutcome {
    pub edge: ImplicationEdge,
    pub hypothesis_met: bool,
    /// Largest hypothesis residual (0 when the hypothesis is structural).
    pub hypothesis_residual: f64,
    /// Conclusion residual and bound at the tightest level.
    pub conclusion_residual: f64,
    pub bound: f64,
    pub conclusion_holds: bool,
    /// `bound + CONCLUSION_TOL − residual` at the tightest level.
    pub slack: f64,
}

impl EdgeOutcome {
    pub fn passed(&self) -> bool {
        self.hypothesis_met && self.conclusion_holds
    }
}

/// Tracks the tightest `(residual, bound)` pair.
struct Tightest {
    residual: f64,
    bound: f64,
    slack: f64,
    offset: f64,
}

impl Tightest {
    fn new(offset: f64) -> Self {
        Self {
            residual: 0.0,
            bound: 0.0,
            slack: f64::INFINITY,
            offset,
        }
    }

    fn push(&mut self, residual: f64, bound: f64) {
        let bound = bound + self.offset;
        let slack = bound + CONCLUSION_TOL - residual;
        if slack < self.slack {
            *self = Self {
                residual,
                bound,
                slack,
                offset: self.offset,
            };
        }
    }

    /// A two-sided check `lower ≤ residual ≤ upper`.
    fn push_between(&mut self, residual: f64, lower: f64, upper: f64) {
        let (lower, upper) = (lower - self.offset, upper + self.offset);
        let slack = (residual - lower).min(upper - residual) + CONCLUSION_TOL;
        if slack < self.slack {
            let bound = if residual - lower < upper - residual { lower } else { upper };
            self.residual = residual;
            self.bound = bound;
            self.slack = slack;
        }
    }

    fn finish(self, edge: ImplicationEdge, hypothesis_met: bool, hypothesis_residual: f64) -> EdgeOutcome {
        let slack = if self.slack.is_finite() { self.slack } else { CONCLUSION_TOL };
        EdgeOutcome {
            edge,
            hypothesis_met,
            hypothesis_residual,
            conclusion_residual: self.residual,
            bound: self.bound,
            conclusion_holds: slack >= 0.0,
            slack,
        }
    }
}

/// Checks one edge with the bound as stated.
pub fn check_edge(edge: ImplicationEdge, scenario: &Scenario) -> Result<EdgeOutcome> {
    check_edge_with(edge, scenario, EdgeOptions::default())
}

/// [`check_edge`] with fault-injection options.
pub fn check_edge_with(edge: ImplicationEdge, scenario: &Scenario, options: EdgeOptions) -> Result<EdgeOutcome> {
    let mut t = Tightest::new(options.bound_offset);
    let (met, hyp) = match edge {
        ImplicationEdge::DistImpliesGamma | ImplicationEdge::DistImpliesGammaApprox => {
            dist_implies_gamma(scenario, edge == ImplicationEdge::DistImpliesGammaApprox, &mut t)?
        }
        ImplicationEdge::DistImpliesDecision | ImplicationEdge::DistImpliesDecisionApprox => {
            dist_implies_decision(scenario, edge == ImplicationEdge::DistImpliesDecisionApprox, &mut t)?
        }
        ImplicationEdge::GammaIffSwap => gamma_iff_swap(scenario, &mut t)?,
        ImplicationEdge::GammaInherited => gamma_inherited(scenario, &mut t)?,
        ImplicationEdge::DistInherited => dist_inherited(scenario, &mut t)?,
        ImplicationEdge::SwapForRefined => swap_for_refined(scenario, &mut t)?,
        ImplicationEdge::DecisionImpliesBayes => decision_implies_bayes(scenario, &mut t)?,
        ImplicationEdge::SelfrealImpliesPrecise => selfreal_implies_precise(scenario, &mut t)?,
        ImplicationEdge::DecisionEquivVanillaBinary => decision_equiv_vanilla(scenario, &mut t)?,
    };
    Ok(t.finish(edge, met, hyp))
}

fn find_entry<'a>(map: &'a LevelResidualMap, level: &PropertyValue) -> Result<&'a crate::calib_metrics::LevelEntry> {
    map.entries
        .iter()
        .find(|e| e.level.same_level(level))
        .ok_or_else(|| Error::EmptyEvent(format!("{} at level {level}", map.metric_name)))
}

fn dist_implies_gamma(scn: &Scenario, approx: bool, t: &mut Tightest) -> Result<(bool, f64)> {
    scn.require_prediction("f")?;
    let gamma = scn.property("gamma")?;
    let convex = gamma.convex_level_sets() == Some(true);
    let hyp = distribution_calibration(&scn.dataset, "f", gamma)?;
    let derived = scn
        .dataset
        .with_derived(DERIVED, |r| gamma.evaluate(r.pmf_prediction("f")?))?;
    let concl = gamma_calibration(&derived, DERIVED, gamma)?;
    if approx {
        let k = gamma
            .lipschitz()
            .ok_or_else(|| Error::MissingIngredient("Lipschitz constant of property `gamma`".into()))?;
        let n = scn.dataset.space().len() as f64;
        for e in &concl.entries {
            let alpha = find_entry(&hyp, &e.level)?.residual;
            t.push(e.residual, n * k * alpha);
        }
        Ok((convex, hyp.max_residual()))
    } else {
        for e in &concl.entries {
            t.push(e.residual, 0.0);
        }
        let h = hyp.max_residual();
        Ok((convex && h <= HYPOTHESIS_TOL, h))
    }
}

fn dist_implies_decision(scn: &Scenario, approx: bool, t: &mut Tightest) -> Result<(bool, f64)> {
    scn.require_prediction("f")?;
    let loss = scn.loss("loss")?;
    let grid = scn.grid("loss")?;
    let pair = make_bayes_pair(loss, grid)?;
    let hyp = distribution_calibration(&scn.dataset, "f", &pair.phi)?;
    let dc = decision_calibration(&scn.dataset, "f", &[(loss.clone(), grid.to_vec())])?;
    let beta = dc[loss.name()].beta.abs;
    if approx {
        let c = loss.bound_on(grid)?;
        t.push(beta, c * aggregate(&hyp, Aggregation::Expected)?);
        Ok((true, hyp.max_residual()))
    } else {
        t.push(beta, 0.0);
        let h = hyp.max_residual();
        Ok((h <= HYPOTHESIS_TOL, h))
    }
}

fn gamma_iff_swap(scn: &Scenario, t: &mut Tightest) -> Result<(bool, f64)> {
    scn.require_prediction("gamma")?;
    let gamma = scn.property("gamma")?;
    let v = scn.identification("v")?;
    let missing = |what: &str| Error::MissingIngredient(format!("{what} of identification `v`"));
    let n = v.nonconstant_n().ok_or_else(|| missing("constant N"))?;
    let m = v.lipschitz_m().ok_or_else(|| missing("constant M"))?;
    let loss = loss_from_identification(v, 0.0, None, 64)?;
    let cal = gamma_calibration(&scn.dataset, "gamma", gamma)?;
    // The best response over the reals is the level's own property value.
    let mut grid = Vec::new();
    for e in &cal.entries {
        let observed = e
            .observed
            .ok_or_else(|| Error::BadParam("property `gamma` must be real-valued".into()))?;
        grid.push(PropertyValue::Real(observed));
        grid.push(e.level.clone());
    }
    let swap = swap_regret(&scn.dataset, "gamma", &loss, &grid)?;
    for (c, s) in cal.entries.iter().zip(&swap.entries) {
        let alpha = c.residual;
        let beta = s.signed.unwrap_or(s.residual);
        t.push_between(beta, 0.5 * n * alpha * alpha, 0.5 * m * alpha * alpha);
    }
    Ok((v.oriented(), cal.max_residual()))
}

fn gamma_inherited(scn: &Scenario, t: &mut Tightest) -> Result<(bool, f64)> {
    scn.require_prediction("gamma")?;
    let gamma = scn.property("gamma")?;
    let phi = scn.refinement("phi")?;
    let refined = phi.refine(gamma)?;
    let base = gamma_calibration(&scn.dataset, "gamma", gamma)?;
    let derived = scn.dataset.with_derived(DERIVED, |r| phi.apply(r.prediction("gamma")?))?;
    let concl = gamma_calibration(&derived, DERIVED, &refined)?;
    let hyp = base.max_residual();
    for e in &concl.entries {
        let mut alpha: f64 = 0.0;
        for b in &base.entries {
            if phi.apply(&b.level)?.same_level(&e.level) {
                alpha = alpha.max(b.residual);
            }
        }
        match phi.lipschitz {
            Some(k) => t.push(e.residual, k * alpha),
            None => t.push(e.residual, 0.0),
        }
    }
    let met = phi.convex_level_sets && (phi.lipschitz.is_some() || hyp <= HYPOTHESIS_TOL);
    Ok((met, hyp))
}

fn dist_inherited(scn: &Scenario, t: &mut Tightest) -> Result<(bool, f64)> {
    scn.require_prediction("f")?;
    let gamma = scn.property("gamma")?;
    let phi = scn.refinement("phi")?;
    let refined = phi.refine(gamma)?;
    let base = distribution_calibration(&scn.dataset, "f", gamma)?;
    let concl = distribution_calibration(&scn.dataset, "f", &refined)?;
    for e in &concl.entries {
        let mut alpha: f64 = 0.0;
        for b in &base.entries {
            if phi.apply(&b.level)?.same_level(&e.level) {
                alpha = alpha.max(b.residual);
            }
        }
        t.push(e.residual, alpha);
    }
    Ok((true, base.max_residual()))
}

fn swap_for_refined(scn: &Scenario, t: &mut Tightest) -> Result<(bool, f64)> {
    scn.require_prediction("f")?;
    let loss = scn.loss("loss")?;
    let grid = scn.grid("loss")?;
    let full = make_standard_property(scn.dataset.space(), &StandardKind::FullDistribution)?;
    let pair = make_bayes_pair(loss, grid)?;
    let mut b: f64 = 0.0;
    for v in grid {
        b = b.max(loss.oscillation(v)?);
    }
    let base = gamma_calibration(&scn.dataset, "f", &full)?;
    let derived = scn
        .dataset
        .with_derived(DERIVED, |r| pair.phi.evaluate(r.pmf_prediction("f")?))?;
    let swap = swap_regret(&derived, DERIVED, loss, grid)?;
    for e in &swap.entries {
        let (mut mass, mut weighted) = (0.0, 0.0);
        for g in &base.entries {
            if pair.phi.evaluate(g.level.as_pmf()?)?.same_level(&e.level) {
                mass += g.weight;
                weighted += g.weight * g.residual;
            }
        }
        let conditional = if mass > 0.0 { weighted / mass } else { 0.0 };
        t.push(e.residual, 2.0 * b * conditional);
    }
    Ok((true, base.max_residual()))
}

fn decision_implies_bayes(scn: &Scenario, t: &mut Tightest) -> Result<(bool, f64)> {
    scn.require_prediction("f")?;
    let loss = scn.loss("loss")?;
    let grid = scn.grid("loss")?;
    let pair = make_bayes_pair(loss, grid)?;
    let dc = decision_calibration(&scn.dataset, "f", &[(loss.clone(), grid.to_vec())])?;
    let beta = dc[loss.name()].beta.abs;
    let derived = scn
        .dataset
        .with_derived(DERIVED, |r| pair.phi.evaluate(r.pmf_prediction("f")?))?
        .with_derived(DERIVED_RISK, |r| pair.theta.evaluate(r.pmf_prediction("f")?))?;
    let bre = bayes_risk_estimation_residual(&derived, DERIVED, DERIVED_RISK, loss)?;
    t.push(bre.abs, beta);
    Ok((true, beta))
}

/// Records grouped by the joint value of two predictions.
fn joint_levels(ds: &PredictionDataset, a: &str, b: &str) -> Result<Vec<(PropertyValue, PropertyValue, Vec<usize>)>> {
    let mut levels: Vec<(PropertyValue, PropertyValue, Vec<usize>)> = Vec::new();
    for (i, r) in ds.records().iter().enumerate() {
        let (va, vb) = (r.prediction(a)?, r.prediction(b)?);
        match levels
            .iter_mut()
            .find(|(x, y, _)| x.same_level(va) && y.same_level(vb))
        {
            Some(level) => level.2.push(i),
            None => levels.push((va.clone(), vb.clone(), vec![i])),
        }
    }
    Ok(levels)
}

fn selfreal_implies_precise(scn: &Scenario, t: &mut Tightest) -> Result<(bool, f64)> {
    scn.require_prediction("g")?;
    scn.require_prediction("h")?;
    let loss = scn.loss("loss")?;
    let grid = scn.grid("loss")?;
    let ds = &scn.dataset;
    let (mut hyp, mut bound): (f64, f64) = (0.0, 0.0);
    for (g, h, members) in joint_levels(ds, "g", "h")? {
        let (pooled, weight) = ds.conditional_of(&members)?;
        let theta = best_response(loss, &pooled, grid)?.1;
        let incurred = expected_loss(loss, &pooled, &g)?;
        hyp = hyp.max(incurred - theta);
        bound += weight / ds.total_weight() * (theta - h.as_real()?).abs();
    }
    let bre = bayes_risk_estimation_residual(ds, "g", "h", loss)?;
    t.push(bre.abs, bound);
    Ok((hyp <= HYPOTHESIS_TOL, hyp))
}

/// Predicted values, their midpoints and the endpoints 0 and 1.
pub(crate) fn threshold_grid(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.to_vec();
    v.extend([0.0, 1.0]);
    v.sort_by(f64::total_cmp);
    v.dedup();
    let mids: Vec<f64> = v.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
    v.extend(mids);
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn decision_equiv_vanilla(scn: &Scenario, t: &mut Tightest) -> Result<(bool, f64)> {
    scn.require_prediction("p")?;
    scn.require_prediction("f")?;
    let ds = &scn.dataset;
    let mut hyp: f64 = 0.0;
    let mut values = Vec::new();
    for r in ds.records() {
        let p = r.prediction("p")?.as_real()?;
        hyp = hyp.max((r.pmf_prediction("f")?.prob(1) - p).abs());
        values.push(p);
    }
    let vanilla_ok = vanilla_calibration(ds, "p")?.max_residual() <= EQUIVALENCE_TOL;
    let mut losses = Vec::new();
    for q in threshold_grid(&values) {
        let (loss, _) = make_simple_loss(ds.space(), q)?;
        let grid = loss.default_grid().map(<[PropertyValue]>::to_vec).unwrap_or_default();
        losses.push((loss, grid));
    }
    let dc = decision_calibration(ds, "f", &losses)?;
    let decision_ok = dc.values().all(|d| d.beta.abs <= EQUIVALENCE_TOL);
    t.push(if vanilla_ok == decision_ok { 0.0 } else { 1.0 }, 0.0);
    Ok((hyp <= HYPOTHESIS_TOL, hyp))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_names_round_trip() {
        for e in ImplicationEdge::ALL {
            assert_eq!(e.name().parse::<ImplicationEdge>().unwrap(), e);
        }
        assert!("dist_implies_everything".parse::<ImplicationEdge>().is_err());
    }

    #[test]
    fn threshold_grid_contains_values_midpoints_and_ends() {
        assert_eq!(threshold_grid(&[0.5, 0.25, 0.5]), vec![0.0, 0.125, 0.25, 0.375, 0.5, 0.75, 1.0]);
    }
}
