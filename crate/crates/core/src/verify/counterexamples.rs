//! Scenarios separating calibration notions, with exact record weights.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::losses::{make_simple_loss, squared_loss};
use crate::outcomes::{OutcomeSpace, Pmf, PredictionDataset, Record};
use crate::properties::{make_standard_property, PropertyValue, StandardKind};

use super::quantity::{Quantity, Reduction};
use super::Scenario;

/// Feasibility tolerance for the discretized moment constraints.
const MOMENT_TOL: f64 = 1e-10;
/// Largest embedding grid searched for moment-matching conditionals.
const MAX_GRID: usize = 100;

fn squared_on_unit_grid(space: &Arc<OutcomeSpace>) -> Result<crate::losses::LossFn> {
    let grid = (0..=100).map(|i| PropertyValue::Real(i as f64 / 100.0)).collect();
    Ok(squared_loss(space, 1.0)?.with_default_grid(grid))
}

/// A binary predictor that always says ½ while the outcome rates average
/// `p_bar`. Squared-loss decision calibration holds exactly; vanilla
/// calibration is off by `|p_bar − ½|`. `p_bar = ½` is accepted and gives the
/// degenerate, fully calibrated case.
pub fn counterexample_half_predictor(p_bar: f64, n_levels_x: usize) -> Result<Scenario> {
    if !(p_bar > 0.0 && p_bar < 1.0) {
        return Err(Error::BadParam(format!("base rate {p_bar} must lie in (0, 1)")));
    }
    if n_levels_x == 0 {
        return Err(Error::BadParam("need at least one input".into()));
    }
    let space = OutcomeSpace::binary();
    let half = Pmf::bernoulli(&space, 0.5)?;
    let spread = p_bar.min(1.0 - p_bar) / 2.0;
    let w = 1.0 / n_levels_x as f64;
    let mut records = Vec::new();
    for k in 0..n_levels_x {
        let rate = if n_levels_x == 1 {
            p_bar
        } else {
            p_bar + spread * (2.0 * k as f64 / (n_levels_x - 1) as f64 - 1.0)
        };
        for (y, mass) in [(0, 1.0 - rate), (1, rate)] {
            if mass > 0.0 {
                records.push(
                    Record::new(format!("x{k}"), y, w * mass)
                        .with_real("p", 0.5)
                        .with_pmf("f", half.clone()),
                );
            }
        }
    }
    let dataset = PredictionDataset::new(&space, records)?;
    Ok(Scenario::new(format!("half_predictor(p_bar={p_bar})"), dataset)
        .with_property("mean", make_standard_property(&space, &StandardKind::Mean)?)
        .with_loss("squared", squared_on_unit_grid(&space)?)
        .expect(Quantity::decision("f", "squared"), 0.0, 1e-12, "construction")
        .expect(Quantity::vanilla("p"), (p_bar - 0.5).abs(), 1e-12, "closed form"))
}

/// Integer embedding `{−⌊(n−2)/2⌋, …}` with `n` points; `n = 4` gives
/// `{−1, 0, 1, 2}`.
fn integer_grid(n: usize) -> Vec<f64> {
    let start = -((n.saturating_sub(2) / 2) as i64);
    (0..n as i64).map(|i| (start + i) as f64).collect()
}

/// All basic feasible solutions of `Σp = 1, Σp·e = m, Σp·e² = s, p ≥ 0`,
/// averaged. Supports have at most three points, so each candidate solves a
/// Vandermonde system in closed form.
fn match_moments(e: &[f64], m: f64, s: f64) -> Result<Vec<f64>> {
    let n = e.len();
    let mut solutions: Vec<Vec<f64>> = Vec::new();
    let mut consider = |support: &[usize], weights: &[f64]| {
        if weights.iter().any(|w| *w < -MOMENT_TOL || !w.is_finite()) {
            return;
        }
        let mut p = vec![0.0; n];
        for (&i, &w) in support.iter().zip(weights) {
            p[i] = w.max(0.0);
        }
        let moments = [
            p.iter().sum::<f64>() - 1.0,
            p.iter().zip(e).map(|(p, e)| p * e).sum::<f64>() - m,
            p.iter().zip(e).map(|(p, e)| p * e * e).sum::<f64>() - s,
        ];
        if moments.iter().all(|d| d.abs() <= MOMENT_TOL) && !solutions.contains(&p) {
            solutions.push(p);
        }
    };
    for i in 0..n {
        consider(&[i], &[1.0]);
        for j in i + 1..n {
            let wj = (m - e[i]) / (e[j] - e[i]);
            consider(&[i, j], &[1.0 - wj, wj]);
            for k in j + 1..n {
                let lagrange = |a: f64, b: f64, c: f64| (s - m * (b + c) + b * c) / ((a - b) * (a - c));
                consider(
                    &[i, j, k],
                    &[lagrange(e[i], e[j], e[k]), lagrange(e[j], e[i], e[k]), lagrange(e[k], e[i], e[j])],
                );
            }
        }
    }
    if solutions.is_empty() {
        return Err(Error::Unrealizable(format!(
            "no pmf on {e:?} has mean {m} and second moment {s}"
        )));
    }
    let count = solutions.len() as f64;
    let mut avg = vec![0.0; n];
    for p in &solutions {
        for (a, v) in avg.iter_mut().zip(p) {
            *a += v / count;
        }
    }
    Ok(avg)
}

/// Two inputs with swapped mean predictions `f = (0, 1)` and variance
/// predictions `g = (v, v + 1)`, whose outcome distributions have means 1 and
/// 0 and common second moment `v`. `(f, g)` estimates the squared-loss Bayes
/// risk exactly on average, yet neither `f` nor `g` is calibrated.
pub fn counterexample_mean_variance(v: f64, grid_size: usize) -> Result<Scenario> {
    counterexample_mean_variance_weighted(v, grid_size, [0.5, 0.5])
}

/// [`counterexample_mean_variance`] with input weights `weights`.
pub fn counterexample_mean_variance_weighted(v: f64, grid_size: usize, weights: [f64; 2]) -> Result<Scenario> {
    if !(2..=MAX_GRID).contains(&grid_size) {
        return Err(Error::BadParam(format!(
            "grid size {grid_size} must lie in [2, {MAX_GRID}]"
        )));
    }
    if !weights.iter().all(|w| *w > 0.0 && w.is_finite()) {
        return Err(Error::BadParam("input weights must be positive".into()));
    }
    let e = integer_grid(grid_size);
    let space = OutcomeSpace::numeric(&e)?;
    let conditionals = [match_moments(&e, 1.0, v)?, match_moments(&e, 0.0, v)?];
    let predictions = [(0.0, v), (1.0, v + 1.0)];
    let mut records = Vec::new();
    for (x, ((cond, (f, g)), w)) in conditionals.iter().zip(predictions).zip(weights).enumerate() {
        for (y, p) in cond.iter().enumerate() {
            if *p > 0.0 {
                records.push(
                    Record::new(format!("x{}", x + 1), y, w * p)
                        .with_real("f", f)
                        .with_real("g", g),
                );
            }
        }
    }
    let dataset = PredictionDataset::new(&space, records)?;
    let grid = e.iter().map(|v| PropertyValue::Real(*v)).collect();
    let gamma = Quantity::gamma;
    Ok(Scenario::new(format!("mean_variance(v={v})"), dataset)
        .with_property("mean", make_standard_property(&space, &StandardKind::Mean)?)
        .with_property("variance", make_standard_property(&space, &StandardKind::Variance)?)
        .with_loss("squared", squared_loss(&space, 1.0)?.with_default_grid(grid))
        .expect(
            Quantity::BayesRiskEstimation {
                decision: "f".into(),
                risk: "g".into(),
                loss: "squared".into(),
            },
            0.0,
            1e-9,
            "construction",
        )
        .expect(gamma("g", "variance", Reduction::Level(v)), 1.0, 1e-9, "closed form")
        .expect(gamma("g", "variance", Reduction::Level(v + 1.0)), 1.0, 1e-9, "closed form")
        .expect(gamma("f", "mean", Reduction::Level(0.0)), 1.0, 1e-9, "closed form")
        .expect(gamma("f", "mean", Reduction::Level(1.0)), 1.0, 1e-9, "closed form"))
}

/// The stationary positive rate `1 / ((1 − c)/d + 1)` at which the simple
/// losses `ℓ_c` and `ℓ_d` have equal Bayes risk.
pub fn cost_parity_q(c: f64, d: f64) -> f64 {
    1.0 / ((1.0 - c) / d + 1.0)
}

/// A calibrated binary predictor under a stationary outcome rate `q` that
/// serves two decision makers with equal Bayes risk very differently. The
/// prediction `f_mid` is issued on every negative and on a fraction
/// `x = (1 − q)f / (q(1 − f))` of positives; the remaining positives get 1.
pub fn cost_parity_construction(c: f64, d: f64, f_mid: f64) -> Result<Scenario> {
    if !(0.0 < d && d < c && c < 1.0) {
        return Err(Error::BadParam(format!("need 0 < d < c < 1, got c = {c}, d = {d}")));
    }
    let q = cost_parity_q(c, d);
    if !(d < f_mid && f_mid < q) {
        return Err(Error::BadParam(format!(
            "middle prediction {f_mid} must lie strictly between d = {d} and q = {q}"
        )));
    }
    let x = (1.0 - q) * f_mid / (q * (1.0 - f_mid));
    let space = OutcomeSpace::binary();
    let mid = Pmf::bernoulli(&space, f_mid)?;
    let one = Pmf::bernoulli(&space, 1.0)?;
    let records = vec![
        Record::new("negative", 0, 1.0 - q).with_real("p", f_mid).with_pmf("f", mid.clone()),
        Record::new("positive_mid", 1, q * x).with_real("p", f_mid).with_pmf("f", mid),
        Record::new("positive_one", 1, q * (1.0 - x)).with_real("p", 1.0).with_pmf("f", one),
    ];
    let dataset = PredictionDataset::new(&space, records)?;
    let (loss_c, _) = make_simple_loss(&space, c)?;
    let (loss_d, _) = make_simple_loss(&space, d)?;
    let gap = (1.0 - q) * (f_mid * (1.0 - c) / (1.0 - f_mid) - d).abs();
    let vanilla = Quantity::vanilla("p");
    Ok(Scenario::new(format!("cost_parity(c={c},d={d},f={f_mid})"), dataset)
        .with_loss("simple_c", loss_c)
        .with_loss("simple_d", loss_d)
        .expect(vanilla.clone(), 0.0, 1e-12, "construction")
        .expect(vanilla.reduced(Reduction::Level(f_mid)), 0.0, 1e-12, "construction")
        .expect(Quantity::BayesRisk { loss: "simple_c".into() }, (1.0 - c) * q, 1e-12, "closed form")
        .expect(Quantity::BayesRisk { loss: "simple_d".into() }, d * (1.0 - q), 1e-12, "closed form")
        .expect(
            Quantity::CostGap {
                prediction: "f".into(),
                loss_a: "simple_c".into(),
                loss_b: "simple_d".into(),
            },
            gap,
            1e-12,
            "closed form",
        ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_grid_matches_the_worked_example() {
        assert_eq!(integer_grid(4), vec![-1.0, 0.0, 1.0, 2.0]);
        assert_eq!(integer_grid(2), vec![0.0, 1.0]);
    }

    #[test]
    fn moment_matching_is_feasible_and_exact() {
        let e = integer_grid(4);
        for (m, s) in [(1.0, 1.25), (0.0, 1.25), (1.0, 1.0), (0.0, 1.0)] {
            let p = match_moments(&e, m, s).unwrap();
            assert!(p.iter().all(|v| *v >= 0.0));
            let mean: f64 = p.iter().zip(&e).map(|(p, e)| p * e).sum();
            let second: f64 = p.iter().zip(&e).map(|(p, e)| p * e * e).sum();
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((mean - m).abs() < 1e-12 && (second - s).abs() < 1e-12);
        }
        // Mean 0 with second moment 1.25 is impossible on {0, 1, 2}.
        assert!(matches!(match_moments(&integer_grid(3), 0.0, 1.25), Err(Error::Unrealizable(_))));
    }

    #[test]
    fn parameter_checks() {
        assert!(counterexample_half_predictor(1.0, 3).is_err());
        assert!(counterexample_half_predictor(0.8, 0).is_err());
        assert!(cost_parity_construction(0.3, 0.6, 0.4).is_err());
        assert!(cost_parity_construction(0.6, 0.3, 0.45).is_err());
        assert!(counterexample_mean_variance(1.25, 1).is_err());
    }
}
