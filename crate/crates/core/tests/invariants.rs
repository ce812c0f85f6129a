use calib_atlas::losses::{squared_loss, zero_one_loss};
use calib_atlas::outcomes::{OutcomeSpace, Pmf, PredictionDataset, Record};
use calib_atlas::properties::{make_standard_property, PropertyValue, StandardKind};
use calib_atlas::verify::{Quantity, Scenario};
use proptest::prelude::*;

fn masses(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n)
}

/// Each input predicts `f_i` and its outcomes are weighted by `f_i` itself,
/// so the predictor is calibrated for every property and loss.
fn self_calibrated(preds: &[Vec<f64>], weights: &[f64], scale: f64) -> Scenario {
    let space = OutcomeSpace::numeric(&[0.0, 1.0, 2.0]).unwrap();
    let mut records = Vec::new();
    for (i, (m, w)) in preds.iter().zip(weights).enumerate() {
        let f = Pmf::from_masses(&space, m).unwrap();
        let mean = f.mean().unwrap();
        for y in 0..3 {
            records.push(
                Record::new(format!("x{i}"), y, scale * w * f.prob(y))
                    .with_pmf("f", f.clone())
                    .with_real("m", mean),
            );
        }
    }
    let ds = PredictionDataset::new(&space, records).unwrap();
    let grid: Vec<PropertyValue> = (0..=20).map(|k| PropertyValue::Real(k as f64 / 10.0)).collect();
    Scenario::new("self", ds)
        .with_property("mean", make_standard_property(&space, &StandardKind::Mean).unwrap())
        .with_property("mode", make_standard_property(&space, &StandardKind::Mode).unwrap())
        .with_property("full", make_standard_property(&space, &StandardKind::FullDistribution).unwrap())
        .with_loss("squared", squared_loss(&space, 1.0).unwrap().with_default_grid(grid))
        .with_loss("zero_one", zero_one_loss(&space))
}

fn value(scn: &Scenario, token: &str) -> f64 {
    scn.evaluate(&token.parse::<Quantity>().unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn self_calibrated_predictors_have_no_residuals(
        preds in prop::collection::vec(masses(3), 1..6),
        weights in prop::collection::vec(0.1f64..3.0, 6),
    ) {
        let scn = self_calibrated(&preds, &weights, 1.0);
        for token in [
            "distribution(f,full)",
            "distribution(f,mode)",
            "gamma(m,mean)",
            "decision(f,squared)",
            "decision(f,zero_one)",
        ] {
            prop_assert!(value(&scn, token) <= 1e-12, "{token} = {}", value(&scn, token));
        }
    }

    #[test]
    fn residuals_ignore_weight_scale(
        preds in prop::collection::vec(masses(3), 1..6),
        weights in prop::collection::vec(0.1f64..3.0, 6),
        scale in 0.01f64..100.0,
        skew in masses(3),
    ) {
        // Reweight outcomes so the predictor is miscalibrated, then rescale.
        let skewed: Vec<Vec<f64>> = preds.iter().map(|m| m.iter().zip(&skew).map(|(a, b)| a * b).collect()).collect();
        let base = self_calibrated(&skewed, &weights, 1.0);
        let scaled = self_calibrated(&skewed, &weights, scale);
        for token in ["distribution(f,full)", "swap(m,squared)", "decision(f,zero_one)"] {
            let (a, b) = (value(&base, token), value(&scaled, token));
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{token}: {a} vs {b}");
        }
    }

    #[test]
    fn swap_regret_is_nonnegative(
        preds in prop::collection::vec(masses(3), 1..6),
        weights in prop::collection::vec(0.1f64..3.0, 6),
        skew in masses(3),
    ) {
        let skewed: Vec<Vec<f64>> = preds.iter().map(|m| m.iter().zip(&skew).map(|(a, b)| a * b).collect()).collect();
        let scn = self_calibrated(&skewed, &weights, 1.0);
        let map = scn.level_map(&"swap(m,squared)".parse::<Quantity>().unwrap()).unwrap().unwrap();
        for e in &map.entries {
            prop_assert!(e.residual >= 0.0);
            prop_assert!(e.residual <= 4.0);
        }
    }
}
