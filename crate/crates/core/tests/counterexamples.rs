use calib_atlas::error::Error;
use calib_atlas::verify::{
    cost_parity_construction, cost_parity_q, counterexample_half_predictor, counterexample_mean_variance,
    counterexample_mean_variance_weighted, Quantity,
};

fn value(scn: &calib_atlas::verify::Scenario, token: &str) -> f64 {
    scn.evaluate(&token.parse::<Quantity>().unwrap()).unwrap()
}

#[test]
fn half_predictor_separates_decision_from_vanilla() {
    for (p_bar, gap) in [(0.8, 0.3), (0.2, 0.3), (0.5, 0.0), (0.65, 0.15)] {
        for n in [1, 2, 5] {
            let scn = counterexample_half_predictor(p_bar, n).unwrap();
            assert!(value(&scn, "decision(f,squared)") <= 1e-12);
            assert!((value(&scn, "vanilla(p)") - gap).abs() <= 1e-12, "{p_bar} {n}");
            assert!(scn.check_expectations().unwrap().iter().all(|c| c.pass));
        }
    }
    assert!(matches!(counterexample_half_predictor(1.0, 3), Err(Error::BadParam(_))));
    assert!(matches!(counterexample_half_predictor(0.8, 0), Err(Error::BadParam(_))));
}

#[test]
fn mean_variance_worked_example() {
    let scn = counterexample_mean_variance(1.25, 4).unwrap();
    assert!(value(&scn, "bre(f,g,squared)") <= 1e-9);
    assert!((value(&scn, "gamma(g,variance)@level=1.25") - 1.0).abs() <= 1e-9);
    assert!((value(&scn, "gamma(g,variance)@level=2.25") - 1.0).abs() <= 1e-9);
    assert!((value(&scn, "gamma(f,mean)") - 1.0).abs() <= 1e-9);
    assert!(scn.check_expectations().unwrap().iter().all(|c| c.pass));

    let skewed = counterexample_mean_variance_weighted(1.25, 4, [0.3, 0.7]).unwrap();
    assert!(value(&skewed, "bre(f,g,squared)") <= 1e-9);
}

#[test]
fn mean_variance_needs_a_feasible_grid() {
    // Mean 1 with second moment 1 forces a point mass at 1; mean 0 with
    // second moment 1 needs mass at ±1, which {0, 1} and {0, 1, 2} lack.
    assert!(matches!(counterexample_mean_variance(1.0, 2), Err(Error::Unrealizable(_))));
    assert!(matches!(counterexample_mean_variance(1.0, 3), Err(Error::Unrealizable(_))));
    let exact = counterexample_mean_variance(1.0, 4).unwrap();
    assert!(exact.check_expectations().unwrap().iter().all(|c| c.pass));
    assert!(matches!(counterexample_mean_variance(1.25, 1), Err(Error::BadParam(_))));
}

#[test]
fn cost_parity_example() {
    let q = cost_parity_q(0.6, 0.3);
    assert!((q - 3.0 / 7.0).abs() < 1e-15);
    for f in [0.32, 0.35, 0.40] {
        let scn = cost_parity_construction(0.6, 0.3, f).unwrap();
        let expected = (1.0 - q) * (f * 0.4 / (1.0 - f) - 0.3).abs();
        assert!(expected > 0.0);
        assert!(value(&scn, "vanilla(p)") <= 1e-12);
        assert!((value(&scn, "bayes_risk(simple_c)") - 6.0 / 35.0).abs() <= 1e-12);
        assert!((value(&scn, "bayes_risk(simple_d)") - 6.0 / 35.0).abs() <= 1e-12);
        assert!((value(&scn, "cost_gap(f,simple_c,simple_d)") - expected).abs() <= 1e-12);
    }
    // Frozen gaps: (4/7)(0.3 − 0.4f/(1 − f)).
    let frozen = [(0.32, 0.06386554621848738), (0.35, 0.04835164835164835), (0.40, 0.01904761904761901)];
    for (f, g) in frozen {
        let scn = cost_parity_construction(0.6, 0.3, f).unwrap();
        assert!((value(&scn, "cost_gap(f,simple_c,simple_d)") - g).abs() < 1e-13, "{f}");
    }
    let near = cost_parity_construction(0.6, 0.3, q - 1e-9).unwrap();
    assert!(value(&near, "cost_gap(f,simple_c,simple_d)") < 1e-8);
    assert!(matches!(cost_parity_construction(0.6, 0.3, 0.5), Err(Error::BadParam(_))));
    assert!(matches!(cost_parity_construction(0.3, 0.6, 0.4), Err(Error::BadParam(_))));
}
