//! Drives the verification suites and builds a deterministic manifest.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use calib_atlas::verify::{
    binary_oracle_scenario, brute_force_oracle, check_edge_with, cost_parity_construction, counterexample_half_predictor,
    counterexample_mean_variance, counterexample_mean_variance_weighted, generate_scenario, mean_sandwich_scenario,
    oracle_quantities, oracle_scenario, recover_distribution_calibration, recovery_scenario, EdgeOptions,
    ImplicationEdge, Scenario,
};
use serde_json::{json, Value};

use crate::report::num;

pub const SCENARIOS_PER_EDGE: u64 = 200;
pub const SANDWICH_SCENARIOS: u64 = 200;
pub const RECOVERY_SCENARIOS: u64 = 20;
pub const ORACLE_SCENARIOS: u64 = 100;
pub const ORACLE_TOL: f64 = 1e-12;
pub const RECOVERY_EPSILON: f64 = 0.05;
pub const PLANTED_SHIFT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Edges,
    Counterexamples,
    Oracles,
    All,
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Edges => "edges",
            Suite::Counterexamples => "counterexamples",
            Suite::Oracles => "oracles",
            Suite::All => "all",
        })
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "edges" => Ok(Suite::Edges),
            "counterexamples" => Ok(Suite::Counterexamples),
            "oracles" => Ok(Suite::Oracles),
            "all" => Ok(Suite::All),
            other => Err(format!("unknown suite `{other}` (edges, counterexamples, oracles, all)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct VerifyOptions {
    pub seed: u64,
    /// Added to every edge bound; negative values simulate a broken constant.
    pub bound_offset: f64,
}

#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub manifest: Value,
    pub passed: bool,
}

/// Scenario seeds of a run: disjoint blocks per run seed.
fn scenario_seed(run_seed: u64, k: u64) -> u64 {
    run_seed.wrapping_shl(20).wrapping_add(k)
}

/// Minimum, maximum and failure list over a family of scenarios.
#[derive(Default)]
struct Tally {
    count: u64,
    min_slack: Option<f64>,
    max_error: f64,
    failures: Vec<String>,
}

impl Tally {
    fn slack(&mut self, s: f64) {
        self.min_slack = Some(self.min_slack.map_or(s, |m| m.min(s)));
    }

    fn fail(&mut self, what: String) {
        self.failures.push(what);
    }

    fn entry(self, suite: &str, name: &str) -> Value {
        let verdict = if self.failures.is_empty() { "pass" } else { "fail" };
        let mut v = json!({
            "suite": suite,
            "name": name,
            "scenarios": self.count,
            "max_error": num(self.max_error),
            "failures": self.failures,
            "verdict": verdict,
        });
        if let Some(s) = self.min_slack {
            v["min_slack"] = num(s);
        }
        v
    }
}

fn expectations(scn: &Scenario, tally: &mut Tally) {
    match scn.check_expectations() {
        Ok(checks) => {
            for c in checks {
                tally.max_error = tally.max_error.max((c.computed - c.expectation.value).abs());
                if !c.pass {
                    tally.fail(format!(
                        "{}: {} = {} expected {}",
                        scn.name, c.expectation.quantity, c.computed, c.expectation.value
                    ));
                }
            }
        }
        Err(e) => tally.fail(format!("{}: {e}", scn.name)),
    }
}

fn edge_checks(opts: VerifyOptions) -> Vec<Value> {
    let mut out = Vec::new();
    for edge in ImplicationEdge::ALL {
        let mut tally = Tally::default();
        for k in 0..SCENARIOS_PER_EDGE {
            tally.count += 1;
            let scn = match generate_scenario(edge, scenario_seed(opts.seed, k)) {
                Ok(s) => s,
                Err(e) => {
                    tally.fail(format!("{edge} #{k}: {e}"));
                    continue;
                }
            };
            match check_edge_with(edge, &scn, EdgeOptions { bound_offset: opts.bound_offset }) {
                Ok(o) => {
                    tally.slack(o.slack);
                    if !o.hypothesis_met {
                        tally.fail(format!("{}: hypothesis residual {}", scn.name, o.hypothesis_residual));
                    } else if !o.conclusion_holds || o.slack < 0.0 {
                        tally.fail(format!("{}: residual {} exceeds bound {}", scn.name, o.conclusion_residual, o.bound));
                    }
                }
                Err(e) => tally.fail(format!("{}: {e}", scn.name)),
            }
            expectations(&scn, &mut tally);
        }
        out.push(tally.entry("edges", edge.name()));
    }

    let mut sandwich = Tally::default();
    for k in 0..SANDWICH_SCENARIOS {
        sandwich.count += 1;
        match mean_sandwich_scenario(scenario_seed(opts.seed, k)) {
            Ok(scn) => expectations(&scn, &mut sandwich),
            Err(e) => sandwich.fail(format!("mean_sandwich #{k}: {e}")),
        }
    }
    out.push(sandwich.entry("edges", "mean_sandwich"));

    let mut recovery = Tally::default();
    for k in 0..RECOVERY_SCENARIOS {
        recovery.count += 1;
        let seed = scenario_seed(opts.seed, k);
        if let Err(e) = recovery_trial(seed, &mut recovery) {
            recovery.fail(format!("recovery/seed={seed}: {e}"));
        }
    }
    out.push(recovery.entry("edges", "recovery"));
    out
}

fn recovery_trial(seed: u64, tally: &mut Tally) -> calib_atlas::error::Result<()> {
    let (clean, _) = recovery_scenario(seed, None)?;
    let out = recover_distribution_calibration(&clean, RECOVERY_EPSILON)?;
    if !out.recovered || out.points.iter().any(|p| p.flagged) {
        tally.fail(format!("{}: calibrated predictor not recovered", clean.name));
    }
    let (planted, target) = recovery_scenario(seed, Some(PLANTED_SHIFT))?;
    let out = recover_distribution_calibration(&planted, RECOVERY_EPSILON)?;
    let flagged: Vec<_> = out.points.iter().filter(|p| p.flagged).collect();
    let hit = flagged.len() == 1 && Some(&flagged[0].point) == target.as_ref();
    if let Some(p) = flagged.first() {
        tally.max_error = tally.max_error.max((p.recovered_residual - PLANTED_SHIFT).abs());
    }
    if !out.recovered || !hit {
        tally.fail(format!("{}: planted shift not isolated", planted.name));
    }
    Ok(())
}

fn counterexample_checks() -> Vec<Value> {
    let builds: Vec<(&str, calib_atlas::error::Result<Scenario>)> = vec![
        ("half_predictor(0.8)", counterexample_half_predictor(0.8, 4)),
        ("half_predictor(0.2)", counterexample_half_predictor(0.2, 4)),
        ("half_predictor(0.5)", counterexample_half_predictor(0.5, 4)),
        ("mean_variance(1.25)", counterexample_mean_variance(1.25, 4)),
        ("mean_variance(1.25,[0.3,0.7])", counterexample_mean_variance_weighted(1.25, 4, [0.3, 0.7])),
        ("cost_parity(0.6,0.3,0.32)", cost_parity_construction(0.6, 0.3, 0.32)),
        ("cost_parity(0.6,0.3,0.35)", cost_parity_construction(0.6, 0.3, 0.35)),
        ("cost_parity(0.6,0.3,0.40)", cost_parity_construction(0.6, 0.3, 0.40)),
    ];
    builds
        .into_iter()
        .map(|(name, scn)| {
            let checks = match scn.and_then(|s| s.check_expectations()) {
                Ok(c) => c,
                Err(e) => {
                    return json!({
                        "suite": "counterexamples",
                        "name": name,
                        "checks": [],
                        "error": e.to_string(),
                        "verdict": "fail",
                    })
                }
            };
            let all = checks.iter().all(|c| c.pass);
            let rows: Vec<Value> = checks
                .iter()
                .map(|c| {
                    json!({
                        "quantity": c.expectation.quantity.to_string(),
                        "expected": num(c.expectation.value),
                        "computed": num(c.computed),
                        "tolerance": num(c.expectation.tolerance),
                        "source": c.expectation.source,
                        "verdict": if c.pass { "pass" } else { "fail" },
                    })
                })
                .collect();
            json!({
                "suite": "counterexamples",
                "name": name,
                "checks": rows,
                "verdict": if all { "pass" } else { "fail" },
            })
        })
        .collect()
}

fn oracle_checks(opts: VerifyOptions) -> Vec<Value> {
    let mut tallies: BTreeMap<String, Tally> = BTreeMap::new();
    // The binary family guarantees vanilla calibration its full count.
    let builds = (0..ORACLE_SCENARIOS).flat_map(|k| {
        let seed = scenario_seed(opts.seed, k);
        [(k, oracle_scenario(seed)), (k, binary_oracle_scenario(seed))]
    });
    for (k, built) in builds {
        let scn = match built {
            Ok(s) => s,
            Err(e) => {
                tallies.entry("scenario".into()).or_default().fail(format!("oracle #{k}: {e}"));
                continue;
            }
        };
        for q in oracle_quantities(&scn) {
            let token = q.to_string();
            let head = token.split('(').next().unwrap_or_default().to_string();
            let tally = tallies.entry(head).or_default();
            tally.count += 1;
            match (scn.evaluate(&q), brute_force_oracle(&scn, &q)) {
                (Ok(a), Ok(b)) => {
                    let d = (a - b).abs();
                    tally.max_error = tally.max_error.max(d);
                    if !(d <= ORACLE_TOL) {
                        tally.fail(format!("{} {token}: {a} vs {b}", scn.name));
                    }
                }
                (Err(e), _) | (_, Err(e)) => tally.fail(format!("{} {token}: {e}", scn.name)),
            }
        }
    }
    tallies
        .into_iter()
        .map(|(head, t)| {
            let mut v = t.entry("oracles", &format!("oracle/{head}"));
            v["comparisons"] = v["scenarios"].take();
            v.as_object_mut().map(|m| m.remove("scenarios"));
            v
        })
        .collect()
}

/// Runs `suite` and returns the manifest.
pub fn run_verify(suite: Suite, opts: VerifyOptions) -> VerifyOutcome {
    let mut checks = Vec::new();
    if matches!(suite, Suite::Edges | Suite::All) {
        checks.extend(edge_checks(opts));
    }
    if matches!(suite, Suite::Counterexamples | Suite::All) {
        checks.extend(counterexample_checks());
    }
    if matches!(suite, Suite::Oracles | Suite::All) {
        checks.extend(oracle_checks(opts));
    }
    let failed = checks.iter().filter(|c| c["verdict"] != "pass").count();
    let mut provenance = json!({
        "tool": "calib-atlas",
        "version": env!("CARGO_PKG_VERSION"),
        "suite": suite.to_string(),
        "seed": opts.seed,
    });
    if opts.bound_offset != 0.0 {
        provenance["bound_offset"] = num(opts.bound_offset);
    }
    let manifest = json!({
        "provenance": provenance,
        "checks": checks,
        "summary": {
            "checks": checks.len(),
            "passed": checks.len() - failed,
            "failed": failed,
        },
    });
    VerifyOutcome { manifest, passed: failed == 0 }
}
