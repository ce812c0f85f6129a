//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Each check recomputes its target from first principles rather
//! than reading the expectations a generator attached to its scenario.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;

use calib_atlas::losses::{
    estimate_identification_regularity, make_simple_loss, IdentificationFn,
};
use calib_atlas::outcomes::{OutcomeSpace, Pmf, PredictionDataset, Record};
use calib_atlas::properties::{make_standard_property, StandardKind};
use calib_atlas::verify::{
    binary_oracle_scenario, brute_force_oracle, check_edge, cost_parity_construction, cost_parity_q, counterexample_half_predictor,
    counterexample_mean_variance, generate_scenario, mean_sandwich_scenario, oracle_quantities, oracle_scenario,
    recover_distribution_calibration, recovery_scenario, ImplicationEdge, Quantity, Reduction, Scenario,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn eval(scn: &Scenario, token: &str) -> Result<f64, String> {
    let q: Quantity = token.parse().map_err(|e| format!("{token}: {e}"))?;
    scn.evaluate(&q).map_err(|e| format!("{} {token}: {e}", scn.name))
}

const ALPHAS: [f64; 4] = [0.01, 0.05, 0.1, 0.2];

fn mean_sandwich() -> Outcome {
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut worst: f64 = 0.0;
    for seed in 0..200 {
        let scn = mean_sandwich_scenario(seed).map_err(|e| format!("seed {seed}: {e}"))?;
        let offsets = scn
            .level_map(&Quantity::gamma("gamma", "gamma", Reduction::Sup))
            .map_err(|e| e.to_string())?
            .ok_or("no level map")?;
        for loss in ["squared", "induced"] {
            let swap = Quantity::Swap { prediction: "gamma".into(), loss: loss.into(), reduce: Reduction::Sup };
            let swaps = scn.level_map(&swap).map_err(|e| e.to_string())?.ok_or("no level map")?;
            ensure(swaps.entries.len() == offsets.entries.len(), || format!("{}: level count", scn.name))?;
            for e in &swaps.entries {
                // The mean of each level's pooled outcome, recomputed here.
                let level = e.level.as_real().map_err(|e| e.to_string())?;
                let members: Vec<&Record> = scn
                    .dataset
                    .records()
                    .iter()
                    .filter(|r| r.prediction("gamma").ok().and_then(|v| v.as_real().ok()) == Some(level))
                    .collect();
                let w: f64 = members.iter().map(|r| r.weight).sum();
                let emb = scn.dataset.space().embedding().ok_or("no embedding")?;
                let mu = members.iter().map(|r| r.weight * emb[r.y]).sum::<f64>() / w;
                let alpha = (level - mu).abs();
                let planted = ALPHAS
                    .iter()
                    .copied()
                    .find(|a| (a - alpha).abs() <= 1e-9)
                    .ok_or_else(|| format!("{}: offset {alpha} not planted", scn.name))?;
                *seen.entry(format!("{planted}")).or_default() += 1;
                let err = (e.residual - planted * planted / 2.0).abs();
                worst = worst.max(err);
                ensure(err <= 1e-9, || format!("{} {loss} @ {level}: {} vs {}", scn.name, e.residual, planted * planted / 2.0))?;
            }
        }
    }
    ensure(seen.len() == ALPHAS.len(), || format!("offsets seen: {seen:?}"))?;
    Ok(format!("200 scenarios, max |swap − α²/2| = {worst:.1e}, levels per α {seen:?}"))
}

fn binary_predictor(rng: &mut ChaCha8Rng, calibrated: bool) -> Result<(PredictionDataset, Vec<f64>), String> {
    let space = OutcomeSpace::binary();
    let k = rng.gen_range(2..=5);
    let mut values: Vec<f64> = Vec::new();
    while values.len() < k {
        let p: f64 = rng.gen_range(0.05..0.95);
        if values.iter().all(|v| (v - p).abs() > 0.02) {
            values.push(p);
        }
    }
    let miscal = rng.gen_range(0..k);
    let mut records = Vec::new();
    for (i, &p) in values.iter().enumerate() {
        let w: f64 = rng.gen_range(0.5..2.0);
        let rate = if !calibrated && i == miscal {
            let shift = rng.gen_range(0.02..0.04);
            if p > 0.5 { p - shift } else { p + shift }
        } else {
            p
        };
        let f = Pmf::bernoulli(&space, p).map_err(|e| e.to_string())?;
        for (y, mass) in [(1, rate), (0, 1.0 - rate)] {
            records.push(
                Record::new(format!("x{i}"), y, w * mass)
                    .with_real("p", p)
                    .with_pmf("f", f.clone()),
            );
        }
    }
    let ds = PredictionDataset::new(&space, records).map_err(|e| e.to_string())?;
    Ok((ds, values))
}

fn binary_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut counts = [0usize; 2];
    for t in 0..50 {
        let calibrated = t % 2 == 0;
        let (ds, mut values) = binary_predictor(&mut rng, calibrated)?;
        values.sort_by(f64::total_cmp);
        let mut qs = values.clone();
        qs.extend(values.windows(2).map(|w| (w[0] + w[1]) / 2.0));
        qs.extend([0.0, 1.0]);

        let mut scn = Scenario::new(format!("binary#{t}"), ds.clone());
        let mut beta_max: f64 = 0.0;
        for (j, q) in qs.iter().enumerate() {
            let (loss, _) = make_simple_loss(ds.space(), *q).map_err(|e| e.to_string())?;
            scn = scn.with_loss(format!("l{j}"), loss);
        }
        for j in 0..qs.len() {
            beta_max = beta_max.max(eval(&scn, &format!("decision(f,l{j})"))?);
        }
        let vanilla = eval(&scn, "vanilla(p)")?;
        let vanilla_ok = vanilla <= 1e-12;
        let decision_ok = beta_max <= 1e-12;
        ensure(vanilla_ok == decision_ok, || format!("predictor {t}: vanilla {vanilla} vs max β {beta_max}"))?;
        ensure(vanilla_ok == calibrated, || format!("predictor {t}: planted state not recovered"))?;
        counts[usize::from(vanilla_ok)] += 1;
    }
    Ok(format!("50 predictors, {} calibrated on both sides, {} miscalibrated on both sides", counts[1], counts[0]))
}

fn half_predictor() -> Outcome {
    let scn = counterexample_half_predictor(0.8, 4).map_err(|e| e.to_string())?;
    let beta = eval(&scn, "decision(f,squared)")?;
    let vanilla = eval(&scn, "vanilla(p)")?;
    ensure(beta <= 1e-12, || format!("β = {beta}"))?;
    ensure((vanilla - 0.3).abs() <= 1e-12, || format!("vanilla = {vanilla}"))?;
    Ok(format!("β = {beta:.1e}, vanilla = {vanilla}"))
}

fn mean_variance() -> Outcome {
    let scn = counterexample_mean_variance(1.25, 4).map_err(|e| e.to_string())?;
    let bre = eval(&scn, "bre(f,g,squared)")?;
    let var = eval(&scn, "gamma(g,variance)@level=1.25")?;
    let mean = eval(&scn, "gamma(f,mean)")?;
    ensure(bre <= 1e-9, || format!("bre = {bre}"))?;
    ensure((var - 1.0).abs() <= 1e-9, || format!("variance residual = {var}"))?;
    ensure((mean - 1.0).abs() <= 1e-9, || format!("mean residual = {mean}"))?;
    Ok(format!("bre = {bre:.1e}, variance@1.25 = {var}, mean = {mean}"))
}

fn closed_gap(f: f64) -> f64 {
    let (c, d) = (0.6, 0.3);
    let q = 3.0 / 7.0;
    (1.0 - q) * (f * (1.0 - c) / (1.0 - f) - d).abs()
}

fn cost_parity() -> Outcome {
    ensure((cost_parity_q(0.6, 0.3) - 3.0 / 7.0).abs() < 1e-15, || "q".into())?;
    let mut gaps = Vec::new();
    for f in [0.32, 0.35, 0.40] {
        let scn = cost_parity_construction(0.6, 0.3, f).map_err(|e| e.to_string())?;
        let vanilla = eval(&scn, "vanilla(p)")?;
        let levels = scn
            .level_map(&Quantity::vanilla("p"))
            .map_err(|e| e.to_string())?
            .ok_or("no level map")?;
        let bc = eval(&scn, "bayes_risk(simple_c)")?;
        let bd = eval(&scn, "bayes_risk(simple_d)")?;
        let gap = eval(&scn, "cost_gap(f,simple_c,simple_d)")?;
        ensure(levels.entries.len() == 2, || format!("f = {f}: {} levels", levels.entries.len()))?;
        ensure(vanilla <= 1e-12, || format!("f = {f}: vanilla {vanilla}"))?;
        ensure((bc - 6.0 / 35.0).abs() <= 1e-12 && (bd - 6.0 / 35.0).abs() <= 1e-12, || format!("f = {f}: B_c {bc}, B_d {bd}"))?;
        ensure(gap > 0.0 && (gap - closed_gap(f)).abs() <= 1e-12, || format!("f = {f}: gap {gap} vs {}", closed_gap(f)))?;
        gaps.push(gap);
    }
    Ok(format!("gaps {gaps:?}, B_c = B_d = 6/35"))
}

fn edges() -> Outcome {
    let mut min_slack = f64::INFINITY;
    for edge in ImplicationEdge::ALL {
        for seed in 0..200 {
            let scn = generate_scenario(edge, seed).map_err(|e| format!("{edge} {seed}: {e}"))?;
            let out = check_edge(edge, &scn).map_err(|e| format!("{}: {e}", scn.name))?;
            ensure(out.hypothesis_met, || format!("{}: hypothesis residual {}", scn.name, out.hypothesis_residual))?;
            ensure(out.conclusion_holds && out.slack >= 0.0, || {
                format!("{}: residual {} bound {}", scn.name, out.conclusion_residual, out.bound)
            })?;
            min_slack = min_slack.min(out.slack);
        }
    }
    Ok(format!("{} edges × 200 scenarios, min slack {min_slack:.3e}", ImplicationEdge::ALL.len()))
}

fn oracle() -> Outcome {
    let mut per_head: BTreeMap<String, usize> = BTreeMap::new();
    let mut worst: f64 = 0.0;
    let mut scenarios = Vec::new();
    for seed in 0..100 {
        scenarios.push(oracle_scenario(seed).map_err(|e| e.to_string())?);
        scenarios.push(binary_oracle_scenario(seed).map_err(|e| e.to_string())?);
    }
    for scn in scenarios {
        let mut heads = std::collections::BTreeSet::new();
        for q in oracle_quantities(&scn) {
            let fast = scn.evaluate(&q).map_err(|e| format!("{} {q}: {e}", scn.name))?;
            let slow = brute_force_oracle(&scn, &q).map_err(|e| format!("{} {q}: {e}", scn.name))?;
            worst = worst.max((fast - slow).abs());
            ensure((fast - slow).abs() <= 1e-12, || format!("{} {q}: {fast} vs {slow}", scn.name))?;
            heads.insert(q.to_string().split('(').next().unwrap_or_default().to_string());
        }
        for h in heads {
            *per_head.entry(h).or_default() += 1;
        }
    }
    ensure(per_head.values().all(|&n| n >= 100), || format!("coverage {per_head:?}"))?;
    Ok(format!("max diff {worst:.1e}; scenarios per metric {per_head:?}"))
}

fn regularity() -> Outcome {
    let grid: Vec<f64> = (0..=40).map(|i| -2.0 + 0.15 * i as f64).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut report = Vec::new();
    for (k, values) in [vec![0.0, 1.0], vec![-1.0, 0.0, 2.0], vec![0.0, 1.0, 2.0, 3.0]].iter().enumerate() {
        let space = OutcomeSpace::numeric(values).map_err(|e| e.to_string())?;
        let mean = make_standard_property(&space, &StandardKind::Mean).map_err(|e| e.to_string())?;
        let v = IdentificationFn::mean(&space).map_err(|e| e.to_string())?;
        let est = estimate_identification_regularity(&v, &mean, 200, k as u64, &grid).map_err(|e| e.to_string())?;
        ensure(est.oriented_ok && est.pairs > 0, || format!("mean: {est:?}"))?;
        ensure((est.n_hat - 1.0).abs() <= 1e-9 && (est.m_hat - 1.0).abs() <= 1e-9, || format!("mean: {est:?}"))?;

        let n = values.len();
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..=2.0)).collect();
        let kind = StandardKind::RatioOfExpectations { g: g.clone(), h: h.clone(), h_bounds: Some((0.5, 2.0)) };
        let ratio = make_standard_property(&space, &kind).map_err(|e| e.to_string())?;
        let v = IdentificationFn::ratio(&space, &g, &h).map_err(|e| e.to_string())?;
        let est = estimate_identification_regularity(&v, &ratio, 200, 100 + k as u64, &grid).map_err(|e| e.to_string())?;
        ensure(est.oriented_ok && est.pairs > 0, || format!("ratio: {est:?}"))?;
        ensure(est.n_hat >= 0.5 - 1e-9 && est.m_hat <= 2.0 + 1e-9, || format!("ratio: {est:?}"))?;
        report.push(format!("ratio[{n}] N̂ {:.3} M̂ {:.3}", est.n_hat, est.m_hat));
    }
    Ok(format!("mean N̂ = M̂ = 1; {}", report.join(", ")))
}

fn recovery() -> Outcome {
    for seed in 0..20 {
        let (clean, _) = recovery_scenario(seed, None).map_err(|e| e.to_string())?;
        let out = recover_distribution_calibration(&clean, 0.05).map_err(|e| e.to_string())?;
        ensure(out.recovered && out.full_residual <= 1e-9, || format!("seed {seed}: clean not recovered"))?;
        ensure(out.per_hyperplane.iter().all(|h| h.residual <= 1e-9), || format!("seed {seed}: clean hyperplane failed"))?;

        let (planted, target) = recovery_scenario(seed, Some(0.1)).map_err(|e| e.to_string())?;
        let out = recover_distribution_calibration(&planted, 0.05).map_err(|e| e.to_string())?;
        ensure(out.recovered && out.full_residual > 1e-9, || format!("seed {seed}: planted not recovered"))?;
        let flagged: Vec<_> = out.points.iter().filter(|p| p.flagged).collect();
        ensure(flagged.len() == 1 && Some(&flagged[0].point) == target.as_ref(), || {
            format!("seed {seed}: {} points flagged", flagged.len())
        })?;
        ensure((flagged[0].recovered_residual - 0.1).abs() <= 1e-9, || {
            format!("seed {seed}: recovered shift {}", flagged[0].recovered_residual)
        })?;
    }
    Ok("20 scenarios; clean pass both ways, planted 0.1 isolated every time".into())
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_calib-atlas"))
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn audit_file(config: &str, out: &Path) -> Result<(i32, Value), String> {
    let o = bin()
        .arg("audit")
        .arg("--config")
        .arg(fixture(config))
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(out.join("report.json")).map_err(|e| format!("{config}: {e}"))?;
    Ok((o.status.code().unwrap_or(-1), serde_json::from_str(&text).map_err(|e| e.to_string())?))
}

fn agg(report: &Value, metric: &str) -> Result<f64, String> {
    report["metrics"][metric]["aggregate"].as_f64().ok_or_else(|| format!("{metric}: no aggregate"))
}

fn cli_end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;

    let (code, r) = audit_file("half_predictor/config.json", &tmp.path().join("half"))?;
    ensure(code == 0, || format!("half predictor exit {code}"))?;
    ensure(agg(&r, "decision_squared")? <= 1e-12, || "half predictor β".into())?;
    ensure((agg(&r, "vanilla_gap")? - 0.3).abs() <= 1e-12, || "half predictor vanilla".into())?;

    let (code, r) = audit_file("mean_variance/config.json", &tmp.path().join("mv"))?;
    ensure(code == 0, || format!("mean/variance exit {code}"))?;
    ensure(agg(&r, "bayes_risk_estimation")? <= 1e-9, || "bre".into())?;
    ensure((agg(&r, "variance_at_v")? - 1.0).abs() <= 1e-9, || "variance residual".into())?;
    ensure((agg(&r, "mean_sup")? - 1.0).abs() <= 1e-9, || "mean residual".into())?;

    for (tag, f) in [("f032", 0.32), ("f035", 0.35), ("f040", 0.40)] {
        let (code, r) = audit_file(&format!("cost_parity/config_{tag}.json"), &tmp.path().join(tag))?;
        ensure(code == 0, || format!("{tag} exit {code}"))?;
        ensure(agg(&r, "vanilla")? <= 1e-12, || format!("{tag} vanilla"))?;
        for b in ["bayes_risk_c", "bayes_risk_d"] {
            ensure((agg(&r, b)? - 6.0 / 35.0).abs() <= 1e-12, || format!("{tag} {b}"))?;
        }
        let gap = agg(&r, "cost_gap")?;
        ensure((gap - closed_gap(f)).abs() <= 1e-12, || format!("{tag} gap {gap}"))?;
    }

    let mut manifests = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(format!("verify_{run}"));
        let o = bin().args(["verify", "all", "--seed", "7", "--out"]).arg(&out).output().map_err(|e| e.to_string())?;
        ensure(o.status.success(), || format!("verify all exit {:?}", o.status.code()))?;
        manifests.push(std::fs::read(out.join("manifest.json")).map_err(|e| e.to_string())?);
    }
    ensure(manifests[0] == manifests[1], || "verify manifests differ".into())?;
    Ok(format!("5 fixture audits reproduce 3–5; manifest {} bytes identical across runs", manifests[0].len()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("mean/squared sandwich", mean_sandwich),
        ("binary equivalence", binary_equivalence),
        ("half predictor", half_predictor),
        ("mean/variance", mean_variance),
        ("cost parity", cost_parity),
        ("implication edges", edges),
        ("oracle equivalence", oracle),
        ("identification regularity", regularity),
        ("distribution recovery", recovery),
        ("CLI end to end", cli_end_to_end),
    ];
    let mut failed = 0;
    let mut out = std::io::stdout().lock();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = std::time::Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let line = match &result {
            Ok(detail) => format!("criterion {:>2} PASS {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                format!("criterion {:>2} FAIL {name} ({secs:.2}s): {why}", i + 1)
            }
        };
        writeln!(out, "{line}").unwrap();
    }
    writeln!(out, "acceptance: {} passed, {failed} failed", criteria.len() - failed).unwrap();
    if failed > 0 {
        std::process::exit(1);
    }
}
