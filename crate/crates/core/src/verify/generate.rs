//! Seeded scenario families. Each input `x` contributes one record per
//! outcome, weighted by `w_x · P(Y = y | x)`, so conditional distributions
//! are exact functions of the weights.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::losses::{
    loss_from_identification, make_bayes_pair, make_simple_loss, pinball_loss, squared_loss,
    zero_one_loss, IdentificationFn, LossFn,
};
use crate::outcomes::{mixture, OutcomeSpace, Pmf, PredictionDataset, Record};
use crate::properties::{
    make_standard_property, Property, PropertyValue, StandardKind, ValueMetric,
};

use super::edges::ImplicationEdge;
use super::quantity::{Quantity, Reduction};
use super::{Refinement, Scenario};

const PLANTED_ALPHAS: [f64; 4] = [0.01, 0.05, 0.1, 0.2];

/// One input: its weight, outcome distribution, predictions and groups.
struct Input {
    weight: f64,
    cond: Pmf,
    preds: Vec<(String, PropertyValue)>,
    groups: Vec<(String, bool)>,
}

impl Input {
    fn new(weight: f64, cond: Pmf) -> Self {
        Self {
            weight,
            cond,
            preds: Vec::new(),
            groups: Vec::new(),
        }
    }

    fn pred(mut self, name: &str, v: PropertyValue) -> Self {
        self.preds.push((name.to_string(), v));
        self
    }
}

fn expand(space: &Arc<OutcomeSpace>, inputs: &[Input]) -> Result<PredictionDataset> {
    let mut records = Vec::new();
    for (i, x) in inputs.iter().enumerate() {
        for (y, p) in x.cond.weights().iter().enumerate() {
            if *p > 0.0 {
                let mut r = Record::new(format!("x{i}"), y, x.weight * p);
                for (name, v) in &x.preds {
                    r = r.with_prediction(name.clone(), v.clone());
                }
                for (name, flag) in &x.groups {
                    r = r.with_group(name.clone(), *flag);
                }
                records.push(r);
            }
        }
    }
    PredictionDataset::new(space, records)
}

fn rng_for(seed: u64, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ salt)
}

/// `n` distinct integers from `[−3, 5]`, sorted.
fn integer_space(rng: &mut ChaCha8Rng, n: usize) -> Result<Arc<OutcomeSpace>> {
    let mut values: Vec<i32> = (-3..=5).collect();
    values.shuffle(rng);
    let mut chosen: Vec<f64> = values[..n].iter().map(|v| *v as f64).collect();
    chosen.sort_by(f64::total_cmp);
    OutcomeSpace::numeric(&chosen)
}

/// A pmf whose masses are multiples of 1/16, so means on integer embeddings
/// are exact and often coincide.
fn dyadic_pmf(rng: &mut ChaCha8Rng, space: &Arc<OutcomeSpace>) -> Result<Pmf> {
    let mut cuts: Vec<u32> = (0..space.len() - 1).map(|_| rng.gen_range(0..=16)).collect();
    cuts.sort_unstable();
    let mut prev = 0;
    let mut masses = Vec::with_capacity(space.len());
    for c in cuts.into_iter().chain([16]) {
        masses.push((c - prev) as f64 / 16.0);
        prev = c;
    }
    Pmf::new(space, masses)
}

fn mix(a: &Pmf, b: &Pmf, t: f64) -> Result<Pmf> {
    mixture(&[a.clone(), b.clone()], &[1.0 - t, t])
}

fn weighted_mixture(pmfs: &[Pmf], weights: &[f64]) -> Result<Pmf> {
    let total: f64 = weights.iter().sum();
    let normalized: Vec<f64> = weights.iter().map(|w| w / total).collect();
    mixture(pmfs, &normalized)
}

fn weight(rng: &mut ChaCha8Rng) -> f64 {
    rng.gen_range(0.5..2.0)
}

/// Groups indices by `key` in first-appearance order.
fn group_by(keys: &[PropertyValue]) -> Vec<Vec<usize>> {
    let mut groups: Vec<(PropertyValue, Vec<usize>)> = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        match groups.iter_mut().find(|(v, _)| v.same_level(k)) {
            Some(g) => g.1.push(i),
            None => groups.push((k.clone(), vec![i])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Inputs predicting `fs`, whose outcome distributions pool, per level of
/// `key(f)`, to the level's average prediction. With `perturb > 0` each
/// input's outcome distribution is moved towards a random pmf by a random
/// fraction up to `perturb`.
fn pooled_around_levels(
    rng: &mut ChaCha8Rng,
    space: &Arc<OutcomeSpace>,
    fs: Vec<(f64, Pmf)>,
    key: impl Fn(&Pmf) -> Result<PropertyValue>,
    perturb: f64,
) -> Result<Vec<Input>> {
    let keys = fs.iter().map(|(_, f)| key(f)).collect::<Result<Vec<_>>>()?;
    let mut conds: Vec<Option<Pmf>> = vec![None; fs.len()];
    for members in group_by(&keys) {
        let pmfs: Vec<Pmf> = members.iter().map(|&i| fs[i].1.clone()).collect();
        let weights: Vec<f64> = members.iter().map(|&i| fs[i].0).collect();
        let avg = weighted_mixture(&pmfs, &weights)?;
        for &i in &members {
            conds[i] = Some(if perturb > 0.0 {
                let t = rng.gen_range(0.0..perturb);
                mix(&avg, &Pmf::sample_uniform(space, rng), t)?
            } else {
                avg.clone()
            });
        }
    }
    Ok(fs
        .into_iter()
        .zip(conds)
        .map(|((w, f), c)| Input::new(w, c.expect("every input has a level")).pred("f", PropertyValue::Distribution(f)))
        .collect())
}

/// A random loss together with its outcome space and decision grid.
fn random_loss(rng: &mut ChaCha8Rng) -> Result<(Arc<OutcomeSpace>, LossFn)> {
    Ok(match rng.gen_range(0..4) {
        0 => {
            let n = rng.gen_range(3..=4);
            let space = integer_space(rng, n)?;
            let loss = zero_one_loss(&space);
            (space, loss)
        }
        1 => {
            let space = OutcomeSpace::binary();
            let q = (rng.gen_range(0.05..0.95) * 100.0_f64).round() / 100.0;
            let (loss, _) = make_simple_loss(&space, q)?;
            (space, loss)
        }
        2 => {
            let n = rng.gen_range(2..=4);
            let space = integer_space(rng, n)?;
            let e = space.embedding().expect("integer spaces are embedded").to_vec();
            let (lo, hi) = (e[0], e[e.len() - 1]);
            let mut grid: Vec<f64> = (0..5)
                .map(|_| ((lo + rng.gen_range(0.0..1.0) * (hi - lo)) * 8.0).round() / 8.0)
                .collect();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let loss = squared_loss(&space, 1.0)?
                .with_default_grid(grid.into_iter().map(PropertyValue::Real).collect());
            (space, loss)
        }
        _ => {
            let n = rng.gen_range(3..=4);
            let space = integer_space(rng, n)?;
            let tau = [0.25, 0.5, 0.75][rng.gen_range(0..3)];
            (Arc::clone(&space), pinball_loss(&space, tau)?)
        }
    })
}

/// A seeded scenario satisfying the hypotheses of `edge`.
pub fn generate_scenario(edge: ImplicationEdge, seed: u64) -> Result<Scenario> {
    let salt = ImplicationEdge::ALL.iter().position(|e| *e == edge).unwrap_or(0) as u64 + 1;
    let mut rng = rng_for(seed, salt);
    let name = format!("{}/seed={seed}", edge.name());
    match edge {
        ImplicationEdge::DistImpliesGamma => dist_gamma(&mut rng, name, false),
        ImplicationEdge::DistImpliesGammaApprox => dist_gamma(&mut rng, name, true),
        ImplicationEdge::DistImpliesDecision => dist_decision(&mut rng, name, 0.0),
        ImplicationEdge::DistImpliesDecisionApprox => dist_decision(&mut rng, name, 0.3),
        ImplicationEdge::GammaIffSwap => {
            let ratio = rng.gen_bool(0.5);
            planted_swap(&mut rng, name, ratio)
        }
        ImplicationEdge::GammaInherited => gamma_inherited(&mut rng, name),
        ImplicationEdge::DistInherited => dist_inherited(&mut rng, name),
        ImplicationEdge::SwapForRefined => swap_for_refined(&mut rng, name),
        ImplicationEdge::DecisionImpliesBayes => decision_bayes(&mut rng, name),
        ImplicationEdge::SelfrealImpliesPrecise => selfreal(&mut rng, name),
        ImplicationEdge::DecisionEquivVanillaBinary => binary_equivalence(&mut rng, name),
    }
}

fn dist_gamma(rng: &mut ChaCha8Rng, name: String, approx: bool) -> Result<Scenario> {
    let n_x = rng.gen_range(8..=16);
    let (space, gamma, fs) = if approx {
        match rng.gen_range(0..3) {
            0 => {
                let n = rng.gen_range(2..=4);
                let space = integer_space(rng, n)?;
                let fs = (0..n_x)
                    .map(|_| Ok((weight(rng), dyadic_pmf(rng, &space)?)))
                    .collect::<Result<Vec<_>>>()?;
                let gamma = make_standard_property(&space, &StandardKind::Mean)?;
                (space, gamma, fs)
            }
            1 => {
                let n = rng.gen_range(2..=4);
                let space = integer_space(rng, n)?;
                let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
                let h: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
                let kind = StandardKind::RatioOfExpectations { g, h, h_bounds: None };
                let gamma = make_standard_property(&space, &kind)?;
                let pool: Vec<Pmf> = (0..3).map(|_| Pmf::sample_uniform(&space, rng)).collect();
                let fs = (0..n_x)
                    .map(|_| (weight(rng), pool[rng.gen_range(0..pool.len())].clone()))
                    .collect();
                (space, gamma, fs)
            }
            _ => {
                let n = rng.gen_range(2..=4);
                let space = integer_space(rng, n)?;
                let gamma = make_standard_property(&space, &StandardKind::FullDistribution)?;
                let pool: Vec<Pmf> = (0..4).map(|_| Pmf::sample_uniform(&space, rng)).collect();
                let fs = (0..n_x)
                    .map(|_| (weight(rng), pool[rng.gen_range(0..pool.len())].clone()))
                    .collect();
                (space, gamma, fs)
            }
        }
    } else {
        let (space, kind, dyadic) = match rng.gen_range(0..4) {
            0 => {
                let n = rng.gen_range(2..=4);
                (integer_space(rng, n)?, StandardKind::Mode, false)
            }
            1 => {
                let n = rng.gen_range(2..=4);
                (integer_space(rng, n)?, StandardKind::Mean, true)
            }
            2 => {
                let tau = [0.25, 0.5, 0.75][rng.gen_range(0..3)];
                let n = rng.gen_range(2..=4);
                (integer_space(rng, n)?, StandardKind::Quantile { tau }, false)
            }
            _ => (integer_space(rng, 3)?, StandardKind::Ranking, false),
        };
        let fs = (0..n_x)
            .map(|_| {
                let f = if dyadic { dyadic_pmf(rng, &space)? } else { Pmf::sample_uniform(&space, rng) };
                Ok((weight(rng), f))
            })
            .collect::<Result<Vec<_>>>()?;
        let gamma = make_standard_property(&space, &kind)?;
        (space, gamma, fs)
    };
    let perturb = if approx { 0.3 } else { 0.0 };
    let g = gamma.clone();
    let inputs = pooled_around_levels(rng, &space, fs, |f| g.evaluate(f), perturb)?;
    Ok(Scenario::new(format!("{name}/{}", gamma.name()), expand(&space, &inputs)?).with_property("gamma", gamma))
}

fn dist_decision(rng: &mut ChaCha8Rng, name: String, perturb: f64) -> Result<Scenario> {
    let (space, loss) = random_loss(rng)?;
    let grid = loss.default_grid().expect("random losses carry a grid").to_vec();
    let pair = make_bayes_pair(&loss, &grid)?;
    let n_x = rng.gen_range(8..=16);
    let fs = (0..n_x).map(|_| (weight(rng), Pmf::sample_uniform(&space, rng))).collect();
    let inputs = pooled_around_levels(rng, &space, fs, |f| pair.phi.evaluate(f), perturb)?;
    Ok(Scenario::new(format!("{name}/{}", loss.name()), expand(&space, &inputs)?).with_loss("loss", loss))
}

/// Levels of a real prediction whose pooled outcome distribution has
/// property value `γ ± α` with `α` drawn from the planted offsets.
fn planted_swap(rng: &mut ChaCha8Rng, name: String, ratio: bool) -> Result<Scenario> {
    let n = rng.gen_range(2..=4);
    let space = integer_space(rng, n)?;
    let (gamma, v, h) = if ratio {
        let g: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
        let h: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let kind = StandardKind::RatioOfExpectations { g: g.clone(), h: h.clone(), h_bounds: Some((0.5, 2.0)) };
        (make_standard_property(&space, &kind)?, IdentificationFn::ratio(&space, &g, &h)?, h)
    } else {
        (
            make_standard_property(&space, &StandardKind::Mean)?,
            IdentificationFn::mean(&space)?,
            vec![1.0; n],
        )
    };
    let mut inputs = Vec::new();
    let mut planted: Vec<(f64, f64, f64)> = Vec::new();
    let mut grid = Vec::new();
    let n_levels = rng.gen_range(2..=5);
    while planted.len() < n_levels {
        let members = rng.gen_range(1..=3);
        let conds: Vec<Pmf> = (0..members).map(|_| Pmf::sample_uniform(&space, rng)).collect();
        let weights: Vec<f64> = (0..members).map(|_| weight(rng)).collect();
        let pooled = weighted_mixture(&conds, &weights)?;
        let center = gamma.evaluate(&pooled)?.as_real()?;
        let alpha = PLANTED_ALPHAS[rng.gen_range(0..PLANTED_ALPHAS.len())];
        let level = if rng.gen_bool(0.5) { center + alpha } else { center - alpha };
        if planted.iter().any(|(l, _, _)| *l == level) {
            continue;
        }
        let curvature = pooled.expect(|y| h[y]);
        planted.push((level, alpha, curvature));
        grid.push(PropertyValue::Real(center));
        grid.push(PropertyValue::Real(level));
        for (c, w) in conds.into_iter().zip(weights) {
            inputs.push(Input::new(w, c).pred("gamma", PropertyValue::Real(level)));
        }
    }
    let induced = loss_from_identification(&v, 0.0, None, 64)?.with_default_grid(grid.clone());
    let mut scn = Scenario::new(format!("{name}/{}", gamma.name()), expand(&space, &inputs)?)
        .with_property("gamma", gamma)
        .with_identification("v", v)
        .with_loss("induced", induced);
    let mut losses = vec!["induced"];
    if !ratio {
        scn = scn.with_loss("squared", squared_loss(&space, 0.5)?.with_default_grid(grid));
        losses.push("squared");
    }
    for (level, alpha, curvature) in planted {
        for loss in &losses {
            scn = scn.expect(
                Quantity::Swap {
                    prediction: "gamma".into(),
                    loss: (*loss).into(),
                    reduce: Reduction::Level(level),
                },
                0.5 * curvature * alpha * alpha,
                1e-9,
                "planted offset",
            );
        }
        scn = scn
            .expect(Quantity::gamma("gamma", "gamma", Reduction::Level(level)), alpha, 1e-9, "planted offset");
    }
    Ok(scn)
}

/// Mean predictions offset from their level's pooled mean by planted
/// `α ∈ {0.01, 0.05, 0.1, 0.2}`, with the loss induced by `γ − y` and the
/// squared loss `½(y − γ)²`; each level's swap regret is `α²/2`.
pub fn mean_sandwich_scenario(seed: u64) -> Result<Scenario> {
    let mut rng = rng_for(seed, 303);
    planted_swap(&mut rng, format!("mean_sandwich/seed={seed}"), false)
}

fn threshold_refinement(t: f64) -> Refinement {
    Refinement {
        name: format!("threshold({t})"),
        phi: Arc::new(move |v: &PropertyValue| {
            Ok(PropertyValue::token(if v.as_real()? > t { "above" } else { "below" }))
        }),
        metric: ValueMetric::Discrete,
        lipschitz: None,
        convex_level_sets: true,
    }
}

/// Weighted member distributions of one level and their pooled mixture.
type PooledLevel = (Vec<(f64, Pmf)>, Pmf);

/// Levels of pooled outcome distributions and their property values.
fn random_levels(rng: &mut ChaCha8Rng, space: &Arc<OutcomeSpace>, n_levels: usize) -> Result<Vec<PooledLevel>> {
    (0..n_levels)
        .map(|_| {
            let members = rng.gen_range(1..=3);
            let conds: Vec<(f64, Pmf)> = (0..members)
                .map(|_| (weight(rng), Pmf::sample_uniform(space, rng)))
                .collect();
            let (w, p): (Vec<f64>, Vec<Pmf>) = conds.iter().cloned().unzip();
            let pooled = weighted_mixture(&p, &w)?;
            Ok((conds, pooled))
        })
        .collect()
}

fn gamma_inherited(rng: &mut ChaCha8Rng, name: String) -> Result<Scenario> {
    let n = rng.gen_range(2..=4);
    let space = integer_space(rng, n)?;
    let n_levels = rng.gen_range(3..=6);
    let levels = random_levels(rng, &space, n_levels)?;
    let kind = rng.gen_range(0..5);
    let gamma = match kind {
        1 => make_standard_property(&space, &StandardKind::FullDistribution)?,
        4 => make_standard_property(&space, &StandardKind::Quantile { tau: 0.5 })?,
        _ => make_standard_property(&space, &StandardKind::Mean)?,
    };
    let mut values = Vec::new();
    for (_, pooled) in &levels {
        let v = gamma.evaluate(pooled)?;
        values.push(match (kind, v) {
            (2 | 3, PropertyValue::Real(x)) => {
                let alpha = rng.gen_range(0.0..0.15);
                PropertyValue::Real(if rng.gen_bool(0.5) { x + alpha } else { x - alpha })
            }
            (_, v) => v,
        });
    }
    let reals: Vec<f64> = values.iter().filter_map(|v| v.as_real().ok()).collect();
    let phi = match kind {
        0 | 4 => {
            let mut sorted = reals.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            let i = rng.gen_range(0..sorted.len());
            let t = if i + 1 < sorted.len() { 0.5 * (sorted[i] + sorted[i + 1]) } else { sorted[i] - 0.5 };
            threshold_refinement(t)
        }
        1 => Refinement {
            name: "mode".into(),
            phi: Arc::new(|v: &PropertyValue| {
                let p = v.as_pmf()?;
                Ok(PropertyValue::Token(p.space().label(crate::properties::mode_index(p)).to_string()))
            }),
            metric: ValueMetric::Discrete,
            lipschitz: None,
            convex_level_sets: true,
        },
        2 => {
            let mut sorted = reals.clone();
            sorted.sort_by(f64::total_cmp);
            let (lo, hi) = (sorted[sorted.len() / 3], sorted[(2 * sorted.len()) / 3]);
            Refinement {
                name: format!("clamp({lo},{hi})"),
                phi: Arc::new(move |v: &PropertyValue| Ok(PropertyValue::Real(v.as_real()?.clamp(lo, hi)))),
                metric: ValueMetric::AbsDiff,
                lipschitz: Some(1.0),
                convex_level_sets: true,
            }
        }
        _ => Refinement {
            name: "affine(2,-1)".into(),
            phi: Arc::new(|v: &PropertyValue| Ok(PropertyValue::Real(2.0 * v.as_real()? - 1.0))),
            metric: ValueMetric::AbsDiff,
            lipschitz: Some(2.0),
            convex_level_sets: true,
        },
    };
    let mut inputs = Vec::new();
    for ((conds, _), value) in levels.into_iter().zip(values) {
        for (w, c) in conds {
            inputs.push(Input::new(w, c).pred("gamma", value.clone()));
        }
    }
    Ok(Scenario::new(format!("{name}/{}", phi.name), expand(&space, &inputs)?)
        .with_property("gamma", gamma)
        .with_refinement("phi", phi))
}

fn dist_inherited(rng: &mut ChaCha8Rng, name: String) -> Result<Scenario> {
    let kind = rng.gen_range(0..3);
    let n = if kind == 0 { rng.gen_range(3..=4) } else { rng.gen_range(2..=4) };
    let space = integer_space(rng, n)?;
    let n_x = rng.gen_range(10..=16);
    let (gamma, phi, fs) = match kind {
        0 => {
            let gamma = make_standard_property(&space, &StandardKind::Ranking)?;
            let phi = Refinement {
                name: "first".into(),
                phi: Arc::new(|v: &PropertyValue| match v {
                    PropertyValue::Ranking(r) => Ok(PropertyValue::Token(r[0].clone())),
                    other => Err(crate::error::Error::KindMismatch {
                        expected: crate::error::ValueKind::Ranking,
                        got: other.kind(),
                    }),
                }),
                metric: ValueMetric::Discrete,
                lipschitz: None,
                convex_level_sets: true,
            };
            let fs = (0..n_x).map(|_| (weight(rng), Pmf::sample_uniform(&space, rng))).collect();
            (gamma, phi, fs)
        }
        1 => {
            let gamma = make_standard_property(&space, &StandardKind::Mode)?;
            let e = space.embedding().expect("integer spaces are embedded").to_vec();
            let labels = space.labels().to_vec();
            let median = e[e.len() / 2];
            let phi = Refinement {
                name: "low_high".into(),
                phi: Arc::new(move |v: &PropertyValue| {
                    let i = labels.iter().position(|l| l == v.as_token().unwrap_or_default()).unwrap_or(0);
                    Ok(PropertyValue::token(if e[i] < median { "low" } else { "high" }))
                }),
                metric: ValueMetric::Discrete,
                lipschitz: None,
                convex_level_sets: false,
            };
            let fs = (0..n_x).map(|_| (weight(rng), Pmf::sample_uniform(&space, rng))).collect();
            (gamma, phi, fs)
        }
        _ => {
            let gamma = make_standard_property(&space, &StandardKind::FullDistribution)?;
            let last = space.len() - 1;
            let phi = Refinement {
                name: "last_above(0.3)".into(),
                phi: Arc::new(move |v: &PropertyValue| {
                    Ok(PropertyValue::token(if v.as_pmf()?.prob(last) > 0.3 { "a" } else { "b" }))
                }),
                metric: ValueMetric::Discrete,
                lipschitz: None,
                convex_level_sets: true,
            };
            let pool: Vec<Pmf> = (0..5).map(|_| Pmf::sample_uniform(&space, rng)).collect();
            let fs = (0..n_x)
                .map(|_| (weight(rng), pool[rng.gen_range(0..pool.len())].clone()))
                .collect();
            (gamma, phi, fs)
        }
    };
    let perturb = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.01..0.3) };
    let g = gamma.clone();
    let inputs = pooled_around_levels(rng, &space, fs, |f| g.evaluate(f), perturb)?;
    Ok(Scenario::new(format!("{name}/{}", phi.name), expand(&space, &inputs)?)
        .with_property("gamma", gamma)
        .with_refinement("phi", phi))
}

fn swap_for_refined(rng: &mut ChaCha8Rng, name: String) -> Result<Scenario> {
    let (space, loss) = random_loss(rng)?;
    let pool: Vec<Pmf> = (0..rng.gen_range(3..=6)).map(|_| Pmf::sample_uniform(&space, rng)).collect();
    let inputs = (0..rng.gen_range(8..=16))
        .map(|_| {
            let f = pool[rng.gen_range(0..pool.len())].clone();
            let t = rng.gen_range(0.0..0.4);
            let c = mix(&f, &Pmf::sample_uniform(&space, rng), t)?;
            Ok(Input::new(weight(rng), c).pred("f", PropertyValue::Distribution(f)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scenario::new(format!("{name}/{}", loss.name()), expand(&space, &inputs)?).with_loss("loss", loss))
}

fn decision_bayes(rng: &mut ChaCha8Rng, name: String) -> Result<Scenario> {
    let (space, loss) = random_loss(rng)?;
    let inputs = (0..rng.gen_range(6..=14))
        .map(|_| {
            let f = Pmf::sample_uniform(&space, rng);
            let t = rng.gen_range(0.0..1.0);
            let c = mix(&f, &Pmf::sample_uniform(&space, rng), t)?;
            Ok(Input::new(weight(rng), c).pred("f", PropertyValue::Distribution(f)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scenario::new(format!("{name}/{}", loss.name()), expand(&space, &inputs)?).with_loss("loss", loss))
}

fn selfreal(rng: &mut ChaCha8Rng, name: String) -> Result<Scenario> {
    let (space, loss) = random_loss(rng)?;
    let grid = loss.default_grid().expect("random losses carry a grid").to_vec();
    let pair = make_bayes_pair(&loss, &grid)?;
    let mut inputs = Vec::new();
    let n_levels = rng.gen_range(2..=5);
    for (conds, pooled) in random_levels(rng, &space, n_levels)? {
        let g = pair.phi.evaluate(&pooled)?;
        let theta = pair.theta.evaluate(&pooled)?.as_real()?;
        let noise = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(-0.1..0.1) };
        for (w, c) in conds {
            inputs.push(
                Input::new(w, c)
                    .pred("g", g.clone())
                    .pred("h", PropertyValue::Real(theta + noise)),
            );
        }
    }
    Ok(Scenario::new(format!("{name}/{}", loss.name()), expand(&space, &inputs)?).with_loss("loss", loss))
}

/// Finite-image binary predictors; even draws are calibrated per level
/// (inputs may still deviate individually), odd draws miscalibrate one level.
fn binary_equivalence(rng: &mut ChaCha8Rng, name: String) -> Result<Scenario> {
    let space = OutcomeSpace::binary();
    let calibrated = rng.gen_bool(0.5);
    let mut values: Vec<f64> = Vec::new();
    while values.len() < rng.gen_range(2..=6) {
        let v = if rng.gen_bool(0.5) {
            rng.gen_range(0..=10) as f64 / 10.0
        } else {
            (rng.gen_range(0.0..1.0) * 1000.0_f64).round() / 1000.0
        };
        if !values.contains(&v) {
            values.push(v);
        }
    }
    let off = if calibrated { None } else { Some(rng.gen_range(0..values.len())) };
    let mut inputs = Vec::new();
    for (k, &p) in values.iter().enumerate() {
        let f = Pmf::bernoulli(&space, p)?;
        let room = p.min(1.0 - p);
        let shift = match off {
            Some(j) if j == k => {
                let delta = rng.gen_range(0.02..0.1);
                if p + delta <= 1.0 { delta } else { -delta }
            }
            _ => 0.0,
        };
        // A pair of inputs deviating by ±δ keeps the level's pooled rate.
        let delta = if room > 0.0 && rng.gen_bool(0.5) { rng.gen_range(0.0..room) } else { 0.0 };
        let w = weight(rng);
        for sign in [1.0, -1.0] {
            let rate = (p + shift + sign * delta).clamp(0.0, 1.0);
            inputs.push(
                Input::new(w, Pmf::bernoulli(&space, rate)?)
                    .pred("p", PropertyValue::Real(p))
                    .pred("f", PropertyValue::Distribution(f.clone())),
            );
        }
    }
    let label = if calibrated { "calibrated" } else { "miscalibrated" };
    Ok(Scenario::new(format!("{name}/{label}"), expand(&space, &inputs)?))
}

/// A three-outcome distributional predictor with `3..=5` well separated
/// predicted points, calibrated at every point. With `perturb = Some(δ)` the
/// outcome distribution at one point is shifted by `δ` between two outcomes;
/// that point is returned.
pub fn recovery_scenario(seed: u64, perturb: Option<f64>) -> Result<(Scenario, Option<Pmf>)> {
    let mut rng = rng_for(seed, 101);
    let space = OutcomeSpace::numeric(&[0.0, 1.0, 2.0])?;
    let k = rng.gen_range(3..=5);
    let mut points: Vec<Pmf> = Vec::new();
    while points.len() < k {
        let p = Pmf::sample_uniform(&space, &mut rng);
        let far = points
            .iter()
            .all(|q| p.weights().iter().zip(q.weights()).map(|(a, b)| (a - b).abs()).sum::<f64>() > 0.2);
        if p.weights().iter().all(|w| *w > 0.15) && far {
            points.push(p);
        }
    }
    let target = perturb.map(|_| rng.gen_range(0..k));
    let mut inputs = Vec::new();
    for (j, p) in points.iter().enumerate() {
        let cond = match (target, perturb) {
            (Some(t), Some(delta)) if t == j => {
                let mut w = p.weights().to_vec();
                w[0] += delta;
                w[2] -= delta;
                Pmf::new(&space, w)?
            }
            _ => p.clone(),
        };
        for _ in 0..rng.gen_range(1..=3) {
            inputs.push(Input::new(weight(&mut rng), cond.clone()).pred("f", PropertyValue::Distribution(p.clone())));
        }
    }
    let scn = Scenario::new(format!("recovery/seed={seed}"), expand(&space, &inputs)?)
        .with_property("full", make_standard_property(&space, &StandardKind::FullDistribution)?);
    Ok((scn, target.map(|t| points[t].clone())))
}

/// A scenario exercising every metric: real, distributional, decision and
/// risk predictions, two groups, and several losses.
pub fn oracle_scenario(seed: u64) -> Result<Scenario> {
    let mut rng = rng_for(seed, 202);
    let binary = rng.gen_bool(0.4);
    oracle_on(rng, binary, format!("oracle/seed={seed}"))
}

/// An [`oracle_scenario`] over the binary outcome space, where vanilla
/// calibration applies as well.
pub fn binary_oracle_scenario(seed: u64) -> Result<Scenario> {
    oracle_on(rng_for(seed, 203), true, format!("oracle/binary/seed={seed}"))
}

fn oracle_on(mut rng: ChaCha8Rng, binary: bool, name: String) -> Result<Scenario> {
    let space = if binary {
        OutcomeSpace::binary()
    } else {
        let n = rng.gen_range(3..=4);
        integer_space(&mut rng, n)?
    };
    let e = space.embedding().expect("embedded space").to_vec();
    let (lo, hi) = (e[0], e[e.len() - 1]);
    let mut grid: Vec<f64> = (0..=10).map(|i| lo + (hi - lo) * i as f64 / 10.0).collect();
    let gamma_pool: Vec<f64> = (0..4)
        .map(|_| {
            if binary {
                rng.gen_range(1..=9) as f64 / 10.0
            } else {
                grid[rng.gen_range(0..grid.len())]
            }
        })
        .collect();
    grid.extend(&gamma_pool);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let real_grid: Vec<PropertyValue> = grid.iter().map(|g| PropertyValue::Real(*g)).collect();
    let f_pool: Vec<Pmf> = (0..rng.gen_range(3..=5)).map(|_| Pmf::sample_uniform(&space, &mut rng)).collect();
    let h_pool: Vec<f64> = (0..3).map(|_| rng.gen_range(0.0..2.0)).collect();
    let n_x = rng.gen_range(6..=20);
    let mut inputs = Vec::new();
    for i in 0..n_x {
        let f = f_pool[rng.gen_range(0..f_pool.len())].clone();
        let t = rng.gen_range(0.0..1.0);
        let c = mix(&f, &Pmf::sample_uniform(&space, &mut rng), t)?;
        let mut x = Input::new(weight(&mut rng), c)
            .pred("f", PropertyValue::Distribution(f))
            .pred("gamma", PropertyValue::Real(gamma_pool[rng.gen_range(0..gamma_pool.len())]))
            .pred("g", real_grid[rng.gen_range(0..real_grid.len())].clone())
            .pred("h", PropertyValue::Real(h_pool[rng.gen_range(0..h_pool.len())]));
        // Both groups and both complements are non-empty.
        let g1 = if i < 2 { i == 0 } else { rng.gen_bool(0.5) };
        let g2 = if i < 2 { i == 1 } else { rng.gen_bool(0.5) };
        x.groups = vec![("g1".into(), g1), ("g2".into(), g2)];
        inputs.push(x);
    }
    let mut props: BTreeMap<&str, Property> = BTreeMap::new();
    props.insert("mean", make_standard_property(&space, &StandardKind::Mean)?);
    props.insert("mode", make_standard_property(&space, &StandardKind::Mode)?);
    props.insert("full", make_standard_property(&space, &StandardKind::FullDistribution)?);
    let mut scn = Scenario::new(name, expand(&space, &inputs)?)
        .with_loss("squared", squared_loss(&space, 1.0)?.with_default_grid(real_grid))
        .with_loss("zero_one", zero_one_loss(&space))
        .with_loss("pinball", pinball_loss(&space, 0.3)?);
    for (k, p) in props {
        scn = scn.with_property(k, p);
    }
    Ok(scn)
}

/// The quantities compared against the oracle on an [`oracle_scenario`].
pub fn oracle_quantities(scenario: &Scenario) -> Vec<Quantity> {
    let mut out: Vec<Quantity> = Vec::new();
    let reductions = [Reduction::Sup, Reduction::Expected, Reduction::ExpectedSquare];
    let first_gamma = scenario.dataset.records()[0]
        .prediction("gamma")
        .ok()
        .and_then(|v| v.as_real().ok());
    let mut maps = vec![
        Quantity::Distribution { prediction: "f".into(), property: "mode".into(), reduce: Reduction::Sup },
        Quantity::Distribution { prediction: "f".into(), property: "full".into(), reduce: Reduction::Sup },
        Quantity::gamma("gamma", "mean", Reduction::Sup),
        Quantity::gamma("f", "full", Reduction::Sup),
        Quantity::Swap { prediction: "gamma".into(), loss: "squared".into(), reduce: Reduction::Sup },
    ];
    if scenario.dataset.space().is_binary() {
        maps.push(Quantity::vanilla("gamma"));
    }
    for m in &maps {
        for r in reductions {
            out.push(m.clone().reduced(r));
        }
        if let Some(level) = first_gamma {
            let real_levels = match m {
                Quantity::Vanilla { prediction, .. } | Quantity::Gamma { prediction, .. } => prediction == "gamma",
                _ => false,
            };
            if real_levels {
                out.push(m.clone().reduced(Reduction::Level(level)));
            }
        }
    }
    for loss in ["squared", "zero_one", "pinball"] {
        out.push(Quantity::decision("f", loss));
        out.push(Quantity::RealizedLoss { prediction: "f".into(), loss: loss.into() });
        out.push(Quantity::BayesRisk { loss: loss.into() });
    }
    out.push(Quantity::BayesRiskEstimation { decision: "g".into(), risk: "h".into(), loss: "squared".into() });
    out.push(Quantity::CostGap { prediction: "f".into(), loss_a: "squared".into(), loss_b: "zero_one".into() });
    for group in ["g1", "g2"] {
        out.push(Quantity::Group { group: group.into(), inner: Box::new(maps[0].clone()) });
        out.push(Quantity::Group {
            group: group.into(),
            inner: Box::new(Quantity::gamma("gamma", "mean", Reduction::Expected)),
        });
        out.push(Quantity::Group { group: group.into(), inner: Box::new(Quantity::decision("f", "zero_one")) });
    }
    out.push(Quantity::RobustSwap {
        prediction: "gamma".into(),
        loss: "squared".into(),
        groups: vec!["g1".into(), "g2".into()],
    });
    out
}
