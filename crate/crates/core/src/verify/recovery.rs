//! Distribution calibration recovered from binary properties. Around each
//! predicted point `p` two parallel hyperplanes with normal `a` bound a slab
//! containing `p` and no other predicted point; the "1" levels of the two
//! threshold properties differ by exactly the records predicting `p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calib_metrics::{distribution_calibration, LevelResidualMap};
use crate::error::{Error, Result};
use crate::outcomes::Pmf;
use crate::properties::{make_standard_property, Property, PropertyValue, StandardKind, ValueMetric};

use super::Scenario;

const ZERO_TOL: f64 = 1e-9;
const RANDOM_DIRECTIONS: usize = 512;

/// One of the two threshold properties built around a predicted point.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperplaneCheck {
    /// Index of the predicted point in [`RecoveryOutcome::points`].
    pub point: usize,
    /// `"lower"` for the hyperplane shifted by `−ε‖a‖/2`, `"upper"` for `+ε‖a‖/2`.
    pub side: &'static str,
    /// Largest distribution-calibration residual of the binary property.
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointRecovery {
    pub point: Pmf,
    /// Unit normal `a` (sum zero) of the separating hyperplanes.
    pub normal: Vec<f64>,
    /// Smallest distance from another predicted point to the hyperplane through `p`.
    pub separation: f64,
    /// `max_y |P(Y = y | f = p) − p_y|` read off the two binary checks.
    pub recovered_residual: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOutcome {
    /// Whether "full distribution calibration holds" agrees with "every
    /// binary check passes".
    pub recovered: bool,
    pub full_residual: f64,
    pub points: Vec<PointRecovery>,
    pub per_hyperplane: Vec<HyperplaneCheck>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projects onto the sum-zero subspace and scales to unit length.
fn unit_sum_zero(mut a: Vec<f64>) -> Option<Vec<f64>> {
    let mean = a.iter().sum::<f64>() / a.len() as f64;
    a.iter_mut().for_each(|x| *x -= mean);
    let norm = dot(&a, &a).sqrt();
    (norm > 1e-12).then(|| a.into_iter().map(|x| x / norm).collect())
}

/// Smallest `|⟨a, q − p⟩|` over the other points, with its index.
fn margin(a: &[f64], p: &[f64], others: &[(usize, Vec<f64>)]) -> (f64, usize) {
    others
        .iter()
        .map(|(j, q)| {
            let d: Vec<f64> = q.iter().zip(p).map(|(x, y)| x - y).collect();
            (dot(a, &d).abs(), *j)
        })
        .fold((f64::INFINITY, usize::MAX), |best, c| if c.0 < best.0 { c } else { best })
}

/// The widest hyperplane through `points[i]` found among difference
/// directions, their pairwise sums and a fixed set of random directions.
fn separating_normal(points: &[Vec<f64>], i: usize) -> (Vec<f64>, f64, usize) {
    let n = points[i].len();
    let p = &points[i];
    let others: Vec<(usize, Vec<f64>)> = points
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(j, q)| (j, q.clone()))
        .collect();
    let diffs: Vec<Vec<f64>> = others
        .iter()
        .map(|(_, q)| q.iter().zip(p).map(|(x, y)| x - y).collect())
        .collect();
    let mut candidates: Vec<Vec<f64>> = diffs.clone();
    for a in 0..diffs.len() {
        for b in a + 1..diffs.len() {
            for s in [1.0, -1.0] {
                candidates.push(diffs[a].iter().zip(&diffs[b]).map(|(x, y)| x + s * y).collect());
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
    for _ in 0..RANDOM_DIRECTIONS {
        candidates.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    let mut fallback = vec![0.0; n];
    fallback[0] = 1.0;
    candidates.push(fallback);

    let mut best: Option<(Vec<f64>, f64, usize)> = None;
    for c in candidates {
        if let Some(a) = unit_sum_zero(c) {
            let (m, j) = margin(&a, p, &others);
            if best.as_ref().is_none_or(|b| m > b.1) {
                best = Some((a, m, j));
            }
        }
    }
    best.expect("the fallback direction is nonzero for two or more outcomes")
}

fn threshold_property(name: String, normal: Vec<f64>, cut: f64) -> Property {
    Property::new(name, ValueMetric::Discrete, move |q: &Pmf| {
        Ok(PropertyValue::token(if dot(&normal, q.weights()) >= cut { "1" } else { "0" }))
    })
}

/// `share · (observed − predicted)` on the "1" level, or zeros.
fn level_one_gap(map: &LevelResidualMap, n: usize) -> Vec<f64> {
    map.entries
        .iter()
        .find(|e| e.level.same_level(&PropertyValue::token("1")))
        .map(|e| {
            let o = e.observed_dist.as_deref().unwrap_or_default();
            let p = e.predicted_dist.as_deref().unwrap_or_default();
            o.iter().zip(p).map(|(a, b)| e.weight * (a - b)).collect()
        })
        .unwrap_or_else(|| vec![0.0; n])
}

/// Checks distribution calibration of prediction `f` through two binary
/// threshold properties per predicted point, and compares with the direct
/// check. Every predicted point needs a hyperplane through it that keeps the
/// other points at distance `≥ epsilon`.
pub fn recover_distribution_calibration(scenario: &Scenario, epsilon: f64) -> Result<RecoveryOutcome> {
    if !(epsilon > 0.0) {
        return Err(Error::BadParam(format!("epsilon must be positive, got {epsilon}")));
    }
    scenario.require_prediction("f")?;
    let ds = &scenario.dataset;
    let space = ds.space();
    let n = space.len();

    let mut image: Vec<Pmf> = Vec::new();
    let mut mass: Vec<f64> = Vec::new();
    for r in ds.records() {
        let f = r.pmf_prediction("f")?;
        match image.iter().position(|q| PropertyValue::Distribution(q.clone()).same_level(&PropertyValue::Distribution(f.clone()))) {
            Some(k) => mass[k] += r.weight,
            None => {
                image.push(f.clone());
                mass.push(r.weight);
            }
        }
    }
    let total = ds.total_weight();
    let coords: Vec<Vec<f64>> = image.iter().map(|p| p.weights().to_vec()).collect();

    let full = make_standard_property(space, &StandardKind::FullDistribution)?;
    let full_residual = distribution_calibration(ds, "f", &full)?.max_residual();

    let mut points = Vec::new();
    let mut per_hyperplane = Vec::new();
    for (i, p) in image.iter().enumerate() {
        let (normal, separation, other) = if image.len() > 1 {
            separating_normal(&coords, i)
        } else {
            let mut a = vec![0.0; n];
            a[0] = 1.0;
            (unit_sum_zero(a).expect("nonzero"), f64::INFINITY, i)
        };
        if separation < epsilon {
            return Err(Error::SeparationFailure {
                point: i,
                other,
                distance: separation,
            });
        }
        let center = dot(&normal, p.weights());
        let half = epsilon / 2.0;
        let lower = threshold_property(format!("slab{i}_lower"), normal.clone(), center - half);
        let upper = threshold_property(format!("slab{i}_upper"), normal.clone(), center + half);
        let lower_map = distribution_calibration(ds, "f", &lower)?;
        let upper_map = distribution_calibration(ds, "f", &upper)?;
        for (side, map) in [("lower", &lower_map), ("upper", &upper_map)] {
            per_hyperplane.push(HyperplaneCheck {
                point: i,
                side,
                residual: map.max_residual(),
            });
        }
        let share = mass[i] / total;
        let recovered_residual = level_one_gap(&lower_map, n)
            .iter()
            .zip(level_one_gap(&upper_map, n))
            .map(|(a, b)| (a - b).abs() / share)
            .fold(0.0, f64::max);
        points.push(PointRecovery {
            point: p.clone(),
            normal,
            separation,
            recovered_residual,
            flagged: recovered_residual > ZERO_TOL,
        });
    }
    let full_ok = full_residual <= ZERO_TOL;
    let binary_ok = per_hyperplane.iter().all(|h| h.residual <= ZERO_TOL);
    Ok(RecoveryOutcome {
        recovered: full_ok == binary_ok,
        full_residual,
        points,
        per_hyperplane,
    })
}
