//! Properties `Γ: Δ(Y) → R`, their value-space metrics, a catalog of standard
//! properties, refinement and a randomized level-set convexity check.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, ValueKind};
use crate::outcomes::{mixture, total_variation, OutcomeSpace, Pmf};

/// Token returned by [`StandardKind::SimpleBinary`] when `P(Y = 1) > q`.
pub const TOKEN_A: &str = "a";
/// Token returned by [`StandardKind::SimpleBinary`] when `P(Y = 1) ≤ q`.
pub const TOKEN_B: &str = "b";

/// Slack applied to cumulative sums when locating lower quantiles.
const CDF_TOL: f64 = 1e-12;
/// Distance below which two property values count as equal.
pub const VALUE_TOL: f64 = 1e-9;

/// A value of some property.
#[derive(Debug, Clone, PartialEq)]
pub enum PropertyValue {
    Real(f64),
    Token(String),
    /// Outcome labels, most probable first.
    Ranking(Vec<String>),
    Distribution(Pmf),
}

impl PropertyValue {
    pub fn token(s: impl Into<String>) -> Self {
        PropertyValue::Token(s.into())
    }

    pub fn kind(&self) -> ValueKind {
        match self {
            PropertyValue::Real(_) => ValueKind::Real,
            PropertyValue::Token(_) => ValueKind::Token,
            PropertyValue::Ranking(_) => ValueKind::Ranking,
            PropertyValue::Distribution(_) => ValueKind::Distribution,
        }
    }

    pub fn as_real(&self) -> Result<f64> {
        match self {
            PropertyValue::Real(v) => Ok(*v),
            other => Err(Error::KindMismatch {
                expected: ValueKind::Real,
                got: other.kind(),
            }),
        }
    }

    pub fn as_token(&self) -> Result<&str> {
        match self {
            PropertyValue::Token(t) => Ok(t),
            other => Err(Error::KindMismatch {
                expected: ValueKind::Token,
                got: other.kind(),
            }),
        }
    }

    pub fn as_pmf(&self) -> Result<&Pmf> {
        match self {
            PropertyValue::Distribution(p) => Ok(p),
            other => Err(Error::KindMismatch {
                expected: ValueKind::Distribution,
                got: other.kind(),
            }),
        }
    }

    /// A total order: first by kind, then by value. Reals use IEEE total order.
    pub fn total_cmp(&self, other: &Self) -> Ordering {
        use PropertyValue::*;
        match (self, other) {
            (Real(a), Real(b)) => a.total_cmp(b),
            (Token(a), Token(b)) => a.cmp(b),
            (Ranking(a), Ranking(b)) => a.cmp(b),
            (Distribution(a), Distribution(b)) => a
                .weights()
                .iter()
                .zip(b.weights())
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal),
            _ => self.kind().cmp(&other.kind()),
        }
    }

    /// Whether two prediction values define the same level set. Reals compare
    /// with `==`, so `0.0` and `-0.0` coincide.
    pub fn same_level(&self, other: &Self) -> bool {
        match (self, other) {
            (PropertyValue::Real(a), PropertyValue::Real(b)) => a == b,
            _ => self == other,
        }
    }
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Real(v) => write!(f, "{v}"),
            PropertyValue::Token(t) => f.write_str(t),
            PropertyValue::Ranking(r) => write!(f, "[{}]", r.join(" > ")),
            PropertyValue::Distribution(p) => write!(f, "{p}"),
        }
    }
}

/// Metric on a property's value space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueMetric {
    AbsDiff,
    Discrete,
    TotalVariation,
}

impl ValueMetric {
    pub fn name(&self) -> &'static str {
        match self {
            ValueMetric::AbsDiff => "abs_diff",
            ValueMetric::Discrete => "discrete",
            ValueMetric::TotalVariation => "total_variation",
        }
    }

    /// The conventional metric for a kind of value.
    pub fn for_kind(kind: ValueKind) -> Self {
        match kind {
            ValueKind::Real => ValueMetric::AbsDiff,
            ValueKind::Token | ValueKind::Ranking => ValueMetric::Discrete,
            ValueKind::Distribution => ValueMetric::TotalVariation,
        }
    }
}

pub fn value_distance(metric: ValueMetric, a: &PropertyValue, b: &PropertyValue) -> Result<f64> {
    use PropertyValue::*;
    let mismatch = |expected: ValueKind, got: &PropertyValue| Error::KindMismatch {
        expected,
        got: got.kind(),
    };
    match metric {
        ValueMetric::AbsDiff => match (a, b) {
            (Real(x), Real(y)) => Ok((x - y).abs()),
            (Real(_), other) | (other, _) => Err(mismatch(ValueKind::Real, other)),
        },
        ValueMetric::Discrete => match (a, b) {
            (Token(x), Token(y)) => Ok(if x == y { 0.0 } else { 1.0 }),
            (Ranking(x), Ranking(y)) => Ok(if x == y { 0.0 } else { 1.0 }),
            (Token(_), other) => Err(mismatch(ValueKind::Token, other)),
            (Ranking(_), other) => Err(mismatch(ValueKind::Ranking, other)),
            (other, _) => Err(mismatch(ValueKind::Token, other)),
        },
        ValueMetric::TotalVariation => match (a, b) {
            (Distribution(p), Distribution(q)) => total_variation(p, q),
            (Distribution(_), other) | (other, _) => {
                Err(mismatch(ValueKind::Distribution, other))
            }
        },
    }
}

/// Catalog entries accepted by [`make_standard_property`].
#[derive(Debug, Clone, PartialEq)]
pub enum StandardKind {
    Mean,
    Quantile { tau: f64 },
    Mode,
    Ranking,
    Variance,
    Cvar { tau: f64 },
    /// `E g(Y) / E h(Y)` with `g`, `h` given per label.
    RatioOfExpectations {
        g: Vec<f64>,
        h: Vec<f64>,
        /// Declared `(N_h, M_h)`; `h` must lie within.
        h_bounds: Option<(f64, f64)>,
    },
    SimpleBinary { q: f64 },
    FullDistribution,
}

impl StandardKind {
    pub fn token(&self) -> &'static str {
        match self {
            StandardKind::Mean => "mean",
            StandardKind::Quantile { .. } => "quantile",
            StandardKind::Mode => "mode",
            StandardKind::Ranking => "ranking",
            StandardKind::Variance => "variance",
            StandardKind::Cvar { .. } => "cvar",
            StandardKind::RatioOfExpectations { .. } => "ratio_of_expectations",
            StandardKind::SimpleBinary { .. } => "simple_binary",
            StandardKind::FullDistribution => "full_distribution",
        }
    }

    pub fn value_kind(&self) -> ValueKind {
        match self {
            StandardKind::Mode | StandardKind::SimpleBinary { .. } => ValueKind::Token,
            StandardKind::Ranking => ValueKind::Ranking,
            StandardKind::FullDistribution => ValueKind::Distribution,
            _ => ValueKind::Real,
        }
    }
}

pub type Evaluator = Arc<dyn Fn(&Pmf) -> Result<PropertyValue> + Send + Sync>;
pub type ValueMap = Arc<dyn Fn(&PropertyValue) -> Result<PropertyValue> + Send + Sync>;

/// A property: a deterministic map from pmfs to values, with a metric.
#[derive(Clone)]
pub struct Property {
    name: String,
    evaluator: Evaluator,
    metric: ValueMetric,
    value_grid: Option<Vec<PropertyValue>>,
    space: Option<Arc<OutcomeSpace>>,
    lipschitz: Option<f64>,
    convex_level_sets: Option<bool>,
    standard: Option<StandardKind>,
}

impl fmt::Debug for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Property")
            .field("name", &self.name)
            .field("metric", &self.metric)
            .field("grid_len", &self.value_grid.as_ref().map(Vec::len))
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl Property {
    pub fn new(
        name: impl Into<String>,
        metric: ValueMetric,
        evaluator: impl Fn(&Pmf) -> Result<PropertyValue> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            evaluator: Arc::new(evaluator),
            metric,
            value_grid: None,
            space: None,
            lipschitz: None,
            convex_level_sets: None,
            standard: None,
        }
    }

    pub fn with_grid(mut self, grid: Vec<PropertyValue>) -> Self {
        self.value_grid = Some(grid);
        self
    }

    /// Declares a Lipschitz constant with respect to total variation on the
    /// input and the value metric on the output.
    pub fn with_lipschitz(mut self, k: f64) -> Self {
        self.lipschitz = Some(k);
        self
    }

    pub fn with_convex_level_sets(mut self, convex: bool) -> Self {
        self.convex_level_sets = Some(convex);
        self
    }

    /// Restricts evaluation to pmfs on `space`.
    pub fn on_space(mut self, space: &Arc<OutcomeSpace>) -> Self {
        self.space = Some(Arc::clone(space));
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn metric(&self) -> ValueMetric {
        self.metric
    }

    pub fn value_grid(&self) -> Option<&[PropertyValue]> {
        self.value_grid.as_deref()
    }

    pub fn space(&self) -> Option<&Arc<OutcomeSpace>> {
        self.space.as_ref()
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    /// Declared level-set convexity, if known.
    pub fn convex_level_sets(&self) -> Option<bool> {
        self.convex_level_sets
    }

    pub fn standard_kind(&self) -> Option<&StandardKind> {
        self.standard.as_ref()
    }

    pub fn evaluate(&self, p: &Pmf) -> Result<PropertyValue> {
        if let Some(space) = &self.space {
            p.ensure_space(space)?;
        }
        (self.evaluator)(p)
    }

    /// Distance between two values under this property's metric.
    pub fn distance(&self, a: &PropertyValue, b: &PropertyValue) -> Result<f64> {
        value_distance(self.metric, a, b)
    }
}

fn embedding_of<'a>(space: &'a OutcomeSpace, what: &str) -> Result<&'a [f64]> {
    space
        .embedding()
        .ok_or_else(|| Error::MissingEmbedding(what.to_string()))
}

fn check_level(name: &str, tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::BadParam(format!("{name} level τ = {tau} must lie in (0, 1)")))
    }
}

fn range(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        })
}

/// Lower quantile: the smallest embedding value whose CDF reaches `tau`.
pub fn lower_quantile(p: &Pmf, embedding: &[f64], tau: f64) -> f64 {
    let mut order: Vec<usize> = (0..embedding.len()).collect();
    order.sort_by(|&a, &b| embedding[a].total_cmp(&embedding[b]));
    let mut cdf = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cdf += p.prob(i);
        let run_ends = order
            .get(k + 1)
            .is_none_or(|&j| embedding[j] != embedding[i]);
        if run_ends && cdf >= tau - CDF_TOL {
            return embedding[i];
        }
    }
    embedding[order[order.len() - 1]]
}

/// Labels sorted by decreasing probability; ties keep label order.
pub fn ranking_of(p: &Pmf) -> Vec<String> {
    let mut order: Vec<usize> = (0..p.weights().len()).collect();
    order.sort_by(|&a, &b| p.prob(b).total_cmp(&p.prob(a)));
    order
        .into_iter()
        .map(|i| p.space().label(i).to_string())
        .collect()
}

/// Index of the most probable label; the first label wins ties.
pub fn mode_index(p: &Pmf) -> usize {
    let mut best = 0;
    for (i, w) in p.weights().iter().enumerate() {
        if *w > p.prob(best) {
            best = i;
        }
    }
    best
}

/// Builds a catalog property on `space` with its conventional metric.
pub fn make_standard_property(space: &Arc<OutcomeSpace>, kind: &StandardKind) -> Result<Property> {
    let token = kind.token();
    let metric = ValueMetric::for_kind(kind.value_kind());
    let prop = match kind {
        StandardKind::Mean => {
            let e = embedding_of(space, token)?.to_vec();
            let (lo, hi) = range(&e);
            Property::new(token, metric, move |p| Ok(PropertyValue::Real(p.expect(|i| e[i]))))
                .with_lipschitz(hi - lo)
                .with_convex_level_sets(true)
        }
        StandardKind::Quantile { tau } => {
            check_level(token, *tau)?;
            let e = embedding_of(space, token)?.to_vec();
            let mut grid = e.clone();
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let tau = *tau;
            Property::new(format!("quantile({tau})"), metric, move |p| {
                Ok(PropertyValue::Real(lower_quantile(p, &e, tau)))
            })
            .with_grid(grid.into_iter().map(PropertyValue::Real).collect())
            .with_convex_level_sets(true)
        }
        StandardKind::Mode => {
            let grid = space
                .labels()
                .iter()
                .map(|l| PropertyValue::Token(l.clone()))
                .collect();
            Property::new(token, metric, |p| {
                Ok(PropertyValue::Token(p.space().label(mode_index(p)).to_string()))
            })
            .with_grid(grid)
            .with_convex_level_sets(true)
        }
        StandardKind::Ranking => Property::new(token, metric, |p| {
            Ok(PropertyValue::Ranking(ranking_of(p)))
        })
        .with_convex_level_sets(true),
        StandardKind::Variance => {
            let e = embedding_of(space, token)?.to_vec();
            let (lo, hi) = range(&e);
            let squares: Vec<f64> = e.iter().map(|v| v * v).collect();
            let (slo, shi) = range(&squares);
            let k = (shi - slo) + 2.0 * lo.abs().max(hi.abs()) * (hi - lo);
            Property::new(token, metric, move |p| {
                let mu = p.expect(|i| e[i]);
                Ok(PropertyValue::Real(p.expect(|i| (e[i] - mu) * (e[i] - mu))))
            })
            .with_lipschitz(k)
            .with_convex_level_sets(false)
        }
        StandardKind::Cvar { tau } => {
            check_level(token, *tau)?;
            let e = embedding_of(space, token)?.to_vec();
            let (lo, hi) = range(&e);
            let tau = *tau;
            Property::new(format!("cvar({tau})"), metric, move |p| {
                Ok(PropertyValue::Real(cvar(p, &e, tau)))
            })
            .with_lipschitz((hi - lo) / (1.0 - tau))
            .with_convex_level_sets(false)
        }
        StandardKind::RatioOfExpectations { g, h, h_bounds } => {
            embedding_of(space, token)?;
            for v in [g, h] {
                if v.len() != space.len() {
                    return Err(Error::LengthMismatch {
                        expected: space.len(),
                        got: v.len(),
                    });
                }
            }
            let (n_h, m_h) = match h_bounds {
                Some((n, m)) => (*n, *m),
                None => range(h),
            };
            if !(n_h > 0.0 && n_h <= m_h) {
                return Err(Error::BadParam(format!(
                    "ratio denominator bounds ({n_h}, {m_h}) must satisfy 0 < N_h ≤ M_h"
                )));
            }
            if let Some(bad) = h.iter().find(|v| **v < n_h || **v > m_h || !v.is_finite()) {
                return Err(Error::BadParam(format!(
                    "h value {bad} outside [{n_h}, {m_h}]"
                )));
            }
            // Γ(p) − Γ(q) = E_p[g − Γ(q) h] / E_p h, and Γ(q) lies between the
            // extreme ratios g/h, where the oscillation is largest.
            let ratios: Vec<f64> = g.iter().zip(h).map(|(a, b)| a / b).collect();
            let (rlo, rhi) = range(&ratios);
            let osc = |r: f64| {
                let shifted: Vec<f64> = g.iter().zip(h).map(|(a, b)| a - r * b).collect();
                let (lo, hi) = range(&shifted);
                hi - lo
            };
            let k = osc(rlo).max(osc(rhi)) / range(h).0;
            let (g, h) = (g.clone(), h.clone());
            Property::new(token, metric, move |p| {
                Ok(PropertyValue::Real(p.expect(|i| g[i]) / p.expect(|i| h[i])))
            })
            .with_lipschitz(k)
            .with_convex_level_sets(true)
        }
        StandardKind::SimpleBinary { q } => {
            if space.len() != 2 {
                return Err(Error::NotBinary);
            }
            if !(0.0..=1.0).contains(q) {
                return Err(Error::BadParam(format!("simple-loss cost q = {q} must lie in [0, 1]")));
            }
            let q = *q;
            Property::new(format!("simple_binary({q})"), metric, move |p| {
                Ok(PropertyValue::token(if p.prob(1) > q { TOKEN_A } else { TOKEN_B }))
            })
            .with_grid(vec![PropertyValue::token(TOKEN_B), PropertyValue::token(TOKEN_A)])
            .with_convex_level_sets(true)
        }
        StandardKind::FullDistribution => Property::new(token, metric, |p| {
            Ok(PropertyValue::Distribution(p.clone()))
        })
        .with_lipschitz(1.0)
        .with_convex_level_sets(true),
    };
    let mut prop = prop.on_space(space);
    prop.standard = Some(kind.clone());
    Ok(prop)
}

/// `v + E[(Y − v)₊] / (1 − τ)` at the lower `τ`-quantile `v`.
pub fn cvar(p: &Pmf, embedding: &[f64], tau: f64) -> f64 {
    let v = lower_quantile(p, embedding, tau);
    v + p.expect(|i| (embedding[i] - v).max(0.0)) / (1.0 - tau)
}

/// The refined property `φ ∘ Γ`.
pub fn refine(
    gamma: &Property,
    phi: impl Fn(&PropertyValue) -> Result<PropertyValue> + Send + Sync + 'static,
    new_metric: ValueMetric,
    name: impl Into<String>,
) -> Result<Property> {
    let phi: ValueMap = Arc::new(phi);
    let grid = match gamma.value_grid() {
        Some(grid) => {
            let mut image: Vec<PropertyValue> = Vec::new();
            for v in grid {
                let w = phi(v)?;
                if !image.iter().any(|u| u.same_level(&w)) {
                    image.push(w);
                }
            }
            Some(image)
        }
        None => None,
    };
    let inner = gamma.clone();
    let phi_eval = Arc::clone(&phi);
    let mut refined = Property::new(name, new_metric, move |p| phi_eval(&inner.evaluate(p)?));
    refined.value_grid = grid;
    refined.space = gamma.space.clone();
    Ok(refined)
}

/// Outcome of [`level_set_convexity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityOutcome {
    pub convex: bool,
    /// `(p, q, λ)` with `Γ(p) = Γ(q) ≠ Γ(λp + (1−λ)q)`.
    pub witness: Option<(Pmf, Pmf, f64)>,
    pub trials: usize,
}

const PARTNER_REJECTIONS: usize = 200;
const PARTNER_BRACKETS: usize = 40;
const ANCHOR_RESAMPLES: usize = 50;

/// Searches for a violation of level-set convexity by sampling equal-valued
/// pairs from the uniform simplex. `convex = true` only means no
/// counterexample turned up.
pub fn level_set_convexity_check(
    prop: &Property,
    space: &Arc<OutcomeSpace>,
    n_trials: usize,
    seed: u64,
) -> Result<ConvexityOutcome> {
    if n_trials == 0 {
        return Err(Error::BadParam("n_trials must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..n_trials {
        let (p, q) = equal_valued_pair(prop, space, &mut rng)?;
        let target = prop.evaluate(&p)?;
        let lambda_random: f64 = rng.gen_range(f64::EPSILON..1.0);
        for lambda in [0.5, lambda_random] {
            let mid = mixture(&[p.clone(), q.clone()], &[lambda, 1.0 - lambda])?;
            if prop.distance(&prop.evaluate(&mid)?, &target)? > VALUE_TOL {
                return Ok(ConvexityOutcome {
                    convex: false,
                    witness: Some((p, q, lambda)),
                    trials: trial + 1,
                });
            }
        }
    }
    Ok(ConvexityOutcome {
        convex: true,
        witness: None,
        trials: n_trials,
    })
}

fn equal_valued_pair(
    prop: &Property,
    space: &Arc<OutcomeSpace>,
    rng: &mut ChaCha8Rng,
) -> Result<(Pmf, Pmf)> {
    for _ in 0..ANCHOR_RESAMPLES {
        let p = Pmf::sample_uniform(space, rng);
        let target = prop.evaluate(&p)?;
        if let Some(q) = find_partner(prop, space, &target, rng)? {
            return Ok((p, q));
        }
    }
    Err(Error::RejectionBudgetExceeded(prop.name().to_string()))
}

fn find_partner(
    prop: &Property,
    space: &Arc<OutcomeSpace>,
    target: &PropertyValue,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Pmf>> {
    for _ in 0..PARTNER_REJECTIONS {
        let q = Pmf::sample_uniform(space, rng);
        if prop.distance(&prop.evaluate(&q)?, target)? <= VALUE_TOL {
            return Ok(Some(q));
        }
    }
    let PropertyValue::Real(t) = *target else {
        return Ok(None);
    };
    // Real-valued: bracket the target along a random segment and bisect.
    for _ in 0..PARTNER_BRACKETS {
        let r = Pmf::sample_uniform(space, rng);
        let s = Pmf::sample_uniform(space, rng);
        let at = |lambda: f64| -> Result<(Pmf, f64)> {
            let m = mixture(&[r.clone(), s.clone()], &[1.0 - lambda, lambda])?;
            let v = prop.evaluate(&m)?.as_real()?;
            Ok((m, v))
        };
        let (_, vr) = at(0.0)?;
        let (_, vs) = at(1.0)?;
        if (vr - t) * (vs - t) > 0.0 {
            continue;
        }
        let rising = vs >= vr;
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (_, v) = at(mid)?;
            if (v < t) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for lambda in [lo, hi] {
            let (m, v) = at(lambda)?;
            if (v - t).abs() <= 1e-12 * (1.0 + t.abs()) {
                return Ok(Some(m));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three() -> Arc<OutcomeSpace> {
        OutcomeSpace::numeric(&[0.0, 1.0, 2.0]).unwrap()
    }

    #[test]
    fn catalog_examples() {
        let binary = OutcomeSpace::binary();
        let p = Pmf::new(&binary, vec![0.3, 0.7]).unwrap();
        let mean = make_standard_property(&binary, &StandardKind::Mean).unwrap();
        assert_eq!(mean.evaluate(&p).unwrap(), PropertyValue::Real(0.7));

        let space = three();
        let mode = make_standard_property(&space, &StandardKind::Mode).unwrap();
        let p3 = Pmf::new(&space, vec![0.2, 0.5, 0.3]).unwrap();
        assert_eq!(mode.evaluate(&p3).unwrap(), PropertyValue::token("1"));

        let simple = make_standard_property(&binary, &StandardKind::SimpleBinary { q: 0.4 }).unwrap();
        assert_eq!(simple.evaluate(&p).unwrap(), PropertyValue::token("a"));
        let at_q = Pmf::new(&binary, vec![0.6, 0.4]).unwrap();
        assert_eq!(simple.evaluate(&at_q).unwrap(), PropertyValue::token("b"));
    }

    #[test]
    fn ties_go_to_first_label() {
        let space = three();
        let p = Pmf::new(&space, vec![0.4, 0.2, 0.4]).unwrap();
        assert_eq!(mode_index(&p), 0);
        assert_eq!(ranking_of(&p), vec!["0", "2", "1"]);
    }

    #[test]
    fn quantile_and_cvar() {
        let space = three();
        let q = make_standard_property(&space, &StandardKind::Quantile { tau: 0.5 }).unwrap();
        assert_eq!(q.evaluate(&Pmf::point_mass(&space, 2)).unwrap(), PropertyValue::Real(2.0));

        let binary = OutcomeSpace::binary();
        let half = Pmf::uniform(&binary);
        let c = make_standard_property(&binary, &StandardKind::Cvar { tau: 0.5 }).unwrap();
        assert_eq!(c.evaluate(&half).unwrap(), PropertyValue::Real(1.0));
    }

    #[test]
    fn variance_is_bernoulli() {
        let binary = OutcomeSpace::binary();
        let var = make_standard_property(&binary, &StandardKind::Variance).unwrap();
        for p in [0.0, 0.1, 0.5, 0.77, 1.0] {
            let v = var.evaluate(&Pmf::bernoulli(&binary, p).unwrap()).unwrap().as_real().unwrap();
            assert!((v - p * (1.0 - p)).abs() < 1e-15);
        }
    }

    #[test]
    fn parameter_errors() {
        let space = three();
        let unembedded = OutcomeSpace::new(["x", "y"]).unwrap();
        assert!(matches!(
            make_standard_property(&unembedded, &StandardKind::Mean),
            Err(Error::MissingEmbedding(_))
        ));
        assert!(matches!(
            make_standard_property(&space, &StandardKind::Quantile { tau: 1.0 }),
            Err(Error::BadParam(_))
        ));
        assert!(matches!(
            make_standard_property(&space, &StandardKind::SimpleBinary { q: 0.5 }),
            Err(Error::NotBinary)
        ));
        let bad_h = StandardKind::RatioOfExpectations {
            g: vec![0.0, 1.0, 2.0],
            h: vec![1.0, 3.0, 1.0],
            h_bounds: Some((0.5, 2.0)),
        };
        assert!(matches!(make_standard_property(&space, &bad_h), Err(Error::BadParam(_))));
    }

    #[test]
    fn distances() {
        let r = |v| PropertyValue::Real(v);
        assert!((value_distance(ValueMetric::AbsDiff, &r(0.7), &r(0.4)).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(
            value_distance(ValueMetric::Discrete, &PropertyValue::token("a"), &PropertyValue::token("b")).unwrap(),
            1.0
        );
        let rank = PropertyValue::Ranking(vec!["1".into(), "0".into()]);
        assert_eq!(value_distance(ValueMetric::Discrete, &rank, &rank).unwrap(), 0.0);
        assert!(matches!(
            value_distance(ValueMetric::AbsDiff, &r(0.1), &PropertyValue::token("a")),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn refinement_grid_is_deduplicated_image() {
        let space = three();
        let q = make_standard_property(&space, &StandardKind::Quantile { tau: 0.5 }).unwrap();
        let high = refine(
            &q,
            |v| Ok(PropertyValue::token(if v.as_real()? >= 1.0 { "hi" } else { "lo" })),
            ValueMetric::Discrete,
            "high",
        )
        .unwrap();
        assert_eq!(
            high.value_grid().unwrap(),
            &[PropertyValue::token("lo"), PropertyValue::token("hi")]
        );
    }

    #[test]
    fn convexity_examples() {
        let space = three();
        let mode = make_standard_property(&space, &StandardKind::Mode).unwrap();
        assert!(level_set_convexity_check(&mode, &space, 2000, 1).unwrap().convex);
        let mean = make_standard_property(&space, &StandardKind::Mean).unwrap();
        assert!(level_set_convexity_check(&mean, &space, 200, 2).unwrap().convex);
        let var = make_standard_property(&space, &StandardKind::Variance).unwrap();
        assert!(!level_set_convexity_check(&var, &space, 200, 3).unwrap().convex);
    }

    #[test]
    fn nonconvex_band_has_midpoint_witness() {
        let binary = OutcomeSpace::binary();
        let band = Property::new("band", ValueMetric::Discrete, |p| {
            let p1 = p.prob(1);
            Ok(PropertyValue::token(if p1 <= 0.2 || p1 >= 0.8 { "1" } else { "0" }))
        });
        let out = level_set_convexity_check(&band, &binary, 1000, 5).unwrap();
        assert!(!out.convex);
        let (p, q, lambda) = out.witness.unwrap();
        let mid = mixture(&[p.clone(), q.clone()], &[lambda, 1.0 - lambda]).unwrap();
        assert_eq!(band.evaluate(&p).unwrap(), band.evaluate(&q).unwrap());
        assert_ne!(band.evaluate(&mid).unwrap(), band.evaluate(&p).unwrap());
    }
}
