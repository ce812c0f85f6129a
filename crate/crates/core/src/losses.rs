//! Losses, identification functions, the loss induced by an identification
//! function, consistency checks, simple losses and Bayes pairs.

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result, ValueKind};
use crate::outcomes::{OutcomeSpace, Pmf};
use crate::properties::{
    make_standard_property, Property, PropertyValue, StandardKind, ValueMetric, TOKEN_A, TOKEN_B,
};

/// Gap at or below which a loss counts as consistent for a property.
pub const CONSISTENCY_TOL: f64 = 1e-6;

pub type LossEval = Arc<dyn Fn(usize, &PropertyValue) -> Result<f64> + Send + Sync>;

/// A pointwise loss `ℓ(y, v)` on a fixed outcome space.
#[derive(Clone)]
pub struct LossFn {
    name: String,
    space: Arc<OutcomeSpace>,
    value_kind: ValueKind,
    eval: LossEval,
    bound_c: Option<f64>,
    quadrature: Option<Quadrature>,
    default_grid: Option<Vec<PropertyValue>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Quadrature {
    gamma0: f64,
    panels: usize,
    lipschitz_m: Option<f64>,
}

impl fmt::Debug for LossFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossFn")
            .field("name", &self.name)
            .field("value_kind", &self.value_kind)
            .field("bound_c", &self.bound_c)
            .finish()
    }
}

impl LossFn {
    pub fn new(
        name: impl Into<String>,
        space: &Arc<OutcomeSpace>,
        value_kind: ValueKind,
        eval: impl Fn(usize, &PropertyValue) -> Result<f64> + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            space: Arc::clone(space),
            value_kind,
            eval: Arc::new(eval),
            bound_c: None,
            quadrature: None,
            default_grid: None,
        }
    }

    /// Declares `C ≥ sup_r Σ_y |ℓ(y, r)|`.
    pub fn with_bound(mut self, c: f64) -> Self {
        self.bound_c = Some(c);
        self
    }

    pub fn with_default_grid(mut self, grid: Vec<PropertyValue>) -> Self {
        self.default_grid = Some(grid);
        self
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Arc<OutcomeSpace> {
        &self.space
    }

    pub fn value_kind(&self) -> ValueKind {
        self.value_kind
    }

    pub fn metric(&self) -> ValueMetric {
        ValueMetric::for_kind(self.value_kind)
    }

    pub fn bound_c(&self) -> Option<f64> {
        self.bound_c
    }

    /// Natural finite decision set, when the loss has one.
    pub fn default_grid(&self) -> Option<&[PropertyValue]> {
        self.default_grid.as_deref()
    }

    pub fn eval(&self, y: usize, v: &PropertyValue) -> Result<f64> {
        if v.kind() != self.value_kind {
            return Err(Error::KindMismatch {
                expected: self.value_kind,
                got: v.kind(),
            });
        }
        (self.eval)(y, v)
    }

    /// The declared bound, or `max_r Σ_y |ℓ(y, r)|` over `grid`.
    pub fn bound_on(&self, grid: &[PropertyValue]) -> Result<f64> {
        if let Some(c) = self.bound_c {
            return Ok(c);
        }
        let mut c: f64 = 0.0;
        for v in grid {
            let mut total = 0.0;
            for y in 0..self.space.len() {
                total += self.eval(y, v)?.abs();
            }
            c = c.max(total);
        }
        Ok(c)
    }

    /// `max_y ℓ(y, v) − min_y ℓ(y, v)`.
    pub fn oscillation(&self, v: &PropertyValue) -> Result<f64> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for y in 0..self.space.len() {
            let l = self.eval(y, v)?;
            lo = lo.min(l);
            hi = hi.max(l);
        }
        Ok(hi - lo)
    }

    /// Worst-case quadrature error at `gamma`; zero for closed forms.
    pub fn quadrature_error(&self, gamma: f64) -> Option<f64> {
        match self.quadrature {
            None => Some(0.0),
            Some(q) => q.lipschitz_m.map(|m| {
                m * (gamma - q.gamma0).abs().powi(3) / (12.0 * (q.panels * q.panels) as f64)
            }),
        }
    }
}

/// `Σ_y p(y) ℓ(y, v)`.
pub fn expected_loss(loss: &LossFn, p: &Pmf, v: &PropertyValue) -> Result<f64> {
    p.ensure_space(loss.space())?;
    let mut total = 0.0;
    for (y, w) in p.weights().iter().enumerate() {
        total += w * loss.eval(y, v)?;
    }
    Ok(total)
}

/// Index of the first grid value minimizing the expected loss, and the minimum.
pub fn best_response_index(loss: &LossFn, p: &Pmf, grid: &[PropertyValue]) -> Result<(usize, f64)> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let mut best = (0, expected_loss(loss, p, &grid[0])?);
    for (i, v) in grid.iter().enumerate().skip(1) {
        let l = expected_loss(loss, p, v)?;
        if l < best.1 {
            best = (i, l);
        }
    }
    Ok(best)
}

/// Exhaustive argmin of the expected loss over `grid`; ties go to the first
/// minimal entry.
pub fn best_response(loss: &LossFn, p: &Pmf, grid: &[PropertyValue]) -> Result<(PropertyValue, f64)> {
    let (i, risk) = best_response_index(loss, p, grid)?;
    Ok((grid[i].clone(), risk))
}

fn embedding(space: &OutcomeSpace, what: &str) -> Result<Vec<f64>> {
    space
        .embedding()
        .map(<[f64]>::to_vec)
        .ok_or_else(|| Error::MissingEmbedding(what.to_string()))
}

fn sorted_embedding_grid(e: &[f64]) -> Vec<PropertyValue> {
    let mut values = e.to_vec();
    values.sort_by(f64::total_cmp);
    values.dedup();
    values.into_iter().map(PropertyValue::Real).collect()
}

/// `scale · (y − γ)²`.
pub fn squared_loss(space: &Arc<OutcomeSpace>, scale: f64) -> Result<LossFn> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::BadParam(format!("squared-loss scale {scale} must be positive")));
    }
    let e = embedding(space, "squared")?;
    Ok(LossFn::new("squared", space, ValueKind::Real, move |y, v| {
        let d = e[y] - v.as_real()?;
        Ok(scale * d * d)
    }))
}

fn pinball(tau: f64, y: f64, gamma: f64) -> f64 {
    if y < gamma {
        (1.0 - tau) * (gamma - y)
    } else {
        tau * (y - gamma)
    }
}

/// The pinball loss, whose `γ`-derivative is the quantile identification
/// function.
pub fn pinball_loss(space: &Arc<OutcomeSpace>, tau: f64) -> Result<LossFn> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::BadParam(format!("pinball level τ = {tau} must lie in (0, 1)")));
    }
    let e = embedding(space, "pinball")?;
    let grid = sorted_embedding_grid(&e);
    Ok(
        LossFn::new(format!("pinball({tau})"), space, ValueKind::Real, move |y, v| {
            Ok(pinball(tau, e[y], v.as_real()?))
        })
        .with_default_grid(grid),
    )
}

/// `⟦label(y) ≠ c⟧` over label tokens; elicits the mode.
pub fn zero_one_loss(space: &Arc<OutcomeSpace>) -> LossFn {
    let labels = space.labels().to_vec();
    let grid = labels.iter().map(|l| PropertyValue::Token(l.clone())).collect();
    LossFn::new("zero_one", space, ValueKind::Token, move |y, v| {
        Ok(if labels[y] == v.as_token()? { 0.0 } else { 1.0 })
    })
    .with_bound((space.len() - 1) as f64)
    .with_default_grid(grid)
}

/// `ℓ_q(y, c) = q·⟦y = 0, c = a⟧ + (1 − q)·⟦y = 1, c = b⟧` together with the
/// property it elicits.
pub fn make_simple_loss(space: &Arc<OutcomeSpace>, q: f64) -> Result<(LossFn, Property)> {
    let prop = make_standard_property(space, &StandardKind::SimpleBinary { q })?;
    let loss = LossFn::new(format!("simple({q})"), space, ValueKind::Token, move |y, v| {
        let c = v.as_token()?;
        if c != TOKEN_A && c != TOKEN_B {
            return Err(Error::BadParam(format!("simple-loss decision `{c}` is neither a nor b")));
        }
        Ok(match (y, c) {
            (0, TOKEN_A) => q,
            (1, TOKEN_B) => 1.0 - q,
            _ => 0.0,
        })
    })
    .with_bound(2.0 * q.max(1.0 - q))
    .with_default_grid(vec![PropertyValue::token(TOKEN_B), PropertyValue::token(TOKEN_A)]);
    Ok((loss, prop))
}

/// How an identification function depends on `γ`.
#[derive(Clone)]
pub enum IdentForm {
    /// `V(y, γ) = a_y·γ + b_y`.
    Affine { a: Vec<f64>, b: Vec<f64> },
    /// `(1 − τ)⟦y < γ⟧ − τ⟦y > γ⟧` on the embedding.
    Quantile { tau: f64, embedding: Vec<f64> },
    General(Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>),
}

/// An identification function `V(y, γ)` with declared regularity.
#[derive(Clone)]
pub struct IdentificationFn {
    name: String,
    space: Arc<OutcomeSpace>,
    form: IdentForm,
    oriented: bool,
    lipschitz_m: Option<f64>,
    nonconstant_n: Option<f64>,
}

impl fmt::Debug for IdentificationFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IdentificationFn")
            .field("name", &self.name)
            .field("oriented", &self.oriented)
            .field("lipschitz_m", &self.lipschitz_m)
            .field("nonconstant_n", &self.nonconstant_n)
            .finish()
    }
}

impl IdentificationFn {
    pub fn new(
        name: impl Into<String>,
        space: &Arc<OutcomeSpace>,
        form: IdentForm,
        oriented: bool,
        nonconstant_n: Option<f64>,
        lipschitz_m: Option<f64>,
    ) -> Result<Self> {
        if let IdentForm::Affine { a, b } = &form {
            for v in [a, b] {
                if v.len() != space.len() {
                    return Err(Error::LengthMismatch {
                        expected: space.len(),
                        got: v.len(),
                    });
                }
            }
        }
        if let (Some(n), Some(m)) = (nonconstant_n, lipschitz_m) {
            if !(n > 0.0 && n <= m) {
                return Err(Error::BadParam(format!(
                    "regularity constants must satisfy 0 < N ≤ M, got N = {n}, M = {m}"
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            space: Arc::clone(space),
            form,
            oriented,
            lipschitz_m,
            nonconstant_n,
        })
    }

    /// `γ − y`, identifying the mean with `N = M = 1`.
    pub fn mean(space: &Arc<OutcomeSpace>) -> Result<Self> {
        let e = embedding(space, "mean identification")?;
        let form = IdentForm::Affine {
            a: vec![1.0; e.len()],
            b: e.iter().map(|y| -y).collect(),
        };
        Self::new("mean", space, form, true, Some(1.0), Some(1.0))
    }

    /// `h(y)·γ − g(y)`, identifying `E g / E h` with `N = min h`, `M = max h`.
    pub fn ratio(space: &Arc<OutcomeSpace>, g: &[f64], h: &[f64]) -> Result<Self> {
        if g.len() != space.len() || h.len() != space.len() {
            return Err(Error::LengthMismatch {
                expected: space.len(),
                got: g.len().min(h.len()),
            });
        }
        let n = h.iter().copied().fold(f64::INFINITY, f64::min);
        let m = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if n <= 0.0 {
            return Err(Error::BadParam("ratio denominator h must be positive".into()));
        }
        let form = IdentForm::Affine {
            a: h.to_vec(),
            b: g.iter().map(|v| -v).collect(),
        };
        Self::new("ratio_of_expectations", space, form, true, Some(n), Some(m))
    }

    /// The quantile identification `(1 − τ)⟦y < γ⟧ − τ⟦y > γ⟧`. Its regularity
    /// depends on the outcome distribution, so none is declared.
    pub fn quantile(space: &Arc<OutcomeSpace>, tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::BadParam(format!("quantile level τ = {tau} must lie in (0, 1)")));
        }
        let e = embedding(space, "quantile identification")?;
        Self::new(
            format!("quantile({tau})"),
            space,
            IdentForm::Quantile { tau, embedding: e },
            true,
            None,
            None,
        )
    }

    /// Variance on the level set `{mean = v}`: `γ − (y² − v²)`.
    pub fn variance_given_mean(space: &Arc<OutcomeSpace>, v: f64) -> Result<Self> {
        let e = embedding(space, "variance identification")?;
        let form = IdentForm::Affine {
            a: vec![1.0; e.len()],
            b: e.iter().map(|y| -(y * y - v * v)).collect(),
        };
        Self::new(format!("variance|mean={v}"), space, form, true, Some(1.0), Some(1.0))
    }

    /// CVaR on the level set `{τ-quantile = v}`: `γ − (v + (y − v)₊ / (1 − τ))`.
    pub fn cvar_given_quantile(space: &Arc<OutcomeSpace>, tau: f64, v: f64) -> Result<Self> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::BadParam(format!("CVaR level τ = {tau} must lie in (0, 1)")));
        }
        let e = embedding(space, "CVaR identification")?;
        let form = IdentForm::Affine {
            a: vec![1.0; e.len()],
            b: e.iter().map(|y| -(v + (y - v).max(0.0) / (1.0 - tau))).collect(),
        };
        Self::new(format!("cvar({tau})|quantile={v}"), space, form, true, Some(1.0), Some(1.0))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn space(&self) -> &Arc<OutcomeSpace> {
        &self.space
    }

    pub fn form(&self) -> &IdentForm {
        &self.form
    }

    pub fn oriented(&self) -> bool {
        self.oriented
    }

    pub fn lipschitz_m(&self) -> Option<f64> {
        self.lipschitz_m
    }

    pub fn nonconstant_n(&self) -> Option<f64> {
        self.nonconstant_n
    }

    pub fn eval(&self, y: usize, gamma: f64) -> f64 {
        match &self.form {
            IdentForm::Affine { a, b } => a[y] * gamma + b[y],
            IdentForm::Quantile { tau, embedding } => {
                let v = embedding[y];
                if v < gamma {
                    1.0 - tau
                } else if v > gamma {
                    -tau
                } else {
                    0.0
                }
            }
            IdentForm::General(f) => f(y, gamma),
        }
    }

    /// `V(P, γ) = E_{Y∼P} V(Y, γ)`.
    pub fn expected(&self, p: &Pmf, gamma: f64) -> f64 {
        p.expect(|y| self.eval(y, gamma))
    }
}

/// `ℓ(y, γ) = ∫_{γ₀}^{γ} V(y, r) dr + κ(y)`, exact for affine and quantile
/// forms and composite-trapezoid otherwise.
pub fn loss_from_identification(
    v: &IdentificationFn,
    gamma0: f64,
    kappa: Option<Vec<f64>>,
    n_quad: usize,
) -> Result<LossFn> {
    if !v.oriented() {
        return Err(Error::NotOriented(v.name().to_string()));
    }
    if n_quad < 2 {
        return Err(Error::BadParam(format!("n_quad = {n_quad} must be at least 2")));
    }
    let space = Arc::clone(v.space());
    let kappa = kappa.unwrap_or_else(|| vec![0.0; space.len()]);
    if kappa.len() != space.len() {
        return Err(Error::LengthMismatch {
            expected: space.len(),
            got: kappa.len(),
        });
    }
    let name = format!("induced({})", v.name());
    let loss = match v.form().clone() {
        IdentForm::Affine { a, b } => LossFn::new(name, &space, ValueKind::Real, move |y, val| {
            let g = val.as_real()?;
            Ok(a[y] * (g * g - gamma0 * gamma0) / 2.0 + b[y] * (g - gamma0) + kappa[y])
        }),
        IdentForm::Quantile { tau, embedding } => {
            let grid = sorted_embedding_grid(&embedding);
            LossFn::new(name, &space, ValueKind::Real, move |y, val| {
                let e = embedding[y];
                Ok(pinball(tau, e, val.as_real()?) - pinball(tau, e, gamma0) + kappa[y])
            })
            .with_default_grid(grid)
        }
        IdentForm::General(f) => {
            let mut loss = LossFn::new(name, &space, ValueKind::Real, move |y, val| {
                let g = val.as_real()?;
                let h = (g - gamma0) / n_quad as f64;
                let mut total = 0.5 * (f(y, gamma0) + f(y, g));
                for k in 1..n_quad {
                    total += f(y, gamma0 + k as f64 * h);
                }
                Ok(total * h + kappa[y])
            });
            loss.quadrature = Some(Quadrature {
                gamma0,
                panels: n_quad,
                lipschitz_m: v.lipschitz_m(),
            });
            loss
        }
    };
    Ok(loss)
}

/// Converts a property value to the kind a loss consumes: label tokens map to
/// their embedding and back.
pub fn coerce_value(space: &OutcomeSpace, kind: ValueKind, v: &PropertyValue) -> Result<PropertyValue> {
    if v.kind() == kind {
        return Ok(v.clone());
    }
    let mismatch = Error::KindMismatch {
        expected: kind,
        got: v.kind(),
    };
    match (kind, v) {
        (ValueKind::Real, PropertyValue::Token(t)) => {
            let (i, e) = space.index_of(t).zip(space.embedding()).ok_or(mismatch)?;
            Ok(PropertyValue::Real(e[i]))
        }
        (ValueKind::Token, PropertyValue::Real(x)) => {
            let e = space.embedding().ok_or(mismatch.clone())?;
            let i = e.iter().position(|v| v == x).ok_or(mismatch)?;
            Ok(PropertyValue::Token(space.label(i).to_string()))
        }
        _ => Err(mismatch),
    }
}

/// Outcome of [`check_consistency`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyOutcome {
    pub consistent: bool,
    pub worst_gap: f64,
    pub witness: Option<Pmf>,
}

/// Samples pmfs and measures how far the loss's best response strays from the
/// property value. The property value itself competes with the grid, so a
/// property value that attains the minimum counts as a zero gap.
pub fn check_consistency(
    loss: &LossFn,
    prop: &Property,
    n_trials: usize,
    seed: u64,
    grid: &[PropertyValue],
) -> Result<ConsistencyOutcome> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let space = Arc::clone(loss.space());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_gap = 0.0;
    let mut witness = None;
    for _ in 0..n_trials {
        let p = Pmf::sample_uniform(&space, &mut rng);
        let target = coerce_value(&space, loss.value_kind(), &prop.evaluate(&p)?)?;
        let (argmin, min) = best_response(loss, &p, grid)?;
        let at_target = expected_loss(loss, &p, &target)?;
        let gap = if at_target <= min + 1e-12 {
            0.0
        } else {
            crate::properties::value_distance(loss.metric(), &argmin, &target)?
        };
        if gap > worst_gap {
            worst_gap = gap;
            witness = Some(p);
        }
    }
    Ok(ConsistencyOutcome {
        consistent: worst_gap <= CONSISTENCY_TOL,
        worst_gap,
        witness,
    })
}

/// The argmin property `Φ_ℓ` and Bayes-risk property `Θ_ℓ` of a loss over a
/// finite decision grid.
#[derive(Debug, Clone)]
pub struct BayesPair {
    pub loss: LossFn,
    pub grid: Vec<PropertyValue>,
    pub phi: Property,
    pub theta: Property,
}

pub fn make_bayes_pair(loss: &LossFn, grid: &[PropertyValue]) -> Result<BayesPair> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let grid = grid.to_vec();
    let (l, g) = (loss.clone(), grid.clone());
    let phi = Property::new(format!("phi[{}]", loss.name()), loss.metric(), move |p| {
        Ok(best_response(&l, p, &g)?.0)
    })
    .with_grid(grid.clone())
    .on_space(loss.space());
    let (l, g) = (loss.clone(), grid.clone());
    let theta = Property::new(format!("theta[{}]", loss.name()), ValueMetric::AbsDiff, move |p| {
        Ok(PropertyValue::Real(best_response(&l, p, &g)?.1))
    })
    .on_space(loss.space());
    Ok(BayesPair {
        loss: loss.clone(),
        grid,
        phi,
        theta,
    })
}

/// Outcome of [`estimate_identification_regularity`].
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityEstimate {
    pub oriented_ok: bool,
    pub n_hat: f64,
    pub m_hat: f64,
    /// Number of `(P, γ)` pairs that entered the ratios.
    pub pairs: usize,
}

/// Sample envelopes of `|V(P, γ)| / |γ − Γ(P)|` over uniform pmfs.
pub fn estimate_identification_regularity(
    v: &IdentificationFn,
    prop: &Property,
    n_trials: usize,
    seed: u64,
    gamma_grid: &[f64],
) -> Result<RegularityEstimate> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pmfs: Vec<Pmf> = (0..n_trials)
        .map(|_| Pmf::sample_uniform(v.space(), &mut rng))
        .collect();
    estimate_regularity_on(v, prop, &pmfs, gamma_grid)
}

/// [`estimate_identification_regularity`] over caller-supplied pmfs.
pub fn estimate_regularity_on(
    v: &IdentificationFn,
    prop: &Property,
    pmfs: &[Pmf],
    gamma_grid: &[f64],
) -> Result<RegularityEstimate> {
    let mut out = RegularityEstimate {
        oriented_ok: true,
        n_hat: f64::INFINITY,
        m_hat: 0.0,
        pairs: 0,
    };
    for p in pmfs {
        let target = prop.evaluate(p)?.as_real()?;
        for &gamma in gamma_grid {
            let d = gamma - target;
            if d.abs() <= 1e-6 {
                continue;
            }
            let value = v.expected(p, gamma);
            if value * d.signum() <= 0.0 {
                out.oriented_ok = false;
            }
            let ratio = value.abs() / d.abs();
            out.n_hat = out.n_hat.min(ratio);
            out.m_hat = out.m_hat.max(ratio);
            out.pairs += 1;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(v: f64) -> PropertyValue {
        PropertyValue::Real(v)
    }

    #[test]
    fn expected_loss_examples() {
        let binary = OutcomeSpace::binary();
        let half_sq = squared_loss(&binary, 0.5).unwrap();
        let p = Pmf::bernoulli(&binary, 0.7).unwrap();
        assert!((expected_loss(&half_sq, &p, &real(0.7)).unwrap() - 0.105).abs() < 1e-15);

        let (simple, _) = make_simple_loss(&binary, 0.4).unwrap();
        let b = PropertyValue::token("b");
        assert!((expected_loss(&simple, &p, &b).unwrap() - 0.42).abs() < 1e-15);

        let point = Pmf::point_mass(&binary, 1);
        assert_eq!(
            expected_loss(&half_sq, &point, &real(0.2)).unwrap(),
            half_sq.eval(1, &real(0.2)).unwrap()
        );
    }

    #[test]
    fn best_response_examples() {
        let binary = OutcomeSpace::binary();
        let half_sq = squared_loss(&binary, 0.5).unwrap();
        let grid: Vec<PropertyValue> = (0..=10).map(|i| real(i as f64 / 10.0)).collect();
        let p = Pmf::bernoulli(&binary, 0.7).unwrap();
        let (arg, risk) = best_response(&half_sq, &p, &grid).unwrap();
        assert_eq!(arg, real(0.7));
        assert!((risk - 0.105).abs() < 1e-15);

        let (_, risk) = best_response(&half_sq, &Pmf::point_mass(&binary, 0), &grid).unwrap();
        assert_eq!(risk, 0.0);
        assert_eq!(best_response(&half_sq, &p, &[]), Err(Error::EmptyGrid));
    }

    #[test]
    fn simple_loss_terms() {
        let binary = OutcomeSpace::binary();
        let (loss, prop) = make_simple_loss(&binary, 0.5).unwrap();
        assert_eq!(loss.eval(0, &PropertyValue::token("a")).unwrap(), 0.5);
        assert_eq!(loss.eval(1, &PropertyValue::token("b")).unwrap(), 0.5);
        assert_eq!(loss.bound_c(), Some(1.0));

        let (zero, gamma0) = make_simple_loss(&binary, 0.0).unwrap();
        assert_eq!(zero.eval(0, &PropertyValue::token("a")).unwrap(), 0.0);
        assert_eq!(
            gamma0.evaluate(&Pmf::bernoulli(&binary, 0.01).unwrap()).unwrap(),
            PropertyValue::token("a")
        );
        assert_eq!(
            prop.evaluate(&Pmf::uniform(&binary)).unwrap(),
            PropertyValue::token("b")
        );
        let three = OutcomeSpace::numeric(&[0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(make_simple_loss(&three, 0.5), Err(Error::NotBinary)));
        assert!(matches!(make_simple_loss(&binary, 1.5), Err(Error::BadParam(_))));
    }

    #[test]
    fn induced_mean_loss_is_half_squared() {
        let space = OutcomeSpace::numeric(&[-1.0, 0.0, 2.5]).unwrap();
        let v = IdentificationFn::mean(&space).unwrap();
        let kappa = vec![0.5, 0.0, 3.125];
        let loss = loss_from_identification(&v, 0.0, Some(kappa.clone()), 8).unwrap();
        for (y, e) in [-1.0, 0.0, 2.5].iter().enumerate() {
            for g in [-2.0, 0.0, 0.3, 1.7] {
                let want = 0.5 * (e - g) * (e - g);
                assert!((loss.eval(y, &real(g)).unwrap() - want).abs() < 1e-12);
            }
            assert_eq!(loss.eval(y, &real(0.0)).unwrap(), kappa[y]);
        }
        assert_eq!(loss.quadrature_error(5.0), Some(0.0));
    }

    #[test]
    fn general_form_uses_trapezoid_with_bound() {
        let space = OutcomeSpace::numeric(&[0.0, 1.0]).unwrap();
        let cubic = IdentificationFn::new(
            "cubic",
            &space,
            IdentForm::General(Arc::new(|_, g| g * g * g)),
            true,
            None,
            Some(3.0),
        )
        .unwrap();
        let loss = loss_from_identification(&cubic, 0.0, None, 64).unwrap();
        let got = loss.eval(0, &real(1.0)).unwrap();
        let err = loss.quadrature_error(1.0).unwrap();
        assert!((got - 0.25).abs() <= err);
    }

    #[test]
    fn unoriented_is_refused() {
        let space = OutcomeSpace::binary();
        let v = IdentificationFn::new(
            "flat",
            &space,
            IdentForm::General(Arc::new(|_, _| 0.0)),
            false,
            None,
            None,
        )
        .unwrap();
        assert!(matches!(
            loss_from_identification(&v, 0.0, None, 4),
            Err(Error::NotOriented(_))
        ));
    }

    #[test]
    fn consistency_examples() {
        let three = OutcomeSpace::numeric(&[0.0, 1.0, 2.0]).unwrap();
        let sq = squared_loss(&three, 1.0).unwrap();
        let mean = make_standard_property(&three, &StandardKind::Mean).unwrap();
        let grid: Vec<PropertyValue> = (0..=200).map(|i| real(i as f64 / 100.0)).collect();
        assert!(check_consistency(&sq, &mean, 1000, 3, &grid).unwrap().consistent);

        let mode = make_standard_property(&three, &StandardKind::Mode).unwrap();
        let coarse = [real(0.0), real(1.0), real(2.0)];
        let out = check_consistency(&sq, &mode, 500, 3, &coarse).unwrap();
        assert!(!out.consistent);
        let w = out.witness.unwrap();
        let m = coerce_value(&three, ValueKind::Real, &mode.evaluate(&w).unwrap()).unwrap();
        assert_ne!(best_response(&sq, &w, &coarse).unwrap().0, m);
    }

    #[test]
    fn bayes_pair_of_squared_loss_is_mean_and_variance() {
        let binary = OutcomeSpace::binary();
        let sq = squared_loss(&binary, 1.0).unwrap();
        let grid: Vec<PropertyValue> = (0..=100).map(|i| real(i as f64 / 100.0)).collect();
        let pair = make_bayes_pair(&sq, &grid).unwrap();
        let p = Pmf::bernoulli(&binary, 0.3).unwrap();
        assert_eq!(pair.phi.evaluate(&p).unwrap(), real(0.3));
        let theta = pair.theta.evaluate(&p).unwrap().as_real().unwrap();
        assert!((theta - 0.21).abs() < 1e-12);
        assert!(matches!(make_bayes_pair(&sq, &[]), Err(Error::EmptyGrid)));
    }

    #[test]
    fn regularity_of_mean() {
        let space = OutcomeSpace::numeric(&[0.0, 1.0, 3.0]).unwrap();
        let v = IdentificationFn::mean(&space).unwrap();
        let mean = make_standard_property(&space, &StandardKind::Mean).unwrap();
        let grid: Vec<f64> = (0..=30).map(|i| i as f64 / 10.0).collect();
        let est = estimate_identification_regularity(&v, &mean, 100, 11, &grid).unwrap();
        assert!(est.oriented_ok);
        assert!((est.n_hat - 1.0).abs() < 1e-9 && (est.m_hat - 1.0).abs() < 1e-9);
    }
}
