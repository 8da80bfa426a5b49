//! Index-function calculus.
//!
//! An *index function* is a continuous non-decreasing function `f` on
//! `[0, a_max]` with `f(0) = 0`. These are the currency in which smoothness
//! of the truth and the strength of the prior-to-forward-operator link are
//! expressed. This module provides the closed families used throughout
//! (powers `c·t^q`, log-powers `c·log^{-r}(1/t)`, exponential decay
//! `exp(-s·t^{-e})`), products, compositions, numerical and closed-form
//! inversion, the derived functions `Θ(t) = √t·ψ(t)` and
//! `f₀(s) = ((Θ²)^{-1}(s))^{1/2}`, the asymptotic partial ordering `≺`, and a
//! randomized refutation test for operator concavity.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// Family of an index function, used for serialization and for deciding when
/// closed-form shortcuts (inversion, trusted operator concavity) apply.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FamilyTag {
    Power,
    LogPower,
    Product,
    Composition,
    Inverse,
    Custom,
}

#[derive(Clone)]
enum Kind {
    /// `c · t^q`, `c, q > 0`.
    Power { scale: f64, exponent: f64 },
    /// `c · log^{-r}(1/t)` on `(0, 1)`, `c, r > 0`.
    LogPower { scale: f64, exponent: f64 },
    /// `exp(-s · t^{-e})`, `s, e > 0`. Tagged as custom: it is the closed
    /// shape behind severely ill-posed links.
    ExpDecay { scale: f64, exponent: f64 },
    Product(Arc<IndexFunction>, Arc<IndexFunction>),
    Composition {
        outer: Arc<IndexFunction>,
        inner: Arc<IndexFunction>,
    },
    /// Functional inverse of a strictly increasing index function,
    /// evaluated by bisection.
    Inverse(Arc<IndexFunction>),
    Custom {
        label: String,
        eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        strictly_increasing: bool,
    },
}

/// A monotone continuous function handle on `[0, a_max]` with `f(0) = 0`.
#[derive(Clone)]
pub struct IndexFunction {
    kind: Kind,
    a_max: f64,
}

impl fmt::Debug for IndexFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Power { scale, exponent } => {
                write!(f, "{scale:?}*t^{exponent:?} on [0,{:?}]", self.a_max)
            }
            Kind::LogPower { scale, exponent } => {
                write!(f, "{scale:?}*log^-{exponent:?}(1/t) on [0,{:?}]", self.a_max)
            }
            Kind::ExpDecay { scale, exponent } => {
                write!(f, "exp(-{scale:?}*t^-{exponent:?}) on [0,{:?}]", self.a_max)
            }
            Kind::Product(a, b) => write!(f, "({a:?})*({b:?})"),
            Kind::Composition { outer, inner } => write!(f, "({outer:?})∘({inner:?})"),
            Kind::Inverse(g) => write!(f, "inverse({g:?})"),
            Kind::Custom { label, .. } => write!(f, "custom[{label}] on [0,{:?}]", self.a_max),
        }
    }
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be positive and finite, got {value}"
        )));
    }
    Ok(())
}

impl IndexFunction {
    /// Power-type index function `f(t) = c·t^q`.
    pub fn power(c: f64, q: f64, a_max: f64) -> Result<Self> {
        require_positive("c", c)?;
        require_positive("q", q)?;
        require_positive("a_max", a_max)?;
        Ok(Self {
            kind: Kind::Power { scale: c, exponent: q },
            a_max,
        })
    }

    /// `f(t) = c·log^{-r}(1/t)`, increasing on `(0, 1)`; requires `a_max < 1`.
    pub fn log_power(c: f64, r: f64, a_max: f64) -> Result<Self> {
        require_positive("c", c)?;
        require_positive("r", r)?;
        require_positive("a_max", a_max)?;
        if a_max >= 1.0 {
            return Err(Error::InvalidParameter(format!(
                "log_power domain must satisfy a_max < 1, got {a_max}"
            )));
        }
        Ok(Self {
            kind: Kind::LogPower { scale: c, exponent: r },
            a_max,
        })
    }

    /// `f(t) = exp(-s·t^{-e})`, the severely ill-posed link shape.
    pub fn exp_decay(s: f64, e: f64, a_max: f64) -> Result<Self> {
        require_positive("s", s)?;
        require_positive("e", e)?;
        require_positive("a_max", a_max)?;
        Ok(Self {
            kind: Kind::ExpDecay { scale: s, exponent: e },
            a_max,
        })
    }

    /// Wrap an arbitrary evaluation handle. The caller asserts monotonicity;
    /// `validate_on_grid` is run to catch gross violations early.
    pub fn custom(
        label: impl Into<String>,
        eval: impl Fn(f64) -> f64 + Send + Sync + 'static,
        a_max: f64,
        strictly_increasing: bool,
    ) -> Result<Self> {
        require_positive("a_max", a_max)?;
        let f = Self {
            kind: Kind::Custom {
                label: label.into(),
                eval: Arc::new(eval),
                strictly_increasing,
            },
            a_max,
        };
        f.validate_on_grid(64)?;
        Ok(f)
    }

    /// `φ₀(t) = √t`, the reference smoothness.
    pub fn sqrt_fn(a_max: f64) -> Self {
        Self::power(1.0, 0.5, a_max).expect("valid parameters")
    }

    pub fn a_max(&self) -> f64 {
        self.a_max
    }

    pub fn family_tag(&self) -> FamilyTag {
        match &self.kind {
            Kind::Power { .. } => FamilyTag::Power,
            Kind::LogPower { .. } => FamilyTag::LogPower,
            Kind::ExpDecay { .. } | Kind::Custom { .. } => FamilyTag::Custom,
            Kind::Product(..) => FamilyTag::Product,
            Kind::Composition { .. } => FamilyTag::Composition,
            Kind::Inverse(..) => FamilyTag::Inverse,
        }
    }

    /// Power-family parameters `(c, q)` if this simplified to `c·t^q`.
    pub fn as_power(&self) -> Option<(f64, f64)> {
        match self.kind {
            Kind::Power { scale, exponent } => Some((scale, exponent)),
            _ => None,
        }
    }

    /// Log-power parameters `(c, r)` if this simplified to `c·log^{-r}(1/t)`.
    pub fn as_log_power(&self) -> Option<(f64, f64)> {
        match self.kind {
            Kind::LogPower { scale, exponent } => Some((scale, exponent)),
            _ => None,
        }
    }

    /// Whether the exp-decay closed form backs this handle.
    pub fn as_exp_decay(&self) -> Option<(f64, f64)> {
        match self.kind {
            Kind::ExpDecay { scale, exponent } => Some((scale, exponent)),
            _ => None,
        }
    }

    /// Evaluate. `t ≤ 0` maps to `0` (the defining limit); values beyond
    /// `a_max` evaluate the same formula, which closed families extend
    /// naturally.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            Kind::Power { scale, exponent } => scale * t.powf(*exponent),
            Kind::LogPower { scale, exponent } => {
                // ln(1/t) ≤ 0 for t ≥ 1 surfaces as NaN: out of domain.
                scale * (1.0 / t).ln().powf(-exponent)
            }
            Kind::ExpDecay { scale, exponent } => (-scale * t.powf(-exponent)).exp(),
            Kind::Product(a, b) => a.eval(t) * b.eval(t),
            Kind::Composition { outer, inner } => outer.eval(inner.eval(t)),
            Kind::Inverse(g) => bisect_inverse(g, t).unwrap_or(f64::NAN),
            Kind::Custom { eval, .. } => eval(t),
        }
    }

    /// Conservative monotonicity hint used to gate inversion.
    pub fn strictly_increasing_hint(&self) -> bool {
        match &self.kind {
            Kind::Power { .. } | Kind::LogPower { .. } | Kind::ExpDecay { .. } => true,
            Kind::Product(a, b) => a.strictly_increasing_hint() && b.strictly_increasing_hint(),
            Kind::Composition { outer, inner } => {
                outer.strictly_increasing_hint() && inner.strictly_increasing_hint()
            }
            Kind::Inverse(_) => true,
            Kind::Custom {
                strictly_increasing, ..
            } => *strictly_increasing,
        }
    }

    /// Pointwise product, simplified for power pairs.
    pub fn product(a: &Self, b: &Self) -> Self {
        let a_max = a.a_max.min(b.a_max);
        if let (Some((ca, qa)), Some((cb, qb))) = (a.as_power(), b.as_power()) {
            return Self {
                kind: Kind::Power {
                    scale: ca * cb,
                    exponent: qa + qb,
                },
                a_max,
            };
        }
        Self {
            kind: Kind::Product(Arc::new(a.clone()), Arc::new(b.clone())),
            a_max,
        }
    }

    /// Pointwise power `f(t)^e`, `e > 0`, simplified for the closed families.
    pub fn powf(&self, e: f64) -> Self {
        assert!(e > 0.0 && e.is_finite(), "exponent must be positive");
        let kind = match &self.kind {
            Kind::Power { scale, exponent } => Kind::Power {
                scale: scale.powf(e),
                exponent: exponent * e,
            },
            Kind::LogPower { scale, exponent } => Kind::LogPower {
                scale: scale.powf(e),
                exponent: exponent * e,
            },
            Kind::ExpDecay { scale, exponent } => Kind::ExpDecay {
                scale: scale * e,
                exponent: *exponent,
            },
            _ => Kind::Composition {
                outer: Arc::new(Self::power(1.0, e, f64::MAX).expect("valid parameters")),
                inner: Arc::new(self.clone()),
            },
        };
        Self {
            kind,
            a_max: self.a_max,
        }
    }

    /// Composition `outer ∘ inner`, simplified where closed forms allow.
    pub fn compose(outer: &Self, inner: &Self) -> Self {
        if let Some((co, qo)) = outer.as_power() {
            let powed = inner.powf(qo);
            if co == 1.0 {
                return Self {
                    kind: powed.kind,
                    a_max: inner.a_max,
                };
            }
            if let Some((ci, qi)) = powed.as_power() {
                return Self {
                    kind: Kind::Power {
                        scale: co * ci,
                        exponent: qi,
                    },
                    a_max: inner.a_max,
                };
            }
            if let Some((ci, ri)) = powed.as_log_power() {
                return Self {
                    kind: Kind::LogPower {
                        scale: co * ci,
                        exponent: ri,
                    },
                    a_max: inner.a_max,
                };
            }
        }
        Self {
            kind: Kind::Composition {
                outer: Arc::new(outer.clone()),
                inner: Arc::new(inner.clone()),
            },
            a_max: inner.a_max,
        }
    }

    /// Functional inverse, defined on `[0, f(a_max)]`. Closed form for the
    /// power / log-power / exp-decay families, bisection otherwise.
    pub fn inverse(&self) -> Result<Self> {
        if !self.strictly_increasing_hint() {
            return Err(Error::InvalidParameter(
                "cannot invert: function not flagged strictly increasing".into(),
            ));
        }
        let range_max = self.eval(self.a_max);
        let kind = match &self.kind {
            Kind::Power { scale, exponent } => Kind::Power {
                scale: scale.powf(-1.0 / exponent),
                exponent: 1.0 / exponent,
            },
            // exp(-s·τ^{-e}) = x  ⇔  τ = s^{1/e}·log^{-1/e}(1/x)
            Kind::ExpDecay { scale, exponent } => Kind::LogPower {
                scale: scale.powf(1.0 / exponent),
                exponent: 1.0 / exponent,
            },
            // c·log^{-r}(1/τ) = x  ⇔  τ = exp(-c^{1/r}·x^{-1/r})
            Kind::LogPower { scale, exponent } => Kind::ExpDecay {
                scale: scale.powf(1.0 / exponent),
                exponent: 1.0 / exponent,
            },
            _ => Kind::Inverse(Arc::new(self.clone())),
        };
        if !(range_max > 0.0) || !range_max.is_finite() {
            return Err(Error::Numeric(format!(
                "cannot invert {self:?}: range endpoint {range_max} not positive finite"
            )));
        }
        Ok(Self {
            kind,
            a_max: range_max,
        })
    }

    /// Check non-negativity and (for handles flagged strictly increasing)
    /// monotonicity on a geometric grid accumulating at zero. Unflagged
    /// custom handles are probe objects: the ordering test is expected to
    /// expose their non-monotonicity, so only finiteness is enforced.
    pub fn validate_on_grid(&self, grid_size: usize) -> Result<()> {
        let check_monotone = self.strictly_increasing_hint();
        let grid = geometric_grid(self.a_max * 1e-12, self.a_max, grid_size);
        let mut prev = 0.0_f64;
        for &t in &grid {
            let v = self.eval(t);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Numeric(format!(
                    "index function {self:?} evaluates to {v} at t = {t:e}"
                )));
            }
            if check_monotone && v < prev - 1e-12 * prev.abs() {
                return Err(Error::Numeric(format!(
                    "index function {self:?} decreases near t = {t:e} ({v} < {prev})"
                )));
            }
            prev = v;
        }
        Ok(())
    }
}

/// `Θ(t) = √t·ψ(t)`; its square transfers the link from the prior covariance
/// side to the compound operator side.
pub fn theta_from_psi(psi: &IndexFunction) -> IndexFunction {
    IndexFunction::product(&IndexFunction::sqrt_fn(psi.a_max()), psi)
}

/// `f₀(s) = ((Θ²)^{-1}(s))^{1/2}`, defined on `[0, Θ²(a_max)]`.
pub fn f0_from_theta(theta: &IndexFunction) -> Result<IndexFunction> {
    Ok(theta.powf(2.0).inverse()?.powf(0.5))
}

/// Geometric grid of `n ≥ 2` points from `lo` to `hi` (inclusive).
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2 && lo > 0.0 && hi > lo);
    let ratio = (hi / lo).ln();
    (0..n)
        .map(|i| lo * (ratio * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Solve `f(t) = s` for strictly increasing `f` on `[0, a_max]`.
///
/// Power-family arguments are inverted in closed form; everything else falls
/// back to bracketed bisection with a 200-iteration cap. The result satisfies
/// `|f(t) − s| ≤ 1e-12·max(1, s)` whenever `f` is smooth enough for that
/// residual to be reachable in f64.
pub fn invert_monotone(f: &IndexFunction, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidInput(format!("target must be ≥ 0, got {s}")));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let top = f.eval(f.a_max());
    if s > top * (1.0 + 1e-12) {
        return Err(Error::OutOfRange(format!(
            "target {s:e} exceeds f(a_max) = {top:e}"
        )));
    }
    if !f.strictly_increasing_hint() {
        return Err(Error::InvalidParameter(
            "invert_monotone requires a strictly increasing function".into(),
        ));
    }
    if let Some((c, q)) = f.as_power() {
        return Ok((s / c).powf(1.0 / q));
    }
    if let Some((c, r)) = f.as_log_power() {
        return Ok((-(c.powf(1.0 / r)) * s.powf(-1.0 / r)).exp());
    }
    if let Some((sc, e)) = f.as_exp_decay() {
        return Ok(sc.powf(1.0 / e) * (1.0 / s).ln().powf(-1.0 / e));
    }
    bisect_inverse(f, s)
}

/// Bracketed bisection used by `invert_monotone` and `Kind::Inverse`.
fn bisect_inverse(f: &IndexFunction, s: f64) -> Result<f64> {
    let mut lo = 0.0_f64;
    let mut hi = f.a_max();
    let mut f_lo = 0.0_f64;
    let f_hi = f.eval(hi);
    if f_hi < s * (1.0 - 1e-12) {
        return Err(Error::OutOfRange(format!(
            "target {s:e} exceeds f(a_max) = {f_hi:e}"
        )));
    }
    let tol = 1e-12 * s.max(1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f_mid = f.eval(mid);
        if !f_mid.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite evaluation at t = {mid:e} during inversion"
            )));
        }
        if f_mid < f_lo - tol || f_mid > f_hi + tol {
            return Err(Error::InvalidParameter(
                "non-strictly-increasing function detected on bracket".into(),
            ));
        }
        // Iterate to full interval convergence: the f-residual alone can be
        // met far from the root when f is flat near zero.
        if (hi - lo) <= 1e-15 * hi.max(1e-300) {
            return Ok(mid);
        }
        if f_mid < s {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Outcome of `check_precedes`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Relation {
    GPrecedesH,
    HPrecedesG,
    Equivalent,
    Incomparable,
}

/// Verdict of the asymptotic ordering test, with the sampled ratio grid as a
/// witness. The ordering is decided numerically on a geometric grid and is a
/// semi-decision: refinement is exposed through `grid_size`.
#[derive(Clone, Debug)]
pub struct OrderingVerdict {
    pub relation: Relation,
    /// Samples `(t, h(t)/g(t))`.
    pub witness_grid: Vec<(f64, f64)>,
}

const RATIO_SLACK: f64 = 1e-10;
const EQUIVALENCE_BAND: f64 = 1.0001;
/// The left-end ratio must drop below this fraction of the right-end ratio
/// for the quotient to count as vanishing at zero.
const DECADE_DROP: f64 = 0.1;

fn non_decreasing(ratios: &[f64]) -> bool {
    ratios
        .windows(2)
        .all(|w| w[1] >= w[0] - RATIO_SLACK * w[0].abs())
}

/// Decide the partial ordering `g ≺ h` (holds when `h/g` is itself an index
/// function, i.e. `h` tends to zero faster than `g`).
pub fn check_precedes(
    g: &IndexFunction,
    h: &IndexFunction,
    grid_size: usize,
) -> Result<OrderingVerdict> {
    if grid_size < 16 {
        return Err(Error::InvalidParameter(format!(
            "grid_size must be ≥ 16, got {grid_size}"
        )));
    }
    let a = g.a_max().min(h.a_max());
    let grid = geometric_grid(a * 1e-12, a, grid_size);
    let mut witness = Vec::with_capacity(grid.len());
    for &t in &grid {
        let gv = g.eval(t);
        let hv = h.eval(t);
        if gv <= 0.0 || !gv.is_finite() {
            return Err(Error::InvalidInput(format!(
                "g vanishes (or is non-finite) at interior grid point t = {t:e}"
            )));
        }
        if !hv.is_finite() {
            return Err(Error::InvalidInput(format!(
                "h is non-finite at grid point t = {t:e}"
            )));
        }
        witness.push((t, hv / gv));
    }
    let ratios: Vec<f64> = witness.iter().map(|&(_, r)| r).collect();
    let r_first = ratios[0];
    let r_last = *ratios.last().expect("non-empty grid");
    let r_min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let r_max = ratios.iter().cloned().fold(0.0_f64, f64::max);

    let relation = if r_max <= r_min * EQUIVALENCE_BAND * EQUIVALENCE_BAND {
        Relation::Equivalent
    } else if non_decreasing(&ratios) && r_first < DECADE_DROP * r_last {
        Relation::GPrecedesH
    } else {
        let inv: Vec<f64> = ratios.iter().map(|r| 1.0 / r).collect();
        if non_decreasing(&inv) && inv[0] < DECADE_DROP * inv[inv.len() - 1] {
            Relation::HPrecedesG
        } else {
            Relation::Incomparable
        }
    };
    Ok(OrderingVerdict {
        relation,
        witness_grid: witness,
    })
}

/// How an operator-concavity hypothesis was resolved.
///
/// Powers with exponent in `(0, 1]` and log-powers with exponent at most 1
/// are trusted outright; everything else goes through the randomized search,
/// whose pass is evidence rather than proof.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ConcavityStatus {
    Trusted,
    PassedRefutation,
    Refuted,
    Untested,
}

impl ConcavityStatus {
    /// Whether bounds relying on this hypothesis may be computed.
    pub fn admissible(self) -> bool {
        matches!(self, ConcavityStatus::Trusted | ConcavityStatus::PassedRefutation)
    }
}

/// Resolve the operator-concavity status of `f`: trusted families are
/// recognized syntactically, the rest is handed to the refutation search
/// (dim 4, a seeded fixed trial budget).
pub fn resolve_concavity(f: &IndexFunction, rng_seed: u64) -> Result<ConcavityStatus> {
    if let Some((_, q)) = f.as_power() {
        if q <= 1.0 + 1e-12 {
            return Ok(ConcavityStatus::Trusted);
        }
    }
    if let Some((_, r)) = f.as_log_power() {
        if r <= 1.0 + 1e-12 {
            return Ok(ConcavityStatus::Trusted);
        }
    }
    Ok(match refute_operator_concavity(f, 4, 256, rng_seed)? {
        ConcavityOutcome::Passed => ConcavityStatus::PassedRefutation,
        ConcavityOutcome::Counterexample { .. } => ConcavityStatus::Refuted,
    })
}

/// Result of the randomized operator-concavity search.
///
/// `Passed` is evidence, not proof: the search only ever refutes.
#[derive(Clone, Debug)]
pub enum ConcavityOutcome {
    Passed,
    Counterexample {
        g: DMatrix<f64>,
        g_prime: DMatrix<f64>,
        min_eigenvalue: f64,
    },
}

impl ConcavityOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, ConcavityOutcome::Passed)
    }
}

/// Apply `f` to a symmetric matrix through its spectral decomposition,
/// clamping eigenvalues into `[0, a]`.
fn spectral_apply(f: &IndexFunction, m: &DMatrix<f64>, a: f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let vals = eig.eigenvalues.map(|t| f.eval(t.clamp(0.0, a)));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

fn random_psd(dim: usize, a: f64, rng: &mut rand_chacha::ChaCha8Rng) -> DMatrix<f64> {
    let diag = nalgebra::DVector::from_fn(dim, |_, _| rng.random::<f64>() * a);
    let q = rng::random_orthogonal(dim, rng);
    &q * DMatrix::from_diagonal(&diag) * q.transpose()
}

/// Search for a violation of midpoint operator concavity
/// `f((G+G′)/2) ⪰ (f(G)+f(G′))/2` over random PSD pairs with spectra in
/// `[0, a_max]`.
///
/// Returns the first counterexample found, i.e. a pair where the gap matrix
/// has an eigenvalue below `−1e-8·‖gap‖`.
pub fn refute_operator_concavity(
    f: &IndexFunction,
    dim: usize,
    trials: usize,
    rng_seed: u64,
) -> Result<ConcavityOutcome> {
    if dim < 2 {
        return Err(Error::InvalidParameter(format!("dim must be ≥ 2, got {dim}")));
    }
    if trials < 1 {
        return Err(Error::InvalidParameter("trials must be ≥ 1".into()));
    }
    let a = f.a_max();
    let mut rng = rng::seeded(rng_seed);
    for _ in 0..trials {
        let g = random_psd(dim, a, &mut rng);
        let g_prime = random_psd(dim, a, &mut rng);
        let mid = (&g + &g_prime) * 0.5;
        let gap =
            spectral_apply(f, &mid, a) - (spectral_apply(f, &g, a) + spectral_apply(f, &g_prime, a)) * 0.5;
        let gap_eigs = gap.clone().symmetric_eigen().eigenvalues;
        let min_eig = gap_eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let norm = gap_eigs.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        if min_eig < -1e-8 * norm {
            return Ok(ConcavityOutcome::Counterexample {
                g,
                g_prime,
                min_eigenvalue: min_eig,
            });
        }
    }
    Ok(ConcavityOutcome::Passed)
}
