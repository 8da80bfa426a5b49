//! Finite-dimensional self-adjoint operator toolkit.
//!
//! Everything downstream works with a pair of non-negative self-adjoint
//! operators: the prior covariance `C0` and the compound operator
//! `H = BᵀB` of the whitened forward map `B = Σ^{-1/2}·K·C0^{1/2}`. This
//! module provides spectral functional calculus, problem-instance
//! constructors (commuting and rotated non-commuting), certification of the
//! two-sided link `m‖ψ(C0)u‖ ≤ ‖Σ^{-1/2}K u‖ ≤ M‖ψ(C0)u‖`, Loewner-order
//! comparisons, and the finite-dimensional range-inclusion (Douglas) check.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::index::{self, IndexFunction};
use crate::rng;

/// Relative clamp threshold for slightly negative eigenvalues of PSD input.
const PSD_CLAMP: f64 = 1e-10;
/// Condition cap for spectral inverses such as `ψ(C0)^{-1}`.
const CONDITION_CAP: f64 = 1e14;

#[derive(Clone, Debug)]
enum EigBasis {
    /// Eigenvector `j` (descending eigenvalue order) is `e_{perm[j]}`;
    /// used for diagonal operators so that N≈2000 instances never pay for
    /// dense factors.
    Perm(Vec<usize>),
    Dense(DMatrix<f64>),
}

/// Symmetric operator with its spectral decomposition computed eagerly at
/// construction. Immutable afterwards, safe to share across threads.
#[derive(Clone, Debug)]
pub struct SymOperator {
    mat: DMatrix<f64>,
    /// Eigenvalues in descending order.
    eigenvalues: DVector<f64>,
    basis: EigBasis,
    diagonal: bool,
}

impl SymOperator {
    /// Wrap a symmetric matrix; fails when `‖A − Aᵀ‖_max > 1e-12·‖A‖_max`.
    pub fn new(mat: DMatrix<f64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::InvalidInput(format!(
                "matrix must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let scale = mat.amax();
        let asym = (&mat - mat.transpose()).amax();
        if asym > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidInput(format!(
                "matrix is not symmetric: ‖A − Aᵀ‖_max = {asym:e} vs ‖A‖_max = {scale:e}"
            )));
        }
        let n = mat.nrows();
        let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || mat[(i, j)] == 0.0));
        if diagonal {
            return Ok(Self::from_diagonal_vec(mat.diagonal(), mat));
        }
        // Work on the symmetrized matrix so the decomposition is exactly
        // self-adjoint even when the input carries asymmetry at rounding
        // level.
        let sym = (&mat + mat.transpose()) * 0.5;
        let eig = sym.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            eig.eigenvalues[j]
                .partial_cmp(&eig.eigenvalues[i])
                .expect("finite eigenvalues")
        });
        let eigenvalues = DVector::from_fn(n, |k, _| eig.eigenvalues[order[k]]);
        let mut vectors = DMatrix::zeros(n, n);
        for (k, &idx) in order.iter().enumerate() {
            vectors.set_column(k, &eig.eigenvectors.column(idx));
        }
        Ok(Self {
            mat: sym,
            eigenvalues,
            basis: EigBasis::Dense(vectors),
            diagonal: false,
        })
    }

    /// Diagonal operator from its diagonal entries.
    pub fn from_diagonal(entries: &[f64]) -> Self {
        let d = DVector::from_column_slice(entries);
        let mat = DMatrix::from_diagonal(&d);
        Self::from_diagonal_vec(d, mat)
    }

    fn from_diagonal_vec(diag: DVector<f64>, mat: DMatrix<f64>) -> Self {
        let n = diag.len();
        let mut perm: Vec<usize> = (0..n).collect();
        perm.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).expect("finite entries"));
        let eigenvalues = DVector::from_fn(n, |k, _| diag[perm[k]]);
        Self {
            mat,
            eigenvalues,
            basis: EigBasis::Perm(perm),
            diagonal: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// Descending-order eigenvector matrix, materialized densely.
    pub fn eigenvectors_dense(&self) -> DMatrix<f64> {
        match &self.basis {
            EigBasis::Dense(v) => v.clone(),
            EigBasis::Perm(perm) => {
                let n = perm.len();
                let mut v = DMatrix::zeros(n, n);
                for (k, &idx) in perm.iter().enumerate() {
                    v[(idx, k)] = 1.0;
                }
                v
            }
        }
    }

    /// `Vᵀx` in the eigenbasis.
    pub fn vt_mul(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            EigBasis::Dense(v) => v.transpose() * x,
            EigBasis::Perm(perm) => DVector::from_fn(perm.len(), |k, _| x[perm[k]]),
        }
    }

    /// `Vy` back from the eigenbasis.
    pub fn v_mul(&self, y: &DVector<f64>) -> DVector<f64> {
        match &self.basis {
            EigBasis::Dense(v) => v * y,
            EigBasis::Perm(perm) => {
                let mut out = DVector::zeros(perm.len());
                for (k, &idx) in perm.iter().enumerate() {
                    out[idx] = y[k];
                }
                out
            }
        }
    }

    /// Apply the spectral weights `g(λ_j)` to a vector: `V·diag(g(λ))·Vᵀ·x`.
    pub fn apply_spectral_weights(
        &self,
        g: impl Fn(f64) -> f64,
        x: &DVector<f64>,
    ) -> DVector<f64> {
        let mut y = self.vt_mul(x);
        for (j, v) in y.iter_mut().enumerate() {
            *v *= g(self.eigenvalues[j]);
        }
        self.v_mul(&y)
    }

    /// Build the operator with eigenvalues `g(λ_j)` in the same eigenbasis.
    pub fn spectral_map(&self, g: impl Fn(f64) -> f64) -> Self {
        let n = self.dim();
        let vals = DVector::from_fn(n, |j, _| g(self.eigenvalues[j]));
        match &self.basis {
            EigBasis::Perm(perm) => {
                let mut diag = DVector::zeros(n);
                for (k, &idx) in perm.iter().enumerate() {
                    diag[idx] = vals[k];
                }
                let mat = DMatrix::from_diagonal(&diag);
                Self::from_diagonal_vec(diag, mat)
            }
            EigBasis::Dense(v) => {
                let mat = v * DMatrix::from_diagonal(&vals) * v.transpose();
                let mat = (&mat + mat.transpose()) * 0.5;
                // Re-sort so eigenvalues stay descending under non-monotone g.
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&i, &j| vals[j].partial_cmp(&vals[i]).expect("finite values"));
                let eigenvalues = DVector::from_fn(n, |k, _| vals[order[k]]);
                let mut vectors = DMatrix::zeros(n, n);
                for (k, &idx) in order.iter().enumerate() {
                    vectors.set_column(k, &v.column(idx));
                }
                Self {
                    mat,
                    eigenvalues,
                    basis: EigBasis::Dense(vectors),
                    diagonal: false,
                }
            }
        }
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace()
    }
}

/// Spectral functional calculus `A ↦ V·f(Λ)·Vᵀ` for PSD `A`.
///
/// Eigenvalues in `[−1e-10·λ_max, 0)` are clamped to zero; anything more
/// negative is a genuine precondition failure.
pub fn apply_function(a: &SymOperator, f: &IndexFunction) -> Result<SymOperator> {
    let lam_max = a.lambda_max().max(0.0);
    let floor = -PSD_CLAMP * lam_max;
    if a.lambda_min() < floor {
        return Err(Error::InvalidInput(format!(
            "operator is not PSD: λ_min = {:e} below clamp floor {:e}",
            a.lambda_min(),
            floor
        )));
    }
    Ok(a.spectral_map(|t| f.eval(t.max(0.0))))
}

/// Loewner-order verdict with the minimal-eigenvalue witness.
#[derive(Clone, Copy, Debug)]
pub struct LoewnerVerdict {
    pub holds: bool,
    /// `λ_min(B − A)`, negative when the order fails.
    pub witness_eigenvalue: f64,
}

/// Test `A ⪯ B` up to `tol`: holds iff `λ_min(B − A) ≥ −tol·max(1, ‖B − A‖₂)`.
pub fn loewner_leq(a: &SymOperator, b: &SymOperator, tol: f64) -> Result<LoewnerVerdict> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = SymOperator::new(b.matrix() - a.matrix())?;
    let witness = diff.lambda_min();
    let norm = diff.lambda_max().abs().max(diff.lambda_min().abs());
    Ok(LoewnerVerdict {
        holds: witness >= -tol * norm.max(1.0),
        witness_eigenvalue: witness,
    })
}

/// Outcome of the finite-dimensional range-inclusion check.
#[derive(Clone, Debug)]
pub enum DouglasOutcome {
    /// `range(S) ⊆ range(T)`: the smallest constant with `SSᵀ ⪯ C²TTᵀ` and
    /// the factor `R = T⁺S` with `S = TR`, `‖R‖ = C`.
    Holds { c: f64, factor: DMatrix<f64> },
    /// A vector in `range(S)` with a component outside `range(T)`.
    Fails { witness: DVector<f64> },
}

/// Check the three finite-dimensional equivalents of range inclusion
/// `range(S) ⊆ range(T)`: augmented-rank equality, the extremal constant on
/// the range of `T`, and the explicit factor with its residual.
pub fn douglas_check(s: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<DouglasOutcome> {
    if s.nrows() != t.nrows() {
        return Err(Error::InvalidInput(format!(
            "S and T must map into the same space: {} vs {} rows",
            s.nrows(),
            t.nrows()
        )));
    }
    let svd_t = t.clone().svd(true, true);
    let u = svd_t.u.as_ref().expect("requested U");
    let vt = svd_t.v_t.as_ref().expect("requested Vᵀ");
    let sigma_max = svd_t.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank_tol = 1e-10 * sigma_max;
    let rank_t = svd_t
        .singular_values
        .iter()
        .filter(|&&sv| sv > rank_tol)
        .count();

    // Augmented rank test: rank([T | S]) == rank(T).
    let mut aug = DMatrix::zeros(t.nrows(), t.ncols() + s.ncols());
    aug.view_mut((0, 0), (t.nrows(), t.ncols())).copy_from(t);
    aug.view_mut((0, t.ncols()), (s.nrows(), s.ncols()))
        .copy_from(s);
    let aug_svals = aug.svd(false, false).singular_values;
    let aug_max = aug_svals.iter().cloned().fold(0.0, f64::max);
    let rank_aug = aug_svals
        .iter()
        .filter(|&&sv| sv > 1e-10 * aug_max)
        .count();

    // Column-wise projection residuals give the witness on failure.
    let mut worst_col = 0usize;
    let mut worst_residual = 0.0_f64;
    let s_scale = s.amax().max(f64::MIN_POSITIVE);
    for j in 0..s.ncols() {
        let col = s.column(j).into_owned();
        let mut proj = DVector::zeros(s.nrows());
        for k in 0..rank_t {
            let uk = u.column(k);
            proj += uk.into_owned() * uk.dot(&col);
        }
        let resid = (&col - proj).norm();
        if resid > worst_residual {
            worst_residual = resid;
            worst_col = j;
        }
    }
    if rank_aug > rank_t || worst_residual > 1e-9 * s_scale * (s.nrows() as f64).sqrt() {
        return Ok(DouglasOutcome::Fails {
            witness: s.column(worst_col).into_owned(),
        });
    }

    // R = T⁺S restricted to the numerical range; C = ‖R‖₂ is the smallest
    // constant with SSᵀ ⪯ C²TTᵀ on range(T).
    let mut m = DMatrix::zeros(rank_t, s.ncols());
    for k in 0..rank_t {
        let row = u.column(k).transpose() * s;
        let inv_sigma = 1.0 / svd_t.singular_values[k];
        for j in 0..s.ncols() {
            m[(k, j)] = row[(0, j)] * inv_sigma;
        }
    }
    let c = m.clone().svd(false, false).singular_values[0];
    let factor = vt.rows(0, rank_t).transpose() * &m;
    let residual = (t * &factor - s).norm();
    if residual > 1e-9 * s.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::Numeric(format!(
            "factor residual ‖TR − S‖ = {residual:e} exceeds tolerance"
        )));
    }
    Ok(DouglasOutcome::Holds { c, factor })
}

/// Certified two-sided link constants with the extremal directions.
#[derive(Clone, Debug)]
pub struct LinkCertificate {
    /// Lower constant, `0 < m`.
    pub m: f64,
    /// Upper constant, `m ≤ M`.
    pub m_upper: f64,
    /// Unit vector attaining (numerically) the lower Rayleigh extreme.
    pub extremal_low: DVector<f64>,
    /// Unit vector attaining the upper extreme.
    pub extremal_high: DVector<f64>,
}

impl LinkCertificate {
    fn exact_unit(dim: usize) -> Self {
        let mut low = DVector::zeros(dim);
        low[dim - 1] = 1.0;
        let mut high = DVector::zeros(dim);
        high[0] = 1.0;
        Self {
            m: 1.0,
            m_upper: 1.0,
            extremal_low: low,
            extremal_high: high,
        }
    }
}

/// The generalized Rayleigh ratio `√(vᵀAv) / ‖ψ(C0)v‖` whose extremes over
/// `v ≠ 0` are the link constants (`A = KᵀΣ^{-1}K`).
pub fn rayleigh_ratio(
    c0: &SymOperator,
    psi: &IndexFunction,
    a: &SymOperator,
    v: &DVector<f64>,
) -> f64 {
    let num = (v.transpose() * a.matrix() * v)[(0, 0)].max(0.0).sqrt();
    let den = c0.apply_spectral_weights(|t| psi.eval(t.max(0.0)), v).norm();
    num / den
}

/// Certify the link constants: with `W = ψ(C0)^{-1}·A·ψ(C0)^{-1}`, the
/// constants are `m = √λ_min(W)` and `M = √λ_max(W)`, and the extremal
/// eigenvectors map back through `ψ(C0)^{-1}`.
pub fn certify_link(
    c0: &SymOperator,
    psi: &IndexFunction,
    a: &SymOperator,
) -> Result<LinkCertificate> {
    if c0.lambda_min() <= 0.0 {
        return Err(Error::InvalidParameter(
            "prior covariance must be positive definite".into(),
        ));
    }
    let psi_vals: Vec<f64> = c0.eigenvalues().iter().map(|&t| psi.eval(t)).collect();
    let lo = psi_vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = psi_vals.iter().cloned().fold(0.0_f64, f64::max);
    if !(lo > 0.0) || hi / lo > CONDITION_CAP {
        return Err(Error::Conditioning {
            what: "ψ(C0) inverse for link certification".into(),
            cond: hi / lo,
            cap: CONDITION_CAP,
        });
    }
    let w = if c0.is_diagonal() && a.is_diagonal() {
        let n = c0.dim();
        let diag: Vec<f64> = (0..n)
            .map(|i| a.matrix()[(i, i)] / psi.eval(c0.matrix()[(i, i)]).powi(2))
            .collect();
        SymOperator::from_diagonal(&diag)
    } else {
        let p = c0.spectral_map(|t| 1.0 / psi.eval(t));
        let w = p.matrix() * a.matrix() * p.matrix();
        SymOperator::new((&w + w.transpose()) * 0.5)?
    };
    let p_weights = |x: &DVector<f64>| c0.apply_spectral_weights(|t| 1.0 / psi.eval(t), x);
    let n = w.dim();
    let low_dir = w.eigenvectors_dense().column(n - 1).into_owned();
    let high_dir = w.eigenvectors_dense().column(0).into_owned();
    let mut extremal_low = p_weights(&low_dir);
    extremal_low /= extremal_low.norm();
    let mut extremal_high = p_weights(&high_dir);
    extremal_high /= extremal_high.norm();
    Ok(LinkCertificate {
        m: w.lambda_min().max(0.0).sqrt(),
        m_upper: w.lambda_max().max(0.0).sqrt(),
        extremal_low,
        extremal_high,
    })
}

/// Singular-value profile of the distortion factor `R` in `K = R·ψ(C0)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Distortion {
    /// `R = I`: reproduces the commuting construction bit for bit.
    Identity,
    /// `R = Q₁·diag(σ)·Q₂ᵀ` with `σ` log-spaced in `[lo, hi]` and seeded
    /// random orthogonal factors.
    LogSpaced { lo: f64, hi: f64 },
    /// Explicit singular values (still rotated by seeded random factors).
    Explicit(Vec<f64>),
}

impl Distortion {
    fn singular_values(&self, n: usize) -> Result<Vec<f64>> {
        let sig = match self {
            Distortion::Identity => vec![1.0; n],
            Distortion::LogSpaced { lo, hi } => {
                if !(*lo > 0.0 && *lo <= 1.0 && *hi >= 1.0 && hi.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "distortion range must satisfy 0 < lo ≤ 1 ≤ hi, got [{lo}, {hi}]"
                    )));
                }
                if *lo == *hi {
                    vec![*lo; n]
                } else {
                    index::geometric_grid(*lo, *hi, n)
                }
            }
            Distortion::Explicit(sig) => {
                if sig.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "expected {n} singular values, got {}",
                        sig.len()
                    )));
                }
                let lo = sig.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = sig.iter().cloned().fold(0.0_f64, f64::max);
                if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0) {
                    return Err(Error::InvalidParameter(format!(
                        "distortion singular values must straddle 1 within (0, ∞), got [{lo}, {hi}]"
                    )));
                }
                sig.clone()
            }
        };
        Ok(sig)
    }
}

/// A certified finite-dimensional problem instance.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    c0: SymOperator,
    b: DMatrix<f64>,
    h: SymOperator,
    psi: IndexFunction,
    theta: IndexFunction,
    theta_sq: IndexFunction,
    f0: IndexFunction,
    f0_sq: IndexFunction,
    link: LinkCertificate,
    /// `C0^{1/2}` in the eigenbasis of `C0` (diagonal for all constructors).
    c0_sqrt: SymOperator,
    /// `d_j = (Vᵀ·C0·V)_{jj}` with `V` the eigenbasis of `H`; turns the
    /// posterior traces into O(N) sums.
    trace_weights: DVector<f64>,
    /// `f₀²(λ_j)` on the (clamped) spectrum of `H`.
    f0_sq_spectrum: DVector<f64>,
    /// Operator-concavity status of `f₀²`, resolved once at construction.
    f0_sq_concavity: index::ConcavityStatus,
}

impl ProblemInstance {
    pub fn dim(&self) -> usize {
        self.c0.dim()
    }

    pub fn c0(&self) -> &SymOperator {
        &self.c0
    }

    /// Whitened, scaled forward map `B = Σ^{-1/2}·K·C0^{1/2}`.
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn h(&self) -> &SymOperator {
        &self.h
    }

    pub fn psi(&self) -> &IndexFunction {
        &self.psi
    }

    pub fn theta(&self) -> &IndexFunction {
        &self.theta
    }

    pub fn theta_sq(&self) -> &IndexFunction {
        &self.theta_sq
    }

    pub fn f0(&self) -> &IndexFunction {
        &self.f0
    }

    pub fn f0_sq(&self) -> &IndexFunction {
        &self.f0_sq
    }

    pub fn link(&self) -> &LinkCertificate {
        &self.link
    }

    pub fn link_m(&self) -> f64 {
        self.link.m
    }

    pub fn link_m_upper(&self) -> f64 {
        self.link.m_upper
    }

    pub fn c0_sqrt(&self) -> &SymOperator {
        &self.c0_sqrt
    }

    pub fn trace_weights(&self) -> &DVector<f64> {
        &self.trace_weights
    }

    /// `f₀²` evaluated on the descending spectrum of `H`.
    pub fn f0_sq_spectrum(&self) -> &DVector<f64> {
        &self.f0_sq_spectrum
    }

    pub fn f0_sq_concavity(&self) -> index::ConcavityStatus {
        self.f0_sq_concavity
    }

    /// `‖C0·H − H·C0‖_F`, zero exactly for commuting constructions.
    pub fn commutator_norm(&self) -> f64 {
        let ch = self.c0.matrix() * self.h.matrix();
        (&ch - ch.transpose()).norm()
    }

    /// Certify the lifted link at power `u > 1`: constants `(m_u, M_u)` with
    /// `m_u^u‖Θ^u(C0)x‖ ≤ ‖H^{u/2}x‖ ≤ M_u^u‖Θ^u(C0)x‖`.
    pub fn lifted_certificate(&self, u: f64) -> Result<LinkCertificate> {
        if !(u > 1.0 && u.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lifting power must exceed 1, got {u}"
            )));
        }
        let theta_u_fn = |t: f64| self.theta.eval(t).powf(u);
        let theta_u: Vec<f64> = self
            .c0
            .eigenvalues()
            .iter()
            .map(|&t| theta_u_fn(t))
            .collect();
        let lo = theta_u.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = theta_u.iter().cloned().fold(0.0_f64, f64::max);
        if !(lo > 0.0) || hi / lo > CONDITION_CAP {
            return Err(Error::Conditioning {
                what: format!("Θ^{u}(C0) inverse for lifted certification"),
                cond: hi / lo,
                cap: CONDITION_CAP,
            });
        }
        let h_u = self.h.spectral_map(|t| t.max(0.0).powf(u));
        let w = if self.c0.is_diagonal() && h_u.is_diagonal() {
            let n = self.dim();
            let diag: Vec<f64> = (0..n)
                .map(|i| h_u.matrix()[(i, i)] / theta_u_fn(self.c0.matrix()[(i, i)]).powi(2))
                .collect();
            SymOperator::from_diagonal(&diag)
        } else {
            let p = self.c0.spectral_map(|t| 1.0 / theta_u_fn(t));
            let w = p.matrix() * h_u.matrix() * p.matrix();
            SymOperator::new((&w + w.transpose()) * 0.5)?
        };
        let n = w.dim();
        let map_back = |x: &DVector<f64>| {
            let mut v = self.c0.apply_spectral_weights(|t| 1.0 / theta_u_fn(t), x);
            v /= v.norm();
            v
        };
        let low_dir = w.eigenvectors_dense().column(n - 1).into_owned();
        let high_dir = w.eigenvectors_dense().column(0).into_owned();
        Ok(LinkCertificate {
            m: w.lambda_min().max(0.0).sqrt().powf(1.0 / u),
            m_upper: w.lambda_max().max(0.0).sqrt().powf(1.0 / u),
            extremal_low: map_back(&low_dir),
            extremal_high: map_back(&high_dir),
        })
    }

    /// Plain-text matrix dump for external verification. Row-major entries,
    /// one matrix per section.
    pub fn write_matrix_dump(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# spclab matrix dump v1")?;
        writeln!(w, "# sections: `matrix <name> <rows> <cols>`, then row-major entries")?;
        writeln!(
            w,
            "# link constants: m = {:.17e}, M = {:.17e}",
            self.link.m, self.link.m_upper
        )?;
        for (name, mat) in [
            ("C0", self.c0.matrix()),
            ("B", &self.b),
            ("H", self.h.matrix()),
        ] {
            writeln!(w, "matrix {} {} {}", name, mat.nrows(), mat.ncols())?;
            for i in 0..mat.nrows() {
                let row: Vec<String> = (0..mat.ncols())
                    .map(|j| format!("{:.17e}", mat[(i, j)]))
                    .collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }
}

fn power_spectrum(a: f64, n: usize, scale: f64) -> Vec<f64> {
    (1..=n)
        .map(|j| scale * (j as f64).powf(-(1.0 + 2.0 * a)))
        .collect()
}

/// Shared constructor: `C0` diagonal with the given spectrum, `K = R·ψ(C0)`
/// with `R = Q₁·diag(σ)·Q₂ᵀ`, hence `H = C0^{1/2}·KᵀK·C0^{1/2}`. With the
/// identity distortion everything stays diagonal and the certificate is
/// exact.
fn build_instance(
    c0_diag: Vec<f64>,
    psi: IndexFunction,
    theta: IndexFunction,
    theta_sq: IndexFunction,
    distortion: &Distortion,
    rng_seed: u64,
) -> Result<ProblemInstance> {
    let n = c0_diag.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "dimension must be ≥ 2, got {n}"
        )));
    }
    let f0 = index::f0_from_theta(&theta)?;
    let f0_sq = theta_sq.inverse()?;
    let c0 = SymOperator::from_diagonal(&c0_diag);
    let c0_sqrt = c0.spectral_map(|t| t.max(0.0).sqrt());
    let b_diag: Vec<f64> = c0_diag.iter().map(|&s| psi.eval(s) * s.sqrt()).collect();

    let (b, h, link) = match distortion {
        Distortion::Identity => {
            let b = DMatrix::from_diagonal(&DVector::from_column_slice(&b_diag));
            let h_diag: Vec<f64> = b_diag.iter().map(|&v| v * v).collect();
            let h = SymOperator::from_diagonal(&h_diag);
            (b, h, LinkCertificate::exact_unit(n))
        }
        _ => {
            let sigma = distortion.singular_values(n)?;
            let mut rng = rng::seeded(rng_seed);
            let q1 = rng::random_orthogonal(n, &mut rng);
            let q2 = rng::random_orthogonal(n, &mut rng);
            let r =
                &q1 * DMatrix::from_diagonal(&DVector::from_column_slice(&sigma)) * q2.transpose();
            let psi_diag: Vec<f64> = c0_diag.iter().map(|&s| psi.eval(s)).collect();
            let mut k = r;
            for j in 0..n {
                for i in 0..n {
                    k[(i, j)] *= psi_diag[j];
                }
            }
            let mut b = k.clone();
            for j in 0..n {
                let root = c0_diag[j].sqrt();
                for i in 0..n {
                    b[(i, j)] *= root;
                }
            }
            let h_mat = b.transpose() * &b;
            let h = SymOperator::new((&h_mat + h_mat.transpose()) * 0.5)?;
            let a_mat = k.transpose() * &k;
            let a_op = SymOperator::new((&a_mat + a_mat.transpose()) * 0.5)?;
            let link = certify_link(&c0, &psi, &a_op)?;
            (b, h, link)
        }
    };

    // d_j = (Vᵀ C0 V)_{jj}: permutation lookup for diagonal H, one dense
    // product otherwise.
    let trace_weights = if h.is_diagonal() {
        let mut unit = DVector::zeros(n);
        DVector::from_fn(n, |j, _| {
            unit.fill(0.0);
            unit[j] = 1.0;
            let x = h.v_mul(&unit);
            let idx = x.iter().position(|&v| v != 0.0).expect("unit column");
            c0.matrix()[(idx, idx)]
        })
    } else {
        let v = h.eigenvectors_dense();
        let m = c0_sqrt.matrix() * &v;
        DVector::from_fn(n, |j, _| m.column(j).norm_squared())
    };

    let f0_sq_spectrum = DVector::from_fn(n, |j, _| f0_sq.eval(h.eigenvalues()[j].max(0.0)));
    // Fixed internal seed: the resolution must not depend on experiment seeds.
    let f0_sq_concavity = index::resolve_concavity(&f0_sq, 0x5eed)?;

    Ok(ProblemInstance {
        c0,
        b,
        h,
        psi,
        theta,
        theta_sq,
        f0,
        f0_sq,
        link,
        c0_sqrt,
        trace_weights,
        f0_sq_spectrum,
        f0_sq_concavity,
    })
}

/// Commuting power-type instance: `C0 = diag(j^{-(1+2a)})`, `Σ = I`,
/// `K = ψ(C0)` with `ψ(t) = t^{p/(1+2a)}`, so `H = Θ²(C0)` and the link
/// holds with `m = M = 1`.
pub fn make_commuting_instance(a: f64, p: f64, n: usize) -> Result<ProblemInstance> {
    make_noncommuting_instance(a, p, n, &Distortion::Identity, 0)
}

/// Power-type instance with a distorted forward factor: `K = R·ψ(C0)` where
/// `R` has the requested singular-value profile, realizing the link with
/// constants inside the profile range while `H` and `C0` no longer commute.
pub fn make_noncommuting_instance(
    a: f64,
    p: f64,
    n: usize,
    distortion: &Distortion,
    rng_seed: u64,
) -> Result<ProblemInstance> {
    if !(a > 0.0 && p > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "parameters must be positive, got a = {a}, p = {p}"
        )));
    }
    let kappa = p / (1.0 + 2.0 * a);
    let psi = IndexFunction::power(1.0, kappa, 1.0)?;
    let theta = index::theta_from_psi(&psi);
    let theta_sq = theta.powf(2.0);
    build_instance(
        power_spectrum(a, n, 1.0),
        psi,
        theta,
        theta_sq,
        distortion,
        rng_seed,
    )
}

/// Largest domain endpoint on which the severely ill-posed link function
/// `ψ(t) = Θ(t)/√t` stays non-decreasing, with `Θ²(t) = exp(-(2t)^{-1/(1+2a)})`.
pub fn heat_psi_domain(a: f64) -> f64 {
    let e = 1.0 / (1.0 + 2.0 * a);
    0.5 * e.powf(1.0 / e)
}

/// Severely ill-posed instance: polynomially decaying prior spectrum,
/// exponentially decaying link `Θ²(t) = exp(-(2t)^{-1/(1+2a)})`, hence
/// `f₀²(t) = ½·log^{-(1+2a)}(1/t)`. The prior spectrum is scaled into the
/// interval where `ψ` stays monotone.
pub fn make_heat_instance(
    a: f64,
    n: usize,
    distortion: &Distortion,
    rng_seed: u64,
) -> Result<ProblemInstance> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "a must be positive, got {a}"
        )));
    }
    let t_star = heat_psi_domain(a);
    let e = 1.0 / (1.0 + 2.0 * a);
    let theta_sq = IndexFunction::exp_decay(2.0_f64.powf(-e), e, t_star)?;
    let theta = theta_sq.powf(0.5);
    let psi = {
        let th = theta.clone();
        IndexFunction::custom(
            "heat link: Θ(t)/√t",
            move |t| th.eval(t) / t.sqrt(),
            t_star,
            true,
        )?
    };
    build_instance(
        power_spectrum(a, n, t_star),
        psi,
        theta,
        theta_sq,
        distortion,
        rng_seed,
    )
}
