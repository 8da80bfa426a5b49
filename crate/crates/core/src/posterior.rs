//! Posterior quantities for the pre-whitened Gaussian model
//! `z = B·C0^{-1/2}x* + δ·ξ` with white noise `ξ` and prior scaling `α`.
//!
//! Closed forms used throughout (all evaluated through the cached spectral
//! decomposition of `H`, never through an explicit inverse):
//!
//! ```text
//! mean   x̂       = C0^{1/2}(αI + H)^{-1}Bᵀz
//! cov    C       = δ²·C0^{1/2}(αI + H)^{-1}C0^{1/2}
//! bias   b(α)    = ‖C0^{1/2}·s_α(H)·C0^{-1/2}x*‖,   s_α(t) = α/(α+t)
//! var    V(α,δ)  = δ²·tr((αI+H)^{-1}H(αI+H)^{-1}C0)
//! spread tr(C)   = δ²·tr((αI+H)^{-1}C0)
//! SPC            = b² + V + tr(C)
//! ```

use nalgebra::DVector;
use rayon::prelude::*;

use crate::bounds::{classify_case, CaseClassification};
use crate::error::{Error, Result};
use crate::index::IndexFunction;
use crate::operators::{ProblemInstance, SymOperator};
use crate::rng;

/// Condition cap for the `C0^{-1/2}`-type spectral weights behind the bias.
const CONDITION_CAP: f64 = 1e14;

/// A source element `x* = φ(C0)v` with `‖v‖ ≤ 1`, its smoothness function,
/// and the case classification used by the bound machinery.
#[derive(Clone, Debug)]
pub struct SmoothnessSpec {
    pub phi: IndexFunction,
    pub v: DVector<f64>,
    pub x_star: DVector<f64>,
    pub case: CaseClassification,
    /// `C0^{-1/2}x* = (φ/φ₀)(C0)v`, cached for the bias.
    w: DVector<f64>,
    /// Link constants `(m, M)` the bounds use for this smoothness: the base
    /// certificate for low/regular cases, the lifted one for the high case.
    bound_constants: (f64, f64),
}

impl SmoothnessSpec {
    /// Build the source element for an instance. `lifting_u` opts into the
    /// lifted link at power `u > 1`, required for smoothness beyond `Θ`.
    pub fn new(
        inst: &ProblemInstance,
        phi: IndexFunction,
        v: DVector<f64>,
        lifting_u: Option<f64>,
    ) -> Result<Self> {
        if v.len() != inst.dim() {
            return Err(Error::InvalidInput(format!(
                "source direction has length {}, instance dimension is {}",
                v.len(),
                inst.dim()
            )));
        }
        let norm = v.norm();
        if norm > 1.0 + 1e-12 {
            return Err(Error::InvalidInput(format!(
                "source direction must lie in the unit ball, ‖v‖ = {norm}"
            )));
        }
        let x_star = inst.c0().apply_spectral_weights(|t| phi.eval(t), &v);
        let w = c0_inv_sqrt_smooth(inst, &phi, &v)?;
        let case = classify_case(&phi, inst.theta(), lifting_u)?;
        let bound_constants = match (case.tag, case.lifting_power_u) {
            (crate::bounds::CaseTag::High, Some(u)) => {
                let lifted = inst.lifted_certificate(u)?;
                (lifted.m, lifted.m_upper)
            }
            _ => (inst.link_m(), inst.link_m_upper()),
        };
        Ok(Self {
            phi,
            v,
            x_star,
            case,
            w,
            bound_constants,
        })
    }

    /// `(m, M)` backing the bounds for this smoothness case.
    pub fn bound_constants(&self) -> (f64, f64) {
        self.bound_constants
    }

    pub(crate) fn bias_direction(&self) -> &DVector<f64> {
        &self.w
    }
}

/// `C0^{-1/2}·φ(C0)·v` computed as one spectral weight `φ(t)/√t`, with a
/// loud conditioning error instead of silent blow-up in the low-order case.
fn c0_inv_sqrt_smooth(
    inst: &ProblemInstance,
    phi: &IndexFunction,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let weights: Vec<f64> = inst
        .c0()
        .eigenvalues()
        .iter()
        .map(|&t| phi.eval(t) / t.sqrt())
        .collect();
    // Weights that decay toward small eigenvalues are harmless however wide
    // their range; the dangerous regime is amplification of the poorly
    // resolved directions, measured against the weight at the top of the
    // spectrum.
    let top = weights[0];
    let hi = weights.iter().cloned().fold(0.0_f64, f64::max);
    let finite = weights.iter().all(|w| w.is_finite() && *w >= 0.0);
    let amplification = hi / top.max(f64::MIN_POSITIVE);
    if !finite || !(top > 0.0) || amplification > CONDITION_CAP {
        return Err(Error::Conditioning {
            what: "C0^{-1/2}·φ(C0) spectral weights".into(),
            cond: amplification,
            cap: CONDITION_CAP,
        });
    }
    Ok(inst
        .c0()
        .apply_spectral_weights(|t| phi.eval(t) / t.sqrt(), v))
}

/// Unit-ball direction with mass spread over all coordinates
/// (`v_j ∝ j^{-1/2}`), which produces clean power-law rates.
pub fn spread_unit_vector(n: usize) -> DVector<f64> {
    let mut v = DVector::from_fn(n, |j, _| 1.0 / ((j + 1) as f64).sqrt());
    let norm = v.norm();
    v /= norm;
    v
}

/// Draw data `z = B·C0^{-1/2}x* + δ·ξ` with standard Gaussian `ξ`.
pub fn sample_data(
    inst: &ProblemInstance,
    x_star: &DVector<f64>,
    delta: f64,
    rng_seed: u64,
) -> Result<DVector<f64>> {
    if x_star.len() != inst.dim() {
        return Err(Error::InvalidInput("dimension mismatch".into()));
    }
    if delta < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise level must be ≥ 0, got {delta}"
        )));
    }
    let z0 = noiseless_data(inst, x_star)?;
    let mut rng = rng::seeded(rng_seed);
    let xi = rng::standard_normal_vector(inst.dim(), &mut rng);
    Ok(z0 + xi * delta)
}

fn noiseless_data(inst: &ProblemInstance, x_star: &DVector<f64>) -> Result<DVector<f64>> {
    let eigs = inst.c0().eigenvalues();
    let cond = (eigs[0] / eigs[eigs.len() - 1]).sqrt();
    if !cond.is_finite() || cond > CONDITION_CAP {
        return Err(Error::Conditioning {
            what: "C0^{-1/2}x* for data generation".into(),
            cond,
            cap: CONDITION_CAP,
        });
    }
    let w = inst
        .c0()
        .apply_spectral_weights(|t| 1.0 / t.sqrt(), x_star);
    Ok(inst.b() * w)
}

/// Posterior mean `x̂ = C0^{1/2}(αI+H)^{-1}Bᵀz`.
pub fn posterior_mean(
    inst: &ProblemInstance,
    z: &DVector<f64>,
    alpha: f64,
) -> Result<DVector<f64>> {
    require_alpha(alpha)?;
    let bt_z = inst.b().transpose() * z;
    let filtered = inst
        .h()
        .apply_spectral_weights(|t| 1.0 / (alpha + t.max(0.0)), &bt_z);
    Ok(inst
        .c0()
        .apply_spectral_weights(|t| t.max(0.0).sqrt(), &filtered))
}

/// Posterior covariance `δ²·C0^{1/2}(αI+H)^{-1}C0^{1/2}` as a dense operator.
pub fn posterior_cov(inst: &ProblemInstance, alpha: f64, delta: f64) -> Result<SymOperator> {
    require_alpha(alpha)?;
    let filter = inst.h().spectral_map(|t| 1.0 / (alpha + t.max(0.0)));
    let c0s = inst.c0_sqrt().matrix();
    let cov = c0s * filter.matrix() * c0s * (delta * delta);
    SymOperator::new((&cov + cov.transpose()) * 0.5)
}

fn require_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    Ok(())
}

/// Bias `b(α) = ‖C0^{1/2}·s_α(H)·C0^{-1/2}x*‖`, algebraically the distance
/// between the truth and the expected posterior mean.
pub fn bias(inst: &ProblemInstance, spec: &SmoothnessSpec, alpha: f64) -> Result<f64> {
    require_alpha(alpha)?;
    let damped = inst
        .h()
        .apply_spectral_weights(|t| alpha / (alpha + t.max(0.0)), spec.bias_direction());
    Ok(inst
        .c0()
        .apply_spectral_weights(|t| t.max(0.0).sqrt(), &damped)
        .norm())
}

/// Estimation variance `δ²·tr((αI+H)^{-1}H(αI+H)^{-1}C0)`, the exact
/// variance of the posterior mean under the data distribution.
pub fn variance(inst: &ProblemInstance, alpha: f64, delta: f64) -> Result<f64> {
    require_alpha(alpha)?;
    let lambdas = inst.h().eigenvalues();
    let d = inst.trace_weights();
    let sum: f64 = (0..inst.dim())
        .map(|j| {
            let lam = lambdas[j].max(0.0);
            lam * d[j] / ((alpha + lam) * (alpha + lam))
        })
        .sum();
    Ok(delta * delta * sum)
}

/// Posterior spread `tr(C) = δ²·tr((αI+H)^{-1}C0)`.
pub fn spread(inst: &ProblemInstance, alpha: f64, delta: f64) -> Result<f64> {
    require_alpha(alpha)?;
    let lambdas = inst.h().eigenvalues();
    let d = inst.trace_weights();
    let sum: f64 = (0..inst.dim())
        .map(|j| d[j] / (alpha + lambdas[j].max(0.0)))
        .sum();
    Ok(delta * delta * sum)
}

/// Monte Carlo estimate attached to a summary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub n_samples: usize,
}

/// All posterior figures for one `(α, δ)`.
#[derive(Clone, Debug)]
pub struct PosteriorSummary {
    pub alpha: f64,
    pub delta: f64,
    pub bias_sq: f64,
    pub variance: f64,
    pub spread: f64,
    pub spc: f64,
    pub mc: Option<McEstimate>,
}

impl PosteriorSummary {
    pub const CSV_HEADER: &'static str =
        "alpha,delta,bias_sq,variance,spread,spc,mc_spc,mc_se,n_samples";

    pub fn csv_row(&self) -> String {
        let (mc_spc, mc_se, n) = match &self.mc {
            Some(mc) => (
                format!("{:.17e}", mc.estimate),
                format!("{:.17e}", mc.standard_error),
                mc.n_samples.to_string(),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{},{},{}",
            self.alpha, self.delta, self.bias_sq, self.variance, self.spread, self.spc, mc_spc, mc_se, n
        )
    }
}

/// Squared posterior contraction from the closed forms:
/// `SPC = bias² + variance + spread`.
pub fn spc_closed(
    inst: &ProblemInstance,
    spec: &SmoothnessSpec,
    alpha: f64,
    delta: f64,
) -> Result<PosteriorSummary> {
    let b = bias(inst, spec, alpha)?;
    let var = variance(inst, alpha, delta)?;
    let spr = spread(inst, alpha, delta)?;
    Ok(PosteriorSummary {
        alpha,
        delta,
        bias_sq: b * b,
        variance: var,
        spread: spr,
        spc: b * b + var + spr,
        mc: None,
    })
}

/// Monte Carlo SPC over independent data draws. The inner posterior
/// expectation is exact (`‖x* − x̂(z)‖² + tr(C)`), so only the data
/// distribution is sampled; draws use per-index derived seeds and the
/// aggregation order is fixed, making the result independent of the degree
/// of parallelism.
pub fn spc_monte_carlo(
    inst: &ProblemInstance,
    spec: &SmoothnessSpec,
    alpha: f64,
    delta: f64,
    n_samples: usize,
    rng_seed: u64,
) -> Result<McEstimate> {
    require_alpha(alpha)?;
    if n_samples < 100 {
        return Err(Error::InvalidParameter(format!(
            "n_samples must be ≥ 100, got {n_samples}"
        )));
    }
    let z0 = noiseless_data(inst, &spec.x_star)?;
    let spr = spread(inst, alpha, delta)?;
    let n = inst.dim();
    let values: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut stream = rng::derived(rng_seed, i as u64);
            let xi = rng::standard_normal_vector(n, &mut stream);
            let z = &z0 + xi * delta;
            let mean =
                posterior_mean(inst, &z, alpha).expect("alpha validated before sampling");
            (&spec.x_star - mean).norm_squared() + spr
        })
        .collect();
    let mean = values.iter().sum::<f64>() / n_samples as f64;
    let var = values
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / (n_samples as f64 - 1.0);
    Ok(McEstimate {
        estimate: mean,
        standard_error: (var / n_samples as f64).sqrt(),
        n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{make_commuting_instance, make_noncommuting_instance, Distortion};
    use approx::assert_relative_eq;

    fn commuting3() -> ProblemInstance {
        make_commuting_instance(0.5, 1.0, 3).unwrap()
    }

    fn spec_for(inst: &ProblemInstance, beta: f64) -> SmoothnessSpec {
        let phi = IndexFunction::power(1.0, beta, 1.0).unwrap();
        let v = spread_unit_vector(inst.dim());
        SmoothnessSpec::new(inst, phi, v, None).unwrap()
    }

    #[test]
    fn source_element_matches_spectral_application() {
        let inst = commuting3();
        let spec = spec_for(&inst, 1.0);
        for j in 0..3 {
            let s = inst.c0().matrix()[(j, j)];
            assert_relative_eq!(
                spec.x_star[j],
                s * spec.v[j],
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn rejects_source_outside_unit_ball() {
        let inst = commuting3();
        let phi = IndexFunction::power(1.0, 1.0, 1.0).unwrap();
        let v = DVector::from_column_slice(&[1.0, 1.0, 0.0]);
        assert!(SmoothnessSpec::new(&inst, phi, v, None).is_err());
    }

    #[test]
    fn noiseless_data_is_exact() {
        let inst = commuting3();
        let spec = spec_for(&inst, 1.0);
        let z = sample_data(&inst, &spec.x_star, 0.0, 123).unwrap();
        // B·C0^{-1/2}·x* with everything diagonal: z_j = b_j·x*_j/√s_j.
        for j in 0..3 {
            let s = inst.c0().matrix()[(j, j)];
            let expected = inst.b()[(j, j)] * spec.x_star[j] / s.sqrt();
            assert_relative_eq!(z[j], expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn white_noise_normalization() {
        let inst = make_commuting_instance(0.5, 1.0, 25).unwrap();
        let x0 = DVector::zeros(25);
        let mut acc = 0.0;
        let draws = 10_000;
        for seed in 0..draws {
            let z = sample_data(&inst, &x0, 1.0, seed).unwrap();
            acc += z.norm_squared() / 25.0;
        }
        let mean = acc / draws as f64;
        assert!((0.97..=1.03).contains(&mean), "mean ‖z‖²/N = {mean}");
    }

    #[test]
    fn pinned_data_draw() {
        // Regression pin: commuting N=3, a=0.5, p=1, δ=0.1, seed 7.
        let inst = commuting3();
        let spec = spec_for(&inst, 1.0);
        let z = sample_data(&inst, &spec.x_star, 0.1, 7).unwrap();
        let pinned = [
            6.6101175255421651e-1,
            -7.3063051017454250e-2,
            1.0476394753027488e-1,
        ];
        for j in 0..3 {
            assert_relative_eq!(z[j], pinned[j], max_relative = 1e-12);
        }
    }

    #[test]
    fn posterior_mean_zero_data() {
        let inst = commuting3();
        let z = DVector::zeros(3);
        let mean = posterior_mean(&inst, &z, 0.1).unwrap();
        assert_eq!(mean.norm(), 0.0);
    }

    #[test]
    fn posterior_mean_vanishes_for_large_alpha() {
        let inst = commuting3();
        let z = DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let alpha = 1e8;
        let mean = posterior_mean(&inst, &z, alpha).unwrap();
        let bound = inst.c0().lambda_max().sqrt() * (inst.b().transpose() * &z).norm() / alpha;
        assert!(mean.norm() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn posterior_mean_diagonal_closed_form() {
        let inst = commuting3();
        let spec = spec_for(&inst, 1.0);
        let alpha = 0.05;
        let z = sample_data(&inst, &spec.x_star, 0.0, 0).unwrap();
        let mean = posterior_mean(&inst, &z, alpha).unwrap();
        for j in 0..3 {
            let h_jj = inst.h().matrix()[(j, j)];
            let expected = spec.x_star[j] * h_jj / (alpha + h_jj);
            assert_relative_eq!(mean[j], expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn posterior_cov_closed_forms() {
        let inst = commuting3();
        let cov0 = posterior_cov(&inst, 0.3, 0.0).unwrap();
        assert_eq!(cov0.matrix().amax(), 0.0);

        let (alpha, delta) = (0.3, 0.01);
        let cov = posterior_cov(&inst, alpha, delta).unwrap();
        for j in 0..3 {
            let s = inst.c0().matrix()[(j, j)];
            let h_jj = inst.h().matrix()[(j, j)];
            assert_relative_eq!(
                cov.matrix()[(j, j)],
                delta * delta * s / (alpha + h_jj),
                max_relative = 1e-12
            );
        }
        // Degenerate forward-map limit: for α far above ‖H‖ the covariance
        // approaches (δ²/α)·C0.
        let alpha = 1e12;
        let cov = posterior_cov(&inst, alpha, 1.0).unwrap();
        let rel = (cov.matrix() - inst.c0().matrix() / alpha).norm()
            / (inst.c0().matrix() / alpha).norm();
        assert!(rel < 1e-9);
    }

    #[test]
    fn spread_matches_cov_trace() {
        let inst = make_noncommuting_instance(
            0.5,
            1.0,
            8,
            &Distortion::LogSpaced { lo: 0.5, hi: 2.0 },
            3,
        )
        .unwrap();
        for &(alpha, delta) in &[(0.1, 1.0), (1e-3, 0.3), (2.0, 0.05)] {
            let via_trace = spread(&inst, alpha, delta).unwrap();
            let via_cov = posterior_cov(&inst, alpha, delta).unwrap().trace();
            assert_relative_eq!(via_trace, via_cov, max_relative = 1e-10);
        }
    }

    #[test]
    fn spread_commuting_scalar_oracle() {
        // Spread agrees with the scalar summation Σ_j j^{-2}/(α + j^{-4}).
        let inst = make_commuting_instance(0.5, 1.0, 400).unwrap();
        let (alpha, delta) = (1e-3, 1.0);
        let oracle: f64 = (1..=400)
            .map(|j| {
                let j = j as f64;
                j.powi(-2) / (alpha + j.powi(-4))
            })
            .sum();
        assert_relative_eq!(
            spread(&inst, alpha, delta).unwrap(),
            oracle,
            max_relative = 1e-10
        );
    }

    #[test]
    fn variance_diagonal_closed_form_and_dual_route() {
        let inst = make_noncommuting_instance(
            0.5,
            1.0,
            8,
            &Distortion::LogSpaced { lo: 0.5, hi: 2.0 },
            5,
        )
        .unwrap();
        let (alpha, delta) = (0.02, 0.7);
        // Independent algebraic route: V = δ²‖C0^{1/2}(αI+H)^{-1}Bᵀ‖_F².
        let filter = inst.h().spectral_map(|t| 1.0 / (alpha + t.max(0.0)));
        let m_alpha = inst.c0_sqrt().matrix() * filter.matrix() * inst.b().transpose();
        let dual = delta * delta * m_alpha.norm_squared();
        assert_relative_eq!(
            variance(&inst, alpha, delta).unwrap(),
            dual,
            max_relative = 1e-10
        );

        let inst = commuting3();
        let sum: f64 = (0..3)
            .map(|j| {
                let h_jj = inst.h().matrix()[(j, j)];
                let s = inst.c0().matrix()[(j, j)];
                h_jj * s / (alpha + h_jj).powi(2)
            })
            .sum();
        assert_relative_eq!(
            variance(&inst, alpha, delta).unwrap(),
            delta * delta * sum,
            max_relative = 1e-12
        );
    }

    #[test]
    fn delta_enters_quadratically_bit_exact() {
        let inst = commuting3();
        let (alpha, delta) = (0.07, 0.125);
        let s1 = spread(&inst, alpha, delta).unwrap();
        let s2 = spread(&inst, alpha, 2.0 * delta).unwrap();
        assert!((s2 - 4.0 * s1).abs() <= 1e-14 * s2.abs());
        let v1 = variance(&inst, alpha, delta).unwrap();
        let v2 = variance(&inst, alpha, 2.0 * delta).unwrap();
        assert!((v2 - 4.0 * v1).abs() <= 1e-14 * v2.abs());
    }

    #[test]
    fn bias_noiseless_mean_identity() {
        let inst = make_noncommuting_instance(
            0.5,
            1.0,
            10,
            &Distortion::LogSpaced { lo: 0.6, hi: 1.7 },
            2,
        )
        .unwrap();
        let phi = IndexFunction::power(1.0, 1.0, 1.0).unwrap();
        let spec = SmoothnessSpec::new(&inst, phi, spread_unit_vector(10), None).unwrap();
        for &alpha in &[1e-4, 1e-2, 1.0] {
            let z0 = sample_data(&inst, &spec.x_star, 0.0, 0).unwrap();
            let mean = posterior_mean(&inst, &z0, alpha).unwrap();
            let direct = (&spec.x_star - mean).norm();
            assert_relative_eq!(
                bias(&inst, &spec, alpha).unwrap(),
                direct,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn bias_zero_source() {
        let inst = commuting3();
        let phi = IndexFunction::power(1.0, 1.0, 1.0).unwrap();
        let spec = SmoothnessSpec::new(&inst, phi, DVector::zeros(3), None).unwrap();
        assert_eq!(bias(&inst, &spec, 0.1).unwrap(), 0.0);
    }

    #[test]
    fn bias_monotone_and_saturates_at_source_norm() {
        let inst = make_commuting_instance(0.5, 1.0, 20).unwrap();
        let spec = spec_for(&inst, 1.0);
        let mut prev = 0.0;
        for &alpha in &[1e-8, 1e-6, 1e-4, 1e-2, 1.0, 1e2] {
            let b = bias(&inst, &spec, alpha).unwrap();
            assert!(b >= prev - 1e-15);
            prev = b;
        }
        let b_inf = bias(&inst, &spec, 1e10).unwrap();
        assert_relative_eq!(b_inf, spec.x_star.norm(), max_relative = 1e-6);
    }

    #[test]
    fn spc_closed_decomposition() {
        let inst = commuting3();
        let spec = spec_for(&inst, 1.0);
        let s = spc_closed(&inst, &spec, 0.1, 0.01).unwrap();
        assert_relative_eq!(
            s.spc,
            s.bias_sq + s.variance + s.spread,
            max_relative = 1e-15
        );
        // Brute-force three-term sum from the diagonal formulas.
        let mut expected = 0.0;
        for j in 0..3 {
            let h_jj = inst.h().matrix()[(j, j)];
            let s_j = inst.c0().matrix()[(j, j)];
            let s_alpha = 0.1 / (0.1 + h_jj);
            expected += (s_alpha * spec.x_star[j]).powi(2);
            expected += 0.01_f64.powi(2) * h_jj * s_j / (0.1 + h_jj).powi(2);
            expected += 0.01_f64.powi(2) * s_j / (0.1 + h_jj);
        }
        assert_relative_eq!(s.spc, expected, max_relative = 1e-12);

        let noiseless = spc_closed(&inst, &spec, 0.1, 0.0).unwrap();
        assert_eq!(noiseless.spc, noiseless.bias_sq);
    }

    #[test]
    fn spc_zero_source_is_noise_only() {
        let inst = commuting3();
        let phi = IndexFunction::power(1.0, 1.0, 1.0).unwrap();
        let spec = SmoothnessSpec::new(&inst, phi, DVector::zeros(3), None).unwrap();
        let s = spc_closed(&inst, &spec, 0.2, 0.5).unwrap();
        assert_eq!(s.bias_sq, 0.0);
        assert_relative_eq!(s.spc, s.variance + s.spread, max_relative = 1e-15);
    }

    #[test]
    fn monte_carlo_noiseless_is_exact() {
        let inst = commuting3();
        let spec = spec_for(&inst, 1.0);
        let mc = spc_monte_carlo(&inst, &spec, 0.1, 0.0, 200, 9).unwrap();
        let closed = spc_closed(&inst, &spec, 0.1, 0.0).unwrap();
        assert_relative_eq!(mc.estimate, closed.spc, max_relative = 1e-12);
        // All draws coincide; the standard error is zero up to the rounding
        // dust of the mean subtraction.
        assert!(mc.standard_error <= 1e-14 * mc.estimate);
    }

    #[test]
    fn monte_carlo_consistent_with_closed_form() {
        let inst = make_noncommuting_instance(
            0.5,
            1.0,
            12,
            &Distortion::LogSpaced { lo: 0.5, hi: 2.0 },
            4,
        )
        .unwrap();
        let phi = IndexFunction::power(1.0, 1.0, 1.0).unwrap();
        let spec = SmoothnessSpec::new(&inst, phi, spread_unit_vector(12), None).unwrap();
        let closed = spc_closed(&inst, &spec, 0.01, 0.2).unwrap();
        let mut hits = 0;
        for seed in 0..5 {
            let mc = spc_monte_carlo(&inst, &spec, 0.01, 0.2, 2000, seed).unwrap();
            if (mc.estimate - closed.spc).abs() <= 3.0 * mc.standard_error {
                hits += 1;
            }
        }
        assert!(hits >= 4, "only {hits}/5 runs within 3 standard errors");
    }

    #[test]
    fn monte_carlo_deterministic_given_seed() {
        let inst = commuting3();
        let spec = spec_for(&inst, 1.0);
        let a = spc_monte_carlo(&inst, &spec, 0.05, 0.1, 500, 77).unwrap();
        let b = spc_monte_carlo(&inst, &spec, 0.05, 0.1, 500, 77).unwrap();
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.standard_error, b.standard_error);
    }

    #[test]
    fn monte_carlo_rejects_tiny_sample_size() {
        let inst = commuting3();
        let spec = spec_for(&inst, 1.0);
        assert!(spc_monte_carlo(&inst, &spec, 0.05, 0.1, 50, 0).is_err());
    }

    #[test]
    fn variance_dominated_by_spread() {
        let inst = make_noncommuting_instance(
            0.5,
            1.0,
            10,
            &Distortion::LogSpaced { lo: 0.5, hi: 2.0 },
            8,
        )
        .unwrap();
        for &alpha in &[1e-6, 1e-3, 1e-1, 1.0, 10.0] {
            for &delta in &[0.01, 0.3, 1.0] {
                let v = variance(&inst, alpha, delta).unwrap();
                let s = spread(&inst, alpha, delta).unwrap();
                assert!(v <= s * (1.0 + 1e-10), "V = {v} > spread = {s}");
            }
        }
    }

    #[test]
    fn csv_row_shape() {
        let inst = commuting3();
        let spec = spec_for(&inst, 1.0);
        let s = spc_closed(&inst, &spec, 0.1, 0.01).unwrap();
        let row = s.csv_row();
        assert_eq!(row.split(',').count(), PosteriorSummary::CSV_HEADER.split(',').count());
        assert!(row.ends_with(",,,"));
    }
}
