//! Configuration-driven experiment runner: contraction-rate studies over
//! noise-level grids, bound-dominance sweeps, and log-log rate fitting, all
//! reproducible from a single seed and emitting plot-ready CSV plus JSON
//! summaries.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    balance_alpha, bias_bound, spc_bound, spread_bound, BoundReport,
};
use crate::config::{AlphaPolicy, ExperimentConfig};
use crate::error::{Error, Result};
use crate::index::geometric_grid;
use crate::operators::ProblemInstance;
use crate::posterior::{
    bias, spc_closed, spc_monte_carlo, spread, McEstimate, SmoothnessSpec,
};

/// One row of a rate study.
#[derive(Clone, Debug)]
pub struct RateRow {
    pub delta: f64,
    pub alpha_star: f64,
    pub spc: f64,
    pub mc: Option<McEstimate>,
}

/// Result of a rate study: per-δ balanced rows plus the fitted log-log
/// slope. For power-type links the regressor is `log δ`; for severely
/// ill-posed links it is `log log(1/δ)` (selected by the link family).
#[derive(Clone, Debug)]
pub struct RateStudyResult {
    pub rows: Vec<RateRow>,
    pub fitted_exponent: f64,
    pub exponent_ci_halfwidth: f64,
    pub theoretical_exponent: Option<f64>,
    /// True when the regressor is `log(1/δ)` (log-rate study).
    pub log_regressor: bool,
    /// Largest-δ rows excluded from the fit as pre-asymptotic.
    pub dropped_rows: usize,
    /// Rows skipped because balancing failed, with the noise levels.
    pub balance_failures: Vec<f64>,
}

/// Ordinary least squares on `(log x, log y)`.
///
/// Returns `(slope, intercept, ci_halfwidth)` with
/// `ci_halfwidth = 2·resid_std / (√n·std(log x))`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("mismatched series lengths".into()));
    }
    let n = xs.len();
    if n < 5 {
        return Err(Error::InvalidInput(format!(
            "log-log fit needs ≥ 5 points, got {n}"
        )));
    }
    if xs.iter().chain(ys.iter()).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "log-log fit requires strictly positive finite inputs".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|&x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|&y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n as f64;
    let my = ly.iter().sum::<f64>() / n as f64;
    let sxx: f64 = lx.iter().map(|&x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "log-log fit requires non-constant regressor".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(&x, &y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let resid_std = (ssr / (n as f64 - 2.0).max(1.0)).sqrt();
    let sx = (sxx / n as f64).sqrt();
    let ci = 2.0 * resid_std / ((n as f64).sqrt() * sx);
    Ok((slope, intercept, ci))
}

fn alpha_for_delta(
    inst: &ProblemInstance,
    spec: &SmoothnessSpec,
    policy: &AlphaPolicy,
    delta: f64,
) -> Result<f64> {
    match policy {
        AlphaPolicy::Balanced => balance_alpha(inst, spec, delta),
        AlphaPolicy::FixedGrid(grid) => {
            let mut best = (f64::INFINITY, grid[0]);
            for &alpha in grid {
                let s = spc_closed(inst, spec, alpha, delta)?;
                if s.spc < best.0 {
                    best = (s.spc, alpha);
                }
            }
            Ok(best.1)
        }
    }
}

/// Run a rate study: per noise level, choose `α*`, evaluate the closed-form
/// contraction (plus an optional Monte Carlo cross-check), then fit the
/// asymptotic slope. Rows run in parallel with per-row derived seeds;
/// aggregation order is fixed by the δ grid.
pub fn run_rate_study(cfg: &ExperimentConfig) -> Result<RateStudyResult> {
    cfg.validate()?;
    let inst = cfg.instance.build()?;
    let spec = cfg
        .smoothness
        .build_spec(&inst, cfg.instance.spectral_decay_a())?;
    let deltas = cfg.delta_grid.values()?;

    let outcomes: Vec<(f64, Result<RateRow>)> = deltas
        .par_iter()
        .enumerate()
        .map(|(i, &delta)| {
            let row = (|| -> Result<RateRow> {
                let alpha_star = alpha_for_delta(&inst, &spec, &cfg.alpha_policy, delta)?;
                let summary = spc_closed(&inst, &spec, alpha_star, delta)?;
                let mc = if cfg.n_mc > 0 {
                    Some(spc_monte_carlo(
                        &inst,
                        &spec,
                        alpha_star,
                        delta,
                        cfg.n_mc,
                        cfg.seed.wrapping_add(i as u64),
                    )?)
                } else {
                    None
                };
                Ok(RateRow {
                    delta,
                    alpha_star,
                    spc: summary.spc,
                    mc,
                })
            })();
            (delta, row)
        })
        .collect();

    let mut rows = Vec::new();
    let mut balance_failures = Vec::new();
    for (delta, outcome) in outcomes {
        match outcome {
            Ok(row) => rows.push(row),
            Err(Error::BalanceFailure { .. }) => balance_failures.push(delta),
            Err(e) => return Err(e),
        }
    }
    if rows.len() < 5 {
        return Err(Error::Numeric(format!(
            "rate study needs ≥ 5 usable rows, got {} ({} balance failures)",
            rows.len(),
            balance_failures.len()
        )));
    }

    // Severely ill-posed links have logarithmic rates: regress against
    // log(1/δ) instead of δ.
    let log_regressor = inst.theta_sq().as_exp_decay().is_some();

    let mut fit_rows: Vec<&RateRow> = rows.iter().collect();
    let mut dropped = 0;
    if cfg.drop_largest_delta && fit_rows.len() >= 8 {
        fit_rows.remove(0);
        dropped = 1;
    }
    let xs: Vec<f64> = fit_rows
        .iter()
        .map(|r| if log_regressor { (1.0 / r.delta).ln() } else { r.delta })
        .collect();
    let ys: Vec<f64> = fit_rows.iter().map(|r| r.spc).collect();
    let (slope, _, ci) = fit_loglog(&xs, &ys)?;

    Ok(RateStudyResult {
        rows,
        fitted_exponent: slope,
        exponent_ci_halfwidth: ci,
        theoretical_exponent: cfg.theoretical_exponent,
        log_regressor,
        dropped_rows: dropped,
        balance_failures,
    })
}

/// Default α grid for dominance sweeps: 8 decades up to `λ_max(H)`.
fn default_alpha_grid(inst: &ProblemInstance) -> Vec<f64> {
    let lam = inst.h().lambda_max();
    geometric_grid(lam * 1e-8, lam, 33)
}

/// Evaluate the bias, spread, and contraction bounds against their exact
/// counterparts over the `(α, δ)` grid. `bound_scale` multiplies every bound
/// (1.0 for a faithful sweep; the mutation test shrinks it to verify the
/// harness can fail).
pub fn run_dominance_sweep_scaled(
    cfg: &ExperimentConfig,
    bound_scale: f64,
) -> Result<Vec<BoundReport>> {
    cfg.validate()?;
    let inst = cfg.instance.build()?;
    let spec = cfg
        .smoothness
        .build_spec(&inst, cfg.instance.spectral_decay_a())?;
    let alphas = match &cfg.alpha_grid {
        Some(g) => g.values()?,
        None => default_alpha_grid(&inst),
    };
    let deltas = cfg.delta_grid.values()?;

    let mut reports = Vec::new();

    let bias_actual: Vec<f64> = alphas
        .iter()
        .map(|&a| bias(&inst, &spec, a))
        .collect::<Result<_>>()?;
    let bias_bounds: Vec<f64> = alphas
        .iter()
        .map(|&a| bias_bound(&inst, &spec, a).map(|b| b * bound_scale))
        .collect::<Result<_>>()?;
    reports.push(BoundReport::from_series(
        "bias",
        alphas.clone(),
        bias_actual,
        bias_bounds,
    ));

    for &delta in &deltas {
        let actual: Vec<f64> = alphas
            .iter()
            .map(|&a| spread(&inst, a, delta))
            .collect::<Result<_>>()?;
        let bound: Vec<f64> = alphas
            .iter()
            .map(|&a| spread_bound(&inst, a, delta).map(|b| b * bound_scale))
            .collect::<Result<_>>()?;
        reports.push(BoundReport::from_series(
            format!("spread delta={delta:e}"),
            alphas.clone(),
            actual,
            bound,
        ));

        let actual: Vec<f64> = alphas
            .iter()
            .map(|&a| spc_closed(&inst, &spec, a, delta).map(|s| s.spc))
            .collect::<Result<_>>()?;
        let bound: Vec<f64> = alphas
            .iter()
            .map(|&a| spc_bound(&inst, &spec, a, delta).map(|b| b * bound_scale))
            .collect::<Result<_>>()?;
        reports.push(BoundReport::from_series(
            format!("spc delta={delta:e}"),
            alphas.clone(),
            actual,
            bound,
        ));
    }
    Ok(reports)
}

/// Faithful dominance sweep.
pub fn run_dominance_sweep(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>> {
    run_dominance_sweep_scaled(cfg, 1.0)
}

/// JSON summary of a rate study (versioned schema).
#[derive(Serialize)]
struct RateSummaryJson<'a> {
    schema_version: u32,
    fitted_exponent: f64,
    exponent_ci_halfwidth: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    theoretical_exponent: Option<f64>,
    log_regressor: bool,
    n_rows: usize,
    dropped_rows: usize,
    balance_failures: &'a [f64],
}

impl RateStudyResult {
    pub const CSV_HEADER: &'static str = "delta,alpha_star,spc,mc_spc,mc_se,n_samples";

    pub fn csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let (mc_spc, mc_se, n) = match &row.mc {
                Some(mc) => (
                    format!("{:.17e}", mc.estimate),
                    format!("{:.17e}", mc.standard_error),
                    mc.n_samples.to_string(),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{},{},{}\n",
                row.delta, row.alpha_star, row.spc, mc_spc, mc_se, n
            ));
        }
        out
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&RateSummaryJson {
            schema_version: 1,
            fitted_exponent: self.fitted_exponent,
            exponent_ci_halfwidth: self.exponent_ci_halfwidth,
            theoretical_exponent: self.theoretical_exponent,
            log_regressor: self.log_regressor,
            n_rows: self.rows.len(),
            dropped_rows: self.dropped_rows,
            balance_failures: &self.balance_failures,
        })
        .expect("serializable summary")
    }

    /// Write `<base>.csv` and `<base>.json`.
    pub fn write_files(&self, base: &Path) -> Result<()> {
        if let Some(dir) = base.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(base.with_extension("csv"), self.csv())?;
        fs::write(base.with_extension("json"), self.summary_json())?;
        Ok(())
    }
}

#[derive(Serialize)]
struct SweepReportJson<'a> {
    label: &'a str,
    dominated: bool,
    worst_ratio: f64,
    points: usize,
}

#[derive(Serialize)]
struct SweepSummaryJson<'a> {
    schema_version: u32,
    all_dominated: bool,
    reports: Vec<SweepReportJson<'a>>,
}

/// JSON summary of a dominance sweep.
pub fn sweep_summary_json(reports: &[BoundReport]) -> String {
    serde_json::to_string_pretty(&SweepSummaryJson {
        schema_version: 1,
        all_dominated: reports.iter().all(|r| r.dominated),
        reports: reports
            .iter()
            .map(|r| SweepReportJson {
                label: &r.label,
                dominated: r.dominated,
                worst_ratio: r.worst_ratio,
                points: r.alpha_grid.len(),
            })
            .collect(),
    })
    .expect("serializable summary")
}

/// Write one CSV per report (`<base>_<index>.csv`) plus `<base>.json`.
pub fn write_sweep_files(reports: &[BoundReport], base: &Path) -> Result<()> {
    if let Some(dir) = base.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let stem = base
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sweep".into());
    for (i, report) in reports.iter().enumerate() {
        let mut csv = String::from(BoundReport::CSV_HEADER);
        csv.push('\n');
        csv.push_str(&report.csv_rows());
        let path = base.with_file_name(format!("{stem}_{i:02}.csv"));
        fs::write(path, csv)?;
    }
    fs::write(base.with_extension("json"), sweep_summary_json(reports))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{
        AlphaGrid, DeltaGrid, DistortionConfig, InstanceSpec, SmoothnessConfig,
        SmoothnessFamily, SourceConfig,
    };
    use approx::assert_relative_eq;
    use rand::Rng;

    fn base_config() -> ExperimentConfig {
        ExperimentConfig {
            schema_version: 1,
            instance: InstanceSpec::Commuting {
                a: 0.5,
                p: 1.0,
                n: 400,
            },
            smoothness: SmoothnessConfig {
                family: SmoothnessFamily::PowerSobolev { beta: 1.0 },
                source: SourceConfig::Spread,
                lifting_u: None,
            },
            delta_grid: DeltaGrid::Geometric {
                start: 0.1,
                stop: 1e-4,
                count: 7,
            },
            alpha_policy: AlphaPolicy::Balanced,
            n_mc: 0,
            seed: 42,
            output_path: None,
            drop_largest_delta: true,
            theoretical_exponent: None,
            alpha_grid: None,
        }
    }

    #[test]
    fn fit_loglog_examples() {
        let xs: Vec<f64> = (1..=8).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let (slope, _, ci) = fit_loglog(&xs, &ys).unwrap();
        assert_relative_eq!(slope, 2.0, max_relative = 1e-12);
        assert!(ci < 1e-10);

        // Mild multiplicative noise.
        let mut rng = crate::rng::seeded(4);
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 3.0 * x.powf(0.8) * (1.0 + 0.01 * (rng.random::<f64>() - 0.5)))
            .collect();
        let (slope, _, _) = fit_loglog(&xs, &ys).unwrap();
        assert!((slope - 0.8).abs() < 0.02, "slope {slope}");

        // Constant response.
        let ys = vec![2.5; xs.len()];
        let (slope, _, _) = fit_loglog(&xs, &ys).unwrap();
        assert!(slope.abs() < 1e-12);
    }

    #[test]
    fn fit_loglog_rejects_bad_input() {
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(fit_loglog(&xs, &[1.0, 2.0, 3.0, 4.0, -5.0]).is_err());
        assert!(fit_loglog(&[1.0; 5], &xs).is_err());
    }

    #[test]
    fn rate_study_power_case_hits_theory() {
        // a = 0.5, p = 1, Sobolev β = 1: the contraction decays as
        // δ^{4β/(1+2β+2p)} = δ^0.8.
        let cfg = base_config();
        let result = run_rate_study(&cfg).unwrap();
        assert!(!result.log_regressor);
        assert_eq!(result.dropped_rows, 0, "7 rows keep all points");
        assert!(
            (result.fitted_exponent - 0.8).abs() < 0.05,
            "fitted {} vs 0.8",
            result.fitted_exponent
        );
        // α* grows with δ.
        let alphas: Vec<f64> = result.rows.iter().map(|r| r.alpha_star).collect();
        assert!(alphas.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rate_study_balanced_alpha_slope() {
        // α* ∝ (δ²)^{(1+2a+2p)/(1+2β+2p)}: slope 4/5 in δ², i.e. 8/5 in δ.
        let cfg = base_config();
        let result = run_rate_study(&cfg).unwrap();
        let xs: Vec<f64> = result.rows.iter().map(|r| r.delta).collect();
        let ys: Vec<f64> = result.rows.iter().map(|r| r.alpha_star).collect();
        let (slope, _, _) = fit_loglog(&xs, &ys).unwrap();
        assert!((slope - 1.6).abs() < 0.05, "α* slope {slope}");
    }

    #[test]
    fn rate_study_with_mc_rows() {
        let mut cfg = base_config();
        cfg.instance = InstanceSpec::Commuting {
            a: 0.5,
            p: 1.0,
            n: 60,
        };
        cfg.delta_grid = DeltaGrid::Geometric {
            start: 0.1,
            stop: 1e-2,
            count: 5,
        };
        cfg.n_mc = 400;
        let result = run_rate_study(&cfg).unwrap();
        for row in &result.rows {
            let mc = row.mc.as_ref().expect("mc requested");
            assert!(mc.standard_error > 0.0);
            assert!(
                (mc.estimate - row.spc).abs() <= 4.0 * mc.standard_error,
                "δ = {}: mc {} vs closed {}",
                row.delta,
                mc.estimate,
                row.spc
            );
        }
    }

    #[test]
    fn rate_study_deterministic() {
        let mut cfg = base_config();
        cfg.instance = InstanceSpec::Commuting {
            a: 0.5,
            p: 1.0,
            n: 50,
        };
        cfg.n_mc = 200;
        let r1 = run_rate_study(&cfg).unwrap();
        let r2 = run_rate_study(&cfg).unwrap();
        assert_eq!(r1.csv(), r2.csv());
        assert_eq!(r1.summary_json(), r2.summary_json());
    }

    #[test]
    fn rate_study_fixed_grid_policy() {
        let mut cfg = base_config();
        cfg.instance = InstanceSpec::Commuting {
            a: 0.5,
            p: 1.0,
            n: 100,
        };
        cfg.delta_grid = DeltaGrid::Geometric {
            start: 0.1,
            stop: 1e-3,
            count: 5,
        };
        cfg.alpha_policy = AlphaPolicy::FixedGrid(geometric_grid(1e-10, 1.0, 81));
        let result = run_rate_study(&cfg).unwrap();
        // The grid minimizer tracks the same rate, within a looser band.
        assert!(
            (result.fitted_exponent - 0.8).abs() < 0.1,
            "fitted {}",
            result.fitted_exponent
        );
    }

    #[test]
    fn dominance_sweep_commuting_control() {
        let mut cfg = base_config();
        cfg.instance = InstanceSpec::Commuting {
            a: 0.5,
            p: 1.0,
            n: 40,
        };
        cfg.smoothness = SmoothnessConfig {
            family: SmoothnessFamily::Power { c: 1.0, q: 1.0 },
            source: SourceConfig::Extremal { alpha: 1e-4 },
            lifting_u: None,
        };
        cfg.delta_grid = DeltaGrid::Values(vec![0.1, 1e-3]);
        cfg.alpha_grid = Some(AlphaGrid {
            start: 1e-8,
            stop: 1.0,
            count: 25,
        });
        let reports = run_dominance_sweep(&cfg).unwrap();
        assert!(reports.iter().all(|r| r.dominated), "all bounds dominate");
        let bias_report = &reports[0];
        assert_relative_eq!(bias_report.worst_ratio, 1.0, max_relative = 1e-9);

        // Sensitivity: shrinking the bounds by 10% must flip dominance
        // somewhere.
        let mutated = run_dominance_sweep_scaled(&cfg, 0.9).unwrap();
        assert!(mutated.iter().any(|r| !r.dominated));
    }

    #[test]
    fn dominance_sweep_rotated() {
        let mut cfg = base_config();
        cfg.instance = InstanceSpec::Rotated {
            a: 0.5,
            p: 1.0,
            n: 8,
            distortion: DistortionConfig {
                m_target: 0.5,
                m_upper_target: 2.0,
                seed: 7,
            },
        };
        cfg.smoothness = SmoothnessConfig {
            family: SmoothnessFamily::Power { c: 1.0, q: 1.0 },
            source: SourceConfig::Spread,
            lifting_u: None,
        };
        cfg.delta_grid = DeltaGrid::Values(vec![0.1, 1e-2]);
        let reports = run_dominance_sweep(&cfg).unwrap();
        assert!(reports.iter().all(|r| r.dominated));
        assert!(reports.iter().all(|r| r.worst_ratio <= 1.0 + 1e-9));
    }

    #[test]
    fn sweep_files_and_summary() {
        let mut cfg = base_config();
        cfg.instance = InstanceSpec::Commuting {
            a: 0.5,
            p: 1.0,
            n: 12,
        };
        cfg.smoothness = SmoothnessConfig {
            family: SmoothnessFamily::Power { c: 1.0, q: 1.0 },
            source: SourceConfig::Spread,
            lifting_u: None,
        };
        cfg.delta_grid = DeltaGrid::Values(vec![0.1, 1e-2]);
        let reports = run_dominance_sweep(&cfg).unwrap();
        let json = sweep_summary_json(&reports);
        assert!(json.contains("\"all_dominated\": true"));
        assert!(json.contains("\"schema_version\": 1"));

        let dir = std::env::temp_dir().join("spclab_sweep_test");
        let _ = fs::remove_dir_all(&dir);
        write_sweep_files(&reports, &dir.join("sweep")).unwrap();
        assert!(dir.join("sweep.json").exists());
        assert!(dir.join("sweep_00.csv").exists());
        let csv = fs::read_to_string(dir.join("sweep_00.csv")).unwrap();
        assert!(csv.starts_with("alpha,actual,bound,ratio"));
        let _ = fs::remove_dir_all(&dir);
    }
}
