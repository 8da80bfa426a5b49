//! Serializable experiment schemas (JSON) and their builders.
//!
//! Instance specs:
//!
//! ```json
//! {"kind": "commuting", "a": 0.5, "p": 1.0, "N": 200}
//! {"kind": "rotated", "a": 0.5, "p": 1.0, "N": 8,
//!  "distortion": {"m_target": 0.5, "M_target": 2.0, "seed": 7}}
//! {"kind": "heat", "a": 0.5, "N": 2000}
//! ```
//!
//! Index-function specs:
//!
//! ```json
//! {"family": "power", "c": 1.0, "q": 0.5}
//! {"family": "log_power", "c": 0.5, "r": 2.0}
//! ```
//!
//! Smoothness configs accept the same families plus `power_sobolev`, which
//! maps a Sobolev-style index `beta` to the exponent `beta/(1+2a)` relative
//! to the prior spectrum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::IndexFunction;
use crate::operators::{
    make_heat_instance, make_noncommuting_instance, Distortion, ProblemInstance,
};
use crate::posterior::{spread_unit_vector, SmoothnessSpec};

/// Distortion profile of the rotated construction.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DistortionConfig {
    pub m_target: f64,
    #[serde(rename = "M_target")]
    pub m_upper_target: f64,
    pub seed: u64,
}

/// Problem-instance schema.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Commuting {
        a: f64,
        p: f64,
        #[serde(rename = "N")]
        n: usize,
    },
    Rotated {
        a: f64,
        p: f64,
        #[serde(rename = "N")]
        n: usize,
        distortion: DistortionConfig,
    },
    /// Severely ill-posed link (exponentially decaying spectrum of `H`).
    Heat {
        a: f64,
        #[serde(rename = "N")]
        n: usize,
    },
}

impl InstanceSpec {
    pub fn spectral_decay_a(&self) -> f64 {
        match self {
            InstanceSpec::Commuting { a, .. }
            | InstanceSpec::Rotated { a, .. }
            | InstanceSpec::Heat { a, .. } => *a,
        }
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            InstanceSpec::Commuting { a, p, n } => {
                make_noncommuting_instance(*a, *p, *n, &Distortion::Identity, 0)
            }
            InstanceSpec::Rotated {
                a,
                p,
                n,
                distortion,
            } => make_noncommuting_instance(
                *a,
                *p,
                *n,
                &Distortion::LogSpaced {
                    lo: distortion.m_target,
                    hi: distortion.m_upper_target,
                },
                distortion.seed,
            ),
            InstanceSpec::Heat { a, n } => {
                make_heat_instance(*a, *n, &Distortion::Identity, 0)
            }
        }
    }
}

/// Serializable index-function spec (the external schema for ψ-, φ-, and
/// Θ-type functions).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexFunctionSpec {
    Power {
        c: f64,
        q: f64,
    },
    LogPower {
        c: f64,
        r: f64,
    },
}

impl IndexFunctionSpec {
    pub fn build(&self, a_max: f64) -> Result<IndexFunction> {
        match self {
            IndexFunctionSpec::Power { c, q } => IndexFunction::power(*c, *q, a_max),
            IndexFunctionSpec::LogPower { c, r } => IndexFunction::log_power(*c, *r, a_max),
        }
    }
}

/// Source-direction choice for the smoothness spec.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    /// `v_j ∝ j^{-1/2}`, normalized: mass across all coordinates.
    Spread,
    /// A single coordinate of the eigenbasis of `H`.
    Basis { index: usize },
    /// Basis direction attaining the bias bound at the given `α`
    /// (commuting control for dominance sweeps).
    Extremal { alpha: f64 },
}

impl Default for SourceConfig {
    fn default() -> Self {
        SourceConfig::Spread
    }
}

/// Smoothness schema: the function family of `φ` plus the source direction.
// No deny_unknown_fields here: serde cannot combine it with `flatten`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SmoothnessConfig {
    #[serde(flatten)]
    pub family: SmoothnessFamily,
    #[serde(default)]
    pub source: SourceConfig,
    /// Lifting power for smoothness beyond `Θ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lifting_u: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum SmoothnessFamily {
    /// `φ(t) = c·t^q` with the exponent given directly.
    Power {
        #[serde(default = "one")]
        c: f64,
        q: f64,
    },
    /// `φ(t) = t^{beta/(1+2a)}`: Sobolev-style smoothness relative to the
    /// prior spectrum decay `a`.
    PowerSobolev { beta: f64 },
    /// `φ(t) = c·log^{-r}(1/t)`.
    LogPower { c: f64, r: f64 },
}

fn one() -> f64 {
    1.0
}

impl SmoothnessConfig {
    pub fn build_phi(&self, spectral_decay_a: f64, a_max: f64) -> Result<IndexFunction> {
        match &self.family {
            SmoothnessFamily::Power { c, q } => IndexFunction::power(*c, *q, a_max),
            SmoothnessFamily::PowerSobolev { beta } => {
                IndexFunction::power(1.0, beta / (1.0 + 2.0 * spectral_decay_a), a_max)
            }
            SmoothnessFamily::LogPower { c, r } => IndexFunction::log_power(*c, *r, a_max),
        }
    }

    pub fn build_spec(
        &self,
        inst: &ProblemInstance,
        spectral_decay_a: f64,
    ) -> Result<SmoothnessSpec> {
        let a_max = inst.psi().a_max();
        let phi = self.build_phi(spectral_decay_a, a_max)?;
        match &self.source {
            SourceConfig::Spread => SmoothnessSpec::new(
                inst,
                phi,
                spread_unit_vector(inst.dim()),
                self.lifting_u,
            ),
            SourceConfig::Basis { index } => {
                if *index >= inst.dim() {
                    return Err(Error::Config(format!(
                        "basis index {index} out of range for dimension {}",
                        inst.dim()
                    )));
                }
                let mut unit = nalgebra::DVector::zeros(inst.dim());
                unit[*index] = 1.0;
                let v = inst.h().v_mul(&unit);
                SmoothnessSpec::new(inst, phi, v, self.lifting_u)
            }
            SourceConfig::Extremal { alpha } => {
                crate::bounds::extremal_source_spec(inst, &phi, *alpha, self.lifting_u)
            }
        }
    }
}

/// Noise-level grid: geometric and strictly decreasing, or an explicit list.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum DeltaGrid {
    Geometric { start: f64, stop: f64, count: usize },
    Values(Vec<f64>),
}

impl DeltaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let out = match self {
            DeltaGrid::Geometric { start, stop, count } => {
                if !(*start > *stop && *stop > 0.0 && *count >= 2) {
                    return Err(Error::Config(format!(
                        "geometric delta grid needs start > stop > 0 and count ≥ 2, \
                         got start = {start}, stop = {stop}, count = {count}"
                    )));
                }
                let mut g = crate::index::geometric_grid(*stop, *start, *count);
                g.reverse();
                g
            }
            DeltaGrid::Values(v) => v.clone(),
        };
        if out.len() < 2 || out.windows(2).any(|w| w[1] >= w[0]) || out.iter().any(|&d| d <= 0.0)
        {
            return Err(Error::Config(
                "delta grid must be strictly decreasing and positive".into(),
            ));
        }
        Ok(out)
    }
}

/// How `α` is chosen per noise level.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPolicy {
    /// Balance the squared qualification bias bound against the spread
    /// bound.
    Balanced,
    /// Minimize the closed-form contraction over the given grid.
    FixedGrid(Vec<f64>),
}

/// Grid spec for dominance sweeps.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AlphaGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl AlphaGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.start > 0.0 && self.stop > self.start && self.count >= 2) {
            return Err(Error::Config(format!(
                "alpha grid needs 0 < start < stop and count ≥ 2, got {self:?}"
            )));
        }
        Ok(crate::index::geometric_grid(self.start, self.stop, self.count))
    }
}

/// Full experiment configuration consumed by the runner and the CLI.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub instance: InstanceSpec,
    pub smoothness: SmoothnessConfig,
    pub delta_grid: DeltaGrid,
    pub alpha_policy: AlphaPolicy,
    /// Monte Carlo draws per row; 0 keeps the study closed-form only.
    #[serde(default)]
    pub n_mc: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<String>,
    /// Drop the largest (pre-asymptotic) δ from the fit when at least 7
    /// points remain.
    #[serde(default = "yes")]
    pub drop_largest_delta: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theoretical_exponent: Option<f64>,
    /// α grid for dominance sweeps; defaults to 8 decades below `λ_max(H)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<AlphaGrid>,
}

fn schema_version() -> u32 {
    1
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != 1 {
            return Err(Error::Config(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        self.delta_grid.values()?;
        if let AlphaPolicy::FixedGrid(grid) = &self.alpha_policy {
            if grid.is_empty() || grid.iter().any(|&a| a <= 0.0) {
                return Err(Error::Config("fixed alpha grid must be positive".into()));
            }
        }
        if let Some(g) = &self.alpha_grid {
            g.values()?;
        }
        Ok(())
    }
}
