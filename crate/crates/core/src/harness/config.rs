use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datagen::GeneratorConfig;
use crate::divergence::DivergenceKind;
use crate::error::{Error, Result};
use crate::learners::{Algorithm, LearnerConfig};

/// Quantities recorded along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `ln(max|I - WᵀW| + 1e-300)`.
    Orthonormality,
    /// Largest principal angle to the oracle top-N subspace, radians.
    PrincipalAngle,
    /// Mean of `(xᵀx - yᵀy)²` over the evaluation batch.
    Js1mCost,
    /// Mean `S^PS` over the evaluation batch, columns normalized, `p(x) = 1`.
    SubspaceEntropy,
    /// Worst column cosine to the oracle eigenvectors under the best one-to-one matching.
    Alignment,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Metric::Orthonormality,
        Metric::PrincipalAngle,
        Metric::Js1mCost,
        Metric::SubspaceEntropy,
        Metric::Alignment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Orthonormality => "orthonormality",
            Metric::PrincipalAngle => "principal_angle",
            Metric::Js1mCost => "js1m_cost",
            Metric::SubspaceEntropy => "subspace_entropy",
            Metric::Alignment => "alignment",
        }
    }

    pub fn needs_oracle(self) -> bool {
        matches!(self, Metric::PrincipalAngle | Metric::Alignment)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Pf,
    Lf,
    B,
    Mu,
    EnergyScale,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Pf => "pf",
            SweepParam::Lf => "lf",
            SweepParam::B => "b",
            SweepParam::Mu => "mu",
            SweepParam::EnergyScale => "energy_scale",
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "pf" => SweepParam::Pf,
            "lf" => SweepParam::Lf,
            "b" => SweepParam::B,
            "mu" => SweepParam::Mu,
            "energy_scale" => SweepParam::EnergyScale,
            other => {
                return Err(Error::Config(format!(
                    "unknown sweep parameter `{other}` (expected pf, lf, b, mu or energy_scale)"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Overrides applied by `figures --desk`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeskOverrides {
    pub repeats: Option<usize>,
    pub iterations: Option<u64>,
    pub oracle_samples: Option<usize>,
}

fn default_seed() -> u64 {
    1
}
fn default_one() -> usize {
    1
}
fn default_oracle_samples() -> usize {
    20_000
}
fn default_eval_samples() -> usize {
    1000
}
fn default_convergence_threshold() -> f64 {
    0.1
}
fn default_alignment_threshold() -> f64 {
    0.99
}
fn default_defect_threshold() -> f64 {
    0.05
}
fn default_lf() -> f64 {
    1.0
}

/// One experiment: a source, a learner, a horizon and what to record.
///
/// `generator.seed` is ignored; repeat `r` uses data seed `seed + 2r` and
/// weight seed `seed + 2r + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub iterations: u64,
    pub record_every: u64,
    #[serde(default = "default_one")]
    pub repeats: usize,
    #[serde(default = "default_oracle_samples")]
    pub oracle_samples: usize,
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
    pub metrics: Vec<Metric>,
    #[serde(default = "default_convergence_threshold")]
    pub convergence_threshold: f64,
    #[serde(default = "default_alignment_threshold")]
    pub alignment_threshold: f64,
    #[serde(default = "default_defect_threshold")]
    pub defect_threshold: f64,
    /// Multiplies `learner.gamma0`.
    #[serde(default = "default_lf")]
    pub lf: f64,
    pub generator: GeneratorConfig,
    pub learner: LearnerConfig,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub desk: Option<DeskOverrides>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad(format!("invalid experiment name `{}`", self.name));
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if self.record_every == 0 || self.record_every > self.iterations {
            return bad(format!(
                "record_every must lie in 1..=iterations, got {}",
                self.record_every
            ));
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.metrics.iter().any(|m| m.needs_oracle()) && self.oracle_samples == 0 {
            return bad("principal_angle and alignment need oracle_samples > 0".into());
        }
        if self.metrics.iter().any(|m| matches!(m, Metric::Js1mCost | Metric::SubspaceEntropy))
            && self.eval_samples == 0
        {
            return bad("js1m_cost and subspace_entropy need eval_samples > 0".into());
        }
        if !(self.lf > 0.0 && self.lf.is_finite()) {
            return bad(format!("lf must be positive, got {}", self.lf));
        }
        if self.generator.k != self.learner.k {
            return bad(format!(
                "generator k = {} but learner k = {}",
                self.generator.k, self.learner.k
            ));
        }
        self.generator.validate()?;
        self.learner.validate()?;
        self.effective_learner().validate()?;
        if let Some(s) = &self.sweep {
            for &v in &s.values {
                self.with_param(s.param, v)?;
            }
        }
        Ok(())
    }

    /// Learner config with `lf` folded into the initial rate.
    pub fn effective_learner(&self) -> LearnerConfig {
        let mut l = self.learner;
        l.gamma0 *= self.lf;
        l
    }

    pub fn apply_desk(&mut self) {
        if let Some(d) = self.desk.clone() {
            if let Some(r) = d.repeats {
                self.repeats = r;
            }
            if let Some(i) = d.iterations {
                self.iterations = i;
                self.record_every = self.record_every.min(i);
            }
            if let Some(o) = d.oracle_samples {
                self.oracle_samples = o;
            }
        }
    }

    /// Copy of this config with one sweep parameter set; the sweep section is dropped.
    pub fn with_param(&self, param: SweepParam, value: f64) -> Result<Self> {
        let mut c = self.clone();
        c.sweep = None;
        let positive = |v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("{param} must be positive, got {v}")))
            }
        };
        match param {
            SweepParam::Pf => c.generator.pf = positive(value)?,
            SweepParam::Lf => c.lf = positive(value)?,
            SweepParam::EnergyScale => c.generator.pf = 1.0 / positive(value)?.sqrt(),
            SweepParam::B => {
                let b = DivergenceKind::bach(value)?;
                c.learner.algorithm = match c.learner.algorithm {
                    Algorithm::BachPsa { .. } => Algorithm::BachPsa { b: value },
                    Algorithm::BachSingle { full, .. } => Algorithm::BachSingle { b: value, full },
                    Algorithm::DivergencePsa { divergence: DivergenceKind::Bach(_) } => {
                        Algorithm::DivergencePsa { divergence: b }
                    }
                    Algorithm::TohmPca { divergence: DivergenceKind::Bach(_), mu } => {
                        Algorithm::TohmPca { divergence: b, mu }
                    }
                    _ => return Err(Error::Config("parameter b needs a BACH learner".into())),
                };
            }
            SweepParam::Mu => match &mut c.learner.algorithm {
                Algorithm::TohmPca { mu, .. } => *mu = value,
                _ => return Err(Error::Config("parameter mu needs a TOHM learner".into())),
            },
        }
        Ok(c)
    }

    pub fn needs_oracle(&self) -> bool {
        self.metrics.iter().any(|m| m.needs_oracle())
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        self.seed.wrapping_add(2 * repeat as u64)
    }

    /// Seed of the oracle/evaluation batch, shared by all repeats.
    pub fn oracle_seed(&self) -> u64 {
        self.seed.wrapping_add(0x9E37_79B9_7F4A_7C15)
    }
}
