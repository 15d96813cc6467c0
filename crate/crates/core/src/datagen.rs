//! Seeded synthetic sources and weight initialization.
//!
//! All randomness comes from `ChaCha8Rng::seed_from_u64`; Gaussian draws use
//! the ziggurat sampler behind `rand_distr::StandardNormal`. A run with data
//! seed `s` initializes its weights from seed `s + 1`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::born::{SampleVector, WeightMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_HALF_RANGE: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    /// Random direction with Gaussian anisotropy, norm uniform in `[0.25, 0.5]/pf`.
    GaussianShell,
    /// Independent components uniform on `[-h, h]/pf`.
    UniformZeroMean,
    /// Uniform components; axis `dominant` (1-based) gets half-range `h`, the rest
    /// shrink linearly from `0.6h` to `0.3h`.
    AnisotropicUniform,
}

fn default_pf() -> f64 {
    1.0
}

fn default_half_range() -> f64 {
    DEFAULT_HALF_RANGE
}

fn default_dominant() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub kind: SourceKind,
    pub k: usize,
    #[serde(default)]
    pub stddevs: Vec<f64>,
    /// Amplitude divisor; energies scale as `1/pf²`.
    #[serde(default = "default_pf")]
    pub pf: f64,
    #[serde(default = "default_half_range")]
    pub half_range: f64,
    #[serde(default = "default_dominant")]
    pub dominant: usize,
    #[serde(default)]
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn gaussian_shell(stddevs: Vec<f64>, pf: f64, seed: u64) -> Self {
        Self {
            kind: SourceKind::GaussianShell,
            k: stddevs.len(),
            stddevs,
            pf,
            half_range: DEFAULT_HALF_RANGE,
            dominant: 1,
            seed,
        }
    }

    pub fn uniform(k: usize, half_range: f64, pf: f64, seed: u64) -> Self {
        Self {
            kind: SourceKind::UniformZeroMean,
            k,
            stddevs: Vec::new(),
            pf,
            half_range,
            dominant: 1,
            seed,
        }
    }

    pub fn anisotropic(k: usize, dominant: usize, half_range: f64, pf: f64, seed: u64) -> Self {
        Self {
            kind: SourceKind::AnisotropicUniform,
            dominant,
            ..Self::uniform(k, half_range, pf, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("generator dimension k must be positive".into()));
        }
        if !(self.pf > 0.0 && self.pf.is_finite()) {
            return Err(Error::Config(format!("pf must be positive, got {}", self.pf)));
        }
        match self.kind {
            SourceKind::GaussianShell => {
                if self.stddevs.len() != self.k {
                    return Err(Error::Config(format!(
                        "expected {} stddevs, got {}",
                        self.k,
                        self.stddevs.len()
                    )));
                }
                if let Some(s) = self.stddevs.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                    return Err(Error::Config(format!("stddevs must be positive, got {s}")));
                }
            }
            SourceKind::UniformZeroMean | SourceKind::AnisotropicUniform => {
                if !(self.half_range > 0.0 && self.half_range.is_finite()) {
                    return Err(Error::Config(format!(
                        "half_range must be positive, got {}",
                        self.half_range
                    )));
                }
                if self.kind == SourceKind::AnisotropicUniform
                    && !(1..=self.k).contains(&self.dominant)
                {
                    return Err(Error::Config(format!(
                        "dominant axis must lie in 1..={}, got {}",
                        self.k, self.dominant
                    )));
                }
            }
        }
        Ok(())
    }

    /// Per-component half-ranges of the anisotropic source (before `pf`).
    pub fn anisotropic_half_ranges(&self) -> Vec<f64> {
        let h = self.half_range;
        let others = self.k.saturating_sub(1);
        let mut j = 0;
        (0..self.k)
            .map(|i| {
                if i + 1 == self.dominant {
                    return h;
                }
                let t = if others > 1 { j as f64 / (others - 1) as f64 } else { 0.0 };
                j += 1;
                h * (0.6 - 0.3 * t)
            })
            .collect()
    }

    /// Diagonal population covariance of the source (after `pf`), where it has a closed form.
    pub fn population_variances(&self) -> Option<Vec<f64>> {
        let s = 1.0 / (self.pf * self.pf * 3.0);
        match self.kind {
            SourceKind::GaussianShell => None,
            SourceKind::UniformZeroMean => Some(vec![self.half_range * self.half_range * s; self.k]),
            SourceKind::AnisotropicUniform => Some(
                self.anisotropic_half_ranges()
                    .into_iter()
                    .map(|h| h * h * s)
                    .collect(),
            ),
        }
    }
}

/// `x = 0.5·(0.5 + 0.5u)·a/‖a‖/pf` with `a ~ N(0, diag(stddevs²))`.
pub fn gaussian_shell_sample(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<SampleVector> {
    if config.kind != SourceKind::GaussianShell {
        return Err(Error::Precondition("generator kind is not gaussian-shell".into()));
    }
    let a = loop {
        let a = DVector::from_iterator(
            config.k,
            config.stddevs.iter().map(|s| s * rng.sample::<f64, _>(StandardNormal)),
        );
        if a.norm() > 0.0 {
            break a;
        }
    };
    let u: f64 = rng.random();
    let r = 0.5 * (0.5 + 0.5 * u) / config.pf;
    SampleVector::new(a.normalize() * r)
}

fn uniform_components(half_ranges: impl Iterator<Item = f64>, k: usize, pf: f64, rng: &mut ChaCha8Rng) -> Result<SampleVector> {
    SampleVector::new(DVector::from_iterator(
        k,
        half_ranges.take(k).map(|h| rng.random_range(-h..=h) / pf),
    ))
}

/// Components independent uniform on `[-half_range, half_range]/pf`.
pub fn uniform_zero_mean_sample(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<SampleVector> {
    if config.kind != SourceKind::UniformZeroMean {
        return Err(Error::Precondition("generator kind is not uniform-zero-mean".into()));
    }
    uniform_components(std::iter::repeat(config.half_range), config.k, config.pf, rng)
}

pub fn anisotropic_sample(config: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Result<SampleVector> {
    if config.kind != SourceKind::AnisotropicUniform {
        return Err(Error::Precondition("generator kind is not anisotropic-uniform".into()));
    }
    uniform_components(config.anisotropic_half_ranges().into_iter(), config.k, config.pf, rng)
}

/// A seeded sample stream.
#[derive(Debug, Clone)]
pub struct Generator {
    config: GeneratorConfig,
    rng: ChaCha8Rng,
}

impl Generator {
    pub fn new(config: GeneratorConfig) -> Result<Self> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Ok(Self { config, rng })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.config
    }

    pub fn next_sample(&mut self) -> SampleVector {
        let s = match self.config.kind {
            SourceKind::GaussianShell => gaussian_shell_sample(&self.config, &mut self.rng),
            SourceKind::UniformZeroMean => uniform_zero_mean_sample(&self.config, &mut self.rng),
            SourceKind::AnisotropicUniform => anisotropic_sample(&self.config, &mut self.rng),
        };
        s.expect("validated generator emits finite samples")
    }

    pub fn batch(&mut self, n: usize) -> Vec<SampleVector> {
        (0..n).map(|_| self.next_sample()).collect()
    }
}

impl Iterator for Generator {
    type Item = SampleVector;

    fn next(&mut self) -> Option<SampleVector> {
        Some(self.next_sample())
    }
}

/// Seeded generator for the anisotropic uniform source with default half-range.
pub fn anisotropic_scaled_source(k: usize, dominant: usize, seed: u64) -> Result<Generator> {
    Generator::new(GeneratorConfig::anisotropic(k, dominant, DEFAULT_HALF_RANGE, 1.0, seed))
}

/// Entries independent uniform on `[-0.05, 0.15)`.
pub fn init_weights(k: usize, n: usize, seed: u64) -> Result<WeightMatrix> {
    if n == 0 || n > k {
        return Err(Error::Precondition(format!("need 1 <= N <= K, got K={k} N={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WeightMatrix::new(DMatrix::from_fn(k, n, |_, _| -0.05 + 0.2 * rng.random::<f64>()))
}
