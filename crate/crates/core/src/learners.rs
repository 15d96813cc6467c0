//! Online learning rules for principal subspace / component analysis.
//!
//! Every divergence-driven rule shares the Hebbian direction
//! `x yᵀ - (1 - δ(K,N)) W diag(y∘y)` and differs only in the scalar
//! [`modulation_factor`] computed from the input energy `p* = xᵀx` and the
//! output energy `q* = yᵀy`. With [`DivergenceKind::QuadraticVariational`]
//! the rule is the Modulated Hebb-Oja (MHO) algorithm.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::born::{SampleVector, WeightMatrix};
use crate::divergence::{modulation_factor, requires_output_energy, DivergenceKind, DEFAULT_BACH_B};
use crate::error::{Error, Result};

/// Runs abort once `‖W‖_F` exceeds this.
pub const WEIGHT_NORM_GUARD: f64 = 1e6;

/// Default TOHM entropy weight.
pub const DEFAULT_MU: f64 = 0.1;

/// Which online rule a learner runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Algorithm {
    /// Divergence-modulated Hebbian PSA (algorithms A1–A5, and MHO for `qvar`).
    DivergencePsa { divergence: DivergenceKind },
    /// Oja's subspace rule `ΔW = (x - W y) yᵀ`.
    Sla,
    /// Divergence PSA with the BACH factor.
    BachPsa {
        #[serde(default = "default_b")]
        b: f64,
    },
    /// Oja's single-unit rule `Δw = x y - w y²`.
    OjaSingle,
    /// BACH single-unit rule `Δw = (x y - w y²) / (y²)^(1-b)`; `full` keeps the
    /// `((xᵀx)^b - (yᵀy)^b)` factor.
    BachSingle {
        #[serde(default = "default_b")]
        b: f64,
        #[serde(default)]
        full: bool,
    },
    /// Two-time-scale PCA: PSA increment minus `μ∇S^PS`.
    TohmPca {
        divergence: DivergenceKind,
        #[serde(default = "default_mu")]
        mu: f64,
    },
}

fn default_b() -> f64 {
    DEFAULT_BACH_B
}

fn default_mu() -> f64 {
    DEFAULT_MU
}

fn default_decay_factor() -> f64 {
    16.0
}

impl Algorithm {
    pub fn is_single_unit(&self) -> bool {
        matches!(self, Algorithm::OjaSingle | Algorithm::BachSingle { .. })
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Algorithm::DivergencePsa { divergence } => divergence.validate(),
            Algorithm::BachPsa { b } | Algorithm::BachSingle { b, .. } => {
                DivergenceKind::bach(b).map(|_| ())
            }
            Algorithm::TohmPca { divergence, mu } => {
                divergence.validate()?;
                if !(mu.abs() < 1.0) {
                    return Err(Error::Config(format!("TOHM requires |mu| < 1, got {mu}")));
                }
                Ok(())
            }
            Algorithm::Sla | Algorithm::OjaSingle => Ok(()),
        }
    }
}

/// Step-decay learning-rate schedule: `γ0` until `decay_at`, `γ0 / decay_factor` after.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub gamma0: f64,
    pub decay_at: u64,
    pub decay_factor: f64,
}

impl Schedule {
    pub fn constant(gamma0: f64) -> Self {
        Schedule {
            gamma0,
            decay_at: 0,
            decay_factor: default_decay_factor(),
        }
    }

    pub fn rate(&self, iteration: u64) -> f64 {
        if self.decay_at == 0 || iteration < self.decay_at {
            self.gamma0
        } else {
            self.gamma0 / self.decay_factor
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0 && self.gamma0.is_finite()) {
            return Err(Error::Config(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        if !(self.decay_factor > 1.0) {
            return Err(Error::Config(format!(
                "decay_factor must exceed 1, got {}",
                self.decay_factor
            )));
        }
        Ok(())
    }
}

/// Shape, rule and schedule of a learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub k: usize,
    pub n: usize,
    pub algorithm: Algorithm,
    pub gamma0: f64,
    /// Iteration at which the rate drops; 0 disables the drop.
    #[serde(default)]
    pub decay_at: u64,
    #[serde(default = "default_decay_factor")]
    pub decay_factor: f64,
}

impl LearnerConfig {
    pub fn schedule(&self) -> Schedule {
        Schedule {
            gamma0: self.gamma0,
            decay_at: self.decay_at,
            decay_factor: self.decay_factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > self.k {
            return Err(Error::Config(format!(
                "need 1 <= N <= K, got K={} N={}",
                self.k, self.n
            )));
        }
        if self.algorithm.is_single_unit() && self.n != 1 {
            return Err(Error::Config("single-unit rules require N = 1".into()));
        }
        self.algorithm.validate()?;
        self.schedule().validate()
    }
}

/// Rate in force at `iteration`.
pub fn advance_schedule(config: &LearnerConfig, iteration: u64) -> f64 {
    config.schedule().rate(iteration)
}

/// Weights plus schedule position of a running learner.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    w: WeightMatrix,
    schedule: Schedule,
    iteration: u64,
    skipped: u64,
}

/// What a single step did with its sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Updated,
    /// Zero input or output energy; the sample was consumed without an update.
    Skipped,
}

impl LearnerState {
    pub fn new(w: WeightMatrix, schedule: Schedule) -> Self {
        Self {
            w,
            schedule,
            iteration: 0,
            skipped: 0,
        }
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.w
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn current_gamma(&self) -> f64 {
        self.schedule.rate(self.iteration)
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn skip(&mut self) -> StepOutcome {
        self.iteration += 1;
        self.skipped += 1;
        StepOutcome::Skipped
    }

    /// `W ← W + γ·Δ`, rejecting non-finite or runaway results without touching `W`.
    fn apply(&mut self, increment: &DMatrix<f64>) -> Result<StepOutcome> {
        let gamma = self.current_gamma();
        let next = self.w.matrix() + increment * gamma;
        let norm = next.norm();
        if !norm.is_finite() || norm > WEIGHT_NORM_GUARD {
            return Err(Error::LearnerDiverged {
                iteration: self.iteration,
            });
        }
        self.w = WeightMatrix::new(next).map_err(|_| Error::LearnerDiverged {
            iteration: self.iteration,
        })?;
        self.iteration += 1;
        Ok(StepOutcome::Updated)
    }
}

fn check_input(w: &DMatrix<f64>, x: &SampleVector) -> Result<()> {
    if x.dim() != w.nrows() {
        return Err(Error::DimensionMismatch {
            expected: w.nrows(),
            got: x.dim(),
        });
    }
    Ok(())
}

/// `y = Wᵀx`.
pub fn forward(w: &DMatrix<f64>, x: &SampleVector) -> Result<DVector<f64>> {
    check_input(w, x)?;
    Ok(w.tr_mul(x.values()))
}

/// `x yᵀ - (1 - δ(K,N)) W diag(y₁², …, y_N²)`.
pub fn hebbian_direction(x: &SampleVector, y: &DVector<f64>, w: &DMatrix<f64>) -> DMatrix<f64> {
    let mut d = x.values() * y.transpose();
    if w.nrows() != w.ncols() {
        for (n, yn) in y.iter().enumerate() {
            d.column_mut(n).axpy(-yn * yn, &w.column(n), 1.0);
        }
    }
    d
}

/// Unscaled PSA increment `factor(p*, q*)·hebbian_direction`, or `None` when
/// the sample must be skipped.
pub fn psa_increment(
    w: &DMatrix<f64>,
    x: &SampleVector,
    kind: DivergenceKind,
) -> Result<Option<DMatrix<f64>>> {
    let y = forward(w, x)?;
    let p = x.energy();
    let q = y.norm_squared();
    if p == 0.0 || (q == 0.0 && requires_output_energy(kind)) {
        return Ok(None);
    }
    let factor = modulation_factor(p, q, kind)?;
    Ok(Some(hebbian_direction(x, &y, w) * factor))
}

/// One step of the divergence-modulated PSA rule.
pub fn divergence_psa_step(
    state: &mut LearnerState,
    x: &SampleVector,
    kind: DivergenceKind,
) -> Result<StepOutcome> {
    match psa_increment(state.w.matrix(), x, kind)? {
        Some(delta) => state.apply(&delta),
        None => Ok(state.skip()),
    }
}

/// Unscaled SLA increment `(x - W y) yᵀ`.
pub fn sla_increment(w: &DMatrix<f64>, x: &SampleVector) -> Result<DMatrix<f64>> {
    let y = forward(w, x)?;
    let residual = x.values() - w * &y;
    Ok(residual * y.transpose())
}

/// One step of Oja's subspace learning algorithm.
pub fn sla_step(state: &mut LearnerState, x: &SampleVector) -> Result<StepOutcome> {
    if x.energy() == 0.0 {
        check_input(state.w.matrix(), x)?;
        return Ok(state.skip());
    }
    let delta = sla_increment(state.w.matrix(), x)?;
    state.apply(&delta)
}

/// One step of the BACH PSA rule.
pub fn bach_psa_step(state: &mut LearnerState, x: &SampleVector, b: f64) -> Result<StepOutcome> {
    divergence_psa_step(state, x, DivergenceKind::bach(b)?)
}

fn require_single_unit(w: &DMatrix<f64>) -> Result<()> {
    if w.ncols() != 1 {
        return Err(Error::Precondition(format!(
            "single-unit rule needs N = 1, got N = {}",
            w.ncols()
        )));
    }
    Ok(())
}

/// Unscaled Oja increment `x y - w y²`.
pub fn oja_increment(w: &DMatrix<f64>, x: &SampleVector) -> Result<DMatrix<f64>> {
    require_single_unit(w)?;
    let y = forward(w, x)?[0];
    let mut d = DMatrix::from_column_slice(x.dim(), 1, x.values().as_slice()) * y;
    d.column_mut(0).axpy(-y * y, &w.column(0), 1.0);
    Ok(d)
}

/// One step of Oja's single-unit rule.
pub fn oja_single_unit_step(state: &mut LearnerState, x: &SampleVector) -> Result<StepOutcome> {
    let delta = oja_increment(state.w.matrix(), x)?;
    state.apply(&delta)
}

/// Unscaled BACH single-unit increment, or `None` when `y = 0`.
pub fn bach_single_increment(
    w: &DMatrix<f64>,
    x: &SampleVector,
    b: f64,
    full: bool,
) -> Result<Option<DMatrix<f64>>> {
    DivergenceKind::bach(b)?;
    let oja = oja_increment(w, x)?;
    let y = forward(w, x)?[0];
    let q = y * y;
    if q == 0.0 {
        return Ok(None);
    }
    let mut scale = 1.0 / q.powf(1.0 - b);
    if full {
        scale *= x.energy().powf(b) - q.powf(b);
    }
    Ok(Some(oja * scale))
}

/// One step of the BACH single-unit rule (simplified unless `full`).
pub fn bach_single_unit_step(
    state: &mut LearnerState,
    x: &SampleVector,
    b: f64,
    full: bool,
) -> Result<StepOutcome> {
    match bach_single_increment(state.w.matrix(), x, b, full)? {
        Some(delta) => state.apply(&delta),
        None => Ok(state.skip()),
    }
}

/// Per-sample MHO cost `(xᵀx - yᵀy)²`.
pub fn js1m_term(w: &DMatrix<f64>, x: &SampleVector) -> f64 {
    let d = x.energy() - w.tr_mul(x.values()).norm_squared();
    d * d
}

/// `∇_W S^PS` for `S^PS = Σₙ qₙ ln(1/qₙ)` with `qₙ = scale·(wₙᵀx)²`.
///
/// Column `n` is `-2·scale·yₙ·(ln qₙ + 1)·x`; columns with `qₙ = 0` contribute zero.
pub fn subspace_entropy_gradient(w: &DMatrix<f64>, x: &SampleVector, scale: f64) -> Result<DMatrix<f64>> {
    let y = forward(w, x)?;
    let mut g = DMatrix::zeros(w.nrows(), w.ncols());
    for (n, &yn) in y.iter().enumerate() {
        let q = scale * yn * yn;
        if q > 0.0 {
            let coeff = -2.0 * scale * yn * (q.ln() + 1.0);
            g.column_mut(n).axpy(coeff, x.values(), 0.0);
        }
    }
    Ok(g)
}

/// Probability scale used by TOHM: `qₙ = (wₙᵀx)²/‖x‖²`, i.e. `p(x) = 1`.
pub fn tohm_entropy_scale(x: &SampleVector) -> f64 {
    1.0 / x.energy()
}

/// Unscaled TOHM increment: PSA increment minus `μ ∇_W S^PS`.
pub fn tohm_increment(
    w: &DMatrix<f64>,
    x: &SampleVector,
    kind: DivergenceKind,
    mu: f64,
) -> Result<Option<DMatrix<f64>>> {
    let Some(psa) = psa_increment(w, x, kind)? else {
        return Ok(None);
    };
    if mu == 0.0 {
        return Ok(Some(psa));
    }
    let grad = subspace_entropy_gradient(w, x, tohm_entropy_scale(x))?;
    Ok(Some(psa - grad * mu))
}

/// One step of the two-time-scale PCA rule.
pub fn tohm_pca_step(
    state: &mut LearnerState,
    x: &SampleVector,
    kind: DivergenceKind,
    mu: f64,
) -> Result<StepOutcome> {
    if !(mu.abs() < 1.0) {
        return Err(Error::Precondition(format!("|mu| must be < 1, got {mu}")));
    }
    if forward(state.w.matrix(), x)?.norm_squared() == 0.0 {
        return Ok(state.skip());
    }
    match tohm_increment(state.w.matrix(), x, kind, mu)? {
        Some(delta) => state.apply(&delta),
        None => Ok(state.skip()),
    }
}

/// A configured learner: dispatches each sample to its rule.
#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    state: LearnerState,
}

impl Learner {
    pub fn new(config: LearnerConfig, w: WeightMatrix) -> Result<Self> {
        config.validate()?;
        if w.k() != config.k || w.n() != config.n {
            return Err(Error::Config(format!(
                "initial weights are {}x{}, config expects {}x{}",
                w.k(),
                w.n(),
                config.k,
                config.n
            )));
        }
        Ok(Self {
            state: LearnerState::new(w, config.schedule()),
            config,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn state(&self) -> &LearnerState {
        &self.state
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        self.state.w.matrix()
    }

    pub fn step(&mut self, x: &SampleVector) -> Result<StepOutcome> {
        let state = &mut self.state;
        match self.config.algorithm {
            Algorithm::DivergencePsa { divergence } => divergence_psa_step(state, x, divergence),
            Algorithm::Sla => sla_step(state, x),
            Algorithm::BachPsa { b } => bach_psa_step(state, x, b),
            Algorithm::OjaSingle => oja_single_unit_step(state, x),
            Algorithm::BachSingle { b, full } => bach_single_unit_step(state, x, b, full),
            Algorithm::TohmPca { divergence, mu } => tohm_pca_step(state, x, divergence, mu),
        }
    }
}
