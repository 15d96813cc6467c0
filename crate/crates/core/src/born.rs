//! Born-rule probability model for a layer of linear neurons.
//!
//! Each input `x` is an "oriented energy": its squared norm sets the sample
//! probability `p(x) = ‖x‖² / Σ‖xᵢ‖²` and its direction is a pure state. A
//! weight column `w` acts as a measurement direction, so the outcome
//! probability is the squared cosine `(wᵀx)² / ‖x‖²`. Mixing the pure states
//! with their sample probabilities gives a density matrix proportional to the
//! input covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::oracle::{eig_sym, EigenDecomposition, DEFAULT_EIG_TOL};

const UNIT_NORM_TOL: f64 = 1e-8;
const PROBABILITY_SLACK: f64 = 1e-10;
const DENSITY_SYMMETRY_TOL: f64 = 1e-12;
const DENSITY_TRACE_TOL: f64 = 1e-12;
const DENSITY_PSD_TOL: f64 = 1e-10;
const DUPLICATE_TOL: f64 = 1e-12;
const PROJECTOR_TOL: f64 = 1e-8;

/// A K-dimensional input datum with its cached energy `‖x‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleVector {
    values: DVector<f64>,
    energy: f64,
}

impl SampleVector {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Precondition("sample must have K >= 1 entries".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sample entries".into()));
        }
        let energy = values.norm_squared();
        Ok(Self { values, energy })
    }

    /// Panics on an empty or non-finite slice.
    pub fn from_slice(values: &[f64]) -> Self {
        Self::new(DVector::from_column_slice(values)).expect("valid sample")
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn norm(&self) -> f64 {
        self.energy.sqrt()
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Unit-norm direction `xn = x / ‖x‖`.
    pub fn direction(&self) -> Result<DVector<f64>> {
        if self.energy == 0.0 {
            return Err(Error::DegenerateVector);
        }
        Ok(&self.values / self.norm())
    }

    /// `c·x`; energy scales by `c²`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: &self.values * c,
            energy: self.energy * c * c,
        }
    }
}

/// K×N synaptic weight matrix; columns are measurement directions.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(DMatrix<f64>);

impl WeightMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (k, n) = entries.shape();
        if n == 0 || n > k {
            return Err(Error::Precondition(format!(
                "weight matrix must satisfy 1 <= N <= K, got {k}x{n}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("weight matrix entries".into()));
        }
        Ok(Self(entries))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Input dimension.
    pub fn k(&self) -> usize {
        self.0.nrows()
    }

    /// Output dimension.
    pub fn n(&self) -> usize {
        self.0.ncols()
    }

    pub fn columns_unit_norm(&self, tol: f64) -> bool {
        self.0.column_iter().all(|c| (c.norm() - 1.0).abs() <= tol)
    }

    fn require_unit_columns(&self) -> Result<()> {
        if !self.columns_unit_norm(UNIT_NORM_TOL) {
            return Err(Error::Precondition(
                "weight columns must have unit norm".into(),
            ));
        }
        Ok(())
    }
}

/// Symmetric positive-semidefinite matrix with unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(DMatrix<f64>);

impl DensityMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if entries.ncols() != n || n == 0 {
            return Err(Error::Precondition("density matrix must be square".into()));
        }
        let asym = (&entries - entries.transpose()).amax();
        if asym > DENSITY_SYMMETRY_TOL {
            return Err(Error::NotSymmetric(asym));
        }
        let trace = entries.trace();
        if (trace - 1.0).abs() > DENSITY_TRACE_TOL {
            return Err(Error::Precondition(format!("trace must be 1, got {trace}")));
        }
        let rho = Self(entries);
        let min = rho.eigen()?.eigenvalues.min();
        if min < -DENSITY_PSD_TOL {
            return Err(Error::Precondition(format!(
                "density matrix must be PSD, min eigenvalue {min:e}"
            )));
        }
        Ok(rho)
    }

    /// Pure state `ψψᵀ` for a nonzero `ψ` (normalized internally).
    pub fn pure(psi: &DVector<f64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateVector);
        }
        let u = psi / norm;
        Ok(Self(symmetrize(&u * u.transpose())))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn eigen(&self) -> Result<EigenDecomposition> {
        eig_sym(&self.0, DEFAULT_EIG_TOL)
    }
}

/// A (possibly improper) probability: nonnegative, not clamped from above.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ProbabilityValue(f64);

impl ProbabilityValue {
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || value < 0.0 {
            return Err(Error::Domain(format!("probability must be >= 0, got {value}")));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// True when the value lies in `[0, 1]` up to rounding slack.
    pub fn is_proper(self) -> bool {
        self.0 <= 1.0 + PROBABILITY_SLACK
    }
}

impl From<ProbabilityValue> for f64 {
    fn from(p: ProbabilityValue) -> f64 {
        p.0
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// `(aᵀb)² / (‖a‖²‖b‖²)`.
pub fn squared_cosine(a: &DVector<f64>, b: &DVector<f64>) -> Result<ProbabilityValue> {
    check_dim(a.len(), b.len())?;
    let (na, nb) = (a.norm_squared(), b.norm_squared());
    if na == 0.0 || nb == 0.0 {
        return Err(Error::DegenerateVector);
    }
    let d = a.dot(b);
    ProbabilityValue::new(d * d / (na * nb))
}

/// `p(x) = ‖x‖² / total_energy`.
pub fn sample_probability(x: &SampleVector, total_energy: f64) -> Result<ProbabilityValue> {
    if !(total_energy > 0.0) {
        return Err(Error::Domain(format!(
            "total energy must be positive, got {total_energy}"
        )));
    }
    if x.energy() > total_energy + 1e-9 {
        return Err(Error::Precondition(
            "sample energy exceeds total energy".into(),
        ));
    }
    ProbabilityValue::new(x.energy() / total_energy)
}

/// Sum of sample energies in a batch.
pub fn total_energy(samples: &[SampleVector]) -> f64 {
    samples.iter().map(SampleVector::energy).sum()
}

/// `p(w|x) = (wᵀx)² / ‖x‖²` for a unit-norm `w`.
pub fn conditional_probability(w: &DVector<f64>, x: &SampleVector) -> Result<ProbabilityValue> {
    check_dim(x.dim(), w.len())?;
    if (w.norm() - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Precondition("measurement direction must have unit norm".into()));
    }
    if x.energy() == 0.0 {
        return Err(Error::DegenerateVector);
    }
    let d = w.dot(x.values());
    ProbabilityValue::new(d * d / x.energy())
}

/// `p(W, x) = p(x) · Σₙ (wₙᵀx)² / ‖x‖²`, unclamped when the columns overlap.
pub fn joint_probability(
    w: &WeightMatrix,
    x: &SampleVector,
    p_x: ProbabilityValue,
) -> Result<ProbabilityValue> {
    let q = outcome_probabilities(w, x, p_x)?;
    ProbabilityValue::new(q.iter().sum())
}

/// Per-column joint probabilities `qₙ = p(x)·(wₙᵀx)²/‖x‖²`.
pub fn outcome_probabilities(
    w: &WeightMatrix,
    x: &SampleVector,
    p_x: ProbabilityValue,
) -> Result<Vec<f64>> {
    check_dim(w.k(), x.dim())?;
    w.require_unit_columns()?;
    if x.energy() == 0.0 {
        return Err(Error::DegenerateVector);
    }
    let y = w.matrix().tr_mul(x.values());
    Ok(y.iter().map(|yn| p_x.value() * yn * yn / x.energy()).collect())
}

/// `ρ = Σₖ p(xₖ) xnₖ xnₖᵀ`, the energy-weighted mixture of sample directions.
pub fn density_matrix(samples: &[SampleVector]) -> Result<DensityMatrix> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Domain("empty sample batch".into()))?;
    let k = first.dim();
    let total = total_energy(samples);
    if !(total > 0.0) {
        return Err(Error::Domain("sample batch has zero total energy".into()));
    }
    let mut rho = DMatrix::zeros(k, k);
    for s in samples {
        check_dim(k, s.dim())?;
        if s.energy() == 0.0 {
            continue;
        }
        let p = s.energy() / total;
        let xn = s.direction()?;
        rho.ger(p, &xn, &xn, 1.0);
    }
    // trace is 1 analytically; divide out accumulated rounding
    let trace = rho.trace();
    Ok(DensityMatrix(symmetrize(rho / trace)))
}

/// `p(x = target) = Σᵢ δ(xᵢ, target) p(xᵢ)` with entrywise equality to 1e-12.
pub fn marginal_probability(
    target: &SampleVector,
    samples: &[SampleVector],
) -> Result<ProbabilityValue> {
    let total = total_energy(samples);
    if samples.is_empty() || !(total > 0.0) {
        return Err(Error::Domain("batch must be non-empty with positive energy".into()));
    }
    let p: f64 = samples
        .iter()
        .filter(|s| {
            s.dim() == target.dim()
                && s.values()
                    .iter()
                    .zip(target.values().iter())
                    .all(|(a, b)| (a - b).abs() <= DUPLICATE_TOL)
        })
        .map(|s| s.energy() / total)
        .sum();
    ProbabilityValue::new(p)
}

/// `Σ -pᵢ ln pᵢ` with `0·ln 0 = 0`.
pub(crate) fn shannon_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    terms
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.ln())
        .sum()
}

/// `S(ρ) = -tr(ρ ln ρ)`, natural log, eigenvalues clipped to `[0, 1]`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let eigen = rho.eigen()?;
    Ok(shannon_sum(eigen.eigenvalues.iter().map(|l| l.clamp(0.0, 1.0))).max(0.0))
}

/// `ρ' = Σₖ Pₖ ρ Pₖ` for the complete orthonormal measurement `Pₖ = aₖaₖᵀ`.
pub fn projective_remeasure(rho: &DensityMatrix, basis: &[DVector<f64>]) -> Result<DensityMatrix> {
    let k = rho.dim();
    if basis.len() != k {
        return Err(Error::Precondition(format!(
            "projector set must be complete: expected {k} directions, got {}",
            basis.len()
        )));
    }
    let mut a = DMatrix::zeros(k, k);
    for (i, v) in basis.iter().enumerate() {
        check_dim(k, v.len())?;
        a.set_column(i, v);
    }
    let completeness = (&a * a.transpose() - DMatrix::identity(k, k)).amax();
    let orthonormality = (a.tr_mul(&a) - DMatrix::identity(k, k)).amax();
    if completeness > PROJECTOR_TOL || orthonormality > PROJECTOR_TOL {
        return Err(Error::Precondition(
            "projectors must be orthonormal and sum to the identity".into(),
        ));
    }
    let r = rho.matrix();
    let mut out = DMatrix::zeros(k, k);
    for v in basis {
        // Pρ P = (aᵀρa) aaᵀ
        let weight = v.dot(&(r * v));
        out.ger(weight, v, v, 1.0);
    }
    Ok(DensityMatrix(symmetrize(out)))
}

/// Which subspace entropy to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubspaceEntropy {
    /// `S^PS = Σₙ qₙ ln(1/qₙ)` on the raw (improper) joint probabilities.
    Unnormalized,
    /// Shannon entropy of `qₙ / V` with `V = Σₙ qₙ`.
    Normalized,
}

/// Entropy of the joint outcome distribution over the principal subspace.
///
/// The two forms are linked by `S_norm = ln V + S^PS / V`.
pub fn subspace_entropy(
    w: &WeightMatrix,
    x: &SampleVector,
    p_x: ProbabilityValue,
    form: SubspaceEntropy,
) -> Result<f64> {
    let q = outcome_probabilities(w, x, p_x)?;
    let v: f64 = q.iter().sum();
    if v == 0.0 {
        return Err(Error::DegenerateProjection);
    }
    Ok(match form {
        SubspaceEntropy::Unnormalized => shannon_sum(q),
        SubspaceEntropy::Normalized => shannon_sum(q.iter().map(|qn| qn / v)),
    })
}

/// Unchecked `S^PS` with `qₙ = scale·(wₙᵀx)²`, for any `W` (columns need not be unit norm).
pub fn subspace_entropy_raw(w: &DMatrix<f64>, x: &SampleVector, scale: f64) -> f64 {
    let y = w.tr_mul(x.values());
    shannon_sum(y.iter().map(|yn| scale * yn * yn))
}
