//! Divergences between the input-energy distribution `p` and the captured
//! output-energy distribution `q`, and the scalar factor each one contributes
//! to the shared Hebbian update direction.
//!
//! Factors use the convention that they are positive when `q* < p*`: an
//! output energy deficit produces Hebbian growth. Constant multipliers that
//! fall out of the exact derivatives are absorbed into the learning rate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default exponent for the BACH divergence.
pub const DEFAULT_BACH_B: f64 = 0.025;

/// Which divergence drives a learning rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DivergenceKind {
    /// `|p - q|`
    Variational,
    /// `(p - q)²`; gradient descent on it is the MHO rule.
    QuadraticVariational,
    /// `(p - q) ln(p/q)`
    JeffreyJ,
    /// `½(p ln(2p/(p+q)) + q ln(2q/(p+q)))`
    JensenShannon,
    /// `½(√p - √q)²`
    Hellinger,
    /// `(p^b - q^b)²` with `0 < b <= 1`.
    Bach(f64),
}

impl DivergenceKind {
    pub fn bach(b: f64) -> Result<Self> {
        if !(b > 0.0 && b <= 1.0) {
            return Err(Error::Config(format!("BACH exponent must lie in (0, 1], got {b}")));
        }
        Ok(DivergenceKind::Bach(b))
    }

    pub fn validate(&self) -> Result<()> {
        if let DivergenceKind::Bach(b) = *self {
            DivergenceKind::bach(b)?;
        }
        Ok(())
    }
}

impl fmt::Display for DivergenceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceKind::Variational => f.write_str("variational"),
            DivergenceKind::QuadraticVariational => f.write_str("qvar"),
            DivergenceKind::JeffreyJ => f.write_str("jeffrey"),
            DivergenceKind::JensenShannon => f.write_str("jensen-shannon"),
            DivergenceKind::Hellinger => f.write_str("hellinger"),
            DivergenceKind::Bach(b) => write!(f, "bach:{b}"),
        }
    }
}

impl FromStr for DivergenceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "variational" => Ok(DivergenceKind::Variational),
            "qvar" => Ok(DivergenceKind::QuadraticVariational),
            "jeffrey" => Ok(DivergenceKind::JeffreyJ),
            "jensen-shannon" => Ok(DivergenceKind::JensenShannon),
            "hellinger" => Ok(DivergenceKind::Hellinger),
            "bach" => Ok(DivergenceKind::Bach(DEFAULT_BACH_B)),
            other => match other.strip_prefix("bach:") {
                Some(b) => {
                    let b: f64 = b
                        .parse()
                        .map_err(|_| Error::Config(format!("bad BACH exponent in {other:?}")))?;
                    DivergenceKind::bach(b)
                }
                None => Err(Error::Config(format!("unknown divergence {other:?}"))),
            },
        }
    }
}

impl TryFrom<String> for DivergenceKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DivergenceKind> for String {
    fn from(k: DivergenceKind) -> String {
        k.to_string()
    }
}

fn check_nonnegative(p: f64, q: f64) -> Result<()> {
    if !(p >= 0.0 && q >= 0.0) || !p.is_finite() || !q.is_finite() {
        return Err(Error::Domain(format!(
            "divergence arguments must be finite and nonnegative, got p={p}, q={q}"
        )));
    }
    Ok(())
}

/// Per-sample divergence term between `p` and `q`.
pub fn pointwise_divergence(p: f64, q: f64, kind: DivergenceKind) -> Result<f64> {
    check_nonnegative(p, q)?;
    kind.validate()?;
    let d = match kind {
        DivergenceKind::Variational => (p - q).abs(),
        DivergenceKind::QuadraticVariational => (p - q) * (p - q),
        DivergenceKind::JeffreyJ | DivergenceKind::JensenShannon if p == 0.0 || q == 0.0 => {
            return Err(Error::Domain(format!("{kind} requires p > 0 and q > 0")));
        }
        DivergenceKind::JeffreyJ => (p - q) * (p / q).ln(),
        DivergenceKind::JensenShannon => {
            let m = p + q;
            0.5 * (p * (2.0 * p / m).ln() + q * (2.0 * q / m).ln())
        }
        DivergenceKind::Hellinger => {
            let d = p.sqrt() - q.sqrt();
            0.5 * d * d
        }
        DivergenceKind::Bach(b) => {
            let d = p.powf(b) - q.powf(b);
            d * d
        }
    };
    Ok(d.max(0.0))
}

/// Scalar multiplying the Hebbian direction for input energy `p*` and output energy `q*`.
pub fn modulation_factor(p_star: f64, q_star: f64, kind: DivergenceKind) -> Result<f64> {
    if !(p_star > 0.0) || !p_star.is_finite() {
        return Err(Error::Domain(format!("input energy must be positive, got {p_star}")));
    }
    if !(q_star >= 0.0) || !q_star.is_finite() {
        return Err(Error::Domain(format!("output energy must be nonnegative, got {q_star}")));
    }
    kind.validate()?;
    let (p, q) = (p_star, q_star);
    Ok(match kind {
        DivergenceKind::Variational => {
            if p == q {
                0.0
            } else {
                (p - q).signum()
            }
        }
        DivergenceKind::QuadraticVariational => p - q,
        DivergenceKind::JeffreyJ | DivergenceKind::Bach(_) if q == 0.0 => {
            return Err(Error::DegenerateOutputEnergy);
        }
        DivergenceKind::JeffreyJ => (p / q).ln() + (p - q) / p,
        DivergenceKind::JensenShannon => (2.0 * p / (q + p)).ln(),
        DivergenceKind::Hellinger => (p.sqrt() - q.sqrt()) / p.sqrt(),
        DivergenceKind::Bach(b) => (p.powf(b) - q.powf(b)) / q.powf(1.0 - b),
    })
}

/// Whether the factor for `kind` divides by the output energy.
pub fn requires_output_energy(kind: DivergenceKind) -> bool {
    matches!(kind, DivergenceKind::JeffreyJ | DivergenceKind::Bach(_))
}
