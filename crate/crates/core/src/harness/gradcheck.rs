use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::born::{subspace_entropy_raw, SampleVector};
use crate::divergence::{modulation_factor, pointwise_divergence, DivergenceKind};
use crate::error::Result;
use crate::learners::{js1m_term, psa_increment, subspace_entropy_gradient};
use crate::oracle::{finite_difference_gradient, relative_error, DEFAULT_FD_STEP};

pub const GRADCHECK_TOL: f64 = 1e-5;
pub const GRADCHECK_CASES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub name: &'static str,
    pub cases: usize,
    pub worst_relative_error: f64,
    pub tolerance: f64,
}

impl GradCheck {
    pub fn passed(&self) -> bool {
        self.worst_relative_error < self.tolerance
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn sample(k: usize, rng: &mut ChaCha8Rng) -> Result<SampleVector> {
    SampleVector::new(DVector::from_fn(k, |_, _| rng.sample(StandardNormal)))
}

fn check(name: &'static str, cases: usize, mut case: impl FnMut() -> Result<f64>) -> Result<GradCheck> {
    let mut worst = 0.0f64;
    for _ in 0..cases {
        let e = case()?;
        worst = if e.is_nan() { f64::INFINITY } else { worst.max(e) };
    }
    Ok(GradCheck {
        name,
        cases,
        worst_relative_error: worst,
        tolerance: GRADCHECK_TOL,
    })
}

/// MHO increment vs `-¼∇` of the per-sample cost, square case.
pub fn check_mho_square(seed: u64, cases: usize) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    check("mho_increment_square", cases, || {
        let k = rng.random_range(2..=8);
        let w = gaussian(k, k, &mut rng) * 0.5;
        let x = sample(k, &mut rng)?;
        let inc = psa_increment(&w, &x, DivergenceKind::QuadraticVariational)?.expect("p* > 0");
        let g = finite_difference_gradient(|m| js1m_term(m, &x), &w, DEFAULT_FD_STEP)?;
        Ok(relative_error(&inc, &(g * -0.25)))
    })
}

/// MHO increment vs the column-tangent projection of `-¼∇` at unit-norm columns, `N < K`.
pub fn check_mho_compression(seed: u64, cases: usize) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    check("mho_increment_compression", cases, || {
        let k = rng.random_range(3..=10);
        let n = rng.random_range(1..k);
        let mut w = gaussian(k, n, &mut rng);
        for mut c in w.column_iter_mut() {
            c.normalize_mut();
        }
        let x = sample(k, &mut rng)?;
        let inc = psa_increment(&w, &x, DivergenceKind::QuadraticVariational)?.expect("p* > 0");
        let mut g = finite_difference_gradient(|m| js1m_term(m, &x), &w, DEFAULT_FD_STEP)? * -0.25;
        for j in 0..n {
            let wj = w.column(j).into_owned();
            let radial = wj.dot(&g.column(j));
            g.column_mut(j).axpy(-radial, &wj, 1.0);
        }
        Ok(relative_error(&inc, &g))
    })
}

/// Analytic `∇_W S^PS` vs central differences.
pub fn check_entropy_gradient(seed: u64, cases: usize) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    check("subspace_entropy_gradient", cases, || {
        let k = rng.random_range(2..=8);
        let n = rng.random_range(1..=k);
        let w = gaussian(k, n, &mut rng);
        let x = sample(k, &mut rng)?;
        let scale = 1.0 / x.energy();
        let g = subspace_entropy_gradient(&w, &x, scale)?;
        let fd = finite_difference_gradient(|m| subspace_entropy_raw(m, &x, scale), &w, DEFAULT_FD_STEP)?;
        Ok(relative_error(&g, &fd))
    })
}

/// Scalar factors vs the q-derivative of their divergence: qvar is `-½∂D/∂q`,
/// BACH is `-∂D/∂q / (2b)`.
pub fn check_factor_derivatives(seed: u64, cases: usize) -> Result<GradCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    check("modulation_factor_derivative", cases, || {
        let p: f64 = rng.random_range(0.05..2.0);
        let q: f64 = rng.random_range(0.05..2.0);
        let b: f64 = rng.random_range(0.01..1.0);
        let h = DEFAULT_FD_STEP;
        let mut worst = 0.0f64;
        for (kind, k) in [
            (DivergenceKind::QuadraticVariational, 0.5),
            (DivergenceKind::Bach(b), 0.5 / b),
        ] {
            let d = |q: f64| pointwise_divergence(p, q, kind);
            let dq = (d(q + h)? - d(q - h)?) / (2.0 * h);
            let f = modulation_factor(p, q, kind)?;
            let fd = -k * dq;
            worst = worst.max((f - fd).abs() / f.abs().max(fd.abs()).max(1e-8));
        }
        Ok(worst)
    })
}

/// All finite-difference consistency checks.
pub fn run_gradcheck(seed: u64) -> Result<Vec<GradCheck>> {
    Ok(vec![
        check_mho_square(seed, GRADCHECK_CASES)?,
        check_mho_compression(seed.wrapping_add(1), GRADCHECK_CASES)?,
        check_entropy_gradient(seed.wrapping_add(2), GRADCHECK_CASES)?,
        check_factor_derivatives(seed.wrapping_add(3), GRADCHECK_CASES)?,
    ])
}
