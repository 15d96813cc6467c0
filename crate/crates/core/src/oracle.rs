//! Ground-truth linear algebra used to judge the learners.
//!
//! Everything here is deliberately independent of the learning rules: a cyclic
//! Jacobi eigensolver for symmetric matrices, the sample covariance, subspace
//! comparison (principal angles), the orthonormality defect `log|I - WᵀW|`
//! and a central-difference gradient checker.

use nalgebra::{DMatrix, DVector};

use crate::born::SampleVector;
use crate::error::{Error, Result};

/// Default off-diagonal tolerance for [`eig_sym`], relative to `‖C‖_F`.
pub const DEFAULT_EIG_TOL: f64 = 1e-15;

/// Default step for [`finite_difference_gradient`].
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Absolute floor used by [`relative_error`].
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-8;

const MAX_SWEEPS: usize = 100;
const SYMMETRY_TOL: f64 = 1e-9;

/// Eigen-decomposition of a real symmetric matrix.
///
/// Eigenvalues are sorted in descending order and column `i` of `eigenvectors`
/// is paired with `eigenvalues[i]`. Each eigenvector is sign-normalized so that
/// its largest-magnitude entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// First `n` eigenvectors as a `K×n` matrix.
    pub fn top(&self, n: usize) -> DMatrix<f64> {
        self.eigenvectors.columns(0, n).into_owned()
    }

    /// `V Λ Vᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        v * DMatrix::from_diagonal(&self.eigenvalues) * v.transpose()
    }
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Sweeps run until the largest off-diagonal magnitude drops below `tol·‖C‖_F`.
pub fn eig_sym(c: &DMatrix<f64>, tol: f64) -> Result<EigenDecomposition> {
    let n = c.nrows();
    if c.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: c.ncols(),
        });
    }
    if n == 0 {
        return Err(Error::Precondition("empty matrix".into()));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("eig_sym input".into()));
    }
    let fro = c.norm();
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((c[(i, j)] - c[(j, i)]).abs());
        }
    }
    if asym > SYMMETRY_TOL * fro.max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }

    // row-major working copies
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = 0.5 * (c[(i, j)] + c[(j, i)]);
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let threshold = tol.max(0.0) * fro;
    let mut converged = fro == 0.0;
    for _ in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        if off <= threshold {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 || apq.abs() < 0.01 * threshold {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    let kp = cs * akp - sn * akq;
                    let kq = sn * akp + cs * akq;
                    a[k * n + p] = kp;
                    a[p * n + k] = kp;
                    a[k * n + q] = kq;
                    a[q * n + k] = kq;
                }
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = cs * vkp - sn * vkq;
                    v[k * n + q] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    if !converged {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off = off.max(a[p * n + q].abs());
            }
        }
        if off > threshold {
            return Err(Error::NoConvergence(MAX_SWEEPS));
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| a[i * n + i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let mut pivot = 0.0f64;
        for k in 0..n {
            let x = v[k * n + src];
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for k in 0..n {
            eigenvectors[(k, col)] = sign * v[k * n + src];
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn accumulate_outer(samples: &[SampleVector], mean: Option<&DVector<f64>>) -> Result<DMatrix<f64>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Precondition("empty sample batch".into()))?;
    let k = first.dim();
    let mut c = DMatrix::zeros(k, k);
    for s in samples {
        if s.dim() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: s.dim(),
            });
        }
        let x = match mean {
            Some(m) => s.values() - m,
            None => s.values().clone(),
        };
        c.ger(1.0, &x, &x, 1.0);
    }
    c /= samples.len() as f64;
    // exact symmetry for downstream solvers
    let c = (&c + c.transpose()) * 0.5;
    Ok(c)
}

/// `C = (1/M) Σ x xᵀ`, treating the samples as zero-mean.
pub fn sample_covariance(samples: &[SampleVector]) -> Result<DMatrix<f64>> {
    accumulate_outer(samples, None)
}

/// Covariance about the empirical mean, for data that is not zero-mean by construction.
pub fn sample_covariance_centered(samples: &[SampleVector]) -> Result<DMatrix<f64>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Precondition("empty sample batch".into()))?;
    let mut mean = DVector::zeros(first.dim());
    for s in samples {
        if s.dim() != first.dim() {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                got: s.dim(),
            });
        }
        mean += s.values();
    }
    mean /= samples.len() as f64;
    accumulate_outer(samples, Some(&mean))
}

/// Elementwise `log(|I - WᵀW| + 1e-300)`.
pub fn orthonormality_error_matrix(w: &DMatrix<f64>) -> DMatrix<f64> {
    defect(w).map(|d| (d + 1e-300).ln())
}

/// Scalar orthonormality error: `log(max |I - WᵀW| + 1e-300)`.
pub fn orthonormality_error(w: &DMatrix<f64>) -> f64 {
    (defect(w).amax() + 1e-300).ln()
}

/// `max |I - WᵀW|`, the quantity inside [`orthonormality_error`].
pub fn max_orthonormality_defect(w: &DMatrix<f64>) -> f64 {
    defect(w).amax()
}

fn defect(w: &DMatrix<f64>) -> DMatrix<f64> {
    let n = w.ncols();
    (DMatrix::identity(n, n) - w.tr_mul(w)).abs()
}

/// Orthonormal basis of `span(W)` by twice-iterated modified Gram–Schmidt.
pub fn orthonormalize_columns(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut q = w.clone();
    for j in 0..q.ncols() {
        let original = q.column(j).norm();
        if original == 0.0 || !original.is_finite() {
            return Err(Error::DegenerateSubspace);
        }
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).into_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if norm <= 1e-10 * original {
            return Err(Error::DegenerateSubspace);
        }
        q.column_mut(j).scale_mut(1.0 / norm);
    }
    Ok(q)
}

/// Largest principal angle (radians, in `[0, π/2]`) between `span(W)` and `span(U)`.
///
/// `U` must have orthonormal columns and the same shape as `W`. The angle is
/// recovered as `atan2(sin, cos)` from the largest sine (residual of the
/// orthonormalized `W` outside `span(U)`) and the smallest cosine (smallest
/// singular value of the cross-Gram matrix), which stays accurate near both 0
/// and π/2.
pub fn principal_angle(w: &DMatrix<f64>, u: &DMatrix<f64>) -> Result<f64> {
    if w.nrows() != u.nrows() {
        return Err(Error::DimensionMismatch {
            expected: u.nrows(),
            got: w.nrows(),
        });
    }
    if w.ncols() != u.ncols() {
        return Err(Error::DimensionMismatch {
            expected: u.ncols(),
            got: w.ncols(),
        });
    }
    let n = u.ncols();
    let gram_defect = (u.tr_mul(u) - DMatrix::identity(n, n)).amax();
    if gram_defect > 1e-6 {
        return Err(Error::Precondition(format!(
            "reference basis is not orthonormal (defect {gram_defect:e})"
        )));
    }
    let q = orthonormalize_columns(w)?;
    let cross = u.tr_mul(&q);
    let residual = &q - u * &cross;
    let sin2 = eig_sym(&residual.tr_mul(&residual), DEFAULT_EIG_TOL)?.eigenvalues[0].max(0.0);
    let cos2 = eig_sym(&cross.tr_mul(&cross), DEFAULT_EIG_TOL)?.eigenvalues[n - 1].max(0.0);
    Ok(sin2.sqrt().atan2(cos2.sqrt()))
}

/// Central-difference gradient of a scalar function of a matrix.
pub fn finite_difference_gradient<F>(cost: F, w: &DMatrix<f64>, h: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&DMatrix<f64>) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("step h must be positive, got {h}")));
    }
    let mut probe = w.clone();
    let mut grad = DMatrix::zeros(w.nrows(), w.ncols());
    for j in 0..w.ncols() {
        for i in 0..w.nrows() {
            let orig = probe[(i, j)];
            probe[(i, j)] = orig + h;
            let plus = cost(&probe);
            probe[(i, j)] = orig - h;
            let minus = cost(&probe);
            probe[(i, j)] = orig;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::NonFinite(format!("cost at entry ({i}, {j})")));
            }
            grad[(i, j)] = (plus - minus) / (2.0 * h);
        }
    }
    Ok(grad)
}

/// `‖a - b‖_F / max(‖b‖_F, 1e-8)`.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm().max(RELATIVE_ERROR_FLOOR)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
    }

    fn random_symmetric(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = gaussian(n, n, rng);
        (&a + a.transpose()) * 0.5
    }

    #[test]
    fn diagonal_matrix() {
        let c = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0]));
        let e = eig_sym(&c, DEFAULT_EIG_TOL).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[3.0, 1.0]);
        assert_abs_diff_eq!(e.eigenvectors[(1, 0)].abs(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(e.eigenvectors[(0, 1)].abs(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn classic_two_by_two() {
        let c = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let e = eig_sym(&c, DEFAULT_EIG_TOL).unwrap();
        assert_abs_diff_eq!(e.eigenvalues[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvalues[1], 1.0, epsilon = 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(e.eigenvectors[(0, 0)], s, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvectors[(1, 0)], s, epsilon = 1e-14);
        assert_abs_diff_eq!(e.eigenvectors[(0, 1)].abs(), s, epsilon = 1e-14);
        assert_abs_diff_eq!(
            e.eigenvectors[(0, 1)],
            -e.eigenvectors[(1, 1)],
            epsilon = 1e-14
        );
    }

    #[test]
    fn random_100_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let c = random_symmetric(100, &mut rng);
        let e = eig_sym(&c, DEFAULT_EIG_TOL).unwrap();
        let fro = c.norm();
        assert!((e.reconstruct() - &c).norm() < 1e-8 * fro);
        let v = &e.eigenvectors;
        assert!((v.tr_mul(v) - DMatrix::identity(100, 100)).norm() < 1e-9);
        assert!((e.eigenvalues.sum() - c.trace()).abs() < 1e-9 * c.trace().abs().max(1.0));
        for i in 1..100 {
            assert!(e.eigenvalues[i - 1] >= e.eigenvalues[i]);
        }
        for i in 0..100 {
            let vi = v.column(i);
            let r = &c * vi - vi * e.eigenvalues[i];
            assert!(r.norm() < 1e-8 * fro);
        }
    }

    #[test]
    fn agrees_with_nalgebra_spectrum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = random_symmetric(12, &mut rng);
        let ours = eig_sym(&c, DEFAULT_EIG_TOL).unwrap();
        let mut theirs: Vec<f64> = c.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        theirs.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ours.eigenvalues.iter().zip(&theirs) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-11);
        }
    }

    #[test]
    fn rejects_asymmetric_and_nonfinite() {
        let c = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        assert!(matches!(eig_sym(&c, DEFAULT_EIG_TOL), Err(Error::NotSymmetric(_))));
        let c = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 1.0]);
        assert!(matches!(eig_sym(&c, DEFAULT_EIG_TOL), Err(Error::NonFinite(_))));
    }

    #[test]
    fn zero_matrix_is_already_diagonal() {
        let e = eig_sym(&DMatrix::zeros(3, 3), DEFAULT_EIG_TOL).unwrap();
        assert_eq!(e.eigenvalues.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn covariance_examples() {
        let one = [SampleVector::from_slice(&[1.0, 0.0])];
        let c = sample_covariance(&one).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let four: Vec<_> = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]]
            .iter()
            .map(|v| SampleVector::from_slice(v))
            .collect();
        let c = sample_covariance(&four).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]));
        assert!(sample_covariance(&[]).is_err());

        let shifted: Vec<_> = [[2.0, 1.0], [0.0, 1.0]]
            .iter()
            .map(|v| SampleVector::from_slice(v))
            .collect();
        let c = sample_covariance_centered(&shifted).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn orthonormality_error_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = orthonormalize_columns(&gaussian(4, 4, &mut rng)).unwrap();
        assert!(orthonormality_error(&q) < (1e-12f64).ln());
        let scaled = &q * 2.0;
        assert_abs_diff_eq!(orthonormality_error(&scaled), 3f64.ln(), epsilon = 1e-12);
        let m = orthonormality_error_matrix(&scaled);
        assert_abs_diff_eq!(m[(0, 0)], 3f64.ln(), epsilon = 1e-12);
        assert!(m[(0, 1)] < -25.0);
    }

    #[test]
    fn principal_angle_examples() {
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let e2 = DMatrix::from_column_slice(2, 1, &[0.0, 1.0]);
        assert_abs_diff_eq!(
            principal_angle(&e1, &e2).unwrap(),
            std::f64::consts::FRAC_PI_2,
            epsilon = 1e-15
        );

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = orthonormalize_columns(&gaussian(6, 3, &mut rng)).unwrap();
        let mix = gaussian(3, 3, &mut rng);
        let w = &u * mix;
        assert!(principal_angle(&w, &u).unwrap() < 1e-8);

        let degenerate = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 0.0, 0.0]);
        let u = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(principal_angle(&degenerate, &u), Err(Error::DegenerateSubspace));
    }

    #[test]
    fn small_known_angle() {
        let theta: f64 = 1e-9;
        let w = DMatrix::from_column_slice(3, 1, &[theta.cos(), theta.sin(), 0.0]);
        let u = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let got = principal_angle(&w, &u).unwrap();
        assert!((got - theta).abs() < 1e-15);
    }

    #[test]
    fn fd_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = gaussian(3, 2, &mut rng);
        let g = finite_difference_gradient(|m| m.norm_squared(), &w, 1e-5).unwrap();
        assert!((g - &w * 2.0).amax() < 1e-9);
        let g = finite_difference_gradient(|_| 7.0, &w, 1e-5).unwrap();
        assert_eq!(g, DMatrix::zeros(3, 2));
        assert!(finite_difference_gradient(|_| f64::NAN, &w, 1e-5).is_err());
        assert!(finite_difference_gradient(|_| 1.0, &w, 0.0).is_err());
    }

    #[test]
    fn fd_second_order_convergence() {
        // cubic cost: central differences have error c·h², so halving h quarters it
        let w = DMatrix::from_row_slice(2, 2, &[0.3, -0.7, 1.1, 0.4]);
        let cost = |m: &DMatrix<f64>| m.iter().map(|v| v * v * v).sum::<f64>();
        let exact = w.map(|v| 3.0 * v * v);
        let e1 = (finite_difference_gradient(cost, &w, 1e-2).unwrap() - &exact).norm();
        let e2 = (finite_difference_gradient(cost, &w, 5e-3).unwrap() - &exact).norm();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    proptest::proptest! {
        #[test]
        fn principal_angle_is_span_invariant(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = rng.random_range(3..9);
            let n = rng.random_range(1..k);
            let u = orthonormalize_columns(&gaussian(k, n, &mut rng)).unwrap();
            let w = gaussian(k, n, &mut rng);
            let mut g = gaussian(n, n, &mut rng);
            for i in 0..n { g[(i, i)] += 3.0; }
            let a = principal_angle(&w, &u).unwrap();
            let b = principal_angle(&(&w * g), &u).unwrap();
            proptest::prop_assert!((a - b).abs() < 1e-8);
            proptest::prop_assert!((0.0..=std::f64::consts::FRAC_PI_2).contains(&a));
        }
    }
}
