//! Dense linear-algebra primitives: spectral norm by power iteration,
//! matrix exponential by scaling and squaring, and a PSD-tolerant
//! Cholesky-type factorization for degenerate diffusion matrices.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn check_finite(a: &DMatrix<f64>, ctx: &'static str) -> Result<()> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite(ctx));
    }
    Ok(())
}

/// Spectral norm sqrt(lambda_max(A^T A)) via power iteration on A^T A.
///
/// The iterate is the Rayleigh quotient of the symmetric PSD matrix A^T A;
/// the eigenvalue estimate converges even when the top eigenspace is
/// degenerate. Satisfies max|a_ij| <= ||A||_2 <= n max|a_ij|.
pub fn spectral_norm(a: &DMatrix<f64>) -> Result<f64> {
    check_finite(a, "spectral_norm")?;
    let n = a.ncols();
    if n == 0 {
        return Ok(0.0);
    }
    let b = a.transpose() * a;
    // deterministic start with all modes populated
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + 0.01 * (i as f64 + 1.0).sin());
    let nv = v.norm();
    v /= nv;
    let mut lambda = 0.0f64;
    for _ in 0..50_000 {
        let w = &b * &v;
        let nw = w.norm();
        if nw == 0.0 {
            return Ok(0.0);
        }
        let new_lambda = v.dot(&w);
        v = w / nw;
        if (new_lambda - lambda).abs() <= 1e-15 * new_lambda.abs() {
            lambda = new_lambda;
            break;
        }
        lambda = new_lambda;
    }
    Ok(lambda.max(0.0).sqrt())
}

/// Matrix exponential by scaling and squaring with a truncated Taylor core.
///
/// The argument is scaled so its norm is below 1/2; the Taylor series is then
/// summed to machine precision and the result squared back up.
pub fn matrix_exp(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_finite(a, "matrix_exp")?;
    let n = a.nrows();
    let norm = a.iter().fold(0.0f64, |acc, &x| acc + x.abs()) / n as f64;
    let norm = norm.max(a.amax());
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let b = a / 2f64.powi(s as i32);

    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = DMatrix::<f64>::identity(n, n);
    for k in 1..=64u32 {
        term = (&term * &b) / k as f64;
        sum += &term;
        if term.amax() <= 1e-18 * sum.amax().max(1.0) {
            break;
        }
    }
    let mut result = sum;
    for _ in 0..s {
        result = &result * &result;
    }
    Ok(result)
}

/// Factor a symmetric PSD matrix as L L^T, tolerating rank deficiency.
/// Pivots below `tol * scale` are flushed to zero; pivots below `-tol * scale`
/// report failure through the returned pivot value.
pub fn psd_cholesky(a: &DMatrix<f64>, tol: f64) -> std::result::Result<DMatrix<f64>, f64> {
    let mut l = DMatrix::<f64>::zeros(a.nrows(), a.nrows());
    psd_cholesky_into(a, &mut l, tol)?;
    Ok(l)
}

/// Allocation-free variant of [`psd_cholesky`] writing into a caller-owned
/// matrix (hot loop of the path simulator).
pub fn psd_cholesky_into(
    a: &DMatrix<f64>,
    l: &mut DMatrix<f64>,
    tol: f64,
) -> std::result::Result<(), f64> {
    let n = a.nrows();
    let scale = a.amax().max(1.0);
    l.fill(0.0);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if diag < -tol * scale {
            return Err(diag);
        }
        if diag <= tol * scale {
            // rank-deficient column: zero it out
            continue;
        }
        let djj = diag.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut v = a[(i, j)];
            for k in 0..j {
                v -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = v / djj;
        }
    }
    Ok(())
}

/// Commutator [A, B] = AB - BA.
pub fn commutator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a * b - b * a
}
