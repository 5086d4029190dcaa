//! Constrained solve and spectral condition number estimation.
//!
//! The mean-zero constraint is enforced through a single Lagrange
//! multiplier appended as a bordered row and column, which removes the
//! one-dimensional kernel while keeping the system symmetric. Condition
//! numbers of the scaled operator are computed on the complement of the
//! known kernel, either by a full dense eigensolve or by Lanczos iteration
//! combined with a shift-invert pass through the bordered factorization.

use crate::assembly::AssembledSystem;
use crate::error::{CutFemError, Result};
use crate::sparse::CsrMatrix;
use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Solution of the constrained system.
#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub bulk: Vec<f64>,
    pub surf: Vec<f64>,
    pub multiplier: f64,
    /// Relative residual of the bordered system.
    pub residual_norm: f64,
}

/// How the spectral bounds were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondMethod {
    Dense,
    Iterative,
}

/// Extreme eigenvalues of the operator restricted to the kernel complement.
#[derive(Debug, Clone)]
pub struct SpectralEstimate {
    pub lambda_max: f64,
    pub lambda_min_nonzero: f64,
    pub kappa: f64,
    pub method: CondMethod,
    /// False flags an untrusted partial estimate from a non-converged
    /// iterative run.
    pub converged: bool,
}

fn bordered_lu(
    matrix: &CsrMatrix,
    border: &[f64],
) -> Result<faer::sparse::linalg::solvers::Lu<usize, f64>> {
    let n = matrix.n_rows;
    let mut triplets = Vec::with_capacity(matrix.nnz() + 2 * n);
    for i in 0..n {
        let (cols, vals) = matrix.row(i);
        for (c, v) in cols.iter().zip(vals) {
            triplets.push(Triplet::new(i, *c, *v));
        }
    }
    for (i, &c) in border.iter().enumerate() {
        if c != 0.0 {
            triplets.push(Triplet::new(i, n, c));
            triplets.push(Triplet::new(n, i, c));
        }
    }
    let bordered = SparseColMat::<usize, f64>::try_new_from_triplets(n + 1, n + 1, &triplets)
        .map_err(|e| CutFemError::Internal(format!("bordered matrix build failed: {e:?}")))?;
    bordered
        .sp_lu()
        .map_err(|e| CutFemError::SingularSystem(format!("sparse LU factorization failed: {e:?}")))
}

/// Solves the bordered symmetric system for the constrained solution.
pub fn solve(system: &AssembledSystem) -> Result<SolutionPair> {
    let n = system.n_total();
    if system.constraint.iter().all(|&c| c == 0.0) {
        return Err(CutFemError::Precondition(
            "mean constraint weights are all zero".into(),
        ));
    }
    let lu = bordered_lu(&system.matrix, &system.constraint)?;
    let mut b = Mat::<f64>::zeros(n + 1, 1);
    for (i, &v) in system.rhs.iter().enumerate() {
        b[(i, 0)] = v;
    }
    let x = lu.solve(&b);

    let u: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    let multiplier = x[(n, 0)];
    if u.iter().any(|v| !v.is_finite()) || !multiplier.is_finite() {
        return Err(CutFemError::NonFinite {
            stage: "solve",
            detail: "non-finite solution entry out of the factorization".into(),
        });
    }

    // residual of the bordered system, relative to the load
    let mut au = vec![0.0; n];
    system.matrix.matvec(&u, &mut au);
    let mut res_sq = 0.0;
    for i in 0..n {
        let r = au[i] + multiplier * system.constraint[i] - system.rhs[i];
        res_sq += r * r;
    }
    let constraint_res: f64 = system
        .constraint
        .iter()
        .zip(&u)
        .map(|(c, v)| c * v)
        .sum();
    res_sq += constraint_res * constraint_res;
    let rhs_norm = system.rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let residual_norm = res_sq.sqrt() / rhs_norm.max(1e-300);

    Ok(SolutionPair {
        bulk: u[..system.n_bulk].to_vec(),
        surf: u[system.n_bulk..].to_vec(),
        multiplier,
        residual_norm,
    })
}

fn normalize(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

fn rayleigh_quotient(matrix: &CsrMatrix, v: &[f64]) -> f64 {
    let mut av = vec![0.0; matrix.n_rows];
    matrix.matvec(v, &mut av);
    let num: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().map(|x| x * x).sum();
    num / den
}

/// Size limit of the dense eigensolve path.
pub const DENSE_EIGEN_LIMIT: usize = 8000;

/// Spectral condition number of a symmetric positive semidefinite operator
/// with a known one-dimensional kernel, on the kernel complement.
pub fn condition_number(
    matrix: &CsrMatrix,
    kernel: &[f64],
    method: CondMethod,
) -> Result<SpectralEstimate> {
    if matrix.n_rows != matrix.n_cols || matrix.n_rows < 3 {
        return Err(CutFemError::InvalidArgument(
            "condition number needs a square operator of size at least 3".into(),
        ));
    }
    let w = normalize(kernel);

    match method {
        CondMethod::Dense => {
            if matrix.n_rows > DENSE_EIGEN_LIMIT {
                return Err(CutFemError::InvalidArgument(format!(
                    "dense eigensolve limited to {DENSE_EIGEN_LIMIT} unknowns, got {}; use the iterative method",
                    matrix.n_rows
                )));
            }
            let dense = matrix.to_faer_dense();
            let eigs: Vec<f64> = dense
                .self_adjoint_eigenvalues(Side::Lower)
                .map_err(|e| CutFemError::NonConvergence(format!("dense eigensolve: {e:?}")))?;
            let n = eigs.len();
            let lambda_max = eigs[n - 1];
            let lambda_min_nonzero = eigs[1];
            check_kernel(matrix, &w, lambda_max)?;
            if lambda_min_nonzero <= 0.0 {
                return Err(CutFemError::SingularSystem(format!(
                    "second-smallest eigenvalue {lambda_min_nonzero} is not positive"
                )));
            }
            Ok(SpectralEstimate {
                lambda_max,
                lambda_min_nonzero,
                kappa: lambda_max / lambda_min_nonzero,
                method,
                converged: true,
            })
        }
        CondMethod::Iterative => {
            let n = matrix.n_rows;
            let deflate = |x: &mut Vec<f64>| {
                let dot: f64 = x.iter().zip(&w).map(|(a, b)| a * b).sum();
                for (xi, wi) in x.iter_mut().zip(&w) {
                    *xi -= dot * wi;
                }
            };

            let op_forward = |x: &[f64]| {
                let mut y = vec![0.0; n];
                matrix.matvec(x, &mut y);
                deflate(&mut y);
                y
            };
            let (lambda_max, up_ok) = lanczos_extreme(&op_forward, n, &w, 101, 400, 1e-8)?;
            check_kernel(matrix, &w, lambda_max)?;

            let lu = bordered_lu(matrix, &w)?;
            let op_inverse = |x: &[f64]| {
                let mut b = Mat::<f64>::zeros(n + 1, 1);
                for (i, &v) in x.iter().enumerate() {
                    b[(i, 0)] = v;
                }
                let sol = lu.solve(&b);
                let mut y: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
                deflate(&mut y);
                y
            };
            let (mu_max, low_ok) = lanczos_extreme(&op_inverse, n, &w, 202, 400, 1e-8)?;
            if mu_max <= 0.0 {
                return Err(CutFemError::SingularSystem(format!(
                    "inverse-operator extreme eigenvalue {mu_max} is not positive"
                )));
            }
            let lambda_min_nonzero = 1.0 / mu_max;
            Ok(SpectralEstimate {
                lambda_max,
                lambda_min_nonzero,
                kappa: lambda_max / lambda_min_nonzero,
                method,
                converged: up_ok && low_ok,
            })
        }
    }
}

fn check_kernel(matrix: &CsrMatrix, unit_kernel: &[f64], lambda_max: f64) -> Result<()> {
    let r = rayleigh_quotient(matrix, unit_kernel).abs();
    if r > 1e-10 * lambda_max.abs().max(1e-300) {
        return Err(CutFemError::Precondition(format!(
            "supplied kernel vector has Rayleigh quotient {r}, not a kernel of the operator"
        )));
    }
    Ok(())
}

/// Largest eigenvalue of a symmetric operator by Lanczos iteration with full
/// reorthogonalization, deflated against `w`. Returns the estimate and a
/// convergence flag.
fn lanczos_extreme(
    op: &dyn Fn(&[f64]) -> Vec<f64>,
    n: usize,
    w: &[f64],
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<(f64, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let dot: f64 = q0.iter().zip(w).map(|(a, b)| a * b).sum();
    for (qi, wi) in q0.iter_mut().zip(w) {
        *qi -= dot * wi;
    }
    let mut basis = vec![normalize(&q0)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut previous = f64::NAN;
    let mut stable = 0;

    for k in 0..max_iter.min(n.saturating_sub(1)) {
        let mut v = op(&basis[k]);
        if k > 0 {
            let beta = betas[k - 1];
            for (vi, qi) in v.iter_mut().zip(&basis[k - 1]) {
                *vi -= beta * qi;
            }
        }
        let alpha: f64 = v.iter().zip(&basis[k]).map(|(a, b)| a * b).sum();
        for (vi, qi) in v.iter_mut().zip(&basis[k]) {
            *vi -= alpha * qi;
        }
        // full reorthogonalization, twice for safety
        for _ in 0..2 {
            for q in &basis {
                let d: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                for (vi, qi) in v.iter_mut().zip(q) {
                    *vi -= d * qi;
                }
            }
            let dw: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
            for (vi, wi) in v.iter_mut().zip(w) {
                *vi -= dw * wi;
            }
        }
        alphas.push(alpha);
        let beta = v.iter().map(|x| x * x).sum::<f64>().sqrt();

        // extreme Ritz value of the current tridiagonal
        let m = alphas.len();
        let mut t = Mat::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i + 1, i)] = betas[i];
                t[(i, i + 1)] = betas[i];
            }
        }
        let theta = *t
            .self_adjoint_eigenvalues(Side::Lower)
            .map_err(|e| CutFemError::NonConvergence(format!("tridiagonal eigensolve: {e:?}")))?
            .last()
            .unwrap();

        if beta < 1e-14 * theta.abs().max(1.0) {
            // invariant subspace found
            return Ok((theta, true));
        }
        if previous.is_finite() && (theta - previous).abs() <= tol * theta.abs().max(1e-300) {
            stable += 1;
            if stable >= 2 {
                return Ok((theta, true));
            }
        } else {
            stable = 0;
        }
        previous = theta;

        betas.push(beta);
        basis.push(v.iter().map(|x| x / beta).collect());
    }
    Ok((previous, false))
}
