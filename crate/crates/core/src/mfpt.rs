//! Mean first passage times of column-stochastic chains.
//!
//! Two independent routes are provided: the fundamental-matrix formula
//! `M = D(I - Z + Z_dg E)` with `Z = (I - P + Π)⁻¹` on an irreducible chain,
//! and a direct solve of the hitting-time equations towards one target.

use thiserror::Error;

use crate::linalg::{DenseMatrix, Lu, Singular};

pub mod sparse;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfptError {
    #[error("chain is reducible: stationary distribution is not unique ({0})")]
    Reducible(Singular),

    #[error("stationary distribution did not converge (residual {0:.3e})")]
    NoConvergence(f64),

    #[error("I - P + Π is singular: {0}")]
    SingularFundamental(Singular),

    #[error("state {0} cannot reach the target")]
    Unreachable(usize),

    #[error("target column {0} is not absorbing")]
    NotAbsorbing(usize),

    #[error("index {0} out of range")]
    BadIndex(usize),

    #[error("sparse factorisation failed: {0}")]
    Sparse(String),

    #[error("linear solve residual {0:.3e} exceeds tolerance")]
    Inaccurate(f64),
}

pub type MfptResultOf<T> = Result<T, MfptError>;

/// Residual tolerance for the stationary vector.
pub const STATIONARY_TOL: f64 = 1e-10;

fn stationary_residual(p: &DenseMatrix, pi: &[f64]) -> f64 {
    p.mul_vec(pi).iter().zip(pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Stationary distribution `π` with `Pπ = π`, `Σπ = 1`.
///
/// Solves the linear system with one balance row replaced by the
/// normalisation; falls back to power iteration on the lazy chain if the
/// direct answer misses the residual tolerance.
pub fn stationary(p: &DenseMatrix) -> MfptResultOf<Vec<f64>> {
    let n = p.dim();
    let mut a = p.clone();
    for i in 0..n {
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = vec![0.0; n];
    b[n - 1] = 1.0;
    let lu = Lu::factor(&a).map_err(MfptError::Reducible)?;
    let pi = lu.solve(&b);
    if stationary_residual(p, &pi) <= STATIONARY_TOL && pi.iter().all(|&x| x > -STATIONARY_TOL) {
        return Ok(pi);
    }
    power_iteration(p, pi)
}

fn power_iteration(p: &DenseMatrix, start: Vec<f64>) -> MfptResultOf<Vec<f64>> {
    let mut pi: Vec<f64> = start.iter().map(|x| x.max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    if total <= 0.0 {
        pi = vec![1.0 / p.dim() as f64; p.dim()];
    } else {
        pi.iter_mut().for_each(|x| *x /= total);
    }
    let mut residual = f64::INFINITY;
    for _ in 0..100_000 {
        let next = p.mul_vec(&pi);
        pi = pi.iter().zip(&next).map(|(a, b)| 0.5 * (a + b)).collect();
        residual = stationary_residual(p, &pi);
        if residual <= STATIONARY_TOL {
            return Ok(pi);
        }
    }
    Err(MfptError::NoConvergence(residual))
}

/// MFPT matrix and stationary vector of an irreducible chain.
#[derive(Clone, Debug, PartialEq)]
pub struct MfptResult {
    /// `m[(i, j)]`: mean number of steps from `j` until `i` is first visited
    /// (return time on the diagonal).
    pub m: DenseMatrix,
    pub pi: Vec<f64>,
}

impl MfptResult {
    /// Expected steps from `start` until `target` is first reached.
    pub fn expected(&self, start: usize, target: usize) -> f64 {
        if start == target {
            0.0
        } else {
            self.m[(target, start)]
        }
    }
}

fn fundamental(p: &DenseMatrix, pi: &[f64]) -> MfptResultOf<Lu> {
    let n = p.dim();
    let mut a = DenseMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] += pi[i] - p[(i, j)];
        }
    }
    Lu::factor(&a).map_err(MfptError::SingularFundamental)
}

/// Full MFPT matrix `M = D(I - Z + Z_dg E)`.
pub fn mfpt_matrix(p: &DenseMatrix) -> MfptResultOf<MfptResult> {
    let n = p.dim();
    let pi = stationary(p)?;
    let z = fundamental(p, &pi)?.inverse();
    let mut m = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let delta = if i == j { 1.0 } else { 0.0 };
            m[(i, j)] = (delta - z[(i, j)] + z[(i, i)]) / pi[i];
        }
    }
    Ok(MfptResult { m, pi })
}

/// Single entry `M[(target, start)]` of the MFPT matrix.
///
/// Only row `target` of `Z` is needed, which is one transposed solve
/// instead of a full inverse.
pub fn mfpt_entry(p: &DenseMatrix, start: usize, target: usize) -> MfptResultOf<f64> {
    let n = p.dim();
    for k in [start, target] {
        if k >= n {
            return Err(MfptError::BadIndex(k));
        }
    }
    if start == target {
        return Ok(0.0);
    }
    let pi = stationary(p)?;
    let lu = fundamental(p, &pi)?;
    let mut e = vec![0.0; n];
    e[target] = 1.0;
    let z_row = lu.solve_transposed(&e);
    Ok((z_row[target] - z_row[start]) / pi[target])
}

/// Expected steps from every state until `target` is first reached.
///
/// Solves `t_j = 1 + Σ_{k ≠ target} P[k][j] t_k` over the non-target states.
pub fn hitting_time(p: &DenseMatrix, target: usize) -> MfptResultOf<Vec<f64>> {
    let n = p.dim();
    if target >= n {
        return Err(MfptError::BadIndex(target));
    }
    check_reachable(p, target)?;
    let transient: Vec<usize> = (0..n).filter(|&k| k != target).collect();
    let m = transient.len();
    let mut a = DenseMatrix::identity(m);
    for (r, &j) in transient.iter().enumerate() {
        for (c, &k) in transient.iter().enumerate() {
            a[(r, c)] -= p[(k, j)];
        }
    }
    let mut t = vec![0.0; n];
    if m > 0 {
        let lu = Lu::factor(&a).map_err(|_| MfptError::Unreachable(transient[0]))?;
        let sol = lu.solve(&vec![1.0; m]);
        for (r, &j) in transient.iter().enumerate() {
            t[j] = sol[r];
        }
    }
    Ok(t)
}

fn check_reachable(p: &DenseMatrix, target: usize) -> MfptResultOf<()> {
    let n = p.dim();
    let mut reach = vec![false; n];
    reach[target] = true;
    let mut frontier = vec![target];
    while let Some(i) = frontier.pop() {
        for j in 0..n {
            if !reach[j] && p[(i, j)] > 0.0 {
                reach[j] = true;
                frontier.push(j);
            }
        }
    }
    match reach.iter().position(|r| !r) {
        Some(j) => Err(MfptError::Unreachable(j)),
        None => Ok(()),
    }
}

/// Redirects the absorbing target's column to unit mass on `start`.
pub fn ergodize(p: &DenseMatrix, target: usize, start: usize) -> MfptResultOf<DenseMatrix> {
    let n = p.dim();
    for k in [start, target] {
        if k >= n {
            return Err(MfptError::BadIndex(k));
        }
    }
    let absorbing = (0..n).all(|i| {
        let want = if i == target { 1.0 } else { 0.0 };
        (p[(i, target)] - want).abs() <= 1e-12
    });
    if !absorbing {
        return Err(MfptError::NotAbsorbing(target));
    }
    let mut q = p.clone();
    for i in 0..n {
        q[(i, target)] = 0.0;
    }
    q[(start, target)] = 1.0;
    Ok(q)
}
