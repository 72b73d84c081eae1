//! Sparse counterparts of the MFPT solvers for chains too large for dense LU.
//!
//! Every row of a transition matrix produced by the protocol has at most a
//! handful of entries, so both routes are solved with a sparse LU. The
//! fundamental-matrix route never forms the dense projector `Π`: the
//! stationary vector and the needed row of `Z` come from singular systems
//! made regular by pinning one unknown.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;

use super::{MfptError, MfptResultOf};
use crate::linalg::DenseMatrix;

/// Residual (max-norm, relative to the right-hand side) accepted from a sparse solve.
pub const SOLVE_TOL: f64 = 1e-9;

/// Square matrix stored as a list of `(row, column, value)` entries.
///
/// Duplicate positions are summed.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseMatrix {
    pub fn new(n: usize) -> Self {
        SparseMatrix { n, entries: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn push(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.n && j < self.n, "entry ({i}, {j}) outside {}x{}", self.n, self.n);
        if value != 0.0 {
            self.entries.push((i, j, value));
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut s = SparseMatrix::new(m.dim());
        for i in 0..m.dim() {
            for (j, &v) in m.row(i).iter().enumerate() {
                s.push(i, j, v);
            }
        }
        s
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        m
    }

    /// Entries of column `j` as `(row, value)` pairs, unsummed.
    fn column(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().filter(move |e| e.1 == j).map(|&(i, _, v)| (i, v))
    }

    fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }
}

struct System {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl System {
    fn new(n: usize) -> Self {
        System { n, entries: Vec::new() }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(i, j, v) in &self.entries {
            y[i] += v * x[j];
        }
        y
    }

    fn solve(&self, b: &[f64]) -> MfptResultOf<Vec<f64>> {
        let triplets: Vec<Triplet<usize, usize, f64>> =
            self.entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let a = SparseColMat::<usize, f64>::try_new_from_triplets(self.n, self.n, &triplets)
            .map_err(|e| MfptError::Sparse(format!("{e:?}")))?;
        let lu = a.sp_lu().map_err(|e| MfptError::Sparse(format!("{e:?}")))?;
        let rhs = Col::from_fn(self.n, |i| b[i]);
        let sol = lu.solve(&rhs);
        let x: Vec<f64> = (0..self.n).map(|i| sol[i]).collect();
        let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let residual = self.apply(&x).iter().zip(b).map(|(ax, bi)| (ax - bi).abs()).fold(0.0, f64::max) / scale;
        if !residual.is_finite() || residual > SOLVE_TOL {
            return Err(MfptError::Inaccurate(residual));
        }
        Ok(x)
    }
}

fn check_index(p: &SparseMatrix, ks: &[usize]) -> MfptResultOf<()> {
    match ks.iter().find(|&&k| k >= p.n) {
        Some(&k) => Err(MfptError::BadIndex(k)),
        None => Ok(()),
    }
}

/// Sparse [`super::hitting_time`].
pub fn hitting_time(p: &SparseMatrix, target: usize) -> MfptResultOf<Vec<f64>> {
    check_index(p, &[target])?;
    check_reachable(p, target)?;
    let n = p.n;
    // transient index of each state; the target is dropped
    let slot = |j: usize| if j < target { j } else { j - 1 };
    let m = n - 1;
    let mut t = vec![0.0; n];
    if m == 0 {
        return Ok(t);
    }
    let mut sys = System::new(m);
    for r in 0..m {
        sys.add(r, r, 1.0);
    }
    for &(k, j, v) in &p.entries {
        if k != target && j != target {
            sys.add(slot(j), slot(k), -v);
        }
    }
    let sol = sys.solve(&vec![1.0; m])?;
    for j in (0..n).filter(|&j| j != target) {
        t[j] = sol[slot(j)];
    }
    Ok(t)
}

fn check_reachable(p: &SparseMatrix, target: usize) -> MfptResultOf<()> {
    let n = p.n;
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j, v) in &p.entries {
        if v > 0.0 {
            preds[i].push(j);
        }
    }
    let mut reach = vec![false; n];
    reach[target] = true;
    let mut frontier = vec![target];
    while let Some(i) = frontier.pop() {
        for &j in &preds[i] {
            if !reach[j] {
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

/// `(I - P)` or `(I - Pᵀ)` with row and column `r` removed; indices above
/// `r` shift down by one.
fn grounded(p: &SparseMatrix, r: usize, transposed: bool) -> System {
    let slot = |j: usize| if j < r { j } else { j - 1 };
    let mut sys = System::new(p.n - 1);
    for k in 0..p.n - 1 {
        sys.add(k, k, 1.0);
    }
    for &(i, j, v) in &p.entries {
        let (i, j) = if transposed { (j, i) } else { (i, j) };
        if i != r && j != r {
            sys.add(slot(i), slot(j), -v);
        }
    }
    sys
}

/// Sparse [`super::stationary`].
///
/// Fixes `π_0 = 1`, solves the remaining balance equations, then normalises.
pub fn stationary(p: &SparseMatrix) -> MfptResultOf<Vec<f64>> {
    let n = p.n;
    let mut pi = vec![1.0; n];
    if n > 1 {
        let mut b = vec![0.0; n - 1];
        for (i, v) in p.column(0).filter(|&(i, _)| i != 0) {
            b[i - 1] += v;
        }
        let x = grounded(p, 0, false).solve(&b)?;
        pi[1..].copy_from_slice(&x);
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= total);
    let residual = p.mul_vec(&pi).iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if residual > super::STATIONARY_TOL || pi.iter().any(|&x| x <= 0.0) {
        return Err(MfptError::NoConvergence(residual));
    }
    Ok(pi)
}

/// Sparse [`super::mfpt_entry`].
///
/// Row `target` of `Z = (I - P + Π)⁻¹` satisfies `(I - Pᵀ) z = e_t - π_t 1`.
/// The entry only depends on differences of `z`, so the solution is pinned
/// at `z_start = 0` and the redundant equation of `start` dropped.
pub fn mfpt_entry(p: &SparseMatrix, start: usize, target: usize) -> MfptResultOf<f64> {
    check_index(p, &[start, target])?;
    if start == target {
        return Ok(0.0);
    }
    let n = p.n;
    let pi = stationary(p)?;
    let slot = |j: usize| if j < start { j } else { j - 1 };
    let mut b = vec![-pi[target]; n - 1];
    b[slot(target)] += 1.0;
    let z = grounded(p, start, true).solve(&b)?;
    Ok(z[slot(target)] / pi[target])
}

/// Sparse [`super::ergodize`].
pub fn ergodize(p: &SparseMatrix, target: usize, start: usize) -> MfptResultOf<SparseMatrix> {
    check_index(p, &[start, target])?;
    let mut col = vec![0.0; p.n];
    for (i, v) in p.column(target) {
        col[i] += v;
    }
    let absorbing = col.iter().enumerate().all(|(i, &v)| (v - if i == target { 1.0 } else { 0.0 }).abs() <= 1e-12);
    if !absorbing {
        return Err(MfptError::NotAbsorbing(target));
    }
    let mut q = SparseMatrix::new(p.n);
    q.entries = p.entries.iter().copied().filter(|e| e.1 != target).collect();
    q.push(start, target, 1.0);
    Ok(q)
}
