//! Compressed-sparse-column matrices with a fixed pattern, Dirichlet
//! elimination, and cached sparse factorizations backed by `faer`.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack, StackReq};
use faer::linalg::solvers::SolveCore;
use faer::matrix_free::bicgstab::{bicgstab, bicgstab_scratch, BicgParams};
use faer::matrix_free::{IdentityPrecond, InitialGuessStatus, LinOp, Precond};
use faer::prelude::Reborrow;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::{Conj, Mat, MatRef, Par, Side};

use crate::error::{Error, Result};

/// Structurally fixed CSC sparsity pattern of a square matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsePattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl SparsePattern {
    /// Pattern from per-column row lists; rows are sorted and deduplicated.
    pub fn from_columns(columns: Vec<Vec<usize>>) -> Self {
        let n = columns.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for mut rows in columns {
            rows.sort_unstable();
            rows.dedup();
            assert!(rows.last().is_none_or(|&r| r < n), "row index out of range");
            row_idx.extend(rows);
            col_ptr.push(row_idx.len());
        }
        SparsePattern { n, col_ptr, row_idx }
    }

    pub fn from_entries(n: usize, entries: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut columns = vec![Vec::new(); n];
        for (r, c) in entries {
            columns[c].push(r);
        }
        SparsePattern::from_columns(columns)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn column(&self, col: usize) -> &[usize] {
        &self.row_idx[self.col_ptr[col]..self.col_ptr[col + 1]]
    }

    /// Storage position of `(row, col)`.
    pub fn index(&self, row: usize, col: usize) -> Option<usize> {
        let start = self.col_ptr[col];
        self.column(col).binary_search(&row).ok().map(|k| start + k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CscMatrix {
    pub pattern: Arc<SparsePattern>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn zeros(pattern: Arc<SparsePattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        CscMatrix { pattern, values }
    }

    pub fn dim(&self) -> usize {
        self.pattern.dim()
    }

    /// Adds to an entry that must be part of the pattern.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        match self.pattern.index(row, col) {
            Some(k) => self.values[k] += v,
            None => panic!("entry ({row}, {col}) is outside the sparsity pattern"),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pattern.index(row, col).map_or(0.0, |k| self.values[k])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        for c in 0..self.dim() {
            let start = self.pattern.col_ptr[c];
            for (k, &r) in self.pattern.column(c).iter().enumerate() {
                y[r] += self.values[start + k] * x[c];
            }
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |A_ij − A_ji| / max |A_ij|`
    pub fn relative_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in 0..self.dim() {
            let start = self.pattern.col_ptr[c];
            for (k, &r) in self.pattern.column(c).iter().enumerate() {
                worst = worst.max((self.values[start + k] - self.get(c, r)).abs());
            }
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    /// Scales entries to `A_ij · col_scale_j / row_scale_i`.
    pub fn rescale(&mut self, row_scale: &[f64], col_scale: &[f64]) {
        for c in 0..self.dim() {
            let start = self.pattern.col_ptr[c];
            for (k, &r) in self.pattern.column(c).iter().enumerate() {
                self.values[start + k] *= col_scale[c] / row_scale[r];
            }
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.dim(), self.dim());
        for c in 0..self.dim() {
            let start = self.pattern.col_ptr[c];
            for (k, &r) in self.pattern.column(c).iter().enumerate() {
                d[(r, c)] = self.values[start + k];
            }
        }
        d
    }

    fn to_faer(&self) -> SparseColMat<usize, f64> {
        let sym = SymbolicSparseColMat::new_checked(
            self.dim(),
            self.dim(),
            self.pattern.col_ptr.clone(),
            None,
            self.pattern.row_idx.clone(),
        );
        SparseColMat::new(sym, self.values.clone())
    }
}

/// Row and column elimination of prescribed dofs.
///
/// Known values are moved to the right-hand side, the constrained rows and
/// columns are cleared and their diagonal set to one, so symmetry is kept.
/// The pattern must be structurally symmetric.
pub fn apply_dirichlet(a: &mut CscMatrix, rhs: &mut [f64], prescribed: &[(usize, f64)]) {
    let mut fixed = vec![false; a.dim()];
    for &(d, _) in prescribed {
        fixed[d] = true;
    }
    let pattern = a.pattern.clone();
    for &(d, v) in prescribed {
        let start = pattern.col_ptr[d];
        for (k, &r) in pattern.column(d).iter().enumerate() {
            if !fixed[r] {
                rhs[r] -= a.values[start + k] * v;
            }
        }
    }
    for &(d, v) in prescribed {
        let start = pattern.col_ptr[d];
        for (k, &r) in pattern.column(d).iter().enumerate() {
            a.values[start + k] = 0.0;
            if let Some(t) = pattern.index(d, r) {
                a.values[t] = 0.0;
            }
        }
        a.add(d, d, 1.0);
        rhs[d] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    Lu,
    Cholesky,
}

enum Factor {
    Lu(Lu<usize, f64>),
    Llt(Llt<usize, f64>),
}

impl Factor {
    fn solve_in_place(&self, rhs: faer::MatMut<'_, f64>) {
        match self {
            Factor::Lu(f) => f.solve_in_place_with_conj(Conj::No, rhs),
            Factor::Llt(f) => f.solve_in_place_with_conj(Conj::No, rhs),
        }
    }
}

/// A stored factorization used as a preconditioner for later matrices.
struct FactorPrecond<'a> {
    factor: &'a Factor,
    dim: usize,
}

impl std::fmt::Debug for FactorPrecond<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FactorPrecond({})", self.dim)
    }
}

impl LinOp<f64> for FactorPrecond<'_> {
    fn apply_scratch(&self, _rhs_ncols: usize, _par: Par) -> StackReq {
        StackReq::EMPTY
    }

    fn nrows(&self) -> usize {
        self.dim
    }

    fn ncols(&self) -> usize {
        self.dim
    }

    fn apply(&self, mut out: faer::MatMut<'_, f64>, rhs: MatRef<'_, f64>, _par: Par, _stack: &mut MemStack) {
        out.copy_from(rhs);
        self.factor.solve_in_place(out);
    }

    fn conj_apply(&self, out: faer::MatMut<'_, f64>, rhs: MatRef<'_, f64>, par: Par, stack: &mut MemStack) {
        self.apply(out, rhs, par, stack);
    }
}

impl Precond<f64> for FactorPrecond<'_> {}

/// Settings for reusing an old factorization as a BiCGSTAB preconditioner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorReuse {
    /// Relative residual the iterative solve must reach.
    pub tolerance: f64,
    /// Iterations allowed before giving up and refactorizing.
    pub max_iterations: usize,
    /// A solve needing more iterations than this still counts, but the
    /// next matrix is factorized afresh.
    pub refresh_after: usize,
}

impl Default for FactorReuse {
    fn default() -> Self {
        FactorReuse {
            tolerance: 1e-9,
            max_iterations: 20,
            refresh_after: 8,
        }
    }
}

/// Sparse solver that keeps the symbolic analysis of the last pattern and,
/// when `reuse` is set, the last numeric factorization.
///
/// With reuse, a new matrix is first solved by BiCGSTAB preconditioned with
/// the stored factors; only when that misses the tolerance within the
/// iteration budget is the matrix factorized again.
#[derive(Default)]
pub struct DirectSolver {
    pattern: Option<Arc<SparsePattern>>,
    lu: Option<SymbolicLu<usize>>,
    llt: Option<SymbolicLlt<usize>>,
    factor: Option<Factor>,
    pub reuse: Option<FactorReuse>,
    pub factorizations: usize,
    pub iterative_solves: usize,
}

impl DirectSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_reuse(reuse: FactorReuse) -> Self {
        DirectSolver {
            reuse: Some(reuse),
            ..Self::default()
        }
    }

    /// Drops the stored numeric factorization.
    pub fn reset(&mut self) {
        self.factor = None;
    }

    pub fn solve(&mut self, a: &CscMatrix, b: &[f64], kind: Factorization) -> Result<Vec<f64>> {
        if b.len() != a.dim() {
            return Err(Error::LinearSolve(format!(
                "right-hand side has length {}, matrix dimension {}",
                b.len(),
                a.dim()
            )));
        }
        let same = self.pattern.as_ref().is_some_and(|p| Arc::ptr_eq(p, &a.pattern) || **p == *a.pattern);
        if !same {
            self.pattern = Some(a.pattern.clone());
            self.lu = None;
            self.llt = None;
            self.factor = None;
        }
        let mat = a.to_faer();
        let rhs = Mat::<f64>::from_fn(b.len(), 1, |i, _| b[i]);
        if let (Some(reuse), Some(factor)) = (self.reuse, &self.factor) {
            if let Some((x, iterations)) = preconditioned_solve(&mat, &rhs, factor, reuse) {
                self.iterative_solves += 1;
                if iterations > reuse.refresh_after {
                    self.factor = None;
                }
                return finite(x);
            }
        }
        let factor = self.factorize(&mat, kind)?;
        let mut x = rhs;
        factor.solve_in_place(x.as_mut());
        if self.reuse.is_some() {
            self.factor = Some(factor);
        }
        finite(x)
    }

    fn factorize(&mut self, mat: &SparseColMat<usize, f64>, kind: Factorization) -> Result<Factor> {
        self.factorizations += 1;
        Ok(match kind {
            Factorization::Lu => {
                if self.lu.is_none() {
                    self.lu = Some(
                        SymbolicLu::try_new(mat.symbolic())
                            .map_err(|e| Error::LinearSolve(format!("symbolic LU: {e:?}")))?,
                    );
                }
                let sym = self.lu.clone().expect("set above");
                Factor::Lu(
                    Lu::try_new_with_symbolic(sym, mat.rb())
                        .map_err(|e| Error::LinearSolve(format!("LU factorization: {e:?}")))?,
                )
            }
            Factorization::Cholesky => {
                if self.llt.is_none() {
                    self.llt = Some(
                        SymbolicLlt::try_new(mat.symbolic(), Side::Lower)
                            .map_err(|e| Error::LinearSolve(format!("symbolic Cholesky: {e:?}")))?,
                    );
                }
                let sym = self.llt.clone().expect("set above");
                Factor::Llt(
                    Llt::try_new_with_symbolic(sym, mat.rb(), Side::Lower)
                        .map_err(|e| Error::LinearSolve(format!("Cholesky factorization: {e:?}")))?,
                )
            }
        })
    }
}

fn preconditioned_solve(
    mat: &SparseColMat<usize, f64>,
    rhs: &Mat<f64>,
    factor: &Factor,
    reuse: FactorReuse,
) -> Option<(Mat<f64>, usize)> {
    let n = rhs.nrows();
    let precond = FactorPrecond { factor, dim: n };
    let identity = IdentityPrecond { dim: n };
    let mut x = Mat::<f64>::zeros(n, 1);
    let params = BicgParams {
        // `Zero` skips initializing the residual in faer 0.22; x is zeroed above instead
        initial_guess: InitialGuessStatus::MaybeNonZero,
        rel_tolerance: reuse.tolerance,
        max_iters: reuse.max_iterations,
        ..Default::default()
    };
    let par = Par::Seq;
    let mut buf = MemBuffer::new(bicgstab_scratch(identity, &precond, mat.rb(), 1, par));
    let info = bicgstab(
        x.as_mut(),
        identity,
        &precond,
        mat.rb(),
        rhs.as_ref(),
        params,
        |_| {},
        par,
        MemStack::new(&mut buf),
    )
    .ok()?;
    (info.rel_residual <= reuse.tolerance && x.col(0).iter().all(|v| v.is_finite())).then_some((x, info.iter_count))
}

fn finite(x: Mat<f64>) -> Result<Vec<f64>> {
    let out: Vec<f64> = (0..x.nrows()).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearSolve("solution contains non-finite values".into()));
    }
    Ok(out)
}
