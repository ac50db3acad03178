//! Sparse LDLᵀ factorization of the quasi-definite ADMM KKT system
//!
//! ```text
//! K = [ ρI   Aᵀ  ]
//!     [ A   −I/ρ ]
//! ```
//!
//! The factorization is computed once per problem (up-looking LDLᵀ over the
//! upper triangle, elimination-tree based, in the style of QDLDL) and reused
//! across all ADMM iterations and across branch-and-bound nodes that only
//! edit `b`. Solves run two rounds of iterative refinement against the
//! unregularized system.

use thiserror::Error;

use super::sparse::CscMatrix;
use crate::conic::ConicProblem;

#[derive(Debug, Error)]
pub enum KktError {
    #[error("KKT system is numerically singular (zero pivot at column {0})")]
    ZeroPivot(usize),
    #[error("empty problem")]
    Empty,
}

const STATIC_REG: f64 = 1e-8;
const DYNAMIC_EPS: f64 = 1e-13;
const DYNAMIC_DELTA: f64 = 1e-7;

/// Reusable factorization handle. Immutable after creation; shareable
/// read-only across threads.
#[derive(Debug, Clone)]
pub struct KktFactor {
    /// Number of primal variables (leading block).
    pub n: usize,
    /// Number of constraint rows (trailing block).
    pub m: usize,
    rho: f64,
    /// Unregularized upper triangle of K, kept for refinement residuals.
    upper: CscMatrix,
    l_colptr: Vec<usize>,
    l_rowidx: Vec<usize>,
    l_values: Vec<f64>,
    dinv: Vec<f64>,
}

/// Scratch space so repeated solves are allocation-free.
#[derive(Debug, Clone)]
pub struct KktWorkspace {
    res: Vec<f64>,
    sol: Vec<f64>,
}

impl KktWorkspace {
    pub fn new(dim: usize) -> Self {
        KktWorkspace {
            res: vec![0.0; dim],
            sol: vec![0.0; dim],
        }
    }
}

/// Build the KKT factorization for a problem's constraint matrix. The matrix
/// is assembled from the problem triplets; `b` plays no role, so bound-row
/// edits never invalidate the handle.
pub fn factorize_kkt(problem: &ConicProblem, rho: f64) -> Result<KktFactor, KktError> {
    let n = problem.num_vars();
    let m = problem.num_rows();
    KktFactor::new(n, m, problem.triplets(), rho)
}

impl KktFactor {
    /// `a_triplets` are the (row, col, value) entries of the m×n constraint
    /// matrix A.
    pub fn new(
        n: usize,
        m: usize,
        a_triplets: &[(usize, usize, f64)],
        rho: f64,
    ) -> Result<Self, KktError> {
        let dim = n + m;
        if dim == 0 {
            return Err(KktError::Empty);
        }
        // Upper triangle of K: diagonal ρ block, Aᵀ block at (col, n+row),
        // diagonal −1/ρ block.
        let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(dim + a_triplets.len());
        for i in 0..n {
            trips.push((i, i, rho));
        }
        for &(r, c, v) in a_triplets {
            trips.push((c, n + r, v));
        }
        for r in 0..m {
            trips.push((n + r, n + r, -1.0 / rho));
        }
        let upper = CscMatrix::from_triplets(dim, dim, &trips);

        // Regularized copy for the factorization itself.
        let mut reg = upper.clone();
        for col in 0..dim {
            let sign = if col < n { 1.0 } else { -1.0 };
            for p in reg.colptr[col]..reg.colptr[col + 1] {
                if reg.rowidx[p] == col {
                    reg.values[p] += sign * STATIC_REG;
                }
            }
        }

        let (l_colptr, l_rowidx, l_values, dinv) = ldl_factor(&reg, n)?;
        Ok(KktFactor {
            n,
            m,
            rho,
            upper,
            l_colptr,
            l_rowidx,
            l_values,
            dinv,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    fn ldl_solve(&self, x: &mut [f64]) {
        // (L+I) z = x
        for i in 0..x.len() {
            let xi = x[i];
            if xi != 0.0 {
                for p in self.l_colptr[i]..self.l_colptr[i + 1] {
                    x[self.l_rowidx[p]] -= self.l_values[p] * xi;
                }
            }
        }
        // D w = z
        for i in 0..x.len() {
            x[i] *= self.dinv[i];
        }
        // (L+I)ᵀ y = w
        for i in (0..x.len()).rev() {
            let mut s = 0.0;
            for p in self.l_colptr[i]..self.l_colptr[i + 1] {
                s += self.l_values[p] * x[self.l_rowidx[p]];
            }
            x[i] -= s;
        }
    }

    /// y = K·x using the unregularized upper triangle.
    fn kkt_matvec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        for col in 0..self.upper.ncols {
            let xc = x[col];
            for p in self.upper.colptr[col]..self.upper.colptr[col + 1] {
                let row = self.upper.rowidx[p];
                let v = self.upper.values[p];
                y[row] += v * xc;
                if row != col {
                    y[col] += v * x[row];
                }
            }
        }
    }

    /// Solve `K x = rhs` in place with two rounds of iterative refinement
    /// against the unregularized system.
    pub fn solve(&self, rhs: &mut [f64], ws: &mut KktWorkspace) {
        debug_assert_eq!(rhs.len(), self.dim());
        ws.sol.copy_from_slice(rhs);
        self.ldl_solve(&mut ws.sol);
        for _ in 0..2 {
            self.kkt_matvec(&ws.sol, &mut ws.res);
            let mut worst = 0.0_f64;
            for i in 0..rhs.len() {
                ws.res[i] = rhs[i] - ws.res[i];
                worst = worst.max(ws.res[i].abs());
            }
            if worst < 1e-13 {
                break;
            }
            self.ldl_solve(&mut ws.res);
            for i in 0..rhs.len() {
                ws.sol[i] += ws.res[i];
            }
        }
        rhs.copy_from_slice(&ws.sol);
    }
}

/// Up-looking LDLᵀ of an upper-triangular CSC matrix with quasi-definite
/// sign structure: columns `< n` expect positive pivots, the rest negative.
/// Returns (Lp, Li, Lx, Dinv); L is unit lower triangular stored by columns.
#[allow(clippy::type_complexity)]
fn ldl_factor(
    upper: &CscMatrix,
    n: usize,
) -> Result<(Vec<usize>, Vec<usize>, Vec<f64>, Vec<f64>), KktError> {
    let dim = upper.ncols;
    const UNKNOWN: usize = usize::MAX;

    // Elimination tree and column counts.
    let mut etree = vec![UNKNOWN; dim];
    let mut lnz = vec![0usize; dim];
    let mut work = vec![UNKNOWN; dim];
    for j in 0..dim {
        work[j] = j;
        for p in upper.colptr[j]..upper.colptr[j + 1] {
            let mut i = upper.rowidx[p];
            debug_assert!(i <= j, "matrix not upper triangular");
            while work[i] != j {
                if etree[i] == UNKNOWN {
                    etree[i] = j;
                }
                lnz[i] += 1;
                work[i] = j;
                i = etree[i];
            }
        }
    }

    let total: usize = lnz.iter().sum();
    let mut lp = vec![0usize; dim + 1];
    for i in 0..dim {
        lp[i + 1] = lp[i] + lnz[i];
    }
    let mut li = vec![0usize; total];
    let mut lx = vec![0.0f64; total];
    let mut d = vec![0.0f64; dim];
    let mut dinv = vec![0.0f64; dim];

    let mut y_vals = vec![0.0f64; dim];
    let mut y_used = vec![false; dim];
    let mut y_idx = vec![0usize; dim];
    let mut elim = vec![0usize; dim];
    let mut next_space = lp[..dim].to_vec();

    let regularize = |dk: &mut f64, col: usize| -> Result<(), KktError> {
        let sign = if col < n { 1.0 } else { -1.0 };
        if *dk * sign < DYNAMIC_EPS {
            *dk = DYNAMIC_DELTA * sign;
        }
        if *dk == 0.0 {
            return Err(KktError::ZeroPivot(col));
        }
        Ok(())
    };

    // First pivot: column 0 holds only its diagonal.
    let p0 = upper.colptr[0];
    d[0] = if upper.colptr[1] > p0 && upper.rowidx[p0] == 0 {
        upper.values[p0]
    } else {
        0.0
    };
    regularize(&mut d[0], 0)?;
    dinv[0] = 1.0 / d[0];

    for k in 1..dim {
        // Pattern of row k of L via elimination-tree reach.
        let mut nnz_y = 0usize;
        for p in upper.colptr[k]..upper.colptr[k + 1] {
            let bidx = upper.rowidx[p];
            if bidx == k {
                d[k] = upper.values[p];
                continue;
            }
            y_vals[bidx] = upper.values[p];
            if !y_used[bidx] {
                y_used[bidx] = true;
                elim[0] = bidx;
                let mut nnz_e = 1usize;
                let mut next = etree[bidx];
                while next != UNKNOWN && next < k {
                    if y_used[next] {
                        break;
                    }
                    y_used[next] = true;
                    elim[nnz_e] = next;
                    next = etree[next];
                    nnz_e += 1;
                }
                while nnz_e > 0 {
                    nnz_e -= 1;
                    y_idx[nnz_y] = elim[nnz_e];
                    nnz_y += 1;
                }
            }
        }

        // Numeric sweep along the pattern, deepest first.
        for i in (0..nnz_y).rev() {
            let cidx = y_idx[i];
            let yv = y_vals[cidx];
            let tmp = next_space[cidx];
            for q in lp[cidx]..tmp {
                y_vals[li[q]] -= lx[q] * yv;
            }
            lx[tmp] = yv * dinv[cidx];
            d[k] -= yv * lx[tmp];
            li[tmp] = k;
            next_space[cidx] += 1;
            y_vals[cidx] = 0.0;
            y_used[cidx] = false;
        }

        regularize(&mut d[k], k)?;
        dinv[k] = 1.0 / d[k];
    }

    Ok((lp, li, lx, dinv))
}
