//! Minimal compressed-sparse-column matrix used by the solver.

/// CSC matrix with sorted row indices within each column.
#[derive(Debug, Clone)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub colptr: Vec<usize>,
    pub rowidx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    /// Build from (row, col, value) triplets; duplicate entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut order: Vec<usize> = (0..triplets.len()).collect();
        order.sort_unstable_by_key(|&k| (triplets[k].1, triplets[k].0));
        let mut colptr = vec![0usize; ncols + 1];
        let mut rowidx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut prev: Option<(usize, usize)> = None;
        for &k in &order {
            let (r, c, v) = triplets[k];
            debug_assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
            if prev == Some((c, r)) {
                *values.last_mut().unwrap() += v;
            } else {
                rowidx.push(r);
                values.push(v);
                colptr[c + 1] += 1;
                prev = Some((c, r));
            }
        }
        for c in 0..ncols {
            colptr[c + 1] += colptr[c];
        }
        CscMatrix {
            nrows,
            ncols,
            colptr,
            rowidx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `y += A·x`
    pub fn matvec_acc(&self, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for p in self.colptr[c]..self.colptr[c + 1] {
                y[self.rowidx[p]] += self.values[p] * xc;
            }
        }
    }

    /// `y = A·x`
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.matvec_acc(x, y);
    }

    /// `y = Aᵀ·x`
    pub fn matvec_t(&self, x: &[f64], y: &mut [f64]) {
        for c in 0..self.ncols {
            let mut acc = 0.0;
            for p in self.colptr[c]..self.colptr[c + 1] {
                acc += self.values[p] * x[self.rowidx[p]];
            }
            y[c] = acc;
        }
    }
}
