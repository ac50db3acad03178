//! Cone-aware Ruiz equilibration.
//!
//! Iteratively scales `A ← D A E` toward unit row/column infinity norms.
//! Rows inside one second-order cone block must share a single scalar so the
//! cone is preserved; the block max is used. Big-M rows otherwise skew the
//! ADMM convergence badly.

use crate::conic::{Cone, ConeKind};

pub struct Scaling {
    /// Row scaling (length m).
    pub d: Vec<f64>,
    /// Column scaling (length n).
    pub e: Vec<f64>,
}

impl Scaling {
    pub fn identity(m: usize, n: usize) -> Self {
        Scaling {
            d: vec![1.0; m],
            e: vec![1.0; n],
        }
    }
}

pub fn equilibrate(
    triplets: &[(usize, usize, f64)],
    m: usize,
    n: usize,
    cones: &[Cone],
    iterations: usize,
) -> Scaling {
    let mut sc = Scaling::identity(m, n);
    // Map each row to its cone block and whether the block must share a scalar.
    let mut block_of = vec![0usize; m];
    let mut block_start = Vec::with_capacity(cones.len());
    let mut offset = 0;
    for (bi, c) in cones.iter().enumerate() {
        block_start.push(offset);
        for r in offset..offset + c.dim {
            block_of[r] = bi;
        }
        offset += c.dim;
    }

    let mut row_norm = vec![0.0f64; m];
    let mut col_norm = vec![0.0f64; n];
    for _ in 0..iterations {
        row_norm.fill(0.0);
        col_norm.fill(0.0);
        for &(r, c, v) in triplets {
            let scaled = (sc.d[r] * v * sc.e[c]).abs();
            if scaled > row_norm[r] {
                row_norm[r] = scaled;
            }
            if scaled > col_norm[c] {
                col_norm[c] = scaled;
            }
        }
        // SOC blocks share the block max.
        for (bi, c) in cones.iter().enumerate() {
            if c.kind == ConeKind::SecondOrder {
                let s = block_start[bi];
                let mx = row_norm[s..s + c.dim].iter().fold(0.0_f64, |a, b| a.max(*b));
                for r in s..s + c.dim {
                    row_norm[r] = mx;
                }
            }
        }
        for r in 0..m {
            if row_norm[r] > 1e-12 {
                sc.d[r] /= row_norm[r].sqrt();
            }
        }
        for c in 0..n {
            if col_norm[c] > 1e-12 {
                sc.e[c] /= col_norm[c].sqrt();
            }
        }
    }
    sc
}
