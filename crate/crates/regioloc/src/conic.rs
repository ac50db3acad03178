//! Conic-problem intermediate representation and the SOC reformulation
//! toolbox.
//!
//! Every model compiles to the standard form
//!
//! ```text
//! min cᵀu   s.t.  A·u + s = b,  s ∈ K = K₁ × K₂ × ⋯
//! ```
//!
//! where each `Kᵢ` is a zero, nonnegative, or second-order cone and the cone
//! list partitions the rows of `A` in order. Binary variables are tracked as
//! integrality marks plus a pair of box rows (`u ≤ 1`, `−u ≤ 0`) whose
//! right-hand sides branch-and-bound edits to fix a binary, leaving `A`
//! untouched so a cached KKT factorization stays valid.
//!
//! `ℓτ` norm epigraphs `‖z‖τ ≤ t`:
//! * τ=2: one SOC block.
//! * τ=1: `v_k ≥ ±z_k` and `Σ v_k ≤ t` (linear rows only).
//! * τ=∞: `t ≥ ±z_k` (linear rows only).
//! * τ=3: per coordinate `v_k ≥ ±z_k` plus the rotated pair
//!   `v_k² ≤ w_k·t`, `w_k² ≤ s_k·v_k` (so `s_k ≥ v_k³/t²`), then `Σ s_k ≤ t`.
//! * τ=4: per coordinate the rotated pair `z_k² ≤ s_k·t`, `s_k² ≤ r_k·t`
//!   (so `r_k ≥ z_k⁴/t³`), then `Σ r_k ≤ t`.
//!
//! Each rotated cone `u² ≤ v·w` (v,w ≥ 0) is emitted as the SOC block
//! `‖(2u, v−w)‖₂ ≤ v+w`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{NormTag, Region};

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("variable handle {0} does not belong to this problem")]
    ForeignHandle(usize),
    #[error("row/cone bookkeeping broken: {0}")]
    Structure(String),
    #[error("parse error in problem dump: {0}")]
    Parse(String),
}

/// Cone kinds supported by the IR and the built-in solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    Zero,
    Nonnegative,
    SecondOrder,
}

/// One cone block covering `dim` consecutive rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cone {
    pub kind: ConeKind,
    pub dim: usize,
}

/// Handle to a column of the problem. Labels live in the problem itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct VarHandle(pub usize);

/// Row indices of the `u ≤ 1` / `−u ≤ 0` box rows of a binary variable.
#[derive(Debug, Clone, Copy)]
pub struct BinaryRows {
    pub upper: usize,
    pub lower: usize,
}

/// Sparse conic problem under construction; single writer, immutable once
/// handed to a solver.
#[derive(Debug, Clone, Default)]
pub struct ConicProblem {
    labels: Vec<String>,
    objective: Vec<f64>,
    /// (row, col, value) triplets, grouped by row in emission order.
    triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    cones: Vec<Cone>,
    rows: usize,
    integrality: Vec<usize>,
    binary_rows: BTreeMap<usize, BinaryRows>,
}

/// A row expressed as `Σ coef·var + constant`; the slack of the row is set
/// to exactly this expression.
pub type RowExpr<'a> = (&'a [(VarHandle, f64)], f64);

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.labels.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn cones(&self) -> &[Cone] {
        &self.cones
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    pub fn rhs_mut(&mut self) -> &mut [f64] {
        &mut self.b
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn integrality(&self) -> &[usize] {
        &self.integrality
    }

    pub fn binary_rows(&self) -> &BTreeMap<usize, BinaryRows> {
        &self.binary_rows
    }

    pub fn label(&self, v: VarHandle) -> &str {
        &self.labels[v.0]
    }

    pub fn new_var(&mut self, label: impl Into<String>) -> VarHandle {
        self.labels.push(label.into());
        self.objective.push(0.0);
        VarHandle(self.labels.len() - 1)
    }

    pub fn new_vars(&mut self, prefix: &str, count: usize) -> Vec<VarHandle> {
        (0..count)
            .map(|k| self.new_var(format!("{prefix}[{k}]")))
            .collect()
    }

    pub fn add_objective(&mut self, v: VarHandle, coef: f64) {
        self.objective[v.0] += coef;
    }

    fn push_row(&mut self, terms: &[(VarHandle, f64)], rhs: f64) -> usize {
        let row = self.rows;
        for &(v, coef) in terms {
            debug_assert!(v.0 < self.num_vars());
            if coef != 0.0 {
                self.triplets.push((row, v.0, coef));
            }
        }
        self.b.push(rhs);
        self.rows += 1;
        row
    }

    fn push_cone(&mut self, kind: ConeKind, dim: usize) {
        // Merge consecutive zero / nonnegative blocks.
        if let Some(last) = self.cones.last_mut() {
            if last.kind == kind && kind != ConeKind::SecondOrder {
                last.dim += dim;
                return;
            }
        }
        self.cones.push(Cone { kind, dim });
    }

    /// Equality row `Σ coef·var = rhs`.
    pub fn zero_row(&mut self, terms: &[(VarHandle, f64)], rhs: f64) -> usize {
        let r = self.push_row(terms, rhs);
        self.push_cone(ConeKind::Zero, 1);
        r
    }

    /// Inequality row `Σ coef·var ≤ rhs`.
    pub fn leq_row(&mut self, terms: &[(VarHandle, f64)], rhs: f64) -> usize {
        let r = self.push_row(terms, rhs);
        self.push_cone(ConeKind::Nonnegative, 1);
        r
    }

    /// Inequality row `Σ coef·var ≥ rhs`.
    pub fn geq_row(&mut self, terms: &[(VarHandle, f64)], rhs: f64) -> usize {
        let negated: Vec<(VarHandle, f64)> = terms.iter().map(|&(v, c)| (v, -c)).collect();
        self.leq_row(&negated, -rhs)
    }

    /// SOC block: the slack vector equals the given row expressions, with the
    /// first row acting as the cone radius: `s₀ ≥ ‖(s₁, …)‖₂`.
    pub fn soc_block(&mut self, exprs: &[(Vec<(VarHandle, f64)>, f64)]) {
        assert!(exprs.len() >= 2, "SOC block needs dim >= 2");
        for (terms, constant) in exprs {
            // s = b − A·u; to get s = expr + constant, negate the terms.
            let negated: Vec<(VarHandle, f64)> = terms.iter().map(|&(v, c)| (v, -c)).collect();
            self.push_row(&negated, *constant);
        }
        self.push_cone(ConeKind::SecondOrder, exprs.len());
    }

    /// Rotated cone `u² ≤ v·w` with `v, w ≥ 0`, each argument an affine row
    /// expression, emitted as `‖(2u, v−w)‖₂ ≤ v+w`.
    pub fn rotated_soc(&mut self, u: RowExpr, v: RowExpr, w: RowExpr) {
        let combine = |a: RowExpr, b: RowExpr, sb: f64| -> (Vec<(VarHandle, f64)>, f64) {
            let mut terms: Vec<(VarHandle, f64)> = a.0.to_vec();
            terms.extend(b.0.iter().map(|&(h, c)| (h, sb * c)));
            (terms, a.1 + sb * b.1)
        };
        let sum = combine(v, w, 1.0);
        let diff = combine(v, w, -1.0);
        let two_u: (Vec<(VarHandle, f64)>, f64) =
            (u.0.iter().map(|&(h, c)| (h, 2.0 * c)).collect(), 2.0 * u.1);
        self.soc_block(&[sum, two_u, diff]);
    }

    /// Pin a variable to a constant.
    pub fn fix_var(&mut self, v: VarHandle, value: f64) -> usize {
        self.zero_row(&[(v, 1.0)], value)
    }

    /// Mark a variable binary: record integrality and add the `[0,1]` box
    /// rows whose right-hand sides the branch-and-bound edits per node.
    pub fn mark_binary(&mut self, v: VarHandle) {
        let upper = self.leq_row(&[(v, 1.0)], 1.0);
        let lower = self.leq_row(&[(v, -1.0)], 0.0);
        self.integrality.push(v.0);
        self.binary_rows.insert(v.0, BinaryRows { upper, lower });
    }

    /// Set the box rows of a binary to `[lo, hi]` (relax `[0,1]`, fix `0`
    /// or `1`). Only touches `b`.
    pub fn set_binary_bounds(&mut self, v: VarHandle, lo: f64, hi: f64) {
        let rows = self.binary_rows[&v.0];
        self.b[rows.upper] = hi;
        self.b[rows.lower] = -lo;
    }

    /// Epigraph of the `ℓτ` norm: constraints whose projection onto `(z, t)`
    /// is exactly `{‖z‖τ ≤ t}`. `t` is constrained nonnegative explicitly.
    pub fn epigraph_norm(&mut self, z: &[VarHandle], t: VarHandle, tau: NormTag) {
        self.leq_row(&[(t, -1.0)], 0.0); // t ≥ 0
        match tau {
            NormTag::L2 => {
                let mut exprs: Vec<(Vec<(VarHandle, f64)>, f64)> = vec![(vec![(t, 1.0)], 0.0)];
                exprs.extend(z.iter().map(|&zk| (vec![(zk, 1.0)], 0.0)));
                self.soc_block(&exprs);
            }
            NormTag::L1 => {
                let base = self.labels[t.0].clone();
                let vs = self.new_vars(&format!("{base}.abs"), z.len());
                let mut sum: Vec<(VarHandle, f64)> = Vec::with_capacity(z.len() + 1);
                for (&zk, &vk) in z.iter().zip(&vs) {
                    self.leq_row(&[(zk, 1.0), (vk, -1.0)], 0.0); // z ≤ v
                    self.leq_row(&[(zk, -1.0), (vk, -1.0)], 0.0); // −z ≤ v
                    sum.push((vk, 1.0));
                }
                sum.push((t, -1.0));
                self.leq_row(&sum, 0.0); // Σ v ≤ t
            }
            NormTag::LInf => {
                for &zk in z {
                    self.leq_row(&[(zk, 1.0), (t, -1.0)], 0.0);
                    self.leq_row(&[(zk, -1.0), (t, -1.0)], 0.0);
                }
            }
            NormTag::L3 => {
                let base = self.labels[t.0].clone();
                let vs = self.new_vars(&format!("{base}.v3"), z.len());
                let ws = self.new_vars(&format!("{base}.w3"), z.len());
                let ss = self.new_vars(&format!("{base}.s3"), z.len());
                let mut sum: Vec<(VarHandle, f64)> = Vec::with_capacity(z.len() + 1);
                for k in 0..z.len() {
                    self.leq_row(&[(z[k], 1.0), (vs[k], -1.0)], 0.0);
                    self.leq_row(&[(z[k], -1.0), (vs[k], -1.0)], 0.0);
                    // v² ≤ w·t then w² ≤ s·v gives v³ ≤ s·t².
                    self.rotated_soc(
                        (&[(vs[k], 1.0)], 0.0),
                        (&[(ws[k], 1.0)], 0.0),
                        (&[(t, 1.0)], 0.0),
                    );
                    self.rotated_soc(
                        (&[(ws[k], 1.0)], 0.0),
                        (&[(ss[k], 1.0)], 0.0),
                        (&[(vs[k], 1.0)], 0.0),
                    );
                    sum.push((ss[k], 1.0));
                }
                sum.push((t, -1.0));
                self.leq_row(&sum, 0.0);
            }
            NormTag::L4 => {
                let base = self.labels[t.0].clone();
                let ss = self.new_vars(&format!("{base}.s4"), z.len());
                let rs = self.new_vars(&format!("{base}.r4"), z.len());
                let mut sum: Vec<(VarHandle, f64)> = Vec::with_capacity(z.len() + 1);
                for k in 0..z.len() {
                    // z² ≤ s·t then s² ≤ r·t gives z⁴ ≤ r·t³.
                    self.rotated_soc(
                        (&[(z[k], 1.0)], 0.0),
                        (&[(ss[k], 1.0)], 0.0),
                        (&[(t, 1.0)], 0.0),
                    );
                    self.rotated_soc(
                        (&[(ss[k], 1.0)], 0.0),
                        (&[(rs[k], 1.0)], 0.0),
                        (&[(t, 1.0)], 0.0),
                    );
                    sum.push((rs[k], 1.0));
                }
                sum.push((t, -1.0));
                self.leq_row(&sum, 0.0);
            }
        }
    }

    /// Epigraph of the distance `‖u − v‖τ ≤ t`: introduces difference
    /// variables `w = u − v` on zero rows and applies `epigraph_norm`.
    pub fn epigraph_distance(
        &mut self,
        u: &[VarHandle],
        v: &[VarHandle],
        t: VarHandle,
        tau: NormTag,
    ) {
        assert_eq!(u.len(), v.len());
        let base = self.labels[t.0].clone();
        let ws = self.new_vars(&format!("{base}.diff"), u.len());
        for k in 0..u.len() {
            self.zero_row(&[(ws[k], 1.0), (u[k], -1.0), (v[k], 1.0)], 0.0);
        }
        self.epigraph_norm(&ws, t, tau);
    }

    /// Distance from variables to a fixed point: `‖u − point‖τ ≤ t`.
    pub fn epigraph_distance_to_point(
        &mut self,
        u: &[VarHandle],
        point: &[f64],
        t: VarHandle,
        tau: NormTag,
    ) {
        assert_eq!(u.len(), point.len());
        let base = self.labels[t.0].clone();
        let ws = self.new_vars(&format!("{base}.diff"), u.len());
        for k in 0..u.len() {
            self.zero_row(&[(ws[k], 1.0), (u[k], -1.0)], -point[k]);
        }
        self.epigraph_norm(&ws, t, tau);
    }

    /// Membership `a ∈ region`: ball constraint via an epigraph with the
    /// radius pinned by an equality row, plus any extra SOC rows directly.
    pub fn region_membership(&mut self, a: &[VarHandle], region: &Region, tag: &str) {
        let t = self.new_var(format!("{tag}.memb_t"));
        self.fix_var(t, region.radius);
        self.epigraph_distance_to_point(a, &region.center.0, t, region.ball_norm);
        for soc in &region.extra_soc {
            let mut exprs: Vec<(Vec<(VarHandle, f64)>, f64)> = Vec::new();
            let radius_terms: Vec<(VarHandle, f64)> = soc
                .c
                .iter()
                .enumerate()
                .filter(|(_, ck)| **ck != 0.0)
                .map(|(k, ck)| (a[k], *ck))
                .collect();
            exprs.push((radius_terms, soc.f));
            for (row, tk) in soc.r.iter().zip(&soc.t) {
                let terms: Vec<(VarHandle, f64)> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, rv)| **rv != 0.0)
                    .map(|(k, rv)| (a[k], *rv))
                    .collect();
                exprs.push((terms, *tk));
            }
            self.soc_block(&exprs);
        }
    }

    /// Structural check: the cone list partitions the rows.
    pub fn check_structure(&self) -> Result<(), ConicError> {
        let cone_rows: usize = self.cones.iter().map(|c| c.dim).sum();
        if cone_rows != self.rows || self.b.len() != self.rows {
            return Err(ConicError::Structure(format!(
                "cone rows {cone_rows} vs rows {} vs b {}",
                self.rows,
                self.b.len()
            )));
        }
        for c in &self.cones {
            if c.kind == ConeKind::SecondOrder && c.dim < 2 {
                return Err(ConicError::Structure("SOC dim < 2".into()));
            }
        }
        if let Some(&ix) = self.integrality.iter().find(|&&ix| ix >= self.num_vars()) {
            return Err(ConicError::ForeignHandle(ix));
        }
        Ok(())
    }

    /// Plain-text dump of the IR, one directive per line. The same format is
    /// read back by [`ConicProblem::from_text`] and is the hand-off format
    /// for external solver engines.
    pub fn dump_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# conic problem dump v1");
        let _ = writeln!(out, "vars {}", self.num_vars());
        for (i, c) in self.objective.iter().enumerate() {
            if *c != 0.0 {
                let _ = writeln!(out, "obj {i} {c:.17e}");
            }
        }
        for &(r, c, v) in &self.triplets {
            let _ = writeln!(out, "row {r} {c} {v:.17e}");
        }
        for (r, v) in self.b.iter().enumerate() {
            if *v != 0.0 {
                let _ = writeln!(out, "b {r} {v:.17e}");
            }
        }
        for cone in &self.cones {
            let kind = match cone.kind {
                ConeKind::Zero => "zero",
                ConeKind::Nonnegative => "nonneg",
                ConeKind::SecondOrder => "soc",
            };
            let _ = writeln!(out, "cone {kind} {}", cone.dim);
        }
        for ix in &self.integrality {
            let _ = writeln!(out, "binary {ix}");
        }
        out
    }

    /// Parse a problem dump produced by [`ConicProblem::dump_text`].
    /// Variable labels are not round-tripped; they are regenerated as `u[i]`.
    pub fn from_text(text: &str) -> Result<Self, ConicError> {
        let mut p = ConicProblem::new();
        let mut nrows = 0usize;
        let mut pending_b: Vec<(usize, f64)> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace();
            let tag = it.next().unwrap();
            let mut next = |what: &str| -> Result<&str, ConicError> {
                it.next()
                    .ok_or_else(|| ConicError::Parse(format!("missing {what} in `{line}`")))
            };
            match tag {
                "vars" => {
                    let n: usize = next("count")?
                        .parse()
                        .map_err(|e| ConicError::Parse(format!("{e}")))?;
                    for i in 0..n {
                        p.new_var(format!("u[{i}]"));
                    }
                }
                "obj" => {
                    let i: usize = next("index")?.parse().map_err(|e| ConicError::Parse(format!("{e}")))?;
                    let v: f64 = next("value")?.parse().map_err(|e| ConicError::Parse(format!("{e}")))?;
                    p.objective[i] = v;
                }
                "row" => {
                    let r: usize = next("row")?.parse().map_err(|e| ConicError::Parse(format!("{e}")))?;
                    let c: usize = next("col")?.parse().map_err(|e| ConicError::Parse(format!("{e}")))?;
                    let v: f64 = next("value")?.parse().map_err(|e| ConicError::Parse(format!("{e}")))?;
                    p.triplets.push((r, c, v));
                    nrows = nrows.max(r + 1);
                }
                "b" => {
                    let r: usize = next("row")?.parse().map_err(|e| ConicError::Parse(format!("{e}")))?;
                    let v: f64 = next("value")?.parse().map_err(|e| ConicError::Parse(format!("{e}")))?;
                    pending_b.push((r, v));
                    nrows = nrows.max(r + 1);
                }
                "cone" => {
                    let kind = match next("kind")? {
                        "zero" => ConeKind::Zero,
                        "nonneg" => ConeKind::Nonnegative,
                        "soc" => ConeKind::SecondOrder,
                        other => return Err(ConicError::Parse(format!("unknown cone `{other}`"))),
                    };
                    let dim: usize = next("dim")?.parse().map_err(|e| ConicError::Parse(format!("{e}")))?;
                    p.cones.push(Cone { kind, dim });
                }
                "binary" => {
                    let i: usize = next("index")?.parse().map_err(|e| ConicError::Parse(format!("{e}")))?;
                    p.integrality.push(i);
                }
                other => return Err(ConicError::Parse(format!("unknown directive `{other}`"))),
            }
        }
        let cone_rows: usize = p.cones.iter().map(|c| c.dim).sum();
        nrows = nrows.max(cone_rows);
        p.rows = nrows;
        p.b = vec![0.0; nrows];
        for (r, v) in pending_b {
            p.b[r] = v;
        }
        p.check_structure()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bookkeeping_matches_cone_dims() {
        let mut p = ConicProblem::new();
        let z = p.new_vars("z", 2);
        let t = p.new_var("t");
        for tau in NormTag::ALL {
            p.epigraph_norm(&z, t, tau);
        }
        let u = p.new_vars("u", 2);
        p.epigraph_distance(&u, &z, t, NormTag::L3);
        p.check_structure().unwrap();
        let total: usize = p.cones().iter().map(|c| c.dim).sum();
        assert_eq!(total, p.num_rows());
    }

    #[test]
    fn binary_rows_edit_only_rhs() {
        let mut p = ConicProblem::new();
        let y = p.new_var("y");
        p.mark_binary(y);
        let trips_before = p.triplets().len();
        p.set_binary_bounds(y, 1.0, 1.0);
        assert_eq!(p.triplets().len(), trips_before);
        let rows = p.binary_rows()[&y.0];
        assert_eq!(p.rhs()[rows.upper], 1.0);
        assert_eq!(p.rhs()[rows.lower], -1.0);
        p.set_binary_bounds(y, 0.0, 1.0);
        assert_eq!(p.rhs()[rows.upper], 1.0);
        assert_eq!(p.rhs()[rows.lower], 0.0);
    }

    #[test]
    fn dump_round_trips() {
        let mut p = ConicProblem::new();
        let z = p.new_vars("z", 2);
        let t = p.new_var("t");
        p.add_objective(t, 1.0);
        p.epigraph_norm(&z, t, NormTag::L2);
        p.fix_var(z[0], 3.0);
        p.fix_var(z[1], 4.0);
        let y = p.new_var("y");
        p.mark_binary(y);

        let text = p.dump_text();
        let q = ConicProblem::from_text(&text).unwrap();
        assert_eq!(q.num_vars(), p.num_vars());
        assert_eq!(q.num_rows(), p.num_rows());
        assert_eq!(q.rhs(), p.rhs());
        assert_eq!(q.cones(), p.cones());
        assert_eq!(q.integrality(), p.integrality());
        assert_eq!(q.objective(), p.objective());
        assert_eq!(q.triplets(), p.triplets());
    }
}
