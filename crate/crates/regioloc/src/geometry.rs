//! Norm evaluation, demand regions, containment tests, and the big-M
//! constants used by the model builders.
//!
//! Regions are weighted `ℓτ`-norm balls, optionally intersected with generic
//! second-order-cone constraints `‖R z + T‖₂ ≤ cᵀz + f`. All big-M bounds
//! lean on `‖v‖τ ≤ ‖v‖₁` for `τ ≥ 1` and on the fact that an `ℓτ` ball of
//! radius `r` in dimension `d` fits inside the `ℓ1` ball of radius `d·r`
//! (and inside the `ℓ∞` box of radius `r`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("at least one region is required")]
    EmptyInput,
}

/// A point in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// The supported `ℓτ` norms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormTag {
    L1,
    L2,
    L3,
    L4,
    LInf,
}

impl NormTag {
    pub const ALL: [NormTag; 5] = [
        NormTag::L1,
        NormTag::L2,
        NormTag::L3,
        NormTag::L4,
        NormTag::LInf,
    ];

    /// Numeric τ; `f64::INFINITY` for the max norm.
    pub fn tau(self) -> f64 {
        match self {
            NormTag::L1 => 1.0,
            NormTag::L2 => 2.0,
            NormTag::L3 => 3.0,
            NormTag::L4 => 4.0,
            NormTag::LInf => f64::INFINITY,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            NormTag::L1 => "l1",
            NormTag::L2 => "l2",
            NormTag::L3 => "l3",
            NormTag::L4 => "l4",
            NormTag::LInf => "linf",
        }
    }
}

/// `‖z‖τ` per the standard definition; the max of absolute coordinates for
/// `τ = ∞`.
pub fn eval_norm(z: &[f64], tau: NormTag) -> f64 {
    match tau {
        NormTag::L1 => z.iter().map(|v| v.abs()).sum(),
        NormTag::L2 => z.iter().map(|v| v * v).sum::<f64>().sqrt(),
        NormTag::L3 => z.iter().map(|v| v.abs().powi(3)).sum::<f64>().cbrt(),
        NormTag::L4 => z.iter().map(|v| v.abs().powi(4)).sum::<f64>().powf(0.25),
        NormTag::LInf => z.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
    }
}

/// A generic SOC constraint `‖R z + T‖₂ ≤ cᵀz + f`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SocConstraint {
    pub r: Vec<Vec<f64>>,
    pub t: Vec<f64>,
    pub c: Vec<f64>,
    pub f: f64,
}

impl SocConstraint {
    pub fn holds(&self, z: &[f64], tol: f64) -> bool {
        let lhs: f64 = self
            .r
            .iter()
            .zip(&self.t)
            .map(|(row, tk)| {
                let v: f64 = row.iter().zip(z).map(|(rij, zj)| rij * zj).sum::<f64>() + tk;
                v * v
            })
            .sum::<f64>()
            .sqrt();
        let rhs: f64 = self.c.iter().zip(z).map(|(ci, zi)| ci * zi).sum::<f64>() + self.f;
        lhs <= rhs + tol
    }
}

/// A weighted `ℓτ`-ball demand region, optionally cut by extra SOC rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Region {
    pub center: Point,
    pub radius: f64,
    pub ball_norm: NormTag,
    pub transport_norm: NormTag,
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_soc: Vec<SocConstraint>,
}

impl Region {
    pub fn ball(center: Point, radius: f64, norm: NormTag, weight: f64) -> Self {
        Region {
            center,
            radius,
            ball_norm: norm,
            transport_norm: norm,
            weight,
            extra_soc: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Membership within `tol`: the ball constraint and every extra SOC row.
    pub fn contains(&self, x: &Point, tol: f64) -> Result<bool, GeometryError> {
        if x.dim() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        let diff: Vec<f64> = x.0.iter().zip(&self.center.0).map(|(a, b)| a - b).collect();
        if eval_norm(&diff, self.ball_norm) > self.radius + tol {
            return Ok(false);
        }
        Ok(self.extra_soc.iter().all(|soc| soc.holds(&x.0, tol)))
    }

    /// Axis-aligned box that encloses the ball: `ℓτ` balls of radius `r` fit
    /// in the `ℓ∞` box of the same radius.
    pub fn enclosing_box(&self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.center.0.iter().map(|c| c - self.radius).collect();
        let hi = self.center.0.iter().map(|c| c + self.radius).collect();
        (lo, hi)
    }
}

/// Per-region constants `Δ¹` strictly exceeding the transport distance
/// between any point of the region and any point of any other region:
/// `Δ¹_i = max_{i'} (‖c_i − c_{i'}‖₁ + d·(r_i + r_{i'})) + 1`.
pub fn big_m_transport(regions: &[Region]) -> Result<Vec<f64>, GeometryError> {
    if regions.is_empty() {
        return Err(GeometryError::EmptyInput);
    }
    let d = regions[0].dim() as f64;
    Ok(regions
        .iter()
        .map(|ri| {
            let worst = regions
                .iter()
                .map(|rj| {
                    let center_l1: f64 = ri
                        .center
                        .0
                        .iter()
                        .zip(&rj.center.0)
                        .map(|(a, b)| (a - b).abs())
                        .sum();
                    center_l1 + d * (ri.radius + rj.radius)
                })
                .fold(0.0_f64, f64::max);
            worst + 1.0
        })
        .collect())
}

/// Upper bound `Δ²` on the `ℓ1` distance between points of two regions:
/// `‖c_i − c_j‖₁ + d·(r_i + r_j)`. Valid for the preference-restricted
/// regions as well since they are subsets of the balls.
pub fn big_m_l1(a: &Region, b: &Region) -> f64 {
    let d = a.dim() as f64;
    let center_l1: f64 = a
        .center
        .0
        .iter()
        .zip(&b.center.0)
        .map(|(x, y)| (x - y).abs())
        .sum();
    center_l1 + d * (a.radius + b.radius)
}

/// Pairs `(i, i')` with `i' < i` whose preference-restricted regions can
/// intersect. Sound over-approximation by the enclosing-box test: if the
/// `ℓ∞` boxes are disjoint the regions are disjoint; spurious pairs only add
/// redundant collocation variables.
pub fn overlap_candidates(regions: &[Region]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 1..regions.len() {
        for j in 0..i {
            let sep = regions[i]
                .center
                .0
                .iter()
                .zip(&regions[j].center.0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            if sep <= regions[i].radius + regions[j].radius {
                pairs.push((i, j));
            }
        }
    }
    pairs
}
