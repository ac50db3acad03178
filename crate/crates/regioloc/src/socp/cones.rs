//! Euclidean projections onto the supported cones and their duals.

use crate::conic::{Cone, ConeKind};

/// Project a segment onto the cone, in place.
///
/// * Zero cone: the origin.
/// * Nonnegative cone: componentwise `max(·, 0)`.
/// * Second-order cone `(t, x)`: the segment itself when `‖x‖₂ ≤ t`, the
///   origin when `‖x‖₂ ≤ −t`, else `((‖x‖₂+t)/2)·(1, x/‖x‖₂)`.
pub fn project_cone(seg: &mut [f64], cone: Cone) {
    debug_assert_eq!(seg.len(), cone.dim);
    match cone.kind {
        ConeKind::Zero => seg.fill(0.0),
        ConeKind::Nonnegative => {
            for v in seg.iter_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        ConeKind::SecondOrder => {
            let (t, x) = seg.split_first_mut().expect("SOC dim >= 2");
            let norm_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm_x <= *t {
                // interior or boundary: unchanged
            } else if norm_x <= -*t {
                *t = 0.0;
                x.fill(0.0);
            } else {
                let alpha = 0.5 * (norm_x + *t);
                let scale = alpha / norm_x;
                for v in x.iter_mut() {
                    *v *= scale;
                }
                *t = alpha;
            }
        }
    }
}

/// Project a segment onto the dual cone, in place. The zero cone's dual is
/// the whole space; nonnegative and second-order cones are self-dual.
pub fn project_dual_cone(seg: &mut [f64], cone: Cone) {
    match cone.kind {
        ConeKind::Zero => {}
        _ => project_cone(seg, cone),
    }
}

/// Apply `project_cone` blockwise over a full slack vector.
pub fn project_all(s: &mut [f64], cones: &[Cone]) {
    let mut offset = 0;
    for &c in cones {
        project_cone(&mut s[offset..offset + c.dim], c);
        offset += c.dim;
    }
    debug_assert_eq!(offset, s.len());
}

/// Apply `project_dual_cone` blockwise.
pub fn project_all_dual(y: &mut [f64], cones: &[Cone]) {
    let mut offset = 0;
    for &c in cones {
        project_dual_cone(&mut y[offset..offset + c.dim], c);
        offset += c.dim;
    }
}

/// Euclidean distance from `v` to the cone product.
pub fn dist_to_cone(v: &[f64], cones: &[Cone]) -> f64 {
    let mut proj = v.to_vec();
    project_all(&mut proj, cones);
    proj.iter()
        .zip(v)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}
