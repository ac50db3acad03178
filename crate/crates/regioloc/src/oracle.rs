//! Independent brute-force references used by the test suite.
//!
//! These are deliberately simple and slow: a coarse-grid-plus-refinement
//! search for the single-facility problem, exhaustive enumeration of the
//! assignment/collocation binaries for tiny instances, and rejection-sampled
//! normalization bounds. They live in the shipping library so reference
//! values are reproducible, but they are not performance-tuned and guard
//! against over-sized inputs.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::conic::{ConicProblem, VarHandle};
use crate::geometry::{eval_norm, overlap_candidates, NormTag, Point, Region};
use crate::model::{Instance, ModelKind};
use crate::par::maybe_par_map;
use crate::prefs::{
    self, normalize, Halfspace, NormalizedPreference, PrefError, PreferenceSpec, ProductionSpec,
};
use crate::rng::Rng;
use crate::socp::{BuiltinSolver, ContinuousSolver, SolveError, SolveStatus, SolverConfig};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large for the enumeration oracle (n ≤ {max_n}, p ≤ {max_p})")]
    SizeGuard { max_n: usize, max_p: usize },
    #[error("oracle expects {0}")]
    Precondition(&'static str),
    #[error(transparent)]
    Pref(#[from] PrefError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("oracle subproblem failed to converge ({0:?})")]
    Unconverged(SolveStatus),
}

/// Grid search parameters: bounding box (defaults to the regions' box),
/// per-axis resolution, and the number of zoom-refinement rounds.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub bbox: Option<(Vec<f64>, Vec<f64>)>,
    pub resolution: usize,
    pub refine_rounds: usize,
    pub parallel: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            bbox: None,
            resolution: 64,
            refine_rounds: 3,
            parallel: true,
        }
    }
}

/// Distance from `x` to the closest point of the region under the region's
/// transport norm: 0 inside; otherwise exact for Euclidean balls with
/// Euclidean transport, and a boundary scan with golden-section refinement
/// for every other norm pair.
pub fn entry_distance(region: &Region, x: &[f64]) -> f64 {
    let inside = {
        let diff: Vec<f64> = x.iter().zip(&region.center.0).map(|(a, b)| a - b).collect();
        eval_norm(&diff, region.ball_norm) <= region.radius
            && region
                .extra_soc
                .iter()
                .all(|soc| soc.holds(x, 0.0))
    };
    if inside {
        return 0.0;
    }
    if region.ball_norm == NormTag::L2
        && region.transport_norm == NormTag::L2
        && region.extra_soc.is_empty()
    {
        let diff: Vec<f64> = x.iter().zip(&region.center.0).map(|(a, b)| a - b).collect();
        return (eval_norm(&diff, NormTag::L2) - region.radius).max(0.0);
    }
    // Planar boundary scan; the nearest point of a convex set to an outside
    // point lies on its boundary.
    let dist_at = |theta: f64| -> f64 {
        let dir = [theta.cos(), theta.sin()];
        let scale = region.radius / eval_norm(&dir, region.ball_norm);
        let b = [
            region.center.0[0] + scale * dir[0],
            region.center.0[1] + scale * dir[1],
        ];
        let diff = [x[0] - b[0], x[1] - b[1]];
        eval_norm(&diff, region.transport_norm)
    };
    let n = 128;
    let step = std::f64::consts::TAU / n as f64;
    let mut best_theta = 0.0;
    let mut best = f64::INFINITY;
    for k in 0..n {
        let theta = k as f64 * step;
        let v = dist_at(theta);
        if v < best {
            best = v;
            best_theta = theta;
        }
    }
    let inv_phi = 0.618_033_988_749_894_9_f64;
    let mut lo = best_theta - step;
    let mut hi = best_theta + step;
    let mut t1 = hi - inv_phi * (hi - lo);
    let mut t2 = lo + inv_phi * (hi - lo);
    let mut f1 = dist_at(t1);
    let mut f2 = dist_at(t2);
    for _ in 0..60 {
        if f1 <= f2 {
            hi = t2;
            t2 = t1;
            f2 = f1;
            t1 = hi - inv_phi * (hi - lo);
            f1 = dist_at(t1);
        } else {
            lo = t1;
            t1 = t2;
            f1 = f2;
            t2 = lo + inv_phi * (hi - lo);
            f2 = dist_at(t2);
        }
    }
    best.min(f1).min(f2)
}

/// Single-facility objective at `x`: `Σ ω_i · entry_distance(S_i, x)`.
pub fn weber_objective(instance: &Instance, x: &[f64]) -> f64 {
    instance
        .regions
        .iter()
        .map(|r| r.weight * entry_distance(r, x))
        .sum()
}

/// Coarse grid plus iterative zoom refinement for the single-facility,
/// zero-threshold problem. Returns the best point and objective.
pub fn grid_weber(instance: &Instance, spec: &GridSpec) -> Result<(Point, f64), OracleError> {
    if instance.p != 1 {
        return Err(OracleError::Precondition("a single facility"));
    }
    if instance.threshold != 0.0 {
        return Err(OracleError::Precondition("a zero preference threshold"));
    }
    if instance.dimension != 2 {
        return Err(OracleError::Precondition("planar instances"));
    }
    let (mut lo, mut hi) = spec.bbox.clone().unwrap_or_else(|| {
        let mut lo = vec![f64::INFINITY; 2];
        let mut hi = vec![f64::NEG_INFINITY; 2];
        for r in &instance.regions {
            let (rl, rh) = r.enclosing_box();
            for k in 0..2 {
                lo[k] = lo[k].min(rl[k]);
                hi[k] = hi[k].max(rh[k]);
            }
        }
        (lo, hi)
    });
    let res = spec.resolution.max(2);
    let mut best = (Point(vec![0.0, 0.0]), f64::INFINITY);
    for _ in 0..=spec.refine_rounds {
        let step = [
            (hi[0] - lo[0]) / (res - 1) as f64,
            (hi[1] - lo[1]) / (res - 1) as f64,
        ];
        let rows = crate::par::maybe_par_map_range(res, spec.parallel, |iy| {
            let y = lo[1] + iy as f64 * step[1];
            let mut row_best = (0usize, f64::INFINITY);
            for ix in 0..res {
                let x = [lo[0] + ix as f64 * step[0], y];
                let f = weber_objective(instance, &x);
                if f < row_best.1 {
                    row_best = (ix, f);
                }
            }
            row_best
        });
        let (best_iy, &(best_ix, best_f)) = rows
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
            .unwrap();
        let bx = lo[0] + best_ix as f64 * step[0];
        let by = lo[1] + best_iy as f64 * step[1];
        if best_f < best.1 {
            best = (Point(vec![bx, by]), best_f);
        }
        // Zoom onto the winning cell.
        let half = [2.0 * step[0], 2.0 * step[1]];
        lo = vec![bx - half[0], by - half[1]];
        hi = vec![bx + half[0], by + half[1]];
    }
    Ok(best)
}

/// Weiszfeld iteration for the weighted point Weber problem; used as a
/// cross-check for the grid search.
pub fn weiszfeld(points: &[Point], weights: &[f64], iters: usize) -> (Point, f64) {
    let d = points[0].dim();
    let mut x = vec![0.0; d];
    for p in points {
        for k in 0..d {
            x[k] += p.0[k] / points.len() as f64;
        }
    }
    for _ in 0..iters {
        let mut num = vec![0.0; d];
        let mut den = 0.0;
        for (p, w) in points.iter().zip(weights) {
            let dist = p
                .0
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
                .max(1e-12);
            for k in 0..d {
                num[k] += w * p.0[k] / dist;
            }
            den += w / dist;
        }
        for k in 0..d {
            x[k] = num[k] / den;
        }
    }
    let obj = points
        .iter()
        .zip(weights)
        .map(|(p, w)| {
            w * p
                .0
                .iter()
                .zip(&x)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    (Point(x), obj)
}

/// Sampling bounds on a preference over a region: min/max over uniform
/// rejection samples. Brackets the exact normalization from the inside.
pub fn sample_normalize(
    pref: &PreferenceSpec,
    region: &Region,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64), OracleError> {
    let mut rng = Rng::new(seed);
    let (lo, hi) = region.enclosing_box();
    let mut lb = f64::INFINITY;
    let mut ub = f64::NEG_INFINITY;
    let mut accepted = 0usize;
    while accepted < samples {
        let cand = Point(
            lo.iter()
                .zip(&hi)
                .map(|(l, h)| rng.uniform_in(*l, *h))
                .collect(),
        );
        if !region.contains(&cand, 0.0).unwrap_or(false) {
            continue;
        }
        accepted += 1;
        let v = prefs::evaluate(pref, &cand)?;
        lb = lb.min(v);
        ub = ub.max(v);
    }
    Ok((lb, ub))
}

/// One convex piece of a region's threshold-restricted set.
#[derive(Debug, Clone)]
enum Piece {
    /// No threshold constraint at all.
    Free,
    /// Linear threshold halfspace `γᵀa ≥ raw − γ₀`, as a `≤` row.
    ConvexRows(Vec<Halfspace>),
    /// Distance-preference budget `Σ λ_k ‖B_k − a‖ ≤ −raw`.
    DistanceBudget,
    /// A production cell combination (halfspace rows).
    CellRows(Vec<Halfspace>),
    /// Entry point pinned to a single point (degenerate piece).
    FixedPoint(Point),
}

/// All halfspace boundaries pass through the region center (the generator's
/// angular-sector layout). In that case every lower-dimensional cell
/// combination degenerates to the center point, which lies in the closure
/// of every full-dimensional combination.
fn is_sector_like(p: &ProductionSpec, center: &[f64]) -> bool {
    p.factors.iter().all(|sub| {
        sub.cells.iter().all(|cell| {
            cell.halfspaces.iter().all(|h| {
                let v: f64 = h.normal.iter().zip(center).map(|(n, c)| n * c).sum();
                (v - h.offset).abs() <= 1e-9
            })
        })
    })
}

/// Enumerable piece list for one region under its threshold.
fn pieces_for_region(
    region: &Region,
    np: &NormalizedPreference,
    threshold: f64,
) -> Result<Vec<Piece>, OracleError> {
    if threshold <= 0.0 {
        return Ok(vec![Piece::Free]);
    }
    let raw = np.raw_threshold(threshold);
    match &np.spec {
        PreferenceSpec::Linear { gamma, gamma0 } => Ok(vec![Piece::ConvexRows(vec![Halfspace {
            normal: gamma.iter().map(|g| -g).collect(),
            offset: -(raw - gamma0),
        }])]),
        PreferenceSpec::Distance { .. } => Ok(vec![Piece::DistanceBudget]),
        PreferenceSpec::Production(p) => {
            let admissible: Vec<_> = np
                .combos
                .iter()
                .filter(|c| c.nonempty() && c.value >= raw - 1e-12 * (1.0 + raw.abs()))
                .collect();
            if admissible.is_empty() {
                return Err(OracleError::Pref(PrefError::NoAdmissibleCells {
                    raw,
                    lb: np.lb,
                    ub: np.ub,
                }));
            }
            let rows_of = |cells: &[usize]| -> Vec<Halfspace> {
                cells
                    .iter()
                    .enumerate()
                    .flat_map(|(f, &l)| p.factors[f].cells[l].halfspaces.iter().cloned())
                    .collect()
            };
            if is_sector_like(p, &region.center.0) {
                let full: Vec<Piece> = admissible
                    .iter()
                    .filter(|c| c.full_dim())
                    .map(|c| Piece::CellRows(rows_of(&c.cells)))
                    .collect();
                if full.is_empty() {
                    // Only the common apex is admissible.
                    Ok(vec![Piece::FixedPoint(region.center.clone())])
                } else {
                    Ok(full)
                }
            } else {
                Ok(admissible
                    .iter()
                    .map(|c| Piece::CellRows(rows_of(&c.cells)))
                    .collect())
            }
        }
    }
}

/// Emit membership, threshold, and piece rows for one region's entry point.
fn emit_region_constraints(
    problem: &mut ConicProblem,
    a: &[VarHandle],
    region: &Region,
    np: &NormalizedPreference,
    threshold: f64,
    piece: &Piece,
    tag: &str,
) {
    problem.region_membership(a, region, tag);
    match piece {
        Piece::Free => {}
        Piece::ConvexRows(rows) | Piece::CellRows(rows) => {
            for h in rows {
                let terms: Vec<(VarHandle, f64)> = h
                    .normal
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| (a[k], *v))
                    .collect();
                problem.leq_row(&terms, h.offset);
            }
        }
        Piece::DistanceBudget => {
            let raw = np.raw_threshold(threshold);
            let PreferenceSpec::Distance {
                points,
                lambdas,
                norm,
            } = &np.spec
            else {
                unreachable!("distance budget piece on non-distance preference")
            };
            let mut sum = Vec::with_capacity(points.len());
            for (k, (b, l)) in points.iter().zip(lambdas).enumerate() {
                let t = problem.new_var(format!("{tag}.bt[{k}]"));
                problem.epigraph_distance_to_point(a, &b.0, t, *norm);
                sum.push((t, *l));
            }
            problem.leq_row(&sum, -raw);
        }
        Piece::FixedPoint(pt) => {
            for (k, &h) in a.iter().enumerate() {
                problem.fix_var(h, pt.0[k]);
            }
        }
    }
}

/// Mixed-radix iteration over per-region piece choices.
fn for_each_choice(sizes: &[usize], mut f: impl FnMut(&[usize])) {
    let mut idx = vec![0usize; sizes.len()];
    loop {
        f(&idx);
        let mut done = true;
        for k in (0..sizes.len()).rev() {
            idx[k] += 1;
            if idx[k] < sizes[k] {
                done = false;
                break;
            }
            idx[k] = 0;
        }
        if done {
            break;
        }
    }
}

/// Restricted-growth enumeration of assignments of `n` regions to at most
/// `p` interchangeable facilities (region 0 pinned to facility 0).
fn assignments(n: usize, p: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; n];
    fn rec(i: usize, used: usize, p: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        let top = (used + 1).min(p);
        for j in 0..top {
            cur[i] = j;
            rec(i + 1, used.max(j + 1), p, cur, out);
        }
    }
    rec(1, 1, p, &mut cur, &mut out);
    out
}

const MAX_N: usize = 6;
const MAX_P: usize = 3;

/// Exhaustive-enumeration reference optimum.
///
/// Enumerates assignment patterns (symmetry-reduced), collocation patterns
/// over the overlap candidates for the collocation model, and the convex
/// pieces of every production-preference region, solving one continuous
/// conic subproblem per combination.
pub fn enumerate_assignments(
    instance: &Instance,
    kind: ModelKind,
    weighted_collocation: bool,
) -> Result<f64, OracleError> {
    let n = instance.n();
    let p = instance.p;
    if n > MAX_N || p > MAX_P {
        return Err(OracleError::SizeGuard {
            max_n: MAX_N,
            max_p: MAX_P,
        });
    }
    let solver = BuiltinSolver::new();
    let config = SolverConfig::default();
    let norm_prefs: Vec<NormalizedPreference> = instance
        .regions
        .iter()
        .zip(&instance.prefs)
        .map(|(r, s)| normalize(s, r, &solver, &config))
        .collect::<Result<_, _>>()?;
    let pieces: Vec<Vec<Piece>> = instance
        .regions
        .iter()
        .zip(&norm_prefs)
        .map(|(r, np)| pieces_for_region(r, np, instance.threshold))
        .collect::<Result<_, _>>()?;

    match kind {
        ModelKind::Assignment => enumerate_by_assignment(instance, &norm_prefs, &pieces, true),
        ModelKind::Collocation => {
            enumerate_collocation(instance, &norm_prefs, &pieces, weighted_collocation)
        }
    }
}

/// Cost of serving one facility group: min over the members' piece choices
/// of the weighted single-facility subproblem.
fn group_cost(
    instance: &Instance,
    norm_prefs: &[NormalizedPreference],
    pieces: &[Vec<Piece>],
    group: &[usize],
    weighted: bool,
) -> Result<f64, OracleError> {
    let solver = BuiltinSolver::new();
    let config = SolverConfig::default();
    let sizes: Vec<usize> = group.iter().map(|&i| pieces[i].len()).collect();
    let mut best = f64::INFINITY;
    let mut failure: Option<OracleError> = None;
    for_each_choice(&sizes, |choice| {
        if failure.is_some() {
            return;
        }
        let mut prob = ConicProblem::new();
        let x = prob.new_vars("x", instance.dimension);
        for (slot, &i) in group.iter().enumerate() {
            let a = prob.new_vars(&format!("a[{i}]"), instance.dimension);
            emit_region_constraints(
                &mut prob,
                &a,
                &instance.regions[i],
                &norm_prefs[i],
                instance.threshold,
                &pieces[i][choice[slot]],
                &format!("r[{i}]"),
            );
            let t = prob.new_var(format!("t[{i}]"));
            let w = if weighted {
                instance.regions[i].weight
            } else {
                1.0
            };
            prob.add_objective(t, w);
            prob.epigraph_distance(&a, &x, t, instance.regions[i].transport_norm);
        }
        match solver.solve(&prob, &config) {
            Ok(sol) if sol.status == SolveStatus::Optimal => {
                best = best.min(sol.objective);
            }
            Ok(sol) if sol.status == SolveStatus::Infeasible => {}
            Ok(sol) => failure = Some(OracleError::Unconverged(sol.status)),
            Err(e) => failure = Some(OracleError::Solve(e)),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(best)
}

fn enumerate_collocation(
    instance: &Instance,
    norm_prefs: &[NormalizedPreference],
    pieces: &[Vec<Piece>],
    weighted: bool,
) -> Result<f64, OracleError> {
    let n = instance.n();
    let p = instance.p;
    let candidates = overlap_candidates(&instance.regions);
    if candidates.len() > 12 {
        return Err(OracleError::SizeGuard {
            max_n: MAX_N,
            max_p: MAX_P,
        });
    }
    let solver = BuiltinSolver::new();
    let config = SolverConfig::default();

    // The all-zero pattern is the plain assignment problem (at the
    // collocation objective weights); it separates by facility and reuses
    // the subset-memoized path. Joint enumeration handles the rest.
    let base = enumerate_by_assignment(instance, norm_prefs, pieces, weighted)?;

    let patterns: Vec<u32> = (1..(1u32 << candidates.len())).collect();
    let results = maybe_par_map(&patterns, true, |&zmask| -> Result<f64, OracleError> {
        // Union-find components of the z = 1 pairs; the non-suppressed
        // member of each region pays its own distance.
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            if parent[i] != i {
                let r = find(parent, parent[i]);
                parent[i] = r;
            }
            parent[i]
        }
        let mut suppressed = vec![false; n];
        for (k, &(i, j)) in candidates.iter().enumerate() {
            if zmask >> k & 1 == 1 {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
                suppressed[i] = true; // i > j by construction
            }
        }
        let comp_of: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
        let payers: Vec<usize> = (0..n).filter(|&i| !suppressed[i]).collect();

        // Piece choice per region, assignment per payer.
        let sizes: Vec<usize> = (0..n).map(|i| pieces[i].len()).collect();
        let payer_assignments = assignments(payers.len().max(1), p.min(payers.len().max(1)));
        let mut best = f64::INFINITY;
        let mut failure: Option<OracleError> = None;
        for_each_choice(&sizes, |choice| {
            if failure.is_some() {
                return;
            }
            for assign in &payer_assignments {
                let mut prob = ConicProblem::new();
                let xs: Vec<Vec<VarHandle>> = (0..p)
                    .map(|j| prob.new_vars(&format!("x[{j}]"), instance.dimension))
                    .collect();
                // One entry-point vector per component.
                let mut comp_vars: BTreeMap<usize, Vec<VarHandle>> = BTreeMap::new();
                for i in 0..n {
                    let c = comp_of[i];
                    if !comp_vars.contains_key(&c) {
                        let v = prob.new_vars(&format!("a[{c}]"), instance.dimension);
                        comp_vars.insert(c, v);
                    }
                    let a = comp_vars[&c].clone();
                    emit_region_constraints(
                        &mut prob,
                        &a,
                        &instance.regions[i],
                        &norm_prefs[i],
                        instance.threshold,
                        &pieces[i][choice[i]],
                        &format!("r[{i}]"),
                    );
                }
                for (slot, &i) in payers.iter().enumerate() {
                    let a = comp_vars[&comp_of[i]].clone();
                    let t = prob.new_var(format!("t[{i}]"));
                    let w = if weighted {
                        instance.regions[i].weight
                    } else {
                        1.0
                    };
                    prob.add_objective(t, w);
                    prob.epigraph_distance(
                        &a,
                        &xs[assign[slot]],
                        t,
                        instance.regions[i].transport_norm,
                    );
                }
                match solver.solve(&prob, &config) {
                    Ok(sol) if sol.status == SolveStatus::Optimal => {
                        best = best.min(sol.objective);
                    }
                    Ok(sol) if sol.status == SolveStatus::Infeasible => {}
                    Ok(sol) => failure = Some(OracleError::Unconverged(sol.status)),
                    Err(e) => failure = Some(OracleError::Solve(e)),
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(best)
    });
    let mut best = base;
    for r in results {
        best = best.min(r?);
    }
    Ok(best)
}

/// Assignment enumeration with no collocation: separates by facility and
/// memoizes the cost of every facility group.
fn enumerate_by_assignment(
    instance: &Instance,
    norm_prefs: &[NormalizedPreference],
    pieces: &[Vec<Piece>],
    weighted: bool,
) -> Result<f64, OracleError> {
    let n = instance.n();
    let p = instance.p;
    let subsets: Vec<Vec<usize>> = (1u32..(1 << n))
        .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
        .collect();
    let costs = maybe_par_map(&subsets, true, |group| {
        group_cost(instance, norm_prefs, pieces, group, weighted)
    });
    let mut cost_of: BTreeMap<u32, f64> = BTreeMap::new();
    for (subset, cost) in subsets.iter().zip(costs) {
        let mask = subset.iter().fold(0u32, |m, &i| m | 1 << i);
        cost_of.insert(mask, cost?);
    }
    let mut best = f64::INFINITY;
    for assign in assignments(n, p) {
        let mut masks = vec![0u32; p];
        for (i, &j) in assign.iter().enumerate() {
            masks[j] |= 1 << i;
        }
        let total: f64 = masks
            .iter()
            .filter(|&&m| m != 0)
            .map(|m| cost_of[m])
            .sum();
        best = best.min(total);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, GenConfig, PrefFamily, Scenario};

    fn ball(cx: f64, cy: f64, r: f64, w: f64) -> Region {
        let mut region = Region::ball(Point(vec![cx, cy]), r, NormTag::L2, w);
        region.weight = w;
        region
    }

    fn instance(regions: Vec<Region>, p: usize) -> Instance {
        let prefs = regions
            .iter()
            .map(|_| PreferenceSpec::Linear {
                gamma: vec![1.0, 0.0],
                gamma0: 0.0,
            })
            .collect();
        Instance {
            regions,
            prefs,
            p,
            threshold: 0.0,
            collocation: false,
            dimension: 2,
            scenario: "l2".into(),
            pref_family: "L".into(),
            seed: 0,
        }
    }

    #[test]
    fn single_region_optimum_is_zero() {
        let inst = instance(vec![ball(2.0, -1.0, 0.3, 0.7)], 1);
        let (_, obj) = grid_weber(&inst, &GridSpec::default()).unwrap();
        assert!(obj.abs() < 1e-9);
    }

    #[test]
    fn equilateral_triangle_with_radii_value() {
        let h = 3.0_f64.sqrt() / 2.0;
        let inst = instance(
            vec![
                ball(0.0, 0.0, 0.1, 1.0),
                ball(1.0, 0.0, 0.1, 1.0),
                ball(0.5, h, 0.1, 1.0),
            ],
            1,
        );
        let (_, obj) = grid_weber(&inst, &GridSpec::default()).unwrap();
        let expected = 3.0_f64.sqrt() - 0.3;
        assert!(
            (obj - expected).abs() < 1e-4 * (1.0 + expected),
            "{obj} vs {expected}"
        );
        // Cross-check against Weiszfeld on the centers with radii netted out.
        let (_, w_obj) = weiszfeld(
            &[
                Point(vec![0.0, 0.0]),
                Point(vec![1.0, 0.0]),
                Point(vec![0.5, h]),
            ],
            &[1.0, 1.0, 1.0],
            2000,
        );
        assert!((obj - (w_obj - 0.3)).abs() < 1e-4);
    }

    #[test]
    fn two_point_regions_give_median_distance() {
        let inst = instance(
            vec![ball(0.0, 0.0, 1e-9, 1.0), ball(2.0, 0.0, 1e-9, 1.0)],
            1,
        );
        let (_, obj) = grid_weber(&inst, &GridSpec::default()).unwrap();
        assert!((obj - 2.0).abs() < 1e-4, "{obj}");
    }

    #[test]
    fn enumerate_two_regions_two_facilities() {
        let inst = instance(vec![ball(0.0, 0.0, 0.2, 1.0), ball(5.0, 0.0, 0.2, 1.0)], 2);
        let obj = enumerate_assignments(&inst, ModelKind::Assignment, false).unwrap();
        assert!(obj.abs() < 1e-6, "{obj}");
    }

    #[test]
    fn enumerate_agrees_with_grid_weber() {
        let cfg = GenConfig {
            seed: 17,
            ..GenConfig::new(3, 1, Scenario::L2, PrefFamily::L)
        };
        let inst = generate(&cfg);
        let obj = enumerate_assignments(&inst, ModelKind::Assignment, false).unwrap();
        let (_, grid) = grid_weber(&inst, &GridSpec::default()).unwrap();
        let rel = (obj - grid).abs() / grid.max(1e-9);
        assert!(rel < 1e-3, "enum {obj} vs grid {grid}");
    }

    #[test]
    fn collocation_never_worse_unweighted() {
        // Two overlapping regions far from a cluster of two more: the
        // facility settles near the cluster and without collocation both
        // overlapping regions pay the long haul.
        let regions = vec![
            ball(0.0, 0.0, 1.0, 1.0),
            ball(1.0, 0.0, 1.0, 1.0),
            ball(10.0, 3.0, 0.1, 1.0),
            ball(10.0, -3.0, 0.1, 1.0),
        ];
        let inst = instance(regions, 1);
        let plain = enumerate_assignments(&inst, ModelKind::Assignment, false).unwrap();
        let wcoll = enumerate_assignments(&inst, ModelKind::Collocation, false).unwrap();
        assert!(wcoll <= plain + 1e-6, "collocation must dominate");
        assert!(
            wcoll < plain - 1.0,
            "expected a strict saving: {wcoll} vs {plain}"
        );
    }

    #[test]
    fn sampled_bounds_bracket_exact_ones() {
        let region = ball(0.0, 0.0, 1.0, 1.0);
        let spec = PreferenceSpec::Linear {
            gamma: vec![1.0, 0.0],
            gamma0: 0.0,
        };
        let (lb, ub) = sample_normalize(&spec, &region, 100_000, 7).unwrap();
        assert!(lb >= -1.0 && lb < -0.99, "lb {lb}");
        assert!(ub <= 1.0 && ub > 0.99, "ub {ub}");
    }

    #[test]
    fn size_guard_enforced() {
        let regions = (0..7).map(|i| ball(i as f64, 0.0, 0.1, 1.0)).collect();
        let inst = instance(regions, 2);
        assert!(matches!(
            enumerate_assignments(&inst, ModelKind::Assignment, false),
            Err(OracleError::SizeGuard { .. })
        ));
    }
}
