//! The five preference families: evaluation, normalization to `[0, 1]`,
//! raw-threshold conversion, and emission of threshold constraints into the
//! conic IR.
//!
//! Families:
//! * linear: `Φ(x) = γᵀx + γ₀`
//! * distance: `Φ(x) = −Σ λ_k ‖B_k − x‖` (closeness to reference points)
//! * production: `Φ(x) = f(g₁(x), …, g_m(x))` with piecewise-constant factor
//!   layers `g_j` over halfspace cells and `f` either Cobb-Douglas,
//!   constant-elasticity-of-substitution, or Leontief.
//!
//! Thresholds are always applied to the rescaled preference
//! `Φ̃ = (Φ − LB)/(UB − LB)`, so a threshold of 0 is vacuous and 1 demands
//! the regional optimum. For production preferences the factor layers are
//! piecewise constant, so the preference is constant on every combination of
//! cells; thresholds are enforced exactly through one-hot cell selectors and
//! constraint cuts on inadmissible combinations, never a relaxation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{ConicProblem, VarHandle};
use crate::geometry::{eval_norm, NormTag, Point, Region};
use crate::socp::{ContinuousSolver, SolveError, SolveStatus, SolverConfig};

#[derive(Debug, Error)]
pub enum PrefError {
    #[error("degenerate constant preference (UB − LB = {0:.3e})")]
    Degenerate(f64),
    #[error("point lies in no cell of factor {factor}")]
    CoverageViolation { factor: usize },
    #[error("no admissible cell combination reaches the threshold (raw {raw:.6}, range [{lb:.6}, {ub:.6}])")]
    NoAdmissibleCells { raw: f64, lb: f64, ub: f64 },
    #[error("invalid preference: {0}")]
    Invalid(String),
    #[error("normalization solve failed: {0}")]
    Solve(#[from] SolveError),
    #[error("normalization subproblem returned {0:?}")]
    SolveStatus(SolveStatus),
}

/// `normal · z ≤ offset`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Halfspace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl Halfspace {
    pub fn holds(&self, x: &[f64], tol: f64) -> bool {
        let v: f64 = self.normal.iter().zip(x).map(|(n, xi)| n * xi).sum();
        v <= self.offset + tol
    }
}

/// One cell of a factor layer: a halfspace intersection with its value.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Cell {
    pub halfspaces: Vec<Halfspace>,
    pub value: f64,
}

/// A piecewise-constant factor layer; cells must cover the region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Subdivision {
    pub cells: Vec<Cell>,
}

impl Subdivision {
    /// Lowest-index cell containing `x`; ties on boundaries resolve to the
    /// lower index so evaluation is a function.
    pub fn cell_of(&self, x: &[f64], tol: f64) -> Option<usize> {
        self.cells
            .iter()
            .position(|c| c.halfspaces.iter().all(|h| h.holds(x, tol)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProductionKind {
    /// Cobb-Douglas `Π g_j^β_j`, β on the simplex.
    Cd,
    /// CES `(Σ β_j g_j^τ)^{1/τ}`, β on the simplex, 0 < τ ≤ 1.
    Ces,
    /// Leontief `min g_j / β_j`, β > 0.
    Lf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductionSpec {
    pub kind: ProductionKind,
    pub factors: Vec<Subdivision>,
    pub betas: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_ces: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum PreferenceSpec {
    Linear {
        gamma: Vec<f64>,
        gamma0: f64,
    },
    Distance {
        points: Vec<Point>,
        lambdas: Vec<f64>,
        norm: NormTag,
    },
    Production(ProductionSpec),
}

impl PreferenceSpec {
    pub fn family_tag(&self) -> &'static str {
        match self {
            PreferenceSpec::Linear { .. } => "L",
            PreferenceSpec::Distance { .. } => "D",
            PreferenceSpec::Production(p) => match p.kind {
                ProductionKind::Cd => "CD",
                ProductionKind::Ces => "CES",
                ProductionKind::Lf => "LF",
            },
        }
    }

    pub fn validate(&self, dim: usize) -> Result<(), PrefError> {
        match self {
            PreferenceSpec::Linear { gamma, .. } => {
                if gamma.len() != dim {
                    return Err(PrefError::Invalid("gamma dimension mismatch".into()));
                }
            }
            PreferenceSpec::Distance {
                points, lambdas, ..
            } => {
                if points.is_empty() || points.len() != lambdas.len() {
                    return Err(PrefError::Invalid("points/lambdas length mismatch".into()));
                }
                if points.iter().any(|p| p.dim() != dim) {
                    return Err(PrefError::Invalid("reference point dimension".into()));
                }
                let sum: f64 = lambdas.iter().sum();
                if lambdas.iter().any(|l| *l < 0.0) || (sum - 1.0).abs() > 1e-9 {
                    return Err(PrefError::Invalid("lambdas must lie on the simplex".into()));
                }
            }
            PreferenceSpec::Production(p) => {
                if p.factors.is_empty() || p.factors.len() != p.betas.len() {
                    return Err(PrefError::Invalid("factors/betas length mismatch".into()));
                }
                match p.kind {
                    ProductionKind::Cd | ProductionKind::Ces => {
                        let sum: f64 = p.betas.iter().sum();
                        if p.betas.iter().any(|b| *b < 0.0) || (sum - 1.0).abs() > 1e-9 {
                            return Err(PrefError::Invalid("betas must lie on the simplex".into()));
                        }
                    }
                    ProductionKind::Lf => {
                        if p.betas.iter().any(|b| *b <= 0.0) {
                            return Err(PrefError::Invalid("Leontief betas must be positive".into()));
                        }
                    }
                }
                if p.kind == ProductionKind::Ces {
                    match p.tau_ces {
                        Some(t) if t > 0.0 && t <= 1.0 => {}
                        _ => return Err(PrefError::Invalid("CES tau must be in (0, 1]".into())),
                    }
                }
                for s in &p.factors {
                    if s.cells.is_empty() {
                        return Err(PrefError::Invalid("empty subdivision".into()));
                    }
                    if s.cells.iter().any(|c| c.value <= 0.0) {
                        return Err(PrefError::Invalid(
                            "cell values must be positive for production preferences".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Production value on a tuple of factor values.
pub fn production_value(
    kind: ProductionKind,
    betas: &[f64],
    tau_ces: Option<f64>,
    g: &[f64],
) -> f64 {
    match kind {
        ProductionKind::Cd => g
            .iter()
            .zip(betas)
            .map(|(gi, bi)| gi.powf(*bi))
            .product(),
        ProductionKind::Ces => {
            let tau = tau_ces.unwrap_or(1.0);
            let s: f64 = g
                .iter()
                .zip(betas)
                .map(|(gi, bi)| bi * gi.powf(tau))
                .sum();
            s.powf(1.0 / tau)
        }
        ProductionKind::Lf => g
            .iter()
            .zip(betas)
            .map(|(gi, bi)| gi / bi)
            .fold(f64::INFINITY, f64::min),
    }
}

/// Raw preference value at a point. For production preferences each factor
/// is read from the lowest-index cell containing the point.
pub fn evaluate(spec: &PreferenceSpec, x: &Point) -> Result<f64, PrefError> {
    match spec {
        PreferenceSpec::Linear { gamma, gamma0 } => {
            Ok(gamma.iter().zip(&x.0).map(|(g, xi)| g * xi).sum::<f64>() + gamma0)
        }
        PreferenceSpec::Distance {
            points,
            lambdas,
            norm,
        } => {
            let mut acc = 0.0;
            for (b, l) in points.iter().zip(lambdas) {
                let diff: Vec<f64> = b.0.iter().zip(&x.0).map(|(bi, xi)| bi - xi).collect();
                acc += l * eval_norm(&diff, *norm);
            }
            Ok(-acc)
        }
        PreferenceSpec::Production(p) => {
            let mut g = Vec::with_capacity(p.factors.len());
            for (fi, sub) in p.factors.iter().enumerate() {
                match sub.cell_of(&x.0, 1e-9) {
                    Some(l) => g.push(sub.cells[l].value),
                    None => return Err(PrefError::CoverageViolation { factor: fi }),
                }
            }
            Ok(production_value(p.kind, &p.betas, p.tau_ces, &g))
        }
    }
}

/// One cell combination of a production preference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComboInfo {
    /// Chosen cell index per factor.
    pub cells: Vec<usize>,
    /// Constant preference value on the combination.
    pub value: f64,
    /// Feasibility margin of `region ∩ cells`: ≥ 0 means nonempty,
    /// strictly positive means full-dimensional.
    pub margin: f64,
}

impl ComboInfo {
    pub fn nonempty(&self) -> bool {
        self.margin >= -1e-7
    }

    pub fn full_dim(&self) -> bool {
        self.margin > 1e-6
    }
}

/// A preference together with its exact normalization bounds over a region.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalizedPreference {
    pub spec: PreferenceSpec,
    pub lb: f64,
    pub ub: f64,
    /// Populated for production preferences only: every cell combination
    /// with its value and feasibility margin.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub combos: Vec<ComboInfo>,
}

impl NormalizedPreference {
    /// Raw value `r` such that `Φ̃(x) ≥ Φ*  ⟺  Φ(x) ≥ r`.
    pub fn raw_threshold(&self, phi_star: f64) -> f64 {
        self.lb + phi_star * (self.ub - self.lb)
    }

    pub fn evaluate_normalized(&self, x: &Point) -> Result<f64, PrefError> {
        Ok((evaluate(&self.spec, x)? - self.lb) / (self.ub - self.lb))
    }

    /// Nonempty cell combinations whose constant value reaches the raw
    /// threshold.
    pub fn admissible_cells(&self, raw: f64) -> Vec<Vec<usize>> {
        self.combos
            .iter()
            .filter(|c| c.nonempty() && c.value >= raw - 1e-12 * (1.0 + raw.abs()))
            .map(|c| c.cells.clone())
            .collect()
    }

    /// Does the production threshold hold at `x` under the model semantics:
    /// some cell combination containing `x` (within `tol`) reaches `raw`?
    pub fn production_threshold_holds(&self, x: &Point, raw: f64, tol: f64) -> bool {
        let PreferenceSpec::Production(p) = &self.spec else {
            return true;
        };
        self.combos.iter().any(|combo| {
            combo.value >= raw - tol
                && combo.cells.iter().enumerate().all(|(f, &l)| {
                    p.factors[f].cells[l]
                        .halfspaces
                        .iter()
                        .all(|h| h.holds(&x.0, tol))
                })
        })
    }
}

/// Maximum slack margin of `region_ball ∩ {rows}`: the optimum of
/// `max ε  s.t.  ‖a − c‖ ≤ radius − ε,  normal·a ≤ offset − ε` (extra SOC
/// rows of the region enter unshrunk). Nonempty iff the margin is ≥ 0.
pub fn intersection_margin(
    region: &Region,
    rows: &[Halfspace],
    solver: &dyn ContinuousSolver,
    config: &SolverConfig,
) -> Result<f64, PrefError> {
    let d = region.dim();
    let mut p = ConicProblem::new();
    let a = p.new_vars("a", d);
    let eps = p.new_var("eps");
    p.add_objective(eps, -1.0);
    let t = p.new_var("memb_t");
    p.zero_row(&[(t, 1.0), (eps, 1.0)], region.radius);
    p.epigraph_distance_to_point(&a, &region.center.0, t, region.ball_norm);
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
        p.soc_block(&exprs);
    }
    for h in rows {
        let mut terms: Vec<(VarHandle, f64)> = h
            .normal
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(k, v)| (a[k], *v))
            .collect();
        terms.push((eps, 1.0));
        p.leq_row(&terms, h.offset);
    }
    let sol = solver.solve(&p, config)?;
    match sol.status {
        SolveStatus::Optimal => Ok(-sol.objective),
        // The slack margin cannot rescue an intersection whose unshrunk
        // rows are already contradictory.
        SolveStatus::Infeasible => Ok(f64::NEG_INFINITY),
        other => Err(PrefError::SolveStatus(other)),
    }
}

/// Compute the exact normalization bounds `LB = min Φ`, `UB = max Φ` over
/// the region.
///
/// * linear: two conic solves (linear objective over the SOC ball).
/// * distance: UB by one conic solve (convex minimization of the weighted
///   distance sum); LB by a dense boundary scan with golden-section
///   refinement on the angular parameter — in the plane the maximum of a
///   convex function over a compact convex set is attained on the ball
///   boundary.
/// * production: exact enumeration of the nonempty cell combinations, with
///   nonemptiness decided by a feasibility margin solve per combination.
pub fn normalize(
    spec: &PreferenceSpec,
    region: &Region,
    solver: &dyn ContinuousSolver,
    config: &SolverConfig,
) -> Result<NormalizedPreference, PrefError> {
    spec.validate(region.dim())?;
    // Normalization bounds anchor every threshold downstream; solve the
    // small subproblems well past the model tolerance.
    let config = &SolverConfig {
        eps_primal: config.eps_primal.min(1e-9),
        eps_dual: config.eps_dual.min(1e-9),
        eps_gap: config.eps_gap.min(1e-9),
        ..config.clone()
    };
    let (lb, ub, combos) = match spec {
        PreferenceSpec::Linear { gamma, gamma0 } => {
            let ub = linear_extreme(region, gamma, solver, config, true)? + gamma0;
            let lb = linear_extreme(region, gamma, solver, config, false)? + gamma0;
            (lb, ub, Vec::new())
        }
        PreferenceSpec::Distance {
            points,
            lambdas,
            norm,
        } => {
            let ub = -distance_sum_min(region, points, lambdas, *norm, solver, config)?;
            let lb = distance_lb(region, spec)?;
            (lb, ub, Vec::new())
        }
        PreferenceSpec::Production(p) => {
            let combos = enumerate_combos(p, region, solver, config)?;
            let mut lb = f64::INFINITY;
            let mut ub = f64::NEG_INFINITY;
            for c in combos.iter().filter(|c| c.nonempty()) {
                lb = lb.min(c.value);
                ub = ub.max(c.value);
            }
            if !lb.is_finite() {
                return Err(PrefError::Invalid(
                    "no nonempty cell combination covers the region".into(),
                ));
            }
            (lb, ub, combos)
        }
    };
    if ub - lb < 1e-9 {
        return Err(PrefError::Degenerate(ub - lb));
    }
    Ok(NormalizedPreference {
        spec: spec.clone(),
        lb,
        ub,
        combos,
    })
}

fn linear_extreme(
    region: &Region,
    gamma: &[f64],
    solver: &dyn ContinuousSolver,
    config: &SolverConfig,
    maximize: bool,
) -> Result<f64, PrefError> {
    let mut p = ConicProblem::new();
    let a = p.new_vars("a", region.dim());
    let sign = if maximize { -1.0 } else { 1.0 };
    for (k, g) in gamma.iter().enumerate() {
        p.add_objective(a[k], sign * g);
    }
    p.region_membership(&a, region, "r");
    let sol = solver.solve(&p, config)?;
    if sol.status != SolveStatus::Optimal {
        return Err(PrefError::SolveStatus(sol.status));
    }
    Ok(sign * sol.objective)
}

fn distance_sum_min(
    region: &Region,
    points: &[Point],
    lambdas: &[f64],
    norm: NormTag,
    solver: &dyn ContinuousSolver,
    config: &SolverConfig,
) -> Result<f64, PrefError> {
    let mut p = ConicProblem::new();
    let a = p.new_vars("a", region.dim());
    p.region_membership(&a, region, "r");
    for (k, (b, l)) in points.iter().zip(lambdas).enumerate() {
        let t = p.new_var(format!("t[{k}]"));
        p.add_objective(t, *l);
        p.epigraph_distance_to_point(&a, &b.0, t, norm);
    }
    let sol = solver.solve(&p, config)?;
    if sol.status != SolveStatus::Optimal {
        return Err(PrefError::SolveStatus(sol.status));
    }
    Ok(sol.objective)
}

/// Boundary point of the ball at angular parameter θ (planar regions).
fn boundary_point(region: &Region, theta: f64) -> Point {
    let dir = [theta.cos(), theta.sin()];
    let scale = region.radius / eval_norm(&dir, region.ball_norm);
    Point(vec![
        region.center.0[0] + scale * dir[0],
        region.center.0[1] + scale * dir[1],
    ])
}

/// LB of a distance preference: 3600 equally spaced boundary samples plus
/// golden-section refinement of the angular parameter around the best one.
/// Falls back to boundary sampling via random directions for d > 2.
fn distance_lb(region: &Region, spec: &PreferenceSpec) -> Result<f64, PrefError> {
    let eval_at = |x: &Point| evaluate(spec, x);
    if region.dim() == 2 && region.extra_soc.is_empty() {
        let n = 3600;
        let step = std::f64::consts::TAU / n as f64;
        let mut best_theta = 0.0;
        let mut best = f64::INFINITY;
        for k in 0..n {
            let theta = k as f64 * step;
            let v = eval_at(&boundary_point(region, theta))?;
            if v < best {
                best = v;
                best_theta = theta;
            }
        }
        // Golden-section minimization over the bracketing arc.
        let inv_phi = 0.618_033_988_749_894_9_f64;
        let mut lo = best_theta - step;
        let mut hi = best_theta + step;
        let mut t1 = hi - inv_phi * (hi - lo);
        let mut t2 = lo + inv_phi * (hi - lo);
        let mut f1 = eval_at(&boundary_point(region, t1))?;
        let mut f2 = eval_at(&boundary_point(region, t2))?;
        for _ in 0..80 {
            if f1 <= f2 {
                hi = t2;
                t2 = t1;
                f2 = f1;
                t1 = hi - inv_phi * (hi - lo);
                f1 = eval_at(&boundary_point(region, t1))?;
            } else {
                lo = t1;
                t1 = t2;
                f1 = f2;
                t2 = lo + inv_phi * (hi - lo);
                f2 = eval_at(&boundary_point(region, t2))?;
            }
        }
        Ok(best.min(f1).min(f2))
    } else {
        // Generic fallback: dense random boundary directions. The minimum of
        // the (concave) preference is still attained on the boundary.
        let mut rng = crate::rng::Rng::new(0x9e3779b9);
        let d = region.dim();
        let mut best = f64::INFINITY;
        for _ in 0..20_000 {
            let dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            let scale = region.radius / eval_norm(&dir, region.ball_norm).max(1e-12);
            let x = Point(
                region
                    .center
                    .0
                    .iter()
                    .zip(&dir)
                    .map(|(c, u)| c + scale * u)
                    .collect(),
            );
            if region.contains(&x, 1e-9).unwrap_or(false) {
                best = best.min(eval_at(&x)?);
            }
        }
        Ok(best)
    }
}

fn enumerate_combos(
    p: &ProductionSpec,
    region: &Region,
    solver: &dyn ContinuousSolver,
    config: &SolverConfig,
) -> Result<Vec<ComboInfo>, PrefError> {
    let sizes: Vec<usize> = p.factors.iter().map(|s| s.cells.len()).collect();
    let mut combos = Vec::new();
    let mut idx = vec![0usize; sizes.len()];
    loop {
        let rows: Vec<Halfspace> = idx
            .iter()
            .enumerate()
            .flat_map(|(f, &l)| p.factors[f].cells[l].halfspaces.iter().cloned())
            .collect();
        let margin = intersection_margin(region, &rows, solver, config)?;
        let g: Vec<f64> = idx
            .iter()
            .enumerate()
            .map(|(f, &l)| p.factors[f].cells[l].value)
            .collect();
        combos.push(ComboInfo {
            cells: idx.clone(),
            value: production_value(p.kind, &p.betas, p.tau_ces, &g),
            margin,
        });
        // advance the mixed-radix counter
        let mut done = true;
        for f in (0..sizes.len()).rev() {
            idx[f] += 1;
            if idx[f] < sizes[f] {
                done = false;
                break;
            }
            idx[f] = 0;
        }
        if done {
            break;
        }
    }
    Ok(combos)
}

/// Cell-selector variables emitted for a production threshold, per factor.
#[derive(Debug, Clone, Default)]
pub struct EmittedThreshold {
    pub xi: Vec<Vec<VarHandle>>,
}

/// Emit the threshold constraint `Φ̃(a) ≥ Φ*` into the problem. A threshold
/// of zero emits nothing (it coincides with ignoring preferences).
pub fn emit_threshold(
    problem: &mut ConicProblem,
    a: &[VarHandle],
    region: &Region,
    pref: &NormalizedPreference,
    phi_star: f64,
    tag: &str,
) -> Result<EmittedThreshold, PrefError> {
    if phi_star <= 0.0 {
        return Ok(EmittedThreshold::default());
    }
    let raw = pref.raw_threshold(phi_star);
    match &pref.spec {
        PreferenceSpec::Linear { gamma, gamma0 } => {
            let terms: Vec<(VarHandle, f64)> = gamma
                .iter()
                .enumerate()
                .filter(|(_, g)| **g != 0.0)
                .map(|(k, g)| (a[k], *g))
                .collect();
            problem.geq_row(&terms, raw - gamma0);
            Ok(EmittedThreshold::default())
        }
        PreferenceSpec::Distance {
            points,
            lambdas,
            norm,
        } => {
            let mut sum: Vec<(VarHandle, f64)> = Vec::with_capacity(points.len());
            for (k, (b, l)) in points.iter().zip(lambdas).enumerate() {
                let t = problem.new_var(format!("{tag}.pref_t[{k}]"));
                problem.epigraph_distance_to_point(a, &b.0, t, *norm);
                sum.push((t, *l));
            }
            problem.leq_row(&sum, -raw);
            Ok(EmittedThreshold::default())
        }
        PreferenceSpec::Production(p) => {
            let admissible = pref.admissible_cells(raw);
            if admissible.is_empty() {
                return Err(PrefError::NoAdmissibleCells {
                    raw,
                    lb: pref.lb,
                    ub: pref.ub,
                });
            }
            let nonempty_count = pref.combos.iter().filter(|c| c.nonempty()).count();
            if admissible.len() == nonempty_count {
                // Every reachable combination passes: the constraint is
                // vacuous over the region.
                return Ok(EmittedThreshold::default());
            }

            let delta3 = subdivision_big_m(p, region);
            let mut xi_all = Vec::with_capacity(p.factors.len());
            for (f, sub) in p.factors.iter().enumerate() {
                let xi = problem.new_vars(&format!("{tag}.xi[{f}]"), sub.cells.len());
                for &x in &xi {
                    problem.mark_binary(x);
                }
                let one_hot: Vec<(VarHandle, f64)> = xi.iter().map(|&x| (x, 1.0)).collect();
                problem.zero_row(&one_hot, 1.0);
                for (l, cell) in sub.cells.iter().enumerate() {
                    for h in &cell.halfspaces {
                        // normal·a ≤ offset + Δ³(1 − ξ)
                        let mut terms: Vec<(VarHandle, f64)> = h
                            .normal
                            .iter()
                            .enumerate()
                            .filter(|(_, v)| **v != 0.0)
                            .map(|(k, v)| (a[k], *v))
                            .collect();
                        terms.push((xi[l], delta3));
                        problem.leq_row(&terms, h.offset + delta3);
                    }
                }
                xi_all.push(xi);
            }
            // Cut every combination that is inadmissible (below threshold or
            // geometrically empty): Σ_f ξ_{f, l_f} ≤ m − 1.
            let m = p.factors.len();
            for combo in &pref.combos {
                let is_admissible = combo.nonempty()
                    && combo.value >= raw - 1e-12 * (1.0 + raw.abs());
                if !is_admissible {
                    let terms: Vec<(VarHandle, f64)> = combo
                        .cells
                        .iter()
                        .enumerate()
                        .map(|(f, &l)| (xi_all[f][l], 1.0))
                        .collect();
                    problem.leq_row(&terms, (m - 1) as f64);
                }
            }
            Ok(EmittedThreshold { xi: xi_all })
        }
    }
}

/// Big-M for cell-membership rows: bounds `normal·a − offset` over the
/// enclosing box of the ball, `max_rows(‖normal‖₁·(‖c‖∞ + radius) + |offset|) + 1`.
pub fn subdivision_big_m(p: &ProductionSpec, region: &Region) -> f64 {
    let center_inf = region
        .center
        .0
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let reach = center_inf + region.radius;
    let mut worst = 0.0_f64;
    for sub in &p.factors {
        for cell in &sub.cells {
            for h in &cell.halfspaces {
                let row_l1: f64 = h.normal.iter().map(|v| v.abs()).sum();
                worst = worst.max(row_l1 * reach + h.offset.abs());
            }
        }
    }
    worst + 1.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use crate::socp::BuiltinSolver;

    fn solver() -> BuiltinSolver {
        BuiltinSolver::new()
    }

    fn cfg() -> SolverConfig {
        SolverConfig::default()
    }

    fn unit_ball() -> Region {
        Region::ball(Point(vec![0.0, 0.0]), 1.0, NormTag::L2, 1.0)
    }

    /// Axis-aligned strip subdivision of the square [-1,1]²: `count` strips
    /// along the given axis with the provided values.
    fn strip_subdivision(axis: usize, values: &[f64]) -> Subdivision {
        let count = values.len();
        let width = 2.0 / count as f64;
        let cells = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let lo = -1.0 + i as f64 * width;
                let hi = lo + width;
                let mut lo_n = vec![0.0; 2];
                let mut hi_n = vec![0.0; 2];
                lo_n[axis] = -1.0;
                hi_n[axis] = 1.0;
                Cell {
                    halfspaces: vec![
                        Halfspace {
                            normal: lo_n,
                            offset: -lo,
                        },
                        Halfspace {
                            normal: hi_n,
                            offset: hi,
                        },
                    ],
                    value: v,
                }
            })
            .collect();
        Subdivision { cells }
    }

    fn production(kind: ProductionKind, fac1: &[f64], fac2: &[f64]) -> PreferenceSpec {
        PreferenceSpec::Production(ProductionSpec {
            kind,
            factors: vec![strip_subdivision(0, fac1), strip_subdivision(1, fac2)],
            betas: vec![0.5, 0.5],
            tau_ces: if kind == ProductionKind::Ces {
                Some(0.5)
            } else {
                None
            },
        })
    }

    #[test]
    fn evaluate_examples() {
        let lin = PreferenceSpec::Linear {
            gamma: vec![1.0, 0.0],
            gamma0: 0.0,
        };
        assert_eq!(evaluate(&lin, &Point(vec![0.3, 0.9])).unwrap(), 0.3);

        let dist = PreferenceSpec::Distance {
            points: vec![Point(vec![0.0, 0.0])],
            lambdas: vec![1.0],
            norm: NormTag::L2,
        };
        assert_eq!(evaluate(&dist, &Point(vec![3.0, 4.0])).unwrap(), -5.0);

        // CD with cell values (4, 9) at the probe point → √36 = 6.
        let cd = production(ProductionKind::Cd, &[4.0, 1.0], &[9.0, 1.0]);
        let probe = Point(vec![-0.75, -0.75]);
        assert!((evaluate(&cd, &probe).unwrap() - 6.0).abs() < 1e-12);

        // CES, τ=0.5: (0.5·2 + 0.5·3)² = 6.25.
        let ces = production(ProductionKind::Ces, &[4.0, 1.0], &[9.0, 1.0]);
        assert!((evaluate(&ces, &probe).unwrap() - 6.25).abs() < 1e-12);

        // LF, β=(1,2) → min(4/1, 9/2) = 4.
        let lf = PreferenceSpec::Production(ProductionSpec {
            kind: ProductionKind::Lf,
            factors: vec![
                strip_subdivision(0, &[4.0, 1.0]),
                strip_subdivision(1, &[9.0, 1.0]),
            ],
            betas: vec![1.0, 2.0],
            tau_ces: None,
        });
        assert!((evaluate(&lf, &probe).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn normalize_linear_unit_ball() {
        let lin = PreferenceSpec::Linear {
            gamma: vec![1.0, 0.0],
            gamma0: 0.0,
        };
        let np = normalize(&lin, &unit_ball(), &solver(), &cfg()).unwrap();
        assert!((np.lb + 1.0).abs() < 1e-4, "lb {}", np.lb);
        assert!((np.ub - 1.0).abs() < 1e-4, "ub {}", np.ub);
    }

    #[test]
    fn normalize_linear_matches_dual_norm_closed_form() {
        // max γᵀx over an ℓτ ball of radius r at center c is
        // γᵀc + r·‖γ‖_q with 1/τ + 1/q = 1.
        let mut rng = Rng::new(8);
        let cases = [
            (NormTag::L1, f64::INFINITY),
            (NormTag::L2, 2.0),
            (NormTag::L3, 1.5),
            (NormTag::L4, 4.0 / 3.0),
            (NormTag::LInf, 1.0),
        ];
        for (ball, q) in cases {
            let c = vec![rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)];
            let r = rng.uniform_in(0.3, 1.5);
            let gamma = vec![rng.uniform_in(-3.0, 3.0), rng.uniform_in(-3.0, 3.0)];
            let region = Region::ball(Point(c.clone()), r, ball, 1.0);
            let spec = PreferenceSpec::Linear {
                gamma: gamma.clone(),
                gamma0: 0.0,
            };
            let np = normalize(&spec, &region, &solver(), &cfg()).unwrap();
            let dual = if q.is_infinite() {
                gamma.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
            } else {
                gamma
                    .iter()
                    .map(|v| v.abs().powf(q))
                    .sum::<f64>()
                    .powf(1.0 / q)
            };
            let base: f64 = gamma.iter().zip(&c).map(|(g, ci)| g * ci).sum();
            let expect_ub = base + r * dual;
            let expect_lb = base - r * dual;
            assert!(
                (np.ub - expect_ub).abs() < 2e-4 * (1.0 + expect_ub.abs()),
                "{ball:?}: ub {} vs {expect_ub}",
                np.ub
            );
            assert!(
                (np.lb - expect_lb).abs() < 2e-4 * (1.0 + expect_lb.abs()),
                "{ball:?}: lb {} vs {expect_lb}",
                np.lb
            );
        }
    }

    #[test]
    fn normalize_distance_center_reference() {
        // B at the ball center: Φ = −‖a − c‖, so (LB, UB) = (−r, 0).
        let dist = PreferenceSpec::Distance {
            points: vec![Point(vec![0.0, 0.0])],
            lambdas: vec![1.0],
            norm: NormTag::L2,
        };
        let np = normalize(&dist, &unit_ball(), &solver(), &cfg()).unwrap();
        assert!(np.ub.abs() < 1e-4, "ub {}", np.ub);
        assert!((np.lb + 1.0).abs() < 1e-6, "lb {}", np.lb);
    }

    #[test]
    fn normalize_production_grid() {
        // 4×4 strip grid with δ values {1..4} per factor: UB = √16 = 4,
        // LB = √1 = 1, every combination nonempty on the ℓ∞ ball.
        let square = Region::ball(Point(vec![0.0, 0.0]), 1.0, NormTag::LInf, 1.0);
        let spec = production(
            ProductionKind::Cd,
            &[1.0, 2.0, 3.0, 4.0],
            &[1.0, 2.0, 3.0, 4.0],
        );
        let np = normalize(&spec, &square, &solver(), &cfg()).unwrap();
        assert_eq!(np.combos.len(), 16);
        assert!(np.combos.iter().all(|c| c.nonempty()));
        assert!((np.ub - 4.0).abs() < 1e-9);
        assert!((np.lb - 1.0).abs() < 1e-9);
    }

    #[test]
    fn raw_threshold_interpolates() {
        let np = NormalizedPreference {
            spec: PreferenceSpec::Linear {
                gamma: vec![1.0, 0.0],
                gamma0: 0.0,
            },
            lb: -1.0,
            ub: 1.0,
            combos: Vec::new(),
        };
        assert_eq!(np.raw_threshold(0.0), -1.0);
        assert_eq!(np.raw_threshold(1.0), 1.0);
        assert!((np.raw_threshold(0.8) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn admissible_cells_examples() {
        let square = Region::ball(Point(vec![0.0, 0.0]), 1.0, NormTag::LInf, 1.0);
        let spec = production(ProductionKind::Cd, &[1.0, 2.0], &[1.0, 2.0]);
        let np = normalize(&spec, &square, &solver(), &cfg()).unwrap();
        // r = LB → all nonempty combinations.
        assert_eq!(np.admissible_cells(np.lb).len(), 4);
        // r = UB → exactly the argmax combination (2,2) i.e. indices (1,1).
        assert_eq!(np.admissible_cells(np.ub), vec![vec![1, 1]]);
        // r = 1.5 → only √(2·2) = 2 qualifies; √2 ≈ 1.414 < 1.5.
        assert_eq!(np.admissible_cells(1.5), vec![vec![1, 1]]);
    }

    #[test]
    fn emit_linear_threshold_halfspace() {
        // Unit ball, Φ* = 0.8, γ = (1,0): emitted constraint is a₁ ≥ 0.6.
        let region = unit_ball();
        let spec = PreferenceSpec::Linear {
            gamma: vec![1.0, 0.0],
            gamma0: 0.0,
        };
        let np = normalize(&spec, &region, &solver(), &cfg()).unwrap();
        let mut p = ConicProblem::new();
        let a = p.new_vars("a", 2);
        p.region_membership(&a, &region, "r");
        emit_threshold(&mut p, &a, &region, &np, 0.8, "r").unwrap();
        p.add_objective(a[0], 1.0); // minimize a₁
        let sol = solver().solve(&p, &cfg()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 0.6).abs() < 1e-3, "{}", sol.objective);
    }

    #[test]
    fn emit_distance_threshold_shrinks_ball() {
        // B at center, Φ* = 0.8 with (LB, UB) = (−1, 0) → ‖a − c‖ ≤ 0.2.
        let region = unit_ball();
        let spec = PreferenceSpec::Distance {
            points: vec![Point(vec![0.0, 0.0])],
            lambdas: vec![1.0],
            norm: NormTag::L2,
        };
        let np = normalize(&spec, &region, &solver(), &cfg()).unwrap();
        let mut p = ConicProblem::new();
        let a = p.new_vars("a", 2);
        p.region_membership(&a, &region, "r");
        emit_threshold(&mut p, &a, &region, &np, 0.8, "r").unwrap();
        p.add_objective(a[0], -1.0); // maximize a₁
        let sol = solver().solve(&p, &cfg()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((-sol.objective - 0.2).abs() < 1e-3, "{}", -sol.objective);
    }

    #[test]
    fn production_threshold_infeasible_reported() {
        let square = Region::ball(Point(vec![0.0, 0.0]), 1.0, NormTag::LInf, 1.0);
        let spec = production(ProductionKind::Cd, &[1.0, 2.0], &[1.0, 2.0]);
        let mut np = normalize(&spec, &square, &solver(), &cfg()).unwrap();
        // Force an unreachable raw threshold by doctoring the bounds the way
        // a numerically degenerate instance would.
        np.ub += 10.0;
        let mut p = ConicProblem::new();
        let a = p.new_vars("a", 2);
        let err = emit_threshold(&mut p, &a, &square, &np, 0.9, "r").unwrap_err();
        assert!(matches!(err, PrefError::NoAdmissibleCells { .. }));
    }

    #[test]
    fn rescale_correctness_sampled() {
        // Φ̃ ∈ [−1e-6, 1 + 1e-6] over sampled region points, all families.
        let mut rng = Rng::new(2025);
        let region = unit_ball();
        let solver = solver();
        let specs = vec![
            PreferenceSpec::Linear {
                gamma: vec![2.0, -1.0],
                gamma0: 3.0,
            },
            PreferenceSpec::Distance {
                points: vec![Point(vec![0.3, 0.2]), Point(vec![-0.4, 0.1])],
                lambdas: vec![0.5, 0.5],
                norm: NormTag::L2,
            },
            production(ProductionKind::Cd, &[2.0, 5.0, 1.0], &[3.0, 7.0]),
            production(ProductionKind::Ces, &[2.0, 5.0], &[3.0, 7.0, 4.0]),
        ];
        for spec in specs {
            let np = normalize(&spec, &region, &solver, &cfg()).unwrap();
            let mut checked = 0;
            while checked < 1000 {
                let x = Point(vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)]);
                if !region.contains(&x, 0.0).unwrap() {
                    continue;
                }
                checked += 1;
                let v = np.evaluate_normalized(&x).unwrap();
                assert!(
                    (-1e-6..=1.0 + 1e-6).contains(&v),
                    "{} out of range for {:?}",
                    v,
                    np.spec.family_tag()
                );
            }
        }
    }

    #[test]
    fn production_threshold_equivalence_sampled() {
        // {x : emitted constraints feasible for some ξ} = {x : Φ̃(x) ≥ Φ*},
        // tested by sampling interior points.
        let mut rng = Rng::new(31337);
        let region = unit_ball();
        let spec = production(ProductionKind::Cd, &[1.0, 4.0, 2.0], &[3.0, 1.0]);
        let np = normalize(&spec, &region, &solver(), &cfg()).unwrap();
        let phi = 0.5;
        let raw = np.raw_threshold(phi);
        let mut checked = 0;
        while checked < 500 {
            let x = Point(vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)]);
            if !region.contains(&x, 0.0).unwrap() {
                continue;
            }
            checked += 1;
            let by_value = np.evaluate_normalized(&x).unwrap() >= phi;
            let by_cells = np.production_threshold_holds(&x, raw, 1e-9);
            assert_eq!(by_value, by_cells, "disagreement at {:?}", x.0);
        }
    }

    #[test]
    fn degenerate_preference_rejected() {
        let spec = PreferenceSpec::Linear {
            gamma: vec![0.0, 0.0],
            gamma0: 5.0,
        };
        let err = normalize(&spec, &unit_ball(), &solver(), &cfg()).unwrap_err();
        assert!(matches!(err, PrefError::Degenerate(_)));
    }

    #[test]
    fn distance_sublevel_convexity_sampled() {
        // Convex combinations of threshold-feasible points stay feasible.
        let mut rng = Rng::new(555);
        let region = unit_ball();
        let spec = PreferenceSpec::Distance {
            points: vec![Point(vec![0.5, 0.0]), Point(vec![-0.2, 0.3])],
            lambdas: vec![0.4, 0.6],
            norm: NormTag::L2,
        };
        let np = normalize(&spec, &region, &solver(), &cfg()).unwrap();
        let phi = 0.6;
        let feasible = |x: &Point| {
            region.contains(x, 0.0).unwrap() && np.evaluate_normalized(x).unwrap() >= phi
        };
        let mut found = 0;
        while found < 100 {
            let p1 = Point(vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)]);
            let p2 = Point(vec![rng.uniform_in(-1.0, 1.0), rng.uniform_in(-1.0, 1.0)]);
            if !feasible(&p1) || !feasible(&p2) {
                continue;
            }
            found += 1;
            let t = rng.uniform();
            let mid = Point(vec![
                t * p1.0[0] + (1.0 - t) * p2.0[0],
                t * p1.0[1] + (1.0 - t) * p2.0[1],
            ]);
            assert!(
                np.evaluate_normalized(&mid).unwrap() >= phi - 1e-9,
                "convexity violated"
            );
        }
    }
}
