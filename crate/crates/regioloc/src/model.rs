//! Compiles an instance into the assignment / collocation conic models and
//! extracts and validates solutions.
//!
//! The assignment model locates `p` facilities and one entry point per
//! region, each region assigned to exactly one facility, minimizing
//! `Σ ω_i d_ij` with `d_ij ≥ ‖a_i − x_j‖ − Δ¹_i (1 − y_ij)`. With a single
//! facility the binaries and big-M rows are dropped entirely and the model
//! is continuous (unless production-preference thresholds re-introduce cell
//! selectors).
//!
//! The collocation variant adds binaries `z_{ii'}` for overlap-candidate
//! pairs, forces `‖a_i − a_{i'}‖₁ ≤ Δ²(1 − z_{ii'})`, and suppresses the
//! distance term of the higher-index region of a collocated pair via
//! `d_ij ≥ ‖a_i − x_j‖ − Δ¹_i (1 − y_ij + Σ_{i'<i} z_{ii'})`. Its objective
//! is unweighted by default; `weighted_collocation` reinstates the region
//! weights.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conic::{ConicProblem, VarHandle};
use crate::geometry::{
    big_m_l1, big_m_transport, eval_norm, overlap_candidates, GeometryError, Point, Region,
};
use crate::par::maybe_par_map;
use crate::prefs::{
    emit_threshold, intersection_margin, normalize, NormalizedPreference, PrefError,
    PreferenceSpec,
};
use crate::socp::{ContinuousSolver, SolveError, SolverConfig};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("region {0} is empty (ball and extra SOC rows have no common point)")]
    EmptyRegion(usize),
    #[error(transparent)]
    Pref(#[from] PrefError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("binary variable {label} is non-integral: {value}")]
    NonIntegral { label: String, value: f64 },
}

/// The serializable unit of work: regions, preferences, facility count,
/// threshold, and scenario metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Instance {
    pub regions: Vec<Region>,
    pub prefs: Vec<PreferenceSpec>,
    pub p: usize,
    pub threshold: f64,
    pub collocation: bool,
    pub dimension: usize,
    pub scenario: String,
    pub pref_family: String,
    pub seed: u64,
}

impl Instance {
    pub fn n(&self) -> usize {
        self.regions.len()
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.regions.is_empty() {
            return Err(ModelError::Invalid("no regions".into()));
        }
        if self.prefs.len() != self.regions.len() {
            return Err(ModelError::Invalid(format!(
                "{} preferences for {} regions",
                self.prefs.len(),
                self.regions.len()
            )));
        }
        if self.p < 1 {
            return Err(ModelError::Invalid("p must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ModelError::Invalid(format!(
                "threshold {} outside [0,1]",
                self.threshold
            )));
        }
        for (i, r) in self.regions.iter().enumerate() {
            if r.dim() != self.dimension {
                return Err(ModelError::Invalid(format!("region {i} dimension")));
            }
            if !(r.radius > 0.0) || !(r.weight > 0.0) {
                return Err(ModelError::Invalid(format!(
                    "region {i} needs positive radius and weight"
                )));
            }
            if !r.center.is_finite() {
                return Err(ModelError::Invalid(format!("region {i} center not finite")));
            }
        }
        for (i, p) in self.prefs.iter().enumerate() {
            p.validate(self.dimension)
                .map_err(|e| ModelError::Invalid(format!("preference {i}: {e}")))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    /// Every region pays the distance to its assigned facility.
    Assignment,
    /// Overlapping regions may share an entry point, counted once.
    Collocation,
}

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Reinstate region weights in the collocation objective.
    pub weighted_collocation: bool,
    /// Lexicographic facility symmetry-breaking rows; `None` enables them
    /// automatically for p ≥ 2 and n ≤ 20.
    pub symmetry_breaking: Option<bool>,
    /// Normalize region preferences in parallel.
    pub parallel: bool,
    /// Solver configuration for the normalization subproblems.
    pub solver_config: SolverConfig,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            weighted_collocation: false,
            symmetry_breaking: None,
            parallel: true,
            solver_config: SolverConfig::default(),
        }
    }
}

/// Which model block a binary variable belongs to; branching priorities are
/// assignment > cell selector > collocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryClass {
    Assignment,
    CellSelector,
    Collocation,
}

/// Decision-variable handles of a built model.
#[derive(Debug, Clone, Default)]
pub struct VarMap {
    /// Facility coordinates, `p × d`.
    pub x: Vec<Vec<VarHandle>>,
    /// Entry-point coordinates, `n × d`.
    pub a: Vec<Vec<VarHandle>>,
    /// Assignment binaries, `n × p`; empty when p = 1.
    pub y: Vec<Vec<VarHandle>>,
    /// Distance epigraph variables, `n × p`.
    pub t: Vec<Vec<VarHandle>>,
    /// Distance surrogates, `n × p`; empty in the pure single-facility model.
    pub d: Vec<Vec<VarHandle>>,
    /// Collocation binaries per candidate pair `(i, i')`, `i' < i`.
    pub z: Vec<(usize, usize, VarHandle)>,
    /// Cell selectors per region and factor (production thresholds only).
    pub xi: Vec<Vec<Vec<VarHandle>>>,
}

impl VarMap {
    pub fn binary_class(&self, v: VarHandle) -> Option<BinaryClass> {
        if self.y.iter().flatten().any(|&h| h == v) {
            return Some(BinaryClass::Assignment);
        }
        if self
            .xi
            .iter()
            .flatten()
            .flatten()
            .any(|&h| h == v)
        {
            return Some(BinaryClass::CellSelector);
        }
        if self.z.iter().any(|&(_, _, h)| h == v) {
            return Some(BinaryClass::Collocation);
        }
        None
    }
}

/// A compiled model: the conic problem, the variable map, and the
/// normalization data needed to validate solutions.
#[derive(Debug, Clone)]
pub struct BuiltModel {
    pub problem: ConicProblem,
    pub map: VarMap,
    pub kind: ModelKind,
    pub instance: Instance,
    pub norm_prefs: Vec<NormalizedPreference>,
    pub options: BuildOptions,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    Optimal,
    Feasible,
    Infeasible,
    NoSolution,
}

/// Extracted solution: coordinates, assignment and collocation structure,
/// and the objective recomputed from coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolutionStatus,
    pub facilities: Vec<Point>,
    pub entries: Vec<Point>,
    /// Facility index per region.
    pub assignment: Vec<usize>,
    /// Collocated pairs `(i, i')` with `i' < i`.
    pub collocated: Vec<(usize, usize)>,
    /// Objective recomputed from coordinates.
    pub objective: f64,
    /// Objective as reported by the solver (`cᵀu`).
    pub solver_objective: f64,
    pub mip_gap: f64,
    pub wall_time: f64,
}

/// Normalize all preferences of an instance.
pub fn normalize_instance(
    instance: &Instance,
    solver: &(dyn ContinuousSolver + Sync),
    options: &BuildOptions,
) -> Result<Vec<NormalizedPreference>, ModelError> {
    let pairs: Vec<(usize, &Region, &PreferenceSpec)> = instance
        .regions
        .iter()
        .zip(&instance.prefs)
        .enumerate()
        .map(|(i, (r, p))| (i, r, p))
        .collect();
    let results = maybe_par_map(&pairs, options.parallel, |(i, region, pref)| {
        normalize(pref, region, solver, &options.solver_config)
            .map_err(|e| ModelError::Invalid(format!("region {i}: {e}")))
    });
    results.into_iter().collect()
}

/// Compile an instance into a conic problem.
pub fn build(
    instance: &Instance,
    kind: ModelKind,
    options: &BuildOptions,
    solver: &(dyn ContinuousSolver + Sync),
) -> Result<BuiltModel, ModelError> {
    instance.validate()?;
    // Regions cut by extra SOC rows must be nonempty; plain balls always are.
    for (i, region) in instance.regions.iter().enumerate() {
        if !region.extra_soc.is_empty() {
            let margin = intersection_margin(region, &[], solver, &options.solver_config)?;
            if margin < -1e-7 {
                return Err(ModelError::EmptyRegion(i));
            }
        }
    }
    let norm_prefs = normalize_instance(instance, solver, options)?;
    build_with_norms(instance, kind, options, norm_prefs)
}

/// Compile with preference normalizations already at hand.
pub fn build_with_norms(
    instance: &Instance,
    kind: ModelKind,
    options: &BuildOptions,
    norm_prefs: Vec<NormalizedPreference>,
) -> Result<BuiltModel, ModelError> {
    let n = instance.n();
    let p = instance.p;
    let d = instance.dimension;
    let delta1 = big_m_transport(&instance.regions)?;

    let mut problem = ConicProblem::new();
    let mut map = VarMap::default();

    for j in 0..p {
        map.x.push(problem.new_vars(&format!("x[{j}]"), d));
    }
    for i in 0..n {
        map.a.push(problem.new_vars(&format!("a[{i}]"), d));
    }

    // Per-region geometry and preference rows first; rows touching the
    // facility coordinates come last so the factorization fill stays in one
    // trailing block.
    map.xi = vec![Vec::new(); n];
    for i in 0..n {
        let region = &instance.regions[i];
        problem.region_membership(&map.a[i], region, &format!("r[{i}]"));
        let emitted = emit_threshold(
            &mut problem,
            &map.a[i],
            region,
            &norm_prefs[i],
            instance.threshold,
            &format!("r[{i}]"),
        )?;
        map.xi[i] = emitted.xi;
    }

    // Collocation pairs and their ℓ1 coupling rows.
    let mut z_terms_of: Vec<Vec<VarHandle>> = vec![Vec::new(); n];
    if kind == ModelKind::Collocation {
        for (i, j) in overlap_candidates(&instance.regions) {
            let z = problem.new_var(format!("z[{i},{j}]"));
            problem.mark_binary(z);
            let delta2 = big_m_l1(&instance.regions[i], &instance.regions[j]);
            // Σ_k e_k ≤ Δ²(1 − z) with e_k ≥ ±(a_i − a_j).
            let es = problem.new_vars(&format!("z[{i},{j}].l1"), d);
            for k in 0..d {
                problem.leq_row(
                    &[(map.a[i][k], 1.0), (map.a[j][k], -1.0), (es[k], -1.0)],
                    0.0,
                );
                problem.leq_row(
                    &[(map.a[i][k], -1.0), (map.a[j][k], 1.0), (es[k], -1.0)],
                    0.0,
                );
            }
            let mut sum: Vec<(VarHandle, f64)> = es.iter().map(|&e| (e, 1.0)).collect();
            sum.push((z, delta2));
            problem.leq_row(&sum, delta2);
            z_terms_of[i].push(z);
            map.z.push((i, j, z));
        }
    }

    // Assignment binaries and one-hot rows.
    if p >= 2 {
        for i in 0..n {
            let yi = problem.new_vars(&format!("y[{i}]"), p);
            for &y in &yi {
                problem.mark_binary(y);
            }
            let one_hot: Vec<(VarHandle, f64)> = yi.iter().map(|&y| (y, 1.0)).collect();
            problem.zero_row(&one_hot, 1.0);
            map.y.push(yi);
        }
        let symmetry = options.symmetry_breaking.unwrap_or(n <= 20);
        if symmetry && n <= 20 {
            // Σ_i 2^i y_{i,j} ≥ Σ_i 2^i y_{i,j+1}: facility labels ordered
            // by the binary value of their assigned-region sets.
            for j in 0..p - 1 {
                let mut terms = Vec::with_capacity(2 * n);
                for i in 0..n {
                    let w = (1u64 << i) as f64;
                    terms.push((map.y[i][j + 1], w));
                    terms.push((map.y[i][j], -w));
                }
                problem.leq_row(&terms, 0.0);
            }
        }
    }

    // Distance epigraphs and the linearization rows.
    let weight_of = |i: usize| -> f64 {
        match kind {
            ModelKind::Assignment => instance.regions[i].weight,
            ModelKind::Collocation => {
                if options.weighted_collocation {
                    instance.regions[i].weight
                } else {
                    1.0
                }
            }
        }
    };
    let pure_single = p == 1 && (kind == ModelKind::Assignment || map.z.is_empty());
    for i in 0..n {
        let tau = instance.regions[i].transport_norm;
        let mut t_row = Vec::with_capacity(p);
        let mut d_row = Vec::with_capacity(p);
        for j in 0..p {
            let t = problem.new_var(format!("t[{i},{j}]"));
            problem.epigraph_distance(&map.a[i], &map.x[j], t, tau);
            if pure_single {
                // Single facility: no binaries are needed and the epigraph
                // variable itself carries the objective.
                problem.add_objective(t, weight_of(i));
            } else {
                let dv = problem.new_var(format!("d[{i},{j}]"));
                problem.add_objective(dv, weight_of(i));
                problem.leq_row(&[(dv, -1.0)], 0.0); // d ≥ 0
                // t − d − Δ¹(1 − y + Σ z) ≤ 0
                let delta = delta1[i];
                let mut terms = vec![(t, 1.0), (dv, -1.0)];
                let mut rhs = 0.0;
                if p >= 2 {
                    terms.push((map.y[i][j], delta));
                    rhs += delta;
                }
                for &z in &z_terms_of[i] {
                    terms.push((z, -delta));
                }
                problem.leq_row(&terms, rhs);
                d_row.push(dv);
            }
            t_row.push(t);
        }
        map.t.push(t_row);
        if !pure_single {
            map.d.push(d_row);
        }
    }

    problem
        .check_structure()
        .map_err(|e| ModelError::Invalid(e.to_string()))?;

    Ok(BuiltModel {
        problem,
        map,
        kind,
        instance: instance.clone(),
        norm_prefs,
        options: options.clone(),
    })
}

impl BuiltModel {
    /// Read coordinates and binaries out of a primal vector; binaries must
    /// be integral within `int_tol`. The objective is recomputed from
    /// coordinates.
    pub fn extract_solution(
        &self,
        u: &[f64],
        int_tol: f64,
        status: SolutionStatus,
    ) -> Result<Solution, ModelError> {
        let inst = &self.instance;
        let read_point = |handles: &[VarHandle]| Point(handles.iter().map(|h| u[h.0]).collect());
        let facilities: Vec<Point> = self.map.x.iter().map(|h| read_point(h)).collect();
        let entries: Vec<Point> = self.map.a.iter().map(|h| read_point(h)).collect();

        let round_bin = |v: VarHandle| -> Result<bool, ModelError> {
            let val = u[v.0];
            if (val - val.round()).abs() > int_tol {
                return Err(ModelError::NonIntegral {
                    label: self.problem.label(v).to_string(),
                    value: val,
                });
            }
            Ok(val.round() == 1.0)
        };

        let mut assignment = vec![0usize; inst.n()];
        if inst.p >= 2 {
            for i in 0..inst.n() {
                let mut chosen = None;
                for j in 0..inst.p {
                    if round_bin(self.map.y[i][j])? {
                        if chosen.is_some() {
                            return Err(ModelError::Invalid(format!(
                                "region {i} assigned to two facilities"
                            )));
                        }
                        chosen = Some(j);
                    }
                }
                assignment[i] = chosen.ok_or_else(|| {
                    ModelError::Invalid(format!("region {i} assigned to no facility"))
                })?;
            }
        }

        let mut collocated = Vec::new();
        for &(i, j, z) in &self.map.z {
            if round_bin(z)? {
                collocated.push((i, j));
            }
        }

        let mut sol = Solution {
            status,
            facilities,
            entries,
            assignment,
            collocated,
            objective: 0.0,
            solver_objective: self
                .problem
                .objective()
                .iter()
                .zip(u)
                .map(|(c, v)| c * v)
                .sum(),
            mip_gap: 0.0,
            wall_time: 0.0,
        };
        sol.objective = self.objective_from_coordinates(&sol);
        Ok(sol)
    }

    /// Objective recomputed from coordinates, bypassing the `d` variables:
    /// a region pays the distance to its facility unless it is the
    /// higher-index member of a collocated pair.
    pub fn objective_from_coordinates(&self, sol: &Solution) -> f64 {
        let inst = &self.instance;
        let mut total = 0.0;
        for i in 0..inst.n() {
            if sol.collocated.iter().any(|&(hi, _)| hi == i) {
                continue;
            }
            let region = &inst.regions[i];
            let x = &sol.facilities[sol.assignment[i]];
            let diff: Vec<f64> = sol.entries[i]
                .0
                .iter()
                .zip(&x.0)
                .map(|(a, b)| a - b)
                .collect();
            let dist = eval_norm(&diff, region.transport_norm);
            let w = match self.kind {
                ModelKind::Assignment => region.weight,
                ModelKind::Collocation => {
                    if self.options.weighted_collocation {
                        region.weight
                    } else {
                        1.0
                    }
                }
            };
            total += w * dist;
        }
        total
    }

    /// Recheck every model constraint from coordinates; the report lists
    /// violations with magnitudes.
    pub fn validate_solution(&self, sol: &Solution) -> ValidationReport {
        let inst = &self.instance;
        let mut violations = Vec::new();
        let tol = 1e-5;

        for i in 0..inst.n() {
            let region = &inst.regions[i];
            let a = &sol.entries[i];
            // membership: ball distance beyond radius, extra SOC slack
            let diff: Vec<f64> = a.0.iter().zip(&region.center.0).map(|(x, c)| x - c).collect();
            let excess = eval_norm(&diff, region.ball_norm) - region.radius;
            if excess > tol {
                violations.push(Violation {
                    what: format!("region {i}: entry point outside the ball"),
                    magnitude: excess,
                });
            }
            for (k, soc) in region.extra_soc.iter().enumerate() {
                if !soc.holds(&a.0, tol) {
                    violations.push(Violation {
                        what: format!("region {i}: extra SOC row {k} violated"),
                        magnitude: f64::NAN,
                    });
                }
            }
            if sol.assignment[i] >= inst.p {
                violations.push(Violation {
                    what: format!("region {i}: facility index out of range"),
                    magnitude: sol.assignment[i] as f64,
                });
            }
            // preference threshold on the normalized scale
            if inst.threshold > 0.0 {
                let np = &self.norm_prefs[i];
                let raw = np.raw_threshold(inst.threshold);
                let ok = match &np.spec {
                    PreferenceSpec::Production(_) => {
                        np.production_threshold_holds(a, raw, 1e-6 * (1.0 + raw.abs()))
                    }
                    _ => match np.evaluate_normalized(a) {
                        Ok(v) => v >= inst.threshold - 1e-6,
                        Err(_) => false,
                    },
                };
                if !ok {
                    let shortfall = match np.evaluate_normalized(a) {
                        Ok(v) => inst.threshold - v,
                        Err(_) => f64::NAN,
                    };
                    violations.push(Violation {
                        what: format!("region {i}: preference threshold not met"),
                        magnitude: shortfall,
                    });
                }
            }
        }

        for &(i, j) in &sol.collocated {
            let l1: f64 = sol.entries[i]
                .0
                .iter()
                .zip(&sol.entries[j].0)
                .map(|(a, b)| (a - b).abs())
                .sum();
            if l1 > 1e-6 {
                violations.push(Violation {
                    what: format!("collocated pair ({i},{j}): entry points differ"),
                    magnitude: l1,
                });
            }
        }

        let recomputed = self.objective_from_coordinates(sol);
        let drift = (recomputed - sol.solver_objective).abs();
        if drift > 1e-5 * (1.0 + recomputed.abs()) {
            violations.push(Violation {
                what: "objective from d-variables drifts from coordinates".into(),
                magnitude: drift,
            });
        }

        ValidationReport { violations }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub what: String,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }

    /// No violation whose magnitude exceeds `tol` (NaN magnitudes count as
    /// violations at any tolerance).
    pub fn clean_above(&self, tol: f64) -> bool {
        self.violations
            .iter()
            .all(|v| v.magnitude.is_finite() && v.magnitude <= tol)
    }

    pub fn worst(&self) -> f64 {
        self.violations
            .iter()
            .map(|v| v.magnitude)
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::NormTag;
    use crate::socp::{BuiltinSolver, SolveStatus};

    fn ball(cx: f64, cy: f64, r: f64) -> Region {
        Region::ball(Point(vec![cx, cy]), r, NormTag::L2, 1.0)
    }

    fn flat_pref() -> PreferenceSpec {
        PreferenceSpec::Linear {
            gamma: vec![1.0, 0.0],
            gamma0: 0.0,
        }
    }

    fn instance(regions: Vec<Region>, p: usize, threshold: f64, collocation: bool) -> Instance {
        let prefs = regions.iter().map(|_| flat_pref()).collect();
        Instance {
            regions,
            prefs,
            p,
            threshold,
            collocation,
            dimension: 2,
            scenario: "l2".into(),
            pref_family: "L".into(),
            seed: 0,
        }
    }

    #[test]
    fn single_region_single_facility_is_free() {
        // Facility inside the region: objective 0.
        let inst = instance(vec![ball(0.0, 0.0, 1.0)], 1, 0.0, false);
        let solver = BuiltinSolver::new();
        let built = build(&inst, ModelKind::Assignment, &BuildOptions::default(), &solver).unwrap();
        assert!(built.map.y.is_empty(), "single facility drops binaries");
        assert!(built.problem.integrality().is_empty());
        let sol = solver
            .solve(&built.problem, &SolverConfig::default())
            .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective.abs() < 1e-5, "{}", sol.objective);
    }

    #[test]
    fn equilateral_triangle_with_radii() {
        // Three radius-0.1 balls at an equilateral triangle, one facility:
        // the Fermat objective √3 shrinks by the three radii.
        let h = 3.0_f64.sqrt() / 2.0;
        let inst = instance(
            vec![ball(0.0, 0.0, 0.1), ball(1.0, 0.0, 0.1), ball(0.5, h, 0.1)],
            1,
            0.0,
            false,
        );
        let solver = BuiltinSolver::new();
        let built = build(&inst, ModelKind::Assignment, &BuildOptions::default(), &solver).unwrap();
        let sol = solver
            .solve(&built.problem, &SolverConfig::default())
            .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        let expected = 3.0_f64.sqrt() - 0.3;
        assert!(
            (sol.objective - expected).abs() < 1e-4,
            "{} vs {expected}",
            sol.objective
        );
        let extracted = built
            .extract_solution(&sol.u, 1e-5, SolutionStatus::Optimal)
            .unwrap();
        assert!((extracted.objective - expected).abs() < 1e-4);
        let report = built.validate_solution(&extracted);
        assert!(report.clean(), "{:?}", report.violations);
    }

    #[test]
    fn relaxation_extraction_and_validation_roundtrip() {
        // Two far-apart regions, two facilities: the relaxation is integral
        // (objective 0, one facility per region).
        let inst = instance(vec![ball(0.0, 0.0, 0.5), ball(10.0, 0.0, 0.5)], 2, 0.0, false);
        let solver = BuiltinSolver::new();
        let built = build(&inst, ModelKind::Assignment, &BuildOptions::default(), &solver).unwrap();
        assert_eq!(built.problem.integrality().len(), 4);
        let sol = solver
            .solve(&built.problem, &SolverConfig::default())
            .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective.abs() < 1e-4, "{}", sol.objective);
    }

    #[test]
    fn collocation_pair_suppresses_duplicate_cost() {
        // Two identical regions far from a third: with collocation the
        // shared entry point halves the duplicated distance.
        let mut regions = vec![ball(0.0, 0.0, 0.5), ball(0.0, 0.0, 0.5)];
        regions.push(ball(0.0, 0.0, 0.5));
        let inst = instance(regions, 1, 0.0, true);
        let solver = BuiltinSolver::new();
        let built = build(&inst, ModelKind::Collocation, &BuildOptions::default(), &solver).unwrap();
        assert_eq!(built.map.z.len(), 3, "three candidate pairs");
        assert!(!built.map.d.is_empty(), "collocation keeps d variables");
    }

    #[test]
    fn non_integral_binary_rejected() {
        let inst = instance(vec![ball(0.0, 0.0, 0.5), ball(4.0, 0.0, 0.5)], 2, 0.0, false);
        let solver = BuiltinSolver::new();
        let built = build(&inst, ModelKind::Assignment, &BuildOptions::default(), &solver).unwrap();
        let mut u = vec![0.0; built.problem.num_vars()];
        u[built.map.y[0][0].0] = 0.4;
        let err = built
            .extract_solution(&u, 1e-5, SolutionStatus::Optimal)
            .unwrap_err();
        assert!(matches!(err, ModelError::NonIntegral { .. }));
        // within int_tol rounds cleanly
        let mut u2 = vec![0.0; built.problem.num_vars()];
        u2[built.map.y[0][0].0] = 1.0 - 1e-7;
        u2[built.map.y[1][1].0] = 1.0;
        let sol = built.extract_solution(&u2, 1e-5, SolutionStatus::Optimal);
        assert!(sol.is_ok());
    }

    #[test]
    fn hand_built_violations_reported() {
        let inst = instance(vec![ball(0.0, 0.0, 1.0)], 1, 0.2, false);
        let solver = BuiltinSolver::new();
        let built = build(&inst, ModelKind::Assignment, &BuildOptions::default(), &solver).unwrap();
        // entry point outside the ball by 0.1 and below the threshold
        let sol = Solution {
            status: SolutionStatus::Feasible,
            facilities: vec![Point(vec![0.0, 0.0])],
            entries: vec![Point(vec![-1.1, 0.0])],
            assignment: vec![0],
            collocated: vec![],
            objective: 1.1,
            solver_objective: 1.1,
            mip_gap: 0.0,
            wall_time: 0.0,
        };
        let report = built.validate_solution(&sol);
        assert!(!report.clean());
        let membership = report
            .violations
            .iter()
            .find(|v| v.what.contains("outside the ball"))
            .expect("membership violation");
        assert!((membership.magnitude - 0.1).abs() < 1e-9);
        assert!(report
            .violations
            .iter()
            .any(|v| v.what.contains("threshold")));
    }

    #[test]
    fn threshold_shrinks_feasible_entries() {
        // Φ* = 0.8 with γ = (1,0) on the unit ball forces a₁ ≥ 0.6; a
        // facility at (−2, 0) then pays at least 2.6.
        let inst = instance(vec![ball(0.0, 0.0, 1.0)], 1, 0.8, false);
        let solver = BuiltinSolver::new();
        let mut built =
            build(&inst, ModelKind::Assignment, &BuildOptions::default(), &solver).unwrap();
        for k in 0..2 {
            let x = built.map.x[0][k];
            built.problem.fix_var(x, if k == 0 { -2.0 } else { 0.0 });
        }
        let sol = solver
            .solve(&built.problem, &SolverConfig::default())
            .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 2.6).abs() < 1e-3, "{}", sol.objective);
    }
}
