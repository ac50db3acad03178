//! Branch-and-bound over the binary variables (assignments, collocation
//! indicators, cell selectors) with the continuous conic relaxation as the
//! node bound.
//!
//! Nodes fix binaries by editing the right-hand sides of their box rows, so
//! the engine's cached KKT factorization survives the whole tree. The search
//! dives on the preferred child after every branching (siblings go to the
//! queue) and restarts from the queue according to the node-selection rule.
//! A rounding heuristic runs at every solved node. Single-threaded and
//! deterministic: all tie-breaks fall back to creation order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::conic::VarHandle;
use crate::model::{BinaryClass, BuiltModel, ModelError, Solution, SolutionStatus};
use crate::socp::{ConicSolution, ContinuousSolver, SolveError, SolveStatus, SolverConfig};

#[derive(Debug, Error)]
pub enum BnbError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("relaxation reported unbounded; the model objective is bounded below, this is a modeling bug")]
    Unbounded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeSelection {
    BestBound,
    DepthFirstPlunge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branching {
    MostFractional,
    LabelPriority,
}

#[derive(Debug, Clone)]
pub struct BnBConfig {
    pub rel_gap: f64,
    /// Absolute gap companion so near-zero incumbents close despite
    /// solver-level noise in the bound.
    pub abs_gap: f64,
    pub int_tol: f64,
    /// Wall-clock budget in seconds.
    pub time_limit: f64,
    pub node_limit: usize,
    pub node_selection: NodeSelection,
    pub branching: Branching,
    pub solver_config: SolverConfig,
    /// Keep per-node progress rows (node, bound, incumbent, gap, time).
    pub keep_log: bool,
}

impl Default for BnBConfig {
    fn default() -> Self {
        BnBConfig {
            rel_gap: 1e-4,
            abs_gap: 1e-6,
            int_tol: 1e-5,
            time_limit: 3600.0,
            node_limit: usize::MAX,
            node_selection: NodeSelection::BestBound,
            branching: Branching::LabelPriority,
            solver_config: SolverConfig::default(),
            keep_log: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiStatus {
    Optimal,
    /// Stopped at a limit with an incumbent.
    Feasible,
    InfeasibleProven,
    NoSolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    TimeLimit,
    NodeLimit,
}

/// One progress row per solved node.
#[derive(Debug, Clone)]
pub struct NodeLog {
    pub node: usize,
    pub depth: usize,
    pub parent_bound: f64,
    pub bound: f64,
    pub incumbent: Option<f64>,
    pub gap: f64,
    pub time: f64,
}

#[derive(Debug, Clone)]
pub struct MiSolution {
    pub status: MiStatus,
    pub incumbent: Option<Solution>,
    pub best_bound: f64,
    pub mip_gap: f64,
    pub nodes: usize,
    pub wall_time: f64,
    pub stop_reason: Option<StopReason>,
    /// Nodes closed without optimality or infeasibility certification
    /// (relaxation hit its iteration limit at a fully fixed node).
    pub uncertified_closures: usize,
    pub log: Vec<NodeLog>,
}

struct Node {
    fixings: Vec<(VarHandle, bool)>,
    bound: f64,
    depth: usize,
    seq: u64,
    warm: Option<Arc<ConicSolution>>,
}

/// Heap entry ordered for a max-heap pop: best bound (smallest) first, or
/// deepest-created first for plunging; ties by creation order.
struct QueueEntry {
    node: Node,
    selection: NodeSelection,
}

impl PartialEq for QueueEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for QueueEntry {}
impl PartialOrd for QueueEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueueEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.selection {
            NodeSelection::BestBound => other
                .node
                .bound
                .partial_cmp(&self.node.bound)
                .unwrap_or(Ordering::Equal)
                .then(other.node.seq.cmp(&self.node.seq)),
            NodeSelection::DepthFirstPlunge => self.node.seq.cmp(&other.node.seq),
        }
    }
}

fn fractionality(v: f64) -> f64 {
    let v = v.clamp(0.0, 1.0);
    v.min(1.0 - v)
}

/// Pick the branching variable among the fractional binaries.
///
/// `MostFractional` maximizes `min(v, 1−v)`. `LabelPriority` prefers
/// assignment over cell-selector over collocation binaries, most-fractional
/// within a class. All ties break to the lowest variable index.
pub fn branch_select(
    u: &[f64],
    binaries: &[(VarHandle, BinaryClass)],
    branching: Branching,
    int_tol: f64,
) -> Option<VarHandle> {
    let class_rank = |c: BinaryClass| match c {
        BinaryClass::Assignment => 0,
        BinaryClass::CellSelector => 1,
        BinaryClass::Collocation => 2,
    };
    let mut best: Option<(usize, f64, VarHandle)> = None;
    for &(v, class) in binaries {
        let f = fractionality(u[v.0]);
        if f <= int_tol {
            continue;
        }
        let rank = match branching {
            Branching::MostFractional => 0,
            Branching::LabelPriority => class_rank(class),
        };
        let better = match best {
            None => true,
            Some((brank, bf, bv)) => (rank, -f, v.0) < (brank, -bf, bv.0),
        };
        if better {
            best = Some((rank, f, v));
        }
    }
    best.map(|(_, _, v)| v)
}

/// Round a relaxation into a full fixing vector: assignment rows to their
/// arg-max facility (ties to the lowest index), cell selectors to the
/// arg-max cell per factor, collocation binaries to the nearest integer.
pub fn round_from_relaxation(built: &BuiltModel, u: &[f64]) -> Vec<(VarHandle, bool)> {
    let mut fixings = Vec::new();
    for row in &built.map.y {
        let mut best = 0usize;
        for (j, &h) in row.iter().enumerate() {
            if u[h.0] > u[row[best].0] + 1e-12 {
                best = j;
            }
        }
        for (j, &h) in row.iter().enumerate() {
            fixings.push((h, j == best));
        }
    }
    for region in &built.map.xi {
        for factor in region {
            let mut best = 0usize;
            for (l, &h) in factor.iter().enumerate() {
                if u[h.0] > u[factor[best].0] + 1e-12 {
                    best = l;
                }
            }
            for (l, &h) in factor.iter().enumerate() {
                fixings.push((h, l == best));
            }
        }
    }
    for &(_, _, z) in &built.map.z {
        fixings.push((z, u[z.0] >= 0.5));
    }
    fixings
}

fn apply_fixings(built: &mut BuiltModel, fixings: &[(VarHandle, bool)]) {
    let bins: Vec<usize> = built.problem.integrality().to_vec();
    for ix in bins {
        built.problem.set_binary_bounds(VarHandle(ix), 0.0, 1.0);
    }
    for &(v, val) in fixings {
        let b = if val { 1.0 } else { 0.0 };
        built.problem.set_binary_bounds(v, b, b);
    }
}

/// Solver configuration for incumbent polish: binaries are fixed, so the
/// continuous re-solve can afford tight tolerances, which keeps extracted
/// incumbents inside the 1e-5 validation band.
fn polish_config(config: &BnBConfig) -> SolverConfig {
    SolverConfig {
        eps_primal: config.solver_config.eps_primal.min(1e-8),
        eps_dual: config.solver_config.eps_dual.min(1e-8),
        eps_gap: config.solver_config.eps_gap.min(1e-8),
        ..config.solver_config.clone()
    }
}

/// Fix all binaries per the rounded relaxation, re-solve the continuous
/// problem tightly, and return the solution if it validates within the
/// 1e-5 feasibility band.
pub fn rounding_heuristic(
    built: &mut BuiltModel,
    relaxation: &ConicSolution,
    node_fixings: &[(VarHandle, bool)],
    engine: &dyn ContinuousSolver,
    config: &BnBConfig,
) -> Option<Solution> {
    let fixings = round_from_relaxation(built, &relaxation.u);
    apply_fixings(built, &fixings);
    let result = engine.solve_warm(&built.problem, &polish_config(config), Some(relaxation));
    apply_fixings(built, node_fixings);
    let sol = result.ok()?;
    if sol.status != SolveStatus::Optimal {
        return None;
    }
    let extracted = built
        .extract_solution(&sol.u, config.int_tol, SolutionStatus::Feasible)
        .ok()?;
    if !built.validate_solution(&extracted).clean_above(1e-5) {
        return None;
    }
    Some(extracted)
}

/// Solve the mixed-integer model. Delegates to the continuous engine when
/// the problem carries no binaries.
pub fn solve_mi(
    built: &mut BuiltModel,
    config: &BnBConfig,
    engine: &dyn ContinuousSolver,
) -> Result<MiSolution, BnbError> {
    let start = Instant::now();
    let binaries: Vec<(VarHandle, BinaryClass)> = built
        .problem
        .integrality()
        .to_vec()
        .into_iter()
        .map(|ix| {
            let h = VarHandle(ix);
            let class = built
                .map
                .binary_class(h)
                .unwrap_or(BinaryClass::Assignment);
            (h, class)
        })
        .collect();

    let mut solver_config = config.solver_config.clone();
    solver_config.time_limit = Some(config.time_limit);

    if binaries.is_empty() {
        let relax = engine.solve(&built.problem, &solver_config)?;
        return Ok(match relax.status {
            SolveStatus::Optimal => {
                let sol =
                    built.extract_solution(&relax.u, config.int_tol, SolutionStatus::Optimal)?;
                MiSolution {
                    status: MiStatus::Optimal,
                    best_bound: sol.objective,
                    mip_gap: 0.0,
                    nodes: 1,
                    wall_time: start.elapsed().as_secs_f64(),
                    stop_reason: None,
                    uncertified_closures: 0,
                    log: Vec::new(),
                    incumbent: Some(sol),
                }
            }
            SolveStatus::Infeasible => MiSolution {
                status: MiStatus::InfeasibleProven,
                incumbent: None,
                best_bound: f64::INFINITY,
                mip_gap: f64::NAN,
                nodes: 1,
                wall_time: start.elapsed().as_secs_f64(),
                stop_reason: None,
                uncertified_closures: 0,
                log: Vec::new(),
            },
            SolveStatus::Unbounded => return Err(BnbError::Unbounded),
            _ => MiSolution {
                status: MiStatus::NoSolution,
                incumbent: None,
                best_bound: f64::NEG_INFINITY,
                mip_gap: f64::NAN,
                nodes: 1,
                wall_time: start.elapsed().as_secs_f64(),
                stop_reason: Some(StopReason::TimeLimit),
                uncertified_closures: 0,
                log: Vec::new(),
            },
        });
    }

    let mut queue: BinaryHeap<QueueEntry> = BinaryHeap::new();
    let mut incumbent: Option<Solution> = None;
    let mut nodes = 0usize;
    let mut seq = 0u64;
    let mut uncertified = 0usize;
    let mut stop_reason = None;
    let mut log = Vec::new();

    let gap_of = |inc: f64, bound: f64| (inc - bound) / f64::max(1e-10, inc.abs());
    let prunable = |inc: &Option<Solution>, bound: f64| match inc {
        Some(s) => {
            let slack = s.objective - bound;
            slack <= config.rel_gap * f64::max(1e-10, s.objective.abs()) || slack <= config.abs_gap
        }
        None => false,
    };

    let mut current = Some(Node {
        fixings: Vec::new(),
        bound: f64::NEG_INFINITY,
        depth: 0,
        seq: 0,
        warm: None,
    });

    loop {
        let node = match current.take() {
            Some(n) => Some(n),
            None => loop {
                match queue.pop() {
                    None => break None,
                    Some(e) => {
                        if prunable(&incumbent, e.node.bound) {
                            continue;
                        }
                        break Some(e.node);
                    }
                }
            },
        };
        let Some(node) = node else { break };

        if start.elapsed().as_secs_f64() > config.time_limit {
            stop_reason = Some(StopReason::TimeLimit);
            queue.push(QueueEntry {
                node,
                selection: config.node_selection,
            });
            break;
        }
        if nodes >= config.node_limit {
            stop_reason = Some(StopReason::NodeLimit);
            queue.push(QueueEntry {
                node,
                selection: config.node_selection,
            });
            break;
        }

        nodes += 1;
        apply_fixings(built, &node.fixings);
        let relax = engine.solve_warm(&built.problem, &solver_config, node.warm.as_deref())?;

        let (bound, solved) = match relax.status {
            SolveStatus::Optimal => (relax.objective.max(node.bound), true),
            SolveStatus::Infeasible => {
                if config.keep_log {
                    log.push(NodeLog {
                        node: nodes,
                        depth: node.depth,
                        parent_bound: node.bound,
                        bound: f64::INFINITY,
                        incumbent: incumbent.as_ref().map(|s| s.objective),
                        gap: f64::NAN,
                        time: start.elapsed().as_secs_f64(),
                    });
                }
                continue;
            }
            SolveStatus::Unbounded => return Err(BnbError::Unbounded),
            SolveStatus::IterLimit | SolveStatus::TimeLimit => (node.bound, false),
        };

        if config.keep_log {
            log.push(NodeLog {
                node: nodes,
                depth: node.depth,
                parent_bound: node.bound,
                bound,
                incumbent: incumbent.as_ref().map(|s| s.objective),
                gap: incumbent
                    .as_ref()
                    .map(|s| gap_of(s.objective, bound))
                    .unwrap_or(f64::NAN),
                time: start.elapsed().as_secs_f64(),
            });
        }

        if prunable(&incumbent, bound) {
            continue;
        }

        let branch_var = branch_select(&relax.u, &binaries, config.branching, config.int_tol);

        match branch_var {
            None => {
                // No fractional binary left: polish at the leaf fixings and
                // accept within the feasibility band. A leaf that fails
                // either way is counted rather than silently dropped — its
                // subtree may hold the optimum.
                let mut accepted = false;
                if solved {
                    let leaf_fixings = round_from_relaxation(built, &relax.u);
                    apply_fixings(built, &leaf_fixings);
                    let polished =
                        engine.solve_warm(&built.problem, &polish_config(config), Some(&relax));
                    apply_fixings(built, &node.fixings);
                    if let Ok(psol) = polished {
                        if psol.status == SolveStatus::Optimal {
                            if let Ok(sol) = built.extract_solution(
                                &psol.u,
                                config.int_tol,
                                SolutionStatus::Feasible,
                            ) {
                                if built.validate_solution(&sol).clean_above(1e-5) {
                                    accepted = true;
                                    let better = incumbent
                                        .as_ref()
                                        .map(|inc| sol.objective < inc.objective)
                                        .unwrap_or(true);
                                    if better {
                                        incumbent = Some(sol);
                                    }
                                }
                            }
                        }
                    }
                }
                if !accepted {
                    // Iteration-limited or validation-rejected leaf: neither
                    // feasible nor proven infeasible; the final status is
                    // downgraded.
                    uncertified += 1;
                }
                continue;
            }
            Some(var) => {
                // The heuristic costs one extra continuous solve; run it
                // until an incumbent exists and periodically below that.
                let try_heuristic = incumbent.is_none() || node.depth % 4 == 0;
                if solved && try_heuristic {
                    if let Some(sol) =
                        rounding_heuristic(built, &relax, &node.fixings, engine, config)
                    {
                        let better = incumbent
                            .as_ref()
                            .map(|inc| sol.objective < inc.objective)
                            .unwrap_or(true);
                        if better {
                            incumbent = Some(sol);
                        }
                    }
                    if prunable(&incumbent, bound) {
                        continue;
                    }
                }
                // Dive on the rounding-preferred child; sibling to the queue.
                let prefer = relax.u[var.0] >= 0.5;
                let warm = Arc::new(relax);
                let mut child_fix = node.fixings.clone();
                child_fix.push((var, prefer));
                let mut sibling_fix = node.fixings.clone();
                sibling_fix.push((var, !prefer));
                seq += 1;
                let preferred = Node {
                    fixings: child_fix,
                    bound,
                    depth: node.depth + 1,
                    seq,
                    warm: Some(warm.clone()),
                };
                seq += 1;
                queue.push(QueueEntry {
                    node: Node {
                        fixings: sibling_fix,
                        bound,
                        depth: node.depth + 1,
                        seq,
                        warm: Some(warm),
                    },
                    selection: config.node_selection,
                });
                current = Some(preferred);
            }
        }
    }

    // Restore the relaxed boxes.
    apply_fixings(built, &[]);

    let open_bound = queue
        .iter()
        .map(|e| e.node.bound)
        .fold(f64::INFINITY, f64::min);
    let wall_time = start.elapsed().as_secs_f64();

    let (status, best_bound, mip_gap) = match (&incumbent, stop_reason) {
        (Some(inc), None) => {
            let bb = if queue.is_empty() {
                inc.objective
            } else {
                open_bound.min(inc.objective)
            };
            let status = if uncertified == 0 {
                MiStatus::Optimal
            } else {
                MiStatus::Feasible
            };
            (status, bb, gap_of(inc.objective, bb))
        }
        (Some(inc), Some(_)) => {
            let bb = open_bound.min(inc.objective);
            (MiStatus::Feasible, bb, gap_of(inc.objective, bb))
        }
        (None, None) => {
            let status = if uncertified == 0 {
                MiStatus::InfeasibleProven
            } else {
                MiStatus::NoSolution
            };
            (status, f64::INFINITY, f64::NAN)
        }
        (None, Some(_)) => (MiStatus::NoSolution, open_bound, f64::NAN),
    };

    let mut incumbent = incumbent;
    if let Some(sol) = incumbent.as_mut() {
        sol.mip_gap = mip_gap;
        sol.wall_time = wall_time;
        sol.status = if status == MiStatus::Optimal {
            SolutionStatus::Optimal
        } else {
            SolutionStatus::Feasible
        };
    }

    Ok(MiSolution {
        status,
        incumbent,
        best_bound,
        mip_gap,
        nodes,
        wall_time,
        stop_reason,
        uncertified_closures: uncertified,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{NormTag, Point, Region};
    use crate::model::{build, BuildOptions, Instance, ModelKind};
    use crate::prefs::PreferenceSpec;
    use crate::socp::BuiltinSolver;

    fn ball(cx: f64, cy: f64, r: f64) -> Region {
        Region::ball(Point(vec![cx, cy]), r, NormTag::L2, 1.0)
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
    fn branch_select_rules() {
        let bins = vec![
            (VarHandle(0), BinaryClass::Assignment),
            (VarHandle(1), BinaryClass::Assignment),
        ];
        // most fractional wins
        let u = vec![0.5, 0.9];
        assert_eq!(
            branch_select(&u, &bins, Branching::MostFractional, 1e-5),
            Some(VarHandle(0))
        );
        // exact tie: lowest index
        let u = vec![0.5, 0.5];
        assert_eq!(
            branch_select(&u, &bins, Branching::MostFractional, 1e-5),
            Some(VarHandle(0))
        );
        // label priority: the assignment binary beats a more fractional z
        let bins = vec![
            (VarHandle(0), BinaryClass::Collocation),
            (VarHandle(1), BinaryClass::Assignment),
        ];
        let u = vec![0.5, 0.7];
        assert_eq!(
            branch_select(&u, &bins, Branching::LabelPriority, 1e-5),
            Some(VarHandle(1))
        );
        // nothing fractional
        let u = vec![1.0, 0.0];
        assert_eq!(branch_select(&u, &bins, Branching::LabelPriority, 1e-5), None);
    }

    #[test]
    fn two_regions_two_facilities_zero_cost() {
        let inst = instance(vec![ball(0.0, 0.0, 0.3), ball(5.0, 0.0, 0.3)], 2);
        let solver = BuiltinSolver::new();
        let mut built =
            build(&inst, ModelKind::Assignment, &BuildOptions::default(), &solver).unwrap();
        let mi = solve_mi(&mut built, &BnBConfig::default(), &solver).unwrap();
        assert_eq!(mi.status, MiStatus::Optimal);
        let sol = mi.incumbent.unwrap();
        assert!(sol.objective.abs() < 1e-5, "{}", sol.objective);
        assert!(mi.mip_gap <= 1e-4);
    }

    #[test]
    fn root_closes_in_one_node_when_heuristic_is_exact() {
        // Overlapping regions, p = 2: the optimum is 0 and the rounding
        // heuristic reaches it at the root, so no branching happens.
        let inst = instance(vec![ball(0.0, 0.0, 0.4), ball(0.1, 0.0, 0.4)], 2);
        let solver = BuiltinSolver::new();
        let mut built =
            build(&inst, ModelKind::Assignment, &BuildOptions::default(), &solver).unwrap();
        let mi = solve_mi(&mut built, &BnBConfig::default(), &solver).unwrap();
        assert_eq!(mi.status, MiStatus::Optimal);
        assert!(mi.incumbent.unwrap().objective.abs() < 1e-5);
        assert_eq!(mi.nodes, 1, "expected the root to close");
    }

    #[test]
    fn matches_manual_enumeration() {
        // Three clustered regions, two facilities: enumerate all assignment
        // patterns by fixing binaries and compare objectives.
        let regions = vec![ball(0.0, 0.0, 0.1), ball(2.0, 0.0, 0.1), ball(1.0, 1.5, 0.1)];
        let inst = instance(regions, 2);
        let solver = BuiltinSolver::new();
        let mut built = build(
            &inst,
            ModelKind::Assignment,
            &BuildOptions {
                symmetry_breaking: Some(false),
                ..BuildOptions::default()
            },
            &solver,
        )
        .unwrap();

        let mut best = f64::INFINITY;
        for pattern in 0..8u32 {
            let mut fixings = Vec::new();
            for i in 0..3 {
                let j = ((pattern >> i) & 1) as usize;
                fixings.push((built.map.y[i][j], true));
                fixings.push((built.map.y[i][1 - j], false));
            }
            apply_fixings(&mut built, &fixings);
            let sol = solver
                .solve(&built.problem, &SolverConfig::default())
                .unwrap();
            if sol.status == SolveStatus::Optimal {
                best = best.min(sol.objective);
            }
        }
        apply_fixings(&mut built, &[]);

        let mi = solve_mi(&mut built, &BnBConfig::default(), &solver).unwrap();
        assert_eq!(mi.status, MiStatus::Optimal);
        let obj = mi.incumbent.as_ref().unwrap().objective;
        let rel = (obj - best).abs() / best.max(1e-9);
        assert!(rel < 1e-4, "bnb {obj} vs enumeration {best}");
    }

    #[test]
    fn node_log_bounds_are_monotone() {
        let regions = vec![
            ball(0.0, 0.0, 0.1),
            ball(2.0, 0.0, 0.1),
            ball(1.0, 1.5, 0.1),
            ball(0.5, -1.2, 0.1),
        ];
        let inst = instance(regions, 2);
        let solver = BuiltinSolver::new();
        let mut built =
            build(&inst, ModelKind::Assignment, &BuildOptions::default(), &solver).unwrap();
        let cfg = BnBConfig {
            keep_log: true,
            ..BnBConfig::default()
        };
        let mi = solve_mi(&mut built, &cfg, &solver).unwrap();
        assert_eq!(mi.status, MiStatus::Optimal);
        for row in &mi.log {
            if row.bound.is_finite() && row.parent_bound.is_finite() {
                assert!(
                    row.bound >= row.parent_bound - 1e-6 * (1.0 + row.parent_bound.abs()),
                    "child bound {} below parent {}",
                    row.bound,
                    row.parent_bound
                );
            }
        }
        // incumbent validated at every acceptance
        let sol = mi.incumbent.unwrap();
        assert!(built.validate_solution(&sol).clean());
    }

    #[test]
    fn determinism_same_node_counts() {
        let regions = vec![ball(0.0, 0.0, 0.1), ball(2.0, 0.0, 0.1), ball(1.0, 1.5, 0.1)];
        let inst = instance(regions, 2);
        let solver = BuiltinSolver::new();
        let run = || {
            let mut built = build(
                &inst,
                ModelKind::Assignment,
                &BuildOptions::default(),
                &solver,
            )
            .unwrap();
            let mi = solve_mi(&mut built, &BnBConfig::default(), &solver).unwrap();
            (mi.nodes, mi.incumbent.unwrap().objective)
        };
        let (n1, o1) = run();
        let (n2, o2) = run();
        assert_eq!(n1, n2);
        assert!((o1 - o2).abs() < 1e-9);
    }

    #[test]
    fn rounding_heuristic_respects_argmax() {
        let inst = instance(vec![ball(0.0, 0.0, 0.2), ball(3.0, 0.0, 0.2)], 2);
        let solver = BuiltinSolver::new();
        let built =
            build(&inst, ModelKind::Assignment, &BuildOptions::default(), &solver).unwrap();
        let mut u = vec![0.0; built.problem.num_vars()];
        u[built.map.y[0][0].0] = 0.6;
        u[built.map.y[0][1].0] = 0.4;
        u[built.map.y[1][0].0] = 0.5; // tie goes to the lower index
        u[built.map.y[1][1].0] = 0.5;
        let fixings = round_from_relaxation(&built, &u);
        let lookup = |h: VarHandle| fixings.iter().find(|(v, _)| *v == h).unwrap().1;
        assert!(lookup(built.map.y[0][0]));
        assert!(!lookup(built.map.y[0][1]));
        assert!(lookup(built.map.y[1][0]));
        assert!(!lookup(built.map.y[1][1]));
    }
}
