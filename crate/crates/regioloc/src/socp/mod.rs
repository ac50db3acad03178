//! Continuous conic solver: operator splitting (ADMM) over the standard form
//!
//! ```text
//! min cᵀu   s.t.  A·u + s = b,  s ∈ K
//! ```
//!
//! Each iteration solves the cached quasi-definite KKT system
//! `[[ρI, Aᵀ],[A, −I/ρ]]`, projects the slack onto the cone product, and
//! updates the dual `y = ρ(Π_K(v) − v)`, which lies in the dual cone by the
//! Moreau decomposition. Over-relaxation and cone-aware Ruiz equilibration
//! are on by default. Divergence certificates flag infeasible and unbounded
//! problems.
//!
//! The solver sits behind the [`ContinuousSolver`] trait so an external
//! engine can replace it; the built-in engine caches its KKT factorization
//! across solves that share a constraint matrix (branch-and-bound nodes
//! differ only in `b`).

mod cones;
mod kkt;
mod ruiz;
mod sparse;

pub use cones::{project_all, project_all_dual, project_cone, project_dual_cone};
pub use kkt::{factorize_kkt, KktError, KktFactor, KktWorkspace};
pub use sparse::CscMatrix;

use std::sync::Mutex;
use std::time::Instant;

use thiserror::Error;

use crate::conic::{Cone, ConicProblem};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("structurally malformed problem: {0}")]
    Malformed(String),
    #[error(transparent)]
    Kkt(#[from] KktError),
    #[error("external engine failure: {0}")]
    Engine(String),
}

/// Solver parameters. Tolerances are relative, per the termination criteria
/// documented on [`solve`].
#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub eps_gap: f64,
    pub max_iter: usize,
    /// ADMM penalty; also the proximal weight in the KKT system.
    pub rho: f64,
    /// Rebalance ρ against the primal/dual residual ratio, refactorizing
    /// the KKT system when it drifts; stalls on big-M rows otherwise.
    pub adaptive_rho: bool,
    /// Over-relaxation α ∈ [1, 2).
    pub over_relaxation: f64,
    /// Ruiz equilibration toggle.
    pub scaling: bool,
    /// Normalized certificate tolerance for infeasibility/unboundedness.
    pub eps_certificate: f64,
    /// Optional wall-clock budget in seconds.
    pub time_limit: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eps_primal: 1e-6,
            eps_dual: 1e-6,
            eps_gap: 1e-6,
            max_iter: 100_000,
            rho: 1.0,
            adaptive_rho: true,
            over_relaxation: 1.6,
            scaling: true,
            eps_certificate: 1e-7,
            time_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterLimit,
    TimeLimit,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Solution of a continuous conic solve, in the original (unscaled) data.
#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
}

/// Anything that can answer a continuous conic solve. Implementations must
/// be shareable across threads.
pub trait ContinuousSolver: Sync {
    fn solve(&self, problem: &ConicProblem, config: &SolverConfig)
        -> Result<ConicSolution, SolveError>;

    /// Solve with a warm-start hint; the default ignores it.
    fn solve_warm(
        &self,
        problem: &ConicProblem,
        config: &SolverConfig,
        warm: Option<&ConicSolution>,
    ) -> Result<ConicSolution, SolveError> {
        let _ = warm;
        self.solve(problem, config)
    }
}

/// Built-in ADMM engine with a KKT factorization cache keyed on the
/// constraint matrix fingerprint, so branch-and-bound nodes that only edit
/// `b` reuse one factorization.
#[derive(Default)]
pub struct BuiltinSolver {
    cache: Mutex<Option<CachedProblem>>,
}

impl BuiltinSolver {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ContinuousSolver for BuiltinSolver {
    fn solve(
        &self,
        problem: &ConicProblem,
        config: &SolverConfig,
    ) -> Result<ConicSolution, SolveError> {
        self.solve_warm(problem, config, None)
    }

    fn solve_warm(
        &self,
        problem: &ConicProblem,
        config: &SolverConfig,
        warm: Option<&ConicSolution>,
    ) -> Result<ConicSolution, SolveError> {
        let fp = fingerprint(problem, config);
        let mut guard = self.cache.lock().unwrap();
        let rebuild = match guard.as_ref() {
            Some(c) => c.fingerprint != fp,
            None => true,
        };
        if rebuild {
            *guard = Some(CachedProblem::build(problem, config, fp)?);
        }
        let cached = guard.as_ref().unwrap();
        admm(problem, cached, config, warm)
    }
}

/// One-shot convenience entry point.
pub fn solve(problem: &ConicProblem, config: &SolverConfig) -> Result<ConicSolution, SolveError> {
    BuiltinSolver::new().solve(problem, config)
}

fn fingerprint(problem: &ConicProblem, config: &SolverConfig) -> u64 {
    // Every word is diffused through a 64-bit mixer before absorption; a
    // plain xor-multiply hash lets paired sign-bit flips cancel.
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    let mut eat = |x: u64| {
        h = crate::rng::mix(h ^ crate::rng::mix(x));
    };
    eat(problem.num_vars() as u64);
    eat(problem.num_rows() as u64);
    eat(problem.triplets().len() as u64);
    for &(r, c, v) in problem.triplets() {
        eat(r as u64);
        eat(c as u64);
        eat(v.to_bits());
    }
    for o in problem.objective() {
        eat(o.to_bits());
    }
    for cone in problem.cones() {
        eat(cone.dim as u64);
        eat(cone.kind as u64);
    }
    eat(config.rho.to_bits());
    eat(config.scaling as u64);
    h
}

/// Scaled data plus the factorization, reusable while only `b` changes.
struct CachedProblem {
    fingerprint: u64,
    /// Scaled constraint matrix.
    a: CscMatrix,
    /// Unscaled constraint matrix for residual checks.
    a_raw: CscMatrix,
    scaling: ruiz::Scaling,
    c_scaled: Vec<f64>,
    scaled_triplets: Vec<(usize, usize, f64)>,
    factor: KktFactor,
    cones: Vec<Cone>,
}

impl CachedProblem {
    fn build(problem: &ConicProblem, config: &SolverConfig, fp: u64) -> Result<Self, SolveError> {
        problem
            .check_structure()
            .map_err(|e| SolveError::Malformed(e.to_string()))?;
        let n = problem.num_vars();
        let m = problem.num_rows();
        if n == 0 || m == 0 {
            return Err(SolveError::Malformed("empty problem".into()));
        }
        let cones = problem.cones().to_vec();
        let a_raw = CscMatrix::from_triplets(m, n, problem.triplets());
        let scaling = if config.scaling {
            ruiz::equilibrate(problem.triplets(), m, n, &cones, 10)
        } else {
            ruiz::Scaling::identity(m, n)
        };
        let scaled_trips: Vec<(usize, usize, f64)> = problem
            .triplets()
            .iter()
            .map(|&(r, c, v)| (r, c, scaling.d[r] * v * scaling.e[c]))
            .collect();
        let a = CscMatrix::from_triplets(m, n, &scaled_trips);
        let c_scaled: Vec<f64> = problem
            .objective()
            .iter()
            .zip(&scaling.e)
            .map(|(c, e)| c * e)
            .collect();
        let factor = KktFactor::new(n, m, &scaled_trips, config.rho)?;
        Ok(CachedProblem {
            fingerprint: fp,
            a,
            a_raw,
            scaling,
            c_scaled,
            scaled_triplets: scaled_trips,
            factor,
            cones,
        })
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// The ADMM loop. See the module docs for the splitting; the dual iterate
/// satisfies `y ∈ K*` exactly at every iteration.
fn admm(
    problem: &ConicProblem,
    cached: &CachedProblem,
    config: &SolverConfig,
    warm: Option<&ConicSolution>,
) -> Result<ConicSolution, SolveError> {
    let start = Instant::now();
    let n = cached.a.ncols;
    let m = cached.a.nrows;
    let mut rho = config.rho;
    // Residual rebalancing swaps in a locally refactorized KKT system.
    let mut local_factor: Option<KktFactor> = None;
    let mut last_adapt = 0usize;
    let alpha = config.over_relaxation;
    let d = &cached.scaling.d;
    let e = &cached.scaling.e;

    // Scaled b (refreshed every call: bound rows change between node solves).
    let b_raw = problem.rhs();
    let b_scaled: Vec<f64> = b_raw.iter().zip(d).map(|(b, dr)| b * dr).collect();
    let c_raw = problem.objective();
    let norm_b = norm2(b_raw);
    let norm_c = norm2(c_raw);

    // State (scaled). Warm starts arrive unscaled.
    let mut u = vec![0.0; n];
    let mut s = vec![0.0; m];
    let mut y = vec![0.0; m];
    if let Some(w) = warm {
        if w.u.len() == n && w.s.len() == m {
            for i in 0..n {
                u[i] = w.u[i] / e[i];
            }
            for r in 0..m {
                s[r] = w.s[r] * d[r];
                y[r] = w.y[r] / d[r];
            }
        }
    }

    let mut ws = KktWorkspace::new(n + m);
    let mut rhs = vec![0.0; n + m];
    let mut aty = vec![0.0; m.max(n)];
    let mut au = vec![0.0; m];
    let mut v = vec![0.0; m];

    // Unscaled views for residual checks.
    let mut u_raw = vec![0.0; n];
    let mut s_raw = vec![0.0; m];
    let mut y_raw = vec![0.0; m];
    let mut work_m = vec![0.0; m];
    let mut work_n = vec![0.0; n];
    let mut u_prev_raw = vec![0.0; n];
    let mut y_prev_raw = vec![0.0; m];
    let mut cert_work = vec![0.0; n.max(m)];

    let check_every = 25;
    let mut iter = 0;
    let mut status = SolveStatus::IterLimit;
    let mut residuals = Residuals::default();

    while iter < config.max_iter {
        iter += 1;

        // u-update through the cached KKT factorization.
        cached.a.matvec_t(&y, &mut aty[..n]);
        for i in 0..n {
            rhs[i] = rho * u[i] - cached.c_scaled[i] - aty[i];
        }
        for r in 0..m {
            rhs[n + r] = b_scaled[r] - s[r];
        }
        local_factor
            .as_ref()
            .unwrap_or(&cached.factor)
            .solve(&mut rhs, &mut ws);
        u.copy_from_slice(&rhs[..n]);
        // A·u recovered from the second KKT block: w = ρ(Au − b + s).
        for r in 0..m {
            au[r] = rhs[n + r] / rho + b_scaled[r] - s[r];
        }

        // Over-relaxation, projection, dual update.
        for r in 0..m {
            let au_rel = alpha * au[r] + (1.0 - alpha) * (b_scaled[r] - s[r]);
            v[r] = b_scaled[r] - au_rel - y[r] / rho;
        }
        s.copy_from_slice(&v);
        project_all(&mut s, &cached.cones);
        for r in 0..m {
            y[r] = rho * (s[r] - v[r]);
        }

        if iter % check_every != 0 && iter != config.max_iter {
            continue;
        }

        // Unscale and evaluate termination criteria on the original data.
        for i in 0..n {
            u_raw[i] = u[i] * e[i];
        }
        for r in 0..m {
            s_raw[r] = s[r] / d[r];
            y_raw[r] = y[r] * d[r];
        }
        cached.a_raw.matvec(&u_raw, &mut work_m);
        let mut prim = 0.0f64;
        for r in 0..m {
            prim += (work_m[r] + s_raw[r] - b_raw[r]).powi(2);
        }
        let prim = prim.sqrt() / (1.0 + norm_b);
        cached.a_raw.matvec_t(&y_raw, &mut work_n);
        let mut dual = 0.0f64;
        for i in 0..n {
            dual += (work_n[i] + c_raw[i]).powi(2);
        }
        let dual = dual.sqrt() / (1.0 + norm_c);
        let obj_p = dot(c_raw, &u_raw);
        let obj_d = -dot(b_raw, &y_raw);
        let gap = (obj_p - obj_d).abs() / (1.0 + obj_p.abs() + obj_d.abs());
        residuals = Residuals {
            primal: prim,
            dual,
            gap,
        };

        if prim <= config.eps_primal && dual <= config.eps_dual && gap <= config.eps_gap {
            status = SolveStatus::Optimal;
            break;
        }

        // Divergence certificates from iterate differences over the check
        // window (the differences converge to the certificate rays; the raw
        // iterates only approach them at O(1/k)). δy ∈ span of K* directions
        // with Aᵀδy ≈ 0 and bᵀδy < 0 is a Farkas certificate of primal
        // infeasibility; δu with cᵀδu < 0 and −A·δu ∈ K certifies
        // unboundedness.
        if iter > check_every {
            let dy: Vec<f64> = y_raw.iter().zip(&y_prev_raw).map(|(a, b)| a - b).collect();
            let ndy = norm2(&dy);
            if ndy > 1e-9 {
                let by = dot(b_raw, &dy) / ndy;
                if by <= -config.eps_certificate {
                    cached.a_raw.matvec_t(&dy, &mut cert_work[..n]);
                    let cert = norm2(&cert_work[..n]) / ndy;
                    // The Farkas direction must also lie in the dual cone.
                    let mut proj = dy.clone();
                    cones::project_all_dual(&mut proj, &cached.cones);
                    let dual_dist = proj
                        .iter()
                        .zip(&dy)
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum::<f64>()
                        .sqrt()
                        / ndy;
                    if cert <= config.eps_certificate && dual_dist <= config.eps_certificate {
                        status = SolveStatus::Infeasible;
                        break;
                    }
                }
            }
            let du: Vec<f64> = u_raw.iter().zip(&u_prev_raw).map(|(a, b)| a - b).collect();
            let ndu = norm2(&du);
            if ndu > 1e-9 {
                let cu = dot(c_raw, &du) / ndu;
                if cu <= -config.eps_certificate {
                    cached.a_raw.matvec(&du, &mut cert_work[..m]);
                    for val in cert_work[..m].iter_mut() {
                        *val = -*val / ndu;
                    }
                    let dist = cones::dist_to_cone(&cert_work[..m], &cached.cones);
                    if dist <= config.eps_certificate {
                        status = SolveStatus::Unbounded;
                        break;
                    }
                }
            }
        }
        u_prev_raw.copy_from_slice(&u_raw);
        y_prev_raw.copy_from_slice(&y_raw);

        // Rebalance ρ toward equal primal/dual progress. Refactorizing is
        // milliseconds; a stalled dual residual costs tens of thousands of
        // iterations.
        if config.adaptive_rho && iter >= last_adapt + 500 && iter + 1000 < config.max_iter {
            let ratio = prim.max(1e-14) / dual.max(1e-14);
            if !(0.04..=25.0).contains(&ratio) {
                let proposal = (rho * ratio.sqrt()).clamp(1e-4, 1e4);
                if proposal / rho > 2.0 || proposal / rho < 0.5 {
                    rho = proposal;
                    local_factor = Some(KktFactor::new(n, m, &cached.scaled_triplets, rho)?);
                    last_adapt = iter;
                }
            }
        }

        if let Some(limit) = config.time_limit {
            if start.elapsed().as_secs_f64() > limit {
                status = SolveStatus::TimeLimit;
                break;
            }
        }
    }

    // Final unscale (state may have advanced past the last check).
    for i in 0..n {
        u_raw[i] = u[i] * e[i];
    }
    for r in 0..m {
        s_raw[r] = s[r] / d[r];
        y_raw[r] = y[r] * d[r];
    }

    Ok(ConicSolution {
        status,
        objective: dot(c_raw, &u_raw),
        u: u_raw,
        y: y_raw,
        s: s_raw,
        residuals,
        iterations: iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::ConicProblem;
    use crate::geometry::NormTag;
    use crate::rng::Rng;

    fn solve_default(p: &ConicProblem) -> ConicSolution {
        solve(p, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn fixed_norm_epigraph() {
        // min t s.t. ‖(3,4)‖₂ ≤ t → 5
        let mut p = ConicProblem::new();
        let z = p.new_vars("z", 2);
        let t = p.new_var("t");
        p.add_objective(t, 1.0);
        p.fix_var(z[0], 3.0);
        p.fix_var(z[1], 4.0);
        p.epigraph_norm(&z, t, NormTag::L2);
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 5.0).abs() < 1e-5, "{}", sol.objective);
    }

    #[test]
    fn trivial_lp() {
        // min x s.t. x ≥ 0 → 0
        let mut p = ConicProblem::new();
        let x = p.new_var("x");
        p.add_objective(x, 1.0);
        p.geq_row(&[(x, 1.0)], 0.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective.abs() < 1e-5);
    }

    #[test]
    fn weber_point_equilateral_triangle() {
        // Fermat point of the equilateral triangle (0,0),(1,0),(0.5,√3/2)
        // has objective √3; cross-checked against a Weiszfeld oracle.
        let pts = [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.5, 3.0_f64.sqrt() / 2.0],
        ];
        let mut p = ConicProblem::new();
        let x = p.new_vars("x", 2);
        let mut obj = Vec::new();
        for (k, pt) in pts.iter().enumerate() {
            let t = p.new_var(format!("t[{k}]"));
            p.add_objective(t, 1.0);
            p.epigraph_distance_to_point(&x, pt, t, NormTag::L2);
            obj.push(t);
        }
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolveStatus::Optimal);
        let expected = 3.0_f64.sqrt();
        assert!(
            (sol.objective - expected).abs() < 1e-4,
            "{} vs {expected}",
            sol.objective
        );

        // Weiszfeld iteration oracle.
        let mut wx = [0.4, 0.2];
        for _ in 0..500 {
            let mut num = [0.0, 0.0];
            let mut den = 0.0;
            for pt in &pts {
                let dx = wx[0] - pt[0];
                let dy = wx[1] - pt[1];
                let dist = (dx * dx + dy * dy).sqrt().max(1e-12);
                num[0] += pt[0] / dist;
                num[1] += pt[1] / dist;
                den += 1.0 / dist;
            }
            wx = [num[0] / den, num[1] / den];
        }
        let weiszfeld_obj: f64 = pts
            .iter()
            .map(|pt| ((wx[0] - pt[0]).powi(2) + (wx[1] - pt[1]).powi(2)).sqrt())
            .sum();
        assert!((sol.objective - weiszfeld_obj).abs() < 1e-4);
    }

    #[test]
    fn weber_oracle_agreement_batch() {
        // 20 random planar point sets: solver vs Weiszfeld within 1e-4.
        let mut rng = Rng::new(99);
        for trial in 0..20 {
            let npts = rng.uniform_int(3, 6) as usize;
            let pts: Vec<[f64; 2]> = (0..npts)
                .map(|_| [rng.uniform_in(-3.0, 3.0), rng.uniform_in(-3.0, 3.0)])
                .collect();
            let ws: Vec<f64> = (0..npts).map(|_| rng.uniform_in(0.2, 1.0)).collect();

            let mut p = ConicProblem::new();
            let x = p.new_vars("x", 2);
            for (k, pt) in pts.iter().enumerate() {
                let t = p.new_var(format!("t[{k}]"));
                p.add_objective(t, ws[k]);
                p.epigraph_distance_to_point(&x, &pt[..], t, NormTag::L2);
            }
            let sol = solve_default(&p);
            assert_eq!(sol.status, SolveStatus::Optimal, "trial {trial}");

            let mut wx = [0.0, 0.0];
            for pt in &pts {
                wx[0] += pt[0] / npts as f64;
                wx[1] += pt[1] / npts as f64;
            }
            for _ in 0..2000 {
                let mut num = [0.0, 0.0];
                let mut den = 0.0;
                for (pt, w) in pts.iter().zip(&ws) {
                    let dist = ((wx[0] - pt[0]).powi(2) + (wx[1] - pt[1]).powi(2))
                        .sqrt()
                        .max(1e-12);
                    num[0] += w * pt[0] / dist;
                    num[1] += w * pt[1] / dist;
                    den += w / dist;
                }
                wx = [num[0] / den, num[1] / den];
            }
            let oracle: f64 = pts
                .iter()
                .zip(&ws)
                .map(|(pt, w)| {
                    w * ((wx[0] - pt[0]).powi(2) + (wx[1] - pt[1]).powi(2)).sqrt()
                })
                .sum();
            let rel = (sol.objective - oracle).abs() / oracle.max(1e-9);
            assert!(rel < 1e-4, "trial {trial}: {} vs {oracle}", sol.objective);
        }
    }

    #[test]
    fn weak_duality_on_optimal() {
        let mut rng = Rng::new(5);
        for _ in 0..10 {
            let mut p = ConicProblem::new();
            let x = p.new_vars("x", 2);
            let t = p.new_var("t");
            p.add_objective(t, 1.0);
            p.epigraph_distance_to_point(
                &x,
                &[rng.uniform_in(-2.0, 2.0), rng.uniform_in(-2.0, 2.0)],
                t,
                NormTag::L2,
            );
            p.leq_row(&[(x[0], 1.0)], rng.uniform_in(-1.0, 1.0));
            let sol = solve_default(&p);
            assert_eq!(sol.status, SolveStatus::Optimal);
            let dual_obj = -dot(p.rhs(), &sol.y);
            assert!(sol.objective >= dual_obj - 1e-5);
        }
    }

    #[test]
    fn detects_infeasible() {
        // x ≥ 1 and x ≤ 0.
        let mut p = ConicProblem::new();
        let x = p.new_var("x");
        p.add_objective(x, 1.0);
        p.geq_row(&[(x, 1.0)], 1.0);
        p.leq_row(&[(x, 1.0)], 0.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        // min x with x ≤ 0 only.
        let mut p = ConicProblem::new();
        let x = p.new_var("x");
        p.add_objective(x, 1.0);
        p.leq_row(&[(x, 1.0)], 0.0);
        let sol = solve_default(&p);
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn rejects_malformed() {
        let p = ConicProblem::new();
        assert!(matches!(
            solve(&p, &SolverConfig::default()),
            Err(SolveError::Malformed(_))
        ));
    }

    #[test]
    fn factor_cache_reused_across_b_edits() {
        let solver = BuiltinSolver::new();
        let mut p = ConicProblem::new();
        let x = p.new_var("x");
        p.add_objective(x, 1.0);
        let y = p.new_var("y");
        p.mark_binary(y);
        p.zero_row(&[(x, 1.0), (y, -1.0)], 0.0);
        let cfg = SolverConfig::default();
        let s0 = solver.solve(&p, &cfg).unwrap();
        assert!((s0.objective - 0.0).abs() < 1e-5);
        p.set_binary_bounds(y, 1.0, 1.0);
        let s1 = solver.solve(&p, &cfg).unwrap();
        assert!((s1.objective - 1.0).abs() < 1e-5, "{}", s1.objective);
    }
}
