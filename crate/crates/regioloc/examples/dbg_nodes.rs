use regioloc::bnb::{solve_mi, BnBConfig};
use regioloc::instances::{generate, GenConfig, PrefFamily, Scenario};
use regioloc::model::{build, BuildOptions, ModelKind};
use regioloc::socp::{BuiltinSolver, ContinuousSolver, ConicSolution, SolveError, SolverConfig};
use regioloc::conic::ConicProblem;
use std::sync::atomic::{AtomicUsize, Ordering};

struct Spy(BuiltinSolver, AtomicUsize, AtomicUsize);
impl ContinuousSolver for Spy {
    fn solve(&self, p: &ConicProblem, c: &SolverConfig) -> Result<ConicSolution, SolveError> {
        self.solve_warm(p, c, None)
    }
    fn solve_warm(&self, p: &ConicProblem, c: &SolverConfig, w: Option<&ConicSolution>) -> Result<ConicSolution, SolveError> {
        let s = self.0.solve_warm(p, c, w)?;
        self.1.fetch_add(1, Ordering::Relaxed);
        self.2.fetch_add(s.iterations, Ordering::Relaxed);
        if s.iterations >= 99_000 {
            eprintln!("STALL status {:?} iters {} resid p={:.2e} d={:.2e} g={:.2e}",
                s.status, s.iterations, s.residuals.primal, s.residuals.dual, s.residuals.gap);
        }
        Ok(s)
    }
}

fn main() {
    // same config as acceptance criterion 7, family D (k=1), threshold 0.8
    let cfg = GenConfig {
        seed: 701,
        threshold: 0.8,
        collocation: true,
        ..GenConfig::new(6, 2, Scenario::Mixed, PrefFamily::D)
    };
    let inst = generate(&cfg);
    let spy = Spy(BuiltinSolver::new(), AtomicUsize::new(0), AtomicUsize::new(0));
    let mut built = build(&inst, ModelKind::Collocation, &BuildOptions::default(), &spy).unwrap();
    println!("vars {} rows {} bins {} zpairs {}", built.problem.num_vars(), built.problem.num_rows(),
        built.problem.integrality().len(), built.map.z.len());
    let t0 = std::time::Instant::now();
    let mi = solve_mi(&mut built, &BnBConfig { time_limit: 600.0, keep_log: true, ..BnBConfig::default() }, &spy).unwrap();
    println!("status {:?} nodes {} uncert {} obj {:?} in {:?}; solves {} total iters {}",
        mi.status, mi.nodes, mi.uncertified_closures, mi.incumbent.map(|s| s.objective), t0.elapsed(),
        spy.1.load(Ordering::Relaxed), spy.2.load(Ordering::Relaxed));
}
