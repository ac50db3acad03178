use regioloc::bnb::{solve_mi, BnBConfig};
use regioloc::instances::{generate, GenConfig, PrefFamily, Scenario};
use regioloc::model::{build, BuildOptions, ModelKind};
use regioloc::prefs::{normalize, evaluate};
use regioloc::socp::{BuiltinSolver, SolverConfig, ContinuousSolver};

fn main() {
    let cfg = GenConfig {
        seed: 510,
        threshold: 0.8,
        blob_clusters: 2,
        blob_std: 0.8,
        ..GenConfig::new(4, 2, Scenario::L2, PrefFamily::D)
    };
    let instance = generate(&cfg);
    let solver = BuiltinSolver::new();
    for (i, (r, p)) in instance.regions.iter().zip(&instance.prefs).enumerate() {
        let np = normalize(p, r, &solver, &SolverConfig::default()).unwrap();
        println!("region {i}: c=({:.3},{:.3}) r={:.3} w={:.3} lb={:.6} ub={:.6} raw(0.8)={:.6}",
            r.center.0[0], r.center.0[1], r.radius, r.weight, np.lb, np.ub, np.raw_threshold(0.8));
    }
    let mut built = build(&instance, ModelKind::Assignment, &BuildOptions::default(), &solver).unwrap();
    let mi = solve_mi(&mut built, &BnBConfig{ time_limit: 600.0, keep_log: true, ..BnBConfig::default()}, &solver).unwrap();
    let sol = mi.incumbent.as_ref().unwrap();
    println!("bnb obj {} assignment {:?}", sol.objective, sol.assignment);
    for (i, e) in sol.entries.iter().enumerate() {
        let np = normalize(&instance.prefs[i], &instance.regions[i], &solver, &SolverConfig::default()).unwrap();
        println!("  entry {i}: ({:.4},{:.4}) phi_norm {:.6} contains {:?}", e.0[0], e.0[1],
           np.evaluate_normalized(e).unwrap(), instance.regions[i].contains(e, 1e-6).unwrap());
    }
    println!("facilities: {:?}", sol.facilities.iter().map(|f| (f.0[0], f.0[1])).collect::<Vec<_>>());
    let report = built.validate_solution(sol);
    println!("validation clean: {} {:?}", report.clean(), report.violations);
    // fix assignment found by oracle-ish reasoning: all to one facility?
    for row in mi.log.iter().take(12) {
        println!("node {} depth {} parent {:.4} bound {:.4} inc {:?}", row.node, row.depth, row.parent_bound, row.bound, row.incumbent);
    }
    let _ = evaluate;
}
