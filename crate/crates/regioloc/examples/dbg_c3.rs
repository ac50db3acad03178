use regioloc::bnb::{solve_mi, BnBConfig, MiStatus};
use regioloc::instances::{generate, GenConfig, PrefFamily, Scenario};
use regioloc::model::{build, BuildOptions, ModelKind};
use regioloc::oracle::enumerate_assignments;
use regioloc::geometry::overlap_candidates;
use regioloc::socp::BuiltinSolver;

fn main() {
    let families = PrefFamily::ALL;
    let thresholds = [0.0, 0.2, 0.8];
    let kinds = [ModelKind::Assignment, ModelKind::Collocation];
    let mut cases = Vec::new();
    for family in families {
        for &threshold in &thresholds {
            for kind in kinds {
                cases.push((family, threshold, kind));
            }
        }
    }
    let t_all = std::time::Instant::now();
    for (k, (family, threshold, kind)) in cases.into_iter().enumerate() {
        let cfg = GenConfig {
            seed: 500 + k as u64,
            threshold,
            blob_clusters: 2,
            blob_std: 0.8,
            ..GenConfig::new(4, 2, Scenario::L2, family)
        };
        let instance = generate(&cfg);
        let cands = overlap_candidates(&instance.regions).len();
        let solver = BuiltinSolver::new();
        let t0 = std::time::Instant::now();
        let mut built = build(&instance, kind, &BuildOptions::default(), &solver).unwrap();
        let mi = solve_mi(&mut built, &BnBConfig{ time_limit: 600.0, ..BnBConfig::default()}, &solver).unwrap();
        let t_bnb = t0.elapsed();
        assert_eq!(mi.status, MiStatus::Optimal, "case {k}");
        let obj = mi.incumbent.as_ref().unwrap().objective;
        let t0 = std::time::Instant::now();
        let oracle = enumerate_assignments(&instance, kind, false).unwrap();
        let t_or = t0.elapsed();
        let err = (obj - oracle).abs() / oracle.abs().max(1e-9);
        println!("case {k:2} {family:?} thr {threshold} {kind:?} cands {cands}: bnb {obj:.6} ({} nodes, {t_bnb:.2?}) oracle {oracle:.6} ({t_or:.2?}) rel {err:.2e}", mi.nodes);
        assert!(err <= 1e-4, "case {k} mismatch");
    }
    println!("TOTAL {:?}", t_all.elapsed());
}
