//! Command line interface: instance generation, solving, experiment sweeps,
//! trade-off analysis, plotting, and the brute-force oracles.
//!
//! Exit codes: 0 success, 1 usage error, 2 infeasible instance, 3 time limit
//! without an incumbent.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use regioloc::bnb::BnBConfig;
use regioloc::harness::{
    self, kruskal_wallis, price_of_efficiency, read_results, run_experiment, write_pe_csv,
    EngineSpec, ExperimentMatrix,
};
use regioloc::instances::{self, GenConfig, PrefFamily, Scenario};
use regioloc::model::{BuildOptions, ModelKind, Solution};
use regioloc::oracle::{enumerate_assignments, grid_weber, sample_normalize, GridSpec};
use regioloc::prefs::normalize;
use regioloc::socp::{BuiltinSolver, SolverConfig};

#[derive(Parser)]
#[command(
    name = "regioloc",
    about = "Continuous multifacility location over demand regions with preference thresholds",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance file
    Gen(GenArgs),
    /// Solve one instance
    Solve(SolveArgs),
    /// Run a matrix of experiments into a results CSV
    Experiment(ExperimentArgs),
    /// Analyze a results CSV (price of efficiency, Kruskal-Wallis)
    Analyze(AnalyzeArgs),
    /// Render an instance (and optional solution) as SVG
    Plot(PlotArgs),
    /// Brute-force reference oracles
    Oracle(OracleArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// l1 | l2 | mixed
    #[arg(long, default_value = "l2")]
    scenario: String,
    /// L | D | CES | CD | LF
    #[arg(long, default_value = "L")]
    pref: String,
    #[arg(long, default_value_t = 0.0)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    collocation: bool,
    #[arg(long, default_value_t = 3)]
    blob_clusters: usize,
    #[arg(long, default_value_t = 1.0)]
    blob_std: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    /// Solve the collocation variant regardless of the instance flag
    #[arg(long)]
    collocation: bool,
    /// Reinstate region weights in the collocation objective
    #[arg(long)]
    weighted_collocation: bool,
    /// builtin | external:<path> (env REGIOLOC_ENGINE overrides the default)
    #[arg(long)]
    engine: Option<String>,
    /// Wall-time limit in seconds
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    /// Relative MIP gap
    #[arg(long, default_value_t = 1e-4)]
    gap: f64,
    /// Worker threads (1 = fully deterministic sequential mode)
    #[arg(long)]
    threads: Option<usize>,
    /// Write the solution JSON here
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Comma-separated region counts
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Comma-separated facility counts
    #[arg(long, value_delimiter = ',', default_value = "1")]
    p: Vec<usize>,
    /// Comma-separated scenarios (l1,l2,mixed)
    #[arg(long, value_delimiter = ',', default_value = "l2")]
    scenarios: Vec<String>,
    /// Comma-separated preference families (L,D,CES,CD,LF)
    #[arg(long, value_delimiter = ',', default_value = "L")]
    prefs: Vec<String>,
    /// Comma-separated thresholds
    #[arg(long, value_delimiter = ',', default_value = "0,0.2,0.8")]
    thresholds: Vec<f64>,
    /// Comma-separated seeds
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
    seeds: Vec<u64>,
    #[arg(long)]
    collocation: bool,
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    /// Parallel cells (1 = sequential)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long)]
    engine: Option<String>,
    /// Results CSV (appended to when resuming)
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Price-of-efficiency analysis of this results CSV
    #[arg(long)]
    pe: Option<PathBuf>,
    /// Kruskal-Wallis across thresholds of this results CSV
    #[arg(long)]
    kw: Option<PathBuf>,
    /// Output CSV for --pe (defaults next to the input)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    solution: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    /// weber | enum | normalize
    mode: String,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    collocation: bool,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    Scenario::parse(s).ok_or_else(|| format!("unknown scenario `{s}` (l1|l2|mixed)"))
}

fn parse_pref(s: &str) -> Result<PrefFamily, String> {
    PrefFamily::parse(s).ok_or_else(|| format!("unknown preference family `{s}` (L|D|CES|CD|LF)"))
}

const EXIT_OK: u8 = 0;
const EXIT_USAGE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;
const EXIT_NO_INCUMBENT: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

fn run(cli: Cli) -> Result<u8, String> {
    match cli.command {
        Command::Gen(args) => {
            let config = GenConfig {
                n: args.n,
                p: args.p,
                scenario: parse_scenario(&args.scenario)?,
                pref_family: parse_pref(&args.pref)?,
                threshold: args.threshold,
                collocation: args.collocation,
                seed: args.seed,
                blob_clusters: args.blob_clusters,
                blob_std: args.blob_std,
            };
            let instance = instances::generate(&config);
            instances::save(&config, &instance, &args.out).map_err(|e| e.to_string())?;
            println!(
                "wrote {} (n={}, p={}, scenario={}, pref={}, threshold={})",
                args.out.display(),
                args.n,
                args.p,
                config.scenario.label(),
                config.pref_family.label(),
                args.threshold
            );
            Ok(EXIT_OK)
        }
        Command::Solve(args) => {
            if let Some(t) = args.threads {
                // rayon reads this at first pool construction
                std::env::set_var("RAYON_NUM_THREADS", t.to_string());
            }
            let file = instances::load(&args.instance).map_err(|e| e.to_string())?;
            let mut instance = file.instance;
            if args.collocation {
                instance.collocation = true;
            }
            let kind = if instance.collocation {
                ModelKind::Collocation
            } else {
                ModelKind::Assignment
            };
            let engine = EngineSpec::resolve(args.engine.as_deref())?.build();
            let options = BuildOptions {
                weighted_collocation: args.weighted_collocation,
                parallel: args.threads != Some(1),
                ..BuildOptions::default()
            };
            let bnb = BnBConfig {
                rel_gap: args.gap,
                time_limit: args.time_limit,
                solver_config: SolverConfig::default(),
                ..BnBConfig::default()
            };
            let outcome = harness::solve_instance(&instance, kind, &options, &bnb, engine.as_ref());
            println!(
                "status: {}  objective: {}  bound: {}  gap: {}  nodes: {}  time: {:.3}s",
                outcome.row.status,
                outcome
                    .row
                    .objective
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_else(|| "-".into()),
                outcome
                    .row
                    .bound
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_else(|| "-".into()),
                outcome
                    .row
                    .mip_gap
                    .map(|v| format!("{v:.2e}"))
                    .unwrap_or_else(|| "-".into()),
                outcome.row.nodes,
                outcome.row.wall_time
            );
            if let Some(report) = &outcome.report {
                if !report.clean() {
                    for v in &report.violations {
                        eprintln!("violation: {} (magnitude {:.3e})", v.what, v.magnitude);
                    }
                }
            }
            if let Some(out) = &args.out {
                if let Some(sol) = &outcome.solution {
                    let json = serde_json::to_string_pretty(sol).map_err(|e| e.to_string())?;
                    std::fs::write(out, json).map_err(|e| e.to_string())?;
                    println!("solution written to {}", out.display());
                }
            }
            if outcome.row.status.starts_with("infeasible") {
                eprintln!("{}", outcome.row.status);
                return Ok(EXIT_INFEASIBLE);
            }
            if outcome.solution.is_none() {
                return Ok(EXIT_NO_INCUMBENT);
            }
            Ok(EXIT_OK)
        }
        Command::Experiment(args) => {
            let matrix = ExperimentMatrix {
                ns: args.n,
                ps: args.p,
                scenarios: args
                    .scenarios
                    .iter()
                    .map(|s| parse_scenario(s))
                    .collect::<Result<_, _>>()?,
                prefs: args
                    .prefs
                    .iter()
                    .map(|s| parse_pref(s))
                    .collect::<Result<_, _>>()?,
                thresholds: args.thresholds,
                seeds: args.seeds,
                collocation: args.collocation,
                time_limit: args.time_limit,
                jobs: args.jobs,
                blob_clusters: 3,
                blob_std: 1.0,
            };
            if args.jobs >= 1 {
                std::env::set_var("RAYON_NUM_THREADS", args.jobs.to_string());
            }
            let engine = EngineSpec::resolve(args.engine.as_deref())?.build();
            let rows = run_experiment(
                &matrix,
                engine.as_ref(),
                &args.out,
                &BuildOptions::default(),
            )
            .map_err(|e| e.to_string())?;
            let solved = rows.iter().filter(|r| r.status == "optimal").count();
            println!(
                "{} rows in {} ({} optimal)",
                rows.len(),
                args.out.display(),
                solved
            );
            Ok(EXIT_OK)
        }
        Command::Analyze(args) => {
            if args.pe.is_none() && args.kw.is_none() {
                return Err("analyze needs --pe <results.csv> and/or --kw <results.csv>".into());
            }
            if let Some(path) = &args.pe {
                let rows = read_results(path).map_err(|e| e.to_string())?;
                let analysis = price_of_efficiency(&rows);
                for w in &analysis.warnings {
                    eprintln!("warning: {w}");
                }
                let out = args
                    .out
                    .clone()
                    .unwrap_or_else(|| path.with_extension("pe.csv"));
                write_pe_csv(&analysis, &out).map_err(|e| e.to_string())?;
                for a in &analysis.aggregates {
                    println!(
                        "n={} threshold={}: PE min {:.4} median {:.4} max {:.4} ({} pairs)",
                        a.n, a.threshold, a.min, a.median, a.max, a.count
                    );
                }
                println!("PE table written to {}", out.display());
            }
            if let Some(path) = &args.kw {
                let rows = read_results(path).map_err(|e| e.to_string())?;
                let mut ns: Vec<usize> = rows.iter().map(|r| r.n).collect();
                ns.sort_unstable();
                ns.dedup();
                for n in ns {
                    let mut thresholds: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.n == n)
                        .map(|r| r.threshold)
                        .collect();
                    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    thresholds.dedup();
                    let groups: Vec<Vec<f64>> = thresholds
                        .iter()
                        .map(|t| {
                            rows.iter()
                                .filter(|r| r.n == n && r.threshold == *t)
                                .filter_map(|r| r.objective)
                                .collect()
                        })
                        .filter(|g: &Vec<f64>| !g.is_empty())
                        .collect();
                    if groups.len() < 2 {
                        eprintln!("n={n}: fewer than two threshold groups with objectives");
                        continue;
                    }
                    let kw = kruskal_wallis(&groups).map_err(|e| e.to_string())?;
                    println!("n={n}: H = {:.4}, p = {:.6} (df {})", kw.h, kw.p_value, kw.df);
                }
            }
            Ok(EXIT_OK)
        }
        Command::Plot(args) => {
            let file = instances::load(&args.instance).map_err(|e| e.to_string())?;
            let solution: Option<Solution> = match &args.solution {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| e.to_string())?;
                    Some(serde_json::from_str(&text).map_err(|e| e.to_string())?)
                }
                None => None,
            };
            let norm_prefs = if file.instance.threshold > 0.0 {
                let solver = BuiltinSolver::new();
                let nps: Result<Vec<_>, _> = file
                    .instance
                    .regions
                    .iter()
                    .zip(&file.instance.prefs)
                    .map(|(r, p)| normalize(p, r, &solver, &SolverConfig::default()))
                    .collect();
                nps.ok()
            } else {
                None
            };
            harness::plot_solution(
                &file.instance,
                solution.as_ref(),
                norm_prefs.as_deref(),
                &args.out,
            )
            .map_err(|e| e.to_string())?;
            println!("plot written to {}", args.out.display());
            Ok(EXIT_OK)
        }
        Command::Oracle(args) => {
            let file = instances::load(&args.instance).map_err(|e| e.to_string())?;
            let instance = file.instance;
            match args.mode.as_str() {
                "weber" => {
                    let (point, obj) =
                        grid_weber(&instance, &GridSpec::default()).map_err(|e| e.to_string())?;
                    println!(
                        "grid optimum {:.6} at ({:.6}, {:.6})",
                        obj, point.0[0], point.0[1]
                    );
                }
                "enum" => {
                    let kind = if args.collocation || instance.collocation {
                        ModelKind::Collocation
                    } else {
                        ModelKind::Assignment
                    };
                    let obj = enumerate_assignments(&instance, kind, false)
                        .map_err(|e| e.to_string())?;
                    println!("enumeration optimum {obj:.6}");
                }
                "normalize" => {
                    let solver = BuiltinSolver::new();
                    for (i, (region, pref)) in
                        instance.regions.iter().zip(&instance.prefs).enumerate()
                    {
                        let np = normalize(pref, region, &solver, &SolverConfig::default())
                            .map_err(|e| e.to_string())?;
                        let (slb, sub) = sample_normalize(pref, region, 10_000, 7)
                            .map_err(|e| e.to_string())?;
                        println!(
                            "region {i}: LB {:.6} UB {:.6} (sampled [{:.6}, {:.6}])",
                            np.lb, np.ub, slb, sub
                        );
                    }
                }
                other => {
                    return Err(format!("unknown oracle mode `{other}` (weber|enum|normalize)"))
                }
            }
            Ok(EXIT_OK)
        }
    }
}
