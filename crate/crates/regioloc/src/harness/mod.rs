//! Experiment runner, results persistence, and the analysis entry points.
//!
//! A run sweeps the cross product of an [`ExperimentMatrix`], executing each
//! cell as generate → build → solve → validate. Cells are crash-isolated (a
//! failed cell records an `error` row and never aborts the batch), the
//! results CSV is appended as cells finish, and re-running against an
//! existing CSV skips the cells already present.

pub mod engine;
pub mod stats;
mod svg;

pub use engine::{EngineSpec, ExternalSolver};
pub use stats::{chi2_sf, kruskal_wallis, price_of_efficiency, KwTest, PeAnalysis, StatsError};
pub use svg::{plot_solution, PlotError};

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::Mutex;

use thiserror::Error;

use crate::bnb::{solve_mi, BnBConfig, MiStatus};
use crate::instances::{generate, GenConfig, PrefFamily, Scenario};
use crate::model::{
    build, BuildOptions, BuiltModel, Instance, ModelError, ModelKind, Solution, ValidationReport,
};
use crate::par::maybe_par_map;
use crate::prefs::PrefError;
use crate::socp::ContinuousSolver;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("results file {0}: malformed row `{1}`")]
    BadRow(String, String),
    #[error("experiment matrix is empty")]
    EmptyMatrix,
}

pub const RESULTS_HEADER: &str =
    "n,p,scenario,pref,threshold,collocation,seed,status,objective,bound,mip_gap,nodes,wall_time_s";

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub n: usize,
    pub p: usize,
    pub scenario: String,
    pub pref: String,
    pub threshold: f64,
    pub collocation: bool,
    pub seed: u64,
    pub status: String,
    pub objective: Option<f64>,
    pub bound: Option<f64>,
    pub mip_gap: Option<f64>,
    pub nodes: usize,
    pub wall_time: f64,
}

impl ResultRow {
    pub fn key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}|{}",
            self.n, self.p, self.scenario, self.pref, self.threshold, self.collocation, self.seed
        )
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.n,
            self.p,
            self.scenario,
            self.pref,
            self.threshold,
            self.collocation,
            self.seed,
            self.status,
            opt(self.objective),
            opt(self.bound),
            opt(self.mip_gap),
            self.nodes,
            self.wall_time
        )
    }

    pub fn from_csv(line: &str) -> Option<ResultRow> {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 13 {
            return None;
        }
        let opt = |s: &str| {
            if s.is_empty() {
                None
            } else {
                s.parse::<f64>().ok()
            }
        };
        Some(ResultRow {
            n: parts[0].parse().ok()?,
            p: parts[1].parse().ok()?,
            scenario: parts[2].to_string(),
            pref: parts[3].to_string(),
            threshold: parts[4].parse().ok()?,
            collocation: parts[5].parse().ok()?,
            seed: parts[6].parse().ok()?,
            status: parts[7].to_string(),
            objective: opt(parts[8]),
            bound: opt(parts[9]),
            mip_gap: opt(parts[10]),
            nodes: parts[11].parse().ok()?,
            wall_time: parts[12].parse().ok()?,
        })
    }
}

/// Parse a results CSV produced by [`run_experiment`].
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 && line.starts_with("n,") {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match ResultRow::from_csv(line) {
            Some(r) => rows.push(r),
            None => {
                return Err(HarnessError::BadRow(
                    path.display().to_string(),
                    line.to_string(),
                ))
            }
        }
    }
    Ok(rows)
}

/// Cross-product experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentMatrix {
    pub ns: Vec<usize>,
    pub ps: Vec<usize>,
    pub scenarios: Vec<Scenario>,
    pub prefs: Vec<PrefFamily>,
    pub thresholds: Vec<f64>,
    pub seeds: Vec<u64>,
    pub collocation: bool,
    /// Per-instance wall-time limit in seconds.
    pub time_limit: f64,
    /// Worker count; 0 uses the default pool, 1 forces sequential cells.
    pub jobs: usize,
    pub blob_clusters: usize,
    pub blob_std: f64,
}

impl Default for ExperimentMatrix {
    fn default() -> Self {
        ExperimentMatrix {
            ns: vec![10],
            ps: vec![1],
            scenarios: vec![Scenario::L2],
            prefs: vec![PrefFamily::L],
            thresholds: vec![0.0, 0.2, 0.8],
            seeds: vec![1, 2, 3, 4, 5],
            collocation: false,
            time_limit: 3600.0,
            jobs: 0,
            blob_clusters: 3,
            blob_std: 1.0,
        }
    }
}

impl ExperimentMatrix {
    pub fn cells(&self) -> Vec<GenConfig> {
        let mut out = Vec::new();
        for &n in &self.ns {
            for &p in &self.ps {
                for &scenario in &self.scenarios {
                    for &pref in &self.prefs {
                        for &threshold in &self.thresholds {
                            for &seed in &self.seeds {
                                out.push(GenConfig {
                                    n,
                                    p,
                                    scenario,
                                    pref_family: pref,
                                    threshold,
                                    collocation: self.collocation,
                                    seed,
                                    blob_clusters: self.blob_clusters,
                                    blob_std: self.blob_std,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Outcome of solving one instance end to end.
pub struct SolveOutcome {
    pub row: ResultRow,
    pub solution: Option<Solution>,
    pub report: Option<ValidationReport>,
    pub built: Option<BuiltModel>,
}

/// The full pipeline for one instance: build, branch-and-bound (or the
/// continuous path), extraction, validation.
pub fn solve_instance(
    instance: &Instance,
    kind: ModelKind,
    options: &BuildOptions,
    bnb: &BnBConfig,
    engine: &(dyn ContinuousSolver + Sync),
) -> SolveOutcome {
    let start = std::time::Instant::now();
    let mut row = ResultRow {
        n: instance.n(),
        p: instance.p,
        scenario: instance.scenario.clone(),
        pref: instance.pref_family.clone(),
        threshold: instance.threshold,
        collocation: kind == ModelKind::Collocation,
        seed: instance.seed,
        status: "error".into(),
        objective: None,
        bound: None,
        mip_gap: None,
        nodes: 0,
        wall_time: 0.0,
    };

    let mut built = match build(instance, kind, options, engine) {
        Ok(b) => b,
        Err(ModelError::Pref(PrefError::NoAdmissibleCells { raw, lb, ub })) => {
            row.wall_time = start.elapsed().as_secs_f64();
            row.status =
                format!("infeasible(no admissible cells: raw {raw:.6} of [{lb:.6};{ub:.6}])");
            return SolveOutcome {
                row,
                solution: None,
                report: None,
                built: None,
            };
        }
        Err(e @ ModelError::EmptyRegion(_)) => {
            row.wall_time = start.elapsed().as_secs_f64();
            row.status = format!("infeasible({e})");
            return SolveOutcome {
                row,
                solution: None,
                report: None,
                built: None,
            };
        }
        Err(e) => {
            row.status = format!("error({e})");
            row.wall_time = start.elapsed().as_secs_f64();
            return SolveOutcome {
                row,
                solution: None,
                report: None,
                built: None,
            };
        }
    };

    match solve_mi(&mut built, bnb, engine) {
        Ok(mi) => {
            row.nodes = mi.nodes;
            row.wall_time = mi.wall_time;
            row.bound = Some(mi.best_bound).filter(|b| b.is_finite());
            row.mip_gap = Some(mi.mip_gap).filter(|g| g.is_finite());
            row.status = match mi.status {
                MiStatus::Optimal => "optimal",
                MiStatus::Feasible => "feasible",
                MiStatus::InfeasibleProven => "infeasible",
                MiStatus::NoSolution => "no_solution",
            }
            .to_string();
            let report = mi.incumbent.as_ref().map(|sol| built.validate_solution(sol));
            if let Some(sol) = &mi.incumbent {
                row.objective = Some(sol.objective);
                if let Some(rep) = &report {
                    if !rep.clean_above(1e-5) {
                        row.status = format!("invalid({} violations)", rep.violations.len());
                    }
                }
            }
            SolveOutcome {
                row,
                solution: mi.incumbent,
                report,
                built: Some(built),
            }
        }
        Err(e) => {
            row.status = format!("error({e})");
            row.wall_time = start.elapsed().as_secs_f64();
            SolveOutcome {
                row,
                solution: None,
                report: None,
                built: Some(built),
            }
        }
    }
}

/// Run (or resume) the matrix against a results CSV. Returns every row,
/// existing and fresh.
pub fn run_experiment(
    matrix: &ExperimentMatrix,
    engine: &(dyn ContinuousSolver + Sync),
    out_csv: &Path,
    options: &BuildOptions,
) -> Result<Vec<ResultRow>, HarnessError> {
    let cells = matrix.cells();
    if cells.is_empty() {
        return Err(HarnessError::EmptyMatrix);
    }
    let mut existing = Vec::new();
    if out_csv.exists() {
        existing = read_results(out_csv)?;
    }
    let done: BTreeSet<String> = existing.iter().map(|r| r.key()).collect();
    let pending: Vec<GenConfig> = cells
        .into_iter()
        .filter(|c| {
            let probe = ResultRow {
                n: c.n,
                p: c.p,
                scenario: c.scenario.label().into(),
                pref: c.pref_family.label().into(),
                threshold: c.threshold,
                collocation: c.collocation,
                seed: c.seed,
                status: String::new(),
                objective: None,
                bound: None,
                mip_gap: None,
                nodes: 0,
                wall_time: 0.0,
            };
            !done.contains(&probe.key())
        })
        .collect();

    let mut file = if out_csv.exists() {
        fs::OpenOptions::new().append(true).open(out_csv)?
    } else {
        let mut f = fs::File::create(out_csv)?;
        writeln!(f, "{RESULTS_HEADER}")?;
        f
    };
    let sink = Mutex::new(&mut file);

    let bnb = BnBConfig {
        time_limit: matrix.time_limit,
        ..BnBConfig::default()
    };
    let kind = if matrix.collocation {
        ModelKind::Collocation
    } else {
        ModelKind::Assignment
    };

    let parallel = matrix.jobs != 1;
    let fresh: Vec<ResultRow> = maybe_par_map(&pending, parallel, |cell| {
        let row = catch_unwind(AssertUnwindSafe(|| {
            let instance = generate(cell);
            solve_instance(&instance, kind, options, &bnb, engine).row
        }))
        .unwrap_or_else(|_| ResultRow {
            n: cell.n,
            p: cell.p,
            scenario: cell.scenario.label().into(),
            pref: cell.pref_family.label().into(),
            threshold: cell.threshold,
            collocation: cell.collocation,
            seed: cell.seed,
            status: "error(panic)".into(),
            objective: None,
            bound: None,
            mip_gap: None,
            nodes: 0,
            wall_time: 0.0,
        });
        {
            let mut f = sink.lock().unwrap();
            let _ = writeln!(f, "{}", row.to_csv());
            let _ = f.flush();
        }
        row
    });

    existing.extend(fresh);
    Ok(existing)
}

/// Emit the price-of-efficiency analysis as a CSV pair (per-pair rows and
/// aggregates).
pub fn write_pe_csv(analysis: &PeAnalysis, path: &Path) -> Result<(), HarnessError> {
    let mut out = String::from("n,p,scenario,pref,collocation,seed,threshold,pe\n");
    for r in &analysis.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n, r.p, r.scenario, r.pref, r.collocation, r.seed, r.threshold, r.pe
        ));
    }
    out.push_str("\n# aggregates\nn,threshold,min,median,max,count\n");
    for a in &analysis.aggregates {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            a.n, a.threshold, a.min, a.median, a.max, a.count
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::socp::BuiltinSolver;

    #[test]
    fn csv_round_trip() {
        let row = ResultRow {
            n: 10,
            p: 2,
            scenario: "mixed".into(),
            pref: "CES".into(),
            threshold: 0.2,
            collocation: true,
            seed: 7,
            status: "optimal".into(),
            objective: Some(12.5),
            bound: Some(12.49),
            mip_gap: Some(0.0008),
            nodes: 37,
            wall_time: 1.25,
        };
        let parsed = ResultRow::from_csv(&row.to_csv()).unwrap();
        assert_eq!(parsed, row);

        let no_obj = ResultRow {
            objective: None,
            bound: None,
            mip_gap: None,
            status: "no_solution".into(),
            ..row
        };
        let parsed = ResultRow::from_csv(&no_obj.to_csv()).unwrap();
        assert_eq!(parsed, no_obj);
    }

    #[test]
    fn tiny_matrix_runs_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("results.csv");
        let matrix = ExperimentMatrix {
            ns: vec![3],
            ps: vec![1],
            thresholds: vec![0.0],
            seeds: vec![1],
            jobs: 1,
            time_limit: 60.0,
            ..ExperimentMatrix::default()
        };
        let engine = BuiltinSolver::new();
        let rows = run_experiment(&matrix, &engine, &csv, &BuildOptions::default()).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].status, "optimal");
        assert!(rows[0].objective.is_some());

        // Resuming adds nothing and duplicates nothing.
        let rows2 = run_experiment(&matrix, &engine, &csv, &BuildOptions::default()).unwrap();
        assert_eq!(rows2.len(), 1);
        let reread = read_results(&csv).unwrap();
        assert_eq!(reread.len(), 1);
    }
}
