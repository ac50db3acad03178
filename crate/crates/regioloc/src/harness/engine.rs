//! Engine selection: the built-in ADMM solver or an external process
//! speaking the problem-dump/result-file protocol.
//!
//! An external engine is an executable invoked as
//! `<engine> <problem-file> <result-file>`. The problem file is the conic IR
//! text dump; the result file carries one directive per line:
//!
//! ```text
//! status optimal|infeasible|unbounded|iterlimit
//! objective <float>
//! iterations <int>
//! u <index> <float>        (one line per primal entry; omitted entries are 0)
//! ```
//!
//! Dual variables are optional (`y <index> <float>`); when absent the slack
//! is reconstructed as `s = b − A·u` and the dual is zeroed, which is enough
//! for bounding and extraction.

use std::path::PathBuf;
use std::process::Command;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::conic::ConicProblem;
use crate::socp::{
    BuiltinSolver, ConicSolution, ContinuousSolver, CscMatrix, Residuals, SolveError, SolveStatus,
    SolverConfig,
};

/// Parsed `--engine` choice; `REGIOLOC_ENGINE` provides the default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineSpec {
    Builtin,
    External(PathBuf),
}

impl EngineSpec {
    /// Resolve a CLI flag value against the `REGIOLOC_ENGINE` environment
    /// override; both absent means the built-in engine.
    pub fn resolve(flag: Option<&str>) -> Result<EngineSpec, String> {
        let spec = match flag {
            Some(s) => s.to_string(),
            None => match std::env::var("REGIOLOC_ENGINE") {
                Ok(s) if !s.is_empty() => s,
                _ => "builtin".to_string(),
            },
        };
        EngineSpec::parse(&spec)
    }

    pub fn parse(spec: &str) -> Result<EngineSpec, String> {
        if spec == "builtin" {
            Ok(EngineSpec::Builtin)
        } else if let Some(path) = spec.strip_prefix("external:") {
            if path.is_empty() {
                Err("external engine path is empty".into())
            } else {
                Ok(EngineSpec::External(PathBuf::from(path)))
            }
        } else {
            Err(format!(
                "unknown engine `{spec}` (expected `builtin` or `external:<path>`)"
            ))
        }
    }

    pub fn build(&self) -> Box<dyn ContinuousSolver + Send + Sync> {
        match self {
            EngineSpec::Builtin => Box::new(BuiltinSolver::new()),
            EngineSpec::External(path) => Box::new(ExternalSolver { path: path.clone() }),
        }
    }
}

static FILE_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Adapter that runs an external conic solver per the file protocol above.
pub struct ExternalSolver {
    pub path: PathBuf,
}

impl ContinuousSolver for ExternalSolver {
    fn solve(
        &self,
        problem: &ConicProblem,
        _config: &SolverConfig,
    ) -> Result<ConicSolution, SolveError> {
        problem
            .check_structure()
            .map_err(|e| SolveError::Malformed(e.to_string()))?;
        let stamp = FILE_COUNTER.fetch_add(1, Ordering::Relaxed);
        let dir = std::env::temp_dir();
        let problem_path = dir.join(format!("regioloc-{}-{}.prob", std::process::id(), stamp));
        let result_path = dir.join(format!("regioloc-{}-{}.sol", std::process::id(), stamp));
        std::fs::write(&problem_path, problem.dump_text())
            .map_err(|e| SolveError::Engine(format!("writing problem file: {e}")))?;

        let run = Command::new(&self.path)
            .arg(&problem_path)
            .arg(&result_path)
            .output();
        let outcome = (|| {
            let output = run.map_err(|e| {
                SolveError::Engine(format!("spawning {}: {e}", self.path.display()))
            })?;
            if !output.status.success() {
                return Err(SolveError::Engine(format!(
                    "engine exited with {}: {}",
                    output.status,
                    String::from_utf8_lossy(&output.stderr)
                )));
            }
            let text = std::fs::read_to_string(&result_path)
                .map_err(|e| SolveError::Engine(format!("reading result file: {e}")))?;
            parse_result(&text, problem)
        })();
        let _ = std::fs::remove_file(&problem_path);
        let _ = std::fs::remove_file(&result_path);
        outcome
    }
}

fn parse_result(text: &str, problem: &ConicProblem) -> Result<ConicSolution, SolveError> {
    let n = problem.num_vars();
    let m = problem.num_rows();
    let mut status = None;
    let mut objective = None;
    let mut iterations = 0usize;
    let mut u = vec![0.0; n];
    let mut y = vec![0.0; m];
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let bad = |what: &str| SolveError::Engine(format!("result file: bad {what} in `{line}`"));
        match it.next().unwrap() {
            "status" => {
                status = Some(match it.next().ok_or_else(|| bad("status"))? {
                    "optimal" => SolveStatus::Optimal,
                    "infeasible" => SolveStatus::Infeasible,
                    "unbounded" => SolveStatus::Unbounded,
                    "iterlimit" => SolveStatus::IterLimit,
                    other => {
                        return Err(SolveError::Engine(format!(
                            "result file: unknown status `{other}`"
                        )))
                    }
                });
            }
            "objective" => {
                objective = Some(
                    it.next()
                        .ok_or_else(|| bad("objective"))?
                        .parse::<f64>()
                        .map_err(|_| bad("objective"))?,
                );
            }
            "iterations" => {
                iterations = it
                    .next()
                    .ok_or_else(|| bad("iterations"))?
                    .parse()
                    .map_err(|_| bad("iterations"))?;
            }
            "u" => {
                let i: usize = it
                    .next()
                    .ok_or_else(|| bad("u index"))?
                    .parse()
                    .map_err(|_| bad("u index"))?;
                let v: f64 = it
                    .next()
                    .ok_or_else(|| bad("u value"))?
                    .parse()
                    .map_err(|_| bad("u value"))?;
                if i >= n {
                    return Err(bad("u index range"));
                }
                u[i] = v;
            }
            "y" => {
                let i: usize = it
                    .next()
                    .ok_or_else(|| bad("y index"))?
                    .parse()
                    .map_err(|_| bad("y index"))?;
                let v: f64 = it
                    .next()
                    .ok_or_else(|| bad("y value"))?
                    .parse()
                    .map_err(|_| bad("y value"))?;
                if i >= m {
                    return Err(bad("y index range"));
                }
                y[i] = v;
            }
            other => {
                return Err(SolveError::Engine(format!(
                    "result file: unknown directive `{other}`"
                )))
            }
        }
    }
    let status = status.ok_or_else(|| SolveError::Engine("result file: missing status".into()))?;
    // Reconstruct the slack from the primal.
    let a = CscMatrix::from_triplets(m, n, problem.triplets());
    let mut s = vec![0.0; m];
    a.matvec(&u, &mut s);
    for (r, b) in problem.rhs().iter().enumerate() {
        s[r] = b - s[r];
    }
    let objective = objective.unwrap_or_else(|| {
        problem
            .objective()
            .iter()
            .zip(&u)
            .map(|(c, v)| c * v)
            .sum()
    });
    Ok(ConicSolution {
        status,
        u,
        y,
        s,
        objective,
        residuals: Residuals::default(),
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parsing() {
        assert_eq!(EngineSpec::parse("builtin").unwrap(), EngineSpec::Builtin);
        assert_eq!(
            EngineSpec::parse("external:/usr/bin/solver").unwrap(),
            EngineSpec::External(PathBuf::from("/usr/bin/solver"))
        );
        assert!(EngineSpec::parse("external:").is_err());
        assert!(EngineSpec::parse("gurobi").is_err());
    }

    #[test]
    fn result_parsing_reconstructs_slack() {
        let mut p = ConicProblem::new();
        let x = p.new_var("x");
        p.add_objective(x, 1.0);
        p.leq_row(&[(x, 1.0)], 2.0);
        let sol = parse_result("status optimal\nobjective 1.5\nu 0 1.5\niterations 7\n", &p)
            .unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.iterations, 7);
        assert!((sol.s[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn result_parsing_rejects_garbage() {
        let mut p = ConicProblem::new();
        let _ = p.new_var("x");
        p.leq_row(&[], 0.0);
        assert!(parse_result("status sideways\n", &p).is_err());
        assert!(parse_result("objective 1.0\n", &p).is_err());
        assert!(parse_result("status optimal\nu 5 1.0\n", &p).is_err());
    }
}
