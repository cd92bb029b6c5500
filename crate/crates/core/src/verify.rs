//! Residual and reference-solve diagnostics, and mesh-refinement studies.

use std::io::{self, Write};
use std::time::Duration;

use nalgebra::DVector;
use rayon::prelude::*;
use thiserror::Error;

use crate::assembly::{omega_gauss_points, AssemblyError};
use crate::energy::Problem;
use crate::fem::{self, FeFunction};
use crate::mountain_pass::{self, SolverConfig, SolverError};

pub const CSV_HEADER: &str = "h,n_dof,R_L1,R_L2,E_L1,E_L2,iterations,wall_time_s";

/// Ratio of ‖u*‖ to ‖t*(u₁)u₁‖ below which a run counts as trivial capture.
pub const TRIVIAL_RATIO: f64 = 1e-2;

/// Relative residual the reference solve must reach.
pub const REFERENCE_CERTIFICATE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error("reference solve residual {0:e} exceeds the certificate")]
    Certificate(f64),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{0}")]
    Setup(String),
}

/// `(R_L1, R_L2)` of `r = -𝓛u - f(u)` over Ω with element Gauss quadrature.
pub fn residual_norms(problem: &Problem, u: &FeFunction) -> Result<(f64, f64), AssemblyError> {
    let nl = problem.nonlinearity();
    let (mut l1, mut l2) = (0.0, 0.0);
    for (x, w) in omega_gauss_points(problem.mesh()) {
        let r = problem.form().apply_operator(u, x)? - nl.f(u.eval(x));
        l1 += w * r.abs();
        l2 += w * r * r;
    }
    Ok((l1, l2.sqrt()))
}

#[derive(Debug, Clone)]
pub struct ReferenceErrors {
    pub e_l1: f64,
    pub e_l2: f64,
    /// Solution of the linear problem with right-hand side `f(u*)`.
    pub u_bar: DVector<f64>,
    /// Relative residual of the linear solve.
    pub certificate: f64,
}

/// Solves `-𝓛ū = f(u*)` with the same constraint handling and measures
/// `u* - ū` over Ω.
pub fn reference_errors(problem: &Problem, u_star: &DVector<f64>) -> Result<ReferenceErrors, VerifyError> {
    let load = problem.load(u_star);
    let mut rhs = load.clone();
    if let Some(m1) = problem.grounding() {
        // same rank-one grounding as the descent system; fixes the mean of ū
        rhs += m1 * (m1.dot(u_star) / problem.omega_length());
    }
    let u_bar = problem.solve_linear_system(&rhs);
    let certificate = (problem.linear_operator() * &u_bar - &rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
    if certificate > REFERENCE_CERTIFICATE {
        return Err(VerifyError::Certificate(certificate));
    }
    let diff = problem.form().extend(&(u_star - &u_bar));
    let e_l1 = fem::integrate_over_omega(&diff, |_, v| v.abs());
    let e_l2 = fem::integrate_over_omega(&diff, |_, v| v * v).sqrt();
    Ok(ReferenceErrors {
        e_l1,
        e_l2,
        u_bar,
        certificate,
    })
}

/// One row of a refinement table.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseReport {
    pub h: f64,
    pub n_dof: usize,
    pub r_l1: f64,
    pub r_l2: f64,
    pub e_l1: f64,
    pub e_l2: f64,
    pub iterations: usize,
    pub wall_time: Duration,
    pub converged: bool,
    pub trivial: bool,
}

impl CaseReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.8e},{:.8e},{:.8e},{:.8e},{},{:.3}",
            self.h,
            self.n_dof,
            self.r_l1,
            self.r_l2,
            self.e_l1,
            self.e_l2,
            self.iterations,
            self.wall_time.as_secs_f64()
        )
    }

    pub fn norms(&self) -> [f64; 4] {
        [self.r_l1, self.r_l2, self.e_l1, self.e_l2]
    }
}

/// Outcome of a single case run, including the solution coefficients.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub report: CaseReport,
    pub solution: DVector<f64>,
    pub records: Vec<mountain_pass::IterationRecord>,
}

/// Solves and verifies one discretized problem.
pub fn run_case(problem: &Problem, initial: &DVector<f64>, solver: &SolverConfig) -> Result<CaseRun, VerifyError> {
    run_case_logged(problem, initial, solver, None)
}

pub fn run_case_logged(
    problem: &Problem,
    initial: &DVector<f64>,
    solver: &SolverConfig,
    log: Option<&mut dyn Write>,
) -> Result<CaseRun, VerifyError> {
    let result = mountain_pass::solve_logged(problem, initial, solver, log)?;
    let u = problem.form().extend(&result.solution);
    let (r_l1, r_l2) = residual_norms(problem, &u)?;
    let reference = reference_errors(problem, &result.solution)?;
    let t0 = problem.t_star(initial).map_err(SolverError::Initial)?;
    let (start_l2, _) = problem.norms(&(initial * t0));
    let (final_l2, _) = problem.norms(&result.solution);
    let mesh = problem.mesh();
    Ok(CaseRun {
        report: CaseReport {
            h: mesh.h(),
            n_dof: mesh.n_elements(),
            r_l1,
            r_l2,
            e_l1: reference.e_l1,
            e_l2: reference.e_l2,
            iterations: result.iterations,
            wall_time: result.wall_time,
            converged: result.converged,
            trivial: final_l2 < TRIVIAL_RATIO * start_l2,
        },
        solution: result.solution,
        records: result.records,
    })
}

/// Least-squares slope of `log v` against `log h`; `None` with fewer than
/// three usable points.
pub fn fit_order(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, v)| *h > 0.0 && *v > 0.0 && v.is_finite())
        .map(|(h, v)| (h.ln(), v.ln()))
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug)]
pub struct StudyRow {
    pub h: f64,
    pub outcome: Result<CaseReport, String>,
}

#[derive(Debug)]
pub struct Study {
    pub rows: Vec<StudyRow>,
    /// Fitted orders for `R_L1, R_L2, E_L1, E_L2`.
    pub orders: [Option<f64>; 4],
    /// Mesh sizes left out of the fits (failed or trivial rows).
    pub excluded: Vec<f64>,
}

impl Study {
    pub fn reports(&self) -> impl Iterator<Item = &CaseReport> {
        self.rows.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for row in &self.rows {
            match &row.outcome {
                Ok(r) => writeln!(out, "{}", r.csv_row())?,
                Err(e) => {
                    writeln!(out, "# h={} failed: {e}", row.h)?;
                    writeln!(out, "{},,nan,nan,nan,nan,,", row.h)?;
                }
            }
        }
        Ok(())
    }

    /// One gnuplot data block per norm: `log10 h  log10 value`.
    pub fn write_plot<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (k, name) in ["R_L1", "R_L2", "E_L1", "E_L2"].iter().enumerate() {
            if k > 0 {
                writeln!(out, "\n")?;
            }
            match self.orders[k] {
                Some(p) => writeln!(out, "# {name} order {p:.4}")?,
                None => writeln!(out, "# {name}")?,
            }
            for r in self.reports() {
                let v = r.norms()[k];
                if v > 0.0 {
                    writeln!(out, "{:.10} {:.10}", r.h.log10(), v.log10())?;
                }
            }
        }
        Ok(())
    }
}

/// Runs `build(h)` plus a full solve for every mesh size, `jobs` at a time,
/// and fits convergence orders on the converged, non-trivial rows.
pub fn convergence_study<B>(hs: &[f64], build: B, solver: &SolverConfig, jobs: usize) -> Result<Study, VerifyError>
where
    B: Fn(f64) -> Result<(Problem, DVector<f64>), String> + Sync,
{
    if hs.len() < 3 {
        return Err(VerifyError::Setup(format!(
            "a refinement study needs at least 3 mesh sizes, got {}",
            hs.len()
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| VerifyError::Setup(e.to_string()))?;
    let rows: Vec<StudyRow> = pool.install(|| {
        hs.par_iter()
            .map(|&h| {
                let outcome = build(h).and_then(|(problem, initial)| {
                    run_case(&problem, &initial, solver)
                        .map(|run| run.report)
                        .map_err(|e| e.to_string())
                });
                StudyRow { h, outcome }
            })
            .collect()
    });
    let mut excluded = Vec::new();
    let mut usable = Vec::new();
    for row in &rows {
        match &row.outcome {
            Ok(r) if r.converged && !r.trivial => usable.push(r.clone()),
            _ => excluded.push(row.h),
        }
    }
    let orders = std::array::from_fn(|k| {
        let pts: Vec<(f64, f64)> = usable.iter().map(|r| (r.h, r.norms()[k])).collect();
        fit_order(&pts)
    });
    Ok(Study { rows, orders, excluded })
}
