//! Steepest-descent mountain-pass iteration on the Nehari-type manifold
//! `{ t*(w) w }`.

use std::io::{self, Write};
use std::time::{Duration, Instant};

use nalgebra::DVector;
use thiserror::Error;

use crate::energy::{EnergyError, Problem};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Stop once the H¹(Ω) norm of the descent solve drops below this.
    pub epsilon: f64,
    /// Initial step length, restored at every iteration.
    pub delta: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Assert descent, energy decrease and ray stationarity each step.
    pub check_invariants: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            delta: 1.0,
            max_iterations: 10_000,
            max_halvings: 60,
            check_invariants: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: f64,
    pub grad_norm_h1: f64,
    pub t_star: f64,
    pub halvings: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    /// Coefficients on the unknowns.
    pub solution: DVector<f64>,
    pub energy: f64,
    pub converged: bool,
    /// Number of accepted updates.
    pub iterations: usize,
    pub records: Vec<IterationRecord>,
    pub wall_time: Duration,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("initial guess: {0}")]
    Initial(#[source] EnergyError),
    #[error("descent direction vanished exactly")]
    ZeroGradient,
    #[error("no energy decrease after {halvings} step halvings at iteration {iteration}")]
    Stall {
        iteration: usize,
        halvings: usize,
        last: Box<SolveResult>,
    },
    #[error("no convergence within {iterations} iterations")]
    MaxIterations { iterations: usize, last: Box<SolveResult> },
    #[error("invariant violated at iteration {iteration}: {what}")]
    Invariant { iteration: usize, what: String },
}

impl SolverError {
    /// Last iterate reached before the failure, when there is one.
    pub fn partial(&self) -> Option<&SolveResult> {
        match self {
            SolverError::Stall { last, .. } | SolverError::MaxIterations { last, .. } => Some(last),
            _ => None,
        }
    }
}

/// Solves `G b = g` and returns `(b, ‖b‖_{H¹(Ω)})`.
pub fn descent_direction(problem: &Problem, gradient: &DVector<f64>) -> Result<(DVector<f64>, f64), SolverError> {
    let b = problem.solve_descent_system(gradient);
    let (_, h1) = problem.norms(&b);
    if !(h1 > 0.0) {
        return Err(SolverError::ZeroGradient);
    }
    Ok((b, h1))
}

/// Relative ray stationarity `(B[w,w] - ∫f(w)w) / B[w,w]`.
pub fn ray_stationarity(problem: &Problem, w: &DVector<f64>) -> f64 {
    let b_ww = problem.form().apply(w, w);
    (b_ww - problem.load(w).dot(w)) / b_ww
}

pub fn solve(problem: &Problem, initial: &DVector<f64>, config: &SolverConfig) -> Result<SolveResult, SolverError> {
    solve_logged(problem, initial, config, None)
}

/// As [`solve`], streaming one CSV row per iteration to `log`.
pub fn solve_logged(
    problem: &Problem,
    initial: &DVector<f64>,
    config: &SolverConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    let t0 = problem.t_star(initial).map_err(SolverError::Initial)?;
    let mut w = initial * t0;
    let mut energy = problem.energy(&w);
    let mut t_last = t0;
    let mut records = Vec::new();
    if let Some(out) = log.as_deref_mut() {
        let _ = writeln!(out, "iteration,energy,grad_norm_h1,t_star,halvings");
    }
    let snapshot = |w: &DVector<f64>, energy: f64, iterations: usize, records: &[IterationRecord], converged: bool| {
        SolveResult {
            solution: w.clone(),
            energy,
            converged,
            iterations,
            records: records.to_vec(),
            wall_time: start.elapsed(),
        }
    };

    for iteration in 0..=config.max_iterations {
        let g = problem.gradient(&w);
        let (b, norm) = descent_direction(problem, &g)?;
        if norm <= config.epsilon {
            let record = IterationRecord {
                iteration,
                energy,
                grad_norm_h1: norm,
                t_star: t_last,
                halvings: 0,
            };
            write_record(&mut log, &record);
            records.push(record);
            return Ok(snapshot(&w, energy, iteration, &records, true));
        }
        if iteration == config.max_iterations {
            break;
        }
        let v = b / -norm;
        if config.check_invariants && !(g.dot(&v) < 0.0) {
            return Err(SolverError::Invariant {
                iteration,
                what: format!("gᵀv = {:e} is not negative", g.dot(&v)),
            });
        }

        let mut step = config.delta;
        let mut accepted = None;
        for halvings in 0..=config.max_halvings {
            let trial = &w + &v * step;
            if let Ok(t) = problem.t_star(&trial) {
                let candidate = trial * t;
                let e = problem.energy(&candidate);
                if e < energy {
                    accepted = Some((candidate, e, t, halvings));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((candidate, e, t, halvings)) = accepted else {
            return Err(SolverError::Stall {
                iteration,
                halvings: config.max_halvings,
                last: Box::new(snapshot(&w, energy, iteration, &records, false)),
            });
        };

        if config.check_invariants {
            let stat = ray_stationarity(problem, &candidate);
            if !(e < energy) || stat.abs() > 1e-6 {
                return Err(SolverError::Invariant {
                    iteration,
                    what: format!("energy {energy:e} -> {e:e}, ray stationarity {stat:e}"),
                });
            }
        }

        let record = IterationRecord {
            iteration,
            energy,
            grad_norm_h1: norm,
            t_star: t,
            halvings,
        };
        write_record(&mut log, &record);
        records.push(record);
        log::debug!("iter {iteration}: I = {e:.10e}, |b| = {norm:.3e}, halvings {halvings}");
        w = candidate;
        energy = e;
        t_last = t;
    }
    Err(SolverError::MaxIterations {
        iterations: config.max_iterations,
        last: Box::new(snapshot(&w, energy, config.max_iterations, &records, false)),
    })
}

fn write_record(log: &mut Option<&mut dyn Write>, r: &IterationRecord) {
    if let Some(out) = log.as_deref_mut() {
        let res: io::Result<()> = writeln!(
            out,
            "{},{:.17e},{:.17e},{:.17e},{}",
            r.iteration, r.energy, r.grad_norm_h1, r.t_star, r.halvings
        );
        if let Err(e) = res {
            log::warn!("iteration log write failed: {e}");
        }
    }
}
