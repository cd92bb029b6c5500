//! Acceptance runner: one PASS/FAIL line per criterion.
//!
//! Exits 0 regardless of outcome so the workspace test run stays usable;
//! set `ACCEPTANCE_STRICT=1` to exit 1 when any criterion fails.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use common::*;
use nonlocal_mp::assembly::NonlocalForm;
use nonlocal_mp::cli::{self, RunArgs, EXIT_TRIVIAL};
use nonlocal_mp::config::{RunConfig, PRESETS};
use nonlocal_mp::energy::Nonlinearity;
use nonlocal_mp::fem::Mesh;
use nonlocal_mp::kernels::Kernel;
use nonlocal_mp::mountain_pass::SolverError;
use nonlocal_mp::verify::{self, convergence_study, CaseReport, Study, VerifyError};
use rand::rngs::StdRng;
use rand::SeedableRng;

const JOBS: usize = 4;

#[derive(Clone)]
struct Outcome {
    pass: bool,
    detail: String,
}

fn within_factor(value: f64, target: f64, factor: f64) -> bool {
    value > 0.0 && value <= target * factor && value >= target / factor
}

fn study(cfg: &RunConfig, hs: &[f64]) -> Study {
    convergence_study(hs, |h| cfg.build(h).map_err(|e| e.to_string()), &cfg.solver, JOBS).expect("study setup")
}

fn row_summary(r: &CaseReport) -> String {
    format!(
        "h={:.4} R=({:.3e},{:.3e}) E=({:.3e},{:.3e}) it={}",
        r.h, r.r_l1, r.r_l2, r.e_l1, r.e_l2, r.iterations
    )
}

fn case1_reproduction() -> Outcome {
    let cfg = RunConfig::preset("case1").unwrap();
    let (problem, initial) = cfg.build(cfg.h_list[0]).unwrap();
    match verify::run_case(&problem, &initial, &cfg.solver) {
        Ok(run) => {
            let r = run.report;
            let targets = [0.04657529, 0.04744037, 0.45900719, 0.26293927];
            let misses: Vec<String> = ["R_L1", "R_L2", "E_L1", "E_L2"]
                .iter()
                .zip(r.norms().iter().zip(targets))
                .filter(|(_, (v, t))| !within_factor(**v, *t, 3.0))
                .map(|(n, (v, t))| format!("{n} {v:.3e} vs {t}"))
                .collect();
            let iter_ok = within_factor(r.iterations as f64, 14.0, 3.0);
            let pass = r.converged && misses.is_empty() && iter_ok;
            let mut detail = row_summary(&r);
            if !misses.is_empty() {
                detail += &format!("; outside x3: {}", misses.join(", "));
            }
            Outcome { pass, detail }
        }
        Err(e) => Outcome {
            pass: false,
            detail: e.to_string(),
        },
    }
}

fn case1_orders() -> Outcome {
    let cfg = RunConfig::preset("case1").unwrap();
    let s = study(&cfg, &cfg.h_list[..4]);
    let [r1, r2, _, _] = s.orders;
    let pass = matches!(r1, Some(p) if (0.7..=1.3).contains(&p)) && matches!(r2, Some(p) if (0.3..=0.7).contains(&p));
    let rows: Vec<String> = s.reports().map(|r| format!("{:.3e}/{:.3e}", r.r_l1, r.r_l2)).collect();
    Outcome {
        pass,
        detail: format!(
            "slopes R_L1={r1:.3?} R_L2={r2:.3?}; excluded {:?}; rows {}",
            s.excluded,
            rows.join(" ")
        ),
    }
}

fn neumann_criteria() -> (Outcome, Outcome) {
    let cfg = RunConfig::preset("case5").unwrap();
    let hs = &cfg.h_list[..3];
    let mut reports = Vec::new();
    let mut worst_residual: f64 = 0.0;
    let mut errors = Vec::new();
    for &h in hs {
        let (problem, initial) = cfg.build(h).unwrap();
        match verify::run_case(&problem, &initial, &cfg.solver) {
            Ok(run) => {
                let u = problem.form().extend(&run.solution);
                worst_residual = worst_residual.max(problem.form().exterior_constraint_residual(&u) / u.max_abs());
                reports.push(run.report);
            }
            Err(e) => errors.push(format!("h={h}: {e}")),
        }
    }
    let monotone = errors.is_empty() && reports.windows(2).all(|w| w[1].r_l1 < w[0].r_l1);
    let e_ok = errors.is_empty() && within_factor(reports[2].e_l1, 0.07688191, 3.0);
    let rows: Vec<String> = reports.iter().map(row_summary).collect();
    let study = Outcome {
        pass: monotone && e_ok,
        detail: format!(
            "R_L1 monotone={monotone}, E_L1(h=0.0375) within x3 of 0.0769={e_ok}; {}{}",
            rows.join("; "),
            errors.join("; ")
        ),
    };
    let fidelity = Outcome {
        pass: errors.is_empty() && worst_residual <= 1e-8,
        detail: format!("max exterior residual / ||u||_inf = {worst_residual:.3e} over {} solves", reports.len()),
    };
    (study, fidelity)
}

fn coercivity() -> Outcome {
    let mesh = Arc::new(Mesh::build(-PI, PI, 0.157).unwrap());
    let kernels = [
        Kernel::exponential(1.0).unwrap(),
        Kernel::gaussian(1.0).unwrap(),
        Kernel::inverted_mexican_hat(1.0, 2.0, 1.0, 2.0).unwrap(),
        Kernel::logistic(1.0, 4.0).unwrap(),
        Kernel::power_law(1.0, 4.0).unwrap(),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for k in kernels {
        let form = NonlocalForm::assemble_dirichlet(&mesh, &k, 4).unwrap();
        let lmin = form.matrix().clone().symmetric_eigenvalues().min();
        pass &= lmin > 0.0;
        parts.push(format!("{}={lmin:.3e}", k.name()));
    }
    Outcome {
        pass,
        detail: format!("lambda_min {}", parts.join(" ")),
    }
}

fn bilinear_oracle() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for k in [Kernel::exponential(1.0).unwrap(), Kernel::gaussian(1.0).unwrap()] {
        // 81 elements x 50 points: a 4050² midpoint grid aligned with the mesh
        let (_, _, rel) = bilinear_oracle_gap(&k, 0.078, 50);
        pass &= rel <= 1e-4;
        parts.push(format!("{} rel={rel:.2e}", k.name()));
    }
    Outcome {
        pass,
        detail: parts.join(", "),
    }
}

fn t_star_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for nl in Nonlinearity::ALL {
        let (p, _) = oracle_problem(nl);
        for _ in 0..20 {
            let u = random_direction(&mut rng, &p, 10.0);
            let t = p.t_star(&u).unwrap();
            let grid = RayOracle::new(&p, &u).grid_argmax(10.0, 1e-4);
            worst = worst.max((t - grid).abs());
            count += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-3,
        detail: format!("{count} directions, max |t* - grid argmax| = {worst:.2e}"),
    }
}

fn gradient_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(99);
    let eps = [1e-4, 1e-5];
    let mut min_order = f64::INFINITY;
    for nl in Nonlinearity::ALL {
        let (p, _) = oracle_problem(nl);
        for _ in 0..20 {
            let (w, v) = random_fd_pair(&mut rng, p.form().n_unknowns());
            let errs = fd_errors(&p, &w, &v, &eps);
            min_order = min_order.min(observed_order(&errs, &eps));
        }
    }
    Outcome {
        pass: min_order >= 1.9,
        detail: format!("80 pairs, minimum observed order {min_order:.3}"),
    }
}

fn invariants() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for preset in PRESETS.iter() {
        let mut cfg = RunConfig::preset(preset.name).unwrap();
        cfg.solver.check_invariants = true;
        let mut violations = 0;
        let mut other = 0;
        let mut steps = 0;
        for &h in &cfg.h_list {
            let (problem, initial) = cfg.build(h).unwrap();
            match verify::run_case(&problem, &initial, &cfg.solver) {
                Ok(run) => steps += run.report.iterations,
                Err(VerifyError::Solver(SolverError::Invariant { .. })) => violations += 1,
                Err(_) => other += 1,
            }
        }
        pass &= violations == 0;
        parts.push(format!("{} steps={steps} violations={violations} other_errors={other}", preset.name));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn trivial_capture() -> Outcome {
    let cfg = RunConfig::preset("case2").unwrap();
    let coarse = study(&cfg, &cfg.h_list[..4]);
    let coarse_clean = coarse.rows.iter().all(|r| matches!(&r.outcome, Ok(rep) if !rep.trivial));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run(
        &RunArgs {
            case: Some("case2".into()),
            h: Some("2*pi/320".into()),
            ..Default::default()
        },
        &mut out,
        &mut err,
    );
    let text = String::from_utf8_lossy(&out);
    let fine_row = text
        .lines()
        .skip_while(|l| !l.starts_with("h,"))
        .nth(1)
        .unwrap_or("")
        .to_string();
    let rows: Vec<String> = coarse.reports().map(|r| format!("{:.3e}", r.r_l1)).collect();
    Outcome {
        pass: coarse_clean && code == EXIT_TRIVIAL,
        detail: format!(
            "h=0.019 exit code {code} (want {EXIT_TRIVIAL}), row [{fine_row}]; h>=0.039 non-trivial={coarse_clean} R_L1 {}",
            rows.join(" ")
        ),
    }
}

fn main() {
    let start = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        println!(
            "{} {id:>2} {name}: {} ({:.1}s)",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        results.push((id, name, o));
    };
    record(1, "case 1 reproduction", &case1_reproduction);
    record(2, "case 1 convergence orders", &case1_orders);
    let (neumann_study, neumann_fidelity) = neumann_criteria();
    record(3, "case 5 Neumann study", &|| neumann_study.clone());
    record(4, "coercivity witness", &coercivity);
    record(5, "bilinear-form oracle", &bilinear_oracle);
    record(6, "t* oracle", &t_star_oracle);
    record(7, "gradient finite differences", &gradient_oracle);
    record(8, "algorithm invariants", &invariants);
    record(9, "trivial-capture detection", &trivial_capture);
    record(10, "Neumann constraint fidelity", &|| neumann_fidelity.clone());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {}/{} passed in {:.1}s{}",
        results.len() - failed.len(),
        results.len(),
        start.elapsed().as_secs_f64(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing {failed:?}")
        }
    );
    if !failed.is_empty() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
