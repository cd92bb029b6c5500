//! Command-line driver: single solves and refinement studies from a
//! configuration file or a bundled case.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::config::{self, ConfigError, RunConfig};
use crate::verify::{self, CSV_HEADER};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_TRIVIAL: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub config: Option<PathBuf>,
    pub case: Option<String>,
    /// Overrides the configured mesh size and forces a single solve.
    pub h: Option<String>,
    /// Forces a refinement study over `h_list`.
    pub study: bool,
    pub dump_matrix: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub list_cases: bool,
    pub check_invariants: bool,
}

/// Runs the command and returns the process exit code.
pub fn run(args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    if args.list_cases {
        let _ = write!(stdout, "{}", config::list_cases());
        return EXIT_CONVERGED;
    }
    let cfg = match load(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "config error: {e}");
            return EXIT_CONFIG;
        }
    };
    let h_override = match args.h.as_deref().map(config::parse_real).transpose() {
        Ok(h) => h,
        Err(e) => {
            let _ = writeln!(stderr, "config error: --h: {e}");
            return EXIT_CONFIG;
        }
    };
    for line in cfg.to_text().lines() {
        let _ = writeln!(stdout, "# {line}");
    }
    if let Some(dir) = &args.out {
        if let Err(e) = fs::create_dir_all(dir) {
            let _ = writeln!(stderr, "cannot create {}: {e}", dir.display());
            return EXIT_CONFIG;
        }
    }
    let study = h_override.is_none() && (args.study || (cfg.h.is_none() && cfg.h_list.len() > 1));
    let outcome = if study {
        run_study(&cfg, args, stdout, stderr)
    } else {
        run_single(&cfg, h_override.unwrap_or_else(|| cfg.single_h()), args, stdout, stderr)
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "i/o error: {e}");
            EXIT_SOLVER
        }
    }
}

fn load(args: &RunArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = match (&args.config, &args.case) {
        (Some(_), Some(_)) => return Err(ConfigError::Invalid("give either --config or --case, not both".into())),
        (Some(path), None) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => return Err(ConfigError::Invalid("no --config or --case given".into())),
    };
    cfg.solver.check_invariants |= args.check_invariants;
    Ok(cfg)
}

/// Explicit path from the config, else `<out>/<file>` when `--out` is set.
fn artifact(explicit: &Option<PathBuf>, out: &Option<PathBuf>, file: &str) -> Option<PathBuf> {
    explicit.clone().or_else(|| out.as_ref().map(|d| d.join(file)))
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn dump(cfg: &RunConfig, h: f64, path: &Path, stderr: &mut dyn Write) -> io::Result<bool> {
    match cfg.build(h) {
        Ok((problem, _)) => {
            let mut w = create(path)?;
            problem.form().dump_matrix(&mut w)?;
            w.flush()?;
            Ok(true)
        }
        Err(e) => {
            writeln!(stderr, "setup error: {e}")?;
            Ok(false)
        }
    }
}

fn run_single(
    cfg: &RunConfig,
    h: f64,
    args: &RunArgs,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> io::Result<i32> {
    let (problem, initial) = match cfg.build(h) {
        Ok(p) => p,
        Err(e) => {
            writeln!(stderr, "setup error: {e}")?;
            return Ok(EXIT_CONFIG);
        }
    };
    for w in problem.form().warnings() {
        writeln!(stderr, "warning: {w}")?;
    }
    if let Some(path) = &args.dump_matrix {
        let mut w = create(path)?;
        problem.form().dump_matrix(&mut w)?;
        w.flush()?;
    }

    let log_path = args.log.clone().or_else(|| artifact(&cfg.outputs.log, &args.out, "log.csv"));
    let mut log_file = log_path.as_deref().map(create).transpose()?;
    let result = {
        let log: &mut dyn Write = match log_file.as_mut() {
            Some(f) => f,
            None => &mut *stdout,
        };
        verify::run_case_logged(&problem, &initial, &cfg.solver, Some(log))
    };
    if let Some(f) = log_file.as_mut() {
        f.flush()?;
    }

    let run = match result {
        Ok(run) => run,
        Err(e) => {
            writeln!(stderr, "solver error: {e}")?;
            if let verify::VerifyError::Solver(se) = &e {
                if let (Some(last), Some(path)) =
                    (se.partial(), artifact(&cfg.outputs.solution, &args.out, "solution.csv"))
                {
                    problem.form().extend(&last.solution).write_csv(create(&path)?)?;
                    writeln!(stderr, "last iterate written to {}", path.display())?;
                }
            }
            return Ok(EXIT_SOLVER);
        }
    };

    if let Some(path) = artifact(&cfg.outputs.solution, &args.out, "solution.csv") {
        let mut w = create(&path)?;
        problem.form().extend(&run.solution).write_csv(&mut w)?;
        w.flush()?;
    }
    let report = run.report;
    writeln!(stdout, "{CSV_HEADER}")?;
    writeln!(stdout, "{}", report.csv_row())?;
    if let Some(path) = artifact(&cfg.outputs.report, &args.out, "report.csv") {
        let mut w = create(&path)?;
        writeln!(w, "{CSV_HEADER}")?;
        writeln!(w, "{}", report.csv_row())?;
        w.flush()?;
    }
    if report.trivial {
        writeln!(stderr, "trivial capture: solution collapsed towards zero")?;
        return Ok(EXIT_TRIVIAL);
    }
    Ok(EXIT_CONVERGED)
}

fn run_study(cfg: &RunConfig, args: &RunArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> io::Result<i32> {
    let hs = if cfg.h_list.is_empty() {
        vec![cfg.single_h()]
    } else {
        cfg.h_list.clone()
    };
    if let Some(path) = &args.dump_matrix {
        if !dump(cfg, hs[0], path, stderr)? {
            return Ok(EXIT_CONFIG);
        }
    }
    let study = match verify::convergence_study(
        &hs,
        |h| cfg.build(h).map_err(|e| e.to_string()),
        &cfg.solver,
        args.jobs.max(1),
    ) {
        Ok(s) => s,
        Err(e) => {
            writeln!(stderr, "study error: {e}")?;
            return Ok(EXIT_CONFIG);
        }
    };
    study.write_csv(&mut *stdout)?;
    let names = ["R_L1", "R_L2", "E_L1", "E_L2"];
    for (name, order) in names.iter().zip(study.orders) {
        match order {
            Some(p) => writeln!(stdout, "# order {name} {p:.4}")?,
            None => writeln!(stdout, "# order {name} unavailable")?,
        }
    }
    let mut any_trivial = false;
    let mut any_failed = false;
    for row in &study.rows {
        match &row.outcome {
            Ok(r) if r.trivial => {
                any_trivial = true;
                writeln!(stdout, "# trivial capture at h = {}", r.h)?;
            }
            Ok(_) => {}
            Err(e) => {
                any_failed = true;
                writeln!(stderr, "h = {}: {e}", row.h)?;
            }
        }
    }
    if let Some(path) = artifact(&cfg.outputs.report, &args.out, "report.csv") {
        let mut w = create(&path)?;
        study.write_csv(&mut w)?;
        w.flush()?;
    }
    if let Some(path) = artifact(&cfg.outputs.plot, &args.out, "plot.dat") {
        let mut w = create(&path)?;
        study.write_plot(&mut w)?;
        w.flush()?;
    }
    Ok(if any_failed {
        EXIT_SOLVER
    } else if any_trivial {
        EXIT_TRIVIAL
    } else {
        EXIT_CONVERGED
    })
}
