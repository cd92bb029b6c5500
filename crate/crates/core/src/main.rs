use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nonlocal_mp::cli::{self, RunArgs};

/// Mountain-pass solver for nonlocal semilinear problems on an interval.
///
/// Exit codes: 0 converged, 2 trivial capture, 3 solver error, 4 config error.
#[derive(Parser, Debug)]
#[command(name = "nlmp", version)]
struct Args {
    /// Run configuration file (`key = value` lines).
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Bundled case preset (see --list-cases).
    #[arg(long, value_name = "NAME")]
    case: Option<String>,
    /// Single solve at this mesh size (accepts `2*pi/20`).
    #[arg(long, value_name = "H", allow_hyphen_values = true)]
    h: Option<String>,
    /// Refinement study over `h_list` even when `h` is set.
    #[arg(long)]
    study: bool,
    /// Write the assembled matrix as `row col value` lines.
    #[arg(long, value_name = "PATH")]
    dump_matrix: Option<PathBuf>,
    /// Iteration log destination (default: stdout).
    #[arg(long, value_name = "PATH")]
    log: Option<PathBuf>,
    /// Directory for solution, log, report and plot files.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Parallel rows in a refinement study.
    #[arg(long, value_name = "N", default_value_t = 1)]
    jobs: usize,
    /// Print the bundled presets.
    #[arg(long)]
    list_cases: bool,
    /// Assert descent, energy decrease and ray stationarity every step.
    #[arg(long)]
    check_invariants: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let a = Args::parse();
    let args = RunArgs {
        config: a.config,
        case: a.case,
        h: a.h,
        study: a.study,
        dump_matrix: a.dump_matrix,
        log: a.log,
        out: a.out,
        jobs: a.jobs,
        list_cases: a.list_cases,
        check_invariants: a.check_invariants,
    };
    let code = cli::run(&args, &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(code as u8)
}
