//! Flat `key = value` run configuration and the bundled case presets.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DVector;
use thiserror::Error;

use crate::assembly::{AssemblyError, NonlocalForm};
use crate::energy::{DescentMetric, EnergyError, Nonlinearity, Problem};
use crate::fem::{Constraint, FeFunction, FemError, Mesh};
use crate::kernels::{Kernel, KernelError, KernelShape};
use crate::mountain_pass::SolverConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {msg}")]
    BadValue { line: usize, key: String, msg: String },
    #[error("{0}")]
    Invalid(String),
    #[error("kernel: {0}")]
    Kernel(#[from] KernelError),
    #[error("unknown case `{0}` (see --list-cases)")]
    UnknownCase(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Errors while turning a configuration into a discretized problem.
#[derive(Debug, Error)]
pub enum SetupError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("initial guess {path}: {source}")]
    InitialGuess {
        path: PathBuf,
        #[source]
        source: FemError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    Sine,
    /// Indicator of `[a, b)`.
    Step(f64, f64),
    /// Nodal `x,value` file, linearly resampled onto the mesh.
    Csv(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub solution: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub report: Option<PathBuf>,
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: Option<String>,
    pub domain: (f64, f64),
    pub constraint: Constraint,
    /// Width added on each side of Ω for Neumann runs.
    pub neumann_extension: f64,
    pub kernel: Kernel,
    pub nonlinearity: Nonlinearity,
    pub h: Option<f64>,
    pub h_list: Vec<f64>,
    pub solver: SolverConfig,
    pub descent_metric: DescentMetric,
    pub initial_guess: InitialGuess,
    pub quad_order: usize,
    pub outputs: Outputs,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: None,
            domain: (-PI, PI),
            constraint: Constraint::Dirichlet,
            neumann_extension: 1.5,
            kernel: Kernel::exponential(1.0).expect("valid default kernel"),
            nonlinearity: Nonlinearity::Cubic,
            h: None,
            h_list: Vec::new(),
            solver: SolverConfig::default(),
            descent_metric: DescentMetric::Nonlocal,
            initial_guess: InitialGuess::Sine,
            quad_order: 4,
            outputs: Outputs::default(),
        }
    }
}

/// Parses a real number; `pi` is accepted as a factor, and factors may be
/// joined with `*` and `/` (`2*pi/20`, `-pi`).
pub fn parse_real(text: &str) -> Result<f64, String> {
    let text = text.trim();
    let (sign, body) = match text.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, text),
    };
    if body.is_empty() {
        return Err("empty number".into());
    }
    let mut value = 1.0;
    let mut op = '*';
    let mut rest = body;
    loop {
        let end = rest.find(['*', '/']).unwrap_or(rest.len());
        let token = rest[..end].trim();
        let factor = match token {
            "pi" | "π" => PI,
            _ => token.parse::<f64>().map_err(|_| format!("`{text}` is not a number"))?,
        };
        if op == '*' {
            value *= factor;
        } else {
            value /= factor;
        }
        if end == rest.len() {
            break;
        }
        op = rest[end..].chars().next().unwrap_or('*');
        rest = &rest[end + 1..];
    }
    if !value.is_finite() {
        return Err(format!("`{text}` is not finite"));
    }
    Ok(sign * value)
}

fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',').map(parse_real).collect()
}

fn parse_initial(text: &str) -> Result<InitialGuess, String> {
    let t = text.trim();
    if t == "sine" {
        return Ok(InitialGuess::Sine);
    }
    if let Some(args) = t.strip_prefix("step(").and_then(|r| r.strip_suffix(')')) {
        let v = parse_list(args)?;
        return match v[..] {
            [a, b] if a < b => Ok(InitialGuess::Step(a, b)),
            _ => Err("step needs two increasing endpoints, step(a, b)".into()),
        };
    }
    if t.is_empty() {
        return Err("empty initial guess".into());
    }
    Ok(InitialGuess::Csv(PathBuf::from(t)))
}

#[derive(Default)]
struct KernelParams {
    family: Option<(usize, String)>,
    scale: Option<f64>,
    a: Option<f64>,
    b: Option<f64>,
    big_a: Option<f64>,
    big_b: Option<f64>,
    p: Option<f64>,
}

impl KernelParams {
    fn build(&self) -> Result<Option<Kernel>, ConfigError> {
        let Some((line, family)) = &self.family else {
            if self.scale.is_some() || self.a.is_some() || self.p.is_some() {
                return Err(ConfigError::Invalid("kernel parameters given without `kernel`".into()));
            }
            return Ok(None);
        };
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| ConfigError::Invalid(format!("kernel `{family}` needs `{key}`")))
        };
        let kernel = match family.as_str() {
            "exponential" => Kernel::exponential(self.scale.unwrap_or(1.0))?,
            "gaussian" => Kernel::gaussian(self.scale.unwrap_or(1.0))?,
            "mexican_hat" => Kernel::inverted_mexican_hat(
                need(self.a, "kernel.a")?,
                need(self.b, "kernel.b")?,
                need(self.big_a, "kernel.A")?,
                need(self.big_b, "kernel.B")?,
            )?,
            "logistic" => Kernel::logistic(need(self.a, "kernel.a")?, need(self.b, "kernel.b")?)?,
            "power_law" => Kernel::power_law(need(self.a, "kernel.a")?, need(self.p, "kernel.p")?)?,
            other => {
                return Err(ConfigError::BadValue {
                    line: *line,
                    key: "kernel".into(),
                    msg: format!(
                        "unknown family `{other}` (exponential, gaussian, mexican_hat, logistic, power_law)"
                    ),
                })
            }
        };
        Ok(Some(kernel))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut kp = KernelParams::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    msg: format!("expected `key = value`, got `{content}`"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            let bad = |msg: String| ConfigError::BadValue {
                line,
                key: key.to_string(),
                msg,
            };
            let real = || parse_real(value).map_err(bad);
            let path = || Some(PathBuf::from(value));
            match key {
                "name" => cfg.name = Some(value.to_string()),
                "domain" => {
                    let v = parse_list(value).map_err(bad)?;
                    match v[..] {
                        [a, b] if a < b => cfg.domain = (a, b),
                        _ => return Err(bad("expected two increasing endpoints `a, b`".into())),
                    }
                }
                "constraint" => {
                    cfg.constraint = match value {
                        "dirichlet" => Constraint::Dirichlet,
                        "neumann" => Constraint::Neumann,
                        _ => return Err(bad("expected `dirichlet` or `neumann`".into())),
                    }
                }
                "neumann.extension" => cfg.neumann_extension = real()?,
                "kernel" => kp.family = Some((line, value.to_string())),
                "kernel.scale" => kp.scale = Some(real()?),
                "kernel.a" => kp.a = Some(real()?),
                "kernel.b" => kp.b = Some(real()?),
                "kernel.A" => kp.big_a = Some(real()?),
                "kernel.B" => kp.big_b = Some(real()?),
                "kernel.p" => kp.p = Some(real()?),
                "nonlinearity" => {
                    cfg.nonlinearity = Nonlinearity::from_name(value).ok_or_else(|| {
                        bad("expected cubic, quintic, cubic_minus_linear or allen_cahn".into())
                    })?
                }
                "h" => cfg.h = Some(real()?),
                "h_list" => cfg.h_list = parse_list(value).map_err(bad)?,
                "epsilon" => cfg.solver.epsilon = real()?,
                "delta" => cfg.solver.delta = real()?,
                "max_iterations" => {
                    cfg.solver.max_iterations = value.parse().map_err(|_| bad("expected an integer".into()))?
                }
                "max_halvings" => {
                    cfg.solver.max_halvings = value.parse().map_err(|_| bad("expected an integer".into()))?
                }
                "descent_metric" => {
                    cfg.descent_metric = DescentMetric::from_name(value)
                        .ok_or_else(|| bad("expected nonlocal, h1 or h1_seminorm".into()))?
                }
                "initial_guess" => cfg.initial_guess = parse_initial(value).map_err(bad)?,
                "quad_order" => {
                    cfg.quad_order = value.parse().map_err(|_| bad("expected an integer".into()))?
                }
                "output.solution" => cfg.outputs.solution = path(),
                "output.log" => cfg.outputs.log = path(),
                "output.report" => cfg.outputs.report = path(),
                "output.plot" => cfg.outputs.plot = path(),
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        if let Some(k) = kp.build()? {
            cfg.kernel = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let preset = PRESETS
            .iter()
            .find(|p| p.name == name)
            .ok_or_else(|| ConfigError::UnknownCase(name.to_string()))?;
        Self::parse(preset.text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let s = &self.solver;
        if !(s.epsilon > 0.0) {
            return invalid(format!("epsilon must be positive, got {}", s.epsilon));
        }
        if !(s.delta > 0.0) {
            return invalid(format!("delta must be positive, got {}", s.delta));
        }
        if s.max_iterations == 0 {
            return invalid("max_iterations must be at least 1".into());
        }
        if !(1..=32).contains(&self.quad_order) {
            return invalid(format!("quad_order must be in 1..=32, got {}", self.quad_order));
        }
        if self.constraint == Constraint::Neumann && !(self.neumann_extension > 0.0) {
            return invalid("neumann.extension must be positive".into());
        }
        if let Some(h) = self.h.iter().chain(&self.h_list).find(|h| !(**h > 0.0)) {
            return invalid(format!("mesh sizes must be positive, got {h}"));
        }
        Ok(())
    }

    /// Mesh size for a single run: `h`, else the first of `h_list`, else
    /// twenty elements across Ω.
    pub fn single_h(&self) -> f64 {
        self.h
            .or_else(|| self.h_list.first().copied())
            .unwrap_or((self.domain.1 - self.domain.0) / 20.0)
    }

    /// Canonical `key = value` rendering; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(n) = &self.name {
            kv("name", n.clone());
        }
        kv("domain", format!("{}, {}", self.domain.0, self.domain.1));
        kv(
            "constraint",
            match self.constraint {
                Constraint::Dirichlet => "dirichlet",
                Constraint::Neumann => "neumann",
            }
            .into(),
        );
        kv("neumann.extension", self.neumann_extension.to_string());
        kv("kernel", self.kernel.name().into());
        match self.kernel.shape() {
            KernelShape::Exponential { scale } | KernelShape::Gaussian { scale } => kv("kernel.scale", scale.to_string()),
            KernelShape::InvertedMexicanHat { a, b, big_a, big_b } => {
                kv("kernel.a", a.to_string());
                kv("kernel.b", b.to_string());
                kv("kernel.A", big_a.to_string());
                kv("kernel.B", big_b.to_string());
            }
            KernelShape::Logistic { a, b } => {
                kv("kernel.a", a.to_string());
                kv("kernel.b", b.to_string());
            }
            KernelShape::PowerLaw { a, p } => {
                kv("kernel.a", a.to_string());
                kv("kernel.p", p.to_string());
            }
        }
        kv("nonlinearity", self.nonlinearity.name().into());
        if let Some(h) = self.h {
            kv("h", h.to_string());
        }
        if !self.h_list.is_empty() {
            let l: Vec<String> = self.h_list.iter().map(f64::to_string).collect();
            kv("h_list", l.join(", "));
        }
        kv("epsilon", self.solver.epsilon.to_string());
        kv("delta", self.solver.delta.to_string());
        kv("max_iterations", self.solver.max_iterations.to_string());
        kv("max_halvings", self.solver.max_halvings.to_string());
        kv("descent_metric", self.descent_metric.name().into());
        kv(
            "initial_guess",
            match &self.initial_guess {
                InitialGuess::Sine => "sine".into(),
                InitialGuess::Step(a, b) => format!("step({a}, {b})"),
                InitialGuess::Csv(p) => p.display().to_string(),
            },
        );
        kv("quad_order", self.quad_order.to_string());
        for (k, v) in [
            ("output.solution", &self.outputs.solution),
            ("output.log", &self.outputs.log),
            ("output.report", &self.outputs.report),
            ("output.plot", &self.outputs.plot),
        ] {
            if let Some(p) = v {
                kv(k, p.display().to_string());
            }
        }
        s
    }

    pub fn mesh(&self, h: f64) -> Result<Mesh, FemError> {
        let (a, b) = self.domain;
        match self.constraint {
            Constraint::Dirichlet => Mesh::build(a, b, h),
            Constraint::Neumann => {
                let e = self.neumann_extension;
                Mesh::build(a - e, b + e, h)?.with_omega(a, b)
            }
        }
    }

    /// Assembles the problem at mesh size `h` and returns it with the
    /// initial guess restricted to the unknowns.
    pub fn build(&self, h: f64) -> Result<(Problem, DVector<f64>), SetupError> {
        let mesh = Arc::new(self.mesh(h)?);
        let form = NonlocalForm::assemble(&mesh, &self.kernel, self.constraint, self.quad_order)?;
        let u1 = match &self.initial_guess {
            InitialGuess::Sine => FeFunction::interpolate(&mesh, f64::sin, self.constraint)?,
            InitialGuess::Step(a, b) => FeFunction::interpolate(
                &mesh,
                |x| if x >= *a && x < *b { 1.0 } else { 0.0 },
                self.constraint,
            )?,
            InitialGuess::Csv(path) => {
                let wrap = |source| SetupError::InitialGuess {
                    path: path.clone(),
                    source,
                };
                let file = File::open(path).map_err(|e| wrap(FemError::Io(e)))?;
                form.enforce(&FeFunction::read_csv(&mesh, BufReader::new(file)).map_err(wrap)?)
            }
        };
        let c = form.restrict(&u1);
        let problem = Problem::with_metric(form, self.nonlinearity, self.descent_metric)?;
        Ok((problem, c))
    }
}

pub struct Preset {
    pub name: &'static str,
    pub summary: &'static str,
    pub text: &'static str,
}

pub const PRESETS: [Preset; 5] = [
    Preset {
        name: "case1",
        summary: "exponential kernel, f = u^3, Dirichlet on (-pi,pi), u1 = sin",
        text: include_str!("../cases/case1.cfg"),
    },
    Preset {
        name: "case2",
        summary: "inverted mexican hat kernel, f = u^3, Dirichlet on (-pi,pi), u1 = sin",
        text: include_str!("../cases/case2.cfg"),
    },
    Preset {
        name: "case3",
        summary: "gaussian kernel, f = u^5, Dirichlet on (-pi,pi), u1 = sin",
        text: include_str!("../cases/case3.cfg"),
    },
    Preset {
        name: "case4",
        summary: "gaussian kernel, f = u^3 - u, Dirichlet on (-pi,pi), u1 = sin",
        text: include_str!("../cases/case4.cfg"),
    },
    Preset {
        name: "case5",
        summary: "Neumann, extended domain (-1.5,4.5), Omega = (0,3), Allen-Cahn f, step initial guess",
        text: include_str!("../cases/case5.cfg"),
    },
];

pub fn list_cases() -> String {
    PRESETS
        .iter()
        .map(|p| format!("{}  {}\n", p.name, p.summary))
        .collect()
}
