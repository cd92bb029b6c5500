//! Independent oracles shared by the oracle tests and the acceptance runner.
//! Nothing here calls the library's quadrature, ray polynomial or t* code.

#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use nonlocal_mp::assembly::NonlocalForm;
use nonlocal_mp::energy::{Nonlinearity, Problem};
use nonlocal_mp::fem::{Constraint, FeFunction, Mesh};
use nonlocal_mp::kernels::{Kernel, KernelShape};
use rand::Rng;
use statrs::function::erf::erfc;

/// `∫_d^∞ γ(r) dr` in closed form.
pub fn one_sided_tail(kernel: &Kernel, d: f64) -> f64 {
    match kernel.shape() {
        KernelShape::Exponential { scale } => 0.5 * (-d / scale).exp(),
        KernelShape::Gaussian { scale } => 0.5 * erfc(d / scale),
        other => panic!("no closed-form tail for {other:?}"),
    }
}

/// Midpoint double sum of `½∬_{Ω×Ω} (u(y)-u(x))² γ` plus the zero-extension
/// term `∫_Ω u(x)² ∫_{Ωᶜ} γ(x-y) dy dx` on `Ω = (a, b)`.
pub fn riemann_bilinear(kernel: &Kernel, u: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let dx = (b - a) / n as f64;
    let xs: Vec<f64> = (0..n).map(|i| a + (i as f64 + 0.5) * dx).collect();
    let us: Vec<f64> = xs.iter().map(|&x| u(x)).collect();
    let mut interior = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in (i + 1)..n {
            let d = us[j] - us[i];
            row += d * d * kernel.eval(xs[j] - xs[i]);
        }
        interior += row;
    }
    // symmetric pairs counted once, so the ½ cancels
    interior *= dx * dx;
    let exterior: f64 = xs
        .iter()
        .zip(&us)
        .map(|(&x, &ux)| ux * ux * (one_sided_tail(kernel, x - a) + one_sided_tail(kernel, b - x)))
        .sum::<f64>()
        * dx;
    interior + exterior
}

/// Relative gap between the assembled `uᵀBu` and the Riemann oracle for the
/// interpolated sine on `(-π, π)`.
pub fn bilinear_oracle_gap(kernel: &Kernel, h: f64, points_per_element: usize) -> (f64, f64, f64) {
    let mesh = Arc::new(Mesh::build(-PI, PI, h).unwrap());
    let form = NonlocalForm::assemble_dirichlet(&mesh, kernel, 4).unwrap();
    let u = FeFunction::interpolate(&mesh, f64::sin, Constraint::Dirichlet).unwrap();
    let c = form.restrict(&u);
    let assembled = form.apply(&c, &c);
    let oracle = riemann_bilinear(kernel, &|x| u.eval(x), -PI, PI, mesh.n_elements() * points_per_element);
    (assembled, oracle, (assembled - oracle).abs() / oracle.abs())
}

pub fn dirichlet_sine_problem(n: usize, kernel: Kernel, nl: Nonlinearity) -> (Problem, DVector<f64>) {
    let mesh = Arc::new(Mesh::with_elements(-PI, PI, n));
    let form = NonlocalForm::assemble_dirichlet(&mesh, &kernel, 4).unwrap();
    let u = FeFunction::interpolate(&mesh, f64::sin, Constraint::Dirichlet).unwrap();
    let c = form.restrict(&u);
    (Problem::new(form, nl).unwrap(), c)
}

pub fn neumann_step_problem(h: f64) -> (Problem, DVector<f64>) {
    let mesh = Arc::new(Mesh::build(-1.5, 4.5, h).unwrap().with_omega(0.0, 3.0).unwrap());
    let form = NonlocalForm::assemble_neumann(&mesh, &Kernel::exponential(1.0).unwrap(), 4).unwrap();
    let step = |x: f64| if (1.0..=2.0).contains(&x) { 1.0 } else { 0.0 };
    let u = FeFunction::interpolate(&mesh, step, Constraint::Neumann).unwrap();
    let c = form.restrict(&u);
    (Problem::new(form, Nonlinearity::AllenCahn).unwrap(), c)
}

/// Problem used for the per-nonlinearity oracles.
pub fn oracle_problem(nl: Nonlinearity) -> (Problem, DVector<f64>) {
    match nl {
        Nonlinearity::AllenCahn => neumann_step_problem(0.075),
        _ => dirichlet_sine_problem(20, Kernel::exponential(1.0).unwrap(), nl),
    }
}

/// `F(t)` written out by hand for each nonlinearity.
fn primitive(nl: Nonlinearity, t: f64) -> f64 {
    match nl {
        Nonlinearity::Cubic => t.powi(4) / 4.0,
        Nonlinearity::Quintic => t.powi(6) / 6.0,
        Nonlinearity::CubicMinusLinear => t.powi(4) / 4.0 - t * t / 2.0,
        Nonlinearity::AllenCahn => -t * t / 4.0 - t.powi(3) / 2.0 + t.powi(4) / 2.0,
    }
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// `t ↦ I[t u]` evaluated from `uᵀBu` and independent element quadrature.
pub struct RayOracle {
    nl: Nonlinearity,
    b_uu: f64,
    samples: Vec<(f64, f64)>,
}

impl RayOracle {
    pub fn new(problem: &Problem, coeffs: &DVector<f64>) -> Self {
        let u = problem.form().extend(coeffs);
        let mesh = problem.mesh();
        let mut samples = Vec::new();
        for e in mesh.omega_elements() {
            let (a, b) = mesh.element(e);
            let (ul, ur) = (u.values()[e], u.values()[e + 1]);
            for &(s, w) in &GAUSS4 {
                let lam = 0.5 * (s + 1.0);
                samples.push(((1.0 - lam) * ul + lam * ur, 0.5 * (b - a) * w));
            }
        }
        Self {
            nl: problem.nonlinearity(),
            b_uu: problem.form().apply(coeffs, coeffs),
            samples,
        }
    }

    pub fn energy(&self, t: f64) -> f64 {
        let nonlinear: f64 = self.samples.iter().map(|&(u, w)| w * primitive(self.nl, t * u)).sum();
        0.5 * t * t * self.b_uu - nonlinear
    }

    /// Argmax over the grid `{k·step : 1 ≤ k ≤ t_max/step}`.
    pub fn grid_argmax(&self, t_max: f64, step: f64) -> f64 {
        let n = (t_max / step).round() as usize;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 1..=n {
            let t = k as f64 * step;
            let e = self.energy(t);
            if e >= best.0 {
                best = (e, t);
            }
        }
        best.1
    }
}

/// Random direction whose ray maximum falls inside `(0, t_max)`.
pub fn random_direction<R: Rng>(rng: &mut R, problem: &Problem, t_max: f64) -> DVector<f64> {
    let n = problem.form().n_unknowns();
    loop {
        let mut v = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        if rng.gen_bool(0.5) {
            v = v.abs();
        }
        if v.amax() < 1e-3 {
            continue;
        }
        let t = problem.t_star(&v).unwrap();
        if t < 0.8 * t_max {
            return v;
        }
        // bring the maximum into range; AllenCahn is not homogeneous, so recheck
        v *= 2.0 * t / t_max;
        if problem.t_star(&v).unwrap() < 0.8 * t_max {
            return v;
        }
    }
}

/// Central-difference errors at each `eps` for the pair `(w, v)`.
pub fn fd_errors(problem: &Problem, w: &DVector<f64>, v: &DVector<f64>, eps: &[f64]) -> Vec<f64> {
    let exact = problem.gradient(w).dot(v);
    eps.iter()
        .map(|&e| {
            let fd = (problem.energy(&(w + v * e)) - problem.energy(&(w - v * e))) / (2.0 * e);
            (fd - exact).abs()
        })
        .collect()
}

/// Positive `(w, v)` pair; a large `v` keeps the O(ε²) term above roundoff at ε = 1e-5.
pub fn random_fd_pair<R: Rng>(rng: &mut R, n: usize) -> (DVector<f64>, DVector<f64>) {
    let w = DVector::from_fn(n, |_, _| rng.gen_range(0.5..1.5));
    let v = DVector::from_fn(n, |_, _| rng.gen_range(5.0..10.0));
    (w, v)
}

/// Observed order between two step sizes.
pub fn observed_order(errs: &[f64], eps: &[f64]) -> f64 {
    (errs[0] / errs[1]).ln() / (eps[0] / eps[1]).ln()
}
