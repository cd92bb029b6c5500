//! Nonlinearities, the energy `I[u] = ½ B[u,u] - ∫_Ω F(u)`, its derivative
//! and the maximizer of `t ↦ I[t u]` along a ray.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

use crate::assembly::NonlocalForm;
use crate::fem::{self, Constraint, FeFunction, Mesh, ELEMENT_GAUSS_POINTS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("direction has vanishing energy norm or power integral; no ray maximum")]
    ZeroDirection,
    #[error("energy has no positive maximum along this ray")]
    NoPositiveMaximum,
    #[error("descent operator is not positive definite")]
    SingularSystem,
}

/// Polynomial right-hand sides `f(t)` (autonomous in `x`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Nonlinearity {
    /// `t³`
    Cubic,
    /// `t⁵`
    Quintic,
    /// `t³ - t`
    CubicMinusLinear,
    /// `0.5(-t - 3t² + 4t³)`
    AllenCahn,
}

/// Which growth hypotheses a nonlinearity satisfies, with the constants
/// that witness them. `None` where no constant is claimed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisMeta {
    /// `|f(t)| ≤ a1 + a2 |t|^alpha`
    pub growth: bool,
    /// `f(t)/t → 0` as `t → 0`
    pub superlinear_at_zero: bool,
    /// `θ 𝓕(t) ≥ 𝓕(σt)` with `𝓕 = t f - μ F`
    pub scaling: bool,
    /// `|f(t)/t| → ∞` as `|t| → ∞`
    pub superlinear_at_infinity: bool,
    pub a1: f64,
    pub a2: f64,
    pub alpha: f64,
    /// Open interval of admissible μ for the scaling condition.
    pub mu: Option<(f64, f64)>,
    pub theta: Option<f64>,
}

impl Nonlinearity {
    pub const ALL: [Nonlinearity; 4] = [
        Nonlinearity::Cubic,
        Nonlinearity::Quintic,
        Nonlinearity::CubicMinusLinear,
        Nonlinearity::AllenCahn,
    ];

    /// `(power, coefficient)` pairs of `f(t) = Σ c t^k`.
    pub fn coefficients(&self) -> &'static [(i32, f64)] {
        match self {
            Nonlinearity::Cubic => &[(3, 1.0)],
            Nonlinearity::Quintic => &[(5, 1.0)],
            Nonlinearity::CubicMinusLinear => &[(1, -1.0), (3, 1.0)],
            Nonlinearity::AllenCahn => &[(1, -0.5), (2, -1.5), (3, 2.0)],
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Cubic => "cubic",
            Nonlinearity::Quintic => "quintic",
            Nonlinearity::CubicMinusLinear => "cubic_minus_linear",
            Nonlinearity::AllenCahn => "allen_cahn",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|n| n.name() == name)
    }

    #[inline]
    pub fn f(&self, t: f64) -> f64 {
        match self {
            Nonlinearity::Cubic => t * t * t,
            Nonlinearity::Quintic => t.powi(5),
            Nonlinearity::CubicMinusLinear => t * t * t - t,
            Nonlinearity::AllenCahn => 0.5 * (-t - 3.0 * t * t + 4.0 * t * t * t),
        }
    }

    /// `F(t) = ∫_0^t f`.
    #[inline]
    pub fn antiderivative(&self, t: f64) -> f64 {
        let t2 = t * t;
        match self {
            Nonlinearity::Cubic => 0.25 * t2 * t2,
            Nonlinearity::Quintic => t2 * t2 * t2 / 6.0,
            Nonlinearity::CubicMinusLinear => 0.25 * t2 * t2 - 0.5 * t2,
            Nonlinearity::AllenCahn => 0.5 * (-0.5 * t2 - t2 * t + t2 * t2),
        }
    }

    pub fn hypotheses(&self) -> HypothesisMeta {
        match self {
            Nonlinearity::Cubic => HypothesisMeta {
                growth: true,
                superlinear_at_zero: true,
                scaling: true,
                superlinear_at_infinity: true,
                a1: 1.0,
                a2: 1.0,
                alpha: 3.0,
                mu: Some((2.0, 4.0)),
                theta: Some(1.0),
            },
            Nonlinearity::Quintic => HypothesisMeta {
                growth: true,
                superlinear_at_zero: true,
                scaling: true,
                superlinear_at_infinity: true,
                a1: 1.0,
                a2: 1.0,
                alpha: 5.0,
                mu: Some((2.0, 6.0)),
                theta: Some(1.0),
            },
            Nonlinearity::CubicMinusLinear => HypothesisMeta {
                growth: true,
                superlinear_at_zero: false,
                scaling: true,
                superlinear_at_infinity: true,
                a1: 1.0,
                a2: 2.0,
                alpha: 3.0,
                mu: Some((2.0, 4.0)),
                theta: Some(1.0),
            },
            Nonlinearity::AllenCahn => HypothesisMeta {
                growth: true,
                superlinear_at_zero: false,
                scaling: false,
                superlinear_at_infinity: true,
                a1: 1.0,
                a2: 4.0,
                alpha: 3.0,
                mu: None,
                theta: None,
            },
        }
    }
}

impl fmt::Display for Nonlinearity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `I[t u]` as a polynomial in `t`: `coeffs[k]` multiplies `t^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPolynomial {
    pub coeffs: Vec<f64>,
}

impl RayPolynomial {
    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    pub fn derivative(&self) -> RayPolynomial {
        RayPolynomial {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c)
                .collect(),
        }
    }

    /// Global maximizer over `t > 0` among the positive critical points
    /// (ties go to the larger `t`), falling back to a dense grid when no
    /// critical point has positive value.
    pub fn maximize(&self) -> Result<f64, EnergyError> {
        let d = self.derivative();
        let mut roots = match d.coeffs.len() {
            0..=1 => Vec::new(),
            2 => linear_root(d.coeffs[1], d.coeffs[0]).into_iter().collect(),
            3 => quadratic_roots(d.coeffs[2], d.coeffs[1], d.coeffs[0]),
            4 => cubic_roots(d.coeffs[3], d.coeffs[2], d.coeffs[1], d.coeffs[0]),
            _ => Vec::new(),
        };
        if d.coeffs.len() > 4 {
            // t·q(t^{k}) structure is handled by the closed forms; fall through
            // to the grid for anything else.
            roots.clear();
        }
        let dd = d.derivative();
        let mut best: Option<(f64, f64)> = None;
        for r in roots.into_iter().filter(|r| *r > 0.0) {
            let t = polish(&d, &dd, r);
            let v = self.eval(t);
            if v > 0.0 {
                best = match best {
                    Some((bt, bv)) if bv > v + 1e-14 * v.abs() || (bv >= v - 1e-14 * v.abs() && bt > t) => {
                        Some((bt, bv))
                    }
                    _ => Some((t, v)),
                };
            }
        }
        if let Some((t, _)) = best {
            return Ok(t);
        }
        self.grid_maximize(&d, &dd)
    }

    fn grid_maximize(&self, d: &RayPolynomial, dd: &RayPolynomial) -> Result<f64, EnergyError> {
        // Cauchy bound on the roots of I[tu]/t²: no sign change beyond it.
        let lead = *self.coeffs.last().unwrap_or(&0.0);
        if lead == 0.0 {
            return Err(EnergyError::NoPositiveMaximum);
        }
        let t_max = 1.0
            + self.coeffs[..self.coeffs.len() - 1]
                .iter()
                .map(|c| (c / lead).abs())
                .fold(0.0, f64::max);
        let n = 100_000;
        let (mut bt, mut bv) = (0.0, 0.0);
        for i in 1..=n {
            let t = t_max * i as f64 / n as f64;
            let v = self.eval(t);
            if v >= bv {
                bt = t;
                bv = v;
            }
        }
        if bv <= 0.0 {
            return Err(EnergyError::NoPositiveMaximum);
        }
        Ok(polish(d, dd, bt))
    }
}

fn polish(d: &RayPolynomial, dd: &RayPolynomial, mut t: f64) -> f64 {
    for _ in 0..4 {
        let slope = dd.eval(t);
        if slope == 0.0 {
            break;
        }
        let step = d.eval(t) / slope;
        if !step.is_finite() || (t - step) <= 0.0 {
            break;
        }
        t -= step;
    }
    t
}

fn linear_root(a1: f64, a0: f64) -> Option<f64> {
    (a1 != 0.0).then(|| -a0 / a1)
}

/// Real roots of `a t² + b t + c`.
pub fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a == 0.0 {
        return linear_root(b, c).into_iter().collect();
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = Vec::with_capacity(2);
    if q != 0.0 {
        roots.push(c / q);
        roots.push(q / a);
    } else {
        roots.push(0.0);
    }
    roots
}

/// Real roots of `a t³ + b t² + c t + d` (closed form, trigonometric for
/// three real roots).
pub fn cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    if a == 0.0 {
        return quadratic_roots(b, c, d);
    }
    let (b, c, d) = (b / a, c / a, d / a);
    // depressed cubic x³ + p x + q with t = x - b/3
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if p == 0.0 && q == 0.0 {
        return vec![-shift];
    }
    if disc > 0.0 {
        let s = disc.sqrt();
        let u = (-q / 2.0 + s).cbrt();
        let v = (-q / 2.0 - s).cbrt();
        vec![u + v - shift]
    } else {
        let r = (-p / 3.0).sqrt();
        let arg = if r == 0.0 {
            0.0
        } else {
            (3.0 * q / (2.0 * p * r)).clamp(-1.0, 1.0)
        };
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| 2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift)
            .collect()
    }
}

/// `t*` from `B[u,u]` and the power integrals `∫_Ω u^k` (`powers[k]`).
pub fn t_star_from_integrals(nl: Nonlinearity, b_uu: f64, powers: &[f64; 8]) -> Result<f64, EnergyError> {
    if !(b_uu > 0.0) {
        return Err(EnergyError::ZeroDirection);
    }
    let closed = |num: f64, den: f64, root: f64| {
        if den > 0.0 && num > 0.0 {
            Ok((num / den).powf(1.0 / root))
        } else {
            Err(EnergyError::ZeroDirection)
        }
    };
    match nl {
        Nonlinearity::Cubic => closed(b_uu, powers[4], 2.0),
        Nonlinearity::Quintic => closed(b_uu, powers[6], 4.0),
        Nonlinearity::CubicMinusLinear => closed(b_uu + powers[2], powers[4], 2.0),
        Nonlinearity::AllenCahn => {
            if !(powers[4] > 0.0) {
                return Err(EnergyError::ZeroDirection);
            }
            ray_polynomial(nl, b_uu, powers).maximize()
        }
    }
}

/// `I[t u] = ½ t² B[u,u] - Σ_k c_k t^{k+1} ∫u^{k+1} / (k+1)`.
pub fn ray_polynomial(nl: Nonlinearity, b_uu: f64, powers: &[f64; 8]) -> RayPolynomial {
    let mut coeffs = vec![0.0; 3];
    coeffs[2] = 0.5 * b_uu;
    for &(k, c) in nl.coefficients() {
        let deg = (k + 1) as usize;
        if coeffs.len() <= deg {
            coeffs.resize(deg + 1, 0.0);
        }
        coeffs[deg] -= c / (k as f64 + 1.0) * powers[deg];
    }
    RayPolynomial { coeffs }
}

/// Inner product used to turn the derivative `I'[w]` into a descent
/// direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DescentMetric {
    /// The energy form itself: solve `B b = g`.
    #[default]
    Nonlocal,
    /// The H¹(Ω) inner product: solve `(S + M) b = g`.
    H1,
    /// The H¹(Ω) seminorm: solve `S b = g`.
    H1Seminorm,
}

impl DescentMetric {
    pub fn name(&self) -> &'static str {
        match self {
            DescentMetric::Nonlocal => "nonlocal",
            DescentMetric::H1 => "h1",
            DescentMetric::H1Seminorm => "h1_seminorm",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "nonlocal" => Some(DescentMetric::Nonlocal),
            "h1" => Some(DescentMetric::H1),
            "h1_seminorm" => Some(DescentMetric::H1Seminorm),
            _ => None,
        }
    }
}

/// A discretized problem: form, Ω mass and stiffness on the unknowns, the
/// nonlinearity, and the factored linear and descent operators.
#[derive(Debug, Clone)]
pub struct Problem {
    form: NonlocalForm,
    nonlinearity: Nonlinearity,
    metric: DescentMetric,
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    linear_operator: DMatrix<f64>,
    linear_factor: Cholesky<f64, Dyn>,
    descent_operator: DMatrix<f64>,
    descent_factor: Cholesky<f64, Dyn>,
    /// Neumann grounding vector `M·1` over the unknowns.
    grounding: Option<DVector<f64>>,
    omega_length: f64,
}

impl Problem {
    pub fn new(form: NonlocalForm, nonlinearity: Nonlinearity) -> Result<Self, EnergyError> {
        Self::with_metric(form, nonlinearity, DescentMetric::Nonlocal)
    }

    pub fn with_metric(
        form: NonlocalForm,
        nonlinearity: Nonlinearity,
        metric: DescentMetric,
    ) -> Result<Self, EnergyError> {
        let mesh = form.mesh().clone();
        let idx: Vec<usize> = form.unknowns().collect();
        let restrict = |m: DMatrix<f64>| DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])]);
        let mass = restrict(fem::mass_matrix_on(&mesh, mesh.omega_elements()));
        let stiffness = restrict(fem::h1_stiffness_matrix_on(&mesh, mesh.omega_elements()));
        let (a, b) = mesh.omega();
        let omega_length = b - a;

        let mut linear_operator = form.matrix().clone();
        let grounding = match form.constraint() {
            Constraint::Dirichlet => None,
            Constraint::Neumann => {
                // B annihilates constants; pin their mean with a rank-one term.
                let m1 = &mass * DVector::from_element(idx.len(), 1.0);
                linear_operator += &m1 * m1.transpose() / omega_length;
                Some(m1)
            }
        };
        let linear_factor = linear_operator
            .clone()
            .cholesky()
            .ok_or(EnergyError::SingularSystem)?;
        let (descent_operator, descent_factor) = match metric {
            DescentMetric::Nonlocal => (linear_operator.clone(), linear_factor.clone()),
            DescentMetric::H1 => {
                let g = &stiffness + &mass;
                let f = g.clone().cholesky().ok_or(EnergyError::SingularSystem)?;
                (g, f)
            }
            DescentMetric::H1Seminorm => {
                let mut g = stiffness.clone();
                if form.constraint() == Constraint::Neumann {
                    g += &mass * (1.0 / omega_length.powi(2));
                }
                let f = g.clone().cholesky().ok_or(EnergyError::SingularSystem)?;
                (g, f)
            }
        };
        Ok(Self {
            form,
            nonlinearity,
            metric,
            mass,
            stiffness,
            linear_operator,
            linear_factor,
            descent_operator,
            descent_factor,
            grounding,
            omega_length,
        })
    }

    pub fn form(&self) -> &NonlocalForm {
        &self.form
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.form.mesh()
    }

    pub fn nonlinearity(&self) -> Nonlinearity {
        self.nonlinearity
    }

    /// Ω mass matrix over the unknowns.
    pub fn mass(&self) -> &DMatrix<f64> {
        &self.mass
    }

    /// Ω stiffness matrix over the unknowns.
    pub fn stiffness(&self) -> &DMatrix<f64> {
        &self.stiffness
    }

    pub fn metric(&self) -> DescentMetric {
        self.metric
    }

    /// `B`, plus the rank-one grounding for Neumann forms.
    pub fn linear_operator(&self) -> &DMatrix<f64> {
        &self.linear_operator
    }

    /// Solves `linear_operator() x = rhs`.
    pub fn solve_linear_system(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.linear_factor.solve(rhs)
    }

    pub fn descent_operator(&self) -> &DMatrix<f64> {
        &self.descent_operator
    }

    pub fn grounding(&self) -> Option<&DVector<f64>> {
        self.grounding.as_ref()
    }

    pub fn omega_length(&self) -> f64 {
        self.omega_length
    }

    /// Solves the descent system `G x = rhs`.
    pub fn solve_descent_system(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.descent_factor.solve(rhs)
    }

    /// Nodal function carrying `coeffs` on the unknowns and zero elsewhere;
    /// enough for integrals over Ω.
    fn omega_function(&self, coeffs: &DVector<f64>) -> FeFunction {
        let mut values = vec![0.0; self.mesh().n_nodes()];
        values[self.form.unknowns()].copy_from_slice(coeffs.as_slice());
        FeFunction::from_values(self.mesh(), values)
    }

    /// `(‖u‖_{L²(Ω)}, ‖u‖_{H¹(Ω)})`.
    pub fn norms(&self, coeffs: &DVector<f64>) -> (f64, f64) {
        fem::norms(coeffs, &self.mass, &self.stiffness)
    }

    /// `∫_Ω u^k` for `k = 0..8` by element Gauss quadrature.
    pub fn power_integrals(&self, coeffs: &DVector<f64>) -> [f64; 8] {
        let mesh = self.mesh();
        let (first, _) = mesh.omega_nodes();
        let offset = self.form.unknowns().start;
        let value = |node: usize| -> f64 {
            node.checked_sub(offset)
                .and_then(|i| coeffs.get(i).copied())
                .unwrap_or(0.0)
        };
        let points = fem::reference_points(ELEMENT_GAUSS_POINTS);
        let mut out = [0.0; 8];
        for e in mesh.omega_elements() {
            debug_assert!(e >= first);
            let (a, b) = mesh.element(e);
            let h = b - a;
            let (ul, ur) = (value(e), value(e + 1));
            for &(_, w, pl, pr) in &points {
                let u = pl * ul + pr * ur;
                let mut p = h * w;
                for slot in out.iter_mut() {
                    *slot += p;
                    p *= u;
                }
            }
        }
        out
    }

    /// `I[u] = ½ B[u,u] - ∫_Ω F(u)`.
    pub fn energy(&self, coeffs: &DVector<f64>) -> f64 {
        let u = self.omega_function(coeffs);
        let nl = self.nonlinearity;
        0.5 * self.form.apply(coeffs, coeffs) - fem::integrate_over_omega(&u, |_, v| nl.antiderivative(v))
    }

    /// Gradient `g` with `I'[w] v = gᵀ v`.
    pub fn gradient(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        let u = self.omega_function(coeffs);
        let nl = self.nonlinearity;
        let load = fem::load_vector(&u, |_, v| nl.f(v));
        let load = DVector::from_column_slice(&load[self.form.unknowns()]);
        self.form.matrix() * coeffs - load
    }

    /// Load vector `∫_Ω f(u) φ_i` over the unknowns.
    pub fn load(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        let u = self.omega_function(coeffs);
        let nl = self.nonlinearity;
        let load = fem::load_vector(&u, |_, v| nl.f(v));
        DVector::from_column_slice(&load[self.form.unknowns()])
    }

    pub fn ray(&self, coeffs: &DVector<f64>) -> RayPolynomial {
        let b_uu = self.form.apply(coeffs, coeffs);
        ray_polynomial(self.nonlinearity, b_uu, &self.power_integrals(coeffs))
    }

    /// Maximizer of `t ↦ I[t u]` over `t > 0`.
    pub fn t_star(&self, coeffs: &DVector<f64>) -> Result<f64, EnergyError> {
        let b_uu = self.form.apply(coeffs, coeffs);
        t_star_from_integrals(self.nonlinearity, b_uu, &self.power_integrals(coeffs))
    }
}
