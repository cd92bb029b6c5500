//! Uniform 1D P1 finite elements: mesh, element quadrature, mass and
//! stiffness matrices, nodal interpolation and norms.

use std::io::{self, BufRead, Write};
use std::ops::Range;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::quadrature::GaussLegendre;

/// Gauss points per element for nonlinear integrands over Ω.
pub const ELEMENT_GAUSS_POINTS: usize = 4;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("interval ({left}, {right}) cannot hold two elements of size {h}")]
    DegenerateInterval { left: f64, right: f64, h: f64 },
    #[error("domain endpoint {0} does not coincide with a mesh node")]
    OffGrid(f64),
    #[error("domain ({0}, {1}) is not inside the mesh interval")]
    DomainOutsideMesh(f64, f64),
    #[error("function is not finite at node x = {0}")]
    NotFinite(f64),
    #[error("malformed nodal csv at line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How the exterior of Ω is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// `u = 0` on the complement of Ω.
    Dirichlet,
    /// `𝓛u = 0` on the complement of Ω.
    Neumann,
}

/// Uniform mesh of `[x_left, x_right]`. The physical domain Ω is the node
/// range `omega`, which equals the whole mesh unless the mesh was extended
/// for an exterior constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    x_left: f64,
    x_right: f64,
    h: f64,
    nodes: Vec<f64>,
    omega: (usize, usize),
}

impl Mesh {
    /// Uniform mesh with `round((x_right - x_left) / h)` elements.
    pub fn build(x_left: f64, x_right: f64, h: f64) -> Result<Self, FemError> {
        let length = x_right - x_left;
        if !(h > 0.0) || !(length >= 2.0 * h) || !length.is_finite() {
            return Err(FemError::DegenerateInterval {
                left: x_left,
                right: x_right,
                h,
            });
        }
        let n = ((length / h).round() as usize).max(2);
        Ok(Self::with_elements(x_left, x_right, n))
    }

    /// Uniform mesh with exactly `n_elements` elements.
    pub fn with_elements(x_left: f64, x_right: f64, n_elements: usize) -> Self {
        assert!(n_elements >= 2 && x_right > x_left);
        let h = (x_right - x_left) / n_elements as f64;
        let nodes = (0..=n_elements)
            .map(|i| {
                if i == n_elements {
                    x_right
                } else {
                    x_left + h * i as f64
                }
            })
            .collect();
        Self {
            x_left,
            x_right,
            h,
            nodes,
            omega: (0, n_elements),
        }
    }

    /// Marks the sub-interval `[a, b]` as the physical domain. Both
    /// endpoints must sit on mesh nodes.
    pub fn with_omega(mut self, a: f64, b: f64) -> Result<Self, FemError> {
        if a < self.x_left - 1e-12 || b > self.x_right + 1e-12 || !(a < b) {
            return Err(FemError::DomainOutsideMesh(a, b));
        }
        let snap = |x: f64| -> Result<usize, FemError> {
            let k = ((x - self.x_left) / self.h).round();
            let idx = k as usize;
            if (self.nodes[idx] - x).abs() > 1e-9 * (self.x_right - self.x_left) {
                return Err(FemError::OffGrid(x));
            }
            Ok(idx)
        };
        let first = snap(a)?;
        let last = snap(b)?;
        // Snap exactly so Ω endpoints are representable.
        self.nodes[first] = a;
        self.nodes[last] = b;
        self.omega = (first, last);
        Ok(self)
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    /// Actual element size.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.nodes.len() - 1
    }

    /// First and last node of Ω (inclusive).
    pub fn omega_nodes(&self) -> (usize, usize) {
        self.omega
    }

    /// Ω as an interval.
    pub fn omega(&self) -> (f64, f64) {
        (self.nodes[self.omega.0], self.nodes[self.omega.1])
    }

    /// Elements lying in Ω.
    pub fn omega_elements(&self) -> Range<usize> {
        self.omega.0..self.omega.1
    }

    pub fn element(&self, e: usize) -> (f64, f64) {
        (self.nodes[e], self.nodes[e + 1])
    }

    /// Element containing `x`, preferring the left one at interior nodes.
    pub fn locate(&self, x: f64) -> usize {
        let k = ((x - self.x_left) / self.h).floor();
        (k.max(0.0) as usize).min(self.n_elements() - 1)
    }
}

/// Gauss points on the reference element with the two P1 shape functions
/// evaluated there: `(s, weight, φ_left(s), φ_right(s))`, `s ∈ [0, 1]`.
pub fn reference_points(order: usize) -> Vec<(f64, f64, f64, f64)> {
    GaussLegendre::new(order)
        .unit()
        .into_iter()
        .map(|(s, w)| (s, w, 1.0 - s, s))
        .collect()
}

/// Piecewise-linear function given by its nodal values on a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct FeFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl FeFunction {
    pub fn zeros(mesh: &Arc<Mesh>) -> Self {
        Self {
            mesh: Arc::clone(mesh),
            values: vec![0.0; mesh.n_nodes()],
        }
    }

    pub fn from_values(mesh: &Arc<Mesh>, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), mesh.n_nodes(), "one value per node");
        Self {
            mesh: Arc::clone(mesh),
            values,
        }
    }

    /// Nodal sampling of `f`. Under a Dirichlet constraint the nodes on and
    /// outside ∂Ω are set to zero.
    pub fn interpolate<F: Fn(f64) -> f64>(
        mesh: &Arc<Mesh>,
        f: F,
        constraint: Constraint,
    ) -> Result<Self, FemError> {
        let (first, last) = mesh.omega_nodes();
        let mut values = Vec::with_capacity(mesh.n_nodes());
        for (i, &x) in mesh.nodes().iter().enumerate() {
            let inside = i > first && i < last;
            let v = if constraint == Constraint::Dirichlet && !inside {
                0.0
            } else {
                f(x)
            };
            if !v.is_finite() {
                return Err(FemError::NotFinite(x));
            }
            values.push(v);
        }
        Ok(Self {
            mesh: Arc::clone(mesh),
            values,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }

    /// Value of the interpolant at `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let e = self.mesh.locate(x);
        let (a, b) = self.mesh.element(e);
        let s = (x - a) / (b - a);
        (1.0 - s) * self.values[e] + s * self.values[e + 1]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            mesh: Arc::clone(&self.mesh),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `x,value` rows under a one-line header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,value")?;
        for (x, v) in self.mesh.nodes().iter().zip(&self.values) {
            writeln!(out, "{x:.17e},{v:.17e}")?;
        }
        Ok(())
    }

    /// Reads `x,value` rows and linearly interpolates them onto `mesh`
    /// (constant extension outside the sampled range).
    pub fn read_csv<R: BufRead>(mesh: &Arc<Mesh>, input: R) -> Result<Self, FemError> {
        let mut samples: Vec<(f64, f64)> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(FemError::Csv {
                    line: i + 1,
                    msg: "expected two columns".into(),
                });
            };
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(v)) => samples.push((x, v)),
                _ if samples.is_empty() && i == 0 => continue, // header
                _ => {
                    return Err(FemError::Csv {
                        line: i + 1,
                        msg: format!("cannot parse `{line}`"),
                    })
                }
            }
        }
        if samples.is_empty() {
            return Err(FemError::Csv {
                line: 0,
                msg: "no data rows".into(),
            });
        }
        samples.sort_by(|p, q| p.0.total_cmp(&q.0));
        let values = mesh
            .nodes()
            .iter()
            .map(|&x| piecewise_linear(&samples, x))
            .collect();
        Ok(Self {
            mesh: Arc::clone(mesh),
            values,
        })
    }
}

fn piecewise_linear(samples: &[(f64, f64)], x: f64) -> f64 {
    let k = samples.partition_point(|p| p.0 <= x);
    if k == 0 {
        return samples[0].1;
    }
    if k == samples.len() {
        return samples[k - 1].1;
    }
    let (x0, v0) = samples[k - 1];
    let (x1, v1) = samples[k];
    if x1 == x0 {
        return v1;
    }
    v0 + (v1 - v0) * (x - x0) / (x1 - x0)
}

/// P1 mass matrix assembled over the whole mesh.
pub fn mass_matrix(mesh: &Mesh) -> DMatrix<f64> {
    mass_matrix_on(mesh, 0..mesh.n_elements())
}

/// P1 mass matrix assembled over the given elements only (full node size).
pub fn mass_matrix_on(mesh: &Mesh, elements: Range<usize>) -> DMatrix<f64> {
    let n = mesh.n_nodes();
    let mut m = DMatrix::zeros(n, n);
    for e in elements {
        let (a, b) = mesh.element(e);
        let h = b - a;
        m[(e, e)] += h / 3.0;
        m[(e + 1, e + 1)] += h / 3.0;
        m[(e, e + 1)] += h / 6.0;
        m[(e + 1, e)] += h / 6.0;
    }
    m
}

/// P1 stiffness matrix `∫ φ_i' φ_j'` over the whole mesh.
pub fn h1_stiffness_matrix(mesh: &Mesh) -> DMatrix<f64> {
    h1_stiffness_matrix_on(mesh, 0..mesh.n_elements())
}

pub fn h1_stiffness_matrix_on(mesh: &Mesh, elements: Range<usize>) -> DMatrix<f64> {
    let n = mesh.n_nodes();
    let mut s = DMatrix::zeros(n, n);
    for e in elements {
        let (a, b) = mesh.element(e);
        let k = 1.0 / (b - a);
        s[(e, e)] += k;
        s[(e + 1, e + 1)] += k;
        s[(e, e + 1)] -= k;
        s[(e + 1, e)] -= k;
    }
    s
}

/// `(‖u‖_{L²}, ‖u‖_{H¹})` from a mass and a stiffness matrix.
pub fn norms(u: &DVector<f64>, mass: &DMatrix<f64>, stiffness: &DMatrix<f64>) -> (f64, f64) {
    let l2sq = u.dot(&(mass * u)).max(0.0);
    let h1sq = l2sq + u.dot(&(stiffness * u)).max(0.0);
    (l2sq.sqrt(), h1sq.sqrt())
}

/// Sums `weight · g(x, u(x))` over Gauss points of the elements of Ω.
pub fn integrate_over_omega<G: FnMut(f64, f64) -> f64>(u: &FeFunction, mut g: G) -> f64 {
    let mesh = u.mesh();
    let points = reference_points(ELEMENT_GAUSS_POINTS);
    let vals = u.values();
    let mut total = 0.0;
    for e in mesh.omega_elements() {
        let (a, b) = mesh.element(e);
        let h = b - a;
        for &(s, w, pl, pr) in &points {
            let x = a + h * s;
            let ux = pl * vals[e] + pr * vals[e + 1];
            total += h * w * g(x, ux);
        }
    }
    total
}

/// Load vector `∫_Ω g(x, u(x)) φ_i(x) dx` for every node.
pub fn load_vector<G: FnMut(f64, f64) -> f64>(u: &FeFunction, mut g: G) -> Vec<f64> {
    let mesh = u.mesh();
    let points = reference_points(ELEMENT_GAUSS_POINTS);
    let vals = u.values();
    let mut load = vec![0.0; mesh.n_nodes()];
    for e in mesh.omega_elements() {
        let (a, b) = mesh.element(e);
        let h = b - a;
        for &(s, w, pl, pr) in &points {
            let x = a + h * s;
            let ux = pl * vals[e] + pr * vals[e + 1];
            let gx = h * w * g(x, ux);
            load[e] += gx * pl;
            load[e + 1] += gx * pr;
        }
    }
    load
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn arc(m: Mesh) -> Arc<Mesh> {
        Arc::new(m)
    }

    #[test]
    fn mesh_sizes() {
        let m = Mesh::build(-PI, PI, 0.314).unwrap();
        assert_eq!(m.n_elements(), 20);
        assert_eq!(m.n_nodes(), 21);
        let m = Mesh::build(0.0, 1.0, 0.5).unwrap();
        assert_eq!(m.nodes(), &[0.0, 0.5, 1.0]);
        let m = Mesh::build(-1.5, 4.5, 0.15).unwrap().with_omega(0.0, 3.0).unwrap();
        assert_eq!(m.n_elements(), 40);
        assert_eq!(m.omega_nodes(), (10, 30));
        assert_eq!(m.omega(), (0.0, 3.0));
        assert!(matches!(Mesh::build(0.0, 1.0, 0.6), Err(FemError::DegenerateInterval { .. })));
        assert!(matches!(
            Mesh::build(0.0, 1.0, 0.25).unwrap().with_omega(0.1, 0.5),
            Err(FemError::OffGrid(_))
        ));
    }

    #[test]
    fn nodes_uniform_and_increasing() {
        let m = Mesh::build(-PI, PI, 0.019).unwrap();
        for w in m.nodes().windows(2) {
            assert!(w[1] > w[0]);
            assert!(((w[1] - w[0]) - m.h()).abs() < 1e-12);
        }
    }

    #[test]
    fn mass_matrix_closed_form() {
        let m = Mesh::build(0.0, 3.0, 0.25).unwrap();
        let h = m.h();
        let mm = mass_matrix(&m);
        assert!((mm[(3, 2)] - h / 6.0).abs() < 1e-15);
        assert!((mm[(3, 3)] - 2.0 * h / 3.0).abs() < 1e-15);
        assert!((mm[(3, 4)] - h / 6.0).abs() < 1e-15);
        assert!((mm[(0, 0)] - h / 3.0).abs() < 1e-15);
        assert!((mm.sum() - 3.0).abs() < 1e-13);
        let one = DVector::from_element(m.n_nodes(), 1.0);
        assert!((one.dot(&(&mm * &one)) - 3.0).abs() < 1e-13);
        assert!(mm.cholesky().is_some());
    }

    #[test]
    fn stiffness_matrix_closed_form() {
        let m = Mesh::build(0.0, 1.0, 0.1).unwrap();
        let s = h1_stiffness_matrix(&m);
        let x = DVector::from_column_slice(m.nodes());
        assert!((x.dot(&(&s * &x)) - 1.0).abs() < 1e-12);
        let one = DVector::from_element(m.n_nodes(), 1.0);
        assert!((&s * &one).amax() < 1e-12);
        let mut hat = DVector::zeros(m.n_nodes());
        hat[4] = 1.0;
        assert!((hat.dot(&(&s * &hat)) - 2.0 / m.h()).abs() < 1e-10);
        assert_eq!(s, s.transpose());
    }

    #[test]
    fn interpolation_respects_constraint() {
        let m = arc(Mesh::build(-PI, PI, 0.314).unwrap());
        let u = FeFunction::interpolate(&m, f64::sin, Constraint::Dirichlet).unwrap();
        assert_eq!(u.values()[0], 0.0);
        assert_eq!(*u.values().last().unwrap(), 0.0);
        let m = arc(Mesh::build(-1.5, 4.5, 0.15).unwrap().with_omega(0.0, 3.0).unwrap());
        let step = |x: f64| if (1.0..2.0).contains(&x) { 1.0 } else { 0.0 };
        let u = FeFunction::interpolate(&m, step, Constraint::Neumann).unwrap();
        for (&x, &v) in m.nodes().iter().zip(u.values()) {
            let expected = if (1.0 - 1e-12..2.0 - 1e-12).contains(&x) { 1.0 } else { 0.0 };
            assert_eq!(v, expected, "x = {x}");
        }
        let one = FeFunction::interpolate(&m, |_| 1.0, Constraint::Neumann).unwrap();
        assert!(one.values().iter().all(|&v| v == 1.0));
        assert!(FeFunction::interpolate(&m, |x| 1.0 / (x - 0.0), Constraint::Neumann).is_err());
    }

    #[test]
    fn norms_examples() {
        let m = Mesh::build(0.0, 3.0, 0.1).unwrap();
        let (mm, s) = (mass_matrix(&m), h1_stiffness_matrix(&m));
        let zero = DVector::zeros(m.n_nodes());
        assert_eq!(norms(&zero, &mm, &s), (0.0, 0.0));
        let one = DVector::from_element(m.n_nodes(), 1.0);
        assert!((norms(&one, &mm, &s).0 - 3f64.sqrt()).abs() < 1e-12);

        let m = Mesh::build(0.0, 1.0, 0.05).unwrap();
        let (mm, s) = (mass_matrix(&m), h1_stiffness_matrix(&m));
        let x = DVector::from_column_slice(m.nodes());
        let (l2, h1) = norms(&x, &mm, &s);
        assert!((l2 - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        assert!((h1 - (1.0f64 / 3.0 + 1.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn l2_norm_of_interpolant_converges_at_second_order() {
        let mut errs = Vec::new();
        for n in [10, 20, 40, 80] {
            let m = arc(Mesh::with_elements(0.0, PI, n));
            let u = FeFunction::interpolate(&m, f64::sin, Constraint::Neumann).unwrap();
            let mm = mass_matrix(&m);
            let v = u.as_vector();
            errs.push((v.dot(&(&mm * &v)) - PI / 2.0).abs());
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!(rate > 1.9, "rate {rate}");
        }
    }

    #[test]
    fn element_quadrature_matches_mass_matrix() {
        let m = arc(Mesh::build(0.0, 2.0, 0.1).unwrap());
        let u = FeFunction::interpolate(&m, |x| x * x - 0.3, Constraint::Neumann).unwrap();
        let v = u.as_vector();
        let quad = integrate_over_omega(&u, |_, ux| ux * ux);
        assert!((quad - v.dot(&(mass_matrix(&m) * &v))).abs() < 1e-12);
        let load = load_vector(&u, |_, ux| ux);
        let mv = mass_matrix(&m) * &v;
        for (a, b) in load.iter().zip(mv.iter()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn csv_roundtrip_and_resampling() {
        let m = arc(Mesh::build(0.0, 1.0, 0.25).unwrap());
        let u = FeFunction::interpolate(&m, |x| 2.0 * x, Constraint::Neumann).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("x,value\n"));
        let back = FeFunction::read_csv(&m, buf.as_slice()).unwrap();
        assert_eq!(back.values(), u.values());
        let fine = arc(Mesh::build(0.0, 1.0, 0.125).unwrap());
        let r = FeFunction::read_csv(&fine, buf.as_slice()).unwrap();
        assert!((r.values()[1] - 0.25).abs() < 1e-15);
        assert!(FeFunction::read_csv(&m, "x,value\n1,2\nfoo,bar\n".as_bytes()).is_err());
    }
}
