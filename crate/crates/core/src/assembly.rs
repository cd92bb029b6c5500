//! Galerkin assembly of the nonlocal bilinear form
//! `B[u, v] = ½ ∬ (u(y) - u(x)) γ(|x - y|) (v(y) - v(x)) dy dx`
//! on a uniform P1 mesh, together with the pointwise operator `-𝓛u(x)`.
//!
//! Dirichlet forms act on the interior nodes of Ω with the zero extension
//! folded into the kernel mass: `B = Γ·M - K`. Neumann forms are assembled
//! on an extended interval (interactions truncated to it), the exterior
//! rows `(B̃u)_i = 0` are imposed, and the exterior unknowns are eliminated
//! by a Schur complement.

use std::io::{self, Write};
use std::ops::Range;
use std::sync::Arc;

use log::warn;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::fem::{mass_matrix, reference_points, Constraint, FeFunction, Mesh};
use crate::kernels::{Kernel, KernelError};
use crate::quadrature::GaussLegendre;

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("quadrature setup failed: {0}")]
    QuadratureFailure(#[from] KernelError),
    #[error("quadrature order must be at least 2, got {0}")]
    QuadOrder(usize),
    #[error("{0}")]
    MeshMismatch(String),
    #[error("exterior block is numerically singular; extend the computational domain")]
    SingularExteriorBlock,
    #[error("point {0} lies outside Ω")]
    OutsideDomain(f64),
}

/// Assembled bilinear form over the unknown nodes.
#[derive(Debug, Clone)]
pub struct NonlocalForm {
    mesh: Arc<Mesh>,
    kernel: Kernel,
    constraint: Constraint,
    quad_order: usize,
    kernel_mass: f64,
    unknowns: Range<usize>,
    matrix: DMatrix<f64>,
    convolution: DMatrix<f64>,
    /// Neumann only: the form over all nodes before elimination.
    extended: Option<DMatrix<f64>>,
    exterior: Vec<usize>,
    /// Neumann only: exterior values = `exterior_map · interior values`.
    exterior_map: Option<DMatrix<f64>>,
    warnings: Vec<String>,
}

/// Element-pair blocks for one element offset `d = f - e`.
///
/// `conv[a][b] = ∬_{e×f} φ_a(x) γ φ_b(y)`, `self_e[a][b] = ∬_{e×f} φ_a(x) φ_b(x) γ`
/// and `self_f[a][b] = ∬_{e×f} φ_a(y) φ_b(y) γ`, with local indices `a, b ∈ {0, 1}`.
#[derive(Debug, Clone, Copy, Default)]
struct PairBlock {
    conv: [[f64; 2]; 2],
    self_e: [[f64; 2]; 2],
    self_f: [[f64; 2]; 2],
}

fn pair_block(kernel: &Kernel, h: f64, d: usize, rule: &[(f64, f64)]) -> PairBlock {
    let mut blk = PairBlock::default();
    let mut add = |sx: f64, sy: f64, w: f64, gamma: f64| {
        let px = [1.0 - sx, sx];
        let py = [1.0 - sy, sy];
        let wg = w * gamma;
        for a in 0..2 {
            for b in 0..2 {
                blk.conv[a][b] += wg * px[a] * py[b];
                blk.self_e[a][b] += wg * px[a] * px[b];
                blk.self_f[a][b] += wg * py[a] * py[b];
            }
        }
    };
    if d == 0 {
        // Split the square along x = y so the kink of γ at the origin sits on
        // the triangle edges; collapsed coordinates x = s, y = s·t.
        for &(s, ws) in rule {
            for &(t, wt) in rule {
                let (sx, sy) = (s, s * t);
                let w = h * h * s * ws * wt;
                let gamma = kernel.eval(h * (sx - sy));
                add(sx, sy, w, gamma);
                add(sy, sx, w, gamma);
            }
        }
    } else {
        for &(sx, wx) in rule {
            for &(sy, wy) in rule {
                let r = h * (d as f64 + sy - sx);
                add(sx, sy, h * h * wx * wy, kernel.eval(r.abs()));
            }
        }
    }
    blk
}

/// Convolution matrix `K` and the truncated-mass matrix
/// `A_ij = ∬ φ_i(x) φ_j(x) γ(|x-y|)` over all element pairs of the mesh.
fn convolution_matrices(mesh: &Mesh, kernel: &Kernel, quad_order: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let n_el = mesh.n_elements();
    let n = mesh.n_nodes();
    let h = mesh.h();
    let rule = GaussLegendre::new(quad_order).unit();
    let blocks: Vec<PairBlock> = (0..n_el).map(|d| pair_block(kernel, h, d, &rule)).collect();

    let mut k = DMatrix::zeros(n, n);
    let mut a = DMatrix::zeros(n, n);
    for e in 0..n_el {
        let blk = &blocks[0];
        for p in 0..2 {
            for q in 0..2 {
                k[(e + p, e + q)] += blk.conv[p][q];
                a[(e + p, e + q)] += blk.self_e[p][q];
            }
        }
        for f in (e + 1)..n_el {
            let blk = &blocks[f - e];
            for p in 0..2 {
                for q in 0..2 {
                    let v = blk.conv[p][q];
                    k[(e + p, f + q)] += v;
                    k[(f + q, e + p)] += v;
                    // (e, f) and its mirror (f, e) both feed the x-element.
                    a[(e + p, e + q)] += blk.self_e[p][q];
                    a[(f + p, f + q)] += blk.self_f[p][q];
                }
            }
        }
    }
    (k, a)
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

impl NonlocalForm {
    /// Dirichlet form on a mesh covering exactly Ω.
    pub fn assemble_dirichlet(mesh: &Arc<Mesh>, kernel: &Kernel, quad_order: usize) -> Result<Self, AssemblyError> {
        if quad_order < 2 {
            return Err(AssemblyError::QuadOrder(quad_order));
        }
        let (first, last) = mesh.omega_nodes();
        if first != 0 || last != mesh.n_nodes() - 1 {
            return Err(AssemblyError::MeshMismatch(
                "a Dirichlet mesh must cover exactly Ω".into(),
            ));
        }
        kernel.truncation_radius(1e-6)?;
        let gamma = kernel.total_mass();
        let (conv, _) = convolution_matrices(mesh, kernel, quad_order);
        let full = mass_matrix(mesh) * gamma - &conv;
        let unknowns = 1..mesh.n_nodes() - 1;
        let idx: Vec<usize> = unknowns.clone().collect();
        let mut matrix = submatrix(&full, &idx, &idx);
        symmetrize(&mut matrix);
        Ok(Self {
            mesh: Arc::clone(mesh),
            kernel: *kernel,
            constraint: Constraint::Dirichlet,
            quad_order,
            kernel_mass: gamma,
            unknowns,
            matrix,
            convolution: conv,
            extended: None,
            exterior: Vec::new(),
            exterior_map: None,
            warnings: Vec::new(),
        })
    }

    /// Neumann form. The mesh spans the extended interval and carries Ω as
    /// its `omega` sub-range.
    pub fn assemble_neumann(mesh: &Arc<Mesh>, kernel: &Kernel, quad_order: usize) -> Result<Self, AssemblyError> {
        if quad_order < 2 {
            return Err(AssemblyError::QuadOrder(quad_order));
        }
        let (first, last) = mesh.omega_nodes();
        if first == 0 || last == mesh.n_nodes() - 1 {
            return Err(AssemblyError::MeshMismatch(
                "a Neumann mesh must extend beyond Ω on both sides".into(),
            ));
        }
        let mut warnings = Vec::new();
        let (a, b) = mesh.omega();
        let margin = (a - mesh.x_left()).min(mesh.x_right() - b);
        let reach = kernel.truncation_radius(1e-6)?;
        if reach > margin {
            let msg = format!(
                "extension margin {margin:.3} is below the kernel cutoff radius {reach:.3} \
                 (tail mass 1e-6); interactions beyond the extended interval are dropped"
            );
            warn!("{msg}");
            warnings.push(msg);
        }

        let gamma = kernel.total_mass();
        let (conv, truncated_mass) = convolution_matrices(mesh, kernel, quad_order);
        let mut extended = truncated_mass - &conv;
        symmetrize(&mut extended);

        let unknowns = first..last + 1;
        let interior: Vec<usize> = unknowns.clone().collect();
        let exterior: Vec<usize> = (0..first).chain(last + 1..mesh.n_nodes()).collect();
        let b_ii = submatrix(&extended, &interior, &interior);
        let b_ie = submatrix(&extended, &interior, &exterior);
        let b_ee = submatrix(&extended, &exterior, &exterior);
        let chol = b_ee.clone().cholesky().ok_or(AssemblyError::SingularExteriorBlock)?;
        let diag_min = chol.l().diagonal().min();
        let diag_max = chol.l().diagonal().max();
        if !(diag_min > 1e-7 * diag_max) {
            return Err(AssemblyError::SingularExteriorBlock);
        }
        let exterior_map = -chol.solve(&b_ie.transpose());
        let mut matrix = b_ii + &b_ie * &exterior_map;
        symmetrize(&mut matrix);

        Ok(Self {
            mesh: Arc::clone(mesh),
            kernel: *kernel,
            constraint: Constraint::Neumann,
            quad_order,
            kernel_mass: gamma,
            unknowns,
            matrix,
            convolution: conv,
            extended: Some(extended),
            exterior,
            exterior_map: Some(exterior_map),
            warnings,
        })
    }

    pub fn assemble(
        mesh: &Arc<Mesh>,
        kernel: &Kernel,
        constraint: Constraint,
        quad_order: usize,
    ) -> Result<Self, AssemblyError> {
        match constraint {
            Constraint::Dirichlet => Self::assemble_dirichlet(mesh, kernel, quad_order),
            Constraint::Neumann => Self::assemble_neumann(mesh, kernel, quad_order),
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn kernel_mass(&self) -> f64 {
        self.kernel_mass
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    /// `B` over the unknown nodes.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `K_ij = ∬ φ_i(x) γ(|x-y|) φ_j(y)` over all mesh nodes.
    pub fn convolution(&self) -> &DMatrix<f64> {
        &self.convolution
    }

    /// Neumann only: the form over every node of the extended mesh.
    pub fn extended_matrix(&self) -> Option<&DMatrix<f64>> {
        self.extended.as_ref()
    }

    pub fn exterior_map(&self) -> Option<&DMatrix<f64>> {
        self.exterior_map.as_ref()
    }

    pub fn exterior_nodes(&self) -> &[usize] {
        &self.exterior
    }

    /// Node indices carrying unknowns.
    pub fn unknowns(&self) -> Range<usize> {
        self.unknowns.clone()
    }

    pub fn n_unknowns(&self) -> usize {
        self.unknowns.len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Unknown coefficients of `u`.
    pub fn restrict(&self, u: &FeFunction) -> DVector<f64> {
        DVector::from_column_slice(&u.values()[self.unknowns.clone()])
    }

    /// Extends unknown coefficients to every node according to the
    /// constraint (zero outside for Dirichlet, exterior solve for Neumann).
    pub fn extend(&self, coeffs: &DVector<f64>) -> FeFunction {
        assert_eq!(coeffs.len(), self.n_unknowns());
        let mut values = vec![0.0; self.mesh.n_nodes()];
        values[self.unknowns.clone()].copy_from_slice(coeffs.as_slice());
        if let Some(map) = &self.exterior_map {
            let ext = map * coeffs;
            for (&i, v) in self.exterior.iter().zip(ext.iter()) {
                values[i] = *v;
            }
        }
        FeFunction::from_values(&self.mesh, values)
    }

    /// Re-imposes the constraint on `u` from its unknown values.
    pub fn enforce(&self, u: &FeFunction) -> FeFunction {
        self.extend(&self.restrict(u))
    }

    /// `B[u, v]` for constrained functions.
    pub fn apply(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.matrix * u))
    }

    /// Largest exterior constraint residual `|(𝓛u)_i|`, with the Galerkin
    /// rows normalized by `∫ φ_i`. Zero for Dirichlet forms.
    pub fn exterior_constraint_residual(&self, u: &FeFunction) -> f64 {
        let Some(ext) = &self.extended else {
            return 0.0;
        };
        let v = u.as_vector();
        let h = self.mesh.h();
        let last = self.mesh.n_nodes() - 1;
        self.exterior
            .iter()
            .map(|&i| {
                let row: f64 = ext.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum();
                let support = if i == 0 || i == last { 0.5 * h } else { h };
                (row / support).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Pointwise `(-𝓛u)(x) = Γ(x) u(x) - ∫ γ(|x - y|) u(y) dy` for `x ∈ Ω`.
    ///
    /// For Dirichlet forms `u` vanishes outside Ω and `Γ(x)` is the full
    /// kernel mass; for Neumann forms both terms run over the extended
    /// interval, matching the truncation used in assembly.
    pub fn apply_operator(&self, u: &FeFunction, x: f64) -> Result<f64, AssemblyError> {
        let (a, b) = self.mesh.omega();
        if !(x >= a - 1e-12 && x <= b + 1e-12) {
            return Err(AssemblyError::OutsideDomain(x));
        }
        let rule = GaussLegendre::new(self.quad_order.max(4));
        let vals = u.values();
        let mut conv = 0.0;
        let mut local_mass = 0.0;
        for e in 0..self.mesh.n_elements() {
            let (xa, xb) = self.mesh.element(e);
            let mut piece = |lo: f64, hi: f64| {
                for (y, w) in rule.mapped(lo, hi) {
                    let s = (y - xa) / (xb - xa);
                    let uy = (1.0 - s) * vals[e] + s * vals[e + 1];
                    let g = w * self.kernel.eval((x - y).abs());
                    conv += g * uy;
                    local_mass += g;
                }
            };
            if x > xa && x < xb {
                piece(xa, x);
                piece(x, xb);
            } else {
                piece(xa, xb);
            }
        }
        let gamma = match self.constraint {
            Constraint::Dirichlet => self.kernel_mass,
            Constraint::Neumann => local_mass,
        };
        Ok(gamma * u.eval(x) - conv)
    }

    /// Writes `B` as `row col value` lines (0-based unknown indices).
    pub fn dump_matrix<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "# {} x {} nonlocal form, {}", self.matrix.nrows(), self.matrix.ncols(), self.kernel)?;
        for i in 0..self.matrix.nrows() {
            for j in 0..self.matrix.ncols() {
                writeln!(out, "{i} {j} {:.17e}", self.matrix[(i, j)])?;
            }
        }
        Ok(())
    }
}

/// Gauss points and weights of the element rule used for residuals, in
/// physical coordinates over Ω.
pub fn omega_gauss_points(mesh: &Mesh) -> Vec<(f64, f64)> {
    let pts = reference_points(crate::fem::ELEMENT_GAUSS_POINTS);
    let mut out = Vec::with_capacity(pts.len() * mesh.omega_elements().len());
    for e in mesh.omega_elements() {
        let (a, b) = mesh.element(e);
        for &(s, w, _, _) in &pts {
            out.push((a + (b - a) * s, (b - a) * w));
        }
    }
    out
}
