//! Gauss–Legendre rules and a small adaptive integrator for one-dimensional
//! integrals.

use std::f64::consts::PI;

/// Gauss–Legendre rule on the reference interval `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the `n`-point rule by Newton iteration on `P_n`.
    ///
    /// Exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "a Gauss rule needs at least one point");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Tricomi initial guess for the i-th largest root.
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature points and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&s, &w)| (mid + half * s, half * w))
    }

    /// Points on the unit interval `[0, 1]` with weights summing to one.
    pub fn unit(&self) -> Vec<(f64, f64)> {
        self.mapped(0.0, 1.0).collect()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Adaptive bisection with an 8/16-point Gauss comparison on each panel.
///
/// Returns the integral estimate; panels are split until the local
/// discrepancy falls below `tol` scaled by the panel's share of `[a, b]`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let coarse = GaussLegendre::new(8);
    let fine = GaussLegendre::new(16);
    adaptive_panel(f, a, b, tol, &coarse, &fine, 0)
}

fn adaptive_panel<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    coarse: &GaussLegendre,
    fine: &GaussLegendre,
    depth: usize,
) -> f64 {
    let c = coarse.integrate(a, b, f);
    let g = fine.integrate(a, b, f);
    if (c - g).abs() <= tol || depth >= 40 {
        return g;
    }
    let m = 0.5 * (a + b);
    adaptive_panel(f, a, m, 0.5 * tol, coarse, fine, depth + 1)
        + adaptive_panel(f, m, b, 0.5 * tol, coarse, fine, depth + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_point_rule_matches_tabulated_values() {
        let g = GaussLegendre::new(4);
        let a = (3.0 / 7.0 - 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
        let b = (3.0 / 7.0 + 2.0 / 7.0 * (6.0f64 / 5.0).sqrt()).sqrt();
        let wa = (18.0 + 30f64.sqrt()) / 36.0;
        let wb = (18.0 - 30f64.sqrt()) / 36.0;
        let expected = [(-b, wb), (-a, wa), (a, wa), (b, wb)];
        for ((x, w), (ex, ew)) in g.nodes.iter().zip(&g.weights).zip(expected) {
            assert!((x - ex).abs() < 1e-15);
            assert!((w - ew).abs() < 1e-15);
        }
    }

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in 1..=12 {
            let g = GaussLegendre::new(n);
            for deg in 0..(2 * n) {
                let approx = g.integrate(0.0, 2.0, |x| x.powi(deg as i32));
                let exact = 2f64.powi(deg as i32 + 1) / (deg as f64 + 1.0);
                assert!(
                    (approx - exact).abs() < 1e-12 * exact.max(1.0),
                    "n={n} deg={deg}"
                );
            }
        }
    }

    #[test]
    fn odd_rule_has_center_node() {
        let g = GaussLegendre::new(5);
        assert_eq!(g.nodes[2], 0.0);
        assert!((g.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let v = adaptive(&|x: f64| (-x.abs()).exp(), -3.0, 5.0, 1e-12);
        let exact = 2.0 - (-3f64).exp() - (-5f64).exp();
        assert!((v - exact).abs() < 1e-10);
    }
}
