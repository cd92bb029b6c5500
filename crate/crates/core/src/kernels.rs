//! Radial convolution kernels `γ(|x - y|)` and their scalar diagnostics.

use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

use crate::quadrature;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel parameter `{name}` must be positive and finite, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{kernel} kernel needs {what} for a finite second moment, got {value}")]
    HeavyTail {
        kernel: &'static str,
        what: &'static str,
        value: f64,
    },
    #[error("inverted mexican hat needs 0 < a < b and A a^2 - B b^2 < 0 (a={a}, b={b}, A={big_a}, B={big_b})")]
    NotInverted {
        a: f64,
        b: f64,
        big_a: f64,
        big_b: f64,
    },
    #[error("no analytic tail bound reaches tolerance {tol} for this kernel")]
    TailBoundUnavailable { tol: f64 },
    #[error("quadrature tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Closed-form kernel families. Parameters are validated by the
/// constructors on [`Kernel`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelShape {
    /// `exp(-r/s) / (2s)`, unit mass.
    Exponential { scale: f64 },
    /// `exp(-r²/s²) / (s√π)`, unit mass.
    Gaussian { scale: f64 },
    /// `((B/b) exp(-r²/b²) - (A/a) exp(-r²/a²)) / π`.
    ///
    /// Positive in the far field and negative near the origin. The `1/π`
    /// prefactor is kept literally, so the mass is `(B - A)/√π`.
    InvertedMexicanHat { a: f64, b: f64, big_a: f64, big_b: f64 },
    /// `(1 + (r/a)^b)^{-1} / Γ`, unit mass.
    Logistic { a: f64, b: f64 },
    /// `(1 + r/a)^{-p} / Γ`, unit mass.
    PowerLaw { a: f64, p: f64 },
}

/// A validated radial kernel. Only `r = |x - y|` is ever evaluated, so the
/// induced convolution is symmetric by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    shape: KernelShape,
    /// Normalizing constant for the logistic and power-law families; `1`
    /// otherwise.
    norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelDiagnostics {
    pub total_mass: f64,
    pub second_moment: f64,
    pub min_value_sampled: f64,
    pub is_sign_changing: bool,
    /// Radius beyond which the analytic tail bounds guarantee the omitted
    /// mass and second moment are below the requested tolerance.
    pub cutoff_radius: f64,
}

fn positive(name: &'static str, value: f64) -> Result<f64, KernelError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(KernelError::NonPositive { name, value })
    }
}

impl Kernel {
    pub fn exponential(scale: f64) -> Result<Self, KernelError> {
        let scale = positive("scale", scale)?;
        Ok(Self {
            shape: KernelShape::Exponential { scale },
            norm: 1.0,
        })
    }

    pub fn gaussian(scale: f64) -> Result<Self, KernelError> {
        let scale = positive("scale", scale)?;
        Ok(Self {
            shape: KernelShape::Gaussian { scale },
            norm: 1.0,
        })
    }

    pub fn inverted_mexican_hat(a: f64, b: f64, big_a: f64, big_b: f64) -> Result<Self, KernelError> {
        positive("a", a)?;
        positive("b", b)?;
        positive("A", big_a)?;
        positive("B", big_b)?;
        if !(a < b) || big_a * a * a - big_b * b * b >= 0.0 {
            return Err(KernelError::NotInverted {
                a,
                b,
                big_a,
                big_b,
            });
        }
        Ok(Self {
            shape: KernelShape::InvertedMexicanHat { a, b, big_a, big_b },
            norm: 1.0,
        })
    }

    pub fn logistic(a: f64, b: f64) -> Result<Self, KernelError> {
        positive("a", a)?;
        positive("b", b)?;
        if b <= 3.0 {
            return Err(KernelError::HeavyTail {
                kernel: "logistic",
                what: "b > 3",
                value: b,
            });
        }
        // ∫_ℝ (1 + (|x|/a)^b)^{-1} dx = 2a (π/b) / sin(π/b)
        let norm = 2.0 * a * (PI / b) / (PI / b).sin();
        Ok(Self {
            shape: KernelShape::Logistic { a, b },
            norm,
        })
    }

    pub fn power_law(a: f64, p: f64) -> Result<Self, KernelError> {
        positive("a", a)?;
        positive("p", p)?;
        if p <= 3.0 {
            return Err(KernelError::HeavyTail {
                kernel: "power_law",
                what: "p > 3",
                value: p,
            });
        }
        Ok(Self {
            shape: KernelShape::PowerLaw { a, p },
            norm: 2.0 * a / (p - 1.0),
        })
    }

    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    /// Configuration name of the family.
    pub fn name(&self) -> &'static str {
        match self.shape {
            KernelShape::Exponential { .. } => "exponential",
            KernelShape::Gaussian { .. } => "gaussian",
            KernelShape::InvertedMexicanHat { .. } => "mexican_hat",
            KernelShape::Logistic { .. } => "logistic",
            KernelShape::PowerLaw { .. } => "power_law",
        }
    }

    /// γ(r) for `r ≥ 0`.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        debug_assert!(r >= 0.0);
        match self.shape {
            KernelShape::Exponential { scale } => (-r / scale).exp() / (2.0 * scale),
            KernelShape::Gaussian { scale } => {
                let z = r / scale;
                (-z * z).exp() / (scale * PI.sqrt())
            }
            KernelShape::InvertedMexicanHat { a, b, big_a, big_b } => {
                let wide = big_b / b * (-(r * r) / (b * b)).exp();
                let narrow = big_a / a * (-(r * r) / (a * a)).exp();
                (wide - narrow) / PI
            }
            KernelShape::Logistic { a, b } => 1.0 / ((1.0 + (r / a).powf(b)) * self.norm),
            KernelShape::PowerLaw { a, p } => (1.0 + r / a).powf(-p) / self.norm,
        }
    }

    /// Γ = ∫_ℝ γ, in closed form.
    pub fn total_mass(&self) -> f64 {
        match self.shape {
            KernelShape::InvertedMexicanHat { big_a, big_b, .. } => (big_b - big_a) / PI.sqrt(),
            _ => 1.0,
        }
    }

    /// Characteristic width used to size sampling grids.
    pub fn width(&self) -> f64 {
        match self.shape {
            KernelShape::Exponential { scale } | KernelShape::Gaussian { scale } => scale,
            KernelShape::InvertedMexicanHat { b, .. } => b,
            KernelShape::Logistic { a, .. } | KernelShape::PowerLaw { a, .. } => a,
        }
    }

    /// Upper bounds on `∫_{|x|>R} |γ|` and `∫_{|x|>R} x²|γ|`.
    pub fn tail_bounds(&self, radius: f64) -> (f64, f64) {
        let r = radius;
        match self.shape {
            KernelShape::Exponential { scale: s } => {
                let e = (-r / s).exp();
                (e, e * (r * r + 2.0 * r * s + 2.0 * s * s))
            }
            KernelShape::Gaussian { scale: s } => gaussian_tail(1.0 / (s * PI.sqrt()), s, r),
            KernelShape::InvertedMexicanHat { a, b, big_a, big_b } => {
                let (m1, s1) = gaussian_tail(big_b / (b * PI), b, r);
                let (m2, s2) = gaussian_tail(big_a / (a * PI), a, r);
                (m1 + m2, s1 + s2)
            }
            KernelShape::Logistic { a, b } => {
                if r <= a {
                    return (f64::INFINITY, f64::INFINITY);
                }
                let c = 2.0 * a.powf(b) / self.norm;
                (c * r.powf(1.0 - b) / (b - 1.0), c * r.powf(3.0 - b) / (b - 3.0))
            }
            KernelShape::PowerLaw { a, p } => {
                let q = 1.0 + r / a;
                (
                    q.powf(1.0 - p),
                    2.0 * a.powi(3) * q.powf(3.0 - p) / ((p - 3.0) * self.norm),
                )
            }
        }
    }

    /// Radius beyond which the omitted kernel mass is below `tol`.
    pub fn truncation_radius(&self, tol: f64) -> Result<f64, KernelError> {
        if !(tol > 0.0) {
            return Err(KernelError::BadTolerance(tol));
        }
        match self.shape {
            KernelShape::Exponential { scale } => Ok(scale * (1.0 / tol).ln().max(0.0)),
            KernelShape::Gaussian { scale } => Ok(scale * (1.0 / tol).ln().max(0.0).sqrt() + 2.0),
            _ => self.radius_where(tol, |t| t.0),
        }
    }

    fn radius_where(&self, tol: f64, pick: impl Fn((f64, f64)) -> f64) -> Result<f64, KernelError> {
        let mut hi = self.width();
        let mut steps = 0;
        while !(pick(self.tail_bounds(hi)) <= tol) {
            hi *= 2.0;
            steps += 1;
            if steps > 1000 || !hi.is_finite() {
                return Err(KernelError::TailBoundUnavailable { tol });
            }
        }
        let mut lo = if steps == 0 { 0.0 } else { 0.5 * hi };
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if pick(self.tail_bounds(mid)) <= tol {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    /// Mass, second moment and sign information by adaptive quadrature on
    /// `[0, R]`, with `R` chosen from the analytic tail bounds.
    pub fn diagnostics(&self, quad_tol: f64) -> Result<KernelDiagnostics, KernelError> {
        if !(quad_tol > 0.0) {
            return Err(KernelError::BadTolerance(quad_tol));
        }
        let budget = 0.25 * quad_tol;
        let cutoff = self.radius_where(budget, |(m, s)| m.max(s))?;

        // Geometric panels keep algebraic tails cheap.
        let mut edges = vec![0.0];
        let mut x = self.width();
        while x < cutoff {
            edges.push(x);
            x *= 2.0;
        }
        edges.push(cutoff);
        let panel_tol = budget / edges.len() as f64;
        let mut mass = 0.0;
        let mut second = 0.0;
        for pair in edges.windows(2) {
            mass += quadrature::adaptive(&|r: f64| self.eval(r), pair[0], pair[1], panel_tol);
            second += quadrature::adaptive(&|r: f64| r * r * self.eval(r), pair[0], pair[1], panel_tol);
        }

        let span = 20.0 * self.width();
        let samples = 20_000;
        let min_value = (0..=samples)
            .map(|i| self.eval(span * i as f64 / samples as f64))
            .fold(f64::INFINITY, f64::min);
        let max_value = (0..=samples)
            .map(|i| self.eval(span * i as f64 / samples as f64))
            .fold(f64::NEG_INFINITY, f64::max);

        Ok(KernelDiagnostics {
            total_mass: 2.0 * mass,
            second_moment: 2.0 * second,
            min_value_sampled: min_value,
            is_sign_changing: min_value < 0.0 && max_value > 0.0,
            cutoff_radius: cutoff,
        })
    }
}

/// Two-sided tail bounds for `c·exp(-x²/w²)` using `erfc(z) ≤ exp(-z²)`.
fn gaussian_tail(c: f64, w: f64, r: f64) -> (f64, f64) {
    let e = (-(r * r) / (w * w)).exp();
    let sqrt_pi = PI.sqrt();
    (c * w * sqrt_pi * e, c * e * (w * w * r + 0.5 * w.powi(3) * sqrt_pi))
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape {
            KernelShape::Exponential { scale } => write!(f, "exponential(scale={scale})"),
            KernelShape::Gaussian { scale } => write!(f, "gaussian(scale={scale})"),
            KernelShape::InvertedMexicanHat { a, b, big_a, big_b } => {
                write!(f, "mexican_hat(a={a}, b={b}, A={big_a}, B={big_b})")
            }
            KernelShape::Logistic { a, b } => write!(f, "logistic(a={a}, b={b})"),
            KernelShape::PowerLaw { a, p } => write!(f, "power_law(a={a}, p={p})"),
        }
    }
}
