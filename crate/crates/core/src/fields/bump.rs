//! The standard smooth bump `amp · exp(1/(|x−c|²/r² − 1))` and its closed-form
//! derivatives up to the gradient of its Laplacian.
//!
//! Writing `d = x − c`, `ρ = |d|²/r²` and `q = 1/(ρ − 1)`:
//!
//! * `∂_i b = b g d_i` with `g = −2q²/r²`
//! * `∂_i∂_j b = b [(g² + 2g'/r²) d_i d_j + g δ_ij]` with `g' = 4q³/r²`
//! * `Δb = b Φ` with `Φ = (4ρ(q⁴ + 2q³) − 2nq²)/r²`
//! * `∂_k Δb = b d_k (gΦ + 2Φ'/r²)`

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{c, creal, norm, Cplx, Real};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Bump<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub amplitude: Cplx<T>,
}

/// Geometry of a point inside the bump support.
struct Local<T> {
    b: T,
    d: Vec<T>,
    rho: T,
    q: T,
}

impl<T: Real> Bump<T> {
    /// A bump whose support ball must lie in the closed unit ball.
    pub fn new(center: Vec<T>, radius: T, amplitude: Cplx<T>) -> Result<Self> {
        if radius <= T::zero() || !radius.is_finite() {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("must be positive, got {radius}"),
            });
        }
        let cn = norm(&center);
        if cn + radius > T::one() + c(1e-12) {
            return Err(Error::SupportLeavesBall {
                center_norm: cn.to_f64_lossy(),
                radius: radius.to_f64_lossy(),
            });
        }
        Ok(Self {
            center,
            radius,
            amplitude,
        })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `|c| + r`; the bump vanishes outside this radius.
    pub fn support_radius(&self) -> T {
        norm(&self.center) + self.radius
    }

    /// Same bump with its amplitude multiplied by `k`.
    pub fn scaled(&self, k: Cplx<T>) -> Self {
        Self {
            amplitude: self.amplitude * k,
            ..self.clone()
        }
    }

    fn local(&self, x: &[T]) -> Option<Local<T>> {
        let d: Vec<T> = x.iter().zip(&self.center).map(|(&a, &b)| a - b).collect();
        let r2 = self.radius * self.radius;
        let rho = d.iter().fold(T::zero(), |s, &v| s + v * v) / r2;
        if rho >= T::one() {
            return None;
        }
        let q = T::one() / (rho - T::one());
        Some(Local {
            b: q.exp(),
            d,
            rho,
            q,
        })
    }

    /// Real profile without the amplitude.
    pub fn profile(&self, x: &[T]) -> T {
        self.local(x).map_or(T::zero(), |l| l.b)
    }

    pub fn value(&self, x: &[T]) -> Cplx<T> {
        self.amplitude * self.profile(x)
    }

    fn profile_gradient(&self, x: &[T]) -> Vec<T> {
        match self.local(x) {
            None => vec![T::zero(); x.len()],
            Some(l) => {
                let r2 = self.radius * self.radius;
                let g = -c::<T>(2.0) * l.q * l.q / r2;
                l.d.iter().map(|&di| l.b * g * di).collect()
            }
        }
    }

    pub fn gradient(&self, x: &[T]) -> Vec<Cplx<T>> {
        self.profile_gradient(x)
            .into_iter()
            .map(|v| self.amplitude * v)
            .collect()
    }

    /// Row-major `n × n` Hessian.
    pub fn hessian(&self, x: &[T]) -> Vec<Vec<Cplx<T>>> {
        let n = x.len();
        let mut out = vec![vec![Cplx::new(T::zero(), T::zero()); n]; n];
        if let Some(l) = self.local(x) {
            let r2 = self.radius * self.radius;
            let g = -c::<T>(2.0) * l.q * l.q / r2;
            let gp = c::<T>(4.0) * l.q * l.q * l.q / r2;
            let big = g * g + c::<T>(2.0) * gp / r2;
            for i in 0..n {
                for j in 0..n {
                    let mut v = big * l.d[i] * l.d[j];
                    if i == j {
                        v += g;
                    }
                    out[i][j] = self.amplitude * (l.b * v);
                }
            }
        }
        out
    }

    pub fn laplacian(&self, x: &[T]) -> Cplx<T> {
        match self.local(x) {
            None => Cplx::new(T::zero(), T::zero()),
            Some(l) => self.amplitude * (l.b * phi(&l, self.radius, x.len())),
        }
    }

    pub fn gradient_of_laplacian(&self, x: &[T]) -> Vec<Cplx<T>> {
        match self.local(x) {
            None => vec![Cplx::new(T::zero(), T::zero()); x.len()],
            Some(l) => {
                let n = x.len();
                let r2 = self.radius * self.radius;
                let (q, rho) = (l.q, l.rho);
                let g = -c::<T>(2.0) * q * q / r2;
                let q2 = q * q;
                let q3 = q2 * q;
                let q4 = q3 * q;
                let q5 = q4 * q;
                let dphi = (c::<T>(4.0) * q4 + c::<T>(8.0) * q3
                    - c::<T>(16.0) * rho * q5
                    - c::<T>(24.0) * rho * q4
                    + c::<T>(4.0) * T::of_usize(n) * q3)
                    / r2;
                let factor = g * phi(&l, self.radius, n) + c::<T>(2.0) * dphi / r2;
                l.d.iter()
                    .map(|&dk| self.amplitude * (l.b * dk * factor))
                    .collect()
            }
        }
    }

    /// Largest value of `|b|`, attained at the center.
    pub fn sup_norm(&self) -> T {
        self.amplitude.norm() * (-T::one()).exp()
    }
}

fn phi<T: Real>(l: &Local<T>, radius: T, n: usize) -> T {
    let (q, rho) = (l.q, l.rho);
    let q2 = q * q;
    let q3 = q2 * q;
    (c::<T>(4.0) * rho * (q2 * q2 + c::<T>(2.0) * q3) - c::<T>(2.0) * T::of_usize(n) * q2)
        / (radius * radius)
}

/// Real unit-amplitude bump, the common case in tests and scenarios.
pub fn real_bump<T: Real>(center: Vec<T>, radius: T, amplitude: T) -> Result<Bump<T>> {
    Bump::new(center, radius, creal(amplitude))
}
