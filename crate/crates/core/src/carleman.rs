//! Carleman weight `φ = e^{λ_w η}`, `η = |x − ϑ|² − ¼(t − z)²`, and the
//! quantities built from it: pseudoconvexity margins, separation of `φ`
//! between the characteristic surface and the time caps, `κ(σ)`, the
//! boundary quadratic forms and a weighted-inequality ratio experiment.
//!
//! Points of space-time are `(x, t)`; gradients put the time component at
//! index 0, matching the boundary-form index convention.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{make_frame, Direction, Frame};
use crate::io::{write_json, write_numeric_csv};
use crate::num::{c, dot, norm, pairwise_sum, Real};
use crate::quadrature::adaptive_simpson;

#[derive(Debug, Clone)]
pub struct CarlemanWeight<T> {
    lambda_w: T,
    vartheta: Vec<T>,
    horizon: T,
    frame: Frame<T>,
}

impl<T: Real> CarlemanWeight<T> {
    pub fn new(lambda_w: T, vartheta: Vec<T>, horizon: T, omega: &Direction<T>) -> Result<Self> {
        if !(lambda_w > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "lambda_w",
                reason: format!("must be positive, got {lambda_w}"),
            });
        }
        if !(horizon > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!("must be positive, got {horizon}"),
            });
        }
        if vartheta.len() != omega.dim() {
            return Err(Error::DimensionMismatch {
                expected: omega.dim(),
                got: vartheta.len(),
            });
        }
        let len = norm(&vartheta);
        if (len - c(2.0)).abs() > c(1e-12) {
            return Err(Error::InvalidParameter {
                name: "vartheta",
                reason: format!("|vartheta| must be 2, got {len}"),
            });
        }
        Ok(Self {
            lambda_w,
            vartheta,
            horizon,
            frame: make_frame(omega),
        })
    }

    pub fn lambda_w(&self) -> T {
        self.lambda_w
    }

    pub fn vartheta(&self) -> &[T] {
        &self.vartheta
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn frame(&self) -> &Frame<T> {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.vartheta.len()
    }

    /// Same weight seen from another incident direction.
    pub fn with_direction(&self, omega: &Direction<T>) -> Result<Self> {
        Self::new(self.lambda_w, self.vartheta.clone(), self.horizon, omega)
    }

    fn dist2(&self, x: &[T]) -> T {
        x.iter()
            .zip(&self.vartheta)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum()
    }

    pub fn eta(&self, x: &[T], t: T) -> T {
        let s = t - self.frame.z(x);
        self.dist2(x) - s * s / c(4.0)
    }

    pub fn phi(&self, x: &[T], t: T) -> T {
        (self.lambda_w * self.eta(x, t)).exp()
    }

    pub fn phi0(&self, x: &[T]) -> T {
        (self.lambda_w * self.dist2(x)).exp()
    }

    /// `(φ, ∇_{t,x} φ)` with the time derivative first.
    pub fn phi_jet(&self, x: &[T], t: T) -> (T, Vec<T>) {
        let p = self.phi(x, t);
        let s = t - self.frame.z(x);
        let lp = self.lambda_w * p;
        let mut grad = Vec::with_capacity(x.len() + 1);
        grad.push(-lp * s / c(2.0));
        let omega = self.frame.omega().as_slice();
        for k in 0..x.len() {
            grad.push(lp * (c::<T>(2.0) * (x[k] - self.vartheta[k]) + s * omega[k] / c(2.0)));
        }
        (p, grad)
    }
}

/// Minimum over `ρ ∈ [−1, 1]` of `(b − 1) + (b − 2)ρ² − 2ρ`.
pub fn pseudoconvexity_margin<T: Real>(b: T) -> T {
    let two = c::<T>(2.0);
    let f = |rho: T| (b - T::one()) + (b - two) * rho * rho - two * rho;
    let a = b - two;
    if a > T::zero() {
        let vertex = T::one() / a;
        if vertex <= T::one() {
            return f(vertex);
        }
    }
    f(T::one()).min(f(-T::one()))
}

/// Points of the closed unit ball on the lattice `step·ℤⁿ`.
fn ball_lattice<T: Real>(n: usize, step: T) -> Vec<Vec<T>> {
    let m = (T::one() / step).floor().to_usize().unwrap_or(0) as i64;
    let coords: Vec<T> = (-m..=m).map(|i| step * T::of(i as f64)).collect();
    let mut pts = vec![vec![]];
    for _ in 0..n {
        let mut next = Vec::with_capacity(pts.len() * coords.len());
        for p in &pts {
            for &x in &coords {
                let mut q = p.clone();
                q.push(x);
                if dot(&q, &q) <= T::one() {
                    next.push(q);
                }
            }
        }
        pts = next;
    }
    pts
}

fn project_to_ball<T: Real>(x: &mut [T]) {
    let r = norm(x);
    if r > T::one() {
        for v in x.iter_mut() {
            *v /= r;
        }
    }
}

/// Maximizes `f` over the closed unit ball: lattice search, then a compass
/// search from the best lattice point. Ties keep the first point in lattice
/// order, so the result does not depend on the thread count.
fn maximize_on_ball<T: Real, F>(n: usize, step: T, f: F) -> (Vec<T>, T)
where
    F: Fn(&[T]) -> T + Sync,
{
    let pts = ball_lattice(n, step);
    let vals: Vec<T> = pts.par_iter().map(|p| f(p)).collect();
    let mut best = 0;
    for (i, v) in vals.iter().enumerate() {
        if *v > vals[best] {
            best = i;
        }
    }
    let mut x = pts[best].clone();
    let mut fx = vals[best];
    let mut h = step;
    while h > c(1e-13) {
        let mut moved = false;
        for k in 0..n {
            for sgn in [T::one(), -T::one()] {
                let mut y = x.clone();
                y[k] += sgn * h;
                project_to_ball(&mut y);
                let fy = f(&y);
                if fy > fx {
                    x = y;
                    fx = fy;
                    moved = true;
                }
            }
        }
        if !moved {
            h /= c(2.0);
        }
    }
    (x, fx)
}

#[derive(Debug, Clone, Serialize)]
pub struct Separation<T> {
    pub min_on_gamma: T,
    pub argmin_on_gamma: Vec<T>,
    pub max_on_caps: T,
    pub argmax_on_caps: Vec<T>,
    /// Time of the cap holding the maximum, `±T`.
    pub cap_time: T,
    pub gap: T,
}

/// Default lattice step for extrema over the ball. The 1e−3 step is
/// affordable up to two dimensions; three dimensions use 1e−2.
pub fn default_search_step<T: Real>(n: usize) -> T {
    if n <= 2 {
        c(1e-3)
    } else {
        c(1e-2)
    }
}

/// Smallest `φ` on `Γ = {t = z}` and largest on the caps `t = ±T`.
pub fn weight_separation<T: Real>(weight: &CarlemanWeight<T>) -> Separation<T> {
    weight_separation_with_step(weight, default_search_step(weight.dim()))
}

pub fn weight_separation_with_step<T: Real>(weight: &CarlemanWeight<T>, step: T) -> Separation<T> {
    let n = weight.dim();
    let (argmin, neg_min) = maximize_on_ball(n, step, |x| -weight.phi(x, weight.frame.z(x)));
    let mut best: Option<(Vec<T>, T, T)> = None;
    for cap in [weight.horizon, -weight.horizon] {
        let (arg, val) = maximize_on_ball(n, step, |x| weight.phi(x, cap));
        if best.as_ref().map_or(true, |b| val > b.1) {
            best = Some((arg, val, cap));
        }
    }
    let (argmax, max_caps, cap_time) = best.expect("two caps evaluated");
    let min_gamma = -neg_min;
    Separation {
        min_on_gamma: min_gamma,
        argmin_on_gamma: argmin,
        max_on_caps: max_caps,
        argmax_on_caps: argmax,
        cap_time,
        gap: min_gamma - max_caps,
    }
}

/// `∫_{−T}^{T} e^{2σ(φ(x,t) − φ(x,z))} dt` at one point.
pub fn kappa_integral<T: Real>(weight: &CarlemanWeight<T>, sigma: T, x: &[T]) -> T {
    let horizon = weight.horizon;
    if sigma == T::zero() {
        return horizon + horizon;
    }
    let z = weight.frame.z(x);
    let p0 = weight.phi0(x);
    let lam = weight.lambda_w;
    let two_sigma = sigma + sigma;
    let f = |t: T| {
        let s = t - z;
        // φ(t) − φ(z) = φ₀(e^{−λ s²/4} − 1), written to keep relative accuracy
        (two_sigma * p0 * (-lam * s * s / c(4.0)).exp_m1()).exp()
    };
    let tol = c(1e-11);
    // the integrand peaks at t = z; split there so the peak is a node
    let zc = z.max(-horizon).min(horizon);
    adaptive_simpson(f, -horizon, zc, tol) + adaptive_simpson(f, zc, horizon, tol)
}

/// Lattice step for the `κ` supremum.
pub const KAPPA_STEP: f64 = 1e-2;

/// `κ(σ)`: supremum of [`kappa_integral`] over the closed unit ball.
pub fn kappa<T: Real>(weight: &CarlemanWeight<T>, sigma: T) -> Result<T> {
    if sigma < T::zero() {
        return Err(Error::InvalidParameter {
            name: "sigma",
            reason: format!("must be non-negative, got {sigma}"),
        });
    }
    if sigma == T::zero() {
        return Ok(weight.horizon + weight.horizon);
    }
    let (_, v) = maximize_on_ball(weight.dim(), c(KAPPA_STEP), |x| kappa_integral(weight, sigma, x));
    Ok(v)
}

/// Descriptive composite `κ(σ) + σ³e^{−2δσ}`; no inequality is attached.
pub fn gamma_curve<T: Real>(kappa: T, sigma: T, delta: T) -> T {
    kappa + sigma * sigma * sigma * (-(delta + delta) * sigma).exp()
}

/// Value and first derivatives of a real function at a space-time point,
/// time derivative first.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet<T> {
    pub value: T,
    pub grad: Vec<T>,
}

impl<T: Real> Jet<T> {
    pub fn zero(n: usize) -> Self {
        Self {
            value: T::zero(),
            grad: vec![T::zero(); n + 1],
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            value: self.value * s,
            grad: self.grad.iter().map(|&g| g * s).collect(),
        }
    }
}

/// `a_t b_t − ∇_x a · ∇_x b`.
fn minkowski<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = a[0] * b[0];
    for k in 1..a.len() {
        s -= a[k] * b[k];
    }
    s
}

pub type GFunction<T> = Arc<dyn Fn(&[T], T) -> T + Send + Sync>;

/// Boundary quadratic forms `E^j` and `F^j` with a bounded real `g`.
///
/// With `Q(a, b) = a_t b_t − ∇_x a·∇_x b` and `ε_0 = 1`, `ε_k = −1`,
///
/// `E^j = ε_j [−∂_jφ Q(v,v) + 2∂_j v Q(v,φ) + σ²∂_jφ Q(φ,φ) v² − g ∂_j v v]`.
///
/// This is the normalisation under which `Σ ν_j E^j` on `Γ` involves only
/// the tangential derivatives `Zv` and `∇_y v`; see [`Self::gamma_tangential`].
#[derive(Clone)]
pub struct BoundaryForms<T> {
    g: GFunction<T>,
}

impl<T: Real> Default for BoundaryForms<T> {
    fn default() -> Self {
        Self {
            g: Arc::new(|_, _| T::zero()),
        }
    }
}

impl<T: Real> BoundaryForms<T> {
    pub fn with_g(g: GFunction<T>) -> Self {
        Self { g }
    }

    pub fn g(&self, x: &[T], t: T) -> T {
        (self.g)(x, t)
    }

    /// `E^0, …, E^n` for a real jet `v` at `(x, t)`.
    pub fn e_components(&self, weight: &CarlemanWeight<T>, sigma: T, v: &Jet<T>, x: &[T], t: T) -> Vec<T> {
        let (_, dphi) = weight.phi_jet(x, t);
        let qvv = minkowski(&v.grad, &v.grad);
        let qvp = minkowski(&v.grad, &dphi);
        let qpp = minkowski(&dphi, &dphi);
        let g = self.g(x, t);
        let s2 = sigma * sigma;
        (0..dphi.len())
            .map(|j| {
                let e = -dphi[j] * qvv + c::<T>(2.0) * v.grad[j] * qvp + s2 * dphi[j] * qpp * v.value * v.value
                    - g * v.grad[j] * v.value;
                if j == 0 {
                    e
                } else {
                    -e
                }
            })
            .collect()
    }

    /// `F^j`: the `E^j` of the real part plus the `E^j` of the imaginary part.
    pub fn f_components(
        &self,
        weight: &CarlemanWeight<T>,
        sigma: T,
        re: &Jet<T>,
        im: &Jet<T>,
        x: &[T],
        t: T,
    ) -> Vec<T> {
        let a = self.e_components(weight, sigma, re, x, t);
        let b = self.e_components(weight, sigma, im, x, t);
        a.into_iter().zip(b).map(|(p, q)| p + q).collect()
    }

    /// `Σ_j ν_j E^j` for a unit space-time normal `ν` (time component first).
    pub fn boundary_form(
        &self,
        weight: &CarlemanWeight<T>,
        sigma: T,
        v: &Jet<T>,
        x: &[T],
        t: T,
        normal: &[T],
    ) -> Result<T> {
        if normal.len() != x.len() + 1 {
            return Err(Error::DimensionMismatch {
                expected: x.len() + 1,
                got: normal.len(),
            });
        }
        let len = norm(normal);
        if (len - T::one()).abs() > c(1e-10) {
            return Err(Error::NonUnitNormal(len.to_f64_lossy()));
        }
        let e = self.e_components(weight, sigma, v, x, t);
        Ok(dot(&e, normal))
    }

    /// The pairing on `Γ` with the downward normal `(−1, ω)/√2`, written in
    /// tangential derivatives `Z = ∂_t + ∂_z`, `∇_y` and `N = ∂_t − ∂_z`:
    ///
    /// `−(Nφ((Zv)² + σ²(Zφ)²v²) + Zφ(|∇_y v|² − σ²|∇_y φ|²v²) − 2Zv ∇_y v·∇_y φ − g Zv v)/√2`.
    pub fn gamma_tangential(&self, weight: &CarlemanWeight<T>, sigma: T, v: &Jet<T>, x: &[T]) -> T {
        let frame = &weight.frame;
        let t = frame.z(x);
        let (_, dphi) = weight.phi_jet(x, t);
        let split = |grad: &[T]| {
            let spatial = &grad[1..];
            let dz = frame.z(spatial);
            let dy = frame.y(spatial);
            (grad[0] + dz, grad[0] - dz, dy)
        };
        let (zv, _, yv) = split(&v.grad);
        let (zp, np, yp) = split(&dphi);
        let s2 = sigma * sigma;
        let v2 = v.value * v.value;
        let g = self.g(x, t);
        let bracket = np * (zv * zv + s2 * zp * zp * v2) + zp * (dot(&yv, &yv) - s2 * dot(&yp, &yp) * v2)
            - c::<T>(2.0) * zv * dot(&yv, &yp)
            - g * zv * v.value;
        -bracket / c::<T>(2.0).sqrt()
    }
}

/// Unit downward normal of `Γ`, `(−1, ω)/√2`.
pub fn gamma_normal<T: Real>(weight: &CarlemanWeight<T>) -> Vec<T> {
    let r = c::<T>(2.0).sqrt();
    std::iter::once(-T::one() / r)
        .chain(weight.frame.omega().as_slice().iter().map(|&w| w / r))
        .collect()
}

/// Value, space-time gradient (time first) and `□u = u_tt − Δu`.
#[derive(Debug, Clone, Copy)]
pub struct TestSample<T> {
    pub u: T,
    pub grad_norm2: T,
    pub box_u: T,
}

/// Test function with closed-form derivatives, supported in the space-time
/// ball of radius `radius()` about `(center_x(), center_t())`.
pub trait TestFunction<T>: Sync {
    fn center_x(&self) -> &[T];
    fn center_t(&self) -> T;
    fn radius(&self) -> T;
    fn sample(&self, x: &[T], t: T) -> TestSample<T>;
}

/// `exp(1/(s − 1))`, `s = |(x, t) − c|²/ρ²`, optionally times the plane
/// wave `cos(k(t − d·x))`, which solves the free wave equation.
#[derive(Debug, Clone)]
pub struct SpaceTimeBump<T> {
    center_x: Vec<T>,
    center_t: T,
    radius: T,
    wave: Option<(T, Vec<T>)>,
}

impl<T: Real> SpaceTimeBump<T> {
    pub fn new(center_x: Vec<T>, center_t: T, radius: T) -> Result<Self> {
        if !(radius > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "radius",
                reason: format!("must be positive, got {radius}"),
            });
        }
        Ok(Self {
            center_x,
            center_t,
            radius,
            wave: None,
        })
    }

    pub fn with_wave(mut self, k: T, direction: &Direction<T>) -> Result<Self> {
        if direction.dim() != self.center_x.len() {
            return Err(Error::DimensionMismatch {
                expected: self.center_x.len(),
                got: direction.dim(),
            });
        }
        self.wave = Some((k, direction.as_slice().to_vec()));
        Ok(self)
    }
}

impl<T: Real> TestFunction<T> for SpaceTimeBump<T> {
    fn center_x(&self) -> &[T] {
        &self.center_x
    }

    fn center_t(&self) -> T {
        self.center_t
    }

    fn radius(&self) -> T {
        self.radius
    }

    fn sample(&self, x: &[T], t: T) -> TestSample<T> {
        let n = x.len();
        let mut d = Vec::with_capacity(n + 1);
        d.push(t - self.center_t);
        d.extend(x.iter().zip(&self.center_x).map(|(&a, &b)| a - b));
        let r2 = self.radius * self.radius;
        let s = dot(&d, &d) / r2;
        if s >= T::one() {
            return TestSample {
                u: T::zero(),
                grad_norm2: T::zero(),
                box_u: T::zero(),
            };
        }
        let m = s - T::one();
        let b = (T::one() / m).exp();
        let b1 = -b / (m * m);
        let b2 = b / (m * m * m * m) + c::<T>(2.0) * b / (m * m * m);
        let two = c::<T>(2.0);
        let db: Vec<T> = d.iter().map(|&dm| b1 * two * dm / r2).collect();
        // ∂_μμ b = b''·4d_μ²/ρ⁴ + b'·2/ρ², signed by the metric
        let mut box_b = T::zero();
        for (mu, &dm) in d.iter().enumerate() {
            let second = b2 * c::<T>(4.0) * dm * dm / (r2 * r2) + b1 * two / r2;
            if mu == 0 {
                box_b += second;
            } else {
                box_b -= second;
            }
        }
        let (p, dp) = match &self.wave {
            None => (T::one(), vec![T::zero(); n + 1]),
            Some((k, dir)) => {
                let theta = *k * (t - dot(dir, x));
                let (sn, cs) = theta.sin_cos();
                let mut dp = vec![-*k * sn];
                dp.extend(dir.iter().map(|&dk| *k * dk * sn));
                (cs, dp)
            }
        };
        let u = b * p;
        let grad: Vec<T> = db.iter().zip(&dp).map(|(&gb, &gp)| p * gb + b * gp).collect();
        let box_u = p * box_b + two * minkowski(&db, &dp);
        TestSample {
            u,
            grad_norm2: dot(&grad, &grad),
            box_u,
        }
    }
}

/// Samples per space-time axis for [`carleman_ratio`].
pub const RATIO_POINTS_PER_AXIS: usize = 48;

/// `σ∫e^{2σφ}(|∇_{x,t}u|² + σ²u²) / ∫e^{2σφ}|□u|²` for each `σ`, by
/// midpoint quadrature over the bounding box of `supp u`.
pub fn carleman_ratio<T: Real>(
    weight: &CarlemanWeight<T>,
    sigmas: &[T],
    u: &dyn TestFunction<T>,
) -> Result<Vec<T>> {
    carleman_ratio_with(weight, sigmas, u, RATIO_POINTS_PER_AXIS)
}

pub fn carleman_ratio_with<T: Real>(
    weight: &CarlemanWeight<T>,
    sigmas: &[T],
    u: &dyn TestFunction<T>,
    points_per_axis: usize,
) -> Result<Vec<T>> {
    let n = weight.dim();
    let cx = u.center_x();
    if cx.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cx.len(),
        });
    }
    let r = u.radius();
    if norm(cx) + r >= T::one() || u.center_t().abs() + r >= weight.horizon {
        return Err(Error::NotCompactlySupported);
    }
    let m = points_per_axis.max(2);
    let total = m.pow((n + 1) as u32);
    let step = (r + r) / T::of_usize(m);
    let samples: Vec<(T, TestSample<T>)> = (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut coord = Vec::with_capacity(n + 1);
            for _ in 0..=n {
                coord.push(T::of_usize(idx % m));
                idx /= m;
            }
            let at = |axis: usize, centre: T| centre - r + (coord[axis] + c(0.5)) * step;
            let t = at(0, u.center_t());
            let x: Vec<T> = (0..n).map(|k| at(k + 1, cx[k])).collect();
            (weight.phi(&x, t), u.sample(&x, t))
        })
        .filter(|(_, s)| s.u != T::zero() || s.box_u != T::zero() || s.grad_norm2 != T::zero())
        .collect();
    if samples.is_empty() {
        return Err(Error::DegenerateTestFunction);
    }
    let phi_max = samples.iter().fold(T::neg_infinity(), |a, (p, _)| a.max(*p));
    sigmas
        .iter()
        .map(|&sigma| {
            let w: Vec<T> = samples
                .iter()
                .map(|(p, _)| (c::<T>(2.0) * sigma * (*p - phi_max)).exp())
                .collect();
            let top: Vec<T> = samples
                .iter()
                .zip(&w)
                .map(|((_, s), &wi)| wi * (s.grad_norm2 + sigma * sigma * s.u * s.u))
                .collect();
            let bottom: Vec<T> = samples
                .iter()
                .zip(&w)
                .map(|((_, s), &wi)| wi * s.box_u * s.box_u)
                .collect();
            let den = pairwise_sum(&bottom);
            if !(den > T::zero()) {
                return Err(Error::DegenerateTestFunction);
            }
            Ok(sigma * pairwise_sum(&top) / den)
        })
        .collect()
}

/// Tables produced by a Carleman run, written as CSVs plus a sidecar.
#[derive(Debug, Clone)]
pub struct CarlemanReport {
    pub lambda_w: f64,
    pub vartheta: Vec<f64>,
    pub horizon: f64,
    pub omega: Vec<f64>,
    pub kappa: Vec<(f64, f64)>,
    pub ratio: Vec<(f64, f64)>,
    pub margin: Vec<(f64, f64)>,
    pub separation: Separation<f64>,
}

impl CarlemanReport {
    /// `kappa.csv`, `ratio.csv`, `margin.csv`, `separation.csv`, `meta.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let h = |cols: &[&str]| cols.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        write_numeric_csv(
            &dir.join("kappa.csv"),
            &h(&["sigma", "kappa"]),
            self.kappa.iter().map(|&(a, b)| vec![a, b]),
        )?;
        write_numeric_csv(
            &dir.join("ratio.csv"),
            &h(&["sigma", "ratio"]),
            self.ratio.iter().map(|&(a, b)| vec![a, b]),
        )?;
        write_numeric_csv(
            &dir.join("margin.csv"),
            &h(&["b", "margin"]),
            self.margin.iter().map(|&(a, b)| vec![a, b]),
        )?;
        let s = &self.separation;
        write_numeric_csv(
            &dir.join("separation.csv"),
            &h(&["min_on_gamma", "max_on_caps", "cap_time", "gap"]),
            [vec![s.min_on_gamma, s.max_on_caps, s.cap_time, s.gap]],
        )?;
        write_json(
            &dir.join("meta.json"),
            &serde_json::json!({
                "lambda_w": self.lambda_w,
                "vartheta": self.vartheta,
                "horizon": self.horizon,
                "omega": self.omega,
                "kappa_step": KAPPA_STEP,
                "ratio_points_per_axis": RATIO_POINTS_PER_AXIS,
                "separation": s,
            }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weight(lambda: f64, horizon: f64) -> CarlemanWeight<f64> {
        CarlemanWeight::new(lambda, vec![2.0, 0.0], horizon, &Direction::axis(2, 0, true).unwrap()).unwrap()
    }

    #[test]
    fn margins() {
        assert!((pseudoconvexity_margin(4.0f64) - 2.5).abs() <= 1e-12);
        assert!((pseudoconvexity_margin(2.0f64) + 1.0).abs() <= 1e-12);
        assert!(pseudoconvexity_margin(0.0f64) < 0.0);
        for k in 1..=70 {
            let b = 3.0 + k as f64 / 10.0;
            assert!(pseudoconvexity_margin(b) > 0.0, "{b}");
        }
    }

    #[test]
    fn rejects_bad_center() {
        let e1 = Direction::axis(2, 0, true).unwrap();
        assert!(CarlemanWeight::new(1.0, vec![1.0, 0.0], 7.5, &e1).is_err());
        assert!(CarlemanWeight::new(0.0, vec![2.0, 0.0], 7.5, &e1).is_err());
    }

    #[test]
    fn phi_jet_matches_differences() {
        let w: CarlemanWeight<f64> = CarlemanWeight::new(
            0.7,
            vec![1.2, 1.6],
            7.5,
            &Direction::normalized(vec![1.0, 2.0]).unwrap(),
        )
        .unwrap();
        let (x, t) = ([0.3f64, -0.2], 0.4f64);
        let (_, g) = w.phi_jet(&x, t);
        let d = 1e-6;
        let ft = (w.phi(&x, t + d) - w.phi(&x, t - d)) / (2.0 * d);
        assert!((ft - g[0]).abs() <= 1e-6 * g[0].abs().max(1.0));
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += d;
            xm[k] -= d;
            let fd = (w.phi(&xp, t) - w.phi(&xm, t)) / (2.0 * d);
            assert!((fd - g[k + 1]).abs() <= 1e-6 * g[k + 1].abs().max(1.0));
        }
    }

    #[test]
    fn bump_derivatives_match_differences() {
        let u = SpaceTimeBump::new(vec![0.1, -0.1], 0.2, 0.5)
            .unwrap()
            .with_wave(6.0, &Direction::normalized(vec![3.0, 4.0]).unwrap())
            .unwrap();
        let (x, t) = ([0.2f64, 0.05], 0.1f64);
        let d = 1e-4;
        let f = |x: [f64; 2], t: f64| u.sample(&x, t).u;
        let utt = (f(x, t + d) - 2.0 * f(x, t) + f(x, t - d)) / (d * d);
        let mut lap = 0.0;
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += d;
            xm[k] -= d;
            lap += (f(xp, t) - 2.0 * f(x, t) + f(xm, t)) / (d * d);
        }
        let s = u.sample(&x, t);
        assert!((utt - lap - s.box_u).abs() <= 1e-5 * s.box_u.abs().max(1.0), "{} vs {}", utt - lap, s.box_u);
    }

    #[test]
    fn kappa_at_zero_is_twice_horizon() {
        assert_eq!(kappa(&weight(1.0, 7.5), 0.0).unwrap(), 15.0);
    }

    #[test]
    fn ratio_rejects_support_touching_boundary() {
        let w = weight(1.0, 7.5);
        let u = SpaceTimeBump::new(vec![0.5, 0.0], 0.0, 0.5).unwrap();
        assert!(matches!(
            carleman_ratio(&w, &[1.0], &u),
            Err(Error::NotCompactlySupported)
        ));
    }
}
