//! Time-Fourier transforms of traces and far-field amplitudes.
//!
//! Transforms use the convention `f̃(λ) = ∫ e^{iλt} f(t) dt`. An optional
//! shift `μ ≥ 0` evaluates at `λ + iμ`, i.e. multiplies the integrand by
//! `e^{−μt}`, which damps the slowly decaying tails of two-dimensional waves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldSpec, Form};
use crate::geometry::{BoundaryPoint, Direction, SimGrid};
use crate::num::{c, czero, Cplx, Real};
use crate::pwe::WaveKind;
use crate::traces::BoundaryTrace;
use crate::wavesolver::{run, Formulation, MollifiedIncident, TraceRequest};

/// Fraction of the record covered by the closing half-cosine taper.
pub const TAPER_FRACTION: f64 = 0.2;

/// Window applied before transforming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Window<T> {
    pub t_start: T,
    pub t_end: T,
    /// Share of `[t_start, t_end]` at the end over which the taper falls to 0.
    pub taper_fraction: T,
    /// Imaginary part `μ` of the complex frequency.
    pub shift: T,
}

impl<T: Real> Window<T> {
    pub fn new(t_start: T, t_end: T, shift: T) -> Result<Self> {
        if t_end <= t_start {
            return Err(Error::InvalidParameter {
                name: "window",
                reason: format!("empty window [{t_start}, {t_end}]"),
            });
        }
        if shift < T::zero() || !shift.is_finite() {
            return Err(Error::InvalidParameter {
                name: "shift",
                reason: format!("must be finite and non-negative, got {shift}"),
            });
        }
        Ok(Self {
            t_start,
            t_end,
            taper_fraction: c(TAPER_FRACTION),
            shift,
        })
    }

    pub fn length(&self) -> T {
        self.t_end - self.t_start
    }

    /// Lowest frequency one window length resolves, `2π / length`.
    pub fn lambda_min(&self) -> T {
        T::TAU() / self.length()
    }

    /// Taper value at `t`: 1, then a half cosine down to 0 at `t_end`.
    pub fn taper(&self, t: T) -> T {
        let width = self.length() * self.taper_fraction;
        let start = self.t_end - width;
        if t <= start || width <= T::zero() {
            T::one()
        } else if t >= self.t_end {
            T::zero()
        } else {
            (T::one() + (T::PI() * (t - start) / width).cos()) / c(2.0)
        }
    }

    /// Derivative of [`Window::taper`]; zero outside the closing ramp.
    pub fn taper_slope(&self, t: T) -> T {
        let width = self.length() * self.taper_fraction;
        let start = self.t_end - width;
        if t <= start || t >= self.t_end || width <= T::zero() {
            T::zero()
        } else {
            -T::PI() / (c::<T>(2.0) * width) * (T::PI() * (t - start) / width).sin()
        }
    }
}

/// `∫ e^{i(λ+iμ)t} taper(t) f(t) dt` by the trapezoid rule on uniform samples
/// `t_k = t0 + k dt`, for any real `λ`.
pub fn transform<T: Real>(t0: T, dt: T, samples: &[Cplx<T>], lambda: T, window: &Window<T>) -> Cplx<T> {
    let m = samples.len();
    if m < 2 {
        return czero();
    }
    let terms: Vec<Cplx<T>> = samples
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let t = t0 + dt * T::of_usize(k);
            let end = if k == 0 || k == m - 1 { c(0.5) } else { T::one() };
            let weight = end * window.taper(t) * (-window.shift * t).exp();
            *v * Cplx::from_polar(weight, lambda * t)
        })
        .collect();
    pairwise_sum_c(&terms) * dt
}

fn pairwise_sum_c<T: Real>(xs: &[Cplx<T>]) -> Cplx<T> {
    if xs.len() <= 8 {
        return xs.iter().fold(czero(), |a, b| a + b);
    }
    let (l, r) = xs.split_at(xs.len() / 2);
    pairwise_sum_c(l) + pairwise_sum_c(r)
}

/// Spectrum of a trace at positive frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTrace<T> {
    pub points: Vec<BoundaryPoint<T>>,
    pub freqs: Vec<T>,
    /// Point-major: `(p, j)` at `p * freqs.len() + j`.
    pub values: Vec<Cplx<T>>,
    pub window: Window<T>,
}

impl<T: Real> SpectralTrace<T> {
    pub fn at(&self, p: usize, j: usize) -> Cplx<T> {
        self.values[p * self.freqs.len() + j]
    }
}

fn check_freqs<T: Real>(freqs: &[T], lambda_min: T) -> Result<()> {
    if freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "freqs",
            reason: "must be strictly increasing".into(),
        });
    }
    if let Some(&f) = freqs.iter().find(|&&f| !(f >= lambda_min)) {
        return Err(Error::UnresolvableFrequency {
            freq: f.to_f64_lossy(),
            min: lambda_min.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Transforms every point of `trace` over its whole record.
pub fn fourier_trace<T: Real>(trace: &BoundaryTrace<T>, freqs: &[T], shift: T) -> Result<SpectralTrace<T>> {
    let t_end = trace.time(trace.n_times.saturating_sub(1));
    let window = Window::new(trace.t0, t_end, shift)?;
    check_freqs(freqs, window.lambda_min())?;
    let nf = freqs.len();
    let values: Vec<Cplx<T>> = (0..trace.points.len() * nf)
        .into_par_iter()
        .map(|i| transform(trace.t0, trace.dt, trace.series(i / nf), freqs[i % nf], &window))
        .collect();
    Ok(SpectralTrace {
        points: trace.points.clone(),
        freqs: freqs.to_vec(),
        values,
        window,
    })
}

/// The default grid of 16 frequencies in `[π, 4π]`.
pub fn default_freqs<T: Real>() -> Vec<T> {
    (0..16)
        .map(|k| T::PI() * (T::one() + c::<T>(3.0) * T::of_usize(k) / c(15.0)))
        .collect()
}

/// Far-field amplitude `a(λ, θ, ω)` at one radius.
#[derive(Debug, Clone, PartialEq)]
pub struct FarField<T> {
    pub thetas: Vec<Direction<T>>,
    pub freqs: Vec<T>,
    /// Theta-major: `(i, j)` at `i * freqs.len() + j`.
    pub amplitude: Vec<Cplx<T>>,
    pub radius: T,
    pub omega: Direction<T>,
    pub window: Window<T>,
}

impl<T: Real> FarField<T> {
    pub fn at(&self, i: usize, j: usize) -> Cplx<T> {
        self.amplitude[i * self.freqs.len() + j]
    }

    /// Rows `(theta, lambda, re, im)`; `theta` is the polar angle in the plane
    /// of the first two axes.
    pub fn csv_rows(&self) -> Vec<[f64; 4]> {
        let mut rows = Vec::with_capacity(self.amplitude.len());
        for (i, th) in self.thetas.iter().enumerate() {
            let s = th.as_slice();
            let angle = if s.len() >= 2 { s[1].atan2(s[0]) } else { T::zero() };
            for (j, f) in self.freqs.iter().enumerate() {
                let a = self.at(i, j);
                rows.push([
                    angle.to_f64_lossy(),
                    f.to_f64_lossy(),
                    a.re.to_f64_lossy(),
                    a.im.to_f64_lossy(),
                ]);
            }
        }
        rows
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "omega": self.omega.as_slice().iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
            "radius": self.radius.to_f64_lossy(),
            "window": {
                "t_start": self.window.t_start.to_f64_lossy(),
                "t_end": self.window.t_end.to_f64_lossy(),
                "taper_fraction": self.window.taper_fraction.to_f64_lossy(),
                "shift": self.window.shift.to_f64_lossy(),
            },
            "truncation_caveat": "finite-radius estimate; o(R^{-(n-1)/2}) terms are not removed",
        })
    }
}

/// Relative `ℓ²` difference `‖a − b‖ / max(‖a‖, ‖b‖)` over all entries.
pub fn relative_difference<T: Real>(a: &FarField<T>, b: &FarField<T>) -> Result<T> {
    if a.amplitude.len() != b.amplitude.len() {
        return Err(Error::SamplingMismatch(format!(
            "{} vs {} far-field entries",
            a.amplitude.len(),
            b.amplitude.len()
        )));
    }
    let sq = |it: &mut dyn Iterator<Item = Cplx<T>>| it.fold(T::zero(), |s, v| s + v.norm_sqr()).sqrt();
    let diff = sq(&mut a.amplitude.iter().zip(&b.amplitude).map(|(x, y)| x - y));
    let na = sq(&mut a.amplitude.iter().copied());
    let nb = sq(&mut b.amplitude.iter().copied());
    Ok(diff / na.max(nb).max(c(crate::traces::DISCREPANCY_FLOOR)))
}

/// Grid and window choices for a far-field run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FarFieldBudget<T> {
    pub h: T,
    /// Record length after the largest radius is reached: `T_sim = R_max + tail`.
    pub tail: T,
    pub shift: T,
    pub formulation: Formulation,
}

impl<T: Real> Default for FarFieldBudget<T> {
    fn default() -> Self {
        Self {
            h: c(1.0 / 64.0),
            tail: c(3.0),
            shift: T::zero(),
            formulation: Formulation::SmoothPart,
        }
    }
}

/// Far fields at several radii from one δ-wave run: `a ≈ e^{−iλR}
/// R^{(n−1)/2} ũ^s(Rθ, λ)` with `ũ^s` the transformed scattered field.
pub fn far_fields<T: Real>(
    spec: &FieldSpec<T>,
    omega: &Direction<T>,
    freqs: &[T],
    thetas: &[Direction<T>],
    radii: &[T],
    budget: &FarFieldBudget<T>,
) -> Result<Vec<FarField<T>>> {
    let n = omega.dim();
    let r_max = radii.iter().copied().fold(T::zero(), T::max);
    if let Some(&r) = radii.iter().find(|&&r| !(r > T::one())) {
        return Err(Error::InvalidParameter {
            name: "radius",
            reason: format!("must exceed 1, got {r}"),
        });
    }
    for th in thetas {
        if th.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: th.dim() });
        }
    }
    let h = budget.h;
    let eps = h * c(4.0);
    let t_sim = r_max + budget.tail;
    let grid = SimGrid::for_window(n, h, t_sim, eps)?;
    if grid.extent() < r_max + h * c(3.0) {
        return Err(Error::GridTooSmall {
            extent: grid.extent().to_f64_lossy(),
            required: (r_max + h * c(3.0)).to_f64_lossy(),
        });
    }
    let points: Vec<BoundaryPoint<T>> = radii
        .iter()
        .flat_map(|&r| {
            thetas.iter().map(move |th| BoundaryPoint {
                x: th.as_slice().iter().map(|&v| v * r).collect(),
                angles: vec![],
            })
        })
        .collect();
    let inc = MollifiedIncident::new(WaveKind::Delta, eps)?;
    let (_, trace) = run(
        spec,
        omega,
        &inc,
        budget.formulation,
        &grid,
        &TraceRequest::new(points),
    )?;
    let trace = trace.to_scattered()?;
    let spectral = fourier_trace(&trace, freqs, budget.shift)?;
    let nt = thetas.len();
    let nf = freqs.len();
    let expo = c::<T>(0.5) * T::of_usize(n - 1);
    Ok(radii
        .iter()
        .enumerate()
        .map(|(ri, &r)| {
            let scale = r.powf(expo);
            let amplitude = (0..nt * nf)
                .map(|k| {
                    let (i, j) = (k / nf, k % nf);
                    let lambda = freqs[j];
                    spectral.at(ri * nt + i, j) * Cplx::from_polar(scale, -lambda * r)
                })
                .collect();
            FarField {
                thetas: thetas.to_vec(),
                freqs: freqs.to_vec(),
                amplitude,
                radius: r,
                omega: omega.clone(),
                window: spectral.window,
            }
        })
        .collect())
}

/// Far field at a single radius.
pub fn far_field<T: Real>(
    spec: &FieldSpec<T>,
    omega: &Direction<T>,
    freqs: &[T],
    thetas: &[Direction<T>],
    radius: T,
    budget: &FarFieldBudget<T>,
) -> Result<FarField<T>> {
    Ok(far_fields(spec, omega, freqs, thetas, &[radius], budget)?.remove(0))
}

/// `max (2‖A‖²_∞ + ‖q‖_∞)^{1/2}` over Magnetic specs, sup-norms sampled on
/// the 400^n grid of `[−1, 1]^n` restricted to the closed unit ball.
pub fn r_zero<T: Real>(specs: &[FieldSpec<T>]) -> Result<T> {
    r_zero_sampled(specs, 400)
}

/// [`r_zero`] with `m` samples per axis.
pub fn r_zero_sampled<T: Real>(specs: &[FieldSpec<T>], m: usize) -> Result<T> {
    let mut best = T::zero();
    for spec in specs {
        if spec.form() != Form::Magnetic {
            return Err(Error::WrongForm { expected: "magnetic" });
        }
        let n = spec.dim();
        let count = m.pow(n as u32);
        let step = c::<T>(2.0) / T::of_usize(m - 1);
        let (a, q) = (0..count)
            .into_par_iter()
            .map(|mut k| {
                let mut x = vec![T::zero(); n];
                for xd in x.iter_mut().rev() {
                    *xd = -T::one() + step * T::of_usize(k % m);
                    k /= m;
                }
                if crate::num::norm(&x) > T::one() {
                    return (T::zero(), T::zero());
                }
                let a = spec.vector_at(&x).iter().fold(T::zero(), |s, v| s + v.norm_sqr()).sqrt();
                (a, spec.scalar_at(&x).norm())
            })
            .reduce(|| (T::zero(), T::zero()), |u, v| (u.0.max(v.0), u.1.max(v.1)));
        best = best.max((c::<T>(2.0) * a * a + q).sqrt());
    }
    Ok(best)
}
