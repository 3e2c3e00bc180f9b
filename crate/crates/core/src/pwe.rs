//! Progressing-wave expansion along the characteristics of an incident
//! direction `ω`.
//!
//! For the drift operator `L = −Δ + 2W·∇ + V` the δ-wave has the expansion
//! `U = a_{−1} δ(t−z) + Σ_j a_j (t−z)_+^j` with
//!
//! * `a_{−1} = e^ψ`, `ψ(x) = ∫_{−∞}^0 ω·W(x+sω) ds`
//! * `a_0 = F = −½ e^ψ ∫_{−∞}^0 [−Δψ − |∇ψ|² + 2W·∇ψ + V](x+sω) ds`
//! * `a_{k+1} = −(1/(2(k+1))) e^ψ ∫_{−∞}^0 e^{−ψ} (L a_k)(x+sω) ds`
//!
//! The H-wave is its time integral: coefficients `0, e^ψ, a_0, a_1/2, ...`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldSpec, Form};
use crate::geometry::{Direction, Lattice};
use crate::num::{c, czero, dot, Cplx, Real};
use crate::quadrature::composite_simpson_c;

/// Highest expansion order the engine computes.
pub const MAX_ORDER: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveKind {
    /// Incident profile `δ(t − x·ω)`.
    Delta,
    /// Incident profile `H(t − x·ω)`.
    Heaviside,
}

/// Default ray node spacing for a lattice of spacing `h`.
pub fn ray_step<T: Real>(h: T, support_radius: T) -> T {
    let r = if support_radius > T::zero() {
        support_radius
    } else {
        T::one()
    };
    (h / c(2.0)).min(r / c(200.0))
}

/// Parameters `s_lo < s_hi` where the line `x + sω` enters and leaves the
/// ball of radius `r`, or `None` if it misses the ball or only meets it for
/// `s ≥ 0`.
fn ray_chord<T: Real>(x: &[T], omega: &[T], r: T) -> Option<(T, T)> {
    let b = dot(x, omega);
    let cc = dot(x, x) - r * r;
    let disc = b * b - cc;
    if disc <= T::zero() {
        return None;
    }
    let s_lo = -b - disc.sqrt();
    (s_lo < T::zero()).then(|| (s_lo, -b + disc.sqrt()))
}

fn ray_entry<T: Real>(x: &[T], omega: &[T], r: T) -> Option<T> {
    ray_chord(x, omega, r).map(|(lo, _)| lo)
}

/// Cumulative integral on uniform nodes with the four-point rule
/// `∫_{t_j}^{t_{j+1}} ≈ Δ/24 (−f_{j−1} + 13 f_j + 13 f_{j+1} − f_{j+2})`.
/// `f_{−1}` is taken as 0 (nodes start upstream of the support). The last
/// entry lacks a right neighbour, copies its predecessor and is never read.
fn cumulative4<T: Real>(f: &[Cplx<T>], delta: T) -> Vec<Cplx<T>> {
    let m = f.len();
    let mut out = vec![czero(); m];
    let w = delta / c(24.0);
    let k13 = c::<T>(13.0);
    for j in 0..m.saturating_sub(2) {
        let fm1 = if j == 0 { czero() } else { f[j - 1] };
        let inc = (-fm1 + f[j] * k13 + f[j + 1] * k13 - f[j + 2]) * w;
        out[j + 1] = out[j] + inc;
    }
    if m >= 2 {
        out[m - 1] = out[m - 2];
    }
    out
}

/// `ψ` and the Goursat value `F` at one point, with `ψ`'s derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct RayJet<T> {
    pub psi: Cplx<T>,
    pub grad_psi: Vec<Cplx<T>>,
    pub lap_psi: Cplx<T>,
    pub goursat: Cplx<T>,
}

/// Nodes `t_j = (j − m) Δ`, `j = 0..=m+2`, with `t_0` at or below `s_lo`.
fn nodes<T: Real>(s_lo: T, step: T) -> (usize, Vec<T>) {
    let m = (-s_lo / step).ceil().to_usize().unwrap_or(0) + 1;
    let t = (0..=m + 2)
        .map(|j| (T::of_usize(j) - T::of_usize(m)) * step)
        .collect();
    (m, t)
}

/// `ψ(x)` by quadrature along the backward ray; `step` is the node spacing.
pub fn psi_at<T: Real>(spec: &FieldSpec<T>, omega: &Direction<T>, x: &[T], step: T) -> Cplx<T> {
    let w = omega.as_slice();
    let field = spec.vector_part();
    let Some((s_lo, s_hi)) = ray_chord(x, w, field.support_radius()) else {
        return czero();
    };
    let s_hi = s_hi.min(T::zero());
    composite_simpson_c(
        |s| {
            let p: Vec<T> = x.iter().zip(w).map(|(&a, &o)| a + s * o).collect();
            let v = field.value(&p);
            v.iter().zip(w).fold(czero(), |acc, (&vi, &oi)| acc + vi * oi)
        },
        s_lo,
        s_hi,
        step,
    )
}

/// `ψ`, `∇ψ`, `Δψ` and `F` at `x`. Drift form expected.
pub fn goursat_at<T: Real>(
    spec: &FieldSpec<T>,
    omega: &Direction<T>,
    x: &[T],
    step: T,
) -> RayJet<T> {
    let n = x.len();
    let w = omega.as_slice();
    let zero = RayJet {
        psi: czero(),
        grad_psi: vec![czero(); n],
        lap_psi: czero(),
        goursat: czero(),
    };
    let Some(s_lo) = ray_entry(x, w, spec.support_radius()) else {
        return zero;
    };
    let (m, t) = nodes(s_lo, step);
    let field = spec.vector_part();
    let count = t.len();
    let mut g_psi = Vec::with_capacity(count);
    let mut g_grad = vec![Vec::with_capacity(count); n];
    let mut g_lap = Vec::with_capacity(count);
    let mut wv = Vec::with_capacity(count);
    let mut vv = Vec::with_capacity(count);
    for &s in &t {
        let p: Vec<T> = x.iter().zip(w).map(|(&a, &o)| a + s * o).collect();
        let val = field.value(&p);
        let jac = field.jacobian(&p);
        let lap = field.laplacian(&p);
        g_psi.push(val.iter().zip(w).fold(czero(), |acc, (&v, &o)| acc + v * o));
        for (k, gk) in g_grad.iter_mut().enumerate() {
            gk.push((0..n).fold(czero(), |acc, i| acc + jac[i][k] * w[i]));
        }
        g_lap.push(lap.iter().zip(w).fold(czero(), |acc, (&v, &o)| acc + v * o));
        vv.push(spec.scalar_at(&p));
        wv.push(val);
    }
    let psi = cumulative4(&g_psi, step);
    let grad: Vec<Vec<Cplx<T>>> = g_grad.iter().map(|g| cumulative4(g, step)).collect();
    let lap = cumulative4(&g_lap, step);
    let integrand: Vec<Cplx<T>> = (0..count)
        .map(|j| {
            let gsq = (0..n).fold(czero(), |a, k| a + grad[k][j] * grad[k][j]);
            let wg = (0..n).fold(czero(), |a, k| a + wv[j][k] * grad[k][j]);
            -lap[j] - gsq + wg * c::<T>(2.0) + vv[j]
        })
        .collect();
    let total = cumulative4(&integrand, step);
    RayJet {
        psi: psi[m],
        grad_psi: (0..n).map(|k| grad[k][m]).collect(),
        lap_psi: lap[m],
        goursat: -psi[m].exp() * total[m] / c::<T>(2.0),
    }
}

/// `ψ` on every lattice node.
pub fn compute_psi<T: Real>(
    spec: &FieldSpec<T>,
    omega: &Direction<T>,
    lattice: &Lattice<T>,
) -> Result<Vec<Cplx<T>>> {
    spec.require_form(Form::Drift)?;
    let step = ray_step(lattice.h(), spec.support_radius());
    Ok((0..lattice.len())
        .into_par_iter()
        .map(|i| psi_at(spec, omega, &lattice.point(i), step))
        .collect())
}

/// The Goursat value `F` on every lattice node; `psi` supplies `e^ψ(x)`.
pub fn compute_f<T: Real>(
    spec: &FieldSpec<T>,
    omega: &Direction<T>,
    lattice: &Lattice<T>,
    psi: &[Cplx<T>],
) -> Result<Vec<Cplx<T>>> {
    spec.require_form(Form::Drift)?;
    if psi.len() != lattice.len() {
        return Err(Error::SamplingMismatch(format!(
            "psi has {} samples, lattice {}",
            psi.len(),
            lattice.len()
        )));
    }
    let step = ray_step(lattice.h(), spec.support_radius());
    Ok((0..lattice.len())
        .into_par_iter()
        .map(|i| {
            let jet = goursat_at(spec, omega, &lattice.point(i), step);
            // F = −½ e^ψ ∫(...); rescale to the supplied ψ
            jet.goursat * (psi[i] - jet.psi).exp()
        })
        .collect())
}

/// Sampled expansion coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ExpansionTable<T> {
    pub omega: Direction<T>,
    pub kind: WaveKind,
    pub order: usize,
    pub lattice: Lattice<T>,
    pub psi: Vec<Cplx<T>>,
    /// `coeffs[j + 1]` holds `a_j`, `j = −1..=order`.
    pub coeffs: Vec<Vec<Cplx<T>>>,
    /// Ray node spacing used for the line integrals.
    pub step: T,
}

impl<T: Real> ExpansionTable<T> {
    /// Samples of `a_j`, `j ≥ −1`.
    pub fn coeff(&self, j: isize) -> &[Cplx<T>] {
        &self.coeffs[(j + 1) as usize]
    }

    /// Cubic interpolation of `a_j` at `x`.
    pub fn coeff_at(&self, j: isize, x: &[T]) -> Option<Cplx<T>> {
        self.lattice.interpolate(self.coeff(j), x)
    }

    pub fn psi_at(&self, x: &[T]) -> Option<Cplx<T>> {
        self.lattice.interpolate(&self.psi, x)
    }

    /// Rows `x..., psi_re, psi_im, a_{-1}_re, a_{-1}_im, ...`.
    pub fn csv_header(&self) -> Vec<String> {
        let mut h: Vec<String> = (0..self.lattice.dim()).map(|d| format!("x{d}")).collect();
        h.push("psi_re".into());
        h.push("psi_im".into());
        for j in -1..=self.order as isize {
            let tag = if j < 0 { "m1".to_string() } else { j.to_string() };
            h.push(format!("a_{tag}_re"));
            h.push(format!("a_{tag}_im"));
        }
        h
    }

    pub fn csv_rows(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.lattice.len()).map(move |i| {
            let mut row: Vec<f64> = self
                .lattice
                .point(i)
                .into_iter()
                .map(Real::to_f64_lossy)
                .collect();
            row.push(self.psi[i].re.to_f64_lossy());
            row.push(self.psi[i].im.to_f64_lossy());
            for a in &self.coeffs {
                row.push(a[i].re.to_f64_lossy());
                row.push(a[i].im.to_f64_lossy());
            }
            row
        })
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "omega": self.omega.as_slice().iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
            "kind": self.kind,
            "order": self.order,
            "n": self.lattice.dim(),
            "h": self.lattice.h().to_f64_lossy(),
            "half_points": self.lattice.half_points(),
            "ray_step": self.step.to_f64_lossy(),
        })
    }
}

/// `L a = −Δ_h a + 2W·∇_h a + V a` on interior nodes (two-node margin),
/// 0 elsewhere.
fn apply_operator<T: Real>(spec: &FieldSpec<T>, lattice: &Lattice<T>, a: &[Cplx<T>]) -> Vec<Cplx<T>> {
    let n = lattice.dim();
    let p = lattice.points_per_axis();
    let h = lattice.h();
    let strides = lattice.strides();
    let inv_h2 = T::one() / (h * h);
    let inv_2h = T::one() / (h + h);
    let r = spec.support_radius();
    (0..lattice.len())
        .into_par_iter()
        .map(|i| {
            let idx = lattice.unravel(i);
            if idx.iter().any(|&k| k < 2 || k + 2 >= p) {
                return czero();
            }
            let mut lap = czero();
            let mut grad = vec![czero(); n];
            for d in 0..n {
                let (up, dn) = (a[i + strides[d]], a[i - strides[d]]);
                lap += (up + dn - a[i] * c::<T>(2.0)) * inv_h2;
                grad[d] = (up - dn) * inv_2h;
            }
            let x = lattice.point(i);
            let mut out = -lap;
            if crate::num::norm(&x) < r {
                let wv = spec.vector_at(&x);
                let wg = wv.iter().zip(&grad).fold(czero(), |s, (&u, &g)| s + u * g);
                out += wg * c::<T>(2.0) + spec.scalar_at(&x) * a[i];
            }
            out
        })
        .collect()
}

/// `−(1/(2(k+1))) e^ψ ∫ e^{−ψ} (L a_k)(x+sω) ds` on the lattice.
fn next_coefficient<T: Real>(
    spec: &FieldSpec<T>,
    omega: &Direction<T>,
    lattice: &Lattice<T>,
    psi: &[Cplx<T>],
    a_k: &[Cplx<T>],
    k: usize,
    step: T,
) -> Vec<Cplx<T>> {
    let la = apply_operator(spec, lattice, a_k);
    let g: Vec<Cplx<T>> = la.iter().zip(psi).map(|(&l, &p)| l * (-p).exp()).collect();
    let w = omega.as_slice();
    let r = spec.support_radius() + lattice.h() * c(2.0);
    let scale = -T::one() / T::of_usize(2 * (k + 1));
    (0..lattice.len())
        .into_par_iter()
        .map(|i| {
            let x = lattice.point(i);
            let Some(s_lo) = ray_entry(&x, w, r) else {
                return czero();
            };
            let integral = composite_simpson_c(
                |s| {
                    let q: Vec<T> = x.iter().zip(w).map(|(&a, &o)| a + s * o).collect();
                    lattice.interpolate(&g, &q).unwrap_or_else(czero)
                },
                s_lo,
                T::zero(),
                step,
            );
            psi[i].exp() * integral * scale
        })
        .collect()
}

/// Expansion coefficients up to order `order` (at most [`MAX_ORDER`]).
pub fn expand<T: Real>(
    spec: &FieldSpec<T>,
    omega: &Direction<T>,
    lattice: &Lattice<T>,
    order: usize,
    kind: WaveKind,
) -> Result<ExpansionTable<T>> {
    if order > MAX_ORDER {
        return Err(Error::ExpansionOrder(order));
    }
    spec.require_form(Form::Drift)?;
    let step = ray_step(lattice.h(), spec.support_radius());
    let psi = compute_psi(spec, omega, lattice)?;
    let f = compute_f(spec, omega, lattice, &psi)?;
    let e_psi: Vec<Cplx<T>> = psi.iter().map(|p| p.exp()).collect();

    // δ-wave coefficients a_{-1}, a_0, ... as far as needed
    let delta_needed = match kind {
        WaveKind::Delta => order,
        WaveKind::Heaviside => order.saturating_sub(1),
    };
    let mut delta = vec![e_psi.clone(), f];
    for k in 0..delta_needed {
        let next = next_coefficient(spec, omega, lattice, &psi, &delta[k + 1], k, step);
        delta.push(next);
    }
    let coeffs = match kind {
        WaveKind::Delta => delta.into_iter().take(order + 2).collect(),
        WaveKind::Heaviside => {
            let mut out = vec![vec![czero(); lattice.len()], e_psi];
            for j in 0..order {
                let inv = T::one() / T::of_usize(j + 1);
                out.push(delta[j + 1].iter().map(|&v| v * inv).collect());
            }
            out
        }
    };
    Ok(ExpansionTable {
        omega: omega.clone(),
        kind,
        order,
        lattice: lattice.clone(),
        psi,
        coeffs,
        step,
    })
}

/// Lattice spacing `h` covering `B` with the margin needed by [`expand`].
pub fn table_lattice<T: Real>(n: usize, h: T) -> Result<Lattice<T>> {
    Lattice::covering(n, h, T::one() + h * c(4.0))
}
