//! Leapfrog solver for a mollified plane wave hitting a potential.
//!
//! The total field is `U = layer + w`. With [`Formulation::Scattered`] the
//! layer is the incident profile `δ_ε(t − z)` or `H_ε(t − z)`; with
//! [`Formulation::SmoothPart`] it is the transported front `e^ψ` times that
//! profile, so `w` carries no jump or spike and only the smooth part of the
//! wave is left to the grid. Either way `w` solves
//! `∂_t² w = Δw − 2W·∇w − Vw + S` with a forcing `S` concentrated near the
//! front, vanishes until the front meets the potential, and the run starts
//! from rest.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{FieldSpec, Form};
use crate::geometry::{BoundaryPoint, Direction, Lattice, SimGrid};
use crate::num::{c, czero, Cplx, Real};
use crate::pwe::{psi_at, ray_step, WaveKind};
use crate::quadrature::adaptive_simpson;
use crate::traces::{BoundaryTrace, PointSampler, TraceMeta};

/// Cells of the antiderivative table of the unit bump.
const TABLE_CELLS: usize = 2048;

/// `exp(1/(u² − 1))` on `(−1, 1)` and its derivative.
fn unit_bump<T: Real>(u: T) -> (T, T) {
    let d = u * u - T::one();
    if d >= T::zero() {
        return (T::zero(), T::zero());
    }
    let v = (T::one() / d).exp();
    (v, v * (-(u + u) / (d * d)))
}

/// Mollified incident profile of width `ε`: `δ_ε` is the unit bump rescaled
/// to `[−ε, ε]` with mass 1, `H_ε` its antiderivative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MollifiedIncident<T> {
    kind: WaveKind,
    epsilon: T,
    /// Mass of the unit bump on `[−1, 1]`.
    mass: T,
    /// Normalized antiderivative at the nodes `−1 + 2k/TABLE_CELLS`.
    table: Vec<T>,
}

impl<T: Real> MollifiedIncident<T> {
    pub fn new(kind: WaveKind, epsilon: T) -> Result<Self> {
        if !(epsilon > T::zero()) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                reason: format!("mollifier width must be positive, got {epsilon}"),
            });
        }
        let du = c::<T>(2.0) / T::of_usize(TABLE_CELLS);
        let tol = c::<T>(1e-16).max(T::epsilon());
        let mut table = Vec::with_capacity(TABLE_CELLS + 1);
        let mut acc = T::zero();
        table.push(acc);
        for k in 0..TABLE_CELLS {
            let a = -T::one() + du * T::of_usize(k);
            acc += adaptive_simpson(|u| unit_bump(u).0, a, a + du, tol);
            table.push(acc);
        }
        let mass = acc;
        for v in &mut table {
            *v /= mass;
        }
        table[TABLE_CELLS] = T::one();
        Ok(Self {
            kind,
            epsilon,
            mass,
            table,
        })
    }

    pub fn kind(&self) -> WaveKind {
        self.kind
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    /// Same width, other profile.
    pub fn with_kind(&self, kind: WaveKind) -> Self {
        Self { kind, ..self.clone() }
    }

    pub fn delta(&self, s: T) -> T {
        unit_bump(s / self.epsilon).0 / (self.epsilon * self.mass)
    }

    pub fn delta_prime(&self, s: T) -> T {
        unit_bump(s / self.epsilon).1 / (self.epsilon * self.epsilon * self.mass)
    }

    /// `H_ε(s)`: cubic Hermite interpolation of the antiderivative table,
    /// using the exact derivative at the nodes.
    pub fn heaviside(&self, s: T) -> T {
        let u = s / self.epsilon;
        if u <= -T::one() {
            return T::zero();
        }
        if u >= T::one() {
            return T::one();
        }
        let du = c::<T>(2.0) / T::of_usize(TABLE_CELLS);
        let f = (u + T::one()) / du;
        let k = f.floor().to_usize().unwrap_or(0).min(TABLE_CELLS - 1);
        let x = f - T::of_usize(k);
        let u0 = -T::one() + du * T::of_usize(k);
        let (y0, y1) = (self.table[k], self.table[k + 1]);
        let d0 = unit_bump(u0).0 / self.mass * du;
        let d1 = unit_bump(u0 + du).0 / self.mass * du;
        let x2 = x * x;
        let x3 = x2 * x;
        let two = c::<T>(2.0);
        let three = c::<T>(3.0);
        y0 * (two * x3 - three * x2 + T::one())
            + d0 * (x3 - two * x2 + x)
            + y1 * (three * x2 - two * x3)
            + d1 * (x3 - x2)
    }

    /// The incident profile itself: `δ_ε` or `H_ε`.
    pub fn profile(&self, s: T) -> T {
        match self.kind {
            WaveKind::Delta => self.delta(s),
            WaveKind::Heaviside => self.heaviside(s),
        }
    }

    /// Time derivative of [`Self::profile`].
    pub fn profile_dt(&self, s: T) -> T {
        match self.kind {
            WaveKind::Delta => self.delta_prime(s),
            WaveKind::Heaviside => self.delta(s),
        }
    }
}

/// What the solver subtracts from the total field before discretizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    /// `w = U − profile(t − z)`: the scattered field. The front jump of size
    /// `e^ψ − 1` travels on the grid.
    Scattered,
    /// `w = U − e^ψ profile(t − z)`: the part of `U` behind the front layer.
    /// Its source is `−e^ψ [2(ω·∇ψ − ω·W) profile' + G profile]` with
    /// `G = −Δψ − |∇ψ|² + 2W·∇ψ + V`, nonzero in the whole downstream shadow
    /// of the potential.
    SmoothPart,
}

/// Forcing `a·profile'(s) + b·profile(s)` at `s = t − x·ω`.
fn forcing<T: Real>(inc: &MollifiedIncident<T>, a: Cplx<T>, b: Cplx<T>, s: T) -> Cplx<T> {
    a * inc.profile_dt(s) + b * inc.profile(s)
}

/// `−(2W·∇ + V)` applied to the incident profile at `(x, t)`: for the
/// H-wave `2(ω·W)δ_ε(t−z) − V H_ε(t−z)`, for the δ-wave its time derivative.
pub fn incident_source<T: Real>(
    spec: &FieldSpec<T>,
    omega: &Direction<T>,
    incident: &MollifiedIncident<T>,
    x: &[T],
    t: T,
) -> Cplx<T> {
    let drift;
    let spec = if spec.form() == Form::Drift {
        spec
    } else {
        drift = spec.to_drift();
        &drift
    };
    let w = spec.vector_at(x);
    let wo = w
        .iter()
        .zip(omega.as_slice())
        .fold(czero(), |s, (&a, &o)| s + a * o);
    forcing(incident, wo * c::<T>(2.0), -spec.scalar_at(x), t - omega.dot(x))
}

/// Boundary treatment of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Zero on the faces of `[−L, L]^n`.
    Dirichlet,
    /// Wrap-around, period `(2m + 1) h` per axis; used by the dispersion harness.
    Periodic,
}

/// Lattice node carrying potential or forcing. The forcing is
/// `a·profile'(t − z) + b·profile(t − z)`.
#[derive(Debug, Clone)]
struct PotentialNode<T> {
    idx: usize,
    w: Vec<Cplx<T>>,
    v: Cplx<T>,
    a: Cplx<T>,
    b: Cplx<T>,
    z: T,
}

/// `ψ` on an index box of the lattice, for centred differences.
struct PsiBox<T> {
    ranges: Vec<(usize, usize)>,
    values: Vec<Cplx<T>>,
    h: T,
}

impl<T: Real> PsiBox<T> {
    fn sample(spec: &FieldSpec<T>, omega: &Direction<T>, lat: &Lattice<T>, ranges: Vec<(usize, usize)>) -> Self {
        let n = ranges.len();
        let count: usize = ranges.iter().map(|(lo, hi)| hi + 1 - lo).product();
        let step = ray_step(lat.h(), spec.support_radius());
        let values = (0..count)
            .into_par_iter()
            .map(|mut k| {
                let mut x = vec![T::zero(); n];
                for d in (0..n).rev() {
                    let span = ranges[d].1 + 1 - ranges[d].0;
                    x[d] = lat.coord(ranges[d].0 + k % span);
                    k /= span;
                }
                psi_at(spec, omega, &x, step)
            })
            .collect();
        Self {
            ranges,
            values,
            h: lat.h(),
        }
    }

    fn at(&self, multi: &[usize]) -> Cplx<T> {
        let k = multi.iter().zip(&self.ranges).fold(0, |acc, (&i, &(lo, hi))| {
            acc * (hi + 1 - lo) + (i - lo)
        });
        self.values[k]
    }

    /// Centred-difference gradient and Laplacian at an interior index.
    fn jet(&self, multi: &[usize]) -> (Vec<Cplx<T>>, Cplx<T>) {
        let centre = self.at(multi);
        let mut grad = Vec::with_capacity(multi.len());
        let mut lap = czero();
        let mut m = multi.to_vec();
        for d in 0..multi.len() {
            m[d] = multi[d] + 1;
            let up = self.at(&m);
            m[d] = multi[d] - 1;
            let down = self.at(&m);
            m[d] = multi[d];
            grad.push((up - down) / (self.h * c(2.0)));
            lap += (up + down - centre * c::<T>(2.0)) / (self.h * self.h);
        }
        (grad, lap)
    }
}

#[derive(Debug, Clone, Default)]
struct Potential<T> {
    nodes: Vec<PotentialNode<T>>,
    /// Index bounding box of `nodes`, per axis.
    bbox: Option<Vec<(usize, usize)>>,
}

fn sample_potential<T: Real>(
    spec: &FieldSpec<T>,
    omega: &Direction<T>,
    lat: &Lattice<T>,
    formulation: Formulation,
) -> Potential<T> {
    let n = lat.dim();
    let r = spec.support_radius();
    if spec.is_zero() || r <= T::zero() {
        return Potential {
            nodes: vec![],
            bbox: None,
        };
    }
    let p = lat.points_per_axis();
    let lo_of = |x: T| lat.fractional_index(x).floor().to_usize().unwrap_or(0).max(1);
    let hi_of = |x: T| lat.fractional_index(x).ceil().to_usize().unwrap_or(p - 2).min(p - 2);
    // the smooth-part source fills the shadow cylinder `|x − (x·ω)ω| < r`, `x·ω > −r`
    let ranges: Vec<(usize, usize)> = match formulation {
        Formulation::Scattered => vec![(lo_of(-r), hi_of(r)); n],
        Formulation::SmoothPart => omega
            .as_slice()
            .iter()
            .map(|&o| {
                let far = lat.extent();
                let a = -r * o.abs();
                let b = far * o.abs();
                let (lo, hi) = if o >= T::zero() { (a, b) } else { (-b, -a) };
                (lo_of(lo - r), hi_of(hi + r))
            })
            .collect(),
    };
    let count: usize = ranges.iter().map(|(lo, hi)| hi + 1 - lo).product();
    let candidates: Vec<usize> = (0..count)
        .map(|mut k| {
            let mut multi = vec![0; n];
            for d in (0..n).rev() {
                let span = ranges[d].1 + 1 - ranges[d].0;
                multi[d] = ranges[d].0 + k % span;
                k /= span;
            }
            lat.ravel(&multi)
        })
        .collect();
    let psi_box = (formulation == Formulation::SmoothPart).then(|| {
        let grown: Vec<(usize, usize)> = ranges.iter().map(|&(lo, hi)| (lo - 1, hi + 1)).collect();
        PsiBox::sample(spec, omega, lat, grown)
    });
    let nodes: Vec<PotentialNode<T>> = candidates
        .into_par_iter()
        .filter_map(|idx| {
            let x = lat.point(idx);
            let z = omega.dot(&x);
            let inside = crate::num::norm(&x) < r;
            let w = if inside { spec.vector_at(&x) } else { vec![czero(); n] };
            let v = if inside { spec.scalar_at(&x) } else { czero() };
            let w_omega = w
                .iter()
                .zip(omega.as_slice())
                .fold(czero(), |s, (&a, &o)| s + a * o);
            let (a, b) = match formulation {
                Formulation::Scattered => {
                    if !inside || (v == czero() && w.iter().all(|a| *a == czero())) {
                        return None;
                    }
                    (w_omega * c::<T>(2.0), -v)
                }
                Formulation::SmoothPart => {
                    let perp = x.iter().zip(omega.as_slice()).fold(T::zero(), |s, (&xi, &o)| {
                        let d = xi - z * o;
                        s + d * d
                    });
                    if z <= -r || perp >= r * r {
                        return None;
                    }
                    let psi = psi_box.as_ref().expect("sampled for the smooth part");
                    let (grad, lap) = psi.jet(&lat.unravel(idx));
                    let dot = |u: &[Cplx<T>]| u.iter().zip(&grad).fold(czero::<T>(), |s, (&a, &g)| s + a * g);
                    let omega_grad = grad
                        .iter()
                        .zip(omega.as_slice())
                        .fold(czero::<T>(), |s, (&g, &o)| s + g * o);
                    let g = -lap - dot(&grad) + dot(&w) * c::<T>(2.0) + v;
                    let e = psi.at(&lat.unravel(idx)).exp();
                    let a = -e * (omega_grad - w_omega) * c::<T>(2.0);
                    let b = -e * g;
                    if a == czero() && b == czero() && !inside {
                        return None;
                    }
                    (a, b)
                }
            };
            Some(PotentialNode { idx, w, v, a, b, z })
        })
        .collect();
    let mut bbox: Option<Vec<(usize, usize)>> = None;
    for node in &nodes {
        let m = lat.unravel(node.idx);
        let b = bbox.get_or_insert_with(|| m.iter().map(|&i| (i, i)).collect());
        for d in 0..n {
            b[d].0 = b[d].0.min(m[d]);
            b[d].1 = b[d].1.max(m[d]);
        }
    }
    Potential { nodes, bbox }
}

/// Scattered field at two consecutive time levels plus everything needed to
/// advance it.
#[derive(Debug, Clone)]
pub struct WaveState<T> {
    grid: SimGrid<T>,
    spec: FieldSpec<T>,
    omega: Direction<T>,
    incident: Option<MollifiedIncident<T>>,
    formulation: Formulation,
    boundary: Boundary,
    u_prev: Vec<Cplx<T>>,
    u_curr: Vec<Cplx<T>>,
    t0: T,
    step: usize,
    potential: Arc<Potential<T>>,
    /// Index box outside which both levels vanish; `None` while all zero.
    active: Option<Vec<(usize, usize)>>,
}

impl<T: Real> WaveState<T> {
    /// Quiescent state at `grid.t0()`. Magnetic specs are converted to
    /// drift form.
    pub fn new(
        spec: &FieldSpec<T>,
        omega: &Direction<T>,
        incident: &MollifiedIncident<T>,
        formulation: Formulation,
        grid: &SimGrid<T>,
    ) -> Result<Self> {
        let n = grid.dim();
        for got in [spec.dim(), omega.dim()] {
            if got != n {
                return Err(Error::DimensionMismatch { expected: n, got });
            }
        }
        let spec = spec.to_drift();
        let potential = sample_potential(&spec, omega, grid.lattice(), formulation);
        Ok(Self {
            grid: grid.clone(),
            spec,
            omega: omega.clone(),
            incident: Some(incident.clone()),
            formulation,
            boundary: Boundary::Dirichlet,
            u_prev: vec![czero(); grid.len()],
            u_curr: vec![czero(); grid.len()],
            t0: grid.t0(),
            step: 0,
            potential: Arc::new(potential),
            active: None,
        })
    }

    /// Free-space state from two given time levels at `t − dt` and `t`.
    pub fn free(
        grid: &SimGrid<T>,
        boundary: Boundary,
        u_prev: Vec<Cplx<T>>,
        u_curr: Vec<Cplx<T>>,
        t: T,
    ) -> Result<Self> {
        let n = grid.dim();
        for len in [u_prev.len(), u_curr.len()] {
            if len != grid.len() {
                return Err(Error::SamplingMismatch(format!(
                    "initial level has {len} values, grid has {}",
                    grid.len()
                )));
            }
        }
        let p = grid.points_per_axis();
        Ok(Self {
            grid: grid.clone(),
            spec: FieldSpec::zero(n, Form::Drift)?,
            omega: Direction::axis(n, 0, true)?,
            incident: None,
            formulation: Formulation::Scattered,
            boundary,
            u_prev,
            u_curr,
            t0: t,
            step: 0,
            potential: Arc::new(Potential::default()),
            active: Some(vec![(1, p.saturating_sub(2)); n]),
        })
    }

    pub fn grid(&self) -> &SimGrid<T> {
        &self.grid
    }
    pub fn spec(&self) -> &FieldSpec<T> {
        &self.spec
    }
    pub fn omega(&self) -> &Direction<T> {
        &self.omega
    }
    pub fn incident(&self) -> Option<&MollifiedIncident<T>> {
        self.incident.as_ref()
    }
    pub fn formulation(&self) -> Formulation {
        self.formulation
    }
    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
    /// Steps taken since construction.
    pub fn step_index(&self) -> usize {
        self.step
    }
    /// Time of the current level.
    pub fn time(&self) -> T {
        self.t0 + self.grid.dt() * T::of_usize(self.step)
    }
    pub fn current(&self) -> &[Cplx<T>] {
        &self.u_curr
    }
    pub fn previous(&self) -> &[Cplx<T>] {
        &self.u_prev
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<()> {
        let ok = match self.boundary {
            Boundary::Dirichlet => self.step_dirichlet(),
            Boundary::Periodic => self.step_periodic(),
        };
        self.step += 1;
        std::mem::swap(&mut self.u_prev, &mut self.u_curr);
        if ok {
            Ok(())
        } else {
            Err(Error::Instability { step: self.step })
        }
    }

    /// Steps until the current time reaches `t` (within half a step).
    pub fn advance_to(&mut self, t: T) -> Result<()> {
        let half = self.grid.dt() / c(2.0);
        while self.time() < t - half {
            self.step()?;
        }
        Ok(())
    }

    /// Region updated this step: the active box grown by one node, joined
    /// with the potential's box, clipped to the interior.
    fn update_box(&self) -> Option<Vec<(usize, usize)>> {
        let p = self.grid.points_per_axis();
        let grown = self.active.as_ref().map(|b| {
            b.iter()
                .map(|&(lo, hi)| (lo.saturating_sub(1).max(1), (hi + 1).min(p - 2)))
                .collect::<Vec<_>>()
        });
        match (grown, self.potential.bbox.clone()) {
            (None, None) => None,
            (Some(a), None) | (None, Some(a)) => Some(a),
            (Some(a), Some(b)) => Some(
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| (x.0.min(y.0), x.1.max(y.1)))
                    .collect(),
            ),
        }
    }

    /// Writes the next level into `u_prev`; returns false on a non-finite value.
    fn step_dirichlet(&mut self) -> bool {
        let Some(bx) = self.update_box() else {
            return true;
        };
        let lat = self.grid.lattice();
        let n = lat.dim();
        let strides = lat.strides();
        let h = lat.h();
        let dt = self.grid.dt();
        let r = dt * dt / (h * h);
        let two = c::<T>(2.0);
        let two_n = T::of_usize(2 * n);
        let curr = &self.u_curr;
        let s0 = strides[0];
        let ok = self
            .u_prev
            .par_chunks_mut(s0)
            .enumerate()
            .filter(|(i0, _)| *i0 >= bx[0].0 && *i0 <= bx[0].1)
            .map(|(i0, slab)| {
                let base = i0 * s0;
                let mut ok = true;
                let mut visit = |local: usize| {
                    let i = base + local;
                    let u = curr[i];
                    let mut acc = -u * two_n;
                    for &s in &strides {
                        acc += curr[i + s] + curr[i - s];
                    }
                    let v = u * two - slab[local] + acc * r;
                    ok &= v.re.is_finite() && v.im.is_finite();
                    slab[local] = v;
                };
                match n {
                    1 => visit(0),
                    2 => (bx[1].0..=bx[1].1).for_each(&mut visit),
                    _ => {
                        for j in bx[1].0..=bx[1].1 {
                            for k in bx[2].0..=bx[2].1 {
                                visit(j * strides[1] + k);
                            }
                        }
                    }
                }
                ok
            })
            .reduce(|| true, |a, b| a && b);
        self.apply_potential(|i, d, sign| {
            if sign {
                i + strides[d]
            } else {
                i - strides[d]
            }
        });
        self.active = Some(bx);
        ok && self.potential_finite()
    }

    fn step_periodic(&mut self) -> bool {
        let lat = self.grid.lattice().clone();
        let n = lat.dim();
        let p = lat.points_per_axis();
        let strides = lat.strides();
        let h = lat.h();
        let dt = self.grid.dt();
        let r = dt * dt / (h * h);
        let two = c::<T>(2.0);
        let two_n = T::of_usize(2 * n);
        let neighbor = move |i: usize, d: usize, up: bool| -> usize {
            let k = (i / strides[d]) % p;
            let base = i - k * strides[d];
            let k2 = if up { (k + 1) % p } else { (k + p - 1) % p };
            base + k2 * strides[d]
        };
        let curr = &self.u_curr;
        let ok = self
            .u_prev
            .par_iter_mut()
            .enumerate()
            .map(|(i, prev)| {
                let u = curr[i];
                let mut acc = -u * two_n;
                for d in 0..n {
                    acc += curr[neighbor(i, d, true)] + curr[neighbor(i, d, false)];
                }
                let v = u * two - *prev + acc * r;
                *prev = v;
                v.re.is_finite() && v.im.is_finite()
            })
            .reduce(|| true, |a, b| a && b);
        self.apply_potential(neighbor);
        ok && self.potential_finite()
    }

    /// Adds `dt²(−2W·∇u − Vu + S)` at the potential nodes.
    fn apply_potential(&mut self, neighbor: impl Fn(usize, usize, bool) -> usize) {
        if self.potential.nodes.is_empty() {
            return;
        }
        let dt = self.grid.dt();
        let dt2 = dt * dt;
        let inv_2h = T::one() / (self.grid.h() * c(2.0));
        let t = self.time();
        let two = c::<T>(2.0);
        let curr = &self.u_curr;
        for node in &self.potential.nodes {
            let i = node.idx;
            let mut wg = czero();
            for (d, &wd) in node.w.iter().enumerate() {
                let g = (curr[neighbor(i, d, true)] - curr[neighbor(i, d, false)]) * inv_2h;
                wg += wd * g;
            }
            let mut rhs = -(wg * two) - node.v * curr[i];
            if let Some(inc) = &self.incident {
                rhs += forcing(inc, node.a, node.b, t - node.z);
            }
            self.u_prev[i] += rhs * dt2;
        }
    }

    fn potential_finite(&self) -> bool {
        self.potential.nodes.iter().all(|node| {
            let v = self.u_prev[node.idx];
            v.re.is_finite() && v.im.is_finite()
        })
    }

    /// Staggered discrete energy
    /// `h^n [Σ |u^k − u^{k−1}|²/dt² + Re Σ_d Σ D⁺_d u^k · conj(D⁺_d u^{k−1})]`,
    /// which the free-space leapfrog conserves exactly.
    pub fn energy(&self) -> T {
        let lat = self.grid.lattice();
        let n = lat.dim();
        let p = lat.points_per_axis();
        let strides = lat.strides();
        let h = lat.h();
        let dt = self.grid.dt();
        let periodic = self.boundary == Boundary::Periodic;
        let (prev, curr) = (&self.u_prev, &self.u_curr);
        let terms: Vec<T> = (0..lat.len())
            .into_par_iter()
            .map(|i| {
                let mut e = (curr[i] - prev[i]).norm_sqr() / (dt * dt);
                for d in 0..n {
                    let k = (i / strides[d]) % p;
                    let j = if k + 1 < p {
                        i + strides[d]
                    } else if periodic {
                        i - k * strides[d]
                    } else {
                        continue;
                    };
                    let a = (curr[j] - curr[i]) / h;
                    let b = (prev[j] - prev[i]) / h;
                    e += (a * b.conj()).re;
                }
                e
            })
            .collect();
        crate::num::pairwise_sum(&terms) * h.powi(n as i32)
    }

    /// Immutable copy of the current level.
    pub fn snapshot(&self) -> Snapshot<T> {
        Snapshot {
            dims: vec![self.grid.points_per_axis(); self.grid.dim()],
            h: self.grid.h(),
            t: self.time(),
            data: self.u_curr.clone(),
        }
    }
}

/// Field values on the full lattice at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub dims: Vec<usize>,
    pub h: T,
    pub t: T,
    pub data: Vec<Cplx<T>>,
}

impl<T: Real> Snapshot<T> {
    /// One text header line, then little-endian `f64` pairs `(re, im)` in
    /// row-major order.
    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let dims: Vec<String> = self.dims.iter().map(|d| d.to_string()).collect();
        writeln!(
            out,
            "snapshot dims={} h={:e} t={:e} format=f64le-re-im",
            dims.join("x"),
            self.h.to_f64_lossy(),
            self.t.to_f64_lossy()
        )?;
        let mut buf = Vec::with_capacity(self.data.len() * 16);
        for v in &self.data {
            buf.extend_from_slice(&v.re.to_f64_lossy().to_le_bytes());
            buf.extend_from_slice(&v.im.to_f64_lossy().to_le_bytes());
        }
        out.write_all(&buf)
    }
}

/// Points at which the scattered field is recorded at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRequest<T> {
    pub points: Vec<BoundaryPoint<T>>,
}

impl<T: Real> TraceRequest<T> {
    pub fn new(points: Vec<BoundaryPoint<T>>) -> Self {
        Self { points }
    }
}

/// Runs from rest at `grid.t0()` to `grid.t1()`, recording the solver field
/// at the requested points after every step.
pub fn run<T: Real>(
    spec: &FieldSpec<T>,
    omega: &Direction<T>,
    incident: &MollifiedIncident<T>,
    formulation: Formulation,
    grid: &SimGrid<T>,
    record: &TraceRequest<T>,
) -> Result<(WaveState<T>, BoundaryTrace<T>)> {
    let mut state = WaveState::new(spec, omega, incident, formulation, grid)?;
    let taps = record
        .points
        .iter()
        .map(|bp| PointSampler::new(grid.lattice(), &bp.x))
        .collect::<Result<Vec<_>>>()?;
    let steps = grid.steps();
    let n_times = steps + 1;
    let mut values = vec![czero(); record.points.len() * n_times];
    let mut sample = |state: &WaveState<T>, k: usize| {
        let cur = state.current();
        for (p, tp) in taps.iter().enumerate() {
            values[p * n_times + k] = tp.eval(cur);
        }
    };
    sample(&state, 0);
    for k in 1..n_times {
        state.step()?;
        sample(&state, k);
    }
    let meta = TraceMeta {
        kind: incident.kind(),
        formulation,
        epsilon: incident.epsilon(),
        h: grid.h(),
        spec_hash: crate::io::spec_hash(spec),
    };
    let layer = match formulation {
        Formulation::Scattered => vec![Cplx::new(T::one(), T::zero()); record.points.len()],
        Formulation::SmoothPart => {
            let drift = state.spec();
            let step = ray_step(grid.h(), drift.support_radius());
            record
                .points
                .iter()
                .map(|bp| psi_at(drift, omega, &bp.x, step).exp())
                .collect()
        }
    };
    let trace = BoundaryTrace::new(
        record.points.clone(),
        grid.t0(),
        grid.dt(),
        n_times,
        values,
        omega.clone(),
        meta,
    )?
    .with_layer(layer)?;
    Ok((state, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{real_bump, ScalarTerm, VectorTerm};

    #[test]
    fn mollifier_mass_and_edges() {
        let m = MollifiedIncident::<f64>::new(WaveKind::Heaviside, 0.1).unwrap();
        assert_eq!(m.heaviside(-0.1), 0.0);
        assert_eq!(m.heaviside(0.1), 1.0);
        assert!((m.heaviside(0.0) - 0.5).abs() < 1e-13);
        assert_eq!(m.delta(0.1), 0.0);
        assert_eq!(m.delta(-0.2), 0.0);
    }

    #[test]
    fn heaviside_derivative_is_delta() {
        let m = MollifiedIncident::<f64>::new(WaveKind::Heaviside, 0.2).unwrap();
        let d = 1e-5;
        for k in 0..40 {
            let s = -0.19 + 0.0095 * k as f64;
            let fd = (m.heaviside(s + d) - m.heaviside(s - d)) / (2.0 * d);
            assert!((fd - m.delta(s)).abs() < 1e-7, "{s}: {fd} vs {}", m.delta(s));
            let fd2 = (m.delta(s + d) - m.delta(s - d)) / (2.0 * d);
            assert!((fd2 - m.delta_prime(s)).abs() < 1e-4 * (1.0 + m.delta_prime(s).abs()));
        }
    }

    #[test]
    fn zero_state_stays_zero() {
        let grid = SimGrid::for_window(2, 0.125, 0.5, 0.5).unwrap();
        let z = FieldSpec::zero(2, Form::Drift).unwrap();
        let inc = MollifiedIncident::new(WaveKind::Heaviside, 0.5).unwrap();
        let e1 = Direction::axis(2, 0, true).unwrap();
        let mut s = WaveState::new(&z, &e1, &inc, Formulation::Scattered, &grid).unwrap();
        for _ in 0..20 {
            s.step().unwrap();
        }
        assert!(s.current().iter().all(|v| *v == czero()));
        assert_eq!(s.energy(), 0.0);
    }

    #[test]
    fn source_examples() {
        let e1 = Direction::axis(2, 0, true).unwrap();
        let inc = MollifiedIncident::new(WaveKind::Heaviside, 0.1).unwrap();
        let b = real_bump(vec![0.0, 0.0], 0.5, 0.8).unwrap();
        let spec = FieldSpec::from_terms(
            2,
            Form::Drift,
            vec![VectorTerm::Directional {
                bump: b.clone(),
                direction: vec![1.0, 0.0],
            }],
            vec![],
        )
        .unwrap();
        let x = [0.1, 0.2];
        let s = incident_source(&spec, &e1, &inc, &x, 0.1);
        let want = b.value(&x) * (2.0 * inc.delta(0.0));
        assert!((s - want).norm() < 1e-14);
        let z = FieldSpec::zero(2, Form::Magnetic).unwrap();
        assert_eq!(incident_source(&z, &e1, &inc, &x, 0.1), czero());
    }

    #[test]
    fn potential_nodes_cover_support() {
        let grid = SimGrid::for_window(2, 0.0625, 0.5, 0.25).unwrap();
        let spec = FieldSpec::from_terms(
            2,
            Form::Drift,
            vec![],
            vec![ScalarTerm::Bump {
                bump: real_bump(vec![0.0, 0.0], 0.5, 1.0).unwrap(),
            }],
        )
        .unwrap();
        let e1 = Direction::axis(2, 0, true).unwrap();
        let pot = sample_potential(&spec, &e1, grid.lattice(), Formulation::Scattered);
        let count = grid
            .lattice()
            .len();
        let inside = (0..count)
            .filter(|&i| spec.scalar_at(&grid.point(i)).norm() > 0.0)
            .count();
        assert_eq!(pot.nodes.len(), inside);
    }
}
