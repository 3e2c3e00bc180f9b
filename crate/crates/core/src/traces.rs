//! Boundary traces of the scattered field, the limits and identities they
//! satisfy on the characteristic surface, and normalized discrepancies.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{cubic_weights, BoundaryPoint, Direction, Lattice};
use crate::num::{c, czero, pairwise_sum, Cplx, Real};
use crate::pwe::WaveKind;
use crate::quadrature::cumulative_trapezoid;
use crate::wavesolver::{Formulation, MollifiedIncident};

/// Denominator floor of normalized discrepancies.
pub const DISCREPANCY_FLOOR: f64 = 1e-14;

/// Width, in grid spacings, of the numerical tail ahead of the front.
pub const FRONT_MARGIN_CELLS: f64 = 8.0;

/// Run parameters carried along with a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TraceMeta<T> {
    pub kind: WaveKind,
    pub formulation: Formulation,
    pub epsilon: T,
    pub h: T,
    pub spec_hash: String,
}

/// Solver-field samples at fixed points and uniform times. The total field
/// is `values + layer · profile(t − x·ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTrace<T> {
    pub points: Vec<BoundaryPoint<T>>,
    pub t0: T,
    pub dt: T,
    pub n_times: usize,
    /// Point-major: sample `(p, k)` sits at `p * n_times + k`.
    pub values: Vec<Cplx<T>>,
    pub omega: Direction<T>,
    /// `t ≥ x·ω` per sample, same layout as `values`.
    pub mask: Vec<bool>,
    /// Amplitude of the front layer subtracted by the solver, per point:
    /// 1 for the scattered formulation, `e^ψ` for the smooth part.
    pub layer: Vec<Cplx<T>>,
    pub meta: TraceMeta<T>,
}

impl<T: Real> BoundaryTrace<T> {
    pub fn new(
        points: Vec<BoundaryPoint<T>>,
        t0: T,
        dt: T,
        n_times: usize,
        values: Vec<Cplx<T>>,
        omega: Direction<T>,
        meta: TraceMeta<T>,
    ) -> Result<Self> {
        if values.len() != points.len() * n_times {
            return Err(Error::SamplingMismatch(format!(
                "{} values for {} points x {n_times} times",
                values.len(),
                points.len()
            )));
        }
        let n_points = points.len();
        let mut mask = Vec::with_capacity(values.len());
        for bp in &points {
            let z = omega.dot(&bp.x);
            for k in 0..n_times {
                mask.push(t0 + dt * T::of_usize(k) >= z);
            }
        }
        Ok(Self {
            points,
            t0,
            dt,
            n_times,
            values,
            omega,
            mask,
            layer: vec![Cplx::new(T::one(), T::zero()); n_points],
            meta,
        })
    }

    /// Replaces the per-point layer amplitudes.
    pub fn with_layer(mut self, layer: Vec<Cplx<T>>) -> Result<Self> {
        if layer.len() != self.points.len() {
            return Err(Error::SamplingMismatch(format!(
                "{} layer amplitudes for {} points",
                layer.len(),
                self.points.len()
            )));
        }
        self.layer = layer;
        Ok(self)
    }

    /// Total field at sample `(p, k)` given the incident profile.
    pub fn total(&self, inc: &MollifiedIncident<T>, p: usize, k: usize) -> Cplx<T> {
        self.values[p * self.n_times + k] + self.layer[p] * inc.profile(self.time(k) - self.front(p))
    }

    /// The same samples as scattered field `total − profile`, layer 1.
    pub fn to_scattered(&self) -> Result<Self> {
        let inc = MollifiedIncident::new(self.meta.kind, self.meta.epsilon)?;
        let mut out = self.clone();
        for p in 0..self.points.len() {
            let extra = self.layer[p] - Cplx::new(T::one(), T::zero());
            if extra == czero() {
                continue;
            }
            let z = self.front(p);
            for k in 0..self.n_times {
                out.values[p * self.n_times + k] += extra * inc.profile(self.time(k) - z);
            }
            out.layer[p] = Cplx::new(T::one(), T::zero());
        }
        Ok(out)
    }

    pub fn time(&self, k: usize) -> T {
        self.t0 + self.dt * T::of_usize(k)
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.n_times).map(|k| self.time(k)).collect()
    }

    pub fn series(&self, p: usize) -> &[Cplx<T>] {
        &self.values[p * self.n_times..(p + 1) * self.n_times]
    }

    /// `x·ω` of point `p`.
    pub fn front(&self, p: usize) -> T {
        self.omega.dot(&self.points[p].x)
    }

    pub fn norm_inf(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.norm()))
    }

    /// Largest `|value|` strictly ahead of the mollified front widened by
    /// `margin` (`t < x·ω − ε − margin`), relative to [`Self::norm_inf`].
    ///
    /// The explicit scheme lets a tail run ahead of the front by a few cells,
    /// decaying about tenfold per cell; [`FRONT_MARGIN_CELLS`] spacings
    /// cover it to below `1e−8`.
    pub fn pre_front_ratio(&self, margin: T) -> T {
        let eps = self.meta.epsilon + margin;
        let mut worst = T::zero();
        for p in 0..self.points.len() {
            let z = self.front(p);
            for (k, v) in self.series(p).iter().enumerate() {
                if self.time(k) < z - eps {
                    worst = worst.max(v.norm());
                }
            }
        }
        worst / self.norm_inf().max(c(DISCREPANCY_FLOOR))
    }

    fn same_sampling(&self, other: &Self) -> Result<()> {
        if self.points.len() != other.points.len()
            || self.n_times != other.n_times
            || self.t0 != other.t0
            || self.dt != other.dt
        {
            return Err(Error::SamplingMismatch(format!(
                "{} points x {} times from {} step {} vs {} points x {} times from {} step {}",
                self.points.len(),
                self.n_times,
                self.t0,
                self.dt,
                other.points.len(),
                other.n_times,
                other.t0,
                other.dt
            )));
        }
        if self.points.iter().zip(&other.points).any(|(a, b)| a.x != b.x) {
            return Err(Error::SamplingMismatch("point sets differ".into()));
        }
        Ok(())
    }

    /// Columns `point_index, angle..., t, re, im, mask`, 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let n_angles = self.points.first().map_or(0, |p| p.angles.len());
        let mut header = vec!["point_index".to_string()];
        header.extend((0..n_angles).map(|a| format!("angle{a}")));
        header.extend(["t", "re", "im", "mask"].map(String::from));
        writeln!(out, "{}", header.join(","))?;
        for (p, bp) in self.points.iter().enumerate() {
            let angles: Vec<String> = bp
                .angles
                .iter()
                .map(|a| crate::io::fmt17(a.to_f64_lossy()))
                .collect();
            for k in 0..self.n_times {
                let v = self.values[p * self.n_times + k];
                let mut row = vec![p.to_string()];
                row.extend(angles.iter().cloned());
                row.push(crate::io::fmt17(self.time(k).to_f64_lossy()));
                row.push(crate::io::fmt17(v.re.to_f64_lossy()));
                row.push(crate::io::fmt17(v.im.to_f64_lossy()));
                row.push(u8::from(self.mask[p * self.n_times + k]).to_string());
                writeln!(out, "{}", row.join(","))?;
            }
        }
        Ok(())
    }

    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({
            "omega": self.omega.as_slice().iter().map(|v| v.to_f64_lossy()).collect::<Vec<_>>(),
            "epsilon": self.meta.epsilon.to_f64_lossy(),
            "h": self.meta.h.to_f64_lossy(),
            "spec_hash": self.meta.spec_hash,
            "kind": self.meta.kind,
            "formulation": self.meta.formulation,
            "layer": self.layer.iter().map(|v| [v.re.to_f64_lossy(), v.im.to_f64_lossy()]).collect::<Vec<_>>(),
            "t0": self.t0.to_f64_lossy(),
            "dt": self.dt.to_f64_lossy(),
            "n_times": self.n_times,
            "n_points": self.points.len(),
        })
    }
}

/// Taps and weights of tensor cubic interpolation at one fixed point, so a
/// field can be sampled there at many times without recomputing weights.
#[derive(Debug, Clone)]
pub struct PointSampler<T> {
    idx: Vec<usize>,
    weight: Vec<T>,
}

impl<T: Real> PointSampler<T> {
    /// Needs two lattice nodes of margin around `x` on every axis.
    pub fn new(lat: &Lattice<T>, x: &[T]) -> Result<Self> {
        let n = lat.dim();
        let p = lat.points_per_axis();
        let mut base = vec![0usize; n];
        let mut w = vec![[T::zero(); 4]; n];
        for d in 0..n {
            let f = lat.fractional_index(x[d]);
            let i0 = f.floor();
            let i = i0.to_isize().unwrap_or(-1);
            if i < 1 || i + 2 >= p as isize {
                let r = crate::num::norm(x);
                return Err(Error::BoundaryOutsideGrid {
                    radius: r.to_f64_lossy(),
                    required: (r + lat.h() * c(2.0)).to_f64_lossy(),
                });
            }
            base[d] = (i - 1) as usize;
            w[d] = cubic_weights(f - i0);
        }
        let strides = lat.strides();
        let combos = 4usize.pow(n as u32);
        let mut idx = Vec::with_capacity(combos);
        let mut weight = Vec::with_capacity(combos);
        for k in 0..combos {
            let mut rem = k;
            let mut id = 0;
            let mut wt = T::one();
            for d in (0..n).rev() {
                let o = rem % 4;
                rem /= 4;
                id += (base[d] + o) * strides[d];
                wt *= w[d][o];
            }
            idx.push(id);
            weight.push(wt);
        }
        Ok(Self { idx, weight })
    }

    pub fn eval(&self, values: &[Cplx<T>]) -> Cplx<T> {
        self.idx
            .iter()
            .zip(&self.weight)
            .fold(czero(), |s, (&i, &w)| s + values[i] * w)
    }
}

/// Interpolates a sequence of lattice fields, taken at uniform times from
/// `t0` in steps of `dt`, to the given points.
pub fn extract<T: Real>(
    lattice: &Lattice<T>,
    levels: &[Vec<Cplx<T>>],
    t0: T,
    dt: T,
    points: &[BoundaryPoint<T>],
    omega: &Direction<T>,
    meta: TraceMeta<T>,
) -> Result<BoundaryTrace<T>> {
    let samplers = points
        .iter()
        .map(|bp| PointSampler::new(lattice, &bp.x))
        .collect::<Result<Vec<_>>>()?;
    if let Some(bad) = levels.iter().find(|l| l.len() != lattice.len()) {
        return Err(Error::SamplingMismatch(format!(
            "level has {} values, lattice has {}",
            bad.len(),
            lattice.len()
        )));
    }
    let n_times = levels.len();
    let mut values = Vec::with_capacity(points.len() * n_times);
    for s in &samplers {
        values.extend(levels.iter().map(|l| s.eval(l)));
    }
    BoundaryTrace::new(points.to_vec(), t0, dt, n_times, values, omega.clone(), meta)
}

/// On-front value of the total field's smooth part at every point: a
/// least-squares line through the samples in `[z + 3ε, z + 4ε]`,
/// evaluated at `t = z`.
///
/// For an H-wave this estimates `e^ψ`, for a δ-wave the Goursat value `F`.
pub fn gamma_limit<T: Real>(trace: &BoundaryTrace<T>) -> Result<Vec<Cplx<T>>> {
    let eps = trace.meta.epsilon;
    let inc = MollifiedIncident::new(trace.meta.kind, eps)?;
    let t_last = trace.time(trace.n_times.saturating_sub(1));
    (0..trace.points.len())
        .map(|p| {
            let z = trace.front(p);
            let (lo, hi) = (z + eps * c(3.0), z + eps * c(4.0));
            if lo < trace.t0 || hi > t_last {
                return Err(Error::WindowOutsideRecord {
                    lo: lo.to_f64_lossy(),
                    hi: hi.to_f64_lossy(),
                    t0: trace.t0.to_f64_lossy(),
                    t1: t_last.to_f64_lossy(),
                });
            }
            let mut pts = Vec::new();
            for k in 0..trace.n_times {
                let t = trace.time(k);
                if t >= lo && t <= hi {
                    pts.push((t - z, trace.total(&inc, p, k)));
                }
            }
            if pts.len() < 2 {
                return Err(Error::SamplingMismatch(format!(
                    "window [{lo}, {hi}] holds {} samples; need 2",
                    pts.len()
                )));
            }
            Ok(line_intercept(&pts))
        })
        .collect()
}

/// Intercept at 0 of the least-squares line through `(s, v)` pairs.
fn line_intercept<T: Real>(pts: &[(T, Cplx<T>)]) -> Cplx<T> {
    let m = T::of_usize(pts.len());
    let ms = pts.iter().fold(T::zero(), |a, p| a + p.0) / m;
    let mv = pts.iter().fold(czero(), |a, p| a + p.1) / m;
    let sxx = pts.iter().fold(T::zero(), |a, p| a + (p.0 - ms) * (p.0 - ms));
    let sxv = pts.iter().fold(czero(), |a, p| a + (p.1 - mv) * (p.0 - ms));
    let slope = sxv / sxx;
    mv - slope * ms
}

/// `max |u_H − ∫_z^t v − e^ψ H_ε(t − z)|` over samples with `t ≥ z`.
///
/// `u_H = w_H + ℓ_H H_ε` is the H-wave total field and `v` the smooth part of
/// the δ-wave: its total field `w_δ + ℓ_δ δ_ε` with the layer `e^ψ δ_ε`
/// removed, so that `∫ v = ∫ w_δ + (ℓ_δ − e^ψ) H_ε`. Here `ℓ` is each
/// trace's own layer amplitude. The front is taken from `trace_h`.
pub fn integral_identity_residual<T: Real>(
    trace_h: &BoundaryTrace<T>,
    trace_d: &BoundaryTrace<T>,
    psi_on_boundary: &[Cplx<T>],
) -> Result<T> {
    trace_h.same_sampling(trace_d)?;
    if psi_on_boundary.len() != trace_h.points.len() {
        return Err(Error::SamplingMismatch(format!(
            "{} psi values for {} points",
            psi_on_boundary.len(),
            trace_h.points.len()
        )));
    }
    let inc = MollifiedIncident::new(WaveKind::Heaviside, trace_h.meta.epsilon)?;
    let mut worst = T::zero();
    for p in 0..trace_h.points.len() {
        let z = trace_h.front(p);
        let e_psi = psi_on_boundary[p].exp();
        let int_wd = cumulative_trapezoid(trace_d.series(p), trace_d.dt);
        for (k, w_h) in trace_h.series(p).iter().enumerate() {
            let t = trace_h.time(k);
            if t < z {
                continue;
            }
            let hs = inc.heaviside(t - z);
            let u_h = *w_h + trace_h.layer[p] * hs;
            let int_v = int_wd[k] + (trace_d.layer[p] - e_psi) * hs;
            let r = u_h - int_v - e_psi * hs;
            worst = worst.max(r.norm());
        }
    }
    Ok(worst)
}

/// Relative `ℓ²` mismatch between the centred time difference of the H-wave
/// trace and the δ-wave trace, over samples behind the mollified layer
/// (`t − z > ε`, interior time indices only).
pub fn time_derivative_residual<T: Real>(trace_h: &BoundaryTrace<T>, trace_d: &BoundaryTrace<T>) -> Result<T> {
    trace_h.same_sampling(trace_d)?;
    let eps = trace_h.meta.epsilon;
    let two_dt = trace_h.dt * c(2.0);
    let mut diff = Vec::new();
    let mut reference = Vec::new();
    for p in 0..trace_h.points.len() {
        let z = trace_h.front(p);
        let (sh, sd) = (trace_h.series(p), trace_d.series(p));
        for k in 1..trace_h.n_times.saturating_sub(1) {
            if trace_h.time(k) - z <= eps {
                continue;
            }
            let dt_h = (sh[k + 1] - sh[k - 1]) / two_dt;
            diff.push((dt_h - sd[k]).norm_sqr());
            reference.push(sd[k].norm_sqr());
        }
    }
    Ok(pairwise_sum(&diff).sqrt() / pairwise_sum(&reference).sqrt().max(c(DISCREPANCY_FLOOR)))
}

/// Largest `|u_H|` over samples with `t ≥ z`, the scale for
/// [`integral_identity_residual`].
pub fn total_scale<T: Real>(trace_h: &BoundaryTrace<T>) -> Result<T> {
    let inc = MollifiedIncident::new(WaveKind::Heaviside, trace_h.meta.epsilon)?;
    let mut m = T::zero();
    for p in 0..trace_h.points.len() {
        for k in 0..trace_h.n_times {
            if trace_h.mask[p * trace_h.n_times + k] {
                m = m.max(trace_h.total(&inc, p, k).norm());
            }
        }
    }
    Ok(m)
}

/// Powers of `s` fitted on top of the quadratic expansion in
/// [`near_front_offset`]: the constant carries the grid and mollifier
/// error, the rest absorb the truncated higher terms.
pub const NEAR_FRONT_BASIS: [i32; 4] = [0, 3, 4, 5];

/// Largest `|c₀|` over points of the least-squares fit
/// `u(z + s) − Σ_{j≤2} a_j s^j ≈ c₀ + c₃s³ + c₄s⁴ + c₅s⁵` on `s ∈ [3ε, s_max]`,
/// where `u` is the H-wave total field and `a_j = coeffs[p][j]`.
pub fn near_front_offset<T: Real>(trace_h: &BoundaryTrace<T>, coeffs: &[[Cplx<T>; 3]], s_max: T) -> Result<T> {
    if coeffs.len() != trace_h.points.len() {
        return Err(Error::SamplingMismatch(format!(
            "{} coefficient sets for {} points",
            coeffs.len(),
            trace_h.points.len()
        )));
    }
    let eps = trace_h.meta.epsilon;
    let s_min = eps * c(3.0);
    let inc = MollifiedIncident::new(WaveKind::Heaviside, eps)?;
    let m = NEAR_FRONT_BASIS.len();
    let mut worst = T::zero();
    for (p, a) in coeffs.iter().enumerate() {
        let z = trace_h.front(p);
        let mut ata = vec![vec![T::zero(); m]; m];
        let mut atb = vec![czero::<T>(); m];
        let mut used = 0;
        for k in 0..trace_h.n_times {
            let s = trace_h.time(k) - z;
            if s < s_min || s > s_max {
                continue;
            }
            let r = trace_h.total(&inc, p, k) - (a[0] + a[1] * s + a[2] * s * s);
            // scaled abscissa keeps the normal equations well conditioned
            let u = s / s_max;
            let phi: Vec<T> = NEAR_FRONT_BASIS.iter().map(|&e| u.powi(e)).collect();
            for i in 0..m {
                for j in 0..m {
                    ata[i][j] += phi[i] * phi[j];
                }
                atb[i] += r * phi[i];
            }
            used += 1;
        }
        if used < m {
            return Err(Error::SamplingMismatch(format!(
                "window [{s_min}, {s_max}] holds {used} samples; need {m}"
            )));
        }
        worst = worst.max(solve_normal(ata, atb)[0].norm());
    }
    Ok(worst)
}

/// Gaussian elimination with partial pivoting for a small real matrix and
/// complex right-hand side.
fn solve_normal<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<Cplx<T>>) -> Vec<Cplx<T>> {
    let m = b.len();
    for col in 0..m {
        let piv = (col..m)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let v = b[col];
            b[row] -= v * f;
        }
    }
    let mut x = vec![czero(); m];
    for i in (0..m).rev() {
        let mut v = b[i];
        for k in i + 1..m {
            v -= x[k] * a[i][k];
        }
        x[i] = v / a[i][i];
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L2,
    Linf,
}

fn masked_norm<T: Real>(values: impl Iterator<Item = Cplx<T>>, kind: NormKind) -> T {
    match kind {
        NormKind::Linf => values.fold(T::zero(), |m, v| m.max(v.norm())),
        NormKind::L2 => {
            let sq: Vec<T> = values.map(|v| v.norm_sqr()).collect();
            pairwise_sum(&sq).sqrt()
        }
    }
}

/// `‖t1 − t2‖ / max(‖t1‖, ‖t2‖, 1e−14)` over samples masked in both traces.
pub fn discrepancy<T: Real>(t1: &BoundaryTrace<T>, t2: &BoundaryTrace<T>, kind: NormKind) -> Result<T> {
    t1.same_sampling(t2)?;
    let keep = |i: &usize| t1.mask[*i] && t2.mask[*i];
    let idx: Vec<usize> = (0..t1.values.len()).filter(keep).collect();
    let diff = masked_norm(idx.iter().map(|&i| t1.values[i] - t2.values[i]), kind);
    let n1 = masked_norm(idx.iter().map(|&i| t1.values[i]), kind);
    let n2 = masked_norm(idx.iter().map(|&i| t2.values[i]), kind);
    Ok(diff / n1.max(n2).max(c(DISCREPANCY_FLOOR)))
}
