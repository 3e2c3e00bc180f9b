//! Coordinate frames adapted to an incident direction, the space-time regions
//! used throughout the analysis, and uniform simulation grids.
//!
//! For a direction `ω` every point splits as `x = (y, z)` with `z = x·ω` and
//! `y` the coordinates along the remaining orthonormal axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{c, dot, norm, Cplx, Real};

fn unit_tol<T: Real>() -> T {
    c::<T>(1e-12).max(T::epsilon() * c(16.0))
}

/// Unit vector in `R^n`, `n ∈ {1, 2, 3}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Direction<T> {
    comps: Vec<T>,
}

impl<T: Real> Direction<T> {
    pub fn new(comps: Vec<T>) -> Result<Self> {
        check_dim(comps.len())?;
        let nrm = norm(&comps);
        if (nrm - T::one()).abs() > unit_tol::<T>() {
            return Err(Error::NotADirection {
                norm: nrm.to_f64_lossy(),
            });
        }
        Ok(Self { comps })
    }

    /// Normalizes `v`; fails on the zero vector.
    pub fn normalized(v: Vec<T>) -> Result<Self> {
        check_dim(v.len())?;
        let nrm = norm(&v);
        if nrm <= T::zero() || !nrm.is_finite() {
            return Err(Error::NotADirection {
                norm: nrm.to_f64_lossy(),
            });
        }
        Ok(Self {
            comps: v.into_iter().map(|x| x / nrm).collect(),
        })
    }

    /// `sign · e_axis` in `R^n`.
    pub fn axis(n: usize, axis: usize, positive: bool) -> Result<Self> {
        check_dim(n)?;
        if axis >= n {
            return Err(Error::InvalidParameter {
                name: "axis",
                reason: format!("{axis} >= dimension {n}"),
            });
        }
        let mut comps = vec![T::zero(); n];
        comps[axis] = if positive { T::one() } else { -T::one() };
        Ok(Self { comps })
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.comps
    }

    pub fn dot(&self, x: &[T]) -> T {
        dot(&self.comps, x)
    }

    pub fn negated(&self) -> Self {
        Self {
            comps: self.comps.iter().map(|&x| -x).collect(),
        }
    }
}

pub(crate) fn check_dim(n: usize) -> Result<()> {
    if (1..=3).contains(&n) {
        Ok(())
    } else {
        Err(Error::Dimension(n))
    }
}

/// Orthonormal basis whose last vector is the incident direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame<T> {
    omega: Direction<T>,
    basis: Vec<Vec<T>>,
}

/// Builds the frame by Gram-Schmidt over the standard basis, taking seeds in
/// index order and skipping any seed (nearly) parallel to the span so far.
pub fn make_frame<T: Real>(omega: &Direction<T>) -> Frame<T> {
    let n = omega.dim();
    let mut accepted: Vec<Vec<T>> = vec![omega.as_slice().to_vec()];
    for k in 0..n {
        if accepted.len() == n {
            break;
        }
        let mut v = vec![T::zero(); n];
        v[k] = T::one();
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &accepted {
                let p = dot(&v, q);
                for (vi, &qi) in v.iter_mut().zip(q) {
                    *vi -= p * qi;
                }
            }
        }
        let nv = norm(&v);
        if nv > c(0.1) {
            for vi in v.iter_mut() {
                *vi /= nv;
            }
            accepted.push(v);
        }
    }
    let mut basis: Vec<Vec<T>> = accepted[1..].to_vec();
    basis.push(accepted[0].clone());
    Frame {
        omega: omega.clone(),
        basis,
    }
}

impl<T: Real> Frame<T> {
    pub fn omega(&self) -> &Direction<T> {
        &self.omega
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn z(&self, x: &[T]) -> T {
        self.omega.dot(x)
    }

    /// Transverse coordinates (length `n - 1`).
    pub fn y(&self, x: &[T]) -> Vec<T> {
        self.basis[..self.dim() - 1]
            .iter()
            .map(|b| dot(b, x))
            .collect()
    }

    /// Inverse of `(y, z)`.
    pub fn point(&self, y: &[T], z: T) -> Vec<T> {
        let n = self.dim();
        let mut x = vec![T::zero(); n];
        for (k, &yk) in y.iter().enumerate() {
            for (xi, &bi) in x.iter_mut().zip(&self.basis[k]) {
                *xi += yk * bi;
            }
        }
        for (xi, &wi) in x.iter_mut().zip(self.omega.as_slice()) {
            *xi += z * wi;
        }
        x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionKind {
    Q,
    QPlus,
    QMinus,
    Sigma,
    SigmaPlus,
    SigmaMinus,
    Gamma,
    GammaTopBottom,
}

/// A space-time region `⊂ R^n × R` attached to the unit ball `B` and horizon `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region<T> {
    pub kind: RegionKind,
    pub horizon: T,
    /// Half-thickness used for the surfaces `{t = z}` and `{|t| = T}`.
    pub tol_surface: T,
}

impl<T: Real> Region<T> {
    pub fn new(kind: RegionKind, horizon: T) -> Self {
        Self {
            kind,
            horizon,
            tol_surface: T::zero(),
        }
    }

    /// Surface tolerance of half a time step, matching trace sampling.
    pub fn with_time_step(kind: RegionKind, horizon: T, dt: T) -> Self {
        Self {
            kind,
            horizon,
            tol_surface: dt / c(2.0),
        }
    }

    pub fn contains(&self, frame: &Frame<T>, x: &[T], t: T) -> bool {
        region_contains(self, frame, x, t)
    }
}

pub fn region_contains<T: Real>(region: &Region<T>, frame: &Frame<T>, x: &[T], t: T) -> bool {
    let r = norm(x);
    let big_t = region.horizon;
    let s = t - frame.z(x);
    let tol = region.tol_surface;
    let on_sphere = (r - T::one()).abs() <= unit_tol::<T>();
    let in_q = r < T::one() && t.abs() < big_t;
    let in_q_closure = r <= T::one() + unit_tol::<T>() && t.abs() <= big_t + tol;
    let in_sigma = on_sphere && t.abs() < big_t;
    match region.kind {
        RegionKind::Q => in_q,
        RegionKind::QPlus => in_q && s > tol,
        RegionKind::QMinus => in_q && s < -tol,
        RegionKind::Sigma => in_sigma,
        RegionKind::SigmaPlus => in_sigma && s > tol,
        RegionKind::SigmaMinus => in_sigma && s < -tol,
        RegionKind::Gamma => in_q_closure && s.abs() <= tol,
        RegionKind::GammaTopBottom => in_q_closure && (t.abs() - big_t).abs() <= tol,
    }
}

/// A point of `∂B` together with its angular coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint<T> {
    pub x: Vec<T>,
    /// Polar angle in 2D; (polar, azimuth) in 3D; 0 or π in 1D.
    pub angles: Vec<T>,
}

/// Deterministic, uniformly spaced samples of the unit sphere `∂B ⊂ R^n`.
pub fn sample_boundary_circle<T: Real>(n: usize, h_angular: T) -> Result<Vec<BoundaryPoint<T>>> {
    sample_sphere(n, T::one(), h_angular)
}

/// As [`sample_boundary_circle`] for the sphere of radius `radius`.
pub fn sample_sphere<T: Real>(n: usize, radius: T, h_angular: T) -> Result<Vec<BoundaryPoint<T>>> {
    check_dim(n)?;
    if h_angular <= T::zero() || !h_angular.is_finite() {
        return Err(Error::InvalidParameter {
            name: "h_angular",
            reason: "spacing must be positive".into(),
        });
    }
    let two_pi = T::PI() + T::PI();
    let count = |span: T| -> usize {
        let q = (span / h_angular).to_f64_lossy();
        ((q - 1e-9).ceil().max(1.0)) as usize
    };
    let pts = match n {
        1 => vec![
            BoundaryPoint {
                x: vec![-radius],
                angles: vec![T::PI()],
            },
            BoundaryPoint {
                x: vec![radius],
                angles: vec![T::zero()],
            },
        ],
        2 => {
            let m = count(two_pi);
            (0..m)
                .map(|k| {
                    let a = two_pi * T::of_usize(k) / T::of_usize(m);
                    BoundaryPoint {
                        x: vec![radius * a.cos(), radius * a.sin()],
                        angles: vec![a],
                    }
                })
                .collect()
        }
        _ => {
            let rings = count(T::PI());
            let mut out = Vec::new();
            for i in 0..rings {
                let theta = T::PI() * (T::of_usize(i) + c(0.5)) / T::of_usize(rings);
                let m = count(two_pi * theta.sin());
                for k in 0..m {
                    let a = two_pi * T::of_usize(k) / T::of_usize(m);
                    out.push(BoundaryPoint {
                        x: vec![
                            radius * theta.sin() * a.cos(),
                            radius * theta.sin() * a.sin(),
                            radius * theta.cos(),
                        ],
                        angles: vec![theta, a],
                    });
                }
            }
            out
        }
    };
    Ok(pts)
}

/// Uniform Cartesian grid on `[-L, L]^n` plus the leapfrog time window.
///
/// Point `i` along an axis sits at `(i - m) h`, `i = 0..2m`, so the origin is
/// always a grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SimGrid<T> {
    lattice: Lattice<T>,
    dt: T,
    t0: T,
    t1: T,
}

impl<T: Real> SimGrid<T> {
    /// Validates CFL (`dt ≤ h/√n`) and that `[-L, L]^n` keeps the box
    /// boundary causally disconnected from `B` over `[t0, t1]`.
    pub fn new(n: usize, h: T, extent: T, dt: T, t0: T, t1: T) -> Result<Self> {
        if !(dt > T::zero()) || !(t1 > t0) {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: "need dt > 0 and t1 > t0".into(),
            });
        }
        let lattice = Lattice::covering(n, h, extent)?;
        let limit = h / T::of_usize(n).sqrt();
        if dt > limit * (T::one() + T::epsilon() * c(8.0)) {
            return Err(Error::Cfl {
                dt: dt.to_f64_lossy(),
                limit: limit.to_f64_lossy(),
            });
        }
        let grid = Self {
            lattice,
            dt,
            t0,
            t1,
        };
        let required = T::one() + (t1 + T::one());
        if grid.extent() < required - c(1e-12) {
            return Err(Error::GridTooSmall {
                extent: grid.extent().to_f64_lossy(),
                required: required.to_f64_lossy(),
            });
        }
        Ok(grid)
    }

    /// Default simulation grid for mollifier width `eps`: window
    /// `[-1 - eps - dt, t_sim]`, `dt = 0.9 h/√n`, `L = 1 + t_sim + 1 + eps`.
    pub fn for_window(n: usize, h: T, t_sim: T, eps: T) -> Result<Self> {
        check_dim(n)?;
        let dt = c::<T>(0.9) * h / T::of_usize(n).sqrt();
        let extent = T::one() + t_sim + T::one() + eps;
        Self::new(n, h, extent, dt, -T::one() - eps - dt, t_sim)
    }

    /// Same window with a larger spatial box, e.g. to reach a far-field radius.
    pub fn with_extent(&self, extent: T) -> Result<Self> {
        Self::new(self.dim(), self.h(), extent, self.dt, self.t0, self.t1)
    }

    pub fn lattice(&self) -> &Lattice<T> {
        &self.lattice
    }
    pub fn dim(&self) -> usize {
        self.lattice.n
    }
    pub fn h(&self) -> T {
        self.lattice.h
    }
    pub fn dt(&self) -> T {
        self.dt
    }
    pub fn t0(&self) -> T {
        self.t0
    }
    pub fn t1(&self) -> T {
        self.t1
    }
    pub fn extent(&self) -> T {
        self.lattice.extent()
    }
    pub fn half_points(&self) -> usize {
        self.lattice.half_points
    }
    /// Points per axis.
    pub fn points_per_axis(&self) -> usize {
        self.lattice.points_per_axis()
    }
    pub fn len(&self) -> usize {
        self.lattice.len()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    /// Number of leapfrog steps from `t0` that reach `t1`.
    pub fn steps(&self) -> usize {
        ((self.t1 - self.t0) / self.dt).ceil().to_usize().unwrap_or(0)
    }
    pub fn coord(&self, i: usize) -> T {
        self.lattice.coord(i)
    }
    pub fn strides(&self) -> Vec<usize> {
        self.lattice.strides()
    }
    pub fn unravel(&self, idx: usize) -> Vec<usize> {
        self.lattice.unravel(idx)
    }
    pub fn ravel(&self, multi: &[usize]) -> usize {
        self.lattice.ravel(multi)
    }
    pub fn point(&self, idx: usize) -> Vec<T> {
        self.lattice.point(idx)
    }
    pub fn fractional_index(&self, x: T) -> T {
        self.lattice.fractional_index(x)
    }
}

/// Cube lattice `{(i - m) h : 0 ≤ i ≤ 2m}^n`, stored row-major with the last
/// axis contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Lattice<T> {
    n: usize,
    h: T,
    half_points: usize,
}

impl<T: Real> Lattice<T> {
    pub fn new(n: usize, h: T, half_points: usize) -> Result<Self> {
        check_dim(n)?;
        if !(h > T::zero()) || half_points == 0 {
            return Err(Error::InvalidParameter {
                name: "lattice",
                reason: "need h > 0 and at least one point per half axis".into(),
            });
        }
        Ok(Self { n, h, half_points })
    }

    /// Smallest lattice of spacing `h` whose half-width is at least `extent`.
    pub fn covering(n: usize, h: T, extent: T) -> Result<Self> {
        let m = (extent / h - c(1e-9)).ceil().to_usize().unwrap_or(0).max(1);
        Self::new(n, h, m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn h(&self) -> T {
        self.h
    }
    pub fn half_points(&self) -> usize {
        self.half_points
    }
    pub fn extent(&self) -> T {
        self.h * T::of_usize(self.half_points)
    }
    pub fn points_per_axis(&self) -> usize {
        2 * self.half_points + 1
    }
    pub fn len(&self) -> usize {
        self.points_per_axis().pow(self.n as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, i: usize) -> T {
        (T::of_usize(i) - T::of_usize(self.half_points)) * self.h
    }

    /// Row-major strides, last axis contiguous.
    pub fn strides(&self) -> Vec<usize> {
        let p = self.points_per_axis();
        (0..self.n).map(|d| p.pow((self.n - 1 - d) as u32)).collect()
    }

    pub fn unravel(&self, mut idx: usize) -> Vec<usize> {
        let p = self.points_per_axis();
        let mut out = vec![0; self.n];
        for d in (0..self.n).rev() {
            out[d] = idx % p;
            idx /= p;
        }
        out
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        let p = self.points_per_axis();
        multi.iter().fold(0, |acc, &i| acc * p + i)
    }

    pub fn point(&self, idx: usize) -> Vec<T> {
        self.unravel(idx).into_iter().map(|i| self.coord(i)).collect()
    }

    /// Fractional grid index of a coordinate.
    pub fn fractional_index(&self, x: T) -> T {
        x / self.h + T::of_usize(self.half_points)
    }

    /// Tensor-product cubic Lagrange interpolation of lattice samples at `x`.
    /// Needs two nodes of margin on each side; `None` otherwise.
    pub fn interpolate(&self, values: &[Cplx<T>], x: &[T]) -> Option<Cplx<T>> {
        debug_assert_eq!(values.len(), self.len());
        let p = self.points_per_axis();
        let mut base = [0usize; 3];
        let mut w = [[T::zero(); 4]; 3];
        for d in 0..self.n {
            let f = self.fractional_index(x[d]);
            let i0 = f.floor();
            let i = i0.to_isize()?;
            if i < 1 || i + 2 >= p as isize {
                return None;
            }
            base[d] = (i - 1) as usize;
            w[d] = cubic_weights(f - i0);
        }
        let strides = self.strides();
        let mut acc = Cplx::new(T::zero(), T::zero());
        let combos = 4usize.pow(self.n as u32);
        for k in 0..combos {
            let mut rem = k;
            let mut idx = 0;
            let mut weight = T::one();
            for d in (0..self.n).rev() {
                let o = rem % 4;
                rem /= 4;
                idx += (base[d] + o) * strides[d];
                weight *= w[d][o];
            }
            acc += values[idx] * weight;
        }
        Some(acc)
    }
}

/// Cubic Lagrange weights for nodes `-1, 0, 1, 2` at offset `t ∈ [0, 1)`.
pub fn cubic_weights<T: Real>(t: T) -> [T; 4] {
    let one = T::one();
    let two = one + one;
    let six = c::<T>(6.0);
    [
        -t * (t - one) * (t - two) / six,
        (t + one) * (t - one) * (t - two) / two,
        -(t + one) * t * (t - two) / two,
        (t + one) * t * (t - one) / six,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn frame_axis_aligned() {
        let w = Direction::<f64>::axis(2, 1, true).unwrap();
        let f = make_frame(&w);
        assert_eq!(f.basis(), &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(f.z(&[0.3, 0.7]), 0.7);
    }

    #[test]
    fn frame_z_is_dot_product() {
        let f = make_frame(&Direction::new(vec![1.0, 0.0]).unwrap());
        assert_eq!(f.z(&[0.3, 0.7]), 0.3);
        let s = 0.5f64.sqrt();
        let f = make_frame(&Direction::new(vec![s, s]).unwrap());
        assert!(close(f.z(&[1.0, 0.0]), 0.707_106_781_186_547_5, 1e-15));
    }

    #[test]
    fn non_unit_direction_rejected() {
        assert!(matches!(
            Direction::new(vec![1.0, 1.0]),
            Err(Error::NotADirection { .. })
        ));
    }

    #[test]
    fn frame_is_orthonormal_in_3d() {
        let w = Direction::normalized(vec![0.3, -0.4, 0.86]).unwrap();
        let f = make_frame(&w);
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(&f.basis()[i], &f.basis()[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(close(d, want, 1e-12));
            }
        }
        let x = [0.2, 0.1, -0.7];
        let back = f.point(&f.y(&x), f.z(&x));
        for k in 0..3 {
            assert!(close(back[k], x[k], 1e-14));
        }
    }

    #[test]
    fn region_examples() {
        let f = make_frame(&Direction::<f64>::axis(2, 0, true).unwrap());
        let qp = Region::new(RegionKind::QPlus, 7.5);
        assert!(qp.contains(&f, &[0.0, 0.0], 0.5));
        let sigma = Region::new(RegionKind::Sigma, 7.5);
        assert!(sigma.contains(&f, &[1.0, 0.0], 0.0));
        let gamma = Region::new(RegionKind::Gamma, 7.5);
        assert!(gamma.contains(&f, &[0.5, 0.0], 0.5));
        assert!(!gamma.contains(&f, &[0.5, 0.0], 0.6));
    }

    #[test]
    fn circle_samples() {
        let pts = sample_boundary_circle::<f64>(2, std::f64::consts::FRAC_PI_2).unwrap();
        let want = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        assert_eq!(pts.len(), 4);
        for (p, w) in pts.iter().zip(want) {
            assert!(close(p.x[0], w[0], 1e-15) && close(p.x[1], w[1], 1e-15));
        }
        let pts = sample_boundary_circle::<f64>(2, std::f64::consts::PI / 180.0).unwrap();
        assert_eq!(pts.len(), 360);
        assert!(pts.iter().all(|p| close(norm(&p.x), 1.0, 1e-12)));
        let pts = sample_boundary_circle::<f64>(1, 0.1).unwrap();
        assert_eq!(pts.iter().map(|p| p.x[0]).collect::<Vec<_>>(), vec![-1.0, 1.0]);
        assert!(sample_boundary_circle::<f64>(2, 0.0).is_err());
    }

    #[test]
    fn grid_enforces_cfl_and_extent() {
        assert!(matches!(
            SimGrid::<f64>::new(2, 0.1, 6.0, 0.08, -1.5, 3.0),
            Err(Error::Cfl { .. })
        ));
        assert!(matches!(
            SimGrid::<f64>::new(2, 0.1, 4.0, 0.05, -1.5, 3.0),
            Err(Error::GridTooSmall { .. })
        ));
        let g = SimGrid::<f64>::for_window(2, 1.0 / 64.0, 3.0, 4.0 / 64.0).unwrap();
        assert!(g.dt() <= g.h() / 2f64.sqrt());
        assert!(g.extent() >= 5.0);
        assert_eq!(g.coord(g.half_points()), 0.0);
        let idx = g.ravel(&[3, 7]);
        assert_eq!(g.unravel(idx), vec![3, 7]);
    }
}
