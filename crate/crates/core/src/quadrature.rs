//! One-dimensional quadrature: adaptive and composite Simpson rules.

use crate::num::{c, czero, Cplx, Real};

const MAX_DEPTH: u32 = 32;
/// Initial panels for the adaptive rule, so narrow bumps are never missed.
const SEED_PANELS: usize = 16;

/// Adaptive Simpson for a complex integrand on `[a, b]` with absolute
/// tolerance `tol`.
pub fn adaptive_simpson_c<T: Real, F>(f: F, a: T, b: T, tol: T) -> Cplx<T>
where
    F: Fn(T) -> Cplx<T>,
{
    if a == b {
        return czero();
    }
    let width = (b - a) / T::of_usize(SEED_PANELS);
    let panel_tol = tol / T::of_usize(SEED_PANELS);
    let mut total = czero();
    for k in 0..SEED_PANELS {
        let lo = a + width * T::of_usize(k);
        let hi = if k + 1 == SEED_PANELS { b } else { lo + width };
        let mid = (lo + hi) / c(2.0);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = simpson(lo, hi, flo, fmid, fhi);
        total = total + recurse(&f, lo, hi, flo, fmid, fhi, whole, panel_tol, MAX_DEPTH);
    }
    total
}

/// Real-valued convenience wrapper around [`adaptive_simpson_c`].
pub fn adaptive_simpson<T: Real, F>(f: F, a: T, b: T, tol: T) -> T
where
    F: Fn(T) -> T,
{
    adaptive_simpson_c(|x| Cplx::new(f(x), T::zero()), a, b, tol).re
}

fn simpson<T: Real>(a: T, b: T, fa: Cplx<T>, fm: Cplx<T>, fb: Cplx<T>) -> Cplx<T> {
    (fa + fm * c::<T>(4.0) + fb) * ((b - a) / c(6.0))
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Real, F>(
    f: &F,
    a: T,
    b: T,
    fa: Cplx<T>,
    fm: Cplx<T>,
    fb: Cplx<T>,
    whole: Cplx<T>,
    tol: T,
    depth: u32,
) -> Cplx<T>
where
    F: Fn(T) -> Cplx<T>,
{
    let m = (a + b) / c(2.0);
    let lm = (a + m) / c(2.0);
    let rm = (m + b) / c(2.0);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    // Below this level the difference is rounding noise, not truncation error.
    let noise = T::epsilon() * c(64.0) * (left.norm() + right.norm());
    if depth == 0 || delta.norm() <= c::<T>(15.0) * tol.max(noise) {
        return left + right + delta / c::<T>(15.0);
    }
    let half = tol / c(2.0);
    recurse(f, a, m, fa, flm, fm, left, half, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, half, depth - 1)
}

/// Composite Simpson on `[a, b]` with node spacing at most `max_step`.
pub fn composite_simpson_c<T: Real, F>(f: F, a: T, b: T, max_step: T) -> Cplx<T>
where
    F: Fn(T) -> Cplx<T>,
{
    if a == b {
        return czero();
    }
    let mut panels = ((b - a).abs() / max_step).ceil().to_usize().unwrap_or(2).max(2);
    if panels % 2 == 1 {
        panels += 1;
    }
    let step = (b - a) / T::of_usize(panels);
    let mut acc = f(a) + f(b);
    for k in 1..panels {
        let w = if k % 2 == 1 { c::<T>(4.0) } else { c::<T>(2.0) };
        acc = acc + f(a + step * T::of_usize(k)) * w;
    }
    acc * (step / c(3.0))
}

/// Cumulative trapezoid integral of uniformly spaced samples, starting at 0.
pub fn cumulative_trapezoid<T: Real>(values: &[Cplx<T>], dt: T) -> Vec<Cplx<T>> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = czero();
    let half = dt / c(2.0);
    for (k, &v) in values.iter().enumerate() {
        if k > 0 {
            acc = acc + (values[k - 1] + v) * half;
        }
        out.push(acc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adaptive_polynomial_and_gaussian() {
        let v = adaptive_simpson(|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12);
        assert!((v - 0.0).abs() < 1e-12);
        let g = adaptive_simpson(|x: f64| (-x * x).exp(), -8.0, 8.0, 1e-12);
        assert!((g - std::f64::consts::PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn adaptive_resolves_localized_bump() {
        // bump of width 0.2 inside [0, 10]
        let f = |x: f64| {
            let s = (x - 3.3) / 0.1;
            if s.abs() < 1.0 {
                (1.0 / (s * s - 1.0)).exp()
            } else {
                0.0
            }
        };
        let fine = composite_simpson_c(|x| Cplx::new(f(x), 0.0), 3.2, 3.4, 1e-5).re;
        let v = adaptive_simpson(f, 0.0, 10.0, 1e-12);
        assert!((v - fine).abs() < 1e-10, "{v} vs {fine}");
    }

    #[test]
    fn composite_is_exact_for_cubics() {
        let v = composite_simpson_c(|x: f64| Cplx::new(x.powi(3), 1.0), 0.0, 1.0, 0.3);
        assert!((v.re - 0.25).abs() < 1e-15 && (v.im - 1.0).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_cumulative() {
        let vals: Vec<Cplx<f64>> = (0..=10).map(|k| Cplx::new(k as f64 * 0.1, 0.0)).collect();
        let cum = cumulative_trapezoid(&vals, 0.1);
        assert!((cum[10].re - 0.5).abs() < 1e-14);
    }
}
