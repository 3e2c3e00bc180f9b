//! Gauge functions `f` and the transforms `A ↦ A + ∇f`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{c, czero, Cplx, Real};
use crate::quadrature::adaptive_simpson_c;

use super::{
    check_condition, Bump, CertKind, FieldSpec, Form, VectorField, VectorTerm,
};

/// Tolerance of the line integrals behind [`GaugeFunction::LineIntegral`];
/// tighter than the generic one because their values are differentiated.
const GAUGE_TOL: f64 = 1e-12;
/// Step for centered differences where no closed form is available.
const H_FD: f64 = 1e-5;
/// Accepted line-integral residual before gauge fixing.
const FIX_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound = "T: Real")]
pub enum GaugeFunction<T> {
    Zero,
    Bump { bump: Bump<T> },
    /// `f(x) = ∫_{−∞}^{x_axis} A_axis(x with x_axis = s) ds`.
    LineIntegral { source: Box<VectorField<T>>, axis: usize },
}

impl<T: Real> GaugeFunction<T> {
    pub fn support_radius(&self) -> T {
        match self {
            Self::Zero => T::zero(),
            Self::Bump { bump } => bump.support_radius(),
            Self::LineIntegral { source, .. } => source.support_radius(),
        }
    }

    pub(super) fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::Zero => Ok(()),
            Self::Bump { bump } => super::validate_bump(bump, n),
            Self::LineIntegral { source, axis } => {
                if *axis >= n || source.n != n {
                    return Err(Error::InvalidParameter {
                        name: "axis",
                        reason: format!("line integral axis {axis} in dimension {n}"),
                    });
                }
                source.validate()
            }
        }
    }

    /// Integral of `g(x with x_axis = s)` for `s` from the bottom of the support
    /// up to `x_axis`.
    fn ray<G>(source: &VectorField<T>, axis: usize, x: &[T], g: G) -> Cplx<T>
    where
        G: Fn(&VectorField<T>, &[T]) -> Cplx<T>,
    {
        let r = source.support_radius();
        let top = x[axis].min(r);
        if top <= -r {
            return czero();
        }
        adaptive_simpson_c(
            |s| {
                let mut q = x.to_vec();
                q[axis] = s;
                g(source, &q)
            },
            -r,
            top,
            c(GAUGE_TOL),
        )
    }

    pub fn value(&self, x: &[T]) -> Cplx<T> {
        match self {
            Self::Zero => czero(),
            Self::Bump { bump } => bump.value(x),
            Self::LineIntegral { source, axis } => {
                Self::ray(source, *axis, x, |f, q| f.value(q)[*axis])
            }
        }
    }

    pub fn gradient(&self, x: &[T]) -> Vec<Cplx<T>> {
        match self {
            Self::Zero => vec![czero(); x.len()],
            Self::Bump { bump } => bump.gradient(x),
            Self::LineIntegral { source, axis } => (0..x.len())
                .map(|k| {
                    if k == *axis {
                        source.value(x)[k]
                    } else {
                        Self::ray(source, *axis, x, |f, q| f.jacobian(q)[*axis][k])
                    }
                })
                .collect(),
        }
    }

    /// `H[i][k] = ∂_i ∂_k f`.
    pub fn hessian(&self, x: &[T]) -> Vec<Vec<Cplx<T>>> {
        match self {
            Self::Zero => vec![vec![czero(); x.len()]; x.len()],
            Self::Bump { bump } => bump.hessian(x),
            Self::LineIntegral { source, axis } => {
                let n = x.len();
                let a = *axis;
                let jac = source.jacobian(x);
                let mut h = vec![vec![czero(); n]; n];
                for k in 0..n {
                    h[a][k] = jac[a][k];
                    h[k][a] = jac[a][k];
                }
                // transverse block: differences of the transverse gradient
                for l in (0..n).filter(|&l| l != a) {
                    let (gp, gm) = shifted(x, l, |p| self.gradient(p));
                    for k in (0..n).filter(|&k| k != a) {
                        h[k][l] = (gp[k] - gm[k]) / c::<T>(2.0 * H_FD);
                    }
                }
                h
            }
        }
    }

    /// `∂_k Δf`.
    pub fn gradient_of_laplacian(&self, x: &[T]) -> Vec<Cplx<T>> {
        match self {
            Self::Zero => vec![czero(); x.len()],
            Self::Bump { bump } => bump.gradient_of_laplacian(x),
            Self::LineIntegral { source, axis } => {
                // Δf(x) = ∫_{−∞}^{x_axis} ΔA_axis ds
                let a = *axis;
                let lap_f = |p: &[T]| Self::ray(source, a, p, |f, q| f.laplacian(q)[a]);
                (0..x.len())
                    .map(|k| {
                        if k == a {
                            source.laplacian(x)[a]
                        } else {
                            let (p, m) = shifted(x, k, lap_f);
                            (p - m) / c::<T>(2.0 * H_FD)
                        }
                    })
                    .collect()
            }
        }
    }
}

fn shifted<T: Real, R>(x: &[T], k: usize, f: impl Fn(&[T]) -> R) -> (R, R) {
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[k] += c(H_FD);
    xm[k] -= c(H_FD);
    (f(&xp), f(&xm))
}

/// `(A, q) ↦ (A + ∇f, q)`; a zero gauge returns the input unchanged.
pub fn gauge_transform<T: Real>(
    spec: &FieldSpec<T>,
    g: &GaugeFunction<T>,
) -> Result<FieldSpec<T>> {
    spec.require_form(Form::Magnetic)?;
    if matches!(g, GaugeFunction::Zero) {
        return Ok(spec.clone());
    }
    spec.with_vector_term(VectorTerm::Gauge {
        gauge: g.clone(),
        factor: Cplx::new(T::one(), T::zero()),
    })
}

/// Removes the last component of `A` by the gauge `f = ∫_{−∞}^{x_n} A_n ds`.
///
/// Returns `(A − ∇f, q)` together with `f`. The gauge is compactly supported
/// only when every line integral of `A_n` vanishes, which is checked first.
pub fn gauge_fix_nth<T: Real>(spec: &FieldSpec<T>) -> Result<(FieldSpec<T>, GaugeFunction<T>)> {
    spec.require_form(Form::Magnetic)?;
    let n = spec.dim();
    let axis = n - 1;
    let already_zero = spec.vector_part().terms.is_empty();
    if already_zero {
        return Ok((spec.clone(), GaugeFunction::Zero));
    }
    let cert = check_condition(spec, CertKind::IntegralZero { axis }, None)?;
    if cert.residual > c(FIX_TOL) {
        return Err(Error::GaugeNotCompact {
            residual: cert.residual.to_f64_lossy(),
        });
    }
    let f = GaugeFunction::LineIntegral {
        source: Box::new(spec.vector_part().clone()),
        axis,
    };
    let fixed = spec.with_vector_term(VectorTerm::Gauge {
        gauge: f.clone(),
        factor: Cplx::new(-T::one(), T::zero()),
    })?;
    Ok((fixed, f))
}

/// `dA` from the analytic Jacobian: entries `∂_k A_l − ∂_l A_k` for `k < l`,
/// in lexicographic order of `(k, l)`.
pub fn exterior_derivative<T: Real>(field: &VectorField<T>, x: &[T]) -> Vec<Cplx<T>> {
    let j = field.jacobian(x);
    let n = field.n;
    let mut out = Vec::new();
    for k in 0..n {
        for l in k + 1..n {
            out.push(j[l][k] - j[k][l]);
        }
    }
    out
}

/// Same as [`exterior_derivative`] from centered differences of the values
/// with step `h`.
pub fn curl_fd<T: Real>(field: &VectorField<T>, x: &[T], h: T) -> Vec<Cplx<T>> {
    let n = field.n;
    let d = |k: usize, comp: usize| {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[k] += h;
        xm[k] -= h;
        (field.value(&xp)[comp] - field.value(&xm)[comp]) / (h + h)
    };
    let mut out = Vec::new();
    for k in 0..n {
        for l in k + 1..n {
            out.push(d(k, l) - d(l, k));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::real_bump;

    fn swirl_spec() -> FieldSpec<f64> {
        FieldSpec::from_terms(
            2,
            Form::Magnetic,
            vec![VectorTerm::Directional {
                bump: real_bump(vec![0.1, 0.2], 0.5, 0.8).unwrap(),
                direction: vec![1.0, 0.5],
            }],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn zero_gauge_is_identity() {
        let s = swirl_spec();
        assert_eq!(gauge_transform(&s, &GaugeFunction::Zero).unwrap(), s);
    }

    #[test]
    fn pure_gauge_is_curl_free() {
        let g = GaugeFunction::Bump {
            bump: real_bump(vec![0.0, 0.1], 0.7, 1.5).unwrap(),
        };
        let s = gauge_transform(&FieldSpec::zero(2, Form::Magnetic).unwrap(), &g).unwrap();
        for x in [[0.1, 0.2], [-0.3, 0.0], [0.2, -0.4]] {
            let dfd = curl_fd(s.vector_part(), &x, 1e-6);
            assert!(dfd[0].norm() <= 1e-8, "{}", dfd[0]);
            assert!(exterior_derivative(s.vector_part(), &x)[0].norm() < 1e-12);
        }
    }

    #[test]
    fn gauge_keeps_exterior_derivative() {
        let s = swirl_spec();
        let g = GaugeFunction::Bump {
            bump: real_bump(vec![-0.2, 0.0], 0.6, 2.0).unwrap(),
        };
        let t = gauge_transform(&s, &g).unwrap();
        for x in [[0.1, 0.2], [0.0, 0.3], [0.25, 0.1]] {
            let a = curl_fd(s.vector_part(), &x, 1e-6);
            let b = curl_fd(t.vector_part(), &x, 1e-6);
            assert!((a[0] - b[0]).norm() < 1e-6);
        }
    }

    #[test]
    fn fixing_recovers_the_bump() {
        let g = real_bump(vec![0.1, -0.2], 0.6, 1.2).unwrap();
        let s = FieldSpec::from_terms(
            2,
            Form::Magnetic,
            vec![VectorTerm::Partial {
                bump: g.clone(),
                axis: 1,
                component: 1,
            }],
            vec![],
        )
        .unwrap();
        let (fixed, f) = gauge_fix_nth(&s).unwrap();
        for x in [[0.1, -0.2], [0.3, 0.0], [-0.2, -0.5], [0.1, 0.5]] {
            assert!((f.value(&x) - g.value(&x)).norm() <= 1e-6);
            assert!(fixed.vector_at(&x)[1].norm() <= 1e-8);
        }
        // transverse derivatives of the recovered gauge
        let x = [0.2, -0.1];
        let gf = f.gradient(&x);
        let gb = g.gradient(&x);
        assert!((gf[0] - gb[0]).norm() < 1e-8);
        let hf = f.hessian(&x);
        let hb = g.hessian(&x);
        assert!((hf[0][0] - hb[0][0]).norm() < 1e-5);
        let lf = f.gradient_of_laplacian(&x);
        let lb = g.gradient_of_laplacian(&x);
        assert!((lf[0] - lb[0]).norm() < 1e-4 * (1.0 + lb[0].norm()));
        assert!((lf[1] - lb[1]).norm() < 1e-10);
    }

    #[test]
    fn fixing_nothing_to_do() {
        let s = FieldSpec::<f64>::zero(2, Form::Magnetic).unwrap();
        let (t, f) = gauge_fix_nth(&s).unwrap();
        assert_eq!(t, s);
        assert_eq!(f, GaugeFunction::Zero);
    }

    #[test]
    fn fixing_rejects_nonzero_line_integral() {
        let s = FieldSpec::from_terms(
            2,
            Form::Magnetic,
            vec![VectorTerm::Directional {
                bump: real_bump(vec![0.0, 0.0], 0.5, 1.0).unwrap(),
                direction: vec![0.0, 1.0],
            }],
            vec![],
        )
        .unwrap();
        let e = gauge_fix_nth(&s).unwrap_err();
        assert!(e.to_string().contains("gauge fixing not compactly supported"));
    }
}
