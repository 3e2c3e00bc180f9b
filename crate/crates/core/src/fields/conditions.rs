//! Normalization and symmetry conditions on the vector part, and the line
//! integrals `μ_j` of one of its components.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{c, czero, Cplx, Real};
use crate::quadrature::adaptive_simpson_c;

use super::{ball_samples, FieldSpec, Form, VectorField};

/// Tolerance of every full-line integral in this module.
const LINE_TOL: f64 = 1e-9;
/// Lattice spacing of the points where pointwise symmetries are checked.
const POINT_SPACING: f64 = 1.0 / 16.0;
/// Lattice spacing of the transverse positions of checked lines.
const LINE_SPACING: f64 = 1.0 / 32.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CertKind {
    /// `∫ e_axis·A(x with x_axis = s) ds = 0` on every line parallel to `e_axis`.
    IntegralZero { axis: usize },
    /// `A(−x) = −A(x)`.
    Antisymmetric,
    /// `e_axis·A(x) = −e_axis·A(O x)` for an orthogonal `O` with `O e_axis = −e_axis`.
    OrthogonalSym { axis: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SymmetryCert<T> {
    pub kind: CertKind,
    /// The orthogonal map used by [`CertKind::OrthogonalSym`]; identity otherwise.
    pub transform: Vec<Vec<T>>,
    /// Largest violation over the sample set.
    pub residual: T,
}

fn identity<T: Real>(n: usize) -> Vec<Vec<T>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect()
}

/// `I − 2 e_axis e_axisᵀ`.
pub fn reflection<T: Real>(n: usize, axis: usize) -> Vec<Vec<T>> {
    let mut m = identity(n);
    m[axis][axis] = -T::one();
    m
}

fn check_transform<T: Real>(m: &[Vec<T>], n: usize, axis: usize) -> Result<()> {
    let bad = |reason: String| Error::InvalidParameter {
        name: "transform",
        reason,
    };
    if m.len() != n || m.iter().any(|r| r.len() != n) {
        return Err(bad(format!("expected a {n}x{n} matrix")));
    }
    let tol = c::<T>(1e-12).max(T::epsilon() * c(16.0));
    for i in 0..n {
        for j in 0..n {
            let g = (0..n).fold(T::zero(), |s, k| s + m[k][i] * m[k][j]);
            let want = if i == j { T::one() } else { T::zero() };
            if (g - want).abs() > tol {
                return Err(bad("not orthogonal".into()));
            }
        }
        let want = if i == axis { -T::one() } else { T::zero() };
        if (m[i][axis] - want).abs() > tol {
            return Err(bad(format!("does not map e_{axis} to -e_{axis}")));
        }
    }
    Ok(())
}

fn apply<T: Real>(m: &[Vec<T>], x: &[T]) -> Vec<T> {
    m.iter()
        .map(|row| row.iter().zip(x).fold(T::zero(), |s, (&a, &b)| s + a * b))
        .collect()
}

/// `∫ e_axis·A(x with x_axis = s) ds` over the support.
fn full_line<T: Real>(field: &VectorField<T>, axis: usize, x: &[T]) -> Cplx<T> {
    let r = field.support_radius();
    if r <= T::zero() {
        return czero();
    }
    adaptive_simpson_c(
        |s| {
            let mut q = x.to_vec();
            q[axis] = s;
            field.value(&q)[axis]
        },
        -r,
        r,
        c(LINE_TOL),
    )
}

/// Measures how far the vector part of `spec` is from satisfying `kind`.
///
/// `transform` is only read for [`CertKind::OrthogonalSym`]; it defaults to
/// the reflection across the hyperplane orthogonal to `e_axis`.
pub fn check_condition<T: Real>(
    spec: &FieldSpec<T>,
    kind: CertKind,
    transform: Option<Vec<Vec<T>>>,
) -> Result<SymmetryCert<T>> {
    let n = spec.dim();
    let field = spec.vector_part();
    let axis_ok = |axis: usize| {
        if axis < n {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "axis",
                reason: format!("{axis} >= dimension {n}"),
            })
        }
    };
    let mut residual = T::zero();
    let mut used = identity(n);
    match kind {
        CertKind::IntegralZero { axis } => {
            axis_ok(axis)?;
            for x in ball_samples(n, c::<T>(LINE_SPACING)) {
                if x[axis] != T::zero() {
                    continue;
                }
                residual = residual.max(full_line(field, axis, &x).norm());
            }
        }
        CertKind::Antisymmetric => {
            for x in ball_samples(n, c::<T>(POINT_SPACING)) {
                let neg: Vec<T> = x.iter().map(|&v| -v).collect();
                let (a, b) = (field.value(&x), field.value(&neg));
                let v = a
                    .iter()
                    .zip(&b)
                    .fold(T::zero(), |s, (p, q)| s + (p + q).norm_sqr())
                    .sqrt();
                residual = residual.max(v);
            }
        }
        CertKind::OrthogonalSym { axis } => {
            axis_ok(axis)?;
            let m = transform.unwrap_or_else(|| reflection(n, axis));
            check_transform(&m, n, axis)?;
            for x in ball_samples(n, c::<T>(POINT_SPACING)) {
                let ox = apply(&m, &x);
                let v = field.value(&x)[axis] + field.value(&ox)[axis];
                residual = residual.max(v.norm());
            }
            used = m;
        }
    }
    Ok(SymmetryCert {
        kind,
        transform: used,
        residual,
    })
}

/// `μ_j(y) = ∫ e_j·W(y, s) ds`, where `y` lists the coordinates other than
/// `j` in index order.
#[derive(Debug, Clone)]
pub struct MuProfile<T> {
    field: VectorField<T>,
    axis: usize,
}

impl<T: Real> MuProfile<T> {
    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn eval(&self, y: &[T]) -> Cplx<T> {
        let n = self.field.n;
        assert_eq!(y.len() + 1, n, "mu profile takes n-1 coordinates");
        let mut x = Vec::with_capacity(n);
        x.extend_from_slice(&y[..self.axis]);
        x.push(T::zero());
        x.extend_from_slice(&y[self.axis..]);
        full_line(&self.field, self.axis, &x)
    }
}

pub fn mu_profile<T: Real>(spec: &FieldSpec<T>, axis: usize) -> Result<MuProfile<T>> {
    spec.require_form(Form::Drift)?;
    if axis >= spec.dim() {
        return Err(Error::InvalidParameter {
            name: "axis",
            reason: format!("{axis} >= dimension {}", spec.dim()),
        });
    }
    Ok(MuProfile {
        field: spec.vector_part().clone(),
        axis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{real_bump, GaugeFunction, VectorTerm};
    use crate::quadrature::composite_simpson_c;

    fn drift(terms: Vec<VectorTerm<f64>>) -> FieldSpec<f64> {
        FieldSpec::from_terms(2, Form::Drift, terms, vec![]).unwrap()
    }

    #[test]
    fn zero_field_certificates() {
        let z = FieldSpec::<f64>::zero(2, Form::Magnetic).unwrap();
        for k in [
            CertKind::IntegralZero { axis: 1 },
            CertKind::Antisymmetric,
            CertKind::OrthogonalSym { axis: 0 },
        ] {
            assert_eq!(check_condition(&z, k, None).unwrap().residual, 0.0);
        }
    }

    #[test]
    fn swirl_is_odd() {
        let s = FieldSpec::from_terms(
            2,
            Form::Magnetic,
            vec![VectorTerm::Swirl {
                bump: real_bump(vec![0.0, 0.0], 0.8, 1.0).unwrap(),
                plane: [0, 1],
            }],
            vec![],
        )
        .unwrap();
        let cert = check_condition(&s, CertKind::Antisymmetric, None).unwrap();
        assert!(cert.residual <= 1e-12);
    }

    #[test]
    fn off_center_bump_is_not_odd() {
        let s = FieldSpec::from_terms(
            2,
            Form::Magnetic,
            vec![VectorTerm::Directional {
                bump: real_bump(vec![0.4, 0.1], 0.5, 1.0).unwrap(),
                direction: vec![1.0, 0.0],
            }],
            vec![],
        )
        .unwrap();
        let sup = (-1.0f64).exp();
        let cert = check_condition(&s, CertKind::Antisymmetric, None).unwrap();
        assert!(cert.residual > 0.1 * sup);
    }

    #[test]
    fn transform_validation() {
        let s = FieldSpec::<f64>::zero(2, Form::Drift).unwrap();
        let bad = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(check_condition(&s, CertKind::OrthogonalSym { axis: 0 }, Some(bad)).is_err());
        let rot = vec![vec![-1.0, 0.0], vec![0.0, -1.0]];
        assert!(check_condition(&s, CertKind::OrthogonalSym { axis: 1 }, Some(rot)).is_ok());
    }

    #[test]
    fn mu_of_gradient_vanishes() {
        let s = drift(vec![VectorTerm::Gauge {
            gauge: GaugeFunction::Bump {
                bump: real_bump(vec![0.1, 0.1], 0.6, 1.0).unwrap(),
            },
            factor: Cplx::new(1.0, 0.0),
        }]);
        let mu = mu_profile(&s, 1).unwrap();
        for y in [-0.3, 0.0, 0.2, 0.5] {
            assert!(mu.eval(&[y]).norm() < 1e-9);
        }
    }

    #[test]
    fn mu_of_positive_bump() {
        let b = real_bump(vec![0.0, 0.0], 0.5, 1.0).unwrap();
        let s = drift(vec![VectorTerm::Directional {
            bump: b.clone(),
            direction: vec![0.0, 1.0],
        }]);
        let mu = mu_profile(&s, 1).unwrap().eval(&[0.0]);
        let oracle = composite_simpson_c(|t| b.value(&[0.0, t]), -0.5, 0.5, 1e-4);
        assert!(mu.re > 0.0);
        assert!((mu - oracle).norm() < 1e-8);
        let z = FieldSpec::<f64>::zero(2, Form::Drift).unwrap();
        assert_eq!(mu_profile(&z, 0).unwrap().eval(&[0.3]), czero());
    }
}
