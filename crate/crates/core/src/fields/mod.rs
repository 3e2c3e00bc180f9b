//! Compactly supported potentials in magnetic form `(A, q)` or drift form
//! `(W, V)`, built from smooth bumps.
//!
//! The two forms describe the same operator via `W = −iA` and
//! `V = A·A + D·A + q` with `D = −i∇` (`A·A` is the bilinear square, so complex
//! `A` is allowed).

mod bump;
mod conditions;
mod gauge;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::check_dim;
use crate::num::{czero, norm, times_i, times_neg_i, Cplx, Real};

pub use bump::{real_bump, Bump};
pub use conditions::{check_condition, mu_profile, CertKind, MuProfile, SymmetryCert};
pub use gauge::{curl_fd, exterior_derivative, gauge_fix_nth, gauge_transform, GaugeFunction};

/// Which Hamiltonian the potential pair parameterizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Form {
    /// `(D + A)² + q`
    Magnetic,
    /// `−Δ + 2W·∇ + V`
    Drift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothness {
    Infinite,
    Finite(u32),
}

/// Differentiability index required of the potentials by the uniqueness
/// theorems in dimension `n`: `A ∈ C^{M+2}`, `q ∈ C^M`. Only a diagnostic here,
/// since every built-in field is `C^∞`.
pub fn regularity_index(n: usize) -> usize {
    if n % 2 == 0 {
        3 * n / 2 + 10
    } else {
        3 * (n + 1) / 2 + 10
    }
}

/// One summand of a vector potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound = "T: Real")]
pub enum VectorTerm<T> {
    /// `b(x)·d` for a fixed real vector `d`.
    Directional { bump: Bump<T>, direction: Vec<T> },
    /// Only component `component` is nonzero and equals `∂_axis b`.
    Partial {
        bump: Bump<T>,
        axis: usize,
        component: usize,
    },
    /// Rotation in the plane `(i, j)` around the bump center `c`:
    /// `A_i = (x−c)_j b`, `A_j = −(x−c)_i b`.
    Swirl { bump: Bump<T>, plane: [usize; 2] },
    /// `factor · ∇f`.
    Gauge {
        gauge: GaugeFunction<T>,
        factor: Cplx<T>,
    },
}

impl<T: Real> VectorTerm<T> {
    fn support_radius(&self) -> T {
        match self {
            Self::Directional { bump, .. } | Self::Partial { bump, .. } | Self::Swirl { bump, .. } => {
                bump.support_radius()
            }
            Self::Gauge { gauge, .. } => gauge.support_radius(),
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let axis_ok = |a: usize| {
            if a < n {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name: "axis",
                    reason: format!("{a} >= dimension {n}"),
                })
            }
        };
        match self {
            Self::Directional { bump, direction } => {
                validate_bump(bump, n)?;
                if direction.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: direction.len(),
                    });
                }
                Ok(())
            }
            Self::Partial {
                bump,
                axis,
                component,
            } => {
                validate_bump(bump, n)?;
                axis_ok(*axis)?;
                axis_ok(*component)
            }
            Self::Swirl { bump, plane } => {
                validate_bump(bump, n)?;
                axis_ok(plane[0])?;
                axis_ok(plane[1])?;
                if plane[0] == plane[1] {
                    return Err(Error::InvalidParameter {
                        name: "plane",
                        reason: "axes must differ".into(),
                    });
                }
                Ok(())
            }
            Self::Gauge { gauge, .. } => gauge.validate(n),
        }
    }

    fn scaled(&self, k: Cplx<T>) -> Self {
        self.map_amplitude(|a| a * k)
    }

    fn map_amplitude(&self, f: impl Fn(Cplx<T>) -> Cplx<T>) -> Self {
        let mut out = self.clone();
        match &mut out {
            Self::Directional { bump, .. } | Self::Partial { bump, .. } | Self::Swirl { bump, .. } => {
                bump.amplitude = f(bump.amplitude)
            }
            Self::Gauge { factor, .. } => *factor = f(*factor),
        }
        out
    }

    fn add_value(&self, x: &[T], out: &mut [Cplx<T>]) {
        match self {
            Self::Directional { bump, direction } => {
                let v = bump.value(x);
                for (o, &d) in out.iter_mut().zip(direction) {
                    *o += v * d;
                }
            }
            Self::Partial {
                bump,
                axis,
                component,
            } => {
                let g = bump.gradient(x);
                out[*component] += g[*axis];
            }
            Self::Swirl { bump, plane } => {
                let [i, j] = *plane;
                let v = bump.value(x);
                out[i] += v * (x[j] - bump.center[j]);
                out[j] -= v * (x[i] - bump.center[i]);
            }
            Self::Gauge { gauge, factor } => {
                for (o, g) in out.iter_mut().zip(gauge.gradient(x)) {
                    *o += g * *factor;
                }
            }
        }
    }

    /// Adds `∂_k A_i` into `out[i][k]`.
    fn add_jacobian(&self, x: &[T], out: &mut [Vec<Cplx<T>>]) {
        let n = x.len();
        match self {
            Self::Directional { bump, direction } => {
                let g = bump.gradient(x);
                for i in 0..n {
                    for k in 0..n {
                        out[i][k] += g[k] * direction[i];
                    }
                }
            }
            Self::Partial {
                bump,
                axis,
                component,
            } => {
                let h = bump.hessian(x);
                for k in 0..n {
                    out[*component][k] += h[*axis][k];
                }
            }
            Self::Swirl { bump, plane } => {
                let [i, j] = *plane;
                let v = bump.value(x);
                let g = bump.gradient(x);
                let (di, dj) = (x[i] - bump.center[i], x[j] - bump.center[j]);
                for k in 0..n {
                    out[i][k] += g[k] * dj;
                    out[j][k] -= g[k] * di;
                }
                out[i][j] += v;
                out[j][i] -= v;
            }
            Self::Gauge { gauge, factor } => {
                let h = gauge.hessian(x);
                for i in 0..n {
                    for k in 0..n {
                        out[i][k] += h[i][k] * *factor;
                    }
                }
            }
        }
    }

    /// Adds `ΔA_i` into `out[i]`.
    fn add_laplacian(&self, x: &[T], out: &mut [Cplx<T>]) {
        match self {
            Self::Directional { bump, direction } => {
                let l = bump.laplacian(x);
                for (o, &d) in out.iter_mut().zip(direction) {
                    *o += l * d;
                }
            }
            Self::Partial {
                bump,
                axis,
                component,
            } => {
                out[*component] += bump.gradient_of_laplacian(x)[*axis];
            }
            Self::Swirl { bump, plane } => {
                let [i, j] = *plane;
                let l = bump.laplacian(x);
                let g = bump.gradient(x);
                let two = T::one() + T::one();
                out[i] += l * (x[j] - bump.center[j]) + g[j] * two;
                out[j] -= l * (x[i] - bump.center[i]) + g[i] * two;
            }
            Self::Gauge { gauge, factor } => {
                for (o, g) in out.iter_mut().zip(gauge.gradient_of_laplacian(x)) {
                    *o += g * *factor;
                }
            }
        }
    }
}

fn validate_bump<T: Real>(bump: &Bump<T>, n: usize) -> Result<()> {
    if bump.center.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bump.center.len(),
        });
    }
    Bump::new(bump.center.clone(), bump.radius, bump.amplitude).map(|_| ())
}

/// Sum of [`VectorTerm`]s in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
#[serde(deny_unknown_fields)]
pub struct VectorField<T> {
    pub n: usize,
    pub terms: Vec<VectorTerm<T>>,
}

impl<T: Real> VectorField<T> {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: vec![] }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.n)?;
        self.terms.iter().try_for_each(|t| t.validate(self.n))
    }

    pub fn support_radius(&self) -> T {
        self.terms
            .iter()
            .map(VectorTerm::support_radius)
            .fold(T::zero(), T::max)
    }

    fn outside(&self, x: &[T]) -> bool {
        self.terms.is_empty() || norm(x) >= self.support_radius()
    }

    pub fn value(&self, x: &[T]) -> Vec<Cplx<T>> {
        let mut out = vec![czero(); self.n];
        if !self.outside(x) {
            self.terms.iter().for_each(|t| t.add_value(x, &mut out));
        }
        out
    }

    /// `J[i][k] = ∂_k A_i`.
    pub fn jacobian(&self, x: &[T]) -> Vec<Vec<Cplx<T>>> {
        let mut out = vec![vec![czero(); self.n]; self.n];
        if !self.outside(x) {
            self.terms.iter().for_each(|t| t.add_jacobian(x, &mut out));
        }
        out
    }

    pub fn divergence(&self, x: &[T]) -> Cplx<T> {
        let j = self.jacobian(x);
        (0..self.n).fold(czero(), |s, i| s + j[i][i])
    }

    /// Componentwise Laplacian `ΔA_i`.
    pub fn laplacian(&self, x: &[T]) -> Vec<Cplx<T>> {
        let mut out = vec![czero(); self.n];
        if !self.outside(x) {
            self.terms.iter().for_each(|t| t.add_laplacian(x, &mut out));
        }
        out
    }

    pub fn scaled(&self, k: Cplx<T>) -> Self {
        Self {
            n: self.n,
            terms: self.terms.iter().map(|t| t.scaled(k)).collect(),
        }
    }

    fn rotated(&self, positive: bool) -> Self {
        let f = if positive { times_i } else { times_neg_i };
        Self {
            n: self.n,
            terms: self.terms.iter().map(|t| t.map_amplitude(f)).collect(),
        }
    }

    /// `A·A + D·A = A·A − i ∇·A`.
    pub fn coupling(&self, x: &[T]) -> Cplx<T> {
        if self.outside(x) {
            return czero();
        }
        let a = self.value(x);
        let sq = a.iter().fold(czero::<T>(), |s, &v| s + v * v);
        sq + times_neg_i(self.divergence(x))
    }
}

/// One summand of a scalar potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
#[serde(bound = "T: Real")]
pub enum ScalarTerm<T> {
    Bump { bump: Bump<T> },
    /// `scale · (A·A + D·A)`: the term linking the magnetic and drift forms.
    Coupling { field: VectorField<T>, scale: T },
}

impl<T: Real> ScalarTerm<T> {
    fn support_radius(&self) -> T {
        match self {
            Self::Bump { bump } => bump.support_radius(),
            Self::Coupling { field, .. } => field.support_radius(),
        }
    }

    fn value(&self, x: &[T]) -> Cplx<T> {
        match self {
            Self::Bump { bump } => bump.value(x),
            Self::Coupling { field, scale } => field.coupling(x) * *scale,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::Bump { bump } => validate_bump(bump, n),
            Self::Coupling { field, .. } => {
                if field.n != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: field.n,
                    });
                }
                field.validate()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
#[serde(deny_unknown_fields)]
pub struct ScalarField<T> {
    pub n: usize,
    pub terms: Vec<ScalarTerm<T>>,
}

impl<T: Real> ScalarField<T> {
    pub fn zero(n: usize) -> Self {
        Self { n, terms: vec![] }
    }

    pub fn support_radius(&self) -> T {
        self.terms
            .iter()
            .map(ScalarTerm::support_radius)
            .fold(T::zero(), T::max)
    }

    pub fn value(&self, x: &[T]) -> Cplx<T> {
        if self.terms.is_empty() || norm(x) >= self.support_radius() {
            return czero();
        }
        self.terms.iter().fold(czero(), |s, t| s + t.value(x))
    }
}

/// A potential pair supported in the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
#[serde(try_from = "SpecDoc<T>")]
pub struct FieldSpec<T> {
    form: Form,
    vector: VectorField<T>,
    scalar: ScalarField<T>,
    smoothness: Smoothness,
}

#[derive(Deserialize)]
#[serde(bound = "T: Real")]
#[serde(deny_unknown_fields)]
struct SpecDoc<T> {
    form: Form,
    vector: VectorField<T>,
    scalar: ScalarField<T>,
    smoothness: Smoothness,
}

impl<T: Real> TryFrom<SpecDoc<T>> for FieldSpec<T> {
    type Error = Error;

    fn try_from(d: SpecDoc<T>) -> Result<Self> {
        let mut s = Self::new(d.form, d.vector, d.scalar)?;
        s.smoothness = d.smoothness;
        Ok(s)
    }
}

impl<T: Real> FieldSpec<T> {
    pub fn new(form: Form, vector: VectorField<T>, scalar: ScalarField<T>) -> Result<Self> {
        vector.validate()?;
        if scalar.n != vector.n {
            return Err(Error::DimensionMismatch {
                expected: vector.n,
                got: scalar.n,
            });
        }
        scalar.terms.iter().try_for_each(|t| t.validate(vector.n))?;
        let spec = Self {
            form,
            vector,
            scalar,
            smoothness: Smoothness::Infinite,
        };
        let r = spec.support_radius();
        if r > T::one() + crate::num::c(1e-12) {
            return Err(Error::SupportLeavesBall {
                center_norm: r.to_f64_lossy(),
                radius: 0.0,
            });
        }
        Ok(spec)
    }

    pub fn zero(n: usize, form: Form) -> Result<Self> {
        Self::new(form, VectorField::zero(n), ScalarField::zero(n))
    }

    pub fn from_terms(
        n: usize,
        form: Form,
        vector: Vec<VectorTerm<T>>,
        scalar: Vec<ScalarTerm<T>>,
    ) -> Result<Self> {
        Self::new(
            form,
            VectorField { n, terms: vector },
            ScalarField { n, terms: scalar },
        )
    }

    pub fn dim(&self) -> usize {
        self.vector.n
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn vector_part(&self) -> &VectorField<T> {
        &self.vector
    }

    pub fn scalar_part(&self) -> &ScalarField<T> {
        &self.scalar
    }

    /// Radius outside of which both parts vanish identically.
    pub fn support_radius(&self) -> T {
        self.vector.support_radius().max(self.scalar.support_radius())
    }

    pub fn is_zero(&self) -> bool {
        self.vector.terms.is_empty() && self.scalar.terms.is_empty()
    }

    pub fn vector_at(&self, x: &[T]) -> Vec<Cplx<T>> {
        self.vector.value(x)
    }

    pub fn scalar_at(&self, x: &[T]) -> Cplx<T> {
        self.scalar.value(x)
    }

    pub fn with_scalar_term(&self, term: ScalarTerm<T>) -> Result<Self> {
        let mut scalar = self.scalar.clone();
        scalar.terms.push(term);
        Self::new(self.form, self.vector.clone(), scalar)
    }

    pub fn with_vector_term(&self, term: VectorTerm<T>) -> Result<Self> {
        let mut vector = self.vector.clone();
        vector.terms.push(term);
        Self::new(self.form, vector, self.scalar.clone())
    }

    pub fn require_form(&self, form: Form) -> Result<()> {
        if self.form == form {
            Ok(())
        } else {
            Err(Error::WrongForm {
                expected: match form {
                    Form::Magnetic => "magnetic",
                    Form::Drift => "drift",
                },
            })
        }
    }

    /// Drift form of this pair (a clone when already in drift form).
    pub fn to_drift(&self) -> Self {
        match self.form {
            Form::Drift => self.clone(),
            Form::Magnetic => convert_form(self),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("field spec serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Switches between magnetic and drift form.
///
/// Magnetic `(A, q)` becomes `W = −iA`, `V = q + (A·A + D·A)`. The reverse
/// direction removes a trailing coupling term built from the same `A` when
/// present, so a round trip reproduces the original description exactly.
pub fn convert_form<T: Real>(spec: &FieldSpec<T>) -> FieldSpec<T> {
    match spec.form {
        Form::Magnetic => {
            let mut scalar = spec.scalar.clone();
            scalar.terms.push(ScalarTerm::Coupling {
                field: spec.vector.clone(),
                scale: T::one(),
            });
            FieldSpec {
                form: Form::Drift,
                vector: spec.vector.rotated(false),
                scalar,
                smoothness: spec.smoothness,
            }
        }
        Form::Drift => {
            let a = spec.vector.rotated(true);
            let mut scalar = spec.scalar.clone();
            let cancels = matches!(
                scalar.terms.last(),
                Some(ScalarTerm::Coupling { field, scale }) if *field == a && *scale == T::one()
            );
            if cancels {
                scalar.terms.pop();
            } else {
                scalar.terms.push(ScalarTerm::Coupling {
                    field: a.clone(),
                    scale: -T::one(),
                });
            }
            FieldSpec {
                form: Form::Magnetic,
                vector: a,
                scalar,
                smoothness: spec.smoothness,
            }
        }
    }
}

/// What a single bump contributes to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound = "T: Real")]
pub enum BumpKind<T> {
    Scalar,
    Vector { direction: Vec<T> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BumpSpec<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub amplitude: Cplx<T>,
    #[serde(flatten)]
    pub kind: BumpKind<T>,
}

/// Sum of standard bumps; scalar bumps feed the scalar part, vector bumps
/// the vector part along their direction.
pub fn make_bump_potential<T: Real>(
    n: usize,
    form: Form,
    bumps: &[BumpSpec<T>],
) -> Result<FieldSpec<T>> {
    let mut vector = Vec::new();
    let mut scalar = Vec::new();
    for b in bumps {
        let bump = Bump::new(b.center.clone(), b.radius, b.amplitude)?;
        match &b.kind {
            BumpKind::Scalar => scalar.push(ScalarTerm::Bump { bump }),
            BumpKind::Vector { direction } => vector.push(VectorTerm::Directional {
                bump,
                direction: direction.clone(),
            }),
        }
    }
    FieldSpec::from_terms(n, form, vector, scalar)
}

/// Deterministic sample points of the closed unit ball on a cube lattice of
/// the given spacing, in lexicographic order.
pub fn ball_samples<T: Real>(n: usize, spacing: T) -> Vec<Vec<T>> {
    let m = (T::one() / spacing).floor().to_usize().unwrap_or(1);
    let per = 2 * m + 1;
    let total = per.pow(n as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let mut x = vec![T::zero(); n];
        for slot in x.iter_mut().rev() {
            let i = rem % per;
            rem /= per;
            *slot = spacing * (T::of_usize(i) - T::of_usize(m));
        }
        if norm(&x) <= T::one() {
            out.push(x);
        }
    }
    out
}

/// Sup norms `(‖vector part‖∞, ‖scalar part‖∞)` over a `per_axis^n` lattice
/// covering `[−1, 1]^n`, restricted to the unit ball. The vector norm is the
/// Euclidean length of the complex vector.
pub fn sup_norms<T: Real>(spec: &FieldSpec<T>, per_axis: usize) -> (T, T) {
    let n = spec.dim();
    let step = (T::one() + T::one()) / T::of_usize(per_axis.max(2) - 1);
    let total = per_axis.pow(n as u32);
    let mut va = T::zero();
    let mut sc = T::zero();
    let mut x = vec![T::zero(); n];
    for idx in 0..total {
        let mut rem = idx;
        for slot in x.iter_mut().rev() {
            *slot = -T::one() + step * T::of_usize(rem % per_axis);
            rem /= per_axis;
        }
        if norm(&x) > T::one() {
            continue;
        }
        let v = spec.vector_at(&x);
        let vn = v.iter().fold(T::zero(), |s, z| s + z.norm_sqr()).sqrt();
        va = va.max(vn);
        sc = sc.max(spec.scalar_at(&x).norm());
    }
    (va, sc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::creal;

    fn mixed() -> FieldSpec<f64> {
        FieldSpec::from_terms(
            2,
            Form::Magnetic,
            vec![
                VectorTerm::Directional {
                    bump: Bump::new(vec![0.2, 0.1], 0.5, Cplx::new(0.7, 0.2)).unwrap(),
                    direction: vec![0.6, -0.8],
                },
                VectorTerm::Swirl {
                    bump: real_bump(vec![-0.1, 0.0], 0.6, 1.1).unwrap(),
                    plane: [0, 1],
                },
                VectorTerm::Partial {
                    bump: real_bump(vec![0.0, -0.3], 0.4, 0.5).unwrap(),
                    axis: 0,
                    component: 1,
                },
            ],
            vec![ScalarTerm::Bump {
                bump: real_bump(vec![0.1, 0.1], 0.5, -0.3).unwrap(),
            }],
        )
        .unwrap()
    }

    #[test]
    fn empty_list_is_zero_field() {
        let s = make_bump_potential::<f64>(2, Form::Drift, &[]).unwrap();
        assert!(s.is_zero());
        assert_eq!(s.scalar_at(&[0.0, 0.0]), czero());
        assert_eq!(s.support_radius(), 0.0);
    }

    #[test]
    fn single_scalar_bump_value() {
        let s = make_bump_potential(
            2,
            Form::Magnetic,
            &[BumpSpec {
                center: vec![0.0, 0.0],
                radius: 0.5,
                amplitude: creal(1.0),
                kind: BumpKind::Scalar,
            }],
        )
        .unwrap();
        let v: f64 = s.scalar_at(&[0.0, 0.0]).re;
        assert!((v - 0.36787944117144233).abs() < 1e-15);
        assert_eq!(s.scalar_at(&[0.0, 0.5]), czero());
    }

    #[test]
    fn jacobian_and_laplacian_match_differences() {
        let s = mixed();
        let v = s.vector_part();
        let h = 1e-5;
        for x in [[0.25, 0.05], [-0.2, 0.1], [0.1, -0.35]] {
            let j = v.jacobian(&x);
            let lap = v.laplacian(&x);
            let mut fd_lap = vec![czero::<f64>(); 2];
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let (ap, am, a0) = (v.value(&xp), v.value(&xm), v.value(&x));
                for i in 0..2 {
                    let fd = (ap[i] - am[i]) / (2.0 * h);
                    assert!((fd - j[i][k]).norm() < 1e-7);
                    fd_lap[i] += (ap[i] - a0[i] * 2.0 + am[i]) / (h * h);
                }
            }
            for i in 0..2 {
                assert!((fd_lap[i] - lap[i]).norm() < 1e-3 * (1.0 + lap[i].norm()));
            }
        }
    }

    #[test]
    fn conversion_round_trip_is_exact() {
        let s = mixed();
        let d = convert_form(&s);
        assert_eq!(d.form(), Form::Drift);
        let back = convert_form(&d);
        assert_eq!(back, s);
        for x in ball_samples(2, 0.1) {
            let (a, b) = (s.vector_at(&x), back.vector_at(&x));
            for i in 0..2 {
                assert!((a[i] - b[i]).norm() <= 1e-10);
            }
            assert!((s.scalar_at(&x) - back.scalar_at(&x)).norm() <= 1e-10);
        }
    }

    #[test]
    fn drift_potential_matches_definition() {
        let s = mixed();
        let d = convert_form(&s);
        let x = [0.15, -0.05];
        let a = s.vector_at(&x);
        let w = d.vector_at(&x);
        for i in 0..2 {
            assert!((w[i] - a[i] * Cplx::new(0.0, -1.0)).norm() < 1e-15);
        }
        // divergence by the five-point centered stencil
        let h = 1e-4;
        let mut div = czero::<f64>();
        for k in 0..2 {
            let at = |off: f64| {
                let mut p = x;
                p[k] += off * h;
                s.vector_at(&p)[k]
            };
            div += (at(-2.0) - at(-1.0) * 8.0 + at(1.0) * 8.0 - at(2.0)) / (12.0 * h);
        }
        let expect = a[0] * a[0] + a[1] * a[1] + div * Cplx::new(0.0, -1.0) + s.scalar_at(&x);
        let err = (d.scalar_at(&x) - expect).norm();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn json_round_trip_is_exact() {
        let s = mixed();
        let text = s.to_json();
        let back = FieldSpec::<f64>::from_json(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn escaping_spec_rejected_on_load() {
        let s = mixed();
        let text = s.to_json().replacen("0.5", "0.95", 1);
        assert!(FieldSpec::<f64>::from_json(&text).is_err());
    }

    #[test]
    fn regularity_index_values() {
        assert_eq!(regularity_index(2), 13);
        assert_eq!(regularity_index(3), 16);
    }

    #[test]
    fn ball_samples_are_inside() {
        let pts = ball_samples::<f64>(2, 0.25);
        assert!(pts.iter().all(|p| norm(p) <= 1.0));
        assert!(pts.contains(&vec![0.0, 1.0]));
    }
}
