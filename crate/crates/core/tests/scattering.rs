use proptest::prelude::*;

use scatlab::error::Error;
use scatlab::fields::{real_bump, FieldSpec, Form, ScalarTerm, VectorTerm};
use scatlab::geometry::{sample_boundary_circle, Direction};
use scatlab::num::Cplx;
use scatlab::pwe::WaveKind;
use scatlab::scattering::{
    far_field, far_fields, fourier_trace, r_zero_sampled, relative_difference, transform, FarFieldBudget, Window,
};
use scatlab::traces::{BoundaryTrace, TraceMeta};
use scatlab::wavesolver::Formulation;

fn e1() -> Direction<f64> {
    Direction::axis(2, 0, true).unwrap()
}

fn thetas(k: usize) -> Vec<Direction<f64>> {
    (0..k)
        .map(|j| {
            let a = std::f64::consts::TAU * j as f64 / k as f64;
            Direction::new(vec![a.cos(), a.sin()]).unwrap()
        })
        .collect()
}

fn coarse_budget() -> FarFieldBudget<f64> {
    FarFieldBudget {
        h: 1.0 / 16.0,
        tail: 1.0,
        shift: 0.0,
        formulation: Formulation::SmoothPart,
    }
}

#[test]
fn free_space_has_no_far_field() {
    let zero = FieldSpec::zero(2, Form::Magnetic).unwrap();
    let freqs = [std::f64::consts::PI, 2.0 * std::f64::consts::PI];
    let ff = far_field(&zero, &e1(), &freqs, &thetas(8), 1.5, &coarse_budget()).unwrap();
    assert!(ff.amplitude.iter().all(|a| a.norm() == 0.0));
}

#[test]
fn far_field_separates_potentials_and_rejects_small_radii() {
    let spec = |amp: f64| {
        FieldSpec::from_terms(
            2,
            Form::Magnetic,
            vec![],
            vec![ScalarTerm::Bump {
                bump: real_bump(vec![0.0, 0.1], 0.6, amp).unwrap(),
            }],
        )
        .unwrap()
    };
    let freqs = [std::f64::consts::PI, 2.0 * std::f64::consts::PI];
    let a = far_fields(&spec(1.0), &e1(), &freqs, &thetas(8), &[1.5, 2.0], &coarse_budget()).unwrap();
    let b = far_fields(&spec(2.0), &e1(), &freqs, &thetas(8), &[1.5, 2.0], &coarse_budget()).unwrap();
    assert_eq!(a.len(), 2);
    for (x, y) in a.iter().zip(&b) {
        assert!(x.amplitude.iter().any(|v| v.norm() > 1e-6));
        assert!(relative_difference(x, y).unwrap() > 0.1);
        assert_eq!(relative_difference(x, x).unwrap(), 0.0);
    }
    assert!(far_field(&spec(1.0), &e1(), &freqs, &thetas(4), 0.9, &coarse_budget()).is_err());
}

/// `f(t) = exp(−4(t − 1)²)`, with `f'` in closed form.
fn gaussian(t: f64) -> (f64, f64) {
    let f = (-4.0 * (t - 1.0) * (t - 1.0)).exp();
    (f, -8.0 * (t - 1.0) * f)
}

#[test]
fn gaussian_transform_matches_closed_form() {
    let (t0, dt, m) = (-3.0, 1e-3, 10_001);
    let samples: Vec<Cplx<f64>> = (0..m).map(|k| Cplx::new(gaussian(t0 + dt * k as f64).0, 0.0)).collect();
    let w = Window::new(t0, t0 + dt * (m - 1) as f64, 0.0).unwrap();
    for lambda in [1.0, 3.0, 6.0] {
        let got = transform(t0, dt, &samples, lambda, &w);
        let want = Cplx::from_polar((std::f64::consts::PI / 4.0).sqrt() * (-lambda * lambda / 16.0).exp(), lambda);
        assert!((got - want).norm() <= 1e-10, "{lambda}: {got} vs {want}");
    }
}

proptest! {
    #[test]
    fn derivative_rule_with_taper_ramp(lambda in 0.5..12.0f64, mu in 0.0..3.0f64, end in 2.0..4.0f64) {
        // the window ends while the signal is still alive, so the ramp term matters
        let (t0, dt) = (-1.0, 1e-3);
        let m = ((end - t0) / dt).round() as usize + 1;
        let w = Window::new(t0, t0 + dt * (m - 1) as f64, mu).unwrap();
        let times: Vec<f64> = (0..m).map(|k| t0 + dt * k as f64).collect();
        let slow = |t: f64| (gaussian(t).0 + 0.3 * (-0.2 * t * t).exp(), gaussian(t).1 - 0.12 * t * (-0.2 * t * t).exp());
        let f: Vec<Cplx<f64>> = times.iter().map(|&t| Cplx::new(slow(t).0, 0.0)).collect();
        let df: Vec<Cplx<f64>> = times.iter().map(|&t| Cplx::new(slow(t).1, 0.0)).collect();
        let kappa = Cplx::new(lambda, mu);
        let ramp: Cplx<f64> = times
            .iter()
            .zip(&f)
            .enumerate()
            .map(|(k, (&t, v))| {
                let end = if k == 0 || k + 1 == m { 0.5 } else { 1.0 };
                v * (Cplx::<f64>::i() * kappa * t).exp() * (end * w.taper_slope(t))
            })
            .sum::<Cplx<f64>>()
            * dt;
        let left = transform(t0, dt, &df, lambda, &w);
        let right = -Cplx::<f64>::i() * kappa * transform(t0, dt, &f, lambda, &w) - ramp;
        // the boundary term at t0 is part of the identity too
        let start = f[0] * (Cplx::<f64>::i() * kappa * t0).exp();
        prop_assert!((left - (right - start)).norm() <= 1e-4 * (1.0 + left.norm()), "{} vs {}", left, right - start);
    }
}

#[test]
fn unresolvable_frequency_is_reported() {
    let pts = sample_boundary_circle(2, std::f64::consts::PI / 2.0).unwrap();
    let nt = 11;
    let meta = TraceMeta {
        formulation: Formulation::Scattered,
        kind: WaveKind::Delta,
        epsilon: 0.1,
        h: 0.025,
        spec_hash: "synthetic".into(),
    };
    let values = vec![Cplx::new(0.0, 0.0); pts.len() * nt];
    let trace = BoundaryTrace::new(pts, 0.0, 0.1, nt, values, e1(), meta).unwrap();
    // one unit of record resolves nothing below 2π
    assert!(matches!(
        fourier_trace(&trace, &[1.0], 0.0),
        Err(Error::UnresolvableFrequency { .. })
    ));
    assert!(fourier_trace(&trace, &[7.0], 0.0).is_ok());
}

fn centred(vector: bool, amp: f64) -> FieldSpec<f64> {
    let bump = real_bump(vec![0.0, 0.0], 0.5, amp).unwrap();
    let (v, q) = if vector {
        (vec![VectorTerm::Directional { bump, direction: vec![0.6, 0.8] }], vec![])
    } else {
        (vec![], vec![ScalarTerm::Bump { bump }])
    };
    FieldSpec::from_terms(2, Form::Magnetic, v, q).unwrap()
}

#[test]
fn r_zero_of_known_potentials() {
    // peak value amp/e at the centre, which the odd sampling grid hits
    let e = std::f64::consts::E;
    let q = centred(false, 4.0 * e);
    let a = centred(true, e);
    assert!((r_zero_sampled(&[q.clone()], 401).unwrap() - 2.0).abs() <= 1e-12);
    assert!((r_zero_sampled(&[a.clone()], 401).unwrap() - 2f64.sqrt()).abs() <= 1e-12);
    // the maximum over the pair, not a sum
    assert!((r_zero_sampled(&[q, a], 401).unwrap() - 2.0).abs() <= 1e-12);
}
