use proptest::prelude::*;

use scatlab::fields::{gauge_transform, real_bump, FieldSpec, Form, GaugeFunction, ScalarTerm, VectorTerm};
use scatlab::geometry::{sample_boundary_circle, BoundaryPoint, Direction, Lattice, SimGrid};
use scatlab::num::Cplx;
use scatlab::pwe::{psi_at, ray_step, WaveKind};
use scatlab::traces::{
    discrepancy, integral_identity_residual, time_derivative_residual, total_scale, BoundaryTrace, NormKind,
    PointSampler, TraceMeta,
};
use scatlab::wavesolver::{run, Formulation, MollifiedIncident, TraceRequest};

fn axis(n: usize, pos: bool) -> Direction<f64> {
    Direction::axis(n, 0, pos).unwrap()
}

fn smooth(x: &[f64]) -> Cplx<f64> {
    Cplx::new((1.3 * x[0]).sin() * (0.7 * x[1]).cos(), x[0] * x[1])
}

#[test]
fn cubic_sampling_is_fourth_order() {
    let x = [0.3141, -0.2718];
    let err = |h: f64| {
        let lat = Lattice::covering(2, h, 1.0).unwrap();
        let values: Vec<Cplx<f64>> = (0..lat.len()).map(|i| smooth(&lat.point(i))).collect();
        (PointSampler::new(&lat, &x).unwrap().eval(&values) - smooth(&x)).norm()
    };
    // the offset inside the cell moves with h, so the ratio is only roughly 16
    let (coarse, fine) = (err(0.1), err(0.025));
    let order = (coarse / fine).log2() / 2.0;
    assert!(order > 3.5, "order {order}");
}

#[test]
fn sampler_reproduces_nodes() {
    let lat = Lattice::covering(2, 0.125, 1.0).unwrap();
    let values: Vec<Cplx<f64>> = (0..lat.len()).map(|i| smooth(&lat.point(i))).collect();
    for i in (0..lat.len()).step_by(37) {
        let x = lat.point(i);
        if let Ok(s) = PointSampler::new(&lat, &x) {
            assert!((s.eval(&values) - values[i]).norm() <= 1e-14);
        }
    }
}

fn line_spec() -> FieldSpec<f64> {
    FieldSpec::from_terms(
        1,
        Form::Drift,
        vec![VectorTerm::Directional {
            bump: real_bump(vec![-0.1], 0.7, 0.6).unwrap(),
            direction: vec![1.0],
        }],
        vec![ScalarTerm::Bump {
            bump: real_bump(vec![0.1], 0.6, 1.5).unwrap(),
        }],
    )
    .unwrap()
}

fn ends() -> Vec<BoundaryPoint<f64>> {
    [-1.0, 1.0]
        .map(|x| BoundaryPoint {
            x: vec![x],
            angles: vec![],
        })
        .to_vec()
}

fn line_run(spec: &FieldSpec<f64>, omega: &Direction<f64>, kind: WaveKind, h: f64) -> BoundaryTrace<f64> {
    let eps = 4.0 * h;
    let grid = SimGrid::for_window(1, h, 2.5, eps).unwrap();
    let inc = MollifiedIncident::new(kind, eps).unwrap();
    run(spec, omega, &inc, Formulation::SmoothPart, &grid, &TraceRequest::new(ends())).unwrap().1
}

#[test]
fn heaviside_trace_integrates_delta_trace() {
    let h = 1.0 / 128.0;
    let spec = line_spec();
    let omega = axis(1, true);
    let th = line_run(&spec, &omega, WaveKind::Heaviside, h);
    let td = line_run(&spec, &omega, WaveKind::Delta, h);
    let step = ray_step(h, spec.support_radius());
    let psi: Vec<Cplx<f64>> = ends().iter().map(|p| psi_at(&spec, &omega, &p.x, step)).collect();
    let scale = total_scale(&th).unwrap();
    let identity = integral_identity_residual(&th, &td, &psi).unwrap() / scale;
    assert!(identity <= 5e-3, "identity {identity:e}");
    let derivative = time_derivative_residual(&th.to_scattered().unwrap(), &td.to_scattered().unwrap()).unwrap();
    assert!(derivative <= 5e-3, "derivative {derivative:e}");

    // a δ-wave from the opposite side must not satisfy the identity
    let other = line_run(&spec, &axis(1, false), WaveKind::Delta, h);
    let mismatched = integral_identity_residual(&th, &other, &psi).unwrap() / scale;
    assert!(mismatched > 0.1, "mismatched {mismatched:e}");
}

#[test]
fn gauge_pair_has_matching_traces() {
    let h = 1.0 / 256.0;
    let a = FieldSpec::from_terms(
        1,
        Form::Magnetic,
        vec![VectorTerm::Directional {
            bump: real_bump(vec![0.1], 0.6, 0.5).unwrap(),
            direction: vec![1.0],
        }],
        vec![ScalarTerm::Bump {
            bump: real_bump(vec![-0.1], 0.6, 1.0).unwrap(),
        }],
    )
    .unwrap();
    let gauge = GaugeFunction::Bump {
        bump: real_bump(vec![0.0], 0.8, 0.7).unwrap(),
    };
    let b = gauge_transform(&a, &gauge).unwrap();
    let q = a.with_scalar_term(ScalarTerm::Bump {
        bump: real_bump(vec![0.2], 0.5, 0.3).unwrap(),
    })
    .unwrap();
    for kind in [WaveKind::Heaviside, WaveKind::Delta] {
        let ta = line_run(&a, &axis(1, true), kind, h);
        let tb = line_run(&b, &axis(1, true), kind, h);
        let tq = line_run(&q, &axis(1, true), kind, h);
        let (sa, sb, sq) = (
            ta.to_scattered().unwrap(),
            tb.to_scattered().unwrap(),
            tq.to_scattered().unwrap(),
        );
        let same = discrepancy(&sa, &sb, NormKind::L2).unwrap();
        let other = discrepancy(&sa, &sq, NormKind::L2).unwrap();
        assert!(same <= 1e-2, "{kind:?}: gauge pair {same:e}");
        assert!(other >= 10.0 * same, "{kind:?}: {other:e} vs {same:e}");
    }
}

fn synthetic(values: Vec<Cplx<f64>>) -> BoundaryTrace<f64> {
    let pts = sample_boundary_circle(2, std::f64::consts::PI / 2.0).unwrap();
    let nt = values.len() / pts.len();
    let meta = TraceMeta {
        formulation: Formulation::Scattered,
        kind: WaveKind::Heaviside,
        epsilon: 0.1,
        h: 0.025,
        spec_hash: "synthetic".into(),
    };
    BoundaryTrace::new(pts, -1.5, 0.05, nt, values, axis(2, true), meta).unwrap()
}

fn trace_values() -> impl Strategy<Value = Vec<Cplx<f64>>> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 4 * 12).prop_map(|v| {
        v.into_iter().map(|(re, im)| Cplx::new(re, im)).collect()
    })
}

proptest! {
    #[test]
    fn discrepancy_is_symmetric_and_scale_free(a in trace_values(), b in trace_values(), s in 0.1..10.0f64) {
        let (ta, tb) = (synthetic(a.clone()), synthetic(b.clone()));
        for kind in [NormKind::L2, NormKind::Linf] {
            let d = discrepancy(&ta, &tb, kind).unwrap();
            prop_assert!((d - discrepancy(&tb, &ta, kind).unwrap()).abs() <= 1e-14);
            prop_assert!((0.0..=2.0).contains(&d));
            let scaled = |v: &[Cplx<f64>]| synthetic(v.iter().map(|z| z * s).collect());
            let ds = discrepancy(&scaled(&a), &scaled(&b), kind).unwrap();
            prop_assert!((d - ds).abs() <= 1e-12 * (1.0 + d));
            prop_assert_eq!(discrepancy(&ta, &ta, kind).unwrap(), 0.0);
        }
    }
}
