use scatlab::fields::{real_bump, FieldSpec, Form, ScalarTerm, VectorTerm};
use scatlab::geometry::{Direction, Lattice};
use scatlab::num::{czero, Cplx};
use scatlab::pwe::{compute_f, compute_psi, expand, table_lattice, WaveKind};
use scatlab::quadrature::adaptive_simpson_c;

fn drift_pair(v_amp: f64) -> FieldSpec<f64> {
    FieldSpec::from_terms(
        2,
        Form::Drift,
        vec![VectorTerm::Directional {
            bump: real_bump(vec![0.1, 0.05], 0.55, 0.6).unwrap(),
            direction: vec![0.8, 0.6],
        }],
        vec![ScalarTerm::Bump {
            bump: real_bump(vec![-0.1, -0.1], 0.5, v_amp).unwrap(),
        }],
    )
    .unwrap()
}

fn e1() -> Direction<f64> {
    Direction::new(vec![1.0, 0.0]).unwrap()
}

#[test]
fn heaviside_table_for_scalar_potential() {
    let b = real_bump(vec![0.0, 0.0], 0.6, 1.5).unwrap();
    let spec =
        FieldSpec::from_terms(2, Form::Drift, vec![], vec![ScalarTerm::Bump { bump: b.clone() }]).unwrap();
    let lat = table_lattice(2, 1.0 / 16.0).unwrap();
    let t = expand(&spec, &e1(), &lat, 1, WaveKind::Heaviside).unwrap();
    assert!(t.coeff(-1).iter().all(|v| *v == czero()));
    assert!(t.coeff(0).iter().all(|v| (*v - 1.0).norm() < 1e-15));
    for i in (0..lat.len()).step_by(37) {
        let x = lat.point(i);
        let oracle = adaptive_simpson_c(|s| b.value(&[x[0] + s, x[1]]), -3.0, 0.0, 1e-13) * -0.5;
        assert!((t.coeff(1)[i] - oracle).norm() < 1e-8);
    }
}

#[test]
fn delta_leading_coefficients_match_pointwise_routines() {
    let spec = drift_pair(0.7);
    let lat = table_lattice(2, 1.0 / 16.0).unwrap();
    let t = expand(&spec, &e1(), &lat, 0, WaveKind::Delta).unwrap();
    let psi = compute_psi(&spec, &e1(), &lat).unwrap();
    let f = compute_f(&spec, &e1(), &lat, &psi).unwrap();
    for i in 0..lat.len() {
        assert!((t.coeff(-1)[i] - psi[i].exp()).norm() <= 1e-10);
        assert!((t.coeff(0)[i] - f[i]).norm() <= 1e-9);
    }
}

#[test]
fn upstream_values_are_exact() {
    let spec = drift_pair(0.7);
    let lat = table_lattice(2, 1.0 / 16.0).unwrap();
    let t = expand(&spec, &e1(), &lat, 2, WaveKind::Delta).unwrap();
    for i in 0..lat.len() {
        if lat.point(i)[0] < -1.0 {
            assert_eq!(t.coeff(-1)[i], Cplx::new(1.0, 0.0));
            for j in 0..=2 {
                assert_eq!(t.coeff(j)[i], czero());
            }
        }
    }
}

#[test]
fn leading_trace_ignores_scalar_part() {
    let lat = table_lattice(2, 1.0 / 16.0).unwrap();
    let a = expand(&drift_pair(0.7), &e1(), &lat, 1, WaveKind::Heaviside).unwrap();
    let b = expand(&drift_pair(-0.4), &e1(), &lat, 1, WaveKind::Heaviside).unwrap();
    assert_eq!(a.psi, b.psi);
    assert_eq!(a.coeff(0), b.coeff(0));
    assert_ne!(a.coeff(1), b.coeff(1));
}

/// Largest `|(∂_z − ω·W) a_{k+1} + L a_k / (2(k+1))|` over interior nodes in
/// `|x| ≤ 0.7`, derivatives by centered differences. The edge of the bump
/// supports is excluded: the profile there is too steep for these spacings to
/// be in the asymptotic regime.
fn transport_residual(spec: &FieldSpec<f64>, lat: &Lattice<f64>, k: isize) -> f64 {
    let t = expand(spec, &e1(), lat, 2, WaveKind::Delta).unwrap();
    let (ak, ak1) = (t.coeff(k), t.coeff(k + 1));
    let h = lat.h();
    let st = lat.strides();
    let mut worst: f64 = 0.0;
    for i in 0..lat.len() {
        let x = lat.point(i);
        if x[0] * x[0] + x[1] * x[1] > 0.49 {
            continue;
        }
        let w = spec.vector_at(&x);
        let v = spec.scalar_at(&x);
        let dz = (ak1[i + st[0]] - ak1[i - st[0]]) / (2.0 * h);
        let mut lap = czero::<f64>();
        let mut grad = [czero::<f64>(); 2];
        for d in 0..2 {
            lap += (ak[i + st[d]] + ak[i - st[d]] - ak[i] * 2.0) / (h * h);
            grad[d] = (ak[i + st[d]] - ak[i - st[d]]) / (2.0 * h);
        }
        let l = -lap + (w[0] * grad[0] + w[1] * grad[1]) * 2.0 + v * ak[i];
        let r = dz - w[0] * ak1[i] + l / (2.0 * (k + 1) as f64);
        worst = worst.max(r.norm());
    }
    worst
}

fn wide_pair() -> FieldSpec<f64> {
    FieldSpec::from_terms(
        2,
        Form::Drift,
        vec![VectorTerm::Directional {
            bump: real_bump(vec![0.05, 0.0], 0.9, 0.6).unwrap(),
            direction: vec![0.8, 0.6],
        }],
        vec![ScalarTerm::Bump {
            bump: real_bump(vec![0.0, -0.05], 0.9, 0.7).unwrap(),
        }],
    )
    .unwrap()
}

#[test]
fn transport_residual_is_second_order() {
    let spec = wide_pair();
    for k in [0isize, 1] {
        let coarse = transport_residual(&spec, &table_lattice(2, 1.0 / 32.0).unwrap(), k);
        let fine = transport_residual(&spec, &table_lattice(2, 1.0 / 64.0).unwrap(), k);
        let rate = (coarse / fine).log2();
        eprintln!("k={k}: rate {rate}");
        assert!(rate > 1.7, "k={k}: {coarse:e} -> {fine:e}, rate {rate}");
    }
}
