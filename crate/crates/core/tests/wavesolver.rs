use scatlab::fields::{real_bump, FieldSpec, Form, ScalarTerm, VectorTerm};
use scatlab::geometry::{sample_boundary_circle, BoundaryPoint, Direction, SimGrid};
use scatlab::num::{czero, Cplx};
use scatlab::pwe::WaveKind;
use scatlab::traces::{BoundaryTrace, FRONT_MARGIN_CELLS};
use scatlab::wavesolver::{incident_source, run, Formulation, Boundary, MollifiedIncident, TraceRequest, WaveState};

fn e1(n: usize) -> Direction<f64> {
    Direction::axis(n, 0, true).unwrap()
}

fn bump_data(grid: &SimGrid<f64>, amp: f64) -> Vec<Cplx<f64>> {
    let b = real_bump(vec![0.1, -0.2], 0.6, amp).unwrap();
    (0..grid.len()).map(|i| b.value(&grid.point(i))).collect()
}

#[test]
fn free_space_energy_is_conserved() {
    let grid = SimGrid::new(2, 0.125, 3.0, 0.9 * 0.125 / 2f64.sqrt(), 0.0, 1.0).unwrap();
    let u = bump_data(&grid, 1.0);
    let mut s = WaveState::free(&grid, Boundary::Dirichlet, u.clone(), u, 0.0).unwrap();
    s.step().unwrap();
    let e0 = s.energy();
    assert!(e0 > 0.0);
    let mut drift: f64 = 0.0;
    for _ in 0..1000 {
        s.step().unwrap();
        drift = drift.max((s.energy() - e0).abs() / e0);
    }
    assert!(drift <= 1e-6, "relative drift {drift:e}");
}

#[test]
fn energy_is_quadratic() {
    let grid = SimGrid::new(2, 0.125, 3.0, 0.05, 0.0, 1.0).unwrap();
    let run_energy = |amp: f64| {
        let u = bump_data(&grid, amp);
        let mut s = WaveState::free(&grid, Boundary::Dirichlet, u.clone(), u, 0.0).unwrap();
        for _ in 0..7 {
            s.step().unwrap();
        }
        s.energy()
    };
    let (e1, e2) = (run_energy(1.0), run_energy(2.0));
    assert!((e2 / e1 - 4.0).abs() <= 1e-10);
}

#[test]
fn periodic_plane_wave_follows_discrete_dispersion() {
    let h = 0.1;
    let dt = 0.9 * h / 2f64.sqrt();
    let grid = SimGrid::new(2, h, 3.0, dt, 0.0, 1.0).unwrap();
    let p = grid.points_per_axis() as f64;
    let k = [
        2.0 * std::f64::consts::PI * 3.0 / (p * h),
        2.0 * std::f64::consts::PI * -2.0 / (p * h),
    ];
    let s2: f64 = k.iter().map(|kd| (kd * h / 2.0).sin().powi(2)).sum::<f64>() * (dt / h).powi(2);
    let w = 2.0 * s2.sqrt().asin() / dt;
    let mode = |t: f64| -> Vec<Cplx<f64>> {
        (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                Cplx::from_polar(1.0, k[0] * x[0] + k[1] * x[1] - w * t)
            })
            .collect()
    };
    let mut s = WaveState::free(&grid, Boundary::Periodic, mode(-dt), mode(0.0), 0.0).unwrap();
    for _ in 0..200 {
        s.step().unwrap();
    }
    let exact = mode(s.time());
    let err = s
        .current()
        .iter()
        .zip(&exact)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
    assert!(err <= 1e-10, "{err:e}");
}

#[test]
fn delta_source_is_time_derivative_of_heaviside_source() {
    let spec = FieldSpec::from_terms(
        2,
        Form::Drift,
        vec![VectorTerm::Directional {
            bump: real_bump(vec![0.0, 0.1], 0.7, 0.9).unwrap(),
            direction: vec![0.6, 0.8],
        }],
        vec![ScalarTerm::Bump {
            bump: real_bump(vec![0.1, 0.0], 0.6, -1.1).unwrap(),
        }],
    )
    .unwrap();
    let eps = 0.125;
    let hw = MollifiedIncident::new(WaveKind::Heaviside, eps).unwrap();
    let dw = hw.with_kind(WaveKind::Delta);
    let x = [0.2, 0.3];
    let d = 1e-6;
    for k in 0..50 {
        let t = 0.2 - eps + 2.0 * eps * k as f64 / 49.0;
        let fd = (incident_source(&spec, &e1(2), &hw, &x, t + d)
            - incident_source(&spec, &e1(2), &hw, &x, t - d))
            / (2.0 * d);
        let src = incident_source(&spec, &e1(2), &dw, &x, t);
        assert!((fd - src).norm() <= 1e-5 * (1.0 + src.norm()), "{t}: {fd} vs {src}");
    }
}

fn boundary_request(n: usize) -> TraceRequest<f64> {
    TraceRequest::new(sample_boundary_circle(n, std::f64::consts::PI / 16.0).unwrap())
}

#[test]
fn free_space_trace_vanishes() {
    let grid = SimGrid::for_window(2, 1.0 / 16.0, 1.0, 0.25).unwrap();
    let spec = FieldSpec::zero(2, Form::Magnetic).unwrap();
    let inc = MollifiedIncident::new(WaveKind::Delta, 0.25).unwrap();
    let (_, trace) = run(&spec, &e1(2), &inc, Formulation::Scattered, &grid, &boundary_request(2)).unwrap();
    assert!(trace.values.iter().all(|v| *v == czero()));
}

fn scalar_spec(n: usize, amp: f64) -> FieldSpec<f64> {
    let mut center = vec![0.0; n];
    center[0] = 0.1;
    FieldSpec::from_terms(
        n,
        Form::Drift,
        vec![],
        vec![ScalarTerm::Bump {
            bump: real_bump(center, 0.6, amp).unwrap(),
        }],
    )
    .unwrap()
}

fn mixed_spec() -> FieldSpec<f64> {
    FieldSpec::from_terms(
        2,
        Form::Drift,
        vec![VectorTerm::Directional {
            bump: real_bump(vec![0.05, 0.1], 0.6, 0.8).unwrap(),
            direction: vec![0.8, -0.6],
        }],
        vec![ScalarTerm::Bump {
            bump: real_bump(vec![-0.1, 0.0], 0.7, 1.5).unwrap(),
        }],
    )
    .unwrap()
}

#[test]
fn scattered_field_vanishes_ahead_of_front() {
    let h = 1.0 / 32.0;
    let eps = 4.0 * h;
    let grid = SimGrid::for_window(2, h, 1.5, eps).unwrap();
    let omega = Direction::normalized(vec![1.0, 0.5]).unwrap();
    for kind in [WaveKind::Heaviside, WaveKind::Delta] {
        let inc = MollifiedIncident::new(kind, eps).unwrap();
        let (_, trace) = run(&mixed_spec(), &omega, &inc, Formulation::Scattered, &grid, &boundary_request(2)).unwrap();
        assert!(trace.norm_inf() > 1e-3);
        let ratio = trace.pre_front_ratio(FRONT_MARGIN_CELLS * h);
        assert!(ratio <= 1e-8, "{kind:?}: {ratio:e}");
        // the tail ahead of the front shrinks cell by cell
        let tail: Vec<f64> = (0..=8).map(|m| trace.pre_front_ratio(m as f64 * h)).collect();
        assert!(tail.windows(2).all(|w| w[1] < w[0] * 0.5), "{tail:?}");
        for p in 0..trace.points.len() {
            for (k, v) in trace.series(p).iter().enumerate() {
                if trace.time(k) <= -1.0 - eps {
                    assert_eq!(*v, czero());
                }
            }
        }
    }
}

fn line_points(xs: &[f64]) -> Vec<BoundaryPoint<f64>> {
    xs.iter()
        .map(|&x| BoundaryPoint {
            x: vec![x],
            angles: vec![],
        })
        .collect()
}

/// Samples of `fine` at the times of `coarse`, matched exactly.
fn aligned(coarse: &BoundaryTrace<f64>, fine: &BoundaryTrace<f64>) -> Vec<Cplx<f64>> {
    let ratio = (coarse.dt / fine.dt).round() as usize;
    let mut out = Vec::new();
    for p in 0..coarse.points.len() {
        for k in 0..coarse.n_times {
            let t = coarse.time(k);
            if t < fine.t0 - 1e-12 {
                out.push(czero());
                continue;
            }
            let j = ((t - fine.t0) / fine.dt).round() as usize;
            assert!((fine.time(j) - t).abs() < 1e-9 * ratio as f64);
            out.push(fine.series(p)[j]);
        }
    }
    out
}

fn relative_l2(a: &[Cplx<f64>], b: &[Cplx<f64>]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let r: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (d / r).sqrt()
}

#[test]
fn one_dimensional_run_matches_refined_oracle() {
    let h = 1.0 / 64.0;
    let eps = 4.0 * h;
    let spec = scalar_spec(1, 0.5);
    let inc = MollifiedIncident::new(WaveKind::Heaviside, eps).unwrap();
    let req = TraceRequest::new(line_points(&[-1.0, -0.5, 0.0, 0.5, 1.0]));
    let coarse_grid = SimGrid::for_window(1, h, 3.0, eps).unwrap();
    let fine_grid = SimGrid::for_window(1, h / 4.0, 3.0, eps).unwrap();
    let (_, coarse) = run(&spec, &e1(1), &inc, Formulation::Scattered, &coarse_grid, &req).unwrap();
    let (_, fine) = run(&spec, &e1(1), &inc, Formulation::Scattered, &fine_grid, &req).unwrap();
    let err = relative_l2(&coarse.values, &aligned(&coarse, &fine));
    eprintln!("relative L2 vs h/4 oracle: {err:e}");
    assert!(err <= 5e-3);
}
