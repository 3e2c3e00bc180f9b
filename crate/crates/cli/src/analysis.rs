//! The seven analyses behind the subcommands. Each one runs its pipeline,
//! writes its artifacts into one directory and returns the metrics.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use scatlab::carleman::{
    carleman_ratio, gamma_normal, kappa, pseudoconvexity_margin, weight_separation, BoundaryForms, CarlemanReport,
    CarlemanWeight, Jet, SpaceTimeBump,
};
use scatlab::fields::{FieldSpec, Form};
use scatlab::geometry::{sample_boundary_circle, sample_sphere, BoundaryPoint, Direction, SimGrid};
use scatlab::io::{fmt17, write_csv, write_json, write_numeric_csv};
use scatlab::num::{loglog_slope, Cplx};
use scatlab::pwe::{expand, goursat_at, ray_step, table_lattice, WaveKind};
use scatlab::scattering::{
    default_freqs, far_fields, fourier_trace, r_zero, relative_difference, FarField, FarFieldBudget, Window,
};
use scatlab::traces::{
    discrepancy, gamma_limit, integral_identity_residual, near_front_offset, time_derivative_residual, total_scale,
    BoundaryTrace, NormKind,
};
use scatlab::wavesolver::{run, MollifiedIncident, TraceRequest};

use crate::config::Config;
use crate::error::{CliError, CliResult};
use crate::report::Metric;
use crate::scenario::{signed_axes, Expectation, Scenario};

/// Grid nodes of one simulation, a 1024² grid in any dimension.
pub const MAX_NODES: usize = 1 << 20;
pub const MAX_STEPS: usize = 20_000;

/// Scattered traces of the free problem, relative to the unit incident wave.
pub const TOL_ZERO: f64 = 1e-8;
pub const TOL_IDENTICAL: f64 = 1e-10;
/// H-wave trace discrepancy of a gauge-equivalent pair.
pub const TOL_GAUGE: f64 = 1e-3;
/// Refinement factor the gauge discrepancy must beat per halving of `h`.
pub const GAUGE_REFINEMENT: f64 = 0.3;
/// A genuinely different pair must exceed the gauge tolerance this many times.
pub const DISTINCT_FACTOR: f64 = 10.0;
/// Agreement threshold shared by H- and δ-traces in the equivalence shadow.
pub const TOL_EQUIV: f64 = 1e-2;
/// Relative residuals of the time-derivative relation and integral identity.
pub const TOL_IDENTITY: f64 = 5e-3;
pub const TOL_FOURIER: f64 = 1e-2;
pub const TOL_FAR_FIELD: f64 = 1e-2;
pub const TOL_R_STABILITY: f64 = 0.15;
/// `C` in the Γ-limit tolerance `max(1e−2, C(h² + ε))`.
pub const TRACE_C: f64 = 0.1;
pub const DECOUPLING_FACTOR: f64 = 5.0;
pub const SLOPE_GAMMA: f64 = 1.5;
pub const SLOPE_IDENTITY: f64 = 1.7;
pub const SLOPE_NEAR_FRONT: f64 = 1.7;
/// Values at or below this count as exact zeros in a convergence study.
pub const FLOOR: f64 = 1e-12;
pub const TOL_MARGIN: f64 = 1e-12;
pub const TOL_TANGENTIAL: f64 = 1e-10;
pub const KAPPA_RATIO: f64 = 0.1;
pub const RATIO_GROWTH: f64 = 2.0;

/// Γ-limit tolerance at spacing `h` and mollifier width `eps`.
pub fn tol_trace(h: f64, eps: f64) -> f64 {
    (TRACE_C * (h * h + eps)).max(1e-2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Analysis {
    Simulate,
    Pwe,
    TraceCompare,
    Amplitude,
    Carleman,
    Dataset2n,
    Convergence,
}

impl Analysis {
    pub fn name(self) -> &'static str {
        match self {
            Analysis::Simulate => "simulate",
            Analysis::Pwe => "pwe",
            Analysis::TraceCompare => "trace-compare",
            Analysis::Amplitude => "amplitude",
            Analysis::Carleman => "carleman",
            Analysis::Dataset2n => "dataset-2n",
            Analysis::Convergence => "convergence",
        }
    }
}

/// Everything an analysis needs besides the scenario.
pub struct Ctx<'a> {
    pub cfg: &'a Config,
    pub scenario: &'a Scenario,
    pub dir: &'a Path,
}

impl Ctx<'_> {
    fn h(&self) -> f64 {
        self.cfg.grid.h
    }

    fn eps_at(&self, h: f64) -> f64 {
        self.cfg.grid.epsilon_cells * h
    }

    fn unsupported(&self, analysis: Analysis, reason: impl Into<String>) -> CliError {
        CliError::Unsupported {
            scenario: self.scenario.name.clone(),
            analysis: analysis.name(),
            reason: reason.into(),
        }
    }

    fn pair(&self, analysis: Analysis) -> CliResult<(&FieldSpec<f64>, &FieldSpec<f64>)> {
        match self.scenario.potentials.as_slice() {
            [a, b] => Ok((a, b)),
            _ => Err(self.unsupported(analysis, "needs two potentials")),
        }
    }

    fn boundary(&self) -> CliResult<Vec<BoundaryPoint<f64>>> {
        Ok(sample_boundary_circle(self.scenario.dim(), self.cfg.grid.boundary_step)?)
    }
}

/// Simulation grid at spacing `h`, refused when it exceeds the budget.
pub fn budget_grid(n: usize, h: f64, t_sim: f64, eps: f64) -> CliResult<SimGrid<f64>> {
    let grid = SimGrid::for_window(n, h, t_sim, eps)?;
    if grid.len() > MAX_NODES {
        return Err(CliError::Budget(format!(
            "{} grid nodes at h = {h}; limit {MAX_NODES}",
            grid.len()
        )));
    }
    if grid.steps() > MAX_STEPS {
        return Err(CliError::Budget(format!("{} time steps; limit {MAX_STEPS}", grid.steps())));
    }
    Ok(grid)
}

#[derive(Debug, Clone, Copy)]
struct Job {
    potential: usize,
    direction: usize,
    kind: WaveKind,
}

fn kind_tag(kind: WaveKind) -> &'static str {
    match kind {
        WaveKind::Heaviside => "h",
        WaveKind::Delta => "delta",
    }
}

/// Raw solver traces for every job, in job order. Jobs run in parallel.
fn run_jobs(
    ctx: &Ctx,
    specs: &[&FieldSpec<f64>],
    directions: &[Direction<f64>],
    jobs: &[Job],
    h: f64,
    points: &[BoundaryPoint<f64>],
) -> CliResult<Vec<BoundaryTrace<f64>>> {
    let eps = ctx.eps_at(h);
    let grid = budget_grid(ctx.scenario.dim(), h, ctx.cfg.grid.t_sim, eps)?;
    let request = TraceRequest::new(points.to_vec());
    jobs.par_iter()
        .map(|job| {
            let inc = MollifiedIncident::new(job.kind, eps)?;
            let (_, trace) = run(
                specs[job.potential],
                &directions[job.direction],
                &inc,
                ctx.cfg.grid.formulation,
                &grid,
                &request,
            )?;
            Ok(trace)
        })
        .collect()
}

fn all_jobs(n_potentials: usize, n_directions: usize) -> Vec<Job> {
    let mut jobs = Vec::new();
    for potential in 0..n_potentials {
        for direction in 0..n_directions {
            for kind in [WaveKind::Heaviside, WaveKind::Delta] {
                jobs.push(Job {
                    potential,
                    direction,
                    kind,
                });
            }
        }
    }
    jobs
}

fn write_trace(dir: &Path, stem: &str, trace: &BoundaryTrace<f64>) -> CliResult<serde_json::Value> {
    let file = std::fs::File::create(dir.join(format!("{stem}.csv")))?;
    trace.write_csv(std::io::BufWriter::new(file))?;
    let mut side = trace.sidecar();
    side["file"] = json!(format!("{stem}.csv"));
    Ok(side)
}

fn scenario_meta(ctx: &Ctx) -> serde_json::Value {
    json!({
        "scenario": ctx.scenario.name,
        "scenario_hash": ctx.scenario.hash(),
        "expectation": ctx.scenario.expectation,
        "potentials": ctx.scenario.potentials.iter().map(scatlab::io::spec_hash).collect::<Vec<_>>(),
        "directions": ctx.scenario.directions.iter().map(|d| d.as_slice().to_vec()).collect::<Vec<_>>(),
        "grid": ctx.cfg.grid,
    })
}

/// Pair metrics for one direction, shared by `simulate` and `dataset-2n`.
fn pair_metrics(expectation: Expectation, tag: &str, d_h: f64, d_delta: f64, out: &mut Vec<Metric>) {
    match expectation {
        Expectation::Identical => {
            out.push(Metric::at_most(format!("identical_h_{tag}"), d_h, TOL_IDENTICAL));
            out.push(Metric::at_most(format!("identical_delta_{tag}"), d_delta, TOL_IDENTICAL));
        }
        Expectation::Equivalent => {
            out.push(Metric::at_most(format!("gauge_h_{tag}"), d_h, TOL_GAUGE));
            out.push(Metric::at_most(format!("gauge_delta_{tag}"), d_delta, TOL_EQUIV));
        }
        Expectation::Distinct => {
            out.push(Metric::at_least(format!("distinct_h_{tag}"), d_h, DISTINCT_FACTOR * TOL_GAUGE));
        }
        _ => {}
    }
}

pub fn simulate(ctx: &Ctx) -> CliResult<Vec<Metric>> {
    let s = ctx.scenario;
    let specs: Vec<&FieldSpec<f64>> = s.potentials.iter().collect();
    let points = ctx.boundary()?;
    let jobs = all_jobs(specs.len(), s.directions.len());
    let raw = run_jobs(ctx, &specs, &s.directions, &jobs, ctx.h(), &points)?;
    let traces = raw.iter().map(|t| t.to_scattered()).collect::<Result<Vec<_>, _>>()?;

    let mut files = Vec::new();
    for (job, trace) in jobs.iter().zip(&traces) {
        let stem = format!("trace_p{}_d{}_{}", job.potential, job.direction, kind_tag(job.kind));
        files.push(write_trace(ctx.dir, &stem, trace)?);
    }
    let mut meta = scenario_meta(ctx);
    meta["traces"] = json!(files);
    write_json(&ctx.dir.join("meta.json"), &meta)?;

    let mut metrics = vec![Metric::flag(
        "finite",
        traces.iter().all(|t| t.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())),
    )];
    if s.expectation == Expectation::Zero {
        let worst = traces.iter().map(|t| t.norm_inf()).fold(0.0, f64::max);
        metrics.push(Metric::at_most("freespace_linf", worst, TOL_ZERO));
    }
    if specs.len() == 2 {
        let per = s.directions.len() * 2;
        for d in 0..s.directions.len() {
            let d_h = discrepancy(&traces[2 * d], &traces[per + 2 * d], NormKind::L2)?;
            let d_delta = discrepancy(&traces[2 * d + 1], &traces[per + 2 * d + 1], NormKind::L2)?;
            pair_metrics(s.expectation, &format!("d{d}"), d_h, d_delta, &mut metrics);
            if s.expectation == Expectation::Equivalent {
                // the same H-wave pair one level coarser
                let coarse_jobs = [0, 1].map(|potential| Job {
                    potential,
                    direction: d,
                    kind: WaveKind::Heaviside,
                });
                let coarse = run_jobs(ctx, &specs, &s.directions, &coarse_jobs, 2.0 * ctx.h(), &points)?;
                let (a, b) = (coarse[0].to_scattered()?, coarse[1].to_scattered()?);
                let d_coarse = discrepancy(&a, &b, NormKind::L2)?;
                metrics.push(Metric::at_most(
                    format!("gauge_refinement_d{d}"),
                    d_h / d_coarse,
                    GAUGE_REFINEMENT,
                ));
            }
        }
    }
    Ok(metrics)
}

/// `ψ` and `F` by fine quadrature at each point.
fn ray_references(drift: &FieldSpec<f64>, omega: &Direction<f64>, points: &[BoundaryPoint<f64>]) -> Vec<(Cplx<f64>, Cplx<f64>)> {
    let step = ray_step(1e-3, drift.support_radius());
    points
        .par_iter()
        .map(|p| {
            let jet = goursat_at(drift, omega, &p.x, step);
            (jet.psi, jet.goursat)
        })
        .collect()
}

fn max_error(got: &[Cplx<f64>], want: impl Iterator<Item = Cplx<f64>>) -> f64 {
    got.iter().zip(want).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}

/// Damping for the Fourier-side check: configured, or `r₀ + 1`.
fn fourier_shift(ctx: &Ctx) -> CliResult<f64> {
    if let Some(mu) = ctx.cfg.amplitude.fourier_shift {
        return Ok(mu);
    }
    if ctx.scenario.potentials.iter().all(|p| p.form() == Form::Magnetic) {
        Ok(r_zero(&ctx.scenario.potentials)? + 1.0)
    } else {
        Ok(1.0)
    }
}

fn frequencies(ctx: &Ctx) -> Vec<f64> {
    ctx.cfg.amplitude.freqs.clone().unwrap_or_else(default_freqs)
}

/// Per frequency, `‖S_δ + i(λ + iμ) S_H‖ / ‖S_δ‖` over the points.
/// `∫ u(t) w'(t) e^{iκt} dt` over the closing ramp of the window `w`.
fn taper_term(trace: &BoundaryTrace<f64>, p: usize, kappa: Cplx<f64>, window: &Window<f64>) -> Cplx<f64> {
    let series = trace.series(p);
    let m = series.len();
    let mut sum = Cplx::new(0.0, 0.0);
    for (k, v) in series.iter().enumerate() {
        let t = trace.time(k);
        let end = if k == 0 || k + 1 == m { 0.5 } else { 1.0 };
        sum += v * (Cplx::<f64>::i() * kappa * t).exp() * (end * window.taper_slope(t));
    }
    sum * trace.dt
}

fn fourier_residuals(h: &BoundaryTrace<f64>, d: &BoundaryTrace<f64>, freqs: &[f64], mu: f64) -> CliResult<Vec<f64>> {
    let sh = fourier_trace(h, freqs, mu)?;
    let sd = fourier_trace(d, freqs, mu)?;
    Ok(freqs
        .iter()
        .enumerate()
        .map(|(j, &lambda)| {
            let kappa = Cplx::new(lambda, mu);
            let (mut num, mut den) = (0.0, 0.0);
            for p in 0..h.points.len() {
                // integrating by parts leaves the ramp of the taper behind
                let ramp = taper_term(h, p, kappa, &sh.window);
                let r: Cplx<f64> = sd.at(p, j) + Cplx::<f64>::i() * kappa * sh.at(p, j) + ramp;
                num += r.norm_sqr();
                den += sd.at(p, j).norm_sqr();
            }
            (num / den.max(1e-300)).sqrt()
        })
        .collect())
}

pub fn pwe(ctx: &Ctx) -> CliResult<Vec<Metric>> {
    let s = ctx.scenario;
    let n = s.dim();
    let spec = &s.potentials[0];
    let drift = spec.to_drift();
    let omega = &s.directions[0];
    let h = ctx.h();
    let eps = ctx.eps_at(h);

    let lattice = table_lattice(n, h / 2.0)?;
    for kind in [WaveKind::Heaviside, WaveKind::Delta] {
        let table = expand(&drift, omega, &lattice, 2, kind)?;
        let stem = format!("expansion_{}", kind_tag(kind));
        write_numeric_csv(&ctx.dir.join(format!("{stem}.csv")), &table.csv_header(), table.csv_rows())?;
        write_json(&ctx.dir.join(format!("{stem}.json")), &table.metadata())?;
    }

    let points = ctx.boundary()?;
    let jobs = [WaveKind::Heaviside, WaveKind::Delta].map(|kind| Job {
        potential: 0,
        direction: 0,
        kind,
    });
    // negative control: a δ-wave sent along another direction
    let other = Direction::axis(n, 1 % n, n > 1)?;
    let directions = [omega.clone(), other];
    let mut jobs = jobs.to_vec();
    jobs.push(Job {
        potential: 0,
        direction: 1,
        kind: WaveKind::Delta,
    });
    let raw = run_jobs(ctx, &[spec], &directions, &jobs, h, &points)?;
    let (th, td, t_other) = (&raw[0], &raw[1], &raw[2]);
    let refs = ray_references(&drift, omega, &points);
    let gh = gamma_limit(th)?;
    let gd = gamma_limit(td)?;
    let rows = points.iter().enumerate().map(|(p, bp)| {
        let (psi, f) = refs[p];
        let e = psi.exp();
        let mut row: Vec<f64> = bp.x.clone();
        row.extend([gh[p].re, gh[p].im, e.re, e.im, gd[p].re, gd[p].im, f.re, f.im]);
        row
    });
    let mut header: Vec<String> = (0..n).map(|d| format!("x{d}")).collect();
    header.extend(
        ["gamma_h_re", "gamma_h_im", "exp_psi_re", "exp_psi_im", "gamma_delta_re", "gamma_delta_im", "f_re", "f_im"]
            .map(String::from),
    );
    write_numeric_csv(&ctx.dir.join("gamma.csv"), &header, rows)?;
    let (sh, sd) = (th.to_scattered()?, td.to_scattered()?);
    write_trace(ctx.dir, "trace_h", &sh)?;
    write_trace(ctx.dir, "trace_delta", &sd)?;

    let tol = tol_trace(h, eps);
    let err_h = max_error(&gh, refs.iter().map(|r| r.0.exp()));
    let err_d = max_error(&gd, refs.iter().map(|r| r.1));
    let psi: Vec<Cplx<f64>> = refs.iter().map(|r| r.0).collect();
    let scale = total_scale(th)?.max(1e-300);
    let identity = integral_identity_residual(th, td, &psi)? / scale;
    let mismatched = integral_identity_residual(th, t_other, &psi)? / scale;
    let td_res = time_derivative_residual(&sh, &sd)?;
    let freqs = frequencies(ctx);
    let mu = fourier_shift(ctx)?;
    let fourier = fourier_residuals(&sh, &sd, &freqs, mu)?;
    write_numeric_csv(
        &ctx.dir.join("fourier.csv"),
        &["lambda".to_string(), "mu".into(), "residual".into()],
        freqs.iter().zip(&fourier).map(|(&l, &r)| vec![l, mu, r]),
    )?;
    let mut meta = scenario_meta(ctx);
    meta["table_h"] = json!(h / 2.0);
    meta["fourier_shift"] = json!(mu);
    meta["reference_ray_step"] = json!(ray_step(1e-3, drift.support_radius()));
    write_json(&ctx.dir.join("meta.json"), &meta)?;

    Ok(vec![
        Metric::at_most("gamma_h_vs_exp_psi", err_h, tol),
        Metric::at_most("gamma_delta_vs_goursat", err_d, tol),
        Metric::at_most("time_derivative_relative", td_res, TOL_IDENTITY),
        Metric::at_most("integral_identity_relative", identity, TOL_IDENTITY),
        Metric::at_least("integral_identity_mismatched_omega", mismatched, 10.0 * tol),
        Metric::at_most("fourier_relative_max", fourier.iter().copied().fold(0.0, f64::max), TOL_FOURIER),
    ])
}

/// Largest `|a − b|` over samples with `t ≥ z`.
fn max_abs_difference(a: &BoundaryTrace<f64>, b: &BoundaryTrace<f64>) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .zip(a.mask.iter().zip(&b.mask))
        .filter(|(_, (ma, mb))| **ma && **mb)
        .map(|((x, y), _)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn trace_compare(ctx: &Ctx) -> CliResult<Vec<Metric>> {
    let s = ctx.scenario;
    let (a, b) = ctx.pair(Analysis::TraceCompare)?;
    let points = ctx.boundary()?;
    let jobs = all_jobs(2, s.directions.len());
    let raw = run_jobs(ctx, &[a, b], &s.directions, &jobs, ctx.h(), &points)?;
    let traces = raw.iter().map(|t| t.to_scattered()).collect::<Result<Vec<_>, _>>()?;
    let per = s.directions.len() * 2;
    let h = ctx.h();
    let tol = tol_trace(h, ctx.eps_at(h));

    let mut metrics = Vec::new();
    let mut rows = Vec::new();
    for d in 0..s.directions.len() {
        let (ah, ad, bh, bd) = (&traces[2 * d], &traces[2 * d + 1], &traces[per + 2 * d], &traces[per + 2 * d + 1]);
        let d_h = discrepancy(ah, bh, NormKind::L2)?;
        let d_delta = discrepancy(ad, bd, NormKind::L2)?;
        let agree_h = d_h <= TOL_EQUIV;
        let agree_delta = d_delta <= TOL_EQUIV;
        metrics.push(Metric::flag(format!("shadow_d{d}"), agree_h == agree_delta));
        let mut row = vec![d as f64, d_h, d_delta];
        if s.expectation == Expectation::Decoupled {
            let ga = gamma_limit(&raw[2 * d])?;
            let gb = gamma_limit(&raw[per + 2 * d])?;
            let gamma_diff = max_abs_difference_c(&ga, &gb);
            let sigma_plus = max_abs_difference(ah, bh);
            metrics.push(Metric::at_most(format!("decoupling_gamma_d{d}"), gamma_diff, tol));
            metrics.push(Metric::at_least(
                format!("decoupling_sigma_plus_d{d}"),
                sigma_plus,
                DECOUPLING_FACTOR * tol,
            ));
            row.extend([gamma_diff, sigma_plus]);
        } else {
            pair_metrics(s.expectation, &format!("d{d}"), d_h, d_delta, &mut metrics);
        }
        rows.push(row);
    }
    let mut header: Vec<String> = ["direction", "d_h", "d_delta"].map(String::from).to_vec();
    if s.expectation == Expectation::Decoupled {
        header.extend(["gamma_h_diff", "sigma_plus_diff"].map(String::from));
    }
    write_numeric_csv(&ctx.dir.join("discrepancies.csv"), &header, rows)?;
    let mut meta = scenario_meta(ctx);
    meta["equivalence_tolerance"] = json!(TOL_EQUIV);
    meta["gamma_tolerance"] = json!(tol);
    write_json(&ctx.dir.join("meta.json"), &meta)?;
    Ok(metrics)
}

fn max_abs_difference_c(a: &[Cplx<f64>], b: &[Cplx<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Observation directions: `n_theta` angles in the plane, the two signs on
/// the line, and sphere samples of comparable spacing in three dimensions.
fn observation_directions(n: usize, n_theta: usize) -> CliResult<Vec<Direction<f64>>> {
    let step = std::f64::consts::TAU / n_theta.max(1) as f64;
    let pts = sample_sphere(n, 1.0, step)?;
    Ok(pts
        .into_iter()
        .map(|p| Direction::normalized(p.x))
        .collect::<Result<Vec<_>, _>>()?)
}

pub fn amplitude(ctx: &Ctx) -> CliResult<Vec<Metric>> {
    let s = ctx.scenario;
    let n = s.dim();
    let a = &ctx.cfg.amplitude;
    let h = ctx.h();
    let r_max = a.radii.iter().copied().fold(0.0, f64::max);
    budget_grid(n, h, r_max + a.tail, ctx.eps_at(h))?;
    let budget = FarFieldBudget {
        h,
        tail: a.tail,
        shift: 0.0,
        formulation: ctx.cfg.grid.formulation,
    };
    let freqs = frequencies(ctx);
    let thetas = observation_directions(n, a.n_theta)?;
    let omega = &s.directions[0];
    let fields: Vec<Vec<FarField<f64>>> = s
        .potentials
        .par_iter()
        .map(|p| far_fields(p, omega, &freqs, &thetas, &a.radii, &budget))
        .collect::<Result<_, _>>()?;

    let header: Vec<String> = ["theta", "lambda", "re", "im"].map(String::from).to_vec();
    let mut side = Vec::new();
    for (i, per) in fields.iter().enumerate() {
        for ff in per {
            let stem = format!("farfield_p{i}_R{}", ff.radius);
            write_numeric_csv(&ctx.dir.join(format!("{stem}.csv")), &header, ff.csv_rows().into_iter().map(|r| r.to_vec()))?;
            let mut m = ff.metadata();
            m["file"] = json!(format!("{stem}.csv"));
            side.push(m);
        }
    }
    let mut meta = scenario_meta(ctx);
    meta["far_fields"] = json!(side);
    meta["budget"] = json!(budget);
    write_json(&ctx.dir.join("meta.json"), &meta)?;

    let mut metrics = Vec::new();
    if s.expectation == Expectation::Zero {
        let worst = fields
            .iter()
            .flatten()
            .flat_map(|f| f.amplitude.iter().map(|v| v.norm()))
            .fold(0.0, f64::max);
        metrics.push(Metric::at_most("far_field_linf", worst, TOL_ZERO));
        return Ok(metrics);
    }
    if a.radii.len() >= 2 {
        for (i, per) in fields.iter().enumerate() {
            let last = per.len() - 1;
            metrics.push(Metric::at_most(
                format!("r_stability_p{i}"),
                relative_difference(&per[last - 1], &per[last])?,
                TOL_R_STABILITY,
            ));
        }
    }
    if fields.len() == 2 {
        for (ri, r) in a.radii.iter().enumerate() {
            let d = relative_difference(&fields[0][ri], &fields[1][ri])?;
            match s.expectation {
                Expectation::Identical => metrics.push(Metric::at_most(format!("identical_R{r}"), d, TOL_IDENTICAL)),
                Expectation::Equivalent => metrics.push(Metric::at_most(format!("gauge_R{r}"), d, TOL_FAR_FIELD)),
                Expectation::Distinct => metrics.push(Metric::at_least(format!("distinct_R{r}"), d, TOL_FAR_FIELD)),
                _ => {}
            }
        }
    }
    Ok(metrics)
}

fn random_jet(rng: &mut ChaCha8Rng, n: usize) -> Jet<f64> {
    Jet {
        value: rng.gen_range(-1.0..1.0),
        grad: (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    }
}

fn random_in_ball(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if x.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            return x;
        }
    }
}

/// Largest relative gap between the boundary form with the downward normal
/// on Γ and its tangential expression, over random jets, points, σ and `g`.
fn tangential_agreement(weight: &CarlemanWeight<f64>, jets: usize, seed: u64) -> CliResult<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = weight.dim();
    let nu = gamma_normal(weight);
    let mut worst: f64 = 0.0;
    for _ in 0..jets {
        let (ga, gb) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let forms = BoundaryForms::with_g(std::sync::Arc::new(move |x: &[f64], t: f64| ga * x[0] + gb * t.sin()));
        let sigma = rng.gen_range(0.0..3.0);
        let x = random_in_ball(&mut rng, n);
        let v = random_jet(&mut rng, n);
        let t = weight.frame().z(&x);
        let lhs = forms.boundary_form(weight, sigma, &v, &x, t, &nu)?;
        let rhs = forms.gamma_tangential(weight, sigma, &v, &x);
        let scale = forms
            .e_components(weight, sigma, &v, &x, t)
            .iter()
            .map(|e| e.abs())
            .sum::<f64>()
            .max(1.0);
        worst = worst.max((lhs - rhs).abs() / scale);
    }
    Ok(worst)
}

pub fn carleman(ctx: &Ctx) -> CliResult<Vec<Metric>> {
    let c = &ctx.cfg.carleman;
    let n = c.vartheta.len();
    let omega = match ctx.scenario.directions.first() {
        Some(d) if d.dim() == n => d.clone(),
        _ => Direction::axis(n, 0, true)?,
    };
    let weight = CarlemanWeight::new(c.lambda_w, c.vartheta.clone(), c.horizon, &omega)?;
    let short = CarlemanWeight::new(c.lambda_w, c.vartheta.clone(), c.short_horizon, &omega)?;

    let margin: Vec<(f64, f64)> = c.margin_b.iter().map(|&b| (b, pseudoconvexity_margin(b))).collect();
    let kappas: Vec<(f64, f64)> = c
        .kappa_sigmas
        .iter()
        .map(|&s| Ok((s, kappa(&weight, s)?)))
        .collect::<CliResult<_>>()?;
    let kappa_of = |s: f64| -> CliResult<f64> {
        match kappas.iter().find(|k| k.0 == s) {
            Some(k) => Ok(k.1),
            None => Ok(kappa(&weight, s)?),
        }
    };
    let separation = weight_separation(&weight);
    let short_separation = weight_separation(&short);

    let center: Vec<f64> = (0..n).map(|k| if k == 0 { 0.1 } else { 0.0 }).collect();
    let plain = SpaceTimeBump::new(center, 0.0, 0.6)?;
    let tilt = Direction::normalized((0..n).map(|k| [0.6, 0.8, 0.0][k.min(2)]).collect())?;
    let wave_center: Vec<f64> = (0..n).map(|k| if k == 1 { 0.1 } else { 0.0 }).collect();
    let wave = SpaceTimeBump::new(wave_center, 0.5, 0.6)?.with_wave(8.0, &tilt)?;
    let ratio_plain = carleman_ratio(&weight, &c.ratio_sigmas, &plain)?;
    let ratio_wave = carleman_ratio(&weight, &c.ratio_sigmas, &wave)?;
    let tangential = tangential_agreement(&weight, c.jets, c.seed)?;

    let report = CarlemanReport {
        lambda_w: c.lambda_w,
        vartheta: c.vartheta.clone(),
        horizon: c.horizon,
        omega: omega.as_slice().to_vec(),
        kappa: kappas.clone(),
        ratio: c.ratio_sigmas.iter().copied().zip(ratio_plain.iter().copied()).collect(),
        margin: margin.clone(),
        separation: separation.clone(),
    };
    report.write(ctx.dir)?;
    write_numeric_csv(
        &ctx.dir.join("ratio_wave.csv"),
        &["sigma".to_string(), "ratio".into()],
        c.ratio_sigmas.iter().zip(&ratio_wave).map(|(&s, &r)| vec![s, r]),
    )?;
    let ss = &short_separation;
    write_numeric_csv(
        &ctx.dir.join("separation_short.csv"),
        &["min_on_gamma", "max_on_caps", "cap_time", "gap"].map(String::from),
        [vec![ss.min_on_gamma, ss.max_on_caps, ss.cap_time, ss.gap]],
    )?;
    let gamma_rows = kappas.iter().map(|&(s, k)| {
        vec![s, k, scatlab::carleman::gamma_curve(k, s, separation.gap.max(0.0))]
    });
    write_numeric_csv(
        &ctx.dir.join("gamma_curve.csv"),
        &["sigma", "kappa", "gamma"].map(String::from),
        gamma_rows,
    )?;

    let mut metrics = vec![Metric::at_most(
        "margin_b4_error",
        (pseudoconvexity_margin(4.0f64) - 2.5).abs(),
        TOL_MARGIN,
    )];
    let above_three: Vec<f64> = margin.iter().filter(|m| m.0 > 3.0).map(|m| m.1).collect();
    if !above_three.is_empty() {
        metrics.push(Metric::new(
            "margin_min_above_3",
            above_three.iter().copied().fold(f64::INFINITY, f64::min),
            crate::report::Relation::Above,
            0.0,
        ));
    }
    metrics.push(Metric::new("separation_gap", separation.gap, crate::report::Relation::Above, 0.0));
    metrics.push(Metric::new(
        "separation_gap_short_horizon",
        short_separation.gap,
        crate::report::Relation::Below,
        0.0,
    ));
    metrics.push(Metric::at_most(
        "kappa0_error",
        (kappa_of(0.0)? - 2.0 * c.horizon).abs(),
        0.0,
    ));
    let increase = kappas
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::NEG_INFINITY, f64::max);
    if increase.is_finite() {
        metrics.push(Metric::at_most("kappa_max_increase", increase, 0.0));
    }
    metrics.push(Metric::at_most("kappa_ratio_20_1", kappa_of(20.0)? / kappa_of(1.0)?, KAPPA_RATIO));
    metrics.push(Metric::at_most("tangential_relative", tangential, TOL_TANGENTIAL));
    for (name, r) in [("plain", &ratio_plain), ("wave", &ratio_wave)] {
        let m = r.len();
        if m >= 3 {
            let growth = r[m - 1] / r[m - 3].max(r[m - 2]);
            metrics.push(Metric::flag(
                format!("ratio_finite_{name}"),
                r.iter().all(|v| v.is_finite() && *v > 0.0),
            ));
            metrics.push(Metric::at_most(format!("ratio_growth_{name}"), growth, RATIO_GROWTH));
        }
    }
    Ok(metrics)
}

pub fn dataset_2n(ctx: &Ctx) -> CliResult<Vec<Metric>> {
    let s = ctx.scenario;
    let n = s.dim();
    if !(2..=3).contains(&n) {
        return Err(ctx.unsupported(Analysis::Dataset2n, format!("dimension {n}; need 2 or 3")));
    }
    let (a, b) = ctx.pair(Analysis::Dataset2n)?;
    let axes = signed_axes(n);
    let directions: Vec<Direction<f64>> = axes.iter().map(|a| a.1.clone()).collect();
    let points = ctx.boundary()?;
    let jobs = all_jobs(2, directions.len());
    let raw = run_jobs(ctx, &[a, b], &directions, &jobs, ctx.h(), &points)?;
    let traces = raw.iter().map(|t| t.to_scattered()).collect::<Result<Vec<_>, _>>()?;

    let mut files = Vec::new();
    for (job, trace) in jobs.iter().zip(&traces) {
        let stem = format!("trace_p{}_d{}_{}", job.potential, job.direction, kind_tag(job.kind));
        let mut side = write_trace(ctx.dir, &stem, trace)?;
        side["label"] = json!(axes[job.direction].0);
        files.push(side);
    }
    let reduced = s.reduced.clone().unwrap_or_default();
    let per = directions.len() * 2;
    let mut metrics = Vec::new();
    let mut rows = Vec::new();
    for (d, (label, _)) in axes.iter().enumerate() {
        let d_h = discrepancy(&traces[2 * d], &traces[per + 2 * d], NormKind::L2)?;
        let d_delta = discrepancy(&traces[2 * d + 1], &traces[per + 2 * d + 1], NormKind::L2)?;
        let tag = label.replace('+', "p").replace('-', "m");
        pair_metrics(s.expectation, &tag, d_h, d_delta, &mut metrics);
        rows.push(vec![
            label.clone(),
            d.to_string(),
            u8::from(reduced.contains(&d)).to_string(),
            fmt17(d_h),
            fmt17(d_delta),
        ]);
    }
    write_csv(
        &ctx.dir.join("discrepancy.csv"),
        &["label", "index", "reduced", "d_h", "d_delta"].map(String::from),
        rows,
    )?;
    let mut meta = scenario_meta(ctx);
    meta["traces"] = json!(files);
    meta["reduced_set"] = json!(reduced.iter().map(|&i| axes.get(i).map(|a| a.0.clone())).collect::<Vec<_>>());
    write_json(&ctx.dir.join("meta.json"), &meta)?;
    Ok(metrics)
}

/// Per-level values of one metric and their log-log slope against `h`.
struct Series {
    name: &'static str,
    values: Vec<f64>,
}

impl Series {
    fn at_floor(&self) -> bool {
        self.values.iter().all(|v| v.abs() <= FLOOR)
    }

    fn decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Interior points of the line where the near-front fit is evaluated.
pub const NEAR_FRONT_POINTS: [f64; 3] = [0.0, 0.25, 0.5];
/// Spacing of the expansion table used as near-front reference on the line.
pub const NEAR_FRONT_TABLE_H: f64 = 1.0 / 2048.0;

pub fn convergence(ctx: &Ctx) -> CliResult<Vec<Metric>> {
    let s = ctx.scenario;
    let n = s.dim();
    let levels = ctx
        .cfg
        .convergence
        .levels
        .clone()
        .unwrap_or_else(|| if n == 1 { vec![7, 8, 9] } else { vec![4, 5, 6] });
    if levels.len() < 3 {
        return Err(CliError::Config {
            line: None,
            message: format!("a convergence study needs at least 3 levels, got {}", levels.len()),
        });
    }
    if levels.windows(2).any(|w| w[1] != w[0] + 1) {
        return Err(CliError::Config {
            line: None,
            message: "convergence levels must be consecutive so that h halves".into(),
        });
    }
    let hs: Vec<f64> = levels.iter().map(|&l| 0.5f64.powi(l as i32)).collect();
    let spec = &s.potentials[0];
    let drift = spec.to_drift();
    let omega = &s.directions[0];
    let points = ctx.boundary()?;
    let refs = ray_references(&drift, omega, &points);
    let psi: Vec<Cplx<f64>> = refs.iter().map(|r| r.0).collect();
    let gauge_pair = s.expectation == Expectation::Equivalent && s.potentials.len() == 2;
    let near_front = n == 1;
    let table = if near_front {
        Some(expand(
            &drift,
            omega,
            &table_lattice(1, NEAR_FRONT_TABLE_H)?,
            2,
            WaveKind::Heaviside,
        )?)
    } else {
        None
    };
    let front_points: Vec<BoundaryPoint<f64>> = NEAR_FRONT_POINTS
        .iter()
        .map(|&x| BoundaryPoint {
            x: vec![x],
            angles: vec![],
        })
        .collect();

    let mut gamma_h = Series { name: "gamma_h", values: vec![] };
    let mut gamma_d = Series { name: "gamma_delta", values: vec![] };
    let mut identity = Series { name: "integral_identity", values: vec![] };
    let mut tderiv = Series { name: "time_derivative", values: vec![] };
    let mut gauge = Series { name: "gauge_h", values: vec![] };
    let mut front = Series { name: "near_front", values: vec![] };
    for &h in &hs {
        let specs: Vec<&FieldSpec<f64>> = s.potentials.iter().collect();
        let mut jobs: Vec<Job> = [WaveKind::Heaviside, WaveKind::Delta]
            .map(|kind| Job {
                potential: 0,
                direction: 0,
                kind,
            })
            .to_vec();
        if gauge_pair {
            jobs.push(Job {
                potential: 1,
                direction: 0,
                kind: WaveKind::Heaviside,
            });
        }
        let raw = run_jobs(ctx, &specs, &s.directions, &jobs, h, &points)?;
        let (th, td) = (&raw[0], &raw[1]);
        gamma_h.values.push(max_error(&gamma_limit(th)?, refs.iter().map(|r| r.0.exp())));
        gamma_d.values.push(max_error(&gamma_limit(td)?, refs.iter().map(|r| r.1)));
        let scale = total_scale(th)?;
        let r = integral_identity_residual(th, td, &psi)?;
        identity.values.push(if scale > 0.0 { r / scale } else { r });
        let (sh, sd) = (th.to_scattered()?, td.to_scattered()?);
        tderiv.values.push(time_derivative_residual(&sh, &sd)?);
        if gauge_pair {
            gauge.values.push(discrepancy(&sh, &raw[2].to_scattered()?, NormKind::L2)?);
        }
        if let Some(table) = &table {
            let coeffs: Vec<[Cplx<f64>; 3]> = NEAR_FRONT_POINTS
                .iter()
                .map(|&x| {
                    let a = |j| table.coeff_at(j, &[x]).expect("point inside table");
                    [a(0), a(1), a(2)]
                })
                .collect();
            let job = [Job {
                potential: 0,
                direction: 0,
                kind: WaveKind::Heaviside,
            }];
            let tr = run_jobs(ctx, &[spec], &s.directions, &job, h, &front_points)?;
            front
                .values
                .push(near_front_offset(&tr[0], &coeffs, ctx.cfg.convergence.near_front_s_max)?);
        }
    }

    let mut series = vec![gamma_h, gamma_d, identity, tderiv];
    if gauge_pair {
        series.push(gauge);
    }
    if near_front {
        series.push(front);
    }
    let mut header = vec!["level".to_string(), "h".into(), "epsilon".into()];
    header.extend(series.iter().map(|s| s.name.to_string()));
    let rows = levels.iter().enumerate().map(|(i, &l)| {
        let mut row = vec![l as f64, hs[i], ctx.eps_at(hs[i])];
        row.extend(series.iter().map(|s| s.values[i]));
        row
    });
    write_numeric_csv(&ctx.dir.join("levels.csv"), &header, rows)?;
    let slopes: Vec<(String, f64, bool)> = series
        .iter()
        .map(|s| (s.name.to_string(), loglog_slope(&hs, &s.values), s.at_floor()))
        .collect();
    write_csv(
        &ctx.dir.join("slopes.csv"),
        &["metric", "slope", "at_floor"].map(String::from),
        slopes
            .iter()
            .map(|(n, sl, f)| vec![n.clone(), if *f { "nan".into() } else { fmt17(*sl) }, u8::from(*f).to_string()]),
    )?;
    let mut meta = scenario_meta(ctx);
    meta["levels"] = json!(levels);
    write_json(&ctx.dir.join("meta.json"), &meta)?;

    let mut metrics = Vec::new();
    let required = |name: &str| match name {
        "gamma_h" | "gamma_delta" => Some(SLOPE_GAMMA),
        "integral_identity" => Some(SLOPE_IDENTITY),
        "near_front" => Some(SLOPE_NEAR_FRONT),
        _ => None,
    };
    for (ser, (_, slope, floor)) in series.iter().zip(&slopes) {
        if *floor {
            metrics.push(Metric::flag(format!("{}_at_floor", ser.name), true));
            continue;
        }
        if let Some(min) = required(ser.name) {
            metrics.push(Metric::at_least(format!("{}_slope", ser.name), *slope, min));
        }
        if matches!(ser.name, "integral_identity" | "time_derivative") {
            metrics.push(Metric::flag(format!("{}_decreasing", ser.name), ser.decreasing()));
        }
        if ser.name == "gauge_h" {
            let m = ser.values.len();
            metrics.push(Metric::at_most("gauge_h_finest", ser.values[m - 1], TOL_GAUGE));
            metrics.push(Metric::at_most(
                "gauge_h_refinement",
                ser.values[m - 1] / ser.values[m - 2],
                GAUGE_REFINEMENT,
            ));
        }
    }
    Ok(metrics)
}
