//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;
use thermocontact::corner::{angular_eigenvalues_with, wedge_poisson_probe, AngularBoundary, ProbeVerdict};
use thermocontact::equilibrium::{linearized_profile, solve_equilibrium, EquilibriumSurface};
use thermocontact::flow::{ContactModel, FlowOptions, FlowProblem, InitialData, Simulation, StepConfig};
use thermocontact::geometry::{build_geometry, piola_residual, GeometryFields, Grid};
use thermocontact::heat::*;
use thermocontact::params::{compute_eps_max, select_exponents, PhysicalParams};
use thermocontact_cli::config::{EpsChoice, Mode, RunConfig};
use thermocontact_cli::modes;

const ELL: f64 = 0.5;
const DEPTH: f64 = 0.25;
const HEIGHT: f64 = 0.75;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn slope_log2(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let ys: Vec<f64> = values.iter().map(|r| r.log2()).collect();
    let xm = (n - 1.0) / 2.0;
    let ym = ys.iter().sum::<f64>() / n;
    let num: f64 = ys.iter().enumerate().map(|(i, y)| (i as f64 - xm) * (y - ym)).sum();
    let den: f64 = (0..values.len()).map(|i| (i as f64 - xm).powi(2)).sum();
    -num / den
}

fn exponent_suite() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..50 {
        let omega = PI * (0.05 + 0.9 * (k as f64 + 0.5) / 50.0);
        let e = select_exponents(omega, 0.9).map_err(|e| e.to_string())?;
        let v = e.violations();
        ensure(v.is_empty(), format!("omega = {omega}: {v:?}"))?;
        let want = (PI / omega - 1.0).min(1.0);
        worst = worst.max((compute_eps_max(omega).map_err(|e| e.to_string())? - want).abs());
    }
    ensure(worst <= 1e-14, format!("eps_max error {worst:e}"))?;
    Ok(format!("50 angles admissible, max eps_max error {worst:.1e}"))
}

fn equilibrium_profiles() -> Outcome {
    let base = PhysicalParams { ell: ELL, depth: DEPTH, ..Default::default() };
    let flat = solve_equilibrium(&base, HEIGHT, 400, 1e-13).map_err(|e| e.to_string())?;
    let dev = sup(&flat.zeta0.iter().map(|z| z - HEIGHT).collect::<Vec<_>>());
    let res = sup(&flat.pointwise_residual());
    ensure(dev == 0.0 && res < 1e-12, format!("no jump: deviation {dev:e}, residual {res:e}"))?;
    let mut detail = format!("flat exact (residual {res:.1e})");
    for ratio in [1e-3, 1e-2] {
        let p = PhysicalParams { gamma_jump: ratio * base.sigma1, ..base };
        let s = solve_equilibrium(&p, HEIGHT, 400, 1e-13).map_err(|e| e.to_string())?;
        let diff = s
            .x_nodes
            .iter()
            .zip(&s.zeta0)
            .map(|(&x, &z)| (z - HEIGHT - linearized_profile(&p, x)).abs())
            .fold(0.0, f64::max);
        let bound = 5.0 * ratio * ratio * HEIGHT;
        ensure(diff < bound, format!("ratio {ratio}: sup difference {diff:e} >= {bound:e}"))?;
        let sr = s.slope_residuals();
        ensure(sr[0].abs() < 1e-8 && sr[1].abs() < 1e-8, format!("ratio {ratio}: slope residuals {sr:?}"))?;
        detail += &format!("; ratio {ratio}: diff {diff:.2e} < {bound:.2e}");
    }
    Ok(detail)
}

fn geometry_map() -> Outcome {
    let p = PhysicalParams { gamma_jump: 0.2, ..Default::default() };
    let s = solve_equilibrium(&p, 1.0, 800, 1e-12).map_err(|e| e.to_string())?;
    let g = Grid::new(&s, 0.25, 8, 24).map_err(|e| e.to_string())?;
    let f = build_geometry(&s, &vec![0.0; g.fine.ni], None, &g, 0.1).map_err(|e| e.to_string())?;
    let m = &f.cal_a;
    let identity = (0..g.fine.len())
        .all(|q| f.a[q] == 0.0 && f.j[q] == 1.0 && [m.m11[q], m.m12[q], m.m21[q], m.m22[q]] == [1.0, 0.0, 0.0, 1.0]);
    ensure(identity, "zero perturbation does not give the identity map")?;
    let mut res = Vec::new();
    let mut jk = 0.0f64;
    for (nx, ny) in [(8, 24), (16, 48), (32, 96), (64, 192)] {
        let g = Grid::new(&s, 0.25, nx, ny).map_err(|e| e.to_string())?;
        // even in x, so the reflected extension stays smooth
        let eta: Vec<f64> = g.fine.xi.iter().map(|x| 0.05 * (PI * x).cos()).collect();
        let f = build_geometry(&s, &eta, None, &g, 0.1).map_err(|e| e.to_string())?;
        res.push(piola_residual(&f));
        let rough: Vec<f64> = g.fine.xi.iter().map(|x| 0.05 * (PI * x).cos() + 0.02 * (2.0 * PI * x).sin()).collect();
        let f = build_geometry(&s, &rough, Some(&rough), &g, 0.1).map_err(|e| e.to_string())?;
        jk = jk.max(f.j.iter().zip(&f.k).map(|(j, k)| (j * k - 1.0).abs()).fold(0.0, f64::max));
    }
    let order = slope_log2(&res);
    let pairwise: Vec<f64> = res.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(order >= 1.9, format!("Piola order {order} (pairwise {pairwise:?}), residuals {res:?}"))?;
    ensure(jk < 1e-13, format!("max |J K - 1| = {jk:e}"))?;
    Ok(format!("identity exact; Piola order {order:.2} ({pairwise:.2?}); max |JK - 1| {jk:.1e}"))
}

fn corner_probe() -> Outcome {
    let mut worst = 0.0f64;
    for omega in [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
        let mixed = angular_eigenvalues_with(omega, 4, AngularBoundary::Mixed).map_err(|e| e.to_string())?;
        let dir = angular_eigenvalues_with(omega, 4, AngularBoundary::Dirichlet).map_err(|e| e.to_string())?;
        for n in 0..4 {
            worst = worst.max((mixed.eigenvalues[n] - (2 * n + 1) as f64 * PI / (2.0 * omega)).abs());
            worst = worst.max((dir.eigenvalues[n] - (n + 1) as f64 * PI / omega).abs());
        }
    }
    ensure(worst < 1e-8, format!("eigenvalue error {worst:e}"))?;
    let levels = [16, 32, 64, 128];
    let low = wedge_poisson_probe(PI / 2.0, 1.2, &levels).map_err(|e| e.to_string())?;
    let high = wedge_poisson_probe(PI / 2.0, 1.8, &levels).map_err(|e| e.to_string())?;
    let detail = format!(
        "eigenvalue error {worst:.1e}; q = 1.2: {:?} (slope {:.3}); q = 1.8: {:?} (slope {:.3}, q* = {})",
        low.verdict, low.slope, high.verdict, high.slope, high.q_star
    );
    ensure(low.verdict == ProbeVerdict::Bounded, format!("{detail}; expected bounded at q = 1.2"))?;
    ensure(high.verdict == ProbeVerdict::Divergent, format!("{detail}; expected divergent at q = 1.8"))?;
    Ok(detail)
}

fn curved(nx: usize, ny: usize) -> (EquilibriumSurface, Grid) {
    let p = PhysicalParams { ell: ELL, gamma_jump: 0.1, ..Default::default() };
    let s = solve_equilibrium(&p, HEIGHT, 400, 1e-12).expect("equilibrium");
    let g = Grid::new(&s, DEPTH, nx, ny).expect("grid");
    (s, g)
}

fn coef(k: f64) -> HeatCoefficients {
    HeatCoefficients { k, robin_weight: 1.0, dirichlet: true }
}

/// theta = exp(-t) cos(pi x / 2 ell) (y + d)(1 + y / 2).
struct Manufactured {
    k: f64,
}

impl Manufactured {
    fn theta(&self, x: f64, y: f64, t: f64) -> f64 {
        (-t).exp() * (PI * x / (2.0 * ELL)).cos() * ((y + DEPTH) * (1.0 + 0.5 * y))
    }
    fn grad(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let e = (-t).exp();
        let kx = PI / (2.0 * ELL);
        let yy = (y + DEPTH) * (1.0 + 0.5 * y);
        let dyy = (1.0 + 0.5 * y) + 0.5 * (y + DEPTH);
        [-e * kx * (kx * x).sin() * yy, e * (kx * x).cos() * dyy]
    }
    fn lap(&self, x: f64, y: f64, t: f64) -> f64 {
        let kx = PI / (2.0 * ELL);
        let yy = (y + DEPTH) * (1.0 + 0.5 * y);
        (-t).exp() * (kx * x).cos() * (-kx * kx * yy + 1.0)
    }
    fn bulk(&self, x: f64, y: f64, t: f64) -> f64 {
        -self.theta(x, y, t) - self.k * self.lap(x, y, t)
    }
    fn surface(&self, ops: &HeatOperators, f: &GeometryFields, t: f64) -> Vec<f64> {
        let normal: Vec<[f64; 2]> = f.normal.iter().step_by(2).copied().collect();
        (0..ops.ni)
            .map(|i| {
                let p = ops.nodes[ops.top(i)];
                let gr = self.grad(p[0], p[1], t);
                let n = normal[i];
                self.k * (gr[0] * n[0] + gr[1] * n[1]) + self.theta(p[0], p[1], t) * n[0].hypot(n[1])
            })
            .collect()
    }
}

fn run_manufactured(nx: usize, ny: usize, steps: usize, t_end: f64, moving: bool) -> (Vec<f64>, Vec<f64>, HeatOperators) {
    let ms = Manufactured { k: 0.8 };
    let (s, g) = curved(nx, ny);
    let shape: Vec<f64> = g.fine.xi.iter().map(|x| (PI * x / ELL).cos() + 0.3 * (2.0 * PI * x / ELL).cos()).collect();
    let build = |t: f64| {
        let (amp, rate) = if moving { (0.04 * (1.0 + t).sin(), 0.04 * (1.0 + t).cos()) } else { (0.03, 0.0) };
        let eta: Vec<f64> = shape.iter().map(|v| amp * v).collect();
        let deta: Vec<f64> = shape.iter().map(|v| rate * v).collect();
        let f = build_geometry(&s, &eta, Some(&deta), &g, 0.1).expect("geometry");
        let o = HeatOperators::new(&g, &f, coef(ms.k)).expect("operators");
        (f, o)
    };
    let dt = t_end / steps as f64;
    let (_, o0) = build(0.0);
    let mut st = HeatState::new(o0.sample(|x, y| ms.theta(x, y, 0.0)), o0.sample(|x, y| -ms.theta(x, y, 0.0)), 0.0);
    let frozen = if moving { None } else { Some(build(0.0)) };
    for n in 0..steps {
        let tm = (n as f64 + 0.5) * dt;
        let (f, o) = frozen.clone().unwrap_or_else(|| build(tm));
        let forcing = HeatForcing { bulk: o.sample(|x, y| ms.bulk(x, y, tm)), surface: ms.surface(&o, &f, tm) };
        let rel: [Vec<f64>; 2] = [vec![0.0; g.fine.len()], f.rates().expect("rates").mesh_velocity.iter().map(|w| -w).collect()];
        let cn = o.crank_nicolson(dt).expect("factorisation");
        st = step_fd(&o, &cn, &st, if moving { Some(&rel) } else { None }, &forcing).expect("step").0;
    }
    let (_, o) = build(t_end);
    let exact = o.sample(|x, y| ms.theta(x, y, t_end));
    (st.theta, exact, o)
}

fn l2_diff(o: &HeatOperators, a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    o.l2_norm(&d)
}

fn heat_solver() -> Outcome {
    let space: Vec<f64> = [(6, 24), (12, 48), (24, 96)]
        .iter()
        .map(|&(nx, ny)| {
            let (th, ex, o) = run_manufactured(nx, ny, 4 * ny, 0.5, false);
            l2_diff(&o, &th, &ex)
        })
        .collect();
    let h_orders: Vec<f64> = space.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(h_orders.iter().all(|o| *o >= 1.9), format!("space orders {h_orders:?}, errors {space:?}"))?;

    let (fine, _, o) = run_manufactured(8, 32, 320, 0.5, true);
    let time: Vec<f64> = [10, 20, 40].iter().map(|&n| l2_diff(&o, &run_manufactured(8, 32, n, 0.5, true).0, &fine)).collect();
    let dt_orders: Vec<f64> = time.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    ensure(dt_orders.iter().all(|o| *o >= 1.9), format!("time orders {dt_orders:?}, errors {time:?}"))?;

    let (s, g) = curved(8, 24);
    let eta: Vec<f64> = g.fine.xi.iter().map(|x| 0.02 * (PI * x / ELL).cos()).collect();
    let f = build_geometry(&s, &eta, None, &g, 0.1).map_err(|e| e.to_string())?;
    let ops = HeatOperators::new(&g, &f, coef(0.9)).map_err(|e| e.to_string())?;
    let dt = 0.01;
    let cn = ops.crank_nicolson(dt).map_err(|e| e.to_string())?;
    let mut th0 = ops.sample(|x, y| (PI * x / (2.0 * ELL)).cos() * (y + DEPTH) + 0.3 * (3.0 * x).sin() * (y + DEPTH).powi(2));
    for (q, v) in th0.iter_mut().enumerate() {
        if !ops.free.contains(&q) {
            *v = 0.0;
        }
    }
    let mut st = HeatState::new(th0, vec![0.0; ops.len()], 0.0);
    let mut identity = 0.0f64;
    for _ in 0..50 {
        let (next, e) = step_fd(&ops, &cn, &st, None, &HeatForcing::zero(&ops)).map_err(|e| e.to_string())?;
        identity = identity.max(e.residual().abs() / (dt * dt * 2.0 * e.before));
        st = next;
    }
    ensure(identity < 1e-3, format!("energy identity residual {identity:e} dt^2 |theta|^2"))?;

    let (sf, gf) = {
        let p = PhysicalParams { ell: ELL, ..Default::default() };
        let s = EquilibriumSurface::flat(&p, HEIGHT, 64);
        let g = Grid::new(&s, DEPTH, 24, 24).map_err(|e| e.to_string())?;
        (s, g)
    };
    let ff = build_geometry(&sf, &vec![0.0; gf.fine.ni], None, &gf, 0.1).map_err(|e| e.to_string())?;
    let ops = HeatOperators::new(&gf, &ff, coef(1.0)).map_err(|e| e.to_string())?;
    let basis = build_basis(&ops, ops.free.len()).map_err(|e| e.to_string())?;
    let mut th0 = ops.sample(|x, y| (PI * x / (2.0 * ELL)).cos() * (y + DEPTH) * (1.5 - y) + 0.1 * (3.0 * x).sin() * (y + DEPTH));
    for (q, v) in th0.iter_mut().enumerate() {
        if !ops.free.contains(&q) {
            *v = 0.0;
        }
    }
    let cn = ops.crank_nicolson(dt).map_err(|e| e.to_string())?;
    let mut fd = HeatState::new(th0.clone(), vec![0.0; ops.len()], 0.0);
    let d0 = basis.project(&th0);
    let mut gs = GalerkinState { rate: vec![0.0; d0.len()], coeffs: d0, time: 0.0 };
    let forcing = HeatForcing { bulk: ops.sample(|x, _| x.cos()), surface: vec![0.2; ops.ni] };
    for _ in 0..20 {
        fd = step_fd(&ops, &cn, &fd, None, &forcing).map_err(|e| e.to_string())?.0;
        gs = step_galerkin(&basis, &ops, &gs, None, &forcing, dt).map_err(|e| e.to_string())?;
    }
    let galerkin = sup(&fd.theta.iter().zip(basis.reconstruct(&gs.coeffs)).map(|(a, b)| a - b).collect::<Vec<_>>());
    ensure(galerkin < 1e-6, format!("Galerkin vs nodal {galerkin:e}"))?;

    let deta: Vec<f64> = g.fine.xi.iter().map(|x| 1e-2 * (PI * x / ELL).cos()).collect();
    let fm = build_geometry(&s, &eta, Some(&deta), &g, 0.1).map_err(|e| e.to_string())?;
    let om = HeatOperators::new(&g, &fm, coef(0.9)).map_err(|e| e.to_string())?;
    let input = InitialHeatInput {
        d2theta0: om.sample(|x, y| (PI * x).cos() * (y + DEPTH)),
        f8: om.sample(|x, y| 1.0 + x * y),
        f8_t: om.sample(|x, y| (2.0 * x).sin() + y),
        f9: (0..om.ni).map(|i| 0.3 * (i as f64).cos()).collect(),
        f9_t: vec![0.1; om.ni],
    };
    let init = construct_heat_initial_data(&om, &fm.restrict(&g), &input, 1e-10, 20).map_err(|e| e.to_string())?;
    ensure(init.sweeps <= 20 && init.residual < 1e-8, format!("initial data: {} sweeps, residual {:e}", init.sweeps, init.residual))?;
    Ok(format!(
        "h orders {h_orders:.2?}; dt orders {dt_orders:.2?}; identity {identity:.1e}; Galerkin {galerkin:.1e}; initial data {} sweeps, residual {:.1e}",
        init.sweeps, init.residual
    ))
}

fn flow_problem(p: PhysicalParams, s: EquilibriumSurface, nx: usize, ny: usize) -> FlowProblem {
    let g = Grid::new(&s, DEPTH, nx, ny).expect("grid");
    FlowProblem::new(p, ContactModel::linear(p.kappa), s, g, 0.1, 10.0).expect("problem")
}

fn decay_config(nx: usize, ny: usize) -> RunConfig {
    let mut cfg = RunConfig { mode: Mode::Decay, ..RunConfig::default() };
    cfg.physical.beta = 1.0;
    cfg.grid.nx = nx;
    cfg.grid.ny = ny;
    cfg.output.plots = false;
    cfg
}

fn coupled_flow() -> Outcome {
    let base = PhysicalParams { ell: ELL, depth: DEPTH, ..Default::default() };
    let p = PhysicalParams { gamma_jump: 0.1, ..base };
    let s = solve_equilibrium(&p, HEIGHT, 400, 1e-12).map_err(|e| e.to_string())?;
    let pr = flow_problem(p, s, 6, 24);
    let mut sim = Simulation::new(pr.clone(), StepConfig::new(0.01, FlowOptions::default()), &InitialData::at_rest(&pr))
        .map_err(|e| e.to_string())?;
    for _ in 0..100 {
        sim.step().map_err(|e| e.to_string())?;
    }
    let mut rest = sim.state().flow.sup_norm().max(sup(&sim.state().heat.theta));
    for order in 0..3 {
        rest = rest.max(sim.forcing(order).map_err(|e| e.to_string())?.sup_norm());
    }
    ensure(rest < 1e-12, format!("equilibrium drifted to {rest:e}"))?;

    let pr = flow_problem(base, EquilibriumSurface::flat(&base, HEIGHT, 64), 4, 24);
    let mut init = InitialData::at_rest(&pr);
    init.eta = pr.grid.fine.xi.iter().map(|x| 1e-2 * (PI * x / ELL).sin()).collect();
    let mut sim = Simulation::new(pr.clone(), StepConfig::new(0.01, FlowOptions::default()), &init).map_err(|e| e.to_string())?;
    let v0 = pr.volume(&sim.state().flow.eta);
    let mut drift = 0.0f64;
    for _ in 0..1000 {
        sim.step().map_err(|e| e.to_string())?;
        drift = drift.max((pr.volume(&sim.state().flow.eta) - v0).abs());
    }
    ensure(drift < 1e-8, format!("volume drift {drift:e}"))?;

    let mut fits = Vec::new();
    for (nx, ny) in [(8, 24), (16, 48)] {
        let out = modes::decay(&decay_config(nx, ny)).map_err(|f| f.error.to_string())?;
        let r = &out.report;
        let get = |k: &str| r[k].as_f64().unwrap_or(f64::NAN);
        let (lambda, r2, c) = (get("lambda"), get("r_squared"), get("energy_dissipation_constant"));
        ensure(lambda > 0.0 && r2 > 0.95, format!("{nx}x{ny}: lambda {lambda}, R^2 {r2}"))?;
        ensure((1.0..10.0).contains(&c), format!("{nx}x{ny}: C = {c}"))?;
        fits.push((lambda, r2, c));
    }
    let spread = (fits[0].0 - fits[1].0).abs() / fits[1].0;
    ensure(spread < 0.1, format!("lambda {} vs {}", fits[0].0, fits[1].0))?;
    Ok(format!(
        "rest drift {rest:.1e}; volume drift {drift:.1e}; lambda {:.4} / {:.4} (spread {:.1}%), R^2 {:.5} / {:.5}, C {:.3} / {:.3}",
        fits[0].0,
        fits[1].0,
        100.0 * spread,
        fits[0].1,
        fits[1].1,
        fits[0].2,
        fits[1].2
    ))
}

fn epsilon_limit() -> Outcome {
    let mut cfg = RunConfig { mode: Mode::EpsilonSweep, eps: EpsChoice::Sweep(vec![0.1, 0.05, 0.025]), ..RunConfig::default() };
    cfg.grid.nx = 6;
    cfg.time.t_end = 2.0;
    cfg.output.plots = false;
    let out = modes::epsilon_sweep(&cfg).map_err(|f| f.error.to_string())?;
    let r = &out.report;
    let list = |k: &str| -> Vec<f64> { r[k].as_array().map(|a| a.iter().filter_map(|v| v.as_f64()).collect()).unwrap_or_default() };
    let ratios = list("difference_ratios");
    let to_zero = list("difference_from_eps_zero");
    let zero_ratios: Vec<f64> = to_zero.windows(2).map(|w| w[1] / w[0]).collect();
    ensure(!ratios.is_empty() && ratios.iter().all(|q| *q < 0.7), format!("successive ratios {ratios:?}"))?;
    ensure(zero_ratios.iter().all(|q| *q < 0.7), format!("ratios against eps = 0: {zero_ratios:?}"))?;
    let slopes = list("initial_energy_slopes");
    let (lo, hi) = slopes.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(*s), b.max(*s)));
    let spread = (hi - lo) / hi.abs().max(lo.abs());
    ensure(slopes.len() == 3 && spread < 0.1, format!("initial energy slopes {slopes:?}"))?;
    Ok(format!("successive ratio {ratios:.3?}; ratios to eps = 0 {zero_ratios:.3?}; (E^eps(0) - E(0))/eps {slopes:.3?} (spread {:.1}%)", 100.0 * spread))
}

fn run_binary(config: &Path, out: &Path) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_thermocontact"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--threads")
        .arg("1")
        .env_clear()
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), format!("run exited with {status}"))?;
    std::fs::read(out.join("series.csv")).map_err(|e| e.to_string())
}

fn determinism() -> Outcome {
    let dir = std::env::temp_dir().join(format!("thermocontact-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let configs = [
        (
            "coupled",
            r#"{"mode": "coupled", "grid": {"nx": 4}, "time": {"t_end": 0.3},
                "initial": {"seed": 7, "random_modes": 3, "random_amplitude": 1e-3}, "output": {"plots": false}}"#,
        ),
        (
            "sweep",
            r#"{"mode": "epsilon-sweep", "eps": [0.1, 0.05], "grid": {"nx": 4}, "time": {"t_end": 0.2},
                "output": {"plots": false}}"#,
        ),
    ];
    let mut sizes = Vec::new();
    for (name, text) in configs {
        let path = dir.join(format!("{name}.json"));
        std::fs::write(&path, text).map_err(|e| e.to_string())?;
        let a = run_binary(&path, &dir.join(format!("{name}_a")))?;
        let b = run_binary(&path, &dir.join(format!("{name}_b")))?;
        ensure(a.len() > 1000, format!("{name}: series.csv is only {} bytes", a.len()))?;
        ensure(a == b, format!("{name}: series.csv differs between reruns"))?;
        sizes.push(format!("{name} {} bytes", a.len()));
    }
    let _ = std::fs::remove_dir_all(&dir);
    Ok(format!("byte-identical reruns: {}", sizes.join(", ")))
}

fn main() {
    let criteria: [(&str, f64, fn() -> Outcome); 8] = [
        ("exponent suite", 1.0, exponent_suite),
        ("equilibrium", 5.0, equilibrium_profiles),
        ("geometry", 10.0, geometry_map),
        ("corner probe", 60.0, corner_probe),
        ("heat solver", 120.0, heat_solver),
        ("flow and coupled decay", 600.0, coupled_flow),
        ("epsilon limit", 900.0, epsilon_limit),
        ("determinism", f64::INFINITY, determinism),
    ];
    let mut failed = Vec::new();
    for (k, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        let result = result.and_then(|d| if secs < *budget { Ok(d) } else { Err(format!("{d}; over the {budget} s budget")) });
        match &result {
            Ok(d) => println!("[PASS] {} {name}: {d} ({secs:.1} s)", k + 1),
            Err(d) => {
                println!("[FAIL] {} {name}: {d} ({secs:.1} s)", k + 1);
                failed.push(k + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
