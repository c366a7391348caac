//! The run modes. Each returns the summary, the series rows and any extra
//! files; writing them out is left to the caller.

use crate::config::{setup, EpsChoice, ModeAmplitude, RunConfig, Setup};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};
use std::f64::consts::PI;
use thermocontact::corner::{angular_eigenvalues_with, regularity_threshold, wedge_poisson_probe, AngularBoundary};
use thermocontact::diagnostics::{
    coercivity_ratio, energy_dissipation_constant, energy_report, fit_decay, heat_constituents, simulation_report, DecayFit,
    EnergyReport,
};
use thermocontact::equilibrium::{corner_angle, linearized_profile};
use thermocontact::flow::{initial_state, FlowOptions, FlowProblem, InitialData, Level, Simulation, StepConfig};
use thermocontact::heat::{step_fd, HeatCoefficients, HeatForcing, HeatOperators};
use thermocontact::io::{line_plot, SeriesRow};
use thermocontact::params::RegularityExponents;
use thermocontact::Error;

/// Products of a run before they are written.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub report: Value,
    pub rows: Vec<SeriesRow>,
    /// (file name, contents) of further tables.
    pub files: Vec<(String, String)>,
    /// (file name, svg) plots.
    pub plots: Vec<(String, String)>,
}

/// A numerical failure with whatever state could be captured.
#[derive(Debug)]
pub struct Failure {
    pub error: Error,
    pub dump: Value,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        Failure { error, dump: Value::Null }
    }
}

type ModeResult = Result<RunOutput, Failure>;

fn shape(n: u32, x: f64, ell: f64) -> (f64, f64) {
    let k = n as f64 * PI / (2.0 * ell);
    ((k * (x + ell)).cos(), (k * (x + ell)).sin())
}

fn sum_modes(modes: &[ModeAmplitude], x: f64, ell: f64, pick: impl Fn((f64, f64)) -> f64) -> f64 {
    modes.iter().map(|m| m.amplitude * pick(shape(m.mode, x, ell))).sum()
}

/// Surface modes cos(n pi (x + ell) / (2 ell)); velocity modes
/// (sin * (x2 + d), cos * (x2 + d)) before projection; temperature modes
/// cos * (x2 + d) / (zeta0 + d), cleared on the Dirichlet nodes when the
/// state is built. Random modes add seeded amplitudes to the
/// surface and the temperature.
pub fn initial_data(cfg: &RunConfig, problem: &FlowProblem) -> InitialData {
    let ell = cfg.physical.ell;
    let d = cfg.physical.depth;
    let init = &cfg.initial;
    let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
    let mut eta_modes = init.eta.clone();
    let mut theta_modes = init.theta.clone();
    for n in 1..=init.random_modes {
        let a = init.random_amplitude;
        eta_modes.push(ModeAmplitude { mode: n, amplitude: rng.random_range(-a..=a) });
        theta_modes.push(ModeAmplitude { mode: n, amplitude: rng.random_range(-a..=a) });
    }
    let mut data = InitialData::at_rest(problem);
    let fine = &problem.grid.fine;
    data.eta = fine.xi.iter().map(|&x| sum_modes(&eta_modes, x, ell, |s| s.0)).collect();
    for q in 0..fine.len() {
        let (x, y) = (fine.xi[q % fine.ni], fine.x2[q]);
        data.u[0][q] = sum_modes(&init.u, x, ell, |s| s.1) * (y + d);
        data.u[1][q] = sum_modes(&init.u, x, ell, |s| s.0) * (y + d);
    }
    let c = &problem.grid.coarse;
    data.theta = (0..c.len())
        .map(|q| {
            let i = q % c.ni;
            sum_modes(&theta_modes, c.xi[i], ell, |s| s.0) * (c.x2[q] + d) / (c.zeta0[i] + d)
        })
        .collect();
    data
}

fn flow_options(cfg: &RunConfig, eps: f64) -> FlowOptions {
    FlowOptions { eps, convection: cfg.flow.convection, nonlinear: cfg.flow.nonlinear, moving_geometry: cfg.flow.moving_geometry }
}

fn step_config(cfg: &RunConfig, eps: f64) -> StepConfig {
    let mut s = StepConfig::new(cfg.time.dt, flow_options(cfg, eps));
    s.order = cfg.flow.split.into();
    s.picard_iters = cfg.flow.picard_iters;
    s
}

fn step_count(cfg: &RunConfig) -> usize {
    (cfg.time.t_end / cfg.time.dt).round() as usize
}

fn single_eps(cfg: &RunConfig) -> f64 {
    match &cfg.eps {
        EpsChoice::Value(v) => *v,
        EpsChoice::Sweep(v) => v[0],
    }
}

fn exponents_json(e: &RegularityExponents) -> Value {
    serde_json::to_value(e).unwrap_or(Value::Null)
}

fn report_json(r: &EnergyReport) -> Value {
    json!({
        "t": r.t,
        "E_total": r.e_total,
        "D_total": r.d_total,
        "E_eps": r.e_eps,
        "D_eps": r.d_eps,
        "brackets": r.brackets,
    })
}

fn plots_for(title: &str, series: &[(f64, f64, f64)]) -> Vec<(String, String)> {
    let e: Vec<(f64, f64)> = series.iter().map(|s| (s.0, s.1)).collect();
    let d: Vec<(f64, f64)> = series.iter().map(|s| (s.0, s.2)).collect();
    vec![
        ("energy.svg".into(), line_plot(&format!("{title}: energy"), "t", &[("E", e.clone())], false)),
        ("dissipation.svg".into(), line_plot(&format!("{title}: dissipation"), "t", &[("D", d.clone())], false)),
        ("log_energy.svg".into(), line_plot(&format!("{title}: log energy"), "t", &[("E", e), ("D", d)], true)),
    ]
}

pub fn equilibrium(cfg: &RunConfig) -> ModeResult {
    let surface = crate::config::equilibrium_of(cfg)?;
    let mean = surface.mean_height;
    let max_dev = surface.zeta0.iter().fold(0.0f64, |m, z| m.max((z - mean).abs()));
    let lin_diff = surface
        .x_nodes
        .iter()
        .zip(&surface.zeta0)
        .fold(0.0f64, |m, (x, z)| m.max((z - mean - linearized_profile(&cfg.physical, *x)).abs()));
    let residual = surface.pointwise_residual().iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let omega = corner_angle(&surface);
    let report = json!({
        "mode": "equilibrium",
        "omega": omega,
        "omega_over_pi": omega / PI,
        "pressure": surface.p0,
        "mean_height": mean,
        "flat": max_dev == 0.0,
        "max_deviation_from_mean": max_dev,
        "linearized_sup_difference": lin_diff,
        "max_residual": residual,
        "slope_residuals": surface.slope_residuals(),
        "min_height": surface.min_height(),
        "max_height": surface.max_height(),
    });
    Ok(RunOutput { report, files: vec![("equilibrium.csv".into(), surface.to_csv())], ..Default::default() })
}

pub fn corner_probe(cfg: &RunConfig) -> ModeResult {
    let omega = match cfg.corner.omega {
        Some(w) => w,
        None => corner_angle(&crate::config::equilibrium_of(cfg)?),
    };
    let mixed = angular_eigenvalues_with(omega, cfg.corner.eigenvalues, AngularBoundary::Mixed)?;
    let dirichlet = angular_eigenvalues_with(omega, cfg.corner.eigenvalues, AngularBoundary::Dirichlet)?;
    let q_star = regularity_threshold(&mixed)?;
    let probes: Vec<_> = cfg
        .corner
        .q
        .par_iter()
        .map(|&q| wedge_poisson_probe(omega, q, &cfg.corner.levels))
        .collect::<Result<_, _>>()?;
    let mut files = Vec::new();
    let verdicts: Vec<Value> = probes
        .iter()
        .map(|p| {
            files.push((format!("probe_q{}.csv", p.q), p.to_csv()));
            json!({ "q": p.q, "verdict": p.verdict, "slope": p.slope, "limit": p.limit, "rows": p.rows })
        })
        .collect();
    let report = json!({
        "mode": "corner-probe",
        "omega": omega,
        "gamma": mixed.eigenvalues[0],
        "q_star": q_star,
        "eigenvalues_mixed": mixed.eigenvalues,
        "eigenvalues_dirichlet": dirichlet.eigenvalues,
        "residuals_mixed": mixed.residuals,
        "residuals_dirichlet": dirichlet.residuals,
        "probes": verdicts,
    });
    Ok(RunOutput { report, files, ..Default::default() })
}

pub fn heat(cfg: &RunConfig) -> ModeResult {
    let Setup { exponents, problem, .. } = setup(cfg)?;
    let init = initial_data(cfg, &problem);
    let data = InitialData { eta: vec![0.0; init.eta.len()], u: InitialData::at_rest(&problem).u, theta: init.theta };
    let mut state = initial_state(&problem, &data, &FlowOptions::linear(0.0))?.heat;
    let rest = problem.rest_geometry()?;
    let ops = HeatOperators::new(&problem.grid, &rest, HeatCoefficients::new(&problem.params))?;
    let cn = ops.crank_nicolson(cfg.time.dt)?;
    let j_coarse = problem.grid.restrict(&rest.j);
    let lattice = &problem.grid.coarse;
    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut worst_identity = 0.0f64;
    let zero = HeatForcing::zero(&ops);
    for n in 1..=step_count(cfg) {
        let (next, e) = step_fd(&ops, &cn, &state, None, &zero)?;
        let scale = cfg.time.dt * cfg.time.dt * (2.0 * e.before).max(1e-300);
        worst_identity = worst_identity.max(e.residual().abs() / scale);
        state = next;
        if n % cfg.output.cadence == 0 {
            let c = heat_constituents(lattice, Some(&j_coarse), [&state.theta, &state.dtheta_dt, &state.d2theta_dt2], &exponents)?;
            let e_total: f64 = c.iter().filter(|(k, _)| k.starts_with("E_")).map(|(_, v)| v).sum();
            let d_total: f64 = c.iter().filter(|(k, _)| k.starts_with("D_")).map(|(_, v)| v).sum();
            let mut row = SeriesRow::at(state.time);
            for (k, v) in &c {
                row.set(k, *v)?;
            }
            row.set("E_total", e_total)?;
            row.set("D_total", d_total)?;
            rows.push(row);
            series.push((state.time, e_total, d_total));
        }
    }
    let e: Vec<(f64, f64)> = series.iter().map(|s| (s.0, s.1)).collect();
    let fit = fit_decay(&e, 0.0).ok();
    let report = json!({
        "mode": "heat",
        "steps": step_count(cfg),
        "t_end": state.time,
        "final_l2": ops.l2_norm(&state.theta),
        "energy_identity_residual_over_dt2_norm2": worst_identity,
        "fit": fit,
        "exponents": exponents_json(&exponents),
    });
    let plots = if cfg.output.plots { plots_for("heat", &series) } else { Vec::new() };
    Ok(RunOutput { report, rows, plots, ..Default::default() })
}

/// Accumulated per-step diagnostics of a coupled run.
#[derive(Debug, Default, Clone, Copy)]
struct StepStats {
    volume_drift: f64,
    max_recentering: f64,
    max_contact_residual: f64,
    max_energy_defect: f64,
}

fn dump_of(sim: &Simulation) -> Value {
    json!({
        "steps": sim.steps,
        "time": sim.state().flow.time,
        "flow_sup_norm": sim.state().flow.sup_norm(),
        "min_j": sim.fields().min_j(),
        "checkpoint": sim.checkpoint(),
    })
}

struct Trajectory {
    rows: Vec<SeriesRow>,
    series: Vec<(f64, f64, f64)>,
    first: Option<EnergyReport>,
    last: Option<EnergyReport>,
    stats: StepStats,
}

fn run_coupled(cfg: &RunConfig, problem: &FlowProblem, exps: &RegularityExponents, eps: f64) -> Result<Trajectory, Failure> {
    let init = initial_data(cfg, problem);
    let mut sim = Simulation::new(problem.clone(), step_config(cfg, eps), &init)?;
    let mut t = Trajectory { rows: Vec::new(), series: Vec::new(), first: None, last: None, stats: StepStats::default() };
    for n in 1..=step_count(cfg) {
        let rep = sim.step().map_err(|error| Failure { error, dump: dump_of(&sim) })?;
        let m = rep.momentum;
        t.stats.volume_drift += m.volume_drift;
        t.stats.max_recentering = t.stats.max_recentering.max(m.recentering);
        t.stats.max_contact_residual = t.stats.max_contact_residual.max(m.contact_residual[0].abs().max(m.contact_residual[1].abs()));
        t.stats.max_energy_defect = t.stats.max_energy_defect.max(m.energy_defect());
        if n >= 2 && n % cfg.output.cadence == 0 {
            let r = simulation_report(&sim, exps).map_err(|error| Failure { error, dump: dump_of(&sim) })?;
            t.rows.push(SeriesRow::from(&r));
            t.series.push((r.t, r.e_total, r.d_total));
            if t.first.is_none() {
                t.first = Some(r.clone());
            }
            t.last = Some(r);
        }
    }
    Ok(t)
}

fn trajectory_summary(t: &Trajectory) -> Value {
    json!({
        "volume_drift": t.stats.volume_drift,
        "max_recentering": t.stats.max_recentering,
        "max_contact_residual": t.stats.max_contact_residual,
        "max_energy_defect": t.stats.max_energy_defect,
        "first_report": t.first.as_ref().map(report_json),
        "last_report": t.last.as_ref().map(report_json),
        "energy_dissipation_constant": energy_dissipation_constant(&t.series).ok(),
        "coercivity_ratio": coercivity_ratio(&t.series),
    })
}

pub fn coupled(cfg: &RunConfig) -> ModeResult {
    let Setup { exponents, problem, .. } = setup(cfg)?;
    let eps = single_eps(cfg);
    let t = run_coupled(cfg, &problem, &exponents, eps)?;
    let e: Vec<(f64, f64)> = t.series.iter().map(|s| (s.0, s.1)).collect();
    let mut report = json!({
        "mode": "coupled",
        "eps": eps,
        "steps": step_count(cfg),
        "exponents": exponents_json(&exponents),
        "fit": fit_decay(&e, cfg.decay.transient).ok(),
    });
    merge(&mut report, trajectory_summary(&t));
    let plots = if cfg.output.plots { plots_for("coupled", &t.series) } else { Vec::new() };
    Ok(RunOutput { report, rows: t.rows, plots, ..Default::default() })
}

pub fn decay(cfg: &RunConfig) -> ModeResult {
    let Setup { exponents, problem, .. } = setup(cfg)?;
    let eps = single_eps(cfg);
    let t = run_coupled(cfg, &problem, &exponents, eps)?;
    let e: Vec<(f64, f64)> = t.series.iter().map(|s| (s.0, s.1)).collect();
    let fit: DecayFit = fit_decay(&e, cfg.decay.transient)?;
    let mut report = json!({
        "mode": "decay",
        "eps": eps,
        "steps": step_count(cfg),
        "exponents": exponents_json(&exponents),
        "lambda": fit.lambda,
        "C_fit": fit.c,
        "r_squared": fit.r_squared,
        "decaying": fit.decaying,
        "fit_samples": fit.samples,
    });
    merge(&mut report, trajectory_summary(&t));
    let plots = if cfg.output.plots { plots_for("decay", &t.series) } else { Vec::new() };
    Ok(RunOutput { report, rows: t.rows, plots, ..Default::default() })
}

fn merge(into: &mut Value, from: Value) {
    if let (Some(a), Value::Object(b)) = (into.as_object_mut(), from) {
        a.extend(b);
    }
}

/// Field-wise difference a - b of two levels, on the geometry of `a`.
fn difference(a: &Level, b: &Level) -> Level {
    let mut out = a.clone();
    let sub = |x: &mut Vec<f64>, y: &[f64]| x.iter_mut().zip(y).for_each(|(p, q)| *p -= q);
    let (f, g) = (&mut out.state.flow, &b.state.flow);
    sub(&mut f.u[0], &g.u[0]);
    sub(&mut f.u[1], &g.u[1]);
    sub(&mut f.p, &g.p);
    sub(&mut f.eta, &g.eta);
    sub(&mut f.deta_dt, &g.deta_dt);
    sub(&mut f.d2eta_dt2, &g.d2eta_dt2);
    sub(&mut f.du_dt[0], &g.du_dt[0]);
    sub(&mut f.du_dt[1], &g.du_dt[1]);
    let (h, k) = (&mut out.state.heat, &b.state.heat);
    sub(&mut h.theta, &k.theta);
    sub(&mut h.dtheta_dt, &k.dtheta_dt);
    sub(&mut h.d2theta_dt2, &k.d2theta_dt2);
    out
}

/// Runs eps = 0 and every sweep value side by side, one stepper per member
/// advanced in parallel. Reports the sup-in-time energy norm of successive
/// trajectory differences and the initial epsilon energies.
pub fn epsilon_sweep(cfg: &RunConfig) -> ModeResult {
    let Setup { exponents, problem, .. } = setup(cfg)?;
    let mut eps_list = vec![0.0];
    eps_list.extend(cfg.eps.values());
    let init = initial_data(cfg, &problem);
    let mut members: Vec<Simulation> = eps_list
        .iter()
        .map(|&e| Simulation::new(problem.clone(), step_config(cfg, e), &init))
        .collect::<Result<_, _>>()?;
    let m = members.len();
    let mut rows: Vec<Vec<SeriesRow>> = vec![Vec::new(); m];
    let mut first: Vec<Option<EnergyReport>> = vec![None; m];
    let mut sup_diff = vec![0.0f64; m - 1];
    let mut sup_diff_ref = vec![0.0f64; m - 1];
    for n in 1..=step_count(cfg) {
        members
            .par_iter_mut()
            .map(|s| s.step().map(|_| ()).map_err(|error| Failure { error, dump: dump_of(s) }))
            .collect::<Result<Vec<()>, Failure>>()?;
        if n < 2 || n % cfg.output.cadence != 0 {
            continue;
        }
        let reports: Vec<EnergyReport> = members.par_iter().map(|s| simulation_report(s, &exponents)).collect::<Result<_, _>>()?;
        for (k, r) in reports.iter().enumerate() {
            rows[k].push(SeriesRow::from(r));
            if first[k].is_none() {
                first[k] = Some(r.clone());
            }
        }
        let levels: Vec<Vec<&Level>> = members.iter().map(|s| s.history().collect()).collect();
        let norm_of_difference = |a: usize, b: usize| -> thermocontact::Result<f64> {
            let diff: Vec<Level> = levels[a].iter().zip(&levels[b]).map(|(x, y)| difference(x, y)).collect();
            let refs: Vec<&Level> = diff.iter().collect();
            Ok(energy_report(&problem, &refs, &exponents, 0.0)?.e_total.sqrt())
        };
        for k in 1..m - 1 {
            sup_diff[k] = sup_diff[k].max(norm_of_difference(k, k + 1)?);
        }
        for k in 1..m {
            sup_diff_ref[k - 1] = sup_diff_ref[k - 1].max(norm_of_difference(k, 0)?);
        }
    }
    // sup_diff[k] compares sweep members k and k + 1 (index 0 is eps = 0)
    let successive: Vec<f64> = sup_diff[1..].to_vec();
    let ratios: Vec<f64> = successive.windows(2).map(|w| w[1] / w[0]).collect();
    let e0 = first[0].as_ref().map(|r| r.e_total);
    let initial: Vec<Value> = eps_list
        .iter()
        .zip(&first)
        .map(|(e, r)| json!({ "eps": e, "E_eps": r.as_ref().map(|r| r.e_eps), "E": r.as_ref().map(|r| r.e_total) }))
        .collect();
    let slopes: Vec<Option<f64>> = eps_list[1..]
        .iter()
        .zip(&first[1..])
        .map(|(e, r)| match (r, e0) {
            (Some(r), Some(e0)) => Some((r.e_eps - e0) / e),
            _ => None,
        })
        .collect();
    let monotone = !ratios.is_empty() && ratios.iter().all(|r| *r < 0.7);
    let report = json!({
        "mode": "epsilon-sweep",
        "eps": eps_list,
        "steps": step_count(cfg),
        "exponents": exponents_json(&exponents),
        "successive_differences": successive,
        "difference_ratios": ratios,
        "differences_monotone_below_0_7": monotone,
        "difference_from_eps_zero": sup_diff_ref,
        "initial_energies": initial,
        "initial_energy_slopes": slopes,
    });
    let mut files = Vec::new();
    for (k, e) in eps_list.iter().enumerate() {
        files.push((format!("series_eps_{e}.csv"), thermocontact::io::series_csv(&rows[k])));
    }
    let last = rows.pop().unwrap_or_default();
    let plots = if cfg.output.plots {
        let curves: Vec<(String, Vec<(f64, f64)>)> = eps_list
            .iter()
            .zip(&files)
            .map(|(e, _)| format!("eps = {e}"))
            .zip(member_energy(&rows, &last))
            .collect();
        let named: Vec<(&str, Vec<(f64, f64)>)> = curves.iter().map(|(n, c)| (n.as_str(), c.clone())).collect();
        vec![("log_energy.svg".into(), line_plot("epsilon sweep: log energy", "t", &named, true))]
    } else {
        Vec::new()
    };
    Ok(RunOutput { report, rows: last, files, plots })
}

fn member_energy(rows: &[Vec<SeriesRow>], last: &[SeriesRow]) -> Vec<Vec<(f64, f64)>> {
    let curve = |r: &[SeriesRow]| -> Vec<(f64, f64)> {
        r.iter().filter_map(|row| Some((*row.values.get("t")?, *row.values.get("E_total")?))).collect()
    };
    rows.iter().map(|r| curve(r)).chain(std::iter::once(curve(last))).collect()
}
