//! Coupled temperature and flow stepping with a short history of levels.

use super::forcing::{assemble_flow_forcing, FlowForcing, ForcingLevel};
use super::momentum::{momentum_step_cached, project_velocity, MomentumCache, FlowOptions, FlowProblem, FlowState, MomentumReport};
use crate::error::{check_len, Error, Result};
use crate::geometry::{GeometryFields, VectorField};
use crate::heat::{step_fd, CrankNicolson, HeatCoefficients, HeatForcing, HeatOperators, HeatState};
use std::sync::Arc;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

/// Which half of the split step goes first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitOrder {
    HeatFirst,
    MomentumFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub dt: f64,
    pub flow: FlowOptions,
    pub order: SplitOrder,
    /// Extra fixed-point passes with the geometry at the step midpoint.
    pub picard_iters: usize,
    pub picard_tol: f64,
}

impl StepConfig {
    pub fn new(dt: f64, flow: FlowOptions) -> Self {
        Self { dt, flow, order: SplitOrder::HeatFirst, picard_iters: 0, picard_tol: 1e-10 }
    }
}

/// Flow and temperature at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub flow: FlowState,
    pub heat: HeatState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepReport {
    pub time: f64,
    pub momentum: MomentumReport,
    pub heat_energy_before: f64,
    pub heat_energy_after: f64,
    pub heat_dissipation: f64,
    pub picard_passes: usize,
    /// Sup-norm change of the last fixed-point pass.
    pub picard_change: f64,
}

/// Velocity relative to the mapped nodes, u - w e2.
pub fn relative_velocity(fields: &GeometryFields, u: &VectorField) -> Result<VectorField> {
    let w = &fields.rates()?.mesh_velocity;
    check_len(w.len(), u[1].len())?;
    Ok([u[0].clone(), u[1].iter().zip(w).map(|(a, b)| a - b).collect()])
}

fn step_geometry(problem: &FlowProblem, rest: &GeometryFields, flow: &FlowState, opts: &FlowOptions) -> Result<GeometryFields> {
    if opts.moving_geometry {
        problem.geometry(&flow.eta, &flow.deta_dt)
    } else {
        Ok(rest.clone())
    }
}

/// Forms and factorisations reused while the geometry and the step size
/// stay fixed. Cloning yields empty caches.
#[derive(Default)]
pub struct StepCaches {
    momentum: MomentumCache,
    heat: Option<(Vec<f64>, f64, Arc<(HeatOperators, CrankNicolson)>)>,
}

impl Clone for StepCaches {
    fn clone(&self) -> Self {
        Self::default()
    }
}

impl std::fmt::Debug for StepCaches {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StepCaches").field("momentum", &self.momentum).field("heat", &self.heat.is_some()).finish()
    }
}

impl StepCaches {
    fn heat_ops(&mut self, problem: &FlowProblem, fields: &GeometryFields, dt: f64) -> Result<Arc<(HeatOperators, CrankNicolson)>> {
        if let Some((y2, h, ops)) = &self.heat {
            if *h == dt && *y2 == fields.y2 {
                return Ok(ops.clone());
            }
        }
        let ops = HeatOperators::new(&problem.grid, fields, HeatCoefficients::new(&problem.params))?;
        let cn = ops.crank_nicolson(dt)?;
        let pair = Arc::new((ops, cn));
        self.heat = Some((fields.y2.clone(), dt, pair.clone()));
        Ok(pair)
    }
}

fn heat_half(
    problem: &FlowProblem,
    fields: &GeometryFields,
    heat: &HeatState,
    u: &VectorField,
    cfg: &StepConfig,
    caches: &mut StepCaches,
) -> Result<(HeatState, [f64; 3])> {
    let pair = caches.heat_ops(problem, fields, cfg.dt)?;
    let (ops, cn) = (&pair.0, &pair.1);
    let vel = relative_velocity(fields, u)?;
    let transport = if cfg.flow.convection { Some(&vel) } else { None };
    let (next, e) = step_fd(ops, cn, heat, transport, &HeatForcing::zero(ops))?;
    Ok((next, [e.before, e.after, e.diffusion + e.surface]))
}

fn split_step(
    problem: &FlowProblem,
    fields: &GeometryFields,
    state: &CoupledState,
    cfg: &StepConfig,
    caches: &mut StepCaches,
) -> Result<(CoupledState, MomentumReport, [f64; 3])> {
    match cfg.order {
        SplitOrder::HeatFirst => {
            let (heat, he) = heat_half(problem, fields, &state.heat, &state.flow.u, cfg, caches)?;
            let (flow, mr) = momentum_step_cached(problem, &state.flow, fields, &heat.theta, &cfg.flow, cfg.dt, &mut caches.momentum)?;
            Ok((CoupledState { flow, heat }, mr, he))
        }
        SplitOrder::MomentumFirst => {
            let (flow, mr) = momentum_step_cached(problem, &state.flow, fields, &state.heat.theta, &cfg.flow, cfg.dt, &mut caches.momentum)?;
            let (heat, he) = heat_half(problem, fields, &state.heat, &flow.u, cfg, caches)?;
            Ok((CoupledState { flow, heat }, mr, he))
        }
    }
}

fn state_change(a: &CoupledState, b: &CoupledState) -> f64 {
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
    d(&a.flow.u[0], &b.flow.u[0])
        .max(d(&a.flow.u[1], &b.flow.u[1]))
        .max(d(&a.flow.eta, &b.flow.eta))
        .max(d(&a.heat.theta, &b.heat.theta))
}

/// One coupled step: the geometry is built from (eta^n, v^n), then the
/// temperature and the momentum halves run in `cfg.order`. Fixed-point
/// passes rebuild the geometry at the mean of the old and new surfaces.
pub fn coupled_step(
    problem: &FlowProblem,
    rest: &GeometryFields,
    state: &CoupledState,
    cfg: &StepConfig,
    caches: &mut StepCaches,
) -> Result<(CoupledState, StepReport)> {
    let fields = step_geometry(problem, rest, &state.flow, &cfg.flow)?;
    let (mut next, mut mr, mut he) = split_step(problem, &fields, state, cfg, caches)?;
    let mut passes = 0;
    let mut change = 0.0;
    if cfg.flow.moving_geometry {
        for _ in 0..cfg.picard_iters {
            let mid = FlowState {
                eta: state.flow.eta.iter().zip(&next.flow.eta).map(|(a, b)| 0.5 * (a + b)).collect(),
                deta_dt: state.flow.deta_dt.iter().zip(&next.flow.deta_dt).map(|(a, b)| 0.5 * (a + b)).collect(),
                ..state.flow.clone()
            };
            let f = step_geometry(problem, rest, &mid, &cfg.flow)?;
            let (cand, m, h) = split_step(problem, &f, state, cfg, caches)?;
            passes += 1;
            change = state_change(&cand, &next);
            next = cand;
            mr = m;
            he = h;
            if change <= cfg.picard_tol {
                break;
            }
        }
    }
    let report = StepReport {
        time: next.flow.time,
        momentum: mr,
        heat_energy_before: he[0],
        heat_energy_after: he[1],
        heat_dissipation: he[2],
        picard_passes: passes,
        picard_change: change,
    };
    Ok((next, report))
}

/// Initial surface, velocity and temperature. The velocity is projected onto
/// the admissible fields; the temperature rate is taken from the discrete
/// heat equation at t = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub eta: Vec<f64>,
    pub u: VectorField,
    pub theta: Vec<f64>,
}

impl InitialData {
    pub fn at_rest(problem: &FlowProblem) -> Self {
        let g = &problem.grid;
        Self { eta: vec![0.0; g.fine.ni], u: [vec![0.0; g.fine.len()], vec![0.0; g.fine.len()]], theta: vec![0.0; g.coarse.len()] }
    }
}

/// Heat rate M^-1 (-B theta - transport) on the free nodes.
fn heat_rate(ops: &HeatOperators, theta: &[f64], vel: Option<&VectorField>) -> Result<Vec<f64>> {
    let mut r = ops.stiffness.mul(theta);
    if let Some(v) = vel {
        let c = ops.transport(v, theta)?;
        r.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
    }
    let mut out = vec![0.0; ops.len()];
    for &q in &ops.free {
        out[q] = -r[q] / ops.mass[q];
    }
    Ok(out)
}

pub fn initial_state(problem: &FlowProblem, init: &InitialData, opts: &FlowOptions) -> Result<CoupledState> {
    let g = &problem.grid;
    check_len(g.fine.ni, init.eta.len())?;
    check_len(g.fine.len(), init.u[0].len())?;
    check_len(g.fine.len(), init.u[1].len())?;
    check_len(g.coarse.len(), init.theta.len())?;
    let mean = problem.volume(&init.eta) / problem.width();
    let eta: Vec<f64> = init.eta.iter().map(|e| e - mean).collect();
    problem.check_spill(&eta)?;
    let ns = g.fine.ni;
    let geo_eta = if opts.moving_geometry { eta.clone() } else { vec![0.0; ns] };
    let f0 = problem.geometry(&geo_eta, &vec![0.0; ns])?;
    let (u, v) = project_velocity(problem, &f0, &init.u)?;
    let f1 = if opts.moving_geometry { problem.geometry(&eta, &v)? } else { f0 };
    let ops = HeatOperators::new(g, &f1, HeatCoefficients::new(&problem.params))?;
    let mut theta = init.theta.clone();
    let free: std::collections::HashSet<usize> = ops.free.iter().copied().collect();
    for (q, t) in theta.iter_mut().enumerate() {
        if !free.contains(&q) {
            *t = 0.0;
        }
    }
    let vel = relative_velocity(&f1, &u)?;
    let dtheta = heat_rate(&ops, &theta, if opts.convection { Some(&vel) } else { None })?;
    let nf = g.fine.len();
    let flow = FlowState {
        u,
        p: vec![0.0; g.coarse.len()],
        eta,
        deta_dt: v,
        d2eta_dt2: vec![0.0; ns],
        du_dt: [vec![0.0; nf], vec![0.0; nf]],
        time: 0.0,
    };
    Ok(CoupledState { flow, heat: HeatState::new(theta, dtheta, 0.0) })
}

/// One stored level with the geometry it was advanced on.
#[derive(Debug, Clone)]
pub struct Level {
    pub state: CoupledState,
    pub fields: GeometryFields,
}

/// Bit-exact copy of the stepping history.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub steps: usize,
    pub config_bits: Vec<u64>,
    pub levels: Vec<Vec<Vec<u64>>>,
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn unbits(v: &[u64]) -> Vec<f64> {
    v.iter().map(|&x| f64::from_bits(x)).collect()
}

fn encode_state(s: &CoupledState) -> Vec<Vec<u64>> {
    let f = &s.flow;
    let h = &s.heat;
    vec![
        bits(&f.u[0]),
        bits(&f.u[1]),
        bits(&f.p),
        bits(&f.eta),
        bits(&f.deta_dt),
        bits(&f.d2eta_dt2),
        bits(&f.du_dt[0]),
        bits(&f.du_dt[1]),
        vec![f.time.to_bits(), h.time.to_bits()],
        bits(&h.theta),
        bits(&h.dtheta_dt),
        bits(&h.d2theta_dt2),
    ]
}

fn decode_state(v: &[Vec<u64>]) -> Result<CoupledState> {
    if v.len() != 12 || v[8].len() != 2 {
        return Err(Error::Io("malformed checkpoint level".into()));
    }
    Ok(CoupledState {
        flow: FlowState {
            u: [unbits(&v[0]), unbits(&v[1])],
            p: unbits(&v[2]),
            eta: unbits(&v[3]),
            deta_dt: unbits(&v[4]),
            d2eta_dt2: unbits(&v[5]),
            du_dt: [unbits(&v[6]), unbits(&v[7])],
            time: f64::from_bits(v[8][0]),
        },
        heat: HeatState {
            theta: unbits(&v[9]),
            dtheta_dt: unbits(&v[10]),
            d2theta_dt2: unbits(&v[11]),
            time: f64::from_bits(v[8][1]),
        },
    })
}

/// Number of levels kept for the differentiated forcing.
pub const HISTORY_LEN: usize = 4;

/// Time stepper holding the current state and the last few levels.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub problem: FlowProblem,
    pub cfg: StepConfig,
    rest: GeometryFields,
    history: VecDeque<Level>,
    caches: StepCaches,
    pub steps: usize,
}

impl Simulation {
    pub fn new(problem: FlowProblem, cfg: StepConfig, init: &InitialData) -> Result<Self> {
        let state = initial_state(&problem, init, &cfg.flow)?;
        Self::from_state(problem, cfg, state)
    }

    pub fn from_state(problem: FlowProblem, cfg: StepConfig, state: CoupledState) -> Result<Self> {
        if !(cfg.dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {}", cfg.dt)));
        }
        let rest = problem.rest_geometry()?;
        let fields = step_geometry(&problem, &rest, &state.flow, &cfg.flow)?;
        let mut history = VecDeque::new();
        history.push_back(Level { state, fields });
        Ok(Self { problem, cfg, rest, history, caches: StepCaches::default(), steps: 0 })
    }

    pub fn state(&self) -> &CoupledState {
        &self.history.back().expect("history is never empty").state
    }

    pub fn fields(&self) -> &GeometryFields {
        &self.history.back().expect("history is never empty").fields
    }

    pub fn history(&self) -> impl Iterator<Item = &Level> {
        self.history.iter()
    }

    pub fn rest_geometry(&self) -> &GeometryFields {
        &self.rest
    }

    pub fn step(&mut self) -> Result<StepReport> {
        let current = &self.history.back().expect("history is never empty").state;
        let (next, report) = coupled_step(&self.problem, &self.rest, current, &self.cfg, &mut self.caches)?;
        let fields = step_geometry(&self.problem, &self.rest, &next.flow, &self.cfg.flow)?;
        self.history.push_back(Level { state: next, fields });
        while self.history.len() > HISTORY_LEN {
            self.history.pop_front();
        }
        self.steps += 1;
        Ok(report)
    }

    /// Interaction terms of the differentiated problem of `order` at the
    /// current level.
    pub fn forcing(&self, order: usize) -> Result<FlowForcing> {
        if self.history.len() < order + 1 {
            return Err(Error::InsufficientHistory { needed: order + 1, have: self.history.len() });
        }
        let levels: Vec<ForcingLevel> = self
            .history
            .iter()
            .map(|l| ForcingLevel {
                state: &l.state.flow,
                fields: &l.fields,
                theta: &l.state.heat.theta,
                dtheta_dt: &l.state.heat.dtheta_dt,
            })
            .collect();
        assemble_flow_forcing(&self.problem, &levels, self.cfg.flow.eps, order)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let c = &self.cfg;
        let config_bits = vec![c.dt.to_bits(), c.flow.eps.to_bits(), c.picard_tol.to_bits(), c.picard_iters as u64];
        Checkpoint { steps: self.steps, config_bits, levels: self.history.iter().map(|l| encode_state(&l.state)).collect() }
    }

    /// Rebuilds a stepper from a checkpoint taken with the same problem and
    /// configuration; geometries are recomputed from the stored surfaces.
    pub fn restore(problem: FlowProblem, cfg: StepConfig, cp: &Checkpoint) -> Result<Self> {
        let expect = vec![cfg.dt.to_bits(), cfg.flow.eps.to_bits(), cfg.picard_tol.to_bits(), cfg.picard_iters as u64];
        if expect != cp.config_bits {
            return Err(Error::Io("checkpoint was taken with a different step configuration".into()));
        }
        if cp.levels.is_empty() {
            return Err(Error::Io("empty checkpoint".into()));
        }
        let rest = problem.rest_geometry()?;
        let mut history = VecDeque::new();
        for lv in &cp.levels {
            let state = decode_state(lv)?;
            check_len(problem.grid.fine.ni, state.flow.eta.len())?;
            check_len(problem.grid.fine.len(), state.flow.u[0].len())?;
            check_len(problem.grid.coarse.len(), state.heat.theta.len())?;
            let fields = step_geometry(&problem, &rest, &state.flow, &cfg.flow)?;
            history.push_back(Level { state, fields });
        }
        Ok(Self { problem, cfg, rest, history, caches: StepCaches::default(), steps: cp.steps })
    }
}
