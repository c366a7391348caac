//! Implicit momentum step with the free surface and the contact points.
//!
//! Velocity is biquadratic on the fine lattice, pressure bilinear on the
//! coarse lattice. The surface velocity v is the lumped projection of u . N
//! onto the biquadratic surface traces, and the surface height advances by
//! eta + dt v inside the traction, so gravity, the linear surface tension,
//! the regularisation and the linear contact response are implicit. The
//! contact law enters through the boundary term of the integrated curvature.
//! Convection, the curvature remainder, the thermal tension term and the
//! cubic part of the contact response are explicit.

use super::contact::{
    apply_contact_law, curvature_remainder, linear_weight, surface_tension_operator, ContactEnds, ContactModel,
};
use crate::equilibrium::EquilibriumSurface;
use crate::error::{check_len, Error, Result};
use crate::fem::Mesh;
use crate::geometry::{surface_slope, GeometryFields, Grid, VectorField};
use crate::linalg::{dot, Csr, SparseLu, Triplets};
use crate::params::PhysicalParams;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Switches of the momentum step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Regularisation of the surface tension term.
    pub eps: f64,
    /// Explicit convection relative to the moving nodes.
    pub convection: bool,
    /// Curvature remainder, thermal tension and cubic contact response.
    pub nonlinear: bool,
    /// Rebuild the map from the current surface each step.
    pub moving_geometry: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { eps: 0.0, convection: true, nonlinear: true, moving_geometry: true }
    }
}

impl FlowOptions {
    /// Linearised dynamics about the equilibrium.
    pub fn linear(eps: f64) -> Self {
        Self { eps, convection: false, nonlinear: false, moving_geometry: false }
    }
}

/// Velocity, pressure and surface state.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    /// Fine-lattice nodal velocity.
    pub u: VectorField,
    /// Coarse-lattice nodal pressure.
    pub p: Vec<f64>,
    /// Fine surface samples of the height perturbation.
    pub eta: Vec<f64>,
    /// Surface velocity, the projected u . N.
    pub deta_dt: Vec<f64>,
    pub d2eta_dt2: Vec<f64>,
    pub du_dt: VectorField,
    pub time: f64,
}

impl FlowState {
    pub fn at_rest(grid: &Grid) -> Self {
        let nf = grid.fine.len();
        let ns = grid.fine.ni;
        Self {
            u: [vec![0.0; nf], vec![0.0; nf]],
            p: vec![0.0; grid.coarse.len()],
            eta: vec![0.0; ns],
            deta_dt: vec![0.0; ns],
            d2eta_dt2: vec![0.0; ns],
            du_dt: [vec![0.0; nf], vec![0.0; nf]],
            time: 0.0,
        }
    }

    /// Largest absolute value over all stored fields.
    pub fn sup_norm(&self) -> f64 {
        let all = [
            &self.u[0], &self.u[1], &self.p, &self.eta, &self.deta_dt, &self.d2eta_dt2, &self.du_dt[0], &self.du_dt[1],
        ];
        all.iter().flat_map(|v| v.iter()).fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Quadrature data of the static surface forms.
#[derive(Debug, Clone)]
struct SurfaceQuad {
    nodes: [usize; 3],
    coarse: [usize; 2],
    weight: f64,
    psi: [f64; 3],
    dpsi: [f64; 3],
    d2psi: [f64; 3],
    q1: [f64; 2],
    slope0: f64,
    inv_c: f64,
    dinv_c: f64,
}

/// Geometry-independent data of the flow problem.
#[derive(Debug, Clone)]
pub struct FlowProblem {
    pub params: PhysicalParams,
    pub model: ContactModel,
    pub surface: EquilibriumSurface,
    pub grid: Grid,
    /// Threshold of the Jacobian guard.
    pub j_min: f64,
    /// Admissible contact-point speeds |v| <= speed_range.
    pub speed_range: f64,
    /// Lumped surface weights (integral of every surface trace in x1).
    pub surface_mass: Vec<f64>,
    /// Consistent surface mass.
    pub gravity_form: Vec<Vec<f64>>,
    /// Integral of psi_a' psi_b' / (1 + zeta0'^2)^(3/2).
    pub curvature_form: Vec<Vec<f64>>,
    quad: Vec<SurfaceQuad>,
    dof_map: Vec<usize>,
    free: Vec<usize>,
}

impl FlowProblem {
    pub fn new(
        params: PhysicalParams,
        model: ContactModel,
        surface: EquilibriumSurface,
        grid: Grid,
        j_min: f64,
        speed_range: f64,
    ) -> Result<Self> {
        params.validate()?;
        model.check_monotone(speed_range)?;
        if model.kappa != params.kappa {
            return Err(Error::Constraint(format!(
                "contact model kappa {} differs from the physical kappa {}",
                model.kappa, params.kappa
            )));
        }
        let ns = grid.fine.ni;
        let nf = grid.fine.len();
        let mesh = Mesh::new(&grid, &grid.fine.x2);
        let surface_mass = mesh.surface_mass();
        let mut g = vec![vec![0.0; ns]; ns];
        let mut l = vec![vec![0.0; ns]; ns];
        let mut quad = Vec::new();
        for e in &mesh.top {
            for p in &e.points {
                let (_, s0, d2) = surface.eval(p.x1);
                let inv_c = linear_weight(s0);
                let dinv_c = -3.0 * s0 * d2 * inv_c / (1.0 + s0 * s0);
                for a in 0..3 {
                    for b in 0..3 {
                        g[e.nodes[a]][e.nodes[b]] += p.weight * p.psi[a] * p.psi[b];
                        l[e.nodes[a]][e.nodes[b]] += p.weight * p.dpsi[a] * p.dpsi[b] * inv_c;
                    }
                }
                quad.push(SurfaceQuad {
                    nodes: e.nodes,
                    coarse: e.coarse,
                    weight: p.weight,
                    psi: p.psi,
                    dpsi: p.dpsi,
                    d2psi: p.d2psi,
                    q1: p.q1,
                    slope0: s0,
                    inv_c,
                    dinv_c,
                });
            }
        }
        let lat = &grid.fine;
        let mut dof_map = vec![usize::MAX; 2 * nf];
        let mut free = Vec::new();
        for c in 0..2 {
            for q in 0..nf {
                let (i, j) = (q % lat.ni, q / lat.ni);
                let fixed = if c == 0 { i == 0 || i + 1 == lat.ni } else { j == 0 };
                if !fixed {
                    dof_map[c * nf + q] = free.len();
                    free.push(c * nf + q);
                }
            }
        }
        Ok(Self {
            params,
            model,
            surface,
            grid,
            j_min,
            speed_range,
            surface_mass,
            gravity_form: g,
            curvature_form: l,
            quad,
            dof_map,
            free,
        })
    }

    pub fn surface_len(&self) -> usize {
        self.grid.fine.ni
    }

    /// Integral of surface samples against the lumped weights.
    pub fn volume(&self, eta: &[f64]) -> f64 {
        dot(&self.surface_mass, eta)
    }

    pub fn width(&self) -> f64 {
        2.0 * self.grid.ell
    }

    fn dense_form(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        m.iter().map(|row| dot(row, x)).collect()
    }

    /// Quadratic surface energy g/2 (eta, eta) + sigma1/2 (eta', eta' / c).
    pub fn surface_energy(&self, eta: &[f64]) -> f64 {
        let ge = Self::dense_form(&self.gravity_form, eta);
        let le = Self::dense_form(&self.curvature_form, eta);
        0.5 * self.params.g * dot(&ge, eta) + 0.5 * self.params.sigma1 * dot(&le, eta)
    }

    /// Equilibrium geometry (zero perturbation, at rest).
    pub fn rest_geometry(&self) -> Result<GeometryFields> {
        let ns = self.surface_len();
        crate::geometry::build_geometry(&self.surface, &vec![0.0; ns], Some(&vec![0.0; ns]), &self.grid, self.j_min)
    }

    /// Geometry of the surface `eta` moving with `deta_dt`.
    pub fn geometry(&self, eta: &[f64], deta_dt: &[f64]) -> Result<GeometryFields> {
        crate::geometry::build_geometry(&self.surface, eta, Some(deta_dt), &self.grid, self.j_min)
    }

    /// Spill guard: 0 < zeta0 + eta <= L at every surface node.
    pub fn check_spill(&self, eta: &[f64]) -> Result<()> {
        let lat = &self.grid.fine;
        for (i, e) in eta.iter().enumerate() {
            let z = lat.zeta0[i] + e;
            if !(z > 0.0 && z <= self.params.big_l) || !z.is_finite() {
                return Err(Error::Spill(format!(
                    "surface height {z:.6e} at x1 = {:.4} leaves (0, {}]",
                    lat.xi[i], self.params.big_l
                )));
            }
        }
        Ok(())
    }
}

/// Geometry-dependent forms of the momentum step.
struct Forms {
    y2: Vec<f64>,
    mesh: Mesh,
    nf: usize,
    mass: Csr,
    /// Viscous plus slip form.
    dissipation: Csr,
    /// Divergence form, pressure rows.
    div: Csr,
    /// Surface velocity rows: v = proj * u on the top dofs.
    proj: Vec<Vec<f64>>,
    /// Global dof of each column of `proj`.
    top_dofs: Vec<usize>,
    h_min: f64,
}

/// Forms plus the explicit volume terms of one step.
struct Assembly {
    forms: Arc<Forms>,
    /// Explicit volume terms (convection and buoyancy) as a load.
    load: Vec<f64>,
    v_max: f64,
}

impl std::ops::Deref for Assembly {
    type Target = Forms;
    fn deref(&self) -> &Forms {
        &self.forms
    }
}

/// Reuses the forms and the factorised system between steps on an unchanged
/// geometry. Cloning yields an empty cache.
#[derive(Default)]
pub struct MomentumCache {
    forms: Option<Arc<Forms>>,
    system: Option<(SystemKey, Arc<SparseLu>)>,
}

/// Identity of the forms plus the step size and regularisation.
struct SystemKey {
    forms: Arc<Forms>,
    dt: u64,
    eps: u64,
}

impl Clone for MomentumCache {
    fn clone(&self) -> Self {
        Self::default()
    }
}

impl std::fmt::Debug for MomentumCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MomentumCache")
            .field("forms", &self.forms.is_some())
            .field("system", &self.system.is_some())
            .finish()
    }
}

impl MomentumCache {
    fn system_for(&mut self, forms: &Arc<Forms>, dt: f64, eps: f64, build: impl FnOnce() -> Csr) -> Result<Arc<SparseLu>> {
        let key = SystemKey { forms: forms.clone(), dt: dt.to_bits(), eps: eps.to_bits() };
        if let Some((k, lu)) = &self.system {
            if Arc::ptr_eq(&k.forms, &key.forms) && k.dt == key.dt && k.eps == key.eps {
                return Ok(lu.clone());
            }
        }
        let lu = Arc::new(SparseLu::new(&build())?);
        self.system = Some((key, lu.clone()));
        Ok(lu)
    }
}

fn build_forms(problem: &FlowProblem, fields: &GeometryFields) -> Forms {
    let grid = &problem.grid;
    let mesh = Mesh::new(grid, &fields.y2);
    let nf = mesh.fine_len;
    let nu = 2 * nf;
    let np = mesh.coarse_len;
    let mu = problem.params.mu;
    let mut mass = Triplets::new(nu, nu);
    let mut diss = Triplets::new(nu, nu);
    let mut div = Triplets::new(np, nu);
    for e in &mesh.elements {
        let mut me = [[0.0; 9]; 9];
        let mut de = [[[[0.0; 2]; 2]; 9]; 9];
        let mut be = [[[0.0; 2]; 9]; 4];
        for p in &e.points {
            let w = p.weight;
            for a in 0..9 {
                let ga = p.q2_grad[a];
                for b in 0..9 {
                    let gb = p.q2_grad[b];
                    me[a][b] += w * p.q2[a] * p.q2[b];
                    let lap = ga[0] * gb[0] + ga[1] * gb[1];
                    for i in 0..2 {
                        for j in 0..2 {
                            let delta = if i == j { lap } else { 0.0 };
                            de[a][b][i][j] += mu * w * (delta + ga[j] * gb[i]);
                        }
                    }
                }
                for q in 0..4 {
                    for i in 0..2 {
                        be[q][a][i] += w * p.q1[q] * ga[i];
                    }
                }
            }
        }
        for a in 0..9 {
            let na = e.fine[a];
            for b in 0..9 {
                let nb = e.fine[b];
                mass.add(na, nb, me[a][b]);
                mass.add(nf + na, nf + nb, me[a][b]);
                for i in 0..2 {
                    for j in 0..2 {
                        diss.add(i * nf + na, j * nf + nb, de[a][b][i][j]);
                    }
                }
            }
            for q in 0..4 {
                for i in 0..2 {
                    div.add(e.coarse[q], i * nf + na, be[q][a][i]);
                }
            }
        }
    }
    let beta = problem.params.beta;
    for s in &mesh.sides {
        for (w, n3, _) in &s.points {
            for a in 0..3 {
                for b in 0..3 {
                    diss.add(s.tangent * nf + s.fine[a], s.tangent * nf + s.fine[b], beta * w * n3[a] * n3[b]);
                }
            }
        }
    }
    let ns = mesh.surface_len;
    let lat = &grid.fine;
    let top_dofs: Vec<usize> = (0..2).flat_map(|c| (0..ns).map(move |i| c * nf + lat.top(i))).collect();
    let mut proj = vec![vec![0.0; 2 * ns]; ns];
    for e in &mesh.top {
        for p in &e.points {
            for b in 0..3 {
                for a in 0..3 {
                    for i in 0..2 {
                        proj[e.nodes[b]][i * ns + e.nodes[a]] += p.weight * p.psi[b] * p.psi[a] * p.normal[i];
                    }
                }
            }
        }
    }
    for (b, row) in proj.iter_mut().enumerate() {
        let m = problem.surface_mass[b];
        row.iter_mut().for_each(|v| *v /= m);
    }
    let mut h_min = 2.0 * lat.h_xi;
    for i in 0..lat.ni {
        for j in 1..lat.nj {
            h_min = h_min.min(fields.y2[lat.idx(i, j)] - fields.y2[lat.idx(i, j - 1)]);
        }
    }
    Forms {
        y2: fields.y2.clone(),
        mesh,
        nf,
        mass: mass.to_csr(),
        dissipation: diss.to_csr(),
        div: div.to_csr(),
        proj,
        top_dofs,
        h_min,
    }
}

fn assemble(
    problem: &FlowProblem,
    fields: &GeometryFields,
    u: &VectorField,
    theta: &[f64],
    opts: &FlowOptions,
    cache: &mut MomentumCache,
) -> Result<Assembly> {
    let grid = &problem.grid;
    check_len(grid.fine.len(), fields.y2.len())?;
    check_len(grid.fine.len(), u[0].len())?;
    check_len(grid.fine.len(), u[1].len())?;
    check_len(grid.coarse.len(), theta.len())?;
    let forms = match &cache.forms {
        Some(f) if f.y2 == fields.y2 => f.clone(),
        _ => {
            let f = Arc::new(build_forms(problem, fields));
            cache.forms = Some(f.clone());
            f
        }
    };
    let nf = forms.nf;
    let g = problem.params.g;
    let zero = vec![0.0; nf];
    let wmesh: &[f64] = match (&fields.rates, opts.moving_geometry) {
        (Some(r), true) => &r.mesh_velocity,
        _ => &zero,
    };
    let mut load = vec![0.0; 2 * nf];
    let mut v_max: f64 = 0.0;
    for e in &forms.mesh.elements {
        for p in &e.points {
            let w = p.weight;
            let mut uq = [0.0; 2];
            let mut gq = [[0.0; 2]; 2];
            let mut wq = 0.0;
            for l in 0..9 {
                let n = e.fine[l];
                for c in 0..2 {
                    uq[c] += p.q2[l] * u[c][n];
                    gq[c][0] += p.q2_grad[l][0] * u[c][n];
                    gq[c][1] += p.q2_grad[l][1] * u[c][n];
                }
                wq += p.q2[l] * wmesh[n];
            }
            let th: f64 = (0..4).map(|a| p.q1[a] * theta[e.coarse[a]]).sum();
            let rel = [uq[0], uq[1] - wq];
            v_max = v_max.max(rel[0].hypot(rel[1]));
            let conv = if opts.convection {
                [rel[0] * gq[0][0] + rel[1] * gq[0][1], rel[0] * gq[1][0] + rel[1] * gq[1][1]]
            } else {
                [0.0; 2]
            };
            for a in 0..9 {
                let fa = p.q2[a];
                let na = e.fine[a];
                load[na] -= w * fa * conv[0];
                load[nf + na] -= w * fa * (conv[1] + g * th);
            }
        }
    }
    Ok(Assembly { forms, load, v_max })
}

impl Forms {
    fn surface_velocity(&self, x: &[f64]) -> Vec<f64> {
        let top: Vec<f64> = self.top_dofs.iter().map(|&d| x[d]).collect();
        self.proj.iter().map(|row| dot(row, &top)).collect()
    }

    /// Adds proj^T s to the load on the top dofs, scaled.
    fn add_surface_load(&self, out: &mut [f64], s: &[f64], scale: f64) {
        for (b, row) in self.proj.iter().enumerate() {
            for (k, &d) in self.top_dofs.iter().enumerate() {
                out[d] += scale * row[k] * s[b];
            }
        }
    }

    /// proj^T X proj restricted to nonzero entries.
    fn surface_block(&self, x: &[Vec<f64>]) -> Vec<(usize, usize, f64)> {
        let ns = self.proj.len();
        let nt = self.top_dofs.len();
        let mut xp = vec![vec![0.0; nt]; ns];
        for b in 0..ns {
            for c in 0..ns {
                let xv = x[b][c];
                if xv != 0.0 {
                    for k in 0..nt {
                        xp[b][k] += xv * self.proj[c][k];
                    }
                }
            }
        }
        let mut out = Vec::new();
        for k1 in 0..nt {
            for k2 in 0..nt {
                let v: f64 = (0..ns).map(|b| self.proj[b][k1] * xp[b][k2]).sum();
                if v != 0.0 {
                    out.push((self.top_dofs[k1], self.top_dofs[k2], v));
                }
            }
        }
        out
    }

    fn flatten(&self, u: &VectorField) -> Vec<f64> {
        let mut x = u[0].clone();
        x.extend_from_slice(&u[1]);
        x
    }

    fn split(&self, x: &[f64]) -> VectorField {
        [x[..self.nf].to_vec(), x[self.nf..].to_vec()]
    }
}

/// Quantities of one momentum step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentumReport {
    /// Kinetic plus surface energy before and after the step.
    pub energy_before: f64,
    pub energy_after: f64,
    /// Step length times the dissipation rate at the new level.
    pub dissipation: f64,
    /// Change of the surface volume produced by the step.
    pub volume_drift: f64,
    /// Mean removed from the surface after the step.
    pub recentering: f64,
    /// Nodal residual of the contact balance at -ell and +ell.
    pub contact_residual: [f64; 2],
    /// Speeds the strong response law would assign at -ell and +ell.
    pub contact_law_speed: [f64; 2],
    pub cfl_limit: f64,
}

impl MomentumReport {
    /// energy_after - energy_before + dissipation; nonpositive for the
    /// linearised dynamics.
    pub fn energy_defect(&self) -> f64 {
        self.energy_after - self.energy_before + self.dissipation
    }
}

/// Surface load of the explicit surface terms and the known part of the
/// implicit ones.
fn surface_rhs(problem: &FlowProblem, state: &FlowState, theta: &[f64], opts: &FlowOptions) -> Vec<f64> {
    let prm = &problem.params;
    let ns = problem.surface_len();
    let c = &problem.grid.coarse;
    let ge = FlowProblem::dense_form(&problem.gravity_form, &state.eta);
    let le = FlowProblem::dense_form(&problem.curvature_form, &state.eta);
    let mut tau: Vec<f64> = (0..ns).map(|b| prm.g * ge[b] + prm.sigma1 * le[b]).collect();
    if opts.nonlinear {
        let (eta, v) = (&state.eta, &state.deta_dt);
        for q in &problem.quad {
            let mut d1e = 0.0;
            let mut d2e = 0.0;
            let mut d1v = 0.0;
            let mut d2v = 0.0;
            for a in 0..3 {
                d1e += q.dpsi[a] * eta[q.nodes[a]];
                d2e += q.d2psi[a] * eta[q.nodes[a]];
                d1v += q.dpsi[a] * v[q.nodes[a]];
                d2v += q.d2psi[a] * v[q.nodes[a]];
            }
            let rem = curvature_remainder(q.slope0, d1e);
            let th: f64 = (0..2).map(|a| q.q1[a] * theta[c.top(q.coarse[a])]).sum();
            let dlin = (d2e + opts.eps * d2v) * q.inv_c + (d1e + opts.eps * d1v) * q.dinv_c;
            for b in 0..3 {
                tau[q.nodes[b]] += q.weight * (prm.sigma1 * rem * q.dpsi[b] + prm.sigma2 * th * dlin * q.psi[b]);
            }
        }
        let m = &problem.model;
        tau[0] += m.kappa * m.remainder(v[0]);
        tau[ns - 1] += m.kappa * m.remainder(v[ns - 1]);
    }
    tau
}

fn theta_surface_fine(problem: &FlowProblem, theta: &[f64]) -> Vec<f64> {
    let fine = problem.grid.prolong(theta);
    problem.grid.fine.top_row(&fine).to_vec()
}

/// Saddle-point matrix of the step on the free velocity dofs and pressure.
fn system_matrix(problem: &FlowProblem, asm: &Assembly, opts: &FlowOptions, dt: f64) -> Csr {
    let prm = &problem.params;
    let ns = problem.surface_len();
    let nu = 2 * asm.nf;
    let np = problem.grid.coarse.len();
    let nfree = problem.free.len();
    let mut x = vec![vec![0.0; ns]; ns];
    for b in 0..ns {
        for c in 0..ns {
            x[b][c] = prm.g * dt * problem.gravity_form[b][c] + prm.sigma1 * (dt + opts.eps) * problem.curvature_form[b][c];
        }
    }
    x[0][0] += prm.kappa;
    x[ns - 1][ns - 1] += prm.kappa;

    let mut t = Triplets::new(nfree + np, nfree + np);
    let map = &problem.dof_map;
    let mut push = |r: usize, c: usize, v: f64| {
        if map[r] != usize::MAX && map[c] != usize::MAX {
            t.add(map[r], map[c], v);
        }
    };
    for r in 0..nu {
        for (c, v) in asm.mass.row(r) {
            push(r, c, v / dt);
        }
        for (c, v) in asm.dissipation.row(r) {
            push(r, c, v);
        }
    }
    for (r, c, v) in asm.surface_block(&x) {
        push(r, c, v);
    }
    for q in 0..np {
        for (c, v) in asm.div.row(q) {
            if map[c] != usize::MAX {
                t.add(nfree + q, map[c], -v);
                t.add(map[c], nfree + q, -v);
            }
        }
    }
    t.to_csr()
}

/// One semi-implicit step of the momentum, pressure and surface equations on
/// the geometry `fields` (built from `state.eta`), with the temperature
/// `theta` on the coarse lattice.
pub fn momentum_step(
    problem: &FlowProblem,
    state: &FlowState,
    fields: &GeometryFields,
    theta: &[f64],
    opts: &FlowOptions,
    dt: f64,
) -> Result<(FlowState, MomentumReport)> {
    momentum_step_cached(problem, state, fields, theta, opts, dt, &mut MomentumCache::default())
}

/// `momentum_step` reusing forms and factorisations held in `cache`.
pub fn momentum_step_cached(
    problem: &FlowProblem,
    state: &FlowState,
    fields: &GeometryFields,
    theta: &[f64],
    opts: &FlowOptions,
    dt: f64,
    cache: &mut MomentumCache,
) -> Result<(FlowState, MomentumReport)> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let ns = problem.surface_len();
    check_len(ns, state.eta.len())?;
    check_len(ns, state.deta_dt.len())?;
    let prm = &problem.params;
    let asm = assemble(problem, fields, &state.u, theta, opts, cache)?;
    let cfl_limit = if asm.v_max > 0.0 { asm.h_min / asm.v_max } else { f64::INFINITY };
    if opts.convection && dt > cfl_limit {
        return Err(Error::Cfl { dt, limit: cfl_limit });
    }
    let nu = 2 * asm.nf;
    let np = problem.grid.coarse.len();
    let nfree = problem.free.len();
    let mut rhs_u = asm.load.clone();
    let uflat = asm.flatten(&state.u);
    let mu_n = asm.mass.mul(&uflat);
    rhs_u.iter_mut().zip(&mu_n).for_each(|(r, m)| *r += m / dt);
    let tau = surface_rhs(problem, state, theta, opts);
    asm.add_surface_load(&mut rhs_u, &tau, -1.0);
    let mut rhs = vec![0.0; nfree + np];
    for (k, &d) in problem.free.iter().enumerate() {
        rhs[k] = rhs_u[d];
    }
    let lu = cache.system_for(&asm.forms, dt, opts.eps, || system_matrix(problem, &asm, opts, dt))?;
    let sol = lu.solve(&rhs)?;
    let mut xnew = vec![0.0; nu];
    for (k, &d) in problem.free.iter().enumerate() {
        xnew[d] = sol[k];
    }
    let p = sol[nfree..].to_vec();
    let v = asm.surface_velocity(&xnew);
    let mut eta: Vec<f64> = state.eta.iter().zip(&v).map(|(e, s)| e + dt * s).collect();
    let volume_drift = problem.volume(&eta) - problem.volume(&state.eta);
    let mean = problem.volume(&eta) / problem.width();
    eta.iter_mut().for_each(|e| *e -= mean);
    problem.check_spill(&eta)?;

    let u = asm.split(&xnew);
    let du_dt: VectorField = [0, 1].map(|c| u[c].iter().zip(&state.u[c]).map(|(a, b)| (a - b) / dt).collect());
    let d2eta_dt2: Vec<f64> = v.iter().zip(&state.deta_dt).map(|(a, b)| (a - b) / dt).collect();

    let energy_before = 0.5 * asm.mass.bilinear(&uflat, &uflat) + problem.surface_energy(&state.eta);
    let lv = FlowProblem::dense_form(&problem.curvature_form, &v);
    let dissipation = dt
        * (asm.dissipation.bilinear(&xnew, &xnew)
            + prm.kappa * (v[0] * v[0] + v[ns - 1] * v[ns - 1])
            + prm.sigma1 * opts.eps * dot(&lv, &v));
    let energy_after = 0.5 * asm.mass.bilinear(&xnew, &xnew) + problem.surface_energy(&eta);

    let th_s = theta_surface_fine(problem, theta);
    let lat = &problem.grid.fine;
    let st = surface_tension_operator(lat, prm, &problem.model, &eta, &v, &th_s, opts.eps)?;
    let d1e = surface_slope(&eta, lat.h_xi);
    let d1v = surface_slope(&v, lat.h_xi);
    let ends = ContactEnds {
        dzeta0: [lat.dzeta0[0], lat.dzeta0[ns - 1]],
        d1_eta: [d1e[0], d1e[ns - 1]],
        d1_deta_dt: [d1v[0], d1v[ns - 1]],
    };
    let contact_law_speed = apply_contact_law(&problem.model, prm.sigma1, opts.eps, &ends, problem.speed_range)?;
    let next = FlowState { u, p, eta, deta_dt: v, d2eta_dt2, du_dt, time: state.time + dt };
    Ok((
        next,
        MomentumReport {
            energy_before,
            energy_after,
            dissipation,
            volume_drift,
            recentering: mean.abs(),
            contact_residual: st.contact_residual,
            contact_law_speed,
            cfl_limit,
        },
    ))
}

/// Discrete invariants of a velocity field on a geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowInvariants {
    /// Largest weak divergence against the pressure basis.
    pub divergence: f64,
    /// Largest normal velocity at the wall and bottom nodes.
    pub wall_flux: f64,
    /// Mean of the surface height.
    pub mean_eta: f64,
    /// Largest |v - proj(u . N)| over the surface nodes.
    pub kinematic: f64,
}

pub fn flow_invariants(problem: &FlowProblem, fields: &GeometryFields, state: &FlowState) -> Result<FlowInvariants> {
    let lat = &problem.grid.fine;
    let asm = assemble(problem, fields, &state.u, &vec![0.0; problem.grid.coarse.len()], &FlowOptions::linear(0.0), &mut MomentumCache::default())?;
    let x = asm.flatten(&state.u);
    let divergence = crate::linalg::norm_inf(&asm.div.mul(&x));
    let mut wall_flux: f64 = 0.0;
    for j in 0..lat.nj {
        wall_flux = wall_flux.max(state.u[0][lat.idx(0, j)].abs()).max(state.u[0][lat.idx(lat.ni - 1, j)].abs());
    }
    for i in 0..lat.ni {
        wall_flux = wall_flux.max(state.u[1][lat.idx(i, 0)].abs());
    }
    let v = asm.surface_velocity(&x);
    let kinematic = v.iter().zip(&state.deta_dt).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(FlowInvariants {
        divergence,
        wall_flux,
        mean_eta: problem.volume(&state.eta) / problem.width(),
        kinematic,
    })
}

/// Projects a velocity onto the discretely divergence-free fields with no
/// flow through the walls and bottom (weighted L2 projection on `fields`),
/// and returns it with the induced surface velocity.
pub fn project_velocity(problem: &FlowProblem, fields: &GeometryFields, u0: &VectorField) -> Result<(VectorField, Vec<f64>)> {
    let np = problem.grid.coarse.len();
    let asm = assemble(problem, fields, u0, &vec![0.0; np], &FlowOptions::linear(0.0), &mut MomentumCache::default())?;
    let nfree = problem.free.len();
    let map = &problem.dof_map;
    let mut t = Triplets::new(nfree + np, nfree + np);
    for r in 0..2 * asm.nf {
        if map[r] == usize::MAX {
            continue;
        }
        for (c, v) in asm.mass.row(r) {
            if map[c] != usize::MAX {
                t.add(map[r], map[c], v);
            }
        }
    }
    for q in 0..np {
        for (c, v) in asm.div.row(q) {
            if map[c] != usize::MAX {
                t.add(nfree + q, map[c], -v);
                t.add(map[c], nfree + q, -v);
            }
        }
    }
    let mu0 = asm.mass.mul(&asm.flatten(u0));
    let mut rhs = vec![0.0; nfree + np];
    for (k, &d) in problem.free.iter().enumerate() {
        rhs[k] = mu0[d];
    }
    let sol = SparseLu::new(&t.to_csr())?.solve(&rhs)?;
    let mut x = vec![0.0; 2 * asm.nf];
    for (k, &d) in problem.free.iter().enumerate() {
        x[d] = sol[k];
    }
    let v = asm.surface_velocity(&x);
    Ok((asm.split(&x), v))
}
