//! Temperature on the moving domain.
//!
//! Bilinear elements on the mapped grid carry the temperature, with lumped
//! mass and lumped Robin weights. The nodal path advances the values by
//! Crank-Nicolson with the geometry frozen over a step; the Galerkin path
//! advances coefficients in a fixed eigenbasis of the initial geometry while
//! the forms are re-assembled on the current geometry. Transport is explicit
//! and evaluated at the extrapolated midpoint.

use crate::error::{check_len, Error, Result};
use crate::fem::Mesh;
use crate::geometry::{div_m, grad_m, GeometryFields, Grid, VectorField};
use crate::linalg::{dense_solve, dot, symmetric_eigen, Csr, SparseLu, Triplets};
use crate::params::PhysicalParams;
use faer::Mat;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatCoefficients {
    pub k: f64,
    /// Factor of the theta |N| term in the surface condition.
    pub robin_weight: f64,
    /// Zero temperature on the walls and the bottom.
    pub dirichlet: bool,
}

impl HeatCoefficients {
    pub fn new(params: &PhysicalParams) -> Self {
        Self { k: params.k, robin_weight: 1.0, dirichlet: true }
    }

    /// Closed system: no surface loss and no fixed walls.
    pub fn insulated(k: f64) -> Self {
        Self { k, robin_weight: 0.0, dirichlet: false }
    }
}

/// Bulk source on the coarse lattice and surface flux per surface node.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatForcing {
    pub bulk: Vec<f64>,
    pub surface: Vec<f64>,
}

impl HeatForcing {
    pub fn zero(ops: &HeatOperators) -> Self {
        Self { bulk: vec![0.0; ops.len()], surface: vec![0.0; ops.ni] }
    }
}

/// Discrete forms of the heat problem on one geometry.
#[derive(Debug, Clone)]
pub struct HeatOperators {
    pub coef: HeatCoefficients,
    pub mesh: Mesh,
    pub ni: usize,
    pub nj: usize,
    /// Physical position of every coarse node.
    pub nodes: Vec<[f64; 2]>,
    pub mass: Vec<f64>,
    /// k times the gradient form.
    pub diffusion: Csr,
    /// Lumped surface weights of theta |N| on the full numbering.
    pub robin: Vec<f64>,
    /// Integral of each surface basis function in x1.
    pub surface_mass: Vec<f64>,
    /// Nodes not fixed by the Dirichlet condition.
    pub free: Vec<usize>,
    /// diffusion + diag(robin).
    pub stiffness: Csr,
    h_min: f64,
}

impl HeatOperators {
    pub fn new(grid: &Grid, fields: &GeometryFields, coef: HeatCoefficients) -> Result<Self> {
        check_len(grid.fine.len(), fields.y2.len())?;
        let mesh = Mesh::new(grid, &fields.y2);
        let c = &grid.coarse;
        let n = c.len();
        let y2 = grid.restrict(&fields.y2);
        let nodes: Vec<[f64; 2]> = (0..n).map(|q| [c.xi[q % c.ni], y2[q]]).collect();

        let mut mass = vec![0.0; n];
        let mut t = Triplets::new(n, n);
        for e in &mesh.elements {
            for p in &e.points {
                for a in 0..4 {
                    mass[e.coarse[a]] += p.weight * p.q1[a];
                    for b in 0..4 {
                        let g = p.q1_grad[a][0] * p.q1_grad[b][0] + p.q1_grad[a][1] * p.q1_grad[b][1];
                        t.add(e.coarse[a], e.coarse[b], coef.k * p.weight * g);
                    }
                }
            }
        }
        let diffusion = t.to_csr();
        let mut robin = vec![0.0; n];
        let mut surface_mass = vec![0.0; c.ni];
        for e in &mesh.top {
            for p in &e.points {
                let len = p.normal[0].hypot(p.normal[1]);
                for a in 0..2 {
                    let s = e.coarse[a];
                    surface_mass[s] += p.weight * p.q1[a];
                    robin[c.top(s)] += coef.robin_weight * p.weight * p.q1[a] * len;
                }
            }
        }
        let stiffness = diffusion.add_diagonal(&robin, 1.0);
        let free: Vec<usize> = (0..n)
            .filter(|&q| {
                let (i, j) = (q % c.ni, q / c.ni);
                !coef.dirichlet || (i > 0 && i + 1 < c.ni && j > 0)
            })
            .collect();
        let mut h_min = 2.0 * grid.fine.h_xi;
        for i in 0..c.ni {
            for j in 1..c.nj {
                h_min = h_min.min(y2[c.idx(i, j)] - y2[c.idx(i, j - 1)]);
            }
        }
        Ok(Self { coef, mesh, ni: c.ni, nj: c.nj, nodes, mass, diffusion, robin, surface_mass, free, stiffness, h_min })
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    #[inline]
    pub fn top(&self, i: usize) -> usize {
        (self.nj - 1) * self.ni + i
    }

    /// Nodal values of a function of the physical position.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|p| f(p[0], p[1])).collect()
    }

    /// Load vector of bulk and surface data.
    pub fn load(&self, forcing: &HeatForcing) -> Result<Vec<f64>> {
        check_len(self.len(), forcing.bulk.len())?;
        check_len(self.ni, forcing.surface.len())?;
        let mut b: Vec<f64> = self.mass.iter().zip(&forcing.bulk).map(|(m, f)| m * f).collect();
        for i in 0..self.ni {
            b[self.top(i)] += self.surface_mass[i] * forcing.surface[i];
        }
        Ok(b)
    }

    /// Weak transport term (v . grad theta, psi) for a biquadratic velocity.
    pub fn transport(&self, velocity: &VectorField, theta: &[f64]) -> Result<Vec<f64>> {
        check_len(self.mesh.fine_len, velocity[0].len())?;
        check_len(self.mesh.fine_len, velocity[1].len())?;
        check_len(self.len(), theta.len())?;
        let mut out = vec![0.0; self.len()];
        for e in &self.mesh.elements {
            for p in &e.points {
                let mut v = [0.0; 2];
                for l in 0..9 {
                    v[0] += p.q2[l] * velocity[0][e.fine[l]];
                    v[1] += p.q2[l] * velocity[1][e.fine[l]];
                }
                let mut g = [0.0; 2];
                for a in 0..4 {
                    g[0] += p.q1_grad[a][0] * theta[e.coarse[a]];
                    g[1] += p.q1_grad[a][1] * theta[e.coarse[a]];
                }
                let adv = v[0] * g[0] + v[1] * g[1];
                for a in 0..4 {
                    out[e.coarse[a]] += p.weight * p.q1[a] * adv;
                }
            }
        }
        Ok(out)
    }

    /// Largest stable step for explicit transport with the given velocity.
    pub fn cfl_limit(&self, velocity: &VectorField) -> f64 {
        let vmax = (0..velocity[0].len()).map(|q| velocity[0][q].hypot(velocity[1][q])).fold(0.0, f64::max);
        if vmax > 0.0 {
            self.h_min / vmax
        } else {
            f64::INFINITY
        }
    }

    /// Half the squared weighted L2 norm.
    pub fn energy(&self, theta: &[f64]) -> f64 {
        0.5 * self.mass.iter().zip(theta).map(|(m, t)| m * t * t).sum::<f64>()
    }

    pub fn l2_norm(&self, theta: &[f64]) -> f64 {
        (2.0 * self.energy(theta)).sqrt()
    }

    /// Square of the discrete H1 form: k |grad theta|^2 plus the surface term.
    pub fn h1_form(&self, theta: &[f64]) -> f64 {
        self.stiffness.bilinear(theta, theta)
    }

    pub fn total_heat(&self, theta: &[f64]) -> f64 {
        dot(&self.mass, theta)
    }

    fn gather(&self, v: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&q| v[q]).collect()
    }

    fn scatter(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (k, &q) in self.free.iter().enumerate() {
            out[q] = v[k];
        }
        out
    }

    /// Factorised Crank-Nicolson matrix M / dt + B / 2 on the free nodes.
    pub fn crank_nicolson(&self, dt: f64) -> Result<CrankNicolson> {
        if !(dt > 0.0) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let a = self.stiffness.scaled(0.5).add_diagonal(&self.mass, 1.0 / dt);
        Ok(CrankNicolson { lu: SparseLu::new(&a.principal(&self.free))?, dt })
    }
}

pub struct CrankNicolson {
    lu: SparseLu,
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatState {
    pub theta: Vec<f64>,
    pub dtheta_dt: Vec<f64>,
    pub d2theta_dt2: Vec<f64>,
    pub time: f64,
}

impl HeatState {
    pub fn new(theta: Vec<f64>, dtheta_dt: Vec<f64>, time: f64) -> Self {
        let n = theta.len();
        Self { theta, dtheta_dt, d2theta_dt2: vec![0.0; n], time }
    }

    pub fn at_rest(n: usize) -> Self {
        Self::new(vec![0.0; n], vec![0.0; n], 0.0)
    }
}

/// Terms of the discrete energy balance over one step, all integrated in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEnergy {
    pub before: f64,
    pub after: f64,
    pub diffusion: f64,
    pub surface: f64,
    pub work: f64,
}

impl StepEnergy {
    /// after - before + dissipation - work.
    pub fn residual(&self) -> f64 {
        self.after - self.before + self.diffusion + self.surface - self.work
    }
}

/// One Crank-Nicolson step. `velocity` is the transport velocity relative to
/// the mapped nodes on the fine lattice; `forcing` is evaluated at the
/// midpoint of the step.
pub fn step_fd(
    ops: &HeatOperators,
    cn: &CrankNicolson,
    state: &HeatState,
    velocity: Option<&VectorField>,
    forcing: &HeatForcing,
) -> Result<(HeatState, StepEnergy)> {
    let dt = cn.dt;
    check_len(ops.len(), state.theta.len())?;
    check_len(ops.len(), state.dtheta_dt.len())?;
    let mut b = ops.load(forcing)?;
    if let Some(v) = velocity {
        let limit = ops.cfl_limit(v);
        if dt > limit {
            return Err(Error::Cfl { dt, limit });
        }
        let mid: Vec<f64> = state.theta.iter().zip(&state.dtheta_dt).map(|(t, r)| t + 0.5 * dt * r).collect();
        let c = ops.transport(v, &mid)?;
        b.iter_mut().zip(&c).for_each(|(x, y)| *x -= y);
    }
    let bt = ops.stiffness.mul(&state.theta);
    let rhs: Vec<f64> = (0..ops.len()).map(|q| ops.mass[q] / dt * state.theta[q] - 0.5 * bt[q] + b[q]).collect();
    let sol = cn.lu.solve(&ops.gather(&rhs))?;
    let theta = ops.scatter(&sol);
    let dtheta_dt: Vec<f64> = theta.iter().zip(&state.theta).map(|(a, b)| (a - b) / dt).collect();
    let d2theta_dt2: Vec<f64> = dtheta_dt.iter().zip(&state.dtheta_dt).map(|(a, b)| (a - b) / dt).collect();
    let mid: Vec<f64> = theta.iter().zip(&state.theta).map(|(a, b)| 0.5 * (a + b)).collect();
    let energy = StepEnergy {
        before: ops.energy(&state.theta),
        after: ops.energy(&theta),
        diffusion: dt * ops.diffusion.bilinear(&mid, &mid),
        surface: dt * ops.robin.iter().zip(&mid).map(|(r, t)| r * t * t).sum::<f64>(),
        work: dt * ops.free.iter().map(|&q| mid[q] * b[q]).sum::<f64>(),
    };
    Ok((HeatState { theta, dtheta_dt, d2theta_dt2, time: state.time + dt }, energy))
}

/// Eigenbasis of the heat operator on a fixed geometry.
#[derive(Debug, Clone)]
pub struct GalerkinBasis {
    /// Modes as full nodal vectors, orthonormal in the lumped mass.
    pub modes: Vec<Vec<f64>>,
    pub lambdas: Vec<f64>,
    pub mass: Vec<f64>,
    pub stiffness: Csr,
}

/// Lowest `m` eigenpairs of B w = lambda M w on the free nodes.
pub fn build_basis(ops: &HeatOperators, m: usize) -> Result<GalerkinBasis> {
    let nf = ops.free.len();
    if m == 0 || m > nf {
        return Err(Error::Domain(format!("mode count {m} outside 1..={nf}")));
    }
    if let Some(j) = ops.mesh.elements.iter().flat_map(|e| e.points.iter()).map(|p| p.weight).reduce(f64::min) {
        if !(j > 0.0) {
            return Err(Error::Diffeomorphism { min_j: j, threshold: 0.0 });
        }
    }
    let b = ops.stiffness.principal(&ops.free);
    let scale: Vec<f64> = ops.free.iter().map(|&q| 1.0 / ops.mass[q].sqrt()).collect();
    let mut s = vec![vec![0.0; nf]; nf];
    for (r, row) in s.iter_mut().enumerate() {
        for (c, v) in b.row(r) {
            row[c] = scale[r] * v * scale[c];
        }
    }
    // symmetrise against assembly roundoff
    for r in 0..nf {
        for c in 0..r {
            let v = 0.5 * (s[r][c] + s[c][r]);
            s[r][c] = v;
            s[c][r] = v;
        }
    }
    let (vals, vecs) = symmetric_eigen(&s)?;
    let modes = (0..m)
        .map(|k| {
            let w: Vec<f64> = (0..nf).map(|r| scale[r] * vecs[r][k]).collect();
            ops.scatter(&w)
        })
        .collect();
    Ok(GalerkinBasis { modes, lambdas: vals[..m].to_vec(), mass: ops.mass.clone(), stiffness: ops.stiffness.clone() })
}

impl GalerkinBasis {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Mass-orthogonal projection onto the span of the modes.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        self.modes
            .iter()
            .map(|w| w.iter().zip(theta).zip(&self.mass).map(|((a, b), m)| a * b * m).sum())
            .collect()
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.mass.len()];
        for (w, d) in self.modes.iter().zip(coeffs) {
            out.iter_mut().zip(w).for_each(|(o, v)| *o += d * v);
        }
        out
    }

    pub fn rayleigh_quotient(&self, theta: &[f64]) -> f64 {
        let num = self.stiffness.bilinear(theta, theta);
        let den: f64 = theta.iter().zip(&self.mass).map(|(t, m)| m * t * t).sum();
        num / den
    }

    /// Gram matrices W^T M W and W^T B W on the given operators.
    pub fn forms(&self, ops: &HeatOperators) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (m, n) = (self.len(), ops.len());
        let w = Mat::from_fn(n, m, |q, k| self.modes[k][q]);
        let mw = Mat::from_fn(n, m, |q, k| ops.mass[q] * self.modes[k][q]);
        let bw_cols: Vec<Vec<f64>> = self.modes.iter().map(|v| ops.stiffness.mul(v)).collect();
        let bw = Mat::from_fn(n, m, |q, k| bw_cols[k][q]);
        let mm = w.transpose() * &mw;
        let bb = w.transpose() * &bw;
        let sym = |a: &Mat<f64>| -> Vec<Vec<f64>> {
            (0..m).map(|j| (0..m).map(|k| 0.5 * (a[(j, k)] + a[(k, j)])).collect()).collect()
        };
        (sym(&mm), sym(&bb))
    }
}

/// Coefficients and their rate in a Galerkin basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinState {
    pub coeffs: Vec<f64>,
    pub rate: Vec<f64>,
    pub time: f64,
}

/// One trapezoidal step of the coefficient system assembled on `ops`.
pub fn step_galerkin(
    basis: &GalerkinBasis,
    ops: &HeatOperators,
    state: &GalerkinState,
    velocity: Option<&VectorField>,
    forcing: &HeatForcing,
    dt: f64,
) -> Result<GalerkinState> {
    let m = basis.len();
    check_len(m, state.coeffs.len())?;
    check_len(ops.len(), basis.mass.len())?;
    let (mm, bb) = basis.forms(ops);
    let mut b = ops.load(forcing)?;
    if let Some(v) = velocity {
        let limit = ops.cfl_limit(v);
        if dt > limit {
            return Err(Error::Cfl { dt, limit });
        }
        let mid: Vec<f64> = state.coeffs.iter().zip(&state.rate).map(|(d, r)| d + 0.5 * dt * r).collect();
        let c = ops.transport(v, &basis.reconstruct(&mid))?;
        b.iter_mut().zip(&c).for_each(|(x, y)| *x -= y);
    }
    let mut lhs = vec![vec![0.0; m]; m];
    let mut rhs = vec![0.0; m];
    for j in 0..m {
        rhs[j] = dot(&basis.modes[j], &b);
        for k in 0..m {
            lhs[j][k] = mm[j][k] / dt + 0.5 * bb[j][k];
            rhs[j] += (mm[j][k] / dt - 0.5 * bb[j][k]) * state.coeffs[k];
        }
    }
    let coeffs = dense_solve(&lhs, &rhs).map_err(|_| Error::Solver("singular Galerkin mass matrix".into()))?;
    let rate = coeffs.iter().zip(&state.coeffs).map(|(a, b)| (a - b) / dt).collect();
    Ok(GalerkinState { coeffs, rate, time: state.time + dt })
}

/// Solves -k Lap theta = bulk with k grad theta . N + theta |N| = surface and
/// theta = 0 on the walls and bottom.
pub fn robin_elliptic_solve(ops: &HeatOperators, bulk: &[f64], surface: &[f64]) -> Result<Vec<f64>> {
    let b = ops.load(&HeatForcing { bulk: bulk.to_vec(), surface: surface.to_vec() })?;
    let a = ops.stiffness.principal(&ops.free);
    let sol = SparseLu::new(&a)?.solve(&ops.gather(&b))?;
    Ok(ops.scatter(&sol))
}

/// Largest nodal residual of the discrete Robin problem on the free nodes.
pub fn robin_residual(ops: &HeatOperators, theta: &[f64], bulk: &[f64], surface: &[f64]) -> Result<f64> {
    let b = ops.load(&HeatForcing { bulk: bulk.to_vec(), surface: surface.to_vec() })?;
    let bt = ops.stiffness.mul(theta);
    Ok(ops.free.iter().map(|&q| (bt[q] - b[q]).abs()).fold(0.0, f64::max))
}

/// Forcing of the time-differentiated heat problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingChain {
    /// k div_A grad_{A_t} theta + k div_{A_t} grad_A theta.
    pub g8: Vec<f64>,
    /// -k grad_{A_t} theta . N - k grad_A theta . N_t - theta |N|_t.
    pub g9: Vec<f64>,
    pub f8_1: Vec<f64>,
    pub f9_1: Vec<f64>,
}

/// Commutator terms from differentiating the transformed operators in time,
/// evaluated by differences on the lattice of `coarse` (which must carry
/// rates). `f8_t` and `f9_t` are the time derivatives of the forcing.
pub fn dt_forcing_chain(
    coarse: &GeometryFields,
    k: f64,
    theta: &[f64],
    f8_t: &[f64],
    f9_t: &[f64],
) -> Result<ForcingChain> {
    let lat = &coarse.lattice;
    let rates = coarse.rates()?;
    check_len(lat.len(), theta.len())?;
    check_len(lat.len(), f8_t.len())?;
    check_len(lat.ni, f9_t.len())?;
    let g = grad_m(lat, &coarse.cal_a, theta)?;
    let gt = grad_m(lat, &rates.cal_a_t, theta)?;
    let a = div_m(lat, &coarse.cal_a, &gt)?;
    let b = div_m(lat, &rates.cal_a_t, &g)?;
    let g8: Vec<f64> = a.iter().zip(&b).map(|(x, y)| k * (x + y)).collect();
    let g9: Vec<f64> = (0..lat.ni)
        .map(|i| {
            let q = lat.top(i);
            let n = coarse.normal[i];
            let nt = rates.normal_t[i];
            -k * (gt[0][q] * n[0] + gt[1][q] * n[1])
                - k * (g[0][q] * nt[0] + g[1][q] * nt[1])
                - theta[q] * rates.normal_len_t[i]
        })
        .collect();
    let f8_1 = g8.iter().zip(f8_t).map(|(a, b)| a + b).collect();
    let f9_1 = g9.iter().zip(f9_t).map(|(a, b)| a + b).collect();
    Ok(ForcingChain { g8, g9, f8_1, f9_1 })
}

/// Data of the initial-value construction for the temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialHeatInput {
    pub d2theta0: Vec<f64>,
    pub f8: Vec<f64>,
    pub f8_t: Vec<f64>,
    pub f9: Vec<f64>,
    pub f9_t: Vec<f64>,
}

impl InitialHeatInput {
    pub fn zero(ops: &HeatOperators) -> Self {
        let (n, m) = (ops.len(), ops.ni);
        Self { d2theta0: vec![0.0; n], f8: vec![0.0; n], f8_t: vec![0.0; n], f9: vec![0.0; m], f9_t: vec![0.0; m] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialHeatData {
    pub theta0: Vec<f64>,
    pub dtheta0: Vec<f64>,
    pub sweeps: usize,
    /// Discrete H1 size of the theta0 update per sweep.
    pub increments: Vec<f64>,
    /// Largest nodal residual of the heat equation and of its time derivative at t = 0.
    pub residual: f64,
}

/// Alternating Robin solves for (theta(0), d_t theta(0)):
/// -k Lap d_t theta = F^{8,1}(theta) - d_t^2 theta, then
/// -k Lap theta = F^8 - d_t theta, each with its surface data, until the
/// theta update falls below `tol` in the discrete H1 norm.
pub fn construct_heat_initial_data(
    ops: &HeatOperators,
    coarse: &GeometryFields,
    input: &InitialHeatInput,
    tol: f64,
    max_sweeps: usize,
) -> Result<InitialHeatData> {
    let k = ops.coef.k;
    let n = ops.len();
    let mut theta = vec![0.0; n];
    let mut dtheta = vec![0.0; n];
    let mut increments = Vec::new();
    let a = ops.stiffness.principal(&ops.free);
    let lu = SparseLu::new(&a)?;
    let solve = |bulk: &[f64], surface: &[f64]| -> Result<Vec<f64>> {
        let b = ops.load(&HeatForcing { bulk: bulk.to_vec(), surface: surface.to_vec() })?;
        Ok(ops.scatter(&lu.solve(&ops.gather(&b))?))
    };
    for sweep in 1..=max_sweeps {
        let chain = dt_forcing_chain(coarse, k, &theta, &input.f8_t, &input.f9_t)?;
        let bulk_t: Vec<f64> = chain.f8_1.iter().zip(&input.d2theta0).map(|(f, d)| f - d).collect();
        dtheta = solve(&bulk_t, &chain.f9_1)?;
        let bulk: Vec<f64> = input.f8.iter().zip(&dtheta).map(|(f, d)| f - d).collect();
        let next = solve(&bulk, &input.f9)?;
        let diff: Vec<f64> = next.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let inc = ops.h1_form(&diff).max(0.0).sqrt();
        increments.push(inc);
        theta = next;
        if inc < tol {
            let residual = initial_residual(ops, coarse, input, &theta, &dtheta)?;
            return Ok(InitialHeatData { theta0: theta, dtheta0: dtheta, sweeps: sweep, increments, residual });
        }
        let m = increments.len();
        if m >= 3 && increments[m - 1] >= increments[m - 2] && increments[m - 2] >= increments[m - 3] {
            return Err(Error::NonContraction(format!("initial temperature updates {increments:?}")));
        }
    }
    Err(Error::NonConvergence(format!("initial temperature after {max_sweeps} sweeps: updates {increments:?}")))
}

fn initial_residual(
    ops: &HeatOperators,
    coarse: &GeometryFields,
    input: &InitialHeatInput,
    theta: &[f64],
    dtheta: &[f64],
) -> Result<f64> {
    let bulk: Vec<f64> = input.f8.iter().zip(dtheta).map(|(f, d)| f - d).collect();
    let r0 = robin_residual(ops, theta, &bulk, &input.f9)?;
    let chain = dt_forcing_chain(coarse, ops.coef.k, theta, &input.f8_t, &input.f9_t)?;
    let bulk_t: Vec<f64> = chain.f8_1.iter().zip(&input.d2theta0).map(|(f, d)| f - d).collect();
    let r1 = robin_residual(ops, dtheta, &bulk_t, &chain.f9_1)?;
    Ok(r0.max(r1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::EquilibriumSurface;
    use crate::geometry::build_geometry;

    fn flat_ops(nx: usize, ny: usize, coef: HeatCoefficients) -> HeatOperators {
        let p = PhysicalParams { ell: 0.5, ..Default::default() };
        let s = EquilibriumSurface::flat(&p, 0.75, 64);
        let g = Grid::new(&s, 0.25, nx, ny).unwrap();
        let f = build_geometry(&s, &vec![0.0; g.fine.ni], None, &g, 0.1).unwrap();
        HeatOperators::new(&g, &f, coef).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let ops = flat_ops(6, 24, HeatCoefficients { k: 1.0, robin_weight: 1.0, dirichlet: true });
        let cn = ops.crank_nicolson(0.01).unwrap();
        let mut st = HeatState::at_rest(ops.len());
        for _ in 0..5 {
            st = step_fd(&ops, &cn, &st, None, &HeatForcing::zero(&ops)).unwrap().0;
        }
        assert!(st.theta.iter().all(|&v| v == 0.0));
        let z = robin_elliptic_solve(&ops, &vec![0.0; ops.len()], &vec![0.0; ops.ni]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn insulated_variant_conserves_heat() {
        let ops = flat_ops(6, 24, HeatCoefficients::insulated(1.0));
        let cn = ops.crank_nicolson(0.01).unwrap();
        let theta = ops.sample(|x, y| 1.0 + 0.3 * (3.0 * x).cos() * y);
        let q0 = ops.total_heat(&theta);
        let mut st = HeatState::new(theta, vec![0.0; ops.len()], 0.0);
        for _ in 0..20 {
            st = step_fd(&ops, &cn, &st, None, &HeatForcing::zero(&ops)).unwrap().0;
        }
        assert!((ops.total_heat(&st.theta) - q0).abs() < 1e-10 * q0.abs());
        let c = ops.sample(|_, _| 1.0);
        let st = step_fd(&ops, &cn, &HeatState::new(c.clone(), vec![0.0; ops.len()], 0.0), None, &HeatForcing::zero(&ops))
            .unwrap()
            .0;
        assert!(st.theta.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn step_energy_balances() {
        let ops = flat_ops(6, 24, HeatCoefficients { k: 0.7, robin_weight: 1.0, dirichlet: true });
        let dt = 0.02;
        let cn = ops.crank_nicolson(dt).unwrap();
        let theta = ops.sample(|x, y| (std::f64::consts::PI * x).cos() * (y + 0.25));
        let mut st = HeatState::new(theta, vec![0.0; ops.len()], 0.0);
        for _ in 0..10 {
            let (next, e) = step_fd(&ops, &cn, &st, None, &HeatForcing::zero(&ops)).unwrap();
            assert!(e.after <= e.before);
            assert!(e.residual().abs() < 1e-3 * dt * dt * 2.0 * e.before);
            st = next;
        }
    }

    #[test]
    fn cfl_violation_reported() {
        let ops = flat_ops(6, 24, HeatCoefficients { k: 1.0, robin_weight: 1.0, dirichlet: true });
        let cn = ops.crank_nicolson(1.0).unwrap();
        let v = [vec![10.0; ops.mesh.fine_len], vec![0.0; ops.mesh.fine_len]];
        let r = step_fd(&ops, &cn, &HeatState::at_rest(ops.len()), Some(&v), &HeatForcing::zero(&ops));
        assert!(matches!(r, Err(Error::Cfl { .. })));
    }

    #[test]
    fn basis_is_orthonormal() {
        let ops = flat_ops(6, 24, HeatCoefficients { k: 1.0, robin_weight: 1.0, dirichlet: true });
        let b = build_basis(&ops, 12).unwrap();
        let (mm, bb) = b.forms(&ops);
        for j in 0..12 {
            for k in 0..12 {
                let d = if j == k { 1.0 } else { 0.0 };
                assert!((mm[j][k] - d).abs() < 1e-10);
                assert!((bb[j][k] - d * b.lambdas[j]).abs() < 1e-8 * b.lambdas[11]);
            }
            assert!((b.rayleigh_quotient(&b.modes[j]) - b.lambdas[j]).abs() < 1e-8 * b.lambdas[j]);
        }
        assert!(b.lambdas[0] > 0.0 && b.lambdas.windows(2).all(|w| w[0] <= w[1]));
    }
}
