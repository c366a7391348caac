//! Capillary equilibrium of the resting meniscus.
//!
//! The height `zeta0` solves P0 = g zeta0 - sigma1 H(zeta0) on (-ell, ell) with
//! the wetting slope conditions at the walls and a prescribed mean height.
//! Written for psi = zeta0'/sqrt(1 + zeta0'^2) the problem is a first-order
//! system integrated by fixed-step RK4 and closed by Newton on (P0, zeta0(-ell)).

use crate::error::{Error, Result};
use crate::params::PhysicalParams;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSurface {
    pub x_nodes: Vec<f64>,
    pub zeta0: Vec<f64>,
    pub dzeta0: Vec<f64>,
    pub p0: f64,
    pub omega: f64,
    pub mean_height: f64,
    pub g: f64,
    pub sigma1: f64,
    pub gamma_jump: f64,
}

#[derive(Clone, Copy)]
struct State {
    zeta: f64,
    psi: f64,
    area: f64,
}

fn rhs(s: State, p0: f64, g: f64, sigma1: f64) -> Result<State> {
    if s.psi.abs() >= 1.0 {
        return Err(Error::NonConvergence("meniscus turned vertical during shooting".into()));
    }
    Ok(State {
        zeta: s.psi / (1.0 - s.psi * s.psi).sqrt(),
        psi: (g * s.zeta - p0) / sigma1,
        area: s.zeta,
    })
}

fn axpy(s: State, h: f64, d: State) -> State {
    State { zeta: s.zeta + h * d.zeta, psi: s.psi + h * d.psi, area: s.area + h * d.area }
}

struct Shot {
    zeta: Vec<f64>,
    psi: Vec<f64>,
    area: f64,
}

fn shoot(p0: f64, zeta_left: f64, params: &PhysicalParams, n: usize) -> Result<Shot> {
    let (g, s1) = (params.g, params.sigma1);
    let h = 2.0 * params.ell / n as f64;
    let mut s = State { zeta: zeta_left, psi: -params.gamma_jump / s1, area: 0.0 };
    let mut zeta = Vec::with_capacity(n + 1);
    let mut psi = Vec::with_capacity(n + 1);
    zeta.push(s.zeta);
    psi.push(s.psi);
    for _ in 0..n {
        let k1 = rhs(s, p0, g, s1)?;
        let k2 = rhs(axpy(s, 0.5 * h, k1), p0, g, s1)?;
        let k3 = rhs(axpy(s, 0.5 * h, k2), p0, g, s1)?;
        let k4 = rhs(axpy(s, h, k3), p0, g, s1)?;
        s = State {
            zeta: s.zeta + h / 6.0 * (k1.zeta + 2.0 * k2.zeta + 2.0 * k3.zeta + k4.zeta),
            psi: s.psi + h / 6.0 * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi),
            area: s.area + h / 6.0 * (k1.area + 2.0 * k2.area + 2.0 * k3.area + k4.area),
        };
        zeta.push(s.zeta);
        psi.push(s.psi);
    }
    Ok(Shot { zeta, psi, area: s.area })
}

fn residuals(shot: &Shot, params: &PhysicalParams, mean_height: f64) -> [f64; 2] {
    let target = params.gamma_jump / params.sigma1;
    [
        shot.psi.last().copied().unwrap_or(0.0) - target,
        shot.area / (2.0 * params.ell) - mean_height,
    ]
}

/// Closed-form solution of the linearised problem g eta - sigma1 eta'' = c,
/// eta'(+-ell) = +-gamma/sigma1, zero mean.
pub fn linearized_profile(params: &PhysicalParams, x: f64) -> f64 {
    let m = (params.g / params.sigma1).sqrt();
    let l = params.ell;
    params.gamma_jump / params.sigma1 * ((m * x).cosh() / (m * (m * l).sinh()) - 1.0 / (m * m * l))
}

/// Solves the equilibrium on n uniform RK4 steps to residual tolerance `tol`.
pub fn solve_equilibrium(
    params: &PhysicalParams,
    mean_height: f64,
    n: usize,
    tol: f64,
) -> Result<EquilibriumSurface> {
    if params.gamma_jump.abs() >= params.sigma1 {
        return Err(Error::Constraint(format!(
            "Young relation violated: |gamma_jump| = {} >= sigma1 = {}",
            params.gamma_jump.abs(),
            params.sigma1
        )));
    }
    if !(mean_height > 0.0 && mean_height < params.big_l) {
        return Err(Error::Domain(format!("mean height {mean_height} outside (0, L)")));
    }
    if n < 4 {
        return Err(Error::Domain(format!("need at least 4 integration steps, got {n}")));
    }
    // integrating the ODE over the interval pins P0 exactly; the linear profile seeds zeta0(-ell)
    let mut unknowns = [
        params.g * mean_height - params.gamma_jump / params.ell,
        mean_height + linearized_profile(params, -params.ell),
    ];
    let mut shot = shoot(unknowns[0], unknowns[1], params, n)?;
    let mut r = residuals(&shot, params, mean_height);
    let mut iter = 0;
    while r[0].abs().max(r[1].abs()) > tol {
        iter += 1;
        if iter > 60 {
            return Err(Error::NonConvergence(format!(
                "equilibrium Newton stalled with residuals {:.3e}, {:.3e}",
                r[0], r[1]
            )));
        }
        let mut jac = [[0.0; 2]; 2];
        for c in 0..2 {
            let step = 1e-7 * unknowns[c].abs().max(1.0);
            let mut pert = unknowns;
            pert[c] += step;
            let rp = residuals(&shoot(pert[0], pert[1], params, n)?, params, mean_height);
            jac[0][c] = (rp[0] - r[0]) / step;
            jac[1][c] = (rp[1] - r[1]) / step;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NonConvergence("singular shooting Jacobian".into()));
        }
        let d0 = (jac[1][1] * r[0] - jac[0][1] * r[1]) / det;
        let d1 = (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det;
        unknowns[0] -= d0;
        unknowns[1] -= d1;
        shot = shoot(unknowns[0], unknowns[1], params, n)?;
        r = residuals(&shot, params, mean_height);
    }
    for &z in &shot.zeta {
        if z <= 0.0 || z > params.big_l {
            return Err(Error::Spill(format!("equilibrium height {z} leaves (0, L]")));
        }
    }
    let h = 2.0 * params.ell / n as f64;
    let x_nodes = (0..=n).map(|i| -params.ell + i as f64 * h).collect();
    let dzeta0: Vec<f64> = shot.psi.iter().map(|p| p / (1.0 - p * p).sqrt()).collect();
    let omega = FRAC_PI_2 + dzeta0[n].atan();
    Ok(EquilibriumSurface {
        x_nodes,
        zeta0: shot.zeta,
        dzeta0,
        p0: unknowns[0],
        omega,
        mean_height,
        g: params.g,
        sigma1: params.sigma1,
        gamma_jump: params.gamma_jump,
    })
}

/// Interior angle at the contact point, pi/2 + arctan(zeta0'(ell)).
pub fn corner_angle(surface: &EquilibriumSurface) -> f64 {
    FRAC_PI_2 + surface.dzeta0.last().copied().unwrap_or(0.0).atan()
}

impl EquilibriumSurface {
    pub fn ell(&self) -> f64 {
        *self.x_nodes.last().unwrap()
    }

    /// (zeta0, zeta0', zeta0'') at x by cubic Hermite interpolation of the
    /// samples; the second derivative comes from the ODE itself.
    pub fn eval(&self, x: f64) -> (f64, f64, f64) {
        let n = self.x_nodes.len() - 1;
        let x0 = self.x_nodes[0];
        let h = self.x_nodes[1] - x0;
        let t_all = ((x - x0) / h).clamp(0.0, n as f64);
        let i = (t_all.floor() as usize).min(n - 1);
        let t = t_all - i as f64;
        let (z0, z1) = (self.zeta0[i], self.zeta0[i + 1]);
        let (d0, d1) = (self.dzeta0[i] * h, self.dzeta0[i + 1] * h);
        let h00 = (1.0 + 2.0 * t) * (1.0 - t) * (1.0 - t);
        let h10 = t * (1.0 - t) * (1.0 - t);
        let h01 = t * t * (3.0 - 2.0 * t);
        let h11 = t * t * (t - 1.0);
        let z = h00 * z0 + h10 * d0 + h01 * z1 + h11 * d1;
        let dh00 = 6.0 * t * t - 6.0 * t;
        let dh10 = 3.0 * t * t - 4.0 * t + 1.0;
        let dh01 = -dh00;
        let dh11 = 3.0 * t * t - 2.0 * t;
        let dz = (dh00 * z0 + dh10 * d0 + dh01 * z1 + dh11 * d1) / h;
        let curv = (self.g * z - self.p0) / self.sigma1;
        let d2z = curv * (1.0 + dz * dz).powf(1.5);
        (z, dz, d2z)
    }

    pub fn min_height(&self) -> f64 {
        self.zeta0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_height(&self) -> f64 {
        self.zeta0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Residual of P0 = g zeta0 - sigma1 H(zeta0) at interior nodes, with the
    /// curvature differenced from the sampled slopes.
    pub fn pointwise_residual(&self) -> Vec<f64> {
        let n = self.x_nodes.len() - 1;
        let h = self.x_nodes[1] - self.x_nodes[0];
        let psi: Vec<f64> = self.dzeta0.iter().map(|d| d / (1.0 + d * d).sqrt()).collect();
        (1..n)
            .map(|i| {
                let curv = (psi[i + 1] - psi[i - 1]) / (2.0 * h);
                self.g * self.zeta0[i] - self.sigma1 * curv - self.p0
            })
            .collect()
    }

    /// Residuals of the two wetting conditions sigma1 psi(+-ell) = +-gamma.
    pub fn slope_residuals(&self) -> [f64; 2] {
        let psi = |d: f64| d / (1.0 + d * d).sqrt();
        let n = self.dzeta0.len() - 1;
        [
            self.sigma1 * psi(self.dzeta0[0]) + self.gamma_jump,
            self.sigma1 * psi(self.dzeta0[n]) - self.gamma_jump,
        ]
    }

    /// Flat surface of the given height with no wetting jump.
    pub fn flat(params: &PhysicalParams, height: f64, n: usize) -> Self {
        let h = 2.0 * params.ell / n as f64;
        Self {
            x_nodes: (0..=n).map(|i| -params.ell + i as f64 * h).collect(),
            zeta0: vec![height; n + 1],
            dzeta0: vec![0.0; n + 1],
            p0: params.g * height,
            omega: FRAC_PI_2,
            mean_height: height,
            g: params.g,
            sigma1: params.sigma1,
            gamma_jump: 0.0,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,zeta0,dzeta0\n");
        for i in 0..self.x_nodes.len() {
            s.push_str(&format!(
                "{:.15e},{:.15e},{:.15e}\n",
                self.x_nodes[i], self.zeta0[i], self.dzeta0[i]
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(gamma: f64) -> PhysicalParams {
        PhysicalParams { gamma_jump: gamma, ..Default::default() }
    }

    #[test]
    fn no_jump_is_flat() {
        let s = solve_equilibrium(&params(0.0), 1.0, 200, 1e-12).unwrap();
        assert!(s.zeta0.iter().all(|&z| (z - 1.0).abs() < 1e-12));
        assert!((s.p0 - 1.0).abs() < 1e-12);
        assert!((s.omega - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn small_jump_matches_linearization() {
        for ratio in [1e-3, 1e-2] {
            let p = params(ratio);
            let s = solve_equilibrium(&p, 1.0, 400, 1e-13).unwrap();
            let sup = s
                .x_nodes
                .iter()
                .zip(&s.zeta0)
                .map(|(&x, &z)| (z - 1.0 - linearized_profile(&p, x)).abs())
                .fold(0.0, f64::max);
            assert!(sup < 5.0 * ratio * ratio, "ratio {ratio}: sup {sup}");
            let r = s.slope_residuals();
            assert!(r[0].abs() < 1e-8 && r[1].abs() < 1e-8);
        }
    }

    #[test]
    fn surface_is_even() {
        let s = solve_equilibrium(&params(0.3), 1.0, 300, 1e-13).unwrap();
        let n = s.zeta0.len() - 1;
        for i in 0..=n {
            assert!((s.zeta0[i] - s.zeta0[n - i]).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_converges_at_second_order() {
        let p = params(0.4);
        let r = |n| {
            let s = solve_equilibrium(&p, 1.0, n, 1e-13).unwrap();
            s.pointwise_residual().iter().fold(0.0f64, |a, b| a.max(b.abs()))
        };
        let (r1, r2) = (r(100), r(200));
        assert!(r1 / r2 >= 3.5, "{r1} {r2}");
    }

    #[test]
    fn corner_angle_from_slope() {
        let mut s = EquilibriumSurface::flat(&params(0.0), 1.0, 10);
        assert!((corner_angle(&s) - PI / 2.0).abs() < 1e-15);
        *s.dzeta0.last_mut().unwrap() = 1.0;
        assert!((corner_angle(&s) - 3.0 * PI / 4.0).abs() < 1e-15);
    }

    #[test]
    fn corner_angle_from_wetting_jump() {
        let s = solve_equilibrium(&params(0.5), 1.0, 400, 1e-13).unwrap();
        assert!((s.dzeta0.last().unwrap() - 1.0 / 3f64.sqrt()).abs() < 1e-8);
        assert!((corner_angle(&s) - 2.0 * PI / 3.0).abs() < 1e-8);
    }

    #[test]
    fn guards() {
        assert!(matches!(solve_equilibrium(&params(1.0), 1.0, 100, 1e-12), Err(Error::Constraint(_))));
        assert!(solve_equilibrium(&params(0.0), 3.0, 100, 1e-12).is_err());
    }

    #[test]
    fn hermite_eval_reproduces_nodes() {
        let s = solve_equilibrium(&params(0.2), 1.0, 100, 1e-13).unwrap();
        for i in [0, 17, 100] {
            let (z, dz, _) = s.eval(s.x_nodes[i]);
            assert!((z - s.zeta0[i]).abs() < 1e-14);
            assert!((dz - s.dzeta0[i]).abs() < 1e-12);
        }
    }
}
