//! Contact-point response law, the curvature remainder and the surface
//! traction.

use crate::error::{check_len, Error, Result};
use crate::geometry::{surface_slope, Lattice};
use crate::params::PhysicalParams;
use serde::{Deserialize, Serialize};

/// Response law kappa (z + W(z)) at the contact points with the cubic
/// remainder W(z) = w3 z^3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContactModel {
    pub kappa: f64,
    pub w3: f64,
}

impl ContactModel {
    pub fn new(kappa: f64, w3: f64) -> Result<Self> {
        if !(kappa > 0.0) || !w3.is_finite() {
            return Err(Error::Domain(format!("contact response needs kappa > 0, got kappa = {kappa}, w3 = {w3}")));
        }
        Ok(Self { kappa, w3 })
    }

    pub fn linear(kappa: f64) -> Self {
        Self { kappa, w3: 0.0 }
    }

    #[inline]
    pub fn remainder(&self, z: f64) -> f64 {
        self.w3 * z * z * z
    }

    #[inline]
    pub fn remainder_d1(&self, z: f64) -> f64 {
        3.0 * self.w3 * z * z
    }

    #[inline]
    pub fn remainder_d2(&self, z: f64) -> f64 {
        6.0 * self.w3 * z
    }

    #[inline]
    pub fn response(&self, z: f64) -> f64 {
        self.kappa * (z + self.remainder(z))
    }

    #[inline]
    pub fn response_slope(&self, z: f64) -> f64 {
        self.kappa * (1.0 + self.remainder_d1(z))
    }

    /// Smallest slope of the response over |z| <= range.
    pub fn min_slope(&self, range: f64) -> f64 {
        if self.w3 >= 0.0 {
            self.kappa
        } else {
            self.response_slope(range)
        }
    }

    pub fn check_monotone(&self, range: f64) -> Result<()> {
        let m = self.min_slope(range);
        if m > 0.0 {
            Ok(())
        } else {
            Err(Error::Constraint(format!(
                "contact response not monotone on |z| <= {range}: min slope {m:.3e}"
            )))
        }
    }
}

/// Solves kappa (z + W(z)) = rhs for |z| <= range by Newton steps kept inside
/// a shrinking sign bracket, bisecting whenever a step leaves it or fails to
/// halve the residual.
pub fn solve_contact_speed(model: &ContactModel, rhs: f64, range: f64) -> Result<f64> {
    model.check_monotone(range)?;
    let f = |z: f64| model.response(z) - rhs;
    let (mut lo, mut hi) = (-range, range);
    let (flo, fhi) = (f(lo), f(hi));
    if flo > 0.0 || fhi < 0.0 {
        return Err(Error::Bracket(format!(
            "right side {rhs:.6e} outside the response range [{:.6e}, {:.6e}]",
            model.response(lo),
            model.response(hi)
        )));
    }
    let tol = 1e-13 * rhs.abs().max(model.kappa * 1e-3);
    let mut z = (rhs / model.kappa).clamp(lo, hi);
    let mut fz = f(z);
    for _ in 0..200 {
        if fz.abs() <= tol {
            return Ok(z);
        }
        if fz < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let newton = z - fz / model.response_slope(z);
        let cand = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        let fc = f(cand);
        let (zn, fnew) = if fc.abs() <= 0.5 * fz.abs() {
            (cand, fc)
        } else {
            let mid = 0.5 * (lo + hi);
            (mid, f(mid))
        };
        z = zn;
        fz = fnew;
        if hi - lo <= 4.0 * f64::EPSILON * range {
            return Ok(z);
        }
    }
    Err(Error::NonConvergence(format!("contact speed for right side {rhs:.6e}")))
}

/// f(s) = s / sqrt(1 + s^2) and its first two derivatives.
#[inline]
fn slope_fn(s: f64) -> (f64, f64, f64) {
    let r = 1.0 + s * s;
    let sq = r.sqrt();
    (s / sq, 1.0 / (r * sq), -3.0 * s / (r * r * sq))
}

/// Weight of the linearised curvature, (1 + s0^2)^(-3/2).
#[inline]
pub fn linear_weight(s0: f64) -> f64 {
    slope_fn(s0).1
}

/// Remainder f(s0 + s) - f(s0) - f'(s0) s of f(s) = s / sqrt(1 + s^2): the
/// nonlinear part of the surface slope term about the equilibrium slope s0.
/// A Taylor series is summed inside half the convergence radius to avoid the
/// cancellation of the closed form.
pub fn curvature_remainder(s0: f64, s: f64) -> f64 {
    let r = 1.0 + s0 * s0;
    let radius = r.sqrt();
    if s.abs() > 0.5 * radius {
        let (a, da, _) = slope_fn(s0);
        let (b, _, _) = slope_fn(s0 + s);
        return b - a - da * s;
    }
    // coefficients c_n of (1 + x^2)^(-1/2) about s0, from (1 + x^2) h' = -x h
    let mut c_prev = 0.0;
    let mut c = 1.0 / radius;
    let mut sum = 0.0;
    let mut tn = 1.0;
    let mut prev_term: f64 = 0.0;
    for n in 0..400usize {
        let c_next = -((2 * n + 1) as f64 * s0 * c + n as f64 * c_prev) / (r * (n + 1) as f64);
        // coefficient of t^(n+1) in x h(x) is s0 c_(n+1) + c_n
        tn *= s;
        let d = s0 * c_next + c;
        if n >= 1 {
            let term = d * tn;
            sum += term;
            if n > 4 && term.abs() + prev_term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            prev_term = term;
        }
        c_prev = c;
        c = c_next;
    }
    sum
}

/// Partial derivatives (d/ds, d^2/ds^2) of the remainder in its second slot.
pub fn curvature_remainder_ds(s0: f64, s: f64) -> (f64, f64) {
    let (_, d0, _) = slope_fn(s0);
    let (_, d1, d2) = slope_fn(s0 + s);
    (d1 - d0, d2)
}

/// Traction and contact balance on the free surface for nodal surface data.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTraction {
    /// Scalar multiplying the normal in the traction condition, per node.
    pub traction: Vec<f64>,
    /// kappa (v + W(v)) -+ sigma1 (linear slope term + remainder) at -ell and +ell.
    pub contact_residual: [f64; 2],
}

/// Evaluates g eta - (sigma1 - sigma2 theta) d1 lin - sigma1 d1 R with
/// lin = (d1 eta + eps d1 v) / (1 + zeta0'^2)^(3/2), v the surface velocity,
/// by second-order differences on the surface row of `lat`.
pub fn surface_tension_operator(
    lat: &Lattice,
    params: &PhysicalParams,
    model: &ContactModel,
    eta: &[f64],
    deta_dt: &[f64],
    theta: &[f64],
    eps: f64,
) -> Result<SurfaceTraction> {
    let n = lat.ni;
    check_len(n, eta.len())?;
    check_len(n, deta_dt.len())?;
    check_len(n, theta.len())?;
    let h = lat.h_xi;
    let d1e = surface_slope(eta, h);
    let d1v = surface_slope(deta_dt, h);
    let lin: Vec<f64> = (0..n).map(|i| (d1e[i] + eps * d1v[i]) * linear_weight(lat.dzeta0[i])).collect();
    let rem: Vec<f64> = (0..n).map(|i| curvature_remainder(lat.dzeta0[i], d1e[i])).collect();
    let dlin = surface_slope(&lin, h);
    let drem = surface_slope(&rem, h);
    let traction = (0..n)
        .map(|i| params.g * eta[i] - (params.sigma1 - params.sigma2 * theta[i]) * dlin[i] - params.sigma1 * drem[i])
        .collect();
    let end = |i: usize, sign: f64| {
        model.response(deta_dt[i]) + sign * params.sigma1 * (lin[i] + rem[i])
    };
    Ok(SurfaceTraction { traction, contact_residual: [end(0, -1.0), end(n - 1, 1.0)] })
}

/// Surface data at the two contact points, index 0 at -ell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEnds {
    pub dzeta0: [f64; 2],
    pub d1_eta: [f64; 2],
    pub d1_deta_dt: [f64; 2],
}

/// Contact-point speeds from the response law
/// kappa (v + W(v)) = -+ sigma1 (lin + R) at +-ell.
pub fn apply_contact_law(
    model: &ContactModel,
    sigma1: f64,
    eps: f64,
    ends: &ContactEnds,
    range: f64,
) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    for (k, sign) in [(0usize, 1.0), (1usize, -1.0)] {
        let s0 = ends.dzeta0[k];
        let lin = (ends.d1_eta[k] + eps * ends.d1_deta_dt[k]) * linear_weight(s0);
        let rhs = sign * sigma1 * (lin + curvature_remainder(s0, ends.d1_eta[k]));
        out[k] = solve_contact_speed(model, rhs, range)?;
    }
    Ok(out)
}
