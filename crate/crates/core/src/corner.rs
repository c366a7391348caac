//! Corner singularities at the contact points.
//!
//! Angular eigenvalues of the Laplacian on a wedge of opening omega, the
//! integrability threshold they imply for second derivatives, and a
//! numerical probe that solves a Poisson problem on a graded wedge mesh and
//! watches the L^q norm of the Hessian under refinement.

use crate::error::{Error, Result};
use crate::linalg::{SparseLu, Triplets};
use serde::Serialize;
use std::f64::consts::{FRAC_PI_2, PI};

/// Conditions on the two rays of the wedge. The first ray is always Dirichlet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AngularBoundary {
    /// Dirichlet on the first ray, Neumann on the second.
    Mixed,
    /// Dirichlet on both rays.
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PencilSpectrum {
    pub omega: f64,
    pub eigenvalues: Vec<f64>,
    pub boundary: AngularBoundary,
    /// |end condition| of the shooting solution at each eigenvalue.
    pub residuals: Vec<f64>,
}

const STEPS_PER_RADIAN: f64 = 2000.0;

/// Shoots v'' + lambda^2 v = 0 from v = 0, v' = 1 across the opening and
/// returns (v, v') at the far ray.
fn shoot(lambda: f64, omega: f64) -> (f64, f64) {
    let n = ((STEPS_PER_RADIAN * omega * lambda.max(1.0)).ceil() as usize).max(64);
    let h = omega / n as f64;
    let l2 = lambda * lambda;
    let (mut v, mut w) = (0.0, 1.0);
    for _ in 0..n {
        let k1 = (w, -l2 * v);
        let k2 = (w + 0.5 * h * k1.1, -l2 * (v + 0.5 * h * k1.0));
        let k3 = (w + 0.5 * h * k2.1, -l2 * (v + 0.5 * h * k2.0));
        let k4 = (w + h * k3.1, -l2 * (v + h * k3.0));
        v += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        w += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    (v, w)
}

fn end_condition(lambda: f64, omega: f64, boundary: AngularBoundary) -> f64 {
    let (v, w) = shoot(lambda, omega);
    match boundary {
        AngularBoundary::Mixed => w,
        AngularBoundary::Dirichlet => v,
    }
}

/// First `count` positive angular eigenvalues with Dirichlet/Neumann rays,
/// found by shooting and bisection.
pub fn angular_eigenvalues(omega: f64, count: usize) -> Result<PencilSpectrum> {
    angular_eigenvalues_with(omega, count, AngularBoundary::Mixed)
}

pub fn angular_eigenvalues_with(omega: f64, count: usize, boundary: AngularBoundary) -> Result<PencilSpectrum> {
    if !(omega > 0.0 && omega < PI) {
        return Err(Error::Domain(format!("opening angle must lie in (0, pi), got {omega}")));
    }
    let f = |l: f64| end_condition(l, omega, boundary);
    // eigenvalues are pi/omega apart; scan with an eighth of that
    let step = PI / (8.0 * omega);
    let mut eigenvalues = Vec::with_capacity(count);
    let mut residuals = Vec::with_capacity(count);
    let mut a = 1e-6;
    let mut fa = f(a);
    while eigenvalues.len() < count {
        let b = a + step;
        let fb = f(b);
        if fa == 0.0 || fa * fb < 0.0 {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let fm = f(mid);
                if flo * fm <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                    flo = fm;
                }
            }
            let lam = 0.5 * (lo + hi);
            residuals.push(f(lam).abs());
            eigenvalues.push(lam);
        }
        a = b;
        fa = fb;
    }
    Ok(PencilSpectrum { omega, eigenvalues, boundary, residuals })
}

/// Largest q with second derivatives of the leading singular function in L^q:
/// 2/(2 - gamma) for gamma < 1, otherwise 2.
pub fn regularity_threshold(spectrum: &PencilSpectrum) -> Result<f64> {
    let gamma = *spectrum
        .eigenvalues
        .first()
        .ok_or_else(|| Error::Domain("empty spectrum".into()))?;
    Ok(if gamma < 1.0 { 2.0 / (2.0 - gamma) } else { 2.0 })
}

/// Nodal solution of -Lap u = g on {0 < r < radius, -pi/2 < rho < -pi/2 + omega}
/// with u = 0 on the first ray and on the arc, and zero normal derivative on
/// the second ray. Radii are graded as radius (i/n)^2, angles are uniform.
#[derive(Debug, Clone)]
pub struct WedgeSolution {
    pub omega: f64,
    pub radius: f64,
    pub r: Vec<f64>,
    pub rho: Vec<f64>,
    /// Values indexed [i_r * n_rho + j_rho].
    pub u: Vec<f64>,
}

pub fn solve_wedge(omega: f64, radius: f64, n: usize, source: impl Fn(f64, f64) -> f64) -> Result<WedgeSolution> {
    if n < 4 {
        return Err(Error::Domain(format!("wedge mesh needs n >= 4, got {n}")));
    }
    let nr = n + 1;
    let nt = n + 1;
    let r: Vec<f64> = (0..nr).map(|i| radius * (i as f64 / n as f64).powi(2)).collect();
    let rho: Vec<f64> = (0..nt).map(|j| -FRAC_PI_2 + omega * j as f64 / n as f64).collect();
    let idx = |i: usize, j: usize| i * nt + j;
    let total = nr * nt;
    // unknowns: 0 < i < n and j > 0
    let mut map = vec![usize::MAX; total];
    let mut count = 0;
    for i in 1..n {
        for j in 1..nt {
            map[idx(i, j)] = count;
            count += 1;
        }
    }
    let gauss = [(0.5 - 0.5 / 3f64.sqrt(), 0.5), (0.5 + 0.5 / 3f64.sqrt(), 0.5)];
    let mut t = Triplets::new(count, count);
    let mut b = vec![0.0; count];
    let dt = omega / n as f64;
    for i in 0..n {
        let dr = r[i + 1] - r[i];
        for j in 0..n {
            let nodes = [idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1)];
            for &(s, ws) in &gauss {
                for &(tt, wt) in &gauss {
                    let rr = r[i] + s * dr;
                    let th = rho[j] + tt * dt;
                    let n = [(1.0 - s) * (1.0 - tt), s * (1.0 - tt), (1.0 - s) * tt, s * tt];
                    let nr_ = [-(1.0 - tt) / dr, (1.0 - tt) / dr, -tt / dr, tt / dr];
                    let nt_ = [-(1.0 - s) / dt, -s / dt, (1.0 - s) / dt, s / dt];
                    let w = ws * wt * dr * dt * rr;
                    let g = source(rr * th.cos(), rr * th.sin());
                    for a in 0..4 {
                        let ra = map[nodes[a]];
                        if ra == usize::MAX {
                            continue;
                        }
                        b[ra] += w * g * n[a];
                        for c in 0..4 {
                            let rc = map[nodes[c]];
                            if rc != usize::MAX {
                                t.add(ra, rc, w * (nr_[a] * nr_[c] + nt_[a] * nt_[c] / (rr * rr)));
                            }
                        }
                    }
                }
            }
        }
    }
    let sol = SparseLu::new(&t.to_csr())?.solve(&b)?;
    let mut u = vec![0.0; total];
    for q in 0..total {
        if map[q] != usize::MAX {
            u[q] = sol[map[q]];
        }
    }
    Ok(WedgeSolution { omega, radius, r, rho, u })
}

impl WedgeSolution {
    /// Discrete L^q norm of the Cartesian Hessian, from three-point polar
    /// differences with odd reflection across the Dirichlet ray and even
    /// reflection across the Neumann ray, weighted by the polar cell area.
    pub fn hessian_lq(&self, q: f64) -> f64 {
        let nr = self.r.len();
        let nt = self.rho.len();
        let dt = self.rho[1] - self.rho[0];
        let at = |i: usize, j: isize| -> f64 {
            if j < 0 {
                -self.u[i * nt + (-j) as usize]
            } else if j as usize >= nt {
                self.u[i * nt + (2 * (nt - 1) - j as usize)]
            } else {
                self.u[i * nt + j as usize]
            }
        };
        let mut sum = 0.0;
        for i in 1..nr - 1 {
            let (rm, r0, rp) = (self.r[i - 1], self.r[i], self.r[i + 1]);
            let (hm, hp) = (r0 - rm, rp - r0);
            // nonuniform three-point weights for first and second r-derivatives
            let d1 = [-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))];
            let d2 = [2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))];
            let wr = 0.5 * (rp - rm) * r0;
            for j in 0..nt {
                let jj = j as isize;
                let col = |k: usize| [at(k, jj - 1), at(k, jj), at(k, jj + 1)];
                let (cm, c0, cp) = (col(i - 1), col(i), col(i + 1));
                let line = |w: [f64; 3], m: usize| w[0] * cm[m] + w[1] * c0[m] + w[2] * cp[m];
                let u_r = line(d1, 1);
                let u_rr = line(d2, 1);
                let u_t = (c0[2] - c0[0]) / (2.0 * dt);
                let u_tt = (c0[2] - 2.0 * c0[1] + c0[0]) / (dt * dt);
                let u_rt = (line(d1, 2) - line(d1, 0)) / (2.0 * dt);
                let h_rr = u_rr;
                let h_rt = u_rt / r0 - u_t / (r0 * r0);
                let h_tt = u_r / r0 + u_tt / (r0 * r0);
                let frob = (h_rr * h_rr + 2.0 * h_rt * h_rt + h_tt * h_tt).sqrt();
                let wt = if j == 0 || j == nt - 1 { 0.5 * dt } else { dt };
                sum += wr * wt * frob.powf(q);
            }
        }
        sum.powf(1.0 / q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProbeVerdict {
    Bounded,
    Divergent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub omega: f64,
    pub q: f64,
    pub gamma: f64,
    pub q_star: f64,
    /// (h = 1/n, discrete norm) per refinement level.
    pub rows: Vec<(f64, f64)>,
    /// d log(norm) / d log(n) over the last refinement.
    pub slope: f64,
    /// Aitken limit of the last three norms when bounded.
    pub limit: Option<f64>,
    pub verdict: ProbeVerdict,
}

/// Slope magnitude below which a refinement sequence counts as bounded.
pub const BOUNDED_SLOPE: f64 = 0.05;

/// Smooth bump supported in the disk of radius 0.45 around (0.5, bisector).
pub fn probe_source(omega: f64) -> impl Fn(f64, f64) -> f64 {
    let mid = -FRAC_PI_2 + 0.5 * omega;
    let c = [0.5 * mid.cos(), 0.5 * mid.sin()];
    move |x, y| {
        let d2 = ((x - c[0]).powi(2) + (y - c[1]).powi(2)) / (0.45 * 0.45);
        if d2 < 1.0 {
            (-1.0 / (1.0 - d2)).exp() * std::f64::consts::E
        } else {
            0.0
        }
    }
}

/// Mixed Poisson problem on the wedge of radius 2 with the bump source,
/// refined over `levels`; classifies the Hessian L^q norm as bounded or divergent.
pub fn wedge_poisson_probe(omega: f64, q: f64, levels: &[usize]) -> Result<ProbeReport> {
    if !(q > 1.0 && q < 2.0) {
        return Err(Error::Domain(format!("probe exponent must lie in (1, 2), got {q}")));
    }
    if levels.len() < 2 {
        return Err(Error::Domain("probe needs at least two refinement levels".into()));
    }
    let spectrum = angular_eigenvalues(omega, 1)?;
    let gamma = spectrum.eigenvalues[0];
    let q_star = regularity_threshold(&spectrum)?;
    let src = probe_source(omega);
    let mut rows = Vec::with_capacity(levels.len());
    for &n in levels {
        let sol = solve_wedge(omega, 2.0, n, &src)?;
        rows.push((1.0 / n as f64, sol.hessian_lq(q)));
    }
    let m = rows.len();
    let (h0, v0) = rows[m - 2];
    let (h1, v1) = rows[m - 1];
    let slope = (v1 / v0).ln() / (h0 / h1).ln();
    let verdict = if !(v1.is_finite() && v0.is_finite()) {
        ProbeVerdict::Inconclusive
    } else if slope.abs() < BOUNDED_SLOPE {
        ProbeVerdict::Bounded
    } else if slope >= BOUNDED_SLOPE {
        ProbeVerdict::Divergent
    } else {
        ProbeVerdict::Inconclusive
    };
    let limit = if verdict == ProbeVerdict::Bounded && m >= 3 {
        let (a, b, c) = (rows[m - 3].1, v0, v1);
        let den = c - 2.0 * b + a;
        Some(if den.abs() > 1e-14 * c.abs() { c - (c - b).powi(2) / den } else { c })
    } else if verdict == ProbeVerdict::Bounded {
        Some(v1)
    } else {
        None
    };
    Ok(ProbeReport { omega, q, gamma, q_star, rows, slope, limit, verdict })
}

impl ProbeReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,discrete_norm\n");
        for (h, v) in &self.rows {
            s.push_str(&format!("{h:.12e},{v:.12e}\n"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mixed_spectrum_closed_form() {
        for omega in [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
            let s = angular_eigenvalues(omega, 5).unwrap();
            for (n, l) in s.eigenvalues.iter().enumerate() {
                let want = (2 * n + 1) as f64 * PI / (2.0 * omega);
                assert!((l - want).abs() < 1e-8, "{omega}: {l} vs {want}");
            }
            assert!(s.residuals.iter().all(|&r| r < 1e-10));
        }
    }

    #[test]
    fn dirichlet_spectrum_closed_form() {
        for omega in [PI / 4.0, PI / 2.0, 3.0 * PI / 4.0] {
            let s = angular_eigenvalues_with(omega, 5, AngularBoundary::Dirichlet).unwrap();
            for (n, l) in s.eigenvalues.iter().enumerate() {
                let want = (n + 1) as f64 * PI / omega;
                assert!((l - want).abs() < 1e-8, "{omega}: {l} vs {want}");
            }
        }
    }

    #[test]
    fn threshold_arithmetic() {
        let spec = |g: f64| PencilSpectrum { omega: 1.0, eigenvalues: vec![g], boundary: AngularBoundary::Mixed, residuals: vec![0.0] };
        assert!((regularity_threshold(&spec(0.5)).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        assert!((regularity_threshold(&spec(2.0 / 3.0)).unwrap() - 1.5).abs() < 1e-15);
        assert_eq!(regularity_threshold(&spec(1.0)).unwrap(), 2.0);
        assert_eq!(regularity_threshold(&spec(3.0)).unwrap(), 2.0);
    }

    #[test]
    fn straight_angle_gives_half() {
        let s = angular_eigenvalues(PI - 1e-9, 2).unwrap();
        assert!((s.eigenvalues[0] - 0.5).abs() < 1e-8);
        assert!((s.eigenvalues[1] - 1.5).abs() < 1e-8);
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let s = solve_wedge(PI / 2.0, 2.0, 16, |_, _| 0.0).unwrap();
        assert!(s.u.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_angle() {
        assert!(angular_eigenvalues(0.0, 1).is_err());
        assert!(angular_eigenvalues(PI, 1).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn leading_eigenvalue_decreases_with_angle(a in 0.1f64..2.9, d in 0.01f64..0.2) {
            let b = (a + d).min(3.1);
            let la = angular_eigenvalues(a, 1).unwrap().eigenvalues[0];
            let lb = angular_eigenvalues(b, 1).unwrap().eigenvalues[0];
            prop_assert!(lb < la);
        }
    }
}
