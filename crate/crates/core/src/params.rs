//! Physical constants and corner-regularity exponents.
//!
//! The exponent tuple fixes every integrability index used by the energy
//! functionals. `select_exponents` is a deterministic rule landing strictly
//! inside the admissible region for any corner angle.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    /// Viscosity.
    pub mu: f64,
    /// Heat conduction coefficient.
    pub k: f64,
    /// Gravitational acceleration.
    pub g: f64,
    /// Surface tension at zero temperature.
    pub sigma1: f64,
    /// Thermal tension coefficient, sigma(theta) = sigma1 - sigma2 * theta.
    pub sigma2: f64,
    /// Navier slip coefficient on the vessel walls.
    pub beta: f64,
    /// Linear contact-point response (derivative of the response law at 0).
    pub kappa: f64,
    /// Surface-energy jump between solid/vapour and solid/fluid.
    pub gamma_jump: f64,
    /// Half-width of the vessel.
    pub ell: f64,
    /// Height of the vessel walls.
    pub big_l: f64,
    /// Depth of the flat bottom below zero.
    pub depth: f64,
    /// Largest |theta| the run is expected to visit.
    pub theta_range: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            k: 1.0,
            g: 1.0,
            sigma1: 1.0,
            sigma2: 0.1,
            beta: 1.0,
            kappa: 1.0,
            gamma_jump: 0.0,
            ell: 1.0,
            big_l: 2.0,
            depth: 0.25,
            theta_range: 1.0,
        }
    }
}

impl PhysicalParams {
    /// Every violated invariant, in a fixed order.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let positive = [
            ("mu", self.mu),
            ("k", self.k),
            ("g", self.g),
            ("sigma1", self.sigma1),
            ("kappa", self.kappa),
            ("ell", self.ell),
            ("big_l", self.big_l),
            ("depth", self.depth),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                out.push(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            out.push(format!("beta must be nonnegative, got {}", self.beta));
        }
        if !self.sigma2.is_finite() || !self.gamma_jump.is_finite() {
            out.push("sigma2 and gamma_jump must be finite".into());
        }
        if !(self.theta_range.is_finite() && self.theta_range >= 0.0) {
            out.push(format!("theta_range must be nonnegative, got {}", self.theta_range));
        }
        if self.gamma_jump.abs() >= self.sigma1 {
            out.push(format!(
                "Young relation violated: |gamma_jump| = {} >= sigma1 = {}",
                self.gamma_jump.abs(),
                self.sigma1
            ));
        }
        let sigma_min = self.sigma1 - self.sigma2.abs() * self.theta_range;
        if sigma_min <= 0.0 {
            out.push(format!(
                "surface tension sigma1 - sigma2*theta must stay positive for |theta| <= {}, minimum is {}",
                self.theta_range, sigma_min
            ));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some(msg) => Err(Error::Constraint(msg)),
        }
    }

    /// Temperature-dependent surface tension.
    pub fn sigma(&self, theta: f64) -> f64 {
        self.sigma1 - self.sigma2 * theta
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularityExponents {
    pub omega: f64,
    pub eps_max: f64,
    pub eps_minus: f64,
    pub eps_plus: f64,
    pub alpha: f64,
    pub q_minus: f64,
    pub q_plus: f64,
    pub q_max: f64,
}

/// Largest corner exponent, min{1, pi/omega - 1}.
pub fn compute_eps_max(omega: f64) -> Result<f64> {
    if !(omega > 0.0 && omega < PI) {
        return Err(Error::Domain(format!("corner angle {omega} outside (0, pi)")));
    }
    Ok((PI / omega - 1.0).min(1.0))
}

/// Integrability index paired with a corner exponent.
pub fn q_of(eps: f64) -> f64 {
    2.0 / (2.0 - eps)
}

/// Upper cap on eps_plus so that eps_plus <= (eps_minus + 1)/2 survives the
/// ratio eps_minus = (2/3) eps_plus, which requires eps_plus <= 3/4.
pub const EPS_PLUS_CAP: f64 = 0.7;

/// Deterministic exponent choice: eps_plus = min{safety * eps_max, 0.7},
/// eps_minus = (2/3) eps_plus, alpha = (1/4) min{eps_minus/2, (eps_plus - eps_minus)/2}.
pub fn select_exponents(omega: f64, safety: f64) -> Result<RegularityExponents> {
    let eps_max = compute_eps_max(omega)?;
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::Domain(format!("safety {safety} outside (0, 1)")));
    }
    let eps_plus = (safety * eps_max).min(EPS_PLUS_CAP);
    let eps_minus = 2.0 / 3.0 * eps_plus;
    let alpha = 0.25 * (eps_minus / 2.0).min((eps_plus - eps_minus) / 2.0);
    let exps = RegularityExponents {
        omega,
        eps_max,
        eps_minus,
        eps_plus,
        alpha,
        q_minus: q_of(eps_minus),
        q_plus: q_of(eps_plus),
        q_max: q_of(eps_max),
    };
    let v = exps.violations();
    assert!(v.is_empty(), "exponent rule produced an invalid tuple: {v:?}");
    Ok(exps)
}

impl RegularityExponents {
    /// Builds a tuple from user-chosen exponents; q values are derived.
    pub fn explicit(omega: f64, eps_minus: f64, eps_plus: f64, alpha: f64) -> Result<Self> {
        let eps_max = compute_eps_max(omega)?;
        Ok(Self {
            omega,
            eps_max,
            eps_minus,
            eps_plus,
            alpha,
            q_minus: q_of(eps_minus),
            q_plus: q_of(eps_plus),
            q_max: q_of(eps_max),
        })
    }

    /// Names of every violated admissibility inequality.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let Self { eps_max, eps_minus: em, eps_plus: ep, alpha: a, .. } = *self;
        match compute_eps_max(self.omega) {
            Ok(e) if (e - eps_max).abs() <= 1e-14 => {}
            Ok(e) => out.push(format!("eps_max = min(1, pi/omega - 1) = {e}, got {eps_max}")),
            Err(e) => out.push(e.to_string()),
        }
        if !(0.0 < a) {
            out.push("0 < alpha".into());
        }
        if !(a < em) {
            out.push("alpha < eps_minus".into());
        }
        if !(em < ep) {
            out.push("eps_minus < eps_plus".into());
        }
        if !(ep < eps_max) {
            out.push("eps_plus < eps_max".into());
        }
        if !(a < em / 2.0) {
            out.push("alpha < eps_minus/2".into());
        }
        if !(a < (ep - em) / 2.0) {
            out.push("alpha < (eps_plus - eps_minus)/2".into());
        }
        if !(ep <= (em + 1.0) / 2.0) {
            out.push("eps_plus <= (eps_minus + 1)/2".into());
        }
        let qs = [
            ("q_minus", self.q_minus, em),
            ("q_plus", self.q_plus, ep),
            ("q_max", self.q_max, eps_max),
        ];
        for (name, q, e) in qs {
            if (q - q_of(e)).abs() > 1e-14 {
                out.push(format!("{name} = 2/(2 - eps)"));
            }
        }
        if !(1.0 < self.q_minus && self.q_minus < self.q_plus && self.q_plus < self.q_max && self.q_max <= 2.0) {
            out.push("1 < q_minus < q_plus < q_max <= 2".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.violations().into_iter().next() {
            None => Ok(()),
            Some(msg) => Err(Error::Constraint(msg)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn eps_max_examples() {
        assert_eq!(compute_eps_max(PI / 2.0).unwrap(), 1.0);
        assert!((compute_eps_max(3.0 * PI / 4.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(compute_eps_max(PI / 4.0).unwrap(), 1.0);
        assert!(compute_eps_max(0.0).is_err());
        assert!(compute_eps_max(PI).is_err());
    }

    #[test]
    fn exponent_examples() {
        let e = select_exponents(3.0 * PI / 4.0, 0.9).unwrap();
        assert!((e.eps_plus - 0.3).abs() < 1e-14);
        assert!((e.eps_minus - 0.2).abs() < 1e-14);
        assert!((e.alpha - 0.0125).abs() < 1e-14);
        assert!((e.q_plus - 2.0 / 1.7).abs() < 1e-14);

        let e = select_exponents(PI / 2.0, 0.5).unwrap();
        assert!((e.eps_plus - 0.5).abs() < 1e-15);
        assert!((e.eps_minus - 1.0 / 3.0).abs() < 1e-15);
        assert!(e.eps_plus <= (e.eps_minus + 1.0) / 2.0);
    }

    #[test]
    fn cap_keeps_upper_constraint() {
        // safety * eps_max = 0.9 would break eps_plus <= (eps_minus + 1)/2
        let e = select_exponents(PI / 2.0, 0.9).unwrap();
        assert_eq!(e.eps_plus, EPS_PLUS_CAP);
        assert!(e.violations().is_empty());
    }

    #[test]
    fn explicit_alpha_too_large_is_named() {
        let e = RegularityExponents::explicit(3.0 * PI / 4.0, 0.2, 0.3, 0.11).unwrap();
        let v = e.violations();
        assert!(v.iter().any(|s| s == "alpha < eps_minus/2"), "{v:?}");
    }

    #[test]
    fn young_relation_guard() {
        let p = PhysicalParams { gamma_jump: 1.5, ..Default::default() };
        assert!(p.violations().iter().any(|s| s.starts_with("Young relation violated")));
        assert!(PhysicalParams::default().validate().is_ok());
    }

    #[test]
    fn q_max_is_two_iff_eps_max_one() {
        assert_eq!(select_exponents(PI / 3.0, 0.5).unwrap().q_max, 2.0);
        assert!(select_exponents(0.7 * PI, 0.5).unwrap().q_max < 2.0);
    }

    proptest! {
        #[test]
        fn rule_is_admissible(omega in 0.05 * PI..0.95 * PI, safety in 0.01f64..0.99) {
            let e = select_exponents(omega, safety).unwrap();
            prop_assert!(e.violations().is_empty());
        }

        #[test]
        fn q_increasing_in_eps(a in 0.0f64..0.99, b in 0.0f64..0.99) {
            prop_assume!(a < b);
            prop_assert!(q_of(a) < q_of(b));
        }
    }
}
