//! Characteristic function of work and its cumulants.
//!
//! All quantities are per site: `ln chi(u) / N` and `kappa_n / N`.

mod cfw;
pub(crate) mod closed_form;
mod derivative;

use serde::{Deserialize, Serialize};

use crate::dynamics::Spectrum;
use crate::error::{Error, Result};
use crate::ising::{adiabatic_work_per_site, ChainSize, QuenchProtocol};
use crate::quad::Tolerance;
use crate::specfun::{bernoulli_cumulant, MAX_BERNOULLI_ORDER};

pub use cfw::{cfw_finite_t, cfw_zero_t, gk, ln_mode_factor, BranchFlags};
pub use closed_form::{
    closed_form_cumulants, closed_form_real, cfw_closed_form, f_limit_negative_infinity, ClosedForm,
};
pub use derivative::{cumulants_from_cfw, derivative_grid, suggested_step};

/// Default tolerance for continuum mode integrals.
pub const QUAD_TOL: Tolerance = Tolerance::absolute(1e-10).with_rel(1e-12);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum TemperatureMode {
    ZeroT,
    FiniteT { beta: f64 },
}

/// `ln chi(u) / N` sampled on an ordered grid of real `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CfwSamples {
    pub u_grid: Vec<f64>,
    pub log_chi_per_site: Vec<num_complex::Complex64>,
    pub size: ChainSize,
    pub temperature: TemperatureMode,
    pub flags: Vec<BranchFlags>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CumulantMethod {
    BernoulliSum,
    DerivativeOfCfw,
    ClosedForm,
}

/// Per-site cumulants `kappa_1 / N ... kappa_n / N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    /// `values[n - 1]` is `kappa_n / N`.
    pub values: Vec<f64>,
    pub method: CumulantMethod,
    /// Adiabatic work per site, when the route knows it.
    pub mu: Option<f64>,
    /// `kappa_1 / N - mu`, computed without cancellation when available.
    pub kappa1_excess: Option<f64>,
    /// Error estimates per order for numerical routes.
    pub errors: Option<Vec<f64>>,
}

impl CumulantSet {
    pub fn n_max(&self) -> usize {
        self.values.len()
    }

    /// `kappa_n / N` for `n >= 1`.
    pub fn kappa(&self, n: usize) -> f64 {
        self.values[n - 1]
    }

    /// Excess mean work over the adiabatic value.
    pub fn excess(&self) -> Option<f64> {
        self.kappa1_excess.or_else(|| self.mu.map(|m| self.values[0] - m))
    }
}

fn check_order(n_max: usize, max: usize) -> Result<()> {
    if n_max == 0 || n_max > max {
        return Err(Error::UnsupportedOrder { order: n_max, max });
    }
    Ok(())
}

fn require_zero_t(protocol: &QuenchProtocol) -> Result<()> {
    if !protocol.is_zero_temperature() {
        return Err(Error::Unsupported(
            "zero-temperature route needs the ground state (beta infinite)".into(),
        ));
    }
    Ok(())
}

fn finite_beta(protocol: &QuenchProtocol) -> Result<f64> {
    match protocol.beta {
        Some(b) if b.is_finite() => Ok(b),
        _ => Err(Error::Unsupported("finite-temperature route needs a finite beta".into())),
    }
}

/// Exact cumulants of independent modes, each a two-point variable with
/// excitation energy `2 omega1_k`:
/// `kappa_n / N = avg[(2 omega1)^n kappa_n^Bernoulli(p_k)] + mu delta_{n1}`.
pub fn cumulants_zero_t(protocol: &QuenchProtocol, spectrum: &Spectrum, n_max: usize) -> Result<CumulantSet> {
    check_order(n_max, MAX_BERNOULLI_ORDER)?;
    require_zero_t(protocol)?;
    let mu = adiabatic_work_per_site(protocol, spectrum.size())?;
    let mut values = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let avg: f64 = spectrum.average(
            |k, mp| {
                let e = 2.0 * protocol.omega1(k);
                Ok(e.powi(n as i32) * bernoulli_cumulant(n, mp.p)?)
            },
            &[],
            QUAD_TOL,
        )?;
        values.push(avg);
    }
    let excess = values[0];
    values[0] += mu;
    Ok(CumulantSet {
        values,
        method: CumulantMethod::BernoulliSum,
        mu: Some(mu),
        kappa1_excess: Some(excess),
        errors: None,
    })
}

/// `sech(x)` without overflow.
pub(crate) fn sech(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    2.0 * e / (1.0 + e * e)
}

/// First two cumulants for a thermal initial state:
/// `kappa1/N = avg[(w0 - Q w1) tanh(beta w0 / 2)]`,
/// `kappa2/N = avg[((w0 - Q w1)^2 + (1 - Q^2) w1^2 cosh(beta w0)) sech^2(beta w0 / 2)] / 2`
/// with `Q = 1 - 2p`.
pub fn cumulants_finite_t(protocol: &QuenchProtocol, spectrum: &Spectrum) -> Result<CumulantSet> {
    let beta = finite_beta(protocol)?;
    let k1: f64 = spectrum.average(
        |k, mp| {
            let (w0, w1) = (protocol.omega0(k), protocol.omega1(k));
            let q = 1.0 - 2.0 * mp.p;
            Ok((w0 - q * w1) * (0.5 * beta * w0).tanh())
        },
        &[],
        QUAD_TOL,
    )?;
    let k2: f64 = spectrum.average(
        |k, mp| {
            let (w0, w1) = (protocol.omega0(k), protocol.omega1(k));
            let q = 1.0 - 2.0 * mp.p;
            let s = sech(0.5 * beta * w0);
            // cosh(x) sech^2(x/2) = 2 / (1 + sech x)
            let thermal = (w0 - q * w1).powi(2) * s * s;
            let quantum = 4.0 * mp.p * (1.0 - mp.p) * w1 * w1 * 2.0 / (1.0 + sech(beta * w0));
            Ok(0.5 * (thermal + quantum))
        },
        &[],
        QUAD_TOL,
    )?;
    Ok(CumulantSet {
        values: vec![k1, k2],
        method: CumulantMethod::BernoulliSum,
        mu: None,
        kappa1_excess: None,
        errors: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{LzFull, LzHalf};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn fig1a(v: f64) -> (QuenchProtocol, Spectrum) {
        let p = QuenchProtocol::new(-4.0, 1.0, v, 1.0).unwrap();
        let s = Spectrum::continuum(&p, Arc::new(LzFull)).unwrap();
        (p, s)
    }

    #[test]
    fn adiabatic_protocol_has_no_fluctuations() {
        let p = QuenchProtocol::new(0.4, 0.4, 0.05, 1.0).unwrap();
        let s = Spectrum::finite(&p, 100, &LzFull).unwrap();
        let c = cumulants_zero_t(&p, &s, 4).unwrap();
        assert_eq!(c.values, vec![0.0; 4]);
        assert_eq!(c.excess(), Some(0.0));
    }

    #[test]
    fn full_quench_matches_paper_forms() {
        for v in [0.01, 0.02, 0.05] {
            let (p, s) = fig1a(v);
            let c = cumulants_zero_t(&p, &s, 2).unwrap();
            let k1 = 2f64.sqrt() / (2.0 * PI) * v.sqrt();
            let k2 = (2.0 * 2f64.sqrt() - 2.0) / PI * v.sqrt();
            assert!((c.excess().unwrap() / k1 - 1.0).abs() < 0.02);
            assert!((c.kappa(2) / k2 - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn half_quench_coefficients() {
        let v = 0.02;
        let p = QuenchProtocol::new(-4.0, 0.0, v, 1.0).unwrap();
        let s = Spectrum::continuum(&p, Arc::new(LzHalf)).unwrap();
        let c = cumulants_zero_t(&p, &s, 2).unwrap();
        assert!((c.excess().unwrap() / (0.038 * v) - 1.0).abs() < 0.1);
        assert!((c.kappa(2) / (0.092 * v.powf(1.5)) - 1.0).abs() < 0.1);
    }

    #[test]
    fn order_limits() {
        let (p, s) = fig1a(0.05);
        assert!(matches!(cumulants_zero_t(&p, &s, 7), Err(Error::UnsupportedOrder { .. })));
        assert!(cumulants_zero_t(&p.with_beta(Some(1.0)).unwrap(), &s, 2).is_err());
        assert!(cumulants_finite_t(&p, &s).is_err());
    }

    #[test]
    fn finite_t_reduces_to_zero_t() {
        let (p, s) = fig1a(0.02);
        let zero = cumulants_zero_t(&p, &s, 2).unwrap();
        let hot = cumulants_finite_t(&p.with_beta(Some(50.0)).unwrap(), &s).unwrap();
        for n in 1..=2 {
            assert!((hot.kappa(n) / zero.kappa(n) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn finite_t_identity_protocol() {
        let p = QuenchProtocol::new(0.5, 0.5, 0.05, 1.0).unwrap().with_beta(Some(0.7)).unwrap();
        let s = Spectrum::finite(&p, 64, &LzFull).unwrap();
        let c = cumulants_finite_t(&p, &s).unwrap();
        assert!(c.kappa(1).abs() < 1e-15);
        assert!(c.kappa(2) >= 0.0);
    }
}
