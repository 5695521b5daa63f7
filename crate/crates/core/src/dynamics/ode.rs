//! Exact time evolution of one momentum mode in the fixed diabatic basis.

use num_complex::Complex64;

use super::{ExcitationModel, Method};
use crate::error::{Error, Result};
use crate::ising::{mode_hamiltonian, QuenchProtocol};
use crate::ode::{dopri5, StepControl};

pub const DEFAULT_RELTOL: f64 = 1e-10;
const MIN_RELTOL: f64 = 1e-12;
const MAX_RELTOL: f64 = 1e-6;
const MAX_STEPS: usize = 50_000_000;

/// Amplitudes on the instantaneous eigenstates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeAmplitudes {
    pub a0: Complex64,
    pub a1: Complex64,
}

impl ModeAmplitudes {
    pub fn norm_sqr(&self) -> f64 {
        self.a0.norm_sqr() + self.a1.norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveReport {
    pub probability: f64,
    pub final_amplitudes: ModeAmplitudes,
    /// Largest `| |psi|^2 - 1 |` produced by a single accepted step; the
    /// state is renormalised after each step.
    pub max_norm_drift: f64,
    pub steps: usize,
}

/// Excitation probability from integrating the two-level Schroedinger
/// equation along `lambda(t) = v t`.
pub fn evolve_mode(protocol: &QuenchProtocol, k: f64, reltol: f64) -> Result<f64> {
    Ok(evolve_mode_report(protocol, k, reltol)?.probability)
}

pub fn evolve_mode_report(protocol: &QuenchProtocol, k: f64, reltol: f64) -> Result<EvolveReport> {
    if !(MIN_RELTOL..=MAX_RELTOL).contains(&reltol) {
        return Err(Error::ToleranceOutOfRange(reltol));
    }
    protocol.validate()?;
    let (v, j) = (protocol.v, protocol.j);
    let h0 = mode_hamiltonian(protocol.lambda0, k, j);
    let g = h0.ground_state();
    let y0 = [g[0], 0.0, g[1], 0.0];

    // i d(a, b)/dt = [[eps, delta], [delta, -eps]] (a, b)
    let rhs = |t: f64, y: &[f64; 4]| -> [f64; 4] {
        let h = mode_hamiltonian(v * t, k, j);
        let (ar, ai, br, bi) = (y[0], y[1], y[2], y[3]);
        let hr0 = h.eps * ar + h.delta * br;
        let hi0 = h.eps * ai + h.delta * bi;
        let hr1 = h.delta * ar - h.eps * br;
        let hi1 = h.delta * ai - h.eps * bi;
        [hi0, -hr0, hi1, -hr1]
    };
    let scale = 2.0 * j * (1.0 + protocol.lambda0.abs().max(protocol.lambda1.abs()) + 2.0);
    let control = StepControl {
        rtol: reltol,
        atol: reltol * 1e-3,
        max_steps: MAX_STEPS,
    };
    let mut drift: f64 = 0.0;
    let sol = dopri5(rhs, protocol.t0(), protocol.t1(), y0, control, 0.01 / scale, |_, y| {
        let n = y.iter().map(|c| c * c).sum::<f64>();
        drift = drift.max((n - 1.0).abs());
        let s = n.sqrt().recip();
        y.iter_mut().for_each(|c| *c *= s);
        true
    })?;

    let h1 = mode_hamiltonian(protocol.lambda1, k, j);
    let (g1, e1) = (h1.ground_state(), h1.excited_state());
    let psi = [Complex64::new(sol.y[0], sol.y[1]), Complex64::new(sol.y[2], sol.y[3])];
    let amps = ModeAmplitudes {
        a0: psi[0] * g1[0] + psi[1] * g1[1],
        a1: psi[0] * e1[0] + psi[1] * e1[1],
    };
    Ok(EvolveReport {
        probability: amps.a1.norm_sqr().clamp(0.0, 1.0),
        final_amplitudes: amps,
        max_norm_drift: drift,
        steps: sol.accepted + sol.rejected,
    })
}

/// Numerical integration route, the reference for the analytic ones.
#[derive(Debug, Clone, Copy)]
pub struct OdeModel {
    pub reltol: f64,
}

impl Default for OdeModel {
    fn default() -> Self {
        OdeModel { reltol: DEFAULT_RELTOL }
    }
}

impl ExcitationModel for OdeModel {
    fn method(&self) -> Method {
        Method::Ode
    }

    fn check(&self, _protocol: &QuenchProtocol) -> Result<()> {
        if !(MIN_RELTOL..=MAX_RELTOL).contains(&self.reltol) {
            return Err(Error::ToleranceOutOfRange(self.reltol));
        }
        Ok(())
    }

    fn probability(&self, protocol: &QuenchProtocol, k: f64) -> Result<f64> {
        evolve_mode(protocol, k, self.reltol)
    }

    fn ln_probability(&self, protocol: &QuenchProtocol, k: f64) -> Result<f64> {
        Ok(evolve_mode(protocol, k, self.reltol)?.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::lz::lz_full;
    use std::f64::consts::PI;

    fn fig1a(v: f64) -> QuenchProtocol {
        QuenchProtocol::new(-4.0, 1.0, v, 1.0).unwrap()
    }

    #[test]
    fn decoupled_mode_stays_put() {
        let p = evolve_mode(&fig1a(0.05), PI, 1e-10).unwrap();
        assert!(p < 1e-20);
    }

    #[test]
    fn matches_landau_zener_at_small_k() {
        let p = evolve_mode(&fig1a(0.05), 0.1, 1e-10).unwrap();
        assert!((p - lz_full(0.1, 0.05, 1.0)).abs() < 2e-3, "p = {p}");
    }

    #[test]
    fn adiabatic_limit() {
        let p = evolve_mode(&fig1a(1e-4), 0.5, 1e-9).unwrap();
        assert!(p < 1e-6, "p = {p}");
    }

    #[test]
    fn norm_is_conserved() {
        for &reltol in &[1e-8, 1e-10] {
            let r = evolve_mode_report(&fig1a(0.05), 0.3, reltol).unwrap();
            assert!(r.max_norm_drift < 10.0 * reltol, "drift {} at {reltol}", r.max_norm_drift);
            assert!((r.final_amplitudes.norm_sqr() - 1.0).abs() < 10.0 * reltol);
        }
    }

    #[test]
    fn tolerance_range_enforced() {
        assert!(matches!(evolve_mode(&fig1a(0.05), 0.3, 1e-5), Err(Error::ToleranceOutOfRange(_))));
        assert!(matches!(evolve_mode(&fig1a(0.05), 0.3, 1e-13), Err(Error::ToleranceOutOfRange(_))));
    }

    #[test]
    fn identity_protocol_is_unexcited() {
        let p = QuenchProtocol::new(0.3, 0.3, 0.05, 1.0).unwrap();
        assert!(evolve_mode(&p, 0.7, 1e-10).unwrap() < 1e-30);
    }
}
