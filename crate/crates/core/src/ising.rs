//! Transverse-field Ising chain reduced to independent two-level momentum
//! modes: protocol, momentum grid, dispersion and Bogoliubov matrix element.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{self, Tolerance};

/// Linear quench `lambda(t) = v t` from `lambda0` to `lambda1`.
///
/// `beta = None` denotes the ground-state (zero-temperature) initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuenchProtocol {
    pub lambda0: f64,
    pub lambda1: f64,
    pub v: f64,
    pub j: f64,
    pub beta: Option<f64>,
}

impl QuenchProtocol {
    /// Ground-state protocol; validated.
    pub fn new(lambda0: f64, lambda1: f64, v: f64, j: f64) -> Result<Self> {
        let p = QuenchProtocol {
            lambda0,
            lambda1,
            v,
            j,
            beta: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_beta(mut self, beta: Option<f64>) -> Result<Self> {
        self.beta = beta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_rate(mut self, v: f64) -> Result<Self> {
        self.v = v;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProtocol(msg));
        if !(self.v.is_finite() && self.v > 0.0) {
            return bad(format!("quench rate v = {} must be positive", self.v));
        }
        if !(self.j.is_finite() && self.j > 0.0) {
            return bad(format!("energy scale J = {} must be positive", self.j));
        }
        if !(self.lambda0.is_finite() && self.lambda1.is_finite()) {
            return bad("endpoints must be finite".into());
        }
        if self.lambda0 > self.lambda1 {
            return bad(format!(
                "lambda0 = {} must not exceed lambda1 = {}",
                self.lambda0, self.lambda1
            ));
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) || b.is_nan() {
                return bad(format!("inverse temperature beta = {b} must be positive"));
            }
        }
        Ok(())
    }

    pub fn t0(&self) -> f64 {
        self.lambda0 / self.v
    }

    pub fn t1(&self) -> f64 {
        self.lambda1 / self.v
    }

    /// Ground-state protocol, i.e. `beta` absent or infinite.
    pub fn is_zero_temperature(&self) -> bool {
        self.beta.is_none_or(|b| b.is_infinite())
    }

    pub fn omega0(&self, k: f64) -> f64 {
        dispersion(self.lambda0, k, self.j)
    }

    pub fn omega1(&self, k: f64) -> f64 {
        dispersion(self.lambda1, k, self.j)
    }
}

/// Antiperiodic momenta `k_m = (2m - 1) pi / N`, `m = 1..N/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    n_spins: usize,
    momenta: Vec<f64>,
}

impl ModeGrid {
    pub fn new(n_spins: usize) -> Result<Self> {
        if n_spins == 0 || n_spins % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "number of spins must be even and positive, got {n_spins}"
            )));
        }
        let momenta = (1..=n_spins / 2)
            .map(|m| (2 * m - 1) as f64 * PI / n_spins as f64)
            .collect();
        Ok(ModeGrid { n_spins, momenta })
    }

    pub fn n_spins(&self) -> usize {
        self.n_spins
    }

    pub fn momenta(&self) -> &[f64] {
        &self.momenta
    }

    pub fn len(&self) -> usize {
        self.momenta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.momenta.is_empty()
    }
}

/// Two-level Hamiltonian `eps sigma_z + delta sigma_x` of one momentum pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeHamiltonian {
    pub eps: f64,
    pub delta: f64,
}

impl ModeHamiltonian {
    /// Magnitude of the two eigenvalues `+-sqrt(eps^2 + delta^2)`.
    pub fn energy(&self) -> f64 {
        self.eps.hypot(self.delta)
    }

    /// Mixing angle `atan2(delta, eps)`.
    pub fn angle(&self) -> f64 {
        self.delta.atan2(self.eps)
    }

    /// Instantaneous ground state `(sin(a/2), -cos(a/2))`.
    pub fn ground_state(&self) -> [f64; 2] {
        let half = 0.5 * self.angle();
        [half.sin(), -half.cos()]
    }

    /// Instantaneous excited state `(cos(a/2), sin(a/2))`.
    pub fn excited_state(&self) -> [f64; 2] {
        let half = 0.5 * self.angle();
        [half.cos(), half.sin()]
    }
}

/// Single-particle energy `2J sqrt((lambda - 1 + cos k)^2 + sin^2 k)`.
pub fn dispersion(lambda: f64, k: f64, j: f64) -> f64 {
    2.0 * j * (lambda - 1.0 + k.cos()).hypot(k.sin())
}

pub fn mode_hamiltonian(lambda: f64, k: f64, j: f64) -> ModeHamiltonian {
    ModeHamiltonian {
        eps: 2.0 * j * (lambda - 1.0 + k.cos()),
        delta: 2.0 * j * k.sin(),
    }
}

/// `<1_k | d/dlambda | 0_k>`, half the lambda-derivative of the mixing angle.
///
/// The sign follows the ground-state gauge of [`ModeHamiltonian::ground_state`].
pub fn bogoliubov_angle_derivative(lambda: f64, k: f64) -> Result<f64> {
    let a = lambda - 1.0 + k.cos();
    let s = k.sin();
    let r2 = a * a + s * s;
    if r2 == 0.0 {
        return Err(Error::GaplessPoint { lambda, k });
    }
    Ok(-s / (2.0 * r2))
}

/// Finite chain or the thermodynamic limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChainSize {
    Finite(usize),
    Continuum,
}

/// Per-site adiabatic work `mu`: ground-energy density difference between
/// the endpoint Hamiltonians.
pub fn adiabatic_work_per_site(protocol: &QuenchProtocol, size: ChainSize) -> Result<f64> {
    let j = protocol.j;
    let (l0, l1) = (protocol.lambda0, protocol.lambda1);
    if l0 == l1 {
        return Ok(0.0);
    }
    let f = |k: f64| dispersion(l0, k, j) - dispersion(l1, k, j);
    match size {
        ChainSize::Finite(n) => {
            let grid = ModeGrid::new(n)?;
            Ok(grid.momenta().iter().map(|&k| f(k)).sum::<f64>() / n as f64)
        }
        ChainSize::Continuum => {
            // Kinks of |.| at the critical momenta for critical endpoints.
            let est = quad::integrate_with_breaks(
                |k: f64| Ok(f(k)),
                0.0,
                PI,
                &[],
                Tolerance::absolute(1e-12).with_rel(1e-14),
            )?;
            Ok(est.value / (2.0 * PI))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispersion_examples() {
        assert!(dispersion(0.0, 0.0, 1.0).abs() < 1e-15);
        assert!((dispersion(0.0, PI / 2.0, 1.0) - 2.0 * 2f64.sqrt()).abs() < 1e-14);
        assert!(dispersion(2.0, PI, 1.0).abs() < 1e-15);
        // flat band at lambda = 1
        for k in [0.1, 1.0, 3.0] {
            assert!((dispersion(1.0, k, 1.5) - 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn dispersion_vanishes_only_at_critical_points() {
        for i in 0..=800 {
            let lambda = -5.0 + 8.0 * i as f64 / 800.0;
            for m in 0..=400 {
                let k = PI * m as f64 / 400.0;
                let w = dispersion(lambda, k, 1.0);
                assert!(w >= 0.0);
                let critical = (lambda.abs() < 1e-12 && k == 0.0) || ((lambda - 2.0).abs() < 1e-12 && m == 400);
                if !critical {
                    assert!(w > 1e-6, "lambda={lambda} k={k}");
                }
            }
        }
    }

    #[test]
    fn mode_hamiltonian_examples() {
        let h = mode_hamiltonian(1.0, PI / 2.0, 1.0);
        assert!(h.eps.abs() < 1e-15);
        assert!((h.delta - 2.0).abs() < 1e-15);
        // Landau-Zener form near k = 0: eps ~ 2J(lambda - k^2/2), delta ~ 2Jk
        let k = 1e-3;
        let h = mode_hamiltonian(0.0, k, 1.0);
        assert!((h.eps - 2.0 * (-k * k / 2.0)).abs() < 1e-12);
        assert!((h.delta - 2.0 * k).abs() < 1e-9);
    }

    #[test]
    fn eigenvectors_are_orthonormal_eigenstates() {
        let h = mode_hamiltonian(-0.7, 0.4, 1.3);
        let e = h.energy();
        for (state, sign) in [(h.ground_state(), -1.0), (h.excited_state(), 1.0)] {
            let hx = [h.eps * state[0] + h.delta * state[1], h.delta * state[0] - h.eps * state[1]];
            assert!((hx[0] - sign * e * state[0]).abs() < 1e-13);
            assert!((hx[1] - sign * e * state[1]).abs() < 1e-13);
        }
        let g = h.ground_state();
        let x = h.excited_state();
        assert!((g[0] * x[0] + g[1] * x[1]).abs() < 1e-15);
    }

    #[test]
    fn bogoliubov_examples() {
        assert!(bogoliubov_angle_derivative(0.3, PI).unwrap().abs() < 1e-15);
        assert!((bogoliubov_angle_derivative(1.0, PI / 2.0).unwrap() + 0.5).abs() < 1e-15);
        for &(l, k) in &[(0.3, 0.7), (-2.0, 1.1)] {
            let a = bogoliubov_angle_derivative(l, k).unwrap();
            let b = bogoliubov_angle_derivative(l, -k).unwrap();
            assert!((a + b).abs() < 1e-15);
        }
        assert!(matches!(
            bogoliubov_angle_derivative(0.0, 0.0),
            Err(Error::GaplessPoint { .. })
        ));
    }

    #[test]
    fn grid_layout() {
        let g = ModeGrid::new(10).unwrap();
        assert_eq!(g.len(), 5);
        assert!((g.momenta()[0] - PI / 10.0).abs() < 1e-15);
        assert!(g.momenta().windows(2).all(|w| w[1] > w[0]));
        assert!(g.momenta().iter().all(|&k| k > 0.0 && k < PI));
        assert!(ModeGrid::new(7).is_err());
        assert!(ModeGrid::new(0).is_err());
    }

    #[test]
    fn protocol_validation() {
        assert!(QuenchProtocol::new(-4.0, 1.0, 0.05, 1.0).is_ok());
        assert!(QuenchProtocol::new(-4.0, 1.0, 0.0, 1.0).is_err());
        assert!(QuenchProtocol::new(-4.0, 1.0, 0.1, -1.0).is_err());
        assert!(QuenchProtocol::new(1.0, -4.0, 0.1, 1.0).is_err());
        let p = QuenchProtocol::new(-4.0, 1.0, 0.05, 1.0).unwrap();
        assert!(p.with_beta(Some(-1.0)).is_err());
        assert!(p.with_beta(Some(f64::INFINITY)).unwrap().is_zero_temperature());
        assert!(!p.with_beta(Some(2.0)).unwrap().is_zero_temperature());
    }

    #[test]
    fn adiabatic_work_identity_protocol() {
        let p = QuenchProtocol::new(0.5, 0.5, 0.1, 1.0).unwrap();
        assert_eq!(adiabatic_work_per_site(&p, ChainSize::Continuum).unwrap(), 0.0);
        assert_eq!(adiabatic_work_per_site(&p, ChainSize::Finite(100)).unwrap(), 0.0);
    }
}
