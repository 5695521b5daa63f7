//! Landau-Zener probabilities: the full crossing and the crossing stopped at
//! the critical point.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{ExcitationModel, Method};
use crate::error::{Error, Result};
use crate::ising::QuenchProtocol;
use crate::specfun::scaled_gamma;

/// `exp(-2 pi J k^2 / v)`.
pub fn lz_full(k: f64, v: f64, j: f64) -> f64 {
    lz_full_ln(k, v, j).exp()
}

pub fn lz_full_ln(k: f64, v: f64, j: f64) -> f64 {
    -2.0 * PI * j * k * k / v
}

/// Below this `x = pi alpha / 4` the prefactor uses its Taylor series.
const SERIES_SWITCH: f64 = PI * 1e-3 / 4.0;

/// Excitation probability for a sweep that stops at the crossing, with
/// `alpha = 4 J k^2 / v`.
///
/// Written with `Gamma(z) e^{pi |Im z| / 2}` so that nothing overflows at
/// large `alpha`:
/// `p = 1 - 2 (1 - e^{-pi alpha/2}) / (2 pi alpha) * |G(1 + i a/8) + sqrt(a/8) G(1/2 + i a/8) e^{i pi/4}|^2`.
pub fn lz_half(alpha: f64) -> f64 {
    assert!(alpha >= 0.0, "alpha must be nonnegative");
    if alpha == 0.0 {
        return 0.5;
    }
    let x = PI * alpha / 4.0;
    // (1 - e^{-2x}) / (8x) = e^{-x} sinh(x) / (4x)
    let prefactor = if x < SERIES_SWITCH {
        let x2 = x * x;
        (-x).exp() * (1.0 + x2 / 6.0 + x2 * x2 / 120.0) / 4.0
    } else {
        -(-2.0 * x).exp_m1() / (8.0 * x)
    };
    let y = alpha / 8.0;
    let g1 = scaled_gamma(Complex64::new(1.0, y)).expect("no pole off the real axis");
    let g2 = scaled_gamma(Complex64::new(0.5, y)).expect("no pole off the real axis");
    let s = g1 + y.sqrt() * g2 * Complex64::from_polar(1.0, PI / 4.0);
    (1.0 - 2.0 * prefactor * s.norm_sqr()).clamp(0.0, 1.0)
}

/// Full Landau-Zener crossing, valid for sweeps through the `lambda = 0`
/// critical point only.
#[derive(Debug, Clone, Copy, Default)]
pub struct LzFull;

impl ExcitationModel for LzFull {
    fn method(&self) -> Method {
        Method::LzFull
    }

    fn check(&self, protocol: &QuenchProtocol) -> Result<()> {
        let (l0, l1) = (protocol.lambda0, protocol.lambda1);
        if l0 == l1 || (l0 < 0.0 && l1 > 0.0 && l1 < 2.0) {
            Ok(())
        } else {
            Err(Error::MethodPrecondition {
                method: self.name().into(),
                reason: format!("needs lambda0 < 0 < lambda1 < 2, got [{l0}, {l1}]"),
            })
        }
    }

    fn probability(&self, protocol: &QuenchProtocol, k: f64) -> Result<f64> {
        if protocol.lambda0 == protocol.lambda1 {
            return Ok(0.0);
        }
        Ok(lz_full(k, protocol.v, protocol.j))
    }

    fn ln_probability(&self, protocol: &QuenchProtocol, k: f64) -> Result<f64> {
        if protocol.lambda0 == protocol.lambda1 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(lz_full_ln(k, protocol.v, protocol.j))
    }
}

/// Half crossing: the sweep ends at the critical point `lambda1 = 0`.
#[derive(Debug, Clone, Copy, Default)]
pub struct LzHalf;

impl LzHalf {
    pub fn alpha(protocol: &QuenchProtocol, k: f64) -> f64 {
        4.0 * protocol.j * k * k / protocol.v
    }
}

impl ExcitationModel for LzHalf {
    fn method(&self) -> Method {
        Method::LzHalf
    }

    fn check(&self, protocol: &QuenchProtocol) -> Result<()> {
        if protocol.lambda1 != 0.0 || protocol.lambda0 >= 0.0 {
            return Err(Error::MethodPrecondition {
                method: self.name().into(),
                reason: format!(
                    "needs lambda0 < 0 and lambda1 = 0, got [{}, {}]",
                    protocol.lambda0, protocol.lambda1
                ),
            });
        }
        Ok(())
    }

    fn probability(&self, protocol: &QuenchProtocol, k: f64) -> Result<f64> {
        self.check(protocol)?;
        Ok(lz_half(Self::alpha(protocol, k)))
    }

    fn breakpoints(&self, protocol: &QuenchProtocol) -> Vec<f64> {
        // alpha = 4^m for m = -1..5
        let scale = (protocol.v / (4.0 * protocol.j)).sqrt();
        (-1..=5)
            .map(|m| scale * 2f64.powi(m))
            .filter(|&k| k < PI)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lz_full_examples() {
        assert_eq!(lz_full(0.0, 0.1, 1.0), 1.0);
        let k = (2f64.ln() * 0.05 / (2.0 * PI)).sqrt();
        assert!((lz_full(k, 0.05, 1.0) - 0.5).abs() < 1e-15);
        assert!((lz_full(0.1, 0.05, 1.0) - 0.284_66).abs() < 1e-4);
        assert!((lz_full(0.1, 0.05, 1.0) - (-0.4 * PI).exp()).abs() < 1e-16);
    }

    #[test]
    fn lz_half_limits() {
        assert_eq!(lz_half(0.0), 0.5);
        // leading correction is O(sqrt(alpha))
        assert!((lz_half(1e-9) - 0.5).abs() < 1e-4);
        assert!((lz_half(1e-12) - 0.5).abs() < 3e-6);
        let p = lz_half(100.0);
        let asym = 1.0 / (2.0 * 100.0f64).powi(2);
        assert!((p - asym).abs() / asym < 0.05, "p = {p}");
    }

    #[test]
    fn lz_half_series_switch_is_seamless() {
        // both prefactor branches at the switch point
        let x = SERIES_SWITCH;
        let series = (-x).exp() * (1.0 + x * x / 6.0 + x.powi(4) / 120.0) / 4.0;
        let direct = -(-2.0 * x).exp_m1() / (8.0 * x);
        assert!((series - direct).abs() < 1e-10);
        let a = 4.0 * SERIES_SWITCH / PI;
        assert!((lz_half(a * (1.0 - 1e-9)) - lz_half(a * (1.0 + 1e-9))).abs() < 1e-10);
    }

    #[test]
    fn lz_half_monotone_decreasing() {
        let mut prev = lz_half(0.0);
        for i in 1..=200 {
            let p = lz_half(50.0 * i as f64 / 200.0);
            assert!(p < prev, "alpha = {}", 50.0 * i as f64 / 200.0);
            prev = p;
        }
    }

    #[test]
    fn lz_half_matches_unscaled_formula() {
        // Direct evaluation with plain Gamma values where nothing overflows.
        use crate::specfun::complex_gamma;
        for &alpha in &[0.3, 2.0, 7.5, 20.0] {
            let y: f64 = alpha / 8.0;
            let g1 = complex_gamma(Complex64::new(1.0, y)).unwrap();
            let g2 = complex_gamma(Complex64::new(0.5, y)).unwrap();
            let s = g1 + y.sqrt() * g2 * Complex64::from_polar(1.0, PI / 4.0);
            let p = 1.0 - 2.0 * (-PI * alpha / 8.0).exp() / (PI * alpha) * (PI * alpha / 4.0).sinh() * s.norm_sqr();
            assert!((lz_half(alpha) - p).abs() < 1e-12);
        }
    }
}
