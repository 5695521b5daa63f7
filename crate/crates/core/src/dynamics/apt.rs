//! First-order adiabatic perturbation theory for one mode.

use super::{ExcitationModel, Method};
use crate::error::{Error, Result};
use crate::ising::{bogoliubov_angle_derivative, dispersion, QuenchProtocol};
use crate::quad;

const ABS_TOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 30;

/// `|int dlambda <1|d_lambda|0> exp(i/v int 2 omega dlambda')|^2` over the
/// protocol. The phase accumulates at the pair gap `2 omega`.
pub fn apt_probability(protocol: &QuenchProtocol, k: f64) -> Result<f64> {
    protocol.validate()?;
    let (l0, l1, v, j) = (protocol.lambda0, protocol.lambda1, protocol.v, protocol.j);
    if l0 == l1 {
        return Ok(0.0);
    }
    // The gap is smallest where lambda - 1 + cos k = 0, and there it equals 2J|sin k|.
    let lc = 1.0 - k.cos();
    let s = k.sin().abs();
    if lc >= l0 && lc <= l1 && s < 1e-12 {
        return Err(Error::GaplessPoint { lambda: lc, k });
    }
    let mut breaks = vec![lc];
    for m in [1.0, 4.0, 16.0] {
        breaks.push(lc - m * s);
        breaks.push(lc + m * s);
    }
    let amplitude = |lambda: f64| bogoliubov_angle_derivative(lambda, k).unwrap_or(0.0);
    let frequency = |lambda: f64| 2.0 * dispersion(lambda, k, j) / v;
    let integral = quad::oscillatory(amplitude, frequency, l0, l1, &breaks, ABS_TOL, MAX_DEPTH)?;
    Ok(integral.norm_sqr().clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Apt;

impl ExcitationModel for Apt {
    fn method(&self) -> Method {
        Method::Apt
    }

    fn check(&self, _protocol: &QuenchProtocol) -> Result<()> {
        Ok(())
    }

    fn probability(&self, protocol: &QuenchProtocol, k: f64) -> Result<f64> {
        apt_probability(protocol, k)
    }
}
