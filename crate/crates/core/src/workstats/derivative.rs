//! Cumulants from finite differences of sampled `ln chi(u)`.

use num_complex::Complex64;

use super::{CfwSamples, CumulantMethod, CumulantSet};
use crate::error::{Error, Result};
use crate::ising::QuenchProtocol;

const MAX_ORDER: usize = 4;
const DISAGREEMENT_TOL: f64 = 1e-4;
/// Absolute floor (per site) below which disagreements count as rounding.
const ABS_FLOOR: f64 = 1e-9;

/// Fourth-order central stencils `(offsets, weights, divisor)` for the
/// n-th derivative; the result is `sum w f(x + o h) / (divisor h^n)`.
fn stencil(n: usize) -> (&'static [i32], &'static [f64], f64) {
    match n {
        1 => (&[-2, -1, 1, 2], &[1.0, -8.0, 8.0, -1.0], 12.0),
        2 => (&[-2, -1, 0, 1, 2], &[-1.0, 16.0, -30.0, 16.0, -1.0], 12.0),
        3 => (&[-3, -2, -1, 1, 2, 3], &[1.0, -8.0, 13.0, -13.0, 8.0, -1.0], 8.0),
        4 => (&[-3, -2, -1, 0, 1, 2, 3], &[-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0], 6.0),
        _ => unreachable!("order checked by caller"),
    }
}

fn reach(n: usize) -> usize {
    if n <= 2 {
        2
    } else {
        3
    }
}

/// Uniform grid `u = i h`, `i = -m..=m`, wide enough for every order up to
/// `n_max` at steps `h` and `2h`.
pub fn derivative_grid(h: f64, n_max: usize) -> Vec<f64> {
    let m = 2 * reach(n_max.clamp(1, MAX_ORDER)) as i32;
    (-m..=m).map(|i| i as f64 * h).collect()
}

/// Step suited to the fastest phase in `ln chi`: `2 w1` at zero temperature,
/// `w0 + w1` at finite temperature.
pub fn suggested_step(protocol: &QuenchProtocol) -> f64 {
    let j = protocol.j;
    let w_max = |l: f64| 2.0 * j * ((l - 1.0).abs() + 1.0);
    let rate = if protocol.is_zero_temperature() {
        2.0 * w_max(protocol.lambda1)
    } else {
        w_max(protocol.lambda0) + w_max(protocol.lambda1)
    };
    0.05 / rate
}

/// `kappa_n / N = (d/du)^n ln chi(0) / i^n` from central differences at the
/// grid step `h` and at `2h`, combined by one Richardson step.
pub fn cumulants_from_cfw(samples: &CfwSamples, n_max: usize) -> Result<CumulantSet> {
    if n_max == 0 || n_max > MAX_ORDER {
        return Err(Error::UnsupportedOrder {
            order: n_max,
            max: MAX_ORDER,
        });
    }
    let u = &samples.u_grid;
    let f = &samples.log_chi_per_site;
    let i0 = u
        .iter()
        .position(|&x| x == 0.0)
        .ok_or_else(|| Error::InvalidUGrid("u = 0 must be a grid point".into()))?;
    let need = 2 * reach(n_max);
    if i0 < need || i0 + need >= u.len() {
        return Err(Error::InvalidUGrid(format!(
            "need {need} points on each side of u = 0 for order {n_max}"
        )));
    }
    let h = u[i0 + 1] - u[i0];
    for w in u[i0 - need..=i0 + need].windows(2) {
        if ((w[1] - w[0]) - h).abs() > 1e-9 * h {
            return Err(Error::InvalidUGrid("u grid must be uniform around 0".into()));
        }
    }

    let derivative = |n: usize, step: usize| -> Complex64 {
        let (offs, ws, div) = stencil(n);
        let sum: Complex64 = offs
            .iter()
            .zip(ws)
            .map(|(&o, &w)| f[(i0 as i64 + o as i64 * step as i64) as usize] * w)
            .sum();
        sum / (div * (step as f64 * h).powi(n as i32))
    };
    // 1 / i^n
    let unrotate = |z: Complex64, n: usize| -> Complex64 { z * Complex64::new(0.0, -1.0).powi(n as i32) };

    let mut values = Vec::with_capacity(n_max);
    let mut errors = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let d1 = unrotate(derivative(n, 1), n);
        let d2 = unrotate(derivative(n, 2), n);
        let rich = (16.0 * d1 - d2) / 15.0;
        let disagreement = (d1 - d2).norm();
        if disagreement > DISAGREEMENT_TOL * rich.norm() && disagreement > ABS_FLOOR {
            return Err(Error::GridTooCoarse {
                order: n,
                disagreement: disagreement / rich.norm().max(f64::MIN_POSITIVE),
            });
        }
        values.push(rich.re);
        errors.push(disagreement / 15.0 + rich.im.abs());
    }
    Ok(CumulantSet {
        values,
        method: CumulantMethod::DerivativeOfCfw,
        mu: None,
        kappa1_excess: None,
        errors: Some(errors),
    })
}
