//! Polylogarithm form of the full-quench CFW for Gaussian `p_k`, valid when
//! `w1(k) ~ 2 J lambda1` over the excited modes.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{cfw::ln_mode_factor, require_zero_t, CumulantMethod, CumulantSet, QUAD_TOL};
use crate::dynamics::{lz_full, lz_full_ln};
use crate::error::{Error, Result};
use crate::ising::{adiabatic_work_per_site, ChainSize, QuenchProtocol};
use crate::quad;
use crate::specfun::{polylog, riemann_zeta_3half};

/// `ln[chi / chi_a] / N = C Li_{3/2}(1 - e^{a x})` with
/// `C = -sqrt(2 v / J) / (8 pi)`, `a = 4 J lambda1` and `x = iu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedForm {
    pub prefactor: f64,
    pub a: f64,
    v: f64,
    j: f64,
}

impl ClosedForm {
    pub fn new(protocol: &QuenchProtocol) -> Result<Self> {
        require_zero_t(protocol)?;
        if !(protocol.lambda0 < 0.0 && protocol.lambda1 > 0.0) {
            return Err(Error::Unsupported(
                "closed form needs a full quench lambda0 < 0 < lambda1".into(),
            ));
        }
        let (v, j) = (protocol.v, protocol.j);
        Ok(ClosedForm {
            prefactor: -(2.0 * v / j).sqrt() / (8.0 * PI),
            a: 4.0 * j * protocol.lambda1,
            v,
            j,
        })
    }

    /// Momentum beyond which `p_k e^{x} < 1e-16`.
    fn cutoff(&self, x: f64) -> f64 {
        ((16.0 * 10f64.ln() + x.max(0.0)) * self.v / (2.0 * PI * self.j)).sqrt()
    }

    fn half_point(&self) -> f64 {
        (self.v * 2f64.ln() / (2.0 * PI * self.j)).sqrt()
    }

    /// Direct k-integral `(1/2pi) int_0^inf ln[1 + p_k (e^{iau} - 1)] dk`.
    pub fn integral(&self, u: f64) -> Result<Complex64> {
        let phi = 0.5 * self.a * u;
        let kc = self.cutoff(0.0);
        let est = quad::integrate_with_breaks(
            |k: f64| Ok(ln_mode_factor(lz_full(k, self.v, self.j), phi)),
            0.0,
            kc,
            &[self.half_point()],
            QUAD_TOL,
        )?;
        Ok(est.value / (2.0 * PI))
    }

    /// Real continuation `(1/2pi) int_0^inf ln[1 - p_k + p_k e^{a s}] dk`.
    pub fn integral_real(&self, s: f64) -> Result<f64> {
        let x = self.a * s;
        let kc = self.cutoff(x);
        let est = quad::integrate_with_breaks(
            |k: f64| {
                let ln_p = lz_full_ln(k, self.v, self.j);
                let ln_q = (-ln_p.exp()).ln_1p();
                Ok(log_add_exp(ln_q, ln_p + x))
            },
            0.0,
            kc,
            &[self.half_point()],
            QUAD_TOL,
        )?;
        Ok(est.value / (2.0 * PI))
    }
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + (-(a - b).abs()).exp().ln_1p()
}

/// Per-site `ln[chi(u) / chi_a(u)]` from the polylogarithm.
///
/// Outside the series domain `|1 - e^{4iuJ lambda1}| <= 1` this returns
/// [`Error::SeriesDomain`] unless `fallback` is set, in which case the
/// k-integral the closed form resums is evaluated instead.
pub fn cfw_closed_form(protocol: &QuenchProtocol, u: f64, fallback: bool) -> Result<Complex64> {
    let cf = ClosedForm::new(protocol)?;
    let z = 1.0 - Complex64::from_polar(1.0, cf.a * u);
    if z.norm() <= 1.0 {
        return Ok(cf.prefactor * polylog(1.5, z)?);
    }
    if fallback {
        cf.integral(u)
    } else {
        Err(Error::SeriesDomain { modulus: z.norm() })
    }
}

/// The closed form continued to `iu -> s` on the real axis.
pub fn closed_form_real(protocol: &QuenchProtocol, s: f64, fallback: bool) -> Result<f64> {
    let cf = ClosedForm::new(protocol)?;
    let z = 1.0 - (cf.a * s).exp();
    if z.abs() <= 1.0 {
        return Ok(cf.prefactor * polylog(1.5, Complex64::new(z, 0.0))?.re);
    }
    if fallback {
        cf.integral_real(s)
    } else {
        Err(Error::SeriesDomain { modulus: z.abs() })
    }
}

/// `lim_{s -> -inf}` of the continued closed form divided by `sqrt(v)`:
/// `-sqrt(2/J) zeta(3/2) / (8 pi)`.
pub fn f_limit_negative_infinity(j: f64) -> f64 {
    -(2.0 / j).sqrt() * riemann_zeta_3half() / (8.0 * PI)
}

/// Taylor coefficients of `Li_{3/2}(1 - e^y)` in `y` up to `y^n`.
fn polylog_taylor(n: usize) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    let mut fact = 1.0;
    for (j, wj) in w.iter_mut().enumerate().skip(1) {
        fact *= j as f64;
        *wj = -1.0 / fact;
    }
    let mut out = vec![0.0; n + 1];
    let mut power = w.clone();
    for l in 1..=n {
        for (o, p) in out.iter_mut().zip(&power) {
            *o += p / (l as f64).powf(1.5);
        }
        let mut next = vec![0.0; n + 1];
        for (i, &pi) in power.iter().enumerate() {
            for (j, &wj) in w.iter().enumerate() {
                if i + j <= n {
                    next[i + j] += pi * wj;
                }
            }
        }
        power = next;
    }
    out
}

/// Cumulants from the Taylor expansion of the closed form in `iu`, plus the
/// continuum adiabatic work in `kappa_1`.
pub fn closed_form_cumulants(protocol: &QuenchProtocol, n_max: usize) -> Result<CumulantSet> {
    if n_max == 0 || n_max > 6 {
        return Err(Error::UnsupportedOrder { order: n_max, max: 6 });
    }
    let cf = ClosedForm::new(protocol)?;
    let c = polylog_taylor(n_max);
    let mut fact = 1.0;
    let mut values = Vec::with_capacity(n_max);
    for (n, cn) in c.iter().enumerate().skip(1) {
        fact *= n as f64;
        values.push(fact * cf.prefactor * cn * cf.a.powi(n as i32));
    }
    let mu = adiabatic_work_per_site(protocol, ChainSize::Continuum)?;
    let excess = values[0];
    values[0] += mu;
    Ok(CumulantSet {
        values,
        method: CumulantMethod::ClosedForm,
        mu: Some(mu),
        kappa1_excess: Some(excess),
        errors: None,
    })
}
