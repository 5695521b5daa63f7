//! Kibble-Zurek exponents, rate sweeps, power-law fits and the generic
//! adiabatic-perturbation density.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ExcitationModel, Spectrum};
use crate::error::{Error, Result};
use crate::ising::{ChainSize, QuenchProtocol};
use crate::quad::{self, Tolerance};
use crate::workstats::{cumulants_finite_t, cumulants_zero_t, CumulantSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalExponents {
    pub d: u32,
    pub z: f64,
    pub nu: f64,
}

impl CriticalExponents {
    pub fn new(d: u32, z: f64, nu: f64) -> Result<Self> {
        if d == 0 || !(z > 0.0 && z.is_finite()) || !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidProtocol(format!(
                "critical exponents must be positive (d = {d}, z = {z}, nu = {nu})"
            )));
        }
        Ok(CriticalExponents { d, z, nu })
    }

    pub fn ising() -> Self {
        CriticalExponents { d: 1, z: 1.0, nu: 1.0 }
    }

    /// Kibble-Zurek density exponent `d nu / (z nu + 1)`.
    pub fn kz_exponent(&self) -> f64 {
        self.d as f64 * self.nu / (self.z * self.nu + 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentPrediction {
    pub delta: f64,
    pub log_correction: bool,
}

impl std::fmt::Display for ExponentPrediction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.log_correction {
            write!(f, "{} (log correction)", self.delta)
        } else {
            write!(f, "{}", self.delta)
        }
    }
}

/// Relative distance from 2 below which the marginal case is assumed.
const MARGINAL_TOL: f64 = 1e-12;

/// Exponent of `kappa_n ~ v^delta`. Away from the critical point every order
/// follows the density, `x = d nu / (z nu + 1)`; a quench ending at it gives
/// `x = (d + n z) nu / (z nu + 1)`. Above 2 the ultraviolet modes dominate
/// and the exponent sticks at 2, with a logarithm exactly at 2.
pub fn predict_delta(ex: CriticalExponents, n: u32, end_at_critical: bool) -> Result<ExponentPrediction> {
    if n == 0 {
        return Err(Error::InvalidProtocol("cumulant order n must be at least 1".into()));
    }
    let CriticalExponents { d, z, nu } = CriticalExponents::new(ex.d, ex.z, ex.nu)?;
    let x = if end_at_critical {
        (d as f64 + n as f64 * z) * nu / (z * nu + 1.0)
    } else {
        d as f64 * nu / (z * nu + 1.0)
    };
    Ok(if (x - 2.0).abs() <= MARGINAL_TOL * 2.0 {
        ExponentPrediction { delta: 2.0, log_correction: true }
    } else if x < 2.0 {
        ExponentPrediction { delta: x, log_correction: false }
    } else {
        ExponentPrediction { delta: 2.0, log_correction: false }
    })
}

/// One rate of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub v: f64,
    pub cumulants: CumulantSet,
}

impl SweepRow {
    /// `kappa_1 / N - mu` where known, otherwise `kappa_1 / N`.
    pub fn kappa1_excess(&self) -> f64 {
        self.cumulants.excess().unwrap_or(self.cumulants.values[0])
    }

    /// Column `n` of the scaling table: the excess for `n = 1`, else `kappa_n`.
    pub fn column(&self, n: usize) -> f64 {
        if n == 1 {
            self.kappa1_excess()
        } else {
            self.cumulants.kappa(n)
        }
    }
}

/// Cumulants at every rate in `v_list` with the other protocol fields held.
/// Rows come back in the order of `v_list`.
pub fn sweep_cumulants(
    template: &QuenchProtocol,
    v_list: &[f64],
    n_max: usize,
    model: Arc<dyn ExcitationModel>,
    size: ChainSize,
) -> Result<Vec<SweepRow>> {
    if v_list.is_empty() {
        return Err(Error::InvalidProtocol("empty rate list".into()));
    }
    v_list
        .par_iter()
        .map(|&v| {
            let run = || -> Result<SweepRow> {
                let protocol = template.with_rate(v)?;
                model.check(&protocol)?;
                let spectrum = match size {
                    ChainSize::Continuum => Spectrum::continuum(&protocol, model.clone())?,
                    ChainSize::Finite(n) => Spectrum::finite(&protocol, n, model.as_ref())?,
                };
                let cumulants = if protocol.is_zero_temperature() {
                    cumulants_zero_t(&protocol, &spectrum, n_max)?
                } else {
                    if n_max > 2 {
                        return Err(Error::UnsupportedOrder { order: n_max, max: 2 });
                    }
                    let mut c = cumulants_finite_t(&protocol, &spectrum)?;
                    c.values.truncate(n_max);
                    c
                };
                Ok(SweepRow { v, cumulants })
            };
            run().map_err(|e| e.at_rate(v))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub prefactor: f64,
    pub r_squared: f64,
    pub with_log: bool,
    /// Root-mean-square residual of `ln y`.
    pub rms_residual: f64,
    pub v_window: (f64, f64),
    pub points: usize,
}

pub const MIN_FIT_POINTS: usize = 6;

fn fit_inputs(points: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>, (f64, f64))> {
    if points.len() < MIN_FIT_POINTS {
        return Err(Error::DegenerateFit(format!(
            "{} points, need at least {MIN_FIT_POINTS}",
            points.len()
        )));
    }
    if points.iter().any(|&(v, y)| !(v > 0.0 && y > 0.0 && v.is_finite() && y.is_finite())) {
        return Err(Error::DegenerateFit("v and y must be positive and finite".into()));
    }
    let lv: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok((lv, ly, (lo, hi)))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn r_squared(y: &[f64], ss_res: f64) -> f64 {
    let m = mean(y);
    let ss_tot: f64 = y.iter().map(|t| (t - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
}

/// Straight-line least squares `y = slope x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DegenerateFit("need two or more paired points".into()));
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("zero variance in the abscissa".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    Ok(LinearFit {
        slope,
        intercept,
        r_squared: r_squared(y, ss_res),
    })
}

/// Fits `y = A v^delta` on log-log axes, or with `with_log` the marginal
/// form `y = A v^2 |ln v|` with only `A` free.
pub fn fit_power_law(points: &[(f64, f64)], with_log: bool) -> Result<ScalingFit> {
    let (lv, ly, window) = fit_inputs(points)?;
    if with_log {
        if points.iter().any(|p| p.0 >= 1.0) {
            return Err(Error::DegenerateFit("log-corrected fit needs v < 1".into()));
        }
        let shift: Vec<f64> = lv.iter().map(|l| 2.0 * l + l.abs().ln()).collect();
        let ln_a = mean(&ly.iter().zip(&shift).map(|(y, s)| y - s).collect::<Vec<_>>());
        let ss_res: f64 = ly.iter().zip(&shift).map(|(y, s)| (y - s - ln_a).powi(2)).sum();
        return Ok(ScalingFit {
            exponent: 2.0,
            prefactor: ln_a.exp(),
            r_squared: r_squared(&ly, ss_res),
            with_log: true,
            rms_residual: (ss_res / ly.len() as f64).sqrt(),
            v_window: window,
            points: points.len(),
        });
    }
    let line = linear_fit(&lv, &ly)?;
    let ss_res: f64 = lv
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - line.intercept - line.slope * x).powi(2))
        .sum();
    Ok(ScalingFit {
        exponent: line.slope,
        prefactor: line.intercept.exp(),
        r_squared: line.r_squared,
        with_log: false,
        rms_residual: (ss_res / ly.len() as f64).sqrt(),
        v_window: window,
        points: points.len(),
    })
}

/// `y = A v^power` with the power held fixed.
pub fn fit_fixed_power(points: &[(f64, f64)], power: f64) -> Result<ScalingFit> {
    let (lv, ly, window) = fit_inputs(points)?;
    let ln_a = mean(&ly.iter().zip(&lv).map(|(y, x)| y - power * x).collect::<Vec<_>>());
    let ss_res: f64 = ly.iter().zip(&lv).map(|(y, x)| (y - power * x - ln_a).powi(2)).sum();
    Ok(ScalingFit {
        exponent: power,
        prefactor: ln_a.exp(),
        r_squared: r_squared(&ly, ss_res),
        with_log: false,
        rms_residual: (ss_res / ly.len() as f64).sqrt(),
        v_window: window,
        points: points.len(),
    })
}

/// Scaling functions of a model near its critical point:
/// `omega_k(lambda) = |lambda|^{z nu} F(k / |lambda|^nu)` and
/// `<1|d_lambda|0> = |lambda|^{-1} G(k / |lambda|^nu)`.
pub trait ScalingForm: Send + Sync {
    fn exponents(&self) -> CriticalExponents;
    fn f(&self, x: f64) -> f64;
    fn g(&self, x: f64) -> f64;
}

/// The transverse-field chain linearised at `lambda = 0`:
/// `omega = 2J sqrt(lambda^2 + k^2)`, `<1|d|0> = -k / (2 (lambda^2 + k^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsingScalingForm {
    pub j: f64,
}

impl ScalingForm for IsingScalingForm {
    fn exponents(&self) -> CriticalExponents {
        CriticalExponents::ising()
    }

    fn f(&self, x: f64) -> f64 {
        2.0 * self.j * x.hypot(1.0)
    }

    fn g(&self, x: f64) -> f64 {
        -x / (2.0 * (1.0 + x * x))
    }
}

/// Rescaled endpoints `theta = lambda / v^{1/(z nu + 1)}`.
pub fn rescaled_endpoints(lambda0: f64, lambda1: f64, v: f64, ex: CriticalExponents) -> (f64, f64) {
    let s = v.powf(1.0 / (ex.z * ex.nu + 1.0));
    (lambda0 / s, lambda1 / s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AptDensity {
    /// `v^{d nu / (z nu + 1)}` times the integral.
    pub density: f64,
    /// `int d^d phi / (2 pi)^d K(phi)` up to `phi_max`.
    pub integral: f64,
    /// The same integral over `[phi_max, 2 phi_max]`.
    pub tail: f64,
}

const K_TOL: f64 = 1e-9;
const TAIL_LIMIT: f64 = 0.05;

/// `K(phi) = |int dtheta |theta|^{-1} G(phi/|theta|^nu) e^{i Phi(theta)}|^2`
/// with `Phi` accumulating the pair gap `2 |theta|^{z nu} F(phi/|theta|^nu)`.
pub fn apt_kernel(form: &dyn ScalingForm, theta0: f64, theta1: f64, phi: f64) -> Result<f64> {
    let CriticalExponents { z, nu, .. } = form.exponents();
    if phi == 0.0 {
        return Ok(0.0);
    }
    // theta = 0 is a break, so quadrature nodes never land on it; the phase
    // panels may start there, where the limit |theta|^{z nu} F ~ phi^z holds.
    let amplitude = |th: f64| {
        let a = th.abs();
        if a == 0.0 {
            return 0.0;
        }
        form.g(phi / a.powf(nu)) / a
    };
    let frequency = |th: f64| {
        let a = th.abs();
        if a == 0.0 {
            return 2.0 * form.f(1.0) * phi.powf(z);
        }
        2.0 * a.powf(z * nu) * form.f(phi / a.powf(nu))
    };
    let scale = phi.powf(1.0 / nu);
    let mut breaks = vec![0.0];
    for m in [1.0, 4.0, 16.0] {
        breaks.push(-m * scale);
        breaks.push(m * scale);
    }
    let value: Complex64 = quad::oscillatory(amplitude, frequency, theta0, theta1, &breaks, K_TOL, 30)?;
    Ok(value.norm_sqr())
}

fn sphere_area(d: u32) -> f64 {
    // 2 pi^{d/2} / Gamma(d/2)
    let half = d as f64 / 2.0;
    let gamma = crate::specfun::ln_gamma(Complex64::new(half, 0.0)).map(|z| z.re.exp()).unwrap_or(f64::NAN);
    2.0 * PI.powf(half) / gamma
}

/// Density of excitations from first-order adiabatic perturbation theory in
/// scaling form, `v^{d nu / (z nu + 1)} int d^d phi / (2 pi)^d K(phi)`.
///
/// Only the convergent regime `d nu / (z nu + 1) < 2` is computed; there and
/// whenever the radial tail beyond `phi_max` exceeds 5% of the integral the
/// result is [`Error::OutOfRegime`].
pub fn apt_density(form: &dyn ScalingForm, theta0: f64, theta1: f64, phi_max: f64, v: f64) -> Result<AptDensity> {
    let ex = form.exponents();
    let x = ex.kz_exponent();
    if x >= 2.0 {
        return Err(Error::OutOfRegime(format!(
            "d nu / (z nu + 1) = {x} >= 2: the ultraviolet modes dominate"
        )));
    }
    if !(theta0 < 0.0 && theta1 > 0.0) {
        return Err(Error::InvalidProtocol("need theta0 < 0 < theta1".into()));
    }
    if !(phi_max > 0.0 && v > 0.0) {
        return Err(Error::InvalidProtocol("phi_max and v must be positive".into()));
    }
    let d = ex.d;
    let measure = sphere_area(d) / (2.0 * PI).powi(d as i32);
    let radial = |phi: f64| -> Result<f64> {
        Ok(measure * phi.powi(d as i32 - 1) * apt_kernel(form, theta0, theta1, phi)?)
    };
    let tol = Tolerance::absolute(1e-8).with_rel(1e-6).with_depth(20);
    let breaks: Vec<f64> = [0.125, 0.25, 0.5, 1.0, 2.0].iter().map(|b| b * phi_max).collect();
    let integral = quad::integrate_with_breaks(radial, 0.0, phi_max, &breaks, tol)?.value;
    let tail = quad::integrate_with_breaks(radial, phi_max, 2.0 * phi_max, &[1.5 * phi_max], tol)?.value;
    if tail.abs() > TAIL_LIMIT * integral.abs() {
        return Err(Error::OutOfRegime(format!(
            "radial tail {tail:e} exceeds 5% of the integral {integral:e}"
        )));
    }
    Ok(AptDensity {
        density: v.powf(x) * integral,
        integral,
        tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{LzFull, LzHalf};

    fn ising() -> CriticalExponents {
        CriticalExponents::ising()
    }

    #[test]
    fn paper_exponent_table() {
        for n in 1..=4 {
            let p = predict_delta(ising(), n, false).unwrap();
            assert_eq!(p, ExponentPrediction { delta: 0.5, log_correction: false });
        }
        assert_eq!(predict_delta(ising(), 1, true).unwrap().delta, 1.0);
        assert_eq!(predict_delta(ising(), 2, true).unwrap().delta, 1.5);
        assert_eq!(
            predict_delta(ising(), 3, true).unwrap(),
            ExponentPrediction { delta: 2.0, log_correction: true }
        );
        assert_eq!(
            predict_delta(ising(), 4, true).unwrap(),
            ExponentPrediction { delta: 2.0, log_correction: false }
        );
        assert_eq!(predict_delta(ising(), 3, true).unwrap().to_string(), "2 (log correction)");
        assert!(predict_delta(ising(), 0, true).is_err());
        assert!(CriticalExponents::new(1, 0.0, 1.0).is_err());
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| 10f64.powf(-2.0 + i as f64 / 7.0)).map(|v| (v, 3.0 * v.sqrt())).collect();
        let fit = fit_power_law(&pts, false).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-12);
        assert!((fit.prefactor - 3.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_corrected_fit_beats_forced_square() {
        let pts: Vec<(f64, f64)> = (0..8)
            .map(|i| 10f64.powf(-2.0 + i as f64 / 7.0))
            .map(|v| (v, 0.7 * v * v * v.ln().abs()))
            .collect();
        let log_fit = fit_power_law(&pts, true).unwrap();
        let square = fit_fixed_power(&pts, 2.0).unwrap();
        assert!((log_fit.prefactor - 0.7).abs() < 1e-12);
        assert!(log_fit.rms_residual < 1e-12);
        assert!(square.rms_residual > 0.1);
    }

    #[test]
    fn degenerate_fits() {
        let few = vec![(0.1, 1.0); 5];
        assert!(matches!(fit_power_law(&few, false), Err(Error::DegenerateFit(_))));
        let flat = vec![(0.1, 1.0); 6];
        assert!(matches!(fit_power_law(&flat, false), Err(Error::DegenerateFit(_))));
        let neg = vec![(0.1, -1.0), (0.2, 1.0), (0.3, 1.0), (0.4, 1.0), (0.5, 1.0), (0.6, 1.0)];
        assert!(fit_power_law(&neg, false).is_err());
    }

    #[test]
    fn sweep_keeps_order_and_reports_excess() {
        let p = QuenchProtocol::new(-4.0, 1.0, 0.05, 1.0).unwrap();
        let vs = [0.05, 0.01, 0.03];
        let rows = sweep_cumulants(&p, &vs, 3, Arc::new(LzFull), ChainSize::Continuum).unwrap();
        assert_eq!(rows.iter().map(|r| r.v).collect::<Vec<_>>(), vs);
        let k1 = 2f64.sqrt() / (2.0 * PI) * 0.01f64.sqrt();
        assert!((rows[1].column(1) / k1 - 1.0).abs() < 0.02);
        let single = sweep_cumulants(&p, &[0.02], 2, Arc::new(LzFull), ChainSize::Finite(64)).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn sweep_errors_carry_the_rate() {
        let p = QuenchProtocol::new(-4.0, 1.0, 0.05, 1.0).unwrap();
        let err = sweep_cumulants(&p, &[0.02], 2, Arc::new(LzHalf), ChainSize::Continuum).unwrap_err();
        assert!(matches!(err, Error::SweepPoint { v, .. } if v == 0.02));
    }

    struct Uncoupled;
    impl ScalingForm for Uncoupled {
        fn exponents(&self) -> CriticalExponents {
            CriticalExponents::ising()
        }
        fn f(&self, x: f64) -> f64 {
            x.hypot(1.0)
        }
        fn g(&self, _x: f64) -> f64 {
            0.0
        }
    }

    #[test]
    fn no_coupling_no_excitations() {
        let d = apt_density(&Uncoupled, -10.0, 5.0, 3.0, 0.02).unwrap();
        assert_eq!(d.density, 0.0);
    }

    struct Marginal;
    impl ScalingForm for Marginal {
        fn exponents(&self) -> CriticalExponents {
            CriticalExponents { d: 4, z: 1.0, nu: 1.0 }
        }
        fn f(&self, x: f64) -> f64 {
            x.hypot(1.0)
        }
        fn g(&self, x: f64) -> f64 {
            x
        }
    }

    #[test]
    fn ultraviolet_regime_is_refused() {
        assert!(matches!(apt_density(&Marginal, -1.0, 1.0, 1.0, 0.1), Err(Error::OutOfRegime(_))));
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-12);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-12);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn ising_kernel_matches_mode_integral() {
        // K(phi) at v is the APT probability of the linearised mode k = phi sqrt(v).
        let form = IsingScalingForm { j: 1.0 };
        let v = 0.02;
        let (t0, t1) = rescaled_endpoints(-4.0, 1.0, v, ising());
        let phi = 1.2;
        let k = phi * v.sqrt();
        let amp = |l: f64| -k / (2.0 * (l * l + k * k));
        let freq = |l: f64| 2.0 * 2.0 * (l * l + k * k).sqrt() / v;
        let direct = quad::oscillatory(amp, freq, -4.0, 1.0, &[0.0, -k, k, -4.0 * k, 4.0 * k], 1e-11, 30)
            .unwrap()
            .norm_sqr();
        let scaled = apt_kernel(&form, t0, t1, phi).unwrap();
        assert!((scaled / direct - 1.0).abs() < 1e-6, "{scaled} vs {direct}");
    }
}
