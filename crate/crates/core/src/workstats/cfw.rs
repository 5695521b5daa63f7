//! Sampling `ln chi(u)` at zero and finite temperature.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{finite_beta, require_zero_t, sech, CfwSamples, TemperatureMode, QUAD_TOL};
use crate::dynamics::{ModeProbability, Spectrum};
use crate::error::{Error, Result};
use crate::ising::QuenchProtocol;
use crate::quad;

/// Diagnostics attached to each CFW sample. Zero means clean.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BranchFlags(pub u8);

impl BranchFlags {
    /// Some mode has `|p (e^{2iu w1} - 1)| >= 1`: the log series in `p`
    /// no longer converges and the branch is fixed by continuity.
    pub const SERIES_DOMAIN: u8 = 1;
    /// A zero of a mode factor lies within half a grid step of this `u`.
    pub const NEAR_ZERO: u8 = 2;
    /// The finite-T path tracker had to refine its steps.
    pub const REFINED: u8 = 4;

    pub fn is_clean(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, bit: u8) -> bool {
        self.0 & bit != 0
    }

    pub fn describe(self) -> String {
        if self.is_clean() {
            return "clean".into();
        }
        let mut parts = Vec::new();
        if self.contains(Self::SERIES_DOMAIN) {
            parts.push("series_domain");
        }
        if self.contains(Self::NEAR_ZERO) {
            parts.push("near_zero");
        }
        if self.contains(Self::REFINED) {
            parts.push("refined");
        }
        parts.join("|")
    }
}

/// Per-mode factor `g_k(u)` with the principal square root.
///
/// `g = {1 + cos(u w1) cos[(u - i beta) w0] + Q sin(u w1) sin[(u - i beta) w0]}^{1/2}`.
pub fn gk(u: f64, beta: f64, omega0: f64, omega1: f64, qk: f64) -> Result<Complex64> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidProtocol(format!("beta = {beta} must be positive and finite")));
    }
    if qk.abs() > 1.0 {
        return Err(Error::InvalidProbability((1.0 - qk) / 2.0));
    }
    let z = Complex64::new(u * omega0, -beta * omega0);
    let b = u * omega1;
    let r = 1.0 + b.cos() * z.cos() + qk * b.sin() * z.sin();
    Ok(r.sqrt())
}

/// `g_k^2 / cosh(beta w0)`, finite for any `beta w0`.
fn scaled_radicand(a: f64, b: f64, t: f64, s: f64, q: f64) -> Complex64 {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    Complex64::new(s + cb * ca + q * sb * sa, t * (cb * sa - q * sb * ca))
}

/// `ln[R(u) / R(0)]` for one mode at every `u` in the ascending list
/// `us >= 0`, continuing the argument from `u = 0`.
fn track_mode(omega0: f64, omega1: f64, beta: f64, q: f64, us: &[f64]) -> Result<(Vec<Complex64>, bool)> {
    let t = (beta * omega0).tanh();
    let s = sech(beta * omega0);
    let r = |u: f64| scaled_radicand(u * omega0, u * omega1, t, s, q);
    let r0 = r(0.0);
    let speed = omega0 + omega1;
    let mut out = Vec::with_capacity(us.len());
    let mut refined = false;
    let mut arg = 0.0;
    let mut u_prev = 0.0;
    let mut r_prev = r0;
    for &u in us {
        let steps = (((u - u_prev) * speed) / FRAC_PI_8).ceil().max(1.0) as usize;
        let du = (u - u_prev) / steps as f64;
        for i in 0..steps {
            let x0 = u_prev + i as f64 * du;
            let x1 = if i + 1 == steps { u } else { x0 + du };
            arg += advance(&r, x0, x1, r_prev, 0, &mut refined)?;
            r_prev = r(x1);
        }
        u_prev = u;
        if r_prev == Complex64::new(0.0, 0.0) {
            return Err(Error::BranchAmbiguity { u0: u, u1: u });
        }
        out.push(Complex64::new((r_prev.norm() / r0.norm()).ln(), arg));
    }
    Ok((out, refined))
}

/// Phase advance of `r` over `[x0, x1]`, halving the step whenever a single
/// step turns by more than pi/2.
fn advance<F: Fn(f64) -> Complex64>(r: &F, x0: f64, x1: f64, r0: Complex64, depth: u32, refined: &mut bool) -> Result<f64> {
    let r1 = r(x1);
    let d = (r1 / r0).arg();
    if d.abs() <= FRAC_PI_2 && r1.norm() > 0.0 {
        return Ok(d);
    }
    if depth >= 30 {
        // Below this width the path is a straight segment; only a segment
        // through the origin itself is ambiguous.
        if r1.norm() > 0.0 && r0.norm() > 0.0 && d.abs() < PI {
            return Ok(d);
        }
        return Err(Error::BranchAmbiguity { u0: x0, u1: x1 });
    }
    *refined = true;
    let xm = 0.5 * (x0 + x1);
    let rm = r(xm);
    Ok(advance(r, x0, xm, r0, depth + 1, refined)? + advance(r, xm, x1, rm, depth + 1, refined)?)
}

/// Validates a sample grid and returns the sorted distinct `|u|` values.
fn abs_grid(u_grid: &[f64]) -> Result<Vec<f64>> {
    if u_grid.is_empty() {
        return Err(Error::InvalidUGrid("empty u grid".into()));
    }
    if u_grid.iter().any(|u| !u.is_finite()) {
        return Err(Error::InvalidUGrid("non-finite u".into()));
    }
    if u_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidUGrid("u grid must be strictly increasing".into()));
    }
    let mut abs: Vec<f64> = u_grid.iter().map(|u| u.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    abs.dedup();
    Ok(abs)
}

/// Maps values computed on `|u|` back onto the signed grid using
/// `ln chi(-u) = conj(ln chi(u))`.
fn unfold(u_grid: &[f64], abs: &[f64], values: &[Complex64]) -> Vec<Complex64> {
    u_grid
        .iter()
        .map(|&u| {
            let i = abs.binary_search_by(|a| a.partial_cmp(&u.abs()).unwrap()).unwrap();
            if u < 0.0 {
                values[i].conj()
            } else {
                values[i]
            }
        })
        .collect()
}

/// Mode average of a vector integrand over all `|u|` values at once.
fn average_many<F>(spectrum: &Spectrum, m: usize, breaks: &[f64], f: F) -> Result<Vec<Complex64>>
where
    F: Fn(f64, ModeProbability) -> Result<Vec<Complex64>> + Sync,
{
    match spectrum {
        Spectrum::Finite(s) => {
            use rayon::prelude::*;
            let n = s.grid.n_spins() as f64;
            let rows: Vec<Vec<Complex64>> = s
                .grid
                .momenta()
                .par_iter()
                .zip(s.probabilities.par_iter().zip(s.ln_probabilities.par_iter()))
                .map(|(&k, (&p, &ln_p))| f(k, ModeProbability { p, ln_p }).map_err(|e| e.at_mode(k)))
                .collect::<Result<_>>()?;
            let mut total = vec![Complex64::new(0.0, 0.0); m];
            for row in rows {
                for (t, x) in total.iter_mut().zip(row) {
                    *t += x;
                }
            }
            Ok(total.into_iter().map(|t| t / n).collect())
        }
        Spectrum::Continuum(_) => {
            let mut all = spectrum.breakpoints();
            all.extend_from_slice(breaks);
            let vals = quad::integrate_many(|k: f64| f(k, spectrum.at(k)?), m, 0.0, PI, &all, QUAD_TOL)?;
            Ok(vals.into_iter().map(|v| v / (2.0 * PI)).collect())
        }
    }
}

/// Finite-temperature `ln chi(u) / N = avg ln[g_k(u)^2 / g_k(0)^2]`, with
/// the argument of each mode's radicand followed continuously from `u = 0`.
pub fn cfw_finite_t(protocol: &QuenchProtocol, spectrum: &Spectrum, u_grid: &[f64]) -> Result<CfwSamples> {
    let beta = finite_beta(protocol)?;
    let abs = abs_grid(u_grid)?;
    let refined_any = std::sync::atomic::AtomicBool::new(false);
    let vals = average_many(spectrum, abs.len(), &[], |k, mp| {
        let q = 1.0 - 2.0 * mp.p;
        let (row, refined) = track_mode(protocol.omega0(k), protocol.omega1(k), beta, q, &abs)?;
        if refined {
            refined_any.store(true, std::sync::atomic::Ordering::Relaxed);
        }
        Ok(row)
    })?;
    let flag = if refined_any.into_inner() {
        BranchFlags(BranchFlags::REFINED)
    } else {
        BranchFlags::default()
    };
    let mut log_chi = unfold(u_grid, &abs, &vals);
    pin_origin(u_grid, &mut log_chi);
    Ok(CfwSamples {
        u_grid: u_grid.to_vec(),
        log_chi_per_site: log_chi,
        size: spectrum.size(),
        temperature: TemperatureMode::FiniteT { beta },
        flags: vec![flag; u_grid.len()],
    })
}

fn pin_origin(u_grid: &[f64], values: &mut [Complex64]) {
    for (u, v) in u_grid.iter().zip(values.iter_mut()) {
        if *u == 0.0 {
            *v = Complex64::new(0.0, 0.0);
        }
    }
}

/// `ln[1 + p (e^{2i phi} - 1)]` continued from `phi = 0`.
///
/// For `p <= 1/2` the factor never winds around zero and the principal log
/// is continuous. For `p > 1/2` it winds once per period of `phi`; writing
/// the factor as `e^{i phi}[cos phi + i (2p - 1) sin phi]` gives the
/// continuous argument in closed form.
pub fn ln_mode_factor(p: f64, phi: f64) -> Complex64 {
    let (s, c) = phi.sin_cos();
    let x = 4.0 * p * (1.0 - p);
    // |factor|^2 = 1 - x s^2 = (1 - 2p)^2 + x c^2; the sum keeps its
    // accuracy near the zero at p = 1/2, c = 0.
    let ln_mod = if x * s * s < 0.5 {
        0.5 * (-x * s * s).ln_1p()
    } else {
        0.5 * ((1.0 - 2.0 * p).powi(2) + x * c * c).ln()
    };
    let arg = if p <= 0.5 {
        (2.0 * p * s * c).atan2(1.0 - 2.0 * p * s * s)
    } else {
        let m = (phi / PI).round();
        let r = phi - m * PI;
        phi + m * PI + ((2.0 * p - 1.0) * r.tan()).atan()
    };
    Complex64::new(ln_mod, arg)
}

/// Zero-temperature `ln chi(u) / N = avg[iu(w0 - w1) + ln(1 + p(e^{2iu w1} - 1))]`.
pub fn cfw_zero_t(protocol: &QuenchProtocol, spectrum: &Spectrum, u_grid: &[f64]) -> Result<CfwSamples> {
    require_zero_t(protocol)?;
    let abs = abs_grid(u_grid)?;
    // The continued log jumps in k where p crosses 1/2.
    let crossings = match spectrum {
        Spectrum::Continuum(_) if spectrum.max_probability()? > 0.5 => spectrum.crossings(0.5)?,
        _ => Vec::new(),
    };
    let vals = average_many(spectrum, abs.len(), &crossings, |k, mp| {
        let (w0, w1) = (protocol.omega0(k), protocol.omega1(k));
        Ok(abs
            .iter()
            .map(|&u| Complex64::new(0.0, u * (w0 - w1)) + ln_mode_factor(mp.p, u * w1))
            .collect())
    })?;
    let mut log_chi = unfold(u_grid, &abs, &vals);
    pin_origin(u_grid, &mut log_chi);
    let flags = zero_t_flags(protocol, spectrum, u_grid, &crossings)?;
    Ok(CfwSamples {
        u_grid: u_grid.to_vec(),
        log_chi_per_site: log_chi,
        size: spectrum.size(),
        temperature: TemperatureMode::ZeroT,
        flags,
    })
}

fn zero_t_flags(protocol: &QuenchProtocol, spectrum: &Spectrum, u_grid: &[f64], crossings: &[f64]) -> Result<Vec<BranchFlags>> {
    // Modes probed for the series-domain test: the grid itself, or a scan.
    let modes: Vec<(f64, f64)> = match spectrum {
        Spectrum::Finite(s) => s.grid.momenta().iter().copied().zip(s.probabilities.iter().copied()).collect(),
        Spectrum::Continuum(_) => (1..=256)
            .map(|i| {
                let k = PI * (i as f64 - 0.5) / 256.0;
                spectrum.at(k).map(|mp| (k, mp.p))
            })
            .chain(crossings.iter().map(|&k| Ok((k, 0.5))))
            .collect::<Result<_>>()?,
    };
    let half_step = |i: usize| -> f64 {
        let left = if i > 0 { u_grid[i] - u_grid[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < u_grid.len() { u_grid[i + 1] - u_grid[i] } else { f64::INFINITY };
        let h = left.min(right);
        if h.is_finite() {
            0.5 * h
        } else {
            0.0
        }
    };
    Ok(u_grid
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let mut bits = 0;
            let outside = modes
                .iter()
                .any(|&(k, p)| 2.0 * p * (u * protocol.omega1(k)).sin().abs() >= 1.0);
            if outside {
                bits |= BranchFlags::SERIES_DOMAIN;
            }
            // Zeros sit at u w1(k*) = (m + 1/2) pi.
            let near = crossings.iter().any(|&k| {
                let w = protocol.omega1(k);
                let m = (u * w / PI - 0.5).round();
                let u_star = (m + 0.5) * PI / w;
                (u - u_star).abs() <= half_step(i)
            });
            if near {
                bits |= BranchFlags::NEAR_ZERO;
            }
            BranchFlags(bits)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::LzFull;
    use crate::ising::adiabatic_work_per_site;
    use crate::ising::ChainSize;
    use std::sync::Arc;

    #[test]
    fn gk_at_origin() {
        let g = gk(0.0, 0.8, 1.7, 0.9, 0.3).unwrap();
        let want = (1.0 + (0.8f64 * 1.7).cosh()).sqrt();
        assert!((g.re - want).abs() < 1e-14 && g.im.abs() < 1e-14);
        assert!(gk(0.0, 0.0, 1.0, 1.0, 0.0).is_err());
        assert!(gk(0.0, 1.0, 1.0, 1.0, 1.5).is_err());
    }

    #[test]
    fn gk_untouched_mode_is_stationary() {
        // Q = 1 and equal energies: the radicand collapses to 1 + cosh(beta w)
        let (beta, w) = (0.3, 0.2);
        let g0 = gk(0.0, beta, w, w, 1.0).unwrap();
        for u in [-1.0, 0.4, 2.5] {
            let g = gk(u, beta, w, w, 1.0).unwrap();
            assert!((g - g0).norm() < 1e-13);
        }
    }

    #[test]
    fn scaled_radicand_matches_gk() {
        let (beta, w0, w1, q) = (0.9, 1.3, 0.7, -0.4);
        for u in [0.0, 0.3, -1.1] {
            let g = gk(u, beta, w0, w1, q).unwrap();
            let r = scaled_radicand(u * w0, u * w1, (beta * w0).tanh(), sech(beta * w0), q) * (beta * w0).cosh();
            assert!((g * g - r).norm() < 1e-12);
        }
    }

    #[test]
    fn mode_factor_continuity() {
        for &p in &[0.1, 0.5 - 1e-9, 0.5 + 1e-9, 0.8, 1.0] {
            let mut prev = ln_mode_factor(p, 0.0);
            assert!(prev.norm() < 1e-15);
            for i in 1..=20_000 {
                let phi = 12.0 * i as f64 / 20_000.0;
                let cur = ln_mode_factor(p, phi);
                let z = Complex64::new(1.0 - p, 0.0) + p * Complex64::from_polar(1.0, 2.0 * phi);
                if z.norm() > 1e-3 {
                    assert!((cur.exp() - z).norm() < 1e-12 * z.norm().max(1.0), "p={p} phi={phi}");
                    assert!((cur.im - prev.im).abs() < 0.1, "jump at p={p} phi={phi}");
                }
                prev = cur;
            }
        }
        // p = 1: pure phase 2 phi
        assert!((ln_mode_factor(1.0, 7.0).im - 14.0).abs() < 1e-12);
    }

    #[test]
    fn zero_t_adiabatic_cfw() {
        let p = QuenchProtocol::new(0.3, 0.3, 0.05, 1.0).unwrap();
        let s = Spectrum::finite(&p, 50, &LzFull).unwrap();
        let grid = [-1.0, 0.0, 0.5, 2.0];
        let c = cfw_zero_t(&p, &s, &grid).unwrap();
        assert!(c.log_chi_per_site.iter().all(|z| z.norm() < 1e-15));
        let p = QuenchProtocol::new(-4.0, 1.0, 0.05, 1.0).unwrap();
        let mu = adiabatic_work_per_site(&p, ChainSize::Finite(50)).unwrap();
        // all p = 0 through a spectrum built by hand
        let mut s = match Spectrum::finite(&p, 50, &LzFull).unwrap() {
            Spectrum::Finite(s) => s,
            _ => unreachable!(),
        };
        s.probabilities.iter_mut().for_each(|x| *x = 0.0);
        let c = cfw_zero_t(&p, &Spectrum::Finite(s), &grid).unwrap();
        for (u, z) in grid.iter().zip(&c.log_chi_per_site) {
            assert!((z - Complex64::new(0.0, u * mu)).norm() < 1e-13);
        }
    }

    #[test]
    fn zero_t_hermitian_and_normalised() {
        let p = QuenchProtocol::new(-4.0, 1.0, 0.05, 1.0).unwrap();
        let s = Spectrum::continuum(&p, Arc::new(LzFull)).unwrap();
        let grid: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.25).collect();
        let c = cfw_zero_t(&p, &s, &grid).unwrap();
        assert_eq!(c.log_chi_per_site[8], Complex64::new(0.0, 0.0));
        for i in 0..8 {
            assert_eq!(c.log_chi_per_site[i], c.log_chi_per_site[16 - i].conj());
        }
    }

    #[test]
    fn finite_t_hermitian_and_normalised() {
        let p = QuenchProtocol::new(-4.0, 1.0, 0.05, 1.0).unwrap().with_beta(Some(2.0)).unwrap();
        let s = Spectrum::continuum(&p, Arc::new(LzFull)).unwrap();
        let grid: Vec<f64> = (-8..=8).map(|i| i as f64 * 0.25).collect();
        let c = cfw_finite_t(&p, &s, &grid).unwrap();
        assert_eq!(c.log_chi_per_site[8], Complex64::new(0.0, 0.0));
        for i in 0..8 {
            assert_eq!(c.log_chi_per_site[i], c.log_chi_per_site[16 - i].conj());
        }
    }

    #[test]
    fn finite_t_matches_zero_t_when_cold() {
        let p = QuenchProtocol::new(-4.0, 1.0, 0.05, 1.0).unwrap();
        let s = Spectrum::finite(&p, 200, &LzFull).unwrap();
        let grid = [-0.7, 0.0, 0.3, 1.9];
        let cold = cfw_finite_t(&p.with_beta(Some(50.0)).unwrap(), &s, &grid).unwrap();
        let zero = cfw_zero_t(&p, &s, &grid).unwrap();
        for (a, b) in cold.log_chi_per_site.iter().zip(&zero.log_chi_per_site) {
            assert!((a - b).norm() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn grid_validation() {
        let p = QuenchProtocol::new(-4.0, 1.0, 0.05, 1.0).unwrap();
        let s = Spectrum::finite(&p, 10, &LzFull).unwrap();
        assert!(matches!(cfw_zero_t(&p, &s, &[]), Err(Error::InvalidUGrid(_))));
        assert!(matches!(cfw_zero_t(&p, &s, &[0.0, 0.0]), Err(Error::InvalidUGrid(_))));
        assert!(matches!(cfw_zero_t(&p, &s, &[1.0, f64::NAN]), Err(Error::InvalidUGrid(_))));
    }

    #[test]
    fn flags_mark_zero_of_mode_factor() {
        let p = QuenchProtocol::new(-4.0, 1.0, 0.05, 1.0).unwrap();
        let s = Spectrum::continuum(&p, Arc::new(LzFull)).unwrap();
        let u_star = PI / 4.0;
        let grid = [0.0, 0.1, u_star - 0.0005, u_star + 0.0015, 1.2];
        let c = cfw_zero_t(&p, &s, &grid).unwrap();
        assert!(c.flags[0].is_clean() && c.flags[1].is_clean());
        assert!(c.flags[2].contains(BranchFlags::NEAR_ZERO));
        assert!(!c.flags[3].contains(BranchFlags::NEAR_ZERO));
        assert!(c.flags[3].contains(BranchFlags::SERIES_DOMAIN));
        assert!(!c.flags[4].contains(BranchFlags::NEAR_ZERO));
    }
}
