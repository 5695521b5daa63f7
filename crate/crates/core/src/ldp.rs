//! Large deviations of the work per site and zeros of the zero-temperature
//! characteristic function.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{ExcitationModel, ModeProbability, Spectrum};
use crate::error::{Error, Result};
use crate::ising::{adiabatic_work_per_site, ChainSize, QuenchProtocol};
use crate::quad::Tolerance;
use crate::scaling::linear_fit;
use crate::workstats::closed_form::log_add_exp;

const TOL: Tolerance = Tolerance::absolute(1e-12).with_rel(1e-13);
/// `|s| J` beyond which the conjugate point is reported as saturated.
pub const S_LIMIT: f64 = 1e3;
/// The edge integrands carry a log singularity where `p` reaches 0 or 1.
const EDGE_TOL: Tolerance = Tolerance::absolute(1e-11).with_rel(1e-11).with_depth(60);

/// Scaled cumulant generating function of the work per site,
/// `Lambda(s) = s mu + avg ln(1 - p + p e^{2 s w1})`.
pub struct Scgf<'a> {
    protocol: QuenchProtocol,
    spectrum: &'a Spectrum,
    mu: f64,
    /// `(k, ln p - ln q, 2 w1)` on the continuum scan, for locating the
    /// momentum where a mode's tilted occupation passes 1/2.
    scan: Vec<(f64, f64, f64)>,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl<'a> Scgf<'a> {
    pub fn new(protocol: &QuenchProtocol, spectrum: &'a Spectrum) -> Result<Self> {
        if !protocol.is_zero_temperature() {
            return Err(Error::Unsupported("ldp: the generating function needs a ground-state start".into()));
        }
        let mu = adiabatic_work_per_site(protocol, spectrum.size())?;
        let scan = match spectrum {
            Spectrum::Continuum(_) => spectrum
                .scan_momenta()
                .into_iter()
                .map(|k| {
                    let mp = spectrum.at(k)?;
                    Ok((k, mp.ln_p - mp.ln_q(), 2.0 * protocol.omega1(k)))
                })
                .collect::<Result<_>>()?,
            Spectrum::Finite(_) => Vec::new(),
        };
        Ok(Scgf {
            protocol: *protocol,
            spectrum,
            mu,
            scan,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Momenta where `ln p - ln q + 2 s w1` changes sign.
    fn breaks(&self, s: f64) -> Result<Vec<f64>> {
        let h = |k: f64| -> Result<f64> {
            let mp = self.spectrum.at(k)?;
            Ok(mp.ln_p - mp.ln_q() + 2.0 * s * self.protocol.omega1(k))
        };
        let mut out = Vec::new();
        for w in self.scan.windows(2) {
            let (ha, hb) = (w[0].1 + s * w[0].2, w[1].1 + s * w[1].2);
            if ha.is_finite() && hb.is_finite() && ha * hb < 0.0 {
                let (mut a, mut b, mut fa) = (w[0].0, w[1].0, ha);
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    let fm = h(m)?;
                    if (fm < 0.0) == (fa < 0.0) {
                        a = m;
                        fa = fm;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
        }
        Ok(out)
    }

    fn tilted(&self, s: f64, k: f64, mp: ModeProbability) -> (f64, f64) {
        let e = 2.0 * self.protocol.omega1(k);
        (e, mp.ln_p + s * e)
    }

    pub fn value(&self, s: f64) -> Result<f64> {
        if s == 0.0 {
            return Ok(0.0);
        }
        let breaks = self.breaks(s)?;
        let avg: f64 = self.spectrum.average(
            |k, mp| {
                let (_, x) = self.tilted(s, k, mp);
                Ok(log_add_exp(mp.ln_q(), x))
            },
            &breaks,
            TOL,
        )?;
        Ok(s * self.mu + avg)
    }

    /// `Lambda'(s)`, the tilted mean work per site.
    pub fn derivative(&self, s: f64) -> Result<f64> {
        let breaks = self.breaks(s)?;
        let avg: f64 = self.spectrum.average(
            |k, mp| {
                let (e, x) = self.tilted(s, k, mp);
                if mp.ln_p == f64::NEG_INFINITY {
                    return Ok(0.0);
                }
                Ok(e * sigmoid(x - mp.ln_q()))
            },
            &breaks,
            TOL,
        )?;
        Ok(self.mu + avg)
    }

    /// `Lambda''(s)`, the tilted variance per site.
    pub fn second_derivative(&self, s: f64) -> Result<f64> {
        let breaks = self.breaks(s)?;
        self.spectrum.average(
            |k, mp| {
                let (e, x) = self.tilted(s, k, mp);
                if mp.ln_p == f64::NEG_INFINITY {
                    return Ok(0.0);
                }
                let t = sigmoid(x - mp.ln_q());
                Ok(e * e * t * (1.0 - t))
            },
            &breaks,
            TOL,
        )
    }

    /// Closure of the range of `Lambda'`: `(mu + avg[2 w1; p = 1],
    /// mu + avg[2 w1; p > 0])`.
    pub fn range(&self) -> Result<(f64, f64)> {
        let lo: f64 = self
            .spectrum
            .average(|k, mp| Ok(if mp.p >= 1.0 { 2.0 * self.protocol.omega1(k) } else { 0.0 }), &[], TOL)?;
        let hi: f64 = self.spectrum.average(
            |k, mp| {
                Ok(if mp.ln_p > f64::NEG_INFINITY {
                    2.0 * self.protocol.omega1(k)
                } else {
                    0.0
                })
            },
            &[],
            TOL,
        )?;
        Ok((self.mu + lo, self.mu + hi))
    }

    /// Rate at the lower and upper ends of the range: the limits of
    /// `s w - Lambda(s)` as `s -> -inf` and `s -> +inf`.
    pub fn edge_rates(&self) -> Result<(f64, f64)> {
        let lower: f64 = self
            .spectrum
            .average(|_, mp| Ok(if mp.p >= 1.0 { 0.0 } else { -mp.ln_q() }), &[], EDGE_TOL)?;
        let upper: f64 = self.spectrum.average(
            |_, mp| {
                Ok(if mp.ln_p > f64::NEG_INFINITY {
                    -mp.ln_p
                } else {
                    0.0
                })
            },
            &[],
            EDGE_TOL,
        )?;
        Ok((lower, upper))
    }
}

/// `Lambda(s)` for one `s`.
pub fn scgf(protocol: &QuenchProtocol, spectrum: &Spectrum, s: f64) -> Result<f64> {
    Scgf::new(protocol, spectrum)?.value(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    /// Conjugate point found.
    Interior,
    /// `w` on an end of the range; the rate is the limit value.
    Boundary,
    /// The conjugate point lies beyond `|s| = 1000 / J`.
    Saturated,
    /// `w` outside the range; the probability vanishes.
    Forbidden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFunctionSamples {
    pub w_grid: Vec<f64>,
    /// `I(w)`; `+inf` for saturated or forbidden points.
    pub i_values: Vec<f64>,
    /// Conjugate slope `s*` with `Lambda'(s*) = w`, where found.
    pub s_star: Vec<Option<f64>>,
    pub status: Vec<RateStatus>,
    /// Mean work per site, where `I` vanishes.
    pub minimizer: f64,
    pub range: (f64, f64),
}

/// Legendre-Fenchel conjugate `I(w) = sup_s [s w - Lambda(s)]` of the exact
/// generating function on every point of `w_grid`.
pub fn rate_function(protocol: &QuenchProtocol, spectrum: &Spectrum, w_grid: &[f64]) -> Result<RateFunctionSamples> {
    if w_grid.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidProtocol("w grid must be finite".into()));
    }
    let g = Scgf::new(protocol, spectrum)?;
    let mean = g.derivative(0.0)?;
    let range = g.range()?;
    let edges = g.edge_rates()?;
    let s_max = S_LIMIT / protocol.j;
    let solved: Vec<(f64, Option<f64>, RateStatus)> = w_grid
        .par_iter()
        .map(|&w| conjugate(&g, w, mean, range, edges, s_max))
        .collect::<Result<_>>()?;
    Ok(RateFunctionSamples {
        w_grid: w_grid.to_vec(),
        i_values: solved.iter().map(|r| r.0).collect(),
        s_star: solved.iter().map(|r| r.1).collect(),
        status: solved.iter().map(|r| r.2).collect(),
        minimizer: mean,
        range,
    })
}

fn conjugate(
    g: &Scgf<'_>,
    w: f64,
    mean: f64,
    range: (f64, f64),
    edges: (f64, f64),
    s_max: f64,
) -> Result<(f64, Option<f64>, RateStatus)> {
    if w < range.0 || w > range.1 {
        return Ok((f64::INFINITY, None, RateStatus::Forbidden));
    }
    if w == range.0 && w < mean {
        return Ok((edges.0, None, RateStatus::Boundary));
    }
    if w == range.1 && w > mean {
        return Ok((edges.1, None, RateStatus::Boundary));
    }
    if w == mean {
        return Ok((0.0, Some(0.0), RateStatus::Interior));
    }
    let target = |s: f64| -> Result<f64> { Ok(g.derivative(s)? - w) };
    let dir = if w > mean { 1.0 } else { -1.0 };
    // Grow the bracket geometrically from s = 0.
    let (mut lo, mut hi) = (0.0, 0.0);
    let mut step = 0.1 / g.protocol.j;
    loop {
        let s = dir * step;
        let f = target(s)?;
        if (f >= 0.0) == (dir > 0.0) {
            if dir > 0.0 {
                hi = s;
            } else {
                lo = s;
            }
            break;
        }
        if dir > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        if step >= s_max {
            return Ok((f64::INFINITY, None, RateStatus::Saturated));
        }
        step = (2.0 * step).min(s_max);
    }
    // Safeguarded Newton on the increasing function Lambda' - w.
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let f = target(s)?;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let curv = g.second_derivative(s)?;
        let newton = s - f / curv;
        let next = if curv > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let done = (next - s).abs() <= 1e-15 * s.abs().max(1e-3 / g.protocol.j) || hi - lo <= 1e-15 * hi.abs().max(lo.abs());
        s = next;
        if done {
            break;
        }
    }
    let rate = s * w - g.value(s)?;
    Ok((rate.max(0.0), Some(s), RateStatus::Interior))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub v: f64,
    pub mean: f64,
    /// Largest work per site, every mode excited: `mu + avg 2 w1`.
    pub w_m: f64,
    pub rate_at_w_m: f64,
    /// `I` non-decreasing on samples of `[mean, w_m]`.
    pub monotone: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub rows: Vec<TailRow>,
    /// Slope of `ln I(w_m)` against `ln v`.
    pub fitted_power: f64,
}

/// Rate of the extreme event `w = w_m` across the rates in `v_list`.
pub fn unphysical_tail_check(
    template: &QuenchProtocol,
    model: Arc<dyn ExcitationModel>,
    v_list: &[f64],
) -> Result<TailReport> {
    if v_list.len() < 2 {
        return Err(Error::DegenerateFit("need at least two rates".into()));
    }
    let rows: Vec<TailRow> = v_list
        .iter()
        .map(|&v| {
            let run = || -> Result<TailRow> {
                let protocol = template.with_rate(v)?;
                model.check(&protocol)?;
                let spectrum = Spectrum::continuum(&protocol, model.clone())?;
                let g = Scgf::new(&protocol, &spectrum)?;
                let mean = g.derivative(0.0)?;
                let (_, w_m) = g.range()?;
                let (_, rate_at_w_m) = g.edge_rates()?;
                let probes: Vec<f64> = (1..8).map(|i| mean + (w_m - mean) * i as f64 / 40.0).collect();
                let samples = rate_function(&protocol, &spectrum, &probes)?;
                let mut seq = vec![0.0];
                seq.extend(samples.i_values.iter().copied());
                seq.push(rate_at_w_m);
                let monotone = seq.windows(2).all(|w| w[1] >= w[0]);
                Ok(TailRow {
                    v,
                    mean,
                    w_m,
                    rate_at_w_m,
                    monotone,
                })
            };
            run().map_err(|e| e.at_rate(v))
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = rows.iter().map(|r| r.v.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.rate_at_w_m.ln()).collect();
    let fit = linear_fit(&x, &y)?;
    Ok(TailReport {
        rows,
        fitted_power: fit.slope,
    })
}

/// A mode with `p = 1/2` and the rates `u` at which its factor in `chi`
/// vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DqptPoint {
    pub k_star: f64,
    pub p_at_k_star: f64,
    pub omega1: f64,
    /// `u*_m = (2m + 1) pi / (2 w1(k*))`, `m = 0, 1, ...`, up to `u_max`.
    pub u_star: Vec<f64>,
    /// `|1 + p (e^{2iu w1} - 1)|` at each `u*`.
    pub residuals: Vec<f64>,
}

const ZERO_TOL: f64 = 1e-8;

/// Momenta where `p_k = 1/2` and the `u <= u_max` at which their factor
/// `1 + p (e^{2iu w1} - 1)` of the zero-temperature CFW vanishes.
pub fn find_dqpt(protocol: &QuenchProtocol, spectrum: &Spectrum, u_max: f64) -> Result<Vec<DqptPoint>> {
    if !protocol.is_zero_temperature() {
        return Err(Error::Unsupported("ldp: zeros are located at zero temperature only".into()));
    }
    if !matches!(spectrum, Spectrum::Continuum(_)) {
        return Err(Error::Unsupported(
            "ldp: zeros of chi exist only in the continuum; finite chains smooth them".into(),
        ));
    }
    if !(u_max > 0.0) {
        return Err(Error::InvalidUGrid("u_max must be positive".into()));
    }
    let max_p = spectrum.max_probability()?;
    let ks = spectrum.crossings(0.5)?;
    if ks.is_empty() {
        return Err(Error::NoCrossing { max_p });
    }
    ks.into_iter()
        .map(|k| {
            let p = spectrum.at(k)?.p;
            let w1 = protocol.omega1(k);
            let mut u_star = Vec::new();
            let mut residuals = Vec::new();
            for m in 0.. {
                let u = (2 * m + 1) as f64 * std::f64::consts::PI / (2.0 * w1);
                if u > u_max {
                    break;
                }
                let z = Complex64::new(1.0 - p, 0.0) + p * Complex64::from_polar(1.0, 2.0 * u * w1);
                if z.norm() >= ZERO_TOL {
                    return Err(Error::NonConvergence {
                        a: k,
                        b: u,
                        error: z.norm(),
                    });
                }
                u_star.push(u);
                residuals.push(z.norm());
            }
            Ok(DqptPoint {
                k_star: k,
                p_at_k_star: p,
                omega1: w1,
                u_star,
                residuals,
            })
        })
        .collect()
}

/// Work per site grid of `n` points spanning `[lo, hi]`.
pub fn w_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Convenience for callers holding a size rather than a spectrum.
pub fn spectrum_for(protocol: &QuenchProtocol, model: Arc<dyn ExcitationModel>, size: ChainSize) -> Result<Spectrum> {
    match size {
        ChainSize::Continuum => Spectrum::continuum(protocol, model),
        ChainSize::Finite(n) => Spectrum::finite(protocol, n, model.as_ref()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::LzFull;
    use crate::workstats::cumulants_zero_t;
    use std::f64::consts::PI;

    fn fig1a(v: f64) -> (QuenchProtocol, Spectrum) {
        let p = QuenchProtocol::new(-4.0, 1.0, v, 1.0).unwrap();
        let s = Spectrum::continuum(&p, Arc::new(LzFull)).unwrap();
        (p, s)
    }

    #[test]
    fn scgf_origin_and_adiabatic_line() {
        let (p, s) = fig1a(0.05);
        assert_eq!(scgf(&p, &s, 0.0).unwrap(), 0.0);
        let q = QuenchProtocol::new(0.3, 0.3, 0.05, 1.0).unwrap();
        let sp = Spectrum::finite(&q, 32, &LzFull).unwrap();
        assert_eq!(scgf(&q, &sp, 1.7).unwrap(), 0.0);
    }

    #[test]
    fn derivatives_at_origin_are_cumulants() {
        let (p, s) = fig1a(0.02);
        let g = Scgf::new(&p, &s).unwrap();
        let c = cumulants_zero_t(&p, &s, 2).unwrap();
        assert!((g.derivative(0.0).unwrap() / c.kappa(1) - 1.0).abs() < 1e-10);
        assert!((g.second_derivative(0.0).unwrap() / c.kappa(2) - 1.0).abs() < 1e-10);
        // central differences of the value, refined once
        let fd = |h: f64| (g.value(h).unwrap() - 2.0 * g.value(0.0).unwrap() + g.value(-h).unwrap()) / (h * h);
        let (a, b) = (fd(0.02), fd(0.01));
        let rich = (4.0 * b - a) / 3.0;
        assert!((rich / c.kappa(2) - 1.0).abs() < 1e-6, "{rich} vs {}", c.kappa(2));
    }

    #[test]
    fn rate_function_basics() {
        let (p, s) = fig1a(0.05);
        let g = Scgf::new(&p, &s).unwrap();
        let mean = g.derivative(0.0).unwrap();
        let mu = g.mu();
        let (lo, hi) = g.range().unwrap();
        assert!((lo - mu).abs() < 1e-12);
        let grid = [mu - 0.1, mean, mean + 0.01, mean + 0.05, mean - 0.01];
        let r = rate_function(&p, &s, &grid).unwrap();
        assert_eq!(r.status[0], RateStatus::Forbidden);
        assert_eq!(r.i_values[0], f64::INFINITY);
        assert_eq!(r.i_values[1], 0.0);
        for i in 2..5 {
            let ss = r.s_star[i].unwrap();
            let fy = g.value(ss).unwrap() + r.i_values[i] - ss * grid[i];
            assert!(fy.abs() < 1e-8);
            assert!(r.i_values[i] > 0.0);
        }
        assert!(hi > mean);
    }

    #[test]
    fn extreme_rate_is_gaussian_moment() {
        let v = 0.05;
        let (p, s) = fig1a(v);
        let (_, upper) = Scgf::new(&p, &s).unwrap().edge_rates().unwrap();
        let want = PI.powi(3) / (3.0 * v);
        assert!((upper / want - 1.0).abs() < 1e-10);
    }

    #[test]
    fn dqpt_zeros() {
        let v = 0.05;
        let (p, s) = fig1a(v);
        let pts = find_dqpt(&p, &s, 40.0).unwrap();
        assert_eq!(pts.len(), 1);
        let k_star = (v * 2f64.ln() / (2.0 * PI)).sqrt();
        assert!((pts[0].k_star - k_star).abs() < 1e-10);
        let w1 = p.omega1(k_star);
        assert!((pts[0].u_star[0] - PI / (2.0 * w1)).abs() < 1e-8);
        assert!(pts[0].residuals.iter().all(|r| *r < 1e-8));
        let slow = QuenchProtocol::new(0.5, 1.5, 0.05, 1.0).unwrap();
        let sp = Spectrum::continuum(&slow, Arc::new(crate::dynamics::Apt)).unwrap();
        assert!(matches!(find_dqpt(&slow, &sp, 10.0), Err(Error::NoCrossing { .. })));
        let fin = Spectrum::finite(&p, 100, &LzFull).unwrap();
        assert!(find_dqpt(&p, &fin, 10.0).is_err());
    }
}
