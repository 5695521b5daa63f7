//! Per-mode excitation probabilities.
//!
//! Each route to `p_k` implements [`ExcitationModel`]; a [`Registry`] maps
//! method names to boxed models so front ends can pick one at runtime.

mod apt;
mod lz;
mod ode;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ising::{ChainSize, ModeGrid, QuenchProtocol};
use crate::quad::{self, QuadValue, Tolerance};

pub use apt::{apt_probability, Apt};
pub use lz::{lz_full, lz_full_ln, lz_half, LzFull, LzHalf};
pub use ode::{evolve_mode, evolve_mode_report, EvolveReport, ModeAmplitudes, OdeModel, DEFAULT_RELTOL};

/// Tag naming the route used for `p_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ode,
    LzFull,
    LzHalf,
    Apt,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ode, Method::LzFull, Method::LzHalf, Method::Apt];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ode => "ode",
            Method::LzFull => "lz_full",
            Method::LzHalf => "lz_half",
            Method::Apt => "apt",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s || m.name().replace('_', "-") == s)
            .ok_or_else(|| Error::UnknownMethod(s.to_string()))
    }
}

/// A route from a protocol and a momentum to the excitation probability.
pub trait ExcitationModel: Send + Sync {
    fn method(&self) -> Method;

    fn name(&self) -> &'static str {
        self.method().name()
    }

    /// Rejects protocols the route cannot describe.
    fn check(&self, protocol: &QuenchProtocol) -> Result<()>;

    fn probability(&self, protocol: &QuenchProtocol, k: f64) -> Result<f64>;

    /// `ln p_k`; models with an exact logarithm override this so that tiny
    /// probabilities keep their relative accuracy.
    fn ln_probability(&self, protocol: &QuenchProtocol, k: f64) -> Result<f64> {
        Ok(self.probability(protocol, k)?.ln())
    }

    /// Momenta where `p_k` varies fastest; used as quadrature breakpoints.
    fn breakpoints(&self, protocol: &QuenchProtocol) -> Vec<f64> {
        let sigma = (protocol.v / (4.0 * PI * protocol.j)).sqrt();
        [0.5, 1.0, 2.0, 4.0, 8.0].iter().map(|m| m * sigma).filter(|&k| k < PI).collect()
    }
}

/// Name-indexed collection of excitation models.
#[derive(Clone)]
pub struct Registry {
    models: BTreeMap<&'static str, Arc<dyn ExcitationModel>>,
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            models: BTreeMap::new(),
        }
    }

    /// All four routes, the ODE one at its default tolerance.
    pub fn standard() -> Self {
        let mut r = Registry::empty();
        r.register(Arc::new(OdeModel::default()));
        r.register(Arc::new(LzFull));
        r.register(Arc::new(LzHalf));
        r.register(Arc::new(Apt::default()));
        r
    }

    pub fn register(&mut self, model: Arc<dyn ExcitationModel>) {
        self.models.insert(model.name(), model);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn ExcitationModel>> {
        let method: Method = name.parse()?;
        self.models
            .get(method.name())
            .cloned()
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.models.keys().copied()
    }
}

impl Default for Registry {
    fn default() -> Self {
        Registry::standard()
    }
}

/// Excitation probabilities on a finite momentum grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub grid: ModeGrid,
    pub probabilities: Vec<f64>,
    pub ln_probabilities: Vec<f64>,
    pub method: Method,
}

/// Evaluates `model` on every grid momentum. Momenta run in parallel but
/// results are assembled in grid order.
pub fn mode_spectrum(protocol: &QuenchProtocol, grid: &ModeGrid, model: &dyn ExcitationModel) -> Result<ModeSpectrum> {
    protocol.validate()?;
    model.check(protocol)?;
    let values: Vec<(f64, f64)> = grid
        .momenta()
        .par_iter()
        .map(|&k| {
            let p = model.probability(protocol, k).map_err(|e| e.at_mode(k))?;
            let lp = model.ln_probability(protocol, k).map_err(|e| e.at_mode(k))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability(p).at_mode(k));
            }
            Ok((p, lp))
        })
        .collect::<Result<_>>()?;
    let (probabilities, ln_probabilities) = values.into_iter().unzip();
    Ok(ModeSpectrum {
        grid: grid.clone(),
        probabilities,
        ln_probabilities,
        method: model.method(),
    })
}

/// Excitation probability of one mode together with its logarithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeProbability {
    pub p: f64,
    pub ln_p: f64,
}

impl ModeProbability {
    pub fn from_p(p: f64) -> Self {
        ModeProbability { p, ln_p: p.ln() }
    }

    /// `ln(1 - p)`.
    pub fn ln_q(&self) -> f64 {
        (-self.p).ln_1p()
    }
}

/// Model evaluated lazily at any momentum of the thermodynamic limit.
#[derive(Clone)]
pub struct ContinuumSpectrum {
    pub protocol: QuenchProtocol,
    pub model: Arc<dyn ExcitationModel>,
}

impl fmt::Debug for ContinuumSpectrum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContinuumSpectrum")
            .field("protocol", &self.protocol)
            .field("method", &self.model.method())
            .finish()
    }
}

/// Mode occupations either on a finite chain or in the continuum.
#[derive(Debug, Clone)]
pub enum Spectrum {
    Finite(ModeSpectrum),
    Continuum(ContinuumSpectrum),
}

impl Spectrum {
    pub fn continuum(protocol: &QuenchProtocol, model: Arc<dyn ExcitationModel>) -> Result<Self> {
        protocol.validate()?;
        model.check(protocol)?;
        Ok(Spectrum::Continuum(ContinuumSpectrum {
            protocol: *protocol,
            model,
        }))
    }

    pub fn finite(protocol: &QuenchProtocol, n_spins: usize, model: &dyn ExcitationModel) -> Result<Self> {
        let grid = ModeGrid::new(n_spins)?;
        Ok(Spectrum::Finite(mode_spectrum(protocol, &grid, model)?))
    }

    pub fn size(&self) -> ChainSize {
        match self {
            Spectrum::Finite(s) => ChainSize::Finite(s.grid.n_spins()),
            Spectrum::Continuum(_) => ChainSize::Continuum,
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Spectrum::Finite(s) => s.method,
            Spectrum::Continuum(c) => c.model.method(),
        }
    }

    /// Probability at a momentum of the continuum spectrum.
    pub fn at(&self, k: f64) -> Result<ModeProbability> {
        match self {
            Spectrum::Continuum(c) => {
                let p = c.model.probability(&c.protocol, k).map_err(|e| e.at_mode(k))?;
                let ln_p = c.model.ln_probability(&c.protocol, k).map_err(|e| e.at_mode(k))?;
                Ok(ModeProbability { p, ln_p })
            }
            Spectrum::Finite(s) => {
                let i = s
                    .grid
                    .momenta()
                    .iter()
                    .position(|&q| q == k)
                    .ok_or_else(|| Error::InvalidGrid(format!("k = {k} is not a grid momentum")))?;
                Ok(ModeProbability {
                    p: s.probabilities[i],
                    ln_p: s.ln_probabilities[i],
                })
            }
        }
    }

    /// Natural quadrature breakpoints of the continuum integrand.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Spectrum::Continuum(c) => c.model.breakpoints(&c.protocol),
            Spectrum::Finite(_) => Vec::new(),
        }
    }

    /// Per-site mode average `(1/N) sum_{k>0} f` or `(1/2pi) int_0^pi f dk`.
    pub fn average<T, F>(&self, f: F, extra_breaks: &[f64], tol: Tolerance) -> Result<T>
    where
        T: QuadValue + Send,
        F: Fn(f64, ModeProbability) -> Result<T> + Sync,
    {
        match self {
            Spectrum::Finite(s) => {
                let n = s.grid.n_spins() as f64;
                let terms: Vec<T> = s
                    .grid
                    .momenta()
                    .par_iter()
                    .zip(s.probabilities.par_iter().zip(s.ln_probabilities.par_iter()))
                    .map(|(&k, (&p, &ln_p))| f(k, ModeProbability { p, ln_p }).map_err(|e| e.at_mode(k)))
                    .collect::<Result<_>>()?;
                let sum = terms.into_iter().fold(T::zero(), |acc, t| acc + t);
                Ok(sum * (1.0 / n))
            }
            Spectrum::Continuum(_) => {
                let mut breaks = self.breakpoints();
                breaks.extend_from_slice(extra_breaks);
                let est = quad::integrate_with_breaks(|k: f64| f(k, self.at(k)?), 0.0, PI, &breaks, tol)?;
                Ok(est.value * (1.0 / (2.0 * PI)))
            }
        }
    }

    /// Largest excitation probability over the modes (continuum: over a
    /// dense scan of `(0, pi)`).
    pub fn max_probability(&self) -> Result<f64> {
        match self {
            Spectrum::Finite(s) => Ok(s.probabilities.iter().copied().fold(0.0, f64::max)),
            Spectrum::Continuum(_) => {
                let mut best: f64 = 0.0;
                for k in self.scan_momenta() {
                    best = best.max(self.at(k)?.p);
                }
                Ok(best)
            }
        }
    }

    /// Momenta of the continuum where `p_k` crosses `level`, located by
    /// bisection between scan points.
    pub fn crossings(&self, level: f64) -> Result<Vec<f64>> {
        let ks = match self {
            Spectrum::Continuum(_) => self.scan_momenta(),
            Spectrum::Finite(_) => {
                return Err(Error::Unsupported("crossing search needs the continuum spectrum".into()))
            }
        };
        let g = |k: f64| -> Result<f64> { Ok(self.at(k)?.p - level) };
        let mut out = Vec::new();
        let mut prev = (ks[0], g(ks[0])?);
        for &k in &ks[1..] {
            let cur = (k, g(k)?);
            if prev.1 == 0.0 {
                out.push(prev.0);
            } else if prev.1 * cur.1 < 0.0 {
                let (mut a, mut b, mut ga) = (prev.0, cur.0, prev.1);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    let gm = g(m)?;
                    if gm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if (gm < 0.0) == (ga < 0.0) {
                        a = m;
                        ga = gm;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
            prev = cur;
        }
        Ok(out)
    }

    pub(crate) fn scan_momenta(&self) -> Vec<f64> {
        // Geometric near k = 0 where the structure lives, linear elsewhere.
        let mut ks: Vec<f64> = (0..400).map(|i| 1e-6 * (PI / 1e-6).powf(i as f64 / 400.0)).collect();
        ks.extend((1..400).map(|i| PI * i as f64 / 400.0));
        ks.push(PI * (1.0 - 1e-12));
        ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ks.dedup();
        ks
    }
}
