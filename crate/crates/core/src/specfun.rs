//! Special functions used throughout the crate: complex Gamma, the
//! polylogarithm, Riemann zeta on the real line and Bernoulli cumulants.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_741_78;

/// zeta(3/2), checked against the polylog evaluated at z = 1.
pub const ZETA_3_2: f64 = 2.612_375_348_685_488_343_348_567_567_924_071_630_57;

/// Highest cumulant order supported by [`bernoulli_cumulant`].
pub const MAX_BERNOULLI_ORDER: usize = 6;

/// Magnitude below which series terms are dropped, relative to the partial sum.
const SERIES_RTOL: f64 = 1e-14;

fn is_gamma_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// ln Gamma(z) for Re z >= 1/2 by the Lanczos sum.
fn ln_gamma_right(z: Complex64) -> Complex64 {
    let z = z - 1.0;
    let mut x = Complex64::new(LANCZOS_COEFFS[0], 0.0);
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    LN_SQRT_2PI + (z + 0.5) * t.ln() - t + x.ln()
}

/// Logarithm of the complex Gamma function.
///
/// The imaginary part is not reduced to the principal branch; only
/// `exp(ln_gamma(z))` is meaningful.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() || is_gamma_pole(z) {
        return Err(Error::GammaPole { re: z.re, im: z.im });
    }
    if z.re >= 0.5 {
        Ok(ln_gamma_right(z))
    } else {
        // Reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z).
        let s = (PI * z).sin();
        Ok(PI.ln() - s.ln() - ln_gamma_right(1.0 - z))
    }
}

/// Complex Gamma function.
pub fn complex_gamma(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() || is_gamma_pole(z) {
        return Err(Error::GammaPole { re: z.re, im: z.im });
    }
    if z.re >= 0.5 {
        Ok(ln_gamma_right(z).exp())
    } else {
        let s = (PI * z).sin();
        Ok(PI / (s * ln_gamma_right(1.0 - z).exp()))
    }
}

/// `Gamma(z) * exp(pi |Im z| / 2)`, which stays O(|z|^(Re z - 1/2)) along
/// vertical lines where Gamma itself underflows.
pub fn scaled_gamma(z: Complex64) -> Result<Complex64> {
    Ok((ln_gamma(z)? + 0.5 * PI * z.im.abs()).exp())
}

/// Real Gamma function for arguments that are not poles.
fn real_gamma(x: f64) -> f64 {
    complex_gamma(Complex64::new(x, 0.0))
        .map(|g| g.re)
        .unwrap_or(f64::NAN)
}

/// Riemann zeta on the real line, `s != 1`.
///
/// Uses the Borwein acceleration of the alternating eta series for
/// `s > 0` and the functional equation below.
pub(crate) fn zeta(s: f64) -> f64 {
    if s == 1.0 {
        return f64::INFINITY;
    }
    if s == 0.0 {
        return -0.5;
    }
    if s < 0.0 {
        // Trivial zeros.
        if s == s.round() && (s as i64) % 2 == 0 {
            return 0.0;
        }
        return 2f64.powf(s)
            * PI.powf(s - 1.0)
            * (0.5 * PI * s).sin()
            * real_gamma(1.0 - s)
            * zeta(1.0 - s);
    }
    if s > 60.0 {
        return 1.0 + 2f64.powf(-s) + 3f64.powf(-s);
    }
    const N: usize = 40;
    // d_k = n sum_{i<=k} (n+i-1)! 4^i / ((n-i)! (2i)!)
    let mut d = [0.0f64; N + 1];
    let n = N as f64;
    let mut term = 1.0 / n; // i = 0 term of the inner ratio, times n below
    let mut acc = 0.0;
    for (i, slot) in d.iter_mut().enumerate() {
        if i > 0 {
            let fi = i as f64;
            term *= 4.0 * (n + fi - 1.0) * (n - fi + 1.0) / ((2.0 * fi - 1.0) * (2.0 * fi));
        }
        acc += term;
        *slot = n * acc;
    }
    let dn = d[N];
    let mut sum = 0.0;
    for (k, dk) in d.iter().take(N).enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (dk - dn) / ((k + 1) as f64).powf(s);
    }
    -sum / (dn * (1.0 - 2f64.powf(1.0 - s)))
}

/// Riemann zeta at 3/2.
pub fn riemann_zeta_3half() -> f64 {
    ZETA_3_2
}

/// Direct summation of `sum_{l>=1} z^l / l^s` for `|z| <= 1`.
///
/// Returns the partial sum and the number of terms used. The sum stops
/// once a term falls below `1e-14` times the partial-sum magnitude, or at
/// `max_terms`.
pub fn polylog_series(s: f64, z: Complex64, max_terms: usize) -> Result<(Complex64, usize)> {
    let modulus = z.norm();
    if modulus > 1.0 {
        return Err(Error::PolylogDivergence { modulus });
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    for l in 1..=max_terms {
        power *= z;
        let term = power / (l as f64).powf(s);
        sum += term;
        if term.norm() <= SERIES_RTOL * sum.norm() || power.norm() == 0.0 {
            return Ok((sum, l));
        }
    }
    Ok((sum, max_terms))
}

/// Polylogarithm `Li_s(z)` for real `s > 1` and `|z| <= 1`.
///
/// Small arguments use the defining series; near the unit circle the
/// expansion in `ln z` is used, which converges for `|ln z| < 2 pi`.
pub fn polylog(s: f64, z: Complex64) -> Result<Complex64> {
    let modulus = z.norm();
    if modulus > 1.0 {
        return Err(Error::PolylogDivergence { modulus });
    }
    if !(s > 1.0) {
        return Err(Error::Unsupported(format!("polylog order s = {s} must exceed 1")));
    }
    if modulus <= 0.75 {
        return polylog_series(s, z, 10_000).map(|(v, _)| v);
    }
    Ok(polylog_log_series(s, z))
}

fn polylog_log_series(s: f64, z: Complex64) -> Complex64 {
    let mu = z.ln();
    let integer_order = s == s.round();
    let mut sum = Complex64::new(0.0, 0.0);
    if !integer_order {
        if mu.norm() > 0.0 {
            sum += real_gamma(1.0 - s) * (-mu).powf(s - 1.0);
        }
    } else {
        let n = s as usize;
        // mu^(n-1)/(n-1)! [H_{n-1} - ln(-mu)]
        if mu.norm() > 0.0 {
            let harmonic: f64 = (1..n).map(|j| 1.0 / j as f64).sum();
            let fact: f64 = (1..n).map(|j| j as f64).product();
            sum += mu.powi(n as i32 - 1) / fact * (harmonic - (-mu).ln());
        }
    }
    let mut power = Complex64::new(1.0, 0.0);
    let mut factorial = 1.0;
    let mut small = 0;
    for k in 0..120usize {
        if k > 0 {
            power *= mu;
            factorial *= k as f64;
        }
        let order = s - k as f64;
        if integer_order && order == 1.0 {
            continue;
        }
        let term = zeta(order) * power / factorial;
        sum += term;
        if term.norm() <= 1e-17 * sum.norm().max(1e-300) {
            small += 1;
            if small >= 3 {
                break;
            }
        } else {
            small = 0;
        }
    }
    sum
}

/// Coefficients (lowest power first) of the n-th Bernoulli cumulant as a
/// polynomial in p, from kappa_{n+1} = p (1 - p) d kappa_n / dp.
fn bernoulli_polynomial(n: usize) -> Vec<f64> {
    let mut poly = vec![0.0, 1.0];
    for _ in 1..n {
        let deriv: Vec<f64> = poly
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| i as f64 * c)
            .collect();
        let mut next = vec![0.0; deriv.len() + 2];
        for (i, c) in deriv.iter().enumerate() {
            next[i + 1] += c;
            next[i + 2] -= c;
        }
        poly = next;
    }
    poly
}

/// n-th cumulant of a Bernoulli(p) variable, `1 <= n <= 6`.
pub fn bernoulli_cumulant(n: usize, p: f64) -> Result<f64> {
    if n == 0 || n > MAX_BERNOULLI_ORDER {
        return Err(Error::UnsupportedOrder {
            order: n,
            max: MAX_BERNOULLI_ORDER,
        });
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(p));
    }
    let poly = bernoulli_polynomial(n);
    Ok(poly.iter().rev().fold(0.0, |acc, c| acc * p + c))
}
