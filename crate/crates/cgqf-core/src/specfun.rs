//! Self-contained special functions: log-gamma, the Gaussian Q-function,
//! the Nakagami-m mean, and the Gauss hypergeometric function ₂F₁ for
//! non-positive argument.
//!
//! Everything here is stateless and reentrant. The ₂F₁ evaluator exists in
//! both f64 and extended-precision variants; the latter feeds the BER
//! expression where the surrounding accumulation cancels catastrophically
//! in double precision.

use crate::error::{Error, Result};
use crate::real::Real;

/// Stirling-series coefficients B₂ₖ / (2k(2k−1)).
const STIRLING: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
];

/// Threshold above which the Stirling series is accurate to ~1e-15 relative.
const STIRLING_SWITCH: f64 = 20.0;

/// Natural log of the gamma function for positive real argument.
///
/// Stirling series for `x >= 20`, upward recurrence below.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::DomainError {
            function: "log_gamma",
            message: format!("argument must be positive, got {x}"),
        });
    }
    let mut shift = 0.0;
    let mut y = x;
    while y < STIRLING_SWITCH {
        shift += y.ln();
        y += 1.0;
    }
    let inv = 1.0 / y;
    let inv2 = inv * inv;
    let mut series = 0.0;
    let mut p = inv;
    for c in STIRLING {
        series += c * p;
        p *= inv2;
    }
    let half_ln_two_pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    Ok((y - 0.5) * y.ln() - y + half_ln_two_pi + series - shift)
}

/// Mean of a Nakagami-m variable: Γ(m+½) / (√m Γ(m)).
///
/// Strictly increasing in `m`, approaching 1 from below.
pub fn nakagami_mean(m: f64) -> f64 {
    debug_assert!(m > 0.0);
    let lg = log_gamma(m + 0.5).expect("m > 0") - 0.5 * m.ln() - log_gamma(m).expect("m > 0");
    lg.exp()
}

/// Gaussian Q-function ½ erfc(x/√2).
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Complementary error function.
///
/// Maclaurin series of erf below |z| = 2, Legendre continued fraction
/// (modified Lentz) above. Relative error ~1e-14 over the representable
/// range.
pub fn erfc(z: f64) -> f64 {
    if z < 0.0 {
        return 2.0 - erfc(-z);
    }
    if z <= 2.0 {
        1.0 - erf_series(z)
    } else {
        erfc_continued_fraction(z)
    }
}

fn erf_series(z: f64) -> f64 {
    // erf(z) = 2/sqrt(pi) * sum (-1)^k z^(2k+1) / (k! (2k+1))
    let z2 = z * z;
    let mut term = z;
    let mut sum = z;
    let mut k = 0usize;
    loop {
        k += 1;
        term *= -z2 / k as f64;
        let contrib = term / (2 * k + 1) as f64;
        sum += contrib;
        if contrib.abs() < 1e-18 * sum.abs() || k > 200 {
            break;
        }
    }
    sum * 2.0 / std::f64::consts::PI.sqrt()
}

fn erfc_continued_fraction(z: f64) -> f64 {
    // erfc(z) = exp(-z^2)/sqrt(pi) * 1/(z + (1/2)/(z + (2/2)/(z + ...)))
    let tiny = 1e-300;
    let mut f = z;
    let mut c = f;
    let mut d = 0.0;
    for n in 1..200 {
        let a = n as f64 / 2.0;
        d = z + a * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = z + a / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    let prefactor = (-z * z).exp() / std::f64::consts::PI.sqrt();
    prefactor / f
}

const HYP2F1_MAX_TERMS: usize = 2_000_000;

/// Gauss hypergeometric ₂F₁(a, b; c; z) for z ≤ 0.
///
/// Direct series on (−1, 0]; the Pfaff transformation
/// ₂F₁(a,b;c;z) = (1−z)^(−a) ₂F₁(a, c−b; c; z/(z−1)) maps z ≤ −1 into
/// [½, 1). When c−b is a non-positive integer the transformed series
/// terminates, which covers every call made by the BER expression.
pub fn gauss_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if c <= 0.0 && c == c.floor() {
        return Err(Error::DomainError {
            function: "gauss_2f1",
            message: format!("c must not be a non-positive integer, got {c}"),
        });
    }
    if z > 0.0 {
        return Err(Error::DomainError {
            function: "gauss_2f1",
            message: format!("only z <= 0 is supported, got {z}"),
        });
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z > -1.0 {
        hyp2f1_series(a, b, c, z)
    } else {
        let w = z / (z - 1.0);
        let front = (1.0 - z).powf(-a);
        Ok(front * hyp2f1_series(a, c - b, c, w)?)
    }
}

fn hyp2f1_series(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 0..HYP2F1_MAX_TERMS {
        let kf = k as f64;
        term *= (a + kf) * (b + kf) / ((c + kf) * (kf + 1.0)) * z;
        sum += term;
        if term == 0.0 || (term.abs() < 1e-14 * sum.abs() && kf > a.abs() && kf > b.abs()) {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence { what: "gauss_2f1 series", iterations: HYP2F1_MAX_TERMS })
}

/// Extended-precision ₂F₁(a, b; c; z) for z ≤ 0, same branching as
/// [`gauss_2f1`]. Parameters are f64 (exactly representable half-integers
/// in all uses); the argument and accumulation carry full precision.
pub fn gauss_2f1_real(a: f64, b: f64, c: f64, z: &Real) -> Result<Real> {
    let prec = z.prec();
    if z.is_positive() {
        return Err(Error::DomainError {
            function: "gauss_2f1_real",
            message: "only z <= 0 is supported".into(),
        });
    }
    if z.is_zero() {
        return Ok(Real::one(prec));
    }
    let minus_one = Real::from_f64(-1.0, prec);
    if *z > minus_one {
        hyp2f1_series_real(a, b, c, z)
    } else {
        // w = z/(z-1), front = (1-z)^(-1/2) handled for the a = 1/2 family;
        // general a uses exp(-a ln(1-z)).
        let one = Real::one(prec);
        let one_minus_z = one.sub(z);
        let w = z.div(&z.sub(&one));
        let front = if a == 0.5 {
            one_minus_z.sqrt().recip()
        } else {
            one_minus_z.ln().mul(&Real::from_f64(-a, prec)).exp()
        };
        Ok(front.mul(&hyp2f1_series_real(a, c - b, c, &w)?))
    }
}

fn hyp2f1_series_real(a: f64, b: f64, c: f64, z: &Real) -> Result<Real> {
    let prec = z.prec();
    // Stop two decades below the last rounding bit.
    let tol_exp = -(prec as i64) - 8;
    let mut term = Real::one(prec);
    let mut sum = Real::one(prec);
    for k in 0..HYP2F1_MAX_TERMS {
        let kf = k as f64;
        let num = (a + kf) * (b + kf);
        let den = (c + kf) * (kf + 1.0);
        term = term
            .mul(z)
            .mul(&Real::from_f64(num, prec))
            .div(&Real::from_f64(den, prec));
        sum = sum.add(&term);
        if term.is_zero()
            || (term.exponent() < sum.exponent() + tol_exp && kf > a.abs() && kf > b.abs())
        {
            return Ok(sum);
        }
    }
    Err(Error::NoConvergence { what: "gauss_2f1_real series", iterations: HYP2F1_MAX_TERMS })
}
