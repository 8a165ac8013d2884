//! Closed-form PDF and CDF of the confluent quadratic form as
//! exponential-polynomial mixtures.
//!
//! ```text
//! f(x) = Σᵢ Σⱼ α_{i,j} e^{-β̃ᵢx} x^{j-1} u(β̃ᵢx) sgn(x)
//! F(x) = u(x) + Σᵢ Σⱼ ω_{i,j} e^{-β̃ᵢx} x^{j-1} u(β̃ᵢx) sgn(x)
//! ```
//!
//! Positive poles carry the support `x > 0`, negative poles `x < 0`; the
//! boundary `x = 0` is evaluated as the right limit, which keeps the CDF
//! right-continuous for indefinite forms. Coefficients alternate in sign
//! with magnitudes far beyond 1e100 at large multiplicities, so terms are
//! accumulated in extended precision while tracking the largest partial
//! magnitude; when the cancellation eats into the precision budget the
//! evaluation reports `PrecisionLoss` instead of returning noise.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::residues::{to_coefficients, ResidueTable};

/// Noise floors at or below `2^-80` (~1e-24) are far beneath every
/// tolerance in use; a result buried under such a floor is a clean zero.
const NEGLIGIBLE_EXP: i64 = -80;

/// One distinct pole with its PDF (`alpha`) and CDF (`omega`) coefficient
/// columns, `j = 1..=mult`.
#[derive(Debug, Clone)]
struct PoleBlock {
    pole: Real,
    pole_f64: f64,
    alpha: Vec<Real>,
    omega: Vec<Real>,
}

/// Exponential-polynomial mixture distribution with extended-precision
/// coefficients.
#[derive(Debug, Clone)]
pub struct ClosedFormDistribution {
    precision_bits: usize,
    blocks: Vec<PoleBlock>,
}

/// Borrowed view of one pole's coefficient columns (`j = 1..=pᵢ`).
pub struct PoleView<'a> {
    pub pole: &'a Real,
    pub pole_f64: f64,
    pub alpha: &'a [Real],
    pub omega: &'a [Real],
}

impl ClosedFormDistribution {
    /// Builds the distribution from exact residue tables, rounding every
    /// coefficient once into `precision_bits`-bit floats.
    pub fn from_residues(rt: &ResidueTable, precision_bits: usize) -> Self {
        let (alpha, omega) = to_coefficients(rt, precision_bits);
        let blocks = rt
            .poles
            .iter()
            .zip(alpha.into_iter().zip(omega))
            .map(|((pole, _), (a, o))| {
                let pole_real = Real::from_rational(pole, precision_bits);
                PoleBlock {
                    pole_f64: pole_real.to_f64(),
                    pole: pole_real,
                    alpha: a,
                    omega: o,
                }
            })
            .collect();
        ClosedFormDistribution { precision_bits, blocks }
    }

    pub fn precision_bits(&self) -> usize {
        self.precision_bits
    }

    /// Distinct poles and multiplicities, as f64.
    pub fn poles(&self) -> Vec<(f64, u32)> {
        self.blocks.iter().map(|b| (b.pole_f64, b.alpha.len() as u32)).collect()
    }

    /// Read access to the extended-precision pole/coefficient columns.
    pub fn pole_views(&self) -> impl Iterator<Item = PoleView<'_>> {
        self.blocks.iter().map(|b| PoleView {
            pole: &b.pole,
            pole_f64: b.pole_f64,
            alpha: &b.alpha,
            omega: &b.omega,
        })
    }

    fn budget_bits(&self) -> i64 {
        self.precision_bits as i64 - 64
    }

    /// Accumulates the mixture on the support side of `x`, returning the
    /// sum and the largest term magnitude (binary exponent) seen.
    fn accumulate(&self, x: f64, use_omega: bool) -> (Real, i64) {
        let prec = self.precision_bits;
        let positive_side = x.is_sign_positive();
        let xr = Real::from_f64(x, prec);
        let mut sum = Real::zero(prec);
        let mut max_exp = i64::MIN;
        for block in &self.blocks {
            if (block.pole_f64 > 0.0) != positive_side {
                continue;
            }
            let coeffs = if use_omega { &block.omega } else { &block.alpha };
            let decay = block.pole.neg().mul(&xr).exp();
            let mut x_pow = Real::one(prec);
            let mut poly = Real::zero(prec);
            for (jm1, coeff) in coeffs.iter().enumerate() {
                if jm1 > 0 {
                    x_pow = x_pow.mul(&xr);
                }
                let term = coeff.mul(&x_pow);
                let term_exp = term.exponent() + decay.exponent();
                max_exp = max_exp.max(term_exp);
                poly = poly.add(&term);
            }
            sum = sum.add(&poly.mul(&decay));
        }
        if !positive_side {
            sum = sum.neg();
        }
        (sum, max_exp)
    }

    /// Classifies an accumulated result against the cancellation noise
    /// floor `max_term · 2^-(precision_bits - 64)`. A result beneath the
    /// floor is an honest zero only if the floor itself is negligible on
    /// the problem scale; otherwise nothing can be said and the evaluation
    /// reports `PrecisionLoss`.
    fn finish(&self, sum: Real, max_exp: i64) -> Result<f64> {
        // no contributing term at all: structural zero (wrong support side)
        if max_exp == i64::MIN {
            return Ok(0.0);
        }
        let noise_exp = max_exp - self.budget_bits();
        let v_exp = sum.exponent(); // i64::MIN for an exact zero
        if v_exp <= noise_exp {
            if noise_exp <= NEGLIGIBLE_EXP {
                return Ok(0.0);
            }
            return Err(Error::PrecisionLoss {
                cancelled_bits: max_exp.saturating_sub(v_exp),
                budget_bits: self.budget_bits(),
            });
        }
        Ok(sum.to_f64())
    }

    /// Density at `x`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        let (sum, max_exp) = self.accumulate(x, false);
        self.finish(sum, max_exp)
    }

    /// Distribution function at `x`, clamped to [0, 1] after the precision
    /// check.
    pub fn cdf(&self, x: f64) -> Result<f64> {
        let (sum, max_exp) = self.accumulate(x, true);
        let (total, max_exp) = if x.is_sign_positive() {
            (sum.add(&Real::one(self.precision_bits)), max_exp.max(1))
        } else {
            (sum, max_exp)
        };
        Ok(self.finish(total, max_exp)?.clamp(0.0, 1.0))
    }

    /// Unclamped, unguarded CDF value with the largest term magnitude in
    /// bits; diagnostic surface for precision experiments.
    pub fn cdf_parts(&self, x: f64) -> (f64, i64) {
        let (sum, max_exp) = self.accumulate(x, true);
        let step = if x.is_sign_positive() { 1.0 } else { 0.0 };
        (step + sum.to_f64(), max_exp)
    }

    /// Unclamped density and largest term magnitude in bits.
    pub fn pdf_parts(&self, x: f64) -> (f64, i64) {
        let (sum, max_exp) = self.accumulate(x, false);
        (sum.to_f64(), max_exp)
    }

    /// Distribution of `c·X` for `c > 0`: poles shrink by `c`, coefficients
    /// rescale as `α c^{-j}` and `ω c^{-(j-1)}`.
    pub fn scale(&self, c: f64) -> ClosedFormDistribution {
        assert!(c > 0.0 && c.is_finite());
        let prec = self.precision_bits;
        let cr = Real::from_f64(c, prec);
        let inv = cr.recip();
        let blocks = self
            .blocks
            .iter()
            .map(|b| {
                let pole = b.pole.div(&cr);
                let mut factor = inv.clone(); // c^{-j}, starting at j = 1
                let mut alpha = Vec::with_capacity(b.alpha.len());
                let mut omega = Vec::with_capacity(b.omega.len());
                for (a, o) in b.alpha.iter().zip(&b.omega) {
                    alpha.push(a.mul(&factor));
                    omega.push(o.mul(&factor).mul(&cr)); // c^{-(j-1)}
                    factor = factor.mul(&inv);
                }
                PoleBlock { pole_f64: pole.to_f64(), pole, alpha, omega }
            })
            .collect();
        ClosedFormDistribution { precision_bits: prec, blocks }
    }

    /// Raw k-th moment, `k ∈ {1, 2}`, by termwise integration:
    /// `Σ α_{i,j} (j+k-1)! / β̃ᵢ^{j+k}` (signs handled by the signed poles).
    pub fn moment(&self, k: u32) -> Result<f64> {
        assert!(k == 1 || k == 2);
        let prec = self.precision_bits;
        let mut sum = Real::zero(prec);
        let mut max_exp = i64::MIN;
        for block in &self.blocks {
            // (j + k - 1)! and β̃^{j+k} ladders
            let mut fact = Real::one(prec);
            for t in 2..=k as usize {
                fact = fact.mul(&Real::from_u64(t as u64, prec));
            }
            let mut pole_pow = block.pole.powi(k as i64);
            for (jm1, alpha) in block.alpha.iter().enumerate() {
                let j = jm1 + 1;
                // incrementally: fact = (j+k-1)!, pole_pow = β̃^{j+k}
                if jm1 > 0 {
                    fact = fact.mul(&Real::from_u64((j as u64) + (k as u64) - 1, prec));
                }
                pole_pow = pole_pow.mul(&block.pole);
                let term = alpha.mul(&fact).div(&pole_pow);
                max_exp = max_exp.max(term.exponent());
                sum = sum.add(&term);
            }
        }
        self.finish(sum, max_exp)
    }

    /// Upper end of the numerically relevant support on the positive side:
    /// beyond it every positive-pole gamma component has negligible mass.
    pub fn support_hi(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.pole_f64 > 0.0)
            .map(|b| {
                let p = b.alpha.len() as f64;
                (p + 40.0 * p.sqrt() + 60.0) / b.pole_f64
            })
            .fold(0.0f64, f64::max)
    }

    /// Lower end of the numerically relevant support (0 when there are no
    /// negative poles).
    pub fn support_lo(&self) -> f64 {
        self.blocks
            .iter()
            .filter(|b| b.pole_f64 < 0.0)
            .map(|b| {
                let p = b.alpha.len() as f64;
                (p + 40.0 * p.sqrt() + 60.0) / b.pole_f64
            })
            .fold(0.0f64, f64::min)
    }

    /// `∫ f` by adaptive Simpson over the numerical support; a unit-area
    /// diagnostic for the coefficient pipeline.
    pub fn normalization(&self) -> Result<f64> {
        let mut total = 0.0;
        let lo = self.support_lo();
        if lo < 0.0 {
            total += integrate(&|x| self.pdf(x), lo, 0.0, 1e-9)?;
        }
        let hi = self.support_hi();
        if hi > 0.0 {
            total += integrate(&|x| self.pdf(x), 0.0, hi, 1e-9)?;
        }
        Ok(total)
    }
}

/// Adaptive Simpson quadrature over a fallible integrand. The interval is
/// pre-split into uniform panels so a narrow bump cannot slip between the
/// samples of the initial mesh.
pub fn integrate<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    const PANELS: usize = 64;
    let mut total = 0.0;
    let panel_tol = tol / PANELS as f64;
    for i in 0..PANELS {
        let pa = a + (b - a) * i as f64 / PANELS as f64;
        let pb = a + (b - a) * (i + 1) as f64 / PANELS as f64;
        let fa = f(pa)?;
        let fb = f(pb)?;
        let m = 0.5 * (pa + pb);
        let fm = f(m)?;
        let whole = (pb - pa) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_step(f, pa, pb, fa, fm, fb, whole, panel_tol, 24)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> Result<f64>>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, tol * 0.5, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, tol * 0.5, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confluent::build_pole_zero;
    use crate::montecarlo::{ks_distance, sample_qm, SimConfig};
    use crate::reduction::SpectralForm;
    use crate::residues::{rationalize, residues_recursive, DEFAULT_MAX_DENOMINATOR};

    fn dist(lambda: Vec<f64>, mu: Vec<f64>, m: u32, bits: usize) -> ClosedFormDistribution {
        let sf = SpectralForm::from_spectrum(lambda, mu);
        let pz = build_pole_zero(&sf, m).unwrap();
        let rpz = rationalize(&pz, DEFAULT_MAX_DENOMINATOR).unwrap();
        let rt = residues_recursive(&rpz);
        ClosedFormDistribution::from_residues(&rt, bits)
    }

    #[test]
    fn unit_exponential() {
        let d = dist(vec![1.0], vec![0.0], 4, 192);
        for x in [0.0, 0.3, 1.0, 4.5] {
            assert!((d.pdf(x).unwrap() - (-x).exp()).abs() < 1e-13, "pdf({x})");
            assert!(
                (d.cdf(x).unwrap() - (1.0 - (-x).exp())).abs() < 1e-13,
                "cdf({x})"
            );
        }
        assert_eq!(d.pdf(-1.0).unwrap(), 0.0);
        assert_eq!(d.cdf(-1.0).unwrap(), 0.0);
        assert_eq!(d.cdf(0.0).unwrap(), 0.0);
        assert!((d.moment(1).unwrap() - 1.0).abs() < 1e-12);
        assert!((d.moment(2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hypoexponential_two_rates() {
        // lambda = (1, 2), central: f(x) = e^{-x/2} - e^{-x}
        let d = dist(vec![1.0, 2.0], vec![0.0, 0.0], 3, 192);
        for x in [0.1f64, 0.7, 2.0, 6.0] {
            let expected = (-x / 2.0).exp() - (-x).exp();
            assert!(
                (d.pdf(x).unwrap() - expected).abs() < 1e-12,
                "pdf({x}) = {} vs {expected}",
                d.pdf(x).unwrap()
            );
        }
        assert!((d.moment(1).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn laplace_from_indefinite_form() {
        // lambda = (1, -1), central: f(x) = e^{-|x|}/2, F(0) = 1/2
        let d = dist(vec![1.0, -1.0], vec![0.0, 0.0], 5, 192);
        for x in [-3.0, -0.5, 0.0, 0.5, 3.0] {
            assert!(
                (d.pdf(x).unwrap() - 0.5 * (-x.abs()).exp()).abs() < 1e-12,
                "pdf({x})"
            );
        }
        assert!((d.cdf(0.0).unwrap() - 0.5).abs() < 1e-12);
        assert!((d.cdf(-0.5).unwrap() - 0.5 * (-0.5f64).exp() * 1.0).abs() < 1e-12);
        assert!(d.moment(1).unwrap().abs() < 1e-12);
        assert!(d.cdf(-60.0).unwrap().abs() < 1e-10);
        assert!((d.cdf(60.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn scaling_identities() {
        let d = dist(vec![1.0], vec![0.0], 2, 192);
        let same = d.scale(1.0);
        for x in [0.2, 1.0, 3.0] {
            assert!((same.pdf(x).unwrap() - d.pdf(x).unwrap()).abs() < 1e-14);
        }
        let doubled = d.scale(2.0);
        for x in [0.2, 1.0, 3.0] {
            assert!(
                (doubled.pdf(x).unwrap() - 0.5 * (-x / 2.0).exp()).abs() < 1e-13,
                "{x}"
            );
        }
        // metamorphic: scale(c).cdf(c x) = cdf(x)
        let g = dist(vec![1.0, -0.5], vec![2.0, 1.0], 12, 256);
        let c = 3.7;
        let gc = g.scale(c);
        for k in 0..50 {
            let x = -4.0 + 0.2 * k as f64;
            let lhs = gc.cdf(c * x).unwrap();
            let rhs = g.cdf(x).unwrap();
            assert!((lhs - rhs).abs() < 1e-10, "x = {x}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn moments_match_spectral_identities() {
        for (lambda, mu, m) in [
            (vec![1.0, 2.0], vec![0.5, 1.5], 10u32),
            (vec![0.8, -0.6, 1.4], vec![0.0, 2.0, 4.0], 25),
            (vec![-1.2, 0.4], vec![3.0, 0.0], 40),
        ] {
            let sf = SpectralForm::from_spectrum(lambda.clone(), mu.clone());
            let d = dist(lambda, mu, m, 320);
            let mean = d.moment(1).unwrap();
            assert!(
                (mean - sf.mean()).abs() < 1e-8 * sf.mean().abs().max(1.0),
                "mean {mean} vs {}",
                sf.mean()
            );
        }
    }

    #[test]
    fn mean_invariant_in_m() {
        let sf = SpectralForm::from_spectrum(vec![1.0, -0.5, 0.9], vec![2.0, 1.0, 0.0]);
        let reference = sf.mean();
        for m in [1u32, 5, 25, 80] {
            let d = dist(sf.lambda.clone(), sf.mu.clone(), m, 384);
            let mean = d.moment(1).unwrap();
            assert!(
                (mean - reference).abs() < 1e-9 * reference.abs().max(1.0),
                "m = {m}: {mean} vs {reference}"
            );
        }
    }

    #[test]
    fn cdf_derivative_matches_pdf() {
        let d = dist(vec![1.0, -0.5], vec![2.0, 1.0], 16, 256);
        for k in 0..100 {
            let x = -6.0 + 0.13 * (k as f64 + 0.5); // grid avoiding 0
            if x.abs() < 0.05 {
                continue;
            }
            let h = 1e-5 * x.abs().max(0.5);
            let num = (d.cdf(x + h).unwrap() - d.cdf(x - h).unwrap()) / (2.0 * h);
            let exact = d.pdf(x).unwrap();
            if exact > 1e-12 {
                assert!(
                    (num - exact).abs() < 1e-5 * exact.max(1e-6),
                    "x = {x}: {num} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn normalization_and_cdf_limits() {
        for (lambda, mu, m) in [
            (vec![1.0], vec![0.0], 1u32),
            (vec![1.0, 2.0], vec![1.0, 0.5], 12),
            (vec![1.0, -1.0], vec![0.3, 0.3], 20),
        ] {
            let d = dist(lambda, mu, m, 320);
            let area = d.normalization().unwrap();
            assert!((area - 1.0).abs() < 1e-6, "area {area}");
            let hi = d.support_hi().max(1.0);
            let lo = d.support_lo().min(-1.0);
            assert!((d.cdf(hi).unwrap() - 1.0).abs() < 1e-8);
            assert!(d.cdf(lo).unwrap() < 1e-8);
            // monotone on a sampled grid
            let mut prev = -1e-12;
            for k in 0..=60 {
                let x = lo + (hi - lo) * k as f64 / 60.0;
                let v = d.cdf(x).unwrap();
                assert!(v >= prev - 1e-10, "x = {x}");
                prev = v;
            }
        }
    }

    #[test]
    fn weak_convergence_to_original_form() {
        // KS between the analytic confluent CDF and an empirical sample of
        // the ORIGINAL Q shrinks as m doubles, down to sampling noise.
        let sf = SpectralForm::from_spectrum(vec![1.0, -0.5], vec![2.0, 1.0]);
        let n = 100_000;
        let samples: Vec<f64> = sample_qm(&sf, 1, &SimConfig::new(99, 0, n))
            .into_iter()
            .map(|(q, _)| q)
            .collect();
        let ks_at = |m: u32| {
            let d = dist(sf.lambda.clone(), sf.mu.clone(), m, 320);
            ks_distance(&samples, |x| d.cdf(x).unwrap())
        };
        let (k1, k4, k16, k64) = (ks_at(1), ks_at(4), ks_at(16), ks_at(64));
        assert!(k4 < k1, "{k4} vs {k1}");
        assert!(k16 < k4, "{k16} vs {k4}");
        assert!(k64 < 2.0 * crate::montecarlo::ks_critical_1pct(n), "{k64}");
    }

    #[test]
    fn double_precision_collapses_at_large_m() {
        // the documented precision hazard: 53-bit coefficient accumulation
        // is insufficient at m = 150
        let sf = SpectralForm::from_spectrum(vec![1.0, 1.7], vec![2.0, 1.0]);
        let pz = build_pole_zero(&sf, 150).unwrap();
        let rpz = rationalize(&pz, DEFAULT_MAX_DENOMINATOR).unwrap();
        let rt = residues_recursive(&rpz);

        let bad = ClosedFormDistribution::from_residues(&rt, 53);
        let mut failed = false;
        for k in 1..=40 {
            let x = 0.4 * k as f64;
            let (raw, _) = bad.cdf_parts(x);
            if !(-(1e-6)..=1.0 + 1e-6).contains(&raw) || bad.cdf(x).is_err() {
                failed = true;
                break;
            }
        }
        assert!(failed, "53-bit evaluation unexpectedly survived");

        let good = ClosedFormDistribution::from_residues(&rt, 512);
        for k in 1..=40 {
            let x = 0.4 * k as f64;
            let v = good.cdf(x).unwrap();
            assert!((0.0..=1.0).contains(&v));
        }
        assert!((good.normalization().unwrap() - 1.0).abs() < 1e-6);
    }
}
