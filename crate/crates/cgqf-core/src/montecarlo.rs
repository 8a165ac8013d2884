//! Independent stochastic oracle: samples of the original quadratic form,
//! of the confluent auxiliary form (coupled for MSE estimation), and
//! symbol-level MRC bit-error simulation.
//!
//! Reproducibility contract: identical `SimConfig` yields a bit-identical
//! sample sequence. The generator is ChaCha12, a counter-based stream
//! cipher; `stream_id` selects provably independent substreams of the same
//! seed. Normals come from Box-Muller (variance ½ per real component, so
//! |z|² of a standard complex normal is Exp(1)), and Gamma variates from
//! Marsaglia-Tsang squeeze rejection.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::Result;
use crate::mrc::{GrayQam, MrcScenario};
use crate::reduction::{cholesky, QuadraticForm, SpectralForm};

/// Seed, substream, and sample-count triple identifying one simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub seed: u64,
    pub stream_id: u64,
    pub n_samples: usize,
}

impl SimConfig {
    pub fn new(seed: u64, stream_id: u64, n_samples: usize) -> Self {
        SimConfig { seed, stream_id, n_samples }
    }

    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Box-Muller N(0,1) source; keeps the spare variate so draws come in a
/// fixed deterministic order.
pub struct GaussianSource {
    spare: Option<f64>,
}

impl GaussianSource {
    pub fn new() -> Self {
        GaussianSource { spare: None }
    }

    pub fn next(&mut self, rng: &mut ChaCha12Rng) -> f64 {
        if let Some(v) = self.spare.take() {
            return v;
        }
        let u1: f64 = 1.0 - rng.gen::<f64>(); // (0, 1]
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Standard complex normal CN(0,1): variance ½ per real component.
    pub fn next_complex(&mut self, rng: &mut ChaCha12Rng) -> Complex64 {
        let g1 = self.next(rng);
        let g2 = self.next(rng);
        Complex64::new(g1, g2) * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Gamma(shape, scale) by Marsaglia-Tsang; requires shape >= 1.
    pub fn next_gamma(&mut self, rng: &mut ChaCha12Rng, shape: f64, scale: f64) -> f64 {
        debug_assert!(shape >= 1.0);
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (3.0 * d.sqrt());
        loop {
            let x = self.next(rng);
            let t = 1.0 + c * x;
            if t <= 0.0 {
                continue;
            }
            let v = t * t * t;
            let u: f64 = rng.gen();
            // squeeze, then the exact acceptance test
            if u < 1.0 - 0.0331 * x * x * x * x
                || u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln())
            {
                return d * v * scale;
            }
        }
    }
}

impl Default for GaussianSource {
    fn default() -> Self {
        Self::new()
    }
}

/// Samples of `Q = v† A v`, `v = C z + v̄` with `z` standard complex normal.
pub fn sample_q(qf: &QuadraticForm, cfg: &SimConfig) -> Result<Vec<f64>> {
    let n = qf.dim();
    let c = cholesky(qf.l())?;
    let a = qf.a();
    let mut rng = cfg.rng();
    let mut gauss = GaussianSource::new();
    let mut out = Vec::with_capacity(cfg.n_samples);
    let mut v: DVector<Complex64> = DVector::zeros(n);
    for _ in 0..cfg.n_samples {
        for i in 0..n {
            v[i] = gauss.next_complex(&mut rng);
        }
        // v <- C z + v_bar, exploiting lower-triangular C
        for i in (0..n).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..=i {
                acc += c[(i, k)] * v[k];
            }
            v[i] = acc + qf.v_bar()[i];
        }
        let mut q = 0.0;
        for i in 0..n {
            let mut av = Complex64::new(0.0, 0.0);
            for k in 0..n {
                av += a[(i, k)] * v[k];
            }
            q += (v[i].conj() * av).re;
        }
        out.push(q);
    }
    Ok(out)
}

/// Coupled samples `(Q, Q_m)` sharing the same Gaussian draw, as needed for
/// mean-square-error estimation. `ξᵢ² ~ Gamma(m, 1/m)`.
pub fn sample_qm(sf: &SpectralForm, m: u32, cfg: &SimConfig) -> Vec<(f64, f64)> {
    let n = sf.dim();
    let mut rng = cfg.rng();
    let mut gauss = GaussianSource::new();
    let shape = m as f64;
    let scale = 1.0 / m as f64;
    let mut out = Vec::with_capacity(cfg.n_samples);
    for _ in 0..cfg.n_samples {
        let mut q = 0.0;
        let mut qm = 0.0;
        for i in 0..n {
            let y = gauss.next_complex(&mut rng);
            let h = sf.h_bar[i];
            let xi = gauss.next_gamma(&mut rng, shape, scale).sqrt();
            q += sf.lambda[i] * (y + h).norm_sqr();
            qm += sf.lambda[i] * (y + xi * h).norm_sqr();
        }
        out.push((q, qm));
    }
    out
}

/// Sup-norm distance between the empirical CDF of `samples` and `cdf`.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    debug_assert!(samples.len() >= 1000, "KS needs a meaningful sample size");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let hi = (i + 1) as f64 / n - f;
        let lo = f - i as f64 / n;
        d = d.max(hi.max(lo));
    }
    d
}

/// Asymptotic 1% Kolmogorov-Smirnov critical value.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Empirical bit error rate with its standard error.
#[derive(Debug, Clone, Copy)]
pub struct BerEstimate {
    pub ber: f64,
    pub std_error: f64,
    pub bits: u64,
}

/// Symbol-level MRC simulation: per trial draws a correlated Rician channel
/// vector, sends one Gray-mapped square-QAM symbol over the equivalent AWGN
/// channel with post-combining SNR `γ̄ g†g`, and slices per axis.
pub fn simulate_mrc_ber(
    scenario: &MrcScenario,
    gamma_bar: f64,
    cfg: &SimConfig,
) -> Result<BerEstimate> {
    let qf = scenario.build_channel()?;
    let constellation = GrayQam::new(scenario.m_qam)?;
    let c = cholesky(qf.l())?;
    let p = qf.dim();
    let bits_per_symbol = constellation.bits_per_symbol();

    let mut rng = cfg.rng();
    let mut gauss = GaussianSource::new();
    let mut g: DVector<Complex64> = DVector::zeros(p);
    let mut sum_err = 0u64;
    let mut sum_err_sq = 0u64;
    for _ in 0..cfg.n_samples {
        for i in 0..p {
            g[i] = gauss.next_complex(&mut rng);
        }
        for i in (0..p).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..=i {
                acc += c[(i, k)] * g[k];
            }
            g[i] = acc + qf.v_bar()[i];
        }
        let snr = gamma_bar * g.iter().map(|z| z.norm_sqr()).sum::<f64>();

        let (si, sq) = constellation.random_symbol(&mut rng);
        let x = constellation.point(si, sq);
        let noise = gauss.next_complex(&mut rng);
        let y = x + noise / snr.sqrt();
        let (di, dq) = constellation.detect(y);
        let errs = constellation.bit_errors(si, sq, di, dq) as u64;
        sum_err += errs;
        sum_err_sq += errs * errs;
    }

    let n = cfg.n_samples as f64;
    let mean = sum_err as f64 / n;
    let var = (sum_err_sq as f64 / n - mean * mean).max(0.0);
    let ber = mean / bits_per_symbol as f64;
    let std_error = (var / n).sqrt() / bits_per_symbol as f64;
    Ok(BerEstimate { ber, std_error, bits: cfg.n_samples as u64 * bits_per_symbol as u64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{cplx, random_hermitian, random_mean, random_spd};
    use nalgebra::DMatrix;

    #[test]
    fn identical_config_is_bit_identical() {
        let l = DMatrix::identity(2, 2);
        let a = random_hermitian(2, &mut SimConfig::new(5, 0, 0).rng());
        let v = random_mean(2, &mut SimConfig::new(6, 0, 0).rng());
        let qf = QuadraticForm::new(a, l, v).unwrap();
        let cfg = SimConfig::new(42, 3, 500);
        assert_eq!(sample_q(&qf, &cfg).unwrap(), sample_q(&qf, &cfg).unwrap());
        let other = SimConfig::new(42, 4, 500);
        assert_ne!(sample_q(&qf, &cfg).unwrap(), sample_q(&qf, &other).unwrap());
    }

    #[test]
    fn scalar_central_form_is_unit_exponential() {
        let one = DMatrix::from_element(1, 1, cplx(1.0, 0.0));
        let qf = QuadraticForm::new(
            one.clone(),
            one,
            DVector::from_vec(vec![cplx(0.0, 0.0)]),
        )
        .unwrap();
        let n = 200_000;
        let s = sample_q(&qf, &SimConfig::new(1, 0, n)).unwrap();
        let mean = s.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        // distribution check against Exp(1)
        let d = ks_distance(&s[..100_000], |x| 1.0 - (-x).exp());
        assert!(d < ks_critical_1pct(100_000), "KS {d}");
    }

    #[test]
    fn sample_mean_matches_spectral_identity() {
        let mut rng = SimConfig::new(11, 0, 0).rng();
        let a = random_hermitian(3, &mut rng);
        let l = random_spd(3, &mut rng);
        let v = random_mean(3, &mut rng);
        let qf = QuadraticForm::new(a, l, v).unwrap();
        let sf = crate::reduction::reduce(&qf).unwrap();

        let n = 1_000_000;
        let s = sample_q(&qf, &SimConfig::new(2, 1, n)).unwrap();
        let mean = s.iter().sum::<f64>() / n as f64;
        let var = s.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let se = (var / n as f64).sqrt();
        assert!(
            (mean - sf.mean()).abs() < 4.0 * se,
            "mean {mean} vs {} (se {se})",
            sf.mean()
        );
    }

    #[test]
    fn matrix_and_spectral_sampling_agree_in_distribution() {
        let mut rng = SimConfig::new(23, 0, 0).rng();
        let a = random_hermitian(3, &mut rng);
        let l = random_spd(3, &mut rng);
        let v = random_mean(3, &mut rng);
        let qf = QuadraticForm::new(a, l, v).unwrap();
        let sf = crate::reduction::reduce(&qf).unwrap();

        let n = 100_000;
        let s1 = sample_q(&qf, &SimConfig::new(7, 0, n)).unwrap();
        let s2: Vec<f64> = sample_qm(&sf, 1, &SimConfig::new(7, 1, n))
            .into_iter()
            .map(|(q, _)| q)
            .collect();
        // same distribution through two different samplers: two-sample KS
        let mut all = s1.clone();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let ecdf1 = |x: f64| {
            let idx = all.partition_point(|&v| v <= x);
            idx as f64 / n as f64
        };
        let d = ks_distance(&s2, ecdf1);
        assert!(d < 1.63 * (2.0 / n as f64).sqrt(), "two-sample KS {d}");
    }

    #[test]
    fn coupled_pairs_share_first_moment_and_converge() {
        let sf = SpectralForm::from_spectrum(vec![1.0, -0.5], vec![2.0, 1.0]);
        let n = 200_000;
        for m in [1u32, 16] {
            let pairs = sample_qm(&sf, m, &SimConfig::new(3, 0, n));
            let (mq, mqm): (f64, f64) = pairs
                .iter()
                .fold((0.0, 0.0), |(a, b), (q, qm)| (a + q, b + qm));
            let mq = mq / n as f64;
            let mqm = mqm / n as f64;
            // E[xi^2] = 1 exactly, so first moments agree
            let var: f64 = pairs
                .iter()
                .map(|(q, qm)| {
                    let d = (qm - q) - (mqm - mq);
                    d * d
                })
                .sum::<f64>()
                / n as f64;
            let se = (var / n as f64).sqrt();
            assert!((mqm - mq).abs() < 4.0 * se + 1e-3, "m={m}: {mqm} vs {mq}");
        }
        // coupling tightens as m grows
        let spread = |m: u32| {
            sample_qm(&sf, m, &SimConfig::new(9, 0, 10_000))
                .iter()
                .map(|(q, qm)| (qm - q).abs())
                .fold(0.0f64, f64::max)
        };
        assert!(spread(100) < spread(1));
    }

    #[test]
    fn gamma_sampler_moments() {
        let mut rng = SimConfig::new(77, 0, 0).rng();
        let mut gauss = GaussianSource::new();
        for m in [1.0f64, 4.0, 40.0] {
            let n = 400_000;
            let mut sum = 0.0;
            let mut sum2 = 0.0;
            for _ in 0..n {
                let x = gauss.next_gamma(&mut rng, m, 1.0 / m);
                sum += x;
                sum2 += x * x;
            }
            let mean = sum / n as f64;
            let var = sum2 / n as f64 - mean * mean;
            // Gamma(m, 1/m): mean 1, variance 1/m
            assert!((mean - 1.0).abs() < 5.0 * (var / n as f64).sqrt(), "m={m}");
            assert!((var - 1.0 / m).abs() < 0.02 / m, "m={m}: var {var}");
        }
    }

    #[test]
    fn ks_detects_shift() {
        let cfg = SimConfig::new(4, 0, 20_000);
        let mut rng = cfg.rng();
        let samples: Vec<f64> = (0..cfg.n_samples)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let good = ks_distance(&samples, |x| 1.0 - (-x).exp());
        assert!(good < ks_critical_1pct(cfg.n_samples));
        let shifted = ks_distance(&samples, |x| 1.0 - (-(x + 0.1)).exp());
        assert!(shifted > 0.05, "shift not detected: {shifted}");
    }
}
