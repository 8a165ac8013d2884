//! Maximal ratio combining over correlated Rician fading, analyzed through
//! the quadratic-form machinery.
//!
//! The post-combining SNR is `γ = γ̄ g†g` with `g ~ CN(ḡ, Σ)`: a positive-
//! definite non-central quadratic form with `A = I`. Branch `i` has Rician
//! factor `Kᵢ` (line-of-sight to scatter power ratio) and the correlation
//! matrix is exponential, `R_{i,j} = ρ^{|i-j|}`.
//!
//! Two covariance conventions are provided. The default scales rows and
//! columns by `1/√(Kᵢ+1)`, which makes every branch unit power,
//! `E[|gᵢ|²] = Kᵢ/(Kᵢ+1) + 1/(Kᵢ+1) = 1`, so `γ̄` is the average branch
//! SNR. The `PaperLiteral` convention uses `Σ_{i,j} = √(1/(KᵢKⱼ)) R_{i,j}`
//! instead; it is kept for comparison but is not unit power and is
//! undefined at `K = 0`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::confluent::{build_pole_zero, select_m};
use crate::distribution::ClosedFormDistribution;
use crate::error::{Error, Result};
use crate::real::{Real, DEFAULT_PRECISION_BITS};
use crate::reduction::{reduce, QuadraticForm, SpectralForm};
use crate::residues::{rationalize, residues_recursive, DEFAULT_MAX_DENOMINATOR};
use crate::specfun::{gauss_2f1_real, q_function};

/// How the channel covariance is assembled from the Rician factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovarianceConvention {
    /// `Σ_{i,j} = R_{i,j} / √((Kᵢ+1)(Kⱼ+1))`: every branch has unit power.
    #[default]
    UnitPower,
    /// `Σ_{i,j} = √(1/(KᵢKⱼ)) R_{i,j}` as printed in the source analysis;
    /// not unit power, rejects `K = 0`.
    PaperLiteral,
}

/// Choice of the confluence shape parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShapeSelection {
    Fixed(u32),
    /// Smallest m with normalized MSE at or below the target.
    Auto { target_nmse: f64, m_max: u32 },
}

/// A correlated-Rician MRC receiver scenario.
#[derive(Debug, Clone)]
pub struct MrcScenario {
    /// Branch count.
    pub p: usize,
    /// Rician K factor per branch, `>= 0`.
    pub k: Vec<f64>,
    /// Exponential correlation parameter, `|ρ| < 1`.
    pub rho: f64,
    /// Square QAM order (4, 16, 64, 256).
    pub m_qam: u32,
    pub shape: ShapeSelection,
    /// Outage threshold SNR (linear).
    pub gamma_th: f64,
    /// Average-SNR sweep grid (linear).
    pub gamma_bar_grid: Vec<f64>,
    pub covariance: CovarianceConvention,
    pub precision_bits: usize,
}

impl MrcScenario {
    pub fn new(p: usize, k: Vec<f64>, rho: f64, m_qam: u32) -> Result<Self> {
        if p == 0 || k.len() != p {
            return Err(Error::InvalidInput(format!(
                "branch count {p} does not match {} K factors",
                k.len()
            )));
        }
        if !(rho.abs() < 1.0) {
            return Err(Error::InvalidInput(format!("|rho| must be < 1, got {rho}")));
        }
        for (i, &ki) in k.iter().enumerate() {
            if !(ki >= 0.0) {
                return Err(Error::InvalidK { index: i, reason: format!("negative K = {ki}") });
            }
        }
        qam_weights(m_qam)?; // validates the constellation order
        Ok(MrcScenario {
            p,
            k,
            rho,
            m_qam,
            shape: ShapeSelection::Auto { target_nmse: 1e-2, m_max: 100_000 },
            gamma_th: 1.0,
            gamma_bar_grid: Vec::new(),
            covariance: CovarianceConvention::UnitPower,
            precision_bits: DEFAULT_PRECISION_BITS,
        })
    }

    pub fn with_shape(mut self, shape: ShapeSelection) -> Self {
        self.shape = shape;
        self
    }

    pub fn with_covariance(mut self, convention: CovarianceConvention) -> Self {
        self.covariance = convention;
        self
    }

    pub fn with_precision(mut self, bits: usize) -> Self {
        self.precision_bits = bits;
        self
    }

    /// The channel power `g†g` as a quadratic form: `A = I`,
    /// `v̄ᵢ = √(Kᵢ/(Kᵢ+1))`, covariance per the configured convention.
    pub fn build_channel(&self) -> Result<QuadraticForm> {
        let p = self.p;
        let mut sigma: DMatrix<Complex64> = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                let r = self.rho.powi((i as i32 - j as i32).abs());
                let scale = match self.covariance {
                    CovarianceConvention::UnitPower => {
                        1.0 / ((self.k[i] + 1.0) * (self.k[j] + 1.0)).sqrt()
                    }
                    CovarianceConvention::PaperLiteral => {
                        if self.k[i] == 0.0 || self.k[j] == 0.0 {
                            return Err(Error::InvalidK {
                                index: if self.k[i] == 0.0 { i } else { j },
                                reason: "paper-literal covariance diverges at K = 0".into(),
                            });
                        }
                        1.0 / (self.k[i] * self.k[j]).sqrt()
                    }
                };
                sigma[(i, j)] = Complex64::new(r * scale, 0.0);
            }
        }
        let g_bar = DVector::from_iterator(
            p,
            self.k
                .iter()
                .map(|&ki| Complex64::new((ki / (ki + 1.0)).sqrt(), 0.0)),
        );
        QuadraticForm::new(DMatrix::identity(p, p), sigma, g_bar)
    }
}

/// Weights of the exact Gray-coded square-QAM bit error probability,
/// `P_b(γ) = L Σ_{i=1}^{L-1} ω(i) Q((2i-1) √(3γ/(M-1)))`, `L = √M`.
#[derive(Debug, Clone)]
pub struct QamWeights {
    pub m_qam: u32,
    pub l: u32,
    pub w: Vec<f64>,
}

impl QamWeights {
    /// Conditional BER at instantaneous SNR `γ`.
    pub fn conditional_ber(&self, gamma: f64) -> f64 {
        let a = (3.0 * gamma / (self.m_qam as f64 - 1.0)).sqrt();
        self.l as f64
            * self
                .w
                .iter()
                .enumerate()
                .map(|(idx, &w)| w * q_function((2 * idx + 1) as f64 * a))
                .sum::<f64>()
    }
}

fn gray(s: u32) -> u32 {
    s ^ (s >> 1)
}

/// Derives the QAM weights by exact enumeration of the Gray-labelled PAM
/// decision regions: each axis is an L-PAM with levels `2s - L + 1`; the
/// probability of decoding `s'` given `s` is a difference of Q-functions at
/// odd multiples of the half-spacing, and averaging bit disagreements over
/// symbols and bit positions collects the Q-coefficients.
pub fn qam_weights(m_qam: u32) -> Result<QamWeights> {
    let l: u32 = match m_qam {
        4 => 2,
        16 => 4,
        64 => 8,
        256 => 16,
        other => return Err(Error::UnsupportedM(other)),
    };
    let bits = l.trailing_zeros(); // log2(L)
    // coefficient of Q(o · a) indexed by (o-1)/2, plus the constant part
    let mut coeff = vec![0.0f64; (2 * l) as usize];
    let mut constant = 0.0f64;
    let level = |s: u32| 2.0 * s as f64 - (l as f64 - 1.0);
    for b in 0..bits {
        for s in 0..l {
            for s_dec in 0..l {
                if (gray(s) ^ gray(s_dec)) & (1 << b) == 0 {
                    continue;
                }
                // region of s_dec relative to the sent level, in half-spacings
                let weight = 1.0 / (l as f64 * bits as f64);
                let hi_edge = if s_dec == l - 1 {
                    None
                } else {
                    Some(level(s_dec) + 1.0 - level(s))
                };
                let lo_edge = if s_dec == 0 {
                    None
                } else {
                    Some(level(s_dec) - 1.0 - level(s))
                };
                // P(region) = Q(lo) - Q(hi), with Q(-x) = 1 - Q(x)
                fn add_q(coeff: &mut [f64], constant: &mut f64, offset: f64, amount: f64) {
                    let o = offset.round() as i64;
                    debug_assert!(o % 2 != 0);
                    if o >= 0 {
                        coeff[((o - 1) / 2) as usize] += amount;
                    } else {
                        *constant += amount;
                        coeff[((-o - 1) / 2) as usize] -= amount;
                    }
                }
                match lo_edge {
                    Some(lo) => add_q(&mut coeff, &mut constant, lo, weight),
                    None => constant += weight,
                }
                if let Some(hi) = hi_edge {
                    add_q(&mut coeff, &mut constant, hi, -weight);
                }
            }
        }
    }
    debug_assert!(constant.abs() < 1e-12, "constant part {constant}");
    // trim trailing zeros down to L-1 coefficients
    let mut w: Vec<f64> = coeff.iter().take(l as usize - 1).map(|c| c / l as f64).collect();
    for (idx, c) in coeff.iter().enumerate().skip(l as usize - 1) {
        assert!(
            c.abs() < 1e-12,
            "unexpected Q-coefficient at odd multiple {}: {c}",
            2 * idx + 1
        );
    }
    while w.len() < l as usize - 1 {
        w.push(0.0);
    }
    Ok(QamWeights { m_qam, l, w })
}

/// Gray-mapped square-QAM constellation for symbol-level simulation.
#[derive(Debug, Clone)]
pub struct GrayQam {
    l: u32,
    /// per-axis amplitude scale giving unit average symbol energy
    scale: f64,
}

impl GrayQam {
    pub fn new(m_qam: u32) -> Result<Self> {
        let l = qam_weights(m_qam)?.l;
        let lf = l as f64;
        // E[u^2] per axis over levels 2s-L+1 is (L^2-1)/3
        let scale = (3.0 / (2.0 * (lf * lf - 1.0))).sqrt();
        Ok(GrayQam { l, scale })
    }

    pub fn bits_per_symbol(&self) -> u32 {
        2 * self.l.trailing_zeros()
    }

    pub fn random_symbol(&self, rng: &mut ChaCha12Rng) -> (u32, u32) {
        (rng.gen_range(0..self.l), rng.gen_range(0..self.l))
    }

    pub fn point(&self, si: u32, sq: u32) -> Complex64 {
        let level = |s: u32| (2.0 * s as f64 - (self.l as f64 - 1.0)) * self.scale;
        Complex64::new(level(si), level(sq))
    }

    pub fn detect(&self, y: Complex64) -> (u32, u32) {
        let slice = |v: f64| {
            let s = ((v / self.scale + self.l as f64 - 1.0) / 2.0).round();
            s.clamp(0.0, self.l as f64 - 1.0) as u32
        };
        (slice(y.re), slice(y.im))
    }

    pub fn bit_errors(&self, si: u32, sq: u32, di: u32, dq: u32) -> u32 {
        (gray(si) ^ gray(di)).count_ones() + (gray(sq) ^ gray(dq)).count_ones()
    }
}

/// Prepared analysis of one scenario: spectral form, selected shape
/// parameter, confluent distribution of the unit-SNR channel power, and
/// QAM weights. Outage and BER evaluate per grid point against this state.
pub struct MrcAnalysis {
    pub scenario: MrcScenario,
    pub spectral: SpectralForm,
    pub m: u32,
    /// Distribution of `Q_m ≈ g†g` (γ̄ = 1); scaled per query.
    pub dist: ClosedFormDistribution,
    pub weights: QamWeights,
}

impl MrcAnalysis {
    pub fn new(scenario: MrcScenario) -> Result<Self> {
        let qf = scenario.build_channel()?;
        let spectral = reduce(&qf)?;
        let m = match scenario.shape {
            ShapeSelection::Fixed(m) => m,
            ShapeSelection::Auto { target_nmse, m_max } => {
                select_m(&spectral, target_nmse, m_max)?
            }
        };
        let pz = build_pole_zero(&spectral, m)?;
        let rpz = rationalize(&pz, DEFAULT_MAX_DENOMINATOR)?;
        let rt = residues_recursive(&rpz);
        let dist = ClosedFormDistribution::from_residues(&rt, scenario.precision_bits);
        let weights = qam_weights(scenario.m_qam)?;
        Ok(MrcAnalysis { scenario, spectral, m, dist, weights })
    }

    /// Outage probability `P(γ̄ Q_m < γ_th)`: the confluent CDF of the
    /// scaled SNR variable at the threshold.
    pub fn outage(&self, gamma_bar: f64) -> Result<f64> {
        assert!(gamma_bar > 0.0);
        self.dist.scale(gamma_bar).cdf(self.scenario.gamma_th)
    }

    /// Average BER of Gray square-QAM: the closed triple sum over poles,
    /// multiplicity orders, and constellation weights,
    ///
    /// ```text
    /// Σ_{i,j,k} L ω(k) α_{i,j} [ Γ(j)/(2β̃ᵢ^j)
    ///     - δ_k Γ(j+½)/β̃ᵢ^{j+½} √(γ̄/2π) ₂F₁(½, j+½; 3/2; -δ_k²γ̄/(2β̃ᵢ)) ]
    /// ```
    ///
    /// accumulated in extended precision (the bracket is a difference of
    /// nearly equal quantities at high SNR, and the `α` alternate in sign).
    pub fn ber(&self, gamma_bar: f64) -> Result<f64> {
        assert!(gamma_bar > 0.0);
        let prec = self.dist.precision_bits();
        let budget = prec as i64 - 64;
        let gamma_r = Real::from_f64(gamma_bar, prec);
        let sqrt_gamma_2pi = gamma_r
            .div(&Real::pi(prec).mul(&Real::from_f64(2.0, prec)))
            .sqrt();
        let half = Real::from_f64(0.5, prec);
        let sqrt_pi = Real::pi(prec).sqrt();
        let l = self.weights.l as f64;
        let m_qam = self.weights.m_qam as f64;

        let mut sum = Real::zero(prec);
        let mut max_exp = i64::MIN;
        for view in self.dist.pole_views() {
            let beta = view.pole;
            let inv_sqrt_beta = beta.sqrt().recip();
            for (k_idx, &w) in self.weights.w.iter().enumerate() {
                let delta = (2 * k_idx + 1) as f64 * (3.0 / (m_qam - 1.0)).sqrt();
                let weight = Real::from_f64(l * w, prec);
                // z = -delta^2 gamma_bar / (2 beta)
                let z = Real::from_f64(-delta * delta / 2.0, prec)
                    .mul(&gamma_r)
                    .div(beta);
                let delta_r = Real::from_f64(delta, prec);
                // ladders over j: Γ(j), Γ(j+1/2), β^j
                let mut gamma_j = Real::one(prec); // Γ(1)
                let mut gamma_j_half = sqrt_pi.mul(&half); // Γ(3/2)
                let mut beta_pow = Real::one(prec);
                for (jm1, alpha) in view.alpha.iter().enumerate() {
                    let j = jm1 + 1;
                    if jm1 > 0 {
                        let jf = Real::from_f64(jm1 as f64, prec);
                        gamma_j = gamma_j.mul(&jf); // Γ(j) = (j-1)!
                        gamma_j_half = gamma_j_half.mul(&jf.add(&half)); // Γ(j+1/2)
                    }
                    beta_pow = beta_pow.mul(beta); // β^j
                    let f = gauss_2f1_real(0.5, j as f64 + 0.5, 1.5, &z)?;
                    let first = gamma_j.div(&beta_pow).mul(&half);
                    let second = delta_r
                        .mul(&gamma_j_half)
                        .div(&beta_pow)
                        .mul(&inv_sqrt_beta)
                        .mul(&sqrt_gamma_2pi)
                        .mul(&f);
                    let term = weight.mul(alpha).mul(&first.sub(&second));
                    max_exp = max_exp.max(term.exponent());
                    sum = sum.add(&term);
                }
            }
        }
        let cancelled = max_exp.saturating_sub(sum.exponent());
        if cancelled > budget {
            return Err(Error::PrecisionLoss { cancelled_bits: cancelled, budget_bits: budget });
        }
        Ok(sum.to_f64())
    }

    /// BER by direct quadrature of the conditional BER against the scaled
    /// confluent density: the independent cross-check path.
    pub fn ber_by_quadrature(&self, gamma_bar: f64) -> Result<f64> {
        let scaled = self.dist.scale(gamma_bar);
        let hi = scaled.support_hi();
        crate::distribution::integrate(
            &|g| Ok(self.weights.conditional_ber(g) * scaled.pdf(g)?),
            0.0,
            hi,
            1e-10,
        )
    }
}
