//! The confluent auxiliary quadratic form.
//!
//! Perturbing the mean components with `ξᵢ`, `ξᵢ² ~ Gamma(m, 1/m)`, turns
//! the MGF into a rational function of `s`:
//!
//! ```text
//! M_m(s) = Π_k [(-λ_k)(1+μ_k/m)^m]^-1 · Π_i (s - 1/λ_i)^(m-1) / (s - β_i)^m
//! ```
//!
//! with `β_i = [λ_i (1 + μ_i/m)]^-1`. Coincident poles and zeros merge (a
//! branch with `μ_i = 0` collapses to a simple pole at `1/λ_i`), leaving the
//! simplified system of distinct poles `β̃ᵢ` and zeros `1/λ̃ⱼ` that the
//! partial-fraction machinery consumes. This module also evaluates the exact
//! original MGF, the closed-form mean-square error between the two variables,
//! and selects the smallest adequate shape parameter `m`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::reduction::SpectralForm;
use crate::specfun::nakagami_mean;

/// Relative tolerance under which two pole/zero locations are considered
/// coincident and merged.
pub const MERGE_TOL: f64 = 1e-9;

/// Simplified rational MGF of the confluent form: distinct poles and zeros
/// with multiplicities, plus the global prefactor in log-sign form.
#[derive(Debug, Clone)]
pub struct PoleZeroSystem {
    /// Shape parameter of the Gamma perturbation.
    pub m: u32,
    /// Dimension `n` of the originating quadratic form.
    pub dim: usize,
    /// `ln |Π_k [(-λ_k)(1+μ_k/m)^m]^-1|`.
    pub log_prefactor: f64,
    /// Sign of the prefactor.
    pub prefactor_sign: i8,
    /// Distinct poles `(β̃ᵢ, pᵢ)`.
    pub poles: Vec<(f64, u32)>,
    /// Distinct zero locations `(1/λ̃ⱼ, qⱼ)`.
    pub zeros: Vec<(f64, u32)>,
    /// Spectral data the system was built from (needed downstream for the
    /// exact rational prefactor).
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

impl PoleZeroSystem {
    /// Total pole multiplicity minus total zero multiplicity; equals `dim`
    /// for every valid system.
    pub fn degree_gap(&self) -> i64 {
        let p: i64 = self.poles.iter().map(|&(_, p)| p as i64).sum();
        let q: i64 = self.zeros.iter().map(|&(_, q)| q as i64).sum();
        p - q
    }

    pub fn total_pole_multiplicity(&self) -> u32 {
        self.poles.iter().map(|&(_, p)| p).sum()
    }
}

/// Builds the simplified pole/zero system of the confluent MGF for shape
/// parameter `m`.
///
/// Each branch contributes a pole at `βᵢ` with multiplicity `m` and a zero
/// at `1/λᵢ` with multiplicity `m-1`; coincident locations are then merged
/// and pole/zero pairs cancelled, so a central branch (`μᵢ = 0`, where
/// `βᵢ = 1/λᵢ` exactly) is left as a simple pole.
pub fn build_pole_zero(sf: &SpectralForm, m: u32) -> Result<PoleZeroSystem> {
    if m < 1 {
        return Err(Error::InvalidInput("shape parameter m must be >= 1".into()));
    }
    let n = sf.dim();
    let mut raw_poles = Vec::with_capacity(n);
    let mut raw_zeros = Vec::with_capacity(n);
    let mut log_pref = 0.0f64;
    let mut sign = 1i8;
    for i in 0..n {
        let lambda = sf.lambda[i];
        let mu = sf.mu[i];
        let beta = 1.0 / (lambda * (1.0 + mu / m as f64));
        raw_poles.push((beta, m));
        if m > 1 {
            raw_zeros.push((1.0 / lambda, m - 1));
        }
        // (1+mu/m)^m as exp(m ln1p(mu/m)) stays finite for any m
        log_pref -= lambda.abs().ln() + m as f64 * (mu / m as f64).ln_1p();
        if lambda > 0.0 {
            // factor (-lambda) contributes a sign flip
            sign = -sign;
        }
    }
    let (poles, zeros) = simplify(raw_poles, raw_zeros)?;
    Ok(PoleZeroSystem {
        m,
        dim: n,
        log_prefactor: log_pref,
        prefactor_sign: sign,
        poles,
        zeros,
        lambda: sf.lambda.clone(),
        mu: sf.mu.clone(),
    })
}

/// Merges coincident values within each list and cancels pole/zero pairs at
/// equal locations by `min(p, q)` multiplicity.
pub fn simplify(
    poles: Vec<(f64, u32)>,
    zeros: Vec<(f64, u32)>,
) -> Result<(Vec<(f64, u32)>, Vec<(f64, u32)>)> {
    let mut poles = merge_coincident(poles);
    let mut zeros = merge_coincident(zeros);
    for (pv, pm) in poles.iter_mut() {
        for (zv, zm) in zeros.iter_mut() {
            if *zm > 0 && close(*pv, *zv) {
                let cancel = (*pm).min(*zm);
                *pm -= cancel;
                *zm -= cancel;
            }
        }
    }
    poles.retain(|&(_, m)| m > 0);
    zeros.retain(|&(_, m)| m > 0);
    if poles.is_empty() {
        return Err(Error::DegenerateSystem);
    }
    Ok((poles, zeros))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= MERGE_TOL * a.abs().max(b.abs())
}

fn merge_coincident(mut list: Vec<(f64, u32)>) -> Vec<(f64, u32)> {
    list.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite locations"));
    let mut out: Vec<(f64, u32)> = Vec::with_capacity(list.len());
    for (v, m) in list {
        match out.last_mut() {
            Some((rep, acc)) if close(*rep, v) => {
                // multiplicity-weighted representative keeps merging stable
                let total = *acc + m;
                *rep = (*rep * *acc as f64 + v * m as f64) / total as f64;
                *acc = total;
            }
            _ => out.push((v, m)),
        }
    }
    out
}

/// Exact MGF of the original form, `Π exp(λᵢμᵢs/(1-λᵢs)) / (1-λᵢs)`,
/// accumulated in log space.
pub fn mgf_original(sf: &SpectralForm, s: Complex64) -> Result<Complex64> {
    let mut log_acc = Complex64::new(0.0, 0.0);
    for i in 0..sf.dim() {
        let den = Complex64::new(1.0, 0.0) - sf.lambda[i] * s;
        if den.norm() < 1e-12 * (1.0 + (sf.lambda[i] * s).norm()) {
            return Err(Error::PoleHit { pole: 1.0 / sf.lambda[i], distance: den.norm() });
        }
        log_acc += sf.lambda[i] * sf.mu[i] * s / den - den.ln();
    }
    Ok(log_acc.exp())
}

/// MGF of the confluent form from its simplified pole/zero system,
/// accumulated in log space.
pub fn mgf_confluent(pz: &PoleZeroSystem, s: Complex64) -> Result<Complex64> {
    let mut log_acc = Complex64::new(pz.log_prefactor, 0.0);
    for &(beta, p) in &pz.poles {
        let d = s - beta;
        if d.norm() < 1e-12 * (1.0 + s.norm()) {
            return Err(Error::PoleHit { pole: beta, distance: d.norm() });
        }
        log_acc -= p as f64 * d.ln();
    }
    for &(z, q) in &pz.zeros {
        log_acc += q as f64 * (s - z).ln();
    }
    let v = log_acc.exp();
    Ok(if pz.prefactor_sign < 0 { -v } else { v })
}

/// Closed-form mean-square error between the original and confluent forms:
/// `Σ λᵢ²μᵢ [4(1 - Γ(m+½)/(√m Γ(m))) + μᵢ/m]`.
pub fn mse(sf: &SpectralForm, m: u32) -> f64 {
    assert!(m >= 1);
    let xi_bar = nakagami_mean(m as f64);
    let mf = m as f64;
    sf.lambda
        .iter()
        .zip(&sf.mu)
        .map(|(&l, &mu)| l * l * mu * (4.0 * (1.0 - xi_bar) + mu / mf))
        .sum()
}

/// Smallest `m <= m_max` whose normalized MSE `mse(m)/E[Q²]` is at or below
/// `target`, by exponential bracketing and binary search (the MSE is
/// strictly decreasing in `m` whenever some `μᵢ > 0`).
pub fn select_m(sf: &SpectralForm, target: f64, m_max: u32) -> Result<u32> {
    assert!(target > 0.0 && m_max >= 1);
    let omega = sf.second_moment();
    let norm = |m: u32| mse(sf, m) / omega;
    if norm(1) <= target {
        return Ok(1);
    }
    let mut lo = 1u32; // norm(lo) > target
    let mut hi = 1u32;
    loop {
        hi = hi.saturating_mul(2).min(m_max);
        if norm(hi) <= target {
            break;
        }
        if hi == m_max {
            return Err(Error::TargetUnreachable { target, achieved: norm(m_max), m_max });
        }
        lo = hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if norm(mid) <= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
