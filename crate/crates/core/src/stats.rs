//! Estimator variances, signal-to-noise ratios and measurement budgets.

use crate::error::{Error, Result};
use crate::protocol::{shot_value, ShotRecord};
use crate::rmt::{psff_analytic, AnalyticParams, EnsembleKind};
use crate::scalar::RealScalar;
use crate::spectral::SubsystemMask;
use std::collections::BTreeMap;

/// Variance of the single-shot PSFF estimator and derived error measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceReport<P: RealScalar> {
    /// `Var[K̂_A] = σ_A²/M`.
    pub variance: P,
    /// Single-shot standard deviation `σ_A = sqrt(M · Var)`.
    pub sigma_a: P,
    /// Expected relative error `ℰ_A = σ_A/(K_A √M)`.
    pub relative_error: P,
    pub m: usize,
    pub mask: SubsystemMask,
}

/// Variance formula
/// `Var[K̂_A] = (1/M) (2^{-N_A} Σ_{B ⊆ A} K_B − K_A²)`,
/// fed with exact PSFF values for every subset of `A` (including `K_∅ = 1`).
pub fn psff_variance<P: RealScalar>(
    k_by_subset: &BTreeMap<SubsystemMask, P>,
    mask: &SubsystemMask,
    m: usize,
) -> Result<VarianceReport<P>> {
    if m == 0 {
        return Err(Error::InvalidInput("need at least one measurement".into()));
    }
    let mut sum = P::zero();
    for b in mask.subsets() {
        let k_b = k_by_subset
            .get(&b)
            .ok_or_else(|| Error::MissingSubset(b.bitstring()))?;
        sum += *k_b;
    }
    let k_a = *k_by_subset
        .get(mask)
        .ok_or_else(|| Error::MissingSubset(mask.bitstring()))?;
    let n_a = mask.n_in_a();
    let sigma2 = sum / P::of((1u64 << n_a) as f64) - k_a * k_a;
    let sigma2 = sigma2.max(P::zero());
    let mf = P::of(m as f64);
    let sigma_a = sigma2.sqrt();
    Ok(VarianceReport {
        variance: sigma2 / mf,
        sigma_a,
        relative_error: if k_a != P::zero() {
            sigma_a / (k_a * mf.sqrt())
        } else {
            P::infinity()
        },
        m,
        mask: *mask,
    })
}

/// Unbiased sample variance of the single-shot values `(-2)^{-|s_A|}`.
pub fn empirical_variance<P: RealScalar>(
    shots: &[ShotRecord<P>],
    mask: &SubsystemMask,
) -> Result<VarianceReport<P>> {
    if shots.is_empty() {
        return Err(Error::EmptyShots);
    }
    let m = shots.len();
    let mut mean = P::zero();
    let mut m2 = P::zero();
    for (k, s) in shots.iter().enumerate() {
        let v = shot_value::<P>(mask.weight_in_a(s.bits));
        let delta = v - mean;
        mean += delta / P::of((k + 1) as f64);
        m2 += delta * (v - mean);
    }
    let sigma2 = if m > 1 {
        m2 / P::of((m - 1) as f64)
    } else {
        P::zero()
    };
    let mf = P::of(m as f64);
    let sigma_a = sigma2.sqrt();
    Ok(VarianceReport {
        variance: sigma2 / mf,
        sigma_a,
        relative_error: if mean != P::zero() {
            sigma_a / (mean.abs() * mf.sqrt())
        } else {
            P::infinity()
        },
        m,
        mask: *mask,
    })
}

/// Signal-to-noise ratio of the ramp slope between two times with
/// independent datasets:
/// `SNR = √M (K_A(t₂) − K_A(t₁)) / (σ_A(t₂) + σ_A(t₁))`.
#[allow(clippy::too_many_arguments)]
pub fn snr_slope<P: RealScalar>(
    k_t1: P,
    k_t2: P,
    sigma_t1: P,
    sigma_t2: P,
    m: usize,
    t1: P,
    t2: P,
) -> Result<P> {
    if t2 <= t1 {
        return Err(Error::InvalidInput("need t2 > t1".into()));
    }
    let denom = sigma_t1 + sigma_t2;
    if denom <= P::zero() {
        return Err(Error::InvalidInput("zero noise denominator".into()));
    }
    Ok(P::of(m as f64).sqrt() * (k_t2 - k_t1) / denom)
}

/// Measurement budget from the Chebyshev bound: `M ≥ Ṽ_A / (δ ε²)` runs
/// guarantee relative error `≤ ε` with probability `≥ 1 − δ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetReport<P: RealScalar> {
    pub m_required: u64,
    pub epsilon: P,
    pub delta: P,
    pub v_tilde: P,
}

/// `M = ceil(Ṽ_A / (δ ε²))`, at least 1.
pub fn measurement_budget<P: RealScalar>(v_tilde: P, epsilon: P, delta: P) -> Result<BudgetReport<P>> {
    if epsilon <= P::zero() || delta <= P::zero() || delta >= P::one() {
        return Err(Error::InvalidInput(
            "need epsilon > 0 and failure probability in (0,1)".into(),
        ));
    }
    if v_tilde < P::zero() {
        return Err(Error::InvalidInput("rescaled variance must be >= 0".into()));
    }
    let raw = v_tilde / (delta * epsilon * epsilon);
    let m = raw.ceil().to_f64().unwrap_or(1.0).max(1.0) as u64;
    Ok(BudgetReport {
        m_required: m,
        epsilon,
        delta,
        v_tilde,
    })
}

/// Rescaled variance `Ṽ_A = σ_A²/K_A²` of the CUE protocol at the dip time
/// `t = τ`, computed by composing the variance formula with the exact CUE
/// PSFF of every subset. Equals `10^{N_A} − 1`.
pub fn cue_dip_vtilde<P: RealScalar>(n_a: usize) -> Result<P> {
    if n_a == 0 {
        return Ok(P::zero());
    }
    // Use a register consisting of A itself; the dip identity
    // K_B(τ) = 1/D_B'² holds for any embedding dimension.
    let dim = 1usize << n_a;
    let params = AnalyticParams::circular(dim, P::one())?;
    let mask = SubsystemMask::full(n_a);
    let mut map = BTreeMap::new();
    for b in mask.subsets() {
        let k = if b.is_empty() {
            P::one()
        } else {
            psff_analytic(EnsembleKind::Cue, &params, b.d_a(), b.d_b(), P::one())?
        };
        map.insert(b, k);
    }
    let report = psff_variance(&map, &mask, 1)?;
    let k_a = map[&mask];
    Ok(report.sigma_a * report.sigma_a / (k_a * k_a))
}
