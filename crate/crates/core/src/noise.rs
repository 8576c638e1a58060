//! Experimental imperfection models: global depolarization with
//! purity-based rescaling, and decorrelation of the final local unitaries.

use crate::error::{Error, Result};
use crate::hilbert::{apply_single_qubit, SpinRegister};
use crate::linalg::{adjoint, herm_eig, DenseOperator, OperatorKind};
use crate::protocol::{
    born_probabilities, final_state, masked_moment, sample_outcome, Evolution,
};
use crate::scalar::{cis, cplx, creal, RealScalar};
use crate::spectral::SubsystemMask;
use ndarray::prelude::*;
use ndarray_linalg::Scalar as NdScalar;
use rand::Rng;

/// Global depolarization acting once per driving period with strength `p`:
/// after `n` periods the coherent weight is `α_n = (1-p)^n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepolarizationModel<P: RealScalar> {
    pub p: P,
}

impl<P: RealScalar> DepolarizationModel<P> {
    pub fn new(p: P) -> Result<Self> {
        if p < P::zero() || p > P::one() {
            return Err(Error::InvalidInput("depolarization strength must be in [0,1]".into()));
        }
        Ok(Self { p })
    }

    /// `α_n = (1-p)^n`, non-increasing in `n`.
    pub fn alpha(&self, n: u64) -> P {
        (P::one() - self.p).powi(n as i32)
    }
}

/// Decorrelated final rotations: `v_i = u_i† exp(-i η h_i)` with `h_i`
/// 2x2 GUE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecorrelationModel<P: RealScalar> {
    pub eta: P,
}

impl<P: RealScalar> DecorrelationModel<P> {
    pub fn new(eta: P) -> Result<Self> {
        if eta < P::zero() {
            return Err(Error::InvalidInput("decorrelation strength must be >= 0".into()));
        }
        Ok(Self { eta })
    }
}

/// `(K_A)_dec = α_n K_A + (1-α_n)/D_A²`.
pub fn depolarized_psff<P: RealScalar>(k_a: P, alpha_n: P, d_a: usize) -> P {
    let da2 = P::of((d_a * d_a) as f64);
    alpha_n * k_a + (P::one() - alpha_n) / da2
}

/// Purity of the decohered state after `n` periods,
/// `P_n = α_n² + (1-α_n²)/D`.
pub fn purity_under_depolarization<P: RealScalar>(n: u64, p: P, dim: usize) -> P {
    let alpha = (P::one() - p).powi(n as i32);
    let d = P::of(dim as f64);
    alpha * alpha + (P::one() - alpha * alpha) / d
}

/// Recover `α_n = sqrt((D P_n - 1)/(D - 1))` from a purity measurement.
pub fn alpha_from_purity<P: RealScalar>(p_n: P, dim: usize) -> Result<P> {
    let d = P::of(dim as f64);
    let floor = P::one() / d;
    if p_n < floor - P::of(1e-12) || p_n > P::one() + P::of(1e-12) {
        return Err(Error::InvalidPurity {
            purity: p_n.to_f64().unwrap_or(f64::NAN),
            floor: floor.to_f64().unwrap_or(f64::NAN),
        });
    }
    let num = (d * p_n - P::one()).max(P::zero());
    Ok((num / (d - P::one())).sqrt())
}

/// Exact inverse of [`depolarized_psff`]:
/// `(K_A)_res = ((K_A)_dec - (1-α_n)/D_A²)/α_n`.
pub fn rescale_psff<P: RealScalar>(k_dec: P, alpha_n: P, d_a: usize) -> Result<P> {
    if alpha_n < P::of(1e-6) {
        return Err(Error::UnrecoverableNoise {
            alpha: alpha_n.to_f64().unwrap_or(f64::NAN),
        });
    }
    let da2 = P::of((d_a * d_a) as f64);
    Ok((k_dec - (P::one() - alpha_n) / da2) / alpha_n)
}

/// Sample one measurement outcome from the depolarized final state: the
/// Born distribution becomes `α p(s) + (1-α)/D`.
pub fn depolarized_outcome<P: RealScalar, R: Rng + ?Sized>(
    ideal_probs: &[P],
    alpha_n: P,
    rng: &mut R,
) -> u64 {
    let d = P::of(ideal_probs.len() as f64);
    let mixed: Vec<P> = ideal_probs
        .iter()
        .map(|&p| alpha_n * p + (P::one() - alpha_n) / d)
        .collect();
    sample_outcome(&mixed, rng)
}

/// Final rotations of the decorrelated protocol, `v_i = u_i† e^{-i η h_i}`
/// with fresh 2x2 GUE `h_i` (unit-variance off-diagonals). `η = 0` returns
/// the exact adjoints, bit-identical to the ideal protocol.
pub fn decorrelated_finals<P: RealScalar, R: Rng + ?Sized>(
    locals: &[Array2<P::Cplx>],
    eta: P,
    rng: &mut R,
) -> Vec<Array2<P::Cplx>> {
    locals
        .iter()
        .map(|u| {
            let u_adj = adjoint::<P>(u);
            if eta == P::zero() {
                return u_adj;
            }
            let h = gue_2x2::<P, R>(rng);
            let (e, x) = herm_eig::<P>(&h).expect("2x2 eigensolve");
            let phases = e.mapv(|w| cis::<P>(-w * eta));
            let exp_h = crate::linalg::reconstruct::<P>(&x, &phases);
            u_adj.dot(&exp_h)
        })
        .collect()
}

/// 2x2 GUE with `E|h_01|^2 = 1` and real `N(0,1)` diagonal.
fn gue_2x2<P: RealScalar, R: Rng + ?Sized>(rng: &mut R) -> Array2<P::Cplx> {
    let d0 = P::std_normal(rng);
    let d1 = P::std_normal(rng);
    let re = P::std_normal(rng) * P::of(0.5).sqrt();
    let im = P::std_normal(rng) * P::of(0.5).sqrt();
    let off = cplx::<P>(re.to_f64().unwrap(), im.to_f64().unwrap());
    array![
        [creal::<P>(d0), off],
        [off.conj(), creal::<P>(d1)]
    ]
}

/// One decorrelated shot: ideal initial rotations, decorrelated final
/// rotations, one measurement. With `η = 0` and the same RNG lineage this
/// reproduces the ideal shot bit by bit.
pub fn decorrelated_shot<P: RealScalar, R: Rng + ?Sized>(
    t: &DenseOperator<P>,
    locals: &[Array2<P::Cplx>],
    eta: P,
    noise_rng: &mut R,
    born_rng: &mut R,
) -> Result<u64> {
    if t.kind() != OperatorKind::Unitary {
        return Err(Error::InvalidInput("decorrelated_shot requires a unitary".into()));
    }
    let n = locals.len();
    if 1usize << n != t.dim() {
        return Err(Error::Dimension(format!(
            "{n} local unitaries do not match dimension {}",
            t.dim()
        )));
    }
    let reg = SpinRegister::new(n)?;
    let finals = decorrelated_finals::<P, R>(locals, eta, noise_rng);
    let state = final_state::<P>(reg, &Evolution::Matrix(t.data()), locals, &finals)?;
    let probs = born_probabilities::<P>(&state)?;
    Ok(sample_outcome(&probs, born_rng))
}

// ---------------------------------------------------------------------------
// Simulation drivers
// ---------------------------------------------------------------------------

/// Simulate `m` single-shot runs of the protocol with per-period global
/// depolarization of strength `p`: every run measures the mixed Born
/// distribution `α_n p(s) + (1-α_n)/D`. Shot streams mirror the ideal
/// simulator, so `p = 0` reproduces its records bit for bit.
#[allow(clippy::too_many_arguments)]
pub fn simulate_depolarized_shots<P: RealScalar>(
    model: &crate::hilbert::ModelSpec<P>,
    reg: SpinRegister,
    periods: u64,
    time_index: u64,
    m: usize,
    design: crate::protocol::TwoDesignKind,
    p: P,
    master_seed: u64,
) -> Result<Vec<crate::protocol::ShotRecord<P>>> {
    use crate::protocol::{floquet_shot_state, LocalUnitarySampler, ShotRecord};
    use crate::rng::{stream, SeedLineage};
    use rayon::prelude::*;
    let alpha_n = DepolarizationModel::new(p)?.alpha(periods);
    let sampler = LocalUnitarySampler::<P>::new(design);
    let tau = model.period();
    let time = tau * P::of(periods as f64);
    (0..m as u64)
        .into_par_iter()
        .map(|r| -> Result<ShotRecord<P>> {
            let realization = time_index * m as u64 + r;
            let mut locals_rng = stream(master_seed, &[time_index, r], "shot-locals");
            let mut born_rng = stream(master_seed, &[time_index, r], "shot-born");
            let locals = sampler.draw_n(reg.n_sites(), &mut locals_rng);
            let finals: Vec<_> = locals.iter().map(|u| adjoint::<P>(u)).collect();
            let state = floquet_shot_state(
                model,
                reg,
                periods,
                master_seed,
                realization,
                &locals,
                &finals,
            )?;
            let probs = born_probabilities::<P>(&state)?;
            let bits = depolarized_outcome(&probs, alpha_n, &mut born_rng);
            Ok(ShotRecord {
                realization,
                time,
                bits,
                n_sites: reg.n_sites(),
                lineage: SeedLineage::new(master_seed, realization),
            })
        })
        .collect()
}

/// One point of a decorrelation sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecorrelationPoint<P: RealScalar> {
    pub eta: P,
    /// Relative error `ε̂_η = 1 - (K_A)_η / K_A`.
    pub relative_error: P,
    pub stderr: P,
}

/// Relative error of the PSFF estimate under decorrelated final unitaries,
/// swept over `etas`.
///
/// Each draw samples one evolution operator, one set of local rotations
/// and one set of error generators `h_i`; the exact outcome average
/// `Σ_s p(s)(-2)^{-|s_A|}` is then evaluated for every `η` with those
/// draws held fixed. The pairing removes both the measurement-sampling
/// noise and most of the ensemble noise from the ratio.
#[allow(clippy::too_many_arguments)]
pub fn decorrelation_sweep<P: RealScalar>(
    model: &crate::hilbert::ModelSpec<P>,
    reg: SpinRegister,
    periods: u64,
    mask: &SubsystemMask,
    etas: &[P],
    n_draws: usize,
    design: crate::protocol::TwoDesignKind,
    master_seed: u64,
) -> Result<Vec<DecorrelationPoint<P>>> {
    use crate::protocol::{floquet_shot_state, LocalUnitarySampler};
    use crate::rng::stream;
    use rayon::prelude::*;
    if etas.iter().any(|e| *e < P::zero()) {
        return Err(Error::InvalidInput("decorrelation strengths must be >= 0".into()));
    }
    let sampler = LocalUnitarySampler::<P>::new(design);
    let n = reg.n_sites();
    // values[draw][0] is the ideal expectation, then one entry per eta.
    let values: Result<Vec<Vec<P>>> = (0..n_draws as u64)
        .into_par_iter()
        .map(|k| -> Result<Vec<P>> {
            let mut locals_rng = stream(master_seed, &[k], "deco-locals");
            let mut noise_rng = stream(master_seed, &[k], "deco-generators");
            let locals = sampler.draw_n(n, &mut locals_rng);
            // One set of Hermitian generators per draw, shared by all η.
            let generators: Vec<(Array1<P>, Array2<P::Cplx>)> = (0..n)
                .map(|_| {
                    let h = gue_2x2::<P, _>(&mut noise_rng);
                    let (e, x) = herm_eig::<P>(&h).expect("2x2 eigensolve");
                    (e, x)
                })
                .collect();
            let mut row = Vec::with_capacity(etas.len() + 1);
            for (which, eta) in std::iter::once(&P::zero()).chain(etas.iter()).enumerate() {
                let finals: Vec<Array2<P::Cplx>> = locals
                    .iter()
                    .zip(&generators)
                    .map(|(u, (e, x))| {
                        let u_adj = adjoint::<P>(u);
                        if *eta == P::zero() {
                            u_adj
                        } else {
                            let phases = e.mapv(|w| cis::<P>(-w * *eta));
                            u_adj.dot(&crate::linalg::reconstruct::<P>(x, &phases))
                        }
                    })
                    .collect();
                let state =
                    floquet_shot_state(model, reg, periods, master_seed, k, &locals, &finals)?;
                let probs = born_probabilities::<P>(&state)?;
                row.push(masked_moment(&probs, mask));
                let _ = which;
            }
            Ok(row)
        })
        .collect();
    let values = values?;
    let nf = P::of(n_draws as f64);
    let ideal_mean = values.iter().map(|r| r[0]).sum::<P>() / nf;
    let mut out = Vec::with_capacity(etas.len());
    for (j, &eta) in etas.iter().enumerate() {
        let diffs: Vec<P> = values.iter().map(|r| r[0] - r[j + 1]).collect();
        let mean_diff = diffs.iter().copied().sum::<P>() / nf;
        let var = if n_draws > 1 {
            diffs
                .iter()
                .map(|&d| (d - mean_diff) * (d - mean_diff))
                .sum::<P>()
                / P::of((n_draws - 1) as f64)
        } else {
            P::zero()
        };
        out.push(DecorrelationPoint {
            eta,
            relative_error: mean_diff / ideal_mean,
            stderr: (var / nf).sqrt() / ideal_mean.abs(),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Density-matrix channel oracle
// ---------------------------------------------------------------------------

/// Exact single-run expectation `E_QM[(-2)^{-|s_A|}]` for fixed rotations
/// under per-period depolarization, simulated at the density-matrix level:
/// `ρ → V ρ V†` then `ρ → (1-p) ρ + p 1/D` for each of the `n` periods.
///
/// Oracle path for validating the closed-form noise transforms; capped at
/// 6 sites.
pub fn depolarized_expectation_density_matrix<P: RealScalar>(
    v: &DenseOperator<P>,
    periods: u64,
    p: P,
    locals: &[Array2<P::Cplx>],
    mask: &SubsystemMask,
) -> Result<(P, P)> {
    let n = locals.len();
    if n > 6 {
        return Err(Error::EnumerationTooLarge { n_sites: n, cap: 6 });
    }
    if 1usize << n != v.dim() {
        return Err(Error::Dimension("locals do not match dimension".into()));
    }
    let reg = SpinRegister::new(n)?;
    let dim = v.dim();
    // ρ = U |0..0><0..0| U†.
    let mut psi = Array1::<P::Cplx>::zeros(dim);
    psi[0] = cplx::<P>(1.0, 0.0);
    {
        let s = psi.as_slice_mut().unwrap();
        for (site0, u) in locals.iter().enumerate() {
            apply_single_qubit::<P>(u, site0 + 1, reg, s);
        }
    }
    let mut rho = Array2::<P::Cplx>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            rho[[i, j]] = psi[i] * psi[j].conj();
        }
    }
    // n periods of unitary evolution interleaved with the channel.
    let vd = adjoint::<P>(v.data());
    let inv_d = P::one() / P::of(dim as f64);
    for _ in 0..periods {
        rho = v.data().dot(&rho).dot(&vd);
        let keep = creal::<P>(P::one() - p);
        rho.mapv_inplace(|z| z * keep);
        for i in 0..dim {
            rho[[i, i]] = rho[[i, i]] + creal::<P>(p * inv_d);
        }
    }
    // Purity of the decohered state.
    let mut purity = P::zero();
    for i in 0..dim {
        for j in 0..dim {
            purity += (rho[[i, j]] * rho[[j, i]]).re();
        }
    }
    // Final rotation U† and the diagonal expectation.
    let mut u_full = Array2::<P::Cplx>::eye(dim);
    for (site0, u) in locals.iter().enumerate() {
        let mut m = u_full;
        // Left-apply the local adjoint to each column via row pairing.
        let ua = adjoint::<P>(u);
        for mut col in m.columns_mut() {
            let mut tmp: Vec<P::Cplx> = col.iter().copied().collect();
            apply_single_qubit::<P>(&ua, site0 + 1, reg, &mut tmp);
            for (dst, src) in col.iter_mut().zip(tmp) {
                *dst = src;
            }
        }
        u_full = m;
    }
    let rotated = u_full.dot(&rho).dot(&adjoint::<P>(&u_full));
    let probs: Vec<P> = (0..dim).map(|s| rotated[[s, s]].re()).collect();
    Ok((masked_moment(&probs, mask), purity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{sample_local_unitaries, TwoDesignKind};
    use crate::rng::stream;
    use crate::{rmt, spectral};

    #[test]
    fn depolarized_psff_limits() {
        assert_eq!(depolarized_psff(0.05f64, 1.0, 4), 0.05);
        let fully_mixed = depolarized_psff(0.05f64, 0.0, 4);
        assert!((fully_mixed - 1.0 / 16.0).abs() < 1e-15);
        // Reference numbers: p = 0.03, n = 10, K_A = 0.05, D_A = 4.
        let alpha = DepolarizationModel::new(0.03f64).unwrap().alpha(10);
        let v = depolarized_psff(0.05, alpha, 4);
        let want = 0.97f64.powi(10) * 0.05 + (1.0 - 0.97f64.powi(10)) / 16.0;
        assert!((v - want).abs() < 1e-15);
    }

    #[test]
    fn purity_and_alpha_round_trip() {
        assert_eq!(purity_under_depolarization(0, 0.1f64, 16), 1.0);
        let late = purity_under_depolarization(5000, 0.1f64, 16);
        assert!((late - 1.0 / 16.0).abs() < 1e-10);
        for n in [0u64, 1, 5, 20] {
            let p = purity_under_depolarization(n, 0.03f64, 16);
            let alpha = alpha_from_purity(p, 16).unwrap();
            assert!((alpha - 0.97f64.powi(n as i32)).abs() < 1e-12);
        }
        assert!(alpha_from_purity(0.9 / 16.0, 16).is_err());
    }

    #[test]
    fn rescale_inverts_depolarization() {
        let mut rng = stream(4, &[0], "noise-roundtrip");
        for _ in 0..20 {
            let k: f64 = f64::uniform(&mut rng, 0.0, 1.0);
            let alpha = f64::uniform(&mut rng, 1e-3, 1.0);
            let dec = depolarized_psff(k, alpha, 8);
            let res = rescale_psff(dec, alpha, 8).unwrap();
            assert!((res - k).abs() < 1e-12);
        }
        assert!(rescale_psff(0.1f64, 1e-9, 4).is_err());
        assert_eq!(rescale_psff(0.37f64, 1.0, 4).unwrap(), 0.37);
    }

    #[test]
    fn alpha_monotone_in_n() {
        let m = DepolarizationModel::new(0.05f64).unwrap();
        let mut prev = 1.0;
        for n in 0..50 {
            let a = m.alpha(n);
            assert!(a <= prev + 1e-15 && a > 0.0);
            prev = a;
        }
    }

    #[test]
    fn channel_oracle_matches_closed_form_per_draw() {
        // For fixed (T, U) the conditional expectation obeys the same
        // affine law: E_dec = α E_ideal + (1-α)/D_A².
        let mut rng = stream(11, &[3], "channel-oracle");
        let n = 3usize;
        let reg = SpinRegister::new(n).unwrap();
        let v = rmt::sample::<f64, _>(rmt::EnsembleKind::Cue, 8, &mut rng).unwrap();
        let mask = spectral::SubsystemMask::centered(n, 2).unwrap();
        let p = 0.05;
        let periods = 4u64;
        let alpha = DepolarizationModel::new(p).unwrap().alpha(periods);
        for _ in 0..5 {
            let locals =
                sample_local_unitaries::<f64, _>(TwoDesignKind::CliffordGroup1Q, n, &mut rng);
            let finals: Vec<_> = locals.iter().map(|u| adjoint::<f64>(u)).collect();
            let (dec, purity) =
                depolarized_expectation_density_matrix(&v, periods, p, &locals, &mask).unwrap();
            // Ideal conditional expectation for the same draw.
            let t = crate::hilbert::floquet_power(&v, periods).unwrap();
            let state =
                final_state::<f64>(reg, &Evolution::Matrix(t.data()), &locals, &finals).unwrap();
            let probs = born_probabilities(&state).unwrap();
            let ideal = masked_moment(&probs, &mask);
            let want = depolarized_psff(ideal, alpha, mask.d_a());
            assert!(
                (dec - want).abs() < 1e-10,
                "channel {dec} vs closed form {want}"
            );
            let want_purity = purity_under_depolarization(periods, p, 8);
            assert!((purity - want_purity).abs() < 1e-10);
        }
    }

    #[test]
    fn eta_zero_is_bit_identical_to_ideal_shot() {
        let mut rng = stream(7, &[0], "deco-ideal");
        let v = rmt::sample::<f64, _>(rmt::EnsembleKind::Cue, 8, &mut rng).unwrap();
        for trial in 0..20u64 {
            let mut locals_rng = stream(7, &[1, trial], "deco-locals");
            let locals = sample_local_unitaries::<f64, _>(
                TwoDesignKind::CliffordGroup1Q,
                3,
                &mut locals_rng,
            );
            let mut born_a = stream(7, &[2, trial], "deco-born");
            let mut born_b = stream(7, &[2, trial], "deco-born");
            let mut noise_rng = stream(7, &[3, trial], "deco-noise");
            let ideal = crate::protocol::run_shot(&v, &locals, &mut born_a).unwrap();
            let deco = decorrelated_shot(&v, &locals, 0.0, &mut noise_rng, &mut born_b).unwrap();
            assert_eq!(ideal, deco);
        }
    }
}
