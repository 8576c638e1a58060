//! Wigner-Dyson random-matrix ensembles: samplers and the closed-form
//! SFF/PSFF curves used as analytic baselines.

use crate::error::{Error, Result};
use crate::linalg::DenseOperator;
use crate::scalar::{cis, cplx, creal, RealScalar};
use ndarray::prelude::*;
use ndarray_linalg::{QRSquare, Scalar as NdScalar};
use rand::Rng;

/// The four ensembles used here. The symplectic class is not relevant for
/// the models treated by this crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    Gue,
    Goe,
    Cue,
    Coe,
}

/// Symmetry class of an ensemble: unitary (β = 2) or orthogonal (β = 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymmetryClass {
    Unitary,
    Orthogonal,
}

impl EnsembleKind {
    pub fn class(self) -> SymmetryClass {
        match self {
            EnsembleKind::Gue | EnsembleKind::Cue => SymmetryClass::Unitary,
            EnsembleKind::Goe | EnsembleKind::Coe => SymmetryClass::Orthogonal,
        }
    }

    /// Hamiltonian (Gaussian) or Floquet (circular) dynamics?
    pub fn is_circular(self) -> bool {
        matches!(self, EnsembleKind::Cue | EnsembleKind::Coe)
    }
}

impl SymmetryClass {
    /// Dyson index β.
    pub fn beta(self) -> u8 {
        match self {
            SymmetryClass::Orthogonal => 1,
            SymmetryClass::Unitary => 2,
        }
    }
}

/// Inputs for the analytic curves.
///
/// `t_heisenberg` is the plateau-onset time. For circular ensembles driven
/// with period τ it equals `D·τ`; for Gaussian ensembles the matrix-width
/// convention does not pin it, so it is treated as a rescale parameter fit
/// from mean level spacings (see [`heisenberg_time_from_spacing`]).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticParams<P: RealScalar> {
    pub dim: usize,
    pub t_heisenberg: P,
}

impl<P: RealScalar> AnalyticParams<P> {
    pub fn new(dim: usize, t_heisenberg: P) -> Result<Self> {
        if t_heisenberg <= P::zero() {
            return Err(Error::InvalidInput("Heisenberg time must be positive".into()));
        }
        Ok(Self { dim, t_heisenberg })
    }

    /// Circular-ensemble convention `t_H = D·τ`.
    pub fn circular(dim: usize, tau: P) -> Result<Self> {
        Self::new(dim, P::of(dim as f64) * tau)
    }
}

/// `t_H = 2π / ⟨spacing⟩` from a sorted spectrum. This is the fit
/// procedure used when matching Gaussian-ensemble curves to model data; the
/// paper fixes the scale by matching plateau onsets, which for a flat
/// density of states is the same thing.
pub fn heisenberg_time_from_spacing<P: RealScalar>(sorted_energies: &[P]) -> Result<P> {
    if sorted_energies.len() < 2 {
        return Err(Error::InvalidInput(
            "need at least two levels for a mean spacing".into(),
        ));
    }
    let n = sorted_energies.len();
    let span = sorted_energies[n - 1] - sorted_energies[0];
    if span <= P::zero() {
        return Err(Error::InvalidInput("degenerate spectrum has no spacing scale".into()));
    }
    let mean_spacing = span / P::of((n - 1) as f64);
    Ok(P::of(2.0) * P::PI() / mean_spacing)
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// Draw one matrix from `kind`.
///
/// Gaussian ensembles are normalized so the semicircle has radius 2
/// (off-diagonal variance `1/D`). CUE uses QR of a complex Ginibre matrix
/// with the phase-fixing of the R diagonal; COE is `Uᵀ U` with `U` from CUE.
pub fn sample<P: RealScalar, R: Rng + ?Sized>(
    kind: EnsembleKind,
    dim: usize,
    rng: &mut R,
) -> Result<DenseOperator<P>> {
    if dim < 2 {
        return Err(Error::InvalidInput("ensemble dimension must be at least 2".into()));
    }
    match kind {
        EnsembleKind::Gue => {
            let scale = (P::one() / P::of(2.0 * dim as f64)).sqrt();
            let diag_scale = (P::one() / P::of(dim as f64)).sqrt();
            let mut h = Array2::<P::Cplx>::zeros((dim, dim));
            for i in 0..dim {
                let d = P::std_normal(rng) * diag_scale;
                h[[i, i]] = creal::<P>(d);
                for j in 0..i {
                    let re = P::std_normal(rng) * scale;
                    let im = P::std_normal(rng) * scale;
                    let z = cplx::<P>(re.to_f64().unwrap(), im.to_f64().unwrap());
                    h[[i, j]] = z;
                    h[[j, i]] = z.conj();
                }
            }
            DenseOperator::hermitian(h)
        }
        EnsembleKind::Goe => {
            let off = (P::one() / P::of(dim as f64)).sqrt();
            let diag = (P::of(2.0) / P::of(dim as f64)).sqrt();
            let mut h = Array2::<P::Cplx>::zeros((dim, dim));
            for i in 0..dim {
                h[[i, i]] = creal::<P>(P::std_normal(rng) * diag);
                for j in 0..i {
                    let z = creal::<P>(P::std_normal(rng) * off);
                    h[[i, j]] = z;
                    h[[j, i]] = z;
                }
            }
            DenseOperator::hermitian(h)
        }
        EnsembleKind::Cue => {
            let u = sample_haar_unitary::<P, R>(dim, rng)?;
            DenseOperator::unitary(u)
        }
        EnsembleKind::Coe => {
            let u = sample_haar_unitary::<P, R>(dim, rng)?;
            let v = u.t().dot(&u);
            DenseOperator::unitary(v)
        }
    }
}

/// Haar-distributed U(2) from the explicit Euler-angle parametrization:
/// `cos²θ` uniform on [0,1], three independent uniform phases.
pub fn haar_u2<P: RealScalar, R: Rng + ?Sized>(rng: &mut R) -> Array2<P::Cplx> {
    let two_pi = P::of(2.0) * P::PI();
    let xi = P::uniform(rng, P::zero(), P::one());
    let theta = xi.sqrt().asin();
    let (c, s) = (theta.cos(), theta.sin());
    let alpha = P::uniform(rng, P::zero(), two_pi);
    let psi = P::uniform(rng, P::zero(), two_pi);
    let chi = P::uniform(rng, P::zero(), two_pi);
    let g = |ph: P, m: P| {
        let z = cis::<P>(ph);
        z * creal::<P>(m)
    };
    array![
        [g(alpha + psi, c), g(alpha + chi, s)],
        [g(alpha - chi, -s), g(alpha - psi, c)]
    ]
}

/// Haar-distributed unitary via QR of a complex Ginibre matrix, with the
/// R-diagonal phases absorbed into Q.
pub fn sample_haar_unitary<P: RealScalar, R: Rng + ?Sized>(
    dim: usize,
    rng: &mut R,
) -> Result<Array2<P::Cplx>> {
    if dim == 2 {
        return Ok(haar_u2::<P, R>(rng));
    }
    let mut g = Array2::<P::Cplx>::zeros((dim, dim));
    for i in 0..dim {
        for j in 0..dim {
            let re = P::std_normal(rng);
            let im = P::std_normal(rng);
            g[[i, j]] = cplx::<P>(re.to_f64().unwrap(), im.to_f64().unwrap());
        }
    }
    let (q, r) = g.qr_square()?;
    let mut u = q;
    for (k, mut col) in u.columns_mut().into_iter().enumerate() {
        let rkk = r[[k, k]];
        let mag = rkk.abs();
        if mag > P::zero() {
            let phase = rkk / creal::<P>(mag);
            col.mapv_inplace(|z| z * phase);
        }
    }
    Ok(u)
}

// ---------------------------------------------------------------------------
// Analytic SFF
// ---------------------------------------------------------------------------

/// `r(t) = t_H J1(4 D t / t_H) / (2 D t)`, the disconnected part of the
/// Gaussian-ensemble SFF, with `r(0) = 1` by the series limit.
fn bessel_envelope<P: RealScalar>(dim: usize, t_h: P, t: P) -> P {
    let d = P::of(dim as f64);
    let x = P::of(4.0) * d * t / t_h;
    if x.abs() < P::of(1e-8) {
        // J1(x) ≈ x/2 - x^3/16
        return P::one() - x * x / P::of(8.0);
    }
    t_h * x.bessel_j1() / (P::of(2.0) * d * t)
}

/// Closed-form ensemble-averaged SFF `K(t)` normalized to `K(0) = 1`.
pub fn sff_analytic<P: RealScalar>(
    kind: EnsembleKind,
    params: &AnalyticParams<P>,
    t: P,
) -> Result<P> {
    if t < P::zero() {
        return Err(Error::InvalidInput("SFF is evaluated at t >= 0".into()));
    }
    let d = P::of(params.dim as f64);
    let t_h = params.t_heisenberg;
    let x = t / t_h;
    let ramp_plateau_unitary = if x <= P::one() { x } else { P::one() };
    let ramp_plateau_orthogonal = if t == P::zero() {
        P::zero()
    } else if x <= P::one() {
        P::of(2.0) * x - x * (P::one() + P::of(2.0) * x).ln()
    } else {
        P::of(2.0) - x * ((P::of(2.0) * x + P::one()) / (P::of(2.0) * x - P::one())).ln()
    };
    let value = match kind {
        EnsembleKind::Cue => {
            if t == P::zero() {
                P::one()
            } else {
                ramp_plateau_unitary / d
            }
        }
        EnsembleKind::Coe => {
            if t == P::zero() {
                P::one()
            } else {
                ramp_plateau_orthogonal / d
            }
        }
        EnsembleKind::Gue => {
            let r = bessel_envelope::<P>(params.dim, t_h, t);
            r * r + ramp_plateau_unitary / d
        }
        EnsembleKind::Goe => {
            let r = bessel_envelope::<P>(params.dim, t_h, t);
            r * r + ramp_plateau_orthogonal / d
        }
    };
    Ok(value)
}

// ---------------------------------------------------------------------------
// Analytic PSFF
// ---------------------------------------------------------------------------

/// Coefficients of `K_A(t) = c1 + c2 · K(t)` for a bipartition
/// `D = D_A · D_B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsffCoeffs<P: RealScalar> {
    pub c1: P,
    pub c2: P,
}

fn check_bipartition(d_a: usize, d_b: usize) -> Result<()> {
    if d_a < 1 || d_b < 1 || d_a * d_b < 2 {
        return Err(Error::InvalidInput(
            "bipartition requires D_A, D_B >= 1 and D_A * D_B >= 2".into(),
        ));
    }
    Ok(())
}

/// Eigenvector-average coefficients for the PSFF in each symmetry class.
pub fn psff_coeffs<P: RealScalar>(
    class: SymmetryClass,
    d_a: usize,
    d_b: usize,
) -> Result<PsffCoeffs<P>> {
    check_bipartition(d_a, d_b)?;
    let da = P::of(d_a as f64);
    let db = P::of(d_b as f64);
    let one = P::one();
    let (c1, c2) = match class {
        SymmetryClass::Unitary => {
            let denom = da * da * db * db - one;
            ((db * db - one) / denom, db * db * (da * da - one) / denom)
        }
        SymmetryClass::Orthogonal => {
            let denom = (da * db - one) * (da * db + P::of(2.0));
            (
                (db * db + db - P::of(2.0)) / denom,
                db * (da * db + db + one) * (da - one) / denom,
            )
        }
    };
    Ok(PsffCoeffs { c1, c2 })
}

/// Spectrum- and ensemble-averaged purity `P_B` and adjacent-state overlap
/// `Q_B` of reduced eigenstates, from the closed forms.
pub fn pq_analytic<P: RealScalar>(
    class: SymmetryClass,
    d_a: usize,
    d_b: usize,
) -> Result<(P, P)> {
    check_bipartition(d_a, d_b)?;
    let coeffs = psff_coeffs::<P>(class, d_a, d_b)?;
    // c1 = (P_B - Q_B)/D_A and c2 = D_B Q_B hold in both classes.
    let q_b = coeffs.c2 / P::of(d_b as f64);
    let p_b = coeffs.c1 * P::of(d_a as f64) + q_b;
    Ok((p_b, q_b))
}

/// Closed-form PSFF `K_A(t) = c1 + c2 K(t)`.
pub fn psff_analytic<P: RealScalar>(
    kind: EnsembleKind,
    params: &AnalyticParams<P>,
    d_a: usize,
    d_b: usize,
    t: P,
) -> Result<P> {
    if d_a * d_b != params.dim {
        return Err(Error::Dimension(format!(
            "bipartition {d_a}x{d_b} does not match D = {}",
            params.dim
        )));
    }
    let coeffs = psff_coeffs::<P>(kind.class(), d_a, d_b)?;
    Ok(coeffs.c1 + coeffs.c2 * sff_analytic(kind, params, t)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, unitarity_residual};
    use crate::rng::stream;

    #[test]
    fn cue_is_unitary_and_coe_symmetric() {
        let mut rng = stream(3, &[0], "rmt-test");
        let u = sample::<f64, _>(EnsembleKind::Cue, 16, &mut rng).unwrap();
        assert!(unitarity_residual::<f64>(u.data()) < 1e-10);
        let v = sample::<f64, _>(EnsembleKind::Coe, 16, &mut rng).unwrap();
        assert!(unitarity_residual::<f64>(v.data()) < 1e-10);
        let vt = v.data().t().to_owned();
        assert!(max_abs_diff::<f64>(v.data(), &vt) < 1e-10);
    }

    #[test]
    fn gaussian_kinds_are_hermitian() {
        let mut rng = stream(3, &[1], "rmt-test");
        sample::<f64, _>(EnsembleKind::Gue, 12, &mut rng)
            .unwrap()
            .check_kind()
            .unwrap();
        sample::<f64, _>(EnsembleKind::Goe, 12, &mut rng)
            .unwrap()
            .check_kind()
            .unwrap();
    }

    #[test]
    fn cue_haar_second_moment() {
        // E[|tr U|^2] = 1 for Haar; 1e4 samples at D = 8 giveial a standard
        // error of about 1/100.
        let mut rng = stream(17, &[0], "haar-moment");
        let n = 10_000;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for _ in 0..n {
            let u = sample::<f64, _>(EnsembleKind::Cue, 8, &mut rng).unwrap();
            let tr = u.trace();
            let v = tr.norm_sqr();
            sum += v;
            sumsq += v * v;
        }
        let mean = sum / n as f64;
        let stderr = ((sumsq / n as f64 - mean * mean) / n as f64).sqrt();
        assert!(
            (mean - 1.0).abs() < 3.0 * stderr,
            "E|tr U|^2 = {mean} ± {stderr}"
        );
    }

    #[test]
    fn sff_cue_reference_points() {
        let p = AnalyticParams::circular(32, 1.0).unwrap();
        let k_half = sff_analytic(EnsembleKind::Cue, &p, 16.0).unwrap();
        assert!((k_half - 0.5 / 32.0).abs() < 1e-15);
        let k_late = sff_analytic(EnsembleKind::Cue, &p, 64.0).unwrap();
        assert!((k_late - 1.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn sff_coe_value_and_continuity_at_th() {
        let d = 24;
        let p = AnalyticParams::circular(d, 1.0).unwrap();
        let th = p.t_heisenberg;
        let at_th = sff_analytic(EnsembleKind::Coe, &p, th).unwrap();
        let want = (2.0 - 3.0f64.ln()) / d as f64;
        assert!((at_th - want).abs() < 1e-14);
        let eps = 1e-9;
        let below = sff_analytic(EnsembleKind::Coe, &p, th - eps).unwrap();
        let above = sff_analytic(EnsembleKind::Coe, &p, th + eps).unwrap();
        assert!((below - above).abs() < 1e-7);
    }

    #[test]
    fn sff_curves_continuous_at_th_and_plateau_to_1_over_d() {
        for kind in [
            EnsembleKind::Cue,
            EnsembleKind::Coe,
            EnsembleKind::Gue,
            EnsembleKind::Goe,
        ] {
            let d = 64;
            let p = AnalyticParams::new(d, 12.5).unwrap();
            let th = p.t_heisenberg;
            let below = sff_analytic(kind, &p, th * (1.0 - 1e-12)).unwrap();
            let above = sff_analytic(kind, &p, th * (1.0 + 1e-12)).unwrap();
            assert!(
                (below - above).abs() < 1e-12,
                "{kind:?} discontinuous at t_H"
            );
            let late = sff_analytic(kind, &p, th * 5e4).unwrap();
            assert!(
                (late - 1.0 / d as f64).abs() < 1e-6,
                "{kind:?} plateau is {late}"
            );
        }
    }

    #[test]
    fn gue_sff_starts_at_one() {
        let p = AnalyticParams::new(16, 5.0).unwrap();
        let k0 = sff_analytic(EnsembleKind::Gue, &p, 0.0).unwrap();
        assert!((k0 - 1.0).abs() < 1e-12);
        let goe0 = sff_analytic(EnsembleKind::Goe, &p, 0.0).unwrap();
        assert!((goe0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn psff_coeffs_unitary_reference_values() {
        // D_B = 1 recovers the SFF, D_A = 1 the constant 1.
        let full = psff_coeffs::<f64>(SymmetryClass::Unitary, 4, 1).unwrap();
        assert_eq!((full.c1, full.c2), (0.0, 1.0));
        let empty = psff_coeffs::<f64>(SymmetryClass::Unitary, 1, 4).unwrap();
        assert_eq!((empty.c1, empty.c2), (1.0, 0.0));
        let mid = psff_coeffs::<f64>(SymmetryClass::Unitary, 2, 2).unwrap();
        assert!((mid.c1 - 0.2).abs() < 1e-15);
        assert!((mid.c2 - 0.8).abs() < 1e-15);
    }

    #[test]
    fn psff_coeffs_orthogonal_limits() {
        let full = psff_coeffs::<f64>(SymmetryClass::Orthogonal, 8, 1).unwrap();
        assert!((full.c1 - 0.0).abs() < 1e-15);
        assert!((full.c2 - 1.0).abs() < 1e-14);
        let empty = psff_coeffs::<f64>(SymmetryClass::Orthogonal, 1, 8).unwrap();
        assert!((empty.c1 - 1.0).abs() < 1e-14);
        assert!((empty.c2 - 0.0).abs() < 1e-15);
    }

    #[test]
    fn pq_unitary_reference_values() {
        let (p_b, q_b) = pq_analytic::<f64>(SymmetryClass::Unitary, 2, 2).unwrap();
        assert!((p_b - 0.8).abs() < 1e-15);
        assert!((q_b - 0.4).abs() < 1e-15);
        // A empty: reduced state of B is pure.
        let (p1, _q1) = pq_analytic::<f64>(SymmetryClass::Unitary, 1, 8).unwrap();
        assert!((p1 - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pq_coeff_identities_hold_exactly() {
        for class in [SymmetryClass::Unitary, SymmetryClass::Orthogonal] {
            for (d_a, d_b) in [(2usize, 2usize), (4, 8), (8, 4), (16, 2), (2, 16)] {
                let c = psff_coeffs::<f64>(class, d_a, d_b).unwrap();
                let (p_b, q_b) = pq_analytic::<f64>(class, d_a, d_b).unwrap();
                let da = d_a as f64;
                let db = d_b as f64;
                assert!((c.c1 * da + c.c2 / db - p_b).abs() < 1e-14);
                assert!((c.c2 - db * q_b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn psff_analytic_cue_plateau_and_ramp() {
        let d = 64;
        let d_a = 8;
        let p = AnalyticParams::circular(d, 1.0).unwrap();
        let c = psff_coeffs::<f64>(SymmetryClass::Unitary, d_a, d / d_a).unwrap();
        let plateau = psff_analytic(EnsembleKind::Cue, &p, d_a, d / d_a, 1e9).unwrap();
        assert!((plateau - (c.c1 + c.c2 / d as f64)).abs() < 1e-12);
        let mid = psff_analytic(EnsembleKind::Cue, &p, d_a, d / d_a, 32.0).unwrap();
        assert!((mid - (c.c1 + c.c2 * 0.5 / d as f64)).abs() < 1e-15);
    }

    #[test]
    fn psff_large_d_matches_leading_form_on_ramp() {
        // D = 2^10, D_A = 2^5: within 5% of 1/D_A^2 + t/(D t_H).
        let d = 1 << 10;
        let d_a = 1 << 5;
        let p = AnalyticParams::circular(d, 1.0).unwrap();
        for frac in [0.25, 0.5, 0.75] {
            let t = p.t_heisenberg * frac;
            let exact = psff_analytic(EnsembleKind::Cue, &p, d_a, d / d_a, t).unwrap();
            let leading = 1.0 / (d_a as f64 * d_a as f64) + frac / d as f64;
            assert!(
                (exact - leading).abs() / leading < 0.05,
                "ramp point {frac}: exact {exact}, leading {leading}"
            );
        }
    }

    #[test]
    fn psff_rejects_trivial_bipartition() {
        assert!(psff_coeffs::<f64>(SymmetryClass::Unitary, 1, 1).is_err());
    }
}
