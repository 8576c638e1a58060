//! Exact spectral form factors, eigenstate reductions, level statistics and
//! the ETH prediction curves.
//!
//! Two independent computational routes are kept deliberately separate and
//! cross-validated in tests: form factors are computed trace-wise from the
//! evolution operator (no eigenvectors involved), while purities and
//! overlaps come from eigenvector reductions.

use crate::error::{Error, Result};
use crate::hilbert::{
    build_ising_real, sample_disorder, KickedPropagator, ModelSpec, SpinRegister,
};
use crate::linalg::{herm_eig_op, herm_eigvals, sym_eig, sym_eigvals, DenseOperator, OperatorKind};
use crate::rmt::{self, EnsembleKind};
use crate::rng::stream;
use crate::scalar::{cis, creal, RealScalar};
use ndarray::prelude::*;
use ndarray_linalg::{Eig, EigVals, Scalar as NdScalar};
use rayon::prelude::*;

// ---------------------------------------------------------------------------
// Subsystem masks
// ---------------------------------------------------------------------------

/// A subset `A` of the register's sites; the complement `B` is implicit.
///
/// Internally a site `s` (1-based) occupies basis-index bit `N - s`, so the
/// mask is stored directly in index space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubsystemMask {
    n_sites: usize,
    bits: u64,
}

impl SubsystemMask {
    pub fn empty(n_sites: usize) -> Self {
        Self { n_sites, bits: 0 }
    }

    pub fn full(n_sites: usize) -> Self {
        Self {
            n_sites,
            bits: (1u64 << n_sites) - 1,
        }
    }

    /// Mask from 1-based site indices.
    pub fn from_sites(n_sites: usize, sites: &[usize]) -> Result<Self> {
        let mut bits = 0u64;
        for &s in sites {
            if s == 0 || s > n_sites {
                return Err(Error::SiteOutOfRange { site: s, n_sites });
            }
            bits |= 1u64 << (n_sites - s);
        }
        Ok(Self { n_sites, bits })
    }

    /// A contiguous block of `n_a` sites centered in the chain, the
    /// convention used for subsystem scans.
    pub fn centered(n_sites: usize, n_a: usize) -> Result<Self> {
        if n_a > n_sites {
            return Err(Error::InvalidInput(format!(
                "subsystem of {n_a} sites does not fit in {n_sites}"
            )));
        }
        let first = (n_sites - n_a) / 2 + 1;
        let sites: Vec<usize> = (first..first + n_a).collect();
        Self::from_sites(n_sites, &sites)
    }

    /// Parse `"0110…"` (site 1 first, '1' marks membership in A).
    pub fn from_bitstring(s: &str) -> Result<Self> {
        let n_sites = s.len();
        if n_sites == 0 || n_sites > 64 {
            return Err(Error::InvalidInput("mask bitstring length out of range".into()));
        }
        let mut sites = Vec::new();
        for (k, ch) in s.chars().enumerate() {
            match ch {
                '1' => sites.push(k + 1),
                '0' => {}
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "mask bitstring may only contain 0/1, got {ch:?}"
                    )))
                }
            }
        }
        Self::from_sites(n_sites, &sites)
    }

    /// Render as an `N`-character bitstring, site 1 first.
    pub fn bitstring(&self) -> String {
        (1..=self.n_sites)
            .map(|s| if self.contains(s) { '1' } else { '0' })
            .collect()
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn n_in_a(&self) -> usize {
        self.bits.count_ones() as usize
    }

    pub fn d_a(&self) -> usize {
        1 << self.n_in_a()
    }

    pub fn d_b(&self) -> usize {
        1 << (self.n_sites - self.n_in_a())
    }

    pub fn contains(&self, site: usize) -> bool {
        site >= 1 && site <= self.n_sites && (self.bits >> (self.n_sites - site)) & 1 == 1
    }

    pub fn is_full(&self) -> bool {
        self.n_in_a() == self.n_sites
    }

    pub fn is_empty(&self) -> bool {
        self.bits == 0
    }

    pub fn complement(&self) -> Self {
        Self {
            n_sites: self.n_sites,
            bits: !self.bits & ((1u64 << self.n_sites) - 1),
        }
    }

    /// Raw bits in basis-index space.
    pub fn index_bits(&self) -> u64 {
        self.bits
    }

    /// Count the set bits of a measurement outcome restricted to A.
    #[inline]
    pub fn weight_in_a(&self, outcome_bits: u64) -> u32 {
        (outcome_bits & self.bits).count_ones()
    }

    /// All `2^{N_A}` basis-index patterns formed by the sites of A.
    pub fn a_patterns(&self) -> Vec<usize> {
        spread_patterns(self.bits, self.n_sites)
    }

    /// All `2^{N_B}` basis-index patterns formed by the complement.
    pub fn b_patterns(&self) -> Vec<usize> {
        spread_patterns(self.complement().bits, self.n_sites)
    }

    /// All subsets of A, as masks on the same register.
    pub fn subsets(&self) -> Vec<SubsystemMask> {
        let positions: Vec<u64> = (0..self.n_sites as u64)
            .filter(|k| (self.bits >> k) & 1 == 1)
            .collect();
        let m = positions.len();
        (0..1usize << m)
            .map(|pattern| {
                let mut bits = 0u64;
                for (j, &pos) in positions.iter().enumerate() {
                    if (pattern >> j) & 1 == 1 {
                        bits |= 1u64 << pos;
                    }
                }
                SubsystemMask {
                    n_sites: self.n_sites,
                    bits,
                }
            })
            .collect()
    }

    /// Every mask of `n_a` sites on an `n_sites` register.
    pub fn all_of_size(n_sites: usize, n_a: usize) -> Vec<SubsystemMask> {
        SubsystemMask::full(n_sites)
            .subsets()
            .into_iter()
            .filter(|m| m.n_in_a() == n_a)
            .collect()
    }
}

impl std::fmt::Display for SubsystemMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.bitstring())
    }
}

fn spread_patterns(bits: u64, n_sites: usize) -> Vec<usize> {
    let positions: Vec<u64> = (0..n_sites as u64).filter(|k| (bits >> k) & 1 == 1).collect();
    let m = positions.len();
    (0..1usize << m)
        .map(|pattern| {
            let mut idx = 0usize;
            for (j, &pos) in positions.iter().enumerate() {
                if (pattern >> j) & 1 == 1 {
                    idx |= 1usize << pos;
                }
            }
            idx
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Single-operator form factors
// ---------------------------------------------------------------------------

/// Single-realization SFF `K_T = |tr T|^2 / D^2`.
pub fn sff_single<P: RealScalar>(t: &DenseOperator<P>) -> Result<P> {
    if t.kind() != OperatorKind::Unitary {
        return Err(Error::InvalidInput("sff_single requires a unitary".into()));
    }
    let d = P::of(t.dim() as f64);
    Ok(t.trace().abs().powi(2) / (d * d))
}

/// Partial trace over A: `(tr_A T)[b, b'] = Σ_a T[a|b, a|b']`.
pub fn partial_trace_a<P: RealScalar>(
    t: &Array2<P::Cplx>,
    mask: &SubsystemMask,
) -> Array2<P::Cplx> {
    let a_pats = mask.a_patterns();
    let b_pats = mask.b_patterns();
    let nb = b_pats.len();
    let mut out = Array2::<P::Cplx>::zeros((nb, nb));
    for (r, &bp) in b_pats.iter().enumerate() {
        for (c, &bq) in b_pats.iter().enumerate() {
            let mut s = <P::Cplx as num_traits::Zero>::zero();
            for &ap in &a_pats {
                s = s + t[[ap | bp, ap | bq]];
            }
            out[[r, c]] = s;
        }
    }
    out
}

/// Single-realization PSFF
/// `K_{A,T} = tr_B[tr_A T (tr_A T)†] / (D D_A) = ‖tr_A T‖_F^2 / (D D_A)`.
pub fn psff_single<P: RealScalar>(t: &DenseOperator<P>, mask: &SubsystemMask) -> Result<P> {
    if t.kind() != OperatorKind::Unitary {
        return Err(Error::InvalidInput("psff_single requires a unitary".into()));
    }
    if 1usize << mask.n_sites() != t.dim() {
        return Err(Error::Dimension(format!(
            "mask over {} sites does not match operator dimension {}",
            mask.n_sites(),
            t.dim()
        )));
    }
    Ok(psff_from_matrix::<P>(t.data(), mask))
}

pub(crate) fn psff_from_matrix<P: RealScalar>(t: &Array2<P::Cplx>, mask: &SubsystemMask) -> P {
    let d = P::of(t.nrows() as f64);
    if mask.is_empty() {
        // tr_∅ T = T and tr[T T†] = D for unitary T.
        return P::one();
    }
    let a_pats = mask.a_patterns();
    let b_pats = mask.b_patterns();
    let mut acc = P::zero();
    for &bp in &b_pats {
        for &bq in &b_pats {
            let mut s = <P::Cplx as num_traits::Zero>::zero();
            for &ap in &a_pats {
                s = s + t[[ap | bp, ap | bq]];
            }
            acc += s.abs().powi(2);
        }
    }
    acc / (d * P::of(mask.d_a() as f64))
}

// ---------------------------------------------------------------------------
// Spectral data
// ---------------------------------------------------------------------------

/// Sorted (quasi-)energies and eigenvectors of one realization.
#[derive(Debug, Clone)]
pub struct SpectralData<P: RealScalar> {
    /// Ascending; quasi-energies lie in `[0, 2π/τ)` for Floquet operators.
    pub energies: Array1<P>,
    /// Eigenvectors as columns, aligned with `energies`.
    pub vectors: Array2<P::Cplx>,
    /// Driving period for Floquet data, `None` for Hamiltonians.
    pub period: Option<P>,
    /// Adjacent pairs closer than `1e-10` of the spectral span; when
    /// nonzero the neighbor pairing depends on the deterministic tie-break
    /// by eigenvector index.
    pub near_degenerate_pairs: usize,
}

/// Diagonalize a Hermitian or unitary operator. Unitary (Floquet)
/// operators need the driving period `tau` to fix the quasi-energy branch
/// `[0, 2π/τ)`.
pub fn eigen_decompose<P: RealScalar>(
    op: &DenseOperator<P>,
    tau: Option<P>,
) -> Result<SpectralData<P>> {
    match op.kind() {
        OperatorKind::Hermitian => {
            let (energies, vectors) = herm_eig_op(op)?;
            // Residual check: H X = X diag(E).
            let hx = op.data().dot(&vectors);
            let scale = energies
                .iter()
                .fold(P::zero(), |m, e| m.max(e.abs()))
                .max(P::one());
            let mut worst = P::zero();
            for (j, e) in energies.iter().enumerate() {
                for i in 0..op.dim() {
                    let r = (hx[[i, j]] - vectors[[i, j]] * creal::<P>(*e)).abs();
                    worst = worst.max(r);
                }
            }
            if worst > P::spectral_tol() * scale {
                return Err(Error::Eigensolver(format!(
                    "hermitian eigenresidual {worst:e} exceeds tolerance"
                )));
            }
            Ok(SpectralData {
                near_degenerate_pairs: count_near_degenerate(&energies),
                energies,
                vectors,
                period: None,
            })
        }
        OperatorKind::Unitary => {
            let tau = tau.ok_or_else(|| {
                Error::InvalidInput("Floquet eigen_decompose needs the period tau".into())
            })?;
            if tau <= P::zero() {
                return Err(Error::InvalidInput("period tau must be positive".into()));
            }
            let (lambdas, vectors_raw) = op.data().eig()?;
            let two_pi = P::of(2.0) * P::PI();
            let mut quasi = Vec::with_capacity(lambdas.len());
            for lam in lambdas.iter() {
                let modulus = lam.abs();
                if (modulus - P::one()).abs() > P::spectral_tol() {
                    return Err(Error::Eigensolver(format!(
                        "Floquet eigenvalue modulus {modulus:e} off the unit circle"
                    )));
                }
                // λ = e^{-i E τ}  =>  E = (-arg λ mod 2π) / τ.
                let mut phase = -lam.im().atan2(lam.re());
                if phase < P::zero() {
                    phase += two_pi;
                }
                if phase >= two_pi {
                    phase -= two_pi;
                }
                quasi.push(phase / tau);
            }
            let mut order: Vec<usize> = (0..quasi.len()).collect();
            // Stable sort keeps the eigensolver's ordering on ties.
            order.sort_by(|&i, &j| quasi[i].partial_cmp(&quasi[j]).unwrap());
            let energies = Array1::from_vec(order.iter().map(|&i| quasi[i]).collect());
            let mut vectors = Array2::<P::Cplx>::zeros(vectors_raw.raw_dim());
            for (new, &old) in order.iter().enumerate() {
                vectors.column_mut(new).assign(&vectors_raw.column(old));
            }
            orthonormalize_clusters::<P>(&energies, &mut vectors, two_pi / tau);
            let res = crate::linalg::unitarity_residual::<P>(&vectors);
            if res > P::spectral_tol() {
                return Err(Error::Eigensolver(format!(
                    "Floquet eigenvectors not orthonormal, residual {res:e}"
                )));
            }
            Ok(SpectralData {
                near_degenerate_pairs: count_near_degenerate(&energies),
                energies,
                vectors,
                period: Some(tau),
            })
        }
        OperatorKind::General => Err(Error::InvalidInput(
            "eigen_decompose requires hermitian or unitary kind".into(),
        )),
    }
}

fn count_near_degenerate<P: RealScalar>(sorted: &Array1<P>) -> usize {
    let n = sorted.len();
    if n < 2 {
        return 0;
    }
    let span = (sorted[n - 1] - sorted[0]).max(P::from_f64(1e-300).unwrap_or_else(P::min_positive_value));
    let tol = P::of(1e-10) * span;
    (1..n).filter(|&i| sorted[i] - sorted[i - 1] < tol).count()
}

/// Gram-Schmidt within clusters of (near-)degenerate quasi-energies; the
/// general eigensolver does not guarantee orthogonality there even for
/// normal matrices.
fn orthonormalize_clusters<P: RealScalar>(
    energies: &Array1<P>,
    vectors: &mut Array2<P::Cplx>,
    scale: P,
) {
    let n = energies.len();
    let tol = P::of(1e-9) * scale;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && energies[end] - energies[end - 1] < tol {
            end += 1;
        }
        if end - start > 1 {
            for j in start..end {
                for k in start..j {
                    let overlap = {
                        let vk = vectors.column(k);
                        let vj = vectors.column(j);
                        vk.iter()
                            .zip(vj.iter())
                            .fold(<P::Cplx as num_traits::Zero>::zero(), |acc, (a, b)| {
                                acc + a.conj() * *b
                            })
                    };
                    let vk = vectors.column(k).to_owned();
                    let mut vj = vectors.column_mut(j);
                    vj.zip_mut_with(&vk, |x, y| *x = *x - overlap * *y);
                }
                let norm = vectors
                    .column(j)
                    .iter()
                    .map(|z| z.abs().powi(2))
                    .sum::<P>()
                    .sqrt();
                if norm > P::zero() {
                    let inv = creal::<P>(P::one() / norm);
                    vectors.column_mut(j).mapv_inplace(|z| z * inv);
                }
            }
        }
        start = end;
    }
}

// ---------------------------------------------------------------------------
// Eigenstate reductions
// ---------------------------------------------------------------------------

/// Reduced density matrix `ρ_B = tr_A |ψ⟩⟨ψ|` of a normalized state.
pub fn reduced_density<P: RealScalar>(
    state: ArrayView1<'_, P::Cplx>,
    mask: &SubsystemMask,
) -> Array2<P::Cplx> {
    let a_pats = mask.a_patterns();
    let b_pats = mask.b_patterns();
    let nb = b_pats.len();
    let mut rho = Array2::<P::Cplx>::zeros((nb, nb));
    for (r, &bp) in b_pats.iter().enumerate() {
        for (c, &bq) in b_pats.iter().enumerate() {
            let mut s = <P::Cplx as num_traits::Zero>::zero();
            for &ap in &a_pats {
                s = s + state[ap | bp] * state[ap | bq].conj();
            }
            rho[[r, c]] = s;
        }
    }
    rho
}

/// `tr(ρ σ)` for Hermitian `ρ, σ`; the result is real.
pub fn overlap_trace<P: RealScalar>(rho: &Array2<P::Cplx>, sigma: &Array2<P::Cplx>) -> P {
    let mut acc = P::zero();
    for i in 0..rho.nrows() {
        for j in 0..rho.ncols() {
            acc += (rho[[i, j]] * sigma[[j, i]]).re();
        }
    }
    acc
}

/// Spectrum-averaged second moments of the reduced eigenstates of one
/// realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EthDiagnostics<P: RealScalar> {
    /// `P_B = D^{-1} Σ_i tr ρ_B(E_i)^2`.
    pub p_b: P,
    /// `Q_B = (D-1)^{-1} Σ_i tr[ρ_B(E_i) ρ_B(E_{i+1})]`, energy-sorted
    /// neighbors, the wrap-around pair excluded.
    pub q_b: P,
    /// `δP_B = P_B - Q_B`, the PSFF shift coefficient.
    pub delta_p_b: P,
    /// `ΔP_B = Q_B - 1/D_B`, the ramp-modulation coefficient.
    pub big_delta_p_b: P,
    pub mask: SubsystemMask,
    /// Count of near-degenerate neighbor pairs inherited from the spectrum.
    pub near_degenerate_pairs: usize,
}

/// Purity `P_B` and adjacent-state overlap `Q_B` from sorted spectral data.
pub fn purity_and_overlaps<P: RealScalar>(
    data: &SpectralData<P>,
    mask: &SubsystemMask,
) -> Result<EthDiagnostics<P>> {
    let d = data.energies.len();
    if d < 2 {
        return Err(Error::InvalidInput("need at least two eigenstates".into()));
    }
    if 1usize << mask.n_sites() != d {
        return Err(Error::Dimension(format!(
            "mask over {} sites does not match dimension {}",
            mask.n_sites(),
            d
        )));
    }
    let mut purity_sum = P::zero();
    let mut overlap_sum = P::zero();
    let mut prev: Option<Array2<P::Cplx>> = None;
    for i in 0..d {
        let rho = reduced_density::<P>(data.vectors.column(i), mask);
        purity_sum += overlap_trace::<P>(&rho, &rho);
        if let Some(p) = &prev {
            overlap_sum += overlap_trace::<P>(p, &rho);
        }
        prev = Some(rho);
    }
    let p_b = purity_sum / P::of(d as f64);
    let q_b = overlap_sum / P::of((d - 1) as f64);
    Ok(EthDiagnostics {
        p_b,
        q_b,
        delta_p_b: p_b - q_b,
        big_delta_p_b: q_b - P::one() / P::of(mask.d_b() as f64),
        mask: *mask,
        near_degenerate_pairs: data.near_degenerate_pairs,
    })
}

// ---------------------------------------------------------------------------
// Level statistics and spectrum utilities
// ---------------------------------------------------------------------------

/// Mean adjacent gap ratio `⟨min(Δ_m, Δ_{m+1}) / max(Δ_m, Δ_{m+1})⟩` of a
/// sorted spectrum. Pairs in which both gaps vanish are skipped; a single
/// vanishing gap contributes 0.
pub fn gap_ratio_mean<P: RealScalar>(sorted_energies: &[P]) -> Result<P> {
    let n = sorted_energies.len();
    if n < 3 {
        return Err(Error::InvalidInput("gap ratio needs at least 3 levels".into()));
    }
    let mut sum = P::zero();
    let mut count = 0usize;
    for m in 0..n - 2 {
        let g1 = sorted_energies[m + 1] - sorted_energies[m];
        let g2 = sorted_energies[m + 2] - sorted_energies[m + 1];
        if g1 < P::zero() || g2 < P::zero() {
            return Err(Error::InvalidInput("energies must be sorted ascending".into()));
        }
        let hi = g1.max(g2);
        if hi == P::zero() {
            continue; // exact double degeneracy, ratio undefined
        }
        sum += g1.min(g2) / hi;
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidInput("spectrum fully degenerate".into()));
    }
    Ok(sum / P::of(count as f64))
}

/// Affine rescale so the mean adjacent spacing equals `target`; pure
/// scaling about zero, which preserves ordering and leaves the SFF a
/// function of phase differences only.
pub fn spectrum_rescale<P: RealScalar>(sorted_energies: &[P], target: P) -> Result<Vec<P>> {
    let n = sorted_energies.len();
    if n < 2 {
        return Err(Error::InvalidInput("rescale needs at least 2 levels".into()));
    }
    if target <= P::zero() {
        return Err(Error::InvalidInput("target spacing must be positive".into()));
    }
    let span = sorted_energies[n - 1] - sorted_energies[0];
    if span <= P::zero() {
        return Err(Error::InvalidInput("degenerate spectrum cannot be rescaled".into()));
    }
    let mean = span / P::of((n - 1) as f64);
    let s = target / mean;
    Ok(sorted_energies.iter().map(|&e| e * s).collect())
}

// ---------------------------------------------------------------------------
// Form factor series and ensemble runners
// ---------------------------------------------------------------------------

/// How the values of a series were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Exact,
    Estimated,
    Analytic,
}

/// A (P)SFF curve on a time grid.
#[derive(Debug, Clone)]
pub struct FormFactorSeries<P: RealScalar> {
    pub times: Vec<P>,
    pub values: Vec<P>,
    pub stderr: Option<Vec<P>>,
    pub mask: SubsystemMask,
    pub provenance: Provenance,
    pub n_realizations: usize,
}

impl<P: RealScalar> FormFactorSeries<P> {
    pub fn new(
        times: Vec<P>,
        values: Vec<P>,
        stderr: Option<Vec<P>>,
        mask: SubsystemMask,
        provenance: Provenance,
        n_realizations: usize,
    ) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Dimension("times/values length mismatch".into()));
        }
        if let Some(se) = &stderr {
            if se.len() != times.len() {
                return Err(Error::Dimension("stderr length mismatch".into()));
            }
            if se.iter().any(|s| *s < P::zero()) {
                return Err(Error::InvalidInput("stderr must be non-negative".into()));
            }
        }
        Ok(Self {
            times,
            values,
            stderr,
            mask,
            provenance,
            n_realizations,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Index of the grid point at `t` (within a 1e-9 relative window).
    pub fn index_of_time(&self, t: P) -> Result<usize> {
        let tol = P::of(1e-9) * (t.abs() + P::one());
        self.times
            .iter()
            .position(|&x| (x - t).abs() <= tol)
            .ok_or_else(|| Error::TimeNotOnGrid(t.to_f64().unwrap_or(f64::NAN)))
    }

    pub fn value_at(&self, t: P) -> Result<P> {
        Ok(self.values[self.index_of_time(t)?])
    }
}

/// Evaluation grid: stroboscopic steps for Floquet models, arbitrary
/// positive times for Hamiltonians.
#[derive(Debug, Clone, PartialEq)]
pub enum TimeGrid<P: RealScalar> {
    /// Integer multiples of the driving period, strictly ascending.
    FloquetSteps(Vec<u64>),
    /// Arbitrary non-negative times, strictly ascending.
    Times(Vec<P>),
}

impl<P: RealScalar> TimeGrid<P> {
    pub fn steps_to(max: u64) -> Self {
        TimeGrid::FloquetSteps((1..=max).collect())
    }

    pub fn linear(start: P, stop: P, n: usize) -> Result<Self> {
        if n < 2 || stop <= start {
            return Err(Error::InvalidInput("bad linear grid".into()));
        }
        let step = (stop - start) / P::of((n - 1) as f64);
        Ok(TimeGrid::Times(
            (0..n).map(|k| start + step * P::of(k as f64)).collect(),
        ))
    }

    pub fn geometric(start: P, stop: P, n: usize) -> Result<Self> {
        if n < 2 || start <= P::zero() || stop <= start {
            return Err(Error::InvalidInput("bad geometric grid".into()));
        }
        let ratio = (stop / start).powf(P::one() / P::of((n - 1) as f64));
        Ok(TimeGrid::Times(
            (0..n).map(|k| start * ratio.powi(k as i32)).collect(),
        ))
    }

    pub fn validate(&self, floquet: bool) -> Result<()> {
        match self {
            TimeGrid::FloquetSteps(steps) => {
                if !floquet {
                    return Err(Error::InvalidInput(
                        "Hamiltonian models use a real-time grid, not Floquet steps".into(),
                    ));
                }
                if steps.is_empty() {
                    return Err(Error::InvalidInput("empty time grid".into()));
                }
                if !steps.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::InvalidInput(
                        "Floquet steps must be strictly ascending".into(),
                    ));
                }
                Ok(())
            }
            TimeGrid::Times(ts) => {
                if floquet {
                    return Err(Error::InvalidInput(
                        "Floquet models evolve at integer multiples of the period; use FloquetSteps"
                            .into(),
                    ));
                }
                if ts.is_empty() {
                    return Err(Error::InvalidInput("empty time grid".into()));
                }
                if !ts.windows(2).all(|w| w[0] < w[1]) || ts[0] < P::zero() {
                    return Err(Error::InvalidInput(
                        "times must be non-negative ascending".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Physical times of the grid points.
    pub fn times(&self, period: P) -> Vec<P> {
        match self {
            TimeGrid::FloquetSteps(steps) => {
                steps.iter().map(|&n| period * P::of(n as f64)).collect()
            }
            TimeGrid::Times(ts) => ts.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TimeGrid::FloquetSteps(s) => s.len(),
            TimeGrid::Times(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Options for the ensemble runners.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleOptions<P: RealScalar> {
    /// Rescale each realization's spectrum to this mean level spacing
    /// before evaluating phases (Hamiltonian models only).
    pub rescale_mean_spacing: Option<P>,
    /// Also compute eigenstate purity/overlap diagnostics per mask.
    pub with_eth: bool,
}

impl<P: RealScalar> Default for EnsembleOptions<P> {
    fn default() -> Self {
        Self {
            rescale_mean_spacing: None,
            with_eth: false,
        }
    }
}

/// Everything computed from a single disorder realization.
#[derive(Debug, Clone)]
pub struct RealizationOutput<P: RealScalar> {
    /// `values[mask_index][time_index]`.
    pub values: Vec<Vec<P>>,
    /// Eigenstate diagnostics per mask when requested.
    pub eth: Option<Vec<EthDiagnostics<P>>>,
}

/// Aggregated ensemble result.
#[derive(Debug, Clone)]
pub struct EnsembleFormFactor<P: RealScalar> {
    pub series: Vec<FormFactorSeries<P>>,
    /// Ensemble mean and standard error of the ETH diagnostics per mask.
    pub eth: Option<Vec<EnsembleEth<P>>>,
}

/// Ensemble-averaged eigenstate diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleEth<P: RealScalar> {
    pub mean: EthDiagnostics<P>,
    pub p_b_stderr: P,
    pub q_b_stderr: P,
    pub n_realizations: usize,
}

/// Compute one realization's form factors (and optionally its eigenstate
/// diagnostics) on the grid.
pub fn realization_output<P: RealScalar>(
    model: &ModelSpec<P>,
    reg: SpinRegister,
    masks: &[SubsystemMask],
    grid: &TimeGrid<P>,
    master_seed: u64,
    index: u64,
    opts: &EnsembleOptions<P>,
) -> Result<RealizationOutput<P>> {
    model.validate()?;
    grid.validate(model.is_floquet())?;
    for m in masks {
        if 1usize << m.n_sites() != reg.dim() {
            return Err(Error::Dimension(format!(
                "mask {} does not match register dimension {}",
                m,
                reg.dim()
            )));
        }
    }
    if let ModelSpec::RmtEnsemble { dim, .. } = model {
        if *dim != reg.dim() {
            return Err(Error::Dimension(format!(
                "RMT dimension {dim} does not match register dimension {}",
                reg.dim()
            )));
        }
    }
    if model.is_floquet() {
        floquet_realization(model, reg, masks, grid, master_seed, index, opts)
    } else {
        hamiltonian_realization(model, reg, masks, grid, master_seed, index, opts)
    }
}

/// One-period evolution operator of a Floquet model realization.
pub fn build_floquet_operator<P: RealScalar>(
    model: &ModelSpec<P>,
    reg: SpinRegister,
    master_seed: u64,
    index: u64,
) -> Result<DenseOperator<P>> {
    match model {
        ModelSpec::FloquetV3 { .. } | ModelSpec::FloquetV2 { .. } => {
            let dis = sample_disorder(model, reg, master_seed, index);
            KickedPropagator::new(model, &dis, reg)?.to_unitary()
        }
        ModelSpec::RmtEnsemble { kind, dim } => {
            let mut rng = stream(master_seed, &[index], "rmt-realization");
            rmt::sample::<P, _>(*kind, *dim, &mut rng)
        }
        _ => Err(Error::InvalidInput("not a Floquet model".into())),
    }
}

fn floquet_realization<P: RealScalar>(
    model: &ModelSpec<P>,
    reg: SpinRegister,
    masks: &[SubsystemMask],
    grid: &TimeGrid<P>,
    master_seed: u64,
    index: u64,
    opts: &EnsembleOptions<P>,
) -> Result<RealizationOutput<P>> {
    let steps = match grid {
        TimeGrid::FloquetSteps(s) => s,
        TimeGrid::Times(_) => unreachable!("validated by caller"),
    };
    let v = build_floquet_operator(model, reg, master_seed, index)?;
    let dim = v.dim();
    let d2 = P::of(dim as f64) * P::of(dim as f64);
    let mut values = vec![Vec::with_capacity(steps.len()); masks.len()];
    let mut t_mat: Array2<P::Cplx> = Array2::eye(dim);
    let mut prev_n = 0u64;
    for &n in steps {
        let delta = n - prev_n;
        t_mat = advance_power::<P>(t_mat, v.data(), delta);
        prev_n = n;
        for (mi, mask) in masks.iter().enumerate() {
            let val = if mask.is_full() {
                let tr = t_mat
                    .diag()
                    .iter()
                    .copied()
                    .fold(<P::Cplx as num_traits::Zero>::zero(), |a, z| a + z);
                tr.abs().powi(2) / d2
            } else {
                psff_from_matrix::<P>(&t_mat, mask)
            };
            values[mi].push(val);
        }
    }
    let eth = if opts.with_eth {
        let data = eigen_decompose(&v, Some(model.period()))?;
        Some(
            masks
                .iter()
                .map(|m| purity_and_overlaps(&data, m))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(RealizationOutput { values, eth })
}

fn advance_power<P: RealScalar>(
    t_mat: Array2<P::Cplx>,
    v: &Array2<P::Cplx>,
    delta: u64,
) -> Array2<P::Cplx> {
    if delta == 0 {
        return t_mat;
    }
    if delta <= 4 {
        let mut out = t_mat;
        for _ in 0..delta {
            out = v.dot(&out);
        }
        return out;
    }
    // Repeated squaring across a long gap.
    let mut base = v.clone();
    let mut acc = t_mat;
    let mut k = delta;
    loop {
        if k & 1 == 1 {
            acc = base.dot(&acc);
        }
        k >>= 1;
        if k == 0 {
            break;
        }
        base = base.dot(&base);
    }
    acc
}

fn hamiltonian_realization<P: RealScalar>(
    model: &ModelSpec<P>,
    reg: SpinRegister,
    masks: &[SubsystemMask],
    grid: &TimeGrid<P>,
    master_seed: u64,
    index: u64,
    opts: &EnsembleOptions<P>,
) -> Result<RealizationOutput<P>> {
    let times = match grid {
        TimeGrid::Times(t) => t.clone(),
        TimeGrid::FloquetSteps(_) => {
            return Err(Error::InvalidInput(
                "Hamiltonian models use a real-time grid".into(),
            ))
        }
    };
    // Diagonalize, staying in real arithmetic where the model allows it.
    let (mut energies, vectors): (Array1<P>, Array2<P::Cplx>) = match model {
        ModelSpec::IsingLongRange { .. } => {
            let dis = sample_disorder(model, reg, master_seed, index);
            let h = build_ising_real(model, &dis, reg)?;
            let (e, x) = sym_eig(&h)?;
            (e, x.mapv(creal::<P>))
        }
        ModelSpec::RmtEnsemble { kind, dim } => {
            let mut rng = stream(master_seed, &[index], "rmt-realization");
            let h = rmt::sample::<P, _>(*kind, *dim, &mut rng)?;
            match kind {
                EnsembleKind::Goe => {
                    let re = h.data().mapv(|z| z.re());
                    let (e, x) = sym_eig(&re)?;
                    (e, x.mapv(creal::<P>))
                }
                _ => crate::linalg::herm_eig::<P>(h.data())?,
            }
        }
        _ => return Err(Error::InvalidInput("not a Hamiltonian model".into())),
    };
    if let Some(target) = opts.rescale_mean_spacing {
        let rescaled = spectrum_rescale(energies.as_slice().unwrap(), target)?;
        energies = Array1::from_vec(rescaled);
    }
    let dim = energies.len();
    let n_t = times.len();
    // Phase matrix PH[k, i] = exp(-i E_i t_k).
    let mut phases = Array2::<P::Cplx>::zeros((n_t, dim));
    for (k, &t) in times.iter().enumerate() {
        for (i, &e) in energies.iter().enumerate() {
            phases[[k, i]] = cis::<P>(-e * t);
        }
    }
    let mut values = vec![Vec::with_capacity(n_t); masks.len()];
    for (mi, mask) in masks.iter().enumerate() {
        if mask.is_empty() {
            values[mi] = vec![P::one(); n_t];
            continue;
        }
        if mask.is_full() {
            let d2 = P::of(dim as f64) * P::of(dim as f64);
            for k in 0..n_t {
                let s = phases
                    .row(k)
                    .iter()
                    .copied()
                    .fold(<P::Cplx as num_traits::Zero>::zero(), |a, z| a + z);
                values[mi].push(s.abs().powi(2) / d2);
            }
            continue;
        }
        // Stack the reduced traces R_i = tr_A(x_i x_i†), flattened, so the
        // whole time series becomes a single matrix product:
        // tr_A T(t_k) = Σ_i e^{-i E_i t_k} R_i.
        let a_pats = mask.a_patterns();
        let b_pats = mask.b_patterns();
        let nb = b_pats.len();
        let mut w = Array2::<P::Cplx>::zeros((dim, nb * nb));
        for i in 0..dim {
            let col = vectors.column(i);
            for (r, &bp) in b_pats.iter().enumerate() {
                for (c, &bq) in b_pats.iter().enumerate() {
                    let mut s = <P::Cplx as num_traits::Zero>::zero();
                    for &ap in &a_pats {
                        s = s + col[ap | bp] * col[ap | bq].conj();
                    }
                    w[[i, r * nb + c]] = s;
                }
            }
        }
        let m_all = phases.dot(&w);
        let denom = P::of(dim as f64) * P::of(mask.d_a() as f64);
        for k in 0..n_t {
            let norm: P = m_all.row(k).iter().map(|z| z.abs().powi(2)).sum();
            values[mi].push(norm / denom);
        }
    }
    let eth = if opts.with_eth {
        let data = SpectralData {
            near_degenerate_pairs: count_near_degenerate(&energies),
            energies,
            vectors,
            period: None,
        };
        Some(
            masks
                .iter()
                .map(|m| purity_and_overlaps(&data, m))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok(RealizationOutput { values, eth })
}

/// Run `n_realizations` in parallel (deterministically seeded per index)
/// and return the raw per-realization outputs in index order.
pub fn ensemble_realizations<P: RealScalar>(
    model: &ModelSpec<P>,
    reg: SpinRegister,
    masks: &[SubsystemMask],
    grid: &TimeGrid<P>,
    n_realizations: usize,
    master_seed: u64,
    opts: &EnsembleOptions<P>,
) -> Result<Vec<RealizationOutput<P>>> {
    if n_realizations == 0 {
        return Err(Error::InvalidInput("need at least one realization".into()));
    }
    (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| realization_output(model, reg, masks, grid, master_seed, r, opts))
        .collect()
}

/// Ensemble-averaged form factors: mean over realizations per time point,
/// with the standard error of the mean attached.
pub fn ensemble_run<P: RealScalar>(
    model: &ModelSpec<P>,
    reg: SpinRegister,
    masks: &[SubsystemMask],
    grid: &TimeGrid<P>,
    n_realizations: usize,
    master_seed: u64,
    opts: &EnsembleOptions<P>,
) -> Result<EnsembleFormFactor<P>> {
    let outputs =
        ensemble_realizations(model, reg, masks, grid, n_realizations, master_seed, opts)?;
    let times = grid.times(model.period());
    let n_t = times.len();
    let n = outputs.len();
    let mut series = Vec::with_capacity(masks.len());
    for (mi, mask) in masks.iter().enumerate() {
        let mut mean = vec![P::zero(); n_t];
        let mut m2 = vec![P::zero(); n_t];
        // Welford accumulation in realization-index order keeps results
        // independent of thread count.
        for (k, out) in outputs.iter().enumerate() {
            let kf = P::of((k + 1) as f64);
            for (j, &v) in out.values[mi].iter().enumerate() {
                let delta = v - mean[j];
                mean[j] += delta / kf;
                m2[j] += delta * (v - mean[j]);
            }
        }
        let stderr: Vec<P> = m2
            .iter()
            .map(|&s| {
                if n > 1 {
                    (s / P::of((n - 1) as f64) / P::of(n as f64)).sqrt()
                } else {
                    P::zero()
                }
            })
            .collect();
        series.push(FormFactorSeries::new(
            times.clone(),
            mean,
            Some(stderr),
            *mask,
            Provenance::Exact,
            n,
        )?);
    }
    let eth = if opts.with_eth {
        let mut per_mask = Vec::with_capacity(masks.len());
        for (mi, mask) in masks.iter().enumerate() {
            let (mut p_mean, mut p_m2, mut q_mean, mut q_m2) =
                (P::zero(), P::zero(), P::zero(), P::zero());
            let mut degenerate = 0usize;
            for (k, out) in outputs.iter().enumerate() {
                let d = out.eth.as_ref().expect("eth requested")[mi];
                let kf = P::of((k + 1) as f64);
                let dp = d.p_b - p_mean;
                p_mean += dp / kf;
                p_m2 += dp * (d.p_b - p_mean);
                let dq = d.q_b - q_mean;
                q_mean += dq / kf;
                q_m2 += dq * (d.q_b - q_mean);
                degenerate += d.near_degenerate_pairs;
            }
            let sem = |m2: P| {
                if n > 1 {
                    (m2 / P::of((n - 1) as f64) / P::of(n as f64)).sqrt()
                } else {
                    P::zero()
                }
            };
            per_mask.push(EnsembleEth {
                mean: EthDiagnostics {
                    p_b: p_mean,
                    q_b: q_mean,
                    delta_p_b: p_mean - q_mean,
                    big_delta_p_b: q_mean - P::one() / P::of(mask.d_b() as f64),
                    mask: *mask,
                    near_degenerate_pairs: degenerate,
                },
                p_b_stderr: sem(p_m2),
                q_b_stderr: sem(q_m2),
                n_realizations: n,
            });
        }
        Some(per_mask)
    } else {
        None
    };
    Ok(EnsembleFormFactor { series, eth })
}

/// Ensemble-averaged exact form factors, one series per mask.
pub fn ensemble_form_factor<P: RealScalar>(
    model: &ModelSpec<P>,
    reg: SpinRegister,
    masks: &[SubsystemMask],
    grid: &TimeGrid<P>,
    n_realizations: usize,
    master_seed: u64,
) -> Result<Vec<FormFactorSeries<P>>> {
    Ok(ensemble_run(
        model,
        reg,
        masks,
        grid,
        n_realizations,
        master_seed,
        &EnsembleOptions::default(),
    )?
    .series)
}

/// Mean adjacent gap ratio over an ensemble: per-realization spectrum mean,
/// then (mean, standard error) over realizations.
pub fn ensemble_gap_ratio<P: RealScalar>(
    model: &ModelSpec<P>,
    reg: SpinRegister,
    n_realizations: usize,
    master_seed: u64,
) -> Result<(P, P)> {
    if n_realizations == 0 {
        return Err(Error::InvalidInput("need at least one realization".into()));
    }
    let sorted_quasi = |lam: Array1<P::Cplx>| -> Vec<P> {
        let two_pi = P::of(2.0) * P::PI();
        let mut qs: Vec<P> = lam
            .iter()
            .map(|l| {
                let mut ph = -l.im().atan2(l.re());
                if ph < P::zero() {
                    ph += two_pi;
                }
                ph
            })
            .collect();
        qs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        qs
    };
    let per: Result<Vec<P>> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| -> Result<P> {
            let energies: Vec<P> = match model {
                ModelSpec::IsingLongRange { .. } => {
                    let dis = sample_disorder(model, reg, master_seed, r);
                    let h = build_ising_real(model, &dis, reg)?;
                    sym_eigvals(&h)?.to_vec()
                }
                ModelSpec::RmtEnsemble { kind, dim } => {
                    let mut rng = stream(master_seed, &[r], "rmt-realization");
                    let m = rmt::sample::<P, _>(*kind, *dim, &mut rng)?;
                    match kind {
                        EnsembleKind::Goe => sym_eigvals(&m.data().mapv(|z| z.re()))?.to_vec(),
                        EnsembleKind::Gue => herm_eigvals::<P>(m.data())?.to_vec(),
                        EnsembleKind::Cue | EnsembleKind::Coe => sorted_quasi(m.data().eigvals()?),
                    }
                }
                ModelSpec::FloquetV3 { .. } | ModelSpec::FloquetV2 { .. } => {
                    let v = build_floquet_operator(model, reg, master_seed, r)?;
                    sorted_quasi(v.data().eigvals()?)
                }
            };
            gap_ratio_mean(&energies)
        })
        .collect();
    let per = per?;
    let n = per.len();
    let mean = per.iter().copied().sum::<P>() / P::of(n as f64);
    let var = if n > 1 {
        per.iter().map(|&x| (x - mean) * (x - mean)).sum::<P>() / P::of((n - 1) as f64)
    } else {
        P::zero()
    };
    Ok((mean, (var / P::of(n as f64)).sqrt()))
}

// ---------------------------------------------------------------------------
// Shift extraction, ramp/plateau detection, ETH prediction
// ---------------------------------------------------------------------------

/// `K_A(t0) - K(t0)`: the additive shift of the PSFF over the SFF read off
/// at a ramp time `t0` (intended `t_Th < t0 ≪ t_H`).
pub fn shift_extract<P: RealScalar>(
    k_a: &FormFactorSeries<P>,
    k: &FormFactorSeries<P>,
    t0: P,
) -> Result<P> {
    let ia = k_a.index_of_time(t0)?;
    let i = k.index_of_time(t0)?;
    Ok(k_a.values[ia] - k.values[i])
}

/// Plateau height: mean over the last quarter of the grid.
pub fn plateau_value<P: RealScalar>(series: &FormFactorSeries<P>) -> P {
    let n = series.len();
    let start = n - (n / 4).max(1);
    let tail = &series.values[start..];
    tail.iter().copied().sum::<P>() / P::of(tail.len() as f64)
}

/// First grid index from which the series stays within `band` (relative)
/// of the plateau height.
pub fn plateau_onset_index<P: RealScalar>(series: &FormFactorSeries<P>, band: P) -> Option<usize> {
    let plateau = plateau_value(series);
    let tol = band * plateau;
    let n = series.len();
    let ok = |v: P| (v - plateau).abs() <= tol;
    let mut idx = n;
    for i in (0..n).rev() {
        if ok(series.values[i]) {
            idx = i;
        } else {
            break;
        }
    }
    if idx < n {
        Some(idx)
    } else {
        None
    }
}

/// Ordinary least squares fit `y = a + b t`; returns `(a, b, r_squared)`.
pub fn linear_fit<P: RealScalar>(ts: &[P], ys: &[P]) -> Option<(P, P, P)> {
    let n = ts.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = P::of(n as f64);
    let mt = ts.iter().copied().sum::<P>() / nf;
    let my = ys.iter().copied().sum::<P>() / nf;
    let mut sxx = P::zero();
    let mut sxy = P::zero();
    let mut syy = P::zero();
    for (&t, &y) in ts.iter().zip(ys) {
        sxx += (t - mt) * (t - mt);
        sxy += (t - mt) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == P::zero() {
        return None;
    }
    let b = sxy / sxx;
    let a = my - b * mt;
    let r2 = if syy > P::zero() {
        (sxy * sxy) / (sxx * syy)
    } else {
        P::one()
    };
    Some((a, b, r2))
}

/// Detect the linear-ramp window of an SFF series: the sliding window with
/// the best positive-slope linear fit below the plateau onset. Returns grid
/// index bounds `(start, end)`, half-open.
pub fn detect_ramp_window<P: RealScalar>(series: &FormFactorSeries<P>) -> Option<(usize, usize)> {
    let n = series.len();
    if n < 6 {
        return None;
    }
    let onset = plateau_onset_index(series, P::of(0.25)).unwrap_or(n);
    let search_end = onset.max(6).min(n);
    let w = (search_end / 3).max(4).min(search_end);
    let mut best: Option<(usize, usize, P)> = None;
    for start in 0..=search_end - w {
        let end = start + w;
        let (_, slope, r2) = linear_fit(&series.times[start..end], &series.values[start..end])?;
        if slope <= P::zero() {
            continue;
        }
        if best.map_or(true, |(_, _, br2)| r2 > br2) {
            best = Some((start, end, r2));
        }
    }
    best.map(|(s, e, _)| (s, e))
}

/// Midpoint time of the detected ramp window, the default `t0` for shift
/// extraction.
pub fn ramp_midpoint_time<P: RealScalar>(series: &FormFactorSeries<P>) -> Option<P> {
    let (s, e) = detect_ramp_window(series)?;
    Some(series.times[(s + e - 1) / 2])
}

/// Estimated Thouless time: the first grid time from which the series stays
/// within 20% of the reference RMT curve for 3 consecutive points.
pub fn thouless_time<P: RealScalar>(series: &FormFactorSeries<P>, rmt_values: &[P]) -> Option<P> {
    let n = series.len().min(rmt_values.len());
    let ok = |i: usize| {
        let r = rmt_values[i];
        r > P::zero() && ((series.values[i] - r) / r).abs() < P::of(0.2)
    };
    for i in 0..n.saturating_sub(2) {
        if ok(i) && ok(i + 1) && ok(i + 2) {
            return Some(series.times[i]);
        }
    }
    None
}

/// Inputs of the constant-density-of-states ETH prediction for the PSFF.
#[derive(Debug, Clone, Copy)]
pub struct EthCurveParams<P: RealScalar> {
    pub delta_p_b: P,
    pub big_delta_p_b: P,
    /// Ramp-weighted variant of `ΔP_B`; defaults to `ΔP_B` when `None`
    /// (the two coincide for a flat density of states).
    pub big_delta_p_b_tilde: Option<P>,
    /// Dyson index: 1 orthogonal, 2 unitary.
    pub beta: u8,
    /// `γ = Σ_i Ω^{-1}(E_i)`; equals `2πD/t_H` for a flat density of states.
    pub gamma: P,
    pub dim: usize,
    pub d_b: usize,
    pub t_heisenberg: P,
}

/// Shift-ramp-plateau prediction:
/// `K_A(t) = δP_B/D_A + D^{-1}(βπD)^{-1} γ t (1 + D_B ΔP̃_B)` on the ramp,
/// `K_A(t) = δP_B/D_A + D^{-1}(1 + D_B ΔP_B)` on the plateau, branching at
/// `t_H`.
pub fn eth_prediction<P: RealScalar>(params: &EthCurveParams<P>, d_a: usize, t: P) -> P {
    let d = P::of(params.dim as f64);
    let db = P::of(params.d_b as f64);
    let shift = params.delta_p_b / P::of(d_a as f64);
    let tilde = params.big_delta_p_b_tilde.unwrap_or(params.big_delta_p_b);
    let bulk = if t <= params.t_heisenberg {
        params.gamma * t * (P::one() + db * tilde) / (P::of(params.beta as f64) * P::PI() * d)
    } else {
        P::one() + db * params.big_delta_p_b
    };
    shift + bulk / d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{build_v3, pauli, Axis};
    use crate::rmt::{AnalyticParams, SymmetryClass};
    use crate::scalar::cplx;
    use crate::C64;

    #[test]
    fn mask_basics() {
        let m = SubsystemMask::from_sites(4, &[2, 3]).unwrap();
        assert_eq!(m.bitstring(), "0110");
        assert_eq!(m.d_a(), 4);
        assert_eq!(m.d_b(), 4);
        assert!(m.contains(2) && m.contains(3));
        assert!(!m.contains(1) && !m.contains(4));
        assert_eq!(m.complement().bitstring(), "1001");
        assert_eq!(SubsystemMask::from_bitstring("0110").unwrap(), m);
        assert_eq!(m.subsets().len(), 4);
        assert_eq!(SubsystemMask::all_of_size(4, 2).len(), 6);
        assert_eq!(SubsystemMask::centered(6, 3).unwrap().bitstring(), "011100");
        assert_eq!(SubsystemMask::centered(6, 4).unwrap().bitstring(), "011110");
    }

    #[test]
    fn mask_weight_restriction() {
        let m = SubsystemMask::from_sites(4, &[1, 4]).unwrap();
        let outcome = SubsystemMask::from_sites(4, &[1, 3, 4]).unwrap().index_bits();
        assert_eq!(m.weight_in_a(outcome), 2);
        let empty = SubsystemMask::empty(4);
        assert_eq!(empty.weight_in_a(outcome), 0);
    }

    #[test]
    fn sff_single_reference_values() {
        let id = DenseOperator::<f64>::identity(4);
        assert_eq!(sff_single(&id).unwrap(), 1.0);
        let sz = DenseOperator::<f64>::unitary(pauli::<f64>(Axis::Z)).unwrap();
        assert_eq!(sff_single(&sz).unwrap(), 0.0);
        let mut d = Array2::<C64>::zeros((2, 2));
        d[[0, 0]] = C64::new(1.0, 0.0);
        d[[1, 1]] = C64::new(0.0, 1.0);
        let u = DenseOperator::<f64>::unitary(d).unwrap();
        assert!((sff_single(&u).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn psff_single_limits() {
        let id = DenseOperator::<f64>::identity(8);
        for mask in [
            SubsystemMask::empty(3),
            SubsystemMask::from_sites(3, &[2]).unwrap(),
            SubsystemMask::full(3),
        ] {
            assert!((psff_single(&id, &mask).unwrap() - 1.0).abs() < 1e-14);
        }
        let mut rng = crate::rng::stream(5, &[1], "psff-test");
        let u = rmt::sample::<f64, _>(EnsembleKind::Cue, 8, &mut rng).unwrap();
        let full = SubsystemMask::full(3);
        assert!((psff_single(&u, &full).unwrap() - sff_single(&u).unwrap()).abs() < 1e-12);
        assert!((psff_single(&u, &SubsystemMask::empty(3)).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn reduced_density_product_and_bell() {
        let mask = SubsystemMask::from_sites(2, &[1]).unwrap();
        let mut prod = Array1::<C64>::zeros(4);
        prod[0] = C64::new(1.0, 0.0);
        let rho = reduced_density::<f64>(prod.view(), &mask);
        assert!((rho[[0, 0]] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(rho[[1, 1]].norm() < 1e-15);

        let s = std::f64::consts::FRAC_1_SQRT_2;
        let mut bell = Array1::<C64>::zeros(4);
        bell[0] = C64::new(s, 0.0);
        bell[3] = C64::new(s, 0.0);
        let rho = reduced_density::<f64>(bell.view(), &mask);
        assert!((rho[[0, 0]] - C64::new(0.5, 0.0)).norm() < 1e-14);
        assert!((rho[[1, 1]] - C64::new(0.5, 0.0)).norm() < 1e-14);
        assert!(rho[[0, 1]].norm() < 1e-15);
    }

    #[test]
    fn schmidt_symmetry_of_purity() {
        let mut rng = crate::rng::stream(9, &[2], "schmidt");
        let n = 4usize;
        let dim = 1 << n;
        let mut state = Array1::<C64>::zeros(dim);
        let mut norm = 0.0;
        for k in 0..dim {
            let re = f64::std_normal(&mut rng);
            let im = f64::std_normal(&mut rng);
            state[k] = C64::new(re, im);
            norm += state[k].norm_sqr();
        }
        let norm = norm.sqrt();
        state.mapv_inplace(|z| z / norm);
        for sites in [&[1usize][..], &[1, 3][..], &[2, 3, 4][..]] {
            let mask = SubsystemMask::from_sites(n, sites).unwrap();
            let rho_b = reduced_density::<f64>(state.view(), &mask);
            let rho_a = reduced_density::<f64>(state.view(), &mask.complement());
            let pb = overlap_trace::<f64>(&rho_b, &rho_b);
            let pa = overlap_trace::<f64>(&rho_a, &rho_a);
            assert!((pa - pb).abs() < 1e-10, "Schmidt symmetry violated");
        }
    }

    #[test]
    fn eigen_decompose_hermitian_and_floquet() {
        let sz = DenseOperator::<f64>::hermitian(pauli::<f64>(Axis::Z)).unwrap();
        let data = eigen_decompose(&sz, None).unwrap();
        assert_eq!(data.energies.to_vec(), vec![-1.0, 1.0]);

        let mut d = Array2::<C64>::zeros((2, 2));
        d[[0, 0]] = C64::from_polar(1.0, -0.3);
        d[[1, 1]] = C64::from_polar(1.0, -2.9);
        let v = DenseOperator::<f64>::unitary(d).unwrap();
        let data = eigen_decompose(&v, Some(1.0)).unwrap();
        assert!((data.energies[0] - 0.3).abs() < 1e-12);
        assert!((data.energies[1] - 2.9).abs() < 1e-12);
    }

    #[test]
    fn eigen_decompose_validates_on_gue() {
        let mut rng = crate::rng::stream(12, &[0], "gue-residual");
        let h = rmt::sample::<f64, _>(EnsembleKind::Gue, 64, &mut rng).unwrap();
        let data = eigen_decompose(&h, None).unwrap();
        assert_eq!(data.energies.len(), 64);
        assert!(data.energies.windows(2).into_iter().all(|w| w[0] <= w[1]));
    }

    #[test]
    fn purity_of_diagonal_hamiltonian_eigenstates_is_one() {
        // A diagonal Hamiltonian with distinct entries has computational
        // basis eigenstates: all reduced states are pure.
        let mut h = Array2::<C64>::zeros((4, 4));
        for k in 0..4 {
            h[[k, k]] = C64::new(k as f64, 0.0);
        }
        let op = DenseOperator::<f64>::hermitian(h).unwrap();
        let data = eigen_decompose(&op, None).unwrap();
        let mask = SubsystemMask::from_sites(2, &[1]).unwrap();
        let eth = purity_and_overlaps(&data, &mask).unwrap();
        assert!((eth.p_b - 1.0).abs() < 1e-12);
        assert_eq!(eth.delta_p_b, eth.p_b - eth.q_b);
        assert!((eth.big_delta_p_b - (eth.q_b - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn gap_ratio_reference_cases() {
        let equal: Vec<f64> = (0..10).map(|k| k as f64).collect();
        assert!((gap_ratio_mean(&equal).unwrap() - 1.0).abs() < 1e-12);
        let with_zero = [0.0, 0.0, 1.0];
        assert_eq!(gap_ratio_mean(&with_zero).unwrap(), 0.0);
        assert!(gap_ratio_mean(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn spectrum_rescale_reference_cases() {
        let e = [0.0, 2.0, 4.0, 6.0];
        let r = spectrum_rescale(&e, 1.0).unwrap();
        assert_eq!(r, vec![0.0, 1.0, 2.0, 3.0]);
        let same = spectrum_rescale(&r, 1.0).unwrap();
        assert_eq!(same, r);
    }

    #[test]
    fn ensemble_form_factor_single_realization_matches_psff_single() {
        let reg = SpinRegister::new(3).unwrap();
        let model: ModelSpec<f64> = ModelSpec::v3_default(1.0);
        let mask = SubsystemMask::centered(3, 2).unwrap();
        let grid = TimeGrid::FloquetSteps(vec![1, 2, 5]);
        let series = ensemble_form_factor(&model, reg, &[mask], &grid, 1, 77).unwrap();
        let dis = sample_disorder(&model, reg, 77, 0);
        let v = build_v3(&model, &dis, reg).unwrap();
        for (k, &n) in [1u64, 2, 5].iter().enumerate() {
            let t = crate::hilbert::floquet_power(&v, n).unwrap();
            let want = psff_single(&t, &mask).unwrap();
            assert!(
                (series[0].values[k] - want).abs() < 1e-12,
                "step {n}: {} vs {want}",
                series[0].values[k]
            );
        }
    }

    #[test]
    fn hamiltonian_runner_matches_direct_evolution() {
        let reg = SpinRegister::new(3).unwrap();
        let model = ModelSpec::IsingLongRange {
            j: 1.0,
            alpha: 1.2,
            w: 1.0,
        };
        let masks = [
            SubsystemMask::full(3),
            SubsystemMask::from_sites(3, &[2]).unwrap(),
        ];
        let grid = TimeGrid::Times(vec![0.7, 1.9]);
        let series = ensemble_form_factor(&model, reg, &masks, &grid, 1, 5).unwrap();

        let dis = sample_disorder(&model, reg, 5, 0);
        let h = crate::hilbert::build_ising(&model, &dis, reg).unwrap();
        for (k, &t) in [0.7, 1.9].iter().enumerate() {
            let tt = crate::hilbert::evolve_hamiltonian(&h, t).unwrap();
            let want_full = sff_single(&tt).unwrap();
            let want_mid = psff_single(&tt, &masks[1]).unwrap();
            assert!((series[0].values[k] - want_full).abs() < 1e-10);
            assert!((series[1].values[k] - want_mid).abs() < 1e-10);
        }
    }

    #[test]
    fn plateau_consistency_cue16() {
        // Ensemble PSFF far past t_H equals P_B / D_A within 3 stderr.
        let reg = SpinRegister::new(4).unwrap();
        let model = ModelSpec::RmtEnsemble {
            kind: EnsembleKind::Cue,
            dim: 16,
        };
        let mask = SubsystemMask::centered(4, 2).unwrap();
        let steps: Vec<u64> = (64..=128).step_by(8).collect();
        let grid = TimeGrid::FloquetSteps(steps);
        let opts = EnsembleOptions {
            with_eth: true,
            ..Default::default()
        };
        let out = ensemble_run(&model, reg, &[mask], &grid, 400, 2024, &opts).unwrap();
        let series = &out.series[0];
        let eth = &out.eth.as_ref().unwrap()[0];
        let mean_tail: f64 = series.values.iter().sum::<f64>() / series.len() as f64;
        let want = eth.mean.p_b / mask.d_a() as f64;
        let se = series.stderr.as_ref().unwrap().iter().sum::<f64>() / series.len() as f64;
        assert!(
            (mean_tail - want).abs() < 3.0 * se,
            "plateau {mean_tail} vs P_B/D_A {want} (se {se})"
        );
        let (p_b, _) = rmt::pq_analytic::<f64>(SymmetryClass::Unitary, 4, 4).unwrap();
        assert!((eth.mean.p_b - p_b).abs() < 5.0 * eth.p_b_stderr);
    }

    #[test]
    fn shift_extract_full_mask_is_zero() {
        let reg = SpinRegister::new(3).unwrap();
        let model: ModelSpec<f64> = ModelSpec::v3_default(1.0);
        let masks = [SubsystemMask::full(3), SubsystemMask::full(3)];
        let grid = TimeGrid::FloquetSteps(vec![1, 2, 3]);
        let s = ensemble_form_factor(&model, reg, &masks, &grid, 3, 1).unwrap();
        let shift = shift_extract(&s[0], &s[1], 2.0 * model.period()).unwrap();
        assert_eq!(shift, 0.0);
        assert!(shift_extract(&s[0], &s[1], 0.123).is_err());
    }

    #[test]
    fn eth_prediction_cue_consistency() {
        // With ΔP_B = 0, β = 2, γ = 2πD/t_H the ramp reduces to
        // δP_B/D_A + t/(D t_H) and the plateau to δP_B/D_A + 1/D.
        let d = 256;
        let t_h = 32.0;
        let params = EthCurveParams {
            delta_p_b: 0.12,
            big_delta_p_b: 0.0,
            big_delta_p_b_tilde: None,
            beta: 2,
            gamma: 2.0 * std::f64::consts::PI * d as f64 / t_h,
            dim: d,
            d_b: 16,
            t_heisenberg: t_h,
        };
        let d_a = 16;
        let t = 8.0;
        let want = 0.12 / d_a as f64 + t / (d as f64 * t_h);
        assert!((eth_prediction(&params, d_a, t) - want).abs() < 1e-15);
        let plateau = eth_prediction(&params, d_a, 1e9);
        assert!((plateau - (0.12 / d_a as f64 + 1.0 / d as f64)).abs() < 1e-15);
    }

    #[test]
    fn eth_prediction_matches_analytic_psff_on_plateau() {
        let (d_a, d_b) = (8usize, 8usize);
        let d = d_a * d_b;
        let (p_b, q_b) = rmt::pq_analytic::<f64>(SymmetryClass::Unitary, d_a, d_b).unwrap();
        let t_h = d as f64;
        let params = EthCurveParams {
            delta_p_b: p_b - q_b,
            big_delta_p_b: q_b - 1.0 / d_b as f64,
            big_delta_p_b_tilde: None,
            beta: 2,
            gamma: 2.0 * std::f64::consts::PI * d as f64 / t_h,
            dim: d,
            d_b,
            t_heisenberg: t_h,
        };
        let ap = AnalyticParams::circular(d, 1.0).unwrap();
        let plateau_t = 10.0 * t_h;
        let eth = eth_prediction(&params, d_a, plateau_t);
        let exact = rmt::psff_analytic(EnsembleKind::Cue, &ap, d_a, d_b, plateau_t).unwrap();
        assert!(
            (eth - exact).abs() < 2.0 / d as f64,
            "eth {eth} vs exact {exact}"
        );
    }

    #[test]
    fn ramp_detection_on_analytic_cue() {
        let d = 64;
        let ap = AnalyticParams::circular(d, 1.0).unwrap();
        let times: Vec<f64> = (1..=3 * d as u64).map(|n| n as f64).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|&t| rmt::sff_analytic(EnsembleKind::Cue, &ap, t).unwrap())
            .collect();
        let series = FormFactorSeries::new(
            times,
            values,
            None,
            SubsystemMask::full(6),
            Provenance::Analytic,
            1,
        )
        .unwrap();
        let (s, e) = detect_ramp_window(&series).unwrap();
        let mid = ramp_midpoint_time(&series).unwrap();
        assert!(s < e);
        assert!(mid < d as f64, "midpoint {mid} beyond t_H");
        let onset = plateau_onset_index(&series, 0.25).unwrap();
        assert!((series.times[onset] - 64.0).abs() < 18.0);
        let th = thouless_time(&series, &series.values).unwrap();
        assert_eq!(th, series.times[0]);
    }

    #[test]
    fn quasi_energy_branch_in_range() {
        let reg = SpinRegister::new(3).unwrap();
        let model: ModelSpec<f64> = ModelSpec::v3_default(1.0);
        let dis = sample_disorder(&model, reg, 3, 0);
        let v = build_v3(&model, &dis, reg).unwrap();
        let tau = model.period();
        let data = eigen_decompose(&v, Some(tau)).unwrap();
        let omega = 2.0 * std::f64::consts::PI / tau;
        for &e in data.energies.iter() {
            assert!((0.0..omega).contains(&e));
        }
        // Reconstruction: X diag(e^{-i E tau}) X† = V.
        let phases = data.energies.mapv(|e| cplx::<f64>(0.0, -e * tau).exp());
        let recon = crate::linalg::reconstruct::<f64>(&data.vectors, &phases);
        assert!(crate::linalg::max_abs_diff::<f64>(&recon, v.data()) < 1e-9);
    }
}
