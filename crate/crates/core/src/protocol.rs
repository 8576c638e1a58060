//! Shot-by-shot simulation of the randomized-measurement protocol and its
//! estimators, plus exact enumeration oracles for the unbiasedness proof.
//!
//! One experimental run: prepare `|0…0⟩`, apply independent local unitaries
//! `U = ⊗ u_i` from a 2-design, evolve with `T(t)`, apply `U†`, measure in
//! the computational basis. The single-shot estimate of the PSFF on `A` is
//! `(-2)^{-|s_A|}` of the outcome bitstring `s`.

use crate::error::{Error, Result};
use crate::hilbert::{apply_single_qubit, KickedPropagator, ModelSpec, SpinRegister, sample_disorder};
use crate::linalg::{adjoint, DenseOperator, OperatorKind};
use crate::rmt;
use crate::rng::{stream, SeedLineage};
use crate::scalar::{cplx, creal, RealScalar};
use crate::spectral::SubsystemMask;
use ndarray::prelude::*;
use ndarray_linalg::Scalar as NdScalar;
use rand::Rng;
use rayon::prelude::*;

/// Cost guard for exact enumeration over all `24^N` Clifford tuples.
pub const ENUMERATION_SITE_CAP: usize = 3;
/// Cost guard for the doubled-space Bell identity check.
pub const BELL_SITE_CAP: usize = 6;

// ---------------------------------------------------------------------------
// Local 2-designs
// ---------------------------------------------------------------------------

/// Which unitary 2-design the local rotations are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoDesignKind {
    /// The 24-element single-qubit Clifford group (default).
    CliffordGroup1Q,
    /// Haar-random U(2).
    HaarU2,
}

/// Generate the single-qubit Clifford group, 24 elements up to global
/// phase, by closing `{H, S}` under multiplication. Each element is
/// phase-canonicalized so the first nonvanishing entry is real positive.
pub fn clifford_table<P: RealScalar>() -> Vec<Array2<P::Cplx>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let h: Array2<P::Cplx> = array![
        [cplx::<P>(s, 0.0), cplx::<P>(s, 0.0)],
        [cplx::<P>(s, 0.0), cplx::<P>(-s, 0.0)]
    ];
    let ph: Array2<P::Cplx> = array![
        [cplx::<P>(1.0, 0.0), cplx::<P>(0.0, 0.0)],
        [cplx::<P>(0.0, 0.0), cplx::<P>(0.0, 1.0)]
    ];
    let canonicalize = |m: &Array2<P::Cplx>| -> Array2<P::Cplx> {
        let mut out = m.clone();
        for k in 0..4 {
            let z = out[[k / 2, k % 2]];
            if z.abs() > P::of(1e-8) {
                let phase = z.conj() / creal::<P>(z.abs());
                out.mapv_inplace(|v| v * phase);
                break;
            }
        }
        out
    };
    let key = |m: &Array2<P::Cplx>| -> [(i64, i64); 4] {
        let mut k = [(0i64, 0i64); 4];
        for (idx, item) in k.iter_mut().enumerate() {
            let z = m[[idx / 2, idx % 2]];
            let scale = 1e6;
            *item = (
                (z.re().to_f64().unwrap() * scale).round() as i64,
                (z.im().to_f64().unwrap() * scale).round() as i64,
            );
        }
        k
    };
    let mut table: Vec<Array2<P::Cplx>> = vec![canonicalize(&Array2::eye(2))];
    let mut seen = std::collections::HashSet::new();
    seen.insert(key(&table[0]));
    let mut frontier = table.clone();
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for g in &frontier {
            for gen in [&h, &ph] {
                let prod = canonicalize(&gen.dot(g));
                if seen.insert(key(&prod)) {
                    table.push(prod.clone());
                    next.push(prod);
                }
            }
        }
        frontier = next;
    }
    debug_assert_eq!(table.len(), 24);
    table
}

/// Draws independent local unitaries from the chosen 2-design. Build once
/// per batch; drawing is cheap.
pub struct LocalUnitarySampler<P: RealScalar> {
    kind: TwoDesignKind,
    clifford: Vec<Array2<P::Cplx>>,
}

impl<P: RealScalar> LocalUnitarySampler<P> {
    pub fn new(kind: TwoDesignKind) -> Self {
        let clifford = match kind {
            TwoDesignKind::CliffordGroup1Q => clifford_table::<P>(),
            TwoDesignKind::HaarU2 => Vec::new(),
        };
        Self { kind, clifford }
    }

    pub fn kind(&self) -> TwoDesignKind {
        self.kind
    }

    pub fn table(&self) -> &[Array2<P::Cplx>] {
        &self.clifford
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Array2<P::Cplx> {
        match self.kind {
            TwoDesignKind::CliffordGroup1Q => {
                let k = rng.random_range(0..self.clifford.len());
                self.clifford[k].clone()
            }
            TwoDesignKind::HaarU2 => {
                rmt::sample_haar_unitary::<P, R>(2, rng).expect("2x2 Haar sample")
            }
        }
    }

    /// `U = ⊗_{i=1..N} u_i`, one draw per site.
    pub fn draw_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Array2<P::Cplx>> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

/// One draw of local unitaries from a 2-design (convenience wrapper).
pub fn sample_local_unitaries<P: RealScalar, R: Rng + ?Sized>(
    kind: TwoDesignKind,
    n: usize,
    rng: &mut R,
) -> Vec<Array2<P::Cplx>> {
    LocalUnitarySampler::<P>::new(kind).draw_n(n, rng)
}

// ---------------------------------------------------------------------------
// Shots
// ---------------------------------------------------------------------------

/// Time evolution applied inside a shot.
pub enum Evolution<'a, P: RealScalar> {
    /// Apply a dense operator once.
    Matrix(&'a Array2<P::Cplx>),
    /// Apply a dense one-period operator `n` times.
    MatrixPower { matrix: &'a Array2<P::Cplx>, periods: u64 },
    /// Apply a kicked-chain period `n` times without forming the matrix.
    Kicked { propagator: &'a KickedPropagator<P>, periods: u64 },
}

impl<'a, P: RealScalar> Evolution<'a, P> {
    pub fn apply(&self, state: &mut Array1<P::Cplx>) {
        match self {
            Evolution::Matrix(m) => *state = m.dot(state),
            Evolution::MatrixPower { matrix, periods } => {
                for _ in 0..*periods {
                    *state = matrix.dot(state);
                }
            }
            Evolution::Kicked { propagator, periods } => {
                for _ in 0..*periods {
                    propagator.apply_period(state);
                }
            }
        }
    }
}

/// Outcome of one experimental run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShotRecord<P: RealScalar> {
    /// Disorder realization index this run used.
    pub realization: u64,
    /// Physical time of the evolution.
    pub time: P,
    /// Outcome bits in basis-index convention (site 1 = most significant).
    pub bits: u64,
    pub n_sites: usize,
    pub lineage: SeedLineage,
}

impl<P: RealScalar> ShotRecord<P> {
    /// Bitstring with site 1 first.
    pub fn bitstring(&self) -> String {
        (0..self.n_sites)
            .map(|k| {
                if (self.bits >> (self.n_sites - 1 - k)) & 1 == 1 {
                    '1'
                } else {
                    '0'
                }
            })
            .collect()
    }

    /// Total weight `|s|`.
    pub fn weight(&self) -> u32 {
        self.bits.count_ones()
    }
}

/// The state after `U_final · T · U_init |0…0⟩`.
///
/// `finals` are the 2x2 rotations applied after the evolution; the ideal
/// protocol uses the adjoints of `locals`.
pub fn final_state<P: RealScalar>(
    reg: SpinRegister,
    evolution: &Evolution<'_, P>,
    locals: &[Array2<P::Cplx>],
    finals: &[Array2<P::Cplx>],
) -> Result<Array1<P::Cplx>> {
    let n = reg.n_sites();
    if locals.len() != n || finals.len() != n {
        return Err(Error::Dimension(format!(
            "need {n} local unitaries, got {} initial / {} final",
            locals.len(),
            finals.len()
        )));
    }
    let mut state = Array1::<P::Cplx>::zeros(reg.dim());
    state[0] = cplx::<P>(1.0, 0.0);
    {
        let s = state.as_slice_mut().expect("contiguous state");
        for (site0, u) in locals.iter().enumerate() {
            apply_single_qubit::<P>(u, site0 + 1, reg, s);
        }
    }
    evolution.apply(&mut state);
    {
        let s = state.as_slice_mut().expect("contiguous state");
        for (site0, u) in finals.iter().enumerate() {
            apply_single_qubit::<P>(u, site0 + 1, reg, s);
        }
    }
    Ok(state)
}

/// Born probabilities of a state, validated to sum to 1 within 1e-8.
pub fn born_probabilities<P: RealScalar>(state: &Array1<P::Cplx>) -> Result<Vec<P>> {
    let probs: Vec<P> = state.iter().map(|z| z.abs().powi(2)).collect();
    let total: P = probs.iter().copied().sum();
    let dev = (total - P::one()).abs();
    if dev > P::of(1e-8) {
        return Err(Error::BornNormalization {
            deviation: dev.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(probs)
}

/// Inverse-CDF sample of a basis index from Born probabilities.
pub fn sample_outcome<P: RealScalar, R: Rng + ?Sized>(probs: &[P], rng: &mut R) -> u64 {
    let u = P::uniform(rng, P::zero(), P::one());
    let mut acc = P::zero();
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k as u64;
        }
    }
    (probs.len() - 1) as u64
}

/// One protocol run for a fixed evolution operator: apply the random
/// rotations, evolve, rotate back, measure once.
pub fn run_shot<P: RealScalar, R: Rng + ?Sized>(
    t: &DenseOperator<P>,
    locals: &[Array2<P::Cplx>],
    rng: &mut R,
) -> Result<u64> {
    if t.kind() != OperatorKind::Unitary {
        return Err(Error::InvalidInput("run_shot requires a unitary evolution".into()));
    }
    let n = locals.len();
    if 1usize << n != t.dim() {
        return Err(Error::Dimension(format!(
            "{n} local unitaries do not match dimension {}",
            t.dim()
        )));
    }
    let reg = SpinRegister::new(n)?;
    let finals: Vec<_> = locals.iter().map(|u| adjoint::<P>(u)).collect();
    let state = final_state::<P>(reg, &Evolution::Matrix(t.data()), locals, &finals)?;
    let probs = born_probabilities::<P>(&state)?;
    Ok(sample_outcome(&probs, rng))
}

/// `Σ_s p(s) (-2)^{-|s_A|}`: the quantum-mechanical expectation of the
/// single-shot estimator for a fixed rotation draw.
pub fn masked_moment<P: RealScalar>(probs: &[P], mask: &SubsystemMask) -> P {
    let mut acc = P::zero();
    for (s, &p) in probs.iter().enumerate() {
        acc += p * shot_value::<P>(mask.weight_in_a(s as u64));
    }
    acc
}

/// `(-2)^{-w}`.
#[inline]
pub fn shot_value<P: RealScalar>(weight: u32) -> P {
    P::of(-0.5).powi(weight as i32)
}

// ---------------------------------------------------------------------------
// Estimators
// ---------------------------------------------------------------------------

/// What an estimate refers to: one mask, or the average over all masks of a
/// given size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskSelector {
    Mask(SubsystemMask),
    SizeClass { n_sites: usize, n_a: usize },
}

/// Mean, standard error and shot count of one estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorResult<P: RealScalar> {
    pub mean: P,
    pub stderr: P,
    pub m: usize,
    pub subset: MaskSelector,
}

fn mean_stderr<P: RealScalar>(values: impl Iterator<Item = P>) -> Result<(P, P, usize)> {
    let mut n = 0usize;
    let mut mean = P::zero();
    let mut m2 = P::zero();
    for v in values {
        n += 1;
        let delta = v - mean;
        mean += delta / P::of(n as f64);
        m2 += delta * (v - mean);
    }
    if n == 0 {
        return Err(Error::EmptyShots);
    }
    let stderr = if n > 1 {
        (m2 / P::of((n - 1) as f64) / P::of(n as f64)).sqrt()
    } else {
        P::zero()
    };
    Ok((mean, stderr, n))
}

/// SFF estimate `mean (-2)^{-|s|}` over the shots.
pub fn estimate_sff<P: RealScalar>(shots: &[ShotRecord<P>]) -> Result<EstimatorResult<P>> {
    let n_sites = shots.first().map(|s| s.n_sites).unwrap_or(0);
    let (mean, stderr, m) = mean_stderr(shots.iter().map(|s| shot_value::<P>(s.weight())))?;
    Ok(EstimatorResult {
        mean,
        stderr,
        m,
        subset: MaskSelector::Mask(SubsystemMask::full(n_sites)),
    })
}

/// PSFF estimate `mean (-2)^{-|s_A|}`, post-processing the same shots.
pub fn estimate_psff<P: RealScalar>(
    shots: &[ShotRecord<P>],
    mask: &SubsystemMask,
) -> Result<EstimatorResult<P>> {
    if let Some(s) = shots.first() {
        if s.n_sites != mask.n_sites() {
            return Err(Error::Dimension(format!(
                "mask over {} sites, shots over {}",
                mask.n_sites(),
                s.n_sites
            )));
        }
    }
    let (mean, stderr, m) = mean_stderr(
        shots
            .iter()
            .map(|s| shot_value::<P>(mask.weight_in_a(s.bits))),
    )?;
    Ok(EstimatorResult {
        mean,
        stderr,
        m,
        subset: MaskSelector::Mask(*mask),
    })
}

/// Per-shot value of the subsystem-size-averaged PSFF estimator,
/// `binom(N, N_A)^{-1} Σ_{|A| = N_A} (-2)^{-|s_A|}`, which depends on the
/// outcome only through its total weight.
pub fn avg_psff_shot_value<P: RealScalar>(n_sites: usize, n_a: usize, weight: u32) -> P {
    let k = weight as usize;
    let mut acc = P::zero();
    // Hypergeometric sum over the overlap j of A with the set bits.
    for j in 0..=n_a.min(k) {
        if n_a - j > n_sites - k {
            continue;
        }
        let ways = binomial(k, j) * binomial(n_sites - k, n_a - j);
        acc += P::of(ways as f64) * shot_value::<P>(j as u32);
    }
    acc / P::of(binomial(n_sites, n_a) as f64)
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Averaged-PSFF estimate over all subsystems of `n_a` sites, from the
/// same shots (the per-mask estimates are correlated by construction).
pub fn estimate_avg_psff<P: RealScalar>(
    shots: &[ShotRecord<P>],
    n_a: usize,
) -> Result<EstimatorResult<P>> {
    let n_sites = shots.first().map(|s| s.n_sites).unwrap_or(0);
    if n_a > n_sites && !shots.is_empty() {
        return Err(Error::InvalidInput(format!(
            "subsystem size {n_a} exceeds register of {n_sites}"
        )));
    }
    let (mean, stderr, m) = mean_stderr(
        shots
            .iter()
            .map(|s| avg_psff_shot_value::<P>(n_sites, n_a, s.weight())),
    )?;
    Ok(EstimatorResult {
        mean,
        stderr,
        m,
        subset: MaskSelector::SizeClass { n_sites, n_a },
    })
}

// ---------------------------------------------------------------------------
// Protocol orchestration
// ---------------------------------------------------------------------------

/// Simulate `m` independent single-shot runs of the protocol for a Floquet
/// model at `periods` driving periods. Each run draws a fresh disorder
/// realization and fresh local unitaries; runs are independent and
/// reproducible from `(master_seed, time_index, shot_index)`.
pub fn simulate_floquet_shots<P: RealScalar>(
    model: &ModelSpec<P>,
    reg: SpinRegister,
    periods: u64,
    time_index: u64,
    m: usize,
    design: TwoDesignKind,
    master_seed: u64,
) -> Result<Vec<ShotRecord<P>>> {
    if !model.is_floquet() {
        return Err(Error::InvalidInput(
            "simulate_floquet_shots requires a Floquet model".into(),
        ));
    }
    model.validate()?;
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
            let bits = one_floquet_shot(
                model,
                reg,
                periods,
                master_seed,
                realization,
                &locals,
                &finals,
                &mut born_rng,
            )?;
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

/// Build the evolution for one Floquet-model shot and measure once.
#[allow(clippy::too_many_arguments)]
pub fn one_floquet_shot<P: RealScalar, R: Rng + ?Sized>(
    model: &ModelSpec<P>,
    reg: SpinRegister,
    periods: u64,
    master_seed: u64,
    realization: u64,
    locals: &[Array2<P::Cplx>],
    finals: &[Array2<P::Cplx>],
    born_rng: &mut R,
) -> Result<u64> {
    let state = floquet_shot_state(model, reg, periods, master_seed, realization, locals, finals)?;
    let probs = born_probabilities::<P>(&state)?;
    Ok(sample_outcome(&probs, born_rng))
}

/// The pre-measurement state of one Floquet-model run: fresh disorder for
/// `realization`, the given initial and final rotations. Exposed for the
/// noise module, which substitutes decohered measurements or decorrelated
/// final rotations.
pub fn floquet_shot_state<P: RealScalar>(
    model: &ModelSpec<P>,
    reg: SpinRegister,
    periods: u64,
    master_seed: u64,
    realization: u64,
    locals: &[Array2<P::Cplx>],
    finals: &[Array2<P::Cplx>],
) -> Result<Array1<P::Cplx>> {
    let state = match model {
        ModelSpec::FloquetV3 { .. } | ModelSpec::FloquetV2 { .. } => {
            let dis = sample_disorder(model, reg, master_seed, realization);
            let prop = KickedPropagator::new(model, &dis, reg)?;
            // For long evolutions the dense one-period matrix amortizes
            // better than factor-apply chains.
            if periods >= 40 {
                let v = prop.to_unitary()?;
                final_state::<P>(
                    reg,
                    &Evolution::MatrixPower {
                        matrix: v.data(),
                        periods,
                    },
                    locals,
                    finals,
                )?
            } else {
                final_state::<P>(
                    reg,
                    &Evolution::Kicked {
                        propagator: &prop,
                        periods,
                    },
                    locals,
                    finals,
                )?
            }
        }
        ModelSpec::RmtEnsemble { kind, dim } => {
            let mut rng = stream(master_seed, &[realization], "rmt-realization");
            let v = rmt::sample::<P, _>(*kind, *dim, &mut rng)?;
            final_state::<P>(
                reg,
                &Evolution::MatrixPower {
                    matrix: v.data(),
                    periods,
                },
                locals,
                finals,
            )?
        }
        _ => return Err(Error::InvalidInput("not a Floquet model".into())),
    };
    Ok(state)
}

// ---------------------------------------------------------------------------
// Shot record files
// ---------------------------------------------------------------------------

/// Serialize shots as `realization,time,bitstring` lines. Times use 17
/// significant digits so the round trip is bit-exact at f64.
pub fn write_shot_records<P: RealScalar, W: std::io::Write>(
    out: &mut W,
    shots: &[ShotRecord<P>],
) -> std::io::Result<()> {
    for s in shots {
        writeln!(
            out,
            "{},{:.16e},{}",
            s.realization,
            s.time.to_f64().unwrap_or(f64::NAN),
            s.bitstring()
        )?;
    }
    Ok(())
}

/// Parse a shot-record file produced by [`write_shot_records`]. The seed
/// lineage is not stored in the file; records are tagged with `master_seed`.
pub fn read_shot_records<P: RealScalar, B: std::io::BufRead>(
    input: B,
    master_seed: u64,
) -> Result<Vec<ShotRecord<P>>> {
    let mut shots = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidInput(format!("read error: {e}")))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let bad = |what: &str| {
            Error::InvalidInput(format!("shot file line {}: bad {what}", lineno + 1))
        };
        let realization: u64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("realization"))?;
        let time: f64 = parts
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("time"))?;
        let bitstring = parts.next().ok_or_else(|| bad("bitstring"))?;
        let n_sites = bitstring.len();
        if n_sites == 0 || n_sites > 64 {
            return Err(bad("bitstring length"));
        }
        let mut bits = 0u64;
        for (k, ch) in bitstring.chars().enumerate() {
            match ch {
                '1' => bits |= 1u64 << (n_sites - 1 - k),
                '0' => {}
                _ => return Err(bad("bitstring character")),
            }
        }
        shots.push(ShotRecord {
            realization,
            time: P::of(time),
            bits,
            n_sites,
            lineage: SeedLineage::new(master_seed, realization),
        });
    }
    Ok(shots)
}

// ---------------------------------------------------------------------------
// Exact oracles
// ---------------------------------------------------------------------------

/// Exact protocol expectation `E_U E_QM[(-2)^{-|s_A|} | T]` by enumerating
/// every tuple of single-qubit Cliffords and every outcome. This is the
/// executable form of the unbiasedness proof: the result must equal the
/// PSFF of `T` on the mask.
pub fn exact_shot_expectation<P: RealScalar>(
    t: &DenseOperator<P>,
    mask: &SubsystemMask,
) -> Result<P> {
    let n = mask.n_sites();
    if 1usize << n != t.dim() {
        return Err(Error::Dimension(format!(
            "mask over {n} sites does not match dimension {}",
            t.dim()
        )));
    }
    if n > ENUMERATION_SITE_CAP {
        return Err(Error::EnumerationTooLarge {
            n_sites: n,
            cap: ENUMERATION_SITE_CAP,
        });
    }
    if t.kind() != OperatorKind::Unitary {
        return Err(Error::InvalidInput("oracle requires a unitary".into()));
    }
    let reg = SpinRegister::new(n)?;
    let table = clifford_table::<P>();
    let adjoints: Vec<_> = table.iter().map(|u| adjoint::<P>(u)).collect();
    let tuples = 24usize.pow(n as u32);
    let mut sum = P::zero();
    let mut locals: Vec<Array2<P::Cplx>> = vec![table[0].clone(); n];
    let mut finals: Vec<Array2<P::Cplx>> = vec![adjoints[0].clone(); n];
    for tuple in 0..tuples {
        let mut idx = tuple;
        for site0 in 0..n {
            let k = idx % 24;
            idx /= 24;
            locals[site0] = table[k].clone();
            finals[site0] = adjoints[k].clone();
        }
        let state = final_state::<P>(reg, &Evolution::Matrix(t.data()), &locals, &finals)?;
        let probs = born_probabilities::<P>(&state)?;
        sum += masked_moment(&probs, mask);
    }
    Ok(sum / P::of(tuples as f64))
}

/// Kronecker product of two square matrices.
pub fn kron<P: RealScalar>(a: &Array2<P::Cplx>, b: &Array2<P::Cplx>) -> Array2<P::Cplx> {
    let (ra, ca) = (a.nrows(), a.ncols());
    let (rb, cb) = (b.nrows(), b.ncols());
    let mut out = Array2::<P::Cplx>::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[[i * rb + k, j * cb + l]] = a[[i, j]] * b[[k, l]];
                }
            }
        }
    }
    out
}

/// Single-qubit twirl `E_u[u* Oᵀ uᵀ ⊗ u ρ u†]` by exact Clifford-group
/// enumeration, a 4x4 operator on the two-copy space.
pub fn twirl_clifford<P: RealScalar>(
    o: &Array2<P::Cplx>,
    rho: &Array2<P::Cplx>,
) -> Array2<P::Cplx> {
    let table = clifford_table::<P>();
    let mut acc = Array2::<P::Cplx>::zeros((4, 4));
    for u in &table {
        acc = acc + twirl_term::<P>(u, o, rho);
    }
    acc.mapv(|z| z * creal::<P>(P::one() / P::of(24.0)))
}

/// The same twirl estimated by Haar Monte Carlo over U(2).
pub fn twirl_haar_mc<P: RealScalar, R: Rng + ?Sized>(
    o: &Array2<P::Cplx>,
    rho: &Array2<P::Cplx>,
    samples: usize,
    rng: &mut R,
) -> Array2<P::Cplx> {
    let mut acc = Array2::<P::Cplx>::zeros((4, 4));
    for _ in 0..samples {
        let u = rmt::sample_haar_unitary::<P, R>(2, rng).expect("2x2 Haar sample");
        acc = acc + twirl_term::<P>(&u, o, rho);
    }
    acc.mapv(|z| z * creal::<P>(P::one() / P::of(samples as f64)))
}

fn twirl_term<P: RealScalar>(
    u: &Array2<P::Cplx>,
    o: &Array2<P::Cplx>,
    rho: &Array2<P::Cplx>,
) -> Array2<P::Cplx> {
    let u_conj = u.mapv(|z| z.conj());
    let u_t = u.t().to_owned();
    let u_adj = adjoint::<P>(u);
    let left = u_conj.dot(&o.t().to_owned()).dot(&u_t);
    let right = u.dot(rho).dot(&u_adj);
    kron::<P>(&left, &right)
}

/// The Bell-pair product state `|Φ+_N⟩ = 2^{-N/2} Σ_s |s⟩⊗|s⟩` on the
/// doubled space.
pub fn bell_pair_state<P: RealScalar>(n: usize) -> Array1<P::Cplx> {
    let d = 1usize << n;
    let amp = creal::<P>(P::one() / P::of(d as f64).sqrt());
    let mut phi = Array1::<P::Cplx>::zeros(d * d);
    for s in 0..d {
        phi[s * d + s] = amp;
    }
    phi
}

/// Survival probability of the Bell state under `1 ⊗ T`, computed literally
/// on the doubled space: `⟨Φ+|1⊗T|Φ+⟩⟨Φ+|1⊗T†|Φ+⟩`. Equals the
/// single-realization SFF.
pub fn bell_survival_check<P: RealScalar>(t: &DenseOperator<P>) -> Result<P> {
    if t.kind() != OperatorKind::Unitary {
        return Err(Error::InvalidInput("bell check requires a unitary".into()));
    }
    let d = t.dim();
    let n = d.trailing_zeros() as usize;
    if 1usize << n != d {
        return Err(Error::Dimension("dimension must be a power of two".into()));
    }
    if n > BELL_SITE_CAP {
        return Err(Error::EnumerationTooLarge {
            n_sites: n,
            cap: BELL_SITE_CAP,
        });
    }
    let phi = bell_pair_state::<P>(n);
    // (1 ⊗ T)|Φ⟩: apply T within each length-D block.
    let mut evolved = Array1::<P::Cplx>::zeros(d * d);
    for block in 0..d {
        let seg = phi.slice(s![block * d..(block + 1) * d]).to_owned();
        let out = t.data().dot(&seg);
        evolved.slice_mut(s![block * d..(block + 1) * d]).assign(&out);
    }
    let amp = phi
        .iter()
        .zip(evolved.iter())
        .fold(<P::Cplx as num_traits::Zero>::zero(), |acc, (a, b)| {
            acc + a.conj() * *b
        });
    Ok(amp.abs().powi(2))
}
