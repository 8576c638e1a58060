//! Spin registers, concrete disordered models and time-evolution operators.
//!
//! Basis convention used everywhere: a computational basis state of `N`
//! qubits is indexed by `b = sum_i s_i 2^(N-i)`, i.e. site 1 is the
//! leftmost tensor factor / most significant bit.

use crate::error::{Error, Result};
use crate::linalg::{herm_eig_op, sym_eig, DenseOperator, OperatorKind};
use crate::rmt::EnsembleKind;
use crate::rng::{realization_stream, SeedLineage};
use crate::scalar::{cis, cplx, creal, RealScalar};
use ndarray::prelude::*;
use ndarray::Zip;

/// Maximum register size accepted by default (`D = 2^14 = 16384`).
pub const DEFAULT_SITE_CAP: usize = 14;

/// A register of `N` spin-1/2 sites with Hilbert space dimension `D = 2^N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpinRegister {
    n_sites: usize,
    dim: usize,
}

impl SpinRegister {
    pub fn new(n_sites: usize) -> Result<Self> {
        Self::with_cap(n_sites, DEFAULT_SITE_CAP)
    }

    pub fn with_cap(n_sites: usize, cap: usize) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidInput("register needs at least one site".into()));
        }
        if n_sites > cap {
            return Err(Error::RegisterTooLarge { n_sites, cap });
        }
        Ok(Self {
            n_sites,
            dim: 1 << n_sites,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Bit position (from the least significant bit) carrying `site`.
    #[inline]
    pub fn bit(&self, site: usize) -> usize {
        self.n_sites - site
    }
}

/// Pauli axis label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Cyclic successor; the kicked models place the disorder field on the
    /// axis following the interaction axis.
    pub fn next(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::Z,
            Axis::Z => Axis::X,
        }
    }
}

/// 2x2 Pauli matrix for `axis`.
pub fn pauli<P: RealScalar>(axis: Axis) -> Array2<P::Cplx> {
    let z = cplx::<P>(0.0, 0.0);
    match axis {
        Axis::X => array![[z, cplx::<P>(1.0, 0.0)], [cplx::<P>(1.0, 0.0), z]],
        Axis::Y => array![[z, cplx::<P>(0.0, -1.0)], [cplx::<P>(0.0, 1.0), z]],
        Axis::Z => array![[cplx::<P>(1.0, 0.0), z], [z, cplx::<P>(-1.0, 0.0)]],
    }
}

/// Apply a 2x2 gate to `site` (1-based) of a contiguous state vector.
pub fn apply_single_qubit<P: RealScalar>(
    gate: &Array2<P::Cplx>,
    site: usize,
    reg: SpinRegister,
    v: &mut [P::Cplx],
) {
    let stride = 1usize << reg.bit(site);
    let dim = reg.dim();
    let g00 = gate[[0, 0]];
    let g01 = gate[[0, 1]];
    let g10 = gate[[1, 0]];
    let g11 = gate[[1, 1]];
    let mut base = 0;
    while base < dim {
        for k in base..base + stride {
            let a = v[k];
            let b = v[k + stride];
            v[k] = g00 * a + g01 * b;
            v[k + stride] = g10 * a + g11 * b;
        }
        base += 2 * stride;
    }
}

/// Left-multiply a matrix by `1 ⊗ … ⊗ gate ⊗ … ⊗ 1` acting on `site`,
/// pairing rows.
fn apply_single_qubit_rows<P: RealScalar>(
    gate: &Array2<P::Cplx>,
    site: usize,
    reg: SpinRegister,
    m: &mut Array2<P::Cplx>,
) {
    let stride = 1usize << reg.bit(site);
    let dim = reg.dim();
    let g00 = gate[[0, 0]];
    let g01 = gate[[0, 1]];
    let g10 = gate[[1, 0]];
    let g11 = gate[[1, 1]];
    let mut base = 0;
    while base < dim {
        for k in base..base + stride {
            let (mut top, mut bot) = m.multi_slice_mut((s![k, ..], s![k + stride, ..]));
            Zip::from(&mut top).and(&mut bot).for_each(|a, b| {
                let x = *a;
                let y = *b;
                *a = g00 * x + g01 * y;
                *b = g10 * x + g11 * y;
            });
        }
        base += 2 * stride;
    }
}

/// Embed a single-site operator as `1 ⊗ … ⊗ op ⊗ … ⊗ 1` with `op` at
/// position `site` (1-based, site 1 leftmost).
pub fn embed_site_operator<P: RealScalar>(
    op2x2: &DenseOperator<P>,
    site: usize,
    reg: SpinRegister,
) -> Result<DenseOperator<P>> {
    if op2x2.dim() != 2 {
        return Err(Error::Dimension(format!(
            "site operator must be 2x2, got {0}x{0}",
            op2x2.dim()
        )));
    }
    if site == 0 || site > reg.n_sites() {
        return Err(Error::SiteOutOfRange {
            site,
            n_sites: reg.n_sites(),
        });
    }
    let g = op2x2.data();
    let dim = reg.dim();
    let bit = reg.bit(site);
    let mut out = Array2::<P::Cplx>::zeros((dim, dim));
    for b in 0..dim {
        let s = (b >> bit) & 1;
        for sp in 0..2usize {
            let bp = (b & !(1 << bit)) | (sp << bit);
            out[[bp, b]] = g[[sp, s]];
        }
    }
    Ok(DenseOperator::new_unchecked(op2x2.kind(), out))
}

/// Which of the reference models a run uses, with its physical parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec<P: RealScalar> {
    /// Three-kick Floquet chain; reference driving is `J = 3/τ`.
    FloquetV3 { j: P, tau: P },
    /// Two-kick, time-reversal-symmetric Floquet chain; reference `τ = 2/J`.
    FloquetV2 { j: P, tau: P },
    /// Long-range transverse-field Ising chain with longitudinal disorder.
    IsingLongRange { j: P, alpha: P, w: P },
    /// A pure random-matrix model of the given ensemble and dimension.
    RmtEnsemble { kind: EnsembleKind, dim: usize },
}

impl<P: RealScalar> ModelSpec<P> {
    /// `V3` with the reference driving strength `J = 3/τ`.
    pub fn v3_default(j: P) -> Self {
        ModelSpec::FloquetV3 { j, tau: P::of(3.0) / j }
    }

    /// `V2` with `τ^{-1} = J/2`.
    pub fn v2_default(j: P) -> Self {
        ModelSpec::FloquetV2 { j, tau: P::of(2.0) / j }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.into()));
        match *self {
            ModelSpec::FloquetV3 { j, tau } | ModelSpec::FloquetV2 { j, tau } => {
                if j <= P::zero() {
                    return bad("interaction strength J must be positive");
                }
                if tau <= P::zero() {
                    return bad("driving period tau must be positive");
                }
            }
            ModelSpec::IsingLongRange { j, alpha, w } => {
                if j <= P::zero() {
                    return bad("interaction strength J must be positive");
                }
                if alpha <= P::zero() {
                    return bad("interaction range exponent alpha must be positive");
                }
                if w < P::zero() {
                    return bad("disorder strength W must be non-negative");
                }
            }
            ModelSpec::RmtEnsemble { dim, .. } => {
                if dim < 2 {
                    return bad("RMT ensemble dimension must be at least 2");
                }
            }
        }
        Ok(())
    }

    /// Is time evolution stroboscopic (integer multiples of a period)?
    pub fn is_floquet(&self) -> bool {
        matches!(
            self,
            ModelSpec::FloquetV3 { .. }
                | ModelSpec::FloquetV2 { .. }
                | ModelSpec::RmtEnsemble {
                    kind: EnsembleKind::Cue | EnsembleKind::Coe,
                    ..
                }
        )
    }

    /// Driving period for Floquet models, 1 for Hamiltonian ones.
    pub fn period(&self) -> P {
        match *self {
            ModelSpec::FloquetV3 { tau, .. } | ModelSpec::FloquetV2 { tau, .. } => tau,
            _ => P::one(),
        }
    }
}

/// Per-site disorder fields of one realization.
#[derive(Debug, Clone, PartialEq)]
pub enum DisorderFields<P: RealScalar> {
    /// `h_i^{(x,y,z)}` for the three-kick model, each in `[-J, J]`.
    ThreeAxis { x: Vec<P>, y: Vec<P>, z: Vec<P> },
    /// `h_i^{(y,z)}` for the two-kick model, each in `[-J, J]`.
    TwoAxis { y: Vec<P>, z: Vec<P> },
    /// Longitudinal `h_i` in `(-1, 1)` for the Ising model.
    Longitudinal(Vec<P>),
    /// RMT models carry no fields; the matrix itself is the disorder.
    None,
}

/// One disorder realization plus the seed lineage that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderRealization<P: RealScalar> {
    pub fields: DisorderFields<P>,
    pub lineage: SeedLineage,
}

impl<P: RealScalar> DisorderRealization<P> {
    /// Field array attached to `axis` (the field axis, not the kick axis).
    pub fn axis_fields(&self, axis: Axis) -> Result<&[P]> {
        match (&self.fields, axis) {
            (DisorderFields::ThreeAxis { x, .. }, Axis::X) => Ok(x),
            (DisorderFields::ThreeAxis { y, .. }, Axis::Y) => Ok(y),
            (DisorderFields::ThreeAxis { z, .. }, Axis::Z) => Ok(z),
            (DisorderFields::TwoAxis { y, .. }, Axis::Y) => Ok(y),
            (DisorderFields::TwoAxis { z, .. }, Axis::Z) => Ok(z),
            _ => Err(Error::InvalidInput(format!(
                "disorder realization has no {axis:?}-axis fields"
            ))),
        }
    }

    pub fn longitudinal(&self) -> Result<&[P]> {
        match &self.fields {
            DisorderFields::Longitudinal(h) => Ok(h),
            _ => Err(Error::InvalidInput(
                "disorder realization has no longitudinal fields".into(),
            )),
        }
    }
}

/// Draw the disorder fields of realization `index` from the model's stated
/// distribution, reproducibly from `(master_seed, index)`.
pub fn sample_disorder<P: RealScalar>(
    spec: &ModelSpec<P>,
    reg: SpinRegister,
    master_seed: u64,
    index: u64,
) -> DisorderRealization<P> {
    let lineage = SeedLineage::new(master_seed, index);
    let mut rng = realization_stream(lineage, "disorder");
    let n = reg.n_sites();
    let mut draw = |half_width: P| -> Vec<P> {
        (0..n)
            .map(|_| P::uniform(&mut rng, -half_width, half_width))
            .collect()
    };
    let fields = match spec {
        ModelSpec::FloquetV3 { j, .. } => DisorderFields::ThreeAxis {
            x: draw(*j),
            y: draw(*j),
            z: draw(*j),
        },
        ModelSpec::FloquetV2 { j, .. } => DisorderFields::TwoAxis {
            y: draw(*j),
            z: draw(*j),
        },
        ModelSpec::IsingLongRange { .. } => DisorderFields::Longitudinal(draw(P::one())),
        ModelSpec::RmtEnsemble { .. } => DisorderFields::None,
    };
    DisorderRealization { fields, lineage }
}

// ---------------------------------------------------------------------------
// Kicked chains V3 / V2
// ---------------------------------------------------------------------------

/// The canonical chain `C(h) = J Σ σx_i σx_{i+1} + Σ h_i σz_i` as a real
/// symmetric matrix. Every kick Hamiltonian is a local-frame rotation of
/// this form, which keeps the eigensolver in real arithmetic.
pub fn canonical_chain<P: RealScalar>(j: P, fields: &[P], reg: SpinRegister) -> Array2<P> {
    let n = reg.n_sites();
    assert_eq!(fields.len(), n);
    let dim = reg.dim();
    let mut h = Array2::<P>::zeros((dim, dim));
    for b in 0..dim {
        let mut diag = P::zero();
        for (site0, hi) in fields.iter().enumerate() {
            let bit = reg.bit(site0 + 1);
            let z = if (b >> bit) & 1 == 0 { P::one() } else { -P::one() };
            diag += *hi * z;
        }
        h[[b, b]] = diag;
        for site in 1..n {
            let flip = (1usize << reg.bit(site)) | (1usize << reg.bit(site + 1));
            let bp = b ^ flip;
            if bp > b {
                h[[bp, b]] += j;
                h[[b, bp]] += j;
            }
        }
    }
    h
}

/// Single-site frame rotation `w` with `w σ_a w† = σx` and
/// `w σ_{a.next()} w† = σz`, so that the kick Hamiltonian for axis `a`
/// becomes the canonical chain: `H^(a) = W† C(h) W` with `W = ⊗_i w`.
pub fn frame_rotation<P: RealScalar>(axis: Axis) -> Array2<P::Cplx> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match axis {
        // exp(-i π σx / 4): fixes σx, maps σy -> σz.
        Axis::X => array![
            [cplx::<P>(s, 0.0), cplx::<P>(0.0, -s)],
            [cplx::<P>(0.0, -s), cplx::<P>(s, 0.0)]
        ],
        // diag(e^{iπ/4}, e^{-iπ/4}): maps σy -> σx, fixes σz.
        Axis::Y => array![
            [cplx::<P>(s, s), cplx::<P>(0.0, 0.0)],
            [cplx::<P>(0.0, 0.0), cplx::<P>(s, -s)]
        ],
        // Hadamard: swaps σx and σz.
        Axis::Z => array![
            [cplx::<P>(s, 0.0), cplx::<P>(s, 0.0)],
            [cplx::<P>(s, 0.0), cplx::<P>(-s, 0.0)]
        ],
    }
}

/// Kick Hamiltonian `H^(a) = J Σ σ^a_i σ^a_{i+1} + Σ_i h_i^(a') σ^{a'}_i`
/// with `a' = a.next()`, built directly in the computational basis. This is
/// the reference construction used by oracles; the propagator uses the
/// rotated real-symmetric form.
pub fn kick_hamiltonian<P: RealScalar>(
    j: P,
    axis: Axis,
    fields: &[P],
    reg: SpinRegister,
) -> Result<DenseOperator<P>> {
    let n = reg.n_sites();
    let dim = reg.dim();
    let mut h = Array2::<P::Cplx>::zeros((dim, dim));
    let sig = DenseOperator::<P>::new_unchecked(OperatorKind::Hermitian, pauli::<P>(axis));
    let sig_field =
        DenseOperator::<P>::new_unchecked(OperatorKind::Hermitian, pauli::<P>(axis.next()));
    for site in 1..n {
        let a = embed_site_operator(&sig, site, reg)?;
        let b = embed_site_operator(&sig, site + 1, reg)?;
        let prod = a.data().dot(b.data());
        h.zip_mut_with(&prod, |acc, p| *acc = *acc + *p * creal::<P>(j));
    }
    for (site0, hi) in fields.iter().enumerate() {
        let f = embed_site_operator(&sig_field, site0 + 1, reg)?;
        h.zip_mut_with(f.data(), |acc, p| *acc = *acc + *p * creal::<P>(*hi));
    }
    DenseOperator::hermitian(h)
}

/// One exponential factor `exp(-i H^(a) θ)` in eigendecomposed form.
struct KickFactor<P: RealScalar> {
    frame: Array2<P::Cplx>,
    frame_adj: Array2<P::Cplx>,
    /// Eigenvectors of the canonical chain (real orthogonal, as columns),
    /// stored complex for BLAS application.
    vectors: Array2<P::Cplx>,
    /// `exp(-i E_k θ)`.
    phases: Array1<P::Cplx>,
}

/// Fast engine for the kicked models: holds the eigendecompositions of the
/// kick Hamiltonians of one disorder realization, applies whole driving
/// periods to states, and assembles the one-period unitary.
pub struct KickedPropagator<P: RealScalar> {
    reg: SpinRegister,
    /// Factors in application order (rightmost factor of the product first).
    factors: Vec<KickFactor<P>>,
}

impl<P: RealScalar> KickedPropagator<P> {
    pub fn new(
        spec: &ModelSpec<P>,
        dis: &DisorderRealization<P>,
        reg: SpinRegister,
    ) -> Result<Self> {
        spec.validate()?;
        let (j, theta, kick_axes): (P, P, &[Axis]) = match *spec {
            ModelSpec::FloquetV3 { j, tau } => {
                (j, tau / P::of(3.0), &[Axis::X, Axis::Y, Axis::Z][..])
            }
            ModelSpec::FloquetV2 { j, tau } => (j, tau / P::of(2.0), &[Axis::X, Axis::Y][..]),
            _ => {
                return Err(Error::InvalidInput(
                    "kicked propagator requires a Floquet model spec".into(),
                ))
            }
        };
        // The one-period unitary is F_x F_y F_z (F_x F_y for V2);
        // application order to kets is the reverse.
        let mut factors = Vec::with_capacity(kick_axes.len());
        for &axis in kick_axes.iter().rev() {
            let fields = dis.axis_fields(axis.next())?;
            if fields.len() != reg.n_sites() {
                return Err(Error::Dimension(format!(
                    "disorder has {} sites, register has {}",
                    fields.len(),
                    reg.n_sites()
                )));
            }
            let chain = canonical_chain(j, fields, reg);
            let (energies, vectors) = sym_eig(&chain)
                .map_err(|e| Error::Eigensolver(format!("kick axis {axis:?}: {e}")))?;
            let frame = frame_rotation::<P>(axis);
            let frame_adj = crate::linalg::adjoint::<P>(&frame);
            let phases = energies.mapv(|e| cis::<P>(-e * theta));
            factors.push(KickFactor {
                frame,
                frame_adj,
                vectors: vectors.mapv(creal::<P>),
                phases,
            });
        }
        Ok(Self { reg, factors })
    }

    pub fn dim(&self) -> usize {
        self.reg.dim()
    }

    pub fn register(&self) -> SpinRegister {
        self.reg
    }

    /// Apply one driving period `V` to the state vector in place.
    pub fn apply_period(&self, v: &mut Array1<P::Cplx>) {
        for f in &self.factors {
            self.apply_factor(f, v);
        }
    }

    fn apply_factor(&self, f: &KickFactor<P>, v: &mut Array1<P::Cplx>) {
        {
            let slice = v.as_slice_mut().expect("contiguous state vector");
            for site in 1..=self.reg.n_sites() {
                apply_single_qubit::<P>(&f.frame, site, self.reg, slice);
            }
        }
        // X^T v, phase, X v; the eigenvector matrix is real orthogonal so
        // its transpose is its inverse.
        let mut w = f.vectors.t().dot(v);
        w.zip_mut_with(&f.phases, |a, p| *a = *a * *p);
        *v = f.vectors.dot(&w);
        let slice = v.as_slice_mut().expect("contiguous state vector");
        for site in 1..=self.reg.n_sites() {
            apply_single_qubit::<P>(&f.frame_adj, site, self.reg, slice);
        }
    }

    /// Assemble the one-period unitary as a dense matrix.
    pub fn to_unitary(&self) -> Result<DenseOperator<P>> {
        let mut total: Option<Array2<P::Cplx>> = None;
        for f in &self.factors {
            let mut scaled = f.vectors.clone();
            for (k, mut col) in scaled.columns_mut().into_iter().enumerate() {
                let p = f.phases[k];
                col.mapv_inplace(|z| z * p);
            }
            let mut m = scaled.dot(&f.vectors.t());
            // Conjugate by the local frame: M <- W† M W.
            for site in 1..=self.reg.n_sites() {
                apply_single_qubit_rows::<P>(&f.frame_adj, site, self.reg, &mut m);
            }
            let frame_t = f.frame.t().to_owned();
            for mut row in m.rows_mut() {
                let slice = row.as_slice_mut().expect("contiguous row");
                for site in 1..=self.reg.n_sites() {
                    apply_single_qubit::<P>(&frame_t, site, self.reg, slice);
                }
            }
            total = Some(match total {
                None => m,
                Some(acc) => m.dot(&acc),
            });
        }
        let data = total.unwrap_or_else(|| Array2::eye(self.dim()));
        DenseOperator::unitary(data)
    }
}

/// Build the three-kick Floquet operator
/// `V3 = exp(-i H^(x) τ/3) exp(-i H^(y) τ/3) exp(-i H^(z) τ/3)`.
pub fn build_v3<P: RealScalar>(
    spec: &ModelSpec<P>,
    dis: &DisorderRealization<P>,
    reg: SpinRegister,
) -> Result<DenseOperator<P>> {
    if !matches!(spec, ModelSpec::FloquetV3 { .. }) {
        return Err(Error::InvalidInput("build_v3 requires a FloquetV3 spec".into()));
    }
    KickedPropagator::new(spec, dis, reg)?.to_unitary()
}

/// Build the two-kick Floquet operator
/// `V2 = exp(-i H^(x) τ/2) exp(-i H^(y) τ/2)`.
pub fn build_v2<P: RealScalar>(
    spec: &ModelSpec<P>,
    dis: &DisorderRealization<P>,
    reg: SpinRegister,
) -> Result<DenseOperator<P>> {
    if !matches!(spec, ModelSpec::FloquetV2 { .. }) {
        return Err(Error::InvalidInput("build_v2 requires a FloquetV2 spec".into()));
    }
    KickedPropagator::new(spec, dis, reg)?.to_unitary()
}

// ---------------------------------------------------------------------------
// Long-range Ising Hamiltonian
// ---------------------------------------------------------------------------

/// `H = J (Σ_{i<j} σz_i σz_j / (j-i)^α + Σ_i σx_i) + W Σ_i h_i σz_i` as a
/// real symmetric matrix.
pub fn build_ising_real<P: RealScalar>(
    spec: &ModelSpec<P>,
    dis: &DisorderRealization<P>,
    reg: SpinRegister,
) -> Result<Array2<P>> {
    let (j, alpha, w) = match *spec {
        ModelSpec::IsingLongRange { j, alpha, w } => (j, alpha, w),
        _ => {
            return Err(Error::InvalidInput(
                "build_ising requires an IsingLongRange spec".into(),
            ))
        }
    };
    spec.validate()?;
    let h_fields = dis.longitudinal()?;
    let n = reg.n_sites();
    if h_fields.len() != n {
        return Err(Error::Dimension(format!(
            "disorder has {} sites, register has {}",
            h_fields.len(),
            n
        )));
    }
    let dim = reg.dim();
    // Pairwise couplings J / (j-i)^α.
    let mut coupling = vec![P::zero(); n + 1];
    for r in 1..=n {
        coupling[r] = j / P::of(r as f64).powf(alpha);
    }
    let mut h = Array2::<P>::zeros((dim, dim));
    for b in 0..dim {
        let z = |site: usize| -> P {
            if (b >> reg.bit(site)) & 1 == 0 {
                P::one()
            } else {
                -P::one()
            }
        };
        let mut diag = P::zero();
        for i in 1..=n {
            let zi = z(i);
            diag += w * h_fields[i - 1] * zi;
            for jj in (i + 1)..=n {
                diag += coupling[jj - i] * zi * z(jj);
            }
        }
        h[[b, b]] = diag;
        // Transverse field flips one site.
        for site in 1..=n {
            let bp = b ^ (1usize << reg.bit(site));
            if bp > b {
                h[[bp, b]] += j;
                h[[b, bp]] += j;
            }
        }
    }
    Ok(h)
}

/// Ising Hamiltonian as a Hermitian [`DenseOperator`].
pub fn build_ising<P: RealScalar>(
    spec: &ModelSpec<P>,
    dis: &DisorderRealization<P>,
    reg: SpinRegister,
) -> Result<DenseOperator<P>> {
    let h = build_ising_real(spec, dis, reg)?;
    DenseOperator::hermitian(h.mapv(creal::<P>))
}

// ---------------------------------------------------------------------------
// Time evolution
// ---------------------------------------------------------------------------

/// Cached eigendecomposition of a Hamiltonian, reused for `T(t)` at many
/// times and for spectral analysis.
pub struct HamiltonianPropagator<P: RealScalar> {
    energies: Array1<P>,
    vectors: Array2<P::Cplx>,
}

impl<P: RealScalar> HamiltonianPropagator<P> {
    pub fn new(h: &DenseOperator<P>) -> Result<Self> {
        if h.kind() != OperatorKind::Hermitian {
            return Err(Error::InvalidInput(
                "propagator requires a hermitian operator".into(),
            ));
        }
        let (energies, vectors) = herm_eig_op(h)?;
        Ok(Self { energies, vectors })
    }

    pub fn energies(&self) -> &Array1<P> {
        &self.energies
    }

    pub fn vectors(&self) -> &Array2<P::Cplx> {
        &self.vectors
    }

    /// `T(t) = X exp(-i E t) X†`.
    pub fn evolve(&self, t: P) -> Result<DenseOperator<P>> {
        let phases = self.energies.mapv(|e| cis::<P>(-e * t));
        let data = crate::linalg::reconstruct::<P>(&self.vectors, &phases);
        DenseOperator::unitary(data)
    }
}

/// `T(t) = exp(-i H t)` via one eigendecomposition of `H`.
pub fn evolve_hamiltonian<P: RealScalar>(h: &DenseOperator<P>, t: P) -> Result<DenseOperator<P>> {
    HamiltonianPropagator::new(h)?.evolve(t)
}

/// `V^n` by repeated squaring; `n = 0` gives the identity.
pub fn floquet_power<P: RealScalar>(v: &DenseOperator<P>, n: u64) -> Result<DenseOperator<P>> {
    if v.kind() != OperatorKind::Unitary {
        return Err(Error::InvalidInput("floquet_power requires a unitary".into()));
    }
    let dim = v.dim();
    let mut result: Option<Array2<P::Cplx>> = None;
    let mut base = v.data().clone();
    let mut k = n;
    while k > 0 {
        if k & 1 == 1 {
            result = Some(match result {
                None => base.clone(),
                Some(acc) => acc.dot(&base),
            });
        }
        k >>= 1;
        if k > 0 {
            base = base.dot(&base);
        }
    }
    Ok(DenseOperator::new_unchecked(
        OperatorKind::Unitary,
        result.unwrap_or_else(|| Array2::eye(dim)),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff;
    use crate::C64;

    fn id2() -> DenseOperator<f64> {
        DenseOperator::identity(2)
    }

    #[test]
    fn embed_sz_site1_n2_is_diag_1_1_m1_m1() {
        let reg = SpinRegister::new(2).unwrap();
        let sz = DenseOperator::<f64>::hermitian(pauli::<f64>(Axis::Z)).unwrap();
        let m = embed_site_operator(&sz, 1, reg).unwrap();
        let want = [1.0, 1.0, -1.0, -1.0];
        for (k, &w) in want.iter().enumerate() {
            let got: C64 = m.data()[[k, k]];
            assert_eq!(got, C64::new(w, 0.0));
        }
    }

    #[test]
    fn embed_identity_any_site() {
        let reg = SpinRegister::new(3).unwrap();
        for site in 1..=3 {
            let m = embed_site_operator(&id2(), site, reg).unwrap();
            assert_eq!(max_abs_diff::<f64>(m.data(), &Array2::eye(8)), 0.0);
        }
    }

    #[test]
    fn embed_sx_site2_n2_swaps_second_bit() {
        // |00> <-> |01> and |10> <-> |11>, i.e. indices 0<->1, 2<->3.
        let reg = SpinRegister::new(2).unwrap();
        let sx = DenseOperator::<f64>::hermitian(pauli::<f64>(Axis::X)).unwrap();
        let m = embed_site_operator(&sx, 2, reg).unwrap();
        let mut want = Array2::<C64>::zeros((4, 4));
        want[[0, 1]] = C64::new(1.0, 0.0);
        want[[1, 0]] = C64::new(1.0, 0.0);
        want[[2, 3]] = C64::new(1.0, 0.0);
        want[[3, 2]] = C64::new(1.0, 0.0);
        assert_eq!(max_abs_diff::<f64>(m.data(), &want), 0.0);
    }

    #[test]
    fn embed_rejects_out_of_range_site() {
        let reg = SpinRegister::new(2).unwrap();
        assert!(embed_site_operator(&id2(), 0, reg).is_err());
        assert!(embed_site_operator(&id2(), 3, reg).is_err());
    }

    #[test]
    fn frame_rotations_map_axes_to_canonical() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let w = frame_rotation::<f64>(axis);
            let wd = crate::linalg::adjoint::<f64>(&w);
            let rot = |m: &Array2<C64>| w.dot(m).dot(&wd);
            let to_x = rot(&pauli::<f64>(axis));
            let to_z = rot(&pauli::<f64>(axis.next()));
            assert!(max_abs_diff::<f64>(&to_x, &pauli::<f64>(Axis::X)) < 1e-14);
            assert!(max_abs_diff::<f64>(&to_z, &pauli::<f64>(Axis::Z)) < 1e-14);
        }
    }

    #[test]
    fn kick_hamiltonian_matches_rotated_canonical_chain() {
        let reg = SpinRegister::new(3).unwrap();
        let j = 1.3;
        let fields = [0.4, -0.9, 0.2];
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            let direct = kick_hamiltonian(j, axis, &fields, reg).unwrap();
            let chain = canonical_chain(j, &fields, reg).mapv(creal::<f64>);
            // H = W† C W
            let w = frame_rotation::<f64>(axis);
            let mut m = chain;
            for site in 1..=3 {
                apply_single_qubit_rows::<f64>(
                    &crate::linalg::adjoint::<f64>(&w),
                    site,
                    reg,
                    &mut m,
                );
            }
            let wt = w.t().to_owned();
            for mut row in m.rows_mut() {
                let s = row.as_slice_mut().unwrap();
                for site in 1..=3 {
                    apply_single_qubit::<f64>(&wt, site, reg, s);
                }
            }
            assert!(
                max_abs_diff::<f64>(direct.data(), &m) < 1e-12,
                "axis {axis:?} mismatch"
            );
        }
    }

    #[test]
    fn v3_single_site_zero_fields_is_identity() {
        let reg = SpinRegister::new(1).unwrap();
        let spec = ModelSpec::v3_default(1.0);
        let dis = DisorderRealization {
            fields: DisorderFields::ThreeAxis {
                x: vec![0.0],
                y: vec![0.0],
                z: vec![0.0],
            },
            lineage: SeedLineage::new(0, 0),
        };
        let v = build_v3(&spec, &dis, reg).unwrap();
        assert!(max_abs_diff::<f64>(v.data(), &Array2::eye(2)) < 1e-12);
    }

    #[test]
    fn v2_single_site_zero_fields_is_identity() {
        let reg = SpinRegister::new(1).unwrap();
        let spec = ModelSpec::v2_default(1.0);
        let dis = DisorderRealization {
            fields: DisorderFields::TwoAxis {
                y: vec![0.0],
                z: vec![0.0],
            },
            lineage: SeedLineage::new(0, 0),
        };
        let v = build_v2(&spec, &dis, reg).unwrap();
        assert!(max_abs_diff::<f64>(v.data(), &Array2::eye(2)) < 1e-12);
    }

    #[test]
    fn v3_is_unitary_and_propagator_consistent() {
        let reg = SpinRegister::new(4).unwrap();
        let spec: ModelSpec<f64> = ModelSpec::v3_default(1.0);
        let dis = sample_disorder(&spec, reg, 42, 0);
        let prop = KickedPropagator::new(&spec, &dis, reg).unwrap();
        let v = prop.to_unitary().unwrap();
        v.check_kind().unwrap();

        // apply_period on a basis state reproduces the matrix column.
        let mut e0 = Array1::<C64>::zeros(16);
        e0[3] = C64::new(1.0, 0.0);
        prop.apply_period(&mut e0);
        for i in 0..16 {
            assert!((e0[i] - v.data()[[i, 3]]).norm() < 1e-12);
        }
    }

    #[test]
    fn floquet_power_agrees_with_naive_product() {
        let reg = SpinRegister::new(3).unwrap();
        let spec = ModelSpec::v3_default(1.0);
        let dis = sample_disorder(&spec, reg, 7, 1);
        let v = build_v3(&spec, &dis, reg).unwrap();
        let p5 = floquet_power(&v, 5).unwrap();
        let mut naive = DenseOperator::<f64>::identity(8);
        for _ in 0..5 {
            naive = v.matmul(&naive).unwrap();
        }
        assert!(max_abs_diff::<f64>(p5.data(), naive.data()) < 1e-10);
        let p0 = floquet_power(&v, 0).unwrap();
        assert!(max_abs_diff::<f64>(p0.data(), &Array2::eye(8)) < 1e-15);
        let p1 = floquet_power(&v, 1).unwrap();
        assert!(max_abs_diff::<f64>(p1.data(), v.data()) < 1e-15);
    }

    #[test]
    fn evolve_hamiltonian_basics() {
        // t = 0 is the identity.
        let reg = SpinRegister::new(2).unwrap();
        let spec = ModelSpec::IsingLongRange {
            j: 1.0,
            alpha: 1.2,
            w: 0.7,
        };
        let dis = sample_disorder(&spec, reg, 5, 0);
        let h = build_ising(&spec, &dis, reg).unwrap();
        let t0 = evolve_hamiltonian(&h, 0.0).unwrap();
        assert!(max_abs_diff::<f64>(t0.data(), &Array2::eye(4)) < 1e-12);

        // H = σz evolved to t = π is -1.
        let sz = DenseOperator::<f64>::hermitian(pauli::<f64>(Axis::Z)).unwrap();
        let tpi = evolve_hamiltonian(&sz, std::f64::consts::PI).unwrap();
        let minus_one = Array2::from_diag(&Array1::from_vec(vec![
            C64::new(-1.0, 0.0),
            C64::new(-1.0, 0.0),
        ]));
        assert!(max_abs_diff::<f64>(tpi.data(), &minus_one) < 1e-12);
    }

    #[test]
    fn evolve_group_property() {
        let reg = SpinRegister::new(3).unwrap();
        let spec = ModelSpec::IsingLongRange {
            j: 1.0,
            alpha: 1.2,
            w: 1.0,
        };
        let dis = sample_disorder(&spec, reg, 11, 2);
        let h = build_ising(&spec, &dis, reg).unwrap();
        let prop = HamiltonianPropagator::new(&h).unwrap();
        let a = prop.evolve(0.31).unwrap();
        let b = prop.evolve(0.57).unwrap();
        let ab = prop.evolve(0.88).unwrap();
        let prod = a.matmul(&b).unwrap();
        assert!(max_abs_diff::<f64>(ab.data(), prod.data()) < 1e-9);
    }

    #[test]
    fn ising_n2_w0_matches_hand_construction() {
        let reg = SpinRegister::new(2).unwrap();
        let spec = ModelSpec::IsingLongRange {
            j: 1.0,
            alpha: 1.7,
            w: 0.0,
        };
        let dis = DisorderRealization {
            fields: DisorderFields::Longitudinal(vec![0.3, -0.8]),
            lineage: SeedLineage::new(0, 0),
        };
        let h = build_ising(&spec, &dis, reg).unwrap();
        // J (σz⊗σz + σx⊗1 + 1⊗σx) — disorder is multiplied by W = 0.
        let sz = pauli::<f64>(Axis::Z);
        let sx = pauli::<f64>(Axis::X);
        let kron = |a: &Array2<C64>, b: &Array2<C64>| -> Array2<C64> {
            let mut out = Array2::<C64>::zeros((4, 4));
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        for l in 0..2 {
                            out[[2 * i + k, 2 * j + l]] = a[[i, j]] * b[[k, l]];
                        }
                    }
                }
            }
            out
        };
        let eye = Array2::<C64>::eye(2);
        let want = kron(&sz, &sz) + kron(&sx, &eye) + kron(&eye, &sx);
        assert!(max_abs_diff::<f64>(h.data(), &want) < 1e-12);
    }

    #[test]
    fn ising_alpha_large_suppresses_distant_coupling() {
        // α = 50 leaves the site-1/site-3 ZZ weight below 1e-15 · J.
        let reg = SpinRegister::new(3).unwrap();
        let spec = ModelSpec::IsingLongRange {
            j: 1.0,
            alpha: 50.0,
            w: 0.0,
        };
        let dis = DisorderRealization {
            fields: DisorderFields::Longitudinal(vec![0.0; 3]),
            lineage: SeedLineage::new(0, 0),
        };
        let h = build_ising_real(&spec, &dis, reg).unwrap();
        // Coupling between sites 1 and 3 shows up in the diagonal as
        // (1/2)^50 terms; compare diagonals against the nearest-neighbor-only
        // construction.
        let mut nn_only = 0.0f64;
        let full = h[[0, 0]];
        // b = 0: all z = +1: diag = J(1/1^α·2 pairs at r=1 + 1 pair at r=2)
        nn_only += 2.0; // two nearest-neighbor pairs
        assert!((full - nn_only).abs() < 1e-15);
    }

    #[test]
    fn disorder_is_reproducible_and_in_range() {
        let reg = SpinRegister::new(5).unwrap();
        let spec: ModelSpec<f64> = ModelSpec::v3_default(2.0);
        let a = sample_disorder(&spec, reg, 9, 4);
        let b = sample_disorder(&spec, reg, 9, 4);
        assert_eq!(a, b);
        let c = sample_disorder(&spec, reg, 9, 5);
        assert_ne!(a, c);
        if let DisorderFields::ThreeAxis { x, y, z } = &a.fields {
            for h in x.iter().chain(y).chain(z) {
                assert!(h.abs() <= 2.0);
            }
        } else {
            panic!("wrong field shape");
        }
    }

    #[test]
    fn register_cap_enforced() {
        assert!(SpinRegister::new(DEFAULT_SITE_CAP).is_ok());
        assert!(SpinRegister::new(DEFAULT_SITE_CAP + 1).is_err());
        assert!(SpinRegister::new(0).is_err());
    }
}
