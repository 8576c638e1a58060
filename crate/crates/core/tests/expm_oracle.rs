//! Cross-validates every eigendecomposition-based exponential against an
//! independent scalar Taylor-series matrix exponential.

use ndarray::prelude::*;
use sffsim_core::hilbert::{
    build_v2, build_v3, evolve_hamiltonian, kick_hamiltonian, sample_disorder, Axis, ModelSpec,
    SpinRegister,
};
use sffsim_core::linalg::max_abs_diff;
use sffsim_core::scalar::RealScalar;
use sffsim_core::{C64, DenseOperator};

/// Brute-force `exp(A)` by scaling and Taylor summation; independent of any
/// eigensolver. Accurate to ~1e-13 for the matrix norms used here.
fn taylor_expm(a: &Array2<C64>) -> Array2<C64> {
    let n = a.nrows();
    let norm: f64 = a.iter().map(|z| z.norm()).fold(0.0, f64::max) * n as f64;
    let squarings = norm.log2().ceil().max(0.0) as u32 + 1;
    let scale = C64::new(1.0 / 2f64.powi(squarings as i32), 0.0);
    let scaled = a.mapv(|z| z * scale);
    let mut term = Array2::<C64>::eye(n);
    let mut sum = Array2::<C64>::eye(n);
    for k in 1..60 {
        term = term.dot(&scaled).mapv(|z| z / C64::new(k as f64, 0.0));
        sum = &sum + &term;
        let worst = term.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if worst < 1e-20 {
            break;
        }
    }
    let mut out = sum;
    for _ in 0..squarings {
        out = out.dot(&out);
    }
    out
}

fn expm_minus_i(h: &Array2<C64>, t: f64) -> Array2<C64> {
    let a = h.mapv(|z| z * C64::new(0.0, -t));
    taylor_expm(&a)
}

#[test]
fn v3_matches_taylor_factor_product() {
    let reg = SpinRegister::new(2).unwrap();
    let spec: ModelSpec<f64> = ModelSpec::v3_default(1.0);
    let (j, tau) = match spec {
        ModelSpec::FloquetV3 { j, tau } => (j, tau),
        _ => unreachable!(),
    };
    let dis = sample_disorder(&spec, reg, 31, 0);
    let v = build_v3(&spec, &dis, reg).unwrap();

    // Independent route: build each kick Hamiltonian directly in the
    // computational basis and exponentiate by Taylor series.
    let mut product = Array2::<C64>::eye(4);
    for axis in [Axis::X, Axis::Y, Axis::Z] {
        let fields = dis.axis_fields(axis.next()).unwrap();
        let h = kick_hamiltonian(j, axis, fields, reg).unwrap();
        product = product.dot(&expm_minus_i(h.data(), tau / 3.0));
    }
    let err = max_abs_diff::<f64>(v.data(), &product);
    assert!(err < 1e-9, "V3 vs Taylor oracle: {err:e}");
}

#[test]
fn v2_matches_taylor_factor_product() {
    let reg = SpinRegister::new(2).unwrap();
    let spec: ModelSpec<f64> = ModelSpec::v2_default(1.0);
    let (j, tau) = match spec {
        ModelSpec::FloquetV2 { j, tau } => (j, tau),
        _ => unreachable!(),
    };
    let dis = sample_disorder(&spec, reg, 77, 3);
    let v = build_v2(&spec, &dis, reg).unwrap();

    let mut product = Array2::<C64>::eye(4);
    for axis in [Axis::X, Axis::Y] {
        let fields = dis.axis_fields(axis.next()).unwrap();
        let h = kick_hamiltonian(j, axis, fields, reg).unwrap();
        product = product.dot(&expm_minus_i(h.data(), tau / 2.0));
    }
    let err = max_abs_diff::<f64>(v.data(), &product);
    assert!(err < 1e-9, "V2 vs Taylor oracle: {err:e}");
}

#[test]
fn v3_unitarity_across_sizes_and_seeds() {
    for n in 1..=5usize {
        let reg = SpinRegister::new(n).unwrap();
        let spec: ModelSpec<f64> = ModelSpec::v3_default(1.0);
        for idx in 0..3u64 {
            let dis = sample_disorder(&spec, reg, 5, idx);
            let v = build_v3(&spec, &dis, reg).unwrap();
            let res = sffsim_core::linalg::unitarity_residual::<f64>(v.data());
            assert!(res < 1e-10, "N={n} idx={idx}: residual {res:e}");
        }
    }
}

#[test]
fn evolve_hamiltonian_matches_taylor_on_random_hermitian() {
    let mut rng = sffsim_core::rng::stream(13, &[0], "expm-oracle");
    let mut h = Array2::<C64>::zeros((4, 4));
    for i in 0..4 {
        for j in 0..=i {
            let re = f64::std_normal(&mut rng);
            let im = if i == j { 0.0 } else { f64::std_normal(&mut rng) };
            h[[i, j]] = C64::new(re, im);
            h[[j, i]] = C64::new(re, -im);
        }
    }
    let op = DenseOperator::<f64>::hermitian(h.clone()).unwrap();
    let t = 0.37;
    let evolved = evolve_hamiltonian(&op, t).unwrap();
    let oracle = expm_minus_i(&h, t);
    let err = max_abs_diff::<f64>(evolved.data(), &oracle);
    assert!(err < 1e-9, "evolve vs Taylor oracle: {err:e}");
}

#[test]
fn taylor_oracle_sanity_on_pauli_z() {
    // exp(-i σz π) = -1, a case with a known closed form.
    let h = sffsim_core::hilbert::pauli::<f64>(Axis::Z);
    let got = expm_minus_i(&h, std::f64::consts::PI);
    let want = Array2::<C64>::eye(2).mapv(|z| z * C64::new(-1.0, 0.0));
    assert!(max_abs_diff::<f64>(&got, &want) < 1e-12);
}
