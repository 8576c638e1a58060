//! Monte-Carlo oracles: distribution moments of the disorder sampler, Haar
//! eigenvector averages behind the closed-form PSFF coefficients, and
//! small-scale ensemble checks of the analytic curves.

use sffsim_core::hilbert::{sample_disorder, DisorderFields, ModelSpec, SpinRegister};
use sffsim_core::rmt::{self, AnalyticParams, EnsembleKind, SymmetryClass};
use sffsim_core::rng::stream;
use sffsim_core::spectral::{
    eigen_decompose, ensemble_form_factor, purity_and_overlaps, SubsystemMask, TimeGrid,
};

#[test]
fn disorder_fields_have_uniform_box_moments() {
    // 1e5 draws per site; the empirical mean must sit within 3σ/√n of zero
    // with σ = J/√3, and the extremes must stay inside [-J, J].
    let j = 2.0f64;
    let spec: ModelSpec<f64> = ModelSpec::v3_default(j);
    let reg = SpinRegister::new(4).unwrap();
    let n_draws = 100_000u64;
    let mut sums = vec![0.0f64; reg.n_sites()];
    for idx in 0..n_draws {
        let dis = sample_disorder(&spec, reg, 314, idx);
        if let DisorderFields::ThreeAxis { x, .. } = &dis.fields {
            for (site, h) in x.iter().enumerate() {
                assert!(h.abs() <= j);
                sums[site] += h;
            }
        } else {
            panic!("wrong field shape");
        }
    }
    let sigma = j / 3f64.sqrt();
    let tol = 3.0 * sigma / (n_draws as f64).sqrt();
    for (site, s) in sums.iter().enumerate() {
        let mean = s / n_draws as f64;
        assert!(mean.abs() < tol, "site {site}: mean {mean} vs tol {tol}");
    }
}

#[test]
fn haar_mc_reproduces_pq_closed_forms_at_d4() {
    // 1e4 CUE eigenvector sets at D = 4, D_A = D_B = 2: the sampled purity
    // and adjacent overlap must match P_B = 4/5, Q_B = 2/5 within 3 stderr.
    let reg = SpinRegister::new(2).unwrap();
    let mask = SubsystemMask::from_sites(2, &[1]).unwrap();
    let mut rng = stream(2718, &[0], "pq-oracle");
    let n = 10_000;
    let (mut p_sum, mut p_sq, mut q_sum, mut q_sq) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..n {
        let v = rmt::sample::<f64, _>(EnsembleKind::Cue, reg.dim(), &mut rng).unwrap();
        let data = eigen_decompose(&v, Some(1.0)).unwrap();
        let eth = purity_and_overlaps(&data, &mask).unwrap();
        p_sum += eth.p_b;
        p_sq += eth.p_b * eth.p_b;
        q_sum += eth.q_b;
        q_sq += eth.q_b * eth.q_b;
    }
    let nf = n as f64;
    let p_mean = p_sum / nf;
    let q_mean = q_sum / nf;
    let p_se = ((p_sq / nf - p_mean * p_mean) / nf).sqrt();
    let q_se = ((q_sq / nf - q_mean * q_mean) / nf).sqrt();
    let (p_want, q_want) = rmt::pq_analytic::<f64>(SymmetryClass::Unitary, 2, 2).unwrap();
    assert!(
        (p_mean - p_want).abs() < 3.0 * p_se,
        "P_B: {p_mean} ± {p_se} vs {p_want}"
    );
    assert!(
        (q_mean - q_want).abs() < 3.0 * q_se,
        "Q_B: {q_mean} ± {q_se} vs {q_want}"
    );
}

#[test]
fn cue_ensemble_sff_matches_analytic_small_scale() {
    // D = 16, 2000 realizations, t = 8τ: the spec-level oracle for the
    // ensemble runner, the full-resolution version is in the acceptance
    // suite.
    let reg = SpinRegister::new(4).unwrap();
    let model = ModelSpec::RmtEnsemble {
        kind: EnsembleKind::Cue,
        dim: 16,
    };
    let grid = TimeGrid::FloquetSteps(vec![8]);
    let series = ensemble_form_factor(
        &model,
        reg,
        &[SubsystemMask::full(4)],
        &grid,
        2000,
        1234,
    )
    .unwrap();
    let params = AnalyticParams::circular(16, 1.0).unwrap();
    let want: f64 = rmt::sff_analytic(EnsembleKind::Cue, &params, 8.0).unwrap();
    let got: f64 = series[0].values[0];
    let se = series[0].stderr.as_ref().unwrap()[0];
    assert!(
        (got - want).abs() < 3.0 * se,
        "CUE SFF at t = 8τ: {got} ± {se} vs {want}"
    );
}

#[test]
fn coe_ensemble_sff_matches_analytic_away_from_th() {
    // The orthogonal class approaches its plateau slowly; compare only on
    // the early ramp and deep plateau as the curves are exact there.
    let d = 16usize;
    let reg = SpinRegister::new(4).unwrap();
    let model = ModelSpec::RmtEnsemble {
        kind: EnsembleKind::Coe,
        dim: d,
    };
    let steps: Vec<u64> = vec![4, 8, 64, 96];
    let grid = TimeGrid::FloquetSteps(steps.clone());
    let series = ensemble_form_factor(
        &model,
        reg,
        &[SubsystemMask::full(4)],
        &grid,
        3000,
        4321,
    )
    .unwrap();
    let params = AnalyticParams::circular(d, 1.0).unwrap();
    for (k, &n) in steps.iter().enumerate() {
        let t = n as f64;
        if t > d as f64 / 2.0 && t < 4.0 * d as f64 {
            continue;
        }
        let want: f64 = rmt::sff_analytic(EnsembleKind::Coe, &params, t).unwrap();
        let got: f64 = series[0].values[k];
        let se = series[0].stderr.as_ref().unwrap()[k];
        assert!(
            (got - want).abs() < 3.0 * se,
            "COE SFF at t = {t}: {got} ± {se} vs {want}"
        );
    }
}

#[test]
fn heisenberg_time_fit_matches_circular_convention() {
    // For a flat quasi-energy spectrum on [0, 2π/τ) the mean-spacing fit
    // recovers t_H = Dτ.
    let d = 64usize;
    let tau = 1.0f64;
    let omega = 2.0 * std::f64::consts::PI / tau;
    let levels: Vec<f64> = (0..d).map(|k| k as f64 * omega / d as f64).collect();
    let fit = rmt::heisenberg_time_from_spacing(&levels).unwrap();
    // The sorted-spectrum span misses one mean spacing (no wrap-around
    // level), so the fit sees (D-1)/D of the full window.
    let want = d as f64 * tau;
    assert!(
        (fit - want).abs() / want < 0.02,
        "fit {fit} vs circular t_H {want}"
    );
}
