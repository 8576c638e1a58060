//! The seven experiment commands. Every command writes its output files
//! plus a manifest with per-file checksums and a gnuplot script.

use crate::config::{ModelKind, RunConfig};
use crate::csvio::{fmt_float, CsvWriter};
use crate::manifest::write_manifest;
use crate::plot;
use anyhow::{bail, Context, Result};
use sffsim_core::hilbert::{sample_disorder, build_ising_real, ModelSpec, SpinRegister};
use sffsim_core::linalg::sym_eigvals;
use sffsim_core::noise;
use sffsim_core::protocol::{
    estimate_avg_psff, estimate_psff, estimate_sff, simulate_floquet_shots, write_shot_records,
    ShotRecord,
};
use sffsim_core::rmt::{
    self, heisenberg_time_from_spacing, AnalyticParams, EnsembleKind,
};
use sffsim_core::spectral::{
    ensemble_gap_ratio, ensemble_run, plateau_value, shift_extract,
    EnsembleOptions, FormFactorSeries, SubsystemMask, TimeGrid,
};
use sffsim_core::stats::{cue_dip_vtilde, measurement_budget};
use std::path::{Path, PathBuf};
use std::time::Instant;

fn prepare(cfg: &RunConfig) -> Result<(ModelSpec<f64>, SpinRegister)> {
    cfg.validate()?;
    sffsim_core::init_backend();
    let reg = SpinRegister::new(cfg.n_sites)?;
    Ok((cfg.model_spec()?, reg))
}

fn series_csv(path: &Path, series: &FormFactorSeries<f64>) -> Result<()> {
    let mut w = CsvWriter::new("time,value,stderr,n_realizations,mask");
    for k in 0..series.len() {
        let se = series.stderr.as_ref().map(|s| s[k]).unwrap_or(0.0);
        w.row(&[
            fmt_float(series.times[k]),
            fmt_float(series.values[k]),
            fmt_float(se),
            series.n_realizations.to_string(),
            series.mask.bitstring(),
        ]);
    }
    w.finish(path)
}

fn finish(
    cfg: &RunConfig,
    command: &str,
    outputs: Vec<PathBuf>,
    started: Instant,
) -> Result<Vec<PathBuf>> {
    let mut outputs = outputs;
    let script = plot::emit_plot_script(&cfg.out, command, &outputs)?;
    outputs.push(script);
    write_manifest(
        &cfg.out,
        command,
        &cfg.echo,
        &outputs,
        started.elapsed().as_secs_f64(),
    )?;
    Ok(outputs)
}

/// `exact`: ensemble-averaged exact SFF/PSFF curves, one CSV per mask.
pub fn cmd_exact(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    let (model, reg) = prepare(cfg)?;
    let masks = cfg.resolve_masks()?;
    let grid = cfg.time_grid()?;
    let opts = EnsembleOptions {
        rescale_mean_spacing: cfg.rescale_mean_spacing,
        with_eth: false,
    };
    let run = ensemble_run(&model, reg, &masks, &grid, cfg.n_realizations, cfg.seed, &opts)?;
    let mut outputs = Vec::new();
    for series in &run.series {
        let path = cfg.out.join(format!("exact_{}.csv", series.mask.bitstring()));
        series_csv(&path, series)?;
        outputs.push(path);
    }
    finish(cfg, "exact", outputs, started)
}

/// `protocol`: simulate single-shot randomized measurements, write the raw
/// shot records and the estimator curves per mask and per subsystem size.
pub fn cmd_protocol(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    let (model, reg) = prepare(cfg)?;
    if !model.is_floquet() {
        bail!("the protocol driver currently supports Floquet models (v3, v2, cue, coe)");
    }
    let masks = cfg.resolve_masks()?;
    let grid = cfg.time_grid()?;
    let steps = match &grid {
        TimeGrid::FloquetSteps(s) => s.clone(),
        _ => unreachable!("floquet grid validated"),
    };
    let tau = model.period();
    let mut outputs = Vec::new();
    let mut all_shots: Vec<Vec<ShotRecord<f64>>> = Vec::with_capacity(steps.len());
    let shots_path = cfg.out.join("shots.csv");
    {
        std::fs::create_dir_all(&cfg.out)?;
        let mut file = std::io::BufWriter::new(
            std::fs::File::create(&shots_path)
                .with_context(|| format!("creating {}", shots_path.display()))?,
        );
        for (ti, &n) in steps.iter().enumerate() {
            let shots = simulate_floquet_shots(
                &model,
                reg,
                n,
                ti as u64,
                cfg.shots,
                cfg.two_design,
                cfg.seed,
            )?;
            write_shot_records(&mut file, &shots)?;
            all_shots.push(shots);
        }
    }
    outputs.push(shots_path);
    // Estimator curves per mask.
    for mask in &masks {
        let mut w = CsvWriter::new("time,estimate,stderr,M");
        for shots in &all_shots {
            let est = if mask.is_full() {
                estimate_sff(shots)?
            } else {
                estimate_psff(shots, mask)?
            };
            let time = shots[0].time;
            w.row(&[
                fmt_float(time),
                fmt_float(est.mean),
                fmt_float(est.stderr),
                est.m.to_string(),
            ]);
        }
        let path = cfg.out.join(format!("protocol_{}.csv", mask.bitstring()));
        w.finish(&path)?;
        outputs.push(path);
    }
    // Averaged PSFF per requested subsystem size.
    for &n_a in &cfg.na_list {
        let mut w = CsvWriter::new("time,estimate,stderr,M");
        for shots in &all_shots {
            let est = estimate_avg_psff(shots, n_a)?;
            w.row(&[
                fmt_float(shots[0].time),
                fmt_float(est.mean),
                fmt_float(est.stderr),
                est.m.to_string(),
            ]);
        }
        let path = cfg.out.join(format!("protocol_avg_na{n_a}.csv"));
        w.finish(&path)?;
        outputs.push(path);
    }
    let _ = tau;
    finish(cfg, "protocol", outputs, started)
}

/// Heisenberg-time estimate for the configured model: `D·τ` for circular
/// dynamics, the mean-level-spacing fit on realization 0 for Hamiltonians.
fn estimate_t_heisenberg(cfg: &RunConfig, model: &ModelSpec<f64>, reg: SpinRegister) -> Result<f64> {
    if let Some(t) = cfg.t_heisenberg {
        return Ok(t);
    }
    if model.is_floquet() {
        return Ok(reg.dim() as f64 * model.period());
    }
    let energies: Vec<f64> = match model {
        ModelSpec::IsingLongRange { .. } => {
            let dis = sample_disorder(model, reg, cfg.seed, 0);
            sym_eigvals(&build_ising_real(model, &dis, reg)?)?.to_vec()
        }
        ModelSpec::RmtEnsemble { kind, dim } => {
            let mut rng = sffsim_core::rng::stream(cfg.seed, &[0], "rmt-realization");
            let h = rmt::sample::<f64, _>(*kind, *dim, &mut rng)?;
            match kind {
                EnsembleKind::Goe => sym_eigvals(&h.data().mapv(|z| z.re))?.to_vec(),
                _ => sffsim_core::linalg::herm_eigvals::<f64>(h.data())?.to_vec(),
            }
        }
        _ => unreachable!(),
    };
    Ok(heisenberg_time_from_spacing(&energies)?)
}

/// `analyze`: eigenstate second moments, plateau identity, PSFF shift and
/// gap-ratio statistics per subsystem size.
pub fn cmd_analyze(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    let (model, reg) = prepare(cfg)?;
    let na_list: Vec<usize> = if cfg.na_list.is_empty() {
        (1..cfg.n_sites).collect()
    } else {
        cfg.na_list.clone()
    };
    let mut masks: Vec<SubsystemMask> = vec![SubsystemMask::full(cfg.n_sites)];
    for &n_a in &na_list {
        let m = SubsystemMask::centered(cfg.n_sites, n_a)?;
        if !masks.contains(&m) {
            masks.push(m);
        }
    }
    let t_h = estimate_t_heisenberg(cfg, &model, reg)?;
    // Plateau window [4 t_H, 8 t_H] plus a ramp window for the shift.
    let (plateau_grid, ramp_grid): (TimeGrid<f64>, TimeGrid<f64>) = if model.is_floquet() {
        let tau = model.period();
        let lo = (4.0 * t_h / tau).ceil() as u64;
        let hi = (8.0 * t_h / tau).ceil() as u64;
        let stride = ((hi - lo) / 16).max(1);
        let plateau: Vec<u64> = (lo..=hi).step_by(stride as usize).collect();
        let ramp_hi = (2.0 * t_h / tau).ceil() as u64;
        let rstride = (ramp_hi / 48).max(1);
        let ramp: Vec<u64> = (1..=ramp_hi).step_by(rstride as usize).collect();
        (TimeGrid::FloquetSteps(plateau), TimeGrid::FloquetSteps(ramp))
    } else {
        (
            TimeGrid::linear(4.0 * t_h, 8.0 * t_h, 17)?,
            TimeGrid::linear(t_h / 48.0, 2.0 * t_h, 48)?,
        )
    };
    let opts = EnsembleOptions {
        rescale_mean_spacing: cfg.rescale_mean_spacing,
        with_eth: true,
    };
    let plateau_run = ensemble_run(
        &model,
        reg,
        &masks,
        &plateau_grid,
        cfg.n_realizations,
        cfg.seed,
        &opts,
    )?;
    let ramp_run = ensemble_run(
        &model,
        reg,
        &masks,
        &ramp_grid,
        cfg.n_realizations,
        cfg.seed,
        &EnsembleOptions {
            rescale_mean_spacing: cfg.rescale_mean_spacing,
            with_eth: false,
        },
    )?;
    let eth = plateau_run.eth.as_ref().expect("eth requested");

    // Main table.
    let mut w = CsvWriter::new("n_a,P_B,Q_B,delta_P_B,Delta_P_B,K_plateau_times_DA");
    for (mi, mask) in masks.iter().enumerate() {
        let e = &eth[mi];
        let plateau = plateau_value(&plateau_run.series[mi]);
        w.row(&[
            mask.n_in_a().to_string(),
            fmt_float(e.mean.p_b),
            fmt_float(e.mean.q_b),
            fmt_float(e.mean.delta_p_b),
            fmt_float(e.mean.big_delta_p_b),
            fmt_float(plateau * mask.d_a() as f64),
        ]);
    }
    let main_path = cfg.out.join("analyze.csv");
    w.finish(&main_path)?;

    // Shift table at the detected ramp midpoint of the SFF.
    let sff_series = &ramp_run.series[0];
    let t0 = sffsim_core::spectral::ramp_midpoint_time(sff_series)
        .unwrap_or_else(|| sff_series.times[sff_series.len() / 3]);
    let mut w = CsvWriter::new("n_a,t0,shift,da_times_shift,delta_P_B");
    for (mi, mask) in masks.iter().enumerate().skip(1) {
        let shift = shift_extract(&ramp_run.series[mi], sff_series, t0)?;
        w.row(&[
            mask.n_in_a().to_string(),
            fmt_float(t0),
            fmt_float(shift),
            fmt_float(shift * mask.d_a() as f64),
            fmt_float(eth[mi].mean.delta_p_b),
        ]);
    }
    let shift_path = cfg.out.join("shift.csv");
    w.finish(&shift_path)?;

    // Gap-ratio statistics.
    let (mean_r, stderr_r) = ensemble_gap_ratio(&model, reg, cfg.n_realizations, cfg.seed)?;
    let mut w = CsvWriter::new("mean_r,stderr,n_realizations");
    w.row(&[
        fmt_float(mean_r),
        fmt_float(stderr_r),
        cfg.n_realizations.to_string(),
    ]);
    let gap_path = cfg.out.join("gap_ratio.csv");
    w.finish(&gap_path)?;

    finish(cfg, "analyze", vec![main_path, shift_path, gap_path], started)
}

/// `scan`: mean adjacent gap ratio over a `(W/J, α)` grid of the Ising
/// model.
pub fn cmd_scan(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    cfg.validate()?;
    sffsim_core::init_backend();
    if cfg.model != ModelKind::Ising {
        bail!("scan sweeps the Ising model; set model = ising");
    }
    let reg = SpinRegister::new(cfg.n_sites)?;
    let w_list = if cfg.w_over_j_list.is_empty() {
        vec![0.5, 1.0, 2.0, 5.0, 10.0]
    } else {
        cfg.w_over_j_list.clone()
    };
    let a_list = if cfg.alpha_list.is_empty() {
        vec![0.6, 1.2, 2.0]
    } else {
        cfg.alpha_list.clone()
    };
    let mut w = CsvWriter::new("w_over_j,alpha,mean_r,n_realizations");
    for &alpha in &a_list {
        for &w_over_j in &w_list {
            let model = ModelSpec::IsingLongRange {
                j: cfg.j,
                alpha,
                w: w_over_j * cfg.j,
            };
            let (mean_r, _se) = ensemble_gap_ratio(&model, reg, cfg.n_realizations, cfg.seed)?;
            w.row(&[
                fmt_float(w_over_j),
                fmt_float(alpha),
                fmt_float(mean_r),
                cfg.n_realizations.to_string(),
            ]);
        }
    }
    let path = cfg.out.join("scan.csv");
    w.finish(&path)?;
    finish(cfg, "scan", vec![path], started)
}

/// `rmt-curves`: closed-form SFF and PSFF curves per ensemble.
pub fn cmd_rmt_curves(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    cfg.validate()?;
    let dim = 1usize << cfg.n_sites;
    let tau = cfg.tau.unwrap_or(1.0);
    let na_list: Vec<usize> = if cfg.na_list.is_empty() {
        vec![cfg.n_sites / 2]
    } else {
        cfg.na_list.clone()
    };
    let mut outputs = Vec::new();
    for &kind in &cfg.ensembles {
        let t_h = match kind {
            EnsembleKind::Cue | EnsembleKind::Coe => dim as f64 * tau,
            _ => cfg.t_heisenberg.unwrap_or(dim as f64 * tau),
        };
        let params = AnalyticParams::new(dim, t_h)?;
        let times: Vec<f64> = match cfg.time_grid() {
            Ok(grid) => grid.times(tau),
            Err(_) => (1..=3 * dim as u64).map(|n| n as f64 * tau).collect(),
        };
        let header = std::iter::once("time,k".to_string())
            .chain(na_list.iter().map(|na| format!("k_a_{na}")))
            .collect::<Vec<_>>()
            .join(",");
        let mut w = CsvWriter::new(&header);
        for &t in &times {
            let mut row = vec![fmt_float(t), fmt_float(rmt::sff_analytic(kind, &params, t)?)];
            for &na in &na_list {
                let d_a = 1usize << na;
                row.push(fmt_float(rmt::psff_analytic(kind, &params, d_a, dim / d_a, t)?));
            }
            w.row(&row);
        }
        let name = match kind {
            EnsembleKind::Cue => "cue",
            EnsembleKind::Coe => "coe",
            EnsembleKind::Gue => "gue",
            EnsembleKind::Goe => "goe",
        };
        let path = cfg.out.join(format!("rmt_{name}.csv"));
        w.finish(&path)?;
        outputs.push(path);
    }
    finish(cfg, "rmt-curves", outputs, started)
}

/// `budget`: measurement budget from the Chebyshev bound at the CUE dip.
pub fn cmd_budget(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    let v_tilde = cue_dip_vtilde::<f64>(cfg.n_a)?;
    let report = measurement_budget(v_tilde, cfg.epsilon, cfg.delta)?;
    println!(
        "subsystem size N_A = {}: rescaled variance at the CUE dip V~ = {}",
        cfg.n_a, report.v_tilde
    );
    println!(
        "M >= {} single-shot runs give relative error <= {} with probability >= {}",
        report.m_required,
        report.epsilon,
        1.0 - report.delta
    );
    let mut w = CsvWriter::new("n_a,epsilon,delta,v_tilde,m_required");
    w.row(&[
        cfg.n_a.to_string(),
        fmt_float(report.epsilon),
        fmt_float(report.delta),
        fmt_float(report.v_tilde),
        report.m_required.to_string(),
    ]);
    let path = cfg.out.join("budget.csv");
    w.finish(&path)?;
    finish(cfg, "budget", vec![path], started)
}

/// `noise`: depolarization round trip and decorrelation sweep.
pub fn cmd_noise(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let started = Instant::now();
    let (model, reg) = prepare(cfg)?;
    if !model.is_floquet() {
        bail!("the noise studies run on Floquet models");
    }
    let masks = cfg.resolve_masks()?;
    let mut outputs = Vec::new();
    let tau = model.period();

    if let Some(p) = cfg.depolarization {
        let steps = match cfg.time_grid()? {
            TimeGrid::FloquetSteps(s) => s,
            _ => unreachable!(),
        };
        let depol = noise::DepolarizationModel::new(p)?;
        // Exact unitary reference curves from the ensemble runner.
        let grid = TimeGrid::FloquetSteps(steps.clone());
        let exact = ensemble_run(
            &model,
            reg,
            &masks,
            &grid,
            cfg.n_realizations,
            cfg.seed ^ 0x5eed,
            &EnsembleOptions::default(),
        )?;
        for (mi, mask) in masks.iter().enumerate() {
            let mut w = CsvWriter::new(
                "time,estimate_dec,stderr_dec,estimate_rescaled,stderr_rescaled,exact,exact_stderr,M",
            );
            for (ti, &n) in steps.iter().enumerate() {
                let shots = noise::simulate_depolarized_shots(
                    &model,
                    reg,
                    n,
                    ti as u64,
                    cfg.shots,
                    cfg.two_design,
                    p,
                    cfg.seed,
                )?;
                let est = if mask.is_full() {
                    estimate_sff(&shots)?
                } else {
                    estimate_psff(&shots, mask)?
                };
                let alpha = depol.alpha(n);
                let rescaled = noise::rescale_psff(est.mean, alpha, mask.d_a())?;
                w.row(&[
                    fmt_float(n as f64 * tau),
                    fmt_float(est.mean),
                    fmt_float(est.stderr),
                    fmt_float(rescaled),
                    fmt_float(est.stderr / alpha),
                    fmt_float(exact.series[mi].values[ti]),
                    fmt_float(exact.series[mi].stderr.as_ref().unwrap()[ti]),
                    est.m.to_string(),
                ]);
            }
            let path = cfg
                .out
                .join(format!("noise_depolarized_{}.csv", mask.bitstring()));
            w.finish(&path)?;
            outputs.push(path);
        }
    }

    if !cfg.decorrelation_etas.is_empty() {
        // Sweep at a fixed early-ramp time.
        let periods = match cfg.time_grid() {
            Ok(TimeGrid::FloquetSteps(s)) => *s.first().unwrap_or(&5),
            _ => 5,
        };
        let mask = masks
            .iter()
            .find(|m| !m.is_full())
            .copied()
            .unwrap_or_else(|| SubsystemMask::full(cfg.n_sites));
        let points = noise::decorrelation_sweep(
            &model,
            reg,
            periods,
            &mask,
            &cfg.decorrelation_etas,
            cfg.n_realizations.max(1000),
            cfg.two_design,
            cfg.seed,
        )?;
        let mut w = CsvWriter::new("eta,relative_error,stderr,mask,periods");
        for pt in &points {
            w.row(&[
                fmt_float(pt.eta),
                fmt_float(pt.relative_error),
                fmt_float(pt.stderr),
                mask.bitstring(),
                periods.to_string(),
            ]);
        }
        let path = cfg.out.join("noise_decorrelation.csv");
        w.finish(&path)?;
        outputs.push(path);
    }

    if outputs.is_empty() {
        bail!("noise command needs depolarization and/or decorrelation settings");
    }
    finish(cfg, "noise", outputs, started)
}
