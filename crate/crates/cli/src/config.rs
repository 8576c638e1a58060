//! Experiment configuration: a flat key-value text file with CLI overrides.
//!
//! Lines are `key = value`; `#` starts a comment. Unknown keys are errors
//! (with line diagnostics) so typos cannot silently change an experiment.

use anyhow::{anyhow, bail, Context, Result};
use sffsim_core::hilbert::ModelSpec;
use sffsim_core::protocol::TwoDesignKind;
use sffsim_core::rmt::EnsembleKind;
use sffsim_core::spectral::{SubsystemMask, TimeGrid};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    V3,
    V2,
    Ising,
    Cue,
    Coe,
    Gue,
    Goe,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "v3" => ModelKind::V3,
            "v2" => ModelKind::V2,
            "ising" => ModelKind::Ising,
            "cue" => ModelKind::Cue,
            "coe" => ModelKind::Coe,
            "gue" => ModelKind::Gue,
            "goe" => ModelKind::Goe,
            other => bail!("unknown model {other:?}"),
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::V3 => "v3",
            ModelKind::V2 => "v2",
            ModelKind::Ising => "ising",
            ModelKind::Cue => "cue",
            ModelKind::Coe => "coe",
            ModelKind::Gue => "gue",
            ModelKind::Goe => "goe",
        }
    }
}

/// How the evaluation time grid is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// Floquet steps, either an explicit list or `start:stop[:stride]`.
    Steps(Vec<u64>),
    /// Hamiltonian times.
    Times {
        start: f64,
        stop: f64,
        points: usize,
        geometric: bool,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelKind,
    pub n_sites: usize,
    pub j: f64,
    pub tau: Option<f64>,
    pub alpha: f64,
    pub w: f64,
    /// Explicit mask bitstrings (site 1 first).
    pub masks: Vec<String>,
    /// Centered contiguous subsystems of these sizes.
    pub na_list: Vec<usize>,
    /// Prepend the full-system mask (the SFF).
    pub include_sff: bool,
    pub grid: Option<GridSpec>,
    pub n_realizations: usize,
    /// Single-shot runs per time point.
    pub shots: usize,
    pub two_design: TwoDesignKind,
    pub seed: u64,
    pub threads: usize,
    pub out: PathBuf,
    pub depolarization: Option<f64>,
    pub decorrelation_etas: Vec<f64>,
    pub rescale_mean_spacing: Option<f64>,
    /// Heisenberg time override for Gaussian-ensemble analytic curves.
    pub t_heisenberg: Option<f64>,
    // budget inputs
    pub n_a: usize,
    pub epsilon: f64,
    pub delta: f64,
    // scan inputs
    pub w_over_j_list: Vec<f64>,
    pub alpha_list: Vec<f64>,
    // rmt-curves inputs
    pub ensembles: Vec<EnsembleKind>,
    pub memory_cap_mb: usize,
    /// Raw key-value pairs for the manifest echo.
    pub echo: BTreeMap<String, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::V3,
            n_sites: 4,
            j: 1.0,
            tau: None,
            alpha: 1.2,
            w: 1.0,
            masks: Vec::new(),
            na_list: Vec::new(),
            include_sff: true,
            grid: None,
            n_realizations: 100,
            shots: 10_000,
            two_design: TwoDesignKind::CliffordGroup1Q,
            seed: 1,
            threads: default_threads(),
            out: PathBuf::from("out"),
            depolarization: None,
            decorrelation_etas: Vec::new(),
            rescale_mean_spacing: None,
            t_heisenberg: None,
            n_a: 2,
            epsilon: 0.1,
            delta: 0.1,
            w_over_j_list: Vec::new(),
            alpha_list: Vec::new(),
            ensembles: vec![EnsembleKind::Cue],
            memory_cap_mb: 4096,
            echo: BTreeMap::new(),
        }
    }
}

/// Default worker count: `SFFSIM_THREADS` or all logical cores.
pub fn default_threads() -> usize {
    std::env::var("SFFSIM_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
}

fn parse_list<T: std::str::FromStr>(value: &str, what: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|v| v.trim())
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse::<T>()
                .map_err(|_| anyhow!("bad {what} entry {v:?}"))
        })
        .collect()
}

fn parse_steps(value: &str) -> Result<Vec<u64>> {
    if value.contains(':') {
        let parts: Vec<&str> = value.split(':').collect();
        if parts.len() < 2 || parts.len() > 3 {
            bail!("steps range must be start:stop[:stride]");
        }
        let start: u64 = parts[0].trim().parse().context("steps start")?;
        let stop: u64 = parts[1].trim().parse().context("steps stop")?;
        let stride: u64 = if parts.len() == 3 {
            parts[2].trim().parse().context("steps stride")?
        } else {
            1
        };
        if stride == 0 || stop < start {
            bail!("steps range must ascend with nonzero stride");
        }
        Ok((start..=stop).step_by(stride as usize).collect())
    } else {
        parse_list(value, "steps")
    }
}

impl RunConfig {
    /// Parse a config file; later keys override earlier ones.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected key = value", path.display(), lineno + 1))?;
            cfg.set(key.trim(), value.trim())
                .with_context(|| format!("{}:{}", path.display(), lineno + 1))?;
        }
        Ok(cfg)
    }

    /// Apply one key-value assignment (file line or CLI override).
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        self.echo.insert(key.to_string(), value.to_string());
        match key {
            "model" => self.model = ModelKind::parse(value)?,
            "n_sites" => self.n_sites = value.parse().context("n_sites")?,
            "j" => self.j = value.parse().context("j")?,
            "tau" => self.tau = Some(value.parse().context("tau")?),
            "alpha" => self.alpha = value.parse().context("alpha")?,
            "w" => self.w = value.parse().context("w")?,
            "masks" => self.masks = parse_list(value, "masks")?,
            "na_list" => self.na_list = parse_list(value, "na_list")?,
            "include_sff" => self.include_sff = parse_bool(value)?,
            "steps" => self.grid = Some(GridSpec::Steps(parse_steps(value)?)),
            "time_start" | "time_stop" | "time_points" | "time_scale" => {
                let (mut start, mut stop, mut points, mut geometric) = match &self.grid {
                    Some(GridSpec::Times {
                        start,
                        stop,
                        points,
                        geometric,
                    }) => (*start, *stop, *points, *geometric),
                    _ => (0.1, 10.0, 64, false),
                };
                match key {
                    "time_start" => start = value.parse().context("time_start")?,
                    "time_stop" => stop = value.parse().context("time_stop")?,
                    "time_points" => points = value.parse().context("time_points")?,
                    "time_scale" => {
                        geometric = match value {
                            "geometric" | "log" => true,
                            "linear" => false,
                            other => bail!("unknown time_scale {other:?}"),
                        }
                    }
                    _ => unreachable!(),
                }
                self.grid = Some(GridSpec::Times {
                    start,
                    stop,
                    points,
                    geometric,
                });
            }
            "n_realizations" => self.n_realizations = value.parse().context("n_realizations")?,
            "shots" => self.shots = value.parse().context("shots")?,
            "two_design" => {
                self.two_design = match value.to_ascii_lowercase().as_str() {
                    "clifford" => TwoDesignKind::CliffordGroup1Q,
                    "haar" => TwoDesignKind::HaarU2,
                    other => bail!("unknown two_design {other:?}"),
                }
            }
            "seed" => self.seed = value.parse().context("seed")?,
            "threads" => self.threads = value.parse().context("threads")?,
            "out" => self.out = PathBuf::from(value),
            "depolarization" => self.depolarization = Some(value.parse().context("depolarization")?),
            "decorrelation" => self.decorrelation_etas = parse_list(value, "decorrelation")?,
            "rescale_mean_spacing" => {
                self.rescale_mean_spacing = Some(value.parse().context("rescale_mean_spacing")?)
            }
            "t_heisenberg" => self.t_heisenberg = Some(value.parse().context("t_heisenberg")?),
            "n_a" => self.n_a = value.parse().context("n_a")?,
            "epsilon" => self.epsilon = value.parse().context("epsilon")?,
            "delta" => self.delta = value.parse().context("delta")?,
            "w_over_j_list" => self.w_over_j_list = parse_list(value, "w_over_j_list")?,
            "alpha_list" => self.alpha_list = parse_list(value, "alpha_list")?,
            "ensembles" => {
                self.ensembles = value
                    .split(',')
                    .map(|v| match v.trim().to_ascii_lowercase().as_str() {
                        "cue" => Ok(EnsembleKind::Cue),
                        "coe" => Ok(EnsembleKind::Coe),
                        "gue" => Ok(EnsembleKind::Gue),
                        "goe" => Ok(EnsembleKind::Goe),
                        other => Err(anyhow!("unknown ensemble {other:?}")),
                    })
                    .collect::<Result<Vec<_>>>()?
            }
            "memory_cap_mb" => self.memory_cap_mb = value.parse().context("memory_cap_mb")?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// The core model spec implied by the configuration.
    pub fn model_spec(&self) -> Result<ModelSpec<f64>> {
        let spec = match self.model {
            ModelKind::V3 => ModelSpec::FloquetV3 {
                j: self.j,
                tau: self.tau.unwrap_or(3.0 / self.j),
            },
            ModelKind::V2 => ModelSpec::FloquetV2 {
                j: self.j,
                tau: self.tau.unwrap_or(2.0 / self.j),
            },
            ModelKind::Ising => ModelSpec::IsingLongRange {
                j: self.j,
                alpha: self.alpha,
                w: self.w,
            },
            ModelKind::Cue => ModelSpec::RmtEnsemble {
                kind: EnsembleKind::Cue,
                dim: 1 << self.n_sites,
            },
            ModelKind::Coe => ModelSpec::RmtEnsemble {
                kind: EnsembleKind::Coe,
                dim: 1 << self.n_sites,
            },
            ModelKind::Gue => ModelSpec::RmtEnsemble {
                kind: EnsembleKind::Gue,
                dim: 1 << self.n_sites,
            },
            ModelKind::Goe => ModelSpec::RmtEnsemble {
                kind: EnsembleKind::Goe,
                dim: 1 << self.n_sites,
            },
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Masks in output order: SFF first (when requested), then explicit
    /// bitstrings, then centered subsystems.
    pub fn resolve_masks(&self) -> Result<Vec<SubsystemMask>> {
        let mut out = Vec::new();
        if self.include_sff {
            out.push(SubsystemMask::full(self.n_sites));
        }
        for bits in &self.masks {
            let m = SubsystemMask::from_bitstring(bits)?;
            if m.n_sites() != self.n_sites {
                bail!(
                    "mask {bits} has {} sites, register has {}",
                    m.n_sites(),
                    self.n_sites
                );
            }
            if !out.contains(&m) {
                out.push(m);
            }
        }
        for &na in &self.na_list {
            let m = SubsystemMask::centered(self.n_sites, na)?;
            if !out.contains(&m) {
                out.push(m);
            }
        }
        if out.is_empty() {
            bail!("no masks configured (set masks, na_list or include_sff)");
        }
        Ok(out)
    }

    /// The evaluation grid, validated against the model type.
    pub fn time_grid(&self) -> Result<TimeGrid<f64>> {
        let spec = self.model_spec()?;
        let grid = match &self.grid {
            Some(GridSpec::Steps(steps)) => TimeGrid::FloquetSteps(steps.clone()),
            Some(GridSpec::Times {
                start,
                stop,
                points,
                geometric,
            }) => {
                if *geometric {
                    TimeGrid::geometric(*start, *stop, *points)?
                } else {
                    TimeGrid::linear(*start, *stop, *points)?
                }
            }
            None => {
                // A sensible default: 1..3D steps for Floquet models.
                if spec.is_floquet() {
                    TimeGrid::steps_to(3 * (1u64 << self.n_sites))
                } else {
                    bail!("Hamiltonian models need time_start/time_stop/time_points")
                }
            }
        };
        grid.validate(spec.is_floquet())?;
        Ok(grid)
    }

    /// Rough peak-memory estimate: each worker holds a handful of `D x D`
    /// complex matrices plus per-mask phase tables.
    pub fn check_memory(&self) -> Result<()> {
        let d = 1usize << self.n_sites;
        let per_worker = 8 * d * d * 16;
        let series = self
            .grid
            .as_ref()
            .map(|g| match g {
                GridSpec::Steps(s) => s.len(),
                GridSpec::Times { points, .. } => *points,
            })
            .unwrap_or(512)
            * self.n_realizations.max(1)
            * 8
            / 1_000_000;
        let mb = (per_worker * self.threads) / 1_000_000 + series;
        if mb > self.memory_cap_mb {
            bail!(
                "estimated memory {mb} MB exceeds cap {} MB (raise memory_cap_mb to override)",
                self.memory_cap_mb
            );
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 || self.n_sites > 14 {
            bail!("n_sites must be in 1..=14");
        }
        self.model_spec()?;
        self.check_memory()?;
        Ok(())
    }
}

fn parse_bool(value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("expected a boolean, got {other:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_file_and_overrides() {
        let dir = std::env::temp_dir().join("sffsim-config-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.cfg");
        std::fs::write(
            &path,
            "# example\nmodel = v3\nn_sites = 6\nsteps = 1:8\nna_list = 3,4\nseed = 99\n",
        )
        .unwrap();
        let mut cfg = RunConfig::from_file(&path).unwrap();
        assert_eq!(cfg.model, ModelKind::V3);
        assert_eq!(cfg.n_sites, 6);
        assert_eq!(cfg.seed, 99);
        cfg.set("seed", "7").unwrap();
        assert_eq!(cfg.seed, 7);
        let masks = cfg.resolve_masks().unwrap();
        assert_eq!(masks[0].bitstring(), "111111");
        assert_eq!(masks[1].bitstring(), "011100");
        let grid = cfg.time_grid().unwrap();
        assert_eq!(grid.len(), 8);
    }

    #[test]
    fn unknown_keys_are_rejected_with_location() {
        let dir = std::env::temp_dir().join("sffsim-config-test2");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.cfg");
        std::fs::write(&path, "model = v3\nbogus_key = 1\n").unwrap();
        let err = RunConfig::from_file(&path).unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("bad.cfg:2"), "diagnostic missing: {msg}");
        assert!(msg.contains("bogus_key"));
    }

    #[test]
    fn steps_range_forms() {
        assert_eq!(parse_steps("1:5").unwrap(), vec![1, 2, 3, 4, 5]);
        assert_eq!(parse_steps("2:10:4").unwrap(), vec![2, 6, 10]);
        assert_eq!(parse_steps("1,8,64").unwrap(), vec![1, 8, 64]);
        assert!(parse_steps("5:1").is_err());
    }

    #[test]
    fn hamiltonian_needs_time_grid() {
        let mut cfg = RunConfig::default();
        cfg.set("model", "ising").unwrap();
        assert!(cfg.time_grid().is_err());
        cfg.set("time_start", "0.5").unwrap();
        cfg.set("time_stop", "20").unwrap();
        cfg.set("time_points", "16").unwrap();
        assert_eq!(cfg.time_grid().unwrap().len(), 16);
        // Floquet steps on a Hamiltonian model are rejected.
        cfg.set("steps", "1:4").unwrap();
        assert!(cfg.time_grid().is_err());
    }
}
