//! Run manifests: config echo, code version, wall time and per-output
//! checksums, plus re-verification.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub wall_time_seconds: f64,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let digest = Sha256::digest(&bytes);
    Ok(hex_string(&digest))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write `manifest.json` into `out_dir`, listing every produced file with
/// its checksum.
pub fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: &BTreeMap<String, String>,
    outputs: &[PathBuf],
    wall_time_seconds: f64,
) -> Result<PathBuf> {
    let mut entries = Vec::new();
    for path in outputs {
        let rel = path
            .strip_prefix(out_dir)
            .unwrap_or(path)
            .to_string_lossy()
            .to_string();
        entries.push(OutputEntry {
            path: rel,
            sha256: sha256_file(path)?,
        });
    }
    let manifest = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds,
        config: config.clone(),
        outputs: entries,
    };
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Recompute the checksums of every file listed in the manifest and fail on
/// any mismatch or missing file.
pub fn verify_manifest(out_dir: &Path) -> Result<usize> {
    let path = out_dir.join("manifest.json");
    let manifest: Manifest = serde_json::from_str(
        &std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?,
    )?;
    let mut checked = 0;
    for entry in &manifest.outputs {
        let file = out_dir.join(&entry.path);
        let actual = sha256_file(&file)?;
        if actual != entry.sha256 {
            bail!(
                "checksum mismatch for {}: manifest {} actual {actual}",
                file.display(),
                entry.sha256
            );
        }
        checked += 1;
    }
    Ok(checked)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_and_tamper_detection() {
        let dir = std::env::temp_dir().join(format!("sffsim-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let f = dir.join("data.csv");
        std::fs::write(&f, "time,value\n0,1\n").unwrap();
        let mut cfg = BTreeMap::new();
        cfg.insert("model".into(), "v3".into());
        write_manifest(&dir, "exact", &cfg, &[f.clone()], 0.5).unwrap();
        assert_eq!(verify_manifest(&dir).unwrap(), 1);
        std::fs::write(&f, "time,value\n0,2\n").unwrap();
        assert!(verify_manifest(&dir).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
