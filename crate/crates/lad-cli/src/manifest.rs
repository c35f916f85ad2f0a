//! Run manifests: the provenance record written alongside every experiment.
//!
//! The manifest is the only artifact allowed to differ between two runs of
//! the same config and seed; everything it digests must be byte-identical.
//! Timing tables are the exception and are listed with their digests anyway,
//! so tampering is still detectable even though the values are machine-bound.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::{CliError, Result};

#[derive(Debug, Clone, Serialize)]
pub struct OutputRecord {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub software_version: String,
    pub seed: u64,
    /// Seeds actually used per trial, in trial order.
    pub trial_seeds: Vec<u64>,
    /// The fully resolved settings the run executed with.
    pub config: Settings,
    /// Concrete bandwidths after resolving any median-heuristic settings,
    /// keyed by a short label such as `eps1` or `eps2`.
    pub resolved_bandwidths: BTreeMap<String, f64>,
    /// Wall-clock seconds per named stage.
    pub stages_seconds: BTreeMap<String, f64>,
    /// Unix milliseconds when the run started. The single field exempted
    /// from reproducibility.
    pub started_unix_ms: u128,
    pub outputs: Vec<OutputRecord>,
}

impl RunManifest {
    pub fn new(settings: &Settings) -> Self {
        let trial_seeds = (0..settings.trials).map(|t| settings.trial_seed(t)).collect();
        RunManifest {
            experiment: settings.experiment.id().to_string(),
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: settings.seed,
            trial_seeds,
            config: settings.clone(),
            resolved_bandwidths: BTreeMap::new(),
            stages_seconds: BTreeMap::new(),
            started_unix_ms: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
            outputs: Vec::new(),
        }
    }

    pub fn record_bandwidth(&mut self, label: &str, value: f64) {
        self.resolved_bandwidths.insert(label.to_string(), value);
    }

    pub fn record_stage(&mut self, label: &str, seconds: f64) {
        self.stages_seconds.insert(label.to_string(), seconds);
    }

    /// Digests a file already written under `out_dir` and lists it.
    pub fn record_output(&mut self, out_dir: &Path, relative: &str) -> Result<()> {
        let full = out_dir.join(relative);
        let bytes = std::fs::read(&full)
            .map_err(|e| CliError::Io(format!("{}: {e}", full.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        self.outputs.push(OutputRecord {
            path: relative.to_string(),
            sha256: format!("{:x}", hasher.finalize()),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    /// Writes `manifest.json` into `out_dir`. Call last, after every output
    /// file has been recorded.
    pub fn write(&self, out_dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join("manifest.json");
        lad::io::write_json(&path, self).map_err(CliError::from)?;
        Ok(path)
    }
}

/// Runs `f` and returns its result with the elapsed wall-clock seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    #[test]
    fn manifests_digest_their_outputs() {
        let dir = std::env::temp_dir().join(format!("lad-cli-manifest-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("results.csv"), b"a,b\n1,2\n").unwrap();

        let settings = Settings::defaults(Experiment::Generate, false);
        let mut man = RunManifest::new(&settings);
        man.record_bandwidth("eps1", 0.5);
        man.record_stage("sample", 0.01);
        man.record_output(&dir, "results.csv").unwrap();
        let path = man.write(&dir).unwrap();

        let text = std::fs::read_to_string(path).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["experiment"], "generate");
        assert_eq!(parsed["outputs"][0]["path"], "results.csv");
        // sha256 of the exact bytes written above.
        let digest = parsed["outputs"][0]["sha256"].as_str().unwrap();
        assert_eq!(digest.len(), 64);
        assert_eq!(parsed["config"]["n"], 1000);
        assert_eq!(parsed["trial_seeds"].as_array().unwrap().len(), 1);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn missing_output_files_are_io_errors() {
        let dir = std::env::temp_dir().join("lad-cli-manifest-missing");
        let settings = Settings::defaults(Experiment::Generate, false);
        let mut man = RunManifest::new(&settings);
        let err = man.record_output(&dir, "absent.csv").unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
