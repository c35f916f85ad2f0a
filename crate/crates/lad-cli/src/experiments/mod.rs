//! The experiment runners behind each subcommand.
//!
//! Runners split computation from persistence: `run_*` functions are pure
//! except for logging nothing, returning an outcome with result tables and
//! stage timings; `Outcome::write` persists the tables and a manifest. The
//! split lets integration tests assert on in-memory results without touching
//! the filesystem.

pub mod alpha_sweep;
pub mod bench;
pub mod common;
pub mod embed_cmd;
pub mod generate_cmd;
pub mod initial_sensor;
pub mod landmark_cases;
pub mod landmark_sweep;
pub mod variance_rate;

use std::path::Path;

use crate::config::Settings;
use crate::manifest::RunManifest;
use crate::table::Table;
use crate::Result;

/// Everything a finished run wants persisted. `tables` are deterministic for
/// a fixed config and seed; `timing_tables` hold wall-clock values and are
/// exempt from the byte-identity guarantee (their digests still land in the
/// manifest). Datasets, landmark sets, and embeddings are domain artifacts
/// written through the library's own serializers.
pub struct Outcome {
    pub tables: Vec<(&'static str, Table)>,
    pub timing_tables: Vec<(&'static str, Table)>,
    pub bandwidths: Vec<(String, f64)>,
    pub stages: Vec<(String, f64)>,
    pub datasets: Vec<(&'static str, lad::manifolds::PairedDataset)>,
    pub landmark_sets: Vec<(&'static str, lad::landmarks::LandmarkSet)>,
    pub embeddings: Vec<(&'static str, lad::diffusion::Embedding)>,
}

impl Outcome {
    pub fn new() -> Self {
        Outcome {
            tables: Vec::new(),
            timing_tables: Vec::new(),
            bandwidths: Vec::new(),
            stages: Vec::new(),
            datasets: Vec::new(),
            landmark_sets: Vec::new(),
            embeddings: Vec::new(),
        }
    }

    pub fn table(&self, name: &str) -> &Table {
        self.tables
            .iter()
            .chain(self.timing_tables.iter())
            .find(|(n, _)| *n == name)
            .map(|(_, t)| t)
            .unwrap_or_else(|| panic!("no table named {name}"))
    }

    pub fn record_stage(&mut self, label: &str, seconds: f64) {
        self.stages.push((label.to_string(), seconds));
    }

    pub fn record_bandwidth(&mut self, label: &str, value: f64) {
        self.bandwidths.push((label.to_string(), value));
    }

    /// Writes every table plus the manifest into `settings.out`, digesting
    /// files in the order written; the manifest itself goes last.
    pub fn write(&self, settings: &Settings) -> Result<()> {
        let out: &Path = &settings.out;
        std::fs::create_dir_all(out)?;
        let mut manifest = RunManifest::new(settings);
        for (label, value) in &self.bandwidths {
            manifest.record_bandwidth(label, *value);
        }
        for (label, seconds) in &self.stages {
            manifest.record_stage(label, *seconds);
        }
        for (name, table) in self.tables.iter().chain(self.timing_tables.iter()) {
            let file = format!("{name}.csv");
            table.write_csv(&out.join(&file))?;
            manifest.record_output(out, &file)?;
        }
        for (name, ds) in &self.datasets {
            let file = format!("{name}.csv");
            lad::io::write_dataset_csv(&out.join(&file), ds)?;
            manifest.record_output(out, &file)?;
        }
        for (name, set) in &self.landmark_sets {
            let file = format!("{name}.csv");
            lad::io::write_landmarks_csv(&out.join(&file), set)?;
            manifest.record_output(out, &file)?;
            let json = format!("{name}.json");
            lad::io::write_json(&out.join(&json), &lad::io::LandmarkSummary::of(set))?;
            manifest.record_output(out, &json)?;
        }
        for (name, e) in &self.embeddings {
            let file = format!("{name}.csv");
            lad::io::write_embedding_csv(&out.join(&file), e)?;
            manifest.record_output(out, &file)?;
            let json = format!("{name}.json");
            lad::io::write_json(&out.join(&json), &lad::io::EmbeddingSummary::of(e))?;
            manifest.record_output(out, &json)?;
        }
        manifest.write(out)?;
        Ok(())
    }
}

impl Default for Outcome {
    fn default() -> Self {
        Self::new()
    }
}
