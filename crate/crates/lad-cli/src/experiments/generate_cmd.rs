//! `generate`: sample a paired dataset and a landmark set, and write both
//! with their provenance summaries. The artifacts feed `embed --config`
//! runs pointed at the dataset file, or external tooling.

use crate::config::Settings;
use crate::experiments::common::{draw_landmarks, sample_dataset, sensor_pair};
use crate::experiments::Outcome;
use crate::manifest::timed;
use crate::Result;

/// Landmark draws come from a stream distinct from the data draw so changing
/// one leaves the other untouched.
const LANDMARK_SALT: u64 = 0x4745_4e44;

pub fn run(s: &Settings) -> Result<Outcome> {
    let mut out = Outcome::new();
    let pair = sensor_pair(s)?;
    let (dataset, sample_seconds) = timed(|| sample_dataset(s, &pair, s.seed));
    let dataset = dataset?;
    out.record_stage("sample", sample_seconds);
    let (set, landmark_seconds) =
        timed(|| draw_landmarks(s, &pair, &dataset, s.m, s.seed ^ LANDMARK_SALT));
    let set = set?;
    out.record_stage("landmarks", landmark_seconds);
    out.datasets.push(("dataset", dataset));
    out.landmark_sets.push(("landmarks", set));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Experiment, LandmarkScheme};

    #[test]
    fn generated_artifacts_round_trip_through_the_writers() {
        let mut s = Settings::defaults(Experiment::Generate, false);
        s.n = 64;
        s.m = 16;
        s.landmarks = LandmarkScheme::Subset;
        s.out = std::env::temp_dir().join(format!("lad-cli-generate-{}", std::process::id()));
        s.validate().unwrap();
        let out = run(&s).unwrap();
        out.write(&s).unwrap();

        let ds = lad::io::read_dataset_csv(&s.out.join("dataset.csv")).unwrap();
        assert_eq!(ds.len(), 64);
        assert_eq!(ds.params.ncols(), 1);
        let manifest = std::fs::read_to_string(s.out.join("manifest.json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&manifest).unwrap();
        let outputs = parsed["outputs"].as_array().unwrap();
        let names: Vec<&str> = outputs
            .iter()
            .map(|o| o["path"].as_str().unwrap())
            .collect();
        assert!(names.contains(&"dataset.csv"));
        assert!(names.contains(&"landmarks.csv"));
        assert!(names.contains(&"landmarks.json"));
        std::fs::remove_dir_all(&s.out).ok();
    }
}
