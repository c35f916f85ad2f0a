//! CSV and JSON output for datasets, landmark sets, and embeddings.
//!
//! Numbers are written with Rust's shortest-roundtrip float formatting, so a
//! file's bytes are a pure function of the values: rerunning an experiment
//! with the same seed reproduces outputs byte for byte. Nothing here writes
//! wall-clock state; timestamps belong to run manifests, not data tables.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::diffusion::Embedding;
use crate::landmarks::{LandmarkProvenance, LandmarkSet};
use crate::manifolds::PairedDataset;
use crate::{Error, Result};

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Writes a dense matrix as CSV with one header row.
pub fn write_matrix_csv(path: &Path, headers: &[String], matrix: ArrayView2<'_, f64>) -> Result<()> {
    if headers.len() != matrix.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{} headers for {} columns",
            headers.len(),
            matrix.ncols()
        )));
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(headers)?;
    for row in matrix.rows() {
        w.write_record(row.iter().map(|v| fmt(*v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_matrix_csv`] back into headers + matrix.
pub fn read_matrix_csv(path: &Path) -> Result<(Vec<String>, Array2<f64>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers: Vec<String> = r.headers()?.iter().map(|s| s.to_string()).collect();
    let mut values = Vec::new();
    let mut rows = 0;
    for record in r.records() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::invalid(format!(
                "row {} has {} fields, header has {}",
                rows + 1,
                record.len(),
                headers.len()
            )));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::invalid(format!("not a number: {field:?}")))?;
            values.push(v);
        }
        rows += 1;
    }
    let matrix = Array2::from_shape_vec((rows, headers.len()), values)
        .map_err(|e| Error::invalid(e.to_string()))?;
    Ok((headers, matrix))
}

fn block_headers(prefix: &str, dim: usize) -> impl Iterator<Item = String> + '_ {
    (0..dim).map(move |d| format!("{prefix}{d}"))
}

/// Writes both sensor views (and latent parameters when present) of a paired
/// dataset as one CSV, columns `s1_*`, `s2_*`, `p_*`.
pub fn write_dataset_csv(path: &Path, ds: &PairedDataset) -> Result<()> {
    let headers: Vec<String> = block_headers("s1_", ds.sensor1.ncols())
        .chain(block_headers("s2_", ds.sensor2.ncols()))
        .chain(block_headers("p_", ds.params.ncols()))
        .collect();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&headers)?;
    for i in 0..ds.len() {
        let record: Vec<String> = ds
            .sensor1
            .row(i)
            .iter()
            .chain(ds.sensor2.row(i).iter())
            .chain(ds.params.row(i).iter())
            .map(|v| fmt(*v))
            .collect();
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset CSV written by [`write_dataset_csv`], splitting the column
/// blocks by their header prefixes.
pub fn read_dataset_csv(path: &Path) -> Result<PairedDataset> {
    let (headers, matrix) = read_matrix_csv(path)?;
    let d1 = headers.iter().filter(|h| h.starts_with("s1_")).count();
    let d2 = headers.iter().filter(|h| h.starts_with("s2_")).count();
    let dp = headers.iter().filter(|h| h.starts_with("p_")).count();
    if d1 == 0 || d2 == 0 || d1 + d2 + dp != headers.len() {
        return Err(Error::invalid(
            "dataset CSV needs s1_*, s2_* (and optional p_*) columns only",
        ));
    }
    let n = matrix.nrows();
    let sensor1 = matrix.slice(ndarray::s![.., 0..d1]).to_owned();
    let sensor2 = matrix.slice(ndarray::s![.., d1..d1 + d2]).to_owned();
    let params = matrix.slice(ndarray::s![.., d1 + d2..]).to_owned();
    let mut ds = PairedDataset::from_sensors(sensor1, sensor2)?;
    ds.params = params;
    debug_assert_eq!(ds.len(), n);
    Ok(ds)
}

/// Serializable description of a landmark set (everything but the points).
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct LandmarkSummary {
    pub count: usize,
    pub provenance: LandmarkProvenance,
    pub seed: u64,
    pub weight_id: Option<String>,
    pub clamped_mass_fraction: f64,
}

impl LandmarkSummary {
    pub fn of(set: &LandmarkSet) -> Self {
        LandmarkSummary {
            count: set.len(),
            provenance: set.provenance,
            seed: set.seed,
            weight_id: set.weight_id.clone(),
            clamped_mass_fraction: set.clamped_mass_fraction,
        }
    }
}

/// Writes landmark pairs as CSV: `source_index` (empty for synthesized
/// landmarks), then `a_*` and `b_*` coordinate blocks.
pub fn write_landmarks_csv(path: &Path, set: &LandmarkSet) -> Result<()> {
    let headers: Vec<String> = std::iter::once("source_index".to_string())
        .chain(block_headers("a_", set.points1.ncols()))
        .chain(block_headers("b_", set.points2.ncols()))
        .collect();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&headers)?;
    for k in 0..set.len() {
        let idx = match &set.indices {
            Some(idx) => idx[k].to_string(),
            None => String::new(),
        };
        let record: Vec<String> = std::iter::once(idx)
            .chain(set.points1.row(k).iter().map(|v| fmt(*v)))
            .chain(set.points2.row(k).iter().map(|v| fmt(*v)))
            .collect();
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Serializable spectral context for one embedding.
#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct EmbeddingSummary {
    pub rows: usize,
    pub dim: usize,
    pub diffusion_time: f64,
    pub eigenvalues_used: Vec<f64>,
    pub start_sensor: String,
    pub spectral_gap: f64,
    pub max_imag_ratio: f64,
    pub imag_warning: bool,
}

impl EmbeddingSummary {
    pub fn of(e: &Embedding) -> Self {
        EmbeddingSummary {
            rows: e.coords.nrows(),
            dim: e.dim(),
            diffusion_time: e.diffusion_time,
            eigenvalues_used: e.eigenvalues_used.clone(),
            start_sensor: e.start_sensor.to_string(),
            spectral_gap: e.spectral_gap,
            max_imag_ratio: e.max_imag_ratio,
            imag_warning: e.imag_warning,
        }
    }
}

/// Writes embedding coordinates as CSV, columns `coord_*`.
pub fn write_embedding_csv(path: &Path, e: &Embedding) -> Result<()> {
    let headers: Vec<String> = block_headers("coord_", e.dim()).collect();
    write_matrix_csv(path, &headers, e.coords.view())
}

/// Writes any serializable value as pretty JSON with a trailing newline.
pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::uniform_subset;
    use crate::manifolds::{sample_pair, Density, ManifoldGenerator};
    use ndarray::array;
    use std::path::PathBuf;

    fn scratch(name: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("lad-io-tests-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn matrix_roundtrip_preserves_bits() {
        let m = array![
            [1.0, -0.25, 1e-17],
            [0.1 + 0.2, 3.0_f64.sqrt(), -0.0],
            [f64::MIN_POSITIVE, 1e300, 2.0 / 3.0]
        ];
        let path = scratch("roundtrip.csv");
        let headers = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        write_matrix_csv(&path, &headers, m.view()).unwrap();
        let (h2, m2) = read_matrix_csv(&path).unwrap();
        assert_eq!(h2, headers);
        assert_eq!(m.shape(), m2.shape());
        for (a, b) in m.iter().zip(m2.iter()) {
            assert_eq!(a.to_bits(), b.to_bits(), "{a} vs {b}");
        }
    }

    #[test]
    fn writes_are_byte_deterministic() {
        let m = array![[0.1, 0.2], [0.30000000000000004, -7.25]];
        let headers = vec!["x".to_string(), "y".to_string()];
        let p1 = scratch("det1.csv");
        let p2 = scratch("det2.csv");
        write_matrix_csv(&p1, &headers, m.view()).unwrap();
        write_matrix_csv(&p2, &headers, m.view()).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn dataset_roundtrip_with_params() {
        let g1 = ManifoldGenerator::ellipse();
        let g2 = ManifoldGenerator::circle();
        let ds = sample_pair(&g1, &g2, 20, &Density::Uniform, 5).unwrap();
        let path = scratch("dataset.csv");
        write_dataset_csv(&path, &ds).unwrap();
        let back = read_dataset_csv(&path).unwrap();
        assert_eq!(back.sensor1.shape(), ds.sensor1.shape());
        assert_eq!(back.params.shape(), ds.params.shape());
        for (a, b) in ds.sensor2.iter().zip(back.sensor2.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in ds.params.iter().zip(back.params.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let m = array![[1.0, 2.0]];
        let path = scratch("mismatch.csv");
        let short = vec!["only".to_string()];
        assert!(write_matrix_csv(&path, &short, m.view()).is_err());
    }

    #[test]
    fn landmark_csv_and_summary() {
        let g1 = ManifoldGenerator::ellipse();
        let g2 = ManifoldGenerator::circle();
        let ds = sample_pair(&g1, &g2, 30, &Density::Uniform, 9).unwrap();
        let lm = uniform_subset(&ds, 10, 3).unwrap();
        let csv_path = scratch("landmarks.csv");
        let json_path = scratch("landmarks.json");
        write_landmarks_csv(&csv_path, &lm).unwrap();
        write_json(&json_path, &LandmarkSummary::of(&lm)).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("source_index,a_0,a_1,b_0,b_1"));
        assert_eq!(text.lines().count(), 11);
        let json = std::fs::read_to_string(&json_path).unwrap();
        assert!(json.contains("subset_uniform"), "{json}");
        assert!(json.ends_with('\n'));
        let parsed: LandmarkSummary = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.count, 10);
        assert_eq!(parsed.seed, 3);
    }

    #[test]
    fn embedding_outputs() {
        use crate::diffusion::{build_ad, ad_embed};
        use crate::kernels::KernelConfig;
        use crate::spectral::SpectralOptions;
        let g1 = ManifoldGenerator::ellipse();
        let g2 = ManifoldGenerator::circle();
        let ds = sample_pair(&g1, &g2, 40, &Density::Uniform, 2).unwrap();
        let cfg = KernelConfig::gaussian(0.5).unwrap();
        let model = build_ad(&ds, &cfg, &cfg).unwrap();
        let emb = ad_embed(&model, 2, 1.0, &SpectralOptions::default()).unwrap();
        let csv_path = scratch("embedding.csv");
        write_embedding_csv(&csv_path, &emb).unwrap();
        let (headers, coords) = read_matrix_csv(&csv_path).unwrap();
        assert_eq!(headers, vec!["coord_0", "coord_1"]);
        assert_eq!(coords.nrows(), 40);
        let summary = EmbeddingSummary::of(&emb);
        assert_eq!(summary.start_sensor, "sensor2");
        assert_eq!(summary.eigenvalues_used.len(), 2);
        let json_path = scratch("embedding.json");
        write_json(&json_path, &summary).unwrap();
        let parsed: EmbeddingSummary = serde_json::from_str(
            &std::fs::read_to_string(&json_path).unwrap(),
        )
        .unwrap();
        assert_eq!(parsed.rows, 40);
    }
}
