//! `embed`: build one fused embedding (AD, or LAD through landmarks) from a
//! sampled or previously generated dataset, and write the coordinates with
//! a one-row provenance table.

use lad::diffusion::{
    ad_embed, build_ad, build_ad_from_sensor1, build_lad, build_lad_from_sensor1, lad_embed,
};

use crate::config::{ModelKind, Settings, StartChoice};
use crate::experiments::common::{
    draw_landmarks, kernel_configs, sample_dataset, sensor_pair, spectral_options,
};
use crate::experiments::Outcome;
use crate::manifest::timed;
use crate::table::Table;
use crate::Result;

const LANDMARK_SALT: u64 = 0x454d_4244;

pub fn run(s: &Settings) -> Result<Outcome> {
    let mut out = Outcome::new();
    let pair = sensor_pair(s)?;

    let (dataset, sampled_here) = match &s.points {
        Some(path) => (lad::io::read_dataset_csv(path)?, false),
        None => (sample_dataset(s, &pair, s.seed)?, true),
    };
    let n = dataset.len();
    if s.model == ModelKind::Lad && s.m > n {
        return Err(crate::CliError::config(format!(
            "m = {} exceeds the dataset size {n}",
            s.m
        )));
    }

    let (cfg1, cfg2, e1, e2) = kernel_configs(s, &dataset)?;
    out.record_bandwidth("eps1", e1);
    out.record_bandwidth("eps2", e2);
    let opts = spectral_options();

    let (embedding, m_used) = match s.model {
        ModelKind::Ad => {
            let (model, build_seconds) = timed(|| match s.start {
                StartChoice::Sensor2 => build_ad(&dataset, &cfg1, &cfg2),
                StartChoice::Sensor1 => build_ad_from_sensor1(&dataset, &cfg1, &cfg2),
            });
            let model = model?;
            out.record_stage("build", build_seconds);
            let (embed, spectrum_seconds) = timed(|| ad_embed(&model, s.q, s.t, &opts));
            out.record_stage("spectrum", spectrum_seconds);
            (embed?, 0)
        }
        ModelKind::Lad => {
            let set = draw_landmarks(s, &pair, &dataset, s.m, s.seed ^ LANDMARK_SALT)?;
            let (model, build_seconds) = timed(|| match s.start {
                StartChoice::Sensor2 => build_lad(&dataset, &set, &cfg1, &cfg2, s.alpha),
                StartChoice::Sensor1 => {
                    build_lad_from_sensor1(&dataset, &set, &cfg1, &cfg2, s.alpha)
                }
            });
            let model = model?;
            out.record_stage("build", build_seconds);
            let (embed, spectrum_seconds) = timed(|| lad_embed(&model, s.q, s.t, &opts));
            out.record_stage("spectrum", spectrum_seconds);
            out.landmark_sets.push(("landmarks", set));
            (embed?, s.m)
        }
    };

    let mut results = Table::new(&[
        "seed", "trial", "alpha", "m", "n", "eps1", "eps2", "model", "start", "q", "t", "dim",
        "spectral_gap", "max_imag_ratio", "imag_warning",
    ]);
    results
        .row()
        .push(s.seed)
        .push(0usize)
        .push(s.alpha)
        .push(m_used)
        .push(n)
        .push(e1)
        .push(e2)
        .push(match s.model {
            ModelKind::Ad => "ad",
            ModelKind::Lad => "lad",
        })
        .push(embedding.start_sensor.to_string())
        .push(s.q)
        .push(s.t)
        .push(embedding.dim())
        .push(embedding.spectral_gap)
        .push(embedding.max_imag_ratio)
        .push(if embedding.imag_warning { "true" } else { "false" })
        .finish();

    out.tables.push(("results", results));
    out.embeddings.push(("embedding", embedding));
    if sampled_here {
        out.datasets.push(("dataset", dataset));
    }
    Ok(out)
}
