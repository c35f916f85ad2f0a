//! Starting-sensor study: AD and LAD built from each starting sensor,
//! aligned against each single-sensor diffusion map.
//!
//! The product applies the starting sensor's diffusion first and the other
//! sensor's last, so the fused embedding should resemble the ending sensor's
//! own diffusion map. Swapping the sensor roles must swap the whole pattern
//! exactly, and a half-alpha LAD on subset landmarks should stay close to AD.

use lad::diffusion::{
    ad_embed, build_ad, build_ad_from_sensor1, build_lad, build_lad_from_sensor1, diffusion_map,
    embedding_from_spectrum, lad_embed, Embedding, StartSensor,
};
use lad::landmarks::LandmarkSet;
use lad::metrics::{alignments_per_column, embedding_similarity, subspace_alignment};

use crate::config::Settings;
use crate::experiments::common::{
    ad_reference, compare_lad_to_ad, draw_landmarks, kernel_configs, sample_dataset, sensor_pair,
    spectral_options, SIMILARITY_Q,
};
use crate::experiments::Outcome;
use crate::manifest::timed;
use crate::table::Table;
use crate::Result;

fn coords_alignment(a: &Embedding, b: &Embedding) -> Result<(f64, Vec<f64>)> {
    let subspace = subspace_alignment(a.coords.view(), b.coords.view())?;
    let per_col = alignments_per_column(a.coords.view(), b.coords.view())?;
    Ok((subspace, per_col))
}

pub fn run(s: &Settings) -> Result<Outcome> {
    let mut out = Outcome::new();
    let pair = sensor_pair(s)?;
    let dataset = sample_dataset(s, &pair, s.seed)?;
    let (cfg1, cfg2, e1, e2) = kernel_configs(s, &dataset)?;
    out.record_bandwidth("eps1", e1);
    out.record_bandwidth("eps2", e2);
    let opts = spectral_options();

    let (dms, dm_seconds) = timed(|| -> Result<(Embedding, Embedding)> {
        let dm1 = diffusion_map(
            dataset.sensor1.view(),
            &cfg1,
            SIMILARITY_Q,
            s.t,
            StartSensor::Sensor1,
            &opts,
        )?;
        let dm2 = diffusion_map(
            dataset.sensor2.view(),
            &cfg2,
            SIMILARITY_Q,
            s.t,
            StartSensor::Sensor2,
            &opts,
        )?;
        Ok((dm1, dm2))
    });
    let (dm1, dm2) = dms?;
    out.record_stage("diffusion_maps", dm_seconds);

    // AD from each start. The start-2 model doubles as the reference for the
    // AD-vs-LAD agreement check, so it keeps its k=7 spectrum.
    let (ad_ref, ad_seconds) = timed(|| ad_reference(&dataset, &cfg1, &cfg2, s.t));
    let ad_ref = ad_ref?;
    out.record_stage("ad_models", ad_seconds);
    let ad_s2_embed =
        embedding_from_spectrum(&ad_ref.spectrum, SIMILARITY_Q, s.t, StartSensor::Sensor2)?;
    let ad_s1_model = build_ad_from_sensor1(&dataset, &cfg1, &cfg2)?;
    let ad_s1_embed = ad_embed(&ad_s1_model, SIMILARITY_Q, s.t, &opts)?;

    let set = draw_landmarks(s, &pair, &dataset, s.m, s.seed)?;
    let lad_s2_model = build_lad(&dataset, &set, &cfg1, &cfg2, s.alpha)?;
    let lad_s2_embed = lad_embed(&lad_s2_model, SIMILARITY_Q, s.t, &opts)?;
    let lad_s1_model = build_lad_from_sensor1(&dataset, &set, &cfg1, &cfg2, s.alpha)?;
    let lad_s1_embed = lad_embed(&lad_s1_model, SIMILARITY_Q, s.t, &opts)?;

    let mut alignments = Table::new(&[
        "seed", "trial", "alpha", "m", "n", "eps1", "eps2", "model", "reference",
        "subspace_top3", "align_1", "align_2", "align_3",
    ]);
    let mut margins = Table::new(&[
        "seed", "trial", "alpha", "m", "n", "eps1", "eps2", "model", "ending_sensor",
        "align_ending", "align_starting", "margin",
    ]);

    let fused: [(&str, &Embedding, StartSensor); 4] = [
        ("ad_start2", &ad_s2_embed, StartSensor::Sensor2),
        ("ad_start1", &ad_s1_embed, StartSensor::Sensor1),
        ("lad_start2", &lad_s2_embed, StartSensor::Sensor2),
        ("lad_start1", &lad_s1_embed, StartSensor::Sensor1),
    ];
    for (name, embed, start) in &fused {
        let mut aligns = [0.0; 2];
        for (ri, (rname, dm)) in [("dm_sensor1", &dm1), ("dm_sensor2", &dm2)].iter().enumerate() {
            let (subspace, per_col) = coords_alignment(embed, dm)?;
            aligns[ri] = subspace;
            alignments
                .row()
                .push(s.seed)
                .push(0usize)
                .push(s.alpha)
                .push(s.m)
                .push(s.n)
                .push(e1)
                .push(e2)
                .push(*name)
                .push(*rname)
                .push(subspace)
                .push(per_col[0])
                .push(per_col[1])
                .push(per_col[2])
                .finish();
        }
        // Starting on sensor 2 means sensor 1's operator is applied last.
        let (ending, align_ending, align_starting) = match start {
            StartSensor::Sensor2 => ("sensor1", aligns[0], aligns[1]),
            StartSensor::Sensor1 => ("sensor2", aligns[1], aligns[0]),
        };
        margins
            .row()
            .push(s.seed)
            .push(0usize)
            .push(s.alpha)
            .push(s.m)
            .push(s.n)
            .push(e1)
            .push(e2)
            .push(*name)
            .push(ending)
            .push(align_ending)
            .push(align_starting)
            .push(align_ending - align_starting)
            .finish();
    }

    // Swap symmetry: rebuilding on the swapped dataset with swapped kernels
    // reproduces the opposite-start models arithmetically.
    let swapped = dataset.swapped();
    let swapped_set = LandmarkSet::explicit(set.points2.clone(), set.points1.clone())?;
    let ad_swapped = build_ad(&swapped, &cfg2, &cfg1)?;
    let ad_swapped_embed = ad_embed(&ad_swapped, SIMILARITY_Q, s.t, &opts)?;
    let lad_swapped = build_lad(&swapped, &swapped_set, &cfg2, &cfg1, s.alpha)?;
    let lad_swapped_embed = lad_embed(&lad_swapped, SIMILARITY_Q, s.t, &opts)?;
    let ad_swap_gap =
        embedding_similarity(ad_swapped_embed.coords.view(), ad_s1_embed.coords.view())?;
    let lad_swap_gap =
        embedding_similarity(lad_swapped_embed.coords.view(), lad_s1_embed.coords.view())?;

    // AD-vs-LAD agreement at the configured landmark budget.
    let lad_report = compare_lad_to_ad(&lad_s2_model, &ad_ref, s.t)?;

    let mut checks = Table::new(&[
        "seed", "trial", "alpha", "m", "n", "eps1", "eps2", "check", "value",
    ]);
    for (name, value) in [
        ("ad_swap_similarity", ad_swap_gap),
        ("lad_swap_similarity", lad_swap_gap),
        ("ad_vs_lad_subspace_top3", lad_report.subspace_top3),
        ("ad_vs_lad_similarity_q3", lad_report.similarity_q3),
    ] {
        checks
            .row()
            .push(s.seed)
            .push(0usize)
            .push(s.alpha)
            .push(s.m)
            .push(s.n)
            .push(e1)
            .push(e2)
            .push(name)
            .push(value)
            .finish();
    }

    out.tables.push(("alignments", alignments));
    out.tables.push(("margins", margins));
    out.tables.push(("checks", checks));
    out.embeddings.push(("embed_dm_sensor1", dm1));
    out.embeddings.push(("embed_dm_sensor2", dm2));
    out.embeddings.push(("embed_ad_start2", ad_s2_embed));
    out.embeddings.push(("embed_ad_start1", ad_s1_embed));
    out.embeddings.push(("embed_lad_start2", lad_s2_embed));
    out.embeddings.push(("embed_lad_start1", lad_s1_embed));
    Ok(out)
}

/// Margin (ending minus starting alignment) for one fused model.
pub fn margin_of(out: &Outcome, model: &str) -> f64 {
    let t = out.table("margins");
    for i in t.rows_where("model", model) {
        return t.value(i, "margin");
    }
    panic!("no margin row for {model}");
}

/// Value of one named check.
pub fn check_of(out: &Outcome, check: &str) -> f64 {
    let t = out.table("checks");
    for i in t.rows_where("check", check) {
        return t.value(i, "value");
    }
    panic!("no check named {check}");
}
