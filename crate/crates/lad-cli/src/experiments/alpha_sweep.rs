//! Alpha sweep: fused models across the alpha grid under two landmark
//! regimes, compared against AD on the same draw.
//!
//! The `subset` rows take landmarks as a uniform subset of the (nonuniformly
//! sampled) data, so the landmark density follows the data density; the
//! `uniform` rows draw landmarks fresh and uniformly, decoupling the two.

use crate::config::{LandmarkScheme, Settings};
use crate::experiments::common::{
    ad_reference, compare_lad_to_ad, kernel_configs, median, sample_dataset, sensor_pair,
    timed_lad,
};
use crate::experiments::Outcome;
use crate::manifest::timed;
use crate::table::Table;
use crate::Result;

/// Salt separating the fresh-uniform landmark stream from the subset stream.
const UNIFORM_LANDMARK_SALT: u64 = 0x4c4d_4b53;

const SCHEMES: [&str; 2] = ["subset", "uniform"];

pub fn run(s: &Settings) -> Result<Outcome> {
    let mut out = Outcome::new();
    let pair = sensor_pair(s)?;

    let mut results = Table::new(&[
        "seed", "trial", "trial_seed", "scheme", "alpha", "m", "n", "eps1", "eps2", "align_1",
        "align_2", "align_3", "subspace_top3", "eig_ratio_1", "eig_ratio_3", "eig_ratio_5",
        "similarity_q3",
    ]);
    let mut summary = Table::new(&[
        "seed", "trials", "scheme", "alpha", "m", "n", "eps1", "eps2", "median_subspace_top3",
        "median_eig_ratio_1", "median_similarity_q3",
    ]);

    let mut e_record = None;
    // subspace[scheme][alpha] across trials.
    let mut acc: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); s.alphas.len()]; 2];
    let mut acc_ratio: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); s.alphas.len()]; 2];
    let mut acc_sim: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); s.alphas.len()]; 2];

    let (status_total_seconds, total_seconds) = timed(|| -> Result<()> {
        for trial in 0..s.trials {
            let tseed = s.trial_seed(trial);
            let dataset = sample_dataset(s, &pair, tseed)?;
            let (cfg1, cfg2, e1, e2) = kernel_configs(s, &dataset)?;
            e_record.get_or_insert((e1, e2));
            let ad = ad_reference(&dataset, &cfg1, &cfg2, s.t)?;

            for (si, scheme) in SCHEMES.iter().enumerate() {
                let set = match si {
                    0 => {
                        let mut sub = s.clone();
                        sub.landmarks = LandmarkScheme::Subset;
                        crate::experiments::common::draw_landmarks(
                            &sub, &pair, &dataset, s.m, tseed,
                        )?
                    }
                    _ => {
                        let mut uni = s.clone();
                        uni.landmarks = LandmarkScheme::Density;
                        uni.landmark_density = "uniform".to_string();
                        crate::experiments::common::draw_landmarks(
                            &uni,
                            &pair,
                            &dataset,
                            s.m,
                            tseed ^ UNIFORM_LANDMARK_SALT,
                        )?
                    }
                };
                for (ai, &alpha) in s.alphas.iter().enumerate() {
                    let (model, _) = timed_lad(&dataset, &set, &cfg1, &cfg2, alpha)?;
                    let report = compare_lad_to_ad(&model, &ad, s.t)?;
                    results
                        .row()
                        .push(s.seed)
                        .push(trial)
                        .push(tseed)
                        .push(*scheme)
                        .push(alpha)
                        .push(s.m)
                        .push(s.n)
                        .push(e1)
                        .push(e2)
                        .push(report.alignments[0])
                        .push(report.alignments[1])
                        .push(report.alignments[2])
                        .push(report.subspace_top3)
                        .push(report.ratios[0])
                        .push(report.ratios[1])
                        .push(report.ratios[2])
                        .push(report.similarity_q3)
                        .finish();
                    acc[si][ai].push(report.subspace_top3);
                    acc_ratio[si][ai].push(report.ratios[0]);
                    acc_sim[si][ai].push(report.similarity_q3);
                }
            }
        }
        Ok(())
    });
    out.record_stage("sweep", total_seconds);
    status_total_seconds?;
    let (e1, e2) = e_record.expect("at least one trial ran");
    out.record_bandwidth("eps1", e1);
    out.record_bandwidth("eps2", e2);

    for (si, scheme) in SCHEMES.iter().enumerate() {
        for (ai, &alpha) in s.alphas.iter().enumerate() {
            summary
                .row()
                .push(s.seed)
                .push(s.trials)
                .push(*scheme)
                .push(alpha)
                .push(s.m)
                .push(s.n)
                .push(e1)
                .push(e2)
                .push(median(&acc[si][ai]))
                .push(median(&acc_ratio[si][ai]))
                .push(median(&acc_sim[si][ai]))
                .finish();
        }
    }

    out.tables.push(("results", results));
    out.tables.push(("summary", summary));
    Ok(out)
}

/// Median top-3 subspace alignment for a scheme/alpha cell of the summary.
pub fn summary_alignment(out: &Outcome, scheme: &str, alpha: f64) -> f64 {
    let summary = out.table("summary");
    let alpha_text = format!("{alpha}");
    for i in out.table("summary").rows_where("scheme", scheme) {
        if summary.cell(i, "alpha") == alpha_text {
            return summary.value(i, "median_subspace_top3");
        }
    }
    panic!("no summary row for scheme {scheme}, alpha {alpha}");
}
