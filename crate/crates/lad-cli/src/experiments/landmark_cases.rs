//! Four-case landmark-density study: the same uniformly sampled dataset
//! fused through four different landmark densities, across the alpha grid.
//! Reports each case's distance to AD and all pairwise distances among the
//! cases, the quantity that should shrink as alpha approaches 1.

use lad::metrics::embedding_similarity;

use crate::config::Settings;
use crate::experiments::common::{
    ad_reference, compare_lad_to_ad, kernel_configs, sample_dataset, sensor_pair, timed_lad,
};
use crate::experiments::Outcome;
use crate::manifest::timed;
use crate::table::Table;
use crate::Result;

pub const CASES: [&str; 4] = ["case1", "case2", "case3", "case4"];

/// Distinct landmark-draw stream per case within a trial.
fn case_seed(tseed: u64, case_index: usize) -> u64 {
    tseed ^ ((case_index as u64 + 1) << 48)
}

pub fn run(s: &Settings) -> Result<Outcome> {
    let mut out = Outcome::new();
    let pair = sensor_pair(s)?;

    let mut vs_ad = Table::new(&[
        "seed", "trial", "trial_seed", "case", "alpha", "m", "n", "eps1", "eps2",
        "subspace_top3", "eig_ratio_1", "similarity_q3",
    ]);
    let mut pairwise = Table::new(&[
        "seed", "trial", "trial_seed", "case_a", "case_b", "alpha", "m", "n", "eps1", "eps2",
        "similarity_q3",
    ]);
    let mut summary = Table::new(&[
        "seed", "trials", "alpha", "m", "n", "eps1", "eps2", "mean_pairwise_similarity",
        "mean_similarity_to_ad",
    ]);

    let mut e_record = None;
    let na = s.alphas.len();
    let mut sum_pair = vec![0.0; na];
    let mut cnt_pair = vec![0usize; na];
    let mut sum_ad = vec![0.0; na];
    let mut cnt_ad = vec![0usize; na];

    let (status_total_seconds, total_seconds) = timed(|| -> Result<()> {
        for trial in 0..s.trials {
            let tseed = s.trial_seed(trial);
            let dataset = sample_dataset(s, &pair, tseed)?;
            let (cfg1, cfg2, e1, e2) = kernel_configs(s, &dataset)?;
            e_record.get_or_insert((e1, e2));
            let ad = ad_reference(&dataset, &cfg1, &cfg2, s.t)?;

            // Landmark sets are drawn once per case and shared across alphas,
            // so alpha comparisons see identical landmarks.
            let mut sets = Vec::with_capacity(CASES.len());
            for (ci, case) in CASES.iter().enumerate() {
                let mut cased = s.clone();
                cased.landmark_density = case.to_string();
                let set = crate::experiments::common::draw_landmarks(
                    &cased,
                    &pair,
                    &dataset,
                    s.m,
                    case_seed(tseed, ci),
                )?;
                sets.push(set);
            }

            for (ai, &alpha) in s.alphas.iter().enumerate() {
                let mut embeds = Vec::with_capacity(CASES.len());
                for (ci, case) in CASES.iter().enumerate() {
                    let (model, _) = timed_lad(&dataset, &sets[ci], &cfg1, &cfg2, alpha)?;
                    let report = compare_lad_to_ad(&model, &ad, s.t)?;
                    vs_ad
                        .row()
                        .push(s.seed)
                        .push(trial)
                        .push(tseed)
                        .push(*case)
                        .push(alpha)
                        .push(s.m)
                        .push(s.n)
                        .push(e1)
                        .push(e2)
                        .push(report.subspace_top3)
                        .push(report.ratios[0])
                        .push(report.similarity_q3)
                        .finish();
                    sum_ad[ai] += report.similarity_q3;
                    cnt_ad[ai] += 1;
                    embeds.push(report.embed_q3);
                }
                for i in 0..CASES.len() {
                    for j in (i + 1)..CASES.len() {
                        let sim = embedding_similarity(
                            embeds[i].coords.view(),
                            embeds[j].coords.view(),
                        )?;
                        pairwise
                            .row()
                            .push(s.seed)
                            .push(trial)
                            .push(tseed)
                            .push(CASES[i])
                            .push(CASES[j])
                            .push(alpha)
                            .push(s.m)
                            .push(s.n)
                            .push(e1)
                            .push(e2)
                            .push(sim)
                            .finish();
                        sum_pair[ai] += sim;
                        cnt_pair[ai] += 1;
                    }
                }
            }
        }
        Ok(())
    });
    out.record_stage("cases", total_seconds);
    status_total_seconds?;
    let (e1, e2) = e_record.expect("at least one trial ran");
    out.record_bandwidth("eps1", e1);
    out.record_bandwidth("eps2", e2);

    for (ai, &alpha) in s.alphas.iter().enumerate() {
        summary
            .row()
            .push(s.seed)
            .push(s.trials)
            .push(alpha)
            .push(s.m)
            .push(s.n)
            .push(e1)
            .push(e2)
            .push(sum_pair[ai] / cnt_pair[ai] as f64)
            .push(sum_ad[ai] / cnt_ad[ai] as f64)
            .finish();
    }

    out.tables.push(("vs_ad", vs_ad));
    out.tables.push(("pairwise", pairwise));
    out.tables.push(("summary", summary));
    Ok(out)
}

/// (mean pairwise similarity, mean similarity to AD) at one alpha.
pub fn summary_at(out: &Outcome, alpha: f64) -> (f64, f64) {
    let summary = out.table("summary");
    let alpha_text = format!("{alpha}");
    for i in 0..summary.len() {
        if summary.cell(i, "alpha") == alpha_text {
            return (
                summary.value(i, "mean_pairwise_similarity"),
                summary.value(i, "mean_similarity_to_ad"),
            );
        }
    }
    panic!("no summary row at alpha {alpha}");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Experiment;

    #[test]
    fn case_embeddings_converge_on_each_other_as_alpha_rises() {
        let mut s = Settings::defaults(Experiment::LandmarkCases, false);
        s.n = 500;
        s.m = 200;
        s.alphas = vec![0.0, 1.0];
        s.validate().unwrap();
        let out = run(&s).unwrap();
        assert_eq!(out.table("vs_ad").len(), 8);
        assert_eq!(out.table("pairwise").len(), 12);
        let (pair_zero, ad_zero) = summary_at(&out, 0.0);
        let (pair_one, ad_one) = summary_at(&out, 1.0);
        assert!(
            pair_one < pair_zero,
            "pairwise similarity should tighten: {pair_zero} -> {pair_one}"
        );
        // Landmark-insensitivity is not AD recovery.
        assert!(ad_one > 1e-4, "distance to AD collapsed: {ad_zero} -> {ad_one}");
    }
}
