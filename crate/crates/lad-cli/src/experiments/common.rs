//! Machinery shared by the experiment runners: dataset and landmark
//! construction from resolved settings, the AD reference bundle, the
//! LAD-vs-AD comparison report, and small fitting/aggregation helpers.

use lad::diffusion::{
    ad_spectrum, build_ad, build_lad, embedding_from_spectrum, lad_spectrum, AdModel, Embedding,
    LadModel,
};
use lad::kernels::KernelConfig;
use lad::landmarks::{self, LandmarkSet};
use lad::spectral::SpectralResult;
use lad::manifolds::{sample_pair, ManifoldGenerator, PairedDataset};
use lad::metrics::{
    alignments_per_column, eigenvalue_diff_ratio, embedding_similarity, subspace_alignment,
};
use lad::spectral::SpectralOptions;
use ndarray::{s, ArrayView2};

use crate::config::{EpsSetting, LandmarkScheme, Settings};
use crate::manifest::timed;
use crate::Result;

/// Comparison spectra keep the trivial pair plus six nontrivial ones; the
/// reported eigenvalue ratios sit at sorted positions 1, 3 and 5.
pub const SPECTRUM_K: usize = 7;
/// Embedding similarity is always evaluated at three coordinates.
pub const SIMILARITY_Q: usize = 3;

pub fn spectral_options() -> SpectralOptions {
    SpectralOptions::default()
}

pub struct SensorPair {
    pub gen1: ManifoldGenerator,
    pub gen2: ManifoldGenerator,
}

pub fn sensor_pair(s: &Settings) -> Result<SensorPair> {
    Ok(SensorPair {
        gen1: s.sensor1.build()?,
        gen2: s.sensor2.build()?,
    })
}

pub fn sample_dataset(s: &Settings, pair: &SensorPair, seed: u64) -> Result<PairedDataset> {
    sample_pair(&pair.gen1, &pair.gen2, s.n, &s.density(), seed).map_err(Into::into)
}

/// Resolves a bandwidth setting against the point cloud it will smooth.
pub fn resolve_eps(setting: EpsSetting, points: ArrayView2<'_, f64>) -> Result<f64> {
    match setting {
        EpsSetting::Fixed(v) => Ok(v),
        EpsSetting::Named(_) => {
            lad::kernels::median_squared_distance(points).map_err(Into::into)
        }
    }
}

/// Concrete kernel configurations for both sensors, with the resolved
/// bandwidths returned for the manifest.
pub fn kernel_configs(
    s: &Settings,
    dataset: &PairedDataset,
) -> Result<(KernelConfig, KernelConfig, f64, f64)> {
    let e1 = resolve_eps(s.eps1, dataset.sensor1.view())?;
    let e2 = resolve_eps(s.eps2, dataset.sensor2.view())?;
    let cfg1 = KernelConfig::gaussian(e1)?;
    let cfg2 = KernelConfig::gaussian(e2)?;
    Ok((cfg1, cfg2, e1, e2))
}

/// Draws `m` landmarks per the configured scheme.
pub fn draw_landmarks(
    s: &Settings,
    pair: &SensorPair,
    dataset: &PairedDataset,
    m: usize,
    seed: u64,
) -> Result<LandmarkSet> {
    let set = match s.landmarks {
        LandmarkScheme::Subset => landmarks::uniform_subset(dataset, m, seed)?,
        LandmarkScheme::Full => LandmarkSet::full(dataset),
        LandmarkScheme::Density => landmarks::density_sample(
            &pair.gen1,
            &pair.gen2,
            m,
            &s.landmark_density_fn(),
            seed,
        )?,
    };
    Ok(set)
}

/// The AD side of a comparison, computed once per dataset and reused across
/// every landmark draw; carries its own stage timings.
pub struct AdReference {
    pub model: AdModel,
    pub spectrum: SpectralResult,
    pub embed_q3: Embedding,
    pub build_seconds: f64,
    pub spectrum_seconds: f64,
}

pub fn ad_reference(
    dataset: &PairedDataset,
    cfg1: &KernelConfig,
    cfg2: &KernelConfig,
    t: f64,
) -> Result<AdReference> {
    let (model, build_seconds) = timed(|| build_ad(dataset, cfg1, cfg2));
    let model = model?;
    let opts = spectral_options();
    let (spectrum, spectrum_seconds) = timed(|| ad_spectrum(&model, SPECTRUM_K, &opts));
    let spectrum = spectrum?;
    let embed_q3 = embedding_from_spectrum(&spectrum, SIMILARITY_Q, t, model.start)?;
    Ok(AdReference {
        model,
        spectrum,
        embed_q3,
        build_seconds,
        spectrum_seconds,
    })
}

/// One LAD run measured against the AD reference.
pub struct VsAdReport {
    /// Per-column alignment of the six nontrivial eigenvectors.
    pub alignments: Vec<f64>,
    /// Principal-angle alignment of the top-3 nontrivial spans.
    pub subspace_top3: f64,
    /// |lambda_lad - lambda_ad| / |lambda_ad| at sorted positions 1, 3, 5.
    pub ratios: [f64; 3],
    pub similarity_q3: f64,
    pub spectrum_seconds: f64,
    pub embed_q3: Embedding,
}

pub fn compare_lad_to_ad(model: &LadModel, ad: &AdReference, t: f64) -> Result<VsAdReport> {
    let opts = spectral_options();
    let (spectrum, spectrum_seconds) = timed(|| lad_spectrum(model, SPECTRUM_K, &opts));
    let spectrum = spectrum?;
    let have = spectrum.retained().min(ad.spectrum.retained());
    if have < SPECTRUM_K {
        return Err(crate::CliError::Numerical(format!(
            "spectrum rank-truncated to {have} below the {SPECTRUM_K} comparison pairs"
        )));
    }
    let ad_block = ad.spectrum.vectors.slice(s![.., 1..SPECTRUM_K]);
    let lad_block = spectrum.vectors.slice(s![.., 1..SPECTRUM_K]);
    let alignments = alignments_per_column(ad_block, lad_block)?;
    let subspace_top3 = subspace_alignment(
        ad.spectrum.vectors.slice(s![.., 1..4]),
        spectrum.vectors.slice(s![.., 1..4]),
    )?;
    let r = eigenvalue_diff_ratio(&spectrum.eigenvalues, &ad.spectrum.eigenvalues, &[1, 3, 5])?;
    let embed_q3 = embedding_from_spectrum(&spectrum, SIMILARITY_Q, t, model.start)?;
    let similarity_q3 = embedding_similarity(ad.embed_q3.coords.view(), embed_q3.coords.view())?;
    Ok(VsAdReport {
        alignments,
        subspace_top3,
        ratios: [r[0], r[1], r[2]],
        similarity_q3,
        spectrum_seconds,
        embed_q3,
    })
}

/// Builds the LAD model for one landmark draw, timed.
pub fn timed_lad(
    dataset: &PairedDataset,
    set: &LandmarkSet,
    cfg1: &KernelConfig,
    cfg2: &KernelConfig,
    alpha: f64,
) -> Result<(LadModel, f64)> {
    let (model, seconds) = timed(|| build_lad(dataset, set, cfg1, cfg2, alpha));
    Ok((model?, seconds))
}

/// Median of a sample; the input order is irrelevant.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty sample");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("median input must be ordered"));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}

/// Least-squares slope of ln(y) against ln(x). Pairs with a nonpositive
/// coordinate are skipped; at least two must survive.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    assert_eq!(xs.len(), ys.len());
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return Err(crate::CliError::Numerical(
            "fewer than two positive points for a log-log fit".to_string(),
        ));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_handles_odd_and_even_counts() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn slope_recovers_exact_power_laws() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * f64::powf(*x, -0.75)).collect();
        let slope = log_log_slope(&xs, &ys).unwrap();
        assert!((slope + 0.75).abs() < 1e-12);
    }

    #[test]
    fn slope_needs_two_positive_points() {
        assert!(log_log_slope(&[1.0, 2.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn full_landmarks_at_half_alpha_match_ad_closely() {
        // End-to-end sanity for the comparison plumbing: with every sample a
        // landmark and matched densities, LAD should sit near AD.
        let s = {
            let mut s = crate::config::Settings::defaults(crate::config::Experiment::AlphaSweep, false);
            s.n = 300;
            s.landmarks = LandmarkScheme::Full;
            s
        };
        let pair = sensor_pair(&s).unwrap();
        let dataset = sample_dataset(&s, &pair, 5).unwrap();
        let (cfg1, cfg2, e1, e2) = kernel_configs(&s, &dataset).unwrap();
        assert_eq!((e1, e2), (0.03, 0.03));
        let ad = ad_reference(&dataset, &cfg1, &cfg2, s.t).unwrap();
        let set = draw_landmarks(&s, &pair, &dataset, s.n, 5).unwrap();
        let (model, _) = timed_lad(&dataset, &set, &cfg1, &cfg2, 0.5).unwrap();
        let report = compare_lad_to_ad(&model, &ad, s.t).unwrap();
        assert!(report.subspace_top3 > 0.99, "got {}", report.subspace_top3);
        assert!(report.ratios[0] < 0.05, "got {:?}", report.ratios);
    }
}
