//! Landmark selection.
//!
//! A landmark set is a small collection of paired points that anchors the
//! reduced diffusion computation. It can be a subset of the dataset (uniform
//! or stratified by labels), a fresh draw from a density on the latent domain,
//! or explicit user-provided points. Subset landmarks copy dataset rows
//! bit-exactly; density-sampled landmarks reuse the inverse-CDF grid sampler,
//! so negative weight values are clamped and the removed mass fraction is
//! recorded on the set.

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::manifolds::{
    sample_latents_uniform, Density, GridSampler, ManifoldGenerator, PairedDataset,
    GRID_SAMPLER_CELLS,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LandmarkProvenance {
    SubsetUniform,
    SubsetStratified,
    DensitySampled,
    Explicit,
}

/// Paired landmark points, with the bookkeeping needed to reproduce them.
#[derive(Debug, Clone)]
pub struct LandmarkSet {
    /// Dataset row indices when the set is a subset, ascending; `None` for
    /// density-sampled or explicit landmarks.
    pub indices: Option<Vec<usize>>,
    /// First sensor's landmark coordinates, m x p1.
    pub points1: Array2<f64>,
    /// Second sensor's landmark coordinates, m x p2.
    pub points2: Array2<f64>,
    pub provenance: LandmarkProvenance,
    pub seed: u64,
    /// Name of the weight function for density-sampled sets.
    pub weight_id: Option<String>,
    /// Mass removed by clamping negative weights; 0 for subsets.
    pub clamped_mass_fraction: f64,
}

impl LandmarkSet {
    pub fn len(&self) -> usize {
        self.points1.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Wraps explicit paired points as landmarks.
    pub fn explicit(points1: Array2<f64>, points2: Array2<f64>) -> Result<Self> {
        if points1.nrows() != points2.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "landmark row counts differ: {} vs {}",
                points1.nrows(),
                points2.nrows()
            )));
        }
        if points1.nrows() == 0 {
            return Err(Error::invalid("a landmark set needs at least one point"));
        }
        Ok(LandmarkSet {
            indices: None,
            points1,
            points2,
            provenance: LandmarkProvenance::Explicit,
            seed: 0,
            weight_id: None,
            clamped_mass_fraction: 0.0,
        })
    }

    /// Uses every dataset row as a landmark, in order.
    pub fn full(dataset: &PairedDataset) -> Self {
        LandmarkSet {
            indices: Some((0..dataset.len()).collect()),
            points1: dataset.sensor1.clone(),
            points2: dataset.sensor2.clone(),
            provenance: LandmarkProvenance::Explicit,
            seed: 0,
            weight_id: None,
            clamped_mass_fraction: 0.0,
        }
    }
}

fn subset_from_indices(
    dataset: &PairedDataset,
    mut indices: Vec<usize>,
    provenance: LandmarkProvenance,
    seed: u64,
) -> LandmarkSet {
    indices.sort_unstable();
    let points1 = dataset.sensor1.select(ndarray::Axis(0), &indices);
    let points2 = dataset.sensor2.select(ndarray::Axis(0), &indices);
    LandmarkSet {
        indices: Some(indices),
        points1,
        points2,
        provenance,
        seed,
        weight_id: None,
        clamped_mass_fraction: 0.0,
    }
}

/// Draws `m` distinct indices without replacement via a partial Fisher-Yates
/// shuffle of `0..n`.
fn draw_without_replacement(n: usize, m: usize, rng: &mut impl Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for k in 0..m {
        let j = rng.gen_range(k..n);
        pool.swap(k, j);
    }
    pool.truncate(m);
    pool
}

/// Uniform subset of the dataset rows, without replacement.
pub fn uniform_subset(dataset: &PairedDataset, m: usize, seed: u64) -> Result<LandmarkSet> {
    let n = dataset.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "landmark count {m} must be in 1..={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices = draw_without_replacement(n, m, &mut rng);
    Ok(subset_from_indices(
        dataset,
        indices,
        LandmarkProvenance::SubsetUniform,
        seed,
    ))
}

/// Subset with `per_class` uniform draws from each label class, without
/// replacement. Classes are processed in ascending label order so the result
/// is deterministic for a fixed seed.
pub fn stratified_subset(
    dataset: &PairedDataset,
    labels: &[usize],
    per_class: usize,
    seed: u64,
) -> Result<LandmarkSet> {
    if labels.len() != dataset.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            labels.len(),
            dataset.len()
        )));
    }
    if per_class == 0 {
        return Err(Error::invalid("per_class must be positive"));
    }
    let mut classes: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (i, label) in labels.iter().enumerate() {
        classes.entry(*label).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices = Vec::with_capacity(per_class * classes.len());
    for (label, members) in &classes {
        if members.len() < per_class {
            return Err(Error::invalid(format!(
                "class {label} has {} members, fewer than per_class = {per_class}",
                members.len()
            )));
        }
        let picks = draw_without_replacement(members.len(), per_class, &mut rng);
        indices.extend(picks.into_iter().map(|k| members[k]));
    }
    Ok(subset_from_indices(
        dataset,
        indices,
        LandmarkProvenance::SubsetStratified,
        seed,
    ))
}

/// Fresh landmark draw from a density on the shared latent domain, embedded
/// through both sensors.
///
/// Weighted densities go through the inverse-CDF grid sampler (negative values
/// clamped, removed mass recorded); `Density::Uniform` uses the exact uniform
/// sampler for the second generator's manifold.
pub fn density_sample(
    gen1: &ManifoldGenerator,
    gen2: &ManifoldGenerator,
    m: usize,
    density: &Density,
    seed: u64,
) -> Result<LandmarkSet> {
    if m == 0 {
        return Err(Error::invalid("landmark count must be positive"));
    }
    gen1.validate()?;
    gen2.validate()?;
    if gen1.intrinsic_dim() != gen2.intrinsic_dim() || gen1.domain() != gen2.domain() {
        return Err(Error::invalid(
            "generators must share a latent parameter domain",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (latents, clamped) = match density {
        Density::Uniform => (sample_latents_uniform(gen2, m, &mut rng)?, 0.0),
        Density::Weighted(w) => {
            let sampler = GridSampler::new(gen2, Some(w), GRID_SAMPLER_CELLS)?;
            let frac = sampler.clamped_mass_fraction();
            (sampler.sample_latents(m, &mut rng), frac)
        }
    };
    Ok(LandmarkSet {
        indices: None,
        points1: gen1.embed_latents(latents.view()),
        points2: gen2.embed_latents(latents.view()),
        provenance: LandmarkProvenance::DensitySampled,
        seed,
        weight_id: Some(density.name().to_string()),
        clamped_mass_fraction: clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifolds::{builtin_density, sample_pair, DensityFn};
    use std::f64::consts::PI;

    fn circle_dataset(n: usize, seed: u64) -> PairedDataset {
        let g1 = ManifoldGenerator::scaled_circle(1.5);
        let g2 = ManifoldGenerator::circle();
        sample_pair(&g1, &g2, n, &Density::Uniform, seed).unwrap()
    }

    #[test]
    fn uniform_subset_copies_rows_bit_exactly() {
        let ds = circle_dataset(200, 1);
        let lm = uniform_subset(&ds, 40, 9).unwrap();
        assert_eq!(lm.len(), 40);
        let idx = lm.indices.as_ref().unwrap();
        assert!(idx.windows(2).all(|w| w[0] < w[1]), "sorted and distinct");
        for (k, &i) in idx.iter().enumerate() {
            assert_eq!(lm.points1.row(k), ds.sensor1.row(i));
            assert_eq!(lm.points2.row(k), ds.sensor2.row(i));
        }
    }

    #[test]
    fn uniform_subset_full_size_is_a_permutation() {
        let ds = circle_dataset(64, 2);
        let lm = uniform_subset(&ds, 64, 5).unwrap();
        assert_eq!(lm.indices.unwrap(), (0..64).collect::<Vec<_>>());
    }

    #[test]
    fn uniform_subset_is_seed_deterministic() {
        let ds = circle_dataset(100, 3);
        let a = uniform_subset(&ds, 30, 77).unwrap();
        let b = uniform_subset(&ds, 30, 77).unwrap();
        assert_eq!(a.indices, b.indices);
        let c = uniform_subset(&ds, 30, 78).unwrap();
        assert_ne!(a.indices, c.indices);
    }

    #[test]
    fn uniform_subset_rejects_bad_sizes() {
        let ds = circle_dataset(10, 4);
        assert!(uniform_subset(&ds, 0, 0).is_err());
        assert!(uniform_subset(&ds, 11, 0).is_err());
    }

    #[test]
    fn uniform_subset_index_histogram_is_uniform() {
        // 10^4 seeds, m = 100 of n = 1000: expected hits per index is 1000.
        // Chi-square with 999 degrees of freedom; 1106 is the p = 0.01
        // critical value (Wilson-Hilferty approximation).
        let ds = circle_dataset(1000, 6);
        let mut counts = vec![0u32; 1000];
        for seed in 0..10_000u64 {
            let lm = uniform_subset(&ds, 100, seed).unwrap();
            for &i in lm.indices.as_ref().unwrap() {
                counts[i] += 1;
            }
        }
        let expected = 1000.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 1106.0, "chi-square statistic {chi2}");
    }

    #[test]
    fn stratified_subset_respects_classes() {
        let ds = circle_dataset(500, 7);
        let labels: Vec<usize> = (0..500).map(|i| i % 5).collect();
        let lm = stratified_subset(&ds, &labels, 170 / 2, 1).unwrap();
        assert_eq!(lm.len(), 5 * 85);
        let idx = lm.indices.as_ref().unwrap();
        let mut per_class = [0usize; 5];
        for &i in idx {
            per_class[labels[i]] += 1;
        }
        assert_eq!(per_class, [85; 5]);
        assert!(idx.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn stratified_subset_single_class_matches_uniform_semantics() {
        let ds = circle_dataset(50, 8);
        let labels = vec![0usize; 50];
        let lm = stratified_subset(&ds, &labels, 50, 3).unwrap();
        assert_eq!(lm.indices.unwrap(), (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn stratified_subset_names_short_class() {
        let ds = circle_dataset(20, 9);
        let mut labels = vec![0usize; 20];
        labels[19] = 7;
        let err = stratified_subset(&ds, &labels, 5, 0).unwrap_err();
        assert!(err.to_string().contains("class 7"), "{err}");
    }

    #[test]
    fn density_sample_constant_weight_is_uniform() {
        // 10^5 draws into 64 bins: chi-square with 63 degrees of freedom,
        // p = 0.01 critical value 92.0 (Wilson-Hilferty approximation).
        let g1 = ManifoldGenerator::ellipse();
        let g2 = ManifoldGenerator::circle();
        let flat = Density::Weighted(DensityFn::new("const", |_: &[f64]| 1.0));
        let lm = density_sample(&g1, &g2, 100_000, &flat, 21).unwrap();
        let mut bins = [0u32; 64];
        for k in 0..lm.len() {
            let theta = lm.points2[[k, 1]].atan2(lm.points2[[k, 0]]);
            let b = (((theta + PI) / (2.0 * PI) * 64.0) as usize).min(63);
            bins[b] += 1;
        }
        let expected = 100_000.0 / 64.0;
        let chi2: f64 = bins
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        assert!(chi2 < 92.0, "chi-square statistic {chi2}");
    }

    #[test]
    fn density_sample_cosine_weight_matches_analytic_moment() {
        // mean of cos(theta) under (0.48 cos + 0.52) is 0.24/0.52.
        let g = ManifoldGenerator::circle();
        let cosine = builtin_density("cosine").unwrap();
        let lm = density_sample(&g, &g, 100_000, &cosine, 30).unwrap();
        let mean: f64 =
            lm.points2.column(0).iter().sum::<f64>() / lm.len() as f64;
        let analytic = 0.24 / 0.52;
        assert!((mean - analytic).abs() < 0.01, "mean {mean} vs {analytic}");
    }

    #[test]
    fn density_sample_weight_scale_invariance() {
        let g = ManifoldGenerator::circle();
        // Power-of-two factor: the normalized cdf is bit-identical, so the
        // scale invariance can be asserted exactly.
        let w = Density::Weighted(DensityFn::new("w", |p: &[f64]| 1.1 + p[0].sin()));
        let ws = Density::Weighted(DensityFn::new("w", |p: &[f64]| 32.0 * (1.1 + p[0].sin())));
        let a = density_sample(&g, &g, 500, &w, 5).unwrap();
        let b = density_sample(&g, &g, 500, &ws, 5).unwrap();
        assert_eq!(a.points2, b.points2);
    }

    #[test]
    fn density_sample_records_provenance() {
        let g = ManifoldGenerator::circle();
        let cosine = builtin_density("cosine").unwrap();
        let lm = density_sample(&g, &g, 10, &cosine, 4).unwrap();
        assert_eq!(lm.provenance, LandmarkProvenance::DensitySampled);
        assert_eq!(lm.weight_id.as_deref(), Some("cosine"));
        assert!(lm.indices.is_none());
        assert_eq!(lm.clamped_mass_fraction, 0.0);
        let arctan = builtin_density("arctan").unwrap();
        let lm2 = density_sample(&g, &g, 10, &arctan, 4).unwrap();
        assert!(lm2.clamped_mass_fraction > 0.3);
    }

    #[test]
    fn full_set_uses_every_row() {
        let ds = circle_dataset(17, 10);
        let lm = LandmarkSet::full(&ds);
        assert_eq!(lm.len(), 17);
        assert_eq!(lm.points1, ds.sensor1);
        assert_eq!(lm.points2, ds.sensor2);
    }
}
