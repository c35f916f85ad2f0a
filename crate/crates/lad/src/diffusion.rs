//! Alternating diffusion and its landmark-accelerated form.
//!
//! Plain alternating diffusion composes the two sensors' row-stochastic
//! kernels into `M = M1 * M2`, so applying `M` diffuses on the second
//! sensor's graph first: the product is "alternating diffusion started on
//! sensor 2". The landmark variant never forms an n x n affinity: both
//! sensors are compared against m landmark points only, giving n x m
//! matrices, an alpha-weighted column normalization on the second sensor, a
//! row normalization on the first, and a reduced m x m eigenproblem whose
//! eigenvectors lift exactly to the full n x n product.
//!
//! Embeddings drop the trivial stationary pair (eigenvalue 1, constant
//! vector) and scale the next q eigenvectors by their eigenvalue to the
//! diffusion-time power.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::kernels::{build_affinity, KernelConfig};
use crate::landmarks::LandmarkSet;
use crate::manifolds::PairedDataset;
use crate::spectral::{decompose, decompose_lifted, SpectralOptions, SpectralResult};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartSensor {
    Sensor1,
    Sensor2,
}

impl std::fmt::Display for StartSensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            StartSensor::Sensor1 => write!(f, "sensor1"),
            StartSensor::Sensor2 => write!(f, "sensor2"),
        }
    }
}

/// Plain alternating-diffusion model on the full dataset.
#[derive(Debug, Clone)]
pub struct AdModel {
    /// Row-stochastic diffusion on the first sensor's graph, n x n.
    pub m1: Array2<f64>,
    /// Row-stochastic diffusion on the second sensor's graph, n x n.
    pub m2: Array2<f64>,
    /// The alternating-diffusion matrix. With `start = Sensor2` this is
    /// `m1 * m2` (the second sensor acts first on a function).
    pub matrix: Array2<f64>,
    pub eps1: f64,
    pub eps2: f64,
    pub start: StartSensor,
}

impl AdModel {
    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Landmark alternating-diffusion model.
///
/// Construction order matters and follows the fixed sequence: second-sensor
/// degrees from the affinity Gram vector, alpha column scaling, then
/// first-sensor degrees against the scaled matrix, then row scaling.
#[derive(Debug, Clone)]
pub struct LadModel {
    /// First sensor vs landmarks affinity, n x m.
    pub w1bar: Array2<f64>,
    /// Second sensor vs landmarks affinity, n x m.
    pub w2bar: Array2<f64>,
    /// Landmark degrees of the second sensor, m.
    pub d2bar: Array1<f64>,
    /// Second-sensor matrix after the alpha column scaling, n x m.
    pub m2bar: Array2<f64>,
    /// Sample degrees of the first sensor against `m2bar`, n.
    pub d1bar: Array1<f64>,
    /// Row-normalized first-sensor matrix, n x m.
    pub m1bar: Array2<f64>,
    pub alpha: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub start: StartSensor,
}

impl LadModel {
    pub fn len(&self) -> usize {
        self.m1bar.nrows()
    }

    pub fn landmark_count(&self) -> usize {
        self.m1bar.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reduced m x m matrix whose spectrum equals the nonzero spectrum of the
    /// full product.
    pub fn core(&self) -> Array2<f64> {
        self.m2bar.t().dot(&self.m1bar)
    }

    /// Full n x n landmark diffusion matrix. Materializing it costs O(n^2 m)
    /// and defeats the point of landmarks; intended for diagnostics and small
    /// cross-checks only.
    pub fn full_matrix(&self) -> Array2<f64> {
        self.m1bar.dot(&self.m2bar.t())
    }

    /// Applies the full matrix to a vector without materializing it.
    pub fn apply(&self, x: &Array1<f64>) -> Array1<f64> {
        self.m1bar.dot(&self.m2bar.t().dot(x))
    }
}

/// Diffusion-map style embedding: selected eigenvectors scaled by powered
/// eigenvalues.
#[derive(Debug, Clone)]
pub struct Embedding {
    /// n x q coordinates; q can fall below the request when the spectrum
    /// rank-truncates.
    pub coords: Array2<f64>,
    pub diffusion_time: f64,
    /// Real parts of the eigenvalues behind each column.
    pub eigenvalues_used: Vec<f64>,
    pub start_sensor: StartSensor,
    pub max_imag_ratio: f64,
    pub imag_warning: bool,
    pub spectral_gap: f64,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }
}

/// `lambda^t` preserving the sign of negative real eigenvalues, so embeddings
/// vary continuously in t for the oscillatory part of the spectrum.
fn time_power(lambda: f64, t: f64) -> f64 {
    if lambda >= 0.0 {
        lambda.powf(t)
    } else {
        -((-lambda).powf(t))
    }
}

fn validate_affinity(w: ArrayView2<'_, f64>, what: &str) -> Result<()> {
    if w.nrows() == 0 || w.ncols() == 0 {
        return Err(Error::invalid(format!("{what} affinity matrix is empty")));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::invalid(format!(
            "{what} affinity entries must be finite and nonnegative"
        )));
    }
    Ok(())
}

fn row_normalize(w: ArrayView2<'_, f64>, what: &str) -> Result<(Array2<f64>, Array1<f64>)> {
    let degrees = w.sum_axis(Axis(1));
    if degrees.iter().any(|d| *d <= 0.0) {
        return Err(Error::invalid(format!("{what} has a zero-degree row")));
    }
    let mut m = w.to_owned();
    for (mut row, d) in m.axis_iter_mut(Axis(0)).zip(degrees.iter()) {
        row.mapv_inplace(|v| v / d);
    }
    Ok((m, degrees))
}

/// Builds plain alternating diffusion from precomputed affinities. The
/// diffusion starts on the sensor whose affinity is `w_start`.
pub fn build_ad_from_affinities(
    w1: ArrayView2<'_, f64>,
    w2: ArrayView2<'_, f64>,
    eps1: f64,
    eps2: f64,
    start: StartSensor,
) -> Result<AdModel> {
    validate_affinity(w1, "sensor 1")?;
    validate_affinity(w2, "sensor 2")?;
    if w1.nrows() != w1.ncols() || w2.nrows() != w2.ncols() || w1.nrows() != w2.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "alternating diffusion needs two square matrices of equal size, got {}x{} and {}x{}",
            w1.nrows(),
            w1.ncols(),
            w2.nrows(),
            w2.ncols()
        )));
    }
    let (m1, _) = row_normalize(w1, "sensor 1 affinity")?;
    let (m2, _) = row_normalize(w2, "sensor 2 affinity")?;
    let matrix = match start {
        StartSensor::Sensor2 => m1.dot(&m2),
        StartSensor::Sensor1 => m2.dot(&m1),
    };
    Ok(AdModel {
        m1,
        m2,
        matrix,
        eps1,
        eps2,
        start,
    })
}

/// Alternating diffusion started on the second sensor (the default reading).
pub fn build_ad(dataset: &PairedDataset, cfg1: &KernelConfig, cfg2: &KernelConfig) -> Result<AdModel> {
    let w1 = build_affinity(dataset.sensor1.view(), dataset.sensor1.view(), cfg1)?;
    let w2 = build_affinity(dataset.sensor2.view(), dataset.sensor2.view(), cfg2)?;
    build_ad_from_affinities(
        w1.values().view(),
        w2.values().view(),
        cfg1.epsilon,
        cfg2.epsilon,
        StartSensor::Sensor2,
    )
}

/// Alternating diffusion started on the first sensor: same kernels, product
/// taken in the other order.
pub fn build_ad_from_sensor1(
    dataset: &PairedDataset,
    cfg1: &KernelConfig,
    cfg2: &KernelConfig,
) -> Result<AdModel> {
    let w1 = build_affinity(dataset.sensor1.view(), dataset.sensor1.view(), cfg1)?;
    let w2 = build_affinity(dataset.sensor2.view(), dataset.sensor2.view(), cfg2)?;
    build_ad_from_affinities(
        w1.values().view(),
        w2.values().view(),
        cfg1.epsilon,
        cfg2.epsilon,
        StartSensor::Sensor1,
    )
}

/// Builds the landmark model from precomputed n x m affinities.
pub fn build_lad_from_affinities(
    w1bar: Array2<f64>,
    w2bar: Array2<f64>,
    alpha: f64,
    eps1: f64,
    eps2: f64,
    start: StartSensor,
) -> Result<LadModel> {
    validate_affinity(w1bar.view(), "sensor 1 landmark")?;
    validate_affinity(w2bar.view(), "sensor 2 landmark")?;
    if w1bar.dim() != w2bar.dim() {
        return Err(Error::DimensionMismatch(format!(
            "landmark affinities disagree: {:?} vs {:?}",
            w1bar.dim(),
            w2bar.dim()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha = {alpha} outside [0, 1]")));
    }

    // Landmark degrees of sensor 2: diag(W2^T W2 1) without the m x m Gram.
    let row_sums = w2bar.sum_axis(Axis(1));
    let d2bar = w2bar.t().dot(&row_sums);
    if d2bar.iter().any(|d| *d <= 0.0) {
        return Err(Error::invalid(
            "a landmark has zero affinity mass on sensor 2",
        ));
    }

    // Column scaling by d2^{-alpha}.
    let mut m2bar = w2bar.clone();
    let scales: Vec<f64> = d2bar.iter().map(|d| d.powf(-alpha)).collect();
    for (mut col, s) in m2bar.axis_iter_mut(Axis(1)).zip(scales.iter()) {
        col.mapv_inplace(|v| v * s);
    }

    // First-sensor degrees against the scaled second-sensor matrix.
    let col_sums = m2bar.sum_axis(Axis(0));
    let d1bar = w1bar.dot(&col_sums);
    if d1bar.iter().any(|d| *d <= 0.0) {
        return Err(Error::invalid("a sample has zero degree on sensor 1"));
    }

    let mut m1bar = w1bar.clone();
    for (mut row, d) in m1bar.axis_iter_mut(Axis(0)).zip(d1bar.iter()) {
        row.mapv_inplace(|v| v / d);
    }

    Ok(LadModel {
        w1bar,
        w2bar,
        d2bar,
        m2bar,
        d1bar,
        m1bar,
        alpha,
        eps1,
        eps2,
        start,
    })
}

/// Landmark alternating diffusion started on the second sensor.
pub fn build_lad(
    dataset: &PairedDataset,
    landmarks: &LandmarkSet,
    cfg1: &KernelConfig,
    cfg2: &KernelConfig,
    alpha: f64,
) -> Result<LadModel> {
    if landmarks.len() > dataset.len() {
        return Err(Error::invalid(format!(
            "more landmarks ({}) than samples ({})",
            landmarks.len(),
            dataset.len()
        )));
    }
    let w1 = build_affinity(dataset.sensor1.view(), landmarks.points1.view(), cfg1)?;
    let w2 = build_affinity(dataset.sensor2.view(), landmarks.points2.view(), cfg2)?;
    build_lad_from_affinities(
        w1.into_values(),
        w2.into_values(),
        alpha,
        cfg1.epsilon,
        cfg2.epsilon,
        StartSensor::Sensor2,
    )
}

/// Landmark alternating diffusion started on the first sensor: sensor roles
/// swapped throughout the construction.
pub fn build_lad_from_sensor1(
    dataset: &PairedDataset,
    landmarks: &LandmarkSet,
    cfg1: &KernelConfig,
    cfg2: &KernelConfig,
    alpha: f64,
) -> Result<LadModel> {
    if landmarks.len() > dataset.len() {
        return Err(Error::invalid(format!(
            "more landmarks ({}) than samples ({})",
            landmarks.len(),
            dataset.len()
        )));
    }
    let w1 = build_affinity(dataset.sensor1.view(), landmarks.points1.view(), cfg1)?;
    let w2 = build_affinity(dataset.sensor2.view(), landmarks.points2.view(), cfg2)?;
    build_lad_from_affinities(
        w2.into_values(),
        w1.into_values(),
        alpha,
        cfg2.epsilon,
        cfg1.epsilon,
        StartSensor::Sensor1,
    )
}

/// Spectrum of the landmark model: reduced EVD plus exact lifting, with
/// residuals checked against the full product's action.
pub fn lad_spectrum(model: &LadModel, k: usize, opts: &SpectralOptions) -> Result<SpectralResult> {
    if k == 0 || k > model.landmark_count() {
        return Err(Error::invalid(format!(
            "retained count {k} must be in 1..={}",
            model.landmark_count()
        )));
    }
    let core = model.core();
    decompose_lifted(core.view(), model.m1bar.view(), k, opts, |x| {
        model.m1bar.dot(&model.m2bar.t().dot(&x))
    })
}

/// Spectrum of the plain model.
pub fn ad_spectrum(model: &AdModel, k: usize, opts: &SpectralOptions) -> Result<SpectralResult> {
    if k == 0 || k > model.len() {
        return Err(Error::invalid(format!(
            "retained count {k} must be in 1..={}",
            model.len()
        )));
    }
    decompose(model.matrix.view(), k, opts)
}

/// Embedding coordinates from an already-computed spectrum: q nontrivial
/// eigenvectors scaled by `lambda^t`. Lets callers reuse one decomposition
/// for several diffusion times or embedding widths.
pub fn embedding_from_spectrum(
    spectrum: &SpectralResult,
    q: usize,
    t: f64,
    start: StartSensor,
) -> Result<Embedding> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(format!("diffusion time {t} must be positive")));
    }
    let available = spectrum.retained();
    if available < 2 {
        return Err(Error::invalid(
            "spectrum has no nontrivial eigenpair to embed with",
        ));
    }
    let q_actual = q.min(available - 1);
    let n = spectrum.vectors.nrows();
    let mut coords = Array2::zeros((n, q_actual));
    let mut used = Vec::with_capacity(q_actual);
    for j in 0..q_actual {
        let lambda = spectrum.eigenvalues[j + 1].re;
        let factor = time_power(lambda, t);
        for i in 0..n {
            coords[[i, j]] = spectrum.vectors[[i, j + 1]] * factor;
        }
        used.push(lambda);
    }
    Ok(Embedding {
        coords,
        diffusion_time: t,
        eigenvalues_used: used,
        start_sensor: start,
        max_imag_ratio: spectrum.max_imag_ratio,
        imag_warning: spectrum.imag_warning,
        spectral_gap: spectrum.spectral_gap,
    })
}

/// Embedding from the plain model: q nontrivial eigenvectors scaled by
/// `lambda^t`, the trivial stationary pair dropped.
pub fn ad_embed(model: &AdModel, q: usize, t: f64, opts: &SpectralOptions) -> Result<Embedding> {
    if q == 0 || q + 1 > model.len() {
        return Err(Error::invalid(format!(
            "embedding dimension {q} must be in 1..={}",
            model.len().saturating_sub(1)
        )));
    }
    let spectrum = ad_spectrum(model, q + 1, opts)?;
    embedding_from_spectrum(&spectrum, q, t, model.start)
}

/// Embedding from the landmark model.
pub fn lad_embed(model: &LadModel, q: usize, t: f64, opts: &SpectralOptions) -> Result<Embedding> {
    if q == 0 || q + 1 > model.landmark_count() {
        return Err(Error::invalid(format!(
            "embedding dimension {q} must be in 1..={}",
            model.landmark_count().saturating_sub(1)
        )));
    }
    let spectrum = lad_spectrum(model, q + 1, opts)?;
    embedding_from_spectrum(&spectrum, q, t, model.start)
}

/// Single-sensor diffusion map baseline: row-stochastic kernel on one point
/// set, trivial pair dropped. `sensor` records which sensor the points came
/// from.
pub fn diffusion_map(
    points: ArrayView2<'_, f64>,
    cfg: &KernelConfig,
    q: usize,
    t: f64,
    sensor: StartSensor,
    opts: &SpectralOptions,
) -> Result<Embedding> {
    let w = build_affinity(points, points, cfg)?;
    let (m, _) = row_normalize(w.values().view(), "affinity")?;
    if q == 0 || q + 1 > m.nrows() {
        return Err(Error::invalid(format!(
            "embedding dimension {q} must be in 1..={}",
            m.nrows().saturating_sub(1)
        )));
    }
    let spectrum = decompose(m.view(), q + 1, opts)?;
    embedding_from_spectrum(&spectrum, q, t, sensor)
}
