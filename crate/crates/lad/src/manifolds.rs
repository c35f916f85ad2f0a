//! Synthetic paired-sensor datasets.
//!
//! A latent sample on a low-dimensional manifold is observed through two
//! embeddings (one per sensor). Generators here produce the latent draws and
//! both views; the latent parameters are retained in the dataset because the
//! quadrature oracles and some diagnostics need them, but the fusion
//! algorithms never read them.
//!
//! "Uniform" sampling always means uniform with respect to the second sensor's
//! surface measure: arclength-uniform for curves, area-uniform (via rejection
//! or exact inversion) for surfaces. Weighted sampling draws latent parameters
//! from an unnormalized weight function times the surface element, through an
//! inverse-CDF lookup on a dense grid.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifoldKind {
    Circle,
    Ellipse,
    Trefoil,
    Torus,
    DeformedTorus,
    Sphere,
}

/// Parametrized manifold embedding.
///
/// Supported shapes and their parameters:
/// - circle of radius `scale`, latent `theta in [-pi, pi)`;
/// - axis-aligned ellipse with semi-axes `a`, `b`;
/// - trefoil knot `(sin t + 2 sin 2t, cos t - 2 cos 2t, -sin 3t)`;
/// - torus with major radius `major`, minor radius `minor`, latent `(u, v)`;
/// - deformed torus whose tube radius is modulated by `1 + 0.5 cos 4u`;
/// - sphere of radius `scale`, latent polar/azimuth `(theta, phi)`.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ManifoldGenerator {
    pub kind: ManifoldKind,
    /// Radius for circle and sphere; unused otherwise.
    pub scale: f64,
    /// Ellipse semi-axes; unused otherwise.
    pub a: f64,
    pub b: f64,
    /// Torus radii; unused otherwise.
    pub major: f64,
    pub minor: f64,
}

impl ManifoldGenerator {
    pub fn circle() -> Self {
        Self::scaled_circle(1.0)
    }

    pub fn scaled_circle(scale: f64) -> Self {
        ManifoldGenerator {
            kind: ManifoldKind::Circle,
            scale,
            a: 0.0,
            b: 0.0,
            major: 0.0,
            minor: 0.0,
        }
    }

    /// Ellipse with semi-axes 2 and 1.
    pub fn ellipse() -> Self {
        Self::ellipse_axes(2.0, 1.0)
    }

    pub fn ellipse_axes(a: f64, b: f64) -> Self {
        ManifoldGenerator {
            kind: ManifoldKind::Ellipse,
            scale: 1.0,
            a,
            b,
            major: 0.0,
            minor: 0.0,
        }
    }

    pub fn trefoil() -> Self {
        ManifoldGenerator {
            kind: ManifoldKind::Trefoil,
            scale: 1.0,
            a: 0.0,
            b: 0.0,
            major: 0.0,
            minor: 0.0,
        }
    }

    pub fn torus(major: f64, minor: f64) -> Self {
        ManifoldGenerator {
            kind: ManifoldKind::Torus,
            scale: 1.0,
            a: 0.0,
            b: 0.0,
            major,
            minor,
        }
    }

    pub fn deformed_torus(major: f64, minor: f64) -> Self {
        ManifoldGenerator {
            kind: ManifoldKind::DeformedTorus,
            scale: 1.0,
            a: 0.0,
            b: 0.0,
            major,
            minor,
        }
    }

    pub fn sphere() -> Self {
        Self::scaled_sphere(1.0)
    }

    pub fn scaled_sphere(scale: f64) -> Self {
        ManifoldGenerator {
            kind: ManifoldKind::Sphere,
            scale,
            a: 0.0,
            b: 0.0,
            major: 0.0,
            minor: 0.0,
        }
    }

    /// Checks parameter ranges. Called by the samplers; public so explicit
    /// configurations can be validated early.
    pub fn validate(&self) -> Result<()> {
        let ok = match self.kind {
            ManifoldKind::Circle | ManifoldKind::Sphere => self.scale > 0.0 && self.scale.is_finite(),
            ManifoldKind::Ellipse => self.a > 0.0 && self.b > 0.0,
            ManifoldKind::Trefoil => true,
            ManifoldKind::Torus | ManifoldKind::DeformedTorus => {
                self.major > self.minor && self.minor > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid manifold parameters: {self:?}")))
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ManifoldKind::Circle => "circle",
            ManifoldKind::Ellipse => "ellipse",
            ManifoldKind::Trefoil => "trefoil",
            ManifoldKind::Torus => "torus",
            ManifoldKind::DeformedTorus => "deformed_torus",
            ManifoldKind::Sphere => {
                if self.scale == 1.0 {
                    "sphere"
                } else {
                    "scaled_sphere"
                }
            }
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle | ManifoldKind::Ellipse | ManifoldKind::Trefoil => 1,
            ManifoldKind::Torus | ManifoldKind::DeformedTorus | ManifoldKind::Sphere => 2,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle | ManifoldKind::Ellipse => 2,
            _ => 3,
        }
    }

    /// Latent parameter ranges, one `(low, high)` per intrinsic dimension.
    pub fn domain(&self) -> Vec<(f64, f64)> {
        match self.kind {
            ManifoldKind::Circle | ManifoldKind::Ellipse | ManifoldKind::Trefoil => {
                vec![(-PI, PI)]
            }
            ManifoldKind::Torus | ManifoldKind::DeformedTorus => vec![(-PI, PI), (-PI, PI)],
            ManifoldKind::Sphere => vec![(0.0, PI), (-PI, PI)],
        }
    }

    /// Embeds one latent point into the sensor's ambient space.
    pub fn embed_into(&self, latent: &[f64], out: &mut [f64]) {
        match self.kind {
            ManifoldKind::Circle => {
                let t = latent[0];
                out[0] = self.scale * t.cos();
                out[1] = self.scale * t.sin();
            }
            ManifoldKind::Ellipse => {
                let t = latent[0];
                out[0] = self.a * t.cos();
                out[1] = self.b * t.sin();
            }
            ManifoldKind::Trefoil => {
                let t = latent[0];
                out[0] = t.sin() + 2.0 * (2.0 * t).sin();
                out[1] = t.cos() - 2.0 * (2.0 * t).cos();
                out[2] = -(3.0 * t).sin();
            }
            ManifoldKind::Torus => {
                let (u, v) = (latent[0], latent[1]);
                let ring = self.major + self.minor * v.cos();
                out[0] = ring * u.cos();
                out[1] = ring * u.sin();
                out[2] = self.minor * v.sin();
            }
            ManifoldKind::DeformedTorus => {
                let (u, v) = (latent[0], latent[1]);
                let tube = self.minor * (1.0 + 0.5 * (4.0 * u).cos());
                let ring = self.major + tube * v.cos();
                out[0] = ring * u.cos();
                out[1] = ring * u.sin();
                out[2] = tube * v.sin();
            }
            ManifoldKind::Sphere => {
                let (theta, phi) = (latent[0], latent[1]);
                let st = theta.sin();
                out[0] = self.scale * st * phi.cos();
                out[1] = self.scale * st * phi.sin();
                out[2] = self.scale * theta.cos();
            }
        }
    }

    pub fn embed(&self, latent: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ambient_dim()];
        self.embed_into(latent, &mut out);
        out
    }

    /// Embeds a matrix of latent rows.
    pub fn embed_latents(&self, latents: ArrayView2<'_, f64>) -> Array2<f64> {
        let n = latents.nrows();
        let mut out = Array2::zeros((n, self.ambient_dim()));
        let mut buf = vec![0.0; latents.ncols()];
        for i in 0..n {
            for (b, v) in buf.iter_mut().zip(latents.row(i)) {
                *b = *v;
            }
            let mut row = out.row_mut(i);
            self.embed_into(&buf, row.as_slice_mut().expect("contiguous row"));
        }
        out
    }

    /// Surface (or arclength) element at a latent point, the Jacobian factor
    /// that converts parameter measure to manifold measure.
    pub fn volume_element(&self, latent: &[f64]) -> f64 {
        match self.kind {
            ManifoldKind::Circle => self.scale,
            ManifoldKind::Ellipse => {
                let t = latent[0];
                let (s, c) = t.sin_cos();
                (self.a * self.a * s * s + self.b * self.b * c * c).sqrt()
            }
            ManifoldKind::Trefoil => {
                let t = latent[0];
                let dx = t.cos() + 4.0 * (2.0 * t).cos();
                let dy = -t.sin() + 4.0 * (2.0 * t).sin();
                let dz = -3.0 * (3.0 * t).cos();
                (dx * dx + dy * dy + dz * dz).sqrt()
            }
            ManifoldKind::Torus => {
                let v = latent[1];
                self.minor * (self.major + self.minor * v.cos())
            }
            ManifoldKind::Sphere => {
                let theta = latent[0];
                self.scale * self.scale * theta.sin()
            }
            ManifoldKind::DeformedTorus => self.numeric_area_element(latent),
        }
    }

    /// Whether chordal distances between points depend only on the latent
    /// difference on a uniform 1-D grid. Enables circulant fast paths in the
    /// quadrature oracle.
    pub fn rotation_invariant_curve(&self) -> bool {
        matches!(self.kind, ManifoldKind::Circle)
    }

    fn numeric_area_element(&self, latent: &[f64]) -> f64 {
        // sqrt(det(J^T J)) with central-difference partials.
        let h = 1e-5;
        let dim = self.ambient_dim();
        let mut cols = [[0.0; 3]; 2];
        for (k, col) in cols.iter_mut().enumerate() {
            let mut lo = [latent[0], latent[1]];
            let mut hi = lo;
            lo[k] -= h;
            hi[k] += h;
            let plo = self.embed(&lo);
            let phi = self.embed(&hi);
            for d in 0..dim {
                col[d] = (phi[d] - plo[d]) / (2.0 * h);
            }
        }
        let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let e = dot(&cols[0], &cols[0]);
        let f = dot(&cols[0], &cols[1]);
        let g = dot(&cols[1], &cols[1]);
        (e * g - f * f).max(0.0).sqrt()
    }
}

/// Nonnegative weight on a generator's latent domain, identified by name so
/// run manifests can record which density produced a sample.
#[derive(Clone)]
pub struct DensityFn {
    name: String,
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl DensityFn {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        DensityFn {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, latent: &[f64]) -> f64 {
        (self.f)(latent)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl std::fmt::Debug for DensityFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "DensityFn({})", self.name)
    }
}

/// Sampling density for latent parameters.
#[derive(Debug, Clone)]
pub enum Density {
    /// Uniform with respect to the manifold's surface measure.
    Uniform,
    /// Unnormalized weight times the surface element; negative values are
    /// clamped to zero by the sampler.
    Weighted(DensityFn),
}

impl Density {
    pub fn name(&self) -> &str {
        match self {
            Density::Uniform => "uniform",
            Density::Weighted(w) => w.name(),
        }
    }
}

/// Floor applied to the reciprocal-cube weight's base density so the cube does
/// not blow up where that density is clamped to zero.
const RECIPROCAL_CUBE_FLOOR: f64 = 0.05;

fn arctan_weight(theta: f64) -> f64 {
    (0.5 * theta.tan()).atan() / PI
}

fn von_mises(theta: f64, center: f64, kappa: f64) -> f64 {
    (kappa * (theta - center).cos()).exp()
}

/// Built-in latent densities for curves, by name.
///
/// `cosine` and `arctan` follow printed formulas (the arctan shape is negative
/// on part of the circle and relies on the sampler's clamping);
/// `reciprocal_cube` is `1 / max(arctan, 0.05)^3`, the landmark design that
/// inverts the arctan data density. `case1` .. `case4` are four in-house bump
/// mixtures used to exercise landmark-density sensitivity; they are synthetic
/// reconstructions, not published formulas.
pub fn builtin_density(name: &str) -> Result<Density> {
    let d = match name {
        "uniform" => Density::Uniform,
        "cosine" => Density::Weighted(DensityFn::new("cosine", |p: &[f64]| {
            (58.0 / 50.0) * (0.48 * p[0].cos() + 0.52)
        })),
        "arctan" => Density::Weighted(DensityFn::new("arctan", |p: &[f64]| arctan_weight(p[0]))),
        "reciprocal_cube" => Density::Weighted(DensityFn::new("reciprocal_cube", |p: &[f64]| {
            let base = arctan_weight(p[0]).max(RECIPROCAL_CUBE_FLOOR);
            1.0 / (base * base * base)
        })),
        "case1" => Density::Weighted(DensityFn::new("case1", |p: &[f64]| von_mises(p[0], 0.0, 2.0))),
        "case2" => Density::Weighted(DensityFn::new("case2", |p: &[f64]| {
            0.3 + von_mises(p[0], 0.5 * PI, 4.0)
        })),
        "case3" => Density::Weighted(DensityFn::new("case3", |p: &[f64]| {
            0.6 * von_mises(p[0], -0.5 * PI, 6.0) + von_mises(p[0], PI, 2.0)
        })),
        "case4" => Density::Weighted(DensityFn::new("case4", |p: &[f64]| {
            0.25 + von_mises(p[0], 0.25 * PI, 1.5) + 0.5 * von_mises(p[0], -0.75 * PI, 8.0)
        })),
        other => {
            return Err(Error::invalid(format!("unknown density name: {other}")));
        }
    };
    Ok(d)
}

/// Inverse-CDF sampler for latent parameters on a dense tensor grid.
///
/// Cell masses are `max(weight, 0) * volume_element * cell_area` evaluated at
/// cell midpoints; draws invert the piecewise-linear CDF, so a fixed seed gives
/// identical output across platforms and the draws are continuous within
/// cells. One uniform variate is consumed per draw per dimension.
#[derive(Debug, Clone)]
pub struct GridSampler {
    lows: Vec<f64>,
    steps: Vec<f64>,
    cells_per_dim: Vec<usize>,
    cdf: Vec<f64>,
    clamped_mass_fraction: f64,
}

/// Default total cell budget for [`GridSampler`].
pub const GRID_SAMPLER_CELLS: usize = 1 << 16;

impl GridSampler {
    /// Builds the grid over `gen`'s domain. `weight = None` means the surface
    /// element alone, which makes draws uniform on the manifold.
    pub fn new(gen: &ManifoldGenerator, weight: Option<&DensityFn>, total_cells: usize) -> Result<Self> {
        gen.validate()?;
        if total_cells < 16 {
            return Err(Error::invalid("grid sampler needs at least 16 cells"));
        }
        let domain = gen.domain();
        let dim = domain.len();
        let per_dim = match dim {
            1 => total_cells,
            2 => (total_cells as f64).sqrt().floor() as usize,
            _ => return Err(Error::invalid("grid sampler supports 1-D and 2-D domains")),
        };
        let lows: Vec<f64> = domain.iter().map(|d| d.0).collect();
        let steps: Vec<f64> = domain.iter().map(|d| (d.1 - d.0) / per_dim as f64).collect();
        let cells_per_dim = vec![per_dim; dim];
        let cell_area: f64 = steps.iter().product();

        let total: usize = cells_per_dim.iter().product();
        let mut masses = vec![0.0f64; total];
        let mut kept = 0.0;
        let mut clamped = 0.0;
        let mut latent = vec![0.0f64; dim];
        for (c, mass) in masses.iter_mut().enumerate() {
            let mut rem = c;
            for k in (0..dim).rev() {
                let i = rem % per_dim;
                rem /= per_dim;
                latent[k] = lows[k] + (i as f64 + 0.5) * steps[k];
            }
            let w = match weight {
                Some(w) => w.eval(&latent),
                None => 1.0,
            };
            if !w.is_finite() {
                return Err(Error::invalid(format!(
                    "weight function returned {w} at {latent:?}"
                )));
            }
            let vol = gen.volume_element(&latent);
            if w < 0.0 {
                clamped += -w * vol * cell_area;
            } else {
                *mass = w * vol * cell_area;
                kept += *mass;
            }
        }
        if kept <= 0.0 {
            return Err(Error::invalid(
                "weight function is nonpositive over the whole domain",
            ));
        }
        let mut cdf = masses;
        let mut acc = 0.0;
        for m in cdf.iter_mut() {
            acc += *m / kept;
            *m = acc;
        }
        // Guard against rounding: the last entry must close the unit interval.
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Ok(GridSampler {
            lows,
            steps,
            cells_per_dim,
            cdf,
            clamped_mass_fraction: clamped / (clamped + kept),
        })
    }

    /// Fraction of raw mass removed by clamping negative weights to zero.
    pub fn clamped_mass_fraction(&self) -> f64 {
        self.clamped_mass_fraction
    }

    pub fn sample_latents(&self, count: usize, rng: &mut impl Rng) -> Array2<f64> {
        let dim = self.lows.len();
        let per_dim = self.cells_per_dim[0];
        let mut out = Array2::zeros((count, dim));
        for s in 0..count {
            let u: f64 = rng.gen();
            let cell = self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1);
            let prev = if cell == 0 { 0.0 } else { self.cdf[cell - 1] };
            let mass = (self.cdf[cell] - prev).max(f64::MIN_POSITIVE);
            let frac = ((u - prev) / mass).clamp(0.0, 1.0);
            let mut rem = cell;
            let mut coords = vec![0usize; dim];
            for k in (0..dim).rev() {
                coords[k] = rem % per_dim;
                rem /= per_dim;
            }
            // The CDF remainder positions the last coordinate; any additional
            // dimensions take fresh uniforms.
            for k in 0..dim {
                let within = if k == dim - 1 { frac } else { rng.gen::<f64>() };
                out[[s, k]] = self.lows[k] + (coords[k] as f64 + within) * self.steps[k];
            }
        }
        out
    }
}

/// Draws `count` latent points uniformly on the manifold of `gen`.
pub fn sample_latents_uniform(
    gen: &ManifoldGenerator,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Array2<f64>> {
    gen.validate()?;
    match gen.kind {
        ManifoldKind::Circle | ManifoldKind::Ellipse | ManifoldKind::Trefoil => {
            let sampler = GridSampler::new(gen, None, GRID_SAMPLER_CELLS)?;
            Ok(sampler.sample_latents(count, rng))
        }
        ManifoldKind::Sphere => {
            let mut out = Array2::zeros((count, 2));
            for i in 0..count {
                let u: f64 = rng.gen();
                let theta = (1.0 - 2.0 * u).clamp(-1.0, 1.0).acos();
                let phi = -PI + 2.0 * PI * rng.gen::<f64>();
                out[[i, 0]] = theta;
                out[[i, 1]] = phi;
            }
            Ok(out)
        }
        ManifoldKind::Torus => {
            // Area element is minor*(major + minor*cos v); accept on its ratio
            // to the maximum so accepted draws are area-uniform.
            let mut out = Array2::zeros((count, 2));
            let mut filled = 0;
            while filled < count {
                let u = -PI + 2.0 * PI * rng.gen::<f64>();
                let v = -PI + 2.0 * PI * rng.gen::<f64>();
                let accept = (gen.major + gen.minor * v.cos()) / (gen.major + gen.minor);
                if rng.gen::<f64>() < accept {
                    out[[filled, 0]] = u;
                    out[[filled, 1]] = v;
                    filled += 1;
                }
            }
            Ok(out)
        }
        ManifoldKind::DeformedTorus => {
            // No closed-form bound; estimate one on a coarse grid with margin.
            let mut bound = 0.0f64;
            for iu in 0..64 {
                for iv in 0..64 {
                    let u = -PI + 2.0 * PI * (iu as f64 + 0.5) / 64.0;
                    let v = -PI + 2.0 * PI * (iv as f64 + 0.5) / 64.0;
                    bound = bound.max(gen.volume_element(&[u, v]));
                }
            }
            bound *= 1.1;
            let mut out = Array2::zeros((count, 2));
            let mut filled = 0;
            while filled < count {
                let u = -PI + 2.0 * PI * rng.gen::<f64>();
                let v = -PI + 2.0 * PI * rng.gen::<f64>();
                if rng.gen::<f64>() * bound < gen.volume_element(&[u, v]) {
                    out[[filled, 0]] = u;
                    out[[filled, 1]] = v;
                    filled += 1;
                }
            }
            Ok(out)
        }
    }
}

/// Paired observations of one latent sample set.
#[derive(Debug, Clone)]
pub struct PairedDataset {
    /// First sensor's view, n x p1.
    pub sensor1: Array2<f64>,
    /// Second sensor's view, n x p2.
    pub sensor2: Array2<f64>,
    /// Latent parameters, n x intrinsic_dim; empty (n x 0) when unknown.
    pub params: Array2<f64>,
    pub seed: u64,
}

impl PairedDataset {
    /// Wraps two aligned coordinate matrices without latent information.
    pub fn from_sensors(sensor1: Array2<f64>, sensor2: Array2<f64>) -> Result<Self> {
        if sensor1.nrows() != sensor2.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "sensor row counts differ: {} vs {}",
                sensor1.nrows(),
                sensor2.nrows()
            )));
        }
        if sensor1.nrows() < 2 {
            return Err(Error::invalid("a paired dataset needs at least two samples"));
        }
        if sensor1.iter().any(|v| !v.is_finite()) || sensor2.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sensor coordinates must be finite"));
        }
        let n = sensor1.nrows();
        Ok(PairedDataset {
            sensor1,
            sensor2,
            params: Array2::zeros((n, 0)),
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.sensor1.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same samples with the sensor roles exchanged.
    pub fn swapped(&self) -> PairedDataset {
        PairedDataset {
            sensor1: self.sensor2.clone(),
            sensor2: self.sensor1.clone(),
            params: self.params.clone(),
            seed: self.seed,
        }
    }

    /// Replaces row `i` with the views of a fixed latent point. Used by
    /// experiments that need a designated evaluation sample.
    pub fn set_row_from_latent(
        &mut self,
        i: usize,
        gen1: &ManifoldGenerator,
        gen2: &ManifoldGenerator,
        latent: &[f64],
    ) -> Result<()> {
        if i >= self.len() {
            return Err(Error::invalid(format!("row {i} out of range")));
        }
        if latent.len() != self.params.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "latent dimension {} does not match dataset {}",
                latent.len(),
                self.params.ncols()
            )));
        }
        let p1 = gen1.embed(latent);
        let p2 = gen2.embed(latent);
        for (k, v) in p1.iter().enumerate() {
            self.sensor1[[i, k]] = *v;
        }
        for (k, v) in p2.iter().enumerate() {
            self.sensor2[[i, k]] = *v;
        }
        for (k, v) in latent.iter().enumerate() {
            self.params[[i, k]] = *v;
        }
        Ok(())
    }
}

/// Samples `n` latent points per `density` on the second generator's manifold
/// and returns both sensor views.
///
/// The two generators must agree on latent dimension and domain; the shared
/// latent draw realizes the sensor-to-sensor diffeomorphism implicitly, with
/// no angle reconstruction involved.
pub fn sample_pair(
    gen1: &ManifoldGenerator,
    gen2: &ManifoldGenerator,
    n: usize,
    density: &Density,
    seed: u64,
) -> Result<PairedDataset> {
    gen1.validate()?;
    gen2.validate()?;
    if gen1.intrinsic_dim() != gen2.intrinsic_dim() {
        return Err(Error::invalid(format!(
            "generators have different latent dimensions: {} vs {}",
            gen1.intrinsic_dim(),
            gen2.intrinsic_dim()
        )));
    }
    if gen1.domain() != gen2.domain() {
        return Err(Error::invalid(
            "generators must share a latent parameter domain",
        ));
    }
    if n < 2 {
        return Err(Error::invalid("a paired dataset needs at least two samples"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let latents = match density {
        Density::Uniform => sample_latents_uniform(gen2, n, &mut rng)?,
        Density::Weighted(w) => {
            GridSampler::new(gen2, Some(w), GRID_SAMPLER_CELLS)?.sample_latents(n, &mut rng)
        }
    };
    let sensor1 = gen1.embed_latents(latents.view());
    let sensor2 = gen2.embed_latents(latents.view());
    Ok(PairedDataset {
        sensor1,
        sensor2,
        params: latents,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    #[test]
    fn embeddings_match_closed_forms() {
        close(ManifoldGenerator::circle().embed(&[0.0])[0], 1.0, 0.0);
        close(ManifoldGenerator::circle().embed(&[0.0])[1], 0.0, 0.0);
        let e = ManifoldGenerator::ellipse().embed(&[0.0]);
        assert_eq!(e, vec![2.0, 0.0]);
        let t = ManifoldGenerator::trefoil().embed(&[0.0]);
        assert_eq!(t, vec![0.0, -1.0, 0.0]);
        let torus = ManifoldGenerator::torus(2.5, 1.0).embed(&[0.0, 0.0]);
        assert_eq!(torus, vec![3.5, 0.0, 0.0]);
        let def = ManifoldGenerator::deformed_torus(2.5, 1.0).embed(&[0.0, 0.0]);
        assert_eq!(def, vec![4.0, 0.0, 0.0]);
        let s = ManifoldGenerator::scaled_sphere(0.8).embed(&[0.5 * PI, 0.0]);
        close(s[0], 0.8, 1e-15);
        close(s[1], 0.0, 1e-15);
        close(s[2], 0.0, 1e-16);
    }

    #[test]
    fn circle_ellipse_share_latent_exactly() {
        let c = ManifoldGenerator::circle();
        let e = ManifoldGenerator::ellipse();
        let ds = sample_pair(&e, &c, 200, &Density::Uniform, 7).unwrap();
        // Reconstruct the angle from the circle view, map through the ellipse.
        for i in 0..ds.len() {
            let theta = ds.sensor2[[i, 1]].atan2(ds.sensor2[[i, 0]]);
            let mapped = e.embed(&[theta]);
            close(mapped[0], ds.sensor1[[i, 0]], 1e-12);
            close(mapped[1], ds.sensor1[[i, 1]], 1e-12);
        }
    }

    #[test]
    fn torus_samples_satisfy_implicit_equation() {
        let g = ManifoldGenerator::torus(2.5, 1.0);
        let ds = sample_pair(&g, &g, 500, &Density::Uniform, 3).unwrap();
        for i in 0..ds.len() {
            let (x, y, z) = (ds.sensor2[[i, 0]], ds.sensor2[[i, 1]], ds.sensor2[[i, 2]]);
            let radial = (x * x + y * y).sqrt() - 2.5;
            close(radial * radial + z * z, 1.0, 1e-12);
        }
    }

    #[test]
    fn sphere_samples_have_fixed_norm() {
        let g = ManifoldGenerator::scaled_sphere(0.8);
        let ds = sample_pair(&g, &g, 400, &Density::Uniform, 5).unwrap();
        for i in 0..ds.len() {
            let norm = ds.sensor2.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            close(norm, 0.8, 1e-12);
        }
    }

    #[test]
    fn torus_uniform_sampling_prefers_outer_tube() {
        // Marginal of v is proportional to major + minor*cos v, so the mean of
        // cos v is minor/(2*major) = 0.2.
        let g = ManifoldGenerator::torus(2.5, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let latents = sample_latents_uniform(&g, 20000, &mut rng).unwrap();
        let mean_cos_v: f64 =
            latents.column(1).iter().map(|v| v.cos()).sum::<f64>() / latents.nrows() as f64;
        close(mean_cos_v, 0.2, 0.02);
    }

    #[test]
    fn sphere_uniform_sampling_moments() {
        let g = ManifoldGenerator::sphere();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let latents = sample_latents_uniform(&g, 20000, &mut rng).unwrap();
        let mean_cos: f64 =
            latents.column(0).iter().map(|t| t.cos()).sum::<f64>() / latents.nrows() as f64;
        let mean_cos2: f64 =
            latents.column(0).iter().map(|t| t.cos().powi(2)).sum::<f64>() / latents.nrows() as f64;
        close(mean_cos, 0.0, 0.02);
        close(mean_cos2, 1.0 / 3.0, 0.02);
    }

    #[test]
    fn builtin_density_values() {
        let d = builtin_density("cosine").unwrap();
        if let Density::Weighted(w) = d {
            close(w.eval(&[0.0]), 1.16, 1e-12);
            close(w.eval(&[PI]), 0.0464, 1e-12);
        } else {
            panic!("cosine should be weighted");
        }
        assert!(matches!(builtin_density("uniform").unwrap(), Density::Uniform));
        assert!(builtin_density("no_such_density").is_err());
        for name in ["arctan", "reciprocal_cube", "case1", "case2", "case3", "case4"] {
            assert!(builtin_density(name).is_ok(), "{name}");
        }
    }

    #[test]
    fn grid_sampler_reports_clamped_mass() {
        // arctan weight is negative on half the circle; roughly half the raw
        // mass is clamped away.
        let g = ManifoldGenerator::circle();
        let w = match builtin_density("arctan").unwrap() {
            Density::Weighted(w) => w,
            _ => unreachable!(),
        };
        let sampler = GridSampler::new(&g, Some(&w), 1 << 12).unwrap();
        let frac = sampler.clamped_mass_fraction();
        assert!(frac > 0.4 && frac < 0.6, "clamped fraction {frac}");
        // All draws land where the weight is positive.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let latents = sampler.sample_latents(2000, &mut rng);
        for t in latents.column(0) {
            assert!(arctan_weight(*t) >= -1e-3, "draw at negative-weight angle {t}");
        }
    }

    #[test]
    fn grid_sampler_scale_invariant_weights() {
        // Positive rescaling of the weight cannot change the normalized cdf.
        // A power-of-two factor keeps every intermediate exact, so the draws
        // are bit-identical rather than merely close.
        let g = ManifoldGenerator::circle();
        let w1 = DensityFn::new("w", |p: &[f64]| 1.3 + p[0].cos());
        let w2 = DensityFn::new("w_scaled", |p: &[f64]| 8.0 * (1.3 + p[0].cos()));
        let s1 = GridSampler::new(&g, Some(&w1), 1 << 12).unwrap();
        let s2 = GridSampler::new(&g, Some(&w2), 1 << 12).unwrap();
        let a = s1.sample_latents(100, &mut ChaCha8Rng::seed_from_u64(9));
        let b = s2.sample_latents(100, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn sample_pair_rejects_mismatched_generators() {
        let c = ManifoldGenerator::circle();
        let t = ManifoldGenerator::torus(2.5, 1.0);
        assert!(sample_pair(&c, &t, 10, &Density::Uniform, 0).is_err());
        let s = ManifoldGenerator::sphere();
        assert!(sample_pair(&t, &s, 10, &Density::Uniform, 0).is_err());
    }

    #[test]
    fn sample_pair_is_seed_deterministic() {
        let g1 = ManifoldGenerator::deformed_torus(2.5, 1.0);
        let g2 = ManifoldGenerator::torus(2.5, 1.0);
        let a = sample_pair(&g1, &g2, 50, &Density::Uniform, 123).unwrap();
        let b = sample_pair(&g1, &g2, 50, &Density::Uniform, 123).unwrap();
        assert_eq!(a.sensor1, b.sensor1);
        assert_eq!(a.sensor2, b.sensor2);
        assert_eq!(a.params, b.params);
        let c = sample_pair(&g1, &g2, 50, &Density::Uniform, 124).unwrap();
        assert_ne!(a.params, c.params);
    }

    #[test]
    fn deformed_torus_area_element_matches_round_torus_limit() {
        // At u = pi/8 the modulation cos(4u) = 0 crosses zero and the local
        // tube radius equals minor; compare against the closed form there.
        let def = ManifoldGenerator::deformed_torus(2.5, 1.0);
        let v = 0.7;
        let numeric = def.volume_element(&[PI / 8.0, v]);
        // tube(u) = 1 + 0.5 cos 4u has derivative -2 sin 4u = -2 at u = pi/8,
        // which contributes to the u-tangent; compute the exact Gram there.
        let u = PI / 8.0;
        let tube = 1.0;
        let dtube = -2.0 * (4.0 * u).sin();
        let ring = 2.5 + tube * v.cos();
        // P_u = (-ring sin u + dtube cos v cos u, ring cos u + dtube cos v sin u, dtube sin v)
        let pu = [
            -ring * u.sin() + dtube * v.cos() * u.cos(),
            ring * u.cos() + dtube * v.cos() * u.sin(),
            dtube * v.sin(),
        ];
        let pv = [
            -tube * v.sin() * u.cos(),
            -tube * v.sin() * u.sin(),
            tube * v.cos(),
        ];
        let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let exact = (dot(&pu, &pu) * dot(&pv, &pv) - dot(&pu, &pv).powi(2)).sqrt();
        close(numeric, exact, 1e-6);
    }
}
