//! Quadrature oracle for the continuum limits of the discrete constructions.
//!
//! The discrete landmark diffusion is a Monte Carlo realization of an
//! integral operator: landmark degree
//! `d2(z) = integral integral K2(z,x) K2(x,z') dnu(x) dnu_Z(z')` and operator
//! `T f(x) = [integral K1(x,z) d2(z)^(-alpha) (integral K2(z,y) f(y) dnu(y))
//! dnu_Z(z)] / [same with f == 1]`, where `nu` is the data sampling measure
//! and `nu_Z` the landmark one. This module evaluates those integrals by
//! deterministic quadrature so tests can compare sampled operators against
//! their limits without reusing any of the sampled machinery.
//!
//! Quadrature choices: uniform periodic trapezoid grids for closed curves
//! (spectrally accurate for smooth periodic integrands) and a Gauss-Legendre
//! (polar) x uniform (azimuth) tensor grid for the sphere. Weights fold the
//! volume element and the density together and are normalized to sum to one,
//! making every measure a probability measure; negative density values are
//! clamped to zero exactly as the samplers do.
//!
//! Two structural shortcuts keep the cost workable on one core. On circles,
//! every node-to-node kernel value depends only on the index difference, so
//! the O(N^2) smoothing passes become circular convolutions of one
//! precomputed kernel row with no exponentials in the inner loop. On the
//! sphere (uniform densities only), every ingredient except the test
//! function is invariant under azimuth rotation, so kernels reduce to a
//! ring-to-ring matrix and evaluation at an arbitrary point is handled by
//! rotating the test function to the pole.

use std::collections::HashMap;
use std::f64::consts::PI;

use ndarray::{Array1, Array2};

use crate::diffusion::build_lad_from_affinities;
use crate::kernels::{affinity_from_squared_distances, squared_distance_matrix, KernelConfig};
use crate::landmarks::LandmarkSet;
use crate::manifolds::{Density, ManifoldGenerator, PairedDataset};
use crate::{Error, Result};

/// Default node count for curve integrals.
pub const CURVE_NODES: usize = 1 << 14;
/// Default polar resolution for sphere integrals.
pub const SPHERE_THETA: usize = 256;
/// Default azimuthal resolution for sphere integrals. Kept a power of two so
/// constant functions survive the ring averaging bit-exactly.
pub const SPHERE_PHI: usize = 512;

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence from Chebyshev initial guesses.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 2, "need at least two nodes");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let pk = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

/// Deterministic quadrature for one sampling measure on a manifold.
#[derive(Debug, Clone)]
pub struct QuadratureScheme {
    /// Latent node coordinates, N x intrinsic_dim.
    pub nodes: Array2<f64>,
    /// Probability weights (volume element times density, normalized).
    pub weights: Vec<f64>,
    /// Node count per latent dimension.
    pub resolution: Vec<usize>,
    /// Raw mass removed by clamping negative density values.
    pub clamped_mass_fraction: f64,
}

impl QuadratureScheme {
    /// Uniform periodic grid over a closed curve's angle domain, weighted by
    /// the arclength element times the density.
    pub fn curve_grid(gen: &ManifoldGenerator, density: &Density, nodes: usize) -> Result<Self> {
        gen.validate()?;
        if gen.intrinsic_dim() != 1 {
            return Err(Error::invalid("curve_grid needs a one-dimensional manifold"));
        }
        if nodes < 8 {
            return Err(Error::invalid("need at least 8 quadrature nodes"));
        }
        let (lo, hi) = gen.domain()[0];
        let h = (hi - lo) / nodes as f64;
        let mut thetas = Array2::zeros((nodes, 1));
        let mut weights = vec![0.0; nodes];
        let mut kept = 0.0;
        let mut clamped = 0.0;
        for k in 0..nodes {
            let t = lo + k as f64 * h;
            thetas[[k, 0]] = t;
            let p = match density {
                Density::Uniform => 1.0,
                Density::Weighted(w) => w.eval(&[t]),
            };
            if !p.is_finite() {
                return Err(Error::invalid(format!("density returned {p} at {t}")));
            }
            let vol = gen.volume_element(&[t]);
            if p < 0.0 {
                clamped += -p * vol * h;
            } else {
                weights[k] = p * vol * h;
                kept += weights[k];
            }
        }
        if kept <= 0.0 {
            return Err(Error::invalid("density is nonpositive over the whole domain"));
        }
        for w in weights.iter_mut() {
            *w /= kept;
        }
        Ok(QuadratureScheme {
            nodes: thetas,
            weights,
            resolution: vec![nodes],
            clamped_mass_fraction: clamped / (clamped + kept),
        })
    }

    /// Gauss-Legendre x uniform tensor grid on the sphere, uniform density.
    /// In t = cos(theta) the area element is exactly dt dphi, so the
    /// Gauss-Legendre weights are the area weights.
    pub fn sphere_grid(gen: &ManifoldGenerator, n_theta: usize, n_phi: usize) -> Result<Self> {
        gen.validate()?;
        if gen.domain() != vec![(0.0, PI), (-PI, PI)] {
            return Err(Error::invalid("sphere_grid needs a spherical domain"));
        }
        if n_theta < 4 || n_phi < 4 {
            return Err(Error::invalid("sphere grid needs at least 4 nodes per axis"));
        }
        let (gl_nodes, gl_weights) = gauss_legendre(n_theta);
        let wsum: f64 = gl_weights.iter().sum();
        let mut nodes = Array2::zeros((n_theta * n_phi, 2));
        let mut weights = vec![0.0; n_theta * n_phi];
        for a in 0..n_theta {
            let theta = gl_nodes[a].clamp(-1.0, 1.0).acos();
            let w = gl_weights[a] / wsum / n_phi as f64;
            for b in 0..n_phi {
                let idx = a * n_phi + b;
                nodes[[idx, 0]] = theta;
                nodes[[idx, 1]] = -PI + 2.0 * PI * b as f64 / n_phi as f64;
                weights[idx] = w;
            }
        }
        Ok(QuadratureScheme {
            nodes,
            weights,
            resolution: vec![n_theta, n_phi],
            clamped_mass_fraction: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Probability-measure integral of a latent function.
    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let mut buf = vec![0.0; self.nodes.ncols()];
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            for (b, v) in buf.iter_mut().zip(self.nodes.row(i)) {
                *b = *v;
            }
            acc += w * f(&buf);
        }
        acc
    }
}

fn gaussian(d2: f64, eps: f64) -> f64 {
    (-d2 / eps).exp()
}

fn chord_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Circular convolution out[k] = sum_j kernel[(k - j) mod N] values[j].
fn circular_conv(kernel: &[f64], values: &[f64]) -> Vec<f64> {
    let n = kernel.len();
    let mut out = vec![0.0; n];
    for (k, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for j in 0..=k {
            acc += kernel[k - j] * values[j];
        }
        for j in k + 1..n {
            acc += kernel[k + n - j] * values[j];
        }
        *o = acc;
    }
    out
}

struct CurveBackend {
    gen1: ManifoldGenerator,
    gen2: ManifoldGenerator,
    data: QuadratureScheme,
    lan: QuadratureScheme,
    /// Node embeddings through each sensor; nodes are shared by both schemes.
    p1: Array2<f64>,
    p2: Array2<f64>,
    /// Largest ambient gap between neighboring nodes on sensor 2.
    max_gap: f64,
    /// Kernel values depend only on the node index difference.
    rotation_invariant: bool,
}

struct CurveEps {
    /// Kernel row for the circulant fast path (None on the generic path).
    kappa2: Option<Vec<f64>>,
    /// Landmark smoothing at data nodes: s_i = sum_l w'_l K2(x_i, z_l).
    s: Vec<f64>,
    /// Landmark degree at the (shared) nodes.
    d2: Vec<f64>,
    /// Inner smoothing of the constant: g_1[k] = sum_j w_j K2(z_k, x_j).
    g1: Vec<f64>,
    /// Plain data-measure degree, for the alpha-free operator.
    d2p: Vec<f64>,
}

struct SphereBackend {
    scale1: f64,
    scale2: f64,
    thetas: Vec<f64>,
    /// Ring weights (Gauss-Legendre, normalized to sum 1); the weight of a
    /// single node is wring[a] / n_phi.
    wring: Vec<f64>,
    n_phi: usize,
    scheme: QuadratureScheme,
    max_gap: f64,
}

struct SphereEps {
    /// Ring kernel r2[a * nt + c] = sum_b K2 between a node on ring a and a
    /// node on ring c separated by each grid azimuth.
    r2: Vec<f64>,
    /// Landmark smoothing per ring.
    s: Vec<f64>,
    /// Landmark degree per ring.
    d2: Vec<f64>,
    /// Plain degree per ring.
    d2p: Vec<f64>,
    /// First-sensor kernel from the pole to each ring.
    kappa1_pole: Vec<f64>,
}

enum Backend {
    Curve(CurveBackend),
    Sphere(SphereBackend),
}

/// Oracle evaluator with per-bandwidth caches.
///
/// Evaluations are pure functions of (inputs, bandwidth); the mutability is
/// only memoization. Use one workspace per thread for parallel evaluation.
pub struct OracleWorkspace {
    backend: Backend,
    curve_cache: HashMap<u64, CurveEps>,
    sphere_cache: HashMap<u64, SphereEps>,
}

impl OracleWorkspace {
    /// Workspace for closed curves: both measures live on a shared uniform
    /// angle grid, with possibly different densities.
    pub fn new_curve(
        gen1: &ManifoldGenerator,
        gen2: &ManifoldGenerator,
        data_density: &Density,
        landmark_density: &Density,
        nodes: usize,
    ) -> Result<Self> {
        if gen1.intrinsic_dim() != 1 || gen2.intrinsic_dim() != 1 {
            return Err(Error::invalid("curve workspace needs 1-D manifolds"));
        }
        if gen1.domain() != gen2.domain() {
            return Err(Error::invalid("generators must share a latent domain"));
        }
        let data = QuadratureScheme::curve_grid(gen2, data_density, nodes)?;
        let lan = QuadratureScheme::curve_grid(gen2, landmark_density, nodes)?;
        let p1 = gen1.embed_latents(data.nodes.view());
        let p2 = gen2.embed_latents(data.nodes.view());
        let n = data.len();
        let mut max_gap = 0.0f64;
        for i in 0..n {
            let j = (i + 1) % n;
            let d = chord_sq(
                p2.row(i).as_slice().unwrap(),
                p2.row(j).as_slice().unwrap(),
            )
            .sqrt();
            max_gap = max_gap.max(d);
        }
        Ok(OracleWorkspace {
            backend: Backend::Curve(CurveBackend {
                gen1: gen1.clone(),
                gen2: gen2.clone(),
                data,
                lan,
                p1,
                p2,
                max_gap,
                rotation_invariant: gen2.rotation_invariant_curve(),
            }),
            curve_cache: HashMap::new(),
            sphere_cache: HashMap::new(),
        })
    }

    /// Workspace for concentric spheres with uniform data and landmark
    /// measures (the only spherical case the experiments need).
    pub fn new_sphere(
        gen1: &ManifoldGenerator,
        gen2: &ManifoldGenerator,
        n_theta: usize,
        n_phi: usize,
    ) -> Result<Self> {
        let scheme = QuadratureScheme::sphere_grid(gen2, n_theta, n_phi)?;
        if gen1.domain() != gen2.domain() {
            return Err(Error::invalid("generators must share a latent domain"));
        }
        // Both generators must be concentric spheres for the zonal reduction.
        let probe = [0.7, 1.3];
        let r1 = gen1.embed(&probe).iter().map(|v| v * v).sum::<f64>().sqrt();
        let r2 = gen2.embed(&probe).iter().map(|v| v * v).sum::<f64>().sqrt();
        let thetas: Vec<f64> = (0..n_theta)
            .map(|a| scheme.nodes[[a * n_phi, 0]])
            .collect();
        let wring: Vec<f64> = (0..n_theta)
            .map(|a| scheme.weights[a * n_phi] * n_phi as f64)
            .collect();
        let mut max_gap = 2.0 * PI / n_phi as f64;
        for a in 1..n_theta {
            max_gap = max_gap.max((thetas[a] - thetas[a - 1]).abs());
        }
        max_gap *= r2;
        Ok(OracleWorkspace {
            backend: Backend::Sphere(SphereBackend {
                scale1: r1,
                scale2: r2,
                thetas,
                wring,
                n_phi,
                scheme,
                max_gap,
            }),
            curve_cache: HashMap::new(),
            sphere_cache: HashMap::new(),
        })
    }

    pub fn data_scheme(&self) -> &QuadratureScheme {
        match &self.backend {
            Backend::Curve(c) => &c.data,
            Backend::Sphere(s) => &s.scheme,
        }
    }

    pub fn landmark_scheme(&self) -> &QuadratureScheme {
        match &self.backend {
            Backend::Curve(c) => &c.lan,
            Backend::Sphere(s) => &s.scheme,
        }
    }

    /// Errors out when the grid is too coarse to resolve the kernel: fewer
    /// than 8 nodes per bandwidth length sqrt(eps).
    pub fn check_resolution(&self, eps: f64) -> Result<()> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::invalid(format!("bandwidth {eps} must be positive")));
        }
        let gap = match &self.backend {
            Backend::Curve(c) => c.max_gap,
            Backend::Sphere(s) => s.max_gap,
        };
        if gap > eps.sqrt() / 8.0 {
            return Err(Error::Resolution(format!(
                "node spacing {gap:.3e} exceeds sqrt(eps)/8 = {:.3e}; raise the resolution or the bandwidth",
                eps.sqrt() / 8.0
            )));
        }
        Ok(())
    }

    fn curve_eps(&mut self, eps: f64) -> Result<&CurveEps> {
        self.check_resolution(eps)?;
        let key = eps.to_bits();
        if !self.curve_cache.contains_key(&key) {
            let cache = match &self.backend {
                Backend::Curve(c) => build_curve_eps(c, eps),
                Backend::Sphere(_) => unreachable!("curve cache on sphere backend"),
            };
            self.curve_cache.insert(key, cache);
        }
        Ok(self.curve_cache.get(&key).unwrap())
    }

    fn sphere_eps(&mut self, eps: f64) -> Result<&SphereEps> {
        self.check_resolution(eps)?;
        let key = eps.to_bits();
        if !self.sphere_cache.contains_key(&key) {
            let cache = match &self.backend {
                Backend::Sphere(s) => build_sphere_eps(s, eps),
                Backend::Curve(_) => unreachable!("sphere cache on curve backend"),
            };
            self.sphere_cache.insert(key, cache);
        }
        Ok(self.sphere_cache.get(&key).unwrap())
    }

    /// Landmark degree d2(z) at an arbitrary latent point.
    pub fn landmark_degree(&mut self, z: &[f64], eps: f64) -> Result<f64> {
        match &self.backend {
            Backend::Curve(_) => {
                self.curve_eps(eps)?;
                let cache = self.curve_cache.get(&eps.to_bits()).unwrap();
                let Backend::Curve(c) = &self.backend else {
                    unreachable!()
                };
                let zp = c.gen2.embed(z);
                let mut acc = 0.0;
                for i in 0..c.data.len() {
                    let d2 = chord_sq(&zp, c.p2.row(i).as_slice().unwrap());
                    acc += c.data.weights[i] * gaussian(d2, eps) * cache.s[i];
                }
                Ok(acc)
            }
            Backend::Sphere(_) => {
                self.sphere_eps(eps)?;
                let cache = self.sphere_cache.get(&eps.to_bits()).unwrap();
                let Backend::Sphere(s) = &self.backend else {
                    unreachable!()
                };
                let (zt, zf) = (z[0], z[1]);
                let (szt, czt) = zt.sin_cos();
                let mut acc = 0.0;
                for a in 0..s.thetas.len() {
                    let (sa, ca) = s.thetas[a].sin_cos();
                    let w = s.wring[a] / s.n_phi as f64;
                    let mut ring = 0.0;
                    for b in 0..s.n_phi {
                        let phi = -PI + 2.0 * PI * b as f64 / s.n_phi as f64;
                        let cosg = czt * ca + szt * sa * (phi - zf).cos();
                        let d2 = s.scale2 * s.scale2 * (2.0 - 2.0 * cosg);
                        ring += gaussian(d2, eps);
                    }
                    acc += w * ring * cache.s[a];
                }
                Ok(acc)
            }
        }
    }

    /// T f(x) for the landmark operator at bandwidth `eps` and the given
    /// alpha. Exact on constants: numerator and denominator share the
    /// quadrature and code path.
    pub fn operator_apply(
        &mut self,
        f: &dyn Fn(&[f64]) -> f64,
        x: &[f64],
        eps: f64,
        alpha: f64,
    ) -> Result<f64> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::invalid(format!("alpha = {alpha} outside [0, 1]")));
        }
        match &self.backend {
            Backend::Curve(_) => {
                self.curve_eps(eps)?;
                let cache = self.curve_cache.get(&eps.to_bits()).unwrap();
                let Backend::Curve(c) = &self.backend else {
                    unreachable!()
                };
                let gf = curve_inner_smoothing(c, cache, eps, Some(f));
                let num = curve_outer(c, cache, x, eps, alpha, &gf);
                let den = curve_outer(c, cache, x, eps, alpha, &cache.g1);
                Ok(num / den)
            }
            Backend::Sphere(_) => {
                self.sphere_eps(eps)?;
                let cache = self.sphere_cache.get(&eps.to_bits()).unwrap();
                let Backend::Sphere(s) = &self.backend else {
                    unreachable!()
                };
                let sf = sphere_ring_sums(s, x, f);
                let num = sphere_outer(s, cache, alpha, &sf, true);
                let den = sphere_outer(s, cache, alpha, &s.wring, true);
                Ok(num / den)
            }
        }
    }

    /// The alpha-free alternating-diffusion operator limit: two nested
    /// normalized smoothings over the data measure, with no landmark measure
    /// involved.
    pub fn ad_operator_apply(
        &mut self,
        f: &dyn Fn(&[f64]) -> f64,
        x: &[f64],
        eps: f64,
    ) -> Result<f64> {
        match &self.backend {
            Backend::Curve(_) => {
                self.curve_eps(eps)?;
                let cache = self.curve_cache.get(&eps.to_bits()).unwrap();
                let Backend::Curve(c) = &self.backend else {
                    unreachable!()
                };
                let gf = curve_plain_smoothing(c, cache, eps, Some(f));
                let num = curve_ad_outer(c, cache, x, eps, &gf);
                let den = curve_ad_outer(c, cache, x, eps, &cache.d2p);
                Ok(num / den)
            }
            Backend::Sphere(_) => {
                self.sphere_eps(eps)?;
                let cache = self.sphere_cache.get(&eps.to_bits()).unwrap();
                let Backend::Sphere(s) = &self.backend else {
                    unreachable!()
                };
                let sf = sphere_ring_sums(s, x, f);
                let num = sphere_outer(s, cache, 1.0, &sf, false);
                let den = sphere_outer(s, cache, 1.0, &s.wring, false);
                Ok(num / den)
            }
        }
    }
}

/// Smoothing of `coeffs` (per-node weights times values) against the
/// second-sensor kernel from every node: out[i] = sum_j K2(i, j) coeffs[j].
fn curve_kernel_apply(c: &CurveBackend, cache: &CurveEps, eps: f64, coeffs: &[f64]) -> Vec<f64> {
    if let Some(kappa) = &cache.kappa2 {
        circular_conv(kappa, coeffs)
    } else {
        let n = c.data.len();
        let mut out = vec![0.0; n];
        for (i, o) in out.iter_mut().enumerate() {
            let pi = c.p2.row(i);
            let pi = pi.as_slice().unwrap();
            let mut acc = 0.0;
            for (j, coeff) in coeffs.iter().enumerate() {
                if *coeff != 0.0 {
                    acc += gaussian(chord_sq(pi, c.p2.row(j).as_slice().unwrap()), eps) * coeff;
                }
            }
            *o = acc;
        }
        out
    }
}

/// g_f[k] = sum_j w_j K2(z_k, x_j) f(x_j) over the data measure.
fn curve_inner_smoothing(
    c: &CurveBackend,
    cache: &CurveEps,
    eps: f64,
    f: Option<&dyn Fn(&[f64]) -> f64>,
) -> Vec<f64> {
    let n = c.data.len();
    let mut coeffs = vec![0.0; n];
    for j in 0..n {
        let fv = match f {
            Some(f) => f(&[c.data.nodes[[j, 0]]]),
            None => 1.0,
        };
        coeffs[j] = c.data.weights[j] * fv;
    }
    curve_kernel_apply(c, cache, eps, &coeffs)
}

/// Same smoothing, used by the alpha-free operator (identical code path; the
/// distinction is only where the result is consumed).
fn curve_plain_smoothing(
    c: &CurveBackend,
    cache: &CurveEps,
    eps: f64,
    f: Option<&dyn Fn(&[f64]) -> f64>,
) -> Vec<f64> {
    curve_inner_smoothing(c, cache, eps, f)
}

/// Outer landmark integral: sum_k w'_k K1(x, z_k) d2[k]^(-alpha) g[k].
fn curve_outer(
    c: &CurveBackend,
    cache: &CurveEps,
    x: &[f64],
    eps: f64,
    alpha: f64,
    g: &[f64],
) -> f64 {
    let xp = c.gen1.embed(x);
    let mut acc = 0.0;
    for k in 0..c.lan.len() {
        let w = c.lan.weights[k];
        if w == 0.0 {
            continue;
        }
        let k1 = gaussian(chord_sq(&xp, c.p1.row(k).as_slice().unwrap()), eps);
        acc += w * k1 * cache.d2[k].powf(-alpha) * g[k];
    }
    acc
}

/// Outer data integral for the alpha-free operator:
/// sum_j w_j K1(x, x_j) d2p[j]^(-1) g[j].
fn curve_ad_outer(c: &CurveBackend, cache: &CurveEps, x: &[f64], eps: f64, g: &[f64]) -> f64 {
    let xp = c.gen1.embed(x);
    let mut acc = 0.0;
    for j in 0..c.data.len() {
        let w = c.data.weights[j];
        if w == 0.0 {
            continue;
        }
        let k1 = gaussian(chord_sq(&xp, c.p1.row(j).as_slice().unwrap()), eps);
        acc += w * k1 * g[j] / cache.d2p[j];
    }
    acc
}

fn build_curve_eps(c: &CurveBackend, eps: f64) -> CurveEps {
    let n = c.data.len();
    let kappa2 = if c.rotation_invariant {
        let p0 = c.p2.row(0);
        let p0 = p0.as_slice().unwrap();
        Some(
            (0..n)
                .map(|d| gaussian(chord_sq(p0, c.p2.row(d).as_slice().unwrap()), eps))
                .collect::<Vec<f64>>(),
        )
    } else {
        None
    };
    let mut cache = CurveEps {
        kappa2,
        s: Vec::new(),
        d2: Vec::new(),
        g1: Vec::new(),
        d2p: Vec::new(),
    };
    // s_i: landmark-measure smoothing at every node.
    cache.s = curve_kernel_apply(c, &cache, eps, &c.lan.weights);
    // d2[k] = sum_i w_i K2(z_k, x_i) s_i.
    let coeffs: Vec<f64> = c
        .data
        .weights
        .iter()
        .zip(cache.s.iter())
        .map(|(w, s)| w * s)
        .collect();
    cache.d2 = curve_kernel_apply(c, &cache, eps, &coeffs);
    // g_1 and the plain degree share a definition here (both smooth the
    // constant against the data measure).
    cache.g1 = curve_inner_smoothing(c, &cache, eps, None);
    cache.d2p = cache.g1.clone();
    cache
}

/// Ring sums of the rotated test function: sf[c] = (w_c / n_phi) *
/// sum_b f(R_x node_{cb}), where R_x carries the pole to x.
fn sphere_ring_sums(s: &SphereBackend, x: &[f64], f: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
    let (theta_x, phi_x) = (x[0], x[1]);
    let (st, ct) = theta_x.sin_cos();
    let (sp, cp) = phi_x.sin_cos();
    // R = Rz(phi_x) Ry(theta_x), mapping (0,0,1) to the latent point x.
    let r = [
        [cp * ct, -sp, cp * st],
        [sp * ct, cp, sp * st],
        [-st, 0.0, ct],
    ];
    let nt = s.thetas.len();
    let mut out = vec![0.0; nt];
    for c in 0..nt {
        let (sc, cc) = s.thetas[c].sin_cos();
        let mut ring = 0.0;
        for b in 0..s.n_phi {
            let phi = -PI + 2.0 * PI * b as f64 / s.n_phi as f64;
            let (sb, cb) = phi.sin_cos();
            let u = [sc * cb, sc * sb, cc];
            let v = [
                r[0][0] * u[0] + r[0][1] * u[1] + r[0][2] * u[2],
                r[1][0] * u[0] + r[1][1] * u[1] + r[1][2] * u[2],
                r[2][0] * u[0] + r[2][1] * u[1] + r[2][2] * u[2],
            ];
            let lat = [v[2].clamp(-1.0, 1.0).acos(), v[1].atan2(v[0])];
            ring += f(&lat);
        }
        out[c] = s.wring[c] / s.n_phi as f64 * ring;
    }
    out
}

/// Zonal outer sum at the pole. With `landmark_weighting` the inner degree is
/// the landmark one raised to -alpha; without it the plain degree enters at
/// power -1 (the alpha argument is then ignored).
fn sphere_outer(
    s: &SphereBackend,
    cache: &SphereEps,
    alpha: f64,
    sf: &[f64],
    landmark_weighting: bool,
) -> f64 {
    let nt = s.thetas.len();
    let mut acc = 0.0;
    for a in 0..nt {
        let mut inner = 0.0;
        for c in 0..nt {
            inner += cache.r2[a * nt + c] * sf[c];
        }
        let weight = if landmark_weighting {
            cache.d2[a].powf(-alpha)
        } else {
            1.0 / cache.d2p[a]
        };
        acc += s.wring[a] * cache.kappa1_pole[a] * weight * inner;
    }
    acc
}

fn build_sphere_eps(s: &SphereBackend, eps: f64) -> SphereEps {
    let nt = s.thetas.len();
    let mut r2 = vec![0.0; nt * nt];
    for a in 0..nt {
        let (sa, ca) = s.thetas[a].sin_cos();
        for c in 0..nt {
            let (sc, cc) = s.thetas[c].sin_cos();
            let mut acc = 0.0;
            for b in 0..s.n_phi {
                let phi = -PI + 2.0 * PI * b as f64 / s.n_phi as f64;
                let cosg = ca * cc + sa * sc * phi.cos();
                let d2 = s.scale2 * s.scale2 * (2.0 - 2.0 * cosg);
                acc += gaussian(d2, eps);
            }
            r2[a * nt + c] = acc;
        }
    }
    let per_node = |w: f64| w / s.n_phi as f64;
    let mut sdeg = vec![0.0; nt];
    for c in 0..nt {
        let mut acc = 0.0;
        for a in 0..nt {
            acc += per_node(s.wring[a]) * r2[c * nt + a];
        }
        sdeg[c] = acc;
    }
    let mut d2 = vec![0.0; nt];
    let mut d2p = vec![0.0; nt];
    for a in 0..nt {
        let mut acc = 0.0;
        let mut accp = 0.0;
        for c in 0..nt {
            acc += per_node(s.wring[c]) * r2[a * nt + c] * sdeg[c];
            accp += per_node(s.wring[c]) * r2[a * nt + c];
        }
        d2[a] = acc;
        d2p[a] = accp;
    }
    let kappa1_pole = s
        .thetas
        .iter()
        .map(|t| gaussian(s.scale1 * s.scale1 * (2.0 - 2.0 * t.cos()), eps))
        .collect();
    SphereEps {
        r2,
        s: sdeg,
        d2,
        d2p,
        kappa1_pole,
    }
}

/// Gap between the sampled operator's row action and its continuum limit:
/// |(f_i - (M f)_i)/eps - (f(x_i) - T f(x_i))/eps| at sample i, where M is
/// the landmark diffusion built from the dataset at bandwidth eps (both
/// sensors) and T is the quadrature operator.
pub fn discrete_operator_deviation(
    dataset: &PairedDataset,
    landmarks: &LandmarkSet,
    f: &dyn Fn(&[f64]) -> f64,
    i: usize,
    eps: f64,
    alpha: f64,
    ws: &mut OracleWorkspace,
) -> Result<f64> {
    let cont = continuum_row_action(f, dataset, i, eps, alpha, ws)?;
    let disc = discrete_row_action(dataset, landmarks, f, i, eps, alpha)?;
    Ok((disc - cont).abs())
}

/// The discrete half of the deviation: (f_i - (M f)_i)/eps.
pub fn discrete_row_action(
    dataset: &PairedDataset,
    landmarks: &LandmarkSet,
    f: &dyn Fn(&[f64]) -> f64,
    i: usize,
    eps: f64,
    alpha: f64,
) -> Result<f64> {
    if dataset.params.ncols() == 0 {
        return Err(Error::invalid(
            "deviation needs latent parameters on the dataset",
        ));
    }
    if i >= dataset.len() {
        return Err(Error::invalid(format!("sample index {i} out of range")));
    }
    let cfg = KernelConfig::gaussian(eps)?;
    let d1 = squared_distance_matrix(dataset.sensor1.view(), landmarks.points1.view())?;
    let d2 = squared_distance_matrix(dataset.sensor2.view(), landmarks.points2.view())?;
    let w1 = affinity_from_squared_distances(&d1, &cfg)?;
    let w2 = affinity_from_squared_distances(&d2, &cfg)?;
    let model = build_lad_from_affinities(
        w1.into_values(),
        w2.into_values(),
        alpha,
        eps,
        eps,
        crate::diffusion::StartSensor::Sensor2,
    )?;
    let fvec = Array1::from_iter(
        (0..dataset.len()).map(|j| f(dataset.params.row(j).as_slice().unwrap())),
    );
    let mf = model.apply(&fvec);
    Ok((fvec[i] - mf[i]) / eps)
}

/// The continuum half of the deviation: (f(x_i) - T f(x_i))/eps.
pub fn continuum_row_action(
    f: &dyn Fn(&[f64]) -> f64,
    dataset: &PairedDataset,
    i: usize,
    eps: f64,
    alpha: f64,
    ws: &mut OracleWorkspace,
) -> Result<f64> {
    if dataset.params.ncols() == 0 {
        return Err(Error::invalid(
            "deviation needs latent parameters on the dataset",
        ));
    }
    if i >= dataset.len() {
        return Err(Error::invalid(format!("sample index {i} out of range")));
    }
    let x: Vec<f64> = dataset.params.row(i).to_vec();
    let tf = ws.operator_apply(f, &x, eps, alpha)?;
    Ok((f(&x) - tf) / eps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landmarks::uniform_subset;
    use crate::manifolds::{builtin_density, sample_pair};

    fn unit_circle() -> ManifoldGenerator {
        ManifoldGenerator::circle()
    }

    fn circle_ws(density_data: &str, density_lan: &str, nodes: usize) -> OracleWorkspace {
        let g = unit_circle();
        OracleWorkspace::new_curve(
            &g,
            &g,
            &builtin_density(density_data).unwrap(),
            &builtin_density(density_lan).unwrap(),
            nodes,
        )
        .unwrap()
    }

    #[test]
    fn gauss_legendre_matches_reference_values() {
        let (x, w) = gauss_legendre(5);
        let known_x = [
            -0.906179845938664,
            -0.5384693101056831,
            0.0,
            0.5384693101056831,
            0.906179845938664,
        ];
        let known_w = [
            0.23692688505618908,
            0.47862867049936647,
            0.5688888888888889,
            0.47862867049936647,
            0.23692688505618908,
        ];
        let mut pairs: Vec<(f64, f64)> = x.into_iter().zip(w).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for (i, (xi, wi)) in pairs.iter().enumerate() {
            assert!((xi - known_x[i]).abs() < 1e-13, "node {i}: {xi}");
            assert!((wi - known_w[i]).abs() < 1e-13, "weight {i}: {wi}");
        }
        // Degree-7 polynomial integrated exactly by 5 nodes.
        let (x, w) = gauss_legendre(5);
        let int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(6)).sum();
        assert!((int - 2.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn curve_scheme_is_a_probability_measure() {
        let g = unit_circle();
        for name in ["uniform", "cosine", "arctan"] {
            let s = QuadratureScheme::curve_grid(&g, &builtin_density(name).unwrap(), 512).unwrap();
            let total: f64 = s.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "{name}: {total}");
            assert!(s.weights.iter().all(|w| *w >= 0.0));
        }
        let arctan = QuadratureScheme::curve_grid(&g, &builtin_density("arctan").unwrap(), 512).unwrap();
        assert!(arctan.clamped_mass_fraction > 0.3);
        // Moment of the cosine measure, against the analytic value.
        let cosine = QuadratureScheme::curve_grid(&g, &builtin_density("cosine").unwrap(), 4096).unwrap();
        let mean = cosine.integrate(|p| p[0].cos());
        assert!((mean - 0.24 / 0.52).abs() < 1e-10, "{mean}");
    }

    #[test]
    fn sphere_scheme_integrates_smooth_functions_exactly() {
        let g = ManifoldGenerator::sphere();
        let s = QuadratureScheme::sphere_grid(&g, 24, 32).unwrap();
        let total: f64 = s.weights.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // cos^2(theta) integrates to 1/3 on the uniform sphere; polynomial in
        // cos(theta), exact under Gauss-Legendre.
        let m2 = s.integrate(|p| p[0].cos().powi(2));
        assert!((m2 - 1.0 / 3.0).abs() < 1e-13, "{m2}");
        let m1 = s.integrate(|p| p[0].cos());
        assert!(m1.abs() < 1e-14);
        let mphi = s.integrate(|p| p[1].sin());
        assert!(mphi.abs() < 1e-14);
    }

    #[test]
    fn operator_fixes_constants_exactly() {
        let mut ws = circle_ws("cosine", "cosine", 2048);
        for &alpha in &[0.0, 0.25, 0.5, 0.75, 1.0] {
            let v = ws.operator_apply(&|_| 1.0, &[0.7], 0.05, alpha).unwrap();
            assert_eq!(v, 1.0, "alpha {alpha}");
        }
        let v = ws.ad_operator_apply(&|_| 1.0, &[0.7], 0.05).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn sphere_operator_fixes_constants_exactly() {
        let g = ManifoldGenerator::sphere();
        let mut ws = OracleWorkspace::new_sphere(&g, &g, 64, 128).unwrap();
        for &alpha in &[0.0, 0.5, 1.0] {
            let v = ws
                .operator_apply(&|_| 1.0, &[0.8, -1.1], 0.2, alpha)
                .unwrap();
            assert_eq!(v, 1.0, "alpha {alpha}");
        }
    }

    #[test]
    fn constant_kernel_limit_gives_unit_degree() {
        let mut ws = circle_ws("uniform", "uniform", 1024);
        // At eps = 1e8 the kernel deviates from 1 by about 4e-8 on the unit
        // circle (mean squared chord is 2 per factor), so the degree is 1 to
        // well under 1e-6.
        let d = ws.landmark_degree(&[0.3], 1e8).unwrap();
        assert!((d - 1.0).abs() < 1e-6, "degree {d}");
        // At eps = 1e6 the same argument caps the deviation near 4e-6.
        let d = ws.landmark_degree(&[0.3], 1e6).unwrap();
        assert!((d - 1.0).abs() < 1e-5, "degree {d}");
    }

    #[test]
    fn degree_leading_term_scales_linearly_in_bandwidth() {
        // d2(z)/eps approaches a constant with an O(eps) relative correction,
        // so the halving deviation should itself halve.
        let mut ws = circle_ws("uniform", "uniform", 8192);
        let r = |ws: &mut OracleWorkspace, eps: f64| ws.landmark_degree(&[0.3], eps).unwrap() / eps;
        let r1 = r(&mut ws, 0.2);
        let r2 = r(&mut ws, 0.1);
        let r3 = r(&mut ws, 0.05);
        let dev1 = (r1 / r2 - 1.0).abs();
        let dev2 = (r2 / r3 - 1.0).abs();
        assert!(dev1 < 0.2, "unexpectedly large first correction {dev1}");
        let ratio = dev2 / dev1;
        assert!(
            ratio > 0.3 && ratio < 0.7,
            "halving ratio {ratio} (dev1 {dev1}, dev2 {dev2})"
        );
    }

    #[test]
    fn degree_tracks_the_density_product() {
        // Data density cosine, landmarks uniform: the degree at angle z is
        // proportional to p(z), so the front-to-back ratio should match the
        // density ratio 1.16 / 0.0464 = 25, softened by kernel smoothing.
        let mut ws = circle_ws("cosine", "uniform", 8192);
        let front = ws.landmark_degree(&[0.0], 0.02).unwrap();
        let back = ws.landmark_degree(&[PI], 0.02).unwrap();
        let ratio = front / back;
        assert!(ratio > 15.0 && ratio < 30.0, "ratio {ratio}");
    }

    #[test]
    fn curve_values_self_converge_under_resolution_doubling() {
        let mut coarse = circle_ws("cosine", "cosine", 4096);
        let mut fine = circle_ws("cosine", "cosine", 8192);
        let f = |p: &[f64]| p[0].cos();
        for &eps in &[0.05, 0.02] {
            let a = coarse.operator_apply(&f, &[0.4], eps, 0.5).unwrap();
            let b = fine.operator_apply(&f, &[0.4], eps, 0.5).unwrap();
            assert!((a - b).abs() < 1e-8, "eps {eps}: {a} vs {b}");
            let da = coarse.landmark_degree(&[0.4], eps).unwrap();
            let db = fine.landmark_degree(&[0.4], eps).unwrap();
            assert!((da - db).abs() < 1e-8 * db, "degree eps {eps}");
        }
    }

    #[test]
    fn sphere_values_self_converge_under_resolution_doubling() {
        let g = ManifoldGenerator::sphere();
        let mut coarse = OracleWorkspace::new_sphere(&g, &g, 96, 192).unwrap();
        let mut fine = OracleWorkspace::new_sphere(&g, &g, 192, 384).unwrap();
        let f = |p: &[f64]| p[0].cos() + p[0].sin() * p[1].cos();
        let a = coarse.operator_apply(&f, &[0.0, 0.0], 0.15, 0.5).unwrap();
        let b = fine.operator_apply(&f, &[0.0, 0.0], 0.15, 0.5).unwrap();
        assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn uniform_everything_makes_alpha_irrelevant() {
        // With uniform data and landmark measures on the circle, the landmark
        // degree is constant, so its -alpha power cancels in the ratio.
        let mut ws = circle_ws("uniform", "uniform", 4096);
        let f = |p: &[f64]| (2.0 * p[0]).sin();
        let base = ws.operator_apply(&f, &[0.9], 0.05, 0.0).unwrap();
        for &alpha in &[0.25, 0.5, 0.75, 1.0] {
            let v = ws.operator_apply(&f, &[0.9], 0.05, alpha).unwrap();
            assert!((v - base).abs() < 1e-10, "alpha {alpha}: {v} vs {base}");
        }
    }

    #[test]
    fn cosine_is_a_stable_eigenfunction_direction() {
        // (T cos - cos)/eps should look like -c cos(theta) with c > 0 and be
        // stable in shape as eps halves.
        let mut ws = circle_ws("uniform", "uniform", 4096);
        let f = |p: &[f64]| p[0].cos();
        let ratio_at = |ws: &mut OracleWorkspace, theta: f64, eps: f64| {
            let t = ws.operator_apply(&f, &[theta], eps, 0.5).unwrap();
            ((t - theta.cos()) / eps) / theta.cos()
        };
        let c0 = ratio_at(&mut ws, 0.0, 0.04);
        let c1 = ratio_at(&mut ws, 1.0, 0.04);
        assert!(c0 < 0.0, "deviation must push cos toward zero, got {c0}");
        assert!(
            (c0 - c1).abs() < 0.05 * c0.abs(),
            "not proportional to cos: {c0} vs {c1}"
        );
        let c_half = ratio_at(&mut ws, 0.0, 0.02);
        assert!(
            (c0 - c_half).abs() < 0.05 * c0.abs(),
            "rate unstable under halving: {c0} vs {c_half}"
        );
    }

    #[test]
    fn half_alpha_with_matched_densities_approaches_plain_alternating_diffusion() {
        // With p_Z = p and alpha = 1/2 the landmark operator reduces to the
        // plain one up to a superlinear-in-eps error.
        let mut ws = circle_ws("cosine", "cosine", 8192);
        let f = |p: &[f64]| p[0].sin();
        let x = [0.6];
        let diff = |ws: &mut OracleWorkspace, eps: f64| {
            let lan = ws.operator_apply(&f, &x, eps, 0.5).unwrap();
            let ad = ws.ad_operator_apply(&f, &x, eps).unwrap();
            (lan - ad).abs()
        };
        let d1 = diff(&mut ws, 0.08);
        let d2 = diff(&mut ws, 0.04);
        let d3 = diff(&mut ws, 0.02);
        let slope1 = (d1 / d2).log2();
        let slope2 = (d2 / d3).log2();
        let slope = 0.5 * (slope1 + slope2);
        assert!(
            slope >= 1.2,
            "difference decayed with order {slope} (d = {d1:.3e}, {d2:.3e}, {d3:.3e})"
        );
    }

    #[test]
    fn sphere_pole_and_rotated_evaluations_agree() {
        // cos(theta) at the pole versus its rotated copy sin(theta)cos(phi)
        // at (pi/2, 0): rotation equivariance up to quadrature error.
        let g = ManifoldGenerator::sphere();
        let mut ws = OracleWorkspace::new_sphere(&g, &g, 64, 128).unwrap();
        let at_pole = ws
            .operator_apply(&|p: &[f64]| p[0].cos(), &[0.0, 0.0], 0.2, 0.5)
            .unwrap();
        let rotated = ws
            .operator_apply(
                &|p: &[f64]| p[0].sin() * p[1].cos(),
                &[PI / 2.0, 0.0],
                0.2,
                0.5,
            )
            .unwrap();
        assert!(
            (at_pole - rotated).abs() < 1e-6,
            "{at_pole} vs {rotated}"
        );
        // And the value must actually contract toward the mean.
        assert!(at_pole > 0.5 && at_pole < 1.0, "{at_pole}");
    }

    #[test]
    fn coarse_grids_refuse_small_bandwidths() {
        let mut ws = circle_ws("uniform", "uniform", 64);
        let err = ws.operator_apply(&|_| 1.0, &[0.0], 1e-4, 0.5).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)), "{err}");
        assert!(ws.check_resolution(1.0).is_ok());
    }

    #[test]
    fn deviation_vanishes_for_constants_and_not_for_harmonics() {
        let g1 = ManifoldGenerator::scaled_circle(1.5);
        let g2 = unit_circle();
        let cosine = builtin_density("cosine").unwrap();
        let ds = sample_pair(&g1, &g2, 400, &Density::Uniform, 11).unwrap();
        let lm = uniform_subset(&ds, 200, 3).unwrap();
        let mut ws = OracleWorkspace::new_curve(
            &g1,
            &g2,
            &Density::Uniform,
            &cosine,
            2048,
        )
        .unwrap();
        // Landmarks here are a data subset, i.e. data-distributed; the
        // continuum landmark measure does not need to match for the constant
        // check, which is exact on both sides.
        let dev = discrete_operator_deviation(&ds, &lm, &|_| 1.0, 0, 0.05, 0.5, &mut ws).unwrap();
        assert!(dev < 1e-12, "constant deviation {dev}");
        let dev_cos =
            discrete_operator_deviation(&ds, &lm, &|p: &[f64]| p[0].cos(), 0, 0.05, 0.5, &mut ws)
                .unwrap();
        assert!(dev_cos > 1e-6, "harmonic deviation suspiciously small");
        // Different draws give different deviations.
        let ds2 = sample_pair(&g1, &g2, 400, &Density::Uniform, 12).unwrap();
        let lm2 = uniform_subset(&ds2, 200, 4).unwrap();
        let dev2 =
            discrete_operator_deviation(&ds2, &lm2, &|p: &[f64]| p[0].cos(), 0, 0.05, 0.5, &mut ws)
                .unwrap();
        assert!((dev_cos - dev2).abs() > 1e-12);
    }

    #[test]
    fn landmark_degree_matches_ring_cache_on_sphere() {
        let g = ManifoldGenerator::sphere();
        let mut ws = OracleWorkspace::new_sphere(&g, &g, 64, 128).unwrap();
        // Uniform measures: the degree is constant over the sphere.
        let a = ws.landmark_degree(&[0.4, 0.3], 0.2).unwrap();
        let b = ws.landmark_degree(&[2.0, -1.5], 0.2).unwrap();
        assert!((a - b).abs() < 1e-9 * a.abs(), "{a} vs {b}");
    }
}
