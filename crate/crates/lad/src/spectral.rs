//! Dense nonsymmetric eigendecomposition with fixed ordering and sign
//! conventions.
//!
//! Diffusion matrices here are row-stochastic products of nonnegative
//! matrices: real, nonsymmetric, possibly non-diagonalizable, with spectra
//! that are real in exact arithmetic only asymptotically. We therefore use a
//! general dense solver, keep eigenvalues complex, and report how far from
//! real the retained ones are instead of assuming anything.
//!
//! Conventions, chosen so downstream output is deterministic:
//! - eigenvalues sorted by descending modulus, ties by descending real part,
//!   then by solver output order;
//! - retained eigenvectors are stored as real columns: the real part for a
//!   real eigenvalue, and the real and imaginary parts for the two slots of
//!   a conjugate pair, so the pair's columns span its real invariant
//!   subspace instead of duplicating one vector; each column is renormalized
//!   to unit 2-norm with sign fixed so the entry of largest absolute value
//!   is positive (first such entry wins);
//! - residuals are evaluated in complex arithmetic against the action of the
//!   matrix being decomposed, since the real part alone of a conjugate-pair
//!   eigenvector is not an eigenvector.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use ndarray_linalg::Eig;
use num_complex::Complex64;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct SpectralOptions {
    /// Eigenvalues with modulus at or below this floor count as numerically
    /// zero; `rank_hint` counts the rest.
    pub rank_floor: f64,
    /// `max_imag_ratio` above this sets the `imag_warning` flag.
    pub imag_tolerance: f64,
    /// Maximum permitted relative residual for retained eigenpairs.
    pub residual_tolerance: f64,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        SpectralOptions {
            rank_floor: 1e-12,
            imag_tolerance: 1e-6,
            residual_tolerance: 1e-8,
        }
    }
}

/// Sorted eigendecomposition with residual and realness diagnostics.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    /// Every eigenvalue of the decomposed matrix, in the fixed order.
    pub eigenvalues: Vec<Complex64>,
    /// Retained eigenvectors as real columns (real part, or the imaginary
    /// part in the second slot of a conjugate pair), unit norm, sign-fixed.
    pub vectors: Array2<f64>,
    /// Number of eigenvalues with modulus above the rank floor.
    pub rank_hint: usize,
    /// Largest |Im lambda| / |lambda| among retained eigenvalues.
    pub max_imag_ratio: f64,
    /// Set when `max_imag_ratio` exceeds the configured tolerance.
    pub imag_warning: bool,
    /// Largest relative residual among retained eigenpairs.
    pub max_residual: f64,
    /// |lambda_1| - |lambda_2| in the sorted order (0 when fewer than two).
    pub spectral_gap: f64,
    /// True when the request asked for more vectors than the rank floor
    /// admits; `vectors` then has `rank_hint` columns.
    pub truncated: bool,
}

impl SpectralResult {
    pub fn retained(&self) -> usize {
        self.vectors.ncols()
    }

    /// Real parts of the eigenvalues matching the retained vectors.
    pub fn eigenvalues_real(&self) -> Vec<f64> {
        self.eigenvalues
            .iter()
            .take(self.retained())
            .map(|l| l.re)
            .collect()
    }
}

fn sorted_order(vals: &[Complex64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| {
        vals[j]
            .norm()
            .partial_cmp(&vals[i].norm())
            .expect("finite moduli")
            .then(vals[j].re.partial_cmp(&vals[i].re).expect("finite parts"))
            .then(i.cmp(&j))
    });
    order
}

/// Raw dense EVD with the crate's ordering applied: returns `(values,
/// vectors)` where vectors are the complex right eigenvectors as columns,
/// both sorted.
pub fn eig_sorted(matrix: ArrayView2<'_, f64>) -> Result<(Vec<Complex64>, Array2<Complex64>)> {
    if matrix.nrows() != matrix.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix entries must be finite"));
    }
    let owned = matrix.to_owned();
    let (vals, vecs) = owned
        .eig()
        .map_err(|e| Error::Solver(format!("dense eigensolver failed: {e}")))?;
    let vals: Vec<Complex64> = vals.iter().copied().collect();
    if vals.iter().any(|l| !l.re.is_finite() || !l.im.is_finite()) {
        return Err(Error::Solver("eigensolver returned nonfinite values".into()));
    }
    let order = sorted_order(&vals);
    let sorted_vals: Vec<Complex64> = order.iter().map(|&i| vals[i]).collect();
    let sorted_vecs = vecs.select(Axis(1), &order);
    Ok((sorted_vals, sorted_vecs))
}

/// Decomposes `matrix` directly; residuals use `matrix` itself.
pub fn decompose(matrix: ArrayView2<'_, f64>, k: usize, opts: &SpectralOptions) -> Result<SpectralResult> {
    let m = matrix.to_owned();
    assemble(matrix, None, k, opts, move |x| m.dot(&x))
}

/// Decomposes the reduced `core` matrix and lifts its eigenvectors through
/// `lift` (an n x m map) to eigenvectors of the full product; `action` must
/// apply that full product, and is used for the residual check.
///
/// If `core = B A` and `u = A v` with `core v = lambda v`, then
/// `(A B) u = A (B A) v = lambda u`, so lifted vectors are exact eigenvectors
/// of the full matrix in exact arithmetic; the residual check quantifies the
/// floating-point error actually incurred.
pub fn decompose_lifted<F>(
    core: ArrayView2<'_, f64>,
    lift: ArrayView2<'_, f64>,
    k: usize,
    opts: &SpectralOptions,
    action: F,
) -> Result<SpectralResult>
where
    F: Fn(ArrayView1<'_, f64>) -> Array1<f64>,
{
    if lift.ncols() != core.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "lift is {}x{} but core is {}x{}",
            lift.nrows(),
            lift.ncols(),
            core.nrows(),
            core.ncols()
        )));
    }
    assemble(core, Some(lift), k, opts, action)
}

fn assemble<F>(
    core: ArrayView2<'_, f64>,
    lift: Option<ArrayView2<'_, f64>>,
    k: usize,
    opts: &SpectralOptions,
    action: F,
) -> Result<SpectralResult>
where
    F: Fn(ArrayView1<'_, f64>) -> Array1<f64>,
{
    if k == 0 {
        return Err(Error::invalid("must retain at least one eigenpair"));
    }
    if k > core.nrows() {
        return Err(Error::invalid(format!(
            "cannot retain {k} eigenpairs of a {} x {} matrix",
            core.nrows(),
            core.ncols()
        )));
    }
    let (vals, vecs) = eig_sorted(core)?;
    let rank_hint = vals.iter().filter(|l| l.norm() > opts.rank_floor).count();
    let truncated = k > rank_hint;
    let retain = k.min(rank_hint).max(1);

    let out_dim = lift.map_or(core.nrows(), |l| l.nrows());
    let mut vectors = Array2::zeros((out_dim, retain));
    let mut max_imag_ratio = 0.0f64;
    let mut max_residual = 0.0f64;

    // The second slot of a conjugate pair stores the imaginary part, so the
    // pair's two columns span its real invariant subspace. LAPACK emits the
    // pair adjacently and exactly conjugate, and the sort keeps it adjacent.
    let mut store_imag = vec![false; retain];
    for j in 1..retain {
        store_imag[j] = !store_imag[j - 1]
            && vals[j].im != 0.0
            && vals[j].re == vals[j - 1].re
            && vals[j].im == -vals[j - 1].im;
    }

    for j in 0..retain {
        let lambda = vals[j];
        let v = vecs.column(j);
        let (re, im) = match lift {
            Some(l) => {
                let vr = Array1::from_iter(v.iter().map(|c| c.re));
                let vi = Array1::from_iter(v.iter().map(|c| c.im));
                (l.dot(&vr), l.dot(&vi))
            }
            None => (
                Array1::from_iter(v.iter().map(|c| c.re)),
                Array1::from_iter(v.iter().map(|c| c.im)),
            ),
        };
        // Complex residual ||A u - lambda u|| / ||u|| via two real actions.
        let norm_sq: f64 = re.iter().map(|x| x * x).sum::<f64>()
            + im.iter().map(|x| x * x).sum::<f64>();
        let norm = norm_sq.sqrt();
        if norm < 1e-300 {
            return Err(Error::Solver(format!(
                "eigenvector {j} vanished after lifting"
            )));
        }
        let are = action(re.view());
        let aim = action(im.view());
        let mut rsq = 0.0f64;
        for i in 0..out_dim {
            let dre = are[i] - (lambda.re * re[i] - lambda.im * im[i]);
            let dim_ = aim[i] - (lambda.re * im[i] + lambda.im * re[i]);
            rsq += dre * dre + dim_ * dim_;
        }
        let residual = rsq.sqrt() / norm;
        max_residual = max_residual.max(residual);
        if residual > opts.residual_tolerance {
            return Err(Error::Solver(format!(
                "eigenpair {j} residual {residual:.3e} exceeds {:.1e}",
                opts.residual_tolerance
            )));
        }
        if lambda.norm() > 0.0 {
            max_imag_ratio = max_imag_ratio.max(lambda.im.abs() / lambda.norm());
        }

        // Store the chosen component, unit norm, deterministic sign.
        let comp = if store_imag[j] { &im } else { &re };
        let comp_norm = comp.iter().map(|x| x * x).sum::<f64>().sqrt();
        if comp_norm < 1e-12 {
            return Err(Error::Solver(format!(
                "eigenvector {j} has a vanishing {} part",
                if store_imag[j] { "imaginary" } else { "real" }
            )));
        }
        let mut best = 0usize;
        for (i, x) in comp.iter().enumerate() {
            if x.abs() > comp[best].abs() {
                best = i;
            }
        }
        let sign = if comp[best] >= 0.0 { 1.0 } else { -1.0 };
        let scale = sign / comp_norm;
        for i in 0..out_dim {
            vectors[[i, j]] = comp[i] * scale;
        }
    }

    let spectral_gap = if vals.len() >= 2 {
        vals[0].norm() - vals[1].norm()
    } else {
        0.0
    };
    Ok(SpectralResult {
        eigenvalues: vals,
        vectors,
        rank_hint,
        max_imag_ratio,
        imag_warning: max_imag_ratio > opts.imag_tolerance,
        max_residual,
        spectral_gap,
        truncated,
    })
}
