//! Comparison quantities for spectra and embeddings.
//!
//! Three measures quantify how close two diffusion models are: per-index
//! relative eigenvalue differences, per-index eigenvector alignments
//! (absolute normalized inner products, sign-blind), and an embedding
//! similarity that first aligns one embedding to the other over the full
//! orthogonal group (rotations and reflections) and then averages the
//! per-sample distances. A subspace alignment handles symmetric manifolds
//! whose repeated eigenvalues make individual eigenvectors unidentifiable.
//!
//! The orthogonal alignment minimizes the Frobenius objective in closed form
//! (SVD of the cross-covariance); the reported value is the mean of
//! per-sample 2-norms at that alignment, which has no closed-form minimizer
//! of its own. A brute-force grid search over O(2) in the tests bounds the
//! gap between the two objectives.

use ndarray::{Array2, ArrayView1, ArrayView2};
use ndarray_linalg::{QR, SVD};
use num_complex::Complex64;

use crate::{Error, Result};

/// Bundle of the comparison quantities for one model pair.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ComparisonReport {
    /// Per-index |lambda - mu| / |mu|.
    pub eigenvalue_ratios: Vec<f64>,
    /// Per-index absolute normalized inner products.
    pub eigenvector_alignments: Vec<f64>,
    /// Mean per-sample distance after orthogonal alignment.
    pub embedding_similarity: f64,
    /// Embedding dimension the similarity was computed at.
    pub q: usize,
}

/// Relative eigenvalue differences |lambda_l - mu_l| / |mu_l| at the given
/// indices, using complex moduli. `reference` supplies the mu values.
pub fn eigenvalue_diff_ratio(
    test: &[Complex64],
    reference: &[Complex64],
    indices: &[usize],
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(indices.len());
    for &l in indices {
        if l >= test.len() || l >= reference.len() {
            return Err(Error::invalid(format!(
                "eigenvalue index {l} out of range ({} and {} values)",
                test.len(),
                reference.len()
            )));
        }
        let modulus = reference[l].norm();
        if modulus <= 1e-12 {
            return Err(Error::UndefinedRatio { index: l, modulus });
        }
        out.push((test[l] - reference[l]).norm() / modulus);
    }
    Ok(out)
}

/// Absolute normalized inner product of two real vectors, in [0, 1].
pub fn eigenvector_alignment(u: ArrayView1<'_, f64>, v: ArrayView1<'_, f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(format!(
            "vectors of lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    let nu = u.dot(&u).sqrt();
    let nv = v.dot(&v).sqrt();
    if nu <= 0.0 || nv <= 0.0 {
        return Err(Error::invalid("alignment of a zero vector is undefined"));
    }
    Ok((u.dot(&v).abs() / (nu * nv)).clamp(0.0, 1.0))
}

/// Columnwise alignments of two matrices with matching shapes.
pub fn alignments_per_column(
    u: ArrayView2<'_, f64>,
    v: ArrayView2<'_, f64>,
) -> Result<Vec<f64>> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrices of shapes {:?} and {:?}",
            u.dim(),
            v.dim()
        )));
    }
    (0..u.ncols())
        .map(|j| eigenvector_alignment(u.column(j), v.column(j)))
        .collect()
}

fn orthonormal_basis(a: ArrayView2<'_, f64>, what: &str) -> Result<Array2<f64>> {
    if a.nrows() < a.ncols() {
        return Err(Error::invalid(format!(
            "{what}: need at least as many rows as columns, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let (q, r) = a
        .to_owned()
        .qr()
        .map_err(|e| Error::Solver(format!("QR factorization failed: {e}")))?;
    let diag: Vec<f64> = (0..r.ncols()).map(|i| r[[i, i]].abs()).collect();
    let max = diag.iter().cloned().fold(0.0f64, f64::max);
    if max <= 0.0 || diag.iter().any(|d| *d <= 1e-10 * max) {
        return Err(Error::invalid(format!("{what} is rank deficient")));
    }
    Ok(q)
}

/// Product of the cosines of the principal angles between the column spans,
/// in [0, 1]; 1 means identical spans.
pub fn subspace_alignment(u: ArrayView2<'_, f64>, v: ArrayView2<'_, f64>) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimensionMismatch(format!(
            "matrices of shapes {:?} and {:?}",
            u.dim(),
            v.dim()
        )));
    }
    if u.ncols() == 0 {
        return Err(Error::invalid("subspace alignment needs at least one column"));
    }
    let qu = orthonormal_basis(u, "first matrix")?;
    let qv = orthonormal_basis(v, "second matrix")?;
    let c = qu.t().dot(&qv);
    let (_, s, _) = c
        .svd(false, false)
        .map_err(|e| Error::Solver(format!("SVD failed: {e}")))?;
    Ok(s.iter().map(|x| x.clamp(0.0, 1.0)).product())
}

/// Orthogonal matrix (rotation or reflection) minimizing the Frobenius
/// misfit of `e2` rows mapped onto `e1` rows.
fn procrustes(e1: ArrayView2<'_, f64>, e2: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    // Maximize tr(A O^T) with A = E1^T E2: O* = U V^T from A's SVD.
    let a = e1.t().dot(&e2);
    let (u, _, vt) = a
        .svd(true, true)
        .map_err(|e| Error::Solver(format!("SVD failed: {e}")))?;
    let u = u.expect("requested U");
    let vt = vt.expect("requested V^T");
    Ok(u.dot(&vt))
}

/// Mean per-sample 2-norm distance between the embeddings after the best
/// orthogonal alignment of the second onto the first. Zero for identical
/// embeddings; invariant to any orthogonal transform of either input.
pub fn embedding_similarity(e1: ArrayView2<'_, f64>, e2: ArrayView2<'_, f64>) -> Result<f64> {
    if e1.dim() != e2.dim() {
        return Err(Error::DimensionMismatch(format!(
            "embeddings of shapes {:?} and {:?}",
            e1.dim(),
            e2.dim()
        )));
    }
    if e1.nrows() == 0 || e1.ncols() == 0 {
        return Err(Error::invalid("embeddings must be nonempty"));
    }
    let o = procrustes(e1, e2)?;
    // Rows are points, so applying O to each point is E2 * O^T.
    let aligned = e2.dot(&o.t());
    let n = e1.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let mut d2 = 0.0;
        for j in 0..e1.ncols() {
            let d = e1[[i, j]] - aligned[[i, j]];
            d2 += d * d;
        }
        total += d2.sqrt();
    }
    Ok(total / n as f64)
}
