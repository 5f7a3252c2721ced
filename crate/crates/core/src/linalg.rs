//! Small dense helpers shared by the analysis modules. All norms are spectral.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest singular value. Zero for empty matrices.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |acc: f64, &s| acc.max(s))
}

/// Smallest singular value of a (possibly rectangular) matrix.
pub fn smallest_singular_value(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(f64::INFINITY, |acc: f64, &s| acc.min(s))
}

/// Spectral condition number.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().fold(0.0, |a: f64, &s| a.max(s));
    let min = sv.iter().fold(f64::INFINITY, |a: f64, &s| a.min(s));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Householder QR with the sign convention `diag(R) >= 0`, which makes the
/// factorization unique for invertible input.
pub fn qr_positive(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows().min(r.ncols()) {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    (q, r)
}

/// Haar-distributed orthogonal `d × d` matrix from a seeded ChaCha stream.
pub fn random_orthogonal(d: usize, seed: u64, stream: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let m = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    qr_positive(&m).0
}

/// Orthonormal basis of the column span of `m`, keeping column order
/// (Gram-Schmidt by QR). Assumes full column rank.
pub fn orthonormalize(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    qr_positive(m).0
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns `basis`.
pub fn orthogonal_complement(basis: &DMatrix<f64>) -> DMatrix<f64> {
    let d = basis.nrows();
    let k = basis.ncols();
    if k == 0 {
        return DMatrix::identity(d, d);
    }
    if k >= d {
        return DMatrix::zeros(d, 0);
    }
    let mut stacked = DMatrix::zeros(d, k + d);
    stacked.columns_mut(0, k).copy_from(basis);
    stacked.columns_mut(k, d).fill_with_identity();
    let q = stacked.qr().q();
    q.columns(k, d - k).into_owned()
}

/// Orthonormal basis of the numerical null space of `m`: right singular
/// vectors whose singular values fall below `rel_cutoff * max(1, sigma_max)`.
pub fn null_space(m: &DMatrix<f64>, rel_cutoff: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad to at least n rows so the thin SVD yields all n right singular vectors.
    let padded = if m.nrows() < n {
        let mut p = DMatrix::zeros(n, n);
        p.rows_mut(0, m.nrows()).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let sv = &svd.singular_values;
    let scale = sv.iter().fold(1.0f64, |a, &s| a.max(s));
    let cols: Vec<DVector<f64>> = (0..sv.len())
        .filter(|&i| sv[i] <= rel_cutoff * scale)
        .map(|i| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Principal angles (radians, ascending) between the spans of two matrices
/// with orthonormal columns.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Vec::new();
    }
    let product = a.transpose() * b;
    let mut angles: Vec<f64> = product
        .svd(false, false)
        .singular_values
        .iter()
        .map(|&s| s.clamp(-1.0, 1.0).acos())
        .collect();
    angles.sort_by(f64::total_cmp);
    angles
}

/// Largest principal angle between two equal-dimensional subspaces given by
/// orthonormal bases; `PI/2` when dimensions differ.
pub fn subspace_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return std::f64::consts::FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    // sin of the largest angle = ||(I - AA^T) B||, accurate for tiny angles.
    let residual = b - a * (a.transpose() * b);
    spectral_norm(&residual).clamp(0.0, 1.0).asin()
}

/// Smallest principal angle between two subspaces; `PI/2` if either is trivial.
pub fn min_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 || b.ncols() == 0 {
        return std::f64::consts::FRAC_PI_2;
    }
    // cos(theta_min) = sigma_max(A^T B); use sin via complement for accuracy near 0.
    let cos = spectral_norm(&(a.transpose() * b)).clamp(0.0, 1.0);
    let sin = (1.0 - cos * cos).max(0.0).sqrt();
    sin.atan2(cos)
}

/// Row-major nested rows from a matrix.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Matrix from row-major nested rows. Rows must share a length.
pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return None;
    }
    Some(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
