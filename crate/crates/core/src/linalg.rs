//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! The phase space is ℝⁿ with the Euclidean norm, so operator norms are
//! spectral norms (largest singular value).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Spectral norm of `m`.
pub fn operator_norm(m: &Matrix) -> Result<f64> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("operator_norm: non-finite entry".into()));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    if m.ncols() == 1 || m.nrows() == 1 {
        return Ok(m.norm());
    }
    let sv = m
        .clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("operator_norm: SVD did not converge".into()))?;
    Ok(sv.singular_values.max())
}

pub fn inverse(m: &Matrix) -> Result<Matrix> {
    if m.nrows() == 1 {
        let x = m[(0, 0)];
        if x == 0.0 || !x.is_finite() {
            return Err(Error::SingularMatrix(format!("scalar {x}")));
        }
        return Ok(Matrix::from_element(1, 1, 1.0 / x));
    }
    m.clone()
        .lu()
        .try_inverse()
        .filter(|inv| inv.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::SingularMatrix(format!("{}x{} matrix not invertible", m.nrows(), m.ncols())))
}

/// Singular values in ascending order together with the matching right
/// singular vectors (as columns).
pub fn right_singular_pairs(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    let n = m.ncols();
    let svd = m
        .clone()
        .try_svd(false, true, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let v_t = svd.v_t.expect("requested v_t");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let values = order.iter().map(|&i| svd.singular_values[i]).collect();
    let mut vecs = Matrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vecs.set_column(col, &v_t.row(i).transpose());
    }
    Ok((values, vecs))
}

/// Rank of a projection, counting singular values above 1/2 (nonzero
/// singular values of a projection are at least one).
pub fn projection_rank(p: &Matrix) -> Result<usize> {
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("projection has non-finite entries".into()));
    }
    let sv = p
        .clone()
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    Ok(sv.singular_values.iter().filter(|&&s| s > 0.5).count())
}

/// Largest principal angle (radians) between the column spans of two
/// matrices with orthonormal columns.
pub fn principal_angle(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(Error::InvalidArgument("subspaces of different dimension".into()));
    }
    if a.ncols() == 0 {
        return Ok(0.0);
    }
    let cross = a.transpose() * b;
    let sv = cross
        .try_svd(false, false, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let smallest = sv.singular_values.min().clamp(0.0, 1.0);
    // acos loses precision near 1; use the sine of the angle instead.
    Ok((1.0 - smallest * smallest).max(0.0).sqrt().asin())
}

/// Planar rotation by `angle`.
pub fn rotation2(angle: f64) -> Matrix {
    let (s, c) = angle.sin_cos();
    Matrix::from_row_slice(2, 2, &[c, -s, s, c])
}

/// Rows of `m`, for serialization.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn serialize_rows<S: serde::Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde::Serialize::serialize(&to_rows(m), s)
}

pub(crate) fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}
