use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Thin SVD `m = U diag(s) Vᵀ`, singular values in nonincreasing order.
///
/// Backed by faer. nalgebra's implicit-shift SVD can stall on clustered
/// singular values near 1, which is exactly the regime of nearly aligned
/// subspaces.
pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v: DMatrix<f64>,
}

pub(crate) fn thin_svd(m: &DMatrix<f64>) -> Result<ThinSvd> {
    let (rows, cols) = m.shape();
    let k = rows.min(cols);
    if k == 0 {
        return Ok(ThinSvd {
            u: DMatrix::zeros(rows, 0),
            s: DVector::zeros(0),
            v: DMatrix::zeros(cols, 0),
        });
    }
    let a = faer::Mat::<f64>::from_fn(rows, cols, |i, j| m[(i, j)]);
    let svd = a
        .thin_svd()
        .map_err(|_| Error::NoConvergence("singular value decomposition"))?;
    let (u, v) = (svd.U(), svd.V());
    let s = svd.S().column_vector();
    Ok(ThinSvd {
        u: DMatrix::from_fn(rows, k, |i, j| u[(i, j)]),
        s: DVector::from_fn(k, |i, _| s[i]),
        v: DMatrix::from_fn(cols, k, |i, j| v[(i, j)]),
    })
}

/// Minimum-norm least-squares solution of `m x ≈ b`.
///
/// Singular values below `max(rows, cols) · σ_max · ε` are treated as zero.
pub(crate) fn pinv_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if m.is_empty() || m.amax() == 0.0 {
        return Ok(DVector::zeros(m.ncols()));
    }
    let svd = thin_svd(m)?;
    let cutoff = m.nrows().max(m.ncols()) as f64 * svd.s[0] * f64::EPSILON;
    let mut coeffs = svd.u.tr_mul(b);
    for (c, &sigma) in coeffs.iter_mut().zip(svd.s.iter()) {
        *c = if sigma > cutoff { *c / sigma } else { 0.0 };
    }
    Ok(svd.v * coeffs)
}
