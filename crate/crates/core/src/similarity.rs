//! Similarity of two admissible behaviors.
//!
//! Two behaviors are similar when they share at least one trajectory. How
//! similar they are is measured by the cosines of the principal angles
//! between their subspace components, obtained from the SVD of `H₁ᵀ H₂`.

use nalgebra::{DMatrix, DVector};

use crate::behavior::{column_sign, BehaviorDecomposition};
use crate::error::{Error, Result};
use crate::linalg::{pinv_solve, thin_svd};
use crate::system_model::LiftedOperators;

/// Relative residual tolerance for the common-trajectory test.
pub const DEFAULT_SIMILARITY_TOL: f64 = 1e-8;

/// Result of searching for a trajectory admissible for both systems.
#[derive(Clone, Debug)]
pub struct SimilarityCheck {
    pub similar: bool,
    /// A common trajectory, present only when `similar`.
    pub witness: Option<DVector<f64>>,
    /// Least-squares defect of the stacked system
    /// `[[-G₁, I], [-G₂, I]] w = [L₁x₁; L₂x₂]`.
    pub residual: f64,
}

/// Least-squares test for a common trajectory of two behaviors.
///
/// For a fixed input `u` the best output is the mean of the two predicted
/// outputs, which leaves a stacked defect of `‖(G₁ - G₂) u - (L₂x₂ - L₁x₁)‖ / √2`.
/// Minimizing that over `u` is a least-squares problem in the input alone,
/// solved here with the minimum-norm pseudo-inverse.
pub fn check_similar(
    host: &LiftedOperators,
    x_host: &DVector<f64>,
    guest: &LiftedOperators,
    x_guest: &DVector<f64>,
    tol: f64,
) -> Result<SimilarityCheck> {
    host.check_compatible(guest)?;
    Error::check_len("host initial state", host.n_x, x_host.len())?;
    Error::check_len("guest initial state", guest.n_x, x_guest.len())?;

    let free_host = &host.l * x_host;
    let free_guest = &guest.l * x_guest;
    let gap = &free_guest - &free_host;
    let diff = &host.g - &guest.g;
    let u = pinv_solve(&diff, &gap)?;

    let y_host = &host.g * &u + &free_host;
    let y_guest = &guest.g * &u + &free_guest;
    let residual = (&y_host - &y_guest).norm() / std::f64::consts::SQRT_2;

    let rhs_norm = (free_host.norm_squared() + free_guest.norm_squared()).sqrt();
    let similar = residual <= tol * (1.0 + rhs_norm);
    let witness = similar.then(|| {
        let y = (y_host + y_guest) * 0.5;
        DVector::from_iterator(u.len() + y.len(), u.iter().chain(y.iter()).copied())
    });
    Ok(SimilarityCheck {
        similar,
        witness,
        residual,
    })
}

/// Similarity verdict, indexes and principal vectors for a host/guest pair.
#[derive(Clone, Debug)]
pub struct SimilarityReport {
    pub similar: bool,
    pub witness: Option<DVector<f64>>,
    pub feasibility_residual: f64,
    /// Similarity indexes `s₁ >= … >= s_{n_u T}`, each in `[0, 1]`.
    pub s: DVector<f64>,
    /// Principal vectors of the host subspace, `H₁ U`.
    pub p_host: DMatrix<f64>,
    /// Principal vectors of the guest subspace, `H₂ V`.
    pub p_guest: DMatrix<f64>,
    /// Left singular vectors of `H₁ᵀ H₂`.
    pub u: DMatrix<f64>,
    /// Right singular vectors of `H₁ᵀ H₂`.
    pub v: DMatrix<f64>,
}

impl SimilarityReport {
    /// Build the full report with the host as the first operand.
    pub fn compute(
        host: &BehaviorDecomposition,
        guest: &BehaviorDecomposition,
        tol: f64,
    ) -> Result<Self> {
        let check = check_similar(host.lifted(), host.x0(), guest.lifted(), guest.x0(), tol)?;
        let (s, u, v) = principal_cosines(host.basis(), guest.basis())?;
        let p_host = host.basis() * &u;
        let p_guest = guest.basis() * &v;
        Ok(Self {
            similar: check.similar,
            witness: check.witness,
            feasibility_residual: check.residual,
            s,
            p_host,
            p_guest,
            u,
            v,
        })
    }

    /// Principal angles `θ_k = acos(s_k)` in radians, ascending.
    pub fn angles(&self) -> DVector<f64> {
        self.s.map(f64::acos)
    }

    /// `diag(s)`.
    pub fn d_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.s)
    }

    pub fn mean_index(&self) -> f64 {
        self.s.mean()
    }
}

/// Report with the default similarity tolerance.
pub fn similarity_indexes(
    host: &BehaviorDecomposition,
    guest: &BehaviorDecomposition,
) -> Result<SimilarityReport> {
    SimilarityReport::compute(host, guest, DEFAULT_SIMILARITY_TOL)
}

/// Cosines of the principal angles between `span(h1)` and `span(h2)` (both
/// with orthonormal columns) together with the singular vectors of `h1ᵀ h2`.
///
/// Values are sorted descending and clamped to `[0, 1]`. Each pair of singular
/// vectors is signed so that the matching column of `h1 U` has a positive
/// largest-magnitude entry.
pub fn principal_cosines(
    h1: &DMatrix<f64>,
    h2: &DMatrix<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if h1.shape() != h2.shape() {
        return Err(Error::Incompatible(format!(
            "subspace bases have shapes {:?} and {:?}",
            h1.shape(),
            h2.shape()
        )));
    }
    let svd = thin_svd(&h1.tr_mul(h2))?;
    let s = svd.s.map(|c| c.clamp(0.0, 1.0));
    let (mut u, mut v) = (svd.u, svd.v);
    let principal = h1 * &u;
    for (j, col) in principal.column_iter().enumerate() {
        if column_sign(col) < 0.0 {
            u.column_mut(j).neg_mut();
            v.column_mut(j).neg_mut();
        }
    }
    Ok((s, u, v))
}

/// Cosines of the principal angles computed straight from the recursive
/// max-min definition, by exhaustive search over sampled unit vectors.
///
/// Intended as a test oracle for small ambient dimensions (at most 3). Each
/// step searches both current subspaces on a grid of `grid_count` unit vectors
/// per dimension-2 or dimension-3 subspace, keeps the best pair and removes
/// it from both subspaces before the next step.
pub fn principal_angles_bruteforce(
    h1: &DMatrix<f64>,
    h2: &DMatrix<f64>,
    grid_count: usize,
) -> Result<Vec<f64>> {
    let n = h1.nrows();
    if n > 3 {
        return Err(Error::AmbientTooLarge(n));
    }
    if h2.nrows() != n || h1.ncols() != h2.ncols() {
        return Err(Error::Incompatible(format!(
            "subspace bases have shapes {:?} and {:?}",
            h1.shape(),
            h2.shape()
        )));
    }
    if grid_count == 0 {
        return Err(Error::InvalidParameter(
            "grid_count must be positive".into(),
        ));
    }
    let mut w1 = orthonormal_columns(h1.column_iter().map(|c| c.into_owned()));
    let mut w2 = orthonormal_columns(h2.column_iter().map(|c| c.into_owned()));
    let dim = w1.len();
    if w2.len() != dim {
        return Err(Error::Incompatible("subspaces differ in dimension".into()));
    }

    let mut cosines = Vec::with_capacity(dim);
    for _ in 0..dim {
        let xs = unit_samples(&w1, grid_count);
        let ys = unit_samples(&w2, grid_count);
        let mut best = (f64::NEG_INFINITY, 0, 0);
        for (i, x) in xs.iter().enumerate() {
            for (j, y) in ys.iter().enumerate() {
                let c = x.dot(y);
                if c > best.0 {
                    best = (c, i, j);
                }
            }
        }
        cosines.push(best.0.clamp(0.0, 1.0));
        w1 = deflate(&w1, &xs[best.1]);
        w2 = deflate(&w2, &ys[best.2]);
    }
    cosines.sort_by(|a, b| b.total_cmp(a));
    Ok(cosines)
}

fn orthonormal_columns(cols: impl Iterator<Item = DVector<f64>>) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    for mut v in cols {
        for q in &out {
            let p = q.dot(&v);
            v.axpy(-p, q, 1.0);
        }
        let n = v.norm();
        if n > 1e-10 {
            out.push(v / n);
        }
    }
    out
}

/// Orthonormal basis of `span(basis) ∩ x^⊥` for a unit `x` in the span.
fn deflate(basis: &[DVector<f64>], x: &DVector<f64>) -> Vec<DVector<f64>> {
    let mut all = orthonormal_columns(std::iter::once(x.clone()).chain(basis.iter().cloned()));
    all.remove(0);
    all.truncate(basis.len().saturating_sub(1));
    all
}

fn unit_samples(basis: &[DVector<f64>], grid_count: usize) -> Vec<DVector<f64>> {
    let combine = |coeffs: &[f64]| {
        basis
            .iter()
            .zip(coeffs)
            .fold(DVector::zeros(basis[0].len()), |acc, (q, &c)| acc + q * c)
    };
    match basis.len() {
        0 => Vec::new(),
        1 => vec![basis[0].clone(), -&basis[0]],
        2 => (0..grid_count)
            .map(|i| {
                let phi = std::f64::consts::TAU * i as f64 / grid_count as f64;
                combine(&[phi.cos(), phi.sin()])
            })
            .collect(),
        _ => {
            // Fibonacci lattice on the sphere.
            let golden = std::f64::consts::PI * (3.0 - 5.0_f64.sqrt());
            (0..grid_count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / grid_count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let phi = golden * i as f64;
                    combine(&[r * phi.cos(), r * phi.sin(), z])
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system_model::LtvSystem;

    fn feedthrough(d: f64, x0: f64) -> LtvSystem {
        let s = |v: f64| DMatrix::from_element(1, 1, v);
        LtvSystem::time_invariant(
            s(0.0),
            s(0.0),
            s(1.0),
            s(d),
            DVector::from_element(1, x0),
            1,
        )
        .unwrap()
    }

    fn dec(sys: &LtvSystem) -> BehaviorDecomposition {
        BehaviorDecomposition::new(&sys.lift(), sys.x0()).unwrap()
    }

    #[test]
    fn identical_behaviors_are_similar_with_offset_witness() {
        let sys = feedthrough(0.5, 2.0);
        let d = dec(&sys);
        let check = check_similar(d.lifted(), d.x0(), d.lifted(), d.x0(), 1e-8).unwrap();
        assert!(check.similar);
        assert_eq!(check.residual, 0.0);
        assert_eq!(check.witness.unwrap(), *d.offset());

        let report = similarity_indexes(&d, &d).unwrap();
        assert!(report.s.iter().all(|&s| (s - 1.0).abs() < 1e-12));
        assert!((&report.p_host - &report.p_guest).amax() < 1e-12);
    }

    #[test]
    fn conflicting_free_responses_are_dissimilar() {
        let one = feedthrough(0.0, 1.0);
        let two = feedthrough(0.0, 2.0);
        let (l1, l2) = (one.lift(), two.lift());
        assert!(
            check_similar(&l1, one.x0(), &l1, one.x0(), 1e-8)
                .unwrap()
                .similar
        );
        let check = check_similar(&l1, one.x0(), &l2, two.x0(), 1e-8).unwrap();
        assert!(!check.similar);
        assert!(check.witness.is_none());
        assert!((check.residual - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn opposite_feedthrough_is_orthogonal() {
        let report =
            similarity_indexes(&dec(&feedthrough(1.0, 0.0)), &dec(&feedthrough(-1.0, 0.0)))
                .unwrap();
        assert_eq!(report.s.len(), 1);
        assert!(report.s[0].abs() < 1e-15);
        assert!((report.angles()[0] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn zero_vs_unit_feedthrough_is_45_degrees() {
        let report =
            similarity_indexes(&dec(&feedthrough(0.0, 0.0)), &dec(&feedthrough(1.0, 0.0))).unwrap();
        assert!((report.s[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn mismatched_horizons_rejected() {
        let s = |v: f64| DMatrix::from_element(1, 1, v);
        let long = LtvSystem::time_invariant(s(1.0), s(1.0), s(1.0), s(0.0), DVector::zeros(1), 2)
            .unwrap();
        let a = dec(&feedthrough(0.0, 0.0));
        let b = dec(&long);
        assert!(matches!(
            similarity_indexes(&a, &b),
            Err(Error::Incompatible(_))
        ));
    }

    #[test]
    fn bruteforce_line_cases() {
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let diag = DMatrix::from_column_slice(2, 1, &[1.0, 1.0]) / 2.0_f64.sqrt();
        let same = principal_angles_bruteforce(&e1, &e1, 10_000).unwrap();
        assert!((same[0] - 1.0).abs() < 1e-12);
        let c = principal_angles_bruteforce(&e1, &diag, 10_000).unwrap();
        assert!((c[0] - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-3);
    }

    #[test]
    fn bruteforce_planes_in_r3_match_svd() {
        let h1 = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let raw = DMatrix::from_column_slice(3, 2, &[1.0, 0.2, 0.5, -0.3, 1.0, 0.8]);
        let h2 = raw.qr().q();
        let brute = principal_angles_bruteforce(&h1, &h2, 2_000).unwrap();
        let (s, _, _) = principal_cosines(&h1, &h2).unwrap();
        assert_eq!(brute.len(), 2);
        for (b, s) in brute.iter().zip(s.iter()) {
            // grid spacing 2π/2000 bounds the cosine error by ~1e-5
            assert!((b - s).abs() < 1e-4, "{b} vs {s}");
        }
    }

    #[test]
    fn bruteforce_rejects_large_ambient() {
        let h = DMatrix::identity(4, 1);
        assert!(matches!(
            principal_angles_bruteforce(&h, &h, 10),
            Err(Error::AmbientTooLarge(4))
        ));
    }
}
