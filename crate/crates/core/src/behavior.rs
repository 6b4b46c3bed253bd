//! Admissible behavior of a system with a fixed initial state.
//!
//! The behavior `{w : [-G, I] w = L x0}` is an affine set. It is stored as an
//! orthonormal basis `H` of the kernel of `[-G, I]` plus the particular
//! solution `w_off = col(0, L x0)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::system_model::LiftedOperators;

/// Relative tolerance used for membership checks unless the caller overrides it.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-8;

/// How the kernel basis is orthonormalized. Both produce the same subspace;
/// they differ only in the order columns are processed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KernelBasis {
    /// Thin Householder QR of `col(I, G)`.
    #[default]
    Householder,
    /// Modified Gram-Schmidt over the columns of `col(I, G)`, last column first.
    ReverseGramSchmidt,
}

#[derive(Clone, Debug)]
pub struct BehaviorDecomposition {
    basis: DMatrix<f64>,
    offset: DVector<f64>,
    lifted: LiftedOperators,
    x0: DVector<f64>,
}

/// Outcome of a membership test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// `‖[-G, I] w - L x0‖`.
    pub residual: f64,
}

impl BehaviorDecomposition {
    pub fn new(lifted: &LiftedOperators, x0: &DVector<f64>) -> Result<Self> {
        Self::with_basis(lifted, x0, KernelBasis::default())
    }

    pub fn with_basis(
        lifted: &LiftedOperators,
        x0: &DVector<f64>,
        method: KernelBasis,
    ) -> Result<Self> {
        Error::check_len("initial state", lifted.n_x, x0.len())?;
        let (nu, ny) = (lifted.input_len(), lifted.output_len());

        // col(I, G): every column u maps to col(u, G u), which [-G, I] annihilates.
        let mut stacked = DMatrix::zeros(nu + ny, nu);
        stacked.view_mut((0, 0), (nu, nu)).fill_with_identity();
        stacked.view_mut((nu, 0), (ny, nu)).copy_from(&lifted.g);

        let mut basis = match method {
            KernelBasis::Householder => householder_basis(stacked)?,
            KernelBasis::ReverseGramSchmidt => reverse_gram_schmidt(stacked)?,
        };
        normalize_column_signs(&mut basis);

        let mut offset = DVector::zeros(nu + ny);
        offset.rows_mut(nu, ny).copy_from(&(&lifted.l * x0));

        Ok(Self {
            basis,
            offset,
            lifted: lifted.clone(),
            x0: x0.clone(),
        })
    }

    /// Orthonormal basis `H` (`n_w T x n_u T`) of the subspace component.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Particular solution `w_off = col(0, L x0)`.
    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn lifted(&self) -> &LiftedOperators {
        &self.lifted
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn trajectory_len(&self) -> usize {
        self.basis.nrows()
    }

    /// `L x0`, the right-hand side of the behavior's defining equation.
    pub fn free_response(&self) -> DVector<f64> {
        let nu = self.lifted.input_len();
        self.offset.rows(nu, self.lifted.output_len()).into_owned()
    }

    /// The member `H c + w_off` for subspace coordinates `c`.
    pub fn member(&self, coords: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_len("subspace coordinates", self.basis.ncols(), coords.len())?;
        Ok(&self.basis * coords + &self.offset)
    }

    /// Membership test: passes when `‖[-G, I] w - L x0‖ <= tol (1 + ‖L x0‖)`.
    pub fn contains(&self, w: &DVector<f64>, tol: f64) -> Result<Membership> {
        let residual = self.lifted.constraint_defect(w, &self.x0)?.norm();
        let bound = tol * (1.0 + self.free_response().norm());
        Ok(Membership {
            member: residual <= bound,
            residual,
        })
    }

    /// Closest admissible trajectory to `x`:
    /// `w_off + H Hᵀ (x - w_off)`.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Error::check_len("stacked trajectory", self.trajectory_len(), x.len())?;
        Ok(project_subspace(&self.basis, &(x - &self.offset))? + &self.offset)
    }
}

/// `H (Hᵀ z)` for a basis with orthonormal columns.
pub fn project_subspace(basis: &DMatrix<f64>, z: &DVector<f64>) -> Result<DVector<f64>> {
    Error::check_len("projected vector", basis.nrows(), z.len())?;
    Ok(basis * (basis.tr_mul(z)))
}

fn householder_basis(stacked: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ncols = stacked.ncols();
    let qr = stacked.qr();
    let r = qr.r();
    let scale = r.diagonal().amax().max(1.0);
    if let Some(k) = (0..ncols).find(|&k| r[(k, k)].abs() <= 1e-12 * scale) {
        return Err(Error::RankLoss(k));
    }
    Ok(qr.q())
}

fn reverse_gram_schmidt(stacked: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let ncols = stacked.ncols();
    let mut q = DMatrix::zeros(stacked.nrows(), ncols);
    for (slot, j) in (0..ncols).rev().enumerate() {
        let mut v = stacked.column(j).into_owned();
        let original = v.norm();
        // Two passes keep orthogonality at machine precision.
        for _ in 0..2 {
            for k in 0..slot {
                let qk = q.column(k);
                let proj = qk.dot(&v);
                v.axpy(-proj, &qk, 1.0);
            }
        }
        let n = v.norm();
        if n <= 1e-12 * original.max(1.0) {
            return Err(Error::RankLoss(j));
        }
        q.set_column(slot, &(v / n));
    }
    Ok(q)
}

/// Flip each column so its largest-magnitude entry is positive (first index
/// wins on ties).
pub(crate) fn normalize_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        if column_sign(col.as_view()) < 0.0 {
            col.neg_mut();
        }
    }
}

pub(crate) fn column_sign(col: nalgebra::DVectorView<'_, f64>) -> f64 {
    let mut best = 0.0_f64;
    for &v in col.iter() {
        if v.abs() > best.abs() {
            best = v;
        }
    }
    if best < 0.0 {
        -1.0
    } else {
        1.0
    }
}
