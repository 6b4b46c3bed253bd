//! Transfer of a guest trajectory to the host by projection onto the host
//! behavior, expressed through similarity indexes and principal vectors.
//!
//! With `w_g = H₂ V ḡ + w₂,off`, the closest host-admissible trajectory is
//!
//! ```text
//! w_h = H₁ U D ḡ + P_W₁(w₂,off - w₁,off) + w₁,off
//! ```
//!
//! where `D = diag(s)`. Only `ḡ` depends on the task, so the remaining terms
//! are built once per host/guest pair in [`TransferPlan`].

use log::warn;
use nalgebra::{DMatrix, DVector};

use crate::behavior::{project_subspace, BehaviorDecomposition, DEFAULT_MEMBERSHIP_TOL};
use crate::error::{Error, Result};
use crate::similarity::SimilarityReport;
use crate::system_model::LiftedOperators;

/// Relative residual allowed when reading a guest trajectory in principal coordinates.
pub const DEFAULT_EXPERIENCE_TOL: f64 = 1e-8;

const REPORT_MATCH_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferOptions {
    /// Relative tolerance on the guest decomposition defect.
    pub experience_tol: f64,
    /// Relative tolerance used to report host admissibility.
    pub membership_tol: f64,
    /// Proceed (with a warning) even if the behaviors share no trajectory.
    pub allow_dissimilar: bool,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self {
            experience_tol: DEFAULT_EXPERIENCE_TOL,
            membership_tol: DEFAULT_MEMBERSHIP_TOL,
            allow_dissimilar: false,
        }
    }
}

/// Guest trajectory expressed in the guest's principal-vector coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct Experience {
    pub g_bar: DVector<f64>,
    /// `‖H₂ V ḡ + w₂,off - w_g‖`.
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TransferResult {
    pub w_h: DVector<f64>,
    pub g_bar: DVector<f64>,
    pub guest_residual: f64,
    pub host_residual: f64,
    pub host_admissible: bool,
    /// `‖w_g - w_h‖`.
    pub distance: f64,
}

/// `ḡ = (H₂ V)ᵀ (w_g - w₂,off)`; fails when `w_g` is not in the guest behavior.
pub fn extract_experience(
    guest: &BehaviorDecomposition,
    report: &SimilarityReport,
    w_g: &DVector<f64>,
    tol: f64,
) -> Result<Experience> {
    Error::check_len("guest trajectory", guest.trajectory_len(), w_g.len())?;
    if report.p_guest.nrows() != w_g.len() {
        return Err(Error::MismatchedReport(
            "guest principal vectors have the wrong length",
        ));
    }
    experience_from(&report.p_guest, guest.offset(), w_g, tol)
}

fn experience_from(
    p_guest: &DMatrix<f64>,
    guest_offset: &DVector<f64>,
    w_g: &DVector<f64>,
    tol: f64,
) -> Result<Experience> {
    let shifted = w_g - guest_offset;
    let g_bar = p_guest.tr_mul(&shifted);
    let residual = (p_guest * &g_bar - shifted).norm();
    let bound = tol * (1.0 + w_g.norm());
    if residual > bound {
        return Err(Error::InadmissibleExperience { residual, bound });
    }
    Ok(Experience { g_bar, residual })
}

/// Task-independent part of the transfer for one host/guest pair.
#[derive(Clone, Debug)]
pub struct TransferPlan {
    host: BehaviorDecomposition,
    /// `H₁ U D`.
    scaled_host_principal: DMatrix<f64>,
    /// `H₂ V`.
    guest_principal: DMatrix<f64>,
    guest_offset: DVector<f64>,
    /// `P_W₁(w₂,off - w₁,off) + w₁,off`.
    offset_term: DVector<f64>,
    options: TransferOptions,
}

impl TransferPlan {
    /// `report` must come from `SimilarityReport::compute(host, guest, _)`
    /// with the host first.
    pub fn new(
        host: &BehaviorDecomposition,
        guest: &BehaviorDecomposition,
        report: &SimilarityReport,
        options: TransferOptions,
    ) -> Result<Self> {
        check_report(host, guest, report)?;
        if !report.similar {
            if !options.allow_dissimilar {
                return Err(Error::NotSimilar {
                    residual: report.feasibility_residual,
                });
            }
            warn!(
                "transferring between dissimilar behaviors (common-trajectory residual {:e})",
                report.feasibility_residual
            );
        }
        let scaled_host_principal = &report.p_host * report.d_matrix();
        let offset_gap = guest.offset() - host.offset();
        let offset_term = project_subspace(host.basis(), &offset_gap)? + host.offset();
        Ok(Self {
            host: host.clone(),
            scaled_host_principal,
            guest_principal: report.p_guest.clone(),
            guest_offset: guest.offset().clone(),
            offset_term,
            options,
        })
    }

    pub fn offset_term(&self) -> &DVector<f64> {
        &self.offset_term
    }

    pub fn transfer(&self, w_g: &DVector<f64>) -> Result<TransferResult> {
        Error::check_len("guest trajectory", self.guest_offset.len(), w_g.len())?;
        let exp = experience_from(
            &self.guest_principal,
            &self.guest_offset,
            w_g,
            self.options.experience_tol,
        )?;
        let w_h = &self.scaled_host_principal * &exp.g_bar + &self.offset_term;
        let membership = self.host.contains(&w_h, self.options.membership_tol)?;
        if !membership.member {
            warn!(
                "host trajectory misses the host behavior by {:e}",
                membership.residual
            );
        }
        let distance = (w_g - &w_h).norm();
        Ok(TransferResult {
            w_h,
            g_bar: exp.g_bar,
            guest_residual: exp.residual,
            host_residual: membership.residual,
            host_admissible: membership.member,
            distance,
        })
    }
}

/// One-shot transfer of `w_g` from the guest to the host.
pub fn similarity_based_learning(
    host: &BehaviorDecomposition,
    guest: &BehaviorDecomposition,
    report: &SimilarityReport,
    w_g: &DVector<f64>,
    options: TransferOptions,
) -> Result<TransferResult> {
    TransferPlan::new(host, guest, report, options)?.transfer(w_g)
}

fn check_report(
    host: &BehaviorDecomposition,
    guest: &BehaviorDecomposition,
    report: &SimilarityReport,
) -> Result<()> {
    let k = host.basis().ncols();
    if guest.basis().shape() != host.basis().shape()
        || report.u.shape() != (k, k)
        || report.v.shape() != (k, k)
        || report.s.len() != k
    {
        return Err(Error::MismatchedReport("dimensions differ"));
    }
    if (host.basis() * &report.u - &report.p_host).amax() > REPORT_MATCH_TOL {
        return Err(Error::MismatchedReport("host principal vectors differ"));
    }
    if (guest.basis() * &report.v - &report.p_guest).amax() > REPORT_MATCH_TOL {
        return Err(Error::MismatchedReport("guest principal vectors differ"));
    }
    Ok(())
}

/// Closest host-admissible trajectory to `w_g`, from the equality-constrained
/// least-squares normal equations with `M = [-G, I]`, `b = L x0`:
/// `w = w_g - Mᵀ (M Mᵀ)⁻¹ (M w_g - b)`.
///
/// Independent of the subspace basis and of any similarity data.
pub fn constrained_projection_oracle(
    host: &LiftedOperators,
    x0: &DVector<f64>,
    w_g: &DVector<f64>,
) -> Result<DVector<f64>> {
    Error::check_len("guest trajectory", host.trajectory_len(), w_g.len())?;
    Error::check_len("initial state", host.n_x, x0.len())?;
    let m = host.constraint_matrix();
    let b = &host.l * x0;
    let gram = &m * m.transpose();
    let chol = gram.cholesky().ok_or_else(|| {
        Error::InvalidParameter("constraint Gram matrix is not positive definite".into())
    })?;
    let multipliers = chol.solve(&(&m * w_g - b));
    Ok(w_g - m.tr_mul(&multipliers))
}
