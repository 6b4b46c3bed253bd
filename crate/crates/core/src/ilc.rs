//! Gradient iterative learning control on the lifted model.
//!
//! Each trial applies `u_k`, measures `e_k = r - (G u_k + L x0)` and updates
//! `u_{k+1} = u_k + γ Gᵀ e_k`. For `0 < γ < 2 / σ_max(G)²` the error norm is
//! nonincreasing from trial to trial.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::thin_svd;
use crate::system_model::LiftedOperators;

pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_ERR_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct IlcConfig {
    /// Learning gain; `None` picks `1 / σ_max(G)²`.
    pub gamma: Option<f64>,
    pub max_iters: usize,
    /// Stop once `‖e_k‖ <= err_tol`.
    pub err_tol: f64,
    /// Initial input; zero when `None`.
    pub initial_input: Option<DVector<f64>>,
}

impl Default for IlcConfig {
    fn default() -> Self {
        Self {
            gamma: None,
            max_iters: DEFAULT_MAX_ITERS,
            err_tol: DEFAULT_ERR_TOL,
            initial_input: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct IlcRun {
    pub u_final: DVector<f64>,
    pub y_final: DVector<f64>,
    /// `‖e_k‖` for every trial, starting with the initial input; one entry
    /// more than `iterations`.
    pub error_norms: Vec<f64>,
    /// Number of input updates applied.
    pub iterations: usize,
    pub converged: bool,
    pub learning_gain: f64,
}

impl IlcRun {
    pub fn final_error(&self) -> f64 {
        *self
            .error_norms
            .last()
            .expect("at least one trial is recorded")
    }

    pub fn final_rms(&self) -> f64 {
        self.final_error() / (self.y_final.len() as f64).sqrt()
    }
}

/// Euclidean and RMS size of a tracking error `r - y`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrackingError {
    pub norm: f64,
    pub rms: f64,
}

pub fn tracking_error(y: &DVector<f64>, reference: &DVector<f64>) -> Result<TrackingError> {
    Error::check_len("output", reference.len(), y.len())?;
    let norm = (reference - y).norm();
    let rms = if y.is_empty() {
        0.0
    } else {
        norm / (y.len() as f64).sqrt()
    };
    Ok(TrackingError { norm, rms })
}

/// Largest stable gain `2 / σ_max(G)²`; infinite when `G = 0`.
pub fn gain_bound(lifted: &LiftedOperators) -> Result<f64> {
    let sigma = thin_svd(&lifted.g)?.s.max();
    Ok(if sigma > 0.0 {
        2.0 / (sigma * sigma)
    } else {
        f64::INFINITY
    })
}

pub fn gradient_ilc(
    lifted: &LiftedOperators,
    x0: &DVector<f64>,
    reference: &DVector<f64>,
    config: &IlcConfig,
) -> Result<IlcRun> {
    Error::check_len("reference", lifted.output_len(), reference.len())?;
    Error::check_len("initial state", lifted.n_x, x0.len())?;
    let bound = gain_bound(lifted)?;
    let gamma = match config.gamma {
        Some(g) => g,
        None if bound.is_finite() => bound / 2.0,
        None => 1.0,
    };
    if !(gamma > 0.0 && gamma < bound) {
        return Err(Error::DivergentGain { gamma, bound });
    }
    let mut u = match &config.initial_input {
        Some(u0) => {
            Error::check_len("initial input", lifted.input_len(), u0.len())?;
            u0.clone()
        }
        None => DVector::zeros(lifted.input_len()),
    };

    let free = &lifted.l * x0;
    let mut y = &lifted.g * &u + &free;
    let mut error = reference - &y;
    let mut error_norms = vec![error.norm()];
    let mut iterations = 0;
    while error_norms[iterations] > config.err_tol && iterations < config.max_iters {
        u += lifted.g.tr_mul(&error) * gamma;
        y = &lifted.g * &u + &free;
        error = reference - &y;
        error_norms.push(error.norm());
        iterations += 1;
    }
    let converged = error_norms[iterations] <= config.err_tol;
    Ok(IlcRun {
        u_final: u,
        y_final: y,
        error_norms,
        iterations,
        converged,
        learning_gain: gamma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system_model::LtvSystem;
    use nalgebra::DMatrix;

    fn integrator() -> LtvSystem {
        let s = |v: f64| DMatrix::from_element(1, 1, v);
        LtvSystem::time_invariant(s(1.0), s(1.0), s(1.0), s(0.0), DVector::zeros(1), 2).unwrap()
    }

    #[test]
    fn free_response_reference_converges_immediately() {
        let sys = LtvSystem::time_invariant(
            DMatrix::from_element(1, 1, 0.9),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 0.0),
            DVector::from_element(1, 2.0),
            4,
        )
        .unwrap();
        let lifted = sys.lift();
        let r = &lifted.l * sys.x0();
        let run = gradient_ilc(&lifted, sys.x0(), &r, &IlcConfig::default()).unwrap();
        assert!(run.converged);
        assert_eq!(run.iterations, 0);
        assert_eq!(run.u_final, DVector::zeros(4));
    }

    #[test]
    fn integrator_iterates_follow_closed_form() {
        // G = [[0,0],[1,0]], r = (0,1): with gain γ the input is
        // u_k = (1 - (1-γ)^k, 0), which tends to the minimum-norm solution (1, 0).
        let lifted = integrator().lift();
        let r = DVector::from_vec(vec![0.0, 1.0]);
        let gamma = 0.5;
        for k in [1usize, 2, 5, 20] {
            let config = IlcConfig {
                gamma: Some(gamma),
                max_iters: k,
                err_tol: 0.0,
                initial_input: None,
            };
            let run = gradient_ilc(&lifted, &DVector::zeros(1), &r, &config).unwrap();
            let expected = 1.0 - (1.0_f64 - gamma).powi(k as i32);
            assert!((run.u_final[0] - expected).abs() < 1e-15);
            assert_eq!(run.u_final[1], 0.0);
            assert_eq!(run.error_norms.len(), k + 1);
        }
    }

    #[test]
    fn divergent_gain_rejected() {
        let lifted = integrator().lift();
        let config = IlcConfig {
            gamma: Some(2.0),
            ..IlcConfig::default()
        };
        let r = DVector::from_vec(vec![0.0, 1.0]);
        assert!(matches!(
            gradient_ilc(&lifted, &DVector::zeros(1), &r, &config),
            Err(Error::DivergentGain { .. })
        ));
        let negative = IlcConfig {
            gamma: Some(-0.1),
            ..IlcConfig::default()
        };
        assert!(gradient_ilc(&lifted, &DVector::zeros(1), &r, &negative).is_err());
    }

    #[test]
    fn tracking_error_basics() {
        let r = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(tracking_error(&r, &r).unwrap().norm, 0.0);
        let e = tracking_error(&DVector::zeros(4), &r).unwrap();
        assert_eq!(e.norm, 1.0);
        assert_eq!(e.rms, 0.5);
        assert!(tracking_error(&DVector::zeros(3), &r).is_err());
    }
}
