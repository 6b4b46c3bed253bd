//! Similarity analysis and experience transfer between finite-horizon
//! discrete linear time-varying systems.
//!
//! The admissible behavior of a system with a fixed initial state is an affine
//! set of stacked input/output trajectories. This crate decomposes such sets,
//! measures how close two of them are through principal angles, and maps a
//! trajectory that solved a task on one system (the guest) to the closest
//! admissible trajectory of another (the host).
//!
//! ```
//! use nalgebra::{DMatrix, DVector};
//! use simlearn::{BehaviorDecomposition, LtvSystem, similarity_indexes};
//!
//! let s = |v: f64| DMatrix::from_element(1, 1, v);
//! let host = LtvSystem::time_invariant(s(0.0), s(0.0), s(1.0), s(0.0), DVector::zeros(1), 1)?;
//! let guest = LtvSystem::time_invariant(s(0.0), s(0.0), s(1.0), s(1.0), DVector::zeros(1), 1)?;
//! let h = BehaviorDecomposition::new(&host.lift(), host.x0())?;
//! let g = BehaviorDecomposition::new(&guest.lift(), guest.x0())?;
//! let report = similarity_indexes(&h, &g)?;
//! assert!((report.s[0] - 0.5_f64.sqrt()).abs() < 1e-12);
//! # Ok::<(), simlearn::Error>(())
//! ```

pub mod behavior;
pub mod error;
pub mod experiment;
pub mod ilc;
mod linalg;
pub mod scenario;
pub mod similarity;
pub mod sweep;
pub mod system_model;
pub mod transfer;

pub use behavior::{project_subspace, BehaviorDecomposition, KernelBasis, Membership};
pub use error::{Error, ErrorCategory, Result};
pub use experiment::{emit_outputs, run_demo, run_scenario, DemoExample, ExperimentResults};
pub use ilc::{gradient_ilc, tracking_error, IlcConfig, IlcRun, TrackingError};
pub use scenario::{load_scenario, Scenario};
pub use similarity::{
    check_similar, principal_angles_bruteforce, principal_cosines, similarity_indexes,
    SimilarityCheck, SimilarityReport,
};
pub use system_model::{LiftedOperators, LtvSystem, MatrixSchedule, SystemSpec, Trajectory};
pub use transfer::{
    constrained_projection_oracle, extract_experience, similarity_based_learning, Experience,
    TransferOptions, TransferPlan, TransferResult,
};
