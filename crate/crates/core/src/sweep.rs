//! Randomized property sweep over small systems.
//!
//! Draws random LTV systems and pairs, then measures the worst violation of
//! each core property against its threshold. Seeded, so runs are repeatable.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::behavior::BehaviorDecomposition;
use crate::error::Result;
use crate::similarity::{check_similar, SimilarityReport, DEFAULT_SIMILARITY_TOL};
use crate::system_model::LtvSystem;
use crate::transfer::{constrained_projection_oracle, TransferOptions, TransferPlan};

/// Upper bounds on randomly drawn dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dims {
    pub max_states: usize,
    pub max_inputs: usize,
    pub max_outputs: usize,
    pub max_horizon: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Self {
            max_states: 4,
            max_inputs: 2,
            max_outputs: 2,
            max_horizon: 8,
        }
    }
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0) * scale)
}

pub fn random_vector<R: Rng>(rng: &mut R, len: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(len, |_, _| rng.random_range(-1.0..1.0) * scale)
}

/// Random time-varying system with the given dimensions. `A(t)` entries are
/// scaled by `1/n_x` to keep state growth moderate over short horizons.
pub fn random_system_with<R: Rng>(
    rng: &mut R,
    n_x: usize,
    n_u: usize,
    n_y: usize,
    horizon: usize,
) -> LtvSystem {
    let a_scale = 1.2 / n_x as f64;
    let a = (0..horizon)
        .map(|_| random_matrix(rng, n_x, n_x, a_scale))
        .collect();
    let b = (0..horizon)
        .map(|_| random_matrix(rng, n_x, n_u, 1.0))
        .collect();
    let c = (0..horizon)
        .map(|_| random_matrix(rng, n_y, n_x, 1.0))
        .collect();
    let d = (0..horizon)
        .map(|_| random_matrix(rng, n_y, n_u, 1.0))
        .collect();
    let x0 = random_vector(rng, n_x, 1.0);
    LtvSystem::new(a, b, c, d, x0).expect("random dimensions are consistent")
}

pub fn random_system<R: Rng>(rng: &mut R, dims: Dims) -> LtvSystem {
    let n_x = rng.random_range(1..=dims.max_states);
    let n_u = rng.random_range(1..=dims.max_inputs);
    let n_y = rng.random_range(1..=dims.max_outputs);
    let horizon = rng.random_range(1..=dims.max_horizon);
    random_system_with(rng, n_x, n_u, n_y, horizon)
}

/// Random host/guest pair sharing `(n_u, n_y, T)` with `n_y <= n_u`, which
/// makes the pair similar for generic feedthrough matrices. State dimensions
/// are drawn independently. Redraws until the common-trajectory test passes.
pub fn random_similar_pair<R: Rng>(rng: &mut R, dims: Dims) -> (LtvSystem, LtvSystem) {
    loop {
        let n_u = rng.random_range(1..=dims.max_inputs);
        let n_y = rng.random_range(1..=dims.max_outputs.min(n_u));
        let horizon = rng.random_range(1..=dims.max_horizon);
        let n_x1 = rng.random_range(1..=dims.max_states);
        let n_x2 = rng.random_range(1..=dims.max_states);
        let host = random_system_with(rng, n_x1, n_u, n_y, horizon);
        let guest = random_system_with(rng, n_x2, n_u, n_y, horizon);
        let check = check_similar(
            &host.lift(),
            host.x0(),
            &guest.lift(),
            guest.x0(),
            DEFAULT_SIMILARITY_TOL,
        )
        .expect("pair dimensions match");
        if check.similar {
            return (host, guest);
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub seed: u64,
    pub systems: usize,
    pub pairs: usize,
    pub members_per_system: usize,
    pub optimality_samples: usize,
    pub dims: Dims,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            systems: 100,
            pairs: 200,
            members_per_system: 100,
            optimality_samples: 1000,
            dims: Dims::default(),
        }
    }
}

/// Worst observed value of one property against its threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub worst: f64,
    pub threshold: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.worst <= self.threshold
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SweepSummary {
    pub checks: Vec<CheckOutcome>,
}

impl SweepSummary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }
}

struct Worst(f64);

impl Worst {
    fn see(&mut self, v: f64) {
        // NaN must register as a failure.
        if v.is_nan() || v > self.0 {
            self.0 = if v.is_nan() { f64::INFINITY } else { v };
        }
    }
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut lifting = Worst(0.0);
    let mut orthonormal = Worst(0.0);
    let mut kernel = Worst(0.0);
    let mut affine = Worst(0.0);
    for _ in 0..config.systems {
        let sys = random_system(&mut rng, config.dims);
        let lifted = sys.lift();
        let u = random_vector(&mut rng, lifted.input_len(), 1.0);
        let y = sys.rollout(&u, sys.x0())?.y;
        let lifted_y = lifted.output(&u, sys.x0())?;
        lifting.see((&y - lifted_y).norm() / (1.0 + y.norm()));

        let dec = BehaviorDecomposition::new(&lifted, sys.x0())?;
        let h = dec.basis();
        let k = h.ncols();
        orthonormal.see((h.tr_mul(h) - DMatrix::identity(k, k)).amax());
        kernel.see((lifted.constraint_matrix() * h).amax());

        let bound = 1.0 + dec.free_response().norm();
        for _ in 0..config.members_per_system {
            let w1 = dec.member(&random_vector(&mut rng, k, 1.0))?;
            let w2 = dec.member(&random_vector(&mut rng, k, 1.0))?;
            let alpha = rng.random_range(-2.0..3.0);
            let combo = &w1 * alpha + &w2 * (1.0 - alpha);
            affine.see(dec.contains(&combo, 0.0)?.residual / bound);
        }
    }

    let mut oracle_gap = Worst(0.0);
    let mut admissibility = Worst(0.0);
    let mut optimality = Worst(0.0);
    let options = TransferOptions::default();
    for _ in 0..config.pairs {
        let (host_sys, guest_sys) = random_similar_pair(&mut rng, config.dims);
        let host = BehaviorDecomposition::new(&host_sys.lift(), host_sys.x0())?;
        let guest = BehaviorDecomposition::new(&guest_sys.lift(), guest_sys.x0())?;
        let report = SimilarityReport::compute(&host, &guest, DEFAULT_SIMILARITY_TOL)?;
        let plan = TransferPlan::new(&host, &guest, &report, options)?;
        let k = guest.basis().ncols();
        let w_g = guest.member(&random_vector(&mut rng, k, 2.0))?;
        let result = plan.transfer(&w_g)?;
        let oracle = constrained_projection_oracle(host.lifted(), host.x0(), &w_g)?;
        oracle_gap.see((&result.w_h - &oracle).norm() / (1.0 + oracle.norm()));
        admissibility.see(result.host_residual / (1.0 + host.free_response().norm()));
        for _ in 0..config.optimality_samples {
            let w = host.member(&random_vector(&mut rng, k, 3.0))?;
            optimality.see(result.distance - (&w_g - w).norm());
        }
    }

    Ok(SweepSummary {
        checks: vec![
            CheckOutcome {
                name: "lifting matches rollout",
                worst: lifting.0,
                threshold: 1e-10,
            },
            CheckOutcome {
                name: "basis orthonormal",
                worst: orthonormal.0,
                threshold: 1e-10,
            },
            CheckOutcome {
                name: "basis in kernel",
                worst: kernel.0,
                threshold: 1e-10,
            },
            CheckOutcome {
                name: "affine combinations admissible",
                worst: affine.0,
                threshold: 1e-9,
            },
            CheckOutcome {
                name: "transfer matches oracle",
                worst: oracle_gap.0,
                threshold: 1e-7,
            },
            CheckOutcome {
                name: "transferred trajectory admissible",
                worst: admissibility.0,
                threshold: 1e-8,
            },
            CheckOutcome {
                name: "transfer optimal over samples",
                worst: optimality.0,
                threshold: 1e-9,
            },
        ],
    })
}
